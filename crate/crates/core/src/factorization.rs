//! Approximation of a single atom by the bilinear form g R h - h R~ g, and
//! the level-by-level weak factorization with its residual-decay ledger.
//!
//! Every atom is evaluated in canonical units (support radius 1, unit sup
//! norm): the kernel integrals behind the construction are invariant under
//! that normalization, so one canonical evaluation serves every scaled copy
//! of a shape. Results are memoized by the exact bit pattern of the
//! canonical shape, which makes cached and uncached runs bitwise identical.

use std::collections::HashMap;
use std::sync::{Arc, RwLock};

use rayon::prelude::*;

use crate::atoms::{decompose_two_bump, Atom, AtomicDecomposition, TwoBumpDecomposition, TwoBumpFunction};
use crate::error::{Error, Result};
use crate::measure::{measure, p_range, BesselParam, Interval};
use crate::operators::{riesz_adjoint_apply, riesz_apply, LipschitzSymbol};
use crate::quad::QuadratureSpec;
use crate::step::StepFunction;

/// Headroom added to max(1/k1, 1/k2) + 1 when deriving the pairing constant.
const K0_MARGIN: f64 = 0.125;
/// The adjoint value at the atom center scales like 1/M; values below
/// DENOM_FLOOR / M signal a misconfigured schedule.
const DENOM_FLOOR: f64 = 1e-3;
/// Margin applied to the epsilon constraint when selecting M: the residual
/// certificate carries a real constant next to log2(M) / M^(2p - 1), and the
/// far-field case lands right at epsilon without this headroom.
const SCHEDULE_MARGIN: f64 = 8.0;

/// Which side of x0 the companion interval lands on: case A (x0 <= 2 M r)
/// pushes it far to the right, case B (x0 > 2 M r) pulls it slightly left.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Case {
    A,
    B,
}

impl std::fmt::Display for Case {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            Case::A => write!(f, "a"),
            Case::B => write!(f, "b"),
        }
    }
}

/// The constant schedule of the single-atom approximation: the pairing
/// constant K0 above the kernel sign regimes, the separation scale M, and
/// the exponents 1/p = 1/q + 1/r.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ConstantSchedule {
    pub k0: f64,
    pub m: f64,
    pub epsilon: f64,
    pub p: f64,
    pub q: f64,
    pub r: f64,
}

impl ConstantSchedule {
    /// Derives the schedule from certified regime constants: K0 just above
    /// max(1/k1, 1/k2) + 1, M the smallest power of two with M >= 100 K0 and
    /// log2(M) / M^(2p - 1) < epsilon^p, and the symmetric split q = r = 2p.
    pub fn derive(
        lam: BesselParam,
        p: f64,
        epsilon: f64,
        regime: &crate::kernels::KernelRegimeConstants,
    ) -> Result<Self> {
        if !p_range(lam).contains(p) {
            return Err(Error::InvalidParam(format!(
                "p = {p} outside the admissible range {}",
                p_range(lam)
            )));
        }
        if !(epsilon > 0.0 && epsilon < 1.0) {
            return Err(Error::InvalidParam(format!(
                "epsilon must lie in (0, 1), got {epsilon}"
            )));
        }
        let k0 = (1.0 / regime.k1).max(1.0 / regime.k2) + 1.0 + K0_MARGIN;
        let mut m = 128.0f64;
        while m < 2f64.powi(40) {
            if m >= 100.0 * k0 && m.log2() / m.powf(2.0 * p - 1.0) < epsilon.powf(p) / SCHEDULE_MARGIN {
                let schedule = Self {
                    k0,
                    m,
                    epsilon,
                    p,
                    q: 2.0 * p,
                    r: 2.0 * p,
                };
                schedule.validate(lam, regime)?;
                return Ok(schedule);
            }
            m *= 2.0;
        }
        Err(Error::InvalidParam(format!(
            "no admissible M below 2^40 for p = {p}, epsilon = {epsilon}"
        )))
    }

    pub fn validate(
        &self,
        lam: BesselParam,
        regime: &crate::kernels::KernelRegimeConstants,
    ) -> Result<()> {
        let floor = (1.0 / regime.k1).max(1.0 / regime.k2) + 1.0;
        if !(self.k0 > floor) {
            return Err(Error::InvalidParam(format!(
                "k0 = {} must exceed max(1/k1, 1/k2) + 1 = {floor}",
                self.k0
            )));
        }
        if !(self.m >= 100.0 * self.k0) {
            return Err(Error::InvalidParam(format!(
                "M = {} below 100 K0 = {}",
                self.m,
                100.0 * self.k0
            )));
        }
        if !(self.m.log2() / self.m.powf(2.0 * self.p - 1.0) < self.epsilon.powf(self.p)) {
            return Err(Error::InvalidParam(format!(
                "M = {} too small for epsilon = {}",
                self.m, self.epsilon
            )));
        }
        if !p_range(lam).contains(self.p) {
            return Err(Error::InvalidParam(format!(
                "p = {} outside the admissible range {}",
                self.p,
                p_range(lam)
            )));
        }
        if !(self.q > 1.0 && self.r > 1.0) {
            return Err(Error::InvalidParam("need q, r > 1".into()));
        }
        if ((1.0 / self.q + 1.0 / self.r) - 1.0 / self.p).abs() > 1e-12 {
            return Err(Error::InvalidParam(
                "exponents must satisfy 1/p = 1/q + 1/r".into(),
            ));
        }
        Ok(())
    }

    pub fn case_for(&self, x0: f64, r: f64) -> Case {
        if x0 <= 2.0 * self.m * r {
            Case::A
        } else {
            Case::B
        }
    }

    pub fn y0_for(&self, case: Case, x0: f64, r: f64) -> f64 {
        match case {
            Case::A => x0 + 2.0 * self.m * self.k0 * r,
            Case::B => x0 - self.m * r / self.k0,
        }
    }
}

/// Sampling resolutions for the residual bumps.
#[derive(Debug, Clone, Copy)]
pub struct SamplingConfig {
    /// Each atom cell is split into this many subcells when sampling W1.
    pub w_refine: usize,
    /// Bounds on the number of sample cells for W2 on the companion interval.
    pub w2_min_cells: usize,
    pub w2_max_cells: usize,
}

impl Default for SamplingConfig {
    fn default() -> Self {
        Self {
            w_refine: 4,
            w2_min_cells: 8,
            w2_max_cells: 64,
        }
    }
}

/// The factor pair of one approximated atom: g an indicator, h a scaled copy
/// of the atom, plus the bookkeeping the ledger reports.
#[derive(Debug, Clone)]
pub struct FactorPair {
    pub g: StepFunction,
    pub h: StepFunction,
    pub y0: f64,
    pub case_tag: Case,
    /// ||g||_q ||h||_r.
    pub product_norm: f64,
    /// The adjoint transform of g at the atom center (the h denominator).
    pub adjoint_at_center: f64,
}

/// Output of the single-atom approximation.
#[derive(Debug, Clone)]
pub struct AtomApproximation {
    pub pair: FactorPair,
    pub residual: TwoBumpFunction,
    pub residual_decomposition: TwoBumpDecomposition,
    /// Norm surrogate of the residual: must come out below epsilon.
    pub certified_eps: f64,
}

/// Canonical-unit evaluation of one atom shape (support I(t, 1), sup norm 1).
struct CanonicalApproximation {
    case: Case,
    y0u: f64,
    denom: f64,
    w1: StepFunction,
    w2: StepFunction,
}

/// Memo of canonical evaluations keyed by the exact bits of the canonical
/// shape. Entries are pure functions of their key, so concurrent fills give
/// identical results in any interleaving.
pub struct ShapeCache {
    map: RwLock<HashMap<Vec<u64>, Arc<CanonicalApproximation>>>,
}

impl ShapeCache {
    pub fn new() -> Self {
        Self {
            map: RwLock::new(HashMap::new()),
        }
    }

    pub fn len(&self) -> usize {
        self.map.read().unwrap().len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }
}

impl Default for ShapeCache {
    fn default() -> Self {
        Self::new()
    }
}

fn shape_key(profile: &StepFunction) -> Vec<u64> {
    let mut key = Vec::with_capacity(profile.breakpoints().len() + profile.values().len());
    key.extend(profile.breakpoints().iter().map(|b| b.to_bits()));
    key.extend(profile.values().iter().map(|v| v.to_bits()));
    key
}

fn canonical_approximation(
    unit_profile: &StepFunction,
    t: f64,
    schedule: &ConstantSchedule,
    lam: BesselParam,
    spec: &QuadratureSpec,
    sampling: &SamplingConfig,
) -> Result<CanonicalApproximation> {
    let case = schedule.case_for(t, 1.0);
    let y0u = schedule.y0_for(case, t, 1.0);
    debug_assert!((t - y0u).abs() >= 4.0);
    let g = StepFunction::indicator(y0u - 1.0, y0u + 1.0)?;

    let denom = riesz_adjoint_apply(&g, t, lam, spec)?;
    if denom.abs() < DENOM_FLOOR / schedule.m {
        return Err(Error::DenominatorDegeneracy {
            value: denom.abs(),
            threshold: DENOM_FLOOR / schedule.m,
        });
    }

    // W1 = a (denom - R~g(.)) / denom on the refined atom partition
    let part1 = unit_profile.refined_partition(sampling.w_refine);
    let mut w1_vals = Vec::with_capacity(part1.len() - 1);
    for w in part1.windows(2) {
        let mid = 0.5 * (w[0] + w[1]);
        let adj = riesz_adjoint_apply(&g, mid, lam, spec)?;
        w1_vals.push(unit_profile.eval(mid) * (denom - adj) / denom);
    }
    let w1 = StepFunction::new(part1, w1_vals)?;

    // W2 = -R h on the companion interval
    let h = unit_profile.scale(-1.0 / denom);
    let n2 = (unit_profile.num_cells() * sampling.w_refine)
        .clamp(sampling.w2_min_cells, sampling.w2_max_cells);
    let part2: Vec<f64> = (0..=n2)
        .map(|k| (y0u - 1.0) + 2.0 * k as f64 / n2 as f64)
        .collect();
    let mut w2_vals = Vec::with_capacity(n2);
    for w in part2.windows(2) {
        let mid = 0.5 * (w[0] + w[1]);
        w2_vals.push(-riesz_apply(&h, mid, lam, spec)?);
    }
    let mut w2 = StepFunction::new(part2, w2_vals)?;

    // rebalance: a - Pi(g, h) integrates to zero by adjointness, so the
    // sampled bumps are shifted to share that cancellation exactly
    let imbalance = w1.integrate(lam) + w2.integrate(lam);
    let companion = Interval::new(y0u, 1.0)?;
    let shift = StepFunction::indicator(companion.lo(), companion.hi())?
        .scale(imbalance / measure(&companion, lam));
    w2 = w2.sub(&shift);

    Ok(CanonicalApproximation {
        case,
        y0u,
        denom,
        w1,
        w2,
    })
}

/// Approximates a p-atom by a factor pair (g, h) built from the schedule,
/// returning the pair, the two-bump residual a - Pi(g, h) in sampled form,
/// its atomic decomposition, and the certified norm surrogate.
pub fn approximate_atom(
    atom: &Atom,
    schedule: &ConstantSchedule,
    lam: BesselParam,
    spec: &QuadratureSpec,
    sampling: &SamplingConfig,
    cache: Option<&ShapeCache>,
) -> Result<AtomApproximation> {
    if atom.p() != schedule.p {
        return Err(Error::InvalidParam(format!(
            "atom exponent {} differs from schedule exponent {}",
            atom.p(),
            schedule.p
        )));
    }
    let x0 = atom.center();
    let r = atom.radius();
    let amp = atom.profile().sup_norm();
    if amp == 0.0 {
        return Err(Error::InvalidParam("cannot approximate the zero atom".into()));
    }

    // canonical shape: coordinates divided by r, values by the sup norm
    let unit_profile = atom.profile().rescaled(1.0 / r, 1.0 / amp)?;
    let t = x0 / r;

    let canonical: Arc<CanonicalApproximation> = match cache {
        Some(c) => {
            let key = shape_key(&unit_profile);
            let hit = c.map.read().unwrap().get(&key).cloned();
            match hit {
                Some(entry) => entry,
                None => {
                    let fresh = Arc::new(canonical_approximation(
                        &unit_profile,
                        t,
                        schedule,
                        lam,
                        spec,
                        sampling,
                    )?);
                    c.map
                        .write()
                        .unwrap()
                        .entry(key)
                        .or_insert_with(|| fresh.clone())
                        .clone()
                }
            }
        }
        None => Arc::new(canonical_approximation(
            &unit_profile,
            t,
            schedule,
            lam,
            spec,
            sampling,
        )?),
    };

    let y0 = canonical.y0u * r;
    let g = StepFunction::indicator((canonical.y0u - 1.0) * r, (canonical.y0u + 1.0) * r)?;
    let h = atom.profile().scale(-1.0 / canonical.denom);
    let w1 = canonical.w1.rescaled(r, amp)?;
    let w2 = canonical.w2.rescaled(r, amp)?;

    debug_assert!((x0 - y0).abs() >= 4.0 * r);
    let residual = TwoBumpFunction::new(w1, w2, x0, y0, r, lam)?;
    let residual_decomposition = decompose_two_bump(&residual, schedule.p, lam)?;
    let certified_eps = residual_decomposition.hp_norm_upper();

    let product_norm =
        g.lp_norm(schedule.q, lam)? * h.lp_norm(schedule.r, lam)?;

    Ok(AtomApproximation {
        pair: FactorPair {
            g,
            h,
            y0,
            case_tag: canonical.case,
            product_norm,
            adjoint_at_center: canonical.denom,
        },
        residual,
        residual_decomposition,
        certified_eps,
    })
}

/// The bilinear form g R h - h R~ g sampled on the refined union of the two
/// supports. Principal values are only needed where the supports overlap.
pub fn bilinear_form(
    g: &StepFunction,
    h: &StepFunction,
    lam: BesselParam,
    spec: &QuadratureSpec,
    resolution: usize,
) -> Result<StepFunction> {
    let mut partition: Vec<f64> = Vec::new();
    partition.extend(g.refined_partition(resolution));
    partition.extend(h.refined_partition(resolution));
    partition.sort_by(|a, b| a.partial_cmp(b).unwrap());
    partition.dedup();
    if partition.len() < 2 {
        return Ok(StepFunction::zero());
    }
    let mut values = Vec::with_capacity(partition.len() - 1);
    for w in partition.windows(2) {
        let mid = 0.5 * (w[0] + w[1]);
        let gv = g.eval(mid);
        let hv = h.eval(mid);
        let mut acc = 0.0;
        if gv != 0.0 {
            acc += gv * riesz_apply(h, mid, lam, spec)?;
        }
        if hv != 0.0 {
            acc -= hv * riesz_adjoint_apply(g, mid, lam, spec)?;
        }
        values.push(acc);
    }
    StepFunction::new(partition, values)
}

/// One level of the iterative factorization.
#[derive(Debug, Clone)]
pub struct FactorizationLevel {
    /// (alpha, pair) per atom of this level; empty when pair recording is off.
    pub pairs: Vec<(f64, FactorPair)>,
    pub atom_count: usize,
    /// Sum of |alpha|^p over this level's atoms.
    pub tally: f64,
    /// Norm surrogate of the residual left after this level.
    pub residual_bound: f64,
    /// Largest certified eps among this level's approximations.
    pub max_certified_eps: f64,
    /// Largest ||g||_q ||h||_r among this level's pairs.
    pub max_product_norm: f64,
}

/// The full ledger of a weak factorization run.
#[derive(Debug, Clone)]
pub struct FactorizationResult {
    pub levels: Vec<FactorizationLevel>,
    /// Norm surrogate of the input decomposition.
    pub input_bound: f64,
    /// max over levels of residual_bound[k] / residual_bound[k-1].
    pub ec_ratio: f64,
}

impl FactorizationResult {
    pub fn residual_bounds(&self) -> Vec<f64> {
        self.levels.iter().map(|l| l.residual_bound).collect()
    }

    /// Total tally sum_k sum_j |alpha_j^k|^p across all levels.
    pub fn total_tally(&self) -> f64 {
        self.levels.iter().map(|l| l.tally).sum()
    }
}

/// Options for `weak_factorize`.
#[derive(Debug, Clone, Copy)]
pub struct FactorizeOptions {
    pub k_max: usize,
    /// Stop when the residual bound drops below this value.
    pub floor_tol: f64,
    /// Keep the per-pair records in the ledger (heavy at deep levels).
    pub record_pairs: bool,
    /// Process atoms of one level in parallel; the reduction stays ordered,
    /// so ledgers are bitwise identical in both modes.
    pub parallel: bool,
    pub sampling: SamplingConfig,
}

impl Default for FactorizeOptions {
    fn default() -> Self {
        Self {
            k_max: 3,
            floor_tol: 0.0,
            record_pairs: true,
            parallel: true,
            sampling: SamplingConfig::default(),
        }
    }
}

struct AtomOutcome {
    alpha: f64,
    pair: Option<FactorPair>,
    residual_terms: Option<Vec<(f64, Atom)>>,
    residual_tally: f64,
    certified_eps: f64,
    product_norm: f64,
}

/// Iterative weak factorization: every atom of the current level is replaced
/// by its factor pair; the residuals re-enter, pre-decomposed, as the next
/// level. Stops at `k_max` levels, at the floor tolerance, or with a
/// divergence report when the residual bounds stop decreasing.
pub fn weak_factorize(
    f: &AtomicDecomposition,
    schedule: &ConstantSchedule,
    lam: BesselParam,
    spec: &QuadratureSpec,
    options: &FactorizeOptions,
) -> Result<FactorizationResult> {
    if f.p() != schedule.p {
        return Err(Error::InvalidParam(
            "decomposition exponent differs from schedule exponent".into(),
        ));
    }
    let cache = ShapeCache::new();
    let input_bound = f.hp_norm_upper();
    let mut current: Vec<(f64, Atom)> = f.terms().to_vec();
    let mut levels: Vec<FactorizationLevel> = Vec::new();
    let mut prev_bound = input_bound;
    let mut stall_count = 0usize;
    let mut ec_ratio: f64 = 0.0;

    for k in 1..=options.k_max {
        if current.is_empty() {
            break;
        }
        let keep_terms = k < options.k_max;
        let process = |(alpha, atom): &(f64, Atom)| -> Result<AtomOutcome> {
            let approx = approximate_atom(atom, schedule, lam, spec, &options.sampling, Some(&cache))?;
            let pair_product = approx.pair.product_norm;
            let decomposition = approx.residual_decomposition.decomposition();
            let residual_tally = decomposition.tally();
            Ok(AtomOutcome {
                alpha: *alpha,
                pair: options.record_pairs.then_some(approx.pair),
                residual_terms: keep_terms.then(|| {
                    decomposition
                        .terms()
                        .iter()
                        .map(|(b, a)| (*b, a.clone()))
                        .collect()
                }),
                residual_tally,
                certified_eps: approx.certified_eps,
                product_norm: pair_product,
            })
        };
        let outcomes: Vec<AtomOutcome> = if options.parallel {
            current
                .par_iter()
                .map(process)
                .collect::<Result<Vec<_>>>()?
        } else {
            current.iter().map(process).collect::<Result<Vec<_>>>()?
        };

        // ordered sequential fold keeps the ledger deterministic
        let p = schedule.p;
        let mut tally = 0.0;
        let mut next_tally = 0.0;
        let mut pairs = Vec::new();
        let mut next: Vec<(f64, Atom)> = Vec::new();
        let mut max_eps: f64 = 0.0;
        let mut max_product: f64 = 0.0;
        for outcome in outcomes {
            let weight = outcome.alpha.abs().powf(p);
            tally += weight;
            next_tally += weight * outcome.residual_tally;
            max_eps = max_eps.max(outcome.certified_eps);
            max_product = max_product.max(outcome.product_norm);
            if let Some(pair) = outcome.pair {
                pairs.push((outcome.alpha, pair));
            }
            if let Some(terms) = outcome.residual_terms {
                for (beta, a) in terms {
                    next.push((outcome.alpha * beta, a));
                }
            }
        }
        let bound = next_tally.powf(1.0 / p);
        let atom_count = current.len();
        levels.push(FactorizationLevel {
            pairs,
            atom_count,
            tally,
            residual_bound: bound,
            max_certified_eps: max_eps,
            max_product_norm: max_product,
        });
        let ratio = bound / prev_bound;
        ec_ratio = ec_ratio.max(ratio);
        if bound >= prev_bound {
            stall_count += 1;
            if stall_count >= 2 {
                return Err(Error::DivergenceDetected { ratio });
            }
        } else {
            stall_count = 0;
        }
        prev_bound = bound;
        if bound < options.floor_tol {
            break;
        }
        current = next;
    }

    Ok(FactorizationResult {
        levels,
        input_bound,
        ec_ratio,
    })
}

/// Both sides of the pairing identity <b, f> = sum alpha <g, [b, R] h>,
/// truncated at each available level: returns the relative discrepancy per
/// truncation depth K = 1..levels.
pub fn pairing_check(
    b: &LipschitzSymbol,
    f: &AtomicDecomposition,
    result: &FactorizationResult,
    lam: BesselParam,
    spec: &QuadratureSpec,
) -> Result<Vec<f64>> {
    let f_step = f.reconstruct();
    let lhs = b.sample().mul(&f_step).integrate(lam);
    let mut rhs = 0.0;
    let mut out = Vec::with_capacity(result.levels.len());
    for level in &result.levels {
        if level.pairs.is_empty() && level.atom_count > 0 {
            return Err(Error::InvalidParam(
                "ledger has no recorded pairs; rerun with record_pairs".into(),
            ));
        }
        for (alpha, pair) in &level.pairs {
            rhs += alpha * commutator_pairing_term(b, pair, lam, spec)?;
        }
        out.push((lhs - rhs).abs() / lhs.abs().max(1e-300));
    }
    Ok(out)
}

/// <g, [b, R] h> for a factor pair with disjoint supports: sampled on the
/// union of g's cells with the symbol's partition, no principal values.
fn commutator_pairing_term(
    b: &LipschitzSymbol,
    pair: &FactorPair,
    lam: BesselParam,
    spec: &QuadratureSpec,
) -> Result<f64> {
    let (glo, ghi) = pair
        .g
        .support()
        .ok_or_else(|| Error::InvalidParam("factor pair with empty g".into()))?;
    let (hlo, hhi) = pair
        .h
        .support()
        .ok_or_else(|| Error::InvalidParam("factor pair with empty h".into()))?;
    if !(ghi <= hlo || hhi <= glo) {
        return Err(Error::InvalidParam(
            "pairing term needs disjoint supports".into(),
        ));
    }
    let bh = b.sample().mul(&pair.h);
    if b.sample().eval(0.5 * (glo + ghi)) == 0.0 && b.sample().support().is_some() {
        let (blo, bhi) = b.sample().support().unwrap();
        if blo > glo || bhi < ghi {
            return Err(Error::SupportMismatch(format!("[{glo:.4}, {ghi:.4}]")));
        }
    }
    // union partition: g's cells refined by the symbol's breakpoints
    let mut partition: Vec<f64> = vec![glo, ghi];
    for &bp in b.sample().breakpoints() {
        if bp > glo && bp < ghi {
            partition.push(bp);
        }
    }
    partition.sort_by(|a, b| a.partial_cmp(b).unwrap());
    partition.dedup();
    let mut acc = 0.0;
    for w in partition.windows(2) {
        let mid = 0.5 * (w[0] + w[1]);
        let gv = pair.g.eval(mid);
        if gv == 0.0 {
            continue;
        }
        let commutator =
            b.eval(mid) * riesz_apply(&pair.h, mid, lam, spec)? - riesz_apply(&bh, mid, lam, spec)?;
        acc += gv * commutator * measure_cell(w[0], w[1], lam);
    }
    Ok(acc)
}

fn measure_cell(lo: f64, hi: f64, lam: BesselParam) -> f64 {
    crate::measure::measure_endpoints(lo, hi, lam)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::kernels::KernelRegimeConstants;
    use crate::measure::measure_endpoints;
    use approx::assert_relative_eq;

    fn bp(l: f64) -> BesselParam {
        BesselParam::new(l).unwrap()
    }

    fn spec() -> QuadratureSpec {
        QuadratureSpec {
            rel_tol: 1e-9,
            max_subdivisions: 60,
            nodes_per_panel: 12,
        }
    }

    fn regime() -> KernelRegimeConstants {
        // certified values for lambda = 1 (see kernels tests); frozen here to
        // keep schedule derivation deterministic and cheap
        KernelRegimeConstants {
            k1: 0.999,
            k2: 0.499,
            c_k1: 1.27,
            c_k2: 0.12,
        }
    }

    fn test_atom(lam: BesselParam, p: f64, x0: f64, r: f64) -> Atom {
        let interval = Interval::new(x0, r).unwrap();
        let m = measure(&interval, lam);
        let h = m.powf(-1.0 / p);
        let mid = 0.5 * (interval.lo() + interval.hi());
        let m_left = measure_endpoints(interval.lo(), mid, lam);
        let m_right = measure_endpoints(mid, interval.hi(), lam);
        let profile = StepFunction::new(
            vec![interval.lo(), mid, interval.hi()],
            vec![h, -h * m_left / m_right],
        )
        .unwrap();
        Atom::new(interval, profile, p, lam).unwrap()
    }

    #[test]
    fn schedule_derivation() {
        let lam = bp(1.0);
        let s = ConstantSchedule::derive(lam, 1.0, 1.0 / 16.0, &regime()).unwrap();
        assert_relative_eq!(s.k0, 1.0 / 0.499 + 1.125, max_relative = 1e-12);
        assert_eq!(s.m, 2048.0);
        assert_eq!(s.q, 2.0);
        // smaller p needs a larger M for the same epsilon
        let s85 = ConstantSchedule::derive(lam, 0.85, 1.0 / 16.0, &regime()).unwrap();
        assert_eq!(s85.m, 32768.0);
        // inadmissible p rejected
        assert!(ConstantSchedule::derive(lam, 0.7, 1.0 / 16.0, &regime()).is_err());
    }

    #[test]
    fn case_selection_arithmetic() {
        let s = ConstantSchedule {
            k0: 4.0,
            m: 128.0,
            epsilon: 0.0625,
            p: 1.0,
            q: 2.0,
            r: 2.0,
        };
        // x0 = 1, r = 1/4: x0 <= 2 M r = 64, case a, y0 = 1 + 2 M K0 r = 257
        assert_eq!(s.case_for(1.0, 0.25), Case::A);
        assert_relative_eq!(s.y0_for(Case::A, 1.0, 0.25), 257.0);
        // x0 = 10^4, r = 1: x0 > 2 M r = 256, case b, y0 = 10^4 - M/K0
        assert_eq!(s.case_for(1e4, 1.0), Case::B);
        assert_relative_eq!(s.y0_for(Case::B, 1e4, 1.0), 1e4 - 32.0);
        assert_eq!(format!("{}", Case::A), "a");
        assert_eq!(format!("{}", Case::B), "b");
    }

    #[test]
    fn approximate_atom_certifies_below_epsilon() {
        let lam = bp(1.0);
        let s = spec();
        let schedule = ConstantSchedule::derive(lam, 1.0, 1.0 / 16.0, &regime()).unwrap();
        let atom = test_atom(lam, 1.0, 1.0, 0.25);
        let approx =
            approximate_atom(&atom, &schedule, lam, &s, &SamplingConfig::default(), None).unwrap();

        assert_eq!(approx.pair.case_tag, Case::A);
        assert!(approx.certified_eps < schedule.epsilon,
            "certified eps {} vs epsilon {}", approx.certified_eps, schedule.epsilon);

        // supports stay disjoint by the schedule arithmetic
        let (g_lo, _) = approx.pair.g.support().unwrap();
        let (_, h_hi) = approx.pair.h.support().unwrap();
        assert!(g_lo - h_hi >= 4.0 * atom.radius());

        // the adjoint value scales like 1/M
        assert!(approx.pair.adjoint_at_center.abs() * schedule.m > 1e-2);

        // residual cancellation: the sampled bumps integrate to zero
        let total = approx.residual.total().integrate(lam);
        let scale = atom.profile().lp_norm(1.0, lam).unwrap();
        assert!(total.abs() <= 1e-10 * scale);

        // product norm against the schedule's M power
        let cap = schedule.m.powf(2.0 * lam.lambda() / schedule.q + 1.0);
        assert!(approx.pair.product_norm <= 10.0 * cap);
    }

    #[test]
    fn approximate_atom_case_b_geometry() {
        let lam = bp(1.0);
        let s = spec();
        let schedule = ConstantSchedule::derive(lam, 1.0, 1.0 / 16.0, &regime()).unwrap();
        // x0 = 2^14 with r = 1 clears 2 M r = 1024
        let atom = test_atom(lam, 1.0, 16384.0, 1.0);
        let approx =
            approximate_atom(&atom, &schedule, lam, &s, &SamplingConfig::default(), None).unwrap();
        assert_eq!(approx.pair.case_tag, Case::B);
        assert!(approx.pair.y0 < atom.center());
        assert!(approx.pair.adjoint_at_center > 0.0);
        assert!(approx.certified_eps < schedule.epsilon);

        // measured W1 bound tracks the bracket
        // m(I(y0, r)) m(I(x0, r))^(-1/p) / m(I(x0, |x0 - y0|))
        let (c1, _) = approx.residual.bounds();
        let x0 = atom.center();
        let y0 = approx.pair.y0;
        let r = atom.radius();
        let bracket = measure(&Interval::new(y0, r).unwrap(), lam)
            * measure(&Interval::new(x0, r).unwrap(), lam).powf(-1.0 / schedule.p)
            / measure(&Interval::new(x0, (x0 - y0).abs()).unwrap(), lam);
        let ratio = c1 / bracket;
        assert!(
            ratio > 1e-3 && ratio < 1e3,
            "W1 bound off the bracket: ratio {ratio}"
        );
    }

    #[test]
    fn canonical_cache_is_scale_exact() {
        let lam = bp(1.0);
        let s = spec();
        let schedule = ConstantSchedule::derive(lam, 0.95, 1.0 / 16.0, &regime()).unwrap();
        let cache = ShapeCache::new();
        let a1 = test_atom(lam, 0.95, 3.0, 0.5);
        let first =
            approximate_atom(&a1, &schedule, lam, &s, &SamplingConfig::default(), Some(&cache))
                .unwrap();
        assert_eq!(cache.len(), 1);

        // a scaled copy of the same shape hits the cache and certifies with
        // the identical dimensionless numbers; power-of-two factors keep the
        // canonical normalization bit-exact
        let scale = 64.0f64;
        let amp = 2f64.powi(-20);
        let profile = a1.profile().rescaled(scale, amp).unwrap();
        let a2 = Atom::new(
            Interval::new(3.0 * scale, 0.5 * scale).unwrap(),
            profile,
            0.95,
            lam,
        )
        .unwrap();
        let second =
            approximate_atom(&a2, &schedule, lam, &s, &SamplingConfig::default(), Some(&cache))
                .unwrap();
        assert_eq!(cache.len(), 1, "scaled copy must reuse the canonical entry");
        assert_eq!(first.pair.adjoint_at_center, second.pair.adjoint_at_center);
        // the certificate is covariant: linear in the amplitude and scaling
        // with r^(deg / p) through the interval measures
        let covariance = amp * scale.powf(lam.degree() / 0.95);
        assert_relative_eq!(
            second.certified_eps,
            first.certified_eps * covariance,
            max_relative = 1e-12
        );

        // cached result equals the uncached evaluation bitwise
        let direct =
            approximate_atom(&a2, &schedule, lam, &s, &SamplingConfig::default(), None).unwrap();
        assert_eq!(direct.certified_eps, second.certified_eps);
        assert_eq!(direct.pair.y0, second.pair.y0);
    }

    #[test]
    fn bilinear_form_integrates_to_zero() {
        let lam = bp(1.0);
        let s = spec();
        let schedule = ConstantSchedule::derive(lam, 1.0, 1.0 / 16.0, &regime()).unwrap();
        let atom = test_atom(lam, 1.0, 1.0, 0.25);
        let approx =
            approximate_atom(&atom, &schedule, lam, &s, &SamplingConfig::default(), None).unwrap();
        let pi = bilinear_form(&approx.pair.g, &approx.pair.h, lam, &s, 8).unwrap();
        let mass = pi.integrate(lam);
        let scale = atom.profile().lp_norm(1.0, lam).unwrap();
        assert!(
            mass.abs() <= 1e-7 * scale,
            "Pi mass {mass} vs scale {scale}"
        );
        // and a - Pi matches the sampled residual on the sample partition
        let defect = atom
            .profile()
            .sub(&pi)
            .sub(&approx.residual.total())
            .sup_norm();
        assert!(
            defect <= 1e-2 * atom.profile().sup_norm(),
            "sampled residual defect {defect}"
        );
    }

    #[test]
    fn bilinearity_of_the_form() {
        // pointwise: Pi(g, 2h - h2/2)(x) = 2 Pi(g, h)(x) - Pi(g, h2)(x)/2 at
        // points where no principal value is involved
        let lam = bp(1.0);
        let s = spec();
        let g = StepFunction::indicator(5.0, 5.5).unwrap();
        let h = StepFunction::new(vec![1.0, 1.25, 1.5], vec![1.0, -0.8]).unwrap();
        let h2 = StepFunction::new(vec![1.1, 1.4], vec![0.7]).unwrap();
        let combo = h.scale(2.0).add(&h2.scale(-0.5));
        let pi_at = |hh: &StepFunction, x: f64| -> f64 {
            g.eval(x) * riesz_apply(hh, x, lam, &s).unwrap()
                - hh.eval(x) * riesz_adjoint_apply(&g, x, lam, &s).unwrap()
        };
        for x in [5.1, 5.45, 1.05, 1.3] {
            let lhs = pi_at(&combo, x);
            let rhs = 2.0 * pi_at(&h, x) - 0.5 * pi_at(&h2, x);
            assert!(
                (lhs - rhs).abs() <= 1e-7 * rhs.abs().max(1e-6),
                "defect at {x}: {lhs} vs {rhs}"
            );
        }
    }

    #[test]
    fn weak_factorize_single_atom_level_one() {
        let lam = bp(1.0);
        let s = spec();
        let schedule = ConstantSchedule::derive(lam, 1.0, 1.0 / 16.0, &regime()).unwrap();
        let atom = test_atom(lam, 1.0, 1.0, 0.25);
        let alpha = 2.5;
        let f = AtomicDecomposition::with_terms(vec![(alpha, atom)], 1.0).unwrap();
        let options = FactorizeOptions {
            k_max: 1,
            parallel: false,
            ..Default::default()
        };
        let result = weak_factorize(&f, &schedule, lam, &s, &options).unwrap();
        assert_eq!(result.levels.len(), 1);
        assert_eq!(result.levels[0].pairs.len(), 1);
        assert!(result.levels[0].residual_bound < schedule.epsilon * alpha);
    }

    #[test]
    fn weak_factorize_decay_and_determinism() {
        let lam = bp(1.0);
        let s = spec();
        let schedule = ConstantSchedule::derive(lam, 0.95, 1.0 / 16.0, &regime()).unwrap();
        let f = AtomicDecomposition::with_terms(
            vec![
                (1.0, test_atom(lam, 0.95, 1.0, 0.25)),
                (-0.5, test_atom(lam, 0.95, 40.0, 2.0)),
            ],
            0.95,
        )
        .unwrap();
        let options = FactorizeOptions {
            k_max: 2,
            parallel: false,
            ..Default::default()
        };
        let run1 = weak_factorize(&f, &schedule, lam, &s, &options).unwrap();
        assert_eq!(run1.levels.len(), 2);
        let bounds = run1.residual_bounds();
        assert!(bounds[0] < run1.input_bound);
        assert!(bounds[1] < bounds[0]);
        assert!(run1.ec_ratio < 1.0);

        // sequential rerun is bitwise identical
        let run2 = weak_factorize(&f, &schedule, lam, &s, &options).unwrap();
        assert_eq!(run1.residual_bounds(), run2.residual_bounds());
        assert_eq!(run1.total_tally(), run2.total_tally());

        // parallel mode gives the same ledger bit for bit
        let par = weak_factorize(
            &f,
            &schedule,
            lam,
            &s,
            &FactorizeOptions {
                parallel: true,
                ..options
            },
        )
        .unwrap();
        assert_eq!(run1.residual_bounds(), par.residual_bounds());
        assert_eq!(run1.total_tally(), par.total_tally());
    }

    #[test]
    fn pairing_discrepancy_shrinks_with_truncation_level() {
        let lam = bp(1.0);
        let s = spec();
        let schedule = ConstantSchedule::derive(lam, 1.0, 1.0 / 16.0, &regime()).unwrap();
        let atom = test_atom(lam, 1.0, 1.0, 0.25);
        let f = AtomicDecomposition::with_terms(vec![(1.0, atom)], 1.0).unwrap();
        let options = FactorizeOptions {
            k_max: 2,
            parallel: false,
            ..Default::default()
        };
        let result = weak_factorize(&f, &schedule, lam, &s, &options).unwrap();

        // symbol covering every support in the ledger: level-k companion
        // intervals sit near (2 M K0)^k times the input scale
        let alpha = 0.2;
        let b = LipschitzSymbol::from_fn(
            crate::operators::canonical_symbol_fn(alpha, lam),
            1e-4,
            1e10,
            4096,
            alpha,
            lam,
        )
        .unwrap();
        let disc = pairing_check(&b, &f, &result, lam, &s).unwrap();
        assert_eq!(disc.len(), 2);
        assert!(
            disc[1] < disc[0],
            "discrepancies should shrink: {disc:?}"
        );
        assert!(disc[1] < 0.05, "final discrepancy too large: {disc:?}");
    }

    #[test]
    fn constant_symbol_pairing_is_degenerate() {
        let lam = bp(1.0);
        let s = spec();
        let schedule = ConstantSchedule::derive(lam, 1.0, 1.0 / 16.0, &regime()).unwrap();
        let atom = test_atom(lam, 1.0, 1.0, 0.25);
        let f = AtomicDecomposition::with_terms(vec![(1.0, atom)], 1.0).unwrap();
        let options = FactorizeOptions {
            k_max: 1,
            parallel: false,
            ..Default::default()
        };
        let result = weak_factorize(&f, &schedule, lam, &s, &options).unwrap();
        let b = LipschitzSymbol::new(
            StepFunction::new(vec![1e-4, 1e10], vec![2.0]).unwrap(),
            0.2,
            lam,
        )
        .unwrap();
        // both sides vanish for a constant symbol against mean-zero data
        let f_step = f.reconstruct();
        let lhs = b.sample().mul(&f_step).integrate(lam);
        assert!(lhs.abs() < 1e-12);
        let term = commutator_pairing_term(&b, &result.levels[0].pairs[0].1, lam, &s).unwrap();
        assert!(term.abs() < 1e-10, "constant-symbol term {term}");
    }
}

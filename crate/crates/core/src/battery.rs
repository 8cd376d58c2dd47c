//! Deterministic test batteries: seeded atoms spanning the geometric regimes
//! (near-origin, Euclidean, both schedule cases) and Lipschitz symbols for
//! the commutator benchmarks.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::atoms::Atom;
use crate::error::Result;
use crate::factorization::{Case, ConstantSchedule};
use crate::measure::{measure, BesselParam, Interval};
use crate::operators::{canonical_symbol_fn, LipschitzSymbol};
use crate::step::StepFunction;

#[derive(Debug, Clone)]
pub struct BatteryConfig {
    /// Atoms per (lambda, p) entry targeting the near companion case.
    pub case_a_per_entry: usize,
    /// Atoms per entry targeting the far-field case.
    pub case_b_per_entry: usize,
    /// Center range sampled log-uniformly.
    pub center_range: (f64, f64),
    /// Cells per atom profile, inclusive range.
    pub profile_cells: (usize, usize),
}

impl Default for BatteryConfig {
    fn default() -> Self {
        Self {
            case_a_per_entry: 10,
            case_b_per_entry: 10,
            center_range: (1e-2, 1e2),
            profile_cells: (2, 6),
        }
    }
}

#[derive(Debug, Clone)]
pub struct BatteryAtom {
    pub lambda: f64,
    pub p: f64,
    pub expected_case: Case,
    pub atom: Atom,
}

/// Seeded battery of atoms for the given (lambda, schedule) entries. The
/// same seed always reproduces the same battery bit for bit.
pub fn battery_generate(
    seed: u64,
    entries: &[(BesselParam, ConstantSchedule)],
    cfg: &BatteryConfig,
) -> Result<Vec<BatteryAtom>> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut out = Vec::new();
    for (lam, schedule) in entries {
        for k in 0..(cfg.case_a_per_entry + cfg.case_b_per_entry) {
            let want_b = k >= cfg.case_a_per_entry;
            let (lo, hi) = cfg.center_range;
            let x0 = lo * (hi / lo).powf(rng.gen::<f64>());
            let r = if want_b {
                // x0 > 2 M r with one to two decades of slack
                x0 / (2.0 * schedule.m) * 10f64.powf(-rng.gen_range(0.2..2.0))
            } else if k % 3 == 0 {
                // near-origin regime: r comparable to the center
                x0 * rng.gen_range(0.6..0.98)
            } else {
                // still case a but away from the origin
                (x0 / (2.0 * schedule.m) * 10f64.powf(rng.gen_range(0.2..2.5))).min(0.5 * x0)
            };
            let atom = random_atom(&mut rng, *lam, schedule.p, x0, r, cfg.profile_cells)?;
            let expected_case = schedule.case_for(atom.center(), atom.radius());
            debug_assert_eq!(expected_case, if want_b { Case::B } else { Case::A });
            out.push(BatteryAtom {
                lambda: lam.lambda(),
                p: schedule.p,
                expected_case,
                atom,
            });
        }
    }
    Ok(out)
}

/// One random p-atom on I(x0, r): a mean-zero profile with a few cells and
/// sup norm just under the atom cap.
pub fn random_atom(
    rng: &mut ChaCha8Rng,
    lam: BesselParam,
    p: f64,
    x0: f64,
    r: f64,
    cells: (usize, usize),
) -> Result<Atom> {
    let interval = Interval::new(x0, r)?.normalized();
    let n = rng.gen_range(cells.0..=cells.1);
    let breaks: Vec<f64> = (0..=n)
        .map(|k| interval.lo() + (interval.hi() - interval.lo()) * k as f64 / n as f64)
        .collect();
    let masses: Vec<f64> = breaks
        .windows(2)
        .map(|w| crate::measure::measure_endpoints(w[0], w[1], lam))
        .collect();
    let total: f64 = masses.iter().sum();
    let mut values: Vec<f64> = (0..n).map(|_| rng.gen_range(-1.0..1.0)).collect();
    loop {
        // project onto mean zero against the cell masses
        let mean: f64 = values
            .iter()
            .zip(&masses)
            .map(|(v, m)| v * m)
            .sum::<f64>()
            / total;
        for v in &mut values {
            *v -= mean;
        }
        let sup = values.iter().fold(0.0f64, |a, v| a.max(v.abs()));
        if sup > 1e-3 {
            let cap = measure(&interval, lam).powf(-1.0 / p);
            let c = cap / sup * rng.gen_range(0.7..0.999);
            for v in &mut values {
                *v *= c;
            }
            break;
        }
        // degenerate draw; reseed the profile
        for v in &mut values {
            *v = rng.gen_range(-1.0..1.0);
        }
        values[0] += 2.0;
    }
    Atom::new(interval, StepFunction::new(breaks, values)?, p, lam)
}

/// Seeded Lipschitz symbols of order alpha on [lo, hi]: the canonical
/// m((0, x))^alpha profile first, then randomized alpha-growth walks.
pub fn symbol_battery(
    seed: u64,
    lam: BesselParam,
    alpha: f64,
    count: usize,
    range: (f64, f64),
    cells: usize,
) -> Result<Vec<LipschitzSymbol>> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0x73_79_6d_62_6f_6c);
    let (lo, hi) = range;
    let mut out = Vec::with_capacity(count);
    if count > 0 {
        out.push(LipschitzSymbol::from_fn(
            canonical_symbol_fn(alpha, lam),
            lo,
            hi,
            cells,
            alpha,
            lam,
        )?);
    }
    let canonical = canonical_symbol_fn(alpha, lam);
    while out.len() < count {
        // random walk with increments bounded by the canonical alpha-growth
        let breaks: Vec<f64> = (0..=cells)
            .map(|k| lo * (hi / lo).powf(k as f64 / cells as f64))
            .collect();
        let mut values = Vec::with_capacity(cells);
        let mut level = rng.gen_range(-1.0..1.0);
        let mut prev_mid = 0.5 * (breaks[0] + breaks[1]);
        for w in breaks.windows(2) {
            let mid = 0.5 * (w[0] + w[1]);
            let growth = canonical(mid) - canonical(prev_mid);
            level += rng.gen_range(-1.0..1.0) * growth;
            values.push(level);
            prev_mid = mid;
        }
        out.push(LipschitzSymbol::new(
            StepFunction::new(breaks, values)?,
            alpha,
            lam,
        )?);
    }
    Ok(out)
}

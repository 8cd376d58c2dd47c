//! p-atoms, atomic decompositions with their l^p bookkeeping, and the
//! executable decomposition of a mean-zero two-bump function into atoms on
//! dyadic dilates with a certified coefficient schedule.

use crate::error::{Error, Result};
use crate::measure::{measure, p_range, BesselParam, Interval};
use crate::step::StepFunction;

/// Relative slack allowed on the sup-norm bound of an atom.
pub const ATOM_SUP_SLACK: f64 = 1e-12;
/// Moment tolerance relative to sup * m(support).
pub const ATOM_MOMENT_TOL: f64 = 1e-10;
/// Balance tolerance for the total integral of a two-bump function,
/// relative to the larger wing mass.
pub const TWO_BUMP_BALANCE_TOL: f64 = 1e-9;

/// Outcome of checking the three atom conditions; never throws, reports
/// measured slacks instead.
#[derive(Debug, Clone, Copy)]
pub struct AtomCertificate {
    pub support_ok: bool,
    pub sup_ok: bool,
    /// sup |a| / m(I)^(-1/p) - 1 (positive means violation).
    pub sup_slack: f64,
    pub moment_ok: bool,
    /// |integral| / (sup |a| m(I)).
    pub moment_slack: f64,
}

impl AtomCertificate {
    pub fn passed(&self) -> bool {
        self.support_ok && self.sup_ok && self.moment_ok
    }
}

/// A step function certified as a p-atom: supported in `support`, sup norm at
/// most m(support)^(-1/p), zero integral.
#[derive(Debug, Clone)]
pub struct Atom {
    support: Interval,
    profile: StepFunction,
    p: f64,
}

impl Atom {
    pub fn new(support: Interval, profile: StepFunction, p: f64, lam: BesselParam) -> Result<Self> {
        let support = support.normalized();
        let cert = certify(&support, &profile, p, lam);
        if !cert.passed() {
            return Err(Error::InvalidParam(format!(
                "not a p-atom: support_ok={} sup_slack={:.3e} moment_slack={:.3e}",
                cert.support_ok, cert.sup_slack, cert.moment_slack
            )));
        }
        Ok(Self {
            support,
            profile,
            p,
        })
    }

    pub fn support(&self) -> &Interval {
        &self.support
    }

    pub fn profile(&self) -> &StepFunction {
        &self.profile
    }

    pub fn p(&self) -> f64 {
        self.p
    }

    pub fn center(&self) -> f64 {
        self.support.center()
    }

    pub fn radius(&self) -> f64 {
        self.support.radius()
    }

    pub fn validate(&self, lam: BesselParam) -> AtomCertificate {
        certify(&self.support, &self.profile, self.p, lam)
    }
}

/// Check the three atom conditions with measured slacks.
pub fn certify(
    support: &Interval,
    profile: &StepFunction,
    p: f64,
    lam: BesselParam,
) -> AtomCertificate {
    let m = measure(support, lam);
    let sup = profile.sup_norm();
    let cap = m.powf(-1.0 / p);
    let sup_slack = sup / cap - 1.0;
    let support_ok = match profile.support() {
        None => true,
        Some((lo, hi)) => {
            let slack = 1e-12 * (support.hi() - support.lo());
            lo >= support.lo() - slack && hi <= support.hi() + slack
        }
    };
    let moment = profile.integrate(lam);
    let moment_scale = (sup * m).max(f64::MIN_POSITIVE);
    AtomCertificate {
        support_ok,
        sup_ok: sup_slack <= ATOM_SUP_SLACK,
        sup_slack,
        moment_ok: moment.abs() <= ATOM_MOMENT_TOL * moment_scale,
        moment_slack: moment.abs() / moment_scale,
    }
}

/// A list of (coefficient, atom) pairs with the l^p tally that serves as the
/// H^p norm surrogate throughout.
#[derive(Debug, Clone)]
pub struct AtomicDecomposition {
    terms: Vec<(f64, Atom)>,
    p: f64,
}

impl AtomicDecomposition {
    pub fn new(p: f64) -> Self {
        Self {
            terms: Vec::new(),
            p,
        }
    }

    pub fn with_terms(terms: Vec<(f64, Atom)>, p: f64) -> Result<Self> {
        let mut d = Self::new(p);
        for (alpha, atom) in terms {
            d.push(alpha, atom)?;
        }
        Ok(d)
    }

    pub fn push(&mut self, alpha: f64, atom: Atom) -> Result<()> {
        if !alpha.is_finite() {
            return Err(Error::InvalidParam("coefficient must be finite".into()));
        }
        if atom.p() != self.p {
            return Err(Error::InvalidParam(format!(
                "atom exponent {} differs from decomposition exponent {}",
                atom.p(),
                self.p
            )));
        }
        self.terms.push((alpha, atom));
        Ok(())
    }

    pub fn terms(&self) -> &[(f64, Atom)] {
        &self.terms
    }

    pub fn p(&self) -> f64 {
        self.p
    }

    pub fn len(&self) -> usize {
        self.terms.len()
    }

    pub fn is_empty(&self) -> bool {
        self.terms.is_empty()
    }

    /// Sum of |alpha|^p.
    pub fn tally(&self) -> f64 {
        self.terms
            .iter()
            .map(|(a, _)| a.abs().powf(self.p))
            .sum()
    }

    /// (Sum |alpha|^p)^(1/p): an upper surrogate for the H^p norm; every
    /// "H^p norm" in this crate is such a surrogate.
    pub fn hp_norm_upper(&self) -> f64 {
        self.tally().powf(1.0 / self.p)
    }

    /// Pointwise sum of all terms.
    pub fn reconstruct(&self) -> StepFunction {
        let mut acc = StepFunction::zero();
        for (alpha, atom) in &self.terms {
            acc = acc.add(&atom.profile().scale(*alpha));
        }
        acc
    }

    /// Append every term of `other` with its coefficient multiplied by `scale`.
    pub fn extend_scaled(&mut self, scale: f64, other: &AtomicDecomposition) -> Result<()> {
        if other.p != self.p {
            return Err(Error::InvalidParam(
                "cannot merge decompositions with different exponents".into(),
            ));
        }
        for (alpha, atom) in &other.terms {
            self.push(scale * alpha, atom.clone())?;
        }
        Ok(())
    }
}

/// A mean-zero function split into two bumps of common radius `r` supported
/// in I(x1, r) and I(x2, r) with |x1 - x2| >= 4 r.
#[derive(Debug, Clone)]
pub struct TwoBumpFunction {
    f1: StepFunction,
    f2: StepFunction,
    x1: f64,
    x2: f64,
    r: f64,
    c1: f64,
    c2: f64,
}

impl TwoBumpFunction {
    pub fn new(
        f1: StepFunction,
        f2: StepFunction,
        x1: f64,
        x2: f64,
        r: f64,
        lam: BesselParam,
    ) -> Result<Self> {
        if !(r > 0.0 && x1 > 0.0 && x2 > 0.0) {
            return Err(Error::HypothesisViolation(
                "centers and radius must be positive".into(),
            ));
        }
        if (x1 - x2).abs() < 4.0 * r * (1.0 - 1e-12) {
            return Err(Error::HypothesisViolation(format!(
                "separation |x1 - x2| = {} below 4 r = {}",
                (x1 - x2).abs(),
                4.0 * r
            )));
        }
        for (f, x, tag) in [(&f1, x1, "first"), (&f2, x2, "second")] {
            if let Some((lo, hi)) = f.support() {
                // slack covers rescaling dust, which scales with the coordinate
                let slack = 1e-12 * (r + x);
                if lo < (x - r).max(0.0) - slack || hi > x + r + slack {
                    return Err(Error::HypothesisViolation(format!(
                        "{tag} bump leaves I({x}, {r})"
                    )));
                }
            }
        }
        let c1 = f1.sup_norm();
        let c2 = f2.sup_norm();
        let s1 = f1.integrate(lam);
        let s2 = f2.integrate(lam);
        let scale = s1.abs().max(s2.abs());
        let floor = 1e-14
            * (c1 * measure(&Interval::new(x1, r)?, lam) + c2 * measure(&Interval::new(x2, r)?, lam));
        if (s1 + s2).abs() > TWO_BUMP_BALANCE_TOL * scale + floor {
            return Err(Error::HypothesisViolation(format!(
                "total integral {} is not zero (wing masses {s1}, {s2})",
                s1 + s2
            )));
        }
        Ok(Self {
            f1,
            f2,
            x1,
            x2,
            r,
            c1,
            c2,
        })
    }

    pub fn wings(&self) -> (&StepFunction, &StepFunction) {
        (&self.f1, &self.f2)
    }

    pub fn centers(&self) -> (f64, f64) {
        (self.x1, self.x2)
    }

    pub fn radius(&self) -> f64 {
        self.r
    }

    /// Measured sup bounds of the two wings.
    pub fn bounds(&self) -> (f64, f64) {
        (self.c1, self.c2)
    }

    pub fn total(&self) -> StepFunction {
        self.f1.add(&self.f2)
    }

    pub fn separation_ratio(&self) -> f64 {
        (self.x1 - self.x2).abs() / self.r
    }
}

/// One produced atom with its dyadic-level bookkeeping.
#[derive(Debug, Clone)]
pub struct TwoBumpTerm {
    /// 1 or 2 for the wing; the two top-level atoms keep their wing index.
    pub wing: u8,
    /// Dyadic level j; the joint level is j0 + 1.
    pub level: u32,
    /// The dyadic interval I(x_i, 2^j r) (or the joint top interval).
    pub interval: Interval,
    pub alpha: f64,
    pub atom: Atom,
}

/// Result of the two-bump decomposition: terms in (wing, level) order whose
/// coefficient-weighted sum reconstructs the input exactly.
#[derive(Debug, Clone)]
pub struct TwoBumpDecomposition {
    pub terms: Vec<TwoBumpTerm>,
    pub j0: u32,
    p: f64,
}

impl TwoBumpDecomposition {
    pub fn decomposition(&self) -> AtomicDecomposition {
        let mut d = AtomicDecomposition::new(self.p);
        for t in &self.terms {
            d.push(t.alpha, t.atom.clone()).expect("terms share p");
        }
        d
    }

    pub fn hp_norm_upper(&self) -> f64 {
        self.decomposition().hp_norm_upper()
    }
}

/// Smallest integer strictly larger than log2(ratio).
pub fn dyadic_levels(ratio: f64) -> u32 {
    let l = ratio.log2();
    (l.floor() as i64 + 1).max(1) as u32
}

/// Decomposes a two-bump function into p-atoms on dyadic dilates: each wing
/// telescopes its mass through I(x_i, 2^j r), j = 1..j0, and the two wings
/// cancel against each other on the joint interval at level j0 + 1.
pub fn decompose_two_bump(
    f: &TwoBumpFunction,
    p: f64,
    lam: BesselParam,
) -> Result<TwoBumpDecomposition> {
    if !p_range(lam).contains(p) {
        return Err(Error::InvalidParam(format!(
            "p = {p} outside the admissible range {}",
            p_range(lam)
        )));
    }
    let j0 = dyadic_levels(f.separation_ratio());
    let (x1, x2) = f.centers();
    let r = f.radius();
    let top = Interval::new(0.5 * (x1 + x2), 2f64.powi(j0 as i32 + 1) * r)?;
    let m_top = measure(&top, lam);

    let mut terms: Vec<TwoBumpTerm> = Vec::with_capacity(2 * (j0 as usize + 1));
    let mut push = |wing: u8, level: u32, interval: Interval, piece: StepFunction| -> Result<()> {
        if piece.is_zero() {
            return Ok(());
        }
        let alpha = piece.sup_norm() * measure(&interval, lam).powf(1.0 / p);
        let atom = Atom::new(interval, piece.scale(1.0 / alpha), p, lam)?;
        terms.push(TwoBumpTerm {
            wing,
            level,
            interval,
            alpha,
            atom,
        });
        Ok(())
    };

    let (w1, w2) = f.wings();
    let (c1, c2) = f.bounds();
    for (wing, fw, xw, cw) in [(1u8, w1, x1, c1), (2u8, w2, x2, c2)] {
        let mut s = fw.integrate(lam);
        // rounding dust in the wing mass would telescope into junk atoms
        if s.abs() <= 1e-13 * cw * measure(&Interval::new(xw, r)?, lam) {
            s = 0.0;
        }
        let mut prev = fw.clone();
        let mut last_chi = StepFunction::zero();
        for j in 1..=j0 {
            let interval = Interval::new(xw, 2f64.powi(j as i32) * r)?;
            let tilde = s / measure(&interval, lam);
            let chi = StepFunction::indicator(interval.lo(), interval.hi())?.scale(tilde);
            let piece = prev.sub(&chi);
            push(wing, j, interval, piece)?;
            prev = chi.clone();
            last_chi = chi;
        }
        // joint level: each wing spreads its own mass over the top interval,
        // where the mean-zero hypothesis makes the two contributions cancel
        let tilde_top = s / m_top;
        let chi_top = StepFunction::indicator(top.lo(), top.hi())?.scale(tilde_top);
        let top_piece = last_chi.sub(&chi_top);
        push(wing, j0 + 1, top, top_piece)?;
    }

    Ok(TwoBumpDecomposition { terms, j0, p })
}

/// The closed-form norm bound the decomposition is checked against:
/// (D/r)^(1/p - 1) (log2(D/r))^(1/p) (sum C_i^p m(I(x_i, r)))^(1/p).
pub fn two_bump_norm_bound(f: &TwoBumpFunction, p: f64, lam: BesselParam) -> Result<f64> {
    let ratio = f.separation_ratio();
    let (x1, x2) = f.centers();
    let (c1, c2) = f.bounds();
    let mass = c1.powf(p) * measure(&Interval::new(x1, f.radius())?, lam)
        + c2.powf(p) * measure(&Interval::new(x2, f.radius())?, lam);
    Ok(ratio.powf(1.0 / p - 1.0) * ratio.log2().powf(1.0 / p) * mass.powf(1.0 / p))
}

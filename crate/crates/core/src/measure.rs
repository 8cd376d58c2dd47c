//! The measure m_lambda(dx) = x^(2 lambda) dx on the positive half-line and the
//! interval geometry I(x, r) = (x - r, x + r) clipped at the origin.
//!
//! All measures are computed with the exact antiderivative; quadrature appears
//! only in tests as an oracle.

use crate::error::{Error, Result};

/// The parameter lambda > 0 of the Bessel operator
/// `-d^2/dx^2 - (2 lambda / x) d/dx` on the half-line.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BesselParam {
    lambda: f64,
}

impl BesselParam {
    pub fn new(lambda: f64) -> Result<Self> {
        if !(lambda.is_finite() && lambda > 0.0) {
            return Err(Error::InvalidParam(format!(
                "lambda must be a positive finite real, got {lambda}"
            )));
        }
        Ok(Self { lambda })
    }

    #[inline]
    pub fn lambda(&self) -> f64 {
        self.lambda
    }

    /// Homogeneity degree 2 lambda + 1 of the measure.
    #[inline]
    pub fn degree(&self) -> f64 {
        2.0 * self.lambda + 1.0
    }

    /// Density x^(2 lambda) of the measure against Lebesgue.
    #[inline]
    pub fn weight(&self, x: f64) -> f64 {
        x.powf(2.0 * self.lambda)
    }
}

/// A ball I(x, r) in the half-line metric: the open interval (x - r, x + r)
/// intersected with (0, inf). `lo` is already clipped at 0.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Interval {
    center: f64,
    radius: f64,
    lo: f64,
    hi: f64,
}

impl Interval {
    pub fn new(center: f64, radius: f64) -> Result<Self> {
        if !(center.is_finite() && center > 0.0) {
            return Err(Error::InvalidParam(format!(
                "interval center must be positive, got {center}"
            )));
        }
        if !(radius.is_finite() && radius > 0.0) {
            return Err(Error::InvalidParam(format!(
                "interval radius must be positive, got {radius}"
            )));
        }
        let lo = (center - radius).max(0.0);
        let hi = center + radius;
        Ok(Self {
            center,
            radius,
            lo,
            hi,
        })
    }

    /// Interval from its clipped endpoints 0 <= lo < hi.
    pub fn from_endpoints(lo: f64, hi: f64) -> Result<Self> {
        if !(lo.is_finite() && hi.is_finite() && lo >= 0.0 && lo < hi) {
            return Err(Error::InvalidParam(format!(
                "endpoints must satisfy 0 <= lo < hi, got ({lo}, {hi})"
            )));
        }
        Self::new((lo + hi) / 2.0, (hi - lo) / 2.0)
    }

    #[inline]
    pub fn center(&self) -> f64 {
        self.center
    }

    #[inline]
    pub fn radius(&self) -> f64 {
        self.radius
    }

    #[inline]
    pub fn lo(&self) -> f64 {
        self.lo
    }

    #[inline]
    pub fn hi(&self) -> f64 {
        self.hi
    }

    /// Re-centers a clipped interval so that radius <= center always holds:
    /// I(x, r) with r > x equals I((x + r)/2, (x + r)/2) as a set, and all
    /// downstream constructions assume the normalized form.
    pub fn normalized(self) -> Self {
        if self.radius <= self.center {
            self
        } else {
            let half = self.hi / 2.0;
            Self {
                center: half,
                radius: half,
                lo: 0.0,
                hi: self.hi,
            }
        }
    }

    #[inline]
    pub fn contains(&self, x: f64) -> bool {
        x > self.lo && x < self.hi
    }

    pub fn contains_interval(&self, other: &Interval) -> bool {
        other.lo >= self.lo && other.hi <= self.hi
    }

    /// I(s x, s r) for s > 0.
    pub fn scaled(&self, s: f64) -> Result<Self> {
        Self::new(self.center * s, self.radius * s)
    }

    /// Same center, radius multiplied by `factor`.
    pub fn dilated(&self, factor: f64) -> Result<Self> {
        Self::new(self.center, self.radius * factor)
    }
}

/// m_lambda of the raw interval (lo, hi), 0 <= lo < hi: the exact value
/// (hi^a - lo^a) / a with a = 2 lambda + 1, evaluated in a form that keeps
/// full relative precision when hi - lo << lo.
pub fn measure_endpoints(lo: f64, hi: f64, lam: BesselParam) -> f64 {
    debug_assert!(lo >= 0.0 && hi > lo);
    let a = lam.degree();
    if lo == 0.0 {
        return hi.powf(a) / a;
    }
    // hi^a - lo^a = lo^a expm1(a ln(hi/lo)), with ln(hi/lo) = ln_1p((hi-lo)/lo)
    lo.powf(a) * (a * ((hi - lo) / lo).ln_1p()).exp_m1() / a
}

/// m_lambda(I) for an interval, exact closed form.
pub fn measure(interval: &Interval, lam: BesselParam) -> f64 {
    measure_endpoints(interval.lo(), interval.hi(), lam)
}

/// Comparability of m_lambda(I(x,r)) with the proxy x^(2 lambda) r + r^(2 lambda + 1).
/// Returns the ratio and its reciprocal; both are finite for x, r > 0.
pub fn doubling_comparability(x: f64, r: f64, lam: BesselParam) -> Result<(f64, f64)> {
    if !(x > 0.0 && r > 0.0) {
        return Err(Error::InvalidParam(format!(
            "doubling comparability needs x, r > 0, got ({x}, {r})"
        )));
    }
    let m = measure(&Interval::new(x, r)?, lam);
    let proxy = x.powf(2.0 * lam.lambda()) * r + r.powf(lam.degree());
    Ok((m / proxy, proxy / m))
}

/// The admissible exponent range ((2 lambda + 1)/(2 lambda + 2), 1] for the
/// atomic theory at parameter lambda.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PRange {
    inf: f64,
}

impl PRange {
    #[inline]
    pub fn inf(&self) -> f64 {
        self.inf
    }

    #[inline]
    pub fn sup(&self) -> f64 {
        1.0
    }

    /// Open at the lower endpoint, closed at 1.
    pub fn contains(&self, p: f64) -> bool {
        p > self.inf && p <= 1.0
    }
}

impl std::fmt::Display for PRange {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "({}, 1]", self.inf)
    }
}

pub fn p_range(lam: BesselParam) -> PRange {
    let l = lam.lambda();
    PRange {
        inf: (2.0 * l + 1.0) / (2.0 * l + 2.0),
    }
}

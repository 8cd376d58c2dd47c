//! The explicit theta-integral kernels of the Bessel setting: the Poisson
//! kernel, its conjugate, the Riesz transform kernel as the t -> 0 limit, and
//! the Hankel translation. Quadrature concentrates panels near theta = 0
//! where the integrand peaks as |x - y| -> 0; the (sin theta)^(2 lambda - 1)
//! endpoint factor is tamed by the substitution theta = u^2 whenever the
//! exponent is not a nonnegative integer.

use std::collections::HashMap;
use std::sync::RwLock;

use statrs::function::gamma::gamma;

use crate::error::{Error, Result};
use crate::measure::{measure, BesselParam, Interval};
use crate::quad::{self, QuadOutcome, QuadratureSpec};
use crate::step::StepFunction;

/// Exponent with fast paths for the small integer and half-integer powers
/// that dominate kernel evaluation.
#[derive(Debug, Clone, Copy)]
enum PowExp {
    Zero,
    One,
    Int(i32),
    HalfOdd(i32),
    General(f64),
}

impl PowExp {
    fn classify(e: f64) -> Self {
        if e == 0.0 {
            PowExp::Zero
        } else if e == 1.0 {
            PowExp::One
        } else if e.fract() == 0.0 && e.abs() <= 64.0 {
            PowExp::Int(e as i32)
        } else if (2.0 * e).fract() == 0.0 && (2.0 * e).abs() <= 127.0 {
            PowExp::HalfOdd((2.0 * e) as i32)
        } else {
            PowExp::General(e)
        }
    }

    #[inline]
    fn apply(self, base: f64) -> f64 {
        match self {
            PowExp::Zero => 1.0,
            PowExp::One => base,
            PowExp::Int(k) => base.powi(k),
            PowExp::HalfOdd(k) => base.sqrt().powi(k),
            PowExp::General(e) => base.powf(e),
        }
    }
}

/// Core theta integral shared by the three kernels:
/// int_0^pi n(theta) (sin theta)^(2 lambda - 1) / D(theta)^(lambda + 1) dtheta
/// with D = (x - y)^2 + t^2 + 4 x y sin^2(theta / 2) and n either 1 or
/// (x - y) + 2 y sin^2(theta / 2); both forms are exact rearrangements that
/// stay accurate near the diagonal.
fn theta_integral(
    x: f64,
    y: f64,
    t: f64,
    lam: BesselParam,
    spec: &QuadratureSpec,
    with_numerator: bool,
) -> QuadOutcome {
    let sin_exp = PowExp::classify(2.0 * lam.lambda() - 1.0);
    let den_exp = PowExp::classify(lam.lambda() + 1.0);
    let dd = (x - y) * (x - y) + t * t;
    let f = move |theta: f64| {
        let s = (0.5 * theta).sin();
        let s2 = s * s;
        let den = den_exp.apply(dd + 4.0 * x * y * s2);
        let sinp = sin_exp.apply(theta.sin());
        let num = if with_numerator {
            (x - y) + 2.0 * y * s2
        } else {
            1.0
        };
        num * sinp / den
    };

    // panels accumulate toward theta = 0 where the integrand concentrates
    let peak = (dd.sqrt() / (x * y).sqrt()).clamp(1e-13, 0.5);
    let breaks = quad::graded_breaks(0.0, std::f64::consts::PI, true, peak / std::f64::consts::PI);

    let e = 2.0 * lam.lambda() - 1.0;
    let endpoint_singular = e < 0.0 || (e.fract() != 0.0);
    if !endpoint_singular {
        return quad::integrate_with_breaks(f, &breaks, spec);
    }

    // substitute theta = u^2 at 0 and theta = pi - u^2 at pi
    let first = breaks[1];
    let last = breaks[breaks.len() - 2];
    let head = quad::integrate_endpoint_substituted(&f, 0.0, first, true, spec);
    let tail = quad::integrate_endpoint_substituted(&f, last, std::f64::consts::PI, false, spec);
    let mid = quad::integrate_with_breaks(&f, &breaks[1..breaks.len() - 1], spec);
    QuadOutcome {
        value: head.value + mid.value + tail.value,
        abs_error: head.abs_error + mid.abs_error + tail.abs_error,
        converged: head.converged && mid.converged && tail.converged,
    }
}

fn finish(prefactor: f64, out: QuadOutcome, spec: &QuadratureSpec) -> Result<f64> {
    if out.converged {
        Ok(prefactor * out.value)
    } else {
        Err(Error::QuadratureNonConvergence {
            value: prefactor * out.value,
            achieved: prefactor.abs() * out.abs_error,
            requested: spec.rel_tol,
        })
    }
}

/// Poisson kernel P_t(x, y), strictly positive.
pub fn poisson_kernel(
    t: f64,
    x: f64,
    y: f64,
    lam: BesselParam,
    spec: &QuadratureSpec,
) -> Result<f64> {
    if !(t > 0.0 && x > 0.0 && y > 0.0) {
        return Err(Error::InvalidParam(format!(
            "poisson kernel needs t, x, y > 0, got ({t}, {x}, {y})"
        )));
    }
    let pre = 2.0 * lam.lambda() * t / std::f64::consts::PI;
    finish(pre, theta_integral(x, y, t, lam, spec, false), spec)
}

/// Conjugate Poisson kernel Q_t(x, y); t = 0 is allowed off the diagonal and
/// gives the Riesz kernel.
pub fn conjugate_kernel(
    t: f64,
    x: f64,
    y: f64,
    lam: BesselParam,
    spec: &QuadratureSpec,
) -> Result<f64> {
    if !(t >= 0.0 && x > 0.0 && y > 0.0) {
        return Err(Error::InvalidParam(format!(
            "conjugate kernel needs t >= 0 and x, y > 0, got ({t}, {x}, {y})"
        )));
    }
    if t == 0.0 && x == y {
        return Err(Error::DiagonalEvaluation { x });
    }
    let pre = -2.0 * lam.lambda() / std::f64::consts::PI;
    finish(pre, theta_integral(x, y, t, lam, spec, true), spec)
}

/// Riesz transform kernel R(x, y) = lim_{t -> 0} Q_t(x, y), x != y.
pub fn riesz_kernel(x: f64, y: f64, lam: BesselParam, spec: &QuadratureSpec) -> Result<f64> {
    conjugate_kernel(0.0, x, y, lam, spec)
}

/// Riesz kernel value together with the quadrature error estimate.
pub fn riesz_kernel_with_error(
    x: f64,
    y: f64,
    lam: BesselParam,
    spec: &QuadratureSpec,
) -> Result<(f64, f64)> {
    if !(x > 0.0 && y > 0.0) {
        return Err(Error::InvalidParam(format!(
            "riesz kernel needs x, y > 0, got ({x}, {y})"
        )));
    }
    if x == y {
        return Err(Error::DiagonalEvaluation { x });
    }
    let pre = 2.0 * lam.lambda() / std::f64::consts::PI;
    let out = theta_integral(x, y, 0.0, lam, spec, true);
    if out.converged {
        Ok((-pre * out.value, pre * out.abs_error))
    } else {
        Err(Error::QuadratureNonConvergence {
            value: -pre * out.value,
            achieved: pre * out.abs_error,
            requested: spec.rel_tol,
        })
    }
}

/// Memoized Riesz kernel evaluation keyed by the ratio y/x: homogeneity
/// R(x, y) = x^-(2 lambda + 1) R(1, y/x) makes one entry serve every scale.
/// Values depend only on the key, so concurrent fills stay deterministic.
pub struct RieszKernelCache {
    lam: BesselParam,
    spec: QuadratureSpec,
    map: RwLock<HashMap<u64, f64>>,
}

impl RieszKernelCache {
    pub fn new(lam: BesselParam, spec: QuadratureSpec) -> Self {
        Self {
            lam,
            spec,
            map: RwLock::new(HashMap::new()),
        }
    }

    pub fn eval(&self, x: f64, y: f64) -> Result<f64> {
        let ratio = y / x;
        if ratio == 1.0 {
            return Err(Error::DiagonalEvaluation { x });
        }
        let key = ratio.to_bits();
        if let Some(&unit) = self.map.read().unwrap().get(&key) {
            return Ok(unit * x.powf(-self.lam.degree()));
        }
        let unit = riesz_kernel(1.0, ratio, self.lam, &self.spec)?;
        self.map.write().unwrap().insert(key, unit);
        Ok(unit * x.powf(-self.lam.degree()))
    }

    pub fn len(&self) -> usize {
        self.map.read().unwrap().len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }
}

/// Certified sign-regime constants for the Riesz kernel at parameter lambda:
/// on (0, k1] the kernel R(1, y) stays below -c_k1, and on (1, 1 + k2] the
/// normalized quantity R(1, y) y^lambda (y - 1) stays above c_k2.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct KernelRegimeConstants {
    pub k1: f64,
    pub k2: f64,
    pub c_k1: f64,
    pub c_k2: f64,
}

/// Points per sign certificate grid.
pub const REGIME_GRID: usize = 512;
/// Sign clearance demanded of every grid point; far above kernel quadrature
/// noise so certificates do not flip with the quadrature tolerance.
pub const SIGN_MARGIN: f64 = 1e-6;

const K1_SEARCH_CAP: f64 = 1.0 - 1.0 / 1024.0;
const K2_SEARCH_CAP: f64 = 0.5 - 1.0 / 1024.0;

fn k1_certificate(k: f64, lam: BesselParam, spec: &QuadratureSpec) -> Result<Option<f64>> {
    let mut min_abs = f64::INFINITY;
    for i in 1..=REGIME_GRID {
        let y = k * i as f64 / REGIME_GRID as f64;
        let r = riesz_kernel(1.0, y, lam, spec)?;
        if !(r <= -SIGN_MARGIN) {
            return Ok(None);
        }
        min_abs = min_abs.min(-r);
    }
    Ok(Some(min_abs))
}

fn k2_certificate(k: f64, lam: BesselParam, spec: &QuadratureSpec) -> Result<Option<f64>> {
    let mut min_q = f64::INFINITY;
    for i in 1..=REGIME_GRID {
        let y = 1.0 + k * i as f64 / REGIME_GRID as f64;
        let r = riesz_kernel(1.0, y, lam, spec)?;
        let q = r * y.powf(lam.lambda()) * (y - 1.0);
        if !(q >= SIGN_MARGIN) {
            return Ok(None);
        }
        min_q = min_q.min(q);
    }
    Ok(Some(min_q))
}

fn bisect_largest<C>(cap: f64, lam: BesselParam, certify: C) -> Result<(f64, f64)>
where
    C: Fn(f64) -> Result<Option<f64>>,
{
    let floor = cap / 64.0;
    if certify(floor)?.is_none() {
        return Err(Error::CertificationFailure {
            lambda: lam.lambda(),
            detail: format!(
                "sign certificate fails already at {floor:.4}; check quadrature settings"
            ),
        });
    }
    if let Some(c) = certify(cap)? {
        return Ok((cap, c));
    }
    let (mut lo, mut hi) = (floor, cap);
    let mut c_lo = certify(floor)?.expect("floor certificate verified above");
    for _ in 0..14 {
        let mid = 0.5 * (lo + hi);
        match certify(mid)? {
            Some(c) => {
                lo = mid;
                c_lo = c;
            }
            None => hi = mid,
        }
    }
    Ok((lo, c_lo))
}

/// Bisects (at x = 1, which suffices by homogeneity) for the largest
/// certified k1 and k2 and returns the accompanying constants.
pub fn estimate_regime_constants(
    lam: BesselParam,
    spec: &QuadratureSpec,
) -> Result<KernelRegimeConstants> {
    let (k1, c_k1) = bisect_largest(K1_SEARCH_CAP, lam, |k| k1_certificate(k, lam, spec))?;
    let (k2, c_k2) = bisect_largest(K2_SEARCH_CAP, lam, |k| k2_certificate(k, lam, spec))?;
    Ok(KernelRegimeConstants { k1, k2, c_k1, c_k2 })
}

/// Ratio of the kernel increment |R(y, x0) - R(y, x)| to the smoothness
/// bracket (|x0 - x| / |x0 - y|) / m(I(x0, |x0 - y|)); scan tests assert a
/// uniform ceiling on this quantity.
pub fn smoothness_ratio(
    y: f64,
    x0: f64,
    x: f64,
    lam: BesselParam,
    spec: &QuadratureSpec,
) -> Result<f64> {
    if !(y > 0.0 && x0 > 0.0 && x > 0.0) {
        return Err(Error::InvalidParam(
            "smoothness ratio needs positive arguments".into(),
        ));
    }
    let d = (x0 - y).abs();
    if !((x0 - x).abs() < d / 2.0) {
        return Err(Error::InvalidParam(format!(
            "smoothness ratio needs |x0 - x| < |x0 - y| / 2, got |{x0} - {x}| vs {d}/2"
        )));
    }
    if x == x0 {
        return Ok(0.0);
    }
    let num = (riesz_kernel(y, x0, lam, spec)? - riesz_kernel(y, x, lam, spec)?).abs();
    let den = ((x0 - x).abs() / d) / measure(&Interval::new(x0, d)?, lam);
    Ok(num / den)
}

fn hankel_constant(lam: BesselParam) -> f64 {
    let l = lam.lambda();
    gamma(l + 0.5) / (gamma(l) * std::f64::consts::PI.sqrt())
}

/// Distance z(theta) = sqrt(x^2 + y^2 - 2 x y cos theta) in a cancellation-free form.
#[inline]
fn chord(x: f64, y: f64, theta: f64) -> f64 {
    let s = (0.5 * theta).sin();
    ((x - y) * (x - y) + 4.0 * x * y * s * s).sqrt()
}

/// Hankel translation tau_x g(y) for a compactly supported step function g.
pub fn hankel_translate(
    g: &StepFunction,
    x: f64,
    y: f64,
    lam: BesselParam,
    spec: &QuadratureSpec,
) -> Result<f64> {
    if !(x > 0.0 && y > 0.0) {
        return Err(Error::InvalidParam(
            "hankel translation needs x, y > 0".into(),
        ));
    }
    if g.is_zero() {
        return Ok(0.0);
    }
    let sin_exp = PowExp::classify(2.0 * lam.lambda() - 1.0);
    let f = |theta: f64| g.eval(chord(x, y, theta)) * sin_exp.apply(theta.sin());

    // the chord sweeps [|x-y|, x+y]; split panels where it crosses a breakpoint of g
    let zmin = (x - y).abs();
    let mut breaks = vec![0.0];
    for &b in g.breakpoints() {
        if b > zmin && b < x + y {
            let s = ((b * b - zmin * zmin) / (4.0 * x * y)).sqrt().min(1.0);
            breaks.push(2.0 * s.asin());
        }
    }
    breaks.push(std::f64::consts::PI);
    breaks.sort_by(|a, b| a.partial_cmp(b).unwrap());
    breaks.dedup();

    let e = 2.0 * lam.lambda() - 1.0;
    let out = if e < 0.0 || e.fract() != 0.0 {
        let head = quad::integrate_endpoint_substituted(&f, 0.0, breaks[1], true, spec);
        let tail = quad::integrate_endpoint_substituted(
            &f,
            breaks[breaks.len() - 2],
            std::f64::consts::PI,
            false,
            spec,
        );
        let mid = quad::integrate_with_breaks(&f, &breaks[1..breaks.len() - 1], spec);
        QuadOutcome {
            value: head.value + mid.value + tail.value,
            abs_error: head.abs_error + mid.abs_error + tail.abs_error,
            converged: head.converged && mid.converged && tail.converged,
        }
    } else {
        quad::integrate_with_breaks(&f, &breaks, spec)
    };
    finish(hankel_constant(lam), out, spec)
}

/// Hankel convolution f #_lambda g (x) = int f(y) tau_x g(y) dm(y).
pub fn hankel_sharp(
    f: &StepFunction,
    g: &StepFunction,
    x: f64,
    lam: BesselParam,
    spec: &QuadratureSpec,
) -> Result<f64> {
    if f.is_zero() || g.is_zero() {
        return Ok(0.0);
    }
    let outer = spec.outer(100.0);
    let mut total = 0.0;
    for (lo, hi, v) in f.cells() {
        if v == 0.0 {
            continue;
        }
        // tau_x g(y) has kinks in y where |x - y| or x + y crosses a breakpoint of g
        let mut breaks = vec![lo];
        for &b in g.breakpoints() {
            for cand in [x - b, x + b, b - x] {
                if cand > lo && cand < hi {
                    breaks.push(cand);
                }
            }
        }
        breaks.push(hi);
        breaks.sort_by(|a, b| a.partial_cmp(b).unwrap());
        breaks.dedup();
        let integrand = |y: f64| {
            let tau = hankel_translate(g, x, y, lam, spec).unwrap_or(f64::NAN);
            v * tau * lam.weight(y)
        };
        let out = quad::integrate_with_breaks(integrand, &breaks, &outer);
        if !out.value.is_finite() {
            return Err(Error::QuadratureNonConvergence {
                value: out.value,
                achieved: out.abs_error,
                requested: spec.rel_tol,
            });
        }
        total += out.into_result(&outer)?;
    }
    Ok(total)
}

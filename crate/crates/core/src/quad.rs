//! Adaptive quadrature: fixed-order Gauss-Legendre panels with bisection
//! driven by inter-panel disagreement, plus helpers for graded panel layouts
//! and endpoint substitutions.

use std::collections::HashMap;
use std::sync::{Arc, OnceLock, RwLock};

use crate::error::{Error, Result};

/// Tolerances and budgets for every quadrature in the crate.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct QuadratureSpec {
    /// Requested relative tolerance (against the L1 size of the integrand).
    pub rel_tol: f64,
    /// Total bisection budget for one integral (worst segment splits first).
    pub max_subdivisions: u32,
    /// Gauss-Legendre nodes per panel.
    pub nodes_per_panel: usize,
}

impl Default for QuadratureSpec {
    fn default() -> Self {
        Self {
            rel_tol: 1e-10,
            max_subdivisions: 60,
            nodes_per_panel: 16,
        }
    }
}

impl QuadratureSpec {
    pub fn validate(&self) -> Result<()> {
        if !(self.rel_tol > 0.0 && self.rel_tol.is_finite()) {
            return Err(Error::InvalidParam(format!(
                "rel_tol must be positive, got {}",
                self.rel_tol
            )));
        }
        if self.max_subdivisions < 1 {
            return Err(Error::InvalidParam("max_subdivisions must be >= 1".into()));
        }
        if self.nodes_per_panel < 2 {
            return Err(Error::InvalidParam("nodes_per_panel must be >= 2".into()));
        }
        Ok(())
    }

    /// Same budgets with a loosened relative tolerance, used by outer
    /// integrals wrapped around kernel evaluations so the outer adaptivity
    /// does not chase the inner quadrature noise.
    pub fn outer(&self, factor: f64) -> Self {
        Self {
            rel_tol: (self.rel_tol * factor).min(1e-6),
            ..*self
        }
    }
}

#[derive(Debug, Clone, Copy)]
pub struct QuadOutcome {
    pub value: f64,
    pub abs_error: f64,
    pub converged: bool,
}

impl QuadOutcome {
    fn zero() -> Self {
        Self {
            value: 0.0,
            abs_error: 0.0,
            converged: true,
        }
    }

    pub fn into_result(self, spec: &QuadratureSpec) -> Result<f64> {
        if self.converged {
            Ok(self.value)
        } else {
            Err(Error::QuadratureNonConvergence {
                value: self.value,
                achieved: self.abs_error,
                requested: spec.rel_tol,
            })
        }
    }
}

type GlRule = (Vec<f64>, Vec<f64>);

fn legendre_eval(n: usize, x: f64) -> (f64, f64) {
    let mut p0 = 1.0;
    let mut p1 = x;
    for k in 2..=n {
        let kf = k as f64;
        let pk = ((2.0 * kf - 1.0) * x * p1 - (kf - 1.0) * p0) / kf;
        p0 = p1;
        p1 = pk;
    }
    let d = n as f64 * (x * p1 - p0) / (x * x - 1.0);
    (p1, d)
}

fn build_rule(n: usize) -> GlRule {
    assert!(n >= 1);
    let mut nodes = vec![0.0; n];
    let mut weights = vec![0.0; n];
    for i in 0..(n + 1) / 2 {
        let mut x = (std::f64::consts::PI * (i as f64 + 0.75) / (n as f64 + 0.5)).cos();
        for _ in 0..64 {
            let (p, d) = legendre_eval(n, x);
            let dx = p / d;
            x -= dx;
            if dx.abs() <= 1e-16 {
                break;
            }
        }
        let (_, d) = legendre_eval(n, x);
        let w = 2.0 / ((1.0 - x * x) * d * d);
        nodes[i] = -x;
        nodes[n - 1 - i] = x;
        weights[i] = w;
        weights[n - 1 - i] = w;
    }
    if n % 2 == 1 {
        nodes[n / 2] = 0.0;
        let (_, d) = legendre_eval(n, 0.0);
        weights[n / 2] = 2.0 / (d * d);
    }
    (nodes, weights)
}

fn gl_rule(n: usize) -> Arc<GlRule> {
    static CACHE: OnceLock<RwLock<HashMap<usize, Arc<GlRule>>>> = OnceLock::new();
    let cache = CACHE.get_or_init(|| RwLock::new(HashMap::new()));
    if let Some(rule) = cache.read().unwrap().get(&n) {
        return rule.clone();
    }
    let rule = Arc::new(build_rule(n));
    cache
        .write()
        .unwrap()
        .entry(n)
        .or_insert_with(|| rule.clone())
        .clone()
}

fn gl_panel<F: Fn(f64) -> f64>(f: &F, lo: f64, hi: f64, rule: &GlRule) -> f64 {
    let c = 0.5 * (lo + hi);
    let h = 0.5 * (hi - lo);
    let mut acc = 0.0;
    for (x, w) in rule.0.iter().zip(&rule.1) {
        acc += w * f(c + h * x);
    }
    acc * h
}

/// Adaptive integral over a single interval.
pub fn integrate<F: Fn(f64) -> f64>(f: F, lo: f64, hi: f64, spec: &QuadratureSpec) -> QuadOutcome {
    integrate_with_breaks(f, &[lo, hi], spec)
}

struct Segment {
    lo: f64,
    hi: f64,
    value: f64,
    err: f64,
}

/// Adaptive integral over the panels delimited by `breaks` (ascending).
/// Globally budgeted bisection: the segment with the largest error estimate
/// splits first (first index wins ties, keeping runs deterministic), until
/// the summed estimate meets the tolerance or the budget is spent.
pub fn integrate_with_breaks<F: Fn(f64) -> f64>(
    f: F,
    breaks: &[f64],
    spec: &QuadratureSpec,
) -> QuadOutcome {
    if breaks.len() < 2 {
        return QuadOutcome::zero();
    }
    let rule = gl_rule(spec.nodes_per_panel);

    // seed each panel with a value and a two-half disagreement estimate
    let mut segs: Vec<Segment> = Vec::with_capacity(breaks.len() - 1 + 2 * spec.max_subdivisions as usize);
    let seed = |lo: f64, hi: f64, segs: &mut Vec<Segment>| {
        let whole = gl_panel(&f, lo, hi, &rule);
        let mid = 0.5 * (lo + hi);
        if !(lo < mid && mid < hi) {
            segs.push(Segment {
                lo,
                hi,
                value: whole,
                err: 0.0,
            });
            return;
        }
        let refined = gl_panel(&f, lo, mid, &rule) + gl_panel(&f, mid, hi, &rule);
        segs.push(Segment {
            lo,
            hi,
            value: refined,
            err: (refined - whole).abs(),
        });
    };
    for w in breaks.windows(2) {
        seed(w[0], w[1], &mut segs);
    }

    let tolerance = |segs: &[Segment]| -> f64 {
        let scale: f64 = segs.iter().map(|s| s.value.abs()).sum();
        // floor at the rounding noise of the accumulated values
        (spec.rel_tol * scale).max(64.0 * f64::EPSILON * scale) + 1e-300
    };

    let mut splits = 0;
    loop {
        let err_total: f64 = segs.iter().map(|s| s.err).sum();
        if err_total <= tolerance(&segs) || splits >= spec.max_subdivisions {
            let value = segs.iter().map(|s| s.value).sum();
            return QuadOutcome {
                value,
                abs_error: err_total,
                converged: err_total <= tolerance(&segs),
            };
        }
        let mut worst = 0;
        for (i, s) in segs.iter().enumerate() {
            if s.err > segs[worst].err {
                worst = i;
            }
        }
        if segs[worst].err == 0.0 {
            let value = segs.iter().map(|s| s.value).sum();
            return QuadOutcome {
                value,
                abs_error: err_total,
                converged: true,
            };
        }
        let Segment { lo, hi, .. } = segs[worst];
        let mid = 0.5 * (lo + hi);
        if !(lo < mid && mid < hi) {
            // cannot split at float resolution; freeze this segment
            segs[worst].err = 0.0;
            continue;
        }
        segs.swap_remove(worst);
        seed(lo, mid, &mut segs);
        seed(mid, hi, &mut segs);
        splits += 1;
    }
}

/// Integral with the integrable endpoint singularity absorbed by the
/// substitution x = edge +/- u^2; `at_lower` selects which endpoint.
pub fn integrate_endpoint_substituted<F: Fn(f64) -> f64>(
    f: F,
    lo: f64,
    hi: f64,
    at_lower: bool,
    spec: &QuadratureSpec,
) -> QuadOutcome {
    let len = hi - lo;
    if len <= 0.0 {
        return QuadOutcome::zero();
    }
    let umax = len.sqrt();
    if at_lower {
        integrate(|u| f(lo + u * u) * 2.0 * u, 0.0, umax, spec)
    } else {
        integrate(|u| f(hi - u * u) * 2.0 * u, 0.0, umax, spec)
    }
}

/// Breakpoints of [lo, hi] graded geometrically toward one end, stopping at
/// cell width `finest` (relative to the interval length).
pub fn graded_breaks(lo: f64, hi: f64, toward_lo: bool, finest_rel: f64) -> Vec<f64> {
    let len = hi - lo;
    debug_assert!(len > 0.0);
    let finest = finest_rel.clamp(1e-15, 0.5);
    let mut offsets = vec![1.0f64];
    let mut t = 0.5f64;
    while t > finest {
        offsets.push(t);
        t *= 0.5;
    }
    offsets.push(t);
    offsets.push(0.0);
    offsets.sort_by(|a, b| a.partial_cmp(b).unwrap());
    offsets.dedup();
    let mut out: Vec<f64> = offsets
        .iter()
        .map(|&o| {
            if toward_lo {
                lo + len * o
            } else {
                hi - len * o
            }
        })
        .collect();
    out.sort_by(|a, b| a.partial_cmp(b).unwrap());
    out.dedup();
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    #[test]
    fn gauss_legendre_is_exact_on_polynomials() {
        // an n-point rule integrates degree 2n-1 exactly
        for n in [2usize, 5, 8, 16] {
            let rule = gl_rule(n);
            let k = 2 * n - 1;
            let got = gl_panel(&|x: f64| x.powi(k as i32), 0.0, 1.0, &rule);
            assert_relative_eq!(got, 1.0 / (k as f64 + 1.0), max_relative = 1e-12);
        }
    }

    #[test]
    fn adaptive_integrates_smooth_functions() {
        let spec = QuadratureSpec::default();
        let out = integrate(|x: f64| x.sin(), 0.0, std::f64::consts::PI, &spec);
        assert!(out.converged);
        assert_relative_eq!(out.value, 2.0, max_relative = 1e-12);

        let out = integrate(|x: f64| (-x).exp(), 0.0, 30.0, &spec);
        assert_relative_eq!(out.value, 1.0 - (-30.0f64).exp(), max_relative = 1e-11);
    }

    #[test]
    fn adaptive_resolves_sharp_peak_with_graded_breaks() {
        let spec = QuadratureSpec::default();
        let eps = 1e-6;
        // integral of eps/(x^2+eps^2) over [0,1] = atan(1/eps)
        let breaks = graded_breaks(0.0, 1.0, true, eps);
        let out = integrate_with_breaks(|x: f64| eps / (x * x + eps * eps), &breaks, &spec);
        assert!(out.converged);
        assert_relative_eq!(out.value, (1.0 / eps).atan(), max_relative = 1e-9);
    }

    #[test]
    fn endpoint_substitution_handles_power_singularity() {
        let spec = QuadratureSpec::default();
        // integral of x^(-1/2) over (0,1] = 2
        let out = integrate_endpoint_substituted(|x: f64| 1.0 / x.sqrt(), 0.0, 1.0, true, &spec);
        assert!(out.converged);
        assert_relative_eq!(out.value, 2.0, max_relative = 1e-12);
        // integral of (1-x)^(-0.4) over [0,1) = 1/0.6
        let out =
            integrate_endpoint_substituted(|x: f64| (1.0 - x).powf(-0.4), 0.0, 1.0, false, &spec);
        assert_relative_eq!(out.value, 1.0 / 0.6, max_relative = 1e-10);
    }

    #[test]
    fn nonconvergence_is_reported() {
        let spec = QuadratureSpec {
            rel_tol: 1e-13,
            max_subdivisions: 2,
            nodes_per_panel: 2,
        };
        let out = integrate(|x: f64| (50.0 / (x + 1e-3)).sin(), 0.0, 1.0, &spec);
        assert!(!out.converged);
        assert!(out.into_result(&spec).is_err());
    }

    #[test]
    fn error_estimate_scales_with_tolerance() {
        let f = |x: f64| (x * x + 0.3).sqrt().sin();
        let tight = integrate(
            f,
            0.0,
            3.0,
            &QuadratureSpec {
                rel_tol: 1e-12,
                ..Default::default()
            },
        );
        let loose = integrate(
            f,
            0.0,
            3.0,
            &QuadratureSpec {
                rel_tol: 1e-6,
                ..Default::default()
            },
        );
        assert!(tight.converged && loose.converged);
        assert_relative_eq!(tight.value, loose.value, max_relative = 1e-6);
    }
}

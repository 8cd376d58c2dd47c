//! Compactly supported piecewise-constant functions on the positive half-line.
//!
//! Every function the constructions manipulate (atoms, indicators, residual
//! bumps, sampled symbols) is stored in this form, so function storage is
//! exact and quadrature error lives only in kernel integrals.

use crate::error::{Error, Result};
use crate::measure::{measure_endpoints, BesselParam};

/// A piecewise-constant function: `values[i]` on `[breakpoints[i], breakpoints[i+1])`,
/// zero outside. Kept canonical: adjacent equal values merged, zero-valued
/// leading/trailing cells trimmed, empty vectors for the zero function.
#[derive(Debug, Clone, PartialEq)]
pub struct StepFunction {
    breakpoints: Vec<f64>,
    values: Vec<f64>,
}

impl StepFunction {
    pub fn new(breakpoints: Vec<f64>, values: Vec<f64>) -> Result<Self> {
        if breakpoints.is_empty() && values.is_empty() {
            return Ok(Self::zero());
        }
        if breakpoints.len() != values.len() + 1 {
            return Err(Error::InvalidParam(format!(
                "step function needs n+1 breakpoints for n values, got {} and {}",
                breakpoints.len(),
                values.len()
            )));
        }
        if breakpoints.iter().any(|b| !b.is_finite() || *b < 0.0) {
            return Err(Error::InvalidParam(
                "breakpoints must be finite and nonnegative".into(),
            ));
        }
        if breakpoints.windows(2).any(|w| w[0] >= w[1]) {
            return Err(Error::InvalidParam(
                "breakpoints must be strictly increasing".into(),
            ));
        }
        if values.iter().any(|v| !v.is_finite()) {
            return Err(Error::InvalidParam("values must be finite".into()));
        }
        let mut f = Self {
            breakpoints,
            values,
        };
        f.canonicalize();
        Ok(f)
    }

    pub fn zero() -> Self {
        Self {
            breakpoints: Vec::new(),
            values: Vec::new(),
        }
    }

    /// Indicator of the interval (lo, hi).
    pub fn indicator(lo: f64, hi: f64) -> Result<Self> {
        Self::new(vec![lo, hi], vec![1.0])
    }

    /// Midpoint sample of `f` on `n` equal cells of `[lo, hi]`.
    pub fn sample<F: Fn(f64) -> f64>(f: F, lo: f64, hi: f64, n: usize) -> Result<Self> {
        if n == 0 || !(lo >= 0.0 && hi > lo) {
            return Err(Error::InvalidParam(format!(
                "sample needs 0 <= lo < hi and n > 0, got ({lo}, {hi}, {n})"
            )));
        }
        let breaks: Vec<f64> = (0..=n)
            .map(|k| lo + (hi - lo) * k as f64 / n as f64)
            .collect();
        Self::sample_on(f, breaks)
    }

    /// Midpoint sample on `n` geometrically spaced cells of `[lo, hi]`, lo > 0.
    pub fn sample_log<F: Fn(f64) -> f64>(f: F, lo: f64, hi: f64, n: usize) -> Result<Self> {
        if n == 0 || !(lo > 0.0 && hi > lo) {
            return Err(Error::InvalidParam(format!(
                "sample_log needs 0 < lo < hi and n > 0, got ({lo}, {hi}, {n})"
            )));
        }
        let ratio = (hi / lo).ln();
        let breaks: Vec<f64> = (0..=n)
            .map(|k| lo * (ratio * k as f64 / n as f64).exp())
            .collect();
        Self::sample_on(f, breaks)
    }

    /// Midpoint sample on an explicit partition.
    pub fn sample_on<F: Fn(f64) -> f64>(f: F, breakpoints: Vec<f64>) -> Result<Self> {
        let values = breakpoints
            .windows(2)
            .map(|w| f(0.5 * (w[0] + w[1])))
            .collect();
        Self::new(breakpoints, values)
    }

    fn canonicalize(&mut self) {
        if self.values.is_empty() {
            self.breakpoints.clear();
            return;
        }
        // merge runs of equal values
        let mut bp = Vec::with_capacity(self.breakpoints.len());
        let mut vals = Vec::with_capacity(self.values.len());
        bp.push(self.breakpoints[0]);
        for i in 0..self.values.len() {
            if vals.last() == Some(&self.values[i]) {
                *bp.last_mut().unwrap() = self.breakpoints[i + 1];
            } else {
                vals.push(self.values[i]);
                bp.push(self.breakpoints[i + 1]);
            }
        }
        // trim zero edges
        while vals.first() == Some(&0.0) {
            vals.remove(0);
            bp.remove(0);
        }
        while vals.last() == Some(&0.0) {
            vals.pop();
            bp.pop();
        }
        if vals.is_empty() {
            bp.clear();
        }
        self.breakpoints = bp;
        self.values = vals;
    }

    #[inline]
    pub fn is_zero(&self) -> bool {
        self.values.is_empty()
    }

    pub fn breakpoints(&self) -> &[f64] {
        &self.breakpoints
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn num_cells(&self) -> usize {
        self.values.len()
    }

    /// (lo, hi) of the support hull, None for the zero function.
    pub fn support(&self) -> Option<(f64, f64)> {
        if self.is_zero() {
            None
        } else {
            Some((self.breakpoints[0], *self.breakpoints.last().unwrap()))
        }
    }

    pub fn cells(&self) -> impl Iterator<Item = (f64, f64, f64)> + '_ {
        self.breakpoints
            .windows(2)
            .zip(&self.values)
            .map(|(w, &v)| (w[0], w[1], v))
    }

    /// Point evaluation with the half-open convention `[b_i, b_{i+1})`.
    pub fn eval(&self, x: f64) -> f64 {
        if self.is_zero() {
            return 0.0;
        }
        let n = self.values.len();
        if x < self.breakpoints[0] || x >= self.breakpoints[n] {
            return 0.0;
        }
        match self
            .breakpoints
            .binary_search_by(|b| b.partial_cmp(&x).unwrap())
        {
            Ok(i) => {
                if i < n {
                    self.values[i]
                } else {
                    0.0
                }
            }
            Err(i) => self.values[i - 1],
        }
    }

    /// Exact integral against dm_lambda.
    pub fn integrate(&self, lam: BesselParam) -> f64 {
        self.cells()
            .filter(|&(_, _, v)| v != 0.0)
            .map(|(lo, hi, v)| v * measure_endpoints(lo, hi, lam))
            .sum()
    }

    /// L^p(dm_lambda) norm for p in (0, inf); for p < 1 this is the usual
    /// p-quantity without any triangle-inequality claim. `f64::INFINITY`
    /// gives the essential sup.
    pub fn lp_norm(&self, p: f64, lam: BesselParam) -> Result<f64> {
        if p == f64::INFINITY {
            return Ok(self.sup_norm());
        }
        if !(p > 0.0 && p.is_finite()) {
            return Err(Error::InvalidParam(format!(
                "exponent must be positive or infinity, got {p}"
            )));
        }
        let total: f64 = self
            .cells()
            .filter(|&(_, _, v)| v != 0.0)
            .map(|(lo, hi, v)| v.abs().powf(p) * measure_endpoints(lo, hi, lam))
            .sum();
        Ok(total.powf(1.0 / p))
    }

    pub fn sup_norm(&self) -> f64 {
        self.values.iter().fold(0.0, |m, v| m.max(v.abs()))
    }

    pub fn scale(&self, c: f64) -> Self {
        let mut out = Self {
            breakpoints: self.breakpoints.clone(),
            values: self.values.iter().map(|v| c * v).collect(),
        };
        out.canonicalize();
        out
    }

    /// Pointwise combination on the merged partition.
    pub fn zip_with<F: Fn(f64, f64) -> f64>(&self, other: &Self, op: F) -> Self {
        let mut merged: Vec<f64> = Vec::with_capacity(self.breakpoints.len() + other.breakpoints.len());
        {
            let (mut i, mut j) = (0, 0);
            let a = &self.breakpoints;
            let b = &other.breakpoints;
            while i < a.len() || j < b.len() {
                let next = match (a.get(i), b.get(j)) {
                    (Some(&x), Some(&y)) => {
                        if x < y {
                            i += 1;
                            x
                        } else if y < x {
                            j += 1;
                            y
                        } else {
                            i += 1;
                            j += 1;
                            x
                        }
                    }
                    (Some(&x), None) => {
                        i += 1;
                        x
                    }
                    (None, Some(&y)) => {
                        j += 1;
                        y
                    }
                    (None, None) => break,
                };
                merged.push(next);
            }
        }
        if merged.len() < 2 {
            // at most one breakpoint in total: both functions are zero a.e.
            let v = op(0.0, 0.0);
            debug_assert!(v == 0.0 || merged.is_empty());
            return Self::zero();
        }
        let values: Vec<f64> = merged
            .windows(2)
            .map(|w| {
                let mid = 0.5 * (w[0] + w[1]);
                op(self.eval(mid), other.eval(mid))
            })
            .collect();
        let mut out = Self {
            breakpoints: merged,
            values,
        };
        out.canonicalize();
        out
    }

    pub fn add(&self, other: &Self) -> Self {
        self.zip_with(other, |a, b| a + b)
    }

    pub fn sub(&self, other: &Self) -> Self {
        self.zip_with(other, |a, b| a - b)
    }

    pub fn mul(&self, other: &Self) -> Self {
        self.zip_with(other, |a, b| a * b)
    }

    /// Restriction to (lo, hi): f * chi_(lo, hi).
    pub fn restrict(&self, lo: f64, hi: f64) -> Result<Self> {
        if !(lo < hi) {
            return Err(Error::InvalidParam(format!(
                "restrict needs lo < hi, got ({lo}, {hi})"
            )));
        }
        let chi = Self::indicator(lo.max(0.0), hi)?;
        Ok(self.mul(&chi))
    }

    /// Max pointwise deviation from `other` over the merged partition.
    pub fn max_abs_diff(&self, other: &Self) -> f64 {
        self.zip_with(other, |a, b| a - b).sup_norm()
    }

    pub fn approx_eq(&self, other: &Self, atol: f64) -> bool {
        self.max_abs_diff(other) <= atol
    }

    /// Coordinate dilation combined with a value scaling:
    /// x -> xscale * x on breakpoints, v -> vscale * v on values.
    pub fn rescaled(&self, xscale: f64, vscale: f64) -> Result<Self> {
        if !(xscale > 0.0 && xscale.is_finite()) {
            return Err(Error::InvalidParam(format!(
                "coordinate scale must be positive, got {xscale}"
            )));
        }
        Self::new(
            self.breakpoints.iter().map(|b| b * xscale).collect(),
            self.values.iter().map(|v| v * vscale).collect(),
        )
    }

    /// The support partition with each cell split into `k` equal parts.
    pub fn refined_partition(&self, k: usize) -> Vec<f64> {
        let k = k.max(1);
        let mut out = Vec::with_capacity(self.values.len() * k + 1);
        for (lo, hi, _) in self.cells() {
            if out.is_empty() {
                out.push(lo);
            }
            for j in 1..=k {
                out.push(lo + (hi - lo) * j as f64 / k as f64);
            }
        }
        out
    }

    /// Plain text form: one `breakpoints:` line and one `values:` line.
    pub fn to_text(&self) -> String {
        let join = |xs: &[f64]| {
            xs.iter()
                .map(|x| format!("{x}"))
                .collect::<Vec<_>>()
                .join(" ")
        };
        format!(
            "breakpoints: {}\nvalues: {}\n",
            join(&self.breakpoints),
            join(&self.values)
        )
    }

    pub fn from_text(text: &str) -> Result<Self> {
        let mut breakpoints = None;
        let mut values = None;
        for line in text.lines() {
            let line = line.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let parse_list = |s: &str| -> Result<Vec<f64>> {
                s.split_whitespace()
                    .map(|t| {
                        t.parse::<f64>()
                            .map_err(|e| Error::Parse(format!("bad float {t:?}: {e}")))
                    })
                    .collect()
            };
            if let Some(rest) = line.strip_prefix("breakpoints:") {
                breakpoints = Some(parse_list(rest)?);
            } else if let Some(rest) = line.strip_prefix("values:") {
                values = Some(parse_list(rest)?);
            } else {
                return Err(Error::Parse(format!("unrecognized line {line:?}")));
            }
        }
        match (breakpoints, values) {
            (Some(b), Some(v)) => Self::new(b, v),
            _ => Err(Error::Parse(
                "expected one `breakpoints:` line and one `values:` line".into(),
            )),
        }
    }
}

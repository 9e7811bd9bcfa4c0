//! Piecewise-cubic scalar profiles on `[0, l]`.
//!
//! Each interval `[x_k, x_{k+1}]` carries a cubic in the local coordinate
//! `s = x - x_k`, `p(s) = c0 + c1 s + c2 s^2 + c3 s^3`. Integrals of products of
//! profiles are exact under Gauss-Legendre quadrature on the merged breakpoints.

use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::quadrature::GaussLegendre;

/// Relative tolerance for breakpoint coincidence and continuity checks.
const CONTINUITY_TOL: f64 = 1e-9;

/// One interval in the on-disk representation.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PieceRecord {
    pub x_start: f64,
    pub x_end: f64,
    pub coeffs: [f64; 4],
}

#[derive(Debug, Clone, PartialEq)]
pub struct Profile {
    breakpoints: Vec<f64>,
    coeffs: Vec<[f64; 4]>,
}

impl Profile {
    /// Builds a profile from breakpoints `0 = x_0 < ... < x_N = l` and `N`
    /// local-coordinate coefficient sets. The result must be continuous.
    pub fn new(breakpoints: Vec<f64>, coeffs: Vec<[f64; 4]>) -> Result<Self> {
        if breakpoints.len() < 2 {
            return Err(Error::InvalidProfile("need at least two breakpoints".into()));
        }
        if coeffs.len() + 1 != breakpoints.len() {
            return Err(Error::InvalidProfile(format!(
                "{} breakpoints need {} coefficient sets, got {}",
                breakpoints.len(),
                breakpoints.len() - 1,
                coeffs.len()
            )));
        }
        if breakpoints[0] != 0.0 {
            return Err(Error::InvalidProfile(format!(
                "first breakpoint must be 0, got {}",
                breakpoints[0]
            )));
        }
        if breakpoints
            .iter()
            .chain(coeffs.iter().flatten())
            .any(|v| !v.is_finite())
        {
            return Err(Error::InvalidProfile("non-finite breakpoint or coefficient".into()));
        }
        if breakpoints.windows(2).any(|w| w[1] <= w[0]) {
            return Err(Error::InvalidProfile("breakpoints must be strictly increasing".into()));
        }
        let profile = Self { breakpoints, coeffs };
        if let Some((x, jump)) = profile.worst_jump(0) {
            return Err(Error::InvalidProfile(format!(
                "discontinuity of size {jump:e} at x = {x}"
            )));
        }
        Ok(profile)
    }

    pub fn constant(length: f64, value: f64) -> Self {
        Self::cubic(length, [value, 0.0, 0.0, 0.0])
    }

    /// `value(x) = c0 + c1 x`.
    pub fn linear(length: f64, c0: f64, c1: f64) -> Self {
        Self::cubic(length, [c0, c1, 0.0, 0.0])
    }

    /// A single global cubic `c0 + c1 x + c2 x^2 + c3 x^3` on `[0, length]`.
    pub fn cubic(length: f64, c: [f64; 4]) -> Self {
        assert!(length > 0.0 && length.is_finite(), "profile length must be positive");
        Self {
            breakpoints: vec![0.0, length],
            coeffs: vec![c],
        }
    }

    pub fn from_records(records: &[PieceRecord]) -> Result<Self> {
        if records.is_empty() {
            return Err(Error::InvalidProfile("empty record list".into()));
        }
        let mut breakpoints = Vec::with_capacity(records.len() + 1);
        breakpoints.push(records[0].x_start);
        for (k, r) in records.iter().enumerate() {
            let expected = breakpoints[k];
            if (r.x_start - expected).abs() > CONTINUITY_TOL * expected.abs().max(1.0) {
                return Err(Error::InvalidProfile(format!(
                    "record {k} starts at {} but previous interval ends at {expected}",
                    r.x_start
                )));
            }
            breakpoints.push(r.x_end);
        }
        Self::new(breakpoints, records.iter().map(|r| r.coeffs).collect())
    }

    pub fn to_records(&self) -> Vec<PieceRecord> {
        self.breakpoints
            .windows(2)
            .zip(&self.coeffs)
            .map(|(w, c)| PieceRecord {
                x_start: w[0],
                x_end: w[1],
                coeffs: *c,
            })
            .collect()
    }

    pub fn from_json_str(text: &str) -> Result<Self> {
        let records: Vec<PieceRecord> = serde_json::from_str(text)?;
        Self::from_records(&records)
    }

    pub fn from_json_file(path: impl AsRef<Path>) -> Result<Self> {
        Self::from_json_str(&std::fs::read_to_string(path)?)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(&self.to_records()).expect("profile records serialize")
    }

    pub fn length(&self) -> f64 {
        *self.breakpoints.last().unwrap()
    }

    pub fn breakpoints(&self) -> &[f64] {
        &self.breakpoints
    }

    pub fn pieces(&self) -> &[[f64; 4]] {
        &self.coeffs
    }

    /// Highest polynomial degree with a nonzero coefficient on any interval.
    pub fn degree(&self) -> usize {
        self.coeffs
            .iter()
            .map(|c| c.iter().rposition(|&v| v != 0.0).unwrap_or(0))
            .max()
            .unwrap_or(0)
    }

    /// Interval containing `x`; points outside `[0, l]` use the end intervals.
    fn piece_index(&self, x: f64) -> usize {
        let last = self.coeffs.len() - 1;
        match self.breakpoints[1..=last].binary_search_by(|b| b.partial_cmp(&x).unwrap_or(std::cmp::Ordering::Less)) {
            Ok(i) => i + 1,
            Err(i) => i,
        }
        .min(last)
    }

    pub fn eval(&self, x: f64) -> f64 {
        self.derivative(x, 0)
    }

    /// `order`-th derivative at `x`; at a breakpoint the right-hand interval
    /// is used (the left one at `x = l`).
    pub fn derivative(&self, x: f64, order: usize) -> f64 {
        let k = self.piece_index(x);
        eval_local(&self.coeffs[k], x - self.breakpoints[k], order)
    }

    fn derivative_in(&self, k: usize, x: f64, order: usize) -> f64 {
        eval_local(&self.coeffs[k], x - self.breakpoints[k], order)
    }

    /// Largest jump of the `order`-th derivative across interior breakpoints,
    /// if any exceeds the continuity tolerance.
    fn worst_jump(&self, order: usize) -> Option<(f64, f64)> {
        let scale = self.scale(order);
        let mut worst: Option<(f64, f64)> = None;
        for k in 1..self.coeffs.len() {
            let x = self.breakpoints[k];
            let left = self.derivative_in(k - 1, x, order);
            let right = self.derivative_in(k, x, order);
            let jump = (left - right).abs();
            if jump > CONTINUITY_TOL * scale && worst.is_none_or(|(_, j)| jump > j) {
                worst = Some((x, jump));
            }
        }
        worst
    }

    fn scale(&self, order: usize) -> f64 {
        self.breakpoints
            .windows(2)
            .enumerate()
            .flat_map(|(k, w)| {
                [
                    self.derivative_in(k, w[0], order).abs(),
                    self.derivative_in(k, w[1], order).abs(),
                ]
            })
            .fold(1.0, f64::max)
    }

    /// True when derivatives up to `order` are continuous at every breakpoint.
    pub fn is_continuous_to(&self, order: usize) -> bool {
        (0..=order).all(|o| self.worst_jump(o).is_none())
    }

    pub fn is_c2(&self) -> bool {
        self.is_continuous_to(2)
    }

    /// `offset + sum coef_i * f_i`, expressed on the union of breakpoints.
    pub fn affine(terms: &[(f64, &Profile)], offset: f64) -> Result<Profile> {
        let length = match terms.first() {
            Some((_, p)) => p.length(),
            None => return Err(Error::InvalidProfile("affine combination of nothing".into())),
        };
        for (_, p) in terms {
            check_same_domain(length, p.length())?;
        }
        let breakpoints = merge_breakpoints(terms.iter().map(|(_, p)| *p));
        let mut coeffs = Vec::with_capacity(breakpoints.len() - 1);
        for w in breakpoints.windows(2) {
            let (a, b) = (w[0], w[1]);
            let mid = 0.5 * (a + b);
            let mut c = [offset, 0.0, 0.0, 0.0];
            for (coef, p) in terms {
                let k = p.piece_index(mid);
                // Taylor expansion of the source cubic about `a`.
                c[0] += coef * p.derivative_in(k, a, 0);
                c[1] += coef * p.derivative_in(k, a, 1);
                c[2] += coef * p.derivative_in(k, a, 2) / 2.0;
                c[3] += coef * p.derivative_in(k, a, 3) / 6.0;
            }
            coeffs.push(c);
        }
        Profile::new(breakpoints, coeffs)
    }

    /// Minimum and maximum over the breakpoints, the stationary points of
    /// each cubic, and `samples` uniform samples per interval.
    pub fn grid_extrema(&self, samples: usize) -> (f64, f64) {
        let mut lo = f64::INFINITY;
        let mut hi = f64::NEG_INFINITY;
        for (k, w) in self.breakpoints.windows(2).enumerate() {
            let mut visit = |x: f64| {
                let v = self.derivative_in(k, x, 0);
                lo = lo.min(v);
                hi = hi.max(v);
            };
            for j in 0..=samples {
                visit(w[0] + (w[1] - w[0]) * j as f64 / samples as f64);
            }
            for s in stationary_points(&self.coeffs[k]) {
                if s > 0.0 && s < w[1] - w[0] {
                    visit(w[0] + s);
                }
            }
        }
        (lo, hi)
    }

    /// Grid extrema starting at 64 samples per interval and doubling until
    /// both change by less than `1e-10` (relative to the value magnitude).
    pub fn extrema(&self) -> (f64, f64) {
        let mut samples = 64;
        let (mut lo, mut hi) = self.grid_extrema(samples);
        while samples < (1 << 22) {
            samples *= 2;
            let (lo2, hi2) = self.grid_extrema(samples);
            let stable =
                (lo2 - lo).abs() <= 1e-10 * lo2.abs().max(1e-300) && (hi2 - hi).abs() <= 1e-10 * hi2.abs().max(1e-300);
            lo = lo2;
            hi = hi2;
            if stable {
                break;
            }
        }
        (lo, hi)
    }

    pub fn min_value(&self) -> f64 {
        self.extrema().0
    }

    pub fn max_value(&self) -> f64 {
        self.extrema().1
    }
}

/// Real roots of `c1 + 2 c2 s + 3 c3 s^2`.
fn stationary_points(c: &[f64; 4]) -> Vec<f64> {
    let (a, b, d) = (3.0 * c[3], 2.0 * c[2], c[1]);
    if a == 0.0 {
        return if b != 0.0 { vec![-d / b] } else { Vec::new() };
    }
    let disc = b * b - 4.0 * a * d;
    if disc < 0.0 {
        return Vec::new();
    }
    let q = -0.5 * (b + b.signum() * disc.sqrt());
    let mut roots = vec![q / a];
    if q != 0.0 {
        roots.push(d / q);
    }
    roots
}

fn eval_local(c: &[f64; 4], s: f64, order: usize) -> f64 {
    match order {
        0 => c[0] + s * (c[1] + s * (c[2] + s * c[3])),
        1 => c[1] + s * (2.0 * c[2] + s * 3.0 * c[3]),
        2 => 2.0 * c[2] + 6.0 * c[3] * s,
        3 => 6.0 * c[3],
        _ => 0.0,
    }
}

pub(crate) fn check_same_domain(a: f64, b: f64) -> Result<()> {
    if (a - b).abs() > 1e-12 * a.abs().max(b.abs()) {
        return Err(Error::DomainMismatch(a, b));
    }
    Ok(())
}

/// Sorted union of all profiles' breakpoints, with near-duplicates collapsed.
pub(crate) fn merge_breakpoints<'a>(profiles: impl IntoIterator<Item = &'a Profile>) -> Vec<f64> {
    let mut all: Vec<f64> = profiles
        .into_iter()
        .flat_map(|p| p.breakpoints.iter().copied())
        .collect();
    all.sort_by(|a, b| a.partial_cmp(b).unwrap());
    let length = *all.last().unwrap();
    let tol = 1e-13 * length.max(1.0);
    let mut merged: Vec<f64> = Vec::with_capacity(all.len());
    for x in all {
        match merged.last() {
            Some(&last) if x - last <= tol => {}
            _ => merged.push(x),
        }
    }
    *merged.last_mut().unwrap() = length;
    merged
}

/// `∫_0^l f(x) w(x) x^moment dx`, exact for the piecewise-polynomial class.
///
/// Each merged interval uses `⌈(deg_f + deg_w + moment + 1) / 2⌉ + 1`
/// Gauss-Legendre points.
pub fn integrate_profile(f: &Profile, weight: Option<&Profile>, moment: u32) -> Result<f64> {
    match weight {
        Some(w) => integrate_product(&[f, w], moment),
        None => integrate_product(&[f], moment),
    }
}

/// `∫_0^l x^moment Π f_i(x) dx` for any number of profile factors.
pub fn integrate_product(factors: &[&Profile], moment: u32) -> Result<f64> {
    let first = factors
        .first()
        .ok_or_else(|| Error::InvalidProfile("empty product".into()))?;
    for p in &factors[1..] {
        check_same_domain(first.length(), p.length())?;
    }
    let total = factors.iter().map(|p| p.degree()).sum::<usize>() + moment as usize;
    let rule = GaussLegendre::new((total + 1).div_ceil(2) + 1);
    let breakpoints = merge_breakpoints(factors.iter().copied());
    let mut sum = 0.0;
    for w in breakpoints.windows(2) {
        let mid = 0.5 * (w[0] + w[1]);
        let pieces: Vec<(usize, &Profile)> = factors.iter().map(|p| (p.piece_index(mid), *p)).collect();
        sum += rule.integrate(w[0], w[1], |x| {
            pieces.iter().map(|(k, p)| p.derivative_in(*k, x, 0)).product::<f64>() * x.powi(moment as i32)
        });
    }
    Ok(sum)
}

//! Adaptive Gauss–Kronrod quadrature and improper integrals toward 0.

use std::cmp::Ordering;
use std::collections::BinaryHeap;

use crate::error::{LabError, Result};

// 21-point Kronrod abscissae on [-1, 1] (non-negative half) and weights; the
// odd-indexed abscissae are the 10-point Gauss nodes.
const XGK: [f64; 11] = [
    0.995_657_163_025_808_1,
    0.973_906_528_517_171_7,
    0.930_157_491_355_708_2,
    0.865_063_366_688_984_5,
    0.780_817_726_586_416_9,
    0.679_409_568_299_024_4,
    0.562_757_134_668_604_7,
    0.433_395_394_129_247_2,
    0.294_392_862_701_460_2,
    0.148_874_338_981_631_2,
    0.0,
];
const WGK: [f64; 11] = [
    0.011_694_638_867_371_874,
    0.032_558_162_307_964_73,
    0.054_755_896_574_351_996,
    0.075_039_674_810_919_95,
    0.093_125_454_583_697_6,
    0.109_387_158_802_297_64,
    0.123_491_976_262_065_85,
    0.134_709_217_311_473_33,
    0.142_775_938_577_060_08,
    0.147_739_104_901_338_5,
    0.149_445_554_002_916_9,
];
const WG: [f64; 5] = [
    0.066_671_344_308_688_14,
    0.149_451_349_150_580_6,
    0.219_086_362_515_982_04,
    0.269_266_719_309_996_35,
    0.295_524_224_714_752_87,
];

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Tolerance {
    pub abs: f64,
    pub rel: f64,
    pub max_intervals: usize,
}

impl Default for Tolerance {
    fn default() -> Self {
        Tolerance {
            abs: 1e-14,
            rel: 1e-12,
            max_intervals: 4000,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct QuadResult {
    pub value: f64,
    pub abs_error: f64,
    pub intervals: usize,
}

/// One 21-point rule on [a, b]: (Kronrod estimate, error estimate).
fn gk21<F: FnMut(f64) -> f64>(f: &mut F, a: f64, b: f64) -> (f64, f64) {
    let center = 0.5 * (a + b);
    let half = 0.5 * (b - a);
    let fc = f(center);
    let mut kronrod = WGK[10] * fc;
    let mut gauss = 0.0;
    let mut abs_sum = WGK[10] * fc.abs();
    let mut fv = [(0.0, 0.0); 10];
    for j in 0..10 {
        let dx = half * XGK[j];
        let f1 = f(center - dx);
        let f2 = f(center + dx);
        fv[j] = (f1, f2);
        kronrod += WGK[j] * (f1 + f2);
        abs_sum += WGK[j] * (f1.abs() + f2.abs());
        if j % 2 == 1 {
            gauss += WG[j / 2] * (f1 + f2);
        }
    }
    let mean = 0.5 * kronrod;
    let mut asc = WGK[10] * (fc - mean).abs();
    for j in 0..10 {
        asc += WGK[j] * ((fv[j].0 - mean).abs() + (fv[j].1 - mean).abs());
    }
    let result = kronrod * half;
    let resabs = abs_sum * half.abs();
    let resasc = asc * half.abs();
    let mut err = ((kronrod - gauss) * half).abs();
    if resasc != 0.0 && err != 0.0 {
        err = resasc * (200.0 * err / resasc).powf(1.5).min(1.0);
    }
    if resabs > f64::MIN_POSITIVE / (50.0 * f64::EPSILON) {
        err = err.max(50.0 * f64::EPSILON * resabs);
    }
    (result, err)
}

struct Piece {
    a: f64,
    b: f64,
    value: f64,
    err: f64,
}

impl PartialEq for Piece {
    fn eq(&self, other: &Self) -> bool {
        self.err == other.err
    }
}
impl Eq for Piece {}
impl PartialOrd for Piece {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}
impl Ord for Piece {
    fn cmp(&self, other: &Self) -> Ordering {
        self.err.total_cmp(&other.err)
    }
}

/// Globally adaptive integration of `f` over `[a, b]` (either orientation).
/// Bisects the interval with the largest error estimate until the total error
/// meets the tolerance.
pub fn integrate<F: FnMut(f64) -> f64>(mut f: F, a: f64, b: f64, tol: Tolerance) -> Result<QuadResult> {
    if a == b {
        return Ok(QuadResult {
            value: 0.0,
            abs_error: 0.0,
            intervals: 0,
        });
    }
    let (value, err) = gk21(&mut f, a, b);
    let mut heap = BinaryHeap::new();
    heap.push(Piece { a, b, value, err });
    let (mut total, mut total_err) = (value, err);
    loop {
        if !total.is_finite() || !total_err.is_finite() {
            return Err(LabError::Quadrature {
                achieved: f64::INFINITY,
                requested: tol.abs.max(tol.rel * total.abs()),
            });
        }
        let target = tol.abs.max(tol.rel * total.abs());
        if total_err <= target {
            return Ok(QuadResult {
                value: total,
                abs_error: total_err,
                intervals: heap.len(),
            });
        }
        if heap.len() >= tol.max_intervals {
            return Err(LabError::Quadrature {
                achieved: total_err,
                requested: target,
            });
        }
        let worst = heap.pop().expect("heap is never empty");
        let mid = 0.5 * (worst.a + worst.b);
        if mid == worst.a || mid == worst.b {
            // Interval can no longer be split in floating point.
            return Err(LabError::Quadrature {
                achieved: total_err,
                requested: target,
            });
        }
        let (v1, e1) = gk21(&mut f, worst.a, mid);
        let (v2, e2) = gk21(&mut f, mid, worst.b);
        total += v1 + v2 - worst.value;
        total_err += e1 + e2 - worst.err;
        heap.push(Piece { a: worst.a, b: mid, value: v1, err: e1 });
        heap.push(Piece { a: mid, b: worst.b, value: v2, err: e2 });
        // Re-sum occasionally to stop drift in the running totals.
        if heap.len() % 64 == 0 {
            total = heap.iter().map(|p| p.value).sum();
            total_err = heap.iter().map(|p| p.err).sum();
        }
    }
}

/// Integrates over `[a, b]` split at geometrically spaced points, which keeps
/// integrands that vary over many orders of magnitude well resolved. Both
/// endpoints must have the same sign.
pub fn integrate_geometric<F: FnMut(f64) -> f64>(mut f: F, a: f64, b: f64, tol: Tolerance) -> Result<QuadResult> {
    if a == b {
        return integrate(f, a, b, tol);
    }
    let (lo, hi, sign) = if a < b { (a, b, 1.0) } else { (b, a, -1.0) };
    if !(lo > 0.0) {
        return integrate(f, a, b, tol);
    }
    let pieces = ((hi / lo).log2().ceil() as usize).clamp(1, 2000);
    let ratio = (hi / lo).powf(1.0 / pieces as f64);
    let mut value = 0.0;
    let mut abs_error = 0.0;
    let mut intervals = 0;
    let mut left = lo;
    for i in 0..pieces {
        let right = if i + 1 == pieces { hi } else { left * ratio };
        let r = integrate(&mut f, left, right, tol)?;
        value += r.value;
        abs_error += r.abs_error;
        intervals += r.intervals;
        left = right;
    }
    Ok(QuadResult {
        value: sign * value,
        abs_error,
        intervals,
    })
}

/// Value of an improper integral, or its divergence.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Improper {
    Finite(f64),
    Divergent,
}

/// `∫₀ᵃ f` for `a > 0`, summed over decades `[a·10^{-k-1}, a·10^{-k}]`.
///
/// Declared divergent when a partial sum overflows, exceeds `1e12` while its
/// increments are not decaying, or when the increments stop decaying at all
/// before the sum converges.
pub fn integrate_to_zero<F: FnMut(f64) -> f64>(mut f: F, a: f64, tol: Tolerance) -> Result<Improper> {
    const DIVERGENCE: f64 = 1e12;
    const MAX_DECADES: usize = 300;
    let mut sum = 0.0;
    let mut prev_inc: Option<f64> = None;
    let mut hi = a;
    let mut quiet = 0;
    let mut ratios = Vec::new();
    for _ in 0..MAX_DECADES {
        let lo = hi * 0.1;
        let loose = Tolerance {
            rel: tol.rel.max(1e-8),
            ..tol
        };
        let inc = match integrate(&mut f, lo, hi, tol).or_else(|_| integrate(&mut f, lo, hi, loose)) {
            Ok(r) => r.value,
            Err(LabError::Quadrature { achieved, .. }) if achieved.is_infinite() => return Ok(Improper::Divergent),
            Err(e) => return Err(e),
        };
        if !inc.is_finite() {
            return Ok(Improper::Divergent);
        }
        sum += inc;
        if let Some(p) = prev_inc {
            if p != 0.0 {
                ratios.push((inc / p).abs());
            }
            if sum.abs() > DIVERGENCE && inc.abs() >= p.abs() {
                return Ok(Improper::Divergent);
            }
        }
        if inc.abs() <= 1e-16 * sum.abs().max(f64::MIN_POSITIVE) {
            quiet += 1;
            if quiet >= 3 {
                return Ok(Improper::Finite(sum));
            }
        } else {
            quiet = 0;
        }
        prev_inc = Some(inc);
        hi = lo;
        if hi < 1e-150 {
            break;
        }
    }
    // Ran out of decades without settling: decide from the decay of the tail.
    let tail: Vec<f64> = ratios.iter().rev().take(20).copied().collect();
    let r = tail.iter().sum::<f64>() / tail.len().max(1) as f64;
    if tail.is_empty() || r >= 0.99 {
        return Ok(Improper::Divergent);
    }
    let last = prev_inc.unwrap_or(0.0);
    Ok(Improper::Finite(sum + last * r / (1.0 - r)))
}

/// `∫ₐ^∞ f` for `a > 0` through the substitution `y = 1/u`.
pub fn integrate_to_infinity<F: FnMut(f64) -> f64>(mut f: F, a: f64, tol: Tolerance) -> Result<Improper> {
    integrate_to_zero(
        |u| {
            let y = 1.0 / u;
            f(y) * y * y
        },
        1.0 / a,
        tol,
    )
}

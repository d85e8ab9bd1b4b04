//! Independent verification engines: spectral quadrature, finite-difference
//! gradients and derivative-free grid minimization.

pub mod quadrature;

use num_complex::Complex64;

use crate::error::{Error, Result};

/// Outcome of an oracle comparison.
#[derive(Debug, Clone, Copy, PartialEq, Eq, serde::Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Verdict {
    Pass,
    Fail,
    /// The oracle itself moved by more than half the tolerance under
    /// refinement, so the comparison proves nothing.
    Inconclusive,
}

impl Verdict {
    pub fn judge(discrepancy: f64, refinement_delta: f64, tolerance: f64) -> Verdict {
        if !(refinement_delta <= 0.5 * tolerance) {
            Verdict::Inconclusive
        } else if discrepancy <= tolerance {
            Verdict::Pass
        } else {
            Verdict::Fail
        }
    }
}

/// Central differences of a real objective in each real and imaginary
/// coordinate, assembled as `g_k = ∂T/∂u_k + i ∂T/∂v_k` (`c_k = u_k + i v_k`).
/// With `real_only` the imaginary directions are skipped and left at zero.
pub fn finite_difference_gradient(
    objective: impl Fn(&[Complex64]) -> f64,
    c: &[Complex64],
    h: f64,
    real_only: bool,
) -> Result<Vec<Complex64>> {
    if !(1e-7..=1e-4).contains(&h) {
        return Err(Error::invalid(format!(
            "finite-difference step must lie in [1e-7, 1e-4], got {h}"
        )));
    }
    let mut point = c.to_vec();
    let mut probe = |k: usize, dir: Complex64| {
        let orig = point[k];
        point[k] = orig + dir * h;
        let plus = objective(&point);
        point[k] = orig - dir * h;
        let minus = objective(&point);
        point[k] = orig;
        (plus - minus) / (2.0 * h)
    };
    let mut grad = Vec::with_capacity(c.len());
    for k in 0..c.len() {
        let du = probe(k, Complex64::new(1.0, 0.0));
        let dv = if real_only {
            0.0
        } else {
            probe(k, Complex64::new(0.0, 1.0))
        };
        grad.push(Complex64::new(du, dv));
    }
    Ok(grad)
}

/// Settings of [`brute_force_minimize`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BruteForceOptions {
    pub points_per_dim: usize,
    /// Refinement sweeps after the initial full-box sweep.
    pub rounds: usize,
    pub shrink: f64,
    /// Maximum number of objective evaluations.
    pub budget: usize,
}

impl Default for BruteForceOptions {
    fn default() -> Self {
        BruteForceOptions {
            points_per_dim: 41,
            rounds: 5,
            shrink: 0.3,
            budget: 50_000_000,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct BruteForceResult {
    pub argmin: Vec<f64>,
    pub value: f64,
    pub evaluations: usize,
    pub budget_exhausted: bool,
    /// The first (full-box) sweep found a second, well separated point within
    /// a relative `1e-9` of the best value.
    pub multimodal: bool,
}

/// Nested grid search over the box `[lower, upper]`: sweep a uniform grid,
/// recenter on the best point, shrink the box, repeat. Deterministic.
pub fn brute_force_minimize(
    objective: impl Fn(&[f64]) -> f64,
    lower: &[f64],
    upper: &[f64],
    options: BruteForceOptions,
) -> Result<BruteForceResult> {
    let dim = lower.len();
    if dim == 0 || dim > 6 || upper.len() != dim {
        return Err(Error::invalid(format!(
            "brute force needs 1 to 6 coordinates with matching bounds, got {dim} and {}",
            upper.len()
        )));
    }
    if lower
        .iter()
        .zip(upper)
        .any(|(a, b)| !(a < b) || !a.is_finite() || !b.is_finite())
    {
        return Err(Error::invalid("brute-force box must be bounded with lower < upper"));
    }
    if options.points_per_dim < 2 || !(options.shrink > 0.0 && options.shrink < 1.0) {
        return Err(Error::invalid(
            "brute force needs >= 2 points per dimension and shrink in (0,1)",
        ));
    }
    let m = options.points_per_dim;
    let mut center: Vec<f64> = lower.iter().zip(upper).map(|(a, b)| 0.5 * (a + b)).collect();
    let mut half: Vec<f64> = lower.iter().zip(upper).map(|(a, b)| 0.5 * (b - a)).collect();
    let mut best = (center.clone(), f64::INFINITY);
    let mut evaluations = 0usize;
    let mut budget_exhausted = false;
    let mut multimodal = false;
    let mut point = vec![0.0; dim];
    let mut index = vec![0usize; dim];
    'rounds: for round in 0..=options.rounds {
        let lo: Vec<f64> = (0..dim).map(|i| (center[i] - half[i]).max(lower[i])).collect();
        let hi: Vec<f64> = (0..dim).map(|i| (center[i] + half[i]).min(upper[i])).collect();
        let mut sweep: Vec<(Vec<usize>, f64)> = Vec::new();
        index.iter_mut().for_each(|v| *v = 0);
        loop {
            if evaluations >= options.budget {
                budget_exhausted = true;
                break 'rounds;
            }
            for i in 0..dim {
                point[i] = lo[i] + (hi[i] - lo[i]) * index[i] as f64 / (m - 1) as f64;
            }
            let v = objective(&point);
            evaluations += 1;
            if v < best.1 {
                best = (point.clone(), v);
            }
            if round == 0 {
                sweep.push((index.clone(), v));
            }
            // odometer increment
            let mut i = 0;
            while i < dim {
                index[i] += 1;
                if index[i] < m {
                    break;
                }
                index[i] = 0;
                i += 1;
            }
            if i == dim {
                break;
            }
        }
        if round == 0 {
            multimodal = detect_near_tie(&sweep);
        }
        center = best.0.clone();
        half.iter_mut().for_each(|h| *h *= options.shrink);
    }
    Ok(BruteForceResult {
        argmin: best.0,
        value: best.1,
        evaluations,
        budget_exhausted,
        multimodal,
    })
}

fn detect_near_tie(sweep: &[(Vec<usize>, f64)]) -> bool {
    let Some((best_idx, best)) = sweep
        .iter()
        .min_by(|a, b| a.1.total_cmp(&b.1))
        .map(|(i, v)| (i.clone(), *v))
    else {
        return false;
    };
    let slack = 1e-9 * (1.0 + best.abs());
    sweep.iter().any(|(idx, v)| {
        *v <= best + slack
            && idx
                .iter()
                .zip(&best_idx)
                .any(|(a, b)| (*a as isize - *b as isize).abs() > 2)
    })
}

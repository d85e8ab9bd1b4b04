//! Trapezoidal quadrature of one-dimensional spectral integrals.
//!
//! All transforms use `f(x) = (2π)^{-1/2} ∫ f̂(ω) e^{iωx} dω`.
//!
//! Error model for an integrand bounded by `A (θ² + ω²)^{-m}`:
//!
//! * truncation to `[−Ω, Ω]` costs at most `(2π)^{-1/2} 2A Ω^{1−2m} / (2m − 1)`;
//!   when the integrand is a positive decreasing density times `cos(ωx)`,
//!   `x ≠ 0`, the second mean value theorem gives the sharper
//!   `(2π)^{-1/2} 4A Ω^{-2m} / |x|`;
//! * the uniform step `h` aliases position-space mass from distance
//!   `2π/h − |x|`, which for Matérn-type tails `r^{m−1} e^{−θr}` is negligible
//!   once `2π/h` exceeds the largest offset by `(40 + 4m)/θ`.

use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::function_space::RkbsModel;
use crate::kernels::SpectralKernel;
use crate::lp_semi_inner::WeightedSequenceSpace;

use super::Verdict;

const INV_SQRT_2PI: f64 = 0.398_942_280_401_432_7;

/// Upper bound on grid size; larger requests are resource errors.
pub const MAX_NODES: usize = 1 << 30;

/// Uniform trapezoidal grid on `[−half_width, half_width]`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct QuadratureGrid {
    half_width: f64,
    nodes: usize,
}

/// A quadrature value together with its change under refinement (see
/// [`QuadratureGrid::refinement_delta`]).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct QuadValue {
    pub value: Complex64,
    pub refinement_delta: f64,
}

/// Reproduction pairing computed in the spectral surrogate.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ReproductionCheck {
    pub pairing: Complex64,
    pub evaluation: Complex64,
    pub residual: f64,
    pub refinement_delta: f64,
}

/// Quadrature audit of the norm and the dual element of a model.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DualCheck {
    pub quadrature_norm: f64,
    pub model_norm: f64,
    /// Largest nodal gap between the surrogate's duality map applied to `ŝ`
    /// and the transform of `Σ b_k Φ(· − x_k)`, relative to the largest value.
    pub dual_discrepancy: f64,
}

impl QuadratureGrid {
    pub const MIN_NODES: usize = 16;

    pub fn new(half_width: f64, nodes: usize) -> Result<Self> {
        if !(half_width > 0.0) || !half_width.is_finite() {
            return Err(Error::invalid(format!(
                "grid half width must be positive, got {half_width}"
            )));
        }
        if nodes < Self::MIN_NODES {
            return Err(Error::invalid(format!(
                "grid needs at least {} nodes, got {nodes}",
                Self::MIN_NODES
            )));
        }
        if nodes > MAX_NODES {
            return Err(Error::ResourceLimit(format!(
                "quadrature grid of {nodes} nodes exceeds the cap of {MAX_NODES}"
            )));
        }
        Ok(QuadratureGrid { half_width, nodes })
    }

    /// `Ω = 40θ`, `M = 2^14`.
    pub fn default_for(theta: f64) -> Result<Self> {
        Self::new(40.0 * theta, 1 << 14)
    }

    /// Grid for `(2π)^{-1/2} ∫ A(θ² + ω²)^{-decay/2} cos(ωx) dω` with total
    /// error below `tol / 4` (truncation and aliasing each under `tol / 8`).
    pub fn for_inverse_transform(theta: f64, decay: f64, amplitude: f64, x: f64, tol: f64) -> Result<Self> {
        let m = decay / 2.0;
        let mut omega = truncation_radius(decay, amplitude, tol);
        if x != 0.0 {
            let oscillatory = (32.0 * amplitude * INV_SQRT_2PI / (x.abs() * tol)).powf(1.0 / decay);
            omega = omega.min(oscillatory);
        }
        Self::with_step(omega.max(10.0 * theta), alias_free_step(theta, m, x.abs()))
    }

    /// Grid for the spectral integrals of an even-or-odd `p` model with the
    /// given kernel, coefficients and centers, valid at query points with
    /// `|x| ≤ max_query`.
    pub fn for_model(
        kernel: &SpectralKernel,
        p: f64,
        centers: &[f64],
        coefficients: &[Complex64],
        max_query: f64,
        tol: f64,
    ) -> Result<Self> {
        let m = (p - 1.0) * kernel.degree();
        let amplitude = coefficients
            .iter()
            .map(|c| c.norm())
            .sum::<f64>()
            .powf(p - 1.0)
            .max(1e-300);
        let omega = truncation_radius(2.0 * m, amplitude, tol);
        let spread = centers.iter().fold(0.0f64, |a, x| a.max(x.abs()));
        let offset = max_query + p.ceil() * spread;
        Self::with_step(
            omega.max(10.0 * kernel.theta()),
            alias_free_step(kernel.theta(), m, offset),
        )
    }

    fn with_step(half_width: f64, step: f64) -> Result<Self> {
        let intervals = (2.0 * half_width / step).ceil();
        if !(intervals < MAX_NODES as f64) {
            return Err(Error::ResourceLimit(format!(
                "quadrature needs {intervals:.3e} nodes (half width {half_width:.3e}, step {step:.3e})"
            )));
        }
        // odd node count keeps ω = 0 on the grid
        let mut intervals = intervals as usize;
        intervals += intervals % 2;
        Self::new(half_width, (intervals + 1).max(Self::MIN_NODES + 1))
    }

    pub fn half_width(&self) -> f64 {
        self.half_width
    }

    pub fn nodes(&self) -> usize {
        self.nodes
    }

    pub fn step(&self) -> f64 {
        2.0 * self.half_width / (self.nodes - 1) as f64
    }

    /// Doubles the half width and the node count (same step).
    pub fn refined(&self) -> Self {
        QuadratureGrid {
            half_width: 2.0 * self.half_width,
            nodes: 2 * self.nodes - 1,
        }
    }

    /// Same half width, half the step.
    pub fn halved(&self) -> Self {
        QuadratureGrid {
            half_width: self.half_width,
            nodes: 2 * self.nodes - 1,
        }
    }

    /// Largest change of `value` under [`Self::refined`] and [`Self::halved`]:
    /// the first exposes truncation, the second aliasing.
    pub fn refinement_delta<T: std::ops::Sub<Output = T> + Copy>(
        &self,
        coarse: T,
        value: impl Fn(&QuadratureGrid) -> Result<T>,
        norm: impl Fn(T) -> f64,
    ) -> Result<f64> {
        let wide = norm(value(&self.refined())? - coarse);
        let fine = norm(value(&self.halved())? - coarse);
        Ok(wide.max(fine))
    }

    pub fn node(&self, i: usize) -> f64 {
        -self.half_width + i as f64 * self.step()
    }

    /// Trapezoid weight of node `i`.
    pub fn weight(&self, i: usize) -> f64 {
        if i == 0 || i + 1 == self.nodes {
            0.5 * self.step()
        } else {
            self.step()
        }
    }
}

fn truncation_radius(decay: f64, amplitude: f64, tol: f64) -> f64 {
    (16.0 * amplitude * INV_SQRT_2PI / ((decay - 1.0) * tol)).powf(1.0 / (decay - 1.0))
}

fn alias_free_step(theta: f64, m: f64, offset: f64) -> f64 {
    2.0 * std::f64::consts::PI / (offset + (40.0 + 4.0 * m) / theta)
}

/// `(2π)^{-1/2} ∫ density(ω) cos(ωx) dω` over the grid. `density` must be
/// even; the grid is symmetric, so only the nonnegative half is summed.
pub fn even_cosine_transform(grid: &QuadratureGrid, density: impl Fn(f64) -> f64, x: f64) -> f64 {
    const RESYNC: usize = 4096;
    let h = grid.step();
    let (rs, rc) = (h * x).sin_cos();
    let start = grid.nodes / 2;
    let (mut s, mut c) = (0.0, 0.0);
    let mut sum = 0.0;
    for i in start..grid.nodes {
        let w = grid.node(i);
        if (i - start).is_multiple_of(RESYNC) {
            (s, c) = (w * x).sin_cos();
        }
        let mirror = if 2 * i + 1 == grid.nodes { 1.0 } else { 2.0 };
        sum += mirror * grid.weight(i) * density(w) * c;
        (s, c) = (s * rc + c * rs, c * rc - s * rs);
    }
    INV_SQRT_2PI * sum
}

/// `ŝ(ω) = Φ̂(ω)^{p−1} S(ω) |S(ω)|^{p−2}` with `S(ω) = Σ c_l e^{−i x_l ω}`.
fn spectrum(kernel: &SpectralKernel, p: f64, centers: &[f64], c: &[Complex64], w: f64) -> Complex64 {
    let s: Complex64 = centers
        .iter()
        .zip(c)
        .map(|(x, cl)| cl * Complex64::from_polar(1.0, -x * w))
        .sum();
    let m = s.norm();
    if m == 0.0 {
        return Complex64::new(0.0, 0.0);
    }
    let density = kernel.spectral_density_sq(w * w);
    s * (density.powf(p - 1.0) * m.powf(p - 2.0))
}

fn integrate(
    grid: &QuadratureGrid,
    kernel: &SpectralKernel,
    p: f64,
    centers: &[f64],
    c: &[Complex64],
    x: f64,
) -> Complex64 {
    let mut sum = Complex64::new(0.0, 0.0);
    for i in 0..grid.nodes {
        let w = grid.node(i);
        sum += spectrum(kernel, p, centers, c, w) * Complex64::from_polar(grid.weight(i), x * w);
    }
    sum * INV_SQRT_2PI
}

fn check_inputs(kernel: &SpectralKernel, p: f64, centers: &[f64], c: &[Complex64]) -> Result<()> {
    if kernel.dim() != 1 {
        return Err(Error::Unsupported("spectral quadrature is one-dimensional".into()));
    }
    if !(p > 1.0) {
        return Err(Error::invalid(format!("exponent must exceed 1, got {p}")));
    }
    if centers.len() != c.len() {
        return Err(Error::invalid(format!(
            "{} centers but {} coefficients",
            centers.len(),
            c.len()
        )));
    }
    Ok(())
}

/// Quadrature of `s_c(x) = (2π)^{-1/2} ∫ Φ̂^{p−1} Σ_k c_k e^{i(x−x_k)ω} |S(ω)|^{p−2} dω`.
/// Any real `p > 1` is accepted.
pub fn quad_evaluate(
    grid: &QuadratureGrid,
    kernel: &SpectralKernel,
    p: f64,
    centers: &[f64],
    c: &[Complex64],
    x: f64,
) -> Result<QuadValue> {
    check_inputs(kernel, p, centers, c)?;
    let value = integrate(grid, kernel, p, centers, c, x);
    let refinement_delta = grid.refinement_delta(
        value,
        |g| Ok(integrate(g, kernel, p, centers, c, x)),
        |v: Complex64| v.norm(),
    )?;
    Ok(QuadValue {
        value,
        refinement_delta,
    })
}

/// `φ_j(c)`: [`quad_evaluate`] at center `j`.
pub fn quad_phi(
    grid: &QuadratureGrid,
    kernel: &SpectralKernel,
    p: f64,
    centers: &[f64],
    c: &[Complex64],
    j: usize,
) -> Result<QuadValue> {
    let x = *centers
        .get(j)
        .ok_or_else(|| Error::invalid(format!("center index {j} out of range")))?;
    quad_evaluate(grid, kernel, p, centers, c, x)
}

/// Surrogate of `L_q(μ)`, `dμ = (2π)^{-1/2} dω / Φ̂(ω)`, on the grid nodes.
pub fn spectral_space(grid: &QuadratureGrid, kernel: &SpectralKernel, exponent: f64) -> Result<WeightedSequenceSpace> {
    let nodes: Vec<Vec<f64>> = (0..grid.nodes).map(|i| vec![grid.node(i)]).collect();
    let weights: Vec<f64> = (0..grid.nodes)
        .map(|i| {
            let w = grid.node(i);
            grid.weight(i) * INV_SQRT_2PI / kernel.spectral_density_sq(w * w)
        })
        .collect();
    WeightedSequenceSpace::new(nodes, weights, exponent)
}

fn model_parts(model: &RkbsModel) -> Result<(Vec<f64>, Vec<Complex64>)> {
    if model.kernel().dim() != 1 {
        return Err(Error::Unsupported("spectral quadrature is one-dimensional".into()));
    }
    let centers = model.centers().iter().map(|x| x[0]).collect();
    Ok((centers, model.coefficients().entries().to_vec()))
}

fn reproduction_pairing(grid: &QuadratureGrid, model: &RkbsModel, y: f64) -> Result<Complex64> {
    let (centers, c) = model_parts(model)?;
    let kernel = model.kernel();
    let p = model.p() as f64;
    let space = spectral_space(grid, kernel, p / (p - 1.0))?;
    let nodes: Vec<f64> = (0..grid.nodes).map(|i| grid.node(i)).collect();
    let s_hat: Vec<Complex64> = nodes.iter().map(|&w| spectrum(kernel, p, &centers, &c, w)).collect();
    let k_hat: Vec<Complex64> = nodes
        .iter()
        .map(|&w| Complex64::from_polar(kernel.spectral_density_sq(w * w), -w * y))
        .collect();
    space.dual_pairing(&s_hat, &k_hat)
}

/// `|⟨ŝ, k̂_y⟩ − s(y)|` with `k̂_y(ω) = Φ̂(ω) e^{−iωy}`, the transform of `Φ(· − y)`.
pub fn quad_reproduction(grid: &QuadratureGrid, model: &RkbsModel, y: f64) -> Result<ReproductionCheck> {
    let pairing = reproduction_pairing(grid, model, y)?;
    let refinement_delta =
        grid.refinement_delta(pairing, |g| reproduction_pairing(g, model, y), |v: Complex64| v.norm())?;
    let evaluation = model.evaluate(&[y])?;
    Ok(ReproductionCheck {
        pairing,
        evaluation,
        residual: (pairing - evaluation).norm(),
        refinement_delta,
    })
}

/// Compares the surrogate norm of `ŝ` with the model norm and the
/// surrogate duality map of `ŝ` with the transform of the dual view.
pub fn quad_dual_check(grid: &QuadratureGrid, model: &RkbsModel) -> Result<DualCheck> {
    let (centers, c) = model_parts(model)?;
    let kernel = model.kernel();
    let p = model.p() as f64;
    let space = spectral_space(grid, kernel, p / (p - 1.0))?;
    let nodes: Vec<f64> = (0..grid.nodes).map(|i| grid.node(i)).collect();
    let s_hat: Vec<Complex64> = nodes.iter().map(|&w| spectrum(kernel, p, &centers, &c, w)).collect();
    let quadrature_norm = space.lp_norm(&s_hat)?;
    let dual = space.dual_element(&s_hat)?;
    let b = model.dual_view()?.coefficients;
    let mut worst: f64 = 0.0;
    let mut scale: f64 = 0.0;
    for (w, d) in nodes.iter().zip(&dual) {
        let expected: Complex64 = centers
            .iter()
            .zip(&b)
            .map(|(x, bk)| bk * Complex64::from_polar(kernel.spectral_density_sq(w * w), -x * w))
            .sum();
        worst = worst.max((d - expected).norm());
        scale = scale.max(expected.norm());
    }
    Ok(DualCheck {
        quadrature_norm,
        model_norm: model.rkbs_norm()?,
        dual_discrepancy: if scale > 0.0 { worst / scale } else { worst },
    })
}

/// Trapezoidal `(∫ |s(x)|^p dx)^{1/p}` over `[−half_width, half_width]`, a
/// finite-window check that `s` lies in `L_p`.
pub fn position_lp_norm(model: &RkbsModel, half_width: f64, nodes: usize) -> Result<f64> {
    let grid = QuadratureGrid::new(half_width, nodes)?;
    let p = model.p() as f64;
    let mut sum = 0.0;
    for i in 0..grid.nodes {
        sum += grid.weight(i) * model.evaluate(&[grid.node(i)])?.norm().powf(p);
    }
    Ok(sum.powf(1.0 / p))
}

impl QuadValue {
    /// Verdict of comparing this value with `reference` at `tolerance`.
    pub fn judge(&self, reference: Complex64, tolerance: f64) -> Verdict {
        Verdict::judge((self.value - reference).norm(), self.refinement_delta, tolerance)
    }
}

impl ReproductionCheck {
    pub fn judge(&self, tolerance: f64) -> Verdict {
        Verdict::judge(self.residual, self.refinement_delta, tolerance)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn c(re: f64) -> Complex64 {
        Complex64::new(re, 0.0)
    }

    #[test]
    fn grid_geometry() {
        let g = QuadratureGrid::new(2.0, 17).unwrap();
        assert_eq!(g.step(), 0.25);
        assert_eq!(g.node(0), -2.0);
        assert_eq!(g.node(16), 2.0);
        assert_eq!(g.node(8), 0.0);
        let r = g.refined();
        assert_eq!((r.half_width(), r.nodes(), r.step()), (4.0, 33, 0.25));
        let total: f64 = (0..g.nodes()).map(|i| g.weight(i)).sum();
        assert!((total - 4.0).abs() < 1e-15);
        assert!(QuadratureGrid::new(1.0, 8).is_err());
        assert!(QuadratureGrid::new(0.0, 32).is_err());
        assert!(matches!(
            QuadratureGrid::new(1.0, MAX_NODES + 1),
            Err(Error::ResourceLimit(_))
        ));
        let d = QuadratureGrid::default_for(0.5).unwrap();
        assert_eq!((d.half_width(), d.nodes()), (20.0, 1 << 14));
    }

    #[test]
    fn cosine_transform_of_gaussian() {
        // (2π)^{-1/2} ∫ e^{−ω²/2} cos(ωx) dω = e^{−x²/2}
        let g = QuadratureGrid::new(12.0, 4097).unwrap();
        for &x in &[0.0, 0.7, 2.0, -3.1] {
            let v = even_cosine_transform(&g, |w| (-0.5 * w * w).exp(), x);
            assert!((v - (-0.5 * x * x).exp()).abs() < 1e-13, "x={x}");
        }
    }

    #[test]
    fn cosine_recurrence_stays_accurate() {
        // many more nodes than the resync period
        let g = QuadratureGrid::new(3000.0, 600_001).unwrap();
        let direct: f64 = (0..g.nodes())
            .map(|i| {
                let w = g.node(i);
                g.weight(i) * (1.0 + w * w).recip() * (w * 1.3).cos()
            })
            .sum::<f64>()
            * INV_SQRT_2PI;
        let fast = even_cosine_transform(&g, |w| (1.0 + w * w).recip(), 1.3);
        assert!((direct - fast).abs() < 1e-12);
    }

    #[test]
    fn p2_single_coefficient_matches_kernel() {
        let k = SpectralKernel::new(1.0, 2.0, 1).unwrap();
        let centers = [0.4];
        let coef = [Complex64::new(0.8, -0.3)];
        let grid = QuadratureGrid::for_model(&k, 2.0, &centers, &coef, 2.0, 1e-7).unwrap();
        for &x in &[-1.5, 0.0, 0.4, 1.9] {
            let q = quad_evaluate(&grid, &k, 2.0, &centers, &coef, x).unwrap();
            let want = coef[0] * k.evaluate(&[x - 0.4]).unwrap();
            assert_eq!(q.judge(want, 1e-5), Verdict::Pass, "x={x} {q:?} {want}");
        }
    }

    #[test]
    fn zero_coefficients_give_zero() {
        let k = SpectralKernel::new(1.0, 2.0, 1).unwrap();
        let grid = QuadratureGrid::default_for(1.0).unwrap();
        let q = quad_phi(&grid, &k, 4.0, &[0.0, 1.0], &[c(0.0), c(0.0)], 1).unwrap();
        assert_eq!(q.value, Complex64::new(0.0, 0.0));
        assert_eq!(q.refinement_delta, 0.0);
    }

    #[test]
    fn phi_at_center_equals_evaluate_there() {
        let k = SpectralKernel::new(1.0, 2.0, 1).unwrap();
        let centers = [-0.3, 0.5];
        let coef = [c(0.7), Complex64::new(-0.2, 0.4)];
        let grid = QuadratureGrid::for_model(&k, 3.0, &centers, &coef, 1.0, 1e-6).unwrap();
        let a = quad_phi(&grid, &k, 3.0, &centers, &coef, 1).unwrap();
        let b = quad_evaluate(&grid, &k, 3.0, &centers, &coef, 0.5).unwrap();
        assert_eq!(a, b);
        assert!(a.value.norm().is_finite());
    }

    #[test]
    fn rejects_higher_dimension() {
        let k = SpectralKernel::new(1.0, 2.0, 2).unwrap();
        let grid = QuadratureGrid::default_for(1.0).unwrap();
        assert!(matches!(
            quad_evaluate(&grid, &k, 2.0, &[0.0], &[c(1.0)], 0.0),
            Err(Error::Unsupported(_))
        ));
    }
}

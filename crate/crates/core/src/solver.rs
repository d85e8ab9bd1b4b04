//! Regularized empirical risk over coefficient vectors and its minimization.
//!
//! ```text
//! T(c) = Σ_j L(y_j, φ_j(c)) + R((c* φ(c))^{1/q})
//! ```
//!
//! Gradients follow one convention throughout: for `c_k = u_k + i v_k`,
//! `∇T(c)_k = ∂T/∂u_k + i ∂T/∂v_k = 2 ∂T/∂conj(c_k)`. With the Wirtinger
//! derivative `L' = ∂L/∂t` and the Jacobians `A = ∂φ/∂c`, `B = ∂φ/∂conj(c)`,
//!
//! ```text
//! ∇T_k = 2 Σ_j (L'_j B_jk + conj(L'_j A_jk)) + R'(‖s‖) (p/q) (c*φ)^{−1/p} φ_k
//! ```
//!
//! using `∂(c*φ)/∂conj(c_k) = (p/2) φ_k`. In real mode the gradient is the real
//! part. A coefficient vector is a fixed point of `c ↦ c + ∇T(c)` exactly when
//! `∇T(c) = 0`; [`fixed_point_solve`] finds such points by a monotone
//! line-search descent.

use std::collections::VecDeque;

use nalgebra::{Cholesky, DMatrix, DVector};
use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::function_space::{CoefficientVector, GramStorage, KernelExpansion, RkbsModel, TrainingSet};
use crate::kernels::SpectralKernel;

const ZERO: Complex64 = Complex64::new(0.0, 0.0);

/// Loss `L(y, t)`, convex and `C¹` in `t`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum LossSpec {
    /// `|t − y|²`.
    Squared,
    /// `log(1 + e^{−y Re t})`, labels `±1`.
    Logistic,
    /// `max(0, 1 − y Re t)²`, labels `±1`.
    SquaredHinge,
}

impl LossSpec {
    pub fn needs_labels(&self) -> bool {
        !matches!(self, LossSpec::Squared)
    }

    pub fn check_target(&self, y: Complex64) -> Result<()> {
        if self.needs_labels() && !(y.im == 0.0 && (y.re == 1.0 || y.re == -1.0)) {
            return Err(Error::invalid(format!(
                "{self:?} loss needs labels in {{-1, +1}}, got {y}"
            )));
        }
        Ok(())
    }

    /// `(L(y, t), ∂L/∂t)` with `∂/∂t = (∂/∂u − i ∂/∂v)/2`.
    pub fn value_and_derivative(&self, y: Complex64, t: Complex64) -> Result<(f64, Complex64)> {
        self.check_target(y)?;
        Ok(match self {
            LossSpec::Squared => {
                let r = t - y;
                (r.norm_sqr(), r.conj())
            }
            LossSpec::Logistic => {
                let m = y.re * t.re;
                // log(1 + e^{−m}) and its m-derivative −1/(1 + e^m), overflow-safe
                let value = if m > 0.0 {
                    (-m).exp().ln_1p()
                } else {
                    -m + m.exp().ln_1p()
                };
                let dm = -1.0 / (1.0 + m.exp());
                (value, Complex64::new(0.5 * dm * y.re, 0.0))
            }
            LossSpec::SquaredHinge => {
                let slack = (1.0 - y.re * t.re).max(0.0);
                (slack * slack, Complex64::new(-slack * y.re, 0.0))
            }
        })
    }
}

impl LossSpec {
    /// `L(y, t + δ) − L(y, t)` without cancellation against `L(y, t)`.
    pub fn increment(&self, y: Complex64, t: Complex64, delta: Complex64) -> Result<f64> {
        self.check_target(y)?;
        Ok(match self {
            LossSpec::Squared => 2.0 * ((t - y).conj() * delta).re + delta.norm_sqr(),
            LossSpec::Logistic => {
                let m = y.re * t.re;
                // log((1 + e^{−m−e}) / (1 + e^{−m})) = log1p(expm1(−e) / (1 + e^m))
                ((-(y.re * delta.re)).exp_m1() / (1.0 + m.exp())).ln_1p()
            }
            LossSpec::SquaredHinge => {
                let a = 1.0 - y.re * t.re;
                let e = y.re * delta.re;
                match (a > 0.0, a - e > 0.0) {
                    (true, true) => -e * (2.0 * a - e),
                    (true, false) => -a * a,
                    (false, true) => (a - e) * (a - e),
                    (false, false) => 0.0,
                }
            }
        })
    }
}

/// Regularizer `R(t)` on the norm, convex and strictly increasing.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum RegularizerSpec {
    /// `λ t²`.
    LambdaTSquared { lambda: f64 },
    /// `λ t^r`, `r > 1`.
    LambdaTPower { lambda: f64, power: f64 },
}

impl RegularizerSpec {
    pub fn validate(&self) -> Result<()> {
        let (lambda, power) = match *self {
            RegularizerSpec::LambdaTSquared { lambda } => (lambda, 2.0),
            RegularizerSpec::LambdaTPower { lambda, power } => (lambda, power),
        };
        if !(lambda > 0.0) || !lambda.is_finite() {
            return Err(Error::invalid(format!(
                "regularization lambda must be positive, got {lambda}"
            )));
        }
        if !(power > 1.0) || !power.is_finite() {
            return Err(Error::invalid(format!("regularizer power must exceed 1, got {power}")));
        }
        Ok(())
    }

    pub fn lambda(&self) -> f64 {
        match *self {
            RegularizerSpec::LambdaTSquared { lambda } | RegularizerSpec::LambdaTPower { lambda, .. } => lambda,
        }
    }

    fn power(&self) -> f64 {
        match *self {
            RegularizerSpec::LambdaTSquared { .. } => 2.0,
            RegularizerSpec::LambdaTPower { power, .. } => power,
        }
    }

    pub fn value(&self, t: f64) -> f64 {
        self.lambda() * t.powf(self.power())
    }

    /// `R((ν + δ)^{1/q}) − R(ν^{1/q})` without cancellation.
    pub fn increment_in_norm_power(&self, nu: f64, delta: f64, q: f64) -> f64 {
        let a = self.power() / q;
        let lambda = self.lambda();
        if nu > 0.0 {
            let x = delta / nu;
            if x <= -1.0 {
                -lambda * nu.powf(a)
            } else {
                lambda * nu.powf(a) * (a * x.ln_1p()).exp_m1()
            }
        } else {
            lambda * delta.max(0.0).powf(a)
        }
    }

    pub fn derivative(&self, t: f64) -> f64 {
        let r = self.power();
        self.lambda() * r * t.powf(r - 1.0)
    }
}

/// Starting point of [`fixed_point_solve`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum InitStrategy {
    /// Ridge solution of the `p = 2` problem, rescaled so that `φ(c⁰)` has
    /// the magnitude of the ridge fit.
    Ridge,
    Zero,
    Given(Vec<Complex64>),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SolverConfig {
    /// Initial trial step of the first iteration.
    pub step: f64,
    pub max_iters: usize,
    pub grad_tol: f64,
    /// Step shrink factor of the backtracking line search.
    pub backtracking: f64,
    pub min_step: f64,
    /// Number of curvature pairs kept by the quasi-Newton direction; `0`
    /// picks twice the number of real unknowns, clamped to `[10, 100]`.
    pub memory: usize,
    /// Precondition directions with the inverse Gram matrix of the base kernel.
    pub precondition: bool,
    pub init: InitStrategy,
    /// Retry in complex mode when a real-mode solve stalls.
    pub complex_retry: bool,
    pub seed: u64,
}

impl Default for SolverConfig {
    fn default() -> Self {
        SolverConfig {
            step: 1.0,
            max_iters: 5000,
            grad_tol: 1e-8,
            backtracking: 0.5,
            min_step: 1e-20,
            memory: 0,
            precondition: true,
            init: InitStrategy::Ridge,
            complex_retry: true,
            seed: 0,
        }
    }
}

impl SolverConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.step > 0.0) || !self.step.is_finite() {
            return Err(Error::invalid(format!(
                "solver step must be positive, got {}",
                self.step
            )));
        }
        if !(self.backtracking > 0.0 && self.backtracking < 1.0) {
            return Err(Error::invalid(format!(
                "backtracking factor must lie in (0, 1), got {}",
                self.backtracking
            )));
        }
        if !(self.grad_tol > 0.0) || !(self.min_step > 0.0) {
            return Err(Error::invalid("grad_tol and min_step must be positive"));
        }
        if self.max_iters == 0 {
            return Err(Error::invalid("max_iters must be at least 1"));
        }
        Ok(())
    }
}

/// Arithmetic in which a solve ran.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Mode {
    Real,
    Complex,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Diagnostics {
    pub iterations: usize,
    pub gradient_norm: f64,
    /// Objective after each accepted iterate, starting with the initial point.
    /// Entries after the first accumulate the exact line increments (see
    /// [`Ray`]), so they are free of the round-off of direct evaluation and
    /// never increase.
    pub objective_trace: Vec<f64>,
    pub mode: Mode,
    /// A real-mode solve stalled and the result comes from complex mode.
    pub complex_retry: bool,
    /// The ridge start was unusable and a seeded perturbation of zero was used.
    pub init_fallback: bool,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Solution {
    pub coefficients: CoefficientVector,
    pub objective: f64,
    pub diagnostics: Diagnostics,
}

/// Objective value, gradient and `φ` at one coefficient vector.
#[derive(Debug, Clone, PartialEq)]
pub struct Evaluation {
    pub objective: f64,
    pub gradient: Vec<Complex64>,
    pub phi: Vec<Complex64>,
    /// `ν = c* φ(c) = ‖s‖^q`.
    pub norm_power: f64,
}

/// The minimization problem: an expansion whose first `targets.len()`
/// centers carry data; further centers (if any) carry none.
#[derive(Debug, Clone)]
pub struct Problem {
    expansion: KernelExpansion,
    targets: Vec<Complex64>,
    loss: LossSpec,
    regularizer: RegularizerSpec,
    real_mode: bool,
}

impl Problem {
    pub fn new(
        expansion: KernelExpansion,
        targets: Vec<Complex64>,
        loss: LossSpec,
        regularizer: RegularizerSpec,
        real_mode: bool,
    ) -> Result<Self> {
        regularizer.validate()?;
        if targets.is_empty() || targets.len() > expansion.len() {
            return Err(Error::invalid(format!(
                "{} targets for {} centers",
                targets.len(),
                expansion.len()
            )));
        }
        for y in &targets {
            loss.check_target(*y)?;
        }
        if real_mode && targets.iter().any(|y| y.im != 0.0) {
            return Err(Error::invalid("real mode needs real targets"));
        }
        Ok(Problem {
            expansion,
            targets,
            loss,
            regularizer,
            real_mode,
        })
    }

    /// Problem whose centers are exactly the data points.
    pub fn from_data(
        p: usize,
        kernel: SpectralKernel,
        data: &TrainingSet,
        loss: LossSpec,
        regularizer: RegularizerSpec,
        real_mode: bool,
        storage: GramStorage,
    ) -> Result<Self> {
        let expansion = KernelExpansion::new(p, kernel, data.points().to_vec(), storage)?;
        Self::new(expansion, data.values().to_vec(), loss, regularizer, real_mode)
    }

    pub fn expansion(&self) -> &KernelExpansion {
        &self.expansion
    }

    pub fn targets(&self) -> &[Complex64] {
        &self.targets
    }

    pub fn loss(&self) -> LossSpec {
        self.loss
    }

    pub fn regularizer(&self) -> RegularizerSpec {
        self.regularizer
    }

    pub fn real_mode(&self) -> bool {
        self.real_mode
    }

    fn risk(&self, phi: &[Complex64]) -> Result<(f64, Vec<Complex64>)> {
        let mut total = 0.0;
        let mut derivs = Vec::with_capacity(self.targets.len());
        for (y, t) in self.targets.iter().zip(phi) {
            let (v, d) = self.loss.value_and_derivative(*y, *t)?;
            total += v;
            derivs.push(d);
        }
        Ok((total, derivs))
    }

    pub fn objective(&self, c: &[Complex64]) -> Result<f64> {
        let phi = self.expansion.phi(c)?;
        let (risk, _) = self.risk(&phi)?;
        let nu = self.expansion.norm_power_from_phi(c, &phi)?;
        Ok(risk + self.regularizer.value(nu.powf(1.0 / self.expansion.q())))
    }

    pub fn gradient(&self, c: &[Complex64]) -> Result<Vec<Complex64>> {
        Ok(self.evaluate(c)?.gradient)
    }

    pub fn evaluate(&self, c: &[Complex64]) -> Result<Evaluation> {
        let exp = &self.expansion;
        let phi = exp.phi(c)?;
        let (risk, dl) = self.risk(&phi)?;
        let nu = exp.norm_power_from_phi(c, &phi)?;
        let q = exp.q();
        let p = exp.p() as f64;
        let norm = nu.powf(1.0 / q);
        let objective = risk + self.regularizer.value(norm);
        let jac = exp.jacobians(c)?;
        let n = exp.len();
        let mut gradient = vec![ZERO; n];
        for (k, g) in gradient.iter_mut().enumerate() {
            let mut acc = ZERO;
            for (j, d) in dl.iter().enumerate() {
                acc += d * jac.antiholomorphic[(j, k)] + (d * jac.holomorphic[(j, k)]).conj();
            }
            *g = acc * 2.0;
        }
        if nu > 0.0 {
            let scale = self.regularizer.derivative(norm) * (p / q) * nu.powf(-1.0 / p);
            for (g, f) in gradient.iter_mut().zip(&phi) {
                *g += f * scale;
            }
        }
        if self.real_mode {
            gradient.iter_mut().for_each(|g| g.im = 0.0);
        }
        Ok(Evaluation {
            objective,
            gradient,
            phi,
            norm_power: nu,
        })
    }
}

/// The objective along `c + t d`, `t` real, through exact increments: `φ`
/// and `ν` are polynomials in `t`, so `T(c + t d) − T(c)` is assembled from
/// terms that vanish with `t` instead of as a difference of two evaluations.
pub struct Ray<'a> {
    problem: &'a Problem,
    c: Vec<Complex64>,
    d: Vec<Complex64>,
    phi: Vec<Complex64>,
    norm_power: f64,
    psi: Vec<Vec<Complex64>>,
}

impl<'a> Ray<'a> {
    pub fn new(problem: &'a Problem, c: &[Complex64], at_c: &Evaluation, d: &[Complex64]) -> Result<Self> {
        let psi = problem.expansion.phi_increments(c, d)?;
        Ok(Ray {
            problem,
            c: c.to_vec(),
            d: d.to_vec(),
            phi: at_c.phi.clone(),
            norm_power: at_c.norm_power,
            psi,
        })
    }

    /// `T(c + t d) − T(c)`.
    pub fn increment(&self, t: f64) -> Result<f64> {
        let pr = self.problem;
        let mut risk = 0.0;
        let mut dnu = 0.0;
        for (j, psi) in self.psi.iter().enumerate() {
            let dphi = psi.iter().rev().fold(ZERO, |acc, v| (acc + v) * t);
            if let Some(y) = pr.targets.get(j) {
                risk += pr.loss.increment(*y, self.phi[j], dphi)?;
            }
            dnu += (self.c[j].conj() * dphi + (self.d[j] * t).conj() * (self.phi[j] + dphi)).re;
        }
        let reg = pr
            .regularizer
            .increment_in_norm_power(self.norm_power, dnu, pr.expansion.q());
        Ok(risk + reg)
    }
}

/// Euclidean norm of a complex vector.
pub fn gradient_norm(g: &[Complex64]) -> f64 {
    g.iter().map(|v| v.norm_sqr()).sum::<f64>().sqrt()
}

/// Solves `(G + λI) c = y` with the Gram matrix `G` of the base kernel.
/// This is the exact stationary point of `Σ|φ_j − y_j|² + λ‖s‖²` for `p = 2`.
pub fn solve_p2_closed_form(data: &TrainingSet, kernel: &SpectralKernel, lambda: f64) -> Result<Vec<Complex64>> {
    if !(lambda >= 0.0) || !lambda.is_finite() {
        return Err(Error::invalid(format!("lambda must be nonnegative, got {lambda}")));
    }
    let g = gram_matrix(kernel, data.points())?;
    let n = g.nrows();
    let a = &g + DMatrix::identity(n, n) * lambda;
    let eig = a.clone().symmetric_eigen();
    let (lo, hi) = eig
        .eigenvalues
        .iter()
        .fold((f64::INFINITY, 0.0f64), |(l, h), v| (l.min(*v), h.max(v.abs())));
    let condition = if lo > 0.0 { hi / lo } else { f64::INFINITY };
    if !(condition < 1e14) {
        return Err(Error::Singular { condition });
    }
    let chol = Cholesky::new(a).ok_or(Error::Singular { condition })?;
    let re = chol.solve(&DVector::from_iterator(n, data.values().iter().map(|y| y.re)));
    let im = chol.solve(&DVector::from_iterator(n, data.values().iter().map(|y| y.im)));
    Ok(re.iter().zip(im.iter()).map(|(&a, &b)| Complex64::new(a, b)).collect())
}

/// `(Φ(x_j − x_k))_{jk}`.
pub fn gram_matrix(kernel: &SpectralKernel, points: &[Vec<f64>]) -> Result<DMatrix<f64>> {
    let n = points.len();
    let mut g = DMatrix::zeros(n, n);
    for j in 0..n {
        for k in 0..=j {
            let z: Vec<f64> = points[j].iter().zip(&points[k]).map(|(a, b)| a - b).collect();
            let v = kernel.evaluate(&z)?;
            g[(j, k)] = v;
            g[(k, j)] = v;
        }
    }
    Ok(g)
}

/// Model values at `xs`.
pub fn predict(model: &RkbsModel, xs: &[Vec<f64>]) -> Result<Vec<Complex64>> {
    xs.iter().map(|x| model.evaluate(x)).collect()
}

/// `±1` by the sign of the real part (zero maps to `+1`).
pub fn classify(values: &[Complex64]) -> Vec<f64> {
    values.iter().map(|v| if v.re >= 0.0 { 1.0 } else { -1.0 }).collect()
}

/// Inverse base-kernel Gram matrix applied blockwise to real coordinates.
struct Preconditioner {
    chol: Option<Cholesky<f64, nalgebra::Dyn>>,
    n: usize,
}

impl Preconditioner {
    fn new(problem: &Problem, enabled: bool) -> Self {
        let n = problem.expansion.len();
        if !enabled {
            return Preconditioner { chol: None, n };
        }
        let chol = gram_matrix(problem.expansion.kernel(), problem.expansion.centers())
            .ok()
            .and_then(|g| {
                let shift = 1e-10 * g.diagonal().max();
                Cholesky::new(g + DMatrix::identity(n, n) * shift)
            });
        Preconditioner { chol, n }
    }

    fn apply(&self, v: &[f64]) -> Vec<f64> {
        match &self.chol {
            None => v.to_vec(),
            Some(ch) => v
                .chunks(self.n)
                .flat_map(|block| {
                    ch.solve(&DVector::from_column_slice(block))
                        .iter()
                        .copied()
                        .collect::<Vec<_>>()
                })
                .collect(),
        }
    }
}

fn to_real(c: &[Complex64], mode: Mode) -> Vec<f64> {
    match mode {
        Mode::Real => c.iter().map(|v| v.re).collect(),
        Mode::Complex => c.iter().map(|v| v.re).chain(c.iter().map(|v| v.im)).collect(),
    }
}

fn from_real(z: &[f64], mode: Mode) -> Vec<Complex64> {
    match mode {
        Mode::Real => z.iter().map(|&v| Complex64::new(v, 0.0)).collect(),
        Mode::Complex => {
            let n = z.len() / 2;
            (0..n).map(|k| Complex64::new(z[k], z[n + k])).collect()
        }
    }
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// Minimizes `T` until `‖∇T(c)‖ ≤ grad_tol`, i.e. until `c` is a fixed point
/// of `c ↦ c + ∇T(c)` to that tolerance.
///
/// Each iteration takes a quasi-Newton (limited-memory BFGS) direction,
/// preconditioned by the inverse Gram matrix, and backtracks until the
/// Armijo condition holds, so the objective never increases. Stalls
/// (step below `min_step`) and exhausted iteration budgets are reported as
/// [`Error::NonConvergence`] carrying the best iterate.
pub fn fixed_point_solve(problem: &Problem, config: &SolverConfig) -> Result<Solution> {
    config.validate()?;
    let (start, init_fallback) = initial_point(problem, config)?;
    let first_mode = if problem.real_mode { Mode::Real } else { Mode::Complex };
    match descend(problem, config, start, first_mode, init_fallback) {
        Err(Error::NonConvergence { best, .. }) if first_mode == Mode::Real && config.complex_retry => {
            // break the real symmetry with a small seeded imaginary part
            let mut rng = ChaCha8Rng::seed_from_u64(config.seed ^ 0x9e37_79b9_7f4a_7c15);
            let scale = 1e-4 * (1.0 + gradient_norm(best.coefficients.entries()));
            let c: Vec<Complex64> = best
                .coefficients
                .entries()
                .iter()
                .map(|v| Complex64::new(v.re, scale * rng.gen_range(-1.0..1.0)))
                .collect();
            let relaxed = Problem {
                real_mode: false,
                ..problem.clone()
            };
            let mut out = descend(&relaxed, config, c, Mode::Complex, init_fallback);
            let mark = |s: &mut Solution| {
                s.diagnostics.complex_retry = true;
                let mut trace = best.diagnostics.objective_trace.clone();
                trace.extend_from_slice(&s.diagnostics.objective_trace);
                s.diagnostics.objective_trace = trace;
                s.diagnostics.iterations += best.diagnostics.iterations;
            };
            match &mut out {
                Ok(s) => mark(s),
                Err(Error::NonConvergence { best, .. }) => mark(best),
                Err(_) => {}
            }
            out
        }
        other => other,
    }
}

fn initial_point(problem: &Problem, config: &SolverConfig) -> Result<(Vec<Complex64>, bool)> {
    let n = problem.expansion.len();
    match &config.init {
        InitStrategy::Zero => Ok((vec![ZERO; n], false)),
        InitStrategy::Given(c) => {
            if c.len() != n {
                return Err(Error::invalid(format!(
                    "initial point has {} entries for {n} centers",
                    c.len()
                )));
            }
            let mut c = c.clone();
            if problem.real_mode {
                c.iter_mut().for_each(|v| v.im = 0.0);
            }
            Ok((c, false))
        }
        InitStrategy::Ridge => match ridge_start(problem) {
            Some(c) => Ok((best_on_line(problem, c)?, false)),
            None => {
                let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
                let c = (0..n)
                    .map(|_| {
                        let re = 1e-3 * rng.gen_range(-1.0..1.0);
                        let im = if problem.real_mode {
                            0.0
                        } else {
                            1e-3 * rng.gen_range(-1.0..1.0)
                        };
                        Complex64::new(re, im)
                    })
                    .collect();
                Ok((c, true))
            }
        },
    }
}

/// For `p > 2`, `c = 0` is a degenerate stationary point that descent can
/// drift into. Starting strictly below `T(0)` rules that out, so scan `t c`
/// over both signs and a geometric range of magnitudes and return the best
/// point if it beats both `c` and zero.
fn best_on_line(problem: &Problem, c: Vec<Complex64>) -> Result<Vec<Complex64>> {
    if problem.expansion.p() == 2 {
        return Ok(c);
    }
    let zero = vec![ZERO; c.len()];
    let at_zero = problem.evaluate(&zero)?;
    let ray = Ray::new(problem, &zero, &at_zero, &c)?;
    let mut best = (ray.increment(1.0).unwrap_or(f64::INFINITY), 1.0);
    for k in -40..=12 {
        let m = 2f64.powf(k as f64 / 4.0);
        for t in [m, -m] {
            if let Ok(delta) = ray.increment(t) {
                if delta < best.0 {
                    best = (delta, t);
                }
            }
        }
    }
    if best.0 < 0.0 {
        Ok(c.iter().map(|v| v * best.1).collect())
    } else {
        Ok(c)
    }
}

fn ridge_start(problem: &Problem) -> Option<Vec<Complex64>> {
    let exp = &problem.expansion;
    let n = exp.len();
    let g = gram_matrix(exp.kernel(), exp.centers()).ok()?;
    let lambda = problem.regularizer.lambda();
    let a = &g + DMatrix::identity(n, n) * lambda;
    let chol = Cholesky::new(a)?;
    // centers without data get a zero target
    let y = |f: fn(&Complex64) -> f64| {
        DVector::from_iterator(n, (0..n).map(|k| problem.targets.get(k).map(f).unwrap_or(0.0)))
    };
    let re = chol.solve(&y(|v| v.re));
    let im = if problem.real_mode {
        DVector::zeros(n)
    } else {
        chol.solve(&y(|v| v.im))
    };
    let c: Vec<Complex64> = re.iter().zip(im.iter()).map(|(&a, &b)| Complex64::new(a, b)).collect();
    if c.iter().any(|v| !v.re.is_finite() || !v.im.is_finite()) {
        return None;
    }
    if exp.p() == 2 {
        return Some(c);
    }
    // φ is homogeneous of degree p − 1 under positive scaling
    let fit = DVector::from_vec(c.clone());
    let gc = g.map(|v| Complex64::new(v, 0.0)) * fit;
    let target = gc.iter().map(|v| v.norm_sqr()).sum::<f64>().sqrt();
    let phi = exp.phi(&c).ok()?;
    let reached = gradient_norm(&phi);
    if target == 0.0 {
        // all targets vanish
        return Some(c);
    }
    if !(target > 0.0) || !(reached > 0.0) {
        return None;
    }
    let alpha = (target / reached).powf(1.0 / (exp.p() as f64 - 1.0));
    Some(c.iter().map(|v| v * alpha).collect())
}

fn descend(
    problem: &Problem,
    config: &SolverConfig,
    start: Vec<Complex64>,
    mode: Mode,
    init_fallback: bool,
) -> Result<Solution> {
    let pre = Preconditioner::new(problem, config.precondition);
    let mut z = to_real(&start, mode);
    let mut eval = problem.evaluate(&from_real(&z, mode))?;
    let mut grad = to_real(&eval.gradient, mode);
    let mut tracked = eval.objective;
    let mut trace = vec![tracked];
    let mut memory: VecDeque<(Vec<f64>, Vec<f64>, f64)> = VecDeque::new();
    let capacity = if config.memory == 0 {
        (2 * z.len()).clamp(10, 100)
    } else {
        config.memory
    };
    let mut iterations = 0;
    let real_mode = mode == Mode::Real;

    let finish = |z: &[f64], objective: f64, gnorm: f64, iterations: usize, trace: Vec<f64>| Solution {
        coefficients: CoefficientVector::new(from_real(z, mode), real_mode).expect("finite iterate"),
        objective,
        diagnostics: Diagnostics {
            iterations,
            gradient_norm: gnorm,
            objective_trace: trace,
            mode,
            complex_retry: false,
            init_fallback,
        },
    };

    loop {
        let gnorm = dot(&grad, &grad).sqrt();
        if gnorm <= config.grad_tol {
            return Ok(finish(&z, eval.objective, gnorm, iterations, trace));
        }
        if iterations >= config.max_iters {
            let best = finish(&z, eval.objective, gnorm, iterations, trace);
            return Err(Error::NonConvergence {
                reason: format!(
                    "{} iterations without reaching gradient norm {:e}",
                    config.max_iters, config.grad_tol
                ),
                best: Box::new(best),
            });
        }
        let mut direction = lbfgs_direction(&grad, &memory, &pre);
        let mut slope = dot(&grad, &direction);
        if !(slope < 0.0) {
            memory.clear();
            direction = pre.apply(&grad).iter().map(|v| -v).collect();
            slope = dot(&grad, &direction);
        }
        let mut t = if memory.is_empty() && iterations == 0 {
            config.step
        } else {
            1.0
        };
        let mut accepted = None;
        let mut fresh_restart = memory.is_empty();
        let here = from_real(&z, mode);
        let mut ray = Ray::new(problem, &here, &eval, &from_real(&direction, mode))?;
        loop {
            if let Ok(delta) = ray.increment(t) {
                if delta.is_finite() && delta <= 1e-4 * t * slope {
                    let candidate: Vec<f64> = z.iter().zip(&direction).map(|(a, d)| a + t * d).collect();
                    if let Ok(trial) = problem.evaluate(&from_real(&candidate, mode)) {
                        if trial.objective.is_finite() {
                            accepted = Some((candidate, trial, delta));
                            break;
                        }
                    }
                }
            }
            t *= config.backtracking;
            if t < config.min_step {
                if fresh_restart {
                    break;
                }
                // retry once along the preconditioned gradient
                memory.clear();
                fresh_restart = true;
                direction = pre.apply(&grad).iter().map(|v| -v).collect();
                slope = dot(&grad, &direction);
                ray = Ray::new(problem, &here, &eval, &from_real(&direction, mode))?;
                t = 1.0;
            }
        }
        let Some((candidate, trial, delta)) = accepted else {
            let best = finish(&z, eval.objective, gnorm, iterations, trace);
            return Err(Error::NonConvergence {
                reason: format!(
                    "line search step fell below {:e} at gradient norm {gnorm:.3e}",
                    config.min_step
                ),
                best: Box::new(best),
            });
        };
        let new_grad = to_real(&trial.gradient, mode);
        let s: Vec<f64> = candidate.iter().zip(&z).map(|(a, b)| a - b).collect();
        let y: Vec<f64> = new_grad.iter().zip(&grad).map(|(a, b)| a - b).collect();
        let sy = dot(&s, &y);
        if sy > 1e-12 * dot(&s, &s).sqrt() * dot(&y, &y).sqrt() {
            memory.push_back((s, y, 1.0 / sy));
            if memory.len() > capacity {
                memory.pop_front();
            }
        }
        z = candidate;
        grad = new_grad;
        eval = trial;
        tracked += delta;
        trace.push(tracked);
        iterations += 1;
    }
}

/// Two-loop recursion with initial inverse Hessian `γ P`.
fn lbfgs_direction(grad: &[f64], memory: &VecDeque<(Vec<f64>, Vec<f64>, f64)>, pre: &Preconditioner) -> Vec<f64> {
    let mut q = grad.to_vec();
    let mut alphas = Vec::with_capacity(memory.len());
    for (s, y, rho) in memory.iter().rev() {
        let a = rho * dot(s, &q);
        q.iter_mut().zip(y).for_each(|(qi, yi)| *qi -= a * yi);
        alphas.push(a);
    }
    let mut r = pre.apply(&q);
    if let Some((s, y, _)) = memory.back() {
        let py = pre.apply(y);
        let gamma = dot(s, y) / dot(y, &py);
        r.iter_mut().for_each(|v| *v *= gamma);
    }
    for ((s, y, rho), a) in memory.iter().zip(alphas.iter().rev()) {
        let b = rho * dot(y, &r);
        r.iter_mut().zip(s).for_each(|(ri, si)| *ri += (a - b) * si);
    }
    r.iter().map(|v| -v).collect()
}

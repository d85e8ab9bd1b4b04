//! The finite two-sided RKBS on `{1, …, n}` generated by a Hermitian
//! positive definite matrix `A = V D V*`.
//!
//! ```text
//! ‖f‖_B  = ‖D^{-1/q} V* f‖_q
//! ‖g‖_B' = ‖D^{-1/p} V* g‖_p
//! ⟨f, g⟩ = g* A^{-1} f
//! ```
//!
//! The kernel is `K(j, k) = A_jk`; columns `A e_k` reproduce point values on
//! both sides. In the coordinates `u = D^{-1/q} V* f` and `w = D^{-1/p} V* g`
//! the spaces are plain `ℓ_q` and `ℓ_p` and the pairing is `w* u`.

use nalgebra::{Cholesky, DMatrix, DVector, Dyn};
use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::lp_semi_inner::WeightedSequenceSpace;

const ZERO: Complex64 = Complex64::new(0.0, 0.0);

/// Matrices with a larger condition number are accepted but flagged.
pub const RELIABLE_CONDITION: f64 = 1e8;

#[derive(Debug, Clone)]
pub struct FiniteRkbs {
    matrix: DMatrix<Complex64>,
    eigvecs: DMatrix<Complex64>,
    eigvals: DVector<f64>,
    exponent: f64,
    chol: Cholesky<Complex64, Dyn>,
}

impl FiniteRkbs {
    pub fn new(matrix: DMatrix<Complex64>, exponent: f64) -> Result<Self> {
        let n = matrix.nrows();
        if n == 0 || matrix.ncols() != n {
            return Err(Error::invalid(format!(
                "need a nonempty square matrix, got {}x{}",
                n,
                matrix.ncols()
            )));
        }
        if !(exponent > 1.0) || !exponent.is_finite() {
            return Err(Error::invalid(format!("exponent must exceed 1, got {exponent}")));
        }
        let scale = matrix.norm();
        if (&matrix - matrix.adjoint()).norm() > 1e-12 * scale {
            return Err(Error::invalid("matrix is not Hermitian"));
        }
        let eig = matrix.clone().symmetric_eigen();
        if let Some(bad) = eig.eigenvalues.iter().find(|v| !(**v > 0.0)) {
            return Err(Error::invalid(format!(
                "matrix is not positive definite (eigenvalue {bad:e})"
            )));
        }
        let eigvecs = eig.eigenvectors;
        let eigvals = eig.eigenvalues;
        let d = DMatrix::from_diagonal(&eigvals.map(|v| Complex64::new(v, 0.0)));
        let rebuilt = &eigvecs * d * eigvecs.adjoint();
        let err = (&rebuilt - &matrix).norm() / scale;
        if err > 1e-10 {
            return Err(Error::Consistency(format!(
                "eigendecomposition reconstructs A with relative error {err:e}"
            )));
        }
        let chol = Cholesky::new(matrix.clone()).ok_or(Error::Singular {
            condition: f64::INFINITY,
        })?;
        Ok(FiniteRkbs {
            matrix,
            eigvecs,
            eigvals,
            exponent,
            chol,
        })
    }

    /// Random Hermitian positive definite matrix `B B* + δI` with condition
    /// number at most [`RELIABLE_CONDITION`].
    pub fn random_matrix(n: usize, rng: &mut impl Rng) -> DMatrix<Complex64> {
        loop {
            let b = DMatrix::from_fn(n, n, |_, _| {
                Complex64::new(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0))
            });
            let a = &b * b.adjoint() + DMatrix::identity(n, n) * Complex64::new(0.05, 0.0);
            let a = (&a + a.adjoint()) * Complex64::new(0.5, 0.0);
            let eig = a.clone().symmetric_eigen();
            if eig.eigenvalues.max() / eig.eigenvalues.min() <= RELIABLE_CONDITION {
                return a;
            }
        }
    }

    pub fn dim(&self) -> usize {
        self.matrix.nrows()
    }

    pub fn matrix(&self) -> &DMatrix<Complex64> {
        &self.matrix
    }

    pub fn eigvecs(&self) -> &DMatrix<Complex64> {
        &self.eigvecs
    }

    pub fn eigvals(&self) -> &DVector<f64> {
        &self.eigvals
    }

    pub fn exponent(&self) -> f64 {
        self.exponent
    }

    pub fn conjugate_exponent(&self) -> f64 {
        self.exponent / (self.exponent - 1.0)
    }

    pub fn condition(&self) -> f64 {
        self.eigvals.max() / self.eigvals.min()
    }

    pub fn reliable(&self) -> bool {
        self.condition() <= RELIABLE_CONDITION
    }

    fn conform(&self, v: &[Complex64]) -> Result<()> {
        if v.len() != self.dim() {
            return Err(Error::invalid(format!(
                "vector has {} entries, space has {}",
                v.len(),
                self.dim()
            )));
        }
        Ok(())
    }

    /// `D^{power} V* v`.
    fn spectral(&self, v: &[Complex64], power: f64) -> Vec<Complex64> {
        let t = self.eigvecs.adjoint() * DVector::from_column_slice(v);
        t.iter()
            .zip(self.eigvals.iter())
            .map(|(x, d)| x * d.powf(power))
            .collect()
    }

    /// `V D^{power} u`.
    fn reconstruct(&self, u: &[Complex64], power: f64) -> Vec<Complex64> {
        let scaled = DVector::from_iterator(
            u.len(),
            u.iter().zip(self.eigvals.iter()).map(|(x, d)| x * d.powf(power)),
        );
        (&self.eigvecs * scaled).iter().copied().collect()
    }

    fn lq(&self) -> WeightedSequenceSpace {
        WeightedSequenceSpace::unweighted(self.dim(), self.conjugate_exponent()).expect("valid exponent")
    }

    fn lp(&self) -> WeightedSequenceSpace {
        WeightedSequenceSpace::unweighted(self.dim(), self.exponent).expect("valid exponent")
    }

    pub fn b_norm(&self, f: &[Complex64]) -> Result<f64> {
        self.conform(f)?;
        let q = self.conjugate_exponent();
        self.lq().lp_norm(&self.spectral(f, -1.0 / q))
    }

    pub fn dual_norm(&self, g: &[Complex64]) -> Result<f64> {
        self.conform(g)?;
        self.lp().lp_norm(&self.spectral(g, -1.0 / self.exponent))
    }

    /// `g* A^{-1} f` by a Cholesky solve.
    pub fn dual_pairing(&self, f: &[Complex64], g: &[Complex64]) -> Result<Complex64> {
        self.conform(f)?;
        self.conform(g)?;
        let z = self.chol.solve(&DVector::from_column_slice(f));
        Ok(DVector::from_column_slice(g).dotc(&z))
    }

    /// Normalized duality map `B → B'`.
    pub fn duality_map(&self, f: &[Complex64]) -> Result<Vec<Complex64>> {
        self.conform(f)?;
        let q = self.conjugate_exponent();
        let u = self.spectral(f, -1.0 / q);
        let w = self.lq().dual_element(&u)?;
        Ok(self.reconstruct(&w, 1.0 / self.exponent))
    }

    /// Inverse of [`Self::duality_map`], `B' → B`.
    pub fn inverse_duality_map(&self, g: &[Complex64]) -> Result<Vec<Complex64>> {
        self.conform(g)?;
        let w = self.spectral(g, -1.0 / self.exponent);
        let u = self.lp().dual_element(&w)?;
        Ok(self.reconstruct(&u, 1.0 / self.conjugate_exponent()))
    }

    /// Largest `|⟨f, A e_k⟩ − f_k|` and `|⟨A e_j, g⟩ − conj(g_j)|` over
    /// `trials` seeded random `f`, `g` and all indices.
    pub fn reproduction_check(&self, trials: usize, seed: u64) -> Result<f64> {
        let n = self.dim();
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut worst: f64 = 0.0;
        for _ in 0..trials {
            let f: Vec<Complex64> = (0..n)
                .map(|_| Complex64::new(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0)))
                .collect();
            let g: Vec<Complex64> = (0..n)
                .map(|_| Complex64::new(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0)))
                .collect();
            for k in 0..n {
                let column: Vec<Complex64> = self.matrix.column(k).iter().copied().collect();
                worst = worst.max((self.dual_pairing(&f, &column)? - f[k]).norm());
                worst = worst.max((self.dual_pairing(&column, &g)? - g[k].conj()).norm());
            }
        }
        Ok(worst)
    }

    /// Minimal-norm `s` with `s_j = y_j` for `j ∈ indices`.
    ///
    /// The dual element of the minimizer is `Σ_{k∈J} c_k A e_k`. With
    /// `M* = D^{1/q} V* E_J`, `c` minimizes the convex function
    /// `Ψ(c) = ‖M* c‖_p^p / p − Re(c* y)`, solved by damped Newton; then
    /// `s = V D^{1/q} (w |w|^{p−2})` with `w = M* c`.
    pub fn min_norm_interpolate(&self, indices: &[usize], values: &[Complex64]) -> Result<Vec<Complex64>> {
        let n = self.dim();
        let m = indices.len();
        if m == 0 || m != values.len() {
            return Err(Error::invalid("need one value per index and at least one index"));
        }
        let mut seen = vec![false; n];
        for &j in indices {
            if j >= n || std::mem::replace(&mut seen[j], true) {
                return Err(Error::invalid(format!("index {j} out of range or repeated")));
            }
        }
        let p = self.exponent;
        let q = self.conjugate_exponent();
        // R = M*  (n × m)
        let r = DMatrix::from_fn(n, m, |i, k| {
            self.eigvecs[(indices[k], i)].conj() * self.eigvals[i].powf(1.0 / q)
        });
        let y = DVector::from_column_slice(values);
        let ajj = DMatrix::from_fn(m, m, |a, b| self.matrix[(indices[a], indices[b])]);
        // the p = 2 solution starts the iteration
        let mut c = Cholesky::new(ajj)
            .ok_or(Error::Singular {
                condition: f64::INFINITY,
            })?
            .solve(&y);
        let psi = |c: &DVector<Complex64>| -> f64 {
            let w = &r * c;
            w.iter().map(|v| v.norm().powf(p)).sum::<f64>() / p - c.dotc(&y).re
        };
        let scale = y.norm().max(f64::MIN_POSITIVE);
        for _ in 0..200 {
            let w = &r * &c;
            let u: DVector<Complex64> = w.map(|v| signed_power(v, p - 1.0));
            let grad = r.adjoint() * &u - &y;
            if grad.norm() <= 1e-14 * scale {
                break;
            }
            let step = newton_step(&r, &w, &grad, p);
            let f0 = psi(&c);
            let slope: f64 = grad
                .iter()
                .zip(step.iter())
                .map(|(g, s)| g.re * s.re + g.im * s.im)
                .sum();
            let mut t = 1.0;
            loop {
                let trial = &c + &step * Complex64::new(t, 0.0);
                let ft = psi(&trial);
                if ft <= f0 + 1e-4 * t * slope || t < 1e-12 {
                    c = trial;
                    break;
                }
                t *= 0.5;
            }
        }
        let w = &r * &c;
        let u: Vec<Complex64> = w.iter().map(|v| signed_power(*v, p - 1.0)).collect();
        let mut s = self.reconstruct(&u, 1.0 / q);
        for (&j, v) in indices.iter().zip(values) {
            s[j] = *v;
        }
        Ok(s)
    }
}

/// `v |v|^{e−1}`.
fn signed_power(v: Complex64, e: f64) -> Complex64 {
    let m = v.norm();
    if m == 0.0 {
        ZERO
    } else {
        v * m.powf(e - 1.0)
    }
}

/// Newton direction of `Ψ` in the real coordinates of `c`, returned in
/// complex form; falls back to the negative gradient if the Hessian is not
/// numerically positive definite.
fn newton_step(
    r: &DMatrix<Complex64>,
    w: &DVector<Complex64>,
    grad: &DVector<Complex64>,
    p: f64,
) -> DVector<Complex64> {
    let (n, m) = r.shape();
    let wmax = w.iter().fold(0.0f64, |a, v| a.max(v.norm()));
    let floor = 1e-12 * wmax.max(f64::MIN_POSITIVE);
    let mut h = DMatrix::<f64>::zeros(2 * m, 2 * m);
    for i in 0..n {
        // ∂(Re w_i, Im w_i)/∂(Re c, Im c)
        let mut jac = DMatrix::<f64>::zeros(2, 2 * m);
        for k in 0..m {
            let z = r[(i, k)];
            jac[(0, k)] = z.re;
            jac[(0, m + k)] = -z.im;
            jac[(1, k)] = z.im;
            jac[(1, m + k)] = z.re;
        }
        let mag = w[i].norm().max(floor);
        let dir = if w[i].norm() > 0.0 {
            w[i] / w[i].norm()
        } else {
            Complex64::new(1.0, 0.0)
        };
        let base = mag.powf(p - 2.0);
        let outer = nalgebra::Matrix2::new(dir.re * dir.re, dir.re * dir.im, dir.im * dir.re, dir.im * dir.im);
        let local = (nalgebra::Matrix2::identity() + outer * (p - 2.0)) * base;
        let local = DMatrix::from_column_slice(2, 2, local.as_slice());
        h += jac.transpose() * local * &jac;
    }
    let g = DVector::from_iterator(2 * m, grad.iter().map(|v| v.re).chain(grad.iter().map(|v| v.im)));
    let ridge = 1e-14
        * h.diagonal()
            .iter()
            .fold(0.0f64, |a, v| a.max(*v))
            .max(f64::MIN_POSITIVE);
    let h = h + DMatrix::identity(2 * m, 2 * m) * ridge;
    let d = match Cholesky::new(h) {
        Some(ch) => -ch.solve(&g),
        None => -g,
    };
    DVector::from_iterator(m, (0..m).map(|k| Complex64::new(d[k], d[m + k])))
}

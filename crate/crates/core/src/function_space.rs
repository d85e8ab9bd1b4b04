//! Even-`p` models in the Banach space `B^p_Φ` of a Matérn kernel.
//!
//! A coefficient vector `c ∈ C^N` over centers `x_1..x_N` defines
//!
//! ```text
//! s_c(x) = Σ_{k_1..k_{p−1}} c_{k_1} conj(c_{k_2}) c_{k_3} ⋯ c_{k_{p−1}}
//!          Φ_{p−1}(x − x_{k_1} + x_{k_2} − ⋯ − x_{k_{p−1}})
//! ```
//!
//! where `Φ_{p−1}` is the canonical kernel of `Φ̂^{p−1}`. This is the finite
//! expansion of the spectral integral `(2π)^{-d/2} ∫ Φ̂^{p−1} e^{ix·ω} S |S|^{p−2}`
//! with `S(ω) = Σ c_l e^{−ix_l·ω}`. The norm satisfies `‖s_c‖^q = c* φ(c)`
//! with `φ_j(c) = s_c(x_j)`.

use std::sync::Arc;

use nalgebra::DMatrix;
use num_complex::Complex64;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::kernels::{MultipointKernel, SpectralKernel};

/// Default cap on the number of stored multipoint kernel values (`N^p`).
pub const DEFAULT_TENSOR_CAP: usize = 10_000_000;

/// Smallest accepted `c* φ(c) / ((Σ|c_k|)^p Φ_{p−1}(0))`.
pub const RESOLVABLE_NORM_RATIO: f64 = 1e-10;

/// Coordinates closer than this (in every component) count as the same point.
pub const DISTINCT_TOLERANCE: f64 = 1e-12;

const ZERO: Complex64 = Complex64::new(0.0, 0.0);
const ONE: Complex64 = Complex64::new(1.0, 0.0);

/// Pairwise distinct points with one value each.
#[derive(Debug, Clone, PartialEq)]
pub struct TrainingSet {
    points: Vec<Vec<f64>>,
    values: Vec<Complex64>,
}

impl TrainingSet {
    pub fn new(points: Vec<Vec<f64>>, values: Vec<Complex64>) -> Result<Self> {
        if points.is_empty() {
            return Err(Error::Data("training set is empty".into()));
        }
        if points.len() != values.len() {
            return Err(Error::Data(format!(
                "{} points but {} values",
                points.len(),
                values.len()
            )));
        }
        let dim = points[0].len();
        if dim == 0 {
            return Err(Error::Data("points need at least one coordinate".into()));
        }
        for (i, x) in points.iter().enumerate() {
            if x.len() != dim {
                return Err(Error::Data(format!(
                    "point {i} has {} coordinates, expected {dim}",
                    x.len()
                )));
            }
            if x.iter().any(|v| !v.is_finite()) || !values[i].re.is_finite() || !values[i].im.is_finite() {
                return Err(Error::Data(format!("row {i} contains a non-finite number")));
            }
        }
        check_distinct(&points)?;
        Ok(TrainingSet { points, values })
    }

    pub fn from_real(points: Vec<Vec<f64>>, values: &[f64]) -> Result<Self> {
        Self::new(points, values.iter().map(|&v| Complex64::new(v, 0.0)).collect())
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    pub fn dim(&self) -> usize {
        self.points[0].len()
    }

    pub fn points(&self) -> &[Vec<f64>] {
        &self.points
    }

    pub fn values(&self) -> &[Complex64] {
        &self.values
    }

    pub fn is_real(&self) -> bool {
        self.values.iter().all(|v| v.im == 0.0)
    }
}

fn check_distinct(points: &[Vec<f64>]) -> Result<()> {
    for i in 0..points.len() {
        for j in 0..i {
            let gap = points[i]
                .iter()
                .zip(&points[j])
                .fold(0.0f64, |m, (a, b)| m.max((a - b).abs()));
            if gap <= DISTINCT_TOLERANCE {
                return Err(Error::Data(format!(
                    "data points must be pairwise distinct: rows {j} and {i} coincide within {DISTINCT_TOLERANCE:e}"
                )));
            }
        }
    }
    Ok(())
}

/// Expansion coefficients; in real mode every imaginary part is exactly zero.
#[derive(Debug, Clone, PartialEq)]
pub struct CoefficientVector {
    entries: Vec<Complex64>,
    real_mode: bool,
}

impl CoefficientVector {
    pub fn new(entries: Vec<Complex64>, real_mode: bool) -> Result<Self> {
        if real_mode && entries.iter().any(|c| c.im != 0.0) {
            return Err(Error::invalid("real-mode coefficients must have zero imaginary parts"));
        }
        if entries.iter().any(|c| !c.re.is_finite() || !c.im.is_finite()) {
            return Err(Error::invalid("coefficients must be finite"));
        }
        Ok(CoefficientVector { entries, real_mode })
    }

    pub fn real(values: &[f64]) -> Self {
        CoefficientVector {
            entries: values.iter().map(|&v| Complex64::new(v, 0.0)).collect(),
            real_mode: true,
        }
    }

    pub fn zeros(len: usize, real_mode: bool) -> Self {
        CoefficientVector {
            entries: vec![ZERO; len],
            real_mode,
        }
    }

    pub fn entries(&self) -> &[Complex64] {
        &self.entries
    }

    pub fn real_mode(&self) -> bool {
        self.real_mode
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }
}

/// `Ker_{θ,(p−1)n}(x_j, x_{k_1}, …, x_{k_{p−1}})` for all index tuples,
/// row-major with `j` slowest. For `p = 2` this is the Gram matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct GramTensor {
    len: usize,
    order: usize,
    values: Vec<f64>,
}

impl GramTensor {
    /// Number of centers `N`.
    pub fn len(&self) -> usize {
        self.len
    }

    pub fn is_empty(&self) -> bool {
        self.len == 0
    }

    /// Number of translate slots, `p − 1`.
    pub fn order(&self) -> usize {
        self.order
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn row(&self, j: usize) -> &[f64] {
        let stride = self.len.pow(self.order as u32);
        &self.values[j * stride..(j + 1) * stride]
    }

    /// Entry at `(j, k_1, …, k_{p−1})`.
    pub fn get(&self, j: usize, ks: &[usize]) -> f64 {
        assert_eq!(ks.len(), self.order, "index arity");
        let r = ks.iter().fold(0, |acc, &k| acc * self.len + k);
        self.row(j)[r]
    }
}

/// How multipoint kernel values are obtained.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum GramStorage {
    /// Precompute all `N^p` values; fails if that exceeds the cap.
    Tensor { cap: usize },
    /// Recompute each row on demand.
    Streaming,
}

impl Default for GramStorage {
    fn default() -> Self {
        GramStorage::Tensor {
            cap: DEFAULT_TENSOR_CAP,
        }
    }
}

/// Kernel, exponent and centers: everything that maps coefficients to a
/// function, independent of any particular coefficient vector.
#[derive(Debug, Clone)]
pub struct KernelExpansion {
    p: usize,
    kernel: SpectralKernel,
    multipoint: MultipointKernel,
    centers: Vec<Vec<f64>>,
    gram: Option<Arc<GramTensor>>,
}

/// `∂φ_j/∂c_k` and `∂φ_j/∂conj(c_k)`.
#[derive(Debug, Clone, PartialEq)]
pub struct Jacobians {
    pub holomorphic: DMatrix<Complex64>,
    pub antiholomorphic: DMatrix<Complex64>,
}

impl KernelExpansion {
    pub fn new(p: usize, kernel: SpectralKernel, centers: Vec<Vec<f64>>, storage: GramStorage) -> Result<Self> {
        if p < 2 || !p.is_multiple_of(2) {
            return Err(Error::Unsupported(format!(
                "closed-form expansions need an even exponent p >= 2, got {p}"
            )));
        }
        kernel.check_exponent(p as f64)?;
        if centers.is_empty() {
            return Err(Error::invalid("need at least one center"));
        }
        if let Some(x) = centers.iter().find(|x| x.len() != kernel.dim()) {
            return Err(Error::invalid(format!(
                "center has dimension {}, kernel expects {}",
                x.len(),
                kernel.dim()
            )));
        }
        let multipoint = MultipointKernel::new(kernel, p)?;
        let mut expansion = KernelExpansion {
            p,
            kernel,
            multipoint,
            centers,
            gram: None,
        };
        if let GramStorage::Tensor { cap } = storage {
            expansion.gram = Some(Arc::new(expansion.build_gram(cap)?));
        }
        Ok(expansion)
    }

    pub fn p(&self) -> usize {
        self.p
    }

    pub fn q(&self) -> f64 {
        self.p as f64 / (self.p as f64 - 1.0)
    }

    pub fn kernel(&self) -> &SpectralKernel {
        &self.kernel
    }

    pub fn multipoint(&self) -> &MultipointKernel {
        &self.multipoint
    }

    pub fn centers(&self) -> &[Vec<f64>] {
        &self.centers
    }

    pub fn len(&self) -> usize {
        self.centers.len()
    }

    pub fn is_empty(&self) -> bool {
        self.centers.is_empty()
    }

    pub fn gram(&self) -> Option<&GramTensor> {
        self.gram.as_deref()
    }

    fn order(&self) -> usize {
        self.p - 1
    }

    fn row_len(&self) -> usize {
        self.len().pow(self.order() as u32)
    }

    /// Builds the full tensor, refusing if `N^p` exceeds `cap`.
    pub fn build_gram(&self, cap: usize) -> Result<GramTensor> {
        let n = self.len();
        let total = (n as u128).checked_pow(self.p as u32).unwrap_or(u128::MAX);
        if total > cap as u128 {
            return Err(Error::ResourceLimit(format!(
                "multipoint tensor for N = {n} centers and p = {} needs N^p = {total} entries, cap is {cap}; \
                 use streaming evaluation or fewer centers",
                self.p
            )));
        }
        let stride = self.row_len();
        let mut values = vec![0.0; n * stride];
        values
            .par_chunks_mut(stride)
            .zip(self.centers.par_iter())
            .try_for_each(|(row, x)| self.fill_row(x, row))?;
        Ok(GramTensor {
            len: n,
            order: self.order(),
            values,
        })
    }

    /// Kernel values `Ker(x, x_{k_1}, …)` for all tuples, first slot slowest.
    fn fill_row(&self, x: &[f64], row: &mut [f64]) -> Result<()> {
        let n = self.len();
        let order = self.order();
        let effective = self.multipoint.effective();
        let mut ks = vec![0usize; order];
        let mut z = vec![0.0; x.len()];
        for entry in row.iter_mut() {
            z.copy_from_slice(x);
            for (slot, &k) in ks.iter().enumerate() {
                let sign = if slot % 2 == 0 { -1.0 } else { 1.0 };
                for (zi, yi) in z.iter_mut().zip(&self.centers[k]) {
                    *zi += sign * yi;
                }
            }
            *entry = effective.evaluate_radius(crate::kernels::norm(&z))?;
            // advance the last slot fastest
            for slot in (0..order).rev() {
                ks[slot] += 1;
                if ks[slot] < n {
                    break;
                }
                ks[slot] = 0;
            }
        }
        Ok(())
    }

    fn row_at(&self, x: &[f64]) -> Result<Vec<f64>> {
        let mut row = vec![0.0; self.row_len()];
        self.fill_row(x, &mut row)?;
        Ok(row)
    }

    fn with_center_row<T>(&self, j: usize, f: impl FnOnce(&[f64]) -> T) -> Result<T> {
        match &self.gram {
            Some(g) => Ok(f(g.row(j))),
            None => Ok(f(&self.row_at(&self.centers[j])?)),
        }
    }

    fn conform(&self, c: &[Complex64]) -> Result<()> {
        if c.len() != self.len() {
            return Err(Error::invalid(format!(
                "{} coefficients for {} centers",
                c.len(),
                self.len()
            )));
        }
        Ok(())
    }

    fn check_point(&self, x: &[f64]) -> Result<()> {
        if x.len() != self.kernel.dim() {
            return Err(Error::invalid(format!(
                "point has dimension {}, model expects {}",
                x.len(),
                self.kernel.dim()
            )));
        }
        Ok(())
    }

    /// `s_c(x)`.
    pub fn evaluate(&self, c: &[Complex64], x: &[f64]) -> Result<Complex64> {
        self.conform(c)?;
        self.check_point(x)?;
        let w = slot_weights(c, 0..self.order());
        Ok(contract(&self.row_at(x)?, &w))
    }

    /// `φ_j(c) = s_c(x_j)` for every center.
    pub fn phi(&self, c: &[Complex64]) -> Result<Vec<Complex64>> {
        self.conform(c)?;
        let w = slot_weights(c, 0..self.order());
        (0..self.len())
            .map(|j| self.with_center_row(j, |row| contract(row, &w)))
            .collect()
    }

    /// Coefficients of `φ_j(c + t d) − φ_j(c) = Σ_{k=1}^{p−1} t^k ψ_{jk}` for
    /// real `t`, returned as `ψ[j][k − 1]`. Increments evaluated from these
    /// carry round-off relative to their own size rather than to `|φ|`.
    pub fn phi_increments(&self, c: &[Complex64], d: &[Complex64]) -> Result<Vec<Vec<Complex64>>> {
        self.conform(c)?;
        self.conform(d)?;
        let order = self.order();
        let w = slot_weight_polynomials(c, d, order);
        (0..self.len())
            .map(|j| self.with_center_row(j, |row| (1..=order).map(|k| contract(row, &w[k])).collect()))
            .collect()
    }

    /// `c* φ(c)` as a real number, after checking that its imaginary part
    /// and any negative real part are round-off.
    ///
    /// `φ` may itself be a heavily cancelled sum, so round-off is measured
    /// against `(Σ|c_k|)^p Φ_{p−1}(0)`, which bounds every summed term
    /// (`Φ_{p−1}` peaks at the origin).
    pub fn norm_power_from_phi(&self, c: &[Complex64], phi: &[Complex64]) -> Result<f64> {
        let v: Complex64 = c.iter().zip(phi).map(|(a, b)| a.conj() * b).sum();
        let peak = self.multipoint.effective().evaluate(&vec![0.0; self.kernel.dim()])?;
        let mass: f64 = c.iter().map(|a| a.norm()).sum();
        let scale = mass.powi(self.p as i32) * peak;
        let slack = 1e-12 * scale;
        if v.im.abs() > slack.max(1e-300) {
            return Err(Error::Consistency(format!(
                "c*φ(c) = {v} is not real (relative imaginary part {:.3e})",
                v.im.abs() / scale
            )));
        }
        if v.re < -slack {
            return Err(Error::Consistency(format!("c*φ(c) = {} is negative", v.re)));
        }
        // the ratio is scale invariant; below this the value is mostly round-off
        if scale > 0.0 && v.re < RESOLVABLE_NORM_RATIO * scale {
            return Err(Error::Consistency(format!(
                "c*φ(c) = {:.3e} is below round-off resolution ({:.3e} of its term bound); \
                 the kernel is too ill-conditioned for these coefficients",
                v.re,
                v.re / scale
            )));
        }
        Ok(v.re.max(0.0))
    }

    /// `‖s_c‖^q = c* φ(c)`.
    pub fn norm_power(&self, c: &[Complex64]) -> Result<f64> {
        let phi = self.phi(c)?;
        self.norm_power_from_phi(c, &phi)
    }

    /// `‖s_c‖ = (c* φ(c))^{1/q}`.
    pub fn rkbs_norm(&self, c: &[Complex64]) -> Result<f64> {
        Ok(self.norm_power(c)?.powf(1.0 / self.q()))
    }

    /// Wirtinger Jacobians of `φ`. With the multipoint symmetry under
    /// permutations of same-sign slots,
    /// `∂φ_j/∂c_k = (p/2) Σ Ker(x_j, x_k, x_{k_2}, …) conj(c_{k_2}) c_{k_3} ⋯` and
    /// `∂φ_j/∂conj(c_k) = (p/2 − 1) Σ Ker(x_j, x_{k_1}, x_k, x_{k_3}, …) c_{k_1} c_{k_3} ⋯`.
    pub fn jacobians(&self, c: &[Complex64]) -> Result<Jacobians> {
        self.conform(c)?;
        let n = self.len();
        let order = self.order();
        let half = self.p as f64 / 2.0;
        let wa = slot_weights(c, 1..order);
        let wb = if order >= 3 {
            slot_weights(c, 2..order)
        } else {
            Vec::new()
        };
        let inner = n.pow(order as u32 - 1);
        let mut holo = DMatrix::from_element(n, n, ZERO);
        let mut anti = DMatrix::from_element(n, n, ZERO);
        for j in 0..n {
            self.with_center_row(j, |row| {
                for k in 0..n {
                    holo[(j, k)] = contract(&row[k * inner..(k + 1) * inner], &wa) * half;
                }
                if order >= 3 {
                    let tail = inner / n;
                    for k in 0..n {
                        let mut acc = ZERO;
                        for (k1, c1) in c.iter().enumerate() {
                            let start = k1 * inner + k * tail;
                            acc += c1 * contract(&row[start..start + tail], &wb);
                        }
                        anti[(j, k)] = acc * (half - 1.0);
                    }
                }
            })?;
        }
        Ok(Jacobians {
            holomorphic: holo,
            antiholomorphic: anti,
        })
    }
}

/// Products over slots `slots` of `c` (even slots) or `conj(c)` (odd slots),
/// flattened with the first slot slowest.
fn slot_weights(c: &[Complex64], slots: std::ops::Range<usize>) -> Vec<Complex64> {
    let mut w = vec![ONE];
    for slot in slots {
        let mut next = Vec::with_capacity(w.len() * c.len());
        for a in &w {
            for ck in c {
                next.push(a * if slot % 2 == 0 { *ck } else { ck.conj() });
            }
        }
        w = next;
    }
    w
}

/// Like [`slot_weights`] for `c + t d`, split by powers of `t`: entry `[k][r]`
/// is the `t^k` coefficient of weight `r`.
#[allow(clippy::needless_range_loop)]
fn slot_weight_polynomials(c: &[Complex64], d: &[Complex64], order: usize) -> Vec<Vec<Complex64>> {
    let mut w: Vec<Vec<Complex64>> = (0..=order).map(|k| vec![if k == 0 { ONE } else { ZERO }]).collect();
    for slot in 0..order {
        let pick = |v: Complex64| if slot % 2 == 0 { v } else { v.conj() };
        let len = w[0].len() * c.len();
        let mut next: Vec<Vec<Complex64>> = (0..=order).map(|_| Vec::with_capacity(len)).collect();
        for r in 0..w[0].len() {
            for (ck, dk) in c.iter().zip(d) {
                let (a, b) = (pick(*ck), pick(*dk));
                for k in 0..=order {
                    let lower = if k > 0 { w[k - 1][r] * b } else { ZERO };
                    next[k].push(w[k][r] * a + lower);
                }
            }
        }
        w = next;
    }
    w
}

fn contract(row: &[f64], w: &[Complex64]) -> Complex64 {
    row.iter().zip(w).map(|(t, wk)| wk * *t).sum()
}

/// The dual element `s* = Σ b_k Φ(· − x_k)` with `b = c / ‖s‖^{q−2}`.
#[derive(Debug, Clone, PartialEq)]
pub struct DualView {
    pub coefficients: Vec<Complex64>,
    kernel: SpectralKernel,
    centers: Vec<Vec<f64>>,
}

impl DualView {
    pub fn evaluate(&self, x: &[f64]) -> Result<Complex64> {
        let mut acc = ZERO;
        for (b, xk) in self.coefficients.iter().zip(&self.centers) {
            let z: Vec<f64> = x.iter().zip(xk).map(|(a, b)| a - b).collect();
            acc += b * self.kernel.evaluate(&z)?;
        }
        Ok(acc)
    }
}

/// A trained model: expansion plus coefficients.
#[derive(Debug, Clone)]
pub struct RkbsModel {
    expansion: KernelExpansion,
    coefficients: CoefficientVector,
    converged: bool,
}

/// Serialized shape of an [`RkbsModel`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ModelDocument {
    pub p: usize,
    pub theta: f64,
    pub n: f64,
    pub d: usize,
    pub centers: Vec<Vec<f64>>,
    pub coefficients_re: Vec<f64>,
    pub coefficients_im: Vec<f64>,
    pub real_mode: bool,
    pub norm: f64,
    #[serde(default = "default_true")]
    pub converged: bool,
}

fn default_true() -> bool {
    true
}

impl RkbsModel {
    pub fn new(expansion: KernelExpansion, coefficients: CoefficientVector) -> Result<Self> {
        expansion.conform(coefficients.entries())?;
        Ok(RkbsModel {
            expansion,
            coefficients,
            converged: true,
        })
    }

    /// Convenience constructor without a precomputed tensor.
    pub fn from_parts(
        p: usize,
        kernel: SpectralKernel,
        centers: Vec<Vec<f64>>,
        coefficients: CoefficientVector,
    ) -> Result<Self> {
        Self::new(
            KernelExpansion::new(p, kernel, centers, GramStorage::Streaming)?,
            coefficients,
        )
    }

    pub fn with_converged(mut self, converged: bool) -> Self {
        self.converged = converged;
        self
    }

    pub fn expansion(&self) -> &KernelExpansion {
        &self.expansion
    }

    pub fn p(&self) -> usize {
        self.expansion.p
    }

    pub fn kernel(&self) -> &SpectralKernel {
        &self.expansion.kernel
    }

    pub fn centers(&self) -> &[Vec<f64>] {
        &self.expansion.centers
    }

    pub fn coefficients(&self) -> &CoefficientVector {
        &self.coefficients
    }

    pub fn converged(&self) -> bool {
        self.converged
    }

    pub fn evaluate(&self, x: &[f64]) -> Result<Complex64> {
        self.expansion.evaluate(self.coefficients.entries(), x)
    }

    pub fn phi(&self) -> Result<Vec<Complex64>> {
        self.expansion.phi(self.coefficients.entries())
    }

    pub fn rkbs_norm(&self) -> Result<f64> {
        self.expansion.rkbs_norm(self.coefficients.entries())
    }

    pub fn dual_view(&self) -> Result<DualView> {
        let norm = self.rkbs_norm()?;
        let c = self.coefficients.entries();
        let coefficients = if norm == 0.0 {
            vec![ZERO; c.len()]
        } else {
            let scale = norm.powf(self.expansion.q() - 2.0);
            c.iter().map(|v| v / scale).collect()
        };
        Ok(DualView {
            coefficients,
            kernel: self.expansion.kernel,
            centers: self.expansion.centers.clone(),
        })
    }

    pub fn to_document(&self) -> Result<ModelDocument> {
        let k = self.kernel();
        Ok(ModelDocument {
            p: self.p(),
            theta: k.theta(),
            n: k.degree(),
            d: k.dim(),
            centers: self.centers().to_vec(),
            coefficients_re: self.coefficients.entries().iter().map(|c| c.re).collect(),
            coefficients_im: self.coefficients.entries().iter().map(|c| c.im).collect(),
            real_mode: self.coefficients.real_mode(),
            norm: self.rkbs_norm()?,
            converged: self.converged,
        })
    }

    pub fn from_document(doc: &ModelDocument, storage: GramStorage) -> Result<Self> {
        let kernel = SpectralKernel::new(doc.theta, doc.n, doc.d)?;
        if doc.coefficients_re.len() != doc.centers.len() || doc.coefficients_im.len() != doc.centers.len() {
            return Err(Error::invalid("model document: coefficient and center counts differ"));
        }
        let entries = doc
            .coefficients_re
            .iter()
            .zip(&doc.coefficients_im)
            .map(|(&re, &im)| Complex64::new(re, im))
            .collect();
        let coefficients = CoefficientVector::new(entries, doc.real_mode)?;
        let expansion = KernelExpansion::new(doc.p, kernel, doc.centers.clone(), storage)?;
        Ok(RkbsModel::new(expansion, coefficients)?.with_converged(doc.converged))
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(&self.to_document()?)?)
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let doc: ModelDocument = serde_json::from_str(text)?;
        Self::from_document(&doc, GramStorage::Streaming)
    }
}

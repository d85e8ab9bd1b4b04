//! Semi-inner-products and normalized duality maps on weighted sequence
//! spaces, the discrete surrogate for `L_p(R^d; μ)`.
//!
//! For `f ≠ 0`:
//!
//! ```text
//! ‖f‖_p    = (Σ w_i |f_i|^p)^{1/p}
//! [g, f]   = ‖f‖^{2−p} Σ w_i g_i conj(f_i) |f_i|^{p−2}
//! f*       = f |f|^{p−2} / ‖f‖^{p−2}            (lives in the exponent-q space)
//! ```
//!
//! `[g, 0]` and `0*` are defined as zero.

use num_complex::Complex64;

use crate::error::{Error, Result};

/// Quadrature nodes with positive weights and an exponent `p > 1`.
#[derive(Debug, Clone, PartialEq)]
pub struct WeightedSequenceSpace {
    nodes: Vec<Vec<f64>>,
    weights: Vec<f64>,
    exponent: f64,
}

/// One complex value per node of a [`WeightedSequenceSpace`].
pub type SpectralVector = Vec<Complex64>;

/// Outcome of an orthogonality test `[g, f] = 0`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Orthogonality {
    pub residual: f64,
    pub orthogonal: bool,
    /// Smallest `‖f + λg‖ − ‖f‖` over the sampled `λ`; nonnegative (up to
    /// round-off) whenever `orthogonal` holds.
    pub min_norm_gain: f64,
}

impl WeightedSequenceSpace {
    pub fn new(nodes: Vec<Vec<f64>>, weights: Vec<f64>, exponent: f64) -> Result<Self> {
        if weights.is_empty() || nodes.len() != weights.len() {
            return Err(Error::invalid(format!(
                "need at least one node and one weight per node (nodes={}, weights={})",
                nodes.len(),
                weights.len()
            )));
        }
        if let Some(w) = weights.iter().find(|w| !(**w > 0.0) || !w.is_finite()) {
            return Err(Error::invalid(format!("weights must be positive and finite, got {w}")));
        }
        if !(exponent > 1.0) || !exponent.is_finite() {
            return Err(Error::invalid(format!("exponent must exceed 1, got {exponent}")));
        }
        Ok(WeightedSequenceSpace {
            nodes,
            weights,
            exponent,
        })
    }

    /// Unit weights on `len` abstract nodes (`ℓ_p` of dimension `len`).
    pub fn unweighted(len: usize, exponent: f64) -> Result<Self> {
        Self::new(vec![Vec::new(); len], vec![1.0; len], exponent)
    }

    pub fn len(&self) -> usize {
        self.weights.len()
    }

    pub fn is_empty(&self) -> bool {
        self.weights.is_empty()
    }

    pub fn nodes(&self) -> &[Vec<f64>] {
        &self.nodes
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    pub fn exponent(&self) -> f64 {
        self.exponent
    }

    pub fn conjugate_exponent(&self) -> f64 {
        self.exponent / (self.exponent - 1.0)
    }

    /// Same nodes and weights with the conjugate exponent.
    pub fn conjugate(&self) -> Self {
        WeightedSequenceSpace {
            nodes: self.nodes.clone(),
            weights: self.weights.clone(),
            exponent: self.conjugate_exponent(),
        }
    }

    fn conform(&self, f: &[Complex64]) -> Result<()> {
        if f.len() != self.len() {
            return Err(Error::invalid(format!(
                "vector has {} entries, space has {} nodes",
                f.len(),
                self.len()
            )));
        }
        Ok(())
    }

    pub fn lp_norm(&self, f: &[Complex64]) -> Result<f64> {
        self.conform(f)?;
        Ok(self.norm_unchecked(f))
    }

    fn norm_unchecked(&self, f: &[Complex64]) -> f64 {
        let p = self.exponent;
        // scale by the largest modulus so |f|^p neither overflows nor underflows
        let scale = f.iter().map(|v| v.norm()).fold(0.0, f64::max);
        if scale == 0.0 {
            return 0.0;
        }
        let sum: f64 = self
            .weights
            .iter()
            .zip(f)
            .map(|(w, v)| w * (v.norm() / scale).powf(p))
            .sum();
        scale * sum.powf(1.0 / p)
    }

    pub fn semi_inner(&self, g: &[Complex64], f: &[Complex64]) -> Result<Complex64> {
        self.conform(g)?;
        self.conform(f)?;
        let p = self.exponent;
        let nf = self.norm_unchecked(f);
        if nf == 0.0 {
            return Ok(Complex64::new(0.0, 0.0));
        }
        // ‖f‖^{2−p} Σ w g conj(f) |f|^{p−2}, with f normalized to unit norm
        let mut acc = Complex64::new(0.0, 0.0);
        for ((w, gi), fi) in self.weights.iter().zip(g).zip(f) {
            let u = fi / nf;
            let m = u.norm();
            if m > 0.0 {
                acc += gi * u.conj() * (w * m.powf(p - 2.0));
            }
        }
        Ok(acc * nf)
    }

    /// Normalized duality map `f ↦ f*` into the conjugate space.
    pub fn dual_element(&self, f: &[Complex64]) -> Result<SpectralVector> {
        self.conform(f)?;
        let p = self.exponent;
        let nf = self.norm_unchecked(f);
        if nf == 0.0 {
            return Ok(vec![Complex64::new(0.0, 0.0); f.len()]);
        }
        Ok(f.iter()
            .map(|fi| {
                let u = fi / nf;
                let m = u.norm();
                if m == 0.0 {
                    Complex64::new(0.0, 0.0)
                } else {
                    u * m.powf(p - 2.0) * nf
                }
            })
            .collect())
    }

    /// `Σ w_i f_i conj(g_i)`: the pairing between this space and its conjugate.
    pub fn dual_pairing(&self, f: &[Complex64], g: &[Complex64]) -> Result<Complex64> {
        self.conform(f)?;
        self.conform(g)?;
        Ok(self
            .weights
            .iter()
            .zip(f)
            .zip(g)
            .map(|((w, fi), gi)| fi * gi.conj() * *w)
            .sum())
    }

    /// Tests whether `f` is normal to `g` (`[g, f] = 0` within `threshold`
    /// relative to `‖f‖‖g‖`) and samples `‖f + λg‖ ≥ ‖f‖` over a fixed set of
    /// complex `λ`.
    pub fn is_orthogonal(&self, f: &[Complex64], g: &[Complex64], threshold: f64) -> Result<Orthogonality> {
        let residual = self.semi_inner(g, f)?.norm();
        let scale = self.norm_unchecked(f) * self.norm_unchecked(g);
        let orthogonal = residual <= threshold * scale.max(f64::MIN_POSITIVE);
        let nf = self.norm_unchecked(f);
        let mut min_gain = f64::INFINITY;
        for &mag in &[1e-3, 1e-2, 0.1, 0.5, 1.0, 3.0] {
            for k in 0..8 {
                let lambda = Complex64::from_polar(mag, k as f64 * std::f64::consts::FRAC_PI_4);
                let shifted: Vec<Complex64> = f.iter().zip(g).map(|(a, b)| a + lambda * b).collect();
                min_gain = min_gain.min(self.norm_unchecked(&shifted) - nf);
            }
        }
        Ok(Orthogonality {
            residual,
            orthogonal,
            min_norm_gain: min_gain,
        })
    }
}

//! Modified Bessel function of the second kind `K_ν(x)` for real order and
//! positive argument.
//!
//! Orders are reduced to `|μ| ≤ 1/2` and evaluated with Temme's series
//! (`x < 2`) or Steed's continued fraction (`x ≥ 2`), then carried to the
//! requested order by the forward recurrence, which is stable for `K`.
//! Half-integer orders use the terminating closed form instead.
//!
//! Everything is returned in log form so that large orders at tiny arguments
//! (which overflow `f64`) and large arguments (which underflow) can still be
//! combined with the Matérn prefactors before exponentiating.

use std::f64::consts::PI;

const EPS: f64 = 1.0e-16;
const MAX_ITER: usize = 10_000;
const RESCALE: f64 = 1.0e250;

/// Taylor coefficients of `1/Γ(z) = Σ_k a_k z^k` (Abramowitz & Stegun 6.1.34).
const RECIP_GAMMA: [f64; 26] = [
    1.0,
    0.577_215_664_901_532_9,
    -0.655_878_071_520_253_8,
    -0.042_002_635_034_095_2,
    0.166_538_611_382_291_5,
    -0.042_197_734_555_544_3,
    -0.009_621_971_527_877_0,
    0.007_218_943_246_663_0,
    -0.001_165_167_591_859_1,
    -0.000_215_241_674_114_9,
    0.000_128_050_282_388_2,
    -0.000_020_134_854_780_7,
    -0.000_001_250_493_482_1,
    0.000_001_133_027_232_0,
    -0.000_000_205_633_841_7,
    0.000_000_006_116_095_0,
    0.000_000_005_002_007_5,
    -0.000_000_001_181_274_6,
    0.000_000_000_104_342_7,
    0.000_000_000_007_782_3,
    -0.000_000_000_003_696_8,
    0.000_000_000_000_510_0,
    -0.000_000_000_000_020_6,
    -0.000_000_000_000_005_4,
    0.000_000_000_000_001_4,
    0.000_000_000_000_000_1,
];

/// Temme's auxiliary gamma quantities for `|μ| ≤ 1/2`:
/// `(Γ₁(μ), Γ₂(μ), 1/Γ(1+μ), 1/Γ(1−μ))`.
pub(crate) fn temme_gammas(mu: f64) -> (f64, f64, f64, f64) {
    // Γ₁ = −Σ_{k even} a_k μ^{k−2},  Γ₂ = Σ_{k odd} a_k μ^{k−1}  (a_k one-based)
    let mut gam1 = 0.0;
    let mut gam2 = 0.0;
    for (i, a) in RECIP_GAMMA.iter().enumerate().rev() {
        if i % 2 == 1 {
            gam1 -= a * mu.powi(i as i32 - 1);
        } else {
            gam2 += a * mu.powi(i as i32);
        }
    }
    let gampl = gam2 - mu * gam1;
    let gammi = gam2 + mu * gam1;
    (gam1, gam2, gampl, gammi)
}

/// `ln K_ν(x)` for `x > 0`. Returns `None` for non-positive or non-finite `x`.
pub fn ln_bessel_k(nu: f64, x: f64) -> Option<f64> {
    if !(x > 0.0) || !x.is_finite() || !nu.is_finite() {
        return None;
    }
    let nu = nu.abs();
    let twice = 2.0 * nu;
    if (twice - twice.round()).abs() < 1e-14 && (twice.round() as i64) % 2 == 1 {
        return Some(ln_bessel_k_half_integer((nu - 0.5).round() as usize, x));
    }
    Some(ln_bessel_k_general(nu, x))
}

/// `K_ν(x)`; may overflow to `inf` or underflow to `0`.
pub fn bessel_k(nu: f64, x: f64) -> Option<f64> {
    ln_bessel_k(nu, x).map(f64::exp)
}

/// Closed form for `K_{m+1/2}(x) = sqrt(π/(2x)) e^{-x} Σ_k (m+k)!/(k!(m−k)!) (2x)^{-k}`.
fn ln_bessel_k_half_integer(m: usize, x: f64) -> f64 {
    // accumulate with a running scale so that tiny x and large m stay finite
    let mut term = 1.0_f64;
    let mut sum = 1.0_f64;
    let mut ln_scale = 0.0_f64;
    let inv2x = 1.0 / (2.0 * x);
    for k in 1..=m {
        // (m+k)!/(k!(m−k)!) = prev * (m+k)(m−k+1)/k
        term *= ((m + k) as f64) * ((m - k + 1) as f64) / (k as f64) * inv2x;
        sum += term;
        if sum > RESCALE {
            sum /= RESCALE;
            term /= RESCALE;
            ln_scale += RESCALE.ln();
        }
    }
    0.5 * (PI / (2.0 * x)).ln() - x + sum.ln() + ln_scale
}

fn ln_bessel_k_general(nu: f64, x: f64) -> f64 {
    let nl = (nu + 0.5).floor() as usize;
    let xmu = nu - nl as f64;
    let xmu2 = xmu * xmu;
    let xi = 1.0 / x;
    let xi2 = 2.0 * xi;

    let (mut rkmu, mut rk1, ln_base) = if x < 2.0 {
        let (k0, k1) = temme_series(xmu, xmu2, x, xi2);
        (k0, k1, 0.0)
    } else {
        // scaled by e^{x}: carry −x separately
        let (k0, k1) = steed_cf2(xmu, xmu2, x, xi);
        (k0, k1, -x)
    };

    let mut ln_scale = ln_base;
    for i in 1..=nl {
        let next = (xmu + i as f64) * xi2 * rk1 + rkmu;
        rkmu = rk1;
        rk1 = next;
        if rk1.abs() > RESCALE {
            rk1 /= RESCALE;
            rkmu /= RESCALE;
            ln_scale += RESCALE.ln();
        }
    }
    rkmu.ln() + ln_scale
}

/// Temme's series for `K_μ(x)` and `K_{μ+1}(x)`, `|μ| ≤ 1/2`, small `x`.
fn temme_series(xmu: f64, xmu2: f64, x: f64, xi2: f64) -> (f64, f64) {
    let x2 = 0.5 * x;
    let pimu = PI * xmu;
    let fact = if pimu.abs() < EPS { 1.0 } else { pimu / pimu.sin() };
    let d = -x2.ln();
    let e = xmu * d;
    let fact2 = if e.abs() < EPS { 1.0 } else { e.sinh() / e };
    let (gam1, gam2, gampl, gammi) = temme_gammas(xmu);
    let mut ff = fact * (gam1 * e.cosh() + gam2 * fact2 * d);
    let mut sum = ff;
    let e = e.exp();
    let mut p = 0.5 * e / gampl;
    let mut q = 0.5 / (e * gammi);
    let mut c = 1.0;
    let d = x2 * x2;
    let mut sum1 = p;
    for i in 1..MAX_ITER {
        let fi = i as f64;
        ff = (fi * ff + p + q) / (fi * fi - xmu2);
        c *= d / fi;
        p /= fi - xmu;
        q /= fi + xmu;
        let del = c * ff;
        sum += del;
        let del1 = c * (p - fi * ff);
        sum1 += del1;
        if del.abs() < sum.abs() * EPS {
            break;
        }
    }
    (sum, sum1 * xi2)
}

/// Steed's continued fraction (Temme's normalisation) for `e^x K_μ(x)` and
/// `e^x K_{μ+1}(x)`, `x ≥ 2`.
fn steed_cf2(xmu: f64, xmu2: f64, x: f64, xi: f64) -> (f64, f64) {
    let mut b = 2.0 * (1.0 + x);
    let mut d = 1.0 / b;
    let mut h = d;
    let mut delh = d;
    let mut q1 = 0.0;
    let mut q2 = 1.0;
    let a1 = 0.25 - xmu2;
    let mut q = a1;
    let mut c = a1;
    let mut a = -a1;
    let mut s = 1.0 + q * delh;
    for i in 2..MAX_ITER {
        let fi = i as f64;
        a -= 2.0 * (fi - 1.0);
        c = -a * c / fi;
        let qnew = (q1 - b * q2) / a;
        q1 = q2;
        q2 = qnew;
        q += c * qnew;
        b += 2.0;
        d = 1.0 / (b + a * d);
        delh *= b * d - 1.0;
        h += delh;
        let dels = q * delh;
        s += dels;
        if (dels / s).abs() < EPS {
            break;
        }
    }
    let h = a1 * h;
    let rkmu = (PI / (2.0 * x)).sqrt() / s;
    let rk1 = rkmu * (xmu + x + 0.5 - h) * xi;
    (rkmu, rk1)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    // K_ν(x) = ∫_0^∞ exp(−x cosh t) cosh(νt) dt, integrated by the trapezoid
    // rule (the integrand is analytic and doubly-exponentially decaying).
    fn integral_oracle(nu: f64, x: f64) -> f64 {
        let h = 1.0e-3;
        let mut sum = 0.5 * (-x).exp();
        let mut t: f64 = h;
        loop {
            let v = (-x * t.cosh()).exp() * (nu * t).cosh();
            sum += v;
            if v < 1e-300 || t > 60.0 {
                break;
            }
            t += h;
        }
        sum * h
    }

    #[test]
    fn known_integer_order_values() {
        // reference values: scipy.special.kv
        assert_relative_eq!(
            bessel_k(0.0, 1.0).unwrap(),
            0.421_024_438_240_708_3,
            max_relative = 1e-13
        );
        assert_relative_eq!(
            bessel_k(1.0, 1.0).unwrap(),
            0.601_907_230_197_234_6,
            max_relative = 1e-13
        );
        assert_relative_eq!(
            bessel_k(0.0, 2.0).unwrap(),
            0.113_893_872_749_533_4,
            max_relative = 1e-13
        );
        assert_relative_eq!(
            bessel_k(1.0, 2.0).unwrap(),
            0.139_865_881_816_522_4,
            max_relative = 1e-13
        );
    }

    #[test]
    fn half_integer_matches_general_path() {
        for &x in &[1e-6, 0.01, 0.3, 1.0, 1.99, 2.0, 5.0, 29.0] {
            for m in 0..6 {
                let nu = m as f64 + 0.5;
                let closed = ln_bessel_k_half_integer(m, x);
                let general = ln_bessel_k_general(nu, x);
                assert!(
                    (closed - general).abs() < 1e-12 * closed.abs().max(1.0),
                    "nu={nu} x={x}: {closed} vs {general}"
                );
            }
        }
    }

    #[test]
    fn order_half_closed_form() {
        for &x in &[0.1, 1.0, 3.0] {
            let expect = (PI / (2.0 * x)).sqrt() * (-x).exp();
            assert_relative_eq!(bessel_k(0.5, x).unwrap(), expect, max_relative = 1e-14);
        }
    }

    #[test]
    fn matches_integral_representation() {
        for &nu in &[0.0, 0.2, 0.75, 1.0, 1.3, 2.5, 4.2, 11.0] {
            for &x in &[0.05, 0.5, 1.5, 2.5, 8.0, 25.0] {
                let got = bessel_k(nu, x).unwrap();
                let want = integral_oracle(nu, x);
                assert_relative_eq!(got, want, max_relative = 1e-10);
            }
        }
    }

    #[test]
    fn temme_gammas_match_gamma_function() {
        use statrs::function::gamma::gamma;
        for &mu in &[-0.5, -0.3, -0.01, 0.02, 0.25, 0.5] {
            let (g1, g2, gp, gm) = temme_gammas(mu);
            let gp_ref = 1.0 / gamma(1.0 + mu);
            let gm_ref = 1.0 / gamma(1.0 - mu);
            assert_relative_eq!(gp, gp_ref, max_relative = 1e-14);
            assert_relative_eq!(gm, gm_ref, max_relative = 1e-14);
            assert_relative_eq!(g1, (gm_ref - gp_ref) / (2.0 * mu), max_relative = 1e-10);
            assert_relative_eq!(g2, 0.5 * (gm_ref + gp_ref), max_relative = 1e-14);
        }
        let (g1, _, _, _) = temme_gammas(0.0);
        assert_relative_eq!(g1, -0.577_215_664_901_532_9, max_relative = 1e-15);
    }

    #[test]
    fn large_order_small_argument_stays_finite_in_log() {
        let v = ln_bessel_k(60.0, 1e-8).unwrap();
        assert!(v.is_finite() && v > 700.0);
        let w = ln_bessel_k(2.0, 800.0).unwrap();
        assert!(w.is_finite() && w < -790.0);
    }

    #[test]
    fn rejects_bad_arguments() {
        assert!(ln_bessel_k(1.0, 0.0).is_none());
        assert!(ln_bessel_k(1.0, -1.0).is_none());
        assert!(ln_bessel_k(1.0, f64::NAN).is_none());
    }
}

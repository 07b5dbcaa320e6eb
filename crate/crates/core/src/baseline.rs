//! Weak-coupling (canonical Gibbs) observables of N independent spins,
//! `H_s = eps * Jz`.

use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct WeakResult {
    pub beta: f64,
    pub mean_jz: f64,
    pub var_jz: f64,
    pub snr: f64,
}

/// `sech^2(x/2) / 4 = e^{-|x|} / (1 + e^{-|x|})^2`, overflow-free.
fn quarter_sech2_half(x: f64) -> f64 {
    let e = (-x.abs()).exp();
    e / ((1.0 + e) * (1.0 + e))
}

/// `N beta^2 / (2 + 2 cosh(beta eps))` together with the mean and variance of
/// `Jz` it is built from.
pub fn weak_snr(n_spins: u32, epsilon: f64, beta: f64) -> WeakResult {
    let n = n_spins as f64;
    let x = beta * epsilon;
    let q = quarter_sech2_half(x);
    WeakResult {
        beta,
        mean_jz: -0.5 * n * (0.5 * x).tanh(),
        var_jz: n * q,
        snr: n * beta * beta * q,
    }
}

/// Per-spin weak SNR, `beta^2 / (2 + 2 cosh(beta eps))`.
pub fn weak_snr_per_spin(epsilon: f64, beta: f64) -> f64 {
    beta * beta * quarter_sech2_half(beta * epsilon)
}

/// Leading low-temperature term `N beta^2 e^{-beta eps}`. Only meaningful for
/// `beta * eps >> 1`.
pub fn weak_low_t_asymptote(epsilon: f64, temperature: f64, n_spins: u32) -> f64 {
    let beta = 1.0 / temperature;
    n_spins as f64 * beta * beta * (-beta * epsilon).exp()
}

/// `ln S_weak`, finite even where `S_weak` underflows.
pub fn ln_weak_snr(n_spins: u32, epsilon: f64, beta: f64) -> f64 {
    let x = (beta * epsilon).abs();
    (n_spins as f64).ln() + 2.0 * beta.ln() - x - 2.0 * (-x).exp().ln_1p()
}

#[cfg(test)]
mod tests {
    use super::*;
    use nalgebra::DMatrix;
    use proptest::prelude::*;

    #[test]
    fn zero_frequency_quarter() {
        assert!((weak_snr(1, 0.0, 1.0).snr - 0.25).abs() < 1e-16);
    }

    #[test]
    fn linear_in_n() {
        let one = weak_snr(1, 0.7, 3.1).snr;
        let four = weak_snr(4, 0.7, 3.1).snr;
        assert!((four - 4.0 * one).abs() < 1e-15 * four);
    }

    #[test]
    fn no_overflow_at_large_argument() {
        let r = weak_snr(2, 1.0, 1e4);
        assert!(r.snr.is_finite() && r.snr >= 0.0);
        assert!((r.mean_jz + 1.0).abs() < 1e-15);
        assert!(ln_weak_snr(2, 1.0, 1e4).is_finite());
    }

    #[test]
    fn asymptote_ratio_deep_low_t() {
        let eps = 1.0;
        let beta = 50.0;
        let ratio = weak_low_t_asymptote(eps, 1.0 / beta, 3) / weak_snr(3, eps, beta).snr;
        // ratio = (1 + e^{-50})^2
        assert!((ratio - 1.0).abs() < 1e-20 + 4.0 * f64::EPSILON);
    }

    #[test]
    fn log_slope_approaches_minus_eps() {
        let eps = 0.8;
        let h = 1e-3;
        let b = 60.0 / eps;
        let slope = (ln_weak_snr(1, eps, b + h) - ln_weak_snr(1, eps, b - h)) / (2.0 * h);
        // d ln S / d beta = 2 / beta - eps at low T; compare with -eps.
        assert!((slope - (2.0 / b - eps)).abs() < 1e-6);
    }

    #[test]
    fn exponential_decay_fit() {
        let eps = 1.3;
        let xs: Vec<f64> = (0..=40).map(|k| (20.0 + k as f64) / eps).collect();
        let ys: Vec<f64> = xs.iter().map(|&b| ln_weak_snr(1, eps, b) - 2.0 * b.ln()).collect();
        let n = xs.len() as f64;
        let mx = xs.iter().sum::<f64>() / n;
        let my = ys.iter().sum::<f64>() / n;
        let sxy: f64 = xs.iter().zip(&ys).map(|(x, y)| (x - mx) * (y - my)).sum();
        let sxx: f64 = xs.iter().map(|x| (x - mx) * (x - mx)).sum();
        assert!((sxy / sxx + eps).abs() < 0.01 * eps);
    }

    #[test]
    fn finite_difference_of_mean() {
        for k in 0..40 {
            let x = 0.01 * (5000.0f64).powf(k as f64 / 39.0);
            let beta = 2.0;
            let eps = x / beta;
            let h = 2e-4 * eps.max(1e-2);
            // mean + 1/2 = e^{-beta e} / (1 + e^{-beta e}) keeps the low-T tail free of cancellation
            let mean = |e: f64| {
                let t = (-beta * e).exp();
                t / (1.0 + t)
            };
            assert!((mean(eps) - 0.5 - weak_snr(1, eps, beta).mean_jz).abs() < 1e-15);
            let d1 = (mean(eps + h) - mean(eps - h)) / (2.0 * h);
            let d2 = (mean(eps + 2.0 * h) - mean(eps - 2.0 * h)) / (4.0 * h);
            let d = (4.0 * d1 - d2) / 3.0;
            let r = weak_snr(1, eps, beta);
            if r.var_jz < 1e-300 {
                continue;
            }
            let fd = d * d / r.var_jz;
            assert!((fd / r.snr - 1.0).abs() < 1e-8, "x = {x}: {fd} vs {}", r.snr);
        }
    }

    /// Explicit trace over the 2^N product space.
    fn brute_force(n: u32, eps: f64, beta: f64) -> (f64, f64) {
        let dim = 1usize << n;
        let jz: Vec<f64> = (0..dim).map(|s| s.count_ones() as f64 - n as f64 / 2.0).collect();
        let h = DMatrix::from_diagonal(&nalgebra::DVector::from_iterator(dim, jz.iter().map(|m| eps * m)));
        let e = h.symmetric_eigen();
        let emin = e.eigenvalues.min();
        let weights: Vec<f64> = e.eigenvalues.iter().map(|x| (-beta * (x - emin)).exp()).collect();
        let z: f64 = weights.iter().sum();
        let expect = |f: &dyn Fn(f64) -> f64| -> f64 {
            (0..dim)
                .map(|i| {
                    let v = e.eigenvectors.column(i);
                    weights[i] * (0..dim).map(|k| v[k] * v[k] * f(jz[k])).sum::<f64>()
                })
                .sum::<f64>()
                / z
        };
        let mean = expect(&|m| m);
        // centred second moment avoids cancellation when the variance is tiny
        let var = expect(&|m| (m - mean) * (m - mean));
        (mean, var)
    }

    proptest! {
        #[test]
        fn matches_product_space(n in 1u32..=6, beta in 0.05f64..20.0, eps in 0.01f64..3.0) {
            let (mean, var) = brute_force(n, eps, beta);
            let r = weak_snr(n, eps, beta);
            prop_assert!((r.mean_jz - mean).abs() <= 1e-10 * mean.abs().max(1e-300));
            prop_assert!((r.var_jz - var).abs() <= 1e-10 * var);
            prop_assert!((r.snr - beta * beta * var).abs() <= 1e-10 * r.snr);
        }
    }
}

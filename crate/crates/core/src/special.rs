//! Special functions and summation helpers shared by the engines.

use statrs::function::{beta, gamma};

pub fn ln_gamma(x: f64) -> f64 {
    gamma::ln_gamma(x)
}

pub fn gamma_fn(x: f64) -> f64 {
    gamma::gamma(x)
}

/// Complete Beta function B(a, b).
pub fn beta_fn(a: f64, b: f64) -> f64 {
    beta::ln_beta(a, b).exp()
}

/// Non-regularized incomplete Beta function B(z; a, b) = ∫₀ᶻ t^{a−1}(1−t)^{b−1} dt.
pub fn incomplete_beta(z: f64, a: f64, b: f64) -> f64 {
    if z <= 0.0 {
        return 0.0;
    }
    let z = z.min(1.0);
    beta::beta_reg(a, b, z) * beta::ln_beta(a, b).exp()
}

/// Regularized lower incomplete gamma P(a, x).
pub fn gamma_p(a: f64, x: f64) -> f64 {
    if x <= 0.0 {
        return 0.0;
    }
    gamma::gamma_lr(a, x)
}

/// ln C(n, k). Exact log-product when min(k, n−k) is small, log-gamma otherwise.
pub fn ln_binomial(n: u64, k: u64) -> f64 {
    if k > n {
        return f64::NEG_INFINITY;
    }
    let k = k.min(n - k);
    if k == 0 {
        return 0.0;
    }
    if k <= 64 {
        let mut acc = NeumaierSum::default();
        for i in 0..k {
            acc.add(((n - i) as f64 / (i + 1) as f64).ln());
        }
        return acc.value();
    }
    ln_gamma(n as f64 + 1.0) - ln_gamma(k as f64 + 1.0) - ln_gamma((n - k) as f64 + 1.0)
}

/// log P(a, z), the log of the regularized lower incomplete gamma function.
/// Stays finite where P itself underflows.
pub fn ln_gamma_p(a: f64, z: f64) -> f64 {
    if z <= 0.0 {
        return f64::NEG_INFINITY;
    }
    if z > a + 1.0 {
        let q = gamma::gamma_ur(a, z);
        return (-q).ln_1p();
    }
    // P(a,z) = z^a e^{−z}/Γ(a+1) · Σ_j z^j / ((a+1)…(a+j))
    let mut term = 1.0f64;
    let mut sum = NeumaierSum::default();
    sum.add(1.0);
    let mut j = 1.0;
    loop {
        term *= z / (a + j);
        sum.add(term);
        if term < 1e-17 * sum.value() || j > 10_000.0 {
            break;
        }
        j += 1.0;
    }
    a * z.ln() - z - ln_gamma(a + 1.0) + sum.value().ln()
}

/// Numerically stable log Σ exp(terms). Returns −∞ for an empty or all −∞ input.
pub fn log_sum_exp(terms: &[f64]) -> f64 {
    let max = terms.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    if max == f64::NEG_INFINITY {
        return f64::NEG_INFINITY;
    }
    if max == f64::INFINITY {
        return f64::INFINITY;
    }
    let mut acc = NeumaierSum::default();
    for &t in terms {
        acc.add((t - max).exp());
    }
    max + acc.value().ln()
}

/// Compensated (Neumaier) summation.
#[derive(Debug, Default, Clone, Copy)]
pub struct NeumaierSum {
    sum: f64,
    comp: f64,
}

impl NeumaierSum {
    pub fn add(&mut self, x: f64) {
        let t = self.sum + x;
        if self.sum.abs() >= x.abs() {
            self.comp += (self.sum - t) + x;
        } else {
            self.comp += (x - t) + self.sum;
        }
        self.sum = t;
    }

    pub fn value(&self) -> f64 {
        self.sum + self.comp
    }
}

impl FromIterator<f64> for NeumaierSum {
    fn from_iter<I: IntoIterator<Item = f64>>(iter: I) -> Self {
        let mut s = NeumaierSum::default();
        for x in iter {
            s.add(x);
        }
        s
    }
}

pub fn neumaier_sum<I: IntoIterator<Item = f64>>(iter: I) -> f64 {
    iter.into_iter().collect::<NeumaierSum>().value()
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    #[test]
    fn incomplete_beta_matches_elementary_cases() {
        // B(z; 1, 1) = z
        assert_relative_eq!(incomplete_beta(0.3, 1.0, 1.0), 0.3, max_relative = 1e-13);
        // B(z; 1, b) = (1 − (1−z)^b)/b
        let b = 11.0;
        let z = 0.2302585;
        let expect = (1.0 - (1.0f64 - z).powf(b)) / b;
        assert_relative_eq!(incomplete_beta(z, 1.0, b), expect, max_relative = 1e-12);
        // B(1/2, 1/2) = π
        assert_relative_eq!(
            beta_fn(0.5, 0.5),
            std::f64::consts::PI,
            max_relative = 1e-13
        );
    }

    #[test]
    fn ln_binomial_small_and_large_agree() {
        assert_relative_eq!(ln_binomial(10, 3), 120f64.ln(), max_relative = 1e-14);
        let big = ln_binomial(2000, 2);
        assert_relative_eq!(big, (2000.0f64 * 1999.0 / 2.0).ln(), max_relative = 1e-14);
        let huge = ln_binomial(10_000_000_000, 2);
        assert_relative_eq!(
            huge,
            (1e10f64 * (1e10 - 1.0) / 2.0).ln(),
            max_relative = 1e-14
        );
        assert_relative_eq!(
            ln_binomial(500, 250),
            ln_gamma(501.0) - 2.0 * ln_gamma(251.0),
            max_relative = 1e-12
        );
        assert_eq!(ln_binomial(3, 5), f64::NEG_INFINITY);
    }

    #[test]
    fn ln_gamma_p_matches_direct_and_survives_underflow() {
        for &(a, z) in &[(0.5, 0.3), (3.0, 2.0), (7.5, 20.0), (2.1, 0.01)] {
            assert_relative_eq!(ln_gamma_p(a, z), gamma_p(a, z).ln(), max_relative = 1e-11);
        }
        // P(a, z) ~ z^a/Γ(a+1) for z ≪ 1, deep below f64 range
        let v = ln_gamma_p(600.0, 1e-3);
        let lead = 600.0 * 1e-3f64.ln() - ln_gamma(601.0);
        assert!((v - lead).abs() < 1e-2);
        assert!(v < -5000.0);
    }

    #[test]
    fn log_sum_exp_handles_underflow() {
        let v = log_sum_exp(&[-2000.0, -2000.0]);
        assert_relative_eq!(v, -2000.0 + 2f64.ln(), max_relative = 1e-14);
        assert_eq!(log_sum_exp(&[]), f64::NEG_INFINITY);
    }

    #[test]
    fn neumaier_recovers_small_addends() {
        let s = neumaier_sum([1.0, 1e100, 1.0, -1e100]);
        assert_eq!(s, 2.0);
    }
}

//! Survival probabilities with known closed forms, used as fast paths and as test oracles.

use crate::dist::{DensityFamily, DensitySpec};
use crate::special::{ln_gamma, ln_gamma_p, log_sum_exp};
use std::f64::consts::LN_2;

/// log P[S_n ≤ x] for the constant density c on [0, ε], x ≤ ε: (cx)^n/n!.
pub fn log_simplex_survival(level: f64, x: f64, n: u64) -> f64 {
    n as f64 * (level * x).ln() - ln_gamma(n as f64 + 1.0)
}

/// log P[S_n ≤ x] for f(t) = α t^{α−1}/u^α on [0, u], x ≤ u.
pub fn log_power_law_survival(alpha: f64, upper: f64, x: f64, n: u64) -> f64 {
    let nf = n as f64;
    nf * ln_gamma(alpha + 1.0) + nf * alpha * (x / upper).ln() - ln_gamma(nf * alpha + 1.0)
}

/// log P[S_n ≤ x] for Gamma(k, θ) shocks: S_n ~ Gamma(nk, θ).
pub fn log_gamma_survival(shape: f64, scale: f64, x: f64, n: u64) -> f64 {
    ln_gamma_p(n as f64 * shape, x / scale)
}

/// log P[L_n ≤ t] for t ≤ 0, with L_n a sum of n standard Laplace variables.
fn log_laplace_sum_left(n: u64, t: f64) -> f64 {
    let u = -t;
    let nf = n as f64;
    // density e^{−|t|} Σ_j a_j |t|^j with a_j = (2n−2−j)! 2^j / (2^{2n−1} (n−1)! j! (n−1−j)!),
    // and ∫_u^∞ v^j e^{−v} dv = j! e^{−u} Σ_{i≤j} u^i/i!
    let mut partial = Vec::with_capacity(n as usize);
    let mut terms = Vec::with_capacity(n as usize);
    let lu = u.ln();
    for j in 0..n {
        let jf = j as f64;
        partial.push(if u > 0.0 {
            jf * lu - ln_gamma(jf + 1.0)
        } else if j == 0 {
            0.0
        } else {
            f64::NEG_INFINITY
        });
        let coef = ln_gamma(2.0 * nf - 1.0 - jf) + jf * LN_2
            - (2.0 * nf - 1.0) * LN_2
            - ln_gamma(nf)
            - ln_gamma(nf - jf);
        terms.push(coef - u + log_sum_exp(&partial));
    }
    log_sum_exp(&terms)
}

/// log P[S_n ≤ s] when the shocks have density ½e^{−|t−1|}.
pub fn log_shifted_laplace_sum_cdf(n: u64, s: f64) -> f64 {
    if n == 0 {
        return if s >= 0.0 { 0.0 } else { f64::NEG_INFINITY };
    }
    let t = s - n as f64;
    if t <= 0.0 {
        log_laplace_sum_left(n, t)
    } else {
        (-log_laplace_sum_left(n, -t).exp()).ln_1p()
    }
}

/// log c_{n,x} when the family admits a closed form at this threshold.
pub fn log_survival_closed_form(f: &DensitySpec, x: f64, n: u64) -> Option<f64> {
    if n == 0 {
        return Some(0.0);
    }
    match &f.family {
        DensityFamily::PowerLawOnInterval { alpha, upper } if x <= *upper => {
            Some(log_power_law_survival(*alpha, *upper, x, n))
        }
        DensityFamily::ConstantNearZero { level, width } if x <= *width => {
            Some(log_simplex_survival(*level, x, n))
        }
        DensityFamily::GammaLike { shape, scale } => Some(log_gamma_survival(*shape, *scale, x, n)),
        DensityFamily::ShiftedTwoSidedExponential => Some(log_shifted_laplace_sum_cdf(n, x)),
        _ => None,
    }
}

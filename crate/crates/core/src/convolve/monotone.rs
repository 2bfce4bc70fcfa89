use super::convolution_powers;
use super::grid::{convolve_pair, ConvolveOptions, GridFunction};
use crate::dist::DensitySpec;
use crate::error::{precondition, Error, Result};

#[derive(Debug, Clone, Copy)]
pub struct MonotoneOptions {
    pub cells: usize,
}

impl Default for MonotoneOptions {
    fn default() -> Self {
        Self { cells: 2000 }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Violation {
    /// grid node where the decrease starts
    pub index: usize,
    /// decrease relative to the larger of the two node values
    pub magnitude: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct MonotoneReport {
    pub x: f64,
    /// smallest n from which every tested convolution power is non-decreasing; None if not found
    pub threshold_n: Option<usize>,
    /// entry n−1 describes f^{*n}
    pub violations: Vec<Option<Violation>>,
    pub cells: usize,
}

/// First decrease of the density on nodes 0..=upto that exceeds grid noise:
/// 10 times the local second difference plus a few ulps.
pub(crate) fn first_violation(g: &GridFunction, upto: usize) -> Option<Violation> {
    if let Some(h) = g.head {
        if h.exponent < 0.0 && h.coef > 0.0 {
            return Some(Violation {
                index: 0,
                magnitude: f64::INFINITY,
            });
        }
    }
    let upto = upto.min(g.values.len() - 1);
    let d: Vec<f64> = (0..=upto).map(|i| g.node_density(i)).collect();
    let second = |i: usize| -> f64 {
        if i == 0 || i + 1 >= d.len() {
            0.0
        } else {
            (d[i + 1] - 2.0 * d[i] + d[i - 1]).abs()
        }
    };
    for i in 0..upto {
        let drop = d[i] - d[i + 1];
        let scale = d[i].abs().max(d[i + 1].abs());
        let tol = 10.0 * second(i).max(second(i + 1)) + 64.0 * f64::EPSILON * scale;
        if drop > tol {
            return Some(Violation {
                index: i,
                magnitude: drop / scale.max(f64::MIN_POSITIVE),
            });
        }
    }
    None
}

/// Scans f^{*n} for n = 1..=n_cap and reports where monotonicity on [0, x] sets in for good.
pub fn monotone_threshold(
    f: &DensitySpec,
    x: f64,
    n_cap: usize,
    opts: &MonotoneOptions,
) -> Result<MonotoneReport> {
    precondition(n_cap >= 1, || "n_cap must be at least 1".into())?;
    let powers = convolution_powers(f, x, n_cap, opts.cells, &ConvolveOptions::direct())?;
    let violations: Vec<Option<Violation>> = powers
        .iter()
        .skip(1)
        .map(|g| first_violation(g, opts.cells))
        .collect();
    let threshold_n = match violations.iter().rposition(|v| v.is_some()) {
        None => Some(1),
        Some(last) if last + 1 < n_cap => Some(last + 2),
        Some(_) => None,
    };
    Ok(MonotoneReport {
        x,
        threshold_n,
        violations,
        cells: opts.cells,
    })
}

/// f(ct) ≤ c^β f(t) on the sampled pairs (c, t) ∈ c_grid × (0, eps].
pub fn scaling_criterion_check(f: &DensitySpec, beta: f64, eps: f64, c_grid: &[f64]) -> bool {
    let mut ts: Vec<f64> = (1..=256).map(|i| eps * i as f64 / 256.0).collect();
    ts.extend((1..=32).map(|k| eps * 0.5f64.powi(k + 8)));
    c_grid.iter().filter(|&&c| c > 0.0 && c < 1.0).all(|&c| {
        ts.iter().all(|&t| {
            let lhs = f.pdf(c * t);
            let rhs = c.powf(beta) * f.pdf(t);
            lhs <= rhs * (1.0 + 1e-12) || lhs - rhs <= 1e-300
        })
    })
}

/// Checks that f^{*4^j} is non-decreasing on [0, (3/2)^j eps] for j = 0..=k.
pub fn propagation_check(f: &GridFunction, eps: f64, k: u32) -> Result<bool> {
    let h = f.step;
    if eps / h < 8.0 {
        return Err(Error::ResolutionTooCoarse(format!(
            "eps = {eps} spans fewer than 8 cells of {h}"
        )));
    }
    let reach = eps * 1.5f64.powi(k as i32);
    precondition(reach <= f.upper() * (1.0 + 1e-12), || {
        format!(
            "grid ends at {} but the check needs [0, {reach}]",
            f.upper()
        )
    })?;
    let nodes = |r: f64| ((r / h) * (1.0 + 1e-12)).floor() as usize;
    if first_violation(f, nodes(eps)).is_some() {
        return Err(Error::PreconditionViolated(format!(
            "density is not non-decreasing on [0, {eps}]"
        )));
    }
    let opts = ConvolveOptions::direct();
    let mut g = f.clone();
    for j in 1..=k {
        let sq = convolve_pair(&g, &g, &opts)?;
        g = convolve_pair(&sq, &sq, &opts)?;
        if first_violation(&g, nodes(eps * 1.5f64.powi(j as i32))).is_some() {
            return Ok(false);
        }
    }
    Ok(true)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn uniform_is_monotone_from_the_start() {
        let f = DensitySpec::uniform(1.0).unwrap();
        let r = monotone_threshold(&f, 0.9, 5, &MonotoneOptions { cells: 500 }).unwrap();
        assert_eq!(r.threshold_n, Some(1));
    }

    #[test]
    fn gamma_threshold_matches_mode_and_refinement() {
        // Gamma(0.3n) has its mode at 0.3n − 1, which passes 1 at n = 7
        let f = DensitySpec::gamma(0.3, 1.0).unwrap();
        let coarse = monotone_threshold(&f, 1.0, 12, &MonotoneOptions { cells: 1000 }).unwrap();
        let fine = monotone_threshold(&f, 1.0, 12, &MonotoneOptions { cells: 2000 }).unwrap();
        assert_eq!(coarse.threshold_n, Some(7));
        assert_eq!(fine.threshold_n, coarse.threshold_n);
        assert!(coarse.violations[5].is_some());
    }

    #[test]
    fn threshold_not_found_within_cap() {
        let f = DensitySpec::gamma(0.3, 1.0).unwrap();
        let r = monotone_threshold(&f, 1.0, 3, &MonotoneOptions { cells: 500 }).unwrap();
        assert_eq!(r.threshold_n, None);
        assert_eq!(r.violations.len(), 3);
    }

    #[test]
    fn scaling_examples() {
        let cs = [0.05, 0.25, 0.5, 0.75, 0.95];
        let p = DensitySpec::power_law(0.5, 1.0).unwrap();
        // f(ct)/f(t) = c^{-1/2}, so the criterion holds exactly for β ≤ −1/2
        assert!(scaling_criterion_check(&p, -0.5, 0.5, &cs));
        assert!(scaling_criterion_check(&p, -0.75, 0.5, &cs));
        assert!(!scaling_criterion_check(&p, 0.75, 0.5, &cs));
        let u = DensitySpec::uniform(1.0).unwrap();
        assert!(scaling_criterion_check(&u, -0.5, 0.5, &cs));
        assert!(scaling_criterion_check(&u, 0.0, 0.5, &cs));
        let g = DensitySpec::gamma(2.0, 1.0).unwrap();
        assert!(scaling_criterion_check(&g, 0.0, 0.5, &cs));
    }

    fn triangle(h: f64, upper: f64) -> GridFunction {
        let cells = (upper / h).round() as usize;
        let v = (0..=cells)
            .map(|i| {
                let t = i as f64 * h;
                if t <= 1.0 {
                    t
                } else if t <= 2.0 {
                    2.0 - t
                } else {
                    0.0
                }
            })
            .collect();
        GridFunction::from_samples(h, v).unwrap()
    }

    #[test]
    fn propagation_on_triangle() {
        let f = triangle(2.5e-3, 2.25);
        for k in 0..=2 {
            assert!(propagation_check(&f, 1.0, k).unwrap(), "k = {k}");
        }
    }

    #[test]
    fn propagation_preconditions() {
        let f = triangle(2.5e-3, 2.25);
        assert!(matches!(
            propagation_check(&f, 1.5, 0),
            Err(Error::PreconditionViolated(_))
        ));
        assert!(matches!(
            propagation_check(&f, 1.0, 3),
            Err(Error::PreconditionViolated(_))
        ));
        assert!(matches!(
            propagation_check(&f, 0.01, 0),
            Err(Error::ResolutionTooCoarse(_))
        ));
        let flat = GridFunction::from_samples(0.01, vec![1.0; 400]).unwrap();
        assert!(propagation_check(&flat, 1.0, 2).unwrap());
    }
}

//! Exponential tilting: moment generating functions, tilt solving, the sharp
//! Cramér asymptotic for real-valued shocks and the bound sandwiches for
//! nonnegative discrete shocks.

mod c2;
mod mgf;

pub use c2::{ld_bounds_c2, ratio_limit_bounds_c2, verify_bounds, BoundCheck, LogBand};
pub use mgf::{Construction, MgfModel, MgfPoint};

use crate::dist::ShockDistribution;
use crate::error::{precondition, Error, Result};
use std::f64::consts::PI;

pub fn build_mgf(d: &ShockDistribution) -> Result<MgfModel> {
    MgfModel::build(d)
}

/// Sample points approaching an endpoint of the convergence interval (or ±∞).
fn approach(m: &MgfModel, sign: f64) -> Vec<f64> {
    let end = if sign < 0.0 { m.a1 } else { m.a2 };
    if end.is_finite() {
        (1..=50)
            .map(|k| sign * end * (1.0 - 0.5f64.powi(k)))
            .collect()
    } else {
        (0..=36).map(|k| sign * 0.25 * 2f64.powi(k)).collect()
    }
}

/// Extreme values of m̄_X reached while walking toward both interval ends.
fn mean_range(m: &MgfModel) -> (f64, f64) {
    let far = |sign: f64| {
        let mut last = m.mean;
        for h in approach(m, sign) {
            match m.m_bar(h) {
                Ok(v) => last = v,
                Err(_) => break,
            }
        }
        last
    };
    (far(-1.0), far(1.0))
}

/// λ with m̄_X(λ) = z: bracketed Newton with bisection fallback.
pub fn solve_tilted_mean(m: &MgfModel, z: f64) -> Result<f64> {
    let e = m.mean;
    if z == e {
        return Ok(0.0);
    }
    let sign = if z < e { -1.0 } else { 1.0 };
    let mut inner = 0.0;
    let mut outer = None;
    for h in approach(m, sign) {
        let Ok(v) = m.m_bar(h) else { break };
        if (v - z) * sign >= 0.0 {
            outer = Some(h);
            break;
        }
        inner = h;
    }
    let Some(outer) = outer else {
        let (lower, upper) = mean_range(m);
        return Err(Error::TargetOutOfRange {
            target: z,
            lower,
            upper,
        });
    };
    let (mut lo, mut hi) = if sign < 0.0 {
        (outer, inner)
    } else {
        (inner, outer)
    };
    let mut lam = 0.5 * (lo + hi);
    for _ in 0..400 {
        let p = m.eval(lam)?;
        let g = p.mean - z;
        if g.abs() <= 1e-13 * (1.0 + z.abs()) {
            return Ok(lam);
        }
        if g < 0.0 {
            lo = lam;
        } else {
            hi = lam;
        }
        if hi - lo <= 4.0 * f64::EPSILON * lo.abs().max(hi.abs()) {
            return Ok(lam);
        }
        let mut next = lam - g / p.var;
        if !(next > lo && next < hi) {
            next = 0.5 * (lo + hi);
        }
        lam = next;
    }
    Ok(lam)
}

/// Tilt h of the centred variable Y = E[X] − X with m̄_Y(h) = target.
pub fn tilt_solve(m: &MgfModel, target_mean: f64) -> Result<f64> {
    // m̄_Y(h) = E[X] − m̄_X(−h)
    match solve_tilted_mean(m, m.mean - target_mean) {
        Ok(l) => Ok(-l),
        Err(Error::TargetOutOfRange { lower, upper, .. }) => Err(Error::TargetOutOfRange {
            target: target_mean,
            lower: m.mean - upper,
            upper: m.mean - lower,
        }),
        Err(e) => Err(e),
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Verdict {
    Yes,
    No,
    Undetermined,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum LimitValue {
    Finite(f64),
    NegInfinity,
    Bracket(f64, f64),
}

#[derive(Debug, Clone, PartialEq)]
pub struct ConditionReport {
    pub satisfied: Verdict,
    /// limit of m̄_X at the left end of the convergence interval
    pub limit_value: LimitValue,
    /// R′ at the left endpoint when R converges there
    pub endpoint_r_prime: Option<f64>,
    pub trace: Vec<String>,
}

/// Whether the tilted mean m̄_X(h) drops below zero as h decreases to −a1.
pub fn condition_c_check(m: &MgfModel) -> ConditionReport {
    let mut trace = Vec::new();
    if !m.negative_mass {
        trace.push(
            "X >= 0 almost surely: the tilted mean stays at or above the essential infimum".into(),
        );
        return ConditionReport {
            satisfied: Verdict::No,
            limit_value: LimitValue::Finite(m.ess_inf),
            endpoint_r_prime: None,
            trace,
        };
    }
    if m.a1.is_infinite() {
        trace.push("P[X < 0] > 0 with R finite on the whole negative half-line".into());
        let limit = if m.ess_inf.is_finite() {
            LimitValue::Finite(m.ess_inf)
        } else {
            LimitValue::NegInfinity
        };
        return ConditionReport {
            satisfied: Verdict::Yes,
            limit_value: limit,
            endpoint_r_prime: None,
            trace,
        };
    }
    let a1 = m.a1;
    let mut seq = Vec::new();
    for j in 1..=10 {
        let h = -a1 + a1 * 10f64.powi(-j);
        match m.m_bar(h) {
            Ok(v) if v.is_finite() => {
                trace.push(format!("m_bar({h:.12}) = {v:.12e}"));
                seq.push(v);
            }
            _ => {
                trace.push(format!("evaluation failed at h = {h}"));
                break;
            }
        }
    }
    let endpoint_r_prime = m.eval(-a1).ok().and_then(|p| {
        let v = p.log_r.exp() * p.mean;
        v.is_finite().then_some(v)
    });
    if let Some(rp) = endpoint_r_prime {
        trace.push(format!("R'(-a1) = {rp:.12e}"));
    }
    let n = seq.len();
    if n < 4 {
        return ConditionReport {
            satisfied: Verdict::Undetermined,
            limit_value: LimitValue::Bracket(
                f64::NEG_INFINITY,
                seq.iter().cloned().fold(f64::NEG_INFINITY, f64::max),
            ),
            endpoint_r_prime,
            trace,
        };
    }
    let decreasing = seq.windows(2).rev().take(3).all(|w| w[1] < w[0]);
    let last = seq[n - 1];
    if decreasing && last < -1e3 * (1.0 + seq[0].abs()) {
        trace.push("tilted mean diverges to -inf".into());
        return ConditionReport {
            satisfied: Verdict::Yes,
            limit_value: LimitValue::NegInfinity,
            endpoint_r_prime,
            trace,
        };
    }
    let d: Vec<f64> = seq.windows(2).map(|w| (w[1] - w[0]).abs()).collect();
    let settled = d[d.len() - 1] <= 1e-7 * (1.0 + last.abs()) && d[d.len() - 1] <= d[d.len() - 3];
    if settled {
        trace.push(format!("tilted mean settles at {last:.12e}"));
        return ConditionReport {
            satisfied: if last < 0.0 {
                Verdict::Yes
            } else {
                Verdict::No
            },
            limit_value: LimitValue::Finite(last),
            endpoint_r_prime,
            trace,
        };
    }
    let lo = seq.iter().cloned().fold(f64::INFINITY, f64::min);
    let hi = seq.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    ConditionReport {
        satisfied: Verdict::Undetermined,
        limit_value: LimitValue::Bracket(lo, hi),
        endpoint_r_prime,
        trace,
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TiltResult {
    /// optimal tilt of the centred variable (minus the tilt of X)
    pub h_inf: f64,
    pub ld_rate: f64,
    pub sigma_bar: f64,
    /// derivative of the rate functional at h_inf
    pub gradient_residual: f64,
}

impl TiltResult {
    pub fn log_prefactor(&self, n: u64, x: f64) -> f64 {
        let nf = n as f64;
        -self.ld_rate * nf + x * self.h_inf
            - (self.h_inf * self.sigma_bar * (2.0 * PI * nf).sqrt()).ln()
    }

    pub fn prefactor(&self, n: u64, x: f64) -> f64 {
        self.log_prefactor(n, x).exp()
    }

    pub fn ratio_limit(&self) -> f64 {
        (-self.ld_rate).exp()
    }
}

/// Tilt that moves the mean of X to `level`, with rate Λ*(level).
fn tilt_to_level(m: &MgfModel, level: f64) -> Result<TiltResult> {
    let lam = solve_tilted_mean(m, level)?;
    let p = m.eval(lam)?;
    Ok(TiltResult {
        h_inf: -lam,
        ld_rate: lam * level - p.log_r,
        sigma_bar: p.var.sqrt(),
        gradient_residual: p.mean - level,
    })
}

/// Optimal tilt for P[S_n ≤ x]: requires E[X] > 0, P[X < 0] > 0, an
/// absolutely continuous part and condition (C).
pub fn cramer(m: &MgfModel) -> Result<TiltResult> {
    precondition(m.mean > 0.0, || {
        format!("E[X] = {} <= 0: the ratio tends to 1 trivially", m.mean)
    })?;
    if !m.negative_mass {
        return Err(Error::ConditionFailed("X >= 0 almost surely".into()));
    }
    if !m.has_ac_part {
        return Err(Error::ConditionFailed(
            "no absolutely continuous component".into(),
        ));
    }
    let report = condition_c_check(m);
    if report.satisfied != Verdict::Yes {
        return Err(Error::ConditionFailed(format!(
            "condition (C) is {:?}: {:?}",
            report.satisfied, report.limit_value
        )));
    }
    tilt_to_level(m, 0.0)
}

/// e^{−αn + x h}/(h σ̄ √(2πn)), the sharp equivalent of P[S_n ≤ x].
pub fn cramer_survival_asymptotic(m: &MgfModel, x: f64, n: u64) -> Result<f64> {
    precondition(x > 0.0 && n >= 1, || {
        format!("need x > 0 and n >= 1, got x = {x}, n = {n}")
    })?;
    Ok(cramer(m)?.prefactor(n, x))
}

/// Tilt for the event S_n ≤ cn + x, 0 < c < E[X].
pub fn concentration_tilt(m: &MgfModel, c: f64) -> Result<TiltResult> {
    precondition(c > 0.0, || format!("c = {c} must be positive"))?;
    if c >= m.mean {
        return Err(Error::TargetOutOfRange {
            target: c,
            lower: 0.0,
            upper: m.mean,
        });
    }
    tilt_to_level(m, c)
}

/// Sharp equivalent of P[S_n ≤ cn + x].
pub fn cramer_concentration(m: &MgfModel, c: f64, x: f64, n: u64) -> Result<f64> {
    precondition(n >= 1, || "n must be at least 1".into())?;
    Ok(concentration_tilt(m, c)?.prefactor(n, x))
}

/// Λ*(z) = sup_λ {λz − log R(λ)} for a nonnegative shock.
pub fn legendre_at(m: &MgfModel, z: f64) -> Result<f64> {
    precondition(!m.negative_mass, || "the shock must be nonnegative".into())?;
    precondition(z >= 0.0, || format!("z = {z} must be nonnegative"))?;
    if z < m.ess_inf {
        return Ok(f64::INFINITY);
    }
    if z == m.ess_inf {
        return Ok(-m.mass_at_ess_inf.ln());
    }
    if z == m.mean {
        return Ok(0.0);
    }
    let lam = solve_tilted_mean(m, z)?;
    Ok(lam * z - m.eval(lam)?.log_r)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dist::{DensitySpec, DiscreteSpec};
    use crate::quad::{integrate, QuadOptions};
    use approx::assert_relative_eq;

    fn f1() -> MgfModel {
        build_mgf(&ShockDistribution::Continuous(
            DensitySpec::shifted_two_sided_exponential(),
        ))
        .unwrap()
    }

    fn f2() -> MgfModel {
        build_mgf(&ShockDistribution::Continuous(
            DensitySpec::shifted_damped_exponential(),
        ))
        .unwrap()
    }

    fn binomial() -> MgfModel {
        build_mgf(&ShockDistribution::Discrete(
            DiscreteSpec::from_pairs(&[(0.0, 0.5), (1.0, 0.5)]).unwrap(),
        ))
        .unwrap()
    }

    fn bisect_mean(m: &MgfModel, z: f64, mut lo: f64, mut hi: f64) -> f64 {
        for _ in 0..200 {
            let mid = 0.5 * (lo + hi);
            if m.m_bar(mid).unwrap() < z {
                lo = mid;
            } else {
                hi = mid;
            }
        }
        0.5 * (lo + hi)
    }

    #[test]
    fn f1_optimal_tilt() {
        let m = f1();
        let h = tilt_solve(&m, 1.0).unwrap();
        assert!(h > 0.0);
        assert_relative_eq!(h, std::f64::consts::SQRT_2 - 1.0, max_relative = 1e-12);
        let oracle = -bisect_mean(&m, 0.0, -0.99, 0.0);
        assert!((h - oracle).abs() < 1e-12);
        assert!(m.m_bar(-h).unwrap().abs() < 1e-10);
        assert_eq!(tilt_solve(&m, 0.0).unwrap(), 0.0);
        let t = cramer(&m).unwrap();
        assert!(t.gradient_residual.abs() < 1e-10);
        assert!(t.ld_rate > 0.0 && t.sigma_bar > 0.0 && t.h_inf > 0.0);
        // α = −log R(1 − √2)
        let l = 1.0 - std::f64::consts::SQRT_2;
        assert_relative_eq!(t.ld_rate, -(l - (1.0 - l * l).ln()), max_relative = 1e-12);
    }

    #[test]
    fn tilt_out_of_range() {
        let m = binomial();
        // m̄_Y ranges over (−1/2, 1/2)
        assert!(matches!(
            tilt_solve(&m, 0.7),
            Err(Error::TargetOutOfRange { .. })
        ));
        assert!(matches!(
            solve_tilted_mean(&m, -0.1),
            Err(Error::TargetOutOfRange { .. })
        ));
    }

    #[test]
    fn tilt_inverts_tilted_mean() {
        for m in [f1(), binomial()] {
            for h in [-0.8, -0.3, 0.1, 0.6] {
                let target = m.mean - m.m_bar(-h).unwrap();
                let back = tilt_solve(&m, target).unwrap();
                assert!((back - h).abs() < 1e-10, "{h} -> {back}");
            }
        }
    }

    #[test]
    fn asymptotic_ratio_and_preconditions() {
        let m = f1();
        let t = cramer(&m).unwrap();
        let r = cramer_survival_asymptotic(&m, 0.5, 2001).unwrap()
            / cramer_survival_asymptotic(&m, 0.5, 2000).unwrap();
        assert_relative_eq!(
            r,
            t.ratio_limit() * (2000.0f64 / 2001.0).sqrt(),
            max_relative = 1e-12
        );
        assert!(matches!(
            cramer(&binomial()),
            Err(Error::ConditionFailed(_))
        ));
        assert!(matches!(cramer(&f2()), Err(Error::ConditionFailed(_))));
        let centred = build_mgf(&ShockDistribution::Continuous(DensitySpec::tabulated(
            crate::dist::TabulatedDensity::new(vec![-1.0, 0.0, 1.0], vec![0.0, 1.0, 0.0], true)
                .unwrap(),
        )))
        .unwrap();
        assert!(matches!(
            cramer(&centred),
            Err(Error::PreconditionViolated(_))
        ));
    }

    #[test]
    fn asymptotic_tracks_exact_laplace_sums() {
        use crate::convolve::closed_form::log_shifted_laplace_sum_cdf;
        let m = f1();
        let t = cramer(&m).unwrap();
        let gap = |n: u64| (t.log_prefactor(n, 0.5) - log_shifted_laplace_sum_cdf(n, 0.5)).abs();
        let gaps: Vec<f64> = [20u64, 40, 80, 160, 320].iter().map(|&n| gap(n)).collect();
        assert!(gaps.windows(2).all(|w| w[1] < w[0]), "{gaps:?}");
        assert!(gaps[4] < 0.01);
    }

    #[test]
    fn concentration_tilt_is_continuous_and_matches_exact() {
        use crate::convolve::closed_form::log_shifted_laplace_sum_cdf;
        let m = f1();
        let base = cramer(&m).unwrap();
        let hs: Vec<f64> = [0.2, 0.1, 0.05, 0.01, 1e-3, 1e-5]
            .iter()
            .map(|&c| concentration_tilt(&m, c).unwrap().h_inf)
            .collect();
        assert!(hs
            .windows(2)
            .all(|w| (w[1] - base.h_inf).abs() < (w[0] - base.h_inf).abs()));
        assert!((hs[5] - base.h_inf).abs() < 1e-4);
        let gap = |n: u64| {
            let approx = cramer_concentration(&m, 0.5, 0.3, n).unwrap().ln();
            (approx - log_shifted_laplace_sum_cdf(n, 0.5 * n as f64 + 0.3)).abs()
        };
        let gaps: Vec<f64> = [100u64, 200, 400, 800, 1600]
            .iter()
            .map(|&n| gap(n))
            .collect();
        assert!(gaps.windows(2).all(|w| w[1] < 0.6 * w[0]), "{gaps:?}");
        assert!(gaps[4] < 5e-3, "{gaps:?}");
        assert!(matches!(
            cramer_concentration(&m, 0.0, 0.3, 10),
            Err(Error::PreconditionViolated(_))
        ));
        assert!(matches!(
            cramer_concentration(&m, 1.5, 0.3, 10),
            Err(Error::TargetOutOfRange { .. })
        ));
    }

    #[test]
    fn condition_verdicts() {
        let r1 = condition_c_check(&f1());
        assert_eq!(r1.satisfied, Verdict::Yes);
        assert_eq!(r1.limit_value, LimitValue::NegInfinity);
        let r2 = condition_c_check(&f2());
        assert_eq!(r2.satisfied, Verdict::No);
        let LimitValue::Finite(lim) = r2.limit_value else {
            panic!("{r2:?}")
        };
        assert!(lim > 0.0);
        assert_eq!(condition_c_check(&binomial()).satisfied, Verdict::No);
    }

    #[test]
    fn f2_endpoint_integrals() {
        let opts = QuadOptions::tol(1e-14, 1e-13);
        let i1 = integrate(
            |x: f64| (x + 1.0) / (1.0 + x.powi(4)),
            f64::NEG_INFINITY,
            0.0,
            opts,
        )
        .value;
        let i2 = integrate(
            |x: f64| (x + 1.0) * (-2.0 * x).exp() / (1.0 + x.powi(4)),
            0.0,
            f64::INFINITY,
            opts,
        )
        .value;
        assert_relative_eq!(
            i1,
            (2f64.sqrt() - 1.0) * std::f64::consts::PI / 4.0,
            max_relative = 1e-12
        );
        assert!((i2 - 0.57).abs() < 0.005);
        let crate::dist::DensityFamily::ShiftedDampedExponential { norm } =
            DensitySpec::shifted_damped_exponential().family
        else {
            unreachable!()
        };
        let r = condition_c_check(&f2());
        let rp = r.endpoint_r_prime.unwrap();
        assert_relative_eq!(rp, norm * (-1f64).exp() * (i1 + i2), max_relative = 1e-5);
        let LimitValue::Finite(lim) = r.limit_value else {
            unreachable!()
        };
        let r_end = f2().r(-1.0).unwrap();
        assert_relative_eq!(lim, rp / r_end, max_relative = 1e-6);
    }

    fn golden_max<F: Fn(f64) -> f64>(g: F, mut a: f64, mut b: f64) -> f64 {
        let phi = (5f64.sqrt() - 1.0) / 2.0;
        for _ in 0..300 {
            let c = b - phi * (b - a);
            let d = a + phi * (b - a);
            if g(c) > g(d) {
                b = d;
            } else {
                a = c;
            }
        }
        g(0.5 * (a + b))
    }

    #[test]
    fn legendre_examples() {
        let m = binomial();
        assert_relative_eq!(
            legendre_at(&m, 0.0).unwrap(),
            std::f64::consts::LN_2,
            max_relative = 1e-15
        );
        assert_eq!(legendre_at(&m, 0.5).unwrap(), 0.0);
        for z in [0.0025, 0.05, 0.2, 0.45] {
            let oracle = golden_max(|l| l * z - (0.5 + 0.5 * f64::exp(l)).ln(), -40.0, 0.0);
            assert!(
                (legendre_at(&m, z).unwrap() - oracle).abs() < 1e-9,
                "z = {z}"
            );
        }
        let zs: Vec<f64> = (1..40).map(|i| i as f64 * 0.02).collect();
        let v: Vec<f64> = zs.iter().map(|&z| legendre_at(&m, z).unwrap()).collect();
        assert!(v.windows(3).all(|w| w[0] + w[2] - 2.0 * w[1] > -1e-12));
        assert!(matches!(
            legendre_at(&f1(), 0.1),
            Err(Error::PreconditionViolated(_))
        ));
        let g = build_mgf(&ShockDistribution::Continuous(
            DensitySpec::gamma(2.0, 1.0).unwrap(),
        ))
        .unwrap();
        assert_eq!(legendre_at(&g, 0.0).unwrap(), f64::INFINITY);
        // Gamma(2,1): Λ*(z) = z − 2 − 2 log(z/2)
        assert_relative_eq!(
            legendre_at(&g, 0.5).unwrap(),
            0.5 - 2.0 - 2.0 * (0.25f64).ln(),
            max_relative = 1e-9
        );
    }
}

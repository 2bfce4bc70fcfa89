use super::closed_form::log_survival_closed_form;
use super::{convolution_powers, GridOptions};
use crate::dist::{monotone_scan, DensityFamily, DensitySpec, Direction};
use crate::error::{precondition, Error, Result};
use crate::quad::{integrate_algebraic_left, integrate_with_breaks, QuadOptions};
use crate::special::incomplete_beta;

#[derive(Debug, Clone, PartialEq)]
pub struct RatioBoundsRecord {
    pub n: u64,
    /// c_{n+1,x}/c_{n,x}
    pub ratio: f64,
    /// P[X ≤ 1/n]
    pub p_small: f64,
    /// max over the t-grid of (c_{n+1,t}/c_{n,t})/p_small
    pub implied_upper_const: f64,
    /// ratio/p_small at x
    pub implied_lower_const: f64,
    pub exp_bound_ok: bool,
    /// (t, c_{n+1,t}/c_{n,t}) at t = x/4, x/2, 3x/4, x
    pub pointwise: Vec<(f64, f64)>,
}

/// Ratio c_{n+1,x}/c_{n,x} against P[X ≤ 1/n], plus the exponential decay of
/// c_{n,x−y}/c_{n,x} in y with exponent n/K_x − 1.
pub fn ratio_bounds_check(
    f: &DensitySpec,
    x: f64,
    n: u64,
    k_x: u64,
    grid: &GridOptions,
) -> Result<RatioBoundsRecord> {
    precondition(k_x >= 1 && n >= k_x, || {
        format!("need n >= K_x >= 1 (n = {n}, K_x = {k_x})")
    })?;
    precondition(x > 0.0, || format!("threshold x = {x} must be positive"))?;
    let ts = [0.25 * x, 0.5 * x, 0.75 * x, x];
    let closed: Option<Vec<(f64, f64)>> = ts
        .iter()
        .map(|&t| {
            Some((
                log_survival_closed_form(f, t, n)?,
                log_survival_closed_form(f, t, n + 1)?,
            ))
        })
        .collect();
    let logs = match closed {
        Some(v) => v,
        None => {
            let powers = convolution_powers(f, x, n as usize + 1, grid.cells(x), &grid.convolve)?;
            let (a, b) = (&powers[n as usize], &powers[n as usize + 1]);
            ts.iter()
                .map(|&t| (a.log_mass_to(t), b.log_mass_to(t)))
                .collect()
        }
    };
    let p_small = f.cdf(1.0 / n as f64);
    let pointwise: Vec<(f64, f64)> = ts
        .iter()
        .zip(&logs)
        .map(|(&t, (a, b))| (t, (b - a).exp()))
        .collect();
    let ratio = pointwise[3].1;
    let implied_upper_const = pointwise.iter().map(|p| p.1).fold(0.0, f64::max) / p_small;
    let expo = n as f64 / k_x as f64 - 1.0;
    let at_x = logs[3].0;
    let exp_bound_ok = logs[..3]
        .iter()
        .zip(&ts[..3])
        .all(|((l, _), &t)| l - at_x <= expo * (t / x).ln() + 1e-9);
    Ok(RatioBoundsRecord {
        n,
        ratio,
        p_small,
        implied_upper_const,
        implied_lower_const: ratio / p_small,
        exp_bound_ok,
        pointwise,
    })
}

/// Window l(n) bounding the integration range l(n)/n.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Window {
    Log,
    ScaledLog(f64),
    SqrtLog,
}

impl Window {
    pub fn eval(&self, n: f64) -> f64 {
        match self {
            Window::Log => n.ln(),
            Window::ScaledLog(c) => c * n.ln(),
            Window::SqrtLog => n.ln().max(0.0).sqrt(),
        }
    }

    /// l must diverge and stay below 2x·log n for large n.
    pub fn validate(&self, x: f64) -> Result<()> {
        match self {
            Window::Log if x < 0.5 => Err(Error::WindowInvalid(format!(
                "log n exceeds 2x log n for x = {x}"
            ))),
            Window::ScaledLog(c) if !(*c > 0.0) => {
                Err(Error::WindowInvalid(format!("scale {c} must be positive")))
            }
            Window::ScaledLog(c) if *c > 2.0 * x => Err(Error::WindowInvalid(format!(
                "{c}·log n exceeds 2x log n for x = {x}"
            ))),
            _ => Ok(()),
        }
    }
}

fn damping(alpha: f64, x: f64, n: u64) -> impl Fn(f64) -> f64 {
    let e = alpha * n as f64;
    move |t: f64| (e * (-t / x).ln_1p()).exp()
}

fn equivalence_by_quadrature(f: &DensitySpec, alpha: f64, x: f64, n: u64, upper: f64) -> f64 {
    let damp = damping(alpha, x, n);
    let g = |t: f64| if t <= 0.0 { 0.0 } else { f.pdf(t) * damp(t) };
    let opts = QuadOptions::tol(1e-15, 1e-12);
    match f.head() {
        Some(h) => integrate_algebraic_left(g, 0.0, upper, h.exponent + 1.0, opts).value,
        None => integrate_with_breaks(g, 0.0, upper, &[], opts).value,
    }
}

/// ∫_0^{l(n)/n} f(t)(1 − t/x)^{αn} dt.
pub fn equivalence_integral(
    f: &DensitySpec,
    alpha: f64,
    x: f64,
    n: u64,
    window: Window,
) -> Result<f64> {
    precondition(alpha > 0.0 && x > 0.0 && n >= 2, || {
        "need alpha > 0, x > 0, n >= 2".into()
    })?;
    window.validate(x)?;
    let w = window.eval(n as f64) / n as f64;
    if w > x {
        return Err(Error::WindowInvalid(format!(
            "l(n)/n = {w} exceeds x = {x}"
        )));
    }
    let an = alpha * n as f64;
    match &f.family {
        DensityFamily::PowerLawOnInterval { alpha: a, upper } if w <= *upper => {
            let coef = a / upper.powf(*a);
            Ok(coef * x.powf(*a) * incomplete_beta(w / x, *a, an + 1.0))
        }
        DensityFamily::ConstantNearZero { level, width } if w <= *width => {
            Ok(level * x / (an + 1.0) * -((an + 1.0) * (-w / x).ln_1p()).exp_m1())
        }
        _ => Ok(equivalence_by_quadrature(f, alpha, x, n, w)),
    }
}

/// κ = max{β, x·sup_{[eps,x]} f / F(eps) + 1}, valid once t^{−β}F(t) is non-increasing on (0, eps].
pub fn kappa_exponent(f: &DensitySpec, x: f64, beta: f64, eps: f64) -> Result<f64> {
    precondition(eps > 0.0 && eps <= x, || {
        format!("need 0 < eps <= x (eps = {eps}, x = {x})")
    })?;
    if let Some(a) = f.rv_index_alpha {
        precondition(beta > a, || {
            format!("beta = {beta} must exceed the index {a}")
        })?;
    }
    let scan = monotone_scan(
        |t| t.powf(-beta) * f.cdf(t),
        eps,
        1000,
        Direction::NonIncreasing,
    );
    if let Some((t, drop)) = scan.first_violation {
        return Err(Error::EpsNotValid {
            eps,
            reason: format!("t^-beta F(t) increases near t = {t} (relative {drop})"),
        });
    }
    let points = 2000;
    let sup = (0..=points)
        .map(|i| f.pdf(eps + (x - eps) * i as f64 / points as f64))
        .fold(0.0, f64::max);
    Ok(beta.max(x * sup / f.cdf(eps) + 1.0))
}

/// Samples (c, t) ∈ (0,1) × (0, x] and checks F(ct) ≥ c^κ F(t).
pub fn kappa_verify(f: &DensitySpec, x: f64, kappa: f64, grid_points: usize) -> bool {
    let g = grid_points.max(2);
    (1..g).all(|i| {
        let c = i as f64 / g as f64;
        (1..=g).all(|j| {
            let t = x * j as f64 / g as f64;
            f.cdf(c * t) >= c.powf(kappa) * f.cdf(t) * (1.0 - 1e-12)
        })
    })
}

/// ∫_{1/n}^x y^δ ((x − y)/x)^{n/K − 1} dy.
pub fn delta_integral(x: f64, delta: f64, n: u64, k_x: u64) -> Result<f64> {
    let lo = 1.0 / n as f64;
    precondition(lo < x, || format!("need n > 1/x (n = {n}, x = {x})"))?;
    precondition(k_x >= 1 && delta > 0.0, || {
        "need K_x >= 1 and delta > 0".into()
    })?;
    let b = n as f64 / k_x as f64;
    let g = |y: f64| y.powf(delta) * ((b - 1.0) * (-y / x).ln_1p()).exp();
    let width = x / b;
    let breaks: Vec<f64> = [1.0, 4.0, 16.0, 64.0]
        .iter()
        .map(|m| lo + m * width)
        .filter(|&t| t < x)
        .collect();
    Ok(integrate_with_breaks(g, lo, x, &breaks, QuadOptions::tol(0.0, 1e-12)).value)
}

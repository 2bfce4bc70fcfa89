use crate::discrete::{m_x, DiscreteSurvival, ExactOptions};
use crate::dist::DiscreteSpec;
use crate::error::{precondition, Error, Result};

/// Band for (1/n) log c_{n,x}.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LogBand {
    pub n: u64,
    pub lower: f64,
    pub upper: f64,
    /// tilt that optimizes the Chernoff bound behind the upper edge, when known
    pub optimizer: Option<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BoundCheck {
    pub value: f64,
    pub lower: f64,
    pub upper: f64,
    pub holds: bool,
}

fn require_c2(spec: &DiscreteSpec) -> Result<()> {
    if spec.p0() > 0.0 && spec.x_min() > 0.0 {
        Ok(())
    } else {
        Err(Error::NotClassC2(format!(
            "need p0 > 0 and x_min > 0, got p0 = {}, x_min = {}",
            spec.p0(),
            spec.x_min()
        )))
    }
}

/// log p0 ≤ (1/n) log c_{n,x} ≤ log p0 + C (x/x_min) log n / n.
pub fn ld_bounds_c2(spec: &DiscreteSpec, x: f64, n: u64, big_c: f64) -> Result<LogBand> {
    require_c2(spec)?;
    precondition(x > 0.0, || format!("x = {x} must be positive"))?;
    precondition(big_c > 1.0, || format!("C = {big_c} must exceed 1"))?;
    let (p0, xm) = (spec.p0(), spec.x_min());
    let nf = n as f64;
    if n < 2 || xm * p0 <= x / nf {
        return Err(Error::NTooSmall {
            n,
            reason: format!("x_min * p0 = {} must exceed x/n = {}", xm * p0, x / nf),
        });
    }
    let lp0 = p0.ln();
    let y_n = ((x / nf).ln() - (spec.positive_mass() / p0 * (xm - x / nf)).ln()) / xm;
    Ok(LogBand {
        n,
        lower: lp0,
        upper: lp0 + big_c * (x / xm) * nf.ln() / nf,
        optimizer: Some(y_n),
    })
}

/// log p0 + (c_x/p0) log n/n ≤ (1/n) log c_{n,x} ≤ log p0 + (C_x/p0) log n/n
/// for constants straddling p0·M_x.
pub fn ratio_limit_bounds_c2(
    spec: &DiscreteSpec,
    x: f64,
    n: u64,
    c_lower: f64,
    c_upper: f64,
) -> Result<LogBand> {
    require_c2(spec)?;
    precondition(n >= 2, || "n must be at least 2".into())?;
    let p0 = spec.p0();
    let pivot = p0 * m_x(spec, x)? as f64;
    if !(0.0 < c_lower && c_lower < pivot && pivot < c_upper) {
        return Err(Error::ConstantsOutOfOrder {
            c_lower,
            pivot,
            c_upper,
        });
    }
    let nf = n as f64;
    let step = nf.ln() / nf / p0;
    Ok(LogBand {
        n,
        lower: p0.ln() + c_lower * step,
        upper: p0.ln() + c_upper * step,
        optimizer: None,
    })
}

/// Compares the exact (1/n) log c_{n,x} with a band.
pub fn verify_bounds(
    spec: &DiscreteSpec,
    x: f64,
    band: &LogBand,
    opts: &ExactOptions,
) -> Result<BoundCheck> {
    let value = DiscreteSurvival::new(spec, x, opts)?.log_c(band.n) / band.n as f64;
    Ok(BoundCheck {
        value,
        lower: band.lower,
        upper: band.upper,
        holds: band.lower <= value && value <= band.upper,
    })
}

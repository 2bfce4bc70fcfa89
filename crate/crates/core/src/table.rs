use crate::error::{precondition, Error, Result};
use std::fmt;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Method {
    ExactEnumeration,
    Grid,
    MonteCarlo,
    MixedConditioning,
    ClosedForm,
}

impl fmt::Display for Method {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Method::ExactEnumeration => "exact-enumeration",
            Method::Grid => "grid",
            Method::MonteCarlo => "monte-carlo",
            Method::MixedConditioning => "mixed-conditioning",
            Method::ClosedForm => "closed-form",
        })
    }
}

/// c_0 … c_{n_max} at a fixed threshold, with logs kept separately so that
/// values far below the f64 range stay usable.
#[derive(Debug, Clone, PartialEq)]
pub struct SurvivalTable {
    pub x: f64,
    pub values: Vec<f64>,
    pub log_values: Vec<f64>,
    pub method: Method,
    /// absolute bound on |reported − true| per entry
    pub truncation_error_bound: f64,
}

impl SurvivalTable {
    pub fn from_logs(x: f64, log_values: Vec<f64>, method: Method, error_bound: f64) -> Self {
        let values = log_values.iter().map(|l| l.exp()).collect();
        Self {
            x,
            values,
            log_values,
            method,
            truncation_error_bound: error_bound,
        }
    }

    pub fn from_values(x: f64, values: Vec<f64>, method: Method, error_bound: f64) -> Self {
        let log_values = values.iter().map(|v| v.ln()).collect();
        Self {
            x,
            values,
            log_values,
            method,
            truncation_error_bound: error_bound,
        }
    }

    pub fn n_max(&self) -> usize {
        self.values.len().saturating_sub(1)
    }

    /// Checks the table invariants within `slack` (relative, on logs).
    pub fn check_invariants(&self, p0: Option<f64>, slack: f64) -> Result<()> {
        precondition(!self.values.is_empty(), || "empty table".into())?;
        if (self.values[0] - 1.0).abs() > slack {
            return Err(Error::PreconditionViolated(format!(
                "c_0 = {} differs from 1",
                self.values[0]
            )));
        }
        for (n, w) in self.log_values.windows(2).enumerate() {
            if w[1] > w[0] + slack {
                return Err(Error::PreconditionViolated(format!(
                    "table increases between n = {n} and n = {}",
                    n + 1
                )));
            }
            if let Some(p0) = p0.filter(|&p| p > 0.0) {
                if w[1] < w[0] + p0.ln() - slack {
                    return Err(Error::PreconditionViolated(format!(
                        "c_{} < p0 * c_{n}",
                        n + 1
                    )));
                }
            }
        }
        Ok(())
    }
}

/// r_n = c_{n+1}/c_n; `None` where c_n = 0.
pub fn ratio_sequence(table: &SurvivalTable) -> Result<Vec<Option<f64>>> {
    precondition(table.values.len() >= 2, || {
        "ratio sequence needs at least two entries".into()
    })?;
    Ok(table
        .log_values
        .windows(2)
        .map(|w| {
            if w[0] == f64::NEG_INFINITY {
                None
            } else {
                Some((w[1] - w[0]).exp())
            }
        })
        .collect())
}

/// d_n = n·(r_n − p0)/(p0·M_x), indexed by n; d_0 is undefined.
pub fn rate_law_deviation(table: &SurvivalTable, p0: f64, m_x: u64) -> Result<Vec<Option<f64>>> {
    precondition(m_x >= 1, || "rate law needs M_x >= 1".into())?;
    precondition(p0 > 0.0, || "rate law needs P[X=0] > 0".into())?;
    let r = ratio_sequence(table)?;
    Ok(r.iter()
        .enumerate()
        .map(|(n, r)| match r {
            Some(r) if n > 0 => Some(n as f64 * (r - p0) / (p0 * m_x as f64)),
            _ => None,
        })
        .collect())
}

//! Grid engine for continuous and mixed shock laws.

pub mod bounds;
pub mod closed_form;
mod grid;
pub mod monotone;

pub use bounds::{
    delta_integral, equivalence_integral, kappa_exponent, kappa_verify, ratio_bounds_check,
    RatioBoundsRecord, Window,
};
pub use grid::{convolve_pair, self_convolve, ConvolveOptions, GridFunction};
pub use monotone::{
    monotone_threshold, propagation_check, scaling_criterion_check, MonotoneOptions, MonotoneReport,
};

use crate::discrete::{AtomTupleIndex, ExactOptions};
use crate::dist::{Atom, DensitySpec, ShockDistribution};
use crate::error::{precondition, Error, Result};
use crate::special::{ln_binomial, log_sum_exp};
use crate::table::{Method, SurvivalTable};

#[derive(Debug, Clone, Copy)]
pub struct GridOptions {
    /// grid step; defaults to 1e-4·x
    pub step: Option<f64>,
    /// report the Richardson combination (4 v(h/2) − v(h))/3 instead of v(h/2)
    pub richardson: bool,
    pub convolve: ConvolveOptions,
}

impl Default for GridOptions {
    fn default() -> Self {
        Self {
            step: None,
            richardson: false,
            convolve: ConvolveOptions::default(),
        }
    }
}

impl GridOptions {
    pub fn with_step(step: f64) -> Self {
        Self {
            step: Some(step),
            ..Self::default()
        }
    }

    pub(crate) fn cells(&self, x: f64) -> usize {
        let h = self.step.unwrap_or(1e-4 * x);
        (x / h).round().max(1.0) as usize
    }
}

/// f^{*0}, …, f^{*n_max} on [0, x] with `cells` cells; f^{*0} is a placeholder.
pub(crate) fn convolution_powers(
    f: &DensitySpec,
    x: f64,
    n_max: usize,
    cells: usize,
    opts: &ConvolveOptions,
) -> Result<Vec<GridFunction>> {
    let base = GridFunction::from_density(f, x, cells)?;
    let mut out = vec![base.clone()];
    if n_max >= 1 {
        out.extend(self_convolve(&base, n_max, opts)?);
    }
    Ok(out)
}

/// log c_0 … log c_{n_max} at a single resolution.
pub fn log_survival_on_grid(
    f: &DensitySpec,
    x: f64,
    n_max: usize,
    cells: usize,
    opts: &ConvolveOptions,
) -> Result<Vec<f64>> {
    let powers = convolution_powers(f, x, n_max, cells, opts)?;
    Ok(std::iter::once(0.0)
        .chain(powers.iter().skip(1).map(|g| g.log_mass_to(x)))
        .collect())
}

fn combine_resolutions(coarse: &[f64], fine: &[f64], richardson: bool) -> (Vec<f64>, f64) {
    let mut bound: f64 = 0.0;
    let logs = coarse
        .iter()
        .zip(fine)
        .map(|(&a, &b)| {
            let (va, vb) = (a.exp(), b.exp());
            bound = bound.max((va - vb).abs());
            if richardson {
                let r = (4.0 * vb - va) / 3.0;
                if r > 0.0 {
                    return r.ln();
                }
            }
            b
        })
        .collect();
    (logs, bound)
}

/// c_{n,x} from the grid engine; the error bound is the change under step halving.
pub fn survival_numeric(
    f: &DensitySpec,
    x: f64,
    n_max: usize,
    opts: &GridOptions,
) -> Result<SurvivalTable> {
    precondition(x > 0.0, || format!("threshold x = {x} must be positive"))?;
    let cells = opts.cells(x);
    let coarse = log_survival_on_grid(f, x, n_max, cells, &opts.convolve)?;
    let fine = log_survival_on_grid(f, x, n_max, 2 * cells, &opts.convolve)?;
    let (logs, bound) = combine_resolutions(&coarse, &fine, opts.richardson);
    Ok(SurvivalTable::from_logs(x, logs, Method::Grid, bound))
}

fn mixed_logs(
    index: &AtomTupleIndex,
    continuous: &DensitySpec,
    x: f64,
    n_max: usize,
    cells: usize,
    ln_zero: f64,
    ln_cont: f64,
    opts: &ConvolveOptions,
) -> Result<Vec<f64>> {
    let powers = convolution_powers(continuous, x, n_max, cells, opts)?;
    let cums: Vec<Vec<f64>> = powers.iter().map(|g| g.cumulative_remainder()).collect();
    // log G_j(y) for every residual y = x − (atom sum)
    let ln_g = |j: usize, y: f64| -> f64 {
        if y < 0.0 {
            f64::NEG_INFINITY
        } else if j == 0 {
            0.0
        } else {
            powers[j].log_mass_to_with(&cums[j], y)
        }
    };
    let mut out = Vec::with_capacity(n_max + 1);
    for n in 0..=n_max {
        let mut terms = Vec::new();
        for (k, level) in index.levels.iter().enumerate().take(n + 1) {
            let m = n - k;
            for &(s, w) in level {
                let y = x - s;
                // remaining m draws are zero atoms or continuous
                let inner: Vec<f64> = (0..=m)
                    .map(|j| {
                        let zeros = (m - j) as f64;
                        let lz = if zeros == 0.0 { 0.0 } else { zeros * ln_zero };
                        let lc = if j == 0 { 0.0 } else { j as f64 * ln_cont };
                        ln_binomial(m as u64, j as u64) + lz + lc + ln_g(j, y)
                    })
                    .collect();
                terms.push(ln_binomial(n as u64, k as u64) + w.ln() + log_sum_exp(&inner));
            }
        }
        out.push(log_sum_exp(&terms));
    }
    Ok(out)
}

/// c_{n,x} for a mixture by conditioning on which draws hit positive atoms.
pub fn survival_mixed(
    d: &ShockDistribution,
    x: f64,
    n_max: usize,
    grid: &GridOptions,
    exact: &ExactOptions,
) -> Result<SurvivalTable> {
    let ShockDistribution::Mixed {
        continuous,
        discrete,
        weight_cont,
    } = d
    else {
        return Err(Error::PreconditionViolated(
            "survival_mixed needs a mixed law".into(),
        ));
    };
    precondition(x > 0.0, || format!("threshold x = {x} must be positive"))?;
    let w = *weight_cont;
    let trunc = discrete.truncated(exact.tail_tol)?;
    let atoms: Vec<Atom> = trunc
        .atoms
        .iter()
        .map(|a| Atom {
            value: a.value,
            prob: (1.0 - w) * a.prob,
        })
        .collect();
    let index = AtomTupleIndex::build(&atoms, x, exact.node_budget)?;
    let ln_zero = ((1.0 - w) * discrete.p0()).ln();
    let ln_cont = w.ln();
    let cells = grid.cells(x);
    let coarse = mixed_logs(
        &index,
        continuous,
        x,
        n_max,
        cells,
        ln_zero,
        ln_cont,
        &grid.convolve,
    )?;
    let fine = mixed_logs(
        &index,
        continuous,
        x,
        n_max,
        2 * cells,
        ln_zero,
        ln_cont,
        &grid.convolve,
    )?;
    let (logs, bound) = combine_resolutions(&coarse, &fine, grid.richardson);
    let tail = n_max as f64 * (1.0 - w) * trunc.tail_mass;
    Ok(SurvivalTable::from_logs(
        x,
        logs,
        Method::MixedConditioning,
        bound + tail,
    ))
}

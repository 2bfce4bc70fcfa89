//! Dispatch from experiment entries to the library engines.

use crate::config::{Engine, ExperimentSpec, MethodName, Options, Quantity, Task, WindowName};
use crate::error::{CliError, Context};
use crate::output::{Cell, Table};
use shockratio::convolve::closed_form::log_survival_closed_form;
use shockratio::convolve::{
    equivalence_integral, monotone_threshold, ratio_bounds_check, survival_mixed, survival_numeric,
    GridOptions, MonotoneOptions, Window,
};
use shockratio::discrete::{m_x, survival_exact, DiscreteSurvival, ExactOptions};
use shockratio::dist::{classify, ClassLabel, DensitySpec, DiscreteSpec, ShockDistribution};
use shockratio::ldp::{
    build_mgf, condition_c_check, cramer, ld_bounds_c2, ratio_limit_bounds_c2, verify_bounds,
    LimitValue, Verdict,
};
use shockratio::mc::{choose_tilt, simulate_survival, simulate_survival_tilted};
use std::collections::BTreeMap;

pub const DEFAULT_SEED: u64 = 1;
pub const DEFAULT_SAMPLES: u64 = 100_000;

/// A resolved experiment: parsed law, schedule and effective seed.
#[derive(Debug, Clone)]
pub struct Prepared {
    pub spec: ExperimentSpec,
    pub dist: ShockDistribution,
    pub ns: Vec<u64>,
    pub seed: u64,
}

#[derive(Debug, Clone)]
pub struct Outcome {
    pub table: Table,
    pub warnings: Vec<String>,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Point {
    pub log_c: f64,
    pub bound: f64,
    pub stderr: Option<f64>,
    pub method: &'static str,
}

fn unsupported(msg: impl Into<String>) -> CliError {
    CliError::UnsupportedCombination(msg.into())
}

fn exact_opts(o: &Options) -> ExactOptions {
    let mut e = ExactOptions::default();
    if let Some(t) = o.tail_tol {
        e.tail_tol = t;
    }
    if let Some(b) = o.node_budget {
        e.node_budget = b;
    }
    e
}

fn grid_opts(o: &Options) -> GridOptions {
    GridOptions {
        step: o.grid_step,
        richardson: o.richardson,
        ..GridOptions::default()
    }
}

fn window(o: &Options) -> Window {
    match (o.window.unwrap_or(WindowName::Log), o.window_scale) {
        (WindowName::Log, Some(c)) => Window::ScaledLog(c),
        (WindowName::Log, None) => Window::Log,
        (WindowName::SqrtLog, _) => Window::SqrtLog,
    }
}

fn discrete_c2(d: &ShockDistribution, what: &str) -> Result<DiscreteSpec, CliError> {
    match d {
        ShockDistribution::Discrete(s) if s.p0() > 0.0 && s.x_min() > 0.0 => Ok(s.clone()),
        _ => Err(unsupported(format!(
            "{what} needs a discrete law with mass at 0 and atoms bounded away from 0"
        ))),
    }
}

fn nonnegative_density(d: &ShockDistribution, what: &str) -> Result<DensitySpec, CliError> {
    match d {
        ShockDistribution::Continuous(f) if f.is_nonnegative_law() => Ok(f.clone()),
        _ => Err(unsupported(format!(
            "{what} needs a continuous law on [0, inf)"
        ))),
    }
}

/// Engine picked for `auto`: enumeration or closed forms when available, else the grid.
pub fn resolve_engine(d: &ShockDistribution, x: f64, engine: Engine) -> Result<Engine, CliError> {
    if engine != Engine::Auto {
        return Ok(engine);
    }
    Ok(match d {
        ShockDistribution::Discrete(_) => Engine::Exact,
        ShockDistribution::Continuous(f) => {
            if log_survival_closed_form(f, x, 1).is_some() {
                Engine::Exact
            } else if f.is_nonnegative_law() {
                Engine::Grid
            } else {
                return Err(unsupported(
                    "no deterministic engine for this real-supported density; set options.engine = \"mc\"",
                ));
            }
        }
        ShockDistribution::Mixed { .. } => Engine::Grid,
    })
}

fn check_engine(d: &ShockDistribution, x: f64, engine: Engine) -> Result<(), CliError> {
    match (resolve_engine(d, x, engine)?, d) {
        (Engine::Exact, ShockDistribution::Mixed { .. }) => {
            Err(unsupported("exact engine does not cover mixed laws"))
        }
        (Engine::Exact, ShockDistribution::Continuous(f))
            if log_survival_closed_form(f, x, 1).is_none() =>
        {
            Err(unsupported(
                "no closed form for this density at this threshold",
            ))
        }
        (Engine::Grid, ShockDistribution::Discrete(_)) => {
            Err(unsupported("grid engine needs a density"))
        }
        (Engine::Grid, ShockDistribution::Continuous(f)) if !f.is_nonnegative_law() => {
            Err(unsupported("grid engine needs a density on [0, inf)"))
        }
        (Engine::Grid, ShockDistribution::Mixed { continuous, .. })
            if !continuous.is_nonnegative_law() =>
        {
            Err(unsupported("grid engine needs a density on [0, inf)"))
        }
        _ => Ok(()),
    }
}

fn mc_lambda(p: &Prepared, n: u64, warnings: &mut Vec<String>) -> f64 {
    if let Some(l) = p.spec.options.lambda {
        return l;
    }
    let x = p.spec.x;
    match build_mgf(&p.dist) {
        Ok(m) if x / n as f64 <= m.mean => match choose_tilt(&m, x, n) {
            Ok(t) => {
                if let Some(w) = t.warning {
                    warnings.push(format!("n = {n}: {w}"));
                }
                t.lambda
            }
            Err(_) => 0.0,
        },
        _ => 0.0,
    }
}

/// log c_{n,x} for every n in `ns` (sorted, distinct).
pub fn survival_points(
    p: &Prepared,
    ns: &[u64],
    engine: Engine,
    warnings: &mut Vec<String>,
) -> Result<Vec<Point>, CliError> {
    let x = p.spec.x;
    let o = &p.spec.options;
    let engine = resolve_engine(&p.dist, x, engine)?;
    check_engine(&p.dist, x, engine)?;
    let n_max = *ns.last().expect("non-empty schedule") as usize;
    let pick = |t: shockratio::table::SurvivalTable, method: &'static str| -> Vec<Point> {
        ns.iter()
            .map(|&n| Point {
                log_c: t.log_values[n as usize],
                bound: t.truncation_error_bound,
                stderr: None,
                method,
            })
            .collect()
    };
    let pts = match (engine, &p.dist) {
        (Engine::Exact, ShockDistribution::Discrete(s)) => {
            if s.x_min() > 0.0 {
                let ds = DiscreteSurvival::new(s, x, &exact_opts(o))
                    .context(|| "exact enumeration".into())?;
                ns.iter()
                    .map(|&n| Point {
                        log_c: ds.log_c(n),
                        bound: n as f64 * ds.tail_mass,
                        stderr: None,
                        method: "exact",
                    })
                    .collect()
            } else {
                let t = survival_exact(s, x, n_max, &exact_opts(o))
                    .context(|| "lattice recursion".into())?;
                pick(t, "exact")
            }
        }
        (Engine::Exact, ShockDistribution::Continuous(f)) => ns
            .iter()
            .map(|&n| Point {
                log_c: log_survival_closed_form(f, x, n).expect("checked"),
                bound: 0.0,
                stderr: None,
                method: "closed-form",
            })
            .collect(),
        (Engine::Grid, ShockDistribution::Continuous(f)) => pick(
            survival_numeric(f, x, n_max, &grid_opts(o)).context(|| "grid convolution".into())?,
            "grid",
        ),
        (Engine::Grid, d @ ShockDistribution::Mixed { .. }) => pick(
            survival_mixed(d, x, n_max, &grid_opts(o), &exact_opts(o))
                .context(|| "mixed conditioning".into())?,
            "mixed-conditioning",
        ),
        (Engine::Mc, d) => {
            let samples = o.samples.unwrap_or(DEFAULT_SAMPLES);
            let mut out = Vec::with_capacity(ns.len());
            for &n in ns {
                let lambda = mc_lambda(p, n, warnings);
                let seed = p.seed.wrapping_add(n);
                let est = if lambda < 0.0 {
                    simulate_survival_tilted(d, x, n, samples, seed, lambda)
                } else {
                    simulate_survival(d, x, n, samples, seed)
                }
                .context(|| format!("monte carlo at n = {n}"))?;
                out.push(Point {
                    log_c: est.estimate.ln(),
                    bound: 0.0,
                    stderr: Some(est.stderr),
                    method: if lambda < 0.0 { "mc-tilted" } else { "mc" },
                });
            }
            out
        }
        _ => return Err(unsupported("engine does not cover this law")),
    };
    let tol = o.error_tol.unwrap_or(1e-6);
    if let Some(pt) = pts.iter().find(|pt| pt.bound > tol) {
        warnings.push(format!(
            "{} error bound {:e} exceeds {tol:e}",
            pt.method, pt.bound
        ));
    }
    Ok(pts)
}

/// Points at n and n + 1 for every scheduled n.
fn paired_points(
    p: &Prepared,
    engine: Engine,
    warnings: &mut Vec<String>,
) -> Result<BTreeMap<u64, Point>, CliError> {
    let mut all: Vec<u64> = p.ns.iter().flat_map(|&n| [n, n + 1]).collect();
    all.sort_unstable();
    all.dedup();
    let pts = survival_points(p, &all, engine, warnings)?;
    Ok(all.into_iter().zip(pts).collect())
}

fn verdict_name(v: Verdict) -> &'static str {
    match v {
        Verdict::Yes => "yes",
        Verdict::No => "no",
        Verdict::Undetermined => "undetermined",
    }
}

fn limit_text(l: LimitValue) -> String {
    use crate::output::format_f64;
    match l {
        LimitValue::Finite(v) => format_f64(v),
        LimitValue::NegInfinity => "-inf".into(),
        LimitValue::Bracket(a, b) => format!("[{} {}]", format_f64(a), format_f64(b)),
    }
}

fn task_classify(p: &Prepared) -> Result<Outcome, CliError> {
    let c = classify(&p.dist).context(|| "classification".into())?;
    let label = if c.label == ClassLabel::Unclassified && !p.dist.is_nonnegative() {
        format!("{} (real-supported law)", c.label)
    } else {
        c.label.to_string()
    };
    let mut warnings = Vec::new();
    let (verdict, limit) = match build_mgf(&p.dist) {
        Ok(m) => {
            let r = condition_c_check(&m);
            (
                verdict_name(r.satisfied).to_string(),
                limit_text(r.limit_value),
            )
        }
        Err(e) => {
            warnings.push(format!("moment generating function unavailable: {e}"));
            ("undetermined".into(), String::new())
        }
    };
    let mut t = Table::new(&["id", "label", "condition_c", "condition_limit", "evidence"]);
    t.push(vec![
        p.spec.id.clone().into(),
        label.into(),
        verdict.into(),
        limit.into(),
        c.evidence.join("; ").into(),
    ]);
    Ok(Outcome { table: t, warnings })
}

fn task_survival(p: &Prepared) -> Result<Outcome, CliError> {
    let mut warnings = Vec::new();
    let pts = survival_points(p, &p.ns, p.spec.options.engine, &mut warnings)?;
    let mut t = Table::new(&["n", "c_n", "log_c_n", "error_bound", "stderr", "method"]);
    for (&n, pt) in p.ns.iter().zip(&pts) {
        t.push(vec![
            n.into(),
            pt.log_c.exp().into(),
            pt.log_c.into(),
            pt.bound.into(),
            pt.stderr.into(),
            pt.method.into(),
        ]);
    }
    Ok(Outcome { table: t, warnings })
}

fn task_ratio(p: &Prepared) -> Result<Outcome, CliError> {
    let mut warnings = Vec::new();
    let pts = paired_points(p, p.spec.options.engine, &mut warnings)?;
    let mut t = Table::new(&["n", "c_n", "c_n_plus_1", "ratio"]);
    for &n in &p.ns {
        let (a, b) = (pts[&n].log_c, pts[&(n + 1)].log_c);
        t.push(vec![
            n.into(),
            a.exp().into(),
            b.exp().into(),
            (b - a).exp().into(),
        ]);
    }
    Ok(Outcome { table: t, warnings })
}

fn task_rate_law(p: &Prepared) -> Result<Outcome, CliError> {
    let s = discrete_c2(&p.dist, "the rate law")?;
    let x = p.spec.x;
    let mx = m_x(&s, x).context(|| "M_x".into())?;
    let ds = DiscreteSurvival::new(&s, x, &exact_opts(&p.spec.options))
        .context(|| "exact enumeration".into())?;
    let mut t = Table::new(&["n", "c_n", "ratio", "deviation"]);
    for &n in &p.ns {
        let excess = ds.ratio_excess(n).expect("p0 > 0");
        let dev = ds
            .rate_law_deviation_at(n, mx)
            .context(|| format!("rate law at n = {n}"))?;
        t.push(vec![
            n.into(),
            ds.log_c(n).exp().into(),
            (s.p0() + excess).into(),
            dev.into(),
        ]);
    }
    Ok(Outcome {
        table: t,
        warnings: Vec::new(),
    })
}

fn task_monotone(p: &Prepared) -> Result<Outcome, CliError> {
    let f = nonnegative_density(&p.dist, "the monotonicity scan")?;
    let cells = p
        .spec
        .options
        .monotone_cells
        .unwrap_or(MonotoneOptions::default().cells);
    let cap = *p.ns.last().expect("non-empty") as usize;
    let r = monotone_threshold(&f, p.spec.x, cap, &MonotoneOptions { cells })
        .context(|| "monotone scan".into())?;
    let step = p.spec.x / cells as f64;
    let mut t = Table::new(&[
        "n",
        "monotone",
        "violation_t",
        "violation_magnitude",
        "threshold_n",
    ]);
    for &n in &p.ns {
        let v = r.violations[n as usize - 1];
        t.push(vec![
            n.into(),
            v.is_none().into(),
            v.map(|v| v.index as f64 * step).into(),
            v.map(|v| v.magnitude).into(),
            r.threshold_n.map(|k| k as u64).into(),
        ]);
    }
    let mut warnings = Vec::new();
    if r.threshold_n.is_none() {
        warnings.push(format!("no monotonicity threshold found up to n = {cap}"));
    }
    Ok(Outcome { table: t, warnings })
}

fn rv_alpha(f: &DensitySpec) -> Result<f64, CliError> {
    f.rv_index_alpha.ok_or_else(|| {
        unsupported("the equivalence integral needs a declared regular-variation index")
    })
}

fn task_equivalence(p: &Prepared) -> Result<Outcome, CliError> {
    let f = nonnegative_density(&p.dist, "the equivalence integral")?;
    let alpha = rv_alpha(&f)?;
    let mut warnings = Vec::new();
    let pts = paired_points(p, p.spec.options.engine, &mut warnings)?;
    let w = window(&p.spec.options);
    let mut t = Table::new(&["n", "ratio", "equivalence_integral", "quotient"]);
    for &n in &p.ns {
        let ratio = (pts[&(n + 1)].log_c - pts[&n].log_c).exp();
        let integral = equivalence_integral(&f, alpha, p.spec.x, n, w)
            .context(|| format!("equivalence integral at n = {n}"))?;
        t.push(vec![
            n.into(),
            ratio.into(),
            integral.into(),
            (ratio / integral).into(),
        ]);
    }
    Ok(Outcome { table: t, warnings })
}

fn task_cramer(p: &Prepared) -> Result<Outcome, CliError> {
    let m = build_mgf(&p.dist).context(|| "moment generating function".into())?;
    let tilt = cramer(&m).context(|| "optimal tilt".into())?;
    let mut t = Table::new(&[
        "n",
        "asymptotic",
        "log_asymptotic",
        "ratio_limit",
        "h_inf",
        "ld_rate",
        "sigma_bar",
    ]);
    for &n in &p.ns {
        let lp = tilt.log_prefactor(n, p.spec.x);
        t.push(vec![
            n.into(),
            lp.exp().into(),
            lp.into(),
            tilt.ratio_limit().into(),
            tilt.h_inf.into(),
            tilt.ld_rate.into(),
            tilt.sigma_bar.into(),
        ]);
    }
    Ok(Outcome {
        table: t,
        warnings: Vec::new(),
    })
}

fn task_bounds(p: &Prepared) -> Result<Outcome, CliError> {
    let o = &p.spec.options;
    let x = p.spec.x;
    let mut warnings = Vec::new();
    match &p.dist {
        ShockDistribution::Discrete(_) => {
            let s = discrete_c2(&p.dist, "the bound sandwiches")?;
            let pivot = s.p0() * m_x(&s, x).context(|| "M_x".into())? as f64;
            let big_c = o.big_c.unwrap_or(1.1);
            let (cl, cu) = (
                o.c_lower.unwrap_or(0.9 * pivot),
                o.c_upper.unwrap_or(1.1 * pivot),
            );
            let eo = exact_opts(o);
            let mut t = Table::new(&[
                "n",
                "value",
                "ld_lower",
                "ld_upper",
                "ld_holds",
                "ratio_lower",
                "ratio_upper",
                "ratio_holds",
                "nested",
            ]);
            for &n in &p.ns {
                let ld = match ld_bounds_c2(&s, x, n, big_c) {
                    Ok(b) => Some(b),
                    Err(shockratio::Error::NTooSmall { reason, .. }) => {
                        warnings.push(format!("n = {n}: large-deviation band skipped ({reason})"));
                        None
                    }
                    Err(e) => return Err(e).context(|| format!("large-deviation band at n = {n}")),
                };
                let rb = ratio_limit_bounds_c2(&s, x, n, cl, cu)
                    .context(|| format!("ratio band at n = {n}"))?;
                let chk =
                    verify_bounds(&s, x, &rb, &eo).context(|| format!("exact value at n = {n}"))?;
                let v = chk.value;
                t.push(vec![
                    n.into(),
                    v.into(),
                    ld.map(|b| b.lower).into(),
                    ld.map(|b| b.upper).into(),
                    ld.map(|b| b.lower <= v && v <= b.upper).into(),
                    rb.lower.into(),
                    rb.upper.into(),
                    chk.holds.into(),
                    ld.map(|b| b.lower < rb.lower && rb.upper < b.upper).into(),
                ]);
            }
            Ok(Outcome { table: t, warnings })
        }
        ShockDistribution::Continuous(_) => {
            let f = nonnegative_density(&p.dist, "the ratio bounds")?;
            let k_x = o.k_x.ok_or_else(|| {
                CliError::Parse(format!(
                    "{}: bounds on a density need options.k_x",
                    p.spec.id
                ))
            })?;
            let mut t = Table::new(&[
                "n",
                "ratio",
                "p_small",
                "implied_lower_const",
                "implied_upper_const",
                "exp_bound_ok",
            ]);
            for &n in &p.ns {
                let r = ratio_bounds_check(&f, x, n, k_x, &grid_opts(o))
                    .context(|| format!("ratio bounds at n = {n}"))?;
                t.push(vec![
                    n.into(),
                    r.ratio.into(),
                    r.p_small.into(),
                    r.implied_lower_const.into(),
                    r.implied_upper_const.into(),
                    r.exp_bound_ok.into(),
                ]);
            }
            Ok(Outcome { table: t, warnings })
        }
        ShockDistribution::Mixed { .. } => Err(unsupported(
            "bounds are implemented for discrete laws and densities",
        )),
    }
}

fn task_mc_check(p: &Prepared) -> Result<Outcome, CliError> {
    let mut warnings = Vec::new();
    let reference_engine = match p.spec.options.engine {
        Engine::Mc => {
            return Err(unsupported(
                "mc-check needs a deterministic reference engine",
            ))
        }
        e => e,
    };
    let reference = survival_points(p, &p.ns, reference_engine, &mut warnings)?;
    let mc = survival_points(p, &p.ns, Engine::Mc, &mut warnings)?;
    let mut t = Table::new(&[
        "n",
        "reference",
        "reference_method",
        "mc_estimate",
        "mc_stderr",
        "mc_method",
        "z_score",
    ]);
    for ((&n, r), m) in p.ns.iter().zip(&reference).zip(&mc) {
        let (rv, mv, se) = (r.log_c.exp(), m.log_c.exp(), m.stderr.unwrap_or(0.0));
        let z = if se > 0.0 { (mv - rv) / se } else { f64::NAN };
        if z.abs() > 4.0 {
            warnings.push(format!(
                "n = {n}: monte carlo is {z:.2} standard errors from the reference"
            ));
        }
        t.push(vec![
            n.into(),
            rv.into(),
            r.method.into(),
            mv.into(),
            se.into(),
            m.method.into(),
            z.into(),
        ]);
    }
    Ok(Outcome { table: t, warnings })
}

/// Rejects (task, law) pairs no engine handles, without running anything.
pub fn check_task(p: &Prepared) -> Result<(), CliError> {
    let task = p
        .spec
        .task
        .ok_or_else(|| CliError::Parse(format!("{}: `task` is required for run", p.spec.id)))?;
    let x = p.spec.x;
    let engine = p.spec.options.engine;
    match task {
        Task::Classify => Ok(()),
        Task::Survival | Task::Ratio => check_engine(&p.dist, x, engine),
        Task::RateLaw => discrete_c2(&p.dist, "the rate law").map(|_| ()),
        Task::Monotone => nonnegative_density(&p.dist, "the monotonicity scan").map(|_| ()),
        Task::Equivalence => {
            let f = nonnegative_density(&p.dist, "the equivalence integral")?;
            rv_alpha(&f)?;
            check_engine(&p.dist, x, engine)
        }
        Task::Cramer => {
            if p.dist.is_nonnegative() || !p.dist.has_absolutely_continuous_part() {
                Err(unsupported(
                    "the Cramer asymptotic needs a law with negative values and an absolutely continuous part",
                ))
            } else {
                Ok(())
            }
        }
        Task::Bounds => match &p.dist {
            ShockDistribution::Discrete(_) => {
                discrete_c2(&p.dist, "the bound sandwiches").map(|_| ())
            }
            ShockDistribution::Continuous(_) => {
                nonnegative_density(&p.dist, "the ratio bounds")?;
                if p.spec.options.k_x.is_none() {
                    return Err(CliError::Parse(format!(
                        "{}: bounds on a density need options.k_x",
                        p.spec.id
                    )));
                }
                Ok(())
            }
            ShockDistribution::Mixed { .. } => Err(unsupported(
                "bounds are implemented for discrete laws and densities",
            )),
        },
        Task::McCheck => {
            if engine == Engine::Mc {
                return Err(unsupported(
                    "mc-check needs a deterministic reference engine",
                ));
            }
            check_engine(&p.dist, x, engine)
        }
    }
}

pub fn run_task(p: &Prepared) -> Result<Outcome, CliError> {
    check_task(p)?;
    match p.spec.task.expect("checked") {
        Task::Classify => task_classify(p),
        Task::Survival => task_survival(p),
        Task::Ratio => task_ratio(p),
        Task::RateLaw => task_rate_law(p),
        Task::Monotone => task_monotone(p),
        Task::Equivalence => task_equivalence(p),
        Task::Cramer => task_cramer(p),
        Task::Bounds => task_bounds(p),
        Task::McCheck => task_mc_check(p),
    }
}

/// Per-n log value (of c_n or of the ratio) and Monte Carlo standard error.
type Column = Vec<(f64, Option<f64>)>;

fn method_column(
    p: &Prepared,
    m: MethodName,
    q: Quantity,
    warnings: &mut Vec<String>,
) -> Result<Column, CliError> {
    let x = p.spec.x;
    let from_points = |pts: BTreeMap<u64, Point>| -> Column {
        p.ns.iter()
            .map(|&n| match q {
                Quantity::Survival => (pts[&n].log_c, pts[&n].stderr),
                Quantity::Ratio => {
                    let (a, b) = (&pts[&n], &pts[&(n + 1)]);
                    let se = match (a.stderr, b.stderr) {
                        (Some(sa), Some(sb)) => {
                            let r = (b.log_c - a.log_c).exp();
                            Some(
                                r * ((sa / a.log_c.exp()).powi(2) + (sb / b.log_c.exp()).powi(2))
                                    .sqrt(),
                            )
                        }
                        _ => None,
                    };
                    (b.log_c - a.log_c, se)
                }
            })
            .collect()
    };
    let engine_points =
        |e: Engine, warnings: &mut Vec<String>| -> Result<BTreeMap<u64, Point>, CliError> {
            match q {
                Quantity::Survival => {
                    let pts = survival_points(p, &p.ns, e, warnings)?;
                    Ok(p.ns.iter().copied().zip(pts).collect())
                }
                Quantity::Ratio => paired_points(p, e, warnings),
            }
        };
    match m {
        MethodName::Exact => Ok(from_points(engine_points(Engine::Exact, warnings)?)),
        MethodName::Grid => Ok(from_points(engine_points(Engine::Grid, warnings)?)),
        MethodName::Mc => Ok(from_points(engine_points(Engine::Mc, warnings)?)),
        MethodName::CramerAsymptotic => {
            let tilt = build_mgf(&p.dist)
                .and_then(|m| cramer(&m))
                .context(|| "cramer asymptotic".into())?;
            Ok(p.ns
                .iter()
                .map(|&n| match q {
                    Quantity::Survival => (tilt.log_prefactor(n, x), None),
                    Quantity::Ratio => (
                        tilt.log_prefactor(n + 1, x) - tilt.log_prefactor(n, x),
                        None,
                    ),
                })
                .collect())
        }
        MethodName::EquivalenceIntegral => {
            if q != Quantity::Ratio {
                return Err(unsupported(
                    "the equivalence integral approximates ratios; set quantity = \"ratio\"",
                ));
            }
            let f = nonnegative_density(&p.dist, "the equivalence integral")?;
            let alpha = rv_alpha(&f)?;
            let w = window(&p.spec.options);
            p.ns.iter()
                .map(|&n| {
                    equivalence_integral(&f, alpha, x, n, w)
                        .map(|v| (v.ln(), None))
                        .context(|| format!("equivalence integral at n = {n}"))
                })
                .collect()
        }
    }
}

/// Side-by-side values of two or more methods with pairwise differences.
pub fn run_compare(p: &Prepared) -> Result<Outcome, CliError> {
    let methods = &p.spec.methods;
    if methods.len() < 2 {
        return Err(unsupported(format!(
            "{}: compare needs at least two methods",
            p.spec.id
        )));
    }
    if methods
        .iter()
        .enumerate()
        .any(|(i, m)| methods[..i].contains(m))
    {
        return Err(CliError::Parse(format!(
            "{}: duplicate method in compare",
            p.spec.id
        )));
    }
    let mut warnings = Vec::new();
    let cols: Vec<Column> = methods
        .iter()
        .map(|&m| method_column(p, m, p.spec.quantity, &mut warnings))
        .collect::<Result<_, _>>()?;
    let mut header: Vec<String> = vec!["n".into()];
    header.extend(methods.iter().map(|m| m.name().to_string()));
    let has_mc = methods.contains(&MethodName::Mc);
    if has_mc {
        header.push("mc_stderr".into());
    }
    let mut pairs = Vec::new();
    for i in 0..methods.len() {
        for j in i + 1..methods.len() {
            pairs.push((i, j));
            header.push(format!(
                "reldiff_{}_{}",
                methods[i].name(),
                methods[j].name()
            ));
            header.push(format!(
                "logdiff_{}_{}",
                methods[i].name(),
                methods[j].name()
            ));
        }
    }
    let mut t = Table {
        header,
        rows: Vec::new(),
    };
    let mc_idx = methods.iter().position(|&m| m == MethodName::Mc);
    for (k, &n) in p.ns.iter().enumerate() {
        let mut row: Vec<Cell> = vec![n.into()];
        row.extend(cols.iter().map(|c| Cell::from(c[k].0.exp())));
        if let Some(i) = mc_idx {
            row.push(cols[i][k].1.into());
        }
        for &(i, j) in &pairs {
            let d = cols[i][k].0 - cols[j][k].0;
            row.push(d.exp_m1().into());
            row.push(d.into());
        }
        t.rows.push(row);
    }
    Ok(Outcome { table: t, warnings })
}

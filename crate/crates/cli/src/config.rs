//! Experiment files: TOML with one `[[experiment]]` table per run.

use crate::error::CliError;
use serde::Deserialize;
use shockratio::dist::{
    Atom, DensitySpec, DiscreteSpec, ShockDistribution, TabulatedDensity, TailGenerator,
};
use std::path::Path;

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentFile {
    #[serde(rename = "experiment")]
    pub experiments: Vec<ExperimentSpec>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Task {
    Classify,
    Survival,
    Ratio,
    RateLaw,
    Monotone,
    Equivalence,
    Cramer,
    Bounds,
    McCheck,
}

impl Task {
    pub fn name(self) -> &'static str {
        match self {
            Task::Classify => "classify",
            Task::Survival => "survival",
            Task::Ratio => "ratio",
            Task::RateLaw => "rate-law",
            Task::Monotone => "monotone",
            Task::Equivalence => "equivalence",
            Task::Cramer => "cramer",
            Task::Bounds => "bounds",
            Task::McCheck => "mc-check",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum MethodName {
    Exact,
    Grid,
    Mc,
    CramerAsymptotic,
    EquivalenceIntegral,
}

impl MethodName {
    pub fn name(self) -> &'static str {
        match self {
            MethodName::Exact => "exact",
            MethodName::Grid => "grid",
            MethodName::Mc => "mc",
            MethodName::CramerAsymptotic => "cramer-asymptotic",
            MethodName::EquivalenceIntegral => "equivalence-integral",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Engine {
    #[default]
    Auto,
    Exact,
    Grid,
    Mc,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Quantity {
    #[default]
    Survival,
    Ratio,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum WindowName {
    Log,
    SqrtLog,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentSpec {
    pub id: String,
    pub task: Option<Task>,
    pub x: f64,
    pub distribution: DistributionConfig,
    pub n_schedule: ScheduleConfig,
    #[serde(default)]
    pub methods: Vec<MethodName>,
    #[serde(default)]
    pub quantity: Quantity,
    #[serde(default)]
    pub options: Options,
    #[serde(default)]
    pub output: OutputConfig,
}

#[derive(Debug, Clone, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OutputConfig {
    /// CSV file name relative to the output directory; defaults to `<id>.csv`
    pub csv: Option<String>,
}

#[derive(Debug, Clone, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Options {
    #[serde(default)]
    pub engine: Engine,
    pub grid_step: Option<f64>,
    #[serde(default)]
    pub richardson: bool,
    pub tail_tol: Option<f64>,
    pub node_budget: Option<usize>,
    pub seed: Option<u64>,
    pub samples: Option<u64>,
    /// fixed tilt for Monte Carlo; chosen from x/n when absent
    pub lambda: Option<f64>,
    pub window: Option<WindowName>,
    /// turns the log window into c·log n
    pub window_scale: Option<f64>,
    pub monotone_cells: Option<usize>,
    pub k_x: Option<u64>,
    pub big_c: Option<f64>,
    pub c_lower: Option<f64>,
    pub c_upper: Option<f64>,
    /// largest acceptable truncation/discretisation bound before a warning
    pub error_tol: Option<f64>,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GeometricRange {
    pub start: u64,
    pub stop: u64,
    pub factor: f64,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LinearRange {
    pub start: u64,
    pub stop: u64,
    #[serde(default = "one")]
    pub step: u64,
}

fn one() -> u64 {
    1
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScheduleConfig {
    pub list: Option<Vec<u64>>,
    pub geometric: Option<GeometricRange>,
    pub range: Option<LinearRange>,
}

impl ScheduleConfig {
    pub fn resolve(&self) -> Result<Vec<u64>, CliError> {
        let set = [
            self.list.is_some(),
            self.geometric.is_some(),
            self.range.is_some(),
        ];
        if set.iter().filter(|&&b| b).count() != 1 {
            return Err(CliError::Parse(
                "n_schedule needs exactly one of list, geometric, range".into(),
            ));
        }
        let ns: Vec<u64> = if let Some(l) = &self.list {
            l.clone()
        } else if let Some(g) = &self.geometric {
            if !(g.factor > 1.0) || g.start == 0 || g.stop < g.start {
                return Err(CliError::Parse(format!(
                    "geometric schedule needs 1 <= start <= stop and factor > 1: {g:?}"
                )));
            }
            let mut out: Vec<u64> = Vec::new();
            let mut k = 0;
            loop {
                let v = (g.start as f64 * g.factor.powi(k)).round() as u64;
                if v > g.stop {
                    break;
                }
                if out.last() != Some(&v) {
                    out.push(v);
                }
                k += 1;
            }
            out
        } else {
            let r = self.range.as_ref().expect("checked above");
            if r.step == 0 || r.stop < r.start {
                return Err(CliError::Parse(format!(
                    "range schedule needs step >= 1 and start <= stop: {r:?}"
                )));
            }
            (r.start..=r.stop).step_by(r.step as usize).collect()
        };
        if ns.is_empty() {
            return Err(CliError::Parse("n_schedule is empty".into()));
        }
        if ns.windows(2).any(|w| w[1] <= w[0]) {
            return Err(CliError::Parse(
                "n_schedule must be strictly increasing".into(),
            ));
        }
        if ns[0] == 0 {
            return Err(CliError::Parse(
                "n_schedule entries must be at least 1".into(),
            ));
        }
        Ok(ns)
    }
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TailConfig {
    pub rule: String,
    pub first_value: Option<f64>,
    pub value_ratio: Option<f64>,
    pub first_prob: Option<f64>,
    pub prob_ratio: Option<f64>,
}

/// One flat table for every law; `kind` and `family` decide which keys are allowed.
#[derive(Debug, Clone, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DistributionConfig {
    pub kind: String,
    // discrete
    pub p0: Option<f64>,
    pub atoms: Option<Vec<[f64; 2]>>,
    pub tail: Option<TailConfig>,
    // continuous
    pub family: Option<String>,
    pub alpha: Option<f64>,
    pub upper: Option<f64>,
    pub shape: Option<f64>,
    pub scale: Option<f64>,
    pub level: Option<f64>,
    pub width: Option<f64>,
    pub t: Option<Vec<f64>>,
    pub f: Option<Vec<f64>>,
    pub file: Option<String>,
    pub normalize: Option<bool>,
    pub rv_index_alpha: Option<f64>,
    // mixed
    pub continuous: Option<Box<DistributionConfig>>,
    pub discrete: Option<Box<DistributionConfig>>,
    pub weight_cont: Option<f64>,
}

fn need<T: Copy>(v: Option<T>, key: &str, what: &str) -> Result<T, CliError> {
    v.ok_or_else(|| CliError::Parse(format!("{what} needs `{key}`")))
}

impl DistributionConfig {
    fn present(&self) -> Vec<&'static str> {
        let mut keys = Vec::new();
        let mut mark = |b: bool, k: &'static str| {
            if b {
                keys.push(k)
            }
        };
        mark(self.p0.is_some(), "p0");
        mark(self.atoms.is_some(), "atoms");
        mark(self.tail.is_some(), "tail");
        mark(self.family.is_some(), "family");
        mark(self.alpha.is_some(), "alpha");
        mark(self.upper.is_some(), "upper");
        mark(self.shape.is_some(), "shape");
        mark(self.scale.is_some(), "scale");
        mark(self.level.is_some(), "level");
        mark(self.width.is_some(), "width");
        mark(self.t.is_some(), "t");
        mark(self.f.is_some(), "f");
        mark(self.file.is_some(), "file");
        mark(self.normalize.is_some(), "normalize");
        mark(self.rv_index_alpha.is_some(), "rv_index_alpha");
        mark(self.continuous.is_some(), "continuous");
        mark(self.discrete.is_some(), "discrete");
        mark(self.weight_cont.is_some(), "weight_cont");
        keys
    }

    fn allow_only(&self, allowed: &[&str], what: &str) -> Result<(), CliError> {
        match self.present().into_iter().find(|k| !allowed.contains(k)) {
            Some(k) => Err(CliError::Parse(format!(
                "key `{k}` is not valid for {what}"
            ))),
            None => Ok(()),
        }
    }

    /// `base` resolves relative tabulated-density files.
    pub fn build(&self, base: &Path) -> Result<ShockDistribution, CliError> {
        match self.kind.as_str() {
            "discrete" => Ok(ShockDistribution::Discrete(self.build_discrete()?)),
            "continuous" => Ok(ShockDistribution::Continuous(self.build_density(base)?)),
            "mixed" => {
                self.allow_only(&["continuous", "discrete", "weight_cont"], "a mixed law")?;
                let c = self.continuous.as_ref().ok_or_else(|| {
                    CliError::Parse("mixed law needs a `continuous` table".into())
                })?;
                let d = self
                    .discrete
                    .as_ref()
                    .ok_or_else(|| CliError::Parse("mixed law needs a `discrete` table".into()))?;
                let w = need(self.weight_cont, "weight_cont", "a mixed law")?;
                Ok(ShockDistribution::mixed(
                    c.build_density(base)?,
                    d.build_discrete()?,
                    w,
                )?)
            }
            other => Err(CliError::Parse(format!(
                "unknown distribution kind `{other}` (expected discrete, continuous or mixed)"
            ))),
        }
    }

    fn build_discrete(&self) -> Result<DiscreteSpec, CliError> {
        if self.kind != "discrete" {
            return Err(CliError::Parse(format!(
                "expected a discrete law, got kind `{}`",
                self.kind
            )));
        }
        self.allow_only(&["p0", "atoms", "tail"], "a discrete law")?;
        let atoms: Vec<Atom> = self
            .atoms
            .clone()
            .unwrap_or_default()
            .into_iter()
            .map(|[v, p]| Atom::new(v, p))
            .collect();
        let tail = match &self.tail {
            None => None,
            Some(t) => Some(match t.rule.as_str() {
                "exotic" => {
                    if t.first_value
                        .or(t.value_ratio)
                        .or(t.first_prob)
                        .or(t.prob_ratio)
                        .is_some()
                    {
                        return Err(CliError::Parse(
                            "the exotic tail takes no parameters".into(),
                        ));
                    }
                    TailGenerator::Exotic
                }
                "geometric" => TailGenerator::Geometric {
                    first_value: need(t.first_value, "first_value", "a geometric tail")?,
                    value_ratio: need(t.value_ratio, "value_ratio", "a geometric tail")?,
                    first_prob: need(t.first_prob, "first_prob", "a geometric tail")?,
                    prob_ratio: need(t.prob_ratio, "prob_ratio", "a geometric tail")?,
                },
                other => return Err(CliError::Parse(format!("unknown tail rule `{other}`"))),
            }),
        };
        Ok(DiscreteSpec::new(self.p0.unwrap_or(0.0), atoms, tail)?)
    }

    fn build_density(&self, base: &Path) -> Result<DensitySpec, CliError> {
        if self.kind != "continuous" {
            return Err(CliError::Parse(format!(
                "expected a continuous law, got kind `{}`",
                self.kind
            )));
        }
        let family = self
            .family
            .as_deref()
            .ok_or_else(|| CliError::Parse("continuous law needs `family`".into()))?;
        let what = format!("family `{family}`");
        let mut spec = match family {
            "power-law" => {
                self.allow_only(&["family", "alpha", "upper"], &what)?;
                DensitySpec::power_law(
                    need(self.alpha, "alpha", &what)?,
                    self.upper.unwrap_or(1.0),
                )?
            }
            "gamma" => {
                self.allow_only(&["family", "shape", "scale"], &what)?;
                DensitySpec::gamma(need(self.shape, "shape", &what)?, self.scale.unwrap_or(1.0))?
            }
            "constant" => {
                self.allow_only(&["family", "level", "width"], &what)?;
                DensitySpec::constant_near_zero(
                    need(self.level, "level", &what)?,
                    need(self.width, "width", &what)?,
                )?
            }
            "uniform" => {
                self.allow_only(&["family", "upper"], &what)?;
                DensitySpec::uniform(need(self.upper, "upper", &what)?)?
            }
            "two-sided-exponential" => {
                self.allow_only(&["family"], &what)?;
                DensitySpec::shifted_two_sided_exponential()
            }
            "damped-exponential" => {
                self.allow_only(&["family"], &what)?;
                DensitySpec::shifted_damped_exponential()
            }
            "tabulated" => {
                self.allow_only(
                    &["family", "t", "f", "file", "normalize", "rv_index_alpha"],
                    &what,
                )?;
                let normalize = self.normalize.unwrap_or(false);
                let table = match (&self.t, &self.f, &self.file) {
                    (Some(t), Some(f), None) => {
                        TabulatedDensity::new(t.clone(), f.clone(), normalize)?
                    }
                    (None, None, Some(file)) => {
                        let path = base.join(file);
                        let text = std::fs::read_to_string(&path).map_err(|e| {
                            CliError::Parse(format!("cannot read {}: {e}", path.display()))
                        })?;
                        TabulatedDensity::from_csv_str(&text, normalize)?
                    }
                    _ => {
                        return Err(CliError::Parse(
                            "tabulated density needs either `t` and `f` arrays or a `file`".into(),
                        ))
                    }
                };
                let mut s = DensitySpec::tabulated(table);
                s.rv_index_alpha = self.rv_index_alpha;
                s
            }
            other => return Err(CliError::Parse(format!("unknown density family `{other}`"))),
        };
        spec.validate()?;
        if family != "tabulated" {
            spec.rv_index_alpha = spec.rv_index_alpha.or(self.rv_index_alpha);
        }
        Ok(spec)
    }
}

pub fn parse_experiments(text: &str) -> Result<ExperimentFile, CliError> {
    let file: ExperimentFile = toml::from_str(text).map_err(|e| CliError::Parse(e.to_string()))?;
    if file.experiments.is_empty() {
        return Err(CliError::Parse("no [[experiment]] entries".into()));
    }
    let mut ids: Vec<&str> = file.experiments.iter().map(|e| e.id.as_str()).collect();
    ids.sort_unstable();
    if let Some(w) = ids.windows(2).find(|w| w[0] == w[1]) {
        return Err(CliError::Parse(format!(
            "duplicate experiment id `{}`",
            w[0]
        )));
    }
    for e in &file.experiments {
        if e.id.is_empty() || e.id.contains(['/', '\\']) {
            return Err(CliError::Parse(format!(
                "experiment id `{}` must be a plain file stem",
                e.id
            )));
        }
        if !(e.x > 0.0 && e.x.is_finite()) {
            return Err(CliError::Parse(format!(
                "{}: x = {} must be positive",
                e.id, e.x
            )));
        }
        e.n_schedule.resolve().map_err(|err| match err {
            CliError::Parse(m) => CliError::Parse(format!("{}: {m}", e.id)),
            other => other,
        })?;
    }
    Ok(file)
}

#[cfg(test)]
mod tests {
    use super::*;

    const BINOMIAL: &str = r#"
[[experiment]]
id = "b"
task = "rate-law"
x = 2.5
distribution = { kind = "discrete", p0 = 0.5, atoms = [[1.0, 0.5]] }
n_schedule = { geometric = { start = 10, stop = 10000, factor = 10 } }
"#;

    #[test]
    fn parses_and_builds() {
        let f = parse_experiments(BINOMIAL).unwrap();
        let e = &f.experiments[0];
        assert_eq!(e.task, Some(Task::RateLaw));
        assert_eq!(e.n_schedule.resolve().unwrap(), vec![10, 100, 1000, 10000]);
        let d = e.distribution.build(Path::new(".")).unwrap();
        assert!(matches!(d, ShockDistribution::Discrete(_)));
    }

    #[test]
    fn unknown_keys_are_errors() {
        let bad = BINOMIAL.replace("x = 2.5", "x = 2.5\ntolerance = 1e-3");
        assert!(matches!(parse_experiments(&bad), Err(CliError::Parse(_))));
        let bad = BINOMIAL.replace("p0 = 0.5,", "p0 = 0.5, alpha = 2.0,");
        let f = parse_experiments(&bad).unwrap();
        assert!(matches!(
            f.experiments[0].distribution.build(Path::new(".")),
            Err(CliError::Parse(_))
        ));
        let bad = format!("{BINOMIAL}options = {{ grid_stp = 1e-3 }}\n");
        assert!(matches!(parse_experiments(&bad), Err(CliError::Parse(_))));
    }

    #[test]
    fn schedules_are_validated() {
        let empty = BINOMIAL.replace(
            "{ geometric = { start = 10, stop = 10000, factor = 10 } }",
            "{ list = [] }",
        );
        assert!(matches!(parse_experiments(&empty), Err(CliError::Parse(_))));
        let unsorted = BINOMIAL.replace(
            "{ geometric = { start = 10, stop = 10000, factor = 10 } }",
            "{ list = [5, 3] }",
        );
        assert!(matches!(
            parse_experiments(&unsorted),
            Err(CliError::Parse(_))
        ));
        let both = BINOMIAL.replace("factor = 10 }", "factor = 10 }, list = [1]");
        assert!(matches!(parse_experiments(&both), Err(CliError::Parse(_))));
        let r = ScheduleConfig {
            list: None,
            geometric: None,
            range: Some(LinearRange {
                start: 2,
                stop: 9,
                step: 3,
            }),
        };
        assert_eq!(r.resolve().unwrap(), vec![2, 5, 8]);
    }

    #[test]
    fn mixed_and_tails() {
        let text = r#"
[[experiment]]
id = "m"
task = "survival"
x = 0.8
n_schedule = { list = [1, 2] }
[experiment.distribution]
kind = "mixed"
weight_cont = 0.5
continuous = { kind = "continuous", family = "uniform", upper = 1.0 }
discrete = { kind = "discrete", atoms = [[0.6, 1.0]] }

[[experiment]]
id = "e"
task = "rate-law"
x = 3.0
n_schedule = { list = [100] }
distribution = { kind = "discrete", p0 = 0.5, tail = { rule = "exotic" } }
"#;
        let f = parse_experiments(text).unwrap();
        for e in &f.experiments {
            e.distribution.build(Path::new(".")).unwrap();
        }
    }
}

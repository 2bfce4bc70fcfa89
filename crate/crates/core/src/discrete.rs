//! Exact survival probabilities for discrete shock laws.
//!
//! For x_min > 0 every path below x has at most M positive jumps, so
//! c_n = Σ_k C(n,k) p0^{n−k} q_k with q_k = P[S_k ≤ x, all jumps positive].
//! The q_k come from a level-by-level enumeration of atom sums, merged on
//! exact rational keys whenever the atoms are small rationals.
//! When atoms accumulate at 0 the law is run through a lattice recursion instead.

use crate::dist::{Atom, DiscreteSpec, DEFAULT_TAIL_TOL};
use crate::error::{precondition, Error, Result};
use crate::special::{ln_binomial, log_sum_exp};
use crate::table::{Method, SurvivalTable};
use num_rational::Ratio;
use num_traits::{CheckedAdd, ToPrimitive, Zero};
use std::collections::BTreeMap;

#[derive(Debug, Clone, Copy)]
pub struct ExactOptions {
    pub node_budget: usize,
    pub tail_tol: f64,
    /// largest lattice size for laws with x_min = 0
    pub lattice_limit: usize,
}

impl Default for ExactOptions {
    fn default() -> Self {
        Self {
            node_budget: 10_000_000,
            tail_tol: DEFAULT_TAIL_TOL,
            lattice_limit: 1 << 22,
        }
    }
}

const MAX_DENOM: i64 = 1_000_000;

/// Small rational whose nearest f64 is `v` up to a few ulps.
fn small_rational(v: f64) -> Option<Ratio<i128>> {
    let r = Ratio::<i64>::approximate_float(v)?;
    if *r.denom() > MAX_DENOM {
        return None;
    }
    let back = *r.numer() as f64 / *r.denom() as f64;
    if (back - v).abs() > 4.0 * f64::EPSILON * v.abs() {
        return None;
    }
    Some(Ratio::new(*r.numer() as i128, *r.denom() as i128))
}

/// Atom sums ≤ x grouped by the number of (positive) jumps; each level maps
/// a distinct sum to the total probability of ordered tuples reaching it.
#[derive(Debug, Clone, PartialEq)]
pub struct AtomTupleIndex {
    pub x: f64,
    pub levels: Vec<Vec<(f64, f64)>>,
    pub exact_arithmetic: bool,
}

impl AtomTupleIndex {
    pub fn build(atoms: &[Atom], x: f64, node_budget: usize) -> Result<Self> {
        let atoms: Vec<Atom> = {
            let mut a: Vec<Atom> = atoms
                .iter()
                .copied()
                .filter(|a| a.value <= x * (1.0 + 1e-12))
                .collect();
            a.sort_by(|p, q| p.value.total_cmp(&q.value));
            a
        };
        if let Some(levels) = Self::build_exact(&atoms, x, node_budget)? {
            return Ok(Self {
                x,
                levels,
                exact_arithmetic: true,
            });
        }
        Ok(Self {
            x,
            levels: Self::build_float(&atoms, x, node_budget)?,
            exact_arithmetic: false,
        })
    }

    fn build_exact(atoms: &[Atom], x: f64, budget: usize) -> Result<Option<Vec<Vec<(f64, f64)>>>> {
        let Some(xr) = small_rational(x) else {
            return Ok(None);
        };
        let mut ra = Vec::with_capacity(atoms.len());
        for a in atoms {
            match small_rational(a.value) {
                Some(r) => ra.push((r, a.prob)),
                None => return Ok(None),
            }
        }
        let mut nodes = 0usize;
        let mut level: BTreeMap<Ratio<i128>, f64> = BTreeMap::new();
        level.insert(Ratio::zero(), 1.0);
        let mut out = vec![vec![(0.0, 1.0)]];
        loop {
            let mut next: BTreeMap<Ratio<i128>, f64> = BTreeMap::new();
            for (s, w) in &level {
                for (a, p) in &ra {
                    nodes += 1;
                    if nodes > budget {
                        return Err(Error::CombinatorialBlowup { budget });
                    }
                    let Some(t) = s.checked_add(a) else {
                        return Ok(None);
                    };
                    if t > xr {
                        break;
                    }
                    *next.entry(t).or_insert(0.0) += w * p;
                }
            }
            if next.is_empty() {
                return Ok(Some(out));
            }
            out.push(
                next.iter()
                    .map(|(s, w)| (s.to_f64().unwrap_or(f64::NAN), *w))
                    .collect(),
            );
            level = next;
        }
    }

    fn build_float(atoms: &[Atom], x: f64, budget: usize) -> Result<Vec<Vec<(f64, f64)>>> {
        let limit = x * (1.0 + 1e-12);
        let mut nodes = 0usize;
        let mut level = vec![(0.0f64, 1.0f64)];
        let mut out = vec![level.clone()];
        loop {
            let mut next = Vec::new();
            for &(s, w) in &level {
                for a in atoms {
                    nodes += 1;
                    if nodes > budget {
                        return Err(Error::CombinatorialBlowup { budget });
                    }
                    let t = s + a.value;
                    if t > limit {
                        break;
                    }
                    next.push((t, w * a.prob));
                }
            }
            if next.is_empty() {
                return Ok(out);
            }
            next.sort_by(|a, b| a.0.total_cmp(&b.0));
            let mut merged: Vec<(f64, f64)> = Vec::with_capacity(next.len());
            for (s, w) in next {
                match merged.last_mut() {
                    Some(last) if (s - last.0).abs() <= 1e-12 * s.max(1.0) => last.1 += w,
                    _ => merged.push((s, w)),
                }
            }
            out.push(merged.clone());
            level = merged;
        }
    }

    /// Longest tuple length with sum ≤ x.
    pub fn max_len(&self) -> usize {
        self.levels.len() - 1
    }

    /// q_k = P[S_k ≤ x, all k jumps positive].
    pub fn q(&self, k: usize) -> f64 {
        self.levels
            .get(k)
            .map_or(0.0, |l| l.iter().map(|&(_, w)| w).sum())
    }
}

/// M_x: the largest number of positive jumps that fit under x.
pub fn m_x(spec: &DiscreteSpec, x: f64) -> Result<u64> {
    let x_min = spec.x_min();
    if !(x_min > 0.0 && spec.p0() > 0.0) {
        return Err(Error::NotClassC2(format!(
            "need P[X=0] > 0 and x_min > 0 (got {}, {x_min})",
            spec.p0()
        )));
    }
    precondition(x > 0.0, || format!("threshold x = {x} must be positive"))?;
    let ratio_is_integer = match (small_rational(x), small_rational(x_min)) {
        (Some(a), Some(b)) => (a / b).is_integer(),
        _ => {
            let q = x / x_min;
            (q - q.round()).abs() <= 1e-12 * q.max(1.0)
        }
    };
    let q = x / x_min;
    if ratio_is_integer && !spec.x_min_attained() {
        Ok(q.round() as u64 - 1)
    } else if ratio_is_integer {
        Ok(q.round() as u64)
    } else {
        Ok(q.floor() as u64)
    }
}

/// Survival at one threshold for laws with x_min > 0, evaluable at any n.
#[derive(Debug, Clone)]
pub struct DiscreteSurvival {
    pub x: f64,
    pub p0: f64,
    ln_q: Vec<f64>,
    /// mass of generated atoms left out of the enumeration
    pub tail_mass: f64,
    pub exact_arithmetic: bool,
}

impl DiscreteSurvival {
    pub fn new(spec: &DiscreteSpec, x: f64, opts: &ExactOptions) -> Result<Self> {
        precondition(spec.x_min() > 0.0, || {
            "enumeration needs x_min > 0; use the lattice engine for accumulating atoms".into()
        })?;
        let trunc = spec.truncated(opts.tail_tol)?;
        let index = AtomTupleIndex::build(&trunc.atoms, x, opts.node_budget)?;
        let ln_q = (0..=index.max_len()).map(|k| index.q(k).ln()).collect();
        Ok(Self {
            x,
            p0: spec.p0(),
            ln_q,
            tail_mass: trunc.tail_mass,
            exact_arithmetic: index.exact_arithmetic,
        })
    }

    pub fn max_jumps(&self) -> usize {
        self.ln_q.len() - 1
    }

    /// log Σ_k C(n,k) p0^{−k} q_k (so that log c_n = n log p0 + this).
    fn scaled_log(&self, n: u64, shift: u64) -> f64 {
        let lp0 = self.p0.ln();
        let k_max = (n + shift).min(self.max_jumps() as u64);
        let terms: Vec<f64> = (shift..=k_max)
            .map(|k| ln_binomial(n, k - shift) - k as f64 * lp0 + self.ln_q[k as usize])
            .collect();
        log_sum_exp(&terms)
    }

    pub fn log_c(&self, n: u64) -> f64 {
        if n == 0 {
            return 0.0;
        }
        if self.p0 == 0.0 {
            return self
                .ln_q
                .get(n as usize)
                .copied()
                .unwrap_or(f64::NEG_INFINITY);
        }
        n as f64 * self.p0.ln() + self.scaled_log(n, 0)
    }

    /// r_n − p0 without cancellation: (c_{n+1} − p0 c_n)/c_n.
    pub fn ratio_excess(&self, n: u64) -> Option<f64> {
        if self.p0 == 0.0 {
            let a = self.log_c(n);
            let b = self.log_c(n + 1);
            return (a > f64::NEG_INFINITY).then(|| (b - a).exp());
        }
        let num = self.scaled_log(n, 1);
        let den = self.scaled_log(n, 0);
        Some(self.p0 * (num - den).exp())
    }

    /// n (r_n − p0)/(p0 M_x) evaluated directly at a single n.
    pub fn rate_law_deviation_at(&self, n: u64, m_x: u64) -> Result<f64> {
        precondition(m_x >= 1 && self.p0 > 0.0, || {
            "rate law needs M_x >= 1 and P[X=0] > 0".into()
        })?;
        let e = self.ratio_excess(n).expect("p0 > 0 keeps c_n positive");
        Ok(n as f64 * e / (self.p0 * m_x as f64))
    }

    pub fn table(&self, n_max: usize) -> SurvivalTable {
        let logs = (0..=n_max as u64).map(|n| self.log_c(n)).collect();
        SurvivalTable::from_logs(
            self.x,
            logs,
            Method::ExactEnumeration,
            n_max as f64 * self.tail_mass,
        )
    }
}

/// Sandwich of survival tables for a law whose atoms accumulate at 0: the
/// omitted generator tail is lumped at the smallest kept atom (lower) or at 0 (upper).
#[derive(Debug, Clone)]
pub struct LatticeSandwich {
    pub lower: SurvivalTable,
    pub upper: SurvivalTable,
    pub lattice_step: f64,
    pub tail_mass: f64,
}

pub fn lattice_survival(
    spec: &DiscreteSpec,
    x: f64,
    n_max: usize,
    opts: &ExactOptions,
) -> Result<LatticeSandwich> {
    precondition(x > 0.0, || format!("threshold x = {x} must be positive"))?;
    let trunc = spec.truncated(opts.tail_tol)?;
    let step = trunc
        .atoms
        .first()
        .map(|a| a.value)
        .ok_or_else(|| Error::InvalidDistribution("no positive atoms".into()))?;
    let units = (x / step + 1e-9).floor() as usize;
    if units > opts.lattice_limit {
        return Err(Error::CombinatorialBlowup {
            budget: opts.lattice_limit,
        });
    }
    let mut jumps: Vec<(usize, f64)> = Vec::new();
    for a in &trunc.atoms {
        let m = a.value / step;
        if (m - m.round()).abs() > 1e-9 * m.max(1.0) {
            return Err(Error::PreconditionViolated(format!(
                "atom {} is not a multiple of the lattice step {step}",
                a.value
            )));
        }
        let m = m.round() as usize;
        if m <= units {
            jumps.push((m, a.prob));
        }
    }
    let run = |zero_mass: f64, extra_at_step: f64| -> Vec<f64> {
        let mut js = jumps.clone();
        if let Some(first) = js.first_mut() {
            first.1 += extra_at_step;
        }
        let mut cur = vec![0.0; units + 1];
        cur[0] = 1.0;
        let mut logs = Vec::with_capacity(n_max + 1);
        logs.push(0.0);
        let mut acc = 0.0;
        for _ in 0..n_max {
            let mut next: Vec<f64> = cur.iter().map(|v| v * zero_mass).collect();
            for &(m, p) in &js {
                for s in m..=units {
                    next[s] += p * cur[s - m];
                }
            }
            let total: f64 = next.iter().sum();
            if total <= 0.0 {
                logs.push(f64::NEG_INFINITY);
                acc = f64::NEG_INFINITY;
                cur.iter_mut().for_each(|v| *v = 0.0);
                continue;
            }
            acc += total.ln();
            logs.push(acc);
            cur = next.into_iter().map(|v| v / total).collect();
        }
        logs
    };
    let p0 = spec.p0();
    let lower_logs = run(p0, trunc.tail_mass);
    let upper_logs = run(p0 + trunc.tail_mass, 0.0);
    let gap = lower_logs
        .iter()
        .zip(&upper_logs)
        .map(|(l, u)| u.exp() - l.exp())
        .fold(0.0, f64::max);
    Ok(LatticeSandwich {
        lower: SurvivalTable::from_logs(x, lower_logs, Method::ExactEnumeration, gap),
        upper: SurvivalTable::from_logs(x, upper_logs, Method::ExactEnumeration, gap),
        lattice_step: step,
        tail_mass: trunc.tail_mass,
    })
}

/// c_0 … c_{n_max} at threshold x.
pub fn survival_exact(
    spec: &DiscreteSpec,
    x: f64,
    n_max: usize,
    opts: &ExactOptions,
) -> Result<SurvivalTable> {
    precondition(x > 0.0, || format!("threshold x = {x} must be positive"))?;
    if spec.x_min() > 0.0 {
        Ok(DiscreteSurvival::new(spec, x, opts)?.table(n_max))
    } else {
        Ok(lattice_survival(spec, x, n_max, opts)?.lower)
    }
}

/// (c_{n+1,x} − Σ_{x_i<y1} c_{n,x−x_i} P[X=x_i]) / c_{n,x−y1}, the zero atom included in the sum.
pub fn atom_mass_recover(
    spec: &DiscreteSpec,
    x: f64,
    y1: f64,
    n: u64,
    opts: &ExactOptions,
) -> Result<f64> {
    let p_y1 = spec.prob_of(y1);
    if !(y1 > 0.0) || p_y1 == 0.0 {
        return Err(Error::NotAnAtom { value: y1 });
    }
    precondition(y1 <= x, || format!("atom {y1} exceeds threshold {x}"))?;
    precondition(spec.p0() > 0.0 && spec.x_min() > 0.0, || {
        "recovery needs a class C2 law".into()
    })?;
    let trunc = spec.truncated(opts.tail_tol)?;
    let x_min = spec.x_min();
    if let Some(y2) = trunc
        .atoms
        .iter()
        .map(|a| a.value)
        .find(|&v| v > y1 * (1.0 + 1e-12))
    {
        if y2 - y1 <= x_min * (1.0 + 1e-12) {
            return Err(Error::HypothesisViolated(format!(
                "next atom {y2} is within x_min = {x_min} of y1 = {y1}"
            )));
        }
    }
    let below: Vec<Atom> = trunc
        .atoms
        .iter()
        .copied()
        .filter(|a| a.value < y1 * (1.0 - 1e-12))
        .collect();
    let surv =
        |t: f64| -> Result<DiscreteSurvival> { DiscreteSurvival::new(spec, t.max(1e-300), opts) };
    let base = surv(x - y1)?;
    let anchor = base.log_c(n);
    let rel = |s: &DiscreteSurvival, m: u64| (s.log_c(m) - anchor).exp();
    let at_x = surv(x)?;
    let mut num = rel(&at_x, n + 1) - spec.p0() * rel(&at_x, n);
    for a in &below {
        num -= a.prob * rel(&surv(x - a.value)?, n);
    }
    Ok(num)
}

#[derive(Debug, Clone, PartialEq)]
pub struct C3Report {
    pub x: f64,
    pub p0: f64,
    pub ns: Vec<u64>,
    /// r_n − p0 from the lower and upper sandwich tables
    pub excess_lower: Vec<f64>,
    pub excess_upper: Vec<f64>,
    /// None when fewer than two n are available
    pub decreasing: Option<bool>,
    pub tail_mass: f64,
}

/// r_n − p0 over the given n for a law with x_min = 0; no rate is claimed.
pub fn c3_ratio_limit_check_at(
    spec: &DiscreteSpec,
    x: f64,
    ns: &[u64],
    opts: &ExactOptions,
) -> Result<C3Report> {
    precondition(spec.x_min() == 0.0, || {
        "C3 check needs atoms accumulating at 0".into()
    })?;
    let mut ns: Vec<u64> = ns.to_vec();
    ns.sort_unstable();
    ns.dedup();
    let n_top = ns.last().copied().unwrap_or(0) as usize;
    let sandwich = lattice_survival(spec, x, n_top + 1, opts)?;
    let excess = |t: &SurvivalTable, n: u64| {
        let i = n as usize;
        (t.log_values[i + 1] - t.log_values[i]).exp() - spec.p0()
    };
    let excess_lower: Vec<f64> = ns.iter().map(|&n| excess(&sandwich.lower, n)).collect();
    let excess_upper: Vec<f64> = ns.iter().map(|&n| excess(&sandwich.upper, n)).collect();
    let decreasing = if ns.len() < 2 {
        None
    } else {
        let dec = |v: &[f64]| v.windows(2).all(|w| w[1].abs() < w[0].abs());
        Some(dec(&excess_lower) && dec(&excess_upper))
    };
    Ok(C3Report {
        x,
        p0: spec.p0(),
        ns,
        excess_lower,
        excess_upper,
        decreasing,
        tail_mass: sandwich.tail_mass,
    })
}

/// Same check on the logarithmic grid n_max, n_max/2, n_max/4, … ≥ 1.
pub fn c3_ratio_limit_check(
    spec: &DiscreteSpec,
    x: f64,
    n_max: u64,
    opts: &ExactOptions,
) -> Result<C3Report> {
    let mut ns = Vec::new();
    let mut n = n_max;
    while n >= 1 {
        ns.push(n);
        n /= 2;
    }
    c3_ratio_limit_check_at(spec, x, &ns, opts)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dist::TailGenerator;
    use crate::table::{rate_law_deviation, ratio_sequence};
    use approx::assert_relative_eq;
    use proptest::prelude::*;

    fn bernoulli() -> DiscreteSpec {
        DiscreteSpec::from_pairs(&[(0.0, 0.5), (1.0, 0.5)]).unwrap()
    }

    fn exotic() -> DiscreteSpec {
        DiscreteSpec::new(0.5, vec![], Some(TailGenerator::Exotic)).unwrap()
    }

    fn dyadic(p0: f64) -> DiscreteSpec {
        // values 2^{-(k+1)}, masses proportional to 8^{-k}, summing to 1 − p0
        DiscreteSpec::new(
            p0,
            vec![],
            Some(TailGenerator::Geometric {
                first_value: 0.5,
                value_ratio: 0.5,
                first_prob: (1.0 - p0) * 7.0 / 8.0,
                prob_ratio: 0.125,
            }),
        )
        .unwrap()
    }

    #[test]
    fn m_x_cases() {
        assert_eq!(m_x(&bernoulli(), 2.5).unwrap(), 2);
        assert_eq!(m_x(&exotic(), 3.0).unwrap(), 2);
        assert_eq!(m_x(&exotic(), 2.2).unwrap(), 2);
        assert_eq!(m_x(&bernoulli(), 0.5).unwrap(), 0);
        assert_eq!(m_x(&bernoulli(), 3.0).unwrap(), 3);
        assert!(matches!(m_x(&dyadic(0.5), 1.0), Err(Error::NotClassC2(_))));
    }

    #[test]
    fn binomial_survival_examples() {
        let t = survival_exact(&bernoulli(), 2.5, 4, &ExactOptions::default()).unwrap();
        assert_relative_eq!(t.values[4], 0.6875, max_relative = 1e-14);
        assert_eq!(t.values[0], 1.0);
        let t = survival_exact(&bernoulli(), 0.5, 6, &ExactOptions::default()).unwrap();
        for n in 0..=6 {
            assert_relative_eq!(t.values[n], 0.5f64.powi(n as i32), max_relative = 1e-14);
        }
        let t = survival_exact(&bernoulli(), 2.5, 1000, &ExactOptions::default()).unwrap();
        for &n in &[10usize, 100, 1000] {
            let nf = n as f64;
            let exact = (nf * nf + nf + 2.0).ln() - (nf + 1.0) * std::f64::consts::LN_2;
            assert_relative_eq!(t.log_values[n], exact, max_relative = 1e-13);
        }
    }

    #[test]
    fn rate_law_at_large_n() {
        let s = DiscreteSurvival::new(&bernoulli(), 2.5, &ExactOptions::default()).unwrap();
        let d = s.rate_law_deviation_at(2000, 2).unwrap();
        // closed form n (r_n − 1/2)/(1/2·2) with r_n = (n²+3n+4)/(2(n²+n+2))
        let n = 2000.0f64;
        let closed = n * ((n * n + 3.0 * n + 4.0) / (2.0 * (n * n + n + 2.0)) - 0.5);
        assert_relative_eq!(d, closed, max_relative = 1e-12);
        assert!((d - 1.0).abs() < 0.02);
        let table = s.table(2001);
        let dev = rate_law_deviation(&table, 0.5, 2).unwrap();
        assert_relative_eq!(dev[2000].unwrap(), closed, max_relative = 1e-8);
    }

    #[test]
    fn exotic_rate_law() {
        let opts = ExactOptions::default();
        let s = DiscreteSurvival::new(&exotic(), 3.0, &opts).unwrap();
        assert!(s.exact_arithmetic);
        assert_eq!(s.max_jumps(), 2);
        let d = s.rate_law_deviation_at(5000, 2).unwrap();
        assert!((d - 1.0).abs() < 0.1, "{d}");
        let s22 = DiscreteSurvival::new(&exotic(), 2.2, &opts).unwrap();
        assert_eq!(s22.max_jumps(), 2);
        let far = s22.rate_law_deviation_at(10_000_000_000, 2).unwrap();
        assert!((far - 1.0).abs() < 0.02, "{far}");
        let near = s22.rate_law_deviation_at(5000, 2).unwrap();
        assert!(near < far);
    }

    #[test]
    fn ratio_bounded_below_by_p0() {
        let spec = DiscreteSpec::from_pairs(&[(0.0, 0.3), (0.7, 0.4), (1.1, 0.3)]).unwrap();
        let t = survival_exact(&spec, 3.0, 200, &ExactOptions::default()).unwrap();
        t.check_invariants(Some(0.3), 1e-12).unwrap();
        for r in ratio_sequence(&t).unwrap() {
            assert!(r.unwrap() >= 0.3 - 1e-14);
        }
    }

    #[test]
    fn class_c1_table_hits_zero() {
        let spec = DiscreteSpec::from_pairs(&[(1.0, 0.5), (2.0, 0.5)]).unwrap();
        let t = survival_exact(&spec, 2.5, 5, &ExactOptions::default()).unwrap();
        assert_relative_eq!(t.values[1], 1.0);
        assert_relative_eq!(t.values[2], 0.25);
        assert_eq!(t.values[3], 0.0);
        let r = ratio_sequence(&t).unwrap();
        assert_eq!(r[2], Some(0.0));
        assert_eq!(r[3], None);
    }

    #[test]
    fn node_budget_is_enforced() {
        let spec = DiscreteSpec::from_pairs(&[(0.0, 0.5), (0.01, 0.25), (0.013, 0.25)]).unwrap();
        let opts = ExactOptions {
            node_budget: 1000,
            ..ExactOptions::default()
        };
        assert!(matches!(
            survival_exact(&spec, 1.0, 5, &opts),
            Err(Error::CombinatorialBlowup { budget: 1000 })
        ));
    }

    #[test]
    fn recovery_examples() {
        let spec = DiscreteSpec::from_pairs(&[(0.0, 0.5), (1.0, 0.3), (3.0, 0.2)]).unwrap();
        let opts = ExactOptions::default();
        let v = atom_mass_recover(&spec, 5.0, 1.0, 500, &opts).unwrap();
        assert!((v - 0.3).abs() < 0.01, "{v}");
        let bad = DiscreteSpec::from_pairs(&[(0.0, 0.5), (1.0, 0.25), (2.0, 0.25)]).unwrap();
        assert!(matches!(
            atom_mass_recover(&bad, 5.0, 1.0, 100, &opts),
            Err(Error::HypothesisViolated(_))
        ));
        assert!(matches!(
            atom_mass_recover(&spec, 5.0, 2.0, 100, &opts),
            Err(Error::NotAnAtom { .. })
        ));
    }

    #[test]
    fn recovery_for_smallest_atom_is_excess_ratio() {
        // numerator reduces to c_{n+1} − p0 c_n
        let spec = DiscreteSpec::from_pairs(&[(0.0, 0.5), (1.0, 0.3), (3.0, 0.2)]).unwrap();
        let opts = ExactOptions::default();
        let n = 300;
        let v = atom_mass_recover(&spec, 5.0, 1.0, n, &opts).unwrap();
        let at_x = DiscreteSurvival::new(&spec, 5.0, &opts).unwrap();
        let at_4 = DiscreteSurvival::new(&spec, 4.0, &opts).unwrap();
        let direct = at_x.ratio_excess(n).unwrap() * (at_x.log_c(n) - at_4.log_c(n)).exp();
        assert_relative_eq!(v, direct, max_relative = 1e-9);
    }

    #[test]
    fn c3_dyadic_ratio_approaches_p0() {
        let opts = ExactOptions::default();
        let rep = c3_ratio_limit_check_at(&dyadic(0.5), 1.0, &[50, 100, 200, 400], &opts).unwrap();
        assert_eq!(rep.decreasing, Some(true));
        assert!(rep.excess_lower[3].abs() < 0.01);
        assert!(rep.tail_mass <= 1e-12);
        let single = c3_ratio_limit_check(&dyadic(0.5), 1.0, 1, &opts).unwrap();
        assert_eq!(single.decreasing, None);
    }

    #[test]
    fn c3_without_zero_atom_ratio_vanishes() {
        let rep =
            c3_ratio_limit_check_at(&dyadic(0.0), 1.0, &[10, 40, 160], &ExactOptions::default())
                .unwrap();
        assert!(rep.excess_lower.windows(2).all(|w| w[1] < w[0]));
        assert!(rep.excess_lower[2] < 0.05);
    }

    #[test]
    fn lattice_agrees_with_enumeration_on_finite_lattice_law() {
        let spec = DiscreteSpec::from_pairs(&[(0.0, 0.4), (0.25, 0.35), (0.75, 0.25)]).unwrap();
        let opts = ExactOptions::default();
        let a = survival_exact(&spec, 2.0, 60, &opts).unwrap();
        let b = lattice_survival(&spec, 2.0, 60, &opts).unwrap();
        for n in 0..=60 {
            assert_relative_eq!(a.log_values[n], b.lower.log_values[n], max_relative = 1e-11);
            assert_eq!(b.lower.log_values[n], b.upper.log_values[n]);
        }
    }

    fn brute_force(values: &[f64], probs: &[f64], x: f64, n: usize) -> f64 {
        // sum over all values^n outcomes
        let m = values.len();
        let mut total = 0.0;
        let mut idx = vec![0usize; n];
        loop {
            let s: f64 = idx.iter().map(|&i| values[i]).sum();
            if s <= x + 1e-12 {
                total += idx.iter().map(|&i| probs[i]).product::<f64>();
            }
            let mut j = 0;
            loop {
                if j == n {
                    return total;
                }
                idx[j] += 1;
                if idx[j] < m {
                    break;
                }
                idx[j] = 0;
                j += 1;
            }
        }
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(48))]
        #[test]
        fn matches_brute_force(
            p0 in 0.05f64..0.6,
            raw in proptest::collection::vec((1u32..12, 0.1f64..1.0), 1..=4),
            x_num in 1u32..30,
            n in 1usize..=7,
        ) {
            let mut vals: Vec<u32> = raw.iter().map(|r| r.0).collect();
            vals.sort_unstable();
            vals.dedup();
            let w: f64 = raw.iter().take(vals.len()).map(|r| r.1).sum();
            let mut pairs = vec![(0.0, p0)];
            for (i, &v) in vals.iter().enumerate() {
                pairs.push((v as f64 / 4.0, (1.0 - p0) * raw[i].1 / w));
            }
            let fix: f64 = 1.0 - pairs.iter().map(|p| p.1).sum::<f64>();
            pairs[0].1 += fix;
            let spec = DiscreteSpec::from_pairs(&pairs).unwrap();
            let x = x_num as f64 / 4.0;
            let t = survival_exact(&spec, x, n, &ExactOptions::default()).unwrap();
            let values: Vec<f64> = pairs.iter().map(|p| p.0).collect();
            let probs: Vec<f64> = pairs.iter().map(|p| p.1).collect();
            let b = brute_force(&values, &probs, x, n);
            prop_assert!((t.values[n] - b).abs() <= 1e-14 + 1e-13 * b);
        }
    }
}

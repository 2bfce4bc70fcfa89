use crate::dist::{DensityFamily, DensitySpec, DiscreteSpec, ShockDistribution, DEFAULT_TAIL_TOL};
use crate::error::{Error, Result};
use crate::quad::{integrate, integrate_algebraic_left, integrate_with_breaks, QuadOptions};
use crate::special::log_sum_exp;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Construction {
    Analytic,
    Quadrature,
}

/// log R(h), the tilted mean m̄(h) = R′/R and the tilted variance m̄′(h).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MgfPoint {
    pub log_r: f64,
    pub mean: f64,
    pub var: f64,
}

#[derive(Debug, Clone, PartialEq)]
enum Component {
    Atoms(Vec<(f64, f64)>),
    TwoSidedExponential,
    Density(DensitySpec),
}

/// Moment generating function R(h) = E e^{hX} on (−a1, a2).
#[derive(Debug, Clone, PartialEq)]
pub struct MgfModel {
    components: Vec<(f64, Component)>,
    pub a1: f64,
    pub a2: f64,
    pub mean: f64,
    pub construction: Construction,
    /// essential infimum of X and the mass sitting there
    pub ess_inf: f64,
    pub mass_at_ess_inf: f64,
    pub negative_mass: bool,
    pub has_ac_part: bool,
}

fn atoms_of(spec: &DiscreteSpec) -> Result<Vec<(f64, f64)>> {
    let t = spec.truncated(DEFAULT_TAIL_TOL)?;
    let mut v: Vec<(f64, f64)> = Vec::with_capacity(t.atoms.len() + 2);
    if spec.p0() > 0.0 {
        v.push((0.0, spec.p0()));
    }
    v.extend(t.atoms.iter().map(|a| (a.value, a.prob)));
    if let (true, Some((lo, hi))) = (t.tail_mass > 0.0, t.tail_range) {
        // the untracked tail sits inside tail_range; its midpoint stands in for it
        v.push((0.5 * (lo + hi), t.tail_mass));
    }
    Ok(v)
}

fn density_interval(f: &DensitySpec) -> (f64, f64) {
    match &f.family {
        DensityFamily::GammaLike { scale, .. } => (f64::INFINITY, 1.0 / scale),
        DensityFamily::ConstantNearZero { level, width } => {
            let tail = (1.0 - level * width) / level;
            (
                f64::INFINITY,
                if tail > 0.0 {
                    1.0 / tail
                } else {
                    f64::INFINITY
                },
            )
        }
        DensityFamily::ShiftedTwoSidedExponential
        | DensityFamily::ShiftedDampedExponential { .. } => (1.0, 1.0),
        _ => (f64::INFINITY, f64::INFINITY),
    }
}

impl MgfModel {
    pub fn build(d: &ShockDistribution) -> Result<Self> {
        match d {
            ShockDistribution::Discrete(s) => {
                Self::from_parts(vec![(1.0, Component::Atoms(atoms_of(s)?))], d)
            }
            ShockDistribution::Continuous(f) => {
                let c = match f.family {
                    DensityFamily::ShiftedTwoSidedExponential => Component::TwoSidedExponential,
                    _ => Component::Density(f.clone()),
                };
                Self::from_parts(vec![(1.0, c)], d)
            }
            ShockDistribution::Mixed {
                continuous,
                discrete,
                weight_cont,
            } => {
                let c = match continuous.family {
                    DensityFamily::ShiftedTwoSidedExponential => Component::TwoSidedExponential,
                    _ => Component::Density(continuous.clone()),
                };
                Self::from_parts(
                    vec![
                        (*weight_cont, c),
                        (1.0 - weight_cont, Component::Atoms(atoms_of(discrete)?)),
                    ],
                    d,
                )
            }
        }
    }

    /// Quadrature-backed model for a density even when a closed form exists.
    pub fn quadrature(f: &DensitySpec) -> Result<Self> {
        Self::from_parts(
            vec![(1.0, Component::Density(f.clone()))],
            &ShockDistribution::Continuous(f.clone()),
        )
    }

    fn from_parts(components: Vec<(f64, Component)>, d: &ShockDistribution) -> Result<Self> {
        let components: Vec<(f64, Component)> =
            components.into_iter().filter(|(w, _)| *w > 0.0).collect();
        let (mut a1, mut a2) = (f64::INFINITY, f64::INFINITY);
        let mut construction = Construction::Analytic;
        for (_, c) in &components {
            let (l, u) = match c {
                Component::Atoms(_) => (f64::INFINITY, f64::INFINITY),
                Component::TwoSidedExponential => (1.0, 1.0),
                Component::Density(f) => {
                    construction = Construction::Quadrature;
                    density_interval(f)
                }
            };
            a1 = a1.min(l);
            a2 = a2.min(u);
        }
        if !(a1 > 0.0 && a2 > 0.0) {
            return Err(Error::MgfUndefined(
                "no neighbourhood of 0 converges".into(),
            ));
        }
        let (ess_inf, mass_at_ess_inf) = ess_inf_of(d);
        let mut m = Self {
            components,
            a1,
            a2,
            mean: 0.0,
            construction,
            ess_inf,
            mass_at_ess_inf,
            negative_mass: ess_inf < 0.0,
            has_ac_part: d.has_absolutely_continuous_part(),
        };
        m.mean = m.eval(0.0)?.mean;
        Ok(m)
    }

    pub fn in_domain(&self, h: f64) -> bool {
        h > -self.a1 && h < self.a2
    }

    pub fn eval(&self, h: f64) -> Result<MgfPoint> {
        if !(h >= -self.a1 && h <= self.a2) || !h.is_finite() {
            return Err(Error::MgfUndefined(format!(
                "h = {h} outside [-{}, {}]",
                self.a1, self.a2
            )));
        }
        let mut parts = Vec::with_capacity(self.components.len());
        for (w, c) in &self.components {
            let p = eval_component(c, h)?;
            parts.push((w.ln() + p.log_r, p));
        }
        let log_r = log_sum_exp(&parts.iter().map(|p| p.0).collect::<Vec<_>>());
        if !log_r.is_finite() {
            return Err(Error::MgfUndefined(format!("R({h}) is not finite")));
        }
        let mut mean = 0.0;
        let mut second = 0.0;
        for (lw, p) in &parts {
            let pi = (lw - log_r).exp();
            mean += pi * p.mean;
            second += pi * (p.var + p.mean * p.mean);
        }
        let var = if parts.len() == 1 {
            parts[0].1.var
        } else {
            (second - mean * mean).max(0.0)
        };
        Ok(MgfPoint { log_r, mean, var })
    }

    pub fn r(&self, h: f64) -> Result<f64> {
        Ok(self.eval(h)?.log_r.exp())
    }

    pub fn r_prime(&self, h: f64) -> Result<f64> {
        let p = self.eval(h)?;
        Ok(p.log_r.exp() * p.mean)
    }

    pub fn r_second(&self, h: f64) -> Result<f64> {
        let p = self.eval(h)?;
        Ok(p.log_r.exp() * (p.var + p.mean * p.mean))
    }

    pub fn m_bar(&self, h: f64) -> Result<f64> {
        Ok(self.eval(h)?.mean)
    }
}

fn ess_inf_of(d: &ShockDistribution) -> (f64, f64) {
    let disc = |s: &DiscreteSpec| -> (f64, f64) {
        if s.p0() > 0.0 {
            (0.0, s.p0())
        } else if s.x_min_attained() {
            (s.x_min(), s.prob_of(s.x_min()))
        } else {
            (s.x_min(), 0.0)
        }
    };
    match d {
        ShockDistribution::Discrete(s) => disc(s),
        ShockDistribution::Continuous(f) => (f.support_start(), 0.0),
        ShockDistribution::Mixed {
            continuous,
            discrete,
            weight_cont,
        } => {
            let (dv, dm) = disc(discrete);
            let cv = continuous.support_start();
            if dv <= cv {
                (dv, (1.0 - weight_cont) * dm)
            } else {
                (cv, 0.0)
            }
        }
    }
}

fn eval_component(c: &Component, h: f64) -> Result<MgfPoint> {
    match c {
        Component::Atoms(a) => {
            let logs: Vec<f64> = a.iter().map(|(v, p)| p.ln() + h * v).collect();
            let log_r = log_sum_exp(&logs);
            let w: Vec<f64> = logs.iter().map(|l| (l - log_r).exp()).collect();
            let mean: f64 = w.iter().zip(a).map(|(w, (v, _))| w * v).sum();
            let var: f64 = w
                .iter()
                .zip(a)
                .map(|(w, (v, _))| w * (v - mean).powi(2))
                .sum();
            Ok(MgfPoint { log_r, mean, var })
        }
        Component::TwoSidedExponential => {
            if h.abs() >= 1.0 {
                return Err(Error::MgfUndefined(format!("R({h}) diverges")));
            }
            let q = 1.0 - h * h;
            Ok(MgfPoint {
                log_r: h - q.ln(),
                mean: 1.0 + 2.0 * h / q,
                var: 2.0 * (1.0 + h * h) / (q * q),
            })
        }
        Component::Density(f) => density_point(f, h),
    }
}

/// ∫ g(y) e^{hy} f(y) dy over the support, split where the density is not smooth.
fn tilted_integral<G: Fn(f64) -> f64>(f: &DensitySpec, h: f64, g: G) -> f64 {
    let opts = QuadOptions::tol(1e-15, 1e-13);
    let w = |y: f64| {
        let d = f.pdf(y);
        if d == 0.0 {
            0.0
        } else {
            g(y) * d * (h * y).exp()
        }
    };
    match &f.family {
        DensityFamily::ShiftedTwoSidedExponential
        | DensityFamily::ShiftedDampedExponential { .. } => {
            integrate(&w, f64::NEG_INFINITY, 1.0, opts).value
                + integrate(&w, 1.0, f64::INFINITY, opts).value
        }
        DensityFamily::Tabulated(t) => {
            let ts = t.abscissae();
            let (a, b) = (ts[0], ts[ts.len() - 1]);
            let breaks: Vec<f64> = if ts.len() <= 2000 {
                ts[1..ts.len() - 1].to_vec()
            } else {
                vec![]
            };
            integrate_with_breaks(&w, a, b, &breaks, opts).value
        }
        _ => {
            let upper = f.upper_support();
            let split = upper.min(1.0);
            let near = match f.head() {
                Some(hd) => integrate_algebraic_left(&w, 0.0, split, hd.exponent + 1.0, opts).value,
                None => integrate_with_breaks(&w, 0.0, split, &[], opts).value,
            };
            let mut far = 0.0;
            if upper > split {
                let mut breaks = vec![];
                if let DensityFamily::ConstantNearZero { width, .. } = f.family {
                    if width > split && width < upper {
                        breaks.push(width);
                    }
                }
                far = if upper.is_finite() {
                    integrate_with_breaks(&w, split, upper, &breaks, opts).value
                } else {
                    let mut acc = 0.0;
                    let mut lo = split;
                    for b in breaks {
                        acc += integrate_with_breaks(&w, lo, b, &[], opts).value;
                        lo = b;
                    }
                    acc + integrate(&w, lo, f64::INFINITY, opts).value
                };
            }
            near + far
        }
    }
}

fn density_point(f: &DensitySpec, h: f64) -> Result<MgfPoint> {
    let r0 = tilted_integral(f, h, |_| 1.0);
    if !(r0 > 0.0 && r0.is_finite()) {
        return Err(Error::MgfUndefined(format!(
            "quadrature for R({h}) gave {r0}"
        )));
    }
    let mean = tilted_integral(f, h, |y| y) / r0;
    let var = tilted_integral(f, h, |y| (y - mean) * (y - mean)) / r0;
    if !(mean.is_finite() && var.is_finite()) {
        return Err(Error::MgfUndefined(format!(
            "tilted moments at h = {h} are not finite"
        )));
    }
    Ok(MgfPoint {
        log_r: r0.ln(),
        mean,
        var,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    fn f1() -> ShockDistribution {
        ShockDistribution::Continuous(DensitySpec::shifted_two_sided_exponential())
    }

    #[test]
    fn bernoulli_mgf() {
        let d = ShockDistribution::Discrete(
            DiscreteSpec::from_pairs(&[(0.0, 0.5), (1.0, 0.5)]).unwrap(),
        );
        let m = MgfModel::build(&d).unwrap();
        assert_eq!(m.construction, Construction::Analytic);
        assert!(m.a1.is_infinite() && m.a2.is_infinite());
        for h in [-3.0, -0.5, 0.0, 0.7, 2.0] {
            assert_relative_eq!(
                m.r(h).unwrap(),
                0.5 + 0.5 * f64::exp(h),
                max_relative = 1e-14
            );
        }
        assert_relative_eq!(m.r(0.0).unwrap(), 1.0, epsilon = 1e-12);
        assert_relative_eq!(m.mean, 0.5);
        assert_eq!(m.ess_inf, 0.0);
        assert_eq!(m.mass_at_ess_inf, 0.5);
    }

    #[test]
    fn f1_analytic_and_quadrature_agree() {
        let a = MgfModel::build(&f1()).unwrap();
        let q = MgfModel::quadrature(&DensitySpec::shifted_two_sided_exponential()).unwrap();
        assert_eq!(q.construction, Construction::Quadrature);
        assert_eq!((a.a1, a.a2), (1.0, 1.0));
        for i in 0..=18 {
            let h = -0.9 + 0.1 * i as f64;
            let (pa, pq) = (a.eval(h).unwrap(), q.eval(h).unwrap());
            assert_relative_eq!(pa.log_r.exp(), pq.log_r.exp(), max_relative = 1e-8);
            assert_relative_eq!(pa.mean, pq.mean, max_relative = 1e-8, epsilon = 1e-9);
            assert_relative_eq!(pa.var, pq.var, max_relative = 1e-8);
        }
        assert_relative_eq!(a.r(0.0).unwrap(), 1.0, epsilon = 1e-12);
        assert_relative_eq!(q.r(0.0).unwrap(), 1.0, epsilon = 1e-12);
        assert!(a.negative_mass);
    }

    #[test]
    fn f1_blows_up_at_minus_one() {
        let a = MgfModel::build(&f1()).unwrap();
        assert!(a.m_bar(-1.0 + 1e-6).unwrap() < -1e3);
        assert!(a.r(-1.0 + 1e-9).unwrap() > 1e8);
        assert!(a.eval(-1.0).is_err());
    }

    #[test]
    fn quadrature_models_of_nonnegative_laws() {
        let g = MgfModel::build(&ShockDistribution::Continuous(
            DensitySpec::gamma(0.3, 2.0).unwrap(),
        ))
        .unwrap();
        assert_relative_eq!(g.a2, 0.5);
        for h in [-4.0f64, -1.0, 0.2, 0.4] {
            let exact = -0.3 * (1.0 - 2.0 * h).ln();
            assert_relative_eq!(
                g.eval(h).unwrap().log_r,
                exact,
                max_relative = 1e-9,
                epsilon = 1e-12
            );
        }
        let p = MgfModel::build(&ShockDistribution::Continuous(
            DensitySpec::power_law(0.5, 1.0).unwrap(),
        ))
        .unwrap();
        assert_relative_eq!(p.mean, 1.0 / 3.0, max_relative = 1e-11);
        let u = MgfModel::build(&ShockDistribution::Continuous(
            DensitySpec::constant_near_zero(0.8, 0.5).unwrap(),
        ))
        .unwrap();
        assert_relative_eq!(u.r(0.0).unwrap(), 1.0, epsilon = 1e-12);
        assert_relative_eq!(u.a2, 0.8 / 0.6, max_relative = 1e-12);
    }

    #[test]
    fn mixed_model_is_weighted_sum() {
        let d = ShockDistribution::mixed(
            DensitySpec::uniform(1.0).unwrap(),
            DiscreteSpec::from_pairs(&[(2.0, 1.0)]).unwrap(),
            0.25,
        )
        .unwrap();
        let m = MgfModel::build(&d).unwrap();
        for h in [-2.0, 0.5, 1.5] {
            let exact = 0.25 * f64::exp_m1(h) / h + 0.75 * f64::exp(2.0 * h);
            assert_relative_eq!(m.r(h).unwrap(), exact, max_relative = 1e-11);
            let dh = 1e-5;
            let num = (m.r(h + dh).unwrap() - m.r(h - dh).unwrap()) / (2.0 * dh);
            assert_relative_eq!(m.r_prime(h).unwrap(), num, max_relative = 1e-7);
        }
        assert_relative_eq!(m.mean, 0.25 * 0.5 + 1.5, max_relative = 1e-12);
    }

    #[test]
    fn tilted_mean_increases() {
        let d = ShockDistribution::Discrete(
            DiscreteSpec::from_pairs(&[(0.0, 0.2), (0.5, 0.3), (2.0, 0.5)]).unwrap(),
        );
        for m in [
            MgfModel::build(&d).unwrap(),
            MgfModel::build(&f1()).unwrap(),
        ] {
            let hs: Vec<f64> = (1..40).map(|i| -0.95 + 0.0475 * i as f64).collect();
            let means: Vec<f64> = hs.iter().map(|&h| m.m_bar(h).unwrap()).collect();
            assert!(means.windows(2).all(|w| w[1] > w[0]));
            assert!(hs.iter().all(|&h| m.eval(h).unwrap().var > 0.0));
        }
    }
}

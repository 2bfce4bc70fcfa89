//! Monte Carlo estimates of c_{n,x}, plain and under an exponential tilt.
//!
//! Path i draws from its own ChaCha8 stream (seed, i), and per-chunk sums are
//! combined in chunk order, so results do not depend on the thread count.

use crate::dist::{
    DensityFamily, DensitySpec, DiscreteSpec, ShockDistribution, TabulatedDensity, DEFAULT_TAIL_TOL,
};
use crate::error::{precondition, Error, Result};
use crate::ldp::{solve_tilted_mean, MgfModel};
use crate::special::NeumaierSum;
use rand::distr::weighted::WeightedIndex;
use rand::distr::Distribution;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Exp1, Gamma};
use rayon::prelude::*;

const CHUNK: u64 = 4096;
/// smallest acceptance rate tolerated by rejection samplers
const MIN_ACCEPTANCE: f64 = 1e-7;

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum McMethod {
    Naive,
    Tilted(f64),
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct McEstimate {
    pub estimate: f64,
    pub stderr: f64,
    pub samples: u64,
    pub seed: u64,
    pub method: McMethod,
}

#[derive(Debug, Clone)]
enum Draw {
    Atoms {
        values: Vec<f64>,
        index: WeightedIndex<f64>,
    },
    /// 1 − E/left_rate with probability p_left, else 1 + E/right_rate
    Laplace {
        p_left: f64,
        left_rate: f64,
        right_rate: f64,
    },
    /// Laplace proposal thinned by 1/(1 + (y−1)⁴)
    Damped(Box<Draw>),
    Gamma(Gamma<f64>),
    /// density ∝ e^{−rate·t} on [0, width], followed with probability
    /// 1 − p_head by width + Exp(tail_rate)
    Plateau {
        p_head: f64,
        width: f64,
        rate: f64,
        tail_rate: f64,
    },
    PowerLaw {
        alpha: f64,
        upper: f64,
    },
    Tabulated(TabulatedDensity),
    /// base draw accepted with probability e^{λ(t − anchor)}
    Thinned {
        base: Box<Draw>,
        lambda: f64,
        anchor: f64,
    },
    Mixture {
        index: WeightedIndex<f64>,
        parts: Vec<Draw>,
    },
}

fn uniform_open<R: Rng>(rng: &mut R) -> f64 {
    1.0 - rng.random::<f64>()
}

fn exp1<R: Rng>(rng: &mut R) -> f64 {
    Exp1.sample(rng)
}

impl Draw {
    fn sample<R: Rng>(&self, rng: &mut R) -> f64 {
        match self {
            Draw::Atoms { values, index } => values[index.sample(rng)],
            Draw::Laplace {
                p_left,
                left_rate,
                right_rate,
            } => {
                let left = rng.random::<f64>() < *p_left;
                let e = exp1(rng);
                if left {
                    1.0 - e / left_rate
                } else {
                    1.0 + e / right_rate
                }
            }
            Draw::Damped(base) => loop {
                let y = base.sample(rng);
                if rng.random::<f64>() * (1.0 + (y - 1.0).powi(4)) < 1.0 {
                    return y;
                }
            },
            Draw::Gamma(g) => g.sample(rng),
            Draw::Plateau {
                p_head,
                width,
                rate,
                tail_rate,
            } => {
                let head = rng.random::<f64>() < *p_head;
                if head {
                    let u = rng.random::<f64>();
                    if *rate == 0.0 {
                        u * width
                    } else {
                        (-(u * (-rate * width).exp_m1()).ln_1p() / rate).min(*width)
                    }
                } else {
                    width + exp1(rng) / tail_rate
                }
            }
            Draw::PowerLaw { alpha, upper } => upper * uniform_open(rng).powf(1.0 / alpha),
            Draw::Tabulated(t) => {
                let u = rng.random::<f64>() * t.cdf(f64::INFINITY);
                let ts = t.abscissae();
                let (mut lo, mut hi) = (ts[0], ts[ts.len() - 1]);
                for _ in 0..64 {
                    let mid = 0.5 * (lo + hi);
                    if t.cdf(mid) < u {
                        lo = mid;
                    } else {
                        hi = mid;
                    }
                }
                0.5 * (lo + hi)
            }
            Draw::Thinned {
                base,
                lambda,
                anchor,
            } => loop {
                let t = base.sample(rng);
                if rng.random::<f64>() < (lambda * (t - anchor)).exp() {
                    return t;
                }
            },
            Draw::Mixture { index, parts } => parts[index.sample(rng)].sample(rng),
        }
    }
}

fn weighted(weights: &[f64]) -> Result<WeightedIndex<f64>> {
    WeightedIndex::new(weights)
        .map_err(|e| Error::InvalidDistribution(format!("sampling weights: {e}")))
}

fn atom_draw(spec: &DiscreteSpec, lambda: f64) -> Result<Draw> {
    let t = spec.truncated(DEFAULT_TAIL_TOL)?;
    let mut pairs: Vec<(f64, f64)> = Vec::new();
    if spec.p0() > 0.0 {
        pairs.push((0.0, spec.p0()));
    }
    pairs.extend(t.atoms.iter().map(|a| (a.value, a.prob)));
    if let (true, Some((lo, hi))) = (t.tail_mass > 0.0, t.tail_range) {
        pairs.push((0.5 * (lo + hi), t.tail_mass));
    }
    let shift = pairs
        .iter()
        .map(|(v, p)| p.ln() + lambda * v)
        .fold(f64::NEG_INFINITY, f64::max);
    let w: Vec<f64> = pairs
        .iter()
        .map(|(v, p)| (p.ln() + lambda * v - shift).exp())
        .collect();
    Ok(Draw::Atoms {
        values: pairs.iter().map(|p| p.0).collect(),
        index: weighted(&w)?,
    })
}

fn not_samplable(lambda: f64, reason: impl Into<String>) -> Error {
    Error::TiltNotSamplable {
        lambda,
        reason: reason.into(),
    }
}

fn density_draw(f: &DensitySpec, lambda: f64) -> Result<Draw> {
    let laplace = |l: f64| -> Result<Draw> {
        if l.abs() >= 1.0 {
            return Err(not_samplable(
                l,
                "two-sided exponential tilt needs |lambda| < 1",
            ));
        }
        Ok(Draw::Laplace {
            p_left: 0.5 * (1.0 - l),
            left_rate: 1.0 + l,
            right_rate: 1.0 - l,
        })
    };
    let base = match &f.family {
        DensityFamily::ShiftedTwoSidedExponential => return laplace(lambda),
        DensityFamily::ShiftedDampedExponential { .. } => {
            return Ok(Draw::Damped(Box::new(laplace(lambda)?)))
        }
        DensityFamily::GammaLike { shape, scale } => {
            let s = scale / (1.0 - lambda * scale);
            if !(s > 0.0 && s.is_finite()) {
                return Err(not_samplable(lambda, "tilted gamma scale is not positive"));
            }
            return Ok(Draw::Gamma(
                Gamma::new(*shape, s).map_err(|e| not_samplable(lambda, e.to_string()))?,
            ));
        }
        DensityFamily::ConstantNearZero { level, width } => {
            let rate = -lambda;
            let head = if rate == 0.0 {
                level * width
            } else {
                level * (-(rate * width).exp_m1()) / rate
            };
            let scale = (1.0 - level * width) / level;
            let (tail, tail_rate) = if scale > 0.0 {
                let tr = 1.0 / scale - lambda;
                if tr <= 0.0 {
                    return Err(not_samplable(
                        lambda,
                        "tilted exponential tail does not decay",
                    ));
                }
                (level * (lambda * width).exp() / tr, tr)
            } else {
                (0.0, 1.0)
            };
            return Ok(Draw::Plateau {
                p_head: head / (head + tail),
                width: *width,
                rate,
                tail_rate,
            });
        }
        DensityFamily::PowerLawOnInterval { alpha, upper } => Draw::PowerLaw {
            alpha: *alpha,
            upper: *upper,
        },
        DensityFamily::Tabulated(t) => Draw::Tabulated(t.clone()),
    };
    if lambda == 0.0 {
        return Ok(base);
    }
    if lambda > 0.0 {
        return Err(not_samplable(lambda, "rejection tilt needs lambda <= 0"));
    }
    let anchor = f.support_start();
    let accept = MgfModel::quadrature(f)?.eval(lambda)?.log_r - lambda * anchor;
    if accept.exp() < MIN_ACCEPTANCE {
        return Err(not_samplable(
            lambda,
            format!("acceptance rate {:e} too small", accept.exp()),
        ));
    }
    Ok(Draw::Thinned {
        base: Box::new(base),
        lambda,
        anchor,
    })
}

/// Sampler for the λ-tilted law together with log R(λ).
fn tilted_draw(d: &ShockDistribution, lambda: f64) -> Result<(Draw, f64)> {
    let log_r = if lambda == 0.0 {
        0.0
    } else {
        MgfModel::build(d)
            .and_then(|m| m.eval(lambda))
            .map_err(|e| not_samplable(lambda, e.to_string()))?
            .log_r
    };
    let draw = match d {
        ShockDistribution::Discrete(s) => atom_draw(s, lambda)?,
        ShockDistribution::Continuous(f) => density_draw(f, lambda)?,
        ShockDistribution::Mixed {
            continuous,
            discrete,
            weight_cont,
        } => {
            let part_log_r = |p: ShockDistribution| -> Result<f64> {
                if lambda == 0.0 {
                    Ok(0.0)
                } else {
                    Ok(MgfModel::build(&p)?.eval(lambda)?.log_r)
                }
            };
            let lc =
                weight_cont.ln() + part_log_r(ShockDistribution::Continuous(continuous.clone()))?;
            let ld = (1.0 - weight_cont).ln()
                + part_log_r(ShockDistribution::Discrete(discrete.clone()))?;
            let top = lc.max(ld);
            Draw::Mixture {
                index: weighted(&[(lc - top).exp(), (ld - top).exp()])?,
                parts: vec![
                    density_draw(continuous, lambda)?,
                    atom_draw(discrete, lambda)?,
                ],
            }
        }
    };
    Ok((draw, log_r))
}

#[derive(Default)]
struct Moments {
    sum: NeumaierSum,
    sum_sq: NeumaierSum,
}

fn run_paths(
    d: &ShockDistribution,
    x: f64,
    n: u64,
    samples: u64,
    seed: u64,
    lambda: f64,
) -> Result<McEstimate> {
    precondition(samples >= 1, || "samples must be at least 1".into())?;
    let (draw, log_r) = tilted_draw(d, lambda)?;
    let stop_early = d.is_nonnegative();
    // log weight −λS + n log R is at most `shift` on {S ≤ x} when λ ≤ 0
    let shift = n as f64 * log_r - lambda * x;
    let chunks = samples.div_ceil(CHUNK);
    let parts: Vec<Moments> = (0..chunks)
        .into_par_iter()
        .map(|c| {
            let mut m = Moments::default();
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            for i in c * CHUNK..((c + 1) * CHUNK).min(samples) {
                rng.set_stream(i);
                rng.set_word_pos(0);
                let mut s = 0.0;
                let mut hit = true;
                for _ in 0..n {
                    s += draw.sample(&mut rng);
                    if stop_early && s > x {
                        hit = false;
                        break;
                    }
                }
                if hit && s <= x {
                    let w = if lambda == 0.0 {
                        1.0
                    } else {
                        (n as f64 * log_r - lambda * s - shift).exp()
                    };
                    m.sum.add(w);
                    m.sum_sq.add(w * w);
                }
            }
            m
        })
        .collect();
    let (mut s1, mut s2) = (NeumaierSum::default(), NeumaierSum::default());
    for p in &parts {
        s1.add(p.sum.value());
        s2.add(p.sum_sq.value());
    }
    let nf = samples as f64;
    let mean = s1.value() / nf;
    let (estimate, stderr) = if lambda == 0.0 {
        (mean, (mean * (1.0 - mean) / nf).max(0.0).sqrt())
    } else {
        let var = if samples > 1 {
            ((s2.value() - nf * mean * mean) / (nf - 1.0)).max(0.0)
        } else {
            0.0
        };
        let scale = shift.exp();
        (mean * scale, (var / nf).sqrt() * scale)
    };
    Ok(McEstimate {
        estimate,
        stderr,
        samples,
        seed,
        method: if lambda == 0.0 {
            McMethod::Naive
        } else {
            McMethod::Tilted(lambda)
        },
    })
}

/// Fraction of simulated paths with S_n ≤ x.
pub fn simulate_survival(
    d: &ShockDistribution,
    x: f64,
    n: u64,
    samples: u64,
    seed: u64,
) -> Result<McEstimate> {
    run_paths(d, x, n, samples, seed, 0.0)
}

/// Importance sampling from the λ-tilted law with weights e^{−λS_n} R(λ)^n.
pub fn simulate_survival_tilted(
    d: &ShockDistribution,
    x: f64,
    n: u64,
    samples: u64,
    seed: u64,
    lambda: f64,
) -> Result<McEstimate> {
    precondition(lambda <= 0.0, || format!("lambda = {lambda} must be <= 0"))?;
    let mut est = run_paths(d, x, n, samples, seed, lambda)?;
    est.method = McMethod::Tilted(lambda);
    Ok(est)
}

#[derive(Debug, Clone, PartialEq)]
pub struct TiltChoice {
    pub lambda: f64,
    /// set when the tilt equation could not be solved and a fallback was used
    pub warning: Option<String>,
}

/// λ ≤ 0 moving the mean of X to x/n.
pub fn choose_tilt(m: &MgfModel, x: f64, n: u64) -> Result<TiltChoice> {
    let z = x / n as f64;
    precondition(z <= m.mean, || {
        format!("x/n = {z} exceeds E[X] = {}", m.mean)
    })?;
    match solve_tilted_mean(m, z) {
        Ok(lambda) => Ok(TiltChoice {
            lambda: lambda.min(0.0),
            warning: None,
        }),
        Err(Error::TargetOutOfRange { .. }) => {
            let grid: Vec<f64> = if m.a1.is_finite() {
                (1..=40).map(|k| -m.a1 * (1.0 - 0.5f64.powi(k))).collect()
            } else {
                (0..=30).map(|k| -0.25 * 2f64.powi(k)).collect()
            };
            let lambda = grid
                .into_iter()
                .take_while(|&l| m.eval(l).is_ok())
                .last()
                .unwrap_or(0.0);
            Ok(TiltChoice {
                lambda,
                warning: Some(format!(
                    "x/n = {z} is out of reach; using the safeguard point {lambda}"
                )),
            })
        }
        Err(e) => Ok(TiltChoice {
            lambda: 0.0,
            warning: Some(format!(
                "tilt solve failed ({e}); falling back to lambda = 0"
            )),
        }),
    }
}

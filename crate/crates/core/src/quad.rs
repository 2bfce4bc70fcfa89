//! Adaptive Gauss–Kronrod (7/15) quadrature with global subdivision,
//! infinite-interval maps and an algebraic endpoint substitution.

use std::cmp::Ordering;
use std::collections::BinaryHeap;

const XGK: [f64; 8] = [
    0.991_455_371_120_812_639_206_854_697_526_329,
    0.949_107_912_342_758_524_526_189_684_047_851,
    0.864_864_423_359_769_072_789_712_788_640_926,
    0.741_531_185_599_394_439_863_864_773_280_788,
    0.586_087_235_467_691_130_294_144_845_693_013,
    0.405_845_151_377_397_166_906_606_412_076_961,
    0.207_784_955_007_898_467_600_689_403_773_245,
    0.0,
];

const WGK: [f64; 8] = [
    0.022_935_322_010_529_224_963_732_008_058_970,
    0.063_092_092_629_978_553_290_700_663_189_204,
    0.104_790_010_322_250_183_839_876_322_541_518,
    0.140_653_259_715_525_918_745_189_590_510_238,
    0.169_004_726_639_267_902_826_583_426_598_550,
    0.190_350_578_064_785_409_913_256_402_421_014,
    0.204_432_940_075_298_892_414_161_999_234_649,
    0.209_482_141_084_727_828_012_999_174_891_714,
];

const WG: [f64; 4] = [
    0.129_484_966_168_869_693_270_611_432_679_082,
    0.279_705_391_489_276_667_901_467_771_423_780,
    0.381_830_050_505_118_944_950_369_775_488_975,
    0.417_959_183_673_469_387_755_102_040_816_327,
];

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct QuadResult {
    pub value: f64,
    pub abs_error: f64,
    pub evaluations: usize,
    pub converged: bool,
}

#[derive(Debug, Clone, Copy)]
pub struct QuadOptions {
    pub abs_tol: f64,
    pub rel_tol: f64,
    pub max_intervals: usize,
}

impl Default for QuadOptions {
    fn default() -> Self {
        Self {
            abs_tol: 1e-12,
            rel_tol: 1e-12,
            max_intervals: 4000,
        }
    }
}

impl QuadOptions {
    pub fn tol(abs_tol: f64, rel_tol: f64) -> Self {
        Self {
            abs_tol,
            rel_tol,
            ..Self::default()
        }
    }
}

fn gk15<F: Fn(f64) -> f64>(f: &F, a: f64, b: f64) -> (f64, f64) {
    let center = 0.5 * (a + b);
    let half = 0.5 * (b - a);
    let fc = f(center);
    let mut res_k = fc * WGK[7];
    let mut res_g = fc * WG[3];
    for j in 0..7 {
        let dx = half * XGK[j];
        let s = f(center - dx) + f(center + dx);
        res_k += WGK[j] * s;
        if j % 2 == 1 {
            res_g += WG[j / 2] * s;
        }
    }
    let value = res_k * half;
    let err = ((res_k - res_g) * half).abs();
    (value, err)
}

/// Single 15-point Kronrod rule on [a, b]; for smooth integrands on short cells.
pub fn kronrod15<F: Fn(f64) -> f64>(f: F, a: f64, b: f64) -> f64 {
    gk15(&f, a, b).0
}

struct Segment {
    a: f64,
    b: f64,
    value: f64,
    err: f64,
}

impl PartialEq for Segment {
    fn eq(&self, other: &Self) -> bool {
        self.err == other.err
    }
}
impl Eq for Segment {}
impl PartialOrd for Segment {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}
impl Ord for Segment {
    fn cmp(&self, other: &Self) -> Ordering {
        self.err.total_cmp(&other.err)
    }
}

/// Integrate `f` over the finite interval [a, b], splitting first at `breaks`.
pub fn integrate_with_breaks<F: Fn(f64) -> f64>(
    f: F,
    a: f64,
    b: f64,
    breaks: &[f64],
    opts: QuadOptions,
) -> QuadResult {
    if a == b {
        return QuadResult {
            value: 0.0,
            abs_error: 0.0,
            evaluations: 0,
            converged: true,
        };
    }
    if a > b {
        let r = integrate_with_breaks(f, b, a, breaks, opts);
        return QuadResult {
            value: -r.value,
            ..r
        };
    }
    let mut pts: Vec<f64> = std::iter::once(a)
        .chain(breaks.iter().copied().filter(|&p| p > a && p < b))
        .chain(std::iter::once(b))
        .collect();
    pts.sort_by(f64::total_cmp);
    pts.dedup();

    let mut heap = BinaryHeap::new();
    let mut evals = 0usize;
    for w in pts.windows(2) {
        let (v, e) = gk15(&f, w[0], w[1]);
        evals += 15;
        heap.push(Segment {
            a: w[0],
            b: w[1],
            value: v,
            err: e,
        });
    }
    loop {
        let total: f64 = heap.iter().map(|s| s.value).sum();
        let err: f64 = heap.iter().map(|s| s.err).sum();
        let target = opts.abs_tol.max(opts.rel_tol * total.abs());
        if err <= target || heap.len() >= opts.max_intervals {
            return QuadResult {
                value: total,
                abs_error: err,
                evaluations: evals,
                converged: err <= target,
            };
        }
        let worst = heap.pop().expect("non-empty heap");
        let mid = 0.5 * (worst.a + worst.b);
        if mid <= worst.a || mid >= worst.b {
            // cannot split further in floating point
            heap.push(Segment { err: 0.0, ..worst });
            continue;
        }
        let (v1, e1) = gk15(&f, worst.a, mid);
        let (v2, e2) = gk15(&f, mid, worst.b);
        evals += 30;
        heap.push(Segment {
            a: worst.a,
            b: mid,
            value: v1,
            err: e1,
        });
        heap.push(Segment {
            a: mid,
            b: worst.b,
            value: v2,
            err: e2,
        });
    }
}

/// Integrate `f` over [a, b]; either bound may be infinite.
pub fn integrate<F: Fn(f64) -> f64>(f: F, a: f64, b: f64, opts: QuadOptions) -> QuadResult {
    integrate_dyn(&f, a, b, opts)
}

fn integrate_dyn(f: &dyn Fn(f64) -> f64, a: f64, b: f64, opts: QuadOptions) -> QuadResult {
    match (a.is_finite(), b.is_finite()) {
        (true, true) => integrate_with_breaks(f, a, b, &[], opts),
        (true, false) => {
            // x = a + t/(1−t), t ∈ [0,1)
            let g = |t: f64| {
                let u = 1.0 - t;
                let x = a + t / u;
                let v = f(x) / (u * u);
                if v.is_finite() {
                    v
                } else {
                    0.0
                }
            };
            integrate_with_breaks(g, 0.0, 1.0, &[], opts)
        }
        (false, true) => {
            // x = b − (1−t)/t, t ∈ (0,1]
            let g = |t: f64| {
                let x = b - (1.0 - t) / t;
                let v = f(x) / (t * t);
                if v.is_finite() {
                    v
                } else {
                    0.0
                }
            };
            integrate_with_breaks(g, 0.0, 1.0, &[], opts)
        }
        (false, false) => {
            let left = integrate_dyn(f, f64::NEG_INFINITY, 0.0, opts);
            let right = integrate_dyn(f, 0.0, f64::INFINITY, opts);
            QuadResult {
                value: left.value + right.value,
                abs_error: left.abs_error + right.abs_error,
                evaluations: left.evaluations + right.evaluations,
                converged: left.converged && right.converged,
            }
        }
    }
}

/// Integrate `f` over [a, b] when f(t) behaves like (t − a)^{α−1} near `a`.
///
/// Uses t = a + (b − a)·s^{1/α}, which turns the algebraic singularity into a
/// bounded integrand in s.
pub fn integrate_algebraic_left<F: Fn(f64) -> f64>(
    f: F,
    a: f64,
    b: f64,
    alpha: f64,
    opts: QuadOptions,
) -> QuadResult {
    let len = b - a;
    let inv = 1.0 / alpha;
    let g = |s: f64| {
        if s <= 0.0 {
            return 0.0;
        }
        let t = a + len * s.powf(inv);
        f(t) * len * inv * s.powf(inv - 1.0)
    };
    integrate_with_breaks(g, 0.0, 1.0, &[], opts)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    #[test]
    fn polynomial_is_exact() {
        let r = integrate(|x| x.powi(5) - 3.0 * x, 0.0, 2.0, QuadOptions::default());
        assert_relative_eq!(r.value, 64.0 / 6.0 - 6.0, max_relative = 1e-14);
        assert!(r.converged);
    }

    #[test]
    fn semi_infinite_exponential() {
        let r = integrate(|x| (-x).exp(), 0.0, f64::INFINITY, QuadOptions::default());
        assert_relative_eq!(r.value, 1.0, max_relative = 1e-11);
        let r = integrate(|x| x.exp(), f64::NEG_INFINITY, 0.0, QuadOptions::default());
        assert_relative_eq!(r.value, 1.0, max_relative = 1e-11);
    }

    #[test]
    fn whole_line_gaussian() {
        let r = integrate(
            |x| (-0.5 * x * x).exp(),
            f64::NEG_INFINITY,
            f64::INFINITY,
            QuadOptions::default(),
        );
        assert_relative_eq!(
            r.value,
            (2.0 * std::f64::consts::PI).sqrt(),
            max_relative = 1e-11
        );
    }

    #[test]
    fn algebraic_singularity() {
        // ∫_0^1 t^{−1/2} cos t dt, compare with series Σ (−1)^k /((2k)!(2k+1/2))
        let mut exact = 0.0;
        let mut fact = 1.0;
        for k in 0..20 {
            if k > 0 {
                fact *= (2 * k - 1) as f64 * (2 * k) as f64;
            }
            let sign = if k % 2 == 0 { 1.0 } else { -1.0 };
            exact += sign / (fact * (2.0 * k as f64 + 0.5));
        }
        let r = integrate_algebraic_left(
            |t| t.powf(-0.5) * t.cos(),
            0.0,
            1.0,
            0.5,
            QuadOptions::default(),
        );
        assert_relative_eq!(r.value, exact, max_relative = 1e-12);
    }

    #[test]
    fn breakpoints_handle_kinks() {
        let r = integrate_with_breaks(
            |x: f64| (x - 0.3).abs(),
            0.0,
            1.0,
            &[0.3],
            QuadOptions::default(),
        );
        assert_relative_eq!(r.value, 0.5 * (0.09 + 0.49), max_relative = 1e-14);
    }
}

use crate::dist::{DensitySpec, PowerHead};
use crate::error::{precondition, Error, Result};
use crate::quad::kronrod15;
use crate::special::beta_fn;
use rustfft::num_complex::Complex;
use rustfft::FftPlanner;

/// A density on [0, (len−1)·step] stored as e^{log_scale}·(head(t) + r(t)),
/// where r is the piecewise-linear interpolant of `values` and the optional
/// head A·t^β carries the non-smooth behaviour at 0 exactly.
#[derive(Debug, Clone, PartialEq)]
pub struct GridFunction {
    pub step: f64,
    pub values: Vec<f64>,
    pub head: Option<PowerHead>,
    pub log_scale: f64,
}

#[derive(Debug, Clone, Copy)]
pub struct ConvolveOptions {
    /// sequences longer than this are convolved by FFT
    pub fft_threshold: usize,
}

impl Default for ConvolveOptions {
    fn default() -> Self {
        Self { fft_threshold: 512 }
    }
}

impl ConvolveOptions {
    pub fn direct() -> Self {
        Self {
            fft_threshold: usize::MAX,
        }
    }
}

const MIN_CELLS: usize = 8;

impl GridFunction {
    pub fn from_samples(step: f64, values: Vec<f64>) -> Result<Self> {
        precondition(step > 0.0 && step.is_finite(), || {
            format!("bad step {step}")
        })?;
        if values.len() <= MIN_CELLS {
            return Err(Error::ResolutionTooCoarse(format!(
                "{} grid points; need more than {MIN_CELLS}",
                values.len()
            )));
        }
        precondition(values.iter().all(|v| v.is_finite()), || {
            "non-finite grid value".into()
        })?;
        Ok(Self {
            step,
            values,
            head: None,
            log_scale: 0.0,
        })
    }

    /// Samples f on [0, x] with `cells` equal cells, splitting off its power head.
    pub fn from_density(f: &DensitySpec, x: f64, cells: usize) -> Result<Self> {
        precondition(f.is_nonnegative_law(), || "grid engine needs X >= 0".into())?;
        precondition(x > 0.0, || format!("grid length {x} must be positive"))?;
        if cells < MIN_CELLS {
            return Err(Error::ResolutionTooCoarse(format!(
                "{cells} cells; need at least {MIN_CELLS}"
            )));
        }
        let h = x / cells as f64;
        let head = f.head();
        let values = (0..=cells).map(|i| f.remainder(i as f64 * h)).collect();
        Ok(Self {
            step: h,
            values,
            head,
            log_scale: 0.0,
        })
    }

    pub fn upper(&self) -> f64 {
        self.step * (self.values.len() - 1) as f64
    }

    /// Unscaled density at grid node i (infinite at 0 for a singular head).
    pub fn node_density(&self, i: usize) -> f64 {
        let t = i as f64 * self.step;
        self.values[i] + self.head.map_or(0.0, |h| h.eval(t))
    }

    /// Trapezoid cumulative integral of the remainder at every node.
    pub fn cumulative_remainder(&self) -> Vec<f64> {
        let h = self.step;
        let mut cum = Vec::with_capacity(self.values.len());
        let mut acc = 0.0;
        cum.push(0.0);
        for w in self.values.windows(2) {
            acc += 0.5 * h * (w[0] + w[1]);
            cum.push(acc);
        }
        cum
    }

    /// log ∫_0^y of the density, given the cumulative remainder from
    /// [`Self::cumulative_remainder`]; y is clamped to the grid.
    pub fn log_mass_to_with(&self, cum: &[f64], y: f64) -> f64 {
        if y <= 0.0 || self.log_scale == f64::NEG_INFINITY {
            return f64::NEG_INFINITY;
        }
        let h = self.step;
        let last = self.values.len() - 1;
        let y = y.min(self.upper());
        let i = ((y / h).floor() as usize).min(last);
        let mut mass = cum[i];
        if i < last {
            let d = y - i as f64 * h;
            let (a, b) = (self.values[i], self.values[i + 1]);
            mass += d * a + 0.5 * d * d * (b - a) / h;
        }
        mass += self.head.map_or(0.0, |hd| hd.integral_to(y));
        if mass > 0.0 {
            self.log_scale + mass.ln()
        } else {
            f64::NEG_INFINITY
        }
    }

    pub fn log_mass_to(&self, y: f64) -> f64 {
        self.log_mass_to_with(&self.cumulative_remainder(), y)
    }

    pub fn log_mass(&self) -> f64 {
        self.log_mass_to(self.upper())
    }

    fn renormalize(&mut self) {
        let raw = *self.cumulative_remainder().last().expect("non-empty")
            + self.head.map_or(0.0, |h| h.integral_to(self.upper()));
        if raw > 0.0 && raw.is_finite() {
            let inv = 1.0 / raw;
            self.values.iter_mut().for_each(|v| *v *= inv);
            if let Some(h) = self.head.as_mut() {
                h.coef *= inv;
            }
            self.log_scale += raw.ln();
        } else {
            self.log_scale = f64::NEG_INFINITY;
        }
    }
}

/// First `out_len` terms of the linear convolution of a and b.
pub(crate) fn linear_convolve(
    a: &[f64],
    b: &[f64],
    out_len: usize,
    fft_threshold: usize,
) -> Vec<f64> {
    if a.is_empty() || b.is_empty() {
        return vec![0.0; out_len];
    }
    if a.len().max(b.len()) <= fft_threshold {
        let mut out = vec![0.0; out_len];
        for (k, o) in out.iter_mut().enumerate() {
            let lo = k.saturating_sub(b.len() - 1);
            let hi = k.min(a.len() - 1);
            if lo <= hi {
                *o = (lo..=hi).map(|j| a[j] * b[k - j]).sum();
            }
        }
        return out;
    }
    let size = (a.len() + b.len() - 1).next_power_of_two();
    let mut planner = FftPlanner::<f64>::new();
    let fwd = planner.plan_fft_forward(size);
    let inv = planner.plan_fft_inverse(size);
    let pad = |v: &[f64]| {
        let mut c: Vec<Complex<f64>> = v.iter().map(|&r| Complex::new(r, 0.0)).collect();
        c.resize(size, Complex::new(0.0, 0.0));
        c
    };
    let mut fa = pad(a);
    let mut fb = pad(b);
    fwd.process(&mut fa);
    fwd.process(&mut fb);
    for (x, y) in fa.iter_mut().zip(&fb) {
        *x *= y;
    }
    inv.process(&mut fa);
    let scale = 1.0 / size as f64;
    (0..out_len)
        .map(|k| if k < size { fa[k].re * scale } else { 0.0 })
        .collect()
}

/// ∫_{jh}^{(j+1)h} y^β dy and ∫ y^β (y − jh)/h dy for j = 0..len.
fn cell_moments(beta: f64, h: f64, len: usize) -> (Vec<f64>, Vec<f64>) {
    let hb = h.powf(beta + 1.0);
    let mut m0 = Vec::with_capacity(len);
    let mut m1 = Vec::with_capacity(len);
    for j in 0..len {
        let jf = j as f64;
        if j < 16 {
            let p1 = |u: f64| u.powf(beta + 1.0);
            let p2 = |u: f64| u.powf(beta + 2.0);
            let a = (p1(jf + 1.0) - p1(jf)) / (beta + 1.0);
            // ∫_0^1 (j+u)^β u du = [(j+u)^{β+2}/(β+2) − j (j+u)^{β+1}/(β+1)]_0^1
            let b = (p2(jf + 1.0) - p2(jf)) / (beta + 2.0) - jf * a;
            m0.push(hb * a);
            m1.push(hb * b);
        } else {
            m0.push(hb * kronrod15(|u| (jf + u).powf(beta), 0.0, 1.0));
            m1.push(hb * kronrod15(|u| (jf + u).powf(beta) * u, 0.0, 1.0));
        }
    }
    (m0, m1)
}

/// i ↦ A ∫_0^{t_i} y^β r(t_i − y) dy for the piecewise-linear r, exactly.
fn head_against(head: PowerHead, r: &[f64], h: f64, fft_threshold: usize) -> Vec<f64> {
    let len = r.len();
    let (m0, m1) = cell_moments(head.exponent, h, len);
    let kernel: Vec<f64> = (0..len)
        .map(|k| {
            let own = m0[k] - m1[k];
            if k == 0 {
                own
            } else {
                own + m1[k - 1]
            }
        })
        .collect();
    let conv = linear_convolve(&kernel, r, len, fft_threshold);
    conv.iter()
        .enumerate()
        .map(|(i, c)| head.coef * (c - (m0[i] - m1[i]) * r[0]))
        .collect()
}

/// Density of the sum of independent variables with densities f and g on the shared grid.
pub fn convolve_pair(
    f: &GridFunction,
    g: &GridFunction,
    opts: &ConvolveOptions,
) -> Result<GridFunction> {
    precondition(
        f.values.len() == g.values.len() && (f.step - g.step).abs() <= 1e-12 * f.step,
        || "grid functions must share step and length".into(),
    )?;
    let n = f.values.len();
    let h = f.step;
    let (rf, rg) = (&f.values, &g.values);
    let c = linear_convolve(rf, rg, n + 1, opts.fft_threshold);
    let at = |v: &[f64], i: usize| v.get(i).copied().unwrap_or(0.0);
    let mut out: Vec<f64> = (0..n)
        .map(|i| {
            let cm = if i == 0 { 0.0 } else { c[i - 1] };
            let same = (2.0 * c[i] - rf[i] * rg[0] - rf[0] * rg[i]) / 3.0;
            let cross = (cm + c[i + 1] - rf[0] * at(rg, i + 1) - at(rf, i + 1) * rg[0]) / 6.0;
            h * (same + cross)
        })
        .collect();
    if let Some(hf) = f.head {
        for (o, v) in out
            .iter_mut()
            .zip(head_against(hf, rg, h, opts.fft_threshold))
        {
            *o += v;
        }
    }
    if let Some(hg) = g.head {
        for (o, v) in out
            .iter_mut()
            .zip(head_against(hg, rf, h, opts.fft_threshold))
        {
            *o += v;
        }
    }
    let mut head = None;
    if let (Some(a), Some(b)) = (f.head, g.head) {
        let joint = PowerHead {
            coef: a.coef * b.coef * beta_fn(a.exponent + 1.0, b.exponent + 1.0),
            exponent: a.exponent + b.exponent + 1.0,
        };
        if joint.exponent < 1.0 {
            head = Some(joint);
        } else {
            for (i, o) in out.iter_mut().enumerate() {
                *o += joint.eval(i as f64 * h);
            }
        }
    }
    let mut res = GridFunction {
        step: h,
        values: out,
        head,
        log_scale: f.log_scale + g.log_scale,
    };
    res.renormalize();
    Ok(res)
}

/// f^{*1}, …, f^{*n}.
pub fn self_convolve(
    f: &GridFunction,
    n: usize,
    opts: &ConvolveOptions,
) -> Result<Vec<GridFunction>> {
    precondition(n >= 1, || "need n >= 1".into())?;
    let mut out = Vec::with_capacity(n);
    out.push(f.clone());
    for _ in 1..n {
        let next = convolve_pair(out.last().expect("non-empty"), f, opts)?;
        out.push(next);
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use proptest::prelude::*;

    #[test]
    fn uniform_pair_is_triangle() {
        let f = GridFunction::from_density(&DensitySpec::uniform(1.0).unwrap(), 1.0, 1000).unwrap();
        let g = convolve_pair(&f, &f, &ConvolveOptions::default()).unwrap();
        let scale = g.log_scale.exp();
        for i in [1usize, 250, 500, 1000] {
            let s = i as f64 * g.step;
            assert_relative_eq!(scale * g.values[i], s, max_relative = 1e-12);
        }
    }

    #[test]
    fn half_power_pair_is_flat() {
        let f = GridFunction::from_density(&DensitySpec::power_law(0.5, 1.0).unwrap(), 1.0, 1000)
            .unwrap();
        let g = convolve_pair(&f, &f, &ConvolveOptions::default()).unwrap();
        let hd = g.head.expect("exponent 0 head kept");
        assert_eq!(hd.exponent, 0.0);
        for i in [1usize, 400, 1000] {
            let v = g.log_scale.exp() * g.node_density(i);
            assert_relative_eq!(v, std::f64::consts::FRAC_PI_4, max_relative = 1e-12);
        }
    }

    #[test]
    fn one_fold_is_identity() {
        let f =
            GridFunction::from_density(&DensitySpec::gamma(0.3, 1.0).unwrap(), 1.0, 500).unwrap();
        let seq = self_convolve(&f, 1, &ConvolveOptions::default()).unwrap();
        assert_eq!(seq[0], f);
    }

    #[test]
    fn fft_and_direct_agree() {
        let a: Vec<f64> = (0..700).map(|i| ((i as f64) * 0.37).sin().abs()).collect();
        let b: Vec<f64> = (0..700).map(|i| 1.0 / (1.0 + i as f64)).collect();
        let d = linear_convolve(&a, &b, 701, usize::MAX);
        let f = linear_convolve(&a, &b, 701, 16);
        for (x, y) in d.iter().zip(&f) {
            assert!((x - y).abs() < 1e-12 * d.iter().cloned().fold(0.0, f64::max));
        }
    }

    #[test]
    fn too_few_cells_rejected() {
        assert!(matches!(
            GridFunction::from_density(&DensitySpec::uniform(1.0).unwrap(), 1.0, 4),
            Err(Error::ResolutionTooCoarse(_))
        ));
    }

    #[test]
    fn cell_moments_far_cells_match_closed_form() {
        let (m0, m1) = cell_moments(-0.7, 0.01, 40);
        let h: f64 = 0.01;
        for j in [16usize, 30, 39] {
            let a = (j as f64 + 1.0).powf(0.3) - (j as f64).powf(0.3);
            assert_relative_eq!(m0[j], h.powf(0.3) * a / 0.3, max_relative = 1e-10);
            assert!(m1[j] > 0.0 && m1[j] < m0[j]);
        }
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(24))]
        #[test]
        fn pair_conserves_mass_of_compact_laws(a in 0.05f64..0.35, b in 0.0f64..3.0) {
            // continuous hat on [0, 0.45], so the sum stays inside [0, 1]
            let tab = crate::dist::TabulatedDensity::new(vec![0.0, a, 0.4, 0.45], vec![0.0, 1.0, b, 0.0], true).unwrap();
            let g = GridFunction::from_density(&DensitySpec::tabulated(tab), 1.0, 4000).unwrap();
            prop_assert!(g.log_mass().abs() < 1e-5);
            let two = convolve_pair(&g, &g, &ConvolveOptions::default()).unwrap();
            prop_assert!(two.log_mass().abs() < 1e-5);
        }
    }
}

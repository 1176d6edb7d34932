//! Wave propagator, Duhamel solutions, a time-stepping oracle and the
//! heat-from-wave transmutation integral.

use crate::csv::{num, CsvTable};
use crate::error::{Error, Result};
use crate::manifold::DiscreteManifold;
use crate::quadrature::gauss_legendre;
use crate::spectral::SpectralDecomposition;
use nalgebra::DVector;

/// Smooth bump `a(t) = amplitude · exp(4 − 1/(x(1−x)))`, `x = (t−start)/(end−start)`,
/// supported in `[start, end]` inside the window `(0, horizon)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TimeProfile {
    pub start: f64,
    pub end: f64,
    pub horizon: f64,
    pub amplitude: f64,
}

impl TimeProfile {
    pub fn new(start: f64, end: f64, horizon: f64, amplitude: f64) -> Result<Self> {
        if !(0.0 < start && start < end && end < horizon && amplitude.is_finite()) {
            return Err(Error::InvalidParameter(format!(
                "profile needs 0 < start < end < horizon, got {start}, {end}, {horizon}"
            )));
        }
        Ok(TimeProfile { start, end, horizon, amplitude })
    }

    pub fn eval(&self, t: f64) -> f64 {
        if t <= self.start || t >= self.end {
            return 0.0;
        }
        let x = (t - self.start) / (self.end - self.start);
        self.amplitude * (4.0 - 1.0 / (x * (1.0 - x))).exp()
    }

    /// `(t, a(t))` on a uniform grid of `n` interior points of `(0, horizon)`.
    pub fn samples(&self, n: usize) -> Vec<(f64, f64)> {
        (1..=n)
            .map(|j| {
                let t = self.horizon * j as f64 / (n + 1) as f64;
                (t, self.eval(t))
            })
            .collect()
    }
}

/// Source `a(t)·v`.
#[derive(Debug, Clone)]
pub struct WaveSource {
    pub profile: TimeProfile,
    pub shape: DVector<f64>,
}

/// `sin(t√λ)/√λ`, equal to `t` at `λ = 0`.
pub fn wave_kernel_coefficient(lambda: f64, t: f64) -> f64 {
    let lambda = lambda.max(0.0);
    if lambda == 0.0 {
        t
    } else {
        let w = lambda.sqrt();
        (t * w).sin() / w
    }
}

/// `sin(tA^{1/2})/A^{1/2} f`.
pub fn wave_kernel_apply(d: &SpectralDecomposition, t: f64, f: &DVector<f64>) -> Result<DVector<f64>> {
    if !(t >= 0.0) {
        return Err(Error::NegativeTime(t));
    }
    d.apply_function(|l| wave_kernel_coefficient(l, t), f)
}

const GL_POINTS: usize = 16;

/// Per-mode coefficients `∫ s(t−τ) a(τ) dτ` for `s` one of the two kernels.
fn duhamel_modes(d: &SpectralDecomposition, profile: &TimeProfile, t: f64, velocity: bool) -> Result<DVector<f64>> {
    let n = d.n_modes();
    let hi = t.min(profile.end);
    if hi <= profile.start {
        return Ok(DVector::zeros(n));
    }
    let (x, w) = gauss_legendre(GL_POINTS);
    let lambdas = d.eigenvalues();
    let integrate = |panels: usize| -> DVector<f64> {
        let mut acc = DVector::zeros(n);
        let width = (hi - profile.start) / panels as f64;
        for p in 0..panels {
            let a = profile.start + p as f64 * width;
            for (xq, wq) in x.iter().zip(&w) {
                let tau = a + 0.5 * width * (xq + 1.0);
                let amp = 0.5 * width * wq * profile.eval(tau);
                for (k, &l) in lambdas.iter().enumerate() {
                    let s = if velocity {
                        ((t - tau) * l.max(0.0).sqrt()).cos()
                    } else {
                        wave_kernel_coefficient(l, t - tau)
                    };
                    acc[k] += amp * s;
                }
            }
        }
        acc
    };
    let mut panels = 4;
    let mut prev = integrate(panels);
    loop {
        panels *= 2;
        let next = integrate(panels);
        let change = (&next - &prev).amax();
        if change <= 1e-14 * next.amax().max(profile.amplitude.abs() * (hi - profile.start)) {
            return Ok(next);
        }
        if panels >= 4096 {
            return Err(Error::Quadrature { achieved: change, wanted: 1e-14, step: (hi - profile.start) / panels as f64 });
        }
        prev = next;
    }
}

/// `u(t) = ∫₀^t sin((t−τ)A^{1/2})/A^{1/2} a(τ)v dτ`.
pub fn duhamel_solve(d: &SpectralDecomposition, source: &WaveSource, t_eval: f64) -> Result<DVector<f64>> {
    Ok(duhamel_state(d, source, t_eval)?.0)
}

/// `(u(t), u'(t))` of the Duhamel solution.
pub fn duhamel_state(d: &SpectralDecomposition, source: &WaveSource, t_eval: f64) -> Result<(DVector<f64>, DVector<f64>)> {
    if !(t_eval >= 0.0) {
        return Err(Error::NegativeTime(t_eval));
    }
    if t_eval > source.profile.horizon {
        return Err(Error::InvalidParameter(format!("t = {t_eval} beyond horizon {}", source.profile.horizon)));
    }
    let c = d.coefficients(&source.shape);
    let pos = duhamel_modes(d, &source.profile, t_eval, false)?.component_mul(&c);
    let vel = duhamel_modes(d, &source.profile, t_eval, true)?.component_mul(&c);
    Ok((d.synthesize(&pos), d.synthesize(&vel)))
}

/// `½‖v‖²_m + ½(Au, u)_m`.
pub fn energy(m: &DiscreteManifold, u: &DVector<f64>, v: &DVector<f64>) -> f64 {
    0.5 * m.inner(v, v) + 0.5 * m.inner(&m.apply_laplacian(u), u)
}

#[derive(Debug, Clone)]
pub struct OdeSolution {
    pub u: DVector<f64>,
    pub v: DVector<f64>,
    pub dt: f64,
    /// `(t, energy)` at every step after the source switches off.
    pub energy: Vec<(f64, f64)>,
}

impl OdeSolution {
    /// Largest relative energy change after the source switched off.
    pub fn energy_drift(&self) -> f64 {
        let Some(&(_, e0)) = self.energy.first() else { return 0.0 };
        let worst = self.energy.iter().map(|&(_, e)| (e - e0).abs()).fold(0.0, f64::max);
        if e0 == 0.0 {
            worst
        } else {
            worst / e0
        }
    }
}

/// Classical RK4 on `u' = v, v' = a(t)·shape − Lu` with the sparse operator.
pub fn ode_oracle(m: &DiscreteManifold, source: &WaveSource, t_eval: f64, dt: f64) -> Result<OdeSolution> {
    if !(t_eval >= 0.0) {
        return Err(Error::NegativeTime(t_eval));
    }
    let limit = 0.1 / m.eigenvalue_bound().sqrt();
    if !(dt > 0.0 && dt <= limit) {
        return Err(Error::StepTooCoarse { dt, limit });
    }
    let steps = ((t_eval / dt) - 1e-9).ceil().max(0.0) as usize;
    let n = m.n();
    let mut u = DVector::zeros(n);
    let mut v = DVector::zeros(n);
    let mut energy_log = Vec::new();
    if steps == 0 {
        return Ok(OdeSolution { u, v, dt, energy: energy_log });
    }
    let h = t_eval / steps as f64;
    let accel = |t: f64, u: &DVector<f64>| &source.shape * source.profile.eval(t) - m.apply_laplacian(u);
    for step in 0..steps {
        let t = step as f64 * h;
        let k1u = v.clone();
        let k1v = accel(t, &u);
        let k2u = &v + &k1v * (0.5 * h);
        let k2v = accel(t + 0.5 * h, &(&u + &k1u * (0.5 * h)));
        let k3u = &v + &k2v * (0.5 * h);
        let k3v = accel(t + 0.5 * h, &(&u + &k2u * (0.5 * h)));
        let k4u = &v + &k3v * h;
        let k4v = accel(t + h, &(&u + &k3u * h));
        u += (k1u + k2u * 2.0 + k3u * 2.0 + k4u) * (h / 6.0);
        v += (k1v + k2v * 2.0 + k3v * 2.0 + k4v) * (h / 6.0);
        let t_next = (step + 1) as f64 * h;
        let e = energy(m, &u, &v);
        if !e.is_finite() {
            return Err(Error::Unstable(t_next));
        }
        if t_next >= source.profile.end {
            // Energy is conserved once the source is off; growth means blow-up.
            match energy_log.first() {
                Some(&(_, e0)) if e > 10.0 * e0 + f64::MIN_POSITIVE => return Err(Error::Unstable(t_next)),
                _ => energy_log.push((t_next, e)),
            }
        }
    }
    Ok(OdeSolution { u, v, dt: h, energy: energy_log })
}

/// Quadrature settings for the transmutation integral.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TransmuteParams {
    pub points_per_period: f64,
    /// Absolute accuracy relative to the size of the input.
    pub tolerance: f64,
}

impl Default for TransmuteParams {
    fn default() -> Self {
        TransmuteParams { points_per_period: 20.0, tolerance: 1e-10 }
    }
}

/// `(t^{-3/2}/(4√π)) ∫₀^∞ e^{-τ/4t} w(√τ) dτ` with `τ = σ²`, where `w(σ)`
/// is the wave kernel at time σ; trapezoid certified by step halving.
fn transmute_core(
    t: f64,
    lambda_max: f64,
    scale: f64,
    wave: impl Fn(f64) -> DVector<f64>,
    params: &TransmuteParams,
) -> Result<DVector<f64>> {
    if !(t > 0.0) {
        return Err(Error::InvalidParameter(format!("transmutation needs t > 0, got {t}")));
    }
    let sigma_max = 2.0 * (t * ((1.0 / f64::EPSILON).ln() + 10.0)).sqrt();
    let resolve = 2.0 * std::f64::consts::PI / (params.points_per_period * lambda_max.max(1e-300).sqrt());
    let mut h = resolve.min(sigma_max / 64.0);
    let pref = t.powf(-1.5) / (4.0 * std::f64::consts::PI.sqrt());
    let term = |s: f64| wave(s) * (2.0 * s * (-s * s / (4.0 * t)).exp());
    for _ in 0..6 {
        let n = (sigma_max / h).ceil() as usize;
        let hh = sigma_max / n as f64;
        let mut fine = term(sigma_max) * 0.5;
        let mut coarse = term(sigma_max) * 0.5;
        for j in 1..n {
            let v = term(j as f64 * hh);
            if j.is_multiple_of(2) && n.is_multiple_of(2) {
                coarse += &v;
            }
            fine += v;
        }
        let fine = fine * (hh * pref);
        let coarse = coarse * (2.0 * hh * pref);
        let err = if n.is_multiple_of(2) { (&fine - &coarse).norm() } else { f64::INFINITY };
        if err <= params.tolerance * scale {
            return Ok(fine);
        }
        h = hh / 2.0;
    }
    Err(Error::Truncation { bound: f64::NAN, tolerance: params.tolerance })
}

/// Scalar transmutation integral, equal to `e^{-λt}`.
pub fn transmute_scalar(lambda: f64, t: f64, params: &TransmuteParams) -> Result<f64> {
    let v = transmute_core(t, lambda, 1.0, |s| DVector::from_element(1, wave_kernel_coefficient(lambda, s)), params)?;
    Ok(v[0])
}

/// `e^{-tA}f` assembled from wave propagators.
pub fn transmute_heat(d: &SpectralDecomposition, t: f64, f: &DVector<f64>, params: &TransmuteParams) -> Result<DVector<f64>> {
    let c = d.coefficients(f);
    let lambdas = d.eigenvalues();
    let coeffs = transmute_core(
        t,
        d.lambda_max(),
        c.norm().max(f64::MIN_POSITIVE),
        |s| DVector::from_iterator(c.len(), c.iter().zip(lambdas).map(|(ck, &l)| ck * wave_kernel_coefficient(l, s))),
        params,
    )?;
    Ok(d.synthesize(&coeffs))
}

/// `t, vertex, value` rows.
pub fn snapshot_table(frames: &[(f64, DVector<f64>)]) -> CsvTable {
    let mut table = CsvTable::new(&["t", "vertex", "value"]);
    for (t, u) in frames {
        for (v, x) in u.iter().enumerate() {
            table.push(vec![num(*t), v.to_string(), num(*x)]);
        }
    }
    table
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fractional::heat_apply;
    use crate::spectral::decompose;

    #[test]
    fn kernel_limits() {
        let d = decompose(&DiscreteManifold::cycle(6).unwrap()).unwrap();
        let f = DVector::from_vec(vec![1.0, 2.0, 0.0, -1.0, 3.0, 0.5]);
        assert!(wave_kernel_apply(&d, 0.0, &f).unwrap().amax() < 1e-15);
        let phi = d.eigenvectors().column(1).into_owned();
        let got = wave_kernel_apply(&d, 0.8, &phi).unwrap();
        assert!((got - 0.8f64.sin() * &phi).amax() < 1e-14);
        let ones = DVector::from_element(6, 1.0);
        assert!((wave_kernel_apply(&d, 1.5, &ones).unwrap() - 1.5 * &ones).amax() < 1e-14);
    }

    #[test]
    fn bump_vanishes_outside_support() {
        let p = TimeProfile::new(0.5, 2.0, 3.0, 1.0).unwrap();
        assert_eq!(p.eval(0.4), 0.0);
        assert_eq!(p.eval(2.5), 0.0);
        assert!((p.eval(1.25) - 1.0).abs() < 1e-15);
        assert!(TimeProfile::new(0.0, 1.0, 2.0, 1.0).is_err());
        assert_eq!(p.samples(5).len(), 5);
    }

    #[test]
    fn single_mode_duhamel_matches_rk4() {
        let m = DiscreteManifold::cycle(6).unwrap();
        let d = decompose(&m).unwrap();
        let shape = d.eigenvectors().column(1).into_owned();
        let src = WaveSource { profile: TimeProfile::new(0.5, 2.5, 6.0, 1.0).unwrap(), shape };
        let u = duhamel_solve(&d, &src, 4.0).unwrap();
        let o = ode_oracle(&m, &src, 4.0, 0.01).unwrap();
        assert!((u - o.u).amax() < 1e-6);
    }

    #[test]
    fn zero_source_gives_zero() {
        let m = DiscreteManifold::cycle(6).unwrap();
        let d = decompose(&m).unwrap();
        let src = WaveSource { profile: TimeProfile::new(0.5, 2.5, 6.0, 0.0).unwrap(), shape: DVector::zeros(6) };
        assert_eq!(duhamel_solve(&d, &src, 3.0).unwrap().amax(), 0.0);
        assert_eq!(ode_oracle(&m, &src, 3.0, 0.01).unwrap().u.amax(), 0.0);
    }

    #[test]
    fn coarse_step_is_refused() {
        let m = DiscreteManifold::cycle(6).unwrap();
        let src = WaveSource { profile: TimeProfile::new(0.5, 2.5, 6.0, 1.0).unwrap(), shape: DVector::zeros(6) };
        assert!(matches!(ode_oracle(&m, &src, 3.0, 0.1), Err(Error::StepTooCoarse { .. })));
    }

    #[test]
    fn scalar_transmutation() {
        let p = TransmuteParams::default();
        assert!((transmute_scalar(1.0, 1.0, &p).unwrap() - 0.3678794412).abs() < 1e-8);
        assert!((transmute_scalar(0.0, 0.7, &p).unwrap() - 1.0).abs() < 1e-10);
    }

    #[test]
    fn operator_transmutation_on_cycle() {
        let d = decompose(&DiscreteManifold::cycle(12).unwrap()).unwrap();
        let f = DVector::from_fn(12, |i, _| ((i * 5 % 7) as f64) - 3.0);
        let got = transmute_heat(&d, 0.5, &f, &TransmuteParams::default()).unwrap();
        assert!((got - heat_apply(&d, 0.5, &f).unwrap()).amax() < 1e-6);
        let ones = DVector::from_element(12, 1.0);
        let got = transmute_heat(&d, 0.5, &ones, &TransmuteParams::default()).unwrap();
        assert!((got - ones).amax() < 1e-10);
    }
}

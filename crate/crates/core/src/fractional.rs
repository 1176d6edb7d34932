//! Heat semigroup, negative and positive fractional powers, off-diagonal
//! heat decay fits and power-moment identities for heat differences.

use crate::error::{Error, Result};
use crate::manifold::{graph_distance, DiscreteManifold, Region};
use crate::pair::{HeatDifference, ManifoldPair, PowerIntegral, RestrictionOperator};
use crate::quadrature::{trapezoid_refine, Refined, RefinementStep};
use crate::spectral::{SpectralDecomposition, KERNEL_TOLERANCE};
use nalgebra::DVector;

pub fn gamma(x: f64) -> f64 {
    libm::tgamma(x)
}

/// `e^{-tA} f`.
pub fn heat_apply(d: &SpectralDecomposition, t: f64, f: &DVector<f64>) -> Result<DVector<f64>> {
    if !(t >= 0.0) {
        return Err(Error::NegativeTime(t));
    }
    d.apply_function(|l| (-l * t).exp(), f)
}

/// Exponent and log-variable quadrature settings.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FracParams {
    pub alpha: f64,
    /// Initial step in `s = ln t`, halved until converged.
    pub step: f64,
    pub s_min: f64,
    pub s_max: f64,
    /// Relative target accuracy.
    pub tolerance: f64,
    /// Lower bound on the positive spectrum, used for tail certificates.
    pub lambda_min: f64,
}

impl FracParams {
    /// Head cut where `t^α` drops below machine epsilon; tail cut where
    /// `e^{-λ_min t}` does.
    pub fn new(alpha: f64, lambda_min: f64, tolerance: f64) -> Result<Self> {
        if !(lambda_min > 0.0) {
            return Err(Error::InvalidParameter(format!("lambda_min = {lambda_min}")));
        }
        let eps = f64::EPSILON;
        let alpha_ok = alpha > 0.0 && alpha < 1.0;
        let p = FracParams {
            alpha,
            step: 0.5,
            s_min: if alpha_ok { eps.ln() / alpha } else { -1.0 },
            s_max: ((1.0 / eps).ln() / lambda_min).ln() + 1.0,
            tolerance,
            lambda_min,
        };
        p.validate()?;
        Ok(p)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.alpha > 0.0 && self.alpha < 1.0) {
            return Err(Error::InvalidParameter(format!("alpha = {} must lie in (0, 1)", self.alpha)));
        }
        if !(self.s_min < self.s_max) {
            return Err(Error::InvalidParameter(format!("s_min {} >= s_max {}", self.s_min, self.s_max)));
        }
        if !(self.tolerance > 0.0 && self.step > 0.0) {
            return Err(Error::InvalidParameter("tolerance and step must be positive".into()));
        }
        Ok(())
    }

    pub fn with_alpha(&self, alpha: f64) -> Result<Self> {
        FracParams::new(alpha, self.lambda_min, self.tolerance)
    }
}

fn check_kernel(d: &SpectralDecomposition, f: &DVector<f64>) -> Result<()> {
    let c = d.kernel_component(f);
    if c > KERNEL_TOLERANCE {
        return Err(Error::KernelComponent { component: c, tolerance: KERNEL_TOLERANCE });
    }
    Ok(())
}

/// `Σ_{λ_k>0} λ_k^{-α}(f, φ_k)_m φ_k`.
pub fn frac_inverse_spectral(d: &SpectralDecomposition, p: &FracParams, f: &DVector<f64>) -> Result<DVector<f64>> {
    p.validate()?;
    check_kernel(d, f)?;
    d.apply_function(|l| if l > 0.0 { l.powf(-p.alpha) } else { f64::INFINITY }, f)
}

/// `(1/Γ(α)) ∫₀^∞ t^{α-1} e^{-tA} f dt` with `t = e^s`, using only the
/// black-box semigroup.
pub fn frac_inverse_quadrature(
    heat: impl Fn(f64) -> DVector<f64>,
    p: &FracParams,
    f: &DVector<f64>,
) -> Result<(DVector<f64>, Refined)> {
    p.validate()?;
    let norm = f.norm();
    let g = gamma(p.alpha);
    let head = (p.alpha * p.s_min).exp() / (p.alpha * g);
    let t_max = p.s_max.exp();
    let tail = t_max.powf(p.alpha - 1.0) * (-p.lambda_min * t_max).exp() / (p.lambda_min * g);
    if head + tail > 0.1 * p.tolerance {
        return Err(Error::Truncation { bound: head + tail, tolerance: 0.1 * p.tolerance });
    }
    // A kernel component keeps the semigroup from decaying.
    let end = heat(t_max).norm();
    let mid = heat(0.5 * t_max).norm();
    if norm > 0.0 && end > 1e-10 * norm && end > 0.5 * mid {
        return Err(Error::Truncation { bound: f64::INFINITY, tolerance: p.tolerance });
    }
    let refined = trapezoid_refine(
        |s| {
            let t = s.exp();
            heat(t) * (t.powf(p.alpha) / g)
        },
        p.s_min,
        p.s_max,
        p.step,
        p.tolerance * norm.max(f64::MIN_POSITIVE) * 0.1,
        16,
    )?;
    Ok((refined.value.clone(), refined))
}

/// `A^α f` computed as `A · A^{-(1-α)}` on the part of `f` orthogonal to
/// the kernel; the kernel part maps to zero.
pub fn frac_power(d: &SpectralDecomposition, p: &FracParams, f: &DVector<f64>) -> Result<DVector<f64>> {
    p.validate()?;
    let mut c = d.coefficients(f);
    for (k, &l) in d.eigenvalues().iter().enumerate() {
        if l == 0.0 {
            c[k] = 0.0;
        }
    }
    let range_part = d.synthesize(&c);
    let q = FracParams { alpha: 1.0 - p.alpha, ..*p };
    let inner = d.apply_function(|l| if l > 0.0 { l.powf(-q.alpha) } else { 0.0 }, &range_part)?;
    d.apply_function(|l| l, &inner)
}

/// Fitted `log‖χ e^{-tA} f‖_m ≈ log C − μ/t`.
#[derive(Debug, Clone, PartialEq)]
pub struct DecayFit {
    pub c: f64,
    pub mu: f64,
    /// Root-mean-square residual of the log fit.
    pub residual: f64,
    /// Spread of the fitted log norms.
    pub log_range: f64,
    pub t_min: f64,
    pub t_max: f64,
    pub samples: usize,
    pub distance: f64,
}

impl DecayFit {
    pub fn relative_residual(&self) -> f64 {
        self.residual / self.log_range
    }
}

const DECAY_FLOOR: f64 = 1e-12;
const DECAY_MIN_SAMPLES: usize = 8;

pub fn decay_fit(
    m: &DiscreteManifold,
    d: &SpectralDecomposition,
    o_src: &Region,
    o_obs: &Region,
    f: &DVector<f64>,
    t_grid: &[f64],
) -> Result<DecayFit> {
    let distance = graph_distance(m, o_src, o_obs)?;
    if let Some(v) = (0..m.n()).find(|&v| f[v] != 0.0 && !o_src.contains(v)) {
        return Err(Error::InvalidParameter(format!("source is nonzero at vertex {v} outside its region")));
    }
    if t_grid.iter().any(|&t| !(t > 0.0 && t <= 1.0)) {
        return Err(Error::InvalidParameter("time samples must lie in (0, 1]".into()));
    }
    let mut xs = Vec::new();
    let mut ys = Vec::new();
    for &t in t_grid {
        let u = heat_apply(d, t, f)?;
        let norm = o_obs.vertices().iter().map(|&v| m.mass()[v] * u[v] * u[v]).sum::<f64>().sqrt();
        if norm >= DECAY_FLOOR {
            xs.push(1.0 / t);
            ys.push(norm.ln());
        }
    }
    if xs.is_empty() {
        return Err(Error::BelowFloor(DECAY_FLOOR));
    }
    if xs.len() < DECAY_MIN_SAMPLES {
        return Err(Error::TooSmall { what: "samples above floor", got: xs.len(), min: DECAY_MIN_SAMPLES });
    }
    let n = xs.len() as f64;
    let mx = xs.iter().sum::<f64>() / n;
    let my = ys.iter().sum::<f64>() / n;
    let sxx: f64 = xs.iter().map(|x| (x - mx).powi(2)).sum();
    let sxy: f64 = xs.iter().zip(&ys).map(|(x, y)| (x - mx) * (y - my)).sum();
    let slope = sxy / sxx;
    let intercept = my - slope * mx;
    let residual = (xs.iter().zip(&ys).map(|(x, y)| (y - intercept - slope * x).powi(2)).sum::<f64>() / n).sqrt();
    let log_range = ys.iter().cloned().fold(f64::NEG_INFINITY, f64::max) - ys.iter().cloned().fold(f64::INFINITY, f64::min);
    Ok(DecayFit {
        c: intercept.exp(),
        mu: -slope,
        residual,
        log_range,
        t_min: 1.0 / xs.iter().cloned().fold(f64::NEG_INFINITY, f64::max),
        t_max: 1.0 / xs.iter().cloned().fold(f64::INFINITY, f64::min),
        samples: xs.len(),
        distance,
    })
}

/// Both sides of the moment identity for `A^{-α} A^k`.
#[derive(Debug, Clone)]
pub struct MomentIdentity {
    pub k: usize,
    pub alpha: f64,
    pub lhs: DVector<f64>,
    pub rhs: DVector<f64>,
    pub vanishing_order: Option<usize>,
    pub log: Vec<RefinementStep>,
}

impl MomentIdentity {
    pub fn abs_error(&self) -> f64 {
        (&self.lhs - &self.rhs).norm()
    }

    /// Error relative to the left side (absolute when the left side is 0).
    pub fn rel_error(&self) -> f64 {
        let l = self.lhs.norm();
        if l == 0.0 {
            self.abs_error()
        } else {
            self.abs_error() / l
        }
    }
}

/// Left side `B A₁^{-α} A₁^k f − B A₂^{-α} A₁^k f` by spectral calculus;
/// right side `(1/Γ(α)) ∏_{j<k}(α−1−j) ∫ t^{α−1−k} φ(t) dt` with
/// `φ(t) = B e^{-tA₁}f − B e^{-tA₂}f`.
pub fn moment_identity(
    pair: &ManifoldPair,
    b: &RestrictionOperator,
    f: &DVector<f64>,
    k: usize,
    p: &FracParams,
) -> Result<MomentIdentity> {
    p.validate()?;
    if k == 0 {
        return Err(Error::InvalidParameter("moment order k must be at least 1".into()));
    }
    let depth = pair.support_depth(f);
    if depth < k + 1 {
        return Err(Error::MarginInsufficient { needed: k, available: depth.saturating_sub(1) });
    }
    let mut g = f.clone();
    for _ in 0..k {
        g = pair.apply_laplacian(0, &g)?;
    }
    let sides: Vec<DVector<f64>> = (0..2)
        .map(|s| {
            let u = frac_inverse_spectral(&pair.side(s).spectrum, p, &pair.embed(s, &g))?;
            Ok(b.apply(&pair.restrict(s, &u)))
        })
        .collect::<Result<_>>()?;
    let lhs = &sides[0] - &sides[1];
    let diff = HeatDifference::new(pair, b, f);
    let factor: f64 = (0..k).map(|j| p.alpha - 1.0 - j as f64).product::<f64>() / gamma(p.alpha);
    let tol = p.tolerance * diff.source_norm() / factor.abs();
    match diff.power_integral(p.alpha - 1.0 - k as f64, tol)? {
        PowerIntegral::Finite { value, log, order } => Ok(MomentIdentity {
            k,
            alpha: p.alpha,
            lhs,
            rhs: value * factor,
            vanishing_order: order,
            log,
        }),
        PowerIntegral::Divergent { order } => Err(Error::Quadrature {
            achieved: f64::INFINITY,
            wanted: tol,
            step: order as f64,
        }),
    }
}

/// `∫₀^∞ s^k T(s) ds` with `T(s) = s^{-α}φ(1/s)`, i.e. `∫ t^{α−k−2} φ(t) dt`.
#[derive(Debug, Clone)]
pub struct Moment {
    pub k: usize,
    /// `None` when the integral diverges at `s → ∞`.
    pub value: Option<DVector<f64>>,
}

impl Moment {
    pub fn norm(&self) -> f64 {
        self.value.as_ref().map_or(f64::INFINITY, |v| v.norm())
    }
}

pub fn heat_difference_moments(
    pair: &ManifoldPair,
    b: &RestrictionOperator,
    f: &DVector<f64>,
    k_max: usize,
    p: &FracParams,
) -> Result<Vec<Moment>> {
    p.validate()?;
    let diff = HeatDifference::new(pair, b, f);
    let tol = p.tolerance * diff.source_norm();
    (0..=k_max)
        .map(|k| {
            let beta = p.alpha - k as f64 - 2.0;
            Ok(match diff.power_integral(beta, tol)? {
                PowerIntegral::Finite { value, .. } => Moment { k, value: Some(value) },
                PowerIntegral::Divergent { .. } => Moment { k, value: None },
            })
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::spectral::decompose;

    fn params(alpha: f64, d: &SpectralDecomposition) -> FracParams {
        FracParams::new(alpha, d.smallest_positive(), 1e-10).unwrap()
    }

    #[test]
    fn heat_basics() {
        let m = DiscreteManifold::cycle(6).unwrap();
        let d = decompose(&m).unwrap();
        let f = DVector::from_vec(vec![1.0, 0.0, 2.0, -1.0, 0.5, 0.0]);
        assert!((heat_apply(&d, 0.0, &f).unwrap() - &f).amax() < 1e-14);
        assert!(matches!(heat_apply(&d, -1.0, &f), Err(Error::NegativeTime(_))));
        let phi = d.eigenvectors().column(2).into_owned();
        let got = heat_apply(&d, 0.7, &phi).unwrap();
        assert!((got - (-0.7 * d.eigenvalues()[2]).exp() * &phi).amax() < 1e-14);
        let mut last = f64::INFINITY;
        for k in -10..4 {
            let n = d.norm(&heat_apply(&d, 2f64.powi(k), &f).unwrap());
            assert!(n <= last + 1e-15);
            last = n;
        }
    }

    #[test]
    fn scalar_subordination_gives_one() {
        let g = gamma(0.5);
        let p = FracParams::new(0.5, 1.0, 1e-12).unwrap();
        let (v, _) = frac_inverse_quadrature(|t| DVector::from_element(1, (-t).exp()), &p, &DVector::from_element(1, 1.0)).unwrap();
        assert!((v[0] - 1.0).abs() < 1e-11, "{} {g}", v[0]);
    }

    #[test]
    fn cycle_six_half_power_of_first_mode() {
        let d = decompose(&DiscreteManifold::cycle(6).unwrap()).unwrap();
        let p = params(0.5, &d);
        let phi = d.eigenvectors().column(1).into_owned();
        let (q, _) = frac_inverse_quadrature(|t| heat_apply(&d, t, &phi).unwrap(), &p, &phi).unwrap();
        assert!((&q - &phi).amax() < 1e-8);
        let s = frac_inverse_spectral(&d, &p, &phi).unwrap();
        assert!((s - phi).amax() < 1e-12);
    }

    #[test]
    fn constant_source_is_rejected() {
        let d = decompose(&DiscreteManifold::cycle(6).unwrap()).unwrap();
        let p = params(0.5, &d);
        let ones = DVector::from_element(6, 1.0);
        assert!(matches!(frac_inverse_spectral(&d, &p, &ones), Err(Error::KernelComponent { .. })));
        assert!(frac_inverse_quadrature(|t| heat_apply(&d, t, &ones).unwrap(), &p, &ones).is_err());
    }

    #[test]
    fn powers_invert_each_other() {
        let d = decompose(&DiscreteManifold::flat_torus(5, 4, 1.0, 1.0).unwrap()).unwrap();
        let mut f = DVector::from_fn(20, |i, _| ((i * 7 % 5) as f64) - 2.0);
        let mean = f.mean();
        f.add_scalar_mut(-mean);
        for alpha in [0.25, 0.5, 0.75] {
            let p = params(alpha, &d);
            let inv = frac_inverse_spectral(&d, &p, &f).unwrap();
            assert!((frac_power(&d, &p, &inv).unwrap() - &f).amax() < 1e-9);
            let back = d.apply_function(|l| l.powf(alpha), &inv).unwrap();
            assert!((back - &f).amax() < 1e-9);
        }
    }

    #[test]
    fn frac_power_on_eigenvectors_and_near_one() {
        let d = decompose(&DiscreteManifold::cycle(7).unwrap()).unwrap();
        let phi = d.eigenvectors().column(3).into_owned();
        let l = d.eigenvalues()[3];
        let p = params(0.3, &d);
        assert!((frac_power(&d, &p, &phi).unwrap() - l.powf(0.3) * &phi).amax() < 1e-12);
        let p = params(0.999, &d);
        let got = frac_power(&d, &p, &phi).unwrap();
        assert!((got - l * &phi).norm() / (l * phi.norm()) < 0.01);
        let ones = DVector::from_element(7, 1.0);
        assert!(frac_power(&d, &p, &ones).unwrap().amax() < 1e-12);
    }

    #[test]
    fn params_validation() {
        assert!(FracParams::new(1.0, 1.0, 1e-8).is_err());
        assert!(FracParams::new(0.0, 1.0, 1e-8).is_err());
        assert!(FracParams::new(0.5, 1.0, 0.0).is_err());
        assert!(FracParams::new(0.5, 0.0, 1e-8).is_err());
    }

    #[test]
    fn decay_fit_on_wide_time_range_still_decays() {
        let m = DiscreteManifold::flat_torus(12, 12, 1.0, 1.0).unwrap();
        let d = decompose(&m).unwrap();
        let src = Region::new(&m, vec![0]).unwrap();
        let obs = Region::new(&m, vec![3]).unwrap();
        let mut f = DVector::zeros(144);
        f[0] = 1.0;
        let grid: Vec<f64> = (0..16).map(|i| 0.05 * 20f64.powf(i as f64 / 15.0)).collect();
        let fit = decay_fit(&m, &d, &src, &obs, &f, &grid).unwrap();
        assert!(fit.mu > 0.0);
        assert_eq!(fit.distance, 3.0);
        assert!(matches!(decay_fit(&m, &d, &src, &src, &f, &grid), Err(Error::OverlappingRegions)));
    }
}

//! Trapezoid refinement and Gauss-Legendre rules.

use crate::csv::{num, CsvTable};
use crate::error::{Error, Result};
use nalgebra::DVector;

/// One refinement level: step, norm of the estimate, change from the
/// previous level.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RefinementStep {
    pub h: f64,
    pub norm: f64,
    pub delta: f64,
}

#[derive(Debug, Clone)]
pub struct Refined {
    pub value: DVector<f64>,
    pub log: Vec<RefinementStep>,
}

impl Refined {
    pub fn step(&self) -> f64 {
        self.log.last().map_or(f64::NAN, |r| r.h)
    }
}

/// Composite trapezoid on `[a, b]`, halving the step from `h0` until two
/// successive estimates differ by less than `tol / 4` (or by less than the
/// rounding floor of the sum).
pub fn trapezoid_refine(
    mut g: impl FnMut(f64) -> DVector<f64>,
    a: f64,
    b: f64,
    h0: f64,
    tol: f64,
    max_levels: usize,
) -> Result<Refined> {
    if !(b > a && h0 > 0.0 && tol > 0.0) {
        return Err(Error::InvalidParameter(format!("trapezoid on [{a}, {b}] with step {h0}, tol {tol}")));
    }
    let n0 = ((b - a) / h0).ceil().max(2.0) as usize;
    let mut h = (b - a) / n0 as f64;
    let ga = g(a);
    let gb = g(b);
    let mut abs_sum = 0.5 * (ga.norm() + gb.norm());
    let mut sum = (ga + gb) * 0.5;
    for j in 1..n0 {
        let v = g(a + j as f64 * h);
        abs_sum += v.norm();
        sum += v;
    }
    let mut estimate = &sum * h;
    let mut log = vec![RefinementStep { h, norm: estimate.norm(), delta: f64::INFINITY }];
    let mut nodes = n0;
    for _ in 0..max_levels {
        for j in 0..nodes {
            let v = g(a + (j as f64 + 0.5) * h);
            abs_sum += v.norm();
            sum += v;
        }
        nodes *= 2;
        h *= 0.5;
        let next = &sum * h;
        let delta = (&next - &estimate).norm();
        estimate = next;
        log.push(RefinementStep { h, norm: estimate.norm(), delta });
        let floor = 64.0 * f64::EPSILON * h * abs_sum;
        if delta < (0.25 * tol).max(floor) {
            return Ok(Refined { value: estimate, log });
        }
    }
    let last = log.last().unwrap();
    Err(Error::Quadrature { achieved: last.delta, wanted: 0.25 * tol, step: last.h })
}

/// `h_s, estimate_norm, delta` rows.
pub fn refinement_table(log: &[RefinementStep]) -> CsvTable {
    let mut t = CsvTable::new(&["h_s", "estimate_norm", "delta"]);
    for r in log {
        t.push(vec![num(r.h), num(r.norm), num(r.delta)]);
    }
    t
}

/// Nodes and weights of the `n`-point Gauss-Legendre rule on `[-1, 1]`.
pub fn gauss_legendre(n: usize) -> (Vec<f64>, Vec<f64>) {
    let mut nodes = vec![0.0; n];
    let mut weights = vec![0.0; n];
    for i in 0..n.div_ceil(2) {
        let mut x = (std::f64::consts::PI * (i as f64 + 0.75) / (n as f64 + 0.5)).cos();
        let mut dp = 0.0;
        for _ in 0..100 {
            let (mut p0, mut p1) = (1.0, x);
            for k in 2..=n {
                let p2 = ((2 * k - 1) as f64 * x * p1 - (k - 1) as f64 * p0) / k as f64;
                p0 = p1;
                p1 = p2;
            }
            let pn = if n == 1 { x } else { p1 };
            let pm = if n == 1 { 1.0 } else { p0 };
            dp = n as f64 * (x * pn - pm) / (x * x - 1.0);
            let dx = pn / dp;
            x -= dx;
            if dx.abs() < 1e-16 {
                break;
            }
        }
        let w = 2.0 / ((1.0 - x * x) * dp * dp);
        nodes[i] = -x;
        nodes[n - 1 - i] = x;
        weights[i] = w;
        weights[n - 1 - i] = w;
    }
    (nodes, weights)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn gauss_legendre_integrates_polynomials_exactly() {
        let (x, w) = gauss_legendre(8);
        assert!((w.iter().sum::<f64>() - 2.0).abs() < 1e-14);
        for deg in 0..16 {
            let got: f64 = x.iter().zip(&w).map(|(x, w)| w * x.powi(deg)).sum();
            let want = if deg % 2 == 1 { 0.0 } else { 2.0 / (deg + 1) as f64 };
            assert!((got - want).abs() < 1e-14, "degree {deg}");
        }
    }

    #[test]
    fn trapezoid_converges_for_a_gaussian() {
        let r = trapezoid_refine(|s| DVector::from_element(1, (-s * s).exp()), -10.0, 10.0, 1.0, 1e-14, 10).unwrap();
        assert!((r.value[0] - std::f64::consts::PI.sqrt()).abs() < 1e-14);
        assert!(r.log.len() >= 2);
    }

    #[test]
    fn trapezoid_reports_failure() {
        let r = trapezoid_refine(|s| DVector::from_element(1, (50.0 * s).sin().abs()), 0.0, 1.0, 0.5, 1e-14, 2);
        assert!(matches!(r, Err(Error::Quadrature { .. })));
    }
}

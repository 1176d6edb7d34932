use fraclab::fractional::{frac_inverse_spectral, frac_power, heat_apply, FracParams};
use fraclab::harness::{ExperimentConfig, CONFIG_KEYS};
use fraclab::linalg::svd;
use fraclab::manifold::{read_mesh, write_mesh};
use fraclab::recovery::{align_procrustes, pencil_from_channels};
use fraclab::spectral::decompose;
use fraclab::wave::{transmute_scalar, TransmuteParams};
use fraclab::DiscreteManifold;
use nalgebra::{DMatrix, DVector};
use proptest::prelude::*;

fn torus() -> impl Strategy<Value = DiscreteManifold> {
    (3usize..7, 3usize..7, 0.5f64..2.0, 0.5f64..2.0)
        .prop_map(|(nx, ny, hx, hy)| DiscreteManifold::flat_torus(nx, ny, hx, hy).unwrap())
}

fn vector_for(m: &DiscreteManifold, seed: u64) -> DVector<f64> {
    DVector::from_fn(m.n(), |i, _| ((i as f64 + 1.0) * (seed as f64 * 0.618 + 0.3)).sin())
}

fn orthogonal(n: usize, seed: u64) -> DMatrix<f64> {
    DMatrix::from_fn(n, n, |i, j| ((i * 7 + j * 3) as f64 + seed as f64 * 0.37).sin()).qr().q()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(32))]

    #[test]
    fn heat_is_a_contraction_semigroup(m in torus(), seed in 0u64..1000, s in 0.0f64..2.0, t in 0.0f64..2.0) {
        let d = decompose(&m).unwrap();
        let f = vector_for(&m, seed);
        let both = heat_apply(&d, s + t, &f).unwrap();
        let stepped = heat_apply(&d, s, &heat_apply(&d, t, &f).unwrap()).unwrap();
        prop_assert!((&both - &stepped).norm() <= 1e-12 * f.norm().max(1.0));
        prop_assert!(m.norm(&both) <= m.norm(&f) * (1.0 + 1e-12));
    }

    #[test]
    fn spectrum_is_invariant_under_relabeling(m in torus(), shift in 1usize..50) {
        let n = m.n();
        let perm: Vec<usize> = (0..n).map(|i| (i * (2 * n - 1) + shift) % n).collect();
        let a = decompose(&m).unwrap();
        let b = decompose(&m.relabel(&perm).unwrap()).unwrap();
        for (x, y) in a.eigenvalues().iter().zip(b.eigenvalues()) {
            prop_assert!((x - y).abs() <= 1e-10);
        }
    }

    #[test]
    fn fractional_power_inverts_negative_power(m in torus(), seed in 0u64..1000, alpha in 0.05f64..0.95) {
        let d = decompose(&m).unwrap();
        let mut f = vector_for(&m, seed);
        let mean: f64 = f.iter().zip(m.mass()).map(|(x, w)| x * w).sum::<f64>() / m.mass().iter().sum::<f64>();
        f.add_scalar_mut(-mean);
        let p = FracParams::new(alpha, d.smallest_positive(), 1e-12).unwrap();
        let back = frac_power(&d, &p, &frac_inverse_spectral(&d, &p, &f).unwrap()).unwrap();
        prop_assert!((&back - &f).norm() <= 1e-9 * f.norm());
    }

    #[test]
    fn transmutation_reproduces_exponentials(lambda in 0.0f64..8.0, t in 0.05f64..3.0) {
        let v = transmute_scalar(lambda, t, &TransmuteParams::default()).unwrap();
        prop_assert!((v - (-lambda * t).exp()).abs() <= 1e-7);
    }

    #[test]
    fn procrustes_recovers_a_rotation(rows in 3usize..9, cols in 1usize..3, seed in 0u64..1000) {
        let phi1 = DMatrix::from_fn(rows, cols, |i, j| ((i * 5 + j * 11) as f64 + seed as f64).cos());
        let r = orthogonal(cols, seed);
        let fit = align_procrustes(&phi1, &(&phi1 * &r)).unwrap();
        prop_assert!(fit.residual <= 1e-12);
        prop_assert!((fit.rotation - r).amax() <= 1e-10);
    }

    #[test]
    fn svd_reconstructs(rows in 1usize..12, cols in 1usize..12, seed in 0u64..1000) {
        let a = DMatrix::from_fn(rows, cols, |i, j| ((i * 13 + j * 7) as f64 * 0.1 + seed as f64).sin());
        let f = svd(&a);
        let s = DMatrix::from_diagonal(&DVector::from_vec(f.s.clone()));
        prop_assert!((&f.u * s * f.v.transpose() - &a).amax() <= 1e-12);
        prop_assert!(f.s.windows(2).all(|w| w[0] >= w[1]));
    }

    #[test]
    fn pencil_recovers_exponential_sums(
        rates in proptest::collection::btree_set(0u32..40, 1..4),
        amps in proptest::collection::vec(0.5f64..2.0, 3),
    ) {
        let lambdas: Vec<f64> = rates.iter().map(|&r| r as f64 * 0.1).collect();
        let dt = 0.1;
        let channels = DMatrix::from_fn(2, 31, |c, j| {
            lambdas.iter().zip(&amps).map(|(l, a)| a * (c as f64 + 1.0) * (-l * dt * j as f64).exp()).sum()
        });
        let got = pencil_from_channels(&channels, dt, lambdas.len()).unwrap();
        prop_assert_eq!(got.lambdas.len(), lambdas.len());
        for (x, y) in got.lambdas.iter().zip(&lambdas) {
            prop_assert!((x - y).abs() <= 1e-6 * y.max(1.0));
        }
    }

    #[test]
    fn mesh_round_trip(m in torus()) {
        let mut buf = Vec::new();
        write_mesh(&m, &mut buf).unwrap();
        let back = read_mesh(buf.as_slice(), "back").unwrap();
        prop_assert_eq!(back.mass(), m.mass());
        prop_assert_eq!(back.edges(), m.edges());
    }

    #[test]
    fn config_rejects_unknown_keys(key in "[a-z_]{1,12}") {
        let known = CONFIG_KEYS.iter().any(|(k, _)| *k == key);
        let parsed = ExperimentConfig::parse(&format!("{key} = 1\n"));
        if !known {
            prop_assert!(parsed.is_err());
        }
    }
}

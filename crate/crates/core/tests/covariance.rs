use hgp_core::covariance::{
    chol_with_jitter, correlation_matrix, gp_loglik, rho, CorrelationModel, CovarianceSpec,
    Smoothness,
};
use hgp_core::geometry::{Geom, GeometrySet, Point};
use hgp_core::metricspace::{distance_matrix, DistanceOptions};
use nalgebra::{DMatrix, DVector};
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn arb_smoothness() -> impl Strategy<Value = Smoothness> {
    prop::sample::select(Smoothness::ALL.to_vec())
}

/// Solves `shape(c) = 0.05` by Newton's method from the closed forms.
fn scale_oracle(s: Smoothness) -> f64 {
    let target = 20f64.ln();
    match s {
        Smoothness::Half => target,
        Smoothness::Infinite => target.sqrt(),
        Smoothness::ThreeHalves | Smoothness::FiveHalves => {
            // g(c) = c − ln(poly(c)) − ln 20
            let (poly, dpoly): (fn(f64) -> f64, fn(f64) -> f64) = if s == Smoothness::ThreeHalves {
                (|c| 1.0 + c, |_| 1.0)
            } else {
                (|c| 1.0 + c + c * c / 3.0, |c| 1.0 + 2.0 * c / 3.0)
            };
            let mut c = 5.0;
            for _ in 0..60 {
                let g = c - poly(c).ln() - target;
                c -= g / (1.0 - dpoly(c) / poly(c));
            }
            c
        }
    }
}

fn random_points(n: usize, seed: u64) -> GeometrySet {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    GeometrySet::from_geoms(
        (0..n)
            .map(|_| Geom::Point(Point::new(rng.random::<f64>() * 10.0, rng.random::<f64>() * 10.0)))
            .collect(),
    )
    .unwrap()
}

/// Multivariate normal log density with an explicit inverse and LU determinant.
fn mvn_oracle(y: &DVector<f64>, mean: &DVector<f64>, cov: &DMatrix<f64>) -> f64 {
    let n = y.len() as f64;
    let r = y - mean;
    let inv = cov.clone().try_inverse().unwrap();
    let quad = (r.transpose() * inv * &r)[(0, 0)];
    -0.5 * (n * (2.0 * std::f64::consts::PI).ln() + cov.determinant().ln() + quad)
}

#[test]
fn scale_constants_match_closed_forms() {
    for s in Smoothness::ALL {
        let c = scale_oracle(s);
        assert!((s.scale() - c).abs() < 1e-10, "{s:?}: {} vs {c}", s.scale());
    }
    assert!((Smoothness::Half.scale() - 2.995732273553991).abs() < 1e-12);
}

#[test]
fn loglik_matches_explicit_inverse() {
    let gs = random_points(12, 4);
    let d = distance_matrix(&gs, &DistanceOptions::default()).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    let y = DVector::from_fn(12, |_, _| rng.random::<f64>() * 2.0 - 1.0);
    let mean = DVector::from_element(12, 0.3);
    for s in [Smoothness::Half, Smoothness::ThreeHalves, Smoothness::FiveHalves] {
        for (phi, tau, jitter) in [(2.0, 1.0, 0.0), (6.0, 3.5, 1e-3), (0.5, 0.2, 0.0)] {
            let model = CorrelationModel::new(s, phi).unwrap();
            let r = correlation_matrix(&model, &d);
            let got = gp_loglik(&y, &mean, &CovarianceSpec { model, tau, jitter }, &r).unwrap();
            let cov = &r / tau + DMatrix::identity(12, 12) * jitter;
            let want = mvn_oracle(&y, &mean, &cov);
            assert!((got - want).abs() < 1e-8 * want.abs().max(1.0), "{s:?} {phi}: {got} vs {want}");
        }
    }
}

#[test]
fn exponential_on_distinct_points_needs_no_jitter() {
    let gs = random_points(40, 9);
    let d = distance_matrix(&gs, &DistanceOptions::default()).unwrap();
    for phi in [0.5, 3.0, 15.0] {
        let r = correlation_matrix(&CorrelationModel::new(Smoothness::Half, phi).unwrap(), &d);
        assert_eq!(chol_with_jitter(&r).unwrap().jitter, 0.0);
    }
}

#[test]
fn gaussian_kernel_on_dense_points_is_jittered() {
    let gs = random_points(40, 9);
    let d = distance_matrix(&gs, &DistanceOptions::default()).unwrap();
    let r = correlation_matrix(&CorrelationModel::new(Smoothness::Infinite, 30.0).unwrap(), &d);
    let chol = chol_with_jitter(&r).unwrap();
    assert!(chol.jitter > 0.0 && chol.jitter <= 1e-4);
}

#[test]
fn pinned_at_practical_range_for_random_phi() {
    let mut rng = ChaCha8Rng::seed_from_u64(0);
    for _ in 0..100 {
        let phi = 10f64.powf(rng.random::<f64>() * 6.0 - 3.0);
        for s in Smoothness::ALL {
            let m = CorrelationModel::new(s, phi).unwrap();
            assert!((rho(&m, phi).unwrap() - 0.05).abs() < 1e-9, "{s:?} {phi}");
            assert_eq!(rho(&m, 0.0).unwrap(), 1.0);
        }
    }
}

proptest! {
    #[test]
    fn correlation_decreases_with_distance(
        s in arb_smoothness(),
        phi in 0.01..100.0f64,
        d1 in 0.0..50.0f64,
        gap in 0.0..50.0f64,
    ) {
        let m = CorrelationModel::new(s, phi).unwrap();
        let (a, b) = (rho(&m, d1).unwrap(), rho(&m, d1 + gap).unwrap());
        prop_assert!(a >= b);
        prop_assert!((0.0..=1.0).contains(&b));
    }

    #[test]
    fn larger_range_correlates_more(s in arb_smoothness(), phi in 0.01..50.0f64, d in 0.0..50.0f64) {
        let near = CorrelationModel::new(s, phi).unwrap();
        let far = CorrelationModel::new(s, 2.0 * phi).unwrap();
        prop_assert!(rho(&far, d).unwrap() >= rho(&near, d).unwrap());
    }
}

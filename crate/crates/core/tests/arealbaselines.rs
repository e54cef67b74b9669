use hgp_core::arealbaselines::{
    bym2_covariance, icar_structure, icar_structure_weighted, leroux_conditional, leroux_precision,
};
use hgp_core::geometry::AdjacencyMatrix;
use nalgebra::{DMatrix, SymmetricEigen};
use proptest::prelude::*;

/// Connected graph: a spanning path plus arbitrary extra edges.
fn arb_graph() -> impl Strategy<Value = AdjacencyMatrix> {
    (2usize..=6).prop_flat_map(|n| {
        prop::collection::vec(any::<bool>(), n * (n - 1) / 2).prop_map(move |extra| {
            let mut edges: Vec<(usize, usize)> = (1..n).map(|i| (i - 1, i)).collect();
            let mut k = 0;
            for i in 0..n {
                for j in (i + 1)..n {
                    if extra[k] && j != i + 1 {
                        edges.push((i, j));
                    }
                    k += 1;
                }
            }
            AdjacencyMatrix::from_edges((0..n).map(|i| format!("r{i}")).collect(), &edges)
        })
    })
}

fn min_eig(m: &DMatrix<f64>) -> f64 {
    SymmetricEigen::new(m.clone()).eigenvalues.min()
}

proptest! {
    #[test]
    fn leroux_conditional_matches_joint(
        w in arb_graph(),
        psi in 0.0..0.99f64,
        tau in 0.1..10.0f64,
        seed in prop::collection::vec(-2.0..2.0f64, 6),
    ) {
        let q = leroux_precision(&w, psi, tau).unwrap();
        let s = &seed[..w.n()];
        for k in 0..w.n() {
            let (mean, prec) = leroux_conditional(&w, s, k, psi, tau);
            // x_k | x_-k has precision Q_kk and mean −Σ_j Q_kj x_j / Q_kk
            let want_mean = -(0..w.n()).filter(|&j| j != k).map(|j| q[(k, j)] * s[j]).sum::<f64>() / q[(k, k)];
            prop_assert!((prec - q[(k, k)]).abs() < 1e-12 * prec.max(1.0));
            prop_assert!((mean - want_mean).abs() < 1e-12);
        }
    }

    #[test]
    fn bym2_covariance_is_psd(w in arb_graph(), psi in 0.0..=1.0f64, tau in 0.1..10.0f64) {
        let s = icar_structure(&w).unwrap();
        let c = bym2_covariance(&s, psi, tau).unwrap();
        prop_assert!(min_eig(&c) > -1e-10);
        prop_assert!((&c - c.transpose()).amax() < 1e-12);
    }

    #[test]
    fn scaled_structure_ignores_weight_scale(w in arb_graph(), c in 0.1..10.0f64) {
        let ids = w.ids().to_vec();
        let m = w.to_matrix();
        let a = icar_structure_weighted(&m, &ids).unwrap();
        let b = icar_structure_weighted(&(&m * c), &ids).unwrap();
        prop_assert!((&a.q_star_ginv - &b.q_star_ginv).amax() < 1e-8);
        prop_assert!((&a.q_star - &b.q_star).amax() < 1e-8 * a.q_star.amax());
    }

    #[test]
    fn scaled_inverse_is_a_generalized_inverse(w in arb_graph()) {
        let s = icar_structure(&w).unwrap();
        let back = &s.q_star * &s.q_star_ginv * &s.q_star;
        prop_assert!((&back - &s.q_star).amax() < 1e-9);
        let log_mean = (0..s.n()).map(|i| s.q_star_ginv[(i, i)].ln()).sum::<f64>() / s.n() as f64;
        prop_assert!(log_mean.abs() < 1e-9);
        prop_assert_eq!(s.rank(), s.n() - 1);
    }

    #[test]
    fn leroux_precision_is_pd_below_one(w in arb_graph(), psi in 0.0..0.999f64) {
        prop_assert!(min_eig(&leroux_precision(&w, psi, 1.0).unwrap()) > 0.0);
    }
}

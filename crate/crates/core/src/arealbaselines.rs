//! Neighbourhood-based random effects used as comparison baselines: the
//! scaled intrinsic CAR, BYM2, and the Leroux model.

use nalgebra::{DMatrix, DVector, SymmetricEigen};

use crate::error::ArealError;
use crate::geometry::AdjacencyMatrix;

/// Relative threshold under which an eigenvalue of `D − W` counts as zero.
const NULL_EIGEN_TOL: f64 = 1e-9;

/// Intrinsic CAR structure `Q = D − W` with its sum-to-zero generalized
/// inverse, scaled so the marginal variances have geometric mean one.
#[derive(Debug, Clone)]
pub struct IcarStructure {
    /// Unscaled structure `D − W`.
    pub q: DMatrix<f64>,
    /// Per-component scale factors, in the order of `components`.
    pub component_scales: Vec<f64>,
    /// Geometric pooling of the component scales, weighted by size.
    pub scale: f64,
    /// Connected components of the neighbourhood graph.
    pub components: Vec<Vec<usize>>,
    /// Scaled structure `Q*` (each component block multiplied by its scale).
    pub q_star: DMatrix<f64>,
    /// Generalized inverse of `Q*` under per-component sum-to-zero constraints.
    pub q_star_ginv: DMatrix<f64>,
    /// Eigenvectors of `Q*` (columns) and matching eigenvalues; null-space
    /// eigenvalues are exactly zero.
    pub eigenvectors: DMatrix<f64>,
    pub eigenvalues: DVector<f64>,
}

impl IcarStructure {
    pub fn n(&self) -> usize {
        self.q.nrows()
    }

    /// Rank of `Q*`: sites minus connected components.
    pub fn rank(&self) -> usize {
        self.n() - self.components.len()
    }

    /// Log pseudo-determinant of `Q*`.
    pub fn log_pdet(&self) -> f64 {
        self.eigenvalues
            .iter()
            .filter(|&&l| l > 0.0)
            .map(|l| l.ln())
            .sum()
    }
}

pub fn icar_structure(w: &AdjacencyMatrix) -> Result<IcarStructure, ArealError> {
    for i in 0..w.n() {
        if w.degree(i) == 0 {
            return Err(ArealError::IsolatedNode(w.ids()[i].clone()));
        }
    }
    icar_structure_weighted(&w.to_matrix(), w.ids())
}

/// As [`icar_structure`] for a general nonnegative symmetric weight matrix.
pub fn icar_structure_weighted(
    weights: &DMatrix<f64>,
    ids: &[String],
) -> Result<IcarStructure, ArealError> {
    let n = weights.nrows();
    let degree: Vec<f64> = (0..n).map(|i| weights.row(i).sum()).collect();
    if let Some(i) = degree.iter().position(|&d| d <= 0.0) {
        return Err(ArealError::IsolatedNode(
            ids.get(i).cloned().unwrap_or_else(|| i.to_string()),
        ));
    }
    let q = DMatrix::from_diagonal(&DVector::from_vec(degree)) - weights;
    let components = weighted_components(weights);

    let eig = SymmetricEigen::new(q.clone());
    let max_eig = eig.eigenvalues.amax();
    let mut ginv = DMatrix::zeros(n, n);
    for (k, &lambda) in eig.eigenvalues.iter().enumerate() {
        if lambda > NULL_EIGEN_TOL * max_eig {
            let v = eig.eigenvectors.column(k);
            ginv += (v * v.transpose()) / lambda;
        }
    }

    let mut site_scale = vec![1.0; n];
    let mut component_scales = Vec::with_capacity(components.len());
    for comp in &components {
        let mean_log_var =
            comp.iter().map(|&i| ginv[(i, i)].ln()).sum::<f64>() / comp.len() as f64;
        let kappa = mean_log_var.exp();
        for &i in comp {
            site_scale[i] = kappa;
        }
        component_scales.push(kappa);
    }
    let scale = (components
        .iter()
        .zip(&component_scales)
        .map(|(c, k)| c.len() as f64 * k.ln())
        .sum::<f64>()
        / n as f64)
        .exp();

    // blocks never mix components, so row/column scaling is blockwise
    let q_star = DMatrix::from_fn(n, n, |i, j| q[(i, j)] * site_scale[i].sqrt() * site_scale[j].sqrt());
    let q_star_ginv =
        DMatrix::from_fn(n, n, |i, j| ginv[(i, j)] / (site_scale[i].sqrt() * site_scale[j].sqrt()));

    let eig_star = SymmetricEigen::new(q_star.clone());
    let max_star = eig_star.eigenvalues.amax();
    let eigenvalues = eig_star
        .eigenvalues
        .map(|l| if l > NULL_EIGEN_TOL * max_star { l } else { 0.0 });

    Ok(IcarStructure {
        q,
        component_scales,
        scale,
        components,
        q_star,
        q_star_ginv,
        eigenvectors: eig_star.eigenvectors,
        eigenvalues,
    })
}

fn weighted_components(weights: &DMatrix<f64>) -> Vec<Vec<usize>> {
    let n = weights.nrows();
    let ids: Vec<String> = (0..n).map(|i| i.to_string()).collect();
    let edges: Vec<(usize, usize)> = (0..n)
        .flat_map(|i| ((i + 1)..n).map(move |j| (i, j)))
        .filter(|&(i, j)| weights[(i, j)] != 0.0)
        .collect();
    AdjacencyMatrix::from_edges(ids, &edges).components()
}

fn check_mixing(psi: f64) -> Result<(), ArealError> {
    if (0.0..=1.0).contains(&psi) {
        Ok(())
    } else {
        Err(ArealError::InvalidMixing(psi))
    }
}

fn check_precision(tau: f64) -> Result<(), ArealError> {
    if tau.is_finite() && tau > 0.0 {
        Ok(())
    } else {
        Err(ArealError::InvalidPrecision(tau))
    }
}

/// BYM2 marginal covariance `τ⁻¹((1 − ψ)I + ψQ*⁻)`.
pub fn bym2_covariance(
    s: &IcarStructure,
    psi: f64,
    tau: f64,
) -> Result<DMatrix<f64>, ArealError> {
    check_mixing(psi)?;
    check_precision(tau)?;
    let n = s.n();
    Ok((DMatrix::identity(n, n) * (1.0 - psi) + &s.q_star_ginv * psi) / tau)
}

/// Leroux joint precision `τ_l(ψ(D − W) + (1 − ψ)I)`. Singular at `ψ = 1`.
pub fn leroux_precision(
    w: &AdjacencyMatrix,
    psi: f64,
    tau_l: f64,
) -> Result<DMatrix<f64>, ArealError> {
    check_mixing(psi)?;
    check_precision(tau_l)?;
    let n = w.n();
    let wm = w.to_matrix();
    let d = DMatrix::from_diagonal(&DVector::from_fn(n, |i, _| wm.row(i).sum()));
    Ok(((d - wm) * psi + DMatrix::identity(n, n) * (1.0 - psi)) * tau_l)
}

/// Full conditional of site `k` under the Leroux prior: mean
/// `ψΣw_ki s_i / (ψΣw_ki + 1 − ψ)` and precision `τ_l(ψΣw_ki + 1 − ψ)`.
pub fn leroux_conditional(
    w: &AdjacencyMatrix,
    s: &[f64],
    k: usize,
    psi: f64,
    tau_l: f64,
) -> (f64, f64) {
    let sum_w = w.degree(k) as f64;
    let sum_ws: f64 = w.neighbours(k).map(|i| s[i]).sum();
    let denom = psi * sum_w + 1.0 - psi;
    (psi * sum_ws / denom, tau_l * denom)
}

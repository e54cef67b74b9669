//! Distances between closed sets and the pairwise distance matrix.
//!
//! Three distances are provided: the border distance (smallest gap between
//! two sets), the mean inter-point distance estimated by Monte Carlo, and the
//! Hausdorff distance. Only the last is a metric on closed sets and it is the
//! one the correlation models are built on.

mod border;
mod hausdorff;
mod integrated;

use nalgebra::DMatrix;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

pub use border::border_distance;
pub use hausdorff::{boundary_candidates, directed_hausdorff, hausdorff};
pub use integrated::{
    integrated_distance, integrated_distance_estimate, sample_uniform, IntegratedEstimate,
};

use crate::error::MetricError;
use crate::geometry::{Geom, GeometrySet};

/// Divisor applied to the study-region diagonal to obtain the default
/// densification step.
pub const DEFAULT_DENSIFY_DIVISOR: f64 = 512.0;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum DistanceKind {
    Hausdorff,
    Border,
    Integrated,
}

impl DistanceKind {
    pub fn as_str(self) -> &'static str {
        match self {
            DistanceKind::Hausdorff => "hausdorff",
            DistanceKind::Border => "border",
            DistanceKind::Integrated => "integrated",
        }
    }
}

impl std::str::FromStr for DistanceKind {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.to_ascii_lowercase().as_str() {
            "hausdorff" => Ok(DistanceKind::Hausdorff),
            "border" => Ok(DistanceKind::Border),
            "integrated" => Ok(DistanceKind::Integrated),
            other => Err(format!("unknown distance kind `{other}`")),
        }
    }
}

impl std::fmt::Display for DistanceKind {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DistanceOptions {
    pub kind: DistanceKind,
    /// Boundary densification step; `None` selects the region default.
    pub densify: Option<f64>,
    pub n_samples: usize,
    pub seed: u64,
}

impl Default for DistanceOptions {
    fn default() -> Self {
        Self {
            kind: DistanceKind::Hausdorff,
            densify: None,
            n_samples: 1000,
            seed: 0,
        }
    }
}

impl DistanceOptions {
    pub fn hausdorff(densify: f64) -> Self {
        Self {
            densify: Some(densify),
            ..Self::default()
        }
    }
}

/// Default densification: the diagonal of the sites' joint bounding box / 512.
pub fn default_densify(gs: &GeometrySet) -> f64 {
    gs.bbox().diagonal() / DEFAULT_DENSIFY_DIVISOR
}

/// Symmetric matrix of pairwise set distances, rows in site order.
#[derive(Debug, Clone, PartialEq)]
pub struct DistanceMatrix {
    ids: Vec<String>,
    values: DMatrix<f64>,
    kind: DistanceKind,
    densify: f64,
    seed: Option<u64>,
}

impl DistanceMatrix {
    /// Wraps precomputed distances after checking symmetry, a zero diagonal,
    /// and finite nonnegative entries.
    pub fn from_matrix(
        ids: Vec<String>,
        values: DMatrix<f64>,
        kind: DistanceKind,
        densify: f64,
        seed: Option<u64>,
    ) -> Result<Self, MetricError> {
        let n = ids.len();
        if values.nrows() != n || values.ncols() != n {
            return Err(MetricError::InvalidMatrix(format!(
                "{}x{} values for {n} sites",
                values.nrows(),
                values.ncols()
            )));
        }
        for i in 0..n {
            if values[(i, i)] != 0.0 {
                return Err(MetricError::InvalidMatrix(format!("nonzero diagonal at {i}")));
            }
            for j in 0..n {
                let v = values[(i, j)];
                if !v.is_finite() || v < 0.0 {
                    return Err(MetricError::InvalidMatrix(format!("entry ({i}, {j}) = {v}")));
                }
                if v != values[(j, i)] {
                    return Err(MetricError::InvalidMatrix(format!("asymmetric at ({i}, {j})")));
                }
            }
        }
        Ok(Self {
            ids,
            values,
            kind,
            densify,
            seed,
        })
    }

    pub fn n(&self) -> usize {
        self.ids.len()
    }

    pub fn ids(&self) -> &[String] {
        &self.ids
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.values[(i, j)]
    }

    pub fn matrix(&self) -> &DMatrix<f64> {
        &self.values
    }

    pub fn kind(&self) -> DistanceKind {
        self.kind
    }

    pub fn densify(&self) -> f64 {
        self.densify
    }

    pub fn seed(&self) -> Option<u64> {
        self.seed
    }

    pub fn off_diagonal(&self) -> impl Iterator<Item = f64> + '_ {
        let n = self.n();
        (0..n).flat_map(move |i| ((i + 1)..n).map(move |j| self.values[(i, j)]))
    }
}

fn pair_distance(
    a: &Geom,
    b: &Geom,
    opts: &DistanceOptions,
    densify: f64,
    stream: u64,
) -> Result<f64, MetricError> {
    Ok(match opts.kind {
        DistanceKind::Hausdorff => hausdorff(a, b, densify),
        DistanceKind::Border => border_distance(a, b),
        DistanceKind::Integrated => {
            let mut rng = ChaCha8Rng::seed_from_u64(opts.seed);
            rng.set_stream(stream);
            integrated::integrated_with_rng(a, b, opts.n_samples, &mut rng)?.mean
        }
    })
}

/// All `n(n−1)/2` pairwise distances, computed in parallel.
///
/// Each pair draws from its own random stream, so integrated distances do not
/// depend on scheduling. For the Hausdorff kind the second directed term is
/// evaluated with the first as a floor; candidates that cannot raise the
/// maximum are skipped, which never changes the result.
pub fn distance_matrix(
    gs: &GeometrySet,
    opts: &DistanceOptions,
) -> Result<DistanceMatrix, MetricError> {
    let n = gs.len();
    if n < 2 {
        return Err(MetricError::TooFewSites(n));
    }
    let densify = opts.densify.unwrap_or_else(|| default_densify(gs));
    let geoms = gs.geoms();
    let pairs: Vec<(usize, usize)> = (0..n)
        .flat_map(|i| ((i + 1)..n).map(move |j| (i, j)))
        .collect();
    let dists = pairs
        .par_iter()
        .map(|&(i, j)| pair_distance(&geoms[i], &geoms[j], opts, densify, (i * n + j) as u64))
        .collect::<Result<Vec<f64>, _>>()?;
    let mut values = DMatrix::zeros(n, n);
    for (&(i, j), d) in pairs.iter().zip(dists) {
        values[(i, j)] = d;
        values[(j, i)] = d;
    }
    let seed = (opts.kind == DistanceKind::Integrated).then_some(opts.seed);
    Ok(DistanceMatrix {
        ids: gs.ids().to_vec(),
        values,
        kind: opts.kind,
        densify,
        seed,
    })
}

/// Rectangular distances from every site of `rows` to every site of `cols`.
pub fn cross_distances(
    rows: &GeometrySet,
    cols: &GeometrySet,
    opts: &DistanceOptions,
    densify: f64,
) -> Result<DMatrix<f64>, MetricError> {
    let (n, m) = (rows.len(), cols.len());
    let cells: Vec<(usize, usize)> = (0..n).flat_map(|i| (0..m).map(move |j| (i, j))).collect();
    let dists = cells
        .par_iter()
        .map(|&(i, j)| {
            pair_distance(
                &rows.geoms()[i],
                &cols.geoms()[j],
                opts,
                densify,
                (i * m + j) as u64,
            )
        })
        .collect::<Result<Vec<f64>, _>>()?;
    Ok(DMatrix::from_fn(n, m, |i, j| dists[i * m + j]))
}

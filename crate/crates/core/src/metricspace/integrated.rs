//! Monte Carlo estimate of the mean inter-point distance between two sets.
//!
//! The integral of `‖p − q‖` over `A × B` grows with the areas involved; this
//! module reports it normalized by `area(A)·area(B)`, i.e. the expected
//! distance between independent uniform points of `A` and `B`, so it carries
//! length units like the border and Hausdorff distances. Multiply by the two
//! areas to recover the raw integral. A point contributes a unit mass.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::MetricError;
use crate::geometry::predicates::point_in_geom;
use crate::geometry::{Geom, Point};

const MAX_REJECTIONS: usize = 1_000_000;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct IntegratedEstimate {
    pub mean: f64,
    pub std_error: f64,
    pub n_samples: usize,
}

pub fn integrated_distance(
    a: &Geom,
    b: &Geom,
    n_samples: usize,
    seed: u64,
) -> Result<f64, MetricError> {
    integrated_distance_estimate(a, b, n_samples, seed).map(|e| e.mean)
}

pub fn integrated_distance_estimate(
    a: &Geom,
    b: &Geom,
    n_samples: usize,
    seed: u64,
) -> Result<IntegratedEstimate, MetricError> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    integrated_with_rng(a, b, n_samples, &mut rng)
}

pub(crate) fn integrated_with_rng<R: Rng>(
    a: &Geom,
    b: &Geom,
    n_samples: usize,
    rng: &mut R,
) -> Result<IntegratedEstimate, MetricError> {
    if n_samples == 0 {
        return Err(MetricError::NoSamples);
    }
    if let (Geom::Point(p), Geom::Point(q)) = (a, b) {
        return Ok(IntegratedEstimate {
            mean: p.distance(*q),
            std_error: 0.0,
            n_samples,
        });
    }
    for g in [a, b] {
        if !g.is_point() && !(g.area() > 0.0) {
            return Err(MetricError::ZeroArea);
        }
    }
    let mut sum = 0.0;
    let mut sum_sq = 0.0;
    for _ in 0..n_samples {
        let p = sample_uniform(a, rng)?;
        let q = sample_uniform(b, rng)?;
        let d = p.distance(q);
        sum += d;
        sum_sq += d * d;
    }
    let n = n_samples as f64;
    let mean = sum / n;
    let var = if n_samples > 1 {
        ((sum_sq - n * mean * mean) / (n - 1.0)).max(0.0)
    } else {
        0.0
    };
    Ok(IntegratedEstimate {
        mean,
        std_error: (var / n).sqrt(),
        n_samples,
    })
}

/// Uniform draw from the filled set by rejection from its bounding box.
pub fn sample_uniform<R: Rng>(g: &Geom, rng: &mut R) -> Result<Point, MetricError> {
    if let Geom::Point(p) = g {
        return Ok(*p);
    }
    let bb = g.bbox();
    for _ in 0..MAX_REJECTIONS {
        let p = Point::new(
            bb.min.x + rng.random::<f64>() * bb.width(),
            bb.min.y + rng.random::<f64>() * bb.height(),
        );
        if point_in_geom(p, g) {
            return Ok(p);
        }
    }
    Err(MetricError::ZeroArea)
}

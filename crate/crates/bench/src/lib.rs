//! Shared fixtures for the benchmarks.

use hgp_core::geometry::{Geom, GeometrySet, Point, Polygon};

/// `k × k` grid of unit squares whose corners are nudged deterministically so
/// that no two cells are congruent.
pub fn perturbed_grid(k: usize) -> GeometrySet {
    let jitter = |i: usize, j: usize| {
        let h = (i * 7919 + j * 104_729) % 1000;
        (h as f64 / 1000.0 - 0.5) * 0.3
    };
    let corner = |i: usize, j: usize| Point::new(i as f64 + jitter(i, j), j as f64 + jitter(j, i));
    let mut geoms = Vec::with_capacity(k * k);
    for i in 0..k {
        for j in 0..k {
            let ring = vec![corner(i, j), corner(i + 1, j), corner(i + 1, j + 1), corner(i, j + 1)];
            geoms.push(Geom::Polygon(Polygon::new(ring, vec![]).expect("convex quad")));
        }
    }
    GeometrySet::from_geoms(geoms).expect("distinct ids")
}

/// Filled regular 256-gon.
pub fn circle(x: f64, r: f64) -> Geom {
    Geom::Polygon(Polygon::regular(Point::new(x, 0.0), r, 256).expect("valid circle"))
}

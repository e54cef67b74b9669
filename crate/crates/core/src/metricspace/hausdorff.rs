//! Hausdorff distance between filled closed sets.
//!
//! The directed distance `sup_{p∈A} dist(p, B)` is evaluated in two stages:
//!
//! 1. every boundary candidate of `A` (all vertices plus points inserted along
//!    each edge so consecutive candidates are at most `densify` apart) is
//!    scored against `B`, where `dist(p, B) = 0` whenever `p ∈ B`;
//! 2. when `B` is not convex, `dist(·, B)` can peak strictly inside `A` (an
//!    enclave in a thin ring, a polygon tucked into a pocket), so a
//!    branch-and-bound search over the interior of `A` refines the supremum.
//!
//! Both stages take a maximum over a finite point set that only grows when
//! `densify` is halved, so refinement never lowers the result. `dist(·, B)` is
//! 1-Lipschitz: boundary candidates are within `densify / 2` of every boundary
//! point and lattice points within `densify / 2` of every interior point, so
//! the result lies in `[H - densify, H]` and usually within `densify / 2`.

use std::cmp::Ordering;
use std::collections::BinaryHeap;

use crate::geometry::predicates::{distance_to_boundary, point_in_geom};
use crate::geometry::{Geom, Point};

/// Upper bound on subdivisions of a single edge.
const MAX_EDGE_SPLITS: usize = 1 << 20;

/// Boundary candidates of `g`: the point itself, or every ring vertex plus
/// evenly spaced edge points. Each edge is split into the smallest power of two
/// of pieces no longer than `densify`, so halving `densify` only ever adds
/// candidates. `densify <= 0` yields vertices only.
pub fn boundary_candidates(g: &Geom, densify: f64) -> Vec<Point> {
    match g {
        Geom::Point(p) => vec![*p],
        _ => {
            let mut out = Vec::new();
            for (u, v) in g.segments() {
                let k = edge_splits(u.distance(v), densify);
                out.extend((0..k).map(|i| u.lerp(v, i as f64 / k as f64)));
            }
            out
        }
    }
}

fn edge_splits(len: f64, densify: f64) -> usize {
    if densify <= 0.0 || len <= densify {
        return 1;
    }
    let mut k = 1usize;
    while len / (k as f64) > densify && k < MAX_EDGE_SPLITS {
        k *= 2;
    }
    k
}

/// Distance from `p` to the set `b`, or `None` when it cannot exceed `floor`.
#[inline]
fn distance_above(p: Point, b: &Geom, floor: f64) -> Option<f64> {
    match b {
        Geom::Point(q) => {
            let d = p.distance(*q);
            (d > floor).then_some(d)
        }
        _ => {
            let mut best = f64::INFINITY;
            for (u, v) in b.segments() {
                best = best.min(crate::geometry::predicates::point_segment_distance(p, u, v));
                if best <= floor {
                    return None;
                }
            }
            if point_in_geom(p, b) {
                None
            } else {
                Some(best)
            }
        }
    }
}

/// Directed Hausdorff distance `sup_{p∈a} inf_{q∈b} ‖p − q‖` over filled sets.
pub fn directed_hausdorff(a: &Geom, b: &Geom, densify: f64) -> f64 {
    directed_above(a, b, densify, 0.0)
}

/// Directed distance, with work skipped wherever the result provably cannot
/// exceed `floor`. Returns `max(floor, h(a, b))` up to the densification error.
pub(crate) fn directed_above(a: &Geom, b: &Geom, densify: f64, floor: f64) -> f64 {
    if a == b {
        return floor;
    }
    let mut best = floor;
    for p in boundary_candidates(a, densify) {
        if let Some(d) = distance_above(p, b, best) {
            best = d;
        }
    }
    if densify > 0.0 && !a.is_point() && !b.is_convex() {
        best = interior_search(a, b, densify, best);
    }
    best
}

/// Symmetric Hausdorff distance `max(h(a, b), h(b, a))`.
pub fn hausdorff(a: &Geom, b: &Geom, densify: f64) -> f64 {
    if let (Geom::Point(p), Geom::Point(q)) = (a, b) {
        return p.distance(*q);
    }
    let forward = directed_above(a, b, densify, 0.0);
    directed_above(b, a, densify, forward)
}

#[derive(Debug, Clone, Copy)]
struct Cell {
    /// Lower-left corner.
    x: f64,
    y: f64,
    level: u32,
    upper: f64,
}

impl PartialEq for Cell {
    fn eq(&self, other: &Self) -> bool {
        self.upper == other.upper
    }
}

impl Eq for Cell {}

impl PartialOrd for Cell {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl Ord for Cell {
    fn cmp(&self, other: &Self) -> Ordering {
        self.upper.total_cmp(&other.upper)
    }
}

/// Exact maximum of `dist(·, b)` over the lattice points of `a`'s bounding
/// square with spacing `side / 2^k ≤ densify / √2`, seeded with `best`.
///
/// Lattice coordinates are `origin + i·side/2^k`, which are bit-identical at
/// every finer level, so halving `densify` only adds points. Quadtree cells
/// whose Lipschitz bound cannot beat `best` are dropped.
fn interior_search(a: &Geom, b: &Geom, densify: f64, mut best: f64) -> f64 {
    let bb = a.bbox();
    let side = bb.width().max(bb.height());
    if side <= 0.0 {
        return best;
    }
    let spacing = densify / std::f64::consts::SQRT_2;
    let mut depth = 0u32;
    while side / f64::from(1u32 << depth) > spacing && depth < 20 {
        depth += 1;
    }
    let origin = Point::new(bb.min.x, bb.min.y);
    let mut heap = BinaryHeap::new();
    heap.push(Cell {
        x: origin.x,
        y: origin.y,
        level: 0,
        upper: f64::INFINITY,
    });
    while let Some(cell) = heap.pop() {
        if cell.upper <= best {
            break;
        }
        let width = side / f64::from(1u32 << cell.level);
        if cell.level == depth {
            for (dx, dy) in [(0.0, 0.0), (width, 0.0), (0.0, width), (width, width)] {
                let p = Point::new(cell.x + dx, cell.y + dy);
                if point_in_geom(p, a) {
                    if let Some(d) = distance_above(p, b, best) {
                        best = d;
                    }
                }
            }
            continue;
        }
        let half = 0.5 * width;
        let radius = half * std::f64::consts::SQRT_2;
        let c = Point::new(cell.x + half, cell.y + half);
        if !point_in_geom(c, a) && nearest_boundary_point(c, a).0 > radius {
            continue;
        }
        let upper = if point_in_geom(c, b) {
            (radius - distance_to_boundary(c, b)).max(0.0)
        } else {
            distance_to_boundary(c, b) + radius
        };
        if upper <= best {
            continue;
        }
        for (sx, sy) in [(0.0, 0.0), (1.0, 0.0), (0.0, 1.0), (1.0, 1.0)] {
            heap.push(Cell {
                x: cell.x + sx * half,
                y: cell.y + sy * half,
                level: cell.level + 1,
                upper,
            });
        }
    }
    best
}

fn nearest_boundary_point(p: Point, g: &Geom) -> (f64, Point) {
    let mut best = (f64::INFINITY, p);
    for (u, v) in g.segments() {
        let q = closest_on_segment(p, u, v);
        let d = p.distance(q);
        if d < best.0 {
            best = (d, q);
        }
    }
    best
}

fn closest_on_segment(p: Point, a: Point, b: Point) -> Point {
    let dx = b.x - a.x;
    let dy = b.y - a.y;
    let len2 = dx * dx + dy * dy;
    if len2 == 0.0 {
        return a;
    }
    let t = (((p.x - a.x) * dx + (p.y - a.y) * dy) / len2).clamp(0.0, 1.0);
    a.lerp(b, t)
}

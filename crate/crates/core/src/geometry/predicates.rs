//! Segment primitives and closed-set membership tests.

use super::types::{Geom, Point, Polygon, Ring};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Containment {
    Inside,
    Boundary,
    Outside,
}

/// Twice the signed area of triangle `abc`.
#[inline]
pub fn orient(a: Point, b: Point, c: Point) -> f64 {
    (b.x - a.x) * (c.y - a.y) - (b.y - a.y) * (c.x - a.x)
}

#[inline]
fn within_box(a: Point, b: Point, p: Point) -> bool {
    p.x >= a.x.min(b.x) && p.x <= a.x.max(b.x) && p.y >= a.y.min(b.y) && p.y <= a.y.max(b.y)
}

#[inline]
pub fn on_segment(p: Point, a: Point, b: Point) -> bool {
    orient(a, b, p) == 0.0 && within_box(a, b, p)
}

/// Closed segments `ab` and `cd` share at least one point.
pub fn segments_intersect(a: Point, b: Point, c: Point, d: Point) -> bool {
    let d1 = orient(c, d, a);
    let d2 = orient(c, d, b);
    let d3 = orient(a, b, c);
    let d4 = orient(a, b, d);
    if ((d1 > 0.0 && d2 < 0.0) || (d1 < 0.0 && d2 > 0.0))
        && ((d3 > 0.0 && d4 < 0.0) || (d3 < 0.0 && d4 > 0.0))
    {
        return true;
    }
    (d1 == 0.0 && within_box(c, d, a))
        || (d2 == 0.0 && within_box(c, d, b))
        || (d3 == 0.0 && within_box(a, b, c))
        || (d4 == 0.0 && within_box(a, b, d))
}

/// Segments cross at a single point interior to both.
pub fn segments_intersect_properly(a: Point, b: Point, c: Point, d: Point) -> bool {
    let d1 = orient(c, d, a);
    let d2 = orient(c, d, b);
    let d3 = orient(a, b, c);
    let d4 = orient(a, b, d);
    d1 * d2 < 0.0 && d3 * d4 < 0.0
}

/// Distance from `p` to the closed segment `ab`.
#[inline]
pub fn point_segment_distance(p: Point, a: Point, b: Point) -> f64 {
    let dx = b.x - a.x;
    let dy = b.y - a.y;
    let len2 = dx * dx + dy * dy;
    if len2 == 0.0 {
        return p.distance(a);
    }
    let t = (((p.x - a.x) * dx + (p.y - a.y) * dy) / len2).clamp(0.0, 1.0);
    if t == 0.0 {
        p.distance(a)
    } else if t == 1.0 {
        p.distance(b)
    } else {
        p.distance(Point::new(a.x + t * dx, a.y + t * dy))
    }
}

pub fn segment_segment_distance(a: Point, b: Point, c: Point, d: Point) -> f64 {
    if segments_intersect(a, b, c, d) {
        return 0.0;
    }
    point_segment_distance(a, c, d)
        .min(point_segment_distance(b, c, d))
        .min(point_segment_distance(c, a, b))
        .min(point_segment_distance(d, a, b))
}

/// Crossing-number test with an exact boundary check.
pub fn point_in_ring(p: Point, ring: &Ring) -> Containment {
    let mut inside = false;
    for (a, b) in ring.segments() {
        if on_segment(p, a, b) {
            return Containment::Boundary;
        }
        if (a.y > p.y) != (b.y > p.y) {
            let x = a.x + (p.y - a.y) * (b.x - a.x) / (b.y - a.y);
            if p.x < x {
                inside = !inside;
            }
        }
    }
    if inside {
        Containment::Inside
    } else {
        Containment::Outside
    }
}

pub fn point_in_polygon(p: Point, poly: &Polygon) -> Containment {
    if !poly.bbox().contains(p) {
        return Containment::Outside;
    }
    match point_in_ring(p, poly.exterior()) {
        Containment::Outside => return Containment::Outside,
        Containment::Boundary => return Containment::Boundary,
        Containment::Inside => {}
    }
    for h in poly.holes() {
        match point_in_ring(p, h) {
            Containment::Inside => return Containment::Outside,
            Containment::Boundary => return Containment::Boundary,
            Containment::Outside => {}
        }
    }
    Containment::Inside
}

/// True iff `p` lies in the closed set `g`; boundary points count as inside.
pub fn point_in_geom(p: Point, g: &Geom) -> bool {
    match g {
        Geom::Point(q) => p == *q,
        _ => g
            .polygons()
            .iter()
            .any(|poly| point_in_polygon(p, poly) != Containment::Outside),
    }
}

/// Distance from `p` to the boundary of `g` (to the point itself for a point).
pub fn distance_to_boundary(p: Point, g: &Geom) -> f64 {
    match g {
        Geom::Point(q) => p.distance(*q),
        _ => g
            .segments()
            .map(|(a, b)| point_segment_distance(p, a, b))
            .fold(f64::INFINITY, f64::min),
    }
}

/// Distance from `p` to the closed set `g`: zero inside, boundary distance outside.
pub fn distance_to_set(p: Point, g: &Geom) -> f64 {
    if point_in_geom(p, g) {
        0.0
    } else {
        distance_to_boundary(p, g)
    }
}

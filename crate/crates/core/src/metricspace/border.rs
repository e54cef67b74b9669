use crate::geometry::predicates::{distance_to_set, point_in_geom, segment_segment_distance};
use crate::geometry::Geom;

/// Smallest distance between any point of `a` and any point of `b`, treating
/// polygons as filled. Zero whenever the two sets intersect.
pub fn border_distance(a: &Geom, b: &Geom) -> f64 {
    match (a, b) {
        (Geom::Point(p), Geom::Point(q)) => p.distance(*q),
        (Geom::Point(p), g) | (g, Geom::Point(p)) => distance_to_set(*p, g),
        _ => {
            // With disjoint boundaries, containment shows up at any vertex.
            let contained = |x: &Geom, y: &Geom| {
                x.rings()
                    .any(|r| point_in_geom(r.vertices()[0], y))
            };
            if contained(a, b) || contained(b, a) {
                return 0.0;
            }
            let segs_b: Vec<_> = b.segments().collect();
            let mut best = f64::INFINITY;
            for (p, q) in a.segments() {
                for &(r, s) in &segs_b {
                    best = best.min(segment_segment_distance(p, q, r, s));
                    if best == 0.0 {
                        return 0.0;
                    }
                }
            }
            best
        }
    }
}

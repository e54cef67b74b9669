use std::collections::HashSet;

use crate::error::GeometryError;
use crate::geometry::predicates::{point_in_ring, segments_intersect_properly, Containment};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Point {
    pub x: f64,
    pub y: f64,
}

impl Point {
    pub const fn new(x: f64, y: f64) -> Self {
        Self { x, y }
    }

    pub fn checked(x: f64, y: f64) -> Result<Self, GeometryError> {
        if x.is_finite() && y.is_finite() {
            Ok(Self { x, y })
        } else {
            Err(GeometryError::NonFinite { x, y })
        }
    }

    #[inline]
    pub fn distance(self, other: Point) -> f64 {
        let dx = self.x - other.x;
        let dy = self.y - other.y;
        (dx * dx + dy * dy).sqrt()
    }

    #[inline]
    pub fn translate(self, dx: f64, dy: f64) -> Point {
        Point::new(self.x + dx, self.y + dy)
    }

    #[inline]
    pub(crate) fn lerp(self, other: Point, t: f64) -> Point {
        Point::new(
            self.x + (other.x - self.x) * t,
            self.y + (other.y - self.y) * t,
        )
    }
}

/// Axis-aligned bounding box.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BoundingBox {
    pub min: Point,
    pub max: Point,
}

impl BoundingBox {
    pub fn from_points<'a>(points: impl IntoIterator<Item = &'a Point>) -> Option<Self> {
        let mut iter = points.into_iter();
        let first = *iter.next()?;
        let mut bb = BoundingBox {
            min: first,
            max: first,
        };
        for p in iter {
            bb.min.x = bb.min.x.min(p.x);
            bb.min.y = bb.min.y.min(p.y);
            bb.max.x = bb.max.x.max(p.x);
            bb.max.y = bb.max.y.max(p.y);
        }
        Some(bb)
    }

    pub fn union(self, other: BoundingBox) -> BoundingBox {
        BoundingBox {
            min: Point::new(self.min.x.min(other.min.x), self.min.y.min(other.min.y)),
            max: Point::new(self.max.x.max(other.max.x), self.max.y.max(other.max.y)),
        }
    }

    pub fn diagonal(&self) -> f64 {
        self.min.distance(self.max)
    }

    pub fn width(&self) -> f64 {
        self.max.x - self.min.x
    }

    pub fn height(&self) -> f64 {
        self.max.y - self.min.y
    }

    pub fn center(&self) -> Point {
        self.min.lerp(self.max, 0.5)
    }

    /// Euclidean gap between two boxes; zero when they overlap or touch.
    pub fn gap(&self, other: &BoundingBox) -> f64 {
        let dx = (other.min.x - self.max.x).max(self.min.x - other.max.x).max(0.0);
        let dy = (other.min.y - self.max.y).max(self.min.y - other.max.y).max(0.0);
        (dx * dx + dy * dy).sqrt()
    }

    /// Largest distance between any point of `self` and any point of `other`.
    pub fn max_distance(&self, other: &BoundingBox) -> f64 {
        let dx = (other.max.x - self.min.x).max(self.max.x - other.min.x);
        let dy = (other.max.y - self.min.y).max(self.max.y - other.min.y);
        (dx * dx + dy * dy).sqrt()
    }

    pub fn contains(&self, p: Point) -> bool {
        p.x >= self.min.x && p.x <= self.max.x && p.y >= self.min.y && p.y <= self.max.y
    }
}

/// A closed ring stored without the repeated closing vertex.
#[derive(Debug, Clone, PartialEq)]
pub struct Ring {
    vertices: Vec<Point>,
}

impl Ring {
    /// Builds a ring, dropping consecutive duplicates and an explicit closing vertex.
    pub fn new(mut vertices: Vec<Point>) -> Result<Self, GeometryError> {
        for p in &vertices {
            Point::checked(p.x, p.y)?;
        }
        vertices.dedup();
        while vertices.len() > 1 && vertices.first() == vertices.last() {
            vertices.pop();
        }
        let distinct = {
            let mut seen = HashSet::new();
            vertices
                .iter()
                .filter(|p| seen.insert((p.x.to_bits(), p.y.to_bits())))
                .count()
        };
        if distinct < 3 {
            return Err(GeometryError::RingTooShort { found: distinct });
        }
        Ok(Self { vertices })
    }

    pub fn vertices(&self) -> &[Point] {
        &self.vertices
    }

    pub fn len(&self) -> usize {
        self.vertices.len()
    }

    pub fn is_empty(&self) -> bool {
        self.vertices.is_empty()
    }

    /// Edges as consecutive vertex pairs, including the closing edge.
    pub fn segments(&self) -> impl Iterator<Item = (Point, Point)> + '_ {
        let n = self.vertices.len();
        (0..n).map(move |i| (self.vertices[i], self.vertices[(i + 1) % n]))
    }

    /// Shoelace signed area; positive for counterclockwise rings.
    pub fn signed_area(&self) -> f64 {
        let n = self.vertices.len();
        let o = self.vertices[0];
        let mut acc = 0.0;
        for i in 1..n - 1 {
            let a = self.vertices[i];
            let b = self.vertices[i + 1];
            acc += (a.x - o.x) * (b.y - o.y) - (b.x - o.x) * (a.y - o.y);
        }
        0.5 * acc
    }

    fn orient(&mut self, counterclockwise: bool) {
        if (self.signed_area() > 0.0) != counterclockwise {
            self.vertices.reverse();
        }
    }

    pub fn bbox(&self) -> BoundingBox {
        BoundingBox::from_points(&self.vertices).expect("ring has vertices")
    }

    fn is_simple(&self) -> bool {
        let segs: Vec<_> = self.segments().collect();
        let n = segs.len();
        for i in 0..n {
            for j in (i + 1)..n {
                // neighbouring edges share a vertex by construction
                if j == i + 1 || (i == 0 && j == n - 1) {
                    continue;
                }
                let (a, b) = segs[i];
                let (c, d) = segs[j];
                if crate::geometry::predicates::segments_intersect(a, b, c, d) {
                    return false;
                }
            }
        }
        true
    }

    fn is_convex(&self) -> bool {
        let n = self.vertices.len();
        let mut sign = 0.0f64;
        for i in 0..n {
            let a = self.vertices[i];
            let b = self.vertices[(i + 1) % n];
            let c = self.vertices[(i + 2) % n];
            let cross = (b.x - a.x) * (c.y - b.y) - (b.y - a.y) * (c.x - b.x);
            if cross != 0.0 {
                if sign != 0.0 && cross.signum() != sign {
                    return false;
                }
                sign = cross.signum();
            }
        }
        true
    }

    pub fn translate(&self, dx: f64, dy: f64) -> Ring {
        Ring {
            vertices: self.vertices.iter().map(|p| p.translate(dx, dy)).collect(),
        }
    }
}

/// A filled polygon: the closed region bounded by the exterior ring minus the
/// open interiors of the holes.
#[derive(Debug, Clone, PartialEq)]
pub struct Polygon {
    exterior: Ring,
    holes: Vec<Ring>,
}

impl Polygon {
    /// Validates rings and normalizes winding (exterior counterclockwise,
    /// holes clockwise).
    pub fn new(exterior: Vec<Point>, holes: Vec<Vec<Point>>) -> Result<Self, GeometryError> {
        let mut exterior = Ring::new(exterior)?;
        if !exterior.is_simple() {
            return Err(GeometryError::SelfIntersecting);
        }
        exterior.orient(true);
        let mut rings = Vec::with_capacity(holes.len());
        for (index, h) in holes.into_iter().enumerate() {
            let mut ring = Ring::new(h)?;
            let mut strictly_inside = false;
            for &v in ring.vertices() {
                match point_in_ring(v, &exterior) {
                    Containment::Outside => return Err(GeometryError::HoleOutside { index }),
                    Containment::Inside => strictly_inside = true,
                    Containment::Boundary => {}
                }
            }
            let crosses = ring.segments().any(|(a, b)| {
                exterior
                    .segments()
                    .any(|(c, d)| segments_intersect_properly(a, b, c, d))
            });
            if !strictly_inside || crosses {
                return Err(GeometryError::HoleOutside { index });
            }
            ring.orient(false);
            rings.push(ring);
        }
        Ok(Self {
            exterior,
            holes: rings,
        })
    }

    /// Axis-aligned rectangle `[x0, x1] × [y0, y1]`.
    pub fn rectangle(x0: f64, y0: f64, x1: f64, y1: f64) -> Result<Self, GeometryError> {
        Polygon::new(
            vec![
                Point::new(x0, y0),
                Point::new(x1, y0),
                Point::new(x1, y1),
                Point::new(x0, y1),
            ],
            vec![],
        )
    }

    /// Regular `n`-gon inscribed in the circle of radius `r` about `center`,
    /// with a vertex at angle zero. Vertices at multiples of a quarter turn are
    /// placed exactly so tangent fixtures touch without rounding gaps.
    pub fn regular(center: Point, r: f64, n: usize) -> Result<Self, GeometryError> {
        let verts = (0..n)
            .map(|k| {
                let (s, c) = if (4 * k) % n == 0 {
                    match (4 * k) / n {
                        0 => (0.0, 1.0),
                        1 => (1.0, 0.0),
                        2 => (0.0, -1.0),
                        _ => (-1.0, 0.0),
                    }
                } else {
                    (std::f64::consts::TAU * k as f64 / n as f64).sin_cos()
                };
                Point::new(center.x + r * c, center.y + r * s)
            })
            .collect();
        Polygon::new(verts, vec![])
    }

    pub fn exterior(&self) -> &Ring {
        &self.exterior
    }

    pub fn holes(&self) -> &[Ring] {
        &self.holes
    }

    pub fn rings(&self) -> impl Iterator<Item = &Ring> {
        std::iter::once(&self.exterior).chain(self.holes.iter())
    }

    pub fn area(&self) -> f64 {
        self.exterior.signed_area().abs()
            - self.holes.iter().map(|h| h.signed_area().abs()).sum::<f64>()
    }

    pub fn bbox(&self) -> BoundingBox {
        self.exterior.bbox()
    }

    pub fn is_convex(&self) -> bool {
        self.holes.is_empty() && self.exterior.is_convex()
    }

    pub fn translate(&self, dx: f64, dy: f64) -> Polygon {
        Polygon {
            exterior: self.exterior.translate(dx, dy),
            holes: self.holes.iter().map(|h| h.translate(dx, dy)).collect(),
        }
    }
}

/// A closed planar set: a singleton, a filled polygon, or a union of
/// interior-disjoint filled polygons.
#[derive(Debug, Clone, PartialEq)]
pub enum Geom {
    Point(Point),
    Polygon(Polygon),
    MultiPolygon(Vec<Polygon>),
}

impl Geom {
    pub fn multi(parts: Vec<Polygon>) -> Result<Geom, GeometryError> {
        if parts.is_empty() {
            return Err(GeometryError::EmptyMultiPolygon);
        }
        for i in 0..parts.len() {
            for j in (i + 1)..parts.len() {
                if parts_overlap(&parts[i], &parts[j]) {
                    return Err(GeometryError::OverlappingParts {
                        first: i,
                        second: j,
                    });
                }
            }
        }
        Ok(Geom::MultiPolygon(parts))
    }

    pub fn is_point(&self) -> bool {
        matches!(self, Geom::Point(_))
    }

    pub fn polygons(&self) -> &[Polygon] {
        match self {
            Geom::Point(_) => &[],
            Geom::Polygon(p) => std::slice::from_ref(p),
            Geom::MultiPolygon(ps) => ps,
        }
    }

    pub fn rings(&self) -> impl Iterator<Item = &Ring> {
        self.polygons().iter().flat_map(|p| p.rings())
    }

    /// All boundary edges, empty for a point.
    pub fn segments(&self) -> impl Iterator<Item = (Point, Point)> + '_ {
        self.rings().flat_map(|r| r.segments())
    }

    pub fn vertices(&self) -> Vec<Point> {
        match self {
            Geom::Point(p) => vec![*p],
            _ => self
                .rings()
                .flat_map(|r| r.vertices().iter().copied())
                .collect(),
        }
    }

    pub fn bbox(&self) -> BoundingBox {
        match self {
            Geom::Point(p) => BoundingBox { min: *p, max: *p },
            _ => self
                .polygons()
                .iter()
                .map(Polygon::bbox)
                .reduce(BoundingBox::union)
                .expect("non-empty polygon list"),
        }
    }

    pub fn area(&self) -> f64 {
        self.polygons().iter().map(Polygon::area).sum()
    }

    /// True when the distance function to this set is convex, i.e. the set is
    /// a point or a single convex polygon without holes.
    pub fn is_convex(&self) -> bool {
        match self {
            Geom::Point(_) => true,
            Geom::Polygon(p) => p.is_convex(),
            Geom::MultiPolygon(ps) => ps.len() == 1 && ps[0].is_convex(),
        }
    }

    pub fn translate(&self, dx: f64, dy: f64) -> Geom {
        match self {
            Geom::Point(p) => Geom::Point(p.translate(dx, dy)),
            Geom::Polygon(p) => Geom::Polygon(p.translate(dx, dy)),
            Geom::MultiPolygon(ps) => {
                Geom::MultiPolygon(ps.iter().map(|p| p.translate(dx, dy)).collect())
            }
        }
    }
}

impl From<Point> for Geom {
    fn from(p: Point) -> Self {
        Geom::Point(p)
    }
}

impl From<Polygon> for Geom {
    fn from(p: Polygon) -> Self {
        Geom::Polygon(p)
    }
}

fn parts_overlap(a: &Polygon, b: &Polygon) -> bool {
    if a.bbox().gap(&b.bbox()) > 0.0 {
        return false;
    }
    let inside = |p: &Polygon, q: &Polygon| {
        q.exterior()
            .vertices()
            .iter()
            .any(|&v| crate::geometry::predicates::point_in_polygon(v, p) == Containment::Inside)
    };
    if inside(a, b) || inside(b, a) {
        return true;
    }
    a.rings().flat_map(|r| r.segments()).any(|(p, q)| {
        b.rings()
            .flat_map(|r| r.segments())
            .any(|(r, s)| segments_intersect_properly(p, q, r, s))
    })
}

/// Ordered, uniquely identified collection of sites. The order is the row and
/// column order of every matrix derived from the set.
#[derive(Debug, Clone, PartialEq)]
pub struct GeometrySet {
    ids: Vec<String>,
    geoms: Vec<Geom>,
    pub crs_note: String,
}

impl GeometrySet {
    pub fn new(sites: Vec<(String, Geom)>) -> Result<Self, GeometryError> {
        if sites.is_empty() {
            return Err(GeometryError::EmptySet);
        }
        let mut seen = HashSet::new();
        let mut ids = Vec::with_capacity(sites.len());
        let mut geoms = Vec::with_capacity(sites.len());
        for (id, g) in sites {
            if !seen.insert(id.clone()) {
                return Err(GeometryError::DuplicateId(id));
            }
            ids.push(id);
            geoms.push(g);
        }
        Ok(Self {
            ids,
            geoms,
            crs_note: String::new(),
        })
    }

    /// Sites named `"0"`, `"1"`, ... in the given order.
    pub fn from_geoms(geoms: Vec<Geom>) -> Result<Self, GeometryError> {
        GeometrySet::new(
            geoms
                .into_iter()
                .enumerate()
                .map(|(i, g)| (i.to_string(), g))
                .collect(),
        )
    }

    pub fn len(&self) -> usize {
        self.ids.len()
    }

    pub fn is_empty(&self) -> bool {
        self.ids.is_empty()
    }

    pub fn ids(&self) -> &[String] {
        &self.ids
    }

    pub fn geoms(&self) -> &[Geom] {
        &self.geoms
    }

    pub fn iter(&self) -> impl Iterator<Item = (&str, &Geom)> {
        self.ids.iter().map(String::as_str).zip(self.geoms.iter())
    }

    pub fn index_of(&self, id: &str) -> Option<usize> {
        self.ids.iter().position(|s| s == id)
    }

    pub fn bbox(&self) -> BoundingBox {
        self.geoms
            .iter()
            .map(Geom::bbox)
            .reduce(BoundingBox::union)
            .expect("geometry set is non-empty")
    }

    /// Minkowski translation of every site by `(dx, dy)`.
    pub fn translate(&self, dx: f64, dy: f64) -> GeometrySet {
        GeometrySet {
            ids: self.ids.clone(),
            geoms: self.geoms.iter().map(|g| g.translate(dx, dy)).collect(),
            crs_note: self.crs_note.clone(),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn ring_drops_closing_vertex() {
        let r = Ring::new(vec![
            Point::new(0.0, 0.0),
            Point::new(1.0, 0.0),
            Point::new(1.0, 1.0),
            Point::new(0.0, 0.0),
        ])
        .unwrap();
        assert_eq!(r.len(), 3);
    }

    #[test]
    fn short_ring_rejected() {
        let err = Ring::new(vec![Point::new(0.0, 0.0), Point::new(1.0, 0.0)]).unwrap_err();
        assert_eq!(err, GeometryError::RingTooShort { found: 2 });
    }

    #[test]
    fn non_finite_rejected() {
        let err = Polygon::rectangle(0.0, 0.0, f64::NAN, 1.0).unwrap_err();
        assert!(matches!(err, GeometryError::NonFinite { .. }));
    }

    #[test]
    fn winding_is_normalized() {
        let cw = Polygon::new(
            vec![
                Point::new(0.0, 0.0),
                Point::new(0.0, 1.0),
                Point::new(1.0, 1.0),
                Point::new(1.0, 0.0),
            ],
            vec![vec![
                Point::new(0.2, 0.2),
                Point::new(0.4, 0.2),
                Point::new(0.4, 0.4),
            ]],
        )
        .unwrap();
        assert!(cw.exterior().signed_area() > 0.0);
        assert!(cw.holes()[0].signed_area() < 0.0);
        assert!((cw.area() - (1.0 - 0.02)).abs() < 1e-12);
    }

    #[test]
    fn bowtie_is_self_intersecting() {
        let err = Polygon::new(
            vec![
                Point::new(0.0, 0.0),
                Point::new(1.0, 1.0),
                Point::new(1.0, 0.0),
                Point::new(0.0, 1.0),
            ],
            vec![],
        )
        .unwrap_err();
        assert_eq!(err, GeometryError::SelfIntersecting);
    }

    #[test]
    fn hole_outside_rejected() {
        let err = Polygon::new(
            vec![
                Point::new(0.0, 0.0),
                Point::new(1.0, 0.0),
                Point::new(1.0, 1.0),
                Point::new(0.0, 1.0),
            ],
            vec![vec![
                Point::new(2.0, 2.0),
                Point::new(3.0, 2.0),
                Point::new(3.0, 3.0),
            ]],
        )
        .unwrap_err();
        assert_eq!(err, GeometryError::HoleOutside { index: 0 });
    }

    #[test]
    fn overlapping_parts_rejected() {
        let a = Polygon::rectangle(0.0, 0.0, 2.0, 2.0).unwrap();
        let b = Polygon::rectangle(1.0, 1.0, 3.0, 3.0).unwrap();
        assert!(Geom::multi(vec![a.clone(), b]).is_err());
        let c = Polygon::rectangle(2.0, 0.0, 3.0, 1.0).unwrap();
        assert!(Geom::multi(vec![a, c]).is_ok());
    }

    #[test]
    fn duplicate_ids_rejected() {
        let g = Geom::Point(Point::new(0.0, 0.0));
        let err = GeometrySet::new(vec![("a".into(), g.clone()), ("a".into(), g)]).unwrap_err();
        assert_eq!(err, GeometryError::DuplicateId("a".into()));
        assert_eq!(GeometrySet::new(vec![]).unwrap_err(), GeometryError::EmptySet);
    }

    #[test]
    fn regular_polygon_has_exact_axis_vertices() {
        let p = Polygon::regular(Point::new(3.2, 0.0), 1.2, 256).unwrap();
        let v = p.exterior().vertices();
        assert!(v.contains(&Point::new(2.0, 0.0)));
        assert!(v.contains(&Point::new(4.4, 0.0)));
        assert!(p.is_convex());
    }

    #[test]
    fn box_gap_and_spread() {
        let a = Polygon::rectangle(0.0, 0.0, 1.0, 1.0).unwrap().bbox();
        let b = Polygon::rectangle(4.0, 5.0, 5.0, 6.0).unwrap().bbox();
        assert_eq!(a.gap(&b), 5.0);
        assert!((a.max_distance(&b) - (25.0f64 + 36.0).sqrt()).abs() < 1e-12);
    }
}

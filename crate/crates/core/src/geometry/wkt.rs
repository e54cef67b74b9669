//! Well-known-text reader and writer for `POINT`, `POLYGON` and `MULTIPOLYGON`.

use std::fmt::Write as _;

use super::types::{Geom, Point, Polygon, Ring};
use crate::error::ParseError;

pub fn parse_wkt(text: &str) -> Result<Geom, ParseError> {
    let mut p = Parser { src: text, pos: 0 };
    let geom = p.geometry()?;
    p.skip_ws();
    if p.pos != text.len() {
        return Err(p.error("trailing characters"));
    }
    Ok(geom)
}

pub fn format_wkt(g: &Geom) -> String {
    let mut out = String::new();
    match g {
        Geom::Point(p) => {
            let _ = write!(out, "POINT ({} {})", p.x, p.y);
        }
        Geom::Polygon(poly) => {
            out.push_str("POLYGON ");
            write_polygon(&mut out, poly);
        }
        Geom::MultiPolygon(parts) => {
            out.push_str("MULTIPOLYGON (");
            for (i, poly) in parts.iter().enumerate() {
                if i > 0 {
                    out.push_str(", ");
                }
                write_polygon(&mut out, poly);
            }
            out.push(')');
        }
    }
    out
}

fn write_polygon(out: &mut String, poly: &Polygon) {
    out.push('(');
    for (i, ring) in poly.rings().enumerate() {
        if i > 0 {
            out.push_str(", ");
        }
        write_ring(out, ring);
    }
    out.push(')');
}

fn write_ring(out: &mut String, ring: &Ring) {
    out.push('(');
    let v = ring.vertices();
    for (i, p) in v.iter().chain(std::iter::once(&v[0])).enumerate() {
        if i > 0 {
            out.push_str(", ");
        }
        let _ = write!(out, "{} {}", p.x, p.y);
    }
    out.push(')');
}

struct Parser<'a> {
    src: &'a str,
    pos: usize,
}

impl<'a> Parser<'a> {
    fn error(&self, msg: &str) -> ParseError {
        ParseError::new(self.pos, msg)
    }

    fn skip_ws(&mut self) {
        let rest = &self.src[self.pos..];
        self.pos += rest.len() - rest.trim_start().len();
    }

    fn peek(&mut self) -> Option<char> {
        self.skip_ws();
        self.src[self.pos..].chars().next()
    }

    fn expect(&mut self, c: char) -> Result<(), ParseError> {
        if self.peek() == Some(c) {
            self.pos += c.len_utf8();
            Ok(())
        } else {
            Err(self.error(&format!("expected `{c}`")))
        }
    }

    fn keyword(&mut self) -> Result<(usize, String), ParseError> {
        self.skip_ws();
        let start = self.pos;
        let len = self.src[start..]
            .find(|c: char| !c.is_ascii_alphabetic())
            .unwrap_or(self.src.len() - start);
        if len == 0 {
            return Err(self.error("expected geometry keyword"));
        }
        self.pos += len;
        Ok((start, self.src[start..start + len].to_ascii_uppercase()))
    }

    fn geometry(&mut self) -> Result<Geom, ParseError> {
        let (start, kw) = self.keyword()?;
        match kw.as_str() {
            "POINT" => {
                self.expect('(')?;
                let p = self.coord()?;
                self.expect(')')?;
                Ok(Geom::Point(p))
            }
            "POLYGON" => Ok(Geom::Polygon(self.polygon()?)),
            "MULTIPOLYGON" => {
                let at = self.pos;
                self.expect('(')?;
                let mut parts = vec![self.polygon()?];
                while self.peek() == Some(',') {
                    self.pos += 1;
                    parts.push(self.polygon()?);
                }
                self.expect(')')?;
                Geom::multi(parts).map_err(|e| ParseError::new(at, e.to_string()))
            }
            other => Err(ParseError::new(
                start,
                format!("unsupported geometry `{other}`"),
            )),
        }
    }

    fn polygon(&mut self) -> Result<Polygon, ParseError> {
        self.skip_ws();
        let at = self.pos;
        self.expect('(')?;
        let exterior = self.ring()?;
        let mut holes = Vec::new();
        while self.peek() == Some(',') {
            self.pos += 1;
            holes.push(self.ring()?);
        }
        self.expect(')')?;
        Polygon::new(exterior, holes).map_err(|e| ParseError::new(at, e.to_string()))
    }

    fn ring(&mut self) -> Result<Vec<Point>, ParseError> {
        self.expect('(')?;
        let mut pts = vec![self.coord()?];
        while self.peek() == Some(',') {
            self.pos += 1;
            pts.push(self.coord()?);
        }
        self.expect(')')?;
        Ok(pts)
    }

    fn coord(&mut self) -> Result<Point, ParseError> {
        let at = self.pos;
        let x = self.number()?;
        let y = self.number()?;
        Point::checked(x, y).map_err(|e| ParseError::new(at, e.to_string()))
    }

    fn number(&mut self) -> Result<f64, ParseError> {
        self.skip_ws();
        let start = self.pos;
        let len = self.src[start..]
            .find(|c: char| !(c.is_ascii_digit() || matches!(c, '+' | '-' | '.' | 'e' | 'E')))
            .unwrap_or(self.src.len() - start);
        let tok = &self.src[start..start + len];
        let v: f64 = tok
            .parse()
            .map_err(|_| ParseError::new(start, format!("invalid number `{tok}`")))?;
        self.pos += len;
        Ok(v)
    }
}

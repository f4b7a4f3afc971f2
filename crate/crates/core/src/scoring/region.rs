use serde::{Deserialize, Serialize};

use super::Score;
use crate::error::{Error, Result};
use crate::preprocess::{Point, PointSet};

/// A closed simple polygon in the unit square.
///
/// A repeated closing vertex (GeoJSON rings) and consecutive duplicate
/// vertices are dropped on construction.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "Vec<Point>", into = "Vec<Point>")]
pub struct Region {
    vertices: Vec<Point>,
}

impl TryFrom<Vec<Point>> for Region {
    type Error = Error;

    fn try_from(v: Vec<Point>) -> Result<Self> {
        Region::new(v)
    }
}

impl From<Region> for Vec<Point> {
    fn from(r: Region) -> Self {
        r.vertices
    }
}

fn cross(o: Point, a: Point, b: Point) -> f64 {
    (a.x - o.x) * (b.y - o.y) - (a.y - o.y) * (b.x - o.x)
}

/// `p` lies on the closed segment `ab`.
fn on_segment(p: Point, a: Point, b: Point) -> bool {
    cross(a, b, p) == 0.0
        && p.x >= a.x.min(b.x)
        && p.x <= a.x.max(b.x)
        && p.y >= a.y.min(b.y)
        && p.y <= a.y.max(b.y)
}

fn segments_intersect(a: Point, b: Point, c: Point, d: Point) -> bool {
    let d1 = cross(c, d, a);
    let d2 = cross(c, d, b);
    let d3 = cross(a, b, c);
    let d4 = cross(a, b, d);
    if ((d1 > 0.0 && d2 < 0.0) || (d1 < 0.0 && d2 > 0.0))
        && ((d3 > 0.0 && d4 < 0.0) || (d3 < 0.0 && d4 > 0.0))
    {
        return true;
    }
    on_segment(a, c, d) || on_segment(b, c, d) || on_segment(c, a, b) || on_segment(d, a, b)
}

impl Region {
    pub fn new(mut vertices: Vec<Point>) -> Result<Self> {
        vertices.dedup();
        if vertices.len() > 1 && vertices.first() == vertices.last() {
            vertices.pop();
        }
        if vertices.len() < 3 {
            return Err(Error::InvalidRegion(format!(
                "need at least 3 distinct vertices, got {}",
                vertices.len()
            )));
        }
        if vertices
            .iter()
            .any(|p| !(0.0..=1.0).contains(&p.x) || !(0.0..=1.0).contains(&p.y))
        {
            return Err(Error::InvalidRegion(
                "vertices must lie in the unit square".into(),
            ));
        }
        let region = Self { vertices };
        if region.area() <= 1e-12 {
            return Err(Error::InvalidRegion("polygon has zero area".into()));
        }
        region.check_simple()?;
        Ok(region)
    }

    /// The axis-aligned rectangle `[x0, x1] × [y0, y1]`.
    pub fn rectangle(x0: f64, y0: f64, x1: f64, y1: f64) -> Result<Self> {
        Self::new(vec![
            Point::new(x0, y0),
            Point::new(x1, y0),
            Point::new(x1, y1),
            Point::new(x0, y1),
        ])
    }

    pub fn unit_square() -> Self {
        Self::rectangle(0.0, 0.0, 1.0, 1.0).expect("unit square is valid")
    }

    pub fn vertices(&self) -> &[Point] {
        &self.vertices
    }

    pub fn area(&self) -> f64 {
        let n = self.vertices.len();
        let twice: f64 = (0..n)
            .map(|i| {
                let a = self.vertices[i];
                let b = self.vertices[(i + 1) % n];
                a.x * b.y - b.x * a.y
            })
            .sum();
        twice.abs() / 2.0
    }

    fn edges(&self) -> impl Iterator<Item = (Point, Point)> + '_ {
        let n = self.vertices.len();
        (0..n).map(move |i| (self.vertices[i], self.vertices[(i + 1) % n]))
    }

    fn check_simple(&self) -> Result<()> {
        let n = self.vertices.len();
        let v = &self.vertices;
        for i in 0..n {
            let (a, b) = (v[i], v[(i + 1) % n]);
            for j in i + 1..n {
                let (c, d) = (v[j], v[(j + 1) % n]);
                let adjacent_next = j == i + 1;
                let adjacent_wrap = i == 0 && j == n - 1;
                let bad = if adjacent_next {
                    // shared vertex b == c; they must not fold back onto each other
                    on_segment(d, a, b) || on_segment(a, c, d)
                } else if adjacent_wrap {
                    // shared vertex a == d
                    on_segment(c, a, b) || on_segment(b, c, d)
                } else {
                    segments_intersect(a, b, c, d)
                };
                if bad {
                    return Err(Error::InvalidRegion(format!(
                        "polygon edges {i} and {j} intersect"
                    )));
                }
            }
        }
        Ok(())
    }

    /// Even-odd containment with the boundary counted as inside.
    pub fn contains(&self, p: Point) -> bool {
        let mut inside = false;
        for (a, b) in self.edges() {
            if on_segment(p, a, b) {
                return true;
            }
            // half-open in y so a vertex on the ray is counted once
            if a.y <= p.y && p.y < b.y {
                if cross(a, b, p) > 0.0 {
                    inside = !inside;
                }
            } else if b.y <= p.y && p.y < a.y && cross(a, b, p) < 0.0 {
                inside = !inside;
            }
        }
        inside
    }
}

/// Number of points inside `region` (boundary included), or the fraction
/// of the plot's points when `normalized`.
pub fn region_score(ps: &PointSet, region: &Region, normalized: bool) -> Score {
    let count = ps.points.iter().filter(|p| region.contains(**p)).count() as f64;
    let value = if normalized {
        if ps.points.is_empty() {
            0.0
        } else {
            count / ps.points.len() as f64
        }
    } else {
        count
    };
    Score::count(value)
}

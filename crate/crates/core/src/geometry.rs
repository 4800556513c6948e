//! Coordinate types, Euclidean distance and hex-cell tower layouts.
//!
//! All coordinates are meters in a local Cartesian frame.

use std::f64::consts::PI;
use std::fmt;
use std::ops::{Add, Mul, Neg, Sub};

use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum GeometryError {
    #[error("cell radius must be positive and finite, got {0}")]
    NonPositiveRadius(f64),
    #[error("number of rings must be at least 1")]
    NoRings,
    #[error("coordinate is not finite: {0}")]
    NonFinite(Point3),
}

/// A point (or displacement) in 3D space, meters.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct Point3 {
    pub x: f64,
    pub y: f64,
    pub z: f64,
}

impl Point3 {
    pub const ORIGIN: Point3 = Point3 { x: 0.0, y: 0.0, z: 0.0 };

    pub const fn new(x: f64, y: f64, z: f64) -> Self {
        Self { x, y, z }
    }

    /// Like [`Point3::new`] but rejects NaN and infinite components.
    pub fn try_new(x: f64, y: f64, z: f64) -> Result<Self, GeometryError> {
        let p = Self::new(x, y, z);
        if p.is_finite() {
            Ok(p)
        } else {
            Err(GeometryError::NonFinite(p))
        }
    }

    pub fn is_finite(&self) -> bool {
        self.x.is_finite() && self.y.is_finite() && self.z.is_finite()
    }

    pub fn dot(&self, other: &Point3) -> f64 {
        self.x * other.x + self.y * other.y + self.z * other.z
    }

    pub fn cross(&self, other: &Point3) -> Point3 {
        Point3::new(
            self.y * other.z - self.z * other.y,
            self.z * other.x - self.x * other.z,
            self.x * other.y - self.y * other.x,
        )
    }

    pub fn norm_squared(&self) -> f64 {
        self.dot(self)
    }

    pub fn norm(&self) -> f64 {
        self.norm_squared().sqrt()
    }

    pub fn to_array(self) -> [f64; 3] {
        [self.x, self.y, self.z]
    }
}

impl From<[f64; 3]> for Point3 {
    fn from(a: [f64; 3]) -> Self {
        Point3::new(a[0], a[1], a[2])
    }
}

impl fmt::Display for Point3 {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match f.precision() {
            Some(p) => write!(f, "({:.p$}, {:.p$}, {:.p$})", self.x, self.y, self.z, p = p),
            None => write!(f, "({}, {}, {})", self.x, self.y, self.z),
        }
    }
}

impl Add for Point3 {
    type Output = Point3;
    fn add(self, rhs: Point3) -> Point3 {
        Point3::new(self.x + rhs.x, self.y + rhs.y, self.z + rhs.z)
    }
}

impl Sub for Point3 {
    type Output = Point3;
    fn sub(self, rhs: Point3) -> Point3 {
        Point3::new(self.x - rhs.x, self.y - rhs.y, self.z - rhs.z)
    }
}

impl Mul<f64> for Point3 {
    type Output = Point3;
    fn mul(self, k: f64) -> Point3 {
        Point3::new(self.x * k, self.y * k, self.z * k)
    }
}

impl Neg for Point3 {
    type Output = Point3;
    fn neg(self) -> Point3 {
        Point3::new(-self.x, -self.y, -self.z)
    }
}

/// Euclidean distance between two points.
pub fn distance(a: Point3, b: Point3) -> f64 {
    (a - b).norm()
}

/// A fixed tower (signal mast) with known coordinates.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TowerSite {
    pub id: u32,
    pub position: Point3,
}

impl TowerSite {
    pub const fn new(id: u32, position: Point3) -> Self {
        Self { id, position }
    }
}

/// Places towers on concentric rings around `center`.
///
/// Ring `k` (1-based) holds `6k` towers spaced evenly in angle on a circle of
/// radius `k * radius`, the first one on the +x axis. Ring 1 is the regular
/// hexagon around a single cell. Ids run from 0 in ring-then-angle order and
/// every tower sits at `center.z`.
pub fn hex_cell_layout(center: Point3, radius: f64, n_rings: u32) -> Result<Vec<TowerSite>, GeometryError> {
    if !(radius > 0.0) || !radius.is_finite() {
        return Err(GeometryError::NonPositiveRadius(radius));
    }
    if n_rings == 0 {
        return Err(GeometryError::NoRings);
    }
    if !center.is_finite() {
        return Err(GeometryError::NonFinite(center));
    }

    let mut towers = Vec::with_capacity((3 * n_rings * (n_rings + 1)) as usize);
    let mut id = 0u32;
    for ring in 1..=n_rings {
        let count = 6 * ring;
        let ring_radius = radius * f64::from(ring);
        for j in 0..count {
            let angle = 2.0 * PI * f64::from(j) / f64::from(count);
            let (s, c) = angle.sin_cos();
            towers.push(TowerSite::new(
                id,
                Point3::new(center.x + ring_radius * c, center.y + ring_radius * s, center.z),
            ));
            id += 1;
        }
    }
    Ok(towers)
}

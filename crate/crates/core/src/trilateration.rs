//! Position recovery from tower ranges.
//!
//! Each tower `T_i` with range `r_i` defines a sphere
//! `|p - T_i|^2 = r_i^2`. Subtracting spheres pairwise cancels the quadratic
//! term and leaves planes of the form
//!
//! ```text
//! 2(T_b - T_a) . p = r_a^2 - r_b^2 - |T_a|^2 + |T_b|^2
//! ```
//!
//! Taking the three cyclic differences (1-2, 2-3, 3-1) of three spheres gives
//! rows that sum to zero, so the resulting 3x3 matrix is always singular and
//! cannot be inverted. [`solve_position`] instead intersects the two
//! independent planes (a line normal to the tower plane), substitutes the line
//! into sphere 1 and picks one root of the resulting quadratic according to a
//! [`ZConvention`]. With four or more towers in general position the
//! reference-difference system has full rank and [`multilaterate_lsq`] solves
//! it in the least-squares sense.

use std::fmt;
use std::str::FromStr;

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::geometry::{distance, Point3, TowerSite};

/// Triangle area below `COLLINEAR_TOLERANCE * max_pairwise_distance^2` is
/// treated as collinear.
pub const COLLINEAR_TOLERANCE: f64 = 1e-9;

/// Squared offset from the tower plane, relative to the problem scale
/// squared, under which the two quadratic roots are considered coincident.
pub const PLANE_SNAP_TOLERANCE: f64 = 1e-12;

/// Smallest-to-largest singular value ratio under which the least-squares
/// difference system is rank deficient.
pub const RANK_TOLERANCE: f64 = 1e-10;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum TrilaterationError {
    #[error("towers {0} and {1} share the same position")]
    DuplicateTowers(u32, u32),
    #[error("towers are collinear (triangle area {area:e} m^2)")]
    Collinear { area: f64 },
    #[error("difference system has rank {rank}, need 3")]
    RankDeficient { rank: usize },
    #[error("need at least {need} towers, got {have}")]
    TooFewTowers { need: usize, have: usize },
    #[error("{towers} towers but {ranges} ranges")]
    LengthMismatch { towers: usize, ranges: usize },
    #[error("range {index} is negative or not finite: {value}")]
    InvalidRange { index: usize, value: f64 },
    #[error("tower {0} has a non-finite coordinate")]
    NonFiniteTower(u32),
}

impl TrilaterationError {
    /// True for errors caused by tower placement rather than bad input values.
    pub fn is_degenerate_geometry(&self) -> bool {
        matches!(self, Self::DuplicateTowers(..) | Self::Collinear { .. } | Self::RankDeficient { .. })
    }
}

/// One plane `coeffs . p = rhs` obtained by subtracting two sphere equations.
///
/// `coeffs` holds the x, y and z coefficients in that order.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DifferenceRow {
    pub coeffs: [f64; 3],
    pub rhs: f64,
}

impl DifferenceRow {
    /// Row for sphere `a` minus sphere `b`.
    pub fn between(a: Point3, range_a: f64, b: Point3, range_b: f64) -> Self {
        let d = (b - a) * 2.0;
        let rhs = range_a * range_a - range_b * range_b - a.norm_squared() + b.norm_squared();
        Self { coeffs: d.to_array(), rhs }
    }

    pub fn is_zero(&self) -> bool {
        self.coeffs.iter().all(|c| *c == 0.0)
    }

    /// Left-hand side minus right-hand side at `p`.
    pub fn evaluate(&self, p: Point3) -> f64 {
        Point3::from(self.coeffs).dot(&p) - self.rhs
    }
}

/// The three cyclic sphere differences of a three-tower problem.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LinearSystem3 {
    pub rows: [DifferenceRow; 3],
}

impl LinearSystem3 {
    /// Determinant of the coefficient matrix. Always zero up to rounding.
    pub fn determinant(&self) -> f64 {
        let [a, b, c] = self.rows.map(|r| Point3::from(r.coeffs));
        a.dot(&b.cross(&c))
    }

    /// Product of the row norms, the natural scale for [`Self::determinant`].
    pub fn determinant_scale(&self) -> f64 {
        self.rows.iter().map(|r| Point3::from(r.coeffs).norm()).product()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ZConvention {
    /// Mobile at or above the tower plane.
    #[default]
    Nonnegative,
    /// Mobile at or below the tower plane.
    Nonpositive,
}

impl ZConvention {
    pub fn opposite(self) -> Self {
        match self {
            Self::Nonnegative => Self::Nonpositive,
            Self::Nonpositive => Self::Nonnegative,
        }
    }
}

impl FromStr for ZConvention {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "nonnegative" | "up" | "+" => Ok(Self::Nonnegative),
            "nonpositive" | "down" | "-" => Ok(Self::Nonpositive),
            other => Err(format!("unknown z convention '{other}' (use nonnegative or nonpositive)")),
        }
    }
}

impl fmt::Display for ZConvention {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Self::Nonnegative => "nonnegative",
            Self::Nonpositive => "nonpositive",
        })
    }
}

/// Which root of the plane-offset quadratic the fix used.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ZBranch {
    Nonnegative,
    Nonpositive,
    /// Both roots coincide (mobile in the tower plane), or the solve was
    /// overdetermined.
    Unique,
}

impl From<ZConvention> for ZBranch {
    fn from(c: ZConvention) -> Self {
        match c {
            ZConvention::Nonnegative => ZBranch::Nonnegative,
            ZConvention::Nonpositive => ZBranch::Nonpositive,
        }
    }
}

impl fmt::Display for ZBranch {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Self::Nonnegative => "nonnegative",
            Self::Nonpositive => "nonpositive",
            Self::Unique => "unique",
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum SolveMethod {
    ThreeTowerQuadratic,
    LeastSquares,
}

impl fmt::Display for SolveMethod {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Self::ThreeTowerQuadratic => "three-tower-quadratic",
            Self::LeastSquares => "least-squares",
        })
    }
}

/// A position estimate together with how it was obtained.
#[derive(Debug, Clone, PartialEq)]
pub struct LocationFix {
    pub position: Point3,
    /// `|distance(position, tower_i) - r_i|` per tower, in input order.
    pub residuals: Vec<f64>,
    pub method: SolveMethod,
    pub z_branch: ZBranch,
    /// The ranges did not reach the tower plane (negative discriminant) and
    /// the position was pulled back onto it.
    pub clamped: bool,
}

impl LocationFix {
    pub fn max_residual(&self) -> f64 {
        self.residuals.iter().copied().fold(0.0, f64::max)
    }
}

/// One ranged tower: raw turn-around time and the derived one-way distance.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RangeMeasurement {
    pub tower: TowerSite,
    /// Seconds.
    pub turnaround: f64,
    /// Meters.
    pub range: f64,
}

fn check_inputs(towers: &[TowerSite], ranges: &[f64]) -> Result<(), TrilaterationError> {
    if towers.len() != ranges.len() {
        return Err(TrilaterationError::LengthMismatch { towers: towers.len(), ranges: ranges.len() });
    }
    if let Some(t) = towers.iter().find(|t| !t.position.is_finite()) {
        return Err(TrilaterationError::NonFiniteTower(t.id));
    }
    if let Some((index, &value)) = ranges.iter().enumerate().find(|(_, r)| !(**r >= 0.0) || !r.is_finite()) {
        return Err(TrilaterationError::InvalidRange { index, value });
    }
    for (i, a) in towers.iter().enumerate() {
        if let Some(b) = towers[i + 1..].iter().find(|b| b.position == a.position) {
            return Err(TrilaterationError::DuplicateTowers(a.id, b.id));
        }
    }
    Ok(())
}

/// Cyclic sphere differences: row 1 is sphere 1 minus sphere 2, row 2 is
/// 2 minus 3, row 3 is 3 minus 1.
pub fn build_difference_system(
    towers: &[TowerSite; 3],
    ranges: [f64; 3],
) -> Result<LinearSystem3, TrilaterationError> {
    check_inputs(towers, &ranges)?;
    let row = |a: usize, b: usize| {
        DifferenceRow::between(towers[a].position, ranges[a], towers[b].position, ranges[b])
    };
    Ok(LinearSystem3 { rows: [row(0, 1), row(1, 2), row(2, 0)] })
}

/// Per-tower `|distance(position, tower) - range|`.
pub fn residuals(position: Point3, towers: &[TowerSite], ranges: &[f64]) -> Vec<f64> {
    towers.iter().zip(ranges).map(|(t, r)| (distance(position, t.position) - r).abs()).collect()
}

/// Unit normal of the plane through three towers, oriented so that its
/// z component is positive (falling back to y, then x, for vertical planes).
fn oriented_normal(u: Point3, v: Point3) -> Point3 {
    let n = u.cross(&v);
    let n = n * (1.0 / n.norm());
    let tiny = 1e-12;
    let flip = if n.z.abs() > tiny {
        n.z < 0.0
    } else if n.y.abs() > tiny {
        n.y < 0.0
    } else {
        n.x < 0.0
    };
    if flip {
        -n
    } else {
        n
    }
}

/// Three-tower trilateration.
///
/// Solves the two independent plane equations for the foot of the solution
/// line in the tower plane, then the sphere of tower 1 for the signed offset
/// along the plane normal. The offset sign is chosen by `convention`; offsets
/// within [`PLANE_SNAP_TOLERANCE`] of zero are reported as
/// [`ZBranch::Unique`]. A negative squared offset (ranges that never reach
/// each other's intersection line) is clamped to the plane and flagged.
pub fn solve_position(
    towers: &[TowerSite; 3],
    ranges: [f64; 3],
    convention: ZConvention,
) -> Result<LocationFix, TrilaterationError> {
    check_inputs(towers, &ranges)?;
    let [t1, t2, t3] = towers.map(|t| t.position);
    let u = t2 - t1;
    let v = t3 - t1;

    let max_sep_sq = u.norm_squared().max(v.norm_squared()).max((t3 - t2).norm_squared());
    let area = 0.5 * u.cross(&v).norm();
    if area < COLLINEAR_TOLERANCE * max_sep_sq {
        return Err(TrilaterationError::Collinear { area });
    }

    // Work relative to tower 1: with s = p - t1 the spheres become
    //   |s|^2 = r1^2,  2 s.u = r1^2 - r2^2 + |u|^2,  2 s.v = r1^2 - r3^2 + |v|^2.
    // The last two are linear combinations of the cyclic difference rows.
    let [r1, r2, r3] = ranges;
    let h_u = 0.5 * (r1 * r1 - r2 * r2 + u.norm_squared());
    let h_v = 0.5 * (r1 * r1 - r3 * r3 + v.norm_squared());

    // In-plane component s = a u + b v from the 2x2 Gram system.
    let uu = u.norm_squared();
    let vv = v.norm_squared();
    let uv = u.dot(&v);
    let gram = uu * vv - uv * uv;
    let a = (h_u * vv - h_v * uv) / gram;
    let b = (h_v * uu - h_u * uv) / gram;
    let in_plane = u * a + v * b;

    let normal = oriented_normal(u, v);
    let offset_sq = r1 * r1 - in_plane.norm_squared();
    let scale_sq = max_sep_sq.max(r1 * r1).max(in_plane.norm_squared());

    let (offset, z_branch, clamped) = if offset_sq.abs() <= PLANE_SNAP_TOLERANCE * scale_sq {
        (0.0, ZBranch::Unique, false)
    } else if offset_sq < 0.0 {
        (0.0, ZBranch::Unique, true)
    } else {
        let root = offset_sq.sqrt();
        match convention {
            ZConvention::Nonnegative => (root, ZBranch::Nonnegative, false),
            ZConvention::Nonpositive => (-root, ZBranch::Nonpositive, false),
        }
    };

    let position = t1 + in_plane + normal * offset;
    Ok(LocationFix {
        residuals: residuals(position, towers, &ranges),
        position,
        method: SolveMethod::ThreeTowerQuadratic,
        z_branch,
        clamped,
    })
}

/// Least-squares position from four or more towers.
///
/// Rows are sphere 0 minus sphere i for every other tower, expressed relative
/// to tower 0 and solved via SVD. Coplanar towers give a rank-2 system and
/// are rejected.
pub fn multilaterate_lsq(towers: &[TowerSite], ranges: &[f64]) -> Result<LocationFix, TrilaterationError> {
    if towers.len() < 4 {
        return Err(TrilaterationError::TooFewTowers { need: 4, have: towers.len() });
    }
    check_inputs(towers, ranges)?;

    let origin = towers[0].position;
    let r0_sq = ranges[0] * ranges[0];
    let m = towers.len() - 1;
    let mut a = DMatrix::<f64>::zeros(m, 3);
    let mut b = DVector::<f64>::zeros(m);
    for (row, (tower, range)) in towers[1..].iter().zip(&ranges[1..]).enumerate() {
        let d = tower.position - origin;
        a[(row, 0)] = 2.0 * d.x;
        a[(row, 1)] = 2.0 * d.y;
        a[(row, 2)] = 2.0 * d.z;
        b[row] = r0_sq - range * range + d.norm_squared();
    }

    let svd = a.svd(true, true);
    let sv = &svd.singular_values;
    let largest = sv.max();
    let rank = sv.iter().filter(|s| **s > RANK_TOLERANCE * largest).count();
    if rank < 3 {
        return Err(TrilaterationError::RankDeficient { rank });
    }
    let s =
        svd.solve(&b, RANK_TOLERANCE * largest).map_err(|_| TrilaterationError::RankDeficient { rank })?;

    let position = origin + Point3::new(s[0], s[1], s[2]);
    Ok(LocationFix {
        residuals: residuals(position, towers, ranges),
        position,
        method: SolveMethod::LeastSquares,
        z_branch: ZBranch::Unique,
        clamped: false,
    })
}

/// Dispatches on tower count: three towers use [`solve_position`], more use
/// [`multilaterate_lsq`].
pub fn locate(
    towers: &[TowerSite],
    ranges: &[f64],
    convention: ZConvention,
) -> Result<LocationFix, TrilaterationError> {
    match towers.len() {
        3 => {
            let towers: &[TowerSite; 3] = towers.try_into().expect("length checked");
            let ranges: [f64; 3] = ranges
                .try_into()
                .map_err(|_| TrilaterationError::LengthMismatch { towers: 3, ranges: ranges.len() })?;
            solve_position(towers, ranges, convention)
        }
        n if n > 3 => multilaterate_lsq(towers, ranges),
        n => Err(TrilaterationError::TooFewTowers { need: 3, have: n }),
    }
}

/// [`locate`] over ranged measurements.
pub fn locate_measurements(
    measurements: &[RangeMeasurement],
    convention: ZConvention,
) -> Result<LocationFix, TrilaterationError> {
    let towers: Vec<TowerSite> = measurements.iter().map(|m| m.tower).collect();
    let ranges: Vec<f64> = measurements.iter().map(|m| m.range).collect();
    locate(&towers, &ranges, convention)
}

#![allow(dead_code)]

use std::path::PathBuf;

use toftrack::geometry::{Point3, TowerSite};
use toftrack::ingest::{
    compare_with_reference, discrepancy_report, pair_rtts, parse_ping_log, parse_reference_table,
    RowComparison, RttSample,
};
use toftrack::timing::percent_error;

pub fn data_path(name: &str) -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("tests").join(name)
}

pub fn read_data(name: &str) -> String {
    std::fs::read_to_string(data_path(&format!("data/{name}"))).unwrap()
}

pub fn read_golden(name: &str) -> String {
    std::fs::read_to_string(data_path(&format!("golden/{name}"))).unwrap()
}

/// One row of the reference ranging table.
#[derive(Debug, Clone, Copy)]
pub struct RangingRow {
    pub tower: u32,
    pub turnaround: f64,
    pub calculated: f64,
    pub actual: f64,
    pub printed_pct: f64,
}

pub fn ranging_rows() -> Vec<RangingRow> {
    read_data("ranging.csv")
        .lines()
        .skip(1)
        .map(|l| {
            let f: Vec<&str> = l.split(',').collect();
            RangingRow {
                tower: f[0].parse().unwrap(),
                turnaround: f[1].parse().unwrap(),
                calculated: f[2].parse().unwrap(),
                actual: f[3].parse().unwrap(),
                printed_pct: f[4].parse().unwrap(),
            }
        })
        .collect()
}

/// Recomputed percent error next to the printed one, tab separated.
pub fn render_ranging_pct() -> String {
    let mut out = String::from("tower\tactual_m\tcalculated_m\tcomputed_pct\tprinted_pct\tstatus\n");
    for r in ranging_rows() {
        let computed = format!("{:.2}", percent_error(r.actual, r.calculated).unwrap());
        let printed = format!("{:.2}", r.printed_pct);
        let status = if computed == printed { "ok" } else { "MISMATCH" };
        out.push_str(&format!(
            "{}\t{}\t{}\t{}\t{}\t{}\n",
            r.tower, r.actual, r.calculated, computed, printed, status
        ));
    }
    out
}

pub struct TraceAnalysis {
    pub samples: Vec<RttSample>,
    pub rows: Vec<RowComparison>,
    pub report: String,
}

pub fn analyze_trace(figure: &str, table: &str, tolerance_us: i64) -> TraceAnalysis {
    let log = parse_ping_log(&read_data(figure));
    assert!(log.warnings.is_empty(), "{:?}", log.warnings);
    let samples = pair_rtts(&log.records);
    let reference = parse_reference_table(&read_data(table));
    let rows = compare_with_reference(&samples, &reference, tolerance_us);
    let report = discrepancy_report(&log, &samples, Some((&rows, tolerance_us)));
    TraceAnalysis { samples, rows, report }
}

/// Closed-form three-sphere intersection in a frame with tower 1 at the
/// origin, tower 2 on the x axis and tower 3 in the xy plane. Returns both
/// roots, the first on the side of `(t2 - t1) x (t3 - t1)`.
pub fn frame_trilateration(t: [Point3; 3], r: [f64; 3]) -> Option<(Point3, Point3)> {
    let unit = |p: Point3| p * (1.0 / p.norm());
    let ex = unit(t[1] - t[0]);
    let d = (t[1] - t[0]).norm();
    let i = ex.dot(&(t[2] - t[0]));
    let ey = unit(t[2] - t[0] - ex * i);
    let ez = ex.cross(&ey);
    let j = ey.dot(&(t[2] - t[0]));
    let x = (r[0] * r[0] - r[1] * r[1] + d * d) / (2.0 * d);
    let y = (r[0] * r[0] - r[2] * r[2] + i * i + j * j) / (2.0 * j) - i * x / j;
    let z_sq = r[0] * r[0] - x * x - y * y;
    if z_sq < 0.0 {
        return None;
    }
    let z = z_sq.sqrt();
    let base = t[0] + ex * x + ey * y;
    Some((base + ez * z, base - ez * z))
}

pub fn sites(points: &[Point3]) -> Vec<TowerSite> {
    points.iter().enumerate().map(|(i, p)| TowerSite::new(i as u32, *p)).collect()
}

/// Twice the triangle area over the longest side squared: 0 for collinear,
/// about 0.87 for equilateral.
pub fn triangle_quality(t: [Point3; 3]) -> f64 {
    let u = t[1] - t[0];
    let v = t[2] - t[0];
    let w = t[2] - t[1];
    let longest = u.norm_squared().max(v.norm_squared()).max(w.norm_squared());
    u.cross(&v).norm() / longest
}

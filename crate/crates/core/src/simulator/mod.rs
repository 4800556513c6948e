//! Discrete-event execution of the request/acknowledge ranging protocol.
//!
//! The mobile broadcasts one timestamped request per tower. Each tower
//! answers with an acknowledgement that carries its coordinates and echoes
//! the original timestamp, so the mobile measures the turn-around time on its
//! own clock alone. The first three acknowledgements to arrive are converted
//! to ranges and trilaterated.
//!
//! Propagation is straight-line at the model's speed, the mobile does not
//! move during the exchange and every tower answers after the same fixed
//! processing delay. The only randomness is the optional packet-loss knob and
//! Monte Carlo placement (see [`sweep`]), both driven by the scenario seed.

pub mod config;
pub mod event;
pub mod sweep;

use std::fmt::Write as _;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use thiserror::Error;

use crate::geometry::{distance, GeometryError, Point3, TowerSite};
use crate::timing::{distance_from_turnaround, percent_error, quantize, TimingError, TimingModel};
use crate::trilateration::{solve_position, LocationFix, RangeMeasurement, TrilaterationError};

pub use config::{Placement, ScenarioConfig, TowerLayout};
pub use event::{AckPacket, Event, EventKind, EventQueue, Payload, RequestPacket};
pub use sweep::{resolution_sweep, run_trials, trial_config, SweepSummary, TrialResult};

/// Number of acknowledgements used for a fix.
pub const ACKS_FOR_FIX: usize = 3;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum SimError {
    #[error("invalid scenario: {0}")]
    InvalidConfig(String),
    #[error(transparent)]
    Geometry(#[from] GeometryError),
    #[error(transparent)]
    Timing(#[from] TimingError),
    #[error(transparent)]
    Trilateration(#[from] TrilaterationError),
    #[error("need {need} acknowledgements, received {have}")]
    InsufficientMeasurements { need: usize, have: usize },
}

/// What the mobile (or tower) recorded when an event fired.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum TraceDetail {
    Request {
        packet: RequestPacket,
        /// The tower's acknowledgement was dropped.
        ack_lost: bool,
    },
    Ack {
        packet: AckPacket,
        /// Mobile clock reading on receipt (quantized), s.
        received_at: f64,
        /// `received_at - packet.timestamp`, s.
        turnaround: f64,
    },
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TraceEntry {
    /// True simulation time, s.
    pub time: f64,
    pub kind: EventKind,
    pub tower: u32,
    pub detail: TraceDetail,
}

/// Every processed event, in processing order.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct Trace {
    pub entries: Vec<TraceEntry>,
}

impl Trace {
    /// Tab-separated rendering: `time kind tower_id detail`, one event per
    /// line, times with 9 decimals.
    pub fn to_tsv(&self) -> String {
        let mut out = String::new();
        for e in &self.entries {
            let _ = write!(out, "{:.9}\t{}\t{}\t", e.time, e.kind, e.tower);
            match e.detail {
                TraceDetail::Request { packet, ack_lost } => {
                    let _ = write!(out, "ts={:.9} mob={}", packet.timestamp, packet.mob_id);
                    if ack_lost {
                        out.push_str(" ack=lost");
                    }
                }
                TraceDetail::Ack { packet, received_at, turnaround } => {
                    let c = packet.tower_coord;
                    let _ = write!(
                        out,
                        "ts={:.9} rx={:.9} turnaround={:.12e} dest={} coord={:.3},{:.3},{:.3}",
                        packet.timestamp, received_at, turnaround, packet.destination, c.x, c.y, c.z
                    );
                }
            }
            out.push('\n');
        }
        out
    }

    pub fn acks(&self) -> impl Iterator<Item = &TraceEntry> {
        self.entries.iter().filter(|e| e.kind == EventKind::AckArrives)
    }

    /// Ranges for every received acknowledgement, in arrival order.
    pub fn measurements(&self, model: &TimingModel) -> Result<Vec<RangeMeasurement>, SimError> {
        self.acks()
            .filter_map(|e| match e.detail {
                TraceDetail::Ack { packet, turnaround, .. } => Some((packet, turnaround)),
                TraceDetail::Request { .. } => None,
            })
            .map(|(packet, turnaround)| {
                Ok(RangeMeasurement {
                    tower: TowerSite::new(packet.tower, packet.tower_coord),
                    turnaround,
                    range: distance_from_turnaround(turnaround, model)?,
                })
            })
            .collect()
    }

    /// The first `k` acknowledgements by arrival time. Simultaneous arrivals
    /// are ordered by tower id.
    pub fn first_k_acks(&self, k: usize, model: &TimingModel) -> Result<Vec<RangeMeasurement>, SimError> {
        if k < ACKS_FOR_FIX {
            return Err(SimError::InvalidConfig(format!(
                "at least {ACKS_FOR_FIX} acknowledgements are needed, asked for {k}"
            )));
        }
        let mut all = self.measurements(model)?;
        if all.len() < k {
            return Err(SimError::InsufficientMeasurements { need: k, have: all.len() });
        }
        all.truncate(k);
        Ok(all)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ScenarioOutcome {
    pub trace: Trace,
    /// Every acknowledgement in arrival order; the first three produced the fix.
    pub measurements: Vec<RangeMeasurement>,
    pub fix: LocationFix,
}

impl ScenarioOutcome {
    pub fn used(&self) -> &[RangeMeasurement] {
        &self.measurements[..ACKS_FOR_FIX]
    }
}

/// Runs the ranging exchange for one scenario and localizes the mobile.
pub fn run_scenario(config: &ScenarioConfig) -> Result<ScenarioOutcome, SimError> {
    let towers = config.validate()?;
    let trace = run_protocol(config, &towers);
    let measurements = trace.measurements(&config.timing)?;
    if measurements.len() < ACKS_FOR_FIX {
        return Err(SimError::InsufficientMeasurements { need: ACKS_FOR_FIX, have: measurements.len() });
    }
    let first: [RangeMeasurement; ACKS_FOR_FIX] =
        measurements[..ACKS_FOR_FIX].try_into().expect("length checked");
    let fix = solve_position(&first.map(|m| m.tower), first.map(|m| m.range), config.z_convention)?;
    Ok(ScenarioOutcome { trace, measurements, fix })
}

fn run_protocol(config: &ScenarioConfig, towers: &[TowerSite]) -> Trace {
    let c = config.timing.c;
    let resolution = config.timing.clock_resolution;
    let mobile = config.mobile;
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    let dropped =
        |rng: &mut ChaCha8Rng| config.loss_probability > 0.0 && rng.random::<f64>() < config.loss_probability;
    let flight = |tower: &TowerSite| distance(mobile, tower.position) / c;
    let site = |id: u32| towers.iter().find(|t| t.id == id).expect("event for a known tower");

    let mut queue = EventQueue::new();
    let request =
        RequestPacket { timestamp: quantize(config.start_time, resolution), mob_id: config.mobile_id };
    for tower in towers {
        if dropped(&mut rng) {
            continue;
        }
        queue.push(Event {
            time: config.start_time + flight(tower),
            kind: EventKind::RequestArrives,
            tower: tower.id,
            payload: Payload::Request(request),
        });
    }

    let mut trace = Trace::default();
    while let Some(event) = queue.pop() {
        let detail = match event.payload {
            Payload::Request(packet) => {
                let tower = site(event.tower);
                let ack = AckPacket {
                    destination: packet.mob_id,
                    tower: tower.id,
                    tower_coord: tower.position,
                    timestamp: packet.timestamp,
                };
                let ack_lost = dropped(&mut rng);
                if !ack_lost {
                    queue.push(Event {
                        time: event.time + config.tower_processing_delay + flight(tower),
                        kind: EventKind::AckArrives,
                        tower: tower.id,
                        payload: Payload::Ack(ack),
                    });
                }
                TraceDetail::Request { packet, ack_lost }
            }
            Payload::Ack(packet) => {
                let received_at = quantize(event.time, resolution);
                TraceDetail::Ack { packet, received_at, turnaround: received_at - packet.timestamp }
            }
        };
        trace.entries.push(TraceEntry { time: event.time, kind: event.kind, tower: event.tower, detail });
    }
    trace
}

/// `tower_id,turnaround_s,distance_m,actual_m,pct_error`, one row per
/// measurement in the given order. `pct_error` is empty when the actual
/// distance is zero.
pub fn measurement_csv(measurements: &[RangeMeasurement], mobile: Point3) -> String {
    let mut out = String::from("tower_id,turnaround_s,distance_m,actual_m,pct_error\n");
    for m in measurements {
        let actual = distance(mobile, m.tower.position);
        let pct = percent_error(actual, m.range).map(|p| format!("{p:.2}")).unwrap_or_default();
        let _ = writeln!(out, "{},{:.9e},{:.6},{:.6},{}", m.tower.id, m.turnaround, m.range, actual, pct);
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::hex_cell_layout;
    use crate::timing::RangingMode;
    use crate::trilateration::ZBranch;

    fn right_triangle_config(mobile: Point3) -> ScenarioConfig {
        let sites = vec![
            TowerSite::new(0, Point3::new(0.0, 0.0, 0.0)),
            TowerSite::new(1, Point3::new(10.0, 0.0, 0.0)),
            TowerSite::new(2, Point3::new(0.0, 10.0, 0.0)),
        ];
        ScenarioConfig::new(TowerLayout::Explicit { sites }, mobile, TimingModel::default())
    }

    fn hex_config(radius: f64, mobile: Point3) -> ScenarioConfig {
        ScenarioConfig::new(
            TowerLayout::Hex { center: Point3::ORIGIN, radius, rings: 1 },
            mobile,
            TimingModel::default(),
        )
    }

    #[test]
    fn exact_geometry_round_trip() {
        let out = run_scenario(&right_triangle_config(Point3::new(3.0, 4.0, 0.0))).unwrap();
        let mut by_id: Vec<_> = out.measurements.iter().map(|m| (m.tower.id, m.range)).collect();
        by_id.sort_by_key(|(id, _)| *id);
        let expected = [5.0, 65f64.sqrt(), 45f64.sqrt()];
        for ((_, got), want) in by_id.iter().zip(expected) {
            assert!((got - want).abs() < 1e-12, "{got} vs {want}");
        }
        assert!((out.fix.position - Point3::new(3.0, 4.0, 0.0)).norm() < 1e-9);
        assert_eq!(out.fix.z_branch, ZBranch::Unique);
    }

    #[test]
    fn mobile_on_tower_acks_first() {
        let out = run_scenario(&right_triangle_config(Point3::new(10.0, 0.0, 0.0))).unwrap();
        assert_eq!(out.measurements[0].tower.id, 1);
        assert_eq!(out.measurements[0].range, 0.0);
    }

    #[test]
    fn first_acks_are_nearest_towers() {
        let mobile = Point3::new(1500.0, 400.0, 0.0);
        let out = run_scenario(&hex_config(3000.0, mobile)).unwrap();
        let towers = hex_cell_layout(Point3::ORIGIN, 3000.0, 1).unwrap();
        let mut nearest: Vec<_> = towers.iter().map(|t| (distance(mobile, t.position), t.id)).collect();
        nearest.sort_by(|a, b| a.0.total_cmp(&b.0));
        let got: Vec<u32> = out.measurements.iter().map(|m| m.tower.id).collect();
        let want: Vec<u32> = nearest.iter().map(|(_, id)| *id).collect();
        assert_eq!(got, want);
        let first3 = out.trace.first_k_acks(3, &TimingModel::default()).unwrap();
        assert_eq!(first3.iter().map(|m| m.tower.id).collect::<Vec<_>>(), want[..3]);
    }

    #[test]
    fn equidistant_towers_tie_break_by_id() {
        let sites = vec![
            TowerSite::new(3, Point3::new(0.0, -10.0, 0.0)),
            TowerSite::new(1, Point3::new(-10.0, 0.0, 0.0)),
            TowerSite::new(2, Point3::new(0.0, 10.0, 0.0)),
            TowerSite::new(0, Point3::new(10.0, 0.0, 0.0)),
        ];
        let cfg =
            ScenarioConfig::new(TowerLayout::Explicit { sites }, Point3::ORIGIN, TimingModel::default());
        let out = run_scenario(&cfg).unwrap();
        let ids: Vec<u32> = out.measurements.iter().map(|m| m.tower.id).collect();
        assert_eq!(ids, vec![0, 1, 2, 3]);
    }

    #[test]
    fn ack_echoes_request_timestamp() {
        let mut cfg = hex_config(3000.0, Point3::new(100.0, 200.0, 0.0));
        cfg.start_time = 1.25;
        cfg.timing.clock_resolution = 1e-7;
        let out = run_scenario(&cfg).unwrap();
        let sent = quantize(1.25, 1e-7);
        for e in out.trace.acks() {
            match e.detail {
                TraceDetail::Ack { packet, .. } => assert_eq!(packet.timestamp, sent),
                _ => unreachable!(),
            }
        }
    }

    #[test]
    fn processing_delay_cancels_with_matching_alpha() {
        let mut cfg = right_triangle_config(Point3::new(3.0, 4.0, 2.0));
        cfg.tower_processing_delay = 7.58e-4;
        cfg.timing.alpha = 7.58e-4;
        let out = run_scenario(&cfg).unwrap();
        assert!((out.fix.position - Point3::new(3.0, 4.0, 2.0)).norm() < 1e-5);
    }

    #[test]
    fn microsecond_clock_collapses_short_ranges() {
        let mut cfg = hex_config(100.0, Point3::new(20.0, 10.0, 0.0));
        cfg.timing.clock_resolution = 1e-6;
        let out = run_scenario(&cfg).unwrap();
        assert!(out.measurements.iter().all(|m| m.turnaround == 0.0 && m.range == 0.0));
        assert!(out.fix.clamped);
        assert!(out.fix.max_residual() > 10.0);
    }

    #[test]
    fn lost_packets_can_starve_the_fix() {
        let mut cfg = right_triangle_config(Point3::new(3.0, 4.0, 0.0));
        cfg.loss_probability = 0.9;
        let mut saw_failure = false;
        for seed in 0..20 {
            cfg.seed = seed;
            if let Err(e) = run_scenario(&cfg) {
                assert!(matches!(e, SimError::InsufficientMeasurements { need: 3, .. }));
                saw_failure = true;
            }
        }
        assert!(saw_failure);
    }

    #[test]
    fn first_k_needs_three() {
        let out = run_scenario(&right_triangle_config(Point3::new(3.0, 4.0, 0.0))).unwrap();
        assert!(out.trace.first_k_acks(2, &TimingModel::default()).is_err());
        assert!(matches!(
            out.trace.first_k_acks(4, &TimingModel::default()),
            Err(SimError::InsufficientMeasurements { need: 4, have: 3 })
        ));
    }

    #[test]
    fn measurement_csv_shape() {
        let mut cfg = hex_config(10.0, Point3::new(1.0, 2.0, 0.0));
        cfg.timing.mode = RangingMode::RoundTrip;
        let out = run_scenario(&cfg).unwrap();
        let csv = measurement_csv(&out.measurements, cfg.mobile);
        let lines: Vec<&str> = csv.lines().collect();
        assert_eq!(lines[0], "tower_id,turnaround_s,distance_m,actual_m,pct_error");
        assert_eq!(lines.len(), 7);
        assert!(lines[1].ends_with(",0.00") || lines[1].ends_with(",-0.00"));
    }

    #[test]
    fn trace_lines_are_tab_separated() {
        let out = run_scenario(&right_triangle_config(Point3::new(3.0, 4.0, 0.0))).unwrap();
        let tsv = out.trace.to_tsv();
        assert_eq!(tsv.lines().count(), 6);
        for line in tsv.lines() {
            assert_eq!(line.split('\t').count(), 4);
        }
        assert!(tsv.starts_with("0.000000017\trequest_arrives\t0\tts=0.000000000 mob=1\n"));
    }
}

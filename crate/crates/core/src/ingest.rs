//! Ping trace parsing and round-trip analysis.
//!
//! Input lines look like a packet-sniffer summary:
//!
//! ```text
//! 49  23.000103  169.254.118.52  169.254.65.4  ICMP  Echo (ping) request
//! ```
//!
//! i.e. frame number, capture time in seconds (at most six decimals), source,
//! destination, protocol and an info column whose last word says whether the
//! frame is a request or a reply. Times are kept as integer microseconds so
//! that differences are exact.

use std::fmt::{self, Write as _};
use std::net::Ipv4Addr;

use serde::Serialize;
use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum IngestError {
    #[error("no valid request/reply pairs")]
    NoValidSamples,
    #[error("kernel baseline must be non-negative and finite, got {0}")]
    InvalidBaseline(f64),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Direction {
    Request,
    Reply,
}

impl fmt::Display for Direction {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Self::Request => "request",
            Self::Reply => "reply",
        })
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct PingRecord {
    pub seq: u64,
    /// Capture time, microseconds.
    pub time_us: i64,
    pub src: Ipv4Addr,
    pub dst: Ipv4Addr,
    pub protocol: String,
    pub direction: Direction,
}

impl PingRecord {
    pub fn time_seconds(&self) -> f64 {
        self.time_us as f64 * 1e-6
    }
}

impl fmt::Display for PingRecord {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "{}\t{}\t{}\t{}\t{}\tEcho (ping) {}",
            self.seq,
            format_micros(self.time_us),
            self.src,
            self.dst,
            self.protocol,
            self.direction
        )
    }
}

/// `seconds.micros` with exactly six decimals.
pub fn format_micros(us: i64) -> String {
    let sign = if us < 0 { "-" } else { "" };
    let abs = us.unsigned_abs();
    format!("{sign}{}.{:06}", abs / 1_000_000, abs % 1_000_000)
}

/// Parses a non-negative decimal number of seconds with up to six
/// fractional digits into microseconds.
pub fn parse_micros(text: &str) -> Option<i64> {
    let (int, frac) = match text.split_once('.') {
        Some((i, f)) => (i, f),
        None => (text, ""),
    };
    if int.is_empty() || frac.len() > 6 {
        return None;
    }
    if !int.bytes().all(|b| b.is_ascii_digit()) || !frac.bytes().all(|b| b.is_ascii_digit()) {
        return None;
    }
    let whole: i64 = int.parse().ok()?;
    let mut micros: i64 = if frac.is_empty() { 0 } else { frac.parse().ok()? };
    for _ in frac.len()..6 {
        micros *= 10;
    }
    whole.checked_mul(1_000_000)?.checked_add(micros)
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct ParseWarning {
    /// 1-based line number.
    pub line: usize,
    pub text: String,
    pub reason: String,
}

#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct ParsedLog {
    pub records: Vec<PingRecord>,
    pub warnings: Vec<ParseWarning>,
}

fn parse_line(line: &str) -> Result<PingRecord, String> {
    let fields: Vec<&str> = line.split_whitespace().collect();
    if fields.len() < 6 {
        return Err(format!("expected at least 6 fields, found {}", fields.len()));
    }
    let seq = fields[0].parse().map_err(|_| format!("bad frame number '{}'", fields[0]))?;
    let time_us = parse_micros(fields[1]).ok_or_else(|| format!("bad timestamp '{}'", fields[1]))?;
    let src = fields[2].parse().map_err(|_| format!("bad source address '{}'", fields[2]))?;
    let dst = fields[3].parse().map_err(|_| format!("bad destination address '{}'", fields[3]))?;
    let last = fields[fields.len() - 1];
    let direction = if last.eq_ignore_ascii_case("request") {
        Direction::Request
    } else if last.eq_ignore_ascii_case("reply") {
        Direction::Reply
    } else {
        return Err(format!("last word '{last}' is neither request nor reply"));
    };
    Ok(PingRecord { seq, time_us, src, dst, protocol: fields[4].to_string(), direction })
}

/// Parses every well-formed line; blank lines are skipped and anything else
/// becomes a warning.
pub fn parse_ping_log(text: &str) -> ParsedLog {
    let mut log = ParsedLog::default();
    for (i, line) in text.lines().enumerate() {
        if line.trim().is_empty() {
            continue;
        }
        match parse_line(line) {
            Ok(r) => log.records.push(r),
            Err(reason) => log.warnings.push(ParseWarning { line: i + 1, text: line.to_string(), reason }),
        }
    }
    log
}

/// One record per line in the canonical tab-separated layout.
pub fn serialize_records(records: &[PingRecord]) -> String {
    records.iter().map(|r| format!("{r}\n")).collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Anomaly {
    /// Reply captured before its request.
    Negative,
    /// No reply followed the request.
    MissingReply,
}

impl fmt::Display for Anomaly {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Self::Negative => "negative",
            Self::MissingReply => "missing_reply",
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub struct RttSample {
    pub request_seq: u64,
    pub reply_seq: Option<u64>,
    /// Reply minus request capture time, microseconds.
    pub rtt_us: Option<i64>,
    pub valid: bool,
    pub anomaly: Option<Anomaly>,
}

impl RttSample {
    pub fn rtt_seconds(&self) -> Option<f64> {
        self.rtt_us.map(|us| us as f64 * 1e-6)
    }
}

/// Pairs each request with the next not-yet-used reply travelling the
/// opposite way (source and destination swapped), in trace order.
pub fn pair_rtts(records: &[PingRecord]) -> Vec<RttSample> {
    let mut used = vec![false; records.len()];
    let mut samples = Vec::new();
    for (i, req) in records.iter().enumerate() {
        if req.direction != Direction::Request {
            continue;
        }
        let reply = (i + 1..records.len()).find(|&j| {
            let r = &records[j];
            !used[j] && r.direction == Direction::Reply && r.src == req.dst && r.dst == req.src
        });
        samples.push(match reply {
            Some(j) => {
                used[j] = true;
                let rtt = records[j].time_us - req.time_us;
                RttSample {
                    request_seq: req.seq,
                    reply_seq: Some(records[j].seq),
                    rtt_us: Some(rtt),
                    valid: rtt >= 0,
                    anomaly: (rtt < 0).then_some(Anomaly::Negative),
                }
            }
            None => RttSample {
                request_seq: req.seq,
                reply_seq: None,
                rtt_us: None,
                valid: false,
                anomaly: Some(Anomaly::MissingReply),
            },
        });
    }
    samples
}

/// Replies that no request claimed.
pub fn unpaired_replies<'a>(records: &'a [PingRecord], samples: &[RttSample]) -> Vec<&'a PingRecord> {
    records
        .iter()
        .filter(|r| r.direction == Direction::Reply)
        .filter(|r| !samples.iter().any(|s| s.reply_seq == Some(r.seq)))
        .collect()
}

/// `request_seq,reply_seq,rtt_us,valid,anomaly`
pub fn rtt_csv(samples: &[RttSample]) -> String {
    let mut out = String::from("request_seq,reply_seq,rtt_us,valid,anomaly\n");
    for s in samples {
        let _ = writeln!(
            out,
            "{},{},{},{},{}",
            s.request_seq,
            s.reply_seq.map(|v| v.to_string()).unwrap_or_default(),
            s.rtt_us.map(|v| v.to_string()).unwrap_or_default(),
            s.valid,
            s.anomaly.map(|a| a.to_string()).unwrap_or_default()
        );
    }
    out
}

/// Propagation-only time left after removing the kernel baseline from one
/// valid round trip.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct PropagationEstimate {
    pub request_seq: u64,
    /// Seconds.
    pub time_prop: f64,
    /// The baseline exceeded the measured round trip.
    pub negative: bool,
}

pub fn subtract_baseline(
    samples: &[RttSample],
    kernel_delay: f64,
) -> Result<Vec<PropagationEstimate>, IngestError> {
    if !(kernel_delay >= 0.0) || !kernel_delay.is_finite() {
        return Err(IngestError::InvalidBaseline(kernel_delay));
    }
    Ok(samples
        .iter()
        .filter(|s| s.valid)
        .filter_map(|s| {
            let rtt = s.rtt_seconds()?;
            let time_prop = rtt - kernel_delay;
            Some(PropagationEstimate { request_seq: s.request_seq, time_prop, negative: time_prop < 0.0 })
        })
        .collect())
}

/// Summary over valid samples, seconds.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct RttStats {
    pub count: usize,
    pub min: f64,
    pub median: f64,
    pub mean: f64,
    pub max: f64,
}

impl RttStats {
    /// Milliseconds with three decimals, one statistic per line.
    pub fn to_ms_summary(&self) -> String {
        format!(
            "count {}\nmin {:.3} ms\nmedian {:.3} ms\nmean {:.3} ms\nmax {:.3} ms\n",
            self.count,
            self.min * 1e3,
            self.median * 1e3,
            self.mean * 1e3,
            self.max * 1e3
        )
    }
}

pub fn rtt_stats(samples: &[RttSample]) -> Result<RttStats, IngestError> {
    let mut us: Vec<i64> = samples.iter().filter(|s| s.valid).filter_map(|s| s.rtt_us).collect();
    if us.is_empty() {
        return Err(IngestError::NoValidSamples);
    }
    us.sort_unstable();
    let n = us.len();
    let median_us = if n % 2 == 1 { us[n / 2] as f64 } else { (us[n / 2 - 1] + us[n / 2]) as f64 / 2.0 };
    let mean_us = us.iter().sum::<i64>() as f64 / n as f64;
    Ok(RttStats {
        count: n,
        min: us[0] as f64 * 1e-6,
        median: median_us * 1e-6,
        mean: mean_us * 1e-6,
        max: us[n - 1] as f64 * 1e-6,
    })
}

/// Reads a reference table: the last word of each line is a round-trip time
/// in milliseconds. Lines without a numeric last word (headers, comments) are
/// skipped.
pub fn parse_reference_table(text: &str) -> Vec<f64> {
    text.lines()
        .filter(|l| !l.trim_start().starts_with('#'))
        .filter_map(|l| l.split_whitespace().last()?.parse::<f64>().ok())
        .collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub struct RowComparison {
    /// 1-based row in the reference table.
    pub row: usize,
    pub request_seq: Option<u64>,
    pub reply_seq: Option<u64>,
    pub computed_us: Option<i64>,
    pub reference_us: i64,
    pub matches: bool,
}

/// Compares the i-th pair against the i-th reference row (milliseconds).
pub fn compare_with_reference(
    samples: &[RttSample],
    reference_ms: &[f64],
    tolerance_us: i64,
) -> Vec<RowComparison> {
    reference_ms
        .iter()
        .enumerate()
        .map(|(i, ms)| {
            let reference_us = (ms * 1000.0).round() as i64;
            let sample = samples.get(i);
            let computed_us = sample.and_then(|s| s.rtt_us);
            RowComparison {
                row: i + 1,
                request_seq: sample.map(|s| s.request_seq),
                reply_seq: sample.and_then(|s| s.reply_seq),
                computed_us,
                reference_us,
                matches: computed_us.is_some_and(|c| (c - reference_us).abs() <= tolerance_us),
            }
        })
        .collect()
}

fn opt<T: fmt::Display>(v: Option<T>) -> String {
    v.map(|v| v.to_string()).unwrap_or_else(|| "-".into())
}

/// Plain-text report of everything that did not line up: anomalous pairs,
/// unclaimed replies, unparseable lines and, when given, rows that disagree
/// with a reference table.
pub fn discrepancy_report(
    log: &ParsedLog,
    samples: &[RttSample],
    comparison: Option<(&[RowComparison], i64)>,
) -> String {
    let mut out = String::new();
    let anomalies: Vec<&RttSample> = samples.iter().filter(|s| s.anomaly.is_some()).collect();
    let _ = writeln!(out, "anomalies: {}", anomalies.len());
    for s in anomalies {
        let _ = writeln!(
            out,
            "  request {} reply {}: {} ({} us)",
            s.request_seq,
            opt(s.reply_seq),
            opt(s.anomaly),
            opt(s.rtt_us)
        );
    }
    let orphans = unpaired_replies(&log.records, samples);
    let _ = writeln!(out, "unpaired replies: {}", orphans.len());
    for r in orphans {
        let _ = writeln!(out, "  reply {} at {}", r.seq, format_micros(r.time_us));
    }
    let _ = writeln!(out, "malformed lines: {}", log.warnings.len());
    for w in &log.warnings {
        let _ = writeln!(out, "  line {}: {}", w.line, w.reason);
    }
    if let Some((rows, tolerance_us)) = comparison {
        let matched = rows.iter().filter(|r| r.matches).count();
        let _ = writeln!(
            out,
            "reference rows matched: {}/{} (tolerance {} us)",
            matched,
            rows.len(),
            tolerance_us
        );
        for r in rows {
            let diff = r.computed_us.map(|c| c - r.reference_us);
            let _ = writeln!(
                out,
                "  row {} request {} reply {}: computed {} us, reference {} us, diff {} us, {}",
                r.row,
                opt(r.request_seq),
                opt(r.reply_seq),
                opt(r.computed_us),
                r.reference_us,
                opt(diff),
                if r.matches { "ok" } else { "MISMATCH" }
            );
        }
    }
    out
}

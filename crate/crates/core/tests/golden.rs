mod common;

use common::{analyze_trace, read_golden, render_ranging_pct};
use toftrack::ingest::Anomaly;

#[test]
fn tower1_trace_against_reference() {
    let a = analyze_trace("tower1_ping.txt", "tower1_rtt_ms.txt", 0);
    assert_eq!(a.report, read_golden("tower1_rtt_check.txt"));
    assert_eq!(a.samples[0].request_seq, 45);
    assert_eq!(a.samples[0].anomaly, Some(Anomaly::Negative));
}

#[test]
fn tower2_trace_against_reference() {
    let a = analyze_trace("tower2_ping.txt", "tower2_rtt_ms.txt", 0);
    assert_eq!(a.report, read_golden("tower2_rtt_check.txt"));
}

#[test]
fn tower3_trace_against_reference() {
    let a = analyze_trace("tower3_ping.txt", "tower3_rtt_ms.txt", 1);
    assert_eq!(a.report, read_golden("tower3_rtt_check.txt"));
}

#[test]
fn ranging_percent_errors() {
    assert_eq!(render_ranging_pct(), read_golden("ranging_pct_error.txt"));
}

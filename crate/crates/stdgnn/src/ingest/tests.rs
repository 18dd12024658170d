use std::io::Cursor;

use super::*;

fn parse_str(s: &str) -> (EventLog, ParseStats) {
    parse_events_from(Cursor::new(s.as_bytes()), "test").unwrap()
}

const THREE_LINE_LOG: &str = r#"{"bug":"b1","kind":"report","from":null,"to":null,"ts":0,"text":"crash when saving large file"}
{"bug":"b1","kind":"toss","from":"d1","to":"d2","ts":10}
{"bug":"b1","kind":"fix","from":null,"to":"d2","ts":20}
"#;

#[test]
fn empty_file_parses_to_empty_log() {
    let (log, stats) = parse_str("");
    assert_eq!(log.events.len(), 0);
    assert_eq!(log.reports.len(), 0);
    assert_eq!(stats.lines, 0);
}

#[test]
fn three_line_log_hand_trace() {
    let (log, stats) = parse_str(THREE_LINE_LOG);
    assert_eq!(stats.malformed, 0);
    assert_eq!(log.events.len(), 3);
    let report = &log.reports["b1"];
    assert_eq!(report.holder_sequence, vec!["d1", "d2"]);
    assert_eq!(report.fixer, "d2");
    assert_eq!(report.tokens, vec!["crash", "saving", "large", "file"]);
}

#[test]
fn shuffled_lines_sort_to_the_same_log() {
    let shuffled = r#"{"bug":"b1","kind":"fix","from":null,"to":"d2","ts":20}
{"bug":"b1","kind":"report","from":null,"to":null,"ts":0,"text":"crash when saving large file"}
{"bug":"b1","kind":"toss","from":"d1","to":"d2","ts":10}
"#;
    assert_eq!(parse_str(THREE_LINE_LOG).0, parse_str(shuffled).0);
}

#[test]
fn malformed_lines_are_counted_and_skipped() {
    let mut noisy = String::new();
    // 30 well-formed lines across ten bugs.
    for n in 0..10 {
        noisy.push_str(&format!(
            "{{\"bug\":\"g{n}\",\"kind\":\"report\",\"from\":null,\"to\":null,\"ts\":{},\"text\":\"menu stays open\"}}\n",
            n * 100
        ));
        noisy.push_str(&format!(
            "{{\"bug\":\"g{n}\",\"kind\":\"toss\",\"from\":\"d1\",\"to\":\"d2\",\"ts\":{}}}\n",
            n * 100 + 10
        ));
        noisy.push_str(&format!(
            "{{\"bug\":\"g{n}\",\"kind\":\"fix\",\"from\":null,\"to\":\"d2\",\"ts\":{}}}\n",
            n * 100 + 20
        ));
    }
    // Bad records: 3 of 37 lines, under the 10% gate.
    noisy.push_str("not json at all\n");
    noisy.push_str("{\"bug\":\"g0\",\"kind\":\"zap\",\"from\":\"d1\",\"to\":\"d2\",\"ts\":5}\n");
    noisy.push_str("{\"bug\":\"g0\",\"kind\":\"toss\",\"from\":\"d1\",\"to\":\"d1\",\"ts\":6}\n");
    // Semantic drops, not malformed lines.
    noisy.push_str("{\"bug\":\"g0\",\"kind\":\"fix\",\"from\":null,\"to\":\"d7\",\"ts\":999}\n");
    noisy.push_str("{\"bug\":\"orphan\",\"kind\":\"toss\",\"from\":\"d3\",\"to\":\"d4\",\"ts\":30}\n");
    noisy.push_str("{\"bug\":\"blank\",\"kind\":\"report\",\"from\":null,\"to\":null,\"ts\":1,\"text\":\"of the to a\"}\n");
    noisy.push_str("{\"bug\":\"blank\",\"kind\":\"fix\",\"from\":null,\"to\":\"d5\",\"ts\":40}\n");

    let (log, stats) = parse_events_from(Cursor::new(noisy.as_bytes()), "noisy").unwrap();
    assert_eq!(stats.lines, 37);
    assert_eq!(stats.malformed, 3); // bad json, unknown kind, self-toss
    assert_eq!(stats.duplicate_fixes, 1);
    assert_eq!(stats.bugs_dropped_no_fixer, 1); // orphan
    assert_eq!(stats.bugs_dropped_no_text, 1); // blank: all stopwords
    assert_eq!(log.reports.len(), 10);
    assert!(log.events.iter().all(|e| e.bug_id.starts_with('g')));
}

#[test]
fn mostly_malformed_file_is_fatal() {
    let garbage = "junk\njunk\n{\"bug\":\"b\",\"kind\":\"report\",\"from\":null,\"to\":null,\"ts\":0,\"text\":\"crash\"}\n";
    match parse_events_from(Cursor::new(garbage.as_bytes()), "garbage") {
        Err(Error::MalformedInput { malformed, total, .. }) => {
            assert_eq!(malformed, 2);
            assert_eq!(total, 3);
        }
        other => panic!("expected MalformedInput, got {other:?}"),
    }
}

#[test]
fn negative_timestamps_are_malformed() {
    let mut text = String::from(
        "{\"bug\":\"b1\",\"kind\":\"report\",\"from\":null,\"to\":null,\"ts\":-5,\"text\":\"crash\"}\n",
    );
    for n in 0..10 {
        text.push_str(&format!(
            "{{\"bug\":\"b1\",\"kind\":\"toss\",\"from\":\"d{n}\",\"to\":\"e{n}\",\"ts\":{}}}\n",
            n + 1
        ));
    }
    text.push_str("{\"bug\":\"b1\",\"kind\":\"report\",\"from\":null,\"to\":null,\"ts\":5,\"text\":\"window crash trace\"}\n");
    text.push_str("{\"bug\":\"b1\",\"kind\":\"fix\",\"from\":null,\"to\":\"d1\",\"ts\":90}\n");
    let (_, stats) = parse_str(&text);
    assert_eq!(stats.malformed, 1);
}

// --- filter_inactive -------------------------------------------------------

/// One bug fixed by `fixer` at `ts`, with optional toss hops.
fn quick_bug(events: &mut Vec<Event>, texts: &mut std::collections::HashMap<String, Vec<(u64, String)>>, id: &str, hops: &[&str], fixer: &str, ts: u64) {
    events.push(Event {
        bug_id: id.into(),
        kind: EventKind::Report,
        from_dev: None,
        to_dev: hops.first().map(|s| s.to_string()),
        ts,
    });
    for pair in hops.windows(2) {
        events.push(Event {
            bug_id: id.into(),
            kind: EventKind::Toss,
            from_dev: Some(pair[0].into()),
            to_dev: Some(pair[1].into()),
            ts: ts + 1,
        });
    }
    events.push(Event {
        bug_id: id.into(),
        kind: EventKind::Fix,
        from_dev: None,
        to_dev: Some(fixer.into()),
        ts: ts + 2,
    });
    texts.insert(id.into(), vec![(ts, "synthetic crash trace".into())]);
}

fn log_with_fix_counts(counts: &[(&str, u32)]) -> EventLog {
    let mut events = Vec::new();
    let mut texts = std::collections::HashMap::new();
    let mut n = 0;
    for (dev, fixes) in counts {
        for _ in 0..*fixes {
            let id = format!("b{n}");
            quick_bug(&mut events, &mut texts, &id, &[dev], dev, 1_000_000 + n * 100);
            n += 1;
        }
    }
    let mut stats = ParseStats::default();
    assemble_log(events, texts, Default::default(), &mut stats)
}

#[test]
fn active_developers_pass_untouched() {
    let log = log_with_fix_counts(&[("d1", 6), ("d2", 7)]);
    let filtered = filter_inactive(&log, DEFAULT_MIN_FIXES_PER_YEAR);
    assert_eq!(filtered, log);
}

#[test]
fn exactly_five_fixes_in_the_only_year_is_removed() {
    let log = log_with_fix_counts(&[("d1", 5), ("d2", 6)]);
    let filtered = filter_inactive(&log, DEFAULT_MIN_FIXES_PER_YEAR);
    assert!(filtered.developers().iter().all(|d| d != "d1"));
    assert_eq!(filtered.reports.len(), 6);
}

#[test]
fn one_busy_year_retains_a_developer() {
    // d1: 10 fixes in 1970, none in 1971; d2 keeps the log non-empty in 1971.
    let mut events = Vec::new();
    let mut texts = std::collections::HashMap::new();
    for n in 0..10u64 {
        let id = format!("a{n}");
        quick_bug(&mut events, &mut texts, &id, &["d1"], "d1", 1_000 + n * 100);
    }
    for n in 0..6u64 {
        let id = format!("b{n}");
        quick_bug(&mut events, &mut texts, &id, &["d2"], "d2", 32_000_000 + n * 100);
    }
    let mut stats = ParseStats::default();
    let log = assemble_log(events, texts, Default::default(), &mut stats);
    let filtered = filter_inactive(&log, DEFAULT_MIN_FIXES_PER_YEAR);
    assert!(filtered.developers().contains(&"d1".to_string()));
}

#[test]
fn bugs_losing_their_fixer_are_dropped_entirely() {
    let mut log = log_with_fix_counts(&[("d1", 6), ("d2", 1)]);
    // Add a toss between the survivors inside d2's bug: still dropped.
    log.events.push(Event {
        bug_id: "b6".into(),
        kind: EventKind::Toss,
        from_dev: Some("d1".into()),
        to_dev: Some("d1x".into()),
        ts: 999,
    });
    log.events.sort_by_key(|e| e.ts);
    let filtered = filter_inactive(&log, DEFAULT_MIN_FIXES_PER_YEAR);
    assert!(filtered.reports.get("b6").is_none());
    assert!(filtered.events.iter().all(|e| e.bug_id != "b6"));
}

#[test]
fn filter_is_idempotent() {
    let log = log_with_fix_counts(&[("d1", 6), ("d2", 5), ("d3", 12), ("d4", 1)]);
    let once = filter_inactive(&log, DEFAULT_MIN_FIXES_PER_YEAR);
    let twice = filter_inactive(&once, DEFAULT_MIN_FIXES_PER_YEAR);
    assert_eq!(once, twice);
}

// --- build_snapshots -------------------------------------------------------

fn toss(bug: &str, from: &str, to: &str, ts: u64) -> Event {
    Event {
        bug_id: bug.into(),
        kind: EventKind::Toss,
        from_dev: Some(from.into()),
        to_dev: Some(to.into()),
        ts,
    }
}

fn toy_log(tosses: Vec<Event>) -> EventLog {
    // Snapshot construction only reads events; reports stay empty.
    EventLog {
        events: tosses,
        reports: Default::default(),
    }
}

#[test]
fn single_toss_single_window() {
    let log = toy_log(vec![toss("b", "d1", "d2", 100)]);
    let series = build_snapshots(&log, Granularity::Hourly, 1, 1).unwrap();
    assert_eq!(series.len(), 1);
    let snap = &series.snapshots[0];
    let src = series.vocab.id("d1").unwrap() as usize;
    let dst = series.vocab.id("d2").unwrap();
    assert_eq!(snap.adjacency[src], vec![(dst, 1)]);
    assert_eq!(snap.total_weight(), 1);
}

#[test]
fn weights_and_degrees_by_hand() {
    let log = toy_log(vec![
        toss("b", "d1", "d2", 10),
        toss("b", "d1", "d2", 20),
        toss("c", "d2", "d3", 30),
    ]);
    let series = build_snapshots(&log, Granularity::Hourly, 1, 1).unwrap();
    let snap = &series.snapshots[0];
    let id = |name: &str| series.vocab.id(name).unwrap();
    assert_eq!(snap.adjacency[id("d1") as usize], vec![(id("d2"), 2)]);
    assert_eq!(snap.adjacency[id("d2") as usize], vec![(id("d3"), 1)]);
    assert_eq!(snap.out_degree[id("d1") as usize], 1);
    assert_eq!(snap.in_degree[id("d2") as usize], 1);
    assert_eq!(snap.out_degree[id("d2") as usize], 1);
    assert_eq!(snap.total_degree(id("d2")), 2);
}

#[test]
fn weekly_windows_partition_a_four_week_log() {
    let week = Granularity::Weekly.bin_seconds();
    let mut events = Vec::new();
    for w in 0..4u64 {
        events.push(toss("b", "d1", "d2", w * week + 50));
        events.push(toss("b", "d2", "d3", w * week + 60));
    }
    let log = toy_log(events);
    let series = build_snapshots(&log, Granularity::Weekly, 1, 4).unwrap();
    assert_eq!(series.len(), 4);
    for snap in &series.snapshots {
        assert_eq!(snap.total_weight(), 2, "window {} lost events", snap.index);
    }
    let total: u64 = series.snapshots.iter().map(|s| s.total_weight()).sum();
    assert_eq!(total, log.toss_count() as u64);
}

#[test]
fn short_logs_are_rejected_with_the_required_span() {
    let log = toy_log(vec![toss("b", "d1", "d2", 0), toss("b", "d2", "d1", 100)]);
    match build_snapshots(&log, Granularity::Daily, 1, 2) {
        Err(Error::ShortSpan { required_secs, actual_secs }) => {
            assert_eq!(required_secs, 86_400 + 1);
            assert_eq!(actual_secs, 101);
        }
        other => panic!("expected ShortSpan, got {other:?}"),
    }
}

#[test]
fn full_span_single_snapshot_equals_total_toss_matrix() {
    let log = toy_log(vec![
        toss("a", "d1", "d2", 5),
        toss("a", "d2", "d1", 2_000_000),
        toss("b", "d1", "d2", 1_000_000),
    ]);
    let series = build_snapshots(&log, Granularity::Weekly, 4, 1).unwrap();
    assert_eq!(series.len(), 1);
    assert_eq!(series.snapshots[0].total_weight(), 3);
}

#[test]
fn csv_export_layout() {
    let log = toy_log(vec![toss("b", "d1", "d2", 10)]);
    let series = build_snapshots(&log, Granularity::Hourly, 1, 1).unwrap();
    let mut buf = Vec::new();
    series.write_csv(&mut buf).unwrap();
    let text = String::from_utf8(buf).unwrap();
    assert_eq!(text, "t,src,dst,weight\n0,d1,d2,1\n");
}

#[test]
fn tokenizer_drops_stopwords_and_short_tokens() {
    assert_eq!(
        tokenize("The QUICK-brown fox, a fox!"),
        vec!["quick", "brown", "fox", "fox"]
    );
    assert!(tokenize("a I of to").is_empty());
}

//! Seeded deletion of activity labels with a ground-truth ledger.
//!
//! Two protocols are supported: a fixed number of deletions with at most
//! one per trace, and a proportion of all labeled events with no per-trace
//! limit. Both sample uniformly without replacement and record every
//! deleted label so that repairs can be scored and the log restored.

use std::io::{Read, Write};

use rand::Rng as _;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::eventlog::EventLog;
use crate::rng;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Protocol {
    FixedCountOnePerTrace,
    Proportion,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct LedgerEntry {
    pub trace_id: String,
    pub position: usize,
    pub original_activity: String,
}

/// Which labels were deleted, and what they were.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct CorruptionLedger {
    pub entries: Vec<LedgerEntry>,
    pub seed: u64,
    pub protocol: Protocol,
}

/// JSON sidecar written next to a ledger CSV.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct LedgerMeta {
    pub seed: u64,
    pub protocol: Protocol,
    pub count: usize,
}

impl CorruptionLedger {
    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn meta(&self) -> LedgerMeta {
        LedgerMeta {
            seed: self.seed,
            protocol: self.protocol,
            count: self.entries.len(),
        }
    }

    /// Entries as CSV with header `trace_id,position,original_activity`.
    pub fn write_csv<W: Write>(&self, sink: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(sink);
        w.write_record(["trace_id", "position", "original_activity"])?;
        for e in &self.entries {
            w.write_record([
                e.trace_id.as_str(),
                &e.position.to_string(),
                &e.original_activity,
            ])?;
        }
        w.flush()?;
        Ok(())
    }

    pub fn write_meta<W: Write>(&self, sink: W) -> Result<()> {
        serde_json::to_writer_pretty(sink, &self.meta())?;
        Ok(())
    }

    /// Rebuild a ledger from its CSV and JSON sidecar.
    pub fn read<R1: Read, R2: Read>(csv_source: R1, meta_source: R2) -> Result<Self> {
        let meta: LedgerMeta = serde_json::from_reader(meta_source)?;
        let mut r = csv::Reader::from_reader(csv_source);
        let mut entries = Vec::new();
        for rec in r.records() {
            let rec = rec?;
            let line = rec.position().map(|p| p.line());
            if rec.len() != 3 {
                return Err(Error::parse(line, "ledger rows need 3 fields"));
            }
            let position = rec[1]
                .parse()
                .map_err(|_| Error::parse(line, format!("bad position {:?}", &rec[1])))?;
            entries.push(LedgerEntry {
                trace_id: rec[0].to_string(),
                position,
                original_activity: rec[2].to_string(),
            });
        }
        if entries.len() != meta.count {
            return Err(Error::Consistency(format!(
                "ledger has {} rows but sidecar declares {}",
                entries.len(),
                meta.count
            )));
        }
        Ok(CorruptionLedger {
            entries,
            seed: meta.seed,
            protocol: meta.protocol,
        })
    }
}

/// Delete `targets` (trace index, position) from a copy of `log`.
fn apply(
    log: &EventLog,
    mut targets: Vec<(usize, usize)>,
    seed: u64,
    protocol: Protocol,
) -> (EventLog, CorruptionLedger) {
    targets.sort_unstable();
    let mut out = log.clone();
    let entries = targets
        .into_iter()
        .map(|(ti, pos)| {
            let trace = &log.traces()[ti];
            let original = trace.events()[pos]
                .activity()
                .expect("only labeled events are sampled")
                .to_string();
            out.set_activity_at(ti, pos, None);
            LedgerEntry {
                trace_id: trace.trace_id().to_string(),
                position: pos,
                original_activity: original,
            }
        })
        .collect();
    (
        out,
        CorruptionLedger {
            entries,
            seed,
            protocol,
        },
    )
}

/// Remove exactly `count` labels, at most one per trace.
///
/// Traces are drawn uniformly among those with at least one label, then
/// one labeled position uniformly within each drawn trace.
pub fn corrupt_fixed_count(
    log: &EventLog,
    count: usize,
    seed: u64,
) -> Result<(EventLog, CorruptionLedger)> {
    let mut eligible: Vec<(usize, Vec<usize>)> = log
        .traces()
        .iter()
        .enumerate()
        .filter_map(|(ti, t)| {
            let labeled: Vec<usize> = t
                .events()
                .iter()
                .filter(|e| !e.is_missing())
                .map(|e| e.position())
                .collect();
            (!labeled.is_empty()).then_some((ti, labeled))
        })
        .collect();
    if count > eligible.len() {
        return Err(Error::Capacity {
            requested: count,
            available: eligible.len(),
        });
    }
    let mut rng = rng::seeded(seed);
    let chosen = rng::choose_prefix(&mut eligible, count, &mut rng);
    let targets = chosen
        .iter()
        .map(|(ti, labeled)| (*ti, labeled[rng.random_range(0..labeled.len())]))
        .collect();
    Ok(apply(log, targets, seed, Protocol::FixedCountOnePerTrace))
}

/// Number of labels removed for a fraction of `labeled`: rounded down.
pub fn proportion_count(fraction: f64, labeled: usize) -> usize {
    // the epsilon keeps e.g. 0.29 * 100 from truncating to 28
    (fraction * labeled as f64 + 1e-9).floor() as usize
}

/// Remove `floor(fraction × labeled events)` labels uniformly over the log.
pub fn corrupt_proportion(
    log: &EventLog,
    fraction: f64,
    seed: u64,
) -> Result<(EventLog, CorruptionLedger)> {
    if !(fraction > 0.0 && fraction <= 1.0) {
        return Err(Error::Argument(format!(
            "fraction {fraction} not in (0, 1]"
        )));
    }
    let mut labeled: Vec<(usize, usize)> = log
        .traces()
        .iter()
        .enumerate()
        .flat_map(|(ti, t)| {
            t.events()
                .iter()
                .filter(|e| !e.is_missing())
                .map(move |e| (ti, e.position()))
        })
        .collect();
    if labeled.is_empty() {
        return Err(Error::Argument("log has no labeled events".into()));
    }
    let n = proportion_count(fraction, labeled.len());
    let mut rng = rng::seeded(seed);
    let targets = rng::choose_prefix(&mut labeled, n, &mut rng).to_vec();
    Ok(apply(log, targets, seed, Protocol::Proportion))
}

/// Put every ledger label back. Fails if an entry addresses a present label.
pub fn restore(log: &EventLog, ledger: &CorruptionLedger) -> Result<EventLog> {
    let mut out = log.clone();
    for e in &ledger.entries {
        let current = log.event(&e.trace_id, e.position).ok_or_else(|| {
            Error::Consistency(format!("no event at {}:{}", e.trace_id, e.position))
        })?;
        if let Some(a) = current.activity() {
            return Err(Error::Consistency(format!(
                "event {}:{} is labeled {a:?}, expected a missing label",
                e.trace_id, e.position
            )));
        }
        out.set_activity(&e.trace_id, e.position, Some(e.original_activity.clone()))?;
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use std::collections::HashSet;

    use proptest::prelude::*;

    use super::*;
    use crate::eventlog::EventLogBuilder;

    fn log_with(traces: usize, len: usize) -> EventLog {
        let mut b = EventLogBuilder::new(["resource"]);
        for t in 0..traces {
            for i in 0..len {
                let act = format!("A{}", (t + i) % 7);
                b.event(&format!("c{t}"), Some(&act), None, &["r"]).unwrap();
            }
        }
        b.build()
    }

    #[test]
    fn fixed_count_one_per_trace() {
        let log = log_with(300, 6);
        let (bad, ledger) = corrupt_fixed_count(&log, 100, 1).unwrap();
        assert_eq!(ledger.len(), 100);
        let ids: HashSet<_> = ledger.entries.iter().map(|e| &e.trace_id).collect();
        assert_eq!(ids.len(), 100);
        assert_eq!(bad.num_missing(), 100);
        assert_eq!(ledger.protocol, Protocol::FixedCountOnePerTrace);
    }

    #[test]
    fn fixed_count_zero_is_identity() {
        let log = log_with(5, 3);
        let (bad, ledger) = corrupt_fixed_count(&log, 0, 1).unwrap();
        assert_eq!(bad, log);
        assert!(ledger.is_empty());
    }

    #[test]
    fn fixed_count_capacity() {
        let log = log_with(5, 3);
        let err = corrupt_fixed_count(&log, 6, 1).unwrap_err();
        assert!(matches!(
            err,
            Error::Capacity {
                requested: 6,
                available: 5
            }
        ));
    }

    #[test]
    fn fixed_count_deterministic() {
        let log = log_with(50, 4);
        let a = corrupt_fixed_count(&log, 20, 42).unwrap();
        let b = corrupt_fixed_count(&log, 20, 42).unwrap();
        assert_eq!(a, b);
        let c = corrupt_fixed_count(&log, 20, 43).unwrap();
        assert_ne!(a.1.entries, c.1.entries);
    }

    #[test]
    fn proportion_counts_truncate() {
        // Sepsis: 30% of 15,214 events
        assert_eq!(proportion_count(0.30, 15_214), 4564);
        // Helpdesk: 10% of 21,348 events
        assert_eq!(proportion_count(0.10, 21_348), 2134);
        assert_eq!(proportion_count(0.20, 100), 20);
        assert_eq!(proportion_count(0.29, 100), 29);
    }

    #[test]
    fn proportion_on_sepsis_sized_log() {
        let log = log_with(1, 15_214);
        let (_, ledger) = corrupt_proportion(&log, 0.30, 5).unwrap();
        assert_eq!(ledger.len(), 4564);
    }

    #[test]
    fn proportion_floor_zero_leaves_log() {
        let log = log_with(1, 1);
        let (bad, ledger) = corrupt_proportion(&log, 0.5, 5).unwrap();
        assert_eq!(bad, log);
        assert!(ledger.is_empty());
    }

    #[test]
    fn proportion_rejects_bad_fraction() {
        let log = log_with(2, 2);
        for f in [0.0, -0.1, 1.5, f64::NAN] {
            assert!(matches!(
                corrupt_proportion(&log, f, 0),
                Err(Error::Argument(_))
            ));
        }
        assert!(corrupt_proportion(&log, 1.0, 0).is_ok());
    }

    #[test]
    fn restore_rejects_stale_entry() {
        let log = log_with(3, 3);
        let ledger = CorruptionLedger {
            entries: vec![LedgerEntry {
                trace_id: "c0".into(),
                position: 1,
                original_activity: "A1".into(),
            }],
            seed: 0,
            protocol: Protocol::Proportion,
        };
        assert!(matches!(restore(&log, &ledger), Err(Error::Consistency(_))));
    }

    #[test]
    fn restore_empty_ledger_is_identity() {
        let log = log_with(3, 3);
        let ledger = CorruptionLedger {
            entries: vec![],
            seed: 0,
            protocol: Protocol::Proportion,
        };
        assert_eq!(restore(&log, &ledger).unwrap(), log);
    }

    #[test]
    fn ledger_io_round_trip() {
        let log = log_with(10, 5);
        let (_, ledger) = corrupt_proportion(&log, 0.3, 11).unwrap();
        let mut csv_buf = Vec::new();
        let mut json_buf = Vec::new();
        ledger.write_csv(&mut csv_buf).unwrap();
        ledger.write_meta(&mut json_buf).unwrap();
        let back = CorruptionLedger::read(&csv_buf[..], &json_buf[..]).unwrap();
        assert_eq!(back, ledger);
    }

    fn arb_log() -> impl Strategy<Value = EventLog> {
        prop::collection::vec(prop::collection::vec((0u8..5, any::<bool>()), 1..8), 1..12).prop_map(
            |traces| {
                let mut b = EventLogBuilder::new(["resource"]);
                for (t, evs) in traces.iter().enumerate() {
                    for (a, labeled) in evs {
                        let act = format!("A{a}");
                        b.event(
                            &format!("t{t}"),
                            labeled.then_some(act.as_str()),
                            None,
                            &["r"],
                        )
                        .unwrap();
                    }
                }
                b.build()
            },
        )
    }

    proptest! {
        #[test]
        fn restore_inverts_proportion(log in arb_log(), frac in 0.01f64..=1.0, seed in any::<u64>()) {
            prop_assume!(log.num_labeled() > 0);
            let (bad, ledger) = corrupt_proportion(&log, frac, seed).unwrap();
            prop_assert_eq!(ledger.len(), proportion_count(frac, log.num_labeled()));
            prop_assert_eq!(bad.num_labeled() + ledger.len(), log.num_labeled());
            // removed positions and remaining labeled positions partition the original labels
            let removed: HashSet<_> = ledger.entries.iter().map(|e| (e.trace_id.clone(), e.position)).collect();
            prop_assert_eq!(removed.len(), ledger.len());
            for e in log.events().filter(|e| !e.is_missing()) {
                let key = (e.trace_id().to_string(), e.position());
                let still = bad.event(&key.0, key.1).unwrap().activity().is_some();
                prop_assert!(still ^ removed.contains(&key));
            }
            prop_assert_eq!(restore(&bad, &ledger).unwrap(), log);
        }

        #[test]
        fn restore_inverts_fixed_count(log in arb_log(), seed in any::<u64>(), want in 0usize..12) {
            let eligible = log.traces().iter().filter(|t| t.activities().any(|a| a.is_some())).count();
            let count = want.min(eligible);
            let (bad, ledger) = corrupt_fixed_count(&log, count, seed).unwrap();
            prop_assert_eq!(ledger.len(), count);
            let ids: HashSet<_> = ledger.entries.iter().map(|e| e.trace_id.clone()).collect();
            prop_assert_eq!(ids.len(), count);
            prop_assert_eq!(restore(&bad, &ledger).unwrap(), log);
        }
    }
}

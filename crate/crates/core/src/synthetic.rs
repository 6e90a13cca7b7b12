//! Example and generated logs for demos and tests.

use chrono::{Duration, NaiveDate};
use rand::Rng as _;

use crate::eventlog::{parse_csv, CsvFormat, EventLog, EventLogBuilder, Timestamp};
use crate::rng::{self, Rng};

/// The three-trace airport log with two missing labels, as CSV.
pub const AIRPORT_L2_CSV: &str = include_str!("../data/airport_l2.csv");

pub fn airport_l2() -> EventLog {
    parse_csv(AIRPORT_L2_CSV.as_bytes(), &CsvFormat::default()).expect("bundled fixture parses")
}

fn epoch() -> Timestamp {
    NaiveDate::from_ymd_opt(2020, 9, 1)
        .and_then(|d| d.and_hms_opt(8, 0, 0))
        .expect("valid date")
}

fn pick<'a>(pool: &[&'a str], rng: &mut Rng) -> &'a str {
    pool[rng.random_range(0..pool.len())]
}

/// Airport process with three kinds of passenger: normal (1/2), priority
/// (1/4) and normal-then-priority-boarding (1/4). Every activity has its own
/// pool of three resources, except that Linda works both boarding desks.
pub fn airport_log(traces: usize, seed: u64) -> EventLog {
    const ARRIVE: &[&str] = &["Tom", "Alice", "Steven"];
    const CHECK_IN: &[&str] = &["Jack", "Emma", "Oscar"];
    const PRIORITY_CHECK_IN: &[&str] = &["James", "Grace", "Henry"];
    const SECURITY: &[&str] = &["Thomas", "Mark", "Sofia"];
    const PRIORITY_SECURITY: &[&str] = &["Lucas", "Chloe", "Isaac"];
    const BOARDING: &[&str] = &["Linda", "Mia", "Noah"];
    const PRIORITY_BOARDING: &[&str] = &["Linda", "Olivia", "Liam"];
    const TAKE_OFF: &[&str] = &["James", "Peter", "Ethan"];

    let mut rng = rng::seeded(seed);
    let mut b = EventLogBuilder::new(["resource"]);
    let mut start = epoch();
    for t in 0..traces {
        let kind = rng.random_range(0..4);
        let steps: [(&str, &[&str]); 5] = match kind {
            0 | 1 => [
                ("Arrive at Airport", ARRIVE),
                ("Check in", CHECK_IN),
                ("Security Check", SECURITY),
                ("Boarding", BOARDING),
                ("Take off", TAKE_OFF),
            ],
            2 => [
                ("Arrive at Airport", ARRIVE),
                ("Priority Check in", PRIORITY_CHECK_IN),
                ("Priority Security Check", PRIORITY_SECURITY),
                ("Priority Boarding", PRIORITY_BOARDING),
                ("Take off", TAKE_OFF),
            ],
            _ => [
                ("Arrive at Airport", ARRIVE),
                ("Check in", CHECK_IN),
                ("Security Check", SECURITY),
                ("Priority Boarding", PRIORITY_BOARDING),
                ("Take off", TAKE_OFF),
            ],
        };
        let case = (t + 1).to_string();
        let mut ts = start;
        for (activity, pool) in steps {
            b.event(&case, Some(activity), Some(ts), &[pick(pool, &mut rng)])
                .expect("one attribute");
            ts += Duration::minutes(rng.random_range(5..90));
        }
        start += Duration::minutes(rng.random_range(1..30));
    }
    b.build()
}

/// Number of block kinds in [`suffix_determined_log`].
pub const BLOCK_KINDS: usize = 4;
/// Events per block in [`suffix_determined_log`].
pub const BLOCK_LEN: usize = 4;

/// Traces made of `blocks` consecutive blocks. A block of kind `X` is
/// `Start X, X step 1, X step 2, X step 3` with `X` drawn uniformly, and
/// resources are drawn uniformly from a shared pool so they carry no
/// signal.
///
/// A block's first label is a function of the activity that follows it,
/// while the activities before it belong to an unrelated block. Every other
/// label is also implied by its predecessor. All `BLOCK_KINDS * BLOCK_LEN`
/// activities are equally frequent.
pub fn suffix_determined_log(traces: usize, blocks: usize, seed: u64) -> EventLog {
    const KINDS: [&str; BLOCK_KINDS] = ["A", "B", "C", "D"];
    const STAFF: &[&str] = &["r1", "r2", "r3", "r4", "r5"];
    let mut rng = rng::seeded(seed);
    let mut b = EventLogBuilder::new(["resource"]);
    let mut start = epoch();
    for t in 0..traces {
        let case = format!("s{}", t + 1);
        let mut ts = start;
        for _ in 0..blocks {
            let kind = KINDS[rng.random_range(0..BLOCK_KINDS)];
            for step in 0..BLOCK_LEN {
                let activity = if step == 0 {
                    format!("Start {kind}")
                } else {
                    format!("{kind} step {step}")
                };
                b.event(&case, Some(&activity), Some(ts), &[pick(STAFF, &mut rng)])
                    .expect("one attribute");
                ts += Duration::minutes(1);
            }
        }
        start += Duration::hours(1);
    }
    b.build()
}

//! From events to fixed-width training rows.
//!
//! Every event becomes an [`EncodedSample`]: the activity ids of its `k`
//! predecessors and `k` successors, one id per configured attribute, and,
//! for events whose label is known, the label id. Both context windows are
//! padded on the side far from the target, so the last element of each is
//! always the immediate neighbour:
//!
//! ```text
//! prefix: e[i-k] .. e[i-1]        (nearest predecessor last)
//! suffix: e[i+k] .. e[i+1]        (nearest successor last)
//! ```

use std::collections::HashMap;
use std::io::Write;

use indexmap::IndexMap;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::eventlog::{Event, EventLog, Trace};

/// Padding id, shared by activity and attribute vocabularies.
pub const PAD: usize = 0;
/// Activity id for a neighbour that exists but has no label.
pub const MISSING: usize = 1;
/// Attribute id for empty or unseen values.
pub const UNK: usize = 1;
/// Ids below this are reserved.
pub const FIRST_ID: usize = 2;

/// Display name of [`MISSING`] in dumps.
pub const MISSING_TOKEN: &str = "Missing";

/// Bijection between strings and ids `FIRST_ID..`, in insertion order.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(from = "Vec<String>", into = "Vec<String>")]
pub struct CategoryMap {
    values: Vec<String>,
    ids: HashMap<String, usize>,
}

impl From<Vec<String>> for CategoryMap {
    fn from(values: Vec<String>) -> Self {
        let mut m = CategoryMap::default();
        for v in values {
            m.insert(&v);
        }
        m
    }
}

impl From<CategoryMap> for Vec<String> {
    fn from(m: CategoryMap) -> Self {
        m.values
    }
}

impl CategoryMap {
    fn insert(&mut self, value: &str) -> usize {
        if let Some(&id) = self.ids.get(value) {
            return id;
        }
        let id = FIRST_ID + self.values.len();
        self.values.push(value.to_string());
        self.ids.insert(value.to_string(), id);
        id
    }

    pub fn id(&self, value: &str) -> Option<usize> {
        self.ids.get(value).copied()
    }

    /// The string for a non-reserved id.
    pub fn value(&self, id: usize) -> Option<&str> {
        id.checked_sub(FIRST_ID)
            .and_then(|i| self.values.get(i))
            .map(String::as_str)
    }

    /// Total number of ids including the reserved ones.
    pub fn size(&self) -> usize {
        FIRST_ID + self.values.len()
    }

    pub fn values(&self) -> &[String] {
        &self.values
    }
}

/// Categorical encodings for activities and attributes.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Vocabulary {
    pub activities: CategoryMap,
    pub attributes: IndexMap<String, CategoryMap>,
}

impl Vocabulary {
    pub fn activity_count(&self) -> usize {
        self.activities.size()
    }

    pub fn encode_activity(&self, label: &str) -> Option<usize> {
        self.activities.id(label)
    }

    pub fn decode_activity(&self, id: usize) -> Option<&str> {
        self.activities.value(id)
    }

    pub fn attribute_names(&self) -> impl Iterator<Item = &str> + '_ {
        self.attributes.keys().map(String::as_str)
    }

    /// Attribute id, with `UNK` for empty, unseen, or unknown-attribute values.
    pub fn encode_attribute(&self, name: &str, value: &str) -> usize {
        self.attributes
            .get(name)
            .and_then(|m| m.id(value))
            .unwrap_or(UNK)
    }

    fn token_id(&self, token: ContextToken<'_>) -> usize {
        match token {
            ContextToken::Pad => PAD,
            ContextToken::Missing => MISSING,
            // labels the model never saw are as good as missing
            ContextToken::Label(l) => self.encode_activity(l).unwrap_or(MISSING),
        }
    }

    fn token_name(&self, id: usize) -> &str {
        match id {
            PAD => "",
            MISSING => MISSING_TOKEN,
            _ => self.decode_activity(id).unwrap_or("?"),
        }
    }
}

/// Length of the prefix and suffix windows.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct ContextConfig {
    k: usize,
}

impl ContextConfig {
    pub fn new(k: usize) -> Result<Self> {
        if k == 0 {
            return Err(Error::Argument(
                "context length k must be at least 1".into(),
            ));
        }
        Ok(ContextConfig { k })
    }

    pub fn k(&self) -> usize {
        self.k
    }
}

impl Default for ContextConfig {
    fn default() -> Self {
        ContextConfig { k: 5 }
    }
}

/// One slot of a context window.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ContextToken<'a> {
    /// Outside the trace.
    Pad,
    /// An event whose label is missing.
    Missing,
    Label(&'a str),
}

impl<'a> ContextToken<'a> {
    fn of(event: Option<&'a Event>) -> Self {
        match event {
            None => ContextToken::Pad,
            Some(e) => e
                .activity()
                .map_or(ContextToken::Missing, ContextToken::Label),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct EncodedSample {
    /// Chronological, nearest predecessor last.
    pub prefix_ids: Vec<usize>,
    /// Reverse-chronological, nearest successor last.
    pub suffix_ids: Vec<usize>,
    pub attribute_ids: Vec<usize>,
    pub label_id: Option<usize>,
    pub origin: (String, usize),
}

/// Events with a label and events without one, in log order.
pub fn split_events(log: &EventLog) -> (Vec<&Event>, Vec<&Event>) {
    log.events().partition(|e| !e.is_missing())
}

/// The k-prefix and k-suffix labels of the event at `position`.
pub fn extract_context<'a>(
    trace: &'a Trace,
    position: usize,
    cfg: ContextConfig,
) -> Result<(Vec<ContextToken<'a>>, Vec<ContextToken<'a>>)> {
    let events = trace.events();
    if position >= events.len() {
        return Err(Error::Argument(format!(
            "position {position} out of bounds for trace {:?} of length {}",
            trace.trace_id(),
            events.len()
        )));
    }
    let k = cfg.k();
    let prefix = (0..k)
        .map(|j| {
            let back = k - j;
            ContextToken::of(position.checked_sub(back).map(|p| &events[p]))
        })
        .collect();
    let suffix = (0..k)
        .map(|j| ContextToken::of(events.get(position + k - j)))
        .collect();
    Ok((prefix, suffix))
}

/// Activity ids come from labeled events only; attribute ids from all
/// events. Ids are assigned in order of first occurrence.
pub fn build_vocabulary<S: AsRef<str>>(log: &EventLog, attributes: &[S]) -> Vocabulary {
    let mut activities = CategoryMap::default();
    let mut attrs: IndexMap<String, CategoryMap> = attributes
        .iter()
        .map(|a| (a.as_ref().to_string(), CategoryMap::default()))
        .collect();
    for event in log.events() {
        if let Some(a) = event.activity() {
            activities.insert(a);
        }
        for (name, map) in attrs.iter_mut() {
            match event.attribute(name) {
                Some(v) if !v.is_empty() => {
                    map.insert(v);
                }
                _ => {}
            }
        }
    }
    Vocabulary {
        activities,
        attributes: attrs,
    }
}

fn encode_event(
    trace: &Trace,
    event: &Event,
    vocab: &Vocabulary,
    cfg: ContextConfig,
    attributes: &[String],
) -> EncodedSample {
    let (prefix, suffix) =
        extract_context(trace, event.position(), cfg).expect("events index their own trace");
    EncodedSample {
        prefix_ids: prefix.into_iter().map(|t| vocab.token_id(t)).collect(),
        suffix_ids: suffix.into_iter().map(|t| vocab.token_id(t)).collect(),
        attribute_ids: attributes
            .iter()
            .map(|name| vocab.encode_attribute(name, event.attribute(name).unwrap_or("")))
            .collect(),
        label_id: event.activity().and_then(|a| vocab.encode_activity(a)),
        origin: (event.trace_id().to_string(), event.position()),
    }
}

fn build_set<S: AsRef<str>>(
    log: &EventLog,
    vocab: &Vocabulary,
    cfg: ContextConfig,
    attributes: &[S],
    labeled: bool,
) -> Vec<EncodedSample> {
    let attributes: Vec<String> = attributes.iter().map(|a| a.as_ref().to_string()).collect();
    log.traces()
        .iter()
        .flat_map(|t| t.events().iter().map(move |e| (t, e)))
        .filter(|(_, e)| e.is_missing() != labeled)
        // a label outside the vocabulary cannot be a training target
        .filter(|(_, e)| {
            !labeled
                || e.activity()
                    .and_then(|a| vocab.encode_activity(a))
                    .is_some()
        })
        .map(|(t, e)| encode_event(t, e, vocab, cfg, &attributes))
        .collect()
}

/// One labeled sample per event with a known activity.
pub fn build_training_set<S: AsRef<str>>(
    log: &EventLog,
    vocab: &Vocabulary,
    cfg: ContextConfig,
    attributes: &[S],
) -> Vec<EncodedSample> {
    build_set(log, vocab, cfg, attributes, true)
}

/// One unlabeled sample per event with a missing activity.
pub fn build_repair_set<S: AsRef<str>>(
    log: &EventLog,
    vocab: &Vocabulary,
    cfg: ContextConfig,
    attributes: &[S],
) -> Vec<EncodedSample> {
    build_set(log, vocab, cfg, attributes, false)
}

/// Debug dump: `Event, <attributes>, Prefix_1..k, Suffix_1..k, Label`.
pub fn write_samples_csv<W: Write, S: AsRef<str>>(
    samples: &[EncodedSample],
    vocab: &Vocabulary,
    attributes: &[S],
    sink: W,
) -> Result<()> {
    let k = samples.first().map_or(0, |s| s.prefix_ids.len());
    let mut w = csv::Writer::from_writer(sink);
    let mut header = vec!["Event".to_string()];
    header.extend(attributes.iter().map(|a| a.as_ref().to_string()));
    header.extend((1..=k).map(|i| format!("Prefix_{i}")));
    header.extend((1..=k).map(|i| format!("Suffix_{i}")));
    header.push("Label".into());
    w.write_record(&header)?;
    for s in samples {
        let mut row = vec![format!("{}:{}", s.origin.0, s.origin.1)];
        for (name, &id) in attributes.iter().zip(&s.attribute_ids) {
            let v = vocab
                .attributes
                .get(name.as_ref())
                .and_then(|m| m.value(id))
                .unwrap_or("");
            row.push(v.to_string());
        }
        row.extend(
            s.prefix_ids
                .iter()
                .map(|&id| vocab.token_name(id).to_string()),
        );
        row.extend(
            s.suffix_ids
                .iter()
                .map(|&id| vocab.token_name(id).to_string()),
        );
        row.push(
            s.label_id
                .and_then(|id| vocab.decode_activity(id))
                .unwrap_or("_")
                .to_string(),
        );
        w.write_record(&row)?;
    }
    w.flush()?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use proptest::prelude::*;

    use super::*;
    use crate::eventlog::EventLogBuilder;

    #[test]
    fn k_must_be_positive() {
        assert!(ContextConfig::new(0).is_err());
        assert_eq!(ContextConfig::new(3).unwrap().k(), 3);
    }

    #[test]
    fn out_of_bounds_position() {
        let mut b = EventLogBuilder::new(Vec::<String>::new());
        b.event("t", Some("A"), None, &[]).unwrap();
        let log = b.build();
        let cfg = ContextConfig::new(2).unwrap();
        assert!(matches!(
            extract_context(&log.traces()[0], 1, cfg),
            Err(Error::Argument(_))
        ));
    }

    #[test]
    fn first_event_has_all_pad_prefix() {
        let mut b = EventLogBuilder::new(Vec::<String>::new());
        for a in ["A", "B", "C"] {
            b.event("t", Some(a), None, &[]).unwrap();
        }
        let log = b.build();
        let (prefix, suffix) =
            extract_context(&log.traces()[0], 0, ContextConfig::new(4).unwrap()).unwrap();
        assert!(prefix.iter().all(|t| *t == ContextToken::Pad));
        assert_eq!(
            suffix,
            [
                ContextToken::Pad,
                ContextToken::Pad,
                ContextToken::Label("C"),
                ContextToken::Label("B")
            ]
        );
    }

    #[test]
    fn empty_log_vocabulary_is_reserved_only() {
        let log = EventLog::empty(vec!["resource".into()]);
        let v = build_vocabulary(&log, &["resource"]);
        assert_eq!(v.activity_count(), 2);
        assert_eq!(v.attributes["resource"].size(), 2);
    }

    #[test]
    fn unseen_attribute_value_is_unk() {
        let mut b = EventLogBuilder::new(["resource"]);
        b.event("t", Some("A"), None, &["Ann"]).unwrap();
        b.event("t", Some("B"), None, &[""]).unwrap();
        let log = b.build();
        let v = build_vocabulary(&log, &["resource"]);
        assert_eq!(v.encode_attribute("resource", "Bob"), UNK);
        assert_eq!(v.encode_attribute("resource", ""), UNK);
        assert_eq!(v.encode_attribute("resource", "Ann"), FIRST_ID);
        let set = build_training_set(&log, &v, ContextConfig::new(1).unwrap(), &["resource"]);
        assert_eq!(set[1].attribute_ids, [UNK]);
    }

    #[test]
    fn vocabulary_serde_round_trip() {
        let mut b = EventLogBuilder::new(["resource"]);
        b.event("t", Some("A"), None, &["x"]).unwrap();
        b.event("t", Some("B"), None, &["y"]).unwrap();
        let v = build_vocabulary(&b.build(), &["resource"]);
        let json = serde_json::to_string(&v).unwrap();
        let back: Vocabulary = serde_json::from_str(&json).unwrap();
        assert_eq!(back, v);
        assert_eq!(back.encode_activity("B"), Some(3));
    }

    fn arb_log() -> impl Strategy<Value = EventLog> {
        prop::collection::vec(
            prop::collection::vec((0u8..6, any::<bool>(), 0u8..3), 1..10),
            1..8,
        )
        .prop_map(|traces| {
            let mut b = EventLogBuilder::new(["resource"]);
            for (t, evs) in traces.iter().enumerate() {
                for (a, labeled, r) in evs {
                    let act = format!("A{a}");
                    let res = format!("R{r}");
                    b.event(
                        &format!("t{t}"),
                        labeled.then_some(act.as_str()),
                        None,
                        &[&res],
                    )
                    .unwrap();
                }
            }
            b.build()
        })
    }

    proptest! {
        #[test]
        fn partition_counts(log in arb_log()) {
            let (complete, missing) = split_events(&log);
            prop_assert_eq!(complete.len() + missing.len(), log.num_events());
            prop_assert!(complete.iter().all(|e| !e.is_missing()));
            prop_assert!(missing.iter().all(|e| e.is_missing()));
        }

        #[test]
        fn vocabulary_round_trip(log in arb_log()) {
            let v = build_vocabulary(&log, &["resource"]);
            for e in log.events() {
                if let Some(a) = e.activity() {
                    let id = v.encode_activity(a).unwrap();
                    prop_assert!(id >= FIRST_ID && id < v.activity_count());
                    prop_assert_eq!(v.decode_activity(id), Some(a));
                }
                let r = e.attribute("resource").unwrap();
                let id = v.encode_attribute("resource", r);
                prop_assert_eq!(v.attributes["resource"].value(id), Some(r));
            }
        }

        #[test]
        fn window_reconstruction(log in arb_log(), k in 1usize..5) {
            let cfg = ContextConfig::new(k).unwrap();
            let v = build_vocabulary(&log, &["resource"]);
            let mut samples = build_training_set(&log, &v, cfg, &["resource"]);
            samples.extend(build_repair_set(&log, &v, cfg, &["resource"]));
            prop_assert_eq!(samples.len(), log.num_events());
            let id_of = |e: &Event| e.activity().and_then(|a| v.encode_activity(a)).unwrap_or(MISSING);
            for s in &samples {
                prop_assert_eq!(s.prefix_ids.len(), k);
                prop_assert_eq!(s.suffix_ids.len(), k);
                let trace = log.trace(&s.origin.0).unwrap();
                let pos = s.origin.1;
                let target = id_of(&trace.events()[pos]);
                let mut window: Vec<usize> = s.prefix_ids.clone();
                window.push(target);
                window.extend(s.suffix_ids.iter().rev());
                // pads only at the far ends
                let first_real = window.iter().position(|&i| i != PAD).unwrap();
                let last_real = window.iter().rposition(|&i| i != PAD).unwrap();
                prop_assert!(window[first_real..=last_real].iter().all(|&i| i != PAD));
                let lo = pos.saturating_sub(k);
                let hi = (pos + k + 1).min(trace.len());
                let expected: Vec<usize> = trace.events()[lo..hi].iter().map(id_of).collect();
                prop_assert_eq!(&window[first_real..=last_real], &expected[..]);
            }
        }
    }
}

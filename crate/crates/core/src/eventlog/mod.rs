//! Event logs: traces of attributed events, plus CSV and XES ingestion.
//!
//! A log is an ordered collection of [`Trace`]s; each trace is the ordered
//! sequence of [`Event`]s recorded for one case. An event whose activity is
//! `None` has a missing label; repairing those labels is what the rest of
//! the crate is for.

mod csv;
mod xes;

use std::collections::HashMap;

use chrono::NaiveDateTime;
use indexmap::IndexMap;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub use self::csv::{parse_csv, serialize_csv, ColumnMapping, CsvFormat, DEFAULT_TIMESTAMP_FORMAT};
pub use self::xes::parse_xes;

/// Timestamps carry no zone; XES instants are converted to UTC on ingestion.
pub type Timestamp = NaiveDateTime;

/// One execution record of an activity.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Event {
    trace_id: String,
    position: usize,
    activity: Option<String>,
    attributes: IndexMap<String, String>,
    timestamp: Option<Timestamp>,
}

impl Event {
    pub fn trace_id(&self) -> &str {
        &self.trace_id
    }

    /// Index of this event within its trace.
    pub fn position(&self) -> usize {
        self.position
    }

    /// The activity label, or `None` when it is missing.
    pub fn activity(&self) -> Option<&str> {
        self.activity.as_deref()
    }

    pub fn is_missing(&self) -> bool {
        self.activity.is_none()
    }

    pub fn attributes(&self) -> &IndexMap<String, String> {
        &self.attributes
    }

    /// Value of a named attribute; absent values are stored as `""`.
    pub fn attribute(&self, name: &str) -> Option<&str> {
        self.attributes.get(name).map(String::as_str)
    }

    pub fn timestamp(&self) -> Option<Timestamp> {
        self.timestamp
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Trace {
    trace_id: String,
    events: Vec<Event>,
}

impl Trace {
    pub fn trace_id(&self) -> &str {
        &self.trace_id
    }

    pub fn events(&self) -> &[Event] {
        &self.events
    }

    pub fn len(&self) -> usize {
        self.events.len()
    }

    pub fn is_empty(&self) -> bool {
        self.events.is_empty()
    }

    /// Activity labels in order, `None` marking missing ones.
    pub fn activities(&self) -> impl Iterator<Item = Option<&str>> + '_ {
        self.events.iter().map(Event::activity)
    }
}

/// A multiset of traces, kept in first-appearance order.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct EventLog {
    traces: Vec<Trace>,
    attribute_names: Vec<String>,
    #[serde(skip)]
    index: HashMap<String, usize>,
}

impl PartialEq for EventLog {
    fn eq(&self, other: &Self) -> bool {
        self.attribute_names == other.attribute_names && self.traces == other.traces
    }
}

impl Eq for EventLog {}

impl EventLog {
    /// An empty log declaring the given attribute columns.
    pub fn empty(attribute_names: Vec<String>) -> Self {
        EventLog {
            traces: Vec::new(),
            attribute_names,
            index: HashMap::new(),
        }
    }

    pub fn traces(&self) -> &[Trace] {
        &self.traces
    }

    pub fn attribute_names(&self) -> &[String] {
        &self.attribute_names
    }

    pub fn trace(&self, trace_id: &str) -> Option<&Trace> {
        self.trace_index(trace_id).map(|i| &self.traces[i])
    }

    pub fn trace_index(&self, trace_id: &str) -> Option<usize> {
        if self.index.len() == self.traces.len() {
            self.index.get(trace_id).copied()
        } else {
            // deserialized logs have no index
            self.traces.iter().position(|t| t.trace_id == trace_id)
        }
    }

    pub fn event(&self, trace_id: &str, position: usize) -> Option<&Event> {
        self.trace(trace_id).and_then(|t| t.events.get(position))
    }

    pub fn events(&self) -> impl Iterator<Item = &Event> + '_ {
        self.traces.iter().flat_map(|t| t.events.iter())
    }

    pub fn num_traces(&self) -> usize {
        self.traces.len()
    }

    pub fn num_events(&self) -> usize {
        self.traces.iter().map(Trace::len).sum()
    }

    pub fn num_labeled(&self) -> usize {
        self.events().filter(|e| !e.is_missing()).count()
    }

    pub fn num_missing(&self) -> usize {
        self.events().filter(|e| e.is_missing()).count()
    }

    /// Replace the activity of one event, returning the previous value.
    pub fn set_activity(
        &mut self,
        trace_id: &str,
        position: usize,
        activity: Option<String>,
    ) -> Result<Option<String>> {
        if let Some(a) = &activity {
            if a.is_empty() {
                return Err(Error::Argument("activity labels must be non-empty".into()));
            }
        }
        let ti = self
            .trace_index(trace_id)
            .ok_or_else(|| Error::Consistency(format!("unknown trace {trace_id:?}")))?;
        let event = self.traces[ti].events.get_mut(position).ok_or_else(|| {
            Error::Consistency(format!("trace {trace_id:?} has no position {position}"))
        })?;
        Ok(std::mem::replace(&mut event.activity, activity))
    }

    /// Same as [`EventLog::set_activity`] but addressed by trace index.
    pub(crate) fn set_activity_at(
        &mut self,
        trace: usize,
        position: usize,
        activity: Option<String>,
    ) {
        self.traces[trace].events[position].activity = activity;
    }

    /// Rebuild the trace-id lookup, e.g. after deserializing.
    pub fn reindex(&mut self) {
        self.index = self
            .traces
            .iter()
            .enumerate()
            .map(|(i, t)| (t.trace_id.clone(), i))
            .collect();
    }
}

/// Incremental construction of an [`EventLog`].
///
/// Rows are grouped by case in first-appearance order; on `build` every
/// trace is stably sorted by timestamp (events without one sort first) and
/// positions are assigned.
#[derive(Debug)]
pub struct EventLogBuilder {
    attribute_names: Vec<String>,
    traces: Vec<(String, Vec<Event>)>,
    index: HashMap<String, usize>,
}

impl EventLogBuilder {
    pub fn new<S: Into<String>>(attribute_names: impl IntoIterator<Item = S>) -> Self {
        EventLogBuilder {
            attribute_names: attribute_names.into_iter().map(Into::into).collect(),
            traces: Vec::new(),
            index: HashMap::new(),
        }
    }

    pub fn attribute_names(&self) -> &[String] {
        &self.attribute_names
    }

    pub fn contains_trace(&self, case: &str) -> bool {
        self.index.contains_key(case)
    }

    /// Declare a trace up front so that it exists even with zero events.
    pub fn trace(&mut self, case: &str) -> &mut Self {
        self.slot(case);
        self
    }

    fn slot(&mut self, case: &str) -> usize {
        if let Some(&i) = self.index.get(case) {
            return i;
        }
        let i = self.traces.len();
        self.traces.push((case.to_string(), Vec::new()));
        self.index.insert(case.to_string(), i);
        i
    }

    /// Append an event. `attributes` are positional, matching the declared
    /// attribute names; missing trailing values become `""`.
    pub fn event(
        &mut self,
        case: &str,
        activity: Option<&str>,
        timestamp: Option<Timestamp>,
        attributes: &[&str],
    ) -> Result<&mut Self> {
        if attributes.len() > self.attribute_names.len() {
            return Err(Error::Argument(format!(
                "{} attribute values given for {} declared attributes",
                attributes.len(),
                self.attribute_names.len()
            )));
        }
        let attributes = self
            .attribute_names
            .iter()
            .enumerate()
            .map(|(i, name)| {
                (
                    name.clone(),
                    attributes.get(i).copied().unwrap_or("").to_string(),
                )
            })
            .collect();
        self.push(case, activity.map(str::to_string), timestamp, attributes);
        Ok(self)
    }

    pub(crate) fn push(
        &mut self,
        case: &str,
        activity: Option<String>,
        timestamp: Option<Timestamp>,
        attributes: IndexMap<String, String>,
    ) {
        let activity = activity.filter(|a| !a.is_empty());
        let slot = self.slot(case);
        self.traces[slot].1.push(Event {
            trace_id: case.to_string(),
            position: 0,
            activity,
            attributes,
            timestamp,
        });
    }

    pub fn build(self) -> EventLog {
        let traces = self
            .traces
            .into_iter()
            .map(|(trace_id, mut events)| {
                events.sort_by_key(|e| e.timestamp);
                for (i, e) in events.iter_mut().enumerate() {
                    e.position = i;
                }
                Trace { trace_id, events }
            })
            .collect();
        let mut log = EventLog {
            traces,
            attribute_names: self.attribute_names,
            index: HashMap::new(),
        };
        log.reindex();
        log
    }
}

use std::io::{BufReader, Read};

use chrono::{DateTime, NaiveDateTime};
use indexmap::IndexMap;
use quick_xml::events::{BytesStart, Event as Xml};
use quick_xml::Reader;

use super::{EventLog, EventLogBuilder, Timestamp};
use crate::error::{Error, Result};

const KEY_NAME: &str = "concept:name";
const KEY_RESOURCE: &str = "org:resource";
const KEY_TIMESTAMP: &str = "time:timestamp";

/// Attribute name under which `org:resource` is stored.
pub const RESOURCE: &str = "resource";

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Scope {
    Log,
    Trace,
    Event,
    Other,
}

#[derive(Default)]
struct PendingEvent {
    activity: Option<String>,
    resource: Option<String>,
    timestamp: Option<Timestamp>,
}

#[derive(Default)]
struct PendingTrace {
    id: Option<String>,
    events: Vec<PendingEvent>,
}

fn parse_xes_timestamp(value: &str) -> Option<Timestamp> {
    if let Ok(t) = DateTime::parse_from_rfc3339(value) {
        return Some(t.naive_utc());
    }
    // offsets without a colon, e.g. +0200
    if let Ok(t) = DateTime::parse_from_str(value, "%Y-%m-%dT%H:%M:%S%.f%z") {
        return Some(t.naive_utc());
    }
    NaiveDateTime::parse_from_str(value, "%Y-%m-%dT%H:%M:%S%.f").ok()
}

fn key_value<R>(
    reader: &Reader<R>,
    e: &BytesStart<'_>,
) -> Result<(Option<String>, Option<String>)> {
    let mut key = None;
    let mut value = None;
    for attr in e.attributes() {
        let attr = attr.map_err(|err| xml_error(reader, err))?;
        let v = attr
            .unescape_value()
            .map_err(|err| xml_error(reader, err))?;
        match attr.key.as_ref() {
            b"key" => key = Some(v.into_owned()),
            b"value" => value = Some(v.into_owned()),
            _ => {}
        }
    }
    Ok((key, value))
}

fn xml_error<R>(reader: &Reader<R>, err: impl std::fmt::Display) -> Error {
    Error::parse(
        None,
        format!(
            "malformed XES near byte {}: {err}",
            reader.buffer_position()
        ),
    )
}

/// Parse the minimal XES subset: `log`/`trace`/`event` elements with the
/// `concept:name`, `org:resource` and `time:timestamp` keys.
///
/// Only attributes that are direct children of a trace or event count, so
/// `global` defaults and nested list values are ignored. Other keys and
/// extensions are skipped silently. Resources land in the `resource`
/// attribute; an event without one stores `""`.
pub fn parse_xes<R: Read>(source: R) -> Result<EventLog> {
    let mut reader = Reader::from_reader(BufReader::new(source));
    reader.config_mut().trim_text(true);
    let mut buf = Vec::new();
    let mut stack: Vec<Scope> = Vec::new();
    let mut trace: Option<PendingTrace> = None;
    let mut event: Option<PendingEvent> = None;
    let mut builder = EventLogBuilder::new([RESOURCE]);
    let mut saw_log = false;

    loop {
        let ev = reader
            .read_event_into(&mut buf)
            .map_err(|e| xml_error(&reader, e))?;
        match ev {
            Xml::Start(ref e) | Xml::Empty(ref e) => {
                let empty = matches!(ev, Xml::Empty(_));
                let parent = stack.last().copied();
                let scope = match (e.name().as_ref(), parent) {
                    (b"log", None) => {
                        saw_log = true;
                        Scope::Log
                    }
                    (b"trace", Some(Scope::Log)) => {
                        trace = Some(PendingTrace::default());
                        Scope::Trace
                    }
                    (b"event", Some(Scope::Trace)) => {
                        event = Some(PendingEvent::default());
                        Scope::Event
                    }
                    (_, Some(Scope::Trace)) => {
                        let (key, value) = key_value(&reader, e)?;
                        if key.as_deref() == Some(KEY_NAME) {
                            if let Some(t) = trace.as_mut() {
                                t.id = value;
                            }
                        }
                        Scope::Other
                    }
                    (_, Some(Scope::Event)) => {
                        let (key, value) = key_value(&reader, e)?;
                        if let (Some(ev), Some(key), Some(value)) = (event.as_mut(), key, value) {
                            match key.as_str() {
                                KEY_NAME => ev.activity = Some(value),
                                KEY_RESOURCE => ev.resource = Some(value),
                                KEY_TIMESTAMP => {
                                    ev.timestamp =
                                        Some(parse_xes_timestamp(&value).ok_or_else(|| {
                                            Error::parse(
                                                None,
                                                format!("cannot parse XES timestamp {value:?}"),
                                            )
                                        })?)
                                }
                                _ => {}
                            }
                        }
                        Scope::Other
                    }
                    _ => Scope::Other,
                };
                if empty {
                    close(scope, &mut trace, &mut event, &mut builder)?;
                } else {
                    stack.push(scope);
                }
            }
            Xml::End(_) => {
                let scope = stack
                    .pop()
                    .ok_or_else(|| xml_error(&reader, "unbalanced end tag"))?;
                close(scope, &mut trace, &mut event, &mut builder)?;
            }
            Xml::Eof => break,
            _ => {}
        }
        buf.clear();
    }
    if !stack.is_empty() {
        return Err(Error::parse(
            None,
            "malformed XES: unexpected end of document",
        ));
    }
    if !saw_log {
        return Err(Error::parse(None, "malformed XES: no <log> element"));
    }
    Ok(builder.build())
}

fn close(
    scope: Scope,
    trace: &mut Option<PendingTrace>,
    event: &mut Option<PendingEvent>,
    builder: &mut EventLogBuilder,
) -> Result<()> {
    match scope {
        Scope::Event => {
            if let (Some(ev), Some(t)) = (event.take(), trace.as_mut()) {
                t.events.push(ev);
            }
        }
        Scope::Trace => {
            let t = trace.take().unwrap_or_default();
            let id = t.id.ok_or_else(|| {
                Error::parse(None, "trace without a concept:name case identifier")
            })?;
            if builder.contains_trace(&id) {
                return Err(Error::parse(
                    None,
                    format!("duplicate trace identifier {id:?}"),
                ));
            }
            builder.trace(&id);
            for ev in t.events {
                let mut attributes = IndexMap::with_capacity(1);
                attributes.insert(RESOURCE.to_string(), ev.resource.unwrap_or_default());
                builder.push(&id, ev.activity, ev.timestamp, attributes);
            }
        }
        Scope::Log | Scope::Other => {}
    }
    Ok(())
}

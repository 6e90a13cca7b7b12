use std::io::{Read, Write};

use chrono::NaiveDateTime;
use indexmap::IndexMap;

use super::{EventLog, EventLogBuilder};
use crate::error::{Error, Result};

/// Day-first format used by the airport example logs, e.g. `1/9/2020 12:00:00`.
pub const DEFAULT_TIMESTAMP_FORMAT: &str = "%d/%m/%Y %H:%M:%S";

/// Cell value that, like an empty cell, marks a missing activity.
const MISSING_SENTINEL: &str = "-";

/// Which CSV columns feed which parts of an event.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ColumnMapping {
    pub case: String,
    pub activity: String,
    /// `None` keeps events in input order.
    pub timestamp: Option<String>,
    /// `(column, attribute name)` pairs, in attribute order.
    pub attributes: Vec<(String, String)>,
}

impl Default for ColumnMapping {
    fn default() -> Self {
        ColumnMapping {
            case: "case".into(),
            activity: "activity".into(),
            timestamp: Some("timestamp".into()),
            attributes: vec![("resource".into(), "resource".into())],
        }
    }
}

impl ColumnMapping {
    /// Default case/activity/timestamp columns with one identically named
    /// column per attribute.
    pub fn with_attributes<S: AsRef<str>>(names: &[S]) -> Self {
        ColumnMapping {
            attributes: names
                .iter()
                .map(|n| (n.as_ref().to_string(), n.as_ref().to_string()))
                .collect(),
            ..ColumnMapping::default()
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CsvFormat {
    pub mapping: ColumnMapping,
    /// chrono `strftime` syntax.
    pub timestamp_format: String,
}

impl Default for CsvFormat {
    fn default() -> Self {
        CsvFormat {
            mapping: ColumnMapping::default(),
            timestamp_format: DEFAULT_TIMESTAMP_FORMAT.into(),
        }
    }
}

impl CsvFormat {
    /// The format [`serialize_csv`] writes for `log`, so that re-parsing
    /// with it yields the same log.
    pub fn for_log(log: &EventLog, timestamp_format: &str) -> Self {
        CsvFormat {
            mapping: ColumnMapping::with_attributes(log.attribute_names()),
            timestamp_format: timestamp_format.to_string(),
        }
    }
}

fn column(headers: &::csv::StringRecord, name: &str) -> Result<usize> {
    headers
        .iter()
        .position(|h| h == name)
        .ok_or_else(|| Error::Config(format!("column {name:?} not found in header")))
}

/// Parse a CSV event log.
///
/// Rows are grouped into traces by the case column and each trace is stably
/// sorted by timestamp. An empty activity cell, or `-`, is a missing label.
pub fn parse_csv<R: Read>(source: R, format: &CsvFormat) -> Result<EventLog> {
    let mut reader = ::csv::ReaderBuilder::new()
        .has_headers(true)
        .flexible(false)
        .from_reader(source);
    let headers = reader.headers()?.clone();
    let m = &format.mapping;
    let case_col = column(&headers, &m.case)?;
    let act_col = column(&headers, &m.activity)?;
    let ts_col = m
        .timestamp
        .as_deref()
        .map(|c| column(&headers, c))
        .transpose()?;
    let attr_cols = m
        .attributes
        .iter()
        .map(|(c, name)| Ok((column(&headers, c)?, name.clone())))
        .collect::<Result<Vec<_>>>()?;

    let mut builder = EventLogBuilder::new(m.attributes.iter().map(|(_, n)| n.clone()));
    let mut record = ::csv::StringRecord::new();
    loop {
        match reader.read_record(&mut record) {
            Ok(false) => break,
            Ok(true) => {}
            Err(e) => return Err(e.into()),
        }
        let line = record.position().map(|p| p.line());
        let case = &record[case_col];
        let activity = match &record[act_col] {
            "" | MISSING_SENTINEL => None,
            a => Some(a.to_string()),
        };
        let timestamp = match ts_col.map(|c| &record[c]) {
            None | Some("") => None,
            Some(cell) => Some(
                NaiveDateTime::parse_from_str(cell.trim(), &format.timestamp_format).map_err(
                    |e| {
                        Error::parse(
                            line,
                            format!(
                                "cannot parse timestamp {cell:?} with format {:?}: {e}",
                                format.timestamp_format
                            ),
                        )
                    },
                )?,
            ),
        };
        let attributes: IndexMap<String, String> = attr_cols
            .iter()
            .map(|(c, name)| (name.clone(), record[*c].to_string()))
            .collect();
        builder.push(case, activity, timestamp, attributes);
    }
    Ok(builder.build())
}

/// Write a log as CSV: `case, activity, [timestamp,] attributes...`.
///
/// Missing activities become empty cells. The header uses the format's
/// case/activity/timestamp names and the log's attribute names verbatim; the
/// timestamp column is omitted when the format maps none.
pub fn serialize_csv<W: Write>(log: &EventLog, sink: W, format: &CsvFormat) -> Result<()> {
    let mut writer = ::csv::WriterBuilder::new().from_writer(sink);
    let m = &format.mapping;
    let mut header = vec![m.case.as_str(), m.activity.as_str()];
    if let Some(ts) = &m.timestamp {
        header.push(ts);
    }
    header.extend(log.attribute_names().iter().map(String::as_str));
    writer.write_record(&header)?;

    let mut row: Vec<String> = Vec::with_capacity(header.len());
    for event in log.events() {
        row.clear();
        row.push(event.trace_id().to_string());
        row.push(event.activity().unwrap_or("").to_string());
        if m.timestamp.is_some() {
            row.push(
                event
                    .timestamp()
                    .map(|t| t.format(&format.timestamp_format).to_string())
                    .unwrap_or_default(),
            );
        }
        for name in log.attribute_names() {
            row.push(event.attribute(name).unwrap_or("").to_string());
        }
        writer.write_record(&row)?;
    }
    writer.flush()?;
    Ok(())
}

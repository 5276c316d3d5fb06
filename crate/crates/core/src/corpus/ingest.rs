use std::collections::{BTreeMap, HashMap};
use std::fs;
use std::io::{Read, Write};
use std::path::Path;

use chrono::NaiveDate;
use serde::{Deserialize, Serialize};

use super::{CorpusError, WorkOrder, ZeusCode};

pub const DATE_FORMAT: &str = "%Y-%m-%d";

/// Maps the canonical work-order fields onto the column names of an input file.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ColumnMapping {
    pub work_order_id: String,
    pub turbine_id: String,
    pub start_date: String,
    pub description: String,
    /// Optional label column; a missing column yields unlabeled orders.
    pub zeus_code: Option<String>,
}

impl Default for ColumnMapping {
    fn default() -> Self {
        Self {
            work_order_id: "work_order_id".into(),
            turbine_id: "turbine_id".into(),
            start_date: "start_date".into(),
            description: "description".into(),
            zeus_code: Some("zeus_code".into()),
        }
    }
}

impl ColumnMapping {
    /// Reads a `key = "value"` mapping file. Keys not present keep their canonical default.
    pub fn from_file(path: impl AsRef<Path>) -> Result<Self, CorpusError> {
        let path = path.as_ref();
        let text = fs::read_to_string(path).map_err(|e| CorpusError::io(path, e))?;
        toml::from_str(&text).map_err(|e| CorpusError::Config {
            path: path.display().to_string(),
            message: e.to_string(),
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RejectReason {
    InvalidDate,
    InvalidZeusCode,
    MalformedRow,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct RejectedRow {
    /// 1-based line number in the source file (header is line 1).
    pub line: u64,
    pub work_order_id: Option<String>,
    pub reason: RejectReason,
    pub detail: String,
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct IngestReport {
    pub accepted: usize,
    pub rejected: Vec<RejectedRow>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Ingested {
    pub orders: Vec<WorkOrder>,
    pub report: IngestReport,
}

pub fn parse_date(s: &str) -> Option<NaiveDate> {
    NaiveDate::parse_from_str(s.trim(), DATE_FORMAT).ok()
}

/// Reads work orders from a CSV file.
///
/// Rows with invalid dates or labels are listed in the report instead of being
/// dropped silently. Duplicate ids abort the whole ingest.
pub fn ingest_csv(path: impl AsRef<Path>, mapping: &ColumnMapping) -> Result<Ingested, CorpusError> {
    let path = path.as_ref();
    let file = fs::File::open(path).map_err(|e| CorpusError::io(path, e))?;
    ingest_reader(file, mapping)
}

pub fn ingest_reader<R: Read>(reader: R, mapping: &ColumnMapping) -> Result<Ingested, CorpusError> {
    let mut rdr = csv::ReaderBuilder::new().flexible(true).from_reader(reader);
    let headers = rdr.headers()?.clone();
    let column = |name: &str| headers.iter().position(|h| h.trim() == name);

    let mut missing = Vec::new();
    let mut required = |name: &String| {
        let idx = column(name);
        if idx.is_none() {
            missing.push(name.clone());
        }
        idx.unwrap_or(0)
    };
    let id_col = required(&mapping.work_order_id);
    let turbine_col = required(&mapping.turbine_id);
    let date_col = required(&mapping.start_date);
    let desc_col = required(&mapping.description);
    if !missing.is_empty() {
        return Err(CorpusError::MissingColumns(missing));
    }
    let zeus_col = mapping.zeus_code.as_deref().and_then(column);

    let mut orders = Vec::new();
    let mut report = IngestReport::default();
    for record in rdr.records() {
        let record = record?;
        let line = record.position().map(|p| p.line()).unwrap_or(0);
        let field = |idx: usize| record.get(idx);
        let (Some(id), Some(turbine), Some(date), Some(desc)) =
            (field(id_col), field(turbine_col), field(date_col), field(desc_col))
        else {
            report.rejected.push(RejectedRow {
                line,
                work_order_id: field(id_col).map(str::to_string),
                reason: RejectReason::MalformedRow,
                detail: format!("expected at least {} fields, found {}", headers.len(), record.len()),
            });
            continue;
        };
        let id = id.trim().to_string();
        let Some(start_date) = parse_date(date) else {
            report.rejected.push(RejectedRow {
                line,
                work_order_id: Some(id),
                reason: RejectReason::InvalidDate,
                detail: format!("`{}` is not a YYYY-MM-DD date", date.trim()),
            });
            continue;
        };
        let zeus_code = match zeus_col.and_then(|i| record.get(i)).map(str::trim) {
            None | Some("") => None,
            Some(raw) => match raw.parse::<ZeusCode>() {
                Ok(code) => Some(code),
                Err(e) => {
                    report.rejected.push(RejectedRow {
                        line,
                        work_order_id: Some(id),
                        reason: RejectReason::InvalidZeusCode,
                        detail: e.to_string(),
                    });
                    continue;
                }
            },
        };
        orders.push(WorkOrder {
            id,
            turbine_id: turbine.trim().to_string(),
            start_date,
            description: desc.to_string(),
            zeus_code,
        });
    }

    let mut seen: HashMap<&str, usize> = HashMap::new();
    for order in &orders {
        *seen.entry(order.id.as_str()).or_default() += 1;
    }
    let mut duplicates: Vec<String> = seen
        .into_iter()
        .filter(|(_, n)| *n > 1)
        .map(|(id, _)| id.to_string())
        .collect();
    if !duplicates.is_empty() {
        duplicates.sort();
        return Err(CorpusError::DuplicateIds(duplicates));
    }

    report.accepted = orders.len();
    Ok(Ingested { orders, report })
}

/// Writes orders in the canonical column layout.
pub fn write_orders_csv<W: Write>(writer: W, orders: &[WorkOrder]) -> Result<(), CorpusError> {
    let mut wtr = csv::Writer::from_writer(writer);
    wtr.write_record(["work_order_id", "turbine_id", "start_date", "description", "zeus_code"])?;
    for o in orders {
        let date = o.start_date.format(DATE_FORMAT).to_string();
        let code = o.zeus_code.map(|c| c.as_str()).unwrap_or("");
        wtr.write_record([o.id.as_str(), &o.turbine_id, &date, &o.description, code])?;
    }
    wtr.flush().map_err(|e| CorpusError::Io {
        path: "<writer>".into(),
        source: e,
    })?;
    Ok(())
}

/// Observation metadata for one turbine.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct FleetMeta {
    pub turbine_id: String,
    pub commissioning_date: NaiveDate,
    pub observation_start: NaiveDate,
    pub observation_end: NaiveDate,
}

impl FleetMeta {
    pub fn new(
        turbine_id: impl Into<String>,
        commissioning_date: NaiveDate,
        observation_start: NaiveDate,
        observation_end: NaiveDate,
    ) -> Result<Self, CorpusError> {
        let meta = Self {
            turbine_id: turbine_id.into(),
            commissioning_date,
            observation_start,
            observation_end,
        };
        meta.validate()?;
        Ok(meta)
    }

    pub fn validate(&self) -> Result<(), CorpusError> {
        if self.commissioning_date <= self.observation_start && self.observation_start < self.observation_end {
            Ok(())
        } else {
            Err(CorpusError::InvalidFleetWindow(self.turbine_id.clone()))
        }
    }

    /// First day of operation inside the observation window.
    pub fn operation_start(&self) -> NaiveDate {
        self.commissioning_date.max(self.observation_start)
    }

    pub fn contains(&self, date: NaiveDate) -> bool {
        self.observation_start <= date && date <= self.observation_end
    }
}

/// Fleet metadata keyed by turbine id.
pub type Fleet = BTreeMap<String, FleetMeta>;

pub fn read_fleet_csv(path: impl AsRef<Path>) -> Result<Fleet, CorpusError> {
    let path = path.as_ref();
    let file = fs::File::open(path).map_err(|e| CorpusError::io(path, e))?;
    read_fleet(file)
}

pub fn read_fleet<R: Read>(reader: R) -> Result<Fleet, CorpusError> {
    #[derive(Deserialize)]
    struct Row {
        turbine_id: String,
        commissioning_date: String,
        observation_start: String,
        observation_end: String,
    }
    let mut rdr = csv::Reader::from_reader(reader);
    let mut fleet = Fleet::new();
    for row in rdr.deserialize::<Row>() {
        let row = row?;
        let date = |s: &str| {
            parse_date(s).ok_or_else(|| CorpusError::InvalidFleetDate {
                turbine_id: row.turbine_id.clone(),
                value: s.to_string(),
            })
        };
        let meta = FleetMeta::new(
            row.turbine_id.trim(),
            date(&row.commissioning_date)?,
            date(&row.observation_start)?,
            date(&row.observation_end)?,
        )?;
        if fleet.insert(meta.turbine_id.clone(), meta).is_some() {
            return Err(CorpusError::DuplicateIds(vec![row.turbine_id]));
        }
    }
    Ok(fleet)
}

pub fn write_fleet_csv<W: Write>(writer: W, fleet: &Fleet) -> Result<(), CorpusError> {
    let mut wtr = csv::Writer::from_writer(writer);
    wtr.write_record(["turbine_id", "commissioning_date", "observation_start", "observation_end"])?;
    for m in fleet.values() {
        wtr.write_record([
            m.turbine_id.clone(),
            m.commissioning_date.format(DATE_FORMAT).to_string(),
            m.observation_start.format(DATE_FORMAT).to_string(),
            m.observation_end.format(DATE_FORMAT).to_string(),
        ])?;
    }
    wtr.flush().map_err(|e| CorpusError::Io {
        path: "<writer>".into(),
        source: e,
    })?;
    Ok(())
}

//! Work-order ingestion and text preprocessing.

mod ingest;
mod preprocess;
mod zeus;

use std::path::Path;

use chrono::NaiveDate;
use serde::{Deserialize, Serialize};

pub use ingest::{
    ingest_csv, ingest_reader, parse_date, read_fleet, read_fleet_csv, write_fleet_csv, write_orders_csv,
    ColumnMapping, Fleet, FleetMeta, IngestReport, Ingested, RejectReason, RejectedRow, DATE_FORMAT,
};
pub use preprocess::{preprocess, tokenize, DropReason, DropReport, DroppedRow, Preprocessed, WordList};
pub use zeus::{UnknownZeusCode, ZeusCode};

/// One maintenance record.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct WorkOrder {
    pub id: String,
    pub turbine_id: String,
    pub start_date: NaiveDate,
    pub description: String,
    pub zeus_code: Option<ZeusCode>,
}

/// Preprocessed tokens of one work order's description. Never empty.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct TokenDoc {
    pub work_order_id: String,
    pub tokens: Vec<String>,
}

impl TokenDoc {
    /// Tokens joined with single spaces.
    pub fn text(&self) -> String {
        self.tokens.join(" ")
    }
}

#[derive(Debug, thiserror::Error)]
pub enum CorpusError {
    #[error("{path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
    #[error("csv: {0}")]
    Csv(#[from] csv::Error),
    #[error("{path}: invalid column mapping: {message}")]
    Config { path: String, message: String },
    #[error("missing mandatory column(s): {}", .0.join(", "))]
    MissingColumns(Vec<String>),
    #[error("duplicate id(s): {}", .0.join(", "))]
    DuplicateIds(Vec<String>),
    #[error("turbine {0}: expected commissioning_date <= observation_start < observation_end")]
    InvalidFleetWindow(String),
    #[error("turbine {turbine_id}: `{value}` is not a YYYY-MM-DD date")]
    InvalidFleetDate { turbine_id: String, value: String },
}

impl CorpusError {
    pub(crate) fn io(path: &Path, source: std::io::Error) -> Self {
        CorpusError::Io {
            path: path.display().to_string(),
            source,
        }
    }
}

//! MTBF and failure-rate KPIs per turbine and for the fleet.
//!
//! For a turbine with failures on dates `d_1 <= ... <= d_C`:
//!
//! ```text
//! Δt_1 = d_1 - operation_start,  Δt_i = d_i - d_(i-1)
//! MTBF = (Δt_1 + ... + Δt_C) / C        [days]
//! λ    = days_per_year / MTBF           [1/a]
//! ```
//!
//! Time after the last failure is not counted. The fleet rate is the plain
//! mean of the per-turbine rates of turbines with at least one failure.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt::Write as _;

use chrono::NaiveDate;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::corpus::{Fleet, FleetMeta, WorkOrder, ZeusCode};
use crate::rules::{NegationConfig, RuleId, RuleSelection};

pub const DAYS_PER_YEAR: f64 = 365.25;

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum KpiError {
    #[error("turbine(s) missing from fleet metadata: {}", .0.join(", "))]
    UnknownTurbines(Vec<String>),
    #[error("no turbine has a defined failure rate")]
    NoDefinedRate,
    #[error("effort must be a finite, non-negative number of hours, got {0}")]
    InvalidEffort(f64),
    #[error("days_per_year must be positive, got {0}")]
    InvalidDaysPerYear(f64),
    #[error("at least two reports are needed for a comparison")]
    TooFewReports,
    #[error("report `{method}` uses different observation windows than `{reference}`")]
    MismatchedWindows { method: String, reference: String },
    #[error("reference method `{0}` is not among the reports")]
    UnknownReference(String),
    #[error("duplicate method name `{0}`")]
    DuplicateMethod(String),
}

/// Which labeling route selected the failure events.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Origin {
    ExpertLabels,
    Classifier { model_id: String },
    Rule { rule: RuleId },
}

impl Origin {
    pub fn label(&self) -> String {
        match self {
            Origin::ExpertLabels => "expert".into(),
            Origin::Classifier { model_id } => format!("classifier:{model_id}"),
            Origin::Rule { rule } => format!("rule:{rule}"),
        }
    }
}

/// Selection of corrective-maintenance orders.
#[derive(Debug, Clone)]
pub enum EventSource<'a> {
    /// Orders whose own label truncates to 02-08-01.
    Expert,
    /// Orders whose predicted level-3 code is 02-08-01. Orders without a prediction are skipped.
    Classifier {
        model_id: String,
        predictions: &'a BTreeMap<String, ZeusCode>,
    },
    /// Orders selected by a rule.
    Rule {
        selection: &'a RuleSelection,
        failure_alias: String,
        negation: NegationConfig,
    },
}

impl EventSource<'_> {
    pub fn origin(&self) -> Origin {
        match self {
            EventSource::Expert => Origin::ExpertLabels,
            EventSource::Classifier { model_id, .. } => Origin::Classifier {
                model_id: model_id.clone(),
            },
            EventSource::Rule { selection, .. } => Origin::Rule { rule: selection.rule },
        }
    }

    fn selects(&self, order: &WorkOrder) -> bool {
        match self {
            EventSource::Expert => order.zeus_code.map(ZeusCode::level3) == Some(ZeusCode::Corrective),
            EventSource::Classifier { predictions, .. } => {
                predictions.get(&order.id).map(|c| c.level3()) == Some(ZeusCode::Corrective)
            }
            EventSource::Rule { selection, .. } => selection.selected_ids.contains(&order.id),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct KpiConfig {
    pub days_per_year: f64,
    /// Count several failures of one turbine on the same day once.
    pub collapse_same_day: bool,
}

impl Default for KpiConfig {
    fn default() -> Self {
        Self {
            days_per_year: DAYS_PER_YEAR,
            collapse_same_day: false,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FailureEventSeries {
    pub turbine_id: String,
    /// Ascending.
    pub event_dates: Vec<NaiveDate>,
    pub work_order_ids: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EventExtraction {
    /// One series per fleet turbine, in turbine order.
    pub series: Vec<FailureEventSeries>,
    /// Selected orders dated outside their turbine's observation window.
    pub outside_window: Vec<String>,
}

/// Groups the selected orders into per-turbine event series.
pub fn extract_failure_events(
    orders: &[WorkOrder],
    fleet: &Fleet,
    source: &EventSource<'_>,
) -> Result<EventExtraction, KpiError> {
    let unknown: BTreeSet<String> = orders
        .iter()
        .filter(|o| !fleet.contains_key(&o.turbine_id))
        .map(|o| o.turbine_id.clone())
        .collect();
    if !unknown.is_empty() {
        return Err(KpiError::UnknownTurbines(unknown.into_iter().collect()));
    }
    let mut events: BTreeMap<&str, Vec<(NaiveDate, &str)>> = fleet.keys().map(|t| (t.as_str(), Vec::new())).collect();
    let mut outside_window = Vec::new();
    for order in orders.iter().filter(|o| source.selects(o)) {
        if fleet[&order.turbine_id].contains(order.start_date) {
            events
                .get_mut(order.turbine_id.as_str())
                .expect("fleet checked above")
                .push((order.start_date, &order.id));
        } else {
            outside_window.push(order.id.clone());
        }
    }
    let series = events
        .into_iter()
        .map(|(turbine, mut ev)| {
            ev.sort();
            FailureEventSeries {
                turbine_id: turbine.to_string(),
                event_dates: ev.iter().map(|e| e.0).collect(),
                work_order_ids: ev.iter().map(|e| e.1.to_string()).collect(),
            }
        })
        .collect();
    Ok(EventExtraction { series, outside_window })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Exclusion {
    NoFailures,
    /// All failures fell on the first day of operation.
    ZeroMtbf,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct KpiItemStats {
    pub turbine_id: String,
    pub operation_start: NaiveDate,
    pub failure_count: usize,
    /// Days between consecutive failures, the first measured from operation start.
    pub deltas: Vec<f64>,
    pub mtbf_days: Option<f64>,
    pub failure_rate_per_year: Option<f64>,
    pub exclusion: Option<Exclusion>,
}

/// Mean time between failures of one turbine. The rate is left unset.
pub fn mtbf(series: &FailureEventSeries, meta: &FleetMeta, config: &KpiConfig) -> KpiItemStats {
    let mut dates = series.event_dates.clone();
    dates.sort();
    if config.collapse_same_day {
        dates.dedup();
    }
    let start = meta.operation_start();
    let mut previous = start;
    let deltas: Vec<f64> = dates
        .iter()
        .map(|&d| {
            let delta = (d - previous).num_days() as f64;
            previous = d;
            delta
        })
        .collect();
    let (mtbf_days, exclusion) = if deltas.is_empty() {
        (None, Some(Exclusion::NoFailures))
    } else {
        let mean = deltas.iter().sum::<f64>() / deltas.len() as f64;
        if mean > 0.0 {
            (Some(mean), None)
        } else {
            (None, Some(Exclusion::ZeroMtbf))
        }
    };
    KpiItemStats {
        turbine_id: series.turbine_id.clone(),
        operation_start: start,
        failure_count: deltas.len(),
        deltas,
        mtbf_days,
        failure_rate_per_year: None,
        exclusion,
    }
}

/// Sets `λ = days_per_year / MTBF`; stays undefined when MTBF is.
pub fn failure_rate(mut stats: KpiItemStats, days_per_year: f64) -> KpiItemStats {
    stats.failure_rate_per_year = stats.mtbf_days.map(|m| days_per_year / m);
    stats
}

/// Settings a report was produced with.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConfigSnapshot {
    pub days_per_year: f64,
    pub collapse_same_day: bool,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub failure_alias: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub negation: Option<NegationConfig>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct KpiReport {
    pub origin: Origin,
    pub per_turbine: Vec<KpiItemStats>,
    pub fleet_failure_rate: f64,
    /// Turbines without a defined rate.
    pub excluded_turbines: Vec<String>,
    pub n_events: usize,
    pub outside_window: Vec<String>,
    pub effort_hours: f64,
    pub windows: Vec<FleetMeta>,
    pub config: ConfigSnapshot,
}

/// Fleet aggregate: unweighted mean over turbines with a defined rate.
pub fn fleet_kpi(
    stats: Vec<KpiItemStats>,
    effort_hours: f64,
    origin: Origin,
    config: ConfigSnapshot,
    windows: Vec<FleetMeta>,
) -> Result<KpiReport, KpiError> {
    if !(effort_hours.is_finite() && effort_hours >= 0.0) {
        return Err(KpiError::InvalidEffort(effort_hours));
    }
    let rates: Vec<f64> = stats.iter().filter_map(|s| s.failure_rate_per_year).collect();
    if rates.is_empty() {
        return Err(KpiError::NoDefinedRate);
    }
    Ok(KpiReport {
        origin,
        fleet_failure_rate: rates.iter().sum::<f64>() / rates.len() as f64,
        excluded_turbines: stats
            .iter()
            .filter(|s| s.failure_rate_per_year.is_none())
            .map(|s| s.turbine_id.clone())
            .collect(),
        n_events: stats.iter().map(|s| s.failure_count).sum(),
        per_turbine: stats,
        outside_window: Vec::new(),
        effort_hours,
        windows,
        config,
    })
}

/// Extraction, per-turbine MTBF and rate, and fleet aggregation in one call.
pub fn kpi_report(
    orders: &[WorkOrder],
    fleet: &Fleet,
    source: &EventSource<'_>,
    config: &KpiConfig,
    effort_hours: f64,
) -> Result<KpiReport, KpiError> {
    if !(config.days_per_year.is_finite() && config.days_per_year > 0.0) {
        return Err(KpiError::InvalidDaysPerYear(config.days_per_year));
    }
    let extraction = extract_failure_events(orders, fleet, source)?;
    let stats: Vec<KpiItemStats> = extraction
        .series
        .par_iter()
        .map(|s| failure_rate(mtbf(s, &fleet[&s.turbine_id], config), config.days_per_year))
        .collect();
    let (failure_alias, negation) = match source {
        EventSource::Rule {
            failure_alias,
            negation,
            selection,
        } => (
            selection.rule.uses_failure_alias().then(|| failure_alias.clone()),
            Some(negation.clone()),
        ),
        _ => (None, None),
    };
    let snapshot = ConfigSnapshot {
        days_per_year: config.days_per_year,
        collapse_same_day: config.collapse_same_day,
        failure_alias,
        negation,
    };
    let mut report = fleet_kpi(stats, effort_hours, source.origin(), snapshot, fleet.values().cloned().collect())?;
    report.outside_window = extraction.outside_window;
    Ok(report)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ComparisonRow {
    pub method: String,
    pub failure_rate_per_year: f64,
    pub effort_hours: f64,
    /// `rate - reference rate`.
    pub deviation: f64,
    /// `deviation / reference rate`.
    pub relative_deviation: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ComparisonTable {
    pub reference: String,
    pub rows: Vec<ComparisonRow>,
}

impl ComparisonTable {
    /// Builds the table from `(method, rate, effort)` entries.
    pub fn build(entries: &[(String, f64, f64)], reference: &str) -> Result<Self, KpiError> {
        let mut seen = BTreeSet::new();
        if let Some((m, _, _)) = entries.iter().find(|(m, _, _)| !seen.insert(m)) {
            return Err(KpiError::DuplicateMethod(m.clone()));
        }
        let reference_rate = entries
            .iter()
            .find(|(m, _, _)| m == reference)
            .map(|e| e.1)
            .ok_or_else(|| KpiError::UnknownReference(reference.to_string()))?;
        let rows = entries
            .iter()
            .map(|(method, rate, effort)| ComparisonRow {
                method: method.clone(),
                failure_rate_per_year: *rate,
                effort_hours: *effort,
                deviation: rate - reference_rate,
                relative_deviation: (rate - reference_rate) / reference_rate,
            })
            .collect();
        Ok(Self {
            reference: reference.to_string(),
            rows,
        })
    }

    /// Columns per method; rows for rate, effort and relative deviation.
    pub fn render(&self) -> String {
        let width = self.rows.iter().map(|r| r.method.len()).max().unwrap_or(0).max(10);
        let mut out = format!("{:<20}", "");
        for r in &self.rows {
            let _ = write!(out, " {:>width$}", r.method);
        }
        out.push('\n');
        let mut line = |label: &str, f: &dyn Fn(&ComparisonRow) -> String| {
            let _ = write!(out, "{label:<20}");
            for r in &self.rows {
                let _ = write!(out, " {:>width$}", f(r));
            }
            out.push('\n');
        };
        line("Failure Rate [1/a]", &|r| format!("{:.2}", r.failure_rate_per_year));
        line("Tagging Time [h]", &|r| format!("{:.0}", r.effort_hours));
        line("Deviation [%]", &|r| format!("{:+.1}", 100.0 * r.relative_deviation));
        out
    }
}

/// Compares named reports. The reference defaults to the expert-label report
/// (or the first one when there is none).
pub fn compare(reports: &[(String, KpiReport)], reference: Option<&str>) -> Result<ComparisonTable, KpiError> {
    if reports.len() < 2 {
        return Err(KpiError::TooFewReports);
    }
    let reference = match reference {
        Some(r) => r.to_string(),
        None => reports
            .iter()
            .find(|(_, r)| r.origin == Origin::ExpertLabels)
            .unwrap_or(&reports[0])
            .0
            .clone(),
    };
    let base = &reports
        .iter()
        .find(|(m, _)| *m == reference)
        .ok_or_else(|| KpiError::UnknownReference(reference.clone()))?
        .1;
    for (method, report) in reports {
        if report.windows != base.windows {
            return Err(KpiError::MismatchedWindows {
                method: method.clone(),
                reference: reference.clone(),
            });
        }
    }
    let entries: Vec<(String, f64, f64)> = reports
        .iter()
        .map(|(m, r)| (m.clone(), r.fleet_failure_rate, r.effort_hours))
        .collect();
    ComparisonTable::build(&entries, &reference)
}

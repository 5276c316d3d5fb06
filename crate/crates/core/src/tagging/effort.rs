use chrono::{DateTime, Utc};
use serde::{Deserialize, Serialize};

use super::TagEntity;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EffortAction {
    Open,
    Close,
    Assign,
    /// Assignment that replaced an earlier entry for the same term.
    Reassign,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EffortEvent {
    pub at: DateTime<Utc>,
    pub action: EffortAction,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub term: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub alias: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub entity: Option<TagEntity>,
}

/// Audit trail of a tagging session and the effort derived from it.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct EffortLog {
    pub events: Vec<EffortEvent>,
    /// Overrides the derived figure when set.
    pub manual_hours: Option<f64>,
}

impl EffortLog {
    /// Appends an event. Timestamps earlier than the last event are raised to
    /// it so the log stays chronological.
    pub fn record(&mut self, mut event: EffortEvent) {
        if let Some(last) = self.events.last() {
            if event.at < last.at {
                event.at = last.at;
            }
        }
        self.events.push(event);
    }

    /// Manual override if present, else the summed open-to-close intervals.
    ///
    /// A session that is still open counts up to its latest event.
    pub fn total_hours(&self) -> f64 {
        if let Some(h) = self.manual_hours {
            return h;
        }
        let mut seconds = 0i64;
        let mut open: Option<DateTime<Utc>> = None;
        for e in &self.events {
            match e.action {
                EffortAction::Open => {
                    if let Some(start) = open {
                        seconds += (e.at - start).num_seconds();
                    }
                    open = Some(e.at);
                }
                EffortAction::Close => {
                    if let Some(start) = open.take() {
                        seconds += (e.at - start).num_seconds();
                    }
                }
                EffortAction::Assign | EffortAction::Reassign => {}
            }
        }
        if let (Some(start), Some(last)) = (open, self.events.last()) {
            seconds += (last.at - start).num_seconds();
        }
        seconds as f64 / 3600.0
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use chrono::TimeZone;

    fn ev(min: i64, action: EffortAction) -> EffortEvent {
        EffortEvent {
            at: Utc.with_ymd_and_hms(2024, 1, 1, 8, 0, 0).unwrap() + chrono::Duration::minutes(min),
            action,
            term: None,
            alias: None,
            entity: None,
        }
    }

    #[test]
    fn sums_closed_and_running_intervals() {
        let mut log = EffortLog::default();
        log.record(ev(0, EffortAction::Open));
        log.record(ev(30, EffortAction::Assign));
        log.record(ev(90, EffortAction::Close));
        assert_eq!(log.total_hours(), 1.5);
        log.record(ev(120, EffortAction::Open));
        log.record(ev(135, EffortAction::Assign));
        assert_eq!(log.total_hours(), 1.75);
        log.manual_hours = Some(231.0);
        assert_eq!(log.total_hours(), 231.0);
    }

    #[test]
    fn stays_chronological() {
        let mut log = EffortLog::default();
        log.record(ev(10, EffortAction::Open));
        log.record(ev(5, EffortAction::Assign));
        assert!(log.events.windows(2).all(|w| w[0].at <= w[1].at));
        assert!(log.total_hours() >= 0.0);
    }
}

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

/// Code from ZEUS block 02-08 ("maintenance type").
///
/// Variant order equals lexicographic order of the code strings, so `Ord`
/// can be used for deterministic tie-breaking.
///
/// Only the ten codes of the block are representable. Level-4 codes refine a
/// level-3 parent that shares their prefix.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(try_from = "String", into = "String")]
pub enum ZeusCode {
    /// 02-08-01, corrective maintenance.
    Corrective,
    /// 02-08-01-01, deferred corrective maintenance.
    CorrectiveDeferred,
    /// 02-08-01-02, immediate corrective maintenance.
    CorrectiveImmediate,
    /// 02-08-02, preventive maintenance.
    Preventive,
    /// 02-08-02-01, predetermined maintenance.
    PreventivePredetermined,
    /// 02-08-02-02, condition based maintenance.
    PreventiveConditionBased,
    /// 02-08-02-03, predictive maintenance.
    PreventivePredictive,
    /// 02-08-96, unresolved maintenance type.
    Unresolved,
    /// 02-08-97, undefined maintenance type.
    Undefined,
    /// 02-08-XX, insignificant attribute.
    Insignificant,
}

impl ZeusCode {
    pub const ALL: [ZeusCode; 10] = [
        ZeusCode::Corrective,
        ZeusCode::CorrectiveDeferred,
        ZeusCode::CorrectiveImmediate,
        ZeusCode::Preventive,
        ZeusCode::PreventivePredetermined,
        ZeusCode::PreventiveConditionBased,
        ZeusCode::PreventivePredictive,
        ZeusCode::Unresolved,
        ZeusCode::Undefined,
        ZeusCode::Insignificant,
    ];

    /// The five level-3 classes, in lexicographic code order.
    pub const LEVEL3: [ZeusCode; 5] = [
        ZeusCode::Corrective,
        ZeusCode::Preventive,
        ZeusCode::Unresolved,
        ZeusCode::Undefined,
        ZeusCode::Insignificant,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            ZeusCode::Corrective => "02-08-01",
            ZeusCode::CorrectiveDeferred => "02-08-01-01",
            ZeusCode::CorrectiveImmediate => "02-08-01-02",
            ZeusCode::Preventive => "02-08-02",
            ZeusCode::PreventivePredetermined => "02-08-02-01",
            ZeusCode::PreventiveConditionBased => "02-08-02-02",
            ZeusCode::PreventivePredictive => "02-08-02-03",
            ZeusCode::Undefined => "02-08-97",
            ZeusCode::Unresolved => "02-08-96",
            ZeusCode::Insignificant => "02-08-XX",
        }
    }

    pub fn level(self) -> u8 {
        match self {
            ZeusCode::CorrectiveDeferred
            | ZeusCode::CorrectiveImmediate
            | ZeusCode::PreventivePredetermined
            | ZeusCode::PreventiveConditionBased
            | ZeusCode::PreventivePredictive => 4,
            _ => 3,
        }
    }

    /// Truncates a level-4 code to its level-3 parent; level-3 codes map to themselves.
    pub fn level3(self) -> ZeusCode {
        match self {
            ZeusCode::CorrectiveDeferred | ZeusCode::CorrectiveImmediate => ZeusCode::Corrective,
            ZeusCode::PreventivePredetermined
            | ZeusCode::PreventiveConditionBased
            | ZeusCode::PreventivePredictive => ZeusCode::Preventive,
            other => other,
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            ZeusCode::Corrective => "corrective maintenance",
            ZeusCode::CorrectiveDeferred => "deferred corrective maintenance",
            ZeusCode::CorrectiveImmediate => "immediate corrective maintenance",
            ZeusCode::Preventive => "preventive maintenance",
            ZeusCode::PreventivePredetermined => "predetermined maintenance",
            ZeusCode::PreventiveConditionBased => "condition based maintenance",
            ZeusCode::PreventivePredictive => "predictive maintenance",
            ZeusCode::Undefined => "undefined maintenance type",
            ZeusCode::Unresolved => "unresolved maintenance type",
            ZeusCode::Insignificant => "insignificant attribute",
        }
    }
}

impl fmt::Display for ZeusCode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
#[error("unknown ZEUS code `{0}`")]
pub struct UnknownZeusCode(pub String);

impl FromStr for ZeusCode {
    type Err = UnknownZeusCode;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let trimmed = s.trim();
        ZeusCode::ALL
            .into_iter()
            .find(|c| c.as_str().eq_ignore_ascii_case(trimmed))
            .ok_or_else(|| UnknownZeusCode(trimmed.to_string()))
    }
}

impl TryFrom<String> for ZeusCode {
    type Error = UnknownZeusCode;

    fn try_from(value: String) -> Result<Self, Self::Error> {
        value.parse()
    }
}

impl From<ZeusCode> for String {
    fn from(code: ZeusCode) -> Self {
        code.as_str().to_string()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn round_trips_every_code() {
        for code in ZeusCode::ALL {
            assert_eq!(code.as_str().parse::<ZeusCode>().unwrap(), code);
        }
        assert!("02-08-03".parse::<ZeusCode>().is_err());
        assert!("".parse::<ZeusCode>().is_err());
    }

    #[test]
    fn level4_parent_is_string_prefix() {
        for code in ZeusCode::ALL {
            let parent = code.level3();
            assert_eq!(parent.level(), 3);
            if code.level() == 4 {
                assert!(code.as_str().starts_with(parent.as_str()));
                assert_ne!(code, parent);
            } else {
                assert_eq!(code, parent);
            }
        }
    }

    #[test]
    fn level3_list_is_sorted_by_code() {
        let codes: Vec<&str> = ZeusCode::LEVEL3.iter().map(|c| c.as_str()).collect();
        let mut sorted = codes.clone();
        sorted.sort();
        assert_eq!(codes, sorted);
    }

    #[test]
    fn ord_matches_code_strings() {
        for a in ZeusCode::ALL {
            for b in ZeusCode::ALL {
                assert_eq!(a.cmp(&b), a.as_str().cmp(b.as_str()), "{a} vs {b}");
            }
        }
    }

    #[test]
    fn serde_uses_code_strings() {
        let json = serde_json::to_string(&ZeusCode::Insignificant).unwrap();
        assert_eq!(json, "\"02-08-XX\"");
        let back: ZeusCode = serde_json::from_str("\"02-08-01-02\"").unwrap();
        assert_eq!(back, ZeusCode::CorrectiveImmediate);
    }
}

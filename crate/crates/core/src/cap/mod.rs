//! Common Alerting Protocol 1.1 documents.
//!
//! [`CapAlert`] is the in-memory form of a single-`info` CAP alert. The
//! [`xml`] submodule reads and writes the wire form; [`mapping`] converts
//! between alerts and [`DisasterReport`](crate::domain::DisasterReport)s,
//! carrying every report attribute CAP has no element for as a `parameter`.

use std::fmt;

use chrono::{DateTime, SecondsFormat, Utc};
use thiserror::Error;

use crate::geo::GeoError;

pub mod mapping;
pub mod xml;

pub use mapping::{cap_to_report, report_to_cap, report_to_cap_at};
pub use xml::{parse_cap, serialize_cap};

pub const CAP_NAMESPACE: &str = "urn:oasis:names:tc:emergency:cap:1.1";

#[derive(Debug, Error)]
pub enum CapError {
    #[error("malformed XML: {0}")]
    MalformedXml(String),
    #[error("schema violation at <{element}>: {reason}")]
    SchemaViolation { element: String, reason: String },
    #[error("invariant violation at <{element}>: {reason}")]
    InvariantViolation { element: String, reason: String },
    #[error("bad value {value:?} for parameter {name}")]
    BadParameter { name: String, value: String },
    #[error("alert has no location parameter and no resolvable area")]
    MissingLocation,
    #[error(transparent)]
    Region(#[from] GeoError),
}

impl CapError {
    pub(crate) fn schema(element: &str, reason: impl Into<String>) -> Self {
        CapError::SchemaViolation {
            element: element.to_string(),
            reason: reason.into(),
        }
    }

    /// Element named by a schema or invariant violation.
    pub fn element(&self) -> Option<&str> {
        match self {
            CapError::SchemaViolation { element, .. } | CapError::InvariantViolation { element, .. } => {
                Some(element)
            }
            _ => None,
        }
    }
}

macro_rules! cap_enum {
    ($(#[$meta:meta])* $name:ident { $($variant:ident => $wire:literal),+ $(,)? }) => {
        $(#[$meta])*
        #[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
        pub enum $name {
            $($variant),+
        }

        impl $name {
            pub const ALL: &'static [$name] = &[$($name::$variant),+];

            pub fn as_str(self) -> &'static str {
                match self {
                    $($name::$variant => $wire),+
                }
            }

            pub fn parse(text: &str) -> Option<Self> {
                match text {
                    $($wire => Some($name::$variant),)+
                    _ => None,
                }
            }
        }

        impl fmt::Display for $name {
            fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
                f.write_str(self.as_str())
            }
        }
    };
}

cap_enum!(Status {
    Actual => "Actual",
    Exercise => "Exercise",
    System => "System",
    Test => "Test",
    Draft => "Draft",
});

cap_enum!(MsgType {
    Alert => "Alert",
    Update => "Update",
    Cancel => "Cancel",
    Ack => "Ack",
    Error => "Error",
});

cap_enum!(Scope {
    Public => "Public",
    Restricted => "Restricted",
    Private => "Private",
});

cap_enum!(Category {
    Geo => "Geo",
    Met => "Met",
    Safety => "Safety",
    Security => "Security",
    Rescue => "Rescue",
    Fire => "Fire",
    Health => "Health",
    Env => "Env",
    Transport => "Transport",
    Infra => "Infra",
    Cbrne => "CBRNE",
    Other => "Other",
});

cap_enum!(ResponseType {
    Shelter => "Shelter",
    Evacuate => "Evacuate",
    Prepare => "Prepare",
    Execute => "Execute",
    Monitor => "Monitor",
    Assess => "Assess",
    NoResponse => "None",
});

cap_enum!(Urgency {
    Immediate => "Immediate",
    Expected => "Expected",
    Future => "Future",
    Past => "Past",
    Unknown => "Unknown",
});

cap_enum!(CapSeverity {
    Extreme => "Extreme",
    Severe => "Severe",
    Moderate => "Moderate",
    Minor => "Minor",
    Unknown => "Unknown",
});

cap_enum!(Certainty {
    Observed => "Observed",
    Likely => "Likely",
    Possible => "Possible",
    Unlikely => "Unlikely",
    Unknown => "Unknown",
});

/// A CAP date-time: the instant in UTC plus the text it was written as, so
/// the original offset survives re-export.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CapTime {
    utc: DateTime<Utc>,
    text: String,
}

impl CapTime {
    pub fn parse(text: &str) -> Option<Self> {
        let text = text.trim();
        let parsed = DateTime::parse_from_rfc3339(text).ok()?;
        Some(Self {
            utc: parsed.with_timezone(&Utc),
            text: text.to_string(),
        })
    }

    pub fn from_utc(utc: DateTime<Utc>) -> Self {
        Self {
            utc,
            text: utc.to_rfc3339_opts(SecondsFormat::AutoSi, false),
        }
    }

    pub fn utc(&self) -> DateTime<Utc> {
        self.utc
    }

    pub fn as_str(&self) -> &str {
        &self.text
    }
}

impl fmt::Display for CapTime {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.text)
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CapParameter {
    pub value_name: String,
    pub value: String,
}

impl CapParameter {
    pub fn new(value_name: impl Into<String>, value: impl Into<String>) -> Self {
        Self {
            value_name: value_name.into(),
            value: value.into(),
        }
    }
}

/// `<area>` block. Only the geometry needed to locate foreign alerts is kept.
#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct CapArea {
    pub area_desc: String,
    pub polygons: Vec<String>,
    pub circles: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CapInfo {
    pub language: Option<String>,
    pub category: Category,
    pub event: String,
    pub response_type: Option<ResponseType>,
    pub urgency: Urgency,
    pub severity: CapSeverity,
    pub certainty: Certainty,
    pub effective: Option<CapTime>,
    pub parameters: Vec<CapParameter>,
    pub areas: Vec<CapArea>,
}

impl CapInfo {
    /// First value of the named parameter.
    pub fn parameter(&self, name: &str) -> Option<&str> {
        self.parameters
            .iter()
            .find(|p| p.value_name == name)
            .map(|p| p.value.as_str())
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CapAlert {
    pub identifier: String,
    pub sender: String,
    pub sent: CapTime,
    pub status: Status,
    pub msg_type: MsgType,
    pub source: Option<String>,
    pub scope: Scope,
    pub info: CapInfo,
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn cap_time_keeps_offset_text() {
        let t = CapTime::parse("2013-09-25T07:05:02.917-05:00").unwrap();
        assert_eq!(t.as_str(), "2013-09-25T07:05:02.917-05:00");
        assert_eq!(t.utc().to_rfc3339(), "2013-09-25T12:05:02.917+00:00");
        let u = CapTime::from_utc(t.utc());
        assert_eq!(u.as_str(), "2013-09-25T12:05:02.917+00:00");
        assert_eq!(CapTime::parse(u.as_str()), Some(u));
        assert!(CapTime::parse("yesterday").is_none());
    }

    #[test]
    fn enum_wire_names() {
        for s in Status::ALL {
            assert_eq!(Status::parse(s.as_str()), Some(*s));
        }
        assert_eq!(ResponseType::parse("None"), Some(ResponseType::NoResponse));
        assert_eq!(Category::parse("CBRNE"), Some(Category::Cbrne));
        assert_eq!(Status::parse("Bogus"), None);
    }
}

//! Step-by-step report construction: kind, the kind's own fields, severity,
//! location, description.

use std::io::{BufRead, Write};
use std::path::Path;

use chrono::{DateTime, Utc};
use serde::Deserialize;
use thiserror::Error;

use disaster_core::domain::{
    validate_report, ActorId, DisasterKind, DisasterReport, GeoPoint, KindDetails, LifecycleState, Severity,
    Violation, MAX_WATER_LEVEL_CM,
};
use disaster_core::geo::AdminHierarchy;

#[derive(Debug, Error)]
pub enum BuildError {
    #[error("missing answer for step {0:?}")]
    MissingStep(&'static str),
    #[error("step {step:?}: {reason}")]
    InvalidAnswer { step: &'static str, reason: String },
    #[error("aborted by user")]
    AbortedByUser,
    #[error("report is invalid: {0:?}")]
    Invalid(Vec<Violation>),
    #[error("answer file: {0}")]
    AnswerFile(#[from] toml::de::Error),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

/// Non-interactive answers, typically read from a TOML file.
#[derive(Debug, Clone, Default, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Answers {
    pub kind: Option<String>,
    pub water_level_cm: Option<u32>,
    pub area_estimate_m2: Option<u64>,
    pub facility: Option<String>,
    pub disease_name: Option<String>,
    pub affected_count: Option<u32>,
    pub severity: Option<String>,
    pub lat: Option<f64>,
    pub lon: Option<f64>,
    pub description: Option<String>,
    pub reporter: Option<String>,
    pub phone: Option<String>,
    #[serde(default)]
    pub attachments: Vec<String>,
}

impl Answers {
    pub fn from_toml(text: &str) -> Result<Self, BuildError> {
        Ok(toml::from_str(text)?)
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self, BuildError> {
        Self::from_toml(&std::fs::read_to_string(path)?)
    }
}

pub struct BuildContext<'a> {
    pub reporter: ActorId,
    pub phone: String,
    /// When given, regions are filled in and the report is validated
    /// locally; otherwise the server fills the regions.
    pub hierarchy: Option<&'a AdminHierarchy>,
    pub now: DateTime<Utc>,
}

fn invalid(step: &'static str, reason: impl Into<String>) -> BuildError {
    BuildError::InvalidAnswer {
        step,
        reason: reason.into(),
    }
}

fn parse_kind(text: &str) -> Result<DisasterKind, BuildError> {
    let t = text.trim();
    if let Ok(n) = t.parse::<usize>() {
        if (1..=DisasterKind::ALL.len()).contains(&n) {
            return Ok(DisasterKind::ALL[n - 1]);
        }
    }
    DisasterKind::ALL
        .into_iter()
        .find(|k| k.name().eq_ignore_ascii_case(t))
        .ok_or_else(|| invalid("kind", format!("unknown kind {t:?}")))
}

fn parse_severity(text: &str) -> Result<Severity, BuildError> {
    let t = text.trim();
    Severity::ALL
        .into_iter()
        .find(|s| s.name().eq_ignore_ascii_case(t))
        .ok_or_else(|| invalid("severity", format!("unknown severity {t:?}")))
}

fn check_water_level(cm: u32) -> Result<u32, BuildError> {
    if cm > MAX_WATER_LEVEL_CM {
        return Err(invalid("water_level_cm", format!("at most {MAX_WATER_LEVEL_CM} cm")));
    }
    Ok(cm)
}

fn check_location(lat: f64, lon: f64, hierarchy: Option<&AdminHierarchy>) -> Result<GeoPoint, BuildError> {
    let p = GeoPoint::new(lat, lon);
    if !p.in_range() || !lat.is_finite() || !lon.is_finite() {
        return Err(invalid("location", format!("{p} is not a coordinate")));
    }
    if let Some(h) = hierarchy {
        h.locate(p).map_err(|e| invalid("location", e.to_string()))?;
    }
    Ok(p)
}

fn check_text(step: &'static str, text: &str) -> Result<String, BuildError> {
    let t = text.trim();
    if t.is_empty() {
        return Err(invalid(step, "must not be empty"));
    }
    Ok(t.to_string())
}

fn finish(
    kind: DisasterKind,
    details: KindDetails,
    severity: Severity,
    location: GeoPoint,
    description: String,
    attachments: Vec<String>,
    ctx: &BuildContext<'_>,
) -> Result<DisasterReport, BuildError> {
    let mut report = DisasterReport {
        id: String::new(),
        kind,
        details,
        location,
        geometry: None,
        province_id: String::new(),
        district_id: String::new(),
        kumban_id: None,
        reporter: ctx.reporter.clone(),
        reporter_phone: ctx.phone.clone(),
        description,
        created_at: ctx.now,
        state: LifecycleState::Submitted,
        severity,
        merged_into: None,
        attachments,
        extensions: Vec::new(),
    };
    if let Some(h) = ctx.hierarchy {
        let found = h.locate(location).map_err(|e| invalid("location", e.to_string()))?;
        report.province_id = found.province_id;
        report.district_id = found.district_id;
        report.kumban_id = found.kumban_id;
        validate_report(&report, h).map_err(BuildError::Invalid)?;
    }
    Ok(report)
}

/// Builds a report from an answer file. A missing answer fails with the
/// step it belongs to.
pub fn from_answers(answers: &Answers, ctx: &BuildContext<'_>) -> Result<DisasterReport, BuildError> {
    let kind = parse_kind(answers.kind.as_deref().ok_or(BuildError::MissingStep("kind"))?)?;
    let details = match kind {
        DisasterKind::Flood => KindDetails::Flood {
            water_level_cm: check_water_level(answers.water_level_cm.ok_or(BuildError::MissingStep("water_level_cm"))?)?,
        },
        DisasterKind::BushFire => KindDetails::BushFire {
            area_estimate_m2: answers.area_estimate_m2,
        },
        DisasterKind::Infrastructure => KindDetails::Infrastructure {
            facility: check_text("facility", answers.facility.as_deref().ok_or(BuildError::MissingStep("facility"))?)?,
        },
        disease => {
            let name = check_text(
                "disease_name",
                answers.disease_name.as_deref().ok_or(BuildError::MissingStep("disease_name"))?,
            )?;
            let count = answers.affected_count.ok_or(BuildError::MissingStep("affected_count"))?;
            KindDetails::disease(disease, name, count).expect("disease kind")
        }
    };
    let severity = match &answers.severity {
        Some(s) => parse_severity(s)?,
        None => Severity::Moderate,
    };
    let lat = answers.lat.ok_or(BuildError::MissingStep("location"))?;
    let lon = answers.lon.ok_or(BuildError::MissingStep("location"))?;
    let location = check_location(lat, lon, ctx.hierarchy)?;
    let description = check_text(
        "description",
        answers.description.as_deref().ok_or(BuildError::MissingStep("description"))?,
    )?;
    let ctx = BuildContext {
        reporter: answers.reporter.clone().map(ActorId::new).unwrap_or_else(|| ctx.reporter.clone()),
        phone: answers.phone.clone().unwrap_or_else(|| ctx.phone.clone()),
        hierarchy: ctx.hierarchy,
        now: ctx.now,
    };
    finish(kind, details, severity, location, description, answers.attachments.clone(), &ctx)
}

struct Prompter<R, W> {
    input: R,
    output: W,
}

impl<R: BufRead, W: Write> Prompter<R, W> {
    /// Asks until `parse` accepts the answer. End of input or `q` aborts.
    fn ask<T>(&mut self, question: &str, mut parse: impl FnMut(&str) -> Result<T, BuildError>) -> Result<T, BuildError> {
        loop {
            write!(self.output, "{question}: ")?;
            self.output.flush()?;
            let mut line = String::new();
            if self.input.read_line(&mut line)? == 0 {
                return Err(BuildError::AbortedByUser);
            }
            let answer = line.trim();
            if answer.eq_ignore_ascii_case("q") {
                return Err(BuildError::AbortedByUser);
            }
            match parse(answer) {
                Ok(v) => return Ok(v),
                Err(e) => writeln!(self.output, "  {e}")?,
            }
        }
    }

    fn number<T: std::str::FromStr>(&mut self, step: &'static str, question: &str) -> Result<T, BuildError>
    where
        T::Err: std::fmt::Display,
    {
        self.ask(question, |a| a.parse::<T>().map_err(|e| invalid(step, e.to_string())))
    }
}

/// Walks the user through the steps on `input`/`output`. Invalid answers
/// are explained and asked again.
pub fn interactive<R: BufRead, W: Write>(input: R, output: W, ctx: &BuildContext<'_>) -> Result<DisasterReport, BuildError> {
    let mut p = Prompter { input, output };
    let menu: Vec<String> = DisasterKind::ALL
        .iter()
        .enumerate()
        .map(|(i, k)| format!("{}) {k}", i + 1))
        .collect();
    writeln!(p.output, "What happened? {}", menu.join("  "))?;
    let kind = p.ask("kind", parse_kind)?;
    let details = match kind {
        DisasterKind::Flood => {
            let cm = p.ask("water level in cm (0-10000)", |a| {
                let cm = a.parse::<u32>().map_err(|e| invalid("water_level_cm", e.to_string()))?;
                check_water_level(cm)
            })?;
            KindDetails::Flood { water_level_cm: cm }
        }
        DisasterKind::BushFire => {
            let area = p.ask("burnt area in m2 (empty if unknown)", |a| {
                if a.is_empty() {
                    Ok(None)
                } else {
                    a.parse::<u64>()
                        .map(Some)
                        .map_err(|e| invalid("area_estimate_m2", e.to_string()))
                }
            })?;
            KindDetails::BushFire { area_estimate_m2: area }
        }
        DisasterKind::Infrastructure => KindDetails::Infrastructure {
            facility: p.ask("damaged facility", |a| check_text("facility", a))?,
        },
        disease => {
            let name = p.ask("disease name", |a| check_text("disease_name", a))?;
            let count = p.number("affected_count", "number affected")?;
            KindDetails::disease(disease, name, count).expect("disease kind")
        }
    };
    let severity = p.ask("severity (Minor/Moderate/Severe/Extreme, empty for Moderate)", |a| {
        if a.is_empty() {
            Ok(Severity::Moderate)
        } else {
            parse_severity(a)
        }
    })?;
    let hierarchy = ctx.hierarchy;
    let location = p.ask("location as lat,lon", |a| {
        let (lat, lon) = a
            .split_once(',')
            .ok_or_else(|| invalid("location", "expected lat,lon"))?;
        let lat = lat.trim().parse::<f64>().map_err(|e| invalid("location", e.to_string()))?;
        let lon = lon.trim().parse::<f64>().map_err(|e| invalid("location", e.to_string()))?;
        check_location(lat, lon, hierarchy)
    })?;
    let description = p.ask("describe what you see", |a| check_text("description", a))?;
    finish(kind, details, severity, location, description, Vec::new(), ctx)
}

//! Scenario documents.
//!
//! A document is a flat list of `key: value` lines (`#` starts a comment
//! line) or the same pairs inline as `{key: value, ...}`. A file may hold
//! several documents separated by `---` lines.
//!
//! | key           | value                                                          |
//! |---------------|----------------------------------------------------------------|
//! | `type`        | SPEED_SPIKE, COURSE_DEVIATION, KINEMATIC_BOTH, RENDEZVOUS, LOITERING, GROUP_DEVIATION |
//! | `id`          | free text; defaults to the lower-cased type                    |
//! | `level`       | NODE, EDGE or GRAPH; inferred from the type when omitted       |
//! | `severity`    | σ multiplier (> 3) for kinematic types and GROUP_DEVIATION; SOG ceiling in knots (0, 1] for LOITERING; final separation in km (0, 0.5) for RENDEZVOUS |
//! | `target`      | `any`, `vessel_type=Fishing`, `region=lon_min,lon_max,lat_min,lat_max`, `mmsi=A,B` |
//! | `targets`     | `[A, B]`, shorthand for `target: mmsi=A,B`                     |
//! | `count`       | number of members to edit                                      |
//! | `prompt_text` | free text kept with every label the scenario produces          |

use std::collections::BTreeMap;
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::ingest::{Mmsi, RegionBounds, Trajectory, VesselType};

use super::mask::Channel;
use super::perturb::DEFAULT_K_SIGMA;

pub const DEFAULT_LOITER_SOG: f64 = 1.0;
pub const DEFAULT_RENDEZVOUS_KM: f64 = 0.1;
pub const RENDEZVOUS_MAX_KM: f64 = 0.5;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum ScenarioError {
    #[error("scenario schema violation: {0}")]
    SchemaViolation(String),
}

fn violation(msg: impl Into<String>) -> ScenarioError {
    ScenarioError::SchemaViolation(msg.into())
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "SCREAMING_SNAKE_CASE")]
pub enum AnomalyType {
    SpeedSpike,
    CourseDeviation,
    KinematicBoth,
    Rendezvous,
    Loitering,
    GroupDeviation,
}

impl AnomalyType {
    pub const ALL: [AnomalyType; 6] = [
        AnomalyType::SpeedSpike,
        AnomalyType::CourseDeviation,
        AnomalyType::KinematicBoth,
        AnomalyType::Rendezvous,
        AnomalyType::Loitering,
        AnomalyType::GroupDeviation,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            AnomalyType::SpeedSpike => "SPEED_SPIKE",
            AnomalyType::CourseDeviation => "COURSE_DEVIATION",
            AnomalyType::KinematicBoth => "KINEMATIC_BOTH",
            AnomalyType::Rendezvous => "RENDEZVOUS",
            AnomalyType::Loitering => "LOITERING",
            AnomalyType::GroupDeviation => "GROUP_DEVIATION",
        }
    }

    /// Channel of the single-vessel σ-scaled types.
    pub fn kinematic_channel(self) -> Option<Channel> {
        match self {
            AnomalyType::SpeedSpike => Some(Channel::Sog),
            AnomalyType::CourseDeviation => Some(Channel::Cog),
            AnomalyType::KinematicBoth => Some(Channel::Both),
            _ => None,
        }
    }

    pub fn is_sigma_scaled(self) -> bool {
        self.kinematic_channel().is_some() || self == AnomalyType::GroupDeviation
    }

    pub fn default_level(self) -> Level {
        match self {
            AnomalyType::Rendezvous => Level::Edge,
            AnomalyType::GroupDeviation => Level::Graph,
            _ => Level::Node,
        }
    }

    pub fn allows_level(self, level: Level) -> bool {
        match self {
            AnomalyType::Loitering => matches!(level, Level::Node | Level::Graph),
            t => t.default_level() == level,
        }
    }

    pub fn default_severity(self) -> f64 {
        match self {
            AnomalyType::Loitering => DEFAULT_LOITER_SOG,
            AnomalyType::Rendezvous => DEFAULT_RENDEZVOUS_KM,
            _ => DEFAULT_K_SIGMA,
        }
    }
}

impl fmt::Display for AnomalyType {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

fn normalize(s: &str) -> String {
    s.trim().to_ascii_uppercase().replace(['-', ' '], "_")
}

impl FromStr for AnomalyType {
    type Err = ScenarioError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let n = normalize(s);
        AnomalyType::ALL
            .into_iter()
            .find(|t| t.as_str() == n)
            .ok_or_else(|| violation(format!("unknown anomaly type {s:?}")))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "UPPERCASE")]
pub enum Level {
    Node,
    Edge,
    Graph,
}

impl Level {
    pub fn as_str(self) -> &'static str {
        match self {
            Level::Node => "NODE",
            Level::Edge => "EDGE",
            Level::Graph => "GRAPH",
        }
    }
}

impl fmt::Display for Level {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Level {
    type Err = ScenarioError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match normalize(s).as_str() {
            "NODE" => Ok(Level::Node),
            "EDGE" => Ok(Level::Edge),
            "GRAPH" => Ok(Level::Graph),
            _ => Err(violation(format!("unknown level {s:?}"))),
        }
    }
}

/// Which group members a scenario may edit.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(into = "String", try_from = "String")]
pub enum TargetSelector {
    Any,
    VesselType(VesselType),
    /// Members whose first window state lies inside the box.
    Region(RegionBounds),
    Mmsi(Vec<Mmsi>),
}

impl TargetSelector {
    pub fn matches(&self, traj: &Trajectory) -> bool {
        match self {
            TargetSelector::Any => true,
            TargetSelector::VesselType(v) => traj.vessel_type == *v,
            TargetSelector::Region(r) => traj.states.first().is_some_and(|s| r.contains(s.lat, s.lon)),
            TargetSelector::Mmsi(list) => list.contains(&traj.mmsi),
        }
    }
}

impl fmt::Display for TargetSelector {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            TargetSelector::Any => f.write_str("any"),
            TargetSelector::VesselType(v) => write!(f, "vessel_type={v}"),
            TargetSelector::Region(r) => {
                write!(f, "region={},{},{},{}", r.lon_min, r.lon_max, r.lat_min, r.lat_max)
            }
            TargetSelector::Mmsi(list) => {
                let ids: Vec<String> = list.iter().map(u32::to_string).collect();
                write!(f, "mmsi={}", ids.join(","))
            }
        }
    }
}

fn parse_mmsi_list(s: &str) -> Result<Vec<Mmsi>, ScenarioError> {
    let inner = s.trim();
    let inner = inner
        .strip_prefix('[')
        .and_then(|x| x.strip_suffix(']'))
        .unwrap_or(inner);
    let list: Vec<Mmsi> = inner
        .split(',')
        .map(|x| {
            x.trim()
                .parse::<Mmsi>()
                .map_err(|_| violation(format!("bad mmsi {:?}", x.trim())))
        })
        .collect::<Result<_, _>>()?;
    if list.is_empty() {
        return Err(violation("empty mmsi list"));
    }
    Ok(list)
}

impl FromStr for TargetSelector {
    type Err = ScenarioError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let s = s.trim();
        if s.eq_ignore_ascii_case("any") {
            return Ok(TargetSelector::Any);
        }
        let (key, value) = s
            .split_once('=')
            .ok_or_else(|| violation(format!("bad target {s:?}")))?;
        match key.trim() {
            "vessel_type" => value
                .parse::<VesselType>()
                .map(TargetSelector::VesselType)
                .map_err(|_| violation(format!("unknown vessel type {:?}", value.trim()))),
            "region" => {
                let v: Vec<f64> = value
                    .split(',')
                    .map(|x| x.trim().parse::<f64>())
                    .collect::<Result<_, _>>()
                    .map_err(|_| violation(format!("bad region {value:?}")))?;
                if v.len() != 4 {
                    return Err(violation("region takes lon_min,lon_max,lat_min,lat_max"));
                }
                RegionBounds::new(v[0], v[1], v[2], v[3])
                    .map(TargetSelector::Region)
                    .map_err(|_| violation(format!("empty region {value:?}")))
            }
            "mmsi" => parse_mmsi_list(value).map(TargetSelector::Mmsi),
            other => Err(violation(format!("unknown target filter {other:?}"))),
        }
    }
}

impl From<TargetSelector> for String {
    fn from(t: TargetSelector) -> String {
        t.to_string()
    }
}

impl TryFrom<String> for TargetSelector {
    type Error = ScenarioError;

    fn try_from(s: String) -> Result<Self, Self::Error> {
        s.parse()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Scenario {
    pub id: String,
    #[serde(rename = "type")]
    pub anomaly_type: AnomalyType,
    pub level: Level,
    pub severity: f64,
    pub target: TargetSelector,
    /// Members to edit; `None` means one for single-vessel types, every
    /// eligible member for group types.
    pub count: Option<usize>,
    pub prompt_text: String,
    pub rationale: String,
}

impl Scenario {
    /// A scenario with defaults filled and a generated rationale.
    pub fn new(
        id: impl Into<String>,
        anomaly_type: AnomalyType,
        level: Option<Level>,
        severity: Option<f64>,
        target: TargetSelector,
    ) -> Result<Self, ScenarioError> {
        let mut sc = Scenario {
            id: id.into(),
            anomaly_type,
            level: level.unwrap_or(anomaly_type.default_level()),
            severity: severity.unwrap_or(anomaly_type.default_severity()),
            target,
            count: None,
            prompt_text: String::new(),
            rationale: String::new(),
        };
        sc.rationale = sc.describe();
        sc.validate()?;
        Ok(sc)
    }

    /// KINEMATIC_BOTH on one member, the focal vessel when eligible.
    pub fn default_kinematic(k_sigma: f64) -> Result<Self, ScenarioError> {
        let mut sc = Scenario::new(
            "default-kinematic",
            AnomalyType::KinematicBoth,
            None,
            Some(k_sigma),
            TargetSelector::Any,
        )?;
        sc.count = Some(1);
        sc.rationale = sc.describe();
        Ok(sc)
    }

    pub fn with_prompt(mut self, prompt: impl Into<String>) -> Self {
        self.prompt_text = prompt.into();
        self.rationale = self.describe();
        self
    }

    pub fn with_count(mut self, count: usize) -> Self {
        self.count = Some(count);
        self.rationale = self.describe();
        self
    }

    pub fn is_group(&self) -> bool {
        self.level == Level::Graph
    }

    pub fn validate(&self) -> Result<(), ScenarioError> {
        let t = self.anomaly_type;
        if self.id.trim().is_empty() {
            return Err(violation("empty id"));
        }
        if !t.allows_level(self.level) {
            return Err(violation(format!("{t} cannot be realized at {} level", self.level)));
        }
        let s = self.severity;
        let ok = match t {
            _ if t.is_sigma_scaled() => s > 3.0 && s.is_finite(),
            AnomalyType::Loitering => s > 0.0 && s <= 1.0,
            AnomalyType::Rendezvous => s > 0.0 && s < RENDEZVOUS_MAX_KM,
            _ => unreachable!(),
        };
        if !ok {
            let want = match t {
                AnomalyType::Loitering => "in (0, 1] kn",
                AnomalyType::Rendezvous => "in (0, 0.5) km",
                _ => "> 3",
            };
            return Err(violation(format!("{t} severity {s} must be {want}")));
        }
        match self.count {
            Some(0) => return Err(violation("count must be at least 1")),
            Some(c) if t == AnomalyType::Rendezvous && c != 2 => {
                return Err(violation("RENDEZVOUS involves exactly 2 vessels"))
            }
            _ => {}
        }
        Ok(())
    }

    fn describe(&self) -> String {
        let mut text = format!(
            "{} at {} level on {} with severity {}",
            self.anomaly_type, self.level, self.target, self.severity
        );
        if let Some(c) = self.count {
            text.push_str(&format!(", {c} member(s)"));
        }
        if !self.prompt_text.is_empty() {
            text.push_str(&format!(": {}", self.prompt_text));
        }
        text
    }
}

/// Turns one scenario document into a validated [`Scenario`]. Free-text
/// front ends implement this and must return the same type.
pub trait ScenarioInterpreter: Send + Sync {
    fn interpret(&self, doc: &str) -> Result<Scenario, ScenarioError>;
}

/// Interpreter for the key-value document format.
#[derive(Debug, Clone, Copy, Default)]
pub struct DslInterpreter;

fn unquote(v: &str) -> &str {
    let v = v.trim();
    for q in ['"', '\''] {
        if let Some(inner) = v.strip_prefix(q).and_then(|x| x.strip_suffix(q)) {
            return inner;
        }
    }
    v
}

/// Split on commas outside brackets and quotes.
fn split_inline(s: &str) -> Vec<&str> {
    let mut parts = Vec::new();
    let (mut depth, mut quote, mut start) = (0i32, None, 0);
    for (i, c) in s.char_indices() {
        match c {
            '"' | '\'' if quote == Some(c) => quote = None,
            '"' | '\'' if quote.is_none() => quote = Some(c),
            '[' if quote.is_none() => depth += 1,
            ']' if quote.is_none() => depth -= 1,
            ',' if quote.is_none() && depth == 0 => {
                parts.push(&s[start..i]);
                start = i + 1;
            }
            _ => {}
        }
    }
    parts.push(&s[start..]);
    parts
}

fn fields(doc: &str) -> Result<Vec<(String, String)>, ScenarioError> {
    let trimmed = doc.trim();
    let items: Vec<&str> = if let Some(inner) = trimmed.strip_prefix('{') {
        let inner = inner
            .strip_suffix('}')
            .ok_or_else(|| violation("unterminated inline document"))?;
        split_inline(inner)
            .into_iter()
            .filter(|p| !p.trim().is_empty())
            .collect()
    } else {
        trimmed
            .lines()
            .map(str::trim)
            .filter(|l| !l.is_empty() && !l.starts_with('#'))
            .collect()
    };
    let mut out: Vec<(String, String)> = Vec::new();
    for item in items {
        let (k, v) = item
            .split_once(':')
            .ok_or_else(|| violation(format!("expected `key: value`, got {:?}", item.trim())))?;
        let key = k.trim().to_string();
        if out.iter().any(|(seen, _)| *seen == key) {
            return Err(violation(format!("duplicate key {key:?}")));
        }
        out.push((key, unquote(v).to_string()));
    }
    Ok(out)
}

impl ScenarioInterpreter for DslInterpreter {
    fn interpret(&self, doc: &str) -> Result<Scenario, ScenarioError> {
        let fields: BTreeMap<String, String> = fields(doc)?.into_iter().collect();
        for key in fields.keys() {
            if !["id", "type", "level", "severity", "target", "targets", "count", "prompt_text"]
                .contains(&key.as_str())
            {
                return Err(violation(format!("unknown key {key:?}")));
            }
        }
        let anomaly_type: AnomalyType = fields
            .get("type")
            .ok_or_else(|| violation("missing required key \"type\""))?
            .parse()?;
        let level = fields.get("level").map(|l| l.parse::<Level>()).transpose()?;
        let severity = fields
            .get("severity")
            .map(|s| {
                s.parse::<f64>()
                    .ok()
                    .filter(|x| x.is_finite())
                    .ok_or_else(|| violation(format!("bad severity {s:?}")))
            })
            .transpose()?;
        let target = match (fields.get("target"), fields.get("targets")) {
            (Some(_), Some(_)) => return Err(violation("give either target or targets")),
            (Some(t), None) => t.parse()?,
            (None, Some(list)) => TargetSelector::Mmsi(parse_mmsi_list(list)?),
            (None, None) => TargetSelector::Any,
        };
        let id = fields
            .get("id")
            .cloned()
            .unwrap_or_else(|| anomaly_type.as_str().to_ascii_lowercase());
        let count = fields
            .get("count")
            .map(|c| c.parse::<usize>().map_err(|_| violation(format!("bad count {c:?}"))))
            .transpose()?;

        let mut sc = Scenario::new(id, anomaly_type, level, severity, target)?;
        sc.count = count;
        sc.prompt_text = fields.get("prompt_text").cloned().unwrap_or_default();
        sc.rationale = sc.describe();
        sc.validate()?;
        Ok(sc)
    }
}

pub fn interpret_scenario(doc: &str) -> Result<Scenario, ScenarioError> {
    DslInterpreter.interpret(doc)
}

/// Every document in a file, in order. Ids must be unique.
pub fn parse_scenario_file(
    text: &str,
    interpreter: &dyn ScenarioInterpreter,
) -> Result<Vec<Scenario>, ScenarioError> {
    let mut docs = vec![String::new()];
    for line in text.lines() {
        if line.trim() == "---" {
            docs.push(String::new());
        } else {
            let cur = docs.last_mut().unwrap();
            cur.push_str(line);
            cur.push('\n');
        }
    }
    let mut out: Vec<Scenario> = Vec::new();
    for (i, doc) in docs.iter().enumerate() {
        let blank = doc
            .lines()
            .map(str::trim)
            .all(|l| l.is_empty() || l.starts_with('#'));
        if blank {
            continue;
        }
        let sc = interpreter.interpret(doc).map_err(|ScenarioError::SchemaViolation(m)| {
            violation(format!("document {}: {m}", i + 1))
        })?;
        if out.iter().any(|o| o.id == sc.id) {
            return Err(violation(format!("duplicate scenario id {:?}", sc.id)));
        }
        out.push(sc);
    }
    Ok(out)
}

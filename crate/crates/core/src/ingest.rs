//! AIS ingestion: header-driven delimited-text parsing, region filtering,
//! per-vessel track assembly, and resampling onto a uniform time grid.

use std::collections::BTreeMap;
use std::fmt;
use std::io::Read;
use std::str::FromStr;

use chrono::{DateTime, NaiveDateTime};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::kinematics::{course_delta, wrap_course};

pub type Mmsi = u32;

/// Default resampling interval, seconds.
pub const DEFAULT_DT: i64 = 600;
/// Default gap that splits one vessel's records into separate tracks, seconds.
pub const DEFAULT_GAP_THRESHOLD: i64 = 3600;

#[derive(Debug, Error)]
pub enum IngestError {
    #[error("malformed row: field `{field}` has unparseable value {value:?}")]
    MalformedRow { field: &'static str, value: String },
    #[error("field `{field}` out of range: {value}")]
    OutOfRange { field: &'static str, value: f64 },
    #[error("unknown vessel type {0:?}")]
    UnknownVesselType(String),
    #[error("header is missing column `{0}`")]
    MissingColumn(&'static str),
    #[error("track spans {span} s, shorter than dt = {dt} s")]
    TooShort { span: i64, dt: i64 },
    #[error("invalid region bounds")]
    InvalidRegion,
    #[error("invalid trajectory: {0}")]
    InvalidTrajectory(String),
    #[error(transparent)]
    Csv(#[from] csv::Error),
}

impl IngestError {
    /// Short stable name used for rejection counters.
    pub fn kind(&self) -> &'static str {
        match self {
            IngestError::MalformedRow { .. } => "malformed_row",
            IngestError::OutOfRange { .. } => "out_of_range",
            IngestError::UnknownVesselType(_) => "unknown_vessel_type",
            IngestError::MissingColumn(_) => "missing_column",
            IngestError::TooShort { .. } => "too_short",
            IngestError::InvalidRegion => "invalid_region",
            IngestError::InvalidTrajectory(_) => "invalid_trajectory",
            IngestError::Csv(_) => "csv",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum VesselType {
    Cargo,
    Tanker,
    Fishing,
    Passenger,
}

impl VesselType {
    pub const ALL: [VesselType; 4] = [
        VesselType::Cargo,
        VesselType::Tanker,
        VesselType::Fishing,
        VesselType::Passenger,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            VesselType::Cargo => "Cargo",
            VesselType::Tanker => "Tanker",
            VesselType::Fishing => "Fishing",
            VesselType::Passenger => "Passenger",
        }
    }
}

impl fmt::Display for VesselType {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for VesselType {
    type Err = IngestError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let t = s.trim();
        VesselType::ALL
            .into_iter()
            .find(|v| v.as_str().eq_ignore_ascii_case(t))
            .ok_or_else(|| IngestError::UnknownVesselType(t.to_string()))
    }
}

/// One timestamped AIS observation.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AisRecord {
    pub mmsi: Mmsi,
    /// Unix seconds, UTC.
    pub t: i64,
    pub lat: f64,
    pub lon: f64,
    pub sog: f64,
    pub cog: f64,
    pub vessel_type: VesselType,
}

fn check_kinematic_bounds(lat: f64, lon: f64, sog: f64, cog: f64) -> Result<(), IngestError> {
    let bad = |field, value| Err(IngestError::OutOfRange { field, value });
    if !(-90.0..=90.0).contains(&lat) {
        return bad("lat", lat);
    }
    if !(-180.0..=180.0).contains(&lon) {
        return bad("lon", lon);
    }
    if !(sog >= 0.0 && sog.is_finite()) {
        return bad("sog", sog);
    }
    if !(0.0..360.0).contains(&cog) {
        return bad("cog", cog);
    }
    Ok(())
}

impl AisRecord {
    pub fn validate(&self) -> Result<(), IngestError> {
        check_kinematic_bounds(self.lat, self.lon, self.sog, self.cog)
    }
}

/// Kinematic state of one vessel at one grid timestamp.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct VesselState {
    pub t: i64,
    pub lat: f64,
    pub lon: f64,
    pub sog: f64,
    pub cog: f64,
}

impl VesselState {
    pub fn position(&self) -> crate::kinematics::GeoPoint {
        crate::kinematics::GeoPoint::new(self.lat, self.lon)
    }

    pub fn validate(&self) -> Result<(), IngestError> {
        check_kinematic_bounds(self.lat, self.lon, self.sog, self.cog)
    }
}

impl From<&AisRecord> for VesselState {
    fn from(r: &AisRecord) -> Self {
        VesselState {
            t: r.t,
            lat: r.lat,
            lon: r.lon,
            sog: r.sog,
            cog: r.cog,
        }
    }
}

/// Where a trajectory came from.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "SCREAMING_SNAKE_CASE")]
pub enum Provenance {
    /// A real track, identified by its source track id.
    Real { source: String },
    /// A virtual neighbor generated from the given focal vessel.
    Synthetic { parent: Mmsi },
}

impl Provenance {
    pub fn real(source: impl Into<String>) -> Self {
        Provenance::Real {
            source: source.into(),
        }
    }

    pub fn is_synthetic(&self) -> bool {
        matches!(self, Provenance::Synthetic { .. })
    }
}

impl fmt::Display for Provenance {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Provenance::Real { source } => write!(f, "REAL:{source}"),
            Provenance::Synthetic { parent } => write!(f, "SYNTHETIC:{parent}"),
        }
    }
}

/// Time-ordered raw states of one vessel, not yet on a uniform grid.
#[derive(Debug, Clone, PartialEq)]
pub struct Track {
    pub mmsi: Mmsi,
    pub vessel_type: VesselType,
    pub states: Vec<VesselState>,
    pub source: String,
}

/// Uniformly sampled vessel trajectory.
///
/// Timestamps are strictly increasing with constant spacing `dt`; there are
/// at least two states.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Trajectory {
    pub mmsi: Mmsi,
    pub vessel_type: VesselType,
    pub dt: i64,
    pub states: Vec<VesselState>,
    pub provenance: Provenance,
}

impl Trajectory {
    pub fn new(
        mmsi: Mmsi,
        vessel_type: VesselType,
        dt: i64,
        states: Vec<VesselState>,
        provenance: Provenance,
    ) -> Result<Self, IngestError> {
        let t = Trajectory {
            mmsi,
            vessel_type,
            dt,
            states,
            provenance,
        };
        t.validate()?;
        Ok(t)
    }

    pub fn validate(&self) -> Result<(), IngestError> {
        let invalid = |m: String| Err(IngestError::InvalidTrajectory(m));
        if self.dt <= 0 {
            return invalid(format!("dt = {}", self.dt));
        }
        if self.states.len() < 2 {
            return invalid(format!("{} states", self.states.len()));
        }
        if let Some(p) = self
            .states
            .windows(2)
            .find(|p| p[1].t - p[0].t != self.dt)
        {
            return invalid(format!("spacing {} != dt {}", p[1].t - p[0].t, self.dt));
        }
        self.states.iter().try_for_each(VesselState::validate)
    }

    /// Window length in samples.
    pub fn w(&self) -> usize {
        self.states.len()
    }

    pub fn start(&self) -> i64 {
        self.states[0].t
    }

    pub fn end(&self) -> i64 {
        self.states[self.states.len() - 1].t
    }

    /// Index of the grid sample at exactly time `t`.
    pub fn index_of(&self, t: i64) -> Option<usize> {
        if t < self.start() || t > self.end() || (t - self.start()) % self.dt != 0 {
            return None;
        }
        Some(((t - self.start()) / self.dt) as usize)
    }

    pub fn state_at(&self, t: i64) -> Option<&VesselState> {
        self.index_of(t).map(|i| &self.states[i])
    }

    /// The `w` samples starting at `start`, or `None` if not fully covered.
    pub fn window(&self, start: i64, w: usize) -> Option<Trajectory> {
        let i = self.index_of(start)?;
        if w < 2 || i + w > self.states.len() {
            return None;
        }
        Some(Trajectory {
            states: self.states[i..i + w].to_vec(),
            provenance: self.provenance.clone(),
            ..*self
        })
    }

    pub fn to_track(&self) -> Track {
        Track {
            mmsi: self.mmsi,
            vessel_type: self.vessel_type,
            states: self.states.clone(),
            source: match &self.provenance {
                Provenance::Real { source } => source.clone(),
                p => p.to_string(),
            },
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RegionBounds {
    pub lon_min: f64,
    pub lon_max: f64,
    pub lat_min: f64,
    pub lat_max: f64,
}

impl RegionBounds {
    pub fn new(lon_min: f64, lon_max: f64, lat_min: f64, lat_max: f64) -> Result<Self, IngestError> {
        if !(lon_min < lon_max && lat_min < lat_max) {
            return Err(IngestError::InvalidRegion);
        }
        Ok(Self {
            lon_min,
            lon_max,
            lat_min,
            lat_max,
        })
    }

    /// West Australian offshore region: 105–116 E, 36–15 S.
    pub const fn omtad() -> Self {
        Self {
            lon_min: 105.0,
            lon_max: 116.0,
            lat_min: -36.0,
            lat_max: -15.0,
        }
    }

    pub fn contains(&self, lat: f64, lon: f64) -> bool {
        (self.lon_min..=self.lon_max).contains(&lon) && (self.lat_min..=self.lat_max).contains(&lat)
    }
}

impl Default for RegionBounds {
    fn default() -> Self {
        Self::omtad()
    }
}

pub fn validate_region(rec: &AisRecord, bounds: &RegionBounds) -> bool {
    bounds.contains(rec.lat, rec.lon)
}

/// Column positions of the mandatory fields, resolved from a header row.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct ColumnMap {
    pub mmsi: usize,
    pub timestamp: usize,
    pub lat: usize,
    pub lon: usize,
    pub sog: usize,
    pub cog: usize,
    pub vessel_type: usize,
}

const COLUMN_ALIASES: [(&str, &[&str]); 7] = [
    ("mmsi", &["mmsi"]),
    ("timestamp", &["timestamp", "time", "datetime", "basedatetime", "t"]),
    ("lat", &["lat", "latitude"]),
    ("lon", &["lon", "long", "longitude", "lng"]),
    ("sog", &["sog", "speed"]),
    ("cog", &["cog", "course"]),
    ("vessel_type", &["vessel_type", "vesseltype", "type", "category"]),
];

impl ColumnMap {
    pub fn from_header(header: &csv::StringRecord) -> Result<Self, IngestError> {
        let norm: Vec<String> = header
            .iter()
            .map(|h| h.trim().to_ascii_lowercase().replace([' ', '-'], "_"))
            .collect();
        let mut idx = [0usize; 7];
        for (slot, (name, aliases)) in idx.iter_mut().zip(COLUMN_ALIASES) {
            *slot = norm
                .iter()
                .position(|h| aliases.contains(&h.as_str()))
                .ok_or(IngestError::MissingColumn(name))?;
        }
        let [mmsi, timestamp, lat, lon, sog, cog, vessel_type] = idx;
        Ok(Self {
            mmsi,
            timestamp,
            lat,
            lon,
            sog,
            cog,
            vessel_type,
        })
    }
}

/// Parse an ISO-8601 UTC timestamp into Unix seconds. A missing offset is
/// read as UTC.
pub fn parse_timestamp(s: &str) -> Option<i64> {
    let s = s.trim();
    if let Ok(dt) = DateTime::parse_from_rfc3339(s) {
        return Some(dt.timestamp());
    }
    ["%Y-%m-%dT%H:%M:%S%.f", "%Y-%m-%d %H:%M:%S%.f"]
        .iter()
        .find_map(|f| NaiveDateTime::parse_from_str(s, f).ok())
        .map(|n| n.and_utc().timestamp())
}

pub fn format_timestamp(t: i64) -> String {
    DateTime::from_timestamp(t, 0)
        .map(|d| d.format("%Y-%m-%dT%H:%M:%SZ").to_string())
        .unwrap_or_else(|| t.to_string())
}

pub fn parse_ais_record(row: &csv::StringRecord, schema: &ColumnMap) -> Result<AisRecord, IngestError> {
    fn field<'r>(row: &'r csv::StringRecord, i: usize, name: &'static str) -> Result<&'r str, IngestError> {
        match row.get(i).map(str::trim) {
            Some(v) if !v.is_empty() => Ok(v),
            other => Err(IngestError::MalformedRow {
                field: name,
                value: other.unwrap_or_default().to_string(),
            }),
        }
    }
    fn num(row: &csv::StringRecord, i: usize, name: &'static str) -> Result<f64, IngestError> {
        let v = field(row, i, name)?;
        v.parse::<f64>()
            .ok()
            .filter(|x| x.is_finite())
            .ok_or_else(|| IngestError::MalformedRow {
                field: name,
                value: v.to_string(),
            })
    }

    let mmsi_s = field(row, schema.mmsi, "mmsi")?;
    let mmsi = mmsi_s.parse::<Mmsi>().map_err(|_| IngestError::MalformedRow {
        field: "mmsi",
        value: mmsi_s.to_string(),
    })?;
    let ts = field(row, schema.timestamp, "timestamp")?;
    let t = parse_timestamp(ts).ok_or_else(|| IngestError::MalformedRow {
        field: "timestamp",
        value: ts.to_string(),
    })?;
    let rec = AisRecord {
        mmsi,
        t,
        lat: num(row, schema.lat, "lat")?,
        lon: num(row, schema.lon, "lon")?,
        sog: num(row, schema.sog, "sog")?,
        cog: num(row, schema.cog, "cog")?,
        vessel_type: field(row, schema.vessel_type, "vessel_type")?.parse()?,
    };
    rec.validate()?;
    Ok(rec)
}

/// Result of reading a whole AIS table.
#[derive(Debug, Default)]
pub struct ReadReport {
    pub rows: usize,
    pub records: Vec<AisRecord>,
    /// Rejected rows by error kind.
    pub rejected: BTreeMap<String, usize>,
}

/// Read a header-led delimited AIS table. Bad rows are counted and skipped;
/// a bad header is an error.
pub fn read_ais<R: Read>(reader: R, delimiter: u8) -> Result<ReadReport, IngestError> {
    let mut rdr = csv::ReaderBuilder::new()
        .delimiter(delimiter)
        .flexible(true)
        .from_reader(reader);
    let schema = ColumnMap::from_header(rdr.headers()?)?;
    let mut report = ReadReport::default();
    for row in rdr.records() {
        let row = row?;
        report.rows += 1;
        match parse_ais_record(&row, &schema) {
            Ok(r) => report.records.push(r),
            Err(e) => *report.rejected.entry(e.kind().to_string()).or_default() += 1,
        }
    }
    Ok(report)
}

/// Group records per vessel, sort by time, drop duplicate timestamps (first
/// occurrence wins) and split wherever consecutive samples are more than
/// `gap_threshold` seconds apart. Output is ordered by (mmsi, start time).
pub fn assemble_trajectories(records: &[AisRecord], gap_threshold: i64) -> Vec<Track> {
    let mut by_vessel: BTreeMap<Mmsi, Vec<&AisRecord>> = BTreeMap::new();
    for r in records {
        by_vessel.entry(r.mmsi).or_default().push(r);
    }
    let mut tracks = Vec::new();
    for (mmsi, mut recs) in by_vessel {
        recs.sort_by_key(|r| r.t);
        recs.dedup_by_key(|r| r.t);
        let mut start = 0;
        for i in 1..=recs.len() {
            if i == recs.len() || recs[i].t - recs[i - 1].t > gap_threshold {
                let seg = &recs[start..i];
                tracks.push(Track {
                    mmsi,
                    vessel_type: seg[0].vessel_type,
                    states: seg.iter().map(|r| VesselState::from(*r)).collect(),
                    source: format!("{mmsi}@{}", seg[0].t),
                });
                start = i;
            }
        }
    }
    tracks
}

/// Resample onto the epoch-aligned grid `{k * dt}` inside the track's span.
///
/// Position and SOG are interpolated linearly; COG along the shorter arc.
/// Grid times that coincide with a source sample copy it exactly.
pub fn resample_trajectory(track: &Track, dt: i64) -> Result<Trajectory, IngestError> {
    if dt <= 0 {
        return Err(IngestError::InvalidTrajectory(format!("dt = {dt}")));
    }
    let src = &track.states;
    let span = match (src.first(), src.last()) {
        (Some(a), Some(b)) => b.t - a.t,
        _ => 0,
    };
    if span < dt {
        return Err(IngestError::TooShort { span, dt });
    }
    let first = src[0].t.div_euclid(dt) * dt;
    let t0 = if first < src[0].t { first + dt } else { first };
    let t_end = src[src.len() - 1].t.div_euclid(dt) * dt;
    if t_end - t0 < dt {
        return Err(IngestError::TooShort { span, dt });
    }

    let states = (0..=((t_end - t0) / dt))
        .map(|k| {
            let t = t0 + k * dt;
            let j = src.partition_point(|s| s.t <= t);
            let a = &src[j - 1];
            if a.t == t {
                return *a;
            }
            let b = &src[j];
            let f = (t - a.t) as f64 / (b.t - a.t) as f64;
            let lerp = |x: f64, y: f64| x + f * (y - x);
            VesselState {
                t,
                lat: lerp(a.lat, b.lat),
                lon: lerp(a.lon, b.lon),
                sog: lerp(a.sog, b.sog),
                cog: wrap_course(a.cog + f * course_delta(a.cog, b.cog)),
            }
        })
        .collect();
    Trajectory::new(
        track.mmsi,
        track.vessel_type,
        dt,
        states,
        Provenance::real(track.source.clone()),
    )
}

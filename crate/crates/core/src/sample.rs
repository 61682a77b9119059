//! Deterministic synthetic AIS corpus: convoys of vessels moving together,
//! isolated traffic, one vessel with a reporting gap and one outside the
//! region.
//!
//! Speed and course are piecewise constant over `dt`-second segments aligned
//! to the epoch grid and rounded to AIS resolution (0.1 kn, 0.1°); positions
//! are dead-reckoned from those rounded values at the reporting cadence.

use std::io::{self, Write};

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::ingest::{format_timestamp, AisRecord, Mmsi, RegionBounds, VesselType};
use crate::kinematics::{dead_reckon, wrap_course};
use crate::rng::{domain, stream, StreamRng};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SampleSpec {
    pub seed: u64,
    pub convoys: usize,
    pub convoy_min: usize,
    pub convoy_max: usize,
    pub loners: usize,
    pub min_hours: u32,
    pub max_hours: u32,
    /// Unix seconds of the earliest report.
    pub start: i64,
    /// Seconds between reports of one vessel.
    pub cadence: i64,
    /// Length of a constant-kinematics segment, seconds.
    pub dt: i64,
    pub region: RegionBounds,
}

impl Default for SampleSpec {
    fn default() -> Self {
        SampleSpec {
            seed: 7,
            convoys: 10,
            convoy_min: 3,
            convoy_max: 5,
            loners: 16,
            min_hours: 8,
            max_hours: 14,
            // 2019-03-01T00:00:00Z
            start: 1_551_398_400,
            cadence: 300,
            dt: 600,
            region: RegionBounds::omtad(),
        }
    }
}

#[derive(Debug, Clone, Copy)]
struct Motion {
    sog: f64,
    cog: f64,
    sog_walk: f64,
    cog_walk: f64,
    turn_prob: f64,
    sog_range: (f64, f64),
}

impl Motion {
    fn for_type(vt: VesselType, rng: &mut StreamRng, northbound: bool) -> Self {
        let lane = if northbound { 0.0 } else { 180.0 };
        let (sog_range, cog_walk, turn_prob, spread) = match vt {
            VesselType::Cargo => ((11.0, 15.0), 1.5, 0.03, 25.0),
            VesselType::Tanker => ((10.0, 13.0), 1.0, 0.02, 25.0),
            VesselType::Fishing => ((3.0, 8.0), 8.0, 0.15, 70.0),
            VesselType::Passenger => ((16.0, 22.0), 1.0, 0.02, 20.0),
        };
        Motion {
            sog: rng.gen_range(sog_range.0..sog_range.1),
            cog: wrap_course(lane + rng.gen_range(-spread..spread)),
            sog_walk: 0.2,
            cog_walk,
            turn_prob,
            sog_range,
        }
    }

    fn step(&mut self, rng: &mut StreamRng) {
        self.sog = (self.sog + rng.gen_range(-self.sog_walk..=self.sog_walk)).clamp(self.sog_range.0, self.sog_range.1);
        let mut d = rng.gen_range(-self.cog_walk..=self.cog_walk);
        if rng.gen_bool(self.turn_prob) {
            d += rng.gen_range(-20.0..=20.0);
        }
        self.cog = wrap_course(self.cog + d);
    }
}

/// Nearest double to `x` rounded to `decimals` places, identical to parsing
/// the printed decimal.
fn round_dp(x: f64, decimals: i32) -> f64 {
    let scale = 10f64.powi(decimals);
    (x * scale).round() / scale
}

/// AIS-resolution SOG and COG.
fn quantize(sog: f64, cog: f64) -> (f64, f64) {
    let sog = round_dp(sog, 1);
    let cog = round_dp(cog, 1);
    (sog.max(0.0), if cog >= 360.0 { 0.0 } else { cog })
}

struct VesselPlan {
    mmsi: Mmsi,
    vessel_type: VesselType,
    lat: f64,
    lon: f64,
    t0: i64,
    segments: usize,
    /// Segments during which the vessel does not report.
    silent: Option<(usize, usize)>,
}

/// Report every `cadence` seconds; segment `k` covers `(t0 + (k-1) dt, t0 + k dt]`
/// with the kinematics `kin[k]`.
fn emit_track(plan: &VesselPlan, kin: &[(f64, f64)], spec: &SampleSpec, out: &mut Vec<AisRecord>) {
    let per_seg = (spec.dt / spec.cadence).max(1);
    let sub = spec.dt as f64 / per_seg as f64;
    let (mut lat, mut lon) = (plan.lat, plan.lon);
    let push = |out: &mut Vec<AisRecord>, t: i64, lat: f64, lon: f64, k: usize| {
        let silent = plan.silent.is_some_and(|(a, b)| (a..b).contains(&k));
        if !silent {
            out.push(AisRecord {
                mmsi: plan.mmsi,
                t,
                lat: round_dp(lat, 6),
                lon: round_dp(lon, 6),
                sog: kin[k].0,
                cog: kin[k].1,
                vessel_type: plan.vessel_type,
            });
        }
    };
    push(out, plan.t0, lat, lon, 0);
    for k in 1..=plan.segments {
        let (sog, cog) = kin[k];
        for j in 1..=per_seg {
            // keep positions on the same dead-reckoning chain as the rounded values
            let p = dead_reckon(lat, lon, sog, cog, sub).expect("sample stays far from the poles");
            (lat, lon) = (round_dp(p.lat, 6), round_dp(p.lon, 6));
            push(out, plan.t0 + (k as i64 - 1) * spec.dt + j * sub as i64, lat, lon, k);
        }
    }
}

fn kinematics(motion: &mut Motion, segments: usize, rng: &mut StreamRng) -> Vec<(f64, f64)> {
    (0..=segments)
        .map(|k| {
            if k > 0 {
                motion.step(rng);
            }
            quantize(motion.sog, motion.cog)
        })
        .collect()
}

fn pick_type(rng: &mut StreamRng, convoy: bool) -> VesselType {
    let r: f64 = rng.gen();
    match (convoy, r) {
        (true, r) if r < 0.45 => VesselType::Cargo,
        (true, r) if r < 0.75 => VesselType::Tanker,
        (true, _) => VesselType::Fishing,
        (false, r) if r < 0.35 => VesselType::Cargo,
        (false, r) if r < 0.55 => VesselType::Tanker,
        (false, r) if r < 0.8 => VesselType::Fishing,
        (false, _) => VesselType::Passenger,
    }
}

/// The corpus, ordered by (time, mmsi).
pub fn generate_sample(spec: &SampleSpec) -> Vec<AisRecord> {
    assert!(spec.cadence > 0 && spec.dt > 0 && spec.dt % spec.cadence == 0);
    let mut rng = stream(spec.seed, &[domain::SAMPLE]);
    let r = spec.region;
    let (lat_lo, lat_hi) = (r.lat_min + 3.0, r.lat_max - 3.0);
    let (lon_lo, lon_hi) = (r.lon_min + 1.5, r.lon_max - 1.5);
    let mid_lat = (r.lat_min + r.lat_max) / 2.0;
    let seg_hours = spec.dt as f64 / 3600.0;
    let mut out = Vec::new();

    let segments_for = |rng: &mut StreamRng| {
        let h = rng.gen_range(spec.min_hours..=spec.max_hours) as f64;
        (h / seg_hours).round() as usize
    };
    let start_for = |rng: &mut StreamRng| spec.start + rng.gen_range(0..=24) * spec.dt;

    for c in 0..spec.convoys {
        let size = rng.gen_range(spec.convoy_min..=spec.convoy_max);
        let vt = pick_type(&mut rng, true);
        let (lat, lon) = (rng.gen_range(lat_lo..lat_hi), rng.gen_range(lon_lo..lon_hi));
        let mut lead = Motion::for_type(vt, &mut rng, lat < mid_lat);
        let segments = segments_for(&mut rng);
        let t0 = start_for(&mut rng);
        let lead_kin: Vec<(f64, f64)> = (0..=segments)
            .map(|k| {
                if k > 0 {
                    lead.step(&mut rng);
                }
                (lead.sog, lead.cog)
            })
            .collect();
        for j in 0..size {
            let plan = VesselPlan {
                mmsi: 503_100_000 + (c * 100 + j) as Mmsi,
                vessel_type: vt,
                lat: lat + rng.gen_range(-0.015..0.015),
                lon: lon + rng.gen_range(-0.015..0.015),
                t0,
                segments,
                silent: None,
            };
            let kin: Vec<(f64, f64)> = lead_kin
                .iter()
                .map(|&(s, c)| quantize(s + rng.gen_range(-0.3..=0.3), wrap_course(c + rng.gen_range(-2.0..=2.0))))
                .collect();
            emit_track(&plan, &kin, spec, &mut out);
        }
    }

    for i in 0..spec.loners {
        let vt = pick_type(&mut rng, false);
        let (lat, lon) = (rng.gen_range(lat_lo..lat_hi), rng.gen_range(lon_lo..lon_hi));
        let mut m = Motion::for_type(vt, &mut rng, lat < mid_lat);
        let segments = segments_for(&mut rng);
        let plan = VesselPlan {
            mmsi: 503_200_000 + i as Mmsi,
            vessel_type: vt,
            lat,
            lon,
            t0: start_for(&mut rng),
            segments,
            // the first loner goes quiet for two hours mid-voyage
            silent: (i == 0).then_some((segments / 2, segments / 2 + 12)),
        };
        let kin = kinematics(&mut m, segments, &mut rng);
        emit_track(&plan, &kin, spec, &mut out);
    }

    // one vessel east of the region
    let mut m = Motion::for_type(VesselType::Cargo, &mut rng, true);
    let plan = VesselPlan {
        mmsi: 503_300_000,
        vessel_type: VesselType::Cargo,
        lat: mid_lat,
        lon: r.lon_max + 1.0,
        t0: spec.start,
        segments: 36,
        silent: None,
    };
    let kin = kinematics(&mut m, plan.segments, &mut rng);
    emit_track(&plan, &kin, spec, &mut out);

    out.sort_by_key(|r| (r.t, r.mmsi));
    out
}

/// Header-led CSV. A handful of repeated and malformed rows are appended to
/// exercise the reader's dedup and rejection paths.
pub fn write_sample_csv<W: Write>(records: &[AisRecord], writer: W) -> io::Result<()> {
    let mut w = csv::Writer::from_writer(writer);
    w.write_record(["mmsi", "timestamp", "lat", "lon", "sog", "cog", "vessel_type"])?;
    let row = |r: &AisRecord| {
        [
            r.mmsi.to_string(),
            format_timestamp(r.t),
            format!("{:.6}", r.lat),
            format!("{:.6}", r.lon),
            format!("{:.1}", r.sog),
            format!("{:.1}", r.cog),
            r.vessel_type.to_string(),
        ]
    };
    for r in records {
        w.write_record(row(r))?;
    }
    for r in records.iter().step_by(997).take(5) {
        w.write_record(row(r))?;
    }
    if let Some(r) = records.first() {
        let mut bad = row(r);
        bad[5] = "360.0".into();
        w.write_record(&bad)?;
        let mut bad = row(r);
        bad[1] = "yesterday".into();
        w.write_record(&bad)?;
        let mut bad = row(r);
        bad[6] = "Submarine".into();
        w.write_record(&bad)?;
    }
    w.flush()
}

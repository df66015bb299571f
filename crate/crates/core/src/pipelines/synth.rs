//! Synthetic generation: simulated traffic with injected, labeled anomalies.

use std::collections::BTreeMap;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use serde_json::json;

use super::PipelineError;
use crate::domain::{
    bearing_deg, Annotator, AnomalyKind, AreaOfInterest, GeoFix, Label, LatLon, MarineObject, Source, TimeWindow,
    Verdict, KM_PER_NM,
};
use crate::ingestion::{destination, normalize_lon, simulate_tracks, SimConfig};
use crate::store::{DataStore, SnapshotManifest};

/// Fixes in an excessive-speed or zig-zag segment.
pub const SEGMENT_FIXES: usize = 20;
/// Fixes deleted for a reporting gap: 390 one-minute intervals collapse into one.
pub const GAP_DELETED_FIXES: usize = 389;
pub const ZONE_FIXES: usize = 10;
/// Clear fixes kept between injected segments.
pub const PLACEMENT_MARGIN: usize = 12;
pub const ZONE_PAD_DEG: f64 = 0.001;
const ZIGZAG_DEG: f64 = 70.0;
const PLACEMENT_ATTEMPTS: usize = 500;

/// Per-object probability of injecting each kind.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct AnomalyRates {
    pub excessive_speed: f64,
    pub ais_gap: f64,
    pub impossible_jump: f64,
    pub zone_violation: f64,
    pub kinematic_outlier: f64,
}

impl Default for AnomalyRates {
    fn default() -> Self {
        Self { excessive_speed: 0.6, ais_gap: 0.4, impossible_jump: 0.6, zone_violation: 0.5, kinematic_outlier: 0.6 }
    }
}

impl AnomalyRates {
    pub fn zero() -> Self {
        Self { excessive_speed: 0.0, ais_gap: 0.0, impossible_jump: 0.0, zone_violation: 0.0, kinematic_outlier: 0.0 }
    }

    /// Injection order, which is also the order random draws are made in.
    pub fn ordered(&self) -> [(AnomalyKind, f64); 5] {
        [
            (AnomalyKind::ExcessiveSpeed, self.excessive_speed),
            (AnomalyKind::AisGap, self.ais_gap),
            (AnomalyKind::ImpossibleJump, self.impossible_jump),
            (AnomalyKind::KinematicOutlier, self.kinematic_outlier),
            (AnomalyKind::ZoneViolation, self.zone_violation),
        ]
    }

    pub fn set(&mut self, kind: AnomalyKind, rate: f64) {
        match kind {
            AnomalyKind::ExcessiveSpeed => self.excessive_speed = rate,
            AnomalyKind::AisGap => self.ais_gap = rate,
            AnomalyKind::ImpossibleJump => self.impossible_jump = rate,
            AnomalyKind::ZoneViolation => self.zone_violation = rate,
            AnomalyKind::KinematicOutlier => self.kinematic_outlier = rate,
        }
    }
}

/// Fixes from `s - 1` through the last affected fix, in original indices.
fn footprint(kind: AnomalyKind) -> usize {
    match kind {
        AnomalyKind::ExcessiveSpeed | AnomalyKind::KinematicOutlier => SEGMENT_FIXES + 1,
        AnomalyKind::AisGap => GAP_DELETED_FIXES + 2,
        AnomalyKind::ImpossibleJump => 2,
        AnomalyKind::ZoneViolation => ZONE_FIXES + 1,
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SynthParams {
    pub seed: u64,
    pub n_objects: usize,
    pub duration_s: i64,
    #[serde(default)]
    pub rates: AnomalyRates,
    #[serde(default = "synthetic_sim")]
    pub sim: SimConfig,
}

fn synthetic_sim() -> SimConfig {
    SimConfig { source: Source::Synthetic, id_prefix: "obj".into(), ..SimConfig::default() }
}

impl SynthParams {
    pub fn new(seed: u64, n_objects: usize, duration_s: i64) -> Self {
        Self { seed, n_objects, duration_s, rates: AnomalyRates::default(), sim: synthetic_sim() }
    }

    fn check(&self) -> Result<usize, PipelineError> {
        for (kind, rate) in self.rates.ordered() {
            if !(0.0..=1.0).contains(&rate) {
                return Err(PipelineError::Config(format!("rate for {kind} must be in [0, 1], got {rate}")));
            }
        }
        if self.duration_s < 0 || self.sim.interval_s < 1 {
            return Err(PipelineError::Config("duration and interval must be positive".into()));
        }
        let n = (self.duration_s / self.sim.interval_s) as usize + 1;
        let expected: f64 = self.rates.ordered().iter().map(|(k, r)| r * footprint(*k) as f64).sum();
        if expected > 0.5 * n as f64 {
            return Err(PipelineError::Config(format!(
                "anomaly rates need {expected:.0} of {n} fixes per track, more than half"
            )));
        }
        Ok(n)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SynthOutput {
    pub fixes: Vec<GeoFix>,
    pub labels: Vec<Label>,
    pub objects: Vec<MarineObject>,
    pub zones: Vec<AreaOfInterest>,
    pub manifest: Option<SnapshotManifest>,
}

impl SynthOutput {
    pub fn injected(&self, kind: AnomalyKind) -> usize {
        self.labels.iter().filter(|l| l.kind == Some(kind)).count()
    }
}

struct Injection {
    kind: AnomalyKind,
    /// First modified fix, original index.
    s: usize,
}

fn place(rng: &mut ChaCha8Rng, n: usize, kinds: &[AnomalyKind], object_id: &str) -> Result<Vec<Injection>, PipelineError> {
    let mut taken: Vec<(usize, usize)> = Vec::new();
    let mut out = Vec::new();
    for &kind in kinds {
        let len = footprint(kind);
        let lo = 1 + PLACEMENT_MARGIN;
        let hi = n.checked_sub(len + PLACEMENT_MARGIN).filter(|hi| *hi >= lo);
        let mut placed = false;
        if let Some(hi) = hi {
            for _ in 0..PLACEMENT_ATTEMPTS {
                let s = rng.gen_range(lo..=hi);
                let (a, b) = (s - 1 - PLACEMENT_MARGIN, s - 1 + len + PLACEMENT_MARGIN);
                if taken.iter().all(|&(ta, tb)| b <= ta || tb <= a) {
                    taken.push((a, b));
                    out.push(Injection { kind, s });
                    placed = true;
                    break;
                }
            }
        }
        if !placed {
            return Err(PipelineError::Config(format!("cannot place {kind} on {object_id}: track of {n} fixes is too short")));
        }
    }
    out.sort_by_key(|i| i.s);
    Ok(out)
}

fn set_pos(f: &mut GeoFix, p: LatLon) {
    f.lat = p.lat;
    f.lon = p.lon;
}

/// Move `fixes[from..]` by the displacement that took `before` to `after`.
fn shift_tail(fixes: &mut [GeoFix], from: usize, before: LatLon, after: LatLon) {
    let (dlat, dlon) = (after.lat - before.lat, after.lon - before.lon);
    for f in &mut fixes[from..] {
        f.lat = (f.lat + dlat).clamp(-89.9, 89.9);
        f.lon = normalize_lon(f.lon + dlon);
    }
}

fn course_at(fixes: &[GeoFix], i: usize) -> f64 {
    fixes[i].cog.unwrap_or_else(|| bearing_deg(fixes[i - 1].position(), fixes[i].position()))
}

/// Rewrite `fixes[s..s + SEGMENT_FIXES]` as a path from `fixes[s - 1]`
/// with the given per-step headings and speed, then carry the rest along.
fn rewrite_segment(fixes: &mut [GeoFix], s: usize, speed_kn: f64, heading: impl Fn(usize) -> f64) {
    let end = s + SEGMENT_FIXES - 1;
    let original_end = fixes[end].position();
    let mut p = fixes[s - 1].position();
    for (j, k) in (s..=end).enumerate() {
        let dt = (fixes[k].timestamp - fixes[k - 1].timestamp) as f64;
        p = destination(p, heading(j), speed_kn * KM_PER_NM * dt / 3600.0);
        set_pos(&mut fixes[k], p);
    }
    shift_tail(fixes, end + 1, original_end, p);
}

fn window_label(object_id: &str, window: TimeWindow, kind: Option<AnomalyKind>) -> Label {
    Label {
        label_id: None,
        object_id: object_id.to_string(),
        window,
        verdict: if kind.is_some() { Verdict::Anomalous } else { Verdict::Normal },
        kind,
        annotator: Annotator::Provider,
        note: kind.map(|_| "injected".to_string()),
    }
}

/// Generate the fixes and ground truth without touching any store.
pub fn synthesize(params: &SynthParams) -> Result<SynthOutput, PipelineError> {
    let n = params.check()?;
    let mut rng = ChaCha8Rng::seed_from_u64(params.seed);
    let tracks = simulate_tracks(&params.sim, &mut rng, params.n_objects, params.duration_s)?;

    let mut objects = Vec::new();
    let mut per_object: Vec<(Vec<GeoFix>, Vec<Label>, Option<usize>)> = Vec::new();
    for track in tracks {
        let object_id = track.object.object_id.clone();
        let mut fixes = track.fixes;
        let kinds: Vec<AnomalyKind> =
            params.rates.ordered().into_iter().filter(|(_, rate)| rng.gen_bool(*rate)).map(|(k, _)| k).collect();
        let injections = place(&mut rng, n, &kinds, &object_id)?;
        let ts = |fixes: &[GeoFix], i: usize| fixes[i].timestamp;
        let mut labels = Vec::new();
        let mut deleted = 0..0;
        let mut zone_start = None;
        for inj in &injections {
            let s = inj.s;
            match inj.kind {
                AnomalyKind::ExcessiveSpeed => {
                    let speed = rng.gen_range(40.0..50.0_f64);
                    let course = course_at(&fixes, s - 1);
                    rewrite_segment(&mut fixes, s, speed, |_| course);
                    for f in &mut fixes[s..s + SEGMENT_FIXES] {
                        f.sog = Some((speed * 100.0).round() / 100.0);
                    }
                    labels.push((TimeWindow { start_ts: ts(&fixes, s - 1), end_ts: ts(&fixes, s + SEGMENT_FIXES - 1) }, inj.kind));
                }
                AnomalyKind::KinematicOutlier => {
                    let speed = fixes[s - 1].sog.unwrap_or(params.sim.cruise_min_kn).max(params.sim.cruise_min_kn);
                    let course = course_at(&fixes, s - 1);
                    rewrite_segment(&mut fixes, s, speed, |j| {
                        (course + if j % 2 == 0 { ZIGZAG_DEG } else { -ZIGZAG_DEG }).rem_euclid(360.0)
                    });
                    labels.push((TimeWindow { start_ts: ts(&fixes, s - 1), end_ts: ts(&fixes, s + SEGMENT_FIXES - 1) }, inj.kind));
                }
                AnomalyKind::ImpossibleJump => {
                    let km = rng.gen_range(20.0..40.0);
                    let bearing = rng.gen_range(0.0..360.0);
                    let before = fixes[s].position();
                    shift_tail(&mut fixes, s, before, destination(before, bearing, km));
                    labels.push((TimeWindow { start_ts: ts(&fixes, s - 1), end_ts: ts(&fixes, s) }, inj.kind));
                }
                AnomalyKind::AisGap => {
                    deleted = s..s + GAP_DELETED_FIXES;
                    labels.push((TimeWindow { start_ts: ts(&fixes, s - 1), end_ts: ts(&fixes, s + GAP_DELETED_FIXES) }, inj.kind));
                }
                AnomalyKind::ZoneViolation => zone_start = Some(s),
            }
        }
        // Zones are drawn once every track is final; keep original indices until then.
        let mut kept = Vec::with_capacity(fixes.len());
        let mut zone_at = None;
        for (i, f) in fixes.into_iter().enumerate() {
            if deleted.contains(&i) {
                continue;
            }
            if zone_start == Some(i) {
                zone_at = Some(kept.len());
            }
            kept.push(f);
        }
        let labels = labels.into_iter().map(|(w, k)| window_label(&object_id, w, Some(k))).collect();
        per_object.push((kept, labels, zone_at));
        objects.push(track.object);
    }

    let mut zones = Vec::new();
    for o in 0..per_object.len() {
        let Some(z) = per_object[o].2 else { continue };
        let seg = &per_object[o].0[z..z + ZONE_FIXES];
        let (min_lat, max_lat) = seg.iter().fold((f64::MAX, f64::MIN), |(a, b), f| (a.min(f.lat), b.max(f.lat)));
        let (min_lon, max_lon) = seg.iter().fold((f64::MAX, f64::MIN), |(a, b), f| (a.min(f.lon), b.max(f.lon)));
        let zone = AreaOfInterest::bbox(min_lat - ZONE_PAD_DEG, min_lon - ZONE_PAD_DEG, max_lat + ZONE_PAD_DEG, max_lon + ZONE_PAD_DEG);
        let intruded = per_object.iter().enumerate().any(|(p, (fixes, _, _))| {
            fixes
                .iter()
                .enumerate()
                .any(|(i, f)| !(p == o && (z..z + ZONE_FIXES).contains(&i)) && zone.contains_position(f.lat, f.lon))
        });
        if intruded || zone.validate().is_err() {
            continue;
        }
        let window = TimeWindow { start_ts: seg[0].timestamp, end_ts: seg[ZONE_FIXES - 1].timestamp };
        let object_id = seg[0].object_id.clone();
        per_object[o].1.push(window_label(&object_id, window, Some(AnomalyKind::ZoneViolation)));
        zones.push(zone);
    }

    let mut all_fixes = Vec::new();
    let mut all_labels = Vec::new();
    for (fixes, mut labels, _) in per_object {
        labels.sort_by_key(|l| (l.window.start_ts, l.kind));
        for (seq, l) in labels.iter_mut().enumerate() {
            l.label_id = Some(format!("gt-{}-{seq:02}", l.object_id));
        }
        let normal = normal_runs(&fixes, &labels);
        let seq0 = labels.len();
        all_labels.extend(labels);
        for (j, w) in normal.into_iter().enumerate() {
            let mut l = window_label(&fixes[0].object_id, w, None);
            l.label_id = Some(format!("gt-{}-{:02}", l.object_id, seq0 + j));
            all_labels.push(l);
        }
        all_fixes.extend(fixes);
    }
    Ok(SynthOutput { fixes: all_fixes, labels: all_labels, objects, zones, manifest: None })
}

/// Maximal runs of fixes outside every anomalous window, as closed windows.
pub fn normal_runs(fixes: &[GeoFix], anomalous: &[Label]) -> Vec<TimeWindow> {
    let mut out = Vec::new();
    let mut run: Option<TimeWindow> = None;
    for f in fixes {
        let flagged = anomalous.iter().any(|l| l.verdict == Verdict::Anomalous && l.window.contains(f.timestamp));
        match (&mut run, flagged) {
            (Some(_), true) => out.extend(run.take()),
            (Some(w), false) => w.end_ts = f.timestamp,
            (None, false) => run = Some(TimeWindow { start_ts: f.timestamp, end_ts: f.timestamp }),
            (None, true) => {}
        }
    }
    out.extend(run);
    out
}

/// Generate and write the snapshot.
pub fn synth_generate(params: &SynthParams, store: &DataStore) -> Result<SynthOutput, PipelineError> {
    let mut out = synthesize(params)?;
    let snapshot_params = json!({
        "n_objects": params.n_objects,
        "duration_s": params.duration_s,
        "rates": params.rates,
        "sim": params.sim,
        "zones": out.zones,
        "injected": BTreeMap::from_iter(AnomalyKind::RULE_KINDS.iter().chain([AnomalyKind::KinematicOutlier].iter())
            .map(|k| (k.to_string(), out.injected(*k)))),
    });
    out.manifest = Some(store.write("synth", Some(params.seed), snapshot_params, None, &out.fixes, &out.labels)?);
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::domain::implied_speed_knots;
    use crate::pipelines::rules::{DEFAULT_GAP_THRESHOLD_S, DEFAULT_JUMP_SPEED_KN};

    fn small(seed: u64) -> SynthParams {
        let mut p = SynthParams::new(seed, 4, 6 * 3600);
        p.rates.ais_gap = 0.0;
        p
    }

    #[test]
    fn zero_rates_are_all_normal() {
        let mut p = small(1);
        p.rates = AnomalyRates::zero();
        let out = synthesize(&p).unwrap();
        assert!(out.labels.iter().all(|l| l.verdict == Verdict::Normal));
        assert_eq!(out.labels.len(), 4);
        assert_eq!(out.fixes.len(), 4 * 361);
    }

    #[test]
    fn deterministic() {
        let dir = tempfile::tempdir().unwrap();
        let store = DataStore::new(dir.path());
        let a = synth_generate(&small(9), &store).unwrap().manifest.unwrap();
        let dir2 = tempfile::tempdir().unwrap();
        let b = synth_generate(&small(9), &DataStore::new(dir2.path())).unwrap().manifest.unwrap();
        assert_eq!(a.checksum, b.checksum);
        assert_eq!(a.snapshot_id, b.snapshot_id);
    }

    #[test]
    fn infeasible_rates_rejected() {
        let mut p = SynthParams::new(1, 2, 3600);
        p.rates = AnomalyRates::zero();
        p.rates.ais_gap = 0.5;
        assert!(matches!(synthesize(&p), Err(PipelineError::Config(_))));
        p.rates.ais_gap = 1.5;
        assert!(matches!(synthesize(&p), Err(PipelineError::Config(_))));
    }

    #[test]
    fn every_injected_gap_exceeds_threshold() {
        let mut p = SynthParams::new(5, 10, 24 * 3600);
        p.rates = AnomalyRates::zero();
        p.rates.ais_gap = 0.1;
        let out = synthesize(&p).unwrap();
        let gaps: Vec<_> = out.labels.iter().filter(|l| l.kind == Some(AnomalyKind::AisGap)).collect();
        // Scan the fixes for long intervals independently of the labels.
        let mut observed = 0;
        for pair in out.fixes.windows(2).filter(|w| w[0].object_id == w[1].object_id) {
            let dt = pair[1].timestamp - pair[0].timestamp;
            if dt as f64 > DEFAULT_GAP_THRESHOLD_S {
                observed += 1;
                assert!(gaps.iter().any(|l| l.object_id == pair[0].object_id
                    && l.window.start_ts == pair[0].timestamp
                    && l.window.end_ts == pair[1].timestamp));
            }
        }
        assert_eq!(observed, gaps.len());
    }

    #[test]
    fn injected_windows_show_their_signature() {
        let out = synthesize(&SynthParams::new(42, 10, 24 * 3600)).unwrap();
        for l in out.labels.iter().filter(|l| l.verdict == Verdict::Anomalous) {
            let seg: Vec<&GeoFix> =
                out.fixes.iter().filter(|f| f.object_id == l.object_id && l.window.contains(f.timestamp)).collect();
            let speeds: Vec<f64> = seg.windows(2).map(|w| implied_speed_knots(w[0], w[1]).unwrap()).collect();
            match l.kind.unwrap() {
                AnomalyKind::ExcessiveSpeed => assert!(speeds.iter().all(|&v| v > 39.0), "{speeds:?}"),
                AnomalyKind::ImpossibleJump => assert!(speeds[0] > DEFAULT_JUMP_SPEED_KN),
                AnomalyKind::ZoneViolation => {
                    assert_eq!(seg.len(), ZONE_FIXES);
                    assert!(out.zones.iter().any(|z| seg.iter().all(|f| z.contains_position(f.lat, f.lon))));
                }
                AnomalyKind::KinematicOutlier => assert_eq!(seg.len(), SEGMENT_FIXES + 1),
                AnomalyKind::AisGap => assert_eq!(seg.len(), 2),
            }
        }
        for kind in AnomalyKind::RULE_KINDS {
            assert!(out.injected(kind) > 0, "{kind} never injected");
        }
    }

    #[test]
    fn normal_runs_avoid_anomalies() {
        let out = synthesize(&small(3)).unwrap();
        for n in out.labels.iter().filter(|l| l.verdict == Verdict::Normal) {
            for a in out.labels.iter().filter(|l| l.verdict == Verdict::Anomalous && l.object_id == n.object_id) {
                assert!(!n.window.overlaps(&a.window));
            }
        }
    }
}

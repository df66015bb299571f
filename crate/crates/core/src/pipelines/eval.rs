//! Scoring detections against ground-truth labels.

use std::collections::BTreeMap;

use serde::Serialize;

use super::detector::Detector;
use super::features::windows;
use super::PipelineError;
use crate::domain::{Anomaly, AnomalyKind, GeoFix, Label, TimeWindow, Verdict};

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct KindRecall {
    pub kind: AnomalyKind,
    pub labeled: usize,
    pub recovered: usize,
}

impl KindRecall {
    pub fn rate(&self) -> Option<f64> {
        (self.labeled > 0).then(|| self.recovered as f64 / self.labeled as f64)
    }
}

fn anomalous(labels: &[Label]) -> impl Iterator<Item = &Label> {
    labels.iter().filter(|l| l.verdict == Verdict::Anomalous)
}

/// A labeled window counts as recovered when an anomaly of the same kind on
/// the same object overlaps it. Label and anomaly bounds are fix
/// timestamps, so time overlap means at least one shared fix.
pub fn recall_by_kind(anomalies: &[Anomaly], labels: &[Label], kinds: &[AnomalyKind]) -> Vec<KindRecall> {
    kinds
        .iter()
        .map(|&kind| {
            let wanted: Vec<&Label> = anomalous(labels).filter(|l| l.kind == Some(kind)).collect();
            let recovered = wanted
                .iter()
                .filter(|l| {
                    anomalies.iter().any(|a| a.kind == kind && a.object_id == l.object_id && a.window.overlaps(&l.window))
                })
                .count();
            KindRecall { kind, labeled: wanted.len(), recovered }
        })
        .collect()
}

/// Pooled recall over `kinds`.
pub fn pooled_recall(per_kind: &[KindRecall]) -> Option<f64> {
    let labeled: usize = per_kind.iter().map(|k| k.labeled).sum();
    let recovered: usize = per_kind.iter().map(|k| k.recovered).sum();
    (labeled > 0).then(|| recovered as f64 / labeled as f64)
}

/// Share of anomalies overlapping any anomalous label on their object,
/// whatever its kind.
pub fn precision(anomalies: &[Anomaly], labels: &[Label]) -> Option<f64> {
    if anomalies.is_empty() {
        return None;
    }
    let hits = anomalies
        .iter()
        .filter(|a| anomalous(labels).any(|l| l.object_id == a.object_id && l.window.overlaps(&a.window)))
        .count();
    Some(hits as f64 / anomalies.len() as f64)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct WindowRate {
    pub fired: usize,
    pub windows: usize,
}

impl WindowRate {
    pub fn rate(&self) -> f64 {
        if self.windows == 0 {
            0.0
        } else {
            self.fired as f64 / self.windows as f64
        }
    }
}

/// Group fixes per object in time order.
pub fn tracks(fixes: &[GeoFix]) -> BTreeMap<String, Vec<GeoFix>> {
    let mut out: BTreeMap<String, Vec<GeoFix>> = BTreeMap::new();
    for f in fixes {
        out.entry(f.object_id.clone()).or_default().push(f.clone());
    }
    for t in out.values_mut() {
        t.sort_by_key(|f| f.timestamp);
    }
    out
}

/// Fraction of sliding windows clear of every anomalous label on which
/// the detector fires.
pub fn ml_false_positive_rate(detector: &Detector, fixes: &[GeoFix], labels: &[Label]) -> Result<WindowRate, PipelineError> {
    let mut rate = WindowRate { fired: 0, windows: 0 };
    for (object_id, track) in tracks(fixes) {
        let flagged: Vec<TimeWindow> = anomalous(labels).filter(|l| l.object_id == object_id).map(|l| l.window).collect();
        for w in windows(track.len()) {
            let span = TimeWindow { start_ts: track[w.start].timestamp, end_ts: track[w.end - 1].timestamp };
            if flagged.iter().any(|f| f.overlaps(&span)) {
                continue;
            }
            rate.windows += 1;
            if detector.score_window(&track[w])?.fired() {
                rate.fired += 1;
            }
        }
    }
    Ok(rate)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::domain::{Annotator, Explanation, LatLon};

    fn label(obj: &str, s: i64, e: i64, kind: Option<AnomalyKind>) -> Label {
        Label {
            label_id: None,
            object_id: obj.into(),
            window: TimeWindow { start_ts: s, end_ts: e },
            verdict: if kind.is_some() { Verdict::Anomalous } else { Verdict::Normal },
            kind,
            annotator: Annotator::Provider,
            note: None,
        }
    }

    fn anomaly(obj: &str, s: i64, e: i64, kind: AnomalyKind) -> Anomaly {
        Anomaly {
            anomaly_id: format!("{obj}{s}"),
            object_id: obj.into(),
            kind,
            severity: 1.0,
            score: 1.0,
            window: TimeWindow { start_ts: s, end_ts: e },
            location: LatLon::new(0.0, 0.0),
            model_id: "m:1".into(),
            explanation: Explanation { steps: vec![], summary: String::new() },
        }
    }

    #[test]
    fn recall_needs_kind_and_overlap() {
        let labels = vec![
            label("a", 100, 200, Some(AnomalyKind::AisGap)),
            label("a", 500, 600, Some(AnomalyKind::AisGap)),
            label("a", 0, 90, None),
        ];
        let found = vec![anomaly("a", 200, 300, AnomalyKind::AisGap), anomaly("a", 500, 600, AnomalyKind::ExcessiveSpeed)];
        let r = recall_by_kind(&found, &labels, &[AnomalyKind::AisGap]);
        assert_eq!((r[0].labeled, r[0].recovered), (2, 1));
        assert_eq!(precision(&found, &labels), Some(1.0));
        assert_eq!(precision(&[anomaly("b", 100, 200, AnomalyKind::AisGap)], &labels), Some(0.0));
        assert_eq!(precision(&[], &labels), None);
    }
}

//! Window scoring and anomaly assembly shared by training, batch prediction
//! and on-demand detection.

use std::collections::BTreeMap;
use std::ops::Range;

use super::features::windows;
use super::ml::MlModel;
use super::rules::RuleModel;
use super::PipelineError;
use crate::contract::checksum::Fnv1a;
use crate::domain::{Anomaly, AnomalyKind, Explanation, GeoFix, TimeWindow};
use crate::store::{ModelEntry, ModelKind};

/// A trained model ready to score windows.
#[derive(Debug, Clone, PartialEq)]
pub enum Detector {
    Rule { model_id: String, model: RuleModel },
    Ml { model_id: String, model: MlModel },
}

#[derive(Debug, Clone, PartialEq)]
pub struct Finding {
    pub kind: AnomalyKind,
    pub score: f64,
    pub severity: f64,
}

/// Outcome of scoring one window.
#[derive(Debug, Clone, PartialEq)]
pub struct WindowScore {
    pub explanation: Explanation,
    pub findings: Vec<Finding>,
}

impl WindowScore {
    pub fn fired(&self) -> bool {
        !self.findings.is_empty()
    }
}

pub fn anomaly_id(object_id: &str, window: TimeWindow, model_id: &str, kind: AnomalyKind) -> String {
    let mut h = Fnv1a::default();
    for part in [object_id, &window.start_ts.to_string(), &window.end_ts.to_string(), model_id, &kind.to_string()] {
        h.update(part.as_bytes());
        h.update(b"|");
    }
    format!("an-{}", h.hex())
}

impl Detector {
    pub fn from_entry(entry: &ModelEntry) -> Result<Self, PipelineError> {
        let model_id = entry.model_id.to_string();
        let detector = match entry.manifest.kind {
            ModelKind::Rule => Detector::Rule { model_id, model: entry.params_json()? },
            ModelKind::Ml => Detector::Ml { model_id, model: entry.params_json()? },
        };
        detector.validate()?;
        Ok(detector)
    }

    pub fn validate(&self) -> Result<(), PipelineError> {
        match self {
            Detector::Rule { model, .. } => model.validate(),
            Detector::Ml { model, .. } => model.validate(),
        }
    }

    pub fn model_id(&self) -> &str {
        match self {
            Detector::Rule { model_id, .. } | Detector::Ml { model_id, .. } => model_id,
        }
    }

    pub fn kind(&self) -> ModelKind {
        match self {
            Detector::Rule { .. } => ModelKind::Rule,
            Detector::Ml { .. } => ModelKind::Ml,
        }
    }

    pub fn score_window(&self, window: &[GeoFix]) -> Result<WindowScore, PipelineError> {
        if window.len() < 2 {
            return Err(PipelineError::InsufficientWindow(window.len()));
        }
        Ok(match self {
            Detector::Rule { model, .. } => {
                let (explanation, findings) = model.evaluate(window);
                WindowScore {
                    explanation,
                    findings: findings.into_iter().map(|f| Finding { kind: f.kind, score: f.score, severity: 1.0 }).collect(),
                }
            }
            Detector::Ml { model, .. } => {
                let (score, explanation) = model.explain(window);
                let findings = if score > model.score_threshold {
                    vec![Finding { kind: AnomalyKind::KinematicOutlier, score, severity: model.severity(score) }]
                } else {
                    vec![]
                };
                WindowScore { explanation, findings }
            }
        })
    }

    /// Slide windows over one object's time-ordered fixes and return the
    /// merged anomalies, ordered by start time then kind.
    pub fn detect(&self, fixes: &[GeoFix]) -> Result<Vec<Anomaly>, PipelineError> {
        if fixes.len() < 2 {
            return Err(PipelineError::InsufficientWindow(fixes.len()));
        }
        struct Open {
            range: Range<usize>,
            best: Finding,
            explanation: Explanation,
        }
        let mut open: BTreeMap<AnomalyKind, Open> = BTreeMap::new();
        let mut done: Vec<(AnomalyKind, Open)> = Vec::new();
        for w in windows(fixes.len()) {
            let scored = self.score_window(&fixes[w.clone()])?;
            for finding in scored.findings {
                match open.get_mut(&finding.kind) {
                    Some(o) if o.range.end > w.start => {
                        o.range.end = o.range.end.max(w.end);
                        if finding.score > o.best.score {
                            o.best = finding;
                            o.explanation = scored.explanation.clone();
                        }
                    }
                    _ => {
                        let kind = finding.kind;
                        let fresh = Open { range: w.clone(), best: finding, explanation: scored.explanation.clone() };
                        if let Some(prev) = open.insert(kind, fresh) {
                            done.push((kind, prev));
                        }
                    }
                }
            }
        }
        done.extend(open);
        let object_id = &fixes[0].object_id;
        let mut out: Vec<Anomaly> = done
            .into_iter()
            .map(|(kind, o)| {
                let window = TimeWindow { start_ts: fixes[o.range.start].timestamp, end_ts: fixes[o.range.end - 1].timestamp };
                let mid = &fixes[(o.range.start + o.range.end - 1) / 2];
                Anomaly {
                    anomaly_id: anomaly_id(object_id, window, self.model_id(), kind),
                    object_id: object_id.clone(),
                    kind,
                    severity: o.best.severity,
                    score: o.best.score,
                    window,
                    location: mid.position(),
                    model_id: self.model_id().to_string(),
                    explanation: o.explanation,
                }
            })
            .collect();
        out.sort_by(|a, b| (a.window.start_ts, a.kind).cmp(&(b.window.start_ts, b.kind)));
        Ok(out)
    }
}

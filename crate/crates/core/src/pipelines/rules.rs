//! Interpretable rule detector.

use serde::{Deserialize, Serialize};

use super::features::{median, pair_speed_kn};
use super::PipelineError;
use crate::domain::{AnomalyKind, AreaOfInterest, Explanation, ExplanationStep, GeoFix};

pub const DEFAULT_MAX_SPEED_KN: f64 = 30.0;
pub const DEFAULT_GAP_THRESHOLD_S: f64 = 21_600.0;
pub const DEFAULT_JUMP_SPEED_KN: f64 = 100.0;
pub const DEFAULT_MIN_ZONE_FIXES: f64 = 1.0;
pub const DEFAULT_CALIBRATION_MARGIN: f64 = 1.25;
/// Percentile of label-normal data used when a threshold is calibrated.
pub const CALIBRATION_QUANTILE: f64 = 0.995;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Rule {
    pub kind: AnomalyKind,
    pub threshold: f64,
    pub unit: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RuleModel {
    pub rules: Vec<Rule>,
    pub zones: Vec<AreaOfInterest>,
}

/// What a rule looks at in a window, in the rule's unit.
pub fn rule_observation(kind: AnomalyKind, window: &[GeoFix], zones: &[AreaOfInterest]) -> f64 {
    let speeds = || window.windows(2).filter_map(|p| pair_speed_kn(&p[0], &p[1]));
    match kind {
        AnomalyKind::ExcessiveSpeed => median(&mut speeds().collect::<Vec<_>>()).unwrap_or(0.0),
        AnomalyKind::AisGap => window.windows(2).map(|p| (p[1].timestamp - p[0].timestamp) as f64).fold(0.0, f64::max),
        AnomalyKind::ImpossibleJump => speeds().fold(0.0, f64::max),
        AnomalyKind::ZoneViolation => window
            .iter()
            .filter(|f| zones.iter().any(|z| z.contains_position(f.lat, f.lon)))
            .count() as f64,
        AnomalyKind::KinematicOutlier => 0.0,
    }
}

fn step_name(kind: AnomalyKind) -> &'static str {
    match kind {
        AnomalyKind::ExcessiveSpeed => "median_implied_speed_kn",
        AnomalyKind::AisGap => "max_report_interval_s",
        AnomalyKind::ImpossibleJump => "max_implied_speed_kn",
        AnomalyKind::ZoneViolation => "fixes_in_forbidden_zone",
        AnomalyKind::KinematicOutlier => "kinematic_outlier",
    }
}

pub fn kind_for_step(name: &str) -> Option<AnomalyKind> {
    AnomalyKind::RULE_KINDS.into_iter().find(|k| step_name(*k) == name)
}

/// Per-kind outcome of evaluating one window.
#[derive(Debug, Clone, PartialEq)]
pub struct RuleFinding {
    pub kind: AnomalyKind,
    /// observed / threshold
    pub score: f64,
}

impl RuleModel {
    pub fn with_defaults(zones: Vec<AreaOfInterest>) -> Self {
        Self {
            rules: vec![
                Rule { kind: AnomalyKind::ExcessiveSpeed, threshold: DEFAULT_MAX_SPEED_KN, unit: "kn".into() },
                Rule { kind: AnomalyKind::AisGap, threshold: DEFAULT_GAP_THRESHOLD_S, unit: "s".into() },
                Rule { kind: AnomalyKind::ImpossibleJump, threshold: DEFAULT_JUMP_SPEED_KN, unit: "kn".into() },
                Rule { kind: AnomalyKind::ZoneViolation, threshold: DEFAULT_MIN_ZONE_FIXES, unit: "fixes".into() },
            ],
            zones,
        }
    }

    pub fn validate(&self) -> Result<(), PipelineError> {
        if self.rules.is_empty() {
            return Err(PipelineError::Config("rule model has no rules".into()));
        }
        for r in &self.rules {
            if !(r.threshold > 0.0 && r.threshold.is_finite()) {
                return Err(PipelineError::Config(format!("{} threshold must be positive, got {}", r.kind, r.threshold)));
            }
            if !AnomalyKind::RULE_KINDS.contains(&r.kind) {
                return Err(PipelineError::Config(format!("{} is not a rule kind", r.kind)));
            }
        }
        for z in &self.zones {
            z.validate().map_err(|e| PipelineError::Config(e.to_string()))?;
        }
        Ok(())
    }

    pub fn threshold(&self, kind: AnomalyKind) -> Option<f64> {
        self.rules.iter().find(|r| r.kind == kind).map(|r| r.threshold)
    }

    /// Evaluate every rule in order. Zone counts fire at or above their
    /// threshold, everything else strictly above.
    pub fn evaluate(&self, window: &[GeoFix]) -> (Explanation, Vec<RuleFinding>) {
        let mut steps = Vec::with_capacity(self.rules.len());
        let mut findings = Vec::new();
        let mut fired_text = Vec::new();
        for rule in &self.rules {
            let observed = rule_observation(rule.kind, window, &self.zones);
            let fired = match rule.kind {
                AnomalyKind::ZoneViolation => !self.zones.is_empty() && observed >= rule.threshold,
                _ => observed > rule.threshold,
            };
            if fired {
                findings.push(RuleFinding { kind: rule.kind, score: observed / rule.threshold });
                fired_text.push(format!("{}: {observed:.1} {} vs threshold {}", rule.kind, rule.unit, rule.threshold));
            }
            steps.push(ExplanationStep {
                rule_or_feature: step_name(rule.kind).into(),
                observed,
                threshold_or_baseline: rule.threshold,
                contribution: if fired { 1.0 } else { 0.0 },
                fired,
            });
        }
        let summary = if fired_text.is_empty() { "no rule fired".to_string() } else { fired_text.join("; ") };
        (Explanation { steps, summary }, findings)
    }
}

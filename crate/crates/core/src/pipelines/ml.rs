//! Robust z-score outlier model with exact additive attribution.

use serde::{Deserialize, Serialize};

use super::features::{median, nearest_rank, point_features, PointFeatures, ML_FEATURES};
use super::PipelineError;
use crate::domain::{Explanation, ExplanationStep, GeoFix};

pub const MAD_TO_SIGMA: f64 = 1.4826;
pub const DEFAULT_QUANTILE_Q: f64 = 0.99;
pub const MIN_TRAINING_FIXES: usize = 100;
pub const SCORE_STEP: &str = "anomaly_score";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FeatureFit {
    pub name: String,
    pub center: f64,
    pub scale: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MlModel {
    pub features: Vec<FeatureFit>,
    #[serde(default)]
    pub dropped: Vec<String>,
    pub score_threshold: f64,
    pub quantile_q: f64,
}

impl MlModel {
    /// Fit centers and scales on `points`, then set the threshold to the
    /// nearest-rank `q` quantile of the training scores. Features with zero
    /// MAD are dropped.
    pub fn fit(points: &[PointFeatures], quantile_q: f64) -> Result<Self, PipelineError> {
        if !(0.0..=1.0).contains(&quantile_q) {
            return Err(PipelineError::Config(format!("quantile_q must be in [0, 1], got {quantile_q}")));
        }
        if points.len() < MIN_TRAINING_FIXES {
            return Err(PipelineError::InsufficientData(format!(
                "{} normal training fixes, need at least {MIN_TRAINING_FIXES}",
                points.len()
            )));
        }
        let mut features = Vec::new();
        let mut dropped = Vec::new();
        for name in ML_FEATURES {
            let mut values: Vec<f64> = points.iter().filter_map(|p| p.get(name)).collect();
            let Some(center) = median(&mut values) else {
                dropped.push(name.to_string());
                continue;
            };
            let mut deviations: Vec<f64> = values.iter().map(|v| (v - center).abs()).collect();
            let scale = median(&mut deviations).unwrap_or(0.0) * MAD_TO_SIGMA;
            if scale > 0.0 && scale.is_finite() {
                features.push(FeatureFit { name: name.to_string(), center, scale });
            } else {
                dropped.push(name.to_string());
            }
        }
        if features.is_empty() {
            return Err(PipelineError::Model(format!("every feature is degenerate: {}", dropped.join(", "))));
        }
        let mut model = MlModel { features, dropped, score_threshold: 0.0, quantile_q };
        let mut scores: Vec<f64> = points.iter().map(|p| model.score_point(p)).collect();
        model.score_threshold = nearest_rank(&mut scores, quantile_q).expect("non-empty scores");
        Ok(model)
    }

    pub fn validate(&self) -> Result<(), PipelineError> {
        if self.features.is_empty() {
            return Err(PipelineError::Model("no features".into()));
        }
        if let Some(f) = self.features.iter().find(|f| !(f.scale > 0.0 && f.scale.is_finite() && f.center.is_finite())) {
            return Err(PipelineError::Model(format!("feature {} has scale {}", f.name, f.scale)));
        }
        if !self.score_threshold.is_finite() || self.score_threshold < 0.0 {
            return Err(PipelineError::Model(format!("threshold {} is not finite", self.score_threshold)));
        }
        Ok(())
    }

    /// Sum of absolute robust z-scores; missing features contribute nothing.
    pub fn score_point(&self, p: &PointFeatures) -> f64 {
        self.features
            .iter()
            .map(|f| p.get(&f.name).map_or(0.0, |x| (x - f.center).abs() / f.scale))
            .sum()
    }

    pub fn severity(&self, score: f64) -> f64 {
        if self.score_threshold > 0.0 {
            (score / (2.0 * self.score_threshold)).min(1.0)
        } else if score > 0.0 {
            1.0
        } else {
            0.0
        }
    }

    /// Window feature vector: per-feature median of the point features
    /// inside the window.
    pub fn window_features(window: &[GeoFix]) -> PointFeatures {
        let points: Vec<PointFeatures> = (1..window.len()).map(|i| point_features(window, i)).collect();
        let med = |get: fn(&PointFeatures) -> Option<f64>| median(&mut points.iter().filter_map(get).collect::<Vec<_>>());
        PointFeatures {
            implied_speed_kn: med(|p| p.implied_speed_kn),
            turn_rate_deg_per_min: med(|p| p.turn_rate_deg_per_min),
            reported_sog_kn: med(|p| p.reported_sog_kn),
        }
    }

    /// Score a window. The explanation lists one step per feature with its
    /// |z| contribution, then the overall score against the threshold; the
    /// returned score is the sum of the contributions in step order.
    pub fn explain(&self, window: &[GeoFix]) -> (f64, Explanation) {
        let x = Self::window_features(window);
        let mut steps: Vec<ExplanationStep> = self
            .features
            .iter()
            .map(|f| {
                let observed = x.get(&f.name).unwrap_or(f.center);
                ExplanationStep {
                    rule_or_feature: f.name.clone(),
                    observed,
                    threshold_or_baseline: f.center,
                    contribution: (observed - f.center).abs() / f.scale,
                    fired: false,
                }
            })
            .collect();
        let score: f64 = steps.iter().map(|s| s.contribution).sum();
        let fired = score > self.score_threshold;
        steps.push(ExplanationStep {
            rule_or_feature: SCORE_STEP.into(),
            observed: score,
            threshold_or_baseline: self.score_threshold,
            contribution: 0.0,
            fired,
        });
        let top = steps[..self.features.len()]
            .iter()
            .max_by(|a, b| a.contribution.total_cmp(&b.contribution))
            .map(|s| s.rule_or_feature.clone())
            .unwrap_or_default();
        let summary = if fired {
            format!("kinematic score {score:.2} exceeds {:.2}; largest contribution from {top}", self.score_threshold)
        } else {
            format!("kinematic score {score:.2} within {:.2}", self.score_threshold)
        };
        (score, Explanation { steps, summary })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn pt(speed: f64, turn: f64, sog: f64) -> PointFeatures {
        PointFeatures { implied_speed_kn: Some(speed), turn_rate_deg_per_min: Some(turn), reported_sog_kn: Some(sog) }
    }

    fn training(n: usize) -> Vec<PointFeatures> {
        (0..n).map(|i| pt(10.0 + (i % 7) as f64, (i % 5) as f64, 9.0 + (i % 3) as f64)).collect()
    }

    #[test]
    fn medians_score_zero() {
        let m = MlModel::fit(&training(200), 0.99).unwrap();
        let at_center = PointFeatures {
            implied_speed_kn: Some(m.features[0].center),
            turn_rate_deg_per_min: Some(m.features[1].center),
            reported_sog_kn: Some(m.features[2].center),
        };
        assert_eq!(m.score_point(&at_center), 0.0);
    }

    #[test]
    fn max_quantile_has_no_exceedances() {
        let pts = training(300);
        let m = MlModel::fit(&pts, 1.0).unwrap();
        assert_eq!(pts.iter().filter(|p| m.score_point(p) > m.score_threshold).count(), 0);
    }

    #[test]
    fn degenerate_feature_dropped() {
        let pts: Vec<_> = (0..150).map(|i| pt(10.0 + (i % 4) as f64, (i % 3) as f64, 12.0)).collect();
        let m = MlModel::fit(&pts, 0.99).unwrap();
        assert_eq!(m.dropped, vec!["reported_sog_kn".to_string()]);
        assert_eq!(m.features.len(), 2);
    }

    #[test]
    fn all_degenerate_is_error() {
        let pts: Vec<_> = (0..150).map(|_| pt(10.0, 0.0, 12.0)).collect();
        assert!(matches!(MlModel::fit(&pts, 0.99), Err(PipelineError::Model(_))));
    }

    #[test]
    fn too_few_points() {
        assert!(matches!(MlModel::fit(&training(99), 0.99), Err(PipelineError::InsufficientData(_))));
    }

    #[test]
    fn scale_is_scaled_mad() {
        // Values 1..=9: median 5, absolute deviations 0..4 twice, MAD 2.
        let pts: Vec<_> = (0..108).map(|i| pt((i % 9 + 1) as f64, (i % 2) as f64, (i % 3) as f64)).collect();
        let m = MlModel::fit(&pts, 0.5).unwrap();
        assert_eq!(m.features[0].center, 5.0);
        assert!((m.features[0].scale - 2.0 * 1.4826).abs() < 1e-12);
    }

    proptest! {
        #[test]
        fn exceedances_bounded_by_quantile(
            raw in proptest::collection::vec((0.0f64..40.0, 0.0f64..30.0, 0.0f64..25.0), 100..400),
            q in 0.5f64..=1.0,
        ) {
            let pts: Vec<_> = raw.iter().map(|&(a, b, c)| pt(a, b, c)).collect();
            let m = MlModel::fit(&pts, q).unwrap();
            let above = pts.iter().filter(|p| m.score_point(p) > m.score_threshold).count();
            let allowed = pts.len() - ((q * pts.len() as f64).ceil() as usize).max(1);
            prop_assert!(above <= allowed, "{} above, allowed {}", above, allowed);
        }
    }
}

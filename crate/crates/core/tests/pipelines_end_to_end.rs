use og_core::domain::{AnomalyKind, Verdict};
use og_core::pipelines::batch::load_detector;
use og_core::pipelines::eval::{ml_false_positive_rate, pooled_recall, recall_by_kind};
use og_core::pipelines::train::{detect_all, CALIBRATE};
use og_core::pipelines::{synth_generate, train_ml, train_rule, Hyperparams, SynthParams, TrainOptions};
use og_core::store::{DataDir, ModelRef};
use serde_json::json;

#[test]
fn seeded_snapshot_detection_quality() {
    let tmp = tempfile::tempdir().unwrap();
    let dir = DataDir::new(tmp.path());
    let out = synth_generate(&SynthParams::new(42, 10, 24 * 3600), &dir.data_store()).unwrap();
    let snap = out.manifest.clone().unwrap().snapshot_id;
    let opts = TrainOptions { created_ts: Some(1_700_000_000), ..Default::default() };
    let hyper = Hyperparams::from([("max_speed_kn".to_string(), json!(CALIBRATE))]);
    let rule = train_rule(&dir, &snap, &hyper, &opts).unwrap();
    let ml = train_ml(&dir, &snap, &Hyperparams::new(), &opts).unwrap();

    let (_, rule_det) = load_detector(&dir, &ModelRef::latest(&rule.model_id.name)).unwrap();
    let found = detect_all(&rule_det, &out.fixes).unwrap();
    let per_kind = recall_by_kind(&found, &out.labels, &AnomalyKind::RULE_KINDS);
    eprintln!("rule recall {per_kind:?}");
    assert!(pooled_recall(&per_kind).unwrap() >= 0.9);

    let (_, ml_det) = load_detector(&dir, &ModelRef::latest(&ml.model_id.name)).unwrap();
    let ml_found = detect_all(&ml_det, &out.fixes).unwrap();
    let kin = recall_by_kind(&ml_found, &out.labels, &[AnomalyKind::KinematicOutlier]);
    let fp = ml_false_positive_rate(&ml_det, &out.fixes, &out.labels).unwrap();
    eprintln!("ml recall {kin:?} fp {fp:?}");
    assert!(kin[0].rate().unwrap() >= 0.9);
    assert!(fp.rate() <= 0.02);

    for a in found.iter().chain(&ml_found) {
        assert!(a.explanation.has_fired_step());
    }
    assert!(out.labels.iter().any(|l| l.verdict == Verdict::Normal));
}

use std::ffi::{c_char, CStr, CString};
use std::path::{Path, PathBuf};
use std::process::Command;
use std::ptr;

use og_ffi::*;
use serde_json::Value;

fn owned(p: *mut c_char) -> String {
    assert!(!p.is_null());
    let s = unsafe { CStr::from_ptr(p) }.to_str().unwrap().to_string();
    unsafe { og_string_free(p) };
    s
}

fn last_error() -> Option<String> {
    let p = og_last_error();
    (!p.is_null()).then(|| unsafe { CStr::from_ptr(p) }.to_string_lossy().into_owned())
}

fn open(path: &Path) -> *mut OgDataDir {
    let c = CString::new(path.to_str().unwrap()).unwrap();
    let mut dir = ptr::null_mut();
    assert_eq!(unsafe { og_data_dir_open(c.as_ptr(), false, &mut dir) }, OgStatus::Ok);
    dir
}

#[test]
fn pipeline_through_the_abi() {
    let tmp = tempfile::tempdir().unwrap();
    let dir = open(tmp.path());
    unsafe {
        let mut snap = ptr::null_mut();
        assert_eq!(og_generate(dir, 7, 4, 86_400, &mut snap), OgStatus::Ok);
        let snap = CString::new(owned(snap)).unwrap();

        let hyper = CString::new(r#"{"max_speed_kn":"calibrate"}"#).unwrap();
        let created = 1_700_000_000i64;
        let mut model = ptr::null_mut();
        assert_eq!(og_train(dir, OgTrainer::Rule, snap.as_ptr(), hyper.as_ptr(), &created, &mut model), OgStatus::Ok);
        assert_eq!(owned(model), "rule-detector:1");
        assert_eq!(og_train(dir, OgTrainer::Ml, snap.as_ptr(), ptr::null(), &created, &mut model), OgStatus::Ok);
        assert_eq!(owned(model), "ml-detector:1");

        let rule = CString::new("rule-detector:1").unwrap();
        let mut report = ptr::null_mut();
        assert_eq!(og_batch_predict(dir, rule.as_ptr(), snap.as_ptr(), &mut report), OgStatus::Ok);
        let report: Value = serde_json::from_str(&owned(report)).unwrap();
        assert_eq!(report["model_id"], "rule-detector:1");
        let written = report["written"].as_u64().unwrap();

        // The detector handle sees the same fixes and finds the same anomalies.
        let mut det = ptr::null_mut();
        assert_eq!(og_detector_open(dir, rule.as_ptr(), &mut det), OgStatus::Ok);
        assert_eq!(CStr::from_ptr(og_detector_model_id(det)).to_str().unwrap(), "rule-detector:1");
        let train = std::fs::read_to_string(tmp.path().join("data").join(snap.to_str().unwrap()).join("train.jsonl")).unwrap();
        let fixes: Vec<Value> = train.lines().map(|l| serde_json::from_str(l).unwrap()).collect();
        let fixes = CString::new(serde_json::to_string(&fixes).unwrap()).unwrap();
        let mut found = ptr::null_mut();
        assert_eq!(og_detector_detect(det, fixes.as_ptr(), &mut found), OgStatus::Ok);
        let found: Vec<Value> = serde_json::from_str(&owned(found)).unwrap();
        assert_eq!(found.len() as u64, written);
        og_detector_free(det);
    }
    unsafe { og_data_dir_free(dir) };
}

#[test]
fn failures_map_to_status_codes_and_messages() {
    let tmp = tempfile::tempdir().unwrap();
    let dir = open(tmp.path());
    unsafe {
        let mut out = ptr::null_mut();
        let missing = CString::new("nope").unwrap();
        assert_eq!(og_train(dir, OgTrainer::Rule, missing.as_ptr(), ptr::null(), ptr::null(), &mut out), OgStatus::NotFound);
        assert!(last_error().unwrap().contains("nope"));
        assert!(out.is_null());

        assert_eq!(og_train(dir, OgTrainer::Rule, ptr::null(), ptr::null(), ptr::null(), &mut out), OgStatus::NullArgument);
        assert_eq!(og_generate(ptr::null(), 1, 1, 10, &mut out), OgStatus::NullArgument);
        assert_eq!(og_generate(dir, 1, 1, 86_400, ptr::null_mut()), OgStatus::NullArgument);

        let bad_json = CString::new("{not json").unwrap();
        assert_eq!(og_train(dir, OgTrainer::Ml, missing.as_ptr(), bad_json.as_ptr(), ptr::null(), &mut out), OgStatus::InvalidArgument);

        // Default rates need more than a few fixes per track.
        assert_eq!(og_generate(dir, 1, 2, 600, &mut out), OgStatus::InvalidArgument);

        let bad_ref = CString::new("../escape").unwrap();
        let mut det = ptr::null_mut();
        assert_eq!(og_detector_open(dir, bad_ref.as_ptr(), &mut det), OgStatus::InvalidArgument);
        assert_eq!(og_detector_open(dir, missing.as_ptr(), &mut det), OgStatus::NotFound);
        assert!(det.is_null());

        let not_utf8 = [0xffu8, 0xfe, 0];
        assert_eq!(og_data_dir_open(not_utf8.as_ptr().cast(), false, &mut ptr::null_mut()), OgStatus::InvalidArgument);

        // Success clears the message.
        assert_eq!(og_generate(dir, 1, 2, 86_400, &mut out), OgStatus::Ok);
        og_string_free(out);
        assert!(last_error().is_none());

        og_detector_free(ptr::null_mut());
        og_data_dir_free(dir);
    }
}

#[test]
fn detector_rejects_bad_fix_documents() {
    let tmp = tempfile::tempdir().unwrap();
    let dir = open(tmp.path());
    unsafe {
        let mut snap = ptr::null_mut();
        assert_eq!(og_generate(dir, 3, 3, 86_400, &mut snap), OgStatus::Ok);
        let snap = CString::new(owned(snap)).unwrap();
        let mut model = ptr::null_mut();
        assert_eq!(og_train(dir, OgTrainer::Ml, snap.as_ptr(), ptr::null(), ptr::null(), &mut model), OgStatus::Ok);
        let model = CString::new(owned(model)).unwrap();
        let mut det = ptr::null_mut();
        assert_eq!(og_detector_open(dir, model.as_ptr(), &mut det), OgStatus::Ok);
        let mut out = ptr::null_mut();
        for doc in ["{}", "[1,2]", r#"[{"object_id":"a","lat":95,"lon":0,"timestamp":0,"source":"sensor","object_type":"vessel"}]"#] {
            let c = CString::new(doc).unwrap();
            assert_eq!(og_detector_detect(det, c.as_ptr(), &mut out), OgStatus::InvalidArgument, "{doc}");
        }
        og_detector_free(det);
        og_data_dir_free(dir);
    }
}

#[test]
fn haversine_and_version() {
    assert!((og_haversine_km(0.0, 0.0, 0.0, 1.0) - 111.195).abs() < 1e-3);
    assert!(og_haversine_km(0.0, 181.0, 0.0, 0.0).is_nan());
    let v = unsafe { CStr::from_ptr(og_version()) }.to_str().unwrap();
    assert_eq!(v, env!("CARGO_PKG_VERSION"));
}

#[test]
fn cli_runs_in_process() {
    let tmp = tempfile::tempdir().unwrap();
    let args: Vec<CString> = ["--data-dir", tmp.path().to_str().unwrap(), "--json", "generate", "--objects", "2"]
        .iter()
        .map(|s| CString::new(*s).unwrap())
        .collect();
    let argv: Vec<*const c_char> = args.iter().map(|a| a.as_ptr()).collect();
    let mut code = -1;
    let mut out = ptr::null_mut();
    assert_eq!(unsafe { og_cli_run(argv.len(), argv.as_ptr(), &mut code, &mut out) }, OgStatus::Ok);
    assert_eq!(code, 0);
    let last: Value = serde_json::from_str(owned(out).lines().last().unwrap()).unwrap();
    assert_eq!(last["ok"], true);

    let bogus = [CString::new("bogus").unwrap()];
    let argv: Vec<*const c_char> = bogus.iter().map(|a| a.as_ptr()).collect();
    assert_eq!(unsafe { og_cli_run(1, argv.as_ptr(), &mut code, &mut out) }, OgStatus::Ok);
    unsafe { og_string_free(out) };
    assert_eq!(code, 2);
    assert!(last_error().unwrap().contains("unrecognized subcommand"));
}

fn target_dir() -> PathBuf {
    // target/<profile>/deps/<test binary>
    let exe = std::env::current_exe().unwrap();
    exe.parent().and_then(Path::parent).unwrap().to_path_buf()
}

#[test]
fn c_program_builds_against_the_header() {
    let crate_dir = Path::new(env!("CARGO_MANIFEST_DIR"));
    let lib = target_dir().join("libog_ffi.a");
    assert!(lib.is_file(), "static library not built at {}", lib.display());
    let tmp = tempfile::tempdir().unwrap();
    let exe = tmp.path().join("smoke");
    let status = Command::new("cc")
        .arg("-std=c11")
        .arg("-Wall")
        .arg("-Werror")
        .arg("-I")
        .arg(crate_dir.join("include"))
        .arg(crate_dir.join("tests/c/smoke.c"))
        .arg(&lib)
        .args(["-lpthread", "-ldl", "-lm", "-o"])
        .arg(&exe)
        .status()
        .expect("a C compiler named cc");
    assert!(status.success());
    let out = Command::new(&exe).arg(tmp.path().join("data")).output().unwrap();
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    assert_eq!(String::from_utf8_lossy(&out.stdout).trim(), "ok");
}

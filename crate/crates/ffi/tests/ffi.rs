use std::ffi::{CStr, CString};
use std::path::PathBuf;
use std::process::Command;
use std::ptr;

use iptree_ffi::*;

const COIN: &str = r#"{"schema":1,"states":["H","T"],"model":{"kind":"homogeneous","credal":[[0.6,0.4],[0.4,0.6]]}}"#;

fn last_error() -> String {
    let p = iptree_last_error();
    assert!(!p.is_null());
    unsafe { CStr::from_ptr(p) }.to_string_lossy().into_owned()
}

fn coin() -> *mut IptreeModel {
    let json = CString::new(COIN).unwrap();
    let mut model = ptr::null_mut();
    assert_eq!(unsafe { iptree_model_from_json(json.as_ptr(), &mut model) }, IptreeStatus::Ok);
    assert!(iptree_last_error().is_null());
    model
}

fn compile(model: *const IptreeModel, expr: &str) -> Result<*mut IptreeGamble, IptreeStatus> {
    let expr = CString::new(expr).unwrap();
    let mut g = ptr::null_mut();
    match unsafe { iptree_gamble_compile(model, expr.as_ptr(), &mut g) } {
        IptreeStatus::Ok => Ok(g),
        status => Err(status),
    }
}

#[test]
fn upper_and_lower_of_a_finitary_gamble() {
    let model = coin();
    unsafe {
        assert_eq!(iptree_model_state_count(model), 2);
        let g = compile(model, "ind(X[1] == H) + ind(X[2] == H)").unwrap();
        assert_eq!(iptree_gamble_depth(g), 2);

        let (mut up, mut lo) = (0.0, 0.0);
        assert_eq!(iptree_upper(model, g, ptr::null(), 0, &mut up), IptreeStatus::Ok);
        assert_eq!(iptree_lower(model, g, ptr::null(), 0, &mut lo), IptreeStatus::Ok);
        assert!((up - 1.2).abs() < 1e-12);
        assert!((lo - 0.8).abs() < 1e-12);

        let tails = [1usize];
        assert_eq!(iptree_upper(model, g, tails.as_ptr(), 1, &mut up), IptreeStatus::Ok);
        assert!((up - 0.6).abs() < 1e-12);

        iptree_gamble_free(g);
        iptree_model_free(model);
    }
}

#[test]
fn hitting_time_and_probability() {
    let model = coin();
    let target = [1usize];
    let (mut up, mut lo) = (IptreeApprox::default(), IptreeApprox::default());
    unsafe {
        let status = iptree_hitting_time(model, target.as_ptr(), 1, ptr::null(), 0, 1e-9, 80, &mut up, &mut lo);
        assert_eq!(status, IptreeStatus::Ok);
        assert!((up.value - 2.5).abs() < 1e-8, "{up:?}");
        assert!((lo.value - 5.0 / 3.0).abs() < 1e-8, "{lo:?}");
        assert!(up.converged && lo.converged);
        assert!(up.converged_at > 0 && up.iterations == up.converged_at + 1);

        let status = iptree_hitting_probability(model, target.as_ptr(), 1, ptr::null(), 0, 1e-9, 40, &mut up, &mut lo);
        assert_eq!(status, IptreeStatus::Ok);
        assert!((up.value - 1.0).abs() < 1e-6 && (lo.value - 1.0).abs() < 1e-6);
        iptree_model_free(model);
    }
}

#[test]
fn errors_set_status_and_message() {
    let model = coin();
    unsafe {
        assert_eq!(compile(model, "ind(X[1] == Q)").unwrap_err(), IptreeStatus::Parse);
        assert!(last_error().contains("Q"), "{}", last_error());

        assert_eq!(compile(ptr::null(), "1").unwrap_err(), IptreeStatus::NullPointer);

        let bad = CString::new(r#"{"schema":1,"states":["H"],"model":{"kind":"homogeneous","credal":[[0.5]]}}"#).unwrap();
        let mut m = ptr::null_mut();
        assert_eq!(iptree_model_from_json(bad.as_ptr(), &mut m), IptreeStatus::Parse);
        assert!(m.is_null());
        assert!(last_error().contains("model.credal"), "{}", last_error());

        let g = compile(model, "ind(X[1] == H)").unwrap();
        let off = [5usize];
        let mut out = 0.0;
        assert_eq!(iptree_upper(model, g, off.as_ptr(), 1, &mut out), IptreeStatus::InvalidInput);
        assert_eq!(iptree_upper(model, g, ptr::null(), 1, &mut out), IptreeStatus::NullPointer);

        let (mut up, mut lo) = (IptreeApprox::default(), IptreeApprox::default());
        let target = [1usize];
        let status = iptree_hitting_time(model, target.as_ptr(), 1, ptr::null(), 0, -1.0, 10, &mut up, &mut lo);
        assert_eq!(status, IptreeStatus::InvalidInput);

        let invalid_utf8 = [0xffu8, 0];
        let mut g2 = ptr::null_mut();
        assert_eq!(
            iptree_gamble_compile(model, invalid_utf8.as_ptr().cast(), &mut g2),
            IptreeStatus::InvalidUtf8
        );

        iptree_gamble_free(g);
        iptree_model_free(model);
        iptree_model_free(ptr::null_mut());
        iptree_gamble_free(ptr::null_mut());
        assert_eq!(iptree_model_state_count(ptr::null()), 0);
    }
}

#[test]
fn query_json_round_trip() {
    let query = CString::new(format!(
        r#"{{"schema":1,"model":{COIN},"queries":[{{"kind":"eval","expr":"ind(X[1]==H)"}},{{"kind":"eval","expr":"ind(X[1]==Z)"}}]}}"#
    ))
    .unwrap();
    let mut out = ptr::null_mut();
    unsafe {
        assert_eq!(iptree_eval_query_json(ptr::null(), query.as_ptr(), &mut out), IptreeStatus::Ok);
        let report: serde_json::Value = serde_json::from_str(CStr::from_ptr(out).to_str().unwrap()).unwrap();
        iptree_string_free(out);
        assert_eq!(report["errors"], 1);
        assert_eq!(report["results"][0]["result"]["upper"], 0.6);
        assert_eq!(report["results"][1]["error"]["kind"], "syntax");

        let broken = CString::new("{").unwrap();
        assert_eq!(iptree_eval_query_json(ptr::null(), broken.as_ptr(), &mut out), IptreeStatus::Parse);
    }
}

fn header() -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("include").join("iptree.h")
}

#[test]
fn header_declares_the_interface() {
    let text = std::fs::read_to_string(header()).unwrap();
    for name in [
        "typedef struct IptreeModel IptreeModel",
        "typedef struct IptreeGamble IptreeGamble",
        "IPTREE_STATUS_OK = 0",
        "IPTREE_STATUS_PANIC",
        "iptree_model_from_json",
        "iptree_model_free",
        "iptree_model_state_count",
        "iptree_gamble_compile",
        "iptree_gamble_free",
        "iptree_upper",
        "iptree_lower",
        "iptree_hitting_time",
        "iptree_hitting_probability",
        "iptree_eval_query_json",
        "iptree_string_free",
        "iptree_last_error",
    ] {
        assert!(text.contains(name), "header lacks {name}");
    }
}

#[test]
fn header_is_valid_c() {
    let Ok(cc) = Command::new("cc").arg("--version").output() else {
        eprintln!("no C compiler; skipping");
        return;
    };
    if !cc.status.success() {
        return;
    }
    let dir = tempfile::tempdir().unwrap();
    let src = dir.path().join("use_header.c");
    std::fs::write(
        &src,
        "#include \"iptree.h\"\nint main(void) { IptreeModel *m = 0; return (int)iptree_model_state_count(m); }\n",
    )
    .unwrap();
    let status = Command::new("cc")
        .args(["-std=c99", "-Wall", "-Werror", "-fsyntax-only", "-I"])
        .arg(header().parent().unwrap())
        .arg(&src)
        .status()
        .unwrap();
    assert!(status.success());
}

use std::ffi::{CStr, CString};
use std::ptr;

use locq_ffi::*;

fn last_error() -> String {
    let p = locq_last_error();
    assert!(!p.is_null());
    unsafe { CStr::from_ptr(p) }.to_string_lossy().into_owned()
}

fn state(spec: &str) -> *mut LocqState {
    let spec = CString::new(spec).unwrap();
    let mut s = ptr::null_mut();
    assert_eq!(
        unsafe { locq_state_from_spec(spec.as_ptr(), &mut s) },
        LocqStatus::Ok
    );
    s
}

#[test]
fn version_matches_core() {
    let v = unsafe { CStr::from_ptr(locq_version()) };
    assert_eq!(v.to_str().unwrap(), locq::VERSION);
}

#[test]
fn amplitudes_round_trip_after_normalization() {
    let re = [1.0, 0.0, 0.0, 1.0];
    let im = [0.0; 4];
    let mut s = ptr::null_mut();
    unsafe {
        assert_eq!(
            locq_state_from_amplitudes(2, re.as_ptr(), im.as_ptr(), &mut s),
            LocqStatus::Ok
        );
        assert_eq!(locq_state_num_qubits(s), 2);
        let (mut r, mut i) = ([0.0; 4], [0.0; 4]);
        assert_eq!(
            locq_state_amplitudes(s, r.as_mut_ptr(), i.as_mut_ptr(), 4),
            LocqStatus::Ok
        );
        let h = 0.5f64.sqrt();
        assert!((r[0] - h).abs() < 1e-15 && (r[3] - h).abs() < 1e-15 && r[1] == 0.0);
        assert_eq!(
            locq_state_amplitudes(s, r.as_mut_ptr(), i.as_mut_ptr(), 3),
            LocqStatus::Config
        );
        locq_state_free(s);
    }
}

#[test]
fn zero_vector_is_a_config_error() {
    let z = [0.0; 2];
    let mut s = ptr::null_mut();
    let st = unsafe { locq_state_from_amplitudes(1, z.as_ptr(), z.as_ptr(), &mut s) };
    assert_eq!(st, LocqStatus::Config);
    assert!(s.is_null());
    assert!(!last_error().is_empty());
}

#[test]
fn null_arguments_are_reported() {
    let mut s = ptr::null_mut();
    assert_eq!(
        unsafe { locq_state_from_spec(ptr::null(), &mut s) },
        LocqStatus::NullPointer
    );
    assert_eq!(unsafe { locq_state_num_qubits(ptr::null()) }, 0);
    let mut g = 0.0;
    assert_eq!(
        unsafe { locq_fidelity_gap(ptr::null(), 1, &mut g) },
        LocqStatus::NullPointer
    );
    unsafe {
        locq_state_free(ptr::null_mut());
        locq_string_free(ptr::null_mut());
        locq_experiment_free(ptr::null_mut());
    }
}

#[test]
fn bad_spec_json_names_the_problem() {
    let spec = CString::new(r#"{"family": "ghz"}"#).unwrap();
    let mut s = ptr::null_mut();
    assert_eq!(
        unsafe { locq_state_from_spec(spec.as_ptr(), &mut s) },
        LocqStatus::Config
    );
    assert!(last_error().contains('n'));
}

#[test]
fn ghz_tail_in_x_leaves_a_bell_pair() {
    // Measuring the tail of a GHZ state in X leaves a Bell pair up to phase.
    let s = state(r#"{"family": "ghz", "n": 4}"#);
    let a = [0usize, 1];
    let oracle = CString::new(r#"{"kind": "separable", "cut": [0]}"#).unwrap();
    let basis = CString::new("XX").unwrap();
    let mut v = -1.0;
    let st = unsafe {
        locq_localizable_quantumness(s, a.as_ptr(), 2, oracle.as_ptr(), basis.as_ptr(), &mut v)
    };
    assert_eq!(st, LocqStatus::Ok, "{}", last_error());
    assert!((v - 0.5).abs() < 1e-12, "{v}");
    unsafe { locq_state_free(s) };
}

#[test]
fn fidelity_gap_of_product_state_is_reported() {
    let s = state(r#"{"family": "zero", "n": 3}"#);
    let mut g = 0.0;
    let st = unsafe { locq_fidelity_gap(s, 1, &mut g) };
    assert!(st == LocqStatus::Ok || st == LocqStatus::Runtime, "{st:?}");
    unsafe { locq_state_free(s) };
}

#[test]
fn mom_parameters_follow_the_layout_rule() {
    let (mut b, mut k) = (0usize, 0usize);
    assert_eq!(
        unsafe { locq_mom_parameters(2.0, 0.1, 0.01, &mut b, &mut k) },
        LocqStatus::Ok
    );
    assert_eq!(b, (6.0f64 * 2.0 / 0.01).ceil() as usize);
    assert_eq!(k, (4.5 * 100f64.ln()).ceil() as usize);
    assert_eq!(
        unsafe { locq_mom_parameters(2.0, 0.1, 1.5, &mut b, &mut k) },
        LocqStatus::Config
    );
}

const CERTIFY: &str = r#"{
  "schema_version": 1,
  "seed": 3,
  "experiment": {
    "kind": "certify",
    "params": {
      "target": {"family": "bell"},
      "a": [0],
      "oracle": {"kind": "separable", "cut": [0]},
      "gap": 0.3,
      "trials": 200
    }
  }
}"#;

fn run(exp: *const LocqExperiment, workers: usize, dir: Option<&CString>) -> String {
    let mut out = ptr::null_mut();
    let d = dir.map_or(ptr::null(), |d| d.as_ptr());
    let st = unsafe { locq_experiment_run(exp, workers, d, &mut out) };
    assert_eq!(st, LocqStatus::Ok, "{}", last_error());
    let s = unsafe { CStr::from_ptr(out) }
        .to_string_lossy()
        .into_owned();
    unsafe { locq_string_free(out) };
    s
}

fn strip(s: &str) -> serde_json::Value {
    let mut v: serde_json::Value = serde_json::from_str(s).unwrap();
    locq::runner::strip_wall_time(&mut v);
    v
}

#[test]
fn experiment_runs_deterministically_and_writes_artifacts() {
    let json = CString::new(CERTIFY).unwrap();
    let mut exp = ptr::null_mut();
    assert_eq!(
        unsafe { locq_experiment_from_json(json.as_ptr(), &mut exp) },
        LocqStatus::Ok,
        "{}",
        last_error()
    );
    let a = run(exp, 1, None);
    let b = run(exp, 3, None);
    assert_eq!(strip(&a), strip(&b));
    assert_eq!(strip(&a)["seed"], 3);

    assert_eq!(unsafe { locq_experiment_set_seed(exp, 9) }, LocqStatus::Ok);
    let tmp = tempfile::tempdir().unwrap();
    let dir = CString::new(tmp.path().to_str().unwrap()).unwrap();
    let c = run(exp, 0, Some(&dir));
    assert_eq!(strip(&c)["seed"], 9);
    assert!(tmp.path().join("summary.json").exists());
    unsafe { locq_experiment_free(exp) };
}

#[test]
fn invalid_experiment_is_a_config_error() {
    let json = CString::new(CERTIFY.replace("\"gap\": 0.3", "\"gap\": 0.3, \"bogus\": 1")).unwrap();
    let mut exp = ptr::null_mut();
    assert_eq!(
        unsafe { locq_experiment_from_json(json.as_ptr(), &mut exp) },
        LocqStatus::Config
    );
    assert!(exp.is_null());
    assert!(last_error().contains("bogus"));
}

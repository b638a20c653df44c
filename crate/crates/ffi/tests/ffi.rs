use std::ffi::{CStr, CString};
use std::path::PathBuf;
use std::process::Command;
use std::ptr;

use plateau_ffi::*;

const RX: &str = r#"{"n_system":1,"gates":[{"type":"rotation","generator":"X0","param":{"free":0}}]}"#;
const Z0: &str = r#"{"terms":[{"coeff":1.0,"pauli":"Z0"}]}"#;

fn cstr(s: &str) -> CString {
    CString::new(s).unwrap()
}

fn last_error() -> String {
    let p = plateau_last_error();
    assert!(!p.is_null());
    unsafe { CStr::from_ptr(p) }.to_string_lossy().into_owned()
}

#[test]
fn exact_and_sampled_estimates() {
    unsafe {
        let mut c = ptr::null_mut();
        assert_eq!(plateau_circuit_from_json(cstr(RX).as_ptr(), &mut c), PlateauStatus::Ok);
        let mut o = ptr::null_mut();
        assert_eq!(plateau_observable_from_json(cstr(Z0).as_ptr(), 0, &mut o), PlateauStatus::Ok);
        assert_eq!(plateau_circuit_num_params(c), 1);

        let mut e = ptr::null_mut();
        assert_eq!(plateau_estimate(c, o, 0, 3, PLATEAU_ALL_PARAMS, &mut e), PlateauStatus::Ok);
        assert_eq!(plateau_estimate_len(e), 2);
        let mut row = PlateauEstimateRow { quantity: 9, param_index: 9, mean: 0.0, std_error: 1.0, samples: 1, seed: 0 };
        assert_eq!(plateau_estimate_row(e, 0, &mut row), PlateauStatus::Ok);
        assert_eq!((row.quantity, row.param_index, row.samples, row.seed), (0, -1, 0, 3));
        assert!((row.mean - 0.5).abs() < 1e-15);
        assert_eq!(plateau_estimate_row(e, 1, &mut row), PlateauStatus::Ok);
        assert_eq!((row.quantity, row.param_index), (1, 0));
        assert!((row.mean - 0.5).abs() < 1e-15);
        assert_eq!(plateau_estimate_row(e, 2, &mut row), PlateauStatus::Invalid);
        plateau_estimate_free(e);

        let mut e = ptr::null_mut();
        assert_eq!(plateau_estimate(c, o, 4000, 1, 0, &mut e), PlateauStatus::Ok);
        assert_eq!(plateau_estimate_len(e), 1);
        assert_eq!(plateau_estimate_row(e, 0, &mut row), PlateauStatus::Ok);
        assert_eq!(row.samples, 4000);
        assert!((row.mean - 0.5).abs() < 4.0 * row.std_error + 1e-12);
        plateau_estimate_free(e);
        plateau_observable_free(o);
        plateau_circuit_free(c);
    }
}

#[test]
fn gadget_transform_and_bound() {
    unsafe {
        let mut c = ptr::null_mut();
        assert_eq!(plateau_circuit_from_json(cstr(RX).as_ptr(), &mut c), PlateauStatus::Ok);
        let mut o = ptr::null_mut();
        assert_eq!(plateau_observable_from_json(cstr(Z0).as_ptr(), 1, &mut o), PlateauStatus::Ok);
        let mut lb = 0.0;
        assert_eq!(plateau_variance_lower_bound(c, o, &mut lb), PlateauStatus::MissingGadgetLayer);
        assert!(last_error().contains("gadget"));

        let mut m = ptr::null_mut();
        assert_eq!(plateau_insert_gadget_layer(c, 1, cstr("fixed").as_ptr(), &mut m), PlateauStatus::Ok);
        assert_eq!(plateau_circuit_num_qubits(m), 2);
        assert_eq!(plateau_circuit_num_params(m), 4);
        assert_eq!(plateau_variance_lower_bound(m, o, &mut lb), PlateauStatus::Ok);
        assert!((lb - 1.0 / 12.0).abs() < 1e-15);

        let mut json = ptr::null_mut();
        assert_eq!(plateau_circuit_to_json(m, &mut json), PlateauStatus::Ok);
        let mut back = ptr::null_mut();
        assert_eq!(plateau_circuit_from_json(json, &mut back), PlateauStatus::Ok);
        assert_eq!(plateau_circuit_num_params(back), 4);
        plateau_string_free(json);
        assert_eq!(plateau_insert_gadget_layer(c, 1, cstr("nope").as_ptr(), &mut back), PlateauStatus::Invalid);
        plateau_circuit_free(back);
        plateau_circuit_free(m);
        plateau_circuit_free(c);
        plateau_observable_free(o);
    }
}

#[test]
fn error_codes() {
    unsafe {
        let mut c = ptr::null_mut();
        assert_eq!(plateau_circuit_from_json(ptr::null(), &mut c), PlateauStatus::NullArgument);
        assert_eq!(plateau_circuit_from_json(cstr("{").as_ptr(), &mut c), PlateauStatus::Invalid);
        assert!(c.is_null());
        let bad = cstr(r#"{"n_system":1,"gates":[{"type":"rotation","generator":"X4","param":{"free":0}}]}"#);
        assert_eq!(plateau_circuit_from_json(bad.as_ptr(), &mut c), PlateauStatus::Invalid);
        assert!(!last_error().is_empty());
        assert_eq!(plateau_circuit_from_json(cstr(RX).as_ptr(), ptr::null_mut()), PlateauStatus::NullArgument);
        let invalid_utf8 = [0xffu8, 0];
        assert_eq!(plateau_circuit_from_json(invalid_utf8.as_ptr().cast(), &mut c), PlateauStatus::InvalidUtf8);

        let gates: Vec<String> = (0..12).map(|i| format!(r#"{{"type":"rotation","generator":"X0","param":{{"free":{i}}}}}"#)).collect();
        let deep = cstr(&format!(r#"{{"n_system":1,"gates":[{}]}}"#, gates.join(",")));
        assert_eq!(plateau_circuit_from_json(deep.as_ptr(), &mut c), PlateauStatus::Ok);
        let mut o = ptr::null_mut();
        assert_eq!(plateau_observable_from_json(cstr(Z0).as_ptr(), 0, &mut o), PlateauStatus::Ok);
        let mut e = ptr::null_mut();
        assert_eq!(plateau_estimate(c, o, 0, 0, 0, &mut e), PlateauStatus::CapExceeded);
        assert!(last_error().contains("--samples"));
        plateau_observable_free(o);
        plateau_circuit_free(c);
        plateau_circuit_free(ptr::null_mut());
        assert_eq!(plateau_circuit_num_params(ptr::null()), 0);

        let mut d = 1.0;
        assert_eq!(plateau_two_design_deviation(cstr("X0 X1").as_ptr(), &mut d), PlateauStatus::Ok);
        assert!(d <= 1e-12);
        assert_eq!(plateau_two_design_deviation(cstr("I").as_ptr(), &mut d), PlateauStatus::Invalid);
        assert_eq!(plateau_two_design_deviation(cstr("Q0").as_ptr(), &mut d), PlateauStatus::Parse);
        assert!(!CStr::from_ptr(plateau_version()).to_bytes().is_empty());
    }
}

#[test]
fn header_declares_api() {
    let header = std::fs::read_to_string(PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("include/plateau.h")).unwrap();
    for name in ["plateau_circuit_from_json", "plateau_estimate_row", "plateau_last_error", "PLATEAU_STATUS_CAP_EXCEEDED", "typedef struct PlateauCircuit PlateauCircuit"] {
        assert!(header.contains(name), "{name}");
    }
}

/// Compiles and runs a C client against the generated header and static library.
#[test]
fn c_client_links() {
    let Ok(exe) = std::env::current_exe() else { return };
    let profile_dir = exe.parent().and_then(|d| d.parent()).unwrap().to_path_buf();
    let lib = profile_dir.join("libplateau_ffi.a");
    if !lib.exists() || Command::new("cc").arg("--version").output().is_err() {
        eprintln!("skipping C client: static library or C compiler not found");
        return;
    }
    let dir = tempfile::tempdir().unwrap();
    let src = dir.path().join("client.c");
    let bin = dir.path().join("client");
    std::fs::write(
        &src,
        r#"#include <stdio.h>
#include <math.h>
#include "plateau.h"
int main(void) {
    PlateauCircuit *c = NULL;
    PlateauObservable *o = NULL;
    PlateauEstimate *e = NULL;
    PlateauEstimateRow row;
    const char *circ = "{\"n_system\":1,\"gates\":[{\"type\":\"rotation\",\"generator\":\"X0\",\"param\":{\"free\":0}}]}";
    const char *obs = "{\"terms\":[{\"coeff\":1.0,\"pauli\":\"Z0\"}]}";
    if (plateau_circuit_from_json(circ, &c) != PLATEAU_STATUS_OK) return 1;
    if (plateau_observable_from_json(obs, 0, &o) != PLATEAU_STATUS_OK) return 2;
    if (plateau_estimate(c, o, 0, 0, PLATEAU_ALL_PARAMS, &e) != PLATEAU_STATUS_OK) return 3;
    if (plateau_estimate_row(e, 1, &row) != PLATEAU_STATUS_OK || fabs(row.mean - 0.5) > 1e-15) return 4;
    if (plateau_circuit_from_json("{", &c) != PLATEAU_STATUS_INVALID || plateau_last_error() == NULL) return 5;
    printf("%s %.3f\n", plateau_version(), row.mean);
    plateau_estimate_free(e);
    plateau_observable_free(o);
    plateau_circuit_free(c);
    return 0;
}
"#,
    )
    .unwrap();
    let include = PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("include");
    let status = Command::new("cc")
        .arg(&src)
        .arg("-I")
        .arg(&include)
        .arg(&lib)
        .args(["-lpthread", "-ldl", "-lm", "-o"])
        .arg(&bin)
        .status()
        .unwrap();
    assert!(status.success());
    let out = Command::new(&bin).output().unwrap();
    assert!(out.status.success(), "client exit {:?}", out.status.code());
    assert!(String::from_utf8_lossy(&out.stdout).ends_with("0.500\n"));
}

//! Drive the C ABI the way a foreign caller would: build a controller
//! from a JSON string, start it, and close the loop on a local plant
//! simulation while checking the constraints hold.

use std::ffi::{CStr, CString};

use reapt_ffi::{
    reapt_controller_free, reapt_controller_new_from_file, reapt_controller_new_from_json,
    reapt_controller_num_inputs, reapt_controller_num_outputs, reapt_controller_num_states,
    reapt_controller_start, reapt_controller_step, reapt_last_error_message, reapt_version,
    ReaptStatus,
};

const CONFIG: &str = r#"{
  "system": {
    "domain": "discrete",
    "A": [[1.0, 0.1], [0.0, 1.0]],
    "B": [[0.005], [0.1]],
    "C": [[1.0, 0.0]],
    "D": [[0.0]],
    "dt": 0.1
  },
  "constraints": {
    "x_upper": [5.0, 1.0],
    "x_lower": [-5.0, -1.0],
    "u_upper": [2.0],
    "u_lower": [-2.0]
  },
  "weights": { "Qx": [[1.0, 0.0], [0.0, 1.0]], "Qu": [[0.1]] },
  "horizon": 10,
  "target": { "kind": "reference", "value": [1.0] },
  "terminal": { "method": "prediction" },
  "simulation": { "steps": 100, "budget": 20, "x0": [0.0, 0.0] }
}"#;

fn last_error() -> String {
    unsafe { CStr::from_ptr(reapt_last_error_message()) }
        .to_string_lossy()
        .into_owned()
}

#[test]
fn closed_loop_through_the_c_abi() {
    let json = CString::new(CONFIG).unwrap();
    let handle = unsafe { reapt_controller_new_from_json(json.as_ptr()) };
    assert!(!handle.is_null(), "constructor failed: {}", last_error());

    unsafe {
        assert_eq!(reapt_controller_num_states(handle), 2);
        assert_eq!(reapt_controller_num_inputs(handle), 1);
        assert_eq!(reapt_controller_num_outputs(handle), 1);

        let x0 = [0.0_f64, 0.0];
        assert_eq!(
            reapt_controller_start(handle, x0.as_ptr(), 2),
            ReaptStatus::ReaptOk,
            "{}",
            last_error()
        );

        // Nominal double-integrator plant driven by the returned inputs.
        let mut x = [0.0_f64, 0.0];
        let mut u = [0.0_f64];
        for _ in 0..200 {
            let status = reapt_controller_step(handle, x.as_ptr(), 2, 30, u.as_mut_ptr(), 1);
            assert_eq!(status, ReaptStatus::ReaptOk, "{}", last_error());
            assert!(u[0].abs() <= 2.0 + 1e-9, "input out of bounds: {}", u[0]);
            let next = [x[0] + 0.1 * x[1] + 0.005 * u[0], x[1] + 0.1 * u[0]];
            x = next;
            assert!(x[0].abs() <= 5.0 + 1e-9 && x[1].abs() <= 1.0 + 1e-9);
        }
        assert!((x[0] - 1.0).abs() <= 0.02, "did not track: x = {x:?}");

        reapt_controller_free(handle);
    }
}

#[test]
fn errors_are_reported_not_panicked() {
    unsafe {
        // NULL and garbage configurations.
        assert!(reapt_controller_new_from_json(std::ptr::null()).is_null());
        let garbage = CString::new("{ not json").unwrap();
        assert!(reapt_controller_new_from_json(garbage.as_ptr()).is_null());
        assert!(!last_error().is_empty());

        let missing = CString::new("/nonexistent/config.json").unwrap();
        assert!(reapt_controller_new_from_file(missing.as_ptr()).is_null());

        // Validation failure: uncontrollable pair.
        let bad = CString::new(CONFIG.replace(
            "\"B\": [[0.005], [0.1]]",
            "\"B\": [[0.0], [0.0]]",
        ))
        .unwrap();
        let handle = reapt_controller_new_from_json(bad.as_ptr());
        assert!(handle.is_null());
        assert!(
            last_error().contains("not controllable"),
            "unexpected error: {}",
            last_error()
        );

        // Stepping an unstarted controller.
        let json = CString::new(CONFIG).unwrap();
        let handle = reapt_controller_new_from_json(json.as_ptr());
        assert!(!handle.is_null());
        let x = [0.0_f64, 0.0];
        let mut u = [0.0_f64];
        assert_eq!(
            reapt_controller_step(handle, x.as_ptr(), 2, 5, u.as_mut_ptr(), 1),
            ReaptStatus::ReaptNotStarted
        );

        // Wrong lengths.
        assert_eq!(
            reapt_controller_start(handle, x.as_ptr(), 1),
            ReaptStatus::ReaptInvalidArgument
        );
        assert_eq!(reapt_controller_start(handle, x.as_ptr(), 2), ReaptStatus::ReaptOk);
        assert_eq!(
            reapt_controller_step(handle, x.as_ptr(), 2, 5, u.as_mut_ptr(), 3),
            ReaptStatus::ReaptInvalidArgument
        );

        // Start outside the region of attraction.
        let far = [6.0_f64, 0.0];
        assert_eq!(
            reapt_controller_start(handle, far.as_ptr(), 2),
            ReaptStatus::ReaptValidationError
        );
        assert!(last_error().contains("region of attraction"));

        reapt_controller_free(handle);
        reapt_controller_free(std::ptr::null_mut());
    }
}

#[test]
fn version_string_is_present() {
    let v = unsafe { CStr::from_ptr(reapt_version()) };
    assert!(!v.to_string_lossy().is_empty());
}

use std::ffi::{c_char, CStr, CString};
use std::path::PathBuf;
use std::process::Command;
use std::ptr;

use moral_mech_ffi::*;

fn take(s: *mut c_char) -> String {
    assert!(!s.is_null());
    let out = unsafe { CStr::from_ptr(s) }.to_str().unwrap().to_string();
    unsafe { mm_string_free(s) };
    out
}

fn last_error() -> String {
    let p = mm_last_error();
    assert!(!p.is_null());
    unsafe { CStr::from_ptr(p) }.to_str().unwrap().to_string()
}

#[test]
fn search_myerson_and_lift_round_trip() {
    unsafe {
        let mut d = ptr::null_mut();
        assert_eq!(mm_distribution_uniform(3, &mut d), MmStatus::Ok);
        let ds = [d as *const MmDistribution, d as *const MmDistribution];
        let mut j = ptr::null_mut();
        assert_eq!(mm_joint_product(ds.as_ptr(), 2, &mut j), MmStatus::Ok);

        let alpha = CString::new("1").unwrap();
        let mut best = ptr::null_mut();
        let mut rev = ptr::null_mut();
        assert_eq!(mm_search_optimal(j, false, alpha.as_ptr(), 0, &mut best, &mut rev), MmStatus::Ok);
        assert_eq!(take(rev), "5/9");

        let mut my = ptr::null_mut();
        assert_eq!(mm_myerson_grid(ds.as_ptr(), 2, &mut my), MmStatus::Ok);
        let mut r = ptr::null_mut();
        assert_eq!(mm_expected_revenue(my, j, &mut r), MmStatus::Ok);
        assert_eq!(take(r), "5/9");

        let mut lifted = ptr::null_mut();
        let mut trace = ptr::null_mut();
        assert_eq!(mm_lift(best, d, &mut lifted, &mut trace), MmStatus::Ok);
        assert!(take(trace).contains("final_revenue"));
        let mut truthful = false;
        assert_eq!(mm_is_truthful(lifted, &mut truthful), MmStatus::Ok);
        assert!(truthful);

        let mut json = ptr::null_mut();
        assert_eq!(mm_mechanism_to_json(lifted, &mut json), MmStatus::Ok);
        let text = CString::new(take(json)).unwrap();
        let mut back = ptr::null_mut();
        assert_eq!(mm_mechanism_from_json(text.as_ptr(), &mut back), MmStatus::Ok);
        let mut r = ptr::null_mut();
        assert_eq!(mm_expected_revenue(back, j, &mut r), MmStatus::Ok);
        assert_eq!(take(r), "5/9");

        for m in [best, my, lifted, back] {
            mm_mechanism_free(m);
        }
        mm_joint_free(j);
        mm_distribution_free(d);
    }
}

#[test]
fn morality_report_is_returned() {
    let grid = CString::new(
        r#"{"values": [["0","1/2","1"],["0","1/2","1"]],
            "prices": [{"player":1,"opponents":["0"],"price":"0"},{"player":1,"opponents":["1/2"],"price":"1/4"},
                       {"player":1,"opponents":["1"],"price":"1/2"},{"player":2,"opponents":["0"],"price":"0"},
                       {"player":2,"opponents":["1/2"],"price":"1/4"},{"player":2,"opponents":["1"],"price":"1/2"}]}"#,
    )
    .unwrap();
    unsafe {
        let mut m = ptr::null_mut();
        assert_eq!(mm_mechanism_from_json(grid.as_ptr(), &mut m), MmStatus::Ok);
        let zero = CString::new("0").unwrap();
        let mut moral = true;
        let mut report = ptr::null_mut();
        assert_eq!(mm_check_alpha_moral(m, zero.as_ptr(), &mut moral, &mut report), MmStatus::Ok);
        assert!(!moral);
        assert!(take(report).contains("\"deviator\""));
        let one = CString::new("1").unwrap();
        assert_eq!(mm_check_alpha_moral(m, one.as_ptr(), &mut moral, ptr::null_mut()), MmStatus::Ok);
        assert!(moral);
        mm_mechanism_free(m);
    }
}

#[test]
fn errors_set_status_and_message() {
    unsafe {
        let mut d = ptr::null_mut();
        assert_eq!(mm_distribution_uniform(1, &mut d), MmStatus::InvalidInput);
        assert!(d.is_null());
        assert!(last_error().contains("invalid_distribution"));

        let bad = CString::new(r#"{"eps": "1/0", "mass": []}"#).unwrap();
        assert_eq!(mm_distribution_from_json(bad.as_ptr(), &mut d), MmStatus::Parse);
        assert!(last_error().contains("eps"));

        assert_eq!(mm_distribution_from_json(ptr::null(), &mut d), MmStatus::NullPointer);
        let mut truthful = false;
        assert_eq!(mm_is_truthful(ptr::null(), &mut truthful), MmStatus::NullPointer);

        let irregular = CString::new(r#"{"eps": "1/2", "mass": ["4/9", "1/9", "4/9"]}"#).unwrap();
        assert_eq!(mm_distribution_from_json(irregular.as_ptr(), &mut d), MmStatus::Ok);
        let ds = [d as *const MmDistribution];
        let mut m = ptr::null_mut();
        assert_eq!(mm_myerson_grid(ds.as_ptr(), 1, &mut m), MmStatus::Precondition);
        assert!(last_error().contains("not_regular"));

        let mut u = ptr::null_mut();
        assert_eq!(mm_distribution_uniform(3, &mut u), MmStatus::Ok);
        assert!(mm_last_error().is_null());
        mm_distribution_free(u);
        mm_distribution_free(d);
    }
}

#[test]
fn header_declares_the_api() {
    let h = std::fs::read_to_string(PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("include/moral_mech.h")).unwrap();
    for name in [
        "mm_last_error",
        "mm_distribution_uniform",
        "mm_joint_product",
        "mm_search_optimal",
        "mm_myerson_grid",
        "mm_lift",
        "MM_STATUS_PRECONDITION",
        "typedef struct MmMechanism MmMechanism",
    ] {
        assert!(h.contains(name), "{name}");
    }
}

/// Compiles a small C program against the header and static library when a
/// C compiler is available.
#[test]
fn c_program_links_and_runs() {
    let exe = std::env::current_exe().unwrap();
    let target = exe.parent().unwrap().parent().unwrap();
    let lib = target.join("libmoral_mech_ffi.a");
    if !lib.exists() || Command::new("cc").arg("--version").output().is_err() {
        eprintln!("skipping: no static library or C compiler");
        return;
    }
    let dir = tempfile_dir();
    let src = dir.join("main.c");
    std::fs::write(
        &src,
        r#"#include <stdio.h>
#include "moral_mech.h"
int main(void) {
    MmDistribution *d = NULL;
    MmJoint *j = NULL;
    MmMechanism *m = NULL;
    char *rev = NULL;
    if (mm_distribution_uniform(4, &d) != MM_STATUS_OK) return 1;
    const MmDistribution *ds[2] = {d, d};
    if (mm_joint_product(ds, 2, &j) != MM_STATUS_OK) return 2;
    if (mm_myerson_grid(ds, 2, &m) != MM_STATUS_OK) return 3;
    if (mm_expected_revenue(m, j, &rev) != MM_STATUS_OK) return 4;
    printf("%s\n", rev);
    mm_string_free(rev);
    mm_mechanism_free(m);
    mm_joint_free(j);
    mm_distribution_free(d);
    return mm_distribution_uniform(0, &d) == MM_STATUS_INVALID_INPUT ? 0 : 5;
}
"#,
    )
    .unwrap();
    let bin = dir.join("main");
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
    assert_eq!(out.status.code(), Some(0));
    assert_eq!(String::from_utf8(out.stdout).unwrap().trim(), "13/24");
    let _ = std::fs::remove_dir_all(&dir);
}

fn tempfile_dir() -> PathBuf {
    let d = std::env::temp_dir().join(format!("moral-mech-ffi-{}", std::process::id()));
    std::fs::create_dir_all(&d).unwrap();
    d
}

use std::ffi::{CStr, CString};
use std::process::Command;
use std::ptr;

use minmetric_ffi::*;

fn load(json: &str) -> *mut MmDomain {
    let s = CString::new(json).unwrap();
    let mut d = ptr::null_mut();
    assert_eq!(unsafe { mm_domain_from_json(s.as_ptr(), &mut d) }, MM_OK);
    d
}

fn last_error() -> String {
    let p = mm_last_error_message();
    assert!(!p.is_null());
    let s = unsafe { CStr::from_ptr(p) }.to_str().unwrap().to_owned();
    unsafe { mm_string_free(p) };
    s
}

#[test]
fn ball_metric_and_bounds() {
    let x = [0.5, 0.0, 0.0];
    let u = [1.0, 0.0, 0.0];
    let mut g = 0.0;
    assert_eq!(unsafe { mm_bck_metric(x.as_ptr(), u.as_ptr(), 3, &mut g) }, MM_OK);
    assert!((g - 4.0 / 3.0).abs() < 1e-12);

    let d = load(r#"{"kind":"ball","center":[0,0,0],"radius":1}"#);
    assert_eq!(unsafe { mm_domain_dim(d) }, 3);
    let mut inside = false;
    assert_eq!(unsafe { mm_domain_contains(d, x.as_ptr(), 3, 0.0, &mut inside) }, MM_OK);
    assert!(inside);
    let (mut lo, mut up) = (0.0, 0.0);
    let o = [0.0; 3];
    assert_eq!(unsafe { mm_lower_bound(d, o.as_ptr(), u.as_ptr(), 3, &mut lo) }, MM_OK);
    assert_eq!(unsafe { mm_upper_bound(d, o.as_ptr(), u.as_ptr(), 3, ptr::null(), &mut up) }, MM_OK);
    assert!(lo <= up && (1.0..=1.02).contains(&up), "{lo} {up}");
    assert_eq!(unsafe { mm_distance(d, o.as_ptr(), x.as_ptr(), 3, &mut lo, &mut up) }, MM_OK);
    let truth = 0.5 * 3f64.ln();
    assert!((lo - truth).abs() < 1e-6 && up >= lo && up <= 1.02 * truth, "{lo} {up}");
    unsafe { mm_domain_free(d) };
}

#[test]
fn errors_are_reported() {
    let d = load(r#"{"kind":"halfspace","normal":[1,0,0],"offset":0}"#);
    let out_pt = [-1.0, 0.0, 0.0];
    let v = [1.0, 0.0, 0.0];
    let mut lo = 0.0;
    let code = unsafe { mm_lower_bound(d, out_pt.as_ptr(), v.as_ptr(), 3, &mut lo) };
    assert_eq!(code, MM_ERR_POINT_OUTSIDE);
    assert!(last_error().contains("outside"));
    let code = unsafe { mm_lower_bound(d, ptr::null(), v.as_ptr(), 3, &mut lo) };
    assert_eq!(code, MM_ERR_NULL_POINTER);
    let bad = CString::new("{\"kind\":").unwrap();
    let mut h = ptr::null_mut();
    assert_eq!(unsafe { mm_domain_from_json(bad.as_ptr(), &mut h) }, MM_ERR_INVALID_INPUT);
    assert!(h.is_null());
    let wrong_dim = [1.0, 0.0];
    assert_eq!(
        unsafe { mm_lower_bound(d, wrong_dim.as_ptr(), wrong_dim.as_ptr(), 2, &mut lo) },
        MM_ERR_DIMENSION_MISMATCH
    );
    unsafe { mm_domain_free(d) };
    unsafe { mm_domain_free(ptr::null_mut()) };
    unsafe { mm_string_free(ptr::null_mut()) };
}

#[test]
fn classification() {
    let d =
        load(r#"{"kind":"polyhedral","halfspaces":[{"normal":[1,0,0],"offset":0},{"normal":[-1,0,0],"offset":-1}]}"#);
    let mut status = MmStatus::Unknown;
    let mut json = ptr::null_mut();
    assert_eq!(unsafe { mm_classify(d, &mut status, &mut json) }, MM_OK);
    assert_eq!(status, MmStatus::NonHyperbolic);
    let text = unsafe { CStr::from_ptr(json) }.to_str().unwrap().to_owned();
    assert!(text.contains("witness_plane"), "{text}");
    unsafe { mm_string_free(json) };
    unsafe { mm_domain_free(d) };
    let oct = load(
        r#"{"kind":"polyhedral","halfspaces":[{"normal":[1,0,0],"offset":0},{"normal":[0,1,0],"offset":0},{"normal":[0,0,1],"offset":0}]}"#,
    );
    assert_eq!(unsafe { mm_classify(oct, &mut status, ptr::null_mut()) }, MM_OK);
    assert_eq!(status, MmStatus::CompleteHyperbolic);
    unsafe { mm_domain_free(oct) };
}

#[test]
fn header_is_valid_c() {
    let dir = env!("CARGO_MANIFEST_DIR");
    let header = std::fs::read_to_string(format!("{dir}/include/minmetric.h")).unwrap();
    for name in
        ["typedef struct MmDomain MmDomain", "mm_domain_from_json", "mm_last_error_message", "MM_ERR_NULL_POINTER"]
    {
        assert!(header.contains(name), "header lacks {name}");
    }
    let src = format!("{}/probe.c", env!("CARGO_TARGET_TMPDIR"));
    std::fs::write(&src, "#include \"minmetric.h\"\nint main(void) { return mm_domain_dim(0) == 0 ? 0 : 1; }\n")
        .unwrap();
    match Command::new("cc").args(["-fsyntax-only", "-Wall", "-Werror", "-I", &format!("{dir}/include"), &src]).status()
    {
        Ok(s) => assert!(s.success(), "header does not compile"),
        Err(_) => eprintln!("no C compiler found; syntax check skipped"),
    }
}

#[test]
fn codes_match_library() {
    use minmetric::Error;
    let pairs = [
        (Error::ZeroDirection, MM_ERR_ZERO_DIRECTION),
        (Error::DimensionMismatch { expected: 3, got: 2 }, MM_ERR_DIMENSION_MISMATCH),
        (Error::InvalidInput(String::new()), MM_ERR_INVALID_INPUT),
        (Error::PointOutside, MM_ERR_POINT_OUTSIDE),
        (Error::OutsideBox, MM_ERR_OUTSIDE_BOX),
        (Error::OutsideDisc, MM_ERR_OUTSIDE_DISC),
        (Error::AtPuncture, MM_ERR_AT_PUNCTURE),
        (Error::OutsideBall, MM_ERR_OUTSIDE_BALL),
        (Error::Syntax { offset: 0, message: String::new() }, MM_ERR_SYNTAX),
        (Error::UnknownVariable(String::new()), MM_ERR_UNKNOWN_VARIABLE),
        (Error::Domain(String::new()), MM_ERR_DOMAIN),
        (Error::NonFinite, MM_ERR_NON_FINITE),
        (Error::Infeasible(String::new()), MM_ERR_INFEASIBLE),
        (Error::NoConvergence(String::new()), MM_ERR_NO_CONVERGENCE),
        (Error::CandidateInvalid(String::new()), MM_ERR_CANDIDATE_INVALID),
        (Error::HypothesisFailed(String::new()), MM_ERR_HYPOTHESIS_FAILED),
        (Error::RankDeficient { rank: 1, needed: 2 }, MM_ERR_RANK_DEFICIENT),
        (Error::NotContained(String::new()), MM_ERR_NOT_CONTAINED),
        (Error::ChainFailed(String::new()), MM_ERR_CHAIN_FAILED),
        (Error::EmptyDomain, MM_ERR_EMPTY_DOMAIN),
        (Error::ConstructionFailed(String::new()), MM_ERR_CONSTRUCTION_FAILED),
        (Error::Io(String::new()), MM_ERR_IO),
    ];
    for (e, c) in pairs {
        assert_eq!(e.code(), c, "{e:?}");
    }
}

#[test]
fn version_string() {
    let v = unsafe { CStr::from_ptr(mm_version()) }.to_str().unwrap();
    assert_eq!(v, env!("CARGO_PKG_VERSION"));
}

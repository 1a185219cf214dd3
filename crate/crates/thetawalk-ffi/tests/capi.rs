use std::ffi::{c_char, CStr, CString};
use std::ptr;

use thetawalk_ffi::*;

fn last_error() -> String {
    unsafe { CStr::from_ptr(tw_last_error()) }
        .to_string_lossy()
        .into_owned()
}

fn kreweras() -> *mut TwStepSet {
    let mut s = ptr::null_mut();
    assert_eq!(unsafe { tw_steps_kreweras(&mut s) }, TwStatus::TW_OK);
    s
}

#[test]
fn version_is_a_c_string() {
    let v = unsafe { CStr::from_ptr(tw_version()) };
    assert_eq!(v.to_str().unwrap(), env!("CARGO_PKG_VERSION"));
}

#[test]
fn exact_counts() {
    let s = kreweras();
    let cells = [0usize, 0, 1, 1];
    let mut t = ptr::null_mut();
    let st = unsafe {
        tw_count(
            s,
            9,
            TwBackend::TW_BACKEND_EXACT,
            0.0,
            cells.as_ptr(),
            2,
            &mut t,
        )
    };
    assert_eq!(st, TwStatus::TW_OK, "{}", last_error());

    let mut v = 0.0;
    assert_eq!(
        unsafe { tw_count_value(t, 0, 0, 9, &mut v) },
        TwStatus::TW_OK
    );
    assert_eq!(v, 192.0);

    // size query, then copy
    let mut needed = 0usize;
    let st = unsafe { tw_count_exact(t, 0, 0, 9, ptr::null_mut(), 0, &mut needed) };
    assert_eq!(st, TwStatus::TW_BUFFER_TOO_SMALL);
    assert_eq!(needed, 4);
    let mut buf = vec![0 as c_char; needed];
    let st = unsafe { tw_count_exact(t, 0, 0, 9, buf.as_mut_ptr(), buf.len(), &mut needed) };
    assert_eq!(st, TwStatus::TW_OK);
    assert_eq!(
        unsafe { CStr::from_ptr(buf.as_ptr()) }.to_str().unwrap(),
        "192"
    );

    // wrong accessor for the backend
    let mut r = 0u64;
    assert_eq!(
        unsafe { tw_count_modular(t, 0, 0, 9, &mut r) },
        TwStatus::TW_INVALID_ARGUMENT
    );
    assert!(!last_error().is_empty());

    let mut n = 0usize;
    assert_eq!(unsafe { tw_count_n_max(t, &mut n) }, TwStatus::TW_OK);
    assert_eq!(n, 9);
    unsafe {
        tw_count_free(t);
        tw_steps_free(s);
    }
}

#[test]
fn modular_counts() {
    let s = kreweras();
    let cells = [0usize, 0];
    let mut t = ptr::null_mut();
    let st = unsafe {
        tw_count(
            s,
            30,
            TwBackend::TW_BACKEND_MODULAR,
            101.0,
            cells.as_ptr(),
            1,
            &mut t,
        )
    };
    assert_eq!(st, TwStatus::TW_OK);
    let mut r = 0u64;
    assert_eq!(
        unsafe { tw_count_modular(t, 0, 0, 9, &mut r) },
        TwStatus::TW_OK
    );
    assert_eq!(r, 192 % 101);
    unsafe {
        tw_count_free(t);
        tw_steps_free(s);
    }
}

#[test]
fn scaled_fit() {
    let s = kreweras();
    let cells = [0usize, 0];
    let mut t = ptr::null_mut();
    let st = unsafe {
        tw_count(
            s,
            1200,
            TwBackend::TW_BACKEND_SCALED,
            1.0 / 3.0,
            cells.as_ptr(),
            1,
            &mut t,
        )
    };
    assert_eq!(st, TwStatus::TW_OK);
    let mut f = TwFit::default();
    let st =
        unsafe { tw_fit_asymptotics(t, 0, 0, TwTemplate::TW_TEMPLATE_PLAIN, 300, 1200, 3, &mut f) };
    assert_eq!(st, TwStatus::TW_OK, "{}", last_error());
    assert!((f.mu - 3.0).abs() < 1e-3, "{f:?}");
    assert!((f.alpha - 2.5).abs() < 0.05, "{f:?}");
    assert!(f.log_coeff.is_nan());

    let st =
        unsafe { tw_fit_asymptotics(t, 0, 0, TwTemplate::TW_TEMPLATE_PLAIN, 300, 5000, 3, &mut f) };
    assert_eq!(st, TwStatus::TW_INSUFFICIENT_DATA);
    unsafe {
        tw_count_free(t);
        tw_steps_free(s);
    }
}

#[test]
fn parse_and_print_steps() {
    let spec = CString::new("1,0,1;0,1,1;-1,-1,1/2").unwrap();
    let mut s = ptr::null_mut();
    assert_eq!(
        unsafe { tw_steps_parse(spec.as_ptr(), &mut s) },
        TwStatus::TW_OK
    );
    let mut buf = [0 as c_char; 64];
    let mut needed = 0;
    assert_eq!(
        unsafe { tw_steps_to_string(s, buf.as_mut_ptr(), buf.len(), &mut needed) },
        TwStatus::TW_OK
    );
    let out = unsafe { CStr::from_ptr(buf.as_ptr()) }
        .to_str()
        .unwrap()
        .to_string();
    assert!(out.contains("1/2"), "{out}");
    unsafe { tw_steps_free(s) };

    let bad = CString::new("2,0,1").unwrap();
    let mut s = ptr::null_mut();
    assert_eq!(
        unsafe { tw_steps_parse(bad.as_ptr(), &mut s) },
        TwStatus::TW_INVALID_ARGUMENT
    );
    assert!(s.is_null());
}

#[test]
fn null_pointers_are_reported() {
    let mut s = ptr::null_mut();
    assert_eq!(
        unsafe { tw_steps_parse(ptr::null(), &mut s) },
        TwStatus::TW_NULL_POINTER
    );
    assert_eq!(last_error(), "null pointer argument");
    let mut v = 0.0;
    assert_eq!(
        unsafe { tw_count_value(ptr::null(), 0, 0, 0, &mut v) },
        TwStatus::TW_NULL_POINTER
    );
    assert_eq!(
        unsafe { tw_steps_kreweras(ptr::null_mut()) },
        TwStatus::TW_NULL_POINTER
    );
    unsafe {
        tw_steps_free(ptr::null_mut());
        tw_count_free(ptr::null_mut());
        tw_amodel_free(ptr::null_mut());
    }
}

#[test]
fn amodel_constants() {
    let mut m = ptr::null_mut();
    assert_eq!(unsafe { tw_amodel_new(1.0, 128, &mut m) }, TwStatus::TW_OK);
    let (mut tc, mut rho, mut c, mut k, mut b0) = (0.0, 0.0, 0.0, 0.0, 0.0);
    assert_eq!(
        unsafe { tw_amodel_constants(m, &mut tc, &mut rho, &mut c, &mut k, &mut b0) },
        TwStatus::TW_OK
    );
    assert!((1.0 / tc - 4.7290315).abs() < 1e-6);
    assert!((rho - 1.7574656).abs() < 1e-6);
    assert!((c - 0.5434512).abs() < 1e-6);
    let mut v = [0.0; 3];
    assert_eq!(
        unsafe { tw_amodel_harmonic(m, 3, v.as_mut_ptr()) },
        TwStatus::TW_OK
    );
    assert!((v[0] - 4.5473188).abs() < 1e-6, "{v:?}");
    let mut needed = 0;
    unsafe { tw_amodel_to_json(m, ptr::null_mut(), 0, &mut needed) };
    let mut buf = vec![0 as c_char; needed];
    assert_eq!(
        unsafe { tw_amodel_to_json(m, buf.as_mut_ptr(), needed, &mut needed) },
        TwStatus::TW_OK
    );
    let js = unsafe { CStr::from_ptr(buf.as_ptr()) }.to_str().unwrap();
    assert!(js.starts_with('{') && js.contains("t_c"), "{js}");
    unsafe { tw_amodel_free(m) };

    let mut m = ptr::null_mut();
    assert_eq!(
        unsafe { tw_amodel_new(-1.0, 128, &mut m) },
        TwStatus::TW_INVALID_ARGUMENT
    );
}

#[test]
fn kreweras_asymptotics() {
    let mut k = TwKrewerasAsymptotics::default();
    assert_eq!(unsafe { tw_kreweras_asymptotics(&mut k) }, TwStatus::TW_OK);
    assert_eq!(k.period, 3);
    assert!((k.exponent + 2.5).abs() < 1e-12);
    assert!((k.growth_per_step - 3.0).abs() < 1e-12);
}

#[test]
fn header_declares_the_api() {
    let h = include_str!("../include/thetawalk.h");
    for name in [
        "tw_version",
        "tw_last_error",
        "tw_steps_parse",
        "tw_count",
        "tw_count_exact",
        "tw_fit_asymptotics",
        "tw_amodel_new",
        "TW_BUFFER_TOO_SMALL",
        "typedef struct TwCountTable TwCountTable;",
    ] {
        assert!(h.contains(name), "header lacks {name}");
    }
}

#[test]
fn header_compiles_as_c() {
    let Ok(cc) = std::process::Command::new("cc").arg("--version").output() else {
        eprintln!("no C compiler; skipped");
        return;
    };
    assert!(cc.status.success());
    let dir = std::env::temp_dir().join(format!("thetawalk-h-{}", std::process::id()));
    std::fs::create_dir_all(&dir).unwrap();
    let src = dir.join("t.c");
    std::fs::write(&src, "#include \"thetawalk.h\"\nint main(void) { TwFit f; (void)f; return tw_version() == 0; }\n").unwrap();
    let inc = concat!(env!("CARGO_MANIFEST_DIR"), "/include");
    let out = std::process::Command::new("cc")
        .args(["-std=c99", "-Wall", "-Werror", "-fsyntax-only", "-I", inc])
        .arg(&src)
        .output()
        .unwrap();
    std::fs::remove_dir_all(&dir).ok();
    assert!(
        out.status.success(),
        "{}",
        String::from_utf8_lossy(&out.stderr)
    );
}

use std::ffi::{CStr, CString};
use std::ptr;

use zcrit_ffi::*;

fn last_error() -> String {
    let p = zcrit_last_error();
    assert!(!p.is_null());
    unsafe { CStr::from_ptr(p) }.to_string_lossy().into_owned()
}

#[test]
fn fubini_study_round_trip() {
    unsafe {
        let mut m = ptr::null_mut();
        assert_eq!(zcrit_model_fubini_study(2, 1.0, 8, &mut m), ZcritStatus::Ok);
        assert!(zcrit_last_error().is_null());
        let mut dim = 0;
        assert_eq!(zcrit_model_dimension(m, &mut dim), ZcritStatus::Ok);
        assert_eq!(dim, 2);

        let mut nodes = 0;
        assert_eq!(zcrit_model_node_count(m, &mut nodes), ZcritStatus::Ok);
        let mut s = vec![0.0; nodes];
        assert_eq!(zcrit_model_scalar_curvature(m, s.as_mut_ptr(), nodes), ZcritStatus::Ok);
        // S = n(n+1) on ℂPⁿ
        assert!(s.iter().all(|v| (v - 6.0).abs() < 1e-10));

        let (mut integral, mut topo) = (0.0, 0.0);
        assert_eq!(zcrit_model_z_integral(m, 1, &mut integral, &mut topo), ZcritStatus::Ok);
        assert!((topo - 1.5).abs() < 1e-12);
        assert!((integral - topo).abs() < 1e-8);

        let mut b = ptr::null_mut();
        assert_eq!(zcrit_bergman_new(m, 4, &mut b), ZcritStatus::Ok);
        let mut n = 0;
        assert_eq!(zcrit_bergman_dimension(b, &mut n), ZcritStatus::Ok);
        assert_eq!(n, 15);
        let mut len = 0;
        assert_eq!(zcrit_bergman_density_len(b, &mut len), ZcritStatus::Ok);
        let mut rho = vec![0.0; len];
        assert_eq!(zcrit_bergman_density(b, rho.as_mut_ptr(), len), ZcritStatus::Ok);
        // (k+n)!/k! = 30 on the unit-volume ℂP²
        assert!(rho.iter().all(|v| (v - 30.0).abs() < 1e-9));
        let mut cond = 0.0;
        assert_eq!(zcrit_bergman_condition(b, &mut cond), ZcritStatus::Ok);
        assert!(cond >= 1.0);

        zcrit_bergman_free(b);
        zcrit_model_free(m);
    }
}

#[test]
fn errors_are_reported() {
    unsafe {
        let mut m = ptr::null_mut();
        assert_eq!(zcrit_model_fubini_study(7, 1.0, 8, &mut m), ZcritStatus::Unsupported);
        assert!(m.is_null());
        assert!(last_error().contains("dimension"));

        assert_eq!(zcrit_model_fubini_study(1, 1.0, 8, ptr::null_mut()), ZcritStatus::NullPointer);
        let mut dim = 0;
        assert_eq!(zcrit_model_dimension(ptr::null(), &mut dim), ZcritStatus::NullPointer);

        assert_eq!(zcrit_model_fubini_study(1, 1.0, 8, &mut m), ZcritStatus::Ok);
        let mut short = [0.0; 1];
        assert_eq!(zcrit_model_scalar_curvature(m, short.as_mut_ptr(), 1), ZcritStatus::BufferSize);
        assert!(last_error().contains("required"));
        zcrit_model_free(m);

        let bad = CString::new("[model]\nlevle = 3\n").unwrap();
        assert_eq!(zcrit_model_from_config(bad.as_ptr(), &mut m), ZcritStatus::Config);
        assert!(last_error().contains("levle"));

        zcrit_model_free(ptr::null_mut());
        zcrit_bergman_free(ptr::null_mut());
        zcrit_string_free(ptr::null_mut());
    }
}

#[test]
fn model_from_config() {
    unsafe {
        let cfg = CString::new("[model]\nkind = \"u1-sphere\"\nprofile = [0.1]\nlevel = 16\n").unwrap();
        let mut m = ptr::null_mut();
        assert_eq!(zcrit_model_from_config(cfg.as_ptr(), &mut m), ZcritStatus::Ok);
        let mut dim = 0;
        assert_eq!(zcrit_model_dimension(m, &mut dim), ZcritStatus::Ok);
        assert_eq!(dim, 1);
        let (mut integral, mut topo) = (0.0, 0.0);
        assert_eq!(zcrit_model_z_integral(m, 1, &mut integral, &mut topo), ZcritStatus::Ok);
        assert!((integral - topo).abs() < 1e-8);
        zcrit_model_free(m);
    }
}

#[test]
fn run_returns_report_json() {
    unsafe {
        let cfg = CString::new("verb = \"bergman\"\nks = [4]\n[model]\nn = 1\nlevel = 12\n").unwrap();
        let mut json = ptr::null_mut();
        let mut passed = false;
        assert_eq!(zcrit_run(cfg.as_ptr(), &mut json, &mut passed), ZcritStatus::Ok);
        assert!(passed);
        let text = CStr::from_ptr(json).to_str().unwrap().to_owned();
        zcrit_string_free(json);
        let report = zcrit::report::Report::from_json(&serde_json::from_str(&text).unwrap()).unwrap();
        assert_eq!(report.verb, "bergman");
        assert!(report.passed());

        let no_verb = CString::new("[model]\nn = 1\n").unwrap();
        assert_eq!(zcrit_run(no_verb.as_ptr(), &mut json, &mut passed), ZcritStatus::Config);
    }
}

#[test]
fn version_is_a_c_string() {
    let v = unsafe { CStr::from_ptr(zcrit_version()) };
    assert_eq!(v.to_str().unwrap(), env!("CARGO_PKG_VERSION"));
}

/// Compiles a C program against the header and, when the static library
/// of this build is present, links and runs it.
#[test]
fn c_program_links_and_runs() {
    let cc = std::env::var("CC").unwrap_or_else(|_| "cc".into());
    let dir = tempfile::tempdir().unwrap();
    let src = dir.path().join("probe.c");
    std::fs::write(
        &src,
        "#include <stdio.h>\n\
         #include \"zcrit.h\"\n\
         int main(void) {\n\
           ZcritModel *m = NULL;\n\
           uint32_t dim = 0;\n\
           if (zcrit_model_fubini_study(1, 1.0, 8, &m) != ZCRIT_STATUS_OK) return 1;\n\
           if (zcrit_model_dimension(m, &dim) != ZCRIT_STATUS_OK || dim != 1) return 2;\n\
           zcrit_model_free(m);\n\
           if (zcrit_model_fubini_study(9, 1.0, 8, &m) != ZCRIT_STATUS_UNSUPPORTED) return 3;\n\
           if (zcrit_last_error() == NULL) return 4;\n\
           printf(\"%s\\n\", zcrit_version());\n\
           return 0;\n\
         }\n",
    )
    .unwrap();
    let include = concat!(env!("CARGO_MANIFEST_DIR"), "/include");
    let syntax = match std::process::Command::new(&cc)
        .args(["-std=c99", "-Wall", "-Werror", "-fsyntax-only", "-I", include])
        .arg(&src)
        .status()
    {
        Ok(s) => s,
        Err(e) => {
            eprintln!("skipping: no C compiler ({e})");
            return;
        }
    };
    assert!(syntax.success());

    // test binaries live in target/<profile>/deps
    let exe = std::env::current_exe().unwrap();
    let lib = exe.parent().unwrap().parent().unwrap().join("libzcrit_ffi.a");
    if !lib.exists() {
        eprintln!("skipping link step: {} not built", lib.display());
        return;
    }
    let bin = dir.path().join("probe");
    let link = std::process::Command::new(&cc)
        .args(["-std=c99", "-I", include])
        .arg(&src)
        .arg(&lib)
        .args(["-lpthread", "-ldl", "-lm", "-o"])
        .arg(&bin)
        .status()
        .unwrap();
    assert!(link.success());
    let out = std::process::Command::new(&bin).output().unwrap();
    assert!(out.status.success(), "probe exited with {:?}", out.status.code());
    assert_eq!(String::from_utf8_lossy(&out.stdout).trim(), env!("CARGO_PKG_VERSION"));
}

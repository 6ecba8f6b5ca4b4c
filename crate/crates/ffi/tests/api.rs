use std::ffi::{CStr, CString};
use std::fs;
use std::path::{Path, PathBuf};
use std::process::Command;
use std::ptr;

use uniwalk::ingest::{write_ratings, Delimiter};
use uniwalk::synthetic::{generate, write_trust, SynthConfig};
use uniwalk_ffi::*;

fn dataset(dir: &Path) -> (PathBuf, PathBuf) {
    let d = generate(&SynthConfig {
        users: 60,
        items: 80,
        communities: 3,
        ratings_per_user: 10.0,
        seed: 2,
        ..SynthConfig::default()
    })
    .unwrap();
    let (r, t) = (dir.join("ratings.txt"), dir.join("trust.txt"));
    write_ratings(fs::File::create(&r).unwrap(), &d.ratings, Delimiter::Whitespace).unwrap();
    write_trust(fs::File::create(&t).unwrap(), &d.social).unwrap();
    (r, t)
}

fn c(s: impl AsRef<str>) -> CString {
    CString::new(s.as_ref()).unwrap()
}

fn cpath(p: &Path) -> CString {
    c(p.to_str().unwrap())
}

fn last_error() -> Option<String> {
    let p = uw_last_error_message();
    (!p.is_null()).then(|| unsafe { CStr::from_ptr(p) }.to_string_lossy().into_owned())
}

fn fast_hp() -> UwHyperparams {
    let mut hp = unsafe { std::mem::zeroed::<UwHyperparams>() };
    assert_eq!(unsafe { uw_hyperparams_default(&mut hp) }, UwStatus::Ok);
    hp.iterations = 3;
    hp.walks_per_node = 3;
    hp.seed = 4;
    hp
}

fn train(r: &Path, t: &Path, hp: &UwHyperparams) -> *mut UwModel {
    let mut m = ptr::null_mut();
    let status = unsafe { uw_train(cpath(r).as_ptr(), cpath(t).as_ptr(), ptr::null(), hp, &mut m) };
    assert_eq!(status, UwStatus::Ok, "{:?}", last_error());
    assert!(!m.is_null());
    m
}

#[test]
fn train_save_load_predict() {
    let dir = tempfile::tempdir().unwrap();
    let (r, t) = dataset(dir.path());
    let hp = fast_hp();
    let m = train(&r, &t, &hp);
    unsafe {
        assert_eq!(uw_model_dim(m), 25);
        assert_eq!(uw_model_entity_count(m, UwEntityKind::User), 60);
        assert!(uw_model_entity_count(m, UwEntityKind::Item) > 0);
        assert_eq!(uw_model_dim(ptr::null()), 0);

        let mut p = 0.0;
        assert_eq!(uw_predict(m, c("3").as_ptr(), c("5").as_ptr(), true, &mut p), UwStatus::Ok);
        assert!((0.5..=4.0).contains(&p));
        let mut cold = 0.0;
        assert_eq!(uw_predict(m, c("ghost").as_ptr(), c("5").as_ptr(), false, &mut cold), UwStatus::Ok);

        let path = dir.path().join("m.uw");
        assert_eq!(uw_model_save(m, cpath(&path).as_ptr()), UwStatus::Ok);
        let mut loaded = ptr::null_mut();
        assert_eq!(uw_model_load(cpath(&path).as_ptr(), &mut loaded), UwStatus::Ok);
        let mut q = 0.0;
        assert_eq!(uw_predict(loaded, c("3").as_ptr(), c("5").as_ptr(), true, &mut q), UwStatus::Ok);
        assert_eq!(p.to_bits(), q.to_bits());

        // same seed, same model
        let again = train(&r, &t, &hp);
        let path2 = dir.path().join("m2.uw");
        assert_eq!(uw_model_save(again, cpath(&path2).as_ptr()), UwStatus::Ok);
        assert_eq!(fs::read(&path).unwrap(), fs::read(&path2).unwrap());

        uw_model_free(again);
        uw_model_free(loaded);
        uw_model_free(m);
    }
}

#[test]
fn explain_and_similarity() {
    let dir = tempfile::tempdir().unwrap();
    let (r, t) = dataset(dir.path());
    let m = train(&r, &t, &fast_hp());
    unsafe {
        let mut json = ptr::null_mut();
        let s = uw_explain_json(m, c("1").as_ptr(), 4, 2, -1.0, -1.0, &mut json);
        assert_eq!(s, UwStatus::Ok, "{:?}", last_error());
        let text = CStr::from_ptr(json).to_str().unwrap().to_owned();
        uw_string_free(json);
        let report = uniwalk::ExplanationReport::from_json(&text).unwrap();
        assert_eq!(report.recommended_items.len(), 4);
        assert!(report.reason_similar_users.len() <= 2);

        let mut sim = -1.0;
        let s = uw_similarity(m, UwEntityKind::User, c("1").as_ptr(), UwEntityKind::User, c("2").as_ptr(), &mut sim);
        assert_eq!(s, UwStatus::Ok);
        assert!((0.0..=1.0).contains(&sim));
        let mut back = -1.0;
        uw_similarity(m, UwEntityKind::User, c("2").as_ptr(), UwEntityKind::User, c("1").as_ptr(), &mut back);
        assert_eq!(sim, back);
        let s = uw_similarity(m, UwEntityKind::User, c("1").as_ptr(), UwEntityKind::User, c("1").as_ptr(), &mut sim);
        assert_eq!(s, UwStatus::Argument);
        uw_model_free(m);
    }
}

#[test]
fn errors_carry_status_and_message() {
    let dir = tempfile::tempdir().unwrap();
    let (r, t) = dataset(dir.path());
    unsafe {
        let mut m = ptr::null_mut();
        let missing = dir.path().join("missing.txt");
        assert_eq!(uw_train(cpath(&missing).as_ptr(), ptr::null(), ptr::null(), ptr::null(), &mut m), UwStatus::Io);
        assert!(last_error().unwrap().contains("missing.txt"));
        assert!(m.is_null());

        fs::write(dir.path().join("bad.txt"), "1 1 x\n").unwrap();
        let bad = cpath(&dir.path().join("bad.txt"));
        assert_eq!(uw_train(bad.as_ptr(), ptr::null(), ptr::null(), ptr::null(), &mut m), UwStatus::Parse);
        assert_eq!(uw_model_load(bad.as_ptr(), &mut m), UwStatus::Format);
        assert_eq!(uw_train(ptr::null(), ptr::null(), ptr::null(), ptr::null(), &mut m), UwStatus::Argument);
        assert_eq!(uw_train(cpath(&r).as_ptr(), ptr::null(), ptr::null(), ptr::null(), ptr::null_mut()), UwStatus::Argument);
        let two = c("ab");
        assert_eq!(uw_train(cpath(&r).as_ptr(), cpath(&t).as_ptr(), two.as_ptr(), ptr::null(), &mut m), UwStatus::Argument);

        let mut hp = fast_hp();
        hp.eta = 1e200;
        hp.grad_clip = 1e300;
        assert_eq!(uw_train(cpath(&r).as_ptr(), cpath(&t).as_ptr(), ptr::null(), &hp, &mut m), UwStatus::Divergence);
        hp = fast_hp();
        hp.window = 0;
        assert_eq!(uw_train(cpath(&r).as_ptr(), cpath(&t).as_ptr(), ptr::null(), &hp, &mut m), UwStatus::Argument);
        assert!(m.is_null());

        let mut p = 0.0;
        assert_eq!(uw_predict(ptr::null(), c("1").as_ptr(), c("1").as_ptr(), true, &mut p), UwStatus::Argument);
        let mut hp = fast_hp();
        assert_eq!(uw_hyperparams_preset(c("epinions").as_ptr(), &mut hp), UwStatus::Ok);
        assert_eq!(hp.walk_length, 50);
        assert!(last_error().is_none());
    }
}

/// Directory holding the library artifacts next to this test binary.
fn artifact_dir() -> PathBuf {
    let exe = std::env::current_exe().unwrap();
    exe.parent().unwrap().parent().unwrap().to_path_buf()
}

#[test]
fn c_program_links_against_the_header() {
    let crate_dir = Path::new(env!("CARGO_MANIFEST_DIR"));
    let lib_dir = artifact_dir();
    assert!(
        lib_dir.join("libuniwalk_ffi.a").is_file(),
        "static library missing in {}",
        lib_dir.display()
    );
    let dir = tempfile::tempdir().unwrap();
    let exe = dir.path().join("smoke");
    let status = Command::new(std::env::var("CC").unwrap_or_else(|_| "cc".to_owned()))
        .arg("-std=c99")
        .arg("-Wall")
        .arg("-Werror")
        .arg("-I")
        .arg(crate_dir.join("include"))
        .arg(crate_dir.join("tests/smoke.c"))
        .arg(lib_dir.join("libuniwalk_ffi.a"))
        .args(["-lpthread", "-ldl", "-lm", "-o"])
        .arg(&exe)
        .status()
        .expect("C compiler");
    assert!(status.success());

    let (r, t) = dataset(dir.path());
    let out = Command::new(&exe).arg(&r).arg(&t).arg(dir.path().join("m.uw")).output().unwrap();
    assert!(
        out.status.success(),
        "{}{}",
        String::from_utf8_lossy(&out.stdout),
        String::from_utf8_lossy(&out.stderr)
    );
    assert_eq!(String::from_utf8_lossy(&out.stdout), "ok\n");
}

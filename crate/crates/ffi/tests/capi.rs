use std::ffi::{c_char, CString};
use std::ptr;

use hydropde_ffi::*;

fn grid(nx: usize, nz: usize) -> *mut PeGrid {
    let mut g = ptr::null_mut();
    assert_eq!(unsafe { pe_grid_new(nx, nx, nz, 1.0, &mut g) }, PeStatus::Ok);
    g
}

fn last_error() -> String {
    let mut buf = vec![0 as c_char; 256];
    let n = unsafe { pe_last_error_message(buf.as_mut_ptr(), buf.len()) };
    let bytes: Vec<u8> = buf[..n].iter().map(|&c| c as u8).collect();
    String::from_utf8(bytes).unwrap()
}

#[test]
fn grid_lifecycle_and_bad_arguments() {
    let g = grid(8, 4);
    let (mut nx, mut ny, mut nz) = (0, 0, 0);
    unsafe {
        assert_eq!(pe_grid_dims(g, &mut nx, &mut ny, &mut nz), PeStatus::Ok);
        assert_eq!((nx, ny, nz), (8, 8, 4));

        let mut bad = ptr::null_mut();
        assert_ne!(pe_grid_new(8, 8, 0, 1.0, &mut bad), PeStatus::Ok);
        assert!(bad.is_null());
        assert!(pe_last_error_length() > 0);

        assert_eq!(pe_grid_dims(ptr::null(), &mut nx, &mut ny, &mut nz), PeStatus::NullPointer);
        assert!(last_error().contains("null"));
        pe_grid_free(g);
        pe_grid_free(ptr::null_mut());
    }
}

#[test]
fn modes_round_trip_and_stay_real() {
    let g = grid(8, 4);
    unsafe {
        let mut f = ptr::null_mut();
        assert_eq!(pe_field_zeros(g, 2, &mut f), PeStatus::Ok);
        assert_eq!(pe_field_set_mode(f, 1, 2, -1, 3, 0.5, -0.25), PeStatus::Ok);
        let (mut re, mut im) = (0.0, 0.0);
        assert_eq!(pe_field_get_mode(f, 1, -2, 1, 3, &mut re, &mut im), PeStatus::Ok);
        assert_eq!((re, im), (0.5, 0.25));
        assert_eq!(pe_field_get_mode(f, 1, 9, 0, 0, &mut re, &mut im), PeStatus::OutOfRange);
        assert_eq!(pe_field_set_mode(f, 2, 0, 0, 0, 1.0, 0.0), PeStatus::OutOfRange);

        let mut len = 0;
        assert_eq!(pe_field_len(f, &mut len), PeStatus::Ok);
        assert_eq!(len, 2 * 8 * 8 * 4);
        let mut buf = vec![0.0; 2 * len];
        assert_eq!(pe_field_copy_coeffs(f, buf.as_mut_ptr(), 3), PeStatus::Shape);
        assert_eq!(pe_field_copy_coeffs(f, buf.as_mut_ptr(), buf.len()), PeStatus::Ok);
        assert_eq!(buf.iter().filter(|x| **x != 0.0).count(), 4);
        pe_field_free(f);
        pe_grid_free(g);
    }
}

#[test]
fn projection_and_stokes_semigroup() {
    let g = grid(8, 4);
    unsafe {
        let mut f = ptr::null_mut();
        assert_eq!(pe_field_random(g, 2, 3, 8, 4, 0.5, &mut f), PeStatus::Ok);
        let (mut pf, mut ppf) = (ptr::null_mut(), ptr::null_mut());
        assert_eq!(pe_project(f, &mut pf), PeStatus::Ok);
        assert_eq!(pe_project(pf, &mut ppf), PeStatus::Ok);
        let (mut n1, mut n2) = (0.0, 0.0);
        pe_field_l2_norm(pf, &mut n1);
        pe_field_l2_norm(ppf, &mut n2);
        assert!((n1 - n2).abs() <= 1e-13 * n1);

        let mut op = ptr::null_mut();
        assert_eq!(pe_stokes_new(g, &mut op), PeStatus::Ok);
        let mut beta = 0.0;
        pe_stokes_beta(op, &mut beta);
        assert!((beta - std::f64::consts::PI.powi(2) / 4.0).abs() < 1e-12);

        let mut e = ptr::null_mut();
        assert_eq!(pe_stokes_semigroup(op, 1.0, pf, &mut e), PeStatus::Ok);
        let mut ne = 0.0;
        pe_field_l2_norm(e, &mut ne);
        assert!(ne <= (-beta).exp() * n1 * (1.0 + 1e-12));

        let mut r = ptr::null_mut();
        assert_eq!(pe_stokes_resolvent(op, 1.0, 2.0, pf, &mut r), PeStatus::Ok);
        let mut nr = 0.0;
        pe_field_l2_norm(r, &mut nr);
        assert!(nr > 0.0 && nr < n1);

        let mut scalar = ptr::null_mut();
        pe_field_zeros(g, 1, &mut scalar);
        let mut out = ptr::null_mut();
        assert_eq!(pe_project(scalar, &mut out), PeStatus::Shape);

        let other = grid(16, 4);
        let mut op2 = ptr::null_mut();
        pe_stokes_new(other, &mut op2);
        assert_eq!(pe_stokes_semigroup(op2, 1.0, pf, &mut out), PeStatus::Shape);

        for h in [f, pf, ppf, e, r, scalar] {
            pe_field_free(h);
        }
        pe_stokes_free(op);
        pe_stokes_free(op2);
        pe_grid_free(g);
        pe_grid_free(other);
    }
}

#[test]
fn checkpoint_round_trip() {
    let dir = tempfile::tempdir().unwrap();
    let path = CString::new(dir.path().join("f.bin").to_str().unwrap()).unwrap();
    let g = grid(8, 4);
    unsafe {
        let mut f = ptr::null_mut();
        pe_field_random(g, 2, 9, 8, 4, 0.0, &mut f);
        assert_eq!(pe_checkpoint_save(f, path.as_ptr()), PeStatus::Ok);
        let mut back = ptr::null_mut();
        assert_eq!(pe_checkpoint_load(path.as_ptr(), &mut back), PeStatus::Ok);
        let mut len = 0;
        pe_field_len(f, &mut len);
        let (mut a, mut b) = (vec![0.0; 2 * len], vec![0.0; 2 * len]);
        pe_field_copy_coeffs(f, a.as_mut_ptr(), a.len());
        pe_field_copy_coeffs(back, b.as_mut_ptr(), b.len());
        assert!(a.iter().zip(&b).all(|(x, y)| x.to_bits() == y.to_bits()));

        let missing = CString::new(dir.path().join("nope.bin").to_str().unwrap()).unwrap();
        let mut none = ptr::null_mut();
        assert_eq!(pe_checkpoint_load(missing.as_ptr(), &mut none), PeStatus::Io);
        assert_eq!(pe_checkpoint_load(ptr::null(), &mut none), PeStatus::NullPointer);
        pe_field_free(f);
        pe_field_free(back);
        pe_grid_free(g);
    }
}

#[test]
fn header_declares_every_entry_point() {
    let header = std::fs::read_to_string(concat!(env!("CARGO_MANIFEST_DIR"), "/include/hydropde.h")).unwrap();
    for name in [
        "typedef struct PeGrid PeGrid",
        "typedef struct PeField PeField",
        "typedef struct PeStokes PeStokes",
        "PeStatus_Ok = 0",
        "pe_last_error_message",
        "pe_grid_new",
        "pe_field_random",
        "pe_field_copy_coeffs",
        "pe_project",
        "pe_stokes_resolvent",
        "pe_checkpoint_load",
    ] {
        assert!(header.contains(name), "header lacks {name}");
    }
}

#[test]
fn header_compiles_as_c() {
    let header = concat!(env!("CARGO_MANIFEST_DIR"), "/include/hydropde.h");
    match std::process::Command::new("cc").args(["-fsyntax-only", "-Wall", "-Werror", "-x", "c", header]).status() {
        Ok(s) => assert!(s.success(), "cc rejected the header"),
        Err(_) => eprintln!("no C compiler available; skipped"),
    }
}

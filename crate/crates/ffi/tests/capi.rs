use std::ffi::{CStr, CString};
use std::ptr;

use medrelax_ffi::*;

fn last_error() -> String {
    let p = medrelax_last_error();
    assert!(!p.is_null());
    unsafe { CStr::from_ptr(p) }.to_string_lossy().into_owned()
}

#[test]
fn gibbs_and_med_round_trip() {
    unsafe {
        let mut h = ptr::null_mut();
        assert_eq!(
            medrelax_hamiltonian_ising_chain(4, 1.0, 1.0, 0.3, &mut h),
            MedrelaxStatus::Ok
        );
        assert_eq!(medrelax_hamiltonian_num_sites(h), 4);

        let mut g = ptr::null_mut();
        assert_eq!(medrelax_gibbs_solve(h, 0, &mut g), MedrelaxStatus::Ok);
        let mut f = 0.0;
        assert_eq!(medrelax_gibbs_free_energy(g, &mut f), MedrelaxStatus::Ok);

        let mut s = ptr::null_mut();
        assert_eq!(medrelax_med_solve(h, 1, 0.0, &mut s), MedrelaxStatus::Ok);
        let mut v = 0.0;
        assert_eq!(medrelax_med_value(s, &mut v), MedrelaxStatus::Ok);
        assert!((v - f).abs() < 1e-6);

        let (a, b, c) = ([0usize], [1usize], [2usize, 3]);
        let mut i = -1.0;
        assert_eq!(
            medrelax_gibbs_cmi(g, a.as_ptr(), 1, b.as_ptr(), 1, c.as_ptr(), 2, &mut i),
            MedrelaxStatus::Ok
        );
        assert!(i.abs() < 1e-10);
        let mut q = MedrelaxRecovery::default();
        assert_eq!(
            medrelax_gibbs_recovery(g, a.as_ptr(), 1, b.as_ptr(), 1, c.as_ptr(), 2, &mut q),
            MedrelaxStatus::Ok
        );
        assert!(q.trace_distance < 1e-7);

        medrelax_med_free(s);
        medrelax_gibbs_free(g);
        medrelax_hamiltonian_free(h);
    }
}

#[test]
fn marginal_buffer() {
    unsafe {
        let mut h = ptr::null_mut();
        assert_eq!(
            medrelax_hamiltonian_tfim_chain(3, 0.5, &mut h),
            MedrelaxStatus::Ok
        );
        let mut g = ptr::null_mut();
        assert_eq!(medrelax_gibbs_solve(h, 0, &mut g), MedrelaxStatus::Ok);
        let sites = [2usize, 0];
        let mut written = 0;
        let mut small = [0.0; 4];
        assert_eq!(
            medrelax_gibbs_marginal(
                g,
                sites.as_ptr(),
                2,
                small.as_mut_ptr(),
                small.len(),
                &mut written
            ),
            MedrelaxStatus::InvalidArgument
        );
        assert_eq!(written, 32);
        let mut buf = vec![0.0; written];
        assert_eq!(
            medrelax_gibbs_marginal(
                g,
                sites.as_ptr(),
                2,
                buf.as_mut_ptr(),
                buf.len(),
                &mut written
            ),
            MedrelaxStatus::Ok
        );
        let trace: f64 = (0..4).map(|i| buf[2 * (i * 4 + i)]).sum();
        assert!((trace - 1.0).abs() < 1e-12);
        medrelax_gibbs_free(g);
        medrelax_hamiltonian_free(h);
    }
}

#[test]
fn errors_are_reported() {
    unsafe {
        let mut h = ptr::null_mut();
        let bad = CString::new(
            "beta = 1.0\n[lattice]\nextents = [2]\n[[term]]\nsites = [0, 5]\npauli = \"ZZ\"\n",
        )
        .unwrap();
        assert_eq!(
            medrelax_hamiltonian_from_toml(bad.as_ptr(), &mut h),
            MedrelaxStatus::InvalidArgument
        );
        assert!(h.is_null());
        assert!(last_error().contains('5'));

        let garbage = CString::new("[[[").unwrap();
        assert_eq!(
            medrelax_hamiltonian_from_toml(garbage.as_ptr(), &mut h),
            MedrelaxStatus::Config
        );

        assert_eq!(
            medrelax_hamiltonian_from_toml(ptr::null(), &mut h),
            MedrelaxStatus::NullPointer
        );
        assert_eq!(
            medrelax_gibbs_solve(ptr::null(), 0, ptr::null_mut()),
            MedrelaxStatus::NullPointer
        );

        assert_eq!(
            medrelax_hamiltonian_tfim_chain(6, 1.0, &mut h),
            MedrelaxStatus::Ok
        );
        let mut g = ptr::null_mut();
        assert_eq!(medrelax_gibbs_solve(h, 4, &mut g), MedrelaxStatus::SizeCap);
        assert!(g.is_null());
        assert_eq!(
            medrelax_med_solve(h, 0, 0.0, &mut ptr::null_mut()),
            MedrelaxStatus::InvalidArgument
        );
        medrelax_hamiltonian_free(h);
        medrelax_hamiltonian_free(ptr::null_mut());

        let ok = CString::new("beta = 1.0\n[lattice]\nextents = [2]\n").unwrap();
        assert_eq!(
            medrelax_hamiltonian_from_toml(ok.as_ptr(), &mut h),
            MedrelaxStatus::Ok
        );
        assert!(medrelax_last_error().is_null());
        medrelax_hamiltonian_free(h);
    }
}

#[test]
fn verify_filter() {
    let filter = CString::new("petz.quadrature").unwrap();
    let mut passed = -1;
    unsafe {
        assert_eq!(
            medrelax_verify(1, filter.as_ptr(), &mut passed),
            MedrelaxStatus::Ok
        );
    }
    assert_eq!(passed, 1);
    let none = CString::new("nothing").unwrap();
    unsafe {
        assert_eq!(
            medrelax_verify(1, none.as_ptr(), &mut passed),
            MedrelaxStatus::InvalidArgument
        );
    }
}

#[test]
fn version_string() {
    let v = unsafe { CStr::from_ptr(medrelax_version()) };
    assert_eq!(v.to_str().unwrap(), env!("CARGO_PKG_VERSION"));
}

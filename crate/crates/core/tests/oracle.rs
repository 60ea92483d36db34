use std::f64::consts::FRAC_PI_4;

use carl_core::cli::compare_records;
use carl_core::fock_oracle::{
    build_hamiltonian, coherent_fock, evolve_exact, oracle_observables, run_oracle, FockConfig, FockError,
};
use carl_core::observables::record_at;
use carl_core::{build_generator, ModelParams, OpticalInit};

fn params(delta: f64, chi: f64) -> ModelParams {
    ModelParams::new(delta, chi).unwrap()
}

fn roomy() -> FockConfig {
    FockConfig { dim_cap: 1 << 16, ..Default::default() }
}

#[test]
fn vacuum_matches_gaussian_record() {
    let p = params(1.0, 1.0);
    let gen = build_generator(p);
    for t in [0.75, 1.0] {
        let fock = run_oracle(p, OpticalInit::vacuum(), t, &roomy()).unwrap();
        let gauss = record_at(&gen, OpticalInit::vacuum(), t).unwrap();
        for c in compare_records(&gauss, &fock.record, 1e-6, 1e-4) {
            assert!(c.pass, "t={t} {c:?}");
        }
    }
}

#[test]
fn decoupled_case_is_exact() {
    let p = params(1.0, 0.0);
    let init = OpticalInit::from_intensity(4.0, 0.3).unwrap();
    let fock = run_oracle(p, init, 2.0, &roomy()).unwrap();
    let gauss = record_at(&build_generator(p), init, 2.0).unwrap();
    assert_eq!(fock.record.n1, 0.0);
    assert!(fock.record.g11.is_none() && gauss.g11.is_none());
    for c in compare_records(&gauss, &fock.record, 1e-10, 1e-10) {
        assert!(c.pass, "{c:?}");
    }
}

#[test]
fn doubling_the_truncation_changes_nothing_visible() {
    let p = params(-1.0, 1.0);
    let init = OpticalInit::from_intensity(1.0, FRAC_PI_4).unwrap();
    let run = run_oracle(p, init, 0.5, &roomy()).unwrap();
    let bigger = FockConfig { nmax_atom: 2 * run.nmax_atom, nmax_phot: 2 * run.nmax_phot, ..roomy() };
    let h = build_hamiltonian(p, &bigger).unwrap();
    let psi = evolve_exact(&coherent_fock(init, &bigger).unwrap(), &h, 0.5).unwrap();
    let doubled = oracle_observables(&psi, bigger.tail_tol).unwrap();
    for c in compare_records(&run.record, &doubled, 1e-6, 1e-4) {
        assert!(c.pass, "{c:?}");
    }
}

#[test]
fn small_cap_reports_inadequate_truncation() {
    let cap = FockConfig { dim_cap: 4096, ..Default::default() };
    let init = OpticalInit::from_intensity(25.0, 0.0).unwrap();
    let err = run_oracle(params(1.0, 1.0), init, 2.0, &cap).unwrap_err();
    match err {
        FockError::TruncationInadequate { tail_atom, tail_phot, .. } => {
            assert!(tail_atom > cap.tail_tol || tail_phot > cap.tail_tol)
        }
        other => panic!("{other:?}"),
    }
}

#[test]
fn untrusted_state_is_refused() {
    let cfg = FockConfig::new(6, 6).unwrap();
    let h = build_hamiltonian(params(1.0, 1.0), &cfg).unwrap();
    let psi = evolve_exact(&coherent_fock(OpticalInit::vacuum(), &cfg).unwrap(), &h, 2.0).unwrap();
    assert!(!psi.is_trusted(cfg.tail_tol));
    assert!(matches!(oracle_observables(&psi, cfg.tail_tol), Err(FockError::TruncationInadequate { .. })));
}

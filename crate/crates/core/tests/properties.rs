use std::f64::consts::TAU;

use carl_core::fock_oracle::{build_hamiltonian, coherent_fock, evolve_with, EvolutionMethod, FockConfig};
use carl_core::gaussian::{evolve, initial_state, occupation};
use carl_core::model::{commutator_metric, conjugation_permutation, eigenfrequencies, critical_condition};
use carl_core::observables::{record_at, threshold_g2, CriticalDetuning};
use carl_core::propagator::max_abs;
use carl_core::{build_generator, classify_regime, green_function, Mode, ModelParams, OpticalInit};
use num_complex::Complex64;
use proptest::prelude::*;

fn params(delta: f64, chi: f64) -> ModelParams {
    ModelParams::new(delta, chi).unwrap()
}

fn char_poly(w: Complex64, delta: f64, chi: f64) -> Complex64 {
    let w2 = w * w;
    w2 * w2 - w2 * (1.0 + delta * delta) + delta * (delta - 4.0 * chi * chi)
}

/// Distance (in the critical-condition sense) from every threshold surface.
fn far_from_thresholds(delta: f64, chi: f64) -> bool {
    let c2 = chi * chi;
    delta.abs() > 1e-2
        && (delta - 4.0 * c2).abs() > 1e-2
        && (delta >= 0.0 || ((1.0 - delta * delta).powi(2) - 16.0 * c2 * delta.abs()).abs() > 1e-2)
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(200))]

    #[test]
    fn generator_structure(delta in -5.0..5.0f64, chi in 0.0..3.0f64) {
        let m = *build_generator(params(delta, chi)).matrix();
        let j = commutator_metric();
        let k = conjugation_permutation();
        prop_assert_eq!(m * j + j * m.transpose(), nalgebra::Matrix4::zeros());
        prop_assert_eq!(k * m * k, -m);
    }

    #[test]
    fn spectrum_is_closed_under_negation_and_conjugation(delta in -4.0..4.0f64, chi in 0.0..2.0f64) {
        let ev = eigenfrequencies(&build_generator(params(delta, chi))).unwrap();
        let scale = ev.iter().map(|z| z.norm()).fold(1.0, f64::max);
        for w in ev {
            prop_assert!(char_poly(w, delta, chi).norm() < 1e-8 * scale.powi(4), "{w}");
            for image in [-w, w.conj()] {
                // a defective pair splits by O(sqrt(eps)); stay generous
                let nearest = ev.iter().map(|z| (z - image).norm()).fold(f64::INFINITY, f64::min);
                prop_assert!(nearest < 1e-6 * scale, "{w} has no partner {image}");
            }
        }
    }

    #[test]
    fn regime_label_ignores_tolerance_away_from_thresholds(delta in -4.0..4.0f64, chi in 0.05..2.0f64) {
        prop_assume!(far_from_thresholds(delta, chi));
        let gen = build_generator(params(delta, chi));
        let labels: Vec<_> = [1e-12, 1e-9, 1e-6]
            .iter()
            .map(|&tol| classify_regime(&gen, tol).unwrap().regime)
            .collect();
        prop_assert_eq!(labels[0], labels[1]);
        prop_assert_eq!(labels[1], labels[2]);
        prop_assert!(critical_condition(params(delta, chi), 1e-9).is_none());
    }

    #[test]
    fn propagator_composes(delta in -3.0..3.0f64, chi in 0.0..1.5f64, s in 0.0..2.0f64, t in 0.0..2.0f64) {
        let gen = build_generator(params(delta, chi));
        let gs = green_function(&gen, s).unwrap();
        let gt = green_function(&gen, t).unwrap();
        let gst = green_function(&gen, s + t).unwrap();
        let err = max_abs(&(gs.matrix() * gt.matrix() - gst.matrix()));
        prop_assert!(err <= 1e-12 * max_abs(gst.matrix()).max(1.0), "{err:e}");
        let back = green_function(&gen, -t).unwrap();
        let id = back.matrix() * gt.matrix();
        prop_assert!(max_abs(&(id - nalgebra::Matrix4::identity())) < 1e-12 * max_abs(gt.matrix()).powi(2).max(1.0));
    }

    #[test]
    fn gaussian_evolution_keeps_commutators(
        delta in -3.0..3.0f64, chi in 0.0..1.5f64, alpha2 in 0.0..10.0f64, phi in 0.0..TAU, t in 0.0..3.0f64
    ) {
        let gen = build_generator(params(delta, chi));
        let g = green_function(&gen, t).unwrap();
        let s = evolve(&initial_state(OpticalInit::from_intensity(alpha2, phi).unwrap()), &g).unwrap();
        let (comm, conj, mean) = s.invariant_residuals();
        let scale = max_abs(g.matrix()).powi(2).max(1.0);
        prop_assert!(comm < 1e-13 * scale * (1.0 + alpha2), "{comm:e}");
        prop_assert!(conj < 1e-13 * scale * (1.0 + alpha2), "{conj:e}");
        prop_assert!(mean < 1e-13 * scale.sqrt() * (1.0 + alpha2.sqrt()), "{mean:e}");
        prop_assert!(occupation(&s, Mode::Atomic) >= -1e-12 * scale);
        prop_assert!(occupation(&s, Mode::Optical) >= -1e-12 * scale);
    }

    #[test]
    fn quantum_bound_dominates(
        delta in -3.0..3.0f64, chi in 0.05..1.5f64, alpha2 in 0.0..10.0f64, phi in 0.0..TAU, t in 0.01..4.0f64
    ) {
        let r = record_at(&build_generator(params(delta, chi)), OpticalInit::from_intensity(alpha2, phi).unwrap(), t).unwrap();
        if let (Some(c), Some(q)) = (r.classical_bound, r.quantum_bound) {
            prop_assert!(q >= c);
            prop_assert!(r.g13.unwrap() <= q + 1e-9 * q, "{r:?}");
        }
    }

    #[test]
    fn threshold_value_is_bounded(alpha2 in 0.0..1e6f64, phi in 0.0..TAU, chi in 0.01..5.0f64) {
        for surface in [CriticalDetuning::Zero, CriticalDetuning::FourChiSquared] {
            let init = OpticalInit::from_intensity(alpha2, phi).unwrap();
            let g = threshold_g2(params(surface.value(chi), chi), init, surface, 1e-9).unwrap();
            prop_assert!((1.0..=3.0).contains(&g), "{g}");
        }
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn fock_hamiltonian_is_symmetric(delta in -3.0..3.0f64, chi in 0.0..2.0f64, na in 2usize..12, np in 2usize..12) {
        let h = build_hamiltonian(params(delta, chi), &FockConfig::new(na, np).unwrap()).unwrap();
        prop_assert_eq!(h.asymmetry(), 0.0);
    }

    #[test]
    fn fock_evolution_is_unitary(delta in -2.0..2.0f64, chi in 0.0..1.0f64, alpha2 in 0.0..2.0f64, phi in 0.0..TAU, t in -2.0..2.0f64) {
        let cfg = FockConfig { nmax_atom: 10, nmax_phot: 20, tail_tol: 1e-4, ..Default::default() };
        let h = build_hamiltonian(params(delta, chi), &cfg).unwrap();
        let psi0 = coherent_fock(OpticalInit::from_intensity(alpha2, phi).unwrap(), &cfg).unwrap();
        let dense = evolve_with(&psi0, &h, t, EvolutionMethod::Dense).unwrap();
        let cheb = evolve_with(&psi0, &h, t, EvolutionMethod::Chebyshev).unwrap();
        prop_assert!((dense.norm() - 1.0).abs() < 1e-12);
        prop_assert!((cheb.norm() - 1.0).abs() < 1e-12);
        let diff = dense.amplitudes().iter().zip(cheb.amplitudes()).map(|(a, b)| (a - b).norm()).fold(0.0, f64::max);
        prop_assert!(diff < 1e-11, "{diff:e}");
        let e0 = h.expectation(&psi0);
        prop_assert!((h.expectation(&cheb) - e0).abs() <= 1e-10 * e0.abs().max(1.0));
    }
}

//! Green's-function matrix `G(t) = exp(i M t)` of the linear Heisenberg system.
//!
//! The exponential is evaluated with scaling and squaring over diagonal Padé
//! approximants, which covers the degenerate threshold regime (where `M` is
//! not diagonalizable and `G` picks up polynomial secular terms) on the same
//! code path as every other regime.

use nalgebra::Matrix4;
use num_complex::Complex64;
use serde::Serialize;
use thiserror::Error;

use crate::model::{commutator_metric, DriftGenerator, CONJ_PERM};

pub type CMatrix4 = Matrix4<Complex64>;

/// Default cap on `|G_ij|` beyond which [`green_function`] refuses to return.
pub const DEFAULT_OVERFLOW_CAP: f64 = 1e150;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum PropagatorError {
    #[error("time must be finite, got {0}")]
    NonFiniteTime(f64),
    #[error("propagator overflow at t={t}: max |G_ij| = {max_entry:e} exceeds cap {cap:e}")]
    Overflow { t: f64, max_entry: f64, cap: f64 },
}

#[derive(Debug, Clone, PartialEq)]
pub struct Propagator {
    t: f64,
    gmat: CMatrix4,
    generator: DriftGenerator,
}

impl Propagator {
    /// Wraps a precomputed matrix without checking it.
    pub fn from_matrix(generator: DriftGenerator, t: f64, gmat: CMatrix4) -> Self {
        Self { t, gmat, generator }
    }

    pub fn identity(generator: DriftGenerator) -> Self {
        Self { t: 0.0, gmat: CMatrix4::identity(), generator }
    }

    pub fn t(&self) -> f64 {
        self.t
    }

    pub fn matrix(&self) -> &CMatrix4 {
        &self.gmat
    }

    pub fn generator(&self) -> &DriftGenerator {
        &self.generator
    }
}

pub fn max_abs(m: &CMatrix4) -> f64 {
    m.iter().map(|z| z.norm()).fold(0.0, f64::max)
}

fn one_norm(m: &CMatrix4) -> f64 {
    (0..4).map(|j| m.column(j).iter().map(|z| z.norm()).sum::<f64>()).fold(0.0, f64::max)
}

/// `K A K` for the annihilator/creator swap `K`.
pub fn permute_conj(m: &CMatrix4) -> CMatrix4 {
    CMatrix4::from_fn(|i, j| m[(CONJ_PERM[i], CONJ_PERM[j])])
}

const THETA: [(usize, f64); 4] = [
    (3, 1.495585217958292e-2),
    (5, 2.53939833006323e-1),
    (7, 9.504178996162932e-1),
    (9, 2.097847961257068e0),
];
const THETA_13: f64 = 5.371920351148152e0;

const PADE_3: [f64; 4] = [120.0, 60.0, 12.0, 1.0];
const PADE_5: [f64; 6] = [30240.0, 15120.0, 3360.0, 420.0, 30.0, 1.0];
const PADE_7: [f64; 8] = [17297280.0, 8648640.0, 1995840.0, 277200.0, 25200.0, 1512.0, 56.0, 1.0];
const PADE_9: [f64; 10] = [
    17643225600.0,
    8821612800.0,
    2075673600.0,
    302702400.0,
    30270240.0,
    2162160.0,
    110880.0,
    3960.0,
    90.0,
    1.0,
];
const PADE_13: [f64; 14] = [
    64764752532480000.0,
    32382376266240000.0,
    7771770303897600.0,
    1187353796428800.0,
    129060195264000.0,
    10559470521600.0,
    670442572800.0,
    33522128640.0,
    1323241920.0,
    40840800.0,
    960960.0,
    16380.0,
    182.0,
    1.0,
];

fn pade_low(a: &CMatrix4, b: &[f64]) -> (CMatrix4, CMatrix4) {
    let id = CMatrix4::identity();
    let a2 = a * a;
    let mut even = id * Complex64::from(b[0]);
    let mut odd = id * Complex64::from(b[1]);
    let mut power = id;
    for k in 1..b.len() / 2 {
        power *= a2;
        even += power * Complex64::from(b[2 * k]);
        odd += power * Complex64::from(b[2 * k + 1]);
    }
    (a * odd, even)
}

fn pade_13(a: &CMatrix4) -> (CMatrix4, CMatrix4) {
    let b = PADE_13.map(Complex64::from);
    let id = CMatrix4::identity();
    let a2 = a * a;
    let a4 = a2 * a2;
    let a6 = a4 * a2;
    let u_inner = a6 * (a6 * b[13] + a4 * b[11] + a2 * b[9]) + a6 * b[7] + a4 * b[5] + a2 * b[3] + id * b[1];
    let v = a6 * (a6 * b[12] + a4 * b[10] + a2 * b[8]) + a6 * b[6] + a4 * b[4] + a2 * b[2] + id * b[0];
    (a * u_inner, v)
}

/// Matrix exponential by scaling and squaring with Padé degree selected from
/// the 1-norm of `a`.
pub fn expm(a: &CMatrix4) -> CMatrix4 {
    let norm = one_norm(a);
    let solve = |(u, v): (CMatrix4, CMatrix4)| {
        let q = v - u;
        let p = v + u;
        q.lu().solve(&p).expect("Padé denominator is nonsingular within its norm bound")
    };
    for (m, theta) in THETA {
        if norm <= theta {
            let coeffs: &[f64] = match m {
                3 => &PADE_3,
                5 => &PADE_5,
                7 => &PADE_7,
                _ => &PADE_9,
            };
            return solve(pade_low(a, coeffs));
        }
    }
    let s = if norm > THETA_13 { (norm / THETA_13).log2().ceil() as i32 } else { 0 };
    let scaled = a * Complex64::from(2f64.powi(-s));
    let mut r = solve(pade_13(&scaled));
    for _ in 0..s {
        r = r * r;
    }
    r
}

/// Propagator with the default overflow cap.
pub fn green_function(gen: &DriftGenerator, t: f64) -> Result<Propagator, PropagatorError> {
    green_function_capped(gen, t, DEFAULT_OVERFLOW_CAP)
}

/// `G(t) = exp(i M t)`, projected onto the exact symmetry `K G K = conj(G)`.
pub fn green_function_capped(gen: &DriftGenerator, t: f64, cap: f64) -> Result<Propagator, PropagatorError> {
    if !t.is_finite() {
        return Err(PropagatorError::NonFiniteTime(t));
    }
    let exponent = gen.matrix().map(|m| Complex64::new(0.0, m * t));
    let g = expm(&exponent);
    let mirrored = permute_conj(&g).map(|z| z.conj());
    let gmat = (g + mirrored).map(|z| z * 0.5);
    let finite = gmat.iter().all(|z| z.re.is_finite() && z.im.is_finite());
    let max_entry = if finite { max_abs(&gmat) } else { f64::INFINITY };
    if max_entry > cap {
        return Err(PropagatorError::Overflow { t, max_entry, cap });
    }
    Ok(Propagator { t, gmat, generator: *gen })
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct InvariantResidual {
    pub name: &'static str,
    pub residual: f64,
}

/// Residuals of the structural invariants of `p`:
///
/// * `symplectic`: `max |G J Gᵀ − J|`
/// * `conjugation`: `max |K G K − conj(G)|`
/// * `composition`: `max |G(t) − G(t/2)²|`, relative to `max(1, max |G(t)|)`
pub fn verify_propagator(p: &Propagator) -> Vec<InvariantResidual> {
    let g = &p.gmat;
    let j = commutator_metric().map(Complex64::from);
    let symplectic = max_abs(&(g * j * g.transpose() - j));
    let conjugation = max_abs(&(permute_conj(g) - g.map(|z| z.conj())));
    let composition = match green_function_capped(&p.generator, 0.5 * p.t, f64::INFINITY) {
        Ok(half) => {
            let h = half.matrix();
            max_abs(&(g - h * h)) / max_abs(g).max(1.0)
        }
        Err(_) => f64::INFINITY,
    };
    vec![
        InvariantResidual { name: "symplectic", residual: symplectic },
        InvariantResidual { name: "conjugation", residual: conjugation },
        InvariantResidual { name: "composition", residual: composition },
    ]
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{build_generator, ModelParams};

    fn gen(d: f64, c: f64) -> DriftGenerator {
        build_generator(ModelParams::new(d, c).unwrap())
    }

    /// Taylor series with scaling and squaring, summed until terms vanish.
    fn taylor_expm(a: &CMatrix4) -> CMatrix4 {
        let norm = max_abs(a) * 4.0;
        let s = if norm > 0.5 { (norm / 0.5).log2().ceil() as i32 } else { 0 };
        let scaled = a * Complex64::from(2f64.powi(-s));
        let mut sum = CMatrix4::identity();
        let mut term = CMatrix4::identity();
        for k in 1..60 {
            term = term * scaled / Complex64::from(k as f64);
            sum += term;
            if max_abs(&term) < 1e-20 {
                break;
            }
        }
        for _ in 0..s {
            sum = sum * sum;
        }
        sum
    }

    #[test]
    fn identity_at_zero_time() {
        for &(d, c) in &[(1.0, 1.0), (-1.0, 1.0), (0.0, 1.0)] {
            let p = green_function(&gen(d, c), 0.0).unwrap();
            assert_eq!(*p.matrix(), CMatrix4::identity());
        }
    }

    #[test]
    fn decoupled_evolution_is_diagonal_phase() {
        let t = 1.7;
        let p = green_function(&gen(2.0, 0.0), t).unwrap();
        let expect = [-t, t, -2.0 * t, 2.0 * t];
        for i in 0..4 {
            for j in 0..4 {
                let want = if i == j { Complex64::new(0.0, expect[i]).exp() } else { Complex64::new(0.0, 0.0) };
                assert!((p.matrix()[(i, j)] - want).norm() < 1e-14);
            }
        }
    }

    #[test]
    fn threshold_regime_matches_taylor_oracle() {
        let g = gen(0.0, 1.0);
        let t = 5.0;
        let p = green_function(&g, t).unwrap();
        let oracle = taylor_expm(&g.matrix().map(|m| Complex64::new(0.0, m * t)));
        let err = max_abs(&(p.matrix() - oracle));
        assert!(err < 1e-11 * max_abs(&oracle), "err={err:e}");
        // secular growth: at the threshold entries grow linearly, not exponentially
        let late = green_function(&g, 50.0).unwrap();
        let ratio = max_abs(late.matrix()) / max_abs(p.matrix());
        assert!(ratio > 3.0 && ratio < 30.0, "ratio={ratio}");
    }

    #[test]
    fn pade_orders_agree_with_taylor() {
        // norms spanning every Padé branch
        for &t in &[1e-3, 0.05, 0.2, 0.5, 1.3, 4.0, 12.0] {
            let g = gen(-0.7, 0.9);
            let a = g.matrix().map(|m| Complex64::new(0.0, m * t));
            let err = max_abs(&(expm(&a) - taylor_expm(&a)));
            assert!(err < 1e-12 * max_abs(&taylor_expm(&a)).max(1.0), "t={t} err={err:e}");
        }
    }

    #[test]
    fn verify_identity_is_exact() {
        let p = Propagator::identity(gen(1.0, 1.0));
        for r in verify_propagator(&p) {
            assert_eq!(r.residual, 0.0, "{}", r.name);
        }
    }

    #[test]
    fn verify_regime_ii_at_t8() {
        let p = green_function(&gen(1.0, 1.0), 8.0).unwrap();
        let res = verify_propagator(&p);
        assert_eq!(res[1].residual, 0.0);
        assert!(res[2].residual < 1e-12, "{res:?}");
        // |G| ~ e^8 here; the symplectic residual is rounding-limited at eps·|G|²
        let bound = 16.0 * f64::EPSILON * max_abs(p.matrix()).powi(2);
        assert!(res[0].residual < bound, "{res:?} bound {bound:e}");
    }

    #[test]
    fn corruption_shows_up_in_symplectic_residual() {
        let p = green_function(&gen(1.0, 1.0), 1.0).unwrap();
        let mut m = *p.matrix();
        m[(0, 2)] += Complex64::new(1e-3, 0.0);
        let bad = Propagator::from_matrix(*p.generator(), p.t(), m);
        let res = verify_propagator(&bad);
        assert!(res[0].residual > 1e-4 && res[0].residual < 1e-1, "{res:?}");
        assert!(res[1].residual > 1e-4);
    }

    #[test]
    fn overflow_is_reported() {
        let g = gen(1.0, 1.0);
        assert!(matches!(green_function(&g, 400.0), Err(PropagatorError::Overflow { .. })));
        assert!(matches!(green_function_capped(&g, 10.0, 10.0), Err(PropagatorError::Overflow { .. })));
        assert!(matches!(green_function(&g, f64::NAN), Err(PropagatorError::NonFiniteTime(_))));
    }
}

//! Gaussian-state representation of the atom-photon system.
//!
//! A state is held as the vector of first moments `<x_i>` and the ordered
//! (non-symmetrized) second-moment matrix `S_ij = <δx_i δx_j>` of the
//! fluctuations `δx = x − <x>`, with `x = (c, c†, a, a†)`. Since `S` keeps the
//! operator order, `S − Sᵀ = J` and normally ordered correlators reduce to
//! plain pair contractions.

use std::f64::consts::TAU;

use nalgebra::Vector4;
use num_complex::Complex64;
use serde::Serialize;
use thiserror::Error;

use crate::model::{commutator_metric, CONJ_PERM};
use crate::propagator::{max_abs, CMatrix4, Propagator, DEFAULT_OVERFLOW_CAP};

pub type CVector4 = Vector4<Complex64>;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum GaussianError {
    #[error("optical amplitude must be finite and non-negative, got {0}")]
    InvalidAmplitude(f64),
    #[error("optical phase must be finite, got {0}")]
    InvalidPhase(f64),
    #[error("moment overflow at t={t}: max entry {max_entry:e} exceeds cap {cap:e}")]
    Overflow { t: f64, max_entry: f64, cap: f64 },
}

/// Mode operators, in the order used by every vector and matrix in the crate.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize)]
pub enum Op {
    /// atomic side-mode annihilator `c`
    C,
    /// `c†`
    CDag,
    /// probe annihilator `a`
    A,
    /// `a†`
    ADag,
}

impl Op {
    pub const ALL: [Op; 4] = [Op::C, Op::CDag, Op::A, Op::ADag];

    pub fn index(self) -> usize {
        self as usize
    }

    pub fn from_index(i: usize) -> Option<Op> {
        Self::ALL.get(i).copied()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize)]
pub enum Mode {
    Atomic,
    Optical,
}

impl Mode {
    pub fn annihilator(self) -> Op {
        match self {
            Mode::Atomic => Op::C,
            Mode::Optical => Op::A,
        }
    }

    pub fn creator(self) -> Op {
        match self {
            Mode::Atomic => Op::CDag,
            Mode::Optical => Op::ADag,
        }
    }
}

/// Initial coherent amplitude of the probe, `α = |α| e^{−iφ}`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct OpticalInit {
    amp: f64,
    phase: f64,
}

impl OpticalInit {
    /// `phase` is reduced into `[0, 2π)`.
    pub fn new(amp: f64, phase: f64) -> Result<Self, GaussianError> {
        if !(amp.is_finite() && amp >= 0.0) {
            return Err(GaussianError::InvalidAmplitude(amp));
        }
        if !phase.is_finite() {
            return Err(GaussianError::InvalidPhase(phase));
        }
        let mut phase = phase.rem_euclid(TAU);
        if phase >= TAU {
            phase = 0.0;
        }
        Ok(Self { amp, phase })
    }

    /// From the intensity `|α|²`.
    pub fn from_intensity(alpha2: f64, phase: f64) -> Result<Self, GaussianError> {
        if !(alpha2.is_finite() && alpha2 >= 0.0) {
            return Err(GaussianError::InvalidAmplitude(alpha2));
        }
        Self::new(alpha2.sqrt(), phase)
    }

    pub fn vacuum() -> Self {
        Self { amp: 0.0, phase: 0.0 }
    }

    pub fn amp(&self) -> f64 {
        self.amp
    }

    pub fn phase(&self) -> f64 {
        self.phase
    }

    pub fn intensity(&self) -> f64 {
        self.amp * self.amp
    }

    pub fn alpha(&self) -> Complex64 {
        Complex64::from_polar(self.amp, -self.phase)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct GaussianState {
    mean: CVector4,
    smat: CMatrix4,
    t: f64,
}

impl GaussianState {
    pub fn from_parts(mean: CVector4, smat: CMatrix4) -> Self {
        Self { mean, smat, t: 0.0 }
    }

    pub fn mean(&self) -> &CVector4 {
        &self.mean
    }

    pub fn smat(&self) -> &CMatrix4 {
        &self.smat
    }

    pub fn t(&self) -> f64 {
        self.t
    }

    /// Contraction `<δx_i δx_j>`.
    pub fn contraction(&self, i: Op, j: Op) -> Complex64 {
        self.smat[(i.index(), j.index())]
    }

    /// Fluctuation occupation `<δx† δx>` of `mode`.
    pub fn fluctuation_occupation(&self, mode: Mode) -> f64 {
        self.contraction(mode.creator(), mode.annihilator()).re
    }

    /// Rescales the atomic operators by `ka` and the optical ones by `ko`.
    /// Moments become `ka^(#atomic ops) · ko^(#optical ops)` times the originals.
    pub(crate) fn mode_scaled(&self, ka: f64, ko: f64) -> Self {
        let k = [ka, ka, ko, ko];
        let mean = CVector4::from_fn(|i, _| self.mean[i] * k[i]);
        let smat = CMatrix4::from_fn(|i, j| self.smat[(i, j)] * (k[i] * k[j]));
        Self { mean, smat, t: self.t }
    }

    /// Largest deviations from the structural invariants: commutator content,
    /// conjugation symmetry of `S` and of the mean.
    pub fn invariant_residuals(&self) -> (f64, f64, f64) {
        let j = commutator_metric().map(Complex64::from);
        let comm = max_abs(&(self.smat - self.smat.transpose() - j));
        let mut conj: f64 = 0.0;
        for i in 0..4 {
            for k in 0..4 {
                let mirrored = self.smat[(CONJ_PERM[k], CONJ_PERM[i])];
                conj = conj.max((mirrored - self.smat[(i, k)].conj()).norm());
            }
        }
        let mean = (self.mean[1] - self.mean[0].conj()).norm().max((self.mean[3] - self.mean[2].conj()).norm());
        (comm, conj, mean)
    }
}

/// Atomic vacuum times an optical coherent state.
pub fn initial_state(init: OpticalInit) -> GaussianState {
    let alpha = init.alpha();
    let zero = Complex64::new(0.0, 0.0);
    let one = Complex64::new(1.0, 0.0);
    let mean = CVector4::new(zero, zero, alpha, alpha.conj());
    let mut smat = CMatrix4::zeros();
    smat[(0, 1)] = one;
    smat[(2, 3)] = one;
    GaussianState { mean, smat, t: 0.0 }
}

/// Heisenberg-picture evolution: `mean → G mean`, `S → G S Gᵀ`.
pub fn evolve(s0: &GaussianState, p: &Propagator) -> Result<GaussianState, GaussianError> {
    let g = p.matrix();
    let mean = g * s0.mean;
    let smat = g * s0.smat * g.transpose();
    let t = s0.t + p.t();
    let finite = mean.iter().chain(smat.iter()).all(|z| z.re.is_finite() && z.im.is_finite());
    let max_entry = if finite {
        mean.iter().chain(smat.iter()).map(|z| z.norm()).fold(0.0, f64::max)
    } else {
        f64::INFINITY
    };
    if max_entry > DEFAULT_OVERFLOW_CAP {
        return Err(GaussianError::Overflow { t, max_entry, cap: DEFAULT_OVERFLOW_CAP });
    }
    Ok(GaussianState { mean, smat, t })
}

/// `<x_i1 x_i2 x_i3 x_i4>` by Isserlis expansion around the means.
///
/// Contractions keep operator order: the pair `(a, b)` with `a` before `b`
/// contributes `S_{ia ib}`.
pub fn moment4(s: &GaussianState, ops: [Op; 4]) -> Complex64 {
    let mu = |k: usize| s.mean[ops[k].index()];
    let c = |a: usize, b: usize| s.smat[(ops[a].index(), ops[b].index())];

    let mut total = mu(0) * mu(1) * mu(2) * mu(3);
    const PAIRS: [((usize, usize), (usize, usize)); 6] =
        [((0, 1), (2, 3)), ((0, 2), (1, 3)), ((0, 3), (1, 2)), ((1, 2), (0, 3)), ((1, 3), (0, 2)), ((2, 3), (0, 1))];
    for ((a, b), (p, q)) in PAIRS {
        total += c(a, b) * mu(p) * mu(q);
    }
    total + c(0, 1) * c(2, 3) + c(0, 2) * c(1, 3) + c(0, 3) * c(1, 2)
}

/// `<x_i x_j>` including the mean contribution.
pub fn moment2(s: &GaussianState, i: Op, j: Op) -> Complex64 {
    s.mean[i.index()] * s.mean[j.index()] + s.contraction(i, j)
}

/// `<x† x>` for `mode`.
pub fn occupation(s: &GaussianState, mode: Mode) -> f64 {
    s.mean[mode.annihilator().index()].norm_sqr() + s.fluctuation_occupation(mode)
}

//! Brute-force reference: Schrödinger evolution of the two-mode Hamiltonian
//!
//! `H = c†c + δ a†a + χ (a†c† + a†c + c†a + c a)`
//!
//! on a truncated Fock basis `|n_atom, n_phot>`, with observables computed by
//! applying ladder operators to the state vector. Nothing here touches the
//! Gaussian moment machinery, so agreement between the two is a real check.

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;
use rayon::prelude::*;
use serde::Serialize;
use thiserror::Error;

use crate::gaussian::{Mode, OpticalInit};
use crate::model::ModelParams;
use crate::observables::{CorrelationRecord, OCCUPATION_FLOOR};

pub const DEFAULT_DIM_CAP: usize = 4096;
pub const DEFAULT_TAIL_TOL: f64 = 1e-10;
/// Largest tolerated `tail_tol`.
pub const MAX_TAIL_TOL: f64 = 1e-4;
/// Spaces up to this dimension are propagated by dense diagonalization.
pub const DENSE_LIMIT: usize = 400;

const PARALLEL_MIN_DIM: usize = 16_384;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum FockError {
    #[error("invalid Fock configuration: {0}")]
    InvalidConfig(String),
    #[error("product dimension {dim} exceeds cap {cap}")]
    DimensionOverflow { dim: usize, cap: usize },
    #[error(
        "truncation inadequate at ({nmax_atom}, {nmax_phot}): tail mass atom {tail_atom:e}, photon {tail_phot:e} > {tail_tol:e}"
    )]
    TruncationInadequate { nmax_atom: usize, nmax_phot: usize, tail_atom: f64, tail_phot: f64, tail_tol: f64 },
    #[error("state is not normalized (norm {0})")]
    NotNormalized(f64),
    #[error("state shape ({0}, {1}) does not match Hamiltonian shape ({2}, {3})")]
    ShapeMismatch(usize, usize, usize, usize),
    #[error("time must be finite, got {0}")]
    NonFiniteTime(f64),
}

/// Truncation: levels `0..nmax` are kept in each mode.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct FockConfig {
    pub nmax_atom: usize,
    pub nmax_phot: usize,
    /// Largest population admitted in the top two levels of either mode.
    pub tail_tol: f64,
    pub dim_cap: usize,
}

impl Default for FockConfig {
    fn default() -> Self {
        Self { nmax_atom: 16, nmax_phot: 16, tail_tol: DEFAULT_TAIL_TOL, dim_cap: DEFAULT_DIM_CAP }
    }
}

impl FockConfig {
    pub fn new(nmax_atom: usize, nmax_phot: usize) -> Result<Self, FockError> {
        let cfg = Self { nmax_atom, nmax_phot, ..Default::default() };
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<(), FockError> {
        if self.nmax_atom < 2 || self.nmax_phot < 2 {
            return Err(FockError::InvalidConfig(format!(
                "need at least two levels per mode, got ({}, {})",
                self.nmax_atom, self.nmax_phot
            )));
        }
        if !(self.tail_tol > 0.0 && self.tail_tol <= MAX_TAIL_TOL) {
            return Err(FockError::InvalidConfig(format!("tail_tol {} outside (0, {MAX_TAIL_TOL}]", self.tail_tol)));
        }
        Ok(())
    }

    pub fn dim(&self) -> usize {
        self.nmax_atom * self.nmax_phot
    }
}

/// Real symmetric Hamiltonian in compressed-row form.
#[derive(Debug, Clone)]
pub struct FockHamiltonian {
    nmax_atom: usize,
    nmax_phot: usize,
    row_ptr: Vec<usize>,
    cols: Vec<usize>,
    vals: Vec<f64>,
}

impl FockHamiltonian {
    pub fn dim(&self) -> usize {
        self.nmax_atom * self.nmax_phot
    }

    pub fn shape(&self) -> (usize, usize) {
        (self.nmax_atom, self.nmax_phot)
    }

    /// Matrix element `<row|H|col>`.
    pub fn element(&self, row: usize, col: usize) -> f64 {
        let range = self.row_ptr[row]..self.row_ptr[row + 1];
        self.cols[range.clone()].iter().zip(&self.vals[range]).find(|(&c, _)| c == col).map_or(0.0, |(_, &v)| v)
    }

    pub fn to_dense(&self) -> DMatrix<f64> {
        let n = self.dim();
        let mut m = DMatrix::zeros(n, n);
        for row in 0..n {
            for k in self.row_ptr[row]..self.row_ptr[row + 1] {
                m[(row, self.cols[k])] = self.vals[k];
            }
        }
        m
    }

    fn row_dot(&self, row: usize, x: &[Complex64]) -> Complex64 {
        let mut acc = Complex64::new(0.0, 0.0);
        for k in self.row_ptr[row]..self.row_ptr[row + 1] {
            acc += x[self.cols[k]] * self.vals[k];
        }
        acc
    }

    /// `y = H x`.
    pub fn apply(&self, x: &[Complex64], y: &mut [Complex64]) {
        if self.dim() >= PARALLEL_MIN_DIM {
            y.par_iter_mut().enumerate().for_each(|(row, yi)| *yi = self.row_dot(row, x));
        } else {
            for (row, yi) in y.iter_mut().enumerate() {
                *yi = self.row_dot(row, x);
            }
        }
    }

    /// Gershgorin enclosure of the spectrum.
    pub fn spectral_bounds(&self) -> (f64, f64) {
        let mut lo = f64::INFINITY;
        let mut hi = f64::NEG_INFINITY;
        for row in 0..self.dim() {
            let mut diag = 0.0;
            let mut radius = 0.0;
            for k in self.row_ptr[row]..self.row_ptr[row + 1] {
                if self.cols[k] == row {
                    diag = self.vals[k];
                } else {
                    radius += self.vals[k].abs();
                }
            }
            lo = lo.min(diag - radius);
            hi = hi.max(diag + radius);
        }
        (lo, hi)
    }

    /// `max |H_ij − H_ji|`.
    pub fn asymmetry(&self) -> f64 {
        let mut worst: f64 = 0.0;
        for row in 0..self.dim() {
            for k in self.row_ptr[row]..self.row_ptr[row + 1] {
                worst = worst.max((self.vals[k] - self.element(self.cols[k], row)).abs());
            }
        }
        worst
    }

    /// `<ψ|H|ψ>`.
    pub fn expectation(&self, psi: &FockState) -> f64 {
        let mut hpsi = vec![Complex64::new(0.0, 0.0); self.dim()];
        self.apply(&psi.amps, &mut hpsi);
        psi.amps.iter().zip(&hpsi).map(|(a, b)| (a.conj() * b).re).sum()
    }
}

/// Builds the truncated Hamiltonian; the coupling terms are inserted in
/// mirrored pairs so the matrix is exactly symmetric.
pub fn build_hamiltonian(params: ModelParams, cfg: &FockConfig) -> Result<FockHamiltonian, FockError> {
    cfg.validate()?;
    let dim = cfg.dim();
    if dim > cfg.dim_cap {
        return Err(FockError::DimensionOverflow { dim, cap: cfg.dim_cap });
    }
    let (na, np) = (cfg.nmax_atom, cfg.nmax_phot);
    let (delta, chi) = (params.delta(), params.chi());
    let idx = |i: usize, j: usize| i * np + j;
    let sq = |k: usize| (k as f64).sqrt();

    let mut row_ptr = Vec::with_capacity(dim + 1);
    let mut cols = Vec::with_capacity(5 * dim);
    let mut vals = Vec::with_capacity(5 * dim);
    row_ptr.push(0);
    for i in 0..na {
        for j in 0..np {
            let mut entries: Vec<(usize, f64)> = Vec::with_capacity(5);
            if chi != 0.0 {
                // a†c†: |i-1, j-1> → |i, j>
                if i > 0 && j > 0 {
                    entries.push((idx(i - 1, j - 1), chi * sq(i) * sq(j)));
                }
                // a†c: |i+1, j-1> → |i, j>
                if i + 1 < na && j > 0 {
                    entries.push((idx(i + 1, j - 1), chi * sq(i + 1) * sq(j)));
                }
                // c†a: |i-1, j+1> → |i, j>
                if i > 0 && j + 1 < np {
                    entries.push((idx(i - 1, j + 1), chi * sq(i) * sq(j + 1)));
                }
                // c a: |i+1, j+1> → |i, j>
                if i + 1 < na && j + 1 < np {
                    entries.push((idx(i + 1, j + 1), chi * sq(i + 1) * sq(j + 1)));
                }
            }
            entries.push((idx(i, j), i as f64 + delta * j as f64));
            entries.sort_by_key(|e| e.0);
            for (c, v) in entries {
                cols.push(c);
                vals.push(v);
            }
            row_ptr.push(cols.len());
        }
    }
    Ok(FockHamiltonian { nmax_atom: na, nmax_phot: np, row_ptr, cols, vals })
}

/// Two-mode state vector indexed by `n_atom * nmax_phot + n_phot`.
#[derive(Debug, Clone, PartialEq)]
pub struct FockState {
    nmax_atom: usize,
    nmax_phot: usize,
    amps: Vec<Complex64>,
    t: f64,
    prep_tail: f64,
}

impl FockState {
    pub fn from_amplitudes(nmax_atom: usize, nmax_phot: usize, amps: Vec<Complex64>) -> Result<Self, FockError> {
        if amps.len() != nmax_atom * nmax_phot {
            return Err(FockError::InvalidConfig(format!(
                "{} amplitudes for a {nmax_atom}x{nmax_phot} space",
                amps.len()
            )));
        }
        Ok(Self { nmax_atom, nmax_phot, amps, t: 0.0, prep_tail: 0.0 })
    }

    pub fn amplitudes(&self) -> &[Complex64] {
        &self.amps
    }

    pub fn shape(&self) -> (usize, usize) {
        (self.nmax_atom, self.nmax_phot)
    }

    pub fn t(&self) -> f64 {
        self.t
    }

    /// Poisson mass discarded when the initial coherent state was truncated.
    pub fn prep_tail(&self) -> f64 {
        self.prep_tail
    }

    pub fn norm(&self) -> f64 {
        self.amps.iter().map(|a| a.norm_sqr()).sum::<f64>().sqrt()
    }

    pub fn amp(&self, n_atom: usize, n_phot: usize) -> Complex64 {
        self.amps[n_atom * self.nmax_phot + n_phot]
    }

    /// Marginal number distributions (atom, photon).
    pub fn marginals(&self) -> (Vec<f64>, Vec<f64>) {
        let mut pa = vec![0.0; self.nmax_atom];
        let mut pp = vec![0.0; self.nmax_phot];
        for i in 0..self.nmax_atom {
            for j in 0..self.nmax_phot {
                let p = self.amp(i, j).norm_sqr();
                pa[i] += p;
                pp[j] += p;
            }
        }
        (pa, pp)
    }

    /// Population of the top two levels of each mode (atom, photon).
    pub fn tail_populations(&self) -> (f64, f64) {
        let (pa, pp) = self.marginals();
        let top2 = |p: &[f64]| p[p.len() - 2..].iter().sum::<f64>();
        (top2(&pa), top2(&pp))
    }

    pub fn is_trusted(&self, tail_tol: f64) -> bool {
        let (ta, tp) = self.tail_populations();
        ta.max(tp).max(self.prep_tail) <= tail_tol
    }

    /// Applies the annihilator of `mode`.
    pub fn lower(&self, mode: Mode) -> FockState {
        let (na, np) = (self.nmax_atom, self.nmax_phot);
        let mut out = vec![Complex64::new(0.0, 0.0); self.amps.len()];
        for i in 0..na {
            for j in 0..np {
                let (src, factor) = match mode {
                    Mode::Atomic if i + 1 < na => ((i + 1) * np + j, ((i + 1) as f64).sqrt()),
                    Mode::Optical if j + 1 < np => (i * np + j + 1, ((j + 1) as f64).sqrt()),
                    _ => continue,
                };
                out[i * np + j] = self.amps[src] * factor;
            }
        }
        FockState { amps: out, ..self.clone() }
    }
}

fn log_factorial(n: usize) -> f64 {
    (1..=n).map(|k| (k as f64).ln()).sum()
}

/// Atomic vacuum times a coherent probe state `α = |α| e^{−iφ}`, truncated to
/// `nmax_phot` levels and renormalized.
pub fn coherent_fock(init: OpticalInit, cfg: &FockConfig) -> Result<FockState, FockError> {
    cfg.validate()?;
    let (na, np) = (cfg.nmax_atom, cfg.nmax_phot);
    let alpha2 = init.intensity();
    let mut amps = vec![Complex64::new(0.0, 0.0); na * np];
    if alpha2 == 0.0 {
        amps[0] = Complex64::new(1.0, 0.0);
        return Ok(FockState { nmax_atom: na, nmax_phot: np, amps, t: 0.0, prep_tail: 0.0 });
    }
    let log_weight = |n: usize| -alpha2 + n as f64 * alpha2.ln() - log_factorial(n);
    // Poisson mass beyond the cutoff, summed directly to avoid cancellation
    let mut tail = 0.0;
    let mut n = np;
    loop {
        let w = log_weight(n).exp();
        tail += w;
        if (n as f64 > alpha2 && w < 1e-18 * tail.max(1e-300)) || n > np + 100_000 {
            break;
        }
        n += 1;
    }
    if alpha2 > np as f64 / 4.0 || tail > cfg.tail_tol {
        return Err(FockError::TruncationInadequate {
            nmax_atom: na,
            nmax_phot: np,
            tail_atom: 0.0,
            tail_phot: tail,
            tail_tol: cfg.tail_tol,
        });
    }
    let phase = -init.phase();
    for (k, a) in amps.iter_mut().take(np).enumerate() {
        *a = Complex64::from_polar((0.5 * log_weight(k)).exp(), phase * k as f64);
    }
    let norm = amps.iter().map(|a| a.norm_sqr()).sum::<f64>().sqrt();
    amps.iter_mut().for_each(|a| *a /= norm);
    Ok(FockState { nmax_atom: na, nmax_phot: np, amps, t: 0.0, prep_tail: tail })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum EvolutionMethod {
    /// Dense when the dimension is at most [`DENSE_LIMIT`], Chebyshev otherwise.
    Auto,
    /// Full symmetric eigendecomposition.
    Dense,
    /// Chebyshev expansion of `exp(−iHt)` with Bessel-function coefficients.
    Chebyshev,
}

/// `ψ(t) = exp(−iHt) ψ(0)` with the method picked by size.
pub fn evolve_exact(psi0: &FockState, h: &FockHamiltonian, t: f64) -> Result<FockState, FockError> {
    evolve_with(psi0, h, t, EvolutionMethod::Auto)
}

pub fn evolve_with(
    psi0: &FockState,
    h: &FockHamiltonian,
    t: f64,
    method: EvolutionMethod,
) -> Result<FockState, FockError> {
    if !t.is_finite() {
        return Err(FockError::NonFiniteTime(t));
    }
    if psi0.shape() != h.shape() {
        return Err(FockError::ShapeMismatch(psi0.nmax_atom, psi0.nmax_phot, h.nmax_atom, h.nmax_phot));
    }
    let norm = psi0.norm();
    if (norm - 1.0).abs() > 1e-10 {
        return Err(FockError::NotNormalized(norm));
    }
    let use_dense = match method {
        EvolutionMethod::Auto => h.dim() <= DENSE_LIMIT,
        EvolutionMethod::Dense => true,
        EvolutionMethod::Chebyshev => false,
    };
    let amps = if t == 0.0 {
        psi0.amps.clone()
    } else if use_dense {
        evolve_dense(&psi0.amps, h, t)
    } else {
        evolve_chebyshev(&psi0.amps, h, t)
    };
    Ok(FockState { amps, t: psi0.t + t, ..psi0.clone() })
}

fn evolve_dense(psi: &[Complex64], h: &FockHamiltonian, t: f64) -> Vec<Complex64> {
    let eig = h.to_dense().symmetric_eigen();
    let v = &eig.eigenvectors;
    let re = DVector::from_iterator(psi.len(), psi.iter().map(|z| z.re));
    let im = DVector::from_iterator(psi.len(), psi.iter().map(|z| z.im));
    let (cre, cim) = (v.tr_mul(&re), v.tr_mul(&im));
    let n = psi.len();
    let mut out = vec![Complex64::new(0.0, 0.0); n];
    for k in 0..n {
        let coeff = Complex64::new(cre[k], cim[k]) * Complex64::from_polar(1.0, -eig.eigenvalues[k] * t);
        for (o, &vk) in out.iter_mut().zip(v.column(k).iter()) {
            *o += coeff * vk;
        }
    }
    out
}

/// `J_0(x) .. J_{order}(x)` for `x ≥ 0` by Miller's backward recurrence,
/// normalized with `J_0 + 2 Σ J_{2k} = 1`.
pub fn bessel_j_sequence(x: f64, order: usize) -> Vec<f64> {
    let mut out = vec![0.0; order + 1];
    if x == 0.0 {
        out[0] = 1.0;
        return out;
    }
    let start = order.max(x.ceil() as usize) + 32 + (x.cbrt() * 8.0) as usize;
    let mut next = 0.0f64;
    let mut current = 1e-300f64;
    let mut norm = 0.0;
    for k in (1..=start).rev() {
        let prev = 2.0 * k as f64 / x * current - next;
        next = current;
        current = prev;
        // `current` now holds the unnormalized J_{k-1}
        let m = k - 1;
        if m <= order {
            out[m] = current;
        }
        if m % 2 == 0 {
            norm += if m == 0 { current } else { 2.0 * current };
        }
        if current.abs() > 1e250 {
            let s = 1e-250;
            next *= s;
            current *= s;
            norm *= s;
            out.iter_mut().for_each(|v| *v *= s);
        }
    }
    out.iter_mut().for_each(|v| *v /= norm);
    out
}

fn evolve_chebyshev(psi: &[Complex64], h: &FockHamiltonian, t: f64) -> Vec<Complex64> {
    let n = psi.len();
    let (lo, hi) = h.spectral_bounds();
    let center = 0.5 * (hi + lo);
    let radius = 0.5 * (hi - lo);
    let global = Complex64::from_polar(1.0, -center * t);
    if radius == 0.0 {
        return psi.iter().map(|z| z * global).collect();
    }
    let x = radius * t.abs();
    let order = (x + 16.0 * x.cbrt() + 40.0).ceil() as usize;
    let bessel = bessel_j_sequence(x, order);
    // exp(−i x y) = Σ (2 − δ_k0) (−i)^k J_k(x) T_k(y); negative t flips the sign of odd J_k
    let coeff = |k: usize| {
        let j = if t < 0.0 && k % 2 == 1 { -bessel[k] } else { bessel[k] };
        let phase = match k % 4 {
            0 => Complex64::new(1.0, 0.0),
            1 => Complex64::new(0.0, -1.0),
            2 => Complex64::new(-1.0, 0.0),
            _ => Complex64::new(0.0, 1.0),
        };
        phase * if k == 0 { j } else { 2.0 * j }
    };

    let scaled_apply = |x: &[Complex64], y: &mut [Complex64]| {
        h.apply(x, y);
        let inv = radius.recip();
        if n >= PARALLEL_MIN_DIM {
            y.par_iter_mut().zip(x.par_iter()).for_each(|(yi, xi)| *yi = (*yi - xi * center) * inv);
        } else {
            y.iter_mut().zip(x).for_each(|(yi, xi)| *yi = (*yi - xi * center) * inv);
        }
    };

    let mut prev = psi.to_vec();
    let mut curr = vec![Complex64::new(0.0, 0.0); n];
    scaled_apply(&prev, &mut curr);
    let c0 = coeff(0);
    let c1 = coeff(1);
    let mut acc: Vec<Complex64> = prev.iter().zip(&curr).map(|(p, c)| p * c0 + c * c1).collect();
    let mut next = vec![Complex64::new(0.0, 0.0); n];
    for k in 2..=order {
        scaled_apply(&curr, &mut next);
        let ck = coeff(k);
        let update = |((nx, p), a): ((&mut Complex64, &Complex64), &mut Complex64)| {
            *nx = *nx * 2.0 - p;
            *a += *nx * ck;
        };
        if n >= PARALLEL_MIN_DIM {
            next.par_iter_mut().zip(prev.par_iter()).zip(acc.par_iter_mut()).for_each(update);
        } else {
            next.iter_mut().zip(prev.iter()).zip(acc.iter_mut()).for_each(update);
        }
        std::mem::swap(&mut prev, &mut curr);
        std::mem::swap(&mut curr, &mut next);
    }
    acc.iter_mut().for_each(|a| *a *= global);
    acc
}

/// Occupations and normally ordered fourth moments of a trusted state,
/// packed into a [`CorrelationRecord`].
pub fn oracle_observables(psi: &FockState, tail_tol: f64) -> Result<CorrelationRecord, FockError> {
    let (ta, tp) = psi.tail_populations();
    if !psi.is_trusted(tail_tol) {
        return Err(FockError::TruncationInadequate {
            nmax_atom: psi.nmax_atom,
            nmax_phot: psi.nmax_phot,
            tail_atom: ta,
            tail_phot: tp.max(psi.prep_tail),
            tail_tol,
        });
    }
    let sq = |s: &FockState| s.norm().powi(2);
    let c_psi = psi.lower(Mode::Atomic);
    let a_psi = psi.lower(Mode::Optical);
    let n1 = sq(&c_psi);
    let n3 = sq(&a_psi);
    let cc = sq(&c_psi.lower(Mode::Atomic));
    let aa = sq(&a_psi.lower(Mode::Optical));
    let ca = sq(&c_psi.lower(Mode::Optical));
    let defined = |num: f64, den: f64, ok: bool| ok.then(|| num / den);
    let ok1 = n1 > OCCUPATION_FLOOR;
    let ok3 = n3 > OCCUPATION_FLOOR;
    Ok(CorrelationRecord::from_parts(
        psi.t,
        n1,
        n3,
        defined(cc, n1 * n1, ok1),
        defined(aa, n3 * n3, ok3),
        defined(ca, n1 * n3, ok1 && ok3),
    ))
}

/// Outcome of an adaptively truncated oracle run.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct OracleRun {
    pub record: CorrelationRecord,
    pub nmax_atom: usize,
    pub nmax_phot: usize,
    pub tail_atom: f64,
    pub tail_phot: f64,
}

/// Evolves to `t`, doubling whichever truncation leaks more than
/// `cfg.tail_tol` until it holds or `cfg.dim_cap` would be exceeded.
pub fn run_oracle(params: ModelParams, init: OpticalInit, t: f64, cfg: &FockConfig) -> Result<OracleRun, FockError> {
    cfg.validate()?;
    let mut cfg = *cfg;
    loop {
        let psi0 = match coherent_fock(init, &cfg) {
            Ok(p) => p,
            Err(FockError::TruncationInadequate { tail_phot, .. }) => {
                grow(&mut cfg, false, true, 0.0, tail_phot)?;
                continue;
            }
            Err(e) => return Err(e),
        };
        let h = match build_hamiltonian(params, &cfg) {
            Ok(h) => h,
            Err(FockError::DimensionOverflow { .. }) => {
                return Err(FockError::TruncationInadequate {
                    nmax_atom: cfg.nmax_atom,
                    nmax_phot: cfg.nmax_phot,
                    tail_atom: f64::NAN,
                    tail_phot: f64::NAN,
                    tail_tol: cfg.tail_tol,
                })
            }
            Err(e) => return Err(e),
        };
        let psi = evolve_exact(&psi0, &h, t)?;
        let (ta, tp) = psi.tail_populations();
        let bad_atom = ta > cfg.tail_tol;
        let bad_phot = tp > cfg.tail_tol;
        if !bad_atom && !bad_phot {
            let record = oracle_observables(&psi, cfg.tail_tol)?;
            return Ok(OracleRun { record, nmax_atom: cfg.nmax_atom, nmax_phot: cfg.nmax_phot, tail_atom: ta, tail_phot: tp });
        }
        grow(&mut cfg, bad_atom, bad_phot, ta, tp)?;
    }
}

fn grow(cfg: &mut FockConfig, atom: bool, phot: bool, tail_atom: f64, tail_phot: f64) -> Result<(), FockError> {
    let na = if atom { cfg.nmax_atom * 2 } else { cfg.nmax_atom };
    let np = if phot { cfg.nmax_phot * 2 } else { cfg.nmax_phot };
    if na * np > cfg.dim_cap {
        return Err(FockError::TruncationInadequate {
            nmax_atom: cfg.nmax_atom,
            nmax_phot: cfg.nmax_phot,
            tail_atom,
            tail_phot,
            tail_tol: cfg.tail_tol,
        });
    }
    cfg.nmax_atom = na;
    cfg.nmax_phot = np;
    Ok(())
}

/// [`run_oracle`] over several times; each run starts from the truncation
/// that sufficed for the previous one.
pub fn run_oracle_series(
    params: ModelParams,
    init: OpticalInit,
    times: &[f64],
    cfg: &FockConfig,
) -> Vec<Result<OracleRun, FockError>> {
    let mut start = *cfg;
    times
        .iter()
        .map(|&t| {
            let run = run_oracle(params, init, t, &start);
            if let Ok(r) = &run {
                start.nmax_atom = r.nmax_atom;
                start.nmax_phot = r.nmax_phot;
            }
            run
        })
        .collect()
}

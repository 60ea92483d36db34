//! Drift generator of the linearized atom-photon Heisenberg system and the
//! classification of its eigenfrequency spectrum into stability regimes.
//!
//! Operators are ordered as `x = (c, c†, a, a†)` where `c` is the trap side
//! mode and `a` the probe field. Time is measured in units of the inverse
//! trap-mode frequency, so the generator only depends on the dimensionless
//! detuning `delta` and coupling `chi`.

use std::fmt;

use nalgebra::{Matrix4, Schur};
use num_complex::Complex64;
use serde::Serialize;
use thiserror::Error;

/// Default relative tolerance used by [`classify_regime`].
pub const DEFAULT_REGIME_TOL: f64 = 1e-9;

/// Index permutation exchanging each annihilator with its creator.
pub const CONJ_PERM: [usize; 4] = [1, 0, 3, 2];

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ModelError {
    #[error("parameter {name} must be finite, got {value}")]
    NonFinite { name: &'static str, value: f64 },
    #[error("coupling chi must be non-negative, got {0}")]
    NegativeCoupling(f64),
    #[error("tolerance must be positive and finite, got {0}")]
    InvalidTolerance(f64),
    #[error("eigenvalue solver did not converge for delta={delta}, chi={chi}")]
    EigenSolverFailure { delta: f64, chi: f64 },
    #[error("spectrum {spectrum:?} does not match any regime structure")]
    UnclassifiableSpectrum { spectrum: [Complex64; 4] },
    #[error("parameters satisfy the {kind} threshold condition but the spectrum is not degenerate (min gap {gap:e})")]
    InconsistentThreshold { kind: ThresholdKind, gap: f64 },
}

/// Dimensionless model parameters: probe-pump detuning and atom-photon coupling,
/// both in units of the trap-mode frequency.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ModelParams {
    delta: f64,
    chi: f64,
}

impl ModelParams {
    pub fn new(delta: f64, chi: f64) -> Result<Self, ModelError> {
        if !delta.is_finite() {
            return Err(ModelError::NonFinite { name: "delta", value: delta });
        }
        if !chi.is_finite() {
            return Err(ModelError::NonFinite { name: "chi", value: chi });
        }
        if chi < 0.0 {
            return Err(ModelError::NegativeCoupling(chi));
        }
        Ok(Self { delta, chi })
    }

    pub fn delta(&self) -> f64 {
        self.delta
    }

    pub fn chi(&self) -> f64 {
        self.chi
    }
}

/// Real 4×4 matrix `M` with `d/dt x = i M x`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DriftGenerator {
    matrix: Matrix4<f64>,
    params: ModelParams,
}

impl DriftGenerator {
    pub fn matrix(&self) -> &Matrix4<f64> {
        &self.matrix
    }

    pub fn params(&self) -> ModelParams {
        self.params
    }

    /// Largest eigenfrequency modulus, bounded below by the matrix norm if
    /// the eigen-solver fails.
    pub fn spectral_radius(&self) -> f64 {
        match eigenfrequencies(self) {
            Ok(w) => w.iter().map(|z| z.norm()).fold(0.0, f64::max),
            Err(_) => self.matrix.norm(),
        }
    }
}

/// Builds the drift generator. All entries are exact arithmetic on `delta`
/// and `chi`.
pub fn build_generator(params: ModelParams) -> DriftGenerator {
    let d = params.delta;
    let c = params.chi;
    #[rustfmt::skip]
    let matrix = Matrix4::new(
        -1.0, 0.0, -c, -c,
        0.0, 1.0, c, c,
        -c, -c, -d, 0.0,
        c, c, 0.0, d,
    );
    DriftGenerator { matrix, params }
}

/// Commutator metric `J_ij = [x_i, x_j]`.
pub fn commutator_metric() -> Matrix4<f64> {
    let mut j = Matrix4::zeros();
    j[(0, 1)] = 1.0;
    j[(1, 0)] = -1.0;
    j[(2, 3)] = 1.0;
    j[(3, 2)] = -1.0;
    j
}

/// Permutation matrix for [`CONJ_PERM`].
pub fn conjugation_permutation() -> Matrix4<f64> {
    let mut k = Matrix4::zeros();
    for (i, &j) in CONJ_PERM.iter().enumerate() {
        k[(i, j)] = 1.0;
    }
    k
}

/// Critical parameter surface on which the spectrum is degenerate.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum ThresholdKind {
    /// `delta = 0`
    ZeroDetuning,
    /// `delta = 4 chi^2`
    FourChiSquared,
    /// `(1 - delta^2)^2 / |delta| = 16 chi^2` with `delta < 0`
    NegativeDetuning,
}

impl fmt::Display for ThresholdKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            ThresholdKind::ZeroDetuning => "delta=0",
            ThresholdKind::FourChiSquared => "delta=4chi^2",
            ThresholdKind::NegativeDetuning => "(1-delta^2)^2/|delta|=16chi^2",
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum Regime {
    /// (i) purely real spectrum.
    Stable,
    /// (ii) spectrum `{Ω, −Ω, iΓ, −iΓ}`.
    SingleExponential,
    /// (iii) spectrum `{±Ω ± iΓ}`.
    BeatingExponential,
    /// (iv) degenerate spectrum on a critical surface.
    DegenerateThreshold(ThresholdKind),
}

impl Regime {
    pub fn label(&self) -> &'static str {
        match self {
            Regime::Stable => "i",
            Regime::SingleExponential => "ii",
            Regime::BeatingExponential => "iii",
            Regime::DegenerateThreshold(_) => "iv",
        }
    }

    pub fn threshold_kind(&self) -> Option<ThresholdKind> {
        match self {
            Regime::DegenerateThreshold(k) => Some(*k),
            _ => None,
        }
    }
}

impl fmt::Display for Regime {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Regime::DegenerateThreshold(k) => write!(f, "iv (threshold {k})"),
            other => f.write_str(other.label()),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RegimeReport {
    /// Eigenvalues of `M`, sorted by real part then imaginary part.
    pub eigenfrequencies: [Complex64; 4],
    pub regime: Regime,
    /// Oscillation frequency, regimes ii and iii only.
    pub omega: Option<f64>,
    /// Growth rate, regimes ii and iii only.
    pub gamma: Option<f64>,
}

impl RegimeReport {
    pub fn threshold_kind(&self) -> Option<ThresholdKind> {
        self.regime.threshold_kind()
    }
}

/// Eigenvalues of the drift matrix from a real Schur decomposition.
pub fn eigenfrequencies(gen: &DriftGenerator) -> Result<[Complex64; 4], ModelError> {
    let p = gen.params;
    let schur = Schur::try_new(gen.matrix, f64::EPSILON, 10_000)
        .ok_or(ModelError::EigenSolverFailure { delta: p.delta, chi: p.chi })?;
    let ev = schur.complex_eigenvalues();
    let mut out = [Complex64::new(0.0, 0.0); 4];
    for (o, e) in out.iter_mut().zip(ev.iter()) {
        *o = *e;
    }
    if out.iter().any(|z| !z.re.is_finite() || !z.im.is_finite()) {
        return Err(ModelError::EigenSolverFailure { delta: p.delta, chi: p.chi });
    }
    out.sort_by(|a, b| a.re.total_cmp(&b.re).then(a.im.total_cmp(&b.im)));
    Ok(out)
}

/// Which critical condition, if any, `(delta, chi)` satisfies within the
/// relative tolerance `tol`. Decoupled modes (`chi == 0`) never qualify.
pub fn critical_condition(params: ModelParams, tol: f64) -> Option<ThresholdKind> {
    let d = params.delta;
    let c2 = params.chi * params.chi;
    if params.chi == 0.0 {
        return None;
    }
    let scale = 1f64.max(d.abs()).max(4.0 * c2);
    if d.abs() <= tol * scale {
        return Some(ThresholdKind::ZeroDetuning);
    }
    if (d - 4.0 * c2).abs() <= tol * scale {
        return Some(ThresholdKind::FourChiSquared);
    }
    if d < 0.0 {
        let lhs = (1.0 - d * d).powi(2);
        let rhs = 16.0 * c2 * d.abs();
        if (lhs - rhs).abs() <= tol * 1f64.max(lhs).max(rhs) {
            return Some(ThresholdKind::NegativeDetuning);
        }
    }
    None
}

/// Classifies the stability regime of `gen`.
///
/// The critical conditions are checked on the parameters first and then
/// confirmed against the spectrum; away from them the label follows from the
/// pattern of vanishing real and imaginary parts, each compared against
/// `tol` times the spectral radius.
pub fn classify_regime(gen: &DriftGenerator, tol: f64) -> Result<RegimeReport, ModelError> {
    if !(tol > 0.0 && tol.is_finite()) {
        return Err(ModelError::InvalidTolerance(tol));
    }
    let spectrum = eigenfrequencies(gen)?;
    let radius = spectrum.iter().map(|z| z.norm()).fold(0.0, f64::max).max(f64::MIN_POSITIVE);

    if let Some(kind) = critical_condition(gen.params, tol) {
        let mut gap = f64::INFINITY;
        for i in 0..4 {
            for j in i + 1..4 {
                gap = gap.min((spectrum[i] - spectrum[j]).norm());
            }
        }
        // a defective eigenvalue splits like the square root of the perturbation
        if gap > 10.0 * tol.sqrt() * radius {
            return Err(ModelError::InconsistentThreshold { kind, gap });
        }
        return Ok(RegimeReport {
            eigenfrequencies: spectrum,
            regime: Regime::DegenerateThreshold(kind),
            omega: None,
            gamma: None,
        });
    }

    let zero = tol * radius;
    let mut real = Vec::new();
    let mut imaginary = Vec::new();
    let mut complex = Vec::new();
    for z in spectrum {
        if z.im.abs() <= zero {
            real.push(z);
        } else if z.re.abs() <= zero {
            imaginary.push(z);
        } else {
            complex.push(z);
        }
    }
    let max_re = |v: &[Complex64]| v.iter().map(|z| z.re.abs()).fold(0.0, f64::max);
    let max_im = |v: &[Complex64]| v.iter().map(|z| z.im.abs()).fold(0.0, f64::max);

    let (regime, omega, gamma) = match (real.len(), imaginary.len(), complex.len()) {
        (4, 0, 0) => (Regime::Stable, None, None),
        (2, 2, 0) => (Regime::SingleExponential, Some(max_re(&real)), Some(max_im(&imaginary))),
        (0, 0, 4) => (Regime::BeatingExponential, Some(max_re(&complex)), Some(max_im(&complex))),
        _ => return Err(ModelError::UnclassifiableSpectrum { spectrum }),
    };
    Ok(RegimeReport { eigenfrequencies: spectrum, regime, omega, gamma })
}

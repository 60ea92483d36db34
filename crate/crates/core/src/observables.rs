//! Second-order statistics of the atomic and optical fields.
//!
//! Correlators are evaluated on a copy of the state whose modes are rescaled
//! to unit occupation, so the normalized fourth moments stay `O(1)` even when
//! the raw moments have grown by many orders of magnitude.

use std::f64::consts::{PI, TAU};

use serde::Serialize;
use thiserror::Error;

use crate::gaussian::{evolve, initial_state, moment4, occupation, GaussianError, GaussianState, Mode, OpticalInit, Op};
use crate::model::{build_generator, classify_regime, DriftGenerator, ModelError, ModelParams, Regime, ThresholdKind};
use crate::propagator::{green_function, PropagatorError};

/// Occupations at or below this make a correlator 0/0.
pub const OCCUPATION_FLOOR: f64 = 1e-12;
/// Largest admissible imaginary part of a normalized correlator.
pub const IMAG_TOL: f64 = 1e-10;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ObservableError {
    #[error("{quantity} undefined: occupation {occupation:e} is at or below {OCCUPATION_FLOOR:e}")]
    Undefined { quantity: &'static str, occupation: f64 },
    #[error("{quantity} has imaginary residue {imag:e} (real part {real})")]
    ImaginaryResidue { quantity: &'static str, real: f64, imag: f64 },
    #[error("delta={delta} is not on the critical surface delta_c={delta_c} (chi={chi})")]
    OffCriticalSurface { delta: f64, delta_c: f64, chi: f64 },
    #[error("threshold formula needs chi > 0")]
    ZeroCoupling,
    #[error("long-time statistics need an unstable regime, got {0}")]
    NotUnstable(Regime),
    #[error("no convergence by t={t}: last window spread {spread:e} around {value} ({reason})")]
    NonConvergence { t: f64, value: f64, spread: f64, reason: String },
    #[error(transparent)]
    Model(#[from] ModelError),
    #[error(transparent)]
    Propagator(#[from] PropagatorError),
    #[error(transparent)]
    Gaussian(#[from] GaussianError),
}

impl ObservableError {
    pub fn is_overflow(&self) -> bool {
        matches!(
            self,
            ObservableError::Propagator(PropagatorError::Overflow { .. })
                | ObservableError::Gaussian(GaussianError::Overflow { .. })
        )
    }
}

/// Correlators in a single time slice. `None` marks an undefined (0/0) value.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CorrelationRecord {
    pub t: f64,
    pub n1: f64,
    pub n3: f64,
    pub g11: Option<f64>,
    pub g33: Option<f64>,
    pub g13: Option<f64>,
    pub classical_bound: Option<f64>,
    pub quantum_bound: Option<f64>,
}

impl CorrelationRecord {
    /// Builds a record from occupations and correlators, deriving both bounds.
    pub fn from_parts(t: f64, n1: f64, n3: f64, g11: Option<f64>, g33: Option<f64>, g13: Option<f64>) -> Self {
        let (classical_bound, quantum_bound) = match (g11, g33) {
            (Some(a), Some(b)) if n1 > OCCUPATION_FLOOR && n3 > OCCUPATION_FLOOR => {
                let (c, q) = bound_values(a, b, n1, n3);
                (Some(c), Some(q))
            }
            _ => (None, None),
        };
        Self { t, n1, n3, g11, g33, g13, classical_bound, quantum_bound }
    }

    /// `g13 > sqrt(g11 g33)`.
    pub fn violates_classical(&self) -> bool {
        matches!((self.g13, self.classical_bound), (Some(g), Some(c)) if g > c)
    }
}

fn real_part(quantity: &'static str, z: num_complex::Complex64) -> Result<f64, ObservableError> {
    if z.im.abs() > IMAG_TOL * z.re.abs().max(1.0) {
        return Err(ObservableError::ImaginaryResidue { quantity, real: z.re, imag: z.im });
    }
    Ok(z.re)
}

fn checked_occupation(s: &GaussianState, mode: Mode, quantity: &'static str) -> Result<f64, ObservableError> {
    let n = occupation(s, mode);
    if n <= OCCUPATION_FLOOR {
        return Err(ObservableError::Undefined { quantity, occupation: n });
    }
    Ok(n)
}

/// `<x† x† x x> / <x† x>²` for `mode`.
pub fn g2_single(s: &GaussianState, mode: Mode) -> Result<f64, ObservableError> {
    let quantity = match mode {
        Mode::Atomic => "g11",
        Mode::Optical => "g33",
    };
    let n = checked_occupation(s, mode, quantity)?;
    let k = n.sqrt().recip();
    let scaled = match mode {
        Mode::Atomic => s.mode_scaled(k, 1.0),
        Mode::Optical => s.mode_scaled(1.0, k),
    };
    let (p, q) = (mode.annihilator(), mode.creator());
    real_part(quantity, moment4(&scaled, [q, q, p, p]))
}

/// `<c† c a† a> / (<c† c> <a† a>)`.
pub fn g2_cross(s: &GaussianState) -> Result<f64, ObservableError> {
    let n1 = checked_occupation(s, Mode::Atomic, "g13")?;
    let n3 = checked_occupation(s, Mode::Optical, "g13")?;
    let scaled = s.mode_scaled(n1.sqrt().recip(), n3.sqrt().recip());
    real_part("g13", moment4(&scaled, [Op::CDag, Op::C, Op::ADag, Op::A]))
}

/// Classical `sqrt(g11 g33)` and quantum `sqrt((g11 + 1/n1)(g33 + 1/n3))`
/// upper limits on `g13`.
pub fn bound_values(g11: f64, g33: f64, n1: f64, n3: f64) -> (f64, f64) {
    let classical = (g11 * g33).sqrt();
    let quantum = ((g11 + n1.recip()) * (g33 + n3.recip())).sqrt();
    (classical, quantum)
}

pub fn bounds(s: &GaussianState) -> Result<(f64, f64), ObservableError> {
    let g11 = g2_single(s, Mode::Atomic)?;
    let g33 = g2_single(s, Mode::Optical)?;
    Ok(bound_values(g11, g33, occupation(s, Mode::Atomic), occupation(s, Mode::Optical)))
}

/// All correlators of `s`; undefined ones are `None`. Imaginary-residue
/// failures are reported as errors since they indicate a broken state.
pub fn record(s: &GaussianState) -> Result<CorrelationRecord, ObservableError> {
    let defined = |r: Result<f64, ObservableError>| match r {
        Ok(v) => Ok(Some(v)),
        Err(ObservableError::Undefined { .. }) => Ok(None),
        Err(e) => Err(e),
    };
    let g11 = defined(g2_single(s, Mode::Atomic))?;
    let g33 = defined(g2_single(s, Mode::Optical))?;
    let g13 = defined(g2_cross(s))?;
    Ok(CorrelationRecord::from_parts(
        s.t(),
        occupation(s, Mode::Atomic),
        occupation(s, Mode::Optical),
        g11,
        g33,
        g13,
    ))
}

/// Evolved state at time `t` from the standard initial condition.
pub fn state_at(gen: &DriftGenerator, init: OpticalInit, t: f64) -> Result<GaussianState, ObservableError> {
    let p = green_function(gen, t)?;
    Ok(evolve(&initial_state(init), &p)?)
}

pub fn record_at(gen: &DriftGenerator, init: OpticalInit, t: f64) -> Result<CorrelationRecord, ObservableError> {
    record(&state_at(gen, init, t)?)
}

/// Records for every `t`, stopping at the first overflow. Returns the series
/// and, if it was cut short, the time that overflowed.
pub fn time_series(
    gen: &DriftGenerator,
    init: OpticalInit,
    times: &[f64],
) -> Result<(Vec<CorrelationRecord>, Option<f64>), ObservableError> {
    let mut out = Vec::with_capacity(times.len());
    for &t in times {
        match record_at(gen, init, t) {
            Ok(r) => out.push(r),
            Err(e) if e.is_overflow() => return Ok((out, Some(t))),
            Err(e) => return Err(e),
        }
    }
    Ok((out, None))
}

/// Detuning of a threshold surface on which the closed-form long-time value applies.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum CriticalDetuning {
    Zero,
    FourChiSquared,
}

impl CriticalDetuning {
    pub fn value(self, chi: f64) -> f64 {
        match self {
            CriticalDetuning::Zero => 0.0,
            CriticalDetuning::FourChiSquared => 4.0 * chi * chi,
        }
    }

    /// Which surface `delta_c` names for the given coupling, if any.
    pub fn identify(delta_c: f64, chi: f64, tol: f64) -> Option<Self> {
        let scale = 1f64.max(4.0 * chi * chi);
        if delta_c.abs() <= tol * scale {
            Some(CriticalDetuning::Zero)
        } else if (delta_c - 4.0 * chi * chi).abs() <= tol * scale {
            Some(CriticalDetuning::FourChiSquared)
        } else {
            None
        }
    }
}

/// Closed-form long-time `g⁽²⁾` shared by both modes on the `delta = 0` and
/// `delta = 4 chi²` surfaces:
///
/// `1 + 2 (1+δc)(1+δc+8|α|²cos²θ) / (1+δc+4|α|²cos²θ)²`, `θ = φ − π δc / (8χ²)`.
pub fn threshold_g2(
    params: ModelParams,
    init: OpticalInit,
    surface: CriticalDetuning,
    tol: f64,
) -> Result<f64, ObservableError> {
    let chi = params.chi();
    if chi <= 0.0 {
        return Err(ObservableError::ZeroCoupling);
    }
    let delta_c = surface.value(chi);
    if (params.delta() - delta_c).abs() > tol * 1f64.max(delta_c) {
        return Err(ObservableError::OffCriticalSurface { delta: params.delta(), delta_c, chi });
    }
    let theta = init.phase() - PI * delta_c / (8.0 * chi * chi);
    let drive = init.intensity() * theta.cos().powi(2);
    let base = 1.0 + delta_c;
    // same expression rearranged as 3 − 32 (d / (base + 4d))², which keeps
    // the result inside [1, 3] under rounding since the ratio never exceeds 1/4
    let ratio = drive / (base + 4.0 * drive);
    Ok(3.0 - 32.0 * ratio * ratio)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum Correlator {
    G11,
    G33,
    G13,
}

impl Correlator {
    pub fn eval(self, s: &GaussianState) -> Result<f64, ObservableError> {
        match self {
            Correlator::G11 => g2_single(s, Mode::Atomic),
            Correlator::G33 => g2_single(s, Mode::Optical),
            Correlator::G13 => g2_cross(s),
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            Correlator::G11 => "g11",
            Correlator::G33 => "g33",
            Correlator::G13 => "g13",
        }
    }
}

impl From<Mode> for Correlator {
    fn from(m: Mode) -> Self {
        match m {
            Mode::Atomic => Correlator::G11,
            Mode::Optical => Correlator::G33,
        }
    }
}

/// How "long time" is made concrete.
///
/// * Single-exponential regime: samples across `[T, 2T]` must agree to
///   `rel_tol`; `T` doubles from `t_start` (default `8/Γ`).
/// * `delta = 0` / `delta = 4χ²` thresholds: the correlators oscillate with a
///   `1/t` envelope, so means over successive windows `[T, 2T]` must agree to
///   `threshold_rel_tol`; `T` doubles from `t_start` (default 25).
/// * Beating regime and the negative-detuning threshold: statistics over one
///   beat period `π/Ω` starting at `t_start` (default `20/Γ`, or 200 at
///   the threshold), plus the value at `fixed_t` if given.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct LongTimePolicy {
    pub t_start: Option<f64>,
    pub t_max: f64,
    pub rel_tol: f64,
    pub threshold_rel_tol: f64,
    pub window_samples: usize,
    pub samples_per_period: usize,
    pub fixed_t: Option<f64>,
    pub regime_tol: f64,
}

impl Default for LongTimePolicy {
    fn default() -> Self {
        Self {
            t_start: None,
            t_max: 1e4,
            rel_tol: 1e-6,
            threshold_rel_tol: 1e-3,
            window_samples: 9,
            samples_per_period: 16,
            fixed_t: None,
            regime_tol: crate::model::DEFAULT_REGIME_TOL,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub enum LongTimeG2 {
    Converged {
        value: f64,
        t: f64,
    },
    Oscillating {
        min: f64,
        max: f64,
        mean: f64,
        period: f64,
        window_start: f64,
        fixed: Option<(f64, f64)>,
    },
}

impl LongTimeG2 {
    /// The converged value, or the mean of the oscillation.
    pub fn representative(&self) -> f64 {
        match self {
            LongTimeG2::Converged { value, .. } => *value,
            LongTimeG2::Oscillating { mean, .. } => *mean,
        }
    }
}

fn non_convergence(t: f64, value: f64, spread: f64, reason: impl Into<String>) -> ObservableError {
    ObservableError::NonConvergence { t, value, spread, reason: reason.into() }
}

/// Long-time value of `which` for the given parameters and initial light.
pub fn long_time_g2(
    params: ModelParams,
    init: OpticalInit,
    which: Correlator,
    policy: &LongTimePolicy,
) -> Result<LongTimeG2, ObservableError> {
    let gen = build_generator(params);
    let report = classify_regime(&gen, policy.regime_tol)?;
    let radius = report.eigenfrequencies.iter().map(|z| z.norm()).fold(0.0, f64::max);
    let sample = |t: f64| state_at(&gen, init, t).and_then(|s| which.eval(&s));

    match report.regime {
        Regime::Stable => Err(ObservableError::NotUnstable(report.regime)),
        Regime::SingleExponential => {
            let gamma = report.gamma.unwrap_or(1.0);
            let mut t0 = policy.t_start.unwrap_or(8.0 / gamma);
            let n = policy.window_samples.max(2);
            let (mut last, mut spread) = (f64::NAN, f64::INFINITY);
            while 2.0 * t0 <= policy.t_max {
                let mut values = Vec::with_capacity(n);
                for k in 0..n {
                    let t = t0 * (1.0 + k as f64 / (n - 1) as f64);
                    match sample(t) {
                        Ok(v) => values.push(v),
                        Err(e) if e.is_overflow() => return Err(non_convergence(t, last, spread, e.to_string())),
                        Err(e) => return Err(e),
                    }
                }
                last = values[n - 1];
                let (lo, hi) = min_max(&values);
                spread = hi - lo;
                if spread <= policy.rel_tol * last.abs() {
                    return Ok(LongTimeG2::Converged { value: last, t: 2.0 * t0 });
                }
                t0 *= 2.0;
            }
            Err(non_convergence(2.0 * t0, last, spread, "t_max reached"))
        }
        Regime::DegenerateThreshold(ThresholdKind::ZeroDetuning | ThresholdKind::FourChiSquared) => {
            let step = TAU / radius.max(1e-3) / policy.samples_per_period.max(4) as f64;
            let mut t0 = policy.t_start.unwrap_or(25.0);
            let mut previous: Option<f64> = None;
            let mut spread = f64::INFINITY;
            while 2.0 * t0 <= policy.t_max {
                let count = ((t0 / step).ceil() as usize).max(2);
                let mut sum = 0.0;
                for k in 0..count {
                    let t = t0 + k as f64 * t0 / count as f64;
                    sum += match sample(t) {
                        Ok(v) => v,
                        Err(e) if e.is_overflow() => {
                            return Err(non_convergence(t, previous.unwrap_or(f64::NAN), spread, e.to_string()))
                        }
                        Err(e) => return Err(e),
                    };
                }
                let mean = sum / count as f64;
                if let Some(p) = previous {
                    spread = (mean - p).abs();
                    if spread <= policy.threshold_rel_tol * mean.abs() {
                        return Ok(LongTimeG2::Converged { value: mean, t: 2.0 * t0 });
                    }
                }
                previous = Some(mean);
                t0 *= 2.0;
            }
            Err(non_convergence(t0, previous.unwrap_or(f64::NAN), spread, "t_max reached"))
        }
        Regime::BeatingExponential | Regime::DegenerateThreshold(ThresholdKind::NegativeDetuning) => {
            let omega = report
                .omega
                .unwrap_or_else(|| report.eigenfrequencies.iter().map(|z| z.re.abs()).fold(0.0, f64::max));
            let start = policy.t_start.unwrap_or(match report.gamma {
                Some(g) if g > 0.0 => 20.0 / g,
                _ => 200.0,
            });
            let period = PI / omega.max(1e-6);
            let n = (4 * policy.samples_per_period).max(8);
            let mut values = Vec::with_capacity(n);
            for k in 0..n {
                values.push(sample(start + period * k as f64 / n as f64)?);
            }
            let (min, max) = min_max(&values);
            let mean = values.iter().sum::<f64>() / n as f64;
            let fixed = match policy.fixed_t {
                Some(t) => Some((t, sample(t)?)),
                None => None,
            };
            Ok(LongTimeG2::Oscillating { min, max, mean, period, window_start: start, fixed })
        }
    }
}

fn min_max(v: &[f64]) -> (f64, f64) {
    v.iter().fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), &x| (lo.min(x), hi.max(x)))
}

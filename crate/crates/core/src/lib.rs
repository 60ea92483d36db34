//! Linear quantum dynamics of the collective atomic-recoil laser in the
//! cavity-atom-optics regime: drift generator and stability regimes, the
//! Green's-function propagator, Gaussian moment evolution, second-order
//! statistics with classical and quantum cross-correlation limits, and a
//! truncated Fock-space oracle for cross-checking.

pub mod cli;
pub mod fock_oracle;
pub mod gaussian;
pub mod model;
pub mod observables;
pub mod propagator;

pub use gaussian::{GaussianState, Mode, Op, OpticalInit};
pub use model::{build_generator, classify_regime, DriftGenerator, ModelParams, Regime, RegimeReport, ThresholdKind};
pub use observables::{CorrelationRecord, Correlator, CriticalDetuning, LongTimeG2, LongTimePolicy};
pub use propagator::{green_function, Propagator};

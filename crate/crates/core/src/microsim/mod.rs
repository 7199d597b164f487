//! Random-phase ensembles of the cubic NLS on a dilated flat torus: prepared
//! data, split-step evolution, the Wick shift, shell spectra, the pairing
//! identity and the first Picard iterate.

mod data;
mod drift;
mod evolve;
mod iterate;
mod model;
mod pairing;

pub use data::{prepared_data, shell_average, wick_shift, EnsembleSpectrum, PhiSpec};
pub use drift::{nonlinear_drift, DriftConfig, DriftReport, DriftShell};
pub use evolve::{evolve_nls, strang_order, StrangOrder, MAX_PHASE_STEP};
pub use iterate::{first_iterate_variance, sinc2_weight, typical_detuning, FirstIterateReport, FirstIterateShell, MAX_QUADRUPLES};
pub use model::{ModeField, TorusModel};
pub use pairing::{pairing_expectation_check, PairingEntry, PairingKind, PairingReport};

//! Cavity/bath partition, decomposition into normal modes, and the
//! golden-rule decay rates of the cavity modes, with an exact-evolution check.

mod decay;
mod decompose;
mod dos;
mod exact;
mod partition;

pub use decay::{decay_rates, DecayReport, ModeDecay, MIN_WINDOW_SAMPLES};
pub use decompose::{decompose, CavityMode, ModeDecomposition, FORMAT_VERSION};
pub use dos::{bath_dos, default_window, BathDos, MIN_BATH_MODES};
pub use exact::{
    exact_population_trace, revival_time, revival_time_with, EvolutionTrace,
    DEFAULT_REVIVAL_CALIBRATION, FIT_FLOOR, MAX_EXACT_IONS, OSCILLATION_RESIDUAL,
    PRE_REVIVAL_FRACTION,
};
pub use partition::{
    default_center, partition, walled_cavity, Partition, BATH_MIN_RATIO, BATH_WARN_RATIO,
};

//! Shared fixtures for the benchmarks.

use phonon_forge_core::cavity::{default_center, walled_cavity, Partition};
use phonon_forge_core::crystal::{build_coupling_matrix, CouplingMatrix, IonArraySpec, IonSpecies};

/// Centred single-ion cavity with 2+2 walls at 2pi x 2.4 MHz.
pub fn single_ion_cavity(n: usize) -> (CouplingMatrix, Partition) {
    let base = IonArraySpec::new(IonSpecies::calcium40(), n, 7e-6, vec![]).expect("valid array");
    let tweezer = 2.0 * std::f64::consts::PI * 2.4e6;
    let (spec, part) =
        walled_cavity(&base, default_center(n), 1, 2, 2, tweezer).expect("cavity fits the array");
    (build_coupling_matrix(&spec), part)
}

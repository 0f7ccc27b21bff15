//! Ion array description, the natural frequency unit, and the longitudinal
//! coupling matrix of a uniformly spaced Coulomb crystal.
//!
//! All downstream modules work in units where the momentum-exchange frequency
//! `omega0 = sqrt(e^2 / (4 pi eps0 m d0^3))` equals one. Frequencies are
//! therefore plain `f64` multiples of `omega0`, times are multiples of
//! `1 / omega0`.
//!
//! The potential energy is `(1/2) m omega0^2 sum_ij A_ij z_i z_j`, so normal
//! mode frequencies are `omega0 * sqrt(lambda)` for eigenvalues `lambda` of `A`.
//! Two free ions have a breathing frequency of exactly `2 omega0`.

use faer::Mat;
use serde::{Deserialize, Serialize};

use crate::error::{ensure_non_negative, ensure_positive, invalid, Error, Result};
use crate::linalg;

/// CODATA 2018 values (SI).
pub mod constants {
    pub const ELEMENTARY_CHARGE: f64 = 1.602_176_634e-19;
    pub const VACUUM_PERMITTIVITY: f64 = 8.854_187_812_8e-12;
    pub const HBAR: f64 = 1.054_571_817e-34;
    pub const BOLTZMANN: f64 = 1.380_649e-23;
    pub const ATOMIC_MASS_UNIT: f64 = 1.660_539_066_60e-27;
    pub const ELECTRON_MASS: f64 = 9.109_383_701_5e-31;
}

use constants::*;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct IonSpecies {
    /// kg
    pub mass: f64,
    /// C
    pub charge: f64,
    /// Natural linewidth of the cooling/pumping transition, rad/s.
    pub linewidth: f64,
}

impl IonSpecies {
    pub fn new(mass: f64, charge: f64, linewidth: f64) -> Result<Self> {
        ensure_positive("mass", mass)?;
        ensure_positive("charge", charge)?;
        ensure_positive("linewidth", linewidth)?;
        Ok(Self {
            mass,
            charge,
            linewidth,
        })
    }

    /// Singly charged ion with the given atomic mass (in u), one electron removed.
    pub fn singly_charged(mass_amu: f64, linewidth: f64) -> Result<Self> {
        Self::new(
            mass_amu * ATOMIC_MASS_UNIT - ELECTRON_MASS,
            ELEMENTARY_CHARGE,
            linewidth,
        )
    }

    /// 40Ca+ with the 397 nm S-P linewidth of 2 pi x 21.6 MHz.
    pub fn calcium40() -> Self {
        Self::singly_charged(39.962_590_86, 2.0 * std::f64::consts::PI * 21.6e6)
            .expect("calcium constants are valid")
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Tweezer {
    pub site: usize,
    /// Tweezer trap frequency, rad/s.
    pub omega: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IonArraySpec {
    species: IonSpecies,
    n_ions: usize,
    spacing: f64,
    edge_trap: Vec<f64>,
    tweezers: Vec<Tweezer>,
}

impl IonArraySpec {
    /// Box-trapped crystal (`nu_i = 0` everywhere) with the given tweezers.
    pub fn new(
        species: IonSpecies,
        n_ions: usize,
        spacing: f64,
        tweezers: Vec<Tweezer>,
    ) -> Result<Self> {
        Self::with_edge_trap(species, n_ions, spacing, Vec::new(), tweezers)
    }

    /// `edge_trap` holds the per-site dimensionless trap frequencies `nu_i`.
    /// An empty vector means `nu_i = 0` for all sites.
    pub fn with_edge_trap(
        species: IonSpecies,
        n_ions: usize,
        spacing: f64,
        edge_trap: Vec<f64>,
        mut tweezers: Vec<Tweezer>,
    ) -> Result<Self> {
        if n_ions < 3 {
            return Err(invalid("n_ions", format!("need at least 3 ions, got {n_ions}")));
        }
        ensure_positive("spacing", spacing)?;
        if !edge_trap.is_empty() && edge_trap.len() != n_ions {
            return Err(invalid(
                "edge_trap",
                format!("expected {n_ions} entries, got {}", edge_trap.len()),
            ));
        }
        for &nu in &edge_trap {
            ensure_non_negative("edge_trap", nu)?;
        }
        tweezers.sort_by_key(|t| t.site);
        for (k, tw) in tweezers.iter().enumerate() {
            if tw.site >= n_ions {
                return Err(Error::TweezerOutOfRange {
                    site: tw.site,
                    n_ions,
                });
            }
            if k > 0 && tweezers[k - 1].site == tw.site {
                return Err(Error::DuplicateTweezer { site: tw.site });
            }
            ensure_positive("tweezer omega", tw.omega)?;
        }
        Ok(Self {
            species,
            n_ions,
            spacing,
            edge_trap,
            tweezers,
        })
    }

    pub fn species(&self) -> &IonSpecies {
        &self.species
    }

    pub fn n_ions(&self) -> usize {
        self.n_ions
    }

    /// Uniform ion separation, m.
    pub fn spacing(&self) -> f64 {
        self.spacing
    }

    /// Tweezers sorted by site.
    pub fn tweezers(&self) -> &[Tweezer] {
        &self.tweezers
    }

    pub fn edge_trap(&self) -> &[f64] {
        &self.edge_trap
    }

    pub fn tweezered_sites(&self) -> Vec<usize> {
        self.tweezers.iter().map(|t| t.site).collect()
    }

    /// Same crystal with every tweezer replaced by the given set.
    pub fn with_tweezers(&self, tweezers: Vec<Tweezer>) -> Result<Self> {
        Self::with_edge_trap(
            self.species,
            self.n_ions,
            self.spacing,
            self.edge_trap.clone(),
            tweezers,
        )
    }

    /// Natural frequency unit `omega0`, rad/s.
    pub fn omega0(&self) -> f64 {
        unit_scale(&self.species, self.spacing)
    }
}

/// `omega0 = [q^2 / (4 pi eps0 m d0^3)]^(1/2)` in rad/s.
pub fn unit_scale(species: &IonSpecies, spacing: f64) -> f64 {
    let q = species.charge;
    (q * q / (4.0 * std::f64::consts::PI * VACUUM_PERMITTIVITY * species.mass * spacing.powi(3)))
        .sqrt()
}

/// Dimensionless coupling matrix `A` (units of `m omega0^2`).
#[derive(Debug, Clone)]
pub struct CouplingMatrix {
    a: Mat<f64>,
}

impl CouplingMatrix {
    /// Coulomb couplings of `n` ions on the lattice `u_i = i` plus the given
    /// on-site curvatures (`nu_i^2 + nu_ot,i^2`). No size guard: used for
    /// diagnostics such as the two-ion breathing mode.
    pub fn uniform_chain(n: usize, on_site: &[f64]) -> Self {
        assert!(on_site.is_empty() || on_site.len() == n);
        let mut a = Mat::<f64>::zeros(n, n);
        for i in 0..n {
            for j in (i + 1)..n {
                let d = (j - i) as f64;
                let c = 2.0 / (d * d * d);
                a[(i, j)] = -c;
                a[(j, i)] = -c;
            }
        }
        for i in 0..n {
            // Sum smallest terms first for a row-sum that cancels cleanly.
            let coulomb: f64 = (0..n)
                .filter(|&l| l != i)
                .map(|l| a[(i, l)])
                .rev()
                .fold(0.0, |acc, x| acc - x);
            a[(i, i)] = coulomb + on_site.get(i).copied().unwrap_or(0.0);
        }
        Self { a }
    }

    pub fn n(&self) -> usize {
        self.a.nrows()
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.a[(i, j)]
    }

    pub fn as_mat(&self) -> &Mat<f64> {
        &self.a
    }

    /// Normal-mode frequencies of the whole array in units of `omega0`,
    /// ascending. Negative round-off eigenvalues are clamped to zero.
    pub fn eigenfrequencies(&self) -> Result<Vec<f64>> {
        let (vals, _) = linalg::symmetric_eigen(self.a.as_ref())?;
        Ok(vals.into_iter().map(|l| l.max(0.0).sqrt()).collect())
    }

    /// On-site excess `A_ii - sum_l |A_il|`, i.e. `nu_i^2 + nu_ot,i^2`.
    pub fn pinning(&self, i: usize) -> f64 {
        let off: f64 = (0..self.n()).filter(|&l| l != i).map(|l| -self.a[(i, l)]).sum();
        self.a[(i, i)] - off
    }
}

pub fn build_coupling_matrix(spec: &IonArraySpec) -> CouplingMatrix {
    let omega0 = spec.omega0();
    let n = spec.n_ions;
    let mut on_site: Vec<f64> = if spec.edge_trap.is_empty() {
        vec![0.0; n]
    } else {
        spec.edge_trap.iter().map(|nu| nu * nu).collect()
    };
    for tw in &spec.tweezers {
        let nu = tw.omega / omega0;
        on_site[tw.site] += nu * nu;
    }
    CouplingMatrix::uniform_chain(n, &on_site)
}

/// Doppler-limited thermal occupation `1 / (exp(2 omega / gamma) - 1)`,
/// from `T = hbar gamma / (2 k_B)`. Any consistent frequency unit works.
pub fn doppler_occupation(gamma: f64, omega: f64) -> f64 {
    1.0 / (2.0 * omega / gamma).exp_m1()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Displacement {
    /// Coherent amplitude `sqrt(2n) x_zpf`.
    Coherent,
    /// Thermal spread `sqrt(2n + 1) x_zpf`.
    Thermal,
}

/// Real-space displacement in metres for a mode of angular frequency `omega`
/// (rad/s) carrying `n` phonons.
pub fn displacement_estimate(
    n: f64,
    omega: f64,
    species: &IonSpecies,
    kind: Displacement,
) -> Result<f64> {
    ensure_non_negative("n", n)?;
    ensure_positive("omega", omega)?;
    let zpf = (HBAR / (2.0 * species.mass * omega)).sqrt();
    let factor = match kind {
        Displacement::Coherent => (2.0 * n).sqrt(),
        Displacement::Thermal => (2.0 * n + 1.0).sqrt(),
    };
    Ok(factor * zpf)
}

/// A dimensionless time `t` (units of `1/omega0`) in seconds, read two ways:
/// with `omega0` as an angular frequency, and with `omega0 / 2 pi` as a
/// cyclic one. Quoted lab timescales are sometimes given in the latter.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TimeInSeconds {
    pub angular: f64,
    pub cycle: f64,
}

pub fn time_in_seconds(t: f64, omega0: f64) -> TimeInSeconds {
    TimeInSeconds {
        angular: t / omega0,
        cycle: t * 2.0 * std::f64::consts::PI / omega0,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use std::f64::consts::PI;

    fn ca_spec(n: usize, tweezers: Vec<Tweezer>) -> IonArraySpec {
        IonArraySpec::new(IonSpecies::calcium40(), n, 7e-6, tweezers).unwrap()
    }

    #[test]
    fn omega0_for_calcium_at_seven_microns() {
        // e^2/(4 pi eps0 m d0^3) evaluated by hand with m = 40 u: 1.0136e13 s^-2
        let spec = ca_spec(10, vec![]);
        let w0 = spec.omega0();
        assert_relative_eq!(w0 * w0, 1.0136e13, max_relative = 2e-3);
        assert_relative_eq!(w0, 3.18e6, max_relative = 2e-3);
        assert_relative_eq!(w0 / (2.0 * PI), 0.507e6, max_relative = 2e-3);
    }

    #[test]
    fn omega0_scales_as_spacing_to_minus_three_halves() {
        let ca = IonSpecies::calcium40();
        let ratio = unit_scale(&ca, 7e-6) / unit_scale(&ca, 14e-6);
        assert_relative_eq!(ratio, 2f64.powf(1.5), max_relative = 1e-12);
    }

    #[test]
    fn two_free_ions_breathe_at_twice_omega0() {
        let a = CouplingMatrix::uniform_chain(2, &[]);
        assert_eq!(a.get(0, 0), 2.0);
        assert_eq!(a.get(0, 1), -2.0);
        let w = a.eigenfrequencies().unwrap();
        assert!(w[0].abs() < 1e-7);
        assert_relative_eq!(w[1], 2.0, max_relative = 1e-12);
    }

    #[test]
    fn three_ion_matrix_by_hand() {
        let a = build_coupling_matrix(&ca_spec(3, vec![]));
        let expect = [[2.25, -2.0, -0.25], [-2.0, 4.0, -2.0], [-0.25, -2.0, 2.25]];
        for i in 0..3 {
            let mut row = 0.0;
            for j in 0..3 {
                assert_relative_eq!(a.get(i, j), expect[i][j], max_relative = 1e-15);
                row += a.get(i, j);
            }
            assert!(row.abs() < 1e-15);
        }
    }

    #[test]
    fn interior_diagonal_tends_to_four_zeta_three() {
        // 4 zeta(3) from the Apery constant, independent of the matrix code.
        let zeta3 = 1.202_056_903_159_594_3;
        let a = CouplingMatrix::uniform_chain(4001, &[]);
        let mid = a.get(2000, 2000);
        // tail of 4 sum_{l>2000} 1/l^3 ~ 2/2000^2
        assert!((mid - 4.0 * zeta3).abs() < 1e-6, "{mid}");
    }

    #[test]
    fn tweezer_only_raises_its_own_diagonal() {
        let bare = build_coupling_matrix(&ca_spec(12, vec![]));
        let spec = ca_spec(12, vec![Tweezer { site: 4, omega: 2.0 * PI * 2.4e6 }]);
        let nu = 2.0 * PI * 2.4e6 / spec.omega0();
        let pinned = build_coupling_matrix(&spec);
        for i in 0..12 {
            for j in 0..12 {
                let d = pinned.get(i, j) - bare.get(i, j);
                if i == 4 && j == 4 {
                    assert_relative_eq!(d, nu * nu, max_relative = 1e-12);
                } else {
                    assert_eq!(d, 0.0);
                }
            }
        }
        assert_relative_eq!(pinned.pinning(4), nu * nu, max_relative = 1e-10);
    }

    #[test]
    fn rejects_bad_arrays() {
        let ca = IonSpecies::calcium40();
        assert!(IonArraySpec::new(ca, 2, 7e-6, vec![]).is_err());
        assert!(matches!(
            IonArraySpec::new(ca, 5, 7e-6, vec![Tweezer { site: 5, omega: 1.0 }]),
            Err(Error::TweezerOutOfRange { .. })
        ));
        assert!(matches!(
            IonArraySpec::new(
                ca,
                5,
                7e-6,
                vec![Tweezer { site: 1, omega: 1.0 }, Tweezer { site: 1, omega: 2.0 }]
            ),
            Err(Error::DuplicateTweezer { site: 1 })
        ));
        assert!(IonArraySpec::new(ca, 5, -1.0, vec![]).is_err());
        assert!(IonArraySpec::new(ca, 5, 7e-6, vec![Tweezer { site: 1, omega: 0.0 }]).is_err());
        assert!(IonSpecies::new(0.0, 1.0, 1.0).is_err());
    }

    #[test]
    fn doppler_occupation_matches_quoted_levels() {
        let gamma = 2.0 * PI * 21.6e6;
        assert_relative_eq!(doppler_occupation(gamma, 2.0 * PI * 1.0e6), 10.31, max_relative = 2e-3);
        let w0 = 2.0 * PI * 0.5e6;
        assert!((doppler_occupation(gamma, 1.6 * w0) - 13.0).abs() < 0.1);
        assert!((doppler_occupation(gamma, 2.5 * w0) - 8.15).abs() < 0.05);
        assert!(doppler_occupation(gamma, 1e12) < 1e-12);
    }

    #[test]
    fn displacement_matches_quoted_feasibility_numbers() {
        let ca = IonSpecies::calcium40();
        let w = 2.0 * PI * 1.0e6;
        let coherent = displacement_estimate(2000.0, w, &ca, Displacement::Coherent).unwrap();
        assert!((coherent - 0.71e-6).abs() < 0.01e-6, "{coherent}");
        let thermal = displacement_estimate(10.0, w, &ca, Displacement::Thermal).unwrap();
        assert!((thermal - 0.05e-6).abs() < 0.005e-6, "{thermal}");
        let half = displacement_estimate(500.0, w, &ca, Displacement::Coherent).unwrap();
        assert!((half - 0.355e-6).abs() < 0.01e-6, "{half}");
        assert!(displacement_estimate(-1.0, w, &ca, Displacement::Coherent).is_err());
    }

    #[test]
    fn time_conversions_differ_by_two_pi() {
        let w0 = 2.0 * PI * 0.507e6;
        let t = time_in_seconds(2300.0, w0);
        assert_relative_eq!(t.cycle / t.angular, 2.0 * PI, max_relative = 1e-14);
        // 2300 / omega0 is 0.72 ms; read with the cycle frequency it is 4.5 ms.
        assert!((t.angular - 0.722e-3).abs() < 0.01e-3);
        assert!((t.cycle - 4.54e-3).abs() < 0.02e-3);
    }

    mod props {
        use super::*;
        use proptest::prelude::*;

        proptest! {
            #[test]
            fn doppler_monotone(g in 0.1f64..100.0, w in 0.01f64..10.0, dw in 0.001f64..1.0) {
                prop_assert!(doppler_occupation(g, w + dw) < doppler_occupation(g, w));
                prop_assert!(doppler_occupation(g + dw, w) > doppler_occupation(g, w));
            }

            #[test]
            fn untrapped_chain_annihilates_uniform_vector(n in 3usize..60) {
                let a = CouplingMatrix::uniform_chain(n, &[]);
                let mut worst: f64 = 0.0;
                let mut norm: f64 = 0.0;
                for i in 0..n {
                    let row: f64 = (0..n).map(|j| a.get(i, j)).sum();
                    worst = worst.max(row.abs());
                    norm = norm.max(a.get(i, i));
                    for j in 0..n {
                        prop_assert!(a.get(i, j).to_bits() == a.get(j, i).to_bits());
                        if i != j { prop_assert!(a.get(i, j) < 0.0); }
                    }
                }
                prop_assert!(worst <= 1e-10 * norm);
            }

            #[test]
            fn spectrum_is_non_negative(n in 3usize..40, pins in proptest::collection::vec(0.0f64..30.0, 40)) {
                let a = CouplingMatrix::uniform_chain(n, &pins[..n]);
                let (vals, _) = crate::linalg::symmetric_eigen(a.as_mat().as_ref()).unwrap();
                let max = vals.last().copied().unwrap();
                prop_assert!(vals[0] >= -1e-8 * max);
            }
        }
    }
}

//! Two cavity modes (centre-of-mass and breathing) sharing one sideband-driven
//! gain ion. Each mode is described by its ordered quadrature moments
//! `<P^n X^m>` up to fourth order, with `X = a + a^dag`, `P = i(a^dag - a)`;
//! the atom enters through its mean-field expectations. Units of `omega0`.

mod dynamics;
mod moments;
mod rhs;
mod spectrum;
mod sweep;

use serde::{Deserialize, Serialize};

use crate::crystal::doppler_occupation;
use crate::error::{ensure_non_negative, ensure_positive, invalid, Result};

pub use dynamics::{integrate, lasing_level, IntegrateOptions, LasingClass, TrajectoryRecord};
pub use moments::{
    gaussian_moments, init_state, moment_index, phonon_stats, ModeMoments, MomentState,
    PhononStats, MAX_ORDER, MOMENTS_PER_MODE, STATE_LEN,
};
pub use rhs::moment_rhs;
pub use spectrum::{amplitude_spectrum, dominant_frequency, Spectrum};
pub use sweep::{
    find_switch, line_cut, phase_diagram, single_mode_consistency, ConsistencyReport,
    PhaseCell, PhaseDiagram, Switch,
};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ModeLabel {
    Com,
    Br,
}

impl ModeLabel {
    pub const BOTH: [ModeLabel; 2] = [ModeLabel::Com, ModeLabel::Br];

    pub fn index(self) -> usize {
        match self {
            ModeLabel::Com => 0,
            ModeLabel::Br => 1,
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            ModeLabel::Com => "COM",
            ModeLabel::Br => "BR",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ModeParams {
    pub omega: f64,
    pub kappa: f64,
    pub n_th: f64,
    pub eta: f64,
}

impl ModeParams {
    pub fn new(omega: f64, kappa: f64, n_th: f64, eta: f64) -> Result<Self> {
        ensure_positive("omega", omega)?;
        ensure_positive("kappa", kappa)?;
        ensure_non_negative("n_th", n_th)?;
        ensure_non_negative("eta", eta)?;
        Ok(Self {
            omega,
            kappa,
            n_th,
            eta,
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TwoModeParams {
    pub com: ModeParams,
    pub br: ModeParams,
    pub rabi: f64,
    /// Laser detuning from the atomic line, lab frame.
    pub delta: f64,
    pub gamma: f64,
    /// Which of the two cavity ions carries the drive (0 or 1). The
    /// breathing-mode amplitude changes sign between them.
    pub driven_ion: usize,
}

impl TwoModeParams {
    pub fn new(
        com: ModeParams,
        br: ModeParams,
        rabi: f64,
        delta: f64,
        gamma: f64,
        driven_ion: usize,
    ) -> Result<Self> {
        ensure_non_negative("rabi", rabi)?;
        ensure_positive("gamma", gamma)?;
        if !delta.is_finite() {
            return Err(invalid("delta", "must be finite"));
        }
        if driven_ion > 1 {
            return Err(invalid("driven_ion", "must be 0 or 1"));
        }
        Ok(Self {
            com,
            br,
            rabi,
            delta,
            gamma,
            driven_ion,
        })
    }

    /// Lamb-Dicke factors from a single `eta` on the centre-of-mass mode:
    /// `eta_BR = eta sqrt(omega_COM / omega_BR)`.
    pub fn scaled_eta(eta: f64, omega_com: f64, omega_br: f64) -> (f64, f64) {
        (eta, eta * (omega_com / omega_br).sqrt())
    }

    /// Build from mode frequencies and decay rates with Doppler-limited
    /// occupations, `eta = 1` (so `rabi` is the product `eta Omega`) and the
    /// laser on the breathing-mode sideband.
    pub fn with_doppler_occupations(
        omega_com: f64,
        kappa_com: f64,
        omega_br: f64,
        kappa_br: f64,
        gamma: f64,
        eta_omega: f64,
    ) -> Result<Self> {
        let (eta_c, eta_b) = Self::scaled_eta(1.0, omega_com, omega_br);
        let com = ModeParams::new(omega_com, kappa_com, doppler_occupation(gamma, omega_com), eta_c)?;
        let br = ModeParams::new(omega_br, kappa_br, doppler_occupation(gamma, omega_br), eta_b)?;
        Self::new(com, br, eta_omega, omega_br, gamma, 0)
    }

    /// The two-ion cavity used throughout: `omega = 1.6, 2.5`,
    /// `kappa = 0.05, 0.01`, `n_th = 13, 8.15`, `gamma = 43.2`.
    pub fn two_ion_reference(eta_omega: f64) -> Self {
        let (eta_c, eta_b) = Self::scaled_eta(1.0, 1.6, 2.5);
        Self {
            com: ModeParams {
                omega: 1.6,
                kappa: 0.05,
                n_th: 13.0,
                eta: eta_c,
            },
            br: ModeParams {
                omega: 2.5,
                kappa: 0.01,
                n_th: 8.15,
                eta: eta_b,
            },
            rabi: eta_omega,
            delta: 2.5,
            gamma: 43.2,
            driven_ion: 0,
        }
    }

    pub fn mode(&self, q: ModeLabel) -> &ModeParams {
        match q {
            ModeLabel::Com => &self.com,
            ModeLabel::Br => &self.br,
        }
    }

    pub fn mode_mut(&mut self, q: ModeLabel) -> &mut ModeParams {
        match q {
            ModeLabel::Com => &mut self.com,
            ModeLabel::Br => &mut self.br,
        }
    }

    /// Signed atom-mode coupling `eta_q Omega`.
    pub fn coupling(&self, q: ModeLabel) -> f64 {
        let sign = if q == ModeLabel::Br && self.driven_ion == 1 {
            -1.0
        } else {
            1.0
        };
        sign * self.mode(q).eta * self.rabi
    }

    /// `eta Omega` measured on the centre-of-mass Lamb-Dicke factor.
    pub fn eta_omega(&self) -> f64 {
        self.com.eta * self.rabi
    }

    /// Same system with `eta_COM Omega` set to `eta_omega`.
    pub fn with_eta_omega(&self, eta_omega: f64) -> Self {
        let mut p = *self;
        p.rabi = if self.com.eta > 0.0 {
            eta_omega / self.com.eta
        } else {
            eta_omega
        };
        p
    }

    /// Copy with the other mode decoupled from the atom.
    pub fn only(&self, q: ModeLabel) -> Self {
        let mut p = *self;
        let other = match q {
            ModeLabel::Com => ModeLabel::Br,
            ModeLabel::Br => ModeLabel::Com,
        };
        p.mode_mut(other).eta = 0.0;
        p
    }

    /// Default integration span, `50 / min(kappa)`.
    pub fn default_t_max(&self) -> f64 {
        50.0 / self.com.kappa.min(self.br.kappa)
    }
}

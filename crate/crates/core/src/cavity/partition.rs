use serde::{Deserialize, Serialize};

use crate::crystal::{IonArraySpec, Tweezer};
use crate::error::{invalid, Error, Result};

/// Minimum bath-to-cavity size ratio; below `BATH_WARN_RATIO` a warning is logged.
pub const BATH_MIN_RATIO: usize = 10;
pub const BATH_WARN_RATIO: usize = 100;

/// Split of the array into the cavity part `C` (left wall, inner ions, right
/// wall; contiguous) and the bath `B` (everything else).
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Partition {
    n_ions: usize,
    cavity_sites: Vec<usize>,
    bath_sites: Vec<usize>,
    n_system: usize,
    wall_left: usize,
    wall_right: usize,
}

impl Partition {
    /// Cavity block starting at `start`, without checking any tweezer layout.
    pub fn from_layout(
        n_ions: usize,
        start: isize,
        n_system: usize,
        wall_left: usize,
        wall_right: usize,
    ) -> Result<Self> {
        if n_system == 0 {
            return Err(invalid("n_system", "cavity needs at least one ion"));
        }
        let n_cavity = n_system + wall_left + wall_right;
        let end = start + n_cavity as isize;
        if start < 0 || end > n_ions as isize {
            return Err(Error::CavityOutOfRange { start, end, n_ions });
        }
        let start = start as usize;
        let n_bath = n_ions - n_cavity;
        let required = BATH_MIN_RATIO * n_cavity;
        if n_bath < required {
            return Err(Error::InsufficientBath {
                n_bath,
                n_cavity,
                required,
            });
        }
        if n_bath < BATH_WARN_RATIO * n_cavity {
            log::warn!(
                "bath of {n_bath} ions is less than {BATH_WARN_RATIO}x the {n_cavity}-site cavity; \
                 the continuum approximation may be poor"
            );
        }
        let cavity_sites: Vec<usize> = (start..start + n_cavity).collect();
        let bath_sites: Vec<usize> = (0..start).chain(start + n_cavity..n_ions).collect();
        Ok(Self {
            n_ions,
            cavity_sites,
            bath_sites,
            n_system,
            wall_left,
            wall_right,
        })
    }

    pub fn n_ions(&self) -> usize {
        self.n_ions
    }

    pub fn cavity_sites(&self) -> &[usize] {
        &self.cavity_sites
    }

    pub fn bath_sites(&self) -> &[usize] {
        &self.bath_sites
    }

    pub fn n_system(&self) -> usize {
        self.n_system
    }

    pub fn wall_left(&self) -> usize {
        self.wall_left
    }

    pub fn wall_right(&self) -> usize {
        self.wall_right
    }

    pub fn n_walls(&self) -> usize {
        self.wall_left + self.wall_right
    }

    pub fn n_cavity(&self) -> usize {
        self.cavity_sites.len()
    }

    pub fn n_bath(&self) -> usize {
        self.bath_sites.len()
    }

    /// Positions of the wall ions inside the cavity block.
    pub fn wall_offsets(&self) -> Vec<usize> {
        let nc = self.n_cavity();
        (0..self.wall_left).chain(nc - self.wall_right..nc).collect()
    }

    /// Global indices of the wall (tweezered) ions.
    pub fn wall_sites(&self) -> Vec<usize> {
        self.wall_offsets()
            .into_iter()
            .map(|k| self.cavity_sites[k])
            .collect()
    }
}

/// Cavity of `n_system` ions with `wall_left + wall_right` tweezered walls,
/// centred on site `center`. For an even-sized block the extra site goes right.
pub fn partition(
    spec: &IonArraySpec,
    center: usize,
    n_system: usize,
    wall_left: usize,
    wall_right: usize,
) -> Result<Partition> {
    let n_cavity = n_system + wall_left + wall_right;
    let start = center as isize - ((n_cavity as isize - 1) / 2);
    let part = Partition::from_layout(spec.n_ions(), start, n_system, wall_left, wall_right)?;
    let walls = part.wall_sites();
    let tweezered = spec.tweezered_sites();
    if walls != tweezered {
        return Err(Error::MisalignedTweezers { tweezered, walls });
    }
    Ok(part)
}

/// Replace the tweezers of `base` by walls of strength `omega_ot` (rad/s)
/// around a cavity of `n_system` ions centred on `center`, and partition it.
pub fn walled_cavity(
    base: &IonArraySpec,
    center: usize,
    n_system: usize,
    wall_left: usize,
    wall_right: usize,
    omega_ot: f64,
) -> Result<(IonArraySpec, Partition)> {
    let n_cavity = n_system + wall_left + wall_right;
    let start = center as isize - ((n_cavity as isize - 1) / 2);
    let layout = Partition::from_layout(base.n_ions(), start, n_system, wall_left, wall_right)?;
    let tweezers = layout
        .wall_sites()
        .into_iter()
        .map(|site| Tweezer { site, omega: omega_ot })
        .collect();
    let spec = base.with_tweezers(tweezers)?;
    let part = partition(&spec, center, n_system, wall_left, wall_right)?;
    Ok((spec, part))
}

/// Centre site used when none is given: the middle of the array.
pub fn default_center(n_ions: usize) -> usize {
    (n_ions - 1) / 2
}

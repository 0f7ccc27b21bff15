use std::io::{self, Read, Write};

use faer::Mat;
use serde::Serialize;

use super::partition::Partition;
use crate::crystal::CouplingMatrix;
use crate::error::{invalid, Error, Result};
use crate::linalg::{submatrix, symmetric_eigen};

/// Pinning below this (in units of `m omega0^2`) counts as "no tweezer".
const MIN_WALL_PINNING: f64 = 1e-9;

/// Normal modes of the cavity block and of the bath, plus the system-bath
/// coupling spectrum `g_qk` (units of `omega0`).
#[derive(Debug, Clone)]
pub struct ModeDecomposition {
    pub omega_cavity: Vec<f64>,
    pub omega_bath: Vec<f64>,
    pub u_cavity: Mat<f64>,
    pub u_bath: Mat<f64>,
    pub coupling: Mat<f64>,
    pub wall_mode: Vec<bool>,
}

/// Summary of one cavity-part mode.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct CavityMode {
    pub index: usize,
    pub omega: f64,
    pub wall: bool,
    pub wall_overlap: f64,
}

pub(crate) struct CavityBlock {
    pub omega: Vec<f64>,
    pub u: Mat<f64>,
    pub wall_mode: Vec<bool>,
}

fn check_consistent(a: &CouplingMatrix, part: &Partition) -> Result<()> {
    if a.n() != part.n_ions() {
        return Err(invalid(
            "partition",
            format!("{}-ion partition applied to a {}-ion matrix", part.n_ions(), a.n()),
        ));
    }
    Ok(())
}

fn frequencies(vals: Vec<f64>, block: &str) -> Result<Vec<f64>> {
    if let Some(v) = vals.iter().find(|v| **v <= 0.0) {
        return Err(Error::Eigen(format!(
            "{block} block has non-positive eigenvalue {v:.3e}; is it pinned?"
        )));
    }
    Ok(vals.into_iter().map(f64::sqrt).collect())
}

pub(crate) fn wall_overlaps(u: &Mat<f64>, part: &Partition) -> Vec<f64> {
    let offsets = part.wall_offsets();
    (0..u.ncols())
        .map(|q| offsets.iter().map(|&k| u[(k, q)] * u[(k, q)]).sum())
        .collect()
}

/// Diagonalise the cavity block and flag the wall modes: the `w_L + w_R`
/// modes with the largest weight on tweezered sites, ties to higher frequency.
pub(crate) fn cavity_block(a: &CouplingMatrix, part: &Partition) -> Result<CavityBlock> {
    check_consistent(a, part)?;
    for site in part.wall_sites() {
        if a.pinning(site) <= MIN_WALL_PINNING {
            return Err(Error::WallsIndistinct(format!(
                "wall site {site} carries no tweezer pinning"
            )));
        }
    }
    let sites = part.cavity_sites();
    let a_cc = submatrix(a.as_mat(), sites, sites);
    let (vals, u) = symmetric_eigen(a_cc.as_ref())?;
    let omega = frequencies(vals, "cavity")?;
    let overlap = wall_overlaps(&u, part);
    let mut order: Vec<usize> = (0..omega.len()).collect();
    order.sort_by(|&p, &q| {
        overlap[q]
            .total_cmp(&overlap[p])
            .then(omega[q].total_cmp(&omega[p]))
    });
    let mut wall_mode = vec![false; omega.len()];
    for &q in order.iter().take(part.n_walls()) {
        wall_mode[q] = true;
    }
    Ok(CavityBlock { omega, u, wall_mode })
}

/// Diagonalise cavity and bath blocks separately and build
/// `g_qk = (U_C^T A_CB U_B)_qk / (2 sqrt(nu_q nu_k))`.
pub fn decompose(a: &CouplingMatrix, part: &Partition) -> Result<ModeDecomposition> {
    let cav = cavity_block(a, part)?;
    let bath = part.bath_sites();
    let a_bb = submatrix(a.as_mat(), bath, bath);
    let (vals, u_bath) = symmetric_eigen(a_bb.as_ref())?;
    let omega_bath = frequencies(vals, "bath")?;
    let a_cb = submatrix(a.as_mat(), part.cavity_sites(), bath);
    let m = cav.u.transpose() * (&a_cb * &u_bath);
    let coupling = Mat::from_fn(m.nrows(), m.ncols(), |q, k| {
        m[(q, k)] / (2.0 * (cav.omega[q] * omega_bath[k]).sqrt())
    });
    Ok(ModeDecomposition {
        omega_cavity: cav.omega,
        omega_bath,
        u_cavity: cav.u,
        u_bath,
        coupling,
        wall_mode: cav.wall_mode,
    })
}

const MAGIC: &[u8; 4] = b"PFMD";

/// Version of the binary layout written by [`ModeDecomposition::write_to`].
pub const FORMAT_VERSION: u32 = 1;

fn fnv1a(h: &mut u64, bytes: &[u8]) {
    for b in bytes {
        *h ^= u64::from(*b);
        *h = h.wrapping_mul(0x0000_0100_0000_01b3);
    }
}

fn bad(msg: &str) -> io::Error {
    io::Error::new(io::ErrorKind::InvalidData, msg.to_string())
}

impl ModeDecomposition {
    pub fn n_cavity(&self) -> usize {
        self.omega_cavity.len()
    }

    pub fn n_bath(&self) -> usize {
        self.omega_bath.len()
    }

    pub fn modes(&self, part: &Partition) -> Vec<CavityMode> {
        let overlap = wall_overlaps(&self.u_cavity, part);
        (0..self.n_cavity())
            .map(|index| CavityMode {
                index,
                omega: self.omega_cavity[index],
                wall: self.wall_mode[index],
                wall_overlap: overlap[index],
            })
            .collect()
    }

    /// Indices of the non-wall cavity modes, ascending in frequency.
    pub fn cavity_modes(&self) -> Vec<usize> {
        (0..self.n_cavity()).filter(|&q| !self.wall_mode[q]).collect()
    }

    /// `2 U_C [sqrt(nu_q) g_qk sqrt(nu_k)] U_B^T`, which should equal `A_CB`.
    pub fn reconstruct_cross_block(&self) -> Mat<f64> {
        let scaled = Mat::from_fn(self.n_cavity(), self.n_bath(), |q, k| {
            2.0 * self.coupling[(q, k)] * (self.omega_cavity[q] * self.omega_bath[k]).sqrt()
        });
        &self.u_cavity * (&scaled * self.u_bath.transpose())
    }

    /// Little-endian binary dump: header, frequencies, wall flags, then
    /// `U_C`, `U_B`, `g` row-major, followed by a checksum.
    pub fn write_to<W: Write>(&self, mut w: W) -> io::Result<()> {
        let nc = self.n_cavity();
        let nb = self.n_bath();
        let mut body = Vec::with_capacity(8 * (2 * nc + nb + nc * nc + nb * nb + nc * nb) + nc);
        for v in self.omega_cavity.iter().chain(&self.omega_bath) {
            body.extend_from_slice(&v.to_le_bytes());
        }
        body.extend(self.wall_mode.iter().map(|&f| u8::from(f)));
        for mat in [&self.u_cavity, &self.u_bath, &self.coupling] {
            for r in 0..mat.nrows() {
                for c in 0..mat.ncols() {
                    body.extend_from_slice(&mat[(r, c)].to_le_bytes());
                }
            }
        }
        let mut h = 0xcbf2_9ce4_8422_2325;
        fnv1a(&mut h, &body);
        w.write_all(MAGIC)?;
        w.write_all(&FORMAT_VERSION.to_le_bytes())?;
        w.write_all(&(nc as u64).to_le_bytes())?;
        w.write_all(&(nb as u64).to_le_bytes())?;
        w.write_all(&body)?;
        w.write_all(&h.to_le_bytes())?;
        Ok(())
    }

    /// Inverse of [`write_to`](Self::write_to). Any mismatch in magic,
    /// version, length or checksum is an `InvalidData` error.
    pub fn read_from<R: Read>(mut r: R) -> io::Result<Self> {
        let mut raw = Vec::new();
        r.read_to_end(&mut raw)?;
        if raw.len() < 24 || &raw[..4] != MAGIC {
            return Err(bad("not a decomposition file"));
        }
        let version = u32::from_le_bytes(raw[4..8].try_into().unwrap());
        if version != FORMAT_VERSION {
            return Err(bad("unsupported decomposition format version"));
        }
        let nc = u64::from_le_bytes(raw[8..16].try_into().unwrap()) as usize;
        let nb = u64::from_le_bytes(raw[16..24].try_into().unwrap()) as usize;
        let n_f64 = nc
            .checked_mul(nc)
            .and_then(|x| x.checked_add(nb.checked_mul(nb)?))
            .and_then(|x| x.checked_add(nc.checked_mul(nb)?))
            .and_then(|x| x.checked_add(nc + nb))
            .ok_or_else(|| bad("header sizes overflow"))?;
        let body_len = n_f64
            .checked_mul(8)
            .and_then(|x| x.checked_add(nc))
            .ok_or_else(|| bad("header sizes overflow"))?;
        if raw.len() != 24 + body_len + 8 {
            return Err(bad("truncated or oversized decomposition file"));
        }
        let body = &raw[24..24 + body_len];
        let mut h = 0xcbf2_9ce4_8422_2325;
        fnv1a(&mut h, body);
        let stored = u64::from_le_bytes(raw[24 + body_len..].try_into().unwrap());
        if h != stored {
            return Err(bad("checksum mismatch"));
        }
        let mut pos = 0;
        let mut next = |count: usize| -> Vec<f64> {
            let out = body[pos..pos + 8 * count]
                .chunks_exact(8)
                .map(|c| f64::from_le_bytes(c.try_into().unwrap()))
                .collect();
            pos += 8 * count;
            out
        };
        let omega_cavity = next(nc);
        let omega_bath = next(nb);
        let flags_at = 8 * (nc + nb);
        let wall_mode = body[flags_at..flags_at + nc].iter().map(|&b| b != 0).collect();
        let mats_at = flags_at + nc;
        let read_mat = |offset: usize, rows: usize, cols: usize| {
            Mat::from_fn(rows, cols, |i, j| {
                let at = mats_at + offset + 8 * (i * cols + j);
                f64::from_le_bytes(body[at..at + 8].try_into().unwrap())
            })
        };
        let u_cavity = read_mat(0, nc, nc);
        let u_bath = read_mat(8 * nc * nc, nb, nb);
        let coupling = read_mat(8 * (nc * nc + nb * nb), nc, nb);
        Ok(Self {
            omega_cavity,
            omega_bath,
            u_cavity,
            u_bath,
            coupling,
            wall_mode,
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::crystal::CouplingMatrix;
    use crate::linalg::orthogonality_defect;

    fn pinned(n: usize, part: &Partition, nu_ot: f64) -> CouplingMatrix {
        let mut on_site = vec![0.0; n];
        for s in part.wall_sites() {
            on_site[s] = nu_ot * nu_ot;
        }
        CouplingMatrix::uniform_chain(n, &on_site)
    }

    #[test]
    fn round_trip_reproduces_cross_block() {
        let part = Partition::from_layout(300, 140, 2, 2, 2).unwrap();
        let a = pinned(300, &part, 4.0);
        let d = decompose(&a, &part).unwrap();
        assert!(orthogonality_defect(d.u_cavity.as_ref()) < 1e-8);
        assert!(orthogonality_defect(d.u_bath.as_ref()) < 1e-8);
        let back = d.reconstruct_cross_block();
        let direct = submatrix(a.as_mat(), part.cavity_sites(), part.bath_sites());
        let mut worst: f64 = 0.0;
        for i in 0..back.nrows() {
            for j in 0..back.ncols() {
                worst = worst.max((back[(i, j)] - direct[(i, j)]).abs());
            }
        }
        assert!(worst < 1e-8, "{worst}");
    }

    #[test]
    fn wall_modes_sit_above_cavity_modes() {
        let part = Partition::from_layout(400, 190, 3, 2, 2).unwrap();
        let d = decompose(&pinned(400, &part, 3.0), &part).unwrap();
        assert_eq!(d.wall_mode.iter().filter(|&&f| f).count(), 4);
        let top_cavity = d
            .cavity_modes()
            .iter()
            .map(|&q| d.omega_cavity[q])
            .fold(0.0, f64::max);
        for q in (0..d.n_cavity()).filter(|&q| d.wall_mode[q]) {
            assert!(d.omega_cavity[q] > top_cavity);
        }
        assert!(d.omega_cavity.windows(2).all(|w| w[0] <= w[1]));
    }

    #[test]
    fn unpinned_walls_are_rejected() {
        let part = Partition::from_layout(300, 140, 1, 1, 1).unwrap();
        let a = CouplingMatrix::uniform_chain(300, &[]);
        assert!(matches!(decompose(&a, &part), Err(Error::WallsIndistinct(_))));
    }

    #[test]
    fn binary_round_trip_is_bit_identical() {
        let part = Partition::from_layout(200, 90, 1, 1, 1).unwrap();
        let d = decompose(&pinned(200, &part, 5.0), &part).unwrap();
        let mut buf = Vec::new();
        d.write_to(&mut buf).unwrap();
        let e = ModeDecomposition::read_from(buf.as_slice()).unwrap();
        assert_eq!(d.wall_mode, e.wall_mode);
        for (x, y) in d.omega_bath.iter().zip(&e.omega_bath) {
            assert_eq!(x.to_bits(), y.to_bits());
        }
        for q in 0..d.n_cavity() {
            for k in 0..d.n_bath() {
                assert_eq!(d.coupling[(q, k)].to_bits(), e.coupling[(q, k)].to_bits());
            }
        }
        let mut corrupt = buf.clone();
        let mid = corrupt.len() / 2;
        corrupt[mid] ^= 0x40;
        assert!(ModeDecomposition::read_from(corrupt.as_slice()).is_err());
        assert!(ModeDecomposition::read_from(&buf[..buf.len() - 3]).is_err());
        let mut bumped = buf;
        bumped[4] = 99;
        assert!(ModeDecomposition::read_from(bumped.as_slice()).is_err());
    }
}

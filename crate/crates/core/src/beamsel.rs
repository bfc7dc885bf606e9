//! Effective-power beam shortlisting.
//!
//! The effective power of an Rx beam is the mean squared measurement over
//! every Rx subarray, Tx subarray and Tx beam; Tx beams are scored the same
//! way. Keeping only the strongest `P` beams per side shrinks the joint
//! search from `N_Beams^N_SA` to `P^N_SA` assignments per side.

use alloc::format;
use alloc::vec;
use alloc::vec::Vec;

use rand::Rng;

use crate::channel::{ChannelRealization, Ray};
use crate::codebook::RFCodebook;
use crate::error::{Error, Result};
use crate::geometry::{PlanarArray, SubarrayLayout};
use crate::sounding::{add_noise, measure_ray_expansion_at, MeasurementTensor};

#[derive(Debug, Clone, PartialEq)]
pub struct EffectivePowerProfile {
    pub rx_powers: Vec<f64>,
    pub tx_powers: Vec<f64>,
}

impl EffectivePowerProfile {
    pub fn from_tensor(t: &MeasurementTensor) -> Self {
        Self {
            rx_powers: effective_power_rx(t),
            tx_powers: effective_power_tx(t),
        }
    }
}

/// `P^R_eff(l) = Σ_{i,j,bT} |h[i][j][l][bT]|² / (N^R_SA N^T_SA N^T_Beams)`.
pub fn effective_power_rx(t: &MeasurementTensor) -> Vec<f64> {
    let d = t.dims();
    let mut p = vec![0.0; d.rx_beams];
    for ((_, _, br, _), v) in t.indexed() {
        p[br] += v.norm_sqr();
    }
    let n = (d.rx_sa * d.tx_sa * d.tx_beams) as f64;
    p.iter_mut().for_each(|x| *x /= n);
    p
}

/// `P^T_eff(k) = Σ_{i,j,bR} |h[i][j][bR][k]|² / (N^R_SA N^T_SA N^R_Beams)`.
pub fn effective_power_tx(t: &MeasurementTensor) -> Vec<f64> {
    let d = t.dims();
    let mut p = vec![0.0; d.tx_beams];
    for ((_, _, _, bt), v) in t.indexed() {
        p[bt] += v.norm_sqr();
    }
    let n = (d.rx_sa * d.tx_sa * d.rx_beams) as f64;
    p.iter_mut().for_each(|x| *x /= n);
    p
}

/// Indices of the `p` largest powers, ties toward the lower index, returned
/// in ascending index order.
pub fn top_p(powers: &[f64], p: usize) -> Result<Vec<usize>> {
    if p == 0 || p > powers.len() {
        return Err(Error::POutOfRange { p, len: powers.len() });
    }
    let mut idx: Vec<usize> = (0..powers.len()).collect();
    // stable: equal powers keep index order
    idx.sort_by(|&a, &b| powers[b].total_cmp(&powers[a]));
    idx.truncate(p);
    idx.sort_unstable();
    Ok(idx)
}

/// Per-size outcome of [`lemma1_probe`].
#[derive(Debug, Clone, PartialEq)]
pub struct Lemma1Report {
    /// Antennas per subarray.
    pub n: usize,
    pub rx_powers: Vec<f64>,
    /// Rx codebook index of each ray's AoA.
    pub aoa_beams: Vec<usize>,
    /// `rx_powers` at `aoa_beams`.
    pub aoa_powers: Vec<f64>,
    /// Largest effective power over beams that are no ray's AoA; 0 if there
    /// are none.
    pub max_non_aoa: f64,
    /// `min(aoa_powers) / max_non_aoa`.
    pub dominance_ratio: f64,
    /// Whether AoA-beam powers sort in the same order as `|G_r|²`.
    pub ordering_matches: bool,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Lemma1Config {
    /// Antennas per subarray; each must be a perfect square.
    pub sizes: Vec<usize>,
    /// Subarrays per side, placed side by side along y.
    pub n_subarrays: usize,
    pub spacing_wavelengths: f64,
    pub sigma2: f64,
}

impl Default for Lemma1Config {
    fn default() -> Self {
        Self {
            sizes: vec![16, 64, 256],
            n_subarrays: 2,
            spacing_wavelengths: 0.5,
            sigma2: 0.0,
        }
    }
}

fn square_side(n: usize) -> Result<usize> {
    let side = (0..=n).find(|s| s * s >= n).unwrap_or(0);
    if side == 0 || side * side != n {
        return Err(Error::InvalidGeometry(format!("{n} antennas is not a square subarray")));
    }
    Ok(side)
}

/// Effective powers of exact-AoA beams against all other Rx beams, for
/// growing square subarrays.
///
/// Every ray's AoA must be an Rx codebook beam and every AoD a Tx codebook
/// beam.
pub fn lemma1_probe<R: Rng + ?Sized>(
    rays: &[Ray],
    rx_cb: &RFCodebook,
    tx_cb: &RFCodebook,
    cfg: &Lemma1Config,
    rng: &mut R,
) -> Result<Vec<Lemma1Report>> {
    if rays.is_empty() {
        return Err(Error::EmptyInput("rays"));
    }
    if cfg.n_subarrays == 0 {
        return Err(Error::InvalidGeometry("need at least one subarray".into()));
    }
    let aoa_beams = rays
        .iter()
        .enumerate()
        .map(|(r, ray)| rx_cb.position(ray.aoa).ok_or(Error::CodebookMissingAoa("AoA", r)))
        .collect::<Result<Vec<_>>>()?;
    for (r, ray) in rays.iter().enumerate() {
        tx_cb.position(ray.aod).ok_or(Error::CodebookMissingAoa("AoD", r))?;
    }

    // rays by decreasing gain, ties by index
    let mut by_gain: Vec<usize> = (0..rays.len()).collect();
    by_gain.sort_by(|&a, &b| rays[b].gain_magnitude.total_cmp(&rays[a].gain_magnitude));

    let mut reports = Vec::with_capacity(cfg.sizes.len());
    for &n in &cfg.sizes {
        let side = square_side(n)?;
        let sa = PlanarArray::square(side, cfg.spacing_wavelengths)?;
        let layout = SubarrayLayout::contiguous_along_y(sa, cfg.n_subarrays)?;
        let ch = ChannelRealization::new(rays.to_vec(), layout.clone(), layout);
        let clean = measure_ray_expansion_at(&ch, rx_cb, tx_cb, 0.0);
        let t = add_noise(&clean, cfg.sigma2, rng)?;
        let rx_powers = effective_power_rx(&t);

        let aoa_powers: Vec<f64> = aoa_beams.iter().map(|&b| rx_powers[b]).collect();
        let max_non_aoa = rx_powers
            .iter()
            .enumerate()
            .filter(|(b, _)| !aoa_beams.contains(b))
            .map(|(_, p)| *p)
            .fold(0.0, f64::max);
        let min_aoa = aoa_powers.iter().copied().fold(f64::INFINITY, f64::min);
        let ordering_matches = by_gain
            .windows(2)
            .all(|w| aoa_beams[w[0]] == aoa_beams[w[1]] || aoa_powers[w[0]] > aoa_powers[w[1]]);
        reports.push(Lemma1Report {
            n,
            rx_powers,
            aoa_beams: aoa_beams.clone(),
            aoa_powers,
            max_non_aoa,
            dominance_ratio: min_aoa / max_non_aoa,
            ordering_matches,
        });
    }
    Ok(reports)
}

/// Shortlists `p` beams on each side by effective power.
pub fn shortlist(t: &MeasurementTensor, p_rx: usize, p_tx: usize) -> Result<(Vec<usize>, Vec<usize>)> {
    let prof = EffectivePowerProfile::from_tensor(t);
    Ok((top_p(&prof.rx_powers, p_rx)?, top_p(&prof.tx_powers, p_tx)?))
}

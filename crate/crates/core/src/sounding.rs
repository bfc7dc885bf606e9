//! Per-beam-pair channel measurements.
//!
//! Entry `(i, j, bR, bT)` of a [`MeasurementTensor`] is the coefficient seen
//! when Rx subarray `i` listens on beam `bR` while Tx subarray `j` sends a
//! unit pilot on beam `bT`. It can be computed from the channel matrix
//! ([`measure_direct`]) or ray by ray ([`measure_ray_expansion`]); the two
//! agree to rounding.

use alloc::format;
use alloc::vec;
use alloc::vec::Vec;

use rand::Rng;
use rand_distr::{Distribution, StandardNormal};

use crate::channel::{rx_projection, tx_projection, ChannelRealization};
use crate::codebook::{Codebooks, RFCodebook};
use crate::error::{Error, Result};
use crate::geometry::{steering_vector, SubarrayLayout};
use crate::math::{self, cis, CMatrix, C64};

/// `(N^R_SA, N^T_SA, N^R_Beams, N^T_Beams)`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct TensorDims {
    pub rx_sa: usize,
    pub tx_sa: usize,
    pub rx_beams: usize,
    pub tx_beams: usize,
}

impl TensorDims {
    pub fn len(&self) -> usize {
        self.rx_sa * self.tx_sa * self.rx_beams * self.tx_beams
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    #[inline]
    pub fn offset(&self, i: usize, j: usize, br: usize, bt: usize) -> usize {
        ((i * self.tx_sa + j) * self.rx_beams + br) * self.tx_beams + bt
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct MeasurementTensor {
    dims: TensorDims,
    values: Vec<C64>,
    noise_variance: f64,
}

impl MeasurementTensor {
    pub fn zeros(dims: TensorDims) -> Self {
        Self {
            dims,
            values: vec![C64::new(0.0, 0.0); dims.len()],
            noise_variance: 0.0,
        }
    }

    /// Wraps values laid out as `[i][j][bR][bT]`, `bT` fastest.
    pub fn from_values(dims: TensorDims, values: Vec<C64>, noise_variance: f64) -> Result<Self> {
        if values.len() != dims.len() {
            return Err(Error::DimensionMismatch(format!(
                "{} values for dims {dims:?}",
                values.len()
            )));
        }
        if !(noise_variance >= 0.0) {
            return Err(Error::InvalidConfig(format!("noise variance {noise_variance} < 0")));
        }
        Ok(Self {
            dims,
            values,
            noise_variance,
        })
    }

    pub fn dims(&self) -> TensorDims {
        self.dims
    }

    pub fn values(&self) -> &[C64] {
        &self.values
    }

    pub fn noise_variance(&self) -> f64 {
        self.noise_variance
    }

    #[inline]
    pub fn get(&self, i: usize, j: usize, br: usize, bt: usize) -> C64 {
        self.values[self.dims.offset(i, j, br, bt)]
    }

    #[inline]
    pub fn get_mut(&mut self, i: usize, j: usize, br: usize, bt: usize) -> &mut C64 {
        let k = self.dims.offset(i, j, br, bt);
        &mut self.values[k]
    }

    /// Multiplies every entry by `c`.
    pub fn scaled(&self, c: C64) -> Self {
        Self {
            dims: self.dims,
            values: self.values.iter().map(|v| v * c).collect(),
            noise_variance: self.noise_variance * c.norm_sqr(),
        }
    }

    /// Iterates `((i, j, bR, bT), value)` in storage order.
    pub fn indexed(&self) -> impl Iterator<Item = ((usize, usize, usize, usize), C64)> + '_ {
        let d = self.dims;
        self.values.iter().enumerate().map(move |(k, v)| {
            let bt = k % d.tx_beams;
            let br = (k / d.tx_beams) % d.rx_beams;
            let j = (k / (d.tx_beams * d.rx_beams)) % d.tx_sa;
            let i = k / (d.tx_beams * d.rx_beams * d.tx_sa);
            ((i, j, br, bt), *v)
        })
    }
}

fn dims_for(rx: &SubarrayLayout, tx: &SubarrayLayout, rx_cb: &RFCodebook, tx_cb: &RFCodebook) -> TensorDims {
    TensorDims {
        rx_sa: rx.num_subarrays(),
        tx_sa: tx.num_subarrays(),
        rx_beams: rx_cb.len(),
        tx_beams: tx_cb.len(),
    }
}

/// Every subarray steered to every beam: `N_Ant x (N_SA * N_Beams)`, column
/// `s * N_Beams + b` is subarray `s` on beam `b`.
fn beam_bank(layout: &SubarrayLayout, cb: &RFCodebook) -> CMatrix {
    let n_sa = layout.antennas_per_subarray();
    let nb = cb.len();
    let mut w = CMatrix::zeros(layout.total_antennas(), layout.num_subarrays() * nb);
    for (b, &beam) in cb.beams().iter().enumerate() {
        let a = steering_vector(layout.subarray(), beam);
        for s in 0..layout.num_subarrays() {
            for (k, v) in a.iter().enumerate() {
                w[(s * n_sa + k, s * nb + b)] = *v;
            }
        }
    }
    w
}

/// Measurements from the full channel matrix: `h = (F_R^H H F_T)(i, j)` with
/// beam `bR` on Rx subarray `i` and beam `bT` on Tx subarray `j`.
pub fn measure_direct(
    h: &CMatrix,
    rx_layout: &SubarrayLayout,
    tx_layout: &SubarrayLayout,
    rx_cb: &RFCodebook,
    tx_cb: &RFCodebook,
) -> Result<MeasurementTensor> {
    let expect = (rx_layout.total_antennas(), tx_layout.total_antennas());
    if h.shape() != expect {
        return Err(Error::DimensionMismatch(format!(
            "channel is {:?}, layouts need {expect:?}",
            h.shape()
        )));
    }
    let dims = dims_for(rx_layout, tx_layout, rx_cb, tx_cb);
    let prod = beam_bank(rx_layout, rx_cb).adjoint() * h * beam_bank(tx_layout, tx_cb);
    let mut t = MeasurementTensor::zeros(dims);
    for i in 0..dims.rx_sa {
        for j in 0..dims.tx_sa {
            for br in 0..dims.rx_beams {
                for bt in 0..dims.tx_beams {
                    *t.get_mut(i, j, br, bt) = prod[(i * dims.rx_beams + br, j * dims.tx_beams + bt)];
                }
            }
        }
    }
    Ok(t)
}

/// Measurements summed ray by ray from subarray projections, at time `t`.
pub fn measure_ray_expansion_at(
    ch: &ChannelRealization,
    rx_cb: &RFCodebook,
    tx_cb: &RFCodebook,
    t: f64,
) -> MeasurementTensor {
    let dims = dims_for(&ch.rx_layout, &ch.tx_layout, rx_cb, tx_cb);
    let mut out = MeasurementTensor::zeros(dims);
    let mut rx = vec![C64::new(0.0, 0.0); dims.rx_sa * dims.rx_beams];
    let mut tx = vec![C64::new(0.0, 0.0); dims.tx_sa * dims.tx_beams];
    for ray in &ch.rays {
        let g = cis(ray.initial_phase + ray.doppler_phase(t)) * ray.gain_magnitude;
        for i in 0..dims.rx_sa {
            for (br, &beam) in rx_cb.beams().iter().enumerate() {
                rx[i * dims.rx_beams + br] = g * rx_projection(&ch.rx_layout, i, ray.aoa, beam);
            }
        }
        for j in 0..dims.tx_sa {
            for (bt, &beam) in tx_cb.beams().iter().enumerate() {
                tx[j * dims.tx_beams + bt] = tx_projection(&ch.tx_layout, j, ray.aod, beam);
            }
        }
        let mut k = 0;
        for i in 0..dims.rx_sa {
            for j in 0..dims.tx_sa {
                for br in 0..dims.rx_beams {
                    let a = rx[i * dims.rx_beams + br];
                    for bt in 0..dims.tx_beams {
                        out.values[k] += a * tx[j * dims.tx_beams + bt];
                        k += 1;
                    }
                }
            }
        }
    }
    out
}

/// Measurements summed ray by ray at `t = 0`.
pub fn measure_ray_expansion(ch: &ChannelRealization, codebooks: &Codebooks) -> MeasurementTensor {
    measure_ray_expansion_at(ch, &codebooks.rx_rf, &codebooks.tx_rf, 0.0)
}

/// One circularly-symmetric complex Gaussian draw of variance `sigma2`.
pub fn complex_gaussian<R: Rng + ?Sized>(rng: &mut R, sigma2: f64) -> C64 {
    let s = math::sqrt(sigma2 / 2.0);
    let re: f64 = StandardNormal.sample(rng);
    let im: f64 = StandardNormal.sample(rng);
    C64::new(re * s, im * s)
}

/// Adds independent `CN(0, sigma2)` noise to every entry, in storage order.
pub fn add_noise<R: Rng + ?Sized>(t: &MeasurementTensor, sigma2: f64, rng: &mut R) -> Result<MeasurementTensor> {
    if !(sigma2 >= 0.0) || !sigma2.is_finite() {
        return Err(Error::InvalidConfig(format!("noise variance {sigma2} must be finite and >= 0")));
    }
    if sigma2 == 0.0 {
        return Ok(t.clone());
    }
    let values = t.values.iter().map(|v| v + complex_gaussian(rng, sigma2)).collect();
    Ok(MeasurementTensor {
        dims: t.dims,
        values,
        noise_variance: t.noise_variance + sigma2,
    })
}

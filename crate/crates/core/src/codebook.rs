//! RF beam codebooks, baseband precoder codebooks and RF precoder assembly.

use alloc::format;
use alloc::vec;
use alloc::vec::Vec;
use core::f64::consts::FRAC_1_SQRT_2;

use crate::error::{Error, Result};
use crate::geometry::{steering_vector, AnglePair, SubarrayLayout};
use crate::math::{CMatrix, C64};

const UNIT_NORM_TOLERANCE: f64 = 1e-9;

/// Beams one subarray may steer to.
#[derive(Debug, Clone, PartialEq)]
pub struct RFCodebook {
    beams: Vec<AnglePair>,
}

impl RFCodebook {
    pub fn new(beams: Vec<AnglePair>) -> Result<Self> {
        if beams.is_empty() {
            return Err(Error::InvalidCodebook("RF codebook is empty".into()));
        }
        if let Some(b) = beams.iter().find(|b| !b.is_valid()) {
            return Err(Error::InvalidCodebook(format!("beam {b:?} is not a valid direction")));
        }
        for (i, a) in beams.iter().enumerate() {
            if beams[..i].contains(a) {
                return Err(Error::InvalidCodebook(format!("beam {i} duplicates an earlier beam")));
            }
        }
        Ok(Self { beams })
    }

    pub fn beams(&self) -> &[AnglePair] {
        &self.beams
    }

    pub fn len(&self) -> usize {
        self.beams.len()
    }

    pub fn is_empty(&self) -> bool {
        self.beams.is_empty()
    }

    pub fn beam(&self, index: usize) -> Result<AnglePair> {
        self.beams.get(index).copied().ok_or(Error::IndexOutOfRange {
            what: "RF beam",
            index,
            len: self.beams.len(),
        })
    }

    /// Index of the beam closest in angle to `dir`; ties go to the lower
    /// index.
    pub fn nearest(&self, dir: AnglePair) -> usize {
        let mut best = 0;
        let mut best_d = f64::INFINITY;
        for (i, b) in self.beams.iter().enumerate() {
            let d = b.angular_distance(&dir);
            if d < best_d {
                best = i;
                best_d = d;
            }
        }
        best
    }

    /// Index of `dir` if it is a codebook beam.
    pub fn position(&self, dir: AnglePair) -> Option<usize> {
        self.beams.iter().position(|b| *b == dir)
    }

    /// Sub-codebook made of the listed beams, in the given order.
    pub fn subset(&self, indices: &[usize]) -> Result<Self> {
        let beams = indices.iter().map(|&i| self.beam(i)).collect::<Result<Vec<_>>>()?;
        Self::new(beams)
    }
}

/// `n_beams` azimuths at the midpoints of equal bins of
/// `[sector_start, sector_end]`, all at elevation `elevation`.
pub fn uniform_codebook(sector_start: f64, sector_end: f64, n_beams: usize, elevation: f64) -> Result<RFCodebook> {
    if n_beams == 0 {
        return Err(Error::InvalidCodebook("n_beams must be at least 1".into()));
    }
    if !(sector_end > sector_start) {
        return Err(Error::InvalidCodebook(format!(
            "sector end {sector_end} must exceed start {sector_start}"
        )));
    }
    let width = (sector_end - sector_start) / n_beams as f64;
    let beams = (0..n_beams)
        .map(|b| AnglePair::new(sector_start + (b as f64 + 0.5) * width, elevation))
        .collect();
    RFCodebook::new(beams)
}

/// Beam index chosen by each subarray.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct RFAssignment(pub Vec<usize>);

impl RFAssignment {
    pub fn uniform(beam: usize, n_sa: usize) -> Self {
        Self(vec![beam; n_sa])
    }

    pub fn indices(&self) -> &[usize] {
        &self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn validate(&self, n_sa: usize, cb: &RFCodebook) -> Result<()> {
        if self.0.len() != n_sa {
            return Err(Error::DimensionMismatch(format!(
                "assignment has {} entries for {} subarrays",
                self.0.len(),
                n_sa
            )));
        }
        if let Some(&index) = self.0.iter().find(|&&b| b >= cb.len()) {
            return Err(Error::IndexOutOfRange {
                what: "RF beam",
                index,
                len: cb.len(),
            });
        }
        Ok(())
    }
}

/// Block-diagonal RF precoder: column `s` holds the unit-norm steering vector
/// of beam `asg[s]` in the rows of subarray `s`.
pub fn rf_precoder_matrix(layout: &SubarrayLayout, cb: &RFCodebook, asg: &RFAssignment) -> Result<CMatrix> {
    asg.validate(layout.num_subarrays(), cb)?;
    let n_sa = layout.antennas_per_subarray();
    let mut f = CMatrix::zeros(layout.total_antennas(), layout.num_subarrays());
    for (s, &b) in asg.indices().iter().enumerate() {
        let a = steering_vector(layout.subarray(), cb.beams[b]);
        for (k, v) in a.into_iter().enumerate() {
            f[(s * n_sa + k, s)] = v;
        }
    }
    Ok(f)
}

/// Baseband precoders, each `N^T_SA x N_L`. Every column of every matrix has
/// the same nonzero norm, so each layer gets the same power whichever
/// matrix is picked.
#[derive(Debug, Clone, PartialEq)]
pub struct BBCodebook {
    matrices: Vec<CMatrix>,
}

impl BBCodebook {
    pub fn new(matrices: Vec<CMatrix>) -> Result<Self> {
        let first = matrices
            .first()
            .ok_or_else(|| Error::InvalidCodebook("BB codebook is empty".into()))?;
        let shape = first.shape();
        if shape.0 == 0 || shape.1 == 0 {
            return Err(Error::InvalidCodebook("BB matrices must be nonempty".into()));
        }
        let col_norm = first.column(0).norm();
        for (i, m) in matrices.iter().enumerate() {
            if m.shape() != shape {
                return Err(Error::InvalidCodebook(format!(
                    "matrix {i} is {:?}, expected {:?}",
                    m.shape(),
                    shape
                )));
            }
            for (c, col) in m.column_iter().enumerate() {
                let norm = col.norm();
                if !(norm > 0.0) || (norm - col_norm).abs() > UNIT_NORM_TOLERANCE {
                    return Err(Error::InvalidCodebook(format!(
                        "matrix {i} column {c} has norm {norm}, expected {col_norm}"
                    )));
                }
            }
        }
        Ok(Self { matrices })
    }

    pub fn matrices(&self) -> &[CMatrix] {
        &self.matrices
    }

    pub fn get(&self, index: usize) -> Result<&CMatrix> {
        self.matrices.get(index).ok_or(Error::IndexOutOfRange {
            what: "BB matrix",
            index,
            len: self.matrices.len(),
        })
    }

    pub fn len(&self) -> usize {
        self.matrices.len()
    }

    pub fn is_empty(&self) -> bool {
        self.matrices.is_empty()
    }

    pub fn n_sa(&self) -> usize {
        self.matrices[0].nrows()
    }

    pub fn n_layers(&self) -> usize {
        self.matrices[0].ncols()
    }

    /// Shared column norm.
    pub fn column_norm(&self) -> f64 {
        self.matrices[0].column(0).norm()
    }
}

/// Built-in baseband codebook. Only the two-port rank-2 set exists; its
/// matrices have unit Frobenius norm (total transmit power 1).
pub fn default_bb_codebook(n_sa: usize, n_layers: usize) -> Result<BBCodebook> {
    if (n_sa, n_layers) != (2, 2) {
        return Err(Error::UnsupportedSize { n_sa, n_layers });
    }
    let r = |x: f64| C64::new(x, 0.0);
    let h = 0.5;
    let identity = CMatrix::from_row_slice(2, 2, &[r(FRAC_1_SQRT_2), r(0.0), r(0.0), r(FRAC_1_SQRT_2)]);
    let dft = CMatrix::from_row_slice(2, 2, &[r(h), r(h), r(h), r(-h)]);
    let quad = CMatrix::from_row_slice(2, 2, &[r(h), r(h), C64::new(0.0, h), C64::new(0.0, -h)]);
    BBCodebook::new(vec![identity, dft, quad])
}

/// Tx and Rx RF codebooks together with the Tx baseband codebook.
#[derive(Debug, Clone, PartialEq)]
pub struct Codebooks {
    pub tx_rf: RFCodebook,
    pub rx_rf: RFCodebook,
    pub bb: BBCodebook,
}

impl Codebooks {
    pub fn new(tx_rf: RFCodebook, rx_rf: RFCodebook, bb: BBCodebook) -> Self {
        Self { tx_rf, rx_rf, bb }
    }

    /// Checks the baseband codebook against the Tx subarray count.
    pub fn check_tx(&self, tx_layout: &SubarrayLayout) -> Result<()> {
        if self.bb.n_sa() != tx_layout.num_subarrays() {
            return Err(Error::DimensionMismatch(format!(
                "BB matrices have {} rows, Tx has {} subarrays",
                self.bb.n_sa(),
                tx_layout.num_subarrays()
            )));
        }
        Ok(())
    }
}

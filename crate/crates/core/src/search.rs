//! Joint RF/baseband precoder search over a measurement tensor.

use alloc::format;
use alloc::vec;
use alloc::vec::Vec;

use rand::Rng;

use crate::codebook::{BBCodebook, RFAssignment};
use crate::error::{Error, Result};
use crate::math::{self, CMatrix, C64};
use crate::sounding::MeasurementTensor;

/// Default upper bound on the number of combinations one search may visit.
pub const DEFAULT_COMBINATION_CAP: u64 = 1 << 24;

/// Relative mutual-information difference below which two selections tie.
/// Scaled-unitary baseband matrices give mathematically equal values that
/// differ only by rounding.
pub const TIE_TOLERANCE: f64 = 1e-12;

#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct PrecoderSelection {
    pub bb_index: usize,
    pub tx_assignment: RFAssignment,
    pub rx_assignment: RFAssignment,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SearchResult {
    pub selection: PrecoderSelection,
    /// Bits/s/Hz.
    pub mutual_info: f64,
    pub combinations_evaluated: u64,
}

/// `rx_beams^rx_sa * tx_beams^tx_sa * n_bb`, or `None` on overflow.
pub fn count_combinations(rx_beams: usize, rx_sa: usize, tx_beams: usize, tx_sa: usize, n_bb: usize) -> Option<u128> {
    let pow = |b: usize, e: usize| -> Option<u128> {
        let e = u32::try_from(e).ok()?;
        (b as u128).checked_pow(e)
    };
    pow(rx_beams, rx_sa)?.checked_mul(pow(tx_beams, tx_sa)?)?.checked_mul(n_bb as u128)
}

fn gcd(mut a: u128, mut b: u128) -> u128 {
    while b != 0 {
        (a, b) = (b, a % b);
    }
    a
}

/// `num / den` in lowest terms.
pub fn reduced_ratio(num: u128, den: u128) -> (u128, u128) {
    let g = gcd(num, den).max(1);
    (num / g, den / g)
}

/// `H_c = M P`, where `M(i, j)` is the tensor entry for Rx subarray `i` on
/// its assigned beam and Tx subarray `j` on its assigned beam.
pub fn compressed_channel(t: &MeasurementTensor, sel: &PrecoderSelection, bb: &BBCodebook) -> Result<CMatrix> {
    let d = t.dims();
    let p = bb.get(sel.bb_index)?;
    if p.nrows() != d.tx_sa {
        return Err(Error::DimensionMismatch(format!(
            "BB matrices have {} rows, tensor has {} Tx subarrays",
            p.nrows(),
            d.tx_sa
        )));
    }
    check_assignment(&sel.rx_assignment, d.rx_sa, d.rx_beams, "Rx beam")?;
    check_assignment(&sel.tx_assignment, d.tx_sa, d.tx_beams, "Tx beam")?;
    let m = CMatrix::from_fn(d.rx_sa, d.tx_sa, |i, j| {
        t.get(i, j, sel.rx_assignment.0[i], sel.tx_assignment.0[j])
    });
    Ok(m * p)
}

fn check_assignment(a: &RFAssignment, n_sa: usize, n_beams: usize, what: &'static str) -> Result<()> {
    if a.len() != n_sa {
        return Err(Error::DimensionMismatch(format!(
            "{what} assignment has {} entries for {n_sa} subarrays",
            a.len()
        )));
    }
    match a.indices().iter().find(|&&b| b >= n_beams) {
        Some(&index) => Err(Error::IndexOutOfRange {
            what,
            index,
            len: n_beams,
        }),
        None => Ok(()),
    }
}

/// `log2 det(I + H_c^H H_c / sigma2)`, from the singular values of `H_c`.
/// `sigma2` must be positive.
pub fn mutual_information(hc: &CMatrix, sigma2: f64) -> f64 {
    if hc.is_empty() {
        return 0.0;
    }
    hc.clone()
        .singular_values()
        .iter()
        .map(|s| math::log2(1.0 + s * s / sigma2))
        .sum()
}

/// `log2 det(I + G / sigma2)` for a Hermitian PSD `n x n` matrix `g`
/// (row-major), by Cholesky factorization. `work` is scratch of length
/// `n * n`.
fn log2_det_shifted(g: &[C64], n: usize, sigma2: f64, work: &mut [C64]) -> f64 {
    match n {
        1 => math::log2(1.0 + g[0].re / sigma2),
        2 => {
            let a = g[0].re / sigma2;
            let d = g[3].re / sigma2;
            let b = g[1].norm_sqr() / (sigma2 * sigma2);
            // a*d - |b|^2 >= 0 for PSD input, clamp rounding
            let cross = (a * d - b).max(0.0);
            math::log2(1.0 + a + d + cross)
        }
        _ => {
            for (w, v) in work.iter_mut().zip(g) {
                *w = v / sigma2;
            }
            for k in 0..n {
                work[k * n + k] += 1.0;
            }
            let mut log_det = 0.0;
            for k in 0..n {
                let mut diag = work[k * n + k].re;
                for m in 0..k {
                    diag -= work[k * n + m].norm_sqr();
                }
                let l = math::sqrt(diag.max(f64::MIN_POSITIVE));
                work[k * n + k] = C64::new(l, 0.0);
                for r in k + 1..n {
                    let mut s = work[r * n + k];
                    for m in 0..k {
                        s -= work[r * n + m] * work[k * n + m].conj();
                    }
                    work[r * n + k] = s / l;
                }
                log_det += 2.0 * math::log2(l);
            }
            log_det
        }
    }
}

/// Advances a mixed-radix counter, last digit fastest. Returns `false` after
/// the final state.
fn advance(digits: &mut [usize], radix: usize) -> bool {
    for d in digits.iter_mut().rev() {
        *d += 1;
        if *d < radix {
            return true;
        }
        *d = 0;
    }
    false
}

fn sorted_unique(c: &[usize], n_beams: usize, what: &'static str) -> Result<Vec<usize>> {
    if c.is_empty() {
        return Err(Error::EmptySubset(what));
    }
    let mut v = c.to_vec();
    v.sort_unstable();
    v.dedup();
    if let Some(&index) = v.last().filter(|&&b| b >= n_beams) {
        return Err(Error::IndexOutOfRange {
            what,
            index,
            len: n_beams,
        });
    }
    Ok(v)
}

fn check_sigma2(sigma2: f64) -> Result<()> {
    if sigma2 > 0.0 && sigma2.is_finite() {
        Ok(())
    } else {
        Err(Error::InvalidConfig(format!("noise variance must be positive, got {sigma2}")))
    }
}

/// Best selection over all beam assignments drawn from `rx_candidates` and
/// `tx_candidates` and every baseband matrix.
///
/// Ties in mutual information (within [`TIE_TOLERANCE`]) go to the
/// lexicographically smallest `(bb_index, tx_assignment, rx_assignment)`. Candidate lists are sorted and
/// deduplicated first, so their order does not matter.
pub fn restricted_search(
    t: &MeasurementTensor,
    bb: &BBCodebook,
    sigma2: f64,
    rx_candidates: &[usize],
    tx_candidates: &[usize],
    cap: u64,
) -> Result<SearchResult> {
    check_sigma2(sigma2)?;
    let d = t.dims();
    if bb.n_sa() != d.tx_sa {
        return Err(Error::DimensionMismatch(format!(
            "BB matrices have {} rows, tensor has {} Tx subarrays",
            bb.n_sa(),
            d.tx_sa
        )));
    }
    let rx_c = sorted_unique(rx_candidates, d.rx_beams, "Rx candidates")?;
    let tx_c = sorted_unique(tx_candidates, d.tx_beams, "Tx candidates")?;
    let k = count_combinations(rx_c.len(), d.rx_sa, tx_c.len(), d.tx_sa, bb.len()).unwrap_or(u128::MAX);
    if k > cap as u128 {
        return Err(Error::ResourceCap { combinations: k, cap });
    }

    let nl = bb.n_layers();
    let nn = nl * nl;
    let nrc = rx_c.len();
    // gram[(i * nrc + c) * nn ..] = r^H r for Rx subarray i on candidate c
    let mut gram = vec![C64::new(0.0, 0.0); d.rx_sa * nrc * nn];
    let mut row = vec![C64::new(0.0, 0.0); nl];
    let mut g = vec![C64::new(0.0, 0.0); nn];
    let mut work = vec![C64::new(0.0, 0.0); nn];
    let mut tx_digits = vec![0usize; d.tx_sa];
    let mut rx_digits = vec![0usize; d.rx_sa];

    let mut best: Option<(f64, usize, Vec<usize>, Vec<usize>)> = None;
    for (b, p) in bb.matrices().iter().enumerate() {
        tx_digits.iter_mut().for_each(|x| *x = 0);
        loop {
            for i in 0..d.rx_sa {
                for (c, &br) in rx_c.iter().enumerate() {
                    row.iter_mut().for_each(|x| *x = C64::new(0.0, 0.0));
                    for (j, &td) in tx_digits.iter().enumerate() {
                        let h = t.get(i, j, br, tx_c[td]);
                        for (l, x) in row.iter_mut().enumerate() {
                            *x += h * p[(j, l)];
                        }
                    }
                    let q = &mut gram[(i * nrc + c) * nn..(i * nrc + c + 1) * nn];
                    for a in 0..nl {
                        for e in 0..nl {
                            q[a * nl + e] = row[a].conj() * row[e];
                        }
                    }
                }
            }
            rx_digits.iter_mut().for_each(|x| *x = 0);
            loop {
                g.iter_mut().for_each(|x| *x = C64::new(0.0, 0.0));
                for (i, &rd) in rx_digits.iter().enumerate() {
                    let q = &gram[(i * nrc + rd) * nn..(i * nrc + rd + 1) * nn];
                    for (x, y) in g.iter_mut().zip(q) {
                        *x += y;
                    }
                }
                let mi = log2_det_shifted(&g, nl, sigma2, &mut work);
                if best.as_ref().is_none_or(|(m, ..)| mi > *m + TIE_TOLERANCE * m.abs()) {
                    best = Some((mi, b, tx_digits.clone(), rx_digits.clone()));
                }
                if !advance(&mut rx_digits, nrc) {
                    break;
                }
            }
            if !advance(&mut tx_digits, tx_c.len()) {
                break;
            }
        }
    }

    let (mi, b, txd, rxd) = best.ok_or(Error::EmptyInput("codebook"))?;
    Ok(SearchResult {
        selection: PrecoderSelection {
            bb_index: b,
            tx_assignment: RFAssignment(txd.iter().map(|&x| tx_c[x]).collect()),
            rx_assignment: RFAssignment(rxd.iter().map(|&x| rx_c[x]).collect()),
        },
        mutual_info: mi.max(0.0),
        combinations_evaluated: k as u64,
    })
}

/// Best selection over the full codebooks.
pub fn exhaustive_search(t: &MeasurementTensor, bb: &BBCodebook, sigma2: f64, cap: u64) -> Result<SearchResult> {
    let d = t.dims();
    let all_rx: Vec<usize> = (0..d.rx_beams).collect();
    let all_tx: Vec<usize> = (0..d.tx_beams).collect();
    restricted_search(t, bb, sigma2, &all_rx, &all_tx, cap)
}

/// `p` distinct beams out of `n`, uniformly, sorted ascending.
pub fn random_beams<R: Rng + ?Sized>(rng: &mut R, n: usize, p: usize) -> Result<Vec<usize>> {
    if p == 0 || p > n {
        return Err(Error::POutOfRange { p, len: n });
    }
    let mut v = rand::seq::index::sample(rng, n, p).into_vec();
    v.sort_unstable();
    Ok(v)
}

/// Restricted search over `p` random Rx beams and `p` random Tx beams.
pub fn random_subset_search<R: Rng + ?Sized>(
    t: &MeasurementTensor,
    bb: &BBCodebook,
    sigma2: f64,
    p: usize,
    rng: &mut R,
    cap: u64,
) -> Result<SearchResult> {
    let d = t.dims();
    let rx = random_beams(rng, d.rx_beams, p)?;
    let tx = random_beams(rng, d.tx_beams, p)?;
    restricted_search(t, bb, sigma2, &rx, &tx, cap)
}

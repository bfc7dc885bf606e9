//! Angle-of-arrival estimation from cross-subarray correlations.
//!
//! Three Rx subarrays listen on the same beam: a reference, one displaced
//! along y and one displaced along z. For a single ray the y and z
//! subarrays see the reference signal rotated by `k d_y sinθ sinφ` and
//! `k d_z cosθ`. With several rays of distinct Doppler, time-averaged
//! correlations keep only the per-ray terms, so the correlation phases give
//! a power-weighted direction estimate for each strong beam pair.

use alloc::format;
use alloc::vec;
use alloc::vec::Vec;

use rand::Rng;

use crate::channel::{rx_projection, tx_projection, ChannelRealization};
use crate::codebook::RFCodebook;
use crate::error::{Error, Result};
use crate::geometry::{AnglePair, SubarrayLayout};
use crate::math::{self, cis, C64, TWO_PI};
use crate::sounding::complex_gaussian;

/// Correlations with magnitude below this are treated as absent.
pub const MIN_CORRELATION: f64 = 1e-12;

/// Estimates closer than this (radians) to an accepted one are merged.
pub const MERGE_DISTANCE: f64 = core::f64::consts::PI / 180.0;

/// Two Dopplers closer than this (Hz) count as equal.
const DOPPLER_TOLERANCE: f64 = 1e-9;

/// Rx subarrays used for the correlations.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SubarrayTriple {
    pub ref_index: usize,
    pub y_index: usize,
    /// Absent for azimuth-only estimation.
    pub z_index: Option<usize>,
    /// Wavelengths.
    pub d_y: f64,
    pub d_z: Option<f64>,
}

impl SubarrayTriple {
    /// Validates the indices against `layout`: the y subarray must sit at
    /// `(d_y > 0, 0)` and the z subarray at `(0, d_z > 0)` relative to the
    /// reference.
    pub fn new(layout: &SubarrayLayout, ref_index: usize, y_index: usize, z_index: Option<usize>) -> Result<Self> {
        let offs = layout.offsets();
        let get = |s: usize| {
            offs.get(s).copied().ok_or(Error::IndexOutOfRange {
                what: "Rx subarray",
                index: s,
                len: offs.len(),
            })
        };
        let (ry, rz) = get(ref_index)?;
        let (yy, yz) = get(y_index)?;
        let d_y = yy - ry;
        if !(d_y > 0.0) || yz != rz {
            return Err(Error::LayoutMismatch(format!(
                "subarray {y_index} is not displaced along +y from subarray {ref_index}"
            )));
        }
        let d_z = match z_index {
            None => None,
            Some(zi) => {
                let (zy, zz) = get(zi)?;
                let d = zz - rz;
                if !(d > 0.0) || zy != ry {
                    return Err(Error::LayoutMismatch(format!(
                        "subarray {zi} is not displaced along +z from subarray {ref_index}"
                    )));
                }
                Some(d)
            }
        };
        Ok(Self {
            ref_index,
            y_index,
            z_index,
            d_y,
            d_z,
        })
    }

    /// Picks subarray 0 as reference and the nearest subarrays straight along
    /// +y and +z. The z subarray is optional.
    pub fn from_layout(layout: &SubarrayLayout) -> Result<Self> {
        let offs = layout.offsets();
        let (ry, rz) = offs[0];
        let nearest = |pred: &dyn Fn(f64, f64) -> Option<f64>| {
            offs.iter()
                .enumerate()
                .filter_map(|(s, &(y, z))| pred(y - ry, z - rz).map(|d| (s, d)))
                .min_by(|a, b| a.1.total_cmp(&b.1))
                .map(|(s, _)| s)
        };
        let y = nearest(&|dy, dz| (dy > 0.0 && dz == 0.0).then_some(dy))
            .ok_or_else(|| Error::LayoutMismatch("no Rx subarray displaced along +y".into()))?;
        let z = nearest(&|dy, dz| (dz > 0.0 && dy == 0.0).then_some(dz));
        Self::new(layout, 0, y, z)
    }

    fn check(&self, layout: &SubarrayLayout) -> Result<()> {
        let again = Self::new(layout, self.ref_index, self.y_index, self.z_index)?;
        if again != *self {
            return Err(Error::LayoutMismatch("triple displacements differ from the layout".into()));
        }
        Ok(())
    }
}

/// Per beam pair `(j, k)` (Tx beam `j`, Rx beam `k`) power and correlations,
/// stored at `j * rx_beams + k`.
#[derive(Debug, Clone, PartialEq)]
pub struct CorrelationStats {
    pub tx_beams: usize,
    pub rx_beams: usize,
    pub p_avg: Vec<f64>,
    pub c21: Vec<C64>,
    /// Present when the triple has a z subarray.
    pub c31: Option<Vec<C64>>,
    /// Number of averaged instances; `None` for expectation values.
    pub m: Option<usize>,
    /// Set when two rays share a Doppler rate, so the expectation keeps
    /// cross terms that these values leave out.
    pub degenerate_doppler: bool,
}

impl CorrelationStats {
    #[inline]
    pub fn pair_index(&self, j: usize, k: usize) -> usize {
        j * self.rx_beams + k
    }

    /// Averages stats from several triples with the same displacements.
    pub fn average(all: &[CorrelationStats]) -> Result<Self> {
        let first = all.first().ok_or(Error::EmptyInput("correlation stats"))?;
        let n = all.len() as f64;
        let mut out = first.clone();
        for s in &all[1..] {
            if (s.tx_beams, s.rx_beams) != (first.tx_beams, first.rx_beams) || s.c31.is_some() != first.c31.is_some() {
                return Err(Error::DimensionMismatch("stats have different shapes".into()));
            }
            out.p_avg.iter_mut().zip(&s.p_avg).for_each(|(a, b)| *a += b);
            out.c21.iter_mut().zip(&s.c21).for_each(|(a, b)| *a += b);
            if let (Some(a), Some(b)) = (out.c31.as_mut(), s.c31.as_ref()) {
                a.iter_mut().zip(b).for_each(|(a, b)| *a += b);
            }
            out.degenerate_doppler |= s.degenerate_doppler;
            out.m = match (out.m, s.m) {
                (Some(a), Some(b)) => Some(a + b),
                _ => None,
            };
        }
        out.p_avg.iter_mut().for_each(|a| *a /= n);
        out.c21.iter_mut().for_each(|a| *a /= n);
        if let Some(c) = out.c31.as_mut() {
            c.iter_mut().for_each(|a| *a /= n);
        }
        Ok(out)
    }
}

/// Per-ray factors at one beam pair: amplitude on the reference subarray at
/// `t = 0` and the rotations seen at the y and z subarrays.
struct RayTerms {
    amp: Vec<C64>,
    rot_y: Vec<C64>,
    rot_z: Vec<C64>,
}

fn ray_terms(
    ch: &ChannelRealization,
    triple: &SubarrayTriple,
    rx_beam: AnglePair,
    tx_beam: AnglePair,
) -> RayTerms {
    let l = &ch.rx_layout;
    let n = ch.rays.len();
    let mut terms = RayTerms {
        amp: Vec::with_capacity(n),
        rot_y: Vec::with_capacity(n),
        rot_z: Vec::with_capacity(n),
    };
    for ray in &ch.rays {
        let base = l.phase(triple.ref_index, ray.aoa);
        terms.amp.push(
            ray.gain()
                * rx_projection(l, triple.ref_index, ray.aoa, rx_beam)
                * tx_projection(&ch.tx_layout, 0, ray.aod, tx_beam),
        );
        terms.rot_y.push(cis(l.phase(triple.y_index, ray.aoa) - base));
        terms
            .rot_z
            .push(triple.z_index.map_or(C64::new(0.0, 0.0), |z| cis(l.phase(z, ray.aoa) - base)));
    }
    terms
}

fn has_degenerate_doppler(ch: &ChannelRealization) -> bool {
    let d: Vec<f64> = ch.rays.iter().map(|r| r.doppler).collect();
    d.iter()
        .enumerate()
        .any(|(a, x)| d[a + 1..].iter().any(|y| (x - y).abs() < DOPPLER_TOLERANCE))
}

/// Expected correlations with cross-ray terms dropped:
/// `p_avg = Σ|A_r|² + σ²`, `c21 = Σ|A_r|² e^{jk d_y sinθ sinφ}`,
/// `c31 = Σ|A_r|² e^{jk d_z cosθ}`. The Tx side uses Tx subarray 0.
pub fn analytic_stats(
    ch: &ChannelRealization,
    triple: &SubarrayTriple,
    rx_cb: &RFCodebook,
    tx_cb: &RFCodebook,
    sigma2: f64,
) -> Result<CorrelationStats> {
    triple.check(&ch.rx_layout)?;
    let (nt, nr) = (tx_cb.len(), rx_cb.len());
    let mut s = CorrelationStats {
        tx_beams: nt,
        rx_beams: nr,
        p_avg: vec![0.0; nt * nr],
        c21: vec![C64::new(0.0, 0.0); nt * nr],
        c31: triple.z_index.map(|_| vec![C64::new(0.0, 0.0); nt * nr]),
        m: None,
        degenerate_doppler: has_degenerate_doppler(ch),
    };
    for (j, &tb) in tx_cb.beams().iter().enumerate() {
        for (k, &rb) in rx_cb.beams().iter().enumerate() {
            let terms = ray_terms(ch, triple, rb, tb);
            let q = j * nr + k;
            let mut p = sigma2;
            for (r, a) in terms.amp.iter().enumerate() {
                let w = a.norm_sqr();
                p += w;
                s.c21[q] += terms.rot_y[r] * w;
                if let Some(c31) = s.c31.as_mut() {
                    c31[q] += terms.rot_z[r] * w;
                }
            }
            s.p_avg[q] = p;
        }
    }
    Ok(s)
}

/// Time averages over instances `times`, with independent `CN(0, sigma2)`
/// noise on every subarray sample.
///
/// Noise is drawn pair by pair (Tx beam outer), instance by instance, in the
/// order reference, y, z.
pub fn accumulate_stats<R: Rng + ?Sized>(
    ch: &ChannelRealization,
    triple: &SubarrayTriple,
    rx_cb: &RFCodebook,
    tx_cb: &RFCodebook,
    times: &[f64],
    sigma2: f64,
    rng: &mut R,
) -> Result<CorrelationStats> {
    triple.check(&ch.rx_layout)?;
    if times.is_empty() {
        return Err(Error::EmptyInput("time instances"));
    }
    if !(sigma2 >= 0.0) {
        return Err(Error::InvalidConfig(format!("noise variance {sigma2} < 0")));
    }
    let (nt, nr) = (tx_cb.len(), rx_cb.len());
    let m = times.len();
    let mut s = CorrelationStats {
        tx_beams: nt,
        rx_beams: nr,
        p_avg: vec![0.0; nt * nr],
        c21: vec![C64::new(0.0, 0.0); nt * nr],
        c31: triple.z_index.map(|_| vec![C64::new(0.0, 0.0); nt * nr]),
        m: Some(m),
        degenerate_doppler: has_degenerate_doppler(ch),
    };
    // Doppler rotation of every ray at every instance
    let rot: Vec<C64> = times
        .iter()
        .flat_map(|&t| ch.rays.iter().map(move |r| cis(r.doppler_phase(t))))
        .collect();
    let nrays = ch.rays.len();
    let noise = |rng: &mut R| {
        if sigma2 > 0.0 {
            complex_gaussian(rng, sigma2)
        } else {
            C64::new(0.0, 0.0)
        }
    };
    for (j, &tb) in tx_cb.beams().iter().enumerate() {
        for (k, &rb) in rx_cb.beams().iter().enumerate() {
            let terms = ray_terms(ch, triple, rb, tb);
            let (mut p, mut c21, mut c31) = (0.0, C64::new(0.0, 0.0), C64::new(0.0, 0.0));
            for l in 0..m {
                let (mut z1, mut z2, mut z3) = (C64::new(0.0, 0.0), C64::new(0.0, 0.0), C64::new(0.0, 0.0));
                for r in 0..nrays {
                    let a = terms.amp[r] * rot[l * nrays + r];
                    z1 += a;
                    z2 += a * terms.rot_y[r];
                    z3 += a * terms.rot_z[r];
                }
                z1 += noise(rng);
                z2 += noise(rng);
                if triple.z_index.is_some() {
                    z3 += noise(rng);
                }
                p += z1.norm_sqr();
                c21 += z2 * z1.conj();
                c31 += z3 * z1.conj();
            }
            let q = j * nr + k;
            let mf = m as f64;
            s.p_avg[q] = p / mf;
            s.c21[q] = c21 / mf;
            if let Some(v) = s.c31.as_mut() {
                v[q] = c31 / mf;
            }
        }
    }
    Ok(s)
}

/// `wrapped + 2πα` with integer `α` chosen to land within `π` of `expected`.
pub fn unwrap_phase(wrapped: f64, expected: f64) -> f64 {
    wrapped + TWO_PI * math::round((expected - wrapped) / TWO_PI)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AoAEstimate {
    /// Elevation in `[0, π]`.
    pub theta: f64,
    /// Azimuth in `[-π/2, π/2]`.
    pub phi: f64,
    /// `(Tx beam j, Rx beam k)` the estimate came from.
    pub source_pair: (usize, usize),
    pub power: f64,
}

impl AoAEstimate {
    pub fn direction(&self) -> AnglePair {
        AnglePair::new(self.phi, self.theta)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum DiscardReason {
    /// `|c31|` or `|c21|` below [`MIN_CORRELATION`].
    ZeroCorrelation,
    /// The elevation arccos argument left `[-1, 1]`.
    ElevationOutOfRange,
    /// The azimuth arcsin argument left `[-1, 1]`.
    AzimuthOutOfRange,
    /// Within [`MERGE_DISTANCE`] of a stronger estimate.
    Merged,
}

#[derive(Debug, Clone, PartialEq)]
pub struct AoaEstimation {
    /// Accepted estimates, strongest first.
    pub estimates: Vec<AoAEstimate>,
    /// Beam pairs among the top `p` that produced no estimate.
    pub discarded: Vec<((usize, usize), DiscardReason)>,
}

/// Estimates from the `p` beam pairs with the largest `p_avg`.
///
/// Phases are unwrapped against the Rx codebook direction of each pair.
/// Without a z subarray the elevation is taken from the codebook beam.
pub fn estimate_aoas(
    stats: &CorrelationStats,
    triple: &SubarrayTriple,
    rx_cb: &RFCodebook,
    p: usize,
) -> Result<AoaEstimation> {
    if p == 0 {
        return Err(Error::POutOfRange { p, len: stats.p_avg.len() });
    }
    if rx_cb.len() != stats.rx_beams {
        return Err(Error::DimensionMismatch(format!(
            "stats have {} Rx beams, codebook {}",
            stats.rx_beams,
            rx_cb.len()
        )));
    }
    if triple.z_index.is_some() != stats.c31.is_some() {
        return Err(Error::LayoutMismatch("triple and stats disagree on the z subarray".into()));
    }
    let mut order: Vec<usize> = (0..stats.p_avg.len()).collect();
    order.sort_by(|&a, &b| stats.p_avg[b].total_cmp(&stats.p_avg[a]));
    order.truncate(p);

    let mut out = AoaEstimation {
        estimates: Vec::new(),
        discarded: Vec::new(),
    };
    for q in order {
        let pair = (q / stats.rx_beams, q % stats.rx_beams);
        let beam = rx_cb.beams()[pair.1];
        match estimate_pair(stats, triple, q, beam) {
            Err(reason) => out.discarded.push((pair, reason)),
            Ok((theta, phi)) => {
                let dir = AnglePair::new(phi, theta);
                if out
                    .estimates
                    .iter()
                    .any(|e| e.direction().angular_distance(&dir) < MERGE_DISTANCE)
                {
                    out.discarded.push((pair, DiscardReason::Merged));
                } else {
                    out.estimates.push(AoAEstimate {
                        theta,
                        phi,
                        source_pair: pair,
                        power: stats.p_avg[q],
                    });
                }
            }
        }
    }
    if out.estimates.is_empty() {
        return Err(Error::AllEstimatesDiscarded);
    }
    Ok(out)
}

fn estimate_pair(
    stats: &CorrelationStats,
    triple: &SubarrayTriple,
    q: usize,
    beam: AnglePair,
) -> core::result::Result<(f64, f64), DiscardReason> {
    let theta = match (&stats.c31, triple.d_z) {
        (Some(c31), Some(d_z)) => {
            let c = c31[q];
            if math::abs(c) < MIN_CORRELATION {
                return Err(DiscardReason::ZeroCorrelation);
            }
            let kd = TWO_PI * d_z;
            let u = unwrap_phase(math::arg(c), kd * math::cos(beam.theta));
            let x = u / kd;
            if !(-1.0..=1.0).contains(&x) {
                return Err(DiscardReason::ElevationOutOfRange);
            }
            math::acos(x)
        }
        _ => beam.theta,
    };
    let c = stats.c21[q];
    if math::abs(c) < MIN_CORRELATION {
        return Err(DiscardReason::ZeroCorrelation);
    }
    let kd = TWO_PI * triple.d_y;
    let scale = kd * math::sin(theta);
    let u = unwrap_phase(math::arg(c), scale * math::sin(beam.phi));
    let x = u / scale;
    if !x.is_finite() || !(-1.0..=1.0).contains(&x) {
        return Err(DiscardReason::AzimuthOutOfRange);
    }
    Ok((theta, math::asin(x)))
}

/// Estimated directions as an Rx codebook for a follow-up restricted search.
pub fn steer_candidates(estimates: &[AoAEstimate]) -> Result<RFCodebook> {
    if estimates.is_empty() {
        return Err(Error::EmptyInput("AoA estimates"));
    }
    RFCodebook::new(estimates.iter().map(AoAEstimate::direction).collect())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::channel::{draw_realization, time_coefficient, AngleRange, ClusterConfig, Ray};
    use crate::codebook::{default_bb_codebook, uniform_codebook, Codebooks};
    use crate::geometry::PlanarArray;
    use crate::search::{exhaustive_search, restricted_search, DEFAULT_COMBINATION_CAP};
    use crate::sounding::{measure_ray_expansion, measure_ray_expansion_at};
    use core::f64::consts::{FRAC_PI_2, PI};
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn triple_layout(d: f64) -> SubarrayLayout {
        SubarrayLayout::new(PlanarArray::square(2, 0.5).unwrap(), vec![(0.0, 0.0), (d, 0.0), (0.0, d)]).unwrap()
    }

    fn tx_layout() -> SubarrayLayout {
        SubarrayLayout::contiguous_along_y(PlanarArray::ula(4, 0.5).unwrap(), 2).unwrap()
    }

    fn ray(g: f64, doppler: f64, aoa: AnglePair) -> Ray {
        Ray {
            gain_magnitude: g,
            initial_phase: 0.7,
            delay: 0.0,
            doppler,
            aoa,
            aod: AnglePair::new(0.1, FRAC_PI_2),
        }
    }

    fn rx_cb() -> RFCodebook {
        uniform_codebook(-FRAC_PI_2, FRAC_PI_2, 8, FRAC_PI_2).unwrap()
    }

    fn tx_cb() -> RFCodebook {
        uniform_codebook(-1.0, 1.0, 4, FRAC_PI_2).unwrap()
    }

    #[test]
    fn triple_from_layout() {
        let t = SubarrayTriple::from_layout(&triple_layout(0.5)).unwrap();
        assert_eq!((t.ref_index, t.y_index, t.z_index), (0, 1, Some(2)));
        assert_eq!((t.d_y, t.d_z), (0.5, Some(0.5)));
        let ula = SubarrayLayout::contiguous_along_y(PlanarArray::ula(4, 0.5).unwrap(), 2).unwrap();
        let t = SubarrayTriple::from_layout(&ula).unwrap();
        assert_eq!((t.y_index, t.z_index, t.d_y), (1, None, 2.0));
        assert!(SubarrayTriple::new(&triple_layout(0.5), 0, 2, None).is_err());
        assert!(SubarrayTriple::new(&triple_layout(0.5), 0, 1, Some(1)).is_err());
        assert!(SubarrayTriple::new(&triple_layout(0.5), 0, 7, None).is_err());
    }

    #[test]
    fn mismatched_triple_rejected() {
        let ch = ChannelRealization::new(vec![ray(1.0, 3.0, AnglePair::azimuth(0.2))], tx_layout(), triple_layout(0.5));
        let wrong = SubarrayTriple {
            ref_index: 0,
            y_index: 1,
            z_index: Some(2),
            d_y: 1.0,
            d_z: Some(0.5),
        };
        assert!(matches!(analytic_stats(&ch, &wrong, &rx_cb(), &tx_cb(), 0.0), Err(Error::LayoutMismatch(_))));
    }

    #[test]
    fn single_ray_phase_identity_over_time() {
        let aoa = AnglePair::new(0.5, 1.2);
        let rx = triple_layout(0.5);
        let ch = ChannelRealization::new(vec![ray(0.9, 31.0, aoa)], tx_layout(), rx);
        let (rb, tb) = (AnglePair::new(0.3, 1.4), AnglePair::new(0.2, FRAC_PI_2));
        for t in [0.0, 0.013, 0.4] {
            let z1 = time_coefficient(&ch, t, 0, 0, rb, tb);
            let z2 = time_coefficient(&ch, t, 1, 0, rb, tb);
            let z3 = time_coefficient(&ch, t, 2, 0, rb, tb);
            assert!(math::abs(z2 - cis(PI * aoa.theta.sin() * aoa.phi.sin()) * z1) < 1e-12);
            assert!(math::abs(z3 - cis(PI * aoa.theta.cos()) * z1) < 1e-12);
        }
    }

    #[test]
    fn single_ray_empirical_phase_exact() {
        let aoa = AnglePair::new(-0.4, 1.3);
        let ch = ChannelRealization::new(vec![ray(1.0, 17.0, aoa)], tx_layout(), triple_layout(0.5));
        let tr = SubarrayTriple::from_layout(&ch.rx_layout).unwrap();
        let s = accumulate_stats(&ch, &tr, &rx_cb(), &tx_cb(), &[0.0, 0.1, 0.25], 0.0, &mut ChaCha8Rng::seed_from_u64(0)).unwrap();
        let expect = PI * aoa.theta.sin() * aoa.phi.sin();
        for c in &s.c21 {
            assert!((math::arg(*c) - expect).abs() < 1e-12);
        }
    }

    #[test]
    fn analytic_single_ray() {
        let aoa = AnglePair::new(0.25, 1.0);
        let ch = ChannelRealization::new(vec![ray(0.8, 5.0, aoa)], tx_layout(), triple_layout(0.5));
        let tr = SubarrayTriple::from_layout(&ch.rx_layout).unwrap();
        let cb = RFCodebook::new(vec![aoa]).unwrap();
        let tcb = RFCodebook::new(vec![ch.rays[0].aod]).unwrap();
        let s = analytic_stats(&ch, &tr, &cb, &tcb, 0.0).unwrap();
        // matched beams: |A|^2 = |G|^2 * N_rx_sa * N_tx_sa
        let a2 = 0.64 * 4.0 * 4.0;
        assert!((s.p_avg[0] - a2).abs() < 1e-12);
        let c31 = s.c31.as_ref().unwrap()[0];
        assert!(math::abs(c31 - cis(PI * aoa.theta.cos()) * a2) < 1e-12);
        assert_eq!(s.m, None);
        assert!(!s.degenerate_doppler);
    }

    #[test]
    fn zero_gain_stats() {
        let mut r = ray(0.0, 5.0, AnglePair::azimuth(0.1));
        r.gain_magnitude = 0.0;
        let ch = ChannelRealization::new(vec![r], tx_layout(), triple_layout(0.5));
        let tr = SubarrayTriple::from_layout(&ch.rx_layout).unwrap();
        let s = analytic_stats(&ch, &tr, &rx_cb(), &tx_cb(), 0.3).unwrap();
        assert!(s.p_avg.iter().all(|p| *p == 0.3));
        assert!(s.c21.iter().all(|c| *c == C64::new(0.0, 0.0)));
        assert!(matches!(estimate_aoas(&s, &tr, &rx_cb(), 3), Err(Error::AllEstimatesDiscarded)));
    }

    #[test]
    fn degenerate_doppler_flagged() {
        let ch = ChannelRealization::new(
            vec![ray(1.0, 5.0, AnglePair::azimuth(0.1)), ray(0.5, 5.0, AnglePair::azimuth(-0.6))],
            tx_layout(),
            triple_layout(0.5),
        );
        let tr = SubarrayTriple::from_layout(&ch.rx_layout).unwrap();
        assert!(analytic_stats(&ch, &tr, &rx_cb(), &tx_cb(), 0.0).unwrap().degenerate_doppler);
    }

    #[test]
    fn noise_only_correlation_vanishes() {
        let mut r = ray(0.0, 5.0, AnglePair::azimuth(0.1));
        r.gain_magnitude = 0.0;
        let ch = ChannelRealization::new(vec![r], tx_layout(), triple_layout(0.5));
        let tr = SubarrayTriple::from_layout(&ch.rx_layout).unwrap();
        let cb = RFCodebook::new(vec![AnglePair::azimuth(0.0)]).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let mut last = f64::INFINITY;
        for m in [100usize, 10_000] {
            let times: Vec<f64> = (0..m).map(|l| l as f64 * 1e-3).collect();
            let s = accumulate_stats(&ch, &tr, &cb, &cb, &times, 1.0, &mut rng).unwrap();
            let mag = math::abs(s.c21[0]);
            assert!(mag < 4.0 / (m as f64).sqrt());
            assert!((s.p_avg[0] - 1.0).abs() < 5.0 / (m as f64).sqrt());
            last = last.min(mag);
        }
        assert!(last < 0.05);
    }

    #[test]
    fn unwrap_cases() {
        let expected = 4.0 * PI * 75f64.to_radians().cos();
        let u = unwrap_phase(0.0, expected);
        assert!((u - expected).abs() <= PI);
        assert!((u - TWO_PI).abs() < 1e-12);
        assert_eq!(unwrap_phase(1.0, 1.0), 1.0);
        assert!((unwrap_phase(-3.0, 3.2) - (TWO_PI - 3.0)).abs() < 1e-12);
    }

    fn exact_single_ray_estimate(d: f64, aoa: AnglePair, rx_cb: &RFCodebook) -> AoaEstimation {
        let ch = ChannelRealization::new(vec![ray(1.0, 5.0, aoa)], tx_layout(), triple_layout(d));
        let tr = SubarrayTriple::from_layout(&ch.rx_layout).unwrap();
        let s = analytic_stats(&ch, &tr, rx_cb, &tx_cb(), 0.0).unwrap();
        estimate_aoas(&s, &tr, rx_cb, 1).unwrap()
    }

    #[test]
    fn half_wavelength_estimate_is_exact() {
        let aoa = AnglePair::from_degrees(20.0, 60.0);
        let e = exact_single_ray_estimate(0.5, aoa, &rx_cb());
        assert!((e.estimates[0].theta - aoa.theta).abs() < 1e-12);
        assert!((e.estimates[0].phi - aoa.phi).abs() < 1e-12);
    }

    #[test]
    fn wide_spacing_unwraps_against_codebook() {
        // d_z = 2 wavelengths: phase 4π cos θ wraps, codebook elevation is close enough
        let aoa = AnglePair::from_degrees(20.0, 60.0);
        let cb = RFCodebook::new(vec![AnglePair::from_degrees(18.0, 62.0), AnglePair::from_degrees(-40.0, 90.0)]).unwrap();
        let e = exact_single_ray_estimate(2.0, aoa, &cb);
        let est = e.estimates[0];
        assert!((est.theta - aoa.theta).abs() < 1e-9, "{}", est.theta.to_degrees());
        assert!((est.phi - aoa.phi).abs() < 1e-9);
        // far reference picks the wrong alias
        let far = RFCodebook::new(vec![AnglePair::from_degrees(18.0, 80.0)]).unwrap();
        let e = exact_single_ray_estimate(2.0, aoa, &far);
        assert!((e.estimates[0].theta - aoa.theta).abs() > 1e-3);
    }

    #[test]
    fn near_endfire_azimuth_discarded() {
        let tr = SubarrayTriple::from_layout(&triple_layout(0.5)).unwrap();
        let cb = RFCodebook::new(vec![AnglePair::new(0.3, 0.01)]).unwrap();
        // elevation 0.001 rad leaves almost no room for any y phase
        let s = CorrelationStats {
            tx_beams: 1,
            rx_beams: 1,
            p_avg: vec![1.0],
            c21: vec![cis(0.5)],
            c31: Some(vec![cis(PI * 0.001f64.cos())]),
            m: None,
            degenerate_doppler: false,
        };
        assert!(matches!(estimate_aoas(&s, &tr, &cb, 1), Err(Error::AllEstimatesDiscarded)));
        let s = CorrelationStats {
            c31: Some(vec![cis(PI * 0.2f64.cos()) * 3.0]),
            ..s
        };
        assert!(estimate_aoas(&s, &tr, &cb, 1).is_ok());
    }

    #[test]
    fn duplicates_merge() {
        let aoa = AnglePair::from_degrees(10.0, 90.0);
        let ch = ChannelRealization::new(vec![ray(1.0, 5.0, aoa)], tx_layout(), triple_layout(0.5));
        let tr = SubarrayTriple::from_layout(&ch.rx_layout).unwrap();
        let s = analytic_stats(&ch, &tr, &rx_cb(), &tx_cb(), 0.0).unwrap();
        let e = estimate_aoas(&s, &tr, &rx_cb(), 3).unwrap();
        assert_eq!(e.estimates.len(), 1);
        assert_eq!(e.discarded.len(), 2);
        assert!(e.discarded.iter().all(|(_, r)| *r == DiscardReason::Merged));
    }

    #[test]
    fn azimuth_only_mode_uses_codebook_elevation() {
        let rx = SubarrayLayout::contiguous_along_y(PlanarArray::ula(4, 0.5).unwrap(), 2).unwrap();
        let aoa = AnglePair::azimuth(0.2);
        let ch = ChannelRealization::new(vec![ray(1.0, 5.0, aoa)], tx_layout(), rx);
        let tr = SubarrayTriple::from_layout(&ch.rx_layout).unwrap();
        let s = analytic_stats(&ch, &tr, &rx_cb(), &tx_cb(), 0.0).unwrap();
        assert!(s.c31.is_none());
        let e = estimate_aoas(&s, &tr, &rx_cb(), 1).unwrap();
        assert!((e.estimates[0].phi - 0.2).abs() < 1e-12);
        assert_eq!(e.estimates[0].theta, FRAC_PI_2);
    }

    #[test]
    fn steering_candidates() {
        assert!(matches!(steer_candidates(&[]), Err(Error::EmptyInput(_))));
        let est = AoAEstimate {
            theta: 1.0,
            phi: 0.1,
            source_pair: (0, 0),
            power: 1.0,
        };
        assert_eq!(steer_candidates(&[est]).unwrap().len(), 1);
    }

    #[test]
    fn precise_steering_beats_quantized_codebook() {
        let aoa = AnglePair::azimuth(0.33);
        let rx = SubarrayLayout::contiguous_along_y(PlanarArray::ula(4, 0.5).unwrap(), 2).unwrap();
        let mut r = ray(1.0, 5.0, aoa);
        r.aod = AnglePair::azimuth(-0.2);
        let ch = ChannelRealization::new(vec![r], tx_layout(), rx);
        let cbs = Codebooks::new(tx_cb(), rx_cb(), default_bb_codebook(2, 2).unwrap());
        let full = exhaustive_search(&measure_ray_expansion(&ch, &cbs), &cbs.bb, 0.1, DEFAULT_COMBINATION_CAP).unwrap();
        let est = AoAEstimate {
            theta: aoa.theta,
            phi: aoa.phi,
            source_pair: (0, 0),
            power: 1.0,
        };
        let steer = steer_candidates(&[est]).unwrap();
        let t = measure_ray_expansion_at(&ch, &steer, &cbs.tx_rf, 0.0);
        let all_tx: Vec<usize> = (0..cbs.tx_rf.len()).collect();
        let r = restricted_search(&t, &cbs.bb, 0.1, &[0], &all_tx, DEFAULT_COMBINATION_CAP).unwrap();
        assert!(r.mutual_info >= full.mutual_info);
        assert_eq!(r.combinations_evaluated, 16 * 3);
    }

    #[test]
    fn empirical_converges_to_analytic() {
        let cfg = ClusterConfig {
            rx_elevation: AngleRange::degrees(70.0, 110.0),
            ..ClusterConfig::default()
        };
        let rx = triple_layout(0.5);
        let ch = draw_realization(&cfg, &tx_layout(), &rx, &mut ChaCha8Rng::seed_from_u64(12)).unwrap();
        let tr = SubarrayTriple::from_layout(&rx).unwrap();
        let a = analytic_stats(&ch, &tr, &rx_cb(), &tx_cb(), 0.0).unwrap();
        let times: Vec<f64> = (0..4000).map(|l| l as f64 / 400.0).collect();
        let e = accumulate_stats(&ch, &tr, &rx_cb(), &tx_cb(), &times, 0.0, &mut ChaCha8Rng::seed_from_u64(0)).unwrap();
        let err: f64 = a.c21.iter().zip(&e.c21).map(|(x, y)| (x - y).norm_sqr()).sum::<f64>().sqrt();
        let norm: f64 = a.c21.iter().map(|x| x.norm_sqr()).sum::<f64>().sqrt();
        assert!(err / norm < 0.05, "{}", err / norm);
    }

    #[test]
    fn averaging_identical_stats_is_identity() {
        let ch = ChannelRealization::new(vec![ray(1.0, 5.0, AnglePair::azimuth(0.4))], tx_layout(), triple_layout(0.5));
        let tr = SubarrayTriple::from_layout(&ch.rx_layout).unwrap();
        let s = analytic_stats(&ch, &tr, &rx_cb(), &tx_cb(), 0.0).unwrap();
        let avg = CorrelationStats::average(&[s.clone(), s.clone()]).unwrap();
        for (a, b) in avg.c21.iter().zip(&s.c21) {
            assert!(math::abs(a - b) < 1e-12);
        }
        assert!(CorrelationStats::average(&[]).is_err());
    }

    mod props {
        use super::*;
        use proptest::prelude::*;

        proptest! {
            #[test]
            fn unwrap_lands_within_pi(w in -PI..PI, e in -20.0f64..20.0) {
                let u = unwrap_phase(w, e);
                prop_assert!((u - e).abs() <= PI + 1e-9);
                let k = (u - w) / TWO_PI;
                prop_assert!((k - k.round()).abs() < 1e-9);
            }

            #[test]
            fn estimates_stay_visible(seed in any::<u64>()) {
                let cfg = ClusterConfig {
                    rx_elevation: AngleRange::degrees(10.0, 170.0),
                    ..ClusterConfig::default()
                };
                let rx = triple_layout(0.5);
                let ch = draw_realization(&cfg, &tx_layout(), &rx, &mut ChaCha8Rng::seed_from_u64(seed)).unwrap();
                let tr = SubarrayTriple::from_layout(&rx).unwrap();
                let s = analytic_stats(&ch, &tr, &rx_cb(), &tx_cb(), 0.01).unwrap();
                if let Ok(e) = estimate_aoas(&s, &tr, &rx_cb(), 5) {
                    for x in &e.estimates {
                        prop_assert!((0.0..=PI).contains(&x.theta));
                        prop_assert!((-FRAC_PI_2..=FRAC_PI_2).contains(&x.phi));
                    }
                }
            }

            #[test]
            fn single_ray_exact_at_half_wavelength(phi in -1.4f64..1.4, theta in 0.2f64..2.9) {
                let aoa = AnglePair::new(phi, theta);
                let e = exact_single_ray_estimate(0.5, aoa, &rx_cb());
                prop_assert!((e.estimates[0].theta - theta).abs() < 1e-9);
                prop_assert!((e.estimates[0].phi - phi).abs() < 1e-7);
            }
        }
    }
}

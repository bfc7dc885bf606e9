//! Sparse ray-cluster channels.
//!
//! A [`ChannelRealization`] is a list of rays plus the Tx/Rx array layouts.
//! It renders to the full `N^R_Ant x N^T_Ant` matrix with
//! [`channel_matrix`], or directly to per-beam-pair coefficients through the
//! subarray projections [`rx_projection`] and [`tx_projection`].

use alloc::format;
use alloc::vec::Vec;
use core::f64::consts::PI;

use rand::Rng;
use rand_distr::{Distribution, Exp1};

use crate::error::{Error, Result};
use crate::geometry::{inner_product_closed_form, AnglePair, SubarrayLayout};
use crate::math::{self, cis, CMatrix, C64, TWO_PI};

/// One propagation path.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Ray {
    /// `|G_r|`, linear.
    pub gain_magnitude: f64,
    /// `γ_r`, radians. Already includes the narrowband delay phase.
    pub initial_phase: f64,
    /// Seconds relative to the first ray. Metadata only.
    pub delay: f64,
    /// Doppler frequency, Hz.
    pub doppler: f64,
    pub aoa: AnglePair,
    pub aod: AnglePair,
}

impl Ray {
    /// Complex gain `|G_r| e^{jγ_r}`.
    pub fn gain(&self) -> C64 {
        cis(self.initial_phase) * self.gain_magnitude
    }

    /// Doppler phase advance at time `t`.
    ///
    /// Geometry is wavelength-normalized, so the wavenumber is `2π` and the
    /// `k·f_D·t` advance is `2π·f_D·t`.
    pub fn doppler_phase(&self, t: f64) -> f64 {
        TWO_PI * self.doppler * t
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ChannelRealization {
    pub rays: Vec<Ray>,
    pub tx_layout: SubarrayLayout,
    pub rx_layout: SubarrayLayout,
}

impl ChannelRealization {
    pub fn new(rays: Vec<Ray>, tx_layout: SubarrayLayout, rx_layout: SubarrayLayout) -> Self {
        Self {
            rays,
            tx_layout,
            rx_layout,
        }
    }

    /// `Σ_r |G_r|²`.
    pub fn total_power(&self) -> f64 {
        self.rays.iter().map(|r| r.gain_magnitude * r.gain_magnitude).sum()
    }
}

/// Closed angular interval in radians. `min == max` pins the angle.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AngleRange {
    pub min: f64,
    pub max: f64,
}

impl AngleRange {
    pub const fn new(min: f64, max: f64) -> Self {
        Self { min, max }
    }

    pub fn degrees(min: f64, max: f64) -> Self {
        Self::new(min.to_radians(), max.to_radians())
    }

    pub const fn fixed(value: f64) -> Self {
        Self::new(value, value)
    }

    pub fn contains(&self, x: f64) -> bool {
        x >= self.min && x <= self.max
    }

    pub fn width(&self) -> f64 {
        self.max - self.min
    }

    fn is_valid(&self) -> bool {
        self.min.is_finite() && self.max.is_finite() && self.max >= self.min
    }
}

/// Knobs of the generic cluster-ray generator.
#[derive(Debug, Clone, PartialEq)]
pub struct ClusterConfig {
    pub n_clusters: usize,
    pub rays_per_cluster: usize,
    pub tx_azimuth: AngleRange,
    pub tx_elevation: AngleRange,
    pub rx_azimuth: AngleRange,
    pub rx_elevation: AngleRange,
    /// Laplacian scale of per-ray AoD offsets around the cluster center,
    /// degrees.
    pub aod_spread_deg: f64,
    /// Laplacian scale of per-ray AoA offsets, degrees.
    pub aoa_spread_deg: f64,
    /// Power drop from one cluster to the next, dB.
    pub cluster_decay_db: f64,
    pub max_doppler_hz: f64,
    /// Cluster delays are uniform on `[0, max_delay_s]`.
    pub max_delay_s: f64,
    /// Used only to fold `e^{-j2πfτ}` into the initial phase.
    pub carrier_hz: f64,
}

impl Default for ClusterConfig {
    fn default() -> Self {
        Self {
            n_clusters: 4,
            rays_per_cluster: 5,
            tx_azimuth: AngleRange::degrees(-60.0, 60.0),
            tx_elevation: AngleRange::fixed(PI / 2.0),
            rx_azimuth: AngleRange::degrees(-90.0, 90.0),
            rx_elevation: AngleRange::fixed(PI / 2.0),
            aod_spread_deg: 2.0,
            aoa_spread_deg: 5.0,
            cluster_decay_db: 3.0,
            max_doppler_hz: 100.0,
            max_delay_s: 1e-6,
            carrier_hz: 28e9,
        }
    }
}

impl ClusterConfig {
    pub fn validate(&self) -> Result<()> {
        if self.n_clusters == 0 || self.rays_per_cluster == 0 {
            return Err(Error::InvalidConfig(format!(
                "need at least one cluster and one ray, got {} x {}",
                self.n_clusters, self.rays_per_cluster
            )));
        }
        for (name, r) in [
            ("tx_azimuth", self.tx_azimuth),
            ("tx_elevation", self.tx_elevation),
            ("rx_azimuth", self.rx_azimuth),
            ("rx_elevation", self.rx_elevation),
        ] {
            if !r.is_valid() {
                return Err(Error::InvalidConfig(format!("{name} range is empty: {r:?}")));
            }
        }
        let nonneg = [
            ("aod_spread_deg", self.aod_spread_deg),
            ("aoa_spread_deg", self.aoa_spread_deg),
            ("cluster_decay_db", self.cluster_decay_db),
            ("max_doppler_hz", self.max_doppler_hz),
            ("max_delay_s", self.max_delay_s),
            ("carrier_hz", self.carrier_hz),
        ];
        for (name, v) in nonneg {
            if !(v >= 0.0 && v.is_finite()) {
                return Err(Error::InvalidConfig(format!("{name} must be >= 0, got {v}")));
            }
        }
        Ok(())
    }
}

fn uniform_in<R: Rng + ?Sized>(rng: &mut R, range: AngleRange) -> f64 {
    if range.width() == 0.0 {
        range.min
    } else {
        rng.random_range(range.min..=range.max)
    }
}

fn laplacian<R: Rng + ?Sized>(rng: &mut R, scale: f64) -> f64 {
    let u: f64 = rng.random::<f64>() - 0.5;
    // 1 - 2|u| lies in (0, 1]
    -scale * u.signum() * math::ln(1.0 - 2.0 * u.abs())
}

/// Laplacian offset around `center`, redrawn until inside `range` and
/// clamped after a bounded number of attempts.
fn ray_angle<R: Rng + ?Sized>(rng: &mut R, center: f64, scale: f64, range: AngleRange) -> f64 {
    if range.width() == 0.0 {
        return range.min;
    }
    if scale == 0.0 {
        return center;
    }
    for _ in 0..64 {
        let x = center + laplacian(rng, scale);
        if range.contains(x) {
            return x;
        }
    }
    center
}

/// Draws one realization.
///
/// Cluster centers are uniform in the configured ranges. Rays get Laplacian
/// angular offsets (truncated to the ranges), Rayleigh magnitudes around an
/// exponentially decaying cluster power share, uniform initial phases and
/// Dopplers `max_doppler·cos(u)`. Magnitudes are finally rescaled so the
/// realized `Σ|G_r|²` is exactly 1.
pub fn draw_realization<R: Rng + ?Sized>(
    cfg: &ClusterConfig,
    tx_layout: &SubarrayLayout,
    rx_layout: &SubarrayLayout,
    rng: &mut R,
) -> Result<ChannelRealization> {
    cfg.validate()?;
    let decay: Vec<f64> = (0..cfg.n_clusters)
        .map(|c| math::pow10(-(c as f64) * cfg.cluster_decay_db / 10.0))
        .collect();
    let decay_sum: f64 = decay.iter().sum();
    let aod_scale = cfg.aod_spread_deg.to_radians();
    let aoa_scale = cfg.aoa_spread_deg.to_radians();

    let mut rays = Vec::with_capacity(cfg.n_clusters * cfg.rays_per_cluster);
    for share in decay.iter().map(|p| p / decay_sum) {
        let aod_c = AnglePair::new(uniform_in(rng, cfg.tx_azimuth), uniform_in(rng, cfg.tx_elevation));
        let aoa_c = AnglePair::new(uniform_in(rng, cfg.rx_azimuth), uniform_in(rng, cfg.rx_elevation));
        let delay = if cfg.max_delay_s > 0.0 {
            rng.random_range(0.0..=cfg.max_delay_s)
        } else {
            0.0
        };
        let ray_share = share / cfg.rays_per_cluster as f64;
        for _ in 0..cfg.rays_per_cluster {
            let e: f64 = Exp1.sample(rng);
            let phase = rng.random_range(0.0..TWO_PI);
            let u = rng.random_range(0.0..TWO_PI);
            let aod = AnglePair::new(
                ray_angle(rng, aod_c.phi, aod_scale, cfg.tx_azimuth),
                ray_angle(rng, aod_c.theta, aod_scale, cfg.tx_elevation),
            );
            let aoa = AnglePair::new(
                ray_angle(rng, aoa_c.phi, aoa_scale, cfg.rx_azimuth),
                ray_angle(rng, aoa_c.theta, aoa_scale, cfg.rx_elevation),
            );
            let delay_phase = TWO_PI * cfg.carrier_hz * delay;
            rays.push(Ray {
                gain_magnitude: math::sqrt(ray_share * e),
                initial_phase: math::wrap_two_pi(phase - delay_phase),
                delay,
                doppler: cfg.max_doppler_hz * math::cos(u),
                aoa,
                aod,
            });
        }
    }

    let total: f64 = rays.iter().map(|r| r.gain_magnitude * r.gain_magnitude).sum();
    if total > 0.0 {
        let s = 1.0 / math::sqrt(total);
        rays.iter_mut().for_each(|r| r.gain_magnitude *= s);
    }
    Ok(ChannelRealization::new(rays, tx_layout.clone(), rx_layout.clone()))
}

/// `H = √(N^T_Ant N^R_Ant) Σ_r G_r a^R(aoa_r) a^T(aod_r)^H`.
pub fn channel_matrix(ch: &ChannelRealization) -> CMatrix {
    let nr = ch.rx_layout.total_antennas();
    let nt = ch.tx_layout.total_antennas();
    let scale = math::sqrt((nr * nt) as f64);
    let mut h = CMatrix::zeros(nr, nt);
    for ray in &ch.rays {
        let ar = ch.rx_layout.steering_vector(ray.aoa);
        let at = ch.tx_layout.steering_vector(ray.aod);
        let g = ray.gain() * scale;
        for (col, t) in at.iter().enumerate() {
            let w = g * t.conj();
            for (row, r) in ar.iter().enumerate() {
                h[(row, col)] += r * w;
            }
        }
    }
    h
}

/// Response of Rx subarray `i`, steered to `beam`, to a ray arriving from
/// `aoa`: `e^{jγ^R_i} · √N_SA · a_SA(beam)^H a_SA(aoa)`.
pub fn rx_projection(layout: &SubarrayLayout, i: usize, aoa: AnglePair, beam: AnglePair) -> C64 {
    cis(layout.phase(i, aoa)) * inner_product_closed_form(layout.subarray(), beam, aoa)
}

/// Contribution of Tx subarray `j`, steered to `beam`, toward a ray
/// departing at `aod`: `e^{-jγ^T_j} · √N_SA · a_SA(aod)^H a_SA(beam)`.
pub fn tx_projection(layout: &SubarrayLayout, j: usize, aod: AnglePair, beam: AnglePair) -> C64 {
    cis(-layout.phase(j, aod)) * inner_product_closed_form(layout.subarray(), aod, beam)
}

/// Noiseless coefficient `h_{i,j}(t)` between Rx subarray `rx_sa` steered to
/// `rx_beam` and Tx subarray `tx_sa` steered to `tx_beam`.
pub fn time_coefficient(
    ch: &ChannelRealization,
    t: f64,
    rx_sa: usize,
    tx_sa: usize,
    rx_beam: AnglePair,
    tx_beam: AnglePair,
) -> C64 {
    ch.rays.iter().fold(C64::new(0.0, 0.0), |acc, ray| {
        let rot = cis(ray.initial_phase + ray.doppler_phase(t)) * ray.gain_magnitude;
        acc + rot
            * rx_projection(&ch.rx_layout, rx_sa, ray.aoa, rx_beam)
            * tx_projection(&ch.tx_layout, tx_sa, ray.aod, tx_beam)
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::PlanarArray;
    use crate::math::cdot;
    use alloc::vec;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn layouts() -> (SubarrayLayout, SubarrayLayout) {
        let tx = SubarrayLayout::contiguous_along_y(PlanarArray::ula(8, 0.5).unwrap(), 2).unwrap();
        let rx = SubarrayLayout::new(
            PlanarArray::new(2, 2, 0.5).unwrap(),
            vec![(0.0, 0.0), (1.0, 0.0), (0.0, 1.0)],
        )
        .unwrap();
        (tx, rx)
    }

    fn planar_cfg() -> ClusterConfig {
        ClusterConfig {
            tx_elevation: AngleRange::degrees(60.0, 120.0),
            rx_elevation: AngleRange::degrees(45.0, 135.0),
            ..ClusterConfig::default()
        }
    }

    #[test]
    fn single_ray_unit_gain_at_center() {
        let (tx, rx) = layouts();
        let cfg = ClusterConfig {
            n_clusters: 1,
            rays_per_cluster: 1,
            aod_spread_deg: 0.0,
            aoa_spread_deg: 0.0,
            ..planar_cfg()
        };
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let ch = draw_realization(&cfg, &tx, &rx, &mut rng).unwrap();
        assert_eq!(ch.rays.len(), 1);
        assert!((ch.rays[0].gain_magnitude - 1.0).abs() < 1e-15);
        // re-derive the cluster center from the same stream
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let phi_t = uniform_in(&mut rng, cfg.tx_azimuth);
        let theta_t = uniform_in(&mut rng, cfg.tx_elevation);
        assert_eq!(ch.rays[0].aod, AnglePair::new(phi_t, theta_t));
    }

    #[test]
    fn twenty_rays_inside_ranges() {
        let (tx, rx) = layouts();
        let cfg = ClusterConfig {
            aod_spread_deg: 30.0,
            aoa_spread_deg: 30.0,
            ..planar_cfg()
        };
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        for _ in 0..50 {
            let ch = draw_realization(&cfg, &tx, &rx, &mut rng).unwrap();
            assert_eq!(ch.rays.len(), 20);
            assert!((ch.total_power() - 1.0).abs() < 1e-12);
            for r in &ch.rays {
                assert!(cfg.tx_azimuth.contains(r.aod.phi) && cfg.tx_elevation.contains(r.aod.theta));
                assert!(cfg.rx_azimuth.contains(r.aoa.phi) && cfg.rx_elevation.contains(r.aoa.theta));
                assert!(r.doppler.abs() <= cfg.max_doppler_hz);
                assert!(r.delay >= 0.0 && (0.0..TWO_PI).contains(&r.initial_phase));
            }
        }
    }

    #[test]
    fn same_seed_same_realization() {
        let (tx, rx) = layouts();
        let cfg = planar_cfg();
        let a = draw_realization(&cfg, &tx, &rx, &mut ChaCha8Rng::seed_from_u64(5)).unwrap();
        let b = draw_realization(&cfg, &tx, &rx, &mut ChaCha8Rng::seed_from_u64(5)).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn invalid_configs_rejected() {
        let (tx, rx) = layouts();
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        let bad = ClusterConfig {
            rx_azimuth: AngleRange::new(1.0, 0.5),
            ..ClusterConfig::default()
        };
        assert!(matches!(draw_realization(&bad, &tx, &rx, &mut rng), Err(Error::InvalidConfig(_))));
        let bad = ClusterConfig {
            n_clusters: 0,
            ..ClusterConfig::default()
        };
        assert!(draw_realization(&bad, &tx, &rx, &mut rng).is_err());
        let bad = ClusterConfig {
            aoa_spread_deg: -1.0,
            ..ClusterConfig::default()
        };
        assert!(draw_realization(&bad, &tx, &rx, &mut rng).is_err());
    }

    #[test]
    fn zero_gain_gives_zero_matrix() {
        let (tx, rx) = layouts();
        let ray = Ray {
            gain_magnitude: 0.0,
            initial_phase: 0.3,
            delay: 0.0,
            doppler: 0.0,
            aoa: AnglePair::new(0.1, 1.0),
            aod: AnglePair::new(0.2, 1.4),
        };
        let h = channel_matrix(&ChannelRealization::new(vec![ray], tx, rx));
        assert!(h.iter().all(|z| *z == C64::new(0.0, 0.0)));
    }

    #[test]
    fn scalar_channel_unit_gain() {
        let one = SubarrayLayout::new(PlanarArray::new(1, 1, 0.5).unwrap(), vec![(0.0, 0.0)]).unwrap();
        let ray = Ray {
            gain_magnitude: 1.0,
            initial_phase: 0.0,
            delay: 0.0,
            doppler: 0.0,
            aoa: AnglePair::new(0.4, 1.0),
            aod: AnglePair::new(-0.3, 2.0),
        };
        let h = channel_matrix(&ChannelRealization::new(vec![ray], one.clone(), one));
        assert_eq!(h.shape(), (1, 1));
        assert!(math::abs(h[(0, 0)] - C64::new(1.0, 0.0)) < 1e-15);
    }

    #[test]
    fn matrix_equals_elementwise_double_sum() {
        let (tx, rx) = layouts();
        let ch = draw_realization(&planar_cfg(), &tx, &rx, &mut ChaCha8Rng::seed_from_u64(9)).unwrap();
        let h = channel_matrix(&ch);
        let positions = |l: &SubarrayLayout| {
            let a = l.subarray();
            let mut p = Vec::new();
            for &(oy, oz) in l.offsets() {
                for iy in 0..a.n_y() {
                    for iz in 0..a.n_z() {
                        let d = a.spacing_wavelengths();
                        p.push((oy + iy as f64 * d, oz + iz as f64 * d));
                    }
                }
            }
            p
        };
        let (pr, pt) = (positions(&rx), positions(&tx));
        for (m, &(ry, rz)) in pr.iter().enumerate() {
            for (n, &(ty, tz)) in pt.iter().enumerate() {
                let mut acc = C64::new(0.0, 0.0);
                for ray in &ch.rays {
                    let pa = TWO_PI * (rz * ray.aoa.cos_z() + ry * ray.aoa.cos_y());
                    let pd = TWO_PI * (tz * ray.aod.cos_z() + ty * ray.aod.cos_y());
                    acc += ray.gain() * cis(pa - pd);
                }
                assert!(math::abs(h[(m, n)] - acc) < 1e-10);
            }
        }
    }

    #[test]
    fn rank_bounded_by_ray_count() {
        let (tx, rx) = layouts();
        let cfg = ClusterConfig {
            n_clusters: 1,
            rays_per_cluster: 3,
            aoa_spread_deg: 20.0,
            aod_spread_deg: 20.0,
            ..planar_cfg()
        };
        let ch = draw_realization(&cfg, &tx, &rx, &mut ChaCha8Rng::seed_from_u64(21)).unwrap();
        let sv = channel_matrix(&ch).singular_values();
        let smax = sv.max();
        let rank = sv.iter().filter(|s| **s > 1e-9 * smax).count();
        assert!(rank <= 3, "rank {rank}");
    }

    fn single_ray_channel(doppler: f64) -> ChannelRealization {
        let sa = PlanarArray::square(2, 0.5).unwrap();
        let l = SubarrayLayout::new(sa, vec![(0.0, 0.0), (1.5, 0.5)]).unwrap();
        let ray = Ray {
            gain_magnitude: 0.7,
            initial_phase: 1.1,
            delay: 0.0,
            doppler,
            aoa: AnglePair::new(0.3, 1.2),
            aod: AnglePair::new(-0.5, 1.7),
        };
        ChannelRealization::new(vec![ray], l.clone(), l)
    }

    #[test]
    fn doppler_phase_is_periodic() {
        let ch = single_ray_channel(37.0);
        let (rb, tb) = (AnglePair::new(0.2, 1.0), AnglePair::new(-0.4, 1.6));
        let t = 1.0 / 37.0;
        let z0 = time_coefficient(&ch, 0.0, 1, 1, rb, tb);
        let z1 = time_coefficient(&ch, t, 1, 1, rb, tb);
        assert!(math::abs(z0 - z1) < 1e-12);
    }

    #[test]
    fn matched_beams_give_full_gain() {
        let ch = single_ray_channel(5.0);
        let ray = ch.rays[0];
        let z = time_coefficient(&ch, 0.123, 1, 0, ray.aoa, ray.aod);
        assert!((math::abs(z) - 4.0 * 0.7).abs() < 1e-12);
    }

    #[test]
    fn projections_match_direct_block_products() {
        let ch = single_ray_channel(0.0);
        let l = &ch.rx_layout;
        let ray = ch.rays[0];
        let beam = AnglePair::new(0.9, 1.3);
        for i in 0..2 {
            // row i of F_R^H times the full steering vector, scaled by sqrt(N_Ant)
            let full = l.steering_vector(ray.aoa);
            let n_sa = l.antennas_per_subarray();
            let w = crate::geometry::steering_vector(l.subarray(), beam);
            let direct = cdot(&w, &full[i * n_sa..(i + 1) * n_sa]) * math::sqrt(l.total_antennas() as f64);
            assert!(math::abs(direct - rx_projection(l, i, ray.aoa, beam)) < 1e-12);

            let full = l.steering_vector(ray.aod);
            let direct = cdot(&full[i * n_sa..(i + 1) * n_sa], &w) * math::sqrt(l.total_antennas() as f64);
            assert!(math::abs(direct - tx_projection(l, i, ray.aod, beam)) < 1e-12);
        }
    }

    mod props {
        use super::*;
        use proptest::prelude::*;

        proptest! {
            #![proptest_config(ProptestConfig::with_cases(32))]
            #[test]
            fn magnitude_invariant_under_common_phase(seed in any::<u64>(), shift in 0.0f64..TWO_PI, t in 0.0f64..1.0) {
                let (tx, rx) = layouts();
                let ch = draw_realization(&planar_cfg(), &tx, &rx, &mut ChaCha8Rng::seed_from_u64(seed)).unwrap();
                let mut shifted = ch.clone();
                shifted.rays.iter_mut().for_each(|r| r.initial_phase += shift);
                let (rb, tb) = (AnglePair::new(0.1, 1.4), AnglePair::new(0.3, 1.5));
                let a = math::abs(time_coefficient(&ch, t, 2, 1, rb, tb));
                let b = math::abs(time_coefficient(&shifted, t, 2, 1, rb, tb));
                prop_assert!((a - b).abs() < 1e-12);
            }
        }
    }
}

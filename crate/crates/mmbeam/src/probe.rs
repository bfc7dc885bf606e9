//! Random draws for the exact-AoA dominance probe.
//!
//! Each draw has three rays with power gaps of at least 3 dB. Both codebooks
//! hold the exact path directions plus a grid of off-path beams. Directions
//! are handled in direction-cosine space `(u_y, u_z) = (sinθ sinφ, cosθ)`;
//! an off-path beam differs from every path by at least [`OFF_PATH_MARGIN`]
//! in both coordinates, which keeps its array gain below an N-independent
//! bound.

use std::f64::consts::PI;
use std::fmt::Write as _;

use mmbeam_core::beamsel::{lemma1_probe, Lemma1Config, Lemma1Report};
use mmbeam_core::channel::Ray;
use mmbeam_core::codebook::RFCodebook;
use mmbeam_core::geometry::AnglePair;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::Result;
use crate::harness::trial_seed;

pub const OFF_PATH_MARGIN: f64 = 0.35;
/// Minimum separation between paths on the same side, per coordinate.
pub const PATH_SEPARATION: f64 = 0.1;
pub const GRID_STEP: f64 = 0.1;
pub const RAYS: usize = 3;

pub const PROBE_HEADER: &str = "draw,n,ray,gain_db,aoa_beam,aoa_power,max_non_aoa_power,dominance_ratio,ordering_matches";

#[derive(Debug, Clone)]
pub struct ProbeInstance {
    pub rays: Vec<Ray>,
    pub rx_cb: RFCodebook,
    pub tx_cb: RFCodebook,
}

#[derive(Debug, Clone)]
pub struct ProbeDraw {
    pub draw: usize,
    pub instance: ProbeInstance,
    pub reports: Vec<Lemma1Report>,
}

fn cosines(d: AnglePair) -> (f64, f64) {
    (d.cos_y(), d.cos_z())
}

fn from_cosines(uy: f64, uz: f64) -> AnglePair {
    let theta = uz.clamp(-1.0, 1.0).acos();
    AnglePair::new((uy / theta.sin()).clamp(-1.0, 1.0).asin(), theta)
}

fn separated(a: AnglePair, b: AnglePair, m: f64) -> bool {
    let (ay, az) = cosines(a);
    let (by, bz) = cosines(b);
    (ay - by).abs() >= m && (az - bz).abs() >= m
}

/// Three directions with `|u_y| < 0.3` and `|u_z| < 0.2`, pairwise separated
/// in both direction cosines.
fn draw_paths<R: Rng + ?Sized>(rng: &mut R) -> Vec<AnglePair> {
    loop {
        let p: Vec<AnglePair> = (0..RAYS)
            .map(|_| from_cosines(rng.random_range(-0.3..0.3), rng.random_range(-0.2..0.2)))
            .collect();
        let ok = (0..RAYS).all(|a| (a + 1..RAYS).all(|b| separated(p[a], p[b], PATH_SEPARATION)));
        if ok {
            return p;
        }
    }
}

/// Path directions followed by the off-path grid.
pub fn probe_codebook(paths: &[AnglePair]) -> Result<RFCodebook> {
    let mut beams = paths.to_vec();
    let n = (0.9 / GRID_STEP).round() as i32;
    for iz in -n..=n {
        for iy in -n..=n {
            let (uy, uz) = (iy as f64 * GRID_STEP, iz as f64 * GRID_STEP);
            if uy * uy + uz * uz > 0.99 {
                continue;
            }
            let d = from_cosines(uy, uz);
            if paths.iter().all(|&p| separated(p, d, OFF_PATH_MARGIN)) {
                beams.push(d);
            }
        }
    }
    Ok(RFCodebook::new(beams)?)
}

pub fn draw_instance<R: Rng + ?Sized>(rng: &mut R) -> Result<ProbeInstance> {
    let aoas = draw_paths(rng);
    let aods = draw_paths(rng);
    let mut db = 0.0;
    let mut powers = Vec::with_capacity(RAYS);
    for r in 0..RAYS {
        if r > 0 {
            db -= 3.0 + rng.random_range(0.0..3.0);
        }
        powers.push(10f64.powf(db / 10.0));
    }
    let total: f64 = powers.iter().sum();
    let rays = (0..RAYS)
        .map(|r| Ray {
            gain_magnitude: (powers[r] / total).sqrt(),
            initial_phase: rng.random_range(0.0..2.0 * PI),
            delay: 0.0,
            doppler: 0.0,
            aoa: aoas[r],
            aod: aods[r],
        })
        .collect();
    Ok(ProbeInstance {
        rays,
        rx_cb: probe_codebook(&aoas)?,
        tx_cb: probe_codebook(&aods)?,
    })
}

pub fn run_probe(seed: u64, draws: usize, cfg: &Lemma1Config) -> Result<Vec<ProbeDraw>> {
    (0..draws)
        .map(|draw| {
            let mut rng = ChaCha8Rng::seed_from_u64(trial_seed(seed, draw));
            let instance = draw_instance(&mut rng)?;
            let reports = lemma1_probe(&instance.rays, &instance.rx_cb, &instance.tx_cb, cfg, &mut rng)?;
            Ok(ProbeDraw {
                draw,
                instance,
                reports,
            })
        })
        .collect()
}

pub fn format_probe(draws: &[ProbeDraw]) -> String {
    let mut s = format!("{PROBE_HEADER}\n");
    for d in draws {
        for rep in &d.reports {
            for (r, ray) in d.instance.rays.iter().enumerate() {
                let _ = writeln!(
                    s,
                    "{},{},{r},{},{},{},{},{},{}",
                    d.draw,
                    rep.n,
                    crate::io::fmt_sig(20.0 * ray.gain_magnitude.log10()),
                    rep.aoa_beams[r],
                    crate::io::fmt_sig(rep.aoa_powers[r]),
                    crate::io::fmt_sig(rep.max_non_aoa),
                    crate::io::fmt_sig(rep.dominance_ratio),
                    rep.ordering_matches
                );
            }
        }
    }
    s
}

/// Per consecutive size pair `(n_small, n_large)`: the smallest dominance
/// ratio growth over all draws, and the fraction of draws whose AoA power
/// ordering matched at each size.
#[derive(Debug, Clone)]
pub struct ProbeSummary {
    pub min_growth: Vec<((usize, usize), f64)>,
    pub ordering_rate: Vec<(usize, f64)>,
}

pub fn summarize_probe(draws: &[ProbeDraw]) -> ProbeSummary {
    let sizes: Vec<usize> = draws.first().map(|d| d.reports.iter().map(|r| r.n).collect()).unwrap_or_default();
    let min_growth = sizes
        .windows(2)
        .enumerate()
        .map(|(k, w)| {
            let g = draws
                .iter()
                .map(|d| d.reports[k + 1].dominance_ratio / d.reports[k].dominance_ratio)
                .fold(f64::INFINITY, f64::min);
            ((w[0], w[1]), g)
        })
        .collect();
    let ordering_rate = sizes
        .iter()
        .enumerate()
        .map(|(k, &n)| {
            let hits = draws.iter().filter(|d| d.reports[k].ordering_matches).count();
            (n, hits as f64 / draws.len().max(1) as f64)
        })
        .collect();
    ProbeSummary {
        min_growth,
        ordering_rate,
    }
}

//! Monte Carlo driver.
//!
//! Each trial derives its own seed from the master seed and trial index
//! ([`trial_seed`]), draws one channel, and runs every method at every SNR
//! point. Random streams are separated with ChaCha stream ids, so the result
//! does not depend on how trials are spread over threads.

use std::collections::BTreeMap;

use mmbeam_core::aoa::{accumulate_stats, analytic_stats, estimate_aoas, DiscardReason};
use mmbeam_core::beamsel::{top_p, EffectivePowerProfile};
use mmbeam_core::channel::{draw_realization, ChannelRealization};
use mmbeam_core::codebook::RFCodebook;
use mmbeam_core::geometry::AnglePair;
use mmbeam_core::search::{
    compressed_channel, mutual_information, random_beams, reduced_ratio, restricted_search, SearchResult,
};
use mmbeam_core::sounding::{add_noise, measure_ray_expansion, measure_ray_expansion_at, MeasurementTensor};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use crate::config::{AoaMode, EffpowerSides, ExperimentConfig, Method, Scenario, Scoring};
use crate::error::{HarnessError, Result};

const STREAM_CHANNEL: u64 = 0;
const STREAM_NOISE: u64 = 1000;
const STREAM_RANDOM: u64 = 2000;
const STREAM_AOA: u64 = 100_000;

#[derive(Debug, Clone, PartialEq)]
pub struct ResultRow {
    pub snr_db: f64,
    pub method: Method,
    /// Shortlist size; `None` for the full codebooks.
    pub p: Option<usize>,
    pub trial: usize,
    pub mutual_info: f64,
    pub combinations: u64,
    pub seed: u64,
}

/// splitmix64 output function.
fn mix(mut z: u64) -> u64 {
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

/// Seed of trial `trial`: the `trial + 1`-th splitmix64 output after
/// `master`.
pub fn trial_seed(master: u64, trial: usize) -> u64 {
    mix(master.wrapping_add((trial as u64).wrapping_add(1).wrapping_mul(0x9e37_79b9_7f4a_7c15)))
}

fn stream_rng(seed: u64, stream: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    rng
}

pub fn noise_variance(snr_db: f64) -> f64 {
    10f64.powf(-snr_db / 10.0)
}

/// Sorting key: method, p with `full` first, SNR, trial.
fn row_key(r: &ResultRow) -> (Method, Option<usize>, i64, usize) {
    (r.method, r.p, (r.snr_db * 1e6).round() as i64, r.trial)
}

pub fn sort_rows(rows: &mut [ResultRow]) {
    rows.sort_by_key(row_key);
}

pub fn run_experiment(cfg: &ExperimentConfig) -> Result<Vec<ResultRow>> {
    let sc = cfg.build()?;
    let per_trial = (0..cfg.trials)
        .into_par_iter()
        .map(|trial| run_trial(cfg, &sc, trial))
        .collect::<Result<Vec<_>>>()?;
    let mut rows: Vec<ResultRow> = per_trial.into_iter().flatten().collect();
    sort_rows(&mut rows);
    Ok(rows)
}

/// The channel realization of one trial.
pub fn trial_channel(cfg: &ExperimentConfig, sc: &Scenario, trial: usize) -> Result<ChannelRealization> {
    let mut rng = stream_rng(trial_seed(cfg.master_seed, trial), STREAM_CHANNEL);
    Ok(draw_realization(&sc.cluster, &sc.tx_layout, &sc.rx_layout, &mut rng)?)
}

pub fn run_trial(cfg: &ExperimentConfig, sc: &Scenario, trial: usize) -> Result<Vec<ResultRow>> {
    let seed = trial_seed(cfg.master_seed, trial);
    let ch = trial_channel(cfg, sc, trial)?;
    let clean = measure_ray_expansion(&ch, &sc.codebooks);
    let bb = &sc.codebooks.bb;
    let cap = cfg.combination_cap;
    let mut rows = Vec::new();

    for (s, &snr_db) in sc.snrs.iter().enumerate() {
        let sigma2 = noise_variance(snr_db);
        let noisy = add_noise(&clean, sigma2, &mut stream_rng(seed, STREAM_NOISE + s as u64))?;
        let prof = EffectivePowerProfile::from_tensor(&noisy);
        let d = noisy.dims();
        let all_rx: Vec<usize> = (0..d.rx_beams).collect();
        let all_tx: Vec<usize> = (0..d.tx_beams).collect();
        let score = |res: &SearchResult, clean: &MeasurementTensor| -> Result<f64> {
            Ok(match cfg.scoring {
                Scoring::Noisy => res.mutual_info,
                Scoring::Genie => mutual_information(&compressed_channel(clean, &res.selection, bb)?, sigma2),
            })
        };
        let tx_short = |p: usize| -> Result<Vec<usize>> {
            Ok(match cfg.effpower_sides {
                EffpowerSides::Both => top_p(&prof.tx_powers, p)?,
                EffpowerSides::Rx => all_tx.clone(),
            })
        };
        let mut push = |method, p, res: &SearchResult, mi| {
            rows.push(ResultRow {
                snr_db,
                method,
                p,
                trial,
                mutual_info: mi,
                combinations: res.combinations_evaluated,
                seed,
            })
        };

        for &method in &cfg.methods {
            if method == Method::Exhaustive {
                let res = restricted_search(&noisy, bb, sigma2, &all_rx, &all_tx, cap)?;
                push(method, None, &res, score(&res, &clean)?);
                continue;
            }
            for (pi, &p) in cfg.p_values.iter().enumerate() {
                match method {
                    Method::Effpower => {
                        let rx = top_p(&prof.rx_powers, p)?;
                        let res = restricted_search(&noisy, bb, sigma2, &rx, &tx_short(p)?, cap)?;
                        push(method, Some(p), &res, score(&res, &clean)?);
                    }
                    Method::Random => {
                        let mut rng = stream_rng(seed, STREAM_RANDOM + (s * 64 + pi) as u64);
                        let rx = random_beams(&mut rng, d.rx_beams, p)?;
                        let tx = random_beams(&mut rng, d.tx_beams, p)?;
                        let res = restricted_search(&noisy, bb, sigma2, &rx, &tx, cap)?;
                        push(method, Some(p), &res, score(&res, &clean)?);
                    }
                    Method::Aoa => {
                        let stream = STREAM_AOA + (s * 64 + pi) as u64;
                        let (res, aoa_clean) =
                            aoa_search(cfg, sc, &ch, sigma2, p, &tx_short(p)?, &mut stream_rng(seed, stream))?;
                        push(method, Some(p), &res, score(&res, &aoa_clean)?);
                    }
                    Method::Exhaustive => unreachable!(),
                }
            }
        }
    }
    Ok(rows)
}

/// Rx candidate directions from AoA estimation over the `p` strongest beam
/// pairs. Pairs whose estimate was discarded for any reason other than
/// merging fall back to their Rx codebook beam.
pub fn aoa_candidates(
    cfg: &ExperimentConfig,
    sc: &Scenario,
    ch: &ChannelRealization,
    sigma2: f64,
    p: usize,
    rng: &mut ChaCha8Rng,
) -> Result<RFCodebook> {
    let (rx_cb, tx_cb) = (&sc.codebooks.rx_rf, &sc.codebooks.tx_rf);
    let stats = match cfg.aoa.mode {
        AoaMode::Analytic => analytic_stats(ch, &sc.triple, rx_cb, tx_cb, sigma2)?,
        AoaMode::Empirical => accumulate_stats(ch, &sc.triple, rx_cb, tx_cb, &cfg.aoa_times(), sigma2, rng)?,
    };
    let mut dirs: Vec<AnglePair> = Vec::new();
    let mut add = |d: AnglePair| {
        if !dirs.iter().any(|x| x.angular_distance(&d) < 1e-9) {
            dirs.push(d);
        }
    };
    match estimate_aoas(&stats, &sc.triple, rx_cb, p) {
        Ok(est) => {
            est.estimates.iter().for_each(|e| add(e.direction()));
            for &((_, k), reason) in &est.discarded {
                if reason != DiscardReason::Merged {
                    add(rx_cb.beams()[k]);
                }
            }
        }
        Err(mmbeam_core::Error::AllEstimatesDiscarded) => {
            // same fallback for every pair
            let mut order: Vec<usize> = (0..stats.p_avg.len()).collect();
            order.sort_by(|&a, &b| stats.p_avg[b].total_cmp(&stats.p_avg[a]));
            for &q in order.iter().take(p) {
                add(rx_cb.beams()[q % stats.rx_beams]);
            }
        }
        Err(e) => return Err(e.into()),
    }
    Ok(RFCodebook::new(dirs)?)
}

/// Restricted search over AoA-steered Rx beams. Returns the result and the
/// noiseless tensor for the steered codebook.
fn aoa_search(
    cfg: &ExperimentConfig,
    sc: &Scenario,
    ch: &ChannelRealization,
    sigma2: f64,
    p: usize,
    tx: &[usize],
    rng: &mut ChaCha8Rng,
) -> Result<(SearchResult, MeasurementTensor)> {
    let rx_cb = aoa_candidates(cfg, sc, ch, sigma2, p, rng)?;
    let clean = measure_ray_expansion_at(ch, &rx_cb, &sc.codebooks.tx_rf, 0.0);
    let noisy = add_noise(&clean, sigma2, rng)?;
    let all_rx: Vec<usize> = (0..rx_cb.len()).collect();
    let res = restricted_search(&noisy, &sc.codebooks.bb, sigma2, &all_rx, tx, cfg.combination_cap)?;
    Ok((res, clean))
}

#[derive(Debug, Clone, PartialEq)]
pub struct SummaryRow {
    pub method: Method,
    pub p: Option<usize>,
    pub snr_db: f64,
    pub trials: usize,
    pub mean_mi: f64,
    pub mean_combinations: f64,
    /// SNR offset to the exhaustive curve at equal mean MI; positive means
    /// the method needs more SNR. `None` with a single SNR point or when the
    /// MI falls outside the exhaustive range.
    pub gap_db: Option<f64>,
    /// Mean MI minus exhaustive mean MI at the same SNR.
    pub mi_diff: f64,
    /// `K_P / K` as a reduced fraction, when both counts are the same on
    /// every row.
    pub complexity: Option<(u128, u128)>,
}

impl SummaryRow {
    pub fn reduction_factor(&self) -> Option<f64> {
        self.complexity.map(|(n, d)| d as f64 / n as f64)
    }
}

/// SNR at which the piecewise-linear curve `(snr, mi)` reaches `target`,
/// taking the first crossing.
pub fn interpolate_snr(curve: &[(f64, f64)], target: f64) -> Option<f64> {
    if curve.len() < 2 {
        return None;
    }
    curve.windows(2).find_map(|w| {
        let ((s0, m0), (s1, m1)) = (w[0], w[1]);
        let (lo, hi) = if m0 <= m1 { (m0, m1) } else { (m1, m0) };
        if !(lo..=hi).contains(&target) {
            return None;
        }
        if m1 == m0 {
            return Some(s0);
        }
        Some(s0 + (target - m0) / (m1 - m0) * (s1 - s0))
    })
}

pub fn summarize(rows: &[ResultRow]) -> Result<Vec<SummaryRow>> {
    struct Acc {
        n: usize,
        mi: f64,
        comb: f64,
        comb_values: (u64, u64),
    }
    let mut groups: BTreeMap<(Method, Option<usize>, i64), (f64, Acc)> = BTreeMap::new();
    for r in rows {
        let (_, a) = groups
            .entry((r.method, r.p, (r.snr_db * 1e6).round() as i64))
            .or_insert((r.snr_db, Acc {
                n: 0,
                mi: 0.0,
                comb: 0.0,
                comb_values: (r.combinations, r.combinations),
            }));
        a.n += 1;
        a.mi += r.mutual_info;
        a.comb += r.combinations as f64;
        a.comb_values = (a.comb_values.0.min(r.combinations), a.comb_values.1.max(r.combinations));
    }
    let exh: Vec<(i64, f64, f64, Option<u64>)> = groups
        .iter()
        .filter(|(k, _)| k.0 == Method::Exhaustive)
        .map(|(k, (snr, a))| {
            let constant = (a.comb_values.0 == a.comb_values.1).then_some(a.comb_values.0);
            (k.2, *snr, a.mi / a.n as f64, constant)
        })
        .collect();
    if exh.is_empty() {
        return Err(HarnessError::MissingBaseline);
    }
    let curve: Vec<(f64, f64)> = exh.iter().map(|e| (e.1, e.2)).collect();

    let mut out = Vec::new();
    for ((method, p, key), (snr_db, a)) in &groups {
        let mean_mi = a.mi / a.n as f64;
        let base = exh.iter().find(|e| e.0 == *key);
        let gap_db = interpolate_snr(&curve, mean_mi).map(|s| snr_db - s);
        let complexity = match (base.and_then(|b| b.3), a.comb_values.0 == a.comb_values.1) {
            (Some(k), true) if k > 0 => Some(reduced_ratio(a.comb_values.0 as u128, k as u128)),
            _ => None,
        };
        out.push(SummaryRow {
            method: *method,
            p: *p,
            snr_db: *snr_db,
            trials: a.n,
            mean_mi,
            mean_combinations: a.comb / a.n as f64,
            gap_db,
            mi_diff: base.map_or(f64::NAN, |b| mean_mi - b.2),
            complexity,
        });
    }
    Ok(out)
}

pub fn format_summary(rows: &[SummaryRow]) -> String {
    use std::fmt::Write;
    let mut s = String::from("method     p     snr_db  trials  mean_mi  mi_diff  gap_db  K_P/K\n");
    for r in rows {
        let p = r.p.map_or_else(|| "full".into(), |p| p.to_string());
        let gap = r.gap_db.map_or_else(|| "-".into(), |g| format!("{g:.2}"));
        let cx = match r.complexity {
            Some((n, d)) if n == d => "1".to_string(),
            Some((n, d)) => format!("{n}/{d} ({:.1}x reduction)", d as f64 / n as f64),
            None => "-".into(),
        };
        let _ = writeln!(
            s,
            "{:<10} {:<5} {:>6.1} {:>7} {:>8.4} {:>8.4} {:>7} {}",
            r.method.name(),
            p,
            r.snr_db,
            r.trials,
            r.mean_mi,
            r.mi_diff,
            gap,
            cx
        );
    }
    s
}

#[cfg(test)]
mod tests {
    use super::*;

    fn row(method: Method, p: Option<usize>, snr_db: f64, trial: usize, mi: f64, comb: u64) -> ResultRow {
        ResultRow {
            snr_db,
            method,
            p,
            trial,
            mutual_info: mi,
            combinations: comb,
            seed: 0,
        }
    }

    #[test]
    fn seeds_differ_per_trial() {
        let s: Vec<u64> = (0..100).map(|t| trial_seed(7, t)).collect();
        let mut u = s.clone();
        u.sort_unstable();
        u.dedup();
        assert_eq!(u.len(), 100);
        assert_ne!(trial_seed(7, 0), trial_seed(8, 0));
    }

    #[test]
    fn mix_matches_reference() {
        // first splitmix64 output for state 0
        assert_eq!(trial_seed(0, 0), 0xe220_a839_7b1d_cdaf);
    }

    #[test]
    fn noise_variance_db() {
        assert_eq!(noise_variance(0.0), 1.0);
        assert!((noise_variance(10.0) - 0.1).abs() < 1e-15);
        assert!((noise_variance(-10.0) - 10.0).abs() < 1e-12);
    }

    #[test]
    fn interpolation() {
        let c = [(0.0, 1.0), (10.0, 3.0), (20.0, 5.0)];
        assert_eq!(interpolate_snr(&c, 2.0), Some(5.0));
        assert_eq!(interpolate_snr(&c, 5.0), Some(20.0));
        assert_eq!(interpolate_snr(&c, 6.0), None);
        assert_eq!(interpolate_snr(&c[..1], 1.0), None);
    }

    #[test]
    fn identical_curve_has_zero_gap() {
        let mut rows = Vec::new();
        for (snr, mi) in [(0.0, 1.0), (5.0, 2.0), (10.0, 3.5)] {
            rows.push(row(Method::Exhaustive, None, snr, 0, mi, 27648));
            rows.push(row(Method::Effpower, Some(3), snr, 0, mi, 243));
        }
        let s = summarize(&rows).unwrap();
        for r in &s {
            assert!(r.gap_db.unwrap().abs() < 1e-12);
        }
        let e = s.iter().find(|r| r.method == Method::Effpower).unwrap();
        assert_eq!(e.complexity, Some((9, 1024)));
    }

    #[test]
    fn gap_is_horizontal_offset() {
        let mut rows = Vec::new();
        for (snr, mi) in [(0.0, 1.0), (10.0, 3.0)] {
            rows.push(row(Method::Exhaustive, None, snr, 0, mi, 10));
            rows.push(row(Method::Random, Some(1), snr, 0, mi - 0.4, 10));
        }
        let s = summarize(&rows).unwrap();
        let r = s.iter().find(|r| r.method == Method::Random && r.snr_db == 10.0).unwrap();
        // 2.6 is reached by exhaustive at 8 dB
        assert!((r.gap_db.unwrap() - 2.0).abs() < 1e-12);
    }

    #[test]
    fn single_snr_reports_difference_only() {
        let rows = vec![
            row(Method::Exhaustive, None, 10.0, 0, 4.0, 100),
            row(Method::Exhaustive, None, 10.0, 1, 6.0, 100),
            row(Method::Effpower, Some(1), 10.0, 0, 4.5, 3),
            row(Method::Effpower, Some(1), 10.0, 1, 4.5, 3),
        ];
        let s = summarize(&rows).unwrap();
        let r = &s[1];
        assert_eq!(r.gap_db, None);
        assert!((r.mi_diff + 0.5).abs() < 1e-12);
        assert_eq!(r.complexity, Some((3, 100)));
    }

    #[test]
    fn summary_needs_baseline() {
        let rows = vec![row(Method::Random, Some(1), 0.0, 0, 1.0, 1)];
        assert!(matches!(summarize(&rows), Err(HarnessError::MissingBaseline)));
    }

    #[test]
    fn row_order() {
        let mut rows = vec![
            row(Method::Random, Some(1), 0.0, 0, 0.0, 0),
            row(Method::Effpower, Some(2), 0.0, 1, 0.0, 0),
            row(Method::Effpower, None, 5.0, 0, 0.0, 0),
            row(Method::Effpower, Some(2), -5.0, 3, 0.0, 0),
            row(Method::Exhaustive, None, 5.0, 0, 0.0, 0),
        ];
        sort_rows(&mut rows);
        let k: Vec<_> = rows.iter().map(|r| (r.method, r.p, r.snr_db as i32)).collect();
        assert_eq!(
            k,
            vec![
                (Method::Exhaustive, None, 5),
                (Method::Effpower, None, 5),
                (Method::Effpower, Some(2), -5),
                (Method::Effpower, Some(2), 0),
                (Method::Random, Some(1), 0),
            ]
        );
    }
}

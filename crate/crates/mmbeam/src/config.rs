//! Experiment configuration, read from TOML.
//!
//! Every field has a default, so an empty file describes the reference
//! setup: 2 Tx subarrays of 8 antennas, 2 Rx subarrays of 4, 12 Tx beams over
//! 120°, 8 Rx beams over 180°, 4 clusters of 5 rays.

use std::fmt;
use std::path::{Path, PathBuf};

use clap::ValueEnum;
use mmbeam_core::aoa::SubarrayTriple;
use mmbeam_core::channel::{AngleRange, ClusterConfig};
use mmbeam_core::codebook::{default_bb_codebook, uniform_codebook, BBCodebook, Codebooks, RFCodebook};
use mmbeam_core::geometry::{PlanarArray, SubarrayLayout};
use mmbeam_core::search::DEFAULT_COMBINATION_CAP;
use serde::{Deserialize, Serialize};

use crate::error::{HarnessError, Result};
use crate::io;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize, ValueEnum)]
#[serde(rename_all = "lowercase")]
pub enum Method {
    Exhaustive,
    Effpower,
    Aoa,
    Random,
}

impl Method {
    pub const ALL: [Method; 4] = [Method::Exhaustive, Method::Effpower, Method::Aoa, Method::Random];

    pub fn name(self) -> &'static str {
        match self {
            Method::Exhaustive => "exhaustive",
            Method::Effpower => "effpower",
            Method::Aoa => "aoa",
            Method::Random => "random",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        Self::ALL.into_iter().find(|m| m.name() == s)
    }

    /// Whether the method takes a shortlist size.
    pub fn uses_p(self) -> bool {
        self != Method::Exhaustive
    }
}

impl fmt::Display for Method {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

/// How the reported mutual information is computed.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize, ValueEnum)]
#[serde(rename_all = "lowercase")]
pub enum Scoring {
    /// Selection on noisy measurements, score on noiseless ones.
    #[default]
    Genie,
    /// Score is the search's own value on noisy measurements.
    Noisy,
}

/// Sides on which the effective-power shortlist is applied.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum EffpowerSides {
    Rx,
    #[default]
    Both,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum AoaMode {
    /// Expected correlations, computed in closed form.
    #[default]
    Analytic,
    /// Time averages over simulated instances.
    Empirical,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SnrGrid {
    pub min_db: f64,
    pub max_db: f64,
    pub step_db: f64,
}

impl Default for SnrGrid {
    fn default() -> Self {
        Self {
            min_db: -10.0,
            max_db: 20.0,
            step_db: 5.0,
        }
    }
}

impl SnrGrid {
    pub fn single(db: f64) -> Self {
        Self {
            min_db: db,
            max_db: db,
            step_db: 1.0,
        }
    }

    pub fn values(&self) -> Vec<f64> {
        let n = ((self.max_db - self.min_db) / self.step_db + 1e-9).floor() as usize + 1;
        (0..n).map(|k| self.min_db + k as f64 * self.step_db).collect()
    }

    /// Parses `min:max:step`.
    pub fn parse(s: &str) -> Option<Self> {
        let v: Vec<f64> = s.split(':').map(|x| x.trim().parse().ok()).collect::<Option<_>>()?;
        match v[..] {
            [min_db, max_db, step_db] => Some(Self { min_db, max_db, step_db }),
            [db] => Some(Self::single(db)),
            _ => None,
        }
    }
}

/// Missing keys in a `[tx]` or `[rx]` section take that side's defaults.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ArrayConfig {
    /// Antennas per subarray along y and z.
    pub n_y: usize,
    pub n_z: usize,
    pub spacing: f64,
    pub subarrays: usize,
    /// Explicit subarray origins `[y, z]` in wavelengths. Without it the
    /// subarrays sit side by side along y.
    pub offsets: Option<Vec<[f64; 2]>>,
    pub beams: usize,
    pub sector_deg: [f64; 2],
    pub elevation_deg: f64,
    /// RF codebook file (`phi_deg, theta_deg` per line); overrides the
    /// uniform codebook.
    pub codebook_file: Option<PathBuf>,
}

impl ArrayConfig {
    pub fn tx_default() -> Self {
        Self {
            n_y: 8,
            n_z: 1,
            spacing: 0.5,
            subarrays: 2,
            offsets: None,
            beams: 12,
            sector_deg: [-60.0, 60.0],
            elevation_deg: 90.0,
            codebook_file: None,
        }
    }

    pub fn rx_default() -> Self {
        Self {
            n_y: 4,
            beams: 8,
            sector_deg: [-90.0, 90.0],
            ..Self::tx_default()
        }
    }

    pub fn layout(&self) -> Result<SubarrayLayout> {
        let sa = PlanarArray::new(self.n_y, self.n_z, self.spacing)?;
        let layout = match &self.offsets {
            None => SubarrayLayout::contiguous_along_y(sa, self.subarrays)?,
            Some(o) => {
                if o.len() != self.subarrays {
                    return Err(HarnessError::Config(format!(
                        "{} offsets for {} subarrays",
                        o.len(),
                        self.subarrays
                    )));
                }
                SubarrayLayout::new(sa, o.iter().map(|&[y, z]| (y, z)).collect())?
            }
        };
        Ok(layout)
    }

    pub fn codebook(&self, base: &Path) -> Result<RFCodebook> {
        match &self.codebook_file {
            Some(p) => io::read_rf_codebook(&base.join(p)),
            None => Ok(uniform_codebook(
                self.sector_deg[0].to_radians(),
                self.sector_deg[1].to_radians(),
                self.beams,
                self.elevation_deg.to_radians(),
            )?),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ChannelConfig {
    pub n_clusters: usize,
    pub rays_per_cluster: usize,
    pub tx_azimuth_deg: [f64; 2],
    pub tx_elevation_deg: [f64; 2],
    pub rx_azimuth_deg: [f64; 2],
    pub rx_elevation_deg: [f64; 2],
    pub aod_spread_deg: f64,
    pub aoa_spread_deg: f64,
    pub cluster_decay_db: f64,
    pub max_doppler_hz: f64,
    pub max_delay_s: f64,
    pub carrier_hz: f64,
}

impl Default for ChannelConfig {
    fn default() -> Self {
        let c = ClusterConfig::default();
        let round = |x: f64| (x * 1e9).round() / 1e9;
        let deg = |r: AngleRange| [round(r.min.to_degrees()), round(r.max.to_degrees())];
        Self {
            n_clusters: c.n_clusters,
            rays_per_cluster: c.rays_per_cluster,
            tx_azimuth_deg: deg(c.tx_azimuth),
            tx_elevation_deg: deg(c.tx_elevation),
            rx_azimuth_deg: deg(c.rx_azimuth),
            rx_elevation_deg: deg(c.rx_elevation),
            aod_spread_deg: c.aod_spread_deg,
            aoa_spread_deg: c.aoa_spread_deg,
            cluster_decay_db: c.cluster_decay_db,
            max_doppler_hz: c.max_doppler_hz,
            max_delay_s: c.max_delay_s,
            carrier_hz: c.carrier_hz,
        }
    }
}

impl ChannelConfig {
    pub fn cluster_config(&self) -> ClusterConfig {
        let r = |[a, b]: [f64; 2]| AngleRange::degrees(a, b);
        ClusterConfig {
            n_clusters: self.n_clusters,
            rays_per_cluster: self.rays_per_cluster,
            tx_azimuth: r(self.tx_azimuth_deg),
            tx_elevation: r(self.tx_elevation_deg),
            rx_azimuth: r(self.rx_azimuth_deg),
            rx_elevation: r(self.rx_elevation_deg),
            aod_spread_deg: self.aod_spread_deg,
            aoa_spread_deg: self.aoa_spread_deg,
            cluster_decay_db: self.cluster_decay_db,
            max_doppler_hz: self.max_doppler_hz,
            max_delay_s: self.max_delay_s,
            carrier_hz: self.carrier_hz,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct AoaConfig {
    pub mode: AoaMode,
    /// Instances averaged in empirical mode.
    pub instances: usize,
    /// Spacing of the instances (CSI-RS period).
    pub interval_s: f64,
}

impl Default for AoaConfig {
    fn default() -> Self {
        Self {
            mode: AoaMode::Analytic,
            instances: 10_000,
            interval_s: 0.02,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ExperimentConfig {
    pub master_seed: u64,
    pub trials: usize,
    pub methods: Vec<Method>,
    pub p_values: Vec<usize>,
    pub scoring: Scoring,
    pub effpower_sides: EffpowerSides,
    pub combination_cap: u64,
    pub snr: SnrGrid,
    pub tx: ArrayConfig,
    pub rx: ArrayConfig,
    pub channel: ChannelConfig,
    pub aoa: AoaConfig,
    /// Baseband codebook file; the built-in two-port set otherwise.
    pub bb_codebook_file: Option<PathBuf>,
    /// Directory that relative file paths resolve against.
    #[serde(skip)]
    pub base_dir: PathBuf,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        Self {
            master_seed: 1,
            trials: 100,
            methods: Method::ALL.to_vec(),
            p_values: vec![1, 2, 3],
            scoring: Scoring::Genie,
            effpower_sides: EffpowerSides::Both,
            combination_cap: DEFAULT_COMBINATION_CAP,
            snr: SnrGrid::default(),
            tx: ArrayConfig::tx_default(),
            rx: ArrayConfig::rx_default(),
            channel: ChannelConfig::default(),
            aoa: AoaConfig::default(),
            bb_codebook_file: None,
            base_dir: PathBuf::from("."),
        }
    }
}

/// Everything a trial needs, built once from the config.
#[derive(Debug, Clone)]
pub struct Scenario {
    pub tx_layout: SubarrayLayout,
    pub rx_layout: SubarrayLayout,
    pub codebooks: Codebooks,
    pub cluster: ClusterConfig,
    pub triple: SubarrayTriple,
    pub snrs: Vec<f64>,
}

impl ExperimentConfig {
    pub fn from_toml(text: &str) -> Result<Self> {
        let err = |e: &dyn fmt::Display| HarnessError::Config(e.to_string());
        let mut table: toml::Table = text.parse().map_err(|e| err(&e))?;
        for (key, base) in [("tx", ArrayConfig::tx_default()), ("rx", ArrayConfig::rx_default())] {
            if let Some(toml::Value::Table(t)) = table.get_mut(key) {
                let mut full = toml::Table::try_from(&base).map_err(|e| err(&e))?;
                full.extend(std::mem::take(t));
                *t = full;
            }
        }
        table.try_into().map_err(|e| err(&e))
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| HarnessError::io(path, e))?;
        let mut cfg = Self::from_toml(&text).map_err(|e| match e {
            HarnessError::Config(m) => HarnessError::Config(format!("{}: {m}", path.display())),
            other => other,
        })?;
        cfg.base_dir = path.parent().map(Path::to_path_buf).unwrap_or_default();
        Ok(cfg)
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("config serializes")
    }

    pub fn bb_codebook(&self) -> Result<BBCodebook> {
        match &self.bb_codebook_file {
            Some(p) => io::read_bb_codebook(&self.base_dir.join(p)),
            None => Ok(default_bb_codebook(self.tx.subarrays, 2)?),
        }
    }

    /// Checks the scalar fields and assembles arrays, codebooks and channel
    /// parameters.
    pub fn build(&self) -> Result<Scenario> {
        let bad = |m: String| Err(HarnessError::Config(m));
        if self.trials == 0 {
            return bad("trials must be at least 1".into());
        }
        if !(self.snr.step_db > 0.0) || !(self.snr.max_db >= self.snr.min_db) {
            return bad(format!("bad SNR grid {:?}", self.snr));
        }
        if self.methods.is_empty() {
            return bad("no methods selected".into());
        }
        if self.methods.iter().any(|m| m.uses_p()) && self.p_values.is_empty() {
            return bad("p_values is empty".into());
        }
        let tx_layout = self.tx.layout()?;
        let rx_layout = self.rx.layout()?;
        let codebooks = Codebooks::new(
            self.tx.codebook(&self.base_dir)?,
            self.rx.codebook(&self.base_dir)?,
            self.bb_codebook()?,
        );
        codebooks.check_tx(&tx_layout)?;
        let max_p = codebooks.tx_rf.len().min(codebooks.rx_rf.len());
        if let Some(&p) = self.p_values.iter().find(|&&p| p == 0 || p > max_p) {
            return bad(format!("p = {p} outside 1..={max_p}"));
        }
        let cluster = self.channel.cluster_config();
        cluster.validate()?;
        let triple = SubarrayTriple::from_layout(&rx_layout);
        let triple = match (self.methods.contains(&Method::Aoa), triple) {
            (_, Ok(t)) => t,
            (true, Err(e)) => return Err(e.into()),
            // unused without the aoa method
            (false, Err(_)) => SubarrayTriple {
                ref_index: 0,
                y_index: 0,
                z_index: None,
                d_y: 0.0,
                d_z: None,
            },
        };
        if self.aoa.mode == AoaMode::Empirical && (self.aoa.instances == 0 || !(self.aoa.interval_s > 0.0)) {
            return bad("aoa needs instances >= 1 and interval_s > 0".into());
        }
        Ok(Scenario {
            tx_layout,
            rx_layout,
            codebooks,
            cluster,
            triple,
            snrs: self.snr.values(),
        })
    }

    /// Instance times for empirical correlation averaging.
    pub fn aoa_times(&self) -> Vec<f64> {
        (0..self.aoa.instances).map(|l| l as f64 * self.aoa.interval_s).collect()
    }
}

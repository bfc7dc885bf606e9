//! Plain-text file formats.
//!
//! All readers skip blank lines and lines starting with `#`, and take the
//! first non-comment line as a header. Angles in files are degrees.

use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use mmbeam_core::aoa::AoAEstimate;
use mmbeam_core::channel::Ray;
use mmbeam_core::codebook::{BBCodebook, RFCodebook};
use mmbeam_core::geometry::AnglePair;
use mmbeam_core::{CMatrix, C64};

use crate::error::{HarnessError, Result};
use crate::harness::ResultRow;

pub const RESULTS_HEADER: &str = "snr_db,method,p,trial,mutual_info_bps_hz,combinations,seed";
pub const RF_HEADER: &str = "phi_deg,theta_deg";
pub const BB_HEADER: &str = "matrix,row,col,re,im";
pub const AOA_HEADER: &str = "m,j_m,k_m,power,theta_deg,phi_deg";
pub const RAYS_HEADER: &str = "gain_magnitude,initial_phase_rad,delay_s,doppler_hz,aoa_phi_deg,aoa_theta_deg,aod_phi_deg,aod_theta_deg";

/// Plain decimal with 12 significant digits.
pub fn fmt_sig(x: f64) -> String {
    if x == 0.0 || !x.is_finite() {
        return format!("{x}");
    }
    let mag = x.abs().log10().floor() as i32;
    let decimals = (11 - mag).max(0) as usize;
    let s = format!("{x:.decimals$}");
    if s.contains('.') {
        s.trim_end_matches('0').trim_end_matches('.').to_string()
    } else {
        s
    }
}

fn read(path: &Path) -> Result<String> {
    fs::read_to_string(path).map_err(|e| HarnessError::io(path, e))
}

pub fn write_file(path: &Path, text: &str) -> Result<()> {
    fs::write(path, text).map_err(|e| HarnessError::io(path, e))
}

/// Data lines of a CSV file as (1-based line number, fields), with the
/// header checked.
fn records<'a>(path: &Path, text: &'a str, header: &str) -> Result<Vec<(usize, Vec<&'a str>)>> {
    let mut lines = text
        .lines()
        .enumerate()
        .map(|(n, l)| (n + 1, l.trim()))
        .filter(|(_, l)| !l.is_empty() && !l.starts_with('#'));
    match lines.next() {
        Some((_, h)) if h.replace(' ', "") == header => {}
        Some((n, h)) => {
            return Err(HarnessError::Parse {
                path: path.into(),
                line: n,
                msg: format!("expected header `{header}`, found `{h}`"),
            })
        }
        None => {
            return Err(HarnessError::Parse {
                path: path.into(),
                line: 0,
                msg: "missing header".into(),
            })
        }
    }
    let width = header.split(',').count();
    lines
        .map(|(n, l)| {
            let f: Vec<&str> = l.split(',').map(str::trim).collect();
            if f.len() != width {
                return Err(HarnessError::Parse {
                    path: path.into(),
                    line: n,
                    msg: format!("expected {width} fields, found {}", f.len()),
                });
            }
            Ok((n, f))
        })
        .collect()
}

fn field<T: std::str::FromStr>(path: &Path, line: usize, s: &str) -> Result<T> {
    s.parse().map_err(|_| HarnessError::Parse {
        path: path.into(),
        line,
        msg: format!("cannot parse `{s}`"),
    })
}

pub fn format_rf_codebook(cb: &RFCodebook) -> String {
    let mut s = format!("{RF_HEADER}\n");
    for b in cb.beams() {
        let _ = writeln!(s, "{},{}", fmt_sig(b.phi.to_degrees()), fmt_sig(b.theta.to_degrees()));
    }
    s
}

pub fn read_rf_codebook(path: &Path) -> Result<RFCodebook> {
    let text = read(path)?;
    let beams = records(path, &text, RF_HEADER)?
        .into_iter()
        .map(|(n, f)| Ok(AnglePair::from_degrees(field(path, n, f[0])?, field(path, n, f[1])?)))
        .collect::<Result<Vec<_>>>()?;
    Ok(RFCodebook::new(beams)?)
}

pub fn format_bb_codebook(cb: &BBCodebook) -> String {
    let mut s = format!("{BB_HEADER}\n");
    for (m, mat) in cb.matrices().iter().enumerate() {
        for r in 0..mat.nrows() {
            for c in 0..mat.ncols() {
                let z = mat[(r, c)];
                let _ = writeln!(s, "{m},{r},{c},{},{}", fmt_sig(z.re), fmt_sig(z.im));
            }
        }
    }
    s
}

/// Reads a baseband codebook. Entries not listed are zero; the matrix size
/// is the largest row and column index seen across the file.
pub fn read_bb_codebook(path: &Path) -> Result<BBCodebook> {
    let text = read(path)?;
    let mut entries = Vec::new();
    for (n, f) in records(path, &text, BB_HEADER)? {
        let m: usize = field(path, n, f[0])?;
        let r: usize = field(path, n, f[1])?;
        let c: usize = field(path, n, f[2])?;
        let z = C64::new(field(path, n, f[3])?, field(path, n, f[4])?);
        entries.push((m, r, c, z));
    }
    if entries.is_empty() {
        return Err(HarnessError::Parse {
            path: path.into(),
            line: 0,
            msg: "no matrices".into(),
        });
    }
    let count = entries.iter().map(|e| e.0).max().unwrap_or(0) + 1;
    let rows = entries.iter().map(|e| e.1).max().unwrap_or(0) + 1;
    let cols = entries.iter().map(|e| e.2).max().unwrap_or(0) + 1;
    let mut mats = vec![CMatrix::zeros(rows, cols); count];
    for (m, r, c, z) in entries {
        mats[m][(r, c)] = z;
    }
    Ok(BBCodebook::new(mats)?)
}

pub fn format_rays(rays: &[Ray]) -> String {
    let mut s = format!("{RAYS_HEADER}\n");
    for r in rays {
        let v = [
            r.gain_magnitude,
            r.initial_phase,
            r.delay,
            r.doppler,
            r.aoa.phi.to_degrees(),
            r.aoa.theta.to_degrees(),
            r.aod.phi.to_degrees(),
            r.aod.theta.to_degrees(),
        ];
        let line: Vec<String> = v.iter().map(|&x| fmt_sig(x)).collect();
        s.push_str(&line.join(","));
        s.push('\n');
    }
    s
}

pub fn read_rays(path: &Path) -> Result<Vec<Ray>> {
    let text = read(path)?;
    records(path, &text, RAYS_HEADER)?
        .into_iter()
        .map(|(n, f)| {
            let v = f
                .iter()
                .map(|s| field::<f64>(path, n, s))
                .collect::<Result<Vec<_>>>()?;
            Ok(Ray {
                gain_magnitude: v[0],
                initial_phase: v[1],
                delay: v[2],
                doppler: v[3],
                aoa: AnglePair::from_degrees(v[4], v[5]),
                aod: AnglePair::from_degrees(v[6], v[7]),
            })
        })
        .collect()
}

/// One line per accepted estimate, strongest first; `j_m`/`k_m` are the Tx and
/// Rx beams of the source pair.
pub fn format_aoa_estimates(est: &[AoAEstimate]) -> String {
    let mut s = format!("{AOA_HEADER}\n");
    for (m, e) in est.iter().enumerate() {
        let _ = writeln!(
            s,
            "{m},{},{},{},{},{}",
            e.source_pair.0,
            e.source_pair.1,
            fmt_sig(e.power),
            fmt_sig(e.theta.to_degrees()),
            fmt_sig(e.phi.to_degrees())
        );
    }
    s
}

pub fn format_results(rows: &[ResultRow]) -> String {
    let mut s = format!("{RESULTS_HEADER}\n");
    for r in rows {
        let p = r.p.map_or_else(|| "full".to_string(), |p| p.to_string());
        let _ = writeln!(
            s,
            "{},{},{p},{},{},{},{}",
            fmt_sig(r.snr_db),
            r.method,
            r.trial,
            fmt_sig(r.mutual_info),
            r.combinations,
            r.seed
        );
    }
    s
}

pub fn write_csv(rows: &[ResultRow], path: &Path) -> Result<()> {
    write_file(path, &format_results(rows))
}

pub fn read_results(path: &Path) -> Result<Vec<ResultRow>> {
    let text = read(path)?;
    records(path, &text, RESULTS_HEADER)?
        .into_iter()
        .map(|(n, f)| {
            let method = crate::config::Method::parse(f[1]).ok_or_else(|| HarnessError::Parse {
                path: path.into(),
                line: n,
                msg: format!("unknown method `{}`", f[1]),
            })?;
            Ok(ResultRow {
                snr_db: field(path, n, f[0])?,
                method,
                p: if f[2] == "full" { None } else { Some(field(path, n, f[2])?) },
                trial: field(path, n, f[3])?,
                mutual_info: field(path, n, f[4])?,
                combinations: field(path, n, f[5])?,
                seed: field(path, n, f[6])?,
            })
        })
        .collect()
}

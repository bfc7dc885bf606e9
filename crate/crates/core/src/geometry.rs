//! Uniform planar arrays in the yz plane, their steering vectors, and the
//! closed-form inner products between them.
//!
//! Element `(iy, iz)` (zero-based) of an `n_y x n_z` array sits at
//! `(iy·d, iz·d)` and is stored at flat index `iy·n_z + iz`: the z index runs
//! fastest. Element `(0, 0)` is the phase reference.

use alloc::format;
use alloc::vec::Vec;

use crate::error::{Error, Result};
use crate::math::{self, cis, C64, TWO_PI};

/// Magnitude of `1 - e^{jx}` below which a geometric sum is replaced by its
/// limit value.
pub const DEGENERATE_TOLERANCE: f64 = 1e-12;

/// Direction as azimuth `phi` and elevation `theta` (from the z axis), both
/// in radians.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AnglePair {
    pub phi: f64,
    pub theta: f64,
}

impl AnglePair {
    pub const fn new(phi: f64, theta: f64) -> Self {
        Self { phi, theta }
    }

    pub fn from_degrees(phi_deg: f64, theta_deg: f64) -> Self {
        Self::new(phi_deg.to_radians(), theta_deg.to_radians())
    }

    /// Azimuth-plane direction (`theta = π/2`).
    pub fn azimuth(phi: f64) -> Self {
        Self::new(phi, core::f64::consts::FRAC_PI_2)
    }

    pub fn is_valid(&self) -> bool {
        use core::f64::consts::PI;
        (0.0..=PI).contains(&self.theta) && (-PI..=PI).contains(&self.phi)
    }

    /// `cos θ`, the direction cosine along z.
    #[inline]
    pub fn cos_z(&self) -> f64 {
        math::cos(self.theta)
    }

    /// `sin θ sin φ`, the direction cosine along y.
    #[inline]
    pub fn cos_y(&self) -> f64 {
        math::sin(self.theta) * math::sin(self.phi)
    }

    /// Cartesian unit vector `(x, y, z)`.
    pub fn unit_vector(&self) -> [f64; 3] {
        let st = math::sin(self.theta);
        [st * math::cos(self.phi), st * math::sin(self.phi), math::cos(self.theta)]
    }

    /// Great-circle angle to `other`, radians.
    pub fn angular_distance(&self, other: &AnglePair) -> f64 {
        let a = self.unit_vector();
        let b = other.unit_vector();
        let dot = a[0] * b[0] + a[1] * b[1] + a[2] * b[2];
        math::acos(dot.clamp(-1.0, 1.0))
    }
}

/// Uniform planar array with `n_y x n_z` elements at spacing
/// `spacing_wavelengths` along both axes. A ULA is `n_z = 1`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PlanarArray {
    n_y: usize,
    n_z: usize,
    spacing_wavelengths: f64,
}

impl PlanarArray {
    pub fn new(n_y: usize, n_z: usize, spacing_wavelengths: f64) -> Result<Self> {
        if n_y == 0 || n_z == 0 {
            return Err(Error::InvalidGeometry(format!(
                "element counts must be >= 1, got {n_y} x {n_z}"
            )));
        }
        if !(spacing_wavelengths > 0.0 && spacing_wavelengths.is_finite()) {
            return Err(Error::InvalidGeometry(format!(
                "spacing must be positive, got {spacing_wavelengths}"
            )));
        }
        Ok(Self {
            n_y,
            n_z,
            spacing_wavelengths,
        })
    }

    /// Uniform linear array along y.
    pub fn ula(n: usize, spacing_wavelengths: f64) -> Result<Self> {
        Self::new(n, 1, spacing_wavelengths)
    }

    /// Square `side x side` array.
    pub fn square(side: usize, spacing_wavelengths: f64) -> Result<Self> {
        Self::new(side, side, spacing_wavelengths)
    }

    pub fn n_y(&self) -> usize {
        self.n_y
    }

    pub fn n_z(&self) -> usize {
        self.n_z
    }

    pub fn spacing_wavelengths(&self) -> f64 {
        self.spacing_wavelengths
    }

    /// Total element count `N = n_y·n_z`.
    pub fn len(&self) -> usize {
        self.n_y * self.n_z
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    /// Wavenumber-spacing product `k·d = 2π·d/λ`.
    pub fn kd(&self) -> f64 {
        TWO_PI * self.spacing_wavelengths
    }

    #[inline]
    pub fn element_index(&self, iy: usize, iz: usize) -> usize {
        iy * self.n_z + iz
    }
}

/// Unit-norm array response toward `dir`.
pub fn steering_vector(array: &PlanarArray, dir: AnglePair) -> Vec<C64> {
    let mut out = Vec::with_capacity(array.len());
    let kd = array.kd();
    let (uz, uy) = (dir.cos_z(), dir.cos_y());
    let scale = 1.0 / math::sqrt(array.len() as f64);
    for iy in 0..array.n_y {
        for iz in 0..array.n_z {
            let phase = kd * (iz as f64 * uz + iy as f64 * uy);
            out.push(cis(phase) * scale);
        }
    }
    out
}

/// `Σ_{m=0}^{n-1} e^{jmx} = (1 - e^{jnx}) / (1 - e^{jx})`, with the limit
/// value `n` when `|1 - e^{jx}| < DEGENERATE_TOLERANCE`.
pub fn geometric_phasor_sum(x: f64, n: usize) -> C64 {
    let half_sin = math::sin(0.5 * x);
    // |1 - e^{jx}| = 2|sin(x/2)|
    if 2.0 * half_sin.abs() < DEGENERATE_TOLERANCE {
        return C64::new(n as f64, 0.0);
    }
    let nf = n as f64;
    cis(0.5 * (nf - 1.0) * x) * (math::sin(0.5 * nf * x) / half_sin)
}

/// `g1(θ1, θ2)` for an array with `n_z` elements along z.
pub fn g1(theta1: f64, theta2: f64, kd: f64, n_z: usize) -> C64 {
    geometric_phasor_sum(kd * (math::cos(theta1) - math::cos(theta2)), n_z)
}

/// `g2(φ1, θ1, φ2, θ2)` for an array with `n_y` elements along y.
pub fn g2(dir1: AnglePair, dir2: AnglePair, kd: f64, n_y: usize) -> C64 {
    geometric_phasor_sum(kd * (dir1.cos_y() - dir2.cos_y()), n_y)
}

/// `√N · a(dir1)^H a(dir2)` evaluated case by case from `g1` and `g2`.
///
/// The conjugate sits on `dir1`, so the phase differences entering `g1` and
/// `g2` are `dir2 - dir1`.
pub fn inner_product_closed_form(array: &PlanarArray, dir1: AnglePair, dir2: AnglePair) -> C64 {
    let n = array.len() as f64;
    let kd = array.kd();
    if dir1 == dir2 {
        return C64::new(math::sqrt(n), 0.0);
    }
    let gy = g2(dir2, dir1, kd, array.n_y);
    if dir1.theta == dir2.theta {
        return gy * math::sqrt(array.n_z as f64 / array.n_y as f64);
    }
    let gz = g1(dir2.theta, dir1.theta, kd, array.n_z);
    gz * gy / math::sqrt(n)
}

fn bound_from_phase(x: f64, which: &'static str) -> Result<f64> {
    let denom = math::abs(C64::new(1.0, 0.0) - cis(x));
    if denom < DEGENERATE_TOLERANCE {
        return Err(Error::UndefinedBound(which));
    }
    Ok(2.0 / denom)
}

/// N-independent bound `2 / |1 - e^{jkd(cos θ1 - cos θ2)}|` on `|g1|`.
pub fn bound_g1(theta1: f64, theta2: f64, kd: f64) -> Result<f64> {
    if theta1 == theta2 {
        return Err(Error::UndefinedBound("g1"));
    }
    bound_from_phase(kd * (math::cos(theta1) - math::cos(theta2)), "g1")
}

/// N-independent bound `2 / |1 - e^{jkd(sin θ1 sin φ1 - sin θ2 sin φ2)}|` on
/// `|g2|`.
pub fn bound_g2(dir1: AnglePair, dir2: AnglePair, kd: f64) -> Result<f64> {
    if dir1 == dir2 {
        return Err(Error::UndefinedBound("g2"));
    }
    bound_from_phase(kd * (dir1.cos_y() - dir2.cos_y()), "g2")
}

/// Both bounds at once; each side fails independently.
pub fn g_bounds(dir1: AnglePair, dir2: AnglePair, kd: f64) -> (Result<f64>, Result<f64>) {
    (bound_g1(dir1.theta, dir2.theta, kd), bound_g2(dir1, dir2, kd))
}

/// Phase `γ = 2π(d_z cos θ + d_y sin θ sin φ)` of a subarray displaced by
/// `offset = (d_y, d_z)` wavelengths.
pub fn subarray_phase(offset: (f64, f64), dir: AnglePair) -> f64 {
    TWO_PI * (offset.1 * dir.cos_z() + offset.0 * dir.cos_y())
}

/// Identical subarrays placed at `offsets` (wavelengths, relative to the
/// first subarray's reference element).
#[derive(Debug, Clone, PartialEq)]
pub struct SubarrayLayout {
    subarray: PlanarArray,
    offsets: Vec<(f64, f64)>,
}

impl SubarrayLayout {
    pub fn new(subarray: PlanarArray, offsets: Vec<(f64, f64)>) -> Result<Self> {
        match offsets.first() {
            None => return Err(Error::InvalidGeometry("layout needs at least one subarray".into())),
            Some(&o) if o != (0.0, 0.0) => {
                return Err(Error::InvalidGeometry(format!(
                    "first subarray offset must be (0, 0), got {o:?}"
                )))
            }
            _ => {}
        }
        if offsets.iter().any(|o| !o.0.is_finite() || !o.1.is_finite()) {
            return Err(Error::InvalidGeometry("non-finite subarray offset".into()));
        }
        Ok(Self { subarray, offsets })
    }

    /// `count` subarrays abutting along y, each shifted by its own width
    /// `n_y·d`.
    pub fn contiguous_along_y(subarray: PlanarArray, count: usize) -> Result<Self> {
        let pitch = subarray.n_y as f64 * subarray.spacing_wavelengths;
        Self::new(subarray, (0..count).map(|s| (s as f64 * pitch, 0.0)).collect())
    }

    pub fn subarray(&self) -> &PlanarArray {
        &self.subarray
    }

    pub fn offsets(&self) -> &[(f64, f64)] {
        &self.offsets
    }

    pub fn num_subarrays(&self) -> usize {
        self.offsets.len()
    }

    pub fn antennas_per_subarray(&self) -> usize {
        self.subarray.len()
    }

    pub fn total_antennas(&self) -> usize {
        self.num_subarrays() * self.antennas_per_subarray()
    }

    /// Phase of subarray `s` relative to subarray 0 for a plane wave from
    /// `dir`.
    pub fn phase(&self, s: usize, dir: AnglePair) -> f64 {
        subarray_phase(self.offsets[s], dir)
    }

    /// Unit-norm response of the whole array: block `s` is
    /// `e^{jγ_s} a_SA(dir) / √N_SA`.
    pub fn steering_vector(&self, dir: AnglePair) -> Vec<C64> {
        let local = steering_vector(&self.subarray, dir);
        let scale = 1.0 / math::sqrt(self.num_subarrays() as f64);
        let mut out = Vec::with_capacity(self.total_antennas());
        for s in 0..self.num_subarrays() {
            let rot = cis(self.phase(s, dir)) * scale;
            out.extend(local.iter().map(|&v| v * rot));
        }
        out
    }
}

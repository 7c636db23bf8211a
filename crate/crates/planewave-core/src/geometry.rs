//! Wavenumber-domain geometry: medium constants, the κ_z branch rule,
//! hemisphere ↔ disk maps, plane waves and Green's functions.

use core::f64::consts::{FRAC_1_SQRT_2, PI};
use core::ops::{Add, Mul, Neg, Sub};

#[allow(unused_imports)] // inherent in `core` on recent toolchains
use num_traits::Float;

use crate::error::{bail, Result};
use crate::special::hankel1_0;
use crate::C64;

/// Homogeneous medium at a single frequency.
#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct MediumParams {
    pub lambda: f64,
    pub kappa: f64,
    pub eta: f64,
}

impl MediumParams {
    /// Medium with wavelength `lambda` and normalized impedance η = 1.
    pub fn new(lambda: f64) -> Result<Self> {
        Self::with_eta(lambda, 1.0)
    }

    pub fn with_eta(lambda: f64, eta: f64) -> Result<Self> {
        if !(lambda.is_finite() && lambda > 0.0) {
            bail!(Config, "wavelength must be positive and finite, got {lambda}");
        }
        if !(eta.is_finite() && eta > 0.0) {
            bail!(Config, "impedance must be positive and finite, got {eta}");
        }
        Ok(Self { lambda, kappa: 2.0 * PI / lambda, eta })
    }

    /// Medium specified by its wavenumber.
    pub fn from_kappa(kappa: f64) -> Result<Self> {
        if !(kappa.is_finite() && kappa > 0.0) {
            bail!(Config, "wavenumber must be positive and finite, got {kappa}");
        }
        Ok(Self { lambda: 2.0 * PI / kappa, kappa, eta: 1.0 })
    }
}

/// Elevation/azimuth on the upper hemisphere.
#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct SphericalAngles {
    pub theta: f64,
    pub phi: f64,
}

impl SphericalAngles {
    pub fn new(theta: f64, phi: f64) -> Result<Self> {
        if !(0.0..=PI / 2.0).contains(&theta) {
            bail!(Domain, "elevation {theta} outside [0, π/2]");
        }
        if !(0.0..2.0 * PI).contains(&phi) {
            bail!(Domain, "azimuth {phi} outside [0, 2π)");
        }
        Ok(Self { theta, phi })
    }

    /// Angles given in degrees; azimuth is wrapped into `[0, 360)`.
    pub fn from_degrees(theta_deg: f64, phi_deg: f64) -> Result<Self> {
        Self::new(theta_deg.to_radians(), wrap(phi_deg, 360.0).to_radians())
    }
}

/// Unit vector of cosine directions.
#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct Direction3 {
    pub x: f64,
    pub y: f64,
    pub z: f64,
}

impl Direction3 {
    pub const ZENITH: Self = Self { x: 0.0, y: 0.0, z: 1.0 };

    /// Normalizes `(x, y, z)`; rejects the zero vector.
    pub fn new(x: f64, y: f64, z: f64) -> Result<Self> {
        let n = (x * x + y * y + z * z).sqrt();
        if !(n.is_finite() && n > 0.0) {
            bail!(Domain, "direction must be a nonzero finite vector");
        }
        Ok(Self { x: x / n, y: y / n, z: z / n })
    }

    pub fn from_angles(a: SphericalAngles) -> Self {
        spherical_to_cosine(a)
    }

    /// Upper-hemisphere direction from degrees.
    pub fn from_degrees(theta_deg: f64, phi_deg: f64) -> Result<Self> {
        SphericalAngles::from_degrees(theta_deg, phi_deg).map(spherical_to_cosine)
    }

    pub fn dot(&self, o: &Self) -> f64 {
        self.x * o.x + self.y * o.y + self.z * o.z
    }

    pub fn cross(&self, o: &Self) -> [f64; 3] {
        [
            self.y * o.z - self.z * o.y,
            self.z * o.x - self.x * o.z,
            self.x * o.y - self.y * o.x,
        ]
    }

    pub fn as_array(&self) -> [f64; 3] {
        [self.x, self.y, self.z]
    }

    /// Direction of propagation for a disk node `(kx, ky)`: `(kx, ky, γ)/κ`.
    pub fn from_disk(kx: f64, ky: f64, medium: &MediumParams) -> Result<Self> {
        match gamma(kx, ky, medium) {
            Some(g) => Ok(Self { x: kx / medium.kappa, y: ky / medium.kappa, z: g / medium.kappa }),
            None => bail!(Domain, "({kx}, {ky}) lies outside the propagating disk"),
        }
    }
}

/// Wave vector with the branch rule applied to its longitudinal component.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct WaveVector {
    pub kx: f64,
    pub ky: f64,
    pub kz: C64,
}

impl WaveVector {
    pub fn new(kx: f64, ky: f64, medium: &MediumParams) -> Self {
        Self { kx, ky, kz: kappa_z(kx, ky, medium) }
    }

    /// Propagating wave vector `κ·dir`.
    pub fn from_direction(dir: Direction3, medium: &MediumParams) -> Self {
        Self {
            kx: medium.kappa * dir.x,
            ky: medium.kappa * dir.y,
            kz: C64::new(medium.kappa * dir.z, 0.0),
        }
    }

    /// True when the transverse part lies inside the disk D.
    pub fn is_propagating(&self) -> bool {
        self.kz.im == 0.0
    }
}

/// Cartesian position or displacement.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct SpatialPoint {
    pub x: f64,
    pub y: f64,
    pub z: f64,
}

impl SpatialPoint {
    pub const ORIGIN: Self = Self { x: 0.0, y: 0.0, z: 0.0 };

    pub const fn new(x: f64, y: f64, z: f64) -> Self {
        Self { x, y, z }
    }

    pub fn norm(&self) -> f64 {
        (self.x * self.x + self.y * self.y + self.z * self.z).sqrt()
    }

    pub fn is_finite(&self) -> bool {
        self.x.is_finite() && self.y.is_finite() && self.z.is_finite()
    }

    /// Component-wise closeness with absolute tolerance.
    pub fn approx_eq(&self, o: &Self, tol: f64) -> bool {
        (self.x - o.x).abs() <= tol && (self.y - o.y).abs() <= tol && (self.z - o.z).abs() <= tol
    }
}

impl Add for SpatialPoint {
    type Output = Self;
    fn add(self, o: Self) -> Self {
        Self::new(self.x + o.x, self.y + o.y, self.z + o.z)
    }
}

impl Sub for SpatialPoint {
    type Output = Self;
    fn sub(self, o: Self) -> Self {
        Self::new(self.x - o.x, self.y - o.y, self.z - o.z)
    }
}

impl Neg for SpatialPoint {
    type Output = Self;
    fn neg(self) -> Self {
        Self::new(-self.x, -self.y, -self.z)
    }
}

impl Mul<f64> for SpatialPoint {
    type Output = Self;
    fn mul(self, s: f64) -> Self {
        Self::new(self.x * s, self.y * s, self.z * s)
    }
}

/// `γ = √(κ² − kx² − ky²)` on the disk, `None` for evanescent arguments.
pub fn gamma(kx: f64, ky: f64, medium: &MediumParams) -> Option<f64> {
    let d = medium.kappa * medium.kappa - kx * kx - ky * ky;
    (d >= 0.0).then(|| d.sqrt())
}

/// Longitudinal wavenumber: `γ` on D, `i|γ|` off D (radiation condition).
pub fn kappa_z(kx: f64, ky: f64, medium: &MediumParams) -> C64 {
    let d = medium.kappa * medium.kappa - kx * kx - ky * ky;
    if d >= 0.0 {
        C64::new(d.sqrt(), 0.0)
    } else {
        C64::new(0.0, (-d).sqrt())
    }
}

/// Square root of `kappa_z` on the branch used by the scattering kernel.
pub fn kappa_z_sqrt(kx: f64, ky: f64, medium: &MediumParams) -> C64 {
    let d = medium.kappa * medium.kappa - kx * kx - ky * ky;
    if d >= 0.0 {
        C64::new(d.sqrt().sqrt(), 0.0)
    } else {
        let m = (-d).sqrt().sqrt();
        C64::new(FRAC_1_SQRT_2 * m, FRAC_1_SQRT_2 * m)
    }
}

/// `(sinθ cosφ, sinθ sinφ, cosθ)`.
pub fn spherical_to_cosine(a: SphericalAngles) -> Direction3 {
    let (st, ct) = a.theta.sin_cos();
    let (sp, cp) = a.phi.sin_cos();
    Direction3 { x: st * cp, y: st * sp, z: ct }
}

/// Inverse of [`spherical_to_cosine`] from the transverse cosines.
/// The azimuth at the zenith is reported as 0.
pub fn cosine_to_spherical(kx_hat: f64, ky_hat: f64) -> Result<SphericalAngles> {
    let rho2 = kx_hat * kx_hat + ky_hat * ky_hat;
    if !(rho2 <= 1.0 + 1e-12) {
        bail!(Domain, "cosine directions ({kx_hat}, {ky_hat}) outside the unit disk");
    }
    let rho = rho2.min(1.0).sqrt();
    // atan2 of (ρ, γ̂) is better conditioned than asin(ρ) near the rim.
    let theta = rho.atan2((1.0 - rho * rho).max(0.0).sqrt());
    let phi = if rho == 0.0 { 0.0 } else { wrap(ky_hat.atan2(kx_hat), 2.0 * PI) };
    // rem_euclid can round up to exactly 2π for tiny negative angles.
    let phi = if phi >= 2.0 * PI { 0.0 } else { phi };
    Ok(SphericalAngles { theta, phi })
}

/// `x` reduced to `[0, period)`.
pub(crate) fn wrap(x: f64, period: f64) -> f64 {
    let r = x % period;
    if r < 0.0 { r + period } else { r }
}

/// Jacobian of the hemisphere → disk map: `cosθ sinθ`.
pub fn hemisphere_jacobian(theta: f64) -> f64 {
    theta.cos() * theta.sin()
}

/// Source plane wave `exp(−i(kx sx + ky sy + kz sz))`.
pub fn plane_wave_source(k: &WaveVector, s: &SpatialPoint) -> C64 {
    let i_phase = C64::new(0.0, -(k.kx * s.x + k.ky * s.y)) - C64::i() * k.kz * s.z;
    i_phase.exp()
}

/// Source plane wave plus a flag marking exponential growth
/// (evanescent `k` evaluated at `sz > 0`).
pub fn plane_wave_source_checked(k: &WaveVector, s: &SpatialPoint) -> (C64, bool) {
    let growing = k.kz.im > 0.0 && s.z > 0.0;
    (plane_wave_source(k, s), growing)
}

/// Receive plane wave `exp(i(kx rx + ky ry + kz rz))`.
pub fn plane_wave_receive(k: &WaveVector, r: &SpatialPoint) -> C64 {
    let i_phase = C64::new(0.0, k.kx * r.x + k.ky * r.y) + C64::i() * k.kz * r.z;
    i_phase.exp()
}

/// Receive plane wave plus a growth flag (evanescent `k` at `rz < 0`).
pub fn plane_wave_receive_checked(k: &WaveVector, r: &SpatialPoint) -> (C64, bool) {
    let growing = k.kz.im > 0.0 && r.z < 0.0;
    (plane_wave_receive(k, r), growing)
}

/// Scalar free-space Green's function `e^{iκR}/(4πR)`.
pub fn green3(p: &SpatialPoint, medium: &MediumParams) -> Result<C64> {
    let r = p.norm();
    if !(r > 0.0) {
        bail!(Singular, "Green's function evaluated at zero displacement");
    }
    Ok(C64::from_polar(1.0 / (4.0 * PI * r), medium.kappa * r))
}

/// 2D Green's function `(i/4) H0^(1)(κR)` for an in-plane displacement.
pub fn green2(p: (f64, f64), medium: &MediumParams) -> Result<C64> {
    let r = p.0.hypot(p.1);
    if !(r > 0.0) {
        bail!(Singular, "2D Green's function evaluated at zero displacement");
    }
    Ok(C64::new(0.0, 0.25) * hankel1_0(medium.kappa * r))
}

/// Far-field approximation `g(r′) · a_s(κ r̂′, s)` of `g(r′ − s)`.
pub fn far_field_green(r_prime: &SpatialPoint, s: &SpatialPoint, medium: &MediumParams) -> Result<C64> {
    let r = r_prime.norm();
    if !(r > 0.0) {
        bail!(Singular, "far-field Green's function needs a nonzero observation point");
    }
    let dir = Direction3 { x: r_prime.x / r, y: r_prime.y / r, z: r_prime.z / r };
    let k = WaveVector::from_direction(dir, medium);
    Ok(green3(r_prime, medium)? * plane_wave_source(&k, s))
}

//! Directional statistics on the upper hemisphere: von Mises–Fisher
//! components and mixtures, piecewise-constant region densities, ray sets,
//! normalization checks and direction sampling.
//!
//! Densities are per steradian. Two normalizations are available:
//! [`Normalization::Hemisphere`] integrates to exactly one over the upper
//! hemisphere (isotropic `1/(2π)`, vMF with the truncated normalizer), while
//! [`Normalization::FullSphere`] keeps the full-sphere constants
//! (`1/(4π)`, `c(α) = α/(4π sinh α)`).

use alloc::vec::Vec;
use core::f64::consts::{FRAC_PI_2, PI, TAU};

#[allow(unused_imports)] // inherent in `core` on recent toolchains
use num_traits::Float;
use rand::Rng;

use crate::error::{bail, Result};
use crate::geometry::{Direction3, SphericalAngles};
use crate::special::{gauss_legendre_on, pairwise_sum};
use crate::spectral_support::AngularRegionSet;

/// Which constant a density evaluation uses.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Normalization {
    /// Exact normalization over the upper hemisphere.
    #[default]
    Hemisphere,
    /// Full-sphere constants (`1/(4π)`, `α/(4π sinh α)`).
    FullSphere,
}

/// Support used for vMF moments.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum MomentConvention {
    /// Closed-form moments of the untruncated vMF on the whole sphere.
    FullSphere,
    /// Moments of `t = μ̂ᵀx` under the hemisphere-truncated density.
    HemisphereTruncated,
}

/// vMF normalization constant `α/(4π sinh α)` (full sphere).
pub fn vmf_norm_const(alpha: f64) -> f64 {
    log_vmf_norm_const(alpha).exp()
}

fn log_vmf_norm_const(alpha: f64) -> f64 {
    if alpha < 1e-6 {
        return -(4.0 * PI).ln();
    }
    // ln sinh α = α + ln(1 − e^{−2α}) − ln 2, stable for large α.
    let ln_sinh = alpha + (-(-2.0 * alpha).exp()).ln_1p() - core::f64::consts::LN_2;
    alpha.ln() - (4.0 * PI).ln() - ln_sinh
}

/// Full-sphere vMF density `c(α) e^{α μ̂ᵀx}`.
pub fn vmf_pdf(dir: &Direction3, comp: &VmfComponent) -> f64 {
    (log_vmf_norm_const(comp.alpha) + comp.alpha * comp.mu.dot(dir)).exp()
}

/// `E{t} = coth α − 1/α`.
pub fn mean_resultant(alpha: f64) -> f64 {
    if alpha < 1e-3 {
        alpha / 3.0 - alpha.powi(3) / 45.0
    } else {
        1.0 / alpha.tanh() - 1.0 / alpha
    }
}

/// `ν² = 1 − E{t}²`.
pub fn circular_variance(alpha: f64) -> f64 {
    let t = mean_resultant(alpha);
    1.0 - t * t
}

/// Inverse of [`circular_variance`] by bracketing and bisection.
pub fn alpha_from_variance(nu2: f64) -> Result<f64> {
    if !(nu2 > 0.0) {
        bail!(Domain, "circular variance {nu2} must be positive (ν² = 0 needs α = ∞)");
    }
    if nu2 > 1.0 {
        bail!(Domain, "circular variance {nu2} exceeds 1");
    }
    if nu2 == 1.0 {
        return Ok(0.0);
    }
    let mut lo = 0.0;
    let mut hi = 1.0;
    while circular_variance(hi) > nu2 {
        lo = hi;
        hi *= 2.0;
        if hi > 1e300 {
            bail!(Domain, "circular variance {nu2} too small to invert");
        }
    }
    for _ in 0..2000 {
        let mid = 0.5 * (lo + hi);
        if mid <= lo || mid >= hi {
            break;
        }
        if circular_variance(mid) > nu2 {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    let pick = if (circular_variance(lo) - nu2).abs() < (circular_variance(hi) - nu2).abs() { lo } else { hi };
    Ok(pick)
}

/// One vMF cluster restricted to the upper hemisphere.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct VmfComponent {
    mu: Direction3,
    alpha: f64,
    /// `ln(Z e^{−α})`, `Z = ∫_{S+} e^{α μ̂ᵀx} dΩ`.
    log_scaled_norm: f64,
}

impl VmfComponent {
    pub fn new(mu: Direction3, alpha: f64) -> Result<Self> {
        if !(alpha.is_finite() && alpha >= 0.0) {
            bail!(Domain, "concentration α = {alpha} must be finite and ≥ 0");
        }
        let n = mu.dot(&mu);
        if (n - 1.0).abs() > 1e-12 || mu.z < 0.0 {
            bail!(Domain, "modal direction must be a unit vector with z ≥ 0");
        }
        let mut c = Self { mu, alpha, log_scaled_norm: 0.0 };
        c.log_scaled_norm = c.integrate_t(|_| 1.0).ln();
        Ok(c)
    }

    /// Component with concentration given through the circular variance.
    pub fn from_variance(mu: Direction3, nu2: f64) -> Result<Self> {
        Self::new(mu, alpha_from_variance(nu2)?)
    }

    pub fn mu(&self) -> Direction3 {
        self.mu
    }

    pub fn alpha(&self) -> f64 {
        self.alpha
    }

    /// Density normalized over the upper hemisphere (0 below it).
    pub fn hemisphere_pdf(&self, dir: &Direction3) -> f64 {
        if dir.z < 0.0 {
            return 0.0;
        }
        (self.alpha * (self.mu.dot(dir) - 1.0) - self.log_scaled_norm).exp()
    }

    /// Mass the full-sphere density puts below the horizon.
    pub fn lower_hemisphere_mass(&self) -> f64 {
        let upper = (log_vmf_norm_const(self.alpha) + self.alpha + self.log_scaled_norm).exp();
        (1.0 - upper).max(0.0)
    }

    /// `∫_{S+} f(t) e^{α(t−1)} dΩ` with `t = μ̂ᵀx`.
    fn integrate_t(&self, f: impl Fn(f64) -> f64) -> f64 {
        self.integrate_t_upto(f, 1.0)
    }

    /// As [`Self::integrate_t`], restricted to `t ≤ t_max`.
    ///
    /// Around μ̂ the hemisphere cuts an arc of tangent angles of length
    /// `L(t)`: all of it for `t > sin τ`, none for `t < −sin τ` (τ = tilt of
    /// μ̂), and `2π − 2 acos(t cos τ / (√(1−t²) sin τ))` in between. The
    /// middle band is integrated in `t = sin τ sin u`, which removes the
    /// square-root kinks of `L`.
    fn integrate_t_upto(&self, f: impl Fn(f64) -> f64, t_max: f64) -> f64 {
        const PANELS: usize = 32;
        const NODES: usize = 16;
        let a = self.alpha;
        let sin_tau = (self.mu.x * self.mu.x + self.mu.y * self.mu.y).sqrt().min(1.0);
        let cos_tau = self.mu.z;
        let mut parts = Vec::new();

        // Upper cap t ∈ [sin τ, 1] in s = 1 − t; e^{−αs} is negligible past 40/α.
        let s_lo = (1.0 - t_max).max(0.0);
        let mut s_hi = 1.0 - sin_tau;
        if a > 0.0 {
            s_hi = s_hi.min(40.0 / a);
        }
        if s_hi > s_lo {
            let width = (s_hi - s_lo) / PANELS as f64;
            for p in 0..PANELS {
                let lo = s_lo + p as f64 * width;
                let (xs, ws) = gauss_legendre_on(NODES, lo, lo + width);
                for (s, w) in xs.into_iter().zip(ws) {
                    parts.push(w * TAU * f(1.0 - s) * (-a * s).exp());
                }
            }
        }

        if sin_tau > 0.0 && t_max > -sin_tau {
            let u_hi = (t_max / sin_tau).clamp(-1.0, 1.0).asin();
            let width = (u_hi + FRAC_PI_2) / PANELS as f64;
            for p in 0..PANELS {
                let lo = -FRAC_PI_2 + p as f64 * width;
                let (xs, ws) = gauss_legendre_on(NODES, lo, lo + width);
                for (u, w) in xs.into_iter().zip(ws) {
                    let (su, cu) = u.sin_cos();
                    let t = sin_tau * su;
                    let denom = (1.0 - t * t).max(0.0).sqrt() * sin_tau;
                    let ratio = if denom > 0.0 { (t * cos_tau / denom).clamp(-1.0, 1.0) } else { t.signum() };
                    let arc = TAU - 2.0 * ratio.acos();
                    parts.push(w * sin_tau * cu * arc * f(t) * (a * (t - 1.0)).exp());
                }
            }
        }
        pairwise_sum(&parts)
    }

    /// Orthonormal tangent frame `(e1, e2)` around μ̂.
    fn frame(&self) -> ([f64; 3], [f64; 3]) {
        let mu = self.mu;
        let a = if mu.x.abs() < 0.9 { Direction3 { x: 1.0, y: 0.0, z: 0.0 } } else { Direction3 { x: 0.0, y: 1.0, z: 0.0 } };
        let c = mu.cross(&a);
        let n = (c[0] * c[0] + c[1] * c[1] + c[2] * c[2]).sqrt();
        let e1 = [c[0] / n, c[1] / n, c[2] / n];
        let e1d = Direction3 { x: e1[0], y: e1[1], z: e1[2] };
        (e1, mu.cross(&e1d))
    }

    /// One draw from the full-sphere vMF (may fall below the horizon).
    fn sample_sphere<R: Rng + ?Sized>(&self, rng: &mut R) -> Direction3 {
        let u = 1.0 - rng.random::<f64>();
        let t = if self.alpha < 1e-8 {
            2.0 * u - 1.0
        } else {
            // Inverse CDF of ∝ e^{αt} on [−1, 1].
            (1.0 + (u + (1.0 - u) * (-2.0 * self.alpha).exp()).ln() / self.alpha).clamp(-1.0, 1.0)
        };
        let psi = TAU * rng.random::<f64>();
        let (sp, cp) = psi.sin_cos();
        let rho = (1.0 - t * t).max(0.0).sqrt();
        let (e1, e2) = self.frame();
        let m = self.mu.as_array();
        let v: [f64; 3] = core::array::from_fn(|k| t * m[k] + rho * (cp * e1[k] + sp * e2[k]));
        Direction3 { x: v[0], y: v[1], z: v[2] }
    }

    /// Draw from the hemisphere-truncated density (rejection below horizon).
    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> Direction3 {
        loop {
            let d = self.sample_sphere(rng);
            if d.z >= 0.0 {
                return d;
            }
        }
    }

    /// CDF of `t = μ̂ᵀx` under the hemisphere-truncated density.
    pub fn truncated_t_cdf(&self, t: f64) -> f64 {
        let total = self.integrate_t(|_| 1.0);
        (self.integrate_t_upto(|_| 1.0, t) / total).clamp(0.0, 1.0)
    }
}

/// Mean vector, covariance and the scalar moments of `t = μ̂ᵀx`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct VmfMoments {
    pub mean: [f64; 3],
    pub covariance: [[f64; 3]; 3],
    pub mean_t: f64,
    pub second_moment_t: f64,
}

impl VmfMoments {
    pub fn trace(&self) -> f64 {
        self.covariance[0][0] + self.covariance[1][1] + self.covariance[2][2]
    }
}

/// Mean `E{t} μ̂` and covariance
/// `var{t} μ̂μ̂ᵀ + ((1 − E{t²})/2)(I − μ̂μ̂ᵀ)` of a component.
pub fn vmf_moments(comp: &VmfComponent, convention: MomentConvention) -> VmfMoments {
    let a = comp.alpha;
    let (et, et2) = match convention {
        MomentConvention::FullSphere => {
            let et = mean_resultant(a);
            let et2 = if a < 1e-3 { 1.0 / 3.0 + 2.0 * a * a / 45.0 } else { 1.0 - 2.0 * et / a };
            (et, et2)
        }
        MomentConvention::HemisphereTruncated => {
            let z = comp.integrate_t(|_| 1.0);
            (comp.integrate_t(|t| t) / z, comp.integrate_t(|t| t * t) / z)
        }
    };
    let var = (et2 - et * et).max(0.0);
    let perp = 0.5 * (1.0 - et2).max(0.0);
    let m = comp.mu.as_array();
    let covariance = core::array::from_fn(|i| {
        core::array::from_fn(|j| {
            let outer = m[i] * m[j];
            let eye = if i == j { 1.0 } else { 0.0 };
            var * outer + perp * (eye - outer)
        })
    });
    VmfMoments { mean: core::array::from_fn(|i| et * m[i]), covariance, mean_t: et, second_moment_t: et2 }
}

/// Convex combination of vMF components.
#[derive(Debug, Clone, PartialEq)]
pub struct VmfMixture {
    components: Vec<VmfComponent>,
    weights: Vec<f64>,
}

impl VmfMixture {
    pub fn new(components: Vec<VmfComponent>, weights: Vec<f64>) -> Result<Self> {
        if components.is_empty() || components.len() != weights.len() {
            bail!(Domain, "mixture needs matching, nonempty component and weight lists");
        }
        if weights.iter().any(|w| !(w.is_finite() && *w >= 0.0)) {
            bail!(Domain, "mixture weights must be finite and ≥ 0");
        }
        let total: f64 = weights.iter().sum();
        if (total - 1.0).abs() > 1e-12 {
            bail!(Domain, "mixture weights sum to {total}, expected 1");
        }
        Ok(Self { components, weights })
    }

    /// Equal weights `1/N`.
    pub fn uniform(components: Vec<VmfComponent>) -> Result<Self> {
        let n = components.len();
        if n == 0 {
            bail!(Domain, "mixture needs at least one component");
        }
        let mut weights = alloc::vec![1.0 / n as f64; n];
        // Absorb rounding so the weights sum to one exactly.
        let rest: f64 = weights[1..].iter().sum();
        weights[0] = 1.0 - rest;
        Self::new(components, weights)
    }

    pub fn components(&self) -> &[VmfComponent] {
        &self.components
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    fn pick<R: Rng + ?Sized>(&self, rng: &mut R) -> &VmfComponent {
        let u = rng.random::<f64>();
        let mut acc = 0.0;
        for (c, w) in self.components.iter().zip(&self.weights) {
            acc += w;
            if u < acc {
                return c;
            }
        }
        self.components.last().expect("nonempty mixture")
    }
}

/// Mixture density with the full-sphere constants.
pub fn mixture_pdf(dir: &Direction3, mix: &VmfMixture) -> f64 {
    mix.components.iter().zip(&mix.weights).map(|(c, w)| w * vmf_pdf(dir, c)).sum()
}

/// One propagation path: departure (source side) and arrival (receive
/// side) directions with a power gain.
#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct Ray {
    pub source: Direction3,
    pub receive: Direction3,
    pub gain: f64,
}

/// Constant density `1/|Θ|` on a region union.
#[derive(Debug, Clone, PartialEq)]
pub struct PiecewiseRegions {
    set: AngularRegionSet,
    solid_angle: f64,
}

impl PiecewiseRegions {
    pub fn new(set: AngularRegionSet) -> Result<Self> {
        if set.is_empty() {
            bail!(Domain, "piecewise distribution over an empty region set");
        }
        let solid_angle = set.solid_angle();
        if !(solid_angle > 0.0) {
            bail!(Domain, "region union has zero measure");
        }
        Ok(Self { set, solid_angle })
    }

    pub fn set(&self) -> &AngularRegionSet {
        &self.set
    }

    pub fn solid_angle(&self) -> f64 {
        self.solid_angle
    }
}

/// Angular power distribution on the upper hemisphere.
#[derive(Debug, Clone, PartialEq)]
pub enum AngularDistribution {
    Isotropic,
    Mixture(VmfMixture),
    Piecewise(PiecewiseRegions),
    /// Finite ray set with gains summing to one; singular (no density).
    Discrete(Vec<Ray>),
}

impl AngularDistribution {
    /// Density per steradian with exact hemisphere normalization.
    /// Ray sets have no density and evaluate to 0.
    pub fn density(&self, dir: &Direction3) -> f64 {
        self.density_with(dir, Normalization::Hemisphere)
    }

    pub fn density_with(&self, dir: &Direction3, norm: Normalization) -> f64 {
        if dir.z < 0.0 {
            return 0.0;
        }
        match (self, norm) {
            (AngularDistribution::Isotropic, Normalization::Hemisphere) => 1.0 / TAU,
            (AngularDistribution::Isotropic, Normalization::FullSphere) => 1.0 / (4.0 * PI),
            (AngularDistribution::Mixture(m), Normalization::Hemisphere) => {
                m.components.iter().zip(&m.weights).map(|(c, w)| w * c.hemisphere_pdf(dir)).sum()
            }
            (AngularDistribution::Mixture(m), Normalization::FullSphere) => mixture_pdf(dir, m),
            (AngularDistribution::Piecewise(p), _) => {
                if p.set.contains_direction(dir) {
                    1.0 / p.solid_angle
                } else {
                    0.0
                }
            }
            (AngularDistribution::Discrete(_), _) => 0.0,
        }
    }

    pub fn is_isotropic(&self) -> bool {
        matches!(self, AngularDistribution::Isotropic)
    }
}

/// Draws a direction; the hemisphere is enforced by rejection.
/// Ray sets return the departure direction of a gain-weighted ray.
pub fn sample_direction<R: Rng + ?Sized>(dist: &AngularDistribution, rng: &mut R) -> Direction3 {
    match dist {
        AngularDistribution::Isotropic => sample_isotropic(rng),
        AngularDistribution::Mixture(m) => m.pick(rng).sample(rng),
        AngularDistribution::Piecewise(p) => loop {
            let d = sample_isotropic(rng);
            if p.set.contains_direction(&d) {
                return d;
            }
        },
        AngularDistribution::Discrete(rays) => {
            let u = rng.random::<f64>();
            let mut acc = 0.0;
            for r in rays {
                acc += r.gain;
                if u < acc {
                    return r.source;
                }
            }
            rays.last().map(|r| r.source).unwrap_or(Direction3::ZENITH)
        }
    }
}

fn sample_isotropic<R: Rng + ?Sized>(rng: &mut R) -> Direction3 {
    // Uniform z on (0, 1] is uniform area on the hemisphere.
    let z = 1.0 - rng.random::<f64>();
    let phi = TAU * rng.random::<f64>();
    let rho = (1.0 - z * z).max(0.0).sqrt();
    let (s, c) = phi.sin_cos();
    Direction3 { x: rho * c, y: rho * s, z }
}

/// Default resolution of [`check_normalization`].
pub const NORMALIZATION_GRID: (usize, usize) = (512, 1024);

/// `|∬ p sinθ dθ dφ − 1|` over the upper hemisphere; isotropic is exact,
/// ray sets compare their gain sum.
pub fn check_normalization(dist: &AngularDistribution, n_theta: usize, n_phi: usize) -> f64 {
    match dist {
        AngularDistribution::Isotropic => (TAU * dist.density(&Direction3::ZENITH) - 1.0).abs(),
        AngularDistribution::Discrete(rays) => {
            let g: Vec<f64> = rays.iter().map(|r| r.gain).collect();
            (pairwise_sum(&g) - 1.0).abs()
        }
        // Region edges fall on cell boundaries of the midpoint grid, where a
        // Gauss rule would smear the jump.
        AngularDistribution::Piecewise(_) => {
            (hemisphere_integral_midpoint(n_theta, n_phi, |d| dist.density(d)) - 1.0).abs()
        }
        AngularDistribution::Mixture(_) => (hemisphere_integral(n_theta, n_phi, |d| dist.density(d)) - 1.0).abs(),
    }
}

/// Midpoint rule in both angles; suited to piecewise-constant integrands.
pub fn hemisphere_integral_midpoint(n_theta: usize, n_phi: usize, f: impl Fn(&Direction3) -> f64) -> f64 {
    let dt = FRAC_PI_2 / n_theta as f64;
    let dp = TAU / n_phi as f64;
    let trig: Vec<(f64, f64)> = (0..n_phi).map(|j| ((j as f64 + 0.5) * dp).sin_cos()).collect();
    let rows: Vec<f64> = (0..n_theta)
        .map(|i| {
            let (st, ct) = ((i as f64 + 0.5) * dt).sin_cos();
            let vals: Vec<f64> = trig.iter().map(|&(sp, cp)| f(&Direction3 { x: st * cp, y: st * sp, z: ct })).collect();
            pairwise_sum(&vals) * st * dt * dp
        })
        .collect();
    pairwise_sum(&rows)
}

/// `∬_{S+} f dΩ`: Gauss–Legendre in θ, midpoint (spectrally accurate for
/// periodic integrands) in φ.
pub fn hemisphere_integral(n_theta: usize, n_phi: usize, f: impl Fn(&Direction3) -> f64) -> f64 {
    let (nodes, weights) = crate::special::gauss_legendre_on(n_theta, 0.0, FRAC_PI_2);
    let dp = TAU / n_phi as f64;
    let trig: Vec<(f64, f64)> = (0..n_phi).map(|j| ((j as f64 + 0.5) * dp).sin_cos()).collect();
    let rows: Vec<f64> = nodes
        .iter()
        .zip(&weights)
        .map(|(&t, &w)| {
            let (st, ct) = t.sin_cos();
            let vals: Vec<f64> = trig.iter().map(|&(sp, cp)| f(&Direction3 { x: st * cp, y: st * sp, z: ct })).collect();
            pairwise_sum(&vals) * st * w * dp
        })
        .collect();
    pairwise_sum(&rows)
}

/// Azimuth of a direction in `[0, 2π)` and its elevation.
pub fn direction_angles(d: &Direction3) -> SphericalAngles {
    let theta = d.z.clamp(-1.0, 1.0).acos();
    let phi = crate::geometry::wrap(d.y.atan2(d.x), TAU);
    SphericalAngles { theta, phi: if phi >= TAU { 0.0 } else { phi } }
}

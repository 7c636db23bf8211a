//! Spectral supports and their measures: the propagating disk D, angular
//! region sets on the upper hemisphere, bandwidth / degrees-of-freedom
//! constants, the evanescent loss curve, and quadrature grids over D.

use alloc::collections::BTreeMap;
use alloc::vec::Vec;
use core::f64::consts::{LOG10_E, PI, TAU};

#[allow(unused_imports)] // inherent in `core` on recent toolchains
use num_traits::Float;

use crate::error::{bail, Result};
use crate::geometry::{gamma, Direction3, MediumParams, SphericalAngles};
use crate::special::pairwise_sum;

/// Default rim cut as a fraction of κ.
pub const DEFAULT_RIM_CUT_FRACTION: f64 = 1e-3;

/// Raster used for region unions (θ × φ cells).
pub const REGION_RASTER: (usize, usize) = (1024, 2048);

/// Isotropic bandwidth `|D| = πκ²`.
pub fn bandwidth_isotropic(medium: &MediumParams) -> f64 {
    PI * medium.kappa * medium.kappa
}

/// Degrees of freedom of a segment of length `l` with 1D bandwidth `omega`.
pub fn dof_segment(omega: f64, l: f64) -> f64 {
    omega * l / PI
}

/// Loss of a planar aperture against the `(2κ)²` square: `Ω_iso/(2κ)² = π/4`.
pub fn dof_planar_loss_ratio() -> f64 {
    let unit = MediumParams { lambda: TAU, kappa: 1.0, eta: 1.0 };
    bandwidth_isotropic(&unit) / (2.0 * unit.kappa).powi(2)
}

/// Power fraction left in the broadside evanescent wave after `d0`:
/// `e^{−2|γ(0,0)| d0} = e^{−4π d0/λ}`.
pub fn evanescent_power_loss(d0: f64, medium: &MediumParams) -> f64 {
    (-2.0 * medium.kappa * d0).exp()
}

/// [`evanescent_power_loss`] in dB; evaluated in the log domain so that
/// large distances do not underflow.
pub fn evanescent_power_loss_db(d0: f64, medium: &MediumParams) -> f64 {
    -(4.0 * PI * 10.0 * LOG10_E) * d0 / medium.lambda
}

/// A region of the upper hemisphere.
#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub enum AngularRegion {
    /// `θ ∈ [theta_min, theta_max]`, `φ ∈ [phi_min, phi_max]`; when
    /// `phi_max < phi_min` the azimuth range wraps through 0.
    Rect { theta_min: f64, theta_max: f64, phi_min: f64, phi_max: f64 },
    /// Directions within `half_angle` of `center`.
    Cap { center: Direction3, half_angle: f64 },
}

impl AngularRegion {
    pub fn validate(&self) -> Result<()> {
        match *self {
            AngularRegion::Rect { theta_min, theta_max, phi_min, phi_max } => {
                if !(0.0 <= theta_min && theta_min < theta_max && theta_max <= PI / 2.0) {
                    bail!(Domain, "elevation range [{theta_min}, {theta_max}] not within [0, π/2]");
                }
                if !((0.0..=TAU).contains(&phi_min) && (0.0..=TAU).contains(&phi_max)) || phi_min == phi_max {
                    bail!(Domain, "azimuth range [{phi_min}, {phi_max}] not within [0, 2π]");
                }
            }
            AngularRegion::Cap { center, half_angle } => {
                if !(half_angle > 0.0 && half_angle <= PI) {
                    bail!(Domain, "cap half-angle {half_angle} not in (0, π]");
                }
                if center.z < 0.0 {
                    bail!(Domain, "cap center below the horizon");
                }
            }
        }
        Ok(())
    }

    pub fn contains(&self, a: SphericalAngles) -> bool {
        match *self {
            AngularRegion::Rect { theta_min, theta_max, phi_min, phi_max } => {
                let in_theta = a.theta >= theta_min && a.theta <= theta_max;
                let in_phi = if phi_min <= phi_max {
                    a.phi >= phi_min && a.phi <= phi_max
                } else {
                    a.phi >= phi_min || a.phi <= phi_max
                };
                in_theta && in_phi
            }
            AngularRegion::Cap { center, half_angle } => {
                Direction3::from_angles(a).dot(&center) >= half_angle.cos()
            }
        }
    }

    /// Closed-form solid angle when the region lies fully in the hemisphere.
    pub fn solid_angle(&self) -> Option<f64> {
        match *self {
            AngularRegion::Rect { theta_min, theta_max, phi_min, phi_max } => {
                let dphi = if phi_min <= phi_max { phi_max - phi_min } else { TAU - phi_min + phi_max };
                Some((theta_min.cos() - theta_max.cos()) * dphi)
            }
            AngularRegion::Cap { center, half_angle } => {
                let tilt = center.z.clamp(-1.0, 1.0).acos();
                (tilt + half_angle <= PI / 2.0).then(|| TAU * (1.0 - half_angle.cos()))
            }
        }
    }
}

/// Union of hemisphere regions; overlaps are measured once.
#[derive(Debug, Clone, PartialEq, Default)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct AngularRegionSet {
    pub regions: Vec<AngularRegion>,
}

/// Solid angle and projected (cosine-weighted) measure of a set.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RegionMeasure {
    /// `∬ sinθ dθ dφ` over the union (steradians).
    pub solid_angle: f64,
    /// `∬ cosθ sinθ dθ dφ` over the union (disk image / κ²).
    pub projected: f64,
}

impl AngularRegionSet {
    pub fn new(regions: Vec<AngularRegion>) -> Result<Self> {
        for r in &regions {
            r.validate()?;
        }
        Ok(Self { regions })
    }

    pub fn is_empty(&self) -> bool {
        self.regions.is_empty()
    }

    pub fn contains(&self, a: SphericalAngles) -> bool {
        self.regions.iter().any(|r| r.contains(a))
    }

    pub fn contains_direction(&self, d: &Direction3) -> bool {
        if d.z < 0.0 {
            return false;
        }
        let theta = d.z.clamp(-1.0, 1.0).acos();
        let phi = crate::geometry::wrap(d.y.atan2(d.x), TAU);
        let phi = if phi >= TAU { 0.0 } else { phi };
        self.contains(SphericalAngles { theta, phi })
    }

    /// Rasterized union measure at `n_theta × n_phi` midpoint cells.
    pub fn raster_measure(&self, n_theta: usize, n_phi: usize) -> RegionMeasure {
        let dt = (PI / 2.0) / n_theta as f64;
        let dp = TAU / n_phi as f64;
        let mut solid = Vec::with_capacity(n_theta);
        let mut proj = Vec::with_capacity(n_theta);
        for i in 0..n_theta {
            let theta = (i as f64 + 0.5) * dt;
            let covered = (0..n_phi)
                .filter(|&j| self.contains(SphericalAngles { theta, phi: (j as f64 + 0.5) * dp }))
                .count() as f64;
            let s = theta.sin() * dt * dp * covered;
            solid.push(s);
            proj.push(s * theta.cos());
        }
        RegionMeasure { solid_angle: pairwise_sum(&solid), projected: pairwise_sum(&proj) }
    }

    /// Solid angle of the union: exact for a single region inside the
    /// hemisphere, rasterized otherwise.
    pub fn solid_angle(&self) -> f64 {
        if let [single] = self.regions.as_slice() {
            if let Some(s) = single.solid_angle() {
                return s;
            }
        }
        self.raster_measure(REGION_RASTER.0, REGION_RASTER.1).solid_angle
    }
}

/// Bandwidth of a region union: its disk image area `κ² ∬ cosθ sinθ dθ dφ`.
pub fn bandwidth_regions(set: &AngularRegionSet, medium: &MediumParams) -> Result<f64> {
    if set.is_empty() {
        bail!(Domain, "bandwidth of an empty region set");
    }
    let m = set.raster_measure(REGION_RASTER.0, REGION_RASTER.1);
    Ok(medium.kappa * medium.kappa * m.projected)
}

/// Node layout of a [`DiskGrid`].
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(rename_all = "lowercase"))]
pub enum GridMode {
    Polar,
    Cartesian,
    /// Caller-supplied nodes.
    Custom,
}

/// One quadrature node of the disk.
#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct DiskNode {
    pub kx: f64,
    pub ky: f64,
    pub gamma: f64,
    /// Cell area `Δk`.
    pub weight: f64,
    /// `∫_cell dk/γ`; exact per cell on polar grids (see [`build_disk_grid`]).
    pub inv_gamma_weight: f64,
}

/// Quadrature grid over the retained disk `k_x² + k_y² ≤ (κ − ε)²`.
#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct DiskGrid {
    pub medium: MediumParams,
    pub mode: GridMode,
    pub resolution: (usize, usize),
    pub rim_cut: f64,
    pub nodes: Vec<DiskNode>,
}

/// Builds a disk grid.
///
/// Polar grids use cells uniform in elevation (`r = κ sinθ`), which stretches
/// the radial spacing like `√(κ − r)` towards the rim, and angular nodes at
/// `(j + ½)Δφ`. Cell weights are exact areas. The `1/γ` weights are exact
/// cell integrals `Δφ (γ_lo − γ_hi)`; the outermost ring also absorbs the
/// discarded rim strip so that `Σ inv_gamma_weight = 2πκ` exactly and the
/// integrable rim singularity contributes its full mass.
///
/// Cartesian grids are a lattice symmetric about the origin clipped to the
/// retained disk, with `1/γ` weights `h²/γ(node)`.
pub fn build_disk_grid(
    medium: &MediumParams,
    mode: GridMode,
    resolution: (usize, usize),
    rim_cut: f64,
) -> Result<DiskGrid> {
    let (n1, n2) = resolution;
    if n1 < 4 || n2 < 4 {
        bail!(Config, "grid resolution {n1}×{n2} below the 4-per-axis minimum");
    }
    let kappa = medium.kappa;
    if !(rim_cut > 0.0 && rim_cut < kappa / 10.0) {
        bail!(Config, "rim cut {rim_cut} outside (0, κ/10)");
    }
    let radius = kappa - rim_cut;
    let nodes = match mode {
        GridMode::Polar => polar_nodes(kappa, radius, n1, n2),
        GridMode::Cartesian => cartesian_nodes(medium, radius, n1, n2),
        GridMode::Custom => bail!(Config, "custom grids are built with DiskGrid::from_nodes"),
    };
    Ok(DiskGrid { medium: *medium, mode, resolution, rim_cut, nodes })
}

fn polar_nodes(kappa: f64, radius: f64, n_r: usize, n_phi: usize) -> Vec<DiskNode> {
    let theta_max = (radius / kappa).asin();
    let dt = theta_max / n_r as f64;
    let dphi = TAU / n_phi as f64;
    let mut nodes = Vec::with_capacity(n_r * n_phi);
    for m in 0..n_r {
        let t_lo = m as f64 * dt;
        let t_hi = if m + 1 == n_r { theta_max } else { (m + 1) as f64 * dt };
        let t_mid = 0.5 * (t_lo + t_hi);
        let (r_lo, r_hi) = (kappa * t_lo.sin(), kappa * t_hi.sin());
        let g_lo = kappa * t_lo.cos();
        let g_hi = if m + 1 == n_r { 0.0 } else { kappa * t_hi.cos() };
        let weight = 0.5 * dphi * (r_hi * r_hi - r_lo * r_lo);
        let inv_gamma_weight = dphi * (g_lo - g_hi);
        let r = kappa * t_mid.sin();
        let gamma = kappa * t_mid.cos();
        let ring_start = nodes.len();
        let half = if n_phi % 2 == 0 { n_phi / 2 } else { n_phi };
        for j in 0..half {
            let (s, c) = ((j as f64 + 0.5) * dphi).sin_cos();
            nodes.push(DiskNode { kx: r * c, ky: r * s, gamma, weight, inv_gamma_weight });
        }
        // Second half as exact negations keeps the grid closed under k → −k.
        for j in half..n_phi {
            let mut n = nodes[ring_start + j - half];
            n.kx = -n.kx;
            n.ky = -n.ky;
            nodes.push(n);
        }
    }
    nodes
}

fn cartesian_nodes(medium: &MediumParams, radius: f64, nx: usize, ny: usize) -> Vec<DiskNode> {
    let kappa = medium.kappa;
    let (hx, hy) = (2.0 * kappa / nx as f64, 2.0 * kappa / ny as f64);
    let (cx, cy) = ((nx as f64 - 1.0) / 2.0, (ny as f64 - 1.0) / 2.0);
    let mut nodes = Vec::new();
    for i in 0..nx {
        for j in 0..ny {
            let kx = (i as f64 - cx) * hx;
            let ky = (j as f64 - cy) * hy;
            if kx * kx + ky * ky > radius * radius {
                continue;
            }
            if let Some(g) = gamma(kx, ky, medium) {
                let w = hx * hy;
                nodes.push(DiskNode { kx, ky, gamma: g, weight: w, inv_gamma_weight: w / g });
            }
        }
    }
    nodes
}

impl DiskGrid {
    /// Grid from explicit nodes `(kx, ky, weight)`; the `1/γ` weights are
    /// `weight/γ(node)`. Every node must have `γ > 0`.
    pub fn from_nodes(medium: &MediumParams, nodes: &[(f64, f64, f64)]) -> Result<Self> {
        if nodes.is_empty() {
            bail!(Config, "a disk grid needs at least one node");
        }
        let mut out = Vec::with_capacity(nodes.len());
        let mut min_cut = f64::INFINITY;
        for &(kx, ky, w) in nodes {
            let g = match gamma(kx, ky, medium) {
                Some(g) if g > 0.0 => g,
                _ => bail!(Config, "node ({kx}, {ky}) is not strictly inside the disk"),
            };
            if !(w > 0.0 && w.is_finite()) {
                bail!(Config, "node weight {w} must be positive");
            }
            min_cut = min_cut.min(medium.kappa - kx.hypot(ky));
            out.push(DiskNode { kx, ky, gamma: g, weight: w, inv_gamma_weight: w / g });
        }
        Ok(Self { medium: *medium, mode: GridMode::Custom, resolution: (nodes.len(), 1), rim_cut: min_cut, nodes: out })
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    pub fn total_weight(&self) -> f64 {
        let w: Vec<f64> = self.nodes.iter().map(|n| n.weight).collect();
        pairwise_sum(&w)
    }

    /// `Σ inv_gamma_weight`, the grid's exact-cell estimate of `∬ dk/γ`.
    pub fn inverse_gamma_mass(&self) -> f64 {
        let w: Vec<f64> = self.nodes.iter().map(|n| n.inv_gamma_weight).collect();
        pairwise_sum(&w)
    }

    /// Direction of propagation `(kx, ky, γ)/κ` of node `i`.
    pub fn direction(&self, i: usize) -> Direction3 {
        let n = &self.nodes[i];
        let k = self.medium.kappa;
        Direction3 { x: n.kx / k, y: n.ky / k, z: n.gamma / k }
    }

    /// Index of the node at exactly `(kx, ky)`, if any.
    pub fn find(&self, kx: f64, ky: f64, tol: f64) -> Option<usize> {
        self.nodes.iter().position(|n| (n.kx - kx).abs() <= tol && (n.ky - ky).abs() <= tol)
    }

    /// Permutation `i ↦ j` with `node_j = −node_i` (bitwise), or `None`
    /// when the grid is not closed under negation.
    pub fn negation_map(&self) -> Option<Vec<usize>> {
        let key = |kx: f64, ky: f64| ((kx + 0.0).to_bits(), (ky + 0.0).to_bits());
        let index: BTreeMap<(u64, u64), usize> =
            self.nodes.iter().enumerate().map(|(i, n)| (key(n.kx, n.ky), i)).collect();
        self.nodes.iter().map(|n| index.get(&key(-n.kx, -n.ky)).copied()).collect()
    }
}

/// Plain quadrature `Σ w/γ(node)` of `∬_D dk/γ`.
pub fn disk_inverse_gamma_integral(grid: &DiskGrid) -> f64 {
    let terms: Vec<f64> = grid.nodes.iter().map(|n| n.weight / n.gamma).collect();
    pairwise_sum(&terms)
}

/// Exact `∬ dk/γ` over the disk of radius `κ − rim_cut`:
/// `2π(κ − √(κ² − (κ − ε)²))`, tending to `2πκ`.
pub fn inverse_gamma_integral_exact(medium: &MediumParams, rim_cut: f64) -> f64 {
    let k = medium.kappa;
    let r = k - rim_cut;
    TAU * (k - (k * k - r * r).max(0.0).sqrt())
}

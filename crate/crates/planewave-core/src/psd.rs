//! Spectral factors and power spectral densities on `D × D`.
//!
//! The power of a stationary channel is
//!
//! ```text
//! P_h = 1/(2π)⁴ ∬∬ S dk dκ,   S = (κη/2)² A² / (γ(k) γ(κ)).
//! ```
//!
//! Mapping both disks to hemispheres (`dk/γ = κ dΩ`) gives
//! `P_h = ∬∬ A² / C dΩ_r dΩ_s` with the spherical constant
//! `C = (2π)⁴ / ((κη/2)² κ²)`. A separable factor built from two unit-mass
//! angular densities is therefore `A² = C · p_r · p_s`, and the isotropic
//! unit-power factor is `A² = C/(2π)² = 16π²/(κ⁴η²)`.

use alloc::vec::Vec;
use core::f64::consts::PI;

#[allow(unused_imports)] // inherent in `core` on recent toolchains
use num_traits::Float;

use crate::angular::{hemisphere_integral, AngularDistribution, Ray};
use crate::error::{bail, Result};
use crate::geometry::{gamma, Direction3, MediumParams};
use crate::special::pairwise_sum;
use crate::spectral_support::DiskGrid;

/// Largest dense factor (`receive nodes × source nodes`) accepted.
pub const MAX_COUPLED_ENTRIES: usize = 1 << 28;

/// `C = (2π)⁴ / ((κη/2)² κ²)`, the disk ↔ hemisphere power constant.
pub fn spherical_constant(medium: &MediumParams) -> f64 {
    let half = 0.5 * medium.kappa * medium.eta;
    (2.0 * PI).powi(4) / (half * half * medium.kappa * medium.kappa)
}

/// Nominal isotropic factor for the unit-power channel:
/// `A² = 2π²/κ`. This is the hemisphere-domain constant; see
/// [`unit_power_isotropic_factor`] for the disk-domain value that makes
/// the quadrature of `S` equal one.
pub fn isotropic_spectral_factor(medium: &MediumParams) -> f64 {
    (2.0 * PI * PI / medium.kappa).sqrt()
}

/// Disk-domain isotropic factor with unit average power:
/// `A = 4π/(κ²η)`.
pub fn unit_power_isotropic_factor(medium: &MediumParams) -> f64 {
    4.0 * PI / (medium.kappa * medium.kappa * medium.eta)
}

/// Dense factor over `receive nodes × source nodes` (row-major).
#[derive(Debug, Clone, PartialEq)]
pub struct CoupledFactor {
    pub n_receive: usize,
    pub n_source: usize,
    pub values: Vec<f64>,
}

/// Shape of a spectral factor.
#[derive(Debug, Clone, PartialEq)]
pub enum FactorForm {
    IsotropicClosedForm,
    Separable { source: AngularDistribution, receive: AngularDistribution },
    Coupled(CoupledFactor),
}

/// Nonnegative spectral factor `A(k, κ)` with a global scale.
#[derive(Debug, Clone, PartialEq)]
pub struct SpectralFactor {
    form: FactorForm,
    scale: f64,
}

impl SpectralFactor {
    /// Unit-power isotropic factor.
    pub fn isotropic() -> Self {
        Self { form: FactorForm::IsotropicClosedForm, scale: 1.0 }
    }

    /// `A² = C p_r p_s`; ray sets are rejected (they synthesize as finite sums).
    pub fn separable(source: AngularDistribution, receive: AngularDistribution) -> Result<Self> {
        if matches!(source, AngularDistribution::Discrete(_)) || matches!(receive, AngularDistribution::Discrete(_)) {
            bail!(Config, "ray sets have no density; synthesize them with the ray-sum path");
        }
        Ok(Self { form: FactorForm::Separable { source, receive }, scale: 1.0 })
    }

    /// Dense factor on a specific pair of grids.
    pub fn coupled(n_receive: usize, n_source: usize, values: Vec<f64>) -> Result<Self> {
        let n = n_receive.saturating_mul(n_source);
        if n > MAX_COUPLED_ENTRIES {
            bail!(Resource, "coupled factor with {n} entries exceeds the 2^28 guard");
        }
        if values.len() != n {
            bail!(Config, "coupled factor has {} values, expected {n_receive}×{n_source}", values.len());
        }
        if values.iter().any(|v| !(v.is_finite() && *v >= 0.0)) {
            bail!(Config, "spectral factor values must be finite and ≥ 0");
        }
        Ok(Self { form: FactorForm::Coupled(CoupledFactor { n_receive, n_source, values }), scale: 1.0 })
    }

    pub fn form(&self) -> &FactorForm {
        &self.form
    }

    pub fn scale(&self) -> f64 {
        self.scale
    }

    /// Factor multiplied by `c ≥ 0`.
    pub fn scaled(&self, c: f64) -> Self {
        Self { form: self.form.clone(), scale: self.scale * c }
    }

    pub fn is_isotropic(&self) -> bool {
        match &self.form {
            FactorForm::IsotropicClosedForm => true,
            FactorForm::Separable { source, receive } => source.is_isotropic() && receive.is_isotropic(),
            FactorForm::Coupled(_) => false,
        }
    }

    /// `A` at an arbitrary pair of disk points (not available for coupled factors).
    pub fn value(&self, k: (f64, f64), kappa: (f64, f64), medium: &MediumParams) -> Result<f64> {
        match &self.form {
            FactorForm::IsotropicClosedForm => Ok(self.scale * unit_power_isotropic_factor(medium)),
            FactorForm::Separable { source, receive } => {
                let dr = Direction3::from_disk(k.0, k.1, medium)?;
                let ds = Direction3::from_disk(kappa.0, kappa.1, medium)?;
                Ok(self.scale * (spherical_constant(medium) * receive.density(&dr) * source.density(&ds)).sqrt())
            }
            FactorForm::Coupled(_) => bail!(Domain, "coupled factors are only defined on their grid nodes"),
        }
    }

    /// Factor values on a pair of grids.
    pub fn tabulate(&self, receive: &DiskGrid, source: &DiskGrid) -> Result<FactorTable> {
        let medium = &receive.medium;
        match &self.form {
            FactorForm::IsotropicClosedForm => Ok(FactorTable::Separable {
                receive: alloc::vec![self.scale * unit_power_isotropic_factor(medium); receive.len()],
                source: alloc::vec![1.0; source.len()],
            }),
            FactorForm::Separable { source: ps, receive: pr } => {
                let c = spherical_constant(medium).sqrt() * self.scale;
                let r = (0..receive.len()).map(|i| c * pr.density(&receive.direction(i)).sqrt()).collect();
                let s = (0..source.len()).map(|j| ps.density(&source.direction(j)).sqrt()).collect();
                Ok(FactorTable::Separable { receive: r, source: s })
            }
            FactorForm::Coupled(cf) => {
                if cf.n_receive != receive.len() || cf.n_source != source.len() {
                    bail!(
                        Config,
                        "coupled factor is {}×{} but grids have {}×{} nodes",
                        cf.n_receive,
                        cf.n_source,
                        receive.len(),
                        source.len()
                    );
                }
                Ok(FactorTable::Dense {
                    n_source: cf.n_source,
                    values: cf.values.iter().map(|v| v * self.scale).collect(),
                })
            }
        }
    }
}

/// Factor values at grid nodes.
#[derive(Debug, Clone, PartialEq)]
pub enum FactorTable {
    /// `A_ij = receive[i] · source[j]`.
    Separable { receive: Vec<f64>, source: Vec<f64> },
    Dense { n_source: usize, values: Vec<f64> },
}

impl FactorTable {
    #[inline]
    pub fn get(&self, i: usize, j: usize) -> f64 {
        match self {
            FactorTable::Separable { receive, source } => receive[i] * source[j],
            FactorTable::Dense { n_source, values } => values[i * n_source + j],
        }
    }

    /// `sup A` over the tabulated nodes.
    pub fn sup(&self) -> f64 {
        match self {
            FactorTable::Separable { receive, source } => {
                receive.iter().fold(0.0f64, |m, v| m.max(*v)) * source.iter().fold(0.0f64, |m, v| m.max(*v))
            }
            FactorTable::Dense { values, .. } => values.iter().fold(0.0f64, |m, v| m.max(*v)),
        }
    }
}

/// 4D PSD `S = (κη/2)² A²/(γ(k)γ(κ))` at one pair of points inside D.
pub fn psd4(
    factor: &SpectralFactor,
    kx: f64,
    ky: f64,
    kappa_x: f64,
    kappa_y: f64,
    medium: &MediumParams,
) -> Result<f64> {
    let (gk, gs) = match (gamma(kx, ky, medium), gamma(kappa_x, kappa_y, medium)) {
        (Some(a), Some(b)) if a > 0.0 && b > 0.0 => (a, b),
        _ => bail!(Domain, "PSD requested on or outside the rim of D"),
    };
    let a = factor.value((kx, ky), (kappa_x, kappa_y), medium)?;
    let half = 0.5 * medium.kappa * medium.eta;
    Ok(half * half * a * a / (gk * gs))
}

/// PSD tabulated on `receive × source` nodes.
#[derive(Debug, Clone, PartialEq)]
pub struct Psd4Grid {
    pub medium: MediumParams,
    pub n_source: usize,
    pub values: Vec<f64>,
}

pub fn psd4_grid(table: &FactorTable, receive: &DiskGrid, source: &DiskGrid) -> Result<Psd4Grid> {
    let n = receive.len().saturating_mul(source.len());
    if n > MAX_COUPLED_ENTRIES {
        bail!(Resource, "PSD grid with {n} entries exceeds the 2^28 guard");
    }
    let m = receive.medium;
    let half = 0.5 * m.kappa * m.eta;
    let mut values = Vec::with_capacity(n);
    for (i, r) in receive.nodes.iter().enumerate() {
        for (j, s) in source.nodes.iter().enumerate() {
            let a = table.get(i, j);
            values.push(half * half * a * a / (r.gamma * s.gamma));
        }
    }
    Ok(Psd4Grid { medium: m, n_source: source.len(), values })
}

/// `P_h = 1/(2π)⁴ Σ (κη/2)² A_ij² Γ_i Γ_j` where `Γ = ∫_cell dk/γ` are the
/// grids' inverse-γ weights.
pub fn average_power(factor: &SpectralFactor, receive: &DiskGrid, source: &DiskGrid) -> Result<f64> {
    let table = factor.tabulate(receive, source)?;
    Ok(average_power_table(&table, receive, source))
}

pub fn average_power_table(table: &FactorTable, receive: &DiskGrid, source: &DiskGrid) -> f64 {
    let m = &receive.medium;
    let half = 0.5 * m.kappa * m.eta;
    let pre = half * half / (2.0 * PI).powi(4);
    match table {
        FactorTable::Separable { receive: ar, source: as_ } => {
            let r: Vec<f64> = ar.iter().zip(&receive.nodes).map(|(a, n)| a * a * n.inv_gamma_weight).collect();
            let s: Vec<f64> = as_.iter().zip(&source.nodes).map(|(a, n)| a * a * n.inv_gamma_weight).collect();
            pre * pairwise_sum(&r) * pairwise_sum(&s)
        }
        FactorTable::Dense { n_source, values } => {
            let rows: Vec<f64> = receive
                .nodes
                .iter()
                .enumerate()
                .map(|(i, rn)| {
                    let row: Vec<f64> = source
                        .nodes
                        .iter()
                        .enumerate()
                        .map(|(j, sn)| {
                            let a = values[i * n_source + j];
                            a * a * sn.inv_gamma_weight
                        })
                        .collect();
                    pairwise_sum(&row) * rn.inv_gamma_weight
                })
                .collect();
            pre * pairwise_sum(&rows)
        }
    }
}

/// Power of a separable factor as a product of two hemisphere quadratures
/// (`n_theta × n_phi` midpoint cells each).
pub fn average_power_spherical(
    factor: &SpectralFactor,
    medium: &MediumParams,
    n_theta: usize,
    n_phi: usize,
) -> Result<f64> {
    let s2 = factor.scale * factor.scale;
    match &factor.form {
        FactorForm::IsotropicClosedForm => {
            let a = unit_power_isotropic_factor(medium);
            let per_sr = a * a / spherical_constant(medium);
            let omega = hemisphere_integral(n_theta, n_phi, |_| 1.0);
            Ok(s2 * per_sr * omega * omega)
        }
        FactorForm::Separable { source, receive } => {
            let ir = hemisphere_integral(n_theta, n_phi, |d| receive.density(d));
            let is = hemisphere_integral(n_theta, n_phi, |d| source.density(d));
            Ok(s2 * ir * is)
        }
        FactorForm::Coupled(_) => bail!(Domain, "spherical power path needs a separable factor"),
    }
}

/// Factor rescaled so that its power on the given grids equals `target`.
pub fn normalize_factor(
    factor: &SpectralFactor,
    receive: &DiskGrid,
    source: &DiskGrid,
    target: f64,
) -> Result<SpectralFactor> {
    if !(target > 0.0 && target.is_finite()) {
        bail!(Config, "target power {target} must be positive");
    }
    let p = average_power(factor, receive, source)?;
    if !(p > 0.0) {
        bail!(Domain, "cannot normalize a zero-power factor");
    }
    Ok(factor.scaled((target / p).sqrt()))
}

/// Disk-domain factor from a 6D (hemisphere) factor:
/// `A(k, κ) = A6(k̂, κ̂)/(2πκη)` sampled at the grid nodes.
/// `a6` receives `(receive direction, source direction)`.
pub fn factor_from_6d(
    a6: impl Fn(&Direction3, &Direction3) -> f64,
    receive: &DiskGrid,
    source: &DiskGrid,
) -> Result<SpectralFactor> {
    let m = &receive.medium;
    let c = 1.0 / (2.0 * PI * m.kappa * m.eta);
    let n = receive.len().saturating_mul(source.len());
    if n > MAX_COUPLED_ENTRIES {
        bail!(Resource, "coupled factor with {n} entries exceeds the 2^28 guard");
    }
    let dirs_s: Vec<Direction3> = (0..source.len()).map(|j| source.direction(j)).collect();
    let mut values = Vec::with_capacity(n);
    for i in 0..receive.len() {
        let dr = receive.direction(i);
        for ds in &dirs_s {
            let v = a6(&dr, ds);
            if !(v.is_finite() && v >= 0.0) {
                bail!(Domain, "6D factor must be finite and ≥ 0, got {v}");
            }
            values.push(c * v);
        }
    }
    SpectralFactor::coupled(receive.len(), source.len(), values)
}

/// Bound `P_h ≤ (κ²ηA/8)²` for a factor bounded by `A`.
pub fn mercer_power_bound(table: &FactorTable, medium: &MediumParams) -> f64 {
    mercer_bound_from_sup(table.sup(), medium)
}

pub fn mercer_bound_from_sup(sup: f64, medium: &MediumParams) -> f64 {
    (medium.kappa * medium.kappa * medium.eta * sup / 8.0).powi(2)
}

/// The same bound evaluated with `∬_D dk/γ = 2πκ`: `(κ²ηA/(4π))²`.
/// Tighter than [`mercer_bound_from_sup`] by `(π/2)²`.
pub fn disk_power_bound_from_sup(sup: f64, medium: &MediumParams) -> f64 {
    (medium.kappa * medium.kappa * medium.eta * sup / (4.0 * PI)).powi(2)
}

/// Ray set with gains normalized to sum to one.
pub fn discrete_factor_from_rays(rays: &[Ray]) -> Result<AngularDistribution> {
    if rays.is_empty() {
        bail!(Domain, "a ray set needs at least one ray");
    }
    if rays.iter().any(|r| !(r.gain.is_finite() && r.gain >= 0.0)) {
        bail!(Domain, "ray gains must be finite and ≥ 0");
    }
    for r in rays {
        if r.source.z < 0.0 || r.receive.z < 0.0 {
            bail!(Domain, "ray directions must lie on the upper hemisphere");
        }
    }
    let g: Vec<f64> = rays.iter().map(|r| r.gain).collect();
    let total = pairwise_sum(&g);
    if !(total > 0.0) {
        bail!(Domain, "ray gains sum to zero");
    }
    Ok(AngularDistribution::Discrete(rays.iter().map(|r| Ray { gain: r.gain / total, ..*r }).collect()))
}

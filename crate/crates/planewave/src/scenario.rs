//! Scenario files: JSON description of a synthesis run, presets, and the
//! resolved engine built from them. Lengths are in wavelengths; the medium
//! is built with `λ = 1`, and `wavelength_m` only labels outputs.

use std::path::Path;

use planewave_core::angular::{AngularDistribution, PiecewiseRegions, VmfComponent, VmfMixture};
use planewave_core::geometry::{Direction3, MediumParams, SpatialPoint};
use planewave_core::psd::{normalize_factor, SpectralFactor};
use planewave_core::spectral_support::{build_disk_grid, AngularRegion, AngularRegionSet, DiskGrid, GridMode};
use planewave_core::synthesis::{
    build_line_grid, synthesize_2d, BlockGains, ChannelRealization, Injection, LineMode, Model, PlanarCell,
    PlanarConfig, PlanarDensity, SynthesisConfig, Synthesizer,
};
use planewave_core::validation::Side;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{scenario_err, CliError, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Scenario {
    #[serde(default)]
    pub name: Option<String>,
    /// Physical wavelength in meters; recorded in manifests only.
    #[serde(default = "one")]
    pub wavelength_m: f64,
    #[serde(default = "one")]
    pub eta: f64,
    #[serde(default)]
    pub model: ModelSpec,
    #[serde(default)]
    pub receive: AngularSpec,
    #[serde(default)]
    pub source: AngularSpec,
    /// Dense spectral factor over (receive node, source node), row-major;
    /// replaces `receive`/`source` when present.
    #[serde(default)]
    pub coupled: Option<Vec<f64>>,
    #[serde(default)]
    pub grid: GridSpec,
    #[serde(default)]
    pub planar: PlanarSpec,
    #[serde(default = "default_line")]
    pub receivers: PointSpec,
    #[serde(default = "default_line")]
    pub sources: PointSpec,
    pub n_realizations: u64,
    #[serde(default)]
    pub seed: u64,
    #[serde(default)]
    pub reciprocity: bool,
    /// Evanescent test fixture; wavenumbers in units of κ.
    #[serde(default)]
    pub injection: Option<InjectionSpec>,
    #[serde(default)]
    pub acf: AcfSpec,
    #[serde(default)]
    pub angular: AngularGridSpec,
    #[serde(default)]
    pub validation: ValidationSpec,
    #[serde(default)]
    pub outputs: OutputSpec,
}

fn one() -> f64 {
    1.0
}

fn yes() -> bool {
    true
}

fn default_line() -> PointSpec {
    PointSpec::Line { n: 8, spacing: 0.25, origin: [0.0; 3], axis: Axis::X }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", deny_unknown_fields)]
pub enum ModelSpec {
    #[default]
    Scalar3d,
    Complete3d {
        #[serde(default)]
        gains: BlockGains,
    },
    Scalar2d,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", deny_unknown_fields)]
pub enum AngularSpec {
    #[default]
    Isotropic,
    Vmf(Vec<VmfSpec>),
    Regions(Vec<RegionSpec>),
}

/// One vMF cluster; give exactly one of `alpha` or `nu2`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct VmfSpec {
    pub theta_deg: f64,
    pub phi_deg: f64,
    #[serde(default)]
    pub alpha: Option<f64>,
    #[serde(default)]
    pub nu2: Option<f64>,
    #[serde(default)]
    pub weight: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", deny_unknown_fields)]
pub enum RegionSpec {
    Cap { theta_deg: f64, phi_deg: f64, half_angle_deg: f64 },
    Rect { theta_min_deg: f64, theta_max_deg: f64, phi_min_deg: f64, phi_max_deg: f64 },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GridSpec {
    #[serde(default = "polar")]
    pub mode: GridMode,
    #[serde(default = "res32")]
    pub receive: [usize; 2],
    #[serde(default = "res16")]
    pub source: [usize; 2],
    /// Rim strip width in units of κ.
    #[serde(default = "rim")]
    pub rim_cut: f64,
}

fn polar() -> GridMode {
    GridMode::Polar
}
fn res32() -> [usize; 2] {
    [32, 32]
}
fn res16() -> [usize; 2] {
    [16, 16]
}
fn rim() -> f64 {
    1e-3
}

impl Default for GridSpec {
    fn default() -> Self {
        Self { mode: polar(), receive: res32(), source: res16(), rim_cut: rim() }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PlanarSpec {
    #[serde(default = "cosine")]
    pub mode: LineMode,
    #[serde(default = "n64")]
    pub receive: usize,
    #[serde(default = "n64")]
    pub source: usize,
    #[serde(default)]
    pub density: PlanarDensitySpec,
}

fn cosine() -> LineMode {
    LineMode::CosineDirection
}
fn n64() -> usize {
    64
}

impl Default for PlanarSpec {
    fn default() -> Self {
        Self { mode: cosine(), receive: 64, source: 64, density: PlanarDensitySpec::Uniform }
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", deny_unknown_fields)]
pub enum PlanarDensitySpec {
    #[default]
    Uniform,
    /// Cells in radians over `[0, π]²`.
    Cells(Vec<PlanarCell>),
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Axis {
    #[default]
    X,
    Y,
    Z,
}

impl Axis {
    fn unit(self) -> [f64; 3] {
        match self {
            Axis::X => [1.0, 0.0, 0.0],
            Axis::Y => [0.0, 1.0, 0.0],
            Axis::Z => [0.0, 0.0, 1.0],
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", deny_unknown_fields)]
pub enum PointSpec {
    Line {
        n: usize,
        spacing: f64,
        #[serde(default)]
        origin: [f64; 3],
        #[serde(default)]
        axis: Axis,
    },
    /// `nx × ny` lattice in the plane `z = origin.z`, x fastest.
    Rectangle {
        nx: usize,
        ny: usize,
        spacing: f64,
        #[serde(default)]
        origin: [f64; 3],
    },
    Points(Vec<[f64; 3]>),
}

impl PointSpec {
    pub fn points(&self) -> Result<Vec<SpatialPoint>> {
        let at = |o: [f64; 3]| SpatialPoint::new(o[0], o[1], o[2]);
        let pts: Vec<SpatialPoint> = match self {
            PointSpec::Line { n, spacing, origin, axis } => {
                let u = axis.unit();
                (0..*n)
                    .map(|i| {
                        let d = i as f64 * spacing;
                        at([origin[0] + d * u[0], origin[1] + d * u[1], origin[2] + d * u[2]])
                    })
                    .collect()
            }
            PointSpec::Rectangle { nx, ny, spacing, origin } => (0..*ny)
                .flat_map(|j| (0..*nx).map(move |i| (i, j)))
                .map(|(i, j)| at([origin[0] + i as f64 * spacing, origin[1] + j as f64 * spacing, origin[2]]))
                .collect(),
            PointSpec::Points(list) => list.iter().copied().map(at).collect(),
        };
        if pts.is_empty() {
            return Err(scenario_err!("point set is empty"));
        }
        if pts.iter().any(|p| !p.is_finite()) {
            return Err(scenario_err!("point set has non-finite coordinates"));
        }
        Ok(pts)
    }

    /// Lags `k·spacing` along a line, `k = 0..n`.
    fn natural_lags(&self) -> Option<Vec<SpatialPoint>> {
        match self {
            PointSpec::Line { n, spacing, axis, .. } => {
                let u = axis.unit();
                Some((0..*n).map(|k| k as f64 * spacing).map(|d| SpatialPoint::new(d * u[0], d * u[1], d * u[2])).collect())
            }
            _ => None,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct InjectionSpec {
    pub kx: f64,
    #[serde(default)]
    pub ky: f64,
    #[serde(default = "one")]
    pub amplitude: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AcfSpec {
    #[serde(default = "receive_side")]
    pub side: Side,
    /// Lag vectors in wavelengths; defaults to the natural lags of a line.
    #[serde(default)]
    pub lags: Option<Vec<[f64; 3]>>,
}

fn receive_side() -> Side {
    Side::Receive
}

impl Default for AcfSpec {
    fn default() -> Self {
        Self { side: Side::Receive, lags: None }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AngularGridSpec {
    #[serde(default = "receive_side")]
    pub side: Side,
    #[serde(default = "n90")]
    pub n_theta: usize,
    #[serde(default = "n180")]
    pub n_phi: usize,
}

fn n90() -> usize {
    90
}
fn n180() -> usize {
    180
}

impl Default for AngularGridSpec {
    fn default() -> Self {
        Self { side: Side::Receive, n_theta: 90, n_phi: 180 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ValidationSpec {
    /// Realizations drawn for the Monte-Carlo checks.
    #[serde(default = "n1000")]
    pub n_realizations: u64,
}

fn n1000() -> u64 {
    1000
}

impl Default for ValidationSpec {
    fn default() -> Self {
        Self { n_realizations: 1000 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OutputSpec {
    #[serde(default = "yes")]
    pub csv: bool,
    /// Little-endian complex64 blob `[realization][receiver][source]`.
    #[serde(default = "yes")]
    pub blob: bool,
}

impl Default for OutputSpec {
    fn default() -> Self {
        Self { csv: true, blob: true }
    }
}

pub const PRESETS: &[&str] = &["isotropic", "fig8b", "fig8c"];

fn vmf(theta_deg: f64, phi_deg: f64, nu2: f64) -> VmfSpec {
    VmfSpec { theta_deg, phi_deg, alpha: None, nu2: Some(nu2), weight: None }
}

/// Built-in scenarios.
pub fn preset(name: &str) -> Result<Scenario> {
    let receive = match name {
        "isotropic" => AngularSpec::Isotropic,
        "fig8b" => AngularSpec::Vmf(vec![vmf(45.0, 0.0, 0.01)]),
        "fig8c" => AngularSpec::Vmf(vec![vmf(45.0, 0.0, 0.01), vmf(50.0, 90.0, 0.02), vmf(20.0, 130.0, 0.004)]),
        _ => return Err(scenario_err!("unknown preset {name:?} (expected one of {})", PRESETS.join(", "))),
    };
    Ok(Scenario {
        name: Some(name.to_owned()),
        wavelength_m: 1.0,
        eta: 1.0,
        model: ModelSpec::Scalar3d,
        receive,
        source: AngularSpec::Isotropic,
        coupled: None,
        grid: GridSpec::default(),
        planar: PlanarSpec::default(),
        receivers: default_line(),
        sources: default_line(),
        n_realizations: 100,
        seed: 0,
        reciprocity: false,
        injection: None,
        acf: AcfSpec::default(),
        angular: AngularGridSpec::default(),
        validation: ValidationSpec::default(),
        outputs: OutputSpec::default(),
    })
}

/// Reads and validates a scenario file; schema errors carry the field path.
pub fn parse_scenario(path: &Path) -> Result<Scenario> {
    let text = std::fs::read_to_string(path).map_err(CliError::io(path))?;
    parse_scenario_str(&text)
}

pub fn parse_scenario_str(text: &str) -> Result<Scenario> {
    let de = &mut serde_json::Deserializer::from_str(text);
    let sc: Scenario = serde_path_to_error::deserialize(de).map_err(|e| {
        let path = e.path().to_string();
        scenario_err!("at `{path}`: {}", e.into_inner())
    })?;
    sc.check()?;
    Ok(sc)
}

impl Scenario {
    fn check(&self) -> Result<()> {
        if self.n_realizations == 0 {
            return Err(scenario_err!("at `n_realizations`: must be at least 1"));
        }
        if !(self.wavelength_m.is_finite() && self.wavelength_m > 0.0) {
            return Err(scenario_err!("at `wavelength_m`: must be positive"));
        }
        if self.injection.is_some() && self.model != ModelSpec::Scalar3d {
            return Err(scenario_err!("at `injection`: only the scalar 3D model supports injection"));
        }
        if self.reciprocity && self.model != ModelSpec::Scalar3d {
            return Err(scenario_err!("at `reciprocity`: only the scalar 3D model supports reciprocity"));
        }
        Ok(())
    }

    /// SHA-256 of the canonical JSON form.
    pub fn digest(&self) -> String {
        let bytes = serde_json::to_vec(self).expect("scenario serializes");
        hex(&Sha256::digest(bytes))
    }

    pub fn medium(&self) -> Result<MediumParams> {
        Ok(MediumParams::with_eta(1.0, self.eta)?)
    }

    pub fn is_isotropic(&self, side: Side) -> bool {
        let spec = match side {
            Side::Receive => &self.receive,
            Side::Source => &self.source,
        };
        self.coupled.is_none() && *spec == AngularSpec::Isotropic && self.model != ModelSpec::Scalar2d
    }

    pub fn distribution(&self, side: Side) -> Result<AngularDistribution> {
        match side {
            Side::Receive => angular_distribution(&self.receive, "receive"),
            Side::Source => angular_distribution(&self.source, "source"),
        }
    }

    /// Lag vectors for the ACF of the given side.
    pub fn acf_lags(&self) -> Result<Vec<SpatialPoint>> {
        if let Some(l) = &self.acf.lags {
            return Ok(l.iter().map(|v| SpatialPoint::new(v[0], v[1], v[2])).collect());
        }
        let spec = match self.acf.side {
            Side::Receive => &self.receivers,
            Side::Source => &self.sources,
        };
        spec.natural_lags().ok_or_else(|| scenario_err!("at `acf.lags`: required unless the point set is a line"))
    }

    /// Builds the synthesis engine with the factor normalized to unit power.
    pub fn engine(&self) -> Result<Engine> {
        self.engine_with(|c| c)
    }

    /// As [`Scenario::engine`], letting the caller adjust the 3D configuration.
    pub fn engine_with(&self, tweak: impl FnOnce(SynthesisConfig) -> SynthesisConfig) -> Result<Engine> {
        let medium = self.medium()?;
        if self.model == ModelSpec::Scalar2d {
            let p = &self.planar;
            let rg = build_line_grid(&medium, p.mode, p.receive)?;
            let sg = build_line_grid(&medium, p.mode, p.source)?;
            let density = match &p.density {
                PlanarDensitySpec::Uniform => PlanarDensity::Uniform,
                PlanarDensitySpec::Cells(c) => PlanarDensity::Piecewise(c.clone()),
            };
            return Ok(Engine::Planar(Box::new(PlanarConfig::new(rg, sg, density, self.seed)?)));
        }
        let (rg, sg) = self.grids(&medium)?;
        let factor = self.factor(&rg, &sg)?;
        let mut cfg = SynthesisConfig::new(rg, sg, factor, self.seed)?.with_reciprocity(self.reciprocity);
        if let ModelSpec::Complete3d { gains } = &self.model {
            cfg = cfg.with_model(Model::Complete3D(*gains));
        }
        if let Some(inj) = self.injection {
            cfg = cfg.with_injection(Injection {
                kx: inj.kx * medium.kappa,
                ky: inj.ky * medium.kappa,
                amplitude: inj.amplitude,
            });
        }
        Ok(Engine::Spatial(Box::new(Synthesizer::new(tweak(cfg))?)))
    }

    pub fn grids(&self, medium: &MediumParams) -> Result<(DiskGrid, DiskGrid)> {
        let g = &self.grid;
        let rim = g.rim_cut * medium.kappa;
        let rg = build_disk_grid(medium, g.mode, (g.receive[0], g.receive[1]), rim)?;
        let sg = build_disk_grid(medium, g.mode, (g.source[0], g.source[1]), rim)?;
        Ok((rg, sg))
    }

    pub fn factor(&self, rg: &DiskGrid, sg: &DiskGrid) -> Result<SpectralFactor> {
        let raw = match &self.coupled {
            Some(values) => {
                if values.len() != rg.len() * sg.len() {
                    return Err(scenario_err!(
                        "at `coupled`: {} values for a {}×{} node grid",
                        values.len(),
                        rg.len(),
                        sg.len()
                    ));
                }
                SpectralFactor::coupled(rg.len(), sg.len(), values.clone())?
            }
            None if self.receive == AngularSpec::Isotropic && self.source == AngularSpec::Isotropic => {
                SpectralFactor::isotropic()
            }
            None => SpectralFactor::separable(self.distribution(Side::Source)?, self.distribution(Side::Receive)?)?,
        };
        Ok(normalize_factor(&raw, rg, sg, 1.0)?)
    }
}

fn angular_distribution(spec: &AngularSpec, field: &str) -> Result<AngularDistribution> {
    match spec {
        AngularSpec::Isotropic => Ok(AngularDistribution::Isotropic),
        AngularSpec::Vmf(list) => {
            if list.is_empty() {
                return Err(scenario_err!("at `{field}.vmf`: no components"));
            }
            let mut comps = Vec::with_capacity(list.len());
            let mut weights = Vec::with_capacity(list.len());
            for (i, c) in list.iter().enumerate() {
                let mu = Direction3::from_degrees(c.theta_deg, c.phi_deg)?;
                let comp = match (c.alpha, c.nu2) {
                    (Some(a), None) => VmfComponent::new(mu, a)?,
                    (None, Some(v)) => VmfComponent::from_variance(mu, v)?,
                    _ => return Err(scenario_err!("at `{field}.vmf[{i}]`: give exactly one of `alpha` or `nu2`")),
                };
                comps.push(comp);
                weights.push(c.weight.unwrap_or(1.0 / list.len() as f64));
            }
            Ok(AngularDistribution::Mixture(VmfMixture::new(comps, weights)?))
        }
        AngularSpec::Regions(list) => {
            let rad = f64::to_radians;
            let regions = list
                .iter()
                .map(|r| {
                    Ok(match *r {
                        RegionSpec::Cap { theta_deg, phi_deg, half_angle_deg } => AngularRegion::Cap {
                            center: Direction3::from_degrees(theta_deg, phi_deg)?,
                            half_angle: rad(half_angle_deg),
                        },
                        RegionSpec::Rect { theta_min_deg, theta_max_deg, phi_min_deg, phi_max_deg } => AngularRegion::Rect {
                            theta_min: rad(theta_min_deg),
                            theta_max: rad(theta_max_deg),
                            phi_min: rad(phi_min_deg),
                            phi_max: rad(phi_max_deg),
                        },
                    })
                })
                .collect::<Result<Vec<_>>>()?;
            Ok(AngularDistribution::Piecewise(PiecewiseRegions::new(AngularRegionSet::new(regions)?)?))
        }
    }
}

/// Resolved synthesis path of a scenario.
#[derive(Debug, Clone)]
pub enum Engine {
    Spatial(Box<Synthesizer>),
    Planar(Box<PlanarConfig>),
}

impl Engine {
    pub fn fingerprint(&self) -> u64 {
        match self {
            Engine::Spatial(s) => s.fingerprint(),
            Engine::Planar(p) => p.fingerprint(),
        }
    }

    /// Realizations `0..n` in order; parallel over realizations.
    pub fn realize_batch(&self, n: u64, rx: &[SpatialPoint], tx: &[SpatialPoint]) -> Result<Vec<ChannelRealization>> {
        use rayon::prelude::*;
        let entries = (n as u128) * (rx.len() as u128) * (tx.len() as u128);
        if entries > planewave_core::synthesis::MAX_SYNTHESIS_ENTRIES as u128 {
            return Err(planewave_core::Error::Resource(format!(
                "{n} realizations of a {}×{} channel exceed the {}-entry output guard",
                rx.len(),
                tx.len(),
                planewave_core::synthesis::MAX_SYNTHESIS_ENTRIES
            ))
            .into());
        }
        let out: std::result::Result<Vec<_>, planewave_core::Error> = match self {
            Engine::Spatial(s) => {
                let plan = s.plan(rx, tx)?;
                (0..n).into_par_iter().map(|t| plan.realize(t)).collect()
            }
            Engine::Planar(p) => (0..n).into_par_iter().map(|t| synthesize_2d(p, t, rx, tx)).collect(),
        };
        Ok(out?)
    }
}

pub fn hex(bytes: &[u8]) -> String {
    bytes.iter().map(|b| format!("{b:02x}")).collect()
}

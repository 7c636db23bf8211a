//! Monte-Carlo synthesis of channel realizations.
//!
//! A realization is the quadrature of the 4D plane-wave representation
//!
//! ```text
//! h(r, s) = 1/(2π)² Σ_i Σ_j a_r(k_i, r) · X_ij · a_s(κ_j, s)
//! X_ij    = H_a(k_i, κ_j) ω_i ω_j
//! H_a     = (κη/2) A_ij w_ij / (γ_i^{1/2} γ_j^{1/2}),   w_ij ~ CN(0, 1)
//! ω       = √(γ Γ),   Γ = ∫_cell dk/γ
//! ```
//!
//! `H_a` is the stationary angular response with unit-variance noise and
//! `ω ≈ √Δk` is the square-root cell weight, so that the variance per cell is
//! `∫_cell S/(2π)⁴` and the discrete covariance converges to the continuous
//! one. Using the exact cell integral `Γ` instead of `Δk/γ` keeps this true
//! next to the rim singularity.
//!
//! Noise comes from [`crate::rng`], so a realization depends only on
//! `(seed, realization index)`.

use alloc::vec;
use alloc::vec::Vec;
use core::f64::consts::{FRAC_1_SQRT_2, PI};

#[allow(unused_imports)] // inherent in `core` on recent toolchains
use num_traits::Float;

use crate::angular::Ray;
use crate::error::{bail, Result};
use crate::geometry::{green3, plane_wave_receive, plane_wave_source, MediumParams, SpatialPoint, WaveVector};
use crate::psd::{FactorTable, SpectralFactor};
use crate::rng::{block, NoiseKey};
use crate::spectral_support::DiskGrid;
use crate::C64;

/// Largest materialized node-pair grid or output matrix.
pub const MAX_SYNTHESIS_ENTRIES: usize = 1 << 26;

fn guard(a: usize, b: usize, what: &str) -> Result<usize> {
    match a.checked_mul(b) {
        Some(n) if n <= MAX_SYNTHESIS_ENTRIES => Ok(n),
        _ => bail!(Resource, "{what} with {a}×{b} entries exceeds the 2^26 guard"),
    }
}

/// Power split of the complete model; `h` has unit power when
/// `Σ gain² = 1` and the factor has unit power.
#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct BlockGains {
    pub up_up: f64,
    pub up_down: f64,
    pub down_up: f64,
    pub down_down: f64,
}

impl Default for BlockGains {
    fn default() -> Self {
        Self { up_up: 0.5, up_down: 0.5, down_up: 0.5, down_down: 0.5 }
    }
}

impl BlockGains {
    pub fn up_only() -> Self {
        Self { up_up: 1.0, up_down: 0.0, down_up: 0.0, down_down: 0.0 }
    }

    fn validate(&self) -> Result<()> {
        for g in [self.up_up, self.up_down, self.down_up, self.down_down] {
            if !(g.is_finite() && g >= 0.0) {
                bail!(Config, "block gains must be finite and ≥ 0, got {g}");
            }
        }
        Ok(())
    }

    /// `(tag, receive upgoing?, source upgoing?, gain)` in accumulation order.
    fn blocks(&self) -> [(u32, bool, bool, f64); 4] {
        [
            (block::UP_UP, true, true, self.up_up),
            (block::UP_DOWN, true, false, self.up_down),
            (block::DOWN_UP, false, true, self.down_up),
            (block::DOWN_DOWN, false, false, self.down_down),
        ]
    }
}

/// 3D channel model.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Model {
    Scalar3D,
    /// Upgoing/downgoing block model.
    Complete3D(BlockGains),
}

/// One evanescent plane wave added on the receive side,
/// `amplitude · w · e^{i(kx x + ky y)} e^{−|γ| z}` with `kx² + ky² > κ²`.
/// Breaks stationarity on purpose; used as a test fixture.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Injection {
    pub kx: f64,
    pub ky: f64,
    pub amplitude: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SynthesisConfig {
    pub medium: MediumParams,
    pub receive_grid: DiskGrid,
    pub source_grid: DiskGrid,
    pub factor: SpectralFactor,
    pub seed: u64,
    pub enforce_reciprocity: bool,
    pub model: Model,
    pub injection: Option<Injection>,
}

impl SynthesisConfig {
    /// Scalar model, reciprocity off, no injection.
    pub fn new(receive_grid: DiskGrid, source_grid: DiskGrid, factor: SpectralFactor, seed: u64) -> Result<Self> {
        if receive_grid.medium != source_grid.medium {
            bail!(Config, "source and receive grids use different media");
        }
        Ok(Self {
            medium: receive_grid.medium,
            receive_grid,
            source_grid,
            factor,
            seed,
            enforce_reciprocity: false,
            model: Model::Scalar3D,
            injection: None,
        })
    }

    pub fn with_reciprocity(mut self, on: bool) -> Self {
        self.enforce_reciprocity = on;
        self
    }

    pub fn with_model(mut self, model: Model) -> Self {
        self.model = model;
        self
    }

    pub fn with_injection(mut self, injection: Injection) -> Self {
        self.injection = Some(injection);
        self
    }
}

/// One draw of `H_a` on the node pairs, with square-root cell weights
/// `ω_i ω_j ≈ √(Δk_i Δκ_j)`.
#[derive(Debug, Clone, PartialEq)]
pub struct AngularResponseGrid {
    pub n_receive: usize,
    pub n_source: usize,
    /// Row-major over (receive node, source node).
    pub values: Vec<C64>,
    pub receive_weights: Vec<f64>,
    pub source_weights: Vec<f64>,
    pub seed: u64,
    pub realization: u64,
    pub block: u32,
}

impl AngularResponseGrid {
    /// Hand-built response on two grids.
    pub fn from_values(receive: &DiskGrid, source: &DiskGrid, values: Vec<C64>) -> Result<Self> {
        let n = guard(receive.len(), source.len(), "angular response")?;
        if values.len() != n {
            bail!(Config, "{} values for a {}×{} grid", values.len(), receive.len(), source.len());
        }
        Ok(Self {
            n_receive: receive.len(),
            n_source: source.len(),
            values,
            receive_weights: sqrt_weights(receive),
            source_weights: sqrt_weights(source),
            seed: 0,
            realization: 0,
            block: block::UP_UP,
        })
    }

    #[inline]
    pub fn get(&self, i: usize, j: usize) -> C64 {
        self.values[i * self.n_source + j]
    }

    #[inline]
    pub fn weight(&self, i: usize, j: usize) -> f64 {
        self.receive_weights[i] * self.source_weights[j]
    }
}

/// The four blocks `H_a^{++}, H_a^{+−}, H_a^{−+}, H_a^{−−}` (receive sign first).
#[derive(Debug, Clone, PartialEq)]
pub struct CompleteResponseGrid {
    pub blocks: [AngularResponseGrid; 4],
}

/// Channel matrix over (receive points × source points).
#[derive(Debug, Clone, PartialEq)]
pub struct ChannelRealization {
    /// Row-major: `h[r * n_sources + s]`.
    pub h: Vec<C64>,
    pub receivers: Vec<SpatialPoint>,
    pub sources: Vec<SpatialPoint>,
    pub seed: u64,
    pub realization: u64,
    pub config_hash: u64,
}

/// Point-matching tolerance relative to the wavelength.
const POINT_TOL: f64 = 1e-9;

impl ChannelRealization {
    #[inline]
    pub fn get(&self, r: usize, s: usize) -> C64 {
        self.h[r * self.sources.len() + s]
    }

    pub fn n_receivers(&self) -> usize {
        self.receivers.len()
    }

    pub fn n_sources(&self) -> usize {
        self.sources.len()
    }

    pub fn find_receiver(&self, p: &SpatialPoint, tol: f64) -> Option<usize> {
        self.receivers.iter().position(|q| q.approx_eq(p, tol))
    }

    pub fn find_source(&self, p: &SpatialPoint, tol: f64) -> Option<usize> {
        self.sources.iter().position(|q| q.approx_eq(p, tol))
    }

    /// `h(r, s)` at evaluated points.
    pub fn value_at(&self, r: &SpatialPoint, s: &SpatialPoint, tol: f64) -> Result<C64> {
        let Some(i) = self.find_receiver(r, tol) else { bail!(Lookup, "receiver {r:?} not evaluated") };
        let Some(j) = self.find_source(s, tol) else { bail!(Lookup, "source {s:?} not evaluated") };
        Ok(self.get(i, j))
    }

    fn check_finite(self) -> Result<Self> {
        if self.h.iter().any(|v| !(v.re.is_finite() && v.im.is_finite())) {
            bail!(Domain, "non-finite channel entry (evanescent growth?)");
        }
        Ok(self)
    }
}

/// Location-dependent impulse response `c(r, p) = h(r, r − p)`, looked up
/// in an evaluated realization.
pub fn lsv_impulse_response(real: &ChannelRealization, r: &SpatialPoint, p: &SpatialPoint, tol: f64) -> Result<C64> {
    real.value_at(r, &(*r - *p), tol)
}

/// `c(r, p)` of the deterministic line-of-sight kernel `−iκη g(p)`.
pub fn freespace_impulse_response(_r: &SpatialPoint, p: &SpatialPoint, medium: &MediumParams) -> Result<C64> {
    Ok(C64::new(0.0, -medium.kappa * medium.eta) * green3(p, medium)?)
}

/// Deterministic line-of-sight channel `h(r, s) = −iκη g(r − s)`.
pub fn freespace_reference(
    sources: &[SpatialPoint],
    receivers: &[SpatialPoint],
    medium: &MediumParams,
) -> Result<ChannelRealization> {
    guard(receivers.len(), sources.len(), "channel matrix")?;
    let mut h = Vec::with_capacity(receivers.len() * sources.len());
    for r in receivers {
        for s in sources {
            h.push(freespace_impulse_response(r, &(*r - *s), medium)?);
        }
    }
    Ok(ChannelRealization {
        h,
        receivers: receivers.to_vec(),
        sources: sources.to_vec(),
        seed: 0,
        realization: 0,
        config_hash: 0,
    })
}

/// FNV-1a accumulator used for config fingerprints.
#[derive(Debug, Clone, Copy)]
pub struct Fnv(u64);

impl Default for Fnv {
    fn default() -> Self {
        Self(0xcbf2_9ce4_8422_2325)
    }
}

impl Fnv {
    pub fn bytes(mut self, b: &[u8]) -> Self {
        for &x in b {
            self.0 ^= x as u64;
            self.0 = self.0.wrapping_mul(0x0100_0000_01b3);
        }
        self
    }

    pub fn u64(self, v: u64) -> Self {
        self.bytes(&v.to_le_bytes())
    }

    pub fn f64(self, v: f64) -> Self {
        self.u64(v.to_bits())
    }

    pub fn finish(self) -> u64 {
        self.0
    }
}

fn hash_grid(mut f: Fnv, g: &DiskGrid) -> Fnv {
    f = f.u64(g.len() as u64);
    for n in &g.nodes {
        f = f.f64(n.kx).f64(n.ky).f64(n.weight).f64(n.inv_gamma_weight);
    }
    f
}

/// Square-root cell weights `√(γ Γ)`.
fn sqrt_weights(grid: &DiskGrid) -> Vec<f64> {
    grid.nodes.iter().map(|n| (n.gamma * n.inv_gamma_weight).sqrt()).collect()
}

/// Receive plane waves, `P_r × M` row-major.
fn receive_matrix(grid: &DiskGrid, points: &[SpatialPoint], up: bool) -> Vec<C64> {
    let mut out = Vec::with_capacity(points.len() * grid.len());
    for p in points {
        for n in &grid.nodes {
            let g = if up { n.gamma } else { -n.gamma };
            out.push(plane_wave_receive(&WaveVector { kx: n.kx, ky: n.ky, kz: C64::new(g, 0.0) }, p));
        }
    }
    out
}

/// Source plane waves, `M × P_s` row-major.
fn source_matrix(grid: &DiskGrid, points: &[SpatialPoint], up: bool) -> Vec<C64> {
    let mut out = Vec::with_capacity(points.len() * grid.len());
    for n in &grid.nodes {
        let g = if up { n.gamma } else { -n.gamma };
        let k = WaveVector { kx: n.kx, ky: n.ky, kz: C64::new(g, 0.0) };
        for p in points {
            out.push(plane_wave_source(&k, p));
        }
    }
    out
}

/// `h[r, s] += Σ_i a_r[r, i] Σ_j X[i, j] a_s[j, s]`, one receive node at a
/// time; `fill(i, row)` writes `X[i, ·]`.
#[allow(clippy::too_many_arguments)]
fn accumulate(
    h: &mut [C64],
    ar: &[C64],
    as_: &[C64],
    m_r: usize,
    m_s: usize,
    p_r: usize,
    p_s: usize,
    mut fill: impl FnMut(usize, &mut [C64]),
) {
    let mut x = vec![C64::new(0.0, 0.0); m_s];
    let mut y = vec![C64::new(0.0, 0.0); p_s];
    for i in 0..m_r {
        fill(i, &mut x);
        y.iter_mut().for_each(|v| *v = C64::new(0.0, 0.0));
        for (j, xj) in x.iter().enumerate() {
            let row = &as_[j * p_s..(j + 1) * p_s];
            for (ys, a) in y.iter_mut().zip(row) {
                *ys += xj * a;
            }
        }
        for r in 0..p_r {
            let a = ar[r * m_r + i];
            for (hs, ys) in h[r * p_s..(r + 1) * p_s].iter_mut().zip(&y) {
                *hs += a * ys;
            }
        }
    }
}

const INV_4PI2: f64 = 1.0 / (4.0 * PI * PI);

/// Draws angular responses and evaluates channel realizations for one
/// configuration.
#[derive(Debug, Clone)]
pub struct Synthesizer {
    config: SynthesisConfig,
    table: FactorTable,
    /// `(κη/2)/√γ_i` per receive node.
    c_r: Vec<f64>,
    /// `1/√γ_j` per source node.
    c_s: Vec<f64>,
    w_r: Vec<f64>,
    w_s: Vec<f64>,
    negation: Option<Vec<usize>>,
    fingerprint: u64,
}

impl Synthesizer {
    pub fn new(config: SynthesisConfig) -> Result<Self> {
        let (rg, sg) = (&config.receive_grid, &config.source_grid);
        if rg.medium != config.medium || sg.medium != config.medium {
            bail!(Config, "grids and configuration use different media");
        }
        if rg.is_empty() || sg.is_empty() {
            bail!(Config, "empty disk grid");
        }
        let table = config.factor.tabulate(rg, sg)?;
        let negation = if config.enforce_reciprocity {
            if !matches!(config.model, Model::Scalar3D) {
                bail!(Config, "reciprocity enforcement is implemented for the scalar model only");
            }
            if rg != sg {
                bail!(Config, "reciprocity needs identical source and receive grids");
            }
            let Some(neg) = rg.negation_map() else {
                bail!(Config, "grid is not closed under k → −k; cannot enforce reciprocity")
            };
            for i in 0..rg.len() {
                for j in 0..sg.len() {
                    let (a, b) = (table.get(i, j), table.get(neg[j], neg[i]));
                    if (a - b).abs() > 1e-9 * a.abs().max(b.abs()) {
                        bail!(Config, "spectral factor is not symmetric under (k, κ) → (−κ, −k)");
                    }
                }
            }
            guard(rg.len(), sg.len(), "reciprocal noise grid")?;
            Some(neg)
        } else {
            None
        };
        if let Model::Complete3D(g) = &config.model {
            g.validate()?;
        }
        if let Some(inj) = &config.injection {
            if inj.kx.hypot(inj.ky) <= config.medium.kappa {
                bail!(Config, "injected node must lie outside the propagating disk");
            }
        }
        let m = &config.medium;
        let half = 0.5 * m.kappa * m.eta;
        let c_r = rg.nodes.iter().map(|n| half / n.gamma.sqrt()).collect();
        let c_s = sg.nodes.iter().map(|n| 1.0 / n.gamma.sqrt()).collect();
        let (w_r, w_s) = (sqrt_weights(rg), sqrt_weights(sg));
        let mut f = Fnv::default().f64(m.lambda).f64(m.eta).u64(config.seed).u64(config.enforce_reciprocity as u64);
        f = hash_grid(hash_grid(f, rg), sg);
        for i in 0..rg.len() {
            for j in 0..sg.len() {
                f = f.f64(table.get(i, j));
            }
        }
        if let Model::Complete3D(g) = &config.model {
            f = f.f64(g.up_up).f64(g.up_down).f64(g.down_up).f64(g.down_down);
        }
        if let Some(inj) = &config.injection {
            f = f.f64(inj.kx).f64(inj.ky).f64(inj.amplitude);
        }
        Ok(Self { fingerprint: f.finish(), config, table, c_r, c_s, w_r, w_s, negation })
    }

    pub fn config(&self) -> &SynthesisConfig {
        &self.config
    }

    /// Hash of everything that determines the output distribution and seed path.
    pub fn fingerprint(&self) -> u64 {
        self.fingerprint
    }

    pub fn factor_table(&self) -> &FactorTable {
        &self.table
    }

    /// Standard deviation of `H_a` at node pair `(i, j)`.
    #[inline]
    fn amp(&self, i: usize, j: usize) -> f64 {
        self.c_r[i] * self.c_s[j] * self.table.get(i, j)
    }

    #[inline]
    fn cell(&self, i: usize, j: usize) -> f64 {
        self.w_r[i] * self.w_s[j]
    }

    /// Reciprocity-symmetrized noise matrix for one block.
    fn symmetric_noise(&self, key: NoiseKey, neg: &[usize]) -> Vec<C64> {
        let m = neg.len();
        let mut w = Vec::with_capacity(m * m);
        for i in 0..m {
            let mut row = key.row(i as u64);
            for _ in 0..m {
                w.push(row.next_cn());
            }
        }
        let mut out = w.clone();
        for i in 0..m {
            for j in 0..m {
                let (pi, pj) = (neg[j], neg[i]);
                if (pi, pj) == (i, j) {
                    continue;
                }
                // Canonical order so both members of a pair get identical bits.
                let (a, b) = if (i, j) < (pi, pj) { (w[i * m + j], w[pi * m + pj]) } else { (w[pi * m + pj], w[i * m + j]) };
                out[i * m + j] = (a + b) * FRAC_1_SQRT_2;
            }
        }
        out
    }

    fn response_block(&self, realization: u64, tag: u32, gain: f64) -> Result<AngularResponseGrid> {
        let (m_r, m_s) = (self.config.receive_grid.len(), self.config.source_grid.len());
        let n = guard(m_r, m_s, "angular response")?;
        let key = NoiseKey::new(self.config.seed, realization, tag);
        let mut values = Vec::with_capacity(n);
        match &self.negation {
            Some(neg) => {
                let w = self.symmetric_noise(key, neg);
                for i in 0..m_r {
                    for j in 0..m_s {
                        // Use the canonical pair's amplitude so the symmetry is bitwise.
                        let (pi, pj) = (neg[j], neg[i]);
                        let (ci, cj) = if (i, j) <= (pi, pj) { (i, j) } else { (pi, pj) };
                        values.push(w[i * m_s + j] * self.amp(ci, cj));
                    }
                }
            }
            None => {
                for i in 0..m_r {
                    let mut row = key.row(i as u64);
                    for j in 0..m_s {
                        values.push(row.next_cn() * (self.amp(i, j) * gain));
                    }
                }
            }
        }
        Ok(AngularResponseGrid {
            n_receive: m_r,
            n_source: m_s,
            values,
            receive_weights: self.w_r.clone(),
            source_weights: self.w_s.clone(),
            seed: self.config.seed,
            realization,
            block: tag,
        })
    }

    /// `H_a` for the scalar model (the `++` noise block).
    pub fn draw_angular_response(&self, realization: u64) -> Result<AngularResponseGrid> {
        self.response_block(realization, block::UP_UP, 1.0)
    }

    /// All four blocks of the complete model, scaled by their gains.
    pub fn draw_complete_response(&self, realization: u64) -> Result<CompleteResponseGrid> {
        let g = match self.config.model {
            Model::Complete3D(g) => g,
            Model::Scalar3D => bail!(Config, "configuration is not a complete model"),
        };
        let [a, b, c, d] = g.blocks();
        Ok(CompleteResponseGrid {
            blocks: [
                self.response_block(realization, a.0, a.3)?,
                self.response_block(realization, b.0, b.3)?,
                self.response_block(realization, c.0, c.3)?,
                self.response_block(realization, d.0, d.3)?,
            ],
        })
    }

    /// Precomputes the plane-wave matrices for fixed point sets.
    pub fn plan(&self, receivers: &[SpatialPoint], sources: &[SpatialPoint]) -> Result<Plan<'_>> {
        if receivers.iter().chain(sources).any(|p| !p.is_finite()) {
            bail!(Domain, "non-finite point");
        }
        guard(receivers.len(), sources.len(), "channel matrix")?;
        let (rg, sg) = (&self.config.receive_grid, &self.config.source_grid);
        guard(receivers.len(), rg.len(), "receive plane-wave matrix")?;
        guard(sources.len(), sg.len(), "source plane-wave matrix")?;
        let complete = matches!(self.config.model, Model::Complete3D(_));
        Ok(Plan {
            synth: self,
            receivers: receivers.to_vec(),
            sources: sources.to_vec(),
            ar_up: receive_matrix(rg, receivers, true),
            as_up: source_matrix(sg, sources, true),
            ar_down: if complete { receive_matrix(rg, receivers, false) } else { Vec::new() },
            as_down: if complete { source_matrix(sg, sources, false) } else { Vec::new() },
        })
    }

    /// One realization on the given point sets.
    pub fn realize(&self, realization: u64, receivers: &[SpatialPoint], sources: &[SpatialPoint]) -> Result<ChannelRealization> {
        self.plan(receivers, sources)?.realize(realization)
    }

    /// On-demand `c(r, p) = h(r, r − p)` for one realization.
    pub fn impulse_response(&self, realization: u64, r: &SpatialPoint, p: &SpatialPoint) -> Result<C64> {
        Ok(self.realize(realization, &[*r], &[*r - *p])?.h[0])
    }
}

/// Plane-wave matrices of a [`Synthesizer`] on fixed point sets.
#[derive(Debug, Clone)]
pub struct Plan<'a> {
    synth: &'a Synthesizer,
    receivers: Vec<SpatialPoint>,
    sources: Vec<SpatialPoint>,
    ar_up: Vec<C64>,
    as_up: Vec<C64>,
    ar_down: Vec<C64>,
    as_down: Vec<C64>,
}

impl Plan<'_> {
    pub fn receivers(&self) -> &[SpatialPoint] {
        &self.receivers
    }

    pub fn sources(&self) -> &[SpatialPoint] {
        &self.sources
    }

    /// Streams the noise row by row; never materializes `H_a` unless
    /// reciprocity is enforced.
    pub fn realize(&self, realization: u64) -> Result<ChannelRealization> {
        let s = self.synth;
        let cfg = &s.config;
        let (m_r, m_s) = (cfg.receive_grid.len(), cfg.source_grid.len());
        let (p_r, p_s) = (self.receivers.len(), self.sources.len());
        let mut h = vec![C64::new(0.0, 0.0); p_r * p_s];
        match (&cfg.model, &s.negation) {
            (Model::Scalar3D, Some(_)) => {
                let grid = s.draw_angular_response(realization)?;
                accumulate(&mut h, &self.ar_up, &self.as_up, m_r, m_s, p_r, p_s, |i, x| {
                    for (j, xj) in x.iter_mut().enumerate() {
                        *xj = grid.get(i, j) * grid.weight(i, j);
                    }
                });
            }
            (Model::Scalar3D, None) => {
                let key = NoiseKey::new(cfg.seed, realization, block::UP_UP);
                accumulate(&mut h, &self.ar_up, &self.as_up, m_r, m_s, p_r, p_s, |i, x| {
                    let mut row = key.row(i as u64);
                    for (j, xj) in x.iter_mut().enumerate() {
                        *xj = (row.next_cn() * s.amp(i, j)) * s.cell(i, j);
                    }
                });
            }
            (Model::Complete3D(g), _) => {
                for (tag, r_up, s_up, gain) in g.blocks() {
                    if gain == 0.0 {
                        continue;
                    }
                    let ar = if r_up { &self.ar_up } else { &self.ar_down };
                    let as_ = if s_up { &self.as_up } else { &self.as_down };
                    let key = NoiseKey::new(cfg.seed, realization, tag);
                    accumulate(&mut h, ar, as_, m_r, m_s, p_r, p_s, |i, x| {
                        let mut row = key.row(i as u64);
                        for (j, xj) in x.iter_mut().enumerate() {
                            *xj = (row.next_cn() * (s.amp(i, j) * gain)) * s.cell(i, j);
                        }
                    });
                }
            }
        }
        h.iter_mut().for_each(|v| *v *= INV_4PI2);
        if let Some(inj) = &cfg.injection {
            let w = NoiseKey::new(cfg.seed, realization, block::INJECTION).at(0, 0) * inj.amplitude;
            let k = WaveVector::new(inj.kx, inj.ky, &cfg.medium);
            for (r, pt) in self.receivers.iter().enumerate() {
                let a = w * plane_wave_receive(&k, pt);
                h[r * p_s..(r + 1) * p_s].iter_mut().for_each(|v| *v += a);
            }
        }
        ChannelRealization {
            h,
            receivers: self.receivers.clone(),
            sources: self.sources.clone(),
            seed: cfg.seed,
            realization,
            config_hash: s.fingerprint,
        }
        .check_finite()
    }
}

/// Evaluates a materialized (upgoing) response:
/// `h = 1/(2π)² Σ a_r H_a a_s ω_i ω_j`.
pub fn synthesize(
    responses: &AngularResponseGrid,
    receive_grid: &DiskGrid,
    source_grid: &DiskGrid,
    receivers: &[SpatialPoint],
    sources: &[SpatialPoint],
) -> Result<ChannelRealization> {
    if responses.n_receive != receive_grid.len() || responses.n_source != source_grid.len() {
        bail!(Config, "response grid does not match the disk grids");
    }
    if receivers.iter().chain(sources).any(|p| !p.is_finite()) {
        bail!(Domain, "non-finite point");
    }
    let (p_r, p_s) = (receivers.len(), sources.len());
    guard(p_r, p_s, "channel matrix")?;
    let ar = receive_matrix(receive_grid, receivers, true);
    let as_ = source_matrix(source_grid, sources, true);
    let mut h = vec![C64::new(0.0, 0.0); p_r * p_s];
    accumulate(&mut h, &ar, &as_, responses.n_receive, responses.n_source, p_r, p_s, |i, x| {
        for (j, xj) in x.iter_mut().enumerate() {
            *xj = responses.get(i, j) * responses.weight(i, j);
        }
    });
    h.iter_mut().for_each(|v| *v *= INV_4PI2);
    ChannelRealization {
        h,
        receivers: receivers.to_vec(),
        sources: sources.to_vec(),
        seed: responses.seed,
        realization: responses.realization,
        config_hash: 0,
    }
    .check_finite()
}

fn node_index(grid: &DiskGrid, kx: f64, ky: f64) -> Result<usize> {
    let tol = 1e-9 * grid.medium.kappa;
    match grid.find(kx, ky, tol) {
        Some(i) => Ok(i),
        None => bail!(Domain, "({kx}, {ky}) is not a node of the disk grid"),
    }
}

/// Spectral response `H_a(k, κ) e^{iγ(k) r_z} e^{−iγ(κ) s_z}` at a node pair.
#[allow(clippy::too_many_arguments)]
pub fn spectral_response(
    responses: &AngularResponseGrid,
    receive_grid: &DiskGrid,
    source_grid: &DiskGrid,
    k: (f64, f64),
    kappa: (f64, f64),
    r_z: f64,
    s_z: f64,
) -> Result<C64> {
    let i = node_index(receive_grid, k.0, k.1)?;
    let j = node_index(source_grid, kappa.0, kappa.1)?;
    let phase = receive_grid.nodes[i].gamma * r_z - source_grid.nodes[j].gamma * s_z;
    Ok(responses.get(i, j) * C64::from_polar(1.0, phase))
}

/// Spatial-frequency response of the impulse response,
/// `C(k, κ; r_z, s_z) = H(k − κ, −κ; r_z, r_z − s_z)`.
#[allow(clippy::too_many_arguments)]
pub fn system_function_shift(
    responses: &AngularResponseGrid,
    receive_grid: &DiskGrid,
    source_grid: &DiskGrid,
    k: (f64, f64),
    kappa: (f64, f64),
    r_z: f64,
    s_z: f64,
) -> Result<C64> {
    spectral_response(
        responses,
        receive_grid,
        source_grid,
        (k.0 - kappa.0, k.1 - kappa.1),
        (-kappa.0, -kappa.1),
        r_z,
        r_z - s_z,
    )
}

/// Discrete inverse of the 4D representation on planar point sets:
/// `H(k, κ) ≈ 1/(2π)² Σ_r Σ_s e^{−ik·r} h(r, s) e^{iκ·s} ΔA_r ΔA_s`.
/// Only the transverse coordinates of the points are used.
pub fn forward_transform_4d(real: &ChannelRealization, cell_r: f64, cell_s: f64, k: (f64, f64), kappa: (f64, f64)) -> C64 {
    let er: Vec<C64> = real.receivers.iter().map(|p| C64::from_polar(1.0, -(k.0 * p.x + k.1 * p.y))).collect();
    let es: Vec<C64> = real.sources.iter().map(|p| C64::from_polar(1.0, kappa.0 * p.x + kappa.1 * p.y)).collect();
    let mut acc = C64::new(0.0, 0.0);
    for (r, a) in er.iter().enumerate() {
        let mut row = C64::new(0.0, 0.0);
        for (s, b) in es.iter().enumerate() {
            row += real.get(r, s) * b;
        }
        acc += a * row;
    }
    acc * (cell_r * cell_s * INV_4PI2)
}

/// Mixed system function `C(r, κ; s_z) = Σ_p c(r, p) e^{iκ·p} ΔA`,
/// with `c(r, p) = h(r, r − p)` and `p` running over `r − sources`.
pub fn mixed_receive_response(real: &ChannelRealization, r_index: usize, kappa: (f64, f64), cell_s: f64) -> Result<C64> {
    if r_index >= real.receivers.len() {
        bail!(Lookup, "receiver index {r_index} out of range");
    }
    let r = real.receivers[r_index];
    let mut acc = C64::new(0.0, 0.0);
    for (j, s) in real.sources.iter().enumerate() {
        let p = r - *s;
        acc += real.get(r_index, j) * C64::from_polar(1.0, kappa.0 * p.x + kappa.1 * p.y);
    }
    Ok(acc * cell_s)
}

/// Mixed system function `C(k, p; r_z) = Σ_r c(r, p) e^{−ik·r} ΔA`
/// over all receivers; every `r − p` must be an evaluated source.
pub fn mixed_source_response(real: &ChannelRealization, k: (f64, f64), p: &SpatialPoint, cell_r: f64) -> Result<C64> {
    let tol = POINT_TOL * real.receivers.iter().map(|q| q.norm()).fold(1.0, f64::max);
    let mut acc = C64::new(0.0, 0.0);
    for (i, r) in real.receivers.iter().enumerate() {
        let Some(j) = real.find_source(&(*r - *p), tol) else {
            bail!(Lookup, "source point r − p missing for receiver {i}")
        };
        acc += real.get(i, j) * C64::from_polar(1.0, -(k.0 * r.x + k.1 * r.y));
    }
    Ok(acc * cell_r)
}

/// Finite ray sum `h = Σ_j √Γ_j e^{iφ_j} a_r(κ r̂_j, r) a_s(κ ŝ_j, s)` with
/// i.i.d. uniform phases.
pub fn synthesize_rays(
    rays: &[Ray],
    medium: &MediumParams,
    seed: u64,
    realization: u64,
    receivers: &[SpatialPoint],
    sources: &[SpatialPoint],
) -> Result<ChannelRealization> {
    if rays.is_empty() {
        bail!(Config, "empty ray set");
    }
    let (p_r, p_s) = (receivers.len(), sources.len());
    guard(p_r, p_s, "channel matrix")?;
    let mut row = NoiseKey::new(seed, realization, block::RAY_PHASE).row(0);
    let mut h = vec![C64::new(0.0, 0.0); p_r * p_s];
    let mut fp = Fnv::default().f64(medium.lambda).u64(seed);
    for ray in rays {
        if !(ray.gain.is_finite() && ray.gain >= 0.0) {
            bail!(Config, "ray gains must be finite and ≥ 0");
        }
        fp = fp.f64(ray.gain).f64(ray.source.x).f64(ray.source.y).f64(ray.receive.x).f64(ray.receive.y);
        let c = row.next_phase() * ray.gain.sqrt();
        let kr = WaveVector::from_direction(ray.receive, medium);
        let ks = WaveVector::from_direction(ray.source, medium);
        let as_: Vec<C64> = sources.iter().map(|s| plane_wave_source(&ks, s)).collect();
        for (r, pt) in receivers.iter().enumerate() {
            let a = c * plane_wave_receive(&kr, pt);
            for (hs, b) in h[r * p_s..(r + 1) * p_s].iter_mut().zip(&as_) {
                *hs += a * b;
            }
        }
    }
    ChannelRealization {
        h,
        receivers: receivers.to_vec(),
        sources: sources.to_vec(),
        seed,
        realization,
        config_hash: fp.finish(),
    }
    .check_finite()
}

// ---------------------------------------------------------------- 2D model

/// Parametrization of the 1D support `|k_x| ≤ κ`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(rename_all = "snake_case"))]
pub enum LineMode {
    /// Uniform in `θ`, `k_x = κ cosθ`.
    Polar,
    /// Uniform in `k_x`.
    CosineDirection,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LineNode {
    pub kx: f64,
    pub gamma: f64,
    /// Elevation from the x axis, `k_x = κ cosθ`.
    pub theta: f64,
    /// `Δk_x`.
    pub weight: f64,
    /// `∫_cell dk_x/γ = Δθ` (exact).
    pub inv_gamma_weight: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct LineGrid {
    pub medium: MediumParams,
    pub mode: LineMode,
    pub nodes: Vec<LineNode>,
}

impl LineGrid {
    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }
}

/// `n` cells over `θ ∈ [0, π]`. Either mode gives `Σ Δθ = π` exactly up to
/// rounding: cosine-direction cells use the exact `asin` differences, which
/// lump the rim singularity into the two edge cells.
pub fn build_line_grid(medium: &MediumParams, mode: LineMode, n: usize) -> Result<LineGrid> {
    if n < 2 || n % 2 != 0 {
        bail!(Config, "line grids need an even number ≥ 2 of cells, got {n}");
    }
    let k = medium.kappa;
    let mut nodes = Vec::with_capacity(n);
    match mode {
        LineMode::Polar => {
            let dt = PI / n as f64;
            for m in 0..n / 2 {
                let (lo, hi) = (m as f64 * dt, (m + 1) as f64 * dt);
                let t = 0.5 * (lo + hi);
                nodes.push(LineNode {
                    kx: k * t.cos(),
                    gamma: k * t.sin(),
                    theta: t,
                    weight: k * (lo.cos() - hi.cos()),
                    inv_gamma_weight: dt,
                });
            }
        }
        LineMode::CosineDirection => {
            let h = 2.0 * k / n as f64;
            for m in 0..n / 2 {
                // Cells on kx ≥ 0 from the rim inwards.
                let (hi, lo) = (k - m as f64 * h, k - (m + 1) as f64 * h);
                let kx = 0.5 * (lo + hi);
                let igw = (hi / k).min(1.0).asin() - (lo / k).asin();
                nodes.push(LineNode {
                    kx,
                    gamma: (k * k - kx * kx).sqrt(),
                    theta: (kx / k).acos(),
                    weight: h,
                    inv_gamma_weight: igw,
                });
            }
        }
    }
    // Mirror half: θ → π − θ, k_x → −k_x exactly.
    for m in (0..n / 2).rev() {
        let mut c = nodes[m];
        c.kx = -c.kx;
        c.theta = PI - c.theta;
        nodes.push(c);
    }
    Ok(LineGrid { medium: *medium, mode, nodes })
}

/// Rectangle in `(θ_r, θ_s)` with constant density.
#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct PlanarCell {
    pub theta_r: (f64, f64),
    pub theta_s: (f64, f64),
    /// Relative density level (normalized by [`PlanarConfig::new`]).
    pub level: f64,
}

/// Angular density `p(θ_r, θ_s)` on `[0, π]²`.
#[derive(Debug, Clone, PartialEq)]
pub enum PlanarDensity {
    /// `p = 1/π²`.
    Uniform,
    /// Piecewise constant; overlapping cells add.
    Piecewise(Vec<PlanarCell>),
}

impl PlanarDensity {
    /// Unnormalized density value.
    pub fn value(&self, theta_r: f64, theta_s: f64) -> f64 {
        match self {
            PlanarDensity::Uniform => 1.0 / (PI * PI),
            PlanarDensity::Piecewise(cells) => cells
                .iter()
                .filter(|c| {
                    theta_r >= c.theta_r.0 && theta_r <= c.theta_r.1 && theta_s >= c.theta_s.0 && theta_s <= c.theta_s.1
                })
                .map(|c| c.level)
                .sum(),
        }
    }

    fn validate(&self) -> Result<()> {
        if let PlanarDensity::Piecewise(cells) = self {
            if cells.is_empty() {
                bail!(Config, "piecewise planar density without cells");
            }
            for c in cells {
                let ok = |(a, b): (f64, f64)| a.is_finite() && b.is_finite() && 0.0 <= a && a < b && b <= PI;
                if !ok(c.theta_r) || !ok(c.theta_s) || !(c.level.is_finite() && c.level >= 0.0) {
                    bail!(Config, "invalid planar density cell {c:?}");
                }
            }
        }
        Ok(())
    }
}

/// 2D (x, y) scalar model.
#[derive(Debug, Clone, PartialEq)]
pub struct PlanarConfig {
    pub medium: MediumParams,
    pub receive_grid: LineGrid,
    pub source_grid: LineGrid,
    pub density: PlanarDensity,
    pub seed: u64,
    /// `p` at node pairs, normalized so that `Σ p Δθ_r Δθ_s = 1`.
    table: Vec<f64>,
}

impl PlanarConfig {
    pub fn new(receive_grid: LineGrid, source_grid: LineGrid, density: PlanarDensity, seed: u64) -> Result<Self> {
        if receive_grid.medium != source_grid.medium {
            bail!(Config, "source and receive grids use different media");
        }
        density.validate()?;
        let n = guard(receive_grid.len(), source_grid.len(), "planar factor")?;
        let mut table = Vec::with_capacity(n);
        let mut mass = Vec::with_capacity(n);
        for r in &receive_grid.nodes {
            for s in &source_grid.nodes {
                let p = density.value(r.theta, s.theta);
                table.push(p);
                mass.push(p * r.inv_gamma_weight * s.inv_gamma_weight);
            }
        }
        let total = crate::special::pairwise_sum(&mass);
        if !(total > 0.0) {
            bail!(Config, "planar density has no mass on the grid");
        }
        table.iter_mut().for_each(|p| *p /= total);
        Ok(Self { medium: receive_grid.medium, receive_grid, source_grid, density, seed, table })
    }

    /// Normalized density at node pair `(i, j)`.
    pub fn density_at(&self, i: usize, j: usize) -> f64 {
        self.table[i * self.source_grid.len() + j]
    }

    /// Spectral factor `A = 2π √p /(κη/2)` at a node pair (unit power).
    pub fn factor_at(&self, i: usize, j: usize) -> f64 {
        2.0 * PI * self.density_at(i, j).sqrt() / (0.5 * self.medium.kappa * self.medium.eta)
    }

    pub fn fingerprint(&self) -> u64 {
        let mut f = Fnv::default().f64(self.medium.lambda).f64(self.medium.eta).u64(self.seed);
        for g in [&self.receive_grid, &self.source_grid] {
            for n in &g.nodes {
                f = f.f64(n.kx).f64(n.inv_gamma_weight);
            }
        }
        self.table.iter().fold(f, |f, p| f.f64(*p)).finish()
    }
}

/// 2D realization at points in the (x, y) plane (`z` ignored, `y ≥ 0` is
/// the propagation axis):
///
/// ```text
/// h = 1/(2π) Σ e^{i(k_x x + γ y)} X_ij e^{i(κ_x x' + γ y')},
/// X_ij = (κη/2) A_ij w_ij √(Δθ_i Δθ_j).
/// ```
pub fn synthesize_2d(
    config: &PlanarConfig,
    realization: u64,
    receivers: &[SpatialPoint],
    sources: &[SpatialPoint],
) -> Result<ChannelRealization> {
    if receivers.iter().chain(sources).any(|p| !p.is_finite()) {
        bail!(Domain, "non-finite point");
    }
    let (p_r, p_s) = (receivers.len(), sources.len());
    guard(p_r, p_s, "channel matrix")?;
    let (rg, sg) = (&config.receive_grid, &config.source_grid);
    let (m_r, m_s) = (rg.len(), sg.len());
    guard(p_r, m_r, "receive plane-wave matrix")?;
    guard(p_s, m_s, "source plane-wave matrix")?;
    let mut ar = Vec::with_capacity(p_r * m_r);
    for p in receivers {
        for n in &rg.nodes {
            ar.push(C64::from_polar(1.0, n.kx * p.x + n.gamma * p.y));
        }
    }
    let mut as_ = Vec::with_capacity(p_s * m_s);
    for n in &sg.nodes {
        for p in sources {
            as_.push(C64::from_polar(1.0, n.kx * p.x + n.gamma * p.y));
        }
    }
    let half = 0.5 * config.medium.kappa * config.medium.eta;
    let key = NoiseKey::new(config.seed, realization, block::PLANAR);
    let mut h = vec![C64::new(0.0, 0.0); p_r * p_s];
    accumulate(&mut h, &ar, &as_, m_r, m_s, p_r, p_s, |i, x| {
        let mut row = key.row(i as u64);
        let gi = rg.nodes[i].inv_gamma_weight;
        for (j, xj) in x.iter_mut().enumerate() {
            let a = half * config.factor_at(i, j) * (gi * sg.nodes[j].inv_gamma_weight).sqrt();
            *xj = row.next_cn() * a;
        }
    });
    let scale = 1.0 / (2.0 * PI);
    h.iter_mut().for_each(|v| *v *= scale);
    ChannelRealization {
        h,
        receivers: receivers.to_vec(),
        sources: sources.to_vec(),
        seed: config.seed,
        realization,
        config_hash: config.fingerprint(),
    }
    .check_finite()
}

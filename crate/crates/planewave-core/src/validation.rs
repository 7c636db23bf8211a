//! Estimators and oracles: empirical autocorrelations, the Clarke closed
//! form, stationarity and Gaussianity tests, Weyl-identity quadratures,
//! disk-integral and far-field checks.

use alloc::vec::Vec;
use core::f64::consts::{PI, SQRT_2};

#[allow(unused_imports)] // inherent in `core` on recent toolchains
use num_traits::Float;

use crate::error::{bail, Result};
use crate::geometry::{far_field_green, green2, green3, Direction3, MediumParams, SpatialPoint};
use crate::special::{gauss_legendre_on, hankel1_0, pairwise_sum, sinc};
use crate::spectral_support::{build_disk_grid, disk_inverse_gamma_integral, inverse_gamma_integral_exact, DiskGrid, GridMode};
use crate::synthesis::{ChannelRealization, PlanarConfig};
use crate::C64;

/// Clarke/Jakes spatial correlation `sinc(2R/λ)`.
pub fn clarke_acf(r: f64, medium: &MediumParams) -> f64 {
    sinc(2.0 * r.abs() / medium.lambda)
}

/// Which endpoint the lag displaces.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(rename_all = "lowercase"))]
pub enum Side {
    Receive,
    Source,
}

/// Normalized autocorrelation estimate.
#[derive(Debug, Clone, PartialEq)]
pub struct AcfEstimate {
    pub lags: Vec<SpatialPoint>,
    pub values: Vec<C64>,
    pub stderr: Vec<f64>,
    pub n_realizations: usize,
    /// Number of point pairs averaged per lag.
    pub n_pairs: Vec<usize>,
}

fn point_tol(points: &[SpatialPoint]) -> f64 {
    1e-9 * points.iter().map(|p| p.norm()).fold(1.0, f64::max)
}

/// All index pairs `(a, b)` with `p_b − p_a = lag`.
fn lag_pairs(points: &[SpatialPoint], lag: &SpatialPoint) -> Vec<(usize, usize)> {
    let tol = point_tol(points);
    let mut out = Vec::new();
    for (a, pa) in points.iter().enumerate() {
        let target = *pa + *lag;
        if let Some(b) = points.iter().position(|q| q.approx_eq(&target, tol)) {
            out.push((a, b));
        }
    }
    out
}

fn check_batch(realizations: &[ChannelRealization], min: usize) -> Result<()> {
    if realizations.len() < min {
        bail!(Domain, "{} realizations given, at least {min} required", realizations.len());
    }
    let first = &realizations[0];
    for r in realizations {
        if r.receivers != first.receivers || r.sources != first.sources {
            bail!(Config, "realizations were evaluated on different point sets");
        }
    }
    Ok(())
}

/// Ratio estimate `Σ c_n / Σ p_n` with a delta-method standard error.
fn ratio(c: &[C64], p: &[f64]) -> (C64, f64) {
    let n = c.len() as f64;
    let sp = pairwise_sum(p);
    let sc = crate::special::pairwise_sum_c(c);
    let est = sc / sp;
    let resid: Vec<f64> = c.iter().zip(p).map(|(ci, pi)| (ci - est * pi).norm_sqr()).collect();
    let var = pairwise_sum(&resid) / (n - 1.0);
    (est, (var / n).sqrt() / (sp / n))
}

fn mean_power(real: &ChannelRealization) -> f64 {
    let v: Vec<f64> = real.h.iter().map(|x| x.norm_sqr()).collect();
    pairwise_sum(&v) / v.len() as f64
}

/// Spatially and ensemble averaged `E{h*(x) h(x + lag)} / E|h|²` along one
/// endpoint. Each realization contributes the average over all point pairs
/// at the lag (and over all points of the other endpoint); the zero-lag
/// value is exactly one. Standard errors come from the spread of the
/// per-realization averages.
pub fn empirical_acf(realizations: &[ChannelRealization], lags: &[SpatialPoint], side: Side) -> Result<AcfEstimate> {
    check_batch(realizations, 30)?;
    let first = &realizations[0];
    let points = match side {
        Side::Receive => &first.receivers,
        Side::Source => &first.sources,
    };
    let power: Vec<f64> = realizations.iter().map(mean_power).collect();
    let (mut values, mut stderr, mut n_pairs) = (Vec::new(), Vec::new(), Vec::new());
    for lag in lags {
        let pairs = lag_pairs(points, lag);
        if pairs.is_empty() {
            bail!(Lookup, "no evaluated point pair at lag {lag:?}");
        }
        let c: Vec<C64> = realizations
            .iter()
            .map(|real| {
                let mut terms = Vec::new();
                match side {
                    Side::Receive => {
                        for &(a, b) in &pairs {
                            for s in 0..real.n_sources() {
                                terms.push(real.get(a, s).conj() * real.get(b, s));
                            }
                        }
                    }
                    Side::Source => {
                        for &(a, b) in &pairs {
                            for r in 0..real.n_receivers() {
                                terms.push(real.get(r, a).conj() * real.get(r, b));
                            }
                        }
                    }
                }
                crate::special::pairwise_sum_c(&terms) / terms.len() as f64
            })
            .collect();
        let (v, se) = if pairs.iter().all(|(a, b)| a == b) {
            // Zero lag: every term is |h|², identical to the normalizer.
            (C64::new(1.0, 0.0), 0.0)
        } else {
            ratio(&c, &power)
        };
        values.push(v);
        stderr.push(se);
        n_pairs.push(pairs.len());
    }
    Ok(AcfEstimate { lags: lags.to_vec(), values, stderr, n_realizations: realizations.len(), n_pairs })
}

/// Two-sided `E{h*(r, s) h(r + Δr, s + Δs)} / E|h|²` with its standard error.
pub fn empirical_acf_joint(
    realizations: &[ChannelRealization],
    receive_lag: &SpatialPoint,
    source_lag: &SpatialPoint,
) -> Result<(C64, f64)> {
    check_batch(realizations, 30)?;
    let first = &realizations[0];
    let rp = lag_pairs(&first.receivers, receive_lag);
    let sp = lag_pairs(&first.sources, source_lag);
    if rp.is_empty() || sp.is_empty() {
        bail!(Lookup, "no evaluated point pair at the requested lags");
    }
    let power: Vec<f64> = realizations.iter().map(mean_power).collect();
    let c: Vec<C64> = realizations
        .iter()
        .map(|real| {
            let mut terms = Vec::with_capacity(rp.len() * sp.len());
            for &(a, b) in &rp {
                for &(c, d) in &sp {
                    terms.push(real.get(a, c).conj() * real.get(b, d));
                }
            }
            crate::special::pairwise_sum_c(&terms) / terms.len() as f64
        })
        .collect();
    Ok(ratio(&c, &power))
}

/// Model correlation `Σ_i q_i Γ_i e^{±i k_i·lag} / Σ_i q_i Γ_i` of a disk grid
/// with per-node marginal power profile `q_i` (`A²` along one endpoint).
/// The receive side carries `e^{+ik·r}`, the source side `e^{−iκ·s}`.
pub fn model_acf(grid: &DiskGrid, profile: &[f64], lag: &SpatialPoint, side: Side) -> Result<C64> {
    if profile.len() != grid.len() {
        bail!(Config, "profile has {} entries for {} nodes", profile.len(), grid.len());
    }
    let sign = if side == Side::Receive { 1.0 } else { -1.0 };
    let mut num = Vec::with_capacity(grid.len());
    let mut den = Vec::with_capacity(grid.len());
    for (n, q) in grid.nodes.iter().zip(profile) {
        let w = q * n.inv_gamma_weight;
        num.push(C64::from_polar(w, sign * (n.kx * lag.x + n.ky * lag.y + n.gamma * lag.z)));
        den.push(w);
    }
    let d = pairwise_sum(&den);
    if !(d > 0.0) {
        bail!(Domain, "profile has no power");
    }
    Ok(crate::special::pairwise_sum_c(&num) / d)
}

/// Model correlation of the 2D model along one endpoint for an in-plane
/// lag `(x, y)`; both 2D plane waves carry `e^{+i(k_x x + γ y)}`.
pub fn planar_model_acf(config: &PlanarConfig, lag: (f64, f64), side: Side) -> C64 {
    let (rg, sg) = (&config.receive_grid, &config.source_grid);
    let (own, other) = match side {
        Side::Receive => (rg, sg),
        Side::Source => (sg, rg),
    };
    let mut num = Vec::with_capacity(own.len());
    let mut den = Vec::with_capacity(own.len());
    for (i, n) in own.nodes.iter().enumerate() {
        let marg: Vec<f64> = other
            .nodes
            .iter()
            .enumerate()
            .map(|(j, o)| {
                let p = match side {
                    Side::Receive => config.density_at(i, j),
                    Side::Source => config.density_at(j, i),
                };
                p * o.inv_gamma_weight
            })
            .collect();
        let w = pairwise_sum(&marg) * n.inv_gamma_weight;
        num.push(C64::from_polar(w, n.kx * lag.0 + n.gamma * lag.1));
        den.push(w);
    }
    crate::special::pairwise_sum_c(&num) / pairwise_sum(&den)
}

/// Second moment `E{h*(r₁, s₁) h(r₂, s₂)}` probed at index quadruples.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct StationarityProbe {
    pub receive_a: usize,
    pub source_a: usize,
    pub receive_b: usize,
    pub source_b: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct StationarityReport {
    pub estimates: Vec<C64>,
    pub stderr: Vec<f64>,
    /// `max_{k<l} |c_k − c_l| / √(se_k² + se_l²)`.
    pub max_discrepancy: f64,
    pub threshold: f64,
    pub n_realizations: usize,
    pub pass: bool,
}

/// Checks that probes with the same displacement `(r₂ − r₁, s₂ − s₁)` have
/// the same second moment within three combined standard errors.
pub fn stationarity_test(realizations: &[ChannelRealization], probes: &[StationarityProbe]) -> Result<StationarityReport> {
    if probes.len() < 2 {
        bail!(Domain, "stationarity test needs at least two probes");
    }
    check_batch(realizations, 100)?;
    let f = &realizations[0];
    let (nr, ns) = (f.n_receivers(), f.n_sources());
    let disp = |p: &StationarityProbe| {
        (f.receivers[p.receive_b] - f.receivers[p.receive_a], f.sources[p.source_b] - f.sources[p.source_a])
    };
    for p in probes {
        if p.receive_a >= nr || p.receive_b >= nr || p.source_a >= ns || p.source_b >= ns {
            bail!(Lookup, "probe {p:?} outside the evaluated point sets");
        }
    }
    let (d0r, d0s) = disp(&probes[0]);
    let tol = point_tol(&f.receivers).max(point_tol(&f.sources));
    for p in probes {
        let (dr, ds) = disp(p);
        if !dr.approx_eq(&d0r, tol) || !ds.approx_eq(&d0s, tol) {
            bail!(Config, "probes have different displacements");
        }
    }
    let n = realizations.len() as f64;
    let mut estimates = Vec::with_capacity(probes.len());
    let mut stderr = Vec::with_capacity(probes.len());
    for p in probes {
        let x: Vec<C64> =
            realizations.iter().map(|r| r.get(p.receive_a, p.source_a).conj() * r.get(p.receive_b, p.source_b)).collect();
        let mean = crate::special::pairwise_sum_c(&x) / n;
        let dev: Vec<f64> = x.iter().map(|v| (v - mean).norm_sqr()).collect();
        estimates.push(mean);
        stderr.push((pairwise_sum(&dev) / (n - 1.0) / n).sqrt());
    }
    let mut max_z = 0.0f64;
    for k in 0..probes.len() {
        for l in k + 1..probes.len() {
            let se = (stderr[k] * stderr[k] + stderr[l] * stderr[l]).sqrt();
            let d = (estimates[k] - estimates[l]).norm();
            // Deterministic inputs have zero spread; allow rounding noise.
            let floor = 1e-12 * estimates[k].norm().max(estimates[l].norm());
            let z = if se > 0.0 { d / se } else if d <= floor { 0.0 } else { f64::INFINITY };
            max_z = max_z.max(z);
        }
    }
    Ok(StationarityReport {
        estimates,
        stderr,
        max_discrepancy: max_z,
        threshold: 3.0,
        n_realizations: realizations.len(),
        pass: max_z <= 3.0,
    })
}

/// Kolmogorov–Smirnov distance of a sample against a continuous CDF.
/// Sorts the sample in place.
pub fn ks_statistic(samples: &mut [f64], cdf: impl Fn(f64) -> f64) -> f64 {
    samples.sort_by(|a, b| a.total_cmp(b));
    let n = samples.len() as f64;
    samples.iter().enumerate().fold(0.0, |d, (i, &x)| {
        let f = cdf(x);
        d.max(f - i as f64 / n).max((i + 1) as f64 / n - f)
    })
}

/// Asymptotic 1% critical value `1.6276/√n` of the one-sample KS test.
pub fn ks_critical_1pct(n: usize) -> f64 {
    1.6276 / (n as f64).sqrt()
}

pub fn standard_normal_cdf(x: f64) -> f64 {
    0.5 * libm::erfc(-x / SQRT_2)
}

#[derive(Debug, Clone, PartialEq)]
pub struct GaussianityReport {
    pub ks_re: f64,
    pub ks_im: f64,
    pub critical: f64,
    /// `|E h²| / E|h|²`.
    pub pseudo_ratio: f64,
    pub pseudo_threshold: f64,
    pub n: usize,
    pub pass: bool,
}

/// KS test of the standardized real and imaginary marginals against
/// `N(0, 1)` at the 1% level, plus the pseudo-covariance ratio.
pub fn gaussianity_test(samples: &[C64]) -> Result<GaussianityReport> {
    if samples.len() < 500 {
        bail!(Domain, "Gaussianity test needs at least 500 samples, got {}", samples.len());
    }
    let n = samples.len();
    let standardized = |f: &dyn Fn(&C64) -> f64| -> Vec<f64> {
        let x: Vec<f64> = samples.iter().map(f).collect();
        let mean = pairwise_sum(&x) / n as f64;
        let dev: Vec<f64> = x.iter().map(|v| (v - mean) * (v - mean)).collect();
        let sd = (pairwise_sum(&dev) / (n as f64 - 1.0)).sqrt();
        x.iter().map(|v| if sd > 0.0 { (v - mean) / sd } else { 0.0 }).collect()
    };
    let mut re = standardized(&|c| c.re);
    let mut im = standardized(&|c| c.im);
    let ks_re = ks_statistic(&mut re, standard_normal_cdf);
    let ks_im = ks_statistic(&mut im, standard_normal_cdf);
    let sq: Vec<C64> = samples.iter().map(|c| c * c).collect();
    let pw: Vec<f64> = samples.iter().map(|c| c.norm_sqr()).collect();
    let pseudo_ratio = crate::special::pairwise_sum_c(&sq).norm() / pairwise_sum(&pw);
    let critical = ks_critical_1pct(n);
    Ok(GaussianityReport {
        ks_re,
        ks_im,
        critical,
        pseudo_ratio,
        pseudo_threshold: 0.05,
        n,
        pass: ks_re < critical && ks_im < critical && pseudo_ratio <= 0.05,
    })
}

/// Outcome of a Weyl-identity quadrature.
#[derive(Debug, Clone, PartialEq)]
pub struct WeylReport {
    pub points: Vec<SpatialPoint>,
    pub relative_errors: Vec<f64>,
    pub max_relative_error: f64,
    /// Set when a point lies closer than λ/2 to the source plane, where the
    /// truncation radius would have to grow.
    pub truncation_warning: bool,
}

fn weyl_report(points: &[SpatialPoint], errors: Vec<f64>, min_offset: f64, medium: &MediumParams) -> WeylReport {
    WeylReport {
        points: points.to_vec(),
        max_relative_error: errors.iter().fold(0.0f64, |m, e| m.max(*e)),
        relative_errors: errors,
        truncation_warning: min_offset < 0.5 * medium.lambda,
    }
}

/// Numerical 3D Weyl integral
/// `(i/2π) ∬_{|k| ≤ c κ} e^{i(k_x x + k_y y + k_z |z|)}/k_z dk` against
/// `e^{iκR}/R`. Radial nodes: `n_radial/2` Gauss–Legendre nodes on the
/// propagating part (`k_ρ = κ sin t`) and as many on the evanescent part
/// (`k_ρ = κ cosh u`); both substitutions remove the `1/k_z` singularity.
/// Azimuth: `n_angular` trapezoid nodes.
pub fn weyl_check(
    points: &[SpatialPoint],
    truncation: f64,
    n_radial: usize,
    n_angular: usize,
    medium: &MediumParams,
) -> Result<WeylReport> {
    if !(truncation > 1.0) || n_radial < 4 || n_angular < 4 {
        bail!(Config, "need truncation > 1 (in units of κ) and at least 4 nodes per axis");
    }
    let k = medium.kappa;
    let half = n_radial / 2;
    let (tp, wp) = gauss_legendre_on(half, 0.0, PI / 2.0);
    let (ue, we) = gauss_legendre_on(n_radial - half, 0.0, truncation.acosh());
    let dphi = 2.0 * PI / n_angular as f64;
    let trig: Vec<(f64, f64)> = (0..n_angular).map(|m| (m as f64 * dphi).sin_cos()).collect();
    let azimuthal = |kr: f64, p: &SpatialPoint| -> C64 {
        let terms: Vec<C64> = trig.iter().map(|(s, c)| C64::from_polar(dphi, kr * (p.x * c + p.y * s))).collect();
        crate::special::pairwise_sum_c(&terms)
    };
    let mut errors = Vec::with_capacity(points.len());
    let mut min_z = f64::INFINITY;
    for p in points {
        let z = p.z.abs();
        min_z = min_z.min(z);
        if !(z > 0.0) {
            bail!(Domain, "Weyl check needs a nonzero offset from the source plane");
        }
        let mut terms = Vec::with_capacity(n_radial);
        for (t, w) in tp.iter().zip(&wp) {
            // k_ρ dk_ρ / k_z = κ sin t dt
            let (s, c) = t.sin_cos();
            terms.push(azimuthal(k * s, p) * C64::from_polar(w * k * s, k * c * z));
        }
        for (u, w) in ue.iter().zip(&we) {
            // k_ρ dk_ρ / k_z = −iκ cosh u du, e^{ik_z z} = e^{−κ sinh u z}
            let f = w * k * u.cosh() * (-k * u.sinh() * z).exp();
            terms.push(azimuthal(k * u.cosh(), p) * C64::new(0.0, -f));
        }
        let i = crate::special::pairwise_sum_c(&terms) * C64::new(0.0, 1.0 / (2.0 * PI));
        let exact = green3(p, medium)? * (4.0 * PI);
        errors.push((i - exact).norm() / exact.norm());
    }
    Ok(weyl_report(points, errors, min_z, medium))
}

/// 2D Weyl integral `(1/π) ∫_{|k_x| ≤ c κ} e^{i(k_x x + k_y |y|)}/k_y dk_x`
/// against `H₀⁽¹⁾(κR)`; points are `(x, y)` in the `x`/`y` fields.
pub fn weyl_check_2d(points: &[(f64, f64)], truncation: f64, n: usize, medium: &MediumParams) -> Result<WeylReport> {
    if !(truncation > 1.0) || n < 4 {
        bail!(Config, "need truncation > 1 (in units of κ) and at least 4 nodes");
    }
    let k = medium.kappa;
    let half = n / 2;
    let (tp, wp) = gauss_legendre_on(half, 0.0, PI);
    let (ue, we) = gauss_legendre_on(n - half, 0.0, truncation.acosh());
    let mut errors = Vec::with_capacity(points.len());
    let mut min_y = f64::INFINITY;
    let mut pts = Vec::with_capacity(points.len());
    for &(x, y0) in points {
        let y = y0.abs();
        min_y = min_y.min(y);
        if !(y > 0.0) {
            bail!(Domain, "2D Weyl check needs a nonzero offset from the source line");
        }
        pts.push(SpatialPoint::new(x, y0, 0.0));
        let mut terms = Vec::with_capacity(n + (n - half));
        for (t, w) in tp.iter().zip(&wp) {
            // dk_x / k_y = dt on the propagating part.
            terms.push(C64::from_polar(*w, k * (x * t.cos() + y * t.sin())));
        }
        for (u, w) in ue.iter().zip(&we) {
            // dk_x / k_y = −i du, both signs of k_x.
            let f = w * (-k * u.sinh() * y).exp();
            let phase = k * u.cosh() * x;
            terms.push(C64::new(0.0, -f) * (C64::from_polar(1.0, phase) + C64::from_polar(1.0, -phase)));
        }
        let i = crate::special::pairwise_sum_c(&terms) / PI;
        let exact = hankel1_0(k * x.hypot(y));
        // Cross-check the oracle against the 2D Green's function definition.
        debug_assert!((green2((x, y), medium)? - C64::new(0.0, 0.25) * exact).norm() < 1e-12 * exact.norm());
        errors.push((i - exact).norm() / exact.norm());
    }
    Ok(weyl_report(&pts, errors, min_y, medium))
}

/// Disk integral `∬_D dk/γ` by plain polar quadrature compared with both
/// the nominal value `π²κ` and the exact value `2πκ`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DiskIntegralReport {
    pub quadrature: f64,
    pub nominal_value: f64,
    /// `2πκ`.
    pub exact_value: f64,
    /// Exact integral over the retained disk `|k| ≤ κ − rim_cut`.
    pub retained_value: f64,
    pub relative_error_nominal: f64,
    pub relative_error_exact: f64,
}

pub fn disk_integral_check(medium: &MediumParams, resolution: (usize, usize), rim_cut: f64) -> Result<DiskIntegralReport> {
    let g = build_disk_grid(medium, GridMode::Polar, resolution, rim_cut)?;
    let q = disk_inverse_gamma_integral(&g);
    let nominal = PI * PI * medium.kappa;
    let exact = 2.0 * PI * medium.kappa;
    Ok(DiskIntegralReport {
        quadrature: q,
        nominal_value: nominal,
        exact_value: exact,
        retained_value: inverse_gamma_integral_exact(medium, rim_cut),
        relative_error_nominal: (q - nominal).abs() / nominal,
        relative_error_exact: (q - exact).abs() / exact,
    })
}

/// `|g_far − g| / |g|` at observation points `d · direction` for a source
/// displaced by `s`.
pub fn far_field_error_curve(
    distances: &[f64],
    s: &SpatialPoint,
    direction: &Direction3,
    medium: &MediumParams,
) -> Result<Vec<f64>> {
    distances
        .iter()
        .map(|&d| {
            if !(d > 0.0) {
                bail!(Domain, "distance {d} must be positive");
            }
            let r = SpatialPoint::new(direction.x * d, direction.y * d, direction.z * d);
            let exact = green3(&(r - *s), medium)?;
            Ok((far_field_green(&r, s, medium)? - exact).norm() / exact.norm())
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::psd::SpectralFactor;
    use crate::synthesis::{build_line_grid, synthesize_rays, LineMode, PlanarDensity, SynthesisConfig, Synthesizer};
    use crate::angular::Ray;
    use alloc::vec;
    use proptest::prelude::*;

    fn unit() -> MediumParams {
        MediumParams::new(1.0).unwrap()
    }

    fn line(n: usize, step: f64) -> Vec<SpatialPoint> {
        (0..n).map(|i| SpatialPoint::new(i as f64 * step, 0.0, 0.0)).collect()
    }

    #[test]
    fn clarke_examples() {
        let m = unit();
        assert_eq!(clarke_acf(0.0, &m), 1.0);
        assert!(clarke_acf(0.5, &m).abs() < 1e-15);
        assert!((clarke_acf(0.25, &m) - 2.0 / PI).abs() < 1e-15);
    }

    #[test]
    fn white_input_is_delta() {
        // One node per grid and points spaced so the single plane wave only
        // rotates phase: the normalized ACF has unit magnitude. Independent
        // draws per point (a δ-correlated field) come from the ray path with
        // separate realizations per point.
        let m = unit();
        let pts = line(6, 0.25);
        let reals: Vec<_> = (0..200)
            .map(|t| {
                let h: Vec<C64> = (0..pts.len()).map(|i| crate::rng::NoiseKey::new(1, t, 0).at(i as u64, 0)).collect();
                ChannelRealization { h, receivers: pts.clone(), sources: vec![SpatialPoint::ORIGIN], seed: 1, realization: t, config_hash: 0 }
            })
            .collect();
        let lags = [SpatialPoint::ORIGIN, SpatialPoint::new(0.25, 0.0, 0.0), SpatialPoint::new(0.5, 0.0, 0.0)];
        let e = empirical_acf(&reals, &lags, Side::Receive).unwrap();
        assert_eq!(e.values[0], C64::new(1.0, 0.0));
        for k in 1..3 {
            assert!(e.values[k].norm() < 4.0 * e.stderr[k].max(1e-3), "{:?}", e.values[k]);
        }
        let _ = m;
    }

    #[test]
    fn acf_errors() {
        let pts = line(3, 0.25);
        let real = ChannelRealization { h: vec![C64::new(1.0, 0.0); 3], receivers: pts, sources: vec![SpatialPoint::ORIGIN], seed: 0, realization: 0, config_hash: 0 };
        let few = vec![real.clone(); 10];
        assert!(matches!(empirical_acf(&few, &[SpatialPoint::ORIGIN], Side::Receive), Err(crate::Error::Domain(_))));
        let many = vec![real; 40];
        assert!(matches!(empirical_acf(&many, &[SpatialPoint::new(5.0, 0.0, 0.0)], Side::Receive), Err(crate::Error::Lookup(_))));
    }

    #[test]
    fn isotropic_acf_matches_clarke() {
        let m = unit();
        let g = build_disk_grid(&m, GridMode::Polar, (32, 32), 1e-3).unwrap();
        let gs = build_disk_grid(&m, GridMode::Polar, (4, 4), 1e-3).unwrap();
        let s = Synthesizer::new(SynthesisConfig::new(g, gs, SpectralFactor::isotropic(), 21).unwrap()).unwrap();
        let pts = line(17, 0.125);
        let plan = s.plan(&pts, &[SpatialPoint::ORIGIN]).unwrap();
        let reals: Vec<_> = (0..300).map(|t| plan.realize(t).unwrap()).collect();
        let lags: Vec<SpatialPoint> = [0.0, 0.25, 0.5, 1.0].iter().map(|x| SpatialPoint::new(*x, 0.0, 0.0)).collect();
        let e = empirical_acf(&reals, &lags, Side::Receive).unwrap();
        for (k, l) in lags.iter().enumerate() {
            let c = clarke_acf(l.x, &m);
            assert!((e.values[k].re - c).abs() <= 3.0 * e.stderr[k] + 0.01, "lag {}: {} vs {c} ± {}", l.x, e.values[k], e.stderr[k]);
            assert!(e.values[k].norm() <= 1.0 + 3.0 * e.stderr[k]);
        }
        // The model ACF of the grid itself reproduces sinc.
        let grid = &s.config().receive_grid;
        let prof = vec![1.0; grid.len()];
        for l in &lags {
            let c = model_acf(grid, &prof, l, Side::Receive).unwrap();
            assert!((c.re - clarke_acf(l.x, &m)).abs() < 2e-3 && c.im.abs() < 1e-12);
        }
    }

    #[test]
    fn narrow_vmf_decorrelates_slowly() {
        use crate::angular::{AngularDistribution, VmfComponent, VmfMixture};
        let m = unit();
        let g = build_disk_grid(&m, GridMode::Polar, (64, 64), 1e-3).unwrap();
        let c = VmfComponent::new(Direction3::from_degrees(30.0, 0.0).unwrap(), 50.0).unwrap();
        let d = AngularDistribution::Mixture(VmfMixture::new(vec![c], vec![1.0]).unwrap());
        let prof: Vec<f64> = (0..g.len()).map(|i| d.density(&g.direction(i))).collect();
        let c = model_acf(&g, &prof, &SpatialPoint::new(0.5, 0.0, 0.0), Side::Receive).unwrap();
        assert!(c.norm() > 0.5, "{c}");
        assert!(clarke_acf(0.5, &m).abs() < 1e-12);
    }

    #[test]
    fn planar_isotropic_acf_is_j0() {
        let m = unit();
        for mode in [LineMode::Polar, LineMode::CosineDirection] {
            let g = build_line_grid(&m, mode, 512).unwrap();
            let cfg = PlanarConfig::new(g.clone(), g, PlanarDensity::Uniform, 0).unwrap();
            for x in [0.0, 0.2, 0.5, 1.3] {
                let c = planar_model_acf(&cfg, (x, 0.0), Side::Receive);
                assert!((c.re - crate::special::bessel_j0(m.kappa * x)).abs() < 2e-3, "{mode:?} {x}: {c}");
            }
        }
    }

    fn probe(ra: usize, sa: usize, rb: usize, sb: usize) -> StationarityProbe {
        StationarityProbe { receive_a: ra, source_a: sa, receive_b: rb, source_b: sb }
    }

    #[test]
    fn stationarity_examples() {
        let m = unit();
        let g = build_disk_grid(&m, GridMode::Polar, (8, 8), 1e-3).unwrap();
        let s = Synthesizer::new(SynthesisConfig::new(g.clone(), g, SpectralFactor::isotropic(), 4).unwrap()).unwrap();
        let rs = [SpatialPoint::ORIGIN, SpatialPoint::new(0.3, 0.0, 0.0), SpatialPoint::new(0.0, 0.0, 0.5), SpatialPoint::new(0.3, 0.0, 0.5)];
        let plan = s.plan(&rs, &[SpatialPoint::ORIGIN]).unwrap();
        let reals: Vec<_> = (0..200).map(|t| plan.realize(t).unwrap()).collect();
        let rep = stationarity_test(&reals, &[probe(0, 0, 1, 0), probe(2, 0, 3, 0)]).unwrap();
        assert!(rep.pass, "{rep:?}");
        assert!(matches!(stationarity_test(&reals, &[probe(0, 0, 1, 0), probe(0, 0, 2, 0)]), Err(crate::Error::Config(_))));
        assert!(matches!(stationarity_test(&reals[..50], &[probe(0, 0, 1, 0), probe(2, 0, 3, 0)]), Err(crate::Error::Domain(_))));
        // Deterministic free-space field: identical estimates, zero spread.
        let f = crate::synthesis::freespace_reference(&[SpatialPoint::new(0.0, 0.0, -1.0), SpatialPoint::new(0.3, 0.0, -1.0)], &rs, &m).unwrap();
        let fs = vec![f; 100];
        // Translating both endpoints together leaves every moment unchanged.
        let rep = stationarity_test(&fs, &[probe(0, 0, 0, 0), probe(1, 1, 1, 1)]).unwrap();
        assert!(rep.pass, "{rep:?}");
        let rep = stationarity_test(&fs, &[probe(0, 0, 2, 0), probe(1, 1, 3, 1)]).unwrap();
        assert!(rep.pass, "{rep:?}");
    }

    #[test]
    fn gaussianity_examples() {
        let m = unit();
        let d = Direction3::from_degrees(30.0, 0.0).unwrap();
        let pts = line(5, 0.37);
        let collect = |rays: &[Ray]| -> Vec<C64> {
            (0..1000).flat_map(|t| synthesize_rays(rays, &m, 3, t, &pts, &[SpatialPoint::ORIGIN]).unwrap().h).collect()
        };
        let one = gaussianity_test(&collect(&[Ray { source: d, receive: d, gain: 1.0 }])).unwrap();
        assert!(!one.pass, "{one:?}");
        let two = [Ray { source: d, receive: d, gain: 0.5 }, Ray { source: Direction3::ZENITH, receive: Direction3::ZENITH, gain: 0.5 }];
        let r2 = gaussianity_test(&collect(&two)).unwrap();
        assert!(!r2.pass, "{r2:?}");
        let gauss: Vec<C64> = (0..5000).map(|t| crate::rng::NoiseKey::new(8, t, 0).at(0, 0)).collect();
        let g = gaussianity_test(&gauss).unwrap();
        assert!(g.pass, "{g:?}");
        assert!(gaussianity_test(&gauss[..100]).is_err());
    }

    #[test]
    fn weyl_examples() {
        let m = unit();
        let pts = [SpatialPoint::new(0.0, 0.0, 1.0), SpatialPoint::new(0.0, 0.0, 5.0), SpatialPoint::new(0.7, -0.4, 2.0)];
        let r = weyl_check(&pts, 4.0, 512, 512, &m).unwrap();
        assert!(r.max_relative_error <= 1e-3, "{r:?}");
        assert!(r.relative_errors[1] <= r.relative_errors[0]);
        assert!(!r.truncation_warning);
        let near = weyl_check(&[SpatialPoint::new(0.0, 0.0, 0.2)], 4.0, 64, 64, &m).unwrap();
        assert!(near.truncation_warning);
        let r2 = weyl_check_2d(&[(0.0, 1.0), (0.0, 5.0), (0.6, 2.0)], 4.0, 512, &m).unwrap();
        assert!(r2.max_relative_error <= 1e-3, "{r2:?}");
    }

    #[test]
    fn disk_integral_is_two_pi_kappa() {
        let m = unit();
        let r = disk_integral_check(&m, (256, 64), 1e-4 * m.kappa).unwrap();
        // The plain quadrature misses only the discarded rim strip.
        assert!((r.quadrature / r.retained_value - 1.0).abs() < 1e-4, "{r:?}");
        assert!(r.relative_error_exact < 0.02, "{r:?}");
        assert!(r.relative_error_nominal > 0.3);
    }

    #[test]
    fn far_field_examples() {
        let m = unit();
        let s = SpatialPoint::new(1.0, 0.0, 0.0);
        let dir = Direction3::from_degrees(30.0, 0.0).unwrap();
        let e = far_field_error_curve(&[2.0, 100.0, 1e5], &s, &dir, &m).unwrap();
        assert!(e[0] > 0.05 && e[1] <= 0.05 && e[2] < 1e-3, "{e:?}");
        assert!(far_field_error_curve(&[0.0], &s, &dir, &m).is_err());
    }

    proptest! {
        #[test]
        fn clarke_zeros(n in 1u32..200) {
            let m = unit();
            prop_assert!(clarke_acf(n as f64 * 0.5, &m).abs() < 1e-12);
        }

        #[test]
        fn ks_is_a_distance(xs in proptest::collection::vec(-5.0..5.0f64, 1..200)) {
            let mut v = xs.clone();
            let d = ks_statistic(&mut v, standard_normal_cdf);
            prop_assert!((0.0..=1.0).contains(&d));
        }
    }
}

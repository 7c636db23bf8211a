//! Subcommands: `synthesize`, `acf`, `validate`, `angular`.

use std::f64::consts::PI;
use std::path::Path;

use planewave_core::angular::{alpha_from_variance, check_normalization, mean_resultant, NORMALIZATION_GRID};
use planewave_core::geometry::{Direction3, MediumParams, SpatialPoint};
use planewave_core::psd::{average_power_table, mercer_power_bound};
use planewave_core::spectral_support::{bandwidth_isotropic, dof_planar_loss_ratio, evanescent_power_loss_db};
use planewave_core::synthesis::{BlockGains, ChannelRealization, Model};
use planewave_core::validation::{
    clarke_acf, disk_integral_check, empirical_acf, gaussianity_test, stationarity_test, weyl_check, weyl_check_2d, Side,
    StationarityProbe,
};
use serde::Serialize;

use crate::error::{scenario_err, CliError, Result};
use crate::io::{channel_blob, channel_csv, ensure_dir, json_bytes, table_csv, Context};
use crate::scenario::{Engine, ModelSpec, Scenario};

pub fn synthesize(sc: &Scenario, out: &Path) -> Result<()> {
    let engine = sc.engine()?;
    let rx = sc.receivers.points()?;
    let tx = sc.sources.points()?;
    let reals = engine.realize_batch(sc.n_realizations, &rx, &tx)?;
    ensure_dir(out)?;
    let ctx = Context {
        command: "synthesize",
        scenario: sc,
        engine: Some(&engine),
        receivers: rx.clone(),
        sources: tx.clone(),
        n_realizations: Some(sc.n_realizations),
    };
    let shape = vec![reals.len(), rx.len(), tx.len()];
    if sc.outputs.csv {
        let p = ctx.emit(out, "channel.csv", &channel_csv(&reals)?, "csv", shape.clone())?;
        println!("wrote {}", p.display());
    }
    if sc.outputs.blob {
        let p = ctx.emit(out, "channel.c64", &channel_blob(&reals), "complex64-le", shape)?;
        println!("wrote {}", p.display());
    }
    Ok(())
}

#[derive(Debug, Serialize)]
struct AcfReport {
    side: Side,
    lags: Vec<SpatialPoint>,
    lag_norm: Vec<f64>,
    correlation_re: Vec<f64>,
    correlation_im: Vec<f64>,
    stderr: Vec<f64>,
    n_pairs: Vec<usize>,
    n_realizations: usize,
    seed: u64,
    clarke: Option<Vec<f64>>,
    max_abs_error_vs_clarke: Option<f64>,
}

pub fn acf(sc: &Scenario, out: &Path) -> Result<()> {
    let engine = sc.engine()?;
    let rx = sc.receivers.points()?;
    let tx = sc.sources.points()?;
    let lags = sc.acf_lags()?;
    let reals = engine.realize_batch(sc.n_realizations, &rx, &tx)?;
    let est = empirical_acf(&reals, &lags, sc.acf.side)?;
    let medium = sc.medium()?;
    let lag_norm: Vec<f64> = lags.iter().map(SpatialPoint::norm).collect();
    let clarke = sc.is_isotropic(sc.acf.side).then(|| lag_norm.iter().map(|&r| clarke_acf(r, &medium)).collect::<Vec<_>>());
    let max_err = clarke
        .as_ref()
        .map(|c| est.values.iter().zip(c).map(|(v, c)| (v - c).norm()).fold(0.0, f64::max));
    let report = AcfReport {
        side: sc.acf.side,
        lags: lags.clone(),
        lag_norm: lag_norm.clone(),
        correlation_re: est.values.iter().map(|v| v.re).collect(),
        correlation_im: est.values.iter().map(|v| v.im).collect(),
        stderr: est.stderr.clone(),
        n_pairs: est.n_pairs.clone(),
        n_realizations: est.n_realizations,
        seed: sc.seed,
        clarke: clarke.clone(),
        max_abs_error_vs_clarke: max_err,
    };
    ensure_dir(out)?;
    let ctx = Context {
        command: "acf",
        scenario: sc,
        engine: Some(&engine),
        receivers: rx,
        sources: tx,
        n_realizations: Some(sc.n_realizations),
    };
    let rows: Vec<Vec<f64>> = lag_norm
        .iter()
        .zip(&est.values)
        .enumerate()
        .map(|(k, (l, v))| {
            let mut row = vec![*l, v.re];
            if let Some(c) = &clarke {
                row.push(c[k]);
            }
            row
        })
        .collect();
    let header: &[&str] = if clarke.is_some() { &["lag_lambda", "correlation", "clarke"] } else { &["lag_lambda", "correlation"] };
    let n = rows.len();
    ctx.emit(out, "acf.csv", &table_csv(header, rows)?, "csv", vec![n, header.len()])?;
    ctx.emit(out, "acf.json", &json_bytes(&report)?, "json", vec![n])?;
    match max_err {
        Some(e) => println!("acf: {n} lags, max |emp − sinc| = {e:.4}"),
        None => println!("acf: {n} lags"),
    }
    Ok(())
}

pub fn angular(sc: &Scenario, out: &Path) -> Result<()> {
    if sc.model == ModelSpec::Scalar2d {
        return Err(scenario_err!("at `model`: angular export needs a 3D scenario"));
    }
    let g = &sc.angular;
    if g.n_theta == 0 || g.n_phi == 0 {
        return Err(scenario_err!("at `angular`: resolution must be positive"));
    }
    let dist = sc.distribution(g.side)?;
    let (dt, dp) = (0.5 * PI / g.n_theta as f64, 2.0 * PI / g.n_phi as f64);
    let mut rows = Vec::with_capacity(g.n_theta * g.n_phi);
    let mut best = (f64::NEG_INFINITY, 0.0, 0.0);
    for i in 0..g.n_theta {
        let theta = (i as f64 + 0.5) * dt;
        for j in 0..g.n_phi {
            let phi = (j as f64 + 0.5) * dp;
            let d = Direction3 { x: theta.sin() * phi.cos(), y: theta.sin() * phi.sin(), z: theta.cos() };
            let v = dist.density(&d) * theta.sin();
            if v > best.0 {
                best = (v, theta.to_degrees(), phi.to_degrees());
            }
            rows.push(vec![theta.to_degrees(), phi.to_degrees(), v]);
        }
    }
    ensure_dir(out)?;
    let ctx = Context { command: "angular", scenario: sc, engine: None, receivers: vec![], sources: vec![], n_realizations: None };
    let n = rows.len();
    ctx.emit(out, "angular.csv", &table_csv(&["theta_deg", "phi_deg", "p_sin_theta"], rows)?, "csv", vec![g.n_theta, g.n_phi])?;
    println!("angular: {n} cells, max p·sinθ = {:.4} at θ = {:.2}°, φ = {:.2}°", best.0, best.1, best.2);
    Ok(())
}

/// One entry of the validation report.
#[derive(Debug, Clone, Serialize)]
pub struct CheckResult {
    pub test: String,
    pub statistic: f64,
    pub threshold: f64,
    pub pass: bool,
    pub n: u64,
    pub seed: u64,
    pub skipped: bool,
    pub detail: String,
}

#[derive(Debug, Serialize)]
struct ValidationReport {
    scenario: Option<String>,
    seed: u64,
    pass: bool,
    results: Vec<CheckResult>,
}

pub const CHECKS: &[&str] = &[
    "power",
    "gaussianity",
    "stationarity",
    "clarke",
    "reciprocity",
    "complete",
    "weyl",
    "evanescent",
    "bandwidth",
    "vmf",
    "mercer",
    "disk-integral",
];

/// Realizations on a fixed probe layout shared by the Monte-Carlo checks.
struct Batch {
    reals: Vec<ChannelRealization>,
    /// Receive indices of the λ/8 line.
    line: usize,
    /// Source count (λ/2 apart).
    n_sources: usize,
    /// Receive indices of stationarity bases and their shifted copies.
    bases: Vec<(usize, usize)>,
}

const LINE_POINTS: usize = 17;

fn batch(sc: &Scenario, engine: &Engine, medium: &MediumParams) -> Result<Batch> {
    let l = medium.lambda;
    let planar = matches!(engine, Engine::Planar(_));
    // In the 2D model `y` is the height above the source line.
    let up = |x: f64, h: f64| if planar { SpatialPoint::new(x, h, 0.0) } else { SpatialPoint::new(x, 0.0, h) };
    let mut rx: Vec<SpatialPoint> = (0..LINE_POINTS).map(|i| up(i as f64 * l / 8.0, 0.0)).collect();
    let bases = [up(0.7 * l, 0.5 * l), up(-0.3 * l, l)];
    let shift = SpatialPoint::new(0.25 * l, 0.0, 0.0);
    rx.extend(bases);
    rx.extend(bases.iter().map(|b| *b + shift));
    let n_sources = 5;
    let tx: Vec<SpatialPoint> = (0..n_sources).map(|i| up(i as f64 * l / 2.0, 0.0)).collect();
    let reals = engine.realize_batch(sc.validation.n_realizations, &rx, &tx)?;
    let n = LINE_POINTS;
    Ok(Batch { reals, line: n, n_sources, bases: vec![(0, 2), (n, n + 2), (n + 1, n + 3)] })
}

fn result(test: &str, statistic: f64, threshold: f64, pass: bool, n: u64, seed: u64, detail: String) -> CheckResult {
    CheckResult { test: test.to_owned(), statistic, threshold, pass, n, seed, skipped: false, detail }
}

fn skipped(test: &str, seed: u64, why: impl Into<String>) -> CheckResult {
    CheckResult {
        test: test.to_owned(),
        statistic: f64::NAN,
        threshold: f64::NAN,
        pass: true,
        n: 0,
        seed,
        skipped: true,
        detail: why.into(),
    }
}

pub fn validate(sc: &Scenario, out: &Path, only: Option<&str>) -> Result<()> {
    if let Some(name) = only {
        if !CHECKS.contains(&name) {
            return Err(scenario_err!("unknown check {name:?} (expected one of {})", CHECKS.join(", ")));
        }
    }
    let wanted = |c: &str| only.map_or(true, |o| o == c);
    let medium = sc.medium()?;
    let engine = sc.engine()?;
    let seed = sc.seed;
    let needs_batch = ["power", "gaussianity", "stationarity", "clarke"].iter().any(|c| wanted(c));
    let b = if needs_batch { Some(batch(sc, &engine, &medium)?) } else { None };
    let n_val = sc.validation.n_realizations;
    let mut results = Vec::new();

    if let (Some(b), true) = (&b, wanted("power")) {
        let mut acc = 0.0;
        for r in &b.reals {
            for i in 0..b.line {
                for j in 0..b.n_sources {
                    acc += r.get(i, j).norm_sqr();
                }
            }
        }
        let p = acc / (b.reals.len() * b.line * b.n_sources) as f64;
        let e = (p - 1.0).abs();
        results.push(result("power", e, 0.05, e <= 0.05, n_val, seed, format!("E|h|² = {p:.4}")));
    }
    if let (Some(b), true) = (&b, wanted("gaussianity")) {
        let samples: Vec<_> = b.reals.iter().flat_map(|r| (0..b.n_sources).map(move |j| r.get(0, j))).collect();
        match gaussianity_test(&samples) {
            Ok(g) => {
                let stat = (g.ks_re.max(g.ks_im)) / g.critical;
                results.push(result(
                    "gaussianity",
                    stat,
                    1.0,
                    g.pass,
                    g.n as u64,
                    seed,
                    format!("KS re {:.4}, im {:.4} vs {:.4}; pseudo-covariance ratio {:.4}", g.ks_re, g.ks_im, g.critical, g.pseudo_ratio),
                ));
            }
            Err(e) => results.push(skipped("gaussianity", seed, e.to_string())),
        }
    }
    if let (Some(b), true) = (&b, wanted("stationarity")) {
        let power: Vec<StationarityProbe> =
            b.bases.iter().map(|&(a, _)| StationarityProbe { receive_a: a, source_a: 0, receive_b: a, source_b: 0 }).collect();
        let lagged: Vec<StationarityProbe> =
            b.bases.iter().map(|&(a, s)| StationarityProbe { receive_a: a, source_a: 0, receive_b: s, source_b: 0 }).collect();
        match (stationarity_test(&b.reals, &power), stationarity_test(&b.reals, &lagged)) {
            (Ok(p), Ok(q)) => {
                let z = p.max_discrepancy.max(q.max_discrepancy);
                results.push(result(
                    "stationarity",
                    z,
                    p.threshold,
                    p.pass && q.pass,
                    n_val,
                    seed,
                    format!("max z: power {:.2}, λ/4 lag {:.2}", p.max_discrepancy, q.max_discrepancy),
                ));
            }
            (Err(e), _) | (_, Err(e)) => results.push(skipped("stationarity", seed, e.to_string())),
        }
    }
    if let (Some(b), true) = (&b, wanted("clarke")) {
        if sc.is_isotropic(Side::Receive) {
            let lags: Vec<SpatialPoint> =
                [0.0, 0.125, 0.25, 0.5, 0.75, 1.0, 1.5].iter().map(|f| SpatialPoint::new(f * medium.lambda, 0.0, 0.0)).collect();
            let line: Vec<ChannelRealization> = b
                .reals
                .iter()
                .map(|r| ChannelRealization {
                    h: (0..b.line).map(|i| r.get(i, 0)).collect(),
                    receivers: r.receivers[..b.line].to_vec(),
                    sources: vec![r.sources[0]],
                    ..r.clone()
                })
                .collect();
            let e = empirical_acf(&line, &lags, Side::Receive)?;
            let worst = lags.iter().zip(&e.values).map(|(l, v)| (v - clarke_acf(l.x, &medium)).norm()).fold(0.0, f64::max);
            results.push(result("clarke", worst, 0.03, worst <= 0.03, n_val, seed, format!("max |emp − sinc| = {worst:.4}")));
        } else if sc.model == ModelSpec::Scalar2d {
            results.push(skipped("clarke", seed, "no closed-form reference for the 2D model"));
        } else {
            results.push(skipped("clarke", seed, "receive side is not isotropic"));
        }
    }
    if wanted("reciprocity") {
        results.push(reciprocity(sc, &medium)?);
    }
    if wanted("complete") {
        results.push(complete_reduction(sc)?);
    }
    if wanted("weyl") {
        let l = medium.lambda;
        let p3 = [
            SpatialPoint::new(0.0, 0.0, l),
            SpatialPoint::new(0.0, 0.0, 2.0 * l),
            SpatialPoint::new(0.0, 0.0, 5.0 * l),
            SpatialPoint::new(0.6 * l, -0.3 * l, 2.0 * l),
        ];
        let r3 = weyl_check(&p3, 4.0, 512, 512, &medium)?;
        let r2 = weyl_check_2d(&[(0.0, l), (0.0, 2.0 * l), (0.0, 5.0 * l), (0.7 * l, 2.0 * l)], 4.0, 512, &medium)?;
        let e = r3.max_relative_error.max(r2.max_relative_error);
        results.push(result(
            "weyl",
            e,
            1e-3,
            e <= 1e-3,
            8,
            seed,
            format!("3D {:.2e}, 2D {:.2e}", r3.max_relative_error, r2.max_relative_error),
        ));
    }
    if wanted("evanescent") {
        let db = evanescent_power_loss_db(10.0 * medium.lambda, &medium);
        let e = (db + 545.8).abs();
        results.push(result("evanescent", e, 0.1, e <= 0.1, 1, seed, format!("loss at 10λ = {db:.3} dB")));
    }
    if wanted("bandwidth") {
        let e1 = (bandwidth_isotropic(&medium) / (PI * medium.kappa * medium.kappa) - 1.0).abs();
        let e2 = (dof_planar_loss_ratio() / (PI / 4.0) - 1.0).abs();
        let e = e1.max(e2);
        results.push(result("bandwidth", e, 1e-12, e <= 1e-12, 2, seed, format!("|D| rel err {e1:.1e}, π/4 rel err {e2:.1e}")));
    }
    if wanted("vmf") {
        results.push(vmf_check(sc)?);
    }
    if wanted("mercer") {
        results.push(match &engine {
            Engine::Spatial(s) => {
                let c = s.config();
                let p = average_power_table(s.factor_table(), &c.receive_grid, &c.source_grid);
                let bound = mercer_power_bound(s.factor_table(), &medium);
                result("mercer", p / bound, 1.0, p <= bound, 1, seed, format!("P = {p:.4} ≤ {bound:.4}"))
            }
            Engine::Planar(_) => skipped("mercer", seed, "3D models only"),
        });
    }
    if wanted("disk-integral") {
        let r = disk_integral_check(&medium, (256, 64), 1e-4 * medium.kappa)?;
        let e = (r.quadrature / r.retained_value - 1.0).abs();
        results.push(result(
            "disk-integral",
            e,
            3e-3,
            e <= 3e-3,
            256 * 64,
            seed,
            format!(
                "∬dk/γ = {:.6} vs retained {:.6} (2πκ = {:.6}; the value π²κ = {:.6} is not the integral)",
                r.quadrature, r.retained_value, r.exact_value, r.nominal_value
            ),
        ));
    }

    let pass = results.iter().all(|r| r.pass);
    for r in &results {
        let tag = if r.skipped {
            "SKIP"
        } else if r.pass {
            "PASS"
        } else {
            "FAIL"
        };
        println!("{tag} {}: {}", r.test, r.detail);
    }
    ensure_dir(out)?;
    let report = ValidationReport { scenario: sc.name.clone(), seed, pass, results: results.clone() };
    let ctx = Context {
        command: "validate",
        scenario: sc,
        engine: Some(&engine),
        receivers: vec![],
        sources: vec![],
        n_realizations: Some(n_val),
    };
    ctx.emit(out, "validation.json", &json_bytes(&report)?, "json", vec![results.len()])?;
    if pass {
        Ok(())
    } else {
        let failed: Vec<&str> = results.iter().filter(|r| !r.pass).map(|r| r.test.as_str()).collect();
        Err(CliError::Validation(failed.join(", ")))
    }
}

/// Symmetrized synthesis on the receive grid for both sides, coincident
/// points in `z = 0`.
fn reciprocity(sc: &Scenario, medium: &MediumParams) -> Result<CheckResult> {
    if sc.model == ModelSpec::Scalar2d {
        return Ok(skipped("reciprocity", sc.seed, "3D scalar model only"));
    }
    let (rg, _) = sc.grids(medium)?;
    let factor = match sc.factor(&rg, &rg) {
        Ok(f) => f,
        Err(e) => return Ok(skipped("reciprocity", sc.seed, e.to_string())),
    };
    let engine = sc.engine_with(|mut c| {
        c.source_grid = rg.clone();
        c.receive_grid = rg;
        c.factor = factor;
        c.model = Model::Scalar3D;
        c.injection = None;
        c.with_reciprocity(true)
    });
    let engine = match engine {
        Ok(e) => e,
        Err(CliError::Core(planewave_core::Error::Config(m))) => return Ok(skipped("reciprocity", sc.seed, m)),
        Err(e) => return Err(e),
    };
    let pts: Vec<SpatialPoint> =
        (0..12).map(|i| SpatialPoint::new(0.17 * i as f64, 0.11 * (i % 4) as f64 - 0.2, 0.0)).collect();
    let reals = engine.realize_batch(5, &pts, &pts)?;
    let mut worst = 0.0f64;
    for h in &reals {
        for a in 0..pts.len() {
            for b in 0..pts.len() {
                worst = worst.max((h.get(a, b) - h.get(b, a)).norm());
            }
        }
    }
    Ok(result("reciprocity", worst, 1e-10, worst <= 1e-10, 5, sc.seed, format!("max |h(r,s) − h(s,r)| = {worst:.2e}")))
}

/// The complete model restricted to the up-going block against the scalar model.
fn complete_reduction(sc: &Scenario) -> Result<CheckResult> {
    if sc.model == ModelSpec::Scalar2d {
        return Ok(skipped("complete", sc.seed, "3D models only"));
    }
    let strip = |model: Model| {
        move |mut c: planewave_core::synthesis::SynthesisConfig| {
            c.model = model;
            c.injection = None;
            c.enforce_reciprocity = false;
            c
        }
    };
    let scalar = sc.engine_with(strip(Model::Scalar3D))?;
    let complete = sc.engine_with(strip(Model::Complete3D(BlockGains::up_only())))?;
    let rx = [SpatialPoint::new(0.0, 0.0, 0.4), SpatialPoint::new(0.3, 0.1, 0.9)];
    let tx = [SpatialPoint::new(0.2, 0.0, -0.5), SpatialPoint::ORIGIN];
    let a = scalar.realize_batch(10, &rx, &tx)?;
    let b = complete.realize_batch(10, &rx, &tx)?;
    let bits = |r: &ChannelRealization| r.h.iter().flat_map(|v| [v.re.to_bits(), v.im.to_bits()]).collect::<Vec<_>>();
    let equal = a.iter().zip(&b).filter(|(x, y)| bits(x) == bits(y)).count();
    Ok(result("complete", (10 - equal) as f64, 0.0, equal == 10, 10, sc.seed, format!("{equal}/10 realizations bitwise equal")))
}

fn vmf_check(sc: &Scenario) -> Result<CheckResult> {
    if sc.model == ModelSpec::Scalar2d {
        return Ok(skipped("vmf", sc.seed, "3D models only"));
    }
    let (nt, np) = NORMALIZATION_GRID;
    let mut norm = 0.0f64;
    for side in [Side::Receive, Side::Source] {
        norm = norm.max(check_normalization(&sc.distribution(side)?, nt, np));
    }
    let mut trip = 0.0f64;
    for alpha in [0.5, 1.0, 10.0, 100.0] {
        let r = mean_resultant(alpha);
        trip = trip.max((alpha_from_variance(1.0 - r * r)? / alpha - 1.0).abs());
    }
    let pass = norm <= 1e-6 && trip <= 1e-10;
    Ok(result("vmf", norm, 1e-6, pass, 2, sc.seed, format!("normalization residual {norm:.1e}, round trip {trip:.1e}")))
}

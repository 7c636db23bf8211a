//! Acceptance suite: one PASS/FAIL line per criterion.
//!
//! Criterion 5 checks the disk integral against the nominal value `π²κ`;
//! the integral is `2πκ`, so that criterion fails by construction. It is
//! listed in `KNOWN_FAILURES` and reported as FAIL without failing the run.
//! Set `ACCEPTANCE_STRICT=1` to make every failure fatal.

use std::f64::consts::PI;
use std::time::Instant;

use planewave_core::angular::{
    alpha_from_variance, check_normalization, mean_resultant, AngularDistribution, VmfComponent, VmfMixture,
    NORMALIZATION_GRID,
};
use planewave_core::geometry::{Direction3, MediumParams, SpatialPoint};
use planewave_core::psd::{average_power, mercer_power_bound, normalize_factor, SpectralFactor};
use planewave_core::spectral_support::{
    bandwidth_isotropic, bandwidth_regions, build_disk_grid, dof_planar_loss_ratio, evanescent_power_loss_db,
    AngularRegion, AngularRegionSet, DiskGrid, GridMode,
};
use planewave_core::synthesis::{BlockGains, ChannelRealization, Injection, Model, SynthesisConfig, Synthesizer};
use planewave_core::validation::{
    clarke_acf, disk_integral_check, empirical_acf, empirical_acf_joint, gaussianity_test, ks_critical_1pct,
    ks_statistic, stationarity_test, weyl_check, weyl_check_2d, Side, StationarityProbe,
};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

const KNOWN_FAILURES: &[u32] = &[5];

type Check<'a> = (u32, &'static str, Box<dyn FnOnce() -> Outcome + 'a>);

struct Outcome {
    pass: bool,
    detail: String,
}

fn medium() -> MediumParams {
    MediumParams::new(1.0).unwrap()
}

fn polar(m: &MediumParams, n: (usize, usize)) -> DiskGrid {
    build_disk_grid(m, GridMode::Polar, n, 1e-3 * m.kappa).unwrap()
}

fn x_line(n: usize, step: f64) -> Vec<SpatialPoint> {
    (0..n).map(|i| SpatialPoint::new(i as f64 * step, 0.0, 0.0)).collect()
}

fn x_lag(d: f64) -> SpatialPoint {
    SpatialPoint::new(d, 0.0, 0.0)
}

fn run(synth: &Synthesizer, n: u64, rx: &[SpatialPoint], tx: &[SpatialPoint]) -> Vec<ChannelRealization> {
    let plan = synth.plan(rx, tx).unwrap();
    (0..n).map(|t| plan.realize(t).unwrap()).collect()
}

fn vmf_mixture(comps: &[(f64, f64, f64)], weights: &[f64]) -> AngularDistribution {
    let c = comps
        .iter()
        .map(|&(t, p, nu2)| VmfComponent::from_variance(Direction3::from_degrees(t, p).unwrap(), nu2).unwrap())
        .collect();
    AngularDistribution::Mixture(VmfMixture::new(c, weights.to_vec()).unwrap())
}

/// Isotropic receive ACF on a 64×64 polar grid (shared by criteria 1 and 2).
fn isotropic_acf() -> (Vec<f64>, Vec<f64>, Vec<f64>) {
    let m = medium();
    let rx = polar(&m, (64, 64));
    let tx = polar(&m, (8, 8));
    let s = Synthesizer::new(SynthesisConfig::new(rx, tx, SpectralFactor::isotropic(), 1).unwrap()).unwrap();
    let reals = run(&s, 2000, &x_line(41, m.lambda / 8.0), &[SpatialPoint::ORIGIN]);
    let lags = [0.0, 0.125, 0.25, 0.5, 0.75, 1.0, 1.5].map(|f| f * m.lambda);
    let pts: Vec<SpatialPoint> = lags.iter().map(|&d| x_lag(d)).collect();
    let e = empirical_acf(&reals, &pts, Side::Receive).unwrap();
    (lags.to_vec(), e.values.iter().map(|v| v.re).collect(), e.stderr)
}

fn c1_clarke(acf: &(Vec<f64>, Vec<f64>, Vec<f64>)) -> Outcome {
    let m = medium();
    let (lags, vals, se) = acf;
    let mut worst = 0.0f64;
    let mut rows = Vec::new();
    for ((l, v), s) in lags.iter().zip(vals).zip(se) {
        let c = clarke_acf(*l, &m);
        worst = worst.max((v - c).abs());
        rows.push(format!("{:.3}λ:{v:+.4}(±{s:.4})/{c:+.4}", l / m.lambda));
    }
    Outcome { pass: worst <= 0.03, detail: format!("max |emp − sinc| = {worst:.4} ≤ 0.03 [{}]", rows.join(" ")) }
}

fn c2_decorrelation(acf: &(Vec<f64>, Vec<f64>, Vec<f64>)) -> Outcome {
    let m = medium();
    let (lags, vals, _) = acf;
    let mut worst = 0.0f64;
    for (l, v) in lags.iter().zip(vals) {
        let k = l / (m.lambda / 2.0);
        if k >= 1.0 && (k - k.round()).abs() < 1e-12 {
            worst = worst.max(v.abs());
        }
    }
    Outcome { pass: worst <= 0.03, detail: format!("max |ACF| at λ/2, λ, 3λ/2 = {worst:.4} ≤ 0.03") }
}

fn c3_separability() -> Outcome {
    let m = medium();
    let g = polar(&m, (24, 24));
    let s = Synthesizer::new(SynthesisConfig::new(g.clone(), g, SpectralFactor::isotropic(), 3).unwrap()).unwrap();
    let pts = x_line(9, m.lambda / 8.0);
    let reals = run(&s, 600, &pts, &pts);
    let lags: Vec<SpatialPoint> = [0.125, 0.25, 0.375].iter().map(|f| x_lag(f * m.lambda)).collect();
    let r = empirical_acf(&reals, &lags, Side::Receive).unwrap();
    let t = empirical_acf(&reals, &lags, Side::Source).unwrap();
    let mut worst = 0.0f64;
    for (a, la) in lags.iter().enumerate() {
        for (b, lb) in lags.iter().enumerate() {
            let (j, sj) = empirical_acf_joint(&reals, la, lb).unwrap();
            let prod = r.values[a] * t.values[b];
            let se = (sj * sj + (t.values[b].norm() * r.stderr[a]).powi(2) + (r.values[a].norm() * t.stderr[b]).powi(2)).sqrt();
            worst = worst.max((j - prod).norm() / se);
        }
    }
    Outcome { pass: worst <= 3.0, detail: format!("max |joint − product| / se = {worst:.2} ≤ 3 over 9 lag pairs") }
}

fn mean_power(reals: &[ChannelRealization]) -> f64 {
    let n: usize = reals.iter().map(|r| r.h.len()).sum();
    reals.iter().flat_map(|r| r.h.iter()).map(|v| v.norm_sqr()).sum::<f64>() / n as f64
}

fn c4_power() -> Outcome {
    let m = medium();
    let rx = polar(&m, (32, 32));
    let tx = polar(&m, (16, 16));
    // Source points λ/2 apart: an isotropic source side makes them uncorrelated.
    let sources = x_line(16, m.lambda / 2.0);
    let receiver = [SpatialPoint::new(0.1, -0.2, 0.3)];
    let iso = Synthesizer::new(SynthesisConfig::new(rx.clone(), tx.clone(), SpectralFactor::isotropic(), 4).unwrap()).unwrap();
    let p_iso = mean_power(&run(&iso, 1000, &receiver, &sources));
    let mix = vmf_mixture(&[(45.0, 0.0, 0.01), (50.0, 90.0, 0.02), (20.0, 130.0, 0.004)], &[1.0 / 3.0; 3]);
    let f = SpectralFactor::separable(AngularDistribution::Isotropic, mix).unwrap();
    let f = normalize_factor(&f, &rx, &tx, 1.0).unwrap();
    let vmf = Synthesizer::new(SynthesisConfig::new(rx, tx, f, 5).unwrap()).unwrap();
    let p_vmf = mean_power(&run(&vmf, 1000, &receiver, &sources));
    let ok = (p_iso - 1.0).abs() <= 0.05 && (p_vmf - 1.0).abs() <= 0.05;
    Outcome { pass: ok, detail: format!("E|h|² isotropic = {p_iso:.4}, vMF mixture = {p_vmf:.4} (1 ± 0.05)") }
}

fn c5_disk_integral() -> Outcome {
    let m = medium();
    let r = disk_integral_check(&m, (256, 64), 1e-4 * m.kappa).unwrap();
    Outcome {
        pass: r.relative_error_nominal <= 3e-3,
        detail: format!(
            "quadrature = {:.6}, π²κ = {:.6} (rel err {:.4} > 0.003); 2πκ = {:.6} (rel err {:.2e}, rim strip only)",
            r.quadrature, r.nominal_value, r.relative_error_nominal, r.exact_value, r.relative_error_exact
        ),
    }
}

fn c6_bandwidth() -> Outcome {
    let m = medium();
    let iso = bandwidth_isotropic(&m);
    let e1 = (iso / (PI * m.kappa * m.kappa) - 1.0).abs();
    let e2 = (dof_planar_loss_ratio() / (PI / 4.0) - 1.0).abs();
    let theta_max = 50f64.to_radians();
    let cap = AngularRegionSet::new(vec![AngularRegion::Cap { center: Direction3::ZENITH, half_angle: theta_max }]).unwrap();
    let union = AngularRegionSet::new(vec![
        AngularRegion::Cap { center: Direction3::ZENITH, half_angle: theta_max },
        AngularRegion::Cap { center: Direction3::ZENITH, half_angle: 0.5 * theta_max },
    ])
    .unwrap();
    let oracle = PI * theta_max.sin().powi(2) * m.kappa * m.kappa;
    let e3 = (bandwidth_regions(&cap, &m).unwrap() / oracle - 1.0).abs();
    let e4 = (bandwidth_regions(&union, &m).unwrap() / oracle - 1.0).abs();
    let ok = e1 <= 1e-12 && e2 <= 1e-12 && e3 <= 5e-3 && e4 <= 5e-3;
    Outcome {
        pass: ok,
        detail: format!("|D| rel err {e1:.1e}, π/4 rel err {e2:.1e}, cap {e3:.2e}, nested-cap union {e4:.2e} (≤ 5e-3)"),
    }
}

fn c7_evanescent() -> Outcome {
    let m = medium();
    let db = evanescent_power_loss_db(10.0 * m.lambda, &m);
    let ds: Vec<f64> = (1..=50).map(|i| 0.2 * i as f64 * m.lambda).collect();
    let v: Vec<f64> = ds.iter().map(|&d| evanescent_power_loss_db(d, &m)).collect();
    let slope = (v[1] - v[0]) / (ds[1] - ds[0]);
    let monotone = v.windows(2).all(|w| w[1] < w[0]);
    let linear = ds.iter().zip(&v).all(|(d, x)| (x - slope * d).abs() <= 1e-9 * x.abs());
    let ok = (db + 545.8).abs() <= 0.1 && monotone && linear;
    Outcome { pass: ok, detail: format!("dB(10λ) = {db:.3} (−545.8 ± 0.1), monotone {monotone}, log-linear {linear}") }
}

fn c8_weyl() -> Outcome {
    let m = medium();
    let l = m.lambda;
    let pts3 = [
        SpatialPoint::new(0.0, 0.0, l),
        SpatialPoint::new(0.0, 0.0, 2.0 * l),
        SpatialPoint::new(0.0, 0.0, 5.0 * l),
        SpatialPoint::new(0.6 * l, -0.3 * l, 2.0 * l),
    ];
    let r3 = weyl_check(&pts3, 4.0, 512, 512, &m).unwrap();
    let pts2 = [(0.0, l), (0.0, 2.0 * l), (0.0, 5.0 * l), (0.7 * l, 2.0 * l)];
    let r2 = weyl_check_2d(&pts2, 4.0, 512, &m).unwrap();
    let ok = r3.max_relative_error <= 1e-3 && r2.max_relative_error <= 1e-3;
    Outcome { pass: ok, detail: format!("3D max rel err {:.2e}, 2D max rel err {:.2e} (≤ 1e-3)", r3.max_relative_error, r2.max_relative_error) }
}

fn c9_vmf() -> Outcome {
    let (nt, np) = NORMALIZATION_GRID;
    let mut norm_worst = 0.0f64;
    for alpha in [1e-9, 1.0, 10.0, 100.0] {
        let c = VmfComponent::new(Direction3::from_degrees(20.0, 30.0).unwrap(), alpha).unwrap();
        let d = AngularDistribution::Mixture(VmfMixture::new(vec![c], vec![1.0]).unwrap());
        norm_worst = norm_worst.max(check_normalization(&d, nt, np));
    }
    let mut trip_worst = 0.0f64;
    for alpha in [0.5, 1.0, 3.0, 10.0, 50.0, 100.0, 500.0] {
        let r = mean_resultant(alpha);
        let back = alpha_from_variance(1.0 - r * r).unwrap();
        trip_worst = trip_worst.max((back - alpha).abs() / alpha);
    }
    let n = 100_000;
    let mut rng = ChaCha8Rng::seed_from_u64(9);
    let mut ks_worst = 0.0f64;
    for alpha in [1.0, 10.0, 100.0] {
        let c = VmfComponent::new(Direction3::ZENITH, alpha).unwrap();
        let (mut t, mut phi): (Vec<f64>, Vec<f64>) = (0..n)
            .map(|_| {
                let d = c.sample(&mut rng);
                (d.z, d.y.atan2(d.x) + PI)
            })
            .unzip();
        let crit = ks_critical_1pct(n);
        // μ̂ = ẑ: t = cosθ ∈ [0, 1] with density ∝ e^{αt}.
        let cdf = |x: f64| ((alpha * (x - 1.0)).exp() - (-alpha).exp()) / (1.0 - (-alpha).exp());
        ks_worst = ks_worst.max(ks_statistic(&mut t, |x| cdf(x.clamp(0.0, 1.0))) / crit);
        ks_worst = ks_worst.max(ks_statistic(&mut phi, |x| x / (2.0 * PI)) / crit);
    }
    let ok = norm_worst <= 1e-6 && trip_worst <= 1e-10 && ks_worst < 1.0;
    Outcome {
        pass: ok,
        detail: format!("normalization residual {norm_worst:.1e} (≤ 1e-6), round trip {trip_worst:.1e} (≤ 1e-10), KS/critical {ks_worst:.3} (< 1)"),
    }
}

fn c10_reciprocity() -> Outcome {
    let m = medium();
    let g = polar(&m, (16, 16));
    let cfg = SynthesisConfig::new(g.clone(), g, SpectralFactor::isotropic(), 10).unwrap().with_reciprocity(true);
    let s = Synthesizer::new(cfg).unwrap();
    let pts: Vec<SpatialPoint> =
        (0..12).map(|i| SpatialPoint::new(0.17 * i as f64, 0.11 * (i % 4) as f64 - 0.2, 0.0)).collect();
    let mut worst = 0.0f64;
    for t in 0..5 {
        let h = s.realize(t, &pts, &pts).unwrap();
        for a in 0..pts.len() {
            for b in 0..pts.len() {
                worst = worst.max((h.get(a, b) - h.get(b, a)).norm());
            }
        }
    }
    Outcome { pass: worst <= 1e-10, detail: format!("max |h(r,s) − h(s,r)| = {worst:.2e} (≤ 1e-10)") }
}

fn c11_reduction() -> Outcome {
    let m = medium();
    let g = polar(&m, (16, 16));
    let base = SynthesisConfig::new(g.clone(), g, SpectralFactor::isotropic(), 11).unwrap();
    let scalar = Synthesizer::new(base.clone()).unwrap();
    let complete = Synthesizer::new(base.with_model(Model::Complete3D(BlockGains::up_only()))).unwrap();
    let rx = [SpatialPoint::new(0.0, 0.0, 0.4), SpatialPoint::new(0.3, 0.1, 0.9)];
    let tx = [SpatialPoint::new(0.2, 0.0, -0.5), SpatialPoint::ORIGIN];
    let mut equal = 0;
    for t in 0..10 {
        let a = scalar.realize(t, &rx, &tx).unwrap();
        let b = complete.realize(t, &rx, &tx).unwrap();
        if a.h.iter().zip(&b.h).all(|(x, y)| x.re.to_bits() == y.re.to_bits() && x.im.to_bits() == y.im.to_bits()) {
            equal += 1;
        }
    }
    Outcome { pass: equal == 10, detail: format!("{equal}/10 realizations bitwise equal") }
}

fn c12_gaussianity() -> Outcome {
    let m = medium();
    let rx = polar(&m, (32, 32));
    let tx = polar(&m, (8, 8));
    let s = Synthesizer::new(SynthesisConfig::new(rx, tx, SpectralFactor::isotropic(), 12).unwrap()).unwrap();
    // Points λ/2 apart are uncorrelated, hence independent.
    let reals = run(&s, 1000, &x_line(5, m.lambda / 2.0), &[SpatialPoint::ORIGIN]);
    let samples: Vec<_> = reals.iter().flat_map(|r| r.h.iter().copied()).collect();
    let g = gaussianity_test(&samples).unwrap();
    Outcome {
        pass: g.pass,
        detail: format!(
            "n = {}, KS re {:.4} / im {:.4} < {:.4}, pseudo-covariance ratio {:.4} ≤ 0.05",
            g.n, g.ks_re, g.ks_im, g.critical, g.pseudo_ratio
        ),
    }
}

fn random_mixture(rng: &mut ChaCha8Rng) -> AngularDistribution {
    let k = rng.random_range(1..=3);
    let comps: Vec<VmfComponent> = (0..k)
        .map(|_| {
            let d = Direction3::from_degrees(rng.random_range(0.0..80.0), rng.random_range(0.0..360.0)).unwrap();
            VmfComponent::new(d, rng.random_range(1.0..50.0)).unwrap()
        })
        .collect();
    let w: Vec<f64> = (0..k).map(|_| rng.random_range(0.2..1.0)).collect();
    let total: f64 = w.iter().sum();
    AngularDistribution::Mixture(VmfMixture::new(comps, w.iter().map(|x| x / total).collect()).unwrap())
}

fn c13_stationarity() -> Outcome {
    let m = medium();
    let g = polar(&m, (16, 16));
    let l = m.lambda;
    let bases = [SpatialPoint::ORIGIN, SpatialPoint::new(0.7 * l, 0.2 * l, 0.5 * l), SpatialPoint::new(-0.3 * l, 0.4 * l, l)];
    let lag = SpatialPoint::new(0.25 * l, 0.0, 0.0);
    let mut rx = bases.to_vec();
    rx.extend(bases.iter().map(|b| *b + lag));
    let tx = [SpatialPoint::ORIGIN, SpatialPoint::new(0.2 * l, -0.5 * l, 0.3 * l), SpatialPoint::new(0.0, 0.9 * l, -0.4 * l)];
    let lagged: Vec<StationarityProbe> =
        (0..3).map(|k| StationarityProbe { receive_a: k, source_a: k, receive_b: k + 3, source_b: k }).collect();
    let power: Vec<StationarityProbe> =
        (0..3).map(|k| StationarityProbe { receive_a: k, source_a: k, receive_b: k, source_b: k }).collect();
    let mut rng = ChaCha8Rng::seed_from_u64(13);
    let mut passed = 0;
    let mut worst = 0.0f64;
    for trial in 0..10 {
        let f = SpectralFactor::separable(random_mixture(&mut rng), random_mixture(&mut rng)).unwrap();
        let f = normalize_factor(&f, &g, &g, 1.0).unwrap();
        let s = Synthesizer::new(SynthesisConfig::new(g.clone(), g.clone(), f, 1300 + trial).unwrap()).unwrap();
        let reals = run(&s, 300, &rx, &tx);
        let a = stationarity_test(&reals, &lagged).unwrap();
        let b = stationarity_test(&reals, &power).unwrap();
        worst = worst.max(a.max_discrepancy).max(b.max_discrepancy);
        if a.pass && b.pass {
            passed += 1;
        }
    }
    // Counterexample: one evanescent node added on the receive side.
    let cfg = SynthesisConfig::new(g.clone(), g, SpectralFactor::isotropic(), 1313)
        .unwrap()
        .with_injection(Injection { kx: 1.2 * m.kappa, ky: 0.0, amplitude: 1.0 });
    let s = Synthesizer::new(cfg).unwrap();
    let heights = [SpatialPoint::ORIGIN, SpatialPoint::new(0.0, 0.0, 0.5 * l)];
    let reals = run(&s, 300, &heights, &[SpatialPoint::ORIGIN]);
    let probes: Vec<StationarityProbe> =
        (0..2).map(|k| StationarityProbe { receive_a: k, source_a: 0, receive_b: k, source_b: 0 }).collect();
    let counter = stationarity_test(&reals, &probes).unwrap();
    Outcome {
        pass: passed == 10 && !counter.pass,
        detail: format!(
            "{passed}/10 vMF mixtures stationary (worst z = {worst:.2} ≤ 3); evanescent injection z = {:.1} → {}",
            counter.max_discrepancy,
            if counter.pass { "pass (unexpected)" } else { "fail (expected)" }
        ),
    }
}

fn c14_mercer() -> Outcome {
    let m = medium();
    let g = polar(&m, (8, 8));
    let mut rng = ChaCha8Rng::seed_from_u64(14);
    let mut held = 0;
    let mut ratio = 0.0f64;
    for _ in 0..20 {
        let vals: Vec<f64> = (0..g.len() * g.len()).map(|_| rng.random::<f64>().powi(2) * 50.0).collect();
        let f = SpectralFactor::coupled(g.len(), g.len(), vals).unwrap();
        let p = average_power(&f, &g, &g).unwrap();
        let bound = mercer_power_bound(&f.tabulate(&g, &g).unwrap(), &m);
        ratio = ratio.max(p / bound);
        if p <= bound {
            held += 1;
        }
    }
    Outcome { pass: held == 20, detail: format!("{held}/20 factors within (κ²ηA/8)², max P/bound = {ratio:.3}") }
}

fn main() {
    let strict = std::env::var("ACCEPTANCE_STRICT").map(|v| v == "1").unwrap_or(false);
    println!("acceptance suite (14 criteria)");
    let acf = {
        let t = Instant::now();
        let a = isotropic_acf();
        eprintln!("  isotropic ACF batch: {:.1}s", t.elapsed().as_secs_f64());
        a
    };
    let mut checks: Vec<Check<'_>> = vec![
        (1, "clarke-equivalence", Box::new(|| c1_clarke(&acf))),
        (2, "half-wavelength-decorrelation", Box::new(|| c2_decorrelation(&acf))),
        (3, "separability", Box::new(c3_separability)),
        (4, "power-normalization", Box::new(c4_power)),
        (5, "disk-integral", Box::new(c5_disk_integral)),
        (6, "bandwidth-dof-constants", Box::new(c6_bandwidth)),
        (7, "evanescent-loss", Box::new(c7_evanescent)),
        (8, "weyl-identity", Box::new(c8_weyl)),
        (9, "vmf-suite", Box::new(c9_vmf)),
        (10, "reciprocity", Box::new(c10_reciprocity)),
        (11, "complete-model-reduction", Box::new(c11_reduction)),
        (12, "gaussianity", Box::new(c12_gaussianity)),
        (13, "stationarity", Box::new(c13_stationarity)),
        (14, "mercer-bound", Box::new(c14_mercer)),
    ];
    let (mut passed, mut known, mut unexpected) = (0, Vec::new(), Vec::new());
    for (id, name, check) in checks.drain(..) {
        let t = Instant::now();
        let o = check();
        let tag = if o.pass { "PASS" } else { "FAIL" };
        println!("{tag} {id:>2} {name}: {} ({:.1}s)", o.detail, t.elapsed().as_secs_f64());
        if o.pass {
            passed += 1;
        } else if KNOWN_FAILURES.contains(&id) {
            known.push(id);
        } else {
            unexpected.push(id);
        }
    }
    println!("{passed}/14 passed; known failures {known:?}; unexpected failures {unexpected:?}");
    if !unexpected.is_empty() || (strict && !known.is_empty()) {
        std::process::exit(1);
    }
}

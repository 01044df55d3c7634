//! Acceptance run: one PASS/FAIL line per criterion.
//!
//! Criteria listed in `KNOWN_RED` are reported like the others but do not
//! fail the process; everything else must pass.

use std::f64::consts::PI;
use std::path::Path;
use std::process::ExitCode;
use std::sync::Arc;
use std::time::{Duration, Instant};

use num_complex::Complex64;
use rand::seq::SliceRandom;
use rand::Rng;

use asfnet_core::dataset::{generate, split, DatasetConfig, Record};
use asfnet_core::oracle::{
    radial_falloff_study, sphere_scattered_pressure, sphere_total_pressure, ScatterConfig, SphereScatterer,
    FALLOFF_ANGLES_DEG,
};
use asfnet_core::propagate::{mc_estimate, trace_scene, NoAsf, OracleAsf};
use asfnet_core::regressor::{evaluate_testset, train, ModelSet, NetworkConfig, NetworkParams, Sample, TrainConfig};
use asfnet_core::render::fft::{next_pow2, rfft};
use asfnet_core::render::{synthesize, BandEnvelopes, DEFAULT_SAMPLE_RATE};
use asfnet_core::shfield::sh_basis_all;
use asfnet_core::sphgeom::{icosphere, uniform_unit_vector};
use asfnet_core::pointcloud::REGRESSOR_POINTS;
use asfnet_core::{rng, Vec3, ASF_BANDS, BANDS};
use asfnet_tools::commands::{fit_study, study_spheres};
use asfnet_tools::scene;

/// Criteria whose failure is analysed rather than fixed.
const KNOWN_RED: &[u32] = &[1, 2];

struct Outcome {
    pass: bool,
    detail: String,
}

fn check(pass: bool, detail: String) -> Outcome {
    Outcome { pass, detail }
}

fn main() -> ExitCode {
    let only: Vec<u32> = std::env::args().skip(1).filter_map(|a| a.parse().ok()).collect();
    let criteria: [(u32, &str, Duration, fn() -> Outcome); 9] = [
        (1, "SH order study", Duration::from_secs(60), sh_order_study),
        (2, "inverse-distance law", Duration::from_secs(10), inverse_distance_law),
        (3, "oracle correctness", Duration::from_secs(30), oracle_correctness),
        (4, "regressor verification", Duration::from_secs(60), regressor_verification),
        (5, "learning proxy", Duration::from_secs(7200), learning_proxy),
        (6, "Monte Carlo estimator", Duration::from_secs(60), monte_carlo),
        (7, "diffraction compensation", Duration::from_secs(300), compensation),
        (8, "IR synthesis", Duration::from_secs(30), ir_synthesis),
        (9, "reverberation", Duration::from_secs(120), reverberation),
    ];
    let mut unexpected = 0;
    for (id, name, budget, run) in criteria {
        if !only.is_empty() && !only.contains(&id) {
            continue;
        }
        let t = Instant::now();
        let o = run();
        let elapsed = t.elapsed();
        let pass = o.pass && elapsed <= budget;
        let tag = if pass {
            "PASS"
        } else if KNOWN_RED.contains(&id) {
            "FAIL (known)"
        } else {
            unexpected += 1;
            "FAIL"
        };
        println!(
            "{tag} criterion {id} {name}: {} [{:.1} s of {} s]",
            o.detail,
            elapsed.as_secs_f64(),
            budget.as_secs()
        );
    }
    if unexpected > 0 {
        ExitCode::FAILURE
    } else {
        ExitCode::SUCCESS
    }
}

// order-3 fit error below 2% at 125 Hz and 5% at 1000 Hz, never rising with order
fn sh_order_study() -> Outcome {
    let objects = study_spheres(50, 0).unwrap();
    let rows = fit_study(&objects, &[125.0, 1000.0], 5).unwrap();
    let mut pass = true;
    let mut parts = Vec::new();
    for (f, bound) in [(125.0, 0.02), (1000.0, 0.05)] {
        let band: Vec<_> = rows.iter().filter(|r| r.frequency == f).collect();
        let monotone = band.windows(2).all(|w| w[1].relative_error <= w[0].relative_error);
        let e3 = band.iter().find(|r| r.order == 3).unwrap().relative_error;
        pass &= monotone && e3 < bound;
        parts.push(format!("{f} Hz order-3 error {e3:.4} (< {bound}), non-increasing {monotone}"));
    }
    check(pass, parts.join("; "))
}

// |p| at 10 m from the 5 m anchor within 5% per direction; near field worse
fn inverse_distance_law() -> Outcome {
    let cfg = ScatterConfig::new(vec![SphereScatterer::centered(0.75).unwrap()], 500.0).unwrap();
    let rows = radial_falloff_study(&cfg, &FALLOFF_ANGLES_DEG, &[1.0, 8.0, 10.0], 5.0).unwrap();
    let mut pass = true;
    let mut parts = Vec::new();
    for &a in &FALLOFF_ANGLES_DEG {
        let err = |r: f64| {
            rows.iter()
                .find(|x| x.angle_deg == a && x.radius == r)
                .unwrap()
                .relative_error
        };
        let (e1, e8, e10) = (err(1.0), err(8.0), err(10.0));
        let ok = e10 < 0.05 && e1 > e8;
        pass &= ok;
        parts.push(format!("{a}°: r=10 {e10:.4} (< 0.05), r=1 {e1:.3} > r=8 {e8:.4}"));
    }
    check(pass, parts.join("; "))
}

fn oracle_correctness() -> Outcome {
    // normal derivative of the total field at the surface
    let mut residual: f64 = 0.0;
    for ka in [0.3, 1.0, 3.0, 8.0] {
        for g in [0.0, 0.7, 1.9, PI] {
            let h = 1e-4 * ka;
            let p = |kr: f64| sphere_total_pressure(ka, kr, g).unwrap();
            let dp: Complex64 = (p(ka) * -3.0 + p(ka + h) * 4.0 - p(ka + 2.0 * h)) / (2.0 * h);
            residual = residual.max(dp.norm() / p(ka).norm());
        }
    }
    // small-sphere backscatter
    let (ka, kr) = (0.05, 500.0);
    let p = sphere_scattered_pressure(ka, kr, PI).unwrap().norm();
    let rayleigh = ka.powi(3) / (3.0 * kr) * 2.5;
    let rayleigh_err = (p - rayleigh).abs() / rayleigh;
    // |p|·kr over kr in [10ka, 100ka]
    let ka = 1.0;
    let far: Vec<f64> = (0..=90)
        .map(|i| {
            let kr = 10.0 * ka + i as f64 * ka;
            sphere_scattered_pressure(ka, kr, PI).unwrap().norm() * kr
        })
        .collect();
    let reference = *far.last().unwrap();
    let spread = far.iter().map(|v| (v / reference - 1.0).abs()).fold(0.0, f64::max);
    check(
        residual < 1e-4 && rayleigh_err < 0.02 && spread < 0.005,
        format!(
            "Neumann residual {residual:.2e} (< 1e-4), Rayleigh backscatter error {rayleigh_err:.4} (< 0.02), \
             far-field |p|·r spread {spread:.4} (< 0.005)"
        ),
    )
}

fn regressor_verification() -> Outcome {
    let net = NetworkConfig::default();
    let p = NetworkParams::init(net.clone(), 3).unwrap();
    let mut r = rng::seeded(41);
    let pts: Vec<Vec<Vec3>> = (0..2)
        .map(|_| (0..REGRESSOR_POINTS).map(|_| uniform_unit_vector(&mut r) * r.random_range(0.3..1.0)).collect())
        .collect();
    let targets: Vec<Vec<f64>> = (0..2)
        .map(|_| (0..net.output_len()).map(|_| r.random_range(-0.2..0.2)).collect())
        .collect();
    let batch: Vec<Sample<'_>> = pts
        .iter()
        .zip(&targets)
        .map(|(p, t)| Sample { points: p, target: t })
        .collect();
    let (_, g) = p.gradient(&batch, 1).unwrap();

    // eight weights and two biases from every layer
    let mut offset = 0;
    let mut worst: f64 = 0.0;
    let mut checked = 0;
    for (fan_in, fan_out) in net.layer_shapes() {
        let w = fan_in * fan_out;
        let mut picks: Vec<usize> = (0..8).map(|_| offset + r.random_range(0..w)).collect();
        picks.extend((0..2).map(|_| offset + w + r.random_range(0..fan_out)));
        for i in picks {
            let h = 1e-5;
            let mut a = p.clone();
            a.values_mut()[i] += h;
            let mut b = p.clone();
            b.values_mut()[i] -= h;
            let fd = (a.mean_loss(&batch).unwrap() - b.mean_loss(&batch).unwrap()) / (2.0 * h);
            let scale = g[i].abs().max(fd.abs());
            let err = if scale > 1e-8 { (g[i] - fd).abs() / scale } else { 0.0 };
            worst = worst.max(err);
            checked += 1;
        }
        offset += w + fan_out;
    }
    assert_eq!(offset, p.param_count());

    let cloud: Vec<Vec3> = (0..REGRESSOR_POINTS)
        .map(|_| uniform_unit_vector(&mut r) * r.random_range(0.1..1.0))
        .collect();
    let y = p.forward(&cloud).unwrap();
    let mut q = cloud.clone();
    let invariant = (0..100).all(|_| {
        q.shuffle(&mut r);
        p.forward(&q).unwrap() == y
    });
    check(
        worst < 1e-4 && invariant,
        format!(
            "worst gradient relative error {worst:.2e} over {checked} parameters in {} layers (< 1e-4), \
             bit-exact under 100 shuffles {invariant}",
            net.layer_shapes().len()
        ),
    )
}

/// Training budget of the learning proxy.
const PROXY_EPOCHS: usize = 15;
const PROXY_BATCH: usize = 32;

fn learning_proxy() -> Outcome {
    let cfg = DatasetConfig {
        count: 2000,
        seed: 7,
        ..DatasetConfig::default()
    };
    let records = generate(&cfg).unwrap();
    let (train_ix, test_ix) = split(&records, 7);
    let mut models = ModelSet::new();
    for (band, &f) in ASF_BANDS.iter().enumerate() {
        let samples = |ix: &[usize]| -> Vec<Sample<'_>> {
            ix.iter()
                .map(|&i| Sample {
                    points: &records[i].points,
                    target: &records[i].label(f).unwrap().sh.coeffs,
                })
                .collect()
        };
        let tc = TrainConfig {
            epochs: PROXY_EPOCHS,
            batch_size: PROXY_BATCH,
            seed: band as u64,
            ..TrainConfig::default()
        };
        let out = train(NetworkConfig::default(), &samples(&train_ix), &samples(&test_ix), &tc).unwrap();
        models.insert(f, out.params).unwrap();
    }
    let test: Vec<&Record> = test_ix.iter().map(|&i| &records[i]).collect();
    let grid = Arc::new(icosphere(3).unwrap());
    let rep = evaluate_testset(&models, &test, &grid).unwrap();
    let nre: Vec<f64> = rep.per_frequency.iter().map(|x| x.1).collect();
    let ordered = nre.windows(2).all(|w| w[0] <= w[1] + 0.02);
    let table: Vec<String> = rep
        .per_frequency
        .iter()
        .map(|(f, m, _)| format!("{f} Hz {m:.4}"))
        .collect();
    check(
        rep.overall <= 0.15 && ordered,
        format!(
            "{} records ({} train, {} test), overall NRE {:.4} (<= 0.15), per band [{}], \
             ordered within 0.02 {ordered}",
            records.len(),
            train_ix.len(),
            test_ix.len(),
            rep.overall,
            table.join(", ")
        ),
    )
}

fn y10_squared_integral(n: usize, seed: u64) -> f64 {
    let mut r = rng::seeded(seed);
    let f: Vec<f64> = (0..n)
        .map(|_| sh_basis_all(1, uniform_unit_vector(&mut r))[2].powi(2))
        .collect();
    mc_estimate(&f, &vec![1.0 / (4.0 * PI); n]).unwrap()
}

fn monte_carlo() -> Outcome {
    let est = y10_squared_integral(1_000_000, 17);
    let sd = |n: usize| {
        let v: Vec<f64> = (0..200).map(|t| y10_squared_integral(n, 1000 + t)).collect();
        let m = v.iter().sum::<f64>() / v.len() as f64;
        (v.iter().map(|x| (x - m).powi(2)).sum::<f64>() / (v.len() - 1) as f64).sqrt()
    };
    let (s3, s4, s5) = (sd(1_000), sd(10_000), sd(100_000));
    let root10 = 10f64.sqrt();
    let ratios = [s3 / s4, s4 / s5];
    let scaling = ratios.iter().all(|&x| x > root10 / 1.5 && x < root10 * 1.5);
    check(
        (est - 1.0).abs() < 0.01 && scaling,
        format!(
            "integral {est:.5} (1 ± 0.01), standard-error ratios per decade {:.3}, {:.3} (√10 within ×1.5)",
            ratios[0], ratios[1]
        ),
    )
}

// listener at t = 0 sees the source, at t = 1 it sits behind the ball
fn compensation() -> Outcome {
    let oracle = OracleAsf::new().unwrap();
    let ratios = |compensate: bool| {
        let mut sc = scene::standin("floor").unwrap().to_scene(Path::new(".")).unwrap();
        sc.sim.n_rays = 100_000;
        sc.sim.frames = vec![0.0, 1.0];
        sc.sim.compensation = compensate;
        let out = trace_scene(&sc, &oracle).unwrap();
        let (open, hidden) = (out[0].band_totals(), out[1].band_totals());
        (hidden[0] / open[0], hidden[6] / open[6])
    };
    let (on_low, on_high) = ratios(true);
    let (off_low, _) = ratios(false);
    check(
        on_low >= 0.25 && on_high < 0.10 && off_low < 0.10,
        format!(
            "occluded/open energy with compensation: 125 Hz {on_low:.3} (>= 0.25), 8000 Hz {on_high:.4} (< 0.10); \
             without: 125 Hz {off_low:.4} (< 0.10)"
        ),
    )
}

fn envelope(bins: usize, per_band: impl Fn(usize, usize) -> f64) -> BandEnvelopes {
    BandEnvelopes {
        bands: BANDS.to_vec(),
        bin_width: 1e-3,
        values: (0..BANDS.len())
            .map(|b| (0..bins).map(|i| per_band(b, i).sqrt()).collect())
            .collect(),
    }
}

/// Energy per nominal third-octave band (base-10 centres 1000·10^(k/10)),
/// by summing the power spectrum between band edges. The bands tile
/// 17.8 Hz to past Nyquist, so with Parseval they sum to the signal energy.
fn third_octave_energy(x: &[f64], rate: f64) -> Vec<(f64, f64)> {
    let n = next_pow2(x.len());
    let spec = rfft(x, n);
    (-17..=13)
        .map(|k| {
            let fc = 1000.0 * 10f64.powf(k as f64 / 10.0);
            let (lo, hi) = (fc * 10f64.powf(-0.05), fc * 10f64.powf(0.05));
            let e: f64 = spec
                .iter()
                .enumerate()
                .filter(|(i, _)| {
                    let f = *i as f64 * rate / n as f64;
                    f >= lo && f < hi
                })
                .map(|(i, c)| if i == 0 || i == n / 2 { c.norm_sqr() } else { 2.0 * c.norm_sqr() })
                .sum::<f64>()
                / n as f64;
            (fc, e)
        })
        .collect()
}

fn ir_synthesis() -> Outcome {
    let rate = DEFAULT_SAMPLE_RATE;
    let flat = envelope(500, |_, i| (-(i as f64) / 80.0).exp());
    let expected: f64 = (0..500).map(|i| (-(i as f64) / 80.0).exp()).sum();
    let ir = synthesize(&flat, rate, 1).unwrap();
    let parseval = (ir.energy() / expected - 1.0).abs();

    let mid = BANDS.iter().position(|&b| b == 500.0).unwrap();
    let isolated = envelope(300, |b, i| if b == mid { (-(i as f64) / 50.0).exp() } else { 0.0 });
    let ir = synthesize(&isolated, rate, 2).unwrap();
    let bands = third_octave_energy(&ir.samples, rate);
    let inside: f64 = bands.iter().filter(|(fc, _)| (245.0..=1010.0).contains(fc)).map(|b| b.1).sum();
    let fidelity = inside / ir.energy();

    let a = synthesize(&flat, rate, 9).unwrap();
    let b = synthesize(&flat, rate, 9).unwrap();
    let identical = a.samples.iter().zip(&b.samples).all(|(x, y)| x.to_bits() == y.to_bits());
    check(
        parseval < 0.02 && fidelity >= 0.85 && identical,
        format!(
            "Parseval error {parseval:.4} (< 0.02), 500 Hz envelope energy in 250–1000 Hz third octaves \
             {fidelity:.3} (>= 0.85), bit-identical {identical}"
        ),
    )
}

/// RT60 from a linear fit to the −5…−35 dB span of the backward-integrated decay.
fn rt60(bins: &[f64], bin_width: f64) -> f64 {
    let total: f64 = bins.iter().sum();
    let mut rest = total;
    let mut pts = Vec::new();
    for (i, e) in bins.iter().enumerate() {
        let db = 10.0 * (rest / total).log10();
        if (-35.0..=-5.0).contains(&db) {
            pts.push((i as f64 * bin_width, db));
        }
        rest -= e;
    }
    let n = pts.len() as f64;
    let mx = pts.iter().map(|p| p.0).sum::<f64>() / n;
    let my = pts.iter().map(|p| p.1).sum::<f64>() / n;
    let slope = pts.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum::<f64>()
        / pts.iter().map(|p| (p.0 - mx).powi(2)).sum::<f64>();
    -60.0 / slope
}

fn reverberation() -> Outcome {
    let sc = scene::standin("box").unwrap().to_scene(Path::new(".")).unwrap();
    let out = trace_scene(&sc, &NoAsf).unwrap().remove(0);
    let (v, area, alpha) = (5.0 * 4.0 * 3.0, 2.0 * (20.0 + 15.0 + 12.0), 0.1);
    let sabine = 0.161 * v / (alpha * area);
    let fits: Vec<f64> = out.histograms.iter().map(|h| rt60(&h.bins, h.bin_width)).collect();
    let worst = fits.iter().map(|t| (t / sabine - 1.0).abs()).fold(0.0, f64::max);
    let shown: Vec<String> = fits.iter().map(|t| format!("{t:.3}")).collect();
    check(
        worst <= 0.2,
        format!(
            "fitted RT60 per band [{}] s vs Sabine {sabine:.3} s, worst deviation {worst:.3} (<= 0.2)",
            shown.join(", ")
        ),
    )
}

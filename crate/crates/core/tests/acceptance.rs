//! Acceptance suite. Prints one PASS/FAIL line per criterion and exits
//! non-zero if any fails. Pass criterion numbers as arguments to run a subset.

use std::path::Path;
use std::time::Instant;

use dpmargin::cli;
use dpmargin::data::{
    geometric_margin_oracle, margin_removal_curve, min_outliers_oracle, synth_margin_dataset, write_csv,
    Dataset,
};
use dpmargin::loss::{empirical_risk, LossSpec, RiskMode};
use dpmargin::master::{dp_adaptive_margin, grid_competitiveness_check, margin_grid, MasterConfig};
use dpmargin::optimizer::{ngd, LinearModel, NgdConfig, OutputMode, Provenance};
use dpmargin::privacy::{
    compose_gdp, gdp_to_approx_dp, gdp_to_approx_dp_high_privacy, master_iter_budget, TunerKind,
};
use dpmargin::projection::{project_and_clip, projection_dim, sample_jl};
use dpmargin::rng::derive_seed;
use dpmargin::tuning::{
    iter_tune, rate_for_miss_prob, priv_tune, sample_tnb_with, tnb_not_selected_prob, tnb_pmf, ScoreKind, TnbDist,
};
use dpmargin::Result;
use rand::SeedableRng;

// Tolerances and thresholds.
const C1_TOL_CONVERT: f64 = 1e-9;
const C1_TOL_ROUND_TRIP: f64 = 1e-12;
const C2_DRAWS: usize = 200;
const C2_MIN_FRACTION: f64 = 0.85;
const C3_SEEDS: u64 = 10;
const C3_T: u64 = 500;
const C3_MAX_HINGE: f64 = 0.01;
const C4_SEEDS: u64 = 20;
const C4_MAX_RISK: f64 = 0.05;
const C4_MIN_PASSING: usize = 18;
const C5_OUTLIERS: usize = 40;
const C5_CONST: f64 = 10.0;
const C5_MAX_INCREASE: f64 = 0.1;
const C6_INSTANCES: u64 = 20;
const C6_MAX_RATIO: f64 = 4.0;
const C7_SAMPLES: usize = 100_000;
const C7_MEAN_REL_TOL: f64 = 0.03;
const C7_PMF_TOL: f64 = 1e-12;
const C8_TRIALS: u64 = 500;
const MC_SIGMAS: f64 = 3.0;

const E2E_N: usize = 4000;
const E2E_D: usize = 20;
const E2E_GAMMA: f64 = 0.25;
const E2E_EPS: f64 = 2.0;
const E2E_DELTA: f64 = 1e-6;

struct Verdict {
    pass: bool,
    detail: String,
}

fn verdict(pass: bool, detail: String) -> Result<Verdict> {
    Ok(Verdict { pass, detail })
}

fn close(a: f64, b: f64, tol: f64) -> bool {
    (a - b).abs() <= tol
}

fn c1_privacy_arithmetic() -> Result<Verdict> {
    let eps = gdp_to_approx_dp(1.0, 1e-5)?;
    let expect = 0.5 + (2.0 * 1e5f64.ln()).sqrt();
    let mut ok = close(eps, expect, C1_TOL_CONVERT);
    let mut worst_rt = 0.0f64;
    for &(e, d) in &[(0.1, 1e-5), (1.0, 1e-5), (2.0, 1e-6), (8.0, 1e-8), (0.5, 1e-3)] {
        let mu = master_iter_budget(e, d)?;
        worst_rt = worst_rt.max((gdp_to_approx_dp_high_privacy(mu, d)? - e).abs());
    }
    ok &= worst_rt <= C1_TOL_ROUND_TRIP;
    let mut worst_comp = 0.0f64;
    for &mu in &[0.05, 0.3, 1.0, 4.0] {
        for m in [1usize, 2, 3, 7, 64, 1000] {
            let parts = vec![mu / (m as f64).sqrt(); m];
            worst_comp = worst_comp.max((compose_gdp(&parts)? - mu).abs());
        }
    }
    ok &= worst_comp <= C1_TOL_ROUND_TRIP;
    verdict(
        ok,
        format!(
            "conversion error {:.2e} (tol {C1_TOL_CONVERT:e}); round trip {worst_rt:.2e}; composition {worst_comp:.2e} (tol {C1_TOL_ROUND_TRIP:e})",
            (eps - expect).abs()
        ),
    )
}

fn c2_margin_preservation() -> Result<Verdict> {
    let (n, d, gamma, beta) = (100, 200, 0.3, 0.1);
    let s = synth_margin_dataset(n, d, gamma, 0, 20_202)?.dataset;
    let grid = margin_grid(n, 1.0)?.len();
    let k = projection_dim(gamma, n, grid, beta, 1.0)?;
    let mut hits = 0;
    for draw in 0..C2_DRAWS {
        let phi = sample_jl(k, d, derive_seed(7, "c2", draw as u64))?;
        let z = project_and_clip(&phi, &s, 1e6)?;
        if geometric_margin_oracle(&z, 1e-9)? >= gamma / 3.0 {
            hits += 1;
        }
    }
    let frac = hits as f64 / C2_DRAWS as f64;
    verdict(
        frac >= C2_MIN_FRACTION,
        format!("k = {k}: margin >= gamma/3 in {hits}/{C2_DRAWS} draws ({frac:.3}, need {C2_MIN_FRACTION})"),
    )
}

fn c3_noiseless_convergence() -> Result<Verdict> {
    let (n, d, gamma) = (200, 20, 0.3);
    let grid = margin_grid(n, 1.0)?.len();
    let k = projection_dim(gamma, n, grid, 0.1, 1.0)?;
    let mut worst = 0.0f64;
    let mut passing = 0;
    for seed in 0..C3_SEEDS {
        let s = synth_margin_dataset(n, d, gamma, 0, 3000 + seed)?.dataset;
        let phi = sample_jl(k, d, derive_seed(seed, "c3-jl", 0))?;
        let clipped = project_and_clip(&phi, &s, s.norm_bound())?;
        // the oracle sees the projected set with its observed norm bound
        let z = Dataset::from_parts(clipped.features().to_vec(), clipped.labels().to_vec(), k, None)?;
        let mut cfg = NgdConfig::new(OutputMode::Averaged, seed);
        cfg.overrides.sigma = Some(0.0);
        cfg.overrides.iterations = Some(C3_T);
        let model = ngd(gamma, &z, 1.0, &cfg)?;
        let risk = empirical_risk(&model.weights, &z, LossSpec::hinge(gamma)?, RiskMode::Averaged)?;
        worst = worst.max(risk);
        if risk <= C3_MAX_HINGE {
            passing += 1;
        }
    }
    verdict(
        passing == C3_SEEDS,
        format!("k = {k}, T = {C3_T}: worst averaged hinge risk {worst:.4} over {C3_SEEDS} seeds (max {C3_MAX_HINGE})"),
    )
}

fn e2e_risks(outliers: usize) -> Result<Vec<f64>> {
    (0..C4_SEEDS)
        .map(|seed| {
            let s = synth_margin_dataset(E2E_N, E2E_D, E2E_GAMMA, outliers, 4000 + seed)?.dataset;
            let mut cfg = MasterConfig::new(E2E_EPS, E2E_DELTA, 9000 + seed);
            cfg.tuner = TunerKind::Iterate;
            cfg.score_kind = ScoreKind::EmpiricalZeroOne;
            let out = dp_adaptive_margin(&s, &cfg)?;
            empirical_risk(&out.model.weights, &s, LossSpec::ZeroOne, RiskMode::Averaged)
        })
        .collect()
}

fn mean(v: &[f64]) -> f64 {
    v.iter().sum::<f64>() / v.len() as f64
}

fn c4_realizable(risks: &[f64]) -> Result<Verdict> {
    let passing = risks.iter().filter(|&&r| r <= C4_MAX_RISK).count();
    verdict(
        passing >= C4_MIN_PASSING,
        format!(
            "{passing}/{C4_SEEDS} seeds with risk <= {C4_MAX_RISK} (need {C4_MIN_PASSING}); mean {:.4}, max {:.4}",
            mean(risks),
            risks.iter().cloned().fold(0.0, f64::max)
        ),
    )
}

fn c5_outliers(clean: &[f64], noisy: &[f64]) -> Result<Verdict> {
    let n = E2E_N as f64;
    let bound = C5_CONST
        * (C5_OUTLIERS as f64 / (E2E_GAMMA * n) + n.ln() / (n * E2E_GAMMA * E2E_GAMMA * E2E_EPS));
    let passing = noisy.iter().filter(|&&r| r <= bound).count();
    let increase = mean(noisy) - mean(clean);
    verdict(
        passing >= C4_MIN_PASSING && increase < C5_MAX_INCREASE,
        format!(
            "{passing}/{C4_SEEDS} seeds with risk <= {bound:.4} (need {C4_MIN_PASSING}); mean risk {:.4}, increase {increase:.4} (max {C5_MAX_INCREASE})",
            mean(noisy)
        ),
    )
}

fn c6_grid_competitiveness() -> Result<Verdict> {
    let mut worst = 0.0f64;
    for i in 0..C6_INSTANCES {
        let gamma = 0.05 + 0.05 * (i % 8) as f64;
        let outliers = (i % 4) as usize;
        let s = synth_margin_dataset(10, 2, gamma, outliers, 6000 + i)?.dataset;
        let r = grid_competitiveness_check(&s, 1.0)?;
        worst = worst.max(r.ratio);
    }
    verdict(worst <= C6_MAX_RATIO, format!("worst ratio {worst:.4} over {C6_INSTANCES} instances (max {C6_MAX_RATIO})"))
}

fn c7_tnb_law() -> Result<Verdict> {
    let r = 0.01;
    let dist = TnbDist::geometric(r)?;
    let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(77);
    let threshold = (0.05f64.ln() / (1.0 - r).ln()).ceil() as u64;
    let (mut sum, mut tail) = (0.0, 0usize);
    for _ in 0..C7_SAMPLES {
        let k = sample_tnb_with(&dist, &mut rng)?;
        sum += k as f64;
        if k > threshold {
            tail += 1;
        }
    }
    let m = sum / C7_SAMPLES as f64;
    let mean_ok = (m - 1.0 / r).abs() <= C7_MEAN_REL_TOL / r;
    let p = tail as f64 / C7_SAMPLES as f64;
    let tail_cap = 0.05 + MC_SIGMAS * (0.05 * 0.95 / C7_SAMPLES as f64).sqrt();
    let tail_ok = p <= tail_cap;
    let mut pmf_err = 0.0f64;
    for k in 1..=100u64 {
        pmf_err = pmf_err.max((tnb_pmf(&dist, k)? - r * (1.0 - r).powi(k as i32 - 1)).abs());
    }
    let pmf_ok = pmf_err <= C7_PMF_TOL;
    let mut rate_ok = true;
    for &beta in &[0.01, 0.05, 0.1, 0.2, 0.5] {
        for &g in &[2usize, 3, 8, 16, 100, 10_000] {
            let rate = rate_for_miss_prob(beta, g)?;
            let miss = tnb_not_selected_prob(&TnbDist::geometric(rate)?, g)?;
            rate_ok &= miss <= beta * (1.0 + 1e-12);
        }
    }
    verdict(
        mean_ok && tail_ok && pmf_ok && rate_ok,
        format!(
            "mean {m:.3} (target 100 +- 3%); P(K > {threshold}) = {p:.5} (cap {tail_cap:.5}); pmf error {pmf_err:.1e}; run-rate threshold {}",
            if rate_ok { "holds" } else { "violated" }
        ),
    )
}

fn dummy_model(i: usize) -> LinearModel {
    LinearModel {
        weights: vec![i as f64],
        ambient_dim: 1,
        provenance: Provenance {
            gamma: None,
            hinge_c: 1.0,
            jl_seed: None,
            k: None,
            output_mode: OutputMode::Averaged,
            mu: 1.0,
            iterations: 0,
            sigma: 0.0,
            eta: 0.0,
            subspace: false,
            noise: Vec::new(),
        },
    }
}

fn sample_stats(v: &[f64]) -> (f64, f64) {
    let m = mean(v);
    let var = v.iter().map(|x| (x - m) * (x - m)).sum::<f64>() / (v.len() - 1) as f64;
    (m, (var / v.len() as f64).sqrt())
}

fn c8_tuner_utility() -> Result<Verdict> {
    let scores = [3.0, 0.0, 7.5, 1.0, 12.0, 2.0, 9.0, 4.0];
    let m = scores.len();
    let best = 0.0;
    let range = 12.0;
    let mu = 1.0;
    let base = |i: usize, _mu: f64, _seed: u64| Ok(dummy_model(i));
    let score = |_: &LinearModel, i: usize| Ok(scores[i]);

    let mut picked = Vec::new();
    let mut sigma = 0.0;
    for t in 0..C8_TRIALS {
        let o = iter_tune(m, mu, 1.0, derive_seed(88, "c8-iter", t), base, score)?;
        sigma = o.score_noise.sigma;
        picked.push(o.score);
    }
    let (iter_mean, iter_se) = sample_stats(&picked);
    let iter_bound = best + 2.0 * sigma * (2.0 * (m as f64).ln()).sqrt() + MC_SIGMAS * iter_se;
    let iter_ok = iter_mean <= iter_bound;

    let beta = 0.05;
    let r = rate_for_miss_prob(beta, m)?;
    let dist = TnbDist::geometric(r)?;
    let miss = tnb_not_selected_prob(&dist, m)?;
    let mut picked = Vec::new();
    let mut sigma_pt = 0.0;
    for t in 0..C8_TRIALS {
        let o = priv_tune(m, &dist, mu, 1.0, derive_seed(88, "c8-priv", t), 1_000_000, base, score)?;
        sigma_pt = o.score_noise.sigma;
        picked.push(o.score);
    }
    let (pt_mean, pt_se) = sample_stats(&picked);
    let pt_bound = best + 2.0 * sigma_pt * (2.0 * (1.0 / r).ln()).sqrt() + miss * range + MC_SIGMAS * pt_se;
    let pt_ok = pt_mean <= pt_bound;
    verdict(
        iter_ok && pt_ok,
        format!(
            "iterate: mean selected score {iter_mean:.3} <= {iter_bound:.3} (sigma {sigma:.3}); randomized: {pt_mean:.3} <= {pt_bound:.3} (sigma {sigma_pt:.3}, r {r:.5})"
        ),
    )
}

fn run_cli(args: &[&str]) -> (i32, Vec<u8>, Vec<u8>) {
    let mut out = Vec::new();
    let mut err = Vec::new();
    let mut full = vec!["dpmargin"];
    full.extend_from_slice(args);
    let code = cli::run(full, &mut out, &mut err);
    (code, out, err)
}

fn save(s: &Dataset, path: &Path) -> Result<()> {
    write_csv(s, std::io::BufWriter::new(std::fs::File::create(path)?))
}

fn c9_margin_curve(dir: &Path) -> Result<Verdict> {
    let s = synth_margin_dataset(60, 4, 0.3, 5, 2)?.dataset;
    let path = dir.join("c9.csv");
    save(&s, &path)?;
    let (code, out, err) = run_cli(&["margin-curve", "--dataset", path.to_str().unwrap(), "--max-removals", "10"]);
    if code != 0 {
        return verdict(false, format!("exit code {code}: {}", String::from_utf8_lossy(&err)));
    }
    let text = String::from_utf8_lossy(&out);
    let margins: Vec<f64> = text
        .lines()
        .skip(1)
        .filter_map(|l| l.split_once(',').and_then(|(_, m)| m.parse().ok()))
        .collect();
    let monotone = margins.windows(2).all(|w| w[1] >= w[0]);
    let strict = margins.iter().take(6).skip(1).any(|&m| m > margins[0]);
    verdict(
        monotone && strict && margins.len() == 11,
        format!(
            "{} points, monotone {monotone}, strict increase within 5 removals {strict}; margins {:.4} -> {:.4}",
            margins.len(),
            margins.first().copied().unwrap_or(f64::NAN),
            margins.last().copied().unwrap_or(f64::NAN)
        ),
    )
}

fn in_pool<T: Send>(threads: usize, f: impl FnOnce() -> T + Send) -> T {
    rayon::ThreadPoolBuilder::new().num_threads(threads).build().unwrap().install(f)
}

fn c10_determinism(dir: &Path) -> Result<Verdict> {
    std::env::set_var("SOURCE_DATE_EPOCH", "1700000000");
    let mut mismatches = Vec::new();

    let small = synth_margin_dataset(300, 8, 0.25, 3, 10)?.dataset;
    let tiny = synth_margin_dataset(20, 3, 0.3, 0, 11)?.dataset;
    let data = dir.join("c10.csv");
    let tiny_path = dir.join("c10_tiny.csv");
    save(&small, &data)?;
    save(&tiny, &tiny_path)?;
    let (data, tiny_path) = (data.to_str().unwrap().to_owned(), tiny_path.to_str().unwrap().to_owned());

    let commands: Vec<(&str, Vec<String>)> = vec![
        ("synth", vec!["synth", "--n", "500", "--d", "12", "--gamma", "0.2", "--outliers", "4", "--seed", "3", "--out"]),
        ("train iterate", vec!["train", "--dataset", &data, "--epsilon", "1.5", "--delta", "1e-6", "--seed", "4", "--out"]),
        (
            "train priv-tune",
            vec!["train", "--dataset", &tiny_path, "--epsilon", "2", "--delta", "1e-6", "--tuner", "priv-tune", "--score", "penalized", "--seed", "5", "--out"],
        ),
        ("margin-curve", vec!["margin-curve", "--dataset", &data, "--max-removals", "4", "--out"]),
    ]
    .into_iter()
    .map(|(name, v)| (name, v.into_iter().map(str::to_owned).collect()))
    .collect();

    for (i, (name, args)) in commands.iter().enumerate() {
        let mut outputs = Vec::new();
        for threads in ["1", "8"] {
            let file = dir.join(format!("c10_{i}_{threads}"));
            let mut full: Vec<&str> = vec!["--threads", threads];
            full.extend(args.iter().map(String::as_str));
            full.push(file.to_str().unwrap());
            let (code, out, _) = run_cli(&full);
            outputs.push((code, out, std::fs::read(&file).unwrap_or_default()));
        }
        // stdout names the per-thread output file, so compare it with the path masked
        let masked: Vec<_> = outputs
            .iter()
            .enumerate()
            .map(|(j, (c, o, f))| {
                let tag = format!("c10_{i}_{}", ["1", "8"][j]);
                (*c, String::from_utf8_lossy(o).replace(&tag, "c10"), f.clone())
            })
            .collect();
        if masked[0] != masked[1] || masked[0].0 != 0 {
            mismatches.push(name.to_string());
        }
    }

    for args in [
        vec!["eval", "--model", dir.join("c10_1_1").to_str().unwrap(), "--dataset", data.as_str()],
        vec!["privacy-report", "--epsilon", "1", "--delta", "1e-5", "--n", "500", "--tuner", "priv-tune"],
    ] {
        let runs: Vec<_> = ["1", "8"]
            .iter()
            .map(|t| {
                let mut full = vec!["--threads", t];
                full.extend(args.iter().copied());
                run_cli(&full)
            })
            .collect();
        if runs[0] != runs[1] || runs[0].0 != 0 {
            mismatches.push(args[0].to_string());
        }
    }

    let lib = |threads: usize| -> Result<String> {
        in_pool(threads, || -> Result<String> {
            let mut cfg = MasterConfig::new(1.0, 1e-6, 12);
            let a = dp_adaptive_margin(&small, &cfg)?;
            cfg.tuner = TunerKind::PrivTune;
            cfg.score_kind = ScoreKind::PenalizedPopulation;
            let b = dp_adaptive_margin(&tiny, &cfg)?;
            let phi = sample_jl(700, 8, 5)?;
            let gram = phi.gram()?;
            let curve = margin_removal_curve(&small, 3, 1e-10)?;
            let few = synth_margin_dataset(12, 2, 0.2, 2, 13)?.dataset;
            let witness = min_outliers_oracle(&few, 0.2, 1e-9)?;
            let comp = grid_competitiveness_check(&few, 1.0)?;
            Ok(format!(
                "{:?}|{:?}|{:?}|{:?}|{:?}|{:?}|{:?}",
                a.model.weights,
                b.model.weights,
                gram,
                curve.iter().map(|p| (p.removed, p.margin)).collect::<Vec<_>>(),
                (witness.count, witness.removed),
                comp.ratio,
                b.runs
            ))
        })
    };
    if lib(1)? != lib(8)? {
        mismatches.push("library entry points".into());
    }

    verdict(
        mismatches.is_empty(),
        if mismatches.is_empty() {
            "6 commands and library entry points identical across 1 and 8 threads".into()
        } else {
            format!("differences in: {}", mismatches.join(", "))
        },
    )
}

fn main() {
    let wanted: Vec<u32> = std::env::args().skip(1).filter_map(|a| a.parse().ok()).collect();
    let want = |c: u32| wanted.is_empty() || wanted.contains(&c);
    let dir = tempfile::tempdir().expect("temp dir");
    let mut failed = 0;
    let mut report = |c: u32, started: Instant, v: Result<Verdict>| {
        let secs = started.elapsed().as_secs_f64();
        match v {
            Ok(v) => {
                if !v.pass {
                    failed += 1;
                }
                println!("{} criterion {c}: {} [{secs:.1}s]", if v.pass { "PASS" } else { "FAIL" }, v.detail);
            }
            Err(e) => {
                failed += 1;
                println!("FAIL criterion {c}: error: {e} [{secs:.1}s]");
            }
        }
    };

    let t = Instant::now();
    if want(1) {
        report(1, t, c1_privacy_arithmetic());
    }
    let t = Instant::now();
    if want(2) {
        report(2, t, c2_margin_preservation());
    }
    let t = Instant::now();
    if want(3) {
        report(3, t, c3_noiseless_convergence());
    }
    if want(4) || want(5) {
        let t = Instant::now();
        let clean = e2e_risks(0);
        if want(4) {
            report(4, t, clean.as_ref().map_err(clone_err).and_then(|r| c4_realizable(r)));
        }
        if want(5) {
            let t = Instant::now();
            let noisy = e2e_risks(C5_OUTLIERS);
            let v = match (&clean, noisy) {
                (Ok(c), Ok(n)) => c5_outliers(c, &n),
                (Err(e), _) => Err(clone_err(e)),
                (_, Err(e)) => Err(e),
            };
            report(5, t, v);
        }
    }
    let t = Instant::now();
    if want(6) {
        report(6, t, c6_grid_competitiveness());
    }
    let t = Instant::now();
    if want(7) {
        report(7, t, c7_tnb_law());
    }
    let t = Instant::now();
    if want(8) {
        report(8, t, c8_tuner_utility());
    }
    let t = Instant::now();
    if want(9) {
        report(9, t, c9_margin_curve(dir.path()));
    }
    let t = Instant::now();
    if want(10) {
        report(10, t, c10_determinism(dir.path()));
    }

    if failed > 0 {
        println!("{failed} criteria failed");
        std::process::exit(1);
    }
}

fn clone_err(e: &dpmargin::Error) -> dpmargin::Error {
    dpmargin::Error::Generation(e.to_string())
}

//! Acceptance criteria, one line per criterion. Runs without the libtest
//! harness so every line reaches stdout; exits non-zero if any criterion fails.

use std::process::{Command, ExitCode};
use std::time::{Duration, Instant};

use searchbias::bias::target_divergence;
use searchbias::experiment::{ensemble_battery, BATTERY_Q_MIN};
use searchbias::harness::{sample_uniform_simplex, BoundCheckResult, Harness, SIGMA_SLACK};
use searchbias::resources::{make_fitness_ensemble, FitnessGenerator, SearchAlgorithm};
use searchbias::search::{derive_seed, AveragedDistribution, ProbabilityVector, SearchSpace, TargetFunction};

type Outcome = Result<String, String>;

fn simplex(n: usize, seed: u64) -> ProbabilityVector {
    ProbabilityVector::new(sample_uniform_simplex(n, seed).unwrap().weights).unwrap()
}

fn first_failure(checks: &[BoundCheckResult]) -> Option<&BoundCheckResult> {
    checks.iter().find(|c| !c.satisfied)
}

fn bound_example() -> Outcome {
    let out = Command::new(env!("CARGO_BIN_EXE_searchbias"))
        .args(["bound", "100", "10", "0.5", "0"])
        .output()
        .map_err(|e| e.to_string())?;
    let text = String::from_utf8_lossy(&out.stdout);
    let line = text.lines().next().unwrap_or_default().to_owned();
    if out.status.success() && line == "log2 bound: 2^-89" {
        Ok(line)
    } else {
        Err(format!("status {:?}, output {text:?}", out.status.code()))
    }
}

fn divergence_angles() -> Outcome {
    let t = |b: &[u8]| TargetFunction::from_ints(b).unwrap();
    let a = target_divergence(&t(&[0, 1, 1]), &[0.0, 0.2, 0.8]).map_err(|e| e.to_string())?.degrees;
    let b = target_divergence(&t(&[1, 0, 1]), &[0.0, 1.0, 0.0]).map_err(|e| e.to_string())?.degrees;
    let c = target_divergence(&t(&[1, 1, 0]), &[0.5, 0.5, 0.0]).map_err(|e| e.to_string())?.degrees;
    let msg = format!("angles {a:.4} / {b} / {c:e} degrees");
    if (a - 31.0).abs() <= 0.5 && b == 90.0 && c.abs() < 1e-12 {
        Ok(msg)
    } else {
        Err(msg)
    }
}

fn conservation_of_bias() -> Outcome {
    let harness = Harness::default();
    let mut worst = 0.0f64;
    let mut sums = 0;
    for i in 0..1000u64 {
        let n = 3 + (i % 10) as usize;
        let v = simplex(n, derive_seed(31, i));
        for k in 1..=n {
            let r = harness.check_conservation(&v, k).map_err(|e| e.to_string())?;
            worst = worst.max(r.empirical);
            sums += 1;
        }
    }
    let msg = format!("{sums} target sums over 1000 vectors, max |sum| = {worst:e}");
    if worst < 1e-9 {
        Ok(msg)
    } else {
        Err(msg)
    }
}

fn futility() -> Outcome {
    let space = SearchSpace::new(16).unwrap();
    let ensemble = make_fitness_ensemble(space, FitnessGenerator::IidUniform, 8, 41).map_err(|e| e.to_string())?;
    let t = TargetFunction::random(16, 4, 42).map_err(|e| e.to_string())?;
    let r = Harness::default()
        .check_futility(&SearchAlgorithm::Uniform, &ensemble, &t, 32, 5000, 43)
        .map_err(|e| e.to_string())?;
    let msg = format!("marginal q = {:.12}, p = {}, 3se = {:e}", r.empirical, r.bound, SIGMA_SLACK * r.mc_stderr);
    if r.satisfied && r.bound == 0.25 {
        Ok(msg)
    } else {
        Err(msg)
    }
}

/// Runs the battery once; returns (non-geometric checks, geometric checks, instance count).
fn battery_checks() -> Result<(Vec<BoundCheckResult>, Vec<BoundCheckResult>, usize), String> {
    let harness = Harness::default();
    let battery = ensemble_battery(2024).map_err(|e| e.to_string())?;
    let mut famine = Vec::new();
    let mut geometric = Vec::new();
    for (i, instance) in battery.iter().enumerate() {
        let pbars = instance.estimate(&harness).map_err(|e| e.to_string())?;
        let weights = instance.ensemble.weights();
        let t = &instance.target;
        for (j, q_min) in BATTERY_Q_MIN.into_iter().enumerate() {
            let e = |e: searchbias::Error| e.to_string();
            famine.push(harness.check_improbability(&pbars, &weights, t, q_min).map_err(e)?);
            famine.extend(harness.check_famine_resources(&pbars, t, q_min).map_err(e)?);
            famine.push(
                harness
                    .check_famine_distributions(&pbars, t, q_min, 2000, derive_seed(i as u64, j as u64))
                    .map_err(e)?,
            );
            geometric.push(harness.check_geometric(&pbars, &weights, t, q_min).map_err(e)?);
        }
    }
    Ok((famine, geometric, battery.len()))
}

fn battery_summary(checks: &[BoundCheckResult], instances: usize) -> Outcome {
    let msg = format!("{instances} ensembles x {} q_min values, {} checks", BATTERY_Q_MIN.len(), checks.len());
    match first_failure(checks) {
        None if instances >= 50 => Ok(format!("{msg}, 0 violations")),
        None => Err(format!("{msg}, only {instances} ensembles")),
        Some(c) => Err(format!("{msg}, violation: {} {}", c.name, c.instance_summary)),
    }
}

fn famine_of_targets() -> Outcome {
    let harness = Harness::default();
    let mut checks = Vec::new();
    for (n, k) in [(10, 2), (12, 3)] {
        for i in 0..100u64 {
            let v = simplex(n, derive_seed(61 + n as u64, i));
            for q_min in [0.01, 0.05, 0.1, 0.2, 0.5] {
                checks.push(harness.check_famine_targets(&v, k, q_min).map_err(|e| e.to_string())?);
            }
        }
    }
    let msg = format!("{} enumerations over (10,2) and (12,3)", checks.len());
    match first_failure(&checks) {
        None => Ok(format!("{msg}, 0 violations")),
        Some(c) => Err(format!("{msg}, violation at {}", c.instance_summary)),
    }
}

fn bias_over_distributions() -> Outcome {
    let harness = Harness::default();
    let pair = [
        AveragedDistribution::exact(ProbabilityVector::new(vec![1.0, 0.0, 0.0]).unwrap()),
        AveragedDistribution::exact(ProbabilityVector::new(vec![0.0, 0.0, 1.0]).unwrap()),
    ];
    let t = TargetFunction::from_ints(&[1, 0, 0]).unwrap();
    let mean = harness.check_bias_over_distributions(&pair, &t, 100_000, 71).map_err(|e| e.to_string())?;
    let famine = harness.check_famine_distributions(&pair, &t, 0.5, 100_000, 72).map_err(|e| e.to_string())?;
    let sixth = 1.0 / 6.0;
    let mean_ok = mean.satisfied && (mean.bound - sixth).abs() < 1e-12;
    let measure_ok = (famine.empirical - sixth).abs() <= SIGMA_SLACK * famine.mc_stderr;
    let msg = format!(
        "mean bias {:.5} (se {:.1e}), measure of bias >= 0.5 {:.5} (se {:.1e}), expected 1/6",
        mean.empirical, mean.mc_stderr, famine.empirical, famine.mc_stderr
    );
    if mean_ok && measure_ok && famine.satisfied {
        Ok(msg)
    } else {
        Err(msg)
    }
}

fn conservation_over_distributions() -> Outcome {
    let harness = Harness::default();
    let mut worst = 0.0f64;
    let mut count = 0;
    for n in 2..=8usize {
        for k in 1..=3.min(n) {
            let seed = derive_seed(81, (n * 10 + k) as u64);
            let members = 2 + (n + k) % 4;
            let pbars: Vec<AveragedDistribution> = (0..members)
                .map(|m| AveragedDistribution::exact(simplex(n, derive_seed(seed, m as u64))))
                .collect();
            let r = harness
                .check_conservation_over_distributions(&pbars, k, 2000, derive_seed(seed, 99))
                .map_err(|e| e.to_string())?;
            worst = worst.max(r.empirical.abs());
            count += 1;
        }
    }
    let msg = format!("{count} (n, k) pairs, max |sum| = {worst:e}");
    if worst < 1e-9 {
        Ok(msg)
    } else {
        Err(msg)
    }
}

fn report(id: u32, title: &str, limit: Duration, elapsed: Duration, outcome: &Outcome) -> bool {
    let in_time = elapsed <= limit;
    let pass = outcome.is_ok() && in_time;
    let detail = match outcome {
        Ok(m) | Err(m) => m,
    };
    println!(
        "criterion {id} {:<4} {title}: {detail} [{:.3}s, limit {}s{}]",
        if pass { "PASS" } else { "FAIL" },
        elapsed.as_secs_f64(),
        limit.as_secs(),
        if in_time { "" } else { ", too slow" }
    );
    pass
}

fn timed<T>(f: impl FnOnce() -> T) -> (T, Duration) {
    let start = Instant::now();
    let out = f();
    (out, start.elapsed())
}

fn main() -> ExitCode {
    let secs = Duration::from_secs;
    let mut all = true;

    let (o, d) = timed(bound_example);
    all &= report(1, "closed-form bound 2^-89", secs(1), d, &o);
    let (o, d) = timed(divergence_angles);
    all &= report(2, "target divergence angles", secs(1), d, &o);
    let (o, d) = timed(conservation_of_bias);
    all &= report(3, "conservation of bias", secs(60), d, &o);
    let (o, d) = timed(futility);
    all &= report(4, "futility of bias-free search", secs(60), d, &o);

    let (battery, d) = timed(battery_checks);
    match battery {
        Ok((famine, geometric, instances)) => {
            all &= report(5, "improbability and famine bounds", secs(300), d, &battery_summary(&famine, instances));
            all &= report(9, "geometric divergence bound", secs(300), d, &battery_summary(&geometric, instances));
        }
        Err(e) => {
            all &= report(5, "improbability and famine bounds", secs(300), d, &Err(e.clone()));
            all &= report(9, "geometric divergence bound", secs(300), d, &Err(e));
        }
    }

    let (o, d) = timed(famine_of_targets);
    all &= report(6, "famine of applicable targets", secs(60), d, &o);
    let (o, d) = timed(bias_over_distributions);
    all &= report(7, "bias over distributions", secs(60), d, &o);
    let (o, d) = timed(conservation_over_distributions);
    all &= report(8, "conservation over distributions", secs(30), d, &o);

    if all {
        println!("acceptance: all criteria passed");
        ExitCode::SUCCESS
    } else {
        println!("acceptance: FAILED");
        ExitCode::FAILURE
    }
}

//! Calibration runs behind the frozen constants in `analysis::LemmaTolerances`
//! and `verify`. Reproduce with:
//!
//! ```text
//! cargo run --release -p popstab --example calibrate
//! ```
//!
//! Prints per-epoch drift statistics (equilibrium and displaced), per-color
//! count deviations and wrong-round maxima for the parameter points the
//! verification battery uses, plus wall-clock timings.

use popstab::adversary::{StrategyKind, StrategyParams};
use popstab::analysis::summarize_run;
use popstab::params::Rational;
use popstab::protocol::Mutation;
use popstab::verify::MainRunSpec;
use std::time::Instant;

struct Stats {
    count: usize,
    mean: f64,
    std: f64,
    min: f64,
    max: f64,
}

fn stats(values: &[f64]) -> Stats {
    let n = values.len().max(1) as f64;
    let mean = values.iter().sum::<f64>() / n;
    let var = values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / n.max(2.0);
    Stats {
        count: values.len(),
        mean,
        std: var.sqrt(),
        min: values.iter().copied().fold(f64::INFINITY, f64::min),
        max: values.iter().copied().fold(f64::NEG_INFINITY, f64::max),
    }
}

fn drift_report(label: &str, spec: &MainRunSpec, seeds: &[u64]) {
    let t0 = Instant::now();
    let runs = spec.execute_seeds(seeds).unwrap();
    let secs = t0.elapsed().as_secs_f64();
    let mut drifts = Vec::new();
    let mut color_devs = Vec::new();
    let mut seed_means = Vec::new();
    for (_, summaries) in &runs {
        let complete: Vec<_> = summaries.iter().filter(|s| s.complete).collect();
        let ds: Vec<f64> = complete.iter().map(|s| s.drift as f64).collect();
        if !ds.is_empty() {
            seed_means.push(ds.iter().sum::<f64>() / ds.len() as f64);
        }
        drifts.extend(ds);
        for s in &complete {
            if let Some((c0, c1)) = s.colored_by_color_at_eval {
                let target = s.size_at_start as f64 / 16.0;
                color_devs.push((c0 as f64 - target).abs().max((c1 as f64 - target).abs()));
            }
        }
    }
    let d = stats(&drifts);
    let c = stats(&color_devs);
    let positive_means = seed_means.iter().filter(|&&m| m > 0.0).count();
    println!(
        "{label}: epochs={} drift mean={:.2} std={:.2} min={:.0} max={:.0} | \
         color_dev mean={:.0} max={:.0} | seeds_with_positive_mean={}/{} | {:.1}s",
        d.count, d.mean, d.std, d.min, d.max, c.mean, c.max, positive_means,
        seed_means.len(), secs
    );
}

fn main() {
    let seeds: Vec<u64> = (1000..1020).collect();

    println!("== equilibrium, N=2^16, gamma=1/2 ==");
    let spec = MainRunSpec::null(1 << 16, 4);
    drift_report("gamma=1/2", &spec, &seeds[..15]);

    println!("== displaced 0.75N and 1.25N, N=2^16, 20 epochs (drift-sign rehearsal) ==");
    for (dir, num) in [("low", 3u64), ("high", 5)] {
        let spec = MainRunSpec {
            initial_population: Some((1u64 << 16) * num / 4),
            ..MainRunSpec::null(1 << 16, 20)
        };
        drift_report(&format!("gamma=1/2 {dir}"), &spec, &seeds[..10]);
    }

    println!("== equilibrium, N=2^12, gamma=1 (verify battery point) ==");
    let spec = MainRunSpec {
        gamma: Rational::new(1, 1),
        ..MainRunSpec::null(1 << 12, 50)
    };
    drift_report("N=2^12", &spec, &seeds);

    println!("== always_split mutant at the same point ==");
    let spec = MainRunSpec {
        gamma: Rational::new(1, 1),
        mutation: Mutation::AlwaysSplit,
        ..MainRunSpec::null(1 << 12, 50)
    };
    drift_report("mutant", &spec, &seeds[..10]);

    println!("== desync wrong-round counts, N=2^16, cap=2/epoch ==");
    let cap = 2u64;
    let spec = MainRunSpec {
        gamma: Rational::new(1, 1),
        adversary_budget: cap,
        strategy: StrategyKind::DesyncInserter,
        strategy_params: StrategyParams {
            epoch_cap: Some(cap),
            stop_epoch: Some(2),
            ..StrategyParams::default()
        },
        ..MainRunSpec::null(1 << 16, 5)
    };
    let t0 = Instant::now();
    let cfg = spec.run_config(1);
    let record = popstab::run_simulation(&cfg).unwrap();
    let summaries = summarize_run(&record, &cfg.params);
    let worst = record.observations.iter().map(|o| o.wrong_round).max().unwrap();
    let t = cfg.params.epoch_length as usize;
    let tail_max = record.observations[4 * t..].iter().map(|o| o.wrong_round).max().unwrap();
    println!(
        "max_wrong_round={} tail_epoch_max={} epochs={} | {:.1}s",
        worst,
        tail_max,
        summaries.len(),
        t0.elapsed().as_secs_f64()
    );
}

//! End-to-end acceptance criteria. Runs without the libtest harness so
//! every criterion prints one PASS/FAIL line even when captured.

use std::time::Instant;

use zzb_core::experiment::{
    run_experiment, write_csv, ExperimentConfig, Preset, ResultTable, SweepValue,
};
use zzb_core::validation;
use zzb_core::zzb::apb;

type Outcome = Result<(bool, String), String>;
type Criterion = (&'static str, fn() -> Outcome);

fn preset(p: Preset) -> ExperimentConfig {
    ExperimentConfig::load(None, Some(p)).expect("preset parses")
}

fn run(config: &ExperimentConfig) -> Result<ResultTable, String> {
    run_experiment(config).map_err(|e| e.to_string())
}

fn single_point(mut c: ExperimentConfig, db: f64) -> ExperimentConfig {
    c.snr_grid.start_db = db;
    c.snr_grid.stop_db = db;
    c
}

fn zero_snr_collapse() -> Outcome {
    let mut worst = 0.0f64;
    let mut groups = 0;
    for p in [Preset::Fig1, Preset::Fig2] {
        let t = run(&single_point(preset(p), -80.0))?;
        for r in &t.rows {
            worst = worst.max((r.zzb / r.apb - 1.0).abs());
            groups += 1;
        }
    }
    Ok((worst <= 0.01, format!("{groups} sweep values at -80 dB, max |zzb/apb - 1| = {worst:.3e} (limit 0.01)")))
}

fn high_snr_collapse() -> Outcome {
    let mut c = preset(Preset::Fig1);
    c.sweeps[0].values = vec![SweepValue::TxElements(32)];
    let t = run(&c)?;
    let Some(r) = t.rows.iter().rev().find(|r| r.gamma_term > 1.0 - 1e-6) else {
        return Ok((false, "no grid point with gamma_32(u) > 1 - 1e-6".into()));
    };
    let ratio = r.zzb / r.expected_crb;
    Ok((
        (0.99..=1.001).contains(&ratio),
        format!("N = 32 at {} dB: zzb/expected_crb = {ratio:.9} (want [0.99, 1.001])", r.snr_db),
    ))
}

fn threshold_compression() -> Outcome {
    let t = run(&preset(Preset::Fig1))?;
    let mut literal = Vec::new();
    let mut transition = Vec::new();
    for n in ["1", "2", "4", "8", "16", "32"] {
        let g = t.group(n);
        let below: Vec<bool> = g.iter().map(|r| r.zzb <= 2.0 * r.expected_crb).collect();
        literal.push(g.iter().zip(&below).find(|(_, b)| **b).map(|(r, _)| r.snr_db));
        // first point from which the bound stays within 2x of the CRB
        let start = (0..g.len()).find(|&i| below[i..].iter().all(|b| *b));
        transition.push(start.map(|i| g[i].snr_db));
    }
    let nonincreasing = |v: &[Option<f64>]| {
        v.iter().all(Option::is_some) && v.windows(2).all(|w| w[1] <= w[0])
    };
    let fmt = |v: &[Option<f64>]| {
        v.iter()
            .map(|x| x.map_or("none".to_string(), |d| format!("{d}")))
            .collect::<Vec<_>>()
            .join(", ")
    };
    Ok((
        nonincreasing(&transition),
        format!(
            "thresholds for N = 1..32: [{}] dB (first crossing of the bound-to-CRB transition); \
             earliest crossing anywhere on the grid: [{}] dB, nonincreasing: {}",
            fmt(&transition),
            fmt(&literal),
            nonincreasing(&literal)
        ),
    ))
}

fn apb_monotone() -> Outcome {
    let zeta = 120f64.to_radians();
    let decreasing = (1..8).all(|k| apb(k + 1, zeta) < apb(k, zeta));
    let e1 = (apb(1, zeta) - zeta * zeta / 12.0).abs();
    let e2 = (apb(2, zeta) - zeta * zeta / 18.0).abs();
    Ok((
        decreasing && e1 <= 1e-12 && e2 <= 1e-12,
        format!("strictly decreasing over K = 1..8: {decreasing}, |K=1 - zeta^2/12| = {e1:.1e}, |K=2 - zeta^2/18| = {e2:.1e}"),
    ))
}

const SMALL: &str = "[scenario]\nrx_elements = 8\nnum_targets = 1\nsnapshots = 40\nprior_deg = [-60, 60]\n";

fn oracle_equivalence() -> Outcome {
    let text = format!(
        "{SMALL}tx_elements = 1\n[snr_grid]\nstart_db = -20\nstop_db = 20\nstep_db = 1\n[oracle]\nenabled = true\n"
    );
    let c = ExperimentConfig::from_toml_str(&text).map_err(|e| e.to_string())?;
    let t = run(&c)?;
    let mut worst = (0.0f64, 0.0);
    for r in &t.rows {
        let exact = r.zzb_exact.ok_or("oracle column empty")?;
        let gap = (10.0 * (r.zzb / exact).log10()).abs();
        if gap > worst.0 {
            worst = (gap, r.snr_db);
        }
    }
    Ok((
        worst.0 <= 1.5,
        format!("{} points, max |closed form - exact| = {:.3} dB at {} dB (limit 1.5)", t.rows.len(), worst.0, worst.1),
    ))
}

fn simulation_validity() -> Outcome {
    let text = format!(
        "{SMALL}tx_elements = 4\n[snr_grid]\nstart_db = -10\nstop_db = 20\nstep_db = 5\n\
         [simulation]\nenabled = true\ntrials = 500\n"
    );
    let c = ExperimentConfig::from_toml_str(&text).map_err(|e| e.to_string())?;
    let t = run(&c)?;
    let mut ok = true;
    let mut tightest = f64::INFINITY;
    for r in &t.rows {
        let mse = r.mse.ok_or("simulation column empty")?;
        let upper = mse + 2.0 * r.mse_stderr.ok_or("stderr column empty")?;
        ok &= upper >= r.zzb;
        tightest = tightest.min(upper / r.zzb);
    }
    Ok((ok, format!("{} points x 500 trials, min (mse + 2 stderr)/zzb = {tightest:.3}", t.rows.len())))
}

fn property_suites() -> Outcome {
    let checks = validation::property_suite(2024);
    let failed: Vec<String> = checks.iter().filter(|c| !c.passed).map(|c| c.to_string()).collect();
    let detail = if failed.is_empty() {
        checks.iter().map(|c| c.name).collect::<Vec<_>>().join("; ")
    } else {
        failed.join("; ")
    };
    Ok((failed.is_empty(), format!("{}/{} suites pass: {detail}", checks.len() - failed.len(), checks.len())))
}

fn determinism() -> Outcome {
    let c = preset(Preset::Fig2);
    let dir = tempfile::tempdir().map_err(|e| e.to_string())?;
    let mut files = Vec::new();
    for threads in [1, 4] {
        let pool = rayon::ThreadPoolBuilder::new()
            .num_threads(threads)
            .build()
            .map_err(|e| e.to_string())?;
        let t = pool.install(|| run(&c))?;
        let path = dir.path().join(format!("fig2_{threads}.csv"));
        write_csv(&t, &path).map_err(|e| e.to_string())?;
        files.push(std::fs::read(&path).map_err(|e| e.to_string())?);
    }
    Ok((files[0] == files[1], format!("fig2 with 1 and 4 threads: {} bytes each, identical: {}", files[0].len(), files[0] == files[1])))
}

fn main() {
    let criteria: [Criterion; 8] = [
        ("zero-SNR collapse", zero_snr_collapse),
        ("high-SNR collapse", high_snr_collapse),
        ("threshold compression", threshold_compression),
        ("APB monotonicity", apb_monotone),
        ("oracle equivalence", oracle_equivalence),
        ("bound validity by simulation", simulation_validity),
        ("numerical property suites", property_suites),
        ("determinism", determinism),
    ];
    let mut failures = 0;
    for (i, (name, f)) in criteria.iter().enumerate() {
        let start = Instant::now();
        let (passed, detail) = f().unwrap_or_else(|e| (false, format!("error: {e}")));
        let status = if passed { "PASS" } else { "FAIL" };
        println!(
            "criterion {} {name}: {status} ({detail}) [{:.1} s]",
            i + 1,
            start.elapsed().as_secs_f64()
        );
        failures += usize::from(!passed);
    }
    println!("acceptance: {}/{} criteria pass", criteria.len() - failures, criteria.len());
    if failures > 0 {
        std::process::exit(1);
    }
}

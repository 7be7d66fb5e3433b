use std::sync::atomic::{AtomicUsize, Ordering};

use log::info;
use rayon::prelude::*;

use super::config::ExperimentConfig;
use super::table::{ResultRow, ResultTable};
use super::ExperimentError;
use crate::fisher::PriorSamples;
use crate::model::Scenario;
use crate::seeding;
use crate::sim::simulate_mse;
use crate::zzb::{apb, db_to_linear, zzb, zzb_exact_1d};

struct Group {
    label: String,
    scenario: Scenario,
    samples: PriorSamples,
    done: AtomicUsize,
}

/// Evaluates every (sweep combination, SNR point) pair in parallel. Rows
/// come out ordered by combination, then SNR, whatever the thread count.
///
/// All combinations share the prior sample seed, so curves within one run
/// use common random numbers.
pub fn run_experiment(config: &ExperimentConfig) -> Result<ResultTable, ExperimentError> {
    let grid = config.snr_grid.points();
    let groups: Vec<Group> = config
        .combinations()
        .iter()
        .map(|combo| {
            let label = ExperimentConfig::label(combo);
            let context = |source| ExperimentError::Compute {
                sweep_value: label.clone(),
                snr_db: f64::NAN,
                source,
            };
            let scenario = config.scenario_for(combo).build().map_err(context)?;
            let samples = PriorSamples::stratified(
                scenario.num_targets(),
                scenario.prior(),
                config.bounds.crb_samples,
                config.seed,
            )
            .map_err(context)?;
            Ok(Group {
                label,
                scenario,
                samples,
                done: AtomicUsize::new(0),
            })
        })
        .collect::<Result<_, ExperimentError>>()?;

    let tasks: Vec<(usize, usize)> = (0..groups.len())
        .flat_map(|g| (0..grid.len()).map(move |p| (g, p)))
        .collect();
    info!(
        "{} sweep values x {} SNR points, {} prior samples",
        groups.len(),
        grid.len(),
        config.bounds.crb_samples
    );
    let convention = config.energy_convention();
    let rows = tasks
        .par_iter()
        .map(|&(g, p)| {
            let group = &groups[g];
            let snr_db = grid[p];
            let context = |source| ExperimentError::Compute {
                sweep_value: group.label.clone(),
                snr_db,
                source,
            };
            let snr = db_to_linear(snr_db);
            let (value, d) = zzb(&group.scenario, snr, &group.samples, convention).map_err(context)?;
            let sim = if config.simulation.enabled {
                let seed = seeding::derive_seed(
                    config.simulation_seed(),
                    seeding::TAG_POINT,
                    ((g as u64) << 32) | p as u64,
                );
                Some(
                    simulate_mse(
                        &group.scenario,
                        snr,
                        config.simulation.trials,
                        config.simulation.grid_step_deg.to_radians(),
                        seed,
                    )
                    .map_err(context)?,
                )
            } else {
                None
            };
            let exact = if config.oracle.enabled {
                Some(
                    zzb_exact_1d(&group.scenario.with_snr(snr), config.oracle.quadrature_points)
                        .map_err(context)?,
                )
            } else {
                None
            };
            let finished = group.done.fetch_add(1, Ordering::Relaxed) + 1;
            if finished == grid.len() {
                info!("sweep value {} done", group.label);
            }
            Ok(ResultRow {
                sweep_value: group.label.clone(),
                snr_db,
                zzb: value,
                expected_crb: d.expected_crb(),
                apb: apb(group.scenario.num_targets(), group.scenario.prior().width()),
                mse: sim.map(|s| s.mse),
                mse_stderr: sim.map(|s| s.stderr),
                h_tilde: d.h_tilde,
                u_tilde: d.u_tilde,
                gamma_term: d.gamma_term,
                p_large: d.p_large,
                crb_rejection_rate: d.crb_rejection_rate,
                zzb_exact: exact,
            })
        })
        .collect::<Result<Vec<ResultRow>, ExperimentError>>()?;
    // `tasks` is already in (combination, SNR) order and collect keeps it
    Ok(ResultTable { rows })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::experiment::config::Preset;

    fn small(text: &str) -> ExperimentConfig {
        ExperimentConfig::from_toml_str(text).unwrap()
    }

    #[test]
    fn fig2_apb_column_matches_closed_form() {
        let c = small("preset = \"fig2\"\n[snr_grid]\nstart_db = -20\nstop_db = 0\nstep_db = 10\n[bounds]\ncrb_samples = 50\n");
        let t = run_experiment(&c).unwrap();
        assert_eq!(t.rows.len(), 9);
        let zeta = 120f64.to_radians();
        for (label, k) in [("2", 2.0), ("5", 5.0), ("8", 8.0)] {
            let want = zeta * zeta * k / ((k + 1.0).powi(2) * (k + 2.0));
            for r in t.group(label) {
                assert!((r.apb - want).abs() <= 1e-12 * want);
                assert!(r.zzb > 0.0 && r.expected_crb > 0.0);
                assert!(r.mse.is_none() && r.zzb_exact.is_none());
            }
        }
        assert_eq!(t.sweep_values(), ["2", "5", "8"]);
    }

    #[test]
    fn fig3_wider_prior_has_larger_apb() {
        let mut c = ExperimentConfig::load(None, Some(Preset::Fig3)).unwrap();
        c.snr_grid.start_db = 0.0;
        c.snr_grid.stop_db = 0.0;
        c.bounds.crb_samples = 20;
        let t = run_experiment(&c).unwrap();
        for k in ["2", "5", "8"] {
            let narrow = &t.group(&format!("-60:60;{k}"))[0];
            let wide = &t.group(&format!("-85:85;{k}"))[0];
            assert!(wide.apb > narrow.apb);
        }
    }

    #[test]
    fn optional_columns_filled_when_enabled() {
        let c = small(
            "[scenario]\nrx_elements = 4\ntx_elements = 2\nnum_targets = 1\n\
             [snr_grid]\nstart_db = 0\nstop_db = 10\nstep_db = 10\n\
             [bounds]\ncrb_samples = 50\n\
             [simulation]\nenabled = true\ntrials = 10\ngrid_step_deg = 1.0\n\
             [oracle]\nenabled = true\n",
        );
        let t = run_experiment(&c).unwrap();
        assert_eq!(t.rows.len(), 2);
        for r in &t.rows {
            assert_eq!(r.sweep_value, "none");
            assert!(r.mse.unwrap() >= 0.0 && r.mse_stderr.unwrap() >= 0.0);
            assert!(r.zzb_exact.unwrap() > 0.0);
        }
    }

    #[test]
    fn same_seed_same_csv() {
        let text = "preset = \"fig1\"\nseed = 4\n[snr_grid]\nstart_db = -10\nstop_db = 10\nstep_db = 10\n[bounds]\ncrb_samples = 30\n";
        let a = run_experiment(&small(text)).unwrap().to_csv_string();
        let b = run_experiment(&small(text)).unwrap().to_csv_string();
        assert_eq!(a, b);
        let other = run_experiment(&small(&text.replace("seed = 4", "seed = 5")))
            .unwrap()
            .to_csv_string();
        assert_ne!(a, other);
    }
}

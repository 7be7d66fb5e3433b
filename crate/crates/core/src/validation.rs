//! Self-checks run by `zzb-mimo validate`: analytic derivatives against
//! finite differences, Fisher structure, Chernoff signs, special functions
//! against quadrature and closed-form bound limits.

use std::fmt;

use rand::Rng;

use crate::chernoff::{alpha_g, mu_ddot_half_exact, mu_exact, EnergyConvention, HypothesisPair};
use crate::fisher::{fisher_matrix, PriorSamples};
use crate::model::{
    covariance_derivative, snapshot_covariance, AmplitudeDraw, AmplitudeModel, ArrayGeometry,
    PriorSupport, Scenario,
};
use crate::special::{gamma_32, q_function};
use crate::zzb::{apb, db_to_linear, linear_to_db, zzb, zzb_exact_1d};
use crate::{oracle, seeding, Result};

const TAG_VALIDATION: u64 = 0x0076_616c_6964;

#[derive(Clone, Debug, PartialEq)]
pub struct Check {
    pub name: &'static str,
    pub passed: bool,
    pub detail: String,
}

impl fmt::Display for Check {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let status = if self.passed { "PASS" } else { "FAIL" };
        write!(f, "[{status}] {}: {}", self.name, self.detail)
    }
}

fn check(name: &'static str, outcome: Result<(bool, String)>) -> Check {
    match outcome {
        Ok((passed, detail)) => Check { name, passed, detail },
        Err(e) => Check {
            name,
            passed: false,
            detail: format!("error: {e}"),
        },
    }
}

/// Random small scenario with a random Hermitian PD transmit shape and
/// sorted angles at least 2° apart.
fn random_instance(rng: &mut impl Rng) -> Result<(Scenario, Vec<f64>)> {
    let m = rng.random_range(1..8);
    let n = rng.random_range(1..5);
    let k = rng.random_range(1..4);
    let s = Scenario::with_tx_shape(
        ArrayGeometry::half_wavelength_ula(m, 1.0)?,
        ArrayGeometry::half_wavelength_ula(n, 1.0)?,
        k,
        rng.random_range(1..50),
        rng.random_range(0.5..2.0),
        10f64.powf(rng.random_range(-2.0..2.0)),
        rng.random_range(0.1..1.0),
        PriorSupport::from_degrees(-70.0, 70.0)?,
        oracle::random_hpd(n, rng),
    )?;
    loop {
        let mut th: Vec<f64> = (0..k).map(|_| rng.random_range(-1.2..1.2)).collect();
        th.sort_by(f64::total_cmp);
        if th.windows(2).all(|w| w[1] - w[0] > 2f64.to_radians()) {
            return Ok((s, th));
        }
    }
}

pub fn covariance_derivative_check(seed: u64, instances: usize) -> Check {
    let run = || -> Result<(bool, String)> {
        let mut rng = seeding::stream(seed, TAG_VALIDATION, 1);
        let mut worst = 0.0f64;
        for _ in 0..instances {
            let (s, th) = random_instance(&mut rng)?;
            let b = AmplitudeDraw::circular_gaussian(th.len(), s.amplitude_power(), &mut rng);
            for model in [AmplitudeModel::Averaged, AmplitudeModel::Realized(&b)] {
                for i in 0..th.len() {
                    let analytic = covariance_derivative(&th, &s, model, i)?;
                    let at = |x: f64| {
                        let mut t = th.clone();
                        t[i] = x;
                        snapshot_covariance(&t, &s, model).map(|r| r.into_matrix())
                    };
                    let h = 1e-6;
                    let fd = (&at(th[i] + h)? - &at(th[i] - h)?).scale(0.5 / h);
                    let norm = analytic.frobenius_norm();
                    if norm > 1e-12 {
                        worst = worst.max((&fd - &analytic).frobenius_norm() / norm);
                    }
                }
            }
        }
        Ok((worst <= 1e-6, format!("{instances} instances, worst relative error {worst:.2e} (limit 1e-6)")))
    };
    check("covariance derivative vs finite difference", run())
}

pub fn fisher_structure_check(seed: u64, instances: usize) -> Check {
    let run = || -> Result<(bool, String)> {
        let mut rng = seeding::stream(seed, TAG_VALIDATION, 2);
        let mut asym = 0.0f64;
        let mut min_eig_ratio = f64::INFINITY;
        let mut doubling_exact = true;
        for _ in 0..instances {
            let (s, th) = random_instance(&mut rng)?;
            let j = fisher_matrix(&th, &s)?;
            let k = j.dim();
            let scale = j.trace().abs().max(1e-300);
            for a in 0..k {
                for b in 0..k {
                    asym = asym.max((j.get(a, b) - j.get(b, a)).abs() / scale);
                }
            }
            for _ in 0..16 {
                let x: Vec<f64> = (0..k).map(|_| rng.random_range(-1.0..1.0)).collect();
                let norm2: f64 = x.iter().map(|v| v * v).sum();
                min_eig_ratio = min_eig_ratio.min(j.quadratic_form(&x) / (norm2 * scale));
            }
            let j2 = fisher_matrix(&th, &s.with_snapshots(2 * s.snapshots()))?;
            doubling_exact &= j2.entries().iter().zip(j.entries()).all(|(a, b)| *a == 2.0 * b);
        }
        let passed = asym <= 1e-12 && min_eig_ratio >= -1e-12 && doubling_exact;
        Ok((
            passed,
            format!(
                "{instances} instances, asymmetry {asym:.1e}, min xᵀJx/(|x|²tr J) {min_eig_ratio:.2e}, J(2L) = 2J(L) exact: {doubling_exact}"
            ),
        ))
    };
    check("Fisher symmetry, PSD and snapshot scaling", run())
}

pub fn chernoff_sign_check(seed: u64, draws: usize) -> Check {
    let run = || -> Result<(bool, String)> {
        let mut rng = seeding::stream(seed, TAG_VALIDATION, 3);
        let mut max_mu = f64::NEG_INFINITY;
        let mut min_mu_ddot = f64::INFINITY;
        for _ in 0..draws {
            let (s, th) = random_instance(&mut rng)?;
            let delta: Vec<f64> = th.iter().map(|_| rng.random_range(-0.3..0.3)).collect();
            let Ok(pair) = HypothesisPair::new(th, delta) else {
                continue;
            };
            let b = AmplitudeDraw::circular_gaussian(pair.phi().len(), s.amplitude_power(), &mut rng);
            for model in [AmplitudeModel::Averaged, AmplitudeModel::Realized(&b)] {
                // unclamped value, relative to the log-det scale
                let mu = mu_exact(&pair, &s, model, 0.5)?;
                max_mu = max_mu.max(mu / s.snapshots() as f64);
                min_mu_ddot = min_mu_ddot.min(mu_ddot_half_exact(&pair, &s, model)?);
            }
        }
        Ok((
            max_mu <= 1e-10 && min_mu_ddot >= 0.0,
            format!("{draws} draws, max μ(½)/L {max_mu:.2e}, min μ̈(½) {min_mu_ddot:.2e}"),
        ))
    };
    check("Chernoff signs μ(½) ≤ 0, μ̈(½) ≥ 0", run())
}

pub fn special_function_check() -> Check {
    let mut worst = 0.0f64;
    for z in [-3.0, -0.5, 0.0, 0.3, 0.75, 1.0, 2.0, 3.5, 5.0, 6.5] {
        worst = worst.max((q_function(z) - oracle::gaussian_tail_quadrature(z)).abs());
    }
    for u in [0.001, 0.1, 0.5, 1.0, 2.5, 5.0, 9.9, 10.0, 10.1, 15.0, 30.0] {
        worst = worst.max((gamma_32(u) - oracle::gamma_32_quadrature(u)).abs());
    }
    Check {
        name: "gamma_32 and Q vs quadrature",
        passed: worst <= 1e-10,
        detail: format!("worst absolute error {worst:.2e} (limit 1e-10)"),
    }
}

/// `c = M‖B‖²σ_s²/σ_n² = 2` with `L = N = K = M = 1`.
pub fn alpha_scalar_check() -> Check {
    let run = || -> Result<(bool, String)> {
        let s = Scenario::new(
            ArrayGeometry::half_wavelength_ula(1, 1.0)?,
            ArrayGeometry::half_wavelength_ula(1, 1.0)?,
            1,
            1,
            1.0,
            2.0,
            1.0,
            PriorSupport::from_degrees(-60.0, 60.0)?,
        )?;
        let a = alpha_g(&s)?;
        Ok(((a - 2.0).abs() <= 1e-12, format!("α_G = {a:.15} (want 2 to 1e-12)")))
    };
    check("α_G scalar reduction", run())
}

pub fn apb_check() -> Check {
    let zeta = 120f64.to_radians();
    let k1 = (apb(1, zeta) - zeta * zeta / 12.0).abs();
    let k2 = (apb(2, zeta) - zeta * zeta / 18.0).abs();
    let decreasing = (1..8).all(|k| apb(k + 1, zeta) < apb(k, zeta));
    Check {
        name: "APB closed form and monotonicity",
        passed: k1 <= 1e-12 && k2 <= 1e-12 && decreasing,
        detail: format!("|K=1 − ζ²/12| {k1:.1e}, |K=2 − ζ²/18| {k2:.1e}, strictly decreasing to K=8: {decreasing}"),
    }
}

fn small_scenario(n: usize, k: usize) -> Result<Scenario> {
    Scenario::new(
        ArrayGeometry::half_wavelength_ula(8, 1.0)?,
        ArrayGeometry::half_wavelength_ula(n, 1.0)?,
        k,
        40,
        1.0,
        1.0,
        0.5,
        PriorSupport::from_degrees(-60.0, 60.0)?,
    )
}

pub fn low_snr_check(seed: u64) -> Check {
    let run = || -> Result<(bool, String)> {
        let mut worst = 0.0f64;
        for (n, k) in [(1, 1), (4, 1), (4, 3)] {
            let s = small_scenario(n, k)?;
            let samples = PriorSamples::stratified(k, s.prior(), 200, seed)?;
            let (v, _) = zzb(&s, 1e-8, &samples, EnergyConvention::PlugIn)?;
            worst = worst.max((v / apb(k, s.prior().width()) - 1.0).abs());
        }
        Ok((worst <= 0.01, format!("max |zzb/apb − 1| at SNR 1e-8: {worst:.2e} (limit 0.01)")))
    };
    check("zero-SNR collapse to APB", run())
}

pub fn exact_oracle_check(seed: u64) -> Check {
    let run = || -> Result<(bool, String)> {
        let s = small_scenario(1, 1)?;
        let samples = PriorSamples::stratified(1, s.prior(), 500, seed)?;
        let mut worst = 0.0f64;
        for db in [-10.0, 0.0, 10.0] {
            let snr = db_to_linear(db);
            let (closed, _) = zzb(&s, snr, &samples, EnergyConvention::PlugIn)?;
            let exact = zzb_exact_1d(&s.with_snr(snr), 64)?;
            worst = worst.max(linear_to_db(closed / exact).abs());
        }
        Ok((worst <= 1.5, format!("max gap {worst:.3} dB at -10, 0, 10 dB (limit 1.5)")))
    };
    check("closed form vs exact single-target oracle", run())
}

/// Numerical property checks on random instances.
pub fn property_suite(seed: u64) -> Vec<Check> {
    vec![
        covariance_derivative_check(seed, 100),
        fisher_structure_check(seed, 100),
        chernoff_sign_check(seed, 500),
        special_function_check(),
        alpha_scalar_check(),
    ]
}

/// [`property_suite`] plus bound-level limits and the exact oracle.
pub fn full_suite(seed: u64) -> Vec<Check> {
    let mut checks = property_suite(seed);
    checks.push(apb_check());
    checks.push(low_snr_check(seed));
    checks.push(exact_oracle_check(seed));
    checks
}

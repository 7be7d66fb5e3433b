//! Chernoff machinery for the binary detection problem between `θ = φ`
//! and `θ = φ + δ`: exact `μ(½)` and `μ̈(½)`, the large-error constants
//! `α_G` and `P_L`, the small-error probability `P_S` and the Δ-region test.

use std::f64::consts::FRAC_PI_2;

use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::fisher::FisherMatrix;
use crate::linalg::{trace_product_squared, ComplexMatrix, HermitianPd};
use crate::model::{snapshot_covariance, AmplitudeDraw, AmplitudeModel, Scenario};
use crate::seeding;
use crate::special::{ln_q_function, q_function};

/// Hypotheses `H₀: θ = φ` and `H₁: θ = φ + δ`.
#[derive(Clone, Debug, PartialEq)]
pub struct HypothesisPair {
    phi: Vec<f64>,
    delta: Vec<f64>,
    phi_plus_delta: Vec<f64>,
}

impl HypothesisPair {
    pub fn new(phi: Vec<f64>, delta: Vec<f64>) -> Result<Self> {
        if phi.len() != delta.len() {
            return Err(Error::DimensionMismatch {
                op: "HypothesisPair",
                expected: (phi.len(), 1),
                found: (delta.len(), 1),
            });
        }
        let phi_plus_delta: Vec<f64> = phi.iter().zip(&delta).map(|(p, d)| p + d).collect();
        for t in phi.iter().chain(&phi_plus_delta) {
            if !(t.abs() < FRAC_PI_2) {
                return Err(Error::InvalidArgument(format!(
                    "hypothesis angle {t} rad is outside (−π/2, π/2)"
                )));
            }
        }
        Ok(Self {
            phi,
            delta,
            phi_plus_delta,
        })
    }

    pub fn phi(&self) -> &[f64] {
        &self.phi
    }

    pub fn delta(&self) -> &[f64] {
        &self.delta
    }

    pub fn phi_plus_delta(&self) -> &[f64] {
        &self.phi_plus_delta
    }

    /// The same pair seen from the other hypothesis, `(φ+δ, −δ)`.
    pub fn swapped(&self) -> Self {
        Self {
            phi: self.phi_plus_delta.clone(),
            delta: self.delta.iter().map(|d| -d).collect(),
            phi_plus_delta: self.phi.clone(),
        }
    }
}

fn pair_covariances(
    pair: &HypothesisPair,
    scenario: &Scenario,
    amplitudes: AmplitudeModel<'_>,
) -> Result<(HermitianPd, HermitianPd)> {
    Ok((
        snapshot_covariance(&pair.phi, scenario, amplitudes)?,
        snapshot_covariance(&pair.phi_plus_delta, scenario, amplitudes)?,
    ))
}

/// `μ(s) = L[s ln|R₀| + (1−s) ln|R₁| − ln|sR₀ + (1−s)R₁|]` for `s ∈ [0, 1]`.
pub fn mu_exact(
    pair: &HypothesisPair,
    scenario: &Scenario,
    amplitudes: AmplitudeModel<'_>,
    s: f64,
) -> Result<f64> {
    if !(0.0..=1.0).contains(&s) {
        return Err(Error::InvalidArgument(format!("Chernoff parameter {s} outside [0, 1]")));
    }
    let (r0, r1) = pair_covariances(pair, scenario, amplitudes)?;
    let mix = HermitianPd::new(
        r0.matrix()
            .scale(s)
            .try_add(&r1.matrix().scale(1.0 - s))?
            .hermitian_part(),
    )?;
    let l = scenario.snapshots() as f64;
    Ok(l * (s * r0.logdet() + (1.0 - s) * r1.logdet() - mix.logdet()))
}

/// `μ(½) = L[½(ln|R₀| + ln|R₁|) − ln|R₊/2|]`, clamped to `≤ 0`.
pub fn mu_half_exact(
    pair: &HypothesisPair,
    scenario: &Scenario,
    amplitudes: AmplitudeModel<'_>,
) -> Result<f64> {
    let (r0, r1) = pair_covariances(pair, scenario, amplitudes)?;
    let half_sum = HermitianPd::new(
        r0.matrix()
            .try_add(r1.matrix())?
            .scale(0.5)
            .hermitian_part(),
    )?;
    let l = scenario.snapshots() as f64;
    let mu = l * (0.5 * (r0.logdet() + r1.logdet()) - half_sum.logdet());
    Ok(mu.min(0.0))
}

/// `μ̈(½) = 4L tr{(R₊⁻¹R₋)²}`, clamped to `≥ 0`.
pub fn mu_ddot_half_exact(
    pair: &HypothesisPair,
    scenario: &Scenario,
    amplitudes: AmplitudeModel<'_>,
) -> Result<f64> {
    let (r0, r1) = pair_covariances(pair, scenario, amplitudes)?;
    let plus = HermitianPd::new(r0.matrix().try_add(r1.matrix())?.hermitian_part())?;
    let minus = r0.matrix().try_sub(r1.matrix())?;
    let x = plus.solve(&minus)?;
    let (tr, _) = trace_product_squared(&x)?;
    Ok((4.0 * scenario.snapshots() as f64 * tr).max(0.0))
}

/// `ln[exp(μ + μ̈/8)·Q(√μ̈/2)]`.
pub fn ln_error_probability_bound(mu: f64, mu_ddot: f64) -> f64 {
    mu + mu_ddot / 8.0 + ln_q_function(mu_ddot.max(0.0).sqrt() / 2.0)
}

/// `P_e ≥ exp(μ + μ̈/8)·Q(√μ̈/2)` at `s = ½`.
pub fn error_probability_bound(mu: f64, mu_ddot: f64) -> f64 {
    ln_error_probability_bound(mu, mu_ddot).exp()
}

/// How `‖B‖_F²` enters `α_G` and `P_L`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum EnergyConvention {
    /// Replace `‖B‖_F²` by its mean `K·σ_b²`.
    PlugIn,
    /// Average the full expressions over `draws` amplitude realizations.
    Averaged { draws: usize, seed: u64 },
}

/// `S = (M‖B‖²/σ_n²)·Σ`.
fn scaled_tx_covariance(scenario: &Scenario, energy: f64) -> ComplexMatrix {
    let m = scenario.rx_elements() as f64;
    scenario
        .tx_covariance()
        .scale(m * energy / scenario.noise_power())
}

/// `α_G` for a given `‖B‖_F²`.
///
/// The trace expression
/// `4L tr{S²/2 + [S²(I+S/2)⁻¹]²/8 − S³(I+S/2)⁻¹/2}` is a function of `S`
/// alone, and the scalar identity `s²/2 + s⁴/(8t²) − s³/(2t) = 2s²/(2+s)²`
/// with `t = 1 + s/2` turns it into `8L tr{(I − (I+S/2)⁻¹)²}`, which has no
/// cancellation at high SNR.
pub fn alpha_g_with_energy(scenario: &Scenario, energy: f64) -> Result<f64> {
    let s = scaled_tx_covariance(scenario, energy);
    let n = s.rows();
    let t = HermitianPd::new(s.scale(0.5).add_diagonal(1.0).hermitian_part())?;
    let p = &ComplexMatrix::identity(n) - &t.inverse();
    let (tr, _) = trace_product_squared(&p)?;
    Ok((8.0 * scenario.snapshots() as f64 * tr).max(0.0))
}

/// Large-δ branch of `μ(½)`: `L[ln|I+S| − 2 ln|I+S/2|]`.
pub fn large_error_mu_with_energy(scenario: &Scenario, energy: f64) -> Result<f64> {
    let s = scaled_tx_covariance(scenario, energy);
    let full = HermitianPd::new(s.add_diagonal(1.0).hermitian_part())?;
    let half = HermitianPd::new(s.scale(0.5).add_diagonal(1.0).hermitian_part())?;
    let l = scenario.snapshots() as f64;
    Ok((l * (full.logdet() - 2.0 * half.logdet())).min(0.0))
}

/// `ln P_L` for a given `‖B‖_F²`.
pub fn ln_p_large_with_energy(scenario: &Scenario, energy: f64) -> Result<f64> {
    let alpha = alpha_g_with_energy(scenario, energy)?;
    let mu = large_error_mu_with_energy(scenario, energy)?;
    Ok(ln_error_probability_bound(mu, alpha))
}

fn plug_in_energy(scenario: &Scenario) -> f64 {
    scenario.num_targets() as f64 * scenario.amplitude_power()
}

/// `α_G` with the plug-in `‖B‖_F² = K·σ_b²`.
pub fn alpha_g(scenario: &Scenario) -> Result<f64> {
    alpha_g_with_energy(scenario, plug_in_energy(scenario))
}

/// `P_L` with the plug-in `‖B‖_F² = K·σ_b²`. May underflow to zero at very
/// high SNR; [`ln_p_large_with_energy`] stays finite.
pub fn p_large(scenario: &Scenario) -> Result<f64> {
    Ok(ln_p_large_with_energy(scenario, plug_in_energy(scenario))?.exp())
}

/// `α_G` and `P_L` under an energy convention.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct LargeErrorTerms {
    pub alpha_g: f64,
    pub p_large: f64,
    pub ln_p_large: f64,
}

pub fn large_error_terms(
    scenario: &Scenario,
    convention: EnergyConvention,
) -> Result<LargeErrorTerms> {
    match convention {
        EnergyConvention::PlugIn => {
            let energy = plug_in_energy(scenario);
            let alpha_g = alpha_g_with_energy(scenario, energy)?;
            let ln_p_large = ln_p_large_with_energy(scenario, energy)?;
            Ok(LargeErrorTerms {
                alpha_g,
                p_large: ln_p_large.exp(),
                ln_p_large,
            })
        }
        EnergyConvention::Averaged { draws, seed } => {
            if draws == 0 {
                return Err(Error::InvalidArgument("need at least one amplitude draw".into()));
            }
            let per_draw: Vec<(f64, f64)> = (0..draws)
                .into_par_iter()
                .map(|i| {
                    let mut rng = seeding::stream(seed, seeding::TAG_AMPLITUDE, i as u64);
                    let b = AmplitudeDraw::circular_gaussian(
                        scenario.num_targets(),
                        scenario.amplitude_power(),
                        &mut rng,
                    );
                    let energy = b.frobenius_sq();
                    Ok((
                        alpha_g_with_energy(scenario, energy)?,
                        ln_p_large_with_energy(scenario, energy)?,
                    ))
                })
                .collect::<Result<_>>()?;
            let n = draws as f64;
            let alpha_g = per_draw.iter().map(|p| p.0).sum::<f64>() / n;
            let peak = per_draw.iter().map(|p| p.1).fold(f64::NEG_INFINITY, f64::max);
            let ln_p_large =
                peak + (per_draw.iter().map(|p| (p.1 - peak).exp()).sum::<f64>() / n).ln();
            Ok(LargeErrorTerms {
                alpha_g,
                p_large: ln_p_large.exp(),
                ln_p_large,
            })
        }
    }
}

/// `P_S(δ) = Q(½√(δᵀJδ))`.
pub fn p_small(delta: &[f64], fisher: &FisherMatrix) -> f64 {
    q_function(0.5 * fisher.quadratic_form(delta).max(0.0).sqrt())
}

/// `δ ∈ Δ ⇔ δᵀJδ ≤ α`; the boundary belongs to Δ.
pub fn in_delta_region(delta: &[f64], fisher: &FisherMatrix, alpha: f64) -> bool {
    fisher.quadratic_form(delta) <= alpha
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ChernoffTerms {
    pub mu_half: f64,
    pub mu_ddot_half: f64,
    pub alpha_g: f64,
    pub p_large: f64,
    pub in_delta_region: bool,
}

/// Exact and approximated terms for one hypothesis pair under the
/// averaged covariance and plug-in energy.
pub fn chernoff_terms(
    pair: &HypothesisPair,
    scenario: &Scenario,
    fisher: &FisherMatrix,
) -> Result<ChernoffTerms> {
    let alpha_g = alpha_g(scenario)?;
    Ok(ChernoffTerms {
        mu_half: mu_half_exact(pair, scenario, AmplitudeModel::Averaged)?,
        mu_ddot_half: mu_ddot_half_exact(pair, scenario, AmplitudeModel::Averaged)?,
        alpha_g,
        p_large: p_large(scenario)?,
        in_delta_region: in_delta_region(pair.delta(), fisher, alpha_g),
    })
}

/// Median, 90th percentile and maximum of a sample.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Spread {
    pub median: f64,
    pub p90: f64,
    pub max: f64,
}

impl Spread {
    fn of(mut values: Vec<f64>) -> Self {
        values.sort_by(f64::total_cmp);
        let pick = |q: f64| {
            let idx = ((values.len() - 1) as f64 * q).round() as usize;
            values[idx]
        };
        Self {
            median: pick(0.5),
            p90: pick(0.9),
            max: *values.last().unwrap(),
        }
    }
}

/// Diagnostics for `V*B†BVᵀ ≈ ‖B‖_F² I_N`.
#[derive(Clone, Debug, PartialEq)]
pub struct ApproximationReport {
    pub trials: usize,
    /// Per-trial `‖V*B†BVᵀ − ‖B‖²I‖_F / ‖B‖²`.
    pub frobenius_errors: Vec<f64>,
    /// Per-trial `|μ_large − μ_exact| / |μ_exact|` for independent φ, φ'.
    pub mu_errors: Vec<f64>,
    pub frobenius: Spread,
    pub mu: Spread,
}

fn approximation_defect(v: &ComplexMatrix, b: &AmplitudeDraw) -> Result<f64> {
    // V* B†B Vᵀ = Σ_k |b_k|² v_k* v_kᵀ, and outer(u, u) = u u†
    let mut e = ComplexMatrix::zeros(v.rows(), v.rows());
    for (k, bk) in b.values().iter().enumerate() {
        let conj: Vec<_> = v.column(k).iter().map(|c| c.conj()).collect();
        e = e.try_add(&ComplexMatrix::outer(&conj, &conj).scale(bk.norm_sqr()))?;
    }
    let energy = b.frobenius_sq();
    if energy == 0.0 {
        return Ok(0.0);
    }
    Ok(e.add_diagonal(-energy).frobenius_norm() / energy)
}

fn sorted_prior_draw(scenario: &Scenario, rng: &mut impl rand::Rng) -> Vec<f64> {
    let prior = scenario.prior();
    let mut t: Vec<f64> = (0..scenario.num_targets())
        .map(|_| prior.min() + rng.random::<f64>() * prior.width())
        .collect();
    t.sort_by(f64::total_cmp);
    t
}

/// Samples `φ`, `φ'` from the prior and `b` from the amplitude law and
/// measures how far the energy-spreading approximation is from exact.
/// Diagnostic only; bound values never use it.
pub fn validate_approximation(
    scenario: &Scenario,
    trials: usize,
    seed: u64,
) -> Result<ApproximationReport> {
    if trials == 0 {
        return Err(Error::InvalidArgument("need at least one trial".into()));
    }
    let per_trial: Vec<(f64, f64)> = (0..trials)
        .into_par_iter()
        .map(|i| {
            let mut rng = seeding::stream(seed, seeding::TAG_TRIAL, i as u64);
            let phi = sorted_prior_draw(scenario, &mut rng);
            let other = sorted_prior_draw(scenario, &mut rng);
            let b = AmplitudeDraw::circular_gaussian(
                scenario.num_targets(),
                scenario.amplitude_power(),
                &mut rng,
            );
            let v = scenario.tx().steering_matrix(&phi);
            let frob = approximation_defect(&v, &b)?;
            let delta: Vec<f64> = other.iter().zip(&phi).map(|(o, p)| o - p).collect();
            let pair = HypothesisPair::new(phi, delta)?;
            let exact = mu_half_exact(&pair, scenario, AmplitudeModel::Realized(&b))?;
            let approx = large_error_mu_with_energy(scenario, b.frobenius_sq())?;
            let mu_err = if exact == 0.0 {
                if approx == 0.0 {
                    0.0
                } else {
                    f64::INFINITY
                }
            } else {
                ((approx - exact) / exact).abs()
            };
            Ok((frob, mu_err))
        })
        .collect::<Result<_>>()?;
    let frobenius_errors: Vec<f64> = per_trial.iter().map(|p| p.0).collect();
    let mu_errors: Vec<f64> = per_trial.iter().map(|p| p.1).collect();
    Ok(ApproximationReport {
        trials,
        frobenius: Spread::of(frobenius_errors.clone()),
        mu: Spread::of(mu_errors.clone()),
        frobenius_errors,
        mu_errors,
    })
}

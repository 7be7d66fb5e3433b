//! The generalized Ziv-Zakai bound, the a-priori bound and an exact
//! single-target integration oracle.

use rayon::prelude::*;
use sha2::{Digest, Sha256};

use crate::chernoff::{large_error_terms, ln_error_probability_bound, EnergyConvention};
use crate::error::{Error, Result};
use crate::fisher::{expected_crb_over, CrbSummary, ExpectedCrb, PriorSamples};
use crate::linalg::{trace_product_squared, HermitianPd};
use crate::model::{mean_snapshot_covariance, Scenario};
use crate::special::gamma_32;

/// Points of the uniform φ-grid used by [`zzb_exact_1d`].
pub const EXACT_PHI_GRID: usize = 33;

const EXACT_MAX_POINTS: usize = 1 << 16;
const EXACT_RTOL: f64 = 1e-4;

pub fn db_to_linear(db: f64) -> f64 {
    10f64.powf(db / 10.0)
}

pub fn linear_to_db(x: f64) -> f64 {
    10.0 * x.log10()
}

/// A-priori bound `Kζ²/((K+1)²(K+2))`.
pub fn apb(num_targets: usize, zeta: f64) -> f64 {
    let k = num_targets as f64;
    k * zeta * zeta / ((k + 1.0).powi(2) * (k + 2.0))
}

/// First term of the bound before the permutation correction,
/// `12·P_L·tr(R_θ)/((K+1)(K+2))` with `tr(R_θ) = Kζ²/12` for the
/// independent uniform prior.
pub fn pre_permutation_apriori_term(p_large: f64, num_targets: usize, zeta: f64) -> f64 {
    let k = num_targets as f64;
    let trace_prior_cov = k * zeta * zeta / 12.0;
    12.0 * p_large * trace_prior_cov / ((k + 1.0) * (k + 2.0))
}

/// `h̃ = min(√(1ᵀJ⁻¹1·α/K), √K·ζ)` and whether the cap was active.
pub fn h_tilde(
    crb: &CrbSummary,
    alpha: f64,
    num_targets: usize,
    zeta: f64,
) -> Result<(f64, bool)> {
    if !crb.valid {
        return Err(Error::InvalidCrb);
    }
    let k = num_targets as f64;
    let free = (crb.quad_form * alpha / k).sqrt();
    let cap = k.sqrt() * zeta;
    if free > cap {
        Ok((cap, true))
    } else {
        Ok((free, false))
    }
}

/// Every intermediate of one bound evaluation.
#[derive(Clone, Debug, PartialEq)]
pub struct ZzbDiagnostics {
    pub snr: f64,
    pub h_tilde: f64,
    pub u_tilde: f64,
    /// `Γ_{3/2}(ũ)`.
    pub gamma_term: f64,
    /// `2·P_L·APB`.
    pub apriori_term: f64,
    /// `E[tr J⁻¹]/K`.
    pub crb_term: f64,
    pub capped: bool,
    pub p_large: f64,
    pub ln_p_large: f64,
    pub alpha_g: f64,
    /// `E[1ᵀJ⁻¹1]`.
    pub crb_quad_form: f64,
    pub crb_rejection_rate: f64,
}

impl ZzbDiagnostics {
    pub fn value(&self) -> f64 {
        if self.gamma_term == 0.0 {
            self.apriori_term
        } else {
            self.apriori_term + self.crb_term * self.gamma_term
        }
    }

    /// Same composition with the pre-permutation first term.
    pub fn pre_permutation_value(&self, num_targets: usize, zeta: f64) -> f64 {
        let first = pre_permutation_apriori_term(self.p_large, num_targets, zeta);
        if self.gamma_term == 0.0 {
            first
        } else {
            first + self.crb_term * self.gamma_term
        }
    }

    /// Expected CRB at this point; infinite at zero SNR.
    pub fn expected_crb(&self) -> f64 {
        self.crb_term
    }
}

/// Bound from a precomputed expected CRB at the same SNR.
pub fn zzb_from_parts(
    scenario: &Scenario,
    crb: &ExpectedCrb,
    convention: EnergyConvention,
) -> Result<ZzbDiagnostics> {
    let k = scenario.num_targets();
    let zeta = scenario.prior().width();
    let large = large_error_terms(scenario, convention)?;
    let (h, capped) = h_tilde(&crb.summary(), large.alpha_g, k, zeta)?;
    let u = if capped {
        k as f64 * h * h / (8.0 * crb.mean_quad_form)
    } else {
        large.alpha_g / 8.0
    };
    Ok(ZzbDiagnostics {
        snr: scenario.snr(),
        h_tilde: h,
        u_tilde: u,
        gamma_term: gamma_32(u),
        apriori_term: 2.0 * large.p_large * apb(k, zeta),
        crb_term: crb.value,
        capped,
        p_large: large.p_large,
        ln_p_large: large.ln_p_large,
        alpha_g: large.alpha_g,
        crb_quad_form: crb.mean_quad_form,
        crb_rejection_rate: crb.rejection_rate,
    })
}

/// `2·P_L·Kζ²/((K+1)²(K+2)) + Γ_{3/2}(ũ)·E[tr J⁻¹]/K` at linear SNR `snr`,
/// with the CRB functionals averaged over `samples`.
pub fn zzb(
    scenario: &Scenario,
    snr: f64,
    samples: &PriorSamples,
    convention: EnergyConvention,
) -> Result<(f64, ZzbDiagnostics)> {
    if !(snr >= 0.0) || !snr.is_finite() {
        return Err(Error::InvalidArgument(format!("SNR must be finite and ≥ 0, got {snr}")));
    }
    let scen = scenario.with_snr(snr);
    if snr == 0.0 {
        let k = scen.num_targets();
        let zeta = scen.prior().width();
        let d = ZzbDiagnostics {
            snr,
            h_tilde: (k as f64).sqrt() * zeta,
            u_tilde: 0.0,
            gamma_term: 0.0,
            apriori_term: apb(k, zeta),
            crb_term: f64::INFINITY,
            capped: true,
            p_large: 0.5,
            ln_p_large: 0.5f64.ln(),
            alpha_g: 0.0,
            crb_quad_form: f64::INFINITY,
            crb_rejection_rate: 0.0,
        };
        return Ok((d.value(), d));
    }
    let crb = expected_crb_over(&scen, samples)?;
    let d = zzb_from_parts(&scen, &crb, convention)?;
    Ok((d.value(), d))
}

/// Exact single-target bound `∫₀^ζ P_e(h)(1 − h/ζ) h dh` with the Chernoff
/// lower bound `P_e(h) = exp(μ + μ̈/8)Q(√μ̈/2)` from the exact covariances,
/// averaged over an [`EXACT_PHI_GRID`]-point uniform grid on
/// `[ϑ_min, ϑ_max − h]`.
///
/// Integrated in `h = ζt²` by composite Simpson, starting from
/// `quadrature_points` intervals and doubling until two successive
/// estimates differ by less than `1e-4` relative.
pub fn zzb_exact_1d(scenario: &Scenario, quadrature_points: usize) -> Result<f64> {
    if scenario.num_targets() != 1 {
        return Err(Error::InvalidScenario(format!(
            "exact integration needs a single target, got K = {}",
            scenario.num_targets()
        )));
    }
    if quadrature_points < 64 {
        return Err(Error::InvalidArgument(format!(
            "need at least 64 quadrature points, got {quadrature_points}"
        )));
    }
    let zeta = scenario.prior().width();
    let integrand = |t: f64| -> Result<f64> {
        let h = zeta * t * t;
        let pe = averaged_error_probability(scenario, h)?;
        // P_e(h)(1 − h/ζ) h · dh/dt
        Ok(pe * (1.0 - t * t) * h * 2.0 * zeta * t)
    };
    let mut n = quadrature_points + quadrature_points % 2;
    let mut values: Vec<f64> = (0..=n)
        .into_par_iter()
        .map(|i| integrand(i as f64 / n as f64))
        .collect::<Result<_>>()?;
    let mut estimate = simpson(&values);
    let mut last_change = f64::INFINITY;
    while 2 * n <= EXACT_MAX_POINTS {
        let fresh: Vec<f64> = (0..n)
            .into_par_iter()
            .map(|i| integrand((2 * i + 1) as f64 / (2 * n) as f64))
            .collect::<Result<_>>()?;
        let mut merged = Vec::with_capacity(2 * n + 1);
        for i in 0..n {
            merged.push(values[i]);
            merged.push(fresh[i]);
        }
        merged.push(values[n]);
        values = merged;
        n *= 2;
        let refined = simpson(&values);
        last_change = (refined - estimate).abs() / refined.abs().max(f64::MIN_POSITIVE);
        estimate = refined;
        if last_change < EXACT_RTOL {
            return Ok(estimate);
        }
    }
    Err(Error::QuadratureNotConverged {
        points: n + 1,
        last_change,
    })
}

fn simpson(values: &[f64]) -> f64 {
    let n = values.len() - 1;
    let step = 1.0 / n as f64;
    let mut acc = values[0] + values[n];
    for (i, v) in values.iter().enumerate().take(n).skip(1) {
        acc += if i % 2 == 1 { 4.0 * v } else { 2.0 * v };
    }
    acc * step / 3.0
}

/// Chernoff lower bound on `P_min` averaged over the φ-grid.
pub fn averaged_error_probability(scenario: &Scenario, h: f64) -> Result<f64> {
    let prior = scenario.prior();
    let span = (prior.width() - h).max(0.0);
    let l = scenario.snapshots() as f64;
    let mut total = 0.0;
    for j in 0..EXACT_PHI_GRID {
        let phi = prior.min() + span * j as f64 / (EXACT_PHI_GRID - 1) as f64;
        let r0 = mean_snapshot_covariance(&[phi], scenario)?;
        let r1 = mean_snapshot_covariance(&[phi + h], scenario)?;
        let sum = r0.matrix().try_add(r1.matrix())?.hermitian_part();
        let plus = HermitianPd::new(sum.clone())?;
        let half = HermitianPd::new(sum.scale(0.5))?;
        let mu = (l * (0.5 * (r0.logdet() + r1.logdet()) - half.logdet())).min(0.0);
        let x = plus.solve(&r0.matrix().try_sub(r1.matrix())?)?;
        let mu_ddot = (4.0 * l * trace_product_squared(&x)?.0).max(0.0);
        total += ln_error_probability_bound(mu, mu_ddot).exp();
    }
    Ok(total / EXACT_PHI_GRID as f64)
}

/// Bound, expected CRB and APB along an SNR grid.
#[derive(Clone, Debug, PartialEq)]
pub struct BoundCurve {
    pub snr_db: Vec<f64>,
    pub snr_linear: Vec<f64>,
    pub zzb: Vec<f64>,
    pub expected_crb: Vec<f64>,
    pub apb: f64,
    pub diagnostics: Vec<ZzbDiagnostics>,
    /// SHA-256 of the scenario, grid and sampling settings.
    pub fingerprint: String,
}

impl BoundCurve {
    pub fn len(&self) -> usize {
        self.snr_db.len()
    }

    pub fn is_empty(&self) -> bool {
        self.snr_db.is_empty()
    }
}

pub fn check_snr_grid(snr_grid_db: &[f64]) -> Result<()> {
    if snr_grid_db.is_empty() {
        return Err(Error::InvalidArgument("SNR grid is empty".into()));
    }
    if snr_grid_db.iter().any(|x| !x.is_finite()) {
        return Err(Error::NonFinite("SNR grid"));
    }
    if snr_grid_db.windows(2).any(|w| !(w[1] > w[0])) {
        return Err(Error::InvalidArgument("SNR grid must be strictly increasing".into()));
    }
    Ok(())
}

/// Evaluates the bound at every grid point, all points sharing one set of
/// `crb_samples` stratified prior draws.
pub fn bound_curve(
    scenario: &Scenario,
    snr_grid_db: &[f64],
    crb_samples: usize,
    seed: u64,
    convention: EnergyConvention,
) -> Result<BoundCurve> {
    check_snr_grid(snr_grid_db)?;
    let samples =
        PriorSamples::stratified(scenario.num_targets(), scenario.prior(), crb_samples, seed)?;
    let snr_linear: Vec<f64> = snr_grid_db.iter().map(|d| db_to_linear(*d)).collect();
    let diagnostics: Vec<ZzbDiagnostics> = snr_linear
        .par_iter()
        .map(|snr| zzb(scenario, *snr, &samples, convention).map(|(_, d)| d))
        .collect::<Result<_>>()?;

    let mut hasher = Sha256::new();
    hasher.update(format!("{scenario:?}"));
    hasher.update(format!("{snr_grid_db:?}|{crb_samples}|{seed}|{convention:?}"));
    Ok(BoundCurve {
        snr_db: snr_grid_db.to_vec(),
        zzb: diagnostics.iter().map(ZzbDiagnostics::value).collect(),
        expected_crb: diagnostics.iter().map(ZzbDiagnostics::expected_crb).collect(),
        apb: apb(scenario.num_targets(), scenario.prior().width()),
        diagnostics,
        snr_linear,
        fingerprint: hex::encode(hasher.finalize()),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fisher::expected_crb;
    use crate::model::{ArrayGeometry, PriorSupport};
    use proptest::prelude::*;

    fn scenario(m: usize, n: usize, k: usize, prior_deg: f64) -> Scenario {
        Scenario::new(
            ArrayGeometry::half_wavelength_ula(m, 1.0).unwrap(),
            ArrayGeometry::half_wavelength_ula(n, 1.0).unwrap(),
            k,
            40,
            1.0,
            1.0,
            0.5,
            PriorSupport::from_degrees(-prior_deg, prior_deg).unwrap(),
        )
        .unwrap()
    }

    #[test]
    fn apb_values() {
        let z = 2.0;
        assert!((apb(1, z) - z * z / 12.0).abs() <= 1e-12);
        assert!((apb(2, z) - z * z / 18.0).abs() <= 1e-12);
        assert!((apb(3, 2.0 * z) - 4.0 * apb(3, z)).abs() <= 1e-12);
        for k in 1..8 {
            assert!(apb(k + 1, z) < apb(k, z));
        }
    }

    #[test]
    fn pre_permutation_term_at_half() {
        let z = 1.3;
        let k = 3;
        let t = pre_permutation_apriori_term(0.5, k, z);
        assert!((t - 0.5 * 3.0 * z * z / 20.0).abs() <= 1e-14);
    }

    #[test]
    fn h_tilde_cases() {
        let crb = CrbSummary::from_scalars(0.25, 0.25);
        let (h, capped) = h_tilde(&crb, 0.0, 1, 10.0).unwrap();
        assert_eq!((h, capped), (0.0, false));
        let (h, capped) = h_tilde(&crb, 2.0, 1, 10.0).unwrap();
        assert!((h - 0.5f64.sqrt()).abs() <= 1e-15 && !capped);
        let huge = CrbSummary::from_scalars(1e30, 1e30);
        let (h, capped) = h_tilde(&huge, 1.0, 4, 0.5).unwrap();
        assert!((h - 1.0).abs() <= 1e-15 && capped);
        let bad = CrbSummary::from_scalars(-1.0, 1.0);
        assert_eq!(h_tilde(&bad, 1.0, 1, 1.0), Err(Error::InvalidCrb));
    }

    #[test]
    fn low_snr_collapses_to_apb() {
        for (n, k) in [(1, 1), (8, 1), (4, 3)] {
            let s = scenario(8, n, k, 60.0);
            let samples = PriorSamples::stratified(k, s.prior(), 200, 1).unwrap();
            let (v, d) = zzb(&s, 1e-8, &samples, EnergyConvention::PlugIn).unwrap();
            let a = apb(k, s.prior().width());
            assert!((v / a - 1.0).abs() <= 0.01, "{v} vs {a}");
            // α_G ∝ SNR² outpaces 1ᵀJ⁻¹1 ∝ 1/SNR, so h̃ shrinks uncapped
            assert!(!d.capped && d.gamma_term < 1e-6);
        }
        let s = scenario(8, 2, 2, 60.0);
        let samples = PriorSamples::stratified(2, s.prior(), 10, 1).unwrap();
        let (v, _) = zzb(&s, 0.0, &samples, EnergyConvention::PlugIn).unwrap();
        assert_eq!(v, apb(2, s.prior().width()));
    }

    #[test]
    fn high_snr_collapses_to_expected_crb() {
        let s = scenario(8, 4, 1, 60.0);
        let samples = PriorSamples::stratified(1, s.prior(), 300, 2).unwrap();
        let (v, d) = zzb(&s, 1e4, &samples, EnergyConvention::PlugIn).unwrap();
        assert!(d.gamma_term >= 1.0 - 1e-6);
        assert!(d.apriori_term < 1e-9 * d.crb_term * d.gamma_term);
        assert!((v / d.crb_term - 1.0).abs() <= 1e-3);
        let direct = expected_crb(&s.with_snr(1e4), 300, 2).unwrap();
        assert_eq!(direct.value, d.crb_term);
    }

    #[test]
    fn stored_terms_compose() {
        let s = scenario(8, 4, 2, 60.0);
        let samples = PriorSamples::stratified(2, s.prior(), 200, 3).unwrap();
        for snr in [1e-3, 0.03, 1.0, 30.0] {
            let (v, d) = zzb(&s, snr, &samples, EnergyConvention::PlugIn).unwrap();
            assert_eq!(v, d.apriori_term + d.crb_term * d.gamma_term);
            let want = 2.0 * d.p_large * apb(2, s.prior().width());
            assert!((d.apriori_term - want).abs() <= 1e-12 * want.max(1e-300));
            if !d.capped {
                assert_eq!(d.u_tilde, d.alpha_g / 8.0);
            }
            assert!(d.h_tilde <= 2f64.sqrt() * s.prior().width());
        }
    }

    #[test]
    fn exact_oracle_zero_snr_is_apb() {
        let s = scenario(8, 1, 1, 60.0).with_snr(0.0);
        let v = zzb_exact_1d(&s, 64).unwrap();
        let a = apb(1, s.prior().width());
        assert!((v - a).abs() <= 1e-6 * a, "{v} vs {a}");
    }

    #[test]
    fn exact_oracle_rejects_bad_input() {
        assert!(matches!(
            zzb_exact_1d(&scenario(8, 1, 2, 60.0), 64),
            Err(Error::InvalidScenario(_))
        ));
        assert!(matches!(
            zzb_exact_1d(&scenario(8, 1, 1, 60.0), 10),
            Err(Error::InvalidArgument(_))
        ));
    }

    #[test]
    fn exact_oracle_converged() {
        let s = scenario(8, 1, 1, 60.0).with_snr(1.0);
        let coarse = zzb_exact_1d(&s, 64).unwrap();
        let fine = zzb_exact_1d(&s, 1024).unwrap();
        assert!((coarse - fine).abs() <= 2e-4 * fine);
    }

    #[test]
    fn closed_form_tracks_exact_oracle_mid_snr() {
        let s = scenario(8, 1, 1, 60.0);
        let samples = PriorSamples::stratified(1, s.prior(), 500, 4).unwrap();
        for db in [-10.0, 0.0, 10.0] {
            let snr = db_to_linear(db);
            let (closed, _) = zzb(&s, snr, &samples, EnergyConvention::PlugIn).unwrap();
            let exact = zzb_exact_1d(&s.with_snr(snr), 64).unwrap();
            let gap = linear_to_db(closed / exact).abs();
            assert!(gap <= 1.5, "{db} dB: gap {gap} dB");
        }
    }

    #[test]
    fn curve_rules() {
        let s = scenario(8, 2, 1, 60.0);
        assert!(bound_curve(&s, &[], 50, 1, EnergyConvention::PlugIn).is_err());
        assert!(bound_curve(&s, &[0.0, 0.0], 50, 1, EnergyConvention::PlugIn).is_err());
        let c = bound_curve(&s, &[-20.0, -5.0, 10.0], 100, 1, EnergyConvention::PlugIn).unwrap();
        assert_eq!(c.len(), 3);
        assert_eq!(c.fingerprint.len(), 64);
        let samples = PriorSamples::stratified(1, s.prior(), 100, 1).unwrap();
        let (v, _) = zzb(&s, db_to_linear(-5.0), &samples, EnergyConvention::PlugIn).unwrap();
        assert_eq!(c.zzb[1], v);
        let single = bound_curve(&s, &[-5.0], 100, 1, EnergyConvention::PlugIn).unwrap();
        assert_eq!(single.zzb[0], v);
        assert_ne!(single.fingerprint, c.fingerprint);
    }

    #[test]
    fn curve_is_nonincreasing() {
        let s = scenario(10, 4, 2, 60.0);
        let grid: Vec<f64> = (-30..=30).map(f64::from).collect();
        let c = bound_curve(&s, &grid, 200, 9, EnergyConvention::PlugIn).unwrap();
        for w in c.zzb.windows(2) {
            assert!(w[1] <= w[0] + 1e-9, "{} then {}", w[0], w[1]);
        }
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(64))]
        #[test]
        fn apb_positive_and_decreasing(k in 1usize..40, zeta in 1e-3f64..3.0) {
            prop_assert!(apb(k, zeta) > 0.0);
            prop_assert!(apb(k + 1, zeta) < apb(k, zeta));
        }

        #[test]
        fn h_tilde_within_cap(q in 1e-8f64..1e8, alpha in 0.0f64..400.0, k in 1usize..10, zeta in 0.1f64..3.0) {
            let (h, capped) = h_tilde(&CrbSummary::from_scalars(q, q), alpha, k, zeta).unwrap();
            let cap = (k as f64).sqrt() * zeta;
            prop_assert!(h >= 0.0 && h <= cap);
            prop_assert_eq!(capped, (q * alpha / k as f64).sqrt() > cap);
        }
    }
}

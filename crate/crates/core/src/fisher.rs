//! Fisher information, per-angle CRB and the prior-averaged expected CRB.

use num_complex::Complex64;
use rand::seq::SliceRandom;
use rand::Rng;
use rayon::prelude::*;

use crate::error::{Error, Result};

use crate::linalg::{one_norm, spd_inverse, trace_of_product, ComplexMatrix, HermitianPd};
use crate::model::{covariance_derivatives, snapshot_covariance, AmplitudeModel, PriorSupport, Scenario};
use crate::seeding;

/// Condition estimates above this mark a CRB as unusable.
pub const MAX_CONDITION: f64 = 1e12;

/// Draws with two targets closer than this are rejected from prior averages.
pub const MIN_SEPARATION_DEG: f64 = 0.1;

/// `J_ij = L·Re tr{R⁻¹ ∂_iR R⁻¹ ∂_jR}`, a K×K real symmetric matrix.
#[derive(Clone, Debug, PartialEq)]
pub struct FisherMatrix {
    dim: usize,
    entries: Vec<f64>,
    thetas: Vec<f64>,
    snapshots: usize,
    imag_residual: f64,
}

impl FisherMatrix {
    /// Wraps precomputed entries (row-major); used for analytic test cases.
    pub fn from_entries(dim: usize, entries: Vec<f64>) -> Result<Self> {
        if entries.len() != dim * dim {
            return Err(Error::DimensionMismatch {
                op: "FisherMatrix::from_entries",
                expected: (dim, dim),
                found: (entries.len(), 1),
            });
        }
        Ok(Self {
            dim,
            entries,
            thetas: Vec::new(),
            snapshots: 0,
            imag_residual: 0.0,
        })
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.entries[i * self.dim + j]
    }

    pub fn entries(&self) -> &[f64] {
        &self.entries
    }

    pub fn thetas(&self) -> &[f64] {
        &self.thetas
    }

    pub fn snapshots(&self) -> usize {
        self.snapshots
    }

    /// Largest `|Im tr(·)| / max(|Re tr(·)|, tiny)` seen while forming entries.
    pub fn imag_residual(&self) -> f64 {
        self.imag_residual
    }

    pub fn trace(&self) -> f64 {
        (0..self.dim).map(|i| self.get(i, i)).sum()
    }

    /// `δᵀ J δ`.
    pub fn quadratic_form(&self, delta: &[f64]) -> f64 {
        assert_eq!(delta.len(), self.dim, "offset length must equal K");
        let mut acc = 0.0;
        for i in 0..self.dim {
            for j in 0..self.dim {
                acc += delta[i] * self.get(i, j) * delta[j];
            }
        }
        acc
    }

    pub fn summary(&self) -> Result<CrbSummary> {
        let inv = spd_inverse(&self.entries, self.dim).ok_or(Error::SingularFisher)?;
        let trace_inv: f64 = (0..self.dim).map(|i| inv[i * self.dim + i]).sum();
        let quad_form: f64 = inv.iter().sum();
        let condition_estimate = one_norm(&self.entries, self.dim) * one_norm(&inv, self.dim);
        let valid = condition_estimate.is_finite()
            && condition_estimate <= MAX_CONDITION
            && trace_inv > 0.0
            && quad_form > 0.0;
        Ok(CrbSummary {
            trace_inv,
            quad_form,
            condition_estimate,
            valid,
            inverse: inv,
        })
    }
}

/// Scalar functionals of `J⁻¹` used by the bounds.
#[derive(Clone, Debug, PartialEq)]
pub struct CrbSummary {
    /// `tr(J⁻¹)`.
    pub trace_inv: f64,
    /// `1ᵀ J⁻¹ 1`.
    pub quad_form: f64,
    /// 1-norm condition number `‖J‖₁‖J⁻¹‖₁`.
    pub condition_estimate: f64,
    pub valid: bool,
    inverse: Vec<f64>,
}

impl CrbSummary {
    /// A summary carrying only averaged scalars (no inverse).
    pub fn from_scalars(trace_inv: f64, quad_form: f64) -> Self {
        Self {
            trace_inv,
            quad_form,
            condition_estimate: 1.0,
            valid: trace_inv > 0.0 && quad_form > 0.0,
            inverse: Vec::new(),
        }
    }

    /// Row-major `J⁻¹`; empty for summaries built from scalars.
    pub fn inverse(&self) -> &[f64] {
        &self.inverse
    }
}

/// FIM under the amplitude-averaged covariance model.
pub fn fisher_matrix(thetas: &[f64], scenario: &Scenario) -> Result<FisherMatrix> {
    fisher_matrix_with(thetas, scenario, AmplitudeModel::Averaged)
}

pub fn fisher_matrix_with(
    thetas: &[f64],
    scenario: &Scenario,
    amplitudes: AmplitudeModel<'_>,
) -> Result<FisherMatrix> {
    match amplitudes {
        AmplitudeModel::Averaged => fisher_matrix_averaged(thetas, scenario),
        AmplitudeModel::Realized(_) => fisher_matrix_dense(thetas, scenario, amplitudes),
    }
}

/// FIM from the full `M×M` derivative matrices; valid for either amplitude
/// model.
pub fn fisher_matrix_dense(
    thetas: &[f64],
    scenario: &Scenario,
    amplitudes: AmplitudeModel<'_>,
) -> Result<FisherMatrix> {
    let r = snapshot_covariance(thetas, scenario, amplitudes)?;
    let derivs = covariance_derivatives(thetas, scenario, amplitudes)?;
    let whitened: Vec<ComplexMatrix> = derivs
        .iter()
        .map(|d| r.solve(d))
        .collect::<Result<_>>()?;
    let k = thetas.len();
    let l = scenario.snapshots() as f64;
    let mut entries = vec![0.0; k * k];
    let mut imag_residual: f64 = 0.0;
    for i in 0..k {
        for j in i..k {
            let (re, im) = trace_of_product(&whitened[i], &whitened[j])?;
            if re.abs() > 0.0 {
                imag_residual = imag_residual.max(im.abs() / re.abs());
            }
            entries[i * k + j] = l * re;
            entries[j * k + i] = l * re;
        }
    }
    Ok(FisherMatrix {
        dim: k,
        entries,
        thetas: thetas.to_vec(),
        snapshots: scenario.snapshots(),
        imag_residual,
    })
}

type Block2 = [[Complex64; 2]; 2];

fn block_product(a: &Block2, b: &Block2) -> Block2 {
    let mut c = [[Complex64::new(0.0, 0.0); 2]; 2];
    for r in 0..2 {
        for col in 0..2 {
            c[r][col] = a[r][0] * b[0][col] + a[r][1] * b[1][col];
        }
    }
    c
}

/// Averaged-model FIM using the rank-2 structure of each derivative:
/// `∂_iR = U_i C_i U_i†` with `U_i = [a_i, ȧ_i]` and
/// `C_i = [[ṗ_i, p_i], [p_i, 0]]`, where `p_i = σ_b² v_iᵀΣv_i*`. Then
/// `tr(R⁻¹∂_iR R⁻¹∂_jR) = tr(C_i Q_ij C_j Q_ji)` with `Q = W†R⁻¹W`,
/// `W = [A, Ȧ]`.
fn fisher_matrix_averaged(thetas: &[f64], scenario: &Scenario) -> Result<FisherMatrix> {
    scenario.check_angles(thetas)?;
    let k = thetas.len();
    let m = scenario.rx_elements();
    let sigma = scenario.tx_covariance();
    let sb = scenario.amplitude_power();
    let mut w = ComplexMatrix::zeros(m, 2 * k);
    let mut power = Vec::with_capacity(k);
    let mut power_rate = Vec::with_capacity(k);
    for (i, &t) in thetas.iter().enumerate() {
        w.set_column(i, &scenario.rx().steering_vector(t));
        w.set_column(k + i, &scenario.rx().steering_vector_derivative(t));
        // vᵀΣv* = u†Σu with u = v*
        let u: Vec<Complex64> = scenario.tx().steering_vector(t).iter().map(|x| x.conj()).collect();
        let du: Vec<Complex64> = scenario
            .tx()
            .steering_vector_derivative(t)
            .iter()
            .map(|x| x.conj())
            .collect();
        let su = sigma.mul_vec(&u)?;
        let p: Complex64 = u.iter().zip(&su).map(|(a, b)| a.conj() * b).sum();
        let dp: Complex64 = du.iter().zip(&su).map(|(a, b)| a.conj() * b).sum();
        power.push(sb * p.re);
        power_rate.push(2.0 * sb * dp.re);
    }
    let mut r = ComplexMatrix::zeros(m, m);
    for i in 0..k {
        let a = w.column(i);
        for row in 0..m {
            for col in 0..m {
                r[(row, col)] += a[row] * a[col].conj() * power[i];
            }
        }
    }
    let r = HermitianPd::new(r.hermitian_part().add_diagonal(scenario.noise_power()))?;
    let q = w.adjoint().matmul(&r.solve(&w)?)?;
    let block = |i: usize, j: usize| -> Block2 {
        [[q[(i, j)], q[(i, k + j)]], [q[(k + i, j)], q[(k + i, k + j)]]]
    };
    let c: Vec<Block2> = (0..k)
        .map(|i| {
            let (p, dp) = (Complex64::new(power[i], 0.0), Complex64::new(power_rate[i], 0.0));
            [[dp, p], [p, Complex64::new(0.0, 0.0)]]
        })
        .collect();
    let l = scenario.snapshots() as f64;
    let mut entries = vec![0.0; k * k];
    let mut imag_residual: f64 = 0.0;
    for i in 0..k {
        for j in i..k {
            let left = block_product(&c[i], &block(i, j));
            let right = block_product(&c[j], &block(j, i));
            let prod = block_product(&left, &right);
            let tr = prod[0][0] + prod[1][1];
            if tr.re.abs() > 0.0 {
                imag_residual = imag_residual.max(tr.im.abs() / tr.re.abs());
            }
            entries[i * k + j] = l * tr.re;
            entries[j * k + i] = l * tr.re;
        }
    }
    Ok(FisherMatrix {
        dim: k,
        entries,
        thetas: thetas.to_vec(),
        snapshots: scenario.snapshots(),
        imag_residual,
    })
}

/// `tr(J⁻¹)`, `1ᵀJ⁻¹1` and the conditioning verdict at fixed angles.
pub fn crb_summary(thetas: &[f64], scenario: &Scenario) -> Result<CrbSummary> {
    fisher_matrix(thetas, scenario)?.summary()
}

/// Angle vectors drawn from the product uniform prior.
///
/// Latin-hypercube stratification: each coordinate's range is cut into
/// `samples` equal-probability strata, each stratum is used exactly once
/// per coordinate, and the strata are paired across coordinates by
/// independent seeded permutations. Draws are sorted ascending. Draws
/// with two targets closer than [`MIN_SEPARATION_DEG`] are dropped and
/// counted.
#[derive(Clone, Debug)]
pub struct PriorSamples {
    draws: Vec<Vec<f64>>,
    requested: usize,
    separation_rejections: usize,
}

impl PriorSamples {
    pub fn stratified(
        num_targets: usize,
        prior: PriorSupport,
        samples: usize,
        seed: u64,
    ) -> Result<Self> {
        if samples == 0 {
            return Err(Error::InvalidArgument("need at least one prior sample".into()));
        }
        if num_targets == 0 {
            return Err(Error::InvalidArgument("need at least one target".into()));
        }
        let strata: Vec<Vec<usize>> = (0..num_targets)
            .map(|d| {
                let mut perm: Vec<usize> = (0..samples).collect();
                let mut rng = seeding::stream(seed, seeding::TAG_PRIOR_PERMUTATION, d as u64);
                perm.shuffle(&mut rng);
                perm
            })
            .collect();
        let min_sep = MIN_SEPARATION_DEG.to_radians();
        let mut draws = Vec::with_capacity(samples);
        let mut separation_rejections = 0;
        for s in 0..samples {
            let mut rng = seeding::stream(seed, seeding::TAG_PRIOR_JITTER, s as u64);
            let mut theta: Vec<f64> = strata
                .iter()
                .map(|perm| {
                    let u = (perm[s] as f64 + rng.random::<f64>()) / samples as f64;
                    prior.min() + u * prior.width()
                })
                .collect();
            theta.sort_by(f64::total_cmp);
            if theta.windows(2).any(|w| w[1] - w[0] < min_sep) {
                separation_rejections += 1;
            } else {
                draws.push(theta);
            }
        }
        Ok(Self {
            draws,
            requested: samples,
            separation_rejections,
        })
    }

    /// A single fixed angle vector (fixed-θ evaluation mode).
    pub fn fixed(thetas: Vec<f64>) -> Self {
        Self {
            draws: vec![thetas],
            requested: 1,
            separation_rejections: 0,
        }
    }

    pub fn draws(&self) -> &[Vec<f64>] {
        &self.draws
    }

    pub fn requested(&self) -> usize {
        self.requested
    }

    pub fn separation_rejections(&self) -> usize {
        self.separation_rejections
    }
}

/// Prior averages of the CRB functionals.
#[derive(Clone, Debug, PartialEq)]
pub struct ExpectedCrb {
    /// `(1/K)·E[tr J⁻¹]`.
    pub value: f64,
    /// `E[tr J⁻¹]`.
    pub mean_trace_inv: f64,
    /// `E[1ᵀ J⁻¹ 1]`.
    pub mean_quad_form: f64,
    pub accepted: usize,
    pub rejected: usize,
    pub rejection_rate: f64,
}

impl ExpectedCrb {
    pub fn summary(&self) -> CrbSummary {
        CrbSummary::from_scalars(self.mean_trace_inv, self.mean_quad_form)
    }
}

/// Expected CRB over `samples` stratified prior draws.
pub fn expected_crb(scenario: &Scenario, samples: usize, seed: u64) -> Result<ExpectedCrb> {
    let draws = PriorSamples::stratified(scenario.num_targets(), scenario.prior(), samples, seed)?;
    expected_crb_over(scenario, &draws)
}

/// Expected CRB over a given sample set; ill-conditioned or singular draws
/// are rejected and counted.
pub fn expected_crb_over(scenario: &Scenario, samples: &PriorSamples) -> Result<ExpectedCrb> {
    let summaries: Vec<Result<CrbSummary>> = samples
        .draws()
        .par_iter()
        .map(|theta| crb_summary(theta, scenario))
        .collect();
    let mut sum_trace = 0.0;
    let mut sum_quad = 0.0;
    let mut accepted = 0usize;
    let mut rejected = samples.separation_rejections();
    for s in summaries {
        match s {
            Ok(s) if s.valid => {
                sum_trace += s.trace_inv;
                sum_quad += s.quad_form;
                accepted += 1;
            }
            Ok(_) | Err(Error::SingularFisher) => rejected += 1,
            Err(e) => return Err(e),
        }
    }
    let total = accepted + rejected;
    if accepted == 0 {
        return Err(Error::AllDrawsRejected { samples: total });
    }
    let mean_trace_inv = sum_trace / accepted as f64;
    Ok(ExpectedCrb {
        value: mean_trace_inv / scenario.num_targets() as f64,
        mean_trace_inv,
        mean_quad_form: sum_quad / accepted as f64,
        accepted,
        rejected,
        rejection_rate: rejected as f64 / total as f64,
    })
}

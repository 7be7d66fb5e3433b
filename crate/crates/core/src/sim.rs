//! Received-data synthesis and a grid-search stochastic-ML estimator for
//! measuring the achieved order-statistic MSE.

use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::linalg::{ComplexMatrix, HermitianPd};
use crate::model::{complex_normal, AmplitudeDraw, Scenario};
use crate::seeding;

/// Default grid step of the estimator, in degrees.
pub const DEFAULT_GRID_STEP_DEG: f64 = 0.2;

const RESTARTS: usize = 8;
const MAX_SWEEPS: usize = 50;

/// One observation `X = A B Vᵀ Φ + Z`.
#[derive(Clone, Debug)]
pub struct SnapshotBlock {
    /// `M×L` received data.
    pub data: ComplexMatrix,
    pub true_thetas: Vec<f64>,
    pub amplitude_draw: AmplitudeDraw,
    pub seed: u64,
}

impl SnapshotBlock {
    /// `Ŝ = XX†/L`.
    pub fn sample_covariance(&self) -> ComplexMatrix {
        let l = self.data.cols() as f64;
        (&self.data * &self.data.adjoint()).scale(1.0 / l).hermitian_part()
    }
}

/// Draws `b ~ CN(0, σ_b² I)`, waveform columns `~ CN(0, Σ)` and noise
/// `~ CN(0, σ_n² I)` from a stream keyed by `seed`.
pub fn synthesize(scenario: &Scenario, thetas: &[f64], seed: u64) -> Result<SnapshotBlock> {
    if thetas.len() != scenario.num_targets() {
        return Err(Error::DimensionMismatch {
            op: "synthesize",
            expected: (scenario.num_targets(), 1),
            found: (thetas.len(), 1),
        });
    }
    if thetas.windows(2).any(|w| w[1] < w[0]) {
        return Err(Error::InvalidArgument("true angles must be sorted ascending".into()));
    }
    if let Some(t) = thetas.iter().find(|t| !scenario.prior().contains(**t)) {
        return Err(Error::InvalidArgument(format!("angle {t} rad outside the prior support")));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let k = thetas.len();
    let m = scenario.rx_elements();
    let n = scenario.tx_elements();
    let l = scenario.snapshots();
    let b = AmplitudeDraw::circular_gaussian(k, scenario.amplitude_power(), &mut rng);
    let a = scenario.rx().steering_matrix(thetas);
    let v = scenario.tx().steering_matrix(thetas);
    let h = a.matmul(&b.diag())?.matmul(&v.transpose())?;
    let w = ComplexMatrix::from_fn(n, l, |_, _| complex_normal(&mut rng));
    let phi = scenario
        .tx_shape_factor()
        .matmul(&w)?
        .scale(scenario.signal_power().sqrt());
    let noise_sd = scenario.noise_power().sqrt();
    let z = ComplexMatrix::from_fn(m, l, |_, _| complex_normal(&mut rng) * noise_sd);
    let data = h.matmul(&phi)?.try_add(&z)?;
    Ok(SnapshotBlock {
        data,
        true_thetas: thetas.to_vec(),
        amplitude_draw: b,
        seed,
    })
}

/// Estimator output for one block.
#[derive(Clone, Debug, PartialEq)]
pub struct TrialResult {
    pub estimated_thetas: Vec<f64>,
    pub true_thetas: Vec<f64>,
    /// `(θ̂_(k) − θ_(k))²` per target.
    pub squared_error: Vec<f64>,
    /// `−L[ln|R̄(θ̂)| + tr(R̄(θ̂)⁻¹Ŝ)]`.
    pub log_likelihood: f64,
}

impl TrialResult {
    /// `(1/K) Σ_k (θ̂_(k) − θ_(k))²`.
    pub fn mean_squared_error(&self) -> f64 {
        self.squared_error.iter().sum::<f64>() / self.squared_error.len() as f64
    }
}

/// Per-block quantities shared by every objective evaluation.
struct BlockStats {
    s_hat: ComplexMatrix,
    trace_s: f64,
    /// `Ŝ a(θ_g)` for every grid point.
    s_steer: Vec<Vec<Complex64>>,
    /// `a(θ_g)† Ŝ a(θ_g)`.
    quad: Vec<f64>,
}

fn dot(u: &[Complex64], v: &[Complex64]) -> Complex64 {
    u.iter().zip(v).map(|(a, b)| a.conj() * b).sum()
}

/// Stochastic-ML grid search under the amplitude-averaged covariance
/// `R̄(θ) = Σ_k p(θ_k) a(θ_k)a(θ_k)† + σ_n² I`, `p(θ) = σ_b² vᵀΣv*`.
///
/// K ≤ 2 scans the sorted grid exhaustively; K ≥ 3 runs coordinate-wise
/// ascent from [`RESTARTS`] random sorted starts. The best point is refined
/// per coordinate by a parabola through it and its two neighbours.
#[derive(Clone, Debug)]
pub struct SmlEstimator {
    scenario: Scenario,
    grid: Vec<f64>,
    step: f64,
    steering: Vec<Vec<Complex64>>,
    power: Vec<f64>,
}

impl SmlEstimator {
    pub fn new(scenario: &Scenario, grid_step: f64) -> Result<Self> {
        let prior = scenario.prior();
        let limit = prior.width() / 10.0;
        if !(grid_step > 0.0) || !grid_step.is_finite() {
            return Err(Error::InvalidArgument(format!("grid step must be positive, got {grid_step}")));
        }
        if grid_step > limit {
            return Err(Error::GridTooCoarse {
                step: grid_step,
                limit,
            });
        }
        let intervals = (prior.width() / grid_step).ceil() as usize;
        let step = prior.width() / intervals as f64;
        let grid: Vec<f64> = (0..=intervals).map(|i| prior.min() + i as f64 * step).collect();
        let steering = grid.iter().map(|t| scenario.rx().steering_vector(*t)).collect();
        let power = grid.iter().map(|t| source_power(scenario, *t)).collect();
        Ok(Self {
            scenario: scenario.clone(),
            grid,
            step,
            steering,
            power,
        })
    }

    pub fn grid(&self) -> &[f64] {
        &self.grid
    }

    pub fn step(&self) -> f64 {
        self.step
    }

    fn block_stats(&self, block: &SnapshotBlock) -> BlockStats {
        let s_hat = block.sample_covariance();
        let trace_s = s_hat.trace().re;
        let s_steer: Vec<Vec<Complex64>> = self
            .steering
            .iter()
            .map(|a| s_hat.mul_vec(a).expect("steering length matches M"))
            .collect();
        let quad = self
            .steering
            .iter()
            .zip(&s_steer)
            .map(|(a, y)| dot(a, y).re)
            .collect();
        BlockStats {
            s_hat,
            trace_s,
            s_steer,
            quad,
        }
    }

    fn finish(&self, k: usize, ln_det_t: f64, trace_term: f64, trace_s: f64) -> f64 {
        let sn = self.scenario.noise_power();
        let m = self.scenario.rx_elements() as f64;
        let l = self.scenario.snapshots() as f64;
        let ln_det_r = (m - k as f64) * sn.ln() + ln_det_t;
        let tr_r_inv_s = (trace_s - trace_term) / sn;
        -l * (ln_det_r + tr_r_inv_s)
    }

    fn objective_single(&self, g: usize, stats: &BlockStats) -> f64 {
        let sn = self.scenario.noise_power();
        let p = self.power[g];
        let m = self.scenario.rx_elements() as f64;
        let t = sn + p * m;
        self.finish(1, t.ln(), p * stats.quad[g] / t, stats.trace_s)
    }

    fn objective_pair(&self, i: usize, j: usize, stats: &BlockStats) -> f64 {
        let sn = self.scenario.noise_power();
        let (pi, pj) = (self.power[i], self.power[j]);
        let cross = (pi * pj).sqrt();
        let (ai, aj) = (&self.steering[i], &self.steering[j]);
        let t11 = sn + pi * dot(ai, ai).re;
        let t22 = sn + pj * dot(aj, aj).re;
        let t12 = dot(ai, aj) * cross;
        let w11 = pi * stats.quad[i];
        let w22 = pj * stats.quad[j];
        let w12 = dot(ai, &stats.s_steer[j]) * cross;
        let det = t11 * t22 - t12.norm_sqr();
        let trace_term = (t22 * w11 + t11 * w22 - 2.0 * (t12 * w12.conj()).re) / det;
        self.finish(2, det.ln(), trace_term, stats.trace_s)
    }

    fn objective_general(
        &self,
        steering: &[Vec<Complex64>],
        powers: &[f64],
        stats: &BlockStats,
    ) -> Result<f64> {
        let k = steering.len();
        let sn = self.scenario.noise_power();
        let scaled: Vec<Vec<Complex64>> = steering
            .iter()
            .zip(powers)
            .map(|(a, p)| a.iter().map(|x| x * p.sqrt()).collect())
            .collect();
        let projected: Vec<Vec<Complex64>> = scaled
            .iter()
            .map(|a| stats.s_hat.mul_vec(a))
            .collect::<Result<_>>()?;
        let mut t = ComplexMatrix::from_fn(k, k, |r, c| dot(&scaled[r], &scaled[c]));
        t = t.add_diagonal(sn).hermitian_part();
        let w = ComplexMatrix::from_fn(k, k, |r, c| dot(&scaled[r], &projected[c]));
        let t = HermitianPd::new(t)?;
        let trace_term = t.solve(&w)?.trace().re;
        Ok(self.finish(k, t.logdet(), trace_term, stats.trace_s))
    }

    fn objective_indices(&self, idx: &[usize], stats: &BlockStats) -> Result<f64> {
        let steering: Vec<Vec<Complex64>> = idx.iter().map(|g| self.steering[*g].clone()).collect();
        let powers: Vec<f64> = idx.iter().map(|g| self.power[*g]).collect();
        self.objective_general(&steering, &powers, stats)
    }

    fn objective_angles(&self, thetas: &[f64], stats: &BlockStats) -> Result<f64> {
        let steering: Vec<Vec<Complex64>> = thetas
            .iter()
            .map(|t| self.scenario.rx().steering_vector(*t))
            .collect();
        let powers: Vec<f64> = thetas.iter().map(|t| source_power(&self.scenario, *t)).collect();
        self.objective_general(&steering, &powers, stats)
    }

    /// Log-likelihood at grid indices, for checks against a direct evaluation.
    pub fn grid_objective(&self, block: &SnapshotBlock, idx: &[usize]) -> Result<f64> {
        let stats = self.block_stats(block);
        match idx {
            [g] => Ok(self.objective_single(*g, &stats)),
            [i, j] => Ok(self.objective_pair(*i, *j, &stats)),
            _ => self.objective_indices(idx, &stats),
        }
    }

    fn search_single(&self, stats: &BlockStats) -> Vec<usize> {
        let mut best = (0, f64::NEG_INFINITY);
        for g in 0..self.grid.len() {
            let f = self.objective_single(g, stats);
            // strict improvement keeps the smaller angle on ties
            if f > best.1 {
                best = (g, f);
            }
        }
        vec![best.0]
    }

    fn search_pair(&self, stats: &BlockStats) -> Vec<usize> {
        let g = self.grid.len();
        let rows: Vec<(usize, usize, f64)> = (0..g)
            .into_par_iter()
            .map(|i| {
                let mut best = (i, i + 1, f64::NEG_INFINITY);
                for j in i + 1..g {
                    let f = self.objective_pair(i, j, stats);
                    if f > best.2 {
                        best = (i, j, f);
                    }
                }
                best
            })
            .collect();
        let mut best = rows[0];
        for r in &rows[1..] {
            if r.2 > best.2 {
                best = *r;
            }
        }
        vec![best.0, best.1]
    }

    fn search_coordinate(&self, stats: &BlockStats, seed: u64) -> Result<Vec<usize>> {
        let k = self.scenario.num_targets();
        let g = self.grid.len();
        let mut overall: Option<(Vec<usize>, f64)> = None;
        for r in 0..RESTARTS {
            let mut rng = seeding::stream(seed, seeding::TAG_RESTART, r as u64);
            let mut idx: Vec<usize> = (0..k).map(|_| rng.random_range(0..g)).collect();
            idx.sort_unstable();
            let mut current = self.objective_indices(&idx, stats)?;
            for _ in 0..MAX_SWEEPS {
                let mut moved = false;
                for c in 0..k {
                    let mut best = (idx[c], current);
                    for cand in 0..g {
                        if cand == idx[c] || idx.iter().enumerate().any(|(o, v)| o != c && *v == cand) {
                            continue;
                        }
                        let mut trial = idx.clone();
                        trial[c] = cand;
                        let f = self.objective_indices(&trial, stats)?;
                        if f > best.1 {
                            best = (cand, f);
                        }
                    }
                    if best.0 != idx[c] {
                        idx[c] = best.0;
                        current = best.1;
                        moved = true;
                    }
                }
                if !moved {
                    break;
                }
            }
            idx.sort_unstable();
            if overall.as_ref().is_none_or(|o| current > o.1) {
                overall = Some((idx, current));
            }
        }
        Ok(overall.expect("at least one restart").0)
    }

    fn refine(&self, idx: &[usize], stats: &BlockStats) -> Result<Vec<f64>> {
        let prior = self.scenario.prior();
        let mut thetas: Vec<f64> = idx.iter().map(|g| self.grid[*g]).collect();
        for c in 0..thetas.len() {
            let centre = thetas[c];
            let (lo, hi) = (centre - self.step, centre + self.step);
            if !prior.contains(lo) || !prior.contains(hi) {
                continue;
            }
            let at = |x: f64| {
                let mut t = thetas.clone();
                t[c] = x;
                self.objective_angles(&t, stats)
            };
            let (f_lo, f_mid, f_hi) = (at(lo)?, at(centre)?, at(hi)?);
            let curvature = f_lo - 2.0 * f_mid + f_hi;
            if curvature < 0.0 && f_mid >= f_lo && f_mid >= f_hi {
                let offset = 0.5 * (f_lo - f_hi) / curvature;
                thetas[c] = centre + offset.clamp(-0.5, 0.5) * self.step;
            }
        }
        thetas.sort_by(f64::total_cmp);
        Ok(thetas)
    }

    pub fn estimate(&self, block: &SnapshotBlock) -> Result<TrialResult> {
        let k = self.scenario.num_targets();
        if block.true_thetas.len() != k || block.data.rows() != self.scenario.rx_elements() {
            return Err(Error::DimensionMismatch {
                op: "ml_estimate",
                expected: (self.scenario.rx_elements(), k),
                found: (block.data.rows(), block.true_thetas.len()),
            });
        }
        let stats = self.block_stats(block);
        let idx = match k {
            1 => self.search_single(&stats),
            2 => self.search_pair(&stats),
            _ => self.search_coordinate(&stats, block.seed)?,
        };
        let estimated = self.refine(&idx, &stats)?;
        let log_likelihood = self.objective_angles(&estimated, &stats)?;
        let squared_error = estimated
            .iter()
            .zip(&block.true_thetas)
            .map(|(e, t)| (e - t).powi(2))
            .collect();
        Ok(TrialResult {
            estimated_thetas: estimated,
            true_thetas: block.true_thetas.clone(),
            squared_error,
            log_likelihood,
        })
    }
}

fn source_power(scenario: &Scenario, theta: f64) -> f64 {
    let v = scenario.tx().steering_vector(theta);
    let sigma = scenario.tx_covariance();
    let conj: Vec<Complex64> = v.iter().map(|x| x.conj()).collect();
    // vᵀ Σ v* = (v*)† Σ (v*)
    let sv = sigma.mul_vec(&conj).expect("transmit dimensions match");
    scenario.amplitude_power() * dot(&conj, &sv).re
}

/// Grid-search SML estimate for one block.
pub fn ml_estimate(block: &SnapshotBlock, scenario: &Scenario, grid_step: f64) -> Result<TrialResult> {
    SmlEstimator::new(scenario, grid_step)?.estimate(block)
}

/// Monte Carlo MSE with its standard error.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct MseEstimate {
    pub mse: f64,
    pub stderr: f64,
    pub trials: usize,
}

fn pairwise_sum(values: &[f64]) -> f64 {
    if values.len() <= 8 {
        values.iter().sum()
    } else {
        let (a, b) = values.split_at(values.len() / 2);
        pairwise_sum(a) + pairwise_sum(b)
    }
}

/// Sorted i.i.d. uniform prior draw.
pub fn draw_sorted_angles(scenario: &Scenario, rng: &mut impl Rng) -> Vec<f64> {
    let prior = scenario.prior();
    let mut t: Vec<f64> = (0..scenario.num_targets())
        .map(|_| prior.min() + rng.random::<f64>() * prior.width())
        .collect();
    t.sort_by(f64::total_cmp);
    t
}

/// Runs `trials` independent trials at linear SNR `snr`.
pub fn simulate_trials(
    scenario: &Scenario,
    snr: f64,
    trials: usize,
    grid_step: f64,
    seed: u64,
) -> Result<Vec<TrialResult>> {
    let scen = scenario.with_snr(snr);
    let estimator = SmlEstimator::new(&scen, grid_step)?;
    (0..trials)
        .into_par_iter()
        .map(|i| {
            let mut rng = seeding::stream(seed, seeding::TAG_TRIAL, i as u64);
            let thetas = draw_sorted_angles(&scen, &mut rng);
            let block = synthesize(&scen, &thetas, seeding::derive_seed(seed, seeding::TAG_AMPLITUDE, i as u64))?;
            estimator.estimate(&block)
        })
        .collect()
}

/// `(1/K)Σ_k E[(θ̂_(k) − θ_(k))²]` over `trials ≥ 10` trials.
pub fn simulate_mse(
    scenario: &Scenario,
    snr: f64,
    trials: usize,
    grid_step: f64,
    seed: u64,
) -> Result<MseEstimate> {
    if trials < 10 {
        return Err(Error::InvalidArgument(format!("need at least 10 trials, got {trials}")));
    }
    let results = simulate_trials(scenario, snr, trials, grid_step, seed)?;
    let errors: Vec<f64> = results.iter().map(TrialResult::mean_squared_error).collect();
    let n = trials as f64;
    let mse = pairwise_sum(&errors) / n;
    let dev: Vec<f64> = errors.iter().map(|e| (e - mse).powi(2)).collect();
    let variance = pairwise_sum(&dev) / (n - 1.0);
    Ok(MseEstimate {
        mse,
        stderr: (variance / n).sqrt(),
        trials,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fisher::{expected_crb, fisher_matrix_with};
    use crate::model::{mean_snapshot_covariance, AmplitudeModel, ArrayGeometry, PriorSupport};
    use crate::zzb::apb;

    fn scenario(m: usize, n: usize, k: usize, snr: f64) -> Scenario {
        Scenario::new(
            ArrayGeometry::half_wavelength_ula(m, 1.0).unwrap(),
            ArrayGeometry::half_wavelength_ula(n, 1.0).unwrap(),
            k,
            40,
            1.0,
            snr,
            0.5,
            PriorSupport::from_degrees(-60.0, 60.0).unwrap(),
        )
        .unwrap()
    }

    fn step() -> f64 {
        DEFAULT_GRID_STEP_DEG.to_radians()
    }

    #[test]
    fn noise_only_block() {
        let s = scenario(4, 2, 1, 0.0).with_amplitude_power(0.0).with_snapshots(20_000);
        let block = synthesize(&s, &[0.2], 7).unwrap();
        let cov = block.sample_covariance();
        // each entry of a 20000-snapshot sample covariance has sd ≈ 0.007
        let err = cov.add_diagonal(-1.0).max_abs();
        assert!(err < 0.04, "{err}");
    }

    #[test]
    fn synthesis_is_deterministic() {
        let s = scenario(4, 3, 2, 1.0);
        let a = synthesize(&s, &[-0.2, 0.4], 11).unwrap();
        let b = synthesize(&s, &[-0.2, 0.4], 11).unwrap();
        assert_eq!(a.data, b.data);
        let c = synthesize(&s, &[-0.2, 0.4], 12).unwrap();
        assert_ne!(a.data, c.data);
        assert!(synthesize(&s, &[0.4, -0.2], 11).is_err());
        assert!(synthesize(&s, &[0.4, 1.4], 11).is_err());
    }

    #[test]
    fn sample_covariance_matches_mean_covariance() {
        // fresh amplitudes per block, so the pooled moment is the b-average
        let s = scenario(3, 2, 1, 1.0).with_snapshots(100);
        let theta = [0.3];
        let blocks = 1000;
        let m = 3;
        let mut sum = vec![Complex64::new(0.0, 0.0); m * m];
        let mut sum_sq_re = vec![0.0; m * m];
        let mut sum_sq_im = vec![0.0; m * m];
        for i in 0..blocks {
            let c = synthesize(&s, &theta, 1000 + i).unwrap().sample_covariance();
            for (e, v) in c.as_slice().iter().enumerate() {
                sum[e] += v;
                sum_sq_re[e] += v.re * v.re;
                sum_sq_im[e] += v.im * v.im;
            }
        }
        let want = mean_snapshot_covariance(&theta, &s).unwrap();
        let n = blocks as f64;
        for e in 0..m * m {
            let mean = sum[e] / n;
            let se_re = ((sum_sq_re[e] / n - mean.re * mean.re) / n).sqrt();
            let se_im = ((sum_sq_im[e] / n - mean.im * mean.im) / n).sqrt();
            let w = want.matrix().as_slice()[e];
            assert!((mean.re - w.re).abs() <= 3.0 * se_re + 1e-12, "entry {e} re");
            assert!((mean.im - w.im).abs() <= 3.0 * se_im + 1e-12, "entry {e} im");
        }
    }

    #[test]
    fn grid_too_coarse() {
        let s = scenario(4, 2, 1, 1.0);
        let zeta = s.prior().width();
        assert!(matches!(SmlEstimator::new(&s, zeta / 5.0), Err(Error::GridTooCoarse { .. })));
        assert!(SmlEstimator::new(&s, zeta / 10.0).is_ok());
    }

    #[test]
    fn grid_objective_matches_direct_formula() {
        let s = scenario(6, 3, 1, 2.0);
        let est = SmlEstimator::new(&s, step()).unwrap();
        let block = synthesize(&s, &[0.1], 3).unwrap();
        let s_hat = block.sample_covariance();
        let mut rng = seeding::stream(4, 0, 0);
        for _ in 0..5 {
            let g = rng.random_range(0..est.grid().len());
            let r = mean_snapshot_covariance(&[est.grid()[g]], &s).unwrap();
            let direct = -(s.snapshots() as f64)
                * (r.logdet() + r.solve(&s_hat).unwrap().trace().re);
            let ours = est.grid_objective(&block, &[g]).unwrap();
            assert!((ours - direct).abs() <= 1e-9 * direct.abs(), "{ours} vs {direct}");
        }
    }

    #[test]
    fn pair_objective_matches_direct_formula() {
        let s = scenario(6, 3, 2, 2.0);
        let est = SmlEstimator::new(&s, step()).unwrap();
        let block = synthesize(&s, &[-0.3, 0.5], 5).unwrap();
        let s_hat = block.sample_covariance();
        for (i, j) in [(10, 300), (0, 1), (200, 550)] {
            let r = mean_snapshot_covariance(&[est.grid()[i], est.grid()[j]], &s).unwrap();
            let direct = -(s.snapshots() as f64)
                * (r.logdet() + r.solve(&s_hat).unwrap().trace().re);
            let pair = est.grid_objective(&block, &[i, j]).unwrap();
            let general = est.objective_indices(&[i, j], &est.block_stats(&block)).unwrap();
            assert!((pair - direct).abs() <= 1e-9 * direct.abs());
            assert!((general - direct).abs() <= 1e-9 * direct.abs());
        }
    }

    #[test]
    fn ties_break_toward_smaller_angle() {
        // zero signal power: flat objective, first grid point wins
        let s = scenario(4, 2, 1, 0.0);
        let block = synthesize(&s, &[0.3], 9).unwrap();
        let r = ml_estimate(&block, &s, step()).unwrap();
        assert_eq!(r.estimated_thetas[0], s.prior().min());
    }

    #[test]
    fn distinct_values_around_truth() {
        let s = scenario(8, 4, 1, 1.0);
        let est = SmlEstimator::new(&s, step()).unwrap();
        let block = synthesize(&s, &[0.25], 13).unwrap();
        let g = est.grid().iter().position(|t| *t >= 0.25).unwrap();
        let vals: Vec<f64> = (g - 2..=g + 2)
            .map(|i| est.grid_objective(&block, &[i]).unwrap())
            .collect();
        for w in vals.windows(2) {
            assert_ne!(w[0], w[1]);
        }
    }

    #[test]
    fn noiseless_single_target_is_consistent() {
        let s = scenario(8, 4, 1, 1e6);
        let results = simulate_trials(&s, 1e6, 200, step(), 21).unwrap();
        let good = results
            .iter()
            .filter(|r| (r.estimated_thetas[0] - r.true_thetas[0]).abs() < 2.0 * step())
            .count();
        assert!(good >= 198, "{good}/200");
    }

    #[test]
    fn results_are_sorted() {
        let s = scenario(8, 4, 2, 3.0);
        for r in simulate_trials(&s, 3.0, 12, 0.5f64.to_radians(), 2).unwrap() {
            assert!(r.estimated_thetas.windows(2).all(|w| w[0] <= w[1]));
            assert!(r.true_thetas.windows(2).all(|w| w[0] <= w[1]));
            assert!(r.squared_error.iter().all(|e| *e >= 0.0));
        }
    }

    #[test]
    fn three_targets_use_coordinate_ascent() {
        let s = scenario(10, 4, 3, 100.0);
        let block = synthesize(&s, &[-0.6, 0.0, 0.5], 8).unwrap();
        let r = ml_estimate(&block, &s, 0.5f64.to_radians()).unwrap();
        for (e, t) in r.estimated_thetas.iter().zip(&r.true_thetas) {
            assert!((e - t).abs() < 0.05, "{:?}", r.estimated_thetas);
        }
    }

    #[test]
    fn zero_snr_mse_above_apb() {
        let s = scenario(8, 4, 1, 0.0);
        let est = simulate_mse(&s, 0.0, 200, step(), 4).unwrap();
        let a = apb(1, s.prior().width());
        assert!(est.mse + 2.0 * est.stderr >= a);
    }

    #[test]
    fn high_snr_mse_near_crb() {
        // b is fixed within a block, so the attainable bound is the CRB of the
        // conditional model at the realized (θ, b). Its prior average is
        // dominated by rare small |b|, so each trial's error is normalized by
        // its own CRB; an efficient estimator gives a mean ratio of 1.
        let s = scenario(8, 4, 1, 100.0);
        let (trials, seed) = (200, 6);
        let results = simulate_trials(&s, 100.0, trials, 0.05f64.to_radians(), seed).unwrap();
        let mut ratio = 0.0;
        for (i, r) in results.iter().enumerate() {
            let i = i as u64;
            let mut rng = seeding::stream(seed, seeding::TAG_TRIAL, i);
            let thetas = draw_sorted_angles(&s, &mut rng);
            assert_eq!(thetas, r.true_thetas);
            let block =
                synthesize(&s, &thetas, seeding::derive_seed(seed, seeding::TAG_AMPLITUDE, i)).unwrap();
            let j = fisher_matrix_with(&thetas, &s, AmplitudeModel::Realized(&block.amplitude_draw))
                .unwrap();
            ratio += r.mean_squared_error() / j.summary().unwrap().trace_inv / trials as f64;
        }
        assert!((1.0 / 3.0..=3.0).contains(&ratio), "normalized error {ratio}");
        let mse = simulate_mse(&s, 100.0, trials, 0.05f64.to_radians(), seed).unwrap().mse;
        assert!(mse > expected_crb(&s, 2000, seed).unwrap().value);
    }

    #[test]
    fn mse_is_deterministic_across_thread_counts() {
        let s = scenario(6, 2, 1, 1.0);
        let run = |threads| {
            rayon::ThreadPoolBuilder::new()
                .num_threads(threads)
                .build()
                .unwrap()
                .install(|| simulate_mse(&s, 1.0, 40, step(), 77).unwrap())
        };
        let a = run(1);
        let b = run(4);
        assert_eq!(a.mse.to_bits(), b.mse.to_bits());
        assert_eq!(a.stderr.to_bits(), b.stderr.to_bits());
    }

    #[test]
    fn too_few_trials() {
        let s = scenario(4, 2, 1, 1.0);
        assert!(simulate_mse(&s, 1.0, 9, step(), 0).is_err());
    }
}

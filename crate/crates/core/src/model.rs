//! Co-located MIMO radar signal model.
//!
//! A snapshot is `x = A(θ) B Vᵀ(θ) φ + z` with receive steering `A` (M×K),
//! transmit steering `V` (N×K), target reflection coefficients
//! `B = diag(b)`, transmitted waveform `φ ~ CN(0, Σ)` and white noise
//! `z ~ CN(0, σ_n² I)`. Its covariance is
//! `R = A B VᵀΣV* B† A† + σ_n² I`.
//!
//! Receive positions drive `∂A/∂θ`; transmit positions drive `∂V/∂θ`.

use std::f64::consts::{FRAC_PI_2, PI};

use num_complex::Complex64;
use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::{ComplexMatrix, HermitianPd};

/// Element positions (meters) and carrier wavelength of a linear array.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ArrayGeometry {
    positions: Vec<f64>,
    wavelength: f64,
}

impl ArrayGeometry {
    pub fn new(positions: Vec<f64>, wavelength: f64) -> Result<Self> {
        if !(wavelength > 0.0) || !wavelength.is_finite() {
            return Err(Error::InvalidScenario(format!(
                "wavelength must be positive, got {wavelength}"
            )));
        }
        if positions.is_empty() {
            return Err(Error::InvalidScenario("array has no elements".into()));
        }
        if positions.iter().any(|p| !p.is_finite()) {
            return Err(Error::NonFinite("ArrayGeometry::new"));
        }
        if positions.windows(2).any(|w| w[1] <= w[0]) {
            return Err(Error::InvalidScenario(
                "element positions must be strictly increasing".into(),
            ));
        }
        Ok(Self {
            positions,
            wavelength,
        })
    }

    /// Uniform linear array with `(m−1)·λ/2` spacing.
    pub fn half_wavelength_ula(n: usize, wavelength: f64) -> Result<Self> {
        Self::new(
            (0..n).map(|m| m as f64 * wavelength / 2.0).collect(),
            wavelength,
        )
    }

    pub fn len(&self) -> usize {
        self.positions.len()
    }

    pub fn is_empty(&self) -> bool {
        self.positions.is_empty()
    }

    pub fn positions(&self) -> &[f64] {
        &self.positions
    }

    pub fn wavelength(&self) -> f64 {
        self.wavelength
    }

    fn wavenumber(&self) -> f64 {
        2.0 * PI / self.wavelength
    }

    /// `[e^{−j(2π/λ) d_m sin θ}]_m`.
    pub fn steering_vector(&self, theta: f64) -> Vec<Complex64> {
        let k = self.wavenumber() * theta.sin();
        self.positions
            .iter()
            .map(|d| Complex64::from_polar(1.0, -k * d))
            .collect()
    }

    /// `d a(θ)/dθ = −j(2π cos θ/λ) D a(θ)`.
    pub fn steering_vector_derivative(&self, theta: f64) -> Vec<Complex64> {
        let scale = Complex64::new(0.0, -self.wavenumber() * theta.cos());
        self.steering_vector(theta)
            .into_iter()
            .zip(&self.positions)
            .map(|(a, d)| scale * *d * a)
            .collect()
    }

    /// Columns `a(θ_1), …, a(θ_K)`.
    pub fn steering_matrix(&self, thetas: &[f64]) -> ComplexMatrix {
        let mut m = ComplexMatrix::zeros(self.len(), thetas.len());
        for (k, &t) in thetas.iter().enumerate() {
            m.set_column(k, &self.steering_vector(t));
        }
        m
    }

    /// `∂A/∂θ_i`, which is zero outside column `i` (zero-based).
    pub fn steering_derivative(&self, thetas: &[f64], i: usize) -> Result<ComplexMatrix> {
        if i >= thetas.len() {
            return Err(Error::IndexOutOfRange {
                index: i,
                count: thetas.len(),
            });
        }
        let mut m = ComplexMatrix::zeros(self.len(), thetas.len());
        m.set_column(i, &self.steering_vector_derivative(thetas[i]));
        Ok(m)
    }
}

/// Closed interval of admissible DoAs in radians, strictly inside (−π/2, π/2).
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct PriorSupport {
    min: f64,
    max: f64,
}

impl PriorSupport {
    pub fn new(min: f64, max: f64) -> Result<Self> {
        if !(min.is_finite() && max.is_finite()) {
            return Err(Error::NonFinite("PriorSupport::new"));
        }
        if max <= min {
            return Err(Error::InvalidScenario(format!(
                "prior support [{min}, {max}] is empty"
            )));
        }
        if min <= -FRAC_PI_2 || max >= FRAC_PI_2 {
            return Err(Error::InvalidScenario(format!(
                "prior support [{min}, {max}] reaches endfire"
            )));
        }
        Ok(Self { min, max })
    }

    pub fn from_degrees(min_deg: f64, max_deg: f64) -> Result<Self> {
        Self::new(min_deg.to_radians(), max_deg.to_radians())
    }

    pub fn min(&self) -> f64 {
        self.min
    }

    pub fn max(&self) -> f64 {
        self.max
    }

    /// `ζ = ϑ_max − ϑ_min`.
    pub fn width(&self) -> f64 {
        self.max - self.min
    }

    pub fn contains(&self, theta: f64) -> bool {
        (self.min..=self.max).contains(&theta)
    }
}

/// Target reflection coefficients `b_1 … b_K` for one observation.
#[derive(Clone, Debug, PartialEq)]
pub struct AmplitudeDraw {
    values: Vec<Complex64>,
}

impl AmplitudeDraw {
    pub fn new(values: Vec<Complex64>) -> Self {
        Self { values }
    }

    /// All amplitudes equal to `√power` (a deterministic stand-in for a draw).
    pub fn constant(count: usize, power: f64) -> Self {
        Self::new(vec![Complex64::new(power.sqrt(), 0.0); count])
    }

    /// i.i.d. `CN(0, power)` amplitudes.
    pub fn circular_gaussian(count: usize, power: f64, rng: &mut impl Rng) -> Self {
        Self::new(
            (0..count)
                .map(|_| complex_normal(rng) * power.sqrt())
                .collect(),
        )
    }

    pub fn values(&self) -> &[Complex64] {
        &self.values
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    /// `B = diag(b)`.
    pub fn diag(&self) -> ComplexMatrix {
        ComplexMatrix::from_diag(&self.values)
    }

    /// `‖B‖_F² = Σ|b_k|²`.
    pub fn frobenius_sq(&self) -> f64 {
        self.values.iter().map(|b| b.norm_sqr()).sum()
    }
}

/// One `CN(0, 1)` sample.
pub fn complex_normal(rng: &mut impl Rng) -> Complex64 {
    let re: f64 = rng.sample(StandardNormal);
    let im: f64 = rng.sample(StandardNormal);
    Complex64::new(re, im) * std::f64::consts::FRAC_1_SQRT_2
}

/// Which amplitude statistics the covariance is built from.
#[derive(Clone, Copy, Debug)]
pub enum AmplitudeModel<'a> {
    /// `E_b[B(·)B†]` with `E|b_k|² = σ_b²`, independent zero-mean targets.
    Averaged,
    /// A realized draw of `b`.
    Realized(&'a AmplitudeDraw),
}

/// A complete problem instance.
///
/// The transmit covariance is `Σ = σ_s² Σ₀` where the shape `Σ₀` is
/// normalized to unit average diagonal, so `σ_s²/σ_n²` is the SNR.
#[derive(Clone, Debug)]
pub struct Scenario {
    rx: ArrayGeometry,
    tx: ArrayGeometry,
    num_targets: usize,
    snapshots: usize,
    noise_power: f64,
    signal_power: f64,
    tx_shape: HermitianPd,
    tx_shape_factor: ComplexMatrix,
    amplitude_power: f64,
    prior: PriorSupport,
}

impl Scenario {
    /// Builds a scenario with `Σ₀ = I_N`.
    #[allow(clippy::too_many_arguments)]
    pub fn new(
        rx: ArrayGeometry,
        tx: ArrayGeometry,
        num_targets: usize,
        snapshots: usize,
        noise_power: f64,
        signal_power: f64,
        amplitude_power: f64,
        prior: PriorSupport,
    ) -> Result<Self> {
        let n = tx.len();
        Self::with_tx_shape(
            rx,
            tx,
            num_targets,
            snapshots,
            noise_power,
            signal_power,
            amplitude_power,
            prior,
            ComplexMatrix::identity(n),
        )
    }

    #[allow(clippy::too_many_arguments)]
    pub fn with_tx_shape(
        rx: ArrayGeometry,
        tx: ArrayGeometry,
        num_targets: usize,
        snapshots: usize,
        noise_power: f64,
        signal_power: f64,
        amplitude_power: f64,
        prior: PriorSupport,
        tx_shape: ComplexMatrix,
    ) -> Result<Self> {
        if num_targets == 0 {
            return Err(Error::InvalidScenario("need at least one target".into()));
        }
        if snapshots == 0 {
            return Err(Error::InvalidScenario("need at least one snapshot".into()));
        }
        if !(noise_power > 0.0) || !noise_power.is_finite() {
            return Err(Error::InvalidScenario(format!(
                "noise power must be positive, got {noise_power}"
            )));
        }
        if !(signal_power >= 0.0) || !signal_power.is_finite() {
            return Err(Error::InvalidScenario(format!(
                "signal power must be nonnegative, got {signal_power}"
            )));
        }
        if !(amplitude_power >= 0.0) || !amplitude_power.is_finite() {
            return Err(Error::InvalidScenario(format!(
                "amplitude second moment must be nonnegative, got {amplitude_power}"
            )));
        }
        if tx_shape.rows() != tx.len() || !tx_shape.is_square() {
            return Err(Error::DimensionMismatch {
                op: "Scenario transmit covariance",
                expected: (tx.len(), tx.len()),
                found: (tx_shape.rows(), tx_shape.cols()),
            });
        }
        let avg_diag = tx_shape.trace().re / tx.len() as f64;
        if !(avg_diag > 0.0) {
            return Err(Error::InvalidScenario(
                "transmit covariance shape has nonpositive trace".into(),
            ));
        }
        let tx_shape = HermitianPd::new(tx_shape.scale(1.0 / avg_diag))?;
        let tx_shape_factor = tx_shape.factor().clone();
        Ok(Self {
            rx,
            tx,
            num_targets,
            snapshots,
            noise_power,
            signal_power,
            tx_shape,
            tx_shape_factor,
            amplitude_power,
            prior,
        })
    }

    pub fn rx(&self) -> &ArrayGeometry {
        &self.rx
    }

    pub fn tx(&self) -> &ArrayGeometry {
        &self.tx
    }

    /// M.
    pub fn rx_elements(&self) -> usize {
        self.rx.len()
    }

    /// N.
    pub fn tx_elements(&self) -> usize {
        self.tx.len()
    }

    /// K.
    pub fn num_targets(&self) -> usize {
        self.num_targets
    }

    /// L.
    pub fn snapshots(&self) -> usize {
        self.snapshots
    }

    /// σ_n².
    pub fn noise_power(&self) -> f64 {
        self.noise_power
    }

    /// σ_s².
    pub fn signal_power(&self) -> f64 {
        self.signal_power
    }

    /// σ_b² = E|b_k|².
    pub fn amplitude_power(&self) -> f64 {
        self.amplitude_power
    }

    pub fn prior(&self) -> PriorSupport {
        self.prior
    }

    /// σ_s²/σ_n².
    pub fn snr(&self) -> f64 {
        self.signal_power / self.noise_power
    }

    /// Normalized shape Σ₀ (unit average diagonal).
    pub fn tx_shape(&self) -> &HermitianPd {
        &self.tx_shape
    }

    /// Lower Cholesky factor of Σ₀.
    pub fn tx_shape_factor(&self) -> &ComplexMatrix {
        &self.tx_shape_factor
    }

    /// Σ = σ_s² Σ₀.
    pub fn tx_covariance(&self) -> ComplexMatrix {
        self.tx_shape.matrix().scale(self.signal_power)
    }

    /// Same scenario at a different SNR (noise power held fixed).
    pub fn with_snr(&self, snr: f64) -> Self {
        let mut s = self.clone();
        s.signal_power = snr * self.noise_power;
        s
    }

    pub fn with_snapshots(&self, snapshots: usize) -> Self {
        let mut s = self.clone();
        s.snapshots = snapshots.max(1);
        s
    }

    pub fn with_noise_power(&self, noise_power: f64) -> Self {
        let mut s = self.clone();
        s.noise_power = noise_power;
        s
    }

    pub fn with_signal_power(&self, signal_power: f64) -> Self {
        let mut s = self.clone();
        s.signal_power = signal_power;
        s
    }

    pub fn with_amplitude_power(&self, amplitude_power: f64) -> Self {
        let mut s = self.clone();
        s.amplitude_power = amplitude_power;
        s
    }

    pub fn with_num_targets(&self, num_targets: usize) -> Result<Self> {
        if num_targets == 0 {
            return Err(Error::InvalidScenario("need at least one target".into()));
        }
        let mut s = self.clone();
        s.num_targets = num_targets;
        Ok(s)
    }

    pub fn with_prior(&self, prior: PriorSupport) -> Self {
        let mut s = self.clone();
        s.prior = prior;
        s
    }

    pub(crate) fn check_angles(&self, thetas: &[f64]) -> Result<()> {
        if thetas.len() != self.num_targets {
            return Err(Error::DimensionMismatch {
                op: "target angles",
                expected: (self.num_targets, 1),
                found: (thetas.len(), 1),
            });
        }
        if let Some(t) = thetas.iter().find(|t| !(t.abs() < FRAC_PI_2)) {
            return Err(Error::InvalidArgument(format!(
                "angle {t} rad is outside (−π/2, π/2)"
            )));
        }
        Ok(())
    }
}

/// Target-domain covariance `G` with `R = A G A† + σ_n² I`, and its
/// derivative with respect to θ_i when requested.
fn source_gram(
    thetas: &[f64],
    scenario: &Scenario,
    amplitudes: AmplitudeModel<'_>,
) -> Result<ComplexMatrix> {
    let v = scenario.tx.steering_matrix(thetas);
    let sigma = scenario.tx_covariance();
    // VᵀΣV*, entry (k, l) = v_kᵀ Σ v_l*
    let inner = v.transpose().matmul(&sigma)?.matmul(&v.conj())?;
    match amplitudes {
        AmplitudeModel::Averaged => {
            let k = thetas.len();
            let mut g = ComplexMatrix::zeros(k, k);
            for i in 0..k {
                g[(i, i)] = Complex64::new(scenario.amplitude_power * inner[(i, i)].re, 0.0);
            }
            Ok(g)
        }
        AmplitudeModel::Realized(b) => {
            check_draw(b, thetas.len())?;
            let bm = b.diag();
            bm.matmul(&inner)?.matmul(&bm.adjoint())
        }
    }
}

fn source_gram_derivative(
    thetas: &[f64],
    scenario: &Scenario,
    amplitudes: AmplitudeModel<'_>,
    i: usize,
) -> Result<ComplexMatrix> {
    let v = scenario.tx.steering_matrix(thetas);
    let dv = scenario.tx.steering_derivative(thetas, i)?;
    let sigma = scenario.tx_covariance();
    // ∂(VᵀΣV*) = (∂Vᵀ)ΣV* + VᵀΣ(∂V*)
    let left = dv.transpose().matmul(&sigma)?.matmul(&v.conj())?;
    let right = v.transpose().matmul(&sigma)?.matmul(&dv.conj())?;
    let d_inner = left.try_add(&right)?;
    match amplitudes {
        AmplitudeModel::Averaged => {
            let k = thetas.len();
            let mut g = ComplexMatrix::zeros(k, k);
            g[(i, i)] = Complex64::new(scenario.amplitude_power * d_inner[(i, i)].re, 0.0);
            Ok(g)
        }
        AmplitudeModel::Realized(b) => {
            check_draw(b, thetas.len())?;
            let bm = b.diag();
            bm.matmul(&d_inner)?.matmul(&bm.adjoint())
        }
    }
}

fn check_draw(b: &AmplitudeDraw, k: usize) -> Result<()> {
    if b.len() != k {
        return Err(Error::DimensionMismatch {
            op: "amplitude draw",
            expected: (k, 1),
            found: (b.len(), 1),
        });
    }
    Ok(())
}

/// `R = A G A† + σ_n² I` for the requested amplitude model.
pub fn snapshot_covariance(
    thetas: &[f64],
    scenario: &Scenario,
    amplitudes: AmplitudeModel<'_>,
) -> Result<HermitianPd> {
    scenario.check_angles(thetas)?;
    let a = scenario.rx.steering_matrix(thetas);
    let g = source_gram(thetas, scenario, amplitudes)?;
    let r = a
        .matmul(&g)?
        .matmul(&a.adjoint())?
        .hermitian_part()
        .add_diagonal(scenario.noise_power);
    HermitianPd::new(r)
}

/// `R̄ = σ_b² Σ_k (v_kᵀΣv_k*) a_k a_k† + σ_n² I`.
pub fn mean_snapshot_covariance(thetas: &[f64], scenario: &Scenario) -> Result<HermitianPd> {
    snapshot_covariance(thetas, scenario, AmplitudeModel::Averaged)
}

/// `R_{x|θ} = A B VᵀΣV* B† A† + σ_n² I` for a realized `b`.
pub fn conditional_snapshot_covariance(
    thetas: &[f64],
    scenario: &Scenario,
    b: &AmplitudeDraw,
) -> Result<HermitianPd> {
    snapshot_covariance(thetas, scenario, AmplitudeModel::Realized(b))
}

/// `∂R/∂θ_i` (zero-based `i`) by the product rule over `A`, `Vᵀ`, `V*`, `A†`.
pub fn covariance_derivative(
    thetas: &[f64],
    scenario: &Scenario,
    amplitudes: AmplitudeModel<'_>,
    i: usize,
) -> Result<ComplexMatrix> {
    scenario.check_angles(thetas)?;
    if i >= thetas.len() {
        return Err(Error::IndexOutOfRange {
            index: i,
            count: thetas.len(),
        });
    }
    let a = scenario.rx.steering_matrix(thetas);
    let da = scenario.rx.steering_derivative(thetas, i)?;
    let g = source_gram(thetas, scenario, amplitudes)?;
    let dg = source_gram_derivative(thetas, scenario, amplitudes, i)?;
    let ah = a.adjoint();
    let outer = da.matmul(&g)?.matmul(&ah)?;
    let middle = a.matmul(&dg)?.matmul(&ah)?;
    // (∂A)GA† + AG(∂A)† are conjugate transposes of each other
    outer.try_add(&outer.adjoint())?.try_add(&middle)
}

/// Every `∂R/∂θ_i`, sharing the steering matrices across indices.
pub fn covariance_derivatives(
    thetas: &[f64],
    scenario: &Scenario,
    amplitudes: AmplitudeModel<'_>,
) -> Result<Vec<ComplexMatrix>> {
    (0..thetas.len())
        .map(|i| covariance_derivative(thetas, scenario, amplitudes, i))
        .collect()
}

// SPDX-License-Identifier: MIT OR Apache-2.0

use nalgebra::{DMatrix, DVector, SymmetricEigen};
use rand::Rng;
use rand_distr::{Distribution, StandardNormal};

use super::{Capability, ChangeModel, ChangePoint, LlrProcess, ObservationSampler};
use crate::error::{Error, Result};

/// Iteration cap when running the deterministic signature recursion to find `q`.
const DRIFT_MAX_STEPS: usize = 1_000_000;
const DRIFT_REL_TOL: f64 = 1e-12;

/// Additive change in a linear Gaussian state-space model
///
/// ```text
/// θ_n = F θ_{n-1} + W_{n-1} + ν_θ 1{λ ≤ n},   θ_0 = 0
/// X_n = θ_n + V_n + ν_x 1{λ ≤ n}
/// ```
///
/// with `W ~ N(0, K_W)` and `V ~ N(0, K_V)`. The observation is the full state
/// plus noise, so `r = m`.
#[derive(Debug, Clone, PartialEq)]
pub struct StateSpaceModel {
    f: DMatrix<f64>,
    k_w: DMatrix<f64>,
    k_v: DMatrix<f64>,
    nu_theta: DVector<f64>,
    nu_x: DVector<f64>,
    w_factor: DMatrix<f64>,
    v_factor: DMatrix<f64>,
    drift: f64,
}

impl StateSpaceModel {
    pub fn new(
        f: DMatrix<f64>,
        k_w: DMatrix<f64>,
        k_v: DMatrix<f64>,
        nu_theta: DVector<f64>,
        nu_x: DVector<f64>,
    ) -> Result<Self> {
        Self::build(f, k_w, k_v, nu_theta, nu_x, true)
    }

    fn build(
        f: DMatrix<f64>,
        k_w: DMatrix<f64>,
        k_v: DMatrix<f64>,
        nu_theta: DVector<f64>,
        nu_x: DVector<f64>,
        require_drift: bool,
    ) -> Result<Self> {
        let m = f.nrows();
        if m == 0 || f.ncols() != m {
            return Err(Error::invalid("F", "must be a nonempty square matrix"));
        }
        for (name, mat) in [("K_W", &k_w), ("K_V", &k_v)] {
            if mat.shape() != (m, m) {
                return Err(Error::invalid(name, format!("must be {m}x{m}")));
            }
        }
        if nu_theta.len() != m {
            return Err(Error::invalid("nu_theta", format!("must have length {m}")));
        }
        if nu_x.len() != m {
            return Err(Error::invalid("nu_x", format!("must have length {m} (observations are r = m dimensional)")));
        }
        if f.iter().chain(nu_theta.iter()).chain(nu_x.iter()).any(|v| !v.is_finite()) {
            return Err(Error::invalid("F", "entries must be finite"));
        }
        let w_factor = psd_sqrt("K_W", &k_w)?;
        let v_factor = psd_sqrt("K_V", &k_v)?;
        let mut model = Self {
            f,
            k_w,
            k_v,
            nu_theta,
            nu_x,
            w_factor,
            v_factor,
            drift: 0.0,
        };
        model.drift = model.compute_drift()?;
        if require_drift && !(model.drift > 0.0) {
            return Err(Error::invalid("nu_theta", "change signature vanishes asymptotically (q = 0)"));
        }
        Ok(model)
    }

    /// Scalar convenience constructor (`m = r = 1`).
    pub fn scalar(f: f64, k_w: f64, k_v: f64, nu_theta: f64, nu_x: f64) -> Result<Self> {
        Self::new(
            DMatrix::from_element(1, 1, f),
            DMatrix::from_element(1, 1, k_w),
            DMatrix::from_element(1, 1, k_v),
            DVector::from_element(1, nu_theta),
            DVector::from_element(1, nu_x),
        )
    }

    /// Builds the model from row-major nested vectors.
    pub fn from_rows(
        f: &[Vec<f64>],
        k_w: &[Vec<f64>],
        k_v: &[Vec<f64>],
        nu_theta: &[f64],
        nu_x: &[f64],
    ) -> Result<Self> {
        Self::new(
            matrix_from_rows("F", f)?,
            matrix_from_rows("K_W", k_w)?,
            matrix_from_rows("K_V", k_v)?,
            DVector::from_column_slice(nu_theta),
            DVector::from_column_slice(nu_x),
        )
    }

    /// Like [`StateSpaceModel::new`] but admits a vanishing change signature,
    /// for which every `Z_n^k` is identically zero.
    pub fn without_drift_check(
        f: DMatrix<f64>,
        k_w: DMatrix<f64>,
        k_v: DMatrix<f64>,
        nu_theta: DVector<f64>,
        nu_x: DVector<f64>,
    ) -> Result<Self> {
        Self::build(f, k_w, k_v, nu_theta, nu_x, false)
    }

    pub fn dim(&self) -> usize {
        self.f.nrows()
    }

    pub fn filter(&self) -> KalmanFilter {
        KalmanFilter::new(self)
    }

    /// Runs the deterministic signature recursion for `k = 1` until the per-step
    /// drift `½ δ_nᵀ Σ_n⁻¹ δ_n` settles.
    fn compute_drift(&self) -> Result<f64> {
        let mut filter = self.filter();
        let mut signature = Signature::new(self.dim());
        let mut prev = f64::NAN;
        let mut stable_steps = 0;
        for _ in 0..DRIFT_MAX_STEPS {
            let cov = filter.covariance_step()?;
            let delta = signature.advance(self, &cov.gain);
            let c = 0.5 * delta.dot(&(&cov.sigma_inv * &delta));
            if (c - prev).abs() <= DRIFT_REL_TOL * c.abs().max(f64::MIN_POSITIVE) {
                stable_steps += 1;
                if stable_steps >= 10 {
                    return Ok(c);
                }
            } else {
                stable_steps = 0;
            }
            prev = c;
        }
        Err(Error::invalid(
            "F",
            format!("signature drift did not converge within {DRIFT_MAX_STEPS} steps"),
        ))
    }
}

fn matrix_from_rows(name: &'static str, rows: &[Vec<f64>]) -> Result<DMatrix<f64>> {
    let ncols = rows.first().map_or(0, Vec::len);
    if rows.is_empty() || ncols == 0 || rows.iter().any(|r| r.len() != ncols) {
        return Err(Error::invalid(name, "rows must be nonempty and of equal length"));
    }
    Ok(DMatrix::from_fn(rows.len(), ncols, |i, j| rows[i][j]))
}

fn psd_sqrt(name: &'static str, mat: &DMatrix<f64>) -> Result<DMatrix<f64>> {
    if mat.iter().any(|v| !v.is_finite()) {
        return Err(Error::invalid(name, "entries must be finite"));
    }
    let scale = mat.amax().max(1.0);
    if (mat - mat.transpose()).amax() > 1e-12 * scale {
        return Err(Error::invalid(name, "must be symmetric"));
    }
    let eig = SymmetricEigen::new(mat.clone());
    if eig.eigenvalues.iter().any(|&l| l < -1e-10 * scale) {
        return Err(Error::invalid(name, "must be positive semidefinite"));
    }
    let roots = eig.eigenvalues.map(|l| l.max(0.0).sqrt());
    Ok(&eig.eigenvectors * DMatrix::from_diagonal(&roots))
}

/// Innovation produced by one filter step.
#[derive(Debug, Clone)]
pub struct Innovation {
    /// `ξ_n = X_n - E(θ_n | F_{n-1})`.
    pub xi: DVector<f64>,
    /// `Σ_n`.
    pub sigma: DMatrix<f64>,
    pub sigma_inv: DMatrix<f64>,
    /// Kalman gain `K_n = P_{n|n-1} Σ_n⁻¹`.
    pub gain: DMatrix<f64>,
}

#[derive(Debug, Clone)]
struct CovarianceStep {
    sigma: DMatrix<f64>,
    sigma_inv: DMatrix<f64>,
    gain: DMatrix<f64>,
}

/// Kalman filter for the no-change model, started at `θ_0 = 0` with zero
/// covariance.
#[derive(Debug, Clone)]
pub struct KalmanFilter {
    f: DMatrix<f64>,
    k_w: DMatrix<f64>,
    k_v: DMatrix<f64>,
    estimate: DVector<f64>,
    covariance: DMatrix<f64>,
    n: usize,
}

impl KalmanFilter {
    pub fn new(model: &StateSpaceModel) -> Self {
        let m = model.dim();
        Self {
            f: model.f.clone(),
            k_w: model.k_w.clone(),
            k_v: model.k_v.clone(),
            estimate: DVector::zeros(m),
            covariance: DMatrix::zeros(m, m),
            n: 0,
        }
    }

    /// Covariance recursion only; the gains and `Σ_n` do not depend on data.
    fn covariance_step(&mut self) -> Result<CovarianceStep> {
        self.n += 1;
        let predicted = &self.f * &self.covariance * self.f.transpose() + &self.k_w;
        let sigma = &predicted + &self.k_v;
        let chol = sigma.clone().cholesky().ok_or_else(|| Error::Contract(format!(
            "innovation covariance at step {} is not positive definite; K_V must make it so",
            self.n
        )))?;
        let sigma_inv = chol.inverse();
        let gain = &predicted * &sigma_inv;
        let m = self.f.nrows();
        let updated = (DMatrix::identity(m, m) - &gain) * &predicted;
        self.covariance = 0.5 * (&updated + updated.transpose());
        Ok(CovarianceStep {
            sigma,
            sigma_inv,
            gain,
        })
    }

    /// One predict/update cycle on observation `x`.
    pub fn step(&mut self, x: &DVector<f64>) -> Result<Innovation> {
        let prediction = &self.f * &self.estimate;
        let cov = self.covariance_step()?;
        let xi = x - &prediction;
        self.estimate = prediction + &cov.gain * &xi;
        Ok(Innovation {
            xi,
            sigma: cov.sigma,
            sigma_inv: cov.sigma_inv,
            gain: cov.gain,
        })
    }

    pub fn estimate(&self) -> &DVector<f64> {
        &self.estimate
    }

    pub fn covariance(&self) -> &DMatrix<f64> {
        &self.covariance
    }
}

/// Deterministic footprint of a change at `k` on the no-change filter:
/// the mean state `μ` and the filter's response to it.
#[derive(Debug, Clone)]
struct Signature {
    mean_state: DVector<f64>,
    filtered: DVector<f64>,
}

impl Signature {
    fn new(m: usize) -> Self {
        Self {
            mean_state: DVector::zeros(m),
            filtered: DVector::zeros(m),
        }
    }

    /// Returns `δ_n(k)` and advances to the next step.
    fn advance(&mut self, model: &StateSpaceModel, gain: &DMatrix<f64>) -> DVector<f64> {
        self.mean_state = &model.f * &self.mean_state + &model.nu_theta;
        let predicted = &model.f * &self.filtered;
        let delta = &self.mean_state + &model.nu_x - &predicted;
        self.filtered = predicted + gain * &delta;
        delta
    }
}

impl ChangeModel for StateSpaceModel {
    type Obs = DVector<f64>;
    type Sampler = StateSpaceSampler;
    type Process = StateSpaceProcess;

    fn name(&self) -> &'static str {
        "state_space"
    }

    fn capability(&self) -> Capability {
        Capability::ChangePointDependent
    }

    /// Computed numerically from the deterministic signature recursion.
    fn kl_number(&self) -> f64 {
        self.drift
    }

    fn sampler(&self, change: ChangePoint) -> StateSpaceSampler {
        StateSpaceSampler {
            model: self.clone(),
            state: DVector::zeros(self.dim()),
            change,
            n: 0,
        }
    }

    fn llr_process(&self) -> StateSpaceProcess {
        StateSpaceProcess {
            model: self.clone(),
            filter: self.filter(),
            signatures: Vec::new(),
            llr: Vec::new(),
        }
    }
}

#[derive(Debug, Clone)]
pub struct StateSpaceSampler {
    model: StateSpaceModel,
    state: DVector<f64>,
    change: ChangePoint,
    n: usize,
}

fn gaussian<R: Rng + ?Sized>(factor: &DMatrix<f64>, rng: &mut R) -> DVector<f64> {
    let z = DVector::from_fn(factor.ncols(), |_, _| StandardNormal.sample(rng));
    factor * z
}

impl ObservationSampler for StateSpaceSampler {
    type Obs = DVector<f64>;

    fn draw<R: Rng + ?Sized>(&mut self, rng: &mut R) -> DVector<f64> {
        self.n += 1;
        let post = self.change.is_post_change(self.n);
        let w = gaussian(&self.model.w_factor, rng);
        let mut state = &self.model.f * &self.state + w;
        if post {
            state += &self.model.nu_theta;
        }
        self.state = state;
        let mut x = &self.state + gaussian(&self.model.v_factor, rng);
        if post {
            x += &self.model.nu_x;
        }
        x
    }
}

/// Per-trajectory LLR for every hypothesized change point. Each step costs
/// `O(n m²)`: the signature `δ_n(k)` is propagated for every `k ≤ n`.
#[derive(Debug, Clone)]
pub struct StateSpaceProcess {
    model: StateSpaceModel,
    filter: KalmanFilter,
    signatures: Vec<Signature>,
    // llr[k - 1] = Z_n^k.
    llr: Vec<f64>,
}

impl LlrProcess for StateSpaceProcess {
    type Obs = DVector<f64>;

    fn n(&self) -> usize {
        self.llr.len()
    }

    fn observe(&mut self, x: &DVector<f64>) -> Result<()> {
        if x.len() != self.model.dim() {
            return Err(Error::SupportViolation {
                index: self.n() + 1,
                reason: format!("expected a {}-dimensional observation, got {}", self.model.dim(), x.len()),
            });
        }
        let innov = self.filter.step(x)?;
        self.signatures.push(Signature::new(self.model.dim()));
        self.llr.push(0.0);
        let weighted_xi = &innov.sigma_inv * &innov.xi;
        for (sig, z) in self.signatures.iter_mut().zip(self.llr.iter_mut()) {
            let delta = sig.advance(&self.model, &innov.gain);
            let quad = delta.dot(&(&innov.sigma_inv * &delta));
            *z += delta.dot(&weighted_xi) - 0.5 * quad;
        }
        Ok(())
    }

    fn increment(&self) -> Option<f64> {
        None
    }

    fn llr(&self, k: usize) -> f64 {
        self.llr[k - 1]
    }
}

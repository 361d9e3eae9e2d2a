//! Linear-Gaussian state estimation over box trajectories.
//!
//! The state is the 6-vector `(x, y, vx, vy, w, h)`: box center, latent
//! per-frame velocity, and box extent. Position follows a constant-velocity
//! model with unit time step; width and height follow a random walk. The
//! measurement is `(x, y, w, h)` — velocities are never observed.

use crate::geometry::Rect;
use nalgebra::{Cholesky, SMatrix, SVector};
use thiserror::Error;

pub type StateVector = SVector<f64, 6>;
pub type StateMatrix = SMatrix<f64, 6, 6>;
pub type MeasVector = SVector<f64, 4>;
pub type MeasMatrix = SMatrix<f64, 4, 4>;

const LN_TAU: f64 = 1.8378770664093453; // ln(2*pi)

#[derive(Debug, Error)]
pub enum KalmanError {
    #[error("observation contains non-finite values")]
    NonFiniteObservation,
    #[error("innovation covariance is singular")]
    SingularInnovation,
}

/// Gaussian belief over the 6-dimensional box state.
#[derive(Debug, Clone, PartialEq)]
pub struct KalmanState {
    pub mean: StateVector,
    pub cov: StateMatrix,
}

impl KalmanState {
    /// Box implied by the state mean; extents are clamped non-negative.
    pub fn state_box(&self) -> Rect {
        let w = self.mean[4].max(0.0);
        let h = self.mean[5].max(0.0);
        Rect::from_center(self.mean[0], self.mean[1], w, h)
    }

    /// Planar speed of the state mean in pixels per frame.
    pub fn speed(&self) -> f64 {
        self.mean[2].hypot(self.mean[3])
    }
}

/// Per-frame box observation; `Missing` marks frames without one.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Observation {
    Present(Rect),
    Missing,
}

impl Observation {
    pub fn as_rect(&self) -> Option<&Rect> {
        match self {
            Observation::Present(r) => Some(r),
            Observation::Missing => None,
        }
    }
}

/// Noise configuration for the filter.
#[derive(Debug, Clone, PartialEq)]
pub struct KalmanConfig {
    pub transition_cov: StateMatrix,
    pub observation_cov: MeasMatrix,
    pub initial_cov: StateMatrix,
}

impl Default for KalmanConfig {
    fn default() -> Self {
        Self {
            transition_cov: StateMatrix::from_diagonal(&StateVector::from_column_slice(&[
                1.0, 1.0, 0.2, 0.2, 1.0, 1.0,
            ])),
            observation_cov: MeasMatrix::from_diagonal(&MeasVector::from_column_slice(&[
                0.5, 0.5, 0.5, 0.5,
            ])),
            initial_cov: StateMatrix::identity(),
        }
    }
}

impl KalmanConfig {
    /// Convenience builder from the diagonal scalars the config file exposes.
    pub fn from_scalars(
        transition_pos: f64,
        transition_vel: f64,
        transition_size: f64,
        observation: f64,
        initial: f64,
    ) -> Self {
        Self {
            transition_cov: StateMatrix::from_diagonal(&StateVector::from_column_slice(&[
                transition_pos,
                transition_pos,
                transition_vel,
                transition_vel,
                transition_size,
                transition_size,
            ])),
            observation_cov: MeasMatrix::identity() * observation,
            initial_cov: StateMatrix::identity() * initial,
        }
    }
}

/// Constant-velocity transition matrix for a unit time step.
pub fn transition_matrix() -> StateMatrix {
    let mut f = StateMatrix::identity();
    f[(0, 2)] = 1.0;
    f[(1, 3)] = 1.0;
    f
}

/// Measurement matrix selecting `(x, y, w, h)` from the state.
pub fn measurement_matrix() -> SMatrix<f64, 4, 6> {
    let mut h = SMatrix::<f64, 4, 6>::zeros();
    h[(0, 0)] = 1.0;
    h[(1, 1)] = 1.0;
    h[(2, 4)] = 1.0;
    h[(3, 5)] = 1.0;
    h
}

/// Measurement vector of a box: center plus extent.
pub fn measurement_of(b: &Rect) -> MeasVector {
    let (cx, cy) = b.center();
    MeasVector::from_column_slice(&[cx, cy, b.w, b.h])
}

fn symmetrize(m: &mut StateMatrix) {
    let t = m.transpose();
    *m = (*m + t) * 0.5;
}

/// Filter state centered on a detection box with zero initial velocity.
pub fn init(b: &Rect, cfg: &KalmanConfig) -> KalmanState {
    let (cx, cy) = b.center();
    KalmanState {
        mean: StateVector::from_column_slice(&[cx, cy, 0.0, 0.0, b.w, b.h]),
        cov: cfg.initial_cov,
    }
}

/// Advances the belief by one frame.
pub fn predict(s: &KalmanState, cfg: &KalmanConfig) -> KalmanState {
    let f = transition_matrix();
    let mean = f * s.mean;
    let mut cov = f * s.cov * f.transpose() + cfg.transition_cov;
    symmetrize(&mut cov);
    KalmanState { mean, cov }
}

/// Corrects a predicted belief with an observation. A missing observation
/// leaves the state untouched, so prediction carries forward on its own.
pub fn update(
    s: &KalmanState,
    obs: &Observation,
    cfg: &KalmanConfig,
) -> Result<KalmanState, KalmanError> {
    let b = match obs {
        Observation::Missing => return Ok(s.clone()),
        Observation::Present(b) => b,
    };
    let z = measurement_of(b);
    if !z.iter().all(|v| v.is_finite()) {
        return Err(KalmanError::NonFiniteObservation);
    }
    let h = measurement_matrix();
    let innovation = z - h * s.mean;
    let s_cov = h * s.cov * h.transpose() + cfg.observation_cov;
    let chol = Cholesky::new(s_cov).ok_or(KalmanError::SingularInnovation)?;
    let gain = s.cov * h.transpose() * chol.inverse();
    let mean = s.mean + gain * innovation;
    // Joseph form keeps the covariance symmetric positive semi-definite.
    let ikh = StateMatrix::identity() - gain * h;
    let mut cov = ikh * s.cov * ikh.transpose() + gain * cfg.observation_cov * gain.transpose();
    symmetrize(&mut cov);
    Ok(KalmanState { mean, cov })
}

/// Log-density of a box under the predictive measurement distribution of
/// `s`, which must be a predicted (pre-update) state.
pub fn log_likelihood(s: &KalmanState, b: &Rect, cfg: &KalmanConfig) -> Result<f64, KalmanError> {
    let h = measurement_matrix();
    let s_cov = h * s.cov * h.transpose() + cfg.observation_cov;
    let chol = Cholesky::new(s_cov).ok_or(KalmanError::SingularInnovation)?;
    let resid = measurement_of(b) - h * s.mean;
    let solved = chol.solve(&resid);
    let maha = resid.dot(&solved);
    let logdet = 2.0 * chol.l().diagonal().iter().map(|d| d.ln()).sum::<f64>();
    Ok(-0.5 * (4.0 * LN_TAU + logdet + maha))
}

/// Gaussian density of the box measurement under the predictive
/// distribution. This is a density, not a probability mass: it may exceed 1.
pub fn likelihood(s: &KalmanState, b: &Rect, cfg: &KalmanConfig) -> Result<f64, KalmanError> {
    log_likelihood(s, b, cfg).map(f64::exp)
}

/// Predictive measurement density with the innovation factorisation done
/// once, for scoring many candidate boxes against one predicted state.
pub struct PredictiveDensity {
    mean: MeasVector,
    chol: Cholesky<f64, nalgebra::Const<4>>,
    logdet: f64,
}

impl PredictiveDensity {
    pub fn new(s: &KalmanState, cfg: &KalmanConfig) -> Result<Self, KalmanError> {
        let h = measurement_matrix();
        let s_cov = h * s.cov * h.transpose() + cfg.observation_cov;
        let chol = Cholesky::new(s_cov).ok_or(KalmanError::SingularInnovation)?;
        let logdet = 2.0 * chol.l().diagonal().iter().map(|d| d.ln()).sum::<f64>();
        Ok(Self { mean: h * s.mean, chol, logdet })
    }

    pub fn log_density(&self, b: &Rect) -> f64 {
        let resid = measurement_of(b) - self.mean;
        let maha = resid.dot(&self.chol.solve(&resid));
        -0.5 * (4.0 * LN_TAU + self.logdet + maha)
    }

    pub fn density(&self, b: &Rect) -> f64 {
        self.log_density(b).exp()
    }

    /// Measurement-space mean of the predictive distribution.
    pub fn mean(&self) -> &MeasVector {
        &self.mean
    }

    /// Squared Mahalanobis distance of the box from an arbitrary
    /// measurement-space mean under this state's innovation covariance.
    /// Evaluating two hypotheses against the same covariance compares pure
    /// geometry, with no bias from how much the covariances have grown.
    pub fn mahalanobis_from(&self, mean: &MeasVector, b: &Rect) -> f64 {
        let resid = measurement_of(b) - mean;
        resid.dot(&self.chol.solve(&resid))
    }
}

/// One forward filtering step as recorded for smoothing.
#[derive(Debug, Clone)]
pub struct FilterStep {
    pub predicted: KalmanState,
    pub posterior: KalmanState,
}

/// Runs the forward filter over an observation sequence. The prior at the
/// first index is `init(init_box)` corrected by the first observation; every
/// later index is a predict/update pair.
pub fn filter_sequence(
    observations: &[Observation],
    init_box: &Rect,
    cfg: &KalmanConfig,
) -> Vec<FilterStep> {
    let mut steps = Vec::with_capacity(observations.len());
    let mut belief = init(init_box, cfg);
    for (t, obs) in observations.iter().enumerate() {
        let predicted = if t == 0 { belief.clone() } else { predict(&belief, cfg) };
        // Invalid boxes cannot occur here: callers feed boxes that already
        // passed io validation, so update only fails on singular covariance,
        // which Joseph-form updates keep away from.
        let posterior = update(&predicted, obs, cfg).unwrap_or_else(|_| predicted.clone());
        belief = posterior.clone();
        steps.push(FilterStep { predicted, posterior });
    }
    steps
}

/// Fixed-interval smoothing over an observation sequence.
///
/// Returns one smoothed marginal per input index; missing observations are
/// filled by inference from both temporal directions.
pub fn smooth(
    observations: &[Observation],
    init_box: &Rect,
    cfg: &KalmanConfig,
) -> Vec<KalmanState> {
    let steps = filter_sequence(observations, init_box, cfg);
    rts_backward(&steps)
}

/// Backward recursion of the Rauch-Tung-Striebel smoother over recorded
/// forward steps.
pub fn rts_backward(steps: &[FilterStep]) -> Vec<KalmanState> {
    let n = steps.len();
    if n == 0 {
        return Vec::new();
    }
    let f = transition_matrix();
    let mut smoothed = vec![steps[n - 1].posterior.clone(); n];
    for k in (0..n - 1).rev() {
        let pred_next = &steps[k + 1].predicted;
        let post = &steps[k].posterior;
        // Gain via a linear solve against the predicted covariance; fall back
        // to the filtered state if that covariance has collapsed.
        let gain = match pred_next.cov.try_inverse() {
            Some(inv) => post.cov * f.transpose() * inv,
            None => {
                smoothed[k] = post.clone();
                continue;
            }
        };
        let mean = post.mean + gain * (smoothed[k + 1].mean - pred_next.mean);
        let mut cov = post.cov + gain * (smoothed[k + 1].cov - pred_next.cov) * gain.transpose();
        symmetrize(&mut cov);
        smoothed[k] = KalmanState { mean, cov };
    }
    smoothed
}

#[cfg(test)]
mod tests {
    use super::*;

    fn cfg() -> KalmanConfig {
        KalmanConfig::default()
    }

    #[test]
    fn init_zero_velocity_and_config_covariance() {
        let s = init(&Rect::new(0.0, 0.0, 10.0, 10.0), &cfg());
        assert_eq!(s.mean.as_slice(), &[5.0, 5.0, 0.0, 0.0, 10.0, 10.0]);
        let s = init(&Rect::new(10.0, 20.0, 4.0, 8.0), &cfg());
        assert_eq!(s.mean.as_slice(), &[12.0, 24.0, 0.0, 0.0, 4.0, 8.0]);
        assert_eq!(s.cov, cfg().initial_cov);
    }

    #[test]
    fn predict_advances_position_by_velocity() {
        let mut s = init(&Rect::from_center(0.0, 0.0, 10.0, 10.0), &cfg());
        s.mean[2] = 1.0;
        let p = predict(&s, &cfg());
        assert_eq!(p.mean[0], 1.0);
        assert_eq!(p.mean[1], 0.0);
        assert_eq!(p.mean[2], 1.0);
        assert_eq!(p.mean[4], 10.0);
    }

    #[test]
    fn predict_zero_velocity_grows_covariance() {
        let s = init(&Rect::from_center(5.0, 5.0, 10.0, 10.0), &cfg());
        let p = predict(&s, &cfg());
        assert_eq!(p.mean, s.mean);
        assert!(p.cov.trace() > s.cov.trace());
    }

    #[test]
    fn two_predicts_accumulate_motion() {
        let mut s = init(&Rect::from_center(0.0, 0.0, 8.0, 8.0), &cfg());
        s.mean[2] = 2.0;
        s.mean[3] = -1.0;
        let p = predict(&predict(&s, &cfg()), &cfg());
        assert_eq!(p.mean[0], 4.0);
        assert_eq!(p.mean[1], -2.0);
    }

    #[test]
    fn double_predict_equals_two_frame_transition() {
        let mut s = init(&Rect::from_center(3.0, 7.0, 12.0, 6.0), &cfg());
        s.mean[2] = 1.5;
        s.mean[3] = 0.5;
        let twice = predict(&predict(&s, &cfg()), &cfg());

        let f = transition_matrix();
        let f2 = f * f;
        let mean2 = f2 * s.mean;
        let q = cfg().transition_cov;
        let cov2 = f2 * s.cov * f2.transpose() + f * q * f.transpose() + q;
        assert!((twice.mean - mean2).norm() < 1e-12);
        assert!((twice.cov - cov2).norm() < 1e-9);
    }

    #[test]
    fn missing_update_is_identity() {
        let s = predict(&init(&Rect::new(0.0, 0.0, 10.0, 10.0), &cfg()), &cfg());
        let u = update(&s, &Observation::Missing, &cfg()).unwrap();
        assert_eq!(u, s);
    }

    #[test]
    fn update_at_predicted_mean_with_tiny_noise_pins_mean() {
        let mut c = cfg();
        c.observation_cov = MeasMatrix::identity() * 1e-9;
        let s = predict(&init(&Rect::from_center(5.0, 5.0, 10.0, 10.0), &c), &c);
        let obs = Rect::from_center(s.mean[0], s.mean[1], s.mean[4], s.mean[5]);
        let u = update(&s, &Observation::Present(obs), &c).unwrap();
        assert!((u.mean[0] - s.mean[0]).abs() < 1e-6);
        assert!((u.mean[1] - s.mean[1]).abs() < 1e-6);
    }

    #[test]
    fn update_rejects_non_finite_observation() {
        let s = init(&Rect::new(0.0, 0.0, 10.0, 10.0), &cfg());
        let bad = Rect { x: f64::NAN, y: 0.0, w: 1.0, h: 1.0 };
        assert!(update(&s, &Observation::Present(bad), &cfg()).is_err());
    }

    #[test]
    fn scalar_gaussian_update_oracle() {
        // 1-D conjugate-Gaussian check: prior N(0,1), observation 1.0 with
        // unit noise gives posterior mean 0.5. Recreated here with the x
        // component by zeroing out every other coupling.
        let mut c = cfg();
        c.observation_cov = MeasMatrix::identity();
        c.initial_cov = StateMatrix::identity();
        let prior = KalmanState {
            mean: StateVector::zeros(),
            cov: StateMatrix::identity(),
        };
        let obs = Rect::from_center(1.0, 0.0, 0.0, 0.0);
        let u = update(&prior, &Observation::Present(obs), &c).unwrap();
        assert!((u.mean[0] - 0.5).abs() < 1e-12);
    }

    #[test]
    fn likelihood_peaks_at_predicted_mean_and_decays() {
        let c = cfg();
        let s = predict(&init(&Rect::from_center(50.0, 50.0, 10.0, 10.0), &c), &c);
        let at_mean = likelihood(&s, &Rect::from_center(50.0, 50.0, 10.0, 10.0), &c).unwrap();
        let mut prev = at_mean;
        for k in 1..6 {
            let l = likelihood(
                &s,
                &Rect::from_center(50.0 + 3.0 * k as f64, 50.0, 10.0, 10.0),
                &c,
            )
            .unwrap();
            assert!(l < prev);
            prev = l;
        }
    }

    #[test]
    fn likelihood_ratio_one_sigma_displacement() {
        // Density at the mean over density one predictive standard deviation
        // away along an axis is exactly exp(0.5) for a diagonal innovation.
        let c = cfg();
        let s = predict(&init(&Rect::from_center(0.0, 0.0, 10.0, 10.0), &c), &c);
        let h = measurement_matrix();
        let s_cov = h * s.cov * h.transpose() + c.observation_cov;
        // The predictive covariance of a freshly initialised state is
        // diagonal, so the one-axis displacement is exact.
        assert!(s_cov[(0, 1)].abs() < 1e-12);
        let sigma = s_cov[(0, 0)].sqrt();
        let at_mean = likelihood(&s, &Rect::from_center(0.0, 0.0, 10.0, 10.0), &c).unwrap();
        let displaced = likelihood(&s, &Rect::from_center(sigma, 0.0, 10.0, 10.0), &c).unwrap();
        assert!((at_mean / displaced - 0.5f64.exp()).abs() < 1e-9);
    }

    #[test]
    fn smooth_constant_observations_converges() {
        let c = cfg();
        let b = Rect::from_center(40.0, 30.0, 12.0, 10.0);
        let obs = vec![Observation::Present(b); 10];
        let sm = smooth(&obs, &b, &c);
        assert_eq!(sm.len(), 10);
        for s in &sm {
            assert!((s.mean[0] - 40.0).abs() < 0.5);
            assert!((s.mean[1] - 30.0).abs() < 0.5);
            assert!(s.mean[2].abs() < 0.5);
        }
    }

    #[test]
    fn smooth_recovers_constant_velocity() {
        let c = cfg();
        let obs: Vec<Observation> = (0..8)
            .map(|t| Observation::Present(Rect::from_center(10.0 * t as f64, 0.0, 10.0, 10.0)))
            .collect();
        let first = Rect::from_center(0.0, 0.0, 10.0, 10.0);
        let sm = smooth(&obs, &first, &c);
        for s in sm.iter().skip(5) {
            assert!((s.mean[2] - 10.0).abs() < 0.5, "vx = {}", s.mean[2]);
        }
    }

    #[test]
    fn smooth_single_element_is_filtered_state() {
        let c = cfg();
        let b = Rect::new(0.0, 0.0, 10.0, 10.0);
        let sm = smooth(&[Observation::Present(b)], &b, &c);
        let filt = filter_sequence(&[Observation::Present(b)], &b, &c);
        assert_eq!(sm.len(), 1);
        assert_eq!(sm[0], filt[0].posterior);
    }

    #[test]
    fn covariances_stay_symmetric_psd() {
        let c = cfg();
        let obs: Vec<Observation> = (0..12)
            .map(|t| {
                if t % 3 == 0 {
                    Observation::Missing
                } else {
                    Observation::Present(Rect::from_center(2.0 * t as f64, 5.0, 9.0, 7.0))
                }
            })
            .collect();
        let sm = smooth(&obs, &Rect::from_center(0.0, 5.0, 9.0, 7.0), &c);
        for s in &sm {
            assert!((s.cov - s.cov.transpose()).norm() < 1e-9);
            let eig = s.cov.symmetric_eigenvalues();
            assert!(eig.iter().all(|&e| e >= -1e-9), "eigenvalues {eig:?}");
        }
    }
}

use metricmm::envs::{PendulumParams, PendulumState};

/// Continuous-time reference: RK4 on θ̈ = (3g/2ℓ) sin θ + 3a/(mℓ²) with
/// `substeps` steps per environment step.
pub fn reference(state: PendulumState, torque: f64, p: &PendulumParams, substeps: usize) -> PendulumState {
    let h = p.dt / substeps as f64;
    let acc = |th: f64| 3.0 * p.gravity / (2.0 * p.length) * th.sin() + 3.0 / (p.mass * p.length * p.length) * torque;
    let (mut th, mut w) = (state.theta, state.theta_dot);
    for _ in 0..substeps {
        let (k1t, k1w) = (w, acc(th));
        let (k2t, k2w) = (w + 0.5 * h * k1w, acc(th + 0.5 * h * k1t));
        let (k3t, k3w) = (w + 0.5 * h * k2w, acc(th + 0.5 * h * k2t));
        let (k4t, k4w) = (w + h * k3w, acc(th + h * k3t));
        th += h / 6.0 * (k1t + 2.0 * k2t + 2.0 * k3t + k4t);
        w += h / 6.0 * (k1w + 2.0 * k2w + 2.0 * k3w + k4w);
    }
    PendulumState::new(th, w)
}

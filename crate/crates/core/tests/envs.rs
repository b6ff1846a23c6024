use std::f64::consts::PI;

use metricmm::envs::{
    frames_for, image_observe, pendulum_step, sound_observe, wrap_angle, FrameStack, GridWorld, PendulumParams,
    PendulumState, RenderConfig, SoundConfig,
};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

mod common;
use common::reference;

#[test]
fn twenty_steps_track_fine_reference_integration() {
    let p = PendulumParams::default();
    for (start, torque) in [((PI / 2.0, 0.0), 0.0), ((1.0, 0.5), 0.0), ((2.5, -1.0), 1.0), ((-1.2, 0.0), -0.5)] {
        let mut a = PendulumState::new(start.0, start.1);
        let mut b = a;
        let mut worst: f64 = 0.0;
        for _ in 0..20 {
            a = pendulum_step(a, torque, &p, 0.0).unwrap();
            b = reference(b, torque, &p, 100);
            assert!(b.theta_dot.abs() < p.max_speed, "reference left the unclamped regime");
            let err = (a.theta - b.theta).hypot(a.theta_dot - b.theta_dot);
            worst = worst.max(err / b.theta.hypot(b.theta_dot));
        }
        assert!(worst < 0.05, "start {start:?}: relative error {worst}");
    }
}

#[test]
fn hand_evaluated_steps_to_1e12() {
    let p = PendulumParams::default();
    let s = pendulum_step(PendulumState::new(PI / 2.0, 0.0), 0.0, &p, 0.0).unwrap();
    assert!((s.theta_dot - 0.75).abs() < 1e-12 && (s.theta - (PI / 2.0 + 0.0375)).abs() < 1e-12);
    let s = pendulum_step(PendulumState::new(PI / 2.0, 0.0), 1.0, &p, 0.0).unwrap();
    assert!((s.theta_dot - 0.9).abs() < 1e-12 && (s.theta - (PI / 2.0 + 0.045)).abs() < 1e-12);
}

/// One copy of the episode-start stack `(x, x, x)`. Replication scales every
/// squared distance by 3, so nearest neighbours are the same as for the full
/// stack.
fn stacked_features(state: PendulumState, p: &PendulumParams) -> Vec<f64> {
    let mut stack = FrameStack::new(3).unwrap();
    let obs = stack.reset(frames_for(state, p, &SoundConfig::default(), &RenderConfig::default()).unwrap());
    obs.modalities
        .iter()
        .flat_map(|m| m[..m.len() / 3].iter().copied())
        .collect()
}

#[test]
fn observations_identify_the_state_on_a_grid() {
    let p = PendulumParams::default();
    let thetas: Vec<f64> = (0..72).map(|i| -PI + (i as f64 + 0.5) * 2.0 * PI / 72.0).collect();
    let speeds: Vec<f64> = (0..41).map(|j| -8.0 + 0.4 * j as f64).collect();
    let grid: Vec<(f64, f64)> = thetas.iter().flat_map(|&t| speeds.iter().map(move |&w| (t, w))).collect();
    let feats: Vec<Vec<f64>> = grid
        .iter()
        .map(|&(t, w)| stacked_features(PendulumState::new(t, w), &p))
        .collect();
    // standardise each feature over the grid so pixels and sound share a scale
    let dim = feats[0].len();
    let n = feats.len() as f64;
    let mut mean = vec![0.0; dim];
    let mut sd = vec![0.0; dim];
    for f in &feats {
        for (m, v) in mean.iter_mut().zip(f) {
            *m += v / n;
        }
    }
    for f in &feats {
        for ((s, v), m) in sd.iter_mut().zip(f).zip(&mean) {
            *s += (v - m) * (v - m) / n;
        }
    }
    // pixels never lit anywhere on the grid carry no information
    let scale = |f: &[f64]| -> Vec<f64> {
        f.iter()
            .zip(&mean)
            .zip(&sd)
            .filter(|(_, s)| **s > 0.0)
            .map(|((v, m), s)| (v - m) / s.sqrt())
            .collect()
    };
    let table: Vec<Vec<f64>> = feats.iter().map(|f| scale(f)).collect();

    // queries are jittered by less than half a grid cell in each coordinate
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let mut hits = 0;
    for (k, &(t, w)) in grid.iter().enumerate() {
        let q = PendulumState::new(
            t + rng.random_range(-0.25..0.25) * 2.0 * PI / 72.0,
            w + rng.random_range(-0.05..0.05),
        );
        let qf = scale(&stacked_features(q, &p));
        let best = table
            .iter()
            .enumerate()
            .map(|(i, f)| (i, f.iter().zip(&qf).map(|(a, b)| (a - b) * (a - b)).sum::<f64>()))
            .min_by(|a, b| a.1.total_cmp(&b.1))
            .unwrap()
            .0;
        hits += usize::from(best == k);
    }
    let acc = hits as f64 / grid.len() as f64;
    assert!(acc >= 0.95, "decoding accuracy {acc}");
}

#[test]
fn opposite_angles_render_differently_and_pivot_is_lit() {
    let cfg = RenderConfig::default();
    let mut rng = ChaCha8Rng::seed_from_u64(0);
    for _ in 0..100 {
        let th = rng.random_range(-PI..PI);
        let a = image_observe(PendulumState::new(th, 0.0), &cfg);
        let b = image_observe(PendulumState::new(th + PI, 0.0), &cfg);
        let diff = a.iter().zip(&b).filter(|(x, y)| x != y).count();
        assert!(diff >= 5);
        let c = cfg.side / 2;
        assert_eq!(a[c * cfg.side + c], 1.0);
        assert_eq!(a, image_observe(PendulumState::new(th, 0.0), &cfg));
    }
}

#[test]
fn sound_frequencies_positive_and_base_at_rest() {
    let p = PendulumParams::default();
    let cfg = SoundConfig::default();
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    for _ in 0..200 {
        let th = rng.random_range(-PI..PI);
        let w = rng.random_range(-8.0..8.0);
        let s = sound_observe(PendulumState::new(th, w), &p, &cfg).unwrap();
        assert!(s.iter().step_by(2).all(|&f| f > 0.0));
        let rest = sound_observe(PendulumState::new(th, 0.0), &p, &cfg).unwrap();
        assert!(rest.iter().step_by(2).all(|&f| f == cfg.base_frequency));
    }
    assert!((wrap_angle(3.0 * PI) - PI).abs() < 1e-12);
}

#[test]
fn default_map_distances_respect_the_wall() {
    let w = GridWorld::default_map();
    let table = w.distance_table();
    for (i, row) in table.iter().enumerate() {
        for (j, d) in row.iter().enumerate() {
            assert_eq!(*d, table[j][i]);
            if i == j {
                assert!(d.is_none() || *d == Some(0));
            }
        }
    }
    // cells on either side of the wall top are close in coordinates but far by path
    let (l, r) = ((4, 0), (6, 0));
    assert!(w.bfs_distance(l, r).unwrap() > 2);
}

use nalgebra::{DVector, Vector2};
use rand::seq::SliceRandom;
use rand::Rng;
use rand_distr::{Distribution, Normal, Poisson, Uniform};

use crate::error::{Error, Result};
use crate::filter::{cv_process_noise, cv_transition};

use super::config::{Case, ScenarioConfig};

/// One simulated target: its state `[px, py, vx, vy]` at every step from
/// `birth_step` to `birth_step + states.len() - 1`.
#[derive(Clone, Debug, PartialEq)]
pub struct TargetTrack {
    pub id: usize,
    pub birth_step: usize,
    pub states: Vec<DVector<f64>>,
}

impl TargetTrack {
    pub fn state_at(&self, step: usize) -> Option<&DVector<f64>> {
        step.checked_sub(self.birth_step).and_then(|i| self.states.get(i))
    }

    pub fn last_step(&self) -> usize {
        self.birth_step + self.states.len() - 1
    }
}

/// Ground truth over steps `1..=steps`.
#[derive(Clone, Debug, PartialEq)]
pub struct GroundTruth {
    pub steps: usize,
    pub targets: Vec<TargetTrack>,
}

impl GroundTruth {
    pub fn alive_at(&self, step: usize) -> Vec<(usize, &DVector<f64>)> {
        self.targets
            .iter()
            .filter_map(|t| t.state_at(step).map(|x| (t.id, x)))
            .collect()
    }

    pub fn cardinality(&self, step: usize) -> usize {
        self.targets.iter().filter(|t| t.state_at(step).is_some()).count()
    }
}

fn inside(p: &Vector2<f64>, a: f64) -> bool {
    p.x.abs() <= a && p.y.abs() <= a
}

fn gaussian_noise<R: Rng + ?Sized>(rng: &mut R, cov: &nalgebra::DMatrix<f64>) -> DVector<f64> {
    let std_normal = Normal::new(0.0, 1.0).expect("unit normal");
    let n = cov.nrows();
    let e = DVector::from_fn(n, |_, _| std_normal.sample(rng));
    match nalgebra::Cholesky::new(cov.clone()) {
        Some(c) => c.l() * e,
        None => DVector::zeros(n),
    }
}

/// Propagates `x0` from `birth_step` until `last_step` or until it leaves
/// the area.
fn propagate<R: Rng + ?Sized>(
    rng: &mut R,
    cfg: &ScenarioConfig,
    x0: DVector<f64>,
    birth_step: usize,
    last_step: usize,
) -> Vec<DVector<f64>> {
    let f = cv_transition(cfg.dt);
    let q = cv_process_noise(cfg.dt, cfg.truth_sigma_q);
    let noisy = cfg.truth_sigma_q > 0.0;
    let mut states = vec![x0];
    for _ in birth_step..last_step {
        let prev = states.last().expect("non-empty");
        let mut x = &f * prev;
        if noisy {
            x += gaussian_noise(rng, &q);
        }
        if !inside(&Vector2::new(x[0], x[1]), cfg.area_half_width) {
            break;
        }
        states.push(x);
    }
    states
}

/// Simulated targets for the configured case.
pub fn generate_truth<R: Rng + ?Sized>(cfg: &ScenarioConfig, rng: &mut R) -> Result<GroundTruth> {
    cfg.validate()?;
    let mut targets = Vec::new();
    match cfg.case {
        Case::A => {
            let locations = cfg.case_a_birth_locations();
            if cfg.case_a_birth_steps.len() > locations.len() {
                return Err(Error::Argument(format!(
                    "{} birth steps but only {} birth locations",
                    cfg.case_a_birth_steps.len(),
                    locations.len()
                )));
            }
            for (id, (&b, p)) in cfg.case_a_birth_steps.iter().zip(&locations).enumerate() {
                if b == 0 || b > cfg.steps {
                    continue;
                }
                let heading = -p / p.norm();
                let v = heading * cfg.case_a_speed;
                let x0 = DVector::from_vec(vec![p.x, p.y, v.x, v.y]);
                // the first target leaves the scene before the death step
                let last = if id == 0 {
                    cfg.case_a_death_step.saturating_sub(1).min(cfg.steps)
                } else {
                    cfg.steps
                };
                if last < b {
                    continue;
                }
                targets.push(TargetTrack {
                    id,
                    birth_step: b,
                    states: propagate(rng, cfg, x0, b, last),
                });
            }
        }
        Case::B => {
            let a = cfg.area_half_width;
            let pos = Uniform::new_inclusive(-a, a);
            let births = Poisson::new(cfg.lambda_b.max(f64::MIN_POSITIVE)).expect("positive rate");
            let vel = Normal::new(0.0, cfg.sigma_v).map_err(|e| Error::Argument(e.to_string()))?;
            let mut id = 0;
            for k in 1..=cfg.birth_cutoff.min(cfg.steps) {
                let count = if cfg.lambda_b > 0.0 { births.sample(rng) as usize } else { 0 };
                for _ in 0..count {
                    let x0 = DVector::from_vec(vec![pos.sample(rng), pos.sample(rng), vel.sample(rng), vel.sample(rng)]);
                    targets.push(TargetTrack {
                        id,
                        birth_step: k,
                        states: propagate(rng, cfg, x0, k, cfg.steps),
                    });
                    id += 1;
                }
            }
        }
    }
    Ok(GroundTruth {
        steps: cfg.steps,
        targets,
    })
}

/// Fixed corner positions of the four sensors in case A.
pub fn case_a_sensor_positions() -> Vec<Vector2<f64>> {
    vec![
        Vector2::new(-1000.0, -1000.0),
        Vector2::new(-1000.0, 1000.0),
        Vector2::new(1000.0, -1000.0),
        Vector2::new(1000.0, 1000.0),
    ]
}

/// Moves a sensor one step; when the move would leave the area the
/// velocity turns by ±90°, whichever keeps it inside, or reverses.
pub fn sensor_move(p: Vector2<f64>, v: Vector2<f64>, dt: f64, a: f64) -> (Vector2<f64>, Vector2<f64>) {
    let next = p + v * dt;
    if inside(&next, a) {
        return (next, v);
    }
    let left = Vector2::new(-v.y, v.x);
    let right = Vector2::new(v.y, -v.x);
    for turned in [left, right, -v] {
        let n = p + turned * dt;
        if inside(&n, a) {
            return (n, turned);
        }
    }
    (p, -v)
}

/// Sensor positions at steps `1..=steps`; `out[k - 1][s]`.
pub fn sensor_trajectories<R: Rng + ?Sized>(cfg: &ScenarioConfig, rng: &mut R) -> Vec<Vec<Vector2<f64>>> {
    match cfg.case {
        Case::A => vec![case_a_sensor_positions(); cfg.steps],
        Case::B => {
            let a = cfg.area_half_width;
            let pos = Uniform::new_inclusive(-a, a);
            let angle = Uniform::new(0.0, std::f64::consts::TAU);
            let mut sensors: Vec<(Vector2<f64>, Vector2<f64>)> = (0..4)
                .map(|_| {
                    let th: f64 = angle.sample(rng);
                    (
                        Vector2::new(pos.sample(rng), pos.sample(rng)),
                        Vector2::new(th.cos(), th.sin()) * cfg.sensor_speed,
                    )
                })
                .collect();
            let mut out = Vec::with_capacity(cfg.steps);
            for k in 1..=cfg.steps {
                if k > 1 {
                    for s in sensors.iter_mut() {
                        *s = sensor_move(s.0, s.1, cfg.dt, a);
                    }
                }
                out.push(sensors.iter().map(|s| s.0).collect());
            }
            out
        }
    }
}

/// One frame per sensor at `step`: each target is detected with the
/// sensor's detection possibility read as a probability, measured with
/// Gaussian noise, and mixed with Poisson clutter centered on the sensor.
pub fn generate_measurements<R: Rng + ?Sized>(
    cfg: &ScenarioConfig,
    truth: &GroundTruth,
    sensor_positions: &[Vector2<f64>],
    step: usize,
    rng: &mut R,
) -> Vec<Vec<DVector<f64>>> {
    let noise = Normal::new(0.0, cfg.sigma_r).expect("positive sigma_r");
    let spread = Normal::new(0.0, cfg.sigma_s).expect("positive sigma_s");
    let clutter = (cfg.lambda_fa > 0.0).then(|| Poisson::new(cfg.lambda_fa).expect("positive rate"));
    let alive = truth.alive_at(step);
    sensor_positions
        .iter()
        .map(|c| {
            let mut frame = Vec::new();
            for (_, x) in &alive {
                let d2 = (x[0] - c.x).powi(2) + (x[1] - c.y).powi(2);
                let pd = (-0.5 * d2 / (cfg.sigma_s * cfg.sigma_s)).exp();
                if rng.gen::<f64>() < pd {
                    frame.push(DVector::from_vec(vec![
                        x[0] + noise.sample(rng),
                        x[1] + noise.sample(rng),
                    ]));
                }
            }
            let count = clutter.map_or(0, |p| p.sample(rng) as usize);
            for _ in 0..count {
                frame.push(DVector::from_vec(vec![c.x + spread.sample(rng), c.y + spread.sample(rng)]));
            }
            frame.shuffle(rng);
            frame
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn case_a_cardinality_profile() {
        let cfg = ScenarioConfig::case_a();
        let truth = generate_truth(&cfg, &mut ChaCha8Rng::seed_from_u64(3)).unwrap();
        assert_eq!(truth.cardinality(1), 1);
        assert_eq!(truth.cardinality(9), 1);
        assert_eq!(truth.cardinality(10), 2);
        assert_eq!(truth.cardinality(20), 3);
        assert_eq!(truth.cardinality(49), 3);
        assert_eq!(truth.cardinality(51), 2);
        assert_eq!(truth.cardinality(100), 2);
    }

    #[test]
    fn case_a_targets_head_inwards() {
        let cfg = ScenarioConfig {
            truth_sigma_q: 0.0,
            ..ScenarioConfig::case_a()
        };
        let truth = generate_truth(&cfg, &mut ChaCha8Rng::seed_from_u64(0)).unwrap();
        let t = &truth.targets[1];
        let x = t.state_at(20).unwrap();
        let start = cfg.case_a_birth_locations()[1];
        let moved = ((x[0] - start.x).powi(2) + (x[1] - start.y).powi(2)).sqrt();
        assert!((moved - 10.0 * cfg.case_a_speed).abs() < 1e-9);
        assert!(Vector2::new(x[0], x[1]).norm() < start.norm());
    }

    #[test]
    fn sensors_stay_inside() {
        let cfg = ScenarioConfig::case_b();
        let traj = sensor_trajectories(&cfg, &mut ChaCha8Rng::seed_from_u64(9));
        assert_eq!(traj.len(), cfg.steps);
        for frame in &traj {
            for p in frame {
                assert!(inside(p, cfg.area_half_width));
            }
        }
    }

    #[test]
    fn bounce_turns_a_quarter() {
        let (p, v) = sensor_move(Vector2::new(990.0, 0.0), Vector2::new(50.0, 0.0), 1.0, 1000.0);
        assert_eq!(v.dot(&Vector2::new(50.0, 0.0)), 0.0);
        assert!(inside(&p, 1000.0));
    }

    #[test]
    fn measurements_are_deterministic_per_seed() {
        let cfg = ScenarioConfig::case_a();
        let truth = generate_truth(&cfg, &mut ChaCha8Rng::seed_from_u64(5)).unwrap();
        let pos = case_a_sensor_positions();
        let a = generate_measurements(&cfg, &truth, &pos, 30, &mut ChaCha8Rng::seed_from_u64(8));
        let b = generate_measurements(&cfg, &truth, &pos, 30, &mut ChaCha8Rng::seed_from_u64(8));
        assert_eq!(a, b);
        assert_eq!(a.len(), 4);
    }
}

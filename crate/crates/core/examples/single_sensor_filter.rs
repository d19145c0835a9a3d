//! One sensor, one crossing target, clutter, and measurement-driven births.

use nalgebra::{DVector, Vector2};
use possibility_lmb::filter::{
    adaptive_birth, joint_predict_update, predict, BirthModel, MotionModel, SensorModel, UpdateConfig,
};
use possibility_lmb::labeled::LmbDensity;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal, Poisson};

fn main() -> possibility_lmb::Result<()> {
    let mut rng = ChaCha8Rng::seed_from_u64(17);
    let motion = MotionModel::constant_velocity(1.0, 2.0, 1.0, 0.05)?;
    let sensor = SensorModel::position_sensor(0, Vector2::zeros(), 5.0, 800.0, 5.0);
    let birth = BirthModel::measurement_driven(15.0);
    let cfg = UpdateConfig::default();

    let noise = Normal::new(0.0, 5.0).unwrap();
    let clutter_spread = Normal::new(0.0, 800.0).unwrap();
    let clutter_count = Poisson::new(5.0).unwrap();

    let mut target = DVector::from_vec(vec![-300.0, -200.0, 8.0, 5.0]);
    let mut state = LmbDensity::new();
    let mut z_prev: Vec<DVector<f64>> = Vec::new();
    let mut usage: Vec<f64> = Vec::new();
    for k in 1..=40u32 {
        if k > 1 {
            target[0] += target[2];
            target[1] += target[3];
        }
        let mut z = Vec::new();
        if rng.gen::<f64>() < sensor.detection_probability(&target) {
            z.push(DVector::from_vec(vec![target[0] + noise.sample(&mut rng), target[1] + noise.sample(&mut rng)]));
        }
        for _ in 0..clutter_count.sample(&mut rng) as usize {
            z.push(DVector::from_vec(vec![clutter_spread.sample(&mut rng), clutter_spread.sample(&mut rng)]));
        }

        let seeds = adaptive_birth(&z_prev, &usage, &birth, &sensor, k, 0)?;
        let births = predict(&seeds, &motion, &LmbDensity::new())?;
        let post = joint_predict_update(&state, &z, &motion, &births, &sensor, &cfg)?;
        state = post.density.prune_tracks(1e-4).reduce(&cfg.reduction)?;
        z_prev = z;
        usage = post.measurement_usage;

        if k % 5 == 0 {
            let est = state.map_estimate();
            let nearest = est
                .iter()
                .min_by(|a, b| dist(&a.1, &target).total_cmp(&dist(&b.1, &target)));
            print!("step {k:2}: truth ({:7.1}, {:7.1})", target[0], target[1]);
            match nearest {
                Some((label, x)) if dist(x, &target) < 30.0 => print!(", track {label} at ({:7.1}, {:7.1})", x[0], x[1]),
                _ => print!(", no track on the target"),
            }
            // far from the sensor a miss says little, so clutter tracks linger there
            println!(", {} other estimates", est.len() - usize::from(nearest.is_some_and(|(_, x)| dist(x, &target) < 30.0)));
        }
    }
    Ok(())
}

fn dist(a: &DVector<f64>, b: &DVector<f64>) -> f64 {
    (a[0] - b[0]).hypot(a[1] - b[1])
}

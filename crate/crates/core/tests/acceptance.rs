//! End-to-end acceptance checks. Every test prints one `PASS` or `FAIL`
//! line straight to stdout, so the lines show up even when output capture
//! is on.

mod common;

use std::io::Write;
use std::sync::OnceLock;
use std::time::{Duration, Instant};

use common::*;
use nalgebra::{DVector, Vector2};
use possibility_lmb::filter::{joint_predict_update, joint_update, predict, update, MotionModel};
use possibility_lmb::fusion::{fuse_lmb_shared_labels, fuse_tracks_detailed, FusionWeights, WeightMode};
use possibility_lmb::labeled::{delta_glmb_to_lmb, BernoulliTrack, Label, LmbDensity};
use possibility_lmb::network::{centralized_step, metropolis_weights, sensor_births, CentralizedState};
use possibility_lmb::sim::{
    case_a_sensor_positions, generate_measurements, generate_truth, monte_carlo, ospa, Method, MonteCarlo,
    ScenarioConfig, StepSummary,
};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn report(name: &str, pass: bool, detail: String) {
    let line = format!("{} {name}: {detail}\n", if pass { "PASS" } else { "FAIL" });
    std::io::stdout().lock().write_all(line.as_bytes()).unwrap();
    assert!(pass, "{name}: {detail}");
}

fn within(t: Instant, limit: Duration) -> (bool, String) {
    let e = t.elapsed();
    (e < limit, format!("{:.1} s of {} s", e.as_secs_f64(), limit.as_secs()))
}

#[test]
fn closure_through_a_case_a_run() {
    let t = Instant::now();
    let cfg = ScenarioConfig::case_a();
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let truth = generate_truth(&cfg, &mut rng).unwrap();
    let positions = case_a_sensor_positions();
    let model = cfg.network_model(&positions).unwrap();
    let n = positions.len();
    let mut state = CentralizedState::new(n);
    let mut worst = 0.0f64;
    let mut checks = 0usize;
    let mut track = |d: &LmbDensity| {
        worst = worst.max(d.closure_error());
        checks += 1;
    };
    for k in 1..=cfg.steps {
        let frames = generate_measurements(&cfg, &truth, &positions, k, &mut rng);
        let mut births = LmbDensity::new();
        for s in 0..n {
            let b = sensor_births(&model.birth, &model.motion, &model.sensors[s], s, &state.memory[s], k as u32).unwrap();
            track(&b);
            for t in b.into_tracks() {
                births.insert(t).unwrap();
            }
        }
        let predicted = predict(&state.density, &model.motion, &births).unwrap();
        track(&predicted);
        let shared = predicted.power(1.0 / n as f64).unwrap();
        track(&shared);
        for s in 0..n {
            track(&joint_update(&shared, &frames[s], &model.sensors[s], &model.update).unwrap().density);
            track(&update(&shared, &frames[s], &model.sensors[s], &model.update).unwrap());
        }
        state = centralized_step(&state, &frames, &model).unwrap();
        track(&state.density);
    }
    let (fast, time) = within(t, Duration::from_secs(60));
    report(
        "closure max(tau, gamma) = 1 after every predict and update",
        worst < 1e-9 && fast,
        format!("{checks} densities, worst {worst:.1e}, {time}"),
    );
}

#[test]
fn presence_survives_the_collapse() {
    let mut rng = ChaCha8Rng::seed_from_u64(20);
    let mut worst = 0.0f64;
    for _ in 0..200 {
        let g = random_glmb(&mut rng);
        let lmb = delta_glmb_to_lmb(&g).unwrap();
        for _ in 0..100 {
            let x = rng.gen_range(-8.0..8.0);
            worst = worst.max((lmb.presence(&DVector::from_element(1, x)).unwrap() - glmb_presence(&g, x)).abs());
        }
    }
    report(
        "delta-GLMB to LMB keeps the presence function",
        worst < 1e-10,
        format!("200 densities x 100 points, worst {worst:.1e}"),
    );
}

#[test]
fn update_matches_enumeration() {
    let t = Instant::now();
    let mut worst = 0.0f64;
    let mut moved = 0;
    for seed in 0..50u64 {
        let inst = random_instance(&mut ChaCha8Rng::seed_from_u64(seed));
        let expected = brute_force_existence(&plain(&inst.density), &points(&inst.z), &plain_sensor(&inst.sensor));
        let ranked = update(&inst.density, &inst.z, &inst.sensor, &exhaustive()).unwrap();
        let joint = joint_update(&inst.density, &inst.z, &inst.sensor, &exhaustive()).unwrap();
        worst = worst.max(max_gap(&ranked, &expected)).max(max_gap(&joint.density, &expected));
        let prior: Vec<(f64, f64)> = inst.density.tracks().map(|t| (t.tau(), t.gamma())).collect();
        if max_gap(&ranked, &prior) > 1e-3 {
            moved += 1;
        }
    }
    let (fast, time) = within(t, Duration::from_secs(120));
    report(
        "ranked update reproduces full enumeration",
        worst < 1e-9 && moved > 25 && fast,
        format!("50 instances ({moved} non-trivial), worst {worst:.1e}, {time}"),
    );
}

#[test]
fn joint_equals_sequential() {
    let motion = MotionModel::constant_velocity(1.0, 2.0, 1.0, 0.05).unwrap();
    let mut worst = 0.0f64;
    for seed in 0..50u64 {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let inst = random_instance(&mut rng);
        let birth = birth_track(&mut rng, 2);
        let joint = joint_predict_update(&inst.density, &inst.z, &motion, &birth, &inst.sensor, &exhaustive()).unwrap();
        let seq = update(&predict(&inst.density, &motion, &birth).unwrap(), &inst.z, &inst.sensor, &exhaustive()).unwrap();
        let pairs: Vec<(f64, f64)> = seq.tracks().map(|t| (t.tau(), t.gamma())).collect();
        worst = worst.max(max_gap(&joint.density, &pairs));
        for (a, b) in joint.density.tracks().zip(seq.tracks()) {
            for _ in 0..20 {
                let x = DVector::from_vec(vec![
                    rng.gen_range(-50.0..50.0),
                    rng.gen_range(-50.0..50.0),
                    rng.gen_range(-3.0..3.0),
                    rng.gen_range(-3.0..3.0),
                ]);
                worst = worst.max((a.f().eval(&x).unwrap() - b.f().eval(&x).unwrap()).abs());
            }
        }
    }
    report(
        "joint predict-update equals predict then update",
        worst < 1e-9,
        format!("50 instances, existence and spatial, worst {worst:.1e}"),
    );
}

#[test]
fn fusion_of_copies_is_identity() {
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    let tracks = (0..3u32).map(|i| {
        let comps = random_comps(&mut rng, 2);
        BernoulliTrack::new(Label::new(1, i), 1.0, rng.gen_range(0.01..1.0), to_mixture(&comps)).unwrap()
    });
    let d = LmbDensity::from_tracks(tracks).unwrap();
    let w = FusionWeights::new(vec![0.5, 0.3, 0.2], WeightMode::SumNormalized).unwrap();
    let fused = fuse_lmb_shared_labels(&[d.clone(), d.clone(), d.clone()], &w).unwrap();
    let mut worst = 0.0f64;
    for (a, b) in fused.tracks().zip(d.tracks()) {
        worst = worst.max((a.tau() - b.tau()).abs()).max((a.gamma() - b.gamma()).abs());
        for _ in 0..200 {
            let x = DVector::from_vec(vec![rng.gen_range(-6.0..6.0), rng.gen_range(-6.0..6.0)]);
            worst = worst.max((a.f().eval(&x).unwrap() - b.f().eval(&x).unwrap()).abs());
        }
    }
    report(
        "fusion (a) consensus fusion of identical densities",
        fused.len() == d.len() && worst < 1e-12,
        format!("worst {worst:.1e}"),
    );
}

#[test]
fn fused_mixture_is_the_normalized_product() {
    let mut worst = 0.0f64;
    for d in [1, 2] {
        for seed in 0..20u64 {
            let mut rng = ChaCha8Rng::seed_from_u64(100 * d as u64 + seed);
            let (ca, cb) = (random_comps(&mut rng, d), random_comps(&mut rng, d));
            let (wa, wb) = (rng.gen_range(0.2..1.0), rng.gen_range(0.2..1.0));
            let fused = fuse_tracks_detailed(&track_of(&ca, 1.0, 0.5), &track_of(&cb, 0.3, 1.0), wa, wb).unwrap();
            for _ in 0..2000 {
                let x: Vec<f64> = (0..d).map(|_| rng.gen_range(-6.0..6.0)).collect();
                let want = eval_comps(&ca, &x).powf(wa) * eval_comps(&cb, &x).powf(wb) / fused.eta_f;
                let got = fused.track.f().eval(&DVector::from_column_slice(&x)).unwrap();
                worst = worst.max((want - got).abs());
            }
        }
    }
    report(
        "fusion (b) fused mixture equals the pointwise weighted product",
        worst < 1e-8,
        format!("d = 1, 2, 20 pairs each, worst {worst:.1e}"),
    );
}

#[test]
fn agreement_is_the_supremum() {
    let mut worst = 0.0f64;
    for d in [1, 2] {
        for seed in 0..10u64 {
            let mut rng = ChaCha8Rng::seed_from_u64(1000 + 100 * d as u64 + seed);
            let (ca, cb) = (random_comps(&mut rng, d), random_comps(&mut rng, d));
            let (wa, wb) = (rng.gen_range(0.2..1.0), rng.gen_range(0.2..1.0));
            let fused = fuse_tracks_detailed(&track_of(&ca, 1.0, 1.0), &track_of(&cb, 1.0, 1.0), wa, wb).unwrap();
            let g = |x: &[f64]| eval_comps(&ca, x).powf(wa) * eval_comps(&cb, x).powf(wb);
            worst = worst.max((grid_sup(&g, d, -8.0, 8.0) - fused.eta_f).abs());
        }
    }
    report(
        "fusion (c) agreement equals the grid supremum",
        worst < 1e-6,
        format!("d = 1, 2, 10 pairs each, worst {worst:.1e}"),
    );
}

#[test]
fn metropolis_matrices() {
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let mut worst = 0.0f64;
    let mut negative = false;
    for _ in 0..20 {
        let g = random_connected_graph(&mut rng, 10);
        let w = metropolis_weights(&g).unwrap();
        let n = g.node_count();
        for i in 0..n {
            worst = worst.max((w.row(i).sum() - 1.0).abs()).max((w.column(i).sum() - 1.0).abs());
            for j in 0..n {
                worst = worst.max((w[(i, j)] - w[(j, i)]).abs());
                negative |= w[(i, j)] < 0.0;
            }
        }
    }
    report(
        "Metropolis weights symmetric and doubly stochastic",
        worst < 1e-12 && !negative,
        format!("20 graphs, worst {worst:.1e}"),
    );
}

#[test]
fn ospa_examples() {
    let far = [Vector2::new(10.0, 0.0), Vector2::new(-400.0, 20.0)];
    let results = [
        ospa(&[], &[], 100.0, 2.0).unwrap(),
        ospa(&[], &far, 100.0, 2.0).unwrap(),
        ospa(&[Vector2::new(0.0, 0.0)], &[Vector2::new(3.0, 4.0)], 100.0, 2.0).unwrap(),
    ];
    report(
        "OSPA worked examples",
        results == [0.0, 100.0, 5.0],
        format!("empty {}, one-sided {}, single pair {}", results[0], results[1], results[2]),
    );
}

const RUNS: usize = 25;

fn case_a() -> ScenarioConfig {
    ScenarioConfig {
        mc_runs: RUNS,
        ..ScenarioConfig::case_a()
    }
}

fn late(summary: &[StepSummary]) -> impl Iterator<Item = &StepSummary> {
    summary.iter().filter(|s| (60..=100).contains(&s.step))
}

fn late_ospa(summary: &[StepSummary]) -> f64 {
    let v: Vec<f64> = late(summary).map(|s| s.ospa_mean).collect();
    v.iter().sum::<f64>() / v.len() as f64
}

fn centralized() -> &'static (MonteCarlo, Duration) {
    static CELL: OnceLock<(MonteCarlo, Duration)> = OnceLock::new();
    CELL.get_or_init(|| {
        let t = Instant::now();
        let mc = monte_carlo(&case_a(), Method::Centralized).unwrap();
        (mc, t.elapsed())
    })
}

#[test]
fn case_a_centralized() {
    let (mc, elapsed) = centralized();
    let card_gap = late(&mc.summary)
        .map(|s| (s.card_est_mean - s.card_true_mean).abs())
        .fold(0.0, f64::max);
    let o = late_ospa(&mc.summary);
    let fast = *elapsed < Duration::from_secs(600);
    report(
        "Case A centralized, 25 runs, steps 60-100",
        card_gap <= 0.5 && o < 30.0 && fast,
        format!(
            "worst cardinality gap {card_gap:.2}, mean OSPA {o:.2} m, {:.1} s",
            elapsed.as_secs_f64()
        ),
    );
}

#[test]
fn case_a_distributed_tracks_centralized() {
    let t = Instant::now();
    let dist = monte_carlo(&case_a(), Method::Distributed).unwrap();
    let elapsed = t.elapsed();
    let central = late_ospa(&centralized().0.summary);
    let o = late_ospa(&dist.summary);
    report(
        "Case A distributed OSPA within 15 m of centralized",
        o <= central + 15.0,
        format!(
            "distributed {o:.2} m, centralized {central:.2} m, {:.1} s",
            elapsed.as_secs_f64()
        ),
    );
}

#[test]
fn full_scale_limitation_is_documented() {
    let readme = std::fs::read_to_string(concat!(env!("CARGO_MANIFEST_DIR"), "/../../README.md")).unwrap_or_default();
    let stated = readme.contains("not numerically reproducible");
    report(
        "full-scale curves documented as not reproducible",
        stated,
        "README.md states the limitation".into(),
    );
}

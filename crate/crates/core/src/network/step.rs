use std::collections::BTreeSet;

use nalgebra::{DMatrix, DVector, Vector2};
use rayon::prelude::*;

use crate::assignment::best_assignment;
use crate::error::{Error, Result};
use crate::filter::{
    adaptive_birth, fixed_birth, joint_update, predict, predict_discounted, BirthMode, BirthModel, JointPosterior,
    MotionModel, SensorModel, UpdateConfig,
};
use crate::fusion::{
    fuse_lmb_shared_labels, match_and_fuse, FusionWeights, MissedDetectionModel, WeightMode,
};
use crate::labeled::{BernoulliTrack, Label, LmbDensity, EXISTENCE_FLOOR};
use crate::possibility::MaxMixture;

use super::graph::{metropolis_weights, SensorGraph};

/// Label indices of measurement-driven births are `(sensor + 1) * STRIDE + j`,
/// keeping births from different sensors apart.
pub const BIRTH_INDEX_STRIDE: u32 = 1000;

/// Axis-aligned surveillance region in position space.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Region {
    pub min: Vector2<f64>,
    pub max: Vector2<f64>,
}

impl Region {
    /// The square `[-a, a]²`.
    pub fn square(a: f64) -> Self {
        Self {
            min: Vector2::new(-a, -a),
            max: Vector2::new(a, a),
        }
    }

    /// Whether the position part of a state lies inside.
    pub fn contains(&self, x: &DVector<f64>) -> bool {
        (0..2).all(|i| x[i] >= self.min[i] && x[i] <= self.max[i])
    }
}

fn restrict(d: LmbDensity, region: Option<&Region>) -> LmbDensity {
    let Some(r) = region else {
        return d;
    };
    let mut out = LmbDensity::new();
    for t in d.into_tracks() {
        if r.contains(t.dominant_mean()) {
            out.replace(t);
        }
    }
    out
}

/// Everything a network step needs besides the measurements.
#[derive(Clone, Debug)]
pub struct NetworkModel {
    pub motion: MotionModel,
    pub sensors: Vec<SensorModel>,
    pub birth: BirthModel,
    pub update: UpdateConfig,
    /// Tracks whose existence possibility drops below this are removed.
    pub existence_threshold: f64,
    /// Centralized only: raise the shared prediction to `1/N` before the
    /// `N` local updates so the fused product counts it once.
    pub temper_shared_prior: bool,
    pub missed: MissedDetectionModel,
    /// Pairs with agreement below this are never matched.
    pub match_threshold: f64,
    /// When set, births are only seeded inside the region and tracks whose
    /// estimate leaves it are dropped.
    pub region: Option<Region>,
}

impl NetworkModel {
    pub fn new(motion: MotionModel, sensors: Vec<SensorModel>, birth: BirthModel) -> Self {
        Self {
            motion,
            sensors,
            birth,
            update: UpdateConfig::default(),
            existence_threshold: 1e-4,
            temper_shared_prior: true,
            missed: MissedDetectionModel::default(),
            match_threshold: 1e-2,
            region: None,
        }
    }
}

/// Consensus settings of the distributed scheme.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ConsensusConfig {
    pub iterations: usize,
    /// Prediction discount; `None` uses `1 / |V_i|` per node.
    pub discount: Option<f64>,
}

impl Default for ConsensusConfig {
    fn default() -> Self {
        Self {
            iterations: 3,
            discount: None,
        }
    }
}

/// What a sensor keeps between steps to seed measurement-driven births.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct LocalMemory {
    pub measurements: Vec<DVector<f64>>,
    pub usage: Vec<f64>,
}

#[derive(Clone, Debug, Default)]
pub struct CentralizedState {
    pub density: LmbDensity,
    pub memory: Vec<LocalMemory>,
    pub step: u32,
}

impl CentralizedState {
    pub fn new(sensors: usize) -> Self {
        Self {
            density: LmbDensity::new(),
            memory: vec![LocalMemory::default(); sensors],
            step: 0,
        }
    }

    pub fn estimates(&self) -> Vec<(Label, DVector<f64>)> {
        self.density.map_estimate()
    }
}

#[derive(Clone, Debug, Default)]
pub struct NodeState {
    pub density: LmbDensity,
    pub memory: LocalMemory,
}

#[derive(Clone, Debug, Default)]
pub struct DistributedState {
    pub nodes: Vec<NodeState>,
    pub step: u32,
}

impl DistributedState {
    pub fn new(nodes: usize) -> Self {
        Self {
            nodes: vec![NodeState::default(); nodes],
            step: 0,
        }
    }
}

fn shared_births(model: &NetworkModel, k: u32) -> Result<LmbDensity> {
    match model.birth.mode {
        BirthMode::Fixed { .. } => fixed_birth(&model.birth, k, 0),
        BirthMode::MeasurementDriven { .. } => Ok(LmbDensity::new()),
    }
}

/// Births of sensor `s` seeded by its previous frame and moved to step `k`.
pub fn sensor_births(
    birth: &BirthModel,
    motion: &MotionModel,
    sensor: &SensorModel,
    s: usize,
    memory: &LocalMemory,
    k: u32,
) -> Result<LmbDensity> {
    if !matches!(birth.mode, BirthMode::MeasurementDriven { .. }) || memory.measurements.is_empty() {
        return Ok(LmbDensity::new());
    }
    let offset = (s as u32 + 1) * BIRTH_INDEX_STRIDE;
    let seeded = adaptive_birth(&memory.measurements, &memory.usage, birth, sensor, k, offset)?;
    predict(&seeded, motion, &LmbDensity::new())
}

fn union(a: LmbDensity, b: LmbDensity) -> Result<LmbDensity> {
    let mut out = a;
    for t in b.into_tracks() {
        out.insert(t)?;
    }
    Ok(out)
}

fn local_update(
    model: &NetworkModel,
    prior: &LmbDensity,
    births: LmbDensity,
    z: &[DVector<f64>],
    sensor: &SensorModel,
) -> Result<JointPosterior> {
    joint_update(&union(prior.clone(), births)?, z, sensor, &model.update)
}

fn finish(d: LmbDensity, model: &NetworkModel) -> Result<LmbDensity> {
    restrict(d, model.region.as_ref()).prune_tracks(model.existence_threshold).reduce(&model.update.reduction)
}

/// One step of the centralized scheme. The sensors' birth seeds are matched
/// across sensors and joined to the shared prediction, every sensor updates
/// the whole prediction, and the posteriors are fused label-wise with unit
/// weights.
pub fn centralized_step(
    state: &CentralizedState,
    z_all: &[Vec<DVector<f64>>],
    model: &NetworkModel,
) -> Result<CentralizedState> {
    let n = model.sensors.len();
    if n == 0 || z_all.len() != n || state.memory.len() != n {
        return Err(Error::Shape(format!(
            "{n} sensors, {} frames, {} memories",
            z_all.len(),
            state.memory.len()
        )));
    }
    let k = state.step + 1;
    let seeds = (0..n)
        .map(|s| {
            sensor_births(&model.birth, &model.motion, &model.sensors[s], s, &state.memory[s], k)
                .map(|b| restrict(b, model.region.as_ref()))
        })
        .collect::<Result<Vec<_>>>()?;
    let births = union(shared_births(model, k)?, fuse_births(seeds, model)?)?;
    let predicted = predict(&state.density, &model.motion, &births)?;
    let shared = if model.temper_shared_prior && n > 1 {
        predicted.power(1.0 / n as f64)?
    } else {
        predicted
    };

    let posts: Vec<JointPosterior> = (0..n)
        .into_par_iter()
        .map(|s| joint_update(&shared, &z_all[s], &model.sensors[s], &model.update))
        .collect::<Result<Vec<_>>>()?;

    let mut densities = Vec::with_capacity(n);
    let mut memory = Vec::with_capacity(n);
    for (s, post) in posts.into_iter().enumerate() {
        densities.push(post.density);
        memory.push(LocalMemory {
            measurements: z_all[s].clone(),
            usage: post.measurement_usage,
        });
    }
    Ok(CentralizedState {
        density: finish(fold_fusion(&densities, &vec![1.0; n], model)?, model)?,
        memory,
        step: k,
    })
}

/// Sequential label-wise fusion with a reduction after every fold.
fn fold_fusion(ds: &[LmbDensity], weights: &[f64], model: &NetworkModel) -> Result<LmbDensity> {
    let mut acc = ds[0].power(weights[0])?;
    for (d, &w) in ds.iter().zip(weights).skip(1) {
        let pair = FusionWeights::new(vec![1.0, w], WeightMode::MaxNormalized)?;
        acc = fuse_lmb_shared_labels(&[acc, d.clone()], &pair)?.reduce(&model.update.reduction)?;
    }
    Ok(acc)
}

/// Matches each sensor's birth seeds against those already merged, so a
/// target seen by several sensors yields one birth track.
fn fuse_births(birth_posts: Vec<LmbDensity>, model: &NetworkModel) -> Result<LmbDensity> {
    let mut iter = birth_posts.into_iter().enumerate();
    let Some((_, mut acc)) = iter.next() else {
        return Ok(LmbDensity::new());
    };
    let mut seen = vec![0usize];
    for (s, births) in iter {
        if acc.is_empty() && births.is_empty() {
            seen.push(s);
            continue;
        }
        let sensors = &model.sensors;
        let df_acc = |x: &DVector<f64>| seen.iter().map(|&i| sensors[i].detect_fail(x)).product::<f64>();
        let df_new = |x: &DVector<f64>| sensors[s].detect_fail(x);
        let (fused, _) = match_and_fuse(&acc, &births, (1.0, 1.0), &model.missed, &df_acc, &df_new, model.match_threshold)?;
        acc = fused.reduce(&model.update.reduction)?;
        seen.push(s);
    }
    Ok(acc)
}

/// Relabels tracks of `other` whose labels are unknown to `reference` onto
/// reference labels that `other` lacks, pairing by spatial agreement.
pub fn align_labels(reference: &LmbDensity, other: &LmbDensity, threshold: f64) -> Result<LmbDensity> {
    let ref_only: Vec<&BernoulliTrack> = reference.tracks().filter(|t| !other.contains(&t.label())).collect();
    let other_only: Vec<&BernoulliTrack> = other.tracks().filter(|t| !reference.contains(&t.label())).collect();
    if ref_only.is_empty() || other_only.is_empty() {
        return Ok(other.clone());
    }
    let (m, n) = (other_only.len(), ref_only.len());
    let mut cost = DMatrix::from_element(m, n + m, f64::INFINITY);
    for (i, o) in other_only.iter().enumerate() {
        for (j, r) in ref_only.iter().enumerate() {
            if o.f().product_sup_bound(r.f(), 1.0, 1.0)? < threshold {
                continue;
            }
            let eta = o.f().product_supremum(r.f())?;
            if eta >= threshold {
                cost[(i, j)] = -eta.ln();
            }
        }
        cost[(i, n + i)] = -threshold.ln();
    }
    let a = best_assignment(&cost)?.expect("miss columns keep the problem feasible");
    let mut out = other.clone();
    for (i, &col) in a.cols.iter().enumerate() {
        if col < n {
            let t = out.remove(&other_only[i].label()).expect("track came from other");
            out.insert(t.with_label(ref_only[col].label()))?;
        }
    }
    Ok(out)
}

/// One consensus sweep at node `i`: the neighbourhood's states, aligned to
/// node `i`'s labels, fused with Metropolis weights. A track missing at a
/// neighbour enters through the missed-detection model of that neighbour's
/// sensor.
fn consensus_at(
    i: usize,
    states: &[LmbDensity],
    graph: &SensorGraph,
    weights: &DMatrix<f64>,
    model: &NetworkModel,
) -> Result<LmbDensity> {
    let mut order = vec![i];
    order.extend(graph.neighborhood(i).into_iter().filter(|&j| j != i));
    // Neighbours are aligned in turn against node i's state grown by the
    // tracks of the neighbours already aligned, so that one target born at
    // two neighbours ends up under one label.
    let mut reference = states[i].clone();
    let mut aligned = vec![states[i].clone()];
    for &j in &order[1..] {
        let a = align_labels(&reference, &states[j], model.match_threshold)?;
        for t in a.tracks() {
            if !reference.contains(&t.label()) {
                reference.insert(t.clone())?;
            }
        }
        aligned.push(a);
    }
    let labels: BTreeSet<Label> = aligned.iter().flat_map(|d| d.labels()).collect();
    let mut out = LmbDensity::new();
    for label in labels {
        let anchor = aligned
            .iter()
            .find_map(|d| d.get(&label))
            .expect("label came from some state")
            .dominant_mean()
            .clone();
        let (mut ln_tau, mut ln_gamma) = (0.0, 0.0);
        let mut f: Option<MaxMixture> = None;
        for (d, &j) in aligned.iter().zip(&order) {
            let w = weights[(i, j)];
            match d.get(&label) {
                Some(t) => {
                    ln_tau += w * t.tau().ln();
                    ln_gamma += w * t.gamma().ln();
                    let p = t.f().power(w)?;
                    f = Some(match f {
                        None => p,
                        Some(acc) => acc.product_reduced(&p, &model.update.reduction)?,
                    });
                }
                None => {
                    let df = model.missed.r1 * model.sensors[j].detect_fail(&anchor);
                    ln_tau += w * model.missed.r0.ln();
                    ln_gamma += w * df.max(EXISTENCE_FLOOR).ln();
                }
            }
        }
        let f = f.expect("at least one state holds the label");
        ln_gamma += f.supremum()?.ln();
        let top = ln_tau.max(ln_gamma);
        out.insert(BernoulliTrack::normalized(
            label,
            (ln_tau - top).exp(),
            (ln_gamma - top).exp(),
            f,
        )?)?;
    }
    Ok(out)
}

/// One step of the distributed scheme: discounted local prediction and
/// update at every node, then `cfg.iterations` synchronous consensus sweeps
/// over the graph with Metropolis weights.
pub fn distributed_step(
    state: &DistributedState,
    z_all: &[Vec<DVector<f64>>],
    model: &NetworkModel,
    graph: &SensorGraph,
    cfg: &ConsensusConfig,
) -> Result<DistributedState> {
    let n = model.sensors.len();
    if n == 0 || z_all.len() != n || state.nodes.len() != n || graph.node_count() != n {
        return Err(Error::Shape(format!(
            "{n} sensors, {} frames, {} nodes, graph of {}",
            z_all.len(),
            state.nodes.len(),
            graph.node_count()
        )));
    }
    if cfg.iterations == 0 {
        return Err(Error::Argument("consensus needs at least one iteration".into()));
    }
    let weights = metropolis_weights(graph)?;
    let k = state.step + 1;
    let fixed = shared_births(model, k)?;

    let locals: Vec<(LmbDensity, LocalMemory)> = (0..n)
        .into_par_iter()
        .map(|i| {
            let sensor = &model.sensors[i];
            let omega = cfg
                .discount
                .unwrap_or(1.0 / graph.neighborhood(i).len() as f64);
            let prior = predict_discounted(&state.nodes[i].density, &model.motion, &fixed, omega)?;
            let births = restrict(
                sensor_births(&model.birth, &model.motion, sensor, i, &state.nodes[i].memory, k)?,
                model.region.as_ref(),
            );
            let post = local_update(model, &prior, births, &z_all[i], sensor)?;
            Ok((
                post.density,
                LocalMemory {
                    measurements: z_all[i].clone(),
                    usage: post.measurement_usage,
                },
            ))
        })
        .collect::<Result<Vec<_>>>()?;
    let (mut states, memories): (Vec<LmbDensity>, Vec<LocalMemory>) = locals.into_iter().unzip();

    for _ in 0..cfg.iterations {
        states = (0..n)
            .into_par_iter()
            .map(|i| consensus_at(i, &states, graph, &weights, model))
            .collect::<Result<Vec<_>>>()?;
    }

    let nodes = states
        .into_iter()
        .zip(memories)
        .map(|(d, memory)| {
            Ok(NodeState {
                density: finish(d, model)?,
                memory,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(DistributedState { nodes, step: k })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::possibility::GaussianComponent;
    use nalgebra::dvector;

    fn one_track(label: Label, tau: f64, gamma: f64, x: f64, y: f64) -> BernoulliTrack {
        let cov = DMatrix::from_diagonal(&dvector![25.0, 25.0, 4.0, 4.0]);
        let f = MaxMixture::single(GaussianComponent::new(1.0, dvector![x, y, 1.0, 0.0], cov).unwrap());
        BernoulliTrack::new(label, tau, gamma, f).unwrap()
    }

    fn model(sensors: usize) -> NetworkModel {
        let motion = MotionModel::constant_velocity(1.0, 2.0, 1.0, 0.05).unwrap();
        let sensors = (0..sensors)
            .map(|i| SensorModel::position_sensor(i, Vector2::new(300.0, 300.0), 5.0, 400.0, 2.0))
            .collect();
        NetworkModel::new(motion, sensors, BirthModel::measurement_driven(10.0))
    }

    fn prior() -> LmbDensity {
        LmbDensity::from_tracks([
            one_track(Label::new(1, 0), 0.2, 1.0, 0.0, 0.0),
            one_track(Label::new(1, 1), 1.0, 0.4, 80.0, -40.0),
        ])
        .unwrap()
    }

    fn frame() -> Vec<DVector<f64>> {
        vec![dvector![1.5, -0.5], dvector![200.0, 150.0]]
    }

    fn same(a: &LmbDensity, b: &LmbDensity, tol: f64) {
        assert_eq!(a.labels().collect::<Vec<_>>(), b.labels().collect::<Vec<_>>());
        for (s, t) in a.tracks().zip(b.tracks()) {
            assert!((s.tau() - t.tau()).abs() < tol && (s.gamma() - t.gamma()).abs() < tol);
            for x in [dvector![0.0, 0.0, 1.0, 0.0], dvector![3.0, -2.0, 1.0, 0.5], dvector![81.0, -40.0, 1.0, 0.0]] {
                assert!((s.f().eval(&x).unwrap() - t.f().eval(&x).unwrap()).abs() < tol);
            }
        }
    }

    #[test]
    fn region_keeps_inside_tracks() {
        let r = Region::square(50.0);
        assert!(r.contains(&dvector![50.0, -50.0, 9.0, 9.0]));
        assert!(!r.contains(&dvector![50.1, 0.0, 0.0, 0.0]));
        let kept = restrict(prior(), Some(&r));
        assert_eq!(kept.labels().collect::<Vec<_>>(), vec![Label::new(1, 0)]);
        assert_eq!(restrict(prior(), None).len(), 2);
    }

    #[test]
    fn single_sensor_centralized_is_the_plain_filter() {
        let m = model(1);
        let state = CentralizedState {
            density: prior(),
            ..CentralizedState::new(1)
        };
        let got = centralized_step(&state, &[frame()], &m).unwrap();
        let predicted = predict(&prior(), &m.motion, &LmbDensity::new()).unwrap();
        let post = joint_update(&predicted, &frame(), &m.sensors[0], &m.update).unwrap();
        let want = post.density.prune_tracks(m.existence_threshold).reduce(&m.update.reduction).unwrap();
        same(&got.density, &want, 1e-12);
        assert_eq!(got.memory[0].usage, post.measurement_usage);
    }

    #[test]
    fn two_agreeing_sensors_raise_existence() {
        let one = centralized_step(
            &CentralizedState {
                density: prior(),
                ..CentralizedState::new(1)
            },
            &[frame()],
            &model(1),
        )
        .unwrap();
        let mut m2 = model(2);
        m2.temper_shared_prior = false;
        let two = centralized_step(
            &CentralizedState {
                density: prior(),
                ..CentralizedState::new(2)
            },
            &[frame(), frame()],
            &m2,
        )
        .unwrap();
        let l = Label::new(1, 0);
        let (g1, g2) = (one.density.get(&l).unwrap(), two.density.get(&l).unwrap());
        assert!(g2.gamma() >= g1.gamma());
        assert!(g2.tau() <= g1.tau());
    }

    #[test]
    fn silent_sensor_still_fuses() {
        let out = centralized_step(
            &CentralizedState {
                density: prior(),
                ..CentralizedState::new(2)
            },
            &[frame(), Vec::new()],
            &model(2),
        )
        .unwrap();
        assert!(out.density.closure_error() < 1e-12);
        assert!(out.density.contains(&Label::new(1, 0)));
    }

    #[test]
    fn single_node_distributed_is_the_discounted_filter() {
        let m = model(1);
        let g = SensorGraph::new(1, []).unwrap();
        let mut state = DistributedState::new(1);
        state.nodes[0].density = prior();
        let got = distributed_step(&state, &[frame()], &m, &g, &ConsensusConfig::default()).unwrap();
        let predicted = predict_discounted(&prior(), &m.motion, &LmbDensity::new(), 1.0).unwrap();
        let post = joint_update(&predicted, &frame(), &m.sensors[0], &m.update).unwrap();
        let want = post.density.prune_tracks(m.existence_threshold).reduce(&m.update.reduction).unwrap();
        same(&got.nodes[0].density, &want, 1e-12);
    }

    #[test]
    fn identical_nodes_are_a_fixed_point() {
        let m = model(3);
        let g = SensorGraph::complete(3).unwrap();
        let w = metropolis_weights(&g).unwrap();
        let states = vec![prior(); 3];
        for i in 0..3 {
            same(&consensus_at(i, &states, &g, &w, &m).unwrap(), &prior(), 1e-12);
        }
    }

    #[test]
    fn sweeps_pull_a_line_together() {
        let m = model(3);
        let g = SensorGraph::line(3).unwrap();
        let w = metropolis_weights(&g).unwrap();
        let l = Label::new(1, 0);
        let mut states: Vec<LmbDensity> = [(1.0, 0.05), (0.3, 1.0), (1.0, 0.6)]
            .iter()
            .map(|&(tau, gamma)| LmbDensity::from_tracks([one_track(l, tau, gamma, 0.0, 0.0)]).unwrap())
            .collect();
        let spread = |s: &[LmbDensity]| {
            let r: Vec<f64> = s
                .iter()
                .map(|d| {
                    let t = d.get(&l).unwrap();
                    t.gamma().ln() - t.tau().ln()
                })
                .collect();
            r.iter().cloned().fold(f64::MIN, f64::max) - r.iter().cloned().fold(f64::MAX, f64::min)
        };
        let first = spread(&states);
        let mut last = first;
        for _ in 0..8 {
            states = (0..3).map(|i| consensus_at(i, &states, &g, &w, &m).unwrap()).collect();
            let now = spread(&states);
            assert!(now <= last + 1e-12, "{now} after {last}");
            last = now;
        }
        assert!(last < 0.1 * first, "{last} from {first}");
    }

    #[test]
    fn alignment_relabels_a_shared_birth() {
        let reference = LmbDensity::from_tracks([one_track(Label::new(2, 1001), 1.0, 0.01, 10.0, 10.0)]).unwrap();
        let other = LmbDensity::from_tracks([
            one_track(Label::new(2, 2004), 1.0, 0.01, 12.0, 9.0),
            one_track(Label::new(2, 2005), 1.0, 0.01, 400.0, 9.0),
        ])
        .unwrap();
        let a = align_labels(&reference, &other, 1e-2).unwrap();
        let labels: Vec<Label> = a.labels().collect();
        assert_eq!(labels, vec![Label::new(2, 1001), Label::new(2, 2005)]);
    }
}

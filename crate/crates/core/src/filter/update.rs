use std::collections::BTreeMap;
use std::sync::Arc;

use nalgebra::{DMatrix, DVector};

use crate::assignment::ranked_assignments;
use crate::error::{Error, Result};
use crate::labeled::{
    delta_glmb_to_lmb, lmb_to_delta_glmb, BernoulliTrack, DeltaGlmb, GlmbHypothesis, Label, LmbDensity,
    EXISTENCE_FLOOR,
};
use crate::possibility::{factorize, mahalanobis_sq, symmetrize, GaussianComponent, MaxMixture, MixtureReduction};

use super::models::{MotionModel, SensorModel};
use super::predict::predict;

/// Truncation and reduction settings shared by the update paths.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct UpdateConfig {
    /// Total number of posterior hypotheses requested.
    pub max_hypotheses: usize,
    /// A component and a measurement are paired only if the predicted
    /// measurement possibility exceeds this value.
    pub gate: f64,
    pub reduction: MixtureReduction,
}

impl Default for UpdateConfig {
    fn default() -> Self {
        Self {
            max_hypotheses: 100,
            gate: 1e-4,
            reduction: MixtureReduction::default(),
        }
    }
}

/// Log-likelihood-ratio and normalized posterior mixture for one
/// (track, outcome) pair.
#[derive(Clone, Debug)]
pub struct Outcome {
    pub ln_eta: f64,
    pub f: Arc<MaxMixture>,
}

/// Every single-track update outcome against one measurement frame.
#[derive(Clone, Debug)]
pub struct TrackOutcomes {
    /// `None` when the detection-failure possibility vanishes everywhere.
    pub miss: Option<Outcome>,
    /// One entry per measurement; `None` for gated-out pairs.
    pub detections: Vec<Option<Outcome>>,
}

fn outcome_from_log_weights(parts: Vec<(f64, DVector<f64>, DMatrix<f64>)>, offset: f64) -> Result<Option<Outcome>> {
    let top = parts.iter().map(|p| p.0).fold(f64::NEG_INFINITY, f64::max);
    if !top.is_finite() {
        return Ok(None);
    }
    let mut comps = Vec::with_capacity(parts.len());
    for (lw, mean, cov) in parts {
        let w = (lw - top).exp();
        if w > 0.0 {
            comps.push(GaussianComponent::new(w, mean, cov)?);
        }
    }
    Ok(Some(Outcome {
        ln_eta: top + offset,
        f: Arc::new(MaxMixture::new(comps)?),
    }))
}

/// Missed-detection outcome: each component weight is scaled by the
/// detection-failure possibility at the component mean.
pub fn miss_outcome(f: &MaxMixture, sensor: &SensorModel) -> Result<Option<Outcome>> {
    let parts = f
        .components()
        .iter()
        .map(|c| {
            let df = sensor.detect_fail(c.mean());
            (c.weight().ln() + df.ln(), c.mean().clone(), c.cov().clone())
        })
        .collect();
    outcome_from_log_weights(parts, 0.0)
}

/// Detection outcome for measurement `z`: Kalman-form posterior of every
/// admissible component, with `ln η = ln max(w·g) + ln d_s − ln κ(z)`.
pub fn detection_outcome(f: &MaxMixture, z: &DVector<f64>, sensor: &SensorModel, gate: f64) -> Result<Option<Outcome>> {
    let h = &sensor.h;
    let mut parts = Vec::new();
    for c in f.components() {
        let hs = h * c.cov();
        let s = &hs * h.transpose() + &sensor.r;
        let chol = factorize(&s)?;
        let innov = z - h * c.mean();
        let g = (-0.5 * mahalanobis_sq(&chol, &innov)).exp();
        if !(g > gate) {
            continue;
        }
        let gain = chol.solve(&hs).transpose();
        let mean = c.mean() + &gain * innov;
        let ikh = DMatrix::identity(c.dim(), c.dim()) - &gain * h;
        let cov = symmetrize(&(&ikh * c.cov() * ikh.transpose() + &gain * &sensor.r * gain.transpose()));
        parts.push((c.weight().ln() + g.ln(), mean, cov));
    }
    let offset = sensor.detect_success.ln() - sensor.clutter_possibility(z).ln();
    outcome_from_log_weights(parts, offset)
}

pub fn track_outcomes(t: &BernoulliTrack, z: &[DVector<f64>], sensor: &SensorModel, gate: f64) -> Result<TrackOutcomes> {
    Ok(TrackOutcomes {
        miss: miss_outcome(t.f(), sensor)?,
        detections: z
            .iter()
            .map(|zj| detection_outcome(t.f(), zj, sensor, gate))
            .collect::<Result<Vec<_>>>()?,
    })
}

fn cost(o: &Option<Outcome>) -> f64 {
    o.as_ref().map_or(f64::INFINITY, |o| -o.ln_eta)
}

fn check_measurements(z: &[DVector<f64>], sensor: &SensorModel) -> Result<()> {
    sensor.validate()?;
    if let Some(bad) = z.iter().find(|zj| zj.len() != sensor.h.nrows()) {
        return Err(Error::Shape(format!("measurement of length {}", bad.len())));
    }
    Ok(())
}

/// Measurement update through the δ-GLMB expansion of `d`: the prior's
/// heaviest label subsets are each extended by their best association maps
/// (budget proportional to the subset weight, at least one), and the
/// normalized posterior is collapsed back to an LMB.
pub fn update(d: &LmbDensity, z: &[DVector<f64>], sensor: &SensorModel, cfg: &UpdateConfig) -> Result<LmbDensity> {
    check_measurements(z, sensor)?;
    let tracks: Vec<&BernoulliTrack> = d.tracks().collect();
    let index: BTreeMap<Label, usize> = tracks.iter().enumerate().map(|(i, t)| (t.label(), i)).collect();
    let outcomes = tracks
        .iter()
        .map(|t| track_outcomes(t, z, sensor, cfg.gate))
        .collect::<Result<Vec<_>>>()?;
    let prior = lmb_to_delta_glmb(d, cfg.max_hypotheses)?;
    let total: f64 = prior.hypotheses.iter().map(|h| h.weight).sum();
    let m = z.len();

    let mut posterior: Vec<(f64, BTreeMap<Label, usize>, BTreeMap<Label, Arc<MaxMixture>>)> = Vec::new();
    for h in &prior.hypotheses {
        let rows: Vec<usize> = h.per_label_f.keys().map(|l| index[l]).collect();
        let r = rows.len();
        let budget = ((cfg.max_hypotheses as f64 * h.weight / total).round() as usize).max(1);
        let mut c = DMatrix::from_element(r, m + r, f64::INFINITY);
        for (i, &ti) in rows.iter().enumerate() {
            for j in 0..m {
                c[(i, j)] = cost(&outcomes[ti].detections[j]);
            }
            c[(i, m + i)] = cost(&outcomes[ti].miss);
        }
        for a in ranked_assignments(&c, budget)? {
            let mut assoc = BTreeMap::new();
            let mut per_label_f = BTreeMap::new();
            for (i, &col) in a.cols.iter().enumerate() {
                let t = &outcomes[rows[i]];
                let label = tracks[rows[i]].label();
                let (meas, o) = if col < m {
                    (col + 1, t.detections[col].as_ref())
                } else {
                    (0, t.miss.as_ref())
                };
                assoc.insert(label, meas);
                per_label_f.insert(label, Arc::clone(&o.expect("finite cost implies an outcome").f));
            }
            posterior.push((h.weight.ln() - a.cost, assoc, per_label_f));
        }
    }
    let top = posterior.iter().map(|p| p.0).fold(f64::NEG_INFINITY, f64::max);
    if !top.is_finite() {
        return Err(Error::DegenerateUpdate);
    }
    let glmb = DeltaGlmb::new(
        posterior
            .into_iter()
            .map(|(lw, assoc, per_label_f)| GlmbHypothesis {
                weight: (lw - top).exp(),
                assoc,
                per_label_f,
            })
            .filter(|h| h.weight > 0.0)
            .collect(),
    );
    let mut out = delta_glmb_to_lmb(&glmb)?.reduce(&cfg.reduction)?;
    keep_label_space(&mut out, &tracks)?;
    Ok(out)
}

/// Labels that appear in no surviving hypothesis keep their prior mixture
/// with the floor existence possibility.
fn keep_label_space(out: &mut LmbDensity, tracks: &[&BernoulliTrack]) -> Result<()> {
    for t in tracks {
        if !out.contains(&t.label()) {
            out.insert(BernoulliTrack::new(t.label(), 1.0, EXISTENCE_FLOOR, t.f().clone())?)?;
        }
    }
    Ok(())
}

/// Posterior of the joint update and how strongly each measurement was
/// claimed by existing tracks.
#[derive(Clone, Debug)]
pub struct JointPosterior {
    pub density: LmbDensity,
    /// Per measurement: the heaviest normalized hypothesis assigning it.
    pub measurement_usage: Vec<f64>,
}

fn find(parent: &mut [usize], mut i: usize) -> usize {
    while parent[i] != i {
        parent[i] = parent[parent[i]];
        i = parent[i];
    }
    i
}

/// Update that treats the predicted LMB as a single hypothesis: every track
/// is assigned to a measurement, a miss, or non-existence in one ranked
/// assignment. Tracks that share no gated measurement are solved
/// independently and their collapsed posteriors joined.
pub fn joint_update(d: &LmbDensity, z: &[DVector<f64>], sensor: &SensorModel, cfg: &UpdateConfig) -> Result<JointPosterior> {
    check_measurements(z, sensor)?;
    if cfg.max_hypotheses == 0 {
        return Err(Error::Argument("max_hypotheses must be at least 1".into()));
    }
    let tracks: Vec<&BernoulliTrack> = d.tracks().collect();
    let n = tracks.len();
    let m = z.len();
    let outcomes = tracks
        .iter()
        .map(|t| track_outcomes(t, z, sensor, cfg.gate))
        .collect::<Result<Vec<_>>>()?;

    // Clusters of tracks linked through shared gated measurements.
    let mut parent: Vec<usize> = (0..n).collect();
    let mut owner: Vec<Option<usize>> = vec![None; m];
    for (i, o) in outcomes.iter().enumerate() {
        for (j, det) in o.detections.iter().enumerate() {
            if det.is_some() {
                match owner[j] {
                    None => owner[j] = Some(i),
                    Some(k) => {
                        let (a, b) = (find(&mut parent, i), find(&mut parent, k));
                        parent[a.max(b)] = a.min(b);
                    }
                }
            }
        }
    }
    let mut clusters: BTreeMap<usize, Vec<usize>> = BTreeMap::new();
    for i in 0..n {
        let root = find(&mut parent, i);
        clusters.entry(root).or_default().push(i);
    }

    let mut density = LmbDensity::new();
    let mut usage = vec![0.0f64; m];
    for members in clusters.values() {
        let meas: Vec<usize> = (0..m)
            .filter(|&j| members.iter().any(|&i| outcomes[i].detections[j].is_some()))
            .collect();
        let (r, q) = (members.len(), meas.len());
        let mut c = DMatrix::from_element(r, q + 2 * r, f64::INFINITY);
        for (row, &ti) in members.iter().enumerate() {
            let t = tracks[ti];
            let ln_gamma = t.gamma().ln();
            for (col, &j) in meas.iter().enumerate() {
                c[(row, col)] = cost(&outcomes[ti].detections[j]) - ln_gamma;
            }
            c[(row, q + row)] = cost(&outcomes[ti].miss) - ln_gamma;
            c[(row, q + r + row)] = -t.tau().ln();
        }
        let ranked = ranked_assignments(&c, cfg.max_hypotheses)?;
        let Some(best) = ranked.first().map(|a| a.cost) else {
            return Err(Error::DegenerateUpdate);
        };
        let mut hyps = Vec::with_capacity(ranked.len());
        for a in &ranked {
            let weight = (best - a.cost).exp();
            if !(weight > 0.0) {
                continue;
            }
            let mut assoc = BTreeMap::new();
            let mut per_label_f = BTreeMap::new();
            for (row, &col) in a.cols.iter().enumerate() {
                let ti = members[row];
                let label = tracks[ti].label();
                let o = if col < q {
                    let j = meas[col];
                    usage[j] = usage[j].max(weight);
                    assoc.insert(label, j + 1);
                    outcomes[ti].detections[j].as_ref()
                } else if col < q + r {
                    assoc.insert(label, 0);
                    outcomes[ti].miss.as_ref()
                } else {
                    continue;
                };
                per_label_f.insert(label, Arc::clone(&o.expect("finite cost implies an outcome").f));
            }
            hyps.push(GlmbHypothesis {
                weight,
                assoc,
                per_label_f,
            });
        }
        let cluster = delta_glmb_to_lmb(&DeltaGlmb::new(hyps))?;
        for t in cluster.into_tracks() {
            density.insert(t.map_f(t.f().reduce(&cfg.reduction)?))?;
        }
    }
    keep_label_space(&mut density, &tracks)?;
    Ok(JointPosterior {
        density,
        measurement_usage: usage,
    })
}

/// Prediction with births followed by [`joint_update`].
pub fn joint_predict_update(
    d: &LmbDensity,
    z: &[DVector<f64>],
    motion: &MotionModel,
    birth: &LmbDensity,
    sensor: &SensorModel,
    cfg: &UpdateConfig,
) -> Result<JointPosterior> {
    let predicted = predict(d, motion, birth)?;
    joint_update(&predicted, z, sensor, cfg)
}

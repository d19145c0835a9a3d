//! Fusion of labeled multi-Bernoulli densities: weighted geometric fusion of
//! Bernoulli pairs, label-wise N-way fusion, and assignment-based matching
//! of densities whose labels were issued independently.

use std::collections::BTreeSet;

use nalgebra::{DMatrix, DVector};

use crate::assignment::best_assignment;
use crate::error::{Error, Result};
use crate::labeled::{BernoulliTrack, Label, LmbDensity, EXISTENCE_FLOOR};
use crate::possibility::{GaussianComponent, MaxMixture};

/// How a fusion weight vector is normalized.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum WeightMode {
    /// Largest weight equals 1.
    MaxNormalized,
    /// Weights sum to 1 (consensus averaging).
    SumNormalized,
}

#[derive(Clone, Debug, PartialEq)]
pub struct FusionWeights {
    weights: Vec<f64>,
    mode: WeightMode,
}

impl FusionWeights {
    pub fn new(weights: Vec<f64>, mode: WeightMode) -> Result<Self> {
        if weights.is_empty() {
            return Err(Error::Argument("no fusion weights".into()));
        }
        if let Some(&w) = weights.iter().find(|w| !(**w >= 0.0 && **w <= 1.0)) {
            return Err(Error::InvalidWeight(w));
        }
        let ok = match mode {
            WeightMode::MaxNormalized => (weights.iter().cloned().fold(0.0, f64::max) - 1.0).abs() < 1e-12,
            WeightMode::SumNormalized => (weights.iter().sum::<f64>() - 1.0).abs() < 1e-9,
        };
        if !ok {
            return Err(Error::Argument(format!("weights {weights:?} are not {mode:?}")));
        }
        Ok(Self { weights, mode })
    }

    /// All weights equal to one.
    pub fn independent(n: usize) -> Self {
        Self {
            weights: vec![1.0; n],
            mode: WeightMode::MaxNormalized,
        }
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    pub fn mode(&self) -> WeightMode {
        self.mode
    }
}

/// Fused Bernoulli track and the agreement `η_f`, the supremum of the
/// unnormalized spatial product.
#[derive(Clone, Debug)]
pub struct FusedTrack {
    pub track: BernoulliTrack,
    pub eta_f: f64,
}

/// Weighted fusion of two Bernoulli tracks:
/// `τ ∝ τa^ωa τb^ωb`, `γ ∝ γa^ωa γb^ωb η_f`, `f = fa^ωa fb^ωb / η_f`,
/// with `τ, γ` rescaled so their maximum is 1. A zero weight drops that
/// input. The result carries `a`'s label.
pub fn fuse_tracks(a: &BernoulliTrack, b: &BernoulliTrack, wa: f64, wb: f64) -> Result<BernoulliTrack> {
    Ok(fuse_tracks_detailed(a, b, wa, wb)?.track)
}

pub fn fuse_tracks_detailed(a: &BernoulliTrack, b: &BernoulliTrack, wa: f64, wb: f64) -> Result<FusedTrack> {
    for w in [wa, wb] {
        if !(w >= 0.0) || !w.is_finite() {
            return Err(Error::InvalidWeight(w));
        }
    }
    let (ln_tau, ln_gamma, f, eta_f) = match (wa > 0.0, wb > 0.0) {
        (false, false) => return Err(Error::Argument("both fusion weights are zero".into())),
        (true, false) => (wa * a.tau().ln(), wa * a.gamma().ln(), a.f().power(wa)?, 1.0),
        (false, true) => (wb * b.tau().ln(), wb * b.gamma().ln(), b.f().power(wb)?, 1.0),
        (true, true) => {
            let prod = a.f().power(wa)?.product(&b.f().power(wb)?)?;
            let eta = prod.supremum()?;
            (
                wa * a.tau().ln() + wb * b.tau().ln(),
                wa * a.gamma().ln() + wb * b.gamma().ln() + eta.ln(),
                prod,
                eta,
            )
        }
    };
    let top = ln_tau.max(ln_gamma);
    let track = BernoulliTrack::normalized(a.label(), (ln_tau - top).exp(), (ln_gamma - top).exp(), f)?;
    Ok(FusedTrack { track, eta_f })
}

/// Stand-in for a label missing at one node: certain non-existence
/// dominance (`τ = 1`, `γ = ε`) with a widened copy of another node's mixture.
fn padding_track(template: &BernoulliTrack) -> Result<BernoulliTrack> {
    let comps = template
        .f()
        .components()
        .iter()
        .map(|c| GaussianComponent::new(c.weight(), c.mean().clone(), c.cov() * 10.0))
        .collect::<Result<Vec<_>>>()?;
    BernoulliTrack::new(template.label(), 1.0, EXISTENCE_FLOOR, MaxMixture::new(comps)?)
}

/// Label-wise fusion of densities sharing one label space, folding the
/// pairwise rule left to right: the first input raised to its weight, then
/// each next input joined with weights `(1, ω_i)`. Inputs with zero weight
/// are skipped; labels missing at a node are padded.
pub fn fuse_lmb_shared_labels(ds: &[LmbDensity], w: &FusionWeights) -> Result<LmbDensity> {
    if ds.is_empty() {
        return Err(Error::Argument("nothing to fuse".into()));
    }
    if ds.len() != w.weights().len() {
        return Err(Error::Shape(format!(
            "{} densities but {} weights",
            ds.len(),
            w.weights().len()
        )));
    }
    if ds.len() == 1 {
        return Ok(ds[0].clone());
    }
    let labels: BTreeSet<Label> = ds.iter().flat_map(|d| d.labels()).collect();
    let mut out = LmbDensity::new();
    for label in labels {
        let template = ds.iter().find_map(|d| d.get(&label)).expect("label came from some input");
        let mut acc: Option<BernoulliTrack> = None;
        for (d, &wi) in ds.iter().zip(w.weights()) {
            if wi == 0.0 {
                continue;
            }
            let t = match d.get(&label) {
                Some(t) => t.clone(),
                None => padding_track(template)?,
            };
            acc = Some(match acc {
                None => t.power(wi)?,
                Some(prev) => fuse_tracks(&prev, &t, 1.0, wi)?,
            });
        }
        out.insert(acc.ok_or_else(|| Error::Argument("all fusion weights are zero".into()))?)?;
    }
    Ok(out)
}

/// Bernoulli stand-in for a track one side did not report.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct MissedDetectionModel {
    pub r0: f64,
    pub r1: f64,
}

impl Default for MissedDetectionModel {
    fn default() -> Self {
        Self { r0: 1.0, r1: 1.0 }
    }
}

/// Outcome of matching the rows of one density against another.
#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct AssociationSolution {
    pub pairs: Vec<(usize, usize)>,
    pub unmatched_left: Vec<usize>,
    pub unmatched_right: Vec<usize>,
}

fn fuse_with_missed(
    t: &BernoulliTrack,
    w_self: f64,
    w_missed: f64,
    missed: &MissedDetectionModel,
    df: f64,
) -> Result<BernoulliTrack> {
    let ln_tau = w_self * t.tau().ln() + w_missed * missed.r0.ln();
    let ln_gamma = w_self * t.gamma().ln() + w_missed * (missed.r1 * df).max(EXISTENCE_FLOOR).ln();
    let top = ln_tau.max(ln_gamma);
    BernoulliTrack::normalized(t.label(), (ln_tau - top).exp(), (ln_gamma - top).exp(), t.f().power(w_self)?)
}

/// Fusion of two densities with independently issued labels.
///
/// Tracks are paired by a best assignment on `−ln(γa^ωa γb^ωb η_f)`, with
/// pairs whose `η_f < threshold` forbidden and a per-row miss option costing
/// `−ln(γa^ωa (r1·df_b)^ωb)`. Each pair cost is taken relative to leaving
/// its right track unmatched, `−ln(γb^ωb (r1·df_a)^ωa)`, so the optimum
/// accounts for both sides. Matched pairs are fused, unmatched tracks on
/// either side are fused against the missed-detection model, using the
/// other side's detection-failure possibility at the track's dominant mean.
/// Matched and left tracks keep `a`'s labels; right tracks keep theirs
/// unless taken, in which case the index is bumped to the next free value.
pub fn match_and_fuse(
    a: &LmbDensity,
    b: &LmbDensity,
    weights: (f64, f64),
    missed: &MissedDetectionModel,
    df_a: &dyn Fn(&DVector<f64>) -> f64,
    df_b: &dyn Fn(&DVector<f64>) -> f64,
    threshold: f64,
) -> Result<(LmbDensity, AssociationSolution)> {
    if !(threshold > 0.0 && threshold < 1.0) {
        return Err(Error::Argument(format!("threshold {threshold} outside (0, 1)")));
    }
    let (wa, wb) = weights;
    let ta: Vec<&BernoulliTrack> = a.tracks().collect();
    let tb: Vec<&BernoulliTrack> = b.tracks().collect();
    let (m, n) = (ta.len(), tb.len());

    let right_alone: Vec<f64> = tb
        .iter()
        .map(|t| {
            let df = (missed.r1 * df_a(t.dominant_mean())).max(EXISTENCE_FLOOR);
            -(wb * t.gamma().ln() + wa * df.ln())
        })
        .collect();
    let mut fused: Vec<Vec<Option<BernoulliTrack>>> = vec![vec![None; n]; m];
    let mut cost = DMatrix::from_element(m, n + m, f64::INFINITY);
    for i in 0..m {
        for j in 0..n {
            if wa > 0.0 && wb > 0.0 && ta[i].f().product_sup_bound(tb[j].f(), wa, wb)? < threshold {
                continue;
            }
            let ft = fuse_tracks_detailed(ta[i], tb[j], wa, wb)?;
            if ft.eta_f >= threshold {
                let pair = -(wa * ta[i].gamma().ln() + wb * tb[j].gamma().ln() + ft.eta_f.ln());
                cost[(i, j)] = pair - right_alone[j];
                fused[i][j] = Some(ft.track);
            }
        }
        let df = (missed.r1 * df_b(ta[i].dominant_mean())).max(EXISTENCE_FLOOR);
        cost[(i, n + i)] = -(wa * ta[i].gamma().ln() + wb * df.ln());
    }
    let assignment = best_assignment(&cost)?.expect("miss columns keep the problem feasible");

    let mut solution = AssociationSolution::default();
    let mut out = LmbDensity::new();
    let mut right_used = vec![false; n];
    for (i, &col) in assignment.cols.iter().enumerate() {
        if col < n {
            solution.pairs.push((i, col));
            right_used[col] = true;
            out.insert(fused[i][col].take().expect("finite cost implies a fused pair"))?;
        } else {
            solution.unmatched_left.push(i);
            out.insert(fuse_with_missed(ta[i], wa, wb, missed, df_b(ta[i].dominant_mean()))?)?;
        }
    }
    for (j, t) in tb.iter().enumerate() {
        if right_used[j] {
            continue;
        }
        solution.unmatched_right.push(j);
        let mut track = fuse_with_missed(t, wb, wa, missed, df_a(t.dominant_mean()))?;
        let mut label = t.label();
        while out.contains(&label) || a.contains(&label) {
            label.index += 1;
        }
        track = track.with_label(label);
        out.insert(track)?;
    }
    Ok((out, solution))
}

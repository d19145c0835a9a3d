use std::cmp::Ordering;
use std::collections::{BTreeMap, BTreeSet, BinaryHeap};
use std::sync::Arc;

use nalgebra::DVector;

use super::track::{BernoulliTrack, Label, LmbDensity, EXISTENCE_FLOOR};
use crate::error::{Error, Result};
use crate::possibility::{GaussianComponent, MaxMixture};

/// One δ-GLMB hypothesis: a label set with its association history,
/// weight and per-label spatial mixtures.
///
/// The label set is the key set of `per_label_f`. Mixtures are shared
/// through `Arc` so hypotheses that agree on a label's history reuse them.
#[derive(Clone, Debug)]
pub struct GlmbHypothesis {
    pub weight: f64,
    /// Measurement index per label; 0 means missed, `j + 1` means the
    /// `j`-th measurement.
    pub assoc: BTreeMap<Label, usize>,
    pub per_label_f: BTreeMap<Label, Arc<MaxMixture>>,
}

impl GlmbHypothesis {
    pub fn label_set(&self) -> BTreeSet<Label> {
        self.per_label_f.keys().copied().collect()
    }

    pub fn cardinality(&self) -> usize {
        self.per_label_f.len()
    }

    pub fn contains(&self, label: &Label) -> bool {
        self.per_label_f.contains_key(label)
    }

    /// Checks the one-to-one use of detections and the label/assoc domains.
    pub fn validate(&self) -> Result<()> {
        if !(self.weight >= 0.0 && self.weight <= 1.0 + 1e-12) {
            return Err(Error::InvalidWeight(self.weight));
        }
        if self.assoc.keys().any(|l| !self.per_label_f.contains_key(l)) {
            return Err(Error::InvalidModel("association on a label outside the hypothesis".into()));
        }
        let mut seen = BTreeSet::new();
        for &j in self.assoc.values() {
            if j != 0 && !seen.insert(j) {
                return Err(Error::InvalidModel(format!("measurement {j} assigned twice")));
            }
        }
        Ok(())
    }
}

/// A weighted collection of label-set hypotheses.
#[derive(Clone, Debug, Default)]
pub struct DeltaGlmb {
    pub hypotheses: Vec<GlmbHypothesis>,
}

impl DeltaGlmb {
    pub fn new(hypotheses: Vec<GlmbHypothesis>) -> Self {
        Self { hypotheses }
    }

    pub fn max_weight(&self) -> f64 {
        self.hypotheses.iter().map(|h| h.weight).fold(0.0, f64::max)
    }

    /// Divides all weights by the largest one.
    pub fn normalize(&mut self) -> Result<()> {
        let top = self.max_weight();
        if !(top > 0.0) {
            return Err(Error::DegenerateUpdate);
        }
        for h in &mut self.hypotheses {
            h.weight /= top;
        }
        Ok(())
    }

    /// Every label appearing in some hypothesis.
    pub fn labels(&self) -> BTreeSet<Label> {
        self.hypotheses
            .iter()
            .flat_map(|h| h.per_label_f.keys().copied())
            .collect()
    }

    /// `max over (hypothesis, ℓ ∈ I) of weight · f_ℓ(x)`.
    pub fn presence(&self, x: &DVector<f64>) -> Result<f64> {
        let mut best = 0.0f64;
        for h in &self.hypotheses {
            for f in h.per_label_f.values() {
                best = best.max(h.weight * f.eval(x)?);
            }
        }
        Ok(best)
    }

    /// `f_c(n)`: the heaviest hypothesis with exactly `n` labels, 0 if none.
    pub fn cardinality_possibility(&self, n: usize) -> f64 {
        self.hypotheses
            .iter()
            .filter(|h| h.cardinality() == n)
            .map(|h| h.weight)
            .fold(0.0, f64::max)
    }
}

#[derive(PartialEq)]
struct SubsetNode {
    cost: f64,
    flips: Vec<usize>,
}

impl Eq for SubsetNode {}

impl Ord for SubsetNode {
    fn cmp(&self, other: &Self) -> Ordering {
        // BinaryHeap is a max-heap; invert so the cheapest pops first.
        other
            .cost
            .total_cmp(&self.cost)
            .then_with(|| other.flips.cmp(&self.flips))
    }
}

impl PartialOrd for SubsetNode {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

/// The `k` cheapest subsets of `costs` (all non-negative), returned as index
/// sets in ascending total cost. Exact for any number of items.
fn k_cheapest_subsets(costs: &[f64], k: usize) -> Vec<(f64, Vec<usize>)> {
    let mut order: Vec<usize> = (0..costs.len()).collect();
    order.sort_by(|&a, &b| costs[a].total_cmp(&costs[b]).then(a.cmp(&b)));
    let sorted: Vec<f64> = order.iter().map(|&i| costs[i]).collect();

    let mut out = Vec::new();
    let mut heap = BinaryHeap::new();
    heap.push(SubsetNode {
        cost: 0.0,
        flips: Vec::new(),
    });
    while let Some(node) = heap.pop() {
        if out.len() == k {
            break;
        }
        match node.flips.last() {
            None => {
                if !sorted.is_empty() {
                    heap.push(SubsetNode {
                        cost: sorted[0],
                        flips: vec![0],
                    });
                }
            }
            Some(&last) if last + 1 < sorted.len() => {
                let mut grow = node.flips.clone();
                grow.push(last + 1);
                heap.push(SubsetNode {
                    cost: node.cost + sorted[last + 1],
                    flips: grow,
                });
                let mut shift = node.flips.clone();
                *shift.last_mut().unwrap() = last + 1;
                heap.push(SubsetNode {
                    cost: node.cost - sorted[last] + sorted[last + 1],
                    flips: shift,
                });
            }
            Some(_) => {}
        }
        let mut idx: Vec<usize> = node.flips.iter().map(|&p| order[p]).collect();
        idx.sort_unstable();
        out.push((node.cost, idx));
    }
    out
}

/// Expands an LMB density into its `max_hypotheses` heaviest label subsets,
/// each weighted `∏_{ℓ∈I} γ_ℓ ∏_{ℓ∉I} τ_ℓ` and normalized to a unit maximum.
pub fn lmb_to_delta_glmb(d: &LmbDensity, max_hypotheses: usize) -> Result<DeltaGlmb> {
    if max_hypotheses == 0 {
        return Err(Error::Argument("max_hypotheses must be at least 1".into()));
    }
    let tracks: Vec<&BernoulliTrack> = d.tracks().collect();
    let mixtures: Vec<Arc<MaxMixture>> = tracks.iter().map(|t| Arc::new(t.f().clone())).collect();
    // Default choice per track: include iff γ > τ. Flipping costs |ln γ − ln τ|.
    let default_in: Vec<bool> = tracks.iter().map(|t| t.gamma() > t.tau()).collect();
    let base: f64 = tracks.iter().map(|t| t.gamma().max(t.tau()).ln()).sum();
    let costs: Vec<f64> = tracks
        .iter()
        .map(|t| (t.gamma().ln() - t.tau().ln()).abs())
        .collect();

    let subsets = k_cheapest_subsets(&costs, max_hypotheses);
    let top = subsets.first().map_or(0.0, |s| base - s.0);
    let hypotheses = subsets
        .into_iter()
        .map(|(cost, flips)| {
            let mut include = default_in.clone();
            for i in flips {
                include[i] = !include[i];
            }
            let mut per_label_f = BTreeMap::new();
            let mut assoc = BTreeMap::new();
            for (i, t) in tracks.iter().enumerate() {
                if include[i] {
                    per_label_f.insert(t.label(), Arc::clone(&mixtures[i]));
                    assoc.insert(t.label(), 0);
                }
            }
            GlmbHypothesis {
                weight: (base - cost - top).exp(),
                assoc,
                per_label_f,
            }
        })
        .collect();
    Ok(DeltaGlmb { hypotheses })
}

/// Collapses a δ-GLMB back to per-label Bernoulli parameters:
/// `τ_ℓ` is the heaviest hypothesis without ℓ, `γ_ℓ` the heaviest with ℓ,
/// and `f_ℓ` the weight-scaled maximum of ℓ's mixtures over hypotheses
/// containing it. Empty maxima take [`EXISTENCE_FLOOR`].
///
/// Weights are rescaled to a unit maximum first. Labels that appear in no
/// hypothesis are absent from the result.
pub fn delta_glmb_to_lmb(g: &DeltaGlmb) -> Result<LmbDensity> {
    let top = g.max_weight();
    if !(top > 0.0) {
        return Err(Error::DegenerateUpdate);
    }
    let mut out = LmbDensity::new();
    for label in g.labels() {
        let mut tau = 0.0f64;
        let mut gamma = 0.0f64;
        // Distinct mixtures (by identity) and the best weight seen for each.
        let mut sources: Vec<(&Arc<MaxMixture>, f64)> = Vec::new();
        for h in &g.hypotheses {
            let w = h.weight / top;
            match h.per_label_f.get(&label) {
                None => tau = tau.max(w),
                Some(f) => {
                    gamma = gamma.max(w);
                    if w <= 0.0 {
                        continue;
                    }
                    match sources.iter_mut().find(|(s, _)| Arc::ptr_eq(s, f)) {
                        Some(entry) => entry.1 = entry.1.max(w),
                        None => sources.push((f, w)),
                    }
                }
            }
        }
        if !(gamma > 0.0) {
            continue;
        }
        let mut comps = Vec::new();
        for (f, w) in sources {
            for c in f.components() {
                let cw = c.weight() * w / gamma;
                if cw > 0.0 {
                    comps.push(GaussianComponent::new(cw.min(1.0), c.mean().clone(), c.cov().clone())?);
                }
            }
        }
        let f = MaxMixture::new(comps)?;
        out.insert(BernoulliTrack::normalized(
            label,
            tau.max(EXISTENCE_FLOOR),
            gamma.max(EXISTENCE_FLOOR),
            f,
        )?)?;
    }
    Ok(out)
}

use std::collections::BTreeMap;
use std::fmt;

use nalgebra::DVector;

use crate::error::{Error, Result};
use crate::possibility::{MaxMixture, MixtureReduction};

/// Floor used in place of an empty maximum for τ or γ.
pub const EXISTENCE_FLOOR: f64 = 1e-9;

const CLOSURE_TOL: f64 = 1e-12;

/// Track identity: birth step and index within that step.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct Label {
    pub birth_time: u32,
    pub index: u32,
}

impl Label {
    pub const fn new(birth_time: u32, index: u32) -> Self {
        Self { birth_time, index }
    }
}

impl fmt::Display for Label {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "({},{})", self.birth_time, self.index)
    }
}

/// One labeled Bernoulli component: non-existence possibility `tau`,
/// existence possibility `gamma` and a normalized spatial mixture.
#[derive(Clone, Debug, PartialEq)]
pub struct BernoulliTrack {
    label: Label,
    tau: f64,
    gamma: f64,
    f: MaxMixture,
}

impl BernoulliTrack {
    /// Checked constructor: `tau`, `gamma` in (0, 1] with `max(tau, gamma) = 1`
    /// and a non-empty normalized mixture.
    pub fn new(label: Label, tau: f64, gamma: f64, f: MaxMixture) -> Result<Self> {
        for v in [tau, gamma] {
            if !(v > 0.0 && v <= 1.0 + CLOSURE_TOL) {
                return Err(Error::InvalidWeight(v));
            }
        }
        if (tau.max(gamma) - 1.0).abs() > CLOSURE_TOL {
            return Err(Error::InvalidModel(format!(
                "track {label}: max(tau, gamma) = {} is not 1",
                tau.max(gamma)
            )));
        }
        let sup = f.supremum()?;
        if (sup - 1.0).abs() > CLOSURE_TOL {
            return Err(Error::InvalidModel(format!(
                "track {label}: spatial supremum {sup} is not 1"
            )));
        }
        Ok(Self {
            label,
            tau: tau.min(1.0),
            gamma: gamma.min(1.0),
            f,
        })
    }

    /// Rescales `tau`, `gamma` by their maximum and normalizes `f`.
    /// Values below [`EXISTENCE_FLOOR`] after scaling are raised to it.
    pub fn normalized(label: Label, tau: f64, gamma: f64, f: MaxMixture) -> Result<Self> {
        let top = tau.max(gamma);
        if !(top > 0.0) || !top.is_finite() {
            return Err(Error::InvalidWeight(top));
        }
        let (f, _) = f.normalize()?;
        let t = (tau / top).clamp(EXISTENCE_FLOOR, 1.0);
        let g = (gamma / top).clamp(EXISTENCE_FLOOR, 1.0);
        Ok(Self {
            label,
            tau: t,
            gamma: g,
            f,
        })
    }

    pub fn label(&self) -> Label {
        self.label
    }

    pub fn tau(&self) -> f64 {
        self.tau
    }

    pub fn gamma(&self) -> f64 {
        self.gamma
    }

    pub fn f(&self) -> &MaxMixture {
        &self.f
    }

    pub fn with_label(mut self, label: Label) -> Self {
        self.label = label;
        self
    }

    /// `(τ^ω, γ^ω, f^ω)`; closure is preserved since `1^ω = 1`.
    pub fn power(&self, omega: f64) -> Result<Self> {
        if !(omega > 0.0) || !omega.is_finite() {
            return Err(Error::InvalidWeight(omega));
        }
        Ok(Self {
            label: self.label,
            tau: self.tau.powf(omega).max(EXISTENCE_FLOOR),
            gamma: self.gamma.powf(omega).max(EXISTENCE_FLOOR),
            f: self.f.power(omega)?,
        })
    }

    /// `γ · f(x)`.
    pub fn presence(&self, x: &DVector<f64>) -> Result<f64> {
        Ok(self.gamma * self.f.eval(x)?)
    }

    /// Mean of the heaviest spatial component.
    pub fn dominant_mean(&self) -> &DVector<f64> {
        self.f
            .dominant()
            .expect("tracks always carry a non-empty mixture")
            .mean()
    }

    pub(crate) fn map_f(&self, f: MaxMixture) -> Self {
        Self { f, ..self.clone() }
    }
}

/// Labeled multi-Bernoulli density keyed by label.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct LmbDensity {
    tracks: BTreeMap<Label, BernoulliTrack>,
}

impl LmbDensity {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn from_tracks(tracks: impl IntoIterator<Item = BernoulliTrack>) -> Result<Self> {
        let mut d = Self::new();
        for t in tracks {
            d.insert(t)?;
        }
        Ok(d)
    }

    pub fn insert(&mut self, track: BernoulliTrack) -> Result<()> {
        let label = track.label();
        if self.tracks.contains_key(&label) {
            return Err(Error::DuplicateLabel(label));
        }
        self.tracks.insert(label, track);
        Ok(())
    }

    /// Inserts or overwrites.
    pub fn replace(&mut self, track: BernoulliTrack) {
        self.tracks.insert(track.label(), track);
    }

    pub fn get(&self, label: &Label) -> Option<&BernoulliTrack> {
        self.tracks.get(label)
    }

    pub fn contains(&self, label: &Label) -> bool {
        self.tracks.contains_key(label)
    }

    pub fn remove(&mut self, label: &Label) -> Option<BernoulliTrack> {
        self.tracks.remove(label)
    }

    pub fn len(&self) -> usize {
        self.tracks.len()
    }

    pub fn is_empty(&self) -> bool {
        self.tracks.is_empty()
    }

    /// Tracks in label order.
    pub fn tracks(&self) -> impl Iterator<Item = &BernoulliTrack> {
        self.tracks.values()
    }

    pub fn labels(&self) -> impl Iterator<Item = Label> + '_ {
        self.tracks.keys().copied()
    }

    pub fn into_tracks(self) -> impl Iterator<Item = BernoulliTrack> {
        self.tracks.into_values()
    }

    /// Tempers every track, see [`BernoulliTrack::power`].
    pub fn power(&self, omega: f64) -> Result<Self> {
        let mut out = Self::new();
        for t in self.tracks() {
            out.replace(t.power(omega)?);
        }
        Ok(out)
    }

    /// Applies prune/merge/cap to every mixture.
    pub fn reduce(&self, r: &MixtureReduction) -> Result<Self> {
        let mut out = Self::new();
        for t in self.tracks() {
            out.replace(t.map_f(t.f().reduce(r)?));
        }
        Ok(out)
    }

    /// Drops tracks whose existence possibility is below `threshold`.
    pub fn prune_tracks(&self, threshold: f64) -> Self {
        Self {
            tracks: self
                .tracks
                .iter()
                .filter(|(_, t)| t.gamma() >= threshold)
                .map(|(l, t)| (*l, t.clone()))
                .collect(),
        }
    }

    /// Presence function `max_ℓ γ_ℓ f_ℓ(x)`; 0 for an empty density.
    pub fn presence(&self, x: &DVector<f64>) -> Result<f64> {
        let mut best = 0.0f64;
        for t in self.tracks() {
            best = best.max(t.presence(x)?);
        }
        Ok(best)
    }

    /// Largest deviation of `max(τ, γ)` from 1 over all tracks.
    pub fn closure_error(&self) -> f64 {
        self.tracks()
            .map(|t| (t.tau().max(t.gamma()) - 1.0).abs())
            .fold(0.0, f64::max)
    }

    /// Cardinality possibility `f_c(n)` of the δ-GLMB expansion, computed
    /// without enumerating subsets.
    pub fn cardinality_possibility(&self, n: usize) -> f64 {
        if n > self.len() {
            return 0.0;
        }
        let (base, ratios) = self.log_ratios();
        (base + ratios.iter().take(n).map(|(r, _)| r).sum::<f64>()).exp()
    }

    /// Σ ln τ and the per-track log ratios `ln γ − ln τ`, sorted
    /// descending with label order breaking ties.
    fn log_ratios(&self) -> (f64, Vec<(f64, Label)>) {
        let base: f64 = self.tracks().map(|t| t.tau().ln()).sum();
        let mut ratios: Vec<(f64, Label)> = self
            .tracks()
            .map(|t| (t.gamma().ln() - t.tau().ln(), t.label()))
            .collect();
        ratios.sort_by(|a, b| b.0.total_cmp(&a.0).then(a.1.cmp(&b.1)));
        (base, ratios)
    }

    /// Maximum a posteriori cardinality `n*` (ties to the smaller value) and
    /// the dominant mean of each track in the best hypothesis of that size.
    pub fn map_estimate(&self) -> Vec<(Label, DVector<f64>)> {
        let (_, ratios) = self.log_ratios();
        let mut best_n = 0;
        let mut acc = 0.0;
        let mut best = 0.0;
        for (n, (r, _)) in ratios.iter().enumerate() {
            acc += r;
            if acc > best {
                best = acc;
                best_n = n + 1;
            }
        }
        let mut chosen: Vec<Label> = ratios[..best_n].iter().map(|(_, l)| *l).collect();
        chosen.sort();
        chosen
            .into_iter()
            .map(|l| (l, self.tracks[&l].dominant_mean().clone()))
            .collect()
    }
}

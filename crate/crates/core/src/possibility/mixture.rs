use nalgebra::{DMatrix, DVector};

use super::gaussian::{
    hellinger_with_log_dets, log_det, product_log_weight, product_parts, spectral_bound, GaussianComponent,
};
use crate::error::{Error, Result};

/// Thresholds applied when a mixture is reduced after an update or a fusion.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct MixtureReduction {
    pub prune_threshold: f64,
    pub merge_threshold: f64,
    pub max_components: usize,
}

impl Default for MixtureReduction {
    fn default() -> Self {
        Self {
            prune_threshold: 1e-3,
            merge_threshold: 0.1,
            max_components: 30,
        }
    }
}

/// Weighted maximum of Gaussian possibility functions.
#[derive(Clone, Debug, PartialEq, Default)]
pub struct MaxMixture {
    components: Vec<GaussianComponent>,
}

impl MaxMixture {
    pub fn new(components: Vec<GaussianComponent>) -> Result<Self> {
        if let Some(first) = components.first() {
            let d = first.dim();
            if components.iter().any(|c| c.dim() != d) {
                return Err(Error::Shape("mixture components differ in dimension".into()));
            }
        }
        Ok(Self { components })
    }

    /// Placeholder carrying no information; most operations reject it.
    pub fn empty() -> Self {
        Self::default()
    }

    pub fn single(component: GaussianComponent) -> Self {
        Self {
            components: vec![component],
        }
    }

    pub fn components(&self) -> &[GaussianComponent] {
        &self.components
    }

    pub fn into_components(self) -> Vec<GaussianComponent> {
        self.components
    }

    pub fn len(&self) -> usize {
        self.components.len()
    }

    pub fn is_empty(&self) -> bool {
        self.components.is_empty()
    }

    pub fn dim(&self) -> Option<usize> {
        self.components.first().map(GaussianComponent::dim)
    }

    /// `max_i w_i N̄(x; μ_i, Σ_i)`.
    pub fn eval(&self, x: &DVector<f64>) -> Result<f64> {
        if self.is_empty() {
            return Err(Error::EmptyMixture);
        }
        let mut best = 0.0f64;
        for c in &self.components {
            best = best.max(c.eval(x)?);
        }
        Ok(best)
    }

    /// Pointwise power `f(x)^ω`, again a max-mixture.
    pub fn power(&self, omega: f64) -> Result<Self> {
        if !(omega > 0.0) || !omega.is_finite() {
            return Err(Error::InvalidWeight(omega));
        }
        if omega == 1.0 {
            return Ok(self.clone());
        }
        let components = self
            .components
            .iter()
            .map(|c| c.power(omega))
            .collect::<Result<Vec<_>>>()?;
        Ok(Self { components })
    }

    /// Pointwise product: every pairwise component product, unnormalized.
    ///
    /// Products whose weight underflows are floored at `f64::MIN_POSITIVE`.
    pub fn product(&self, other: &Self) -> Result<Self> {
        if self.is_empty() || other.is_empty() {
            return Err(Error::EmptyMixture);
        }
        let mut components = Vec::with_capacity(self.len() * other.len());
        for a in &self.components {
            for b in &other.components {
                let (ln_w, mean, cov) = product_parts(a, b)?;
                let weight = ln_w.exp().clamp(f64::MIN_POSITIVE, 1.0);
                components.push(GaussianComponent::new(weight, mean, cov)?);
            }
        }
        Ok(Self { components })
    }

    /// `self.product(other)?.reduce(r)` without forming the products that
    /// pruning would discard: a pair is skipped when an upper bound on its
    /// weight, from the mean gap and the largest covariance eigenvalues, is
    /// already below the prune threshold.
    pub fn product_reduced(&self, other: &Self, r: &MixtureReduction) -> Result<Self> {
        if self.is_empty() || other.is_empty() {
            return Err(Error::EmptyMixture);
        }
        let ln_floor = r.prune_threshold.ln();
        let sa: Vec<f64> = self.components.iter().map(|c| spectral_bound(c.cov())).collect();
        let sb: Vec<f64> = other.components.iter().map(|c| spectral_bound(c.cov())).collect();
        let mut components = Vec::new();
        for (a, spread_a) in self.components.iter().zip(&sa) {
            for (b, spread_b) in other.components.iter().zip(&sb) {
                if a.dim() != b.dim() {
                    return Err(Error::Shape(format!("product of {}-d and {}-d components", a.dim(), b.dim())));
                }
                let gap: f64 = a.mean().iter().zip(b.mean().iter()).map(|(x, y)| (x - y) * (x - y)).sum();
                let bound = a.weight().ln() + b.weight().ln() - 0.5 * gap / (spread_a + spread_b);
                if bound < ln_floor || product_log_weight(a, b)? < ln_floor {
                    continue;
                }
                let (ln_w, mean, cov) = product_parts(a, b)?;
                components.push(GaussianComponent::new(ln_w.exp().clamp(f64::MIN_POSITIVE, 1.0), mean, cov)?);
            }
        }
        if components.is_empty() {
            // everything falls under the threshold; pruning keeps the heaviest
            return self.product(other)?.reduce(r);
        }
        Self { components }.reduce(r)
    }

    /// `sup_x f(x) g(x)`, the largest pairwise product weight.
    pub fn product_supremum(&self, other: &Self) -> Result<f64> {
        if self.is_empty() || other.is_empty() {
            return Err(Error::EmptyMixture);
        }
        let mut best = f64::NEG_INFINITY;
        for a in &self.components {
            for b in &other.components {
                best = best.max(product_log_weight(a, b)?);
            }
        }
        Ok(best.exp().clamp(f64::MIN_POSITIVE, 1.0))
    }

    /// Cheap upper bound on `sup_x f(x)^ωa g(x)^ωb` for `f = self`,
    /// `g = other`, from how far apart the component means are and the
    /// largest covariance traces. Never below the exact supremum.
    pub fn product_sup_bound(&self, other: &Self, wa: f64, wb: f64) -> Result<f64> {
        if self.is_empty() || other.is_empty() {
            return Err(Error::EmptyMixture);
        }
        if !(wa > 0.0 && wb > 0.0) {
            return Err(Error::InvalidWeight(wa.min(wb)));
        }
        fn spread(m: &MaxMixture) -> (&DVector<f64>, f64, f64) {
            let anchor = m.components[0].mean();
            let radius = m.components.iter().map(|c| (c.mean() - anchor).norm()).fold(0.0, f64::max);
            let trace = m.components.iter().map(|c| c.cov().trace()).fold(0.0, f64::max);
            (anchor, radius, trace)
        }
        let (ma, ra, ta) = spread(self);
        let (mb, rb, tb) = spread(other);
        if ma.len() != mb.len() {
            return Err(Error::Shape(format!("dimensions {} and {}", ma.len(), mb.len())));
        }
        let gap = ((ma - mb).norm() - ra - rb).max(0.0);
        Ok((-0.5 * gap * gap / (ta / wa + tb / wb)).exp())
    }

    /// `sup_x f(x)`, the largest component weight.
    pub fn supremum(&self) -> Result<f64> {
        self.components
            .iter()
            .map(GaussianComponent::weight)
            .fold(None, |acc: Option<f64>, w| Some(acc.map_or(w, |a| a.max(w))))
            .ok_or(Error::EmptyMixture)
    }

    /// Scales the weights so the supremum is 1; returns the removed factor.
    pub fn normalize(&self) -> Result<(Self, f64)> {
        let sup = self.supremum()?;
        if sup == 1.0 {
            return Ok((self.clone(), 1.0));
        }
        let components = self
            .components
            .iter()
            .map(|c| c.with_weight(c.weight() / sup))
            .collect::<Result<Vec<_>>>()?;
        Ok((Self { components }, sup))
    }

    /// Index of the highest-weight component (first on ties).
    pub fn dominant_index(&self) -> Option<usize> {
        let mut best: Option<usize> = None;
        for (i, c) in self.components.iter().enumerate() {
            match best {
                Some(b) if self.components[b].weight() >= c.weight() => {}
                _ => best = Some(i),
            }
        }
        best
    }

    pub fn dominant(&self) -> Option<&GaussianComponent> {
        self.dominant_index().map(|i| &self.components[i])
    }

    /// Drops components lighter than `threshold`, always keeping the heaviest.
    pub fn prune(&self, threshold: f64) -> Self {
        let Some(keep) = self.dominant_index() else {
            return self.clone();
        };
        let components = self
            .components
            .iter()
            .enumerate()
            .filter(|(i, c)| *i == keep || c.weight() >= threshold)
            .map(|(_, c)| c.clone())
            .collect();
        Self { components }
    }

    /// Greedy Hellinger merging from the heaviest component down.
    pub fn merge(&self, threshold: f64) -> Result<Self> {
        let mut order: Vec<usize> = (0..self.len()).collect();
        order.sort_by(|&a, &b| {
            self.components[b]
                .weight()
                .total_cmp(&self.components[a].weight())
                .then(a.cmp(&b))
        });
        let dim = self.dim().unwrap_or(0) as f64;
        let log_dets: Vec<f64> = self.components.iter().map(|c| log_det(c.cov())).collect::<Result<_>>()?;
        let roots: Vec<f64> = log_dets.iter().map(|ld| (ld / dim).exp()).collect();
        let spectral: Vec<f64> = self.components.iter().map(|c| spectral_bound(c.cov())).collect();
        // Exact lower bound on d²: Minkowski's determinant inequality caps
        // the determinant factor and the largest eigenvalue caps the
        // Mahalanobis term, ruling out most pairs without a factorization.
        let ln_keep = (1.0 - threshold * threshold).ln();
        let far = |p: usize, q: usize| {
            let (a, b) = (self.components[p].mean(), self.components[q].mean());
            let gap: f64 = a.iter().zip(b.iter()).map(|(x, y)| (x - y) * (x - y)).sum();
            let spread = 0.5 * (spectral[p] + spectral[q]);
            // the determinant factor never exceeds one
            if -0.125 * gap / spread < ln_keep {
                return true;
            }
            let det_term = 0.25 * (log_dets[p] + log_dets[q]) - 0.5 * dim * (0.5 * (roots[p] + roots[q])).ln();
            det_term - 0.125 * gap / spread < ln_keep
        };
        // Anything further than this along the first coordinate is far.
        let first = |i: usize| self.components[i].mean().get(0).copied().unwrap_or(0.0);
        let widest = spectral.iter().copied().fold(0.0, f64::max);
        let reach = (-8.0 * ln_keep * widest).sqrt();
        let mut used = vec![false; self.len()];
        let mut out = Vec::new();
        for (pos, &p) in order.iter().enumerate() {
            if used[p] {
                continue;
            }
            used[p] = true;
            let pivot = &self.components[p];
            let mut group = vec![pivot];
            let x = first(p);
            for &q in &order[pos + 1..] {
                if used[q] || (first(q) - x).abs() > reach || far(p, q) {
                    continue;
                }
                if hellinger_with_log_dets(pivot, &self.components[q], log_dets[p], log_dets[q])? < threshold {
                    used[q] = true;
                    group.push(&self.components[q]);
                }
            }
            if group.len() == 1 {
                out.push(pivot.clone());
                continue;
            }
            let total: f64 = group.iter().map(|c| c.weight()).sum();
            let d = pivot.dim();
            let mut mean = DVector::zeros(d);
            for c in &group {
                mean += c.mean() * (c.weight() / total);
            }
            let mut cov = DMatrix::zeros(d, d);
            for c in &group {
                let diff = c.mean() - &mean;
                cov += (c.cov() + &diff * diff.transpose()) * (c.weight() / total);
            }
            out.push(GaussianComponent::new(pivot.weight(), mean, cov)?);
        }
        Ok(Self { components: out })
    }

    /// Keeps the `max` heaviest components.
    pub fn cap(&self, max: usize) -> Self {
        if self.len() <= max {
            return self.clone();
        }
        let mut comps = self.components.clone();
        comps.sort_by(|a, b| b.weight().total_cmp(&a.weight()));
        comps.truncate(max.max(1));
        Self { components: comps }
    }

    /// Prune, merge and cap in that order.
    pub fn reduce(&self, r: &MixtureReduction) -> Result<Self> {
        Ok(self.prune(r.prune_threshold).merge(r.merge_threshold)?.cap(r.max_components))
    }
}

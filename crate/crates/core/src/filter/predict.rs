use crate::error::{Error, Result};
use crate::labeled::{BernoulliTrack, LmbDensity, EXISTENCE_FLOOR};
use crate::possibility::{GaussianComponent, MaxMixture};

use super::models::MotionModel;

fn predict_mixture(f: &MaxMixture, motion: &MotionModel, omega: f64) -> Result<MaxMixture> {
    if f.dim() != Some(motion.dim()) {
        return Err(Error::Shape(format!(
            "mixture of dimension {:?} under a {}-d motion model",
            f.dim(),
            motion.dim()
        )));
    }
    let q = &motion.q / omega;
    let comps = f
        .components()
        .iter()
        .map(|c| {
            let mean = &motion.f * c.mean();
            let cov = &motion.f * c.cov() * motion.f.transpose() + &q;
            GaussianComponent::new(c.weight(), mean, cov)
        })
        .collect::<Result<Vec<_>>>()?;
    MaxMixture::new(comps)
}

fn predict_with(d: &LmbDensity, motion: &MotionModel, birth: &LmbDensity, omega: f64) -> Result<LmbDensity> {
    if !(omega > 0.0 && omega <= 1.0) {
        return Err(Error::InvalidWeight(omega));
    }
    let (ls, ld) = (motion.survival.powf(omega), motion.death.powf(omega));
    let mut out = LmbDensity::new();
    for t in d.tracks() {
        let tau = t.tau().max(ld * t.gamma());
        let gamma = (ls * t.gamma()).max(EXISTENCE_FLOOR);
        out.insert(BernoulliTrack::new(
            t.label(),
            tau,
            gamma,
            predict_mixture(t.f(), motion, omega)?,
        )?)?;
    }
    for b in birth.tracks() {
        out.insert(b.clone())?;
    }
    Ok(out)
}

/// Prediction of surviving tracks followed by the union with `birth`:
/// `τ ← max(τ, λ_d γ)`, `γ ← λ_s γ`, `μ ← Fμ`, `Σ ← FΣFᵀ + Q`.
pub fn predict(d: &LmbDensity, motion: &MotionModel, birth: &LmbDensity) -> Result<LmbDensity> {
    predict_with(d, motion, birth, 1.0)
}

/// Discounted prediction for a node that will later fuse with neighbours:
/// `τ ← max(τ, γ λ_d^ω)`, `γ ← γ λ_s^ω`, `Σ ← FΣFᵀ + Q/ω`.
pub fn predict_discounted(d: &LmbDensity, motion: &MotionModel, birth: &LmbDensity, omega: f64) -> Result<LmbDensity> {
    predict_with(d, motion, birth, omega)
}

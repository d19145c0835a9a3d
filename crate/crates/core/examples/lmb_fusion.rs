//! Fusing two sensors' LMB posteriors: agreement, shared labels and
//! matching of tracks born independently.

use nalgebra::{dvector, DMatrix, DVector};
use possibility_lmb::fusion::{
    fuse_lmb_shared_labels, fuse_tracks_detailed, match_and_fuse, FusionWeights, MissedDetectionModel, WeightMode,
};
use possibility_lmb::labeled::{BernoulliTrack, Label, LmbDensity};
use possibility_lmb::possibility::{GaussianComponent, MaxMixture};

fn track(label: Label, gamma: f64, x: f64, y: f64, var: f64) -> possibility_lmb::Result<BernoulliTrack> {
    let cov = DMatrix::from_diagonal(&dvector![var, var, 4.0, 4.0]);
    let f = MaxMixture::single(GaussianComponent::new(1.0, dvector![x, y, 0.0, 0.0], cov)?);
    let tau = if gamma < 1.0 { 1.0 } else { 0.05 };
    BernoulliTrack::new(label, tau, gamma, f)
}

fn main() -> possibility_lmb::Result<()> {
    let shared = Label::new(1, 0);
    let a = track(shared, 1.0, 0.0, 0.0, 25.0)?;
    for offset in [0.0, 5.0, 20.0, 60.0] {
        let b = track(shared, 1.0, offset, 0.0, 25.0)?;
        let fused = fuse_tracks_detailed(&a, &b, 1.0, 1.0)?;
        println!(
            "offset {offset:5.1} m: agreement {:.4}, fused gamma {:.4}, tau {:.4}",
            fused.eta_f,
            fused.track.gamma(),
            fused.track.tau()
        );
    }

    // two sensors, same labels: one sees the target, the other is unsure
    let s1 = LmbDensity::from_tracks([track(shared, 1.0, 0.0, 0.0, 25.0)?])?;
    let s2 = LmbDensity::from_tracks([track(shared, 0.4, 0.0, 0.0, 25.0)?])?;
    for (name, w) in [
        ("independent", FusionWeights::independent(2)),
        ("consensus", FusionWeights::new(vec![0.5, 0.5], WeightMode::SumNormalized)?),
    ] {
        let fused = fuse_lmb_shared_labels(&[s1.clone(), s2.clone()], &w)?;
        for t in fused.tracks() {
            println!("{name:11}: {} tau {:.3} gamma {:.3}", t.label(), t.tau(), t.gamma());
        }
    }

    // tracks born separately carry different labels and are paired spatially
    let left = LmbDensity::from_tracks([track(Label::new(3, 0), 1.0, 100.0, 50.0, 25.0)?])?;
    let right = LmbDensity::from_tracks([
        track(Label::new(3, 7), 1.0, 103.0, 48.0, 25.0)?,
        track(Label::new(3, 8), 1.0, -400.0, 0.0, 25.0)?,
    ])?;
    let df = |_: &DVector<f64>| 0.3;
    let (fused, solution) = match_and_fuse(&left, &right, (1.0, 1.0), &MissedDetectionModel::default(), &df, &df, 1e-2)?;
    println!("pairs {:?}, unmatched right {:?}", solution.pairs, solution.unmatched_right);
    for t in fused.tracks() {
        let m = t.dominant_mean();
        println!("  {} at ({:.1}, {:.1}) tau {:.3} gamma {:.3}", t.label(), m[0], m[1], t.tau(), t.gamma());
    }
    Ok(())
}

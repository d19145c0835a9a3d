//! Expanding an LMB density into label-set hypotheses and collapsing back.

use nalgebra::{dmatrix, dvector};
use possibility_lmb::labeled::{delta_glmb_to_lmb, lmb_to_delta_glmb, BernoulliTrack, Label, LmbDensity};
use possibility_lmb::possibility::{GaussianComponent, MaxMixture};

fn track(index: u32, tau: f64, gamma: f64, at: f64) -> possibility_lmb::Result<BernoulliTrack> {
    let f = MaxMixture::single(GaussianComponent::new(1.0, dvector![at], dmatrix![1.0])?);
    BernoulliTrack::new(Label::new(1, index), tau, gamma, f)
}

fn main() -> possibility_lmb::Result<()> {
    let lmb = LmbDensity::from_tracks([track(0, 0.2, 1.0, -3.0)?, track(1, 1.0, 0.7, 0.0)?, track(2, 1.0, 0.05, 3.0)?])?;

    let glmb = lmb_to_delta_glmb(&lmb, 8)?;
    println!("{} hypotheses:", glmb.hypotheses.len());
    for h in &glmb.hypotheses {
        let labels: Vec<String> = h.per_label_f.keys().map(|l| l.to_string()).collect();
        println!("  w = {:.3}  {{{}}}", h.weight, labels.join(", "));
    }
    for n in 0..=3 {
        println!("possibility of {n} targets: {:.3}", glmb.cardinality_possibility(n));
    }

    let back = delta_glmb_to_lmb(&glmb)?;
    for (a, b) in back.tracks().zip(lmb.tracks()) {
        println!("{}: tau {:.3} -> {:.3}, gamma {:.3} -> {:.3}", a.label(), b.tau(), a.tau(), b.gamma(), a.gamma());
    }
    for x in [-3.0, 0.0, 3.0] {
        println!("presence at {x:4.1}: {:.4}", back.presence(&dvector![x])?);
    }
    Ok(())
}

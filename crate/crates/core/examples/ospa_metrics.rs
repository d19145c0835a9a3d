//! OSPA and its windowed track variant on hand-made sets.

use std::collections::BTreeMap;

use nalgebra::Vector2;
use possibility_lmb::sim::{ospa, ospa2_windowed, TrackHistory};

fn main() -> possibility_lmb::Result<()> {
    let truth = [Vector2::new(0.0, 0.0), Vector2::new(100.0, 0.0)];
    let close = [Vector2::new(3.0, 4.0), Vector2::new(100.0, 5.0)];
    let missing = [Vector2::new(3.0, 4.0)];
    let extra = [Vector2::new(3.0, 4.0), Vector2::new(100.0, 5.0), Vector2::new(-500.0, 0.0)];
    for (name, est) in [("close", &close[..]), ("one missing", &missing[..]), ("one extra", &extra[..])] {
        println!("{name:12} OSPA = {:6.2} m", ospa(est, &truth, 100.0, 2.0)?);
    }

    // two tracks swap identities at step 5
    let mut est: TrackHistory<&str> = BTreeMap::new();
    let mut tru: TrackHistory<&str> = BTreeMap::new();
    for k in 1..=8 {
        let swap = k >= 5;
        tru.entry(k).or_default().insert("t1", truth[0]);
        tru.entry(k).or_default().insert("t2", truth[1]);
        est.entry(k).or_default().insert("a", if swap { truth[1] } else { truth[0] });
        est.entry(k).or_default().insert("b", if swap { truth[0] } else { truth[1] });
    }
    for k in 1..=8 {
        println!(
            "step {k}: plain {:6.2}, window 4 {:6.2}",
            ospa2_windowed(&est, &tru, k, 1, 100.0, 2.0)?,
            ospa2_windowed(&est, &tru, k, 4, 100.0, 2.0)?
        );
    }
    Ok(())
}

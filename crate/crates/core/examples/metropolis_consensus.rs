//! Metropolis weights on a few topologies and scalar consensus on a line.

use nalgebra::DVector;
use possibility_lmb::network::{metropolis_weights, SensorGraph};

fn main() -> possibility_lmb::Result<()> {
    let text = "4\n0 1\n1 2\n2 3\n";
    let line = SensorGraph::parse(text)?;
    let w = metropolis_weights(&line)?;
    println!("line of 4 from\n{text}weights:{w:.3}");

    for (name, g) in [("ring", SensorGraph::ring(5)?), ("star", SensorGraph::star(5)?)] {
        let w = metropolis_weights(&g)?;
        println!("{name}: row sums {:?}", w.row_iter().map(|r| r.sum()).collect::<Vec<_>>());
    }

    // log-existence values spread along the line and their consensus
    let mut x = DVector::from_vec(vec![0.0, -3.0, -0.5, -6.0]);
    for sweep in 0..=10 {
        println!("sweep {sweep:2}: spread {:.4}, mean {:.4}", x.max() - x.min(), x.mean());
        x = &w * x;
    }
    Ok(())
}

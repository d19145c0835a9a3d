//! Best and k-best assignments of a small cost matrix.

use nalgebra::dmatrix;
use possibility_lmb::assignment::{best_assignment, ranked_assignments};

fn main() -> possibility_lmb::Result<()> {
    // rows: tracks; columns: two measurements then one miss column per track
    let inf = f64::INFINITY;
    let costs = dmatrix![
        0.2, 3.1, 1.5, inf;
        2.7, 0.4, inf, 1.0
    ];
    if let Some(best) = best_assignment(&costs)? {
        println!("best: {:?} cost {:.2}", best.cols, best.cost);
    }
    for (rank, a) in ranked_assignments(&costs, 6)?.iter().enumerate() {
        println!("#{}: {:?} cost {:.2}", rank + 1, a.cols, a.cost);
    }
    Ok(())
}

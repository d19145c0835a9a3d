//! Optimal and ranked (Murty) linear assignment on rectangular cost
//! matrices. Rows are assigned to distinct columns; `+∞` marks a forbidden
//! pair.

use std::cmp::Ordering;
use std::collections::BinaryHeap;

use nalgebra::DMatrix;

use crate::error::{Error, Result};

/// Row-to-column map with its total cost.
#[derive(Clone, Debug, PartialEq)]
pub struct Assignment {
    /// `cols[i]` is the column given to row `i`.
    pub cols: Vec<usize>,
    pub cost: f64,
}

/// Minimum-cost assignment of every row to a distinct column, or `None`
/// when each full assignment touches a forbidden entry.
///
/// Requires `rows ≤ cols`.
pub fn best_assignment(costs: &DMatrix<f64>) -> Result<Option<Assignment>> {
    let (n, m) = costs.shape();
    if n > m {
        return Err(Error::Shape(format!("assignment needs rows <= cols, got {n}x{m}")));
    }
    if costs.iter().any(|c| c.is_nan() || *c == f64::NEG_INFINITY) {
        return Err(Error::Argument("cost matrix contains NaN or -inf".into()));
    }
    Ok(hungarian(costs))
}

fn hungarian(costs: &DMatrix<f64>) -> Option<Assignment> {
    let (n, m) = costs.shape();
    if n == 0 {
        return Some(Assignment {
            cols: Vec::new(),
            cost: 0.0,
        });
    }
    let max_abs = costs
        .iter()
        .filter(|c| c.is_finite())
        .fold(0.0f64, |a, c| a.max(c.abs()));
    // Any assignment through a stand-in entry is dearer than every finite one.
    let big = 4.0 * (n as f64 + 1.0) * (max_abs + 1.0);
    let a = |i: usize, j: usize| {
        let c = costs[(i, j)];
        if c.is_finite() {
            c
        } else {
            big
        }
    };

    let inf = f64::INFINITY;
    let mut u = vec![0.0; n + 1];
    let mut v = vec![0.0; m + 1];
    let mut p = vec![0usize; m + 1];
    let mut way = vec![0usize; m + 1];
    for i in 1..=n {
        p[0] = i;
        let mut j0 = 0;
        let mut minv = vec![inf; m + 1];
        let mut used = vec![false; m + 1];
        loop {
            used[j0] = true;
            let i0 = p[j0];
            let mut delta = inf;
            let mut j1 = 0;
            for j in 1..=m {
                if !used[j] {
                    let cur = a(i0 - 1, j - 1) - u[i0] - v[j];
                    if cur < minv[j] {
                        minv[j] = cur;
                        way[j] = j0;
                    }
                    if minv[j] < delta {
                        delta = minv[j];
                        j1 = j;
                    }
                }
            }
            for j in 0..=m {
                if used[j] {
                    u[p[j]] += delta;
                    v[j] -= delta;
                } else {
                    minv[j] -= delta;
                }
            }
            j0 = j1;
            if p[j0] == 0 {
                break;
            }
        }
        loop {
            let j1 = way[j0];
            p[j0] = p[j1];
            j0 = j1;
            if j0 == 0 {
                break;
            }
        }
    }
    let mut cols = vec![0usize; n];
    for j in 1..=m {
        if p[j] != 0 {
            cols[p[j] - 1] = j - 1;
        }
    }
    let mut cost = 0.0;
    for (i, &j) in cols.iter().enumerate() {
        let c = costs[(i, j)];
        if !c.is_finite() {
            return None;
        }
        cost += c;
    }
    Some(Assignment { cols, cost })
}

struct Node {
    solution: Assignment,
    forced: Vec<(usize, usize)>,
    forbidden: Vec<(usize, usize)>,
    seq: usize,
}

impl PartialEq for Node {
    fn eq(&self, other: &Self) -> bool {
        self.cmp(other) == Ordering::Equal
    }
}

impl Eq for Node {}

impl Ord for Node {
    fn cmp(&self, other: &Self) -> Ordering {
        other
            .solution
            .cost
            .total_cmp(&self.solution.cost)
            .then_with(|| other.solution.cols.cmp(&self.solution.cols))
            .then_with(|| other.seq.cmp(&self.seq))
    }
}

impl PartialOrd for Node {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

fn constrained(costs: &DMatrix<f64>, forced: &[(usize, usize)], forbidden: &[(usize, usize)]) -> DMatrix<f64> {
    let mut c = costs.clone();
    for &(r, col) in forbidden {
        c[(r, col)] = f64::INFINITY;
    }
    for &(r, col) in forced {
        let keep = c[(r, col)];
        for j in 0..c.ncols() {
            c[(r, j)] = f64::INFINITY;
        }
        for i in 0..c.nrows() {
            c[(i, col)] = f64::INFINITY;
        }
        c[(r, col)] = keep;
    }
    c
}

/// The `k` cheapest feasible assignments in ascending cost (Murty's
/// partitioning). Fewer are returned when fewer exist.
pub fn ranked_assignments(costs: &DMatrix<f64>, k: usize) -> Result<Vec<Assignment>> {
    if k < 1 {
        return Err(Error::Argument("requested zero assignments".into()));
    }
    let Some(first) = best_assignment(costs)? else {
        return Ok(Vec::new());
    };
    let n = costs.nrows();
    let mut out = Vec::new();
    let mut heap = BinaryHeap::new();
    let mut seq = 0;
    heap.push(Node {
        solution: first,
        forced: Vec::new(),
        forbidden: Vec::new(),
        seq,
    });
    while let Some(node) = heap.pop() {
        let sol = node.solution.clone();
        out.push(sol);
        if out.len() == k {
            break;
        }
        let mut forced = node.forced.clone();
        let free_rows: Vec<usize> = (0..n)
            .filter(|r| !node.forced.iter().any(|(fr, _)| fr == r))
            .collect();
        for &r in &free_rows {
            let mut forbidden = node.forbidden.clone();
            forbidden.push((r, node.solution.cols[r]));
            let sub = constrained(costs, &forced, &forbidden);
            if let Some(mut s) = hungarian(&sub) {
                // Report the cost against the original matrix.
                s.cost = s.cols.iter().enumerate().map(|(i, &j)| costs[(i, j)]).sum();
                seq += 1;
                heap.push(Node {
                    solution: s,
                    forced: forced.clone(),
                    forbidden,
                    seq,
                });
            }
            forced.push((r, node.solution.cols[r]));
        }
    }
    Ok(out)
}

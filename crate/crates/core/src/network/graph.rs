use std::collections::{BTreeSet, VecDeque};
use std::fmt::Write as _;

use nalgebra::DMatrix;

use crate::error::{Error, Result};

/// Undirected communication graph over nodes `0..n`. Every node is
/// implicitly its own neighbour.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct SensorGraph {
    n: usize,
    edges: BTreeSet<(usize, usize)>,
}

impl SensorGraph {
    /// Builds a graph; edges are stored as `(min, max)`, self-loops are
    /// dropped since they are implicit.
    pub fn new(n: usize, edges: impl IntoIterator<Item = (usize, usize)>) -> Result<Self> {
        if n == 0 {
            return Err(Error::Topology("graph has no nodes".into()));
        }
        let mut set = BTreeSet::new();
        for (i, j) in edges {
            if i >= n || j >= n {
                return Err(Error::Topology(format!("edge ({i}, {j}) outside 0..{n}")));
            }
            if i != j {
                set.insert((i.min(j), i.max(j)));
            }
        }
        Ok(Self { n, edges: set })
    }

    pub fn ring(n: usize) -> Result<Self> {
        Self::new(n, (0..n).map(|i| (i, (i + 1) % n)))
    }

    pub fn line(n: usize) -> Result<Self> {
        Self::new(n, (1..n).map(|i| (i - 1, i)))
    }

    pub fn complete(n: usize) -> Result<Self> {
        Self::new(n, (0..n).flat_map(|i| (i + 1..n).map(move |j| (i, j))))
    }

    /// Node 0 linked to every other node.
    pub fn star(n: usize) -> Result<Self> {
        Self::new(n, (1..n).map(|i| (0, i)))
    }

    pub fn node_count(&self) -> usize {
        self.n
    }

    pub fn edges(&self) -> impl Iterator<Item = (usize, usize)> + '_ {
        self.edges.iter().copied()
    }

    /// Sorted neighbourhood of `i`, including `i`.
    pub fn neighborhood(&self, i: usize) -> Vec<usize> {
        let mut out: Vec<usize> = self
            .edges
            .iter()
            .filter_map(|&(a, b)| match (a == i, b == i) {
                (true, _) => Some(b),
                (_, true) => Some(a),
                _ => None,
            })
            .collect();
        out.push(i);
        out.sort_unstable();
        out
    }

    pub fn is_connected(&self) -> bool {
        let mut seen = vec![false; self.n];
        let mut queue = VecDeque::from([0]);
        seen[0] = true;
        while let Some(i) = queue.pop_front() {
            for j in self.neighborhood(i) {
                if !seen[j] {
                    seen[j] = true;
                    queue.push_back(j);
                }
            }
        }
        seen.into_iter().all(|s| s)
    }

    /// Parses the topology text format: `#` comment and blank lines are
    /// ignored, the first remaining line is the node count, every later line
    /// is an edge `i j` of zero-based node indices.
    pub fn parse(text: &str) -> Result<Self> {
        let mut n: Option<usize> = None;
        let mut edges = Vec::new();
        for (lineno, raw) in text.lines().enumerate() {
            let line = raw.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let err = |msg: String| Error::Parse { line: lineno + 1, msg };
            let fields: Vec<&str> = line.split_whitespace().collect();
            let num = |s: &str| s.parse::<usize>().map_err(|e| err(format!("{s:?}: {e}")));
            match (n, fields.as_slice()) {
                (None, [count]) => n = Some(num(count)?),
                (None, _) => return Err(err("expected the node count".into())),
                (Some(_), [i, j]) => edges.push((num(i)?, num(j)?)),
                (Some(_), _) => return Err(err("expected an edge `i j`".into())),
            }
        }
        let n = n.ok_or_else(|| Error::Parse {
            line: 0,
            msg: "missing node count".into(),
        })?;
        Self::new(n, edges)
    }

    /// Inverse of [`SensorGraph::parse`].
    pub fn to_text(&self) -> String {
        let mut s = format!("{}\n", self.n);
        for (i, j) in &self.edges {
            writeln!(s, "{i} {j}").expect("writing to a string");
        }
        s
    }
}

/// Metropolis consensus weights: `1 / (1 + max(N_i, N_j))` on edges, where
/// `N_i` counts the neighbourhood including the node itself, and the
/// remainder of each row on the diagonal.
pub fn metropolis_weights(g: &SensorGraph) -> Result<DMatrix<f64>> {
    if !g.is_connected() {
        return Err(Error::Topology("graph is not connected".into()));
    }
    let sizes: Vec<usize> = (0..g.node_count()).map(|i| g.neighborhood(i).len()).collect();
    let mut w = DMatrix::zeros(g.node_count(), g.node_count());
    for (i, j) in g.edges() {
        let v = 1.0 / (1.0 + sizes[i].max(sizes[j]) as f64);
        w[(i, j)] = v;
        w[(j, i)] = v;
    }
    for i in 0..g.node_count() {
        let off: f64 = (0..g.node_count()).filter(|&j| j != i).map(|j| w[(i, j)]).sum();
        w[(i, i)] = 1.0 - off;
    }
    Ok(w)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    #[test]
    fn small_graphs() {
        let w = metropolis_weights(&SensorGraph::new(1, []).unwrap()).unwrap();
        assert_eq!(w, DMatrix::from_element(1, 1, 1.0));
        let w = metropolis_weights(&SensorGraph::line(2).unwrap()).unwrap();
        assert_abs_diff_eq!(w[(0, 1)], 1.0 / 3.0);
        assert_abs_diff_eq!(w[(0, 0)], 2.0 / 3.0);
    }

    #[test]
    fn star_rows_sum_to_one() {
        let w = metropolis_weights(&SensorGraph::star(4).unwrap()).unwrap();
        for i in 0..4 {
            assert_abs_diff_eq!(w.row(i).sum(), 1.0, epsilon = 1e-15);
            for j in 0..4 {
                assert_eq!(w[(i, j)], w[(j, i)]);
            }
        }
    }

    #[test]
    fn disconnected_is_rejected() {
        let g = SensorGraph::new(3, [(0, 1)]).unwrap();
        assert!(matches!(metropolis_weights(&g), Err(Error::Topology(_))));
        assert!(SensorGraph::new(2, [(0, 2)]).is_err());
    }

    #[test]
    fn text_round_trip() {
        let g = SensorGraph::ring(5).unwrap();
        assert_eq!(SensorGraph::parse(&g.to_text()).unwrap(), g);
        let parsed = SensorGraph::parse("# ring\n\n3\n0 1\n  1 2 \n# tail\n2 0\n").unwrap();
        assert_eq!(parsed, SensorGraph::ring(3).unwrap());
        assert!(matches!(SensorGraph::parse("3\n0 1 2\n"), Err(Error::Parse { line: 2, .. })));
        assert!(SensorGraph::parse("# nothing\n").is_err());
    }
}

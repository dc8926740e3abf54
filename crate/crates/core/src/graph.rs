//! Undirected proximity graph with hysteresis edges.
//!
//! At t = 0 an edge exists iff `eps1 < d < R - eps2`. Afterwards a missing
//! edge appears once `d < R - eps2` and an existing edge survives while
//! `d < R`. Every change is logged with its time stamp.

use serde::{Deserialize, Serialize};

use crate::{Error, Result, Vec2};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GraphParams {
    /// Sensing radius `R`.
    pub sensing_radius: f64,
    /// Lower distance bound for initial links, `eps1`.
    pub eps1: f64,
    /// Hysteresis gap, `eps2`: links form below `R - eps2`.
    pub eps2: f64,
}

impl GraphParams {
    pub fn validate(&self) -> Result<()> {
        let GraphParams { sensing_radius: r, eps1, eps2 } = *self;
        if !(r.is_finite() && r > 0.0) {
            return Err(Error::InvalidParameter(format!("sensing radius must be positive, got {r}")));
        }
        if !(eps2 > 0.0 && eps2 < r) {
            return Err(Error::InvalidParameter(format!("eps2 must lie in (0, R), got {eps2}")));
        }
        if !(eps1 > 0.0 && eps1 < r - eps2) {
            return Err(Error::InvalidParameter(format!("eps1 must lie in (0, R - eps2), got {eps1}")));
        }
        Ok(())
    }

    /// Distance below which a missing link is created.
    pub fn add_threshold(&self) -> f64 {
        self.sensing_radius - self.eps2
    }
}

/// One change of the edge set.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SwitchEvent {
    pub t: f64,
    pub added: Vec<(usize, usize)>,
    pub removed: Vec<(usize, usize)>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ProximityGraph {
    n: usize,
    params: GraphParams,
    // Upper-triangular adjacency, row-major over i < j.
    linked: Vec<bool>,
    neighbors: Vec<Vec<usize>>,
    switch_log: Vec<SwitchEvent>,
}

fn pair_index(n: usize, i: usize, j: usize) -> usize {
    let (i, j) = if i < j { (i, j) } else { (j, i) };
    i * n - i * (i + 1) / 2 + (j - i - 1)
}

impl ProximityGraph {
    /// Initial edge set from the t = 0 positions.
    pub fn init(positions: &[Vec2], params: GraphParams) -> Result<Self> {
        params.validate()?;
        let n = positions.len();
        let mut g = Self {
            n,
            params,
            linked: vec![false; n * n.saturating_sub(1) / 2],
            neighbors: vec![Vec::new(); n],
            switch_log: Vec::new(),
        };
        for i in 0..n {
            for j in i + 1..n {
                let d = (positions[i] - positions[j]).norm();
                if d == 0.0 {
                    return Err(Error::Coincident { i, j });
                }
                if params.eps1 < d && d < params.add_threshold() {
                    g.linked[pair_index(n, i, j)] = true;
                }
            }
        }
        g.rebuild_neighbors();
        Ok(g)
    }

    /// Graph with an explicit edge list. Used for tests and identities.
    pub fn from_edges(n: usize, edges: &[(usize, usize)], params: GraphParams) -> Self {
        let mut g = Self {
            n,
            params,
            linked: vec![false; n * n.saturating_sub(1) / 2],
            neighbors: vec![Vec::new(); n],
            switch_log: Vec::new(),
        };
        for &(i, j) in edges {
            assert!(i != j && i < n && j < n, "bad edge ({i}, {j})");
            g.linked[pair_index(n, i, j)] = true;
        }
        g.rebuild_neighbors();
        g
    }

    fn rebuild_neighbors(&mut self) {
        for list in &mut self.neighbors {
            list.clear();
        }
        for i in 0..self.n {
            for j in i + 1..self.n {
                if self.linked[pair_index(self.n, i, j)] {
                    self.neighbors[i].push(j);
                    self.neighbors[j].push(i);
                }
            }
        }
        for list in &mut self.neighbors {
            list.sort_unstable();
        }
    }

    /// Applies the hysteresis rules at time `t`. Returns the logged event when
    /// the edge set changed.
    pub fn update(&mut self, positions: &[Vec2], t: f64) -> Option<&SwitchEvent> {
        assert_eq!(positions.len(), self.n);
        let add_below = self.params.add_threshold();
        let drop_at = self.params.sensing_radius;
        let mut added = Vec::new();
        let mut removed = Vec::new();
        for i in 0..self.n {
            for j in i + 1..self.n {
                let k = pair_index(self.n, i, j);
                let d = (positions[i] - positions[j]).norm();
                if self.linked[k] {
                    if d >= drop_at {
                        self.linked[k] = false;
                        removed.push((i, j));
                    }
                } else if d < add_below {
                    self.linked[k] = true;
                    added.push((i, j));
                }
            }
        }
        if added.is_empty() && removed.is_empty() {
            return None;
        }
        self.rebuild_neighbors();
        self.switch_log.push(SwitchEvent { t, added, removed });
        self.switch_log.last()
    }

    pub fn len(&self) -> usize {
        self.n
    }

    pub fn is_empty(&self) -> bool {
        self.n == 0
    }

    pub fn params(&self) -> &GraphParams {
        &self.params
    }

    pub fn neighbors(&self, i: usize) -> &[usize] {
        &self.neighbors[i]
    }

    pub fn degree(&self, i: usize) -> usize {
        self.neighbors[i].len()
    }

    pub fn has_edge(&self, i: usize, j: usize) -> bool {
        i != j && self.linked[pair_index(self.n, i, j)]
    }

    pub fn edge_count(&self) -> usize {
        self.linked.iter().filter(|&&b| b).count()
    }

    /// Edges as `(i, j)` with `i < j`, in lexicographic order.
    pub fn edges(&self) -> impl Iterator<Item = (usize, usize)> + '_ {
        (0..self.n).flat_map(move |i| {
            self.neighbors[i].iter().copied().filter(move |&j| j > i).map(move |j| (i, j))
        })
    }

    pub fn switch_log(&self) -> &[SwitchEvent] {
        &self.switch_log
    }

    pub fn is_connected(&self) -> bool {
        if self.n <= 1 {
            return true;
        }
        let mut sets = DisjointSets::new(self.n);
        let mut components = self.n;
        for (i, j) in self.edges() {
            if sets.union(i, j) {
                components -= 1;
            }
        }
        components == 1
    }
}

/// Union–find with path halving and union by size.
#[derive(Debug, Clone)]
pub struct DisjointSets {
    parent: Vec<usize>,
    size: Vec<usize>,
}

impl DisjointSets {
    pub fn new(n: usize) -> Self {
        Self { parent: (0..n).collect(), size: vec![1; n] }
    }

    pub fn find(&mut self, mut x: usize) -> usize {
        while self.parent[x] != x {
            self.parent[x] = self.parent[self.parent[x]];
            x = self.parent[x];
        }
        x
    }

    /// Merges the sets of `a` and `b`; false if they were already joined.
    pub fn union(&mut self, a: usize, b: usize) -> bool {
        let (mut ra, mut rb) = (self.find(a), self.find(b));
        if ra == rb {
            return false;
        }
        if self.size[ra] < self.size[rb] {
            std::mem::swap(&mut ra, &mut rb);
        }
        self.parent[rb] = ra;
        self.size[ra] += self.size[rb];
        true
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn params() -> GraphParams {
        GraphParams { sensing_radius: 8.0, eps1: 1.0, eps2: 2.0 }
    }

    fn line(xs: &[f64]) -> Vec<Vec2> {
        xs.iter().map(|&x| Vec2::new(x, 0.0)).collect()
    }

    #[test]
    fn collinear_triangle_is_complete() {
        let g = ProximityGraph::init(&line(&[0.0, 2.0, 4.0]), params()).unwrap();
        assert_eq!(g.edge_count(), 3);
        assert!(g.is_connected());
        for i in 0..3 {
            assert_eq!(g.neighbors(i).len(), 2);
        }
    }

    #[test]
    fn initial_bounds_are_strict() {
        let g = ProximityGraph::init(&line(&[0.0, 1.0]), params()).unwrap();
        assert_eq!(g.edge_count(), 0);
        let g = ProximityGraph::init(&line(&[0.0, 6.0]), params()).unwrap();
        assert_eq!(g.edge_count(), 0);
        assert!(!g.is_connected());
    }

    #[test]
    fn coincident_initial_positions_rejected() {
        let err = ProximityGraph::init(&line(&[0.0, 3.0, 3.0]), params()).unwrap_err();
        assert!(matches!(err, Error::Coincident { i: 1, j: 2 }));
    }

    #[test]
    fn bad_params_rejected() {
        let mut p = params();
        p.eps2 = 8.0;
        assert!(p.validate().is_err());
        let mut p = params();
        p.eps1 = 6.0;
        assert!(p.validate().is_err());
    }

    #[test]
    fn hysteresis_rules() {
        let mut g = ProximityGraph::init(&line(&[0.0, 7.0]), params()).unwrap();
        assert_eq!(g.edge_count(), 0);

        // Inside (R - eps2, R): nothing happens.
        assert!(g.update(&line(&[0.0, 6.5]), 0.1).is_none());
        assert!(!g.has_edge(0, 1));

        // Just under R - eps2: link forms.
        let ev = g.update(&line(&[0.0, 6.0 - 0.001]), 0.2).unwrap().clone();
        assert_eq!(ev.added, vec![(0, 1)]);
        assert_eq!(ev.t, 0.2);

        // Held in the band.
        assert!(g.update(&line(&[0.0, 8.0 - 0.001]), 0.3).is_none());
        assert!(g.has_edge(1, 0));

        // Dropped at R.
        let ev = g.update(&line(&[0.0, 8.0]), 0.4).unwrap().clone();
        assert_eq!(ev.removed, vec![(0, 1)]);
        assert_eq!(g.switch_log().len(), 2);
    }

    #[test]
    fn far_pairs_may_link_later() {
        let mut g = ProximityGraph::init(&line(&[0.0, 20.0]), params()).unwrap();
        g.update(&line(&[0.0, 5.0]), 1.0);
        assert!(g.has_edge(0, 1));
    }

    #[test]
    fn path_graph_connectivity() {
        let edges: Vec<_> = (0..14).map(|i| (i, i + 1)).collect();
        let g = ProximityGraph::from_edges(15, &edges, params());
        assert!(g.is_connected());
        let cut: Vec<_> = edges.iter().copied().filter(|&e| e != (7, 8)).collect();
        let g = ProximityGraph::from_edges(15, &cut, params());
        assert!(!g.is_connected());
    }

    #[test]
    fn edgeless_pair_is_disconnected() {
        let g = ProximityGraph::from_edges(2, &[], params());
        assert!(!g.is_connected());
    }

    proptest! {
        #[test]
        fn symmetric_and_consistent(pts in proptest::collection::vec((-10.0f64..10.0, -10.0f64..10.0), 2..12)) {
            let pos: Vec<Vec2> = pts.iter().map(|&(x, y)| Vec2::new(x, y)).collect();
            let distinct = (0..pos.len()).all(|i| (i + 1..pos.len()).all(|j| pos[i] != pos[j]));
            prop_assume!(distinct);
            let mut g = ProximityGraph::init(&pos, params()).unwrap();
            let moved: Vec<Vec2> = pos.iter().map(|p| p * 0.7).collect();
            g.update(&moved, 1.0);
            for i in 0..pos.len() {
                prop_assert!(!g.has_edge(i, i));
                for &j in g.neighbors(i) {
                    prop_assert!(g.neighbors(j).contains(&i));
                    prop_assert!(g.has_edge(i, j) && g.has_edge(j, i));
                }
            }
            prop_assert_eq!(g.edges().count(), g.edge_count());
            prop_assert!(g.edge_count() <= pos.len() * (pos.len() - 1) / 2);
        }

        #[test]
        fn added_link_survives_until_sensing_radius(d0 in 0.1f64..5.99, d1 in 0.1f64..7.999) {
            let mut g = ProximityGraph::init(&line(&[0.0, 30.0]), params()).unwrap();
            g.update(&line(&[0.0, d0]), 1.0);
            prop_assert!(g.has_edge(0, 1));
            g.update(&line(&[0.0, d1]), 2.0);
            prop_assert!(g.has_edge(0, 1));
        }
    }
}

//! Directed communication topology between followers, plus the leader
//! pinning structure.
//!
//! Convention: `adjacency[i][j] = 1` means an arc from node j to node i,
//! so information flows j to i and row i of the Laplacian describes what
//! node i receives. Pins mark followers with a direct arc from the leader.

use crate::linalg::{self, Matrix};

pub type Result<T> = std::result::Result<T, GraphError>;

#[derive(Debug, Clone, thiserror::Error)]
pub enum GraphError {
    #[error("adjacency must be {n}x{n}, got {rows}x{cols}")]
    BadAdjacencyShape { n: usize, rows: usize, cols: usize },
    #[error("pin vector length {found} does not match follower count {n}")]
    BadPinLength { n: usize, found: usize },
    #[error("adjacency entries must be 0 or 1, found {value} at ({i}, {j})")]
    NotBinary { i: usize, j: usize, value: f64 },
    #[error("self loop at node {i}")]
    SelfLoop { i: usize },
    #[error("pin entries must be 0 or 1, found {value} at node {i}")]
    BadPin { i: usize, value: f64 },
    #[error("leader not globally reachable; Assumption 2 violated")]
    NotReachable,
    #[error(transparent)]
    Linalg(#[from] linalg::LinalgError),
}

/// Directed graph over `n` followers with leader pins.
#[derive(Debug, Clone, PartialEq)]
pub struct DirectedGraph {
    n: usize,
    adjacency: Vec<Vec<u8>>,
    pins: Vec<u8>,
}

impl DirectedGraph {
    /// Validates shape, binary entries, and the no-self-loop rule.
    pub fn new(adjacency: Vec<Vec<f64>>, pins: Vec<f64>) -> Result<Self> {
        let n = adjacency.len();
        for (i, row) in adjacency.iter().enumerate() {
            if row.len() != n {
                return Err(GraphError::BadAdjacencyShape {
                    n,
                    rows: adjacency.len(),
                    cols: row.len(),
                });
            }
            for (j, &v) in row.iter().enumerate() {
                if v != 0.0 && v != 1.0 {
                    return Err(GraphError::NotBinary { i, j, value: v });
                }
                if i == j && v != 0.0 {
                    return Err(GraphError::SelfLoop { i });
                }
            }
        }
        if pins.len() != n {
            return Err(GraphError::BadPinLength {
                n,
                found: pins.len(),
            });
        }
        for (i, &v) in pins.iter().enumerate() {
            if v != 0.0 && v != 1.0 {
                return Err(GraphError::BadPin { i, value: v });
            }
        }
        Ok(Self {
            n,
            adjacency: adjacency
                .into_iter()
                .map(|row| row.into_iter().map(|v| v as u8).collect())
                .collect(),
            pins: pins.into_iter().map(|v| v as u8).collect(),
        })
    }

    /// Builds a graph from 0-based arcs (from, to) and a 0-based pin list.
    pub fn from_arcs(n: usize, arcs: &[(usize, usize)], pinned: &[usize]) -> Result<Self> {
        let mut adjacency = vec![vec![0.0; n]; n];
        for &(from, to) in arcs {
            if from >= n || to >= n {
                return Err(GraphError::BadAdjacencyShape {
                    n,
                    rows: from.max(to) + 1,
                    cols: n,
                });
            }
            if from == to {
                return Err(GraphError::SelfLoop { i: from });
            }
            adjacency[to][from] = 1.0;
        }
        let mut pins = vec![0.0; n];
        for &p in pinned {
            if p >= n {
                return Err(GraphError::BadPinLength { n, found: p + 1 });
            }
            pins[p] = 1.0;
        }
        Self::new(adjacency, pins)
    }

    /// Directed ring 0 -> 1 -> ... -> n-1 -> 0 with node 0 pinned. The
    /// default five-follower scenario topology.
    pub fn default_ring(n: usize) -> Self {
        let arcs: Vec<(usize, usize)> = (0..n).map(|i| (i, (i + 1) % n)).collect();
        Self::from_arcs(n, &arcs, &[0]).expect("ring construction is always valid")
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn adjacency(&self, i: usize, j: usize) -> f64 {
        f64::from(self.adjacency[i][j])
    }

    pub fn pin(&self, i: usize) -> f64 {
        f64::from(self.pins[i])
    }

    /// Neighbor set of node i: all j with an arc j -> i.
    pub fn in_neighbors(&self, i: usize) -> Vec<usize> {
        (0..self.n).filter(|&j| self.adjacency[i][j] == 1).collect()
    }
}

/// Laplacian of the follower graph: in-degree diagonal minus adjacency.
/// Every row sums to zero.
pub fn laplacian(g: &DirectedGraph) -> Matrix {
    let n = g.n();
    Matrix::from_fn(n, n, |i, j| {
        if i == j {
            (0..n).map(|k| g.adjacency(i, k)).sum()
        } else {
            -g.adjacency(i, j)
        }
    })
}

/// Laplacian plus the diagonal pin matrix. This is the coupling structure
/// whose spectrum governs observer convergence.
pub fn pinned_matrix(g: &DirectedGraph) -> Matrix {
    let mut m = laplacian(g);
    for i in 0..g.n() {
        let v = m.get(i, i) + g.pin(i);
        m.set(i, i, v);
    }
    m
}

/// True when every follower is reachable from the leader: breadth-first
/// search seeded at the pinned nodes, following arcs j -> i.
pub fn is_globally_reachable(g: &DirectedGraph) -> bool {
    let n = g.n();
    let mut visited = vec![false; n];
    let mut queue: std::collections::VecDeque<usize> = (0..n)
        .filter(|&i| g.pin(i) == 1.0)
        .inspect(|&i| visited[i] = true)
        .collect();
    while let Some(j) = queue.pop_front() {
        for i in 0..n {
            if !visited[i] && g.adjacency(i, j) == 1.0 {
                visited[i] = true;
                queue.push_back(i);
            }
        }
    }
    visited.into_iter().all(|v| v)
}

/// Smallest admissible coupling gain 1 / (2 min Re lambda(L + B)).
///
/// Requires leader reachability, which is exactly the condition making
/// every eigenvalue of the pinned matrix sit in the open right half plane.
pub fn coupling_bound(g: &DirectedGraph) -> Result<f64> {
    if !is_globally_reachable(g) {
        return Err(GraphError::NotReachable);
    }
    let (_, min_re) = linalg::spectral_bounds(&pinned_matrix(g))?;
    Ok(1.0 / (2.0 * min_re))
}

//! Information sharing: neighbor graph, mixing matrix, and the consensus
//! averaging step applied to per-agent parameters each update cycle.
//!
//! Agents sit on a ring (fingers in hand order, first and last adjacent so
//! information travels a loop); the wrist stays out of the ring unless
//! explicitly included. Mixing uses Metropolis-Hastings weights, which are
//! symmetric and doubly stochastic by construction for any graph.

use crate::error::{Error, Result};
use crate::linalg::symmetric_eigenvalues;
use crate::net::Network;
use crate::scalar::Real;

// ---------------------------------------------------------------------------
// Topology
// ---------------------------------------------------------------------------

/// Undirected communication graph over agents. Agent 0 is the wrist.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Topology {
    pub n_agents: usize,
    /// Unordered edges stored as (min, max).
    pub edges: Vec<(usize, usize)>,
    /// Agents taking part in sharing; the rest are isolated.
    pub participants: Vec<usize>,
}

impl Topology {
    pub fn degree(&self, node: usize) -> usize {
        self.edges.iter().filter(|&&(a, b)| a == node || b == node).count()
    }

    pub fn has_edge(&self, i: usize, j: usize) -> bool {
        let e = (i.min(j), i.max(j));
        self.edges.contains(&e)
    }

    /// True when every participant can reach every other over edges.
    pub fn participants_connected(&self) -> bool {
        let Some(&start) = self.participants.first() else {
            return true;
        };
        let mut seen = vec![false; self.n_agents];
        let mut stack = vec![start];
        seen[start] = true;
        while let Some(u) = stack.pop() {
            for &(a, b) in &self.edges {
                let v = if a == u {
                    b
                } else if b == u {
                    a
                } else {
                    continue;
                };
                if !seen[v] {
                    seen[v] = true;
                    stack.push(v);
                }
            }
        }
        self.participants.iter().all(|&p| seen[p])
    }
}

/// Ring over the finger agents `1..n_agents` in hand order, closed between
/// the first and last fingers. With `include_wrist`, agent 0 joins by
/// connecting to the first two fingers; otherwise it stays isolated.
pub fn build_ring_topology(n_agents: usize, include_wrist: bool) -> Result<Topology> {
    if n_agents < 4 {
        return Err(Error::config(
            "ring topology needs at least 3 finger agents (4 agents total with the wrist)",
        ));
    }
    let fingers: Vec<usize> = (1..n_agents).collect();
    let mut edges = Vec::new();
    for w in fingers.windows(2) {
        edges.push((w[0], w[1]));
    }
    edges.push((fingers[0], *fingers.last().expect("at least 3 fingers")));
    let mut participants = fingers;
    if include_wrist {
        edges.push((0, 1));
        edges.push((0, 2));
        participants.insert(0, 0);
    }
    edges.sort_unstable();
    edges.dedup();
    Ok(Topology { n_agents, edges, participants })
}

// ---------------------------------------------------------------------------
// Mixing matrix
// ---------------------------------------------------------------------------

/// Symmetric doubly stochastic matrix respecting the topology's edges.
#[derive(Debug, Clone, PartialEq)]
pub struct MixingMatrix<R> {
    n: usize,
    entries: Vec<R>,
    topology: Topology,
}

impl<R: Real> MixingMatrix<R> {
    pub fn n(&self) -> usize {
        self.n
    }

    pub fn entry(&self, i: usize, j: usize) -> R {
        self.entries[i * self.n + j]
    }

    pub fn row(&self, i: usize) -> &[R] {
        &self.entries[i * self.n..(i + 1) * self.n]
    }

    pub fn topology(&self) -> &Topology {
        &self.topology
    }

    /// Checks symmetry, row/column stochasticity, non-negativity, and edge
    /// sparsity, all within `tol`.
    pub fn validate(&self, tol: R) -> bool {
        let n = self.n;
        for i in 0..n {
            let mut row_sum = R::zero();
            let mut col_sum = R::zero();
            for j in 0..n {
                let mij = self.entry(i, j);
                if mij < -tol {
                    return false;
                }
                if (mij - self.entry(j, i)).abs() > tol {
                    return false;
                }
                if i != j && mij.abs() > tol && !self.topology.has_edge(i, j) {
                    return false;
                }
                row_sum = row_sum + mij;
                col_sum = col_sum + self.entry(j, i);
            }
            if (row_sum - R::one()).abs() > tol || (col_sum - R::one()).abs() > tol {
                return false;
            }
        }
        true
    }

    /// One consensus step: output i is `sum_j M(j, i) * params[j]`.
    pub fn share(&self, params: &[Vec<R>]) -> Result<Vec<Vec<R>>> {
        if params.len() != self.n {
            return Err(Error::contract(format!(
                "share got {} parameter vectors for {} agents",
                params.len(),
                self.n
            )));
        }
        let len = params.first().map(Vec::len).unwrap_or(0);
        if params.iter().any(|p| p.len() != len) {
            return Err(Error::contract("share requires equal-length parameter vectors"));
        }
        let mut out = vec![vec![R::zero(); len]; self.n];
        for i in 0..self.n {
            for j in 0..self.n {
                let w = self.entry(j, i);
                if w == R::zero() {
                    continue;
                }
                let (dst, src) = (&mut out[i], &params[j]);
                for k in 0..len {
                    dst[k] = dst[k] + w * src[k];
                }
            }
        }
        Ok(out)
    }

    /// Second-largest eigenvalue modulus over the participating agents.
    /// Strictly below 1 exactly when repeated sharing contracts
    /// disagreement among participants.
    pub fn slem_participants(&self) -> R {
        let parts = &self.topology.participants;
        let m = parts.len();
        if m < 2 {
            return R::zero();
        }
        let mut sub = vec![R::zero(); m * m];
        for (a, &i) in parts.iter().enumerate() {
            for (b, &j) in parts.iter().enumerate() {
                sub[a * m + b] = self.entry(i, j);
            }
        }
        let eig = symmetric_eigenvalues(&sub, m);
        eig[0].abs().max(eig[m - 2].abs())
    }
}

/// Metropolis-Hastings weights: `M(i,j) = 1/(1 + max(deg i, deg j))` on
/// edges, diagonal being the leftover mass. Requires the participants to
/// form a connected graph, otherwise disagreement can never contract.
pub fn metropolis_weights<R: Real>(topology: &Topology) -> Result<MixingMatrix<R>> {
    if !topology.participants_connected() {
        return Err(Error::config("sharing topology must connect all participants"));
    }
    let n = topology.n_agents;
    let deg: Vec<usize> = (0..n).map(|i| topology.degree(i)).collect();
    let mut entries = vec![R::zero(); n * n];
    for &(i, j) in &topology.edges {
        let w = R::one() / R::from_usize(1 + deg[i].max(deg[j])).expect("degree fits");
        entries[i * n + j] = w;
        entries[j * n + i] = w;
    }
    for i in 0..n {
        let off: R = (0..n).filter(|&j| j != i).map(|j| entries[i * n + j]).sum();
        entries[i * n + i] = R::one() - off;
    }
    Ok(MixingMatrix { n, entries, topology: topology.clone() })
}

/// Applies one consensus step to the interior layers of per-agent networks,
/// leaving the agent-specific input and output layers untouched.
pub fn share_network_interiors<R: Real>(
    mixing: &MixingMatrix<R>,
    nets: &mut [Network<R>],
) -> Result<()> {
    if nets.len() != mixing.n() {
        return Err(Error::contract(format!(
            "interior share got {} networks for {} agents",
            nets.len(),
            mixing.n()
        )));
    }
    let slices: Vec<Vec<R>> = nets
        .iter()
        .map(|net| net.params()[net.interior_param_range()].to_vec())
        .collect();
    let len = slices.first().map(Vec::len).unwrap_or(0);
    if slices.iter().any(|s| s.len() != len) {
        return Err(Error::contract(
            "interior share requires identical hidden widths across agents",
        ));
    }
    let mixed = mixing.share(&slices)?;
    for (net, new_interior) in nets.iter_mut().zip(mixed) {
        let range = net.interior_param_range();
        net.params_mut()[range].copy_from_slice(&new_interior);
    }
    Ok(())
}

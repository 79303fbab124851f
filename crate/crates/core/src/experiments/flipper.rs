//! Products of single-site `S` gates that flip a prescribed set of loops.
//!
//! `S^k` at `v` flips the two loops through the sides of `v` other than `k`,
//! so each (vertex, superscript) pair is an edge between two loops. A
//! flipper for a target syndrome is a set of such edges whose odd-degree
//! loops are exactly the target: a T-join in the loop graph. The solver
//! returns a minimum one by pairing target loops along shortest paths.

use std::collections::{BTreeMap, BTreeSet, HashSet, VecDeque};
use std::sync::Arc;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use crate::algebra::Letter;
use crate::constraints::{syndrome_of, syndrome_shift, Configuration, Syndrome};
use crate::error::{invalid, resource, Result};
use crate::lattice::Lattice;
use crate::state::{build_phi, build_psi, phi_target, GatePlacement, LocalOperator, SparseState};

pub const MAX_FLIPPER_TERMINALS: usize = 20;

/// `(neighbor loop, vertex, superscript)`
type LoopEdge = (usize, usize, u8);
/// Distances and parent edges of a breadth-first tree.
type BfsTree = (Vec<usize>, Vec<Option<LoopEdge>>);

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct FlipperQuery {
    pub target: Syndrome,
    pub forbidden: BTreeSet<usize>,
}

impl FlipperQuery {
    /// The largest-four-loops pattern with the given sites excluded.
    pub fn largest_four(lattice: &Lattice, forbidden: impl IntoIterator<Item = usize>) -> Result<Self> {
        Ok(FlipperQuery { target: phi_target(lattice)?, forbidden: forbidden.into_iter().collect() })
    }
}

/// `∏ S^{k}_{v}` over `ops`, with distinct vertices in increasing order.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct Flipper {
    pub ops: Vec<(usize, u8)>,
}

impl Flipper {
    pub fn support(&self) -> Vec<usize> {
        self.ops.iter().map(|&(v, _)| v).collect()
    }

    pub fn weight(&self) -> usize {
        self.ops.len()
    }

    pub fn shift(&self, lattice: &Lattice) -> Syndrome {
        syndrome_shift(lattice, &self.ops)
    }

    pub fn apply(&self, config: &Configuration) -> Configuration {
        let mut c = config.clone();
        for &(v, k) in &self.ops {
            c.0[v] ^= k as Letter;
        }
        c
    }

    pub fn gates(&self) -> Result<Vec<GatePlacement>> {
        self.ops.iter().map(|&(v, k)| GatePlacement::s(v, k)).collect()
    }

    pub fn operator(&self) -> Result<LocalOperator> {
        let ks: Vec<u8> = self.ops.iter().map(|&(_, k)| k).collect();
        LocalOperator::s_product(self.support(), &ks)
    }
}

/// Minimum T-join solver; `None` when no product avoiding the forbidden
/// sites realizes the target.
pub fn find_syndrome_flipper(lattice: &Lattice, query: &FlipperQuery) -> Result<Option<Flipper>> {
    let nloops = lattice.loops().len();
    if query.target.len() != nloops {
        return invalid("target length differs from the loop count");
    }
    for &v in &query.forbidden {
        lattice.check_vertex(v)?;
    }
    let terminals = query.target.ones();
    if terminals.len() % 2 == 1 {
        return Ok(None);
    }
    if terminals.len() > MAX_FLIPPER_TERMINALS {
        return resource(format!("{} target loops exceed {MAX_FLIPPER_TERMINALS}", terminals.len()));
    }
    let mut adj: Vec<Vec<LoopEdge>> = vec![Vec::new(); nloops];
    for v in (0..lattice.vertex_count()).filter(|v| !query.forbidden.contains(v)) {
        for k in 1..=3u8 {
            let (a, b) = match k {
                1 => (2, 3),
                2 => (1, 3),
                _ => (1, 2),
            };
            let (la, lb) = (lattice.loop_of_side(v, a), lattice.loop_of_side(v, b));
            adj[la].push((lb, v, k));
            adj[lb].push((la, v, k));
        }
    }
    let trees: Vec<BfsTree> = terminals.iter().map(|&t| bfs_tree(&adj, t)).collect();
    let m = terminals.len();
    let full = (1usize << m) - 1;
    const INF: usize = usize::MAX / 4;
    let mut dp = vec![INF; 1 << m];
    let mut choice = vec![(0usize, 0usize); 1 << m];
    dp[0] = 0;
    for mask in 1..=full {
        if mask.count_ones() % 2 == 1 {
            continue;
        }
        let i = mask.trailing_zeros() as usize;
        for j in (i + 1)..m {
            if mask >> j & 1 == 0 {
                continue;
            }
            let d = trees[i].0[terminals[j]];
            let rest = dp[mask & !(1 << i) & !(1 << j)];
            if d != INF && rest != INF && d + rest < dp[mask] {
                dp[mask] = d + rest;
                choice[mask] = (i, j);
            }
        }
    }
    if dp[full] == INF {
        return Ok(None);
    }
    let mut parity: BTreeMap<(usize, u8), bool> = BTreeMap::new();
    let mut mask = full;
    while mask != 0 {
        let (i, j) = choice[mask];
        let (_, parent) = &trees[i];
        let mut node = terminals[j];
        while node != terminals[i] {
            let (prev, v, k) = parent[node].expect("reachable");
            *parity.entry((v, k)).or_insert(false) ^= true;
            node = prev;
        }
        mask &= !(1 << i) & !(1 << j);
    }
    let mut letters: BTreeMap<usize, u8> = BTreeMap::new();
    for ((v, k), odd) in parity {
        if odd {
            *letters.entry(v).or_insert(0) ^= k;
        }
    }
    let flipper = Flipper { ops: letters.into_iter().filter(|&(_, k)| k != 0).collect() };
    debug_assert_eq!(flipper.shift(lattice), query.target);
    Ok(Some(flipper))
}

fn bfs_tree(adj: &[Vec<LoopEdge>], src: usize) -> BfsTree {
    let n = adj.len();
    let mut dist = vec![usize::MAX / 4; n];
    let mut parent = vec![None; n];
    dist[src] = 0;
    let mut q = VecDeque::from([src]);
    while let Some(x) = q.pop_front() {
        for &(y, v, k) in &adj[x] {
            if dist[y] > dist[x] + 1 {
                dist[y] = dist[x] + 1;
                parent[y] = Some((x, v, k));
                q.push_back(y);
            }
        }
    }
    (dist, parent)
}

#[derive(Debug, Clone, Serialize)]
pub struct FlipperCheck {
    pub shift_matches: bool,
    /// Explicit `F|Ψ⟩ = |Φ⟩` (generation ≤ 2 only).
    pub maps_psi_to_phi: Option<bool>,
    pub samples: usize,
    pub samples_in_phi: usize,
    pub samples_distinct: bool,
}

/// Validates a flipper: syndrome arithmetic, the explicit map at generation
/// ≤ 2, and the coset map on sampled solutions.
pub fn check_flipper(lattice: &Arc<Lattice>, flipper: &Flipper, samples: usize, seed: u64) -> Result<FlipperCheck> {
    let target = phi_target(lattice)?;
    let shift_matches = flipper.shift(lattice) == target;
    let psi = build_psi(lattice)?;
    let maps_psi_to_phi = if lattice.generation() <= 2 {
        let xp = SparseState::from_coset(&psi)?;
        let xf = SparseState::from_coset(&build_phi(lattice)?)?;
        Some(xp.apply_gates(&flipper.gates()?)? == xf)
    } else {
        None
    };
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut inputs = HashSet::new();
    let mut images = HashSet::new();
    let mut in_phi = 0;
    for _ in 0..samples {
        let c = psi.system().sample_with(&mut rng)?;
        let img = flipper.apply(&c);
        if syndrome_of(lattice, &img)? == target {
            in_phi += 1;
        }
        if inputs.insert(c) {
            images.insert(img);
        }
    }
    Ok(FlipperCheck {
        shift_matches,
        maps_psi_to_phi,
        samples,
        samples_in_phi: in_phi,
        samples_distinct: inputs.len() == images.len(),
    })
}

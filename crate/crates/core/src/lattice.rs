//! The block-based Sierpiński gasket graph.
//!
//! A generation-`g` lattice has `3^g` vertices. Generation 1 is a single
//! block (triangle) with vertices at positions `t`, `l`, `r`; generation `g`
//! joins three generation-`(g−1)` copies `T`, `L`, `R` with three LINK edges
//! between their facing corners. A vertex address is the path of sub-lattice
//! choices followed by the position inside the smallest block, and its
//! integer id is the base-3 reading of that path.
//!
//! Every vertex owns three ports. Port 1 always faces outward (the LINK edge,
//! or the corner anchor for the three lattice corners); ports 2 and 3 face
//! the two block mates according to a [`PortConvention`]. Side `s` of a vertex
//! is the side opposite port `s`, and a loop passing through a vertex uses the
//! side between the two ports by which it enters and leaves.

use std::collections::{HashMap, HashSet, VecDeque};
use std::fmt;

use rayon::prelude::*;
use serde::Serialize;

use crate::error::{invalid, resource, Error, Result};

pub const DEFAULT_GENERATION_CAP: u32 = 12;

/// Block positions.
pub const POS_T: u8 = 0;
pub const POS_L: u8 = 1;
pub const POS_R: u8 = 2;

/// How ports 2 and 3 are assigned to the two block mates of a vertex.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Default)]
pub enum PortConvention {
    /// Port 2 points to the next position in the cycle t→l→r→t, port 3 to
    /// the previous one.
    #[default]
    Rotational,
    /// Mirror image of [`PortConvention::Rotational`]. Kept as a negative
    /// control: the coarse-graining table is not a fixed point under it.
    Transposed,
}

impl PortConvention {
    /// Port index (2 or 3) at a vertex in block position `at` that points to
    /// the block mate in position `to`.
    pub fn inner_port(self, at: u8, to: u8) -> u8 {
        debug_assert!(at != to && at < 3 && to < 3);
        let to_next = to == (at + 1) % 3;
        match (self, to_next) {
            (PortConvention::Rotational, true) | (PortConvention::Transposed, false) => 2,
            _ => 3,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize)]
pub enum EdgeKind {
    Block,
    /// Added when assembling a lattice of generation `level` from three
    /// generation-`(level−1)` copies.
    Link {
        level: u32,
    },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize)]
pub struct Edge {
    pub u: usize,
    pub v: usize,
    pub kind: EdgeKind,
}

impl Edge {
    pub fn other(&self, x: usize) -> usize {
        if x == self.u {
            self.v
        } else {
            self.u
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize)]
pub enum Attachment {
    Edge(usize),
    /// One of the three lattice corners (0 = t, 1 = l, 2 = r).
    CornerAnchor(u8),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize)]
pub struct Port {
    pub owner: usize,
    /// 1, 2 or 3.
    pub index: u8,
    pub attachment: Attachment,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize)]
pub enum LateralSide {
    /// Corner t to corner l.
    Left,
    /// Corner t to corner r.
    Right,
    /// Corner l to corner r.
    Bottom,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize)]
pub enum LoopKind {
    Block,
    Ring { scale: u32 },
    Lateral(LateralSide),
}

/// A parity loop: the cyclic sequence of (vertex, side) incidences.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct Loop {
    pub kind: LoopKind,
    pub incidences: Vec<(usize, u8)>,
}

impl Loop {
    pub fn vertices(&self) -> impl Iterator<Item = usize> + '_ {
        self.incidences.iter().map(|&(v, _)| v)
    }
}

/// Vertex address: `g−1` sub-lattice trits followed by the block position.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Address(pub Vec<u8>);

impl Address {
    pub fn from_id(id: usize, generation: u32) -> Self {
        let mut trits = vec![0u8; generation as usize];
        let mut x = id;
        for t in trits.iter_mut().rev() {
            *t = (x % 3) as u8;
            x /= 3;
        }
        Address(trits)
    }

    pub fn to_id(&self) -> usize {
        self.0.iter().fold(0usize, |acc, &t| acc * 3 + t as usize)
    }

    pub fn parse(s: &str) -> Result<Self> {
        let chars: Vec<char> = s.chars().collect();
        if chars.is_empty() {
            return invalid("empty address");
        }
        let mut trits = Vec::with_capacity(chars.len());
        for (i, c) in chars.iter().enumerate() {
            let last = i + 1 == chars.len();
            let t = match (c, last) {
                ('T', false) | ('t', true) => 0,
                ('L', false) | ('l', true) => 1,
                ('R', false) | ('r', true) => 2,
                _ => return invalid(format!("bad address {s:?}")),
            };
            trits.push(t);
        }
        Ok(Address(trits))
    }
}

impl fmt::Display for Address {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let n = self.0.len();
        for (i, &t) in self.0.iter().enumerate() {
            let c = if i + 1 == n { b"tlr"[t as usize] } else { b"TLR"[t as usize] };
            write!(f, "{}", c as char)?;
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy)]
pub struct LatticeOptions {
    pub generation_cap: u32,
    pub convention: PortConvention,
}

impl Default for LatticeOptions {
    fn default() -> Self {
        LatticeOptions { generation_cap: DEFAULT_GENERATION_CAP, convention: PortConvention::Rotational }
    }
}

#[derive(Debug, Clone)]
pub struct Lattice {
    generation: u32,
    convention: PortConvention,
    edges: Vec<Edge>,
    /// `ports[v][p-1]`
    ports: Vec<[Attachment; 3]>,
    loops: Vec<Loop>,
    /// `side_loop[v][s-1]`: the loop carrying side `s` of `v`.
    side_loop: Vec<[usize; 3]>,
    corners: [usize; 3],
}

/// Intermediate recursive structure: chains of vertex ids.
struct Partial {
    n: usize,
    edges: Vec<Edge>,
    cycles: Vec<(LoopKind, Vec<usize>)>,
    laterals: [Vec<usize>; 3],
    corners: [usize; 3],
}

impl Partial {
    fn block() -> Self {
        Partial {
            n: 3,
            edges: vec![
                Edge { u: 0, v: 1, kind: EdgeKind::Block },
                Edge { u: 0, v: 2, kind: EdgeKind::Block },
                Edge { u: 1, v: 2, kind: EdgeKind::Block },
            ],
            cycles: vec![(LoopKind::Block, vec![0, 1, 2])],
            laterals: [vec![0, 1], vec![0, 2], vec![1, 2]],
            corners: [0, 1, 2],
        }
    }

    fn assemble(sub: &Partial, level: u32) -> Self {
        let n = sub.n;
        let off = |s: usize, v: usize| s * n + v;
        let shift = |s: usize, chain: &[usize]| chain.iter().map(|&v| off(s, v)).collect::<Vec<_>>();
        let (t, l, r) = (0usize, 1usize, 2usize);
        let mut edges = Vec::with_capacity(3 * sub.edges.len() + 3);
        let mut cycles = Vec::with_capacity(3 * sub.cycles.len() + 1);
        for s in 0..3 {
            edges.extend(sub.edges.iter().map(|e| Edge { u: off(s, e.u), v: off(s, e.v), kind: e.kind }));
            cycles.extend(sub.cycles.iter().map(|(k, c)| (*k, shift(s, c))));
        }
        let [ct, cl, cr] = sub.corners;
        for (a, ca, b, cb) in [(t, cl, l, ct), (t, cr, r, ct), (l, cr, r, cl)] {
            edges.push(Edge { u: off(a, ca), v: off(b, cb), kind: EdgeKind::Link { level } });
        }
        let [left, right, bottom] = &sub.laterals;
        let mut ring = shift(t, bottom);
        ring.extend(shift(r, left));
        ring.extend(shift(l, right).into_iter().rev());
        cycles.push((LoopKind::Ring { scale: level }, ring));
        let cat = |a: usize, ca: &[usize], b: usize, cb: &[usize]| {
            let mut v = shift(a, ca);
            v.extend(shift(b, cb));
            v
        };
        Partial {
            n: 3 * n,
            edges,
            cycles,
            laterals: [cat(t, left, l, left), cat(t, right, r, right), cat(l, bottom, r, bottom)],
            corners: [off(t, ct), off(l, cl), off(r, cr)],
        }
    }
}

/// Builds the lattice of the given generation with the default options.
pub fn build_lattice(generation: u32) -> Result<Lattice> {
    Lattice::build(generation, LatticeOptions::default())
}

impl Lattice {
    pub fn build(generation: u32, opts: LatticeOptions) -> Result<Lattice> {
        if generation < 1 {
            return invalid("generation must be at least 1");
        }
        if generation > opts.generation_cap {
            return resource(format!("generation {generation} above cap {}", opts.generation_cap));
        }
        let mut p = Partial::block();
        for level in 2..=generation {
            p = Partial::assemble(&p, level);
        }
        let n = p.n;
        let convention = opts.convention;

        let mut ports: Vec<[Option<Attachment>; 3]> = vec![[None; 3]; n];
        for (ei, e) in p.edges.iter().enumerate() {
            for (x, y) in [(e.u, e.v), (e.v, e.u)] {
                let port = match e.kind {
                    EdgeKind::Link { .. } => 1,
                    EdgeKind::Block => convention.inner_port((x % 3) as u8, (y % 3) as u8),
                };
                let slot = &mut ports[x][port as usize - 1];
                assert!(slot.is_none(), "port assigned twice");
                *slot = Some(Attachment::Edge(ei));
            }
        }
        for (ci, &c) in p.corners.iter().enumerate() {
            assert!(ports[c][0].is_none());
            ports[c][0] = Some(Attachment::CornerAnchor(ci as u8));
        }
        let ports: Vec<[Attachment; 3]> =
            ports.into_iter().map(|ps| ps.map(|a| a.expect("every port is attached"))).collect();

        let mut lattice = Lattice {
            generation,
            convention,
            edges: p.edges,
            ports,
            loops: Vec::new(),
            side_loop: Vec::new(),
            corners: p.corners,
        };

        let mut loops = Vec::with_capacity(p.cycles.len() + 3);
        for (kind, chain) in &p.cycles {
            loops.push(Loop { kind: *kind, incidences: lattice.chain_incidences(chain, true) });
        }
        let sides = [LateralSide::Left, LateralSide::Right, LateralSide::Bottom];
        for (side, chain) in sides.into_iter().zip(&p.laterals) {
            loops.push(Loop { kind: LoopKind::Lateral(side), incidences: lattice.chain_incidences(chain, false) });
        }
        let mut side_loop = vec![[usize::MAX; 3]; n];
        for (li, lp) in loops.iter().enumerate() {
            for &(v, s) in &lp.incidences {
                let slot = &mut side_loop[v][s as usize - 1];
                assert_eq!(*slot, usize::MAX, "side carried by two loops");
                *slot = li;
            }
        }
        assert!(side_loop.iter().all(|s| s.iter().all(|&l| l != usize::MAX)));
        lattice.loops = loops;
        lattice.side_loop = side_loop;
        Ok(lattice)
    }

    fn chain_incidences(&self, chain: &[usize], cyclic: bool) -> Vec<(usize, u8)> {
        let k = chain.len();
        (0..k)
            .map(|i| {
                let v = chain[i];
                let prev = if i > 0 {
                    Some(chain[i - 1])
                } else if cyclic {
                    Some(chain[k - 1])
                } else {
                    None
                };
                let next = if i + 1 < k {
                    Some(chain[i + 1])
                } else if cyclic {
                    Some(chain[0])
                } else {
                    None
                };
                // open chain ends leave through the corner anchor on port 1
                let pa = prev.map_or(1, |w| self.port_toward(v, w).expect("chain vertices adjacent"));
                let pb = next.map_or(1, |w| self.port_toward(v, w).expect("chain vertices adjacent"));
                assert_ne!(pa, pb);
                (v, 6 - pa - pb)
            })
            .collect()
    }

    pub fn generation(&self) -> u32 {
        self.generation
    }

    pub fn convention(&self) -> PortConvention {
        self.convention
    }

    pub fn vertex_count(&self) -> usize {
        self.ports.len()
    }

    pub fn edges(&self) -> &[Edge] {
        &self.edges
    }

    pub fn loops(&self) -> &[Loop] {
        &self.loops
    }

    pub fn corners(&self) -> [usize; 3] {
        self.corners
    }

    pub fn is_corner(&self, v: usize) -> bool {
        self.corners.contains(&v)
    }

    pub fn address(&self, v: usize) -> Address {
        Address::from_id(v, self.generation)
    }

    pub fn vertex_of(&self, addr: &Address) -> Result<usize> {
        if addr.0.len() != self.generation as usize {
            return invalid(format!("address {addr} has wrong length for generation {}", self.generation));
        }
        Ok(addr.to_id())
    }

    pub fn check_vertex(&self, v: usize) -> Result<()> {
        if v < self.vertex_count() {
            Ok(())
        } else {
            invalid(format!("unknown vertex {v}"))
        }
    }

    pub fn port(&self, v: usize, index: u8) -> Port {
        Port { owner: v, index, attachment: self.ports[v][index as usize - 1] }
    }

    pub fn ports(&self, v: usize) -> [Port; 3] {
        [self.port(v, 1), self.port(v, 2), self.port(v, 3)]
    }

    /// Neighbor reached through a port, if the port holds an edge.
    pub fn neighbor(&self, v: usize, port: u8) -> Option<usize> {
        match self.ports[v][port as usize - 1] {
            Attachment::Edge(e) => Some(self.edges[e].other(v)),
            Attachment::CornerAnchor(_) => None,
        }
    }

    pub fn neighbors(&self, v: usize) -> impl Iterator<Item = usize> + '_ {
        (1..=3).filter_map(move |p| self.neighbor(v, p))
    }

    pub fn degree(&self, v: usize) -> usize {
        self.neighbors(v).count()
    }

    pub fn are_adjacent(&self, u: usize, v: usize) -> bool {
        self.neighbors(u).any(|w| w == v)
    }

    /// Port of `v` whose edge leads to `w`.
    pub fn port_toward(&self, v: usize, w: usize) -> Option<u8> {
        (1..=3).find(|&p| self.neighbor(v, p) == Some(w))
    }

    pub fn edge_between(&self, u: usize, v: usize) -> Option<usize> {
        let p = self.port_toward(u, v)?;
        match self.ports[u][p as usize - 1] {
            Attachment::Edge(e) => Some(e),
            Attachment::CornerAnchor(_) => None,
        }
    }

    /// Loop carrying side `side` (1..=3) of `v`.
    pub fn loop_of_side(&self, v: usize, side: u8) -> usize {
        self.side_loop[v][side as usize - 1]
    }

    /// The three loops through `v`, indexed by side.
    pub fn loops_of_vertex(&self, v: usize) -> [usize; 3] {
        self.side_loop[v]
    }

    pub fn block_count(&self) -> usize {
        self.vertex_count() / 3
    }

    /// Vertices of block `b` in (t, l, r) order.
    pub fn block_vertices(&self, b: usize) -> [usize; 3] {
        [3 * b, 3 * b + 1, 3 * b + 2]
    }

    /// Position of block `b` inside its parent (the last trit of the block's
    /// coarse address); `None` for a generation-1 lattice.
    pub fn block_position(&self, b: usize) -> Option<u8> {
        (self.generation >= 2).then_some((b % 3) as u8)
    }

    pub fn loop_index_of(&self, kind: LoopKind) -> Option<usize> {
        self.loops.iter().position(|l| l.kind == kind)
    }

    pub fn lateral_loops(&self) -> [usize; 3] {
        let n = self.loops.len();
        [n - 3, n - 2, n - 1]
    }

    /// The three laterals plus the ring around the central hole.
    pub fn largest_four_loops(&self) -> Result<[usize; 4]> {
        if self.generation < 2 {
            return Err(Error::UnsupportedGeneration {
                generation: self.generation,
                reason: "no ring loop exists below generation 2".into(),
            });
        }
        let ring = self.loop_index_of(LoopKind::Ring { scale: self.generation }).expect("top-level ring present");
        let [a, b, c] = self.lateral_loops();
        Ok([a, b, c, ring])
    }

    /// Number of LINK edges along one lateral.
    pub fn lateral_link_count(&self) -> usize {
        self.loops[self.lateral_loops()[0]].incidences.len() - 1
    }

    pub fn bfs_from(&self, src: usize) -> Vec<usize> {
        let mut dist = vec![usize::MAX; self.vertex_count()];
        let mut q = VecDeque::new();
        dist[src] = 0;
        q.push_back(src);
        while let Some(x) = q.pop_front() {
            for y in self.neighbors(x) {
                if dist[y] == usize::MAX {
                    dist[y] = dist[x] + 1;
                    q.push_back(y);
                }
            }
        }
        dist
    }

    pub fn graph_distance(&self, u: usize, v: usize) -> Result<usize> {
        self.check_vertex(u)?;
        self.check_vertex(v)?;
        Ok(self.bfs_from(u)[v])
    }

    /// Exact graph diameter by BFS from every vertex.
    pub fn bfs_diameter(&self) -> usize {
        (0..self.vertex_count())
            .into_par_iter()
            .map(|v| self.bfs_from(v).into_iter().max().unwrap_or(0))
            .max()
            .unwrap_or(0)
    }

    /// Distances from `src` to every vertex within `radius`.
    pub fn ball(&self, src: usize, radius: usize) -> HashMap<usize, usize> {
        let mut dist = HashMap::from([(src, 0usize)]);
        let mut q = VecDeque::from([src]);
        while let Some(x) = q.pop_front() {
            let d = dist[&x];
            if d == radius {
                continue;
            }
            for y in self.neighbors(x) {
                dist.entry(y).or_insert_with(|| {
                    q.push_back(y);
                    d + 1
                });
            }
        }
        dist
    }

    /// Shortest-path distances from `src` inside the subgraph induced by `subset`.
    fn induced_bfs(&self, subset: &HashSet<usize>, src: usize) -> HashMap<usize, usize> {
        let mut dist = HashMap::from([(src, 0usize)]);
        let mut q = VecDeque::from([src]);
        while let Some(x) = q.pop_front() {
            let d = dist[&x];
            for y in self.neighbors(x) {
                if subset.contains(&y) && !dist.contains_key(&y) {
                    dist.insert(y, d + 1);
                    q.push_back(y);
                }
            }
        }
        dist
    }

    pub fn is_connected_subset(&self, subset: &[usize]) -> bool {
        let Some(&first) = subset.first() else { return false };
        let set: HashSet<usize> = subset.iter().copied().collect();
        self.induced_bfs(&set, first).len() == set.len()
    }

    /// Diameter of the subgraph induced by `subset`.
    pub fn subset_diameter(&self, subset: &[usize]) -> Result<usize> {
        if subset.is_empty() {
            return invalid("empty subset");
        }
        for &v in subset {
            self.check_vertex(v)?;
        }
        let set: HashSet<usize> = subset.iter().copied().collect();
        let mut diam = 0;
        for &v in &set {
            let d = self.induced_bfs(&set, v);
            if d.len() != set.len() {
                return invalid("subset is not connected in the induced subgraph");
            }
            diam = diam.max(d.values().copied().max().unwrap_or(0));
        }
        Ok(diam)
    }

    /// Every connected vertex set with induced diameter at most
    /// `max_diameter` and at most `max_size` vertices, each listed once in
    /// increasing vertex order. Sets are grouped by their smallest vertex.
    pub fn connected_subsets_up_to(
        &self,
        max_diameter: usize,
        max_size: usize,
    ) -> impl Iterator<Item = Vec<usize>> + '_ {
        (0..self.vertex_count()).flat_map(move |root| self.subsets_rooted_at(root, max_diameter, max_size))
    }

    /// ESU-style enumeration of connected sets whose minimum vertex is `root`.
    /// Candidates are pruned by graph distance, which can only grow under
    /// supersets; the induced diameter is checked on output.
    fn subsets_rooted_at(&self, root: usize, max_diameter: usize, max_size: usize) -> Vec<Vec<usize>> {
        let mut out = Vec::new();
        if max_size == 0 {
            return out;
        }
        let mut balls: HashMap<usize, HashMap<usize, usize>> = HashMap::new();
        let mut within = |a: usize, b: usize| -> bool {
            balls.entry(a).or_insert_with(|| self.ball(a, max_diameter)).contains_key(&b)
        };
        struct Frame {
            sub: Vec<usize>,
            ext: Vec<usize>,
        }
        let init_ext: Vec<usize> = {
            let mut e: Vec<usize> = self.neighbors(root).filter(|&w| w > root).collect();
            e.sort_unstable();
            e.reverse();
            e
        };
        out.push(vec![root]);
        let mut stack = vec![Frame { sub: vec![root], ext: init_ext }];
        while let Some(mut frame) = stack.pop() {
            if frame.ext.is_empty() || frame.sub.len() == max_size {
                continue;
            }
            let w = frame.ext.pop().expect("nonempty");
            let rest = frame.ext.clone();
            let sub = frame.sub.clone();
            stack.push(frame);
            if !sub.iter().all(|&x| within(x, w)) {
                continue;
            }
            let mut child_ext = rest;
            let mut excl: Vec<usize> = self
                .neighbors(w)
                .filter(|&u| {
                    u > root
                        && !sub.contains(&u)
                        && !child_ext.contains(&u)
                        && !sub.iter().any(|&s| self.are_adjacent(s, u))
                })
                .collect();
            excl.sort_unstable();
            excl.reverse();
            // new candidates are consumed after the inherited ones
            let mut merged = excl;
            merged.append(&mut child_ext);
            let mut child_sub = sub;
            child_sub.push(w);
            let mut sorted = child_sub.clone();
            sorted.sort_unstable();
            if self.subset_diameter(&sorted).map(|d| d <= max_diameter).unwrap_or(false) {
                out.push(sorted);
            }
            stack.push(Frame { sub: child_sub, ext: merged });
        }
        out
    }

    pub fn to_report(&self) -> LatticeReport {
        LatticeReport {
            generation: self.generation,
            vertices: (0..self.vertex_count())
                .map(|v| VertexReport { id: v, address: self.address(v).to_string(), degree: self.degree(v) })
                .collect(),
            edges: self
                .edges
                .iter()
                .map(|e| EdgeReport {
                    u: e.u,
                    v: e.v,
                    kind: match e.kind {
                        EdgeKind::Block => "BLOCK".to_string(),
                        EdgeKind::Link { level } => format!("LINK({level})"),
                    },
                })
                .collect(),
            loops: self
                .loops
                .iter()
                .map(|l| {
                    let (kind, scale) = match l.kind {
                        LoopKind::Block => ("BLOCK", 1),
                        LoopKind::Ring { scale } => ("RING", scale),
                        LoopKind::Lateral(_) => ("LATERAL", self.generation),
                    };
                    LoopReport { kind: kind.to_string(), scale, incidences: l.incidences.clone() }
                })
                .collect(),
            corners: self.corners,
            diameter: self.bfs_diameter(),
        }
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct VertexReport {
    pub id: usize,
    pub address: String,
    pub degree: usize,
}

#[derive(Debug, Clone, Serialize)]
pub struct EdgeReport {
    pub u: usize,
    pub v: usize,
    pub kind: String,
}

#[derive(Debug, Clone, Serialize)]
pub struct LoopReport {
    pub kind: String,
    pub scale: u32,
    pub incidences: Vec<(usize, u8)>,
}

/// Canonical serialization of a lattice.
#[derive(Debug, Clone, Serialize)]
pub struct LatticeReport {
    pub generation: u32,
    pub vertices: Vec<VertexReport>,
    pub edges: Vec<EdgeReport>,
    pub loops: Vec<LoopReport>,
    pub corners: [usize; 3],
    pub diameter: usize,
}

/// Number of loops of a generation-`g` lattice.
pub fn loop_count(generation: u32) -> usize {
    let p = 3usize.pow(generation - 1);
    p + (p - 1) / 2 + 3
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::collections::BTreeSet;

    #[test]
    fn generation_one_is_a_single_block() {
        let lat = build_lattice(1).unwrap();
        assert_eq!(lat.vertex_count(), 3);
        assert_eq!(lat.edges().len(), 3);
        assert!(lat.edges().iter().all(|e| e.kind == EdgeKind::Block));
        let kinds: Vec<_> = lat.loops().iter().map(|l| l.kind).collect();
        assert_eq!(kinds.iter().filter(|k| **k == LoopKind::Block).count(), 1);
        assert_eq!(kinds.iter().filter(|k| matches!(k, LoopKind::Lateral(_))).count(), 3);
        assert_eq!(lat.bfs_diameter(), 1);
    }

    #[test]
    fn generation_two_counts() {
        let lat = build_lattice(2).unwrap();
        assert_eq!(lat.vertex_count(), 9);
        assert_eq!(lat.edges().len(), 12);
        let links = lat.edges().iter().filter(|e| matches!(e.kind, EdgeKind::Link { .. })).count();
        assert_eq!(links, 3);
        assert_eq!(lat.loops().len(), 7);
        let rings: Vec<_> = lat.loops().iter().filter(|l| matches!(l.kind, LoopKind::Ring { .. })).collect();
        assert_eq!(rings.len(), 1);
        assert_eq!(rings[0].incidences.len(), 6);
        assert_eq!(lat.bfs_diameter(), 3);
    }

    #[test]
    fn generation_three_loops() {
        let lat = build_lattice(3).unwrap();
        assert_eq!(lat.vertex_count(), 27);
        let count = |k: LoopKind| lat.loops().iter().filter(|l| l.kind == k).count();
        assert_eq!(count(LoopKind::Block), 9);
        assert_eq!(count(LoopKind::Ring { scale: 2 }), 3);
        assert_eq!(count(LoopKind::Ring { scale: 3 }), 1);
        assert_eq!(lat.loops().len(), 16);
        let ring3 = lat.loop_index_of(LoopKind::Ring { scale: 3 }).unwrap();
        assert_eq!(lat.loops()[ring3].incidences.len(), 12);
        assert_eq!(lat.bfs_diameter(), 7);
    }

    #[test]
    fn invalid_generations() {
        assert!(matches!(build_lattice(0), Err(Error::InvalidArgument(_))));
        assert!(matches!(build_lattice(13), Err(Error::ResourceLimit(_))));
        let opts = LatticeOptions { generation_cap: 2, ..Default::default() };
        assert!(matches!(Lattice::build(3, opts), Err(Error::ResourceLimit(_))));
    }

    #[test]
    fn incidence_structure_up_to_generation_six() {
        for g in 1..=6 {
            let lat = build_lattice(g).unwrap();
            let n = 3usize.pow(g);
            assert_eq!(lat.vertex_count(), n);
            assert_eq!(lat.edges().len(), n + 3 * (3usize.pow(g - 1) - 1) / 2);
            assert_eq!(lat.loops().len(), loop_count(g));
            let total: usize = lat.loops().iter().map(|l| l.incidences.len()).sum();
            assert_eq!(total, 3 * n);
            let mut per_vertex = vec![0usize; n];
            let mut sides = HashSet::new();
            for l in lat.loops() {
                for &(v, s) in &l.incidences {
                    per_vertex[v] += 1;
                    assert!(sides.insert((v, s)));
                }
            }
            assert!(per_vertex.iter().all(|&c| c == 3));
            for v in 0..n {
                let distinct: BTreeSet<_> = lat.loops_of_vertex(v).into_iter().collect();
                assert_eq!(distinct.len(), 3, "vertex {v} appears in three distinct loops");
                let expected = if lat.is_corner(v) { 2 } else { 3 };
                assert_eq!(lat.degree(v), expected);
            }
            assert_eq!(lat.lateral_link_count(), (1 << g) - 1);
            for l in lat.loops() {
                if let LoopKind::Ring { scale } = l.kind {
                    assert_eq!(l.incidences.len(), 3 << (scale - 1));
                }
            }
        }
    }

    #[test]
    fn block_edges_join_addresses_differing_in_last_trit() {
        let lat = build_lattice(4).unwrap();
        for e in lat.edges() {
            let (a, b) = (lat.address(e.u), lat.address(e.v));
            let same_prefix = a.0[..3] == b.0[..3];
            match e.kind {
                EdgeKind::Block => assert!(same_prefix),
                EdgeKind::Link { .. } => assert!(!same_prefix),
            }
        }
    }

    #[test]
    fn ports_and_sides() {
        let lat = build_lattice(3).unwrap();
        for v in 0..lat.vertex_count() {
            let ports = lat.ports(v);
            let anchored = ports.iter().filter(|p| matches!(p.attachment, Attachment::CornerAnchor(_))).count();
            assert_eq!(anchored, usize::from(lat.is_corner(v)));
            assert!(!matches!(ports[1].attachment, Attachment::CornerAnchor(_)));
            for p in [2u8, 3] {
                let e = match ports[p as usize - 1].attachment {
                    Attachment::Edge(e) => e,
                    _ => unreachable!(),
                };
                assert_eq!(lat.edges()[e].kind, EdgeKind::Block);
            }
            // side 1 (between the two block ports) is on the block loop
            assert_eq!(lat.loops()[lat.loop_of_side(v, 1)].kind, LoopKind::Block);
        }
    }

    #[test]
    fn top_level_link_endpoints() {
        for g in 2..=5 {
            let lat = build_lattice(g).unwrap();
            let ring = lat.loop_index_of(LoopKind::Ring { scale: g }).unwrap();
            let lats = lat.lateral_loops();
            for e in lat.edges().iter().filter(|e| e.kind == EdgeKind::Link { level: g }) {
                for x in [e.u, e.v] {
                    let ls = lat.loops_of_vertex(x);
                    assert_eq!(ls.iter().filter(|l| lats.contains(l)).count(), 1);
                    assert_eq!(ls.iter().filter(|&&l| lat.loops()[l].kind == LoopKind::Block).count(), 1);
                    assert!(ls.contains(&ring));
                }
            }
        }
    }

    #[test]
    fn address_round_trip_and_display() {
        let lat = build_lattice(3).unwrap();
        for v in 0..lat.vertex_count() {
            let a = lat.address(v);
            assert_eq!(Address::parse(&a.to_string()).unwrap(), a);
            assert_eq!(lat.vertex_of(&a).unwrap(), v);
        }
        assert_eq!(lat.address(0).to_string(), "TTt");
        assert_eq!(lat.address(26).to_string(), "RRr");
        assert!(Address::parse("Tt1").is_err());
        assert!(lat.vertex_of(&Address::parse("Tt").unwrap()).is_err());
    }

    #[test]
    fn distances() {
        let lat2 = build_lattice(2).unwrap();
        let [t, l, _] = lat2.corners();
        assert_eq!(lat2.graph_distance(t, l).unwrap(), 3);
        assert_eq!(lat2.graph_distance(4, 4).unwrap(), 0);
        assert!(lat2.graph_distance(0, 9).is_err());
        let lat3 = build_lattice(3).unwrap();
        for e in lat3.edges().iter().filter(|e| matches!(e.kind, EdgeKind::Link { .. })) {
            assert_eq!(lat3.graph_distance(e.u, e.v).unwrap(), 1);
        }
        for u in 0..27 {
            for v in 0..27 {
                assert_eq!(lat3.graph_distance(u, v).unwrap(), lat3.graph_distance(v, u).unwrap());
            }
        }
    }

    #[test]
    fn subset_diameters() {
        let lat = build_lattice(3).unwrap();
        assert_eq!(lat.subset_diameter(&[5]).unwrap(), 0);
        assert_eq!(lat.subset_diameter(&lat.block_vertices(4)).unwrap(), 1);
        let lateral: Vec<usize> = lat.loops()[lat.lateral_loops()[0]].vertices().collect();
        assert_eq!(lateral.len(), 8);
        assert_eq!(lat.subset_diameter(&lateral).unwrap(), 7);
        assert!(lat.subset_diameter(&[0, 26]).is_err());
        assert!(lat.subset_diameter(&[]).is_err());
    }

    #[test]
    fn largest_four() {
        assert!(matches!(build_lattice(1).unwrap().largest_four_loops(), Err(Error::UnsupportedGeneration { .. })));
        let lat2 = build_lattice(2).unwrap();
        let four = lat2.largest_four_loops().unwrap();
        let non_block: Vec<usize> =
            (0..lat2.loops().len()).filter(|&l| lat2.loops()[l].kind != LoopKind::Block).collect();
        let mut sorted = four.to_vec();
        sorted.sort_unstable();
        assert_eq!(sorted, non_block);
        let lat3 = build_lattice(3).unwrap();
        let four = lat3.largest_four_loops().unwrap();
        assert_eq!(lat3.loops()[four[3]].incidences.len(), 12);
    }

    /// Brute-force grower: all connected sets up to `max_size`, then filter.
    fn brute_subsets(lat: &Lattice, max_diameter: usize, max_size: usize) -> BTreeSet<Vec<usize>> {
        let mut all: BTreeSet<Vec<usize>> = BTreeSet::new();
        let mut frontier: Vec<BTreeSet<usize>> = (0..lat.vertex_count()).map(|v| BTreeSet::from([v])).collect();
        let mut seen: HashSet<Vec<usize>> = HashSet::new();
        while let Some(s) = frontier.pop() {
            let key: Vec<usize> = s.iter().copied().collect();
            if !seen.insert(key.clone()) {
                continue;
            }
            if lat.subset_diameter(&key).unwrap() <= max_diameter {
                all.insert(key.clone());
            }
            if s.len() < max_size {
                for &x in &s {
                    for y in lat.neighbors(x) {
                        if !s.contains(&y) {
                            let mut t = s.clone();
                            t.insert(y);
                            frontier.push(t);
                        }
                    }
                }
            }
        }
        all
    }

    #[test]
    fn connected_subset_enumeration() {
        let lat2 = build_lattice(2).unwrap();
        let singles: Vec<_> = lat2.connected_subsets_up_to(0, 5).collect();
        assert_eq!(singles, (0..9).map(|v| vec![v]).collect::<Vec<_>>());

        let lat1 = build_lattice(1).unwrap();
        assert_eq!(lat1.connected_subsets_up_to(1, 3).count(), 7);

        let lat3 = build_lattice(3).unwrap();
        for (d, s) in [(2, 4), (2, 6), (3, 5), (1, 3)] {
            let got: Vec<Vec<usize>> = lat3.connected_subsets_up_to(d, s).collect();
            let set: BTreeSet<Vec<usize>> = got.iter().cloned().collect();
            assert_eq!(set.len(), got.len(), "duplicates for d={d}, s={s}");
            for j in &got {
                assert!(lat3.subset_diameter(j).unwrap() <= d);
            }
            assert_eq!(set, brute_subsets(&lat3, d, s), "d={d}, s={s}");
        }
    }

    #[test]
    fn reproducible_serialization() {
        let a = serde_json::to_string(&build_lattice(3).unwrap().to_report()).unwrap();
        let b = serde_json::to_string(&build_lattice(3).unwrap().to_report()).unwrap();
        assert_eq!(a, b);
    }
}

//! Coset states, local operators and exact expectation values.
//!
//! Two backends share one set of semantics. The counting backend evaluates
//! matrix elements of uniform coset states from the rank structure of the
//! solution space restricted to an operator's support. The explicit backend
//! materializes a [`SparseState`] and rewrites configurations directly; it is
//! the ground truth at small generations.

use std::collections::{BTreeMap, BTreeSet, HashMap};
use std::sync::Arc;

use serde::Serialize;

use crate::algebra::{oriented_triple, side_bits, t_gate, u_block_with, BlockImage, GateTable, Letter, WPlusTable};
use crate::constraints::{
    build_system, syndrome_shift, Configuration, GF2System, SupportCounter, Syndrome, DEFAULT_ENUMERATION_CAP,
    MAX_COUNTING_SUPPORT,
};
use crate::error::{invalid, resource, Error, Result};
use crate::lattice::Lattice;
use crate::scalar::ExactScalar;

/// Upper bound on materialized configurations.
pub const MATERIALIZATION_CAP: usize = 1 << 24;

/// Packs a letter tuple, 2 bits per site with site 0 in the low bits.
pub fn encode_tuple(letters: &[Letter]) -> u64 {
    letters.iter().enumerate().fold(0u64, |acc, (i, &a)| acc | (u64::from(a) << (2 * i)))
}

pub fn decode_tuple(code: u64, len: usize) -> Vec<Letter> {
    (0..len).map(|i| ((code >> (2 * i)) & 3) as Letter).collect()
}

/// Packed side bits (3 per site) of a packed letter tuple.
pub fn tuple_side_mask(code: u64, len: usize) -> u64 {
    (0..len).fold(0u64, |acc, i| acc | (u64::from(side_bits(((code >> (2 * i)) & 3) as Letter)) << (3 * i)))
}

/// An operator on a finite support, as a sparse matrix over letter tuples.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct LocalOperator {
    support: Vec<usize>,
    /// `(out, in) → coefficient`
    entries: BTreeMap<(u64, u64), ExactScalar>,
}

impl LocalOperator {
    pub fn new(support: Vec<usize>) -> Result<Self> {
        if support.len() > MAX_COUNTING_SUPPORT {
            return resource(format!("operator support {} exceeds {MAX_COUNTING_SUPPORT}", support.len()));
        }
        let distinct: BTreeSet<usize> = support.iter().copied().collect();
        if distinct.len() != support.len() {
            return invalid("operator support has repeated sites");
        }
        Ok(LocalOperator { support, entries: BTreeMap::new() })
    }

    /// `|out⟩⟨in|` on the support.
    pub fn dyad(support: Vec<usize>, out: &[Letter], input: &[Letter]) -> Result<Self> {
        let mut op = Self::new(support)?;
        if out.len() != op.support.len() || input.len() != op.support.len() {
            return invalid("dyad tuple length differs from support size");
        }
        if out.iter().chain(input).any(|&a| a > 3) {
            return invalid("letter out of range");
        }
        op.set(encode_tuple(out), encode_tuple(input), ExactScalar::ONE);
        Ok(op)
    }

    pub fn dyad_codes(support: Vec<usize>, out: u64, input: u64) -> Result<Self> {
        let mut op = Self::new(support)?;
        op.set(out, input, ExactScalar::ONE);
        Ok(op)
    }

    pub fn identity(support: Vec<usize>) -> Result<Self> {
        let mut op = Self::new(support)?;
        for x in 0..op.dimension() {
            op.set(x, x, ExactScalar::ONE);
        }
        Ok(op)
    }

    /// Product of `S^{k_i}` on each site (`k_i = 0` is the identity).
    pub fn s_product(support: Vec<usize>, superscripts: &[u8]) -> Result<Self> {
        let mut op = Self::new(support)?;
        if superscripts.len() != op.support.len() || superscripts.iter().any(|&k| k > 3) {
            return invalid("bad S superscripts");
        }
        let mask = encode_tuple(superscripts);
        for x in 0..op.dimension() {
            op.set(x ^ mask, x, ExactScalar::ONE);
        }
        Ok(op)
    }

    /// A letter permutation gate placed on the support.
    pub fn from_gate(support: Vec<usize>, gate: &GateTable) -> Result<Self> {
        let mut op = Self::new(support)?;
        let n = op.support.len();
        if gate.arity as usize != n {
            return invalid("gate arity differs from support size");
        }
        for x in 0..op.dimension() {
            // gate tables put the first site in the high bits
            let letters = decode_tuple(x, n);
            let idx = letters.iter().fold(0usize, |acc, &a| acc * 4 + a as usize);
            let img = gate.apply(idx as u8);
            let out: Vec<Letter> = (0..n).map(|i| (img >> (2 * (n - 1 - i))) & 3).collect();
            op.set(encode_tuple(&out), x, ExactScalar::ONE);
        }
        Ok(op)
    }

    fn dimension(&self) -> u64 {
        1u64 << (2 * self.support.len())
    }

    pub fn set(&mut self, out: u64, input: u64, value: ExactScalar) {
        if value.is_zero() {
            self.entries.remove(&(out, input));
        } else {
            self.entries.insert((out, input), value);
        }
    }

    pub fn support(&self) -> &[usize] {
        &self.support
    }

    pub fn entries(&self) -> impl Iterator<Item = (u64, u64, ExactScalar)> + '_ {
        self.entries.iter().map(|(&(o, i), &c)| (o, i, c))
    }

    /// Tensor product with an operator on a disjoint support.
    pub fn tensor(&self, other: &LocalOperator) -> Result<Self> {
        if self.support.iter().any(|v| other.support.contains(v)) {
            return invalid("supports overlap");
        }
        let mut support = self.support.clone();
        support.extend(&other.support);
        let mut op = Self::new(support)?;
        let shift = 2 * self.support.len();
        for (&(o1, i1), &c1) in &self.entries {
            for (&(o2, i2), &c2) in &other.entries {
                op.set(o1 | (o2 << shift), i1 | (i2 << shift), c1 * c2);
            }
        }
        Ok(op)
    }
}

/// Uniform superposition over one syndrome coset.
#[derive(Debug, Clone)]
pub struct CosetState {
    system: Arc<GF2System>,
}

impl CosetState {
    pub fn new(system: GF2System) -> Self {
        CosetState { system: Arc::new(system) }
    }

    pub fn system(&self) -> &GF2System {
        &self.system
    }

    pub fn lattice(&self) -> &Arc<Lattice> {
        self.system.lattice()
    }

    pub fn target(&self) -> &Syndrome {
        self.system.target()
    }
}

/// The zero-syndrome state.
pub fn build_psi(lattice: &Arc<Lattice>) -> Result<CosetState> {
    Ok(CosetState::new(build_system(lattice, Syndrome::zeros(lattice.loops().len()))?))
}

/// Syndrome with the largest four loops set.
pub fn phi_target(lattice: &Lattice) -> Result<Syndrome> {
    Ok(Syndrome::from_loops(lattice.loops().len(), &lattice.largest_four_loops()?))
}

/// The state whose configurations violate exactly the largest four loops.
pub fn build_phi(lattice: &Arc<Lattice>) -> Result<CosetState> {
    Ok(CosetState::new(build_system(lattice, phi_target(lattice)?)?))
}

/// The restricted solution space of a support, prepared for fast dyad
/// evaluation. Syndromes are compressed to the loops the support touches.
#[derive(Debug, Clone)]
pub struct PreparedSupport {
    support: Vec<usize>,
    counter: SupportCounter,
    loop_ids: Vec<usize>,
    /// Local syndrome shift of XORing site `i` with letter `d`.
    site_shift: Vec<[u128; 4]>,
}

impl PreparedSupport {
    pub fn new(system: &GF2System, support: &[usize]) -> Result<Self> {
        let counter = system.support_counter(support)?;
        let lattice = system.lattice();
        let mut loop_ids: Vec<usize> = support.iter().flat_map(|&v| lattice.loops_of_vertex(v)).collect();
        loop_ids.sort_unstable();
        loop_ids.dedup();
        assert!(loop_ids.len() <= 128);
        let local = |l: usize| loop_ids.binary_search(&l).expect("touched loop");
        let site_shift = support
            .iter()
            .map(|&v| {
                let mut row = [0u128; 4];
                for d in 1..4u8 {
                    for l in syndrome_shift(lattice, &[(v, d)]).ones() {
                        row[d as usize] ^= 1u128 << local(l);
                    }
                }
                row
            })
            .collect();
        Ok(PreparedSupport { support: support.to_vec(), counter, loop_ids, site_shift })
    }

    pub fn support(&self) -> &[usize] {
        &self.support
    }

    pub fn rank(&self) -> usize {
        self.counter.rank()
    }

    /// A global syndrome in local form; `None` when it touches loops the
    /// support cannot reach.
    pub fn local_syndrome(&self, s: &Syndrome) -> Option<u128> {
        let mut m = 0u128;
        for l in s.ones() {
            m |= 1u128 << self.loop_ids.binary_search(&l).ok()?;
        }
        Some(m)
    }

    /// Local syndrome shift of XORing the support with `delta`.
    pub fn shift(&self, delta: u64) -> u128 {
        self.site_shift.iter().enumerate().fold(0u128, |acc, (i, row)| acc ^ row[((delta >> (2 * i)) & 3) as usize])
    }

    /// Whether some ket configuration has letters `input` on the support.
    pub fn admits(&self, input: u64, ket_particular: u64) -> bool {
        self.counter.admits(tuple_side_mask(input, self.support.len()) ^ ket_particular)
    }

    /// `⟨bra| out⟩⟨in| |ket⟩` where `want` is the local form of
    /// `bra.target ⊕ ket.target`.
    pub fn dyad_value(&self, out: u64, input: u64, ket_particular: u64, want: Option<u128>) -> ExactScalar {
        match want {
            Some(w) if self.shift(out ^ input) == w && self.admits(input, ket_particular) => {
                ExactScalar::pow2(-(self.rank() as i64))
            }
            _ => ExactScalar::ZERO,
        }
    }
}

fn check_same_space(bra: &CosetState, ket: &CosetState) -> Result<()> {
    if bra.lattice().generation() != ket.lattice().generation()
        || bra.lattice().convention() != ket.lattice().convention()
    {
        return invalid("states live on different lattices");
    }
    debug_assert_eq!(bra.system().nullity(), ket.system().nullity());
    Ok(())
}

/// `⟨bra|op|ket⟩` by the counting backend.
pub fn matrix_element(bra: &CosetState, op: &LocalOperator, ket: &CosetState) -> Result<ExactScalar> {
    check_same_space(bra, ket)?;
    if !bra.system().is_consistent() || !ket.system().is_consistent() {
        return Ok(ExactScalar::ZERO);
    }
    let prep = PreparedSupport::new(ket.system(), op.support())?;
    let p = ket.system().particular_mask(op.support())?;
    let want = prep.local_syndrome(&bra.target().xor(ket.target()));
    Ok(op.entries().map(|(o, i, c)| c * prep.dyad_value(o, i, p, want)).sum())
}

pub fn expectation(state: &CosetState, op: &LocalOperator) -> Result<ExactScalar> {
    matrix_element(state, op, state)
}

/// `⟨AB⟩ − ⟨A⟩⟨B⟩` for operators on disjoint supports.
pub fn connected_correlation(psi: &CosetState, a: &LocalOperator, b: &LocalOperator) -> Result<ExactScalar> {
    let ab = a.tensor(b)?;
    Ok(expectation(psi, &ab)? - expectation(psi, a)? * expectation(psi, b)?)
}

/// An explicit state: configurations with exact amplitudes times a shared
/// global factor.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SparseState {
    sites: usize,
    scale: ExactScalar,
    amps: BTreeMap<Configuration, ExactScalar>,
}

impl SparseState {
    pub fn empty(sites: usize) -> Self {
        SparseState { sites, scale: ExactScalar::ONE, amps: BTreeMap::new() }
    }

    pub fn basis(config: Configuration) -> Self {
        let sites = config.len();
        SparseState { sites, scale: ExactScalar::ONE, amps: BTreeMap::from([(config, ExactScalar::ONE)]) }
    }

    /// Equal-weight superposition with the given global factor.
    pub fn uniform(sites: usize, configs: impl IntoIterator<Item = Configuration>, scale: ExactScalar) -> Self {
        let amps = configs.into_iter().map(|c| (c, ExactScalar::ONE)).collect();
        SparseState { sites, scale, amps }
    }

    pub fn from_amplitudes(sites: usize, items: impl IntoIterator<Item = (Configuration, ExactScalar)>) -> Self {
        let mut amps = BTreeMap::new();
        for (c, a) in items {
            Self::accumulate(&mut amps, c, a);
        }
        SparseState { sites, scale: ExactScalar::ONE, amps }.prune()
    }

    /// Materializes a coset state.
    pub fn from_coset(state: &CosetState) -> Result<Self> {
        let sys = state.system();
        let cap = (MATERIALIZATION_CAP.trailing_zeros() as usize).min(DEFAULT_ENUMERATION_CAP);
        let k = sys.log2_count().ok_or(Error::NoSolution)?;
        let configs = sys.enumerate_solutions(cap)?;
        Ok(Self::uniform(state.lattice().vertex_count(), configs, ExactScalar::inv_sqrt_pow2(k as u32)))
    }

    pub fn sites(&self) -> usize {
        self.sites
    }

    pub fn len(&self) -> usize {
        self.amps.len()
    }

    pub fn is_empty(&self) -> bool {
        self.amps.is_empty()
    }

    pub fn scale(&self) -> ExactScalar {
        self.scale
    }

    pub fn amplitude(&self, c: &Configuration) -> ExactScalar {
        self.amps.get(c).map_or(ExactScalar::ZERO, |&a| a * self.scale)
    }

    pub fn configurations(&self) -> impl Iterator<Item = &Configuration> + '_ {
        self.amps.keys()
    }

    pub fn iter(&self) -> impl Iterator<Item = (&Configuration, ExactScalar)> + '_ {
        self.amps.iter().map(|(c, &a)| (c, a * self.scale))
    }

    fn accumulate(amps: &mut BTreeMap<Configuration, ExactScalar>, c: Configuration, a: ExactScalar) {
        let e = amps.entry(c).or_insert(ExactScalar::ZERO);
        *e = *e + a;
    }

    fn prune(mut self) -> Self {
        self.amps.retain(|_, a| !a.is_zero());
        self
    }

    fn check_cap(&self) -> Result<()> {
        if self.amps.len() > MATERIALIZATION_CAP {
            resource("materialized state exceeds the configuration cap")
        } else {
            Ok(())
        }
    }

    pub fn inner(&self, other: &SparseState) -> ExactScalar {
        let (small, big) = if self.len() <= other.len() { (self, other) } else { (other, self) };
        small.iter().map(|(c, a)| a * big.amplitude(c)).sum()
    }

    pub fn norm_squared(&self) -> ExactScalar {
        self.inner(self)
    }

    /// `λ` with `self = λ·other`, if the states are proportional.
    pub fn ratio_to(&self, other: &SparseState) -> Option<ExactScalar> {
        if self.len() != other.len() || self.is_empty() {
            return None;
        }
        let (c0, a0) = self.iter().next()?;
        let lambda = a0.checked_div(&other.amplitude(c0))?;
        self.iter().all(|(c, a)| other.amplitude(c) * lambda == a).then_some(lambda)
    }

    /// Applies letter-permutation gates one after another.
    pub fn apply_gates(&self, gates: &[GatePlacement]) -> Result<SparseState> {
        let mut cur = self.clone();
        for g in gates {
            g.check(self.sites)?;
            let mut amps = BTreeMap::new();
            for (c, &a) in &cur.amps {
                Self::accumulate(&mut amps, g.apply(c), a);
            }
            cur = SparseState { sites: cur.sites, scale: cur.scale, amps }.prune();
        }
        Ok(cur)
    }

    /// `(1 + T)/√2` on one edge.
    pub fn apply_half_projector(&self, lattice: &Lattice, edge: usize) -> Result<SparseState> {
        let g = GatePlacement::edge(lattice, edge)?;
        g.check(self.sites)?;
        let mut amps = BTreeMap::new();
        for (c, &a) in &self.amps {
            Self::accumulate(&mut amps, c.clone(), a);
            Self::accumulate(&mut amps, g.apply(c), a);
        }
        let out = SparseState { sites: self.sites, scale: self.scale * ExactScalar::inv_sqrt2(), amps }.prune();
        out.check_cap()?;
        Ok(out)
    }

    /// `⟨bra|op|ket⟩` by direct rewriting.
    pub fn matrix_element(bra: &SparseState, op: &LocalOperator, ket: &SparseState) -> ExactScalar {
        let n = op.support().len();
        let mut by_input: HashMap<u64, Vec<(u64, ExactScalar)>> = HashMap::new();
        for (o, i, c) in op.entries() {
            by_input.entry(i).or_default().push((o, c));
        }
        let mut total = ExactScalar::ZERO;
        for (c, a) in ket.iter() {
            let local: Vec<Letter> = op.support().iter().map(|&v| c.0[v]).collect();
            let Some(outs) = by_input.get(&encode_tuple(&local)) else { continue };
            for &(o, coeff) in outs {
                let mut c2 = c.clone();
                for (k, &v) in op.support().iter().enumerate() {
                    c2.0[v] = ((o >> (2 * k)) & 3) as Letter;
                }
                debug_assert_eq!(decode_tuple(o, n).len(), n);
                total = total + coeff * a * bra.amplitude(&c2);
            }
        }
        total
    }
}

/// A gate placed on specific sites (first site = most significant letter of
/// the gate table).
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct GatePlacement {
    pub sites: Vec<usize>,
    pub table: GateTable,
}

impl GatePlacement {
    pub fn single(site: usize, table: GateTable) -> Self {
        GatePlacement { sites: vec![site], table }
    }

    pub fn s(site: usize, k: u8) -> Result<Self> {
        Ok(Self::single(site, crate::algebra::s_gate(k)?))
    }

    pub fn edge(lattice: &Lattice, edge: usize) -> Result<Self> {
        let g = t_gate(lattice, edge)?;
        Ok(GatePlacement { sites: vec![g.sites.0, g.sites.1], table: g.table })
    }

    fn check(&self, sites: usize) -> Result<()> {
        if self.sites.len() != self.table.arity as usize || self.sites.iter().any(|&v| v >= sites) {
            return invalid("gate placement does not fit the state");
        }
        Ok(())
    }

    pub fn apply(&self, c: &Configuration) -> Configuration {
        let idx = self.sites.iter().fold(0u8, |acc, &v| acc * 4 + c.0[v]);
        let img = self.table.apply(idx);
        let n = self.sites.len();
        let mut out = c.clone();
        for (k, &v) in self.sites.iter().enumerate() {
            out.0[v] = (img >> (2 * (n - 1 - k))) & 3;
        }
        out
    }
}

/// Letters of each block read in the block's own frame.
fn block_triples<'a>(lattice: &'a Lattice, c: &Configuration) -> impl Iterator<Item = [Letter; 3]> + 'a {
    let c = c.clone();
    (0..lattice.block_count()).map(move |b| {
        let [x, y, z] = lattice.block_vertices(b);
        oriented_triple([c.0[x], c.0[y], c.0[z]], lattice.block_position(b).unwrap_or(0))
    })
}

/// Applies the coarse-graining map blockwise: constraint-satisfying block
/// triples become their coarse letter with weight `1/√8`, others vanish.
pub fn coarse_grain(state: &SparseState, lattice: &Lattice, table: &WPlusTable) -> Result<SparseState> {
    if lattice.generation() < 2 {
        return Err(Error::UnsupportedGeneration {
            generation: lattice.generation(),
            reason: "coarse graining needs at least two generations".into(),
        });
    }
    if state.sites() != lattice.vertex_count() {
        return invalid("state does not match the lattice");
    }
    let nb = lattice.block_count();
    let mut amps = BTreeMap::new();
    'configs: for (c, &a) in &state.amps {
        let mut coarse = Vec::with_capacity(nb);
        for t in block_triples(lattice, c) {
            match u_block_with(table, t) {
                BlockImage::A { coarse: x, .. } => coarse.push(x),
                BlockImage::NonA => continue 'configs,
            }
        }
        SparseState::accumulate(&mut amps, Configuration(coarse), a);
    }
    let scale = state.scale * ExactScalar::inv_sqrt_pow2(3 * nb as u32);
    Ok(SparseState { sites: nb, scale, amps }.prune())
}

#[derive(Debug, Clone, Serialize)]
pub struct BlockDecomposeReport {
    pub pass: bool,
    pub fine_configurations: usize,
    pub coarse_configurations: usize,
    /// Distinct label tuples per coarse configuration (min, max).
    pub gamma_tuples_per_coarse: (usize, usize),
    pub non_a_blocks: usize,
    pub coarse_outside_psi: usize,
    pub duplicate_labels: usize,
    /// `[block][coarse letter]` → number of distinct labels seen.
    pub per_block_gamma_counts: Vec<[usize; 4]>,
}

/// Relabels every generation-2 solution blockwise and checks that the result
/// is the full product {coarse solution} × {label tuple}.
pub fn block_decompose_check(lattice: &Arc<Lattice>, table: &WPlusTable) -> Result<BlockDecomposeReport> {
    if lattice.generation() != 2 {
        return Err(Error::UnsupportedGeneration {
            generation: lattice.generation(),
            reason: "the explicit factorization check runs at generation 2".into(),
        });
    }
    let psi = build_psi(lattice)?;
    let coarse_lattice = Arc::new(crate::lattice::build_lattice(1)?);
    let coarse_psi: BTreeSet<Configuration> =
        build_psi(&coarse_lattice)?.system().enumerate_solutions(DEFAULT_ENUMERATION_CAP)?.collect();
    let nb = lattice.block_count();
    let mut groups: BTreeMap<Configuration, BTreeSet<Vec<u8>>> = BTreeMap::new();
    let mut per_block: Vec<[BTreeSet<u8>; 4]> = vec![Default::default(); nb];
    let (mut fine, mut non_a, mut outside, mut dups) = (0, 0, 0, 0);
    for c in psi.system().enumerate_solutions(DEFAULT_ENUMERATION_CAP)? {
        fine += 1;
        let mut coarse = Vec::with_capacity(nb);
        let mut gammas = Vec::with_capacity(nb);
        for (b, t) in block_triples(lattice, &c).enumerate() {
            match u_block_with(table, t) {
                BlockImage::A { coarse: x, gamma } => {
                    coarse.push(x);
                    gammas.push(gamma);
                    per_block[b][x as usize].insert(gamma);
                }
                BlockImage::NonA => non_a += 1,
            }
        }
        if coarse.len() != nb {
            continue;
        }
        let coarse = Configuration(coarse);
        if !coarse_psi.contains(&coarse) {
            outside += 1;
        }
        if !groups.entry(coarse).or_default().insert(gammas) {
            dups += 1;
        }
    }
    let sizes: Vec<usize> = groups.values().map(|g| g.len()).collect();
    let min = sizes.iter().copied().min().unwrap_or(0);
    let max = sizes.iter().copied().max().unwrap_or(0);
    let full = 8usize.pow(nb as u32);
    let pass = non_a == 0
        && outside == 0
        && dups == 0
        && groups.len() == coarse_psi.len()
        && min == full
        && max == full
        && groups.len() * full == fine;
    Ok(BlockDecomposeReport {
        pass,
        fine_configurations: fine,
        coarse_configurations: groups.len(),
        gamma_tuples_per_coarse: (min, max),
        non_a_blocks: non_a,
        coarse_outside_psi: outside,
        duplicate_labels: dups,
        per_block_gamma_counts: per_block.iter().map(|b| std::array::from_fn(|x| b[x].len())).collect(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::algebra::{w_plus_table, LETTERS};
    use crate::lattice::build_lattice;

    fn lat(g: u32) -> Arc<Lattice> {
        Arc::new(build_lattice(g).unwrap())
    }

    fn quarter() -> ExactScalar {
        ExactScalar::pow2(-2)
    }

    #[test]
    fn single_site_expectations() {
        for g in [2, 3] {
            let l = lat(g);
            let psi = build_psi(&l).unwrap();
            for v in 0..l.vertex_count() {
                let mut total = ExactScalar::ZERO;
                for a in LETTERS {
                    for b in LETTERS {
                        let op = LocalOperator::dyad(vec![v], &[b], &[a]).unwrap();
                        let x = expectation(&psi, &op).unwrap();
                        if a == b {
                            assert_eq!(x, quarter());
                            total = total + x;
                        } else {
                            assert!(x.is_zero());
                        }
                    }
                }
                assert_eq!(total, ExactScalar::ONE);
            }
        }
    }

    #[test]
    fn pair_diagonal_is_one_sixteenth() {
        let l = lat(3);
        let psi = build_psi(&l).unwrap();
        let (i, j) = (0, 26);
        for a in LETTERS {
            let op = LocalOperator::dyad(vec![i, j], &[a, a ^ 1], &[a, a ^ 1]).unwrap();
            assert_eq!(expectation(&psi, &op).unwrap(), ExactScalar::pow2(-4));
        }
    }

    #[test]
    fn normalization_and_orthogonality() {
        let l = lat(2);
        let psi = build_psi(&l).unwrap();
        let phi = build_phi(&l).unwrap();
        let id = LocalOperator::identity(vec![0]).unwrap();
        assert_eq!(expectation(&psi, &id).unwrap(), ExactScalar::ONE);
        assert_eq!(expectation(&phi, &id).unwrap(), ExactScalar::ONE);
        assert!(matrix_element(&phi, &id, &psi).unwrap().is_zero());
        let xp = SparseState::from_coset(&psi).unwrap();
        let xf = SparseState::from_coset(&phi).unwrap();
        assert_eq!(xp.len(), 4096);
        assert_eq!(xf.len(), 4096);
        assert_eq!(xp.norm_squared(), ExactScalar::ONE);
        assert_eq!(xf.norm_squared(), ExactScalar::ONE);
        assert!(xp.inner(&xf).is_zero());
        let four = phi_target(&l).unwrap();
        for c in xf.configurations() {
            assert_eq!(crate::constraints::syndrome_of(&l, c).unwrap(), four);
        }
        assert!(matches!(build_phi(&lat(1)), Err(Error::UnsupportedGeneration { .. })));
    }

    #[test]
    fn backends_agree_on_every_dyad_up_to_three_sites() {
        let l = lat(2);
        let psi = build_psi(&l).unwrap();
        let phi = build_phi(&l).unwrap();
        let xp = SparseState::from_coset(&psi).unwrap();
        let xf = SparseState::from_coset(&phi).unwrap();
        let supports: Vec<Vec<usize>> = vec![vec![4], vec![0, 1], vec![2, 3], vec![0, 4, 8], vec![2, 3, 6]];
        let states = [(&psi, &xp), (&phi, &xf)];
        for s in &supports {
            let dim = 1u64 << (2 * s.len());
            for (bra, xbra) in states {
                for (ket, xket) in states {
                    for o in 0..dim {
                        for i in 0..dim {
                            let op = LocalOperator::dyad_codes(s.clone(), o, i).unwrap();
                            let counted = matrix_element(bra, &op, ket).unwrap();
                            let explicit = SparseState::matrix_element(xbra, &op, xket);
                            assert_eq!(counted, explicit, "support {s:?} out {o} in {i}");
                        }
                    }
                }
            }
        }
    }

    #[test]
    fn correlations_vanish_for_nonadjacent_pairs() {
        let l = lat(2);
        let psi = build_psi(&l).unwrap();
        let (i, j) = (0, 8);
        assert!(!l.are_adjacent(i, j));
        for (a, b) in [(0u8, 0u8), (1, 2), (3, 3)] {
            for (c, d) in [(0u8, 0u8), (2, 1), (1, 1)] {
                let oa = LocalOperator::dyad(vec![i], &[a], &[b]).unwrap();
                let ob = LocalOperator::dyad(vec![j], &[c], &[d]).unwrap();
                assert!(connected_correlation(&psi, &oa, &ob).unwrap().is_zero());
            }
        }
        let id = LocalOperator::identity(vec![i]).unwrap();
        let ob = LocalOperator::dyad(vec![j], &[2], &[2]).unwrap();
        assert!(connected_correlation(&psi, &id, &ob).unwrap().is_zero());
        assert!(connected_correlation(&psi, &id, &LocalOperator::identity(vec![i]).unwrap()).is_err());
    }

    #[test]
    fn adjacent_pair_correlation_is_recorded() {
        let l = lat(3);
        let psi = build_psi(&l).unwrap();
        let e = l.edges()[0];
        let oa = LocalOperator::dyad(vec![e.u], &[0], &[0]).unwrap();
        let ob = LocalOperator::dyad(vec![e.v], &[0], &[0]).unwrap();
        let c = connected_correlation(&psi, &oa, &ob).unwrap();
        assert!(c.is_rational());
    }

    #[test]
    fn t_gates_fix_psi_and_s_twice_is_identity() {
        let l = lat(2);
        let xp = SparseState::from_coset(&build_psi(&l).unwrap()).unwrap();
        for e in 0..l.edges().len() {
            let g = GatePlacement::edge(&l, e).unwrap();
            assert_eq!(xp.apply_gates(&[g]).unwrap(), xp);
        }
        let s = GatePlacement::s(4, 1).unwrap();
        assert_eq!(xp.apply_gates(&[s.clone(), s]).unwrap(), xp);
    }

    #[test]
    fn half_projector() {
        let l = lat(1);
        let zero = SparseState::basis(Configuration::zeros(3));
        let once = zero.apply_half_projector(&l, 0).unwrap();
        assert_eq!(once.len(), 2);
        assert_eq!(once.amplitude(&Configuration(vec![2, 3, 0])), ExactScalar::inv_sqrt2());
        let twice = once.apply_half_projector(&l, 0).unwrap();
        assert_eq!(twice.ratio_to(&once), Some(ExactScalar::sqrt2()));
        assert!(zero.apply_half_projector(&l, 7).is_err());
    }

    #[test]
    fn coarse_graining_maps_psi_two_to_psi_one() {
        let l2 = lat(2);
        let l1 = lat(1);
        let w = w_plus_table();
        let x2 = SparseState::from_coset(&build_psi(&l2).unwrap()).unwrap();
        let x1 = SparseState::from_coset(&build_psi(&l1).unwrap()).unwrap();
        let cg = coarse_grain(&x2, &l2, &w).unwrap();
        // 512 fine configurations per coarse one, each weighted (1/√8)^3
        let lambda = cg.ratio_to(&x1).unwrap();
        assert_eq!(lambda, ExactScalar::ONE);
        let one = SparseState::basis(x2.configurations().next().unwrap().clone());
        let single = coarse_grain(&one, &l2, &w).unwrap();
        assert_eq!(single.len(), 1);
        assert_eq!(single.iter().next().unwrap().1, ExactScalar::inv_sqrt_pow2(9));
        let bad = SparseState::basis(Configuration(vec![0, 0, 2, 0, 0, 0, 0, 0, 0]));
        assert!(coarse_grain(&bad, &l2, &w).unwrap().is_empty());
    }

    #[test]
    fn coarse_graining_maps_psi_three_to_psi_two() {
        // sampled: every generation-3 solution lands on a generation-2 solution
        let l3 = lat(3);
        let l2 = lat(2);
        let w = w_plus_table();
        let psi3 = build_psi(&l3).unwrap();
        let psi2 = build_psi(&l2).unwrap();
        for seed in 0..300 {
            let c = psi3.system().sample_solution(seed).unwrap();
            let cg = coarse_grain(&SparseState::basis(c), &l3, &w).unwrap();
            assert_eq!(cg.len(), 1);
            assert!(psi2.system().is_solution(cg.configurations().next().unwrap()).unwrap());
        }
    }

    #[test]
    fn block_decomposition() {
        let l = lat(2);
        let w = w_plus_table();
        let r = block_decompose_check(&l, &w).unwrap();
        assert!(r.pass, "{r:?}");
        assert_eq!(r.fine_configurations, 4096);
        assert_eq!(r.coarse_configurations, 8);
        assert_eq!(r.gamma_tuples_per_coarse, (512, 512));
        for b in &r.per_block_gamma_counts {
            assert_eq!(*b, [8, 8, 8, 8]);
        }
        let corrupted = w.with_swapped((0, 2), (1, 2));
        assert!(!block_decompose_check(&l, &corrupted).unwrap().pass);
        assert!(block_decompose_check(&lat(3), &w).is_err());
    }

    #[test]
    fn s_product_and_gate_operators() {
        let op = LocalOperator::s_product(vec![3, 5], &[1, 0]).unwrap();
        assert_eq!(op.entries().count(), 16);
        let l = lat(2);
        let g = t_gate(&l, 0).unwrap();
        let from_gate = LocalOperator::from_gate(vec![g.sites.0, g.sites.1], &g.table).unwrap();
        let from_s = LocalOperator::s_product(vec![g.sites.0, g.sites.1], &[2, 3]).unwrap();
        assert_eq!(from_gate, from_s);
        assert!(LocalOperator::new(vec![1, 1]).is_err());
        assert!(LocalOperator::new((0..22).collect()).is_err());
    }
}

//! Loop parity constraints as a GF(2) system over side bits.
//!
//! Variable `3v + (s−1)` is the red bit of side `s` at vertex `v`. Each
//! vertex contributes an even-parity row over its three side bits (so every
//! solution decodes to letters), and each loop contributes a row over its
//! incidences whose right-hand side is the loop's target parity.

use std::sync::{Arc, OnceLock};

use num_bigint::BigUint;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::algebra::{letter_of_bits, side_bits, Letter};
use crate::error::{invalid, resource, Error, Result};
use crate::gf2::{BitRow, Echelon};
use crate::lattice::Lattice;

pub const DEFAULT_ENUMERATION_CAP: usize = 24;

/// Largest support the packed counting masks can address (3 bits per site).
pub const MAX_COUNTING_SUPPORT: usize = 21;

/// One letter per vertex, in vertex-id order.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct Configuration(pub Vec<Letter>);

impl Configuration {
    pub fn zeros(n: usize) -> Self {
        Configuration(vec![0; n])
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn side_vector(&self) -> BitRow {
        let mut x = BitRow::zeros(3 * self.0.len());
        for (v, &a) in self.0.iter().enumerate() {
            let b = side_bits(a);
            for s in 0..3 {
                if b >> s & 1 == 1 {
                    x.set(3 * v + s, true);
                }
            }
        }
        x
    }

    pub fn from_side_vector(x: &BitRow) -> Self {
        let n = x.len() / 3;
        Configuration(
            (0..n)
                .map(|v| {
                    let bits = (0..3).fold(0u8, |acc, s| acc | (u8::from(x.get(3 * v + s)) << s));
                    letter_of_bits(bits).expect("solutions have even per-vertex parity")
                })
                .collect(),
        )
    }
}

impl std::fmt::Display for Configuration {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        for a in &self.0 {
            write!(f, "{a}")?;
        }
        Ok(())
    }
}

/// One parity bit per loop, in loop order.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct Syndrome(pub Vec<bool>);

impl Syndrome {
    pub fn zeros(n: usize) -> Self {
        Syndrome(vec![false; n])
    }

    pub fn from_loops(n: usize, loops: &[usize]) -> Self {
        let mut s = Self::zeros(n);
        for &l in loops {
            s.0[l] ^= true;
        }
        s
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn is_zero(&self) -> bool {
        self.0.iter().all(|b| !b)
    }

    pub fn weight(&self) -> usize {
        self.0.iter().filter(|&&b| b).count()
    }

    pub fn ones(&self) -> Vec<usize> {
        (0..self.0.len()).filter(|&i| self.0[i]).collect()
    }

    pub fn xor(&self, other: &Syndrome) -> Syndrome {
        Syndrome(self.0.iter().zip(&other.0).map(|(a, b)| a ^ b).collect())
    }
}

/// Per-loop red parity of a configuration.
pub fn syndrome_of(lattice: &Lattice, config: &Configuration) -> Result<Syndrome> {
    if config.len() != lattice.vertex_count() {
        return invalid(format!(
            "configuration has {} letters, lattice has {} vertices",
            config.len(),
            lattice.vertex_count()
        ));
    }
    Ok(Syndrome(
        lattice
            .loops()
            .iter()
            .map(|l| l.incidences.iter().fold(false, |acc, &(v, s)| acc ^ (side_bits(config.0[v]) >> (s - 1) & 1 == 1)))
            .collect(),
    ))
}

/// Loops whose parity changes when the letters at the given sites are
/// XORed with the given deltas.
pub fn syndrome_shift(lattice: &Lattice, deltas: &[(usize, Letter)]) -> Syndrome {
    let mut s = Syndrome::zeros(lattice.loops().len());
    for &(v, d) in deltas {
        let bits = side_bits(d);
        for side in 1..=3u8 {
            if bits >> (side - 1) & 1 == 1 {
                s.0[lattice.loop_of_side(v, side)] ^= true;
            }
        }
    }
    s
}

/// Closed form `log2 M(g) = 2·3^g − Λ(g) + 1` for the zero-syndrome count.
pub fn closed_form_log2_m(generation: u32) -> usize {
    2 * 3usize.pow(generation) - crate::lattice::loop_count(generation) + 1
}

struct NullBasis {
    vectors: Vec<BitRow>,
    /// `coord_rows[var]`: the var-th coordinate of every basis vector.
    coord_rows: Vec<BitRow>,
}

/// The loop parity system of a lattice for a given target syndrome.
pub struct GF2System {
    lattice: Arc<Lattice>,
    target: Syndrome,
    free_loops: Vec<bool>,
    echelon: Echelon,
    basis: OnceLock<NullBasis>,
}

impl std::fmt::Debug for GF2System {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("GF2System")
            .field("generation", &self.lattice.generation())
            .field("rank", &self.rank())
            .field("nullity", &self.nullity())
            .field("consistent", &self.is_consistent())
            .finish()
    }
}

pub fn build_system(lattice: &Arc<Lattice>, target: Syndrome) -> Result<GF2System> {
    GF2System::build(lattice, target, &[])
}

impl GF2System {
    /// Builds the system; loops listed in `free_loops` carry no check.
    pub fn build(lattice: &Arc<Lattice>, target: Syndrome, free_loops: &[usize]) -> Result<Self> {
        let nloops = lattice.loops().len();
        if target.len() != nloops {
            return invalid(format!("target has {} bits, lattice has {nloops} loops", target.len()));
        }
        let mut free = vec![false; nloops];
        for &l in free_loops {
            if l >= nloops {
                return invalid(format!("unknown loop {l}"));
            }
            free[l] = true;
        }
        let n = lattice.vertex_count();
        let cols = 3 * n;
        let vertex_rows = (0..n).map(|v| (BitRow::from_indices(cols, [3 * v, 3 * v + 1, 3 * v + 2]), false));
        let loop_rows = lattice.loops().iter().enumerate().filter(|(i, _)| !free[*i]).map(|(i, l)| {
            (BitRow::from_indices(cols, l.incidences.iter().map(|&(v, s)| 3 * v + s as usize - 1)), target.0[i])
        });
        let echelon = Echelon::reduce(cols, vertex_rows.chain(loop_rows));
        Ok(GF2System { lattice: Arc::clone(lattice), target, free_loops: free, echelon, basis: OnceLock::new() })
    }

    pub fn lattice(&self) -> &Arc<Lattice> {
        &self.lattice
    }

    pub fn target(&self) -> &Syndrome {
        &self.target
    }

    pub fn variables(&self) -> usize {
        self.echelon.cols
    }

    pub fn rank(&self) -> usize {
        self.echelon.rank()
    }

    pub fn nullity(&self) -> usize {
        self.echelon.nullity()
    }

    pub fn is_consistent(&self) -> bool {
        self.echelon.consistent
    }

    /// `log2` of the solution count, or `None` when inconsistent.
    pub fn log2_count(&self) -> Option<usize> {
        self.is_consistent().then(|| self.nullity())
    }

    pub fn count_solutions(&self) -> BigUint {
        match self.log2_count() {
            Some(k) => BigUint::from(1u8) << k,
            None => BigUint::from(0u8),
        }
    }

    /// Whether a configuration satisfies every checked loop.
    pub fn is_solution(&self, config: &Configuration) -> Result<bool> {
        let s = syndrome_of(&self.lattice, config)?;
        Ok((0..s.len()).all(|i| self.free_loops[i] || s.0[i] == self.target.0[i]))
    }

    fn basis(&self) -> &NullBasis {
        self.basis.get_or_init(|| {
            let vectors = self.echelon.nullspace();
            let k = vectors.len();
            let mut coord_rows = vec![BitRow::zeros(k); self.variables()];
            for (j, v) in vectors.iter().enumerate() {
                for i in v.ones() {
                    coord_rows[i].set(j, true);
                }
            }
            NullBasis { vectors, coord_rows }
        })
    }

    pub fn nullspace(&self) -> &[BitRow] {
        &self.basis().vectors
    }

    pub fn particular(&self) -> Option<BitRow> {
        self.echelon.particular()
    }

    /// Packed side bits of the particular solution on a support.
    pub fn particular_mask(&self, support: &[usize]) -> Result<u64> {
        let p = self.particular().ok_or(Error::NoSolution)?;
        Ok(support
            .iter()
            .enumerate()
            .fold(0u64, |acc, (i, &v)| (0..3).fold(acc, |acc, s| acc | (u64::from(p.get(3 * v + s)) << (3 * i + s)))))
    }

    pub fn support_counter(&self, support: &[usize]) -> Result<SupportCounter> {
        SupportCounter::new(self, support)
    }

    /// Number of solutions agreeing with `fixed`, by restricting the
    /// solution space to the fixed coordinates and re-ranking.
    pub fn count_with_assignment(&self, fixed: &[(usize, Letter)]) -> Result<BigUint> {
        let mut support: Vec<usize> = fixed.iter().map(|&(v, _)| v).collect();
        support.sort_unstable();
        support.dedup();
        if support.len() != fixed.len() {
            return invalid("vertex fixed twice");
        }
        for &(v, a) in fixed {
            self.lattice.check_vertex(v)?;
            crate::algebra::check_letter(a)?;
        }
        if !self.is_consistent() {
            return Ok(BigUint::from(0u8));
        }
        let zero = BigUint::from(0u8);
        // chunk large assignments so each piece fits the packed masks
        if support.len() > MAX_COUNTING_SUPPORT {
            return self.count_with_assignment_large(fixed).map(|c| c.unwrap_or(zero));
        }
        let counter = self.support_counter(&support)?;
        let letters: Vec<Letter> =
            support.iter().map(|v| fixed.iter().find(|(w, _)| w == v).expect("present").1).collect();
        let rhs = pack_side_bits(&letters) ^ self.particular_mask(&support)?;
        Ok(match counter.log2_count(self.nullity(), rhs) {
            Some(k) => BigUint::from(1u8) << k,
            None => zero,
        })
    }

    fn count_with_assignment_large(&self, fixed: &[(usize, Letter)]) -> Result<Option<BigUint>> {
        // substitute the fixed side bits as extra equations and re-rank
        let basis = self.basis();
        let p = self.particular().ok_or(Error::NoSolution)?;
        let mut rows = Vec::with_capacity(3 * fixed.len());
        for &(v, a) in fixed {
            let b = side_bits(a);
            for s in 0..3 {
                let want = b >> s & 1 == 1;
                rows.push((basis.coord_rows[3 * v + s].clone(), want ^ p.get(3 * v + s)));
            }
        }
        let e = Echelon::reduce(self.nullity(), rows);
        Ok(e.consistent.then(|| BigUint::from(1u8) << e.nullity()))
    }

    /// Streams every solution in Gray-code order over the nullspace basis.
    pub fn enumerate_solutions(&self, cap: usize) -> Result<impl Iterator<Item = Configuration> + '_> {
        let k = self.nullity();
        if k > cap {
            return resource(format!("nullity {k} exceeds enumeration cap {cap}"));
        }
        let start = self.particular();
        let total: u64 = if start.is_some() { 1u64 << k } else { 0 };
        let basis = &self.basis().vectors;
        let mut x = start.unwrap_or_else(|| BitRow::zeros(self.variables()));
        let mut i = 0u64;
        Ok(std::iter::from_fn(move || {
            if i >= total {
                return None;
            }
            if i > 0 {
                x.xor_assign(&basis[i.trailing_zeros() as usize]);
            }
            i += 1;
            Some(Configuration::from_side_vector(&x))
        }))
    }

    /// Uniform random solution.
    pub fn sample_with<R: Rng>(&self, rng: &mut R) -> Result<Configuration> {
        let mut x = self.particular().ok_or(Error::NoSolution)?;
        for b in &self.basis().vectors {
            if rng.gen::<bool>() {
                x.xor_assign(b);
            }
        }
        Ok(Configuration::from_side_vector(&x))
    }

    pub fn sample_solution(&self, seed: u64) -> Result<Configuration> {
        self.sample_with(&mut ChaCha8Rng::seed_from_u64(seed))
    }
}

/// Packs the side bits of a letter tuple, 3 bits per site.
pub fn pack_side_bits(letters: &[Letter]) -> u64 {
    letters.iter().enumerate().fold(0u64, |acc, (i, &a)| acc | (u64::from(side_bits(a)) << (3 * i)))
}

/// The solution space restricted to the side bits of a fixed support.
///
/// Stores the rank of the restriction and the linear dependencies among the
/// restricted coordinates, so the number of solutions with any prescribed
/// letters on the support is a parity test per dependency.
#[derive(Debug, Clone)]
pub struct SupportCounter {
    support: Vec<usize>,
    rank: usize,
    dependencies: Vec<u64>,
}

impl SupportCounter {
    pub fn new(system: &GF2System, support: &[usize]) -> Result<Self> {
        if support.len() > MAX_COUNTING_SUPPORT {
            return resource(format!("support of {} sites exceeds {MAX_COUNTING_SUPPORT}", support.len()));
        }
        for &v in support {
            system.lattice.check_vertex(v)?;
        }
        let basis = system.basis();
        let mut pivots: Vec<(usize, BitRow, u64)> = Vec::new();
        let mut dependencies = Vec::new();
        for (i, &v) in support.iter().enumerate() {
            for s in 0..3 {
                let mut row = basis.coord_rows[3 * v + s].clone();
                let mut tag = 1u64 << (3 * i + s);
                for (p, prow, ptag) in &pivots {
                    if row.get(*p) {
                        row.xor_assign(prow);
                        tag ^= ptag;
                    }
                }
                match row.next_one(0) {
                    Some(p) => pivots.push((p, row, tag)),
                    None => dependencies.push(tag),
                }
            }
        }
        Ok(SupportCounter { support: support.to_vec(), rank: pivots.len(), dependencies })
    }

    pub fn support(&self) -> &[usize] {
        &self.support
    }

    pub fn rank(&self) -> usize {
        self.rank
    }

    /// Whether the restricted solution space contains the point whose side
    /// bits differ from the particular solution by `rhs`.
    pub fn admits(&self, rhs: u64) -> bool {
        self.dependencies.iter().all(|d| (d & rhs).count_ones().is_multiple_of(2))
    }

    /// `log2` of the number of solutions with the prescribed restriction.
    pub fn log2_count(&self, nullity: usize, rhs: u64) -> Option<usize> {
        self.admits(rhs).then(|| nullity - self.rank)
    }
}

/// Rank of the loop rows on top of the per-vertex parity rows.
pub fn loop_rank(lattice: &Arc<Lattice>) -> Result<usize> {
    let sys = build_system(lattice, Syndrome::zeros(lattice.loops().len()))?;
    Ok(sys.rank() - lattice.vertex_count())
}

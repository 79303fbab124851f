//! Tensor-network ground truth.
//!
//! `A = Σ_α |α⟩ ⊗ (|f_α⟩ + |f̄_α⟩)` where `f_α` is the virtual triple (one
//! bit per port) with a single flip at port `α` (no flip for `α = 0`). Every
//! virtual triple decodes to exactly one letter, so a contraction assigns one
//! configuration to each assignment of bond values.

use std::collections::BTreeMap;

use serde::Serialize;

use crate::algebra::{block_loop_ok, w_plus_table, Letter, LETTERS};
use crate::constraints::Configuration;
use crate::error::{resource, Error, Result};
use crate::lattice::{Attachment, Lattice, PortConvention};
use crate::scalar::ExactScalar;
use crate::state::SparseState;

/// Virtual triple of `A_α` with base bit `x` (index `p−1` is port `p`).
pub fn virtual_pattern(letter: Letter, x: u8) -> [u8; 3] {
    let mut t = [x; 3];
    if letter > 0 {
        t[letter as usize - 1] ^= 1;
    }
    t
}

/// The letter and base bit of the unique `A` entry with this virtual triple.
pub fn decode_virtual(t: [u8; 3]) -> (Letter, u8) {
    let ones = t.iter().filter(|&&b| b == 1).count();
    // the majority value is the base bit; the odd one out marks the letter
    let x = u8::from(ones >= 2);
    let letter = (0..3).find(|&i| t[i] != x).map_or(0, |i| i as Letter + 1);
    (letter, x)
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct TensorA {
    pub entries: Vec<(Letter, [u8; 3])>,
}

impl TensorA {
    pub fn new() -> Self {
        let entries = LETTERS.iter().flat_map(|&a| [(a, virtual_pattern(a, 0)), (a, virtual_pattern(a, 1))]).collect();
        TensorA { entries }
    }

    pub fn get(&self, letter: Letter, t: [u8; 3]) -> u8 {
        u8::from(self.entries.contains(&(letter, t)))
    }
}

impl Default for TensorA {
    fn default() -> Self {
        Self::new()
    }
}

/// Largest generation the dense bond sweep accepts.
pub const DENSE_CONTRACTION_MAX_GENERATION: u32 = 2;

/// Contracts one `A` per vertex over every bond assignment, with corner
/// anchors fixed to 1.
pub fn contract_network(lattice: &Lattice) -> Result<SparseState> {
    if lattice.generation() > DENSE_CONTRACTION_MAX_GENERATION {
        return resource(format!(
            "dense contraction limited to generation {DENSE_CONTRACTION_MAX_GENERATION}, got {}",
            lattice.generation()
        ));
    }
    let n = lattice.vertex_count();
    let ne = lattice.edges().len();
    let mut counts: BTreeMap<Configuration, u64> = BTreeMap::new();
    for bonds in 0u64..(1u64 << ne) {
        let letters: Vec<Letter> = (0..n)
            .map(|v| {
                let t: [u8; 3] = std::array::from_fn(|p| match lattice.ports(v)[p].attachment {
                    Attachment::Edge(e) => ((bonds >> e) & 1) as u8,
                    Attachment::CornerAnchor(_) => 1,
                });
                decode_virtual(t).0
            })
            .collect();
        *counts.entry(Configuration(letters)).or_insert(0) += 1;
    }
    Ok(SparseState::from_amplitudes(n, counts.into_iter().map(|(c, k)| (c, ExactScalar::integer(k as i128)))))
}

/// Physical triples of one block for every internal bond and external leg
/// assignment, keyed by the external legs (ordered t, l, r).
pub fn contract_block(convention: PortConvention) -> BTreeMap<[u8; 3], Vec<[Letter; 3]>> {
    // bond between positions i < j
    let bond_index = |i: usize, j: usize| match (i.min(j), i.max(j)) {
        (0, 1) => 0,
        (0, 2) => 1,
        _ => 2,
    };
    let mut out: BTreeMap<[u8; 3], Vec<[Letter; 3]>> = BTreeMap::new();
    for ext in 0u8..8 {
        let e = [ext & 1, ext >> 1 & 1, ext >> 2 & 1];
        for internal in 0u8..8 {
            let b = [internal & 1, internal >> 1 & 1, internal >> 2 & 1];
            let triple: [Letter; 3] = std::array::from_fn(|i| {
                let mut t = [0u8; 3];
                t[0] = e[i];
                for j in (0..3).filter(|&j| j != i) {
                    let p = convention.inner_port(i as u8, j as u8);
                    t[p as usize - 1] = b[bond_index(i, j)];
                }
                decode_virtual(t).0
            });
            out.entry(e).or_default().push(triple);
        }
    }
    out
}

/// Whether the physical triples reachable by contracting one block (all
/// bond and leg values) are exactly those with an even number of letters
/// from {2, 3}.
pub fn block_support_rule_check() -> bool {
    let reached: std::collections::BTreeSet<[Letter; 3]> =
        contract_block(PortConvention::Rotational).into_values().flatten().collect();
    let even: std::collections::BTreeSet<[Letter; 3]> =
        (0..64u8).map(|i| [i / 16, i / 4 % 4, i % 4]).filter(|&t| block_loop_ok(t)).collect();
    reached == even
}

/// Contracts three `A` copies over a block's internal bonds, applies the
/// coarse-graining table on the physical legs and returns `λ` if the result
/// is `λ·A` entrywise.
pub fn check_scale_invariance(convention: PortConvention) -> Result<ExactScalar> {
    let w = w_plus_table();
    let block = contract_block(convention);
    let a = TensorA::new();
    let mut lambda: Option<ExactScalar> = None;
    for (ext, triples) in &block {
        for coarse in LETTERS {
            let hits = triples.iter().filter(|&&t| w.lookup(t).is_some_and(|(x, _)| x == coarse)).count();
            let value = ExactScalar::integer(hits as i128) * ExactScalar::inv_sqrt_pow2(3);
            let target = a.get(coarse, *ext);
            match (target, lambda) {
                (0, _) if value.is_zero() => {}
                (0, _) => {
                    return Err(Error::ConventionViolation(format!(
                        "entry ({coarse}, {ext:?}) is {value} where A vanishes"
                    )))
                }
                (_, None) => lambda = Some(value),
                (_, Some(l)) if l == value => {}
                (_, Some(l)) => {
                    return Err(Error::ConventionViolation(format!(
                        "entry ({coarse}, {ext:?}) is {value}, expected {l}"
                    )))
                }
            }
        }
    }
    match lambda {
        Some(l) if !l.is_zero() => Ok(l),
        _ => Err(Error::ConventionViolation("contraction vanishes on the support of A".into())),
    }
}

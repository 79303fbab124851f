//! Qudit letters, their side colorings, and the finite gate tables.
//!
//! A letter is one of `0..4`. Letter `k ≠ 0` colors red the two sides of a
//! vertex other than side `k`; letter 0 colors nothing. Letters compose as
//! the Klein four-group under XOR, and the side coloring is linear in it, so
//! every `S^k` gate is "XOR the letter with `k`".

use serde::Serialize;

use crate::error::{invalid, Result};
use crate::lattice::{EdgeKind, Lattice};

pub type Letter = u8;

pub const LETTERS: [Letter; 4] = [0, 1, 2, 3];

/// Red sides of a letter as a 3-bit mask (bit `s−1` is side `s`).
pub fn side_bits(letter: Letter) -> u8 {
    match letter {
        0 => 0b000,
        1 => 0b110,
        2 => 0b101,
        3 => 0b011,
        _ => panic!("letter out of range: {letter}"),
    }
}

/// Inverse of [`side_bits`]; `None` for odd masks.
pub fn letter_of_bits(bits: u8) -> Option<Letter> {
    match bits & 0b111 {
        0b000 => Some(0),
        0b110 => Some(1),
        0b101 => Some(2),
        0b011 => Some(3),
        _ => None,
    }
}

/// The red sides (1..=3) of a letter.
pub fn red_sides(letter: Letter) -> Vec<u8> {
    (1..=3).filter(|s| side_bits(letter) >> (s - 1) & 1 == 1).collect()
}

pub fn check_letter(letter: u8) -> Result<Letter> {
    if letter < 4 {
        Ok(letter)
    } else {
        invalid(format!("letter {letter} out of range 0..=3"))
    }
}

/// A letter permutation on one or two sites. Tuples are encoded base 4 with
/// the first site most significant.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct GateTable {
    pub arity: u8,
    pub mapping: Vec<u8>,
}

impl GateTable {
    pub fn identity(arity: u8) -> Self {
        GateTable { arity, mapping: (0..4u8.pow(arity as u32)).collect() }
    }

    pub fn apply(&self, input: u8) -> u8 {
        self.mapping[input as usize]
    }

    pub fn compose(&self, then: &GateTable) -> GateTable {
        assert_eq!(self.arity, then.arity);
        GateTable { arity: self.arity, mapping: self.mapping.iter().map(|&x| then.apply(x)).collect() }
    }

    pub fn is_bijection(&self) -> bool {
        let mut seen = vec![false; self.mapping.len()];
        self.mapping.iter().all(|&x| !std::mem::replace(&mut seen[x as usize], true))
    }

    /// Per-site XOR masks when the gate is a product of `S` gates.
    pub fn xor_masks(&self) -> Option<Vec<Letter>> {
        let packed = self.mapping[0];
        if !(0..self.mapping.len()).all(|x| self.mapping[x] == (x as u8) ^ packed) {
            return None;
        }
        Some((0..self.arity).rev().map(|i| (packed >> (2 * i)) & 3).collect())
    }
}

/// `S^k`: XOR with `k`.
pub fn s_gate(k: u8) -> Result<GateTable> {
    if !(1..=3).contains(&k) {
        return invalid(format!("S superscript must be 1, 2 or 3, got {k}"));
    }
    Ok(GateTable { arity: 1, mapping: LETTERS.iter().map(|&x| x ^ k).collect() })
}

/// A placed two-site gate.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct EdgeGate {
    pub sites: (usize, usize),
    pub superscripts: (u8, u8),
    pub table: GateTable,
}

/// `T` on an edge: each endpoint gets `S^p` with `p` its port toward the
/// other endpoint. Links get `S¹⊗S¹`, block edges `S²⊗S³` or `S³⊗S²`.
pub fn t_gate(lattice: &Lattice, edge: usize) -> Result<EdgeGate> {
    let Some(e) = lattice.edges().get(edge) else {
        return invalid(format!("unknown edge {edge}"));
    };
    let pu = lattice.port_toward(e.u, e.v).expect("edge endpoints adjacent");
    let pv = lattice.port_toward(e.v, e.u).expect("edge endpoints adjacent");
    debug_assert!(matches!(e.kind, EdgeKind::Link { .. }) == (pu == 1 && pv == 1));
    let table = GateTable { arity: 2, mapping: (0..16u8).map(|x| x ^ (pu << 2 | pv)).collect() };
    Ok(EdgeGate { sites: (e.u, e.v), superscripts: (pu, pv), table })
}

/// The coarse-graining table: each block triple satisfying the block loop
/// maps to a coarse letter and a label `γ ∈ 1..=8`, with weight `1/√8`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct WPlusTable {
    /// `rows[α̃][γ−1]`
    pub rows: [[[Letter; 3]; 8]; 4],
    /// Indexed by `16·a + 4·b + c`.
    #[serde(skip)]
    lookup: [Option<(Letter, u8)>; 64],
}

const W_PLUS_ROWS: [[&str; 8]; 4] = [
    ["000", "111", "023", "132", "213", "230", "302", "321"],
    ["011", "032", "100", "123", "202", "221", "313", "330"],
    ["010", "033", "101", "122", "203", "220", "312", "331"],
    ["001", "110", "022", "133", "212", "231", "303", "320"],
];

pub fn triple_index(t: [Letter; 3]) -> usize {
    16 * t[0] as usize + 4 * t[1] as usize + t[2] as usize
}

impl WPlusTable {
    pub fn from_rows(rows: [[[Letter; 3]; 8]; 4]) -> Result<Self> {
        let mut lookup = [None; 64];
        for (a, row) in rows.iter().enumerate() {
            for (g, t) in row.iter().enumerate() {
                if t.iter().any(|&x| x > 3) {
                    return invalid("letter out of range in table");
                }
                let slot = &mut lookup[triple_index(*t)];
                if slot.is_some() {
                    return invalid(format!("triple {t:?} listed twice"));
                }
                *slot = Some((a as Letter, g as u8 + 1));
            }
        }
        Ok(WPlusTable { rows, lookup })
    }

    pub fn lookup(&self, t: [Letter; 3]) -> Option<(Letter, u8)> {
        self.lookup[triple_index(t)]
    }

    /// Copy with two entries exchanged; used as a negative control.
    pub fn with_swapped(&self, a: (usize, usize), b: (usize, usize)) -> Self {
        let mut rows = self.rows;
        let tmp = rows[a.0][a.1];
        rows[a.0][a.1] = rows[b.0][b.1];
        rows[b.0][b.1] = tmp;
        WPlusTable::from_rows(rows).expect("swap keeps the table a partition")
    }
}

pub fn w_plus_table() -> WPlusTable {
    let parse = |s: &str| {
        let b = s.as_bytes();
        [b[0] - b'0', b[1] - b'0', b[2] - b'0']
    };
    let rows = W_PLUS_ROWS.map(|row| row.map(parse));
    WPlusTable::from_rows(rows).expect("built-in table is a partition")
}

/// Image of a block triple under the block unitary restricted to the
/// constraint-satisfying sector.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum BlockImage {
    A { coarse: Letter, gamma: u8 },
    NonA,
}

pub fn u_block_with(table: &WPlusTable, triple: [Letter; 3]) -> BlockImage {
    match table.lookup(triple) {
        Some((coarse, gamma)) => BlockImage::A { coarse, gamma },
        None => BlockImage::NonA,
    }
}

pub fn u_block(triple: [Letter; 3]) -> BlockImage {
    u_block_with(&w_plus_table(), triple)
}

/// Reads a block's (t, l, r) letters starting from the vertex whose
/// position equals the block's own position in its parent.
pub fn oriented_triple(letters: [Letter; 3], block_position: u8) -> [Letter; 3] {
    let p = block_position as usize;
    [letters[p], letters[(p + 1) % 3], letters[(p + 2) % 3]]
}

/// Whether a triple satisfies the block loop: an even number of red sides
/// on side 1, i.e. an even number of letters from {2, 3}.
pub fn block_loop_ok(t: [Letter; 3]) -> bool {
    t.iter().filter(|&&x| x >= 2).count() % 2 == 0
}

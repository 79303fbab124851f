//! Recursive reduction of a solution to a product form by `T` moves.
//!
//! A block satisfying its loop reaches exactly two triples over {0, 1}
//! under its three `T` gates. At each larger scale the three sub-lattices
//! each offer two candidate forms; the combinations whose facing corners
//! agree on (0, 0) or (1, 1) are kept and the (1, 1) links cleared by their
//! link `T`. What remains is nonzero only on the three lattice corners.

use std::collections::BTreeSet;

use serde::Serialize;

use crate::algebra::Letter;
use crate::constraints::{syndrome_of, Configuration};
use crate::error::{invalid, Error, Result};
use crate::lattice::Lattice;
use crate::state::GatePlacement;

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct CanonicalForm {
    pub form: Configuration,
    /// Edges whose `T` moves, applied in any order, map the input here.
    pub moves: Vec<usize>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct CanonResult {
    /// Sorted; the first is the lexicographically smaller form.
    pub forms: Vec<CanonicalForm>,
}

#[derive(Clone)]
struct Candidate {
    letters: Vec<Letter>,
    moves: BTreeSet<usize>,
}

impl Candidate {
    fn toggle_edge(&mut self, lattice: &Lattice, base: usize, edge: usize) {
        let g = GatePlacement::edge(lattice, edge).expect("edge exists");
        let (u, v) = (g.sites[0], g.sites[1]);
        let (ku, kv) = crate::algebra::t_gate(lattice, edge).expect("edge exists").superscripts;
        self.letters[u - base] ^= ku;
        self.letters[v - base] ^= kv;
        if !self.moves.remove(&edge) {
            self.moves.insert(edge);
        }
    }
}

fn sub_corners(base: usize, level: u32) -> [usize; 3] {
    // corner t of a sub-lattice is its all-T vertex, and so on
    let span = 3usize.pow(level);
    let unit = (span - 1) / 2;
    [base, base + unit, base + 2 * unit]
}

fn canon_rec(lattice: &Lattice, config: &Configuration, base: usize, level: u32) -> Result<Vec<Candidate>> {
    if level == 1 {
        let letters: Vec<Letter> = config.0[base..base + 3].to_vec();
        let edges = [
            lattice.edge_between(base, base + 1).expect("block edge"),
            lattice.edge_between(base, base + 2).expect("block edge"),
            lattice.edge_between(base + 1, base + 2).expect("block edge"),
        ];
        let mut out = Vec::new();
        for mask in 0..8u8 {
            let mut c = Candidate { letters: letters.clone(), moves: BTreeSet::new() };
            for (i, &e) in edges.iter().enumerate() {
                if mask >> i & 1 == 1 {
                    c.toggle_edge(lattice, base, e);
                }
            }
            if c.letters.iter().all(|&a| a <= 1) {
                out.push(c);
            }
        }
        return check_two(out, base, level);
    }
    let span = 3usize.pow(level - 1);
    let subs: Vec<Vec<Candidate>> =
        (0..3).map(|s| canon_rec(lattice, config, base + s * span, level - 1)).collect::<Result<_>>()?;
    let [tc, lc, rc] = [0, 1, 2].map(|s| sub_corners(base + s * span, level - 1));
    let links = [(tc[1], lc[0]), (tc[2], rc[0]), (lc[2], rc[1])];
    let mut out = Vec::new();
    for a in &subs[0] {
        for b in &subs[1] {
            for c in &subs[2] {
                let mut letters = a.letters.clone();
                letters.extend(&b.letters);
                letters.extend(&c.letters);
                let mut cand = Candidate { letters, moves: &(&a.moves | &b.moves) | &c.moves };
                let ok = links.iter().all(|&(x, y)| {
                    let (p, q) = (cand.letters[x - base], cand.letters[y - base]);
                    p == q && p <= 1
                });
                if !ok {
                    continue;
                }
                for &(x, y) in &links {
                    if cand.letters[x - base] == 1 {
                        let e = lattice.edge_between(x, y).expect("link edge");
                        cand.toggle_edge(lattice, base, e);
                    }
                }
                out.push(cand);
            }
        }
    }
    check_two(out, base, level)
}

fn check_two(out: Vec<Candidate>, base: usize, level: u32) -> Result<Vec<Candidate>> {
    if out.len() != 2 {
        return Err(Error::ConventionViolation(format!(
            "sub-lattice at {base} (level {level}) has {} canonical candidates instead of 2",
            out.len()
        )));
    }
    Ok(out)
}

/// Reduces a configuration satisfying every non-lateral loop (every loop,
/// with `respect_laterals`) to its canonical forms.
pub fn canonicalize(lattice: &Lattice, config: &Configuration, respect_laterals: bool) -> Result<CanonResult> {
    let syn = syndrome_of(lattice, config)?;
    let laterals = lattice.lateral_loops();
    let violated = syn.ones().into_iter().any(|l| respect_laterals || !laterals.contains(&l));
    if violated {
        return invalid("configuration violates a loop constraint");
    }
    let cands = canon_rec(lattice, config, 0, lattice.generation())?;
    let mut forms: Vec<CanonicalForm> = cands
        .into_iter()
        .map(|c| CanonicalForm { form: Configuration(c.letters), moves: c.moves.into_iter().collect() })
        .collect();
    forms.sort_by(|a, b| a.form.cmp(&b.form));
    if respect_laterals {
        forms.retain(|f| f.form.0.iter().all(|&a| a == 0));
        if forms.len() != 1 {
            return Err(Error::ConventionViolation("no all-zero canonical form for a solution".into()));
        }
    }
    Ok(CanonResult { forms })
}

/// Applies the `T` moves of `moves` to `config`.
pub fn replay(lattice: &Lattice, config: &Configuration, moves: &[usize]) -> Result<Configuration> {
    let mut c = config.clone();
    for &e in moves {
        c = GatePlacement::edge(lattice, e)?.apply(&c);
    }
    Ok(c)
}

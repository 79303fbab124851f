//! Preparation by half projectors and the `T`-move orbit.

use std::collections::{HashSet, VecDeque};
use std::sync::Arc;

use serde::Serialize;

use crate::constraints::{syndrome_of, Configuration};
use crate::error::{invalid, resource, Result};
use crate::lattice::Lattice;
use crate::scalar::ExactScalar;
use crate::state::{build_psi, GatePlacement, SparseState};

pub const EXPLICIT_MAX_GENERATION: u32 = 2;

fn explicit_only(lattice: &Lattice) -> Result<()> {
    if lattice.generation() > EXPLICIT_MAX_GENERATION {
        return resource(format!(
            "explicit backend limited to generation {EXPLICIT_MAX_GENERATION}, got {}",
            lattice.generation()
        ));
    }
    Ok(())
}

#[derive(Debug, Clone)]
pub struct PrepareReport {
    pub state: SparseState,
    pub equals_psi: bool,
    /// `λ` with prepared = `λ·Ψ`.
    pub ratio: Option<ExactScalar>,
}

/// Applies `(1 + T)/√2` on every edge (in `order`, or edge order) to the
/// all-zero configuration.
pub fn prepare_by_circuit(lattice: &Arc<Lattice>, order: Option<&[usize]>) -> Result<PrepareReport> {
    explicit_only(lattice)?;
    let default: Vec<usize> = (0..lattice.edges().len()).collect();
    let order = order.unwrap_or(&default);
    let mut sorted = order.to_vec();
    sorted.sort_unstable();
    if sorted != default {
        return invalid("edge order must be a permutation of all edges");
    }
    let mut state = SparseState::basis(Configuration::zeros(lattice.vertex_count()));
    for &e in order {
        state = state.apply_half_projector(lattice, e)?;
    }
    let psi = SparseState::from_coset(&build_psi(lattice)?)?;
    let ratio = state.ratio_to(&psi);
    Ok(PrepareReport { equals_psi: ratio.is_some(), ratio, state })
}

#[derive(Debug, Clone, Serialize)]
pub struct ErgodicityReport {
    pub generation: u32,
    pub orbit_size: usize,
    pub solution_count: usize,
    pub all_zero_syndrome: bool,
    pub pass: bool,
}

/// Breadth-first orbit of the all-zero configuration under `T` moves.
pub fn ergodicity_check(lattice: &Arc<Lattice>) -> Result<ErgodicityReport> {
    explicit_only(lattice)?;
    let gates: Vec<GatePlacement> =
        (0..lattice.edges().len()).map(|e| GatePlacement::edge(lattice, e)).collect::<Result<_>>()?;
    let start = Configuration::zeros(lattice.vertex_count());
    let mut seen = HashSet::from([start.clone()]);
    let mut q = VecDeque::from([start]);
    let mut all_zero = true;
    while let Some(c) = q.pop_front() {
        all_zero &= syndrome_of(lattice, &c)?.is_zero();
        for g in &gates {
            let d = g.apply(&c);
            if seen.insert(d.clone()) {
                q.push_back(d);
            }
        }
    }
    let m = build_psi(lattice)?.system().log2_count().map_or(0, |k| 1usize << k);
    Ok(ErgodicityReport {
        generation: lattice.generation(),
        orbit_size: seen.len(),
        solution_count: m,
        all_zero_syndrome: all_zero,
        pass: all_zero && seen.len() == m,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::lattice::build_lattice;

    #[test]
    fn circuit_prepares_psi() {
        for g in [1, 2] {
            let l = Arc::new(build_lattice(g).unwrap());
            let r = prepare_by_circuit(&l, None).unwrap();
            assert!(r.equals_psi);
            assert_eq!(r.ratio, Some(ExactScalar::ONE));
            let mut rev: Vec<usize> = (0..l.edges().len()).rev().collect();
            rev.rotate_left(1);
            let r2 = prepare_by_circuit(&l, Some(&rev)).unwrap();
            assert_eq!(r2.state, r.state);
        }
        let l3 = Arc::new(build_lattice(3).unwrap());
        assert!(prepare_by_circuit(&l3, None).is_err());
        let l1 = Arc::new(build_lattice(1).unwrap());
        assert!(prepare_by_circuit(&l1, Some(&[0, 0, 1])).is_err());
    }

    #[test]
    fn orbit_sizes() {
        let r1 = ergodicity_check(&Arc::new(build_lattice(1).unwrap())).unwrap();
        assert_eq!((r1.orbit_size, r1.pass), (8, true));
        let r2 = ergodicity_check(&Arc::new(build_lattice(2).unwrap())).unwrap();
        assert_eq!((r2.orbit_size, r2.pass), (4096, true));
    }
}

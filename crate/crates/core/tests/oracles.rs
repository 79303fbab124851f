//! Independent brute-force oracles for counts, expectations and bounds.

use std::collections::BTreeSet;
use std::sync::Arc;

use gasket_core::experiments::depth::{depth_bound, detection_bound, min_layers};
use gasket_core::lattice::{build_lattice, Lattice};
use gasket_core::state::{build_psi, SparseState};

/// Red sides of a letter, written out from its definition: letter `k > 0`
/// paints every side except side `k`.
fn red(letter: u8, side: u8) -> bool {
    letter != 0 && letter != side
}

fn loops_even(l: &Lattice, c: &[u8]) -> bool {
    l.loops().iter().all(|lp| lp.incidences.iter().filter(|&&(v, s)| red(c[v], s)).count() % 2 == 0)
}

fn brute_solutions(l: &Lattice) -> Vec<Vec<u8>> {
    let n = l.vertex_count();
    (0..1u64 << (2 * n))
        .map(|x| (0..n).map(|i| ((x >> (2 * i)) & 3) as u8).collect::<Vec<_>>())
        .filter(|c| loops_even(l, c))
        .collect()
}

#[test]
fn brute_force_counts_and_support() {
    for (g, m) in [(1u32, 8usize), (2, 4096)] {
        let l = Arc::new(build_lattice(g).unwrap());
        let sols = brute_solutions(&l);
        assert_eq!(sols.len(), m);
        let psi = SparseState::from_coset(&build_psi(&l).unwrap()).unwrap();
        let got: BTreeSet<Vec<u8>> = psi.configurations().map(|c| c.0.clone()).collect();
        assert_eq!(got, sols.into_iter().collect());
    }
}

#[test]
fn brute_force_single_site_marginals() {
    let l = build_lattice(2).unwrap();
    let sols = brute_solutions(&l);
    for v in 0..9 {
        for a in 0..4u8 {
            assert_eq!(sols.iter().filter(|c| c[v] == a).count() * 4, sols.len());
        }
    }
    // letter marginals of any pair, adjacent or not, are uniform
    let joint = |i: usize, j: usize, a: u8, b: u8| sols.iter().filter(|c| c[i] == a && c[j] == b).count();
    for (i, j) in [(0, 8), (0, 1), (2, 6)] {
        assert!((0..16u8).all(|k| joint(i, j, k / 4, k % 4) * 16 == sols.len()));
    }
}

#[test]
fn bound_formulas_against_floats() {
    for p in 1..8u64 {
        for l in 1..8u64 {
            let b = depth_bound(p, l).unwrap();
            let t = 16.0 / 3.0 * (p * l) as f64 - 8.0 / 3.0 * p as f64 + 5.0 / 3.0;
            let (n, d) = (b.threshold.numer().to_string(), b.threshold.denom().to_string());
            let exact: f64 = n.parse::<f64>().unwrap() / d.parse::<f64>().unwrap();
            assert!((exact - t).abs() < 1e-9);
            assert!(((1u64 << b.min_generation) - 1) as f64 >= t);
            assert!(((1u64 << (b.min_generation - 1)) - 1) as f64 + 1e-9 < t || b.min_generation == 1);
        }
    }
    for d in [3u64, 7, 15, 31, 63] {
        assert_eq!(detection_bound(d), ((3.0 * d as f64 - 5.0) / 8.0).floor() as u64);
        for p in 1..5u64 {
            let f = 3.0 / (16.0 * p as f64) * d as f64 + 0.5 - 5.0 / (16.0 * p as f64);
            assert_eq!(min_layers(d, p).unwrap(), f.floor() as u64 + 1);
        }
    }
}

use std::sync::Arc;

use gasket_core::constraints::{syndrome_of, Configuration, GF2System, Syndrome};
use gasket_core::experiments::canon::{canonicalize, replay};
use gasket_core::lattice::{build_lattice, Address, Lattice};
use gasket_core::state::{
    build_phi, build_psi, expectation, matrix_element, GatePlacement, LocalOperator, SparseState,
};
use gasket_core::ExactScalar;
use proptest::prelude::*;

fn lat(g: u32) -> Arc<Lattice> {
    Arc::new(build_lattice(g).unwrap())
}

fn config(n: usize) -> impl Strategy<Value = Configuration> {
    proptest::collection::vec(0u8..4, n).prop_map(Configuration)
}

fn approx(x: ExactScalar) -> f64 {
    (x.a as f64 + x.b as f64 * std::f64::consts::SQRT_2) * 2f64.powi(x.e as i32)
}

fn scalar() -> impl Strategy<Value = ExactScalar> {
    (-50i128..50, -50i128..50, -6i64..6).prop_map(|(a, b, e)| ExactScalar::new(a, b, e))
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(128))]

    #[test]
    fn syndrome_is_linear_under_letter_xor(c in config(27), d in config(27)) {
        let l = lat(3);
        let sum = Configuration(c.0.iter().zip(&d.0).map(|(x, y)| x ^ y).collect());
        let lhs = syndrome_of(&l, &sum).unwrap();
        let rhs = syndrome_of(&l, &c).unwrap().xor(&syndrome_of(&l, &d).unwrap());
        prop_assert_eq!(lhs, rhs);
    }

    #[test]
    fn t_moves_preserve_the_syndrome(c in config(27), edge in 0usize..39) {
        let l = lat(3);
        let moved = GatePlacement::edge(&l, edge).unwrap().apply(&c);
        prop_assert_eq!(syndrome_of(&l, &moved).unwrap(), syndrome_of(&l, &c).unwrap());
        prop_assert_eq!(GatePlacement::edge(&l, edge).unwrap().apply(&moved), c);
    }

    #[test]
    fn sampled_solutions_satisfy_their_system(seed in any::<u64>(), g in 2u32..5) {
        let l = lat(g);
        let psi = build_psi(&l).unwrap();
        let phi = build_phi(&l).unwrap();
        let c = psi.system().sample_solution(seed).unwrap();
        prop_assert!(syndrome_of(&l, &c).unwrap().is_zero());
        let f = phi.system().sample_solution(seed).unwrap();
        prop_assert_eq!(&syndrome_of(&l, &f).unwrap(), phi.target());
    }

    #[test]
    fn canonical_moves_replay(seed in any::<u64>()) {
        let l = lat(3);
        let free = GF2System::build(&l, Syndrome::zeros(16), &l.lateral_loops()).unwrap();
        let c = free.sample_solution(seed).unwrap();
        let r = canonicalize(&l, &c, false).unwrap();
        prop_assert_eq!(r.forms.len(), 2);
        for f in &r.forms {
            prop_assert_eq!(&replay(&l, &c, &f.moves).unwrap(), &f.form);
        }
    }

    #[test]
    fn backends_agree_on_random_dyads(
        sites in proptest::sample::subsequence((0usize..9).collect::<Vec<_>>(), 1..=3),
        out in any::<u64>(),
        input in any::<u64>(),
        cross in any::<bool>(),
    ) {
        let l = lat(2);
        let (psi, phi) = (build_psi(&l).unwrap(), build_phi(&l).unwrap());
        let mask = (1u64 << (2 * sites.len())) - 1;
        let op = LocalOperator::dyad_codes(sites, out & mask, input & mask).unwrap();
        let ket = if cross { &phi } else { &psi };
        let counted = matrix_element(&psi, &op, ket).unwrap();
        let (xs, xk) = (SparseState::from_coset(&psi).unwrap(), SparseState::from_coset(ket).unwrap());
        prop_assert_eq!(counted, SparseState::matrix_element(&xs, &op, &xk));
    }

    #[test]
    fn diagonal_expectations_sum_to_one(v in 0usize..81) {
        let l = lat(4);
        let psi = build_psi(&l).unwrap();
        let total: ExactScalar = (0..4u8)
            .map(|a| expectation(&psi, &LocalOperator::dyad(vec![v], &[a], &[a]).unwrap()).unwrap())
            .sum();
        prop_assert_eq!(total, ExactScalar::ONE);
    }

    #[test]
    fn addresses_round_trip(g in 1u32..7, raw in any::<usize>()) {
        let l = lat(g);
        let v = raw % l.vertex_count();
        let a = l.address(v);
        prop_assert_eq!(Address::parse(&a.to_string()).unwrap(), a.clone());
        prop_assert_eq!(l.vertex_of(&a).unwrap(), v);
    }

    #[test]
    fn scalar_ring_matches_floats(x in scalar(), y in scalar()) {
        let tol = 1e-9 * (1.0 + approx(x).abs() * approx(y).abs() + approx(x).abs() + approx(y).abs());
        prop_assert!((approx(x + y) - (approx(x) + approx(y))).abs() < tol);
        prop_assert!((approx(x * y) - approx(x) * approx(y)).abs() < tol);
        prop_assert_eq!(x - x, ExactScalar::ZERO);
        if let Some(q) = (x * y).checked_div(&y) {
            prop_assert_eq!(q, x);
        }
    }
}

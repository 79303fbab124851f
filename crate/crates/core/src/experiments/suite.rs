//! Every check that applies at one generation, as a list of named results.

use std::collections::BTreeSet;
use std::sync::Arc;

use serde::Serialize;

use super::canon::{canonicalize, replay};
use super::circuit::{ergodicity_check, prepare_by_circuit, EXPLICIT_MAX_GENERATION};
use super::correlation::{block_correlation_suite, correlation_suite};
use super::depth::{causal_cone_check, depth_bound};
use super::detection::{error_detection_suite, negative_control, DetectionOptions};
use super::flipper::{check_flipper, find_syndrome_flipper, FlipperQuery};
use crate::algebra::w_plus_table;
use crate::constraints::{closed_form_log2_m, Configuration, GF2System, Syndrome};
use crate::error::Result;
use crate::lattice::{build_lattice, loop_count, Lattice, PortConvention};
use crate::scalar::ExactScalar;
use crate::state::{block_decompose_check, build_phi, build_psi, matrix_element, LocalOperator, SparseState};
use crate::tensor::{
    block_support_rule_check, check_scale_invariance, contract_network, DENSE_CONTRACTION_MAX_GENERATION,
};

#[derive(Debug, Clone, Serialize)]
pub struct CheckResult {
    pub name: String,
    pub pass: bool,
    pub detail: String,
}

#[derive(Debug, Clone, Serialize)]
pub struct SuiteReport {
    pub generation: u32,
    pub seed: u64,
    pub checks: Vec<CheckResult>,
    pub pass: bool,
}

struct Suite {
    checks: Vec<CheckResult>,
}

impl Suite {
    fn record(&mut self, name: &str, outcome: Result<(bool, String)>) {
        let (pass, detail) = outcome.unwrap_or_else(|err| (false, err.to_string()));
        self.checks.push(CheckResult { name: name.into(), pass, detail });
    }
}

fn structure(l: &Lattice) -> Result<(bool, String)> {
    let g = l.generation();
    let n = 3usize.pow(g);
    let d = (1usize << g) - 1;
    let mut sides = BTreeSet::new();
    let mut ok = true;
    for lp in l.loops() {
        for &inc in &lp.incidences {
            ok &= sides.insert(inc);
        }
    }
    ok &= sides.len() == 3 * n;
    ok &= (0..n).all(|v| l.loops_of_vertex(v).iter().collect::<BTreeSet<_>>().len() == 3);
    ok &= l.vertex_count() == n && l.loops().len() == loop_count(g);
    let diameter = l.bfs_diameter();
    ok &= diameter == d && l.lateral_link_count() == d;
    Ok((ok, format!("{n} vertices, {} loops, diameter {diameter}", l.loops().len())))
}

fn counts(l: &Arc<Lattice>) -> Result<(bool, String)> {
    let psi = build_psi(l)?;
    let k = psi.system().log2_count().unwrap_or(usize::MAX);
    let mut ok = k == closed_form_log2_m(l.generation());
    if l.generation() <= EXPLICIT_MAX_GENERATION {
        ok &= psi.system().enumerate_solutions(24)?.count() == 1 << k;
    }
    Ok((ok, format!("log2 M = {k}")))
}

fn oracle(l: &Arc<Lattice>) -> Result<(bool, String)> {
    let psi = SparseState::from_coset(&build_psi(l)?)?;
    let ratio = contract_network(l)?.ratio_to(&psi);
    Ok((ratio.is_some(), format!("ratio {}", ratio.map_or("none".into(), |r| r.to_string()))))
}

fn scale() -> Result<(bool, String)> {
    let lambda = check_scale_invariance(PortConvention::Rotational)?;
    let ok = lambda * lambda == ExactScalar::integer(8)
        && block_support_rule_check()
        && check_scale_invariance(PortConvention::Transposed).is_err();
    Ok((ok, format!("λ = {lambda}")))
}

fn flippers(l: &Arc<Lattice>, seed: u64) -> Result<(bool, String)> {
    let (psi, phi) = (build_psi(l)?, build_phi(l)?);
    let id = LocalOperator::identity(vec![0])?;
    let mut ok = matrix_element(&phi, &id, &psi)?.is_zero();
    let q = FlipperQuery::largest_four(l, l.corners())?;
    let Some(f) = find_syndrome_flipper(l, &q)? else {
        return Ok((false, "no corner-free flipper".into()));
    };
    let chk = check_flipper(l, &f, 1000, seed)?;
    ok &= chk.shift_matches && chk.samples_in_phi == chk.samples && chk.samples_distinct;
    ok &= chk.maps_psi_to_phi != Some(false);
    Ok((ok, format!("flipper {:?}", f.ops)))
}

fn detection(l: &Arc<Lattice>, seed: u64) -> Result<(bool, String)> {
    let r = error_detection_suite(l, &DetectionOptions { seed, ..Default::default() })?;
    let neg = negative_control(l)?;
    let ok = r.pass && neg.as_ref().is_some_and(|w| !w.detected);
    Ok((ok, format!("bound {}, {} supports, {} failures", r.bound, r.exhaustive_supports, r.failures.len())))
}

fn cone(l: &Lattice, seed: u64) -> Result<(bool, String)> {
    let mut ok = depth_bound(1, 1)?.min_generation == 3;
    let mut worst = Vec::new();
    for (p, layers) in [(1, 1), (1, 2), (2, 2)] {
        let r = causal_cone_check(l, p, layers, 200, seed)?;
        ok &= r.pass;
        worst.push(r.per_layer_max.last().copied().unwrap_or(0));
    }
    Ok((ok, format!("cone maxima {worst:?}")))
}

fn circuit(l: &Arc<Lattice>) -> Result<(bool, String)> {
    let prep = prepare_by_circuit(l, None)?;
    let erg = ergodicity_check(l)?;
    Ok((prep.equals_psi && erg.pass, format!("orbit {}", erg.orbit_size)))
}

fn canonical(l: &Arc<Lattice>, seed: u64, samples: u64) -> Result<(bool, String)> {
    let psi = build_psi(l)?;
    let zero = Configuration::zeros(l.vertex_count());
    let free = GF2System::build(l, Syndrome::zeros(l.loops().len()), &l.lateral_loops())?;
    let mut ok = true;
    for s in seed..seed + samples {
        let c = psi.system().sample_solution(s)?;
        let r = canonicalize(l, &c, true)?;
        ok &= replay(l, &c, &r.forms[0].moves)? == zero;
        let c = free.sample_solution(s)?;
        let r = canonicalize(l, &c, false)?;
        ok &= r.forms.len() == 2;
        for f in &r.forms {
            ok &= replay(l, &c, &f.moves)? == f.form;
        }
    }
    Ok((ok, format!("{samples} samples per mode")))
}

/// Runs every check meaningful at `generation`.
pub fn verify_all(generation: u32, seed: u64) -> Result<SuiteReport> {
    let l = Arc::new(build_lattice(generation)?);
    let mut s = Suite { checks: Vec::new() };
    s.record("lattice structure", structure(&l));
    s.record("solution count", counts(&l));
    if generation <= DENSE_CONTRACTION_MAX_GENERATION {
        s.record("tensor network equals enumeration", oracle(&l));
    }
    s.record("scale invariance", scale());
    s.record(
        "zero correlations",
        correlation_suite(&l).map(|(r, _)| (r.pass, format!("{} pairs", r.nonadjacent_pairs))),
    );
    if generation >= 3 {
        // at generation 2 every pair of blocks is linked
        s.record(
            "block-level correlations",
            block_correlation_suite(&l).map(|r| (r.pass, format!("{} block pairs", r.nonadjacent_block_pairs))),
        );
    }
    if generation >= 2 {
        s.record("orthogonality and flipper", flippers(&l, seed));
        s.record("error detection", detection(&l, seed));
    }
    if generation == 2 {
        s.record(
            "block factorization",
            block_decompose_check(&l, &w_plus_table()).map(|r| (r.pass, format!("{} fine", r.fine_configurations))),
        );
    }
    s.record("depth bound and causal cone", cone(&l, seed));
    if generation <= EXPLICIT_MAX_GENERATION {
        s.record("circuit preparation and ergodicity", circuit(&l));
    }
    s.record("canonical forms", canonical(&l, seed, 100));
    let pass = s.checks.iter().all(|c| c.pass);
    Ok(SuiteReport { generation, seed, checks: s.checks, pass })
}

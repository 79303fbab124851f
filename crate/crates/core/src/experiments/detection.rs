//! Error-detection sweep for the pair (`Ψ`, `Φ`).
//!
//! An operator `E` is detected when `⟨Ψ|E|Φ⟩ = ⟨Φ|E|Ψ⟩ = 0` and
//! `⟨E⟩_Ψ = ⟨E⟩_Φ`. By linearity it suffices to check letter dyads.

use std::collections::BTreeSet;
use std::sync::Arc;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::Serialize;

use super::depth::detection_bound;
use super::flipper::{find_syndrome_flipper, Flipper, FlipperQuery};
use crate::error::{Error, Result};
use crate::lattice::Lattice;
use crate::scalar::ExactScalar;
use crate::state::{build_phi, build_psi, matrix_element, CosetState, PreparedSupport};

#[derive(Debug, Clone, Serialize)]
pub struct DetectionOptions {
    /// Supports up to this size are enumerated exhaustively.
    pub max_exhaustive_size: usize,
    /// Supports up to this size get every dyad; larger ones get samples.
    pub exhaustive_operator_size: usize,
    pub operator_samples: usize,
    /// Total sampled (support, dyad) checks beyond the exhaustive tier.
    pub sample_budget: usize,
    pub sample_max_size: usize,
    pub seed: u64,
}

impl Default for DetectionOptions {
    fn default() -> Self {
        DetectionOptions {
            max_exhaustive_size: 4,
            exhaustive_operator_size: 4,
            operator_samples: 64,
            sample_budget: 0,
            sample_max_size: 8,
            seed: 0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct DetectionFailure {
    pub support: Vec<usize>,
    pub out: Vec<u8>,
    pub input: Vec<u8>,
    pub psi_e_phi: ExactScalar,
    pub phi_e_psi: ExactScalar,
    pub e_psi: ExactScalar,
    pub e_phi: ExactScalar,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct SupportRow {
    pub support: Vec<usize>,
    pub diameter: usize,
    pub ops_checked: u64,
    pub failures: usize,
    pub sampled: bool,
}

impl SupportRow {
    pub const CSV_HEADER: &'static str = "support,diameter,ops_checked,failures";

    pub fn csv(&self) -> String {
        let s: Vec<String> = self.support.iter().map(|v| v.to_string()).collect();
        format!("{},{},{},{}", s.join(";"), self.diameter, self.ops_checked, self.failures)
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct DetectionReport {
    pub generation: u32,
    pub diameter: u64,
    pub bound: u64,
    pub options: DetectionOptions,
    pub exhaustive_supports: usize,
    pub sampled_supports: usize,
    pub exhaustive_checks: u64,
    pub sampled_checks: u64,
    pub failures: Vec<DetectionFailure>,
    /// Supports with no largest-four flipper avoiding them.
    pub supports_without_flipper: Vec<Vec<usize>>,
    pub rows: Vec<SupportRow>,
    pub pass: bool,
}

/// Everything needed to evaluate the four detection quantities of dyads on
/// one support.
struct SupportProbe {
    prep: PreparedSupport,
    p_psi: u64,
    p_phi: u64,
    cross: Option<u128>,
}

impl SupportProbe {
    fn new(psi: &CosetState, phi: &CosetState, support: &[usize]) -> Result<Self> {
        // Ψ and Φ share the constraint matrix, so one restriction serves both
        let prep = PreparedSupport::new(psi.system(), support)?;
        let cross = prep.local_syndrome(&psi.target().xor(phi.target()));
        Ok(SupportProbe {
            p_psi: psi.system().particular_mask(support)?,
            p_phi: phi.system().particular_mask(support)?,
            prep,
            cross,
        })
    }

    fn check(&self, out: u64, input: u64) -> Option<DetectionFailure> {
        let psi_e_phi = self.prep.dyad_value(out, input, self.p_phi, self.cross);
        let phi_e_psi = self.prep.dyad_value(out, input, self.p_psi, self.cross);
        let e_psi = self.prep.dyad_value(out, input, self.p_psi, Some(0));
        let e_phi = self.prep.dyad_value(out, input, self.p_phi, Some(0));
        let ok = psi_e_phi.is_zero() && phi_e_psi.is_zero() && e_psi == e_phi;
        (!ok).then(|| {
            let n = self.prep.support().len();
            DetectionFailure {
                support: self.prep.support().to_vec(),
                out: crate::state::decode_tuple(out, n),
                input: crate::state::decode_tuple(input, n),
                psi_e_phi,
                phi_e_psi,
                e_psi,
                e_phi,
            }
        })
    }
}

struct SupportOutcome {
    row: SupportRow,
    failures: Vec<DetectionFailure>,
    has_flipper: bool,
}

fn check_support(
    lattice: &Lattice,
    psi: &CosetState,
    phi: &CosetState,
    support: &[usize],
    ops: OperatorPlan,
) -> Result<SupportOutcome> {
    let probe = SupportProbe::new(psi, phi, support)?;
    let mut failures = Vec::new();
    let mut checked = 0u64;
    match ops {
        OperatorPlan::All => {
            let dim = 1u64 << (2 * support.len());
            for out in 0..dim {
                for input in 0..dim {
                    failures.extend(probe.check(out, input));
                }
            }
            checked = dim * dim;
        }
        OperatorPlan::Sampled { count, seed } => {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let dim = 1u64 << (2 * support.len());
            for _ in 0..count {
                let (out, input) = (rng.gen_range(0..dim), rng.gen_range(0..dim));
                failures.extend(probe.check(out, input));
                checked += 1;
            }
        }
    }
    let query = FlipperQuery::largest_four(lattice, support.iter().copied())?;
    let has_flipper = find_syndrome_flipper(lattice, &query)?.is_some();
    let row = SupportRow {
        support: support.to_vec(),
        diameter: lattice.subset_diameter(support)?,
        ops_checked: checked,
        failures: failures.len(),
        sampled: matches!(ops, OperatorPlan::Sampled { .. }),
    };
    Ok(SupportOutcome { row, failures, has_flipper })
}

#[derive(Debug, Clone, Copy)]
enum OperatorPlan {
    All,
    Sampled { count: usize, seed: u64 },
}

/// Grows a random connected support of exactly `size` vertices whose induced
/// diameter stays within `bound`; `None` if growth gets stuck.
fn random_support<R: Rng>(lattice: &Lattice, size: usize, bound: usize, rng: &mut R) -> Option<Vec<usize>> {
    let mut set = vec![rng.gen_range(0..lattice.vertex_count())];
    while set.len() < size {
        let mut cands: Vec<usize> =
            set.iter().flat_map(|&v| lattice.neighbors(v)).filter(|w| !set.contains(w)).collect();
        cands.sort_unstable();
        cands.dedup();
        let mut ok: Vec<usize> = cands
            .into_iter()
            .filter(|&w| {
                let mut t = set.clone();
                t.push(w);
                lattice.subset_diameter(&t).is_ok_and(|d| d <= bound)
            })
            .collect();
        if ok.is_empty() {
            return None;
        }
        let k = rng.gen_range(0..ok.len());
        set.push(ok.swap_remove(k));
    }
    set.sort_unstable();
    Some(set)
}

/// Number of sampled supports per worker chunk.
const SAMPLE_CHUNK: usize = 16;
const SUPPORT_ATTEMPTS: usize = 64;

pub fn error_detection_suite(lattice: &Arc<Lattice>, options: &DetectionOptions) -> Result<DetectionReport> {
    let g = lattice.generation();
    if g < 2 {
        return Err(Error::UnsupportedGeneration {
            generation: g,
            reason: "the largest four loops only exist from generation 2".into(),
        });
    }
    let psi = build_psi(lattice)?;
    let phi = build_phi(lattice)?;
    let diameter = (1u64 << g) - 1;
    let bound = detection_bound(diameter);

    let supports: Vec<Vec<usize>> =
        lattice.connected_subsets_up_to(bound as usize, options.max_exhaustive_size).collect();
    let exhaustive: Vec<SupportOutcome> = supports
        .par_iter()
        .enumerate()
        .map(|(k, j)| {
            let plan = if j.len() <= options.exhaustive_operator_size {
                OperatorPlan::All
            } else {
                OperatorPlan::Sampled { count: options.operator_samples, seed: chunk_seed(options.seed, 0, k) }
            };
            check_support(lattice, &psi, &phi, j, plan)
        })
        .collect::<Result<_>>()?;

    let min_sampled = options.max_exhaustive_size + 1;
    let per_support = options.operator_samples.max(1);
    let wanted = options.sample_budget.div_ceil(per_support);
    let chunks = wanted.div_ceil(SAMPLE_CHUNK);
    let sampled: Vec<SupportOutcome> = if min_sampled > options.sample_max_size || wanted == 0 {
        Vec::new()
    } else {
        (0..chunks)
            .into_par_iter()
            .map(|c| -> Result<Vec<SupportOutcome>> {
                let mut rng = ChaCha8Rng::seed_from_u64(chunk_seed(options.seed, 1, c));
                let mut out = Vec::new();
                let take = SAMPLE_CHUNK.min(wanted - c * SAMPLE_CHUNK);
                for k in 0..take {
                    let size = rng.gen_range(min_sampled..=options.sample_max_size);
                    let Some(j) =
                        (0..SUPPORT_ATTEMPTS).find_map(|_| random_support(lattice, size, bound as usize, &mut rng))
                    else {
                        continue;
                    };
                    let plan = OperatorPlan::Sampled {
                        count: per_support,
                        seed: chunk_seed(options.seed, 2, c * SAMPLE_CHUNK + k),
                    };
                    out.push(check_support(lattice, &psi, &phi, &j, plan)?);
                }
                Ok(out)
            })
            .collect::<Result<Vec<_>>>()?
            .into_iter()
            .flatten()
            .collect()
    };

    let mut failures = Vec::new();
    let mut without = Vec::new();
    let mut rows = Vec::new();
    let (mut ex_checks, mut sa_checks) = (0, 0);
    for (i, o) in exhaustive.into_iter().chain(sampled).enumerate() {
        if i < supports.len() {
            ex_checks += o.row.ops_checked;
        } else {
            sa_checks += o.row.ops_checked;
        }
        if !o.has_flipper {
            without.push(o.row.support.clone());
        }
        failures.extend(o.failures);
        rows.push(o.row);
    }
    let sampled_supports = rows.len() - supports.len();
    Ok(DetectionReport {
        generation: g,
        diameter,
        bound,
        options: options.clone(),
        exhaustive_supports: supports.len(),
        sampled_supports,
        exhaustive_checks: ex_checks,
        sampled_checks: sa_checks,
        pass: failures.is_empty() && without.is_empty(),
        failures,
        supports_without_flipper: without,
        rows,
    })
}

fn chunk_seed(master: u64, stream: u64, index: usize) -> u64 {
    // splitmix-style mixing keeps worker streams independent of scheduling
    let mut z =
        master ^ stream.wrapping_mul(0x9E37_79B9_7F4A_7C15) ^ (index as u64).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

#[derive(Debug, Clone, Serialize)]
pub struct UndetectedWitness {
    pub flipper: Flipper,
    pub psi_e_phi: ExactScalar,
    pub phi_e_psi: ExactScalar,
    pub e_psi: ExactScalar,
    pub e_phi: ExactScalar,
    pub detected: bool,
}

/// Evaluates the flipper found with `forbidden` excluded as an error
/// operator. A flipper maps `Ψ` onto `Φ`, so it must not be detected.
pub fn flipper_witness(lattice: &Arc<Lattice>, forbidden: &BTreeSet<usize>) -> Result<Option<UndetectedWitness>> {
    let query = FlipperQuery::largest_four(lattice, forbidden.iter().copied())?;
    let Some(flipper) = find_syndrome_flipper(lattice, &query)? else {
        return Ok(None);
    };
    let psi = build_psi(lattice)?;
    let phi = build_phi(lattice)?;
    let op = flipper.operator()?;
    let psi_e_phi = matrix_element(&psi, &op, &phi)?;
    let phi_e_psi = matrix_element(&phi, &op, &psi)?;
    let e_psi = matrix_element(&psi, &op, &psi)?;
    let e_phi = matrix_element(&phi, &op, &phi)?;
    let detected = psi_e_phi.is_zero() && phi_e_psi.is_zero() && e_psi == e_phi;
    Ok(Some(UndetectedWitness { flipper, psi_e_phi, phi_e_psi, e_psi, e_phi, detected }))
}

/// The three-site, corner-free flipper as an error operator.
pub fn negative_control(lattice: &Arc<Lattice>) -> Result<Option<UndetectedWitness>> {
    flipper_witness(lattice, &lattice.corners().into_iter().collect())
}

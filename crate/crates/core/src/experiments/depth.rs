//! Circuit-depth bound arithmetic and a combinatorial causal-cone check.

use num_bigint::BigInt;
use num_rational::BigRational;
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use crate::error::{invalid, Result};
use crate::lattice::Lattice;
use crate::scalar::rational_string;

fn rat(n: i64, d: i64) -> BigRational {
    BigRational::new(BigInt::from(n), BigInt::from(d))
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct DepthBound {
    pub p: u64,
    pub l: u64,
    #[serde(serialize_with = "crate::scalar::serialize_rational")]
    pub threshold: BigRational,
    pub min_generation: u32,
    pub dj_cap: u64,
}

/// Diameter a lattice must exceed for an `L`-layer circuit of patch size
/// `P` to leave every error detectable: `(16PL − 8P + 5)/3`.
pub fn depth_threshold(p: u64, l: u64) -> Result<BigRational> {
    if p == 0 || l == 0 {
        return invalid("P and L must be positive");
    }
    let (p, l) = (p as i64, l as i64);
    Ok(rat(16 * p * l - 8 * p + 5, 3))
}

/// Smallest generation whose diameter `2^g − 1` reaches the threshold.
pub fn min_generation_for(threshold: &BigRational) -> u32 {
    (1..).find(|&g| BigRational::from_integer(BigInt::from((1i64 << g) - 1)) >= *threshold).expect("finite")
}

pub fn depth_bound(p: u64, l: u64) -> Result<DepthBound> {
    let threshold = depth_threshold(p, l)?;
    let min_generation = min_generation_for(&threshold);
    Ok(DepthBound { p, l, threshold, min_generation, dj_cap: (2 * l - 1) * p })
}

/// The layer count a circuit must exceed: `L > 3𝒟/(16P) + 1/2 − 5/(16P)`.
pub fn layer_lower_bound(diameter: u64, p: u64) -> Result<BigRational> {
    if p == 0 {
        return invalid("P must be positive");
    }
    let (d, p) = (diameter as i64, p as i64);
    Ok(rat(3 * d, 16 * p) + rat(1, 2) - rat(5, 16 * p))
}

/// Smallest integer strictly above [`layer_lower_bound`].
pub fn min_layers(diameter: u64, p: u64) -> Result<u64> {
    let b = layer_lower_bound(diameter, p)?;
    let f = b.floor().to_integer();
    Ok(u64::try_from(f).unwrap_or(0) + 1)
}

/// Largest error-support diameter guaranteed detectable: `⌊(3𝒟 − 5)/8⌋`.
pub fn detection_bound(diameter: u64) -> u64 {
    (3 * diameter).saturating_sub(5) / 8
}

#[derive(Debug, Clone, Serialize)]
pub struct InverseBoundReport {
    pub diameter: u64,
    pub p: u64,
    pub bound: String,
    pub min_layers: u64,
}

pub fn inverse_bound_report(diameter: u64, p: u64) -> Result<InverseBoundReport> {
    Ok(InverseBoundReport {
        diameter,
        p,
        bound: rational_string(&layer_lower_bound(diameter, p)?),
        min_layers: min_layers(diameter, p)?,
    })
}

#[derive(Debug, Clone, Serialize)]
pub struct CausalConeReport {
    pub p: u64,
    pub layers: u64,
    pub starts: usize,
    pub seed: u64,
    /// Worst induced diameter after each layer.
    pub per_layer_max: Vec<usize>,
    /// `(2l − 1)P` for each layer `l`.
    pub per_layer_cap: Vec<u64>,
    pub pass: bool,
}

/// A random cover of the lattice by disjoint patches of induced diameter at
/// most `p`.
pub fn random_patch_cover<R: Rng>(lattice: &Lattice, p: usize, rng: &mut R) -> Vec<Vec<usize>> {
    let n = lattice.vertex_count();
    let mut covered = vec![false; n];
    let mut order: Vec<usize> = (0..n).collect();
    order.shuffle(rng);
    let mut patches = Vec::new();
    for &v in &order {
        if covered[v] {
            continue;
        }
        covered[v] = true;
        let mut patch = vec![v];
        let target = rng.gen_range(1..=2 * p + 2);
        while patch.len() < target {
            let mut cands: Vec<usize> =
                patch.iter().flat_map(|&x| lattice.neighbors(x)).filter(|&w| !covered[w]).collect();
            cands.sort_unstable();
            cands.dedup();
            cands.shuffle(rng);
            let pick = cands.into_iter().find(|&w| {
                let mut t = patch.clone();
                t.push(w);
                lattice.subset_diameter(&t).is_ok_and(|d| d <= p)
            });
            match pick {
                Some(w) => {
                    covered[w] = true;
                    patch.push(w);
                }
                None => break,
            }
        }
        patches.push(patch);
    }
    patches
}

/// Grows single-vertex supports through `layers` random patch covers and
/// checks the induced diameter against `(2l − 1)P` after every layer.
pub fn causal_cone_check(lattice: &Lattice, p: u64, layers: u64, starts: usize, seed: u64) -> Result<CausalConeReport> {
    if p == 0 {
        return invalid("P must be positive");
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let n = lattice.vertex_count();
    let mut per_layer_max = vec![0usize; layers as usize];
    let per_layer_cap: Vec<u64> = (1..=layers).map(|l| (2 * l - 1) * p).collect();
    for _ in 0..starts {
        let mut support = vec![false; n];
        support[rng.gen_range(0..n)] = true;
        for worst in per_layer_max.iter_mut() {
            let cover = random_patch_cover(lattice, p as usize, &mut rng);
            let mut next = vec![false; n];
            for patch in &cover {
                if patch.iter().any(|&v| support[v]) {
                    for &v in patch {
                        next[v] = true;
                    }
                }
            }
            support = next;
            let set: Vec<usize> = (0..n).filter(|&v| support[v]).collect();
            let d = lattice.subset_diameter(&set)?;
            *worst = (*worst).max(d);
        }
    }
    let pass = per_layer_max.iter().zip(&per_layer_cap).all(|(&d, &c)| d as u64 <= c);
    Ok(CausalConeReport { p, layers, starts, seed, per_layer_max, per_layer_cap, pass })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::lattice::build_lattice;

    #[test]
    fn bound_examples() {
        let b = depth_bound(1, 1).unwrap();
        assert_eq!(rational_string(&b.threshold), "13/3");
        assert_eq!(b.min_generation, 3);
        assert_eq!(b.dj_cap, 1);
        let b = depth_bound(2, 3).unwrap();
        assert_eq!(rational_string(&b.threshold), "85/3");
        assert_eq!(b.min_generation, 5);
        assert_eq!(b.dj_cap, 10);
        assert_eq!(rational_string(&layer_lower_bound(7, 1).unwrap()), "3/2");
        assert_eq!(min_layers(7, 1).unwrap(), 2);
        assert!(depth_bound(0, 1).is_err());
        assert!(depth_bound(1, 0).is_err());
        assert!(layer_lower_bound(7, 0).is_err());
    }

    #[test]
    fn detection_bounds() {
        assert_eq!(detection_bound(3), 0);
        assert_eq!(detection_bound(7), 2);
        assert_eq!(detection_bound(15), 5);
        assert_eq!(detection_bound(1), 0);
    }

    #[test]
    fn threshold_and_inverse_agree() {
        // at 𝒟 equal to the threshold the inverse bound equals L exactly
        for p in 1..6u64 {
            for l in 1..6u64 {
                let t = depth_threshold(p, l).unwrap();
                let (d, p_i) = (t.clone(), p as i64);
                let inv = d * rat(3, 16 * p_i) + rat(1, 2) - rat(5, 16 * p_i);
                assert_eq!(inv, BigRational::from_integer(BigInt::from(l)));
            }
        }
    }

    #[test]
    fn cones_stay_within_the_cap() {
        let lat = build_lattice(3).unwrap();
        let r = causal_cone_check(&lat, 1, 1, 200, 4).unwrap();
        assert!(r.pass);
        assert!(r.per_layer_max[0] <= 1);
        let r = causal_cone_check(&lat, 1, 2, 200, 5).unwrap();
        assert!(r.pass && r.per_layer_max[1] <= 3);
        let r = causal_cone_check(&lat, 2, 0, 10, 6).unwrap();
        assert!(r.pass && r.per_layer_max.is_empty());
    }

    #[test]
    fn patch_covers_partition_the_lattice() {
        let lat = build_lattice(3).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        for p in 1..4 {
            let cover = random_patch_cover(&lat, p, &mut rng);
            let mut all: Vec<usize> = cover.iter().flatten().copied().collect();
            all.sort_unstable();
            assert_eq!(all, (0..27).collect::<Vec<_>>());
            assert!(cover.iter().all(|c| lat.subset_diameter(c).unwrap() <= p));
        }
    }
}

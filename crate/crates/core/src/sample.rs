//! Seeded random instances for tests, the self-test and benchmarks.

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_xoshiro::Xoshiro256PlusPlus;

use crate::error::Result;
use crate::generator::{combine, CycleDecomposition, Generator, ProbabilityVector};
use crate::graph::{enumerate_hamiltonian_cycles, Cycle, DirectedGraph};

pub type SampleRng = Xoshiro256PlusPlus;

pub fn rng(seed: u64) -> SampleRng {
    Xoshiro256PlusPlus::seed_from_u64(seed)
}

/// Entries drawn from `[0.2, 1.2)` and normalized.
pub fn random_probability<R: Rng>(n: usize, rng: &mut R) -> ProbabilityVector {
    let w: Vec<f64> = (0..n).map(|_| 0.2 + rng.random::<f64>()).collect();
    ProbabilityVector::from_unnormalized(w).expect("positive weights")
}

/// A uniformly random cycle through `len` distinct vertices of `0..n`.
pub fn random_cycle<R: Rng>(n: usize, len: usize, rng: &mut R) -> Cycle {
    let mut v: Vec<usize> = (0..n).collect();
    v.shuffle(rng);
    v.truncate(len);
    Cycle::new(v).expect("distinct vertices")
}

/// A random Hamiltonian cycle mixed with `extra` random cycles of random
/// lengths, with random weights; irreducible by construction.
pub fn random_generator<R: Rng>(pi: &ProbabilityVector, extra: usize, rng: &mut R) -> Result<Generator> {
    let n = pi.len();
    let mut terms = vec![(random_cycle(n, n, rng), 0.0)];
    for _ in 0..extra {
        let len = rng.random_range(2..=n);
        terms.push((random_cycle(n, len, rng), 0.0));
    }
    let raw: Vec<f64> = terms.iter().map(|_| 0.05 + rng.random::<f64>()).collect();
    let s: f64 = raw.iter().sum();
    for (t, w) in terms.iter_mut().zip(raw) {
        t.1 = w / s;
    }
    combine(&CycleDecomposition::new(terms)?, pi)
}

/// A random Hamiltonian cycle plus each other arc with probability `p`.
pub fn random_hamiltonian_digraph<R: Rng>(n: usize, p: f64, rng: &mut R) -> DirectedGraph {
    let c = random_cycle(n, n, rng);
    let mut edges: Vec<(usize, usize)> = c.arcs().collect();
    for a in 0..n {
        for b in 0..n {
            if a != b && rng.random::<f64>() < p {
                edges.push((a, b));
            }
        }
    }
    DirectedGraph::new(n, edges).expect("valid edges")
}

/// A strongly connected digraph without a Hamiltonian cycle: two cycles
/// glued at a single vertex, with extra arcs that keep it non-Hamiltonian.
pub fn random_non_hamiltonian_digraph<R: Rng>(n: usize, rng: &mut R) -> DirectedGraph {
    assert!(n >= 3, "need at least three vertices");
    loop {
        let mut v: Vec<usize> = (0..n).collect();
        v.shuffle(rng);
        let cut = rng.random_range(2..n);
        let hub = v[0];
        let mut edges = Vec::new();
        let left: Vec<usize> = v[..cut].to_vec();
        let mut right = vec![hub];
        right.extend_from_slice(&v[cut..]);
        for part in [&left, &right] {
            for k in 0..part.len() {
                edges.push((part[k], part[(k + 1) % part.len()]));
            }
        }
        let mut g = DirectedGraph::new(n, edges.clone()).expect("valid edges");
        for _ in 0..n {
            let a = rng.random_range(0..n);
            let b = rng.random_range(0..n);
            if a == b {
                continue;
            }
            let mut trial = edges.clone();
            trial.push((a, b));
            let h = DirectedGraph::new(n, trial.clone()).expect("valid edges");
            if enumerate_hamiltonian_cycles(&h).is_empty() {
                edges = trial;
                g = h;
            }
        }
        if g.is_strongly_connected() && enumerate_hamiltonian_cycles(&g).is_empty() {
            return g;
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn instances_have_their_properties() {
        let mut r = rng(5);
        for n in 3..=8 {
            let pi = random_probability(n, &mut r);
            let l = random_generator(&pi, 3, &mut r).unwrap();
            assert!(l.is_irreducible());
            assert!(l.check_normalized_invariant(&pi).is_ok());
            let g = random_hamiltonian_digraph(n, 0.2, &mut r);
            assert!(!enumerate_hamiltonian_cycles(&g).is_empty());
            let h = random_non_hamiltonian_digraph(n, &mut r);
            assert!(h.is_strongly_connected() && enumerate_hamiltonian_cycles(&h).is_empty());
        }
    }
}

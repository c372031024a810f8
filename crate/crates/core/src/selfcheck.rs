//! Built-in numerical checks: analytic versus finite-difference gradients on
//! a small method graph, and node-permutation invariance of the graph
//! encoder on random graphs.

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::gnn::params::{PgnnConfig, PgnnParams};
use crate::gnn::{finite_diff_check, ggnn_forward, EmbeddingKind, ForwardOptions, GradCheckReport};
use crate::partition::{partition, PartitionConfig};
use crate::synth::{permute_graph, random_graph, statement_sast, SynthSpec};
use crate::Result;

pub const GRADIENT_TOLERANCE: f64 = 1e-4;
pub const GRADIENT_EPSILON: f64 = 1e-5;
pub const PERMUTATION_TOLERANCE: f64 = 1e-9;
pub const PERMUTATION_GRAPHS: usize = 20;
pub const PERMUTATION_MAX_NODES: usize = 30;
/// Statement subtree sizes of the gradient-check method: with the
/// declaration and body nodes this gives 12 nodes.
pub const GRADIENT_STATEMENTS: [usize; 3] = [4, 3, 3];
const TOY_VOCAB: u32 = 24;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GradientSection {
    pub nodes: usize,
    pub subgraphs: usize,
    pub tolerance: f64,
    pub report: GradCheckReport,
    pub passed: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PermutationSection {
    pub graphs: usize,
    pub max_nodes: usize,
    pub tolerance: f64,
    pub max_abs_diff: f64,
    pub passed: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SelfCheckReport {
    pub schema_version: u32,
    pub dims: usize,
    pub seed: u64,
    pub gradient: GradientSection,
    pub permutation: PermutationSection,
    pub passed: bool,
}

pub fn gradient_check(dims: usize, seed: u64) -> Result<GradientSection> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let sast = statement_sast(
        &mut rng,
        &SynthSpec {
            statement_sizes: GRADIENT_STATEMENTS.to_vec(),
            variables: 2,
            variable_rate: 0.5,
            vocab_size: TOY_VOCAB,
        },
    );
    let parts = partition(&sast, &PartitionConfig::new(4)?)?;
    let params = PgnnParams::init(PgnnConfig::new(TOY_VOCAB as usize, dims), seed)?;
    let report = finite_diff_check(&params, &sast, &parts, GRADIENT_EPSILON, seed)?;
    Ok(GradientSection {
        nodes: sast.len(),
        subgraphs: parts.subgraphs.len(),
        tolerance: GRADIENT_TOLERANCE,
        passed: report.max_relative_error < GRADIENT_TOLERANCE,
        report,
    })
}

pub fn permutation_check(dims: usize, seed: u64) -> Result<PermutationSection> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0x5EED);
    let params = PgnnParams::init(PgnnConfig::new(TOY_VOCAB as usize, dims), seed)?;
    let opts = ForwardOptions::default();
    let mut worst = 0.0f64;
    for _ in 0..PERMUTATION_GRAPHS {
        let n = rng.random_range(1..=PERMUTATION_MAX_NODES);
        let e = rng.random_range(0..=3 * n);
        let g = random_graph(&mut rng, n, e, TOY_VOCAB);
        let mut perm: Vec<usize> = (0..n).collect();
        perm.shuffle(&mut rng);
        let a = ggnn_forward(&g, EmbeddingKind::WholeGraphC, &params, &opts)?.embedding;
        let b = ggnn_forward(&permute_graph(&g, &perm), EmbeddingKind::WholeGraphC, &params, &opts)?.embedding;
        for (x, y) in a.v.iter().zip(&b.v) {
            worst = worst.max((x - y).abs());
        }
    }
    Ok(PermutationSection {
        graphs: PERMUTATION_GRAPHS,
        max_nodes: PERMUTATION_MAX_NODES,
        tolerance: PERMUTATION_TOLERANCE,
        max_abs_diff: worst,
        passed: worst < PERMUTATION_TOLERANCE,
    })
}

pub fn run(dims: usize, seed: u64) -> Result<SelfCheckReport> {
    let gradient = gradient_check(dims, seed)?;
    let permutation = permutation_check(dims, seed)?;
    Ok(SelfCheckReport {
        schema_version: crate::SCHEMA_VERSION,
        dims,
        seed,
        passed: gradient.passed && permutation.passed,
        gradient,
        permutation,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn passes_at_default_settings() {
        let r = run(8, 7).unwrap();
        assert_eq!(r.gradient.nodes, 12);
        assert!(r.gradient.subgraphs > 1);
        assert!(r.passed, "{r:?}");
        assert_eq!(r, run(8, 7).unwrap());
    }
}

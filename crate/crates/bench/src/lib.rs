//! Shared inputs for the criterion benches.

use nalgebra::DVector;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use smc_optl::experiments::{builtin_config, Target};
use smc_optl::smc::{initialize, ParticleSystem};
use smc_optl::{GmmParams, ProposalSpec};

/// `n` points drawn from the bimodal toy target, paired with a random-walk
/// step each, stacked as 2-D `(x_prev, x_curr)` vectors.
pub fn bimodal_pairs(n: usize, seed: u64) -> Vec<DVector<f64>> {
    let (target, proposal) = problem("bimodal");
    let Target::Mixture(mix) = target else {
        unreachable!("bimodal target is a mixture")
    };
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..n)
        .map(|_| {
            let x = GmmParams::sample(&mix, &mut rng);
            let y = proposal.propose(&x, &mut rng);
            DVector::from_vec(vec![x[0], y[0]])
        })
        .collect()
}

pub fn problem(name: &str) -> (Target, ProposalSpec) {
    let cfg = builtin_config(name).expect("built-in experiment");
    (
        cfg.target.build().expect("valid target"),
        cfg.proposal.build().expect("valid proposal"),
    )
}

pub fn initial_system(name: &str, n: usize, seed: u64) -> ParticleSystem {
    let (target, proposal) = problem(name);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    initialize(&target, &proposal, n, &mut rng).expect("non-degenerate initialisation")
}

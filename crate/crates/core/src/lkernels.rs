//! Backward L-kernels `L(x_prev | x_curr)` for the weight update.
//!
//! * `forward` reuses the random-walk proposal in reverse.
//! * `gauss-opt` fits one Gaussian to the `(x_prev, x_curr)` pairs of the
//!   current iteration and conditions it on `x_curr`.
//! * `gmm-opt:M` does the same with an `M`-component mixture.

use std::fmt;
use std::str::FromStr;

use nalgebra::DVector;
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::distributions::{
    fit_gaussian, fit_gmm, GaussianBackwardKernel, GmmParams, JointBlocks, MixtureBackwardKernel,
};
use crate::error::{Result, SmcError};
use crate::proposal::ProposalSpec;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(try_from = "String", into = "String")]
pub enum LKernelStrategy {
    ForwardProposal,
    GaussianOpt,
    GmmOpt { components: usize },
}

impl LKernelStrategy {
    pub fn gmm(components: usize) -> Result<Self> {
        if components == 0 {
            return Err(SmcError::InvalidConfig(
                "gmm-opt needs at least one component".into(),
            ));
        }
        Ok(Self::GmmOpt { components })
    }

    /// Minimum number of particles the fit needs for state dimension `dim`.
    pub fn min_particles(&self, dim: usize) -> usize {
        match self {
            Self::ForwardProposal => 0,
            Self::GaussianOpt => 2 * dim + 1,
            Self::GmmOpt { components } => components * (2 * dim + 1),
        }
    }
}

impl fmt::Display for LKernelStrategy {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Self::ForwardProposal => f.write_str("forward"),
            Self::GaussianOpt => f.write_str("gauss-opt"),
            Self::GmmOpt { components } => write!(f, "gmm-opt:{components}"),
        }
    }
}

impl FromStr for LKernelStrategy {
    type Err = SmcError;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim() {
            "forward" => Ok(Self::ForwardProposal),
            "gauss-opt" => Ok(Self::GaussianOpt),
            other => {
                let m = other
                    .strip_prefix("gmm-opt:")
                    .and_then(|m| m.parse::<usize>().ok())
                    .ok_or_else(|| SmcError::UnknownStrategy(s.to_string()))?;
                Self::gmm(m)
            }
        }
    }
}

impl TryFrom<String> for LKernelStrategy {
    type Error = SmcError;

    fn try_from(s: String) -> Result<Self> {
        s.parse()
    }
}

impl From<LKernelStrategy> for String {
    fn from(s: LKernelStrategy) -> Self {
        s.to_string()
    }
}

/// An L-kernel ready for evaluation.
#[derive(Debug, Clone)]
pub enum FittedLKernel {
    ForwardProposal,
    Gaussian(Box<GaussianBackwardKernel>),
    Mixture {
        joint: GmmParams,
        kernel: MixtureBackwardKernel,
    },
}

impl FittedLKernel {
    /// Fits the kernel for `strategy` to the pairs `(prev[i], curr[i])`.
    pub fn fit<R: Rng + ?Sized>(
        strategy: LKernelStrategy,
        prev: &[DVector<f64>],
        curr: &[DVector<f64>],
        rng: &mut R,
    ) -> Result<Self> {
        if prev.len() != curr.len() {
            return Err(SmcError::DimensionMismatch {
                expected: prev.len(),
                got: curr.len(),
            });
        }
        match strategy {
            LKernelStrategy::ForwardProposal => Ok(Self::ForwardProposal),
            LKernelStrategy::GaussianOpt => {
                let joint = fit_gaussian(&stack_pairs(prev, curr))?;
                Self::from_blocks(JointBlocks::from_joint(&joint)?)
            }
            LKernelStrategy::GmmOpt { components } => {
                let joint = fit_gmm(&stack_pairs(prev, curr), components, rng)?;
                Self::from_mixture(joint)
            }
        }
    }

    /// A fixed Gaussian kernel built from known joint blocks.
    pub fn from_blocks(blocks: JointBlocks) -> Result<Self> {
        Ok(Self::Gaussian(Box::new(GaussianBackwardKernel::new(
            blocks,
        )?)))
    }

    pub fn from_mixture(joint: GmmParams) -> Result<Self> {
        let kernel = MixtureBackwardKernel::new(&joint)?;
        Ok(Self::Mixture { joint, kernel })
    }

    /// `ln L(x_prev | x_curr)`.
    pub fn log_density(
        &self,
        proposal: &ProposalSpec,
        x_prev: &DVector<f64>,
        x_curr: &DVector<f64>,
    ) -> f64 {
        match self {
            Self::ForwardProposal => proposal.log_transition(x_prev, x_curr),
            Self::Gaussian(k) => k.log_density(x_prev, x_curr),
            Self::Mixture { kernel, .. } => kernel.log_density(x_prev, x_curr),
        }
    }

    pub fn joint_blocks(&self) -> Option<&JointBlocks> {
        match self {
            Self::Gaussian(k) => Some(k.blocks()),
            _ => None,
        }
    }
}

/// Free-function form of [`FittedLKernel::fit`].
pub fn fit_lkernel<R: Rng + ?Sized>(
    strategy: LKernelStrategy,
    prev: &[DVector<f64>],
    curr: &[DVector<f64>],
    rng: &mut R,
) -> Result<FittedLKernel> {
    FittedLKernel::fit(strategy, prev, curr, rng)
}

/// Free-function form of [`FittedLKernel::log_density`].
pub fn log_lkernel(
    fit: &FittedLKernel,
    proposal: &ProposalSpec,
    x_prev: &DVector<f64>,
    x_curr: &DVector<f64>,
) -> f64 {
    fit.log_density(proposal, x_prev, x_curr)
}

fn stack_pairs(prev: &[DVector<f64>], curr: &[DVector<f64>]) -> Vec<DVector<f64>> {
    prev.iter()
        .zip(curr)
        .map(|(p, c)| {
            let d = p.len();
            let mut v = DVector::zeros(2 * d);
            v.rows_mut(0, d).copy_from(p);
            v.rows_mut(d, d).copy_from(c);
            v
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::distributions::GaussianParams;
    use nalgebra::DMatrix;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn unit_walk(dim: usize) -> ProposalSpec {
        ProposalSpec::new(GaussianParams::standard(dim), DMatrix::identity(dim, dim)).unwrap()
    }

    /// Pairs from x1 ~ N(0, 1), x2 | x1 ~ N(x1, 1).
    fn two_step_pairs(n: usize, seed: u64) -> (Vec<DVector<f64>>, Vec<DVector<f64>>) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let walk = unit_walk(1);
        let prev: Vec<_> = (0..n).map(|_| walk.initial().sample(&mut rng)).collect();
        let curr = prev.iter().map(|p| walk.propose(p, &mut rng)).collect();
        (prev, curr)
    }

    fn scalar(v: f64) -> DMatrix<f64> {
        DMatrix::from_element(1, 1, v)
    }

    #[test]
    fn strategy_round_trips_through_strings() {
        for s in ["forward", "gauss-opt", "gmm-opt:1", "gmm-opt:2"] {
            assert_eq!(s.parse::<LKernelStrategy>().unwrap().to_string(), s);
        }
        assert!("gmm-opt:0".parse::<LKernelStrategy>().is_err());
        assert!("gmm-opt".parse::<LKernelStrategy>().is_err());
        assert!("optimal".parse::<LKernelStrategy>().is_err());
        let json = serde_json::to_string(&LKernelStrategy::GmmOpt { components: 2 }).unwrap();
        assert_eq!(json, "\"gmm-opt:2\"");
    }

    #[test]
    fn forward_fit_is_empty_and_symmetric() {
        let (prev, curr) = two_step_pairs(10, 0);
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        let fit = fit_lkernel(LKernelStrategy::ForwardProposal, &prev, &curr, &mut rng).unwrap();
        assert!(matches!(fit, FittedLKernel::ForwardProposal));
        let walk = unit_walk(1);
        let a = DVector::from_element(1, 0.3);
        let b = DVector::from_element(1, -1.2);
        let l = log_lkernel(&fit, &walk, &a, &b);
        assert_eq!(l, walk.log_transition(&a, &b));
        assert_eq!(l, walk.log_transition(&b, &a));
    }

    #[test]
    fn gaussian_fit_recovers_two_step_joint() {
        let (prev, curr) = two_step_pairs(100_000, 1);
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        let fit = fit_lkernel(LKernelStrategy::GaussianOpt, &prev, &curr, &mut rng).unwrap();
        let b = fit.joint_blocks().unwrap();
        assert!(b.mu_prev[0].abs() < 0.02 && b.mu_curr[0].abs() < 0.02);
        assert!((b.s_pp[(0, 0)] - 1.0).abs() < 0.02);
        assert!((b.s_pc[(0, 0)] - 1.0).abs() < 0.02);
        assert!((b.s_cc[(0, 0)] - 2.0).abs() < 0.02);
    }

    #[test]
    fn analytic_two_step_kernel_value() {
        let blocks = JointBlocks::new(
            DVector::zeros(1),
            DVector::zeros(1),
            scalar(1.0),
            scalar(1.0),
            scalar(2.0),
        )
        .unwrap();
        let fit = FittedLKernel::from_blocks(blocks).unwrap();
        let got = fit.log_density(
            &unit_walk(1),
            &DVector::from_element(1, 0.5),
            &DVector::from_element(1, 1.0),
        );
        let expected = GaussianParams::univariate(0.5, 0.5)
            .unwrap()
            .log_pdf(&DVector::from_element(1, 0.5));
        assert!((got - expected).abs() < 1e-12);
    }

    #[test]
    fn single_component_mixture_equals_gaussian_fit() {
        let (prev, curr) = two_step_pairs(500, 2);
        let walk = unit_walk(1);
        let g = fit_lkernel(
            LKernelStrategy::GaussianOpt,
            &prev,
            &curr,
            &mut ChaCha8Rng::seed_from_u64(5),
        )
        .unwrap();
        let m = fit_lkernel(
            LKernelStrategy::GmmOpt { components: 1 },
            &prev,
            &curr,
            &mut ChaCha8Rng::seed_from_u64(5),
        )
        .unwrap();
        for (p, c) in prev.iter().zip(&curr).take(50) {
            let a = g.log_density(&walk, p, c);
            let b = m.log_density(&walk, p, c);
            assert!((a - b).abs() < 1e-10, "{a} vs {b}");
        }
    }

    #[test]
    fn separated_mixture_reduces_to_owning_component() {
        let c = DMatrix::from_row_slice(2, 2, &[1.0, 0.6, 0.6, 1.0]);
        let near = GaussianParams::new(DVector::from_vec(vec![0.0, 0.0]), c.clone()).unwrap();
        let far = GaussianParams::new(DVector::from_vec(vec![500.0, 500.0]), c).unwrap();
        let mix = FittedLKernel::from_mixture(
            GmmParams::new(vec![0.5, 0.5], vec![near.clone(), far]).unwrap(),
        )
        .unwrap();
        let single = FittedLKernel::from_blocks(JointBlocks::from_joint(&near).unwrap()).unwrap();
        let walk = unit_walk(1);
        // The 0.5 component weight cancels once responsibilities are formed.
        for (xp, xc) in [(0.1, -0.4), (1.0, 0.7), (-2.0, -1.5)] {
            let xp = DVector::from_element(1, xp);
            let xc = DVector::from_element(1, xc);
            let a = mix.log_density(&walk, &xp, &xc);
            let b = single.log_density(&walk, &xp, &xc);
            assert!((a - b).abs() < 1e-10, "{a} vs {b}");
        }
    }

    #[test]
    fn fitted_kernels_integrate_to_one() {
        let (prev, curr) = two_step_pairs(400, 3);
        let walk = unit_walk(1);
        let strategies = [
            LKernelStrategy::ForwardProposal,
            LKernelStrategy::GaussianOpt,
            LKernelStrategy::GmmOpt { components: 2 },
        ];
        for s in strategies {
            let mut rng = ChaCha8Rng::seed_from_u64(7);
            let fit = fit_lkernel(s, &prev, &curr, &mut rng).unwrap();
            for x_curr in [-1.0, 0.5, 2.0] {
                let xc = DVector::from_element(1, x_curr);
                let (lo, hi, n) = (-25.0, 25.0, 10_000);
                let h = (hi - lo) / n as f64;
                let f = |x: f64| {
                    fit.log_density(&walk, &DVector::from_element(1, x), &xc)
                        .exp()
                };
                let mut total = f(lo) + f(hi);
                for i in 1..n {
                    total += if i % 2 == 1 { 4.0 } else { 2.0 } * f(lo + i as f64 * h);
                }
                total *= h / 3.0;
                assert!((total - 1.0).abs() < 1e-6, "{s}: {total}");
            }
        }
    }

    #[test]
    fn mismatched_pair_counts() {
        let (prev, curr) = two_step_pairs(10, 0);
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        assert!(fit_lkernel(LKernelStrategy::GaussianOpt, &prev[..5], &curr, &mut rng).is_err());
    }
}

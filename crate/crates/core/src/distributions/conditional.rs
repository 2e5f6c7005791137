//! Conditioning joint Gaussians (and mixtures of them) over
//! `(x_prev, x_curr)` pairs on the current state.

use nalgebra::{DMatrix, DVector};

use super::{GaussianParams, GmmParams};
use crate::error::{Result, SmcError};
use crate::linalg::{self, SYMMETRY_TOL};
use crate::math::log_sum_exp;

/// Partitioned mean and covariance of a Gaussian over `(x_prev, x_curr)`.
#[derive(Debug, Clone, PartialEq)]
pub struct JointBlocks {
    pub mu_prev: DVector<f64>,
    pub mu_curr: DVector<f64>,
    pub s_pp: DMatrix<f64>,
    pub s_pc: DMatrix<f64>,
    pub s_cp: DMatrix<f64>,
    pub s_cc: DMatrix<f64>,
}

impl JointBlocks {
    /// Builds the blocks with `s_cp = s_pc^T`.
    pub fn new(
        mu_prev: DVector<f64>,
        mu_curr: DVector<f64>,
        s_pp: DMatrix<f64>,
        s_pc: DMatrix<f64>,
        s_cc: DMatrix<f64>,
    ) -> Result<Self> {
        let s_cp = s_pc.transpose();
        let blocks = Self {
            mu_prev,
            mu_curr,
            s_pp,
            s_pc,
            s_cp,
            s_cc,
        };
        blocks.validate()?;
        Ok(blocks)
    }

    /// Splits a `2D`-dimensional Gaussian into its `D`-dimensional blocks.
    pub fn from_joint(joint: &GaussianParams) -> Result<Self> {
        let two_d = joint.dim();
        if !two_d.is_multiple_of(2) {
            return Err(SmcError::DimensionMismatch {
                expected: two_d + 1,
                got: two_d,
            });
        }
        let d = two_d / 2;
        let mean = joint.mean();
        let cov = joint.cov();
        let blocks = Self {
            mu_prev: mean.rows(0, d).into_owned(),
            mu_curr: mean.rows(d, d).into_owned(),
            s_pp: cov.view((0, 0), (d, d)).into_owned(),
            s_pc: cov.view((0, d), (d, d)).into_owned(),
            s_cp: cov.view((d, 0), (d, d)).into_owned(),
            s_cc: cov.view((d, d), (d, d)).into_owned(),
        };
        blocks.validate()?;
        Ok(blocks)
    }

    pub fn dim(&self) -> usize {
        self.mu_prev.len()
    }

    fn validate(&self) -> Result<()> {
        let d = self.dim();
        for (r, c) in [
            self.s_pp.shape(),
            self.s_pc.shape(),
            self.s_cp.shape(),
            self.s_cc.shape(),
        ] {
            if r != d || c != d {
                return Err(SmcError::DimensionMismatch {
                    expected: d,
                    got: r.max(c),
                });
            }
        }
        if self.mu_curr.len() != d {
            return Err(SmcError::DimensionMismatch {
                expected: d,
                got: self.mu_curr.len(),
            });
        }
        let asym = (&self.s_cp - self.s_pc.transpose()).amax();
        if asym > SYMMETRY_TOL {
            return Err(SmcError::AsymmetricCovariance { asymmetry: asym });
        }
        Ok(())
    }

    pub fn joint_mean(&self) -> DVector<f64> {
        let d = self.dim();
        let mut m = DVector::zeros(2 * d);
        m.rows_mut(0, d).copy_from(&self.mu_prev);
        m.rows_mut(d, d).copy_from(&self.mu_curr);
        m
    }

    pub fn joint_cov(&self) -> DMatrix<f64> {
        let d = self.dim();
        let mut c = DMatrix::zeros(2 * d, 2 * d);
        c.view_mut((0, 0), (d, d)).copy_from(&self.s_pp);
        c.view_mut((0, d), (d, d)).copy_from(&self.s_pc);
        c.view_mut((d, 0), (d, d)).copy_from(&self.s_cp);
        c.view_mut((d, d), (d, d)).copy_from(&self.s_cc);
        c
    }

    pub fn to_joint(&self) -> Result<GaussianParams> {
        GaussianParams::new(self.joint_mean(), self.joint_cov())
    }

    pub fn marginal_curr(&self) -> Result<GaussianParams> {
        GaussianParams::new(self.mu_curr.clone(), self.s_cc.clone())
    }
}

/// `N(x_prev; mu_{p|c}(x_curr), Sigma_{p|c})` with the gain and the
/// conditional covariance factorised once.
#[derive(Debug, Clone)]
pub struct GaussianBackwardKernel {
    blocks: JointBlocks,
    /// `S_pc S_cc^{-1}`
    gain: DMatrix<f64>,
    /// Zero-mean Gaussian with the conditional covariance.
    residual: GaussianParams,
}

impl GaussianBackwardKernel {
    pub fn new(blocks: JointBlocks) -> Result<Self> {
        let d = blocks.dim();
        let l = linalg::cholesky_lower(&blocks.s_cc)?;
        // S_cc^{-1} S_cp, then transpose to get S_pc S_cc^{-1}.
        let mut solved = blocks.s_cp.clone();
        l.solve_lower_triangular_mut(&mut solved);
        l.tr_solve_lower_triangular_mut(&mut solved);
        let gain = solved.transpose();
        let mut cov = &blocks.s_pp - &gain * &blocks.s_cp;
        linalg::symmetrize(&mut cov);
        let residual = GaussianParams::new(DVector::zeros(d), cov)?;
        Ok(Self {
            blocks,
            gain,
            residual,
        })
    }

    pub fn blocks(&self) -> &JointBlocks {
        &self.blocks
    }

    pub fn gain(&self) -> &DMatrix<f64> {
        &self.gain
    }

    pub fn conditional_cov(&self) -> &DMatrix<f64> {
        self.residual.cov()
    }

    pub fn conditional_mean(&self, x_curr: &DVector<f64>) -> DVector<f64> {
        assert_eq!(x_curr.len(), self.blocks.dim(), "x_curr dimension mismatch");
        &self.blocks.mu_prev + &self.gain * (x_curr - &self.blocks.mu_curr)
    }

    pub fn condition(&self, x_curr: &DVector<f64>) -> GaussianParams {
        self.residual.recentred(self.conditional_mean(x_curr))
    }

    pub fn log_density(&self, x_prev: &DVector<f64>, x_curr: &DVector<f64>) -> f64 {
        let offset = x_prev - self.conditional_mean(x_curr);
        let mut scratch = DVector::zeros(offset.len());
        self.residual.log_pdf_centered(&offset, &mut scratch)
    }
}

/// Responsibility-weighted mixture of per-component backward kernels.
#[derive(Debug, Clone)]
pub struct MixtureBackwardKernel {
    log_weights: Vec<f64>,
    marginals: Vec<GaussianParams>,
    kernels: Vec<GaussianBackwardKernel>,
}

impl MixtureBackwardKernel {
    pub fn new(joint: &GmmParams) -> Result<Self> {
        let mut marginals = Vec::with_capacity(joint.len());
        let mut kernels = Vec::with_capacity(joint.len());
        for c in joint.components() {
            let blocks = JointBlocks::from_joint(c)?;
            marginals.push(blocks.marginal_curr()?);
            kernels.push(GaussianBackwardKernel::new(blocks)?);
        }
        Ok(Self {
            log_weights: joint.weights().iter().map(|w| w.ln()).collect(),
            marginals,
            kernels,
        })
    }

    pub fn dim(&self) -> usize {
        self.kernels[0].blocks().dim()
    }

    pub fn kernels(&self) -> &[GaussianBackwardKernel] {
        &self.kernels
    }

    /// `ln Pr(m | x_curr)` for every component. Falls back to uniform
    /// responsibilities if every component density underflows.
    pub fn log_responsibilities(&self, x_curr: &DVector<f64>) -> Vec<f64> {
        let mut scratch = DVector::zeros(x_curr.len());
        let mut terms: Vec<f64> = self
            .log_weights
            .iter()
            .zip(&self.marginals)
            .map(|(lw, g)| lw + g.log_pdf_with(x_curr, &mut scratch))
            .collect();
        let norm = log_sum_exp(&terms);
        if !norm.is_finite() {
            log::warn!("all mixture responsibilities underflowed; using uniform responsibilities");
            let uniform = -(terms.len() as f64).ln();
            terms.fill(uniform);
            return terms;
        }
        for t in &mut terms {
            *t -= norm;
        }
        terms
    }

    pub fn condition(&self, x_curr: &DVector<f64>) -> Result<GmmParams> {
        let mut weights: Vec<f64> = self
            .log_responsibilities(x_curr)
            .into_iter()
            .map(f64::exp)
            .collect();
        let total: f64 = weights.iter().sum();
        for w in &mut weights {
            *w /= total;
        }
        let components = self.kernels.iter().map(|k| k.condition(x_curr)).collect();
        GmmParams::new(weights, components)
    }

    pub fn log_density(&self, x_prev: &DVector<f64>, x_curr: &DVector<f64>) -> f64 {
        let terms: Vec<f64> = self
            .log_responsibilities(x_curr)
            .into_iter()
            .zip(&self.kernels)
            .map(|(lr, k)| lr + k.log_density(x_prev, x_curr))
            .collect();
        log_sum_exp(&terms)
    }
}

/// Conditional of `x_prev` given `x_curr` under a joint Gaussian.
pub fn gaussian_conditional(joint: &JointBlocks, x_curr: &DVector<f64>) -> Result<GaussianParams> {
    check_dim(joint.dim(), x_curr)?;
    Ok(GaussianBackwardKernel::new(joint.clone())?.condition(x_curr))
}

/// Conditional of `x_prev` given `x_curr` under a joint Gaussian mixture
/// over `(x_prev, x_curr)`.
pub fn gmm_conditional(joint: &GmmParams, x_curr: &DVector<f64>) -> Result<GmmParams> {
    let kernel = MixtureBackwardKernel::new(joint)?;
    check_dim(kernel.dim(), x_curr)?;
    kernel.condition(x_curr)
}

fn check_dim(expected: usize, x: &DVector<f64>) -> Result<()> {
    if x.len() != expected {
        return Err(SmcError::DimensionMismatch {
            expected,
            got: x.len(),
        });
    }
    Ok(())
}

//! Pointwise inequality `2 psi L psi - L(psi^2) >= 0` for the direct
//! periodic-kernel operator, and its agreement with the spectral operator.

use std::f64::consts::PI;

use anyhow::Result;
use fracdual_core::grid::ScalarField;
use fracdual_core::oracles::KernelOperator;
use fracdual_core::spectral::fractional_laplacian;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::Ctx;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct Params {
    pub alphas: Vec<f64>,
    pub samples: usize,
    /// Periodic copies summed on each side before the tail integral.
    pub images: usize,
    pub tolerance: f64,
    /// Allowed relative `L^2` gap between kernel and spectral operators on
    /// a smooth profile.
    pub oracle_gap: f64,
}

impl Default for Params {
    fn default() -> Self {
        Self {
            alphas: vec![0.5, 1.0, 1.5],
            samples: 10,
            images: 10,
            tolerance: 1e-10,
            oracle_gap: 0.05,
        }
    }
}

pub(crate) fn run(ctx: &mut Ctx) -> Result<()> {
    let p: Params = ctx.params()?;
    let grid = ctx.cfg.grid;
    let mut rng = ChaCha8Rng::seed_from_u64(ctx.cfg.seed);
    let samples: Vec<ScalarField> = (0..p.samples)
        .map(|_| {
            let vals = (0..grid.len())
                .map(|_| rng.random_range(-1.0..1.0))
                .collect();
            ScalarField::new(grid, vals)
        })
        .collect::<Result<_, _>>()?;
    let k = 2.0 * PI / grid.length();
    let smooth = ScalarField::from_fn(grid, |x| {
        let s = (k * x[0]).cos()
            + if grid.dimension() == 2 {
                (k * x[1]).cos()
            } else {
                0.0
            };
        s.exp()
    })?;
    for &alpha in &p.alphas {
        let op = KernelOperator::new(grid, alpha, p.images)?;
        let mut worst = f64::INFINITY;
        for psi in &samples {
            worst = worst.min(op.cordoba_defect(psi)?.min());
        }
        ctx.fit(format!("min_defect_a{alpha}"), worst);
        ctx.check(
            format!("pointwise_a{alpha}"),
            worst + p.tolerance,
            format!("smallest defect {worst:.3e}"),
        );
        let gap = op
            .apply(&smooth)?
            .relative_l2_error(&fractional_laplacian(&smooth, alpha)?)?;
        ctx.fit(format!("oracle_gap_a{alpha}"), gap);
        ctx.check(
            format!("oracle_agreement_a{alpha}"),
            p.oracle_gap - gap,
            format!("relative L2 gap {gap:.3e}"),
        );
    }
    Ok(())
}

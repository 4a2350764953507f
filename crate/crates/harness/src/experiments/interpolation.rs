//! `L^q` bounds for random tight atoms: the bound using unit mass, with
//! constant 1, and the mass-free bound with a calibrated constant.

use anyhow::Result;
use fracdual_core::atoms::{
    atom_membership, build_random_atom, canonical_family_constant, interpolation_check,
    mass_free_constant,
};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::Ctx;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct Params {
    pub samples: usize,
    pub radii: Vec<f64>,
    pub qs: Vec<f64>,
    /// Radii of the canonical atoms used to calibrate the mass-free constant.
    pub calibration_radii: Vec<f64>,
    /// Allowed excess of the recomputed `lambda` over 1.
    pub membership_tolerance: f64,
    /// Relative round-off allowance on both bounds; tight atoms meet the
    /// unit-mass bound with equality at `q = 1`.
    pub round_off: f64,
}

impl Default for Params {
    fn default() -> Self {
        Self {
            samples: 100,
            radii: vec![0.25, 0.125, 0.0625],
            qs: vec![1.0, 2.0],
            calibration_radii: vec![0.5, 0.25, 0.125, 0.0625, 0.03125],
            membership_tolerance: 1e-9,
            round_off: 1e-12,
        }
    }
}

pub(crate) fn run(ctx: &mut Ctx) -> Result<()> {
    let p: Params = ctx.params()?;
    let cfg = ctx.cfg;
    let (grid, params) = (cfg.grid, cfg.atom);
    let d = grid.dimension();
    let mut constants = Vec::with_capacity(p.qs.len());
    for &q in &p.qs {
        let family = canonical_family_constant(&grid, &p.calibration_radii, q, &params)?;
        let explicit = mass_free_constant(d, q, &params);
        ctx.fit(format!("C_family_q{q}"), family);
        ctx.fit(format!("C_explicit_q{q}"), explicit);
        constants.push(family.max(explicit));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let mut worst_lambda = 0.0f64;
    let mut worst_mass = vec![f64::INFINITY; p.qs.len()];
    let mut worst_free = vec![f64::INFINITY; p.qs.len()];
    for k in 0..p.samples {
        let r = p.radii[rng.random_range(0..p.radii.len())];
        let atom = build_random_atom(&grid, r, &params, cfg.seed.wrapping_add(k as u64))?;
        worst_lambda = worst_lambda.max(atom_membership(&atom.field, r, &params)?.lambda);
        for (i, (&q, &c)) in p.qs.iter().zip(&constants).enumerate() {
            let rep = interpolation_check(&atom, q, c)?;
            worst_mass[i] = worst_mass[i].min(1.0 + p.round_off - rep.lq / rep.mass_bound);
            worst_free[i] = worst_free[i].min(1.0 + p.round_off - rep.lq / rep.mass_free_bound);
        }
    }
    ctx.fit("max_lambda", worst_lambda);
    ctx.check(
        "atoms_admissible",
        1.0 + p.membership_tolerance - worst_lambda,
        format!("largest lambda {worst_lambda:.6}"),
    );
    for (i, &q) in p.qs.iter().enumerate() {
        ctx.check(
            format!("mass_bound_q{q}"),
            worst_mass[i],
            format!(
                "smallest relative slack {:.3e} with constant 1",
                worst_mass[i]
            ),
        );
        ctx.check(
            format!("mass_free_bound_q{q}"),
            worst_free[i],
            format!(
                "smallest relative slack {:.3e} with constant {:.4}",
                worst_free[i], constants[i]
            ),
        );
    }
    Ok(())
}

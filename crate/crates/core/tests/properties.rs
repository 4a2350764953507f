//! Algebraic invariants of the transforms, estimators and solver, on random
//! fields.

use fracdual_core::atoms::{atom_membership, build_random_atom, AtomParams};
use fracdual_core::solver::{solve_dual, SolverConfig};
use fracdual_core::spectral::{dealias, diffusion_semigroup, forward, inverse, spectral_inner};
use fracdual_core::velocity::{
    bmo_scalar, build_velocity, divergence, neg_div_norm, sobolev_quotient, VelocityKind,
    VelocityModel,
};
use fracdual_core::{GridSpec, ScalarField};
use proptest::prelude::*;

fn grid_strategy() -> impl Strategy<Value = GridSpec> {
    prop_oneof![
        (3u32..8).prop_map(|k| GridSpec::new(1, 1 << k, 1.0).unwrap()),
        (3u32..6).prop_map(|k| GridSpec::new(2, 1 << k, 2.0).unwrap()),
    ]
}

fn field_strategy() -> impl Strategy<Value = ScalarField> {
    grid_strategy().prop_flat_map(|g| {
        prop::collection::vec(-1.0f64..1.0, g.len())
            .prop_map(move |v| ScalarField::new(g, v).unwrap())
    })
}

fn field_pair() -> impl Strategy<Value = (ScalarField, ScalarField)> {
    grid_strategy().prop_flat_map(|g| {
        let one = move || {
            prop::collection::vec(-1.0f64..1.0, g.len())
                .prop_map(move |v| ScalarField::new(g, v).unwrap())
        };
        (one(), one())
    })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn transform_round_trip(f in field_strategy()) {
        let back = inverse(&forward(&f).unwrap()).unwrap();
        prop_assert!(back.max_abs_diff(&f).unwrap() <= 1e-13);
    }

    #[test]
    fn parseval((f, g) in field_pair()) {
        let quad = f.inner(&g).unwrap();
        let spec = spectral_inner(&forward(&f).unwrap(), &forward(&g).unwrap()).unwrap();
        let scale = f.l2_norm() * g.l2_norm();
        prop_assert!((quad - spec).abs() <= 1e-12 * scale);
    }

    #[test]
    fn semigroup_composes(f in field_strategy(), alpha in 0.2f64..2.0, s in 0.0f64..0.1, t in 0.0f64..0.1) {
        let two = diffusion_semigroup(&diffusion_semigroup(&f, alpha, s).unwrap(), alpha, t).unwrap();
        let one = diffusion_semigroup(&f, alpha, s + t).unwrap();
        prop_assert!(two.max_abs_diff(&one).unwrap() <= 1e-13);
    }

    #[test]
    fn dealias_is_idempotent(f in field_strategy()) {
        let once = dealias(&forward(&f).unwrap());
        let twice = dealias(&once);
        prop_assert_eq!(twice.coefficients(), once.coefficients());
    }

    #[test]
    fn positive_and_negative_parts_decompose(f in field_strategy()) {
        let (p, n) = (f.positive_part(), f.negative_part());
        for ((x, a), b) in f.values().iter().zip(p.values()).zip(n.values()) {
            prop_assert!(*a >= 0.0 && *b >= 0.0);
            prop_assert_eq!(*x, a - b);
            prop_assert_eq!(x.abs(), a + b);
        }
    }

    #[test]
    fn bmo_is_shift_invariant(f in field_strategy(), a in -20isize..20, b in -20isize..20) {
        let shift = if f.grid().dimension() == 2 { [a, b] } else { [a, 0] };
        prop_assert_eq!(bmo_scalar(&f), bmo_scalar(&f.rolled(shift)));
    }

    #[test]
    fn sobolev_quotient_is_scale_free(f in field_strategy(), c in prop_oneof![-10.0f64..-0.1, 0.1f64..10.0]) {
        let f = f.mean_free();
        prop_assume!(f.l2_norm() > 1e-6 && f.grid().dimension() == 2);
        let q = sobolev_quotient(&f, 1.0).unwrap();
        let qc = sobolev_quotient(&f.scaled(c), 1.0).unwrap();
        prop_assert!((q - qc).abs() <= 1e-12 * q);
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(16))]

    #[test]
    fn membership_is_homogeneous(seed in any::<u64>(), c in prop_oneof![-8.0f64..-0.125, 0.125f64..8.0]) {
        let grid = GridSpec::new(1, 256, 4.0).unwrap();
        let params = AtomParams::default();
        let atom = build_random_atom(&grid, 0.25, &params, seed).unwrap();
        let m = atom_membership(&atom.field, 0.25, &params).unwrap();
        let mc = atom_membership(&atom.field.scaled(c), 0.25, &params).unwrap();
        prop_assert!(m.lambda <= 1.0 + 1e-9);
        prop_assert!((mc.lambda - c.abs() * m.lambda).abs() <= 1e-12 * mc.lambda);
    }

    #[test]
    fn negative_divergence_norm_vanishes_exactly_without_compression(
        seed in any::<u64>(),
        kind in prop_oneof![Just(VelocityKind::DivergenceFree), Just(VelocityKind::CompressiveSink), Just(VelocityKind::Composite)],
        strength in prop_oneof![Just(0.0), 0.1f64..2.0],
    ) {
        let grid = GridSpec::new(2, 32, 4.0).unwrap();
        let model = VelocityModel { kind, seed, sink_strength: strength, ..Default::default() };
        let v = build_velocity(&model, &grid).unwrap();
        let nonneg = divergence(&v).unwrap().min() >= -1e-10;
        prop_assert_eq!(neg_div_norm(&v, 1.0).unwrap() == 0.0, nonneg);
    }

    #[test]
    fn dual_flow_conserves_mass_and_positivity(
        seed in any::<u64>(),
        values in prop::collection::vec(0.0f64..1.0, 64),
        alpha in 0.3f64..2.0,
    ) {
        let grid = GridSpec::new(1, 64, 1.0).unwrap();
        let psi0 = ScalarField::new(grid, values).unwrap();
        let model = VelocityModel { kind: VelocityKind::RoughHolder, seed, holder_exponent: 0.6, ..Default::default() };
        let v = build_velocity(&model, &grid).unwrap();
        let cfg = SolverConfig { alpha, horizon: 0.05, ..Default::default() };
        let traj = solve_dual(&psi0, &v, 0.05, &cfg).unwrap();
        let (m0, l0) = (psi0.integral(), psi0.l1_norm());
        for w in traj.diagnostics.windows(2) {
            prop_assert!((w[1].mass - m0).abs() <= 1e-13 * l0);
            prop_assert!(w[1].min >= -1e-12);
            prop_assert!(w[1].l1 <= w[0].l1 + 1e-10);
        }
    }
}

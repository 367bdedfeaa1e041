//! Invariants over generated inputs.

mod common;

use common::{setup, wave};
use djwave::analysis::find_inflection_points;
use djwave::banded::BandedMatrix;
use djwave::fields::Streamline;
use djwave::height::{continue_in_amplitude, start_branch, HeightField, NewtonOptions};
use djwave::verdict::{combine, Location, PropertyVerdict};
use djwave::vorticity::VorticitySpec;
use proptest::prelude::*;

fn spec_strategy() -> impl Strategy<Value = VorticitySpec> {
    prop_oneof![
        Just(VorticitySpec::zero()),
        (-1.0..1.0f64).prop_map(VorticitySpec::constant),
        (-1.0..1.0f64, -0.5..0.5f64).prop_map(|(b, g0)| VorticitySpec::affine(b, g0)),
    ]
}

fn finite_or_not() -> impl Strategy<Value = f64> {
    prop_oneof![
        4 => -1e6..1e6f64,
        1 => Just(f64::INFINITY),
        1 => Just(f64::NEG_INFINITY),
        1 => Just(f64::NAN),
    ]
}

fn location() -> impl Strategy<Value = Location> {
    (0..100usize, 0..100usize, finite_or_not(), finite_or_not()).prop_map(|(i, j, x, y)| Location { i, j, x, y })
}

fn verdict() -> impl Strategy<Value = PropertyVerdict> {
    (finite_or_not(), 0.0..1.0f64, proptest::option::of(location()), 0..1000usize).prop_map(
        |(worst, tol, at, n)| PropertyVerdict::from_violation("p", worst, tol, at, n),
    )
}

/// Bitwise equality that treats NaN as equal to NaN.
fn same(a: f64, b: f64) -> bool {
    a.to_bits() == b.to_bits() || (a.is_nan() && b.is_nan())
}

proptest! {
    #[test]
    fn banded_lu_solves_diagonally_dominant_systems(
        n in 1usize..40,
        kl in 0usize..5,
        ku in 0usize..5,
        seed in proptest::collection::vec(-1.0..1.0f64, 400),
    ) {
        let mut a = BandedMatrix::zeros(n, kl, ku);
        let mut k = 0;
        for r in 0..n {
            for c in r.saturating_sub(kl)..(r + ku + 1).min(n) {
                a.add(r, c, seed[k % seed.len()]);
                k += 1;
            }
            a.add(r, r, (kl + ku + 1) as f64);
        }
        let x: Vec<f64> = (0..n).map(|i| seed[(7 * i + 3) % seed.len()]).collect();
        let b = a.matvec(&x);
        let sol = a.factorize().unwrap().solve(&b);
        for (s, e) in sol.iter().zip(&x) {
            prop_assert!((s - e).abs() < 1e-12, "{s} vs {e}");
        }
    }

    #[test]
    fn from_violation_fails_exactly_above_tolerance(v in verdict()) {
        prop_assert!(v.worst_violation >= 0.0);
        prop_assert_eq!(v.failed(), v.worst_violation > v.tolerance);
        if v.failed() {
            prop_assert!(!v.locations.is_empty());
        }
        prop_assert!(v.margin() >= 0.0);
    }

    #[test]
    fn combine_fails_iff_a_part_fails(parts in proptest::collection::vec(verdict(), 1..8), na in 0usize..3) {
        let mut all = parts.clone();
        all.extend((0..na).map(|_| PropertyVerdict::not_applicable("p", "skipped")));
        let c = combine("all", &all);
        prop_assert_eq!(c.failed(), parts.iter().any(|v| v.failed()));
        prop_assert_eq!(c.samples, parts.iter().map(|v| v.samples).sum::<usize>());
        prop_assert_eq!(c.property.as_str(), "all");
        if c.passed() {
            let worst_ratio = parts
                .iter()
                .map(|v| if v.worst_violation == 0.0 { 0.0 } else { v.worst_violation / v.tolerance })
                .fold(0.0f64, f64::max);
            let ratio = if c.worst_violation == 0.0 { 0.0 } else { c.worst_violation / c.tolerance };
            prop_assert_eq!(ratio, worst_ratio);
        }
    }

    #[test]
    fn verdict_json_round_trips(v in verdict()) {
        let back: PropertyVerdict = serde_json::from_str(&serde_json::to_string(&v).unwrap()).unwrap();
        prop_assert_eq!(back.status, v.status);
        prop_assert!(same(back.worst_violation, v.worst_violation));
        prop_assert!(same(back.tolerance, v.tolerance));
        prop_assert_eq!(back.locations.len(), v.locations.len());
        for (a, b) in back.locations.iter().zip(&v.locations) {
            prop_assert!(a.i == b.i && a.j == b.j && same(a.x, b.x) && same(a.y, b.y));
        }
    }

    #[test]
    fn vorticity_json_round_trips(spec in spec_strategy()) {
        let back: VorticitySpec = serde_json::from_str(&serde_json::to_string(&spec).unwrap()).unwrap();
        prop_assert_eq!(back, spec);
    }

    /// Curvature with prescribed simple roots away from the nodes.
    #[test]
    fn inflection_count_matches_prescribed_roots(
        roots in proptest::collection::btree_set(1usize..30, 0..5),
        flip in any::<bool>(),
    ) {
        let n = 129;
        let dx = std::f64::consts::PI / (n - 1) as f64;
        let x: Vec<f64> = (0..n).map(|k| k as f64 * dx).collect();
        // roots sit at the midpoints of cells spaced by at least 4 cells
        let r: Vec<f64> = roots.iter().map(|&m| (4.0 * m as f64 + 0.5) * dx).collect();
        let sign = if flip { -1.0 } else { 1.0 };
        let y_xx: Vec<f64> = x
            .iter()
            .map(|&x| sign * r.iter().fold(1.0, |p, &c| p * ((x - c) / (2.0 * dx)).clamp(-1.0, 1.0)))
            .collect();
        let sl = Streamline {
            level: 1,
            p: -1.0,
            x: x.clone(),
            y: vec![0.0; n],
            y_x: vec![0.0; n],
            y_xx,
            v: vec![0.0; n],
            dv_dx: vec![0.0; n],
            u_minus_c: vec![-1.0; n],
            du_dx: vec![0.0; n],
            pressure: vec![0.0; n],
            energy: vec![0.0; n],
        };
        let set = find_inflection_points(&sl).unwrap();
        prop_assert_eq!(set.count, r.len());
        for (found, exact) in set.positions.iter().zip(&r) {
            prop_assert!((found - exact).abs() < dx);
        }
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(6))]

    #[test]
    fn solved_fields_pin_amplitude_and_keep_troughs_at_the_ends(
        spec in prop_oneof![
            Just(VorticitySpec::zero()),
            (-0.4..0.4f64).prop_map(VorticitySpec::constant),
            (-0.6..0.6f64).prop_map(|b| VorticitySpec::affine(b, 0.0)),
        ],
        fraction in 0.005..0.04f64,
    ) {
        let s = setup(spec, 33, 17);
        let target = fraction * start_branch(&s).unwrap().depth();
        let trace = continue_in_amplitude(&s, target, 2, &NewtonOptions::default()).unwrap();
        prop_assert!(trace.is_complete(), "{:?}", trace.failure);
        let field = &trace.members.last().unwrap().field;
        prop_assert!((field.surface_amplitude() - target).abs() <= 1e-12);
        let hq = field.h_q();
        for i in 1..field.nq() - 1 {
            for j in 1..field.np() {
                prop_assert!(hq[[i, j]] <= 1e-12, "h_q = {} at ({i}, {j})", hq[[i, j]]);
            }
        }
        prop_assert!(field.check_invariants(1e-9).is_empty());
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(16))]

    #[test]
    fn refinement_keeps_the_coarse_nodes(
        spec in spec_strategy(),
        noise in proptest::collection::vec(-1e-3..1e-3f64, 17 * 9),
    ) {
        let mut field: HeightField = wave(VorticitySpec::zero(), 17, 9, 0.02, 1);
        field.vorticity = spec;
        for ((i, j), h) in field.h.indexed_iter_mut() {
            if j > 0 {
                *h += noise[i * 9 + j];
            }
        }
        let fine = field.refine_cubic();
        prop_assert_eq!((fine.nq(), fine.np()), (33, 17));
        for ((i, j), &h) in field.h.indexed_iter() {
            prop_assert_eq!(fine.h[[2 * i, 2 * j]], h);
        }
        let back = HeightField::from_json(&fine.to_json()).unwrap();
        prop_assert_eq!(back.h, fine.h);
        prop_assert_eq!(back.vorticity, spec);
    }
}

//! The checks themselves: injected defects must be caught and located,
//! reference fields must pass with room to spare.

mod common;

use common::{selftest, wave};
use djwave::analysis::{analyze, check_inflection_counts, find_inflection_points, locate_max_v};
use djwave::fields::{streamlines, velocity_from_height};
use djwave::verdict::Status;
use djwave::vorticity::VorticitySpec;

#[test]
fn sign_flipped_v_is_caught_where_it_was_injected() {
    selftest::sign_flipped_v().unwrap();
}

#[test]
fn double_bump_v_breaks_rise_then_fall_and_the_curvature_law() {
    // the bumps overlap into a single sign change of the curvature
    let sl = selftest::double_bump_streamline();
    assert_eq!(find_inflection_points(&sl).unwrap().count, 1);
    selftest::double_bump_v().unwrap();
}

#[test]
fn manufactured_non_solution_fails_the_lhq_identity() {
    selftest::manufactured_non_solution().unwrap();
}

#[test]
fn linear_oracle_field_passes_every_applicable_check_with_margin() {
    let least = selftest::linear_oracle_margins().unwrap();
    assert!(least >= selftest::ORACLE_MARGIN);
}

#[test]
fn corrupted_height_breaks_the_field_invariants() {
    let mut field = wave(VorticitySpec::zero(), 33, 17, 0.02, 1);
    field.h[[5, 0]] = 1e-3;
    let report = analyze(&field, None).unwrap();
    assert!(report.verdict("field_invariants").unwrap().failed());
    assert!(report.any_failed());
}

#[test]
fn max_v_check_is_gated_by_the_eigenvalue_bound() {
    let field = wave(VorticitySpec::affine(-0.5, 0.0), 65, 33, 0.02, 2);
    let vf = velocity_from_height(&field).unwrap();
    let sls = streamlines(&vf);
    let (sets, _) = check_inflection_counts(&sls);
    let top = sets.last();
    // |gamma'| = 0.5 sits below a bound of 10
    assert_ne!(locate_max_v(&vf, top, 10.0).verdict.status, Status::NotApplicable);
    // and above a bound of 0.4: the check is withheld, not failed
    let gated = locate_max_v(&vf, top, 0.4);
    assert_eq!(gated.verdict.status, Status::NotApplicable);
    assert!(gated.v_max > 0.0);

    // increasing vorticity is never gated
    let field = wave(VorticitySpec::affine(0.5, 0.0), 65, 33, 0.02, 2);
    let vf = velocity_from_height(&field).unwrap();
    let sls = streamlines(&vf);
    let (sets, _) = check_inflection_counts(&sls);
    assert_ne!(locate_max_v(&vf, sets.last(), 0.4).verdict.status, Status::NotApplicable);
}

//! Injected defects and reference fields for the checks themselves.
//!
//! Each case returns `Err` with a reason when the check misbehaves.

use super::{mms, wave, G};
use djwave::analysis::{
    check_curvature_monotonicity_law, check_inflection_counts, check_laplacian_identity, check_lhq_residual,
    check_rise_then_fall, check_u_decreasing_along_streamlines, check_v_positive, displacement_profile,
    find_inflection_points, locate_max_v,
};
use djwave::eigen::rectangle_eigenvalue;
use djwave::fields::{linear_wave_oracle, streamline_at, streamlines, velocity_from_height, Streamline};
use djwave::grid::{Grid, PhysicalParams};
use djwave::height::HeightField;
use djwave::stencil::{row_d1, Parity};
use djwave::verdict::PropertyVerdict;
use djwave::vorticity::VorticitySpec;
use ndarray::Array2;

pub const ORACLE_MARGIN: f64 = 10.0;

pub type Case = Result<(), String>;

fn located_failure(v: &PropertyVerdict) -> Case {
    if !v.failed() || v.worst_violation <= v.tolerance {
        return Err(format!("{} did not fail: {:?}", v.property, v.status));
    }
    match v.locations.first() {
        Some(l) if l.x.is_finite() && l.y.is_finite() => Ok(()),
        other => Err(format!("{} failed without a location: {other:?}", v.property)),
    }
}

pub fn sign_flipped_v() -> Case {
    let field = wave(VorticitySpec::zero(), 65, 33, 0.02, 2);
    let mut vf = velocity_from_height(&field).map_err(|e| e.to_string())?;
    let (i0, j0) = (20, 25);
    vf.v[[i0, j0]] = -vf.v[[i0, j0]];
    let v = check_v_positive(&vf);
    located_failure(&v)?;
    let at = (v.locations[0].i, v.locations[0].j);
    if at != (i0, j0) {
        return Err(format!("violation reported at {at:?}, injected at {:?}", (i0, j0)));
    }
    Ok(())
}

/// Surface streamline of a real wave with `v` replaced by a two-humped profile.
pub fn double_bump_streamline() -> Streamline {
    let field = wave(VorticitySpec::zero(), 65, 33, 0.02, 2);
    let vf = velocity_from_height(&field).expect("solved field");
    let sls = streamlines(&vf);
    let mut sl = sls[sls.len() - 1].clone();
    let vmax = sl.v.iter().cloned().fold(0.0, f64::max);
    sl.v = sl.x.iter().map(|&x| vmax * (x.sin() + 0.8 * (3.0 * x).sin()).max(0.0)).collect();
    sl.dv_dx = row_d1(&sl.v, sl.dx(), Parity::Odd);
    sl
}

pub fn double_bump_v() -> Case {
    let sl = double_bump_streamline();
    let infl = find_inflection_points(&sl).map_err(|e| e.to_string())?;
    let rf = check_rise_then_fall(&sl, &infl);
    located_failure(&rf)?;
    if rf.locations[0].j != sl.level {
        return Err(format!("rise_then_fall located on level {}", rf.locations[0].j));
    }
    located_failure(&check_curvature_monotonicity_law(&sl))
}

/// The manufactured height without its forcing solves nothing.
pub fn manufactured_non_solution() -> Case {
    let (nq, np) = (65, 33);
    let grid = Grid::new(nq, np, mms::P0).map_err(|e| e.to_string())?;
    let field = HeightField {
        grid,
        params: PhysicalParams {
            g: mms::G,
            p0: mms::P0,
            head: mms::HEAD,
            p_atm: 0.0,
            c: 1.0,
            depth: 1.0,
        },
        vorticity: VorticitySpec::zero(),
        h: Array2::from_shape_fn((nq, np), |(i, j)| mms::exact(grid.q(i), grid.p(j))[0]),
    };
    let v = check_lhq_residual(&field);
    located_failure(&v)?;
    let l = v.locations[0];
    if l.i == 0 || l.i + 1 == nq || l.j == 0 || l.j + 1 == np {
        return Err(format!("interior residual located on the boundary at ({}, {})", l.i, l.j));
    }
    Ok(())
}

/// Smallest margin over every check of the linear-theory field; fails below
/// [`ORACLE_MARGIN`].
pub fn linear_oracle_margins() -> Result<f64, String> {
    let (nq, np) = (129, 65);
    let oracle = linear_wave_oracle(G, 1.0, 1e-4);
    let vf = oracle.velocity_field(nq, np).map_err(|e| e.to_string())?;
    let pressure = Array2::zeros((nq, np));
    let sls: Vec<Streamline> = (0..np).map(|j| streamline_at(&vf, j, &pressure)).collect();
    let lambda = rectangle_eigenvalue(1.0 + 1e-4);

    let mut verdicts = vec![check_v_positive(&vf)];
    let (sets, counts) = check_inflection_counts(&sls);
    verdicts.push(counts);
    for (sl, set) in sls.iter().skip(1).zip(&sets) {
        // linear streamlines inflect at x = pi / 2 only
        if set.count != 1 || (set.positions[0] - std::f64::consts::FRAC_PI_2).abs() > 1e-6 {
            return Err(format!("level {}: inflections {:?}", sl.level, set.positions));
        }
        verdicts.push(check_curvature_monotonicity_law(sl));
        verdicts.push(check_rise_then_fall(sl, set));
    }
    verdicts.push(check_u_decreasing_along_streamlines(&vf, &sls));
    verdicts.push(check_laplacian_identity(&vf, lambda));
    verdicts.push(locate_max_v(&vf, sets.last(), lambda).verdict);

    let field = oracle.height_field(nq, np).map_err(|e| e.to_string())?;
    let (profile, disp) = displacement_profile(&field);
    verdicts.push(disp);
    for d in &profile {
        let expect = 2.0 * oracle.displacement(d.p / oracle.c0 - oracle.p0() / oracle.c0 - 1.0);
        if (d.displacement - expect).abs() > 1e-12 {
            return Err(format!("displacement at p = {}: {} vs {expect}", d.p, d.displacement));
        }
    }

    let mut least = f64::INFINITY;
    for v in &verdicts {
        if !v.passed() || v.margin() < ORACLE_MARGIN {
            return Err(format!("{}: {:?} with margin {:.3}", v.property, v.status, v.margin()));
        }
        least = least.min(v.margin());
    }
    Ok(least)
}

//! Quantified checks of the qualitative behaviour of `v` on computed waves.
//!
//! Every check returns a [`PropertyVerdict`]. Sign tests ignore samples
//! inside a noise band scaled by `10 * dx^2` times the largest magnitude on
//! the streamline, which matches the truncation order of the stencils.

use ndarray::Array2;
use serde::{Deserialize, Serialize};

use crate::eigen::{first_dirichlet_eigenvalue, EigenEstimate};
use crate::error::{Result, WaveError};
use crate::fields::{
    bernoulli_head, divergence_residual, euler_residual, pressure_from_bernoulli,
    streamlines, surface_kinematic_residual, velocity_from_height, vorticity_residual, Streamline,
    VelocityField,
};
use crate::grid::{Grid, PhysicalParams};
use crate::height::HeightField;
use crate::stencil::{d_p, d_pp, d_q, d_qq, Parity};
use crate::verdict::{combine, Location, PropertyVerdict, Status, Worst};
use crate::vorticity::{check_eigenvalue_gate, MonotonicityClass, VorticitySpec};

/// Width of the sign-test noise bands, in units of `dx^2` times the row maximum.
pub const BAND_FACTOR: f64 = 10.0;
/// Positivity floor for `v`, relative to `max |v|`.
pub const V_FLOOR_REL: f64 = 1e-8;
/// Tolerance of the Laplacian identity, relative to `max |v| * lambda1`.
pub const LAPLACIAN_REL: f64 = 1e-3;
/// Smallest accepted observed order in refinement studies.
pub const MIN_ORDER: f64 = 1.0;
/// Norms below this are treated as rounding noise in refinement studies.
pub const ROUNDING_FLOOR: f64 = 1e-11;

/// Surface-row residual accepted when re-checking a stored field.
pub const INVARIANT_TOL: f64 = 1e-8;

pub const REPORT_SCHEMA: &str = "djwave.analysis-report.v1";

fn band(dx: f64, max: f64) -> f64 {
    BAND_FACTOR * dx * dx * max
}

fn max_abs(v: &[f64]) -> f64 {
    v.iter().fold(0.0f64, |m, x| m.max(x.abs()))
}

fn grid_loc(vf: &VelocityField, i: usize, j: usize) -> Location {
    Location {
        i,
        j,
        x: vf.x[[i, j]],
        y: vf.y[[i, j]],
    }
}

fn sl_loc(sl: &Streamline, k: usize) -> Location {
    Location {
        i: k,
        j: sl.level,
        x: sl.x[k],
        y: sl.y[k],
    }
}

fn finish(name: &str, w: Worst, tol: f64, samples: usize) -> PropertyVerdict {
    let worst = if w.value == f64::NEG_INFINITY { 0.0 } else { w.value };
    PropertyVerdict::from_violation(name, worst, tol, w.at, samples)
}

/// Physical grid spacing `max(dq, d / (np - 1))`.
pub fn spacing(grid: &Grid, depth: f64) -> f64 {
    grid.dq().max(depth / (grid.np - 1) as f64)
}

fn is_laminar(vf: &VelocityField) -> bool {
    let speed = vf.u_minus_c.iter().fold(0.0f64, |m, v| m.max(v.abs()));
    vf.max_abs_v() <= 1e-14 * speed
}

/// Same test as [`is_laminar`] on extracted streamlines.
fn streamlines_laminar(sls: &[Streamline]) -> bool {
    let fold = |f: fn(&Streamline) -> &Vec<f64>| {
        sls.iter()
            .flat_map(|s| f(s).iter())
            .fold(0.0f64, |m, v| m.max(v.abs()))
    };
    fold(|s| &s.v) <= 1e-14 * fold(|s| &s.u_minus_c)
}

/// `v >= -tol_v` on every sample above the bed, and `v >= tol_v` at least one
/// cell away from the symmetry lines, with `tol_v = 1e-8 max |v|`.
///
/// Strict-region samples report `tol_v` plus their shortfall below the floor,
/// so one tolerance serves both thresholds.
pub fn check_v_positive(vf: &VelocityField) -> PropertyVerdict {
    const NAME: &str = "v_positive";
    if is_laminar(vf) {
        return PropertyVerdict::not_applicable(NAME, "v vanishes identically");
    }
    let tol_v = V_FLOOR_REL * vf.max_abs_v();
    let (nq, np) = (vf.grid.nq, vf.grid.np);
    let mut w = Worst::new();
    let mut n = 0;
    for i in 0..nq {
        for j in 1..np {
            let v = vf.v[[i, j]];
            let strict = i >= 1 && i + 2 <= nq;
            let viol = if strict { 2.0 * tol_v - v } else { -v };
            w.push(viol, grid_loc(vf, i, j));
            n += 1;
        }
    }
    finish(NAME, w, tol_v, n)
}

/// Sign changes of `y_xx` along one streamline.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct InflectionSet {
    pub level: usize,
    pub p: f64,
    pub positions: Vec<f64>,
    pub count: usize,
    /// Curvature band `eps_curv`; samples with `|y_xx| <= eps_curv` carry no sign.
    pub eps_curv: f64,
}

/// Inflection points of a streamline: sign changes of `y_xx` outside the
/// curvature band, each placed at the linear-interpolation root across the
/// gap.
pub fn find_inflection_points(sl: &Streamline) -> Result<InflectionSet> {
    let m = max_abs(&sl.y_xx);
    let eps = band(sl.dx(), m);
    let signed: Vec<usize> = (0..sl.len()).filter(|&k| sl.y_xx[k].abs() > eps).collect();
    if m == 0.0 || signed.is_empty() {
        return Err(WaveError::DegenerateCurve { p: sl.p });
    }
    let mut positions = Vec::new();
    for pair in signed.windows(2) {
        let (a, b) = (pair[0], pair[1]);
        let (ya, yb) = (sl.y_xx[a], sl.y_xx[b]);
        if ya.signum() != yb.signum() {
            positions.push(sl.x[a] + ya * (sl.x[b] - sl.x[a]) / (ya - yb));
        }
    }
    Ok(InflectionSet {
        level: sl.level,
        p: sl.p,
        count: positions.len(),
        positions,
        eps_curv: eps,
    })
}

/// Every streamline above the bed has an odd number of inflection points.
///
/// The worst violation is the number of offending streamlines.
pub fn check_inflection_counts(sls: &[Streamline]) -> (Vec<InflectionSet>, PropertyVerdict) {
    const NAME: &str = "inflection_count_odd";
    if streamlines_laminar(sls) {
        return (Vec::new(), PropertyVerdict::not_applicable(NAME, "laminar flow"));
    }
    let mut sets = Vec::new();
    let mut bad = 0usize;
    let mut first_bad = None;
    let mut degenerate = 0usize;
    for sl in sls.iter().filter(|s| s.level > 0) {
        match find_inflection_points(sl) {
            Ok(set) => {
                if set.count % 2 == 0 {
                    bad += 1;
                    first_bad.get_or_insert(sl_loc(sl, 0));
                }
                sets.push(set);
            }
            Err(_) => {
                degenerate += 1;
                bad += 1;
                first_bad.get_or_insert(sl_loc(sl, 0));
            }
        }
    }
    let above_bed = sls.iter().filter(|s| s.level > 0).count();
    if degenerate == above_bed {
        return (
            sets,
            PropertyVerdict::not_applicable(NAME, "every streamline is flat"),
        );
    }
    let counts: Vec<String> = sets.iter().map(|s| s.count.to_string()).collect();
    let v = PropertyVerdict::from_violation(NAME, bad as f64, 0.0, first_bad, above_bed)
        .with_note(format!("counts bed->surface: {}", counts.join(" ")));
    (sets, v)
}

/// Where `y_xx` has a definite sign, `dv/dx` must have the opposite one.
///
/// Along a streamline `d/dx` at fixed `p` equals `v_x + v_y y_x`; it is taken
/// directly as a fourth-order difference along the row.
pub fn check_curvature_monotonicity_law(sl: &Streamline) -> PropertyVerdict {
    const NAME: &str = "curvature_monotonicity_law";
    let dx = sl.dx();
    let eps_curv = band(dx, max_abs(&sl.y_xx));
    let eps_slope = band(dx, max_abs(&sl.dv_dx));
    if eps_curv == 0.0 || eps_slope == 0.0 {
        return PropertyVerdict::not_applicable(NAME, "flat streamline or v constant");
    }
    let mut w = Worst::new();
    let (mut considered, mut mismatched) = (0usize, 0usize);
    for k in 0..sl.len() {
        let (yxx, dv) = (sl.y_xx[k], sl.dv_dx[k]);
        let mut viol = 0.0;
        if yxx.abs() > eps_curv && dv.abs() > eps_slope {
            considered += 1;
            if yxx.signum() == dv.signum() {
                mismatched += 1;
                viol = dv.abs();
            }
        }
        w.push(viol, sl_loc(sl, k));
    }
    finish(NAME, w, eps_slope, sl.len()).with_note(format!(
        "level {}: {mismatched} of {considered} signed samples mismatch",
        sl.level
    ))
}

/// `v` rises from the crest line to the first inflection and then alternates
/// between falling and rising across successive inflections, ending at zero on
/// the trough line. Steps within one cell of an inflection are exempt.
///
/// Violations are slopes, so the tolerance is the slope band.
pub fn check_rise_then_fall(sl: &Streamline, infl: &InflectionSet) -> PropertyVerdict {
    const NAME: &str = "rise_then_fall";
    if infl.count == 0 {
        return PropertyVerdict::not_applicable(NAME, "no inflection point");
    }
    let dx = sl.dx();
    let tol = band(dx, max_abs(&sl.dv_dx));
    let near = |x: f64| infl.positions.iter().any(|&x0| (x - x0).abs() <= dx * (1.0 + 1e-9));
    let n = sl.len();
    let mut w = Worst::new();
    w.push(sl.v[0].abs() / dx, sl_loc(sl, 0));
    w.push(sl.v[n - 1].abs() / dx, sl_loc(sl, n - 1));
    for k in 0..n - 1 {
        if near(sl.x[k]) || near(sl.x[k + 1]) {
            continue;
        }
        let mid = 0.5 * (sl.x[k] + sl.x[k + 1]);
        let segment = infl.positions.iter().filter(|&&x0| x0 < mid).count();
        let slope = (sl.v[k + 1] - sl.v[k]) / dx;
        let viol = if segment % 2 == 0 { -slope } else { slope };
        w.push(viol, sl_loc(sl, k + 1));
    }
    let v = finish(NAME, w, tol, n);
    if infl.count > 1 {
        v.with_note(format!(
            "level {}: alternating check over {} inflections",
            sl.level, infl.count
        ))
    } else {
        v
    }
}

/// Every streamline above the bed, each against its own inflection set.
pub fn check_rise_then_fall_all(sls: &[Streamline], sets: &[InflectionSet]) -> PropertyVerdict {
    let parts: Vec<PropertyVerdict> = sets
        .iter()
        .map(|s| check_rise_then_fall(&sls[s.level], s))
        .collect();
    if parts.is_empty() {
        return PropertyVerdict::not_applicable("rise_then_fall", "no curved streamline");
    }
    combine("rise_then_fall", &parts)
}

/// `du/dx <= eps_slope` along every streamline, for `gamma' >= 0`, `gamma >= 0`.
pub fn check_u_decreasing_along_streamlines(
    vf: &VelocityField,
    sls: &[Streamline],
) -> PropertyVerdict {
    const NAME: &str = "u_decreasing";
    if !vf.vorticity.nonnegative_and_nondecreasing(vf.params.p0) {
        return PropertyVerdict::not_applicable(NAME, "requires gamma' >= 0 and gamma >= 0");
    }
    if is_laminar(vf) {
        return PropertyVerdict::not_applicable(NAME, "laminar flow");
    }
    let parts: Vec<PropertyVerdict> = sls
        .iter()
        .filter(|sl| max_abs(&sl.du_dx) > 0.0)
        .map(|sl| {
            let tol = band(sl.dx(), max_abs(&sl.du_dx));
            let mut w = Worst::new();
            for k in 1..sl.len() - 1 {
                w.push(sl.du_dx[k], sl_loc(sl, k));
            }
            finish(NAME, w, tol, sl.len() - 2)
        })
        .collect();
    combine(NAME, &parts)
}

/// Vertical displacement of one streamline.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct DisplacementProfile {
    pub level: usize,
    pub p: f64,
    /// Mean height over the half period.
    pub mean_y: f64,
    /// `y(0) - y(pi)`.
    pub displacement: f64,
}

/// `H = y(0) - y(pi)` per streamline; must vanish on the bed, be nonnegative
/// and not increase with depth, for `gamma' >= 0`, `gamma >= 0`.
pub fn displacement_profile(field: &HeightField) -> (Vec<DisplacementProfile>, PropertyVerdict) {
    const NAME: &str = "displacement_monotone";
    let grid = field.grid;
    let (nq, np) = (grid.nq, grid.np);
    let d = field.params.depth;
    let profile: Vec<DisplacementProfile> = (0..np)
        .map(|j| {
            let row: Vec<f64> = (0..nq).map(|i| field.h[[i, j]] - d).collect();
            let inner: f64 = row[1..nq - 1].iter().sum();
            let mean = (inner + 0.5 * (row[0] + row[nq - 1])) / (nq - 1) as f64;
            DisplacementProfile {
                level: j,
                p: grid.p(j),
                mean_y: mean,
                displacement: row[0] - row[nq - 1],
            }
        })
        .collect();
    if !field.vorticity.nonnegative_and_nondecreasing(field.params.p0) {
        return (
            profile,
            PropertyVerdict::not_applicable(NAME, "requires gamma' >= 0 and gamma >= 0"),
        );
    }
    let top = profile[np - 1].displacement;
    if top == 0.0 {
        return (profile, PropertyVerdict::not_applicable(NAME, "flat surface"));
    }
    let tol = band(grid.dq(), top.abs());
    let at = |j: usize| Location {
        i: 0,
        j,
        x: 0.0,
        y: profile[j].mean_y,
    };
    let mut w = Worst::new();
    w.push(profile[0].displacement.abs(), at(0));
    for j in 0..np {
        w.push(-profile[j].displacement, at(j));
        if j + 1 < np {
            w.push(profile[j].displacement - profile[j + 1].displacement, at(j));
        }
    }
    (profile.clone(), finish(NAME, w, tol, np))
}

/// Global maximum of `v` and its distance from the surface inflection.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MaxVLocation {
    pub verdict: PropertyVerdict,
    pub argmax: Location,
    pub v_max: f64,
    /// Surface inflection abscissa, when there is exactly one.
    pub x0: Option<f64>,
    /// Surface samples off the symmetry lines where the one-sided `v_y <= 0`.
    pub surface_vy_nonpositive: usize,
}

/// Whether the vorticity class admits the max-at-inflection statement.
pub fn max_v_admissible(spec: &VorticitySpec, lambda1_lower: f64) -> std::result::Result<(), String> {
    match spec.monotonicity_class() {
        MonotonicityClass::Irrotational | MonotonicityClass::Constant | MonotonicityClass::Increasing => {
            Ok(())
        }
        MonotonicityClass::DecreasingBounded => match check_eigenvalue_gate(spec, lambda1_lower) {
            Status::Pass => Ok(()),
            _ => Err(format!(
                "|gamma'| = {} is not below the eigenvalue bound {lambda1_lower:.6}",
                spec.max_abs_gamma_prime()
            )),
        },
        MonotonicityClass::General => Err("vorticity class not covered".into()),
    }
}

/// The global argmax of `v` must sit on the surface row within one cell of
/// the single surface inflection.
///
/// The violation is the horizontal distance to `x0`, plus `pi` when the
/// maximum is not on the surface.
pub fn locate_max_v(
    vf: &VelocityField,
    surface_infl: Option<&InflectionSet>,
    lambda1_lower: f64,
) -> MaxVLocation {
    const NAME: &str = "max_v_at_surface_inflection";
    let (nq, np) = (vf.grid.nq, vf.grid.np);
    let top = np - 1;
    let mut best = (f64::NEG_INFINITY, 0, 0);
    for i in 0..nq {
        for j in 0..np {
            if vf.v[[i, j]] > best.0 {
                best = (vf.v[[i, j]], i, j);
            }
        }
    }
    let argmax = grid_loc(vf, best.1, best.2);
    let vy = vf.dy(&vf.v);
    let surface_vy_nonpositive = (1..nq - 1).filter(|&i| vy[[i, top]] <= 0.0).count();
    let x0 = surface_infl.filter(|s| s.count == 1).map(|s| s.positions[0]);
    let verdict = if is_laminar(vf) {
        PropertyVerdict::not_applicable(NAME, "laminar flow")
    } else if let Err(why) = max_v_admissible(&vf.vorticity, lambda1_lower) {
        PropertyVerdict::not_applicable(NAME, why)
    } else if let Some(x0) = x0 {
        let off = if best.2 == top { 0.0 } else { std::f64::consts::PI };
        let dist = (argmax.x - x0).abs() + off;
        PropertyVerdict::from_violation(NAME, dist, vf.grid.dq(), Some(argmax), nq * np).with_note(
            format!(
                "argmax at x = {:.6}, level {}; x0 = {x0:.6}; surface v_y <= 0 at {surface_vy_nonpositive} samples",
                argmax.x, argmax.j
            ),
        )
    } else {
        let count = surface_infl.map_or(0, |s| s.count);
        PropertyVerdict::not_applicable(NAME, format!("surface has {count} inflection points"))
    };
    MaxVLocation {
        verdict,
        argmax,
        v_max: best.0,
        x0,
        surface_vy_nonpositive,
    }
}

/// Max-norm of `Laplacian(v) - gamma'(psi) v` at nodes two or more cells from
/// every boundary, with the Laplacian taken in mapped variables.
pub fn laplacian_identity_residual(vf: &VelocityField) -> Result<(f64, Option<Location>)> {
    let grid = &vf.grid;
    let (nq, np) = (grid.nq, grid.np);
    if nq < 5 || np < 5 {
        return Err(WaveError::FluidTooThin(format!(
            "{nq}x{np} grid leaves no nodes two cells inside"
        )));
    }
    let v = &vf.v;
    let vqq = d_qq(v, grid, Parity::Odd);
    let vp = d_p(v, grid);
    let vpp = d_pp(v, grid);
    let vqp = d_q(&vp, grid, Parity::Odd);
    let mut w = Worst::new();
    for i in 2..nq - 2 {
        for j in 2..np - 2 {
            let (hq, hp) = (vf.h_q[[i, j]], vf.h_p[[i, j]]);
            let px = -hq / hp;
            let cpp = (1.0 + hq * hq) / (hp * hp);
            let p = grid.p(j);
            let lap = vqq[[i, j]] + 2.0 * px * vqp[[i, j]] + cpp * vpp[[i, j]]
                - vf.vorticity.gamma(-p) * vp[[i, j]];
            let r = lap - vf.vorticity.gamma_prime(-p) * v[[i, j]];
            w.push(r.abs(), grid_loc(vf, i, j));
        }
    }
    Ok((w.value.max(0.0), w.at))
}

/// Laplacian identity on one field, tolerance `1e-3 max|v| lambda1`.
pub fn check_laplacian_identity(vf: &VelocityField, lambda_scale: f64) -> PropertyVerdict {
    const NAME: &str = "laplacian_identity";
    match laplacian_identity_residual(vf) {
        Ok((r, at)) => {
            let tol = LAPLACIAN_REL * vf.max_abs_v() * lambda_scale;
            let samples = (vf.grid.nq - 4) * (vf.grid.np - 4);
            PropertyVerdict::from_violation(NAME, r, tol, at, samples)
        }
        Err(e) => PropertyVerdict::not_applicable(NAME, e.to_string()),
    }
}

/// Residual of the linear equation satisfied by `h_q`, obtained by
/// differentiating the interior equation in `q`:
///
/// ```text
/// L w = (1 + h_q^2) w_pp - 2 h_p h_q w_qp + h_p^2 w_qq + 2 h_q h_pp w_q
///       - (3 gamma h_p^2 + 2 h_q h_qp) w_p
/// ```
///
/// Returns the interior max-norm, its site, and the largest sum of term
/// magnitudes (the scale of `L w`).
pub fn lhq_residual(field: &HeightField) -> (f64, Option<Location>, f64) {
    let grid = &field.grid;
    let (nq, np) = (grid.nq, grid.np);
    let h = &field.h;
    let hq = d_q(h, grid, Parity::Even);
    let hp = d_p(h, grid);
    let hpp = d_pp(h, grid);
    let hqp = d_q(&hp, grid, Parity::Even);
    let w = &hq;
    let wq = d_q(w, grid, Parity::Odd);
    let wqq = d_qq(w, grid, Parity::Odd);
    let wp = d_p(w, grid);
    let wpp = d_pp(w, grid);
    let wqp = d_q(&wp, grid, Parity::Odd);
    let mut worst = Worst::new();
    let mut scale = 0.0f64;
    let d = field.params.depth;
    for i in 1..nq - 1 {
        for j in 1..np - 1 {
            let gam = field.vorticity.gamma(-grid.p(j));
            let (a, b) = (hq[[i, j]], hp[[i, j]]);
            let terms = [
                (1.0 + a * a) * wpp[[i, j]],
                -2.0 * b * a * wqp[[i, j]],
                b * b * wqq[[i, j]],
                2.0 * a * hpp[[i, j]] * wq[[i, j]],
                -(3.0 * gam * b * b + 2.0 * a * hqp[[i, j]]) * wp[[i, j]],
            ];
            let r: f64 = terms.iter().sum();
            scale = scale.max(terms.iter().map(|t| t.abs()).sum());
            worst.push(
                r.abs(),
                Location {
                    i,
                    j,
                    x: grid.q(i),
                    y: h[[i, j]] - d,
                },
            );
        }
    }
    (worst.value.max(0.0), worst.at, scale)
}

/// `L h_q = 0` on one field, tolerance `10 dx^2` times the term scale.
pub fn check_lhq_residual(field: &HeightField) -> PropertyVerdict {
    let (r, at, scale) = lhq_residual(field);
    let dx = field.grid.dq().max(field.grid.dp());
    let samples = (field.grid.nq - 2) * (field.grid.np - 2);
    PropertyVerdict::from_violation("lhq_residual", r, band(dx, scale), at, samples)
}

/// Streamline identity `v dv/dx = y_xx (u - c)^2 y_x`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct BridgeResidual {
    /// Max of `|v dv/dx - y_xx (u - c)^2 y_x|` over streamlines above the bed.
    pub residual: f64,
    /// Same with the term `v^2 (du/dx) / (u - c)` added to the right side.
    pub corrected: f64,
    /// Max of `|v dv/dx|`.
    pub scale: f64,
    pub at: Option<Location>,
}

pub fn bridge_residual(sls: &[Streamline]) -> BridgeResidual {
    let mut w = Worst::new();
    let mut corrected = 0.0f64;
    let mut scale = 0.0f64;
    for sl in sls.iter().filter(|s| s.level > 0) {
        for k in 0..sl.len() {
            let (v, dv, u) = (sl.v[k], sl.dv_dx[k], sl.u_minus_c[k]);
            let lhs = v * dv;
            let rhs = sl.y_xx[k] * u * u * sl.y_x[k];
            w.push((lhs - rhs).abs(), sl_loc(sl, k));
            corrected = corrected.max((lhs - rhs - v * v * sl.du_dx[k] / u).abs());
            scale = scale.max(lhs.abs());
        }
    }
    BridgeResidual {
        residual: w.value.max(0.0),
        corrected,
        scale,
        at: w.at,
    }
}

pub fn check_bridge_identity(sls: &[Streamline]) -> PropertyVerdict {
    if streamlines_laminar(sls) {
        return PropertyVerdict::not_applicable("bridge_identity", "laminar flow");
    }
    let b = bridge_residual(sls);
    let dx = sls.first().map_or(0.0, |s| s.dx());
    let samples = sls.iter().filter(|s| s.level > 0).map(|s| s.len()).sum();
    PropertyVerdict::from_violation("bridge_identity", b.residual, band(dx, b.scale), b.at, samples)
        .with_note(format!(
            "relative residual {:.3e}; with the du/dx term {:.3e}",
            b.residual / b.scale.max(f64::MIN_POSITIVE),
            b.corrected / b.scale.max(f64::MIN_POSITIVE)
        ))
}

/// Discrete norms of every identity a converged field should satisfy.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct IdentityNorms {
    pub spacing: f64,
    pub bridge: f64,
    pub bridge_corrected: f64,
    pub lhq: f64,
    pub laplacian: f64,
    pub divergence: f64,
    pub vorticity: f64,
    pub bernoulli: f64,
    pub euler: f64,
    pub kinematic: f64,
}

impl IdentityNorms {
    fn entries(&self) -> [(&'static str, f64); 9] {
        [
            ("bridge_identity", self.bridge),
            ("bridge_identity_corrected", self.bridge_corrected),
            ("lhq_residual", self.lhq),
            ("laplacian_identity", self.laplacian),
            ("divergence", self.divergence),
            ("vorticity", self.vorticity),
            ("bernoulli_constancy", self.bernoulli),
            ("euler_residual", self.euler),
            ("surface_kinematic", self.kinematic),
        ]
    }
}

pub fn identity_norms(field: &HeightField) -> Result<IdentityNorms> {
    let vf = velocity_from_height(field)?;
    let sls = streamlines(&vf);
    identity_norms_from(field, &vf, &sls)
}

fn identity_norms_from(
    field: &HeightField,
    vf: &VelocityField,
    sls: &[Streamline],
) -> Result<IdentityNorms> {
    let b = bridge_residual(sls);
    let bernoulli = sls
        .iter()
        .map(|s| bernoulli_head(s).max_deviation)
        .fold(0.0f64, f64::max);
    Ok(IdentityNorms {
        spacing: spacing(&field.grid, field.params.depth),
        bridge: b.residual,
        bridge_corrected: b.corrected,
        lhq: lhq_residual(field).0,
        laplacian: laplacian_identity_residual(vf)?.0,
        divergence: divergence_residual(vf),
        vorticity: vorticity_residual(vf),
        bernoulli,
        euler: euler_residual(vf, &pressure_from_bernoulli(vf)),
        kinematic: surface_kinematic_residual(vf),
    })
}

/// Observed order of every identity norm across one halving of the spacing.
///
/// A norm at rounding level on the fine grid passes regardless of order.
pub fn identity_convergence(coarse: &IdentityNorms, fine: &IdentityNorms) -> Vec<PropertyVerdict> {
    let ratio = coarse.spacing / fine.spacing;
    coarse
        .entries()
        .iter()
        .zip(fine.entries())
        .map(|(&(name, c), (_, f))| {
            let property = format!("converges:{name}");
            if f <= ROUNDING_FLOOR {
                return PropertyVerdict::from_violation(&property, 0.0, 0.0, None, 2)
                    .with_note(format!("at rounding level ({c:.3e} -> {f:.3e})"));
            }
            let order = (c / f).ln() / ratio.ln();
            let order = if order.is_nan() { f64::NEG_INFINITY } else { order };
            PropertyVerdict::from_violation(&property, (MIN_ORDER - order).max(0.0), 0.0, None, 2)
                .with_note(format!("order {order:.3} ({c:.3e} -> {f:.3e})"))
        })
        .collect()
}

/// Single-field consistency of the reconstruction: each residual against
/// `10 dx^2` times a natural scale of the terms involved.
fn consistency_checks(vf: &VelocityField, norms: &IdentityNorms) -> Vec<PropertyVerdict> {
    let dx = norms.spacing;
    let maxabs = |a: &Array2<f64>| a.iter().fold(0.0f64, |m, v| m.max(v.abs()));
    let ux = vf.dx(&vf.u_minus_c, Parity::Even);
    let uy = vf.dy(&vf.u_minus_c);
    let vx = vf.dx(&vf.v, Parity::Odd);
    let vy = vf.dy(&vf.v);
    let gmax = vf
        .vorticity
        .gamma(0.0)
        .abs()
        .max(vf.vorticity.gamma(-vf.params.p0).abs());
    let speed2 = vf.u_minus_c.iter().fold(0.0f64, |m, v| m.max(v * v));
    let g = vf.params.g;
    let items = [
        ("divergence", norms.divergence, maxabs(&ux) + maxabs(&vy)),
        ("vorticity", norms.vorticity, maxabs(&uy) + maxabs(&vx) + gmax),
        ("bernoulli_constancy", norms.bernoulli, speed2 + g * vf.params.depth),
        ("euler_residual", norms.euler, g),
        ("surface_kinematic", norms.kinematic, vf.max_abs_v()),
    ];
    items
        .iter()
        .map(|&(name, r, scale)| PropertyVerdict::from_violation(name, r, band(dx, scale), None, vf.v.len()))
        .collect()
}

/// Identification of the analysed field.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FieldSummary {
    pub grid: Grid,
    pub params: PhysicalParams,
    pub vorticity: VorticitySpec,
    pub class: MonotonicityClass,
    pub amplitude: f64,
    pub residual: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RefinementStudy {
    pub fine_grid: Grid,
    pub coarse: IdentityNorms,
    pub fine: IdentityNorms,
}

/// Every check on one field, serializable as a versioned JSON report.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AnalysisReport {
    pub schema: String,
    pub field: FieldSummary,
    pub verdicts: Vec<PropertyVerdict>,
    pub inflections: Vec<InflectionSet>,
    pub displacement: Vec<DisplacementProfile>,
    pub max_v: MaxVLocation,
    pub eigen: EigenEstimate,
    pub eigen_admissibility: Status,
    pub identities: IdentityNorms,
    pub refinement: Option<RefinementStudy>,
}

impl AnalysisReport {
    pub fn verdict(&self, property: &str) -> Option<&PropertyVerdict> {
        self.verdicts.iter().find(|v| v.property == property)
    }

    pub fn any_failed(&self) -> bool {
        self.verdicts.iter().any(|v| v.failed())
    }

    pub fn surface_inflections(&self) -> Option<&InflectionSet> {
        let top = self.field.grid.np - 1;
        self.inflections.iter().find(|s| s.level == top)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("plain data")
    }

    pub fn from_json(s: &str) -> Result<Self> {
        let r: Self = serde_json::from_str(s)?;
        if r.schema != REPORT_SCHEMA {
            return Err(WaveError::Schema(format!(
                "expected report schema {REPORT_SCHEMA}, found {}",
                r.schema
            )));
        }
        Ok(r)
    }

    /// One line per verdict.
    pub fn text_summary(&self) -> String {
        let f = &self.field;
        let mut s = format!(
            "field {}x{}  vorticity {:?} ({:?})  a = {:.6e}  Q = {:.10}  residual {:.2e}\n",
            f.grid.nq, f.grid.np, f.vorticity.kind, f.class, f.amplitude, f.params.head, f.residual
        );
        s.push_str(&format!(
            "eigenvalue bound {:.6} (estimate {:.6}), admissibility {}\n",
            self.eigen.rectangle_bound,
            self.eigen.estimate,
            self.eigen_admissibility.label()
        ));
        for v in &self.verdicts {
            s.push_str(&format!(
                "{:>4}  {:<40} worst {:>11.4e}  tol {:>11.4e}  n {:>6}",
                v.status.label(),
                v.property,
                v.worst_violation,
                v.tolerance,
                v.samples
            ));
            if let Some(l) = v.locations.first() {
                s.push_str(&format!("  at ({}, {})", l.i, l.j));
            }
            if !v.note.is_empty() {
                s.push_str(&format!("  [{}]", v.note));
            }
            s.push('\n');
        }
        s
    }
}

/// Runs the full battery on `field`. With `refined`, a solution of the same
/// wave on the grid with halved spacings, every identity also gets a
/// convergence verdict.
pub fn analyze(field: &HeightField, refined: Option<&HeightField>) -> Result<AnalysisReport> {
    let vf = velocity_from_height(field)?;
    let sls = streamlines(&vf);
    let eigen = first_dirichlet_eigenvalue(field)?;
    let lambda = eigen.rectangle_bound;
    let eigen_admissibility = check_eigenvalue_gate(&field.vorticity, lambda);

    let mut verdicts = Vec::new();
    let broken = field.check_invariants(INVARIANT_TOL);
    verdicts.push(
        PropertyVerdict::from_violation("field_invariants", broken.len() as f64, 0.0, None, 4)
            .with_note(broken.join("; ")),
    );
    let v_pos = check_v_positive(&vf);
    let v_ok = v_pos.passed();
    verdicts.push(v_pos);

    let (inflections, counts) = check_inflection_counts(&sls);
    verdicts.push(counts);

    let curvature: Vec<PropertyVerdict> = sls
        .iter()
        .filter(|s| s.level > 0)
        .map(check_curvature_monotonicity_law)
        .collect();
    let curvature = if v_ok {
        combine("curvature_monotonicity_law", &curvature)
    } else {
        PropertyVerdict::not_applicable("curvature_monotonicity_law", "v_positive did not pass")
    };
    verdicts.push(curvature);
    verdicts.push(check_rise_then_fall_all(&sls, &inflections));
    verdicts.push(check_u_decreasing_along_streamlines(&vf, &sls));
    let (displacement, disp) = displacement_profile(field);
    verdicts.push(disp);

    let top = field.grid.np - 1;
    let surface = inflections.iter().find(|s| s.level == top);
    let max_v = locate_max_v(&vf, surface, lambda);
    verdicts.push(max_v.verdict.clone());

    verdicts.push(check_laplacian_identity(&vf, lambda));
    verdicts.push(check_lhq_residual(field));
    verdicts.push(check_bridge_identity(&sls));

    let identities = identity_norms_from(field, &vf, &sls)?;
    verdicts.extend(consistency_checks(&vf, &identities));

    let refinement = match refined {
        Some(fine) => {
            let fine_norms = identity_norms(fine)?;
            verdicts.extend(identity_convergence(&identities, &fine_norms));
            Some(RefinementStudy {
                fine_grid: fine.grid,
                coarse: identities,
                fine: fine_norms,
            })
        }
        None => None,
    };

    Ok(AnalysisReport {
        schema: REPORT_SCHEMA.to_string(),
        field: FieldSummary {
            grid: field.grid,
            params: field.params,
            vorticity: field.vorticity,
            class: field.vorticity.monotonicity_class(),
            amplitude: field.surface_amplitude(),
            residual: field.max_residual(),
        },
        verdicts,
        inflections,
        displacement,
        max_v,
        eigen,
        eigen_admissibility,
        identities,
        refinement,
    })
}

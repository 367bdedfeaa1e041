//! Solver and reconstruction against independent references.

mod common;

use std::f64::consts::PI;

use common::{laminar, max_abs, mms, setup, standard_vorticities, unit_p0, wave, G};
use djwave::eigen::{first_dirichlet_eigenvalue, rectangle_eigenvalue};
use djwave::fields::{linear_wave_oracle, velocity_from_height};
use djwave::height::{directional_fd_error, start_branch};
use djwave::laminar::{
    bifurcation_head, continuous_laminar, integrate_rk4, solve_laminar, ContinuousLaminar,
};
use djwave::stencil::observed_order;
use djwave::vorticity::{gamma_integral, VorticitySpec};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn adaptive_simpson(f: &dyn Fn(f64) -> f64, a: f64, b: f64, tol: f64) -> f64 {
    fn simpson(f: &dyn Fn(f64) -> f64, a: f64, b: f64) -> f64 {
        (b - a) / 6.0 * (f(a) + 4.0 * f(0.5 * (a + b)) + f(b))
    }
    fn rec(f: &dyn Fn(f64) -> f64, a: f64, b: f64, whole: f64, tol: f64, depth: u32) -> f64 {
        let m = 0.5 * (a + b);
        let (l, r) = (simpson(f, a, m), simpson(f, m, b));
        if depth == 0 || (l + r - whole).abs() <= 15.0 * tol {
            l + r + (l + r - whole) / 15.0
        } else {
            rec(f, a, m, l, tol / 2.0, depth - 1) + rec(f, m, b, r, tol / 2.0, depth - 1)
        }
    }
    rec(f, a, b, simpson(f, a, b), tol, 40)
}

#[test]
fn gamma_integral_matches_quadrature() {
    let p0 = -2.5;
    for spec in [
        VorticitySpec::zero(),
        VorticitySpec::constant(0.7),
        VorticitySpec::affine(1.3, -0.2),
        VorticitySpec::affine(-2.0, 0.4),
    ] {
        let gi = gamma_integral(&spec, p0, 33).unwrap();
        for k in 0..=10 {
            let p = p0 * k as f64 / 10.0;
            let reference = adaptive_simpson(&|s| spec.gamma(-s), 0.0, p, 1e-14);
            assert!((gi.eval(p) - reference).abs() < 1e-12, "{spec:?} at p = {p}");
            assert_eq!(gi.derivative(p), spec.gamma(-p));
        }
        assert!(gi.gamma_max >= gi.eval(0.0) && gi.gamma_max >= gi.eval(p0));
    }
}

#[test]
fn rk4_reproduces_closed_form_laminar_at_fourth_order() {
    let spec = VorticitySpec::constant(0.4);
    let exact = ContinuousLaminar {
        spec,
        g: G,
        p0: -2.0,
        w0: 0.45,
    };
    let err = |steps| (integrate_rk4(&spec, -2.0, 0.45, 0.0, steps).0 - exact.height(0.0)).abs();
    let (e1, e2) = (err(20), err(40));
    assert!(e2 < 1e-7, "{e2}");
    let order = observed_order(e1, e2);
    assert!((3.7..4.3).contains(&order), "order {order}");
    // slope from the first integral
    let w = integrate_rk4(&spec, -2.0, 0.45, 0.0, 400).1;
    assert!((w - exact.slope(0.0)).abs() < 1e-10);
}

#[test]
fn discrete_laminar_converges_to_the_exact_profile() {
    for spec in [VorticitySpec::zero(), VorticitySpec::constant(0.5), VorticitySpec::affine(-1.0, 0.2)] {
        let p0 = unit_p0();
        let head = 1.05 * bifurcation_head(&spec, G, p0, 65).unwrap().head;
        let exact = continuous_laminar(&spec, G, p0, head).unwrap();
        let errs: Vec<f64> = [17, 33, 65]
            .iter()
            .map(|&np| {
                let lam = solve_laminar(&spec, G, p0, head, np).unwrap();
                (0..np).fold(0.0f64, |m, j| m.max((lam.h[j] - exact.height(lam.p[j])).abs()))
            })
            .collect();
        for w in errs.windows(2) {
            let order = observed_order(w[0], w[1]);
            // zero vorticity is exact on any grid
            assert!(w[1] < 1e-12 || order > 1.8, "{spec:?}: {errs:?}");
        }
    }
}

#[test]
fn dispersion_relation_at_fine_p_resolution() {
    let p0 = unit_p0();
    let bif = bifurcation_head(&VorticitySpec::zero(), G, p0, 257).unwrap();
    let d = bif.laminar.depth;
    let c2 = (p0 / d).powi(2);
    assert!((d - 1.0).abs() < 1e-4, "depth {d}");
    assert!(((bif.head - 2.0 * G * d) / c2 - 1.0).abs() < 1e-12);
    assert!((c2 / (G * 1f64.tanh()) - 1.0).abs() < 1e-4, "c^2 = {c2}");
    // the neutral mode is the sinh profile in the uniform-stream variable
    let c = -p0 / d;
    for (j, &p) in bif.laminar.p.iter().enumerate() {
        let s = (p - p0) / c;
        let phi = s.sinh() / d.sinh();
        assert!((bif.mode[j] - phi).abs() < 2e-4, "p = {p}: {} vs {phi}", bif.mode[j]);
    }
}

#[test]
fn bifurcation_head_is_continuous_in_constant_vorticity() {
    let p0 = unit_p0();
    let q0 = bifurcation_head(&VorticitySpec::zero(), G, p0, 129).unwrap().head;
    let gaps: Vec<f64> = [0.1, 0.01, 0.001]
        .iter()
        .map(|&g0| (bifurcation_head(&VorticitySpec::constant(g0), G, p0, 129).unwrap().head - q0).abs())
        .collect();
    assert!(gaps[0] > gaps[1] && gaps[1] > gaps[2], "{gaps:?}");
    // first-order dependence on gamma0
    assert!((gaps[1] / gaps[2] - 10.0).abs() < 0.5, "{gaps:?}");
    assert!(gaps[2] < 1e-2);
}

#[test]
fn jacobian_matches_central_differences() {
    let mut rng = ChaCha8Rng::seed_from_u64(2024);
    for spec in standard_vorticities() {
        let field = wave(spec, 33, 17, 0.03, 2);
        let n = field.h.len();
        for _ in 0..5 {
            let dir: Vec<f64> = (0..n).map(|_| rng.random_range(-1.0..1.0)).collect();
            let err = directional_fd_error(&field, &dir, 1e-6).unwrap();
            assert!(err < 1e-6, "{spec:?}: {err}");
        }
        assert_eq!(directional_fd_error(&field, &vec![0.0; n], 1e-6).unwrap(), 0.0);
    }
}

#[test]
fn jacobian_is_singular_along_the_mode_at_bifurcation() {
    for spec in standard_vorticities() {
        let branch = start_branch(&setup(spec, 33, 17)).unwrap();
        let base = &branch.base;
        let jac = base.assemble_jacobian().unwrap();
        let (nq, np) = (base.nq(), base.np());
        let along = |k: f64| {
            let dir: Vec<f64> = (0..nq * np)
                .map(|m| branch.bifurcation.mode[m % np] * (k * base.grid.q(m / np)).cos())
                .collect();
            max_abs(&jac.apply(&dir, 0.0))
        };
        let (null, other) = (along(1.0), along(2.0));
        assert!(null < 1e-8 * other, "{spec:?}: {null:e} vs {other:e}");
    }
}

#[test]
fn manufactured_solution_converges_at_second_order() {
    for spec in [VorticitySpec::zero(), VorticitySpec::affine(0.8, -0.3)] {
        let errs: Vec<f64> = [(33, 17), (65, 33), (129, 65)]
            .iter()
            .map(|&(nq, np)| mms::error(&spec, nq, np))
            .collect();
        for w in errs.windows(2) {
            let order = observed_order(w[0], w[1]);
            assert!(order >= 1.9, "{spec:?}: {errs:?} order {order}");
        }
    }
}

#[test]
fn small_wave_matches_linear_theory() {
    let field = wave(VorticitySpec::zero(), 65, 33, 1e-3, 1);
    let vf = velocity_from_height(&field).unwrap();
    let a = field.surface_amplitude();
    let oracle = linear_wave_oracle(G, field.params.depth, a);
    let eta = vf.eta();
    let eta_err = (0..field.nq()).fold(0.0f64, |m, i| m.max((eta[i] - oracle.eta(vf.x[[i, 0]])).abs()));
    assert!(eta_err <= 0.02 * a, "eta error {eta_err:e} for a = {a:e}");
    let v_ref = vf.v.indexed_iter().map(|((i, j), _)| oracle.v(vf.x[[i, j]], vf.y[[i, j]]));
    let v_err = vf.v.iter().zip(v_ref).fold(0.0f64, |m, (v, r)| m.max((v - r).abs()));
    assert!(v_err <= 0.02 * vf.max_abs_v(), "v error {v_err:e} of {:e}", vf.max_abs_v());
}

#[test]
fn eigenvalue_of_the_laminar_strip() {
    let field = laminar(VorticitySpec::zero(), 129, 129);
    let e = first_dirichlet_eigenvalue(&field).unwrap();
    let d = field.params.depth;
    assert_eq!(e.box_height, field.h[[0, 128]]);
    assert_eq!(e.rectangle_bound, 1.0 + PI * PI / (e.box_height * e.box_height));
    assert_eq!(e.rectangle_bound, rectangle_eigenvalue(d));
    assert!((e.estimate / e.rectangle_bound - 1.0).abs() < 1e-4, "{e:?}");
}

#[test]
fn eigenvalue_estimate_respects_the_box_bound_on_waves() {
    for spec in [VorticitySpec::zero(), VorticitySpec::constant(-0.3)] {
        let field = wave(spec, 65, 33, 0.05, 3);
        let e = first_dirichlet_eigenvalue(&field).unwrap();
        let top = field.np() - 1;
        assert_eq!(e.box_height, field.h[[0, top]]);
        // the fluid domain lies inside the box, so its eigenvalue is larger
        assert!(e.estimate > e.rectangle_bound, "{spec:?}: {e:?}");
    }
}

//! Manufactured solution `h* = s (1 + eps cos q s)`, `s = p - p0`, forced so
//! that it solves the continuous problem exactly.

use djwave::grid::{Grid, PhysicalParams};
use djwave::height::{newton_solve, Constraint, Forcing, HeightField, NewtonOptions};
use djwave::vorticity::VorticitySpec;
use ndarray::Array2;

pub const EPS: f64 = 0.01;
pub const P0: f64 = -1.0;
pub const G: f64 = 9.81;
/// Head making the unforced surface row vanish for `h = s`.
pub const HEAD: f64 = 2.0 * G + 1.0;

/// `(h, h_q, h_p, h_qq, h_qp, h_pp)` of the manufactured solution.
pub fn exact(q: f64, p: f64) -> [f64; 6] {
    let s = p - P0;
    let (c, sn) = (q.cos(), q.sin());
    [
        s + EPS * c * s * s,
        -EPS * sn * s * s,
        1.0 + 2.0 * EPS * c * s,
        -EPS * c * s * s,
        -2.0 * EPS * sn * s,
        2.0 * EPS * c,
    ]
}

pub fn forcing(spec: &VorticitySpec, grid: &Grid) -> Forcing {
    let interior = Array2::from_shape_fn((grid.nq, grid.np), |(i, j)| {
        let p = grid.p(j);
        let [_, hq, hp, hqq, hqp, hpp] = exact(grid.q(i), p);
        (1.0 + hq * hq) * hpp - 2.0 * hq * hp * hqp + hp * hp * hqq - spec.gamma(-p) * hp * hp * hp
    });
    let surface = (0..grid.nq)
        .map(|i| {
            let [h, hq, hp, ..] = exact(grid.q(i), 0.0);
            1.0 + hq * hq + (2.0 * G * h - HEAD) * hp * hp
        })
        .collect();
    Forcing { interior, surface }
}

/// Max-norm error of the forced discrete solution on an `nq x np` grid.
pub fn error(spec: &VorticitySpec, nq: usize, np: usize) -> f64 {
    let grid = Grid::new(nq, np, P0).unwrap();
    let params = PhysicalParams {
        g: G,
        p0: P0,
        head: HEAD,
        p_atm: 0.0,
        c: 1.0,
        depth: 1.0,
    };
    // start from the flat profile h = s
    let guess = HeightField {
        grid,
        params,
        vorticity: *spec,
        h: Array2::from_shape_fn((nq, np), |(_, j)| grid.p(j) - P0),
    };
    let f = forcing(spec, &grid);
    let (sol, _) = newton_solve(&guess, Constraint::Head(HEAD), &NewtonOptions::default(), Some(&f)).unwrap();
    let mut err = 0.0f64;
    for i in 0..nq {
        for j in 0..np {
            err = err.max((sol.h[[i, j]] - exact(grid.q(i), grid.p(j))[0]).abs());
        }
    }
    err
}

//! Physical-space reconstruction from a height function.
//!
//! With `x = q` and `psi = -p`:
//!
//! ```text
//! u - c = -1 / h_p      v = -h_q / h_p      y = h - d
//! f_x = f_q - f_p h_q / h_p                f_y = f_p / h_p
//! ```
//!
//! A p-row of the grid is a streamline, and along it `d/dx` is `d/dq` at
//! fixed `p`.

use ndarray::Array2;
use serde::Serialize;

use crate::error::{Result, WaveError};
use crate::grid::{Grid, PhysicalParams};
use crate::height::HeightField;
use crate::stencil::{d_p, d_q, row_d1, row_d2, Parity};
use crate::vorticity::VorticitySpec;

/// Velocities and coordinates on the computational grid.
#[derive(Clone, Debug)]
pub struct VelocityField {
    pub grid: Grid,
    pub params: PhysicalParams,
    pub vorticity: VorticitySpec,
    pub x: Array2<f64>,
    pub y: Array2<f64>,
    pub u_minus_c: Array2<f64>,
    pub v: Array2<f64>,
    pub psi: Array2<f64>,
    pub h_q: Array2<f64>,
    pub h_p: Array2<f64>,
}

/// Central `h_q`, second-order `h_p` (one-sided on the bed and surface rows).
pub fn velocity_from_height(field: &HeightField) -> Result<VelocityField> {
    let h_p = field.h_p();
    let eps = field.eps_flow();
    if let Some(((i, j), &hp)) = h_p.indexed_iter().find(|(_, &v)| !(v > eps)) {
        return Err(WaveError::StagnationProximity { i, j, hp, eps });
    }
    let h_q = field.h_q();
    Ok(assemble(field, h_q, h_p))
}

fn assemble(field: &HeightField, h_q: Array2<f64>, h_p: Array2<f64>) -> VelocityField {
    let grid = field.grid;
    let d = field.params.depth;
    VelocityField {
        grid,
        params: field.params,
        vorticity: field.vorticity,
        x: Array2::from_shape_fn(field.h.dim(), |(i, _)| grid.q(i)),
        y: field.h.mapv(|h| h - d),
        u_minus_c: h_p.mapv(|hp| -1.0 / hp),
        v: ndarray::Zip::from(&h_q).and(&h_p).map_collect(|a, b| -a / b),
        psi: Array2::from_shape_fn(field.h.dim(), |(_, j)| -grid.p(j)),
        h_q,
        h_p,
    }
}

impl VelocityField {
    /// `f_x` by the chain rule.
    pub fn dx(&self, f: &Array2<f64>, parity: Parity) -> Array2<f64> {
        let fq = d_q(f, &self.grid, parity);
        let fp = d_p(f, &self.grid);
        ndarray::Zip::from(&fq)
            .and(&fp)
            .and(&self.h_q)
            .and(&self.h_p)
            .map_collect(|fq, fp, hq, hp| fq - fp * hq / hp)
    }

    /// `f_y` by the chain rule.
    pub fn dy(&self, f: &Array2<f64>) -> Array2<f64> {
        let fp = d_p(f, &self.grid);
        ndarray::Zip::from(&fp).and(&self.h_p).map_collect(|a, b| a / b)
    }

    pub fn max_abs_v(&self) -> f64 {
        self.v.iter().fold(0.0f64, |m, v| m.max(v.abs()))
    }

    /// Surface elevation `eta(x_i)`.
    pub fn eta(&self) -> Vec<f64> {
        let top = self.grid.np - 1;
        (0..self.grid.nq).map(|i| self.y[[i, top]]).collect()
    }

    /// CSV with columns `q,p,x,y,u_minus_c,v,P,psi`, one row per node.
    pub fn to_csv(&self, pressure: &Array2<f64>) -> String {
        let mut s = String::from("q,p,x,y,u_minus_c,v,P,psi\n");
        for i in 0..self.grid.nq {
            for j in 0..self.grid.np {
                s.push_str(&format!(
                    "{},{},{},{},{},{},{},{}\n",
                    self.grid.q(i),
                    self.grid.p(j),
                    self.x[[i, j]],
                    self.y[[i, j]],
                    self.u_minus_c[[i, j]],
                    self.v[[i, j]],
                    pressure[[i, j]],
                    self.psi[[i, j]]
                ));
            }
        }
        s
    }

    fn gamma_integral(&self, p: f64) -> f64 {
        let s = &self.vorticity;
        -0.5 * s.beta * p * p + s.gamma0 * p
    }

    /// Bernoulli constant fixed by the surface condition.
    pub fn bernoulli_constant(&self) -> f64 {
        let pr = &self.params;
        pr.p_atm + 0.5 * pr.head - pr.g * pr.depth
    }
}

/// Pressure from the Bernoulli relation with `P = P_atm` on the surface row.
pub fn pressure_from_bernoulli(vf: &VelocityField) -> Array2<f64> {
    let e = vf.bernoulli_constant();
    let g = vf.params.g;
    let top = vf.grid.np - 1;
    Array2::from_shape_fn(vf.v.dim(), |(i, j)| {
        if j == top {
            return vf.params.p_atm;
        }
        let w = vf.u_minus_c[[i, j]];
        let v = vf.v[[i, j]];
        e - 0.5 * (w * w + v * v) - g * vf.y[[i, j]] - vf.gamma_integral(vf.grid.p(j))
    })
}

/// Pressure from the vertical momentum balance, integrated down each
/// `x = const` column from `P = P_atm` at the surface (trapezoid rule in p).
pub fn pressure_by_integration(vf: &VelocityField) -> Array2<f64> {
    let g = vf.params.g;
    let vx = vf.dx(&vf.v, Parity::Odd);
    let vy = vf.dy(&vf.v);
    // dP/dp = P_y * h_p
    let rate = ndarray::Zip::from(&vx)
        .and(&vy)
        .and(&vf.u_minus_c)
        .and(&vf.v)
        .and(&vf.h_p)
        .map_collect(|vx, vy, w, v, hp| (-g - w * vx - v * vy) * hp);
    let dp = vf.grid.dp();
    let top = vf.grid.np - 1;
    let mut p = Array2::zeros(vf.v.dim());
    for i in 0..vf.grid.nq {
        p[[i, top]] = vf.params.p_atm;
        for j in (0..top).rev() {
            p[[i, j]] = p[[i, j + 1]] - 0.5 * dp * (rate[[i, j]] + rate[[i, j + 1]]);
        }
    }
    p
}

/// Max-norm of the horizontal and vertical momentum residuals on interior rows.
///
/// Rows next to the bed and surface are skipped: a central y-difference
/// across a one-sided `h_p` loses one order there.
pub fn euler_residual(vf: &VelocityField, pressure: &Array2<f64>) -> f64 {
    let g = vf.params.g;
    let ux = vf.dx(&vf.u_minus_c, Parity::Even);
    let uy = vf.dy(&vf.u_minus_c);
    let vx = vf.dx(&vf.v, Parity::Odd);
    let vy = vf.dy(&vf.v);
    let px = vf.dx(pressure, Parity::Even);
    let py = vf.dy(pressure);
    let mut worst = 0.0f64;
    for ((i, j), w) in vf.u_minus_c.indexed_iter() {
        if j < 2 || j + 2 >= vf.grid.np {
            continue;
        }
        let v = vf.v[[i, j]];
        let rx = w * ux[[i, j]] + v * uy[[i, j]] + px[[i, j]];
        let ry = w * vx[[i, j]] + v * vy[[i, j]] + py[[i, j]] + g;
        worst = worst.max(rx.abs()).max(ry.abs());
    }
    worst
}

/// Max-norm of `u_x + v_y` on rows at least two cells from bed and surface.
pub fn divergence_residual(vf: &VelocityField) -> f64 {
    let ux = vf.dx(&vf.u_minus_c, Parity::Even);
    let vy = vf.dy(&vf.v);
    interior_max(vf, |i, j| ux[[i, j]] + vy[[i, j]])
}

/// Max-norm of `u_y - v_x - gamma(psi)` on rows at least two cells from bed and surface.
pub fn vorticity_residual(vf: &VelocityField) -> f64 {
    let uy = vf.dy(&vf.u_minus_c);
    let vx = vf.dx(&vf.v, Parity::Odd);
    interior_max(vf, |i, j| {
        uy[[i, j]] - vx[[i, j]] - vf.vorticity.gamma(vf.psi[[i, j]])
    })
}

/// Max-norm of `v - (u - c) eta_x` on the surface row.
pub fn surface_kinematic_residual(vf: &VelocityField) -> f64 {
    let top = vf.grid.np - 1;
    let eta: Vec<f64> = vf.eta();
    let eta_x = crate::stencil::row_d1(&eta, vf.grid.dq(), Parity::Even);
    (0..vf.grid.nq).fold(0.0f64, |m, i| {
        m.max((vf.v[[i, top]] - vf.u_minus_c[[i, top]] * eta_x[i]).abs())
    })
}

fn interior_max(vf: &VelocityField, f: impl Fn(usize, usize) -> f64) -> f64 {
    let mut worst = 0.0f64;
    for i in 0..vf.grid.nq {
        for j in 2..vf.grid.np - 2 {
            worst = worst.max(f(i, j).abs());
        }
    }
    worst
}

/// One p-row of the grid in physical variables.
#[derive(Clone, Debug, Serialize)]
pub struct Streamline {
    pub level: usize,
    pub p: f64,
    pub x: Vec<f64>,
    pub y: Vec<f64>,
    pub y_x: Vec<f64>,
    pub y_xx: Vec<f64>,
    pub v: Vec<f64>,
    pub dv_dx: Vec<f64>,
    pub u_minus_c: Vec<f64>,
    pub du_dx: Vec<f64>,
    /// Pressure from vertical integration of the momentum balance.
    pub pressure: Vec<f64>,
    /// Bernoulli head per sample.
    pub energy: Vec<f64>,
}

impl Streamline {
    pub fn len(&self) -> usize {
        self.x.len()
    }

    pub fn is_empty(&self) -> bool {
        self.x.is_empty()
    }

    pub fn dx(&self) -> f64 {
        self.x[1] - self.x[0]
    }

    /// CSV with columns `x,y,y_x,y_xx,v,E`.
    pub fn to_csv(&self) -> String {
        let mut s = String::from("x,y,y_x,y_xx,v,E\n");
        for k in 0..self.len() {
            s.push_str(&format!(
                "{},{},{},{},{},{}\n",
                self.x[k], self.y[k], self.y_x[k], self.y_xx[k], self.v[k], self.energy[k]
            ));
        }
        s
    }
}

/// Streamline on grid row `j`; along it `d/dx` is a fourth-order q-difference.
pub fn streamline_at(vf: &VelocityField, j: usize, pressure: &Array2<f64>) -> Streamline {
    let n = vf.grid.nq;
    let dx = vf.grid.dq();
    let col = |a: &Array2<f64>| (0..n).map(|i| a[[i, j]]).collect::<Vec<f64>>();
    let x = col(&vf.x);
    let y = col(&vf.y);
    let v = col(&vf.v);
    let u = col(&vf.u_minus_c);
    let pr = col(pressure);
    let g = vf.params.g;
    let p = vf.grid.p(j);
    let gam = vf.gamma_integral(p);
    let energy = (0..n)
        .map(|k| 0.5 * (u[k] * u[k] + v[k] * v[k]) + g * y[k] + pr[k] + gam)
        .collect();
    Streamline {
        level: j,
        p,
        y_x: row_d1(&y, dx, Parity::Even),
        y_xx: row_d2(&y, dx, Parity::Even),
        dv_dx: row_d1(&v, dx, Parity::Odd),
        du_dx: row_d1(&u, dx, Parity::Even),
        x,
        y,
        v,
        u_minus_c: u,
        pressure: pr,
        energy,
    }
}

/// Every p-row, bed first.
pub fn streamlines(vf: &VelocityField) -> Vec<Streamline> {
    let pressure = pressure_by_integration(vf);
    (0..vf.grid.np)
        .map(|j| streamline_at(vf, j, &pressure))
        .collect()
}

/// Streamline at the grid level nearest to `p_level`.
pub fn extract_streamline(field: &HeightField, p_level: f64) -> Result<Streamline> {
    let j = field.grid.nearest_level(p_level)?;
    let vf = velocity_from_height(field)?;
    Ok(streamline_at(&vf, j, &pressure_by_integration(&vf)))
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct BernoulliHead {
    pub mean: f64,
    pub max_deviation: f64,
}

/// Mean Bernoulli head along a streamline and its largest deviation from the mean.
pub fn bernoulli_head(sl: &Streamline) -> BernoulliHead {
    let mean = sl.energy.iter().sum::<f64>() / sl.len() as f64;
    let max_deviation = sl
        .energy
        .iter()
        .fold(0.0f64, |m, e| m.max((e - mean).abs()));
    BernoulliHead {
        mean,
        max_deviation,
    }
}

/// First-order irrotational wave over a flat bed: `eta = a cos x`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct LinearWave {
    pub g: f64,
    pub depth: f64,
    pub amplitude: f64,
    /// Linear phase speed, `c0^2 = g tanh(d)`.
    pub c0: f64,
}

pub fn linear_wave_oracle(g: f64, depth: f64, amplitude: f64) -> LinearWave {
    LinearWave {
        g,
        depth,
        amplitude,
        c0: (g * depth.tanh()).sqrt(),
    }
}

impl LinearWave {
    pub fn eta(&self, x: f64) -> f64 {
        self.amplitude * x.cos()
    }

    pub fn v(&self, x: f64, y: f64) -> f64 {
        self.amplitude * self.c0 * (y + self.depth).sinh() / self.depth.sinh() * x.sin()
    }

    pub fn u_minus_c(&self, x: f64, y: f64) -> f64 {
        -self.c0 + self.amplitude * self.c0 * (y + self.depth).cosh() / self.depth.sinh() * x.cos()
    }

    /// `Q = c0^2 + 2 g d`.
    pub fn head(&self) -> f64 {
        self.c0 * self.c0 + 2.0 * self.g * self.depth
    }

    /// Relative mass flux of the underlying uniform stream.
    pub fn p0(&self) -> f64 {
        -self.c0 * self.depth
    }

    /// Streamline displacement amplitude at mean level `y0`.
    pub fn displacement(&self, y0: f64) -> f64 {
        self.amplitude * (y0 + self.depth).sinh() / self.depth.sinh()
    }

    /// First-order height function `h(q, p)`.
    pub fn height(&self, q: f64, p: f64) -> f64 {
        let s = (p - self.p0()) / self.c0;
        s + self.amplitude * s.sinh() / self.depth.sinh() * q.cos()
    }

    fn height_derivs(&self, q: f64, p: f64) -> (f64, f64) {
        let s = (p - self.p0()) / self.c0;
        let k = self.amplitude / self.depth.sinh();
        let hq = -k * s.sinh() * q.sin();
        let hp = (1.0 + k * s.cosh() * q.cos()) / self.c0;
        (hq, hp)
    }

    pub fn height_field(&self, nq: usize, np: usize) -> Result<HeightField> {
        let grid = Grid::new(nq, np, self.p0())?;
        let params = PhysicalParams {
            g: self.g,
            p0: self.p0(),
            head: self.head(),
            p_atm: 0.0,
            c: self.c0,
            depth: self.depth,
        };
        let h = Array2::from_shape_fn((nq, np), |(i, j)| {
            if j == 0 {
                0.0
            } else {
                self.height(grid.q(i), grid.p(j))
            }
        });
        Ok(HeightField {
            grid,
            params,
            vorticity: VorticitySpec::zero(),
            h,
        })
    }

    /// Velocity field with closed-form `u - c`, `v` and `h` derivatives at the
    /// nodes of the oracle height field.
    pub fn velocity_field(&self, nq: usize, np: usize) -> Result<VelocityField> {
        let field = self.height_field(nq, np)?;
        let grid = field.grid;
        let mut vf = assemble(
            &field,
            Array2::zeros((nq, np)),
            Array2::zeros((nq, np)),
        );
        for i in 0..nq {
            for j in 0..np {
                let (q, p) = (grid.q(i), grid.p(j));
                let (hq, hp) = self.height_derivs(q, p);
                let y = vf.y[[i, j]];
                vf.h_q[[i, j]] = hq;
                vf.h_p[[i, j]] = hp;
                vf.v[[i, j]] = self.v(q, y);
                vf.u_minus_c[[i, j]] = self.u_minus_c(q, y);
            }
        }
        // exact zeros on the symmetry lines
        for j in 0..np {
            vf.v[[0, j]] = 0.0;
            vf.v[[nq - 1, j]] = 0.0;
        }
        Ok(vf)
    }
}

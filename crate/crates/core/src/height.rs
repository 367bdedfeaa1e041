//! Finite-difference height-function solver.
//!
//! Unknown: `h(q, p)` on the rectangle `[0, pi] x [p0, 0]`. Equations:
//!
//! * interior: `(1 + h_q^2) h_pp - 2 h_q h_p h_qp + h_p^2 h_qq - gamma(-p) h_p^3 = 0`
//! * surface `p = 0`: `1 + h_q^2 + (2 g h - Q) h_p^2 = 0`
//! * bed `p = p0`: `h = 0`
//!
//! Second-order central differences throughout. The lateral lines `q = 0, pi`
//! carry the interior equation with ghost nodes mirrored (`h` even in `q`),
//! which imposes `h_q = 0` there. The surface row uses the one-sided
//! second-order `h_p`.
//!
//! Newton's method on the full grid, factored with a banded LU. In amplitude
//! mode the head `Q` is released and the half crest-to-trough height is pinned,
//! which is solved by block elimination on the bordered system.

use ndarray::Array2;
use serde::{Deserialize, Serialize};

use crate::banded::{BandedLu, BandedMatrix};
use crate::error::{Result, WaveError};
use crate::grid::{Grid, PhysicalParams};
use crate::laminar::{bifurcation_head_with_kappa, discrete_kappa, Bifurcation, LaminarProfile};
use crate::vorticity::VorticitySpec;

/// Discrete height function with everything needed to re-assemble its equations.
#[derive(Clone, Debug, PartialEq)]
pub struct HeightField {
    pub grid: Grid,
    pub params: PhysicalParams,
    pub vorticity: VorticitySpec,
    /// Shape `(nq, np)`; `h[[i, 0]]` is the bed, `h[[i, np - 1]]` the surface.
    pub h: Array2<f64>,
}

/// Extra source terms subtracted from the residual (manufactured solutions).
#[derive(Clone, Debug, PartialEq)]
pub struct Forcing {
    pub interior: Array2<f64>,
    pub surface: Vec<f64>,
}

#[derive(Clone, Copy, Debug, PartialEq)]
struct Derivs {
    hq: f64,
    hp: f64,
    hqq: f64,
    hpp: f64,
    hqp: f64,
}

impl HeightField {
    /// Broadcasts a laminar profile to every q-column.
    pub fn from_laminar(
        grid: Grid,
        params: PhysicalParams,
        vorticity: VorticitySpec,
        lam: &LaminarProfile,
    ) -> Result<Self> {
        if lam.np() != grid.np {
            return Err(WaveError::Precondition(format!(
                "laminar profile has {} levels, grid has {}",
                lam.np(),
                grid.np
            )));
        }
        let h = Array2::from_shape_fn((grid.nq, grid.np), |(_, j)| lam.h[j]);
        Ok(Self {
            grid,
            params,
            vorticity,
            h,
        })
    }

    pub fn nq(&self) -> usize {
        self.grid.nq
    }

    pub fn np(&self) -> usize {
        self.grid.np
    }

    /// Stagnation guard on `h_p`.
    pub fn eps_flow(&self) -> f64 {
        1e-6 * self.params.depth / self.params.flux()
    }

    /// Half crest-to-trough height of the surface.
    pub fn surface_amplitude(&self) -> f64 {
        let top = self.np() - 1;
        0.5 * (self.h[[0, top]] - self.h[[self.nq() - 1, top]])
    }

    #[inline]
    fn derivs(&self, i: usize, j: usize) -> Derivs {
        let g = &self.grid;
        let (dq, dp) = (g.dq(), g.dp());
        let im = g.mirror(i as isize - 1);
        let ip = g.mirror(i as isize + 1);
        let h = &self.h;
        Derivs {
            hq: (h[[ip, j]] - h[[im, j]]) / (2.0 * dq),
            hp: (h[[i, j + 1]] - h[[i, j - 1]]) / (2.0 * dp),
            hqq: (h[[ip, j]] - 2.0 * h[[i, j]] + h[[im, j]]) / (dq * dq),
            hpp: (h[[i, j + 1]] - 2.0 * h[[i, j]] + h[[i, j - 1]]) / (dp * dp),
            hqp: (h[[ip, j + 1]] - h[[ip, j - 1]] - h[[im, j + 1]] + h[[im, j - 1]])
                / (4.0 * dq * dp),
        }
    }

    #[inline]
    fn surface_derivs(&self, i: usize) -> (f64, f64) {
        let g = &self.grid;
        let n = g.np - 1;
        let im = g.mirror(i as isize - 1);
        let ip = g.mirror(i as isize + 1);
        let h = &self.h;
        let hq = (h[[ip, n]] - h[[im, n]]) / (2.0 * g.dq());
        let hp = (3.0 * h[[i, n]] - 4.0 * h[[i, n - 1]] + h[[i, n - 2]]) / (2.0 * g.dp());
        (hq, hp)
    }

    /// Discrete `h_p` at every node (one-sided second order at bed and surface).
    pub fn h_p(&self) -> Array2<f64> {
        let (nq, np) = (self.nq(), self.np());
        let dp = self.grid.dp();
        let h = &self.h;
        Array2::from_shape_fn((nq, np), |(i, j)| {
            if j == 0 {
                (-3.0 * h[[i, 0]] + 4.0 * h[[i, 1]] - h[[i, 2]]) / (2.0 * dp)
            } else if j == np - 1 {
                (3.0 * h[[i, j]] - 4.0 * h[[i, j - 1]] + h[[i, j - 2]]) / (2.0 * dp)
            } else {
                (h[[i, j + 1]] - h[[i, j - 1]]) / (2.0 * dp)
            }
        })
    }

    /// Discrete central `h_q` at every node (zero on the lateral lines).
    pub fn h_q(&self) -> Array2<f64> {
        let g = &self.grid;
        let dq = g.dq();
        Array2::from_shape_fn((g.nq, g.np), |(i, j)| {
            let im = g.mirror(i as isize - 1);
            let ip = g.mirror(i as isize + 1);
            (self.h[[ip, j]] - self.h[[im, j]]) / (2.0 * dq)
        })
    }

    fn stagnation_check(&self) -> Result<()> {
        let eps = self.eps_flow();
        let hp = self.h_p();
        for ((i, j), &v) in hp.indexed_iter() {
            if !(v > eps) {
                return Err(WaveError::StagnationProximity { i, j, hp: v, eps });
            }
        }
        Ok(())
    }

    /// Residual without the stagnation guard.
    pub fn residual_raw(&self, forcing: Option<&Forcing>) -> Array2<f64> {
        let (nq, np) = (self.nq(), self.np());
        let g = self.params.g;
        let q_head = self.params.head;
        let mut r = Array2::zeros((nq, np));
        for i in 0..nq {
            r[[i, 0]] = self.h[[i, 0]];
            for j in 1..np - 1 {
                let d = self.derivs(i, j);
                let gam = self.vorticity.gamma(-self.grid.p(j));
                let mut v = (1.0 + d.hq * d.hq) * d.hpp - 2.0 * d.hq * d.hp * d.hqp
                    + d.hp * d.hp * d.hqq
                    - gam * d.hp * d.hp * d.hp;
                if let Some(f) = forcing {
                    v -= f.interior[[i, j]];
                }
                r[[i, j]] = v;
            }
            let (hq, hp) = self.surface_derivs(i);
            let mut v = 1.0 + hq * hq + (2.0 * g * self.h[[i, np - 1]] - q_head) * hp * hp;
            if let Some(f) = forcing {
                v -= f.surface[i];
            }
            r[[i, np - 1]] = v;
        }
        r
    }

    /// Residual of the discrete equations; same shape as the grid.
    pub fn assemble_residual(&self) -> Result<Array2<f64>> {
        self.stagnation_check()?;
        Ok(self.residual_raw(None))
    }

    pub fn assemble_residual_forced(&self, forcing: &Forcing) -> Result<Array2<f64>> {
        self.stagnation_check()?;
        Ok(self.residual_raw(Some(forcing)))
    }

    /// Max-norm of the unforced residual.
    pub fn max_residual(&self) -> f64 {
        max_abs(self.residual_raw(None).iter())
    }

    /// Analytic Jacobian of the residual with respect to `h` and `Q`.
    pub fn assemble_jacobian(&self) -> Result<Jacobian> {
        self.stagnation_check()?;
        Ok(self.jacobian_raw())
    }

    fn jacobian_raw(&self) -> Jacobian {
        let grid = self.grid;
        let (nq, np) = (grid.nq, grid.np);
        let (dq, dp) = (grid.dq(), grid.dp());
        let band = np + 1;
        let mut m = BandedMatrix::zeros(grid.len(), band, band);
        let mut d_head = vec![0.0; grid.len()];
        let g = self.params.g;
        for i in 0..nq {
            let im = grid.mirror(i as isize - 1);
            let ip = grid.mirror(i as isize + 1);
            let row0 = grid.index(i, 0);
            m.add(row0, row0, 1.0);
            for j in 1..np - 1 {
                let row = grid.index(i, j);
                let d = self.derivs(i, j);
                let gam = self.vorticity.gamma(-grid.p(j));
                let r_hq = 2.0 * d.hq * d.hpp - 2.0 * d.hp * d.hqp;
                let r_hp = -2.0 * d.hq * d.hqp + 2.0 * d.hp * d.hqq - 3.0 * gam * d.hp * d.hp;
                let r_hqq = d.hp * d.hp;
                let r_hpp = 1.0 + d.hq * d.hq;
                let r_hqp = -2.0 * d.hq * d.hp;
                let mut put = |ii: usize, jj: usize, v: f64| m.add(row, grid.index(ii, jj), v);
                // h_q
                put(ip, j, r_hq / (2.0 * dq));
                put(im, j, -r_hq / (2.0 * dq));
                // h_p
                put(i, j + 1, r_hp / (2.0 * dp));
                put(i, j - 1, -r_hp / (2.0 * dp));
                // h_qq
                put(ip, j, r_hqq / (dq * dq));
                put(i, j, -2.0 * r_hqq / (dq * dq));
                put(im, j, r_hqq / (dq * dq));
                // h_pp
                put(i, j + 1, r_hpp / (dp * dp));
                put(i, j, -2.0 * r_hpp / (dp * dp));
                put(i, j - 1, r_hpp / (dp * dp));
                // h_qp
                let c = r_hqp / (4.0 * dq * dp);
                put(ip, j + 1, c);
                put(ip, j - 1, -c);
                put(im, j + 1, -c);
                put(im, j - 1, c);
            }
            let n = np - 1;
            let row = grid.index(i, n);
            let (hq, hp) = self.surface_derivs(i);
            let hs = self.h[[i, n]];
            let r_hq = 2.0 * hq;
            let r_hp = 2.0 * (2.0 * g * hs - self.params.head) * hp;
            m.add(row, grid.index(i, n), 2.0 * g * hp * hp);
            m.add(row, grid.index(ip, n), r_hq / (2.0 * dq));
            m.add(row, grid.index(im, n), -r_hq / (2.0 * dq));
            m.add(row, grid.index(i, n), 3.0 * r_hp / (2.0 * dp));
            m.add(row, grid.index(i, n - 1), -4.0 * r_hp / (2.0 * dp));
            m.add(row, grid.index(i, n - 2), r_hp / (2.0 * dp));
            d_head[row] = -hp * hp;
        }
        Jacobian { matrix: m, d_head }
    }

    /// Violated invariants, if any, with Newton tolerance `tol` for the surface row.
    pub fn check_invariants(&self, tol: f64) -> Vec<String> {
        self.invariant_violations(tol, None)
    }

    fn invariant_violations(&self, tol: f64, forcing: Option<&Forcing>) -> Vec<String> {
        let mut out = Vec::new();
        let (nq, np) = (self.nq(), self.np());
        if let Some(i) = (0..nq).find(|&i| self.h[[i, 0]] != 0.0) {
            out.push(format!("bed height nonzero at q index {i}"));
        }
        let eps = self.eps_flow();
        let hp = self.h_p();
        if let Some(((i, j), v)) = hp.indexed_iter().find(|(_, &v)| !(v > eps)) {
            out.push(format!("h_p = {v:.3e} <= eps_flow at ({i}, {j})"));
        }
        let hq = self.h_q();
        let mut worst = (0.0, 0, 0);
        for i in 1..nq - 1 {
            for j in 1..np - 1 {
                if hq[[i, j]] > worst.0 {
                    worst = (hq[[i, j]], i, j);
                }
            }
        }
        if worst.0 > 1e-12 {
            out.push(format!(
                "interior h_q = {:.3e} > 0 at ({}, {})",
                worst.0, worst.1, worst.2
            ));
        }
        let r = self.residual_raw(forcing);
        let surf = max_abs((0..nq).map(|i| &r[[i, np - 1]]));
        if surf > tol {
            out.push(format!("surface residual {surf:.3e} above {tol:.1e}"));
        }
        out
    }

    /// Tensor-product cubic interpolation onto the grid with halved spacings.
    pub fn refine_cubic(&self) -> HeightField {
        let fine = self.grid.refined();
        let (nq, np) = (self.nq(), self.np());
        // along q: mirror ghosts keep the evenness of h
        let mut tmp = Array2::zeros((fine.nq, np));
        for j in 0..np {
            for i in 0..nq {
                tmp[[2 * i, j]] = self.h[[i, j]];
            }
            for i in 0..nq - 1 {
                let at = |k: isize| self.h[[self.grid.mirror(k), j]];
                let k = i as isize;
                tmp[[2 * i + 1, j]] = cubic_mid(at(k - 1), at(k), at(k + 1), at(k + 2));
            }
        }
        let mut h = Array2::zeros((fine.nq, fine.np));
        for i in 0..fine.nq {
            for j in 0..np {
                h[[i, 2 * j]] = tmp[[i, j]];
            }
            for j in 0..np - 1 {
                // shift the 4-point stencil inside at the ends
                let s = (j as isize - 1).clamp(0, np as isize - 4) as usize;
                let vals = [tmp[[i, s]], tmp[[i, s + 1]], tmp[[i, s + 2]], tmp[[i, s + 3]]];
                let t = j as f64 + 0.5 - s as f64;
                h[[i, 2 * j + 1]] = lagrange4(vals, t);
            }
        }
        HeightField {
            grid: fine,
            params: self.params,
            vorticity: self.vorticity,
            h,
        }
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(&HeightFieldDoc::from(self)).expect("plain data")
    }

    pub fn from_json(s: &str) -> Result<Self> {
        let doc: HeightFieldDoc = serde_json::from_str(s)?;
        doc.try_into()
    }
}

/// Relative mismatch between the analytic Jacobian-vector product and a
/// central difference of the residual along `dir`.
///
/// `dir` is indexed like the unknowns, `i * np + j`.
pub fn directional_fd_error(field: &HeightField, dir: &[f64], step: f64) -> Result<f64> {
    let jac = field.assemble_jacobian()?;
    let jv = jac.apply(dir, 0.0);
    let shifted = |t: f64| {
        let mut f = field.clone();
        f.h.iter_mut().zip(dir).for_each(|(h, d)| *h += t * d);
        f.residual_raw(None)
    };
    let (rp, rm) = (shifted(step), shifted(-step));
    let mut num = 0.0f64;
    let mut den = 0.0f64;
    for ((a, b), j) in rp.iter().zip(rm.iter()).zip(&jv) {
        let fd = (a - b) / (2.0 * step);
        num = num.max((fd - j).abs());
        den = den.max(j.abs()).max(fd.abs());
    }
    Ok(if den == 0.0 { num } else { num / den })
}

fn cubic_mid(a: f64, b: f64, c: f64, d: f64) -> f64 {
    (-a + 9.0 * b + 9.0 * c - d) / 16.0
}

/// Lagrange interpolation through nodes 0..3 evaluated at `t`.
fn lagrange4(v: [f64; 4], t: f64) -> f64 {
    let l0 = -(t - 1.0) * (t - 2.0) * (t - 3.0) / 6.0;
    let l1 = t * (t - 2.0) * (t - 3.0) / 2.0;
    let l2 = -t * (t - 1.0) * (t - 3.0) / 2.0;
    let l3 = t * (t - 1.0) * (t - 2.0) / 6.0;
    l0 * v[0] + l1 * v[1] + l2 * v[2] + l3 * v[3]
}

pub(crate) fn max_abs<'a>(it: impl Iterator<Item = &'a f64>) -> f64 {
    it.fold(0.0f64, |m, v| if v.is_nan() { f64::NAN } else { m.max(v.abs()) })
}

pub const HEIGHT_FIELD_FORMAT: &str = "djwave.height-field.v1";

/// On-disk layout of a [`HeightField`]: `h` is row-major over `(q, p)`, i.e.
/// `h[i * np + j]`.
#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct HeightFieldDoc {
    format: String,
    params: PhysicalParams,
    vorticity: VorticitySpec,
    grid: Grid,
    h: Vec<f64>,
}

impl From<&HeightField> for HeightFieldDoc {
    fn from(f: &HeightField) -> Self {
        Self {
            format: HEIGHT_FIELD_FORMAT.to_string(),
            params: f.params,
            vorticity: f.vorticity,
            grid: f.grid,
            h: f.h.iter().copied().collect(),
        }
    }
}

impl TryFrom<HeightFieldDoc> for HeightField {
    type Error = WaveError;

    fn try_from(d: HeightFieldDoc) -> Result<Self> {
        if d.format != HEIGHT_FIELD_FORMAT {
            return Err(WaveError::Schema(format!(
                "expected format {HEIGHT_FIELD_FORMAT}, found {}",
                d.format
            )));
        }
        d.grid.validate()?;
        d.params.validate()?;
        d.vorticity.validate()?;
        if d.grid.p0 != d.params.p0 {
            return Err(WaveError::Schema("grid.p0 differs from params.p0".into()));
        }
        let h = Array2::from_shape_vec((d.grid.nq, d.grid.np), d.h)
            .map_err(|e| WaveError::Schema(format!("h has wrong length: {e}")))?;
        Ok(HeightField {
            grid: d.grid,
            params: d.params,
            vorticity: d.vorticity,
            h,
        })
    }
}

/// Banded Jacobian plus the column for the head `Q`.
#[derive(Clone, Debug)]
pub struct Jacobian {
    pub matrix: BandedMatrix,
    pub d_head: Vec<f64>,
}

impl Jacobian {
    /// `J_h * dh + dR/dQ * dq_head`.
    pub fn apply(&self, dh: &[f64], d_head: f64) -> Vec<f64> {
        let mut out = self.matrix.matvec(dh);
        if d_head != 0.0 {
            for (o, c) in out.iter_mut().zip(&self.d_head) {
                *o += c * d_head;
            }
        }
        out
    }
}

/// What Newton holds fixed.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum Constraint {
    /// Head `Q` fixed.
    Head(f64),
    /// Half crest-to-trough height fixed, `Q` solved for.
    Amplitude(f64),
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct NewtonOptions {
    pub tol: f64,
    pub max_iter: usize,
    pub max_halvings: usize,
}

impl Default for NewtonOptions {
    fn default() -> Self {
        Self {
            tol: 1e-10,
            max_iter: 50,
            max_halvings: 30,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct NewtonReport {
    pub iterations: usize,
    pub residual: f64,
}

fn amplitude_residual(f: &HeightField, a: f64) -> f64 {
    f.surface_amplitude() - a
}

fn combined_norms(r: &Array2<f64>, extra: f64) -> (f64, f64) {
    let mut max = extra.abs();
    let mut sq = extra * extra;
    for v in r.iter() {
        if v.is_nan() {
            return (f64::NAN, f64::NAN);
        }
        max = max.max(v.abs());
        sq += v * v;
    }
    (max, sq.sqrt())
}

/// Bordered solve: `[J b; c^T 0] [x; s] = [r; t]` by block elimination with
/// one step of iterative refinement.
fn bordered_solve(
    jac: &Jacobian,
    lu: &BandedLu,
    c: &[(usize, f64)],
    r: &[f64],
    t: f64,
) -> (Vec<f64>, f64) {
    let x2 = lu.solve(&jac.d_head);
    let ct = |v: &[f64]| c.iter().map(|&(k, w)| w * v[k]).sum::<f64>();
    let cx2 = ct(&x2);
    let solve_once = |r: &[f64], t: f64| {
        let x1 = lu.solve(r);
        let s = (ct(&x1) - t) / cx2;
        let x: Vec<f64> = x1.iter().zip(&x2).map(|(a, b)| a - s * b).collect();
        (x, s)
    };
    let (mut x, mut s) = solve_once(r, t);
    let ax = jac.apply(&x, s);
    let rr: Vec<f64> = r.iter().zip(&ax).map(|(a, b)| a - b).collect();
    let tr = t - ct(&x);
    let (dx, ds) = solve_once(&rr, tr);
    x.iter_mut().zip(&dx).for_each(|(a, b)| *a += b);
    s += ds;
    (x, s)
}

/// Damped Newton iteration from `h0`.
///
/// Halves the step until the residual 2-norm decreases; converges when the
/// max-norm residual (including the amplitude pin) is below `opts.tol`.
pub fn newton_solve(
    h0: &HeightField,
    constraint: Constraint,
    opts: &NewtonOptions,
    forcing: Option<&Forcing>,
) -> Result<(HeightField, NewtonReport)> {
    let mut f = h0.clone();
    if let Constraint::Head(q) = constraint {
        f.params.head = q;
    }
    for i in 0..f.nq() {
        f.h[[i, 0]] = 0.0;
    }
    let grid = f.grid;
    let top = grid.np - 1;
    let pin = [
        (grid.index(0, top), 0.5),
        (grid.index(grid.nq - 1, top), -0.5),
    ];
    let eval = |f: &HeightField| -> Result<(Array2<f64>, f64)> {
        f.stagnation_check()?;
        let r = f.residual_raw(forcing);
        let extra = match constraint {
            Constraint::Amplitude(a) => amplitude_residual(f, a),
            Constraint::Head(_) => 0.0,
        };
        Ok((r, extra))
    };
    let (mut r, mut extra) = eval(&f)?;
    let (mut rmax, mut r2) = combined_norms(&r, extra);
    let mut iterations = 0;
    loop {
        if rmax <= opts.tol {
            break;
        }
        if iterations >= opts.max_iter {
            return Err(WaveError::MaxIterations {
                iterations,
                residual: rmax,
            });
        }
        iterations += 1;
        let jac = f.jacobian_raw();
        let lu = jac.matrix.clone().factorize()?;
        let rhs: Vec<f64> = r.iter().map(|v| -v).collect();
        let (dh, dq) = match constraint {
            Constraint::Head(_) => (lu.solve(&rhs), 0.0),
            Constraint::Amplitude(_) => bordered_solve(&jac, &lu, &pin, &rhs, -extra),
        };
        let step = max_abs(dh.iter()).max(dq.abs());
        let scale = max_abs(f.h.iter()).max(1.0);
        if step < 1e-14 * scale {
            return Err(WaveError::ConvergenceStall {
                step,
                residual: rmax,
                tol: opts.tol,
            });
        }
        let mut t = 1.0;
        let mut accepted = false;
        for _ in 0..=opts.max_halvings {
            let mut trial = f.clone();
            trial
                .h
                .iter_mut()
                .zip(&dh)
                .for_each(|(h, d)| *h += t * d);
            for i in 0..trial.nq() {
                trial.h[[i, 0]] = 0.0;
            }
            trial.params.head += t * dq;
            if let Ok((rt, et)) = eval(&trial) {
                let (tmax, t2) = combined_norms(&rt, et);
                if t2 < r2 || tmax <= opts.tol {
                    f = trial;
                    r = rt;
                    extra = et;
                    rmax = tmax;
                    r2 = t2;
                    accepted = true;
                    break;
                }
            }
            t *= 0.5;
        }
        if !accepted {
            return Err(WaveError::Divergence {
                iteration: iterations,
                residual: rmax,
                halvings: opts.max_halvings,
            });
        }
    }
    let violations = f.invariant_violations(opts.tol, forcing);
    if !violations.is_empty() {
        return Err(WaveError::InvariantViolation {
            violations,
            field: Box::new(f),
        });
    }
    Ok((
        f,
        NewtonReport {
            iterations,
            residual: rmax,
        },
    ))
}

/// Fixed inputs of a continuation run.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct WaveSetup {
    pub vorticity: VorticitySpec,
    pub g: f64,
    pub p0: f64,
    #[serde(default)]
    pub p_atm: f64,
    pub nq: usize,
    pub np: usize,
}

/// Laminar member at the bifurcation point, the start of every branch.
#[derive(Clone, Debug)]
pub struct Branch {
    pub setup: WaveSetup,
    pub bifurcation: Bifurcation,
    pub base: HeightField,
}

impl Branch {
    pub fn depth(&self) -> f64 {
        self.base.params.depth
    }
}

/// Locates the bifurcation point on the solver grid and builds the laminar base field.
///
/// The linearization uses the discrete q-symbol of `cos q`, so the base
/// field's Jacobian is singular up to rounding.
pub fn start_branch(setup: &WaveSetup) -> Result<Branch> {
    setup.vorticity.validate()?;
    let grid = Grid::new(setup.nq, setup.np, setup.p0)?;
    let kappa = discrete_kappa(grid.dq(), 1.0);
    let bif = bifurcation_head_with_kappa(&setup.vorticity, setup.g, setup.p0, setup.np, kappa)?;
    let depth = bif.laminar.depth;
    let params = PhysicalParams {
        g: setup.g,
        p0: setup.p0,
        head: bif.head,
        p_atm: setup.p_atm,
        c: (setup.g * depth.tanh()).sqrt(),
        depth,
    };
    params.validate()?;
    let base = HeightField::from_laminar(grid, params, setup.vorticity, &bif.laminar)?;
    Ok(Branch {
        setup: *setup,
        bifurcation: bif,
        base,
    })
}

#[derive(Clone, Debug)]
pub struct TraceMember {
    pub amplitude: f64,
    pub head: f64,
    pub field: HeightField,
    pub newton_iterations: usize,
    pub residual: f64,
}

#[derive(Clone, Debug)]
pub struct ContinuationTrace {
    pub bifurcation_head: f64,
    pub depth: f64,
    pub members: Vec<TraceMember>,
    /// Why the march stopped early, if it did.
    pub failure: Option<String>,
}

impl ContinuationTrace {
    pub fn is_complete(&self) -> bool {
        self.failure.is_none()
    }

    pub fn last(&self) -> Option<&TraceMember> {
        self.members.last()
    }
}

/// Equal-step march in amplitude from the laminar state: `a_k = k * target_a / steps`.
pub fn continue_in_amplitude(
    setup: &WaveSetup,
    target_a: f64,
    steps: usize,
    opts: &NewtonOptions,
) -> Result<ContinuationTrace> {
    let branch = start_branch(setup)?;
    continue_branch(&branch, target_a, steps, opts)
}

pub fn continue_branch(
    branch: &Branch,
    target_a: f64,
    steps: usize,
    opts: &NewtonOptions,
) -> Result<ContinuationTrace> {
    if steps == 0 {
        return Err(WaveError::Precondition("steps must be at least 1".into()));
    }
    if !(target_a > 0.0) {
        return Err(WaveError::Precondition(format!(
            "target amplitude {target_a} must be positive"
        )));
    }
    let base = &branch.base;
    let grid = base.grid;
    let mode = &branch.bifurcation.mode;
    let mut trace = ContinuationTrace {
        bifurcation_head: branch.bifurcation.head,
        depth: base.params.depth,
        members: Vec::new(),
        failure: None,
    };
    let mut prev: (f64, HeightField) = (0.0, base.clone());
    let mut prev2: Option<(f64, HeightField)> = None;
    for k in 1..=steps {
        let a = k as f64 * target_a / steps as f64;
        let guess = match &prev2 {
            None => {
                let mut g = base.clone();
                for i in 0..grid.nq {
                    let c = grid.q(i).cos();
                    for j in 0..grid.np {
                        g.h[[i, j]] += a * c * mode[j];
                    }
                }
                g
            }
            Some((a2, f2)) => {
                let (a1, f1) = &prev;
                let t = (a - a1) / (a1 - a2);
                let mut g = f1.clone();
                g.h.zip_mut_with(&f2.h, |x, y| *x += t * (*x - y));
                g.params.head += t * (f1.params.head - f2.params.head);
                g
            }
        };
        match newton_solve(&guess, Constraint::Amplitude(a), opts, None) {
            Ok((field, rep)) => {
                trace.members.push(TraceMember {
                    amplitude: a,
                    head: field.params.head,
                    field: field.clone(),
                    newton_iterations: rep.iterations,
                    residual: rep.residual,
                });
                prev2 = Some(std::mem::replace(&mut prev, (a, field)));
            }
            Err(e) if k == 1 => return Err(e),
            Err(e) => {
                trace.failure = Some(format!("step {k} (a = {a:.6e}): {e}"));
                break;
            }
        }
    }
    Ok(trace)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::laminar::solve_laminar;

    fn laminar_field(spec: VorticitySpec, nq: usize, np: usize) -> HeightField {
        let g = 9.81;
        let p0 = -2.7;
        let bif = crate::laminar::bifurcation_head(&spec, g, p0, np).unwrap();
        let lam = solve_laminar(&spec, g, p0, bif.head * 1.02, np).unwrap();
        let params = PhysicalParams {
            g,
            p0,
            head: lam.head,
            p_atm: 0.0,
            c: 1.0,
            depth: lam.depth,
        };
        HeightField::from_laminar(Grid::new(nq, np, p0).unwrap(), params, spec, &lam).unwrap()
    }

    #[test]
    fn laminar_is_discrete_fixed_point() {
        for spec in [
            VorticitySpec::zero(),
            VorticitySpec::constant(0.3),
            VorticitySpec::affine(-0.5, 0.0),
        ] {
            let f = laminar_field(spec, 17, 17);
            let r = f.assemble_residual().unwrap();
            assert!(max_abs(r.iter()) < 1e-10, "{spec:?}: {}", max_abs(r.iter()));
        }
    }

    #[test]
    fn zeroed_field_residual() {
        let mut f = laminar_field(VorticitySpec::zero(), 17, 9);
        f.h.fill(0.0);
        assert!(matches!(
            f.assemble_residual(),
            Err(WaveError::StagnationProximity { .. })
        ));
        let r = f.residual_raw(None);
        for i in 0..17 {
            assert_eq!(r[[i, 0]], 0.0);
            // h_p = 0 one-sided, so the surface row reduces to 1
            assert_eq!(r[[i, 8]], 1.0);
        }
    }

    #[test]
    fn newton_at_laminar_is_immediate() {
        let f = laminar_field(VorticitySpec::zero(), 17, 9);
        let (g, rep) =
            newton_solve(&f, Constraint::Amplitude(0.0), &NewtonOptions::default(), None).unwrap();
        assert!(rep.iterations <= 1);
        assert!((&g.h - &f.h).iter().all(|d| d.abs() < 1e-12));
    }

    #[test]
    fn json_round_trip() {
        let f = laminar_field(VorticitySpec::affine(0.5, 0.1), 17, 9);
        let s = f.to_json();
        let g = HeightField::from_json(&s).unwrap();
        assert_eq!(f, g);
        assert_eq!(s, g.to_json());
    }

    #[test]
    fn json_rejects_unknown_keys_and_bad_lengths() {
        let f = laminar_field(VorticitySpec::zero(), 17, 9);
        let mut v: serde_json::Value = serde_json::from_str(&f.to_json()).unwrap();
        v["extra"] = serde_json::json!(1);
        assert!(HeightField::from_json(&v.to_string()).is_err());
        let mut v: serde_json::Value = serde_json::from_str(&f.to_json()).unwrap();
        v["h"].as_array_mut().unwrap().pop();
        assert!(matches!(
            HeightField::from_json(&v.to_string()),
            Err(WaveError::Schema(_))
        ));
    }

    #[test]
    fn steps_zero_is_rejected() {
        let setup = WaveSetup {
            vorticity: VorticitySpec::zero(),
            g: 9.81,
            p0: -2.7,
            p_atm: 0.0,
            nq: 17,
            np: 9,
        };
        let e = continue_in_amplitude(&setup, 0.01, 0, &NewtonOptions::default()).unwrap_err();
        assert!(matches!(e, WaveError::Precondition(_)));
    }

    #[test]
    fn refine_cubic_preserves_nodes() {
        let f = laminar_field(VorticitySpec::zero(), 17, 9);
        let r = f.refine_cubic();
        assert_eq!(r.grid.nq, 33);
        assert_eq!(r.grid.np, 17);
        for i in 0..17 {
            for j in 0..9 {
                assert_eq!(r.h[[2 * i, 2 * j]], f.h[[i, j]]);
            }
        }
        // linear profile is reproduced exactly at midpoints
        assert!(r.max_residual() < 1e-10);
    }
}

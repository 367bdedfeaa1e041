//! First Dirichlet eigenvalue of `-Laplacian` on the half-period fluid domain.

use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

use crate::banded::BandedMatrix;
use crate::error::{Result, WaveError};
use crate::height::HeightField;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct EigenEstimate {
    /// `1 + pi^2 / H^2` for the bounding box `(0, pi) x (-d, eta_max)`; never
    /// exceeds the domain's eigenvalue.
    pub rectangle_bound: f64,
    /// Box height `H = d + eta_max`.
    pub box_height: f64,
    /// Inverse-iteration value on the mapped grid; not certified.
    pub estimate: f64,
    pub iterations: usize,
}

/// Eigenvalue of the box containing a fluid domain of height `box_height`.
pub fn rectangle_eigenvalue(box_height: f64) -> f64 {
    1.0 + PI * PI / (box_height * box_height)
}

/// Box bound plus a shifted inverse-iteration estimate on the `(q, p)` grid.
///
/// The Laplacian in mapped variables is
/// `f_qq + 2 p_x f_qp + (1 + h_q^2) / h_p^2 f_pp - gamma(-p) f_p` with
/// `p_x = -h_q / h_p`.
pub fn first_dirichlet_eigenvalue(field: &HeightField) -> Result<EigenEstimate> {
    let grid = field.grid;
    let (nq, np) = (grid.nq, grid.np);
    let top = np - 1;
    let box_height = (0..nq).map(|i| field.h[[i, top]]).fold(f64::NEG_INFINITY, f64::max);
    if !(box_height > 0.0) {
        return Err(WaveError::FluidTooThin(format!("surface height {box_height}")));
    }
    let rectangle_bound = rectangle_eigenvalue(box_height);

    let hq = field.h_q();
    let hp = field.h_p();
    let (mq, mp) = (nq - 2, np - 2);
    let idx = |i: usize, j: usize| (i - 1) * mp + (j - 1);
    let n = mq * mp;
    let band = mp + 1;
    let (dq, dp) = (grid.dq(), grid.dp());
    let sigma = rectangle_bound;
    let mut a = BandedMatrix::zeros(n, band, band);
    for i in 1..nq - 1 {
        for j in 1..np - 1 {
            let row = idx(i, j);
            let px = -hq[[i, j]] / hp[[i, j]];
            let cpp = (1.0 + hq[[i, j]] * hq[[i, j]]) / (hp[[i, j]] * hp[[i, j]]);
            let gam = field.vorticity.gamma(-grid.p(j));
            let mut put = |ii: usize, jj: usize, c: f64| {
                // Dirichlet nodes drop out
                if (1..nq - 1).contains(&ii) && (1..np - 1).contains(&jj) {
                    a.add(row, idx(ii, jj), -c);
                }
            };
            put(i + 1, j, 1.0 / (dq * dq));
            put(i - 1, j, 1.0 / (dq * dq));
            put(i, j, -2.0 / (dq * dq) - 2.0 * cpp / (dp * dp));
            put(i, j + 1, cpp / (dp * dp) - gam / (2.0 * dp));
            put(i, j - 1, cpp / (dp * dp) + gam / (2.0 * dp));
            let c = 2.0 * px / (4.0 * dq * dp);
            put(i + 1, j + 1, c);
            put(i - 1, j - 1, c);
            put(i + 1, j - 1, -c);
            put(i - 1, j + 1, -c);
            a.add(row, row, -sigma);
        }
    }
    let shifted = a.clone();
    let lu = a.factorize()?;
    let mut x: Vec<f64> = (0..n)
        .map(|k| {
            let (i, j) = (k / mp + 1, k % mp + 1);
            grid.q(i).sin() * (PI * (grid.p(j) - grid.p0) / -grid.p0).sin()
        })
        .collect();
    normalize(&mut x);
    let mut lambda = f64::NAN;
    let mut iterations = 0;
    for it in 1..=500 {
        iterations = it;
        let mut y = lu.solve(&x);
        normalize(&mut y);
        // Rayleigh quotient of the shifted operator
        let ay = shifted.matvec(&y);
        let next = sigma + dot(&y, &ay);
        x = y;
        let done = (next - lambda).abs() <= 1e-13 * next.abs();
        lambda = next;
        if done {
            break;
        }
    }
    Ok(EigenEstimate {
        rectangle_bound,
        box_height,
        estimate: lambda,
        iterations,
    })
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

fn normalize(x: &mut [f64]) {
    let n = dot(x, x).sqrt();
    x.iter_mut().for_each(|v| *v /= n);
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn box_values() {
        assert!((rectangle_eigenvalue(1.0) - 10.869_604_401_089_358).abs() < 1e-12);
        assert!((rectangle_eigenvalue(2.0) - 3.467_401_100_272_339_7).abs() < 1e-12);
    }
}

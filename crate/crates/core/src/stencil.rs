//! Grid difference operators shared by reconstruction and analysis.
//!
//! q-derivatives reflect across `q = 0, pi` with the function's parity;
//! p-derivatives are central inside and one-sided second order on the bed
//! and surface rows.

use ndarray::Array2;

use crate::grid::Grid;

/// Behaviour under `q -> -q` (and `q -> 2 pi - q`).
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Parity {
    Even,
    Odd,
}

impl Parity {
    #[inline]
    pub fn sign(self) -> f64 {
        match self {
            Parity::Even => 1.0,
            Parity::Odd => -1.0,
        }
    }

    pub fn flip(self) -> Self {
        match self {
            Parity::Even => Parity::Odd,
            Parity::Odd => Parity::Even,
        }
    }
}

/// Value at q-index `k` (possibly a ghost) of a periodic function sampled on `[0, pi]`.
#[inline]
pub fn reflected(f: impl Fn(usize) -> f64, n: usize, k: isize, parity: Parity) -> f64 {
    let last = (n - 1) as isize;
    if (0..=last).contains(&k) {
        f(k as usize)
    } else {
        let m = if k < 0 { -k } else { 2 * last - k };
        parity.sign() * f(m as usize)
    }
}

pub fn d_q(f: &Array2<f64>, grid: &Grid, parity: Parity) -> Array2<f64> {
    let dq = grid.dq();
    let n = grid.nq;
    Array2::from_shape_fn(f.dim(), |(i, j)| {
        let at = |k: isize| reflected(|m| f[[m, j]], n, k, parity);
        (at(i as isize + 1) - at(i as isize - 1)) / (2.0 * dq)
    })
}

pub fn d_qq(f: &Array2<f64>, grid: &Grid, parity: Parity) -> Array2<f64> {
    let dq = grid.dq();
    let n = grid.nq;
    Array2::from_shape_fn(f.dim(), |(i, j)| {
        let at = |k: isize| reflected(|m| f[[m, j]], n, k, parity);
        let k = i as isize;
        (at(k + 1) - 2.0 * at(k) + at(k - 1)) / (dq * dq)
    })
}

pub fn d_p(f: &Array2<f64>, grid: &Grid) -> Array2<f64> {
    let dp = grid.dp();
    let np = grid.np;
    Array2::from_shape_fn(f.dim(), |(i, j)| {
        if j == 0 {
            (-3.0 * f[[i, 0]] + 4.0 * f[[i, 1]] - f[[i, 2]]) / (2.0 * dp)
        } else if j == np - 1 {
            (3.0 * f[[i, j]] - 4.0 * f[[i, j - 1]] + f[[i, j - 2]]) / (2.0 * dp)
        } else {
            (f[[i, j + 1]] - f[[i, j - 1]]) / (2.0 * dp)
        }
    })
}

pub fn d_pp(f: &Array2<f64>, grid: &Grid) -> Array2<f64> {
    let dp2 = grid.dp() * grid.dp();
    let np = grid.np;
    Array2::from_shape_fn(f.dim(), |(i, j)| {
        if j == 0 {
            (2.0 * f[[i, 0]] - 5.0 * f[[i, 1]] + 4.0 * f[[i, 2]] - f[[i, 3]]) / dp2
        } else if j == np - 1 {
            (2.0 * f[[i, j]] - 5.0 * f[[i, j - 1]] + 4.0 * f[[i, j - 2]] - f[[i, j - 3]]) / dp2
        } else {
            (f[[i, j + 1]] - 2.0 * f[[i, j]] + f[[i, j - 1]]) / dp2
        }
    })
}

/// Fourth-order first derivative of a row sampled on `[0, pi]` with spacing `dx`.
pub fn row_d1(f: &[f64], dx: f64, parity: Parity) -> Vec<f64> {
    let n = f.len();
    (0..n)
        .map(|i| {
            let at = |k: isize| reflected(|m| f[m], n, k, parity);
            let k = i as isize;
            (at(k - 2) - 8.0 * at(k - 1) + 8.0 * at(k + 1) - at(k + 2)) / (12.0 * dx)
        })
        .collect()
}

/// Fourth-order second derivative of a row sampled on `[0, pi]`.
pub fn row_d2(f: &[f64], dx: f64, parity: Parity) -> Vec<f64> {
    let n = f.len();
    (0..n)
        .map(|i| {
            let at = |k: isize| reflected(|m| f[m], n, k, parity);
            let k = i as isize;
            (-at(k - 2) + 16.0 * at(k - 1) - 30.0 * at(k) + 16.0 * at(k + 1) - at(k + 2))
                / (12.0 * dx * dx)
        })
        .collect()
}

/// Observed order `log2(coarse / fine)` for one halving of the spacing.
pub fn observed_order(coarse: f64, fine: f64) -> f64 {
    if fine == 0.0 && coarse == 0.0 {
        f64::INFINITY
    } else {
        (coarse / fine).log2()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::PI;

    #[test]
    fn row_derivatives_are_fourth_order() {
        let err = |n: usize| {
            let dx = PI / (n - 1) as f64;
            let f: Vec<f64> = (0..n).map(|i| (i as f64 * dx).sin()).collect();
            let d1 = row_d1(&f, dx, Parity::Odd);
            let d2 = row_d2(&f, dx, Parity::Odd);
            (0..n).fold(0.0f64, |m, i| {
                let x = i as f64 * dx;
                m.max((d1[i] - x.cos()).abs()).max((d2[i] + x.sin()).abs())
            })
        };
        let order = observed_order(err(33), err(65));
        assert!(order > 3.8, "order {order}");
    }

    #[test]
    fn p_derivatives_exact_on_quadratics() {
        let g = Grid::new(17, 9, -2.0).unwrap();
        let f = Array2::from_shape_fn((17, 9), |(_, j)| {
            let p = g.p(j);
            p * p + 3.0 * p
        });
        let fp = d_p(&f, &g);
        let fpp = d_pp(&f, &g);
        for j in 0..9 {
            assert!((fp[[3, j]] - (2.0 * g.p(j) + 3.0)).abs() < 1e-12);
            assert!((fpp[[3, j]] - 2.0).abs() < 1e-12);
        }
    }
}

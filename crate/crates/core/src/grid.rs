use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

use crate::error::{Result, WaveError};

/// Wave period; the computational half period is `[0, pi]`.
pub const PERIOD: f64 = 2.0 * PI;

pub const MIN_NQ: usize = 17;
pub const MIN_NP: usize = 9;

/// Physical data of a wave run.
///
/// `depth` is the surface height of the laminar flow the wave bifurcates
/// from; the bed sits at `y = -depth`. `c` is only used for reporting
/// absolute velocities, every check works with `u - c`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PhysicalParams {
    pub g: f64,
    pub p0: f64,
    pub head: f64,
    #[serde(default)]
    pub p_atm: f64,
    pub c: f64,
    pub depth: f64,
}

impl PhysicalParams {
    pub fn validate(&self) -> Result<()> {
        if !(self.g > 0.0) {
            return Err(WaveError::Precondition(format!("g = {} must be positive", self.g)));
        }
        if !(self.p0 < 0.0) {
            return Err(WaveError::Precondition(format!(
                "relative mass flux p0 = {} must be negative",
                self.p0
            )));
        }
        if !(self.depth > 0.0) {
            return Err(WaveError::Precondition(format!(
                "depth = {} must be positive",
                self.depth
            )));
        }
        Ok(())
    }

    /// Flux magnitude `-p0`.
    pub fn flux(&self) -> f64 {
        -self.p0
    }
}

/// Uniform node grid on `[0, pi] x [p0, 0]`, endpoints included.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Grid {
    pub nq: usize,
    pub np: usize,
    pub p0: f64,
}

impl Grid {
    pub fn new(nq: usize, np: usize, p0: f64) -> Result<Self> {
        let g = Self { nq, np, p0 };
        g.validate()?;
        Ok(g)
    }

    pub fn validate(&self) -> Result<()> {
        if self.nq < MIN_NQ || self.np < MIN_NP {
            return Err(WaveError::Precondition(format!(
                "grid {}x{} is below the minimum {MIN_NQ}x{MIN_NP}",
                self.nq, self.np
            )));
        }
        if !(self.p0 < 0.0) {
            return Err(WaveError::Precondition(format!("p0 = {} must be negative", self.p0)));
        }
        Ok(())
    }

    #[inline]
    pub fn dq(&self) -> f64 {
        PI / (self.nq - 1) as f64
    }

    #[inline]
    pub fn dp(&self) -> f64 {
        -self.p0 / (self.np - 1) as f64
    }

    #[inline]
    pub fn q(&self, i: usize) -> f64 {
        if i == self.nq - 1 {
            PI
        } else {
            i as f64 * self.dq()
        }
    }

    #[inline]
    pub fn p(&self, j: usize) -> f64 {
        if j == self.np - 1 {
            0.0
        } else {
            self.p0 + j as f64 * self.dp()
        }
    }

    #[inline]
    pub fn len(&self) -> usize {
        self.nq * self.np
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// Unknown ordering: q-major, so q-neighbours are `np` apart.
    #[inline]
    pub fn index(&self, i: usize, j: usize) -> usize {
        i * self.np + j
    }

    /// Reflects a q-index across `q = 0` and `q = pi`.
    #[inline]
    pub fn mirror(&self, i: isize) -> usize {
        let last = (self.nq - 1) as isize;
        let m = if i < 0 {
            -i
        } else if i > last {
            2 * last - i
        } else {
            i
        };
        m as usize
    }

    /// Same grid with spacings halved.
    pub fn refined(&self) -> Self {
        Self {
            nq: 2 * self.nq - 1,
            np: 2 * self.np - 1,
            p0: self.p0,
        }
    }

    /// Index of the p-level closest to `p`.
    pub fn nearest_level(&self, p: f64) -> Result<usize> {
        let slack = 1e-12 * self.p0.abs();
        if !(p >= self.p0 - slack && p <= slack) {
            return Err(WaveError::OutOfRange {
                what: "p",
                value: p,
                lo: self.p0,
                hi: 0.0,
            });
        }
        let j = ((p - self.p0) / self.dp()).round() as isize;
        Ok(j.clamp(0, self.np as isize - 1) as usize)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn spacing_and_endpoints() {
        let g = Grid::new(17, 9, -2.0).unwrap();
        assert_eq!(g.q(0), 0.0);
        assert_eq!(g.q(16), PI);
        assert_eq!(g.p(0), -2.0);
        assert_eq!(g.p(8), 0.0);
        assert!((g.dp() - 0.25).abs() < 1e-15);
        assert!(Grid::new(16, 9, -1.0).is_err());
        assert!(Grid::new(17, 8, -1.0).is_err());
        assert!(Grid::new(17, 9, 0.0).is_err());
    }

    #[test]
    fn mirror_reflects() {
        let g = Grid::new(17, 9, -1.0).unwrap();
        assert_eq!(g.mirror(-1), 1);
        assert_eq!(g.mirror(17), 15);
        assert_eq!(g.mirror(18), 14);
        assert_eq!(g.mirror(5), 5);
    }

    #[test]
    fn nearest_level_snaps() {
        let g = Grid::new(17, 9, -1.0).unwrap();
        assert_eq!(g.nearest_level(-1.0).unwrap(), 0);
        assert_eq!(g.nearest_level(0.0).unwrap(), 8);
        assert_eq!(g.nearest_level(-0.49).unwrap(), 4);
        assert!(g.nearest_level(0.1).is_err());
    }
}

//! Laminar (flat-surface, x-independent) flows and the bifurcation point of
//! the first periodic mode.
//!
//! A laminar flow solves `h'' = gamma(-p) h'^3` on `[p0, 0]` with `h(p0) = 0`
//! and the surface condition `1 + (2 g h(0) - Q) h'(0)^2 = 0`. Two flavours
//! are provided:
//!
//! * [`LaminarProfile`] is the solution of the *discrete* equations on the
//!   solver's p-grid (same stencils as the 2-D residual), so it is an exact
//!   fixed point of the wave solver.
//! * [`ContinuousLaminar`] is the exact profile: closed form for zero and
//!   constant vorticity, RK4 for affine vorticity.
//!
//! For a given head `Q` there are two laminar flows. We always take the
//! subcritical one (larger bed slope, i.e. deeper and slower), which is the
//! member periodic waves bifurcate from.

use std::fmt::Write as _;

use serde::{Deserialize, Serialize};

use crate::error::{Result, WaveError};
use crate::numeric::{brent, golden_min};
use crate::vorticity::{gamma_integral, VorticityKind, VorticitySpec};

const SHOOT_TOL: f64 = 1e-12;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LaminarProfile {
    pub p: Vec<f64>,
    pub h: Vec<f64>,
    /// Discrete slope: central in the interior, one-sided second order at the ends.
    pub h_p: Vec<f64>,
    pub head: f64,
    pub depth: f64,
    /// March parameter `h(p0 + dp) / dp`.
    pub bed_slope: f64,
}

impl LaminarProfile {
    pub fn np(&self) -> usize {
        self.h.len()
    }

    pub fn dp(&self) -> f64 {
        self.p[1] - self.p[0]
    }

    /// Residual of the discrete surface condition.
    pub fn surface_residual(&self, g: f64) -> f64 {
        let n = self.np() - 1;
        let hp = self.h_p[n];
        1.0 + (2.0 * g * self.h[n] - self.head) * hp * hp
    }

    /// Max-norm residual of the discrete interior ODE.
    pub fn ode_residual(&self, spec: &VorticitySpec) -> f64 {
        let dp = self.dp();
        (1..self.np() - 1)
            .map(|j| {
                let hpp = (self.h[j + 1] - 2.0 * self.h[j] + self.h[j - 1]) / (dp * dp);
                let hp = (self.h[j + 1] - self.h[j - 1]) / (2.0 * dp);
                (hpp - spec.gamma(-self.p[j]) * hp * hp * hp).abs()
            })
            .fold(0.0, f64::max)
    }

    /// CSV with columns `p,h,h_p`.
    pub fn to_csv(&self) -> String {
        let mut s = String::from("p,h,h_p\n");
        for j in 0..self.np() {
            let _ = writeln!(s, "{},{},{}", self.p[j], self.h[j], self.h_p[j]);
        }
        s
    }
}

fn p_levels(p0: f64, np: usize) -> Vec<f64> {
    let dp = -p0 / (np - 1) as f64;
    (0..np)
        .map(|j| if j == np - 1 { 0.0 } else { p0 + j as f64 * dp })
        .collect()
}

/// Marches the discrete laminar equations upward from the bed.
///
/// Each interior row is a cubic in the next node height, solved by Newton
/// from the quadratic extrapolation. The head follows from the surface row.
pub fn march_laminar(
    spec: &VorticitySpec,
    g: f64,
    p0: f64,
    np: usize,
    bed_slope: f64,
) -> Result<LaminarProfile> {
    if np < 3 || !(p0 < 0.0) || !(bed_slope > 0.0) {
        return Err(WaveError::Precondition(format!(
            "laminar march needs np >= 3, p0 < 0, bed slope > 0 (got {np}, {p0}, {bed_slope})"
        )));
    }
    let p = p_levels(p0, np);
    let dp = -p0 / (np - 1) as f64;
    let mut h = vec![0.0; np];
    h[1] = bed_slope * dp;
    for j in 1..np - 1 {
        let gam = spec.gamma(-p[j]);
        let s = (h[j] - h[j - 1]) / dp;
        let mut x = 2.0 * h[j] - h[j - 1] + dp * dp * gam * s * s * s;
        let mut converged = gam == 0.0;
        if converged {
            x = 2.0 * h[j] - h[j - 1];
        }
        for _ in 0..50 {
            if converged {
                break;
            }
            let t = (x - h[j - 1]) / (2.0 * dp);
            let f = (x - 2.0 * h[j] + h[j - 1]) / (dp * dp) - gam * t * t * t;
            let df = 1.0 / (dp * dp) - 1.5 * gam * t * t / dp;
            if !(df > 0.0) {
                return Err(WaveError::NonMonotone { p: p[j], hp: t });
            }
            let dx = f / df;
            x -= dx;
            converged = dx.abs() <= 1e-15 * x.abs().max(dp);
        }
        if !x.is_finite() || x <= h[j - 1] {
            return Err(WaveError::NonMonotone {
                p: p[j],
                hp: (x - h[j - 1]) / (2.0 * dp),
            });
        }
        h[j + 1] = x;
    }
    let mut h_p = vec![0.0; np];
    h_p[0] = (-3.0 * h[0] + 4.0 * h[1] - h[2]) / (2.0 * dp);
    for j in 1..np - 1 {
        h_p[j] = (h[j + 1] - h[j - 1]) / (2.0 * dp);
    }
    let n = np - 1;
    h_p[n] = (3.0 * h[n] - 4.0 * h[n - 1] + h[n - 2]) / (2.0 * dp);
    if let Some(j) = h_p.iter().position(|&s| !(s > 0.0)) {
        return Err(WaveError::NonMonotone { p: p[j], hp: h_p[j] });
    }
    let head = 2.0 * g * h[n] + 1.0 / (h_p[n] * h_p[n]);
    Ok(LaminarProfile {
        depth: h[n],
        p,
        h,
        h_p,
        head,
        bed_slope,
    })
}

/// Largest bed slope for which the exact slope profile stays finite.
fn slope_limit(spec: &VorticitySpec, p0: f64) -> f64 {
    let gi = gamma_integral(spec, p0, 2).expect("p0 checked by caller");
    // w(p)^-2 = w0^-2 - 2 (Gamma(p) - Gamma(p0)); Gamma is quadratic so its
    // maximum is at an endpoint or at the vertex.
    let mut cands = vec![p0, 0.0];
    if spec.beta != 0.0 {
        let v = spec.gamma0 / spec.beta;
        if v > p0 && v < 0.0 {
            cands.push(v);
        }
    }
    let worst = cands
        .into_iter()
        .map(|p| gi.eval(p) - gi.eval(p0))
        .fold(0.0, f64::max);
    if worst > 0.0 {
        (2.0 * worst).sqrt().recip()
    } else {
        f64::INFINITY
    }
}

/// Finds the subcritical bed slope whose head equals `head`.
fn subcritical_root<F>(head_of: F, head: f64, scale: f64, limit: f64) -> Result<f64>
where
    F: Fn(f64) -> Option<f64>,
{
    let lo = scale / 20.0;
    let hi = (scale * 40.0).min(limit * (1.0 - 1e-9));
    let n = 400;
    let ws: Vec<f64> = (0..=n)
        .map(|k| lo * (hi / lo).powf(k as f64 / n as f64))
        .collect();
    let mut qs = Vec::with_capacity(ws.len());
    for &w in &ws {
        match head_of(w) {
            Some(q) if q.is_finite() => qs.push(q),
            _ => break,
        }
    }
    if qs.len() < 3 {
        return Err(WaveError::Precondition(
            "laminar family could not be sampled".into(),
        ));
    }
    let kmin = (0..qs.len())
        .min_by(|&a, &b| qs[a].total_cmp(&qs[b]))
        .unwrap();
    let a = ws[kmin.saturating_sub(1)];
    let b = ws[(kmin + 1).min(qs.len() - 1)];
    let w_crit = golden_min(|w| head_of(w).unwrap_or(f64::INFINITY), a, b, 1e-12 * b);
    let q_min = head_of(w_crit).unwrap_or(qs[kmin]).min(qs[kmin]);
    if head < q_min {
        return Err(WaveError::NoRealSlope {
            head,
            min_head: q_min,
        });
    }
    let right = (kmin + 1..qs.len()).find(|&k| qs[k] >= head).ok_or_else(|| {
        WaveError::Precondition(format!(
            "head {head} exceeds every subcritical laminar state up to bed slope {}",
            ws[qs.len() - 1]
        ))
    })?;
    brent(
        |w| head_of(w).map(|q| q - head),
        w_crit.max(ws[right - 1]),
        ws[right],
        1e-15 * ws[right],
        200,
    )
    .ok_or_else(|| WaveError::Precondition("laminar shooting bracket lost".into()))
}

fn critical_scale(g: f64, p0: f64) -> f64 {
    (1.0 / (g * -p0)).cbrt()
}

/// Discrete laminar profile on an `np`-level grid with head `head`.
pub fn solve_laminar(
    spec: &VorticitySpec,
    g: f64,
    p0: f64,
    head: f64,
    np: usize,
) -> Result<LaminarProfile> {
    spec.validate()?;
    if !(p0 < 0.0) || !(g > 0.0) {
        return Err(WaveError::Precondition("need p0 < 0 and g > 0".into()));
    }
    let w0 = subcritical_root(
        |w| march_laminar(spec, g, p0, np, w).ok().map(|l| l.head),
        head,
        critical_scale(g, p0),
        slope_limit(spec, p0),
    )?;
    let mut lam = march_laminar(spec, g, p0, np, w0)?;
    // The root satisfies the head to rounding; pin it exactly so the surface
    // row is consistent with the requested Q.
    lam.head = head;
    let r = lam.surface_residual(g);
    if r.abs() > SHOOT_TOL {
        return Err(WaveError::Precondition(format!(
            "laminar surface residual {r:.3e} above {SHOOT_TOL:.0e}"
        )));
    }
    Ok(lam)
}

/// Exact laminar flow parameterized by its bed slope `w0 = h'(p0)`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ContinuousLaminar {
    pub spec: VorticitySpec,
    pub g: f64,
    pub p0: f64,
    pub w0: f64,
}

impl ContinuousLaminar {
    /// Closed-form slope `h'(p) = (w0^-2 - 2 (Gamma(p) - Gamma(p0)))^-1/2`.
    pub fn slope(&self, p: f64) -> f64 {
        let gi = |s: f64| -0.5 * self.spec.beta * s * s + self.spec.gamma0 * s;
        let arg = self.w0.powi(-2) - 2.0 * (gi(p) - gi(self.p0));
        if arg > 0.0 {
            arg.sqrt().recip()
        } else {
            f64::NAN
        }
    }

    pub fn height(&self, p: f64) -> f64 {
        match self.spec.kind {
            VorticityKind::Zero => self.w0 * (p - self.p0),
            VorticityKind::Constant if self.spec.gamma0 == 0.0 => self.w0 * (p - self.p0),
            VorticityKind::Constant => {
                let g0 = self.spec.gamma0;
                let arg = self.w0.powi(-2) - 2.0 * g0 * (p - self.p0);
                if arg < 0.0 {
                    return f64::NAN;
                }
                (self.w0.recip() - arg.sqrt()) / g0
            }
            VorticityKind::Affine => {
                integrate_rk4(&self.spec, self.p0, self.w0, p, RK4_STEPS).0
            }
        }
    }

    pub fn depth(&self) -> f64 {
        self.height(0.0)
    }

    pub fn head(&self) -> f64 {
        let w = self.slope(0.0);
        2.0 * self.g * self.depth() + 1.0 / (w * w)
    }
}

const RK4_STEPS: usize = 4000;

/// Integrates `h' = w, w' = gamma(-p) w^3` from `(p0, 0, w0)` to `p_end`
/// with classical RK4; returns `(h, w)` at `p_end`.
pub fn integrate_rk4(
    spec: &VorticitySpec,
    p0: f64,
    w0: f64,
    p_end: f64,
    steps: usize,
) -> (f64, f64) {
    let rhs = |p: f64, w: f64| (w, spec.gamma(-p) * w * w * w);
    let dp = (p_end - p0) / steps as f64;
    let (mut h, mut w) = (0.0, w0);
    for k in 0..steps {
        let p = p0 + k as f64 * dp;
        let (a1, b1) = rhs(p, w);
        let (a2, b2) = rhs(p + 0.5 * dp, w + 0.5 * dp * b1);
        let (a3, b3) = rhs(p + 0.5 * dp, w + 0.5 * dp * b2);
        let (a4, b4) = rhs(p + dp, w + dp * b3);
        h += dp / 6.0 * (a1 + 2.0 * a2 + 2.0 * a3 + a4);
        w += dp / 6.0 * (b1 + 2.0 * b2 + 2.0 * b3 + b4);
    }
    (h, w)
}

/// Exact laminar flow with head `head` (subcritical branch).
pub fn continuous_laminar(
    spec: &VorticitySpec,
    g: f64,
    p0: f64,
    head: f64,
) -> Result<ContinuousLaminar> {
    spec.validate()?;
    let make = |w0: f64| ContinuousLaminar {
        spec: *spec,
        g,
        p0,
        w0,
    };
    let w0 = subcritical_root(
        |w| {
            let q = make(w).head();
            q.is_finite().then_some(q)
        },
        head,
        critical_scale(g, p0),
        slope_limit(spec, p0),
    )?;
    Ok(make(w0))
}

/// Bifurcation point of the `cos(k q)` mode from the laminar family.
#[derive(Clone, Debug, PartialEq)]
pub struct Bifurcation {
    pub head: f64,
    pub laminar: LaminarProfile,
    /// Null vector of the linearized problem on the p-grid, normalized to 1
    /// at the surface.
    pub mode: Vec<f64>,
    /// Squared wavenumber used in the linearization.
    pub kappa: f64,
}

/// Linearization residual at the surface for a laminar profile.
///
/// The perturbation `phi(p) cos(k q)` is marched upward with the discrete
/// linearized interior rows (`phi(p0) = 0`, `phi(p0 + dp) = dp`) and the
/// linearized surface row is evaluated. It vanishes exactly when the
/// linearized operator is singular. Returns the residual and the mode.
pub fn linearized_surface_residual(
    spec: &VorticitySpec,
    g: f64,
    lam: &LaminarProfile,
    kappa: f64,
) -> (f64, Vec<f64>) {
    let np = lam.np();
    let dp = lam.dp();
    let mut phi = vec![0.0; np];
    phi[1] = dp;
    for j in 1..np - 1 {
        let hp2 = lam.h_p[j] * lam.h_p[j];
        let gam = spec.gamma(-lam.p[j]);
        let a = 1.0 / (dp * dp) - 1.5 * gam * hp2 / dp;
        let b = -2.0 / (dp * dp) - kappa * hp2;
        let c = 1.0 / (dp * dp) + 1.5 * gam * hp2 / dp;
        phi[j + 1] = -(b * phi[j] + c * phi[j - 1]) / a;
    }
    let n = np - 1;
    let hp = lam.h_p[n];
    let dphi = (3.0 * phi[n] - 4.0 * phi[n - 1] + phi[n - 2]) / (2.0 * dp);
    let res = 2.0 * g * hp * hp * phi[n] + 2.0 * (2.0 * g * lam.h[n] - lam.head) * hp * dphi;
    // scale-free: divide by the surface amplitude of the mode
    (res / phi[n].abs().max(f64::MIN_POSITIVE), phi)
}

/// Head `Q*` where the first periodic mode (`cos q`) bifurcates from the
/// laminar family, for the continuum wavenumber `k = 1`.
pub fn bifurcation_head(
    spec: &VorticitySpec,
    g: f64,
    p0: f64,
    np: usize,
) -> Result<Bifurcation> {
    bifurcation_head_with_kappa(spec, g, p0, np, 1.0)
}

/// As [`bifurcation_head`] with an explicit squared wavenumber, e.g. the
/// discrete symbol `4 sin^2(dq/2) / dq^2` of the q-stencil.
pub fn bifurcation_head_with_kappa(
    spec: &VorticitySpec,
    g: f64,
    p0: f64,
    np: usize,
    kappa: f64,
) -> Result<Bifurcation> {
    spec.validate()?;
    if !(p0 < 0.0) || !(g > 0.0) {
        return Err(WaveError::Precondition("need p0 < 0 and g > 0".into()));
    }
    let scale = critical_scale(g, p0);
    let limit = slope_limit(spec, p0);
    let resid = |w: f64| -> Option<f64> {
        let lam = march_laminar(spec, g, p0, np, w).ok()?;
        Some(linearized_surface_residual(spec, g, &lam, kappa).0)
    };
    // Start the scan at the fold of the laminar family (minimum head).
    let heads = |w: f64| march_laminar(spec, g, p0, np, w).ok().map(|l| l.head);
    let lo_scan = scale / 20.0;
    let hi_scan = (scale * 40.0).min(limit * (1.0 - 1e-9));
    let n = 400;
    let ws: Vec<f64> = (0..=n)
        .map(|k| lo_scan * (hi_scan / lo_scan).powf(k as f64 / n as f64))
        .collect();
    let qs: Vec<f64> = ws
        .iter()
        .map(|&w| heads(w).unwrap_or(f64::INFINITY))
        .collect();
    let kmin = (0..qs.len())
        .min_by(|&a, &b| qs[a].total_cmp(&qs[b]))
        .unwrap();
    let fold = golden_min(
        |w| heads(w).unwrap_or(f64::INFINITY),
        ws[kmin.saturating_sub(1)],
        ws[(kmin + 1).min(n)],
        1e-12 * ws[(kmin + 1).min(n)],
    );
    let scan_lo = fold * (1.0 + 1e-9);
    let m = 800;
    let mut prev: Option<(f64, f64)> = None;
    for k in 0..=m {
        let w = scan_lo * (hi_scan / scan_lo).powf(k as f64 / m as f64);
        let Some(r) = resid(w) else { break };
        if let Some((wp, rp)) = prev {
            if rp.signum() != r.signum() {
                let w_star = brent(resid, wp, w, 1e-15 * w, 200).ok_or(
                    WaveError::NoBifurcation {
                        lo: scan_lo,
                        hi: hi_scan,
                    },
                )?;
                let laminar = march_laminar(spec, g, p0, np, w_star)?;
                let (_, mut mode) = linearized_surface_residual(spec, g, &laminar, kappa);
                let top = mode[np - 1];
                mode.iter_mut().for_each(|v| *v /= top);
                return Ok(Bifurcation {
                    head: laminar.head,
                    laminar,
                    mode,
                    kappa,
                });
            }
        }
        prev = Some((w, r));
    }
    Err(WaveError::NoBifurcation {
        lo: scan_lo,
        hi: hi_scan,
    })
}

/// Discrete symbol of the second q-difference for `cos(k q)`.
pub fn discrete_kappa(dq: f64, k: f64) -> f64 {
    let s = (0.5 * k * dq).sin();
    4.0 * s * s / (dq * dq)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    const G: f64 = 9.81;

    #[test]
    fn irrotational_unit_slope_profile() {
        // h = p + 1 with lambda = 1: Q = 2 g + 1 and h(0) = 1.
        let lam = solve_laminar(&VorticitySpec::zero(), G, -1.0, 2.0 * G + 1.0, 33).unwrap();
        assert_relative_eq!(lam.depth, 1.0, epsilon = 1e-12);
        for (h, p) in lam.h.iter().zip(&lam.p) {
            assert_relative_eq!(*h, p + 1.0, epsilon = 1e-12);
        }
        assert!(lam.surface_residual(G).abs() < 1e-12);
        assert_eq!(lam.h[0], 0.0);
    }

    #[test]
    fn head_below_fold_has_no_slope() {
        let err = solve_laminar(&VorticitySpec::zero(), G, -1.0, 1.0, 33).unwrap_err();
        assert!(matches!(err, WaveError::NoRealSlope { .. }), "{err}");
    }

    #[test]
    fn profile_is_strictly_increasing() {
        for spec in [
            VorticitySpec::constant(0.3),
            VorticitySpec::constant(-0.3),
            VorticitySpec::affine(0.5, 0.0),
            VorticitySpec::affine(-0.5, 0.1),
        ] {
            let bif = bifurcation_head(&spec, G, -2.7, 65).unwrap();
            let lam = solve_laminar(&spec, G, -2.7, bif.head * 1.01, 65).unwrap();
            assert!(lam.h_p.iter().all(|&s| s > 0.0));
            assert!(lam.h.windows(2).all(|w| w[1] > w[0]));
            assert!(lam.ode_residual(&spec) < 1e-10);
            assert!(lam.surface_residual(G).abs() < 1e-12);
        }
    }

    #[test]
    fn discrete_kappa_limits() {
        assert_relative_eq!(discrete_kappa(1e-4, 1.0), 1.0, epsilon = 1e-8);
        assert!(discrete_kappa(0.1, 1.0) < 1.0);
    }

    #[test]
    fn laminar_csv_has_header_and_rows() {
        let lam = solve_laminar(&VorticitySpec::zero(), G, -1.0, 2.0 * G + 1.0, 9).unwrap();
        let csv = lam.to_csv();
        assert!(csv.starts_with("p,h,h_p\n"));
        assert_eq!(csv.lines().count(), 10);
    }
}

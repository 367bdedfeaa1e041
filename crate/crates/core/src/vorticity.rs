//! Vorticity functions `gamma(psi)` and their flux antiderivative.
//!
//! Only zero, constant and affine vorticity are supported. Every monotonicity
//! class the vertical-velocity results distinguish (irrotational, constant,
//! increasing, decreasing) is realized by an affine function, and affine
//! functions have a closed-form antiderivative, so no quadrature error enters
//! the checks downstream.

use serde::{Deserialize, Serialize};

use crate::error::{Result, WaveError};
use crate::verdict::Status;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum VorticityKind {
    Zero,
    Constant,
    Affine,
}

/// Sign class of `gamma'` over the flux range.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum MonotonicityClass {
    Irrotational,
    Constant,
    Increasing,
    DecreasingBounded,
    General,
}

/// `gamma(psi) = beta * psi + gamma0`, restricted by `kind`.
///
/// Serialized verbatim as `{kind, gamma0, beta}`; this is also the layout of
/// the `[vorticity]` block of a run configuration.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct VorticitySpec {
    pub kind: VorticityKind,
    #[serde(default)]
    pub gamma0: f64,
    #[serde(default)]
    pub beta: f64,
}

impl VorticitySpec {
    pub fn zero() -> Self {
        Self {
            kind: VorticityKind::Zero,
            gamma0: 0.0,
            beta: 0.0,
        }
    }

    pub fn constant(gamma0: f64) -> Self {
        Self {
            kind: VorticityKind::Constant,
            gamma0,
            beta: 0.0,
        }
    }

    pub fn affine(beta: f64, gamma0: f64) -> Self {
        Self {
            kind: VorticityKind::Affine,
            gamma0,
            beta,
        }
    }

    /// Rejects coefficient combinations that contradict `kind`.
    pub fn validate(&self) -> Result<()> {
        if !self.gamma0.is_finite() || !self.beta.is_finite() {
            return Err(WaveError::Precondition(
                "vorticity coefficients must be finite".into(),
            ));
        }
        match self.kind {
            VorticityKind::Zero if self.gamma0 != 0.0 || self.beta != 0.0 => Err(
                WaveError::Precondition("kind = zero requires gamma0 = beta = 0".into()),
            ),
            VorticityKind::Constant if self.beta != 0.0 => Err(WaveError::Precondition(
                "kind = constant requires beta = 0".into(),
            )),
            _ => Ok(()),
        }
    }

    /// `gamma(psi)` without range checking; used in inner loops.
    #[inline]
    pub fn gamma(&self, psi: f64) -> f64 {
        match self.kind {
            VorticityKind::Zero => 0.0,
            VorticityKind::Constant => self.gamma0,
            VorticityKind::Affine => self.beta * psi + self.gamma0,
        }
    }

    #[inline]
    pub fn gamma_prime(&self, _psi: f64) -> f64 {
        match self.kind {
            VorticityKind::Affine => self.beta,
            _ => 0.0,
        }
    }

    /// `gamma(psi)` for `psi` in the flux range `[0, -p0]`.
    pub fn evaluate_gamma(&self, psi: f64, p0: f64) -> Result<f64> {
        let hi = -p0;
        let slack = 1e-12 * hi.abs().max(1.0);
        if !(psi >= -slack && psi <= hi + slack) {
            return Err(WaveError::OutOfRange {
                what: "psi",
                value: psi,
                lo: 0.0,
                hi,
            });
        }
        Ok(self.gamma(psi))
    }

    pub fn monotonicity_class(&self) -> MonotonicityClass {
        match self.kind {
            VorticityKind::Zero => MonotonicityClass::Irrotational,
            VorticityKind::Constant => MonotonicityClass::Constant,
            VorticityKind::Affine if self.beta > 0.0 => MonotonicityClass::Increasing,
            // gamma' = beta is bounded, so a decreasing affine vorticity is
            // always in the bounded-decreasing class; admissibility is a
            // separate eigenvalue test.
            VorticityKind::Affine if self.beta < 0.0 => MonotonicityClass::DecreasingBounded,
            VorticityKind::Affine => MonotonicityClass::Constant,
        }
    }

    /// `sup |gamma'|` over the flux range.
    pub fn max_abs_gamma_prime(&self) -> f64 {
        self.gamma_prime(0.0).abs()
    }

    /// Minimum of `gamma` over `psi in [0, -p0]`.
    pub fn min_gamma(&self, p0: f64) -> f64 {
        self.gamma(0.0).min(self.gamma(-p0))
    }

    /// Whether `gamma' >= 0` and `gamma >= 0` on the whole flux range.
    pub fn nonnegative_and_nondecreasing(&self, p0: f64) -> bool {
        self.gamma_prime(0.0) >= 0.0 && self.min_gamma(p0) >= 0.0
    }
}

/// `Gamma(p) = int_0^p gamma(-s) ds` on `[p0, 0]`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct GammaIntegral {
    pub spec: VorticitySpec,
    pub p0: f64,
    /// Maximum of `Gamma` over the sampled flux levels.
    pub gamma_max: f64,
}

impl GammaIntegral {
    #[inline]
    pub fn eval(&self, p: f64) -> f64 {
        // gamma(-s) = -beta * s + gamma0
        -0.5 * self.spec.beta * p * p + self.spec.gamma0 * p
    }

    /// `dGamma/dp = gamma(-p)`.
    #[inline]
    pub fn derivative(&self, p: f64) -> f64 {
        self.spec.gamma(-p)
    }
}

/// Builds `Gamma` for a flux range `[p0, 0]`.
///
/// `np` is the node count of the solver's p-grid; `Gamma_max` is sampled on a
/// grid four times finer.
pub fn gamma_integral(spec: &VorticitySpec, p0: f64, np: usize) -> Result<GammaIntegral> {
    if !(p0 < 0.0) {
        return Err(WaveError::Precondition(format!("p0 = {p0} must be negative")));
    }
    let mut out = GammaIntegral {
        spec: *spec,
        p0,
        gamma_max: 0.0,
    };
    let n = 4 * (np.max(2) - 1);
    out.gamma_max = (0..=n)
        .map(|k| out.eval(p0 * (1.0 - k as f64 / n as f64)))
        .fold(f64::NEG_INFINITY, f64::max);
    Ok(out)
}

/// Eigenvalue admissibility for decreasing vorticity: `sup|gamma'| < lambda1`.
///
/// `lambda1_lower` must be a certified lower bound on the first Dirichlet
/// eigenvalue of the half-period fluid domain.
pub fn check_eigenvalue_gate(spec: &VorticitySpec, lambda1_lower: f64) -> Status {
    match spec.monotonicity_class() {
        MonotonicityClass::DecreasingBounded => {
            if spec.max_abs_gamma_prime() < lambda1_lower {
                Status::Pass
            } else {
                Status::Fail
            }
        }
        _ => Status::NotApplicable,
    }
}

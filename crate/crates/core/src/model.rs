//! Physical parameters, constitutive laws, and runtime checks of the model
//! assumptions that can be sampled numerically.

use std::fmt;
use std::sync::Arc;

use serde::Deserialize;

use crate::error::{Error, Result};

/// Nondimensional model constants.
#[derive(Debug, Clone, Copy, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ModelParams {
    /// Relaxation coefficient of the phase equation.
    pub alpha: f64,
    /// Thermal expansion coefficient.
    pub beta: f64,
    /// Latent-heat coupling.
    pub gamma: f64,
    /// Heat capacity.
    pub delta: f64,
    /// Interface width.
    pub epsilon: f64,
    /// Capillarity.
    pub lambda: f64,
    /// Critical temperature.
    pub theta_c: f64,
    /// Ersatz stiffness factor of the sol phase.
    pub kappa: f64,
    /// Gel point.
    pub phi_gel: f64,
    /// Young's modulus of the gel phase.
    pub young: f64,
    /// Poisson ratio of the gel phase.
    pub poisson: f64,
    /// Maximum shrinkage strain.
    pub zeta: f64,
}

impl ModelParams {
    /// Parameter set of the manufactured-solution convergence study.
    pub fn manufactured() -> Self {
        Self {
            alpha: 1.0,
            beta: 0.5,
            gamma: 1.0,
            delta: 1.2,
            epsilon: 0.1,
            lambda: 1.0,
            theta_c: 0.0,
            kappa: 0.01,
            phi_gel: 0.5,
            young: 1.0,
            poisson: 0.3,
            zeta: 1.0,
        }
    }

    /// Parameter set of the laser-curing simulations.
    pub fn laser() -> Self {
        Self {
            alpha: 0.5,
            beta: 5.0e2,
            gamma: 4.0e2,
            delta: 1.0e2,
            epsilon: 5.0e-3,
            lambda: 1.0,
            theta_c: 1.0,
            kappa: 1e-6,
            phi_gel: 0.5,
            young: 1e4,
            poisson: 0.35,
            zeta: 1e3,
        }
    }

    /// Lamé constants `(lambda_L, mu)` of the gel phase.
    pub fn lame(&self) -> (f64, f64) {
        let (e, nu) = (self.young, self.poisson);
        (
            e * nu / ((1.0 + nu) * (1.0 - 2.0 * nu)),
            e / (2.0 * (1.0 + nu)),
        )
    }

    /// Scalar factor `(1 - k) kappa + k` multiplying the gel tensor.
    pub fn stiffness_scale(&self, k: f64) -> f64 {
        (1.0 - k) * self.kappa + k
    }
}

pub type ScalarLaw = Arc<dyn Fn(f64) -> f64 + Send + Sync>;

/// Nonlinear constitutive functions of the phase field.
#[derive(Clone)]
pub struct MaterialLaws {
    /// Double-well potential `W`.
    pub potential: ScalarLaw,
    /// `W'`.
    pub potential_prime: ScalarLaw,
    /// Latent-heat interpolation `P`.
    pub latent: ScalarLaw,
    /// `p = P'`.
    pub latent_prime: ScalarLaw,
    /// Stiffness ramp `k` with values in `[0, 1]`.
    pub stiffness_ramp: ScalarLaw,
    /// Derivative of `k` where it exists (zero at the kinks from the left).
    pub stiffness_ramp_prime: ScalarLaw,
    /// Eigenstrain magnitude `m`.
    pub eigenstrain: ScalarLaw,
    /// `m'`.
    pub eigenstrain_prime: ScalarLaw,
}

impl fmt::Debug for MaterialLaws {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str("MaterialLaws { .. }")
    }
}

impl MaterialLaws {
    /// Quartic double well, affine latent heat, linear ramp above the gel
    /// point, and shrinkage proportional to the gel fraction.
    pub fn standard(params: &ModelParams) -> Self {
        let gel = params.phi_gel;
        let zeta = params.zeta;
        Self {
            potential: Arc::new(|s| 0.25 * (s * s - 1.0).powi(2)),
            potential_prime: Arc::new(|s| s * (s * s - 1.0)),
            latent: Arc::new(|s| 0.5 * (1.0 - s)),
            latent_prime: Arc::new(|_| -0.5),
            stiffness_ramp: Arc::new(move |s| ((s - gel) / (1.0 - gel)).clamp(0.0, 1.0)),
            stiffness_ramp_prime: Arc::new(move |s| {
                if s > gel && s < 1.0 {
                    1.0 / (1.0 - gel)
                } else {
                    0.0
                }
            }),
            eigenstrain: Arc::new(move |s| 0.5 * zeta * (1.0 + s)),
            eigenstrain_prime: Arc::new(move |_| 0.5 * zeta),
        }
    }
}

/// Plane-strain Voigt matrix of the gel phase, mapping the strain vector
/// `(e11, e22, e12)` (tensor shear) to the stress vector `(s11, s22, s12)`.
pub fn gel_tensor_2d(params: &ModelParams) -> [[f64; 3]; 3] {
    let (lam, mu) = params.lame();
    [
        [lam + 2.0 * mu, lam, 0.0],
        [lam, lam + 2.0 * mu, 0.0],
        [0.0, 0.0, 2.0 * mu],
    ]
}

/// `[(1 - k) kappa + k] C1` in Voigt form for a ramp value `k` in `[0, 1]`.
pub fn elasticity_tensor_2d(params: &ModelParams, k: f64) -> Result<[[f64; 3]; 3]> {
    if !(0.0..=1.0).contains(&k) {
        return Err(Error::InvalidInput(format!(
            "stiffness ramp value {k} outside [0, 1]"
        )));
    }
    let s = params.stiffness_scale(k);
    Ok(gel_tensor_2d(params).map(|row| row.map(|v| s * v)))
}

/// Energy weights of the Voigt components: the tensor contraction counts
/// the off-diagonal shear twice.
pub const VOIGT_WEIGHTS: [f64; 3] = [1.0, 1.0, 2.0];

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Assumption {
    /// Positive model constants.
    Constants,
    /// Non-negative, semiconvex double well.
    DoubleWell,
    /// Non-negative, bounded latent-heat interpolation.
    LatentHeat,
    /// Positive definite elasticity with ramp in `[0, 1]`.
    Elasticity,
    /// Bounded, Lipschitz eigenstrain.
    Eigenstrain,
}

impl fmt::Display for Assumption {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let tag = match self {
            Assumption::Constants => "constants",
            Assumption::DoubleWell => "double well",
            Assumption::LatentHeat => "latent heat",
            Assumption::Elasticity => "elasticity",
            Assumption::Eigenstrain => "eigenstrain",
        };
        f.write_str(tag)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Violation {
    pub assumption: Assumption,
    pub detail: String,
}

impl fmt::Display for Violation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "({}) {}", self.assumption, self.detail)
    }
}

const SAMPLES: usize = 601;
const WIDE: (f64, f64) = (-3.0, 3.0);
const PHYSICAL: (f64, f64) = (-1.0, 1.0);
const SEMICONVEXITY: f64 = 1.0;
const LAW_BOUND: f64 = 1e12;

fn samples((lo, hi): (f64, f64)) -> impl Iterator<Item = f64> {
    (0..SAMPLES).map(move |i| lo + (hi - lo) * i as f64 / (SAMPLES - 1) as f64)
}

/// Sample the model assumptions; returns every violation found.
///
/// The double well and eigenstrain are sampled on `[-3, 3]`. Non-negativity of
/// the latent-heat interpolation is checked on the physical range `[-1, 1]`,
/// since the affine law used in practice changes sign beyond it. The critical
/// temperature only needs to be finite.
pub fn validate(params: &ModelParams, laws: &MaterialLaws) -> Vec<Violation> {
    let mut out = Vec::new();
    let mut flag = |assumption, detail: String| out.push(Violation { assumption, detail });

    for (name, v) in [
        ("alpha", params.alpha),
        ("beta", params.beta),
        ("gamma", params.gamma),
        ("delta", params.delta),
        ("epsilon", params.epsilon),
        ("lambda", params.lambda),
        ("zeta", params.zeta),
    ] {
        if !(v > 0.0 && v.is_finite()) {
            flag(
                Assumption::Constants,
                format!("{name} = {v} must be positive"),
            );
        }
    }
    if !params.theta_c.is_finite() {
        flag(
            Assumption::Constants,
            format!("theta_c = {} must be finite", params.theta_c),
        );
    }
    if !(params.kappa > 0.0 && params.kappa < 1.0) {
        flag(
            Assumption::Elasticity,
            format!("kappa = {} must lie in (0, 1)", params.kappa),
        );
    }
    if !(params.phi_gel > -1.0 && params.phi_gel < 1.0) {
        flag(
            Assumption::Elasticity,
            format!("phi_gel = {} must lie in (-1, 1)", params.phi_gel),
        );
    }
    if !(params.young > 0.0 && params.young.is_finite()) {
        flag(
            Assumption::Elasticity,
            format!("young = {} must be positive", params.young),
        );
    }
    if !(params.poisson > 0.0 && params.poisson < 0.5) {
        flag(
            Assumption::Elasticity,
            format!("poisson = {} must lie in (0, 1/2)", params.poisson),
        );
    }

    let dq = 1e-6;
    if let Some(s) = samples(WIDE).find(|&s| !((laws.potential)(s) >= 0.0)) {
        flag(
            Assumption::DoubleWell,
            format!("W({s}) = {} is negative", (laws.potential)(s)),
        );
    }
    if let Some(s) = samples(WIDE).find(|&s| {
        let w2 = ((laws.potential_prime)(s + dq) - (laws.potential_prime)(s - dq)) / (2.0 * dq);
        w2 < -SEMICONVEXITY - 1e-6
    }) {
        flag(
            Assumption::DoubleWell,
            format!("W'' below -{SEMICONVEXITY} at s = {s}"),
        );
    }

    if let Some(s) = samples(PHYSICAL).find(|&s| !((laws.latent)(s) >= 0.0)) {
        flag(
            Assumption::LatentHeat,
            format!("P({s}) = {} is negative", (laws.latent)(s)),
        );
    }
    if let Some(s) = samples(WIDE).find(|&s| {
        !((laws.latent)(s).abs() < LAW_BOUND && (laws.latent_prime)(s).abs() < LAW_BOUND)
    }) {
        flag(
            Assumption::LatentHeat,
            format!("P or p unbounded at s = {s}"),
        );
    }

    if let Some(s) = samples(WIDE).find(|&s| !(0.0..=1.0).contains(&(laws.stiffness_ramp)(s))) {
        flag(
            Assumption::Elasticity,
            format!("k({s}) = {} outside [0, 1]", (laws.stiffness_ramp)(s)),
        );
    }
    if (laws.stiffness_ramp)(-1.0) != 0.0 || (laws.stiffness_ramp)(1.0) != 1.0 {
        flag(
            Assumption::Elasticity,
            "k must satisfy k(-1) = 0 and k(1) = 1".into(),
        );
    }

    let pts: Vec<f64> = samples(WIDE).collect();
    if pts
        .iter()
        .any(|&s| !((laws.eigenstrain)(s).abs() < LAW_BOUND))
    {
        flag(Assumption::Eigenstrain, "m is unbounded on [-3, 3]".into());
    }
    let lipschitz = pts
        .windows(2)
        .map(|w| ((laws.eigenstrain)(w[1]) - (laws.eigenstrain)(w[0])).abs() / (w[1] - w[0]))
        .fold(0.0, f64::max);
    if !(lipschitz < LAW_BOUND) {
        flag(
            Assumption::Eigenstrain,
            format!("m difference quotient {lipschitz} unbounded"),
        );
    }
    if (laws.eigenstrain)(-1.0).abs() > 1e-14 {
        flag(
            Assumption::Eigenstrain,
            format!("m(-1) = {} must vanish", (laws.eigenstrain)(-1.0)),
        );
    }
    out
}

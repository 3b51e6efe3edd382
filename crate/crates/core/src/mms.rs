//! Manufactured solutions for convergence studies.
//!
//! The exact fields are
//!
//! ```text
//! phi   = cos t cos(2 pi x) cos(pi y)
//! theta = sin t cos(pi x) cos(2 pi y)
//! u     = (sin t sin(pi x) sin(2 pi y), cos t sin(2 pi x) sin(pi y))
//! ```
//!
//! and the source terms are whatever the strong equations leave over when
//! these fields are substituted. Sources enter each step as load vectors at
//! the new time level; numerical fields are compared with nodal interpolants
//! of the exact ones.

use std::f64::consts::PI;
use std::fmt::Write as _;

use crate::error::{Error, Result};
use crate::fem::{fitted_order, FemSpace};
use crate::linalg::SolverConfig;
use crate::mesh::Mesh;
use crate::model::{MaterialLaws, ModelParams};
use crate::sav::{
    self, Algorithm, Forcing, ForcingProvider, InitMode, RunOptions, SavScheme, State,
};

/// Exact fields and the matching source terms for one parameter set.
#[derive(Clone)]
pub struct ManufacturedCase {
    pub params: ModelParams,
    pub laws: MaterialLaws,
}

impl ManufacturedCase {
    pub fn new(params: ModelParams) -> Self {
        Self {
            laws: MaterialLaws::standard(&params),
            params,
        }
    }

    pub fn exact_phi(&self, p: [f64; 2], t: f64) -> f64 {
        t.cos() * (2.0 * PI * p[0]).cos() * (PI * p[1]).cos()
    }

    pub fn exact_theta(&self, p: [f64; 2], t: f64) -> f64 {
        t.sin() * (PI * p[0]).cos() * (2.0 * PI * p[1]).cos()
    }

    pub fn exact_u(&self, p: [f64; 2], t: f64) -> [f64; 2] {
        [
            t.sin() * (PI * p[0]).sin() * (2.0 * PI * p[1]).sin(),
            t.cos() * (2.0 * PI * p[0]).sin() * (PI * p[1]).sin(),
        ]
    }

    fn grad_phi(&self, p: [f64; 2], t: f64) -> [f64; 2] {
        let (x, y) = (p[0], p[1]);
        [
            -2.0 * PI * t.cos() * (2.0 * PI * x).sin() * (PI * y).cos(),
            -PI * t.cos() * (2.0 * PI * x).cos() * (PI * y).sin(),
        ]
    }

    fn grad_theta(&self, p: [f64; 2], t: f64) -> [f64; 2] {
        let (x, y) = (p[0], p[1]);
        [
            -PI * t.sin() * (PI * x).sin() * (2.0 * PI * y).cos(),
            -2.0 * PI * t.sin() * (PI * x).cos() * (2.0 * PI * y).sin(),
        ]
    }

    /// Source of the phase equation:
    /// `alpha phi_t - lambda eps lap phi + (lambda / eps) W'(phi) + gamma (theta - theta_c) p(phi)`.
    pub fn src_phi(&self, p: [f64; 2], t: f64) -> f64 {
        let c = &self.params;
        let phi = self.exact_phi(p, t);
        let phi_t = -t.sin() * (2.0 * PI * p[0]).cos() * (PI * p[1]).cos();
        let lap = -5.0 * PI * PI * phi;
        c.alpha * phi_t - c.lambda * c.epsilon * lap
            + c.lambda / c.epsilon * (self.laws.potential_prime)(phi)
            + c.gamma * (self.exact_theta(p, t) - c.theta_c) * (self.laws.latent_prime)(phi)
    }

    /// Source of the temperature equation: `delta theta_t - gamma p(phi) phi_t - lap theta`.
    pub fn src_theta(&self, p: [f64; 2], t: f64) -> f64 {
        let c = &self.params;
        let (x, y) = (p[0], p[1]);
        let phi = self.exact_phi(p, t);
        let phi_t = -t.sin() * (2.0 * PI * x).cos() * (PI * y).cos();
        let theta_t = t.cos() * (PI * x).cos() * (2.0 * PI * y).cos();
        let lap = -5.0 * PI * PI * self.exact_theta(p, t);
        c.delta * theta_t - c.gamma * (self.laws.latent_prime)(phi) * phi_t - lap
    }

    /// Body force `-div sigma` with
    /// `sigma = c(phi) (lam_L div u I + 2 mu E(u) - (2 lam_L + 2 mu) s I)`,
    /// `c = kappa + k(phi)(1 - kappa)` and `s = m(phi) - beta theta`
    /// (the reference temperature is zero since `theta(0) = 0`).
    pub fn src_u(&self, p: [f64; 2], t: f64) -> [f64; 2] {
        let c = &self.params;
        let (lam, mu) = c.lame();
        let (x, y) = (p[0], p[1]);
        let (st, ct) = (t.sin(), t.cos());
        let (sx, cx, s2x, c2x) = (
            (PI * x).sin(),
            (PI * x).cos(),
            (2.0 * PI * x).sin(),
            (2.0 * PI * x).cos(),
        );
        let (sy, cy, s2y, c2y) = (
            (PI * y).sin(),
            (PI * y).cos(),
            (2.0 * PI * y).sin(),
            (2.0 * PI * y).cos(),
        );

        let u = self.exact_u(p, t);
        // first derivatives
        let u1x = st * PI * cx * s2y;
        let u1y = st * 2.0 * PI * sx * c2y;
        let u2x = ct * 2.0 * PI * c2x * sy;
        let u2y = ct * PI * s2x * cy;
        // second derivatives
        let u1xx = -PI * PI * u[0];
        let u1yy = -4.0 * PI * PI * u[0];
        let u1xy = st * 2.0 * PI * PI * cx * c2y;
        let u2xx = -4.0 * PI * PI * u[1];
        let u2yy = -PI * PI * u[1];
        let u2xy = ct * 2.0 * PI * PI * c2x * cy;

        let phi = self.exact_phi(p, t);
        let theta = self.exact_theta(p, t);
        let gphi = self.grad_phi(p, t);
        let gtheta = self.grad_theta(p, t);
        let s = (self.laws.eigenstrain)(phi) - c.beta * theta;
        let ds = (self.laws.eigenstrain_prime)(phi);
        let grad_s = [
            ds * gphi[0] - c.beta * gtheta[0],
            ds * gphi[1] - c.beta * gtheta[1],
        ];
        let coef = c.kappa + (self.laws.stiffness_ramp)(phi) * (1.0 - c.kappa);
        let dcoef = (1.0 - c.kappa) * (self.laws.stiffness_ramp_prime)(phi);
        let grad_c = [dcoef * gphi[0], dcoef * gphi[1]];

        let div = u1x + u2y;
        let trace = 2.0 * lam + 2.0 * mu;
        let tau0 = [
            [lam * div + 2.0 * mu * u1x - trace * s, mu * (u1y + u2x)],
            [mu * (u1y + u2x), lam * div + 2.0 * mu * u2y - trace * s],
        ];
        let grad_div = [u1xx + u2xy, u1xy + u2yy];
        let lap_u = [u1xx + u1yy, u2xx + u2yy];
        let mut out = [0.0; 2];
        for i in 0..2 {
            let div_tau0 = (lam + mu) * grad_div[i] + mu * lap_u[i] - trace * grad_s[i];
            let div_sigma = coef * div_tau0 + tau0[i][0] * grad_c[0] + tau0[i][1] * grad_c[1];
            out[i] = -div_sigma;
        }
        out
    }

    fn nodal(&self, space: &FemSpace, f: impl Fn([f64; 2]) -> f64) -> Vec<f64> {
        space.mesh().nodes.iter().map(|&p| f(p)).collect()
    }
}

impl ForcingProvider for ManufacturedCase {
    fn forcing(&self, space: &FemSpace, t: f64) -> Result<Forcing> {
        Ok(Forcing {
            phi: Some(space.load_from_nodal(&self.nodal(space, |p| self.src_phi(p, t)))),
            heat: Some(space.load_from_nodal(&self.nodal(space, |p| self.src_theta(p, t)))),
            body: Some(
                space
                    .mesh()
                    .nodes
                    .iter()
                    .map(|&p| self.src_u(p, t))
                    .collect(),
            ),
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Variable {
    Phi,
    Theta,
    U,
}

impl Variable {
    pub const ALL: [Variable; 3] = [Variable::Phi, Variable::Theta, Variable::U];

    pub fn name(self) -> &'static str {
        match self {
            Variable::Phi => "phi",
            Variable::Theta => "theta",
            Variable::U => "u",
        }
    }
}

/// `L2` is the max over time levels of the L2 norm, `H1` likewise for the
/// H1 seminorm.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Norm {
    L2,
    H1,
}

impl Norm {
    pub const ALL: [Norm; 2] = [Norm::L2, Norm::H1];

    pub fn name(self) -> &'static str {
        match self {
            Norm::L2 => "linf_l2",
            Norm::H1 => "linf_h1",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SweepKind {
    Spatial,
    Temporal,
}

impl SweepKind {
    pub fn name(self) -> &'static str {
        match self {
            SweepKind::Spatial => "spatial",
            SweepKind::Temporal => "temporal",
        }
    }
}

/// Errors of one `(h, tau)` run.
#[derive(Debug, Clone, PartialEq)]
pub struct RunErrors {
    pub n_per_side: usize,
    pub h: f64,
    pub tau: f64,
    /// Indexed `[variable][norm]`; empty when the run failed.
    pub values: Option<[[f64; 2]; 3]>,
    pub failure: Option<String>,
}

impl RunErrors {
    pub fn get(&self, var: Variable, norm: Norm) -> Option<f64> {
        self.values.map(|v| v[var as usize][norm as usize])
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ErrorReport {
    pub kind: SweepKind,
    pub runs: Vec<RunErrors>,
}

impl ErrorReport {
    /// The parameter swept: `h` for spatial sweeps, `tau` for temporal ones.
    pub fn parameter(&self, run: &RunErrors) -> f64 {
        match self.kind {
            SweepKind::Spatial => run.h,
            SweepKind::Temporal => run.tau,
        }
    }

    /// Least-squares log-log slope over the last three runs. `None` when
    /// fewer than two of them succeeded.
    pub fn order(&self, var: Variable, norm: Norm) -> Option<f64> {
        let tail = &self.runs[self.runs.len().saturating_sub(3)..];
        let (params, errs): (Vec<f64>, Vec<f64>) = tail
            .iter()
            .filter_map(|r| r.get(var, norm).map(|e| (self.parameter(r), e)))
            .unzip();
        (params.len() >= 2).then(|| fitted_order(&params, &errs))
    }

    /// One row per `(h, tau, variable, norm)`.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("h,tau,variable,norm,error\n");
        for r in &self.runs {
            for var in Variable::ALL {
                for norm in Norm::ALL {
                    let e = r
                        .get(var, norm)
                        .map_or_else(|| "nan".to_string(), |e| format!("{e:.17e}"));
                    let _ = writeln!(
                        out,
                        "{:.17e},{:.17e},{},{},{}",
                        r.h,
                        r.tau,
                        var.name(),
                        norm.name(),
                        e
                    );
                }
            }
        }
        out
    }

    pub fn table(&self) -> String {
        let mut out = String::new();
        let _ = writeln!(out, "{} sweep", self.kind.name());
        let _ = write!(out, "{:>10} {:>10}", "h", "tau");
        for var in Variable::ALL {
            for norm in Norm::ALL {
                let _ = write!(out, " {:>14}", format!("{}_{}", var.name(), norm.name()));
            }
        }
        out.push('\n');
        for r in &self.runs {
            let _ = write!(out, "{:>10.3e} {:>10.3e}", r.h, r.tau);
            for var in Variable::ALL {
                for norm in Norm::ALL {
                    match r.get(var, norm) {
                        Some(e) => {
                            let _ = write!(out, " {e:>14.4e}");
                        }
                        None => {
                            let _ = write!(out, " {:>14}", "failed");
                        }
                    }
                }
            }
            out.push('\n');
            if let Some(f) = &r.failure {
                let _ = writeln!(out, "  run failed: {f}");
            }
        }
        let _ = write!(out, "{:>21}", "order (last 3)");
        for var in Variable::ALL {
            for norm in Norm::ALL {
                match self.order(var, norm) {
                    Some(o) => {
                        let _ = write!(out, " {o:>14.3}");
                    }
                    None => {
                        let _ = write!(out, " {:>14}", "-");
                    }
                }
            }
        }
        out.push('\n');
        out
    }
}

/// Sweep settings shared by every run.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SweepSettings {
    pub t_final: f64,
    pub solver: SolverConfig,
    pub algorithm: Algorithm,
}

impl Default for SweepSettings {
    fn default() -> Self {
        Self {
            t_final: 1.0,
            solver: SolverConfig::default(),
            algorithm: Algorithm::Elimination,
        }
    }
}

/// Mesh resolutions of the spatial sweep at desk scale.
pub const DESK_SPATIAL_N: [usize; 4] = [8, 16, 32, 64];
/// Mesh resolutions of the full spatial sweep.
pub const FULL_SPATIAL_N: [usize; 5] = [8, 16, 32, 64, 128];
/// Inverse step sizes of the temporal sweep.
pub const TEMPORAL_STEPS: [usize; 5] = [10, 20, 40, 80, 160];

/// Run one `(n, tau)` pair to `t_final` and record the max-in-time errors
/// against nodal interpolants. Initial data are nodal interpolants.
pub fn run_pair(
    case: &ManufacturedCase,
    n: usize,
    tau: f64,
    settings: &SweepSettings,
) -> Result<RunErrors> {
    let space = FemSpace::new(Mesh::build_uniform(n)?)?;
    run_on_space(case, &space, tau, settings)
}

/// As [`run_pair`], also returning the final state.
pub fn run_on_space(
    case: &ManufacturedCase,
    space: &FemSpace,
    tau: f64,
    settings: &SweepSettings,
) -> Result<RunErrors> {
    run_with_state(case, space, tau, settings).map(|(e, _)| e)
}

pub(crate) fn run_with_state(
    case: &ManufacturedCase,
    space: &FemSpace,
    tau: f64,
    settings: &SweepSettings,
) -> Result<(RunErrors, State)> {
    let scheme = SavScheme::new(space, case.params, case.laws.clone(), settings.solver)?
        .with_algorithm(settings.algorithm);
    let phi0 = |p: [f64; 2]| case.exact_phi(p, 0.0);
    let theta0 = |p: [f64; 2]| case.exact_theta(p, 0.0);
    let mut init = scheme.initialize(&phi0, &theta0, InitMode::Nodal)?;
    // u at t = 0 sees the manufactured body force as well
    let theta_ref = init.theta.clone();
    let body: Vec<[f64; 2]> = space
        .mesh()
        .nodes
        .iter()
        .map(|&p| case.src_u(p, 0.0))
        .collect();
    init.u = scheme.displacement(&init, &theta_ref, Some(&body))?;

    let options = RunOptions {
        t_final: settings.t_final,
        tau,
        elasticity_stride: 1,
        snapshot_stride: 1,
    };
    let mut worst = [[0.0f64; 2]; 3];
    let nodes = &space.mesh().nodes;
    let mut hook = |snap: &sav::Snapshot<'_>| -> Result<()> {
        let t = snap.state.t;
        let e_phi: Vec<f64> = nodes
            .iter()
            .zip(&snap.state.phi)
            .map(|(&p, v)| v - case.exact_phi(p, t))
            .collect();
        let e_theta: Vec<f64> = nodes
            .iter()
            .zip(&snap.state.theta)
            .map(|(&p, v)| v - case.exact_theta(p, t))
            .collect();
        let (e_ux, e_uy): (Vec<f64>, Vec<f64>) = nodes
            .iter()
            .zip(&snap.state.u)
            .map(|(&p, v)| {
                let ex = case.exact_u(p, t);
                (v[0] - ex[0], v[1] - ex[1])
            })
            .unzip();
        let now = [
            [
                space.l2_norm_sq(&e_phi).sqrt(),
                space.h1_semi_sq(&e_phi).sqrt(),
            ],
            [
                space.l2_norm_sq(&e_theta).sqrt(),
                space.h1_semi_sq(&e_theta).sqrt(),
            ],
            [
                (space.l2_norm_sq(&e_ux) + space.l2_norm_sq(&e_uy)).sqrt(),
                (space.h1_semi_sq(&e_ux) + space.h1_semi_sq(&e_uy)).sqrt(),
            ],
        ];
        for (w, n) in worst.iter_mut().flatten().zip(now.iter().flatten()) {
            *w = w.max(*n);
        }
        Ok(())
    };
    let out = sav::run(&scheme, init, case, &options, &mut hook)?;
    let n = space.mesh().n_per_side;
    Ok((
        RunErrors {
            n_per_side: n,
            h: 1.0 / n as f64,
            tau,
            values: Some(worst),
            failure: None,
        },
        out.final_state,
    ))
}

fn annotate(n: usize, tau: f64, result: Result<RunErrors>) -> RunErrors {
    result.unwrap_or_else(|e: Error| RunErrors {
        n_per_side: n,
        h: 1.0 / n as f64,
        tau,
        values: None,
        failure: Some(e.to_string()),
    })
}

/// Vary the mesh at fixed `tau`. Failed runs are recorded, not propagated.
pub fn spatial_sweep(
    case: &ManufacturedCase,
    tau: f64,
    ns: &[usize],
    settings: &SweepSettings,
) -> ErrorReport {
    ErrorReport {
        kind: SweepKind::Spatial,
        runs: ns
            .iter()
            .map(|&n| annotate(n, tau, run_pair(case, n, tau, settings)))
            .collect(),
    }
}

/// Vary the step at a fixed mesh. Failed runs are recorded, not propagated.
pub fn temporal_sweep(
    case: &ManufacturedCase,
    n: usize,
    taus: &[f64],
    settings: &SweepSettings,
) -> ErrorReport {
    let runs = match Mesh::build_uniform(n).and_then(FemSpace::new) {
        Ok(space) => taus
            .iter()
            .map(|&tau| annotate(n, tau, run_on_space(case, &space, tau, settings)))
            .collect(),
        Err(e) => taus
            .iter()
            .map(|&tau| annotate(n, tau, Err(Error::InvalidState(e.to_string()))))
            .collect(),
    };
    ErrorReport {
        kind: SweepKind::Temporal,
        runs,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    const FD: f64 = 5e-3;

    /// Sixth-order central first derivative along `dir`.
    fn d1(f: &dyn Fn([f64; 2]) -> f64, p: [f64; 2], dir: usize) -> f64 {
        let at = |k: f64| {
            let mut q = p;
            q[dir] += k * FD;
            f(q)
        };
        (45.0 * (at(1.0) - at(-1.0)) - 9.0 * (at(2.0) - at(-2.0)) + (at(3.0) - at(-3.0)))
            / (60.0 * FD)
    }

    /// Sixth-order central second derivative along `dir`.
    fn d2(f: &dyn Fn([f64; 2]) -> f64, p: [f64; 2], dir: usize) -> f64 {
        let at = |k: f64| {
            let mut q = p;
            q[dir] += k * FD;
            f(q)
        };
        (270.0 * (at(1.0) + at(-1.0)) - 27.0 * (at(2.0) + at(-2.0)) + 2.0 * (at(3.0) + at(-3.0))
            - 490.0 * at(0.0))
            / (180.0 * FD * FD)
    }

    fn dt(f: &dyn Fn(f64) -> f64, t: f64) -> f64 {
        let h = 1e-3;
        (45.0 * (f(t + h) - f(t - h)) - 9.0 * (f(t + 2.0 * h) - f(t - 2.0 * h))
            + (f(t + 3.0 * h) - f(t - 3.0 * h)))
            / (60.0 * h)
    }

    fn lap(f: &dyn Fn([f64; 2]) -> f64, p: [f64; 2]) -> f64 {
        d2(f, p, 0) + d2(f, p, 1)
    }

    /// Strong-form residuals evaluated entirely by finite differences of
    /// the exact fields and the material laws.
    fn fd_residuals(case: &ManufacturedCase, p: [f64; 2], t: f64) -> (f64, f64, [f64; 2]) {
        let c = &case.params;
        let laws = &case.laws;
        let phi = |q: [f64; 2]| case.exact_phi(q, t);
        let theta = |q: [f64; 2]| case.exact_theta(q, t);
        let phi_t = dt(&|s| case.exact_phi(p, s), t);
        let theta_t = dt(&|s| case.exact_theta(p, s), t);
        let ph = phi(p);
        let r_phi = c.alpha * phi_t - c.lambda * c.epsilon * lap(&phi, p)
            + c.lambda / c.epsilon * (laws.potential_prime)(ph)
            + c.gamma * (theta(p) - c.theta_c) * (laws.latent_prime)(ph)
            - case.src_phi(p, t);
        let r_theta = c.delta * theta_t
            - c.gamma * (laws.latent_prime)(ph) * phi_t
            - lap(&theta, p)
            - case.src_theta(p, t);

        // stress from finite-difference strains, divergence by finite differences again
        let (lam, mu) = c.lame();
        let sigma = |q: [f64; 2], i: usize, j: usize| -> f64 {
            let u = |k: usize| move |r: [f64; 2]| case.exact_u(r, t)[k];
            let grad = [
                [d1(&u(0), q, 0), d1(&u(0), q, 1)],
                [d1(&u(1), q, 0), d1(&u(1), q, 1)],
            ];
            let strain = 0.5 * (grad[i][j] + grad[j][i]);
            let div = grad[0][0] + grad[1][1];
            let f = case.exact_phi(q, t);
            let s = (laws.eigenstrain)(f) - c.beta * case.exact_theta(q, t);
            let coef = c.kappa + (laws.stiffness_ramp)(f) * (1.0 - c.kappa);
            let delta = if i == j { 1.0 } else { 0.0 };
            coef * (lam * div * delta + 2.0 * mu * strain - (2.0 * lam + 2.0 * mu) * s * delta)
        };
        let src = case.src_u(p, t);
        let mut r_u = [0.0; 2];
        for i in 0..2 {
            let div_sigma = d1(&|q| sigma(q, i, 0), p, 0) + d1(&|q| sigma(q, i, 1), p, 1);
            r_u[i] = -div_sigma - src[i];
        }
        (r_phi, r_theta, r_u)
    }

    #[test]
    fn sources_match_finite_difference_residuals() {
        let case = ManufacturedCase::new(ModelParams::manufactured());
        let gel = case.params.phi_gel;
        let mut rng = ChaCha8Rng::seed_from_u64(2024);
        let mut checked = 0;
        while checked < 60 {
            let p = [rng.gen_range(0.05..0.95), rng.gen_range(0.05..0.95)];
            let t = rng.gen_range(0.05..1.0);
            let f = case.exact_phi(p, t);
            // the stiffness ramp has kinks at phi_gel and 1
            if (f - gel).abs() < 0.15 || (f - 1.0).abs() < 0.15 {
                continue;
            }
            let (rp, rt, ru) = fd_residuals(&case, p, t);
            let scale = 1.0 + case.src_phi(p, t).abs();
            assert!(rp.abs() <= 1e-8 * scale, "phi residual {rp} at {p:?}, {t}");
            assert!(
                rt.abs() <= 1e-8 * (1.0 + case.src_theta(p, t).abs()),
                "theta residual {rt}"
            );
            let su = case.src_u(p, t);
            for i in 0..2 {
                assert!(
                    ru[i].abs() <= 1e-8 * (1.0 + su[i].abs()),
                    "u residual {ru:?} at {p:?}, {t}"
                );
            }
            checked += 1;
        }
    }

    #[test]
    fn heat_source_at_reference_point() {
        let case = ManufacturedCase::new(ModelParams::manufactured());
        let (p, t) = ([0.25, 0.25], 0.5);
        let c = &case.params;
        // fourth-order stencils with a coarser step
        let h = 1e-3;
        let theta = |q: [f64; 2], s: f64| case.exact_theta(q, s);
        let d2 = |dir: usize| {
            let at = |k: f64| {
                let mut q = p;
                q[dir] += k * h;
                theta(q, t)
            };
            (-at(2.0) + 16.0 * at(1.0) - 30.0 * at(0.0) + 16.0 * at(-1.0) - at(-2.0))
                / (12.0 * h * h)
        };
        let ddt = |f: &dyn Fn(f64) -> f64| {
            (-f(t + 2.0 * h) + 8.0 * f(t + h) - 8.0 * f(t - h) + f(t - 2.0 * h)) / (12.0 * h)
        };
        let theta_t = ddt(&|s| theta(p, s));
        let phi_t = ddt(&|s| case.exact_phi(p, s));
        let pp = (case.laws.latent_prime)(case.exact_phi(p, t));
        let fd = c.delta * theta_t - c.gamma * pp * phi_t - (d2(0) + d2(1));
        assert_abs_diff_eq!(case.src_theta(p, t), fd, epsilon = 1e-6);
    }

    #[test]
    fn exact_fields_satisfy_boundary_conditions() {
        let case = ManufacturedCase::new(ModelParams::manufactured());
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        for _ in 0..100 {
            let s: f64 = rng.gen_range(0.0..1.0);
            let t: f64 = rng.gen_range(0.0..2.0);
            for (p, normal) in [([0.0, s], 0), ([1.0, s], 0), ([s, 0.0], 1), ([s, 1.0], 1)] {
                assert!(case.grad_phi(p, t)[normal].abs() <= 1e-12);
                assert!(case.grad_theta(p, t)[normal].abs() <= 1e-12);
                let u = case.exact_u(p, t);
                assert!(u[0].abs() <= 1e-12 && u[1].abs() <= 1e-12);
            }
        }
        // analytic gradients agree with finite differences
        let p = [0.3, 0.7];
        let g = case.grad_phi(p, 0.4);
        assert_abs_diff_eq!(g[0], d1(&|q| case.exact_phi(q, 0.4), p, 0), epsilon = 1e-9);
        assert_abs_diff_eq!(g[1], d1(&|q| case.exact_phi(q, 0.4), p, 1), epsilon = 1e-9);
        let g = case.grad_theta(p, 0.4);
        assert_abs_diff_eq!(
            g[0],
            d1(&|q| case.exact_theta(q, 0.4), p, 0),
            epsilon = 1e-9
        );
        assert_abs_diff_eq!(
            g[1],
            d1(&|q| case.exact_theta(q, 0.4), p, 1),
            epsilon = 1e-9
        );
    }

    #[test]
    fn initial_values() {
        let case = ManufacturedCase::new(ModelParams::manufactured());
        assert_eq!(case.exact_phi([0.0, 0.0], 0.0), 1.0);
        assert_eq!(case.exact_theta([0.3, 0.1], 0.0), 0.0);
        assert_abs_diff_eq!(case.exact_phi([0.5, 0.0], 0.0), -1.0, epsilon = 1e-15);
    }

    #[test]
    fn halving_both_parameters_reduces_error() {
        let case = ManufacturedCase::new(ModelParams::manufactured());
        let s = SweepSettings::default();
        let coarse = run_pair(&case, 16, 0.05, &s).unwrap();
        let fine = run_pair(&case, 32, 0.025, &s).unwrap();
        let ratio = coarse.get(Variable::Phi, Norm::L2).unwrap()
            / fine.get(Variable::Phi, Norm::L2).unwrap();
        assert!((1.7..=4.5).contains(&ratio), "ratio {ratio}");
    }

    #[test]
    fn auxiliary_drift_decreases_with_tau() {
        let case = ManufacturedCase::new(ModelParams::manufactured());
        let space = FemSpace::new(Mesh::build_uniform(8).unwrap()).unwrap();
        let settings = SweepSettings::default();
        let scheme =
            SavScheme::new(&space, case.params, case.laws.clone(), settings.solver).unwrap();
        let drifts: Vec<f64> = [10usize, 20, 40]
            .iter()
            .map(|&k| {
                let (_, state) = run_with_state(&case, &space, 1.0 / k as f64, &settings).unwrap();
                (state.q - scheme.auxiliary(&state.phi).unwrap()).abs()
            })
            .collect();
        assert!(drifts[0] < 1.0);
        for w in drifts.windows(2) {
            assert!(w[1] < 0.75 * w[0], "{drifts:?}");
        }
    }

    #[test]
    fn report_orders_and_csv() {
        let mk = |h: f64, e: f64| RunErrors {
            n_per_side: (1.0 / h) as usize,
            h,
            tau: 0.01,
            values: Some([[e, e.sqrt()]; 3]),
            failure: None,
        };
        let report = ErrorReport {
            kind: SweepKind::Spatial,
            runs: vec![
                mk(0.5, 1.0),
                mk(0.25, 0.25),
                mk(0.125, 0.0625),
                mk(0.0625, 0.015625),
            ],
        };
        assert_abs_diff_eq!(
            report.order(Variable::Phi, Norm::L2).unwrap(),
            2.0,
            epsilon = 1e-12
        );
        assert_abs_diff_eq!(
            report.order(Variable::U, Norm::H1).unwrap(),
            1.0,
            epsilon = 1e-12
        );
        let csv = report.to_csv();
        assert_eq!(csv.lines().count(), 1 + 4 * 6);
        assert!(csv.starts_with("h,tau,variable,norm,error\n"));
        assert!(report.table().contains("order"));
    }

    #[test]
    fn failed_runs_are_annotated() {
        let case = ManufacturedCase::new(ModelParams::manufactured());
        let report = temporal_sweep(&case, 4, &[0.3], &SweepSettings::default());
        assert!(report.runs[0].values.is_none());
        assert!(report.runs[0]
            .failure
            .as_ref()
            .unwrap()
            .contains("multiple"));
        assert!(report.order(Variable::Phi, Norm::L2).is_none());
    }
}

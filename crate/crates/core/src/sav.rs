//! First-order scalar-auxiliary-variable (SAV) time stepping for the coupled
//! phase/temperature system, with the quasi-static displacement recomputed
//! from the new fields.
//!
//! One step solves, for nodal vectors `phi`, `theta` and the scalar `q`,
//!
//! ```text
//! alpha M (phi - phi0) + tau q M b + tau gamma P (theta - theta_c) + lambda eps tau S phi = tau f_phi
//! delta M (theta - theta0) - gamma P (phi - phi0) + tau S theta                        = tau f_theta
//! q - q0 - (M b . (phi - phi0)) / (2 lambda)                                           = 0
//! ```
//!
//! with `b = lambda W'(phi0) / (eps Q(phi0))` and `P` the mass matrix weighted by
//! `p(phi0)`. The default path eliminates `theta` through `(delta M + tau S)^-1`
//! and `q` through a Sherman-Morrison correction, so only SPD solves remain.

use crate::elasticity::ElasticityAssembler;
use crate::error::{Error, Result};
use crate::fem::{quadratic_form, FemSpace, QuadratureRule, ScalarField};
use crate::linalg::{
    axpy, cg_solve, dot, minres_solve, pcg_solve, Combination, InverseOperator, LinearOperator,
    PreparedPreconditioner, Sandwich, SolverConfig, SparseMatrix,
};
use crate::model::{MaterialLaws, ModelParams};

/// One time level of the discrete solution.
#[derive(Debug, Clone, PartialEq)]
pub struct State {
    pub phi: Vec<f64>,
    pub theta: Vec<f64>,
    pub q: f64,
    /// Nodal displacement, zero on the boundary.
    pub u: Vec<[f64; 2]>,
    pub t: f64,
}

/// Energy bookkeeping of one step.
///
/// `energy` is `(lambda eps / 2)|grad phi|^2 + lambda q^2 + (delta / 2)|theta - theta_c|^2`
/// at the new level; `dissipation` collects the non-negative numerical and
/// physical decrements, so that `energy - previous + dissipation` equals
/// `source_work`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EnergyRecord {
    pub t: f64,
    pub energy: f64,
    pub previous: f64,
    pub dissipation: f64,
    pub source_work: f64,
}

impl EnergyRecord {
    pub fn identity_residual(&self) -> f64 {
        self.energy - self.previous + self.dissipation
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, serde::Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum InitMode {
    /// Ritz projection of the initial data.
    #[default]
    Ritz,
    /// Nodal interpolation of the initial data.
    Nodal,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, serde::Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Algorithm {
    /// Schur elimination of temperature plus rank-one correction.
    #[default]
    Elimination,
    /// Symmetric block system of all unknowns solved with MINRES.
    Monolithic,
}

/// Load vectors (already integrated against the hat functions) entering one
/// step, plus a nodal body force for the displacement equation.
#[derive(Debug, Clone, Default)]
pub struct Forcing {
    pub phi: Option<Vec<f64>>,
    pub heat: Option<Vec<f64>>,
    pub body: Option<Vec<[f64; 2]>>,
}

/// Supplies the forcing at a given time.
pub trait ForcingProvider {
    fn forcing(&self, space: &FemSpace, t: f64) -> Result<Forcing>;
}

impl ForcingProvider for crate::source::SourceSpec {
    fn forcing(&self, space: &FemSpace, t: f64) -> Result<Forcing> {
        Ok(Forcing {
            heat: match self {
                crate::source::SourceSpec::None => None,
                _ => Some(self.load(space, t)?),
            },
            ..Default::default()
        })
    }
}

/// No forcing at all.
pub struct Unforced;

impl ForcingProvider for Unforced {
    fn forcing(&self, _: &FemSpace, _: f64) -> Result<Forcing> {
        Ok(Forcing::default())
    }
}

/// The discrete scheme bound to a space, parameters and solver settings.
pub struct SavScheme<'a> {
    space: &'a FemSpace,
    params: ModelParams,
    laws: MaterialLaws,
    config: SolverConfig,
    algorithm: Algorithm,
    rule: QuadratureRule,
    elasticity: ElasticityAssembler,
}

impl<'a> SavScheme<'a> {
    pub fn new(
        space: &'a FemSpace,
        params: ModelParams,
        laws: MaterialLaws,
        config: SolverConfig,
    ) -> Result<Self> {
        config.validate()?;
        Ok(Self {
            space,
            params,
            laws,
            config,
            algorithm: Algorithm::Elimination,
            rule: QuadratureRule::of_order(4)?,
            elasticity: ElasticityAssembler::new(space)?,
        })
    }

    pub fn with_algorithm(mut self, algorithm: Algorithm) -> Self {
        self.algorithm = algorithm;
        self
    }

    pub fn space(&self) -> &FemSpace {
        self.space
    }

    pub fn params(&self) -> &ModelParams {
        &self.params
    }

    pub fn laws(&self) -> &MaterialLaws {
        &self.laws
    }

    pub fn config(&self) -> &SolverConfig {
        &self.config
    }

    /// `Q_h(phi) = sqrt(int W(phi_h) / eps + 1)`, exact for the quartic well.
    pub fn auxiliary(&self, phi: &[f64]) -> Result<f64> {
        let integral = self
            .space
            .integrate_composed(phi, |s| (self.laws.potential)(s), &self.rule);
        let q = (integral / self.params.epsilon + 1.0).sqrt();
        if !(q >= 1.0 - 1e-12) {
            return Err(Error::InvalidState(format!(
                "auxiliary energy Q = {q} below 1"
            )));
        }
        Ok(q)
    }

    /// Modified energy of a state.
    pub fn energy(&self, state: &State) -> f64 {
        let p = &self.params;
        let shifted: Vec<f64> = state.theta.iter().map(|t| t - p.theta_c).collect();
        0.5 * p.lambda * p.epsilon * quadratic_form(self.space.stiffness(), &state.phi)
            + p.lambda * state.q * state.q
            + 0.5 * p.delta * quadratic_form(self.space.mass(), &shifted)
    }

    /// Initial state from continuous data; the displacement is solved once.
    pub fn initialize(
        &self,
        phi0: &dyn ScalarField,
        theta0: &dyn ScalarField,
        mode: InitMode,
    ) -> Result<State> {
        let (phi, theta) = match mode {
            InitMode::Ritz => (
                self.space.ritz_project(phi0, &self.config)?,
                self.space.ritz_project(theta0, &self.config)?,
            ),
            InitMode::Nodal => (
                self.space.nodal_interpolate(phi0),
                self.space.nodal_interpolate(theta0),
            ),
        };
        let q = self.auxiliary(&phi)?;
        let mut state = State {
            phi,
            theta,
            q,
            u: vec![[0.0; 2]; self.space.n_dofs()],
            t: 0.0,
        };
        let theta_ref = state.theta.clone();
        state.u = self.displacement(&state, &theta_ref, None)?;
        Ok(state)
    }

    /// Solve the quasi-static displacement for the fields of `state`, with
    /// reference temperature `theta_ref` and an optional nodal body force.
    pub fn displacement(
        &self,
        state: &State,
        theta_ref: &[f64],
        body: Option<&[[f64; 2]]>,
    ) -> Result<Vec<[f64; 2]>> {
        let mut system = self.elasticity.assemble(
            self.space,
            &self.params,
            &self.laws,
            &state.phi,
            &state.theta,
            theta_ref,
        )?;
        if let Some(b) = body {
            system.add_body_force(self.space, b)?;
        }
        let guess = (state.u.len() == self.space.n_dofs()).then_some(state.u.as_slice());
        system.solve(&self.config, guess)
    }

    /// Advance `(phi, theta, q)` by one step of size `tau`. The displacement
    /// is carried over unchanged; see [`SavScheme::displacement`].
    pub fn step(
        &self,
        state: &State,
        tau: f64,
        forcing: &Forcing,
    ) -> Result<(State, EnergyRecord)> {
        self.step_with_guess(state, tau, forcing, Some(&state.phi))
    }

    /// As [`SavScheme::step`], seeding the main phase solve with `guess`.
    pub fn step_with_guess(
        &self,
        state: &State,
        tau: f64,
        forcing: &Forcing,
        guess: Option<&[f64]>,
    ) -> Result<(State, EnergyRecord)> {
        if !(tau > 0.0) {
            return Err(Error::InvalidInput(format!(
                "time step {tau} must be positive"
            )));
        }
        let n = self.space.n_dofs();
        for v in [&state.phi, &state.theta] {
            if v.len() != n {
                return Err(Error::DimensionMismatch {
                    expected: n,
                    found: v.len(),
                });
            }
        }
        for v in [&forcing.phi, &forcing.heat].into_iter().flatten() {
            if v.len() != n {
                return Err(Error::DimensionMismatch {
                    expected: n,
                    found: v.len(),
                });
            }
        }

        let sys = StepSystem::build(self, state, tau)?;
        let zeros = vec![0.0; n];
        let f_phi = forcing.phi.as_deref().unwrap_or(&zeros);
        let f_heat = forcing.heat.as_deref().unwrap_or(&zeros);
        let (phi, theta) = match self.algorithm {
            Algorithm::Elimination => sys.solve_elimination(state, f_phi, f_heat, guess)?,
            Algorithm::Monolithic => sys.solve_monolithic(state, f_phi, f_heat)?,
        };

        let dphi: Vec<f64> = phi.iter().zip(&state.phi).map(|(a, b)| a - b).collect();
        let q = state.q + dot(&sys.g, &dphi) / (2.0 * self.params.lambda);
        let next = State {
            phi,
            theta,
            q,
            u: state.u.clone(),
            t: state.t + tau,
        };
        let record = self.energy_record(state, &next, tau, f_phi, f_heat);
        Ok((next, record))
    }

    fn energy_record(
        &self,
        prev: &State,
        next: &State,
        tau: f64,
        f_phi: &[f64],
        f_heat: &[f64],
    ) -> EnergyRecord {
        let p = &self.params;
        let m = self.space.mass();
        let s = self.space.stiffness();
        let dphi: Vec<f64> = next.phi.iter().zip(&prev.phi).map(|(a, b)| a - b).collect();
        let dtheta: Vec<f64> = next
            .theta
            .iter()
            .zip(&prev.theta)
            .map(|(a, b)| a - b)
            .collect();
        let dq = next.q - prev.q;
        let dissipation = p.alpha / tau * quadratic_form(m, &dphi)
            + tau * quadratic_form(s, &next.theta)
            + 0.5 * p.lambda * p.epsilon * quadratic_form(s, &dphi)
            + p.lambda * dq * dq
            + 0.5 * p.delta * quadratic_form(m, &dtheta);
        let shifted: Vec<f64> = next.theta.iter().map(|t| t - p.theta_c).collect();
        EnergyRecord {
            t: next.t,
            energy: self.energy(next),
            previous: self.energy(prev),
            dissipation,
            source_work: dot(f_phi, &dphi) + tau * dot(f_heat, &shifted),
        }
    }
}

/// Matrices and vectors frozen at the old level for one step.
pub(crate) struct StepSystem<'s> {
    scheme: &'s SavScheme<'s>,
    tau: f64,
    /// `M b`
    pub(crate) g: Vec<f64>,
    /// Mass matrix weighted by `p(phi0)`.
    pub(crate) latent: SparseMatrix,
    /// `delta M + tau S`
    pub(crate) heat: SparseMatrix,
    /// `alpha M + lambda eps tau S`
    pub(crate) phase: SparseMatrix,
}

impl<'s> StepSystem<'s> {
    fn build(scheme: &'s SavScheme<'s>, state: &State, tau: f64) -> Result<Self> {
        let p = &scheme.params;
        let space = scheme.space;
        let q_old = scheme.auxiliary(&state.phi)?;
        let b: Vec<f64> = state
            .phi
            .iter()
            .map(|&s| p.lambda * (scheme.laws.potential_prime)(s) / (p.epsilon * q_old))
            .collect();
        let g = space.load_from_nodal(&b);
        let pw: Vec<f64> = state
            .phi
            .iter()
            .map(|&s| (scheme.laws.latent_prime)(s))
            .collect();
        let latent = space.assemble_weighted_mass(&pw)?;
        let heat = space
            .mass()
            .linear_combination(p.delta, space.stiffness(), tau)?;
        let phase = space.mass().linear_combination(
            p.alpha,
            space.stiffness(),
            p.lambda * p.epsilon * tau,
        )?;
        Ok(Self {
            scheme,
            tau,
            g,
            latent,
            heat,
            phase,
        })
    }

    fn inner_config(&self) -> SolverConfig {
        let c = self.scheme.config;
        SolverConfig {
            rel_tolerance: 0.01 * c.rel_tolerance,
            ..c
        }
    }

    /// Right-hand side of the temperature solve, less the `gamma P phi` term:
    /// `delta M theta0 - gamma P phi0 + tau f_heat`.
    fn heat_rhs(&self, state: &State, f_heat: &[f64]) -> Vec<f64> {
        let p = &self.scheme.params;
        let mut r = self.scheme.space.load_from_nodal(&state.theta);
        r.iter_mut().for_each(|v| *v *= p.delta);
        let pphi = self.latent.spmv(&state.phi).expect("sized");
        axpy(-p.gamma, &pphi, &mut r);
        axpy(self.tau, f_heat, &mut r);
        r
    }

    /// `gamma theta_c P 1`, the critical-temperature part of the latent term.
    fn critical_load(&self) -> Vec<f64> {
        let p = &self.scheme.params;
        let ones = vec![1.0; self.g.len()];
        let mut r = self.latent.spmv(&ones).expect("sized");
        r.iter_mut().for_each(|v| *v *= p.gamma * p.theta_c);
        r
    }

    fn solve_elimination(
        &self,
        state: &State,
        f_phi: &[f64],
        f_heat: &[f64],
        guess: Option<&[f64]>,
    ) -> Result<(Vec<f64>, Vec<f64>)> {
        let p = &self.scheme.params;
        let cfg = &self.scheme.config;
        let tau = self.tau;
        let rank_coeff = tau / (2.0 * p.lambda);

        let inverse_heat = InverseOperator::new(&self.heat, self.inner_config());
        let schur = Sandwich::new(&self.latent, &inverse_heat);
        let x_op = Combination::new(vec![
            (1.0, &self.phase as &dyn LinearOperator),
            (tau * p.gamma * p.gamma, &schur),
        ])?;

        // d = alpha M phi0 - tau q0 g + rank_coeff (g . phi0) g + tau gamma theta_c P 1
        //     - tau gamma P (delta M + tau S)^-1 (delta M theta0 - gamma P phi0 + tau f_heat)
        //     + tau f_phi
        let mut d = self.scheme.space.load_from_nodal(&state.phi);
        d.iter_mut().for_each(|v| *v *= p.alpha);
        axpy(
            -tau * state.q + rank_coeff * dot(&self.g, &state.phi),
            &self.g,
            &mut d,
        );
        axpy(tau, &self.critical_load(), &mut d);
        let heat_rhs = self.heat_rhs(state, f_heat);
        let heat_part = cg_solve(
            &self.heat,
            &heat_rhs,
            &self.inner_config(),
            Some(&state.theta),
        )?
        .x;
        let coupled = self.latent.spmv(&heat_part)?;
        axpy(-tau * p.gamma, &coupled, &mut d);
        axpy(tau, f_phi, &mut d);

        // Precondition X with its explicit part plus a diagonal estimate of
        // the Schur term tau gamma^2 P H^-1 P.
        let schur_diagonal: Vec<f64> = self
            .latent
            .diagonal()
            .iter()
            .zip(self.heat.diagonal())
            .map(|(l, h)| tau * p.gamma * p.gamma * l * l / h)
            .collect();
        let approx = self.phase.with_added_diagonal(&schur_diagonal)?;
        let preconditioner = PreparedPreconditioner::for_matrix(&approx, cfg.preconditioner);
        let y_d = pcg_solve(&x_op, &d, cfg, guess, &preconditioner)?.x;
        let y_g = pcg_solve(&x_op, &self.g, cfg, None, &preconditioner)?.x;
        // (g . phi)(1 + rank_coeff g . X^-1 g) = g . X^-1 d
        let g_phi = dot(&self.g, &y_d) / (1.0 + rank_coeff * dot(&self.g, &y_g));
        let mut phi = y_d;
        axpy(-rank_coeff * g_phi, &y_g, &mut phi);

        let dphi: Vec<f64> = phi.iter().zip(&state.phi).map(|(a, b)| a - b).collect();
        let mut rhs = self.scheme.space.load_from_nodal(&state.theta);
        rhs.iter_mut().for_each(|v| *v *= p.delta);
        axpy(p.gamma, &self.latent.spmv(&dphi)?, &mut rhs);
        axpy(tau, f_heat, &mut rhs);
        let theta = cg_solve(&self.heat, &rhs, cfg, Some(&state.theta))?.x;
        Ok((phi, theta))
    }

    /// Symmetric block form of all `2 n + 1` unknowns:
    ///
    /// ```text
    /// [ alpha M + lambda eps tau S   tau gamma P        tau g        ] [phi  ]
    /// [ tau gamma P                  -tau (delta M + tau S)   0       ] [theta]
    /// [ tau g^T                      0                  -2 lambda tau ] [q    ]
    /// ```
    pub(crate) fn block_system(
        &self,
        state: &State,
        f_phi: &[f64],
        f_heat: &[f64],
    ) -> Result<(SparseMatrix, Vec<f64>)> {
        let p = &self.scheme.params;
        let tau = self.tau;
        let n = self.g.len();
        let mut t = Vec::with_capacity(3 * self.phase.nnz() + 2 * self.latent.nnz() + 2 * n + 1);
        for i in 0..n {
            t.extend(self.phase.row(i).map(|(j, v)| (i, j, v)));
            for (j, v) in self.latent.row(i) {
                t.push((i, n + j, tau * p.gamma * v));
                t.push((n + i, j, tau * p.gamma * v));
            }
            t.extend(self.heat.row(i).map(|(j, v)| (n + i, n + j, -tau * v)));
            t.push((i, 2 * n, tau * self.g[i]));
            t.push((2 * n, i, tau * self.g[i]));
        }
        t.push((2 * n, 2 * n, -2.0 * p.lambda * tau));
        let k = SparseMatrix::from_triplets(2 * n + 1, 2 * n + 1, &t)?;

        let mut rhs = vec![0.0; 2 * n + 1];
        let mphi = self.scheme.space.load_from_nodal(&state.phi);
        let crit = self.critical_load();
        for i in 0..n {
            rhs[i] = p.alpha * mphi[i] + tau * crit[i] + tau * f_phi[i];
        }
        let heat_rhs = self.heat_rhs(state, f_heat);
        for i in 0..n {
            rhs[n + i] = -tau * heat_rhs[i];
        }
        rhs[2 * n] = -2.0 * p.lambda * tau * state.q + tau * dot(&self.g, &state.phi);
        Ok((k, rhs))
    }

    fn solve_monolithic(
        &self,
        state: &State,
        f_phi: &[f64],
        f_heat: &[f64],
    ) -> Result<(Vec<f64>, Vec<f64>)> {
        let n = self.g.len();
        let (k, rhs) = self.block_system(state, f_phi, f_heat)?;
        // symmetric diagonal scaling keeps MINRES applicable
        let scale: Vec<f64> = k
            .diagonal()
            .iter()
            .map(|d| 1.0 / d.abs().max(f64::MIN_POSITIVE).sqrt())
            .collect();
        let mut scaled = k;
        let offsets = scaled.row_offsets().to_vec();
        let cols = scaled.col_indices().to_vec();
        let values = scaled.values_mut();
        for i in 0..2 * n + 1 {
            for idx in offsets[i]..offsets[i + 1] {
                values[idx] *= scale[i] * scale[cols[idx]];
            }
        }
        let b: Vec<f64> = rhs.iter().zip(&scale).map(|(r, s)| r * s).collect();
        let z = minres_solve(&scaled, &b, &self.scheme.config)?.x;
        let x: Vec<f64> = z.iter().zip(&scale).map(|(z, s)| z * s).collect();
        Ok((x[..n].to_vec(), x[n..2 * n].to_vec()))
    }
}

/// Settings of a multi-step run.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RunOptions {
    pub t_final: f64,
    pub tau: f64,
    /// Solve for the displacement every this many steps (the final step and
    /// snapshot steps always get a fresh solve).
    pub elasticity_stride: usize,
    /// Call the snapshot hook every this many steps (and at steps 0 and N).
    pub snapshot_stride: usize,
}

impl RunOptions {
    /// Number of steps; rejects `t_final` that is not a whole multiple of `tau`.
    pub fn n_steps(&self) -> Result<usize> {
        if !(self.tau > 0.0) || !(self.t_final > 0.0) {
            return Err(Error::InvalidInput(
                "tau and t_final must be positive".into(),
            ));
        }
        let ratio = self.t_final / self.tau;
        let n = ratio.round();
        if (ratio - n).abs() > 1e-9 * ratio.max(1.0) || n < 1.0 {
            return Err(Error::InvalidInput(format!(
                "t_final = {} is not an integer multiple of tau = {}",
                self.t_final, self.tau
            )));
        }
        if self.elasticity_stride == 0 || self.snapshot_stride == 0 {
            return Err(Error::InvalidInput("strides must be at least 1".into()));
        }
        Ok(n as usize)
    }
}

/// What the snapshot hook sees.
pub struct Snapshot<'s> {
    pub step: usize,
    pub state: &'s State,
    pub record: Option<&'s EnergyRecord>,
}

#[derive(Debug, Clone)]
pub struct RunOutput {
    pub final_state: State,
    pub records: Vec<EnergyRecord>,
    pub n_steps: usize,
}

/// March from `initial` to `t_final`. Times are `n * tau`; forcing is taken
/// at the new time level.
pub fn run(
    scheme: &SavScheme<'_>,
    initial: State,
    forcing: &dyn ForcingProvider,
    options: &RunOptions,
    hook: &mut dyn FnMut(&Snapshot<'_>) -> Result<()>,
) -> Result<RunOutput> {
    let n_steps = options.n_steps()?;
    let theta_ref = initial.theta.clone();
    hook(&Snapshot {
        step: 0,
        state: &initial,
        record: None,
    })?;
    let mut state = initial;
    let mut records = Vec::with_capacity(n_steps);
    for step in 1..=n_steps {
        let wrap = |e: Error| Error::Step {
            step,
            source: Box::new(e),
        };
        let t = step as f64 * options.tau;
        let f = forcing.forcing(scheme.space(), t).map_err(wrap)?;
        let (mut next, record) = scheme.step(&state, options.tau, &f).map_err(wrap)?;
        next.t = t;
        let snapshot = step % options.snapshot_stride == 0 || step == n_steps;
        if step % options.elasticity_stride == 0 || snapshot {
            next.u = scheme
                .displacement(&next, &theta_ref, f.body.as_deref())
                .map_err(wrap)?;
        }
        records.push(record);
        if snapshot {
            hook(&Snapshot {
                step,
                state: &next,
                record: records.last(),
            })
            .map_err(wrap)?;
        }
        state = next;
    }
    Ok(RunOutput {
        final_state: state,
        records,
        n_steps,
    })
}

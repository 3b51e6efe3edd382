//! Command implementations behind the `savfem` binary.

use std::f64::consts::PI;
use std::io::Write;
use std::path::PathBuf;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::config::{FieldFormat, InitField, Mode, RunConfig, PRESETS};
use crate::error::{Error, Result};
use crate::fem::{FemSpace, ScalarField};
use crate::mesh::Mesh;
use crate::mms::{self, ErrorReport, ManufacturedCase, SweepSettings};
use crate::model;
use crate::output;
use crate::sav::{self, ForcingProvider, RunOutput, SavScheme, Unforced};

/// Environment variable that replaces the configured output directory.
pub const OUTPUT_DIR_ENV: &str = "SAVFEM_OUTPUT_DIR";

/// Command-line adjustments applied on top of a configuration.
#[derive(Debug, Clone, Default)]
pub struct Overrides {
    pub paper_scale: bool,
    pub output_dir: Option<PathBuf>,
}

impl Overrides {
    fn directory(&self, cfg: &RunConfig) -> PathBuf {
        self.output_dir
            .clone()
            .unwrap_or_else(|| cfg.output.directory.clone())
    }
}

fn require_mode(cfg: &RunConfig, mode: Mode) -> Result<()> {
    if cfg.mode != mode {
        return Err(Error::Config(vec![format!(
            "mode: file declares `{}` but the command is `{}`",
            cfg.mode.name(),
            mode.name()
        )]));
    }
    Ok(())
}

fn log(out: &mut dyn Write, msg: impl std::fmt::Display) -> Result<()> {
    writeln!(out, "{msg}")?;
    Ok(())
}

/// Low cosine modes with seeded random amplitudes; satisfies the Neumann
/// boundary condition.
fn smooth_random(seed: u64, amplitude: f64) -> impl Fn([f64; 2]) -> f64 + Sync {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let modes: Vec<(f64, f64, f64)> = (0..4)
        .map(|_| {
            (
                rng.gen_range(-1.0..1.0),
                rng.gen_range(0..4) as f64,
                rng.gen_range(0..4) as f64,
            )
        })
        .collect();
    move |p: [f64; 2]| {
        amplitude
            * modes
                .iter()
                .map(|&(a, k, l)| a * (k * PI * p[0]).cos() * (l * PI * p[1]).cos())
                .sum::<f64>()
            / 2.0
    }
}

fn init_field(field: InitField, case: &ManufacturedCase, phase: bool) -> Box<dyn ScalarField + '_> {
    match field {
        InitField::Constant(c) => Box::new(move |_: [f64; 2]| c),
        InitField::Manufactured if phase => Box::new(move |p: [f64; 2]| case.exact_phi(p, 0.0)),
        InitField::Manufactured => Box::new(move |p: [f64; 2]| case.exact_theta(p, 0.0)),
        InitField::Smooth { seed, amplitude } => Box::new(smooth_random(seed, amplitude)),
    }
}

#[derive(Debug, Clone)]
pub struct SimulationSummary {
    pub n_per_side: usize,
    pub n_steps: usize,
    pub final_energy: f64,
    pub gel_fraction: f64,
    pub max_theta: f64,
    pub max_identity_residual: f64,
    pub energy_monotone: bool,
    pub files: Vec<PathBuf>,
}

fn march(
    cfg: &RunConfig,
    overrides: &Overrides,
    forcing: &dyn ForcingProvider,
    out: &mut dyn Write,
) -> Result<(SimulationSummary, RunOutput)> {
    let n = cfg.resolution(overrides.paper_scale);
    let dir = overrides.directory(cfg);
    std::fs::create_dir_all(&dir)?;
    let space = FemSpace::new(Mesh::build_uniform(n)?)?;
    let scheme =
        SavScheme::new(&space, cfg.params, cfg.laws(), cfg.solver)?.with_algorithm(cfg.algorithm);
    let case = ManufacturedCase::new(cfg.params);
    let phi0 = init_field(cfg.init_phi, &case, true);
    let theta0 = init_field(cfg.init_theta, &case, false);
    let initial = scheme.initialize(phi0.as_ref(), theta0.as_ref(), cfg.init_mode)?;
    let options = cfg.run_options();
    let n_steps = options.n_steps()?;
    log(
        out,
        format!(
            "{}: n_per_side = {n}, tau = {}, {n_steps} steps",
            cfg.mode.name(),
            cfg.tau
        ),
    )?;

    let mut files = Vec::new();
    let mesh = space.mesh();
    let mut hook = |snap: &sav::Snapshot<'_>| -> Result<()> {
        for &format in &cfg.output.formats {
            let ext = match format {
                FieldFormat::Csv => "csv",
                FieldFormat::Vtk => "vtk",
            };
            let path = dir.join(format!("fields_{:06}.{ext}", snap.step));
            output::write_fields(snap.state, mesh, &path, format)?;
            files.push(path);
        }
        let energy = snap.record.map_or(f64::NAN, |r| r.energy);
        writeln!(
            out,
            "  step {:>6}  t = {:.4}  energy = {energy:.6e}",
            snap.step, snap.state.t
        )?;
        Ok(())
    };
    let result = sav::run(&scheme, initial, forcing, &options, &mut hook)?;

    let energy_path = dir.join("energy.csv");
    output::write_energy_series(&result.records, &energy_path)?;
    files.push(energy_path);
    files.push(output::emit_energy_plot("energy.csv", &dir)?);

    let s = &result.final_state;
    let summary = SimulationSummary {
        n_per_side: n,
        n_steps,
        final_energy: scheme.energy(s),
        gel_fraction: s.phi.iter().filter(|&&v| v > 0.0).count() as f64 / s.phi.len() as f64,
        max_theta: s.theta.iter().copied().fold(f64::NEG_INFINITY, f64::max),
        max_identity_residual: result
            .records
            .iter()
            .map(|r| (r.identity_residual() - r.source_work).abs() / r.previous.max(1.0))
            .fold(0.0, f64::max),
        energy_monotone: result.records.iter().all(|r| r.energy <= r.previous),
        files,
    };
    Ok((summary, result))
}

/// Run the configured simulation, writing snapshots and the energy series.
pub fn simulate(
    cfg: &RunConfig,
    overrides: &Overrides,
    out: &mut dyn Write,
) -> Result<SimulationSummary> {
    require_mode(cfg, Mode::Simulate)?;
    let (summary, _) = march(cfg, overrides, &cfg.source, out)?;
    log(
        out,
        format!(
            "done: gel fraction {:.4}, max theta {:.4e}, final energy {:.6e}",
            summary.gel_fraction, summary.max_theta, summary.final_energy
        ),
    )?;
    Ok(summary)
}

/// Source-free run checking the discrete energy identity and monotonicity.
/// Returns the summary; `passed` tells whether both held.
pub fn stability(
    cfg: &RunConfig,
    overrides: &Overrides,
    out: &mut dyn Write,
) -> Result<(SimulationSummary, bool)> {
    require_mode(cfg, Mode::Stability)?;
    let (summary, _) = march(cfg, overrides, &Unforced, out)?;
    let passed = summary.max_identity_residual <= 1e-8 && summary.energy_monotone;
    log(
        out,
        format!(
            "energy identity: max scaled residual {:.3e} (limit 1e-8); energy monotone: {}; {}",
            summary.max_identity_residual,
            summary.energy_monotone,
            if passed { "PASS" } else { "FAIL" }
        ),
    )?;
    Ok((summary, passed))
}

/// Spatial and temporal sweeps against the manufactured solution, with
/// CSV reports, tables and plot data in the output directory.
pub fn mms_converge(
    cfg: &RunConfig,
    overrides: &Overrides,
    out: &mut dyn Write,
) -> Result<Vec<ErrorReport>> {
    require_mode(cfg, Mode::MmsConverge)?;
    let dir = overrides.directory(cfg);
    std::fs::create_dir_all(&dir)?;
    let grid = if overrides.paper_scale {
        &cfg.mms.paper
    } else {
        &cfg.mms.desk
    };
    let case = ManufacturedCase::new(cfg.params);
    let settings = SweepSettings {
        t_final: cfg.t_final,
        solver: cfg.solver,
        algorithm: cfg.algorithm,
    };
    let mut reports = Vec::new();
    let mut emit = |report: ErrorReport, stem: String, out: &mut dyn Write| -> Result<()> {
        let table = report.table();
        log(out, &table)?;
        std::fs::write(dir.join(format!("{stem}.csv")), report.to_csv())?;
        std::fs::write(dir.join(format!("{stem}.txt")), &table)?;
        output::emit_plots(&report, &dir, &stem)?;
        reports.push(report);
        Ok(())
    };
    for &k in &grid.spatial_tau_inverse {
        log(
            out,
            format!("spatial sweep, tau = 1/{k}, n = {:?}", grid.spatial_n),
        )?;
        let report = mms::spatial_sweep(&case, 1.0 / k as f64, &grid.spatial_n, &settings);
        emit(report, format!("spatial_tau{k}"), out)?;
    }
    for &n in &grid.temporal_n {
        log(
            out,
            format!(
                "temporal sweep, n = {n}, 1/tau = {:?}",
                grid.temporal_tau_inverse
            ),
        )?;
        let taus: Vec<f64> = grid
            .temporal_tau_inverse
            .iter()
            .map(|&k| 1.0 / k as f64)
            .collect();
        let report = mms::temporal_sweep(&case, n, &taus, &settings);
        emit(report, format!("temporal_n{n}"), out)?;
    }
    Ok(reports)
}

/// Describe the build, the shipped presets and, if given, a configuration.
pub fn info(cfg: Option<&RunConfig>, out: &mut dyn Write) -> Result<()> {
    log(out, format!("savfem {}", env!("CARGO_PKG_VERSION")))?;
    log(out, "presets:")?;
    for (name, text) in PRESETS {
        let first = text
            .lines()
            .next()
            .unwrap_or("")
            .trim_start_matches('#')
            .trim();
        log(out, format!("  {name:<12} {first}"))?;
    }
    log(out, format!("output directory override: ${OUTPUT_DIR_ENV}"))?;
    if let Some(cfg) = cfg {
        log(out, format!("mode: {}", cfg.mode.name()))?;
        log(
            out,
            format!(
                "mesh: n_per_side = {} (paper scale {:?})",
                cfg.n_per_side, cfg.paper_n_per_side
            ),
        )?;
        log(
            out,
            format!("time: tau = {}, t_final = {}", cfg.tau, cfg.t_final),
        )?;
        log(out, format!("params: {:?}", cfg.params))?;
        log(out, format!("source: {:?}", cfg.source))?;
        let violations = model::validate(&cfg.params, &cfg.laws());
        if violations.is_empty() {
            log(out, "assumptions: all satisfied")?;
        }
        for v in violations {
            log(out, format!("assumption violated: {v}"))?;
        }
    }
    Ok(())
}

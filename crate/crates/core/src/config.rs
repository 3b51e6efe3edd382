//! Run configuration files.
//!
//! Configurations are TOML documents:
//!
//! ```toml
//! mode = "simulate"            # simulate | mms-converge | stability | info
//!
//! [mesh]
//! n_per_side = 100
//! paper_n_per_side = 400       # optional, selected by --paper-scale
//!
//! [time]
//! tau = 0.01                   # not used by mms-converge
//! t_final = 1.0
//!
//! [params]
//! preset = "laser"             # optional: laser | manufactured
//! alpha = 0.5                  # any model parameter; overrides the preset
//!
//! [source]
//! kind = "fixed_gaussian"      # none | fixed_gaussian | path_gaussian | y_path
//! intensity = 4.0e4
//! width = 0.015
//! center = [0.5, 0.5]
//! # path_gaussian takes [[source.segments]] tables with t_start, t_end, from, to
//!
//! [init]
//! phi = -1.0                   # a number, "manufactured", or { smooth_seed = 7, amplitude = 1.0 }
//! theta = 0.0
//! mode = "ritz"                # ritz | nodal
//!
//! [output]
//! directory = "out/run"
//! snapshot_stride = 10
//! formats = ["csv", "vtk"]
//!
//! [solver]
//! rel_tolerance = 1e-10
//! max_iterations = 10000
//! preconditioner = "incomplete_cholesky"  # incomplete_cholesky | jacobi | none
//! algorithm = "elimination"    # elimination | monolithic
//! elasticity_stride = 1
//!
//! [mms]                        # mms-converge only; all keys optional
//! spatial_n = [8, 16, 32, 64]
//! spatial_tau_inverse = [200]
//! temporal_n = [100]
//! temporal_tau_inverse = [10, 20, 40, 80, 160]
//! paper_spatial_n = [8, 16, 32, 64, 128]
//! paper_spatial_tau_inverse = [100, 200]
//! paper_temporal_n = [100, 200]
//! paper_temporal_tau_inverse = [10, 20, 40, 80, 160]
//! ```
//!
//! Parsing reports every problem at once, each prefixed by its key path.

use std::path::PathBuf;

use toml::{Table, Value};

use crate::error::{Error, Result};
use crate::linalg::{Preconditioner, SolverConfig};
use crate::mms::{DESK_SPATIAL_N, FULL_SPATIAL_N, TEMPORAL_STEPS};
use crate::model::{self, MaterialLaws, ModelParams};
use crate::sav::{Algorithm, InitMode, RunOptions};
use crate::source::{PathSegment, SourceSpec, DEFAULT_INTENSITY, DEFAULT_WIDTH};

/// Built-in configurations, by name.
pub const PRESETS: [(&str, &str); 4] = [
    ("mms", include_str!("../presets/mms.toml")),
    ("fixed-laser", include_str!("../presets/fixed-laser.toml")),
    ("y-laser", include_str!("../presets/y-laser.toml")),
    ("stability", include_str!("../presets/stability.toml")),
];

pub fn preset(name: &str) -> Option<&'static str> {
    PRESETS
        .iter()
        .find(|(n, _)| *n == name)
        .map(|(_, text)| *text)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Mode {
    Simulate,
    MmsConverge,
    Stability,
    Info,
}

impl Mode {
    pub fn name(self) -> &'static str {
        match self {
            Mode::Simulate => "simulate",
            Mode::MmsConverge => "mms-converge",
            Mode::Stability => "stability",
            Mode::Info => "info",
        }
    }

    fn parse(s: &str) -> Option<Self> {
        [
            Mode::Simulate,
            Mode::MmsConverge,
            Mode::Stability,
            Mode::Info,
        ]
        .into_iter()
        .find(|m| m.name() == s)
    }
}

/// Initial-field selector.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum InitField {
    Constant(f64),
    /// The manufactured solution at `t = 0`.
    Manufactured,
    /// A random combination of low cosine modes, seeded.
    Smooth {
        seed: u64,
        amplitude: f64,
    },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum FieldFormat {
    Csv,
    Vtk,
}

#[derive(Debug, Clone, PartialEq)]
pub struct OutputConfig {
    pub directory: PathBuf,
    pub snapshot_stride: usize,
    pub formats: Vec<FieldFormat>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct MmsGrid {
    pub spatial_n: Vec<usize>,
    pub spatial_tau_inverse: Vec<usize>,
    pub temporal_n: Vec<usize>,
    pub temporal_tau_inverse: Vec<usize>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct MmsConfig {
    pub desk: MmsGrid,
    pub paper: MmsGrid,
}

impl Default for MmsConfig {
    fn default() -> Self {
        Self {
            desk: MmsGrid {
                spatial_n: DESK_SPATIAL_N.to_vec(),
                spatial_tau_inverse: vec![200],
                temporal_n: vec![100],
                temporal_tau_inverse: TEMPORAL_STEPS.to_vec(),
            },
            paper: MmsGrid {
                spatial_n: FULL_SPATIAL_N.to_vec(),
                spatial_tau_inverse: vec![100, 200],
                temporal_n: vec![100, 200],
                temporal_tau_inverse: TEMPORAL_STEPS.to_vec(),
            },
        }
    }
}

#[derive(Debug, Clone)]
pub struct RunConfig {
    pub mode: Mode,
    pub n_per_side: usize,
    pub paper_n_per_side: Option<usize>,
    pub tau: f64,
    pub t_final: f64,
    pub params: ModelParams,
    pub source: SourceSpec,
    pub init_phi: InitField,
    pub init_theta: InitField,
    pub init_mode: InitMode,
    pub output: OutputConfig,
    pub solver: SolverConfig,
    pub algorithm: Algorithm,
    pub elasticity_stride: usize,
    pub mms: MmsConfig,
}

impl RunConfig {
    /// Mesh resolution, honoring the paper-scale switch.
    pub fn resolution(&self, paper_scale: bool) -> usize {
        if paper_scale {
            self.paper_n_per_side.unwrap_or(self.n_per_side)
        } else {
            self.n_per_side
        }
    }

    pub fn run_options(&self) -> RunOptions {
        RunOptions {
            t_final: self.t_final,
            tau: self.tau,
            elasticity_stride: self.elasticity_stride,
            snapshot_stride: self.output.snapshot_stride,
        }
    }

    pub fn laws(&self) -> MaterialLaws {
        MaterialLaws::standard(&self.params)
    }
}

const PARAM_KEYS: [&str; 12] = [
    "alpha", "beta", "gamma", "delta", "epsilon", "lambda", "theta_c", "kappa", "phi_gel", "young",
    "poisson", "zeta",
];

fn param_slot<'a>(p: &'a mut ModelParams, key: &str) -> &'a mut f64 {
    match key {
        "alpha" => &mut p.alpha,
        "beta" => &mut p.beta,
        "gamma" => &mut p.gamma,
        "delta" => &mut p.delta,
        "epsilon" => &mut p.epsilon,
        "lambda" => &mut p.lambda,
        "theta_c" => &mut p.theta_c,
        "kappa" => &mut p.kappa,
        "phi_gel" => &mut p.phi_gel,
        "young" => &mut p.young,
        "poisson" => &mut p.poisson,
        "zeta" => &mut p.zeta,
        _ => unreachable!("unknown parameter {key}"),
    }
}

fn type_name(v: &Value) -> &'static str {
    v.type_str()
}

/// Collects errors while walking the document.
#[derive(Default)]
struct Reader {
    errors: Vec<String>,
}

impl Reader {
    fn err(&mut self, path: &str, msg: impl std::fmt::Display) {
        self.errors.push(format!("{path}: {msg}"));
    }

    fn missing(&mut self, path: &str) {
        self.err(path, "missing required key");
    }

    fn check_keys(&mut self, table: &Table, section: &str, allowed: &[&str]) {
        for key in table.keys() {
            if !allowed.contains(&key.as_str()) {
                let at = if section.is_empty() {
                    "top level".to_string()
                } else {
                    format!("[{section}]")
                };
                self.errors
                    .push(format!("{}: unknown key in {at}", join(section, key)));
            }
        }
    }

    fn table<'a>(&mut self, root: &'a Table, key: &str, path: &str) -> Option<&'a Table> {
        match root.get(key) {
            None => None,
            Some(Value::Table(t)) => Some(t),
            Some(v) => {
                self.err(path, format!("expected a table, found {}", type_name(v)));
                None
            }
        }
    }

    fn f64(&mut self, t: &Table, key: &str, path: &str) -> Option<f64> {
        match t.get(key)? {
            Value::Float(x) => Some(*x),
            Value::Integer(i) => Some(*i as f64),
            v => {
                self.err(path, format!("expected a number, found {}", type_name(v)));
                None
            }
        }
    }

    fn usize(&mut self, t: &Table, key: &str, path: &str) -> Option<usize> {
        match t.get(key)? {
            Value::Integer(i) if *i >= 0 => Some(*i as usize),
            Value::Integer(i) => {
                self.err(path, format!("expected a non-negative integer, found {i}"));
                None
            }
            v => {
                self.err(path, format!("expected an integer, found {}", type_name(v)));
                None
            }
        }
    }

    fn str<'a>(&mut self, t: &'a Table, key: &str, path: &str) -> Option<&'a str> {
        match t.get(key)? {
            Value::String(s) => Some(s),
            v => {
                self.err(path, format!("expected a string, found {}", type_name(v)));
                None
            }
        }
    }

    fn point(&mut self, t: &Table, key: &str, path: &str) -> Option<[f64; 2]> {
        match t.get(key)? {
            Value::Array(a) if a.len() == 2 => {
                let mut out = [0.0; 2];
                for (k, v) in a.iter().enumerate() {
                    match v {
                        Value::Float(x) => out[k] = *x,
                        Value::Integer(i) => out[k] = *i as f64,
                        v => {
                            self.err(
                                &format!("{path}[{k}]"),
                                format!("expected a number, found {}", type_name(v)),
                            );
                            return None;
                        }
                    }
                }
                Some(out)
            }
            _ => {
                self.err(path, "expected a point [x, y]");
                None
            }
        }
    }

    fn usize_list(&mut self, t: &Table, key: &str, path: &str) -> Option<Vec<usize>> {
        match t.get(key)? {
            Value::Array(a) => {
                let mut out = Vec::with_capacity(a.len());
                for (k, v) in a.iter().enumerate() {
                    match v {
                        Value::Integer(i) if *i > 0 => out.push(*i as usize),
                        v => {
                            self.err(
                                &format!("{path}[{k}]"),
                                format!("expected a positive integer, found {v}"),
                            );
                            return None;
                        }
                    }
                }
                if out.is_empty() {
                    self.err(path, "list must not be empty");
                    return None;
                }
                Some(out)
            }
            v => {
                self.err(path, format!("expected an array, found {}", type_name(v)));
                None
            }
        }
    }
}

fn join(section: &str, key: &str) -> String {
    if section.is_empty() {
        key.to_string()
    } else {
        format!("{section}.{key}")
    }
}

/// Parse and validate a configuration document.
pub fn parse_config(text: &str) -> Result<RunConfig> {
    let root: Table = text.parse().map_err(|e: toml::de::Error| {
        Error::Config(vec![format!("syntax: {}", e.to_string().trim_end())])
    })?;
    let mut r = Reader::default();
    r.check_keys(
        &root,
        "",
        &[
            "mode", "mesh", "time", "params", "source", "init", "output", "solver", "mms",
        ],
    );

    let mode = match r.str(&root, "mode", "mode") {
        Some(s) => match Mode::parse(s) {
            Some(m) => Some(m),
            None => {
                r.err(
                    "mode",
                    format!("unknown mode `{s}` (simulate, mms-converge, stability, info)"),
                );
                None
            }
        },
        None => {
            if !root.contains_key("mode") {
                r.missing("mode");
            }
            None
        }
    };
    let needs_fields = matches!(mode, Some(Mode::Simulate) | Some(Mode::Stability));

    // mesh
    let empty = Table::new();
    let mesh = r.table(&root, "mesh", "mesh").unwrap_or(&empty);
    r.check_keys(mesh, "mesh", &["n_per_side", "paper_n_per_side"]);
    let n_per_side = r.usize(mesh, "n_per_side", "mesh.n_per_side");
    if n_per_side.is_none() && !mesh.contains_key("n_per_side") && mode != Some(Mode::MmsConverge) {
        r.missing("mesh.n_per_side");
    }
    let paper_n_per_side = r.usize(mesh, "paper_n_per_side", "mesh.paper_n_per_side");
    for (n, path) in [
        (n_per_side, "mesh.n_per_side"),
        (paper_n_per_side, "mesh.paper_n_per_side"),
    ] {
        if n == Some(0) {
            r.err(path, "must be at least 1");
        }
    }

    // time
    let time = r.table(&root, "time", "time").unwrap_or(&empty);
    r.check_keys(time, "time", &["tau", "t_final"]);
    let tau = r.f64(time, "tau", "time.tau");
    if tau.is_none() && !time.contains_key("tau") && needs_fields {
        r.missing("time.tau");
    }
    let t_final = r.f64(time, "t_final", "time.t_final");
    if t_final.is_none() && !time.contains_key("t_final") {
        r.missing("time.t_final");
    }

    // params
    let params = match r.table(&root, "params", "params") {
        Some(t) => {
            let mut allowed = PARAM_KEYS.to_vec();
            allowed.push("preset");
            r.check_keys(t, "params", &allowed);
            let base = match r.str(t, "preset", "params.preset") {
                Some("laser") => Some(ModelParams::laser()),
                Some("manufactured") => Some(ModelParams::manufactured()),
                Some(other) => {
                    r.err(
                        "params.preset",
                        format!("unknown preset `{other}` (laser, manufactured)"),
                    );
                    None
                }
                None => None,
            };
            let has_base = base.is_some();
            let mut p = base.unwrap_or(ModelParams::manufactured());
            for key in PARAM_KEYS {
                let path = format!("params.{key}");
                match r.f64(t, key, &path) {
                    Some(v) => *param_slot(&mut p, key) = v,
                    None if !has_base && !t.contains_key(key) && !t.contains_key("preset") => {
                        r.missing(&path)
                    }
                    None => {}
                }
            }
            Some(p)
        }
        None => {
            if !root.contains_key("params") {
                r.missing("params");
            }
            None
        }
    };

    // source
    let source = match r.table(&root, "source", "source") {
        Some(t) => parse_source(&mut r, t),
        None => {
            if !root.contains_key("source") && mode == Some(Mode::Simulate) {
                r.missing("source");
            }
            Some(SourceSpec::None)
        }
    };

    // init
    let init = r.table(&root, "init", "init").unwrap_or(&empty);
    r.check_keys(init, "init", &["phi", "theta", "mode"]);
    let init_phi = parse_init(&mut r, init, "phi", needs_fields);
    let init_theta = parse_init(&mut r, init, "theta", needs_fields);
    let init_mode = match r.str(init, "mode", "init.mode") {
        None | Some("ritz") => InitMode::Ritz,
        Some("nodal") => InitMode::Nodal,
        Some(other) => {
            r.err("init.mode", format!("unknown mode `{other}` (ritz, nodal)"));
            InitMode::Ritz
        }
    };

    // output
    let output = match r.table(&root, "output", "output") {
        Some(t) => parse_output(&mut r, t),
        None => {
            if !root.contains_key("output") && mode != Some(Mode::Info) {
                r.missing("output.directory");
            }
            None
        }
    };

    // solver
    let solver_t = r.table(&root, "solver", "solver").unwrap_or(&empty);
    r.check_keys(
        solver_t,
        "solver",
        &[
            "rel_tolerance",
            "max_iterations",
            "preconditioner",
            "algorithm",
            "elasticity_stride",
        ],
    );
    let mut solver = SolverConfig::default();
    if let Some(v) = r.f64(solver_t, "rel_tolerance", "solver.rel_tolerance") {
        solver.rel_tolerance = v;
    }
    if let Some(v) = r.usize(solver_t, "max_iterations", "solver.max_iterations") {
        solver.max_iterations = v;
    }
    match r.str(solver_t, "preconditioner", "solver.preconditioner") {
        None => {}
        Some("jacobi") => solver.preconditioner = Preconditioner::Jacobi,
        Some("none") => solver.preconditioner = Preconditioner::None,
        Some("incomplete_cholesky") => solver.preconditioner = Preconditioner::IncompleteCholesky,
        Some(other) => r.err(
            "solver.preconditioner",
            format!("unknown preconditioner `{other}` (incomplete_cholesky, jacobi, none)"),
        ),
    }
    if let Err(e) = solver.validate() {
        r.err("solver", e);
    }
    let algorithm = match r.str(solver_t, "algorithm", "solver.algorithm") {
        None | Some("elimination") => Algorithm::Elimination,
        Some("monolithic") => Algorithm::Monolithic,
        Some(other) => {
            r.err(
                "solver.algorithm",
                format!("unknown algorithm `{other}` (elimination, monolithic)"),
            );
            Algorithm::Elimination
        }
    };
    let elasticity_stride = r
        .usize(solver_t, "elasticity_stride", "solver.elasticity_stride")
        .unwrap_or(1);
    if elasticity_stride == 0 {
        r.err("solver.elasticity_stride", "must be at least 1");
    }

    // mms
    let mms = match r.table(&root, "mms", "mms") {
        Some(t) => parse_mms(&mut r, t),
        None => MmsConfig::default(),
    };

    // cross-field invariants, only once every piece parsed
    if let (Some(p), Some(s)) = (params.as_ref(), source.as_ref()) {
        for v in model::validate(p, &MaterialLaws::standard(p)) {
            r.err("params", v);
        }
        if let Err(e) = s.validate() {
            r.err("source", e);
        }
        if let (Some(t1), Some(Mode::Simulate)) = (t_final, mode) {
            if !s.covers(0.0, t1) {
                r.err("source.segments", format!("path does not cover [0, {t1}]"));
            }
        }
    }
    if let (Some(tau), Some(t_final), true) = (tau, t_final, needs_fields) {
        let probe = RunOptions {
            t_final,
            tau,
            elasticity_stride: 1,
            snapshot_stride: 1,
        };
        if let Err(e) = probe.n_steps() {
            r.err("time", e);
        }
    }
    if mode == Some(Mode::Stability) && !matches!(source, Some(SourceSpec::None)) {
        r.err("source", "stability checks run without a heat source");
    }

    if !r.errors.is_empty() {
        return Err(Error::Config(r.errors));
    }
    let default_init = InitField::Constant(0.0);
    Ok(RunConfig {
        mode: mode.expect("checked"),
        n_per_side: n_per_side.unwrap_or(0),
        paper_n_per_side,
        tau: tau.unwrap_or(0.0),
        t_final: t_final.expect("checked"),
        params: params.expect("checked"),
        source: source.expect("checked"),
        init_phi: init_phi.unwrap_or(default_init),
        init_theta: init_theta.unwrap_or(default_init),
        init_mode,
        output: output.unwrap_or(OutputConfig {
            directory: PathBuf::from("out"),
            snapshot_stride: 1,
            formats: vec![FieldFormat::Csv],
        }),
        solver,
        algorithm,
        elasticity_stride,
        mms,
    })
}

fn parse_source(r: &mut Reader, t: &Table) -> Option<SourceSpec> {
    let Some(kind) = r.str(t, "kind", "source.kind") else {
        if !t.contains_key("kind") {
            r.missing("source.kind");
        }
        return None;
    };
    let intensity = r
        .f64(t, "intensity", "source.intensity")
        .unwrap_or(DEFAULT_INTENSITY);
    let width = r.f64(t, "width", "source.width").unwrap_or(DEFAULT_WIDTH);
    match kind {
        "none" => {
            r.check_keys(t, "source", &["kind"]);
            Some(SourceSpec::None)
        }
        "fixed_gaussian" => {
            r.check_keys(t, "source", &["kind", "intensity", "width", "center"]);
            let center = r.point(t, "center", "source.center");
            if center.is_none() && !t.contains_key("center") {
                r.missing("source.center");
            }
            center.map(|center| SourceSpec::FixedGaussian {
                intensity,
                width,
                center,
            })
        }
        "y_path" => {
            r.check_keys(t, "source", &["kind", "intensity", "width"]);
            let SourceSpec::PathGaussian { segments, .. } = SourceSpec::y_path() else {
                unreachable!()
            };
            Some(SourceSpec::PathGaussian {
                intensity,
                width,
                segments,
            })
        }
        "path_gaussian" => {
            r.check_keys(t, "source", &["kind", "intensity", "width", "segments"]);
            let Some(list) = t.get("segments") else {
                r.missing("source.segments");
                return None;
            };
            let Value::Array(items) = list else {
                r.err("source.segments", "expected an array of tables");
                return None;
            };
            let mut segments = Vec::new();
            for (k, item) in items.iter().enumerate() {
                let path = format!("source.segments[{k}]");
                let Value::Table(seg) = item else {
                    r.err(&path, "expected a table");
                    continue;
                };
                r.check_keys(seg, &path, &["t_start", "t_end", "from", "to"]);
                let fields = (
                    r.f64(seg, "t_start", &format!("{path}.t_start")),
                    r.f64(seg, "t_end", &format!("{path}.t_end")),
                    r.point(seg, "from", &format!("{path}.from")),
                    r.point(seg, "to", &format!("{path}.to")),
                );
                for key in ["t_start", "t_end", "from", "to"] {
                    if !seg.contains_key(key) {
                        r.missing(&format!("{path}.{key}"));
                    }
                }
                if let (Some(t_start), Some(t_end), Some(from), Some(to)) = fields {
                    segments.push(PathSegment {
                        t_start,
                        t_end,
                        from,
                        to,
                    });
                }
            }
            (segments.len() == items.len()).then_some(SourceSpec::PathGaussian {
                intensity,
                width,
                segments,
            })
        }
        other => {
            r.err(
                "source.kind",
                format!("unknown kind `{other}` (none, fixed_gaussian, path_gaussian, y_path)"),
            );
            None
        }
    }
}

fn parse_init(r: &mut Reader, t: &Table, key: &str, required: bool) -> Option<InitField> {
    let path = format!("init.{key}");
    match t.get(key) {
        None => {
            if required {
                r.missing(&path);
            }
            None
        }
        Some(Value::Float(x)) => Some(InitField::Constant(*x)),
        Some(Value::Integer(i)) => Some(InitField::Constant(*i as f64)),
        Some(Value::String(s)) if s == "manufactured" => Some(InitField::Manufactured),
        Some(Value::Table(s)) => {
            r.check_keys(s, &path, &["smooth_seed", "amplitude"]);
            let seed = r.usize(s, "smooth_seed", &format!("{path}.smooth_seed"));
            if seed.is_none() && !s.contains_key("smooth_seed") {
                r.missing(&format!("{path}.smooth_seed"));
            }
            let amplitude = r
                .f64(s, "amplitude", &format!("{path}.amplitude"))
                .unwrap_or(1.0);
            seed.map(|seed| InitField::Smooth {
                seed: seed as u64,
                amplitude,
            })
        }
        Some(v) => {
            r.err(
                &path,
                format!("expected a number, \"manufactured\" or a smooth_seed table, found {v}"),
            );
            None
        }
    }
}

fn parse_output(r: &mut Reader, t: &Table) -> Option<OutputConfig> {
    r.check_keys(t, "output", &["directory", "snapshot_stride", "formats"]);
    let directory = r.str(t, "directory", "output.directory").map(PathBuf::from);
    if directory.is_none() && !t.contains_key("directory") {
        r.missing("output.directory");
    }
    let snapshot_stride = r
        .usize(t, "snapshot_stride", "output.snapshot_stride")
        .unwrap_or(1);
    if snapshot_stride == 0 {
        r.err("output.snapshot_stride", "must be at least 1");
    }
    let mut formats = Vec::new();
    match t.get("formats") {
        None => formats.push(FieldFormat::Csv),
        Some(Value::Array(a)) => {
            for (k, v) in a.iter().enumerate() {
                match v.as_str() {
                    Some("csv") => formats.push(FieldFormat::Csv),
                    Some("vtk") => formats.push(FieldFormat::Vtk),
                    _ => r.err(
                        &format!("output.formats[{k}]"),
                        format!("expected \"csv\" or \"vtk\", found {v}"),
                    ),
                }
            }
        }
        Some(v) => r.err(
            "output.formats",
            format!("expected an array, found {}", type_name(v)),
        ),
    }
    directory.map(|directory| OutputConfig {
        directory,
        snapshot_stride,
        formats,
    })
}

fn parse_mms(r: &mut Reader, t: &Table) -> MmsConfig {
    let keys = [
        "spatial_n",
        "spatial_tau_inverse",
        "temporal_n",
        "temporal_tau_inverse",
        "paper_spatial_n",
        "paper_spatial_tau_inverse",
        "paper_temporal_n",
        "paper_temporal_tau_inverse",
    ];
    r.check_keys(t, "mms", &keys);
    let mut cfg = MmsConfig::default();
    let slots: [&mut Vec<usize>; 8] = [
        &mut cfg.desk.spatial_n,
        &mut cfg.desk.spatial_tau_inverse,
        &mut cfg.desk.temporal_n,
        &mut cfg.desk.temporal_tau_inverse,
        &mut cfg.paper.spatial_n,
        &mut cfg.paper.spatial_tau_inverse,
        &mut cfg.paper.temporal_n,
        &mut cfg.paper.temporal_tau_inverse,
    ];
    for (key, slot) in keys.iter().zip(slots) {
        if let Some(v) = r.usize_list(t, key, &format!("mms.{key}")) {
            *slot = v;
        }
    }
    cfg
}

#[cfg(test)]
mod tests {
    use super::*;

    fn errors(text: &str) -> Vec<String> {
        match parse_config(text) {
            Err(Error::Config(e)) => e,
            other => panic!("expected config errors, got {other:?}"),
        }
    }

    #[test]
    fn presets_parse_and_validate() {
        for (name, text) in PRESETS {
            let cfg = parse_config(text).unwrap_or_else(|e| panic!("{name}: {e}"));
            assert!(model::validate(&cfg.params, &cfg.laws()).is_empty());
        }
    }

    #[test]
    fn fixed_laser_preset_values() {
        let cfg = parse_config(preset("fixed-laser").unwrap()).unwrap();
        let p = cfg.params;
        assert_eq!(cfg.mode, Mode::Simulate);
        assert_eq!(
            (
                p.alpha, p.epsilon, p.gamma, p.delta, p.beta, p.zeta, p.young, p.poisson, p.kappa,
                p.theta_c
            ),
            (0.5, 5.0e-3, 4.0e2, 1.0e2, 5.0e2, 1e3, 1e4, 0.35, 1e-6, 1.0)
        );
        assert_eq!(cfg.source, SourceSpec::fixed([0.5, 0.5]));
        assert_eq!(cfg.resolution(false), 100);
        assert_eq!(cfg.resolution(true), 400);
        assert_eq!(cfg.run_options().n_steps().unwrap(), 20);
    }

    #[test]
    fn y_laser_preset_uses_the_y_path() {
        let cfg = parse_config(preset("y-laser").unwrap()).unwrap();
        assert_eq!(cfg.source, SourceSpec::y_path());
        assert_eq!(cfg.run_options().n_steps().unwrap(), 100);
    }

    #[test]
    fn empty_file_lists_required_keys() {
        let e = errors("");
        for key in ["mode", "time.t_final", "params", "output.directory"] {
            assert!(
                e.iter()
                    .any(|m| m.starts_with(key) && m.contains("missing")),
                "{key} in {e:?}"
            );
        }
    }

    #[test]
    fn simulate_requires_field_keys() {
        let e = errors("mode = \"simulate\"\n");
        for key in [
            "mesh.n_per_side",
            "time.tau",
            "source",
            "init.phi",
            "init.theta",
        ] {
            assert!(e.iter().any(|m| m.starts_with(key)), "{key} in {e:?}");
        }
    }

    #[test]
    fn rejects_non_integral_step_count() {
        let text = preset("fixed-laser")
            .unwrap()
            .replace("tau = 0.01", "tau = 0.3")
            .replace("t_final = 0.2", "t_final = 1.0");
        let e = errors(&text);
        assert!(
            e.iter()
                .any(|m| m.starts_with("time") && m.contains("multiple")),
            "{e:?}"
        );
    }

    #[test]
    fn reports_unknown_keys_and_type_errors_together() {
        let text = format!("{}\n[extra]\nfoo = 1\n", preset("y-laser").unwrap())
            .replace("n_per_side = 100", "n_per_side = \"many\"\nbogus = 2");
        let e = errors(&text);
        assert!(
            e.iter().any(|m| m == "extra: unknown key in top level"),
            "{e:?}"
        );
        assert!(
            e.iter().any(|m| m == "mesh.bogus: unknown key in [mesh]"),
            "{e:?}"
        );
        assert!(
            e.iter()
                .any(|m| m.starts_with("mesh.n_per_side: expected an integer")),
            "{e:?}"
        );
    }

    #[test]
    fn reports_assumption_violations() {
        let text = preset("fixed-laser")
            .unwrap()
            .replace("preset = \"laser\"", "preset = \"laser\"\nalpha = 0.0");
        let e = errors(&text);
        assert!(
            e.iter()
                .any(|m| m.starts_with("params:") && m.contains("alpha")),
            "{e:?}"
        );
    }

    #[test]
    fn explicit_parameters_without_preset_need_every_key() {
        let text = "mode = \"info\"\n[time]\nt_final = 1.0\n[params]\nalpha = 1.0\n";
        let e = errors(text);
        assert!(
            e.iter().any(|m| m == "params.zeta: missing required key"),
            "{e:?}"
        );
        assert!(!e.iter().any(|m| m.starts_with("params.alpha")), "{e:?}");
    }

    #[test]
    fn syntax_errors_carry_position() {
        let e = errors("mode = \n");
        assert!(
            e[0].starts_with("syntax:") && e[0].contains("line 1"),
            "{e:?}"
        );
    }

    #[test]
    fn parses_path_segments_and_init_selectors() {
        let text = r#"
mode = "simulate"
[mesh]
n_per_side = 8
[time]
tau = 0.1
t_final = 1.0
[params]
preset = "laser"
[source]
kind = "path_gaussian"
intensity = 10.0
width = 0.1
[[source.segments]]
t_start = 0.0
t_end = 1.0
from = [0.1, 0.1]
to = [0.9, 0.9]
[init]
phi = { smooth_seed = 3, amplitude = 0.5 }
theta = "manufactured"
mode = "nodal"
[output]
directory = "out"
formats = ["csv", "vtk"]
[solver]
algorithm = "monolithic"
elasticity_stride = 5
"#;
        let cfg = parse_config(text).unwrap();
        assert_eq!(
            cfg.init_phi,
            InitField::Smooth {
                seed: 3,
                amplitude: 0.5
            }
        );
        assert_eq!(cfg.init_theta, InitField::Manufactured);
        assert_eq!(cfg.init_mode, InitMode::Nodal);
        assert_eq!(cfg.output.formats, vec![FieldFormat::Csv, FieldFormat::Vtk]);
        assert_eq!(cfg.algorithm, Algorithm::Monolithic);
        assert_eq!(cfg.elasticity_stride, 5);
        assert!(
            matches!(cfg.source, SourceSpec::PathGaussian { ref segments, .. } if segments.len() == 1)
        );
        // a path that stops short of t_final is rejected
        let e = errors(&text.replace("t_end = 1.0", "t_end = 0.5"));
        assert!(e.iter().any(|m| m.starts_with("source.segments")), "{e:?}");
    }
}

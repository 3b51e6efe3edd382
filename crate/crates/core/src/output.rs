//! File output: nodal fields, energy series, error reports and plot data.
//!
//! Every writer formats numbers with a fixed precision and walks data in a
//! fixed order, so identical inputs give byte-identical files.

use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use crate::config::FieldFormat;
use crate::error::{Error, Result};
use crate::mesh::Mesh;
use crate::mms::{ErrorReport, Norm, Variable};
use crate::sav::{EnergyRecord, State};

/// Header of the field CSV files.
pub const FIELDS_HEADER: &str = "x,y,phi,theta,ux,uy";
/// Header of the energy CSV files.
pub const ENERGY_HEADER: &str = "t,energy,dissipation,identity_residual";

/// 17 significant digits, enough to round-trip any `f64`.
fn num(v: f64) -> String {
    format!("{v:.16e}")
}

fn check_sizes(state: &State, mesh: &Mesh) -> Result<()> {
    let n = mesh.n_nodes();
    for len in [state.phi.len(), state.theta.len(), state.u.len()] {
        if len != n {
            return Err(Error::DimensionMismatch {
                expected: n,
                found: len,
            });
        }
    }
    Ok(())
}

fn write_text(path: &Path, text: &str) -> Result<()> {
    if let Some(parent) = path.parent().filter(|p| !p.as_os_str().is_empty()) {
        fs::create_dir_all(parent)?;
    }
    fs::write(path, text)?;
    Ok(())
}

pub fn fields_csv(state: &State, mesh: &Mesh) -> Result<String> {
    check_sizes(state, mesh)?;
    let mut out = String::with_capacity(mesh.n_nodes() * 150);
    out.push_str(FIELDS_HEADER);
    out.push('\n');
    for (k, p) in mesh.nodes.iter().enumerate() {
        let _ = writeln!(
            out,
            "{},{},{},{},{},{}",
            num(p[0]),
            num(p[1]),
            num(state.phi[k]),
            num(state.theta[k]),
            num(state.u[k][0]),
            num(state.u[k][1])
        );
    }
    Ok(out)
}

/// Legacy ASCII VTK unstructured grid of triangles with point data.
pub fn fields_vtk(state: &State, mesh: &Mesh) -> Result<String> {
    check_sizes(state, mesh)?;
    let n = mesh.n_nodes();
    let e = mesh.n_elements();
    let mut out = String::with_capacity(n * 200);
    out.push_str("# vtk DataFile Version 3.0\n");
    let _ = writeln!(out, "savfem fields t={}", num(state.t));
    out.push_str("ASCII\nDATASET UNSTRUCTURED_GRID\n");
    let _ = writeln!(out, "POINTS {n} double");
    for p in &mesh.nodes {
        let _ = writeln!(out, "{} {} 0", num(p[0]), num(p[1]));
    }
    let _ = writeln!(out, "CELLS {e} {}", 4 * e);
    for el in &mesh.elements {
        let _ = writeln!(out, "3 {} {} {}", el[0], el[1], el[2]);
    }
    let _ = writeln!(out, "CELL_TYPES {e}");
    for _ in 0..e {
        out.push_str("5\n");
    }
    let _ = writeln!(out, "POINT_DATA {n}");
    for (name, values) in [("phi", &state.phi), ("theta", &state.theta)] {
        let _ = writeln!(out, "SCALARS {name} double 1\nLOOKUP_TABLE default");
        for v in values.iter() {
            out.push_str(&num(*v));
            out.push('\n');
        }
    }
    out.push_str("VECTORS displacement double\n");
    for u in &state.u {
        let _ = writeln!(out, "{} {} 0", num(u[0]), num(u[1]));
    }
    Ok(out)
}

/// Write `state` to `path` in the given format, creating parent directories.
pub fn write_fields(state: &State, mesh: &Mesh, path: &Path, format: FieldFormat) -> Result<()> {
    let text = match format {
        FieldFormat::Csv => fields_csv(state, mesh)?,
        FieldFormat::Vtk => fields_vtk(state, mesh)?,
    };
    write_text(path, &text)
}

/// Rows `[x, y, phi, theta, ux, uy]` of a field CSV file.
pub fn read_fields_csv(path: &Path) -> Result<Vec<[f64; 6]>> {
    let text = fs::read_to_string(path)?;
    let mut lines = text.lines();
    if lines.next() != Some(FIELDS_HEADER) {
        return Err(Error::InvalidInput(format!(
            "{}: missing header `{FIELDS_HEADER}`",
            path.display()
        )));
    }
    lines
        .enumerate()
        .map(|(k, line)| {
            let vals: Vec<f64> = line
                .split(',')
                .map(|s| s.parse::<f64>())
                .collect::<std::result::Result<_, _>>()
                .map_err(|e| {
                    Error::InvalidInput(format!("{}: line {}: {e}", path.display(), k + 2))
                })?;
            <[f64; 6]>::try_from(vals).map_err(|v| {
                Error::InvalidInput(format!(
                    "{}: line {}: {} columns",
                    path.display(),
                    k + 2,
                    v.len()
                ))
            })
        })
        .collect()
}

pub fn energy_csv(records: &[EnergyRecord]) -> String {
    let mut out = String::from(ENERGY_HEADER);
    out.push('\n');
    for r in records {
        let _ = writeln!(
            out,
            "{},{},{},{}",
            num(r.t),
            num(r.energy),
            num(r.dissipation),
            num(r.identity_residual())
        );
    }
    out
}

pub fn write_energy_series(records: &[EnergyRecord], path: &Path) -> Result<()> {
    write_text(path, &energy_csv(records))
}

/// Write one data file per variable and norm, plus a gnuplot script that
/// draws log-log error curves with slope-1 and slope-2 guide lines through
/// the coarsest point. Returns the paths written.
pub fn emit_plots(report: &ErrorReport, dir: &Path, stem: &str) -> Result<Vec<PathBuf>> {
    fs::create_dir_all(dir)?;
    let mut written = Vec::new();
    let axis = match report.kind {
        crate::mms::SweepKind::Spatial => "h",
        crate::mms::SweepKind::Temporal => "tau",
    };
    let mut script = String::new();
    let _ = writeln!(
        script,
        "# gnuplot script; run with `gnuplot {stem}.gp` inside this directory"
    );
    script.push_str("set terminal pngcairo size 800,600\nset logscale xy\nset key bottom right\n");
    let _ = writeln!(script, "set xlabel '{axis}'\nset ylabel 'error'");
    for var in Variable::ALL {
        for norm in Norm::ALL {
            let name = format!("{stem}_{}_{}.dat", var.name(), norm.name());
            let mut data = format!("# {axis} error\n");
            let points: Vec<(f64, f64)> = report
                .runs
                .iter()
                .filter_map(|r| r.get(var, norm).map(|e| (report.parameter(r), e)))
                .collect();
            for (x, e) in &points {
                let _ = writeln!(data, "{} {}", num(*x), num(*e));
            }
            let path = dir.join(&name);
            write_text(&path, &data)?;
            written.push(path);

            let Some(&(x0, e0)) = points.iter().max_by(|a, b| a.0.total_cmp(&b.0)) else {
                continue;
            };
            let png = format!("{stem}_{}_{}.png", var.name(), norm.name());
            let _ = writeln!(script, "set output '{png}'");
            let _ = writeln!(
                script,
                "set title '{} {} ({} sweep)'",
                var.name(),
                norm.name(),
                report.kind.name()
            );
            let _ = writeln!(
                script,
                "plot '{name}' using 1:2 with linespoints title 'error', \\\n     \
                 {e0:.16e}*(x/{x0:.16e}) with lines dashtype 2 title 'slope 1', \\\n     \
                 {e0:.16e}*(x/{x0:.16e})**2 with lines dashtype 3 title 'slope 2'"
            );
        }
    }
    let path = dir.join(format!("{stem}.gp"));
    write_text(&path, &script)?;
    written.push(path);
    Ok(written)
}

/// Gnuplot script drawing the energy and identity residual of an energy CSV.
pub fn emit_energy_plot(energy_csv: &str, dir: &Path) -> Result<PathBuf> {
    let script = format!(
        "# gnuplot script; run with `gnuplot energy.gp` inside this directory\n\
         set terminal pngcairo size 800,600\n\
         set datafile separator ','\n\
         set key autotitle columnhead\n\
         set xlabel 't'\n\
         set output 'energy.png'\n\
         plot '{energy_csv}' using 1:2 with lines\n\
         set output 'identity_residual.png'\n\
         plot '{energy_csv}' using 1:4 with lines\n"
    );
    let path = dir.join("energy.gp");
    write_text(&path, &script)?;
    Ok(path)
}

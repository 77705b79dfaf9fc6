//! CSV schemas shared between commands.

use std::path::Path;

use kzmsim_core::{IonSpecies, SimState, SweepPoint};

use crate::CliError;

fn wtr(path: &Path) -> Result<csv::Writer<std::fs::File>, CliError> {
    csv::Writer::from_path(path)
        .map_err(|e| CliError::runtime(format!("cannot write '{}': {e}", path.display())))
}

fn finish<W: std::io::Write>(mut w: csv::Writer<W>, path: &Path) -> Result<(), CliError> {
    w.flush()
        .map_err(|e| CliError::runtime(format!("flush '{}': {e}", path.display())))
}

/// (time_s, ion_index, x_m, y_m, z_m, vx, vy, vz) rows for a state series.
pub fn write_trajectory_csv(path: &Path, states: &[SimState]) -> Result<(), CliError> {
    let mut w = wtr(path)?;
    w.write_record(["time_s", "ion_index", "x_m", "y_m", "z_m", "vx", "vy", "vz"])
        .map_err(|e| CliError::runtime(e.to_string()))?;
    for s in states {
        for (i, (p, v)) in s.positions.iter().zip(&s.velocities).enumerate() {
            w.write_record([
                format!("{:.9e}", s.time),
                i.to_string(),
                format!("{:.9e}", p[0]),
                format!("{:.9e}", p[1]),
                format!("{:.9e}", p[2]),
                format!("{:.9e}", v[0]),
                format!("{:.9e}", v[1]),
                format!("{:.9e}", v[2]),
            ])
            .map_err(|e| CliError::runtime(e.to_string()))?;
        }
    }
    finish(w, path)
}

/// Read a final-state CSV (the trajectory schema). When several time
/// blocks are present the last one is taken.
pub fn read_final_state_csv(path: &Path, species: IonSpecies) -> Result<SimState, CliError> {
    let mut rdr = csv::Reader::from_path(path)
        .map_err(|e| CliError::config(format!("cannot read '{}': {e}", path.display())))?;
    let mut rows: Vec<(f64, usize, [f64; 3], [f64; 3])> = Vec::new();
    for rec in rdr.records() {
        let rec = rec.map_err(|e| CliError::config(format!("{}: {e}", path.display())))?;
        if rec.len() < 8 {
            return Err(CliError::config(format!(
                "{}: expected 8 columns, got {}",
                path.display(),
                rec.len()
            )));
        }
        let f = |k: usize| -> Result<f64, CliError> {
            rec[k]
                .trim()
                .parse()
                .map_err(|_| CliError::config(format!("{}: bad number '{}'", path.display(), &rec[k])))
        };
        let idx: usize = rec[1]
            .trim()
            .parse()
            .map_err(|_| CliError::config(format!("{}: bad ion index '{}'", path.display(), &rec[1])))?;
        rows.push((
            f(0)?,
            idx,
            [f(2)?, f(3)?, f(4)?],
            [f(5)?, f(6)?, f(7)?],
        ));
    }
    let last_t = rows
        .iter()
        .map(|r| r.0)
        .fold(f64::NEG_INFINITY, f64::max);
    let mut block: Vec<_> = rows.into_iter().filter(|r| r.0 == last_t).collect();
    if block.is_empty() {
        return Err(CliError::config(format!("{}: no data rows", path.display())));
    }
    block.sort_by_key(|r| r.1);
    for (k, row) in block.iter().enumerate() {
        if row.1 != k {
            return Err(CliError::config(format!(
                "{}: ion indices not contiguous at {}",
                path.display(),
                row.1
            )));
        }
    }
    Ok(SimState {
        time: last_t,
        positions: block.iter().map(|r| r.2).collect(),
        velocities: block.iter().map(|r| r.3).collect(),
        species,
    })
}

/// Sweep-point CSV in the documented column order.
pub fn write_sweep_csv(path: &Path, points: &[SweepPoint]) -> Result<(), CliError> {
    let mut w = wtr(path)?;
    w.write_record([
        "anisotropy",
        "tau_us",
        "gamma_rad_per_s2",
        "n1",
        "n2",
        "n_ambiguous",
        "n_failed",
        "n_total",
        "d",
        "d_stderr",
        "swap_fraction",
    ])
    .map_err(|e| CliError::runtime(e.to_string()))?;
    for p in points {
        w.write_record([
            format!("{}", p.anisotropy),
            format!("{:.6}", p.tau * 1e6),
            format!("{:.9e}", p.gamma),
            p.n1.to_string(),
            p.n2.to_string(),
            p.n_ambiguous.to_string(),
            p.n_failed.to_string(),
            p.n_total.to_string(),
            format!("{:.6}", p.d),
            format!("{:.6}", p.d_stderr),
            format!("{:.4}", p.swap_fraction),
        ])
        .map_err(|e| CliError::runtime(e.to_string()))?;
    }
    finish(w, path)
}

/// Read sweep points back for fitting. Only the columns the fitter uses
/// are required to carry meaning; counts are restored verbatim.
pub fn read_sweep_csv(path: &Path) -> Result<Vec<SweepPoint>, CliError> {
    let mut rdr = csv::Reader::from_path(path)
        .map_err(|e| CliError::config(format!("cannot read '{}': {e}", path.display())))?;
    let hdr = rdr
        .headers()
        .map_err(|e| CliError::config(format!("{}: {e}", path.display())))?
        .clone();
    let col = |name: &str| -> Result<usize, CliError> {
        hdr.iter().position(|h| h == name).ok_or_else(|| {
            CliError::config(format!("{}: missing column '{name}'", path.display()))
        })
    };
    let (c_an, c_tau, c_g, c_n1, c_n2, c_amb, c_fail, c_tot, c_d, c_se, c_swap) = (
        col("anisotropy")?,
        col("tau_us")?,
        col("gamma_rad_per_s2")?,
        col("n1")?,
        col("n2")?,
        col("n_ambiguous")?,
        col("n_failed")?,
        col("n_total")?,
        col("d")?,
        col("d_stderr")?,
        col("swap_fraction")?,
    );
    let mut out = Vec::new();
    for rec in rdr.records() {
        let rec = rec.map_err(|e| CliError::config(format!("{}: {e}", path.display())))?;
        let f = |k: usize| -> Result<f64, CliError> {
            rec[k]
                .trim()
                .parse()
                .map_err(|_| CliError::config(format!("{}: bad number '{}'", path.display(), &rec[k])))
        };
        let u = |k: usize| -> Result<usize, CliError> {
            rec[k]
                .trim()
                .parse()
                .map_err(|_| CliError::config(format!("{}: bad count '{}'", path.display(), &rec[k])))
        };
        out.push(SweepPoint {
            anisotropy: f(c_an)?,
            tau: f(c_tau)? * 1e-6,
            gamma: f(c_g)?,
            n1: u(c_n1)?,
            n2: u(c_n2)?,
            n_ambiguous: u(c_amb)?,
            n_failed: u(c_fail)?,
            n_total: u(c_tot)?,
            d: f(c_d)?,
            d_stderr: f(c_se)?,
            swap_fraction: f(c_swap)?,
        });
    }
    Ok(out)
}

/// Plot-data file: log10 gamma, log10 d and the symmetric log10 error,
/// for points with d > 0.
pub fn write_plot_data(path: &Path, points: &[SweepPoint]) -> Result<(), CliError> {
    let mut w = wtr(path)?;
    w.write_record(["log10_gamma", "log10_d", "log10_d_err"])
        .map_err(|e| CliError::runtime(e.to_string()))?;
    for p in points.iter().filter(|p| p.d > 0.0) {
        let err = if p.d_stderr > 0.0 {
            (p.d_stderr / p.d) / std::f64::consts::LN_10
        } else {
            0.0
        };
        w.write_record([
            format!("{:.6}", p.gamma.log10()),
            format!("{:.6}", p.d.log10()),
            format!("{:.6}", err),
        ])
        .map_err(|e| CliError::runtime(e.to_string()))?;
    }
    finish(w, path)
}

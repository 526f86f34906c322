//! Files written after a run.

use std::fmt::Write as _;
use std::fs::{self, File};
use std::io::BufWriter;
use std::path::{Path, PathBuf};

use crate::control_operator::iteration_csv;
use crate::error::Result;
use crate::snapshot::{write_moments_csv, write_series, write_snapshot};

use super::run::RunResults;

pub const ITERATIONS_CSV: &str = "iterations.csv";
pub const MOMENTS_CSV: &str = "moments.csv";
pub const PLOT_CSV: &str = "plot_data.csv";
pub const CONSTANTS_TXT: &str = "constants.txt";
pub const SUMMARY_TXT: &str = "summary.txt";
pub const CONFIG_TXT: &str = "config.txt";
pub const FINAL_SNAPSHOT: &str = "g_final.vsf";
pub const CONTROL_SERIES: &str = "control.vsfs";

/// Time series for plotting: mass, momentum and `sup |g|` outside `omega` per slice.
pub fn plot_csv(results: &RunResults) -> String {
    let mut s = String::from("t,mass,momentum_1,momentum_2,outside_omega_sup\n");
    for (m, o) in results.slices.iter().zip(&results.outside) {
        let _ = writeln!(s, "{:.16e},{:.16e},{:.16e},{:.16e},{:.16e}", m.t, m.mass, m.momentum[0], m.momentum[1], o);
    }
    s
}

/// Writes every artifact of `results` into `dir` and returns the paths written.
pub fn emit_outputs(results: &RunResults, dir: &Path) -> Result<Vec<PathBuf>> {
    fs::create_dir_all(dir)?;
    let mut written = Vec::new();
    let mut put = |name: &str, text: String| -> Result<()> {
        let p = dir.join(name);
        fs::write(&p, text)?;
        written.push(p);
        Ok(())
    };
    put(ITERATIONS_CSV, iteration_csv(&results.iterations))?;
    let mut moments = Vec::new();
    write_moments_csv(&mut moments, &results.slices)?;
    put(MOMENTS_CSV, String::from_utf8_lossy(&moments).into_owned())?;
    put(PLOT_CSV, plot_csv(results))?;
    put(CONSTANTS_TXT, results.constants_report.clone())?;
    let mut summary = results.summary.to_text();
    if let Some(tp) = &results.two_phase {
        let _ = write!(
            summary,
            "two_phase_junction_gap = {:e}\ntwo_phase_terminal_error = {:e}\ntwo_phase_converged = {}\n",
            tp.junction_gap,
            tp.terminal_error,
            tp.phase_a_converged && tp.phase_b_converged
        );
    }
    put(SUMMARY_TXT, summary)?;
    if let Some(cfg) = &results.config {
        put(CONFIG_TXT, cfg.to_text())?;
    }
    if let Some(f) = &results.final_state {
        let p = dir.join(FINAL_SNAPSHOT);
        let mut w = BufWriter::new(File::create(&p)?);
        write_snapshot(&mut w, f)?;
        written.push(p);
    }
    if let Some(c) = &results.control {
        if let Some(first) = c.control.first() {
            let p = dir.join(CONTROL_SERIES);
            let mut w = BufWriter::new(File::create(&p)?);
            write_series(&mut w, &first.grid, &c.control)?;
            written.push(p);
        }
    }
    Ok(written)
}

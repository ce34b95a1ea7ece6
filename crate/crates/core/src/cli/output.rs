//! Result rows and their on-disk forms.
//!
//! `results.csv` columns, in order:
//! `n_bath, tau_s, r, delta_ent_mc, delta_ent_mc_err, delta_ent_analytic,
//! delta_ent_oracle, epr12, epr12_err, epr21, epr21_err, epr_analytic,
//! fidelity_mc, fidelity_mc_err, fidelity_oracle, g_opt, theta_opt, n_traj,
//! rejected_traj, seed, fidelity_noisy`.
//!
//! Numbers use 9 significant digits. An empty cell means the quantity was
//! not computed in this mode; `nan` means its estimator failed. Wall-clock
//! times go to `timing.csv` so that `results.csv` depends only on the
//! configuration and seed.

use std::fmt::Write as _;
use std::fs;
use std::io;
use std::path::{Path, PathBuf};

pub const RESULTS_FILE: &str = "results.csv";
pub const TIMING_FILE: &str = "timing.csv";
pub const ENTANGLEMENT_FILE: &str = "entanglement.dat";
pub const FIDELITY_FILE: &str = "fidelity.dat";
pub const STEERING_FILE: &str = "steering.dat";

/// Relative fidelity error above which a row is flagged.
pub const FIDELITY_NOISE_FLAG: f64 = 0.1;

pub const COLUMNS: [&str; 21] = [
    "n_bath",
    "tau_s",
    "r",
    "delta_ent_mc",
    "delta_ent_mc_err",
    "delta_ent_analytic",
    "delta_ent_oracle",
    "epr12",
    "epr12_err",
    "epr21",
    "epr21_err",
    "epr_analytic",
    "fidelity_mc",
    "fidelity_mc_err",
    "fidelity_oracle",
    "g_opt",
    "theta_opt",
    "n_traj",
    "rejected_traj",
    "seed",
    "fidelity_noisy",
];

/// One sweep grid point. `None` marks a quantity outside the run mode.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct ResultRow {
    pub n_bath: f64,
    pub tau_s: f64,
    pub r: f64,
    pub delta_ent_mc: Option<(f64, f64)>,
    pub delta_ent_analytic: f64,
    pub delta_ent_oracle: Option<f64>,
    pub epr12: Option<(f64, f64)>,
    pub epr21: Option<(f64, f64)>,
    pub epr_analytic: f64,
    pub fidelity_mc: Option<(f64, f64)>,
    pub fidelity_oracle: Option<f64>,
    pub g_opt: f64,
    pub theta_opt: f64,
    pub n_traj: u64,
    pub rejected_traj: u64,
    pub seed: u64,
    pub wall_time: f64,
}

impl ResultRow {
    pub fn fidelity_noisy(&self) -> Option<bool> {
        self.fidelity_mc
            .map(|(f, se)| !(se / f <= FIDELITY_NOISE_FLAG))
    }

    fn cells(&self) -> Vec<String> {
        let opt = |v: Option<f64>| v.map_or_else(String::new, format_sig9);
        let pair = |v: Option<(f64, f64)>| [opt(v.map(|p| p.0)), opt(v.map(|p| p.1))];
        let [de, de_err] = pair(self.delta_ent_mc);
        let [e12, e12_err] = pair(self.epr12);
        let [e21, e21_err] = pair(self.epr21);
        let [f, f_err] = pair(self.fidelity_mc);
        vec![
            format_sig9(self.n_bath),
            format_sig9(self.tau_s),
            format_sig9(self.r),
            de,
            de_err,
            format_sig9(self.delta_ent_analytic),
            opt(self.delta_ent_oracle),
            e12,
            e12_err,
            e21,
            e21_err,
            format_sig9(self.epr_analytic),
            f,
            f_err,
            opt(self.fidelity_oracle),
            format_sig9(self.g_opt),
            format_sig9(self.theta_opt),
            self.n_traj.to_string(),
            self.rejected_traj.to_string(),
            self.seed.to_string(),
            self.fidelity_noisy().map_or_else(String::new, |b| (b as u8).to_string()),
        ]
    }
}

/// `%.9g`-style text: 9 significant digits, trailing zeros dropped,
/// exponent form outside `[1e-5, 1e9)`.
pub fn format_sig9(x: f64) -> String {
    if x.is_nan() {
        return "nan".into();
    }
    if x.is_infinite() {
        return if x > 0.0 { "inf".into() } else { "-inf".into() };
    }
    if x == 0.0 {
        return "0".into();
    }
    let sci = format!("{x:.8e}");
    let (mantissa, exp) = sci.split_once('e').expect("exponent form");
    let exp: i32 = exp.parse().expect("integer exponent");
    if (-5..9).contains(&exp) {
        let decimals = (8 - exp).max(0) as usize;
        trim_zeros(&format!("{x:.decimals$}"))
    } else {
        let sign = if exp < 0 { '-' } else { '+' };
        format!("{}e{sign}{:02}", trim_zeros(mantissa), exp.abs())
    }
}

fn trim_zeros(s: &str) -> String {
    if s.contains('.') {
        s.trim_end_matches('0').trim_end_matches('.').to_string()
    } else {
        s.to_string()
    }
}

pub fn results_csv(rows: &[ResultRow]) -> String {
    let mut out = COLUMNS.join(",");
    out.push('\n');
    for row in rows {
        out.push_str(&row.cells().join(","));
        out.push('\n');
    }
    out
}

pub fn timing_csv(rows: &[ResultRow]) -> String {
    let mut out = String::from("n_bath,tau_s,r,n_traj,wall_time\n");
    for row in rows {
        let _ = writeln!(
            out,
            "{},{},{},{},{:.3}",
            format_sig9(row.n_bath),
            format_sig9(row.tau_s),
            format_sig9(row.r),
            row.n_traj,
            row.wall_time
        );
    }
    out
}

/// Plot series over `n_bath`, one gnuplot index block per `(r, τ_s)`.
fn plot_file(rows: &[ResultRow], title: &str, header: &str, line: impl Fn(&ResultRow) -> Vec<String>) -> String {
    let mut groups: Vec<((u64, u64), Vec<&ResultRow>)> = Vec::new();
    for row in rows {
        let key = (row.r.to_bits(), row.tau_s.to_bits());
        match groups.iter_mut().find(|(k, _)| *k == key) {
            Some((_, g)) => g.push(row),
            None => groups.push((key, vec![row])),
        }
    }
    let mut out = format!("# {title}\n");
    for (i, (_, group)) in groups.iter_mut().enumerate() {
        group.sort_by(|a, b| a.n_bath.total_cmp(&b.n_bath));
        if i > 0 {
            out.push_str("\n\n");
        }
        let _ = writeln!(out, "# r = {}, tau_s = {}", format_sig9(group[0].r), format_sig9(group[0].tau_s));
        let _ = writeln!(out, "# {header}");
        for row in group.iter() {
            out.push_str(&line(row).join(" "));
            out.push('\n');
        }
    }
    out
}

fn cell(v: Option<f64>) -> String {
    v.map_or_else(|| "nan".to_string(), format_sig9)
}

pub fn entanglement_series(rows: &[ResultRow]) -> String {
    plot_file(
        rows,
        "entanglement criterion vs bath occupation",
        "n_bath delta_ent_mc delta_ent_mc_err delta_ent_analytic delta_ent_oracle",
        |r| {
            vec![
                format_sig9(r.n_bath),
                cell(r.delta_ent_mc.map(|p| p.0)),
                cell(r.delta_ent_mc.map(|p| p.1)),
                format_sig9(r.delta_ent_analytic),
                cell(r.delta_ent_oracle),
            ]
        },
    )
}

pub fn fidelity_series(rows: &[ResultRow]) -> String {
    plot_file(
        rows,
        "fidelity vs bath occupation",
        "n_bath fidelity_mc fidelity_mc_err fidelity_oracle",
        |r| {
            vec![
                format_sig9(r.n_bath),
                cell(r.fidelity_mc.map(|p| p.0)),
                cell(r.fidelity_mc.map(|p| p.1)),
                cell(r.fidelity_oracle),
            ]
        },
    )
}

pub fn steering_series(rows: &[ResultRow]) -> String {
    plot_file(
        rows,
        "EPR steering vs bath occupation",
        "n_bath epr12 epr12_err epr21 epr21_err epr_analytic",
        |r| {
            vec![
                format_sig9(r.n_bath),
                cell(r.epr12.map(|p| p.0)),
                cell(r.epr12.map(|p| p.1)),
                cell(r.epr21.map(|p| p.0)),
                cell(r.epr21.map(|p| p.1)),
                format_sig9(r.epr_analytic),
            ]
        },
    )
}

/// Writes the result table, timings and the three plot series into `dir`,
/// creating it if needed. Returns the written paths.
pub fn write_outputs(rows: &[ResultRow], dir: &Path) -> io::Result<Vec<PathBuf>> {
    if rows.is_empty() {
        return Err(io::Error::new(io::ErrorKind::InvalidInput, "no result rows to write"));
    }
    fs::create_dir_all(dir)?;
    let files = [
        (RESULTS_FILE, results_csv(rows)),
        (TIMING_FILE, timing_csv(rows)),
        (ENTANGLEMENT_FILE, entanglement_series(rows)),
        (FIDELITY_FILE, fidelity_series(rows)),
        (STEERING_FILE, steering_series(rows)),
    ];
    let mut written = Vec::with_capacity(files.len());
    for (name, text) in files {
        let path = dir.join(name);
        fs::write(&path, text)?;
        written.push(path);
    }
    Ok(written)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn row(n: f64, tau_s: f64) -> ResultRow {
        ResultRow {
            n_bath: n,
            tau_s,
            r: 1.0,
            delta_ent_mc: Some((0.138, 0.001)),
            delta_ent_analytic: 0.138_147,
            delta_ent_oracle: Some(0.1375),
            epr12: Some((0.27, 0.002)),
            epr21: Some((0.271, 0.002)),
            epr_analytic: 0.271_209,
            fidelity_mc: Some((0.9, 0.2)),
            fidelity_oracle: Some(0.95),
            g_opt: 1.0,
            theta_opt: 0.0,
            n_traj: 1000,
            rejected_traj: 0,
            seed: 5,
            wall_time: 1.5,
        }
    }

    #[test]
    fn sig9_formatting() {
        assert_eq!(format_sig9(0.1), "0.1");
        assert_eq!(format_sig9(1.0 / 3.0), "0.333333333");
        assert_eq!(format_sig9(123_456_789.0), "123456789");
        assert_eq!(format_sig9(1_234_567_890.0), "1.23456789e+09");
        assert_eq!(format_sig9(1.5e-7), "1.5e-07");
        assert_eq!(format_sig9(-2.5), "-2.5");
        assert_eq!(format_sig9(0.000_123_456_789_12), "0.000123456789");
        assert_eq!(format_sig9(f64::NAN), "nan");
        assert_eq!(format_sig9(0.0), "0");
        assert_eq!(format_sig9(9_999_999_995.0), "1e+10");
    }

    #[test]
    fn one_row_csv() {
        let text = results_csv(&[row(0.0, 16.3)]);
        let lines: Vec<_> = text.lines().collect();
        assert_eq!(lines.len(), 2);
        assert_eq!(lines[0].split(',').count(), COLUMNS.len());
        assert_eq!(lines[1].split(',').count(), COLUMNS.len());
        assert!(!text.contains('\r'));
        assert!(lines[1].ends_with(",5,1"), "{}", lines[1]);
    }

    #[test]
    fn missing_and_failed_cells() {
        let mut r = row(0.0, 16.3);
        r.delta_ent_mc = Some((f64::NAN, f64::NAN));
        r.epr12 = None;
        let text = results_csv(&[r]);
        let cells: Vec<_> = text.lines().nth(1).unwrap().split(',').collect();
        assert_eq!(cells[3], "nan");
        assert_eq!(cells[4], "nan");
        assert_eq!(cells[7], "");
        assert_eq!(cells[8], "");
    }

    #[test]
    fn plot_blocks_per_storage_time() {
        let rows: Vec<_> = [16.3, 40.8, 81.7]
            .iter()
            .flat_map(|&t| [1.0, 0.0].map(|n| row(n, t)))
            .collect();
        let text = entanglement_series(&rows);
        assert_eq!(text.matches("# r = 1, tau_s =").count(), 3);
        assert_eq!(text.split("\n\n\n").count(), 3);
        // sorted by occupation within a block
        let block = text.split("\n\n\n").next().unwrap();
        let data: Vec<_> = block.lines().filter(|l| !l.starts_with('#')).collect();
        assert!(data[0].starts_with("0 "));
        assert!(data[1].starts_with("1 "));
    }

    #[test]
    fn writes_all_files() {
        let dir = tempfile::tempdir().unwrap();
        let out = dir.path().join("nested");
        let files = write_outputs(&[row(0.0, 16.3)], &out).unwrap();
        assert_eq!(files.len(), 5);
        for f in files {
            assert!(f.exists());
        }
        assert!(write_outputs(&[], &out).is_err());
    }
}

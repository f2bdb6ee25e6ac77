//! CSV and text artifacts. Every number is written with 17 significant
//! digits so that files compare byte for byte across runs.

use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use minimax_core::trajectory::PiecewiseTrajectory;

use crate::error::HResult;

pub fn num(x: f64) -> String {
    format!("{x:.16e}")
}

/// Collects artifacts under an optional output directory.
pub struct Artifacts {
    dir: Option<PathBuf>,
    written: Vec<PathBuf>,
}

impl Artifacts {
    pub fn new(dir: Option<&Path>) -> HResult<Self> {
        if let Some(d) = dir {
            fs::create_dir_all(d)?;
        }
        Ok(Artifacts {
            dir: dir.map(Path::to_path_buf),
            written: Vec::new(),
        })
    }

    pub fn files(&self) -> &[PathBuf] {
        &self.written
    }

    fn path(&mut self, name: &str) -> Option<PathBuf> {
        let p = self.dir.as_ref()?.join(name);
        self.written.push(p.clone());
        Some(p)
    }

    /// Table with a header row.
    pub fn table(&mut self, name: &str, header: &[&str], rows: &[Vec<String>]) -> HResult<()> {
        let Some(p) = self.path(name) else {
            return Ok(());
        };
        let mut w = csv::Writer::from_path(p)?;
        w.write_record(header)?;
        for r in rows {
            w.write_record(r)?;
        }
        w.flush()?;
        Ok(())
    }

    /// Two-column `key,value` table.
    pub fn key_values(&mut self, name: &str, rows: &[(String, String)]) -> HResult<()> {
        let rows: Vec<Vec<String>> = rows
            .iter()
            .map(|(k, v)| vec![k.clone(), v.clone()])
            .collect();
        self.table(name, &["key", "value"], &rows)
    }

    pub fn trajectory(
        &mut self,
        name: &str,
        traj: &PiecewiseTrajectory,
        labels: &[String],
    ) -> HResult<()> {
        let Some(p) = self.path(name) else {
            return Ok(());
        };
        let file = fs::File::create(p)?;
        traj.write_csv(std::io::BufWriter::new(file), labels)?;
        Ok(())
    }

    /// Gnuplot script drawing every column of a trajectory file against `t`.
    pub fn gnuplot(&mut self, data: &str, labels: &[String]) -> HResult<()> {
        let script = data.trim_end_matches(".csv").to_string() + ".gp";
        let Some(p) = self.path(&script) else {
            return Ok(());
        };
        let mut f = fs::File::create(p)?;
        writeln!(f, "set datafile separator ','")?;
        writeln!(f, "set key autotitle columnhead")?;
        writeln!(f, "set xlabel 't'")?;
        let curves: Vec<String> = (0..labels.len())
            .map(|i| format!("'{data}' using 1:{} with lines", i + 3))
            .collect();
        writeln!(f, "plot {}", curves.join(", \\\n     "))?;
        Ok(())
    }
}

/// Fixed-width text table for the terminal.
pub fn text_table(header: &[&str], rows: &[Vec<String>]) -> String {
    let cols = header.len();
    let mut width: Vec<usize> = header.iter().map(|h| h.len()).collect();
    for r in rows {
        for (i, c) in r.iter().enumerate().take(cols) {
            width[i] = width[i].max(c.len());
        }
    }
    let line = |cells: Vec<&str>| -> String {
        cells
            .iter()
            .enumerate()
            .map(|(i, c)| format!("{c:<w$}", w = width[i]))
            .collect::<Vec<_>>()
            .join("  ")
            .trim_end()
            .to_string()
    };
    let mut out = line(header.to_vec()) + "\n";
    out += &line(
        width
            .iter()
            .map(|w| "-".repeat(*w))
            .collect::<Vec<_>>()
            .iter()
            .map(String::as_str)
            .collect(),
    );
    out.push('\n');
    for r in rows {
        out += &line(r.iter().map(String::as_str).collect());
        out.push('\n');
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn numbers_round_trip_exactly() {
        for x in [0.1, 1.0 / 3.0, -2.5e-300, 6.02214076e23] {
            assert_eq!(num(x).parse::<f64>().unwrap(), x);
        }
    }

    #[test]
    fn tables_align_columns() {
        let t = text_table(
            &["check", "ok"],
            &[
                vec!["a".into(), "pass".into()],
                vec!["longer".into(), "fail".into()],
            ],
        );
        let lines: Vec<&str> = t.lines().collect();
        assert_eq!(lines.len(), 4);
        assert!(lines[3].starts_with("longer  fail"));
    }

    #[test]
    fn nothing_is_written_without_a_directory() {
        let mut a = Artifacts::new(None).unwrap();
        a.key_values("x.csv", &[("k".into(), "v".into())]).unwrap();
        assert!(a.files().is_empty());
    }
}

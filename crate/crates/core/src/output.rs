//! Result files: CSV curves, JSON summaries and optional gnuplot scripts.
//!
//! Every file starts with the artifact version and the resolved run spec, as
//! `#` comment lines in CSVs and as top-level fields in JSON.

use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use serde_json::{json, Value};

use crate::config::RunSpec;
use crate::error::{Error, Result};
use crate::scaling::{Model, ScalingFit};

pub const VERSION: &str = env!("CARGO_PKG_VERSION");

/// 17 significant digits, enough to round-trip any `f64`.
pub fn float(x: f64) -> String {
    format!("{x:.16e}")
}

fn io_error(path: &Path) -> impl FnOnce(std::io::Error) -> Error + '_ {
    move |source| Error::Io {
        path: path.display().to_string(),
        source,
    }
}

/// Output directory of one run; records the files it writes.
#[derive(Debug)]
pub struct OutputDir {
    root: PathBuf,
    spec: Value,
    written: Vec<PathBuf>,
}

impl OutputDir {
    pub fn create(spec: &RunSpec) -> Result<Self> {
        std::fs::create_dir_all(&spec.out).map_err(io_error(&spec.out))?;
        Ok(Self {
            root: spec.out.clone(),
            spec: serde_json::to_value(spec).expect("run spec serializes"),
            written: Vec::new(),
        })
    }

    pub fn written(&self) -> &[PathBuf] {
        &self.written
    }

    fn write(&mut self, name: &str, contents: &str) -> Result<()> {
        let path = self.root.join(name);
        std::fs::write(&path, contents).map_err(io_error(&path))?;
        self.written.push(path);
        Ok(())
    }

    fn preamble(&self) -> String {
        format!("# qmap {VERSION}\n# spec: {}\n", self.spec)
    }

    /// Writes `header` followed by `rows`, one line each.
    pub fn csv<I>(&mut self, name: &str, header: &str, rows: I) -> Result<()>
    where
        I: IntoIterator<Item = String>,
    {
        let mut s = self.preamble();
        s.push_str(header);
        s.push('\n');
        for row in rows {
            s.push_str(&row);
            s.push('\n');
        }
        self.write(name, &s)
    }

    /// Writes `T,F` blocks, one per dimension, headed by `# N=<n>` and
    /// separated by two blank lines (gnuplot `index` blocks).
    pub fn blocks(&mut self, name: &str, header: &str, blocks: &[(usize, Vec<String>)]) -> Result<()> {
        let mut s = self.preamble();
        s.push_str(header);
        s.push('\n');
        for (i, (n, rows)) in blocks.iter().enumerate() {
            if i > 0 {
                s.push_str("\n\n");
            }
            let _ = writeln!(s, "# N={n}");
            for row in rows {
                s.push_str(row);
                s.push('\n');
            }
        }
        self.write(name, &s)
    }

    /// Writes `{"qmap_version", "spec", "result"}` as pretty JSON.
    pub fn json(&mut self, name: &str, result: Value) -> Result<()> {
        let doc = json!({
            "qmap_version": VERSION,
            "spec": self.spec,
            "result": result,
        });
        let mut s = serde_json::to_string_pretty(&doc).expect("json value serializes");
        s.push('\n');
        self.write(name, &s)
    }

    pub fn text(&mut self, name: &str, contents: &str) -> Result<()> {
        self.write(name, contents)
    }
}

/// A row of formatted floats.
pub fn row(values: &[f64]) -> String {
    values.iter().map(|&v| float(v)).collect::<Vec<_>>().join(",")
}

const GP_PREAMBLE: &str = "\
set datafile separator ','
set datafile commentschars '#'
";

/// Eigenphase against `r` from `spectrum.csv`.
pub fn spectrum_plot(title: &str) -> String {
    format!(
        "{GP_PREAMBLE}set title '{title}'
set xlabel 'r'
set ylabel 'eigenphase (mod 2π)'
set yrange [0:2*pi]
set key off
plot 'spectrum.csv' using 1:($3 - 2*pi*floor($3/(2*pi))) with dots
"
    )
}

/// Mean squared shift against `h` from `shifts.csv`, with the fitted models.
pub fn scaling_plot(title: &str, fit: &ScalingFit) -> String {
    let p = |m: Model, k: &str| fit.model(m).params[k];
    format!(
        "{GP_PREAMBLE}set title '{title}'
set logscale xy
set xlabel 'h'
set ylabel 'mean squared shift (spacing units)'
power(x) = {a} * x**{s}
constant(x) = {c0}
logmodel(x) = {c} / ({alpha} + {beta}*log(1.0/x))**2
plot 'shifts.csv' using 2:3 with points pt 7 title 'computed', \\
     power(x) title 'power law', constant(x) title 'constant', logmodel(x) title 'log model'
",
        a = float(p(Model::PowerLaw, "amplitude")),
        s = float(p(Model::PowerLaw, "exponent")),
        c0 = float(p(Model::Constant, "amplitude")),
        c = float(p(Model::LogModel, "c")),
        alpha = float(p(Model::LogModel, "alpha")),
        beta = float(p(Model::LogModel, "beta")),
    )
}

/// Variance against `N` and the `F(T)` curves.
pub fn ergodicity_plot(title: &str, dimensions: &[usize]) -> String {
    let curves: Vec<String> = dimensions
        .iter()
        .enumerate()
        .map(|(i, n)| format!("'f_curve.csv' index {i} using 1:2 with linespoints title 'N={n}'"))
        .collect();
    format!(
        "{GP_PREAMBLE}set multiplot layout 1,2 title '{title}'
set logscale xy
set xlabel 'N'
set ylabel 'variance of diagonal elements'
plot 'ergodicity.csv' using 1:2 with linespoints pt 7 title 'variance'
set logscale x
unset logscale y
set xlabel 'T'
set ylabel 'F(T)'
plot {}
unset multiplot
",
        curves.join(", \\\n     ")
    )
}

/// Classical and quantum autocorrelation against `t`.
pub fn correlator_plot(title: &str) -> String {
    format!(
        "{GP_PREAMBLE}set title '{title}'
set xlabel 't'
set ylabel 'correlation'
plot 'correlator.csv' using 1:2 with lines title 'classical C(t)', \\
     '' using 1:3 with points pt 7 title 'quantum f(t)'
"
    )
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn floats_round_trip() {
        for x in [0.1, 1.0 / 3.0, -2.5e-300, 6.02214076e23, std::f64::consts::PI] {
            let s = float(x);
            assert_eq!(s.parse::<f64>().unwrap(), x, "{s}");
        }
        assert_eq!(float(0.5), "5.0000000000000000e-1");
    }

    #[test]
    fn rows_join_with_commas() {
        assert_eq!(row(&[1.0, 2.0]), "1.0000000000000000e0,2.0000000000000000e0");
    }
}

//! Machine-readable run reports: JSON and CSV writers plus plot-data files.
//!
//! Every float is serialized with 17 significant digits (`{:.16e}`), enough
//! to reproduce the exact f64 bit pattern on parse, and the JSON and CSV
//! writers share the formatter so both outputs agree to the last digit.

use std::fs;
use std::io::Write;
use std::path::Path;

use serde::{Deserialize, Serialize};
use serde_json::{json, Map, Number, Value};
use thiserror::Error;

use crate::objective::{ObjectiveFunction, Sense};
use crate::search::{ExtremumResult, RunReport, SearchConfig};

#[derive(Debug, Error)]
pub enum ReportError {
    #[error("cannot write {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
    #[error("malformed report: {0}")]
    Parse(#[from] serde_json::Error),
    #[error("plot data is limited to 1- and 2-dimensional functions, got dimension {0}")]
    PlotDimension(usize),
}

fn io_err(path: &Path) -> impl FnOnce(std::io::Error) -> ReportError + '_ {
    move |source| ReportError::Io {
        path: path.display().to_string(),
        source,
    }
}

/// 17 significant digits; round-trips any finite f64 exactly.
pub fn fmt17(x: f64) -> String {
    format!("{x:.16e}")
}

fn num17(x: f64) -> Value {
    debug_assert!(x.is_finite());
    // with arbitrary_precision enabled the literal text is preserved
    Value::Number(fmt17(x).parse::<Number>().expect("valid number literal"))
}

/// The function under test, as it appeared on the command line.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum FunctionSpec {
    Builtin {
        builtin: String,
    },
    Expression {
        expr: String,
        domain: Vec<[f64; 2]>,
    },
}

/// Effective parameters of a run; sufficient to reproduce it bit-exactly.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RunConfigDoc {
    pub command: String,
    pub function: FunctionSpec,
    /// "min", "max", or "both"
    pub sense: String,
    pub n: Vec<usize>,
    pub n1: Vec<usize>,
    pub epsilon: f64,
    pub seed: u64,
    pub neighbor_scheme: String,
    pub check_boundary: bool,
    pub alpha: f64,
    pub beta: f64,
    pub rho: f64,
    pub c1: f64,
    pub tau0: f64,
    pub max_inner_iters: Option<usize>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ExtremumDoc {
    pub point: Vec<f64>,
    pub value: f64,
    pub cell_size: Vec<f64>,
    pub on_boundary: bool,
    /// which pass found it: "min" or "max"
    pub sense: String,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct StatsDoc {
    pub outer_iterations: usize,
    pub inner_steps_total: usize,
    pub evaluations: u64,
    pub wall_time_s: f64,
    pub caps_hit: usize,
}

/// The full report document.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ReportDoc {
    pub config: RunConfigDoc,
    pub extrema: Vec<ExtremumDoc>,
    pub stats: StatsDoc,
}

impl ReportDoc {
    /// Assemble from one or two engine runs (two under sense "both").
    pub fn from_runs(
        config: RunConfigDoc,
        runs: &[(Sense, &RunReport)],
    ) -> ReportDoc {
        let mut extrema = Vec::new();
        let mut stats = StatsDoc {
            outer_iterations: 0,
            inner_steps_total: 0,
            evaluations: 0,
            wall_time_s: 0.0,
            caps_hit: 0,
        };
        for (sense, report) in runs {
            for e in &report.extrema {
                extrema.push(ExtremumDoc {
                    point: e.point.clone(),
                    value: e.value,
                    cell_size: e.cell_size.clone(),
                    on_boundary: e.on_boundary,
                    sense: sense.label().to_string(),
                });
            }
            stats.outer_iterations += report.outer_iterations;
            stats.inner_steps_total += report.inner_steps_total;
            stats.evaluations += report.evaluations;
            stats.wall_time_s += report.wall_time;
            stats.caps_hit += report.caps_hit;
        }
        extrema.sort_by(|a, b| {
            a.point
                .partial_cmp(&b.point)
                .unwrap()
                .then_with(|| a.sense.cmp(&b.sense))
        });
        ReportDoc {
            config,
            extrema,
            stats,
        }
    }

    /// JSON value with every float rendered at 17 significant digits.
    pub fn to_json(&self) -> Value {
        let function = match &self.config.function {
            FunctionSpec::Builtin { builtin } => json!({ "builtin": builtin }),
            FunctionSpec::Expression { expr, domain } => {
                let dom: Vec<Value> = domain
                    .iter()
                    .map(|[lo, hi]| Value::Array(vec![num17(*lo), num17(*hi)]))
                    .collect();
                json!({ "expr": expr, "domain": dom })
            }
        };
        let mut config = Map::new();
        config.insert("command".into(), json!(self.config.command));
        config.insert("function".into(), function);
        config.insert("sense".into(), json!(self.config.sense));
        config.insert("n".into(), json!(self.config.n));
        config.insert("n1".into(), json!(self.config.n1));
        config.insert("epsilon".into(), num17(self.config.epsilon));
        config.insert("seed".into(), json!(self.config.seed));
        config.insert("neighbor_scheme".into(), json!(self.config.neighbor_scheme));
        config.insert("check_boundary".into(), json!(self.config.check_boundary));
        config.insert("alpha".into(), num17(self.config.alpha));
        config.insert("beta".into(), num17(self.config.beta));
        config.insert("rho".into(), num17(self.config.rho));
        config.insert("c1".into(), num17(self.config.c1));
        config.insert("tau0".into(), num17(self.config.tau0));
        config.insert("max_inner_iters".into(), json!(self.config.max_inner_iters));

        let extrema: Vec<Value> = self
            .extrema
            .iter()
            .map(|e| {
                json!({
                    "point": e.point.iter().map(|&x| num17(x)).collect::<Vec<_>>(),
                    "value": num17(e.value),
                    "cell_size": e.cell_size.iter().map(|&x| num17(x)).collect::<Vec<_>>(),
                    "on_boundary": e.on_boundary,
                    "sense": e.sense,
                })
            })
            .collect();

        json!({
            "config": Value::Object(config),
            "extrema": extrema,
            "stats": {
                "outer_iterations": self.stats.outer_iterations,
                "inner_steps_total": self.stats.inner_steps_total,
                "evaluations": self.stats.evaluations,
                "wall_time_s": num17(self.stats.wall_time_s),
                "caps_hit": self.stats.caps_hit,
            },
        })
    }

    pub fn write_json(&self, path: &Path) -> Result<(), ReportError> {
        let text = serde_json::to_string_pretty(&self.to_json())?;
        fs::write(path, text + "\n").map_err(io_err(path))
    }

    pub fn parse_json(text: &str) -> Result<ReportDoc, ReportError> {
        Ok(serde_json::from_str(text)?)
    }

    /// CSV with header `x1,...,xd,value,on_boundary,sense`, one extremum per
    /// row, numbers at 17 significant digits.
    pub fn to_csv(&self) -> String {
        let dim = self
            .extrema
            .first()
            .map(|e| e.point.len())
            .unwrap_or_else(|| match &self.config.function {
                FunctionSpec::Builtin { builtin } => {
                    if builtin == "f3" {
                        2
                    } else {
                        1
                    }
                }
                FunctionSpec::Expression { domain, .. } => domain.len(),
            });
        let mut out = String::new();
        for k in 1..=dim {
            out.push_str(&format!("x{k},"));
        }
        out.push_str("value,on_boundary,sense\n");
        for e in &self.extrema {
            for x in &e.point {
                out.push_str(&fmt17(*x));
                out.push(',');
            }
            out.push_str(&format!("{},{},{}\n", fmt17(e.value), e.on_boundary, e.sense));
        }
        out
    }

    pub fn write_csv(&self, path: &Path) -> Result<(), ReportError> {
        fs::write(path, self.to_csv()).map_err(io_err(path))
    }
}

impl RunConfigDoc {
    pub fn from_search(
        command: &str,
        function: FunctionSpec,
        sense_label: &str,
        cfg: &SearchConfig,
    ) -> RunConfigDoc {
        RunConfigDoc {
            command: command.to_string(),
            function,
            sense: sense_label.to_string(),
            n: cfg.n.clone(),
            n1: cfg.n1.clone(),
            epsilon: cfg.epsilon,
            seed: cfg.seed,
            neighbor_scheme: cfg.neighbor_scheme.label().to_string(),
            check_boundary: cfg.check_boundary,
            alpha: cfg.aco.alpha,
            beta: cfg.aco.beta,
            rho: cfg.aco.rho,
            c1: cfg.aco.c1,
            tau0: cfg.aco.tau0,
            max_inner_iters: cfg.aco.max_inner_iters,
        }
    }
}

/// Write `curve.csv` (dense samples of `f`) and `extrema.csv` (the found
/// points) under `dir`, for any plotting tool. Limited to dim <= 2.
pub fn emit_plot_data(
    f: &ObjectiveFunction,
    results: &[(ExtremumResult, Sense)],
    dir: &Path,
) -> Result<(), ReportError> {
    let dim = f.domain().dim();
    if dim > 2 {
        return Err(ReportError::PlotDimension(dim));
    }
    fs::create_dir_all(dir).map_err(io_err(dir))?;

    let curve_path = dir.join("curve.csv");
    let mut curve = fs::File::create(&curve_path).map_err(io_err(&curve_path))?;
    let lower = f.domain().lower();
    match dim {
        1 => {
            writeln!(curve, "x,f").map_err(io_err(&curve_path))?;
            let samples = 2000usize;
            for i in 0..=samples {
                let x = lower[0] + f.domain().width(0) * i as f64 / samples as f64;
                let v = f.evaluate(&[x]).map_err(|e| ReportError::Io {
                    path: curve_path.display().to_string(),
                    source: std::io::Error::other(e.to_string()),
                })?;
                writeln!(curve, "{x},{v}").map_err(io_err(&curve_path))?;
            }
        }
        _ => {
            writeln!(curve, "x1,x2,f").map_err(io_err(&curve_path))?;
            let samples = 200usize;
            for i in 0..=samples {
                let x1 = lower[0] + f.domain().width(0) * i as f64 / samples as f64;
                for j in 0..=samples {
                    let x2 = lower[1] + f.domain().width(1) * j as f64 / samples as f64;
                    let v = f.evaluate(&[x1, x2]).map_err(|e| ReportError::Io {
                        path: curve_path.display().to_string(),
                        source: std::io::Error::other(e.to_string()),
                    })?;
                    writeln!(curve, "{x1},{x2},{v}").map_err(io_err(&curve_path))?;
                }
            }
        }
    }

    let extrema_path = dir.join("extrema.csv");
    let mut out = String::new();
    for k in 1..=dim {
        out.push_str(&format!("x{k},"));
    }
    out.push_str("value,on_boundary,sense\n");
    for (e, sense) in results {
        for x in &e.point {
            out.push_str(&fmt17(*x));
            out.push(',');
        }
        out.push_str(&format!(
            "{},{},{}\n",
            fmt17(e.value),
            e.on_boundary,
            sense.label()
        ));
    }
    fs::write(&extrema_path, out).map_err(io_err(&extrema_path))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::colony::AcoParams;
    use crate::grid::NeighborScheme;

    fn sample_doc() -> ReportDoc {
        let cfg = SearchConfig {
            n: vec![20],
            n1: vec![10],
            epsilon: 1e-4,
            aco: AcoParams::default(),
            sense: Sense::Maximize,
            neighbor_scheme: NeighborScheme::Full,
            seed: 7,
            check_boundary: true,
        };
        let report = RunReport {
            extrema: vec![ExtremumResult {
                point: vec![0.25],
                value: 0.1234567890123456789,
                cell_size: vec![5e-6],
                on_boundary: false,
            }],
            outer_iterations: 5,
            inner_steps_total: 42,
            evaluations: 320,
            wall_time: 0.0625,
            caps_hit: 0,
        };
        ReportDoc::from_runs(
            RunConfigDoc::from_search(
                "extrema",
                FunctionSpec::Builtin { builtin: "f1".into() },
                "max",
                &cfg,
            ),
            &[(Sense::Maximize, &report)],
        )
    }

    #[test]
    fn json_roundtrip_is_exact() {
        let doc = sample_doc();
        let text = serde_json::to_string_pretty(&doc.to_json()).unwrap();
        let parsed = ReportDoc::parse_json(&text).unwrap();
        assert_eq!(parsed, doc);
    }

    #[test]
    fn empty_extrema_is_valid_json() {
        let mut doc = sample_doc();
        doc.extrema.clear();
        let text = serde_json::to_string(&doc.to_json()).unwrap();
        let parsed = ReportDoc::parse_json(&text).unwrap();
        assert!(parsed.extrema.is_empty());
    }

    #[test]
    fn csv_and_json_agree_to_the_last_digit() {
        let doc = sample_doc();
        let csv = doc.to_csv();
        let row = csv.lines().nth(1).unwrap();
        let cells: Vec<&str> = row.split(',').collect();
        let json = doc.to_json();
        let jpoint = json["extrema"][0]["point"][0].to_string();
        let jvalue = json["extrema"][0]["value"].to_string();
        assert_eq!(cells[0], jpoint);
        assert_eq!(cells[1], jvalue);
    }

    #[test]
    fn csv_header_matches_dimension() {
        let doc = sample_doc();
        assert!(doc.to_csv().starts_with("x1,value,on_boundary,sense\n"));
    }

    #[test]
    fn fmt17_roundtrips_f64() {
        for x in [0.1, 1.0 / 3.0, 5e-324, 1.7976931348623157e308, -0.0, 6.0] {
            let s = fmt17(x);
            let back: f64 = s.parse().unwrap();
            assert_eq!(back.to_bits(), x.to_bits(), "{s}");
        }
    }
}

//! On-disk formats and the embedded example problems.
//!
//! # BUNDLE format
//!
//! Plain text. A line starting with `#` is a comment. A matrix is a block
//! of consecutive lines, one row per line, entries separated by whitespace
//! and/or commas. Blocks are separated by one or more blank lines. Angle
//! matrices use the same format with a single `n × (k−1)` block.
//!
//! Written values use 16 significant digits in scientific notation.
//!
//! # Trace CSV
//!
//! Header `t,F,grad_norm,rel_residual,step,backtracks`, then one row per
//! iteration starting at `t = 0`, where `step` and `backtracks` are empty.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use ndarray::Array2;
use thiserror::Error;

use crate::model::{
    validate_problem, AngleMatrix, ProblemInstance, SolveReport, TraceRecord, ValidationError,
};

#[derive(Debug, Error)]
pub enum BundleError {
    #[error("{path}: {source}")]
    Io {
        path: String,
        source: std::io::Error,
    },
    #[error("line {line}: {message}")]
    Parse { line: usize, message: String },
    #[error("no matrices found")]
    EmptyFile,
    #[error("unknown fixture `{0}` (available: example31, example32)")]
    UnknownFixture(String),
    #[error(transparent)]
    Validation(#[from] ValidationError),
}

fn io_err(path: &Path) -> impl FnOnce(std::io::Error) -> BundleError + '_ {
    move |source| BundleError::Io {
        path: path.display().to_string(),
        source,
    }
}

/// A parsed block and the line it starts on.
#[derive(Debug, Clone, PartialEq)]
pub struct Block {
    pub line: usize,
    pub matrix: Array2<f64>,
}

/// Splits BUNDLE text into rectangular blocks without any shape policy.
pub fn parse_blocks(text: &str) -> Result<Vec<Block>, BundleError> {
    let mut blocks = Vec::new();
    let mut start = 0;
    let mut rows: Vec<Vec<f64>> = Vec::new();

    let mut flush = |start: usize, rows: &mut Vec<Vec<f64>>| {
        if rows.is_empty() {
            return;
        }
        let (r, c) = (rows.len(), rows[0].len());
        let data = rows.drain(..).flatten().collect();
        blocks.push(Block {
            line: start,
            matrix: Array2::from_shape_vec((r, c), data).expect("rows have equal length"),
        });
    };

    for (idx, raw) in text.lines().enumerate() {
        let line_no = idx + 1;
        let line = raw.trim();
        if line.starts_with('#') {
            continue;
        }
        if line.is_empty() {
            flush(start, &mut rows);
            continue;
        }
        let row = line
            .split(|c: char| c == ',' || c.is_whitespace())
            .filter(|tok| !tok.is_empty())
            .map(|tok| {
                tok.parse::<f64>().map_err(|_| BundleError::Parse {
                    line: line_no,
                    message: format!("non-numeric token `{tok}`"),
                })
            })
            .collect::<Result<Vec<_>, _>>()?;
        match rows.first() {
            None => start = line_no,
            Some(first) if first.len() != row.len() => {
                return Err(BundleError::Parse {
                    line: line_no,
                    message: format!(
                        "ragged row: {} entries, expected {}",
                        row.len(),
                        first.len()
                    ),
                });
            }
            Some(_) => {}
        }
        rows.push(row);
    }
    flush(start, &mut rows);
    if blocks.is_empty() {
        return Err(BundleError::EmptyFile);
    }
    Ok(blocks)
}

/// Parses a bundle of equal-sized square matrices.
pub fn parse_bundle(text: &str) -> Result<Vec<Array2<f64>>, BundleError> {
    let blocks = parse_blocks(text)?;
    let n = blocks[0].matrix.nrows();
    blocks
        .into_iter()
        .enumerate()
        .map(|(i, b)| {
            let (r, c) = b.matrix.dim();
            if r != c {
                return Err(BundleError::Parse {
                    line: b.line,
                    message: format!("block {} is {r}x{c}, not square", i + 1),
                });
            }
            if r != n {
                return Err(BundleError::Parse {
                    line: b.line,
                    message: format!("block {} is {r}x{r}, expected {n}x{n}", i + 1),
                });
            }
            Ok(b.matrix)
        })
        .collect()
}

pub fn read_bundle(path: impl AsRef<Path>) -> Result<Vec<Array2<f64>>, BundleError> {
    let path = path.as_ref();
    parse_bundle(&fs::read_to_string(path).map_err(io_err(path))?)
}

/// Parses a single-block angle matrix, checking its shape against `n × cols`.
pub fn parse_angles(text: &str, n: usize, cols: usize) -> Result<AngleMatrix, BundleError> {
    let blocks = parse_blocks(text)?;
    if blocks.len() != 1 {
        return Err(BundleError::Parse {
            line: blocks[1].line,
            message: "angle file must contain exactly one block".into(),
        });
    }
    let b = blocks.into_iter().next().expect("one block");
    let (r, c) = b.matrix.dim();
    if (r, c) != (n, cols) {
        return Err(ValidationError::AngleShape {
            rows: r,
            cols: c,
            expected_rows: n,
            expected_cols: cols,
        }
        .into());
    }
    Ok(AngleMatrix::new(b.matrix)?)
}

pub fn read_angles(path: impl AsRef<Path>, n: usize, cols: usize) -> Result<AngleMatrix, BundleError> {
    let path = path.as_ref();
    parse_angles(&fs::read_to_string(path).map_err(io_err(path))?, n, cols)
}

/// 16 significant digits, locale independent.
pub fn format_value(v: f64) -> String {
    format!("{v:.15e}")
}

pub fn format_bundle(matrices: &[Array2<f64>]) -> String {
    let mut out = String::new();
    for (i, m) in matrices.iter().enumerate() {
        if i > 0 {
            out.push('\n');
        }
        for row in m.rows() {
            let line: Vec<String> = row.iter().map(|&v| format_value(v)).collect();
            out.push_str(&line.join(" "));
            out.push('\n');
        }
    }
    out
}

pub fn write_bundle(path: impl AsRef<Path>, matrices: &[Array2<f64>]) -> Result<(), BundleError> {
    let path = path.as_ref();
    fs::write(path, format_bundle(matrices)).map_err(io_err(path))
}

pub const TRACE_HEADER: &str = "t,F,grad_norm,rel_residual,step,backtracks";

pub fn format_trace(trace: &[TraceRecord]) -> String {
    let mut out = String::from(TRACE_HEADER);
    out.push('\n');
    for r in trace {
        let step = r.step.map(format_value).unwrap_or_default();
        let bt = r.backtracks.map(|m| m.to_string()).unwrap_or_default();
        writeln!(
            out,
            "{},{},{},{},{},{}",
            r.t,
            format_value(r.f),
            format_value(r.grad_norm),
            format_value(r.rel_residual),
            step,
            bt
        )
        .expect("writing to a String");
    }
    out
}

/// Writes the final correlation matrix and/or the convergence trace.
pub fn write_solution(
    report: &SolveReport,
    matrix_path: Option<&Path>,
    trace_path: Option<&Path>,
) -> Result<(), BundleError> {
    if let Some(p) = matrix_path {
        write_bundle(p, std::slice::from_ref(report.final_corr.as_array()))?;
    }
    if let Some(p) = trace_path {
        fs::write(p, format_trace(&report.trace)).map_err(io_err(p))?;
    }
    Ok(())
}

/// Printed solution for one rank of a fixture.
#[derive(Debug, Clone, PartialEq)]
pub struct PublishedSolution {
    pub angles: Array2<f64>,
    pub corr: Array2<f64>,
}

/// One of the embedded example problems with its known starting points
/// and reference solutions, keyed by rank.
#[derive(Debug, Clone, PartialEq)]
pub struct Fixture {
    pub name: &'static str,
    pub targets: Vec<Array2<f64>>,
    pub initial_angles: BTreeMap<usize, AngleMatrix>,
    pub published: BTreeMap<usize, PublishedSolution>,
}

impl Fixture {
    pub fn n(&self) -> usize {
        self.targets[0].nrows()
    }

    pub fn instance(&self, k: usize) -> Result<ProblemInstance, ValidationError> {
        validate_problem(&self.targets, k)
    }

    pub fn init_for(&self, k: usize) -> Option<&AngleMatrix> {
        self.initial_angles.get(&k)
    }
}

pub const FIXTURE_NAMES: [&str; 2] = ["example31", "example32"];

fn embedded(text: &str) -> Array2<f64> {
    parse_blocks(text).expect("embedded fixture parses")[0]
        .matrix
        .clone()
}

fn angles(text: &str) -> AngleMatrix {
    AngleMatrix::new(embedded(text)).expect("finite fixture angles")
}

pub fn load_fixture(name: &str) -> Result<Fixture, BundleError> {
    macro_rules! fx {
        ($f:literal) => {
            include_str!(concat!("../fixtures/", $f))
        };
    }
    let fixture = match name {
        "example31" => Fixture {
            name: "example31",
            targets: parse_bundle(fx!("example31_targets.txt"))?,
            initial_angles: BTreeMap::from([
                (2, angles(fx!("example31_init_k2.txt"))),
                (3, angles(fx!("example31_init_k3.txt"))),
            ]),
            published: BTreeMap::from([
                (
                    2,
                    PublishedSolution {
                        angles: embedded(fx!("example31_angles_k2.txt")),
                        corr: embedded(fx!("example31_solution_k2.txt")),
                    },
                ),
                (
                    3,
                    PublishedSolution {
                        angles: embedded(fx!("example31_angles_k3.txt")),
                        corr: embedded(fx!("example31_solution_k3.txt")),
                    },
                ),
            ]),
        },
        "example32" => Fixture {
            name: "example32",
            targets: parse_bundle(fx!("example32_targets.txt"))?,
            initial_angles: BTreeMap::from([(3, angles(fx!("example32_init_k3.txt")))]),
            published: BTreeMap::from([(
                3,
                PublishedSolution {
                    angles: embedded(fx!("example32_angles_k3.txt")),
                    corr: embedded(fx!("example32_solution_k3.txt")),
                },
            )]),
        },
        other => return Err(BundleError::UnknownFixture(other.to_string())),
    };
    Ok(fixture)
}

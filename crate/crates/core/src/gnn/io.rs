//! Text weights format.
//!
//! ```text
//! graphgi-weights 1
//! architecture gcn
//! dims <input> <hidden> <classes>
//! matrix W0 <rows> <cols>
//! <row-major values, one matrix row per line>
//! vector b0 <len>
//! <values>
//! scalar eps0 <value>
//! ```
//!
//! GCN stores `W0 b0 W1 b1`; GIN stores `mlp{0,1}_{W,b}{0,1}` and
//! `eps0 eps1`. Values carry 17 significant digits.

use std::collections::HashMap;
use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use ndarray::{Array1, Array2};

use super::{Architecture, Dims, Linear, ModelWeights};
use crate::error::{Error, Result};

const MAGIC: &str = "graphgi-weights 1";

fn layer_names(arch: Architecture) -> Vec<(String, String)> {
    match arch {
        Architecture::Gcn => (0..2).map(|i| (format!("W{i}"), format!("b{i}"))).collect(),
        Architecture::Gin => (0..2)
            .flat_map(|m| (0..2).map(move |i| (format!("mlp{m}_W{i}"), format!("mlp{m}_b{i}"))))
            .collect(),
    }
}

fn num(x: f64) -> String {
    format!("{x:.16e}")
}

pub fn write_weights(weights: &ModelWeights) -> String {
    let mut out = String::new();
    let Dims { input, hidden, classes } = weights.dims;
    writeln!(out, "{MAGIC}").unwrap();
    writeln!(out, "architecture {}", weights.architecture).unwrap();
    writeln!(out, "dims {input} {hidden} {classes}").unwrap();
    for (layer, (wname, bname)) in weights.layers.iter().zip(layer_names(weights.architecture)) {
        let (r, c) = layer.shape();
        writeln!(out, "matrix {wname} {r} {c}").unwrap();
        for row in layer.weight.rows() {
            let cells: Vec<String> = row.iter().map(|&x| num(x)).collect();
            writeln!(out, "{}", cells.join(" ")).unwrap();
        }
        writeln!(out, "vector {bname} {}", layer.bias.len()).unwrap();
        let cells: Vec<String> = layer.bias.iter().map(|&x| num(x)).collect();
        writeln!(out, "{}", cells.join(" ")).unwrap();
    }
    for (i, &e) in weights.gin_epsilon.iter().enumerate() {
        writeln!(out, "scalar eps{i} {}", num(e)).unwrap();
    }
    out
}

enum Block {
    Matrix(Array2<f64>),
    Vector(Array1<f64>),
    Scalar(f64),
}

struct Lines<'a> {
    inner: std::iter::Enumerate<std::str::Lines<'a>>,
}

impl<'a> Lines<'a> {
    fn next_line(&mut self) -> Option<(usize, &'a str)> {
        for (i, line) in self.inner.by_ref() {
            let line = line.trim();
            if !line.is_empty() {
                return Some((i + 1, line));
            }
        }
        None
    }

    fn expect_line(&mut self, what: &str, after: usize) -> Result<(usize, &'a str)> {
        self.next_line()
            .ok_or_else(|| Error::parse(after + 1, format!("unexpected end of file, expected {what}")))
    }
}

fn parse_usize(line: usize, s: &str) -> Result<usize> {
    s.parse()
        .map_err(|_| Error::parse(line, format!("'{s}' is not a count")))
}

fn parse_floats(line: usize, s: &str, expected: usize) -> Result<Vec<f64>> {
    let vals: Vec<f64> = s
        .split_whitespace()
        .map(|t| {
            t.parse()
                .map_err(|_| Error::parse(line, format!("'{t}' is not a number")))
        })
        .collect::<Result<_>>()?;
    if vals.len() != expected {
        return Err(Error::parse(
            line,
            format!("expected {expected} values, got {}", vals.len()),
        ));
    }
    Ok(vals)
}

pub fn read_weights(text: &str) -> Result<ModelWeights> {
    let mut lines = Lines {
        inner: text.lines().enumerate(),
    };
    let (ln, magic) = lines.expect_line("header", 0)?;
    if magic != MAGIC {
        return Err(Error::parse(ln, format!("expected '{MAGIC}'")));
    }
    let (ln, arch_line) = lines.expect_line("architecture", ln)?;
    let architecture = match arch_line.split_whitespace().collect::<Vec<_>>()[..] {
        ["architecture", name] => name
            .parse::<Architecture>()
            .map_err(|e| Error::parse(ln, e.to_string()))?,
        _ => return Err(Error::parse(ln, "expected 'architecture <gcn|gin>'")),
    };
    let (ln, dims_line) = lines.expect_line("dims", ln)?;
    let dims = match dims_line.split_whitespace().collect::<Vec<_>>()[..] {
        ["dims", i, h, c] => Dims {
            input: parse_usize(ln, i)?,
            hidden: parse_usize(ln, h)?,
            classes: parse_usize(ln, c)?,
        },
        _ => return Err(Error::parse(ln, "expected 'dims <input> <hidden> <classes>'")),
    };

    let mut blocks: HashMap<String, Block> = HashMap::new();
    while let Some((ln, head)) = lines.next_line() {
        let fields: Vec<&str> = head.split_whitespace().collect();
        let (name, block) = match fields[..] {
            ["matrix", name, r, c] => {
                let (r, c) = (parse_usize(ln, r)?, parse_usize(ln, c)?);
                let mut vals = Vec::with_capacity(r * c);
                let mut last = ln;
                for _ in 0..r {
                    let (l, row) = lines.expect_line("matrix row", last)?;
                    vals.extend(parse_floats(l, row, c)?);
                    last = l;
                }
                (
                    name,
                    Block::Matrix(Array2::from_shape_vec((r, c), vals).expect("sized")),
                )
            }
            ["vector", name, n] => {
                let n = parse_usize(ln, n)?;
                let (l, row) = lines.expect_line("vector values", ln)?;
                (name, Block::Vector(Array1::from(parse_floats(l, row, n)?)))
            }
            ["scalar", name, v] => (name, Block::Scalar(parse_floats(ln, v, 1)?[0])),
            _ => return Err(Error::parse(ln, format!("unrecognised line '{head}'"))),
        };
        if blocks.insert(name.to_string(), block).is_some() {
            return Err(Error::parse(ln, format!("duplicate key '{name}'")));
        }
    }

    let missing = |key: &str| Error::parse(0, format!("missing key '{key}'"));
    let mut layers = Vec::new();
    for (wname, bname) in layer_names(architecture) {
        let weight = match blocks.remove(&wname) {
            Some(Block::Matrix(m)) => m,
            Some(_) => return Err(Error::parse(0, format!("'{wname}' must be a matrix"))),
            None => return Err(missing(&wname)),
        };
        let bias = match blocks.remove(&bname) {
            Some(Block::Vector(v)) => v,
            Some(_) => return Err(Error::parse(0, format!("'{bname}' must be a vector"))),
            None => return Err(missing(&bname)),
        };
        layers.push(Linear { weight, bias });
    }
    let mut gin_epsilon = Vec::new();
    if architecture == Architecture::Gin {
        for key in ["eps0", "eps1"] {
            match blocks.remove(key) {
                Some(Block::Scalar(v)) => gin_epsilon.push(v),
                Some(_) => return Err(Error::parse(0, format!("'{key}' must be a scalar"))),
                None => return Err(missing(key)),
            }
        }
    }
    if let Some(extra) = blocks.keys().min() {
        return Err(Error::parse(0, format!("unexpected key '{extra}' for {architecture}")));
    }
    let weights = ModelWeights {
        architecture,
        dims,
        layers,
        gin_epsilon,
    };
    weights.validate()?;
    Ok(weights)
}

pub fn save_weights(weights: &ModelWeights, path: impl AsRef<Path>) -> Result<()> {
    fs::write(path, write_weights(weights))?;
    Ok(())
}

pub fn load_weights(path: impl AsRef<Path>) -> Result<ModelWeights> {
    read_weights(&fs::read_to_string(path)?)
}

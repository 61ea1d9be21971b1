//! File formats.
//!
//! Datasets are CSV files with a `#key=value ...` header line followed by
//! `kind,axis,distance,value_per_site,uncertainty_per_site`. Witnesses are
//! CSV files `kind,axis,distance,coefficient` with a JSON sidecar. Floats
//! are written in Rust's shortest round-trip form, so reading and writing a
//! file reproduces it byte for byte.

use crate::error::{Error, Result};
use crate::model::{Axis, Metadata, ObservableKind, ObservableSet, ObservableSpec, QuantumDataset};
use crate::solver::FitRecord;
use crate::witness::WitnessMode;
use serde::{Deserialize, Serialize};
use std::fmt::Write as _;
use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

pub const DATASET_COLUMNS: &str = "kind,axis,distance,value_per_site,uncertainty_per_site";
pub const WITNESS_COLUMNS: &str = "kind,axis,distance,coefficient";
pub const TRAJECTORY_COLUMNS: &str = "iter,grad_norm,coupling_norm,mc_steps,acceptance,seconds";

fn data_lines(text: &str) -> impl Iterator<Item = (usize, &str)> {
    text.lines()
        .enumerate()
        .map(|(i, l)| (i + 1, l.trim()))
        .filter(|(_, l)| !l.is_empty())
}

fn parse_f64(cell: &str, line: usize, what: &str) -> Result<f64> {
    let v: f64 = cell
        .trim()
        .parse()
        .map_err(|_| Error::format(line, format!("{what}: '{cell}' is not a number")))?;
    if !v.is_finite() {
        return Err(Error::format(line, format!("{what} must be finite")));
    }
    Ok(v)
}

fn parse_usize(cell: &str, line: usize, what: &str) -> Result<usize> {
    cell.trim().parse().map_err(|_| {
        Error::format(
            line,
            format!("{what}: '{cell}' is not a non-negative integer"),
        )
    })
}

fn parse_spec(kind: &str, axis: &str, distance: &str, line: usize) -> Result<ObservableSpec> {
    let kind: ObservableKind = kind
        .trim()
        .parse()
        .map_err(|e| Error::format(line, format!("{e}")))?;
    let axis: Axis = axis
        .trim()
        .parse()
        .map_err(|e| Error::format(line, format!("{e}")))?;
    let distance = parse_usize(distance, line, "distance")?;
    Ok(match kind {
        ObservableKind::Field => ObservableSpec {
            distance,
            ..ObservableSpec::field(axis)
        },
        ObservableKind::Pair => ObservableSpec::pair(axis, distance),
    })
}

fn split_row<'a>(row: &'a str, n: usize, line: usize) -> Result<Vec<&'a str>> {
    let cells: Vec<&str> = row.split(',').collect();
    if cells.len() != n {
        return Err(Error::format(
            line,
            format!("expected {n} columns, found {}", cells.len()),
        ));
    }
    Ok(cells)
}

fn expect_columns(
    lines: &mut impl Iterator<Item = (usize, impl AsRef<str>)>,
    columns: &str,
) -> Result<()> {
    match lines.next() {
        Some((_, l)) if l.as_ref().replace(' ', "") == columns => Ok(()),
        Some((line, l)) => Err(Error::format(
            line,
            format!("expected column header '{columns}', found '{}'", l.as_ref()),
        )),
        None => Err(Error::format(1, "missing column header")),
    }
}

/// Serializes a dataset; the inverse of [`parse_dataset`].
pub fn format_dataset(dataset: &QuantumDataset) -> Result<String> {
    let mut out = format!("#n={}", dataset.n_sites());
    for (k, v) in dataset.metadata().iter() {
        if k.is_empty() || k.contains(['=', ' ']) || v.is_empty() || v.contains(char::is_whitespace)
        {
            return Err(Error::InvalidData(format!(
                "metadata '{k}={v}' cannot be written in a header"
            )));
        }
        write!(out, " {k}={v}").expect("string write");
    }
    out.push('\n');
    out.push_str(DATASET_COLUMNS);
    out.push('\n');
    for ((o, v), u) in dataset
        .observables()
        .iter()
        .zip(dataset.per_site_values())
        .zip(dataset.per_site_uncertainties())
    {
        writeln!(out, "{},{},{},{},{}", o.kind, o.axis, o.distance, v, u).expect("string write");
    }
    Ok(out)
}

pub fn parse_dataset(text: &str) -> Result<QuantumDataset> {
    let mut lines = data_lines(text);
    let (hline, header) = lines
        .next()
        .ok_or_else(|| Error::format(1, "empty dataset file"))?;
    let header = header
        .strip_prefix('#')
        .ok_or_else(|| Error::format(hline, "first line must be a '#n=...' header"))?;
    let mut n_sites = None;
    let mut meta = Metadata::new();
    for token in header.split_whitespace() {
        let (k, v) = token.split_once('=').ok_or_else(|| {
            Error::format(hline, format!("header token '{token}' is not key=value"))
        })?;
        if k == "n" {
            n_sites = Some(parse_usize(v, hline, "n")?);
        } else {
            meta.set(k, v);
        }
    }
    let n_sites = n_sites.ok_or_else(|| Error::format(hline, "header lacks n=<sites>"))?;
    expect_columns(&mut lines, DATASET_COLUMNS)?;
    let mut specs = Vec::new();
    let mut values = Vec::new();
    let mut unc = Vec::new();
    for (line, row) in lines {
        if row.starts_with('#') {
            continue;
        }
        let c = split_row(row, 5, line)?;
        specs.push(parse_spec(c[0], c[1], c[2], line)?);
        values.push(parse_f64(c[3], line, "value_per_site")?);
        unc.push(parse_f64(c[4], line, "uncertainty_per_site")?);
    }
    let set = ObservableSet::new(n_sites, specs)?;
    QuantumDataset::new(set, values, unc, meta)
}

pub fn load_dataset(path: &Path) -> Result<QuantumDataset> {
    parse_dataset(&fs::read_to_string(path)?)
}

pub fn save_dataset(path: &Path, dataset: &QuantumDataset) -> Result<()> {
    fs::write(path, format_dataset(dataset)?)?;
    Ok(())
}

/// Witness coefficients over a list of observables.
#[derive(Debug, Clone, PartialEq)]
pub struct WitnessFile {
    pub observables: Vec<ObservableSpec>,
    pub coefficients: Vec<f64>,
}

impl WitnessFile {
    pub fn new(observables: Vec<ObservableSpec>, coefficients: Vec<f64>) -> Result<Self> {
        if observables.len() != coefficients.len() {
            return Err(Error::ShapeMismatch {
                what: "witness coefficients",
                expected: observables.len(),
                actual: coefficients.len(),
            });
        }
        Ok(WitnessFile {
            observables,
            coefficients,
        })
    }

    pub fn norm(&self) -> f64 {
        self.coefficients.iter().map(|w| w * w).sum::<f64>().sqrt()
    }

    /// The observables placed on a ring of `n_sites`.
    pub fn set(&self, n_sites: usize) -> Result<ObservableSet> {
        ObservableSet::new(n_sites, self.observables.clone())
    }

    /// Coefficients reordered to follow `set`; observables of `set` absent
    /// from the file get zero, file entries absent from `set` are an error.
    pub fn aligned_to(&self, set: &ObservableSet) -> Result<Vec<f64>> {
        let mut out = vec![0.0; set.len()];
        for (o, w) in self.observables.iter().zip(&self.coefficients) {
            let i = set.position(o.kind, o.axis, o.distance).ok_or_else(|| {
                Error::IncompleteData(format!("witness term {} has no matching data", o.label))
            })?;
            out[i] = *w;
        }
        Ok(out)
    }
}

pub fn format_witness(w: &WitnessFile) -> String {
    let mut out = String::from(WITNESS_COLUMNS);
    out.push('\n');
    for (o, c) in w.observables.iter().zip(&w.coefficients) {
        writeln!(out, "{},{},{},{}", o.kind, o.axis, o.distance, c).expect("string write");
    }
    out
}

pub fn parse_witness(text: &str) -> Result<WitnessFile> {
    let mut lines = data_lines(text).filter(|(_, l)| !l.starts_with('#'));
    expect_columns(&mut lines, WITNESS_COLUMNS)?;
    let mut obs = Vec::new();
    let mut coef = Vec::new();
    for (line, row) in lines {
        let c = split_row(row, 4, line)?;
        obs.push(parse_spec(c[0], c[1], c[2], line)?);
        coef.push(parse_f64(c[3], line, "coefficient")?);
    }
    if obs.is_empty() {
        return Err(Error::format(1, "witness file has no rows"));
    }
    WitnessFile::new(obs, coef)
}

/// Metadata stored next to a witness file.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WitnessSidecar {
    pub norm: f64,
    pub mode: WitnessMode,
    pub n_sites: Option<usize>,
    /// Extensive separable bound, when known.
    pub separable_bound: Option<f64>,
    pub separable_bound_per_site: Option<f64>,
}

pub fn sidecar_path(witness_path: &Path) -> PathBuf {
    witness_path.with_extension("json")
}

pub fn load_witness(path: &Path) -> Result<WitnessFile> {
    parse_witness(&fs::read_to_string(path)?)
}

pub fn load_sidecar(witness_path: &Path) -> Result<Option<WitnessSidecar>> {
    let p = sidecar_path(witness_path);
    if !p.exists() {
        return Ok(None);
    }
    Ok(Some(serde_json::from_str(&fs::read_to_string(p)?)?))
}

/// Writes the witness CSV and its JSON sidecar.
pub fn save_witness(path: &Path, w: &WitnessFile, sidecar: &WitnessSidecar) -> Result<()> {
    fs::write(path, format_witness(w))?;
    write_json(&sidecar_path(path), sidecar)
}

pub fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    let mut text = serde_json::to_string_pretty(value)?;
    text.push('\n');
    fs::write(path, text)?;
    Ok(())
}

/// Streams trajectory rows as CSV.
pub struct TrajectoryWriter<W: Write> {
    out: W,
}

impl<W: Write> TrajectoryWriter<W> {
    pub fn new(mut out: W) -> Result<Self> {
        writeln!(out, "{TRAJECTORY_COLUMNS}")?;
        Ok(TrajectoryWriter { out })
    }

    pub fn write(&mut self, r: &FitRecord) -> Result<()> {
        writeln!(
            self.out,
            "{},{},{},{},{},{}",
            r.iter, r.grad_norm, r.coupling_norm, r.mc_steps, r.acceptance, r.seconds
        )?;
        Ok(())
    }

    pub fn flush(&mut self) -> Result<()> {
        self.out.flush()?;
        Ok(())
    }

    pub fn into_inner(self) -> W {
        self.out
    }
}

/// Layout of a published coefficient table.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum TableFormat {
    /// `distance,K^(r)`: iso couplings.
    Heisenberg,
    /// `distance,K_x,K_xx,K_yy,K_zz`: a field row at distance 0 and per-axis couplings.
    Ising,
}

impl std::str::FromStr for TableFormat {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "heisenberg" => Ok(TableFormat::Heisenberg),
            "ising" => Ok(TableFormat::Ising),
            other => Err(Error::Config(format!("unknown table format '{other}'"))),
        }
    }
}

/// Reads a coefficient table. Blank cells are skipped, a non-numeric first
/// line is taken as the header, and numbers may use `E` exponents.
pub fn import_table(text: &str, format: TableFormat) -> Result<WitnessFile> {
    let width = match format {
        TableFormat::Heisenberg => 2,
        TableFormat::Ising => 5,
    };
    let mut field = Vec::new();
    let mut pairs = Vec::new();
    for (idx, (line, row)) in data_lines(text).enumerate() {
        let cells: Vec<&str> = row.split(',').map(str::trim).collect();
        if idx == 0 && cells[0].parse::<f64>().is_err() {
            continue;
        }
        if cells.len() != width {
            return Err(Error::format(
                line,
                format!("expected {width} columns, found {}", cells.len()),
            ));
        }
        let r = parse_usize(cells[0], line, "distance")?;
        let cell = |k: usize, what: &str| -> Result<Option<f64>> {
            if cells[k].is_empty() {
                Ok(None)
            } else {
                parse_f64(cells[k], line, what).map(Some)
            }
        };
        match format {
            TableFormat::Heisenberg => {
                if let Some(v) = cell(1, "K")? {
                    pairs.push((ObservableSpec::pair(Axis::Iso, r), v));
                }
            }
            TableFormat::Ising => {
                if let Some(v) = cell(1, "K_x")? {
                    if r != 0 {
                        return Err(Error::format(
                            line,
                            "the field coupling belongs to distance 0",
                        ));
                    }
                    field.push((ObservableSpec::field(Axis::X), v));
                }
                for (k, axis) in Axis::CARTESIAN.into_iter().enumerate() {
                    if let Some(v) = cell(k + 2, "pair coupling")? {
                        if r == 0 {
                            return Err(Error::format(line, "pair couplings need distance >= 1"));
                        }
                        pairs.push((ObservableSpec::pair(axis, r), v));
                    }
                }
            }
        }
    }
    let (obs, coef): (Vec<_>, Vec<_>) = field.into_iter().chain(pairs).unzip();
    if obs.is_empty() {
        return Err(Error::format(1, "table has no coefficients"));
    }
    WitnessFile::new(obs, coef)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn dataset_round_trip_is_byte_identical() {
        let text = "#n=8 model=heisenberg temperature=1 symmetry=su2\n\
                    kind,axis,distance,value_per_site,uncertainty_per_site\n\
                    pair,iso,1,-0.8187925600000001,0.0001\n\
                    pair,iso,2,0.17397818,0.0001\n";
        let ds = parse_dataset(text).unwrap();
        assert_eq!(ds.n_sites(), 8);
        assert_eq!(ds.metadata().get("temperature"), Some("1"));
        let again = format_dataset(&ds).unwrap();
        assert_eq!(again, text);
        assert_eq!(
            format_dataset(&parse_dataset(&again).unwrap()).unwrap(),
            again
        );
    }

    #[test]
    fn dataset_values_become_extensive() {
        let text = "#n=4 model=x temperature=1\n\
                    kind,axis,distance,value_per_site,uncertainty_per_site\n\
                    pair,iso,1,-1,0.01\n\
                    pair,iso,2,0.25,0.01\n";
        let ds = parse_dataset(text).unwrap();
        assert_eq!(ds.values(), vec![-4.0, 0.5]);
        assert_eq!(ds.uncertainties(), vec![0.04, 0.02]);
    }

    #[test]
    fn dataset_errors_carry_line_numbers() {
        let bad =
            "#n=4\nkind,axis,distance,value_per_site,uncertainty_per_site\npair,iso,1,abc,0\n";
        match parse_dataset(bad) {
            Err(Error::Format { line, .. }) => assert_eq!(line, 3),
            other => panic!("{other:?}"),
        }
        assert!(parse_dataset("n=4\n").is_err());
        assert!(parse_dataset(
            "#model=x\nkind,axis,distance,value_per_site,uncertainty_per_site\n"
        )
        .is_err());
        let wrong_cols = "#n=4\nkind,axis,distance,value\n";
        assert!(matches!(
            parse_dataset(wrong_cols),
            Err(Error::Format { line: 2, .. })
        ));
    }

    #[test]
    fn witness_round_trip() {
        let w = WitnessFile::new(
            vec![
                ObservableSpec::field(Axis::X),
                ObservableSpec::pair(Axis::Z, 3),
            ],
            vec![0.6, -0.8],
        )
        .unwrap();
        let text = format_witness(&w);
        assert_eq!(
            text,
            "kind,axis,distance,coefficient\nfield,x,0,0.6\npair,z,3,-0.8\n"
        );
        let back = parse_witness(&text).unwrap();
        assert_eq!(back, w);
        assert_eq!(format_witness(&back), text);
    }

    #[test]
    fn imports_tables_with_blanks_and_exponents() {
        let t1 = "distance,K^(r)\n1,-0.6\n2,0.8\n";
        let w = import_table(t1, TableFormat::Heisenberg).unwrap();
        assert_eq!(w.coefficients, vec![-0.6, 0.8]);
        assert_eq!(w.observables[1], ObservableSpec::pair(Axis::Iso, 2));

        let t2 = "distance,K_x,K_xx,K_yy,K_zz\n0,0.5,,,\n1,,0.1,5.6E-05,-0.2\n";
        let w = import_table(t2, TableFormat::Ising).unwrap();
        assert_eq!(w.observables[0], ObservableSpec::field(Axis::X));
        assert_eq!(w.coefficients, vec![0.5, 0.1, 5.6e-5, -0.2]);
        assert!(import_table("distance,K\n1,x\n", TableFormat::Heisenberg).is_err());
    }

    #[test]
    fn alignment_to_a_set() {
        let w = WitnessFile::new(vec![ObservableSpec::pair(Axis::Iso, 2)], vec![1.0]).unwrap();
        let set = ObservableSet::heisenberg(8, 3).unwrap();
        assert_eq!(w.aligned_to(&set).unwrap(), vec![0.0, 1.0, 0.0]);
        let small = ObservableSet::heisenberg(8, 1).unwrap();
        assert!(w.aligned_to(&small).is_err());
    }

    #[test]
    fn trajectory_rows() {
        let mut w = TrajectoryWriter::new(Vec::new()).unwrap();
        w.write(&FitRecord {
            iter: 1,
            grad_norm: 0.5,
            coupling_norm: 0.0,
            mc_steps: 1024,
            acceptance: 0.5,
            seconds: 0.25,
        })
        .unwrap();
        let s = String::from_utf8(w.into_inner()).unwrap();
        assert_eq!(
            s,
            "iter,grad_norm,coupling_norm,mc_steps,acceptance,seconds\n1,0.5,0,1024,0.5,0.25\n"
        );
    }
}

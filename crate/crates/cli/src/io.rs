//! File formats: expression CSVs, pair lists, result TSVs and chain files.

use std::collections::BTreeMap;
use std::fs::{self, File};
use std::io::{BufReader, BufWriter, Read, Write};
use std::path::{Path, PathBuf};

use nalgebra::{DMatrix, DVector};
use sha2::{Digest, Sha256};
use sparsereg_core::{CandidateMap, ExpressionMatrix, PosteriorChain, RegressorLabel};

use crate::error::{CliError, CliResult, Stage};

const CHAIN_MAGIC: &[u8; 8] = b"SRCHAIN1";

pub fn sha256_file(path: &Path) -> CliResult<String> {
    let bytes = fs::read(path).map_err(|e| CliError::io(path, e))?;
    Ok(Sha256::digest(&bytes).iter().map(|b| format!("{b:02x}")).collect())
}

fn csv_reader(path: &Path) -> CliResult<csv::Reader<File>> {
    let file = File::open(path).map_err(|e| CliError::io(path, e))?;
    Ok(csv::ReaderBuilder::new().has_headers(true).from_reader(file))
}

fn csv_error(path: &Path, e: csv::Error) -> CliError {
    let line = e.position().map_or(0, |p| p.line());
    CliError::parse(path, line, e.to_string())
}

/// Expression CSV: `sample_id` column, then one column per feature.
pub fn read_expression(path: &Path) -> CliResult<ExpressionMatrix> {
    let mut rdr = csv_reader(path)?;
    let header = rdr.headers().map_err(|e| csv_error(path, e))?.clone();
    if header.len() < 2 {
        return Err(CliError::parse(path, 1, "expected a sample id column and at least one feature column"));
    }
    let features: Vec<String> = header.iter().skip(1).map(str::to_string).collect();
    let mut samples = Vec::new();
    let mut values = Vec::new();
    for record in rdr.records() {
        let record = record.map_err(|e| csv_error(path, e))?;
        let line = record.position().map_or(0, |p| p.line());
        samples.push(record[0].to_string());
        for (j, field) in record.iter().skip(1).enumerate() {
            let v: f64 = field.trim().parse().map_err(|_| {
                CliError::parse(path, line, format!("column `{}`: `{field}` is not a number", features[j]))
            })?;
            values.push(v);
        }
    }
    let matrix = DMatrix::from_row_slice(samples.len(), features.len(), &values);
    ExpressionMatrix::new(samples, features, matrix).map_err(|e| CliError::input(path, e.to_string()))
}

pub fn write_expression(path: &Path, m: &ExpressionMatrix) -> CliResult<()> {
    let mut out = String::from("sample_id");
    for f in m.feature_ids() {
        out.push(',');
        out.push_str(f);
    }
    out.push('\n');
    for (i, s) in m.sample_ids().iter().enumerate() {
        out.push_str(s);
        for j in 0..m.n_features() {
            out.push_str(&format!(",{}", m.values()[(i, j)]));
        }
        out.push('\n');
    }
    write_file(path, out.as_bytes())
}

/// Two-column `gene_id,regressor_id` list, in file order.
pub fn read_pairs(path: &Path) -> CliResult<Vec<(String, String)>> {
    let mut rdr = csv_reader(path)?;
    let header = rdr.headers().map_err(|e| csv_error(path, e))?.clone();
    if header.len() != 2 {
        return Err(CliError::parse(path, 1, "expected columns gene_id,regressor_id"));
    }
    rdr.records()
        .map(|r| {
            let r = r.map_err(|e| csv_error(path, e))?;
            Ok((r[0].trim().to_string(), r[1].trim().to_string()))
        })
        .collect()
}

pub fn read_candidates(path: &Path) -> CliResult<CandidateMap> {
    CandidateMap::from_pairs(read_pairs(path)?).map_err(|e| CliError::input(path, e.to_string()))
}

pub fn write_pairs<'a>(path: &Path, pairs: impl IntoIterator<Item = (&'a str, &'a str)>) -> CliResult<()> {
    let mut out = String::from("gene_id,regressor_id\n");
    for (g, r) in pairs {
        out.push_str(&format!("{g},{r}\n"));
    }
    write_file(path, out.as_bytes())
}

pub fn write_file(path: &Path, bytes: &[u8]) -> CliResult<()> {
    if let Some(parent) = path.parent() {
        fs::create_dir_all(parent).map_err(|e| CliError::io(parent, e))?;
    }
    fs::write(path, bytes).map_err(|e| CliError::io(path, e))
}

/// Rejects gene ids that cannot serve as a chain file name.
pub fn check_file_stem(gene: &str) -> CliResult<()> {
    if gene.is_empty() || gene == "." || gene == ".." || gene.contains(['/', '\\', '\0']) {
        return Err(CliError::Usage(format!("gene id `{gene}` cannot be used as a chain file name")));
    }
    Ok(())
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, clap::ValueEnum)]
pub enum ChainFormat {
    Csv,
    Bin,
}

impl ChainFormat {
    pub fn extension(self) -> &'static str {
        match self {
            ChainFormat::Csv => "csv",
            ChainFormat::Bin => "bin",
        }
    }
}

/// Chain contents as stored on disk.
#[derive(Debug, Clone, PartialEq)]
pub struct ChainTable {
    pub gene_id: String,
    pub labels: Vec<RegressorLabel>,
    pub beta: DMatrix<f64>,
    pub sigma2: DVector<f64>,
    pub lambda: DMatrix<f64>,
}

impl From<&PosteriorChain> for ChainTable {
    fn from(c: &PosteriorChain) -> Self {
        Self {
            gene_id: c.gene_id.clone(),
            labels: c.labels.clone(),
            beta: c.beta_draws.clone(),
            sigma2: c.sigma2_draws.clone(),
            lambda: c.lambda_draws.clone(),
        }
    }
}

impl ChainTable {
    pub fn beta_column(&self, j: usize) -> Vec<f64> {
        self.beta.column(j).iter().copied().collect()
    }
}

pub fn write_chain(path: &Path, chain: &ChainTable, format: ChainFormat) -> CliResult<()> {
    let bytes = match format {
        ChainFormat::Csv => chain_csv(chain).into_bytes(),
        ChainFormat::Bin => chain_bin(chain),
    };
    write_file(path, &bytes)
}

/// One row per retained iteration: `beta_1..beta_M, sigma2, lambda_1..lambda_M`.
fn chain_csv(c: &ChainTable) -> String {
    let m = c.labels.len();
    let mut header: Vec<String> = c.labels.iter().map(|l| l.to_string()).collect();
    header.push("sigma2".into());
    header.extend(c.labels.iter().map(|l| format!("lambda:{l}")));
    let mut out = header.join(",");
    out.push('\n');
    for t in 0..c.beta.nrows() {
        let mut row: Vec<String> = (0..m).map(|j| c.beta[(t, j)].to_string()).collect();
        row.push(c.sigma2[t].to_string());
        row.extend((0..m).map(|j| c.lambda[(t, j)].to_string()));
        out.push_str(&row.join(","));
        out.push('\n');
    }
    out
}

/// Magic, `T` and `M` as little-endian u64, length-prefixed labels, then the
/// draws row by row as little-endian f64 in the CSV column order.
fn chain_bin(c: &ChainTable) -> Vec<u8> {
    let (t, m) = c.beta.shape();
    let mut out = Vec::with_capacity(24 + t * (2 * m + 1) * 8);
    out.extend_from_slice(CHAIN_MAGIC);
    out.extend_from_slice(&(t as u64).to_le_bytes());
    out.extend_from_slice(&(m as u64).to_le_bytes());
    for l in &c.labels {
        let s = l.to_string();
        out.extend_from_slice(&(s.len() as u32).to_le_bytes());
        out.extend_from_slice(s.as_bytes());
    }
    for i in 0..t {
        for j in 0..m {
            out.extend_from_slice(&c.beta[(i, j)].to_le_bytes());
        }
        out.extend_from_slice(&c.sigma2[i].to_le_bytes());
        for j in 0..m {
            out.extend_from_slice(&c.lambda[(i, j)].to_le_bytes());
        }
    }
    out
}

pub fn read_chain(path: &Path) -> CliResult<ChainTable> {
    let gene_id = path
        .file_stem()
        .and_then(|s| s.to_str())
        .ok_or_else(|| CliError::input(path, "chain file name is not valid UTF-8"))?
        .to_string();
    match path.extension().and_then(|s| s.to_str()) {
        Some("csv") => read_chain_csv(path, gene_id),
        Some("bin") => read_chain_bin(path, gene_id),
        _ => Err(CliError::input(path, "chain files must end in .csv or .bin")),
    }
}

fn parse_labels<'a>(path: &Path, names: impl Iterator<Item = &'a str>) -> CliResult<Vec<RegressorLabel>> {
    names
        .map(|n| n.parse().stage("chain header"))
        .collect::<CliResult<_>>()
        .map_err(|e| CliError::input(path, e.to_string()))
}

fn read_chain_csv(path: &Path, gene_id: String) -> CliResult<ChainTable> {
    let mut rdr = csv_reader(path)?;
    let header = rdr.headers().map_err(|e| csv_error(path, e))?.clone();
    let width = header.len();
    if width < 3 || width % 2 == 0 || &header[width / 2] != "sigma2" {
        return Err(CliError::parse(path, 1, "expected columns beta labels, sigma2, lambda labels"));
    }
    let m = width / 2;
    let labels = parse_labels(path, header.iter().take(m))?;
    let mut rows: Vec<f64> = Vec::new();
    for record in rdr.records() {
        let record = record.map_err(|e| csv_error(path, e))?;
        let line = record.position().map_or(0, |p| p.line());
        for field in record.iter() {
            let v: f64 = field
                .parse()
                .map_err(|_| CliError::parse(path, line, format!("`{field}` is not a number")))?;
            rows.push(v);
        }
    }
    let t = rows.len() / width;
    let all = DMatrix::from_row_slice(t, width, &rows);
    Ok(ChainTable {
        gene_id,
        labels,
        beta: all.columns(0, m).into_owned(),
        sigma2: all.column(m).into_owned(),
        lambda: all.columns(m + 1, m).into_owned(),
    })
}

fn read_chain_bin(path: &Path, gene_id: String) -> CliResult<ChainTable> {
    let file = File::open(path).map_err(|e| CliError::io(path, e))?;
    let mut r = BufReader::new(file);
    let truncated = |_| CliError::input(path, "truncated binary chain");
    let mut magic = [0u8; 8];
    r.read_exact(&mut magic).map_err(truncated)?;
    if &magic != CHAIN_MAGIC {
        return Err(CliError::input(path, "not a binary chain file"));
    }
    let mut word = [0u8; 8];
    r.read_exact(&mut word).map_err(truncated)?;
    let t = u64::from_le_bytes(word) as usize;
    r.read_exact(&mut word).map_err(truncated)?;
    let m = u64::from_le_bytes(word) as usize;
    let mut names = Vec::with_capacity(m);
    for _ in 0..m {
        let mut len = [0u8; 4];
        r.read_exact(&mut len).map_err(truncated)?;
        let mut buf = vec![0u8; u32::from_le_bytes(len) as usize];
        r.read_exact(&mut buf).map_err(truncated)?;
        names.push(String::from_utf8(buf).map_err(|_| CliError::input(path, "label is not UTF-8"))?);
    }
    let labels = parse_labels(path, names.iter().map(String::as_str))?;
    let mut beta = DMatrix::zeros(t, m);
    let mut sigma2 = DVector::zeros(t);
    let mut lambda = DMatrix::zeros(t, m);
    let mut next = || -> CliResult<f64> {
        r.read_exact(&mut word).map_err(truncated)?;
        Ok(f64::from_le_bytes(word))
    };
    for i in 0..t {
        for j in 0..m {
            beta[(i, j)] = next()?;
        }
        sigma2[i] = next()?;
        for j in 0..m {
            lambda[(i, j)] = next()?;
        }
    }
    Ok(ChainTable {
        gene_id,
        labels,
        beta,
        sigma2,
        lambda,
    })
}

/// Chain files in `dir` (or in `dir/chains` when present), sorted by name.
pub fn chain_files(dir: &Path) -> CliResult<Vec<PathBuf>> {
    let nested = dir.join("chains");
    let dir = if nested.is_dir() { nested } else { dir.to_path_buf() };
    let entries = fs::read_dir(&dir).map_err(|e| CliError::io(&dir, e))?;
    let mut files = Vec::new();
    for entry in entries {
        let path = entry.map_err(|e| CliError::io(&dir, e))?.path();
        if matches!(path.extension().and_then(|s| s.to_str()), Some("csv" | "bin")) {
            files.push(path);
        }
    }
    files.sort();
    if files.is_empty() {
        return Err(CliError::input(&dir, "no chain files (*.csv or *.bin) found"));
    }
    Ok(files)
}

/// Tab-separated table with a header row.
pub struct Tsv {
    out: BufWriter<Vec<u8>>,
}

impl Tsv {
    pub fn new(header: &[&str]) -> Self {
        let mut t = Self {
            out: BufWriter::new(Vec::new()),
        };
        t.row(header.iter().map(|s| s.to_string()));
        t
    }

    pub fn row<I, S>(&mut self, fields: I)
    where
        I: IntoIterator<Item = S>,
        S: AsRef<str>,
    {
        let mut first = true;
        for f in fields {
            if !first {
                self.out.write_all(b"\t").expect("in-memory write");
            }
            self.out.write_all(f.as_ref().as_bytes()).expect("in-memory write");
            first = false;
        }
        self.out.write_all(b"\n").expect("in-memory write");
    }

    pub fn save(self, path: &Path) -> CliResult<()> {
        let bytes = self.out.into_inner().map_err(|e| CliError::io(path, e.into_error()))?;
        write_file(path, &bytes)
    }
}

/// Reads a TSV written by [`Tsv`] into header-keyed rows with their line numbers.
pub fn read_tsv(path: &Path, required: &[&str]) -> CliResult<Vec<(u64, BTreeMap<String, String>)>> {
    let file = File::open(path).map_err(|e| CliError::io(path, e))?;
    let mut rdr = csv::ReaderBuilder::new().delimiter(b'\t').has_headers(true).from_reader(file);
    let header = rdr.headers().map_err(|e| csv_error(path, e))?.clone();
    for col in required {
        if !header.iter().any(|h| h == *col) {
            return Err(CliError::parse(path, 1, format!("missing column `{col}`")));
        }
    }
    rdr.records()
        .map(|r| {
            let r = r.map_err(|e| csv_error(path, e))?;
            let line = r.position().map_or(0, |p| p.line());
            Ok((line, header.iter().map(str::to_string).zip(r.iter().map(str::to_string)).collect()))
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn table() -> ChainTable {
        ChainTable {
            gene_id: "G1".into(),
            labels: vec!["miR-1:Ago2".parse().unwrap(), "miR-1:Ago134".parse().unwrap()],
            beta: DMatrix::from_row_slice(2, 2, &[0.1, 0.0, 1.0 / 3.0, 2e-300]),
            sigma2: DVector::from_column_slice(&[0.5, 0.25]),
            lambda: DMatrix::from_row_slice(2, 2, &[1.0, 2.0, 3.0, 4.0]),
        }
    }

    #[test]
    fn chain_formats_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        for format in [ChainFormat::Csv, ChainFormat::Bin] {
            let path = dir.path().join(format!("G1.{}", format.extension()));
            write_chain(&path, &table(), format).unwrap();
            assert_eq!(read_chain(&path).unwrap(), table());
        }
    }

    #[test]
    fn expression_round_trip_and_line_numbers() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("m.csv");
        let m = ExpressionMatrix::new(
            vec!["S1".into(), "S2".into()],
            vec!["a".into()],
            DMatrix::from_row_slice(2, 1, &[0.1 + 0.2, -1e-17]),
        )
        .unwrap();
        write_expression(&path, &m).unwrap();
        assert_eq!(read_expression(&path).unwrap(), m);

        fs::write(&path, "sample_id,a\nS1,1.0\nS2,oops\n").unwrap();
        let err = read_expression(&path).unwrap_err();
        assert!(err.to_string().contains(":3:"), "{err}");
        assert_eq!(err.exit_code(), 2);
    }
}

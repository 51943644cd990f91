//! On-disk formats: binary matrix files, label and class-name lists, CSV
//! matrices and the JSON dataset manifest.
//!
//! Matrix file layout (all integers little-endian):
//!
//! ```text
//! offset  size  field
//!      0     4  magic "CALK"
//!      4     2  format version (1)
//!      6     1  dtype (0 = f32, 1 = f64)
//!      7     1  reserved, must be 0
//!      8     8  rows (u64)
//!     16     8  cols (u64)
//!     24     …  row-major payload, rows · cols · dtype size bytes
//! ```
//!
//! Labels and class names are UTF-8 text, one entry per line. Paths inside
//! a manifest are resolved relative to the manifest's directory.

use std::fmt;
use std::fs;
use std::io::{Read, Write};
use std::path::{Path, PathBuf};
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{CalibraError, Result};
use crate::model::{LabeledDataset, Matrix, SimilarityMatrix, Split};
use crate::scalar::Scalar;

pub const MAGIC: [u8; 4] = *b"CALK";
pub const FORMAT_VERSION: u16 = 1;
pub const HEADER_LEN: usize = 24;
pub const MANIFEST_VERSION: u32 = 1;
pub const MANIFEST_FILE: &str = "manifest.json";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Dtype {
    #[default]
    F32,
    F64,
}

impl Dtype {
    pub fn size(self) -> usize {
        match self {
            Dtype::F32 => 4,
            Dtype::F64 => 8,
        }
    }

    pub fn code(self) -> u8 {
        match self {
            Dtype::F32 => 0,
            Dtype::F64 => 1,
        }
    }

    pub fn from_code(code: u8) -> Option<Self> {
        match code {
            0 => Some(Dtype::F32),
            1 => Some(Dtype::F64),
            _ => None,
        }
    }
}

impl fmt::Display for Dtype {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Dtype::F32 => "f32",
            Dtype::F64 => "f64",
        })
    }
}

impl FromStr for Dtype {
    type Err = CalibraError;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "f32" => Ok(Dtype::F32),
            "f64" => Ok(Dtype::F64),
            other => Err(CalibraError::invalid(format!(
                "unknown dtype `{other}` (expected f32 or f64)"
            ))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct MatrixHeader {
    pub version: u16,
    pub dtype: Dtype,
    pub rows: u64,
    pub cols: u64,
}

impl MatrixHeader {
    pub fn to_bytes(&self) -> [u8; HEADER_LEN] {
        let mut out = [0u8; HEADER_LEN];
        out[0..4].copy_from_slice(&MAGIC);
        out[4..6].copy_from_slice(&self.version.to_le_bytes());
        out[6] = self.dtype.code();
        out[7] = 0;
        out[8..16].copy_from_slice(&self.rows.to_le_bytes());
        out[16..24].copy_from_slice(&self.cols.to_le_bytes());
        out
    }

    pub fn parse(bytes: &[u8], path: &Path) -> Result<Self> {
        if bytes.len() < HEADER_LEN {
            return Err(CalibraError::format(
                path,
                format!(
                    "file is {} bytes, shorter than the {HEADER_LEN}-byte header",
                    bytes.len()
                ),
            ));
        }
        if bytes[0..4] != MAGIC {
            return Err(CalibraError::format(
                path,
                format!(
                    "bad magic {:02x?} at offset 0 (expected \"CALK\")",
                    &bytes[0..4]
                ),
            ));
        }
        let version = u16::from_le_bytes([bytes[4], bytes[5]]);
        if version != FORMAT_VERSION {
            return Err(CalibraError::format(
                path,
                format!("unsupported format version {version} at offset 4"),
            ));
        }
        let dtype = Dtype::from_code(bytes[6]).ok_or_else(|| {
            CalibraError::format(path, format!("unknown dtype code {} at offset 6", bytes[6]))
        })?;
        if bytes[7] != 0 {
            return Err(CalibraError::format(
                path,
                format!("reserved byte at offset 7 is {}, expected 0", bytes[7]),
            ));
        }
        let word = |at: usize| u64::from_le_bytes(bytes[at..at + 8].try_into().expect("8 bytes"));
        Ok(Self {
            version,
            dtype,
            rows: word(8),
            cols: word(16),
        })
    }

    /// Payload size in bytes, or `None` on overflow.
    pub fn payload_len(&self) -> Option<usize> {
        let rows = usize::try_from(self.rows).ok()?;
        let cols = usize::try_from(self.cols).ok()?;
        rows.checked_mul(cols)?.checked_mul(self.dtype.size())
    }
}

/// Serialises a matrix. Values are narrowed when `dtype` is `f32`.
pub fn encode_matrix<F: Scalar>(m: &Matrix<F>, dtype: Dtype) -> Vec<u8> {
    let header = MatrixHeader {
        version: FORMAT_VERSION,
        dtype,
        rows: m.rows() as u64,
        cols: m.cols() as u64,
    };
    let mut out = Vec::with_capacity(HEADER_LEN + m.as_slice().len() * dtype.size());
    out.extend_from_slice(&header.to_bytes());
    for &v in m.as_slice() {
        match dtype {
            Dtype::F32 => out.extend_from_slice(&(v.as_f64() as f32).to_le_bytes()),
            Dtype::F64 => out.extend_from_slice(&v.as_f64().to_le_bytes()),
        }
    }
    out
}

/// Parses a matrix file image. `path` is only used in diagnostics.
pub fn decode_matrix<F: Scalar>(bytes: &[u8], path: &Path) -> Result<(Matrix<F>, Dtype)> {
    let header = MatrixHeader::parse(bytes, path)?;
    let expected = header.payload_len().ok_or_else(|| {
        CalibraError::format(
            path,
            format!(
                "dimensions {}x{} overflow the address space",
                header.rows, header.cols
            ),
        )
    })?;
    let found = bytes.len() - HEADER_LEN;
    if found != expected {
        return Err(CalibraError::format(
            path,
            format!(
                "payload is {found} bytes but a {}x{} {} matrix needs {expected}",
                header.rows, header.cols, header.dtype
            ),
        ));
    }
    let cols = header.cols as usize;
    let size = header.dtype.size();
    let payload = &bytes[HEADER_LEN..];
    let mut data = Vec::with_capacity(expected / size);
    for (i, chunk) in payload.chunks_exact(size).enumerate() {
        let v = match header.dtype {
            Dtype::F32 => f32::from_le_bytes(chunk.try_into().expect("4 bytes")) as f64,
            Dtype::F64 => f64::from_le_bytes(chunk.try_into().expect("8 bytes")),
        };
        if !v.is_finite() {
            return Err(CalibraError::format(
                path,
                format!(
                    "non-finite value {v} at byte offset {} (row {}, column {})",
                    HEADER_LEN + i * size,
                    i / cols.max(1),
                    i % cols.max(1)
                ),
            ));
        }
        data.push(F::lit(v));
    }
    let m = Matrix::new(header.rows as usize, cols, data)
        .map_err(|e| CalibraError::format(path, e.to_string()))?;
    Ok((m, header.dtype))
}

pub fn write_matrix<F: Scalar>(path: impl AsRef<Path>, m: &Matrix<F>, dtype: Dtype) -> Result<()> {
    let path = path.as_ref();
    fs::write(path, encode_matrix(m, dtype)).map_err(|e| CalibraError::io(path, e))
}

/// Reads a binary matrix file, or a CSV matrix when the extension is `.csv`.
pub fn read_matrix<F: Scalar>(path: impl AsRef<Path>) -> Result<Matrix<F>> {
    let path = path.as_ref();
    if path
        .extension()
        .is_some_and(|e| e.eq_ignore_ascii_case("csv"))
    {
        return load_matrix_csv(path);
    }
    let bytes = fs::read(path).map_err(|e| CalibraError::io(path, e))?;
    Ok(decode_matrix(&bytes, path)?.0)
}

fn read_lines(path: &Path) -> Result<Vec<String>> {
    let text = fs::read_to_string(path).map_err(|e| CalibraError::io(path, e))?;
    Ok(text
        .lines()
        .map(|l| l.trim_end_matches('\r').to_string())
        .collect())
}

/// One non-negative integer per line; blank lines are rejected.
pub fn read_labels(path: impl AsRef<Path>) -> Result<Vec<usize>> {
    let path = path.as_ref();
    read_lines(path)?
        .iter()
        .enumerate()
        .map(|(i, line)| {
            line.trim().parse::<usize>().map_err(|_| {
                CalibraError::format(
                    path,
                    format!("line {}: expected a class index, found `{line}`", i + 1),
                )
            })
        })
        .collect()
}

pub fn write_labels(path: impl AsRef<Path>, labels: &[usize]) -> Result<()> {
    let path = path.as_ref();
    let mut text = String::with_capacity(labels.len() * 4);
    for y in labels {
        text.push_str(&y.to_string());
        text.push('\n');
    }
    fs::write(path, text).map_err(|e| CalibraError::io(path, e))
}

pub fn read_class_names(path: impl AsRef<Path>) -> Result<Vec<String>> {
    read_lines(path.as_ref())
}

pub fn write_class_names(path: impl AsRef<Path>, names: &[String]) -> Result<()> {
    let path = path.as_ref();
    if let Some(bad) = names.iter().find(|n| n.contains('\n')) {
        return Err(CalibraError::invalid(format!(
            "class name {bad:?} contains a line break"
        )));
    }
    let mut text = names.join("\n");
    text.push('\n');
    fs::write(path, text).map_err(|e| CalibraError::io(path, e))
}

/// Writes `sample_id,class_0,…,class_{C−1}` with 9 significant digits.
pub fn write_matrix_csv<F: Scalar, W: Write>(m: &Matrix<F>, writer: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(writer);
    let to_err = |e: csv::Error| CalibraError::invalid(format!("writing CSV: {e}"));
    let mut header = vec!["sample_id".to_string()];
    header.extend((0..m.cols()).map(|j| format!("class_{j}")));
    w.write_record(&header).map_err(to_err)?;
    let mut record = Vec::with_capacity(m.cols() + 1);
    for (i, row) in m.iter_rows().enumerate() {
        record.clear();
        record.push(i.to_string());
        record.extend(row.iter().map(|v| format!("{:.8e}", v.as_f64())));
        w.write_record(&record).map_err(to_err)?;
    }
    w.flush()
        .map_err(|e| CalibraError::invalid(format!("writing CSV: {e}")))
}

/// Parses a CSV matrix with a `sample_id` column followed by one column per
/// class. `path` is only used in diagnostics.
pub fn read_matrix_csv<F: Scalar, R: Read>(reader: R, path: &Path) -> Result<Matrix<F>> {
    let mut r = csv::ReaderBuilder::new()
        .flexible(true)
        .has_headers(true)
        .from_reader(reader);
    let headers = r
        .headers()
        .map_err(|e| CalibraError::format(path, format!("reading CSV header: {e}")))?
        .clone();
    let width = headers.len();
    if width < 2 || &headers[0] != "sample_id" {
        return Err(CalibraError::format(
            path,
            "CSV header must be `sample_id,class_0,...`",
        ));
    }
    let cols = width - 1;
    let mut data = Vec::new();
    let mut rows = 0;
    for (i, rec) in r.records().enumerate() {
        let rec = rec.map_err(|e| CalibraError::format(path, format!("row {i}: {e}")))?;
        if rec.len() != width {
            return Err(CalibraError::format(
                path,
                format!(
                    "row {i} (line {}): expected {width} columns, found {}",
                    i + 2,
                    rec.len()
                ),
            ));
        }
        for (j, field) in rec.iter().skip(1).enumerate() {
            let v: f64 = field.trim().parse().map_err(|_| {
                CalibraError::format(path, format!("row {i}, column {j}: cannot parse `{field}`"))
            })?;
            if !v.is_finite() {
                return Err(CalibraError::format(
                    path,
                    format!("non-finite value {v} at row {i}, column {j}"),
                ));
            }
            data.push(F::lit(v));
        }
        rows += 1;
    }
    Matrix::new(rows, cols, data).map_err(|e| CalibraError::format(path, e.to_string()))
}

pub fn save_matrix_csv<F: Scalar>(path: impl AsRef<Path>, m: &Matrix<F>) -> Result<()> {
    let path = path.as_ref();
    let file = fs::File::create(path).map_err(|e| CalibraError::io(path, e))?;
    write_matrix_csv(m, std::io::BufWriter::new(file))
}

pub fn load_matrix_csv<F: Scalar>(path: impl AsRef<Path>) -> Result<Matrix<F>> {
    let path = path.as_ref();
    let file = fs::File::open(path).map_err(|e| CalibraError::io(path, e))?;
    read_matrix_csv(std::io::BufReader::new(file), path)
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Manifest {
    pub version: u32,
    pub reference_logits: PathBuf,
    pub finetuned_logits: PathBuf,
    pub labels: PathBuf,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub embeddings: Option<PathBuf>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub class_names: Option<PathBuf>,
    pub split: String,
    #[serde(default)]
    pub provenance: String,
}

impl Manifest {
    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = fs::read_to_string(path).map_err(|e| CalibraError::io(path, e))?;
        let manifest: Self = serde_json::from_str(&text).map_err(|source| CalibraError::Json {
            path: path.to_path_buf(),
            source,
        })?;
        if manifest.version != MANIFEST_VERSION {
            return Err(CalibraError::format(
                path,
                format!("unsupported manifest version {}", manifest.version),
            ));
        }
        Ok(manifest)
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        let mut text = serde_json::to_string_pretty(self).expect("manifest serialises");
        text.push('\n');
        fs::write(path, text).map_err(|e| CalibraError::io(path, e))
    }

    pub fn split(&self) -> Result<Split> {
        self.split.parse()
    }
}

fn resolve(base: &Path, p: &Path) -> PathBuf {
    if p.is_absolute() {
        p.to_path_buf()
    } else {
        base.join(p)
    }
}

/// Loads and fully validates the dataset a manifest points to.
pub fn load_dataset<F: Scalar>(manifest_path: impl AsRef<Path>) -> Result<LabeledDataset<F>> {
    let manifest_path = manifest_path.as_ref();
    let manifest = Manifest::load(manifest_path)?;
    let base = manifest_path.parent().unwrap_or_else(|| Path::new("."));
    let split = manifest
        .split()
        .map_err(|e| CalibraError::format(manifest_path, e.to_string()))?;

    let similarity = |p: &Path| -> Result<SimilarityMatrix<F>> {
        let path = resolve(base, p);
        let m = read_matrix::<F>(&path)?;
        SimilarityMatrix::new(m).map_err(|e| CalibraError::format(&path, e.to_string()))
    };
    let reference = similarity(&manifest.reference_logits)?;
    let finetuned = similarity(&manifest.finetuned_logits)?;
    let labels = read_labels(resolve(base, &manifest.labels))?;

    let mut dataset = LabeledDataset::new(reference, finetuned, labels, split)
        .map_err(|e| CalibraError::format(manifest_path, e.to_string()))?;
    if let Some(p) = &manifest.embeddings {
        let path = resolve(base, p);
        let emb = read_matrix::<F>(&path)?;
        dataset = dataset
            .with_embeddings(emb)
            .map_err(|e| CalibraError::format(&path, e.to_string()))?;
    }
    if let Some(p) = &manifest.class_names {
        let path = resolve(base, p);
        let names = read_class_names(&path)?;
        dataset = dataset
            .with_class_names(names)
            .map_err(|e| CalibraError::format(&path, e.to_string()))?;
    }
    Ok(dataset)
}

#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct SaveOptions {
    pub dtype: Dtype,
    pub provenance: String,
}

/// Writes `reference.calk`, `finetuned.calk`, `labels.txt`, the optional
/// `embeddings.calk` and `class_names.txt`, and `manifest.json` into `dir`
/// (created if missing), as `f32`.
pub fn save_dataset<F: Scalar>(
    dataset: &LabeledDataset<F>,
    dir: impl AsRef<Path>,
) -> Result<Manifest> {
    save_dataset_with(dataset, dir, &SaveOptions::default())
}

pub fn save_dataset_with<F: Scalar>(
    dataset: &LabeledDataset<F>,
    dir: impl AsRef<Path>,
    options: &SaveOptions,
) -> Result<Manifest> {
    let dir = dir.as_ref();
    fs::create_dir_all(dir).map_err(|e| CalibraError::io(dir, e))?;
    write_matrix(
        dir.join("reference.calk"),
        dataset.reference().matrix(),
        options.dtype,
    )?;
    write_matrix(
        dir.join("finetuned.calk"),
        dataset.finetuned().matrix(),
        options.dtype,
    )?;
    write_labels(dir.join("labels.txt"), dataset.labels())?;
    let embeddings = match dataset.embeddings() {
        Some(e) => {
            write_matrix(dir.join("embeddings.calk"), e, options.dtype)?;
            Some(PathBuf::from("embeddings.calk"))
        }
        None => None,
    };
    let class_names = match dataset.class_names() {
        Some(names) => {
            write_class_names(dir.join("class_names.txt"), names)?;
            Some(PathBuf::from("class_names.txt"))
        }
        None => None,
    };
    let manifest = Manifest {
        version: MANIFEST_VERSION,
        reference_logits: "reference.calk".into(),
        finetuned_logits: "finetuned.calk".into(),
        labels: "labels.txt".into(),
        embeddings,
        class_names,
        split: dataset.split().to_string(),
        provenance: options.provenance.clone(),
    };
    manifest.save(dir.join(MANIFEST_FILE))?;
    Ok(manifest)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn sample() -> LabeledDataset<f32> {
        let r = SimilarityMatrix::from_rows(&[[0.3f32, 0.1, -0.2], [0.05, 0.2, 0.25]]).unwrap();
        let f = SimilarityMatrix::from_rows(&[[0.4f32, 0.0, -0.1], [0.1, 0.3, 0.2]]).unwrap();
        LabeledDataset::new(r, f, vec![0, 2], Split::Validation).unwrap()
    }

    #[test]
    fn header_layout() {
        let m = Matrix::from_rows(&[[1.0f32, 2.0]]).unwrap();
        let bytes = encode_matrix(&m, Dtype::F32);
        assert_eq!(bytes.len(), HEADER_LEN + 8);
        assert_eq!(&bytes[0..4], b"CALK");
        assert_eq!(&bytes[4..8], &[1, 0, 0, 0]);
        assert_eq!(&bytes[8..16], &1u64.to_le_bytes());
        assert_eq!(&bytes[16..24], &2u64.to_le_bytes());
        assert_eq!(&bytes[24..28], &1.0f32.to_le_bytes());
    }

    #[test]
    fn binary_round_trip_both_dtypes() {
        let m = Matrix::from_rows(&[[0.1f64, -0.3, 0.7], [1e-30, 0.5, -1.0]]).unwrap();
        let p = Path::new("mem");
        let (back, dtype) = decode_matrix::<f64>(&encode_matrix(&m, Dtype::F64), p).unwrap();
        assert_eq!((back, dtype), (m.clone(), Dtype::F64));
        let (narrow, _) = decode_matrix::<f32>(&encode_matrix(&m, Dtype::F32), p).unwrap();
        assert_eq!(narrow, m.convert::<f32>());
    }

    #[test]
    fn rejects_truncated_and_padded_payloads() {
        let m = Matrix::from_rows(&[[0.1f32, 0.2], [0.3, 0.4]]).unwrap();
        let bytes = encode_matrix(&m, Dtype::F32);
        let p = Path::new("x.calk");
        let err = decode_matrix::<f32>(&bytes[..bytes.len() - 1], p).unwrap_err();
        assert!(err.to_string().contains("needs 16"), "{err}");
        let mut padded = bytes.clone();
        padded.push(0);
        assert!(decode_matrix::<f32>(&padded, p).is_err());
        assert!(decode_matrix::<f32>(&bytes[..10], p).is_err());
    }

    #[test]
    fn rejects_bad_header_fields() {
        let m = Matrix::from_rows(&[[0.1f32, 0.2]]).unwrap();
        let good = encode_matrix(&m, Dtype::F32);
        let p = Path::new("x.calk");
        for (at, value) in [(0usize, b'X'), (4, 2), (6, 7), (7, 1)] {
            let mut bad = good.clone();
            bad[at] = value;
            let err = decode_matrix::<f32>(&bad, p).unwrap_err();
            assert!(err.to_string().contains(&format!("offset {at}")), "{err}");
        }
    }

    #[test]
    fn non_finite_reports_byte_offset() {
        let m = Matrix::new(2, 2, vec![0.1f64, 0.2, 0.3, 0.4]).unwrap();
        let mut bytes = encode_matrix(&m, Dtype::F64);
        bytes[HEADER_LEN + 16..HEADER_LEN + 24].copy_from_slice(&f64::NAN.to_le_bytes());
        let err = decode_matrix::<f64>(&bytes, Path::new("x.calk")).unwrap_err();
        let msg = err.to_string();
        assert!(
            msg.contains("byte offset 40") && msg.contains("row 1, column 0"),
            "{msg}"
        );
    }

    #[test]
    fn csv_round_trip_is_exact_for_f32() {
        let m = Matrix::from_rows(&[[0.1f32, -0.33333334, 1.0], [1e-7, 0.12345679, -0.5]]).unwrap();
        let mut buf = Vec::new();
        write_matrix_csv(&m, &mut buf).unwrap();
        let text = String::from_utf8(buf.clone()).unwrap();
        assert!(text.starts_with("sample_id,class_0,class_1,class_2\n0,"));
        let back: Matrix<f32> = read_matrix_csv(&buf[..], Path::new("m.csv")).unwrap();
        assert_eq!(back, m);
    }

    #[test]
    fn csv_missing_column_names_row_and_width() {
        let text = "sample_id,class_0,class_1\n0,0.1,0.2\n1,0.3\n";
        let err = read_matrix_csv::<f64, _>(text.as_bytes(), Path::new("m.csv")).unwrap_err();
        let msg = err.to_string();
        assert!(
            msg.contains("row 1") && msg.contains("expected 3 columns"),
            "{msg}"
        );
    }

    #[test]
    fn dataset_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let ds = sample()
            .with_class_names(vec!["a".into(), "b".into(), "c".into()])
            .unwrap();
        let manifest = save_dataset(&ds, dir.path()).unwrap();
        assert_eq!(manifest.split, "validation");
        let back: LabeledDataset<f32> = load_dataset(dir.path().join(MANIFEST_FILE)).unwrap();
        assert_eq!(back, ds);
    }

    #[test]
    fn label_count_mismatch_names_both_lengths() {
        let dir = tempfile::tempdir().unwrap();
        save_dataset(&sample(), dir.path()).unwrap();
        write_labels(dir.path().join("labels.txt"), &[0]).unwrap();
        let err = load_dataset::<f64>(dir.path().join(MANIFEST_FILE)).unwrap_err();
        let msg = err.to_string();
        assert!(
            msg.contains("labels 1") && msg.contains("reference 2x3"),
            "{msg}"
        );
    }

    #[test]
    fn manifest_may_point_at_csv() {
        let dir = tempfile::tempdir().unwrap();
        let ds = sample();
        save_dataset(&ds, dir.path()).unwrap();
        save_matrix_csv(dir.path().join("ft.csv"), ds.finetuned().matrix()).unwrap();
        let mut manifest = Manifest::load(dir.path().join(MANIFEST_FILE)).unwrap();
        manifest.finetuned_logits = "ft.csv".into();
        manifest.save(dir.path().join(MANIFEST_FILE)).unwrap();
        let back: LabeledDataset<f32> = load_dataset(dir.path().join(MANIFEST_FILE)).unwrap();
        assert_eq!(back, ds);
    }

    #[test]
    fn bad_label_line_is_reported() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("labels.txt");
        fs::write(&p, "0\n1\nx\n").unwrap();
        let err = read_labels(&p).unwrap_err();
        assert!(err.to_string().contains("line 3"), "{err}");
    }
}

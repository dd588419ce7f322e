//! File formats.
//!
//! * CSV matrices: comma separated, optional single header row.
//! * Binary matrices: `ODCM`, u32 version (1), u64 rows, u64 cols, then
//!   row-major little-endian f64.
//! * Labels: one token per line, `0` inlier, `1` outlier.
//! * Coefficients: `ODCC`, u64 N, u64 nnz, then `(row u64, col u64, value f64)`
//!   little-endian triplets sorted by `(col, row)`.
//! * Scores: `id,score` per line.

use std::fs;
use std::io::{BufWriter, Read, Write};
use std::path::Path;
use std::time::Duration;

use ndarray::Array2;

use crate::cascade::CascadeResult;
use crate::data::{DataMatrix, Label, LabelVector};
use crate::error::{Error, Result};
use crate::eval::Polarity;
use crate::solver::{SelfRepresentation, SparseColumn};
use crate::walk::ScoreVector;

pub const MATRIX_MAGIC: &[u8; 4] = b"ODCM";
pub const MATRIX_VERSION: u32 = 1;
pub const COEFF_MAGIC: &[u8; 4] = b"ODCC";

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum MatrixFormat {
    Csv { header: bool },
    Binary,
}

impl MatrixFormat {
    /// Binary for `.odcm`/`.bin`, CSV otherwise.
    pub fn from_path(path: &Path, header: bool) -> Self {
        match path.extension().and_then(|e| e.to_str()) {
            Some("odcm") | Some("bin") => MatrixFormat::Binary,
            _ => MatrixFormat::Csv { header },
        }
    }
}

/// Reads a stored matrix; with `transpose` the stored rows are points and
/// become columns.
pub fn load_matrix(path: impl AsRef<Path>, format: MatrixFormat, transpose: bool) -> Result<DataMatrix> {
    let path = path.as_ref();
    let (stored, header) = match format {
        MatrixFormat::Csv { header } => read_csv(path, header)?,
        MatrixFormat::Binary => (read_binary(path)?, None),
    };
    let values = if transpose { stored.reversed_axes() } else { stored };
    let values = values.as_standard_layout().into_owned();
    let m = DataMatrix::new(values)?;
    // header names identify points only when stored columns are points
    match header {
        Some(h) if !transpose => m.with_point_ids(h),
        _ => Ok(m),
    }
}

fn read_csv(path: &Path, header: bool) -> Result<(Array2<f64>, Option<Vec<String>>)> {
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(header)
        .flexible(false)
        .trim(csv::Trim::All)
        .from_path(path)
        .map_err(|e| csv_error(path, e))?;
    let names = if header {
        Some(
            reader
                .headers()
                .map_err(|e| csv_error(path, e))?
                .iter()
                .map(str::to_string)
                .collect(),
        )
    } else {
        None
    };
    let mut data = Vec::new();
    let mut ncols = None;
    let mut nrows = 0;
    for (r, record) in reader.records().enumerate() {
        let record = record.map_err(|e| csv_error(path, e))?;
        ncols.get_or_insert(record.len());
        for (c, cell) in record.iter().enumerate() {
            let v: f64 = cell.parse().map_err(|_| {
                Error::parse(format!(
                    "{}: row {}, column {}: `{cell}` is not a number",
                    path.display(),
                    r + 1,
                    c + 1
                ))
            })?;
            data.push(v);
        }
        nrows += 1;
    }
    let ncols = ncols.unwrap_or(0);
    let values = Array2::from_shape_vec((nrows, ncols), data).map_err(|e| Error::parse(e.to_string()))?;
    Ok((values, names))
}

fn csv_error(path: &Path, e: csv::Error) -> Error {
    match e.into_kind() {
        csv::ErrorKind::Io(io) => Error::io(path, io),
        csv::ErrorKind::UnequalLengths { pos, expected_len, len } => Error::parse(format!(
            "{}: record {} has {len} fields, expected {expected_len}",
            path.display(),
            pos.map_or(0, |p| p.record() + 1)
        )),
        other => Error::parse(format!("{}: {other:?}", path.display())),
    }
}

fn read_binary(path: &Path) -> Result<Array2<f64>> {
    let bytes = fs::read(path).map_err(|e| Error::io(path, e))?;
    let mut cur = bytes.as_slice();
    let mut magic = [0u8; 4];
    read_exact(&mut cur, &mut magic, path)?;
    if &magic != MATRIX_MAGIC {
        return Err(Error::parse(format!("{}: bad magic {magic:?}", path.display())));
    }
    let version = u32::from_le_bytes(take(&mut cur, path)?);
    if version != MATRIX_VERSION {
        return Err(Error::parse(format!(
            "{}: unsupported version {version}",
            path.display()
        )));
    }
    let rows = u64::from_le_bytes(take(&mut cur, path)?) as usize;
    let cols = u64::from_le_bytes(take(&mut cur, path)?) as usize;
    let count = rows
        .checked_mul(cols)
        .filter(|c| c.checked_mul(8) == Some(cur.len()))
        .ok_or_else(|| {
            Error::parse(format!(
                "{}: payload does not hold {rows}x{cols} values",
                path.display()
            ))
        })?;
    let data: Vec<f64> = cur
        .chunks_exact(8)
        .map(|c| f64::from_le_bytes(c.try_into().expect("chunk of 8")))
        .collect();
    debug_assert_eq!(data.len(), count);
    Array2::from_shape_vec((rows, cols), data).map_err(|e| Error::parse(e.to_string()))
}

fn take<const N: usize>(cur: &mut &[u8], path: &Path) -> Result<[u8; N]> {
    let mut buf = [0u8; N];
    read_exact(cur, &mut buf, path)?;
    Ok(buf)
}

fn read_exact(cur: &mut &[u8], buf: &mut [u8], path: &Path) -> Result<()> {
    cur.read_exact(buf)
        .map_err(|_| Error::parse(format!("{}: truncated file", path.display())))
}

fn create(path: &Path) -> Result<BufWriter<fs::File>> {
    Ok(BufWriter::new(fs::File::create(path).map_err(|e| Error::io(path, e))?))
}

fn finish(mut w: BufWriter<fs::File>, path: &Path) -> Result<()> {
    w.flush().map_err(|e| Error::io(path, e))
}

/// Writes the in-memory `D x N` layout (rows = features).
pub fn save_matrix_binary(path: impl AsRef<Path>, x: &DataMatrix) -> Result<()> {
    let path = path.as_ref();
    let v = x.values();
    let mut buf = Vec::with_capacity(24 + 8 * v.len());
    buf.extend_from_slice(MATRIX_MAGIC);
    buf.extend_from_slice(&MATRIX_VERSION.to_le_bytes());
    buf.extend_from_slice(&(v.nrows() as u64).to_le_bytes());
    buf.extend_from_slice(&(v.ncols() as u64).to_le_bytes());
    for val in v.iter() {
        buf.extend_from_slice(&val.to_le_bytes());
    }
    fs::write(path, buf).map_err(|e| Error::io(path, e))
}

/// Writes one point per row.
pub fn save_matrix_csv(path: impl AsRef<Path>, x: &DataMatrix) -> Result<()> {
    let path = path.as_ref();
    let mut w = create(path)?;
    for j in 0..x.num_points() {
        let row: Vec<String> = x.column(j).iter().map(|v| format!("{v:?}")).collect();
        writeln!(w, "{}", row.join(",")).map_err(|e| Error::io(path, e))?;
    }
    finish(w, path)
}

pub fn load_labels(path: impl AsRef<Path>) -> Result<LabelVector> {
    let path = path.as_ref();
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    text.lines()
        .enumerate()
        .filter(|(_, l)| !l.trim().is_empty())
        .map(|(i, l)| match l.trim() {
            "0" => Ok(Label::Inlier),
            "1" => Ok(Label::Outlier),
            other => Err(Error::parse(format!(
                "{}: line {}: bad label `{other}`",
                path.display(),
                i + 1
            ))),
        })
        .collect::<Result<Vec<_>>>()
        .map(LabelVector)
}

pub fn save_labels(path: impl AsRef<Path>, labels: &LabelVector) -> Result<()> {
    let path = path.as_ref();
    let mut w = create(path)?;
    for l in labels.iter() {
        writeln!(w, "{}", if l.is_outlier() { 1 } else { 0 }).map_err(|e| Error::io(path, e))?;
    }
    finish(w, path)
}

pub fn save_coefficients(path: impl AsRef<Path>, c: &SelfRepresentation) -> Result<()> {
    let path = path.as_ref();
    let triplets = c.triplets();
    let mut buf = Vec::with_capacity(20 + 24 * triplets.len());
    buf.extend_from_slice(COEFF_MAGIC);
    buf.extend_from_slice(&(c.n() as u64).to_le_bytes());
    buf.extend_from_slice(&(triplets.len() as u64).to_le_bytes());
    for (i, j, v) in triplets {
        buf.extend_from_slice(&(i as u64).to_le_bytes());
        buf.extend_from_slice(&(j as u64).to_le_bytes());
        buf.extend_from_slice(&v.to_le_bytes());
    }
    fs::write(path, buf).map_err(|e| Error::io(path, e))
}

/// Reads a triplet file. Solver metadata is not stored, so per-column
/// diagnostics come back as defaults.
pub fn load_coefficients(path: impl AsRef<Path>) -> Result<SelfRepresentation> {
    let path = path.as_ref();
    let bytes = fs::read(path).map_err(|e| Error::io(path, e))?;
    let mut cur = bytes.as_slice();
    let magic: [u8; 4] = take(&mut cur, path)?;
    if &magic != COEFF_MAGIC {
        return Err(Error::parse(format!("{}: bad magic {magic:?}", path.display())));
    }
    let n = u64::from_le_bytes(take(&mut cur, path)?) as usize;
    let nnz = u64::from_le_bytes(take(&mut cur, path)?) as usize;
    if nnz.checked_mul(24) != Some(cur.len()) {
        return Err(Error::parse(format!(
            "{}: payload does not hold {nnz} triplets",
            path.display()
        )));
    }
    let mut columns = vec![SparseColumn::default(); n];
    let mut last: Option<(usize, usize)> = None;
    for _ in 0..nnz {
        let i = u64::from_le_bytes(take(&mut cur, path)?) as usize;
        let j = u64::from_le_bytes(take(&mut cur, path)?) as usize;
        let v = f64::from_le_bytes(take(&mut cur, path)?);
        if j >= n || i >= n {
            return Err(Error::Dimension(format!(
                "{}: triplet ({i}, {j}) outside {n}x{n}",
                path.display()
            )));
        }
        if last.is_some_and(|(li, lj)| (lj, li) >= (j, i)) {
            return Err(Error::parse(format!(
                "{}: triplets not sorted by (col, row)",
                path.display()
            )));
        }
        last = Some((i, j));
        columns[j].indices.push(i);
        columns[j].values.push(v);
    }
    SelfRepresentation::from_columns(columns)
}

pub fn save_scores(path: impl AsRef<Path>, scores: &[f64], ids: &[String]) -> Result<()> {
    let path = path.as_ref();
    if ids.len() != scores.len() {
        return Err(Error::LengthMismatch {
            expected: scores.len(),
            actual: ids.len(),
        });
    }
    let mut w = create(path)?;
    for (id, s) in ids.iter().zip(scores) {
        writeln!(w, "{id},{s:?}").map_err(|e| Error::io(path, e))?;
    }
    finish(w, path)
}

/// Reads an `id,score` file.
pub fn load_scores(path: impl AsRef<Path>) -> Result<(Vec<String>, Vec<f64>)> {
    let path = path.as_ref();
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    let mut ids = Vec::new();
    let mut scores = Vec::new();
    for (i, line) in text.lines().enumerate().filter(|(_, l)| !l.trim().is_empty()) {
        let (id, s) = line
            .rsplit_once(',')
            .ok_or_else(|| Error::parse(format!("{}: line {}: expected id,score", path.display(), i + 1)))?;
        ids.push(id.to_string());
        scores.push(
            s.trim()
                .parse()
                .map_err(|_| Error::parse(format!("{}: line {}: bad score `{s}`", path.display(), i + 1)))?,
        );
    }
    Ok((ids, scores))
}

/// Extra run facts recorded next to the configuration in a manifest.
#[derive(Debug, Clone, Default)]
pub struct RunInfo {
    pub input: Option<String>,
    pub normalized_input: bool,
    pub zero_columns: usize,
    pub stage_times: Vec<Duration>,
}

pub fn manifest_text(result: &CascadeResult, info: &RunInfo) -> String {
    let mut out = String::from("# odcsr run manifest\n");
    out.push_str(&result.config.to_manifest());
    out.push_str(&format!("normalize_input={}\n", info.normalized_input));
    if let Some(input) = &info.input {
        out.push_str(&format!("input={input}\n"));
    }
    out.push_str(&format!("num_points={}\n", result.fused_scores.len()));
    out.push_str(&format!("zero_columns={}\n", info.zero_columns));
    out.push_str(&format!("polarity={}\n", Polarity::LowIsOutlier));
    for (i, s) in result.stages.iter().enumerate() {
        let k = i + 1;
        out.push_str(&format!("stage{k}.residual_norm={:?}\n", s.residual_norm));
        out.push_str(&format!("stage{k}.nnz={}\n", s.coeffs.nnz()));
        out.push_str(&format!("stage{k}.non_converged={}\n", s.coeffs.non_converged().len()));
        out.push_str(&format!("stage{k}.skipped={}\n", s.skipped));
        if let Some(t) = info.stage_times.get(i) {
            out.push_str(&format!("stage{k}.seconds={:.6}\n", t.as_secs_f64()));
        }
    }
    out
}

/// Writes a run directory: `stage<i>.coef`, `stage<i>_scores.csv`,
/// `scores.csv` (fused) and `manifest.txt`.
pub fn save_cascade(dir: impl AsRef<Path>, result: &CascadeResult, ids: &[String], info: &RunInfo) -> Result<()> {
    let dir = dir.as_ref();
    fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    for (i, s) in result.stages.iter().enumerate() {
        save_coefficients(dir.join(format!("stage{}.coef", i + 1)), &s.coeffs)?;
        save_scores(dir.join(format!("stage{}_scores.csv", i + 1)), s.scores.as_slice(), ids)?;
    }
    save_scores(dir.join("scores.csv"), result.fused_scores.as_slice(), ids)?;
    let path = dir.join("manifest.txt");
    fs::write(&path, manifest_text(result, info)).map_err(|e| Error::io(&path, e))
}

/// Reads back a score CSV as a probability vector.
pub fn load_score_vector(path: impl AsRef<Path>) -> Result<ScoreVector> {
    ScoreVector::new(load_scores(path)?.1)
}

#[cfg(test)]
mod tests {
    use super::*;
    use ndarray::array;
    use proptest::prelude::*;
    use tempfile::tempdir;

    #[test]
    fn csv_identity_layout() {
        let dir = tempdir().unwrap();
        let p = dir.path().join("x.csv");
        fs::write(&p, "1,0\n0,1\n").unwrap();
        let m = load_matrix(&p, MatrixFormat::Csv { header: false }, false).unwrap();
        assert_eq!(m.column(0).to_vec(), vec![1.0, 0.0]);
        assert_eq!(m.column(1).to_vec(), vec![0.0, 1.0]);
    }

    #[test]
    fn csv_ragged_rows_fail() {
        let dir = tempdir().unwrap();
        let p = dir.path().join("x.csv");
        fs::write(&p, "1,2,3\n4,5\n").unwrap();
        let err = load_matrix(&p, MatrixFormat::Csv { header: false }, false).unwrap_err();
        assert!(matches!(err, Error::Parse(_)), "{err}");
    }

    #[test]
    fn csv_non_numeric_fails() {
        let dir = tempdir().unwrap();
        let p = dir.path().join("x.csv");
        fs::write(&p, "1,abc\n3,4\n").unwrap();
        assert!(matches!(
            load_matrix(&p, MatrixFormat::Csv { header: false }, false),
            Err(Error::Parse(_))
        ));
    }

    #[test]
    fn csv_single_point_is_dimension_error() {
        let dir = tempdir().unwrap();
        let p = dir.path().join("x.csv");
        fs::write(&p, "1,2,3\n").unwrap();
        let err = load_matrix(&p, MatrixFormat::Csv { header: false }, true).unwrap_err();
        assert!(matches!(err, Error::Dimension(_)), "{err}");
    }

    #[test]
    fn csv_header_and_transpose() {
        let dir = tempdir().unwrap();
        let p = dir.path().join("x.csv");
        fs::write(&p, "a,b,c\n1,2,3\n4,5,6\n").unwrap();
        let rows = load_matrix(&p, MatrixFormat::Csv { header: true }, true).unwrap();
        assert_eq!((rows.dim(), rows.num_points()), (3, 2));
        assert_eq!(rows.column(1).to_vec(), vec![4.0, 5.0, 6.0]);
        let cols = load_matrix(&p, MatrixFormat::Csv { header: true }, false).unwrap();
        assert_eq!(cols.point_ids().unwrap(), &["a", "b", "c"]);
    }

    #[test]
    fn missing_file_is_io_error() {
        let err = load_matrix("/nonexistent/x.csv", MatrixFormat::Csv { header: false }, true).unwrap_err();
        assert!(matches!(err, Error::Io { .. }));
    }

    #[test]
    fn binary_layout_is_bit_exact() {
        let dir = tempdir().unwrap();
        let p = dir.path().join("x.odcm");
        let m = DataMatrix::new(array![[1.0, 2.0, 3.0], [4.0, 5.0, 6.0]]).unwrap();
        save_matrix_binary(&p, &m).unwrap();
        let bytes = fs::read(&p).unwrap();
        assert_eq!(&bytes[..4], b"ODCM");
        assert_eq!(u32::from_le_bytes(bytes[4..8].try_into().unwrap()), 1);
        assert_eq!(u64::from_le_bytes(bytes[8..16].try_into().unwrap()), 2);
        assert_eq!(u64::from_le_bytes(bytes[16..24].try_into().unwrap()), 3);
        assert_eq!(f64::from_le_bytes(bytes[24..32].try_into().unwrap()), 1.0);
        assert_eq!(f64::from_le_bytes(bytes[32..40].try_into().unwrap()), 2.0);
        assert_eq!(bytes.len(), 24 + 6 * 8);
    }

    #[test]
    fn binary_rejects_bad_magic_and_truncation() {
        let dir = tempdir().unwrap();
        let p = dir.path().join("x.odcm");
        fs::write(&p, b"NOPE\x01\x00\x00\x00").unwrap();
        assert!(load_matrix(&p, MatrixFormat::Binary, false).is_err());
        let m = DataMatrix::new(array![[1.0, 2.0]]).unwrap();
        save_matrix_binary(&p, &m).unwrap();
        let mut bytes = fs::read(&p).unwrap();
        bytes.pop();
        fs::write(&p, bytes).unwrap();
        assert!(matches!(
            load_matrix(&p, MatrixFormat::Binary, false),
            Err(Error::Parse(_))
        ));
    }

    #[test]
    fn labels_round_trip_and_reject_garbage() {
        let dir = tempdir().unwrap();
        let p = dir.path().join("y.txt");
        let l = LabelVector(vec![Label::Inlier, Label::Outlier, Label::Inlier]);
        save_labels(&p, &l).unwrap();
        assert_eq!(fs::read_to_string(&p).unwrap(), "0\n1\n0\n");
        assert_eq!(load_labels(&p).unwrap(), l);
        fs::write(&p, "0\n2\n").unwrap();
        assert!(load_labels(&p).is_err());
    }

    #[test]
    fn coefficient_file_layout() {
        let dir = tempdir().unwrap();
        let p = dir.path().join("c.coef");
        let cols = vec![
            SparseColumn {
                indices: vec![1, 2],
                values: vec![0.5, -0.25],
            },
            SparseColumn::default(),
            SparseColumn {
                indices: vec![0],
                values: vec![1.5],
            },
        ];
        let c = SelfRepresentation::from_columns(cols).unwrap();
        save_coefficients(&p, &c).unwrap();
        let bytes = fs::read(&p).unwrap();
        assert_eq!(&bytes[..4], b"ODCC");
        assert_eq!(u64::from_le_bytes(bytes[4..12].try_into().unwrap()), 3);
        assert_eq!(u64::from_le_bytes(bytes[12..20].try_into().unwrap()), 3);
        // first triplet: (row 1, col 0, 0.5)
        assert_eq!(u64::from_le_bytes(bytes[20..28].try_into().unwrap()), 1);
        assert_eq!(u64::from_le_bytes(bytes[28..36].try_into().unwrap()), 0);
        assert_eq!(f64::from_le_bytes(bytes[36..44].try_into().unwrap()), 0.5);
        let back = load_coefficients(&p).unwrap();
        assert_eq!(back.triplets(), c.triplets());
    }

    #[test]
    fn scores_round_trip() {
        let dir = tempdir().unwrap();
        let p = dir.path().join("s.csv");
        let ids = vec!["a".to_string(), "b".to_string()];
        save_scores(&p, &[0.25, 0.75], &ids).unwrap();
        assert_eq!(fs::read_to_string(&p).unwrap(), "a,0.25\nb,0.75\n");
        assert_eq!(load_scores(&p).unwrap(), (ids, vec![0.25, 0.75]));
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(64))]

        #[test]
        fn matrix_round_trips(d in 1usize..6, n in 2usize..8, seed in any::<u64>()) {
            use rand::{Rng, SeedableRng};
            let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
            let v = Array2::from_shape_fn((d, n), |_| rng.random_range(-1e6..1e6) * rng.random::<f64>().powi(7));
            let m = DataMatrix::new(v).unwrap();
            let dir = tempdir().unwrap();
            let b = dir.path().join("m.odcm");
            save_matrix_binary(&b, &m).unwrap();
            let back = load_matrix(&b, MatrixFormat::Binary, false).unwrap();
            let bits = |x: &DataMatrix| x.values().iter().map(|v| v.to_bits()).collect::<Vec<_>>();
            prop_assert_eq!(bits(&back), bits(&m));
            let c = dir.path().join("m.csv");
            save_matrix_csv(&c, &m).unwrap();
            let back = load_matrix(&c, MatrixFormat::Csv { header: false }, true).unwrap();
            for (a, b) in back.values().iter().zip(m.values().iter()) {
                prop_assert!((a - b).abs() <= 1e-12 * b.abs().max(1.0));
            }
        }
    }
}

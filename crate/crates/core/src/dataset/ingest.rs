//! Canonical on-disk corpus layout, one directory per material:
//!
//! | file        | rows | columns | content                                  |
//! |-------------|------|---------|------------------------------------------|
//! | `b.csv`     | N    | 1024    | flux density, tesla                      |
//! | `h.csv`     | N    | 1024    | field strength, A/m                      |
//! | `freq.csv`  | N    | 1       | fundamental frequency, Hz                |
//! | `temp.csv`  | N    | 1       | optional, °C (default 25)                |
//! | `bias.csv`  | N    | 1       | optional, DC bias A/m (default 0)        |
//! | `shape.csv` | N    | 1       | optional, triangular/sinusoidal/trapezoidal/other (default other) |
//!
//! No header rows. The directory name becomes the material name and record
//! ids are `<material>:<row>` with zero-based rows.
//!
//! Published MagNet exports use different file names. The following aliases
//! are accepted for each canonical file, so an unpacked MagNet material folder
//! can be ingested in place:
//!
//! | canonical   | aliases                                                   |
//! |-------------|-----------------------------------------------------------|
//! | `b.csv`     | `B_waveform[T].csv`, `B_waveform.csv`, `B_Field.csv`      |
//! | `h.csv`     | `H_waveform[A-m].csv`, `H_waveform.csv`, `H_Field.csv`    |
//! | `freq.csv`  | `Frequency[Hz].csv`, `Frequency.csv`                      |
//! | `temp.csv`  | `Temperature[C].csv`, `Temperature.csv`                   |
//! | `bias.csv`  | `Hdc[A-m].csv`, `Hdc.csv`                                 |
//! | `shape.csv` | `Waveform.csv`, `Shape.csv`                               |

use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use crate::error::{Error, Result};
use crate::waveform::{ShapeTag, TimeSeries, WaveformRecord};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum LayoutFile {
    B,
    H,
    Frequency,
    Temperature,
    Bias,
    Shape,
}

impl LayoutFile {
    pub fn canonical(self) -> &'static str {
        self.names()[0]
    }

    pub fn names(self) -> &'static [&'static str] {
        match self {
            LayoutFile::B => &["b.csv", "B_waveform[T].csv", "B_waveform.csv", "B_Field.csv"],
            LayoutFile::H => &["h.csv", "H_waveform[A-m].csv", "H_waveform.csv", "H_Field.csv"],
            LayoutFile::Frequency => &["freq.csv", "Frequency[Hz].csv", "Frequency.csv"],
            LayoutFile::Temperature => &["temp.csv", "Temperature[C].csv", "Temperature.csv"],
            LayoutFile::Bias => &["bias.csv", "Hdc[A-m].csv", "Hdc.csv"],
            LayoutFile::Shape => &["shape.csv", "Waveform.csv", "Shape.csv"],
        }
    }

    fn locate(self, dir: &Path) -> Option<PathBuf> {
        self.names().iter().map(|n| dir.join(n)).find(|p| p.is_file())
    }
}

fn reader(path: &Path) -> Result<csv::Reader<fs::File>> {
    csv::ReaderBuilder::new()
        .has_headers(false)
        .flexible(true)
        .trim(csv::Trim::All)
        .from_path(path)
        .map_err(|e| Error::data(path, e.to_string()))
}

fn read_matrix(path: &Path, width: usize) -> Result<Vec<Vec<f64>>> {
    let mut out = Vec::new();
    for (row, rec) in reader(path)?.records().enumerate() {
        let rec = rec.map_err(|e| Error::data(path, format!("row {row}: {e}")))?;
        if rec.len() != width {
            return Err(Error::data(
                path,
                format!(
                    "row {row}: expected {width} samples, found {}; resample the waveform to \
                     {width} points per period before ingesting",
                    rec.len()
                ),
            ));
        }
        let vals = rec
            .iter()
            .enumerate()
            .map(|(col, cell)| {
                cell.parse::<f64>()
                    .map_err(|_| Error::data(path, format!("row {row}, column {col}: non-numeric cell {cell:?}")))
            })
            .collect::<Result<Vec<_>>>()?;
        out.push(vals);
    }
    Ok(out)
}

fn read_column<T>(path: &Path, parse: impl Fn(&str) -> Option<T>) -> Result<Vec<T>> {
    let mut out = Vec::new();
    for (row, rec) in reader(path)?.records().enumerate() {
        let rec = rec.map_err(|e| Error::data(path, format!("row {row}: {e}")))?;
        let cell = match rec.len() {
            1 => rec.get(0).unwrap_or_default(),
            n => return Err(Error::data(path, format!("row {row}: expected one value, found {n}"))),
        };
        out.push(parse(cell).ok_or_else(|| Error::data(path, format!("row {row}: unparseable value {cell:?}")))?);
    }
    Ok(out)
}

fn optional_column<T: Clone>(
    dir: &Path,
    file: LayoutFile,
    rows: usize,
    default: T,
    parse: impl Fn(&str) -> Option<T>,
) -> Result<Vec<T>> {
    match file.locate(dir) {
        None => Ok(vec![default; rows]),
        Some(path) => {
            let col = read_column(&path, parse)?;
            check_rows(&path, col.len(), rows)?;
            Ok(col)
        }
    }
}

fn check_rows(path: &Path, found: usize, expected: usize) -> Result<()> {
    if found != expected {
        return Err(Error::data(path, format!("has {found} rows but the waveform files have {expected}")));
    }
    Ok(())
}

fn required(dir: &Path, file: LayoutFile) -> Result<PathBuf> {
    file.locate(dir).ok_or_else(|| Error::data(dir, format!("missing {} (or one of its aliases)", file.canonical())))
}

/// Load every operating point from one material directory.
pub fn ingest(dir: &Path) -> Result<Vec<WaveformRecord>> {
    if !dir.is_dir() {
        return Err(Error::data(dir, "not a directory"));
    }
    let b_path = required(dir, LayoutFile::B)?;
    let h_path = required(dir, LayoutFile::H)?;
    let f_path = required(dir, LayoutFile::Frequency)?;

    let n = WaveformRecord::DATASET_LENGTH;
    let b = read_matrix(&b_path, n)?;
    let h = read_matrix(&h_path, n)?;
    let rows = b.len();
    if rows == 0 {
        return Err(Error::data(&b_path, "contains no records"));
    }
    check_rows(&h_path, h.len(), rows)?;
    let freq = read_column(&f_path, |s| s.parse::<f64>().ok())?;
    check_rows(&f_path, freq.len(), rows)?;
    let temp = optional_column(dir, LayoutFile::Temperature, rows, 25.0, |s| s.parse().ok())?;
    let bias = optional_column(dir, LayoutFile::Bias, rows, 0.0, |s| s.parse().ok())?;
    let shape = optional_column(dir, LayoutFile::Shape, rows, ShapeTag::Other, |s| s.parse().ok())?;

    let material = dir.file_name().map(|s| s.to_string_lossy().into_owned()).unwrap_or_else(|| "unknown".to_owned());

    b.into_iter()
        .zip(h)
        .enumerate()
        .map(|(row, (b, h))| {
            let f = freq[row];
            let wrap = |e: Error| Error::data(&f_path, format!("row {row}: {e}"));
            WaveformRecord::new(
                format!("{material}:{row}"),
                TimeSeries::new(b, f).map_err(wrap)?,
                TimeSeries::new(h, f).map_err(wrap)?,
                material.clone(),
                temp[row],
                bias[row],
                shape[row],
            )
        })
        .collect()
}

/// One waveform from a CSV file holding either a single row or a single
/// column of numbers.
pub fn read_series_csv(path: &Path) -> Result<Vec<f64>> {
    let mut rows = Vec::new();
    for (row, rec) in reader(path)?.records().enumerate() {
        let rec = rec.map_err(|e| Error::data(path, format!("row {row}: {e}")))?;
        let vals = rec
            .iter()
            .enumerate()
            .filter(|(_, cell)| !cell.is_empty())
            .map(|(col, cell)| {
                cell.parse::<f64>()
                    .map_err(|_| Error::data(path, format!("row {row}, column {col}: non-numeric cell {cell:?}")))
            })
            .collect::<Result<Vec<_>>>()?;
        if !vals.is_empty() {
            rows.push(vals);
        }
    }
    match rows.as_slice() {
        [] => Err(Error::data(path, "contains no samples")),
        [one] => Ok(one.clone()),
        _ if rows.iter().all(|r| r.len() == 1) => Ok(rows.into_iter().map(|r| r[0]).collect()),
        _ => Err(Error::data(path, "expected a single row or a single column of samples")),
    }
}

/// One value per line, shortest round-trip formatting.
pub fn format_series_csv(values: &[f64]) -> String {
    let mut s = String::with_capacity(values.len() * 20);
    for v in values {
        s.push_str(&format!("{v:?}\n"));
    }
    s
}

/// Write records in the canonical layout. Floats use the shortest
/// representation that parses back to the same bits.
pub fn write_layout(dir: &Path, records: &[WaveformRecord]) -> Result<()> {
    fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    let write = |file: LayoutFile, line: &dyn Fn(&WaveformRecord) -> String| -> Result<()> {
        let path = dir.join(file.canonical());
        let mut buf = Vec::new();
        for r in records {
            buf.extend_from_slice(line(r).as_bytes());
            buf.push(b'\n');
        }
        let mut f = fs::File::create(&path).map_err(|e| Error::io(&path, e))?;
        f.write_all(&buf).map_err(|e| Error::io(&path, e))
    };
    let join = |v: &[f64]| v.iter().map(|x| format!("{x:?}")).collect::<Vec<_>>().join(",");
    write(LayoutFile::B, &|r| join(r.b().values()))?;
    write(LayoutFile::H, &|r| join(r.h().values()))?;
    write(LayoutFile::Frequency, &|r| format!("{:?}", r.frequency()))?;
    write(LayoutFile::Temperature, &|r| format!("{:?}", r.temperature()))?;
    write(LayoutFile::Bias, &|r| format!("{:?}", r.dc_bias()))?;
    write(LayoutFile::Shape, &|r| r.shape().to_string())?;
    Ok(())
}

//! CSV and JSON artifacts. Every file is written to a temporary sibling and
//! renamed into place.

use std::fs;
use std::io::Write;
use std::path::Path;

use ndarray::Array2;
use serde::{Deserialize, Serialize};

use crate::classify::ConfusionMatrix;
use crate::labeling::{LabelScheme, LabelVector, LoadCurve};
use crate::sensing::{PhiSeries, TimeSeriesMatrix};
use crate::uq::UqResult;
use crate::{Error, Result};

/// Writes `bytes` to `path` through a temporary file in the same directory.
pub fn write_atomic(path: &Path, bytes: &[u8]) -> Result<()> {
    let dir = path.parent().filter(|p| !p.as_os_str().is_empty()).unwrap_or(Path::new("."));
    fs::create_dir_all(dir)?;
    let name = path.file_name().ok_or_else(|| Error::Data(format!("{} is not a file path", path.display())))?;
    let tmp = dir.join(format!(".{}.tmp{}", name.to_string_lossy(), std::process::id()));
    let mut f = fs::File::create(&tmp)?;
    f.write_all(bytes)?;
    f.sync_all()?;
    drop(f);
    fs::rename(&tmp, path)?;
    Ok(())
}

pub fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    let mut s = serde_json::to_string_pretty(value)?;
    s.push('\n');
    write_atomic(path, s.as_bytes())
}

pub fn read_json<T: for<'de> Deserialize<'de>>(path: &Path) -> Result<T> {
    let text = fs::read_to_string(path)?;
    Ok(serde_json::from_str(&text)?)
}

fn csv_bytes(header: &[String], rows: impl Iterator<Item = Vec<String>>) -> Result<Vec<u8>> {
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(header)?;
    for r in rows {
        w.write_record(&r)?;
    }
    w.into_inner().map_err(|e| Error::Data(e.to_string()))
}

fn read_table(path: &Path) -> Result<(Vec<String>, Vec<Vec<f64>>)> {
    let mut r = csv::Reader::from_path(path)?;
    let header: Vec<String> = r.headers()?.iter().map(str::to_string).collect();
    let mut rows = Vec::new();
    for (i, rec) in r.records().enumerate() {
        let rec = rec?;
        let row = rec
            .iter()
            .map(|v| {
                v.trim().parse::<f64>().map_err(|_| {
                    Error::Data(format!("{}: row {}: '{v}' is not a number", path.display(), i + 1))
                })
            })
            .collect::<Result<Vec<_>>>()?;
        rows.push(row);
    }
    Ok((header, rows))
}

fn sensor_header(ids: &[usize]) -> Vec<String> {
    std::iter::once("t".to_string()).chain(ids.iter().map(|id| format!("s{id}"))).collect()
}

fn matrix_rows<'a>(times: &'a [f64], m: &'a Array2<f64>) -> impl Iterator<Item = Vec<String>> + 'a {
    times
        .iter()
        .zip(m.rows())
        .map(|(t, row)| std::iter::once(t.to_string()).chain(row.iter().map(|v| v.to_string())).collect())
}

fn read_sensor_table(path: &Path) -> Result<(Vec<f64>, Vec<usize>, Array2<f64>)> {
    let (header, rows) = read_table(path)?;
    if header.first().map(String::as_str) != Some("t") {
        return Err(Error::Data(format!("{}: first column must be 't'", path.display())));
    }
    let ids = header[1..]
        .iter()
        .map(|h| {
            h.strip_prefix('s')
                .and_then(|n| n.parse().ok())
                .ok_or_else(|| Error::Data(format!("{}: bad sensor column '{h}'", path.display())))
        })
        .collect::<Result<Vec<usize>>>()?;
    let n = ids.len();
    let mut m = Array2::zeros((rows.len(), n));
    let mut times = Vec::with_capacity(rows.len());
    for (i, r) in rows.iter().enumerate() {
        if r.len() != n + 1 {
            return Err(Error::Data(format!("{}: row {} has {} fields", path.display(), i + 1, r.len())));
        }
        times.push(r[0]);
        for j in 0..n {
            m[[i, j]] = r[j + 1];
        }
    }
    Ok((times, ids, m))
}

/// `series.csv`: `t,s<node>,...` with raw damage values.
pub fn write_series(path: &Path, series: &PhiSeries) -> Result<()> {
    write_atomic(path, &csv_bytes(&sensor_header(&series.sensor_ids), matrix_rows(&series.times, &series.phi))?)
}

pub fn read_series(path: &Path, case_id: Option<u8>) -> Result<PhiSeries> {
    let (t, ids, m) = read_sensor_table(path)?;
    PhiSeries::new(t, ids, m, case_id)
}

/// `patterns.csv`: same layout as the series with `g(φ)` entries.
pub fn write_patterns(path: &Path, patterns: &TimeSeriesMatrix) -> Result<()> {
    write_atomic(path, &csv_bytes(&sensor_header(&patterns.sensor_ids), matrix_rows(&patterns.times, &patterns.values))?)
}

pub fn read_patterns(path: &Path, case_id: Option<u8>) -> Result<TimeSeriesMatrix> {
    let (t, ids, m) = read_sensor_table(path)?;
    TimeSeriesMatrix::new(m, t, ids, case_id)
}

/// `curve.csv`: `t,u,f`.
pub fn write_curve(path: &Path, curve: &LoadCurve) -> Result<()> {
    let header = ["t", "u", "f"].map(String::from);
    let rows = (0..curve.len()).map(|i| vec![curve.t[i].to_string(), curve.u[i].to_string(), curve.f[i].to_string()]);
    write_atomic(path, &csv_bytes(&header, rows)?)
}

pub fn read_curve(path: &Path) -> Result<LoadCurve> {
    let (header, rows) = read_table(path)?;
    if header != ["t", "u", "f"] {
        return Err(Error::Data(format!("{}: expected columns t,u,f, got {}", path.display(), header.join(","))));
    }
    if let Some(i) = rows.iter().position(|r| r.len() != 3) {
        return Err(Error::Data(format!("{}: row {} has {} fields", path.display(), i + 1, rows[i].len())));
    }
    LoadCurve::new(rows.iter().map(|r| r[0]).collect(), rows.iter().map(|r| r[1]).collect(), rows.iter().map(|r| r[2]).collect())
}

/// Sidecar of `labels.csv`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LabelsMeta {
    pub scheme: LabelScheme,
    pub class_domain: Vec<u8>,
    pub rows: usize,
    #[serde(default)]
    pub cases: Vec<u8>,
}

/// `labels.csv` (`t,label`) and its JSON sidecar next to it.
pub fn write_labels(path: &Path, times: &[f64], labels: &LabelVector, cases: &[u8]) -> Result<()> {
    if times.len() != labels.len() {
        return Err(Error::Data(format!("{} times for {} labels", times.len(), labels.len())));
    }
    let header = ["t", "label"].map(String::from);
    let rows = times.iter().zip(&labels.labels).map(|(t, l)| vec![t.to_string(), l.to_string()]);
    write_atomic(path, &csv_bytes(&header, rows)?)?;
    let meta = LabelsMeta {
        scheme: labels.scheme,
        class_domain: labels.class_domain.clone(),
        rows: labels.len(),
        cases: cases.to_vec(),
    };
    write_json(&path.with_extension("json"), &meta)
}

pub fn read_labels(path: &Path) -> Result<(Vec<f64>, LabelVector)> {
    let meta: LabelsMeta = read_json(&path.with_extension("json"))?;
    let (header, rows) = read_table(path)?;
    if header != ["t", "label"] {
        return Err(Error::Data(format!("{}: expected columns t,label", path.display())));
    }
    let mut times = Vec::with_capacity(rows.len());
    let mut labels = Vec::with_capacity(rows.len());
    for (i, r) in rows.iter().enumerate() {
        let l = r.get(1).copied().unwrap_or(f64::NAN);
        if r.len() != 2 || l.fract() != 0.0 || !(0.0..=255.0).contains(&l) {
            return Err(Error::Data(format!("{}: row {} is not 't,label'", path.display(), i + 1)));
        }
        times.push(r[0]);
        labels.push(l as u8);
    }
    if labels.len() != meta.rows {
        return Err(Error::Data(format!("{}: {} rows, sidecar says {}", path.display(), labels.len(), meta.rows)));
    }
    let lv = LabelVector::new(meta.scheme, labels).map_err(|e| Error::Data(e.to_string()))?;
    Ok((times, lv))
}

pub fn write_confusion(path: &Path, cm: &ConfusionMatrix) -> Result<()> {
    write_json(path, &cm.to_json())
}

/// `uq_report.csv` with one row per algorithm and noise level, and
/// `uq_raw.csv` with every run.
pub fn write_uq(report: &Path, raw: &Path, result: &UqResult) -> Result<()> {
    let header = ["algorithm", "noise_std", "mean_acc", "std_acc", "runs"].map(String::from);
    let rows = result.cells.iter().map(|c| {
        vec![c.algorithm.name().into(), c.noise_std.to_string(), c.mean.to_string(), c.std.to_string(), c.runs.to_string()]
    });
    write_atomic(report, &csv_bytes(&header, rows)?)?;
    let header = ["algorithm", "noise_std", "run", "accuracy"].map(String::from);
    let rows = result.raw.iter().map(|r| {
        vec![
            r.algorithm.name().into(),
            r.noise_std.to_string(),
            r.run.to_string(),
            r.accuracy.map(|a| a.to_string()).unwrap_or_default(),
        ]
    });
    write_atomic(raw, &csv_bytes(&header, rows)?)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::labeling::label_multi3;

    fn series() -> PhiSeries {
        let phi = Array2::from_shape_fn((5, 3), |(i, j)| 0.1 * i as f64 + 0.01 * j as f64);
        PhiSeries::new((0..5).map(|i| i as f64 * 5e-4).collect(), vec![4, 91, 143], phi, Some(1)).unwrap()
    }

    #[test]
    fn series_and_patterns_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let s = series();
        let p = dir.path().join("series.csv");
        write_series(&p, &s).unwrap();
        let text = fs::read_to_string(&p).unwrap();
        assert!(text.starts_with("t,s4,s91,s143\n"));
        assert_eq!(read_series(&p, Some(1)).unwrap(), s);
        let q = dir.path().join("patterns.csv");
        write_patterns(&q, &s.to_patterns()).unwrap();
        assert_eq!(read_patterns(&q, Some(1)).unwrap(), s.to_patterns());
    }

    #[test]
    fn curve_and_labels_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let f = vec![0.0, 5.0, 10.0, 9.6, 9.2, 8.5, 7.0];
        let n = f.len();
        let c = LoadCurve::new((0..n).map(|i| i as f64).collect(), (0..n).map(|i| 1e-3 * i as f64).collect(), f).unwrap();
        let p = dir.path().join("curve.csv");
        write_curve(&p, &c).unwrap();
        assert_eq!(read_curve(&p).unwrap(), c);

        let lv = label_multi3(&c).unwrap();
        let l = dir.path().join("labels.csv");
        write_labels(&l, &c.t, &lv, &[1]).unwrap();
        assert!(dir.path().join("labels.json").exists());
        let (t, back) = read_labels(&l).unwrap();
        assert_eq!((t, back), (c.t.clone(), lv));
    }

    #[test]
    fn bad_files_are_data_errors() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("curve.csv");
        fs::write(&p, "t,u,f\n0,0,x\n").unwrap();
        assert!(read_curve(&p).unwrap_err().is_data());
        fs::write(&p, "a,b\n1,2\n").unwrap();
        assert!(read_curve(&p).unwrap_err().is_data());
        let s = dir.path().join("series.csv");
        fs::write(&s, "t,node1\n0,0\n").unwrap();
        assert!(read_series(&s, None).unwrap_err().is_data());
        assert!(read_series(&dir.path().join("missing.csv"), None).unwrap_err().is_data());
    }

    #[test]
    fn atomic_write_replaces() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("x.json");
        write_json(&p, &vec![1, 2]).unwrap();
        write_json(&p, &vec![3]).unwrap();
        assert_eq!(read_json::<Vec<i32>>(&p).unwrap(), vec![3]);
        assert_eq!(fs::read_dir(dir.path()).unwrap().count(), 1);
    }
}

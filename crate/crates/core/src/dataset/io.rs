use std::fs::File;
use std::io::{BufReader, BufWriter, Write};
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use super::{DataPoint, Dataset, DatasetMeta, Role, Scaling};
use crate::error::{Error, Result};

#[derive(Serialize, Deserialize)]
struct Sidecar {
    role: Role,
    scaling: Scaling,
    #[serde(default)]
    meta: DatasetMeta,
}

/// `data.csv` -> `data.json`.
pub fn sidecar_path(csv_path: &Path) -> PathBuf {
    csv_path.with_extension("json")
}

/// Writes `theta_0,...,theta_{d-1},successes,trials` rows plus a JSON
/// sidecar with the role, scaling and provenance.
pub fn write_dataset(ds: &Dataset, csv_path: &Path) -> Result<()> {
    let mut w = csv::Writer::from_writer(BufWriter::new(File::create(csv_path)?));
    let mut header: Vec<String> = (0..ds.dim()).map(|j| format!("theta_{j}")).collect();
    header.extend(["successes".to_string(), "trials".to_string()]);
    w.write_record(&header)?;
    for p in &ds.points {
        let mut row: Vec<String> = p.theta.iter().map(|x| x.to_string()).collect();
        row.push(p.successes.to_string());
        row.push(p.trials.to_string());
        w.write_record(&row)?;
    }
    w.flush()?;
    let side = Sidecar { role: ds.role, scaling: ds.scaling.clone(), meta: ds.meta.clone() };
    let mut f = BufWriter::new(File::create(sidecar_path(csv_path))?);
    serde_json::to_writer_pretty(&mut f, &side)?;
    f.write_all(b"\n")?;
    f.flush()?;
    Ok(())
}

/// Reads a dataset written by [`write_dataset`].
pub fn read_dataset(csv_path: &Path) -> Result<Dataset> {
    let side: Sidecar = serde_json::from_reader(BufReader::new(File::open(sidecar_path(csv_path))?))?;
    let mut r = csv::Reader::from_reader(BufReader::new(File::open(csv_path)?));
    let d = side.scaling.dim();
    let ncol = r.headers()?.len();
    if ncol != d + 2 {
        return Err(Error::DimensionMismatch { expected: d + 2, actual: ncol });
    }
    let mut points = Vec::new();
    for rec in r.records() {
        let rec = rec?;
        let field = |j: usize| rec.get(j).unwrap_or("");
        let bad = |j: usize| Error::InvalidArgument(format!("cannot parse `{}` in column {j}", field(j)));
        let theta = (0..d)
            .map(|j| field(j).trim().parse::<f64>().map_err(|_| bad(j)))
            .collect::<Result<Vec<_>>>()?;
        let successes = field(d).trim().parse().map_err(|_| bad(d))?;
        let trials = field(d + 1).trim().parse().map_err(|_| bad(d + 1))?;
        points.push(DataPoint { theta, successes, trials });
    }
    Ok(Dataset::new(side.role, points, side.scaling)?.with_meta(side.meta))
}

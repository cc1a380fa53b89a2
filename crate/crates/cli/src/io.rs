//! CSV point clouds, control datasets, tables and model bundles.

use std::fs;
use std::path::Path;

use kedmd_core::control::{ClusterRegression, ControlDataset, ControlSurrogate};
use kedmd_core::geometry::{AxisBox, PointCloud};
use kedmd_core::koopman::{AutonomousSurrogate, CoordinateObservables};
use kedmd_core::linalg::Matrix;
use kedmd_core::rkhs::RkhsModel;
use kedmd_core::wendland::WendlandKernel;
use serde::{Deserialize, Serialize};

use crate::config::{BoxSpec, VariantName};
use crate::error::{Failure, Result};

/// Shortest representation that parses back to the same bits.
pub fn fmt_f64(v: f64) -> String {
    format!("{v:?}")
}

fn parse_record(rec: &csv::StringRecord, line: u64) -> Result<Vec<f64>> {
    rec.iter()
        .map(|s| {
            s.trim().parse::<f64>().map_err(|_| Failure::config(format!("line {line}: `{s}` is not a number")))
        })
        .collect()
}

/// Reads a numeric CSV with a header row. Returns the header and rows.
pub fn read_table(path: &Path) -> Result<(Vec<String>, Vec<Vec<f64>>)> {
    let mut rdr = csv::ReaderBuilder::new()
        .has_headers(true)
        .from_path(path)
        .map_err(|e| Failure::config(format!("{}: {e}", path.display())))?;
    let header = rdr.headers()?.iter().map(|h| h.trim().to_string()).collect::<Vec<_>>();
    let mut rows = Vec::new();
    for (i, rec) in rdr.records().enumerate() {
        let rec = rec?;
        rows.push(parse_record(&rec, i as u64 + 2)?);
    }
    Ok((header, rows))
}

pub fn write_table<I>(path: &Path, header: &[String], rows: I) -> Result<()>
where
    I: IntoIterator<Item = Vec<f64>>,
{
    let mut w = csv::Writer::from_path(path)?;
    w.write_record(header)?;
    for row in rows {
        w.write_record(row.iter().map(|v| fmt_f64(*v)))?;
    }
    w.flush()?;
    Ok(())
}

pub fn names(prefix: &str, count: usize) -> Vec<String> {
    (1..=count).map(|i| format!("{prefix}{i}")).collect()
}

/// Point cloud CSV with header `x1..xn`.
pub fn read_point_cloud(path: &Path) -> Result<PointCloud> {
    let (header, rows) = read_table(path)?;
    let n = header.len();
    if header != names("x", n) {
        return Err(Failure::config(format!("{}: expected header x1..x{n}", path.display())));
    }
    Ok(PointCloud::new(n, rows.into_iter().flatten().collect())?)
}

pub fn write_point_cloud(path: &Path, cloud: &PointCloud) -> Result<()> {
    write_table(path, &names("x", cloud.dim()), cloud.iter().map(<[f64]>::to_vec))
}

/// Control triples with header `x1..xn,u1..um,xp1..xpn`.
pub fn read_control_dataset(path: &Path, bound: f64) -> Result<ControlDataset> {
    let (header, rows) = read_table(path)?;
    let n = header.iter().filter(|h| h.starts_with("xp")).count();
    let m = header.len().saturating_sub(2 * n);
    let expected: Vec<String> = names("x", n).into_iter().chain(names("u", m)).chain(names("xp", n)).collect();
    if n == 0 || m == 0 || header != expected {
        return Err(Failure::config(format!("{}: expected header x1..xn,u1..um,xp1..xpn", path.display())));
    }
    let mut states = Vec::with_capacity(rows.len() * n);
    let mut controls = Vec::with_capacity(rows.len() * m);
    let mut succ = Vec::with_capacity(rows.len() * n);
    for r in rows {
        states.extend_from_slice(&r[..n]);
        controls.extend_from_slice(&r[n..n + m]);
        succ.extend_from_slice(&r[n + m..]);
    }
    Ok(ControlDataset::new(PointCloud::new(n, states)?, controls, m, PointCloud::new(n, succ)?, bound)?)
}

pub fn write_control_dataset(path: &Path, data: &ControlDataset) -> Result<()> {
    let (n, m) = (data.dim(), data.control_dim());
    let header: Vec<String> = names("x", n).into_iter().chain(names("u", m)).chain(names("xp", n)).collect();
    let rows = (0..data.len()).map(|i| {
        let mut r = data.states().point(i).to_vec();
        r.extend_from_slice(data.control(i));
        r.extend_from_slice(data.successors().point(i));
        r
    });
    write_table(path, &header, rows)
}

pub fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    let mut text = serde_json::to_string_pretty(value)?;
    text.push('\n');
    fs::write(path, text)?;
    Ok(())
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct KernelMeta {
    pub dim: usize,
    pub smoothness: u32,
    pub support_radius: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ControlMeta {
    pub control_dim: usize,
    pub bound: f64,
    pub neighbors: usize,
    pub eps: f64,
    /// Indices (into the original center list) of rejected clusters.
    pub rejected: Vec<usize>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum BundleKind {
    Autonomous,
    Control,
}

/// `meta.json` of a model bundle; `centers.csv` and `coefficients.csv` sit beside it.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BundleMeta {
    pub format: u32,
    pub kind: BundleKind,
    pub system: String,
    pub kernel: KernelMeta,
    pub lambda: f64,
    pub jitter: f64,
    pub output_dim: usize,
    pub domain: BoxSpec,
    #[serde(default)]
    pub variant: Option<VariantName>,
    #[serde(default)]
    pub control: Option<ControlMeta>,
}

const FORMAT: u32 = 1;

fn save_model(dir: &Path, model: &RkhsModel, meta: &BundleMeta) -> Result<()> {
    fs::create_dir_all(dir)?;
    write_point_cloud(&dir.join("centers.csv"), model.centers())?;
    let c = model.coefficients();
    write_table(&dir.join("coefficients.csv"), &names("c", c.cols()), (0..c.rows()).map(|i| c.row(i).to_vec()))?;
    write_json(&dir.join("meta.json"), meta)
}

fn load_model(dir: &Path) -> Result<(RkhsModel, BundleMeta)> {
    let meta_text = fs::read_to_string(dir.join("meta.json"))
        .map_err(|e| Failure::config(format!("{}: {e}", dir.join("meta.json").display())))?;
    let meta: BundleMeta = serde_json::from_str(&meta_text)?;
    if meta.format != FORMAT {
        return Err(Failure::config(format!("unsupported bundle format {}", meta.format)));
    }
    let centers = read_point_cloud(&dir.join("centers.csv"))?;
    let (header, rows) = read_table(&dir.join("coefficients.csv"))?;
    if header.len() != meta.output_dim || rows.len() != centers.len() {
        return Err(Failure::config("coefficient table does not match centers and meta"));
    }
    let coefficients = Matrix::from_row_major(rows.len(), header.len(), rows.into_iter().flatten().collect());
    let k = &meta.kernel;
    let kernel = WendlandKernel::new(k.dim, k.smoothness, k.support_radius)?;
    let model = RkhsModel::from_parts(kernel, centers, meta.lambda, meta.jitter, coefficients)?;
    Ok((model, meta))
}

fn box_spec(b: &AxisBox) -> BoxSpec {
    BoxSpec { lower: b.lower().to_vec(), upper: b.upper().to_vec() }
}

fn kernel_meta(k: &WendlandKernel) -> KernelMeta {
    KernelMeta { dim: k.dim(), smoothness: k.smoothness(), support_radius: k.support_radius() }
}

pub fn save_autonomous(dir: &Path, system: &str, s: &AutonomousSurrogate) -> Result<()> {
    let model = s.model();
    let variant = match s.variant() {
        kedmd_core::koopman::Variant::Standard => VariantName::Standard,
        kedmd_core::koopman::Variant::Alternative => VariantName::Alternative,
    };
    let meta = BundleMeta {
        format: FORMAT,
        kind: BundleKind::Autonomous,
        system: system.to_string(),
        kernel: kernel_meta(model.kernel()),
        lambda: model.lambda(),
        jitter: model.jitter(),
        output_dim: model.output_dim(),
        domain: box_spec(s.domain()),
        variant: Some(variant),
        control: None,
    };
    save_model(dir, model, &meta)
}

pub fn load_autonomous(dir: &Path) -> Result<(AutonomousSurrogate, BundleMeta)> {
    let (model, meta) = load_model(dir)?;
    if meta.kind != BundleKind::Autonomous {
        return Err(Failure::config("bundle holds a control surrogate"));
    }
    let domain = AxisBox::new(meta.domain.lower.clone(), meta.domain.upper.clone())?;
    let obs = CoordinateObservables { dim: meta.kernel.dim };
    let s = AutonomousSurrogate::from_model(model, obs, meta.variant.unwrap_or_default().into(), domain)?;
    Ok((s, meta))
}

pub fn save_control(dir: &Path, system: &str, s: &ControlSurrogate, reg: &ClusterRegression) -> Result<()> {
    use kedmd_core::control::ControlSystem;
    let model = s.model();
    let meta = BundleMeta {
        format: FORMAT,
        kind: BundleKind::Control,
        system: system.to_string(),
        kernel: kernel_meta(model.kernel()),
        lambda: model.lambda(),
        jitter: model.jitter(),
        output_dim: model.output_dim(),
        domain: box_spec(s.domain()),
        variant: None,
        control: Some(ControlMeta {
            control_dim: s.control_dim(),
            bound: s.control_bound(),
            neighbors: reg.neighbors,
            eps: reg.eps(),
            rejected: reg.rejected.iter().map(|r| r.center_index).collect(),
        }),
    };
    save_model(dir, model, &meta)
}

pub fn load_control(dir: &Path) -> Result<(ControlSurrogate, BundleMeta)> {
    let (model, meta) = load_model(dir)?;
    let c = meta.control.as_ref().filter(|_| meta.kind == BundleKind::Control);
    let c = c.ok_or_else(|| Failure::config("bundle holds an autonomous surrogate"))?;
    let s = ControlSurrogate::from_model(model, meta.kernel.dim, c.control_dim, c.bound)?;
    Ok((s, meta))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn floats_round_trip_exactly() {
        for v in [0.1, 1.0 / 3.0, -2.5e-300, 1e300, 0.0, -0.0, 123456.789] {
            assert_eq!(fmt_f64(v).parse::<f64>().unwrap().to_bits(), v.to_bits());
        }
    }

    #[test]
    fn point_cloud_csv_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("c.csv");
        let c = PointCloud::from_points(&[[0.1, -0.2], [1.0 / 3.0, 2.0]]).unwrap();
        write_point_cloud(&p, &c).unwrap();
        assert_eq!(read_point_cloud(&p).unwrap(), c);
        fs::write(&p, "a,b\n1,2\n").unwrap();
        assert!(read_point_cloud(&p).is_err());
        fs::write(&p, "x1,x2\n1,zz\n").unwrap();
        assert_eq!(read_point_cloud(&p).unwrap_err().exit_code(), 2);
    }

    #[test]
    fn control_csv_round_trip_and_bound_check() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("d.csv");
        let s = PointCloud::from_points(&[[0.0, 1.0], [0.5, 0.5]]).unwrap();
        let d = ControlDataset::new(s.clone(), vec![1.0, -2.0], 1, s, 2.0).unwrap();
        write_control_dataset(&p, &d).unwrap();
        assert_eq!(read_control_dataset(&p, 2.0).unwrap(), d);
        assert!(read_control_dataset(&p, 1.5).is_err());
    }
}

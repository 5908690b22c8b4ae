//! Material tables: one row per cluster plus a particle-to-cluster map.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::material::{MaterialField, MaterialParams};

#[derive(Debug, Serialize, Deserialize)]
struct ClusterRow {
    cluster_id: usize,
    mu_e: f64,
    lambda_e: f64,
    eta_v: f64,
    gamma_v: f64,
}

#[derive(Debug, Serialize, Deserialize)]
struct MapRow {
    particle: usize,
    cluster_id: usize,
}

/// Path of the particle map written next to a material table.
pub fn cluster_map_path(table: &Path) -> PathBuf {
    let stem = table.file_stem().map_or_else(|| "material".into(), |s| s.to_string_lossy().into_owned());
    table.with_file_name(format!("{stem}_clusters.csv"))
}

pub fn save_material_table(path: &Path, field: &MaterialField, per_cluster: &[MaterialParams]) -> Result<()> {
    let mut w = csv::Writer::from_path(path)?;
    for (c, p) in per_cluster.iter().enumerate() {
        w.serialize(ClusterRow { cluster_id: c, mu_e: p.mu_e, lambda_e: p.lambda_e, eta_v: p.eta_v, gamma_v: p.gamma_v })?;
    }
    w.flush()?;
    let mut w = csv::Writer::from_path(cluster_map_path(path))?;
    for (i, &c) in field.cluster_id.iter().enumerate() {
        w.serialize(MapRow { particle: i, cluster_id: c })?;
    }
    w.flush()?;
    Ok(())
}

/// Reads a table and its particle map into a material field.
pub fn load_material_table(path: &Path) -> Result<(MaterialField, Vec<MaterialParams>)> {
    let map_path = cluster_map_path(path);
    for p in [path, map_path.as_path()] {
        if !p.exists() {
            return Err(Error::NotFound(p.to_path_buf()));
        }
    }
    let ctx = path.display().to_string();
    let mut params = Vec::new();
    for (k, row) in csv::Reader::from_path(path)?.deserialize::<ClusterRow>().enumerate() {
        let row = row.map_err(|e| Error::parse(&ctx, format!("row {}: {e}", k + 1)))?;
        if row.cluster_id != k {
            return Err(Error::parse(&ctx, format!("row {}: clusters must be listed in order", k + 1)));
        }
        let p = MaterialParams { mu_e: row.mu_e, lambda_e: row.lambda_e, eta_v: row.eta_v, gamma_v: row.gamma_v };
        p.validate()?;
        params.push(p);
    }
    let mut ids = Vec::new();
    for (k, row) in csv::Reader::from_path(&map_path)?.deserialize::<MapRow>().enumerate() {
        let row = row.map_err(|e| Error::parse(map_path.display().to_string(), format!("row {}: {e}", k + 1)))?;
        if row.particle != k {
            return Err(Error::parse(map_path.display().to_string(), format!("row {}: particles out of order", k + 1)));
        }
        ids.push(row.cluster_id);
    }
    let mut field = MaterialField::uniform(ids.len(), params.first().copied().unwrap_or_default());
    field.set_clusters(ids, params.len())?;
    field.apply_cluster_params(&params)?;
    Ok((field, params))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn table_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("material.csv");
        let params = vec![MaterialParams::from_shear(1e3, 2.0, 0.5), MaterialParams::from_shear(4e3, 0.1, 1.5)];
        let mut field = MaterialField::uniform(5, params[0]);
        field.set_clusters(vec![0, 1, 1, 0, 1], 2).unwrap();
        field.apply_cluster_params(&params).unwrap();
        save_material_table(&path, &field, &params).unwrap();
        let (back, back_params) = load_material_table(&path).unwrap();
        assert_eq!(back, field);
        assert_eq!(back_params, params);
        let header = std::fs::read_to_string(&path).unwrap();
        assert!(header.starts_with("cluster_id,mu_e,lambda_e,eta_v,gamma_v\n"));
    }
}

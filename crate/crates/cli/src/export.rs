//! CSV export of point clouds.

use std::path::Path;

use dualpair::leaves::ReachCloud;

use crate::CliError;

/// Writes one row per cloud point: the coordinates, then `word_index`.
pub fn write_cloud(cloud: &ReachCloud, path: &Path) -> Result<(), CliError> {
    if let Some(dir) = path.parent() {
        std::fs::create_dir_all(dir).map_err(|e| CliError::io(dir, e))?;
    }
    let mut w = csv::Writer::from_path(path).map_err(|e| CliError::Csv(e.to_string()))?;
    let mut header = cloud.coordinates.clone();
    header.push("word_index".into());
    w.write_record(&header).map_err(|e| CliError::Csv(e.to_string()))?;
    for (p, index) in cloud.rows() {
        let mut row: Vec<String> = p.iter().map(|x| x.to_string()).collect();
        row.push(index.to_string());
        w.write_record(&row).map_err(|e| CliError::Csv(e.to_string()))?;
    }
    w.flush().map_err(|e| CliError::io(path, e))
}

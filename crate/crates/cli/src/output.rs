use std::path::Path;

use aeromag_core::spectral::SpectralEstimate;

use crate::error::{CliError, CliResult};

fn csv_err(path: &Path) -> impl Fn(csv::Error) -> CliError + '_ {
    move |e| CliError::Io(format!("{}: {e}", path.display()))
}

/// Writes a header row and numeric rows.
pub fn write_table(path: &Path, header: &[&str], rows: impl IntoIterator<Item = Vec<f64>>) -> CliResult<()> {
    let mut w = csv::Writer::from_path(path).map_err(csv_err(path))?;
    w.write_record(header).map_err(csv_err(path))?;
    for row in rows {
        w.write_record(row.iter().map(|v| v.to_string()))
            .map_err(csv_err(path))?;
    }
    w.flush().map_err(|e| CliError::Io(format!("{}: {e}", path.display())))
}

pub fn write_estimate(path: &Path, x_name: &str, y_name: &str, est: &SpectralEstimate) -> CliResult<()> {
    write_table(
        path,
        &[x_name, y_name],
        est.x.iter().zip(&est.y).map(|(x, y)| vec![*x, *y]),
    )
}

pub fn write_json<T: serde::Serialize>(path: &Path, value: &T) -> CliResult<()> {
    let text = serde_json::to_string_pretty(value).map_err(|e| CliError::Io(e.to_string()))?;
    std::fs::write(path, text + "\n").map_err(crate::error::io_at(path))
}

//! Closed-form calibration error table with the exact vector oracle.

use std::io::Write;

use aeromag_core::error_analysis::{error_table, ErrorTableRow};

use crate::error::{at_stage, CliError, CliResult};

/// Parses an angle with an optional `deg` or `rad` suffix; bare numbers are degrees.
pub fn parse_angle(s: &str) -> Result<f64, String> {
    let t = s.trim();
    let (num, to_rad) = if let Some(v) = t.strip_suffix("deg") {
        (v, true)
    } else if let Some(v) = t.strip_suffix("rad") {
        (v, false)
    } else {
        (t, true)
    };
    let x: f64 = num.trim().parse().map_err(|_| format!("invalid angle '{s}'"))?;
    Ok(if to_rad { x.to_radians() } else { x })
}

/// θ grid in degrees: `90`, `0,45,90` or `start:stop:step` (inclusive).
pub fn parse_theta_grid(s: &str) -> Result<Vec<f64>, String> {
    let parts: Vec<&str> = s.split(':').collect();
    let num = |v: &str| v.trim().parse::<f64>().map_err(|_| format!("invalid theta grid '{s}'"));
    match parts.as_slice() {
        [start, stop, step] => {
            let (a, b, d) = (num(start)?, num(stop)?, num(step)?);
            if !(d > 0.0) || b < a {
                return Err(format!("theta grid '{s}' needs start <= stop and a positive step"));
            }
            let n = ((b - a) / d + 1e-9).floor() as usize;
            Ok((0..=n).map(|k| a + k as f64 * d).collect())
        }
        [list] => list.split(',').map(num).collect(),
        _ => Err(format!("invalid theta grid '{s}'")),
    }
}

pub const HEADER: [&str; 11] = [
    "theta_deg",
    "taylor_projection_nt",
    "proxy_scalar_nt",
    "proxy_vector_nt",
    "scalar_attitude_nt",
    "vector_attitude_nt",
    "oracle_taylor_projection_nt",
    "oracle_proxy_scalar_nt",
    "oracle_proxy_vector_nt",
    "oracle_scalar_attitude_nt",
    "oracle_vector_attitude_nt",
];

/// Error magnitudes of one row; θ in degrees.
fn row_values(r: &ErrorTableRow) -> [f64; 11] {
    let e = &r.exact;
    let mut v = [
        r.theta.to_degrees(),
        r.taylor_projection,
        r.proxy_scalar,
        r.proxy_vector,
        r.scalar_attitude,
        r.vector_attitude,
        e.taylor_projection,
        e.proxy_scalar,
        e.proxy_vector,
        e.scalar_attitude,
        e.vector_attitude,
    ];
    for x in &mut v[1..] {
        *x = x.abs();
    }
    v
}

/// Writes the error magnitudes as CSV. `alpha` in radians, θ grid in degrees, fields in nT.
pub fn write_error_table(
    out: impl Write,
    ba: f64,
    be: f64,
    alpha: f64,
    delta_b: f64,
    thetas_deg: &[f64],
) -> CliResult<()> {
    let thetas: Vec<f64> = thetas_deg.iter().map(|t| t.to_radians()).collect();
    let rows = error_table(ba, be, alpha, delta_b, &thetas).map_err(at_stage("error analysis"))?;
    let mut w = csv::Writer::from_writer(out);
    let io = |e: csv::Error| CliError::Io(e.to_string());
    w.write_record(HEADER).map_err(io)?;
    for r in &rows {
        w.write_record(row_values(r).iter().map(|v| v.to_string()))
            .map_err(io)?;
    }
    w.flush().map_err(|e| CliError::Io(e.to_string()))
}

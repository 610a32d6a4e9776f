//! Odd reflection of fields on `[0, T]` to `[-T, T]`.

use ndarray::Array2;

use crate::error::{Error, Result};
use crate::field::SpaceTimeField;

/// Tolerance on `max |y(., 0)|` below which the trace counts as zero.
pub const TRACE_TOLERANCE: f64 = 1e-10;

/// `y(., -t) = -y(., t)`. The field must vanish at `t = 0`; that slice is
/// stored as exact zeros.
pub fn extend_odd(field: &SpaceTimeField) -> Result<SpaceTimeField> {
    check_start(field)?;
    let norm = field.slice(0).iter().fold(0.0f64, |m, v| m.max(v.abs()));
    if norm > TRACE_TOLERANCE {
        return Err(Error::NonzeroTrace { norm });
    }
    Ok(reflect(field))
}

/// Odd reflection without the trace check, for right-hand sides that jump at
/// `t = 0`; the `t = 0` slice is set to zero, the mean of the two one-sided values.
pub fn extend_odd_unchecked(field: &SpaceTimeField) -> Result<SpaceTimeField> {
    check_start(field)?;
    Ok(reflect(field))
}

fn check_start(field: &SpaceTimeField) -> Result<()> {
    if field.t_start.abs() > 1e-12 || field.nt() < 2 {
        return Err(Error::GridMismatch(format!(
            "odd extension needs a field on [0, T] with at least two levels, got t_start = {}",
            field.t_start
        )));
    }
    Ok(())
}

fn reflect(field: &SpaceTimeField) -> SpaceTimeField {
    let nt = field.nt();
    let n = field.values.ncols();
    let mut values = Array2::zeros((2 * nt - 1, n));
    for k in 1..nt {
        let src = field.values.row(k);
        values.row_mut(nt - 1 + k).assign(&src);
        values.row_mut(nt - 1 - k).assign(&src.mapv(|v| -v));
    }
    SpaceTimeField {
        domain: field.domain.clone(),
        t_start: -field.t_end(),
        dt: field.dt,
        values,
    }
}

//! Finite-difference gradient oracle.

use crate::error::{Error, Result};

/// Central-difference gradient of `f` at `point`, one probe pair per coordinate.
pub fn central_difference<F>(f: &mut F, point: &[f64], step: f64) -> Result<Vec<f64>>
where
    F: FnMut(&[f64]) -> Result<f64>,
{
    let mut probe = point.to_vec();
    let mut fd = Vec::with_capacity(point.len());
    for i in 0..point.len() {
        let x = point[i];
        probe[i] = x + step;
        let hi = f(&probe)?;
        probe[i] = x - step;
        let lo = f(&probe)?;
        probe[i] = x;
        if !hi.is_finite() || !lo.is_finite() {
            return Err(Error::NonFinite { what: "finite-difference probe".into(), coord: Some(i) });
        }
        fd.push((hi - lo) / (2.0 * step));
    }
    Ok(fd)
}

/// Max over coordinates of `|analytic - central| / max(1, |central|)`.
///
/// The analytic gradient comes from whatever implementation is under test;
/// the central differences are the independent reference.
pub fn grad_check<F>(mut f: F, analytic: &[f64], point: &[f64], step: f64) -> Result<f64>
where
    F: FnMut(&[f64]) -> Result<f64>,
{
    assert_eq!(analytic.len(), point.len(), "gradient/point length mismatch");
    let fd = central_difference(&mut f, point, step)?;
    let mut worst = 0.0f64;
    for (i, (&a, &c)) in analytic.iter().zip(fd.iter()).enumerate() {
        if !a.is_finite() {
            return Err(Error::NonFinite { what: "analytic gradient".into(), coord: Some(i) });
        }
        let err = (a - c).abs() / c.abs().max(1.0);
        worst = worst.max(err);
    }
    Ok(worst)
}

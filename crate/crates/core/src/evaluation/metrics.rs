use crate::error::{Error, Result};

fn check<const D: usize>(pred: &[[f64; D]], truth: &[[f64; D]]) -> Result<()> {
    if pred.len() != truth.len() || pred.is_empty() || D % 3 != 0 {
        return Err(Error::Shape {
            what: "metric frames",
            expected: vec![truth.len(), D],
            got: vec![pred.len(), D],
        });
    }
    Ok(())
}

/// Mean Euclidean distance of the `D / 3` points in one frame.
fn frame_error<const D: usize>(pred: &[f64; D], truth: &[f64; D]) -> f64 {
    let total: f64 = pred
        .chunks_exact(3)
        .zip(truth.chunks_exact(3))
        .map(|(a, b)| ((a[0] - b[0]).powi(2) + (a[1] - b[1]).powi(2) + (a[2] - b[2]).powi(2)).sqrt())
        .sum();
    total / (D / 3) as f64
}

/// Average displacement error: mean point distance over all frames and
/// points. Frames hold `D / 3` points.
pub fn ade<const D: usize>(pred: &[[f64; D]], truth: &[[f64; D]]) -> Result<f64> {
    check(pred, truth)?;
    let sum: f64 = pred.iter().zip(truth).map(|(p, t)| frame_error(p, t)).sum();
    Ok(sum / pred.len() as f64)
}

/// Final displacement error: mean point distance in the last frame.
pub fn fde<const D: usize>(pred: &[[f64; D]], truth: &[[f64; D]]) -> Result<f64> {
    check(pred, truth)?;
    Ok(frame_error(pred.last().unwrap(), truth.last().unwrap()))
}

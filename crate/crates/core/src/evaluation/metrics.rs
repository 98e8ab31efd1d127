use crate::error::{Error, Result};
use crate::geometry::{angular_deviation, Vec3};

/// Percentage of predictions equal to the truth.
pub fn accuracy(preds: &[u32], truth: &[u32]) -> Result<f64> {
    if preds.len() != truth.len() {
        return Err(Error::LengthMismatch(preds.len(), truth.len()));
    }
    if preds.is_empty() {
        return Err(Error::Empty);
    }
    let hits = preds.iter().zip(truth).filter(|(a, b)| a == b).count();
    Ok(100.0 * hits as f64 / preds.len() as f64)
}

/// Mean angular deviation in degrees.
pub fn mad(preds: &[Vec3], truth: &[Vec3]) -> Result<f64> {
    if preds.len() != truth.len() {
        return Err(Error::LengthMismatch(preds.len(), truth.len()));
    }
    if preds.is_empty() {
        return Err(Error::Empty);
    }
    let mut total = 0.0;
    for (p, t) in preds.iter().zip(truth) {
        total += angular_deviation(*p, *t)?;
    }
    Ok(total / preds.len() as f64)
}

/// `k × k` counts, rows indexed by true class and columns by prediction, in
/// the order of `classes`.
pub fn confusion_matrix(preds: &[u32], truth: &[u32], classes: &[u32]) -> Result<Vec<Vec<u64>>> {
    if preds.len() != truth.len() {
        return Err(Error::LengthMismatch(preds.len(), truth.len()));
    }
    let index = |id: u32| {
        classes
            .iter()
            .position(|&c| c == id)
            .ok_or(Error::UnknownAoi(id))
    };
    let mut m = vec![vec![0; classes.len()]; classes.len()];
    for (&p, &t) in preds.iter().zip(truth) {
        m[index(t)?][index(p)?] += 1;
    }
    Ok(m)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::from_azimuth_elevation;

    #[test]
    fn accuracy_examples() {
        assert_eq!(accuracy(&[1, 2, 3], &[1, 2, 3]).unwrap(), 100.0);
        assert_eq!(accuracy(&[1, 2, 3, 4], &[1, 2, 3, 5]).unwrap(), 75.0);
        assert!(matches!(
            accuracy(&[1], &[1, 2]),
            Err(Error::LengthMismatch(1, 2))
        ));
        assert!(matches!(accuracy(&[], &[]), Err(Error::Empty)));
    }

    #[test]
    fn mad_examples() {
        let a = Vec3::new(0.3, -0.2, 0.9);
        assert_eq!(mad(&[a], &[a]).unwrap(), 0.0);
        assert!((mad(&[Vec3::X], &[Vec3::Y]).unwrap() - 90.0).abs() < 1e-12);
        let preds = [
            from_azimuth_elevation(30.0, 0.0),
            from_azimuth_elevation(0.0, 60.0),
        ];
        let m = mad(&preds, &[Vec3::X, Vec3::X]).unwrap();
        assert!((m - 45.0).abs() < 1e-9);
        assert!(matches!(
            mad(&[Vec3::ZERO], &[Vec3::X]),
            Err(Error::ZeroVector)
        ));
    }

    #[test]
    fn confusion_trace_matches_accuracy() {
        let preds = [1, 2, 2, 3, 1];
        let truth = [1, 2, 3, 3, 2];
        let m = confusion_matrix(&preds, &truth, &[1, 2, 3]).unwrap();
        assert_eq!(m, vec![vec![1, 0, 0], vec![1, 1, 0], vec![0, 1, 1]]);
        let trace: u64 = (0..3).map(|i| m[i][i]).sum();
        assert_eq!(
            100.0 * trace as f64 / 5.0,
            accuracy(&preds, &truth).unwrap()
        );
        assert!(confusion_matrix(&[4], &[1], &[1, 2]).is_err());
    }
}

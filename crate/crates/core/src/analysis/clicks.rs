use crate::geometry::BBox;
use crate::proxy::ProxyPoint;

use super::AnalysisError;

/// Fraction of points inside (or on the boundary of) any box of their image.
pub fn click_localization_accuracy(pairs: &[(ProxyPoint, Vec<BBox>)]) -> Result<f64, AnalysisError> {
    if pairs.is_empty() {
        return Err(AnalysisError::EmptyInput);
    }
    let hits = pairs
        .iter()
        .filter(|(p, boxes)| boxes.iter().any(|b| b.contains(*p)))
        .count();
    Ok(hits as f64 / pairs.len() as f64)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn center_inside_corner_outside() {
        let b = BBox::new(0.4, 0.4, 0.6, 0.6).unwrap();
        let pairs = vec![(b.center(), vec![b]), (ProxyPoint { x: 0.0, y: 0.0 }, vec![b])];
        assert_eq!(click_localization_accuracy(&pairs).unwrap(), 0.5);
        assert_eq!(click_localization_accuracy(&[]), Err(AnalysisError::EmptyInput));
    }

    #[test]
    fn any_instance_box_counts() {
        let a = BBox::new(0.0, 0.0, 0.2, 0.2).unwrap();
        let b = BBox::new(0.7, 0.7, 0.9, 0.9).unwrap();
        let pairs = vec![(ProxyPoint { x: 0.8, y: 0.8 }, vec![a, b])];
        assert_eq!(click_localization_accuracy(&pairs).unwrap(), 1.0);
    }
}

//! Polar decomposition and selection of threshold exceedances.

use crate::error::{Error, Result};
use crate::generators::Label;
use crate::linalg;

/// Splits `x` into its Euclidean radius and the direction `x / ‖x‖`.
pub fn polar_decompose(x: &[f64]) -> Result<(f64, Vec<f64>)> {
    let r = linalg::norm(x);
    if r == 0.0 || !r.is_finite() {
        return Err(Error::ZeroRadius);
    }
    Ok((r, x.iter().map(|v| v / r).collect()))
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum ExtremeRule {
    /// Keep the `k` observations with the largest radii.
    TopK(usize),
    /// Keep every observation whose radius exceeds `u`.
    Threshold(f64),
}

/// The angular parts of the observations whose radius exceeds a level `u_n`.
///
/// All vectors are index-aligned and listed in order of appearance in the
/// original data. `threshold` is the effective level: for [`ExtremeRule::TopK`]
/// it is the `(k+1)`-th largest radius (zero when every row is kept).
#[derive(Debug, Clone, PartialEq)]
pub struct ExtremalSample {
    pub angles: Vec<Vec<f64>>,
    pub radii: Vec<f64>,
    pub threshold: f64,
    pub source_indices: Vec<usize>,
    pub labels: Option<Vec<Label>>,
}

impl ExtremalSample {
    pub fn len(&self) -> usize {
        self.angles.len()
    }

    pub fn is_empty(&self) -> bool {
        self.angles.is_empty()
    }

    pub fn dim(&self) -> usize {
        self.angles.first().map_or(0, Vec::len)
    }

    /// Attaches per-observation labels of the full data set, picking the
    /// entries that belong to the extremes.
    pub fn with_labels(mut self, all_labels: &[Label]) -> Result<Self> {
        let picked = self
            .source_indices
            .iter()
            .map(|&i| {
                all_labels.get(i).copied().ok_or_else(|| {
                    Error::DimensionMismatch(format!(
                        "label vector of length {} has no entry for row {i}",
                        all_labels.len()
                    ))
                })
            })
            .collect::<Result<Vec<_>>>()?;
        self.labels = Some(picked);
        Ok(self)
    }
}

pub fn extract_extremes(data: &[Vec<f64>], rule: ExtremeRule) -> Result<ExtremalSample> {
    if data.is_empty() {
        return Err(Error::EmptySample);
    }
    let radii: Vec<f64> = data.iter().map(|x| linalg::norm(x)).collect();
    let n = data.len();

    let (mut selected, threshold) = match rule {
        ExtremeRule::TopK(k) => {
            if k == 0 || k > n {
                return Err(Error::InvalidArgument(format!(
                    "TopK({k}) needs 1 <= k <= {n}"
                )));
            }
            let mut order: Vec<usize> = (0..n).collect();
            // stable sort keeps the lower index first among equal radii
            order.sort_by(|&a, &b| radii[b].total_cmp(&radii[a]));
            let threshold = if k == n { 0.0 } else { radii[order[k]] };
            order.truncate(k);
            (order, threshold)
        }
        ExtremeRule::Threshold(u) => {
            if !(u > 0.0) {
                return Err(Error::InvalidArgument(format!("threshold must be positive, got {u}")));
            }
            let picked: Vec<usize> = (0..n).filter(|&i| radii[i] > u).collect();
            if picked.is_empty() {
                return Err(Error::NoExceedances);
            }
            (picked, u)
        }
    };
    selected.sort_unstable();

    let mut angles = Vec::with_capacity(selected.len());
    let mut sel_radii = Vec::with_capacity(selected.len());
    for &i in &selected {
        let (r, a) = polar_decompose(&data[i])?;
        angles.push(a);
        sel_radii.push(r);
    }
    Ok(ExtremalSample {
        angles,
        radii: sel_radii,
        threshold,
        source_indices: selected,
        labels: None,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn polar_examples() {
        assert_eq!(polar_decompose(&[3.0, 4.0]).unwrap(), (5.0, vec![0.6, 0.8]));
        assert_eq!(polar_decompose(&[1.0, 0.0, 0.0]).unwrap(), (1.0, vec![1.0, 0.0, 0.0]));
        assert_eq!(polar_decompose(&[1.0; 4]).unwrap(), (2.0, vec![0.5; 4]));
        assert_eq!(polar_decompose(&[0.0, 0.0]), Err(Error::ZeroRadius));
    }

    fn toy() -> Vec<Vec<f64>> {
        vec![vec![1.0, 0.0], vec![0.0, 2.0], vec![3.0, 0.0]]
    }

    #[test]
    fn top_k_example() {
        let s = extract_extremes(&toy(), ExtremeRule::TopK(2)).unwrap();
        assert_eq!(s.angles, vec![vec![0.0, 1.0], vec![1.0, 0.0]]);
        assert_eq!(s.source_indices, vec![1, 2]);
        assert_eq!(s.threshold, 1.0);
        let all = extract_extremes(&toy(), ExtremeRule::TopK(3)).unwrap();
        assert_eq!(all.threshold, 0.0);
    }

    #[test]
    fn threshold_example() {
        let s = extract_extremes(&toy(), ExtremeRule::Threshold(2.5)).unwrap();
        assert_eq!(s.angles, vec![vec![1.0, 0.0]]);
        assert_eq!(s.source_indices, vec![2]);
        assert_eq!(s.radii, vec![3.0]);
    }

    #[test]
    fn errors() {
        assert!(matches!(
            extract_extremes(&toy(), ExtremeRule::TopK(4)),
            Err(Error::InvalidArgument(_))
        ));
        assert_eq!(
            extract_extremes(&toy(), ExtremeRule::Threshold(10.0)),
            Err(Error::NoExceedances)
        );
        assert_eq!(extract_extremes(&[], ExtremeRule::TopK(1)), Err(Error::EmptySample));
    }

    #[test]
    fn ties_prefer_lower_index() {
        let data = vec![vec![2.0], vec![1.0], vec![2.0], vec![2.0]];
        let s = extract_extremes(&data, ExtremeRule::TopK(2)).unwrap();
        assert_eq!(s.source_indices, vec![0, 2]);
    }

    #[test]
    fn labels_follow_source_rows() {
        let s = extract_extremes(&toy(), ExtremeRule::TopK(2)).unwrap();
        let s = s.with_labels(&[Label::Noise, Label::Signal, Label::Noise]).unwrap();
        assert_eq!(s.labels, Some(vec![Label::Signal, Label::Noise]));
    }

    fn point_cloud() -> impl Strategy<Value = Vec<Vec<f64>>> {
        prop::collection::vec(prop::collection::vec(0.01f64..100.0, 3), 2..40)
    }

    proptest! {
        #[test]
        fn angles_are_unit_and_radii_exceed_threshold(data in point_cloud(), k in 1usize..40) {
            let k = k.min(data.len());
            let s = extract_extremes(&data, ExtremeRule::TopK(k)).unwrap();
            prop_assert_eq!(s.len(), k);
            for (a, r) in s.angles.iter().zip(&s.radii) {
                prop_assert!((linalg::norm(a) - 1.0).abs() <= 1e-12);
                prop_assert!(*r >= s.threshold);
            }
        }

        #[test]
        fn scale_equivariance(data in point_cloud(), c in 0.01f64..1e3, k in 1usize..40) {
            let k = k.min(data.len());
            let scaled: Vec<Vec<f64>> = data.iter().map(|x| x.iter().map(|v| v * c).collect()).collect();
            let a = extract_extremes(&data, ExtremeRule::TopK(k)).unwrap();
            let b = extract_extremes(&scaled, ExtremeRule::TopK(k)).unwrap();
            prop_assert_eq!(&a.source_indices, &b.source_indices);
            for (x, y) in a.angles.iter().zip(&b.angles) {
                prop_assert!(linalg::dist(x, y) <= 1e-12);
            }
        }

        #[test]
        fn top_all_matches_threshold_below_min(data in point_cloud()) {
            let n = data.len();
            let all = extract_extremes(&data, ExtremeRule::TopK(n)).unwrap();
            let u = all.radii.iter().cloned().fold(f64::INFINITY, f64::min) * (1.0 - 1e-9);
            let t = extract_extremes(&data, ExtremeRule::Threshold(u)).unwrap();
            prop_assert_eq!(all.source_indices, t.source_indices);
        }
    }
}

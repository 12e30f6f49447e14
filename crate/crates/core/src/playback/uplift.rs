use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// `w·x + b`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LinearPredictor {
    pub weights: Vec<f64>,
    pub bias: f64,
}

impl LinearPredictor {
    pub fn predict(&self, x: &[f64]) -> f64 {
        self.bias + self.weights.iter().zip(x).map(|(w, v)| w * v).sum::<f64>()
    }
}

/// Treatment/control outcome predictors plus uplift thresholds `thr_1 < … < thr_{n-1}`,
/// giving `n` buckets.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct UpliftPortraitModel {
    pub treatment: LinearPredictor,
    pub control: LinearPredictor,
    pub thresholds: Vec<f64>,
}

impl UpliftPortraitModel {
    pub fn new(
        treatment: LinearPredictor,
        control: LinearPredictor,
        thresholds: Vec<f64>,
    ) -> Result<Self> {
        if thresholds.windows(2).any(|w| !(w[1] > w[0])) {
            return Err(Error::param("uplift thresholds must be strictly increasing"));
        }
        Ok(Self {
            treatment,
            control,
            thresholds,
        })
    }

    pub fn uplift(&self, features: &[f64]) -> f64 {
        self.treatment.predict(features) - self.control.predict(features)
    }

    pub fn bucket_count(&self) -> usize {
        self.thresholds.len() + 1
    }
}

/// Zero-based bucket: 0 when `uplift ≤ thr_1`, `j` when
/// `thr_j < uplift ≤ thr_{j+1}`, last bucket above the last threshold.
pub fn uplift_bucket(features: &[f64], model: &UpliftPortraitModel) -> usize {
    let u = model.uplift(features);
    model.thresholds.partition_point(|thr| u > *thr)
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn model(thresholds: Vec<f64>) -> UpliftPortraitModel {
        UpliftPortraitModel::new(
            LinearPredictor { weights: vec![2.0, -1.0], bias: 0.5 },
            LinearPredictor { weights: vec![1.0, 0.5], bias: 0.5 },
            thresholds,
        )
        .unwrap()
    }

    #[test]
    fn equal_outcomes_land_in_first_bucket() {
        let m = UpliftPortraitModel::new(
            LinearPredictor { weights: vec![1.0], bias: 0.0 },
            LinearPredictor { weights: vec![1.0], bias: 0.0 },
            vec![0.0, 1.0],
        )
        .unwrap();
        assert_eq!(uplift_bucket(&[3.0], &m), 0);
    }

    #[test]
    fn boundary_is_inclusive_upper() {
        let m = model(vec![1.0, 2.0]);
        // uplift = x0 − 1.5·x1
        assert_eq!(uplift_bucket(&[1.0, 0.0], &m), 0);
        assert_eq!(uplift_bucket(&[1.0 + 1e-9, 0.0], &m), 1);
        assert_eq!(uplift_bucket(&[2.0, 0.0], &m), 1);
        assert_eq!(uplift_bucket(&[5.0, 0.0], &m), 2);
    }

    #[test]
    fn thresholds_must_increase() {
        assert!(UpliftPortraitModel::new(
            LinearPredictor { weights: vec![], bias: 0.0 },
            LinearPredictor { weights: vec![], bias: 0.0 },
            vec![1.0, 1.0]
        )
        .is_err());
    }

    #[test]
    fn matches_threshold_scan() {
        let m = model(vec![-1.0, 0.0, 0.5, 2.0]);
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        for _ in 0..1000 {
            let x = [rng.random_range(-3.0..3.0), rng.random_range(-3.0..3.0)];
            let u = 2.0 * x[0] - x[1] + 0.5 - (x[0] + 0.5 * x[1] + 0.5);
            let mut oracle = m.thresholds.len();
            for (j, thr) in m.thresholds.iter().enumerate() {
                if u <= *thr {
                    oracle = j;
                    break;
                }
            }
            assert_eq!(uplift_bucket(&x, &m), oracle);
        }
    }
}

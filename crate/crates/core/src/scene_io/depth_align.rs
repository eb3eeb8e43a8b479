//! Least-squares scale/shift alignment of predicted depths against sparse
//! reference depths. Applied depth is `scale * D + shift`.

use crate::error::{Error, Result};

pub fn align_depth_scale_shift(predicted: &[f64], reference: &[f64]) -> Result<(f64, f64)> {
    if predicted.len() != reference.len() {
        return Err(Error::DimensionMismatch(format!(
            "{} predicted vs {} reference samples",
            predicted.len(),
            reference.len()
        )));
    }
    let n = predicted.len();
    if n < 2 {
        return Err(Error::DegenerateFit(format!(
            "need at least 2 samples, got {n}"
        )));
    }
    // Normal equations for argmin sum (s*p + b - r)^2.
    let nf = n as f64;
    let sum_p: f64 = predicted.iter().sum();
    let sum_r: f64 = reference.iter().sum();
    let sum_pp: f64 = predicted.iter().map(|p| p * p).sum();
    let sum_pr: f64 = predicted.iter().zip(reference).map(|(p, r)| p * r).sum();
    let det = nf * sum_pp - sum_p * sum_p;
    // det = n^2 * variance(p); zero variance means all predictions equal.
    if det.abs() <= f64::EPSILON * nf * sum_pp.max(1.0) {
        return Err(Error::DegenerateFit(
            "predicted depths have zero variance".into(),
        ));
    }
    let scale = (nf * sum_pr - sum_p * sum_r) / det;
    let shift = (sum_r - scale * sum_p) / nf;
    Ok((scale, shift))
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use rand::prelude::*;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn identity_fit() {
        let p = vec![1.0, 2.0, 3.5, 9.0];
        let (s, b) = align_depth_scale_shift(&p, &p).unwrap();
        assert_relative_eq!(s, 1.0, epsilon = 1e-12);
        assert_relative_eq!(b, 0.0, epsilon = 1e-12);
    }

    #[test]
    fn exact_affine_fit() {
        let p = vec![0.5, 1.0, 2.0, 4.0, 8.0];
        let r: Vec<f64> = p.iter().map(|v| 2.0 * v + 3.0).collect();
        let (s, b) = align_depth_scale_shift(&p, &r).unwrap();
        assert_relative_eq!(s, 2.0, epsilon = 1e-9);
        assert_relative_eq!(b, 3.0, epsilon = 1e-9);
    }

    #[test]
    fn noisy_data_matches_normal_equation_oracle() {
        let mut rng = ChaCha8Rng::seed_from_u64(21);
        let p: Vec<f64> = (0..200).map(|_| rng.random_range(0.5..10.0)).collect();
        let r: Vec<f64> = p
            .iter()
            .map(|v| 1.7 * v - 0.4 + rng.random_range(-0.05..0.05))
            .collect();
        let (s, b) = align_depth_scale_shift(&p, &r).unwrap();

        // Independent oracle: solve the 2x2 normal system with nalgebra.
        let n = p.len() as f64;
        let a = nalgebra::Matrix2::new(
            p.iter().map(|v| v * v).sum::<f64>(),
            p.iter().sum::<f64>(),
            p.iter().sum::<f64>(),
            n,
        );
        let rhs = nalgebra::Vector2::new(
            p.iter().zip(&r).map(|(x, y)| x * y).sum::<f64>(),
            r.iter().sum::<f64>(),
        );
        let sol = a.try_inverse().unwrap() * rhs;
        assert_relative_eq!(s, sol[0], epsilon = 1e-9);
        assert_relative_eq!(b, sol[1], epsilon = 1e-9);
    }

    #[test]
    fn least_squares_optimality_spot_check() {
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        let p: Vec<f64> = (0..50).map(|_| rng.random_range(0.5..10.0)).collect();
        let r: Vec<f64> = p
            .iter()
            .map(|v| 0.8 * v + 1.2 + rng.random_range(-0.2..0.2))
            .collect();
        let (s, b) = align_depth_scale_shift(&p, &r).unwrap();
        let residual = |s: f64, b: f64| -> f64 {
            p.iter()
                .zip(&r)
                .map(|(x, y)| (s * x + b - y).powi(2))
                .sum()
        };
        let best = residual(s, b);
        for _ in 0..10_000 {
            let ds = rng.random_range(-0.5..0.5);
            let db = rng.random_range(-0.5..0.5);
            assert!(residual(s + ds, b + db) >= best - 1e-12);
        }
    }

    #[test]
    fn degenerate_inputs_rejected() {
        assert!(align_depth_scale_shift(&[1.0], &[1.0]).is_err());
        assert!(align_depth_scale_shift(&[2.0, 2.0, 2.0], &[1.0, 2.0, 3.0]).is_err());
    }
}

use std::f64::consts::PI;

/// Cosine annealing from `lr_max` at `t = 0` to `lr_min` at `t = total`.
/// Steps past `total` stay at `lr_min`.
pub fn cosine_lr(t: usize, total: usize, lr_max: f64, lr_min: f64) -> f64 {
    if total == 0 {
        return lr_max;
    }
    if t == 0 {
        return lr_max;
    }
    if t >= total {
        return lr_min;
    }
    lr_min + 0.5 * (lr_max - lr_min) * (1.0 + (PI * t as f64 / total as f64).cos())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn endpoints_and_midpoint() {
        assert_eq!(cosine_lr(0, 100, 0.01, 0.001), 0.01);
        assert_eq!(cosine_lr(100, 100, 0.01, 0.001), 0.001);
        assert!((cosine_lr(50, 100, 0.01, 0.001) - 0.0055).abs() < 1e-15);
        assert_eq!(cosine_lr(150, 100, 0.01, 0.001), 0.001);
    }

    #[test]
    fn monotone_decreasing() {
        let v: Vec<f64> = (0..=40).map(|t| cosine_lr(t, 40, 1.0, 0.0)).collect();
        assert!(v.windows(2).all(|w| w[1] <= w[0]));
    }
}

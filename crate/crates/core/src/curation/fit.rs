use std::f64::consts::PI;

use super::CurationError;
use crate::geometry::{normalize_angle, Box3D, Vec3};

/// Median of a non-empty sample; mean of the two middle values for even sizes.
pub fn median(values: &[f64]) -> f64 {
    let mut v = values.to_vec();
    v.sort_by(f64::total_cmp);
    let n = v.len();
    if n % 2 == 1 {
        v[n / 2]
    } else {
        (v[n / 2 - 1] + v[n / 2]) / 2.0
    }
}

fn angular_distance(a: f64, b: f64) -> f64 {
    normalize_angle(a - b).abs()
}

/// Member angle minimizing the summed angular distance to all members.
/// Ties go to the smallest angle in (-π, π].
pub fn circular_median(angles: &[f64]) -> f64 {
    let candidates: Vec<f64> = angles.iter().map(|a| normalize_angle(*a)).collect();
    let mut best = (f64::INFINITY, PI);
    for &c in &candidates {
        let cost: f64 = candidates.iter().map(|&a| angular_distance(a, c)).sum();
        if cost < best.0 || (cost == best.0 && c < best.1) {
            best = (cost, c);
        }
    }
    best.1
}

/// One box per cluster: coordinatewise medians of centers and dims, circular
/// median of yaws.
pub fn fit_instance_box(cluster: &[Box3D]) -> Result<Box3D, CurationError> {
    if cluster.is_empty() {
        return Err(CurationError::EmptyCluster);
    }
    let coord = |f: &dyn Fn(&Box3D) -> f64| median(&cluster.iter().map(f).collect::<Vec<_>>());
    let center = Vec3::new(coord(&|b| b.center.x), coord(&|b| b.center.y), coord(&|b| b.center.z));
    let dims = Vec3::new(coord(&|b| b.dims.x), coord(&|b| b.dims.y), coord(&|b| b.dims.z));
    let yaw = circular_median(&cluster.iter().map(|b| b.yaw).collect::<Vec<_>>());
    Ok(Box3D::new(center, dims, yaw)?)
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::Rng;

    fn b(x: f64, yaw: f64) -> Box3D {
        Box3D::new(Vec3::new(x, 0.0, 0.0), Vec3::new(1.0, 1.0, 2.0), yaw).unwrap()
    }

    #[test]
    fn single_box_is_itself() {
        let one = Box3D::new(Vec3::new(1.0, 2.0, 3.0), Vec3::new(0.5, 0.6, 0.7), 0.4).unwrap();
        assert_eq!(fit_instance_box(&[one]).unwrap(), one);
    }

    #[test]
    fn median_resists_outlier() {
        let f = fit_instance_box(&[b(0.0, 0.0), b(1.0, 0.0), b(100.0, 0.0)]).unwrap();
        assert_eq!(f.center.x, 1.0);
    }

    #[test]
    fn empty_cluster_errors() {
        assert!(matches!(fit_instance_box(&[]), Err(CurationError::EmptyCluster)));
    }

    #[test]
    fn circular_median_across_wrap() {
        let d = |x: f64| x.to_radians();
        let m = circular_median(&[d(-170.0), d(180.0), d(170.0)]);
        assert!((m - PI).abs() < 1e-12);
    }

    #[test]
    fn circular_median_matches_exhaustive_scan() {
        let mut rng = crate::seed::rng(21);
        for _ in 0..200 {
            let n = rng.random_range(1..9);
            let center = rng.random_range(-PI..PI);
            let yaws: Vec<f64> = (0..n).map(|_| center + rng.random_range(-1.0..1.0)).collect();
            // exhaustive scan over member angles
            let cost = |c: f64| yaws.iter().map(|&a| normalize_angle(a - c).abs()).sum::<f64>();
            let m = circular_median(&yaws);
            for &y in &yaws {
                assert!(cost(m) <= cost(y) + 1e-12);
            }
        }
    }

    #[test]
    fn even_median_averages() {
        assert_eq!(median(&[4.0, 1.0, 3.0, 2.0]), 2.5);
        assert_eq!(median(&[2.0]), 2.0);
    }

    #[test]
    fn duplicating_the_median_member_is_stable() {
        let mut rng = crate::seed::rng(4);
        for _ in 0..100 {
            let n = 2 * rng.random_range(0..5) + 1;
            let boxes: Vec<Box3D> = (0..n)
                .map(|_| {
                    Box3D::new(
                        Vec3::new(rng.random_range(-5.0..5.0), rng.random_range(-5.0..5.0), rng.random_range(0.0..2.0)),
                        Vec3::new(rng.random_range(0.2..2.0), rng.random_range(0.2..2.0), rng.random_range(0.2..2.0)),
                        rng.random_range(-0.5..0.5),
                    )
                    .unwrap()
                })
                .collect();
            let fit = fit_instance_box(&boxes).unwrap();
            // duplicate the member whose x is the median x; x stays fixed
            let k = boxes.iter().position(|bx| bx.center.x == fit.center.x).unwrap();
            let mut more = boxes.clone();
            more.push(boxes[k]);
            assert_eq!(fit_instance_box(&more).unwrap().center.x, fit.center.x);
        }
    }
}

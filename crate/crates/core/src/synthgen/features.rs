use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::curation::Weather;
use crate::geometry::{Pose, Vec3};
use crate::seed;

/// How scene conditions perturb the synthetic representation.
///
/// Magnitudes are relative to the unit-norm instance base vector. Weather
/// adds a fixed direction per weather label; viewpoint adds
/// `cos θ · e₁ + sin θ · e₂` for the ground-plane bearing `θ` of the camera
/// seen from the object; noise is isotropic with total norm about `sigma`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ConditionModel {
    pub dim: usize,
    pub weather_shift: f64,
    pub viewpoint_scale: f64,
    pub sigma: f64,
    /// Set from the dataset seed when generated through [`super::gen_dataset`].
    #[serde(skip)]
    pub seed: u64,
}

impl Default for ConditionModel {
    fn default() -> Self {
        Self { dim: 768, weather_shift: 3.0, viewpoint_scale: 1.5, sigma: 0.05, seed: 0 }
    }
}

impl ConditionModel {
    /// No condition effects and no noise.
    pub fn clean(dim: usize, seed: u64) -> Self {
        Self { dim, weather_shift: 0.0, viewpoint_scale: 0.0, sigma: 0.0, seed }
    }

    fn unit(&self, stream: u64) -> Vec<f64> {
        let mut rng = seed::rng(seed::derive(self.seed, stream));
        let v: Vec<f64> = (0..self.dim).map(|_| StandardNormal.sample(&mut rng)).collect();
        let n = v.iter().map(|x| x * x).sum::<f64>().sqrt();
        v.into_iter().map(|x| x / n).collect()
    }

    /// Unit base vector of an instance.
    pub fn base(&self, instance_id: u64) -> Vec<f64> {
        self.unit(seed::derive(seed::label("base"), instance_id))
    }

    pub fn weather_direction(&self, w: Weather) -> Vec<f64> {
        self.unit(seed::derive(seed::label("weather"), w.index() as u64))
    }

    fn view_axes(&self) -> (Vec<f64>, Vec<f64>) {
        (self.unit(seed::label("view-cos")), self.unit(seed::label("view-sin")))
    }
}

/// Synthetic representation of one observation.
pub fn gen_feature(
    instance_id: u64,
    cam_pose: &Pose,
    object_center: &Vec3,
    weather: Weather,
    model: &ConditionModel,
    noise_seed: u64,
) -> Vec<f64> {
    let mut h = model.base(instance_id);
    if model.weather_shift != 0.0 {
        for (x, d) in h.iter_mut().zip(model.weather_direction(weather)) {
            *x += model.weather_shift * d;
        }
    }
    if model.viewpoint_scale != 0.0 {
        let ray = cam_pose.translation - object_center;
        let th = ray.y.atan2(ray.x);
        let (e1, e2) = model.view_axes();
        for ((x, a), b) in h.iter_mut().zip(e1).zip(e2) {
            *x += model.viewpoint_scale * (th.cos() * a + th.sin() * b);
        }
    }
    if model.sigma > 0.0 {
        let mut rng: ChaCha8Rng = seed::rng(noise_seed);
        let n = Normal::new(0.0, model.sigma / (model.dim as f64).sqrt()).expect("finite sigma");
        for x in h.iter_mut() {
            *x += n.sample(&mut rng);
        }
    }
    h
}

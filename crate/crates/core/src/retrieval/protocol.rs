use serde::{Deserialize, Serialize};

use super::RetrievalError;
use crate::curation::Weather;
use crate::geometry::{self, Pose, Vec3};

/// Everything the protocol needs to know about one observation.
#[derive(Debug, Clone, PartialEq)]
pub struct EvalItem {
    pub obs_id: u64,
    pub embedding: Vec<f64>,
    pub instance_id: u64,
    pub class_name: String,
    pub sequence_id: String,
    pub weather: Weather,
    pub cam_pose: Pose,
    pub object_center: Vec3,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SimilarityMode {
    Cosine,
    Euclidean,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Illumination {
    Similar,
    Different,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum IlluminationFilter {
    All,
    Similar,
    Different,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ViewpointGrade {
    Easy,
    Medium,
    Hard,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ViewpointFilter {
    All,
    Easy,
    Medium,
    Hard,
}

/// How the two hard thresholds combine.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum HardRule {
    /// Hard when either threshold is exceeded.
    Disjunctive,
    /// Hard only when both are exceeded.
    Conjunctive,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct EvalConfig {
    pub similarity: SimilarityMode,
    pub illumination: IlluminationFilter,
    pub viewpoint: ViewpointFilter,
    pub top_k: Vec<usize>,
    pub cmc_max_k: usize,
    pub hard_rule: HardRule,
}

impl Default for EvalConfig {
    fn default() -> Self {
        Self {
            similarity: SimilarityMode::Cosine,
            illumination: IlluminationFilter::All,
            viewpoint: ViewpointFilter::All,
            top_k: vec![1, 5],
            cmc_max_k: 50,
            hard_rule: HardRule::Disjunctive,
        }
    }
}

impl EvalConfig {
    pub fn validate(&self) -> Result<(), RetrievalError> {
        if self.top_k.contains(&0) {
            return Err(RetrievalError::Config("top_k entries must be at least 1".into()));
        }
        if self.cmc_max_k == 0 {
            return Err(RetrievalError::Config("cmc_max_k must be at least 1".into()));
        }
        Ok(())
    }
}

/// Higher is more similar in both modes; euclidean returns `−‖a−b‖`.
pub fn similarity(a: &[f64], b: &[f64], mode: SimilarityMode) -> Result<f64, RetrievalError> {
    if a.len() != b.len() {
        return Err(RetrievalError::DimMismatch(a.len(), b.len()));
    }
    match mode {
        SimilarityMode::Cosine => {
            let na = a.iter().map(|v| v * v).sum::<f64>().sqrt();
            let nb = b.iter().map(|v| v * v).sum::<f64>().sqrt();
            if na == 0.0 || nb == 0.0 {
                return Err(RetrievalError::ZeroVector);
            }
            Ok(a.iter().zip(b).map(|(x, y)| x * y).sum::<f64>() / (na * nb))
        }
        SimilarityMode::Euclidean => Ok(-a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum::<f64>().sqrt()),
    }
}

pub fn illumination_mode(q: &EvalItem, r: &EvalItem) -> Illumination {
    if q.weather == r.weather {
        Illumination::Similar
    } else {
        Illumination::Different
    }
}

/// Viewpoint difficulty from the distance difference (m) and ray angle (deg).
pub fn viewpoint_grade(delta_d: f64, alpha_deg: f64, rule: HardRule) -> ViewpointGrade {
    if delta_d <= 10.0 && alpha_deg <= 15.0 {
        return ViewpointGrade::Easy;
    }
    let hard = match rule {
        HardRule::Disjunctive => delta_d > 30.0 || alpha_deg > 90.0,
        HardRule::Conjunctive => delta_d > 30.0 && alpha_deg > 90.0,
    };
    if hard {
        ViewpointGrade::Hard
    } else {
        ViewpointGrade::Medium
    }
}

/// Indices into the pool.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct RetrievalSet {
    pub members: Vec<usize>,
    pub positives: Vec<usize>,
}

fn illumination_ok(q: &EvalItem, r: &EvalItem, f: IlluminationFilter) -> bool {
    match f {
        IlluminationFilter::All => true,
        IlluminationFilter::Similar => illumination_mode(q, r) == Illumination::Similar,
        IlluminationFilter::Different => illumination_mode(q, r) == Illumination::Different,
    }
}

fn viewpoint_ok(q: &EvalItem, r: &EvalItem, f: ViewpointFilter, rule: HardRule) -> bool {
    let want = match f {
        ViewpointFilter::All => return true,
        ViewpointFilter::Easy => ViewpointGrade::Easy,
        ViewpointFilter::Medium => ViewpointGrade::Medium,
        ViewpointFilter::Hard => ViewpointGrade::Hard,
    };
    match geometry::viewpoint_delta(&q.cam_pose, &r.cam_pose, &q.object_center) {
        Ok((dd, alpha)) => viewpoint_grade(dd, alpha, rule) == want,
        Err(e) => {
            log::debug!("observation {} dropped from viewpoint cell: {e}", r.obs_id);
            false
        }
    }
}

/// Retrieval set and positives for one query. The query itself is skipped if
/// present in the pool.
pub fn build_retrieval_set(query: &EvalItem, pool: &[EvalItem], cfg: &EvalConfig) -> RetrievalSet {
    let mut set = RetrievalSet::default();
    for (i, r) in pool.iter().enumerate() {
        if r.obs_id == query.obs_id || r.class_name != query.class_name {
            continue;
        }
        if r.instance_id == query.instance_id {
            if r.sequence_id == query.sequence_id
                || !illumination_ok(query, r, cfg.illumination)
                || !viewpoint_ok(query, r, cfg.viewpoint, cfg.hard_rule)
            {
                continue;
            }
            set.positives.push(i);
        }
        set.members.push(i);
    }
    set
}

#[cfg(test)]
pub(crate) mod tests {
    use super::*;
    use crate::seed;
    use rand::Rng;

    pub(crate) fn random_pool(n: usize, instances: u64, dim: usize, seed_: u64) -> Vec<EvalItem> {
        let mut rng = seed::rng(seed_);
        let centers: Vec<Vec3> = (0..instances)
            .map(|_| Vec3::new(rng.random_range(-40.0..40.0), rng.random_range(-40.0..40.0), 0.0))
            .collect();
        (0..n)
            .map(|i| {
                let inst = rng.random_range(0..instances);
                let cam = Vec3::new(rng.random_range(-60.0..60.0), rng.random_range(-60.0..60.0), 1.5);
                EvalItem {
                    obs_id: 1000 + i as u64,
                    embedding: (0..dim).map(|_| rng.random_range(-1.0..1.0)).collect(),
                    instance_id: inst,
                    class_name: if inst % 3 == 0 { "pole".into() } else { "tree".into() },
                    sequence_id: format!("seq{}", rng.random_range(0..4)),
                    weather: Weather::ALL[rng.random_range(0..4)],
                    cam_pose: Pose::from_translation(cam),
                    object_center: centers[inst as usize],
                }
            })
            .collect()
    }

    fn item(obs: u64, inst: u64, seq: &str, w: Weather) -> EvalItem {
        EvalItem {
            obs_id: obs,
            embedding: vec![1.0, 0.0],
            instance_id: inst,
            class_name: "tree".into(),
            sequence_id: seq.into(),
            weather: w,
            cam_pose: Pose::from_translation(Vec3::new(obs as f64, 5.0, 0.0)),
            object_center: Vec3::zeros(),
        }
    }

    #[test]
    fn similarity_examples() {
        let a = [0.6, 0.8];
        assert!((similarity(&a, &a, SimilarityMode::Cosine).unwrap() - 1.0).abs() < 1e-15);
        assert_eq!(similarity(&[1.0, 0.0], &[0.0, 1.0], SimilarityMode::Cosine).unwrap(), 0.0);
        assert_eq!(similarity(&a, &a, SimilarityMode::Euclidean).unwrap(), 0.0);
        assert!(similarity(&a, &[1.0, 1.0], SimilarityMode::Euclidean).unwrap() < 0.0);
        assert_eq!(similarity(&[0.0, 0.0], &a, SimilarityMode::Cosine), Err(RetrievalError::ZeroVector));
        assert!(similarity(&a, &[1.0], SimilarityMode::Cosine).is_err());
    }

    #[test]
    fn illumination_examples() {
        let q = item(1, 0, "a", Weather::Sunny);
        assert_eq!(illumination_mode(&q, &item(2, 0, "b", Weather::Sunny)), Illumination::Similar);
        assert_eq!(illumination_mode(&q, &item(2, 0, "b", Weather::Dark)), Illumination::Different);
        let r = item(3, 0, "b", Weather::Rainy);
        assert_eq!(illumination_mode(&r, &item(2, 0, "b", Weather::Cloudy)), Illumination::Different);
    }

    #[test]
    fn grade_boundaries() {
        let d = HardRule::Disjunctive;
        assert_eq!(viewpoint_grade(8.0, 10.0, d), ViewpointGrade::Easy);
        assert_eq!(viewpoint_grade(25.0, 60.0, d), ViewpointGrade::Medium);
        assert_eq!(viewpoint_grade(35.0, 5.0, d), ViewpointGrade::Hard);
        assert_eq!(viewpoint_grade(10.0, 15.0, d), ViewpointGrade::Easy);
        assert_eq!(viewpoint_grade(30.0, 90.0, d), ViewpointGrade::Medium);
        assert_eq!(viewpoint_grade(30.001, 90.0, d), ViewpointGrade::Hard);
        assert_eq!(viewpoint_grade(35.0, 5.0, HardRule::Conjunctive), ViewpointGrade::Medium);
        assert_eq!(viewpoint_grade(35.0, 95.0, HardRule::Conjunctive), ViewpointGrade::Hard);
    }

    #[test]
    fn same_sequence_positive_excluded_negatives_kept() {
        let q = item(1, 0, "a", Weather::Sunny);
        let pool = vec![
            item(2, 0, "a", Weather::Sunny),
            item(3, 0, "b", Weather::Sunny),
            item(4, 1, "a", Weather::Dark),
            item(5, 1, "c", Weather::Rainy),
        ];
        let set = build_retrieval_set(&q, &pool, &EvalConfig::default());
        assert_eq!(set.members, vec![1, 2, 3]);
        assert_eq!(set.positives, vec![1]);
        let cfg = EvalConfig { illumination: IlluminationFilter::Different, ..Default::default() };
        let set = build_retrieval_set(&q, &pool, &cfg);
        assert_eq!(set.members, vec![2, 3]);
        assert!(set.positives.is_empty());
    }

    /// Straight transcription of the membership predicate.
    pub(crate) fn oracle_member(q: &EvalItem, r: &EvalItem, cfg: &EvalConfig) -> (bool, bool) {
        if r.obs_id == q.obs_id || r.class_name != q.class_name {
            return (false, false);
        }
        if r.instance_id != q.instance_id {
            return (true, false);
        }
        let same_seq = r.sequence_id == q.sequence_id;
        let same_w = r.weather == q.weather;
        let illum = match cfg.illumination {
            IlluminationFilter::All => true,
            IlluminationFilter::Similar => same_w,
            IlluminationFilter::Different => !same_w,
        };
        let a = q.cam_pose.translation - q.object_center;
        let b = r.cam_pose.translation - q.object_center;
        let dd = (a.norm() - b.norm()).abs();
        let alpha = (a.dot(&b) / (a.norm() * b.norm())).clamp(-1.0, 1.0).acos().to_degrees();
        let easy = dd <= 10.0 && alpha <= 15.0;
        let hard = !easy && (dd > 30.0 || alpha > 90.0);
        let view = match cfg.viewpoint {
            ViewpointFilter::All => true,
            ViewpointFilter::Easy => easy,
            ViewpointFilter::Medium => !easy && !hard,
            ViewpointFilter::Hard => hard,
        };
        let keep = !same_seq && illum && view;
        (keep, keep)
    }

    #[test]
    fn matches_predicate_oracle() {
        let pool = random_pool(100, 12, 4, 7);
        for illumination in [IlluminationFilter::All, IlluminationFilter::Similar, IlluminationFilter::Different] {
            for viewpoint in
                [ViewpointFilter::All, ViewpointFilter::Easy, ViewpointFilter::Medium, ViewpointFilter::Hard]
            {
                let cfg = EvalConfig { illumination, viewpoint, ..Default::default() };
                for q in &pool {
                    let set = build_retrieval_set(q, &pool, &cfg);
                    let mut members = Vec::new();
                    let mut positives = Vec::new();
                    for (i, r) in pool.iter().enumerate() {
                        let (m, p) = oracle_member(q, r, &cfg);
                        if m {
                            members.push(i);
                        }
                        if p {
                            positives.push(i);
                        }
                    }
                    assert_eq!(set.members, members);
                    assert_eq!(set.positives, positives);
                }
            }
        }
    }

    #[test]
    fn unfiltered_set_removes_only_same_sequence_positives() {
        let pool = random_pool(100, 10, 4, 8);
        let cfg = EvalConfig::default();
        for q in &pool {
            let set = build_retrieval_set(q, &pool, &cfg);
            let dropped: Vec<&EvalItem> = pool
                .iter()
                .enumerate()
                .filter(|(i, r)| r.obs_id != q.obs_id && r.class_name == q.class_name && !set.members.contains(i))
                .map(|(_, r)| r)
                .collect();
            assert!(dropped.iter().all(|r| r.instance_id == q.instance_id && r.sequence_id == q.sequence_id));
        }
    }
}

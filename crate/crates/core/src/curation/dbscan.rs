use std::collections::{BTreeMap, HashMap, VecDeque};

use serde::{Deserialize, Serialize};

use super::{CurationError, GlobalBox};
use crate::geometry::Vec3;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct DbscanParams {
    /// Neighborhood radius in meters.
    pub eps: f64,
    /// Minimum neighborhood size (self-inclusive) for a core point.
    pub min_pts: usize,
}

impl Default for DbscanParams {
    fn default() -> Self {
        Self { eps: 1.0, min_pts: 3 }
    }
}

impl DbscanParams {
    pub fn validate(&self) -> Result<(), CurationError> {
        if !(self.eps > 0.0 && self.eps.is_finite()) {
            return Err(CurationError::InvalidParams(format!("eps must be positive, got {}", self.eps)));
        }
        if self.min_pts == 0 {
            return Err(CurationError::InvalidParams("min_pts must be at least 1".into()));
        }
        Ok(())
    }
}

/// Members are indices into the input slice, ascending.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Cluster {
    pub class_name: String,
    pub members: Vec<usize>,
}

type Cell = (i64, i64, i64);

struct Grid<'a> {
    points: &'a [Vec3],
    eps: f64,
    cells: HashMap<Cell, Vec<usize>>,
}

impl<'a> Grid<'a> {
    fn new(points: &'a [Vec3], eps: f64) -> Self {
        let mut cells: HashMap<Cell, Vec<usize>> = HashMap::new();
        for (i, p) in points.iter().enumerate() {
            cells.entry(Self::cell(p, eps)).or_default().push(i);
        }
        Self { points, eps, cells }
    }

    fn cell(p: &Vec3, eps: f64) -> Cell {
        ((p.x / eps).floor() as i64, (p.y / eps).floor() as i64, (p.z / eps).floor() as i64)
    }

    /// Indices within `eps` of point `i` (self included), ascending.
    fn neighbors(&self, i: usize) -> Vec<usize> {
        let p = &self.points[i];
        let (cx, cy, cz) = Self::cell(p, self.eps);
        let eps2 = self.eps * self.eps;
        let mut out = Vec::new();
        for dx in -1..=1 {
            for dy in -1..=1 {
                for dz in -1..=1 {
                    if let Some(ids) = self.cells.get(&(cx + dx, cy + dy, cz + dz)) {
                        out.extend(ids.iter().copied().filter(|&j| (self.points[j] - p).norm_squared() <= eps2));
                    }
                }
            }
        }
        out.sort_unstable();
        out
    }
}

/// DBSCAN over 3D points. Returns a cluster label per point (`None` = noise).
///
/// Core points have at least `min_pts` points (self included) within `eps`.
/// Clusters are the connected components of core points; a border point joins
/// the cluster of its nearest core neighbor (lowest index on exact ties), which
/// makes the partition independent of input order. Labels are numbered by
/// smallest member index.
pub fn dbscan(points: &[Vec3], params: &DbscanParams) -> Result<Vec<Option<usize>>, CurationError> {
    params.validate()?;
    if points.iter().any(|p| !p.iter().all(|c| c.is_finite())) {
        return Err(CurationError::InvalidParams("non-finite point".into()));
    }
    let grid = Grid::new(points, params.eps);
    let neighbors: Vec<Vec<usize>> = (0..points.len()).map(|i| grid.neighbors(i)).collect();
    let core: Vec<bool> = neighbors.iter().map(|n| n.len() >= params.min_pts).collect();

    let mut label: Vec<Option<usize>> = vec![None; points.len()];
    let mut next = 0;
    for seed in 0..points.len() {
        if !core[seed] || label[seed].is_some() {
            continue;
        }
        label[seed] = Some(next);
        let mut queue = VecDeque::from([seed]);
        while let Some(i) = queue.pop_front() {
            for &j in &neighbors[i] {
                if core[j] && label[j].is_none() {
                    label[j] = Some(next);
                    queue.push_back(j);
                }
            }
        }
        next += 1;
    }

    for i in 0..points.len() {
        if core[i] {
            continue;
        }
        let nearest = neighbors[i]
            .iter()
            .filter(|&&j| core[j])
            .map(|&j| ((points[j] - points[i]).norm_squared(), j))
            .min_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)));
        label[i] = nearest.and_then(|(_, j)| label[j]);
    }

    // renumber by smallest member index
    let mut remap: HashMap<usize, usize> = HashMap::new();
    for l in label.iter_mut().flatten() {
        let n = remap.len();
        *l = *remap.entry(*l).or_insert(n);
    }
    Ok(label)
}

/// Cluster box centers per semantic class. Clusters are returned sorted by
/// their smallest member index into `boxes`; noise boxes are dropped.
pub fn cluster_instances(boxes: &[GlobalBox], params: &DbscanParams) -> Result<Vec<Cluster>, CurationError> {
    params.validate()?;
    let mut by_class: BTreeMap<&str, Vec<usize>> = BTreeMap::new();
    for (i, b) in boxes.iter().enumerate() {
        by_class.entry(b.class_name.as_str()).or_default().push(i);
    }
    let mut clusters = Vec::new();
    for (class_name, idx) in by_class {
        let centers: Vec<Vec3> = idx.iter().map(|&i| boxes[i].bbox.center).collect();
        let labels = dbscan(&centers, params)?;
        let n = labels.iter().flatten().max().map_or(0, |m| m + 1);
        let mut members = vec![Vec::new(); n];
        for (k, l) in labels.iter().enumerate() {
            if let Some(l) = l {
                members[*l].push(idx[k]);
            }
        }
        clusters.extend(members.into_iter().map(|m| Cluster { class_name: class_name.to_string(), members: m }));
    }
    clusters.sort_by_key(|c| c.members[0]);
    Ok(clusters)
}

#[cfg(test)]
pub(crate) mod tests {
    use super::*;
    use crate::geometry::Box3D;
    use rand::seq::SliceRandom;
    use rand::Rng;
    use std::collections::BTreeSet;

    /// O(n²) reference: distance matrix, union-find over core pairs, border
    /// points to their nearest core.
    pub(crate) fn naive_dbscan(points: &[Vec3], eps: f64, min_pts: usize) -> Vec<Option<usize>> {
        let n = points.len();
        let near = |i: usize, j: usize| (points[i] - points[j]).norm_squared() <= eps * eps;
        let core: Vec<bool> = (0..n).map(|i| (0..n).filter(|&j| near(i, j)).count() >= min_pts).collect();
        let mut parent: Vec<usize> = (0..n).collect();
        fn find(p: &mut [usize], x: usize) -> usize {
            let mut r = x;
            while p[r] != r {
                r = p[r];
            }
            p[x] = r;
            r
        }
        for i in 0..n {
            for j in 0..n {
                if core[i] && core[j] && near(i, j) {
                    let (a, b) = (find(&mut parent, i), find(&mut parent, j));
                    parent[a.max(b)] = a.min(b);
                }
            }
        }
        let mut root: Vec<Option<usize>> = (0..n).map(|i| core[i].then(|| find(&mut parent, i))).collect();
        for i in 0..n {
            if core[i] {
                continue;
            }
            let mut best: Option<(f64, usize)> = None;
            for j in 0..n {
                if core[j] && near(i, j) {
                    let d = (points[j] - points[i]).norm_squared();
                    if best.is_none_or(|(bd, bj)| d < bd || (d == bd && j < bj)) {
                        best = Some((d, j));
                    }
                }
            }
            root[i] = best.map(|(_, j)| find(&mut parent, j));
        }
        root
    }

    /// Partition as a set of member sets.
    pub(crate) fn partition(labels: &[Option<usize>]) -> BTreeSet<BTreeSet<usize>> {
        let mut m: BTreeMap<usize, BTreeSet<usize>> = BTreeMap::new();
        for (i, l) in labels.iter().enumerate() {
            if let Some(l) = l {
                m.entry(*l).or_default().insert(i);
            }
        }
        m.into_values().collect()
    }

    fn gbox(class: &str, c: Vec3) -> GlobalBox {
        GlobalBox {
            bbox: Box3D::new(c, Vec3::new(1.0, 1.0, 1.0), 0.0).unwrap(),
            class_name: class.into(),
            sequence_id: "s".into(),
            frame_id: 0,
            timestamp: 0.0,
        }
    }

    #[test]
    fn close_pair_is_one_cluster() {
        let p = DbscanParams { eps: 0.5, min_pts: 1 };
        let c = cluster_instances(&[gbox("t", Vec3::zeros()), gbox("t", Vec3::new(0.1, 0.0, 0.0))], &p).unwrap();
        assert_eq!(c.len(), 1);
        assert_eq!(c[0].members, vec![0, 1]);
    }

    #[test]
    fn far_pair_is_two_clusters() {
        let p = DbscanParams { eps: 0.5, min_pts: 1 };
        let c = cluster_instances(&[gbox("t", Vec3::zeros()), gbox("t", Vec3::new(10.0, 0.0, 0.0))], &p).unwrap();
        assert_eq!(c.len(), 2);
    }

    #[test]
    fn classes_cluster_separately() {
        let p = DbscanParams { eps: 0.5, min_pts: 1 };
        let c = cluster_instances(&[gbox("b", Vec3::zeros()), gbox("a", Vec3::zeros()), gbox("b", Vec3::zeros())], &p)
            .unwrap();
        assert_eq!(c.len(), 2);
        assert_eq!((c[0].class_name.as_str(), c[0].members.clone()), ("b", vec![0, 2]));
        assert_eq!((c[1].class_name.as_str(), c[1].members.clone()), ("a", vec![1]));
    }

    #[test]
    fn noise_is_dropped() {
        let p = DbscanParams { eps: 0.5, min_pts: 3 };
        let boxes = [
            gbox("t", Vec3::zeros()),
            gbox("t", Vec3::new(0.1, 0.0, 0.0)),
            gbox("t", Vec3::new(0.2, 0.0, 0.0)),
            gbox("t", Vec3::new(9.0, 0.0, 0.0)),
        ];
        let c = cluster_instances(&boxes, &p).unwrap();
        assert_eq!(c.len(), 1);
        assert_eq!(c[0].members, vec![0, 1, 2]);
    }

    #[test]
    fn bad_params() {
        assert!(dbscan(&[], &DbscanParams { eps: 0.0, min_pts: 1 }).is_err());
        assert!(dbscan(&[], &DbscanParams { eps: 1.0, min_pts: 0 }).is_err());
        assert_eq!(dbscan(&[], &DbscanParams::default()).unwrap(), vec![]);
    }

    #[test]
    fn matches_naive_reference() {
        for seed in 0..50u64 {
            let mut rng = crate::seed::rng(seed);
            let pts: Vec<Vec3> = (0..200)
                .map(|_| {
                    Vec3::new(rng.random_range(0.0..20.0), rng.random_range(0.0..20.0), rng.random_range(0.0..2.0))
                })
                .collect();
            let params = DbscanParams { eps: 1.0, min_pts: 3 };
            let got = dbscan(&pts, &params).unwrap();
            let want = naive_dbscan(&pts, params.eps, params.min_pts);
            assert_eq!(partition(&got), partition(&want), "seed {seed}");
            // noise flags agree too
            assert_eq!(
                got.iter().map(Option::is_none).collect::<Vec<_>>(),
                want.iter().map(Option::is_none).collect::<Vec<_>>()
            );
        }
    }

    #[test]
    fn permutation_invariant() {
        let mut rng = crate::seed::rng(77);
        let pts: Vec<Vec3> =
            (0..150).map(|_| Vec3::new(rng.random_range(0.0..15.0), rng.random_range(0.0..15.0), 0.0)).collect();
        let params = DbscanParams { eps: 1.2, min_pts: 3 };
        let base = dbscan(&pts, &params).unwrap();
        let mut perm: Vec<usize> = (0..pts.len()).collect();
        perm.shuffle(&mut rng);
        let shuffled: Vec<Vec3> = perm.iter().map(|&i| pts[i]).collect();
        let lab = dbscan(&shuffled, &params).unwrap();
        let mut back = vec![None; pts.len()];
        for (k, &i) in perm.iter().enumerate() {
            back[i] = lab[k];
        }
        assert_eq!(partition(&base), partition(&back));
    }
}

//! Density-based hierarchical clustering (HDBSCAN) over cosine distance.
//!
//! The pipeline is the standard one: `1 - cosine` distances, core distances,
//! mutual reachability, minimum spanning tree, single-linkage hierarchy,
//! condensed tree, excess-of-mass flat clustering, and λ-ratio membership.
//!
//! Points are processed in ascending id order regardless of the order the
//! caller passes, so the result depends only on the id → vector mapping.

mod tree;

use std::collections::BTreeMap;
use std::io::Write;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::{similarity_matrix, EmbeddingSet};

pub use tree::{
    core_distances, minimum_spanning_tree, mutual_reachability, CondensedEdge, DistanceMatrix,
    MstEdge, MIN_DISTANCE,
};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct ClusterParams {
    pub min_cluster_size: usize,
    /// Neighbour count for the core distance, not counting the point itself.
    pub min_samples: usize,
    /// Let the root of the condensed tree compete in excess-of-mass selection.
    pub allow_single_cluster: bool,
}

impl ClusterParams {
    pub fn new(min_cluster_size: usize, min_samples: usize) -> Result<Self> {
        let params = Self {
            min_cluster_size,
            min_samples,
            allow_single_cluster: true,
        };
        params.validate()?;
        Ok(params)
    }

    /// `min_cluster_size = max(5, n / 100)`, `min_samples = 5`.
    pub fn default_for(n: usize) -> Self {
        Self {
            min_cluster_size: (n / 100).max(5),
            min_samples: 5,
            allow_single_cluster: true,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.min_cluster_size < 2 {
            return Err(Error::Validation("min_cluster_size must be at least 2".into()));
        }
        if self.min_samples < 1 {
            return Err(Error::Validation("min_samples must be at least 1".into()));
        }
        if self.min_samples > self.min_cluster_size {
            return Err(Error::Validation(format!(
                "min_samples ({}) exceeds min_cluster_size ({})",
                self.min_samples, self.min_cluster_size
            )));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum Assignment {
    Cluster(usize),
    Noise,
}

impl Assignment {
    pub fn cluster(self) -> Option<usize> {
        match self {
            Assignment::Cluster(c) => Some(c),
            Assignment::Noise => None,
        }
    }

    pub fn is_noise(self) -> bool {
        self == Assignment::Noise
    }
}

/// Flat clustering result keyed by document id.
#[derive(Debug, Clone, PartialEq)]
pub struct ClusterModel {
    assignments: BTreeMap<String, Assignment>,
    membership: BTreeMap<String, f64>,
    cluster_sizes: BTreeMap<usize, usize>,
    condensed_tree: Vec<CondensedEdge>,
    /// Point index → id, for reading the condensed tree.
    point_ids: Vec<String>,
    params: Option<ClusterParams>,
}

impl ClusterModel {
    /// Builds a model from explicit assignments, checking its invariants.
    /// Mostly useful for tests and for replaying an external clustering.
    pub fn from_parts(entries: Vec<(String, Assignment, f64)>) -> Result<Self> {
        let mut assignments = BTreeMap::new();
        let mut membership = BTreeMap::new();
        let mut cluster_sizes = BTreeMap::new();
        for (id, a, p) in entries {
            if !(0.0..=1.0).contains(&p) {
                return Err(Error::Validation(format!("membership {p} of {id:?} outside [0,1]")));
            }
            if a.is_noise() && p != 0.0 {
                return Err(Error::Validation(format!("noise point {id:?} has membership {p}")));
            }
            if let Assignment::Cluster(c) = a {
                *cluster_sizes.entry(c).or_insert(0) += 1;
            }
            if assignments.insert(id.clone(), a).is_some() {
                return Err(Error::DuplicateId(id));
            }
            membership.insert(id, p);
        }
        Ok(Self {
            point_ids: assignments.keys().cloned().collect(),
            assignments,
            membership,
            cluster_sizes,
            condensed_tree: Vec::new(),
            params: None,
        })
    }

    pub fn assignment(&self, id: &str) -> Option<Assignment> {
        self.assignments.get(id).copied()
    }

    pub fn membership(&self, id: &str) -> Option<f64> {
        self.membership.get(id).copied()
    }

    pub fn assignments(&self) -> &BTreeMap<String, Assignment> {
        &self.assignments
    }

    pub fn cluster_sizes(&self) -> &BTreeMap<usize, usize> {
        &self.cluster_sizes
    }

    pub fn n_clusters(&self) -> usize {
        self.cluster_sizes.len()
    }

    pub fn noise_count(&self) -> usize {
        self.assignments.values().filter(|a| a.is_noise()).count()
    }

    /// Parameters the model was fitted with, when it came from [`hdbscan`].
    pub fn params(&self) -> Option<&ClusterParams> {
        self.params.as_ref()
    }

    pub fn condensed_tree(&self) -> &[CondensedEdge] {
        &self.condensed_tree
    }

    /// Dumps the condensed tree as JSON lines `{parent, child, lambda, size}`;
    /// point children also carry their `id`.
    pub fn write_condensed_tree<W: Write>(&self, mut writer: W) -> std::io::Result<()> {
        #[derive(Serialize)]
        struct Row<'a> {
            parent: usize,
            child: usize,
            lambda: f64,
            size: usize,
            #[serde(skip_serializing_if = "Option::is_none")]
            id: Option<&'a str>,
        }
        for e in &self.condensed_tree {
            let row = Row {
                parent: e.parent,
                child: e.child,
                lambda: e.lambda,
                size: e.size,
                id: self.point_ids.get(e.child).map(String::as_str),
            };
            serde_json::to_writer(&mut writer, &row)?;
            writer.write_all(b"\n")?;
        }
        Ok(())
    }
}

/// Cluster indices by size, largest first; equal sizes by ascending index.
pub fn order_clusters(model: &ClusterModel) -> Vec<usize> {
    let mut clusters: Vec<(usize, usize)> = model.cluster_sizes.iter().map(|(&c, &s)| (c, s)).collect();
    clusters.sort_by(|a, b| b.1.cmp(&a.1).then(a.0.cmp(&b.0)));
    clusters.into_iter().map(|(c, _)| c).collect()
}

/// `max(0, 1 - cosine)` for the given ids, in the given order.
pub fn cosine_distances(emb: &EmbeddingSet, ids: &[String]) -> Result<DistanceMatrix> {
    let sim = similarity_matrix(emb, ids)?;
    let n = ids.len();
    let mut values = Vec::with_capacity(n * n);
    for i in 0..n {
        values.extend(sim.row(i).iter().map(|s| (1.0 - s).max(0.0)));
    }
    if values.iter().any(|d| !d.is_finite()) {
        return Err(Error::Domain("non-finite distance".into()));
    }
    Ok(DistanceMatrix::new(n, values))
}

pub fn hdbscan(emb: &EmbeddingSet, ids: &[String], params: &ClusterParams) -> Result<ClusterModel> {
    params.validate()?;
    let mut sorted: Vec<String> = ids.to_vec();
    sorted.sort();
    if let Some(w) = sorted.windows(2).find(|w| w[0] == w[1]) {
        return Err(Error::DuplicateId(w[0].clone()));
    }
    if sorted.len() < params.min_cluster_size {
        return Err(Error::Validation(format!(
            "{} points is fewer than min_cluster_size {}",
            sorted.len(),
            params.min_cluster_size
        )));
    }
    let dist = cosine_distances(emb, &sorted)?;
    hdbscan_on_distances(&dist, sorted, params)
}

/// Runs the pipeline on a precomputed distance matrix whose row `i` belongs to
/// `ids[i]`.
pub fn hdbscan_on_distances(
    dist: &DistanceMatrix,
    ids: Vec<String>,
    params: &ClusterParams,
) -> Result<ClusterModel> {
    params.validate()?;
    let n = dist.len();
    if ids.len() != n {
        return Err(Error::Validation(format!("{} ids for {n} rows", ids.len())));
    }
    if n < params.min_cluster_size || n < 2 {
        return Err(Error::Validation(format!(
            "{n} points is fewer than min_cluster_size {}",
            params.min_cluster_size
        )));
    }
    let core = core_distances(dist, params.min_samples);
    let mst = minimum_spanning_tree(dist, &core);
    if mst.iter().any(|e| !e.weight.is_finite()) {
        return Err(Error::Domain("non-finite mutual reachability distance".into()));
    }
    let merges = tree::single_linkage(n, &mst);
    let condensed = tree::condense(n, &merges, params.min_cluster_size);
    let table = tree::cluster_table(n, &condensed);
    let selected = tree::select_eom(&table, params.allow_single_cluster);
    let labels = tree::label_points(n, &condensed, &table, &selected);

    let mut assignments = BTreeMap::new();
    let mut membership = BTreeMap::new();
    let mut cluster_sizes = BTreeMap::new();
    for (id, (label, prob)) in ids.iter().zip(labels) {
        let a = match label {
            Some(c) => {
                let idx = selected.binary_search(&c).expect("label is a selected cluster");
                *cluster_sizes.entry(idx).or_insert(0) += 1;
                Assignment::Cluster(idx)
            }
            None => Assignment::Noise,
        };
        assignments.insert(id.clone(), a);
        membership.insert(id.clone(), if a.is_noise() { 0.0 } else { prob });
    }
    Ok(ClusterModel {
        assignments,
        membership,
        cluster_sizes,
        condensed_tree: condensed,
        point_ids: ids,
        params: Some(*params),
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn emb_from(rows: Vec<(String, Vec<f32>)>) -> EmbeddingSet {
        let dim = rows[0].1.len();
        EmbeddingSet::new(dim, rows).unwrap()
    }

    #[test]
    fn params_validation() {
        assert!(ClusterParams::new(1, 1).is_err());
        assert!(ClusterParams::new(5, 0).is_err());
        assert!(ClusterParams::new(5, 6).is_err());
        assert!(ClusterParams::new(5, 5).is_ok());
        assert_eq!(ClusterParams::default_for(100).min_cluster_size, 5);
        assert_eq!(ClusterParams::default_for(1234).min_cluster_size, 12);
    }

    #[test]
    fn identical_directions_form_one_cluster() {
        let rows = (0..20)
            .map(|i| (format!("p{i:02}"), vec![0.3f32, -1.2, 0.7]))
            .collect();
        let emb = emb_from(rows);
        let ids = emb.ids().to_vec();
        let model = hdbscan(&emb, &ids, &ClusterParams::new(5, 5).unwrap()).unwrap();
        assert_eq!(model.n_clusters(), 1);
        assert_eq!(model.cluster_sizes()[&0], 20);
        for id in &ids {
            assert_eq!(model.assignment(id), Some(Assignment::Cluster(0)));
            assert_eq!(model.membership(id), Some(1.0));
        }
    }

    #[test]
    fn too_few_points() {
        let emb = emb_from(vec![("a".into(), vec![1.0, 0.0]), ("b".into(), vec![0.0, 1.0])]);
        let ids = emb.ids().to_vec();
        assert!(hdbscan(&emb, &ids, &ClusterParams::new(5, 2).unwrap()).is_err());
    }

    #[test]
    fn order_clusters_by_size_then_index() {
        let entries = |sizes: &[usize]| {
            let mut v = Vec::new();
            for (c, &s) in sizes.iter().enumerate() {
                for k in 0..s {
                    v.push((format!("c{c}-{k}"), Assignment::Cluster(c), 0.5));
                }
            }
            ClusterModel::from_parts(v).unwrap()
        };
        assert_eq!(order_clusters(&entries(&[5, 9])), vec![1, 0]);
        assert_eq!(order_clusters(&entries(&[5, 5])), vec![0, 1]);
        assert_eq!(order_clusters(&entries(&[3])), vec![0]);
    }

    #[test]
    fn from_parts_rejects_noisy_membership() {
        let bad = vec![("a".to_string(), Assignment::Noise, 0.3)];
        assert!(ClusterModel::from_parts(bad).is_err());
        let bad = vec![("a".to_string(), Assignment::Cluster(0), 1.5)];
        assert!(ClusterModel::from_parts(bad).is_err());
    }
}

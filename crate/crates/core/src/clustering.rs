//! Contiguity-constrained agglomerative clustering of the periods of linked
//! submodels on net demand.

use crate::exec::par_map;
use crate::tsa::{Partition, RepPeriod, Submodel, SubmodelKind};
use serde::{Deserialize, Serialize};
use std::ops::Range;
use std::path::Path;
use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ClusterError {
    #[error("plan refers to submodel {0}, which is missing or not linked")]
    NotLinked(usize),
    #[error("clusters of submodel {0} do not tile its periods")]
    BadTiling(usize),
    #[error("cluster count must be at least 1")]
    ZeroClusters,
}

fn sse_increase(n_a: f64, mean_a: f64, n_b: f64, mean_b: f64) -> f64 {
    n_a * n_b / (n_a + n_b) * (mean_a - mean_b).powi(2)
}

/// Greedy Ward merging of adjacent clusters down to `min(k, n)` clusters.
/// Returns index intervals in order.
pub fn contiguous_agglomerate(values: &[f64], k: usize) -> Vec<Range<usize>> {
    let k = k.max(1);
    let mut clusters: Vec<(Range<usize>, f64)> = values.iter().enumerate().map(|(i, &v)| (i..i + 1, v)).collect();
    while clusters.len() > k {
        let mut best = 0;
        let mut best_cost = f64::INFINITY;
        for i in 0..clusters.len() - 1 {
            let (a, ma) = &clusters[i];
            let (b, mb) = &clusters[i + 1];
            let cost = sse_increase(a.len() as f64, *ma, b.len() as f64, *mb);
            if cost < best_cost {
                best_cost = cost;
                best = i;
            }
        }
        let (b, mb) = clusters.remove(best + 1);
        let (a, ma) = &mut clusters[best];
        let (na, nb) = (a.len() as f64, b.len() as f64);
        *ma = (na * *ma + nb * mb) / (na + nb);
        a.end = b.end;
    }
    clusters.into_iter().map(|(r, _)| r).collect()
}

/// Within-cluster sum of squared deviations.
pub fn sse(values: &[f64], clusters: &[Range<usize>]) -> f64 {
    clusters
        .iter()
        .map(|r| {
            let s = &values[r.clone()];
            let m = s.iter().sum::<f64>() / s.len() as f64;
            s.iter().map(|v| (v - m).powi(2)).sum::<f64>()
        })
        .sum()
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SubmodelClusters {
    /// Index of the submodel in the partition.
    pub submodel: usize,
    /// Intervals over the submodel's period indices.
    pub clusters: Vec<Range<usize>>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ClusterPlan {
    pub k: usize,
    pub budget: ClusterBudget,
    pub submodels: Vec<SubmodelClusters>,
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ClusterBudget {
    /// Each linked submodel gets `min(K, length)` clusters.
    #[default]
    PerSubmodel,
    /// `K` clusters in total, shared across linked submodels in proportion to
    /// their length, at least one each.
    Global,
}

fn global_shares(lengths: &[usize], k: usize) -> Vec<usize> {
    let total: usize = lengths.iter().sum();
    let mut shares: Vec<usize> = lengths.iter().map(|&n| ((k * n) / total.max(1)).clamp(1, n)).collect();
    // hand out the remainder to the longest submodels with room left
    let mut order: Vec<usize> = (0..lengths.len()).collect();
    order.sort_by_key(|&i| (std::cmp::Reverse(lengths[i]), i));
    // the floor of one cluster each can overshoot; take back from the largest
    let floor = k.max(lengths.len());
    while shares.iter().sum::<usize>() > floor {
        let i = (0..shares.len()).max_by_key(|&i| (shares[i], std::cmp::Reverse(i))).expect("nonempty");
        shares[i] -= 1;
    }
    let mut left = k.saturating_sub(shares.iter().sum());
    while left > 0 {
        let mut gave = false;
        for &i in &order {
            if left > 0 && shares[i] < lengths[i] {
                shares[i] += 1;
                left -= 1;
                gave = true;
            }
        }
        if !gave {
            break;
        }
    }
    shares
}

/// Clusters every linked submodel of `partition` on the mean net demand of
/// its periods.
pub fn plan_clusters(
    partition: &Partition,
    net_demand: &[f64],
    k: usize,
    budget: ClusterBudget,
    threads: usize,
) -> Result<ClusterPlan, ClusterError> {
    if k == 0 {
        return Err(ClusterError::ZeroClusters);
    }
    let linked: Vec<usize> = (0..partition.submodels.len())
        .filter(|&i| partition.submodels[i].kind == SubmodelKind::Linked)
        .collect();
    let lengths: Vec<usize> = linked.iter().map(|&i| partition.submodels[i].periods.len()).collect();
    let targets = match budget {
        ClusterBudget::PerSubmodel => lengths.iter().map(|&n| k.min(n)).collect(),
        ClusterBudget::Global => global_shares(&lengths, k),
    };
    let jobs: Vec<(usize, usize)> = linked.into_iter().zip(targets).collect();
    let submodels = par_map(threads, &jobs, |_, &(i, target)| {
        let values: Vec<f64> = partition.submodels[i]
            .periods
            .iter()
            .map(|p| p.iter_hours().map(|h| net_demand[h]).sum::<f64>() / p.weight as f64)
            .collect();
        SubmodelClusters {
            submodel: i,
            clusters: contiguous_agglomerate(&values, target),
        }
    });
    Ok(ClusterPlan { k, budget, submodels })
}

/// Replaces each cluster of a linked submodel by one period spanning it.
pub fn apply_plan(partition: &Partition, plan: &ClusterPlan) -> Result<Partition, ClusterError> {
    let mut out = partition.clone();
    for sc in &plan.submodels {
        let sub = partition
            .submodels
            .get(sc.submodel)
            .filter(|s| s.kind == SubmodelKind::Linked)
            .ok_or(ClusterError::NotLinked(sc.submodel))?;
        let mut next = 0;
        for c in &sc.clusters {
            if c.start != next || c.end <= c.start {
                return Err(ClusterError::BadTiling(sc.submodel));
            }
            next = c.end;
        }
        if next != sub.periods.len() {
            return Err(ClusterError::BadTiling(sc.submodel));
        }
        let periods = sc
            .clusters
            .iter()
            .map(|c| {
                let first = &sub.periods[c.start];
                let last = &sub.periods[c.end - 1];
                RepPeriod::contiguous(first.hours[0].start..last.hours[0].end)
            })
            .collect();
        out.submodels[sc.submodel] = Submodel {
            kind: SubmodelKind::Linked,
            periods,
        };
    }
    Ok(out)
}

pub fn save_plans(plans: &[ClusterPlan], path: impl AsRef<Path>) -> std::io::Result<()> {
    let text = serde_json::to_string_pretty(plans).map_err(std::io::Error::other)?;
    std::fs::write(path, text + "\n")
}

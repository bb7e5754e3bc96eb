//! Latent-domain discovery by constrained two-level clustering.
//!
//! Each class is split into `S` local clusters; local clusters are then
//! matched one-to-one, per class, to `S` domain centroids. Local clustering
//! and matching alternate until no sample changes its local cluster or
//! domain.

use std::collections::{BTreeMap, BTreeSet};

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::data::Dataset;
use crate::linalg::{min_cost_assignment, sq_dist};
use crate::{rng, Error, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DomainAssignment {
    /// `class_index * S + domain`, where `class_index` is the position of the
    /// sample's class in the sorted class list.
    pub local_cluster: Vec<usize>,
    pub domain: Vec<usize>,
    pub classes: Vec<usize>,
    pub n_domains: usize,
    pub rounds: usize,
    pub converged: bool,
}

impl DomainAssignment {
    pub fn n_local_clusters(&self) -> usize {
        self.classes.len() * self.n_domains
    }

    /// Checks that local clusters are single-class and that every class has
    /// exactly one local cluster per domain.
    pub fn check(&self, labels: &[usize]) -> Result<()> {
        if labels.len() != self.domain.len() || labels.len() != self.local_cluster.len() {
            return Err(Error::invalid("assignment length differs from the sample count"));
        }
        let mut owner: BTreeMap<usize, usize> = BTreeMap::new();
        let mut pairs: BTreeMap<(usize, usize), usize> = BTreeMap::new();
        for i in 0..labels.len() {
            let lc = self.local_cluster[i];
            if lc >= self.n_local_clusters() || self.domain[i] >= self.n_domains {
                return Err(Error::invalid(format!("sample {i} has an out-of-range cluster")));
            }
            if *owner.entry(lc).or_insert(labels[i]) != labels[i] {
                return Err(Error::invalid(format!("local cluster {lc} mixes classes")));
            }
            if *pairs.entry((labels[i], self.domain[i])).or_insert(lc) != lc {
                return Err(Error::invalid(format!(
                    "class {} has two local clusters in domain {}",
                    labels[i], self.domain[i]
                )));
            }
        }
        Ok(())
    }
}

fn mean_of(x: &[Vec<f64>], idx: &[usize], dim: usize) -> Vec<f64> {
    let mut m = vec![0.0; dim];
    for &i in idx {
        for (a, b) in m.iter_mut().zip(&x[i]) {
            *a += b;
        }
    }
    let n = idx.len().max(1) as f64;
    m.iter_mut().for_each(|v| *v /= n);
    m
}

fn nearest(x: &[f64], centers: &[Vec<f64>]) -> usize {
    let mut best = 0;
    let mut bd = f64::INFINITY;
    for (j, c) in centers.iter().enumerate() {
        let d = sq_dist(x, c);
        if d < bd {
            bd = d;
            best = j;
        }
    }
    best
}

/// Farthest-point seeding; the first center is drawn from `r`.
fn seed_centers<R: Rng>(x: &[Vec<f64>], idx: &[usize], s: usize, r: &mut R) -> Vec<Vec<f64>> {
    let mut chosen = vec![idx[r.random_range(0..idx.len())]];
    while chosen.len() < s {
        let mut best = idx[0];
        let mut bd = -1.0;
        for &i in idx {
            let d = chosen.iter().map(|&c| sq_dist(&x[i], &x[c])).fold(f64::INFINITY, f64::min);
            if d > bd {
                bd = d;
                best = i;
            }
        }
        chosen.push(best);
    }
    chosen.iter().map(|&i| x[i].clone()).collect()
}

/// One Lloyd step inside a class; empty clusters are re-seeded at the point
/// farthest from its current center.
fn lloyd_step(x: &[Vec<f64>], idx: &[usize], centers: &mut [Vec<f64>], dim: usize) -> Vec<usize> {
    let mut assign: Vec<usize> = idx.iter().map(|&i| nearest(&x[i], centers)).collect();
    for j in 0..centers.len() {
        if !assign.contains(&j) {
            let mut far = 0;
            let mut fd = -1.0;
            for (p, &i) in idx.iter().enumerate() {
                let d = sq_dist(&x[i], &centers[assign[p]]);
                let own = assign.iter().filter(|&&a| a == assign[p]).count();
                if own > 1 && d > fd {
                    fd = d;
                    far = p;
                }
            }
            assign[far] = j;
        }
    }
    for (j, c) in centers.iter_mut().enumerate() {
        let members: Vec<usize> = idx.iter().zip(&assign).filter(|(_, a)| **a == j).map(|(i, _)| *i).collect();
        *c = mean_of(x, &members, dim);
    }
    assign
}

pub fn reshape_discover(x: &[Vec<f64>], labels: &[usize], s: usize, seed: u64) -> Result<DomainAssignment> {
    if x.len() != labels.len() {
        return Err(Error::DimensionMismatch { expected: x.len(), found: labels.len() });
    }
    if s == 0 {
        return Err(Error::invalid("number of domains must be positive"));
    }
    let dim = crate::linear::check_rows(x)?;
    let classes: Vec<usize> = labels.iter().copied().collect::<BTreeSet<_>>().into_iter().collect();
    let members: Vec<Vec<usize>> = classes
        .iter()
        .map(|&c| (0..labels.len()).filter(|&i| labels[i] == c).collect())
        .collect();
    for (c, m) in classes.iter().zip(&members) {
        if m.len() < s {
            return Err(Error::invalid(format!("class {c} has {} samples, fewer than {s} domains", m.len())));
        }
    }
    let mut r = rng::stream(seed, 0, "reshape");
    let mut centers: Vec<Vec<Vec<f64>>> = members.iter().map(|m| seed_centers(x, m, s, &mut r)).collect();
    // local[c][p] = local cluster (within class c) of the p-th member.
    let mut local: Vec<Vec<usize>> = vec![Vec::new(); classes.len()];
    let mut matching: Vec<Vec<usize>> = vec![(0..s).collect(); classes.len()];
    let mut previous: Option<Vec<usize>> = None;
    let mut rounds = 0;
    let mut converged = false;
    let mut domain = vec![0; x.len()];
    while rounds < 100 {
        rounds += 1;
        for (c, m) in members.iter().enumerate() {
            local[c] = lloyd_step(x, m, &mut centers[c], dim);
        }
        // Domain centroids from the current matching, then re-match until stable.
        for _ in 0..100 {
            let mut dc = vec![vec![0.0; dim]; s];
            for c in 0..classes.len() {
                for l in 0..s {
                    for (a, b) in dc[matching[c][l]].iter_mut().zip(&centers[c][l]) {
                        *a += b / classes.len() as f64;
                    }
                }
            }
            let next: Vec<Vec<usize>> = centers
                .iter()
                .map(|cc| {
                    let cost: Vec<Vec<f64>> = cc.iter().map(|l| dc.iter().map(|d| sq_dist(l, d)).collect()).collect();
                    min_cost_assignment(&cost)
                })
                .collect();
            if next == matching {
                break;
            }
            matching = next;
        }
        for (c, m) in members.iter().enumerate() {
            for (p, &i) in m.iter().enumerate() {
                domain[i] = matching[c][local[c][p]];
            }
        }
        if previous.as_ref() == Some(&domain) {
            converged = true;
            break;
        }
        previous = Some(domain.clone());
    }
    let class_pos: BTreeMap<usize, usize> = classes.iter().enumerate().map(|(i, c)| (*c, i)).collect();
    let local_cluster = (0..x.len()).map(|i| class_pos[&labels[i]] * s + domain[i]).collect();
    let out = DomainAssignment {
        local_cluster,
        domain,
        classes,
        n_domains: s,
        rounds,
        converged,
    };
    out.check(labels)?;
    Ok(out)
}

/// The sub-domains of a dataset as separate datasets, in domain order.
pub fn split_by_domain(ds: &Dataset, assignment: &DomainAssignment) -> Result<Vec<Dataset>> {
    if assignment.domain.len() != ds.len() {
        return Err(Error::invalid("assignment does not belong to this dataset"));
    }
    (0..assignment.n_domains)
        .map(|j| {
            let idx: Vec<usize> = (0..ds.len()).filter(|&i| assignment.domain[i] == j).collect();
            if idx.is_empty() {
                return Err(Error::Empty(format!("sub-domain {j}")));
            }
            Ok(ds.subset(format!("{}#domain{j}", ds.name()), &idx))
        })
        .collect()
}

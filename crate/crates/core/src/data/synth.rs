//! Seeded multi-domain Gaussian generator with planted biases.
//!
//! Each domain shifts every class mean by its own vector (capture bias), may
//! cover only a subset of the classes (negative bias) and may flip labels with
//! a fixed probability (noisy source).

use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use super::{Dataset, LabeledSample};
use crate::{rng, Error, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SynthSpec {
    pub n_domains: usize,
    pub n_classes: usize,
    pub dim: usize,
    /// Samples per class, one entry per domain.
    pub samples_per_class: Vec<usize>,
    /// One mean vector per class.
    pub class_means: Vec<Vec<f64>>,
    /// One additive shift per domain.
    pub domain_shifts: Vec<Vec<f64>>,
    /// Classes present in each domain.
    pub class_subsets: Vec<Vec<usize>>,
    pub noise_rate: f64,
    /// Isotropic standard deviation of each class.
    pub cluster_std: Vec<f64>,
    pub seed: u64,
}

impl SynthSpec {
    /// Class means drawn as Gaussian vectors of expected norm `class_sep`,
    /// domain shifts drawn as random directions of length `shift`, every
    /// class in every domain.
    #[allow(clippy::too_many_arguments)]
    pub fn random_layout(
        n_domains: usize,
        n_classes: usize,
        dim: usize,
        per_class: usize,
        class_sep: f64,
        shift: f64,
        cluster_std: f64,
        seed: u64,
    ) -> Self {
        let mut r = rng::stream(seed, 0, "synth-layout");
        let scale = class_sep / (dim as f64).sqrt();
        let class_means = (0..n_classes)
            .map(|_| (0..dim).map(|_| scale * r.sample::<f64, _>(StandardNormal)).collect())
            .collect();
        let domain_shifts = (0..n_domains)
            .map(|_| {
                let v: Vec<f64> = (0..dim).map(|_| r.sample::<f64, _>(StandardNormal)).collect();
                let n = v.iter().map(|x| x * x).sum::<f64>().sqrt().max(f64::MIN_POSITIVE);
                v.into_iter().map(|x| shift * x / n).collect()
            })
            .collect();
        SynthSpec {
            n_domains,
            n_classes,
            dim,
            samples_per_class: vec![per_class; n_domains],
            class_means,
            domain_shifts,
            class_subsets: vec![(0..n_classes).collect(); n_domains],
            noise_rate: 0.0,
            cluster_std: vec![cluster_std; n_classes],
            seed,
        }
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(Error::InvalidInput(m));
        if self.n_domains == 0 || self.n_classes == 0 || self.dim == 0 {
            return bad("n_domains, n_classes and dim must be positive".into());
        }
        if !(0.0..=1.0).contains(&self.noise_rate) {
            return bad(format!("noise_rate {} outside [0, 1]", self.noise_rate));
        }
        if self.samples_per_class.len() != self.n_domains {
            return bad("samples_per_class needs one entry per domain".into());
        }
        if self.domain_shifts.len() != self.n_domains || self.class_subsets.len() != self.n_domains {
            return bad("domain_shifts and class_subsets need one entry per domain".into());
        }
        if self.class_means.len() != self.n_classes || self.cluster_std.len() != self.n_classes {
            return bad("class_means and cluster_std need one entry per class".into());
        }
        if self.class_means.iter().chain(&self.domain_shifts).any(|v| v.len() != self.dim) {
            return bad(format!("every mean and shift must have dimension {}", self.dim));
        }
        if self.cluster_std.iter().any(|s| !(s.is_finite() && *s >= 0.0)) {
            return bad("cluster_std entries must be finite and non-negative".into());
        }
        for (i, subset) in self.class_subsets.iter().enumerate() {
            if subset.is_empty() {
                return bad(format!("domain {i} has an empty class subset"));
            }
            if let Some(c) = subset.iter().find(|&&c| c >= self.n_classes) {
                return bad(format!("domain {i} lists class {c} >= n_classes {}", self.n_classes));
            }
        }
        Ok(())
    }
}

/// Generates one dataset per domain, named `domain<i>` with collection id `i`.
pub fn synth_generate(spec: &SynthSpec) -> Result<Vec<Dataset>> {
    spec.validate()?;
    (0..spec.n_domains)
        .map(|i| {
            let mut r = rng::stream(spec.seed, i as u64, "synth");
            let mut classes = spec.class_subsets[i].clone();
            classes.sort_unstable();
            classes.dedup();
            let name = format!("domain{i}");
            let mut samples = Vec::new();
            for &c in &classes {
                for k in 0..spec.samples_per_class[i] {
                    let features = (0..spec.dim)
                        .map(|j| {
                            let z: f64 = r.sample(StandardNormal);
                            spec.class_means[c][j] + spec.domain_shifts[i][j] + spec.cluster_std[c] * z
                        })
                        .collect();
                    samples.push(LabeledSample {
                        features,
                        class_label: c,
                        collection_id: i,
                        sample_id: format!("{name}-c{c}-{k}"),
                    });
                }
            }
            if classes.len() > 1 {
                for s in &mut samples {
                    let u: f64 = r.random();
                    if u < spec.noise_rate {
                        let others: Vec<usize> =
                            classes.iter().copied().filter(|&c| c != s.class_label).collect();
                        s.class_label = others[r.random_range(0..others.len())];
                    }
                }
            }
            Dataset::new(name, i, spec.dim, samples)
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn bitwise_deterministic() {
        let spec = SynthSpec::random_layout(3, 4, 5, 10, 4.0, 2.0, 1.0, 11);
        assert_eq!(synth_generate(&spec).unwrap(), synth_generate(&spec).unwrap());
    }

    #[test]
    fn full_noise_flips_every_label() {
        let mut spec = SynthSpec::random_layout(1, 2, 2, 25, 4.0, 0.0, 1.0, 3);
        spec.noise_rate = 1.0;
        let ds = &synth_generate(&spec).unwrap()[0];
        for s in ds.samples() {
            let planted: usize = s.sample_id.split('-').nth(1).unwrap()[1..].parse().unwrap();
            assert_ne!(planted, s.class_label);
        }
    }

    #[test]
    fn class_subsets_respected() {
        let mut spec = SynthSpec::random_layout(2, 4, 3, 5, 4.0, 1.0, 1.0, 0);
        spec.class_subsets = vec![vec![0, 2], vec![1, 2, 3]];
        let out = synth_generate(&spec).unwrap();
        assert_eq!(out[0].class_set().iter().copied().collect::<Vec<_>>(), vec![0, 2]);
        assert_eq!(out[1].len(), 15);
    }

    #[test]
    fn rejects_empty_subset_and_bad_noise() {
        let mut spec = SynthSpec::random_layout(2, 2, 2, 5, 4.0, 1.0, 1.0, 0);
        spec.class_subsets[1].clear();
        assert!(synth_generate(&spec).is_err());
        let mut spec = SynthSpec::random_layout(2, 2, 2, 5, 4.0, 1.0, 1.0, 0);
        spec.noise_rate = 1.5;
        assert!(synth_generate(&spec).is_err());
    }

    #[test]
    fn zero_shift_domains_share_class_means() {
        let spec = SynthSpec::random_layout(2, 2, 3, 2000, 6.0, 0.0, 1.0, 5);
        let out = synth_generate(&spec).unwrap();
        for c in 0..2 {
            let mean = |ds: &Dataset| {
                let rows: Vec<Vec<f64>> = ds
                    .samples()
                    .iter()
                    .filter(|s| s.class_label == c)
                    .map(|s| s.features.clone())
                    .collect();
                crate::linalg::column_mean(&rows)
            };
            let d = crate::linalg::sq_dist(&mean(&out[0]), &mean(&out[1])).sqrt();
            // Standard error of a difference of two 2000-sample means in 3-D.
            assert!(d < 0.2, "class {c} means differ by {d}");
        }
    }
}

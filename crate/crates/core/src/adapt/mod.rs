//! Unsupervised domain adaptation: subspace methods, landmark selection,
//! the domain adaptation machine, latent-domain discovery and self-labeling.

pub mod dam;
pub mod gfk;
pub mod landmark;
pub mod methods;
pub mod pca;
pub mod reshape;
pub mod sa;
pub mod self_label;

pub use dam::{dam_objective, dam_train, dam_train_from_predictions, dam_train_ova, DamConfig, DamFit, DamOva, LabeledTarget};
pub use gfk::{gfk_compute, gfk_kernel_eval, GfkMatrix};
pub use landmark::{landmark_classifier, landmark_select, LandmarkConfig, LandmarkResult, LandmarkSelection};
pub use methods::{
    dam_classify, gfk_svm_classify, reshape_combine, sa_classify, source_ova, AdaptSettings, ReshapeCombineResult,
    ReshapeEntry, ReshapeMode,
};
pub use pca::{pca_subspace, subspace_disagreement_dim, SubspaceBasis};
pub use reshape::{reshape_discover, split_by_domain, DomainAssignment};
pub use sa::{sa_align, sa_map_source, sa_map_target, sa_objective, AlignmentMatrix};
pub use self_label::{self_label_train, SelfLabelResult};

//! Factor-association analysis of aligned embeddings: per-snapshot PCA,
//! interpretable item factors, global and difficulty-stratified tests, and FDR control.

mod associate;
mod factors;
mod ops;
mod pca;
mod suite;

pub use associate::{
    combine_bins, difficulty_bins, global_associate, stratified_associate, Association, FactorValues,
    SpearmanScore, StratifyOptions, DEFAULT_BINS,
};
pub use factors::{difficulty, discrimination_kelley, kelley_group_size, ItemFactors, KELLEY_FRACTION};
pub use ops::{
    bh_fdr, fisher_z_combine, kruskal_wallis, one_sided_score, spearman_test, stouffer, two_sided_score,
    weighted_mean, KruskalWallis, SpearmanTest,
};
pub use pca::{pca_decompose, PcaDecomposition, EFFECTIVE_RANK_LEVEL};
pub use suite::{
    aggregate_rows, associate_snapshot, run_association_suite, AggregateRow, AssociationReport,
    AssociationRow, Factor, Mode, Spread, SuiteOptions, ASSOCIATION_AGGREGATE_CSV, ASSOCIATION_CSV,
    DEFAULT_COMPONENTS,
};

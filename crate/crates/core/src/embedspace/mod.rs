//! Static analyses over embedding matrices.

mod align;
mod drift;
mod graph;
mod normfreq;
mod params;
pub mod synthetic;

pub use align::{
    alignment_cosine, fit_alignment, mean_defined, pseudoinverse, row_cosines, AlignmentKind,
    AlignmentReport, AlignmentTransform, RANK_CUTOFF,
};
pub use drift::{drift_from_matrices, drift_series, DriftSeries, EmbeddingSide};
pub use graph::{
    adjacency_spectral_embedding, compare_graphs, knn_adjacency, knn_lists, knn_overlap, omnibus,
    operator_norm, spectral_distance, spectral_distance_from_graphs, GraphCompareReport,
    KnnOverlap, SpectralDistance, SpectralEmbedding, DEFAULT_EMBED_DIM, DEFAULT_K,
};
pub use normfreq::{norm_frequency, norm_frequency_points, NormFrequencyBin, DEFAULT_BINS};
pub use params::{param_fraction, ParamFraction};

pub use crate::matrix::{EmbeddingMatrix, Role};

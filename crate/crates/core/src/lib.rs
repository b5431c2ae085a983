//! Strategic misreporting of intrinsic opinions under Friedkin–Johnsen
//! dynamics: equilibrium computation, Nash equilibria of the misreporting
//! game, detection and recovery of strategic agents.

pub mod detection;
pub mod error;
pub mod experiments;
pub mod fj;
pub mod graph;
pub mod io;
pub mod recovery;
pub mod stats;
pub mod strategic;

pub use detection::{
    chi_square_sign_test, detect_manipulation, reconstruct_intrinsic, t_test_one_sample,
    DetectionOutcome, Verdict,
};
pub use error::{Error, Result};
pub use experiments::{
    detection_experiment, recovery_experiment, select_top_centrality, sweep_alpha,
    sweep_strategic_fraction, OpinionSource, Scenario, SetSpec, SweepRow,
};
pub use fj::{
    agent_cost, best_response_dynamics, disagreement, fj_equilibrium, metrics, polarization, pom,
    pom_upper_bound_hetero, pom_upper_bound_shared, q_matrix_oracle, total_cost, MetricsReport,
    OpinionProfile, OpinionRole, ResponseMatrix, SusceptibilityProfile,
};
pub use graph::{
    eigenvector_centrality, generate_blockmodel, generate_gnp, laplacian, restricted_laplacian,
    spectral_decomposition, CommunityEmbedding, SpectralDecomposition, WeightedGraph,
};
pub use recovery::{
    blockmodel_constants, recover_deviators, spectral_embedding, ssc_sss_bruteforce, torrent,
    EmbeddingMatrix, RecoveryResult, SscSssCertificate, TorrentVariant,
};
pub use strategic::{
    build_system, closed_form_all_deviate, solve_nash, solve_strategic, verify_nash, NashSystem,
    StrategicOutcome, StrategicSet, Uniqueness,
};

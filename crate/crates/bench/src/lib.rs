//! Shared fixtures for the solver benchmarks.

use misreport::{
    generate_blockmodel, select_top_centrality, EmbeddingMatrix, OpinionProfile, ResponseMatrix,
    StrategicSet, SusceptibilityProfile, WeightedGraph,
};

pub struct Fixture {
    pub graph: WeightedGraph,
    pub alpha: SusceptibilityProfile,
    pub response: ResponseMatrix,
    pub embedding: EmbeddingMatrix,
    pub s: OpinionProfile,
    pub set: StrategicSet,
}

/// Two-community blockmodel with `s = ±1` by community and the top 5% central nodes strategic.
pub fn blockmodel(n: usize) -> Fixture {
    let half = n / 2;
    let (graph, communities) = generate_blockmodel(&[half, n - half], 0.2, 0.02, 1).unwrap();
    let alpha = SusceptibilityProfile::shared(n, 0.5).unwrap();
    let response = ResponseMatrix::new(&graph, &alpha).unwrap();
    let s = OpinionProfile::intrinsic((0..n).map(|i| if i < half { 1.0 } else { -1.0 }).collect())
        .unwrap();
    let set = select_top_centrality(&graph, 0.05).unwrap();
    Fixture {
        embedding: EmbeddingMatrix::one_hot(&communities),
        graph,
        alpha,
        response,
        s,
        set,
    }
}

//! Width/resolution design-space exploration for MobileNetV2-SSD detectors.
//!
//! Candidates `(alpha, resolution)` are turned into architecture graphs for
//! exact parameter and MAC counts ([`arch`]), measured or modelled by an
//! evaluator ([`eval`]), scored with the modified NetScore ([`score`]) and
//! collected in an append-only ledger from which the best design point is
//! selected ([`search`]). [`report`] exports the ledger as plottable CSV.

pub mod arch;
pub mod eval;
pub mod report;
pub mod score;
pub mod search;

pub use arch::{
    build_graph, count_macs, count_params, scale_channels, ArchConfig, ArchError, ArchitectureGraph, HeadStyle,
    LayerKind, LayerSpec, SsdHeadSpec, Theta,
};
pub use eval::{
    evaluate_external, ingest_results_file, surrogate_evaluate, EvalError, Evaluator, EvaluatorConfig, EvaluatorMode,
    SurrogateParams,
};
pub use report::{Metric, SurfaceGrid};
pub use score::{modified_netscore, score_all, EvaluationRecord, NetScoreWeights, RecordSource, ScoredRecord};
pub use search::{explore, generate_grid, select_best, RunLedger, SearchError, SearchSpace};

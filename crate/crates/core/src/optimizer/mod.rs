//! Parameter-space search, Pareto extraction and correlation analysis.

pub mod analysis;
pub mod objective;
pub mod search;
pub mod space;
pub mod surrogate;

pub use analysis::{dominates, non_dominated, pareto_front, pearson};
pub use objective::{scalarize, Aggregator, Direction, Objective, ObjectiveParseError};
pub use search::{
    correlate, materialize, optimize_loop, search, Correlation, Evaluation, LoopOptions, OptimizationResult,
    OptimizeError, SearchConfig, Strategy,
};
pub use space::{enumerate_grid, grid_point, grid_size, sample_random, Distance, Point, SpaceError};
pub use surrogate::{score_pool, surrogate_suggest, SuggestError, DEFAULT_POOL_SIZE};

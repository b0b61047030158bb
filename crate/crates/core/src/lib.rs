//! Dunford-Schwartz operators on sequence spaces: certified operators, Cesàro
//! averages and maximal functions, the mean-ergodic decomposition, and
//! rearrangement / majorization structure of the limits.

pub mod dsop;
pub mod ergodic;
pub mod harness;
pub mod seqcore;
pub mod spaces;
pub mod sparse;

pub use dsop::{certify_ds, random_doubly_stochastic, random_ds, DsError, DsOperator, ShiftDirection, SignMode};
pub use ergodic::{
    check_maximal_inequality, maximal_function, mean_ergodic_decompose, run_averaging, AverageState,
    ConvergenceReport, Decomposition, ErgodicError, MaximalCheck,
};
pub use seqcore::{SeqError, SplitPair, Tail, TruncatedSequence};
pub use spaces::{fatou_check, Membership, SpaceDescriptor};
pub use sparse::SparseMatrix;

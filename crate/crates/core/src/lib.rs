//! Trajectory annotation toolkit core: domain types, scripted trajectory
//! generation, prompt assembly, response parsing and decomposition similarity.

pub mod decomposition;
pub mod encoder;
pub mod error;
pub mod io;
pub mod parser;
pub mod prompt;
pub mod similarity;
pub mod simgen;
pub mod trajectory;

pub use decomposition::{
    derive_extent, validate_decomposition, DecompositionFile, Source, SubTask, SubTaskDecomposition,
    Violation, ViolationKind,
};
pub use encoder::{BagEncoder, EncodeError, Encoder};
pub use error::CoreError;
pub use parser::{extract_decomposition, tally_validity, ParseOutcome, ValidityTally};
pub use similarity::{similarity, PairScore, SimilarityError, SimilarityReport};
pub use trajectory::{Frame, StepRecord, TrajectoryData};

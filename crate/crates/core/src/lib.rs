//! Rubric-driven feedback for student essays.
//!
//! A [`pipeline::Pipeline`] walks every (essay, rubric) pair through three
//! model calls (evidence, judgment, feedback), anchors the quoted evidence
//! to sentence spans of the essay, and falls back to instructor-written
//! historic feedback when a rubric is missed. Review actions by teaching
//! assistants are kept in the append-only [`review::Store`], which also
//! answers agreement and consistency queries.

pub mod export;
pub mod lint;
pub mod llm;
pub mod model;
pub mod par;
pub mod pipeline;
pub mod records;
pub mod review;
pub mod spans;

pub use model::{
    Assignment, AssignmentId, CommentId, Elaboration, Essay, EssayId, ExampleFeedback, Polarity,
    ReviewerId, Rubric, RubricId, RunId, Verdict,
};
pub use par::Execution;

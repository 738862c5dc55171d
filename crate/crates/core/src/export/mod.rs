//! Annotated documents, flat record files and CSV reports.

mod annotated;
mod page;
mod records;
mod reports;

pub use annotated::{
    export_annotated, strip_markers, AnnotatedDocument, CommentBlock, Region, NO_HISTORIC,
};
pub use page::render_page;
pub use records::{export_records, import_records, CommentRecord, FailureRecord, Record, RecordError};
pub use reports::{agreement_csv, consistency_csv};

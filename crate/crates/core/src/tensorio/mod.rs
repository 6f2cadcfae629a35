//! On-disk formats: EMBX matrices, checkpoints, frequency tables, gradient
//! traces and structured-text reports.

mod checkpoint;
mod embx;
mod freq;
mod report;
mod trace;
mod vocab;

pub use checkpoint::{
    list_checkpoints, read_checkpoint, read_run, step_dir_name, write_checkpoint, CheckpointRecord,
};
pub use embx::{decode_matrix, encode_matrix, read_matrix, write_matrix, MAGIC};
pub use freq::{read_frequencies, write_frequencies, FrequencyTable};
pub use report::{read_report, write_report, Report, Table};
pub use trace::{read_trace, write_trace, TraceLog, TraceRow, TRACE_HEADER};
pub use vocab::intersect_vocabularies;

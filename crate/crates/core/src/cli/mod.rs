//! Run configuration, artifact persistence and the command set behind the
//! `llc-lab` binary. This is the only module that touches the file system.

mod commands;
mod config;
mod report;

pub use commands::{
    cmd_build_labels, cmd_evaluate, cmd_gen_data, cmd_run_all, cmd_train_clf, cmd_train_twin,
    ArtifactEntry, Manifest, RunSummary, ALL_ARTIFACTS, CLASSIFIER_MODEL, LABELS_CSV, LABELS_META,
    MANIFEST, PLOTDATA_CSV, REPORT_CSV, REPORT_SUMMARY, TWIN_DATA_CSV, TWIN_DATA_META, TWIN_MODEL,
};
pub use config::{RunConfig, Sizes};
pub use report::{
    cmd_report, read_report_csv, render_summary, summarize_report, write_plotdata,
    write_report_csv, ReportFormat, REPORT_HEADER,
};

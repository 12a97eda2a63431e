//! Run every stage through the command layer with a reduced configuration
//! and list the artifacts and manifest it leaves behind.
//!
//! ```text
//! cargo run -p llc-lab --example full_run [output-dir]
//! ```

use std::path::PathBuf;

use llc_lab::cli::{cmd_report, cmd_run_all, ReportFormat, RunConfig, REPORT_CSV};

fn main() -> llc_lab::Result<()> {
    let mut cfg = RunConfig::default();
    cfg.sizes.twin_contexts = 400;
    cfg.sizes.classifier_contexts = 1000;
    cfg.sizes.eval_contexts = 200;
    cfg.output_dir = std::env::args()
        .nth(1)
        .map_or_else(|| PathBuf::from("runs/example"), PathBuf::from);

    let summary = cmd_run_all(&cfg)?;
    println!("{summary:#?}");
    println!("config hash {}", cfg.hash());
    let mut names: Vec<String> = std::fs::read_dir(&cfg.output_dir)?
        .map(|e| e.map(|e| e.file_name().to_string_lossy().into_owned()))
        .collect::<std::io::Result<_>>()?;
    names.sort();
    println!("artifacts in {}: {}", cfg.output_dir.display(), names.join(", "));
    print!("{}", cmd_report(&cfg.output_dir.join(REPORT_CSV), ReportFormat::Summary)?);
    Ok(())
}

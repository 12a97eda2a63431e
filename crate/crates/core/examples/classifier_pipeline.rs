//! Label contexts with the twin, train the allocation classifier and use
//! it to decide allocations, on the smaller 8-way platform.
//!
//! ```text
//! cargo run -p llc-lab --example classifier_pipeline
//! ```

use llc_lab::allocator::{enumerate_allocations, exhaustive_best, memorai_decide, OracleEvaluator};
use llc_lab::cli::RunConfig;
use llc_lab::pipeline::{build_classifier_dataset, sample_global_context, train_classifier};
use llc_lab::platform::total_compute;
use llc_lab::stream_rng;
use llc_lab::twin::{generate_twin_dataset, train_twin};

fn main() -> llc_lab::Result<()> {
    let cfg = RunConfig::eight_way();
    let spec = &cfg.platform;
    let space = enumerate_allocations(spec.n_llc, spec.n_vbs)?;

    let twin_data = generate_twin_dataset(spec, &cfg.oracle, 800, cfg.seed)?;
    let twin = train_twin(&twin_data, &cfg.effective_twin_train())?;
    let labels = build_classifier_dataset(std::slice::from_ref(&twin), spec, &space, 2000, cfg.seed)?;
    println!("{} labelled contexts, {} of {} classes used", labels.len(), labels.distinct_labels(), space.len());

    let clf = train_classifier(&labels, spec, &cfg.oracle, &cfg.effective_clf_train())?;
    println!(
        "classifier stopped at {} (best {}): test accuracy {:.1}%, regret {:.3}%",
        clf.stopped_at,
        clf.best_iteration,
        100.0 * clf.test_accuracy,
        100.0 * clf.test_regret
    );

    let oracle = OracleEvaluator::new(&cfg.oracle);
    let noiseless = cfg.oracle.noiseless();
    for i in 0..5 {
        let gc = sample_global_context(spec, &mut stream_rng(99, 0, i));
        let pick = memorai_decide(&gc, spec, &clf.model, &space)?;
        let best = exhaustive_best(&gc, spec, &space, &oracle)?;
        println!(
            "context {i}: classifier {} ({:.4} cores), optimum {} ({:.4} cores)",
            pick,
            total_compute(&gc, pick.ways(), spec, &noiseless, None)?,
            best.allocation,
            best.total_cpu
        );
    }
    Ok(())
}

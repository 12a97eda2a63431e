//! Generate measurements, train the digital twin and check it against the
//! noiseless oracle on held-out contexts.
//!
//! ```text
//! cargo run -p llc-lab --example digital_twin
//! ```

use llc_lab::platform::{true_compute, OracleParams};
use llc_lab::twin::{generate_twin_dataset, train_twin, twin_fidelity, twin_predict, twin_train_config};
use llc_lab::types::{PlatformSpec, VbsContext};

fn main() -> llc_lab::Result<()> {
    let spec = PlatformSpec::default();
    let params = OracleParams::default();
    let ds = generate_twin_dataset(&spec, &params, 600, 1)?;
    println!(
        "{} samples from {} contexts ({} train / {} val / {} test)",
        ds.len(),
        ds.meta.n_contexts,
        ds.meta.split.train.len(),
        ds.meta.split.val.len(),
        ds.meta.split.test.len()
    );

    let twin = train_twin(&ds, &twin_train_config())?;
    println!("stopped at iteration {}, test mse {:.5}", twin.stopped_at, twin.test_mse);

    let f = twin_fidelity(&twin, &ds, &params)?;
    println!(
        "held-out: mean relative error {:.2}%, {:.1}% of predictions within 10%, ranking agreement {:.1}%",
        100.0 * f.mean_relative_error,
        100.0 * f.within_10pct,
        100.0 * f.ranking_agreement
    );

    let ctx = VbsContext::from_link(0.4, 0.3, 9.0)?;
    println!("\nways   twin   oracle");
    for w in [1, 2, 4, 8, 12] {
        println!(
            "{w:>4} {:>6.3} {:>8.3}",
            twin_predict(&twin, &ctx, 2, w)?,
            true_compute(&ctx, 2, w, &params.noiseless(), None)?
        );
    }
    Ok(())
}

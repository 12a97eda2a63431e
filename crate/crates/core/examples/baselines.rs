//! Compare the random, equal-partition and demand-weighted baselines with
//! the exhaustive optimum on a handful of random contexts.
//!
//! ```text
//! cargo run -p llc-lab --example baselines
//! ```

use llc_lab::allocator::{
    baseline_equal, baseline_random, baseline_weighted, enumerate_allocations, exhaustive_best,
    OracleEvaluator,
};
use llc_lab::pipeline::sample_global_context;
use llc_lab::platform::{total_compute, OracleParams};
use llc_lab::stream_rng;
use llc_lab::types::{format_ways, PlatformSpec};

fn main() -> llc_lab::Result<()> {
    let spec = PlatformSpec::default();
    let params = OracleParams::default().noiseless();
    let space = enumerate_allocations(spec.n_llc, spec.n_vbs)?;
    let oracle = OracleEvaluator::new(&params);
    let equal = baseline_equal(&spec)?;
    println!("equal partition: {} ({} ways unused)\n", format_ways(&equal.ways), equal.unallocated);

    for i in 0..5 {
        let gc = sample_global_context(&spec, &mut stream_rng(7, 0, i));
        let demands: Vec<String> = gc.contexts().iter().map(|c| format!("{:.2}", c.demand())).collect();
        println!("context {i}: demand per vBS [{}]", demands.join(", "));

        let best = exhaustive_best(&gc, &spec, &space, &oracle)?;
        let random = baseline_random(&space, i);
        let weighted = baseline_weighted(&gc, &spec)?;
        for (name, ways) in [
            ("optimal", best.allocation.ways().to_vec()),
            ("random", random.ways().to_vec()),
            ("equal", equal.ways.clone()),
            ("weighted", weighted.ways),
        ] {
            let cpu = total_compute(&gc, &ways, &spec, &params, None)?;
            println!("  {name:<9} {:<12} {cpu:.4} cores", format_ways(&ways));
        }
    }
    Ok(())
}

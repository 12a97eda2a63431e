//! Exhaustive search over the allocation space. Per-vBS usage tables are
//! computed once and each allocation's cost is a sum of table lookups.
//!
//! ```text
//! cargo run -p llc-lab --example exhaustive_search
//! ```

use std::time::Instant;

use llc_lab::allocator::{best_from_tables, enumerate_allocations, usage_tables, OracleEvaluator};
use llc_lab::platform::OracleParams;
use llc_lab::types::{GlobalContext, PlatformSpec, VbsContext};

fn main() -> llc_lab::Result<()> {
    let spec = PlatformSpec::default();
    let space = enumerate_allocations(spec.n_llc, spec.n_vbs)?;
    let gc = GlobalContext::new(vec![
        VbsContext::from_link(0.9, 0.7, 6.0)?,
        VbsContext::from_link(0.1, 0.2, 28.0)?,
        VbsContext::from_link(0.5, 0.5, 15.0)?,
        VbsContext::from_link(0.3, 0.9, 22.0)?,
        VbsContext::from_link(0.05, 0.05, 10.0)?,
    ]);

    let start = Instant::now();
    let tables = usage_tables(&gc, &spec, &OracleEvaluator::new(&OracleParams::default()))?;
    let best = best_from_tables(&space, &tables);
    let elapsed = start.elapsed();

    for (i, t) in tables.iter().enumerate() {
        let row: Vec<String> = t.iter().map(|v| format!("{v:.3}")).collect();
        println!("vBS {i}: {}", row.join(" "));
    }
    println!(
        "\nbest of {} allocations: {} (class {}), {:.4} cores, found in {elapsed:.1?}",
        space.len(),
        best.allocation,
        best.class,
        best.total_cpu
    );

    let mut costs: Vec<(f64, String)> = space
        .allocations()
        .iter()
        .map(|a| {
            let c: f64 = tables.iter().zip(a.ways()).map(|(t, &n)| t[n as usize - 1]).sum();
            (c, a.to_string())
        })
        .collect();
    costs.sort_by(|a, b| a.0.total_cmp(&b.0));
    println!("runners-up:");
    for (c, a) in costs.iter().skip(1).take(4) {
        println!("  {a:<12} {c:.4} (+{:.3}%)", 100.0 * (c / best.total_cpu - 1.0));
    }
    Ok(())
}

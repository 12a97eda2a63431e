//! Energy benchmark of the baselines against the optimum over fresh
//! random contexts, printed as a summary and as bar-chart data.
//!
//! ```text
//! cargo run -p llc-lab --example energy_benchmark
//! ```

use llc_lab::cli::{render_summary, write_plotdata};
use llc_lab::pipeline::{evaluate_policies, Policy};
use llc_lab::platform::OracleParams;
use llc_lab::types::PlatformSpec;

fn main() -> llc_lab::Result<()> {
    let policies = [Policy::Optimal, Policy::Random, Policy::Equal, Policy::Weighted];
    for n_llc in [12, 8] {
        let spec = PlatformSpec::default().with_ways(n_llc);
        let report = evaluate_policies(&spec, &OracleParams::default(), &policies, 500, 900.0, 3)?;
        println!("== {n_llc} cache ways, 15-minute intervals");
        print!("{}", render_summary(&report.summary));
        println!();
        write_plotdata(&report.summary, std::io::stdout().lock())?;
        println!();
    }
    Ok(())
}

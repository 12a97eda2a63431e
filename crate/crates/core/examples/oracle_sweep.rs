//! Sweep the compute oracle over cache ways for a few traffic contexts and
//! convert the totals to energy.
//!
//! ```text
//! cargo run -p llc-lab --example oracle_sweep
//! ```

use llc_lab::platform::{energy, energy_savings, true_compute, OracleParams};
use llc_lab::types::{PlatformSpec, VbsContext};

fn main() -> llc_lab::Result<()> {
    let params = OracleParams::default().noiseless();
    let spec = PlatformSpec::default();
    let contexts = [
        ("idle", VbsContext::from_link(0.0, 0.0, 20.0)?),
        ("light, clean link", VbsContext::from_link(0.2, 0.3, 25.0)?),
        ("heavy, clean link", VbsContext::from_link(0.9, 0.8, 25.0)?),
        ("heavy, noisy link", VbsContext::from_link(0.9, 0.8, 4.0)?),
    ];

    print!("{:<20}", "ways");
    for w in 1..=spec.n_llc {
        print!("{w:>7}");
    }
    println!();
    for (name, ctx) in &contexts {
        print!("{name:<20}");
        for w in 1..=spec.n_llc {
            print!("{:>7.3}", true_compute(ctx, 4, w, &params, None)?);
        }
        println!();
    }

    let heavy = &contexts[3].1;
    let few = true_compute(heavy, 4, 1, &params, None)?;
    let many = true_compute(heavy, 4, 12, &params, None)?;
    println!(
        "\nheavy/noisy vBS: {few:.3} cores at 1 way, {many:.3} at 12 ways; over 15 min that is {:.0} J ({:.0} J vs {:.0} J)",
        energy_savings(few, many, &spec, 900.0),
        energy(few, &spec, 900.0).energy_j,
        energy(many, &spec, 900.0).energy_j,
    );

    let noisy = OracleParams::default();
    let draws: Vec<f64> = (0..5)
        .map(|s| true_compute(heavy, 4, 6, &noisy, Some(s)))
        .collect::<llc_lab::Result<_>>()?;
    println!("noisy measurements at 6 ways: {draws:.3?}");
    Ok(())
}

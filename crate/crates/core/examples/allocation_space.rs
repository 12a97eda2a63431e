//! The allocation space: every way vector that hands out all cache ways
//! with at least one way per vBS, in the fixed order that defines class
//! labels.
//!
//! ```text
//! cargo run -p llc-lab --example allocation_space
//! ```

use llc_lab::allocator::{binomial, enumerate_allocations};

fn main() -> llc_lab::Result<()> {
    for (n_llc, n_vbs) in [(12, 5), (8, 5), (6, 3)] {
        let space = enumerate_allocations(n_llc, n_vbs)?;
        println!(
            "{n_llc} ways over {n_vbs} vBS: {} allocations (C({}, {}) = {})",
            space.len(),
            n_llc - 1,
            n_vbs - 1,
            binomial(u64::from(n_llc - 1), u64::from(n_vbs - 1))
        );
    }

    let space = enumerate_allocations(6, 3)?;
    println!("\nclass  allocation");
    for (class, a) in space.allocations().iter().enumerate() {
        println!("{class:>5}  {a}");
    }

    let big = enumerate_allocations(12, 5)?;
    for ways in [[2, 2, 2, 3, 3], [8, 1, 1, 1, 1], [1, 1, 1, 1, 8]] {
        println!("{ways:?} is class {:?}", big.index_of(&ways));
    }
    Ok(())
}

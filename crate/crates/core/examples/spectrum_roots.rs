//! Rightmost characteristic roots and the delay at which the first example
//! loses stability.
//!
//! `cargo run --release --example spectrum_roots`

use tds_certify::model::builtin_example;
use tds_certify::spectrum::{converged_roots, crossing_delay};
use tds_certify::Error;

fn main() -> Result<(), Error> {
    for h in [0.3, 0.6, 0.7] {
        let est = converged_roots(&builtin_example(1, None, h)?)?;
        println!("example 1, h = {h}: abscissa {:+.6} (order {})", est.abscissa, est.collocation_order);
        for (re, im) in est.top(4) {
            println!("    {re:+.6} {im:+.6}i");
        }
    }
    let sys = builtin_example(1, None, 0.5)?;
    if let Some(hc) = crossing_delay(&sys, 0.5, 0.7, 1e-8)? {
        let exact = 3f64.sqrt().atan() / 3f64.sqrt();
        println!("crossing at h = {hc:.8}; atan(√3)/√3 = {exact:.8}");
    }
    let ex2 = builtin_example(2, None, 1.0)?;
    if let Some(hc) = crossing_delay(&ex2, 1.0, 2.0, 1e-8)? {
        println!("example 2 crossing at h = {hc:.6}");
    }
    Ok(())
}

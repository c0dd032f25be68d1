//! Maximal allowable delay for the first two worked examples at orders 1–3.
//!
//! `cargo run --release --example max_delay_table`

use std::time::Instant;

use tds_certify::lmi::{max_delay, InteriorPoint};
use tds_certify::model::builtin_example;
use tds_certify::{Error, Tolerances};

fn main() -> Result<(), Error> {
    let tol = Tolerances::default();
    let ipm = InteriorPoint::default();
    let start = Instant::now();
    println!("{:<8} {:>3} {:>10} {:>7}", "system", "n", "h_max", "iters");
    for id in [1u8, 2] {
        let sys = builtin_example(id, None, 1.0)?;
        for n in 1..=3 {
            let cell = match max_delay(&sys, n, 0.01, 5.0, &ipm, &tol) {
                Ok(r) => format!("{:>10.4} {:>7}", r.h_max, r.iterations),
                Err(Error::InfeasibleAtLowerBound { .. }) => format!("{:>10} {:>7}", "−", "-"),
                Err(e) => return Err(e),
            };
            println!("{:<8} {:>3} {cell}", format!("ex{id}"), n);
        }
    }
    println!("boundary of example 1: atan(√3)/√3 = {:.4}", 3f64.sqrt().atan() / 3f64.sqrt());
    println!("elapsed {:.1?}", start.elapsed());
    Ok(())
}

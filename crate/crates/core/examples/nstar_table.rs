//! Explicit necessity order `N*` for the first two examples, next to the
//! first order at which the converse certificate actually works.
//!
//! `cargo run --release --example nstar_table`

use tds_certify::converse::{empirical_order, estimate_n_star};
use tds_certify::format::fmt_order;
use tds_certify::lyapunov::{build_kernel, WeightTriple};
use tds_certify::model::builtin_example;
use tds_certify::{Error, Tolerances};

fn main() -> Result<(), Error> {
    let tol = Tolerances::default();
    let hs = [0.1, 0.5, 1.0, 2.0];
    println!("{:<6} {:>6} {:>10} {:>6}", "system", "h", "N*", "n_emp");
    for id in [1u8, 2] {
        for h in hs {
            let sys = builtin_example(id, None, h)?;
            let ns = estimate_n_star(&sys, &tol)?;
            let kernel = build_kernel(&sys, &WeightTriple::balanced(&sys), &tol)?;
            let n_emp = empirical_order(&kernel, 25, &tol)?.map_or("−".to_string(), |n| n.to_string());
            println!("{:<6} {:>6} {:>10} {:>6}", format!("ex{id}"), h, fmt_order(ns.value), n_emp);
        }
    }
    println!("(example 1 is unstable beyond h ≈ 0.6046, so no certificate exists there)");
    Ok(())
}

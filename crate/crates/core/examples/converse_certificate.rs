//! Builds order-n certificates directly from the delay Lyapunov matrix of a
//! stable system and checks them, without any optimisation.
//!
//! `cargo run --release --example converse_certificate`

use tds_certify::converse::{build_certificate, error_bounds, mu_margins};
use tds_certify::lmi::certificate_margins;
use tds_certify::lyapunov::{build_kernel, WeightTriple};
use tds_certify::model::builtin_example;
use tds_certify::{Error, Tolerances};

fn main() -> Result<(), Error> {
    let tol = Tolerances::default();
    for h in [0.3, 0.7] {
        let sys = builtin_example(1, None, h)?;
        let kernel = build_kernel(&sys, &WeightTriple::balanced(&sys), &tol)?;
        println!("example 1, h = {h}");
        println!("{:>4} {:>12} {:>12} {:>12}", "n", "λmin(Φ⁺)", "λmin(−Φ⁻)", "μ₁");
        for n in [1, 2, 3, 5, 8, 12] {
            let cert = build_certificate(&kernel, n, &tol)?;
            let m = certificate_margins(&sys, &cert)?;
            let mu = mu_margins(&error_bounds(&kernel, n), &sys, &kernel.weights)?;
            println!("{n:>4} {:>12.4e} {:>12.4e} {:>12.4e}", m.phi_plus, m.phi_minus, mu.mu1);
        }
    }
    println!("μ is a worst-case guarantee; it stays negative long after the certificate works.");
    Ok(())
}

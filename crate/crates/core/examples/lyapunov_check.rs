//! Residuals of the delay Lyapunov matrix on the three examples, and `U(θ)`
//! sampled on `[−h, h]` for the scalar one.
//!
//! `cargo run --release --example lyapunov_check`

use tds_certify::lyapunov::{build_kernel, residuals, WeightTriple};
use tds_certify::model::builtin_example;
use tds_certify::{Error, Tolerances};

fn main() -> Result<(), Error> {
    let tol = Tolerances::default();
    for (id, lambda, h) in [(1u8, None, 0.3), (2, None, 0.5), (3, Some(2.0), 0.5)] {
        let sys = builtin_example(id, lambda, h)?;
        let k = build_kernel(&sys, &WeightTriple::identity(sys.nx, sys.nz), &tol)?;
        let r = residuals(&k, 201)?;
        println!(
            "ex{id} h={h}: ode {:.1e} boundary {:.1e} symmetry {:.1e} jump {:.1e} cond(𝒩) {:.1e}",
            r.ode, r.boundary, r.symmetry, r.jump, r.cond_n
        );
    }
    let sys = builtin_example(1, None, 0.3)?;
    let k = build_kernel(&sys, &WeightTriple::identity(1, 1), &tol)?;
    println!("\nexample 1, h = 0.3");
    for i in 0..=12 {
        let theta = -0.3 + 0.6 * i as f64 / 12.0;
        println!("U({theta:+.3}) = {:.6}", k.u(theta)?[(0, 0)]);
    }
    Ok(())
}

//! The Bessel–Legendre inequality on a few test functions: the slack shrinks
//! as the order grows and vanishes for polynomials of degree below `n`.
//!
//! `cargo run --release --example bessel_inequality`

use tds_certify::legendre::{bessel_gap, gauss_rule, LegendreBasis};
use tds_certify::{Error, Matrix};

fn main() -> Result<(), Error> {
    let h = 1.0;
    let s = Matrix::identity(1, 1);
    let rule = gauss_rule(64);
    let funcs: [(&str, fn(f64) -> f64); 3] = [
        ("sin(5θ)", |t| (5.0 * t).sin()),
        ("e^{2θ}", |t| (2.0 * t).exp()),
        ("θ³ − θ", |t| t.powi(3) - t),
    ];
    print!("{:>4}", "n");
    for (name, _) in &funcs {
        print!(" {name:>12}");
    }
    println!();
    for n in 1..=6 {
        let basis = LegendreBasis::new(n, 1)?;
        print!("{n:>4}");
        for (_, f) in &funcs {
            let gap = bessel_gap(|t| Matrix::from_element(1, 1, f(t)), &s, &basis, h, &rule)?;
            print!(" {gap:>12.3e}");
        }
        println!();
    }
    Ok(())
}

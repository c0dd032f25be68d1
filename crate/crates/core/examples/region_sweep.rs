//! Feasibility of the third example over a coarse `(λ, h)` grid at orders 1
//! and 2, drawn as a character map next to the spectral verdict.
//!
//! `cargo run --release --example region_sweep`
//! (`TDS_CERTIFY_THREADS` caps the worker count.)

use tds_certify::lmi::{region_sweep, InteriorPoint, RegionGrid, Verdict};
use tds_certify::model::builtin_example;
use tds_certify::spectrum::{is_stable, Stability};
use tds_certify::{Error, Tolerances};

fn main() -> Result<(), Error> {
    let tol = Tolerances::default();
    let lambdas: Vec<f64> = (0..12).map(|i| 0.1 + 9.9 * i as f64 / 11.0).collect();
    let hs: Vec<f64> = (0..16).map(|i| 0.2 + 2.8 * i as f64 / 15.0).collect();
    let grid = RegionGrid::new(lambdas.clone(), hs.clone())?;
    let ipm = InteriorPoint::default();
    let r1 = region_sweep(&grid, 1, &ipm, &tol);
    let r2 = region_sweep(&grid, 2, &ipm, &tol);

    println!("rows: λ; columns: h from {} to {}", hs[0], hs[hs.len() - 1]);
    println!("'#' feasible at n=1, '+' only at n=2, '.' stable but not certified, ' ' unstable");
    for (i, &l) in lambdas.iter().enumerate() {
        let mut line = String::new();
        for (j, &h) in hs.iter().enumerate() {
            let k = i * hs.len() + j;
            let c = if r1[k].verdict == Verdict::Feasible {
                '#'
            } else if r2[k].verdict == Verdict::Feasible {
                '+'
            } else {
                match is_stable(&builtin_example(3, Some(l), h)?, tol.spectrum_margin)?.verdict {
                    Stability::Stable => '.',
                    Stability::Boundary => '?',
                    Stability::Unstable => ' ',
                }
            };
            line.push(c);
        }
        println!("{l:>6.2} |{line}|");
    }
    Ok(())
}

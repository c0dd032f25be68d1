//! Feasibility over a `(λ, h)` grid of the parametric third example.

use std::io::Write;

use rayon::prelude::*;

use super::feasibility::{solve_feasibility, Verdict};
use super::sdp::SdpBackend;
use crate::config::{sweep_pool, Tolerances};
use crate::error::{Error, Result};
use crate::format::fmt_num;
use crate::model::builtin_example;

#[derive(Debug, Clone, PartialEq)]
pub struct RegionGrid {
    pub lambdas: Vec<f64>,
    pub hs: Vec<f64>,
}

pub fn linspace(lo: f64, hi: f64, count: usize) -> Vec<f64> {
    match count {
        0 => Vec::new(),
        1 => vec![lo],
        _ => (0..count)
            .map(|i| lo + (hi - lo) * i as f64 / (count - 1) as f64)
            .collect(),
    }
}

impl RegionGrid {
    pub fn new(lambdas: Vec<f64>, hs: Vec<f64>) -> Result<Self> {
        if lambdas.is_empty() || hs.is_empty() {
            return Err(Error::Input("region grid must be non-empty".into()));
        }
        if hs.iter().any(|&h| !(h > 0.0)) {
            return Err(Error::Input("grid delays must be positive".into()));
        }
        Ok(Self { lambdas, hs })
    }

    /// Cells in row-major order: λ outer, h inner.
    pub fn cells(&self) -> Vec<(f64, f64)> {
        self.lambdas
            .iter()
            .flat_map(|&l| self.hs.iter().map(move |&h| (l, h)))
            .collect()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct RegionCell {
    pub lambda: f64,
    pub h: f64,
    pub n: usize,
    pub verdict: Verdict,
    pub margin: f64,
}

/// Evaluates every cell independently (in parallel, capped by
/// `TDS_CERTIFY_THREADS`); output order follows [`RegionGrid::cells`].
/// Per-cell errors become `Indeterminate`.
pub fn region_sweep(
    grid: &RegionGrid,
    n: usize,
    backend: &dyn SdpBackend,
    tol: &Tolerances,
) -> Vec<RegionCell> {
    let cells = grid.cells();
    let eval = |&(lambda, h): &(f64, f64)| {
        let rep = builtin_example(3, Some(lambda), h)
            .and_then(|sys| solve_feasibility(&sys, n, backend, tol));
        match rep {
            Ok(r) => RegionCell {
                lambda,
                h,
                n,
                verdict: r.verdict,
                margin: r.margin,
            },
            Err(_) => RegionCell {
                lambda,
                h,
                n,
                verdict: Verdict::Indeterminate,
                margin: f64::NAN,
            },
        }
    };
    sweep_pool().install(|| cells.par_iter().map(eval).collect())
}

pub fn write_region_csv(cells: &[RegionCell], mut out: impl Write) -> std::io::Result<()> {
    writeln!(out, "lambda,h,n,verdict,margin")?;
    for c in cells {
        writeln!(
            out,
            "{},{},{},{},{}",
            fmt_num(c.lambda),
            fmt_num(c.h),
            c.n,
            c.verdict.as_str(),
            fmt_num(c.margin)
        )?;
    }
    Ok(())
}

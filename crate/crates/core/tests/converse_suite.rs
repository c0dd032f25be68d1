mod common;

use common::{grid_sup, random_history};
use tds_certify::converse::{
    build_certificate, certificate_functional_value, error_bounds, estimate_n_star, mu_margins,
    nstar_sweep, project_u, projection_residual_terms, psi_n, ProjectionSet,
};
use tds_certify::legendre::gauss_rule;
use tds_certify::lmi::{certificate_margins, RegionGrid};
use tds_certify::lyapunov::{build_kernel, LyapunovKernel, WeightTriple};
use tds_certify::model::builtin_example;
use tds_certify::numerics::{lambda_min, norm2};
use tds_certify::{Matrix, Tolerances};

fn kernel(id: u8, h: f64, w: Option<WeightTriple>) -> LyapunovKernel {
    let sys = builtin_example(id, None, h).unwrap();
    let w = w.unwrap_or_else(|| WeightTriple::identity(sys.nx, sys.nz));
    build_kernel(&sys, &w, &Tolerances::default()).unwrap()
}

fn projections(k: &LyapunovKernel, n: usize) -> ProjectionSet {
    project_u(k, n, &gauss_rule(Tolerances::default().quad_points_for(n))).unwrap()
}

fn l2_error1(k: &LyapunovKernel, p: &ProjectionSet) -> f64 {
    let h = k.h();
    gauss_rule(64)
        .on(-h, 0.0)
        .map(|(t, w)| w * p.error1(k, t).unwrap().norm_squared())
        .sum()
}

#[test]
fn sampled_errors_respect_uniform_bounds() {
    for (id, h) in [(1u8, 0.3), (2, 0.5)] {
        let k = kernel(id, h, None);
        let mut prev = [f64::INFINITY; 3];
        for n in [6, 10, 20] {
            let p = projections(&k, n);
            let b = error_bounds(&k, n);
            let e1 = grid_sup(-h, 0.0, 401, |t| p.error1(&k, t).unwrap());
            let e2 = grid_sup(-h, -1e-9, 401, |t| p.error1_deriv(&k, t).unwrap());
            let e3 = grid_sup(-h, h, 801, |t| p.error2(&k, t).unwrap());
            assert!(e1 <= b.u1bar && e2 <= b.u2bar && e3 <= b.u3bar, "ex {id} n {n}: {e1} {e2} {e3} vs {b:?}");
            // below the round-off floor "decreasing" has no meaning
            let floor = 1e-9 * norm2(&k.w);
            for (cur, old) in [e1, e2, e3].iter().zip(prev.iter()) {
                assert!(cur < old || *cur <= floor, "ex {id} n {n}: not decreasing {:?} after {:?}", [e1, e2, e3], prev);
            }
            prev = [e1, e2, e3];
        }
    }
}

#[test]
fn second_error_is_transpose_symmetric() {
    let k = kernel(2, 0.5, None);
    let p = projections(&k, 5);
    for i in 0..=20 {
        let t = 0.5 * i as f64 / 20.0;
        let d = p.error2(&k, t).unwrap() - p.error2(&k, -t).unwrap().transpose();
        assert!(d.amax() < 1e-9, "θ = {t}: {}", d.amax());
    }
}

#[test]
fn l2_error_decreases_with_order() {
    let k = kernel(1, 0.3, None);
    let errs: Vec<f64> = (1..=8).map(|n| l2_error1(&k, &projections(&k, n))).collect();
    assert!(errs.windows(2).all(|w| w[1] <= w[0]), "{errs:?}");
}

#[test]
fn projection_is_first_order_optimal() {
    let k = kernel(2, 0.5, None);
    let n = 4;
    let p = projections(&k, n);
    let base = l2_error1(&k, &p);
    let mut r = common::lcg(3);
    for _ in 0..10 {
        let mut q = p.clone();
        q.u1n += Matrix::from_fn(p.u1n.nrows(), p.u1n.ncols(), |_, _| 1e-4 * r());
        assert!(l2_error1(&k, &q) >= base);
    }
}

#[test]
fn truncation_identity() {
    // 𝒱(φ) − 𝒱_n(φ) is exactly the projection-residual part
    let h = 0.3;
    let k = kernel(1, h, None);
    let sys = &k.sys;
    let rule = gauss_rule(48);
    for n in [1, 3, 6] {
        let p = projections(&k, n);
        let cert = build_certificate(&k, n, &Tolerances::default()).unwrap();
        let poly = move |t: f64| Matrix::from_element(1, 1, (0..n).map(|d| (t / h).powi(d as i32) * (1.0 - 0.3 * d as f64)).sum());
        let smooth = random_history(1, h, 11);
        for phi in [Box::new(poly) as Box<dyn Fn(f64) -> Matrix>, Box::new(smooth)] {
            let full = k.complete_functional_value(&phi, &rule).unwrap();
            let trunc = certificate_functional_value(sys, &cert, &phi, &rule).unwrap();
            let rest = projection_residual_terms(&k, &p, &phi, &rule).unwrap();
            assert!((full - trunc - rest).abs() < 1e-8 * (1.0 + full.abs()), "n {n}: {full} {trunc} {rest}");
        }
    }
}

#[test]
fn psi_is_the_derivative_kernel() {
    // Ψ_n(θ) with vanishing projection errors reduces to diag(W₁, W₂/h, W₃)
    let k = kernel(2, 0.5, None);
    let p = projections(&k, 30);
    let w = &k.weights;
    let psi = psi_n(&k, &p, -0.2).unwrap();
    let target = tds_certify::numerics::block_diag(&[&w.w1, &(&w.w2 / 0.5), &w.w3]);
    assert!((psi - target).amax() < 1e-3);
}

#[test]
fn converse_certificate_is_positive_for_stable_example() {
    let h = 0.3;
    let sys = builtin_example(1, None, h).unwrap();
    let k = build_kernel(&sys, &WeightTriple::balanced(&sys), &Tolerances::default()).unwrap();
    for n in 1..=8 {
        let cert = build_certificate(&k, n, &Tolerances::default()).unwrap();
        let m = certificate_margins(&sys, &cert).unwrap();
        assert!(m.phi_plus > 0.0, "n {n}: {m:?}");
    }
}

#[test]
fn positive_mu_implies_negative_phi_minus() {
    // example 1, h = 0.1, at order N* with the η-split weights of N*
    let h = 0.1;
    let sys = builtin_example(1, None, h).unwrap();
    let tol = Tolerances::default();
    let ns = estimate_n_star(&sys, &tol).unwrap();
    let n = ns.value as usize;
    let w = WeightTriple {
        w1: Matrix::identity(1, 1) * ns.eta[0],
        w2: Matrix::identity(1, 1) * (ns.eta[1] / h),
        w3: Matrix::identity(1, 1) * ns.eta[2],
    };
    let k = build_kernel(&sys, &w, &tol).unwrap();
    let mu = mu_margins(&error_bounds(&k, n), &sys, &w).unwrap();
    assert!(mu.all_positive(), "{mu:?}");
    let cert = build_certificate(&k, n, &tol).unwrap();
    let m = certificate_margins(&sys, &cert).unwrap();
    assert!(m.phi_minus > 0.0, "{m:?}");
}

#[test]
fn example_two_short_delay_margins() {
    let h = 0.1;
    let k = kernel(2, h, None);
    let mu = mu_margins(&error_bounds(&k, 6), &k.sys, &k.weights).unwrap();
    assert!(mu.all_positive(), "{mu:?}");
}

#[test]
fn nstar_grows_with_delay() {
    let grid = RegionGrid::new(vec![0.1, 1.0], (1..=6).map(|i| 0.05 * i as f64).collect()).unwrap();
    let cells = nstar_sweep(&grid, &Tolerances::default());
    for row in cells.chunks(6) {
        let v: Vec<f64> = row.iter().map(|c| c.nstar.unwrap()).collect();
        assert!(v.windows(2).all(|w| w[1] >= w[0]), "{v:?}");
    }
    let min = cells.iter().filter_map(|c| c.nstar).fold(f64::INFINITY, f64::min);
    assert_eq!(cells[0].nstar, Some(min));
}

#[test]
fn nstar_is_larger_near_a_crossing() {
    let sys = builtin_example(3, Some(5.0), 0.1).unwrap();
    let hc = tds_certify::spectrum::crossing_delay(&sys, 0.05, 1.0, 1e-6).unwrap().unwrap();
    let tol = Tolerances::default();
    let at = |h: f64| estimate_n_star(&sys.with_delay(h).unwrap(), &tol).map(|n| n.value);
    let near = at(hc - 1e-3).unwrap();
    let far = at(hc - 0.1).unwrap();
    assert!(near > far, "{near} vs {far}");
}

#[test]
fn derivative_bound_constants_are_positive() {
    let k = kernel(1, 0.3, None);
    let (rho, rhop) = k.derivative_bounds();
    assert!(rho > 0.0 && rhop > 0.0);
    let wn = norm2(&k.w);
    assert!(lambda_min(&k.weights.w1).unwrap() > 0.0 && wn > 0.0);
}

//! Test-only oracles shared by the integration suites.
#![allow(dead_code)]

use tds_certify::model::TdsSystem;
use tds_certify::Matrix;

/// Fixed-step RK4 solution of `ẋ = Ax + A_d x(t−h)` by the method of steps,
/// with cubic Hermite dense output (stored values and slopes) so delayed
/// arguments between grid points stay fourth-order accurate.
pub struct Trajectory {
    pub h: f64,
    pub dt: f64,
    t0_index: usize,
    xs: Vec<Matrix>,
    dxs: Vec<Matrix>,
}

impl Trajectory {
    /// Integrates on `[0, t_end]` from the history `phi` on `[−h, 0]`, with
    /// `h / steps_per_delay` as the step.
    pub fn simulate(sys: &TdsSystem, phi: impl Fn(f64) -> Matrix, t_end: f64, steps_per_delay: usize) -> Self {
        let h = sys.h;
        let dt = h / steps_per_delay as f64;
        let m = steps_per_delay;
        let mut traj = Trajectory {
            h,
            dt,
            t0_index: m,
            xs: Vec::new(),
            dxs: Vec::new(),
        };
        // history samples; slopes by a centred difference of phi
        for k in 0..=m {
            let t = -h + k as f64 * dt;
            traj.xs.push(phi(t));
            let e = 1e-6 * h;
            let lo = (t - e).max(-h);
            let hi = (t + e).min(0.0);
            traj.dxs.push((phi(hi) - phi(lo)) / (hi - lo));
        }
        let rhs = |x: &Matrix, xd: &Matrix| &sys.a * x + &sys.ad * xd;
        // the slope at 0⁺ follows the equation, not the history
        traj.dxs[m] = rhs(&traj.xs[m], &traj.xs[0]);
        let steps = (t_end / dt).ceil() as usize;
        for k in 0..steps {
            let t = k as f64 * dt;
            let x = traj.xs.last().unwrap().clone();
            let d0 = traj.at(t - h);
            let dm = traj.at(t - h + 0.5 * dt);
            let d1 = traj.at(t - h + dt);
            let k1 = rhs(&x, &d0);
            let k2 = rhs(&(&x + &k1 * (0.5 * dt)), &dm);
            let k3 = rhs(&(&x + &k2 * (0.5 * dt)), &dm);
            let k4 = rhs(&(&x + &k3 * dt), &d1);
            let xn = &x + (k1 + k2 * 2.0 + k3 * 2.0 + k4) * (dt / 6.0);
            let slope = rhs(&xn, &d1);
            traj.xs.push(xn);
            traj.dxs.push(slope);
        }
        traj
    }

    pub fn t_end(&self) -> f64 {
        (self.xs.len() - 1 - self.t0_index) as f64 * self.dt
    }

    /// `x(t)` for `t ∈ [−h, t_end]`.
    pub fn at(&self, t: f64) -> Matrix {
        let s = (t + self.h) / self.dt;
        let last = self.xs.len() - 1;
        let i = (s.floor().max(0.0) as usize).min(last.saturating_sub(1));
        let u = s - i as f64;
        if u.abs() < 1e-12 {
            return self.xs[i].clone();
        }
        let (h00, h10, h01, h11) = (
            2.0 * u.powi(3) - 3.0 * u * u + 1.0,
            u.powi(3) - 2.0 * u * u + u,
            -2.0 * u.powi(3) + 3.0 * u * u,
            u.powi(3) - u * u,
        );
        &self.xs[i] * h00 + &self.dxs[i] * (h10 * self.dt) + &self.xs[i + 1] * h01 + &self.dxs[i + 1] * (h11 * self.dt)
    }

    /// The state segment `θ ↦ x(t+θ)`, `θ ∈ [−h, 0]`.
    pub fn segment(&self, t: f64) -> impl Fn(f64) -> Matrix + '_ {
        move |theta| self.at(t + theta)
    }
}

/// Deterministic pseudo-random numbers for test fixtures.
pub fn lcg(seed: u64) -> impl FnMut() -> f64 {
    let mut state = seed.wrapping_mul(6364136223846793005).wrapping_add(1442695040888963407);
    move || {
        state = state.wrapping_mul(6364136223846793005).wrapping_add(1442695040888963407);
        ((state >> 11) as f64 / (1u64 << 53) as f64) * 2.0 - 1.0
    }
}

/// A smooth random history `φ(θ) = Σ_k c_k cos(kπθ/h + p_k)`.
pub fn random_history(nx: usize, h: f64, seed: u64) -> impl Fn(f64) -> Matrix {
    let mut r = lcg(seed);
    let coeffs: Vec<(f64, f64, usize)> = (0..3 * nx).map(|i| (r(), r() * 3.0, i % nx)).collect();
    move |theta| {
        let mut v = Matrix::zeros(nx, 1);
        for (k, &(c, p, row)) in coeffs.iter().enumerate() {
            v[(row, 0)] += c * ((k / nx) as f64 * std::f64::consts::PI * theta / h + p).cos();
        }
        v
    }
}

/// Sup of `‖f(θ)‖₂` over `count` equispaced points of `[a, b]`.
pub fn grid_sup(a: f64, b: f64, count: usize, mut f: impl FnMut(f64) -> Matrix) -> f64 {
    (0..count)
        .map(|i| {
            let t = a + (b - a) * i as f64 / (count - 1) as f64;
            tds_certify::numerics::norm2(&f(t))
        })
        .fold(0.0, f64::max)
}

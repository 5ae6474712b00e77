//! Shared oracles for the integration and acceptance suites.
//!
//! Everything here is deliberately independent of the library's solution
//! path: the eigenfrequencies come from shooting the fourth-order ODE with a
//! Dormand-Prince integrator and bisecting the boundary determinant, and the
//! closed-form checks are written directly from the amplitude/phase
//! representations.

#![allow(dead_code)]

use std::collections::HashMap;
use std::sync::{Arc, Mutex, OnceLock};

use resbasis::basis::{basis_up_to, residual_system, BasisMode, FunctionalParams, ModeConstants};
use resbasis::fields::ShellGeometry;
use resbasis::quadrature::QuadratureSpec;

pub fn shell() -> ShellGeometry {
    ShellGeometry::unit_shell()
}

pub fn quad_spec() -> QuadratureSpec {
    QuadratureSpec::default()
}

// ---------------------------------------------------------------------------
// Shared mode fixtures (solving 100 modes is not free; tests share results)
// ---------------------------------------------------------------------------

type ModeStore = Mutex<HashMap<(u64, usize), Arc<OnceLock<Arc<Vec<ModeConstants>>>>>>;

fn mode_cell(p: f64, n: usize) -> Arc<OnceLock<Arc<Vec<ModeConstants>>>> {
    static STORE: OnceLock<ModeStore> = OnceLock::new();
    let store = STORE.get_or_init(|| Mutex::new(HashMap::new()));
    let mut guard = store.lock().expect("mode store poisoned");
    guard.entry((p.to_bits(), n)).or_default().clone()
}

/// Constants of modes `1..=n` at strip coordinate `p`, cached per `(p, n)`.
pub fn mode_constants(p: f64, n: usize) -> Arc<Vec<ModeConstants>> {
    let cell = mode_cell(p, n);
    cell.get_or_init(|| {
        let params = FunctionalParams::new(p, 0.0).expect("valid p");
        let modes = basis_up_to(&params, n, shell(), &quad_spec()).expect("basis solve");
        Arc::new(modes.into_iter().map(|m| m.constants().clone()).collect())
    })
    .clone()
}

/// Assembled modes at `(p, k)`, reusing the cached constants (which depend on
/// `p` only).
pub fn modes_at(p: f64, k: f64, n: usize) -> Vec<BasisMode> {
    let params = FunctionalParams::new(p, k).expect("valid params");
    mode_constants(p, n)
        .iter()
        .map(|c| BasisMode::new(c.clone(), params, shell()))
        .collect()
}

// ---------------------------------------------------------------------------
// Dormand-Prince 5(4) adaptive integrator
// ---------------------------------------------------------------------------

/// Integrate `y' = f(t, y)` from `t0` to `t1` with adaptive step control.
pub fn dopri5(
    f: &dyn Fn(f64, &[f64]) -> Vec<f64>,
    t0: f64,
    y0: &[f64],
    t1: f64,
    rtol: f64,
    atol: f64,
) -> Vec<f64> {
    const A: [[f64; 6]; 6] = [
        [1.0 / 5.0, 0.0, 0.0, 0.0, 0.0, 0.0],
        [3.0 / 40.0, 9.0 / 40.0, 0.0, 0.0, 0.0, 0.0],
        [44.0 / 45.0, -56.0 / 15.0, 32.0 / 9.0, 0.0, 0.0, 0.0],
        [
            19372.0 / 6561.0,
            -25360.0 / 2187.0,
            64448.0 / 6561.0,
            -212.0 / 729.0,
            0.0,
            0.0,
        ],
        [
            9017.0 / 3168.0,
            -355.0 / 33.0,
            46732.0 / 5247.0,
            49.0 / 176.0,
            -5103.0 / 18656.0,
            0.0,
        ],
        [
            35.0 / 384.0,
            0.0,
            500.0 / 1113.0,
            125.0 / 192.0,
            -2187.0 / 6784.0,
            11.0 / 84.0,
        ],
    ];
    const C: [f64; 6] = [1.0 / 5.0, 3.0 / 10.0, 4.0 / 5.0, 8.0 / 9.0, 1.0, 1.0];
    // Fifth-order weights equal the last A row; these are the fourth-order
    // companion weights used for the error estimate.
    const B4: [f64; 7] = [
        5179.0 / 57600.0,
        0.0,
        7571.0 / 16695.0,
        393.0 / 640.0,
        -92097.0 / 339200.0,
        187.0 / 2100.0,
        1.0 / 40.0,
    ];

    let dim = y0.len();
    let mut t = t0;
    let mut y = y0.to_vec();
    let span = t1 - t0;
    let mut h = span / 100.0;
    let mut k = vec![vec![0.0; dim]; 7];
    let mut steps = 0usize;

    while t < t1 {
        steps += 1;
        assert!(steps < 1_000_000, "dopri5: step budget exhausted");
        if t + h > t1 {
            h = t1 - t;
        }
        k[0] = f(t, &y);
        for stage in 0..6 {
            let mut ys = y.clone();
            for (j, kj) in k.iter().enumerate().take(stage + 1) {
                let a = A[stage][j];
                if a != 0.0 {
                    for i in 0..dim {
                        ys[i] += h * a * kj[i];
                    }
                }
            }
            k[stage + 1] = f(t + C[stage] * h, &ys);
        }
        // k[6] is the derivative at the fifth-order solution point.
        let mut y5 = y.clone();
        for (j, kj) in k.iter().enumerate().take(6) {
            let a = A[5][j];
            if a != 0.0 {
                for i in 0..dim {
                    y5[i] += h * a * kj[i];
                }
            }
        }
        let mut err = 0.0f64;
        for i in 0..dim {
            let mut y4i = y[i];
            for (j, kj) in k.iter().enumerate() {
                if B4[j] != 0.0 {
                    y4i += h * B4[j] * kj[i];
                }
            }
            let scale = atol + rtol * y[i].abs().max(y5[i].abs());
            err = err.max(((y5[i] - y4i) / scale).abs());
        }
        if err <= 1.0 {
            t += h;
            y = y5;
        }
        let factor = if err > 0.0 { 0.9 * err.powf(-0.2) } else { 5.0 };
        h *= factor.clamp(0.2, 5.0);
        h = h.min(span);
    }
    y
}

// ---------------------------------------------------------------------------
// Shooting / bisection eigenfrequency oracle
// ---------------------------------------------------------------------------

/// Right side of the fourth-order mode ODE as a first-order system in
/// `[S, S', S'', S''']`:
/// `S'''' = -(8/r) S''' - (8/r^2 + w^2) S'' - (4 w^2 / r - 8 / r^3) S'`.
fn mode_ode(omega: f64) -> impl Fn(f64, &[f64]) -> Vec<f64> {
    move |r: f64, y: &[f64]| {
        let lambda = omega * omega;
        vec![
            y[1],
            y[2],
            y[3],
            -(8.0 / r) * y[3]
                - (8.0 / (r * r) + lambda) * y[2]
                - (4.0 * lambda / r - 8.0 / (r * r * r)) * y[1],
        ]
    }
}

/// Boundary determinant whose zeros are the eigenfrequencies: shoot the
/// two-dimensional space of solutions satisfying both conditions at `r_i`
/// (values `S(r_i) = 0`, `r_i S'' - (p - 4) S' = 0`) to `r_o` and demand a
/// nontrivial combination also satisfying them there.
pub fn boundary_determinant(omega: f64, p: f64, geometry: ShellGeometry) -> f64 {
    let (ri, ro) = (geometry.r_inner(), geometry.r_outer());
    let ode = mode_ode(omega);
    let v1 = dopri5(&ode, ri, &[0.0, 1.0, (p - 4.0) / ri, 0.0], ro, 1e-12, 1e-14);
    let v2 = dopri5(&ode, ri, &[0.0, 0.0, 0.0, 1.0], ro, 1e-12, 1e-14);
    let nb = |v: &[f64]| ro * v[2] - (p - 4.0) * v[1];
    v1[0] * nb(&v2) - v2[0] * nb(&v1)
}

/// First `n_max` eigenfrequencies at parameter `p`, by scanning the boundary
/// determinant on a fine omega grid and bisecting each sign change.
pub fn shooting_omegas(p: f64, geometry: ShellGeometry, n_max: usize) -> Vec<f64> {
    let width = geometry.width();
    let omega_hi = (n_max as f64 + 0.8) * std::f64::consts::PI / width;
    let step = 0.1;
    let mut omegas = Vec::with_capacity(n_max);
    let mut prev_omega = 2.0;
    let mut prev_det = boundary_determinant(prev_omega, p, geometry);
    let mut omega = prev_omega;
    while omega < omega_hi && omegas.len() < n_max {
        omega += step;
        let det = boundary_determinant(omega, p, geometry);
        if prev_det != 0.0 && det != 0.0 && prev_det.signum() != det.signum() {
            let mut lo = prev_omega;
            let mut hi = omega;
            let mut f_lo = prev_det;
            while hi - lo > 1e-12 {
                let mid = 0.5 * (lo + hi);
                let f_mid = boundary_determinant(mid, p, geometry);
                if f_mid == 0.0 {
                    lo = mid;
                    hi = mid;
                } else if f_mid.signum() == f_lo.signum() {
                    lo = mid;
                    f_lo = f_mid;
                } else {
                    hi = mid;
                }
            }
            omegas.push(0.5 * (lo + hi));
        }
        prev_omega = omega;
        prev_det = det;
    }
    omegas
}

// ---------------------------------------------------------------------------
// Closed-form amplitude/phase oracles (p = 0, c1 = c4 = 0)
// ---------------------------------------------------------------------------

/// `S_par = A_par sin(w r + theta_par)` with
/// `A_par = c0 sqrt(1 + w^2 r^2) / (w^3 r^3)`. Valid when `c3 w r > c2`, which
/// holds on the shell for every converged mode.
pub fn spar_amplitude_phase(constants: &ModeConstants, r: f64) -> f64 {
    let c = constants.c();
    let (c0, c2, c3) = (c[0], c[2], c[3]);
    let omega = constants.omega();
    let t = omega * r;
    assert!(c3 * t - c2 > 0.0, "asin branch precondition violated");
    let amp = c0 * (1.0 + t * t).sqrt() / (omega * omega * omega * r * r * r);
    let theta = ((c2 * t + c3) / (1.0 + t * t).sqrt()).asin();
    amp * (t + theta).sin()
}

/// `S_perp = A_perp cos(w r - theta_perp)` with
/// `A_perp = c0 sqrt(w^4 r^4 - w^2 r^2 + 1) / (2 w^3 r^3)` and the phase
/// resolved through both quadrature components (atan2), which fixes the
/// branch left ambiguous by a single inverse cosine.
pub fn sperp_amplitude_phase(constants: &ModeConstants, r: f64) -> f64 {
    let c = constants.c();
    let (c0, c2, c3) = (c[0], c[2], c[3]);
    let omega = constants.omega();
    let t = omega * r;
    let q = t * t * t * t - t * t + 1.0;
    let amp = c0 * q.sqrt() / (2.0 * omega * omega * omega * r * r * r);
    let cos_part = c3 * (t * t - 1.0) - c2 * t;
    let sin_part = c2 * (1.0 - t * t) - c3 * t;
    let theta = sin_part.atan2(cos_part);
    amp * (t - theta).cos()
}

/// `mu = -c0 (1 - beta) A_mu sin(w r + theta_mu) / (2 w r^2)` with
/// `A_mu = sqrt((1 + w^2 r^2)(c2^2 + c3^2))`.
pub fn mu_amplitude_phase(constants: &ModeConstants, beta: f64, r: f64) -> f64 {
    let c = constants.c();
    let (c0, c2, c3) = (c[0], c[2], c[3]);
    let omega = constants.omega();
    let t = omega * r;
    let amp = ((1.0 + t * t) * (c2 * c2 + c3 * c3)).sqrt();
    assert!(c3 * t - c2 > 0.0, "asin branch precondition violated");
    let theta = ((c3 + c2 * t) / amp).asin();
    -c0 * (1.0 - beta) * amp * (t + theta).sin() / (2.0 * omega * r * r)
}

// ---------------------------------------------------------------------------
// Test-side Newton on the public residual system
// ---------------------------------------------------------------------------

/// Plain Gaussian elimination (no reuse of the library's solver).
pub fn gauss_solve(mut a: Vec<Vec<f64>>, mut b: Vec<f64>) -> Option<Vec<f64>> {
    let n = b.len();
    for col in 0..n {
        let pivot = (col..n).max_by(|&i, &j| a[i][col].abs().total_cmp(&a[j][col].abs()))?;
        if a[pivot][col] == 0.0 {
            return None;
        }
        a.swap(col, pivot);
        b.swap(col, pivot);
        for row in col + 1..n {
            let f = a[row][col] / a[col][col];
            let (pivot_rows, tail) = a.split_at_mut(row);
            let pivot = &pivot_rows[col];
            for (dst, src) in tail[0].iter_mut().zip(pivot).skip(col) {
                *dst -= f * src;
            }
            b[row] -= f * b[col];
        }
    }
    for row in (0..n).rev() {
        let mut acc = b[row];
        for k in row + 1..n {
            acc -= a[row][k] * b[k];
        }
        b[row] = acc / a[row][row];
    }
    Some(b)
}

/// Residuals and finite-difference Jacobian of the public residual system.
pub fn residual_and_jacobian(
    x: &[f64; 6],
    p: f64,
    geometry: ShellGeometry,
    spec: &QuadratureSpec,
) -> ([f64; 6], Vec<Vec<f64>>) {
    let params = FunctionalParams::new(p, 0.0).expect("valid p");
    let res = residual_system(x, &params, geometry, spec).expect("residual evaluation");
    let mut jac = vec![vec![0.0; 6]; 6];
    for j in 0..6 {
        let h = 1e-7 * x[j].abs().max(1.0);
        let mut plus = *x;
        plus[j] += h;
        let mut minus = *x;
        minus[j] -= h;
        let rp = residual_system(&plus, &params, geometry, spec).expect("residual evaluation");
        let rm = residual_system(&minus, &params, geometry, spec).expect("residual evaluation");
        for i in 0..6 {
            jac[i][j] = (rp[i] - rm[i]) / (2.0 * h);
        }
    }
    (res, jac)
}

/// Undamped Newton iteration on the full six-equation system; an oracle for
/// the continuation output (which must be its fixed point).
pub fn newton_full_system(
    start: &[f64; 6],
    p: f64,
    geometry: ShellGeometry,
    spec: &QuadratureSpec,
) -> [f64; 6] {
    let mut x = *start;
    for _ in 0..50 {
        let (res, jac) = residual_and_jacobian(&x, p, geometry, spec);
        let norm = res.iter().fold(0.0f64, |a, v| a.max(v.abs()));
        if norm < 1e-13 {
            break;
        }
        let rhs: Vec<f64> = res.iter().map(|v| -v).collect();
        let step = gauss_solve(jac, rhs).expect("nonsingular Jacobian");
        for i in 0..6 {
            x[i] += step[i];
        }
    }
    x
}

pub fn sup_norm6(v: &[f64; 6]) -> f64 {
    v.iter().fold(0.0, |a, x| a.max(x.abs()))
}

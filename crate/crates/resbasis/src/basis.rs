//! Extremizer modes of the stress-gradient functional on the shell.
//!
//! The radial component of a mode has the closed form
//!
//! ```text
//! S_par(r) = c0/(w^3 r^3) * ( c1 + c4 r^3/r_o^3
//!                             + (c2 w r + c3) cos(w r) - (c2 - c3 w r) sin(w r) )
//! ```
//!
//! with `w = sqrt(lambda)` and `c1..c4` on the unit sphere. The six mode
//! constants solve the boundary/normalization system assembled in
//! [`residual_system`]. At `p = 0` the natural boundary conditions force
//! `c1 = c4 = 0` and a four-unknown Newton iteration determines
//! `(c0, c2, c3, w)`; for `p > 0` the constants are tracked by an
//! Euler-predictor / Newton-corrector continuation in `p`.
//!
//! Everything about a mode except the Lagrange multiplier `mu` depends on the
//! strip coordinates only through `p`; `mu` is affine in `k`.

use std::collections::HashMap;
use std::f64::consts::PI;

use thiserror::Error;

use crate::fields::{FieldError, RadialField, RadialProfile, ShellGeometry};
use crate::linalg::DenseMatrix;
use crate::quadrature::{integrate_vec, QuadratureError, QuadratureSpec};

/// Upper edge of the viable strip in the `p` coordinate.
pub const P_MAX: f64 = 5.0;

/// Newton iteration policy: convergence target, acceptance floor, damping.
const NEWTON_TOL: f64 = 1e-12;
const NEWTON_ACCEPT: f64 = 1e-10;
const NEWTON_MAX_ITER: usize = 100;
const NEWTON_MAX_HALVINGS: usize = 30;
const FD_STEP_SCALE: f64 = 1e-7;

/// Continuation policy: first step in `p`, smallest step before giving up,
/// and the Jacobian conditioning beyond which the branch is declared
/// degenerate.
const CONTINUATION_INITIAL_STEP: f64 = 0.05;
const CONTINUATION_MIN_STEP: f64 = 1e-4;
const CONTINUATION_MAX_STEP: f64 = 0.5;
const MAX_JACOBIAN_CONDITION: f64 = 1e12;

/// Two converged roots closer than this in `omega` count as the same mode.
const DUPLICATE_OMEGA_TOL: f64 = 1e-6;

#[derive(Error, Debug)]
pub enum BasisError {
    #[error("parameters (p={p}, k={k}) violate the strip constraint {constraint}")]
    OutsideStrip {
        p: f64,
        k: f64,
        constraint: &'static str,
    },

    #[error("mode index must be at least 1")]
    InvalidIndex,

    #[error("Newton iteration for mode {index_n} stalled at residual sup-norm {norm:e}")]
    NonConvergence { index_n: usize, norm: f64 },

    #[error(
        "mode {index_n} converged onto an already-found root at omega={omega} after all reseeds"
    )]
    DuplicateRoot { index_n: usize, omega: f64 },

    #[error("continuation Jacobian is numerically singular (condition {condition:e} at p={p})")]
    SingularJacobian { condition: f64, p: f64 },

    #[error("continuation corrector failed near p={p} even at the smallest step")]
    CorrectorFailed { p: f64 },

    #[error("continuation targets must be ascending values in [0, {P_MAX}]")]
    BadContinuationTargets,

    #[error(
        "mode frequencies are not strictly increasing: omega[{index_n}] = {omega} after {previous}"
    )]
    NonMonotoneFrequencies {
        index_n: usize,
        omega: f64,
        previous: f64,
    },

    #[error(transparent)]
    Field(#[from] FieldError),

    #[error(transparent)]
    Quadrature(#[from] QuadratureError),
}

/// Strip coordinates `(p, k) = (beta + gamma, 2 beta - gamma)` selecting a
/// member of the functional family.
///
/// The closed strip `0 <= p <= 5`, `k >= 0` is admitted by default: for
/// spherically symmetric fields the functional stays positive on the strip
/// boundary. [`FunctionalParams::new_strict`] enforces the open strip that
/// viability requires for general fields.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FunctionalParams {
    p: f64,
    k: f64,
}

impl FunctionalParams {
    pub fn new(p: f64, k: f64) -> Result<Self, BasisError> {
        let constraint = if p < 0.0 || p.is_nan() {
            Some("p >= 0")
        } else if p > P_MAX {
            Some("p <= 5")
        } else if k < 0.0 || k.is_nan() {
            Some("k >= 0")
        } else {
            None
        };
        match constraint {
            Some(constraint) => Err(BasisError::OutsideStrip { p, k, constraint }),
            None => Ok(Self { p, k }),
        }
    }

    /// Open-strip variant: `0 < p < 5`, `k > 0`.
    pub fn new_strict(p: f64, k: f64) -> Result<Self, BasisError> {
        let constraint = if p <= 0.0 || p.is_nan() {
            Some("p > 0")
        } else if p >= P_MAX {
            Some("p < 5")
        } else if k <= 0.0 || k.is_nan() {
            Some("k > 0")
        } else {
            None
        };
        match constraint {
            Some(constraint) => Err(BasisError::OutsideStrip { p, k, constraint }),
            None => Ok(Self { p, k }),
        }
    }

    pub fn p(&self) -> f64 {
        self.p
    }

    pub fn k(&self) -> f64 {
        self.k
    }

    /// `beta = (p + k) / 3`.
    pub fn beta(&self) -> f64 {
        (self.p + self.k) / 3.0
    }

    /// `gamma = (2p - k) / 3`.
    pub fn gamma(&self) -> f64 {
        (2.0 * self.p - self.k) / 3.0
    }
}

/// The constants `(c0..c4, omega)` that fully determine one mode, together
/// with its index and eigenvalue `lambda = omega^2`.
#[derive(Debug, Clone, PartialEq)]
pub struct ModeConstants {
    index_n: usize,
    omega: f64,
    c: [f64; 5],
    lambda: f64,
}

impl ModeConstants {
    pub fn new(index_n: usize, omega: f64, c: [f64; 5]) -> Self {
        assert!(index_n >= 1, "mode index starts at 1");
        assert!(omega > 0.0, "omega must be positive");
        Self {
            index_n,
            omega,
            c,
            lambda: omega * omega,
        }
    }

    pub fn index_n(&self) -> usize {
        self.index_n
    }

    pub fn omega(&self) -> f64 {
        self.omega
    }

    pub fn lambda(&self) -> f64 {
        self.lambda
    }

    /// `[c0, c1, c2, c3, c4]`.
    pub fn c(&self) -> &[f64; 5] {
        &self.c
    }

    /// The packed unknown vector `[c0, c1, c2, c3, c4, omega]`.
    pub fn as_vector(&self) -> [f64; 6] {
        [
            self.c[0], self.c[1], self.c[2], self.c[3], self.c[4], self.omega,
        ]
    }

    fn from_vector(index_n: usize, x: &[f64]) -> Self {
        Self::new(index_n, x[5], [x[0], x[1], x[2], x[3], x[4]])
    }
}

/// Trigonometric core shared by `S_par`, `mu`, and their derivatives:
/// `g(r) = (c2 w r + c3) cos(w r) + (c3 w r - c2) sin(w r)` and its first
/// four derivatives.
#[inline]
fn trig_core(c2: f64, c3: f64, omega: f64, r: f64) -> [f64; 5] {
    let t = omega * r;
    let (sin, cos) = t.sin_cos();
    let w2 = omega * omega;
    [
        (c2 * t + c3) * cos + (c3 * t - c2) * sin,
        w2 * r * (c3 * cos - c2 * sin),
        w2 * ((c3 - c2 * t) * cos - (c2 + c3 * t) * sin),
        w2 * omega * (-(2.0 * c2 + c3 * t) * cos - (2.0 * c3 - c2 * t) * sin),
        w2 * w2 * ((c2 * t - 3.0 * c3) * cos + (3.0 * c2 + c3 * t) * sin),
    ]
}

/// `S_par` and its first four radial derivatives at `r`.
pub(crate) fn spar_derivs(constants: &ModeConstants, r_outer: f64, r: f64) -> [f64; 5] {
    let [c0, c1, c2, c3, c4] = *constants.c();
    let omega = constants.omega();
    let scale = c0 / (omega * omega * omega);
    let g = trig_core(c2, c3, omega, r);
    let a = c1 + g[0]; // coefficient of r^-3
    let b = c4 / (r_outer * r_outer * r_outer); // constant part
    let inv_r = 1.0 / r;
    let h = inv_r * inv_r * inv_r;
    let h1 = -3.0 * h * inv_r;
    let h2 = 12.0 * h * inv_r * inv_r;
    let h3 = -60.0 * h * inv_r * inv_r * inv_r;
    let h4 = 360.0 * h * inv_r * inv_r * inv_r * inv_r;
    [
        scale * (a * h + b),
        scale * (g[1] * h + a * h1),
        scale * (g[2] * h + 2.0 * g[1] * h1 + a * h2),
        scale * (g[3] * h + 3.0 * g[2] * h1 + 3.0 * g[1] * h2 + a * h3),
        scale * (g[4] * h + 4.0 * g[3] * h1 + 6.0 * g[2] * h2 + 4.0 * g[1] * h3 + a * h4),
    ]
}

/// `(S_perp, S_perp', S_perp'')` from the `S_par` derivatives via equilibrium.
#[inline]
pub(crate) fn sperp_from_spar(r: f64, sp: &[f64; 5]) -> [f64; 3] {
    [
        sp[0] + 0.5 * r * sp[1],
        1.5 * sp[1] + 0.5 * r * sp[2],
        2.0 * sp[2] + 0.5 * r * sp[3],
    ]
}

/// Evaluate `(S_par, S_perp)` of a mode at radius `r`.
pub fn eval_mode(
    constants: &ModeConstants,
    geometry: ShellGeometry,
    r: f64,
) -> Result<(f64, f64), BasisError> {
    if !geometry.contains(r) {
        return Err(FieldError::OutsideShell {
            r,
            r_inner: geometry.r_inner(),
            r_outer: geometry.r_outer(),
        }
        .into());
    }
    let sp = spar_derivs(constants, geometry.r_outer(), r);
    Ok((sp[0], sp[0] + 0.5 * r * sp[1]))
}

/// Lagrange multiplier field of a mode:
///
/// `mu(r) = -c0/(2 w r^2) * ( c1 - 2 c4 r^3/r_o^3 + (1 - beta) g(r) )`
///
/// with `g` the trigonometric core of `S_par`. The sign of the `(1 - beta)`
/// term comes from the radial Euler-Lagrange equation itself; with it, `mu`
/// is affine in `k` and the Euler-Lagrange residual of a converged mode
/// vanishes. At `beta = 1` the field is purely algebraic, and at
/// `(p, k) = (0, 3)` it vanishes identically.
pub fn eval_mu(
    constants: &ModeConstants,
    params: &FunctionalParams,
    geometry: ShellGeometry,
    r: f64,
) -> Result<f64, BasisError> {
    if !geometry.contains(r) {
        return Err(FieldError::OutsideShell {
            r,
            r_inner: geometry.r_inner(),
            r_outer: geometry.r_outer(),
        }
        .into());
    }
    let [c0, c1, c2, c3, c4] = *constants.c();
    let omega = constants.omega();
    let ro3 = geometry.r_outer().powi(3);
    let g = trig_core(c2, c3, omega, r);
    let h = c1 - 2.0 * c4 * r * r * r / ro3 + (1.0 - params.beta()) * g[0];
    Ok(-c0 / (2.0 * omega * r * r) * h)
}

/// `mu'(r)`, analytic.
fn eval_mu_derivative(
    constants: &ModeConstants,
    params: &FunctionalParams,
    geometry: ShellGeometry,
    r: f64,
) -> f64 {
    let [c0, c1, c2, c3, c4] = *constants.c();
    let omega = constants.omega();
    let ro3 = geometry.r_outer().powi(3);
    let one_minus_beta = 1.0 - params.beta();
    let g = trig_core(c2, c3, omega, r);
    let h = c1 - 2.0 * c4 * r * r * r / ro3 + one_minus_beta * g[0];
    let dh = -6.0 * c4 * r * r / ro3 + one_minus_beta * g[1];
    -c0 / (2.0 * omega * r * r) * (dh - 2.0 * h / r)
}

/// A fully assembled basis mode: constants, parameters, and the stress field
/// as closed-form radial profiles.
#[derive(Debug, Clone)]
pub struct BasisMode {
    constants: ModeConstants,
    params: FunctionalParams,
    geometry: ShellGeometry,
    field: RadialField,
}

impl BasisMode {
    pub fn new(
        constants: ModeConstants,
        params: FunctionalParams,
        geometry: ShellGeometry,
    ) -> Self {
        let r_outer = geometry.r_outer();
        let (kv, kd) = (constants.clone(), constants.clone());
        let s_par = RadialProfile::new(
            move |r| spar_derivs(&kv, r_outer, r)[0],
            move |r| spar_derivs(&kd, r_outer, r)[1],
            Vec::new(),
        )
        .expect("no breakpoints");
        let (pv, pd) = (constants.clone(), constants.clone());
        let s_perp = RadialProfile::new(
            move |r| {
                let sp = spar_derivs(&pv, r_outer, r);
                sp[0] + 0.5 * r * sp[1]
            },
            move |r| {
                let sp = spar_derivs(&pd, r_outer, r);
                1.5 * sp[1] + 0.5 * r * sp[2]
            },
            Vec::new(),
        )
        .expect("no breakpoints");
        let field = RadialField::new(s_par, s_perp, geometry).expect("no breakpoints");
        Self {
            constants,
            params,
            geometry,
            field,
        }
    }

    pub fn constants(&self) -> &ModeConstants {
        &self.constants
    }

    pub fn params(&self) -> &FunctionalParams {
        &self.params
    }

    pub fn geometry(&self) -> ShellGeometry {
        self.geometry
    }

    pub fn field(&self) -> &RadialField {
        &self.field
    }

    pub fn mu(&self, r: f64) -> Result<f64, BasisError> {
        eval_mu(&self.constants, &self.params, self.geometry, r)
    }
}

/// Residuals of the two reduced Euler-Lagrange equations at an interior
/// radius, using the mode's own `mu` and `lambda = omega^2`. Both vanish for
/// a converged mode.
pub fn el_residual(mode: &BasisMode, r: f64) -> Result<(f64, f64), BasisError> {
    let geometry = mode.geometry();
    if !(r > geometry.r_inner() && r < geometry.r_outer()) {
        return Err(FieldError::OutsideShell {
            r,
            r_inner: geometry.r_inner(),
            r_outer: geometry.r_outer(),
        }
        .into());
    }
    let constants = mode.constants();
    let params = mode.params();
    let beta = params.beta();
    let lambda = constants.lambda();
    let sp = spar_derivs(constants, geometry.r_outer(), r);
    let st = sperp_from_spar(r, &sp);
    let mu = eval_mu(constants, params, geometry, r)?;
    let dmu = eval_mu_derivative(constants, params, geometry, r);

    // Laplacian of the trace: S_par'' + 2 S_perp'' + 2 (S_par' + 2 S_perp') / r.
    let lap_trace = sp[2] + 2.0 * st[2] + 2.0 * (sp[1] + 2.0 * st[1]) / r;
    let diff = sp[0] - st[0];
    let radial = -0.5 * (1.0 - beta) * lap_trace
        - beta * (sp[2] + 2.0 * sp[1] / r - 4.0 * diff / (r * r))
        + dmu
        - lambda * sp[0];
    let transverse = -0.5 * (1.0 - beta) * lap_trace
        - beta * (st[2] + 2.0 * st[1] / r + 2.0 * diff / (r * r))
        + mu / r
        - lambda * st[0];
    Ok((radial, transverse))
}

// ---------------------------------------------------------------------------
// Residual system and its cached evaluation
// ---------------------------------------------------------------------------

/// Scaled solution basis at radius `r`: `S_par = c0/w^3 * sum_i c_i phi_i(r)`
/// (`i = 1..4`), plus the equilibrium companions `psi_i` so that
/// `S_perp = c0/w^3 * sum_i c_i psi_i(r)`.
#[inline]
fn scaled_basis(omega: f64, r_outer: f64, r: f64) -> ([f64; 4], [f64; 4]) {
    let t = omega * r;
    let (sin, cos) = t.sin_cos();
    let inv_r3 = 1.0 / (r * r * r);
    let inv_ro3 = 1.0 / (r_outer * r_outer * r_outer);
    let w2r2 = t * t;
    let phi = [
        inv_r3,
        (t * cos - sin) * inv_r3,
        (cos + t * sin) * inv_r3,
        inv_ro3,
    ];
    let psi = [
        -0.5 * inv_r3,
        ((1.0 - w2r2) * sin - t * cos) * 0.5 * inv_r3,
        ((w2r2 - 1.0) * cos - t * sin) * 0.5 * inv_r3,
        inv_ro3,
    ];
    (phi, psi)
}

/// Norm Gram matrix of the scaled basis:
/// `G_ij = int (phi_i phi_j + 2 psi_i psi_j) w(r) dr`, so that
/// `int (S_par^2 + 2 S_perp^2) w dr = (c0/w^3)^2 c^T G c`.
fn norm_gram(
    omega: f64,
    geometry: ShellGeometry,
    spec: &QuadratureSpec,
) -> Result<[[f64; 4]; 4], BasisError> {
    let r_outer = geometry.r_outer();
    let spec = spec.for_oscillation(omega, geometry.width());
    let weight = spec.weight;
    let flat = integrate_vec(
        |r, out| {
            let (phi, psi) = scaled_basis(omega, r_outer, r);
            let w = weight.weight(r);
            let mut idx = 0;
            for i in 0..4 {
                for j in i..4 {
                    out[idx] = (phi[i] * phi[j] + 2.0 * psi[i] * psi[j]) * w;
                    idx += 1;
                }
            }
        },
        10,
        geometry,
        &[],
        &spec,
    )?;
    let mut gram = [[0.0; 4]; 4];
    let mut entries = flat.into_iter();
    // Symmetric scatter of the packed upper triangle; indices are clearest.
    #[allow(clippy::needless_range_loop)]
    for i in 0..4 {
        for j in i..4 {
            let value = entries.next().expect("ten entries");
            gram[i][j] = value;
            gram[j][i] = value;
        }
    }
    Ok(gram)
}

/// Per-solve context: geometry, quadrature policy, and a Gram cache keyed by
/// the bit pattern of `omega` so repeated residual evaluations at the same
/// frequency (finite-difference columns in the constants) cost nothing.
struct SolveContext<'a> {
    geometry: ShellGeometry,
    spec: &'a QuadratureSpec,
    grams: HashMap<u64, [[f64; 4]; 4]>,
}

impl<'a> SolveContext<'a> {
    fn new(geometry: ShellGeometry, spec: &'a QuadratureSpec) -> Self {
        Self {
            geometry,
            spec,
            grams: HashMap::new(),
        }
    }

    fn gram(&mut self, omega: f64) -> Result<[[f64; 4]; 4], BasisError> {
        if let Some(g) = self.grams.get(&omega.to_bits()) {
            return Ok(*g);
        }
        let g = norm_gram(omega, self.geometry, self.spec)?;
        self.grams.insert(omega.to_bits(), g);
        Ok(g)
    }

    fn norm_residual(&mut self, c0: f64, chat: &[f64; 4], omega: f64) -> Result<f64, BasisError> {
        let gram = self.gram(omega)?;
        let mut quad = 0.0;
        for i in 0..4 {
            for j in 0..4 {
                quad += chat[i] * chat[j] * gram[i][j];
            }
        }
        let scale = c0 / (omega * omega * omega);
        Ok(scale * scale * quad - 1.0 / (4.0 * PI))
    }

    /// The six residuals of the full system at `x = [c0, c1, c2, c3, c4, w]`:
    /// traction at both boundaries, natural boundary condition at both
    /// boundaries, the normalization defect, and the constants-sphere defect.
    fn residual6(&mut self, x: &[f64], p: f64) -> Result<Vec<f64>, BasisError> {
        let (c0, chat, omega) = (x[0], [x[1], x[2], x[3], x[4]], x[5]);
        let geometry = self.geometry;
        let r_outer = geometry.r_outer();
        let scale = c0 / (omega * omega * omega);
        let boundary = |r: f64| {
            let (phi, psi) = scaled_basis(omega, r_outer, r);
            let s_par: f64 = (0..4).map(|i| chat[i] * phi[i]).sum::<f64>() * scale;
            let s_perp: f64 = (0..4).map(|i| chat[i] * psi[i]).sum::<f64>() * scale;
            // Equilibrium gives S_par' = 2 (S_perp - S_par) / r.
            let d_par = 2.0 * (s_perp - s_par) / r;
            // Natural BC via the fourth-order identity: at a traction-free
            // boundary, r S_par'' - (p - 4) S_par' reduces to this expression.
            let natural = c0 * r / omega
                * (chat[0] / (r * r * r) + chat[3] / (r_outer * r_outer * r_outer))
                - p * d_par;
            (s_par, natural)
        };
        let (par_i, nat_i) = boundary(geometry.r_inner());
        let (par_o, nat_o) = boundary(geometry.r_outer());
        let norm = self.norm_residual(c0, &chat, omega)?;
        let sphere = chat.iter().map(|c| c * c).sum::<f64>() - 1.0;
        Ok(vec![par_i, par_o, nat_i, nat_o, norm, sphere])
    }
}

/// Residuals of the boundary/normalization system at constants
/// `c = [c0, c1, c2, c3, c4, omega]`, in the order
/// `[S_par(r_i), S_par(r_o), NB(r_i), NB(r_o), norm - 1/(4 pi), sum c_i^2 - 1]`,
/// where `NB(r) = (c0 r / w)(c1/r^3 + c4/r_o^3) - p S_par'(r)`.
///
/// A converged mode drives the sup-norm of this vector below `1e-10`.
pub fn residual_system(
    c: &[f64; 6],
    params: &FunctionalParams,
    geometry: ShellGeometry,
    spec: &QuadratureSpec,
) -> Result<[f64; 6], BasisError> {
    let mut ctx = SolveContext::new(geometry, spec);
    let v = ctx.residual6(c, params.p())?;
    Ok([v[0], v[1], v[2], v[3], v[4], v[5]])
}

// ---------------------------------------------------------------------------
// Newton iteration
// ---------------------------------------------------------------------------

fn sup_norm(v: &[f64]) -> f64 {
    v.iter().fold(0.0, |acc, x| acc.max(x.abs()))
}

/// Damped Newton with a centrally differenced Jacobian.
///
/// Converges at sup-norm `1e-12`; a stalled iterate is still accepted at
/// `1e-10`. The step is halved up to 30 times whenever the residual norm
/// fails to decrease. `admissible` guards structurally invalid iterates
/// (non-positive `omega`).
fn newton_solve(
    x0: &[f64],
    mut residual: impl FnMut(&[f64]) -> Result<Vec<f64>, BasisError>,
    admissible: impl Fn(&[f64]) -> bool,
) -> Result<(Vec<f64>, f64), NewtonOutcome> {
    let n = x0.len();
    let mut x = x0.to_vec();
    let mut res = residual(&x).map_err(NewtonOutcome::Inner)?;
    let mut norm = sup_norm(&res);

    for _ in 0..NEWTON_MAX_ITER {
        if norm < NEWTON_TOL {
            return Ok((x, norm));
        }
        // Central finite-difference Jacobian, component-relative step.
        let mut jac = DenseMatrix::zeros(n);
        for j in 0..n {
            let h = FD_STEP_SCALE * x[j].abs().max(1.0);
            let mut plus = x.clone();
            plus[j] += h;
            let mut minus = x.clone();
            minus[j] -= h;
            let rp = residual(&plus).map_err(NewtonOutcome::Inner)?;
            let rm = residual(&minus).map_err(NewtonOutcome::Inner)?;
            for i in 0..n {
                jac.set(i, j, (rp[i] - rm[i]) / (2.0 * h));
            }
        }
        let rhs: Vec<f64> = res.iter().map(|v| -v).collect();
        let Some(step) = jac.solve(&rhs) else {
            break;
        };
        let mut alpha = 1.0;
        let mut advanced = false;
        for _ in 0..=NEWTON_MAX_HALVINGS {
            let cand: Vec<f64> = x
                .iter()
                .zip(&step)
                .map(|(xi, si)| xi + alpha * si)
                .collect();
            if admissible(&cand) {
                let cres = residual(&cand).map_err(NewtonOutcome::Inner)?;
                let cnorm = sup_norm(&cres);
                if cnorm < norm {
                    x = cand;
                    res = cres;
                    norm = cnorm;
                    advanced = true;
                    break;
                }
            }
            alpha *= 0.5;
        }
        if !advanced {
            break;
        }
    }
    if norm <= NEWTON_ACCEPT {
        Ok((x, norm))
    } else {
        Err(NewtonOutcome::Stalled { norm })
    }
}

enum NewtonOutcome {
    Stalled { norm: f64 },
    Inner(BasisError),
}

// ---------------------------------------------------------------------------
// p = 0 solve
// ---------------------------------------------------------------------------

/// One Newton solve of the reduced four-unknown system at `p = 0` from the
/// frequency seed `omega0`.
fn solve_p0_seeded(
    index_n: usize,
    omega0: f64,
    geometry: ShellGeometry,
    spec: &QuadratureSpec,
) -> Result<ModeConstants, BasisError> {
    let mut ctx = SolveContext::new(geometry, spec);

    // Initial guess: c2 = 0, c3 = 1, and c0 rescaled onto the norm surface.
    let gram0 = ctx.gram(omega0)?;
    let target = 1.0 / (4.0 * PI);
    let c0_guess = omega0.powi(3) * (target / gram0[2][2]).sqrt();
    let x0 = [c0_guess, 0.0, 1.0, omega0];

    // Unknowns [c0, c2, c3, omega]; c1 = c4 = 0 identically at p = 0.
    let outcome = newton_solve(
        &x0,
        |x| {
            let full = [x[0], 0.0, x[1], x[2], 0.0, x[3]];
            let r = ctx.residual6(&full, 0.0)?;
            Ok(vec![r[0], r[1], r[5], r[4]])
        },
        |x| x[3] > 0.0 && x[0].is_finite(),
    );
    let (mut x, _) = match outcome {
        Ok(pair) => pair,
        Err(NewtonOutcome::Stalled { norm }) => {
            return Err(BasisError::NonConvergence { index_n, norm })
        }
        Err(NewtonOutcome::Inner(e)) => return Err(e),
    };

    // Sign convention: c3 >= 0 (flipping (c0, c2, c3) jointly leaves S_par
    // unchanged), then c0 > 0 to pin the overall sign of the field.
    if x[2] < 0.0 {
        x[0] = -x[0];
        x[1] = -x[1];
        x[2] = -x[2];
    }
    if x[0] < 0.0 {
        x[0] = -x[0];
    }
    Ok(ModeConstants::new(
        index_n,
        x[3],
        [x[0], 0.0, x[1], x[2], 0.0],
    ))
}

/// The first `n_max` modes at `p = 0`, in strictly increasing `omega`.
///
/// Mode `N` is seeded at `omega0 = N pi / (r_o - r_i)`; a solve that lands on
/// an already-found root is reseeded by multiples of `pi / (2 (r_o - r_i))`
/// on alternating sides, up to five times.
pub fn modes_p0(
    n_max: usize,
    geometry: ShellGeometry,
    spec: &QuadratureSpec,
) -> Result<Vec<ModeConstants>, BasisError> {
    if n_max == 0 {
        return Err(BasisError::InvalidIndex);
    }
    let width = geometry.width();
    let base_gap = PI / (2.0 * width);
    let mut found: Vec<ModeConstants> = Vec::with_capacity(n_max);
    for n in 1..=n_max {
        let omega_seed = n as f64 * PI / width;
        let offsets = [
            0.0,
            base_gap,
            -base_gap,
            2.0 * base_gap,
            -2.0 * base_gap,
            3.0 * base_gap,
        ];
        let mut solved = None;
        let mut last_omega = f64::NAN;
        for &offset in &offsets {
            let seed = omega_seed + offset;
            if seed <= 0.0 {
                continue;
            }
            let constants = solve_p0_seeded(n, seed, geometry, spec)?;
            last_omega = constants.omega();
            let duplicate = found
                .iter()
                .any(|m| (m.omega() - constants.omega()).abs() < DUPLICATE_OMEGA_TOL);
            if !duplicate {
                solved = Some(constants);
                break;
            }
        }
        let constants = solved.ok_or(BasisError::DuplicateRoot {
            index_n: n,
            omega: last_omega,
        })?;
        if let Some(prev) = found.last() {
            if constants.omega() <= prev.omega() {
                return Err(BasisError::NonMonotoneFrequencies {
                    index_n: n,
                    omega: constants.omega(),
                    previous: prev.omega(),
                });
            }
        }
        found.push(constants);
    }
    Ok(found)
}

/// Constants of the `index_n`-th mode at `p = 0`.
///
/// Solves modes `1..=index_n` in order so the duplicate-root guard has the
/// full list of lower roots to compare against.
pub fn solve_p0(
    index_n: usize,
    geometry: ShellGeometry,
    spec: &QuadratureSpec,
) -> Result<ModeConstants, BasisError> {
    Ok(modes_p0(index_n, geometry, spec)?.pop().expect("nonempty"))
}

// ---------------------------------------------------------------------------
// Continuation in p
// ---------------------------------------------------------------------------

/// Continuation of a `p = 0` mode to each ascending target in `targets`,
/// returning the constants at every target.
///
/// Each step takes an Euler predictor `v = M^{-1} b` (with `M` the Jacobian of
/// the residual system in the constants and `b = -d residual / d p`) followed
/// by a Newton corrector; the step size starts at 0.05 and adapts by
/// doubling/halving on corrector success/failure.
pub fn continue_through(
    base: &ModeConstants,
    targets: &[f64],
    geometry: ShellGeometry,
    spec: &QuadratureSpec,
) -> Result<Vec<ModeConstants>, BasisError> {
    if targets
        .iter()
        .any(|p| !(0.0..=P_MAX).contains(p) || !p.is_finite())
        || !targets.windows(2).all(|w| w[0] < w[1])
    {
        return Err(BasisError::BadContinuationTargets);
    }
    let mut ctx = SolveContext::new(geometry, spec);
    let index_n = base.index_n();
    let mut out = Vec::with_capacity(targets.len());
    let mut x = base.as_vector().to_vec();
    let mut p = 0.0;
    let mut step = CONTINUATION_INITIAL_STEP;

    for &target in targets {
        if target == 0.0 {
            out.push(base.clone());
            continue;
        }
        while p < target {
            let dp = step.min(target - p);
            let p_next = if target - p <= step { target } else { p + dp };

            // Predictor: differentiate the residual system along the branch.
            let jac = jacobian_in_constants(&mut ctx, &x, p)?;
            let condition = jac.condition_inf().unwrap_or(f64::INFINITY);
            if condition > MAX_JACOBIAN_CONDITION {
                return Err(BasisError::SingularJacobian { condition, p });
            }
            let dres_dp = residual_dp(&mut ctx, &x, p)?;
            let rhs: Vec<f64> = dres_dp.iter().map(|v| -v).collect();
            let tangent = jac.solve(&rhs).ok_or(BasisError::SingularJacobian {
                condition: f64::INFINITY,
                p,
            })?;
            let predicted: Vec<f64> = x
                .iter()
                .zip(&tangent)
                .map(|(xi, ti)| xi + ti * (p_next - p))
                .collect();

            // Corrector: Newton on the full system at p_next.
            match newton_solve(&predicted, |y| ctx.residual6(y, p_next), |y| y[5] > 0.0) {
                Ok((corrected, _)) => {
                    x = corrected;
                    p = p_next;
                    step = (step * 2.0).min(CONTINUATION_MAX_STEP);
                }
                Err(NewtonOutcome::Inner(e)) => return Err(e),
                Err(NewtonOutcome::Stalled { .. }) => {
                    step *= 0.5;
                    if step < CONTINUATION_MIN_STEP {
                        return Err(BasisError::CorrectorFailed { p });
                    }
                }
            }
        }
        out.push(ModeConstants::from_vector(index_n, &x));
    }
    Ok(out)
}

/// Constants of the branch at a single `p_target`; `p_target = 0` returns the
/// base unchanged.
pub fn continue_in_p(
    base: &ModeConstants,
    p_target: f64,
    geometry: ShellGeometry,
    spec: &QuadratureSpec,
) -> Result<ModeConstants, BasisError> {
    Ok(continue_through(base, &[p_target], geometry, spec)?
        .pop()
        .expect("nonempty"))
}

fn jacobian_in_constants(
    ctx: &mut SolveContext,
    x: &[f64],
    p: f64,
) -> Result<DenseMatrix, BasisError> {
    let n = x.len();
    let mut jac = DenseMatrix::zeros(n);
    for j in 0..n {
        let h = FD_STEP_SCALE * x[j].abs().max(1.0);
        let mut plus = x.to_vec();
        plus[j] += h;
        let mut minus = x.to_vec();
        minus[j] -= h;
        let rp = ctx.residual6(&plus, p)?;
        let rm = ctx.residual6(&minus, p)?;
        for i in 0..n {
            jac.set(i, j, (rp[i] - rm[i]) / (2.0 * h));
        }
    }
    Ok(jac)
}

fn residual_dp(ctx: &mut SolveContext, x: &[f64], p: f64) -> Result<Vec<f64>, BasisError> {
    let h = FD_STEP_SCALE * p.abs().max(1.0);
    let rp = ctx.residual6(x, p + h)?;
    let rm = ctx.residual6(x, p - h)?;
    Ok(rp
        .iter()
        .zip(&rm)
        .map(|(a, b)| (a - b) / (2.0 * h))
        .collect())
}

// ---------------------------------------------------------------------------
// Assembled bases
// ---------------------------------------------------------------------------

/// The first `n_max` basis modes at the given strip parameters: solved at
/// `p = 0` and continued to `params.p()` when nonzero.
pub fn basis_up_to(
    params: &FunctionalParams,
    n_max: usize,
    geometry: ShellGeometry,
    spec: &QuadratureSpec,
) -> Result<Vec<BasisMode>, BasisError> {
    let p0 = modes_p0(n_max, geometry, spec)?;
    let mut modes = Vec::with_capacity(n_max);
    let mut prev_omega = 0.0;
    for constants in p0 {
        let continued = if params.p() == 0.0 {
            constants
        } else {
            continue_in_p(&constants, params.p(), geometry, spec)?
        };
        if continued.omega() <= prev_omega {
            return Err(BasisError::NonMonotoneFrequencies {
                index_n: continued.index_n(),
                omega: continued.omega(),
                previous: prev_omega,
            });
        }
        prev_omega = continued.omega();
        modes.push(BasisMode::new(continued, *params, geometry));
    }
    Ok(modes)
}

/// One mode constants record in the emitted JSON schema, floats at 17
/// significant digits.
pub fn mode_json_record(
    mode: &BasisMode,
    energy: f64,
    weight: crate::quadrature::WeightMode,
) -> String {
    let k = mode.constants();
    let g = mode.geometry();
    let c = k.c();
    format!(
        "{{\"n\": {}, \"p\": {}, \"k\": {}, \"r_inner\": {}, \"r_outer\": {}, \"omega\": {}, \"lambda\": {}, \"c\": [{}, {}, {}, {}, {}], \"energy\": {}, \"norm_weight\": \"{}\"}}",
        k.index_n(),
        fmt_f64(mode.params().p()),
        fmt_f64(mode.params().k()),
        fmt_f64(g.r_inner()),
        fmt_f64(g.r_outer()),
        fmt_f64(k.omega()),
        fmt_f64(k.lambda()),
        fmt_f64(c[0]),
        fmt_f64(c[1]),
        fmt_f64(c[2]),
        fmt_f64(c[3]),
        fmt_f64(c[4]),
        fmt_f64(energy),
        weight.as_str(),
    )
}

/// 17 significant digits, round-trip exact for f64.
pub fn fmt_f64(x: f64) -> String {
    format!("{x:.16e}")
}

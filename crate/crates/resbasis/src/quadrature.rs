//! Integrals, inner products and norms on the shell.
//!
//! Composite Gauss-Legendre panels with adaptive refinement: the panel count
//! per smooth segment doubles until two successive estimates agree to the
//! requested tolerance. Integrands with declared discontinuities are split at
//! the breakpoints first, so each panel sees a smooth function.
//!
//! All volume-type quantities carry the factor `4*pi` and a radial weight
//! `w(r)`: `r^2` in the default weight mode (the honest 3D volume measure) or
//! `1` in the `paper` mode, provided for comparing against data computed with
//! the unweighted 1D normalization. Orthogonality of distinct modes holds in
//! the `r^2`-weighted product.

use std::collections::HashMap;
use std::f64::consts::PI;
use std::sync::{Mutex, OnceLock};

use thiserror::Error;

use crate::fields::{FieldError, RadialField, ShellGeometry};

/// Radial weight used inside every volume integral.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum WeightMode {
    /// `w(r) = r^2`: consistent with the 3D normalization `int |S|^2 dv = 1`.
    #[default]
    R2,
    /// `w(r) = 1`: the reduced normalization without the volume factor.
    PaperLiteral,
}

impl WeightMode {
    #[inline]
    pub fn weight(self, r: f64) -> f64 {
        match self {
            WeightMode::R2 => r * r,
            WeightMode::PaperLiteral => 1.0,
        }
    }

    /// Token used in emitted JSON (`"r2"` or `"paper"`).
    pub fn as_str(self) -> &'static str {
        match self {
            WeightMode::R2 => "r2",
            WeightMode::PaperLiteral => "paper",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        match s {
            "r2" => Some(WeightMode::R2),
            "paper" => Some(WeightMode::PaperLiteral),
            _ => None,
        }
    }
}

/// Accuracy and refinement policy for the adaptive quadrature.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct QuadratureSpec {
    pub abs_tol: f64,
    pub rel_tol: f64,
    /// Starting panel count per smooth segment.
    pub base_panels: usize,
    /// Gauss-Legendre nodes per panel.
    pub nodes_per_panel: usize,
    /// Hard cap on panels per segment before giving up.
    pub max_panels: usize,
    pub weight: WeightMode,
}

impl Default for QuadratureSpec {
    fn default() -> Self {
        Self {
            abs_tol: 1e-12,
            rel_tol: 1e-12,
            base_panels: 4,
            nodes_per_panel: 16,
            max_panels: 1 << 14,
            weight: WeightMode::R2,
        }
    }
}

impl QuadratureSpec {
    pub fn validate(&self) -> Result<(), QuadratureError> {
        if self.abs_tol > 0.0
            && self.rel_tol > 0.0
            && self.base_panels >= 1
            && self.nodes_per_panel >= 2
            && self.max_panels >= self.base_panels
        {
            Ok(())
        } else {
            Err(QuadratureError::InvalidSpec)
        }
    }

    pub fn with_weight(mut self, weight: WeightMode) -> Self {
        self.weight = weight;
        self
    }

    /// Spec whose starting panel count resolves an oscillation of angular
    /// frequency `omega` over a segment of length `len`: at least four panels
    /// per half period.
    pub fn for_oscillation(&self, omega: f64, len: f64) -> Self {
        let half_periods = (omega.abs() * len / PI).ceil().max(1.0) as usize;
        Self {
            base_panels: self.base_panels.max(4 * half_periods),
            ..*self
        }
    }

    /// Spec scaled for basis mode `n` (mode `n` oscillates roughly `n` half
    /// periods across the shell, so this starts from `>= 4 n` panels).
    pub fn for_mode(&self, n: usize) -> Self {
        Self {
            base_panels: self.base_panels.max(4 * n.max(1)),
            ..*self
        }
    }
}

#[derive(Error, Debug, Clone, PartialEq)]
pub enum QuadratureError {
    #[error("quadrature spec violates its invariants (positive tolerances, base_panels >= 1, nodes_per_panel >= 2)")]
    InvalidSpec,

    #[error("integral did not converge within {max_panels} panels (last change {last_change:e})")]
    NoConvergence { max_panels: usize, last_change: f64 },

    #[error("field has declared discontinuities at {0:?}; this quantity needs a square-integrable gradient")]
    DiscontinuousField(Vec<f64>),

    #[error(transparent)]
    Field(#[from] FieldError),
}

/// Nodes and weights of the `n`-point Gauss-Legendre rule on `[-1, 1]`.
///
/// Computed once per `n` by Newton iteration on the Legendre recurrence and
/// cached for the life of the process.
type NodeCache = Mutex<HashMap<usize, &'static (Vec<f64>, Vec<f64>)>>;

pub fn gauss_legendre(n: usize) -> &'static (Vec<f64>, Vec<f64>) {
    static CACHE: OnceLock<NodeCache> = OnceLock::new();
    let cache = CACHE.get_or_init(|| Mutex::new(HashMap::new()));
    let mut guard = cache.lock().expect("gauss node cache poisoned");
    guard
        .entry(n)
        .or_insert_with(|| Box::leak(Box::new(compute_gauss_legendre(n))))
}

fn compute_gauss_legendre(n: usize) -> (Vec<f64>, Vec<f64>) {
    assert!(n >= 2, "need at least two nodes");
    let mut nodes = vec![0.0; n];
    let mut weights = vec![0.0; n];
    for i in 0..n.div_ceil(2) {
        // Tricomi-style initial guess, then Newton on P_n.
        let mut x = (PI * (i as f64 + 0.75) / (n as f64 + 0.5)).cos();
        let mut dp = 0.0;
        for _ in 0..100 {
            let (p, d) = legendre_with_derivative(n, x);
            dp = d;
            let dx = p / d;
            x -= dx;
            if dx.abs() < 1e-15 {
                break;
            }
        }
        let w = 2.0 / ((1.0 - x * x) * dp * dp);
        nodes[i] = -x;
        nodes[n - 1 - i] = x;
        weights[i] = w;
        weights[n - 1 - i] = w;
    }
    if n % 2 == 1 {
        let (_, d) = legendre_with_derivative(n, 0.0);
        nodes[n / 2] = 0.0;
        weights[n / 2] = 2.0 / (d * d);
    }
    (nodes, weights)
}

fn legendre_with_derivative(n: usize, x: f64) -> (f64, f64) {
    let mut p0 = 1.0;
    let mut p1 = x;
    for k in 2..=n {
        let kf = k as f64;
        let p2 = ((2.0 * kf - 1.0) * x * p1 - (kf - 1.0) * p0) / kf;
        p0 = p1;
        p1 = p2;
    }
    let d = n as f64 * (x * p1 - p0) / (x * x - 1.0);
    (p1, d)
}

/// One composite pass: `panels` equal panels over `[a, b]`, accumulating a
/// vector-valued integrand into `out`.
fn composite_pass(
    f: &mut dyn FnMut(f64, &mut [f64]),
    dim: usize,
    a: f64,
    b: f64,
    panels: usize,
    nodes_per_panel: usize,
    out: &mut [f64],
) {
    let (nodes, weights) = gauss_legendre(nodes_per_panel);
    out.fill(0.0);
    let mut buf = vec![0.0; dim];
    let h = (b - a) / panels as f64;
    for p in 0..panels {
        let left = a + h * p as f64;
        let mid = left + 0.5 * h;
        let half = 0.5 * h;
        for (x, w) in nodes.iter().zip(weights) {
            f(mid + half * x, &mut buf);
            let scale = w * half;
            for (acc, v) in out.iter_mut().zip(&buf) {
                *acc += scale * v;
            }
        }
    }
}

/// Adaptive vector-valued integral over one smooth segment.
fn integrate_segment_vec(
    f: &mut dyn FnMut(f64, &mut [f64]),
    dim: usize,
    a: f64,
    b: f64,
    spec: &QuadratureSpec,
) -> Result<Vec<f64>, QuadratureError> {
    let mut panels = spec.base_panels;
    let mut prev = vec![0.0; dim];
    let mut cur = vec![0.0; dim];
    composite_pass(f, dim, a, b, panels, spec.nodes_per_panel, &mut prev);
    loop {
        panels *= 2;
        if panels > spec.max_panels {
            let last_change = prev
                .iter()
                .zip(&cur)
                .map(|(p, c)| (p - c).abs())
                .fold(0.0, f64::max);
            return Err(QuadratureError::NoConvergence {
                max_panels: spec.max_panels,
                last_change,
            });
        }
        composite_pass(f, dim, a, b, panels, spec.nodes_per_panel, &mut cur);
        // Component tolerances are scaled by the largest component: small
        // entries of a vector integrand share the roundoff floor of their
        // siblings and cannot beat it in absolute terms.
        let scale = cur.iter().fold(0.0f64, |acc, c| acc.max(c.abs()));
        let converged = cur
            .iter()
            .zip(&prev)
            .all(|(c, p)| (c - p).abs() <= spec.abs_tol.max(spec.rel_tol * scale));
        if converged {
            return Ok(cur);
        }
        std::mem::swap(&mut prev, &mut cur);
    }
}

/// Split `[r_inner, r_outer]` at the breakpoints into smooth segments.
fn segments(
    geometry: ShellGeometry,
    breakpoints: &[f64],
) -> Result<Vec<(f64, f64)>, QuadratureError> {
    if !breakpoints.windows(2).all(|w| w[0] < w[1]) {
        return Err(FieldError::UnorderedBreakpoints(breakpoints.to_vec()).into());
    }
    let mut cuts = vec![geometry.r_inner()];
    for &b in breakpoints {
        if !(b > geometry.r_inner() && b < geometry.r_outer()) {
            return Err(FieldError::BreakpointOutsideShell(
                b,
                geometry.r_inner(),
                geometry.r_outer(),
            )
            .into());
        }
        cuts.push(b);
    }
    cuts.push(geometry.r_outer());
    Ok(cuts.windows(2).map(|w| (w[0], w[1])).collect())
}

pub(crate) fn integrate_vec(
    mut f: impl FnMut(f64, &mut [f64]),
    dim: usize,
    geometry: ShellGeometry,
    breakpoints: &[f64],
    spec: &QuadratureSpec,
) -> Result<Vec<f64>, QuadratureError> {
    spec.validate()?;
    let mut total = vec![0.0; dim];
    for (a, b) in segments(geometry, breakpoints)? {
        let part = integrate_segment_vec(&mut f, dim, a, b, spec)?;
        for (acc, v) in total.iter_mut().zip(part) {
            *acc += v;
        }
    }
    Ok(total)
}

/// `int f(r) dr` over the shell, split at `breakpoints`, refined until two
/// successive panel doublings agree within `max(abs_tol, rel_tol * |I|)`.
pub fn integrate(
    f: impl Fn(f64) -> f64,
    geometry: ShellGeometry,
    breakpoints: &[f64],
    spec: &QuadratureSpec,
) -> Result<f64, QuadratureError> {
    let out = integrate_vec(|r, dst| dst[0] = f(r), 1, geometry, breakpoints, spec)?;
    Ok(out[0])
}

/// L2 scalar product of two fields:
/// `4*pi * int (A_par B_par + 2 A_perp B_perp) w(r) dr`.
///
/// Basis modes are orthonormal in this product under the `R2` weight.
pub fn l2_inner(
    a: &RadialField,
    b: &RadialField,
    spec: &QuadratureSpec,
) -> Result<f64, QuadratureError> {
    a.same_geometry(b)?;
    let mut cuts = a.breakpoints();
    cuts.extend(b.breakpoints());
    cuts.sort_by(f64::total_cmp);
    cuts.dedup();
    let weight = spec.weight;
    let value = integrate(
        |r| {
            (a.s_par().value(r) * b.s_par().value(r)
                + 2.0 * a.s_perp().value(r) * b.s_perp().value(r))
                * weight.weight(r)
        },
        a.geometry(),
        &cuts,
        spec,
    )?;
    Ok(4.0 * PI * value)
}

/// Squared L2 norm of a field.
pub fn l2_norm_sq(a: &RadialField, spec: &QuadratureSpec) -> Result<f64, QuadratureError> {
    l2_inner(a, a, spec)
}

/// Squared H1 quantity `4*pi * int (|S|^2 + |Grad S|^2) w(r) dr` of a smooth
/// divergence-free field, with `|Grad S|^2 = 2 (S_par'^2 + S_perp'^2)`.
///
/// Refused for fields with breakpoints: their gradient is not square
/// integrable, so the H1 quantity does not exist.
pub fn h1_norm_sq(diff: &RadialField, spec: &QuadratureSpec) -> Result<f64, QuadratureError> {
    let cuts = diff.breakpoints();
    if !cuts.is_empty() {
        return Err(QuadratureError::DiscontinuousField(cuts));
    }
    let weight = spec.weight;
    let value = integrate(
        |r| {
            let sp = diff.s_par().value(r);
            let st = diff.s_perp().value(r);
            let dp = diff.s_par().derivative(r);
            let dt = diff.s_perp().derivative(r);
            (sp * sp + 2.0 * st * st + 2.0 * (dp * dp + dt * dt)) * weight.weight(r)
        },
        diff.geometry(),
        &[],
        spec,
    )?;
    Ok(4.0 * PI * value)
}

/// The stress-gradient functional at strip coordinate `p`, reduced for
/// spherically symmetric divergence-free fields:
///
/// `E = (1/2) * 4*pi * int [ (S_par' + 2 S_perp')^2 / 2
///                           + p (3 S_par'^2 / 2 - 2 S_par' S_perp') ] w(r) dr`.
///
/// For a unit-norm mode, `2 E = lambda = omega^2`.
pub fn energy(field: &RadialField, p: f64, spec: &QuadratureSpec) -> Result<f64, QuadratureError> {
    let cuts = field.breakpoints();
    if !cuts.is_empty() {
        return Err(QuadratureError::DiscontinuousField(cuts));
    }
    let weight = spec.weight;
    let value = integrate(
        |r| {
            let dp = field.s_par().derivative(r);
            let dt = field.s_perp().derivative(r);
            let trace_grad = dp + 2.0 * dt;
            (0.5 * trace_grad * trace_grad + p * (1.5 * dp * dp - 2.0 * dp * dt)) * weight.weight(r)
        },
        field.geometry(),
        &[],
        spec,
    )?;
    Ok(0.5 * 4.0 * PI * value)
}

/// Polarization of the energy: `E(a+b) - E(a) - E(b)`, the symmetric bilinear
/// form in which distinct modes at the same `p` are orthogonal.
pub fn energy_inner(
    a: &RadialField,
    b: &RadialField,
    p: f64,
    spec: &QuadratureSpec,
) -> Result<f64, QuadratureError> {
    a.same_geometry(b)?;
    let sum =
        RadialField::linear_combination(vec![(1.0, a.clone()), (1.0, b.clone())], a.geometry())?;
    Ok(energy(&sum, p, spec)? - energy(a, p, spec)? - energy(b, p, spec)?)
}

//! Spherically symmetric stress fields as radial profiles.
//!
//! A field is the pair `(S_par, S_perp)` of radial and transverse components
//! on a shell. Everything here is immutable after construction; evaluation is
//! a pure function of `(field, r)`, so values can be read concurrently.

use std::fmt;
use std::sync::Arc;

use thiserror::Error;

mod spline;

pub use spline::CubicSpline;

/// Errors from field construction and pointwise evaluation.
#[derive(Error, Debug, Clone, PartialEq)]
pub enum FieldError {
    #[error("invalid shell geometry: need 0 < r_inner < r_outer, got r_inner={r_inner}, r_outer={r_outer}")]
    InvalidGeometry { r_inner: f64, r_outer: f64 },

    #[error("radius {r} lies outside the shell [{r_inner}, {r_outer}]")]
    OutsideShell { r: f64, r_inner: f64, r_outer: f64 },

    #[error("radius {r} coincides with a declared discontinuity at {breakpoint}")]
    AtBreakpoint { r: f64, breakpoint: f64 },

    #[error("breakpoints must be strictly increasing, got {0:?}")]
    UnorderedBreakpoints(Vec<f64>),

    #[error("breakpoint {0} is not strictly inside the shell ({1}, {2})")]
    BreakpointOutsideShell(f64, f64, f64),

    #[error("fields live on different shells: [{0}, {1}] vs [{2}, {3}]")]
    GeometryMismatch(f64, f64, f64, f64),

    #[error("need at least {needed} samples per smooth segment, got {got}")]
    TooFewSamples { needed: usize, got: usize },

    #[error("sample radii must be strictly increasing (violated at index {0})")]
    NonMonotoneSamples(usize),
}

/// The radial domain `[r_inner, r_outer]` of the spherical shell.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ShellGeometry {
    r_inner: f64,
    r_outer: f64,
}

impl ShellGeometry {
    pub fn new(r_inner: f64, r_outer: f64) -> Result<Self, FieldError> {
        if !(r_inner > 0.0 && r_inner < r_outer) || !r_inner.is_finite() || !r_outer.is_finite() {
            return Err(FieldError::InvalidGeometry { r_inner, r_outer });
        }
        Ok(Self { r_inner, r_outer })
    }

    /// The dimensionless shell used throughout: `r_inner = 0.5`, `r_outer = 1`.
    pub fn unit_shell() -> Self {
        Self {
            r_inner: 0.5,
            r_outer: 1.0,
        }
    }

    pub fn r_inner(&self) -> f64 {
        self.r_inner
    }

    pub fn r_outer(&self) -> f64 {
        self.r_outer
    }

    pub fn width(&self) -> f64 {
        self.r_outer - self.r_inner
    }

    pub fn contains(&self, r: f64) -> bool {
        r >= self.r_inner && r <= self.r_outer
    }

    fn check_contains(&self, r: f64) -> Result<(), FieldError> {
        if self.contains(r) {
            Ok(())
        } else {
            Err(FieldError::OutsideShell {
                r,
                r_inner: self.r_inner,
                r_outer: self.r_outer,
            })
        }
    }
}

type Evaluator = Arc<dyn Fn(f64) -> f64 + Send + Sync>;

/// A scalar function of the radius with an attached derivative evaluator and
/// explicit discontinuity metadata.
///
/// Breakpoints are never auto-detected; callers declare them (e.g. the
/// shrink-fit interface radius is known exactly).
#[derive(Clone)]
pub struct RadialProfile {
    eval: Evaluator,
    deriv: Evaluator,
    breakpoints: Vec<f64>,
}

impl fmt::Debug for RadialProfile {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("RadialProfile")
            .field("breakpoints", &self.breakpoints)
            .finish_non_exhaustive()
    }
}

impl RadialProfile {
    /// Profile from closed-form value and derivative evaluators.
    pub fn new(
        eval: impl Fn(f64) -> f64 + Send + Sync + 'static,
        deriv: impl Fn(f64) -> f64 + Send + Sync + 'static,
        breakpoints: Vec<f64>,
    ) -> Result<Self, FieldError> {
        if !breakpoints.windows(2).all(|w| w[0] < w[1]) {
            return Err(FieldError::UnorderedBreakpoints(breakpoints));
        }
        Ok(Self {
            eval: Arc::new(eval),
            deriv: Arc::new(deriv),
            breakpoints,
        })
    }

    /// Profile whose derivative is formed by central differences of the value
    /// evaluator, with step `h`.
    pub fn with_numeric_derivative(
        eval: impl Fn(f64) -> f64 + Send + Sync + 'static,
        h: f64,
        breakpoints: Vec<f64>,
    ) -> Result<Self, FieldError> {
        let eval = Arc::new(eval);
        let for_deriv = Arc::clone(&eval);
        let deriv = move |r: f64| (for_deriv(r + h) - for_deriv(r - h)) / (2.0 * h);
        if !breakpoints.windows(2).all(|w| w[0] < w[1]) {
            return Err(FieldError::UnorderedBreakpoints(breakpoints));
        }
        Ok(Self {
            eval,
            deriv: Arc::new(deriv),
            breakpoints,
        })
    }

    pub fn zero() -> Self {
        Self {
            eval: Arc::new(|_| 0.0),
            deriv: Arc::new(|_| 0.0),
            breakpoints: Vec::new(),
        }
    }

    /// Spline-interpolated profile through `(radii, values)` samples, split at
    /// the declared breakpoints so each smooth segment gets its own spline.
    pub fn from_samples(
        radii: &[f64],
        values: &[f64],
        breakpoints: &[f64],
    ) -> Result<Self, FieldError> {
        let piecewise = spline::PiecewiseSpline::fit(radii, values, breakpoints)?;
        let for_deriv = piecewise.clone();
        Ok(Self {
            eval: Arc::new(move |r| piecewise.value(r)),
            deriv: Arc::new(move |r| for_deriv.derivative(r)),
            breakpoints: breakpoints.to_vec(),
        })
    }

    pub fn value(&self, r: f64) -> f64 {
        (self.eval)(r)
    }

    pub fn derivative(&self, r: f64) -> f64 {
        (self.deriv)(r)
    }

    pub fn breakpoints(&self) -> &[f64] {
        &self.breakpoints
    }

    fn nearest_breakpoint(&self, r: f64) -> Option<f64> {
        self.breakpoints
            .iter()
            .copied()
            .min_by(|a, b| (a - r).abs().total_cmp(&(b - r).abs()))
    }
}

/// Relative tolerance under which a radius is considered to sit on a breakpoint.
const BREAKPOINT_EPS: f64 = 1e-12;

fn on_breakpoint(r: f64, breakpoints: &[f64]) -> Option<f64> {
    breakpoints
        .iter()
        .copied()
        .find(|&b| (r - b).abs() <= BREAKPOINT_EPS * b.abs().max(1.0))
}

/// A spherically symmetric stress field: radial component `S_par`, transverse
/// component `S_perp`, on a shell.
#[derive(Debug, Clone)]
pub struct RadialField {
    s_par: RadialProfile,
    s_perp: RadialProfile,
    geometry: ShellGeometry,
}

impl RadialField {
    pub fn new(
        s_par: RadialProfile,
        s_perp: RadialProfile,
        geometry: ShellGeometry,
    ) -> Result<Self, FieldError> {
        for &b in s_par.breakpoints().iter().chain(s_perp.breakpoints()) {
            if !(b > geometry.r_inner() && b < geometry.r_outer()) {
                return Err(FieldError::BreakpointOutsideShell(
                    b,
                    geometry.r_inner(),
                    geometry.r_outer(),
                ));
            }
        }
        Ok(Self {
            s_par,
            s_perp,
            geometry,
        })
    }

    pub fn zero(geometry: ShellGeometry) -> Self {
        Self {
            s_par: RadialProfile::zero(),
            s_perp: RadialProfile::zero(),
            geometry,
        }
    }

    pub fn s_par(&self) -> &RadialProfile {
        &self.s_par
    }

    pub fn s_perp(&self) -> &RadialProfile {
        &self.s_perp
    }

    pub fn geometry(&self) -> ShellGeometry {
        self.geometry
    }

    /// Union of the component breakpoints, sorted and deduplicated.
    pub fn breakpoints(&self) -> Vec<f64> {
        let mut all: Vec<f64> = self
            .s_par
            .breakpoints()
            .iter()
            .chain(self.s_perp.breakpoints())
            .copied()
            .collect();
        all.sort_by(f64::total_cmp);
        all.dedup();
        all
    }

    pub fn same_geometry(&self, other: &RadialField) -> Result<(), FieldError> {
        if self.geometry == other.geometry {
            Ok(())
        } else {
            Err(FieldError::GeometryMismatch(
                self.geometry.r_inner(),
                self.geometry.r_outer(),
                other.geometry.r_inner(),
                other.geometry.r_outer(),
            ))
        }
    }

    /// The field `sum_i coeff_i * field_i`. All terms must share a geometry.
    pub fn linear_combination(
        terms: Vec<(f64, RadialField)>,
        geometry: ShellGeometry,
    ) -> Result<Self, FieldError> {
        for (_, f) in &terms {
            if f.geometry != geometry {
                return Err(FieldError::GeometryMismatch(
                    geometry.r_inner(),
                    geometry.r_outer(),
                    f.geometry.r_inner(),
                    f.geometry.r_outer(),
                ));
            }
        }
        let mut breakpoints: Vec<f64> = terms.iter().flat_map(|(_, f)| f.breakpoints()).collect();
        breakpoints.sort_by(f64::total_cmp);
        breakpoints.dedup();

        let pars: Vec<(f64, RadialProfile)> =
            terms.iter().map(|(c, f)| (*c, f.s_par.clone())).collect();
        let perps: Vec<(f64, RadialProfile)> =
            terms.iter().map(|(c, f)| (*c, f.s_perp.clone())).collect();
        let pars_d = pars.clone();
        let perps_d = perps.clone();

        let s_par = RadialProfile {
            eval: Arc::new(move |r| pars.iter().map(|(c, p)| c * p.value(r)).sum()),
            deriv: Arc::new(move |r| pars_d.iter().map(|(c, p)| c * p.derivative(r)).sum()),
            breakpoints: breakpoints.clone(),
        };
        let s_perp = RadialProfile {
            eval: Arc::new(move |r| perps.iter().map(|(c, p)| c * p.value(r)).sum()),
            deriv: Arc::new(move |r| perps_d.iter().map(|(c, p)| c * p.derivative(r)).sum()),
            breakpoints,
        };
        Ok(Self {
            s_par,
            s_perp,
            geometry,
        })
    }

    fn check_smooth_point(&self, r: f64) -> Result<(), FieldError> {
        self.geometry.check_contains(r)?;
        if let Some(b) = on_breakpoint(r, &self.breakpoints()) {
            return Err(FieldError::AtBreakpoint { r, breakpoint: b });
        }
        Ok(())
    }
}

/// Pointwise equilibrium residual `S_par' + 2 (S_par - S_perp) / r`.
///
/// Vanishes identically for any self-equilibrated field; nonzero values
/// measure how far a constructed or sampled field is from equilibrium.
pub fn equilibrium_residual(field: &RadialField, r: f64) -> Result<f64, FieldError> {
    field.check_smooth_point(r)?;
    let s_par = field.s_par.value(r);
    let s_perp = field.s_perp.value(r);
    Ok(field.s_par.derivative(r) + 2.0 * (s_par - s_perp) / r)
}

/// Transverse component induced by equilibrium: `S_perp = S_par + r S_par' / 2`.
///
/// The derivative of the result needs `S_par''`, which is formed by central
/// differences of the parent's derivative evaluator; the step shrinks near
/// declared breakpoints so the stencil never straddles a discontinuity.
pub fn perp_from_par(s_par: &RadialProfile) -> RadialProfile {
    let value_src = s_par.clone();
    let deriv_src = s_par.clone();
    let eval = move |r: f64| value_src.value(r) + 0.5 * r * value_src.derivative(r);
    let deriv = move |r: f64| {
        let mut h = 1e-6 * r.abs().max(1.0);
        if let Some(b) = deriv_src.nearest_breakpoint(r) {
            let gap = (r - b).abs();
            if gap > 0.0 {
                h = h.min(0.4 * gap);
            }
        }
        let second = (deriv_src.derivative(r + h) - deriv_src.derivative(r - h)) / (2.0 * h);
        1.5 * deriv_src.derivative(r) + 0.5 * r * second
    };
    RadialProfile {
        eval: Arc::new(eval),
        deriv: Arc::new(deriv),
        breakpoints: s_par.breakpoints().to_vec(),
    }
}

/// Squared gradient magnitude `|Grad S|^2 = 2 (S_par'^2 + S_perp'^2)`.
///
/// This reduced form assumes the field is divergence-free; the gradient is
/// unbounded at a breakpoint, hence the error there.
pub fn gradient_norm_sq(field: &RadialField, r: f64) -> Result<f64, FieldError> {
    field.check_smooth_point(r)?;
    let dp = field.s_par.derivative(r);
    let dt = field.s_perp.derivative(r);
    Ok(2.0 * (dp * dp + dt * dt))
}

//! Expansion of candidate fields in a basis: coefficients, n-term error
//! curves, and decay-slope estimation.
//!
//! Coefficients are plain L2 projections, so they never change when more
//! modes are added. Error curves are integrated on a fixed composite grid
//! fine enough for the highest mode, with the running residual updated
//! incrementally, one mode at a time.

use crate::basis::{BasisMode, FunctionalParams};
use crate::fields::{FieldError, RadialField};
use crate::quadrature::{gauss_legendre, l2_inner, QuadratureError, QuadratureSpec, WeightMode};

#[derive(thiserror::Error, Debug)]
pub enum FitError {
    #[error("modes disagree in parameters or geometry (mode {index})")]
    MixedParameters { index: usize },

    #[error("no modes supplied")]
    NoModes,

    #[error("coefficient count {coefficients} does not match mode count {modes}")]
    LengthMismatch { coefficients: usize, modes: usize },

    #[error("slope window [{lo}, {hi}] has fewer than 10 usable points")]
    WindowTooShort { lo: usize, hi: usize },

    #[error("series value at n={n} is not positive; log-log slope undefined")]
    NonPositiveValue { n: usize },

    #[error(transparent)]
    Quadrature(#[from] QuadratureError),

    #[error(transparent)]
    Field(#[from] FieldError),
}

/// Log-log slopes fitted over the report window; absent when the window is
/// too short, a value is non-positive, or (for H1) the target is
/// discontinuous.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FitSlopes {
    pub e_l2: Option<f64>,
    pub e_h1: Option<f64>,
    pub b_odd: Option<f64>,
    pub b_even: Option<f64>,
}

/// Everything a fit produces: coefficients, error curves, slopes.
#[derive(Debug, Clone)]
pub struct FitReport {
    pub params: FunctionalParams,
    pub norm_weight: WeightMode,
    pub n_max: usize,
    pub coefficients: Vec<f64>,
    pub e_l2: Vec<f64>,
    /// Absent for discontinuous targets (H1 undefined there).
    pub e_h1: Option<Vec<f64>>,
    pub slopes: FitSlopes,
    /// Inclusive mode-index window the slopes were fitted on.
    pub window: (usize, usize),
}

fn check_family(target: &RadialField, modes: &[BasisMode]) -> Result<(), FitError> {
    let Some(first) = modes.first() else {
        return Err(FitError::NoModes);
    };
    for (index, mode) in modes.iter().enumerate() {
        if mode.params() != first.params() || mode.geometry() != first.geometry() {
            return Err(FitError::MixedParameters { index });
        }
    }
    target.same_geometry(modes[0].field())?;
    Ok(())
}

/// Expansion coefficients `b_N = <target, S_N>` for each supplied mode.
///
/// The quadrature panel count scales with the mode index so coefficient
/// accuracy does not degrade for oscillatory modes. Incremental by
/// construction: each `b_N` depends only on mode `N`.
pub fn project(
    target: &RadialField,
    modes: &[BasisMode],
    spec: &QuadratureSpec,
) -> Result<Vec<f64>, FitError> {
    check_family(target, modes)?;
    modes
        .iter()
        .map(|mode| {
            let mode_spec = spec.for_mode(mode.constants().index_n());
            Ok(l2_inner(target, mode.field(), &mode_spec)?)
        })
        .collect()
}

/// The truncated expansion `sum_{N <= n} b_N S_N` as a field.
pub fn partial_sum_field(
    modes: &[BasisMode],
    coefficients: &[f64],
    n: usize,
) -> Result<RadialField, FitError> {
    if coefficients.len() != modes.len() {
        return Err(FitError::LengthMismatch {
            coefficients: coefficients.len(),
            modes: modes.len(),
        });
    }
    let Some(first) = modes.first() else {
        return Err(FitError::NoModes);
    };
    let n = n.min(modes.len());
    let terms: Vec<(f64, RadialField)> = coefficients[..n]
        .iter()
        .zip(modes)
        .map(|(b, m)| (*b, m.field().clone()))
        .collect();
    Ok(RadialField::linear_combination(terms, first.geometry())?)
}

/// Fixed composite Gauss-Legendre grid fine enough for the fastest mode,
/// split at the target's breakpoints.
struct MasterGrid {
    nodes: Vec<f64>,
    /// Quadrature weight times the radial weight `w(r)` per node.
    weights: Vec<f64>,
}

impl MasterGrid {
    fn build(target: &RadialField, omega_max: f64, spec: &QuadratureSpec) -> Self {
        let geometry = target.geometry();
        let mut cuts = vec![geometry.r_inner()];
        cuts.extend(target.breakpoints());
        cuts.push(geometry.r_outer());
        let (gl_nodes, gl_weights) = gauss_legendre(spec.nodes_per_panel);
        let mut nodes = Vec::new();
        let mut weights = Vec::new();
        for seg in cuts.windows(2) {
            let (a, b) = (seg[0], seg[1]);
            let panels = spec.for_oscillation(omega_max, b - a).base_panels;
            let h = (b - a) / panels as f64;
            for p in 0..panels {
                let mid = a + h * (p as f64 + 0.5);
                let half = 0.5 * h;
                for (x, w) in gl_nodes.iter().zip(gl_weights) {
                    let r = mid + half * x;
                    nodes.push(r);
                    weights.push(w * half * spec.weight.weight(r));
                }
            }
        }
        Self { nodes, weights }
    }

    fn sum(&self, values: impl Iterator<Item = f64>) -> f64 {
        self.weights.iter().zip(values).map(|(w, v)| w * v).sum()
    }
}

/// Relative L2 (and, for smooth targets, H1) error of every n-term
/// approximation, `n = 1..=modes.len()`.
///
/// `e_l2(n) = ||target - sum_{N<=n} b_N S_N|| / ||target||`; the H1 variant
/// adds the squared-gradient term to numerator and denominator and is omitted
/// when the target has breakpoints.
pub fn error_curves(
    target: &RadialField,
    modes: &[BasisMode],
    coefficients: &[f64],
    spec: &QuadratureSpec,
) -> Result<(Vec<f64>, Option<Vec<f64>>), FitError> {
    check_family(target, modes)?;
    if coefficients.len() != modes.len() {
        return Err(FitError::LengthMismatch {
            coefficients: coefficients.len(),
            modes: modes.len(),
        });
    }
    let with_h1 = target.breakpoints().is_empty();
    let omega_max = modes.last().expect("nonempty").constants().omega();
    let grid = MasterGrid::build(target, omega_max, spec);
    let m = grid.nodes.len();

    // Running residual (target minus partial sum) values and derivatives.
    let mut rp: Vec<f64> = grid
        .nodes
        .iter()
        .map(|&r| target.s_par().value(r))
        .collect();
    let mut rt: Vec<f64> = grid
        .nodes
        .iter()
        .map(|&r| target.s_perp().value(r))
        .collect();
    let mut drp: Vec<f64> = grid
        .nodes
        .iter()
        .map(|&r| target.s_par().derivative(r))
        .collect();
    let mut drt: Vec<f64> = grid
        .nodes
        .iter()
        .map(|&r| target.s_perp().derivative(r))
        .collect();

    let l2_den = grid.sum((0..m).map(|i| rp[i] * rp[i] + 2.0 * rt[i] * rt[i]));
    let h1_den = l2_den + grid.sum((0..m).map(|i| 2.0 * (drp[i] * drp[i] + drt[i] * drt[i])));

    let mut e_l2 = Vec::with_capacity(modes.len());
    let mut e_h1 = with_h1.then(|| Vec::with_capacity(modes.len()));
    for (mode, &b) in modes.iter().zip(coefficients) {
        let field = mode.field();
        for i in 0..m {
            let r = grid.nodes[i];
            rp[i] -= b * field.s_par().value(r);
            rt[i] -= b * field.s_perp().value(r);
            drp[i] -= b * field.s_par().derivative(r);
            drt[i] -= b * field.s_perp().derivative(r);
        }
        let l2_num = grid.sum((0..m).map(|i| rp[i] * rp[i] + 2.0 * rt[i] * rt[i]));
        e_l2.push((l2_num / l2_den).max(0.0).sqrt());
        if let Some(curve) = e_h1.as_mut() {
            let grad_num = grid.sum((0..m).map(|i| 2.0 * (drp[i] * drp[i] + drt[i] * drt[i])));
            curve.push(((l2_num + grad_num) / h1_den).max(0.0).sqrt());
        }
    }
    Ok((e_l2, e_h1))
}

/// Least-squares slope of `log(value)` against `log(index)` over the
/// inclusive 1-based index window `[lo, hi]` of `series`.
pub fn decay_slope(series: &[f64], lo: usize, hi: usize) -> Result<f64, FitError> {
    let hi = hi.min(series.len());
    if lo < 1 || hi < lo || hi - lo + 1 < 10 {
        return Err(FitError::WindowTooShort { lo, hi });
    }
    let pairs: Vec<(usize, f64)> = (lo..=hi).map(|n| (n, series[n - 1])).collect();
    slope_of_pairs(&pairs)
}

/// Least-squares log-log slope of explicit `(index, value)` pairs; used for
/// the odd/even coefficient subsequences.
pub fn slope_of_pairs(pairs: &[(usize, f64)]) -> Result<f64, FitError> {
    if pairs.len() < 10 {
        let lo = pairs.first().map_or(0, |p| p.0);
        let hi = pairs.last().map_or(0, |p| p.0);
        return Err(FitError::WindowTooShort { lo, hi });
    }
    let mut xs = Vec::with_capacity(pairs.len());
    let mut ys = Vec::with_capacity(pairs.len());
    for &(n, v) in pairs {
        if v <= 0.0 || v.is_nan() {
            return Err(FitError::NonPositiveValue { n });
        }
        xs.push((n as f64).ln());
        ys.push(v.ln());
    }
    let n = xs.len() as f64;
    let mean_x = xs.iter().sum::<f64>() / n;
    let mean_y = ys.iter().sum::<f64>() / n;
    let mut num = 0.0;
    let mut den = 0.0;
    for (x, y) in xs.iter().zip(&ys) {
        num += (x - mean_x) * (y - mean_y);
        den += (x - mean_x) * (x - mean_x);
    }
    Ok(num / den)
}

/// Default slope window, matching reading the curves "at large n".
pub const DEFAULT_WINDOW: (usize, usize) = (20, 100);

/// Run the whole fit: coefficients, error curves, and slopes over `window`
/// (clipped to the available mode count).
pub fn fit_report(
    target: &RadialField,
    modes: &[BasisMode],
    spec: &QuadratureSpec,
    window: (usize, usize),
) -> Result<FitReport, FitError> {
    let coefficients = project(target, modes, spec)?;
    let (e_l2, e_h1) = error_curves(target, modes, &coefficients, spec)?;
    let n_max = modes.len();
    let window = (window.0.min(n_max).max(1), window.1.min(n_max));

    // Coefficient magnitudes, floored so an exactly zero coefficient does not
    // poison the log-log fit.
    let magnitude = |b: f64| b.abs().max(f64::MIN_POSITIVE);
    let odd: Vec<(usize, f64)> = (window.0..=window.1)
        .filter(|n| n % 2 == 1)
        .map(|n| (n, magnitude(coefficients[n - 1])))
        .collect();
    let even: Vec<(usize, f64)> = (window.0..=window.1)
        .filter(|n| n % 2 == 0)
        .map(|n| (n, magnitude(coefficients[n - 1])))
        .collect();

    let slopes = FitSlopes {
        e_l2: decay_slope(&e_l2, window.0, window.1).ok(),
        e_h1: e_h1
            .as_ref()
            .and_then(|curve| decay_slope(curve, window.0, window.1).ok()),
        b_odd: slope_of_pairs(&odd).ok(),
        b_even: slope_of_pairs(&even).ok(),
    };
    Ok(FitReport {
        params: *modes[0].params(),
        norm_weight: spec.weight,
        n_max,
        coefficients,
        e_l2,
        e_h1,
        slopes,
        window,
    })
}

impl FitReport {
    /// JSON with the fixed field order
    /// `p, k, norm_weight, n_max, coefficients, e_l2, e_h1, slopes, window`.
    pub fn to_json(&self) -> String {
        fn num(x: f64) -> String {
            format!("{x:e}")
        }
        fn arr(values: &[f64]) -> String {
            let body: Vec<String> = values.iter().map(|v| num(*v)).collect();
            format!("[{}]", body.join(", "))
        }
        fn opt(x: Option<f64>) -> String {
            x.map_or_else(|| "null".to_string(), num)
        }
        let e_h1 = self
            .e_h1
            .as_ref()
            .map_or_else(|| "null".to_string(), |curve| arr(curve));
        format!(
            "{{\"p\": {}, \"k\": {}, \"norm_weight\": \"{}\", \"n_max\": {}, \"coefficients\": {}, \"e_l2\": {}, \"e_h1\": {}, \"slopes\": {{\"e_l2\": {}, \"e_h1\": {}, \"b_odd\": {}, \"b_even\": {}}}, \"window\": [{}, {}]}}",
            num(self.params.p()),
            num(self.params.k()),
            self.norm_weight.as_str(),
            self.n_max,
            arr(&self.coefficients),
            arr(&self.e_l2),
            e_h1,
            opt(self.slopes.e_l2),
            opt(self.slopes.e_h1),
            opt(self.slopes.b_odd),
            opt(self.slopes.b_even),
            self.window.0,
            self.window.1,
        )
    }
}

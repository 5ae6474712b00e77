//! Benchmark residual stress fields to expand in the basis.
//!
//! Two closed-form candidates: the thermoelastic stress of a shell under a
//! linear temperature profile (smooth), and the shrink-fit stress of two
//! interfering shells (transverse component jumps at the interface). Sampled
//! fields arrive as CSV and are spline-interpolated per smooth segment.

use thiserror::Error;

use crate::fields::{FieldError, RadialField, RadialProfile, ShellGeometry};

#[derive(Error, Debug)]
pub enum CandidateError {
    #[error("invalid candidate spec: {0}")]
    InvalidSpec(String),

    #[error("CSV line {line}: {detail}")]
    CsvSchema { line: usize, detail: String },

    #[error("CSV radii must be strictly increasing (line {line})")]
    NonMonotoneRadii { line: usize },

    #[error("samples span [{first}, {last}] but the shell is [{r_inner}, {r_outer}]")]
    SpanError {
        first: f64,
        last: f64,
        r_inner: f64,
        r_outer: f64,
    },

    #[error(transparent)]
    Field(#[from] FieldError),
}

/// Thermoelastic shell: dimensionless moduli, thermal expansion coefficient,
/// and the slope constant of the linear temperature profile `T(r) = c r / r_o`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ThermoelasticSpec {
    kappa: f64,
    mu: f64,
    alpha: f64,
    c: f64,
    geometry: ShellGeometry,
}

impl Default for ThermoelasticSpec {
    /// Aluminium shell in dimensionless form: `kappa = 2.8`, `mu = 1`,
    /// `alpha = 1.75e-2`, `c = 1/9`.
    fn default() -> Self {
        Self {
            kappa: 2.8,
            mu: 1.0,
            alpha: 1.75e-2,
            c: 1.0 / 9.0,
            geometry: ShellGeometry::unit_shell(),
        }
    }
}

impl ThermoelasticSpec {
    pub fn new(
        kappa: f64,
        mu: f64,
        alpha: f64,
        c: f64,
        geometry: ShellGeometry,
    ) -> Result<Self, CandidateError> {
        if kappa <= 0.0 || mu <= 0.0 || kappa.is_nan() || mu.is_nan() {
            return Err(CandidateError::InvalidSpec(format!(
                "moduli must be positive (kappa={kappa}, mu={mu})"
            )));
        }
        if c == 0.0 || !c.is_finite() || !alpha.is_finite() {
            return Err(CandidateError::InvalidSpec(format!(
                "need finite alpha and nonzero c (alpha={alpha}, c={c})"
            )));
        }
        Ok(Self {
            kappa,
            mu,
            alpha,
            c,
            geometry,
        })
    }

    pub fn kappa(&self) -> f64 {
        self.kappa
    }

    pub fn mu(&self) -> f64 {
        self.mu
    }

    pub fn alpha(&self) -> f64 {
        self.alpha
    }

    pub fn c(&self) -> f64 {
        self.c
    }

    pub fn geometry(&self) -> ShellGeometry {
        self.geometry
    }

    /// Shared prefactor and polynomial constants of the closed form.
    ///
    /// The radial stress collapses to `K (a - D r - q^3 / r^3)` with
    /// `D = r_i^2 + r_i r_o + r_o^2`, `q = r_i r_o`, `a = (r_i + r_o)(D - q)`;
    /// the factor `K = 9 c alpha kappa mu / ((3 kappa + 4 mu) r_o D)`.
    fn coefficients(&self) -> (f64, f64, f64, f64) {
        let (ri, ro) = (self.geometry.r_inner(), self.geometry.r_outer());
        let d = ri * ri + ri * ro + ro * ro;
        let q = ri * ro;
        let a = (ri + ro) * (d - q);
        let k = 9.0 * self.c * self.alpha * self.kappa * self.mu
            / ((3.0 * self.kappa + 4.0 * self.mu) * ro * d);
        (k, a, d, q * q * q)
    }
}

/// The thermoelastic residual stress field: smooth, traction-free, in
/// equilibrium by construction.
pub fn thermoelastic_field(spec: &ThermoelasticSpec) -> RadialField {
    let (k, a, d, q3) = spec.coefficients();
    let s_par = RadialProfile::new(
        move |r| k * (a - d * r - q3 / (r * r * r)),
        move |r| k * (-d + 3.0 * q3 / (r * r * r * r)),
        Vec::new(),
    )
    .expect("no breakpoints");
    let s_perp = RadialProfile::new(
        move |r| k * (a - 1.5 * d * r + 0.5 * q3 / (r * r * r)),
        move |r| k * (-1.5 * d - 1.5 * q3 / (r * r * r * r)),
        Vec::new(),
    )
    .expect("no breakpoints");
    RadialField::new(s_par, s_perp, spec.geometry()).expect("no breakpoints")
}

/// Residual of the governing equation
/// `r S_par'' + 4 S_par' + 36 alpha kappa mu T' / (3 kappa + 4 mu)`
/// at radius `r`, evaluated with analytic derivatives. Zero for the closed
/// form up to round-off.
pub fn thermoelastic_governing_residual(spec: &ThermoelasticSpec, r: f64) -> f64 {
    let (k, _, d, q3) = spec.coefficients();
    let d1 = k * (-d + 3.0 * q3 / (r * r * r * r));
    let d2 = k * (-12.0 * q3 / (r * r * r * r * r));
    let t_slope = spec.c / spec.geometry.r_outer();
    r * d2
        + 4.0 * d1
        + 36.0 * spec.alpha * spec.kappa * spec.mu * t_slope / (3.0 * spec.kappa + 4.0 * spec.mu)
}

/// Shrink-fitted pair of shells: interface radius `r_m`, radial interference
/// `delta`, common dimensionless moduli.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ShrinkFitSpec {
    kappa: f64,
    mu: f64,
    r_m: f64,
    delta: f64,
    geometry: ShellGeometry,
}

impl Default for ShrinkFitSpec {
    /// Interface at the mean radius, interference one percent of the outer
    /// radius: `kappa = 3`, `mu = 1`, `r_m = 0.75`, `delta = 0.01`.
    fn default() -> Self {
        Self {
            kappa: 3.0,
            mu: 1.0,
            r_m: 0.75,
            delta: 0.01,
            geometry: ShellGeometry::unit_shell(),
        }
    }
}

impl ShrinkFitSpec {
    pub fn new(
        kappa: f64,
        mu: f64,
        r_m: f64,
        delta: f64,
        geometry: ShellGeometry,
    ) -> Result<Self, CandidateError> {
        if kappa <= 0.0 || mu <= 0.0 || kappa.is_nan() || mu.is_nan() {
            return Err(CandidateError::InvalidSpec(format!(
                "moduli must be positive (kappa={kappa}, mu={mu})"
            )));
        }
        if !(r_m > geometry.r_inner() && r_m < geometry.r_outer()) || r_m.is_nan() {
            return Err(CandidateError::InvalidSpec(format!(
                "interface r_m={r_m} must lie strictly inside ({}, {})",
                geometry.r_inner(),
                geometry.r_outer()
            )));
        }
        if delta <= 0.0 || delta.is_nan() {
            return Err(CandidateError::InvalidSpec(format!(
                "interference delta={delta} must be positive"
            )));
        }
        Ok(Self {
            kappa,
            mu,
            r_m,
            delta,
            geometry,
        })
    }

    pub fn kappa(&self) -> f64 {
        self.kappa
    }

    pub fn mu(&self) -> f64 {
        self.mu
    }

    pub fn r_m(&self) -> f64 {
        self.r_m
    }

    pub fn delta(&self) -> f64 {
        self.delta
    }

    pub fn geometry(&self) -> ShellGeometry {
        self.geometry
    }
}

/// Interface pressure ensuring displacement compatibility across the fit:
///
/// `p0 = 12 delta kappa mu (r_o^3 - r_m^3)(r_m^3 - r_i^3)
///       / ((3 kappa + 4 mu) r_m^4 (r_o^3 - r_i^3))`.
pub fn shrinkfit_pressure(spec: &ShrinkFitSpec) -> f64 {
    let (ri, ro, rm) = (spec.geometry.r_inner(), spec.geometry.r_outer(), spec.r_m);
    let (ri3, ro3, rm3) = (ri.powi(3), ro.powi(3), rm.powi(3));
    12.0 * spec.delta * spec.kappa * spec.mu * (ro3 - rm3) * (rm3 - ri3)
        / ((3.0 * spec.kappa + 4.0 * spec.mu) * rm3 * rm * (ro3 - ri3))
}

/// The shrink-fit residual stress field: piecewise closed form with the
/// interface radius as declared breakpoint. The radial component is
/// continuous (`-p0` on both sides of `r_m`); the transverse component jumps.
/// Evaluation exactly at `r_m` uses the outer branch.
pub fn shrinkfit_field(spec: &ShrinkFitSpec) -> RadialField {
    let p0 = shrinkfit_pressure(spec);
    let (ri, ro, rm) = (spec.geometry.r_inner(), spec.geometry.r_outer(), spec.r_m);
    let ci = 1.0 / (1.0 / ri.powi(3) - 1.0 / rm.powi(3));
    let co = 1.0 / (1.0 / rm.powi(3) - 1.0 / ro.powi(3));
    let inv_ri3 = 1.0 / ri.powi(3);
    let inv_ro3 = 1.0 / ro.powi(3);

    let s_par = RadialProfile::new(
        move |r| {
            let inv_r3 = 1.0 / (r * r * r);
            if r < rm {
                -p0 * ci * (inv_ri3 - inv_r3)
            } else {
                -p0 * co * (inv_r3 - inv_ro3)
            }
        },
        move |r| {
            let inv_r4 = 1.0 / (r * r * r * r);
            if r < rm {
                -3.0 * p0 * ci * inv_r4
            } else {
                3.0 * p0 * co * inv_r4
            }
        },
        vec![rm],
    )
    .expect("interface breakpoint is ordered");
    let s_perp = RadialProfile::new(
        move |r| {
            let inv_r3 = 1.0 / (r * r * r);
            if r < rm {
                -p0 * ci * (inv_ri3 + 0.5 * inv_r3)
            } else {
                p0 * co * (inv_ro3 + 0.5 * inv_r3)
            }
        },
        move |r| {
            let inv_r4 = 1.0 / (r * r * r * r);
            if r < rm {
                1.5 * p0 * ci * inv_r4
            } else {
                -1.5 * p0 * co * inv_r4
            }
        },
        vec![rm],
    )
    .expect("interface breakpoint is ordered");
    RadialField::new(s_par, s_perp, spec.geometry()).expect("breakpoint inside shell")
}

/// A field built from CSV samples, plus non-fatal data-quality warnings.
#[derive(Debug, Clone)]
pub struct SampledField {
    pub field: RadialField,
    pub warnings: Vec<String>,
}

/// Relative threshold for the equilibrium and boundary warnings on sampled
/// fields.
const SAMPLE_WARN_REL: f64 = 1e-3;

/// Parse `r,s_par,s_perp` CSV content into a spline-interpolated field.
///
/// Radii must be strictly increasing and span the shell; breakpoints are
/// declared out-of-band and split the spline fit into smooth segments.
/// Warnings (not errors) flag samples violating equilibrium or the
/// traction-free boundary by more than `1e-3` of the field scale.
pub fn load_sampled_field(
    csv: &str,
    geometry: ShellGeometry,
    breakpoints: &[f64],
) -> Result<SampledField, CandidateError> {
    let mut radii = Vec::new();
    let mut par = Vec::new();
    let mut perp = Vec::new();
    let mut saw_header = false;
    for (idx, raw) in csv.lines().enumerate() {
        let line = raw.trim();
        if line.is_empty() {
            continue;
        }
        if !saw_header {
            let normalized: String = line.split(',').map(str::trim).collect::<Vec<_>>().join(",");
            if normalized != "r,s_par,s_perp" {
                return Err(CandidateError::CsvSchema {
                    line: idx + 1,
                    detail: format!("expected header `r,s_par,s_perp`, got `{line}`"),
                });
            }
            saw_header = true;
            continue;
        }
        let cols: Vec<&str> = line.split(',').map(str::trim).collect();
        if cols.len() != 3 {
            return Err(CandidateError::CsvSchema {
                line: idx + 1,
                detail: format!("expected 3 columns, got {}", cols.len()),
            });
        }
        let mut parsed = [0.0; 3];
        for (slot, col) in parsed.iter_mut().zip(&cols) {
            *slot = col.parse().map_err(|_| CandidateError::CsvSchema {
                line: idx + 1,
                detail: format!("not a number: `{col}`"),
            })?;
        }
        if let Some(&last) = radii.last() {
            if parsed[0] <= last {
                return Err(CandidateError::NonMonotoneRadii { line: idx + 1 });
            }
        }
        radii.push(parsed[0]);
        par.push(parsed[1]);
        perp.push(parsed[2]);
    }
    if !saw_header {
        return Err(CandidateError::CsvSchema {
            line: 1,
            detail: "empty input".into(),
        });
    }
    if radii.len() < 2 {
        return Err(CandidateError::CsvSchema {
            line: 1,
            detail: format!("need at least 2 samples, got {}", radii.len()),
        });
    }
    let span_tol = 1e-9 * geometry.r_outer().max(1.0);
    let (first, last) = (radii[0], *radii.last().expect("nonempty"));
    if (first - geometry.r_inner()).abs() > span_tol || (last - geometry.r_outer()).abs() > span_tol
    {
        return Err(CandidateError::SpanError {
            first,
            last,
            r_inner: geometry.r_inner(),
            r_outer: geometry.r_outer(),
        });
    }

    let s_par = RadialProfile::from_samples(&radii, &par, breakpoints)?;
    let s_perp = RadialProfile::from_samples(&radii, &perp, breakpoints)?;
    let field = RadialField::new(s_par, s_perp, geometry)?;

    let scale = par
        .iter()
        .chain(&perp)
        .fold(0.0f64, |acc, v| acc.max(v.abs()));
    let mut warnings = Vec::new();
    if scale > 0.0 {
        let threshold = SAMPLE_WARN_REL * scale;
        let mut worst: Option<(f64, f64)> = None;
        let mut count = 0usize;
        for &r in &radii {
            let Ok(res) = crate::fields::equilibrium_residual(&field, r) else {
                continue; // node on a breakpoint
            };
            if res.abs() > threshold {
                count += 1;
                if worst.is_none_or(|(_, w)| res.abs() > w) {
                    worst = Some((r, res.abs()));
                }
            }
        }
        if let Some((r, value)) = worst {
            warnings.push(format!(
                "equilibrium residual exceeds {threshold:.3e} at {count} node(s); worst {value:.3e} at r={r}"
            ));
        }
        if par[0].abs() > threshold {
            warnings.push(format!(
                "S_par(r_inner) = {:.3e} violates the traction-free boundary",
                par[0]
            ));
        }
        if par[par.len() - 1].abs() > threshold {
            warnings.push(format!(
                "S_par(r_outer) = {:.3e} violates the traction-free boundary",
                par[par.len() - 1]
            ));
        }
    }
    Ok(SampledField { field, warnings })
}

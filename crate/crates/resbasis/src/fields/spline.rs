//! Cubic spline interpolation for sampled radial profiles.
//!
//! Not-a-knot end conditions (the spline reproduces cubics exactly, and avoids
//! the O(h^2) end-layer error of natural splines). Sampled fields with
//! declared discontinuities are fit segment-wise by [`PiecewiseSpline`].

use super::FieldError;

/// A single not-a-knot cubic spline through strictly increasing sample points.
#[derive(Debug, Clone)]
pub struct CubicSpline {
    xs: Vec<f64>,
    ys: Vec<f64>,
    /// Second derivatives ("moments") at the knots.
    m: Vec<f64>,
}

impl CubicSpline {
    pub fn fit(xs: &[f64], ys: &[f64]) -> Result<Self, FieldError> {
        assert_eq!(xs.len(), ys.len(), "sample count mismatch");
        if xs.len() < 2 {
            return Err(FieldError::TooFewSamples {
                needed: 2,
                got: xs.len(),
            });
        }
        if let Some(i) = xs.windows(2).position(|w| w[0] >= w[1]) {
            return Err(FieldError::NonMonotoneSamples(i + 1));
        }
        let m = solve_moments(xs, ys);
        Ok(Self {
            xs: xs.to_vec(),
            ys: ys.to_vec(),
            m,
        })
    }

    /// Index of the polynomial piece covering `x` (end pieces extend outward).
    fn segment(&self, x: f64) -> usize {
        let n = self.xs.len();
        match self.xs.partition_point(|&k| k <= x) {
            0 => 0,
            i => (i - 1).min(n - 2),
        }
    }

    pub fn value(&self, x: f64) -> f64 {
        let i = self.segment(x);
        let (x0, x1) = (self.xs[i], self.xs[i + 1]);
        let h = x1 - x0;
        let (a, b) = (x1 - x, x - x0);
        self.m[i] * a * a * a / (6.0 * h)
            + self.m[i + 1] * b * b * b / (6.0 * h)
            + (self.ys[i] / h - self.m[i] * h / 6.0) * a
            + (self.ys[i + 1] / h - self.m[i + 1] * h / 6.0) * b
    }

    pub fn derivative(&self, x: f64) -> f64 {
        let i = self.segment(x);
        let (x0, x1) = (self.xs[i], self.xs[i + 1]);
        let h = x1 - x0;
        let (a, b) = (x1 - x, x - x0);
        -self.m[i] * a * a / (2.0 * h)
            + self.m[i + 1] * b * b / (2.0 * h)
            + (self.ys[i + 1] - self.ys[i]) / h
            - (self.m[i + 1] - self.m[i]) * h / 6.0
    }
}

/// Moments of the not-a-knot spline.
fn solve_moments(xs: &[f64], ys: &[f64]) -> Vec<f64> {
    let n = xs.len();
    let h: Vec<f64> = xs.windows(2).map(|w| w[1] - w[0]).collect();
    let d: Vec<f64> = (0..n - 1).map(|i| (ys[i + 1] - ys[i]) / h[i]).collect();

    if n == 2 {
        return vec![0.0, 0.0];
    }
    if n == 3 {
        // Both not-a-knot conditions collapse: the interpolant is the parabola
        // through the three points, with constant second derivative.
        let m = 2.0 * (d[1] - d[0]) / (h[0] + h[1]);
        return vec![m; 3];
    }

    // Interior equations for i = 1..n-2:
    //   h[i-1]/6 M[i-1] + (h[i-1]+h[i])/3 M[i] + h[i]/6 M[i+1] = d[i] - d[i-1]
    // Not-a-knot rows eliminate M[0] and M[n-1]:
    //   M[0] = ((h0+h1) M1 - h0 M2) / h1,   symmetrically at the right end.
    let k = n - 2; // unknowns M[1..=n-2]
    let mut sub = vec![0.0; k];
    let mut diag = vec![0.0; k];
    let mut sup = vec![0.0; k];
    let mut rhs = vec![0.0; k];
    for (j, i) in (1..n - 1).enumerate() {
        sub[j] = h[i - 1] / 6.0;
        diag[j] = (h[i - 1] + h[i]) / 3.0;
        sup[j] = h[i] / 6.0;
        rhs[j] = d[i] - d[i - 1];
    }
    // Fold the M[0] elimination into the first row.
    diag[0] += sub[0] * (h[0] + h[1]) / h[1];
    sup[0] -= sub[0] * h[0] / h[1];
    sub[0] = 0.0;
    // Fold the M[n-1] elimination into the last row.
    let (hl, hp) = (h[n - 2], h[n - 3]);
    diag[k - 1] += sup[k - 1] * (hl + hp) / hp;
    sub[k - 1] -= sup[k - 1] * hl / hp;
    sup[k - 1] = 0.0;

    // Thomas algorithm.
    let mut c = vec![0.0; k];
    let mut g = vec![0.0; k];
    c[0] = sup[0] / diag[0];
    g[0] = rhs[0] / diag[0];
    for j in 1..k {
        let denom = diag[j] - sub[j] * c[j - 1];
        c[j] = sup[j] / denom;
        g[j] = (rhs[j] - sub[j] * g[j - 1]) / denom;
    }
    let mut inner = vec![0.0; k];
    inner[k - 1] = g[k - 1];
    for j in (0..k - 1).rev() {
        inner[j] = g[j] - c[j] * inner[j + 1];
    }

    let mut m = vec![0.0; n];
    m[1..n - 1].copy_from_slice(&inner);
    m[0] = ((h[0] + h[1]) * m[1] - h[0] * m[2]) / h[1];
    m[n - 1] = ((hl + hp) * m[n - 2] - hl * m[n - 3]) / hp;
    m
}

/// Splines fit independently on each smooth segment between breakpoints.
///
/// A sample lying exactly on a breakpoint is assigned to the segment on its
/// left; evaluation at a breakpoint likewise uses the left segment.
#[derive(Debug, Clone)]
pub struct PiecewiseSpline {
    /// `(upper_bound, spline)` per segment; the last bound is +inf.
    segments: Vec<(f64, CubicSpline)>,
}

impl PiecewiseSpline {
    pub fn fit(xs: &[f64], ys: &[f64], breakpoints: &[f64]) -> Result<Self, FieldError> {
        assert_eq!(xs.len(), ys.len(), "sample count mismatch");
        if !breakpoints.windows(2).all(|w| w[0] < w[1]) {
            return Err(FieldError::UnorderedBreakpoints(breakpoints.to_vec()));
        }
        if let Some(i) = xs.windows(2).position(|w| w[0] >= w[1]) {
            return Err(FieldError::NonMonotoneSamples(i + 1));
        }
        let mut segments = Vec::with_capacity(breakpoints.len() + 1);
        let mut start = 0usize;
        for &b in breakpoints {
            let end = xs[start..].partition_point(|&x| x <= b) + start;
            if end - start < 2 {
                return Err(FieldError::TooFewSamples {
                    needed: 2,
                    got: end - start,
                });
            }
            segments.push((b, CubicSpline::fit(&xs[start..end], &ys[start..end])?));
            start = end;
        }
        if xs.len() - start < 2 {
            return Err(FieldError::TooFewSamples {
                needed: 2,
                got: xs.len() - start,
            });
        }
        segments.push((f64::INFINITY, CubicSpline::fit(&xs[start..], &ys[start..])?));
        Ok(Self { segments })
    }

    fn pick(&self, x: f64) -> &CubicSpline {
        for (bound, s) in &self.segments {
            if x <= *bound {
                return s;
            }
        }
        &self.segments.last().expect("at least one segment").1
    }

    pub fn value(&self, x: f64) -> f64 {
        self.pick(x).value(x)
    }

    pub fn derivative(&self, x: f64) -> f64 {
        self.pick(x).derivative(x)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn reproduces_cubic_polynomials_exactly() {
        let f = |x: f64| 2.0 * x * x * x - x * x + 3.0 * x - 5.0;
        let df = |x: f64| 6.0 * x * x - 2.0 * x + 3.0;
        let xs: Vec<f64> = (0..12).map(|i| 0.5 + 0.05 * i as f64).collect();
        let ys: Vec<f64> = xs.iter().map(|&x| f(x)).collect();
        let s = CubicSpline::fit(&xs, &ys).unwrap();
        for i in 0..=50 {
            let x = 0.5 + 0.55 * i as f64 / 50.0;
            assert!((s.value(x) - f(x)).abs() < 1e-12, "value at {x}");
            assert!((s.derivative(x) - df(x)).abs() < 1e-10, "derivative at {x}");
        }
    }

    #[test]
    fn three_point_fit_is_the_parabola() {
        let xs = [0.0, 1.0, 3.0];
        let ys = [1.0, 2.0, 10.0]; // y = x^2 + 1 at these points
        let s = CubicSpline::fit(&xs, &ys).unwrap();
        assert!((s.value(2.0) - 5.0).abs() < 1e-13);
        assert!((s.derivative(2.0) - 4.0).abs() < 1e-13);
    }

    #[test]
    fn smooth_function_converges() {
        let f = |x: f64| (4.0 * x).sin();
        let xs: Vec<f64> = (0..=200).map(|i| 0.5 + 0.5 * i as f64 / 200.0).collect();
        let ys: Vec<f64> = xs.iter().map(|&x| f(x)).collect();
        let s = CubicSpline::fit(&xs, &ys).unwrap();
        let mut worst = 0.0f64;
        for i in 0..=1000 {
            let x = 0.5 + 0.5 * i as f64 / 1000.0;
            worst = worst.max((s.value(x) - f(x)).abs());
        }
        assert!(worst < 1e-8, "sup error {worst}");
    }

    #[test]
    fn piecewise_keeps_segments_independent() {
        // Step in the value at x = 1: left y = x, right y = x + 10.
        let xs: Vec<f64> = (0..=20).map(|i| 0.5 + i as f64 * 0.05).collect();
        let ys: Vec<f64> = xs
            .iter()
            .map(|&x| if x <= 1.0 { x } else { x + 10.0 })
            .collect();
        let s = PiecewiseSpline::fit(&xs, &ys, &[1.0]).unwrap();
        assert!((s.value(0.9) - 0.9).abs() < 1e-12);
        assert!((s.value(1.0) - 1.0).abs() < 1e-12); // breakpoint belongs to the left
        assert!((s.value(1.2) - 11.2).abs() < 1e-12);
        assert!((s.derivative(0.7) - 1.0).abs() < 1e-10);
        assert!((s.derivative(1.3) - 1.0).abs() < 1e-10);
    }

    #[test]
    fn rejects_non_monotone_and_short_input() {
        assert!(CubicSpline::fit(&[0.0, 0.0, 1.0], &[0.0; 3]).is_err());
        assert!(CubicSpline::fit(&[0.0], &[0.0]).is_err());
        assert!(PiecewiseSpline::fit(&[0.0, 0.4, 0.6, 1.0], &[0.0; 4], &[0.5, 0.45]).is_err());
    }
}

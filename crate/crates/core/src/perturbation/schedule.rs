//! Time-dependent perturbation amplitudes `h_s`.
//!
//! Every schedule answers value, first-derivative and integral queries, and
//! reports exact bounds of `h` over a sub-interval (needed for thinning).

use std::fmt;
use std::sync::Arc;

use super::PerturbationError;
use crate::numerics::integrate_adaptive;

type ScalarFn = Arc<dyn Fn(f64) -> f64 + Send + Sync>;

/// Natural cubic spline stored as per-segment polynomial coefficients in the
/// local variable `u = s - t_i`.
#[derive(Debug, Clone, PartialEq)]
struct CubicSpline {
    knots: Vec<f64>,
    values: Vec<f64>,
    /// `[c0, c1, c2, c3]` per segment.
    coefficients: Vec<[f64; 4]>,
}

impl CubicSpline {
    fn new(knots: Vec<f64>, values: Vec<f64>) -> Result<Self, PerturbationError> {
        if knots.len() != values.len() {
            return Err(PerturbationError::InvalidGrid(format!(
                "{} times but {} values",
                knots.len(),
                values.len()
            )));
        }
        if knots.len() < 2 {
            return Err(PerturbationError::InvalidGrid(
                "a grid needs at least two points".into(),
            ));
        }
        if knots.iter().chain(&values).any(|v| !v.is_finite()) {
            return Err(PerturbationError::InvalidGrid("non-finite grid entry".into()));
        }
        if knots.windows(2).any(|w| w[1] <= w[0]) {
            return Err(PerturbationError::InvalidGrid(
                "grid times must be strictly increasing".into(),
            ));
        }
        let n = knots.len();
        let widths: Vec<f64> = knots.windows(2).map(|w| w[1] - w[0]).collect();
        // second derivatives, natural boundary (zero at both ends)
        let mut second = vec![0.0; n];
        if n > 2 {
            let m = n - 2;
            let mut diag = vec![0.0; m];
            let mut upper = vec![0.0; m];
            let mut rhs = vec![0.0; m];
            for i in 0..m {
                let (h0, h1) = (widths[i], widths[i + 1]);
                diag[i] = 2.0 * (h0 + h1);
                upper[i] = h1;
                rhs[i] = 6.0
                    * ((values[i + 2] - values[i + 1]) / h1 - (values[i + 1] - values[i]) / h0);
            }
            // Thomas algorithm; the system is symmetric and diagonally dominant
            for i in 1..m {
                let factor = widths[i] / diag[i - 1];
                diag[i] -= factor * upper[i - 1];
                rhs[i] -= factor * rhs[i - 1];
            }
            second[m] = rhs[m - 1] / diag[m - 1];
            for i in (0..m - 1).rev() {
                second[i + 1] = (rhs[i] - upper[i] * second[i + 2]) / diag[i];
            }
        }
        let coefficients = (0..n - 1)
            .map(|i| {
                let h = widths[i];
                [
                    values[i],
                    (values[i + 1] - values[i]) / h - h * (2.0 * second[i] + second[i + 1]) / 6.0,
                    second[i] / 2.0,
                    (second[i + 1] - second[i]) / (6.0 * h),
                ]
            })
            .collect();
        Ok(Self {
            knots,
            values,
            coefficients,
        })
    }

    fn segment(&self, s: f64) -> usize {
        match self.knots.binary_search_by(|k| k.total_cmp(&s)) {
            Ok(i) => i.min(self.coefficients.len() - 1),
            Err(i) => (i.max(1) - 1).min(self.coefficients.len() - 1),
        }
    }

    fn value(&self, s: f64) -> f64 {
        let i = self.segment(s);
        let u = s - self.knots[i];
        let c = &self.coefficients[i];
        c[0] + u * (c[1] + u * (c[2] + u * c[3]))
    }

    fn derivative(&self, s: f64) -> f64 {
        let i = self.segment(s);
        let u = s - self.knots[i];
        let c = &self.coefficients[i];
        c[1] + u * (2.0 * c[2] + 3.0 * u * c[3])
    }

    fn antiderivative_in_segment(c: &[f64; 4], u: f64) -> f64 {
        u * (c[0] + u * (c[1] / 2.0 + u * (c[2] / 3.0 + u * c[3] / 4.0)))
    }

    fn integral(&self, s0: f64, s1: f64) -> f64 {
        let mut total = 0.0;
        let (i0, i1) = (self.segment(s0), self.segment(s1));
        for i in i0..=i1 {
            let lo = if i == i0 { s0 } else { self.knots[i] };
            let hi = if i == i1 { s1 } else { self.knots[i + 1] };
            let c = &self.coefficients[i];
            total += Self::antiderivative_in_segment(c, hi - self.knots[i])
                - Self::antiderivative_in_segment(c, lo - self.knots[i]);
        }
        total
    }

    fn bounds(&self, s0: f64, s1: f64) -> (f64, f64) {
        let mut lo = self.value(s0).min(self.value(s1));
        let mut hi = self.value(s0).max(self.value(s1));
        let mut consider = |s: f64| {
            if s > s0 && s < s1 {
                let v = self.value(s);
                lo = lo.min(v);
                hi = hi.max(v);
            }
        };
        for (i, c) in self.coefficients.iter().enumerate() {
            let t0 = self.knots[i];
            consider(t0);
            // roots of c1 + 2 c2 u + 3 c3 u^2
            let (qa, qb, qc) = (3.0 * c[3], 2.0 * c[2], c[1]);
            if qa.abs() < 1e-300 {
                if qb.abs() > 1e-300 {
                    consider(t0 - qc / qb);
                }
            } else {
                let disc = qb * qb - 4.0 * qa * qc;
                if disc >= 0.0 {
                    let sq = disc.sqrt();
                    consider(t0 + (-qb + sq) / (2.0 * qa));
                    consider(t0 + (-qb - sq) / (2.0 * qa));
                }
            }
        }
        (lo, hi)
    }
}

#[derive(Clone)]
enum Kind {
    Constant(f64),
    Grid(CubicSpline),
    Callable {
        value: ScalarFn,
        derivative: ScalarFn,
        bounds: (f64, f64),
    },
}

/// Amplitude `h_s` on a support interval `[start, end]`.
#[derive(Clone)]
pub struct AmplitudeSchedule {
    kind: Kind,
    start: f64,
    end: f64,
    scale: f64,
}

impl fmt::Debug for AmplitudeSchedule {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let kind = match &self.kind {
            Kind::Constant(h) => format!("constant({h})"),
            Kind::Grid(spline) => format!("grid({} points)", spline.knots.len()),
            Kind::Callable { bounds, .. } => format!("callable(bounds {bounds:?})"),
        };
        f.debug_struct("AmplitudeSchedule")
            .field("kind", &kind)
            .field("support", &(self.start, self.end))
            .field("scale", &self.scale)
            .finish()
    }
}

impl AmplitudeSchedule {
    /// Constant amplitude on `[0, ∞)`.
    pub fn constant(h: f64) -> Self {
        Self {
            kind: Kind::Constant(h),
            start: 0.0,
            end: f64::INFINITY,
            scale: 1.0,
        }
    }

    pub fn zero() -> Self {
        Self::constant(0.0)
    }

    /// Natural cubic spline through `(times[i], values[i])`; the support is
    /// `[times[0], times[last]]`.
    pub fn grid(times: Vec<f64>, values: Vec<f64>) -> Result<Self, PerturbationError> {
        let spline = CubicSpline::new(times, values)?;
        let (start, end) = (spline.knots[0], *spline.knots.last().unwrap());
        Ok(Self {
            kind: Kind::Grid(spline),
            start,
            end,
            scale: 1.0,
        })
    }

    /// Closed-form schedule on `[0, end]` with its analytic derivative and
    /// declared bounds `min ≤ h_s ≤ max`. Path sampling refuses schedules whose
    /// bounds are not finite.
    pub fn callable<F, D>(value: F, derivative: D, bounds: (f64, f64), end: f64) -> Self
    where
        F: Fn(f64) -> f64 + Send + Sync + 'static,
        D: Fn(f64) -> f64 + Send + Sync + 'static,
    {
        Self {
            kind: Kind::Callable {
                value: Arc::new(value),
                derivative: Arc::new(derivative),
                bounds,
            },
            start: 0.0,
            end,
            scale: 1.0,
        }
    }

    /// Same schedule multiplied by `factor`.
    pub fn scaled(&self, factor: f64) -> Self {
        Self {
            scale: self.scale * factor,
            ..self.clone()
        }
    }

    /// Restricts the support end.
    pub fn with_end(mut self, end: f64) -> Self {
        self.end = self.end.min(end);
        self
    }

    pub fn support(&self) -> (f64, f64) {
        (self.start, self.end)
    }

    /// `Some(h)` for constant schedules.
    pub fn constant_value(&self) -> Option<f64> {
        match self.kind {
            Kind::Constant(h) => Some(h * self.scale),
            _ => None,
        }
    }

    pub fn is_identically_zero(&self) -> bool {
        self.scale == 0.0 || self.constant_value() == Some(0.0)
    }

    fn check(&self, s: f64) -> Result<(), PerturbationError> {
        if s.is_finite() && s >= self.start && s <= self.end {
            Ok(())
        } else {
            Err(PerturbationError::ScheduleDomain {
                s,
                start: self.start,
                end: self.end,
            })
        }
    }

    pub fn value(&self, s: f64) -> Result<f64, PerturbationError> {
        self.check(s)?;
        let raw = match &self.kind {
            Kind::Constant(h) => *h,
            Kind::Grid(spline) => spline.value(s),
            Kind::Callable { value, .. } => value(s),
        };
        Ok(raw * self.scale)
    }

    pub fn derivative(&self, s: f64) -> Result<f64, PerturbationError> {
        self.check(s)?;
        let raw = match &self.kind {
            Kind::Constant(_) => 0.0,
            Kind::Grid(spline) => spline.derivative(s),
            Kind::Callable { derivative, .. } => derivative(s),
        };
        Ok(raw * self.scale)
    }

    /// `∫_{s0}^{s1} h_s ds`.
    pub fn integral(&self, s0: f64, s1: f64) -> Result<f64, PerturbationError> {
        self.check(s0)?;
        self.check(s1)?;
        let raw = match &self.kind {
            Kind::Constant(h) => h * (s1 - s0),
            Kind::Grid(spline) => spline.integral(s0, s1),
            Kind::Callable { value, .. } => {
                integrate_adaptive(|s| value(s), &[s0, s1], 1e-12 * (1.0 + (s1 - s0)), 2000)?.value
            }
        };
        Ok(raw * self.scale)
    }

    /// Bounds `(min, max)` of `h` over `[s0, s1]`: exact for constant and grid
    /// schedules, the declared bounds for callables.
    pub fn bounds_on(&self, s0: f64, s1: f64) -> Result<(f64, f64), PerturbationError> {
        self.check(s0)?;
        self.check(s1)?;
        let (lo, hi) = match &self.kind {
            Kind::Constant(h) => (*h, *h),
            Kind::Grid(spline) => spline.bounds(s0, s1),
            Kind::Callable { bounds, .. } => *bounds,
        };
        let (a, b) = (lo * self.scale, hi * self.scale);
        Ok((a.min(b), a.max(b)))
    }

    /// Interior grid knots in `(s0, s1)`; quadrature over `h` should split there.
    pub fn knots_in(&self, s0: f64, s1: f64) -> Vec<f64> {
        match &self.kind {
            Kind::Grid(spline) => spline
                .knots
                .iter()
                .copied()
                .filter(|k| *k > s0 && *k < s1)
                .collect(),
            _ => Vec::new(),
        }
    }

    /// `[s0, knots..., s1]`.
    pub fn breakpoints(&self, s0: f64, s1: f64) -> Vec<f64> {
        let mut points = vec![s0];
        points.extend(self.knots_in(s0, s1));
        points.push(s1);
        points
    }
}

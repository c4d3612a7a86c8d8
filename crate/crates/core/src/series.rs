//! Sampled temperature series and the box-method metrics computed on them.

use crate::error::{Error, Result};
use crate::real::Real;

/// Samples `(T, value)` with strictly increasing temperature (K).
#[derive(Debug, Clone, PartialEq)]
pub struct TempSeries<R> {
    samples: Vec<(R, R)>,
}

impl<R: Real> TempSeries<R> {
    pub fn new(samples: Vec<(R, R)>) -> Result<Self> {
        if samples.is_empty() {
            return Err(Error::input("series is empty"));
        }
        if samples
            .iter()
            .any(|(t, v)| !t.is_finite() || !v.is_finite())
        {
            return Err(Error::input("series contains a non-finite sample"));
        }
        if samples.windows(2).any(|w| !(w[1].0 > w[0].0)) {
            return Err(Error::input(
                "series temperatures must be strictly increasing",
            ));
        }
        Ok(TempSeries { samples })
    }

    pub fn from_parts(ts: &[R], values: &[R]) -> Result<Self> {
        if ts.len() != values.len() {
            return Err(Error::input("temperature and value counts differ"));
        }
        Self::new(ts.iter().copied().zip(values.iter().copied()).collect())
    }

    pub fn samples(&self) -> &[(R, R)] {
        &self.samples
    }

    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }

    pub fn temperatures(&self) -> impl Iterator<Item = R> + '_ {
        self.samples.iter().map(|s| s.0)
    }

    pub fn values(&self) -> impl Iterator<Item = R> + '_ {
        self.samples.iter().map(|s| s.1)
    }

    /// Value at the sample closest to `t`.
    pub fn nearest(&self, t: R) -> R {
        self.samples
            .iter()
            .min_by(|a, b| {
                (a.0 - t)
                    .abs()
                    .partial_cmp(&(b.0 - t).abs())
                    .expect("finite")
            })
            .map(|s| s.1)
            .expect("non-empty")
    }

    /// Multiplies every value by `c`.
    pub fn scaled(&self, c: R) -> Self {
        TempSeries {
            samples: self.samples.iter().map(|&(t, v)| (t, v * c)).collect(),
        }
    }

    fn require_metric_len(&self) -> Result<()> {
        if self.samples.len() < 2 {
            Err(Error::input("at least two samples are needed"))
        } else {
            Ok(())
        }
    }

    fn span(&self) -> R {
        self.samples[self.samples.len() - 1].0 - self.samples[0].0
    }
}

/// `(max - min) / (|mean| * span) * scale` over `(x, y)` pairs.
fn box_metric<R: Real>(points: &[(R, R)], scale: R) -> Result<R> {
    let (mut lo, mut hi) = (R::infinity(), R::neg_infinity());
    let (mut xlo, mut xhi) = (R::infinity(), R::neg_infinity());
    for &(x, y) in points {
        lo = lo.min(y);
        hi = hi.max(y);
        xlo = xlo.min(x);
        xhi = xhi.max(x);
    }
    let mean = points.iter().map(|p| p.1).sum::<R>() / R::lit(points.len() as f64);
    if mean == R::zero() {
        return Err(Error::domain("box metric undefined for a zero-mean series"));
    }
    let span = xhi - xlo;
    if !(span > R::zero()) {
        return Err(Error::input("box metric needs a non-zero sweep span"));
    }
    Ok((hi - lo) / (mean.abs() * span) * scale)
}

/// Box-method temperature coefficient in ppm/degC, using the arithmetic mean
/// of all samples.
pub fn tc_box<R: Real>(series: &TempSeries<R>) -> Result<R> {
    series.require_metric_len()?;
    box_metric(series.samples(), R::lit(1e6))
}

/// Box-method line sensitivity in %/V from `(V_DD, I_REF)` pairs with
/// increasing supply voltage.
pub fn ls_box<R: Real>(points: &[(R, R)]) -> Result<R> {
    if points.len() < 2 {
        return Err(Error::input("at least two supply points are needed"));
    }
    if points.windows(2).any(|w| !(w[1].0 > w[0].0)) {
        return Err(Error::input("supply voltages must be strictly increasing"));
    }
    box_metric(points, R::lit(100.0))
}

/// End-point slope `(V(Tmax) - V(Tmin)) / (Tmax - Tmin)`, in units per kelvin.
pub fn ptat_slope<R: Real>(series: &TempSeries<R>) -> Result<R> {
    series.require_metric_len()?;
    let s = series.samples();
    let (first, last) = (s[0], s[s.len() - 1]);
    Ok((last.1 - first.1) / series.span())
}

/// First-order fit `V(T) ~ v_x0 + delta_vx * T` by least squares.
///
/// Returns `(v_x0, delta_vx)`: the intercept at 0 K and the PTAT slope.
pub fn taylor_params<R: Real>(series: &TempSeries<R>) -> Result<(R, R)> {
    series.require_metric_len()?;
    let n = R::lit(series.len() as f64);
    let t_mean = series.temperatures().sum::<R>() / n;
    let v_mean = series.values().sum::<R>() / n;
    let (mut sxy, mut sxx) = (R::zero(), R::zero());
    for &(t, v) in series.samples() {
        let dt = t - t_mean;
        sxy = sxy + dt * (v - v_mean);
        sxx = sxx + dt * dt;
    }
    if !(sxx > R::zero()) {
        return Err(Error::input("degenerate temperature samples"));
    }
    let slope = sxy / sxx;
    Ok((v_mean - slope * t_mean, slope))
}

/// Largest absolute deviation between the series and its least-squares line.
pub fn taylor_residual<R: Real>(series: &TempSeries<R>) -> Result<R> {
    let (v0, slope) = taylor_params(series)?;
    Ok(series
        .samples()
        .iter()
        .map(|&(t, v)| (v - (v0 + slope * t)).abs())
        .fold(R::zero(), R::max))
}

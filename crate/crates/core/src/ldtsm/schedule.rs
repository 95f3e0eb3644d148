use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Deserialize)]
struct RawSchedule {
    times: Vec<f64>,
    values: Vec<f64>,
}

/// Continuous time change `λ: [0, ∞) → [0, ∞)`, piecewise linear between
/// knots and constant after the last one.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "RawSchedule")]
pub struct LambdaSchedule {
    times: Vec<f64>,
    values: Vec<f64>,
}

impl TryFrom<RawSchedule> for LambdaSchedule {
    type Error = Error;

    fn try_from(raw: RawSchedule) -> Result<Self> {
        LambdaSchedule::new(raw.times, raw.values)
    }
}

impl LambdaSchedule {
    pub fn new(times: Vec<f64>, values: Vec<f64>) -> Result<Self> {
        if times.is_empty() {
            return Err(Error::invalid("times", "at least one knot is required"));
        }
        if times.len() != values.len() {
            return Err(Error::invalid(
                "values",
                format!("{} values for {} knot times", values.len(), times.len()),
            ));
        }
        if times[0] != 0.0 {
            return Err(Error::invalid(
                "times[0]",
                format!("first knot must be at 0, got {}", times[0]),
            ));
        }
        for i in 1..times.len() {
            if !(times[i] > times[i - 1]) || !times[i].is_finite() {
                return Err(Error::invalid(
                    format!("times[{i}]"),
                    "knot times must be strictly increasing",
                ));
            }
        }
        for (i, v) in values.iter().enumerate() {
            if !(*v >= 0.0 && v.is_finite()) {
                return Err(Error::invalid(
                    format!("values[{i}]"),
                    format!("knot value must be finite and non-negative, got {v}"),
                ));
            }
        }
        Ok(Self { times, values })
    }

    pub fn constant(value: f64) -> Result<Self> {
        Self::new(vec![0.0], vec![value])
    }

    /// `λ(t) = start + slope·t` up to `until`, constant afterwards.
    pub fn linear(start: f64, slope: f64, until: f64) -> Result<Self> {
        Self::new(vec![0.0, until], vec![start, start + slope * until])
    }

    pub fn times(&self) -> &[f64] {
        &self.times
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    /// Index of the segment `[times[i], times[i+1])` containing `t`, or `None`
    /// past the last knot.
    fn segment(&self, t: f64) -> Option<usize> {
        let n = self.times.len();
        if n < 2 || t >= self.times[n - 1] {
            return None;
        }
        let i = self.times.partition_point(|k| *k <= t);
        Some(i.saturating_sub(1))
    }

    pub fn value(&self, t: f64) -> f64 {
        if t <= 0.0 {
            return self.values[0];
        }
        match self.segment(t) {
            None => *self.values.last().expect("nonempty"),
            Some(i) => {
                let (t0, t1) = (self.times[i], self.times[i + 1]);
                let (v0, v1) = (self.values[i], self.values[i + 1]);
                let w = (t - t0) / (t1 - t0);
                v0 + w * (v1 - v0)
            }
        }
    }

    fn slope_of(&self, i: usize) -> f64 {
        (self.values[i + 1] - self.values[i]) / (self.times[i + 1] - self.times[i])
    }

    pub fn right_slope(&self, t: f64) -> f64 {
        match self.segment(t.max(0.0)) {
            None => 0.0,
            Some(i) => self.slope_of(i),
        }
    }

    pub fn left_slope(&self, t: f64) -> f64 {
        if t <= 0.0 {
            return self.right_slope(0.0);
        }
        let n = self.times.len();
        if n < 2 || t > self.times[n - 1] {
            return 0.0;
        }
        let i = self.times.partition_point(|k| *k < t);
        self.slope_of(i.saturating_sub(1).min(n - 2))
    }

    /// Symmetric derivative: the average of the one-sided slopes, which is the
    /// limit of a central difference at a knot.
    pub fn derivative(&self, t: f64) -> f64 {
        0.5 * (self.left_slope(t) + self.right_slope(t))
    }

    /// Whether `t` is a knot where the slope jumps.
    pub fn is_kink(&self, t: f64) -> bool {
        (self.left_slope(t) - self.right_slope(t)).abs() > 0.0
    }

    /// Minimum over `[0, ∞)`, attained at a knot.
    pub fn min_value(&self) -> f64 {
        self.values.iter().copied().fold(f64::INFINITY, f64::min)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn interpolation_and_extrapolation() {
        let s = LambdaSchedule::new(vec![0.0, 1.0, 3.0], vec![1.0, 2.0, 1.0]).unwrap();
        assert_eq!(s.value(0.0), 1.0);
        assert_eq!(s.value(0.5), 1.5);
        assert_eq!(s.value(1.0), 2.0);
        assert_eq!(s.value(2.0), 1.5);
        assert_eq!(s.value(10.0), 1.0);
        assert_eq!(s.right_slope(1.0), -0.5);
        assert_eq!(s.left_slope(1.0), 1.0);
        assert_eq!(s.derivative(1.0), 0.25);
        assert_eq!(s.derivative(5.0), 0.0);
        assert_eq!(s.derivative(3.0), -0.25);
        assert!(s.is_kink(1.0));
        assert!(!s.is_kink(0.5));
        assert_eq!(s.min_value(), 1.0);
    }

    #[test]
    fn rejects_bad_knots() {
        let err = LambdaSchedule::new(vec![0.0, 1.0, 2.0], vec![1.0, 0.5, -1.0]).unwrap_err();
        assert!(matches!(err, Error::InvalidParameter { ref field, .. } if field == "values[2]"));
        assert!(LambdaSchedule::new(vec![0.5], vec![1.0]).is_err());
        assert!(LambdaSchedule::new(vec![0.0, 1.0, 1.0], vec![1.0, 1.0, 1.0]).is_err());
        assert!(LambdaSchedule::new(vec![0.0, 1.0], vec![1.0]).is_err());
    }

    #[test]
    fn serde_validates() {
        let ok: LambdaSchedule = serde_json::from_str(r#"{"times":[0,2],"values":[1,3]}"#).unwrap();
        assert_eq!(ok.value(1.0), 2.0);
        let bad = serde_json::from_str::<LambdaSchedule>(r#"{"times":[0,2],"values":[1,-3]}"#);
        assert!(bad.unwrap_err().to_string().contains("values[1]"));
    }
}

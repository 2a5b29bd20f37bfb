//! Log-log exponent fits with verdicts.

use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Verdict {
    Pass,
    Fail,
    Inconclusive,
}

impl Verdict {
    /// Worst of two verdicts: any failure dominates, then inconclusive.
    pub fn combine(self, other: Verdict) -> Verdict {
        match (self, other) {
            (Verdict::Fail, _) | (_, Verdict::Fail) => Verdict::Fail,
            (Verdict::Inconclusive, _) | (_, Verdict::Inconclusive) => Verdict::Inconclusive,
            _ => Verdict::Pass,
        }
    }

    pub fn exit_code(self) -> i32 {
        match self {
            Verdict::Pass => 0,
            Verdict::Fail => 1,
            Verdict::Inconclusive => 2,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum Expectation {
    /// `|slope − expected| ≤ tolerance`.
    Within { expected: f64, tolerance: f64 },
    /// `slope ≤ bound`.
    AtMost { bound: f64 },
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct FitReport {
    pub quantity: String,
    pub points: Vec<(f64, f64)>,
    pub slope: f64,
    pub intercept: f64,
    /// Two standard errors of the slope.
    pub half_width: f64,
    pub expectation: Expectation,
    pub verdict: Verdict,
    pub note: String,
}

/// Least-squares line through `(ln t, ln v)`. Returns slope, intercept and
/// the slope's standard error.
pub fn loglog_slope(points: &[(f64, f64)]) -> (f64, f64, f64) {
    let n = points.len() as f64;
    let xs: Vec<f64> = points.iter().map(|p| p.0.ln()).collect();
    let ys: Vec<f64> = points.iter().map(|p| p.1.ln()).collect();
    let mx = xs.iter().sum::<f64>() / n;
    let my = ys.iter().sum::<f64>() / n;
    let sxx: f64 = xs.iter().map(|x| (x - mx).powi(2)).sum();
    let sxy: f64 = xs.iter().zip(&ys).map(|(x, y)| (x - mx) * (y - my)).sum();
    let slope = sxy / sxx;
    let intercept = my - slope * mx;
    let sse: f64 = xs.iter().zip(&ys).map(|(x, y)| (y - intercept - slope * x).powi(2)).sum();
    let se = if points.len() > 2 { (sse / (n - 2.0) / sxx).sqrt() } else { 0.0 };
    (slope, intercept, se)
}

impl FitReport {
    /// Fit and judge. Fewer than `min_points` usable points, or any
    /// nonpositive value, gives an inconclusive verdict.
    pub fn new(quantity: &str, points: Vec<(f64, f64)>, expectation: Expectation, min_points: usize) -> Self {
        let usable = points.iter().all(|&(t, v)| t > 0.0 && v > 0.0 && v.is_finite());
        if points.len() < min_points.max(2) || !usable {
            let note = if usable { format!("{} points, need {}", points.len(), min_points) } else { "nonpositive or non-finite values".into() };
            return Self {
                quantity: quantity.into(),
                points,
                slope: f64::NAN,
                intercept: f64::NAN,
                half_width: f64::NAN,
                expectation,
                verdict: Verdict::Inconclusive,
                note,
            };
        }
        let (slope, intercept, se) = loglog_slope(&points);
        let ok = match expectation {
            Expectation::Within { expected, tolerance } => (slope - expected).abs() <= tolerance,
            Expectation::AtMost { bound } => slope <= bound,
        };
        Self {
            quantity: quantity.into(),
            points,
            slope,
            intercept,
            half_width: 2.0 * se,
            expectation,
            verdict: if ok { Verdict::Pass } else { Verdict::Fail },
            note: String::new(),
        }
    }

    pub fn summary(&self) -> String {
        let target = match self.expectation {
            Expectation::Within { expected, tolerance } => format!("{expected:.4} ± {tolerance}"),
            Expectation::AtMost { bound } => format!("≤ {bound}"),
        };
        format!("{}: slope {:.4} (±{:.3}) target {} -> {:?} {}", self.quantity, self.slope, self.half_width, target, self.verdict, self.note)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn exact_power_law() {
        let pts: Vec<(f64, f64)> = [1.0, 2.0, 4.0, 8.0].iter().map(|&t| (t, 3.0 * f64::powf(t, -2.0))).collect();
        let f = FitReport::new("x", pts, Expectation::Within { expected: -2.0, tolerance: 0.05 }, 4);
        assert!((f.slope + 2.0).abs() < 1e-12);
        assert_eq!(f.verdict, Verdict::Pass);
        assert!(f.half_width < 1e-10);
    }

    #[test]
    fn too_few_points() {
        let f = FitReport::new("x", vec![(1.0, 1.0), (2.0, 0.5)], Expectation::AtMost { bound: 0.0 }, 4);
        assert_eq!(f.verdict, Verdict::Inconclusive);
    }

    #[test]
    fn verdicts_combine() {
        assert_eq!(Verdict::Pass.combine(Verdict::Inconclusive), Verdict::Inconclusive);
        assert_eq!(Verdict::Inconclusive.combine(Verdict::Fail), Verdict::Fail);
        assert_eq!(Verdict::Fail.exit_code(), 1);
    }
}

//! Sampled prescriptions with monotone (shape-preserving) cubic interpolation.

use crate::error::{Error, Result};

/// Piecewise cubic Hermite interpolant with Fritsch–Butland slopes.
///
/// The nodes must span exactly `[-1, 1]`; evaluation outside the node range is
/// an error (no extrapolation).
#[derive(Debug, Clone, PartialEq)]
pub struct MonotoneCubic {
    ys: Vec<f64>,
    values: Vec<f64>,
    slopes: Vec<f64>,
}

impl MonotoneCubic {
    pub fn new(ys: Vec<f64>, values: Vec<f64>) -> Result<Self> {
        if ys.len() != values.len() {
            return Err(Error::Table(format!(
                "{} nodes but {} values",
                ys.len(),
                values.len()
            )));
        }
        if ys.len() < 2 {
            return Err(Error::Table("need at least two samples".into()));
        }
        if ys.iter().chain(values.iter()).any(|v| !v.is_finite()) {
            return Err(Error::Table("non-finite sample".into()));
        }
        if ys.windows(2).any(|w| w[1] <= w[0]) {
            return Err(Error::Table("sample nodes must be strictly increasing".into()));
        }
        if ys[0] != -1.0 || ys[ys.len() - 1] != 1.0 {
            return Err(Error::Table(format!(
                "sample nodes must span [-1, 1], got [{}, {}]",
                ys[0],
                ys[ys.len() - 1]
            )));
        }
        let slopes = pchip_slopes(&ys, &values);
        Ok(MonotoneCubic { ys, values, slopes })
    }

    /// Parses `y,h` rows. Blank lines, `#` comments and a non-numeric header
    /// row are skipped.
    pub fn from_csv_str(text: &str) -> Result<Self> {
        let mut ys = Vec::new();
        let mut hs = Vec::new();
        for (lineno, line) in text.lines().enumerate() {
            let line = line.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let mut cols = line.split(',').map(str::trim);
            let (a, b) = match (cols.next(), cols.next(), cols.next()) {
                (Some(a), Some(b), None) => (a, b),
                _ => {
                    return Err(Error::Table(format!(
                        "line {}: expected two columns",
                        lineno + 1
                    )))
                }
            };
            match (a.parse::<f64>(), b.parse::<f64>()) {
                (Ok(y), Ok(h)) => {
                    ys.push(y);
                    hs.push(h);
                }
                _ if ys.is_empty() => continue, // header
                _ => {
                    return Err(Error::Table(format!(
                        "line {}: malformed number",
                        lineno + 1
                    )))
                }
            }
        }
        Self::new(ys, hs)
    }

    pub fn nodes(&self) -> &[f64] {
        &self.ys
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    fn locate(&self, y: f64) -> Result<usize> {
        let n = self.ys.len();
        if !(y >= self.ys[0] && y <= self.ys[n - 1]) {
            return Err(Error::Domain(y));
        }
        let i = self.ys.partition_point(|&t| t <= y);
        Ok(i.saturating_sub(1).min(n - 2))
    }

    pub fn eval(&self, y: f64) -> Result<f64> {
        let i = self.locate(y)?;
        let h = self.ys[i + 1] - self.ys[i];
        let t = (y - self.ys[i]) / h;
        let (h00, h10, h01, h11) = (
            (1.0 + 2.0 * t) * (1.0 - t) * (1.0 - t),
            t * (1.0 - t) * (1.0 - t),
            t * t * (3.0 - 2.0 * t),
            t * t * (t - 1.0),
        );
        Ok(h00 * self.values[i]
            + h10 * h * self.slopes[i]
            + h01 * self.values[i + 1]
            + h11 * h * self.slopes[i + 1])
    }

    pub fn derivative(&self, y: f64) -> Result<f64> {
        let i = self.locate(y)?;
        let h = self.ys[i + 1] - self.ys[i];
        let t = (y - self.ys[i]) / h;
        let d00 = 6.0 * t * (t - 1.0);
        let d10 = (1.0 - t) * (1.0 - 3.0 * t);
        let d01 = -d00;
        let d11 = t * (3.0 * t - 2.0);
        Ok((d00 * self.values[i] + d01 * self.values[i + 1]) / h
            + d10 * self.slopes[i]
            + d11 * self.slopes[i + 1])
    }
}

fn pchip_slopes(x: &[f64], y: &[f64]) -> Vec<f64> {
    let n = x.len();
    let h: Vec<f64> = x.windows(2).map(|w| w[1] - w[0]).collect();
    let delta: Vec<f64> = (0..n - 1).map(|k| (y[k + 1] - y[k]) / h[k]).collect();
    if n == 2 {
        return vec![delta[0]; 2];
    }
    let mut m = vec![0.0; n];
    for k in 1..n - 1 {
        let (d0, d1) = (delta[k - 1], delta[k]);
        if d0 == 0.0 || d1 == 0.0 || d0.signum() != d1.signum() {
            m[k] = 0.0;
        } else {
            let w1 = 2.0 * h[k] + h[k - 1];
            let w2 = h[k] + 2.0 * h[k - 1];
            m[k] = (w1 + w2) / (w1 / d0 + w2 / d1);
        }
    }
    m[0] = end_slope(h[0], h[1], delta[0], delta[1]);
    m[n - 1] = end_slope(h[n - 2], h[n - 3], delta[n - 2], delta[n - 3]);
    m
}

// One-sided three-point estimate, limited to preserve shape.
fn end_slope(h0: f64, h1: f64, d0: f64, d1: f64) -> f64 {
    let d = ((2.0 * h0 + h1) * d0 - h0 * d1) / (h0 + h1);
    if d.signum() != d0.signum() {
        0.0
    } else if d0.signum() != d1.signum() && d.abs() > 3.0 * d0.abs() {
        3.0 * d0
    } else {
        d
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn grid(n: usize) -> Vec<f64> {
        (0..n).map(|i| -1.0 + 2.0 * i as f64 / (n - 1) as f64).collect()
    }

    #[test]
    fn interpolates_nodes_exactly() {
        let ys = grid(9);
        let hs: Vec<f64> = ys.iter().map(|y| -(1.0 - y * y)).collect();
        let t = MonotoneCubic::new(ys.clone(), hs.clone()).unwrap();
        for (y, h) in ys.iter().zip(&hs) {
            assert!((t.eval(*y).unwrap() - h).abs() < 1e-15);
        }
    }

    #[test]
    fn preserves_sign_between_nodes() {
        // a sharply peaked negative profile; an unconstrained cubic spline
        // overshoots above zero near the endpoints, this one must not
        let ys = vec![-1.0, -0.9, 0.0, 0.9, 1.0];
        let hs = vec![0.0, -1.0, -1.0, -1.0, 0.0];
        let t = MonotoneCubic::new(ys, hs).unwrap();
        for i in 1..2000 {
            let y = -1.0 + 2.0 * i as f64 / 2000.0;
            assert!(t.eval(y).unwrap() < 0.0, "y = {y}");
        }
    }

    #[test]
    fn rejects_extrapolation_and_bad_grids() {
        let t = MonotoneCubic::new(grid(5), vec![0.0, -1.0, -2.0, -1.0, 0.0]).unwrap();
        assert!(matches!(t.eval(1.0 + 1e-12), Err(Error::Domain(_))));
        assert!(MonotoneCubic::new(vec![-1.0, 0.5], vec![0.0, 1.0]).is_err());
        assert!(MonotoneCubic::new(vec![-1.0, 0.0, 0.0, 1.0], vec![0.0; 4]).is_err());
        assert!(MonotoneCubic::new(vec![-1.0, 1.0], vec![0.0]).is_err());
    }

    #[test]
    fn derivative_matches_finite_difference() {
        let ys = grid(17);
        let hs: Vec<f64> = ys.iter().map(|y| -(1.0 - y * y).powi(2)).collect();
        let t = MonotoneCubic::new(ys, hs).unwrap();
        for &y in &[-0.83, -0.2, 0.31, 0.77] {
            let eps = 1e-6;
            let fd = (t.eval(y + eps).unwrap() - t.eval(y - eps).unwrap()) / (2.0 * eps);
            assert!((t.derivative(y).unwrap() - fd).abs() < 1e-6);
        }
    }

    #[test]
    fn csv_parsing() {
        let t = MonotoneCubic::from_csv_str("y,h\n-1,0\n# c\n0,-1\n\n1,0\n").unwrap();
        assert_eq!(t.nodes(), &[-1.0, 0.0, 1.0]);
        assert!(MonotoneCubic::from_csv_str("-1,0\n0,x\n1,0").is_err());
        assert!(MonotoneCubic::from_csv_str("-1,0,3\n1,0").is_err());
    }
}

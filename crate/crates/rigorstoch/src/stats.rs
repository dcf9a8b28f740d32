//! Small statistical helpers shared by the Monte Carlo checks: sample
//! moments and 3-sigma bands. These quantify *statistical* evidence; the
//! certified enclosures elsewhere never depend on them.

pub fn mean(xs: &[f64]) -> f64 {
    xs.iter().sum::<f64>() / xs.len() as f64
}

pub fn variance(xs: &[f64]) -> f64 {
    let m = mean(xs);
    xs.iter().map(|x| (x - m) * (x - m)).sum::<f64>() / (xs.len() as f64 - 1.0)
}

pub fn covariance(xs: &[f64], ys: &[f64]) -> f64 {
    assert_eq!(xs.len(), ys.len());
    let (mx, my) = (mean(xs), mean(ys));
    xs.iter()
        .zip(ys)
        .map(|(x, y)| (x - mx) * (y - my))
        .sum::<f64>()
        / (xs.len() as f64 - 1.0)
}

/// Standard error of the sample mean.
pub fn mean_sigma(xs: &[f64]) -> f64 {
    (variance(xs) / xs.len() as f64).sqrt()
}

/// Standard error of an empirical binomial frequency with success
/// probability around p.
pub fn binomial_sigma(p: f64, n: usize) -> f64 {
    (p * (1.0 - p) / n as f64).sqrt()
}

/// A statistic with its target and band, for check reports.
#[derive(Debug, Clone, serde::Serialize)]
pub struct BandCheck {
    pub statistic: String,
    pub estimate: f64,
    pub target: f64,
    pub band: f64,
    pub verdict: bool,
}

impl BandCheck {
    pub fn new(statistic: &str, estimate: f64, target: f64, band: f64) -> Self {
        BandCheck {
            statistic: statistic.to_string(),
            estimate,
            target,
            band,
            verdict: (estimate - target).abs() <= band,
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn moments() {
        let xs = [1.0, 2.0, 3.0, 4.0];
        assert_eq!(mean(&xs), 2.5);
        assert!((variance(&xs) - 5.0 / 3.0).abs() < 1e-12);
        let ys = [2.0, 4.0, 6.0, 8.0];
        assert!((covariance(&xs, &ys) - 10.0 / 3.0).abs() < 1e-12);
    }

    #[test]
    fn bands() {
        let c = BandCheck::new("x", 0.5, 0.48, 0.05);
        assert!(c.verdict);
        let c = BandCheck::new("x", 0.6, 0.48, 0.05);
        assert!(!c.verdict);
    }
}

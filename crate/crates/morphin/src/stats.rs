//! Summary statistics and Welch's unequal-variance t-test.

use serde::Serialize;
use statrs::distribution::{ContinuousCDF, StudentsT};

pub fn mean(xs: &[f64]) -> Option<f64> {
    (!xs.is_empty()).then(|| xs.iter().sum::<f64>() / xs.len() as f64)
}

/// Unbiased sample variance; `None` below two samples.
pub fn sample_variance(xs: &[f64]) -> Option<f64> {
    if xs.len() < 2 {
        return None;
    }
    let m = mean(xs)?;
    Some(xs.iter().map(|x| (x - m).powi(2)).sum::<f64>() / (xs.len() - 1) as f64)
}

/// Half-width of the two-sided 95% confidence interval for the mean.
pub fn ci95_half_width(xs: &[f64]) -> Option<f64> {
    let var = sample_variance(xs)?;
    let n = xs.len() as f64;
    let t = StudentsT::new(0.0, 1.0, n - 1.0).ok()?.inverse_cdf(0.975);
    Some(t * (var / n).sqrt())
}

/// Mean with its 95% CI half-width expressed as a percentage of the mean.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Estimate {
    pub n: usize,
    pub mean: f64,
    pub spread_pct: Option<f64>,
}

impl Estimate {
    pub fn of(xs: &[f64]) -> Option<Self> {
        let m = mean(xs)?;
        let spread_pct = ci95_half_width(xs).filter(|_| m != 0.0).map(|h| 100.0 * h / m.abs());
        Some(Self {
            n: xs.len(),
            mean: m,
            spread_pct,
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct WelchTest {
    pub t: f64,
    /// Welch-Satterthwaite degrees of freedom.
    pub df: f64,
    /// Two-sided p-value.
    pub p_value: f64,
}

/// Welch's two-sample t-test of `a` against `b`. `None` when either sample
/// has fewer than two observations.
pub fn welch_t_test(a: &[f64], b: &[f64]) -> Option<WelchTest> {
    let (ma, mb) = (mean(a)?, mean(b)?);
    let (va, vb) = (sample_variance(a)?, sample_variance(b)?);
    let (na, nb) = (a.len() as f64, b.len() as f64);
    let (sa, sb) = (va / na, vb / nb);
    let se2 = sa + sb;
    if se2 == 0.0 {
        // both samples constant
        let same = ma == mb;
        return Some(WelchTest {
            t: if same { 0.0 } else { f64::INFINITY.copysign(ma - mb) },
            df: na + nb - 2.0,
            p_value: if same { 1.0 } else { 0.0 },
        });
    }
    let t = (ma - mb) / se2.sqrt();
    let df = se2 * se2 / (sa * sa / (na - 1.0) + sb * sb / (nb - 1.0));
    let dist = StudentsT::new(0.0, 1.0, df).ok()?;
    let p_value = (2.0 * dist.sf(t.abs())).clamp(0.0, 1.0);
    Some(WelchTest { t, df, p_value })
}

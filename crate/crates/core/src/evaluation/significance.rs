use serde::{Deserialize, Serialize};
use statrs::distribution::{ContinuousCDF, StudentsT};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TTest {
    pub t: f64,
    pub p: f64,
    pub n: usize,
    /// Differences were constant and non-zero: zero variance, p taken as 0.
    pub degenerate: bool,
}

/// Two-sided paired t-test on `a - b`, with `n - 1` degrees of freedom.
pub fn paired_ttest(a: &[f64], b: &[f64]) -> Result<TTest> {
    if a.len() != b.len() {
        return Err(Error::validation(format!(
            "paired samples differ in length: {} vs {}",
            a.len(),
            b.len()
        )));
    }
    let n = a.len();
    if n < 2 {
        return Err(Error::validation("paired t-test needs at least 2 pairs"));
    }
    if a.iter().chain(b).any(|x| !x.is_finite()) {
        return Err(Error::validation("paired t-test samples must be finite"));
    }
    let diffs: Vec<f64> = a.iter().zip(b).map(|(x, y)| x - y).collect();
    let nf = n as f64;
    let mean = diffs.iter().sum::<f64>() / nf;
    let var = diffs.iter().map(|d| (d - mean).powi(2)).sum::<f64>() / (nf - 1.0);

    if diffs.iter().all(|d| *d == 0.0) {
        return Ok(TTest {
            t: 0.0,
            p: 1.0,
            n,
            degenerate: false,
        });
    }
    if var == 0.0 {
        return Ok(TTest {
            t: f64::INFINITY.copysign(mean),
            p: 0.0,
            n,
            degenerate: true,
        });
    }
    let t = mean / (var / nf).sqrt();
    let dist = StudentsT::new(0.0, 1.0, nf - 1.0).map_err(|e| Error::validation(e.to_string()))?;
    let p = (2.0 * dist.cdf(-t.abs())).clamp(0.0, 1.0);
    Ok(TTest {
        t,
        p,
        n,
        degenerate: false,
    })
}

pub fn bonferroni(p_raw: f64, comparisons: usize) -> Result<f64> {
    if comparisons == 0 {
        return Err(Error::validation("number of comparisons must be at least 1"));
    }
    if !(0.0..=1.0).contains(&p_raw) {
        return Err(Error::validation(format!("p-value {p_raw} outside [0, 1]")));
    }
    Ok((p_raw * comparisons as f64).min(1.0))
}

use statrs::distribution::{ContinuousCDF, StudentsT};

use crate::error::{Error, Result};

/// A correlation plus whether it was forced to 0 because one side had no
/// variance.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Correlation {
    pub r: f64,
    pub degenerate: bool,
}

/// True when `x` is constant up to summation rounding.
fn flat(x: &[f64], ss: f64) -> bool {
    let first = x[0];
    if x.iter().all(|&v| v == first) {
        return true;
    }
    let scale = x.iter().fold(0.0f64, |m, v| m.max(v.abs()));
    ss <= x.len() as f64 * (4.0 * f64::EPSILON * scale).powi(2)
}

/// Sample Pearson correlation. Zero variance on either side yields `r = 0`
/// with the degenerate flag set.
pub fn pearson_r(pred: &[f64], gold: &[f64]) -> Result<Correlation> {
    if pred.len() != gold.len() {
        return Err(Error::Shape {
            op: "pearson_r",
            left: vec![pred.len()],
            right: vec![gold.len()],
        });
    }
    if pred.len() < 2 {
        return Err(Error::invalid(format!(
            "pearson_r needs at least 2 pairs, got {}",
            pred.len()
        )));
    }
    if pred.iter().chain(gold).any(|v| !v.is_finite()) {
        return Err(Error::invalid("pearson_r got a non-finite value"));
    }
    let n = pred.len() as f64;
    let mx = pred.iter().sum::<f64>() / n;
    let my = gold.iter().sum::<f64>() / n;
    let (mut sxy, mut sxx, mut syy) = (0.0, 0.0, 0.0);
    for (x, y) in pred.iter().zip(gold) {
        let (dx, dy) = (x - mx, y - my);
        sxy += dx * dy;
        sxx += dx * dx;
        syy += dy * dy;
    }
    if flat(pred, sxx) || flat(gold, syy) {
        return Ok(Correlation { r: 0.0, degenerate: true });
    }
    let r = (sxy / (sxx.sqrt() * syy.sqrt())).clamp(-1.0, 1.0);
    Ok(Correlation { r, degenerate: false })
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct TTest {
    pub t: f64,
    pub df: usize,
    /// Two-tailed p-value.
    pub p: f64,
}

/// Two-tailed one-sample t-test of `mean(samples) == mu0`.
pub fn one_sample_t_test(samples: &[f64], mu0: f64) -> Result<TTest> {
    let n = samples.len();
    if n < 2 {
        return Err(Error::invalid(format!("t-test needs at least 2 samples, got {n}")));
    }
    if samples.iter().any(|v| !v.is_finite()) || !mu0.is_finite() {
        return Err(Error::invalid("t-test got a non-finite value"));
    }
    let nf = n as f64;
    let mean = samples.iter().sum::<f64>() / nf;
    let ss = samples.iter().map(|x| (x - mean).powi(2)).sum::<f64>();
    if flat(samples, ss) {
        return Err(Error::invalid("t-test samples have zero variance"));
    }
    let sd = (ss / (nf - 1.0)).sqrt();
    let t = (mean - mu0) / (sd / nf.sqrt());
    let df = n - 1;
    Ok(TTest { t, df, p: two_tailed_p(t, df as f64)? })
}

/// Student-t CDF with `df` degrees of freedom.
pub fn student_t_cdf(t: f64, df: f64) -> Result<f64> {
    let dist = StudentsT::new(0.0, 1.0, df).map_err(|e| Error::invalid(format!("student t: {e}")))?;
    Ok(dist.cdf(t))
}

fn two_tailed_p(t: f64, df: f64) -> Result<f64> {
    let dist = StudentsT::new(0.0, 1.0, df).map_err(|e| Error::invalid(format!("student t: {e}")))?;
    Ok((2.0 * dist.sf(t.abs())).min(1.0))
}

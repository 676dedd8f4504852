use serde::{Deserialize, Serialize};
use statrs::function::beta::beta_reg;

use crate::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MeanSd {
    pub mean: f64,
    /// Sample standard deviation; zero for fewer than two values.
    pub sd: f64,
}

pub fn mean(xs: &[f64]) -> f64 {
    xs.iter().sum::<f64>() / xs.len() as f64
}

fn sum_sq_dev(xs: &[f64], m: f64) -> f64 {
    xs.iter().map(|x| (x - m) * (x - m)).sum()
}

pub fn mean_sd(xs: &[f64]) -> MeanSd {
    if xs.is_empty() {
        return MeanSd { mean: 0.0, sd: 0.0 };
    }
    let m = mean(xs);
    let sd = if xs.len() < 2 {
        0.0
    } else {
        (sum_sq_dev(xs, m) / (xs.len() - 1) as f64).sqrt()
    };
    MeanSd { mean: m, sd }
}

/// Pearson product-moment correlation.
pub fn pearson(xs: &[f64], ys: &[f64]) -> Result<f64> {
    if xs.len() != ys.len() {
        return Err(Error::Validation(format!(
            "series lengths differ ({} vs {})",
            xs.len(),
            ys.len()
        )));
    }
    if xs.len() < 2 {
        return Err(Error::Validation("correlation needs at least 2 points".into()));
    }
    let (mx, my) = (mean(xs), mean(ys));
    let sxx = sum_sq_dev(xs, mx);
    let syy = sum_sq_dev(ys, my);
    if sxx == 0.0 || syy == 0.0 {
        return Err(Error::UndefinedCorrelation("one series has zero variance".into()));
    }
    let sxy: f64 = xs.iter().zip(ys).map(|(x, y)| (x - mx) * (y - my)).sum();
    Ok((sxy / (sxx.sqrt() * syy.sqrt())).clamp(-1.0, 1.0))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct WelchTest {
    pub t_statistic: f64,
    /// Welch–Satterthwaite degrees of freedom.
    pub df: f64,
    /// Two-sided p-value.
    pub p_value: f64,
}

/// Welch's unequal-variance t-test.
///
/// When both samples have zero variance the statistic is undefined; the
/// result is then `t = 0, p = 1` for equal means and `t = ±inf, p = 0`
/// otherwise.
pub fn welch_t_test(a: &[f64], b: &[f64]) -> Result<WelchTest> {
    if a.len() < 2 || b.len() < 2 {
        return Err(Error::Validation("each sample needs at least 2 values".into()));
    }
    let (na, nb) = (a.len() as f64, b.len() as f64);
    let (ma, mb) = (mean(a), mean(b));
    let va = sum_sq_dev(a, ma) / (na - 1.0);
    let vb = sum_sq_dev(b, mb) / (nb - 1.0);
    let (qa, qb) = (va / na, vb / nb);
    let se2 = qa + qb;

    if se2 == 0.0 {
        let df = na + nb - 2.0;
        return Ok(if ma == mb {
            WelchTest { t_statistic: 0.0, df, p_value: 1.0 }
        } else {
            let t = if ma > mb { f64::INFINITY } else { f64::NEG_INFINITY };
            WelchTest { t_statistic: t, df, p_value: 0.0 }
        });
    }

    let t = (ma - mb) / se2.sqrt();
    let df = se2 * se2 / (qa * qa / (na - 1.0) + qb * qb / (nb - 1.0));
    // Two-sided tail of Student's t: I_{df/(df+t^2)}(df/2, 1/2).
    let x = df / (df + t * t);
    let p = beta_reg(df / 2.0, 0.5, x).clamp(0.0, 1.0);
    Ok(WelchTest { t_statistic: t, df, p_value: p })
}

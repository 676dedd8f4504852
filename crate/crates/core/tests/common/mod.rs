//! Independent reference implementations shared by the integration tests
//! and the acceptance runner. Nothing here calls into the library's
//! numerical code.

#![allow(dead_code)]

use mrl_core::EngineConfig;
use num::{BigInt, BigRational, Signed, ToPrimitive, Zero};

/// Rescales `values` by the `c` that makes `sum(max(floor, c * v)) == 1`,
/// found by bisection.
pub fn floor_projection(values: &[f64], floor: f64) -> Vec<f64> {
    let mass = |c: f64| values.iter().map(|v| (c * v).max(floor)).sum::<f64>();
    let (mut lo, mut hi) = (0.0, 1.0);
    while mass(hi) < 1.0 {
        hi *= 2.0;
    }
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if mass(mid) < 1.0 {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    let c = 0.5 * (lo + hi);
    values.iter().map(|v| (c * v).max(floor)).collect()
}

/// One full update written out stage by stage.
pub fn reference_step(
    config: &EngineConfig,
    weights: &[f64],
    ewma_prev: &[f64],
    history: &[Vec<f64>],
    selected: usize,
    success: bool,
) -> Vec<f64> {
    let n = weights.len();
    let a = config.alpha;
    let share = a / (n as f64 - 1.0);

    let mut raw = weights.to_vec();
    for (i, w) in raw.iter_mut().enumerate() {
        let delta = if i == selected { a } else { -share };
        *w += if success { delta } else { -delta };
    }
    let raw = floor_projection(&raw, config.epsilon_floor);

    let phi = config.ewma_phi;
    let smoothed: Vec<f64> = (0..n).map(|i| phi * raw[i] + (1.0 - phi) * ewma_prev[i]).collect();

    let mut window: Vec<Vec<f64>> = history.to_vec();
    window.push(smoothed.clone());
    let keep = config.window_k.max(1);
    if window.len() > keep {
        window.drain(..window.len() - keep);
    }
    let m = window.len() as f64;
    let boosted: Vec<f64> = (0..n)
        .map(|i| {
            let sd = if window.len() < 2 {
                0.0
            } else {
                let mean = window.iter().map(|v| v[i]).sum::<f64>() / m;
                (window.iter().map(|v| (v[i] - mean).powi(2)).sum::<f64>() / (m - 1.0)).sqrt()
            };
            smoothed[i] + config.sigma_multiplier * sd
        })
        .collect();
    floor_projection(&boosted, config.epsilon_floor)
}

fn rational(x: f64) -> BigRational {
    BigRational::from_float(x).expect("finite sample")
}

fn rational_mean_var(xs: &[f64]) -> (BigRational, BigRational) {
    let n = BigRational::from_integer(BigInt::from(xs.len()));
    let sum = xs.iter().map(|x| rational(*x)).fold(BigRational::zero(), |a, b| a + b);
    let mean = sum / &n;
    let ss = xs
        .iter()
        .map(|x| {
            let d = rational(*x) - &mean;
            &d * &d
        })
        .fold(BigRational::zero(), |a, b| a + b);
    let var = ss / (n - BigRational::from_integer(BigInt::from(1)));
    (mean, var)
}

fn to_f64(x: &BigRational) -> f64 {
    x.to_f64().expect("representable")
}

/// Pearson r from exact rational moments.
pub fn exact_pearson(xs: &[f64], ys: &[f64]) -> f64 {
    let (mx, _) = rational_mean_var(xs);
    let (my, _) = rational_mean_var(ys);
    let mut sxy = BigRational::zero();
    let mut sxx = BigRational::zero();
    let mut syy = BigRational::zero();
    for (x, y) in xs.iter().zip(ys) {
        let dx = rational(*x) - &mx;
        let dy = rational(*y) - &my;
        sxy += &dx * &dy;
        sxx += &dx * &dx;
        syy += &dy * &dy;
    }
    let r2 = (&sxy * &sxy) / (sxx * syy);
    let r = to_f64(&r2).sqrt();
    if sxy.is_negative() {
        -r
    } else {
        r
    }
}

/// Welch t and Welch-Satterthwaite df from exact rational moments.
pub fn exact_welch(a: &[f64], b: &[f64]) -> (f64, f64) {
    let (ma, va) = rational_mean_var(a);
    let (mb, vb) = rational_mean_var(b);
    let na = BigRational::from_integer(BigInt::from(a.len()));
    let nb = BigRational::from_integer(BigInt::from(b.len()));
    let one = BigRational::from_integer(BigInt::from(1));
    let sa = va / &na;
    let sb = vb / &nb;
    let se2 = &sa + &sb;
    let diff = ma - mb;
    let t2 = (&diff * &diff) / &se2;
    let t = to_f64(&t2).sqrt();
    let t = if diff.is_negative() { -t } else { t };
    let df = (&se2 * &se2) / ((&sa * &sa) / (na - &one) + (&sb * &sb) / (nb - &one));
    (t, to_f64(&df))
}

/// Lanczos approximation (g = 7, nine terms).
pub fn ln_gamma(x: f64) -> f64 {
    const G: f64 = 7.0;
    const C: [f64; 9] = [
        0.999_999_999_999_809_9,
        676.520_368_121_885_1,
        -1_259.139_216_722_402_8,
        771.323_428_777_653_1,
        -176.615_029_162_140_6,
        12.507_343_278_686_905,
        -0.138_571_095_265_720_12,
        9.984_369_578_019_572e-6,
        1.505_632_735_149_311_6e-7,
    ];
    if x < 0.5 {
        let pi = std::f64::consts::PI;
        return (pi / (pi * x).sin()).ln() - ln_gamma(1.0 - x);
    }
    let x = x - 1.0;
    let mut acc = C[0];
    for (i, c) in C.iter().enumerate().skip(1) {
        acc += c / (x + i as f64);
    }
    let t = x + G + 0.5;
    0.5 * (2.0 * std::f64::consts::PI).ln() + (x + 0.5) * t.ln() - t + acc.ln()
}

/// Gauss-Legendre nodes and weights on [-1, 1] by Newton iteration.
pub fn gauss_legendre(order: usize) -> Vec<(f64, f64)> {
    let mut out = Vec::with_capacity(order);
    for i in 0..order {
        let mut x = (std::f64::consts::PI * (i as f64 + 0.75) / (order as f64 + 0.5)).cos();
        let mut derivative = 0.0;
        for _ in 0..100 {
            let (mut p0, mut p1) = (1.0, x);
            for k in 2..=order {
                let k = k as f64;
                let p2 = ((2.0 * k - 1.0) * x * p1 - (k - 1.0) * p0) / k;
                p0 = p1;
                p1 = p2;
            }
            derivative = order as f64 * (x * p1 - p0) / (x * x - 1.0);
            let step = p1 / derivative;
            x -= step;
            if step.abs() < 1e-16 {
                break;
            }
        }
        out.push((x, 2.0 / ((1.0 - x * x) * derivative * derivative)));
    }
    out
}

/// Two-sided Student-t p-value by integrating the density over `[0, |t|]`.
pub fn student_t_two_sided(t: f64, df: f64) -> f64 {
    let log_norm = ln_gamma((df + 1.0) / 2.0) - ln_gamma(df / 2.0) - 0.5 * (df * std::f64::consts::PI).ln();
    let density = |x: f64| (log_norm - (df + 1.0) / 2.0 * (1.0 + x * x / df).ln()).exp();
    let upper = t.abs();
    let nodes = gauss_legendre(20);
    let panels = ((upper / 0.25).ceil() as usize).max(1);
    let width = upper / panels as f64;
    let mut central = 0.0;
    for k in 0..panels {
        let mid = (k as f64 + 0.5) * width;
        for (x, w) in &nodes {
            central += w * density(mid + 0.5 * width * x) * 0.5 * width;
        }
    }
    (1.0 - 2.0 * central).clamp(0.0, 1.0)
}

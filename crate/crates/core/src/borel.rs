//! Nevanlinna disks, Borel transforms, Laplace resummation and remainder fits.

use num_bigint::BigInt;
use num_complex::Complex64;
use num_rational::BigRational;
use num_traits::{ToPrimitive, Zero};
use serde::Serialize;

use crate::error::{Error, Result};
use crate::quadrature::{adaptive, half_line, Estimate};

/// Largest order accepted by [`d0_phi4_series`].
pub const MAX_D0_ORDER: usize = 30;

/// `Re(1/λ) > 1/R`, the open disk of diameter `R` tangent to the imaginary axis at 0.
pub fn disk_contains(r: f64, lambda: Complex64) -> Result<bool> {
    if !(r > 0.0 && r.is_finite()) {
        return Err(Error::domain("disk diameter must be positive"));
    }
    if lambda == Complex64::zero() {
        return Ok(false);
    }
    Ok(lambda.inv().re > 1.0 / r)
}

/// Formal power series `Σ coeffs[k] λ^k`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PowerSeries {
    pub coeffs: Vec<f64>,
}

impl PowerSeries {
    pub fn new(coeffs: Vec<f64>) -> Self {
        PowerSeries { coeffs }
    }

    /// Partial sum of the first `terms` coefficients at `x`.
    pub fn partial_sum(&self, x: Complex64, terms: usize) -> Complex64 {
        self.coeffs[..terms.min(self.coeffs.len())]
            .iter()
            .rev()
            .fold(Complex64::zero(), |acc, &c| acc * x + c)
    }
}

/// `B(t) = Σ_{k<terms} f_k t^k / k!`.
pub fn borel_transform(series: &PowerSeries, t: Complex64, terms: usize) -> Result<Complex64> {
    if terms > series.coeffs.len() {
        return Err(Error::domain(format!(
            "{terms} terms requested from a series of length {}",
            series.coeffs.len()
        )));
    }
    let mut acc = Complex64::zero();
    let mut pow = Complex64::new(1.0, 0.0);
    for (k, &c) in series.coeffs[..terms].iter().enumerate() {
        if k > 0 {
            pow *= t / k as f64;
        }
        acc += pow * c;
    }
    Ok(acc)
}

/// `(1/λ) ∫_0^∞ B(t) e^{-t/λ} dt`, integrated on panels until the tail is below 1e-14 of
/// the accumulated value. Requires `Re(1/λ) > 0`.
pub fn laplace_resum<F: FnMut(f64) -> Complex64>(mut b: F, lambda: Complex64) -> Result<Estimate<Complex64>> {
    if lambda == Complex64::zero() {
        return Err(Error::domain("λ = 0"));
    }
    let inv = lambda.inv();
    if inv.re <= 0.0 {
        return Err(Error::domain("Re(1/λ) must be positive for Laplace resummation"));
    }
    let mut bad = None;
    let est = half_line(
        |t| {
            let v = b(t);
            if !(v.re.is_finite() && v.im.is_finite()) {
                bad.get_or_insert(t);
                return Complex64::zero();
            }
            v * (-t * inv).exp()
        },
        0.0,
        8.0 / inv.re,
        1e-14,
    )?;
    if let Some(t) = bad {
        return Err(Error::Singularity(format!("Borel transform not finite at t = {t}")));
    }
    Ok(Estimate {
        value: est.value * inv,
        error: est.error * inv.norm(),
    })
}

/// One Taylor remainder `|R_n(λ)|` at order `n` and coupling modulus `|λ|`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, serde::Deserialize)]
pub struct RemainderSample {
    pub order: usize,
    pub lambda_abs: f64,
    pub remainder_abs: f64,
}

/// Fit of `|R_n| ≈ K σ^n n! |λ|^n`. `residual` is the RMS misfit in natural-log units and
/// `k_envelope` the smallest K for which the bound holds at every sample.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct RemainderFit {
    pub k: f64,
    pub sigma: f64,
    pub residual: f64,
    pub k_envelope: f64,
    pub min_order: usize,
    pub max_order: usize,
}

fn ln_factorial(n: usize) -> f64 {
    (2..=n).map(|k| (k as f64).ln()).sum()
}

/// Least squares on `log|R_n| - log n! - n log|λ| = a + n b` over orders `n ≥ 2`.
pub fn remainder_fit(samples: &[RemainderSample]) -> Result<RemainderFit> {
    let used: Vec<&RemainderSample> = samples.iter().filter(|s| s.order >= 2).collect();
    let mut orders: Vec<usize> = used.iter().map(|s| s.order).collect();
    orders.sort_unstable();
    orders.dedup();
    if orders.len() < 3 {
        return Err(Error::Fit(format!(
            "need at least 3 distinct orders >= 2, got {}",
            orders.len()
        )));
    }
    if used.iter().any(|s| !(s.remainder_abs > 0.0 && s.lambda_abs > 0.0)) {
        return Err(Error::Fit("remainders and couplings must be positive".into()));
    }
    let pts: Vec<(f64, f64)> = used
        .iter()
        .map(|s| {
            let n = s.order as f64;
            (n, s.remainder_abs.ln() - ln_factorial(s.order) - n * s.lambda_abs.ln())
        })
        .collect();
    let m = pts.len() as f64;
    let mx = pts.iter().map(|p| p.0).sum::<f64>() / m;
    let my = pts.iter().map(|p| p.1).sum::<f64>() / m;
    let sxx: f64 = pts.iter().map(|p| (p.0 - mx).powi(2)).sum();
    let sxy: f64 = pts.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
    let b = sxy / sxx;
    let a = my - b * mx;
    let res: Vec<f64> = pts.iter().map(|p| p.1 - a - b * p.0).collect();
    let rms = (res.iter().map(|r| r * r).sum::<f64>() / m).sqrt();
    let worst = res.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    Ok(RemainderFit {
        k: a.exp(),
        sigma: b.exp(),
        residual: rms,
        k_envelope: (a + worst.max(0.0)).exp(),
        min_order: orders[0],
        max_order: *orders.last().unwrap(),
    })
}

/// Exact coefficients `(-1)^n (4n-1)!!/n!` of the zero-dimensional quartic partition function.
pub fn d0_phi4_coefficients(orders: usize) -> Result<Vec<BigRational>> {
    if orders > MAX_D0_ORDER {
        return Err(Error::SizeLimit {
            what: "d0 series order",
            value: orders as u64,
            limit: MAX_D0_ORDER as u64,
        });
    }
    let mut out = Vec::with_capacity(orders + 1);
    let mut num = BigInt::from(1);
    let mut den = BigInt::from(1);
    for n in 0..=orders {
        if n > 0 {
            num *= -((4 * n - 3) as i64 * (4 * n - 1) as i64);
            den *= n as i64;
        }
        out.push(BigRational::new(num.clone(), den.clone()));
    }
    Ok(out)
}

/// Coefficients of orders `0..=orders` as floats.
pub fn d0_phi4_series(orders: usize) -> Result<PowerSeries> {
    Ok(PowerSeries::new(
        d0_phi4_coefficients(orders)?
            .iter()
            .map(|c| c.to_f64().unwrap())
            .collect(),
    ))
}

/// `|a_{n+1}/a_n| / n` for `n ≥ 1`.
pub fn growth_ratios(series: &PowerSeries) -> Vec<(usize, f64)> {
    (1..series.coeffs.len().saturating_sub(1))
        .map(|n| (n, (series.coeffs[n + 1] / series.coeffs[n]).abs() / n as f64))
        .collect()
}

/// `∫ e^{-φ²/2 - λφ⁴} dφ/√(2π)` for `Re λ ≥ 0`, by direct quadrature.
pub fn d0_phi4_partition(lambda: Complex64) -> Result<Estimate<Complex64>> {
    if lambda.re < 0.0 {
        return Err(Error::domain("Re λ must be nonnegative"));
    }
    let norm = (2.0 * std::f64::consts::PI).sqrt();
    let half = adaptive(
        |x| (Complex64::new(-0.5 * x * x, 0.0) - lambda * x.powi(4)).exp() / norm,
        0.0,
        40.0,
        1e-16,
        1e-14,
        2000,
    )?;
    Ok(Estimate {
        value: half.value * 2.0,
        error: half.error * 2.0,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn disk_examples() {
        assert!(disk_contains(1.0, Complex64::new(0.5, 0.0)).unwrap());
        assert!(!disk_contains(1.0, Complex64::new(0.5, 0.6)).unwrap());
        assert!(!disk_contains(1.0, Complex64::zero()).unwrap());
        assert!(disk_contains(0.0, Complex64::new(0.1, 0.0)).is_err());
    }

    #[test]
    fn borel_of_factorial_series_is_geometric() {
        let s = PowerSeries::new(
            (0..30)
                .map(|k| if k % 2 == 0 { 1.0 } else { -1.0 } * (1..=k).map(f64::from).product::<f64>())
                .collect(),
        );
        let b = borel_transform(&s, Complex64::new(0.5, 0.0), 30).unwrap();
        assert!((b.re - 1.0 / 1.5).abs() < 1e-6);
        assert!(borel_transform(&s, Complex64::new(0.5, 0.0), 31).is_err());
    }

    #[test]
    fn d0_coefficients() {
        let s = d0_phi4_series(3).unwrap();
        assert_eq!(s.coeffs[0], 1.0);
        assert_eq!(s.coeffs[1], -3.0);
        assert!((s.coeffs[2] - 52.5).abs() < 1e-12);
        assert!(d0_phi4_series(31).is_err());
    }

    #[test]
    fn laplace_rejects_left_half_plane() {
        assert!(laplace_resum(|_| Complex64::new(1.0, 0.0), Complex64::new(-1.0, 0.0)).is_err());
        assert!(matches!(
            laplace_resum(|t| Complex64::new(1.0 / (1.0 - t), 0.0), Complex64::new(1.0, 0.0)),
            Err(Error::Singularity(_)) | Err(Error::Numeric { .. })
        ));
    }

    #[test]
    fn fit_needs_three_orders() {
        let s = [RemainderSample { order: 3, lambda_abs: 0.1, remainder_abs: 1e-3 }];
        assert!(matches!(remainder_fit(&s), Err(Error::Fit(_))));
    }
}

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Molar gas constant, J mol^-1 K^-1.
pub const GAS_CONSTANT: f64 = 8.314;

/// Reference temperature of the regression target, K.
pub const REFERENCE_TEMPERATURE: f64 = 298.0;

/// A measured point within this distance of the reference temperature is
/// used directly instead of the fit.
pub const REFERENCE_MATCH_TOLERANCE: f64 = 0.5;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct ConductivityPoint {
    pub temperature_k: f64,
    /// log10 of conductivity in S/cm.
    pub log10_sigma: f64,
}

/// Least-squares line `log10 sigma = k / T + b`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct ArrheniusFit {
    pub slope_k: f64,
    pub intercept_b: f64,
    pub n_points: usize,
    pub r_squared: f64,
}

impl ArrheniusFit {
    pub fn predict(&self, temperature_k: f64) -> f64 {
        self.slope_k / temperature_k + self.intercept_b
    }

    /// Activation energy in J/mol under the base-10 convention.
    pub fn activation_energy(&self) -> f64 {
        -self.slope_k * GAS_CONSTANT * std::f64::consts::LN_10
    }
}

/// Ordinary least squares of `log10 sigma` against `1/T`.
pub fn arrhenius_fit(points: &[ConductivityPoint]) -> Result<ArrheniusFit> {
    if points
        .iter()
        .any(|p| !(p.temperature_k > 0.0 && p.temperature_k.is_finite() && p.log10_sigma.is_finite()))
    {
        return Err(Error::Fit("temperatures must be positive and values finite".into()));
    }
    let mut temps: Vec<f64> = points.iter().map(|p| p.temperature_k).collect();
    temps.sort_by(f64::total_cmp);
    temps.dedup();
    if temps.len() < 2 {
        return Err(Error::Fit(format!(
            "need at least 2 distinct temperatures, got {}",
            temps.len()
        )));
    }
    let n = points.len() as f64;
    let xs: Vec<f64> = points.iter().map(|p| 1.0 / p.temperature_k).collect();
    let ys: Vec<f64> = points.iter().map(|p| p.log10_sigma).collect();
    let x_mean = xs.iter().sum::<f64>() / n;
    let y_mean = ys.iter().sum::<f64>() / n;
    let (mut sxx, mut sxy, mut syy) = (0.0, 0.0, 0.0);
    for (x, y) in xs.iter().zip(&ys) {
        let (dx, dy) = (x - x_mean, y - y_mean);
        sxx += dx * dx;
        sxy += dx * dy;
        syy += dy * dy;
    }
    let slope_k = sxy / sxx;
    let intercept_b = y_mean - slope_k * x_mean;
    let ss_res: f64 = xs
        .iter()
        .zip(&ys)
        .map(|(x, y)| (y - (slope_k * x + intercept_b)).powi(2))
        .sum();
    let r_squared = if syy == 0.0 { 1.0 } else { 1.0 - ss_res / syy };
    Ok(ArrheniusFit {
        slope_k,
        intercept_b,
        n_points: points.len(),
        r_squared,
    })
}

/// log10 conductivity at 298 K: a measured point within 0.5 K wins,
/// otherwise the Arrhenius extrapolation.
pub fn conductivity_at_reference(points: &[ConductivityPoint]) -> Result<f64> {
    let measured = points
        .iter()
        .filter(|p| (p.temperature_k - REFERENCE_TEMPERATURE).abs() <= REFERENCE_MATCH_TOLERANCE)
        .min_by(|a, b| {
            let da = (a.temperature_k - REFERENCE_TEMPERATURE).abs();
            let db = (b.temperature_k - REFERENCE_TEMPERATURE).abs();
            da.total_cmp(&db)
        });
    if let Some(p) = measured {
        return Ok(p.log10_sigma);
    }
    let fit = arrhenius_fit(points).map_err(|e| {
        Error::Data(format!("no 298 K measurement and no usable fit: {e}"))
    })?;
    Ok(fit.predict(REFERENCE_TEMPERATURE))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn pt(t: f64, y: f64) -> ConductivityPoint {
        ConductivityPoint {
            temperature_k: t,
            log10_sigma: y,
        }
    }

    #[test]
    fn two_point_closed_form() {
        let fit = arrhenius_fit(&[pt(300.0, -2.0), pt(250.0, -3.0)]).unwrap();
        assert!((fit.slope_k + 1500.0).abs() < 1e-10);
        assert!((fit.intercept_b - 3.0).abs() < 1e-10);
        assert_eq!(fit.n_points, 2);
        let expected = -1500.0 / 298.0 + 3.0;
        assert!((fit.predict(298.0) - expected).abs() < 1e-10);
    }

    #[test]
    fn constant_values_give_flat_fit() {
        let fit = arrhenius_fit(&[pt(280.0, -4.0), pt(300.0, -4.0), pt(320.0, -4.0)]).unwrap();
        assert_eq!(fit.slope_k, 0.0);
        assert_eq!(fit.intercept_b, -4.0);
        assert_eq!(fit.r_squared, 1.0);
    }

    #[test]
    fn collinear_points_have_unit_r_squared() {
        let pts: Vec<_> = [260.0, 290.0, 330.0]
            .iter()
            .map(|&t| pt(t, -800.0 / t + 0.5))
            .collect();
        let fit = arrhenius_fit(&pts).unwrap();
        assert!((fit.r_squared - 1.0).abs() < 1e-12);
    }

    #[test]
    fn degenerate_inputs_fail() {
        assert!(arrhenius_fit(&[pt(300.0, -2.0)]).is_err());
        assert!(arrhenius_fit(&[pt(300.0, -2.0), pt(300.0, -2.5)]).is_err());
        assert!(arrhenius_fit(&[pt(-1.0, -2.0), pt(300.0, -2.5)]).is_err());
    }

    #[test]
    fn reference_value_precedence() {
        let y = conductivity_at_reference(&[pt(300.0, -2.0), pt(250.0, -3.0)]).unwrap();
        assert!((y - (-1500.0 / 298.0 + 3.0)).abs() < 1e-10);
        assert!((y + 2.033_557_046_979_866).abs() < 1e-10);
        let y = conductivity_at_reference(&[pt(300.0, -2.0), pt(250.0, -3.0), pt(298.0, -2.5)])
            .unwrap();
        assert_eq!(y, -2.5);
        assert!(conductivity_at_reference(&[pt(310.0, -2.0)]).is_err());
    }

    #[test]
    fn activation_energy_sign() {
        let fit = arrhenius_fit(&[pt(300.0, -2.0), pt(250.0, -3.0)]).unwrap();
        assert!((fit.activation_energy() - 1500.0 * GAS_CONSTANT * std::f64::consts::LN_10).abs() < 1e-6);
    }
}

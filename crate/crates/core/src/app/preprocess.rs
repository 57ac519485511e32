//! Column-wise transformations applied before clustering.

use serde::{Deserialize, Serialize};

use crate::data::DataMatrix;
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Preprocessing {
    #[default]
    None,
    Standardize,
    BoxCox,
}

impl std::str::FromStr for Preprocessing {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, Self::Err> {
        match s {
            "none" => Ok(Self::None),
            "standardize" => Ok(Self::Standardize),
            "boxcox" => Ok(Self::BoxCox),
            other => Err(format!(
                "unknown preprocessing '{other}' (none, standardize, boxcox)"
            )),
        }
    }
}

/// Offset added past the shift that moves a column's minimum to one.
pub const BOXCOX_SHIFT_EPS: f64 = 1e-6;

/// Fitted Box-Cox parameters for one column.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BoxCoxColumn {
    pub lambda: f64,
    /// Added to the column before transforming (0 when already positive).
    pub shift: f64,
    pub log_likelihood: f64,
}

pub fn apply(
    data: &DataMatrix,
    how: Preprocessing,
) -> Result<(DataMatrix, Option<Vec<BoxCoxColumn>>)> {
    match how {
        Preprocessing::None => Ok((data.clone(), None)),
        Preprocessing::Standardize => Ok((standardize(data)?, None)),
        Preprocessing::BoxCox => boxcox_fit(data).map(|(d, cols)| (d, Some(cols))),
    }
}

fn check_not_constant(col: &[f64], j: usize) -> Result<()> {
    if col.iter().all(|&v| v == col[0]) {
        return Err(Error::DegenerateData(format!(
            "column {} is constant",
            j + 1
        )));
    }
    Ok(())
}

/// Centres each column and scales it to unit sample standard deviation.
pub fn standardize(data: &DataMatrix) -> Result<DataMatrix> {
    let mut out = data.clone();
    let n = data.n() as f64;
    for j in 0..data.p() {
        let col = data.column(j);
        check_not_constant(&col, j)?;
        let mean = col.iter().sum::<f64>() / n;
        let sd = (col.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1.0)).sqrt();
        let z: Vec<f64> = col.iter().map(|v| (v - mean) / sd).collect();
        out.set_column(j, &z);
    }
    Ok(out)
}

pub fn boxcox(x: f64, lambda: f64) -> f64 {
    if lambda == 0.0 {
        x.ln()
    } else {
        (x.powf(lambda) - 1.0) / lambda
    }
}

/// Profile log-likelihood `-(n/2) ln var(y) + (lambda - 1) sum ln x` of a
/// positive sample, with `var` the maximum-likelihood variance.
pub fn boxcox_log_likelihood(x: &[f64], lambda: f64) -> f64 {
    let n = x.len() as f64;
    let y: Vec<f64> = x.iter().map(|&v| boxcox(v, lambda)).collect();
    let mean = y.iter().sum::<f64>() / n;
    let var = y.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / n;
    -0.5 * n * var.ln() + (lambda - 1.0) * x.iter().map(|v| v.ln()).sum::<f64>()
}

/// The 41 grid values `-2.0, -1.9, .., 2.0`.
pub fn lambda_grid() -> impl Iterator<Item = f64> {
    (-20..=20).map(|i| i as f64 / 10.0)
}

/// Fits and applies a Box-Cox transform per column, choosing `lambda` on the
/// grid. Columns with non-positive entries are first shifted so that their
/// minimum becomes `1 + BOXCOX_SHIFT_EPS`.
pub fn boxcox_fit(data: &DataMatrix) -> Result<(DataMatrix, Vec<BoxCoxColumn>)> {
    let mut out = data.clone();
    let mut fitted = Vec::with_capacity(data.p());
    for j in 0..data.p() {
        let mut col = data.column(j);
        check_not_constant(&col, j)?;
        let min = col.iter().cloned().fold(f64::INFINITY, f64::min);
        let shift = if min > 0.0 {
            0.0
        } else {
            1.0 - min + BOXCOX_SHIFT_EPS
        };
        col.iter_mut().for_each(|v| *v += shift);

        let (lambda, log_likelihood) = lambda_grid()
            .map(|l| (l, boxcox_log_likelihood(&col, l)))
            .filter(|(_, ll)| ll.is_finite())
            .fold((f64::NAN, f64::NEG_INFINITY), |best, cur| {
                if cur.1 > best.1 {
                    cur
                } else {
                    best
                }
            });
        if lambda.is_nan() {
            return Err(Error::NumericalFailure(format!(
                "Box-Cox fit failed for column {}",
                j + 1
            )));
        }
        let y: Vec<f64> = col.iter().map(|&v| boxcox(v, lambda)).collect();
        if y.iter().any(|v| !v.is_finite()) {
            return Err(Error::NumericalFailure(format!(
                "Box-Cox output overflowed in column {}",
                j + 1
            )));
        }
        out.set_column(j, &y);
        fitted.push(BoxCoxColumn {
            lambda,
            shift,
            log_likelihood,
        });
    }
    Ok((out, fitted))
}

pub fn boxcox_transform(data: &DataMatrix) -> Result<DataMatrix> {
    boxcox_fit(data).map(|(d, _)| d)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::RngStream;
    use approx::assert_relative_eq;
    use rand::Rng;
    use rand_distr::StandardNormal;

    fn column(values: Vec<f64>) -> DataMatrix {
        let n = values.len();
        DataMatrix::new(values, n, 1).unwrap()
    }

    /// Gaussian log-likelihood of a sample at its ML estimates, up to constants.
    fn normal_fit(y: &[f64]) -> f64 {
        let n = y.len() as f64;
        let m = y.iter().sum::<f64>() / n;
        -0.5 * n * (y.iter().map(|v| (v - m).powi(2)).sum::<f64>() / n).ln()
    }

    #[test]
    fn grid_shape() {
        let g: Vec<f64> = lambda_grid().collect();
        assert_eq!(g.len(), 41);
        assert_eq!(g[0], -2.0);
        assert_eq!(g[20], 0.0);
        assert_eq!(g[40], 2.0);
    }

    #[test]
    fn lognormal_column_gets_log_like_transform() {
        let mut rng = RngStream::new(1, 0).rng();
        let x: Vec<f64> = (0..400)
            .map(|_| rng.sample::<f64, _>(StandardNormal).exp())
            .collect();
        let (y, fit) = boxcox_fit(&column(x.clone())).unwrap();
        assert!(fit[0].lambda.abs() <= 0.2, "{:?}", fit[0]);
        assert!(fit[0].log_likelihood > boxcox_log_likelihood(&x, 1.0));
        // Same comparison from the Gaussian fit plus the Jacobian term.
        let raw_shifted: Vec<f64> = x.iter().map(|v| v - 1.0).collect();
        assert!(
            normal_fit(&y.column(0))
                + (fit[0].lambda - 1.0) * x.iter().map(|v| v.ln()).sum::<f64>()
                > normal_fit(&raw_shifted)
        );
        // The transformed sample is closer to Gaussian than the raw one in skewness.
        let skew = |v: &[f64]| {
            let n = v.len() as f64;
            let m = v.iter().sum::<f64>() / n;
            let s2 = v.iter().map(|a| (a - m).powi(2)).sum::<f64>() / n;
            v.iter().map(|a| (a - m).powi(3)).sum::<f64>() / n / s2.powf(1.5)
        };
        assert!(skew(&y.column(0)).abs() < skew(&x).abs());
    }

    #[test]
    fn lambda_one_is_affine() {
        assert_eq!(boxcox(3.5, 1.0), 2.5);
        let mut rng = RngStream::new(2, 0).rng();
        let x: Vec<f64> = (0..500)
            .map(|_| 50.0 + rng.sample::<f64, _>(StandardNormal))
            .collect();
        let (y, fit) = boxcox_fit(&column(x.clone())).unwrap();
        // Far from zero a Gaussian column is nearly linear in x for any lambda on the grid.
        let yc = y.column(0);
        let (mx, my) = (
            x.iter().sum::<f64>() / 500.0,
            yc.iter().sum::<f64>() / 500.0,
        );
        let cov: f64 = x.iter().zip(&yc).map(|(a, b)| (a - mx) * (b - my)).sum();
        let vx: f64 = x.iter().map(|a| (a - mx).powi(2)).sum();
        let vy: f64 = yc.iter().map(|b| (b - my).powi(2)).sum();
        assert!(cov / (vx * vy).sqrt() > 0.999, "{:?}", fit);
    }

    #[test]
    fn constant_column_rejected() {
        let d = DataMatrix::new(vec![1.0, 5.0, 1.0, 6.0, 1.0, 7.0], 3, 2).unwrap();
        assert!(matches!(
            boxcox_transform(&d),
            Err(Error::DegenerateData(_))
        ));
        assert!(matches!(standardize(&d), Err(Error::DegenerateData(_))));
    }

    #[test]
    fn non_positive_columns_are_shifted() {
        let (y, fit) = boxcox_fit(&column(vec![-2.0, 0.0, 1.0, 4.0])).unwrap();
        assert_relative_eq!(fit[0].shift, 3.0 + BOXCOX_SHIFT_EPS);
        assert!(y.values().iter().all(|v| v.is_finite()));
    }

    #[test]
    fn standardized_moments() {
        let d = DataMatrix::new(vec![1.0, 10.0, 2.0, 20.0, 3.0, 60.0], 3, 2).unwrap();
        let z = standardize(&d).unwrap();
        for j in 0..2 {
            let c = z.column(j);
            assert_relative_eq!(c.iter().sum::<f64>(), 0.0, epsilon = 1e-12);
            assert_relative_eq!(
                c.iter().map(|v| v * v).sum::<f64>() / 2.0,
                1.0,
                epsilon = 1e-12
            );
        }
    }
}

//! Scalar statistics: correlation, relative error reduction, and least-squares
//! residuals for the coefficient of partial determination.

use nalgebra::{DMatrix, DVector};

use crate::data::PhonemeId;
use crate::error::{Error, Result};

fn mean(v: &[f64]) -> f64 {
    v.iter().sum::<f64>() / v.len() as f64
}

/// Pearson product-moment correlation.
///
/// A constant input is reported as [`Error::ZeroVariance`] rather than NaN.
pub fn pearson(x: &[f64], y: &[f64]) -> Result<f64> {
    if x.len() != y.len() {
        return Err(Error::LengthMismatch(x.len(), y.len()));
    }
    if x.len() < 2 {
        return Err(Error::NoData("pearson needs at least 2 samples"));
    }
    let (mx, my) = (mean(x), mean(y));
    let (mut sxy, mut sxx, mut syy) = (0.0, 0.0, 0.0);
    for (&a, &b) in x.iter().zip(y) {
        let (dx, dy) = (a - mx, b - my);
        sxy += dx * dy;
        sxx += dx * dx;
        syy += dy * dy;
    }
    if sxx == 0.0 {
        return Err(Error::ZeroVariance("first correlation argument"));
    }
    if syy == 0.0 {
        return Err(Error::ZeroVariance("second correlation argument"));
    }
    Ok((sxy / (sxx.sqrt() * syy.sqrt())).clamp(-1.0, 1.0))
}

/// Point-biserial correlation `(M1 - M0) / s_n * sqrt(n1 n0 / n^2)` of a
/// continuous variable against a 0/1 indicator. Numerically equal to
/// [`pearson`] with the indicator as one argument.
pub fn point_biserial(indicator: &[bool], values: &[f64]) -> Result<f64> {
    if indicator.len() != values.len() {
        return Err(Error::LengthMismatch(indicator.len(), values.len()));
    }
    let n = values.len() as f64;
    let (mut s1, mut n1, mut s0, mut n0) = (0.0, 0usize, 0.0, 0usize);
    for (&b, &v) in indicator.iter().zip(values) {
        if b {
            s1 += v;
            n1 += 1;
        } else {
            s0 += v;
            n0 += 1;
        }
    }
    if n1 == 0 || n0 == 0 {
        return Err(Error::ZeroVariance("binary indicator"));
    }
    let m = mean(values);
    let sn = (values.iter().map(|v| (v - m).powi(2)).sum::<f64>() / n).sqrt();
    if sn == 0.0 {
        return Err(Error::ZeroVariance("continuous variable"));
    }
    let (m1, m0) = (s1 / n1 as f64, s0 / n0 as f64);
    Ok((m1 - m0) / sn * ((n1 as f64) * (n0 as f64) / (n * n)).sqrt())
}

/// Relative error reduction over a baseline.
pub fn rer(model_error: f64, baseline_error: f64) -> Result<f64> {
    if baseline_error <= 0.0 {
        return Err(Error::ZeroBaselineError);
    }
    Ok((baseline_error - model_error) / baseline_error)
}

/// Error rate of always predicting the most frequent label, and that label.
/// Ties go to the smallest label id.
pub fn majority_error(labels: &[PhonemeId]) -> Result<(f64, PhonemeId)> {
    if labels.is_empty() {
        return Err(Error::NoData("majority baseline over zero labels"));
    }
    let n_classes = labels.iter().max().unwrap() + 1;
    let mut counts = vec![0usize; n_classes];
    for &l in labels {
        counts[l] += 1;
    }
    let (label, &count) = counts
        .iter()
        .enumerate()
        .max_by(|a, b| a.1.cmp(b.1).then(b.0.cmp(&a.0)))
        .unwrap();
    Ok((1.0 - count as f64 / labels.len() as f64, label))
}

/// Response `y` with regressor blocks `x` and `z`, each a list of columns.
/// An intercept is always added.
#[derive(Debug, Clone)]
pub struct RegressionDesign {
    pub y: Vec<f64>,
    pub x: Vec<Vec<f64>>,
    pub z: Vec<Vec<f64>>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Regressors {
    ZOnly,
    XPlusZ,
}

impl RegressionDesign {
    fn validate(&self) -> Result<()> {
        let n = self.y.len();
        for col in self.x.iter().chain(&self.z) {
            if col.len() != n {
                return Err(Error::LengthMismatch(n, col.len()));
            }
        }
        let p = self.x.len() + self.z.len();
        if n <= p + 1 {
            return Err(Error::Config(format!(
                "regression needs more than {} observations, found {n}",
                p + 1
            )));
        }
        Ok(())
    }

    fn matrix(&self, which: Regressors) -> DMatrix<f64> {
        let n = self.y.len();
        let mut cols: Vec<&[f64]> = Vec::new();
        if which == Regressors::XPlusZ {
            cols.extend(self.x.iter().map(Vec::as_slice));
        }
        cols.extend(self.z.iter().map(Vec::as_slice));
        DMatrix::from_fn(n, cols.len() + 1, |i, j| if j == 0 { 1.0 } else { cols[j - 1][i] })
    }
}

const RANK_TOL: f64 = 1e-10;

/// Residual sum of squares of the least-squares fit, via Householder QR.
pub fn ols_rss(design: &RegressionDesign, which: Regressors) -> Result<f64> {
    design.validate()?;
    rss(design.matrix(which), &design.y)
}

fn rss(a: DMatrix<f64>, y: &[f64]) -> Result<f64> {
    let y = DVector::from_column_slice(y);
    let qr = a.clone().qr();
    let r = qr.r();
    let scale = (0..r.ncols()).map(|i| r[(i, i)].abs()).fold(0.0, f64::max);
    if scale == 0.0 || (0..r.ncols()).any(|i| r[(i, i)].abs() <= RANK_TOL * scale) {
        return Err(Error::RankDeficient);
    }
    let qty = qr.q().transpose() * &y;
    let beta = r
        .solve_upper_triangular(&qty)
        .ok_or(Error::RankDeficient)?;
    let resid = y - a * beta;
    Ok(resid.norm_squared())
}

/// Columns of `a` not in the span of earlier columns.
fn independent_columns(a: &DMatrix<f64>) -> DMatrix<f64> {
    let mut basis: Vec<DVector<f64>> = Vec::new();
    let mut kept = Vec::new();
    for (j, col) in a.column_iter().enumerate() {
        let mut r = col.into_owned();
        for _ in 0..2 {
            for q in &basis {
                let c = q.dot(&r);
                r.axpy(-c, q, 1.0);
            }
        }
        let norm = r.norm();
        if norm > 1e-8 * col.norm() {
            basis.push(r / norm);
            kept.push(j);
        }
    }
    a.select_columns(&kept)
}

/// `(e(Y~Z) - e(Y~X+Z)) / e(Y~Z)`: the share of the Z-only residual error
/// removed by adding X.
pub fn partial_r2(design: &RegressionDesign) -> Result<f64> {
    let e_z = ols_rss(design, Regressors::ZOnly)?;
    // X columns already spanned by Z add nothing; the nested fit drops them
    let e_xz = match ols_rss(design, Regressors::XPlusZ) {
        Err(Error::RankDeficient) => rss(independent_columns(&design.matrix(Regressors::XPlusZ)), &design.y)?,
        other => other?,
    };
    let tss: f64 = {
        let m = mean(&design.y);
        design.y.iter().map(|v| (v - m).powi(2)).sum()
    };
    if e_z <= 1e-12 * tss.max(f64::MIN_POSITIVE) {
        return Err(Error::DegenerateBaseline);
    }
    Ok(((e_z - e_xz) / e_z).clamp(0.0, 1.0))
}

/// Reporting transform `sqrt(|R²_partial|)`.
pub fn sqrt_abs(value: f64) -> f64 {
    value.abs().sqrt()
}

pub fn sqrt_abs_partial_r2(design: &RegressionDesign) -> Result<f64> {
    partial_r2(design).map(sqrt_abs)
}

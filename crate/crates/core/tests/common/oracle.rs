//! Independent reference implementations used as test oracles.

use rand::Rng;

use super::{normal, normal_vec, rng, uniform};
use phonoprobe::stats::{RegressionDesign, Regressors};

/// Single-pass sums formula.
pub fn pearson_sums(x: &[f64], y: &[f64]) -> f64 {
    let n = x.len() as f64;
    let (mut sx, mut sy, mut sxx, mut syy, mut sxy) = (0.0, 0.0, 0.0, 0.0, 0.0);
    for (a, b) in x.iter().zip(y) {
        sx += a;
        sy += b;
        sxx += a * a;
        syy += b * b;
        sxy += a * b;
    }
    (n * sxy - sx * sy) / ((n * sxx - sx * sx) * (n * syy - sy * sy)).sqrt()
}

/// `(M1 − M0) / s_n · sqrt(n1 n0 / n²)` with the population standard deviation.
pub fn point_biserial_formula(indicator: &[bool], values: &[f64]) -> f64 {
    let n = values.len() as f64;
    let ones: Vec<f64> = values.iter().zip(indicator).filter(|p| *p.1).map(|p| *p.0).collect();
    let zeros: Vec<f64> = values.iter().zip(indicator).filter(|p| !*p.1).map(|p| *p.0).collect();
    let mean = |v: &[f64]| v.iter().sum::<f64>() / v.len() as f64;
    let m = mean(values);
    let s_n = (values.iter().map(|v| (v - m).powi(2)).sum::<f64>() / n).sqrt();
    let (n1, n0) = (ones.len() as f64, zeros.len() as f64);
    (mean(&ones) - mean(&zeros)) / s_n * (n1 * n0 / (n * n)).sqrt()
}

/// Gaussian elimination with partial pivoting.
pub fn solve(mut a: Vec<Vec<f64>>, mut b: Vec<f64>) -> Vec<f64> {
    let n = b.len();
    for col in 0..n {
        let pivot = (col..n).max_by(|&i, &j| a[i][col].abs().total_cmp(&a[j][col].abs())).unwrap();
        a.swap(col, pivot);
        b.swap(col, pivot);
        for row in col + 1..n {
            let f = a[row][col] / a[col][col];
            for k in col..n {
                a[row][k] -= f * a[col][k];
            }
            b[row] -= f * b[col];
        }
    }
    let mut x = vec![0.0; n];
    for row in (0..n).rev() {
        let s: f64 = (row + 1..n).map(|k| a[row][k] * x[k]).sum();
        x[row] = (b[row] - s) / a[row][row];
    }
    x
}

/// RSS from the normal equations `AᵀA β = Aᵀy`, intercept first.
pub fn rss_normal_equations(y: &[f64], cols: &[&Vec<f64>]) -> f64 {
    let n = y.len();
    let mut design: Vec<Vec<f64>> = vec![vec![1.0; n]];
    design.extend(cols.iter().map(|c| c.to_vec()));
    let p = design.len();
    let ata: Vec<Vec<f64>> = (0..p)
        .map(|i| (0..p).map(|j| (0..n).map(|k| design[i][k] * design[j][k]).sum()).collect())
        .collect();
    let aty: Vec<f64> = (0..p).map(|i| (0..n).map(|k| design[i][k] * y[k]).sum()).collect();
    let beta = solve(ata, aty);
    (0..n)
        .map(|k| {
            let fit: f64 = (0..p).map(|i| beta[i] * design[i][k]).sum();
            (y[k] - fit).powi(2)
        })
        .sum()
}

pub fn oracle_rss(d: &RegressionDesign, which: Regressors) -> f64 {
    let mut cols: Vec<&Vec<f64>> = Vec::new();
    if which == Regressors::XPlusZ {
        cols.extend(&d.x);
    }
    cols.extend(&d.z);
    rss_normal_equations(&d.y, &cols)
}

pub fn oracle_partial(d: &RegressionDesign) -> f64 {
    let e_z = oracle_rss(d, Regressors::ZOnly);
    (e_z - oracle_rss(d, Regressors::XPlusZ)) / e_z
}

pub fn random_design(seed: u64) -> RegressionDesign {
    let mut r = rng(seed);
    let n = r.random_range(20..=200);
    let (px, pz) = (r.random_range(1..=2), r.random_range(1..=3));
    let x: Vec<Vec<f64>> = (0..px).map(|_| normal_vec(&mut r, n)).collect();
    let z: Vec<Vec<f64>> = (0..pz).map(|_| normal_vec(&mut r, n)).collect();
    let bx: Vec<f64> = (0..px).map(|_| uniform(&mut r, 0.3, 2.0)).collect();
    let bz: Vec<f64> = (0..pz).map(|_| uniform(&mut r, -2.0, 2.0)).collect();
    let offset = uniform(&mut r, -5.0, 5.0);
    let y = (0..n)
        .map(|k| {
            offset
                + x.iter().zip(&bx).map(|(c, b)| b * c[k]).sum::<f64>()
                + z.iter().zip(&bz).map(|(c, b)| b * c[k]).sum::<f64>()
                + normal(&mut r)
        })
        .collect();
    RegressionDesign { y, x, z }
}

/// Textbook full-table dynamic programme.
pub fn edit_distance_table(a: &[u8], b: &[u8]) -> usize {
    let mut d = vec![vec![0usize; b.len() + 1]; a.len() + 1];
    for (i, row) in d.iter_mut().enumerate() {
        row[0] = i;
    }
    for j in 0..=b.len() {
        d[0][j] = j;
    }
    for i in 1..=a.len() {
        for j in 1..=b.len() {
            let sub = d[i - 1][j - 1] + usize::from(a[i - 1] != b[j - 1]);
            d[i][j] = sub.min(d[i - 1][j] + 1).min(d[i][j - 1] + 1);
        }
    }
    d[a.len()][b.len()]
}

pub fn all_strings(max_len: usize, alphabet: u8) -> Vec<Vec<u8>> {
    let mut out = vec![Vec::new()];
    let mut frontier = vec![Vec::new()];
    for _ in 0..max_len {
        let mut next = Vec::new();
        for s in &frontier {
            for c in 0..alphabet {
                let mut t: Vec<u8> = s.clone();
                t.push(c);
                next.push(t);
            }
        }
        out.extend(next.iter().cloned());
        frontier = next;
    }
    out
}


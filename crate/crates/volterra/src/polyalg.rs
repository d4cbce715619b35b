//! Small-scale numerical kernels: dense linear solves with partial pivoting,
//! polynomial root finding, and truncated power-series arithmetic realized as
//! discrete convolutions.

use crate::error::{Error, Result};
use num_complex::Complex64;

/// Real polynomial with coefficients in ascending degree order.
///
/// The zero polynomial is represented by an empty coefficient list; otherwise
/// the leading coefficient is nonzero after [`Polynomial::new`] trims it.
#[derive(Debug, Clone, PartialEq)]
pub struct Polynomial {
    coeffs: Vec<f64>,
}

impl Polynomial {
    pub fn new(coeffs: Vec<f64>) -> Self {
        let mut coeffs = coeffs;
        while coeffs.last() == Some(&0.0) {
            coeffs.pop();
        }
        Polynomial { coeffs }
    }

    pub fn coeffs(&self) -> &[f64] {
        &self.coeffs
    }

    pub fn degree(&self) -> usize {
        self.coeffs.len().saturating_sub(1)
    }

    pub fn is_zero(&self) -> bool {
        self.coeffs.is_empty()
    }

    pub fn eval(&self, x: f64) -> f64 {
        self.coeffs.iter().rev().fold(0.0, |acc, &c| acc * x + c)
    }

    pub fn eval_complex(&self, z: Complex64) -> Complex64 {
        self.coeffs
            .iter()
            .rev()
            .fold(Complex64::new(0.0, 0.0), |acc, &c| acc * z + c)
    }

    pub fn derivative(&self) -> Polynomial {
        if self.coeffs.len() <= 1 {
            return Polynomial::new(vec![]);
        }
        Polynomial::new(
            self.coeffs
                .iter()
                .enumerate()
                .skip(1)
                .map(|(k, &c)| k as f64 * c)
                .collect(),
        )
    }
}

/// Truncated power-series coefficients of a declared length.
#[derive(Debug, Clone, PartialEq)]
pub struct SeriesCoeffs {
    values: Vec<f64>,
}

impl SeriesCoeffs {
    pub fn new(values: Vec<f64>) -> Self {
        SeriesCoeffs { values }
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn declared_length(&self) -> usize {
        self.values.len()
    }
}

fn inf_norm_matrix(matrix: &[Vec<f64>]) -> f64 {
    matrix
        .iter()
        .map(|row| row.iter().map(|v| v.abs()).sum::<f64>())
        .fold(0.0, f64::max)
}

/// Solve a dense square system by Gaussian elimination with partial pivoting.
///
/// Fails with `SingularMatrix` when a pivot falls below `1e-14 * ||A||_inf`.
pub fn solve_dense(matrix: &[Vec<f64>], rhs: &[f64]) -> Result<Vec<f64>> {
    let m = matrix.len();
    assert!(m >= 1, "matrix must be nonempty");
    assert!(matrix.iter().all(|r| r.len() == m), "matrix must be square");
    assert_eq!(rhs.len(), m);

    let norm = inf_norm_matrix(matrix).max(f64::MIN_POSITIVE);
    let threshold = 1e-14 * norm;

    let mut a: Vec<Vec<f64>> = matrix.to_vec();
    let mut b: Vec<f64> = rhs.to_vec();

    for col in 0..m {
        let (pivot_row, pivot) = (col..m)
            .map(|r| (r, a[r][col].abs()))
            .max_by(|x, y| x.1.total_cmp(&y.1))
            .unwrap();
        if pivot < threshold {
            return Err(Error::SingularMatrix { pivot });
        }
        a.swap(col, pivot_row);
        b.swap(col, pivot_row);
        for r in col + 1..m {
            let factor = a[r][col] / a[col][col];
            if factor != 0.0 {
                for c in col..m {
                    a[r][c] -= factor * a[col][c];
                }
                b[r] -= factor * b[col];
            }
        }
    }
    let mut x = vec![0.0; m];
    for row in (0..m).rev() {
        let mut acc = b[row];
        for c in row + 1..m {
            acc -= a[row][c] * x[c];
        }
        x[row] = acc / a[row][row];
    }
    Ok(x)
}

/// Invert a small dense matrix column by column.
pub fn invert_dense(matrix: &[Vec<f64>]) -> Result<Vec<Vec<f64>>> {
    let m = matrix.len();
    let mut cols = Vec::with_capacity(m);
    for j in 0..m {
        let mut e = vec![0.0; m];
        e[j] = 1.0;
        cols.push(solve_dense(matrix, &e)?);
    }
    // transpose column solutions into rows
    Ok((0..m)
        .map(|i| (0..m).map(|j| cols[j][i]).collect())
        .collect())
}

/// Infinity norm of a square matrix given as rows.
pub fn inf_norm(matrix: &[Vec<f64>]) -> f64 {
    inf_norm_matrix(matrix)
}

const ABERTH_MAX_ITER: usize = 200;

/// All complex roots of `p` via Aberth-Ehrlich iteration, with a
/// companion-matrix eigenvalue fallback when the iteration stalls.
pub fn roots(p: &Polynomial) -> Result<Vec<Complex64>> {
    let degree = p.degree();
    assert!(degree >= 1, "degree must be at least 1");
    let max_coeff = p.coeffs().iter().fold(0.0f64, |m, c| m.max(c.abs()));
    let tol = 1e-12 * max_coeff;

    match aberth(p, tol) {
        Ok(rs) => Ok(rs),
        Err(_) => {
            let rs = companion_roots(p);
            let ok = rs
                .iter()
                .all(|&z| p.eval_complex(z).norm() <= 1e-8 * max_coeff);
            if ok {
                Ok(rs)
            } else {
                Err(Error::NoConvergence {
                    iterations: ABERTH_MAX_ITER,
                })
            }
        }
    }
}

fn aberth(p: &Polynomial, tol: f64) -> Result<Vec<Complex64>> {
    let n = p.degree();
    let dp = p.derivative();

    // initial guesses on a circle of radius derived from the Cauchy bound,
    // with a fixed angular perturbation to break symmetry
    let lead = p.coeffs()[n].abs();
    let radius = 1.0
        + p.coeffs()[..n]
            .iter()
            .fold(0.0f64, |m, c| m.max(c.abs() / lead));
    let mut z: Vec<Complex64> = (0..n)
        .map(|k| {
            let angle = 2.0 * std::f64::consts::PI * (k as f64 + 0.3531) / n as f64 + 0.123;
            Complex64::from_polar(radius * 0.7, angle)
        })
        .collect();

    for _ in 0..ABERTH_MAX_ITER {
        let mut converged = true;
        for k in 0..n {
            let pk = p.eval_complex(z[k]);
            if pk.norm() <= tol {
                continue;
            }
            let dpk = dp.eval_complex(z[k]);
            let newton = pk / dpk;
            let mut sum = Complex64::new(0.0, 0.0);
            for j in 0..n {
                if j != k {
                    sum += 1.0 / (z[k] - z[j]);
                }
            }
            let denom = 1.0 - newton * sum;
            let step = newton / denom;
            z[k] -= step;
            if step.norm() > 1e-14 * (1.0 + z[k].norm()) {
                converged = false;
            }
        }
        if converged {
            let max_coeff = p.coeffs().iter().fold(0.0f64, |m, c| m.max(c.abs()));
            if z
                .iter()
                .all(|&r| p.eval_complex(r).norm() <= 1e-8 * max_coeff)
            {
                return Ok(z);
            }
        }
    }
    Err(Error::NoConvergence {
        iterations: ABERTH_MAX_ITER,
    })
}

fn companion_roots(p: &Polynomial) -> Vec<Complex64> {
    let n = p.degree();
    let lead = p.coeffs()[n];
    let mut mat = nalgebra::DMatrix::<f64>::zeros(n, n);
    for i in 1..n {
        mat[(i, i - 1)] = 1.0;
    }
    for i in 0..n {
        mat[(i, n - 1)] = -p.coeffs()[i] / lead;
    }
    mat.complex_eigenvalues().iter().copied().collect()
}

/// Coefficients of `1/p` through index `n - 1`.
///
/// Defined by the convolution identity `sum_s p_{r-s} q_s = delta_{0r}`.
pub fn series_inverse(p: &Polynomial, n: usize) -> Result<SeriesCoeffs> {
    series_divide_raw(&[1.0], p.coeffs(), n)
}

/// Coefficients of `num/den` through index `n - 1`.
pub fn series_divide(num: &Polynomial, den: &Polynomial, n: usize) -> Result<SeriesCoeffs> {
    series_divide_raw(num.coeffs(), den.coeffs(), n)
}

fn series_divide_raw(num: &[f64], den: &[f64], n: usize) -> Result<SeriesCoeffs> {
    let d0 = *den.first().ok_or(Error::ZeroConstantTerm)?;
    if d0 == 0.0 {
        return Err(Error::ZeroConstantTerm);
    }
    let mut q = Vec::with_capacity(n);
    for r in 0..n {
        let mut acc = num.get(r).copied().unwrap_or(0.0);
        for s in 0..r {
            if let Some(&dc) = den.get(r - s) {
                acc -= dc * q[s];
            }
        }
        q.push(acc / d0);
    }
    Ok(SeriesCoeffs::new(q))
}

/// Discrete convolution of two finite sequences, truncated to length `n`.
pub fn convolve(a: &[f64], b: &[f64], n: usize) -> Vec<f64> {
    let mut out = vec![0.0; n];
    for r in 0..n {
        let mut acc = 0.0;
        for s in 0..=r {
            let av = a.get(r - s).copied().unwrap_or(0.0);
            let bv = b.get(s).copied().unwrap_or(0.0);
            acc += av * bv;
        }
        out[r] = acc;
    }
    out
}

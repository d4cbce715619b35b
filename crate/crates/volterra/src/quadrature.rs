//! Reducible quadrature built from a multistep method: interpolatory starting
//! weights, the running-weight table, and the forward integrator used to
//! validate the recursion/weight-form identity.

use crate::error::{Error, Result};
use crate::msm::MultistepMethod;
use crate::polyalg::solve_dense;

/// Interpolatory starting weights.
///
/// Row `r` (1-based, `r = 1..=m`) integrates over `[0, r]` in grid units with
/// nodes `0..m-1`, exactly for polynomials of degree `<= m - 1`. Row `r = m`
/// is included because the starting-value system of the Volterra solver
/// needs it; it is kept apart from the running table.
pub fn starting_weights(m: usize) -> Result<Vec<Vec<f64>>> {
    assert!((1..=8).contains(&m));
    // moment matrix M[q][s] = s^q with 0^0 = 1
    let matrix: Vec<Vec<f64>> = (0..m)
        .map(|q| {
            (0..m)
                .map(|s| if q == 0 { 1.0 } else { (s as f64).powi(q as i32) })
                .collect()
        })
        .collect();
    let mut rows = Vec::with_capacity(m);
    for r in 1..=m {
        let rhs: Vec<f64> = (0..m)
            .map(|q| (r as f64).powi(q as i32 + 1) / (q as f64 + 1.0))
            .collect();
        let row = solve_dense(&matrix, &rhs).map_err(|_| Error::SingularSystem)?;
        rows.push(row);
    }
    Ok(rows)
}

/// Weights of the quadrature rule `phi_n = h sum_{s=0}^{n-mu} w_{ns} psi_s`.
///
/// Only the gamma band and the `m` start columns are stored; the running part
/// depends on `n - mu - s` alone.
#[derive(Debug, Clone)]
pub struct WeightTable {
    method: MultistepMethod,
    n_max: usize,
    /// interpolatory rows r = 1..=m (row r = m separate from the table)
    start_rows: Vec<Vec<f64>>,
    /// start_cols[s][n] = w_{ns} for s = 0..m-1, n = 0..=N
    start_cols: Vec<Vec<f64>>,
    /// gamma[j] = gamma_j, j = 0..=N
    gamma: Vec<f64>,
    max_abs_weight: f64,
}

/// Build the weight table for an admitted method on an `N + 1`-point grid.
pub fn running_weights(method: &MultistepMethod, n_max: usize) -> Result<WeightTable> {
    if !method.is_admitted() {
        return Err(Error::MethodNotAdmitted(method.name().to_string()));
    }
    let m = method.m();
    let mu = method.mu();
    assert!(n_max >= m + mu);

    let start_rows = starting_weights(m)?;
    let gamma = method.gamma(n_max + 1).values().to_vec();

    let alpha: Vec<f64> = {
        let mut v = method.a().to_vec();
        v.reverse();
        v
    };
    let beta: Vec<f64> = {
        let mut v = method.b()[..=m - mu].to_vec();
        v.reverse();
        v
    };

    // start columns by the inhomogeneous convolution recursion, seeded with
    // w_{0s} = 0 and the interpolatory rows for n = 1..m-1
    let mut start_cols = vec![vec![0.0; n_max + 1]; m];
    for (s, col) in start_cols.iter_mut().enumerate() {
        for n in 1..m {
            col[n] = start_rows[n - 1][s];
        }
        for n in m..=n_max {
            let rhs = if n >= mu + s {
                beta.get(n - mu - s).copied().unwrap_or(0.0)
            } else {
                0.0
            };
            let mut acc = rhs;
            for t in 1..=m.min(n) {
                acc -= alpha[t] * col[n - t];
            }
            col[n] = acc / alpha[0];
        }
    }

    let max_abs_weight = gamma
        .iter()
        .chain(start_cols.iter().flatten())
        .fold(0.0f64, |acc, v| acc.max(v.abs()));

    Ok(WeightTable {
        method: method.clone(),
        n_max,
        start_rows,
        start_cols,
        gamma,
        max_abs_weight,
    })
}

impl WeightTable {
    pub fn method(&self) -> &MultistepMethod {
        &self.method
    }

    pub fn n_max(&self) -> usize {
        self.n_max
    }

    /// Interpolatory starting rows `w~_{rs}`, r = 1..=m.
    pub fn start_rows(&self) -> &[Vec<f64>] {
        &self.start_rows
    }

    pub fn gamma(&self) -> &[f64] {
        &self.gamma
    }

    /// Realized weight `w_{ns}` for `m + mu <= n <= N`, `0 <= s <= n - mu`.
    pub fn weight(&self, n: usize, s: usize) -> f64 {
        let m = self.method.m();
        let mu = self.method.mu();
        debug_assert!(n >= m + mu && n <= self.n_max && s <= n - mu);
        if s < m {
            self.start_cols[s][n]
        } else {
            self.gamma[n - mu - s]
        }
    }

    /// Largest realized weight magnitude, finite for nullstable methods.
    pub fn max_abs_weight(&self) -> f64 {
        self.max_abs_weight
    }

    /// `max_{m+mu <= n <= N} sum_{s<m} |w_{ns}|`, a factor of the balancing
    /// constant C2.
    pub fn start_column_abs_row_sum_max(&self) -> f64 {
        let m = self.method.m();
        let mu = self.method.mu();
        let mut best = 0.0f64;
        for n in m + mu..=self.n_max {
            let sum: f64 = (0..m).map(|s| self.start_cols[s][n].abs()).sum();
            best = best.max(sum);
        }
        best
    }
}

/// Value of the quadrature at the final node, computed along both routes.
#[derive(Debug, Clone, Copy)]
pub struct ForwardValue {
    pub recursion: f64,
    pub weight_form: f64,
}

impl ForwardValue {
    pub fn value(self) -> f64 {
        self.weight_form
    }
}

/// Integrate sampled values `psi_0..psi_{n-mu}` forward to `phi_n` along the
/// multistep recursion and, independently, via the weight table.
pub fn integrate_forward(method: &MultistepMethod, psi: &[f64], h: f64) -> Result<ForwardValue> {
    let m = method.m();
    let mu = method.mu();
    if psi.len() < m + 1 {
        return Err(Error::LengthMismatch {
            expected: m + 1,
            got: psi.len(),
        });
    }
    let n = psi.len() - 1 + mu;

    let recursion = *recursion_path(method, psi, h)?.last().unwrap();

    let table = running_weights(method, n)?;
    let mut weight_form = 0.0;
    for s in 0..=n - mu {
        weight_form += table.weight(n, s) * psi[s];
    }
    weight_form *= h;

    Ok(ForwardValue {
        recursion,
        weight_form,
    })
}

/// All values `phi_0..phi_n` by starting rows plus the recurrence.
pub fn recursion_path(method: &MultistepMethod, psi: &[f64], h: f64) -> Result<Vec<f64>> {
    let m = method.m();
    let mu = method.mu();
    if psi.len() < m + 1 {
        return Err(Error::LengthMismatch {
            expected: m + 1,
            got: psi.len(),
        });
    }
    let n = psi.len() - 1 + mu;
    let start_rows = starting_weights(m)?;
    let a = method.a();
    let b = method.b();

    let mut phi = vec![0.0; n + 1];
    for r in 1..m {
        phi[r] = h * (0..m).map(|s| start_rows[r - 1][s] * psi[s]).sum::<f64>();
    }
    for r in 0..=n - m {
        let mut acc = 0.0;
        for j in 0..=m - mu {
            acc += b[j] * psi[r + j];
        }
        acc *= h;
        for j in 0..m {
            acc -= a[j] * phi[r + j];
        }
        phi[r + m] = acc / a[m];
    }
    Ok(phi)
}

/// Local truncation error `lambda(psi, y, h)` evaluated from a closed-form
/// antiderivative. The constant of integration cancels because the a-weights
/// sum to zero.
pub fn local_truncation_error(
    method: &MultistepMethod,
    psi: impl Fn(f64) -> f64,
    antiderivative: impl Fn(f64) -> f64,
    y: f64,
    h: f64,
) -> f64 {
    let m = method.m();
    let mut acc = 0.0;
    for j in 0..=m {
        let x = y + j as f64 * h;
        acc += method.a()[j] * antiderivative(x) - h * method.b()[j] * psi(x);
    }
    acc
}

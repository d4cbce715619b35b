//! Marching solver for first-kind Volterra equations
//! `int_a^x k(x, y) u(y) dy = f(x)` on a uniform grid, driven by the
//! reducible quadrature of an admitted multistep method. Two equivalent
//! routes are provided: the explicit weight form (default) and the multistep
//! recursion (kept as a cross-check).

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::msm::MultistepMethod;
use crate::polyalg::solve_dense;
use crate::quadrature::{running_weights, starting_weights};

type Kernel = Box<dyn Fn(f64, f64) -> f64 + Send + Sync>;
type Scalar = Box<dyn Fn(f64) -> f64 + Send + Sync>;

/// Problem instance: kernel, right-hand side, interval, and the kernel
/// bounds entering the balancing constants. The kernel is assumed
/// normalized to `k(x, x) = 1`.
pub struct Problem {
    a: f64,
    b: f64,
    kernel: Kernel,
    rhs: Scalar,
    solution: Option<Scalar>,
    /// Lipschitz bound of `x -> k(x, y)`, uniform in `y`.
    kernel_lipschitz: f64,
    /// sup |k| over the triangle.
    kernel_sup: f64,
}

impl Problem {
    pub fn new(
        a: f64,
        b: f64,
        kernel: impl Fn(f64, f64) -> f64 + Send + Sync + 'static,
        rhs: impl Fn(f64) -> f64 + Send + Sync + 'static,
        kernel_lipschitz: f64,
        kernel_sup: f64,
    ) -> Self {
        assert!(b > a);
        Self {
            a,
            b,
            kernel: Box::new(kernel),
            rhs: Box::new(rhs),
            solution: None,
            kernel_lipschitz,
            kernel_sup,
        }
    }

    pub fn with_solution(mut self, u: impl Fn(f64) -> f64 + Send + Sync + 'static) -> Self {
        self.solution = Some(Box::new(u));
        self
    }

    pub fn interval(&self) -> (f64, f64) {
        (self.a, self.b)
    }

    pub fn len(&self) -> f64 {
        self.b - self.a
    }

    pub fn kernel(&self, x: f64, y: f64) -> f64 {
        (self.kernel)(x, y)
    }

    pub fn rhs(&self, x: f64) -> f64 {
        (self.rhs)(x)
    }

    pub fn solution(&self, y: f64) -> Option<f64> {
        self.solution.as_ref().map(|u| u(y))
    }

    pub fn kernel_lipschitz(&self) -> f64 {
        self.kernel_lipschitz
    }

    pub fn kernel_sup(&self) -> f64 {
        self.kernel_sup
    }

    /// Check the diagonal normalization `k(x, x) = 1` on a sample of the
    /// interval.
    pub fn validate_diagonal(&self) -> Result<()> {
        for i in 0..=100 {
            let x = self.a + (self.b - self.a) * i as f64 / 100.0;
            let v = self.kernel(x, x);
            if (v - 1.0).abs() > 1e-10 {
                return Err(Error::Invalid(format!(
                    "kernel diagonal at x = {x} is {v}, expected 1"
                )));
            }
        }
        Ok(())
    }
}

/// Right-hand-side samples `f^delta(x_i)` on the `N + 1`-point grid, with
/// their noise level.
#[derive(Debug, Clone)]
pub struct NoisySamples {
    values: Vec<f64>,
    delta: f64,
}

impl NoisySamples {
    pub fn new(values: Vec<f64>, delta: f64) -> Self {
        Self { values, delta }
    }

    /// Exact samples, `delta = 0`.
    pub fn exact(problem: &Problem, n_steps: usize) -> Self {
        let h = problem.len() / n_steps as f64;
        let values = (0..=n_steps)
            .map(|i| problem.rhs(problem.a + i as f64 * h))
            .collect();
        Self { values, delta: 0.0 }
    }

    /// Samples with fresh uniform noise on `[-delta, delta]`.
    pub fn with_uniform_noise(problem: &Problem, n_steps: usize, delta: f64, seed: u64) -> Self {
        let noise = master_noise(n_steps + 1, delta, seed);
        Self::from_master(problem, n_steps, delta, &noise, 1)
    }

    /// Samples that reuse a master noise vector drawn on a finer grid: node
    /// `i` of this grid perturbs with `master[i * stride]`. Solving the same
    /// instance at several resolutions then sees coherent data.
    pub fn from_master(
        problem: &Problem,
        n_steps: usize,
        delta: f64,
        master: &[f64],
        stride: usize,
    ) -> Self {
        assert!(master.len() > n_steps * stride);
        let h = problem.len() / n_steps as f64;
        let values = (0..=n_steps)
            .map(|i| problem.rhs(problem.a + i as f64 * h) + master[i * stride])
            .collect();
        Self { values, delta }
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn delta(&self) -> f64 {
        self.delta
    }
}

/// Uniform noise on `[-delta, delta]`, seedable and reproducible.
pub fn master_noise(len: usize, delta: f64, seed: u64) -> Vec<f64> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..len)
        .map(|_| if delta > 0.0 { rng.gen_range(-delta..=delta) } else { 0.0 })
        .collect()
}

/// Approximate solution on the grid. Values cover the node range
/// `start_index ..= n_steps - mu`; the missing leading/trailing nodes are
/// where the scheme does not determine the solution.
#[derive(Debug, Clone)]
pub struct SolveResult {
    method: String,
    a: f64,
    h: f64,
    n_steps: usize,
    mu: usize,
    start_index: usize,
    values: Vec<f64>,
}

impl SolveResult {
    pub fn method(&self) -> &str {
        &self.method
    }

    pub fn h(&self) -> f64 {
        self.h
    }

    pub fn n_steps(&self) -> usize {
        self.n_steps
    }

    pub fn start_index(&self) -> usize {
        self.start_index
    }

    pub fn last_index(&self) -> usize {
        self.n_steps - self.mu
    }

    /// Solution value at grid node `d`, if the scheme determined it.
    pub fn value_at_node(&self, d: usize) -> Option<f64> {
        if d < self.start_index || d > self.last_index() {
            None
        } else {
            Some(self.values[d - self.start_index])
        }
    }

    pub fn node_x(&self, d: usize) -> f64 {
        self.a + d as f64 * self.h
    }

    /// `(x, u(x))` pairs over the determined range.
    pub fn points(&self) -> impl Iterator<Item = (f64, f64)> + '_ {
        self.values
            .iter()
            .enumerate()
            .map(|(i, &v)| (self.node_x(self.start_index + i), v))
    }

    /// Max-norm error against a reference solution.
    pub fn max_error(&self, exact: impl Fn(f64) -> f64) -> f64 {
        self.points()
            .map(|(x, v)| (v - exact(x)).abs())
            .fold(0.0, f64::max)
    }
}

/// Solve the starting-value system: `m` equations pairing the interpolatory
/// rows with the first `m` data points. Returns `u_0 .. u_{m-1}`.
fn starting_values(
    method: &MultistepMethod,
    problem: &Problem,
    samples: &[f64],
    h: f64,
) -> Result<Vec<f64>> {
    let m = method.m();
    let rows = starting_weights(m)?;
    let a = problem.a;
    let matrix: Vec<Vec<f64>> = (1..=m)
        .map(|n| {
            let xn = a + n as f64 * h;
            (0..m)
                .map(|s| h * rows[n - 1][s] * problem.kernel(xn, a + s as f64 * h))
                .collect()
        })
        .collect();
    let rhs: Vec<f64> = (1..=m).map(|n| samples[n]).collect();
    solve_dense(&matrix, &rhs).map_err(|_| Error::SingularStartSystem)
}

fn check_grid(method: &MultistepMethod, samples: &NoisySamples, n_steps: usize) -> Result<()> {
    if !method.is_admitted() {
        return Err(Error::MethodNotAdmitted(method.name().to_string()));
    }
    if samples.values.len() != n_steps + 1 {
        return Err(Error::LengthMismatch {
            expected: n_steps + 1,
            got: samples.values.len(),
        });
    }
    let m = method.m();
    let mu = method.mu();
    if n_steps < m + mu {
        return Err(Error::Invalid(format!(
            "grid too coarse: {n_steps} steps for an {m}-step method"
        )));
    }
    Ok(())
}

// The one scheme with no starting block: a single step and no data lag, so
// marching starts directly from the first sample and node 0 is never solved.
fn skips_start_block(method: &MultistepMethod) -> bool {
    method.m() == 1 && method.mu() == 0
}

/// Solve via explicit quadrature weights:
/// `h sum_s w_{ns} k(x_n, x_s) u_s = f^delta(x_n)`, peeled for the newest
/// unknown `u_{n - mu}`.
pub fn solve_weightform(
    method: &MultistepMethod,
    problem: &Problem,
    samples: &NoisySamples,
    n_steps: usize,
) -> Result<SolveResult> {
    check_grid(method, samples, n_steps)?;
    let m = method.m();
    let mu = method.mu();
    let h = problem.len() / n_steps as f64;
    let a = problem.a;
    let f = samples.values();

    let table = running_weights(method, n_steps)?;
    let gamma0 = table.gamma()[0];

    let start_index = if skips_start_block(method) { 1 } else { 0 };
    let mut u: Vec<f64> = if start_index == 0 {
        starting_values(method, problem, f, h)?
    } else {
        Vec::new()
    };

    for n in m + mu..=n_steps {
        let d = n - mu; // newest node; w_{nd} = gamma_0 there
        let xn = a + n as f64 * h;
        let mut acc = f[n] / h;
        for s in start_index..d {
            let w = table.weight(n, s);
            if w != 0.0 {
                acc -= w * problem.kernel(xn, a + s as f64 * h) * u[s - start_index];
            }
        }
        let diag = problem.kernel(xn, a + d as f64 * h);
        if diag.abs() < 0.5 {
            return Err(Error::DiagonalKernelTooSmall {
                node: n,
                value: diag,
            });
        }
        u.push(acc / (gamma0 * diag));
    }

    Ok(SolveResult {
        method: method.name().to_string(),
        a,
        h,
        n_steps,
        mu,
        start_index,
        values: u,
    })
}

/// Solve via the multistep recursion: for each `n`, rebuild the cumulative
/// integrals `phi_r` from the kernel-weighted samples, impose
/// `phi_n = f^delta(x_n)` in the last recurrence row, and extract the newest
/// `psi`, hence `u_{n - mu}`. Algebraically identical to the weight form;
/// retained as a correctness oracle.
pub fn solve_recursive(
    method: &MultistepMethod,
    problem: &Problem,
    samples: &NoisySamples,
    n_steps: usize,
) -> Result<SolveResult> {
    check_grid(method, samples, n_steps)?;
    let m = method.m();
    let mu = method.mu();
    let h = problem.len() / n_steps as f64;
    let a = problem.a;
    let f = samples.values();
    let am = method.a()[m];
    let bm = method.b()[m - mu];
    let rows = starting_weights(m)?;

    let start_index = if skips_start_block(method) { 1 } else { 0 };
    let mut u: Vec<f64> = if start_index == 0 {
        starting_values(method, problem, f, h)?
    } else {
        Vec::new()
    };

    let mut psi = vec![0.0f64; n_steps + 1];
    let mut phi = vec![0.0f64; n_steps + 1];
    for n in m + mu..=n_steps {
        let d = n - mu;
        let xn = a + n as f64 * h;
        // kernel-weighted samples for this row
        for s in start_index..d {
            psi[s] = problem.kernel(xn, a + s as f64 * h) * u[s - start_index];
        }
        if start_index == 1 {
            psi[0] = 0.0;
        }
        // cumulative integrals by starting rows plus the recurrence
        phi[0] = 0.0;
        for r in 1..m {
            phi[r] = h * (0..m).map(|s| rows[r - 1][s] * psi[s]).sum::<f64>();
        }
        for r in 0..n - m {
            let mut acc = 0.0;
            for j in 0..=m - mu {
                acc += method.b()[j] * psi[r + j];
            }
            acc *= h;
            for j in 0..m {
                acc -= method.a()[j] * phi[r + j];
            }
            phi[r + m] = acc / am;
        }
        // last row with phi_n pinned to the data determines psi_d
        phi[n] = f[n];
        let r = n - m;
        let mut acc = 0.0;
        for j in 0..=m {
            acc += method.a()[j] * phi[r + j];
        }
        for j in 0..m - mu {
            acc -= h * method.b()[j] * psi[r + j];
        }
        let newest_psi = acc / (h * bm);
        let diag = problem.kernel(xn, a + d as f64 * h);
        if diag.abs() < 0.5 {
            return Err(Error::DiagonalKernelTooSmall {
                node: n,
                value: diag,
            });
        }
        u.push(newest_psi / diag);
    }

    Ok(SolveResult {
        method: method.name().to_string(),
        a,
        h,
        n_steps,
        mu,
        start_index,
        values: u,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::msm::{builtin, REGISTRY};
    use approx::assert_abs_diff_eq;

    fn flat_problem() -> Problem {
        // k = 1, f = x: u = 1
        Problem::new(0.0, 1.0, |_, _| 1.0, |x| x, 0.0, 1.0).with_solution(|_| 1.0)
    }

    fn cosine_problem() -> Problem {
        // k = cos(x - y), f = sin x: u = 1
        Problem::new(0.0, 1.0, |x, y| (x - y).cos(), f64::sin, 1.0, 1.0).with_solution(|_| 1.0)
    }

    fn admitted() -> impl Iterator<Item = MultistepMethod> {
        REGISTRY
            .iter()
            .map(|n| builtin(n).unwrap())
            .filter(|m| m.is_admitted())
    }

    #[test]
    fn constant_solution_exact_for_all_methods() {
        let problem = flat_problem();
        for method in admitted() {
            let samples = NoisySamples::exact(&problem, 32);
            let res = solve_weightform(&method, &problem, &samples, 32).unwrap();
            assert!(
                res.max_error(|_| 1.0) <= 1e-10,
                "{}: error {}",
                method.name(),
                res.max_error(|_| 1.0)
            );
        }
    }

    #[test]
    fn bdf1_is_backward_difference() {
        let problem = Problem::new(0.0, 1.0, |_, _| 1.0, |x| x * x, 0.0, 1.0);
        let n = 16;
        let h = 1.0 / n as f64;
        let samples = NoisySamples::exact(&problem, n);
        let method = builtin("bdf1").unwrap();
        let res = solve_weightform(&method, &problem, &samples, n).unwrap();
        assert_eq!(res.start_index(), 1);
        for d in 1..=n {
            let want = (problem.rhs(d as f64 * h) - problem.rhs((d - 1) as f64 * h)) / h;
            assert_abs_diff_eq!(res.value_at_node(d).unwrap(), want, epsilon = 1e-11);
        }
    }

    #[test]
    fn recursive_and_weightform_agree() {
        let problem = cosine_problem();
        for method in admitted() {
            for &n in &[24usize, 57] {
                let samples = NoisySamples::with_uniform_noise(&problem, n, 1e-4, 7);
                let w = solve_weightform(&method, &problem, &samples, n).unwrap();
                let r = solve_recursive(&method, &problem, &samples, n).unwrap();
                assert_eq!(w.start_index(), r.start_index());
                for d in w.start_index()..=w.last_index() {
                    let (a, b) = (w.value_at_node(d).unwrap(), r.value_at_node(d).unwrap());
                    assert!(
                        (a - b).abs() <= 1e-10 * a.abs().max(1.0),
                        "{} n={n} d={d}: {a} vs {b}",
                        method.name()
                    );
                }
            }
        }
    }

    #[test]
    fn solution_operator_is_linear_in_data() {
        let problem = cosine_problem();
        let method = builtin("ab2").unwrap();
        let n = 40;
        let s1 = NoisySamples::with_uniform_noise(&problem, n, 1e-3, 1);
        let s2 = NoisySamples::with_uniform_noise(&problem, n, 1e-3, 2);
        let sum = NoisySamples::new(
            s1.values().iter().zip(s2.values()).map(|(a, b)| a + b).collect(),
            2e-3,
        );
        let r1 = solve_weightform(&method, &problem, &s1, n).unwrap();
        let r2 = solve_weightform(&method, &problem, &s2, n).unwrap();
        let rs = solve_weightform(&method, &problem, &sum, n).unwrap();
        for d in 0..=rs.last_index() {
            let want = r1.value_at_node(d).unwrap() + r2.value_at_node(d).unwrap();
            assert_abs_diff_eq!(rs.value_at_node(d).unwrap(), want, epsilon = 1e-9);
        }
    }

    #[test]
    fn noise_free_rate_matches_order_ab2() {
        let problem = cosine_problem();
        let method = builtin("ab2").unwrap();
        let mut errs = Vec::new();
        for nu in [4u32, 5, 6, 7] {
            let n = 1usize << nu;
            let samples = NoisySamples::exact(&problem, n);
            let res = solve_weightform(&method, &problem, &samples, n).unwrap();
            errs.push(res.max_error(|_| 1.0));
        }
        for pair in errs.windows(2) {
            let ratio = pair[0] / pair[1];
            assert!(
                (2.8..=5.5).contains(&ratio),
                "halving ratio {ratio} errs {errs:?}"
            );
        }
    }

    #[test]
    fn error_scales_with_noise_over_h() {
        // for fixed h, doubling a fixed noise shape doubles the noise part of
        // the error exactly (linearity); check via the difference from the
        // exact-data solution
        let problem = cosine_problem();
        let method = builtin("ab2").unwrap();
        let n = 64;
        let exact = NoisySamples::exact(&problem, n);
        let base = solve_weightform(&method, &problem, &exact, n).unwrap();
        let noise = master_noise(n + 1, 1e-3, 3);
        for scale in [1.0, 2.0, 4.0] {
            let values: Vec<f64> = exact
                .values()
                .iter()
                .zip(&noise)
                .map(|(f, e)| f + scale * e)
                .collect();
            let samples = NoisySamples::new(values, scale * 1e-3);
            let res = solve_weightform(&method, &problem, &samples, n).unwrap();
            let dev: f64 = (0..=res.last_index())
                .map(|d| (res.value_at_node(d).unwrap() - base.value_at_node(d).unwrap()).abs())
                .fold(0.0, f64::max);
            let unit_dev = dev / scale;
            // deviation per unit noise is scale-invariant
            if scale == 1.0 {
                assert!(unit_dev > 0.0);
            }
            let first = {
                let values: Vec<f64> = exact
                    .values()
                    .iter()
                    .zip(&noise)
                    .map(|(f, e)| f + e)
                    .collect();
                let s = NoisySamples::new(values, 1e-3);
                let r = solve_weightform(&method, &problem, &s, n).unwrap();
                (0..=r.last_index())
                    .map(|d| (r.value_at_node(d).unwrap() - base.value_at_node(d).unwrap()).abs())
                    .fold(0.0, f64::max)
            };
            assert_abs_diff_eq!(unit_dev, first, epsilon = 1e-9);
        }
    }

    #[test]
    fn rejects_unadmitted_method_and_bad_lengths() {
        let problem = flat_problem();
        let samples = NoisySamples::exact(&problem, 32);
        let am1 = builtin("am1").unwrap();
        assert!(matches!(
            solve_weightform(&am1, &problem, &samples, 32),
            Err(Error::MethodNotAdmitted(_))
        ));
        let ab2 = builtin("ab2").unwrap();
        assert!(matches!(
            solve_weightform(&ab2, &problem, &samples, 64),
            Err(Error::LengthMismatch { .. })
        ));
    }

    #[test]
    fn detects_small_diagonal_kernel() {
        // k(x, x) = 1 but k drops steeply off-diagonal; with a large step the
        // lagged diagonal entry falls under the 0.5 floor
        let problem = Problem::new(0.0, 1.0, |x, y| 1.0 - 10.0 * (x - y), |x| x, 10.0, 10.0);
        let method = builtin("ab2").unwrap(); // mu = 1
        let n = 8; // h = 0.125, k lag = 1 - 1.25 < 0.5
        let samples = NoisySamples::exact(&problem, n);
        assert!(matches!(
            solve_weightform(&method, &problem, &samples, n),
            Err(Error::DiagonalKernelTooSmall { .. })
        ));
    }

    #[test]
    fn master_noise_is_reproducible_and_bounded() {
        let a = master_noise(100, 1e-2, 42);
        let b = master_noise(100, 1e-2, 42);
        assert_eq!(a, b);
        let c = master_noise(100, 1e-2, 43);
        assert_ne!(a, c);
        assert!(a.iter().all(|v| v.abs() <= 1e-2));
    }

    #[test]
    fn subsampled_master_noise_is_coherent() {
        let problem = cosine_problem();
        let master = master_noise(65, 1e-3, 9);
        let fine = NoisySamples::from_master(&problem, 64, 1e-3, &master, 1);
        let coarse = NoisySamples::from_master(&problem, 32, 1e-3, &master, 2);
        for i in 0..=32 {
            assert_eq!(coarse.values()[i], fine.values()[2 * i]);
        }
    }

    #[test]
    fn diagonal_validation() {
        assert!(cosine_problem().validate_diagonal().is_ok());
        let bad = Problem::new(0.0, 1.0, |x, y| (x - y).cos() + 1e-3, |x| x, 1.0, 1.0);
        assert!(bad.validate_diagonal().is_err());
    }
}

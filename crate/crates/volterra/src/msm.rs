//! Linear multistep methods: the built-in registry, consistency-order
//! verification, root-based stability classification, and the reflected
//! coefficient sequences that turn the recurrence into a discrete convolution.

use crate::error::{Error, Result};
use crate::polyalg::{self, Polynomial, SeriesCoeffs};
use num_complex::Complex64;

/// A linear m-step method `sum_j a_j phi_{r+j} = h sum_j b_j psi_{r+j}`.
///
/// `mu` is the number of trailing zero b-coefficients: `b_{m-mu} != 0` and
/// `b_j = 0` for `j > m - mu`. `p0` is the verified maximal consistency order.
#[derive(Debug, Clone, PartialEq)]
pub struct MultistepMethod {
    name: String,
    m: usize,
    a: Vec<f64>,
    b: Vec<f64>,
    mu: usize,
    p0: u32,
}

impl MultistepMethod {
    /// Build a method from raw coefficients `a_0..a_m`, `b_0..b_m`,
    /// validating the structural invariants and verifying the order.
    pub fn new(name: &str, a: Vec<f64>, b: Vec<f64>) -> Result<Self> {
        if a.len() < 2 || a.len() != b.len() {
            return Err(Error::InvalidMethod(format!(
                "{name}: need m+1 coefficients each, m >= 1"
            )));
        }
        let m = a.len() - 1;
        if *a.last().unwrap() == 0.0 {
            return Err(Error::InvalidMethod(format!("{name}: a_m must be nonzero")));
        }
        if a[0].abs() + b[0].abs() == 0.0 {
            return Err(Error::InvalidMethod(format!(
                "{name}: |a_0| + |b_0| must be nonzero"
            )));
        }
        let last_b = match b.iter().rposition(|&v| v != 0.0) {
            Some(j) => j,
            None => {
                return Err(Error::InvalidMethod(format!(
                    "{name}: b must not be identically zero"
                )))
            }
        };
        let mu = m - last_b;
        let mut method = MultistepMethod {
            name: name.to_string(),
            m,
            a,
            b,
            mu,
            p0: 0,
        };
        method.p0 = verify_order(&method, 12)?;
        Ok(method)
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    pub fn m(&self) -> usize {
        self.m
    }

    pub fn a(&self) -> &[f64] {
        &self.a
    }

    pub fn b(&self) -> &[f64] {
        &self.b
    }

    pub fn mu(&self) -> usize {
        self.mu
    }

    /// Verified maximal consistency order.
    pub fn p0(&self) -> u32 {
        self.p0
    }

    /// First characteristic polynomial `rho(xi) = sum_j a_j xi^j`.
    pub fn rho(&self) -> Polynomial {
        Polynomial::new(self.a.clone())
    }

    /// Second characteristic polynomial `sigma(xi) = sum_{j<=m-mu} b_j xi^j`.
    pub fn sigma(&self) -> Polynomial {
        Polynomial::new(self.b[..=self.m - self.mu].to_vec())
    }

    /// Reflected alpha coefficients `alpha_j = a_{m-j}`.
    pub fn alpha(&self) -> Polynomial {
        let mut c: Vec<f64> = self.a.clone();
        c.reverse();
        Polynomial::new(c)
    }

    /// Reflected beta coefficients `beta_j = b_{m-mu-j}`.
    pub fn beta(&self) -> Polynomial {
        let mut c: Vec<f64> = self.b[..=self.m - self.mu].to_vec();
        c.reverse();
        Polynomial::new(c)
    }

    /// Coefficients of `gamma(xi) = beta(xi)/alpha(xi)` through index `n - 1`.
    /// Only requires `alpha_0 = a_m != 0`, so it is defined for every method.
    pub fn gamma(&self, n: usize) -> SeriesCoeffs {
        polyalg::series_divide(&self.beta(), &self.alpha(), n)
            .expect("a_m != 0 guarantees a nonzero constant term")
    }

    /// Nullstable with Schur sigma and order at most m: the admission
    /// condition for the first-kind Volterra solver.
    pub fn is_admitted(&self) -> bool {
        let report = classify_stability(self);
        report.nullstable && report.sigma_schur && self.p0 as usize <= self.m
    }
}

/// Root-based stability classification of a multistep method.
#[derive(Debug, Clone)]
pub struct StabilityReport {
    pub nullstable: bool,
    pub sigma_schur: bool,
    pub sigma_von_neumann: bool,
    pub rho_roots: Vec<Complex64>,
    pub sigma_roots: Vec<Complex64>,
    /// Largest sigma-root magnitude: the geometric decay rate of the
    /// inverse-gamma coefficients when sigma is Schur.
    pub decay_rate_tau: f64,
}

pub const REGISTRY: [&str; 12] = [
    "ab1",
    "ab2",
    "ab3",
    "am1",
    "nystrom2",
    "milne_simpson2",
    "bdf1",
    "bdf2",
    "bdf3",
    "bdf4",
    "bdf5",
    "bdf6",
];

/// Construct a registry method by name.
pub fn builtin(name: &str) -> Result<MultistepMethod> {
    let (a, b): (Vec<f64>, Vec<f64>) = match name {
        "ab1" => (vec![-1.0, 1.0], vec![1.0, 0.0]),
        "ab2" => (vec![0.0, -1.0, 1.0], vec![-0.5, 1.5, 0.0]),
        "ab3" => (
            vec![0.0, 0.0, -1.0, 1.0],
            vec![5.0 / 12.0, -16.0 / 12.0, 23.0 / 12.0, 0.0],
        ),
        "am1" => (vec![-1.0, 1.0], vec![0.5, 0.5]),
        "nystrom2" => (vec![-1.0, 0.0, 1.0], vec![0.0, 2.0, 0.0]),
        "milne_simpson2" => (
            vec![-1.0, 0.0, 1.0],
            vec![1.0 / 3.0, 4.0 / 3.0, 1.0 / 3.0],
        ),
        "bdf1" => (vec![-1.0, 1.0], vec![0.0, 1.0]),
        "bdf2" => (vec![0.5, -2.0, 1.5], vec![0.0, 0.0, 1.0]),
        "bdf3" => (
            vec![-1.0 / 3.0, 1.5, -3.0, 11.0 / 6.0],
            vec![0.0, 0.0, 0.0, 1.0],
        ),
        "bdf4" => (
            vec![0.25, -4.0 / 3.0, 3.0, -4.0, 25.0 / 12.0],
            vec![0.0, 0.0, 0.0, 0.0, 1.0],
        ),
        "bdf5" => (
            vec![-0.2, 1.25, -10.0 / 3.0, 5.0, -5.0, 137.0 / 60.0],
            vec![0.0, 0.0, 0.0, 0.0, 0.0, 1.0],
        ),
        "bdf6" => (
            vec![
                1.0 / 6.0,
                -1.2,
                3.75,
                -20.0 / 3.0,
                7.5,
                -6.0,
                147.0 / 60.0,
            ],
            vec![0.0, 0.0, 0.0, 0.0, 0.0, 0.0, 1.0],
        ),
        other => return Err(Error::UnknownMethod(other.to_string())),
    };
    MultistepMethod::new(name, a, b)
}

/// Largest order `p <= p_max` whose algebraic order conditions
/// `sum_j a_j j^q = q sum_j b_j j^{q-1}` hold for all `q = 0..p`.
///
/// The residual tolerance is `1e-10` relative to the magnitude of the
/// condition's terms, so exactly-satisfied conditions pass despite the
/// rounding of coefficients like 1/3.
pub fn verify_order(method: &MultistepMethod, p_max: u32) -> Result<u32> {
    assert!(p_max <= 12);
    let m = method.m;
    let mut p0 = None;
    for q in 0..=p_max {
        let mut lhs = 0.0;
        let mut rhs = 0.0;
        let mut scale = 0.0;
        for j in 0..=m {
            let jq = pow0(j as f64, q);
            lhs += method.a[j] * jq;
            scale += (method.a[j] * jq).abs();
            if q >= 1 {
                let jq1 = pow0(j as f64, q - 1);
                rhs += q as f64 * method.b[j] * jq1;
                scale += (q as f64 * method.b[j] * jq1).abs();
            }
        }
        if (lhs - rhs).abs() > 1e-10 * scale.max(1.0) {
            break;
        }
        if q >= 1 {
            p0 = Some(q);
        }
    }
    p0.ok_or_else(|| Error::Inconsistent(method.name.clone()))
}

// convention 0^0 = 1
fn pow0(base: f64, exp: u32) -> f64 {
    if exp == 0 {
        1.0
    } else {
        base.powi(exp as i32)
    }
}

const CIRCLE_BAND: f64 = 1e-8;

/// Classify null stability of rho and the Schur / von Neumann property of
/// sigma. Roots within `1e-8` of the unit circle count as lying on it.
pub fn classify_stability(method: &MultistepMethod) -> StabilityReport {
    let rho = method.rho();
    let sigma = method.sigma();

    let rho_roots = polyalg::roots(&rho).unwrap_or_default();
    let rho_prime = rho.derivative();
    let mut nullstable = true;
    for &z in &rho_roots {
        let r = z.norm();
        if r > 1.0 + CIRCLE_BAND {
            nullstable = false;
        } else if r > 1.0 - CIRCLE_BAND && rho_prime.eval_complex(z).norm() <= CIRCLE_BAND {
            nullstable = false;
        }
    }

    let (sigma_roots, sigma_schur, sigma_von_neumann) = if sigma.degree() == 0 {
        (Vec::new(), true, true)
    } else {
        let roots = polyalg::roots(&sigma).unwrap_or_default();
        let sigma_prime = sigma.derivative();
        let mut schur = true;
        let mut von_neumann = true;
        for &z in &roots {
            let r = z.norm();
            if r > 1.0 - CIRCLE_BAND {
                schur = false;
            }
            if r > 1.0 + CIRCLE_BAND {
                von_neumann = false;
            } else if r > 1.0 - CIRCLE_BAND && sigma_prime.eval_complex(z).norm() <= CIRCLE_BAND {
                von_neumann = false;
            }
        }
        (roots, schur, von_neumann)
    };

    let decay_rate_tau = sigma_roots.iter().map(|z| z.norm()).fold(0.0, f64::max);

    StabilityReport {
        nullstable,
        sigma_schur,
        sigma_von_neumann,
        rho_roots,
        sigma_roots,
        decay_rate_tau,
    }
}

/// The six reflected-coefficient sequences of a method, each of length `n`.
#[derive(Debug, Clone)]
pub struct Reflected {
    pub alpha: SeriesCoeffs,
    pub beta: SeriesCoeffs,
    pub alpha_inv: SeriesCoeffs,
    pub gamma: SeriesCoeffs,
    pub beta_inv: SeriesCoeffs,
    pub gamma_inv: SeriesCoeffs,
}

/// Compute all reflected sequences. The beta- and gamma-inverse series are
/// only meaningful (bounded) when sigma is Schur, so this fails with
/// `NotSchur` otherwise.
pub fn reflected(method: &MultistepMethod, n: usize) -> Result<Reflected> {
    assert!(n >= 1);
    if !classify_stability(method).sigma_schur {
        return Err(Error::NotSchur(method.name.clone()));
    }
    let alpha = method.alpha();
    let beta = method.beta();
    let pad = |p: &Polynomial| {
        let mut v = p.coeffs().to_vec();
        v.resize(n, 0.0);
        SeriesCoeffs::new(v)
    };
    Ok(Reflected {
        alpha: pad(&alpha),
        beta: pad(&beta),
        alpha_inv: polyalg::series_inverse(&alpha, n)?,
        gamma: polyalg::series_divide(&beta, &alpha, n)?,
        beta_inv: polyalg::series_inverse(&beta, n)?,
        gamma_inv: polyalg::series_divide(&alpha, &beta, n)?,
    })
}

/// Absolute and index-weighted tail sums of an exponentially decaying
/// coefficient sequence, with the fitted geometric decay rate.
#[derive(Debug, Clone, Copy)]
pub struct TailBounds {
    pub sum_abs: f64,
    pub sum_weighted: f64,
    pub tau: f64,
}

/// Sum `|c_s|` and `s |c_s|` over the full (infinite) sequence, closing the
/// truncated tail with a geometric bound fitted from the trailing entries.
pub fn tail_bounds(gamma_inv: &SeriesCoeffs) -> Result<TailBounds> {
    let v = gamma_inv.values();
    let len = v.len();
    assert!(len >= 2);

    // fit the decay rate over the trailing window of non-negligible entries;
    // a local max envelope smooths over the near-zero crossings of series
    // with complex-conjugate pole pairs
    let window_start = (len / 2).max(len.saturating_sub(40));
    const ENV_WIDTH: usize = 8;
    let env = |i: usize| -> f64 {
        (i..(i + ENV_WIDTH).min(len)).fold(0.0f64, |m, j| m.max(v[j].abs()))
    };
    // compare envelopes at lag ENV_WIDTH so windows never share a maximum
    let mut tau = 0.0f64;
    for i in window_start..len.saturating_sub(2 * ENV_WIDTH) {
        let (lo, hi) = (env(i), env(i + ENV_WIDTH));
        if lo > 1e-280 && hi > 1e-280 {
            tau = tau.max((hi / lo).powf(1.0 / ENV_WIDTH as f64));
        }
    }
    if tau >= 1.0 - 1e-6 {
        return Err(Error::TailNotConverged { tau });
    }

    let sum_abs_partial: f64 = v.iter().map(|c| c.abs()).sum();
    let sum_weighted_partial: f64 = v.iter().enumerate().map(|(s, c)| s as f64 * c.abs()).sum();
    let last = v[len - 1].abs();
    let geo = tau / (1.0 - tau);
    let tail_abs = last * geo;
    let tail_weighted = last * ((len - 1) as f64 * geo + tau / ((1.0 - tau) * (1.0 - tau)));

    Ok(TailBounds {
        sum_abs: sum_abs_partial + tail_abs,
        sum_weighted: sum_weighted_partial + tail_weighted,
        tau,
    })
}

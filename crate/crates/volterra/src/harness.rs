//! Benchmark problems and experiment drivers: a-priori step sweeps over
//! dyadic grids and balancing-principle sweeps over a range of noise levels,
//! with CSV output.

use crate::error::{Error, Result};
use crate::msm::MultistepMethod;
use crate::solver::{solve_weightform, NoisySamples, Problem};
use crate::stepsize::{balance, BalanceOptions};

/// Built-in test problems on `[0, 1]`, all with known solutions and
/// normalized kernels.
///
/// 1. `k = cos(x - y)`, `f = sin x`, solution `u = 1`
/// 2. `k = cos(x - y)`, `f = 1 - cos x`, solution `u = y`
/// 3. `k = 1 + x - y`, `f = x - 1 + exp(-x)`, solution `u = y exp(-y)`
/// 4. `k = 1`, hat-function solution with a kink at `x = 1/2`
pub fn benchmark_problem(id: u32) -> Result<Problem> {
    let p = match id {
        1 => Problem::new(0.0, 1.0, |x, y| (x - y).cos(), f64::sin, 1.0, 1.0)
            .with_solution(|_| 1.0),
        2 => Problem::new(0.0, 1.0, |x, y| (x - y).cos(), |x| 1.0 - x.cos(), 1.0, 1.0)
            .with_solution(|y| y),
        3 => Problem::new(
            0.0,
            1.0,
            |x, y| 1.0 + x - y,
            |x| x - 1.0 + (-x).exp(),
            1.0,
            2.0,
        )
        .with_solution(|y| y * (-y).exp()),
        4 => Problem::new(
            0.0,
            1.0,
            |_, _| 1.0,
            |x| {
                if x <= 0.5 {
                    x * x
                } else {
                    2.0 * x - x * x - 0.5
                }
            },
            0.0,
            1.0,
        )
        .with_solution(|y| if y <= 0.5 { 2.0 * y } else { 2.0 * (1.0 - y) }),
        other => return Err(Error::UnknownProblem(other)),
    };
    Ok(p)
}

pub const BENCHMARK_IDS: [u32; 4] = [1, 2, 3, 4];

/// sup |f| on the interval, by dense sampling.
pub fn rhs_sup_norm(problem: &Problem) -> f64 {
    let (a, b) = problem.interval();
    (0..=10_000)
        .map(|i| problem.rhs(a + (b - a) * i as f64 / 10_000.0).abs())
        .fold(0.0, f64::max)
}

fn median(mut v: Vec<f64>) -> f64 {
    assert!(!v.is_empty());
    v.sort_by(f64::total_cmp);
    v[v.len() / 2]
}

/// One row of an a-priori sweep: grid `N = 2^nu`, noise calibrated to the
/// step by `delta = h^{p0 + 1}`.
#[derive(Debug, Clone, PartialEq)]
pub struct SweepRow {
    pub nu: u32,
    pub n_steps: usize,
    pub delta: f64,
    /// noise relative to the data, `100 delta / sup|f|`
    pub rel_delta_pct: f64,
    /// seed-median of the max-norm error
    pub err: f64,
    /// `err / delta^{p0 / (p0 + 1)}`; bounded iff the rate is attained
    pub ratio: f64,
}

/// Solve over dyadic grids `N = 2^nu` with step-calibrated noise and report
/// the error against the known solution, median over `n_seeds` noise draws.
pub fn run_apriori_sweep(
    method: &MultistepMethod,
    problem: &Problem,
    nu_range: std::ops::RangeInclusive<u32>,
    n_seeds: usize,
    base_seed: u64,
) -> Result<Vec<SweepRow>> {
    assert!(n_seeds >= 1);
    let p0 = method.p0() as f64;
    let f_sup = rhs_sup_norm(problem);
    let exact = |y: f64| problem.solution(y).expect("benchmark problem has a solution");
    let mut rows = Vec::new();
    for nu in nu_range {
        let n = 1usize << nu;
        let h = problem.len() / n as f64;
        let delta = h.powf(p0 + 1.0);
        let errs: Vec<f64> = (0..n_seeds)
            .map(|i| {
                let samples =
                    NoisySamples::with_uniform_noise(problem, n, delta, base_seed + i as u64);
                solve_weightform(method, problem, &samples, n).map(|r| r.max_error(exact))
            })
            .collect::<Result<_>>()?;
        let err = median(errs);
        rows.push(SweepRow {
            nu,
            n_steps: n,
            delta,
            rel_delta_pct: 100.0 * delta / f_sup,
            err,
            ratio: err / delta.powf(p0 / (p0 + 1.0)),
        });
    }
    Ok(rows)
}

/// One row of a balancing sweep at noise level `delta`.
#[derive(Debug, Clone, PartialEq)]
pub struct BalanceRow {
    pub delta: f64,
    /// seed-median of the selected step count
    pub n_chosen: usize,
    pub h_over_sqrt_delta: f64,
    pub err_over_sqrt_delta: f64,
}

/// Noise levels `1e-5 * 4^{-k}`, k = 0..5, used by the stock balancing
/// experiment.
pub fn default_balance_noise_levels() -> Vec<f64> {
    (0..5).map(|k| 1e-5 * 4f64.powi(-k)).collect()
}

/// Run the balancing principle across noise levels; per level the selected
/// step and error are seed-medians. Scaling by `sqrt(delta)` exposes the
/// order-optimal rate for solutions with a kink.
pub fn run_balance_sweep(
    method: &MultistepMethod,
    problem: &Problem,
    deltas: &[f64],
    beta: Option<f64>,
    kappa: u32,
    n_seeds: usize,
    base_seed: u64,
) -> Result<Vec<BalanceRow>> {
    assert!(n_seeds >= 1);
    let exact = |y: f64| problem.solution(y).expect("benchmark problem has a solution");
    let len = problem.len();
    let mut rows = Vec::new();
    for &delta in deltas {
        let mut hs = Vec::new();
        let mut errs = Vec::new();
        for i in 0..n_seeds {
            let opts = BalanceOptions {
                beta,
                kappa,
                h_max: None,
                seed: base_seed + i as u64,
            };
            let out = balance(method, problem, delta, &opts)?;
            hs.push(out.chosen_h());
            errs.push(out.solution.max_error(exact));
        }
        let h_med = median(hs);
        rows.push(BalanceRow {
            delta,
            n_chosen: (len / h_med).round() as usize,
            h_over_sqrt_delta: h_med / delta.sqrt(),
            err_over_sqrt_delta: median(errs) / delta.sqrt(),
        });
    }
    Ok(rows)
}

fn sig3(v: f64) -> String {
    format!("{v:.2e}")
}

fn write_csv<I, R>(header: &[&str], rows: I) -> String
where
    I: IntoIterator<Item = R>,
    R: IntoIterator<Item = String>,
{
    let mut w = csv::WriterBuilder::new()
        .terminator(csv::Terminator::CRLF)
        .from_writer(Vec::new());
    w.write_record(header).unwrap();
    for row in rows {
        w.write_record(row).unwrap();
    }
    String::from_utf8(w.into_inner().unwrap()).unwrap()
}

/// CSV rendering of an a-priori sweep, three significant digits.
pub fn sweep_csv(rows: &[SweepRow]) -> String {
    write_csv(
        &["nu", "n_steps", "delta", "rel_delta_pct", "err", "ratio"],
        rows.iter().map(|r| {
            vec![
                r.nu.to_string(),
                r.n_steps.to_string(),
                sig3(r.delta),
                sig3(r.rel_delta_pct),
                sig3(r.err),
                sig3(r.ratio),
            ]
        }),
    )
}

/// CSV rendering of a balancing sweep, three significant digits.
pub fn balance_csv(rows: &[BalanceRow]) -> String {
    write_csv(
        &["delta", "n_chosen", "h_over_sqrt_delta", "err_over_sqrt_delta"],
        rows.iter().map(|r| {
            vec![
                sig3(r.delta),
                r.n_chosen.to_string(),
                sig3(r.h_over_sqrt_delta),
                sig3(r.err_over_sqrt_delta),
            ]
        }),
    )
}

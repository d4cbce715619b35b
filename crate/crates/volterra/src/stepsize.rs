//! Step-size selection: the a-priori rule `h ~ delta^{1/(p+1)}`, the
//! computable constants behind the balancing principle, and the adaptive
//! (Lepskii-type) selection over a dyadic step ladder.

use crate::error::{Error, Result};
use crate::msm::{reflected, tail_bounds, MultistepMethod};
use crate::polyalg::{inf_norm, invert_dense};
use crate::quadrature::{running_weights, starting_weights};
use crate::solver::{master_noise, solve_weightform, NoisySamples, Problem, SolveResult};

/// Grid length used when sampling the asymptotic weight quantities
/// (`sup |gamma|`, start-column row sums); both settle geometrically, so a
/// modest horizon is exact to machine precision.
const N_REF: usize = 256;

/// Everything that enters the error constant `C2` of the noise-propagation
/// bound, kept as separate factors so the final product can be re-derived
/// from a report.
#[derive(Debug, Clone)]
pub struct BalancingConstants {
    /// `||T^{-1}||_inf` for the starting-weight matrix `T`.
    pub start_inv_norm: f64,
    /// `cond_inf(T)`.
    pub start_cond: f64,
    /// `sup_r |gamma_r|`.
    pub gamma_sup: f64,
    /// `sum_s |gamma^{-1}_s|`.
    pub gamma_inv_abs_sum: f64,
    /// `sum_s s |gamma^{-1}_s|`.
    pub gamma_inv_weighted_sum: f64,
    /// `max_n sum_{s<m} |w_{ns}|` over realized rows.
    pub start_weight_sum_max: f64,
    /// start-block constant `(1 + L) ||T^{-1}||_inf`.
    pub c2a: f64,
    /// marching constant from the discrete Gronwall argument.
    pub c2b: f64,
    /// `sup |gamma| * sum s |gamma^{-1}_s|`.
    pub c3: f64,
    /// combined noise-amplification constant.
    pub c2: f64,
    /// admissible step ceiling.
    pub h_bar: f64,
}

impl BalancingConstants {
    /// Default acceptance factor for the balancing comparisons, slightly
    /// above the provable threshold `2 C2`.
    pub fn default_beta(&self) -> f64 {
        2.05 * self.c2
    }
}

/// Compute the balancing constants for a method/problem pair. `h_max` caps
/// the admissible step; it defaults to the coarsest solvable grid.
pub fn balancing_constants(
    method: &MultistepMethod,
    problem: &Problem,
    h_max: Option<f64>,
) -> Result<BalancingConstants> {
    if !method.is_admitted() {
        return Err(Error::MethodNotAdmitted(method.name().to_string()));
    }
    let m = method.m();
    let mu = method.mu() as f64;
    let len = problem.len();
    let l = problem.kernel_lipschitz();
    let k_sup = problem.kernel_sup();
    let h_max = h_max.unwrap_or(len / (m + method.mu()) as f64);

    let t: Vec<Vec<f64>> = starting_weights(m)?;
    let t_inv = invert_dense(&t).map_err(|_| Error::SingularSystem)?;
    let start_inv_norm = inf_norm(&t_inv);
    let start_cond = inf_norm(&t) * start_inv_norm;

    let r = reflected(method, N_REF)?;
    let tails = tail_bounds(&r.gamma_inv)?;
    let gamma_sup = r
        .gamma
        .values()
        .iter()
        .fold(0.0f64, |acc, v| acc.max(v.abs()));

    let table = running_weights(method, N_REF)?;
    let start_weight_sum_max = table.start_column_abs_row_sum_max();

    let c2a = (1.0 + l) * start_inv_norm;
    let c3 = gamma_sup * tails.sum_weighted;
    let c2b = (1.0 + mu * l) * tails.sum_abs * ((1.0 + mu * l) * c3 * l * len).exp();
    let c2 = c2a.max(c2b * (1.0 + c2a * k_sup * start_weight_sum_max));

    let h_bar = if l == 0.0 {
        h_max
    } else {
        (1.0 / (m as f64 * (1.0 + l) * start_cond)).min(h_max)
    };

    Ok(BalancingConstants {
        start_inv_norm,
        start_cond,
        gamma_sup,
        gamma_inv_abs_sum: tails.sum_abs,
        gamma_inv_weighted_sum: tails.sum_weighted,
        start_weight_sum_max,
        c2a,
        c2b,
        c3,
        c2,
        h_bar,
    })
}

/// A-priori step count: the smallest power of two with
/// `h = len / N <= delta^{1/(p+1)}`, at least `n_min`.
pub fn apriori_steps(len: f64, delta: f64, p: usize, n_min: usize) -> Result<usize> {
    if !(delta > 0.0) {
        return Err(Error::Invalid("noise level must be positive".into()));
    }
    // small relative slack so that exactly representable targets are not
    // overshot by powf roundoff
    let target = len / delta.powf(1.0 / (p as f64 + 1.0)) * (1.0 - 1e-12);
    let mut n = n_min.next_power_of_two().max(1);
    while (n as f64) < target {
        n *= 2;
    }
    Ok(n)
}

/// Dyadic ladder of candidate grids. `steps[0]` is the finest rung; step
/// counts shrink by `2^kappa` per rung down to the coarsest admissible grid.
#[derive(Debug, Clone)]
pub struct Ladder {
    len: f64,
    kappa: u32,
    steps: Vec<usize>,
}

impl Ladder {
    pub fn n_rungs(&self) -> usize {
        self.steps.len()
    }

    pub fn kappa(&self) -> u32 {
        self.kappa
    }

    pub fn n_steps(&self, s: usize) -> usize {
        self.steps[s]
    }

    pub fn h(&self, s: usize) -> f64 {
        self.len / self.steps[s] as f64
    }

    pub fn steps(&self) -> &[usize] {
        &self.steps
    }
}

/// Build the ladder for noise level `delta`: the coarsest rung has
/// `floor(len / delta^{1/(p0+1)})` steps, the finest is the first rung with
/// `h <= sqrt(delta)`.
pub fn build_ladder(
    method: &MultistepMethod,
    len: f64,
    delta: f64,
    h_bar: f64,
    kappa: u32,
) -> Result<Ladder> {
    if !(delta > 0.0) {
        return Err(Error::Invalid("noise level must be positive".into()));
    }
    assert!(kappa >= 1);
    if delta.sqrt() >= h_bar {
        return Err(Error::EmptyLadder);
    }
    let p0 = method.p0();
    let grid_min = method.m() + method.mu();
    let mut n_low = (len / delta.powf(1.0 / (p0 as f64 + 1.0))).floor() as usize;
    n_low = n_low.max(grid_min).max((len / h_bar).ceil() as usize);

    // smallest rung count that pushes the finest step under sqrt(delta)
    let mut s_bar = 0u32;
    while len / (n_low as f64 * 2f64.powi((kappa * s_bar) as i32)) > delta.sqrt() {
        s_bar += 1;
    }

    let steps = (0..=s_bar)
        .map(|s| n_low << (kappa * (s_bar - s)) as usize)
        .collect();
    Ok(Ladder {
        len,
        kappa,
        steps,
    })
}

/// One pairwise comparison of the balancing run: rung `coarse` against the
/// finer rung `fine` on the coarse grid.
#[derive(Debug, Clone)]
pub struct Comparison {
    pub coarse: usize,
    pub fine: usize,
    pub max_diff: f64,
    pub threshold: f64,
    pub pass: bool,
}

/// Result of the balancing selection.
#[derive(Debug)]
pub struct BalanceOutcome {
    pub ladder: Ladder,
    pub chosen: usize,
    pub solution: SolveResult,
    pub comparisons: Vec<Comparison>,
    /// how many rungs were actually solved
    pub n_solves: usize,
}

impl BalanceOutcome {
    pub fn chosen_n_steps(&self) -> usize {
        self.ladder.n_steps(self.chosen)
    }

    pub fn chosen_h(&self) -> f64 {
        self.ladder.h(self.chosen)
    }
}

pub struct BalanceOptions {
    /// acceptance factor; `None` uses `2.05 * C2`
    pub beta: Option<f64>,
    pub kappa: u32,
    pub h_max: Option<f64>,
    pub seed: u64,
}

impl Default for BalanceOptions {
    fn default() -> Self {
        Self {
            beta: None,
            kappa: 1,
            h_max: None,
            seed: 0,
        }
    }
}

/// Max difference of two rung solutions over the common (coarse) grid.
fn rung_distance(coarse: &SolveResult, fine: &SolveResult, stride_ratio: usize) -> f64 {
    let mut d = 0.0f64;
    for node in coarse.start_index()..=coarse.last_index() {
        let fine_node = node * stride_ratio;
        if let (Some(a), Some(b)) = (coarse.value_at_node(node), fine.value_at_node(fine_node)) {
            d = d.max((a - b).abs());
        }
    }
    d
}

fn run_balance(
    method: &MultistepMethod,
    problem: &Problem,
    delta: f64,
    opts: &BalanceOptions,
    early_stop: bool,
) -> Result<BalanceOutcome> {
    let constants = balancing_constants(method, problem, opts.h_max)?;
    let beta = opts.beta.unwrap_or_else(|| constants.default_beta());
    let ladder = build_ladder(method, problem.len(), delta, constants.h_bar, opts.kappa)?;

    let n_fine = ladder.n_steps(0);
    let master = master_noise(n_fine + 1, delta, opts.seed);

    let solve_rung = |s: usize| -> Result<SolveResult> {
        let n = ladder.n_steps(s);
        let stride = n_fine / n;
        let samples = NoisySamples::from_master(problem, n, delta, &master, stride);
        solve_weightform(method, problem, &samples, n)
    };

    let mut solutions = vec![solve_rung(0)?];
    let mut comparisons = Vec::new();
    // accept coarser rungs while they stay within beta * delta / h_t of
    // every finer rung t; the first failure fixes the choice one rung back
    let mut chosen = 0usize;
    for s in 1..ladder.n_rungs() {
        solutions.push(solve_rung(s)?);
        let mut all_pass = true;
        for t in 0..s {
            let stride_ratio = ladder.n_steps(t) / ladder.n_steps(s);
            let max_diff = rung_distance(&solutions[s], &solutions[t], stride_ratio);
            let threshold = beta * delta / ladder.h(t);
            let pass = max_diff <= threshold;
            comparisons.push(Comparison {
                coarse: s,
                fine: t,
                max_diff,
                threshold,
                pass,
            });
            all_pass &= pass;
        }
        if all_pass {
            if chosen == s - 1 {
                chosen = s;
            }
        } else if early_stop {
            break;
        }
    }

    let n_solves = solutions.len();
    let solution = solutions.swap_remove(chosen);
    Ok(BalanceOutcome {
        ladder,
        chosen,
        solution,
        comparisons,
        n_solves,
    })
}

/// Balancing-principle step selection with sequential early stopping: rungs
/// are solved from fine to coarse and the scan stops at the first
/// inconsistent rung.
pub fn balance(
    method: &MultistepMethod,
    problem: &Problem,
    delta: f64,
    opts: &BalanceOptions,
) -> Result<BalanceOutcome> {
    run_balance(method, problem, delta, opts, true)
}

/// Same selection, but every rung is solved and every pairwise comparison
/// recorded. The chosen rung is the last one for which all comparisons up to
/// and including it pass; used to validate the early-stopping shortcut.
pub fn balance_exhaustive(
    method: &MultistepMethod,
    problem: &Problem,
    delta: f64,
    opts: &BalanceOptions,
) -> Result<BalanceOutcome> {
    run_balance(method, problem, delta, opts, false)
}

//! Acceptance suite: one test per release criterion, each printing a
//! `criterion N: PASS/FAIL` line.

use std::time::Instant;

use volterra::harness::{benchmark_problem, run_apriori_sweep, run_balance_sweep};
use volterra::msm::{builtin, classify_stability, REGISTRY};
use volterra::quadrature::{integrate_forward, starting_weights};
use volterra::solver::{solve_recursive, solve_weightform, NoisySamples, Problem};
use volterra::stepsize::{balance, balance_exhaustive, balancing_constants, BalanceOptions};

fn report(n: u32, f: impl FnOnce() + std::panic::UnwindSafe) {
    let r = std::panic::catch_unwind(f);
    match r {
        Ok(()) => println!("criterion {n}: PASS"),
        Err(e) => {
            println!("criterion {n}: FAIL");
            std::panic::resume_unwind(e);
        }
    }
}

fn admitted_methods() -> Vec<volterra::msm::MultistepMethod> {
    REGISTRY
        .iter()
        .map(|n| builtin(n).unwrap())
        .filter(|m| m.is_admitted())
        .collect()
}

/// Midpoint-rule sweep on the constant-solution problem: the error stays
/// within a constant factor of the optimal rate delta^{2/3} on every grid.
#[test]
fn criterion_01_midpoint_sweep_rate() {
    report(1, || {
        let t0 = Instant::now();
        let method = builtin("nystrom2").unwrap();
        let problem = benchmark_problem(1).unwrap();
        let rows = run_apriori_sweep(&method, &problem, 5..=12, 5, 100).unwrap();
        assert_eq!(rows.len(), 8);
        for r in &rows {
            assert!(
                (0.4..=4.0).contains(&r.ratio),
                "nu={} ratio={}",
                r.nu,
                r.ratio
            );
        }
        assert!(t0.elapsed().as_secs() < 60, "took {:?}", t0.elapsed());
    });
}

/// Fourth-order BDF sweep on the linear-solution problem at rate
/// delta^{4/5}.
#[test]
fn criterion_02_bdf4_sweep_rate() {
    report(2, || {
        let method = builtin("bdf4").unwrap();
        let problem = benchmark_problem(2).unwrap();
        let rows = run_apriori_sweep(&method, &problem, 5..=9, 5, 100).unwrap();
        for r in &rows {
            assert!(
                (3.0..=20.0).contains(&r.ratio),
                "nu={} ratio={}",
                r.nu,
                r.ratio
            );
        }
    });
}

/// Two-step Adams-Bashforth sweep on the non-convolution kernel at rate
/// delta^{2/3}.
#[test]
fn criterion_03_ab2_sweep_rate() {
    report(3, || {
        let method = builtin("ab2").unwrap();
        let problem = benchmark_problem(3).unwrap();
        let rows = run_apriori_sweep(&method, &problem, 5..=9, 5, 100).unwrap();
        for r in &rows {
            assert!(
                (0.8..=6.0).contains(&r.ratio),
                "nu={} ratio={}",
                r.nu,
                r.ratio
            );
        }
    });
}

/// Balancing principle on the kinked solution: selected step and achieved
/// error both scale like sqrt(delta) across five noise levels.
#[test]
fn criterion_04_balancing_sqrt_delta() {
    report(4, || {
        let t0 = Instant::now();
        let method = builtin("ab2").unwrap();
        let problem = benchmark_problem(4).unwrap();
        let deltas: Vec<f64> = (0..5).map(|k| 1e-5 * 4f64.powi(-k)).collect();
        let rows =
            run_balance_sweep(&method, &problem, &deltas, Some(13.0), 1, 5, 100).unwrap();
        for r in &rows {
            assert!(
                (1.5..=10.0).contains(&r.h_over_sqrt_delta),
                "delta={} h/sqrt={}",
                r.delta,
                r.h_over_sqrt_delta
            );
            assert!(
                (2.0..=12.0).contains(&r.err_over_sqrt_delta),
                "delta={} err/sqrt={}",
                r.delta,
                r.err_over_sqrt_delta
            );
        }
        assert!(t0.elapsed().as_secs() < 120, "took {:?}", t0.elapsed());
    });
}

/// Closed-form balancing constants for the two-step Adams-Bashforth method
/// with a flat kernel.
#[test]
fn criterion_05_closed_form_constants() {
    report(5, || {
        let method = builtin("ab2").unwrap();
        let problem = benchmark_problem(4).unwrap(); // k = 1, L = 0
        let c = balancing_constants(&method, &problem, None).unwrap();
        assert!((c.start_inv_norm - 2.5).abs() <= 1e-12, "{}", c.start_inv_norm);
        assert!(
            (c.gamma_inv_abs_sum - 4.0 / 3.0).abs() <= 1e-12,
            "{}",
            c.gamma_inv_abs_sum
        );
        assert!((c.c2 - 19.0 / 3.0).abs() <= 1e-10, "{}", c.c2);
    });
}

/// The recursion route and the explicit weight-form route produce the same
/// solution for every admitted method, grid, and noise setting.
#[test]
fn criterion_06_solver_path_equivalence() {
    report(6, || {
        for method in admitted_methods() {
            for pid in [1, 2, 3] {
                let problem = benchmark_problem(pid).unwrap();
                for n in [32usize, 64, 128] {
                    for delta in [0.0, 1e-6] {
                        let samples = if delta > 0.0 {
                            NoisySamples::with_uniform_noise(&problem, n, delta, 17)
                        } else {
                            NoisySamples::exact(&problem, n)
                        };
                        let w = solve_weightform(&method, &problem, &samples, n).unwrap();
                        let r = solve_recursive(&method, &problem, &samples, n).unwrap();
                        for d in w.start_index()..=w.last_index() {
                            let (a, b) =
                                (w.value_at_node(d).unwrap(), r.value_at_node(d).unwrap());
                            assert!(
                                (a - b).abs() <= 1e-10 * a.abs().max(1.0),
                                "{} p{pid} n={n} delta={delta} d={d}: {a} vs {b}",
                                method.name()
                            );
                        }
                    }
                }
            }
        }
    });
}

/// With exact data, each admitted method converges at its classical order.
#[test]
fn criterion_07_noise_free_orders() {
    report(7, || {
        let problem = benchmark_problem(3).unwrap(); // smooth non-polynomial solution
        let exact = |y: f64| problem.solution(y).unwrap();
        for method in admitted_methods() {
            let p0 = method.p0();
            // stay above the roundoff floor for high orders
            let nus: Vec<u32> = if p0 >= 5 {
                (3..=6).collect()
            } else if p0 == 4 {
                (4..=7).collect()
            } else {
                (4..=8).collect()
            };
            let errs: Vec<f64> = nus
                .iter()
                .map(|&nu| {
                    let n = 1usize << nu;
                    let samples = NoisySamples::exact(&problem, n);
                    solve_weightform(&method, &problem, &samples, n)
                        .unwrap()
                        .max_error(exact)
                })
                .collect();
            // least-squares slope of -log2(err) against nu
            let k = errs.len() as f64;
            let xm = nus.iter().map(|&x| x as f64).sum::<f64>() / k;
            let ys: Vec<f64> = errs.iter().map(|e| -e.log2()).collect();
            let ym = ys.iter().sum::<f64>() / k;
            let num: f64 = nus
                .iter()
                .zip(&ys)
                .map(|(&x, y)| (x as f64 - xm) * (y - ym))
                .sum();
            let den: f64 = nus.iter().map(|&x| (x as f64 - xm).powi(2)).sum();
            let slope = num / den;
            assert!(
                (slope - p0 as f64).abs() <= 0.25,
                "{}: slope {slope} vs order {p0} (errs {errs:?})",
                method.name()
            );
        }
    });
}

/// Stability classification of the full registry.
#[test]
fn criterion_08_stability_catalogue() {
    report(8, || {
        // (name, nullstable, sigma_schur, admitted)
        let expected = [
            ("ab1", true, true, true),
            ("ab2", true, true, true),
            ("ab3", true, true, true),
            ("am1", true, false, false),
            ("nystrom2", true, true, true),
            ("milne_simpson2", true, false, false),
            ("bdf1", true, true, true),
            ("bdf2", true, true, true),
            ("bdf3", true, true, true),
            ("bdf4", true, true, true),
            ("bdf5", true, true, true),
            ("bdf6", true, true, true),
        ];
        assert_eq!(REGISTRY.len(), expected.len());
        for (name, nullstable, schur, admitted) in expected {
            let m = builtin(name).unwrap();
            let st = classify_stability(&m);
            assert_eq!(st.nullstable, nullstable, "{name} nullstable");
            assert_eq!(st.sigma_schur, schur, "{name} sigma_schur");
            assert_eq!(m.is_admitted(), admitted, "{name} admitted");
        }
    });
}

/// Quadrature identities: moment exactness of the starting weights, and
/// agreement of the recursion and weight-form integrators on random data.
#[test]
fn criterion_09_quadrature_identities() {
    report(9, || {
        for m in 1..=6 {
            let rows = starting_weights(m).unwrap();
            for (ri, row) in rows.iter().enumerate() {
                let r = (ri + 1) as f64;
                for q in 0..m {
                    let lhs: f64 = row
                        .iter()
                        .enumerate()
                        .map(|(s, w)| w * if q == 0 { 1.0 } else { (s as f64).powi(q as i32) })
                        .sum();
                    let rhs = r.powi(q as i32 + 1) / (q as f64 + 1.0);
                    assert!((lhs - rhs).abs() <= 1e-12 * rhs.abs().max(1.0));
                }
            }
        }
        use rand::{Rng, SeedableRng};
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(5);
        for method in admitted_methods() {
            for _ in 0..100 {
                let len = rng.gen_range(method.m() + 2..=150);
                let psi: Vec<f64> = (0..len).map(|_| rng.gen_range(-1.0..1.0)).collect();
                let h = rng.gen_range(0.01..0.1);
                let v = integrate_forward(&method, &psi, h).unwrap();
                assert!(
                    (v.recursion - v.weight_form).abs() <= 1e-12 * v.recursion.abs().max(1.0),
                    "{}: {} vs {}",
                    method.name(),
                    v.recursion,
                    v.weight_form
                );
            }
        }
    });
}

/// Early-stopping balancing selection equals the exhaustive scan on
/// randomized instances.
#[test]
fn criterion_10_early_stop_equals_exhaustive() {
    report(10, || {
        let method = builtin("ab2").unwrap();
        for i in 0..50u64 {
            let c = 0.1 + 0.17 * (i % 6) as f64;
            let problem = Problem::new(
                0.0,
                1.0,
                |_, _| 1.0,
                move |x| x + c * (x * x / 2.0 - x * x * x * x / 4.0),
                0.0,
                1.0,
            );
            let delta = 10f64.powf(-3.2 - 0.08 * (i % 20) as f64);
            let opts = BalanceOptions {
                beta: Some(2.0 + 0.4 * (i % 12) as f64),
                kappa: 1 + (i % 2) as u32,
                h_max: None,
                seed: 300 + i,
            };
            let fast = balance(&method, &problem, delta, &opts).unwrap();
            let full = balance_exhaustive(&method, &problem, delta, &opts).unwrap();
            assert_eq!(fast.chosen, full.chosen, "instance {i}");
            assert!(fast.n_solves <= full.n_solves);
        }
    });
}

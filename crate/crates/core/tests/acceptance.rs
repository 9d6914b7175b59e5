//! Acceptance suite: prints one PASS/FAIL line per criterion and exits non-zero
//! if any criterion fails.

mod common;

use std::process::ExitCode;
use std::time::Instant;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use stwave::fem::SpatialFunction;
use stwave::lifting::{build_theta, lift};
use stwave::problems::{problem_poly, ProblemId};
use stwave::quadrature::{gauss_lobatto_rule, gauss_rule};
use stwave::linalg::{lu_factor, relative_residual};
use stwave::stepper::{cgp_step, integrate, BlockOperator, Stepper, TimePartition, TimeStencil};
use stwave::study::{run_energy, run_study, ErrorReport, StudyConfig};

type Outcome = Result<String, String>;

/// Samples per slab for the space-time sweep (the `L^inf` grid is saturated at this density).
const SWEEP_SAMPLES: usize = 100;

fn check(failures: &mut Vec<String>, ok: bool, msg: impl FnOnce() -> String) {
    if !ok {
        failures.push(msg());
    }
}

fn finish(failures: Vec<String>, summary: String) -> Outcome {
    if failures.is_empty() {
        Ok(summary)
    } else {
        Err(failures.join("; "))
    }
}

fn fmt_eoc(v: &[Option<f64>]) -> String {
    v.iter()
        .map(|e| e.map(|x| format!("{x:.2}")).unwrap_or_else(|| "--".into()))
        .collect::<Vec<_>>()
        .join(" ")
}

fn table1() -> Outcome {
    let report = run_study(&StudyConfig::for_problem(ProblemId::Poly)).map_err(|e| e.to_string())?;
    // lifted reference values, rows = levels, columns = e0_linf, e1_linf, e0_l2, e1_l2, energy_linf, energy_l2
    let reference = [
        [3.035e-04, 2.720e-03, 1.634e-04, 1.232e-03, 2.722e-03, 1.441e-03],
        [2.129e-05, 1.665e-04, 1.071e-05, 7.865e-05, 1.697e-04, 9.271e-05],
        [1.339e-06, 1.083e-05, 6.765e-07, 4.943e-06, 1.096e-05, 5.836e-06],
        [8.476e-08, 6.840e-07, 4.240e-08, 3.094e-07, 6.907e-07, 3.654e-07],
        [5.314e-09, 4.286e-08, 2.652e-09, 1.934e-08, 4.326e-08, 2.285e-08],
    ];
    let mut failures = Vec::new();
    check(&mut failures, report.rows.len() == 5, || "expected 5 levels".into());
    for (row, want) in report.rows.iter().zip(&reference) {
        for (i, (&got, &w)) in row.lifted.as_array().iter().zip(want).enumerate() {
            check(&mut failures, got / w < 2.0 && w / got < 2.0, || {
                format!("level {} {}: {got:.3e} vs {w:.3e}", row.level, stwave::analysis::ErrorNorms::NAMES[i])
            });
        }
    }
    let eocs = report.eoc(true);
    for (l, e) in eocs.iter().enumerate().skip(2) {
        for (i, v) in e.iter().enumerate() {
            let v = v.unwrap_or(f64::NAN);
            check(&mut failures, (3.8..=4.2).contains(&v), || {
                format!("level {l} {} EOC {v:.3}", stwave::analysis::ErrorNorms::NAMES[i])
            });
        }
    }
    let last = eocs.last().copied().unwrap_or([None; 6]);
    for (i, v) in last.iter().enumerate() {
        let v = v.unwrap_or(f64::NAN);
        check(&mut failures, (v - 4.0).abs() <= 0.1, || {
            format!("final {} EOC {v:.3}", stwave::analysis::ErrorNorms::NAMES[i])
        });
    }
    finish(
        failures,
        format!(
            "lifted e0_linf {:.3e}..{:.3e}, final EOCs {}",
            report.rows[0].lifted.e0_linf,
            report.rows[4].lifted.e0_linf,
            fmt_eoc(&last)
        ),
    )
}

fn sweep() -> Result<ErrorReport, String> {
    let mut cfg = StudyConfig::for_problem(ProblemId::Trig);
    cfg.samples_per_slab = SWEEP_SAMPLES;
    run_study(&cfg).map_err(|e| e.to_string())
}

fn table2(report: &ErrorReport) -> Outcome {
    let names = ["e0_linf", "e1_linf", "e0_l2", "e1_l2"];
    let lifted_ref = [3.98, 3.98, 4.00, 4.01];
    let unlifted_ref = [3.10, 3.06, 3.30, 3.28];
    let mut failures = Vec::new();
    let mut got = Vec::new();
    for (lifted, reference) in [(true, lifted_ref), (false, unlifted_ref)] {
        for (name, want) in names.iter().zip(reference) {
            let v = report.eoc_of(lifted, name).get(3).copied().flatten().unwrap_or(f64::NAN);
            got.push(format!("{v:.2}"));
            check(&mut failures, (v - want).abs() <= 0.3, || {
                format!("{} {name} EOC {v:.3} vs {want}", if lifted { "lifted" } else { "unlifted" })
            });
        }
    }
    finish(failures, format!("level-3 EOC lifted {} / unlifted {}", got[..4].join(" "), got[4..].join(" ")))
}

fn table3(report: &ErrorReport) -> Outcome {
    let mut failures = Vec::new();
    let mut got = Vec::new();
    for lifted in [false, true] {
        let v = report.eoc_of(lifted, "energy_linf").get(3).copied().flatten().unwrap_or(f64::NAN);
        got.push(format!("{v:.2}"));
        check(&mut failures, (v - 3.0).abs() <= 0.2, || format!("energy_linf EOC {v:.3} (lifted: {lifted})"));
    }
    finish(failures, format!("level-3 energy EOC unlifted {} / lifted {}", got[0], got[1]))
}

fn energy_conservation() -> Outcome {
    let report = run_energy(&StudyConfig::for_problem(ProblemId::Energy)).map_err(|e| e.to_string())?;
    let mut failures = Vec::new();
    let drift = report.max_drift_base();
    check(&mut failures, report.steps == 20, || format!("{} steps", report.steps));
    check(&mut failures, drift <= 1e-10, || format!("drift {drift:e}"));
    let identical = report
        .base
        .iter()
        .zip(&report.lifted)
        .map(|(a, b)| (a - b).abs() / a)
        .fold(0.0, f64::max);
    check(&mut failures, identical <= 1e-13, || format!("lifted nodal energy differs by {identical:e}"));
    finish(failures, format!("max drift {drift:.2e}, lifted vs base {identical:.1e}"))
}

fn lifting_invariants() -> Outcome {
    let problem = problem_poly();
    let space = common::space(0, 2);
    let system = common::system(&space, &problem);
    let partition = common::partition(&problem, 20, 2);
    let lifted = lift(integrate(&system, &partition).map_err(|e| e.to_string())?, &system).map_err(|e| e.to_string())?;
    let base = lifted.base();
    let slabs = partition.num_slabs();
    let scale = |comp: usize| {
        (0..slabs)
            .flat_map(|s| (0..=2).map(move |mu| (s, mu)))
            .map(|(s, mu)| common::norm(base.node_value(comp, s, mu)))
            .fold(f64::MIN_POSITIVE, f64::max)
    };
    let mut coincidence = 0.0f64;
    let mut c1 = 0.0f64;
    for comp in 0..2 {
        let sc = scale(comp);
        for s in 0..slabs {
            for (mu, &t) in partition.slab_nodes(s).iter().enumerate() {
                let l = lifted.eval_in_slab(s, t);
                coincidence = coincidence.max(common::rel_diff(&l[comp], base.node_value(comp, s, mu), sc));
            }
        }
        let dscale = (0..slabs)
            .map(|s| common::norm(&lifted.deriv_in_slab(s, partition.times()[s])[comp]))
            .fold(f64::MIN_POSITIVE, f64::max);
        for s in 0..slabs - 1 {
            let t = partition.times()[s + 1];
            let left = lifted.deriv_in_slab(s, t);
            let right = lifted.deriv_in_slab(s + 1, t);
            c1 = c1.max(common::rel_diff(&left[comp], &right[comp], dscale));
        }
    }
    let mut rng = ChaCha8Rng::seed_from_u64(2024);
    let mut residual = 0.0f64;
    for s in 0..slabs {
        let (a, b) = (partition.times()[s], partition.times()[s + 1]);
        for _ in 0..5 {
            let [r0, r1] = common::lifted_residual(&system, &lifted, s, rng.gen_range(a..=b));
            residual = residual.max(r0).max(r1);
        }
    }
    let mut failures = Vec::new();
    check(&mut failures, coincidence <= 1e-13, || format!("node coincidence {coincidence:e}"));
    check(&mut failures, c1 <= 1e-11, || format!("C1 defect {c1:e}"));
    check(&mut failures, residual <= 1e-9, || format!("pointwise residual {residual:e}"));
    finish(failures, format!("coincidence {coincidence:.1e}, C1 {c1:.1e}, residual {residual:.1e}"))
}

/// Worst `cgp_step` residual and worst LU residual (random right-hand side) over
/// random slabs of the finest acceptance runs.
fn solver_residuals() -> Result<(f64, f64), String> {
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let (mut step, mut lu) = (0.0f64, 0.0f64);
    for cfg in [StudyConfig::for_problem(ProblemId::Poly), StudyConfig::for_problem(ProblemId::Trig)] {
        let level = cfg.levels - 1;
        let problem = cfg.problem.build();
        let space = common::space(cfg.mesh_level(level), cfg.r);
        let system = common::system(&space, &problem);
        let partition = common::partition(&problem, cfg.steps(level), cfg.k);
        let stencil = TimeStencil::new(cfg.k).map_err(|e| e.to_string())?;
        let mut stepper = Stepper::new(&system, &partition).map_err(|e| e.to_string())?;
        let op = BlockOperator::new(&stencil, system.mass(), system.stiffness(), partition.tau(0));
        let matrix = op.assemble();
        let factor = lu_factor(&matrix).map_err(|e| e.to_string())?;
        for _ in 0..3 {
            let slab = rng.gen_range(0..partition.num_slabs());
            let p0 = common::random_vec(&mut rng, system.dim());
            let p1 = common::random_vec(&mut rng, system.dim());
            let values = stepper.step(slab, [&p0, &p1]).map_err(|e| e.to_string())?;
            let loads: Vec<Vec<f64>> = partition.slab_nodes(slab).iter().map(|&t| system.load(t)).collect();
            let rhs = op.rhs([&p0, &p1], &loads);
            step = step.max(relative_residual(&matrix, &op.pack(&values), &rhs));
            let b = common::random_vec(&mut rng, op.dim());
            lu = lu.max(relative_residual(&matrix, &factor.solve(&b).map_err(|e| e.to_string())?, &b));
        }
    }
    Ok((step, lu))
}

fn oracle_equivalences() -> Outcome {
    let mut failures = Vec::new();
    let exact = (1..=3)
        .flat_map(|k| (0..=k).map(move |deg| common::polynomial_run(k, deg, 100 + k as u64)))
        .fold(0.0, f64::max);
    check(&mut failures, exact <= 1e-10, || format!("polynomial exactness {exact:e}"));

    let problem = problem_poly();
    let space = common::space(0, 2);
    let system = common::system(&space, &problem);
    let partition = common::partition(&problem, 20, 2);
    let lifted = lift(integrate(&system, &partition).unwrap(), &system).unwrap();
    let jumps = common::jump_recursion_error(&system, &lifted);
    check(&mut failures, jumps <= 1e-9, || format!("jump recursion vs closed form {jumps:e}"));

    check(&mut failures, 4 * space.num_interior() == 36, || "level-0 instance is not 36 unknowns".into());
    let mut rng = ChaCha8Rng::seed_from_u64(36);
    let mut dense = 0.0f64;
    for slab in [0, 7, 19] {
        let p0: Vec<f64> = (0..space.num_interior()).map(|_| rng.gen_range(-1.0..1.0)).collect();
        let p1: Vec<f64> = (0..space.num_interior()).map(|_| rng.gen_range(-1.0..1.0)).collect();
        let ours = cgp_step(&system, &partition, slab, [&p0, &p1]).unwrap();
        let theirs = common::brute_force_cgp2_slab(&system, partition.times()[slab], partition.tau(slab), [&p0, &p1]);
        for mu in 0..2 {
            dense = dense.max(common::rel_diff(&ours.u0[mu], &theirs[0][mu], 1e-300));
            dense = dense.max(common::rel_diff(&ours.u1[mu], &theirs[1][mu], 1e-300));
        }
    }
    check(&mut failures, dense <= 1e-11, || format!("dense brute force {dense:e}"));

    let (step, lu) = solver_residuals()?;
    check(&mut failures, step <= 1e-10, || format!("slab residual {step:e}"));
    check(&mut failures, lu <= 1e-10, || format!("LU residual {lu:e}"));
    finish(
        failures,
        format!("exactness {exact:.1e}, jumps {jumps:.1e}, dense {dense:.1e}, slab residual {step:.1e}, LU residual {lu:.1e}"),
    )
}

fn kernel_properties() -> Outcome {
    let mut failures = Vec::new();
    let moment = |d: usize| if d % 2 == 1 { 0.0 } else { 2.0 / (d as f64 + 1.0) };
    let mut quad = 0.0f64;
    for m in 1..=10 {
        let g = gauss_rule(m).unwrap();
        for d in 0..=2 * m - 1 {
            quad = quad.max((g.integrate(|x| x.powi(d as i32)) - moment(d)).abs());
        }
        if m >= 2 {
            let gl = gauss_lobatto_rule(m).unwrap();
            for d in 0..=2 * m - 3 {
                quad = quad.max((gl.integrate(|x| x.powi(d as i32)) - moment(d)).abs());
            }
        }
    }
    check(&mut failures, quad <= 1e-13, || format!("quadrature exactness {quad:e}"));

    let mut idem = 0.0f64;
    let mut rng = ChaCha8Rng::seed_from_u64(77);
    for r in 1..=3 {
        let space = common::space(1, r);
        let y: Vec<f64> = (0..space.num_interior()).map(|_| rng.gen_range(-1.0..1.0)).collect();
        let g: SpatialFunction = common::discrete_function(&space, &y);
        idem = idem.max(common::rel_diff(&space.l2_project(&g).unwrap(), &y, 1e-300));
        idem = idem.max(common::rel_diff(&space.ritz_project(&g).unwrap(), &y, 1e-300));
    }
    check(&mut failures, idem <= 1e-10, || format!("projection idempotence {idem:e}"));

    let mut rowsum = 0.0f64;
    for r in 1..=4 {
        let space = common::space(1, r);
        let a = space.full_stiffness();
        let ones = vec![1.0; a.ncols()];
        let scale = a.diagonal().iter().fold(0.0f64, |m, v| m.max(v.abs()));
        rowsum = rowsum.max(a.mul_vec(&ones).iter().fold(0.0f64, |m, v| m.max(v.abs())) / scale);
    }
    check(&mut failures, rowsum <= 1e-12, || format!("stiffness row sum {rowsum:e}"));

    let mut theta = 0.0f64;
    for k in 1..=5 {
        let partition = TimePartition::from_grid(vec![0.3, 0.55], k).unwrap();
        let th = build_theta(&partition, 0, k).unwrap();
        for &x in &partition.lobatto().nodes {
            theta = theta.max(th.value_ref(x).abs());
        }
        theta = theta.max((th.deriv_ref(-1.0) - 1.0).abs());
        for &x in &gauss_rule(k).unwrap().nodes {
            theta = theta.max(th.deriv_ref(x).abs());
        }
    }
    check(&mut failures, theta <= 1e-13, || format!("theta properties {theta:e}"));
    finish(
        failures,
        format!("quadrature {quad:.1e}, idempotence {idem:.1e}, row sums {rowsum:.1e}, theta {theta:.1e}"),
    )
}

fn main() -> ExitCode {
    let mut all_ok = true;
    let mut report = |name: &str, outcome: Outcome, started: Instant| {
        let secs = started.elapsed().as_secs_f64();
        match outcome {
            Ok(detail) => println!("PASS  {name}: {detail} ({secs:.1}s)"),
            Err(detail) => {
                all_ok = false;
                println!("FAIL  {name}: {detail} ({secs:.1}s)");
            }
        }
    };

    let t = Instant::now();
    report("1 temporal order k+2 (time-only refinement)", table1(), t);
    let t = Instant::now();
    match sweep() {
        Ok(sw) => {
            report("2 space-time order, lifted and unlifted", table2(&sw), t);
            report("3 energy-norm order r", table3(&sw), Instant::now());
        }
        Err(e) => {
            report("2 space-time order, lifted and unlifted", Err(e.clone()), t);
            report("3 energy-norm order r", Err(e), Instant::now());
        }
    }
    let t = Instant::now();
    report("4 discrete energy conservation", energy_conservation(), t);
    let t = Instant::now();
    report("5 lifting invariants", lifting_invariants(), t);
    let t = Instant::now();
    report("6 oracle equivalences", oracle_equivalences(), t);
    let t = Instant::now();
    report("7 kernel properties", kernel_properties(), t);

    if all_ok {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}

//! Acceptance suite. Runs every criterion, prints one PASS/FAIL line each and
//! exits non-zero if any fails.

mod common;

use std::process::ExitCode;
use std::time::{Duration, Instant};

use blowup_core::cone::{dual_cone_generators, dual_generators_for, has_two_block_shape, position_at};
use blowup_core::doc::load_instance;
use blowup_core::eps::{int, rat, rational_to_f64, EpsPoly, Rational};
use blowup_core::instance::{degrees_from_intersections, two_term_degree, Ambient, Instance};
use blowup_core::moment::sweep::{eps_sweep, geometric_schedule, loglog_slope, SweepOptions, SweepStatus};
use blowup_core::moment::{kn_value_grad_hess, solve_moment_map, MomentProblem, SolveOutcome, SolverOptions};
use blowup_core::par::{self, Execution};
use blowup_core::slope::{
    decide_over, decide_stability, default_root_precision, enumerate_subsheaves, seesaw_check, slope_poly, SlopeOf,
};
use blowup_core::{cone_position, flow_feasibility, Position, StabilityKind};
use common::GenConfig;
use nalgebra::DMatrix;
use num_traits::Zero;
use rand::Rng;

const CORPUS_SIZE: usize = 1200;
const FOUR_WAY_BUDGET: Duration = Duration::from_secs(60);
const RESIDUAL_TOL: f64 = 1e-10;
const SLOPE_REL_TOL: f64 = 0.05;
const SWEEP_STEPS: usize = 11;
const SQRT_TOL: f64 = 1e-9;
const FD_POINTS: usize = 1000;
const FD_STEP: f64 = 1e-5;
const FD_REL_TOL: f64 = 1e-6;
const EIGEN_TOL: f64 = -1e-10;
const EXHAUSTIVE_MAX_LEN: usize = 5;
const SAMPLED_LEN6: usize = 2000;

type Outcome = Result<String, String>;
type Criterion<'a> = (&'static str, Box<dyn Fn() -> Outcome + 'a>);
type QuiverJob = (Vec<(usize, usize)>, Vec<u32>);

fn expected_position(kind: StabilityKind) -> Position {
    match kind {
        StabilityKind::Stable => Position::Interior,
        StabilityKind::Semistable => Position::Boundary,
        StabilityKind::Unstable => Position::Outside,
    }
}

fn first_failures(failures: Vec<String>, total: usize, what: &str) -> Outcome {
    if failures.is_empty() {
        Ok(format!("{total} {what}"))
    } else {
        let shown: Vec<&str> = failures.iter().take(3).map(String::as_str).collect();
        Err(format!(
            "{} of {total} {what} failed; first: {}",
            failures.len(),
            shown.join(" | ")
        ))
    }
}

fn four_way(corpus: &[Instance]) -> Outcome {
    let start = Instant::now();
    let mut r = common::rng(11);
    let b0s: Vec<Option<Vec<Rational>>> = corpus
        .iter()
        .map(|inst| {
            r.random_bool(0.5)
                .then(|| common::random_b0(&mut r, inst.quiver().len()))
        })
        .collect();
    let jobs: Vec<(usize, &Instance)> = corpus.iter().enumerate().collect();
    let results = par::map(
        &jobs,
        Execution::Parallel,
        |&(k, inst)| -> Result<StabilityKind, String> {
            let verdict = decide_stability(inst);
            let want = expected_position(verdict.kind);
            let eps = verdict.safe_epsilon(&rat(1, 2));
            let cp = cone_position(inst).map_err(|e| format!("#{k}: cone: {e}"))?;
            let prob = MomentProblem::from_instance(inst, &eps, b0s[k].as_deref()).map_err(|e| format!("#{k}: {e}"))?;
            let at_eps = position_at(&cp.generators, prob.w_exact());
            let flow = flow_feasibility(&prob).position();
            let solved = solve_moment_map(&prob, &SolverOptions::default())
                .map(|o| o.position())
                .map_err(|e| format!("#{k}: solve at ε={eps}: {e}"))?;
            if [cp.position, at_eps, flow, solved].iter().all(|p| *p == want) {
                Ok(verdict.kind)
            } else {
                Err(format!(
                    "#{k}: {:?} vs cone {:?}, exact {:?}, flow {:?}, solve {:?} at ε={eps}",
                    verdict.kind, cp.position, at_eps, flow, solved
                ))
            }
        },
    );
    let elapsed = start.elapsed();
    let mut counts = [0usize; 3];
    let mut failures = Vec::new();
    for res in results {
        match res {
            Ok(k) => counts[k as usize] += 1,
            Err(e) => failures.push(e),
        }
    }
    let summary = first_failures(failures, corpus.len(), "instances")?;
    if elapsed > FOUR_WAY_BUDGET {
        return Err(format!("{summary} but took {elapsed:.1?}"));
    }
    Ok(format!(
        "{summary} ({} stable, {} semistable, {} unstable) in {elapsed:.1?}",
        counts[0], counts[1], counts[2]
    ))
}

/// All connected edge sets on `len` vertices (edges `i < j`).
fn connected_quivers(len: usize) -> Vec<Vec<(usize, usize)>> {
    let pairs: Vec<(usize, usize)> = (0..len).flat_map(|i| (i + 1..len).map(move |j| (i, j))).collect();
    (0u64..1 << pairs.len())
        .map(|mask| {
            pairs
                .iter()
                .enumerate()
                .filter(|(k, _)| mask >> k & 1 == 1)
                .map(|(_, &p)| p)
                .collect::<Vec<_>>()
        })
        .filter(|edges| blowup_core::instance::Quiver::from_edges(edges.clone()).is_connected(len))
        .collect()
}

fn check_quiver(edges: &[(usize, usize)], ranks: &[u32]) -> Result<(), String> {
    let gens = dual_generators_for(edges, ranks).map_err(|e| e.to_string())?;
    let ours = common::ray_set(gens.iter().map(|g| g.coords.clone()));
    let oracle = common::dual_rays_oracle(edges, ranks);
    if ours != oracle {
        return Err(format!(
            "ranks {ranks:?} edges {edges:?}: {} rays vs oracle {}",
            ours.len(),
            oracle.len()
        ));
    }
    Ok(())
}

fn dual_cone_oracle(corpus: &[Instance]) -> Outcome {
    let mut r = common::rng(22);
    let mut jobs: Vec<QuiverJob> = Vec::new();
    for len in 2..=EXHAUSTIVE_MAX_LEN {
        for edges in connected_quivers(len) {
            jobs.push((edges.clone(), vec![1; len]));
            jobs.push((edges, (0..len).map(|_| r.random_range(1..=3)).collect()));
        }
    }
    for _ in 0..SAMPLED_LEN6 {
        let edges = common::random_quiver(&mut r, 6);
        let ranks = if r.random_bool(0.5) {
            vec![1; 6]
        } else {
            (0..6).map(|_| r.random_range(1..=3)).collect()
        };
        jobs.push((edges, ranks));
    }
    for inst in corpus {
        jobs.push((inst.quiver().edges().to_vec(), inst.ranks()));
    }
    let mut failures: Vec<String> = par::map(&jobs, Execution::Parallel, |(e, rk)| check_quiver(e, rk))
        .into_iter()
        .filter_map(Result::err)
        .collect();

    // two-block values and closure, on the corpus and on its rank-1 variants
    let mut shapes = 0;
    for inst in corpus {
        for g in dual_cone_generators(inst).map_err(|e| e.to_string())? {
            shapes += 1;
            if !has_two_block_shape(inst, &g) {
                failures.push(format!("shape {:?} plus {:?}", g.coords, g.plus.members()));
            }
            let ranks = inst.ranks();
            if ranks.iter().all(|&x| x == 1) {
                let p = Rational::from_integer((g.plus.len() as i64).into()).recip();
                let m = -Rational::from_integer((g.minus.len() as i64).into()).recip();
                if !(0..inst.len()).all(|i| g.coords[i] == if g.plus.contains(i) { p.clone() } else { m.clone() }) {
                    failures.push(format!("rank-1 values {:?}", g.coords));
                }
            }
        }
    }
    first_failures(failures, jobs.len(), "quivers")
        .map(|s| format!("{s} match the oracle; {shapes} generators have two-block shape"))
}

fn leading_order(inst: &Instance) -> Option<usize> {
    blowup_core::moment_weight(inst).leading_order()
}

fn moment_convergence(corpus: &[Instance]) -> Outcome {
    let stable: Vec<&Instance> = corpus
        .iter()
        .filter(|i| i.len() > 1 && decide_stability(i).kind == StabilityKind::Stable)
        .collect();
    let results = par::map(&stable, Execution::Parallel, |inst| -> Result<(f64, f64), String> {
        let verdict = decide_stability(inst);
        let eps = verdict.safe_epsilon(&rat(1, 2));
        let prob = MomentProblem::from_instance(inst, &eps, None).map_err(|e| e.to_string())?;
        let residual = match solve_moment_map(&prob, &SolverOptions::default()) {
            Ok(SolveOutcome::Converged(s)) => s.residual,
            other => return Err(format!("ε={eps}: {other:?}")),
        };
        if residual > RESIDUAL_TOL {
            return Err(format!("ε={eps}: residual {residual:e}"));
        }
        let order = leading_order(inst).ok_or("W vanishes on a stable instance")?;
        let eps0 = verdict.safe_epsilon(&int(1)) * rat(1, 256);
        let rows = eps_sweep(
            inst,
            &geometric_schedule(&eps0, &rat(1, 2), SWEEP_STEPS),
            &SweepOptions {
                exec: Execution::Sequential,
                ..SweepOptions::default()
            },
        );
        if let Some(bad) = rows.iter().find(|r| r.status != SweepStatus::Converged) {
            return Err(format!("sweep row ε={} {:?}", bad.eps, bad.status));
        }
        let slope = loglog_slope(&rows).ok_or("no slope")?;
        let want = order as f64 / 2.0;
        let rel = (slope - want).abs() / want;
        if rel > SLOPE_REL_TOL {
            return Err(format!("slope {slope:.4} vs {want} from ε₀={eps0}"));
        }
        Ok((residual, rel))
    });
    let mut failures = Vec::new();
    let (mut worst_res, mut worst_rel) = (0.0f64, 0.0f64);
    for r in results {
        match r {
            Ok((res, rel)) => {
                worst_res = worst_res.max(res);
                worst_rel = worst_rel.max(rel);
            }
            Err(e) => failures.push(e),
        }
    }

    // one edge, W = (−ε, ε): b_norm = sqrt(ε)
    let raw = r#"{"ambient":{"n":2,"m":0},"components":[{"rank":1,"deg_coeffs":[0,-1]},{"rank":1,"deg_coeffs":[0,1]}],"quiver":[[1,2]]}"#;
    let one_edge = load_instance(raw, true).map_err(|e| e.to_string())?.instance;
    let rows = eps_sweep(
        &one_edge,
        &geometric_schedule(&rat(1, 2), &rat(1, 2), SWEEP_STEPS),
        &SweepOptions::default(),
    );
    let mut worst_sqrt = 0.0f64;
    for row in &rows {
        let err = (row.b_norm.unwrap_or(f64::NAN) - rational_to_f64(&row.eps).sqrt()).abs();
        worst_sqrt = worst_sqrt.max(err);
        if err.is_nan() || err > SQRT_TOL {
            failures.push(format!("one-edge ε={}: error {err:e}", row.eps));
        }
    }
    first_failures(failures, stable.len(), "stable instances").map(|s| {
        format!(
            "{s}; max residual {worst_res:.1e}, max slope error {:.2}%, sqrt error {worst_sqrt:.1e}",
            worst_rel * 100.0
        )
    })
}

fn gradient_and_convexity(corpus: &[Instance]) -> Outcome {
    let mut r = common::rng(44);
    let multi: Vec<&Instance> = corpus.iter().filter(|i| i.len() > 1).collect();
    let mut failures = Vec::new();
    let (mut worst_fd, mut min_eig) = (0.0f64, f64::INFINITY);
    for k in 0..FD_POINTS {
        let inst = multi[k % multi.len()];
        let eps = rat(r.random_range(1i64..=50), 100);
        let b0 = common::random_b0(&mut r, inst.quiver().len());
        let prob = MomentProblem::from_instance(inst, &eps, Some(&b0)).map_err(|e| e.to_string())?;
        let x: Vec<f64> = (0..inst.len()).map(|_| r.random_range(-1.5..1.5)).collect();
        let at = kn_value_grad_hess(&prob, &x).map_err(|e| e.to_string())?;
        let fd = common::central_gradient(|y| kn_value_grad_hess(&prob, y).expect("in range").value, &x, FD_STEP);
        let scale = at.grad.iter().chain(&fd).fold(1.0f64, |m, g| m.max(g.abs()));
        let err = at.grad.iter().zip(&fd).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max) / scale;
        worst_fd = worst_fd.max(err);
        if err > FD_REL_TOL {
            failures.push(format!("point {k}: gradient error {err:e}"));
        }
        let n = inst.len();
        let h = DMatrix::from_fn(n, n, |i, j| at.hess[i][j]);
        let eig = h.symmetric_eigenvalues().min();
        min_eig = min_eig.min(eig);
        if eig < EIGEN_TOL {
            failures.push(format!("point {k}: eigenvalue {eig:e}"));
        }
    }
    first_failures(failures, FD_POINTS, "points")
        .map(|s| format!("{s}; max relative gradient error {worst_fd:.1e}, min eigenvalue {min_eig:.1e}"))
}

fn intersection_consistency() -> Outcome {
    let mut r = common::rng(55);
    let mut failures = Vec::new();
    let mut checked = 0;
    for _ in 0..300 {
        let (n, m) = if r.random_bool(0.5) {
            (3, 1)
        } else {
            let n = r.random_range(3..=6);
            (n, r.random_range(1..=n - 2))
        };
        let ambient = Ambient::new(n, m).map_err(|e| e.to_string())?;
        let codim = n - m;
        let rank = r.random_range(1u32..=4);
        let d0 = rat(r.random_range(-20i64..=20), r.random_range(1i64..=4));
        let rd = rat(r.random_range(-20i64..=20), r.random_range(1i64..=4));
        // only the pure-Z' number is nonzero; its sign absorbs (−1)^codim
        let mut numbers = vec![Rational::zero(); n];
        numbers[0] = d0.clone();
        numbers[codim] = if codim % 2 == 0 { -rd.clone() } else { rd.clone() };
        let full = degrees_from_intersections(n, &numbers).map_err(|e| e.to_string())?;
        let two = two_term_degree(ambient, &d0, rank, Some(&rd)).map_err(|e| e.to_string())?;
        checked += 1;
        if full != two {
            failures.push(format!("n={n} m={m}: {full} vs {two}"));
        }
    }
    // the curve-in-threefold form through the document loader
    let doc = |comp: &str| format!(r#"{{"ambient":{{"n":3,"m":1}},"components":[{comp}],"quiver":[]}}"#);
    let a =
        load_instance(&doc(r#"{"rank":2,"intersection_numbers":[10,0,"-3/2"]}"#), true).map_err(|e| e.to_string())?;
    let b = load_instance(&doc(r#"{"rank":2,"base_degree":10,"restriction_degree":"3/2"}"#), true)
        .map_err(|e| e.to_string())?;
    let (pa, pb) = (
        &a.instance.components()[0].deg_coeffs,
        &b.instance.components()[0].deg_coeffs,
    );
    checked += 1;
    if pa != pb || *pa != EpsPoly::new(vec![int(10), int(0), rat(-3, 2)]) {
        failures.push(format!("document forms differ: {pa} vs {pb}"));
    }
    first_failures(failures, checked, "degree pairs").map(|s| format!("{s} identical"))
}

fn point_blowup() -> Outcome {
    let mut r = common::rng(66);
    let mut failures = Vec::new();
    let total = 300;
    for k in 0..total {
        let mut inst = common::random_instance(&mut r, GenConfig::default());
        let n = inst.ambient().n();
        let len = inst.len();
        // zero out every higher intersection number and move to m = 0
        let raw = blowup_core::RawInstance {
            n,
            m: 0,
            components: inst
                .components()
                .iter()
                .map(|c| {
                    let mut numbers = vec![Rational::zero(); n];
                    numbers[0] = c.deg_coeffs.coeff(0);
                    let mut c = c.clone();
                    c.deg_coeffs = degrees_from_intersections(n, &numbers).expect("length n");
                    c
                })
                .collect(),
            edges: inst.quiver().edges().to_vec(),
        };
        inst = blowup_core::validate_instance(raw).map_err(|e| e.to_string())?;
        let full = slope_poly(&inst, SlopeOf::Full);
        let constant = enumerate_subsheaves(&inst).iter().all(|s| {
            let d = &full - &slope_poly(&inst, SlopeOf::Subsheaf(s));
            (1..=d.max_degree()).all(|j| d.coeff(j).is_zero())
        });
        let verdict = decide_stability(&inst);
        let want = if len == 1 {
            StabilityKind::Stable
        } else {
            StabilityKind::Semistable
        };
        if !constant || verdict.kind != want {
            failures.push(format!("#{k}: constant {constant}, verdict {:?}", verdict.kind));
        }
        if len > 1 {
            let prob = MomentProblem::from_instance(&inst, &rat(1, 3), None).map_err(|e| e.to_string())?;
            if flow_feasibility(&prob).position() != Position::Boundary {
                failures.push(format!("#{k}: flow not on the boundary"));
            }
        }
    }
    first_failures(failures, total, "point blow-ups")
}

fn seesaw(corpus: &[Instance]) -> Outcome {
    let mut failures = Vec::new();
    let mut total = 0;
    for (k, inst) in corpus.iter().enumerate() {
        for s in enumerate_subsheaves(inst) {
            total += 1;
            if !seesaw_check(inst, &s) {
                failures.push(format!("#{k} subset {:?}", s.one_based()));
            }
        }
    }
    first_failures(failures, total, "subsheaves")
}

fn quantifier_reduction(corpus: &[Instance]) -> Outcome {
    let precision = default_root_precision();
    let mut failures = Vec::new();
    let mut reduced_total = 0;
    let mut full_total = 0;
    for (k, inst) in corpus.iter().enumerate() {
        let full = decide_stability(inst);
        let mut cands: Vec<_> = dual_cone_generators(inst)
            .map_err(|e| e.to_string())?
            .into_iter()
            .map(|g| g.plus)
            .collect();
        cands.sort();
        cands.dedup();
        reduced_total += cands.len();
        full_total += full.checks.len();
        let reduced = decide_over(inst, &cands, &precision);
        if reduced.kind != full.kind {
            failures.push(format!("#{k}: {:?} vs reduced {:?}", full.kind, reduced.kind));
        }
    }
    first_failures(failures, corpus.len(), "instances")
        .map(|s| format!("{s} agree using {reduced_total} of {full_total} candidates"))
}

fn main() -> ExitCode {
    let seed = common::seed();
    println!("acceptance suite, seed {seed} (set {} to override)", common::SEED_VAR);
    let corpus = common::corpus(CORPUS_SIZE, 1, GenConfig::default());
    let criteria: Vec<Criterion> = vec![
        ("four-way stability agreement", Box::new(|| four_way(&corpus))),
        (
            "dual cone generators vs double description",
            Box::new(|| dual_cone_oracle(&corpus)),
        ),
        (
            "moment-map residual and convergence rate",
            Box::new(|| moment_convergence(&corpus)),
        ),
        ("gradient and convexity", Box::new(|| gradient_and_convexity(&corpus))),
        ("intersection-number consistency", Box::new(intersection_consistency)),
        ("point blow-up invariance", Box::new(point_blowup)),
        ("see-saw identity", Box::new(|| seesaw(&corpus))),
        ("quantifier reduction", Box::new(|| quantifier_reduction(&corpus))),
    ];
    let mut failed = 0;
    for (k, (name, run)) in criteria.iter().enumerate() {
        let start = Instant::now();
        let outcome = run();
        let took = start.elapsed();
        match outcome {
            Ok(detail) => println!("PASS [{}] {name}: {detail} ({took:.1?})", k + 1),
            Err(detail) => {
                failed += 1;
                println!("FAIL [{}] {name}: {detail} ({took:.1?})", k + 1);
            }
        }
    }
    println!("{} of {} criteria passed", criteria.len() - failed, criteria.len());
    if failed == 0 {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}

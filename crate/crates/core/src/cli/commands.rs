use std::collections::BTreeMap;
use std::time::Instant;

use serde::Serialize;
use serde_json::json;

use super::output::{entries, num, rows, OutDir};
use super::{
    write_manifest, BestResponseArgs, CliError, Command, Common, Manifest, MethodArg, NashArgs, PlayerArg, SchemeArg,
    SearchArgs, SimulateArgs, SteadyStateArgs, SweepArgs,
};
use crate::covariance::{steady_state, steady_state_neumann, SchedulingPolicy, Solver};
use crate::linalg::{self, Mat};
use crate::model::{discretize, validate_spec, DiscretizedModel, GameSpec, ValidationReport};
use crate::riccati::{solve_game_riccati, solve_wellposedness_are, RiccatiSolution};
use crate::scheduler::{
    best_response_curve, deviation_scan, nash_exhaustive, nash_iterative, nash_multistart, sweep_lambda, trend_summary,
    unit_grid, BestResponseCurve, BrOptions, CostPair, ExhaustiveOptions, NashOptions, Player, SchedulingGame,
};
use crate::simulate::{
    analytic_per_second, empirical_costs, empirical_covariance, simulate_trajectories, tick_count, Scheme, SimOptions,
};

pub(super) fn dispatch(command: &Command) -> Result<(), CliError> {
    match command {
        Command::Validate(c) => validate(c),
        Command::Solve(c) => solve(c),
        Command::SteadyState(a) => steady(a),
        Command::BestResponse(a) => best_responses(a),
        Command::Nash(a) => nash(a),
        Command::Simulate(a) => simulate(a),
        Command::Sweep(a) => sweep(a),
    }
}

/// Loaded spec, output directory and stage timings of one invocation.
struct Session {
    name: &'static str,
    common: Common,
    arguments: serde_json::Value,
    spec: GameSpec,
    out: OutDir,
    timings: BTreeMap<String, f64>,
    started: Instant,
}

impl Session {
    fn open(name: &'static str, common: &Common, arguments: &impl Serialize) -> Result<Self, CliError> {
        let started = Instant::now();
        let spec = GameSpec::from_path(&common.config)?;
        let out = OutDir::create(&common.out)?;
        let mut s = Self {
            name,
            common: common.clone(),
            arguments: serde_json::to_value(arguments).unwrap_or_default(),
            spec,
            out,
            timings: BTreeMap::new(),
            started,
        };
        s.lap("load", started);
        Ok(s)
    }

    fn lap(&mut self, stage: &str, since: Instant) {
        self.timings
            .insert(stage.to_string(), since.elapsed().as_secs_f64() * 1e3);
    }

    fn timed<T>(&mut self, stage: &str, f: impl FnOnce(&Self) -> T) -> T {
        let t = Instant::now();
        let v = f(self);
        self.lap(stage, t);
        v
    }

    /// Runs the standing-assumption checks. Malformed weights or parameters
    /// stop the command; failed stabilizability or observability only warn,
    /// leaving the solver to report whether a solution exists.
    fn checked(&mut self) -> Result<ValidationReport, CliError> {
        let report = validate_spec(&self.spec)?;
        if !(report.weights_valid && report.parameters_valid) {
            return Err(CliError::Validation(report.messages.join("; ")));
        }
        for m in &report.messages {
            eprintln!("warning: {m}");
        }
        Ok(report)
    }

    fn solved(&mut self) -> Result<(RiccatiSolution, DiscretizedModel), CliError> {
        self.checked()?;
        let ric = self.timed("riccati", |s| solve_game_riccati(&s.spec))?;
        let disc = self.timed("discretize", |s| discretize(&s.spec, &ric))?;
        Ok((ric, disc))
    }

    fn game(&mut self) -> Result<SchedulingGame, CliError> {
        let (ric, disc) = self.solved()?;
        Ok(SchedulingGame::new(&self.spec, &ric, &disc).with_solver(self.common.solver()))
    }

    fn finish(mut self) -> Result<(), CliError> {
        let total = self.started;
        self.lap("total", total);
        let manifest = Manifest {
            tool: env!("CARGO_PKG_NAME").into(),
            version: env!("CARGO_PKG_VERSION").into(),
            command: self.name.into(),
            config_path: self.common.config.clone(),
            arguments: self.arguments,
            spec: self.spec.to_json_value(),
            threads: rayon::current_num_threads(),
            platform: format!("{}-{}", std::env::consts::ARCH, std::env::consts::OS),
            outputs: self.out.files,
            timings_ms: self.timings,
        };
        write_manifest(&self.out.root, &manifest)?;
        println!("outputs written to {}", self.out.root.display());
        Ok(())
    }
}

fn nash_options(a: &SearchArgs) -> NashOptions {
    NashOptions {
        eps: a.eps,
        eta1: a.eta1,
        eta2: a.eta2,
        kappa: a.kappa,
        max_br_iters: a.max_br_iters,
        max_outer: a.max_outer,
    }
}

fn policy(p: f64, q: f64) -> Result<SchedulingPolicy, CliError> {
    Ok(SchedulingPolicy::new(p, q)?)
}

fn print_matrix(name: &str, m: &Mat) {
    for (i, row) in m.row_iter().enumerate() {
        let label = if i == 0 { name } else { "" };
        let cells: Vec<String> = row.iter().map(|v| format!("{v:>10.4}")).collect();
        println!("{label:>10} {}", cells.join(" "));
    }
}

fn validate(c: &Common) -> Result<(), CliError> {
    let mut s = Session::open("validate", c, c)?;
    let report = validate_spec(&s.spec)?;
    s.out.json("validation.json", &report)?;
    let status = |ok: bool| if ok { "ok" } else { "FAILED" };
    println!("stabilizable (A, B1)      {}", status(report.stabilizable));
    println!("observable (A, Q^1/2)     {}", status(report.observable));
    println!("weights                   {}", status(report.weights_valid));
    println!("parameters                {}", status(report.parameters_valid));
    for m in &report.messages {
        println!("  - {m}");
    }
    let passed = report.passed();
    s.finish()?;
    if passed {
        Ok(())
    } else {
        Err(CliError::Validation(report.messages.join("; ")))
    }
}

fn solve(c: &Common) -> Result<(), CliError> {
    let mut s = Session::open("solve", c, c)?;
    s.checked()?;
    let ric = s.timed("riccati", |s| solve_game_riccati(&s.spec))?;
    let cert = s.timed("well_posedness", |s| solve_wellposedness_are(&s.spec, &ric));
    let eig: Vec<[f64; 2]> = linalg::eigenvalues(&ric.atilde)
        .unwrap_or_default()
        .iter()
        .map(|z| [z.re, z.im])
        .collect();
    let (wp, wp_error) = match &cert {
        Ok(c) => (
            Some(json!({
                "p11tilde": rows(&c.p11tilde),
                "ap": rows(&c.ap),
                "atilde_hurwitz": c.atilde_hurwitz,
                "ap_hurwitz": c.ap_hurwitz,
                "residual": c.residual,
                "real_roots": c.real_roots,
            })),
            None,
        ),
        Err(e) => (None, Some(e.to_string())),
    };
    let report = json!({
        "p": rows(&ric.p),
        "lambda1": rows(&ric.lambda1),
        "lambda2": rows(&ric.lambda2),
        "atilde": rows(&ric.atilde),
        "atilde_eigenvalues": eig,
        "jstar": ric.jstar,
        "residual": ric.residual,
        "well_posedness": wp,
        "well_posedness_error": wp_error,
    });
    s.out.json("riccati.json", &report)?;
    s.out.csv(
        "riccati.csv",
        &["matrix", "i", "j", "value"],
        [
            ("P", &ric.p),
            ("Lambda1", &ric.lambda1),
            ("Lambda2", &ric.lambda2),
            ("Atilde", &ric.atilde),
        ]
        .into_iter()
        .flat_map(|(name, m)| {
            entries(m).map(move |(i, j, v)| vec![name.to_string(), i.to_string(), j.to_string(), num(v)])
        }),
    )?;
    print_matrix("P", &ric.p);
    print_matrix("Lambda1", &ric.lambda1);
    print_matrix("Lambda2", &ric.lambda2);
    for z in &eig {
        println!("{:>10} {:>10.4} {:+.4}i", "eig(Ã)", z[0], z[1]);
    }
    println!("{:>10} {:.6}", "J*", ric.jstar);
    println!("{:>10} {:.3e}", "residual", ric.residual);
    match &cert {
        Ok(c) => println!(
            "well-posedness certificate found (A − S2 P̃11 Hurwitz: {})",
            c.ap_hurwitz
        ),
        Err(e) => println!("well-posedness: {e}"),
    }
    s.finish()
}

fn steady(a: &SteadyStateArgs) -> Result<(), CliError> {
    let mut s = Session::open("steady-state", &a.common, a)?;
    let pol = policy(a.p, a.q)?;
    let game = s.game()?;
    let solver = a.common.solver();
    let (ops, sigma) = s.timed("steady_state", |_| steady_state(&game.disc, pol, solver))?;
    let (rho, bound) = match solver {
        Solver::Neumann { tp } => {
            let ss = steady_state_neumann(&ops, tp)?;
            (ss.rho, Some(ss.bound))
        }
        Solver::Direct => (crate::covariance::spectral_radius(&ops), None),
    };
    let costs = game.costs(pol);
    let residual = (&sigma - ops.transfer(&sigma) - &ops.gpq).norm();
    s.out.csv(
        "steady_state.csv",
        &["i", "j", "sigma"],
        entries(&sigma).map(|(i, j, v)| vec![i.to_string(), j.to_string(), num(v)]),
    )?;
    s.out.json(
        "steady_state.json",
        &json!({
            "p": a.p, "q": a.q, "rho": rho, "truncation_bound": bound,
            "residual": residual, "sigma": rows(&sigma), "costs": costs,
        }),
    )?;
    print_matrix("Sigma", &sigma);
    println!("rho = {rho:.6}   residual = {residual:.3e}");
    if let Some(b) = bound {
        println!("truncation bound = {b:.3e}");
    }
    println!(
        "J1 = {:.6}   J2 = {:.6}   (J̃* = {:.6}, tr(Λ̃Σ) = {:.6})",
        costs.j1, costs.j2, costs.jtilde, costs.trace
    );
    s.finish()
}

fn curve_rows(curve: &BestResponseCurve) -> Vec<(f64, Option<f64>, &'static str)> {
    let mut out: Vec<(f64, Option<f64>, &'static str)> = curve
        .grid
        .iter()
        .zip(&curve.responses)
        .map(|(&o, &r)| {
            let status = if curve.unconverged.contains(&o) {
                "unconverged"
            } else {
                "ok"
            };
            (o, Some(r), status)
        })
        .chain(curve.undefined.iter().map(|&o| (o, None, "undefined")))
        .collect();
    out.sort_by(|a, b| a.0.total_cmp(&b.0));
    out
}

fn write_curves(out: &mut OutDir, curves: &[&BestResponseCurve]) -> Result<(), CliError> {
    let records: Vec<Vec<String>> = curves
        .iter()
        .flat_map(|c| {
            let player = match c.player {
                Player::P1 => "1",
                Player::P2 => "2",
            };
            curve_rows(c).into_iter().map(move |(o, r, status)| {
                vec![
                    player.to_string(),
                    num(o),
                    r.map(num).unwrap_or_default(),
                    status.to_string(),
                ]
            })
        })
        .collect();
    out.csv(
        "best_response.csv",
        &["player", "opponent", "response", "status"],
        records,
    )
}

fn best_responses(a: &BestResponseArgs) -> Result<(), CliError> {
    let mut s = Session::open("best-response", &a.common, a)?;
    let game = s.game()?;
    let grid = unit_grid(a.grid)?;
    let opts = nash_options(&a.search);
    let players: &[Player] = match a.player {
        PlayerArg::P1 => &[Player::P1],
        PlayerArg::P2 => &[Player::P2],
        PlayerArg::Both => &[Player::P1, Player::P2],
    };
    let mut curves = Vec::new();
    for &pl in players {
        let br: BrOptions = opts.br(pl);
        let curve = s.timed(&format!("curve_{pl:?}").to_lowercase(), |_| {
            best_response_curve(&game, pl, &grid, a.init, &br)
        })?;
        println!(
            "{pl:?}: {} points, {} undefined, {} unconverged",
            curve.grid.len(),
            curve.undefined.len(),
            curve.unconverged.len()
        );
        curves.push(curve);
    }
    write_curves(&mut s.out, &curves.iter().collect::<Vec<_>>())?;
    let unconverged: usize = curves.iter().map(|c| c.unconverged.len()).sum();
    s.finish()?;
    if unconverged > 0 {
        return Err(CliError::NotConverged(format!(
            "{unconverged} best responses hit the iteration cap"
        )));
    }
    Ok(())
}

fn cost_cells(c: &CostPair) -> [String; 2] {
    [num(c.j1), num(c.j2)]
}

fn nash(a: &NashArgs) -> Result<(), CliError> {
    let mut s = Session::open("nash", &a.common, a)?;
    let game = s.game()?;
    let opts = nash_options(&a.search);
    let (points, summary) = match a.method {
        MethodArg::Iterative => {
            if a.starts == 0 {
                return Err(CliError::Config("--starts must be positive".into()));
            }
            let ms = s.timed("nash", |_| nash_multistart(&game, &opts, a.starts, a.common.seed))?;
            s.out.csv(
                "nash_trace.csv",
                &["start", "iteration", "p", "q"],
                ms.runs.iter().enumerate().flat_map(|(k, r)| {
                    r.trace
                        .iter()
                        .enumerate()
                        .map(move |(i, &(p, q))| vec![k.to_string(), i.to_string(), num(p), num(q)])
                }),
            )?;
            s.out.csv(
                "nash_starts.csv",
                &["start", "p0", "q0", "p_star", "q_star", "iterations", "converged"],
                ms.runs.iter().zip(&ms.inits).enumerate().map(|(k, (r, &(p0, q0)))| {
                    vec![
                        k.to_string(),
                        num(p0),
                        num(q0),
                        num(r.p_star),
                        num(r.q_star),
                        r.iterations.to_string(),
                        r.converged.to_string(),
                    ]
                }),
            )?;
            for (k, r) in ms.runs.iter().enumerate() {
                println!(
                    "start {k:>2}: ({:.4}, {:.4}) -> ({:.5}, {:.5}) in {} rounds{}",
                    ms.inits[k].0,
                    ms.inits[k].1,
                    r.p_star,
                    r.q_star,
                    r.iterations,
                    if r.converged { "" } else { " (not converged)" }
                );
            }
            let points: Vec<(f64, f64, CostPair, bool)> = ms
                .equilibria
                .iter()
                .enumerate()
                .map(|(i, e)| (e.p, e.q, e.costs, ms.undominated.contains(&i)))
                .collect();
            let summary = json!({
                "method": "iterative", "starts": a.starts, "seed": a.common.seed,
                "equilibria": ms.equilibria, "undominated": ms.undominated,
                "unconverged_starts": ms.runs.iter().filter(|r| !r.converged).count(),
            });
            (points, summary)
        }
        MethodArg::Exhaustive => {
            let ex_opts = ExhaustiveOptions {
                grid: a.grid,
                eta1: a.search.eta1,
                eta2: a.search.eta2,
                kappa: a.search.kappa,
                max_br_iters: a.search.max_br_iters,
                sigma: a.sigma,
                ..ExhaustiveOptions::default()
            };
            let ex = s.timed("nash", |_| nash_exhaustive(&game, &ex_opts))?;
            write_curves(&mut s.out, &[&ex.p1_curve, &ex.p2_curve])?;
            if let Some(adv) = &ex.advisory {
                eprintln!("warning: {adv}");
            }
            let points: Vec<(f64, f64, CostPair, bool)> = ex
                .ne_pairs
                .iter()
                .map(|&(p, q)| (p, q, game.costs(SchedulingPolicy { p, q }), true))
                .collect();
            let summary = json!({
                "method": "exhaustive", "grid": a.grid, "sigma": ex.sigma,
                "ne_pairs": ex.ne_pairs, "advisory": ex.advisory,
            });
            (points, summary)
        }
    };
    s.out.csv(
        "nash_equilibria.csv",
        &["p", "q", "j1", "j2", "undominated"],
        points.iter().map(|(p, q, c, u)| {
            let [j1, j2] = cost_cells(c);
            vec![num(*p), num(*q), j1, j2, u.to_string()]
        }),
    )?;
    let mut checks = Vec::new();
    if let Some(step) = a.check_grid {
        for &(p, q, _, _) in &points {
            let rep = s.timed("deviation_scan", |_| deviation_scan(&game, p, q, step, a.check_tol))?;
            println!(
                "deviation scan at ({p:.5}, {q:.5}): P1 gain {:.3e}, P2 gain {:.3e} -> {}",
                rep.p1_gain,
                rep.p2_gain,
                if rep.passed { "pass" } else { "FAIL" }
            );
            checks.push(rep);
        }
    }
    s.out
        .json("nash.json", &json!({ "search": summary, "deviation_checks": checks }))?;
    for (p, q, c, u) in &points {
        println!(
            "equilibrium p* = {p:.5}, q* = {q:.5}   J1 = {:.4}, J2 = {:.4}{}",
            c.j1,
            c.j2,
            if *u { "" } else { "   (dominated)" }
        );
    }
    s.finish()?;
    if points.is_empty() {
        return Err(CliError::NotConverged("no equilibrium found".into()));
    }
    Ok(())
}

fn simulate(a: &SimulateArgs) -> Result<(), CliError> {
    let mut s = Session::open("simulate", &a.common, a)?;
    let (ric, disc) = s.solved()?;
    let game = SchedulingGame::new(&s.spec, &ric, &disc).with_solver(a.common.solver());
    let pol = match (a.p, a.q) {
        (Some(p), Some(q)) => policy(p, q)?,
        _ => {
            let r = s.timed("nash", |_| nash_iterative(&game, &nash_options(&a.search), (0.5, 0.5)))?;
            if !r.converged {
                return Err(CliError::NotConverged(
                    "equilibrium search did not converge; pass --p and --q".into(),
                ));
            }
            println!("equilibrium policy p* = {:.5}, q* = {:.5}", r.p_star, r.q_star);
            policy(r.p_star, r.q_star)?
        }
    };
    let scheme = match a.scheme {
        SchemeArg::EulerMaruyama => Scheme::EulerMaruyama,
        SchemeArg::Exact => Scheme::Exact,
    };
    let analytic = game.costs(pol);
    if !analytic.is_finite() {
        return Err(CliError::Solver(format!(
            "policy ({}, {}) has unbounded error covariance (spectral radius {:.6})",
            pol.p, pol.q, analytic.rho
        )));
    }
    let (aj1, aj2) = analytic_per_second(&analytic, &s.spec.lambda, pol, s.spec.h);
    let seed = a.common.seed;

    match a.ensemble {
        None => {
            tick_count(a.horizon, s.spec.h)?;
            let log = s.timed("simulate", |s| {
                simulate_trajectories(&s.spec, &ric, pol, a.horizon, seed, scheme)
            })?;
            s.out
                .with_writer("trajectory.csv", |w| log.write_csv(w).map_err(|e| e.to_string()))?;
            let emp = empirical_costs(&log, &s.spec, &s.spec.lambda);
            let (_, sigma) = steady_state(&disc, pol, Solver::Direct)?;
            let n = s.spec.n();
            let sd1 = (0..n).map(|i| sigma[(i, i)].sqrt()).fold(0.0, f64::max);
            let sd2 = (n..2 * n).map(|i| sigma[(i, i)].sqrt()).fold(0.0, f64::max);
            let max_abs = |series: &[Vec<f64>]| series.iter().flatten().fold(0.0f64, |m, v| m.max(v.abs()));
            let (m1, m2) = (max_abs(&log.e1), max_abs(&log.e2));
            s.out.json(
                "simulation.json",
                &json!({
                    "p": pol.p, "q": pol.q, "horizon": a.horizon, "seed": seed, "scheme": scheme,
                    "ticks": log.len(), "transmissions": [emp.n1, emp.n2],
                    "empirical": emp, "analytic_per_second": { "j1": aj1, "j2": aj2 },
                    "max_abs_error": [m1, m2], "steady_state_sd": [sd1, sd2],
                }),
            )?;
            println!("{} ticks, transmissions P1 {} / P2 {}", log.len(), emp.n1, emp.n2);
            println!("empirical J1 = {:.4}, J2 = {:.4} per second", emp.j1, emp.j2);
            println!("analytic  J1 = {aj1:.4}, J2 = {aj2:.4} per second");
            println!(
                "max |e1| = {m1:.4} ({:.2} sd), max |e2| = {m2:.4} ({:.2} sd)",
                m1 / sd1,
                m2 / sd2
            );
        }
        Some(members) => {
            let opts = SimOptions {
                scheme,
                burn_in: a.burn_in,
            };
            let stats = s.timed("ensemble", |s| {
                empirical_covariance(&s.spec, &ric, pol, a.ticks, members, seed, &opts)
            })?;
            let (_, sigma) = steady_state(&disc, pol, Solver::Direct)?;
            let mut all_pass = true;
            let records: Vec<Vec<String>> = entries(&stats.sigma)
                .map(|(i, j, e)| {
                    let an = sigma[(i, j)];
                    let tol = (0.05 * an.abs()).max(3.0 * stats.stderr[(i, j)]);
                    let pass = (e - an).abs() <= tol;
                    all_pass &= pass;
                    vec![
                        i.to_string(),
                        j.to_string(),
                        num(e),
                        num(an),
                        num(stats.stderr[(i, j)]),
                        num(tol),
                        pass.to_string(),
                    ]
                })
                .collect();
            s.out.csv(
                "ensemble_sigma.csv",
                &["i", "j", "empirical", "analytic", "stderr", "tolerance", "pass"],
                records,
            )?;
            let cost_pass = |emp: f64, an: f64| (emp - an).abs() <= 0.05 * an.abs();
            let costs_pass = cost_pass(stats.costs.j1, aj1) && cost_pass(stats.costs.j2, aj2);
            s.out.json(
                "ensemble.json",
                &json!({
                    "p": pol.p, "q": pol.q, "seed": seed, "scheme": scheme,
                    "ensemble": members, "ticks": a.ticks, "burn_in_ticks": stats.burn_in_ticks,
                    "sigma_empirical": rows(&stats.sigma), "sigma_stderr": rows(&stats.stderr),
                    "sigma_analytic": rows(&sigma), "sigma_pass": all_pass,
                    "costs_empirical": stats.costs, "costs_stderr": stats.cost_stderr,
                    "costs_analytic_per_second": { "j1": aj1, "j2": aj2 }, "costs_pass": costs_pass,
                    "transmit_rate": stats.transmit_rate,
                }),
            )?;
            print_matrix("empirical", &stats.sigma);
            print_matrix("analytic", &sigma);
            println!(
                "covariance within max(5%, 3 SE): {}",
                if all_pass { "PASS" } else { "FAIL" }
            );
            println!(
                "costs per second: empirical ({:.3}, {:.3}) analytic ({aj1:.3}, {aj2:.3}) within 5%: {}",
                stats.costs.j1,
                stats.costs.j2,
                if costs_pass { "PASS" } else { "FAIL" }
            );
        }
    }
    s.finish()
}

fn sweep(a: &SweepArgs) -> Result<(), CliError> {
    let mut s = Session::open("sweep", &a.common, a)?;
    let game = s.game()?;
    let (d11, d22) = crate::scheduler::default_sweep_axes();
    let l11 = a.l11.as_deref().map(super::parse_axis).transpose()?.unwrap_or(d11);
    let l22 = a.l22.as_deref().map(super::parse_axis).transpose()?.unwrap_or(d22);
    let opts = nash_options(&a.search);
    let cells = s.timed("sweep", |_| sweep_lambda(&game, &l11, &l22, &opts, (0.5, 0.5)))?;
    s.out.csv(
        "sweep.csv",
        &["l11", "l22", "p_star", "q_star", "converged", "iterations"],
        cells.iter().map(|c| {
            vec![
                num(c.l11),
                num(c.l22),
                num(c.p_star),
                num(c.q_star),
                c.converged.to_string(),
                c.iterations.to_string(),
            ]
        }),
    )?;
    let trend = trend_summary(&cells, l11.len(), l22.len(), a.slack);
    let failed = cells.iter().filter(|c| !c.converged).count();
    s.out.json(
        "sweep.json",
        &json!({ "l11": l11, "l22": l22, "trend": trend, "unconverged_cells": failed }),
    )?;
    println!("{} cells, {} not converged", cells.len(), failed);
    println!("nondecreasing p* along λ11: {:.1}%", 100.0 * trend.p_along_l11);
    println!("nondecreasing q* along λ22: {:.1}%", 100.0 * trend.q_along_l22);
    s.finish()?;
    if failed > 0 {
        return Err(CliError::NotConverged(format!("{failed} sweep cells did not converge")));
    }
    Ok(())
}

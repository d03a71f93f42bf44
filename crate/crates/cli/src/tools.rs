//! Single-shot commands: graph queries, broken-diamond analysis and the
//! M2/M3 exit estimator.

use std::fs::{self, File};
use std::io::{BufWriter, Write};
use std::path::Path;
use std::process::ExitCode;

use rayon::prelude::*;
use serde::Serialize;

use qbra_core::analysis::{
    self as analysis,
    constants, cycle_decomposition, m1_exit_frequencies, pq_start, prelimit_m1_exits,
    supermartingale_diagnostic, KappaAlpha, PqSide, TransitionRun, MIN_PAIRS,
};
use qbra_core::config::{parse_seeds, random_simplex, BuiltTopology, ExperimentConfig};
use qbra_core::fluid::{simulate_broken_diamond, BrokenDiamondOptions};
use qbra_core::graph::{capacity_membership, duplicate_graph, maximal_schedules, minimal_set_covers};
use qbra_core::io::{fmt_f64, params_hash, write_constants_csv, write_cycles_csv, write_exits_csv, write_json, write_pairs_csv};
use qbra_core::presets::preset;
use qbra_core::{CapacityStatus, NodeDynamics, Schedule};

use crate::run::{print_summary, topology_spec, write_manifest, write_summary, CliResult, Failure};
use crate::{AnalyzeArgs, CapacityArgs, DuplicateArgs, GraphArgs, PqArgs};

fn load_topology(args: &GraphArgs) -> CliResult<BuiltTopology> {
    if let Some(path) = &args.config {
        let text = fs::read_to_string(path).map_err(|e| format!("{}: {e}", path.display()))?;
        let cfg: ExperimentConfig = toml::from_str(&text).map_err(|e| format!("{}: {e}", path.display()))?;
        return Ok(cfg.build_topology()?);
    }
    let spec = topology_spec(&args.topology)?.ok_or("topology: give --topology or --config")?;
    let mut cfg = preset("diamond-stable")?;
    cfg.topology = spec;
    Ok(cfg.build_topology()?)
}

fn one_based(s: &Schedule) -> Vec<usize> {
    s.members().iter().map(|i| i + 1).collect()
}

fn print_json<T: Serialize>(value: &T) -> CliResult<()> {
    let stdout = std::io::stdout();
    let mut w = stdout.lock();
    write_json(&mut w, value)?;
    Ok(())
}

#[derive(Serialize)]
struct WeightedSchedule {
    schedule: Vec<usize>,
    weight: f64,
}

#[derive(Serialize)]
struct CapacityOutput {
    status: CapacityStatus,
    /// `null` for the all-zero load.
    load_factor: Option<f64>,
    weights: Vec<WeightedSchedule>,
}

pub fn capacity(args: &CapacityArgs) -> CliResult<ExitCode> {
    let topo = load_topology(&args.graph)?;
    let verdict = capacity_membership(&topo.graph, &args.rho)?;
    let schedules = maximal_schedules(&topo.graph)?;
    let weights = schedules
        .iter()
        .zip(&verdict.weights)
        .filter(|(_, &w)| w > 0.0)
        .map(|(s, &w)| WeightedSchedule { schedule: one_based(s), weight: w })
        .collect();
    print_json(&CapacityOutput {
        status: verdict.status,
        load_factor: verdict.load_factor.is_finite().then_some(verdict.load_factor),
        weights,
    })?;
    Ok(ExitCode::SUCCESS)
}

#[derive(Serialize)]
struct CoverOutput {
    schedules: Vec<Vec<usize>>,
    /// Indices into `schedules`, 0-based.
    covers: Vec<Vec<usize>>,
    unique: bool,
    excluded: Vec<usize>,
    disjoint_from_all_others: Vec<usize>,
    instability_signature: bool,
}

pub fn cover(args: &GraphArgs) -> CliResult<ExitCode> {
    let topo = load_topology(args)?;
    let r = minimal_set_covers(&topo.graph)?;
    print_json(&CoverOutput {
        schedules: r.schedules.iter().map(one_based).collect(),
        covers: r.covers.clone(),
        unique: r.unique,
        excluded: r.excluded.clone(),
        disjoint_from_all_others: r.disjoint_from_all_others.clone(),
        instability_signature: r.has_instability_signature(),
    })?;
    Ok(ExitCode::SUCCESS)
}

pub fn duplicate(args: &DuplicateArgs) -> CliResult<ExitCode> {
    let topo = load_topology(&args.graph)?;
    let g = &topo.graph;
    let d = duplicate_graph(g, args.k, &vec![(); g.n()])?;
    let text = d.graph.to_text();
    match &args.out {
        Some(path) => fs::write(path, &text).map_err(|e| format!("{}: {e}", path.display()))?,
        None => print!("{text}"),
    }
    let base = maximal_schedules(g)?.len();
    let dup = if d.graph.n() <= 30 { maximal_schedules(&d.graph)?.len().to_string() } else { "not enumerated".into() };
    eprintln!("{} nodes -> {} nodes; maximal schedules {base} -> {dup}", g.n(), d.graph.n());
    Ok(ExitCode::SUCCESS)
}

#[derive(Serialize)]
struct AnalyzeSettings<'a> {
    params: KappaAlpha,
    m: &'a [f64],
    segments: usize,
    m1_exits: usize,
    r: f64,
    gamma: f64,
    seeds: &'a [u64],
}

fn emit<F>(dir: &Path, files: &mut Vec<String>, name: String, body: F) -> CliResult<()>
where
    F: FnOnce(&mut BufWriter<File>) -> std::io::Result<()>,
{
    let mut w = BufWriter::new(File::create(dir.join(&name))?);
    body(&mut w)?;
    w.flush()?;
    files.push(name);
    Ok(())
}

pub fn analyze(args: &AnalyzeArgs) -> CliResult<ExitCode> {
    let params = match &args.lambda {
        Some(l) => KappaAlpha::from_lambdas(l)?,
        None => KappaAlpha {
            kappa1: args.kappa[0],
            kappa2: args.kappa[1],
            kappa3: args.kappa[2],
            kappa6: args.kappa[3],
            alpha: args.alpha,
            rho: args.rho,
        },
    };
    let c = constants(&params)?;
    let seeds = parse_seeds(&args.seeds)?;
    let dir = args.out.join(&args.name);
    fs::create_dir_all(&dir).map_err(|e| format!("{}: {e}", dir.display()))?;
    let mut files = Vec::new();
    emit(&dir, &mut files, "constants.csv".into(), |w| write_constants_csv(w, &c, &args.m))?;

    println!("loads    {:?}", c.loads.map(fmt_f64));
    println!("C_T {}  C_L {}  C_LT {}  theta {}", fmt_f64(c.c_t), fmt_f64(c.c_l), fmt_f64(c.c_lt), fmt_f64(c.theta));
    println!("beta_max {}  delta(rho) {}  delta {}", fmt_f64(c.beta_max), fmt_f64(c.delta_rho), fmt_f64(c.delta));
    for &m in &args.m {
        let hint = c.rho_star_hint(m).map_or_else(|| "none".to_string(), fmt_f64);
        println!("alpha_{m} {}  rho* hint {hint}", fmt_f64(c.alpha_m(m)));
    }
    for b in c.banners() {
        println!("note: {b}");
    }

    let mut failures = Vec::new();
    if args.segments > 0 {
        let loads = c.loads;
        let outcomes: Vec<(u64, CliResult<(Vec<String>, Vec<(&'static str, String)>)>)> = seeds
            .par_iter()
            .map(|&seed| {
                let run = || -> CliResult<(Vec<String>, Vec<(&'static str, String)>)> {
                    let q0 = random_simplex(6, seed);
                    let opts = BrokenDiamondOptions { segment_budget: Some(args.segments), ..Default::default() };
                    let path = simulate_broken_diamond(&loads, &q0, 1e300, seed, &opts)?;
                    let report = cycle_decomposition(&path, Some(&c));
                    let mut files = Vec::new();
                    emit(&dir, &mut files, format!("seed-{seed}.cycles.csv"), |w| write_cycles_csv(w, &report))?;
                    emit(&dir, &mut files, format!("seed-{seed}.pairs.csv"), |w| write_pairs_csv(w, &report))?;
                    let mut fields = vec![
                        ("cycles", report.cycles.len().to_string()),
                        ("pairs", report.pairs.len().to_string()),
                        ("violations", report.violations.len().to_string()),
                        (
                            "weakly_balanced_pair_fraction",
                            report.weakly_balanced_pair_fraction().map_or_else(String::new, fmt_f64),
                        ),
                    ];
                    if report.pairs.len() > MIN_PAIRS {
                        let t: Vec<f64> = report.pairs.iter().map(|p| p.t).collect();
                        let l: Vec<f64> = report.pairs.iter().map(|p| p.l).collect();
                        let reports = args
                            .m
                            .iter()
                            .map(|&m| supermartingale_diagnostic(&t, &l, m, &c, seed))
                            .collect::<qbra_core::Result<Vec<_>>>()?;
                        let first = &reports[0];
                        fields.push(("ratio_ci_hi", fmt_f64(first.ci.hi)));
                        fields.push(("alpha_m", fmt_f64(first.alpha_m)));
                        fields.push(("supermartingale_pass", first.pass.to_string()));
                        fields.push(("growth_slope", fmt_f64(first.growth_slope)));
                        emit(&dir, &mut files, format!("seed-{seed}.supermartingale.json"), |w| {
                            write_json(w, &reports)
                        })?;
                    }
                    Ok((files, fields))
                };
                (seed, run())
            })
            .collect();
        let mut header: Vec<&'static str> = Vec::new();
        let mut rows = Vec::new();
        for (seed, r) in outcomes {
            match r {
                Ok((f, fields)) => {
                    files.extend(f);
                    for (k, _) in &fields {
                        if !header.contains(k) {
                            header.push(k);
                        }
                    }
                    rows.push((seed, Some(fields)));
                }
                Err(e) => {
                    eprintln!("seed {seed}: {e}");
                    failures.push(Failure { seed, error: e.to_string() });
                    rows.push((seed, None));
                }
            }
        }
        write_summary(&dir.join("summary.csv"), &header, &rows)?;
        files.push("summary.csv".into());
        print_summary(&header, &rows);
        println!("note: finite-horizon growth diagnostic; not a limit statement");
    }

    if args.m1_exits > 0 {
        let dyns: Vec<NodeDynamics> = c.loads.iter().map(|&l| NodeDynamics::new(l, args.gamma)).collect();
        let q0 = [0.2, 0.2, 0.3, 0.2, 0.2, 0.3];
        let counts = prelimit_m1_exits(&dyns, &q0, args.r, args.m1_exits, seeds[0], &TransitionRun::default())?;
        let f = m1_exit_frequencies(&counts)?;
        emit(&dir, &mut files, "m1_exits.csv".into(), |w| write_exits_csv(w, &f))?;
        for row in &f.rows {
            println!(
                "M1 -> {}: {} ({}) CI [{}, {}]",
                row.period,
                fmt_f64(row.frequency),
                row.count,
                fmt_f64(row.ci.lo),
                fmt_f64(row.ci.hi)
            );
        }
        println!("{} exits, {} runs without a detected exit", f.exits, f.discarded);
    }

    let settings = AnalyzeSettings {
        params,
        m: &args.m,
        segments: args.segments,
        m1_exits: args.m1_exits,
        r: args.r,
        gamma: args.gamma,
        seeds: &seeds,
    };
    write_manifest(&dir, &args.name, "analyze", &params_hash(&settings), &seeds, &files, &failures)?;
    Ok(if failures.is_empty() { ExitCode::SUCCESS } else { ExitCode::FAILURE })
}

#[derive(Serialize)]
struct PqSettings<'a> {
    side: &'a str,
    lambdas: &'a [f64],
    gamma: f64,
    ladder: &'a [f64],
    reps: usize,
    seed: u64,
}

pub fn estimate_pq(args: &PqArgs) -> CliResult<ExitCode> {
    let side = match args.side.to_ascii_lowercase().as_str() {
        "m2" => PqSide::M2,
        "m3" => PqSide::M3,
        other => return Err(format!("side: expected m2 or m3, got `{other}`").into()),
    };
    let lambdas = match &args.lambda {
        Some(l) => l.clone(),
        None => KappaAlpha { kappa1: 0.4, kappa2: 0.4, kappa3: 0.4, kappa6: 0.2, alpha: 0.05, rho: 0.99 }
            .loads()
            .to_vec(),
    };
    let dyns: Vec<NodeDynamics> = lambdas.iter().map(|&l| NodeDynamics::new(l, args.gamma)).collect();
    let est = analysis::estimate_pq(&dyns, side, &pq_start(side), &args.ladder, args.reps, args.seed, &TransitionRun::default())?;
    let dir = args.out.join(&args.name);
    fs::create_dir_all(&dir).map_err(|e| format!("{}: {e}", dir.display()))?;
    let mut files = Vec::new();
    emit(&dir, &mut files, "pq.json".into(), |w| write_json(w, &est))?;
    for rung in &est.rungs {
        println!(
            "R = {}: to M1 {}, to other {}, discarded {}, p = {}",
            fmt_f64(rung.r),
            rung.to_m1,
            rung.to_other,
            rung.discarded,
            fmt_f64(rung.p_bar)
        );
    }
    println!(
        "p_bar {}  q_bar {}  95% CI [{}, {}]",
        fmt_f64(est.p_bar),
        fmt_f64(est.q_bar),
        fmt_f64(est.ci.lo),
        fmt_f64(est.ci.hi)
    );
    let settings = PqSettings {
        side: &args.side,
        lambdas: &lambdas,
        gamma: args.gamma,
        ladder: &args.ladder,
        reps: args.reps,
        seed: args.seed,
    };
    write_manifest(&dir, &args.name, "estimate-pq", &params_hash(&settings), &[args.seed], &files, &[])?;
    Ok(ExitCode::SUCCESS)
}

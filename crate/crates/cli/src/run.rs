//! Replication orchestration for `simulate`, `fluid` and `fastmix`.

use std::collections::BTreeMap;
use std::error::Error as StdError;
use std::fs::{self, File};
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::time::{SystemTime, UNIX_EPOCH};

use rayon::prelude::*;
use serde::Serialize;
use sha2::{Digest, Sha256};

use qbra_core::analysis::{
    constants, cycle_decomposition, detect_periods, node_average_slope, post_period_increments, sawtooth_ratios,
    supermartingale_diagnostic, DetectOptions, KappaAlpha, PeriodScheme, MIN_PAIRS,
};
use qbra_core::config::{parse_seeds, BuiltTopology, Engine, ExperimentConfig, TopologySpec};
use qbra_core::fastmix::FastMix;
use qbra_core::fluid::{lyapunov, simulate_broken_diamond, simulate_partite, BrokenDiamondOptions, PartiteOptions};
use qbra_core::io::{
    fmt_f64, write_cycles_csv, write_json, write_node_average_csv, write_pairs_csv, write_path_csv,
    write_periods_csv, write_trace_csv, write_trajectory_csv, TraceSidecar,
};
use qbra_core::presets::{preset, sec6_lambdas};
use qbra_core::stochastic::{scaled_trace, JumpChain, SimOptions, SystemState};
use qbra_core::{NodeDynamics, Period};

use crate::{RunArgs, TopologyArgs};

pub type CliResult<T> = Result<T, Box<dyn StdError + Send + Sync>>;

/// Loads the experiment for `engine` and applies the command line overrides.
pub fn resolve_config(args: &RunArgs, engine: Engine) -> CliResult<ExperimentConfig> {
    let mut cfg = if let Some(path) = &args.config {
        let text = fs::read_to_string(path).map_err(|e| format!("{}: {e}", path.display()))?;
        let mut cfg: ExperimentConfig =
            toml::from_str(&text).map_err(|e| format!("{}: {e}", path.display()))?;
        // Relative graph files are read next to the experiment file.
        if let (Some(file), Some(dir)) = (&cfg.topology.file, path.parent()) {
            if file.is_relative() {
                cfg.topology.file = Some(dir.join(file));
            }
        }
        cfg
    } else if let Some(name) = &args.preset {
        preset(name)?
    } else {
        match engine {
            Engine::Prelimit => preset("paper-sec6")?,
            Engine::Fluid => preset("diamond-stable")?,
            Engine::Fastmix => {
                let mut c = preset("diamond-stable")?;
                c.name = "diamond-fastmix".into();
                c.horizon = 10.0;
                c.seeds = (1..=10).collect();
                c
            }
        }
    };
    cfg.engine = engine;
    if let Some(s) = &args.seeds {
        cfg.seeds = parse_seeds(s)?;
    }
    if let Some(r) = args.r {
        cfg.r = r;
    }
    if let Some(h) = args.horizon {
        cfg.horizon = h;
    }
    if let Some(spec) = topology_spec(&args.topology)? {
        let name = spec.builtin.clone();
        if args.config.is_none() && args.preset.is_none() {
            let label = name.clone().or_else(|| {
                spec.file.as_ref().and_then(|f| f.file_stem()).map(|s| s.to_string_lossy().into_owned())
            });
            cfg.name = format!("{}-{}", engine_label(engine), label.unwrap_or_default());
        }
        // Initial queues belong to the replaced graph.
        cfg.initial = Default::default();
        cfg.topology = spec;
        if args.lambda.is_none() {
            cfg.dynamics.lambda = default_lambdas(name.as_deref(), engine, &cfg.topology);
        }
    }
    if let Some(l) = &args.lambda {
        cfg.dynamics.lambda = l.clone();
    }
    if let Some(g) = args.gamma {
        cfg.dynamics.gamma = g;
    }
    if engine == Engine::Prelimit && cfg.horizon.fract() != 0.0 {
        return Err("horizon: the pre-limit engine counts whole ticks".into());
    }
    cfg.validate()?;
    Ok(cfg)
}

fn engine_label(engine: Engine) -> &'static str {
    match engine {
        Engine::Prelimit => "simulate",
        Engine::Fluid => "fluid",
        Engine::Fastmix => "fastmix",
    }
}

/// Names a built-in topology or, failing that, a graph file.
pub fn topology_spec(args: &TopologyArgs) -> CliResult<Option<TopologySpec>> {
    const BUILTIN: &[&str] =
        &["broken-diamond", "diamond", "complete-partite", "complete", "cycle", "empty", "star-of-cliques"];
    let Some(name) = &args.topology else {
        return Ok(None);
    };
    let mut spec = TopologySpec { n: args.n, sizes: args.sizes.clone().unwrap_or_default(), ..Default::default() };
    if BUILTIN.contains(&name.as_str()) {
        spec.builtin = Some(name.clone());
    } else if Path::new(name).is_file() {
        spec.file = Some(PathBuf::from(name));
    } else {
        return Err(format!("topology: `{name}` is neither a built-in topology nor a graph file").into());
    }
    Ok(Some(spec))
}

fn default_lambdas(builtin: Option<&str>, engine: Engine, topo: &TopologySpec) -> Vec<f64> {
    match (builtin, engine) {
        (Some("broken-diamond"), Engine::Fluid) => {
            KappaAlpha { kappa1: 0.4, kappa2: 0.4, kappa3: 0.4, kappa6: 0.2, alpha: 0.05, rho: 0.99 }.loads().to_vec()
        }
        (Some("broken-diamond"), _) => sec6_lambdas(),
        // ρ = 0.9 split evenly over the components.
        (Some("diamond"), _) => vec![0.9 / topo.sizes.len().max(3) as f64],
        (Some("complete-partite"), _) => vec![0.9 / topo.sizes.len().max(1) as f64],
        _ => vec![0.3],
    }
}

/// What one seed produced: file names relative to the run directory and the
/// summary cells.
struct SeedOutcome {
    files: Vec<String>,
    fields: Vec<(&'static str, String)>,
}

#[derive(Serialize)]
struct FileRecord {
    path: String,
    sha256: String,
}

#[derive(Serialize)]
pub struct Failure {
    pub seed: u64,
    pub error: String,
}

#[derive(Serialize)]
struct Manifest<'a> {
    name: &'a str,
    command: &'a str,
    config_hash: &'a str,
    seeds: &'a [u64],
    versions: BTreeMap<&'static str, &'static str>,
    created_unix: u64,
    workers: usize,
    files: Vec<FileRecord>,
    failures: &'a [Failure],
}

/// Writes `manifest.json`: the only output that carries a timestamp.
pub fn write_manifest(
    dir: &Path,
    name: &str,
    command: &str,
    config_hash: &str,
    seeds: &[u64],
    files: &[String],
    failures: &[Failure],
) -> CliResult<()> {
    let manifest = Manifest {
        name,
        command,
        config_hash,
        seeds,
        versions: BTreeMap::from([("qbra-core", qbra_core::VERSION), ("qbra-cli", env!("CARGO_PKG_VERSION"))]),
        created_unix: SystemTime::now().duration_since(UNIX_EPOCH).map_or(0, |d| d.as_secs()),
        workers: rayon::current_num_threads(),
        files: files
            .iter()
            .map(|f| {
                let bytes = fs::read(dir.join(f)).unwrap_or_default();
                FileRecord { path: f.clone(), sha256: hex::encode(Sha256::digest(&bytes)) }
            })
            .collect(),
        failures,
    };
    let mut w = BufWriter::new(File::create(dir.join("manifest.json"))?);
    write_json(&mut w, &manifest)?;
    w.flush()?;
    Ok(())
}

struct Context<'a> {
    cfg: &'a ExperimentConfig,
    topo: BuiltTopology,
    params: Vec<NodeDynamics>,
    lambdas: Vec<f64>,
    mus: Vec<f64>,
    dir: PathBuf,
}

pub fn execute(args: &RunArgs, engine: Engine) -> CliResult<ExitCode> {
    let cfg = resolve_config(args, engine)?;
    let dir = args.out.join(&cfg.name);
    fs::create_dir_all(&dir).map_err(|e| format!("{}: {e}", dir.display()))?;
    let topo = cfg.build_topology()?;
    let params = cfg.node_dynamics(&topo)?;
    let ctx = Context {
        cfg: &cfg,
        lambdas: params.iter().map(|p| p.lambda).collect(),
        mus: params.iter().map(|p| p.mu).collect(),
        topo,
        params,
        dir,
    };
    fs::write(ctx.dir.join("config.toml"), cfg.to_toml())?;

    let chain = match engine {
        Engine::Prelimit => Some(JumpChain::new(&ctx.topo.graph, &ctx.params)?),
        _ => None,
    };
    let fastmix = match engine {
        Engine::Fastmix => Some(FastMix::new(&ctx.topo.graph)?),
        _ => None,
    };
    eprintln!("{}: {} seed(s) -> {}", cfg.name, cfg.seeds.len(), ctx.dir.display());
    let outcomes: Vec<(u64, CliResult<SeedOutcome>)> = cfg
        .seeds
        .par_iter()
        .map(|&seed| {
            let r = match engine {
                Engine::Prelimit => prelimit(&ctx, chain.as_ref().expect("chain"), seed),
                Engine::Fluid => fluid(&ctx, seed),
                Engine::Fastmix => fastmix_run(&ctx, fastmix.as_ref().expect("fastmix"), seed),
            };
            (seed, r)
        })
        .collect();

    let mut files = vec!["config.toml".to_string()];
    let mut failures = Vec::new();
    let mut header: Vec<&'static str> = Vec::new();
    let mut rows: Vec<(u64, Option<Vec<(&'static str, String)>>)> = Vec::new();
    for (seed, r) in outcomes {
        match r {
            Ok(o) => {
                files.extend(o.files);
                for (k, _) in &o.fields {
                    if !header.contains(k) {
                        header.push(k);
                    }
                }
                rows.push((seed, Some(o.fields)));
            }
            Err(e) => {
                eprintln!("seed {seed}: {e}");
                failures.push(Failure { seed, error: e.to_string() });
                rows.push((seed, None));
            }
        }
    }
    write_summary(&ctx.dir.join("summary.csv"), &header, &rows)?;
    files.push("summary.csv".into());

    let command = match engine {
        Engine::Prelimit => "simulate",
        Engine::Fluid => "fluid",
        Engine::Fastmix => "fastmix",
    };
    write_manifest(&ctx.dir, &cfg.name, command, &cfg.hash(), &cfg.seeds, &files, &failures)?;

    print_summary(&header, &rows);
    if failures.is_empty() {
        Ok(ExitCode::SUCCESS)
    } else {
        eprintln!("{} of {} seed(s) failed", failures.len(), cfg.seeds.len());
        Ok(ExitCode::FAILURE)
    }
}

pub fn write_summary(
    path: &Path,
    header: &[&'static str],
    rows: &[(u64, Option<Vec<(&'static str, String)>>)],
) -> CliResult<()> {
    let mut w = BufWriter::new(File::create(path)?);
    let mut head = vec!["seed", "status"];
    head.extend_from_slice(header);
    writeln!(w, "{}", head.join(","))?;
    for (seed, fields) in rows {
        let mut cells = vec![seed.to_string()];
        match fields {
            Some(f) => {
                cells.push("ok".into());
                for k in header {
                    cells.push(f.iter().find(|(name, _)| name == k).map(|(_, v)| v.clone()).unwrap_or_default());
                }
            }
            None => {
                cells.push("failed".into());
                cells.extend(header.iter().map(|_| String::new()));
            }
        }
        writeln!(w, "{}", cells.join(","))?;
    }
    w.flush()?;
    Ok(())
}

pub fn print_summary(header: &[&'static str], rows: &[(u64, Option<Vec<(&'static str, String)>>)]) {
    for (seed, fields) in rows {
        match fields {
            Some(f) => {
                let cells: Vec<String> = header
                    .iter()
                    .filter_map(|k| f.iter().find(|(name, _)| name == k).map(|(n, v)| format!("{n}={v}")))
                    .collect();
                println!("seed {seed}: {}", cells.join(" "));
            }
            None => println!("seed {seed}: failed"),
        }
    }
}

fn emit<F>(ctx: &Context, files: &mut Vec<String>, name: String, body: F) -> CliResult<()>
where
    F: FnOnce(&mut BufWriter<File>) -> std::io::Result<()>,
{
    let path = ctx.dir.join(&name);
    let mut w = BufWriter::new(File::create(&path).map_err(|e| format!("{}: {e}", path.display()))?);
    body(&mut w)?;
    w.flush()?;
    files.push(name);
    Ok(())
}

fn scheme(topo: &BuiltTopology) -> CliResult<PeriodScheme> {
    Ok(if topo.broken_diamond {
        PeriodScheme::broken_diamond()
    } else if let Some(c) = &topo.components {
        PeriodScheme::from_components(c)
    } else {
        PeriodScheme::from_graph(&topo.graph)?
    })
}

fn prelimit(ctx: &Context, chain: &JumpChain, seed: u64) -> CliResult<SeedOutcome> {
    let cfg = ctx.cfg;
    let active: Vec<usize> = cfg.initial.active.iter().map(|a| a - 1).collect();
    let state = SystemState::new(cfg.initial_x(&ctx.topo)?).with_active(&ctx.topo.graph, &active)?;
    let trace = chain.simulate(state, cfg.horizon as u64, seed, &SimOptions { stride: cfg.stride, event_window: None })?;
    let mut files = Vec::new();
    let r = cfg.r;
    emit(ctx, &mut files, format!("seed-{seed}.trace.csv"), |w| write_trace_csv(w, &trace, r))?;
    emit(ctx, &mut files, format!("seed-{seed}.node_average.csv"), |w| write_node_average_csv(w, &trace, r))?;
    emit(ctx, &mut files, format!("seed-{seed}.trace.json"), |w| write_json(w, &TraceSidecar::new(&trace, r, cfg)))?;

    let mut fields = vec![
        ("ticks", trace.horizon.to_string()),
        ("node_average_slope", fmt_f64(node_average_slope(&trace))),
        ("final_node_average", fmt_f64(trace.node_average(trace.len() - 1))),
    ];
    if cfg.analysis.periods {
        let samples = scaled_trace(&trace, r);
        let scheme = scheme(&ctx.topo)?;
        let iv = detect_periods(&samples, &ctx.lambdas, &ctx.mus, &scheme, &DetectOptions { window: cfg.analysis.window });
        emit(ctx, &mut files, format!("seed-{seed}.periods.csv"), |w| write_periods_csv(w, &iv))?;
        fields.push(("intervals", iv.len().to_string()));
        let saw = sawtooth_ratios(&samples, &iv, &scheme, r);
        fields.push(("sawtooth_cycles", saw.cycles.to_string()));
        fields.push(("sawtooth_median_ratio", fmt_f64(saw.median_ratio)));
        if ctx.topo.broken_diamond {
            let incs = post_period_increments(&samples, &iv, Period::M4);
            let mean = if incs.is_empty() { f64::NAN } else { incs.iter().sum::<f64>() / incs.len() as f64 };
            fields.push(("m4_intervals", incs.len().to_string()));
            fields.push(("mean_post_m4_increment", fmt_f64(mean)));
        }
    }
    Ok(SeedOutcome { files, fields })
}

fn fluid(ctx: &Context, seed: u64) -> CliResult<SeedOutcome> {
    let cfg = ctx.cfg;
    let q0 = cfg.initial_q(&ctx.topo, seed)?;
    let mut files = Vec::new();
    let mut fields = Vec::new();
    if let Some(comps) = &ctx.topo.components {
        let opts = PartiteOptions { start: cfg.fluid.start.map(|s| s as usize - 1), ..Default::default() };
        let path = simulate_partite(comps, &ctx.lambdas, &ctx.mus, &q0, cfg.horizon, seed, &opts)?;
        emit(ctx, &mut files, format!("seed-{seed}.path.csv"), |w| write_path_csv(w, &path))?;
        let rho: f64 = comps
            .iter()
            .map(|c| c.iter().map(|&i| ctx.lambdas[i] / ctx.mus[i]).fold(0.0, f64::max))
            .sum();
        let l0 = lyapunov(&q0, comps, &ctx.mus);
        fields.push(("termination", format!("{:?}", path.termination).to_lowercase()));
        fields.push(("segments", path.segments.len().to_string()));
        fields.push(("end_time", fmt_f64(path.end_time())));
        fields.push(("l0", fmt_f64(l0)));
        fields.push(("rho", fmt_f64(rho)));
        if rho < 1.0 {
            let bound = l0 / (1.0 - rho);
            fields.push(("drain_bound", fmt_f64(bound)));
            fields.push(("within_bound", (path.end_time() <= bound + 1e-9).to_string()));
        }
        return Ok(SeedOutcome { files, fields });
    }
    if ctx.mus.iter().any(|&m| m != 1.0) {
        return Err("dynamics.mu: the broken-diamond fluid engine assumes unit service rates".into());
    }
    let start = match cfg.fluid.start {
        None => Period::M1,
        Some(k @ 1..=4) => Period(k),
        Some(k) => return Err(format!("fluid.start: no period M{k} on the broken diamond").into()),
    };
    let opts = BrokenDiamondOptions {
        m2_to_m1: cfg.fluid.m2_to_m1,
        m3_to_m1: cfg.fluid.m3_to_m1,
        start,
        allow_tie: cfg.fluid.allow_tie,
        segment_budget: cfg.fluid.segment_budget,
        ..Default::default()
    };
    let path = simulate_broken_diamond(&ctx.lambdas, &q0, cfg.horizon, seed, &opts)?;
    emit(ctx, &mut files, format!("seed-{seed}.path.csv"), |w| write_path_csv(w, &path))?;
    fields.push(("termination", format!("{:?}", path.termination).to_lowercase()));
    fields.push(("segments", path.segments.len().to_string()));
    fields.push(("end_time", fmt_f64(path.end_time())));
    if cfg.analysis.cycles {
        let consts = KappaAlpha::from_lambdas(&ctx.lambdas).and_then(|k| constants(&k)).ok();
        let report = cycle_decomposition(&path, consts.as_ref());
        emit(ctx, &mut files, format!("seed-{seed}.cycles.csv"), |w| write_cycles_csv(w, &report))?;
        emit(ctx, &mut files, format!("seed-{seed}.pairs.csv"), |w| write_pairs_csv(w, &report))?;
        fields.push(("cycles", report.cycles.len().to_string()));
        fields.push(("pairs", report.pairs.len().to_string()));
        fields.push(("violations", report.violations.len().to_string()));
        if let Some(f) = report.weakly_balanced_pair_fraction() {
            fields.push(("weakly_balanced_pair_fraction", fmt_f64(f)));
        }
        if let Some(c) = &consts {
            if report.pairs.len() > MIN_PAIRS {
                let t: Vec<f64> = report.pairs.iter().map(|p| p.t).collect();
                let l: Vec<f64> = report.pairs.iter().map(|p| p.l).collect();
                let s = supermartingale_diagnostic(&t, &l, cfg.analysis.m, c, seed)?;
                fields.push(("ratio_ci_hi", fmt_f64(s.ci.hi)));
                fields.push(("alpha_m", fmt_f64(s.alpha_m)));
                fields.push(("growth_slope", fmt_f64(s.growth_slope)));
                emit(ctx, &mut files, format!("seed-{seed}.supermartingale.json"), |w| write_json(w, &s))?;
            }
        }
    }
    Ok(SeedOutcome { files, fields })
}

fn fastmix_run(ctx: &Context, fm: &FastMix, seed: u64) -> CliResult<SeedOutcome> {
    let cfg = ctx.cfg;
    let q0 = cfg.initial_q(&ctx.topo, seed)?;
    let traj = fm.integrate(&q0, &ctx.lambdas, &ctx.mus, &cfg.fastmix.h, cfg.horizon, cfg.fastmix.dt)?;
    let mut files = Vec::new();
    emit(ctx, &mut files, format!("seed-{seed}.trajectory.csv"), |w| write_trajectory_csv(w, &traj))?;
    let last = traj.samples.last().expect("trajectories start with Q0");
    let fields = vec![
        ("steps", (traj.samples.len() - 1).to_string()),
        ("end_time", fmt_f64(last.t)),
        ("boundary", traj.boundary.map_or_else(String::new, fmt_f64)),
        ("final_total_q", fmt_f64(last.q.iter().sum())),
    ];
    Ok(SeedOutcome { files, fields })
}

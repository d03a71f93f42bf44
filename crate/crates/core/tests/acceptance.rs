//! Acceptance criteria 1 to 10. Run with
//! `cargo test -p qbra-core --test acceptance -- --nocapture` to see the
//! PASS/FAIL line of every criterion.

use std::fs;
use std::path::PathBuf;

use qbra_core::analysis::{
    constants, cycle_decomposition, detect_periods, m1_exit_frequencies, node_average_slope,
    post_period_increments, prelimit_m1_exits, sawtooth_ratios, supermartingale_diagnostic, DetectOptions,
    KappaAlpha, PeriodScheme, TransitionRun,
};
use qbra_core::config::random_simplex;
use qbra_core::fastmix::{pi_stationary, RateFunctionSpec};
use qbra_core::fluid::{lyapunov, simulate_broken_diamond, simulate_partite, BrokenDiamondOptions, Termination};
use qbra_core::graph::{capacity_membership, duplicate_graph, enumerate_independent_sets, maximal_schedules};
use qbra_core::presets::{preset, sec6_lambdas};
use qbra_core::stats::{mean, total_variation};
use qbra_core::stochastic::{
    activity_occupancy, backoff_bound, backoff_monte_carlo, empirical_queue_law, scaled_trace,
    single_node_stationary, JumpChain, NodeDynamics, Occupancy, Release, SimOptions, SystemState,
};
use qbra_core::{InterferenceGraph, Period};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

fn report(criterion: u32, ok: bool, detail: String) {
    println!("{} criterion {criterion}: {detail}", if ok { "PASS" } else { "FAIL" });
    assert!(ok, "criterion {criterion} failed: {detail}");
}

fn corpus() -> Vec<(String, InterferenceGraph)> {
    let dir = PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("tests/corpus");
    let mut files: Vec<PathBuf> = fs::read_dir(&dir)
        .expect("corpus directory")
        .map(|e| e.expect("corpus entry").path())
        .filter(|p| p.extension().is_some_and(|e| e == "toml"))
        .collect();
    files.sort();
    files
        .into_iter()
        .map(|p| {
            let name = p.file_stem().unwrap().to_string_lossy().into_owned();
            let g = InterferenceGraph::parse(&fs::read_to_string(&p).unwrap()).unwrap();
            (name, g)
        })
        .collect()
}

#[test]
fn criterion_01_m1_exit_law() {
    let params: Vec<NodeDynamics> = sec6_lambdas().into_iter().map(|l| NodeDynamics::new(l, 2.0)).collect();
    let q0 = [0.2, 0.2, 0.3, 0.2, 0.2, 0.3];
    let counts = prelimit_m1_exits(&params, &q0, 1e4, 3000, 1, &TransitionRun::default()).unwrap();
    let f = m1_exit_frequencies(&counts).unwrap();
    let target = [(Period::M2, 0.375), (Period::M3, 0.375), (Period::M4, 0.25)];
    let ok = f.exits >= 1000 && target.iter().all(|&(p, v)| (f.frequency(p) - v).abs() <= 0.03);
    report(
        1,
        ok,
        format!(
            "{} exits ({} discarded), M2 {:.4} M3 {:.4} M4 {:.4} vs (0.375, 0.375, 0.25) ± 0.03",
            f.exits,
            f.discarded,
            f.frequency(Period::M2),
            f.frequency(Period::M3),
            f.frequency(Period::M4)
        ),
    );
}

#[test]
fn criterion_02_growth_pattern() {
    let cfg = preset("paper-sec6").unwrap();
    let topo = cfg.build_topology().unwrap();
    let params = cfg.node_dynamics(&topo).unwrap();
    let x0 = cfg.initial_x(&topo).unwrap();
    let chain = JumpChain::new(&topo.graph, &params).unwrap();
    let lambdas: Vec<f64> = params.iter().map(|p| p.lambda).collect();
    let mus: Vec<f64> = params.iter().map(|p| p.mu).collect();
    let scheme = PeriodScheme::broken_diamond();
    assert_eq!(cfg.seeds.len(), 10);
    assert!(cfg.horizon >= 5e7);

    let per_seed: Vec<(f64, Vec<f64>, f64)> = cfg
        .seeds
        .par_iter()
        .map(|&seed| {
            let trace =
                chain.simulate(SystemState::new(x0.clone()), cfg.horizon as u64, seed, &SimOptions::default()).unwrap();
            let slope = node_average_slope(&trace);
            let samples = scaled_trace(&trace, cfg.r);
            let iv = detect_periods(&samples, &lambdas, &mus, &scheme, &DetectOptions { window: Some(10) });
            let incs = post_period_increments(&samples, &iv, Period::M4);
            let saw = sawtooth_ratios(&samples, &iv, &scheme, cfg.r);
            (slope, incs, saw.median_ratio)
        })
        .collect();
    let positive = per_seed.iter().filter(|s| s.0 > 0.0).count();
    let incs: Vec<f64> = per_seed.iter().flat_map(|s| s.1.iter().copied()).collect();
    let mean_inc = mean(&incs);
    let min_saw = per_seed.iter().map(|s| s.2).fold(f64::INFINITY, f64::min);
    let ok = positive >= 8 && !incs.is_empty() && mean_inc > 0.0 && min_saw > 5.0;
    report(
        2,
        ok,
        format!(
            "positive slope in {positive}/10 seeds, mean post-M4 increment {mean_inc:.4} over {} intervals, \
             smallest per-seed median sawtooth ratio {min_saw:.1} (finite-horizon growth diagnostic; not a limit statement)",
            incs.len()
        ),
    );
}

#[test]
fn criterion_03_diamond_drains() {
    let (g, comps) = InterferenceGraph::diamond(3, &[2]).unwrap();
    let n = g.n();
    let lambdas = vec![0.3; n];
    let mus = vec![1.0; n];
    let rho = 0.9;
    let mut worst = f64::NEG_INFINITY;
    let mut drained = 0;
    for seed in 1..=100 {
        let q0 = random_simplex(n, seed);
        let l0 = lyapunov(&q0, &comps, &mus);
        let path = simulate_partite(&comps, &lambdas, &mus, &q0, 100.0, seed, &Default::default()).unwrap();
        if path.termination == Termination::Drained {
            drained += 1;
        }
        worst = worst.max(path.end_time() - l0 / (1.0 - rho));
    }
    let ok = drained == 100 && worst <= 1e-9;
    report(3, ok, format!("{drained}/100 paths drained, max(T_drain − L(0)/(1−ρ)) = {worst:.3e}"));
}

fn rho99() -> KappaAlpha {
    KappaAlpha { kappa1: 0.4, kappa2: 0.4, kappa3: 0.4, kappa6: 0.2, alpha: 0.05, rho: 0.99 }
}

fn rho99_report() -> qbra_core::analysis::CycleReport {
    let p = rho99();
    let c = constants(&p).unwrap();
    let path = simulate_broken_diamond(
        &p.loads(),
        &[0.1, 0.1, 0.3, 0.1, 0.1, 0.3],
        1e300,
        7,
        &BrokenDiamondOptions { segment_budget: Some(8000), ..Default::default() },
    )
    .unwrap();
    assert_eq!(path.termination, Termination::Budget);
    cycle_decomposition(&path, Some(&c))
}

#[test]
fn criterion_04_cycle_bounds() {
    let r = rho99_report();
    let ok = r.cycles.len() >= 1000 && r.violations.is_empty();
    report(4, ok, format!("{} cycles, {} pairs, {} bound violations", r.cycles.len(), r.pairs.len(), r.violations.len()));
}

#[test]
fn criterion_05_weakly_balanced_frequency() {
    let r = rho99_report();
    let frac = r.weakly_balanced_pair_fraction().unwrap_or(0.0);
    let ok = r.pairs.len() >= 1000 && frac >= 1.0 / 3.0 - 0.05;
    report(5, ok, format!("{frac:.4} of {} pairs hold a weakly-balanced cycle (need ≥ 0.2833)", r.pairs.len()));
}

#[test]
fn criterion_06_supermartingale() {
    let c = constants(&rho99()).unwrap();
    let r = rho99_report();
    let t: Vec<f64> = r.pairs.iter().map(|p| p.t).collect();
    let l: Vec<f64> = r.pairs.iter().map(|p| p.l).collect();
    let s = supermartingale_diagnostic(&t, &l, 2.0, &c, 1).unwrap();
    let ok = s.pass && s.trend_increasing;
    report(
        6,
        ok,
        format!(
            "{} pairs, ratio {:.4}, 95% CI [{:.4}, {:.4}] vs α₂ = {:.4}; growth slope of L/T^(1/2) over last decade {:.3} \
             (finite-horizon growth diagnostic; not a limit statement)",
            s.pairs, s.ratio, s.ci.lo, s.ci.hi, s.alpha_m, s.growth_slope
        ),
    );
}

#[test]
fn criterion_07_backoff_bound() {
    // The bound exceeds the exact probability only by a few percent, so the raw
    // hit frequency (a handful of hits in 10⁴ runs) is checked for a
    // significant excess and the conditional estimate for the comparison.
    let mut worst = f64::NEG_INFINITY;
    let mut raw_above = 0;
    let mut failures = Vec::new();
    let mut seed = 100;
    for &lambda in &[0.3, 0.5, 0.8] {
        for &gamma in &[1.5, 2.0, 3.0] {
            for &x_t in &[50u64, 100, 200] {
                seed += 1;
                let est = backoff_monte_carlo(lambda, gamma, 500, x_t, 10_000, seed).unwrap();
                let bound = backoff_bound(lambda, gamma, x_t).unwrap();
                worst = worst.max(est.conditional / bound);
                if est.frequency > bound {
                    raw_above += 1;
                }
                if est.conditional > bound || est.ci.lo > bound {
                    failures.push(format!(
                        "(λ={lambda}, γ={gamma}, X_T={x_t}): estimate {:.4e}, hits {}, bound {bound:.4e}",
                        est.conditional, est.hits
                    ));
                }
            }
        }
    }
    report(
        7,
        failures.is_empty(),
        format!(
            "27 grid points × 10⁴ runs, largest estimate/bound {worst:.4}; raw hit frequency above the bound at \
             {raw_above} points, none significant unless listed; failures {failures:?}"
        ),
    );
}

#[test]
fn criterion_08_uniformization_oracle() {
    let p = NodeDynamics::new(0.3, 2.0).with_release(Release::Always);
    let exact = single_node_stationary(&p, 50).unwrap();
    let laws: Vec<Vec<f64>> = (1..=4u64).map(|s| empirical_queue_law(&p, 50, 5_000_000, s).unwrap()).collect();
    let empirical: Vec<f64> = (0..=50).map(|x| laws.iter().map(|l| l[x]).sum::<f64>() / laws.len() as f64).collect();
    let tv = total_variation(&exact, &empirical);
    report(8, tv <= 0.01, format!("TV(empirical, matrix solve) = {tv:.5} over 2·10⁷ ticks"));
}

#[test]
fn criterion_09_schedule_occupancy() {
    let (g, _) = InterferenceGraph::diamond(3, &[2]).unwrap();
    let q = [2.0, 2.0, 1.0, 1.0, 1.0, 1.0];
    let r = 1e3;
    let activate: Vec<f64> = q.iter().map(|x| r * x).collect();
    let release = vec![1.0; g.n()];
    let occ = (1..=4u64)
        .into_par_iter()
        .map(|s| activity_occupancy(&g, &activate, &release, 5_000_000, s).unwrap())
        .reduce(Occupancy::default, |mut a, b| {
            a.merge(&b);
            a
        });
    let pi = pi_stationary(&q, &RateFunctionSpec::Power { gamma: 1.0 }, &g).unwrap();
    let on_support: Vec<f64> = pi.support.iter().map(|s| occ.fraction(s.mask())).collect();
    // Mass outside S* counts fully toward the distance.
    let outside = 1.0 - on_support.iter().sum::<f64>();
    let tv = total_variation(&pi.probs, &on_support) + outside / 2.0;
    report(9, tv <= 0.05, format!("TV(occupancy, π) = {tv:.5}, mass outside S* {outside:.5}"));
}

fn brute_force_independent_sets(n: usize, edges: &[(usize, usize)]) -> usize {
    (0u64..1 << n).filter(|m| edges.iter().all(|&(i, j)| m >> i & 1 == 0 || m >> j & 1 == 0)).count()
}

#[test]
fn criterion_10_graph_oracles() {
    let graphs = corpus();
    let mut checked = 0;
    let mut mismatches = Vec::new();
    for (name, g) in graphs.iter().filter(|(_, g)| g.n() <= 8) {
        let got = enumerate_independent_sets(g).unwrap().len();
        let want = brute_force_independent_sets(g.n(), &g.edges());
        checked += 1;
        if got != want {
            mismatches.push(format!("{name}: {got} vs {want}"));
        }
    }

    let mut rng = ChaCha8Rng::seed_from_u64(20261016);
    let mut worst_lp = 0.0f64;
    for (_, g) in &graphs {
        for _ in 0..3 {
            let rho: Vec<f64> = (0..g.n()).map(|_| rng.random_range(0.05..1.0)).collect();
            let base = capacity_membership(g, &rho).unwrap().load_factor;
            for &c in &[0.25, 2.0, 3.7] {
                let scaled: Vec<f64> = rho.iter().map(|x| c * x).collect();
                let lf = capacity_membership(g, &scaled).unwrap().load_factor;
                worst_lp = worst_lp.max((c * lf - base).abs() / base.max(1.0));
            }
        }
    }

    let bd = InterferenceGraph::broken_diamond();
    let base_count = maximal_schedules(&bd).unwrap().len();
    let dup_counts: Vec<usize> = (1..=3)
        .map(|k| maximal_schedules(&duplicate_graph(&bd, k, &[(); 6]).unwrap().graph).unwrap().len())
        .collect();

    let ok = checked > 0 && mismatches.is_empty() && worst_lp <= 1e-9 && dup_counts.iter().all(|&c| c == base_count);
    report(
        10,
        ok,
        format!(
            "{checked} corpus graphs match brute force (mismatches {mismatches:?}); LP homogeneity error {worst_lp:.2e}; \
             maximal schedules {base_count} on broken diamond, {dup_counts:?} for k = 1, 2, 3"
        ),
    );
}

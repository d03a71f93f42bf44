//! Plot-ready CSV tables and JSON sidecars. All tables use `.` decimals, `,`
//! separators and LF line endings; bodies carry no timestamps so identical
//! runs produce identical bytes.

use std::io::{self, Write};

use serde::Serialize;
use sha2::{Digest, Sha256};

use crate::analysis::{CycleReport, ExitFrequencies, InstabilityConstants, LabeledInterval};
use crate::fastmix::OdeTrajectory;
use crate::fluid::FluidPath;
use crate::stochastic::Trace;

/// Shortest round-trip decimal, switching to exponent form outside
/// `[1e-4, 1e15)`.
pub fn fmt_f64(v: f64) -> String {
    let a = v.abs();
    if v == 0.0 || (1e-4..1e15).contains(&a) || !v.is_finite() {
        format!("{v}")
    } else {
        format!("{v:e}")
    }
}

/// SHA-256 of the canonical JSON encoding, hex encoded.
pub fn params_hash<T: Serialize + ?Sized>(value: &T) -> String {
    let json = serde_json::to_vec(value).expect("serializable");
    hex::encode(Sha256::digest(&json))
}

fn numbered(prefix: &str, n: usize, suffix: &str) -> Vec<String> {
    (1..=n).map(|i| format!("{prefix}{i}{suffix}")).collect()
}

fn row<W: Write>(w: &mut W, cells: &[String]) -> io::Result<()> {
    w.write_all(cells.join(",").as_bytes())?;
    w.write_all(b"\n")
}

/// `tick,t_scaled,x1..xN,u1..uN` with `t_scaled = tick/(Rβ)`.
pub fn write_trace_csv<W: Write>(w: &mut W, trace: &Trace, r: f64) -> io::Result<()> {
    let n = trace.n;
    let mut head = vec!["tick".to_string(), "t_scaled".to_string()];
    head.extend(numbered("x", n, ""));
    head.extend(numbered("u", n, ""));
    row(w, &head)?;
    let scale = r * trace.beta;
    for k in 0..trace.len() {
        let mut cells = vec![trace.tick(k).to_string(), fmt_f64(trace.tick(k) as f64 / scale)];
        cells.extend(trace.x(k).iter().map(|v| v.to_string()));
        let u = trace.u(k);
        cells.extend((0..n).map(|i| ((u >> i) & 1).to_string()));
        row(w, &cells)?;
    }
    Ok(())
}

/// `tick,t_scaled,node_average`.
pub fn write_node_average_csv<W: Write>(w: &mut W, trace: &Trace, r: f64) -> io::Result<()> {
    row(w, &["tick".into(), "t_scaled".into(), "node_average".into()])?;
    let scale = r * trace.beta;
    for k in 0..trace.len() {
        row(
            w,
            &[trace.tick(k).to_string(), fmt_f64(trace.tick(k) as f64 / scale), fmt_f64(trace.node_average(k))],
        )?;
    }
    Ok(())
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct TraceSidecar {
    pub seed: u64,
    pub beta: f64,
    pub r: f64,
    pub n: usize,
    pub horizon: u64,
    pub stride: u64,
    pub params_hash: String,
}

impl TraceSidecar {
    pub fn new<P: Serialize + ?Sized>(trace: &Trace, r: f64, params: &P) -> Self {
        Self {
            seed: trace.seed,
            beta: trace.beta,
            r,
            n: trace.n,
            horizon: trace.horizon,
            stride: trace.stride,
            params_hash: params_hash(params),
        }
    }
}

/// Pretty JSON followed by a newline.
pub fn write_json<W: Write, T: Serialize + ?Sized>(w: &mut W, value: &T) -> io::Result<()> {
    serde_json::to_writer_pretty(&mut *w, value)?;
    w.write_all(b"\n")
}

/// `t_start,t_end,period,q1_start..qN_start,q1_end..qN_end,switch_outcome,switch_probs`.
/// Switch probabilities are written as `M2:0.375;M3:0.375;M4:0.25`.
pub fn write_path_csv<W: Write>(w: &mut W, path: &FluidPath) -> io::Result<()> {
    let n = path.n();
    let mut head = vec!["t_start".to_string(), "t_end".to_string(), "period".to_string()];
    head.extend(numbered("q", n, "_start"));
    head.extend(numbered("q", n, "_end"));
    head.extend(["switch_outcome".to_string(), "switch_probs".to_string()]);
    row(w, &head)?;
    for s in &path.segments {
        let mut cells = vec![fmt_f64(s.t_start), fmt_f64(s.t_end), s.period.to_string()];
        cells.extend(s.q_start.iter().map(|&v| fmt_f64(v)));
        cells.extend(s.q_end.iter().map(|&v| fmt_f64(v)));
        match &s.switch {
            Some(d) => {
                cells.push(d.outcome.to_string());
                cells.push(d.probs.iter().map(|(p, x)| format!("{p}:{}", fmt_f64(*x))).collect::<Vec<_>>().join(";"));
            }
            None => cells.extend([String::new(), String::new()]),
        }
        row(w, &cells)?;
    }
    Ok(())
}

/// `t,q1..qN,u1..uN`.
pub fn write_trajectory_csv<W: Write>(w: &mut W, traj: &OdeTrajectory) -> io::Result<()> {
    let n = traj.samples.first().map_or(0, |s| s.q.len());
    let mut head = vec!["t".to_string()];
    head.extend(numbered("q", n, ""));
    head.extend(numbered("u", n, ""));
    row(w, &head)?;
    for s in &traj.samples {
        let mut cells = vec![fmt_f64(s.t)];
        cells.extend(s.q.iter().map(|&v| fmt_f64(v)));
        cells.extend(s.u.iter().map(|&v| fmt_f64(v)));
        row(w, &cells)?;
    }
    Ok(())
}

/// `label,t_start,t_end,confidence`; gaps have an empty label.
pub fn write_periods_csv<W: Write>(w: &mut W, intervals: &[LabeledInterval]) -> io::Result<()> {
    row(w, &["label".into(), "t_start".into(), "t_end".into(), "confidence".into()])?;
    for iv in intervals {
        row(
            w,
            &[
                iv.label.map(|p| p.to_string()).unwrap_or_default(),
                fmt_f64(iv.t_start),
                fmt_f64(iv.t_end),
                fmt_f64(iv.confidence),
            ],
        )?;
    }
    Ok(())
}

fn flag(b: Option<bool>) -> String {
    b.map(|b| b.to_string()).unwrap_or_default()
}

/// One row per cycle.
pub fn write_cycles_csv<W: Write>(w: &mut W, report: &CycleReport) -> io::Result<()> {
    let head = "index,pair,t,l,dt,dl,periods,weakly_balanced,time_bound_ok,load_bound_ok";
    row(w, &[head.into()])?;
    for c in &report.cycles {
        let periods: Vec<String> = c.periods.iter().map(|p| p.to_string()).collect();
        row(
            w,
            &[
                c.index.to_string(),
                c.pair.to_string(),
                fmt_f64(c.t),
                fmt_f64(c.l),
                fmt_f64(c.dt),
                fmt_f64(c.dl),
                periods.join(";"),
                flag(c.weakly_balanced),
                flag(c.time_bound_ok),
                flag(c.load_bound_ok),
            ],
        )?;
    }
    Ok(())
}

/// One row per cycle pair.
pub fn write_pairs_csv<W: Write>(w: &mut W, report: &CycleReport) -> io::Result<()> {
    row(w, &["k,t,l,dt,dl,min_l,any_weakly_balanced,duration_bound_ok,floor_ok".into()])?;
    for p in &report.pairs {
        row(
            w,
            &[
                p.k.to_string(),
                fmt_f64(p.t),
                fmt_f64(p.l),
                fmt_f64(p.dt),
                fmt_f64(p.dl),
                fmt_f64(p.min_l),
                flag(p.any_weakly_balanced),
                flag(p.duration_bound_ok),
                flag(p.floor_ok),
            ],
        )?;
    }
    Ok(())
}

/// `period,count,frequency,ci_lo,ci_hi`.
pub fn write_exits_csv<W: Write>(w: &mut W, f: &ExitFrequencies) -> io::Result<()> {
    row(w, &["period,count,frequency,ci_lo,ci_hi".into()])?;
    for r in &f.rows {
        row(
            w,
            &[r.period.to_string(), r.count.to_string(), fmt_f64(r.frequency), fmt_f64(r.ci.lo), fmt_f64(r.ci.hi)],
        )?;
    }
    Ok(())
}

/// `name,value`, including `alpha_m` for each requested `m`.
pub fn write_constants_csv<W: Write>(w: &mut W, c: &InstabilityConstants, ms: &[f64]) -> io::Result<()> {
    row(w, &["name,value".into()])?;
    let mut rows: Vec<(String, f64)> = vec![
        ("rho".into(), c.rho),
        ("rho0".into(), c.rho0),
        ("C_T".into(), c.c_t),
        ("C_L".into(), c.c_l),
        ("C_LT".into(), c.c_lt),
        ("theta".into(), c.theta),
        ("p".into(), c.p),
        ("epsilon".into(), c.epsilon),
        ("beta_max".into(), c.beta_max),
        ("beta_min".into(), c.beta_min),
        ("delta_rho".into(), c.delta_rho),
        ("delta".into(), c.delta),
    ];
    for &m in ms {
        rows.push((format!("alpha_m[{m}]"), c.alpha_m(m)));
        rows.push((format!("rho_star_hint[{m}]"), c.rho_star_hint(m).unwrap_or(f64::NAN)));
    }
    for (name, v) in rows {
        row(w, &[name, fmt_f64(v)])?;
    }
    Ok(())
}

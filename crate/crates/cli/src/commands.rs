//! The five subcommands. Each returns the text for standard output and
//! whether its checks passed; files go to the configured output path.

use std::fmt::Write as _;
use std::path::Path;

use anyhow::{Context, Result};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;
use serde_json::json;
use wpcn_core::oracle::cross_validate_with;
use wpcn_core::{
    ber_curve, solve, BerRow, ChannelGains, CrossRow, Geometry, SchemeKind, Solution,
    SystemParams,
};

use crate::config::{RunConfig, SweepParam};
use crate::format::num;

pub struct Outcome {
    pub stdout: String,
    pub passed: bool,
}

impl Outcome {
    fn ok(stdout: String) -> Self {
        Self { stdout, passed: true }
    }
}

fn write_file(path: &Path, text: &str) -> Result<()> {
    std::fs::write(path, text).with_context(|| format!("cannot write {}", path.display()))
}

/// Sends `text` to the output file when one is configured, otherwise to stdout.
fn emit(cfg: &RunConfig, text: String, what: &str) -> Result<String> {
    match &cfg.out {
        Some(path) => {
            write_file(path, &text)?;
            Ok(format!("wrote {what} to {}\n", path.display()))
        }
        None => Ok(text),
    }
}

fn to_json<T: Serialize>(value: &T) -> Result<String> {
    let mut s = serde_json::to_string_pretty(value)?;
    s.push('\n');
    Ok(s)
}

pub fn cmd_solve(cfg: &RunConfig, as_json: bool) -> Result<Outcome> {
    let gains = cfg.gains()?;
    let mut solutions = Vec::with_capacity(cfg.schemes.len());
    for &scheme in &cfg.schemes {
        solutions.push(solve(&cfg.params, &gains, scheme, &cfg.solver)?);
    }
    let text = if as_json {
        to_json(&json!({ "gains": gains, "solutions": solutions }))?
    } else {
        let mut s = format!(
            "gains h1={} h2={} h12={}\n",
            num(gains.h1),
            num(gains.h2),
            num(gains.h12)
        );
        for sol in &solutions {
            describe(&mut s, sol);
        }
        s
    };
    if let Some(path) = &cfg.out {
        write_file(path, &text)?;
    }
    Ok(Outcome::ok(text))
}

fn describe(s: &mut String, sol: &Solution) {
    let (a, e, p, r) = (&sol.alloc, &sol.split, &sol.powers, &sol.report);
    let _ = writeln!(
        s,
        "{}: status {}, objective {}",
        sol.scheme,
        sol.status.as_str(),
        num(r.objective)
    );
    let _ = writeln!(
        s,
        "  times   t1={} t2={} t3={} t41={} t42={}",
        num(a.t1),
        num(a.t2),
        num(a.t3),
        num(a.t41),
        num(a.t42)
    );
    let _ = writeln!(s, "  energy  tau41={} tau42={}", num(e.tau41), num(e.tau42));
    let _ = writeln!(
        s,
        "  powers  p3={} p41={} p42={}{}",
        num(p.p3),
        num(p.p41),
        num(p.p42),
        if p.stranded { " (stranded energy)" } else { "" }
    );
    let _ = writeln!(
        s,
        "  rates   r1={} r2={} backscatter={} to_wd2={} to_hap={} relayed={}",
        num(r.r1),
        num(r.r2),
        num(r.r1_bs),
        num(r.r1_to_wd2),
        num(r.r1_to_hap),
        num(r.r1_relayed)
    );
}

pub const SWEEP_HEADER: &str = "sweep_param,value,scheme,objective,r1,r2,t1,t2,t3,t41,t42,tau41,tau42,status";

fn solve_point(cfg: &RunConfig, param: SweepParam, value: f64, scheme: SchemeKind) -> Result<Solution> {
    let point = cfg.at(param, value);
    point.check().with_context(|| format!("at {} = {}", param.as_str(), num(value)))?;
    let gains = point.gains()?;
    Ok(solve(&point.params, &gains, scheme, &point.solver)?)
}

pub fn cmd_sweep(cfg: &RunConfig) -> Result<Outcome> {
    let param = cfg.sweep.param;
    let mut rows = Vec::new();
    for value in cfg.sweep.values() {
        for &scheme in &cfg.schemes {
            rows.push((value, scheme, solve_point(cfg, param, value, scheme)?));
        }
    }
    rows.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)));
    let mut csv = String::from(SWEEP_HEADER);
    csv.push('\n');
    for (value, scheme, sol) in &rows {
        let (a, e, r) = (&sol.alloc, &sol.split, &sol.report);
        let fields = [
            param.as_str().to_string(),
            num(*value),
            scheme.to_string(),
            num(r.objective),
            num(r.r1),
            num(r.r2),
            num(a.t1),
            num(a.t2),
            num(a.t3),
            num(a.t41),
            num(a.t42),
            num(e.tau41),
            num(e.tau42),
            sol.status.as_str().to_string(),
        ];
        csv.push_str(&fields.join(","));
        csv.push('\n');
    }
    Ok(Outcome::ok(emit(cfg, csv, &format!("{} rows", rows.len()))?))
}

/// Where one curve overtakes another along a sweep.
#[derive(Clone, Debug, PartialEq, Serialize)]
#[serde(rename_all = "snake_case", tag = "kind")]
pub enum Crossover {
    InsufficientPoints,
    /// No sign change; `leader` is ahead wherever the curves differ.
    None { leader: Option<SchemeKind> },
    /// Interpolated positions where ab_coop moves ahead (`up`) or falls behind.
    Changes { up: Vec<f64>, down: Vec<f64> },
}

/// Locates sign changes of `advantage` along `x`; entries within `tie` count as equal.
pub fn find_crossovers(x: &[f64], advantage: &[f64], tie: &[f64]) -> Crossover {
    if x.len() < 2 {
        return Crossover::InsufficientPoints;
    }
    let sign = |i: usize| {
        if advantage[i].abs() <= tie[i] {
            0
        } else if advantage[i] > 0.0 {
            1
        } else {
            -1
        }
    };
    let (mut up, mut down) = (Vec::new(), Vec::new());
    let mut last: Option<usize> = None;
    let mut leader = 0;
    for i in 0..x.len() {
        let s = sign(i);
        if s == 0 {
            continue;
        }
        leader = s;
        if let Some(j) = last {
            if sign(j) != s {
                let (a, b) = (advantage[j], advantage[i]);
                let at = x[j] + (x[i] - x[j]) * a / (a - b);
                if s > 0 {
                    up.push(at);
                } else {
                    down.push(at);
                }
            }
        }
        last = Some(i);
    }
    if up.is_empty() && down.is_empty() {
        let leader = match leader {
            1 => Some(SchemeKind::AbCoop),
            -1 => Some(SchemeKind::ActiveCoop),
            _ => None,
        };
        Crossover::None { leader }
    } else {
        Crossover::Changes { up, down }
    }
}

impl Crossover {
    pub fn summary(&self) -> String {
        let list = |v: &[f64]| v.iter().map(|x| num(*x)).collect::<Vec<_>>().join(", ");
        match self {
            Self::InsufficientPoints => "insufficient points".into(),
            Self::None { leader: None } => "no crossover (schemes tie)".into(),
            Self::None { leader: Some(s) } => format!("no crossover ({s} ahead throughout)"),
            Self::Changes { up, down } => {
                let mut s = String::new();
                if !up.is_empty() {
                    s += &format!("ab_coop overtakes active_coop at d1 = {}", list(up));
                }
                if !down.is_empty() {
                    if !s.is_empty() {
                        s += "; ";
                    }
                    s += &format!("ab_coop falls behind at d1 = {}", list(down));
                }
                s
            }
        }
    }
}

pub const COMPARE_RBS: [f64; 2] = [5e3, 5e4];

#[derive(Clone, Debug, Serialize)]
pub struct CompareRow {
    pub rb: f64,
    pub d1: f64,
    pub ab_coop: f64,
    pub active_coop: f64,
    pub no_coop: f64,
}

/// Runs the d1 sweep for each backscatter rate and locates crossovers.
pub fn compare_data(cfg: &RunConfig) -> Result<Vec<(f64, Vec<CompareRow>, Crossover)>> {
    let d1s = cfg.sweep.values();
    let mut out = Vec::new();
    for rb in COMPARE_RBS {
        let mut base = cfg.clone();
        base.params.rb = rb;
        let mut rows = Vec::with_capacity(d1s.len());
        for &d1 in &d1s {
            let v = |s| solve_point(&base, SweepParam::D1, d1, s).map(|sol| sol.objective());
            rows.push(CompareRow {
                rb,
                d1,
                ab_coop: v(SchemeKind::AbCoop)?,
                active_coop: v(SchemeKind::ActiveCoop)?,
                no_coop: v(SchemeKind::NoCoop)?,
            });
        }
        let adv: Vec<f64> = rows.iter().map(|r| r.ab_coop - r.active_coop).collect();
        let tie: Vec<f64> = rows
            .iter()
            .map(|r| 4.0 * cfg.solver.bisect_tol * r.ab_coop.max(r.active_coop))
            .collect();
        let cross = find_crossovers(&d1s, &adv, &tie);
        out.push((rb, rows, cross));
    }
    Ok(out)
}

pub fn cmd_compare(cfg: &RunConfig, as_json: bool) -> Result<Outcome> {
    let data = compare_data(cfg)?;
    let mut csv = String::from("rb,d1,ab_coop,active_coop,no_coop,advantage\n");
    for (_, rows, _) in &data {
        for r in rows {
            let _ = writeln!(
                csv,
                "{},{},{},{},{},{}",
                num(r.rb),
                num(r.d1),
                num(r.ab_coop),
                num(r.active_coop),
                num(r.no_coop),
                num(r.ab_coop - r.active_coop)
            );
        }
    }
    let mut summary = String::new();
    for (rb, _, cross) in &data {
        let _ = writeln!(summary, "rb={}: {}", num(*rb), cross.summary());
    }
    let stdout = if as_json {
        if let Some(path) = &cfg.out {
            write_file(path, &csv)?;
        }
        let items: Vec<_> = data
            .iter()
            .map(|(rb, rows, cross)| json!({ "rb": rb, "rows": rows, "crossover": cross }))
            .collect();
        to_json(&items)?
    } else {
        match &cfg.out {
            Some(path) => {
                write_file(path, &csv)?;
                summary
            }
            None => {
                let mut s = csv;
                for line in summary.lines() {
                    let _ = writeln!(s, "# {line}");
                }
                s
            }
        }
    };
    Ok(Outcome::ok(stdout))
}

pub fn ber_csv(rows: &[BerRow]) -> String {
    let mut csv = String::from("N,analytic_ber,empirical_ber,ci95\n");
    for r in rows {
        let _ = writeln!(
            csv,
            "{},{},{},{}",
            r.nsamp,
            num(r.analytic),
            num(r.empirical),
            num(r.ci95)
        );
    }
    csv
}

pub fn cmd_ber(cfg: &RunConfig, as_json: bool) -> Result<Outcome> {
    let gains = cfg.gains()?;
    let rows = ber_curve(&cfg.params, &gains, &cfg.n_list, cfg.bits, cfg.seed)?;
    let csv = ber_csv(&rows);
    if as_json {
        if let Some(path) = &cfg.out {
            write_file(path, &csv)?;
        }
        return Ok(Outcome::ok(to_json(&rows)?));
    }
    Ok(Outcome::ok(emit(cfg, csv, &format!("{} rows", rows.len()))?))
}

/// Analytic BER range over which the simulated detector is compared in ratio.
pub const MC_BAND: (f64, f64) = (1e-3, 0.3);

/// Copy of `params` with the HAP power chosen so that the reflected signal
/// reaches `snr` per sample at the detector. `None` if nothing is reflected.
pub fn at_detector_snr(params: &SystemParams, gains: &ChannelGains, snr: f64) -> Option<SystemParams> {
    let reflect = (1.0 - params.beta) * params.mu * params.mu * gains.h1 * gains.h12;
    let noise = (1.0 - params.beta) * params.n0 + params.ns;
    if !(reflect > 0.0) {
        return None;
    }
    Some(SystemParams {
        p1: snr * noise / reflect,
        ..params.clone()
    })
}

#[derive(Clone, Debug, Serialize)]
pub struct McCheck {
    pub p1: f64,
    pub rows: Vec<BerRow>,
    /// Empirical BER never rises by more than twice the combined ci95.
    pub trend_ok: bool,
    /// Rows inside the analytic band with the simulated-to-analytic ratio.
    pub ratios: Vec<(u32, f64)>,
    pub ratio_ok: bool,
}

pub fn mc_check(cfg: &RunConfig, gains: &ChannelGains) -> Result<Option<McCheck>> {
    let Some(params) = at_detector_snr(&cfg.params, gains, cfg.validate.mc_snr) else {
        return Ok(None);
    };
    let rows = ber_curve(&params, gains, &cfg.n_list, cfg.bits, cfg.seed)?;
    let mut sorted = rows.clone();
    sorted.sort_by_key(|r| r.nsamp);
    let trend_ok = sorted
        .windows(2)
        .all(|w| w[1].empirical <= w[0].empirical + 2.0 * (w[0].ci95 + w[1].ci95));
    let ratios: Vec<(u32, f64)> = rows
        .iter()
        .filter(|r| (MC_BAND.0..=MC_BAND.1).contains(&r.analytic))
        .map(|r| {
            let ratio = if r.empirical > 0.0 {
                (r.empirical / r.analytic).max(r.analytic / r.empirical)
            } else {
                f64::INFINITY
            };
            (r.nsamp, ratio)
        })
        .collect();
    let ratio_ok = ratios.iter().all(|&(_, q)| q <= cfg.validate.mc_factor);
    Ok(Some(McCheck {
        p1: params.p1,
        rows,
        trend_ok,
        ratios,
        ratio_ok,
    }))
}

/// The configured instance followed by seeded random collinear instances.
pub fn validation_instances(cfg: &RunConfig) -> Result<Vec<(String, SystemParams, ChannelGains)>> {
    let mut out = vec![(
        format!("configured d1={} d2={} rb={}", num(cfg.d1), num(cfg.d2), num(cfg.params.rb)),
        cfg.params.clone(),
        cfg.gains()?,
    )];
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    for i in 0..cfg.validate.instances {
        let d1 = rng.random_range(6.0..=10.0);
        let d2 = rng.random_range(2.0..=5.0);
        let rb = if rng.random_bool(0.5) { 5e3 } else { 5e4 };
        let params = SystemParams {
            rb,
            ..cfg.params.clone()
        };
        let gains = wpcn_core::gains_from_geometry(&Geometry::collinear(d1, d2)?, &params)?;
        out.push((
            format!("random #{} d1={} d2={} rb={}", i + 1, num(d1), num(d2), num(rb)),
            params,
            gains,
        ));
    }
    Ok(out)
}

pub fn cmd_validate(cfg: &RunConfig, as_json: bool) -> Result<Outcome> {
    let v = &cfg.validate;
    let mut oracle: Vec<(String, Vec<CrossRow>)> = Vec::new();
    for (label, params, gains) in validation_instances(cfg)? {
        let rep = cross_validate_with(
            &params,
            &gains,
            &cfg.solver,
            cfg.delta,
            v.oracle_rel_tol,
            v.grid_bound_factor,
        )?;
        oracle.push((label, rep.rows));
    }
    let oracle_ok = oracle.iter().all(|(_, rows)| rows.iter().all(|r| r.pass));
    let mc = mc_check(cfg, &cfg.gains()?)?;
    let mc_ok = mc.as_ref().is_none_or(|m| m.trend_ok && m.ratio_ok);
    let passed = oracle_ok && mc_ok;

    let stdout = if as_json {
        let oracle: Vec<_> = oracle
            .iter()
            .map(|(label, rows)| json!({ "instance": label, "rows": rows }))
            .collect();
        to_json(&json!({ "oracle": oracle, "mc": mc, "pass": passed }))?
    } else {
        let verdict = |ok: bool| if ok { "PASS" } else { "FAIL" };
        let mut s = String::new();
        for (label, rows) in &oracle {
            let _ = writeln!(s, "{label}");
            for r in rows {
                let _ = writeln!(
                    s,
                    "  {} {:<12} solver={} grid={} diff={} tol={} grid_bound={}",
                    verdict(r.pass),
                    r.scheme.as_str(),
                    num(r.v_solver),
                    num(r.v_grid),
                    num((r.v_solver - r.v_grid).abs()),
                    num(r.tolerance),
                    num(r.grid_bound)
                );
            }
        }
        match &mc {
            None => s.push_str("detector check skipped: no reflected signal\n"),
            Some(m) => {
                let _ = writeln!(s, "detector at p1={} ({} bits per N)", num(m.p1), cfg.bits);
                for r in &m.rows {
                    let _ = writeln!(
                        s,
                        "  N={} analytic={} empirical={} ci95={}",
                        r.nsamp,
                        num(r.analytic),
                        num(r.empirical),
                        num(r.ci95)
                    );
                }
                let _ = writeln!(s, "  {} trend nonincreasing in N", verdict(m.trend_ok));
                if m.ratios.is_empty() {
                    s.push_str("  no N with analytic BER in [1e-3, 0.3]; ratio check not applicable\n");
                }
                for (n, q) in &m.ratios {
                    let _ = writeln!(
                        s,
                        "  {} N={n} ratio {} within {}",
                        verdict(*q <= v.mc_factor),
                        num(*q),
                        num(v.mc_factor)
                    );
                }
            }
        }
        let _ = writeln!(s, "validate: {}", verdict(passed));
        s
    };
    if let Some(path) = &cfg.out {
        write_file(path, &stdout)?;
    }
    Ok(Outcome { stdout, passed })
}

//! Experiment harness: repeated seeded solves summarized as CSV reports.
//!
//! Report columns, in order:
//! `group,instance,label,runs,c_avg,c_best,t_best,reference,reference_source,gap_pct,last_mile,seeds`.
//! `t_best` is the mean time (s) to the returned solution, `gap_pct` is
//! `(c_best - reference) / reference * 100`, and `seeds` is `;`-separated.

use std::collections::BTreeMap;
use std::io::{Read, Write};
use std::sync::Mutex;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::instance::{vary_sdl_density, Instance};
use crate::ls::{LsOp, LsStats};
use crate::solution::Solution;
use crate::solver::{solve, SolveOutcome, SolverConfig, Variant};

/// Where a row's gap reference came from.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ReferenceSource {
    /// User-supplied baseline file.
    Baseline,
    /// Lowest `c_best` among the report's rows for the same instance.
    BestInReport,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReportRow {
    pub group: String,
    pub instance: String,
    pub label: String,
    pub runs: usize,
    pub c_avg: f64,
    pub c_best: f64,
    pub t_best: f64,
    pub reference: f64,
    pub reference_source: ReferenceSource,
    pub gap_pct: f64,
    /// Mean home-to-SDL distance of SDL deliveries, averaged over runs.
    pub last_mile: Option<f64>,
    pub seeds: String,
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct ExperimentReport {
    pub rows: Vec<ReportRow>,
}

fn join_seeds(seeds: &[u64]) -> String {
    seeds.iter().map(u64::to_string).collect::<Vec<_>>().join(";")
}

impl ExperimentReport {
    pub fn to_csv(&self) -> Result<String> {
        let mut w = csv::Writer::from_writer(Vec::new());
        for r in &self.rows {
            w.serialize(r)?;
        }
        if self.rows.is_empty() {
            w.write_record([
                "group", "instance", "label", "runs", "c_avg", "c_best", "t_best", "reference", "reference_source",
                "gap_pct", "last_mile", "seeds",
            ])?;
        }
        Ok(String::from_utf8(w.into_inner().map_err(|e| Error::Config(e.to_string()))?).expect("csv is utf-8"))
    }

    pub fn from_csv(text: &str) -> Result<ExperimentReport> {
        let mut rd = csv::Reader::from_reader(text.as_bytes());
        let rows = rd.deserialize().collect::<std::result::Result<Vec<ReportRow>, _>>()?;
        Ok(ExperimentReport { rows })
    }

    /// Sets every row's reference and gap. A baseline entry for the
    /// instance wins over the best `c_best` in the report.
    pub fn fill_gaps(&mut self, baseline: Option<&BTreeMap<String, f64>>) {
        let mut best: BTreeMap<String, f64> = BTreeMap::new();
        for r in &self.rows {
            let e = best.entry(r.instance.clone()).or_insert(f64::INFINITY);
            *e = e.min(r.c_best);
        }
        for r in &mut self.rows {
            match baseline.and_then(|b| b.get(&r.instance)) {
                Some(&v) => {
                    r.reference = v;
                    r.reference_source = ReferenceSource::Baseline;
                }
                None => {
                    r.reference = best[&r.instance];
                    r.reference_source = ReferenceSource::BestInReport;
                }
            }
            r.gap_pct = if r.reference != 0.0 && r.reference.is_finite() {
                (r.c_best - r.reference) / r.reference * 100.0
            } else {
                0.0
            };
        }
    }

    /// Means of the numeric columns per (group, label).
    pub fn aggregate(&self) -> ExperimentReport {
        let mut groups: BTreeMap<(String, String), Vec<&ReportRow>> = BTreeMap::new();
        for r in &self.rows {
            groups.entry((r.group.clone(), r.label.clone())).or_default().push(r);
        }
        let rows = groups
            .into_iter()
            .map(|((group, label), rs)| {
                let k = rs.len() as f64;
                let mean = |f: &dyn Fn(&ReportRow) -> f64| rs.iter().map(|r| f(r)).sum::<f64>() / k;
                let lm: Vec<f64> = rs.iter().filter_map(|r| r.last_mile).collect();
                ReportRow {
                    group,
                    instance: "*".into(),
                    label,
                    runs: rs.iter().map(|r| r.runs).sum(),
                    c_avg: mean(&|r| r.c_avg),
                    c_best: mean(&|r| r.c_best),
                    t_best: mean(&|r| r.t_best),
                    reference: mean(&|r| r.reference),
                    reference_source: rs[0].reference_source,
                    gap_pct: mean(&|r| r.gap_pct),
                    last_mile: (!lm.is_empty()).then(|| lm.iter().sum::<f64>() / lm.len() as f64),
                    seeds: rs[0].seeds.clone(),
                }
            })
            .collect();
        ExperimentReport { rows }
    }
}

/// Reads a baseline file with columns `instance,reference`.
pub fn read_baseline<R: Read>(input: R) -> Result<BTreeMap<String, f64>> {
    #[derive(Deserialize)]
    struct Line {
        instance: String,
        reference: f64,
    }
    let mut rd = csv::Reader::from_reader(input);
    let mut out = BTreeMap::new();
    for line in rd.deserialize::<Line>() {
        let l = line?;
        out.insert(l.instance, l.reference);
    }
    Ok(out)
}

/// Mean home-to-SDL distance over customers served at their SDL; 0 when
/// none is.
pub fn last_mile_distance(inst: &Instance, sol: &Solution) -> f64 {
    let d: Vec<f64> = sol
        .routes()
        .iter()
        .flat_map(|r| r.visits.iter())
        .filter(|&&v| inst.is_sdl(v))
        .map(|&v| inst.last_mile(inst.customer_of(v).unwrap()))
        .collect();
    if d.is_empty() {
        0.0
    } else {
        d.iter().sum::<f64>() / d.len() as f64
    }
}

/// Solves `inst` once per seed, in order.
pub fn run_seeds(inst: &Instance, cfg: &SolverConfig, seeds: &[u64]) -> Result<Vec<SolveOutcome>> {
    seeds
        .iter()
        .map(|&s| {
            let mut c = cfg.clone();
            c.seed = s;
            solve(inst, &c)
        })
        .collect()
}

/// Summary row for one instance; the gap is filled by
/// [`ExperimentReport::fill_gaps`].
pub fn summarize(group: &str, inst: &Instance, label: &str, seeds: &[u64], outs: &[SolveOutcome], with_last_mile: bool) -> ReportRow {
    let costs: Vec<f64> = outs.iter().map(|o| o.best.total_cost()).collect();
    let k = costs.len().max(1) as f64;
    ReportRow {
        group: group.into(),
        instance: inst.name().into(),
        label: label.into(),
        runs: outs.len(),
        c_avg: costs.iter().sum::<f64>() / k,
        c_best: costs.iter().copied().fold(f64::INFINITY, f64::min),
        t_best: outs.iter().map(|o| o.time_to_best).sum::<f64>() / k,
        reference: f64::NAN,
        reference_source: ReferenceSource::BestInReport,
        gap_pct: f64::NAN,
        last_mile: with_last_mile.then(|| outs.iter().map(|o| last_mile_distance(inst, &o.best)).sum::<f64>() / k),
        seeds: join_seeds(seeds),
    }
}

/// Group key of an instance name: the text before the first `-`.
pub fn group_of(name: &str) -> String {
    name.split('-').next().unwrap_or(name).to_string()
}

/// Runs each instance over all seeds with `cfg`; instances run concurrently
/// when `parallel_instances` is set. Rows keep the input order.
pub fn bench(
    instances: &[Instance],
    cfg: &SolverConfig,
    label: &str,
    seeds: &[u64],
    parallel_instances: bool,
    baseline: Option<&BTreeMap<String, f64>>,
) -> Result<ExperimentReport> {
    let sink: Mutex<Vec<(usize, ReportRow)>> = Mutex::new(Vec::new());
    let job = |(k, inst): (usize, &Instance)| -> Result<()> {
        let outs = run_seeds(inst, cfg, seeds)?;
        let row = summarize(&group_of(inst.name()), inst, label, seeds, &outs, false);
        sink.lock().expect("report sink").push((k, row));
        Ok(())
    };
    if parallel_instances {
        instances.par_iter().enumerate().try_for_each(job)?;
    } else {
        instances.iter().enumerate().try_for_each(job)?;
    }
    let mut rows = sink.into_inner().expect("report sink");
    rows.sort_by_key(|(k, _)| *k);
    let mut report = ExperimentReport {
        rows: rows.into_iter().map(|(_, r)| r).collect(),
    };
    report.fill_gaps(baseline);
    Ok(report)
}

pub fn variant_label(v: Variant) -> &'static str {
    match v {
        Variant::AlnsLs => "alns-ls",
        Variant::Alns => "alns",
        Variant::Ls => "ls",
    }
}

/// Runs the given algorithm variants on every instance.
pub fn ablate(
    instances: &[Instance],
    variants: &[Variant],
    cfg: &SolverConfig,
    seeds: &[u64],
    parallel_instances: bool,
) -> Result<ExperimentReport> {
    let mut report = ExperimentReport::default();
    for &v in variants {
        let mut c = cfg.clone();
        c.variant = v;
        report.rows.extend(bench(instances, &c, variant_label(v), seeds, parallel_instances, None)?.rows);
    }
    report.fill_gaps(None);
    Ok(report)
}

/// Local-search operator counts for one setting of Markov selection.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OpStatsRow {
    pub markov: bool,
    pub operator: LsOp,
    pub invocations: u64,
    pub successes: u64,
    pub success_ratio: f64,
}

/// Solves `inst` `repeats` times (seeds `seed..seed+repeats`) with Markov
/// selection on or off and totals the local-search counters.
pub fn operator_stats(inst: &Instance, cfg: &SolverConfig, markov: bool, repeats: usize) -> Result<(Vec<OpStatsRow>, LsStats)> {
    let mut c = cfg.clone();
    c.ls.markov = markov;
    c.variant = Variant::AlnsLs;
    let mut total = LsStats::default();
    for r in 0..repeats as u64 {
        c.seed = cfg.seed + r;
        total.merge(&solve(inst, &c)?.record.ls);
    }
    let rows = LsOp::ALL
        .iter()
        .map(|&op| {
            let k = op.index();
            let (inv, suc) = (total.invocations[k], total.successes[k]);
            OpStatsRow {
                markov,
                operator: op,
                invocations: inv,
                successes: suc,
                success_ratio: if inv > 0 { suc as f64 / inv as f64 } else { 0.0 },
            }
        })
        .collect();
    Ok((rows, total))
}

/// Successful over total invocations across all operators.
pub fn aggregate_success_ratio(stats: &LsStats) -> f64 {
    let inv: u64 = stats.invocations.iter().sum();
    let suc: u64 = stats.successes.iter().sum();
    if inv == 0 {
        0.0
    } else {
        suc as f64 / inv as f64
    }
}

pub fn op_stats_csv(rows: &[OpStatsRow]) -> Result<String> {
    let mut w = csv::Writer::from_writer(Vec::new());
    for r in rows {
        w.serialize(r)?;
    }
    Ok(String::from_utf8(w.into_inner().map_err(|e| Error::Config(e.to_string()))?).expect("csv is utf-8"))
}

/// Builds each density level of `base` (with `density_seed`), solves it
/// once per seed and reports mean cost and last-mile distance per level.
pub fn sdl_sweep(
    base: &Instance,
    levels: &[u8],
    density_seed: u64,
    cfg: &SolverConfig,
    seeds: &[u64],
) -> Result<ExperimentReport> {
    let mut report = ExperimentReport::default();
    for &level in levels {
        let inst = vary_sdl_density(base, level, density_seed)?;
        let outs = run_seeds(&inst, cfg, seeds)?;
        let mut row = summarize(&group_of(base.name()), &inst, &format!("level-{level}"), seeds, &outs, true);
        row.instance = base.name().into();
        report.rows.push(row);
    }
    report.fill_gaps(None);
    Ok(report)
}

/// Appends CSV rows to `out`, writing the header only when `with_header`.
pub fn append_rows<W: Write>(out: W, rows: &[ReportRow], with_header: bool) -> Result<()> {
    let mut w = csv::WriterBuilder::new().has_headers(with_header).from_writer(out);
    for r in rows {
        w.serialize(r)?;
    }
    w.flush()?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn row(instance: &str, label: &str, c_best: f64) -> ReportRow {
        ReportRow {
            group: "g".into(),
            instance: instance.into(),
            label: label.into(),
            runs: 2,
            c_avg: c_best + 1.0,
            c_best,
            t_best: 0.5,
            reference: f64::NAN,
            reference_source: ReferenceSource::BestInReport,
            gap_pct: f64::NAN,
            last_mile: None,
            seeds: "1;2".into(),
        }
    }

    #[test]
    fn gaps_against_best_row_or_baseline() {
        let mut r = ExperimentReport {
            rows: vec![row("a", "x", 110.0), row("a", "y", 100.0), row("b", "x", 50.0)],
        };
        r.fill_gaps(None);
        assert!((r.rows[0].gap_pct - 10.0).abs() < 1e-12);
        assert_eq!(r.rows[1].gap_pct, 0.0);
        let base = BTreeMap::from([("b".to_string(), 40.0)]);
        r.fill_gaps(Some(&base));
        assert!((r.rows[2].gap_pct - 25.0).abs() < 1e-12);
        assert_eq!(r.rows[2].reference_source, ReferenceSource::Baseline);
    }

    #[test]
    fn csv_round_trip() {
        let mut r = ExperimentReport {
            rows: vec![row("a", "x", 110.0), row("b", "x", 50.0)],
        };
        r.rows[1].last_mile = Some(3.25);
        r.fill_gaps(None);
        let back = ExperimentReport::from_csv(&r.to_csv().unwrap()).unwrap();
        assert_eq!(back, r);
    }

    #[test]
    fn baseline_parses() {
        let b = read_baseline("instance,reference\nr1-a,1234.5\n".as_bytes()).unwrap();
        assert_eq!(b["r1-a"], 1234.5);
    }
}

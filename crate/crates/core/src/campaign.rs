//! Batch planning runs and their summary statistics.

use crate::par::{self, Exec};
use crate::rrt::{Enhancements, Improvement, PlannerParams};
use crate::scenario::Scenario;
use crate::slot::SlotParams;
use serde::{Deserialize, Serialize};
use std::fmt;
use std::io::Write;
use std::time::Instant;

/// Named enhancement sets used in comparisons.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Profile {
    All,
    WellKnown,
    WkHeuristic,
    WkGoalZone,
    WkOptimization,
}

impl Profile {
    pub const ABLATION: [Profile; 5] = [
        Profile::WellKnown,
        Profile::WkHeuristic,
        Profile::WkGoalZone,
        Profile::WkOptimization,
        Profile::All,
    ];

    pub fn enhancements(self) -> Enhancements {
        let wk = Enhancements::WELL_KNOWN;
        match self {
            Profile::All => Enhancements::ALL,
            Profile::WellKnown => wk,
            Profile::WkHeuristic => Enhancements { cost_heuristic: true, ..wk },
            Profile::WkGoalZone => Enhancements { goal_zone: true, ..wk },
            Profile::WkOptimization => Enhancements { optimization: true, ..wk },
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            Profile::All => "all",
            Profile::WellKnown => "wk",
            Profile::WkHeuristic => "wk+heuristic",
            Profile::WkGoalZone => "wk+goalzone",
            Profile::WkOptimization => "wk+opt",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        Self::ABLATION.into_iter().find(|p| p.name() == s)
    }
}

impl fmt::Display for Profile {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

/// One planning query of a campaign.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunRecord {
    pub scenario: String,
    pub seed: u64,
    pub profile: String,
    pub success: bool,
    pub iterations: usize,
    pub first_found: Option<usize>,
    pub plan_ms: f64,
    pub optimize_ms: f64,
    pub cost: f64,
    pub direction_changes: usize,
    #[serde(skip)]
    pub improvements: Vec<Improvement>,
}

impl RunRecord {
    /// Full path cost known after `iteration` iterations.
    pub fn cost_at(&self, iteration: usize) -> f64 {
        self.improvements
            .iter()
            .take_while(|m| m.iteration <= iteration)
            .last()
            .map_or(f64::INFINITY, |m| m.cost)
    }
}

/// Plans `scenario` once and records the outcome. A slot without entry
/// candidates counts as a failed run.
pub fn run_one(scenario: &Scenario, slot: &SlotParams, params: &PlannerParams, profile: &str) -> RunRecord {
    let t0 = Instant::now();
    let sol = scenario.solve(slot, params).ok();
    let plan_ms = t0.elapsed().as_secs_f64() * 1e3;
    let base = RunRecord {
        scenario: scenario.name.clone(),
        seed: params.seed,
        profile: profile.to_string(),
        success: false,
        iterations: 0,
        first_found: None,
        plan_ms,
        optimize_ms: 0.0,
        cost: f64::INFINITY,
        direction_changes: 0,
        improvements: Vec::new(),
    };
    match sol {
        None => base,
        Some(sol) => RunRecord {
            success: sol.found(),
            iterations: sol.counters.iterations,
            first_found: sol.first_found(),
            optimize_ms: sol.optimize_time.as_secs_f64() * 1e3,
            cost: sol.cost,
            direction_changes: sol.path.as_ref().map_or(0, |p| p.direction_changes()),
            improvements: sol.improvements,
            ..base
        },
    }
}

/// A planning query: scenario index, seed, enhancement set.
#[derive(Debug, Clone, Copy)]
pub struct Job {
    pub scenario: usize,
    pub seed: u64,
    pub profile: Profile,
}

/// Runs every job, fanned out according to `exec`, in job order.
pub fn run_batch(scenarios: &[Scenario], jobs: &[Job], slot: &SlotParams, base: &PlannerParams, exec: Exec) -> Vec<RunRecord> {
    par::map(exec, jobs, |j| {
        let params = PlannerParams {
            seed: j.seed,
            enhancements: j.profile.enhancements(),
            ..*base
        };
        run_one(&scenarios[j.scenario], slot, &params, j.profile.name())
    })
}

/// Maximum, mean and population standard deviation.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize)]
pub struct Spread {
    pub max: f64,
    pub avg: f64,
    pub std: f64,
}

impl Spread {
    pub fn of(values: &[f64]) -> Self {
        if values.is_empty() {
            return Spread {
                max: f64::NAN,
                avg: f64::NAN,
                std: f64::NAN,
            };
        }
        let n = values.len() as f64;
        let avg = values.iter().sum::<f64>() / n;
        let var = values.iter().map(|v| (v - avg).powi(2)).sum::<f64>() / n;
        Spread {
            max: values.iter().copied().fold(f64::NEG_INFINITY, f64::max),
            avg,
            std: var.sqrt(),
        }
    }
}

/// Table-style statistics of a group of runs.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct GroupStats {
    pub runs: usize,
    pub failures: usize,
    /// Percent of runs without a path.
    pub failure_rate: f64,
    pub time_ms: Spread,
    pub optimize_ms: Spread,
    /// Cost of successful runs.
    pub cost: Spread,
    /// Smallest iteration budget at which every run had found a path.
    pub min_iterations_all_found: Option<usize>,
}

pub fn summarize(records: &[RunRecord]) -> GroupStats {
    let failures = records.iter().filter(|r| !r.success).count();
    let times: Vec<f64> = records.iter().map(|r| r.plan_ms).collect();
    let opt: Vec<f64> = records.iter().map(|r| r.optimize_ms).collect();
    let costs: Vec<f64> = records.iter().filter(|r| r.success).map(|r| r.cost).collect();
    let all_found = if failures == 0 {
        records.iter().map(|r| r.first_found.unwrap_or(0)).max()
    } else {
        None
    };
    GroupStats {
        runs: records.len(),
        failures,
        failure_rate: if records.is_empty() {
            0.0
        } else {
            100.0 * failures as f64 / records.len() as f64
        },
        time_ms: Spread::of(&times),
        optimize_ms: Spread::of(&opt),
        cost: Spread::of(&costs),
        min_iterations_all_found: all_found,
    }
}

/// Failure rate [%] and average cost of found paths after each iteration.
pub fn iteration_series(records: &[RunRecord], max_iterations: usize) -> Vec<(usize, f64, f64)> {
    (1..=max_iterations)
        .map(|i| {
            let costs: Vec<f64> = records.iter().map(|r| r.cost_at(i)).filter(|c| c.is_finite()).collect();
            let fail = 100.0 * (records.len() - costs.len()) as f64 / records.len().max(1) as f64;
            let avg = if costs.is_empty() {
                f64::NAN
            } else {
                costs.iter().sum::<f64>() / costs.len() as f64
            };
            (i, fail, avg)
        })
        .collect()
}

pub const RUN_CSV_HEADER: &str = "scenario,seed,profile,success,iterations,first_found,plan_ms,optimize_ms,cost,direction_changes";

pub fn write_runs_csv(records: &[RunRecord], mut w: impl Write) -> std::io::Result<()> {
    writeln!(w, "{RUN_CSV_HEADER}")?;
    for r in records {
        writeln!(
            w,
            "{},{},{},{},{},{},{:.3},{:.3},{},{}",
            r.scenario,
            r.seed,
            r.profile,
            r.success,
            r.iterations,
            r.first_found.map_or(String::new(), |v| v.to_string()),
            r.plan_ms,
            r.optimize_ms,
            if r.success { format!("{:.6}", r.cost) } else { String::new() },
            r.direction_changes
        )?;
    }
    Ok(())
}

fn optional<T: std::str::FromStr>(s: &str) -> Result<Option<T>, T::Err> {
    if s.is_empty() {
        Ok(None)
    } else {
        s.parse().map(Some)
    }
}

/// Parses a file written by [`write_runs_csv`]. Improvement histories are not
/// part of the file.
pub fn read_runs_csv(text: &str) -> Result<Vec<RunRecord>, String> {
    let mut lines = text.lines();
    if lines.next() != Some(RUN_CSV_HEADER) {
        return Err("unexpected header".into());
    }
    lines
        .enumerate()
        .map(|(i, line)| {
            let f: Vec<&str> = line.split(',').collect();
            if f.len() != 10 {
                return Err(format!("line {}: expected 10 fields", i + 2));
            }
            let bad = |what: &str| format!("line {}: bad {what}", i + 2);
            Ok(RunRecord {
                scenario: f[0].to_string(),
                seed: f[1].parse().map_err(|_| bad("seed"))?,
                profile: f[2].to_string(),
                success: f[3].parse().map_err(|_| bad("success"))?,
                iterations: f[4].parse().map_err(|_| bad("iterations"))?,
                first_found: optional(f[5]).map_err(|_| bad("first_found"))?,
                plan_ms: f[6].parse().map_err(|_| bad("plan_ms"))?,
                optimize_ms: f[7].parse().map_err(|_| bad("optimize_ms"))?,
                cost: optional(f[8]).map_err(|_| bad("cost"))?.unwrap_or(f64::INFINITY),
                direction_changes: f[9].parse().map_err(|_| bad("direction_changes"))?,
                improvements: Vec::new(),
            })
        })
        .collect()
}

impl fmt::Display for GroupStats {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(f, "runs                         {}", self.runs)?;
        writeln!(f, "failure rate [%]             {:.2}", self.failure_rate)?;
        writeln!(
            f,
            "time max/avg/std [ms]        {:.2} / {:.2} / {:.2}",
            self.time_ms.max, self.time_ms.avg, self.time_ms.std
        )?;
        writeln!(
            f,
            "  of which optimisation      {:.2} / {:.2} / {:.2}",
            self.optimize_ms.max, self.optimize_ms.avg, self.optimize_ms.std
        )?;
        writeln!(
            f,
            "cost max/avg/std [m]         {:.2} / {:.2} / {:.2}",
            self.cost.max, self.cost.avg, self.cost.std
        )?;
        match self.min_iterations_all_found {
            Some(i) => write!(f, "iterations for 100% found    {i}"),
            None => write!(f, "iterations for 100% found    -"),
        }
    }
}

//! Command-line interface of the `park-rrt` binary.

use crate::campaign::{self, iteration_series, run_batch, summarize, Job, Profile, RunRecord};
use crate::follow::{simulate, FollowerParams};
use crate::geom::CarDimensions;
use crate::par::{self, Exec};
use crate::rrt::PlannerParams;
use crate::scenario::{generate_simple, PathRecord, Scenario, ScenarioError};
use crate::slot::SlotParams;
use crate::steer::Path;
use crate::svg::{self, Drawing};
use clap::{Parser, Subcommand};
use std::fs;
use std::io::Write;
use std::path::PathBuf;

pub const EXIT_OK: i32 = 0;
pub const EXIT_USAGE: i32 = 1;
pub const EXIT_NO_PATH: i32 = 2;
pub const EXIT_INVALID: i32 = 3;
pub const EXIT_IO: i32 = 4;

#[derive(Debug, Parser)]
#[command(name = "park-rrt", version, about = "Parking path planner for car-like vehicles")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Plan a path for one scenario file.
    Plan {
        file: PathBuf,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long, default_value_t = 1000)]
        imax: usize,
        /// Comma separated: heuristic,goalzone,opt,anytime,steerentry,kd
        #[arg(long, value_delimiter = ',')]
        disable: Vec<String>,
        #[arg(long, default_value = "all")]
        profile: String,
        #[arg(long)]
        svg: Option<PathBuf>,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Generate random scenarios with car-sized obstacles.
    Gen {
        #[arg(long)]
        obstacles: usize,
        #[arg(long)]
        count: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long)]
        outdir: PathBuf,
    },
    /// Run a planning campaign over a directory of scenarios.
    Bench {
        #[arg(long)]
        scenarios: PathBuf,
        #[arg(long, default_value_t = 1)]
        runs: u64,
        #[arg(long, default_value = "all")]
        profile: String,
        #[arg(long)]
        csv: Option<PathBuf>,
        /// Run every enhancement set and write per-iteration series.
        #[arg(long)]
        ablation: bool,
        #[arg(long)]
        series: Option<PathBuf>,
        #[arg(long, default_value_t = 1000)]
        imax: usize,
    },
    /// Simulate following a planned path.
    Follow {
        path: PathBuf,
        #[arg(long, default_value_t = 0.0)]
        delay: f64,
        #[arg(long)]
        csv: Option<PathBuf>,
    },
}

#[derive(Debug)]
struct Failure {
    code: i32,
    message: String,
}

impl Failure {
    fn new(code: i32, message: impl Into<String>) -> Self {
        Self {
            code,
            message: message.into(),
        }
    }
}

impl From<ScenarioError> for Failure {
    fn from(e: ScenarioError) -> Self {
        let code = if matches!(e, ScenarioError::Io { .. }) { EXIT_IO } else { EXIT_INVALID };
        Failure::new(code, e.to_string())
    }
}

fn io_err(path: &std::path::Path) -> impl FnOnce(std::io::Error) -> Failure + '_ {
    move |e| Failure::new(EXIT_IO, format!("{}: {e}", path.display()))
}

fn write_file(path: &std::path::Path, contents: &[u8]) -> Result<(), Failure> {
    fs::write(path, contents).map_err(io_err(path))
}

/// Enhancement set of `profile` with the `disable` switches turned off.
pub fn planner_params(profile: &str, disable: &[String], seed: u64, imax: usize) -> Result<PlannerParams, String> {
    let mut e = Profile::parse(profile)
        .ok_or_else(|| format!("unknown profile {profile}"))?
        .enhancements();
    for d in disable {
        match d.trim() {
            "heuristic" => e.cost_heuristic = false,
            "goalzone" => e.goal_zone = false,
            "opt" => e.optimization = false,
            "anytime" => e.anytime_reuse = false,
            "steerentry" => e.steer_toward_entry = false,
            "kd" => e.kd_index = false,
            "" => {}
            other => return Err(format!("unknown enhancement {other}")),
        }
    }
    let p = PlannerParams {
        seed,
        max_iterations: imax,
        enhancements: e,
        ..PlannerParams::default()
    };
    p.validate()?;
    Ok(p)
}

fn cmd_plan(
    file: PathBuf,
    params: PlannerParams,
    svg_out: Option<PathBuf>,
    out: Option<PathBuf>,
    log: &mut dyn Write,
) -> Result<(), Failure> {
    let s = Scenario::load(&file)?;
    let candidates = s
        .entry_candidates(&SlotParams::default())
        .map_err(|e| Failure::new(EXIT_NO_PATH, format!("NoPath: {e}")))?;
    let sol = s.solve_with(&candidates, &params);
    if let Some(f) = &svg_out {
        let entries: Vec<_> = candidates.iter().map(|c| c.entry).collect();
        let drawing = Drawing {
            entries: &entries,
            goal: Some(candidates[sol.candidate].goal),
            unoptimized: sol.unoptimized.as_ref(),
            path: sol.path.as_ref(),
        };
        write_file(f, svg::render(&s, &drawing).as_bytes())?;
    }
    let Some(path) = sol.path else {
        return Err(Failure::new(
            EXIT_NO_PATH,
            format!("NoPath: {} after {} iterations", s.name, sol.counters.iterations),
        ));
    };
    let record = PathRecord::new(&path, &s.vehicle);
    let mut text = serde_json::to_string_pretty(&record).expect("serialisable");
    text.push('\n');
    match out {
        Some(f) => write_file(&f, text.as_bytes())?,
        None => {
            let _ = std::io::stdout().write_all(text.as_bytes());
        }
    }
    let _ = writeln!(
        log,
        "{}: cost {:.3} m, {} direction changes, {} iterations",
        s.name, record.cost, record.direction_changes, sol.counters.iterations
    );
    Ok(())
}

fn cmd_gen(obstacles: usize, count: usize, seed: u64, outdir: PathBuf, log: &mut dyn Write) -> Result<(), Failure> {
    fs::create_dir_all(&outdir).map_err(io_err(&outdir))?;
    for i in 0..count as u64 {
        let s = generate_simple(obstacles, seed.wrapping_add(i))?;
        s.save(outdir.join(format!("{}.json", s.name)))?;
    }
    let _ = writeln!(log, "wrote {count} scenarios to {}", outdir.display());
    Ok(())
}

fn load_dir(dir: &std::path::Path) -> Result<Vec<Scenario>, Failure> {
    let mut files: Vec<PathBuf> = fs::read_dir(dir)
        .map_err(io_err(dir))?
        .filter_map(|e| e.ok().map(|e| e.path()))
        .filter(|p| p.extension().is_some_and(|x| x == "json"))
        .collect();
    files.sort();
    if files.is_empty() {
        return Err(Failure::new(EXIT_IO, format!("{}: no scenario files", dir.display())));
    }
    files.iter().map(|f| Scenario::load(f).map_err(Failure::from)).collect()
}

#[allow(clippy::too_many_arguments)]
fn cmd_bench(
    dir: PathBuf,
    runs: u64,
    profile: String,
    csv: Option<PathBuf>,
    ablation: bool,
    series: Option<PathBuf>,
    imax: usize,
    log: &mut dyn Write,
) -> Result<(), Failure> {
    let scenarios = load_dir(&dir)?;
    let profiles = if ablation {
        Profile::ABLATION.to_vec()
    } else {
        vec![Profile::parse(&profile).ok_or_else(|| Failure::new(EXIT_USAGE, format!("unknown profile {profile}")))?]
    };
    let jobs: Vec<Job> = profiles
        .iter()
        .flat_map(|&p| (0..scenarios.len()).flat_map(move |s| (0..runs).map(move |seed| Job { scenario: s, seed, profile: p })))
        .collect();
    let base = PlannerParams {
        max_iterations: imax,
        ..PlannerParams::default()
    };
    let records = par::with_threads(par::threads_from_env(), || {
        run_batch(&scenarios, &jobs, &SlotParams::default(), &base, Exec::Parallel)
    });
    let mut buf = Vec::new();
    campaign::write_runs_csv(&records, &mut buf).expect("in-memory write");
    if let Some(f) = &csv {
        write_file(f, &buf)?;
    }
    let written = campaign::read_runs_csv(std::str::from_utf8(&buf).expect("utf-8")).expect("own output parses");
    for p in &profiles {
        let group: Vec<RunRecord> = written.iter().filter(|r| r.profile == p.name()).cloned().collect();
        let _ = writeln!(log, "== {p} ==\n{}", summarize(&group));
    }
    if ablation || series.is_some() {
        let mut buf = String::from("profile,iteration,failure_rate,avg_cost\n");
        for p in &profiles {
            let group: Vec<RunRecord> = records.iter().filter(|r| r.profile == p.name()).cloned().collect();
            for (i, fail, avg) in iteration_series(&group, imax) {
                buf.push_str(&format!("{p},{i},{fail:.4},{avg:.6}\n"));
            }
        }
        let target = series.or_else(|| csv.as_ref().map(|c| c.with_extension("series.csv")));
        if let Some(f) = target {
            write_file(&f, buf.as_bytes())?;
        }
    }
    Ok(())
}

fn cmd_follow(path: PathBuf, delay: f64, csv: Option<PathBuf>, log: &mut dyn Write) -> Result<(), Failure> {
    let text = fs::read_to_string(&path).map_err(io_err(&path))?;
    let record: PathRecord = serde_json::from_str(&text).map_err(|e| Failure::new(EXIT_INVALID, format!("{}: {e}", path.display())))?;
    let p = Path::new(record.configs);
    let d = CarDimensions::zoe();
    let params = FollowerParams {
        actuation_delay: delay,
        ..FollowerParams::default()
    };
    let trace = simulate(&p, &d, &params).map_err(|e| Failure::new(EXIT_NO_PATH, e.to_string()))?;
    if let Some(f) = &csv {
        let mut buf = Vec::new();
        trace.write_csv(&mut buf).expect("in-memory write");
        write_file(f, &buf)?;
    }
    let goal = *p.last().expect("non-empty");
    let (lon, lat) = trace.goal_error(&goal);
    let _ = writeln!(
        log,
        "segments {}\nfinal error longitudinal {lon:.4} m, lateral {lat:.4} m\nmax |e_lat| {:.4} m, max |e_long| {:.4} m",
        trace.segments,
        trace.max_abs(|r| r.e_lat),
        trace.max_abs(|r| r.e_long)
    );
    Ok(())
}

/// Runs the command line `args` and returns the process exit code.
pub fn run<I, T>(args: I, log: &mut dyn Write) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let _ = write!(log, "{e}");
            return if e.use_stderr() { EXIT_USAGE } else { EXIT_OK };
        }
    };
    let result = match cli.command {
        Command::Plan {
            file,
            seed,
            imax,
            disable,
            profile,
            svg,
            out,
        } => match planner_params(&profile, &disable, seed, imax) {
            Ok(p) => cmd_plan(file, p, svg, out, log),
            Err(e) => Err(Failure::new(EXIT_USAGE, e)),
        },
        Command::Gen {
            obstacles,
            count,
            seed,
            outdir,
        } => cmd_gen(obstacles, count, seed, outdir, log),
        Command::Bench {
            scenarios,
            runs,
            profile,
            csv,
            ablation,
            series,
            imax,
        } => cmd_bench(scenarios, runs, profile, csv, ablation, series, imax, log),
        Command::Follow { path, delay, csv } => cmd_follow(path, delay, csv, log),
    };
    match result {
        Ok(()) => EXIT_OK,
        Err(f) => {
            let _ = writeln!(log, "error: {}", f.message);
            f.code
        }
    }
}

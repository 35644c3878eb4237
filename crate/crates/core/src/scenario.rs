//! Scenario model, JSON file format, validation and random generation.

use crate::geom::{collides, frame, Approach, CarDimensions, Configuration, ConvexPolygon, GeomError, ParkingSlot, SlotKind, Vec2};
use crate::rrt::{plan, Counters, Improvement, PlannerParams, Problem};
use crate::slot::{plan_slot, EntryCandidate, SlotError, SlotParams};
use crate::steer::Path;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use std::f64::consts::PI;
use std::path::Path as FsPath;
use std::time::Duration;
use thiserror::Error;

/// Length and width of generated obstacles, the size of the car.
pub const OBSTACLE_SIZE: (f64, f64) = (4.084, 1.771);
/// Inner extent of the walled area of generated scenarios.
pub const AREA: Bounds = Bounds {
    xmin: -5.5,
    xmax: 39.5,
    ymin: -15.0,
    ymax: 15.0,
};
pub const WALL_THICKNESS: f64 = 0.5;
/// Region of obstacle centres in generated scenarios.
pub const OBSTACLE_REGION: Bounds = Bounds {
    xmin: 10.0,
    xmax: 30.0,
    ymin: -15.0,
    ymax: 15.0,
};
/// Goal configuration of generated scenarios.
pub const SIMPLE_GOAL: (f64, f64, f64) = (34.0, 0.0, 0.0);
const MAX_ATTEMPTS: usize = 10_000;
/// Stream of the scenario generator, kept apart from the planner's stream 0.
pub const GENERATOR_STREAM: u64 = 1;

#[derive(Debug, Error)]
pub enum ScenarioError {
    #[error("cannot read or write {path}: {source}")]
    Io { path: String, source: std::io::Error },
    #[error("malformed scenario: {0}")]
    Parse(#[from] serde_json::Error),
    #[error("obstacle {index}: {source}")]
    Obstacle { index: usize, source: GeomError },
    #[error("vehicle: {0}")]
    Vehicle(GeomError),
    #[error("slot: {0}")]
    Slot(GeomError),
    #[error("bounds are empty")]
    EmptyBounds,
    #[error("initial configuration lies outside the bounds")]
    InitOutOfBounds,
    #[error("slot lies outside the bounds")]
    SlotOutOfBounds,
    #[error("slot is obstructed by obstacle {0}")]
    SlotObstructed(usize),
    #[error("initial configuration collides with obstacle {0}")]
    InitCollides(usize),
    #[error("could not place obstacle {0} without overlap")]
    Generation(usize),
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Bounds {
    pub xmin: f64,
    pub xmax: f64,
    pub ymin: f64,
    pub ymax: f64,
}

impl Bounds {
    pub fn contains(&self, p: Vec2) -> bool {
        p.x >= self.xmin && p.x <= self.xmax && p.y >= self.ymin && p.y <= self.ymax
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
struct PoseFile {
    x: f64,
    y: f64,
    theta: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
struct SlotFile {
    px: f64,
    py: f64,
    delta: f64,
    width: f64,
    length: f64,
    kind: SlotKind,
    #[serde(default)]
    approach: Approach,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct ScenarioFile {
    name: String,
    bounds: Bounds,
    init: PoseFile,
    slot: SlotFile,
    obstacles: Vec<Vec<[f64; 2]>>,
    vehicle: CarDimensions,
}

/// A parking problem: workspace, obstacles, vehicle, start and slot.
#[derive(Debug, Clone, PartialEq)]
pub struct Scenario {
    pub name: String,
    pub bounds: Bounds,
    pub init: Configuration,
    pub slot: ParkingSlot,
    pub obstacles: Vec<ConvexPolygon>,
    pub vehicle: CarDimensions,
}

impl Scenario {
    pub fn from_json(text: &str) -> Result<Self, ScenarioError> {
        let f: ScenarioFile = serde_json::from_str(text)?;
        let obstacles = f
            .obstacles
            .iter()
            .enumerate()
            .map(|(index, pts)| {
                ConvexPolygon::new(pts.iter().map(|p| Vec2::new(p[0], p[1])).collect())
                    .map_err(|source| ScenarioError::Obstacle { index, source })
            })
            .collect::<Result<Vec<_>, _>>()?;
        let s = Scenario {
            name: f.name,
            bounds: f.bounds,
            init: Configuration::new(f.init.x, f.init.y, f.init.theta),
            slot: ParkingSlot::new(Vec2::new(f.slot.px, f.slot.py), f.slot.delta, f.slot.width, f.slot.length, f.slot.kind)
                .with_approach(f.slot.approach),
            obstacles,
            vehicle: f.vehicle,
        };
        s.validate()?;
        Ok(s)
    }

    pub fn to_json(&self) -> String {
        let f = ScenarioFile {
            name: self.name.clone(),
            bounds: self.bounds,
            init: PoseFile {
                x: self.init.x,
                y: self.init.y,
                theta: self.init.theta,
            },
            slot: SlotFile {
                px: self.slot.p.x,
                py: self.slot.p.y,
                delta: self.slot.delta,
                width: self.slot.width,
                length: self.slot.length,
                kind: self.slot.kind,
                approach: self.slot.approach,
            },
            obstacles: self.obstacles.iter().map(|o| o.vertices().iter().map(|v| [v.x, v.y]).collect()).collect(),
            vehicle: self.vehicle,
        };
        let mut out = serde_json::to_string_pretty(&f).expect("serialisable");
        out.push('\n');
        out
    }

    pub fn load(path: impl AsRef<FsPath>) -> Result<Self, ScenarioError> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|source| ScenarioError::Io {
            path: path.display().to_string(),
            source,
        })?;
        Self::from_json(&text)
    }

    pub fn save(&self, path: impl AsRef<FsPath>) -> Result<(), ScenarioError> {
        let path = path.as_ref();
        std::fs::write(path, self.to_json()).map_err(|source| ScenarioError::Io {
            path: path.display().to_string(),
            source,
        })
    }

    pub fn validate(&self) -> Result<(), ScenarioError> {
        self.vehicle.validate().map_err(ScenarioError::Vehicle)?;
        self.slot.validate(&self.vehicle).map_err(ScenarioError::Slot)?;
        let b = &self.bounds;
        if !(b.xmin < b.xmax && b.ymin < b.ymax) {
            return Err(ScenarioError::EmptyBounds);
        }
        if !b.contains(self.init.position()) {
            return Err(ScenarioError::InitOutOfBounds);
        }
        if !self.slot.corners().iter().all(|c| b.contains(*c)) {
            return Err(ScenarioError::SlotOutOfBounds);
        }
        let rect = self.slot.rectangle();
        if let Some(i) = self.obstacles.iter().position(|o| collides(&rect, o)) {
            return Err(ScenarioError::SlotObstructed(i));
        }
        let f = frame(&self.init, &self.vehicle);
        if let Some(i) = self.obstacles.iter().position(|o| collides(&f, o)) {
            return Err(ScenarioError::InitCollides(i));
        }
        Ok(())
    }

    pub fn entry_candidates(&self, params: &SlotParams) -> Result<Vec<EntryCandidate>, SlotError> {
        plan_slot(&self.slot, &self.vehicle, params)
    }

    /// Plans the whole manoeuvre: out-of-slot path to an entry followed by
    /// that entry's in-slot path.
    pub fn solve(&self, slot_params: &SlotParams, params: &PlannerParams) -> Result<Solution, SlotError> {
        let candidates = self.entry_candidates(slot_params)?;
        Ok(self.solve_with(&candidates, params))
    }

    pub fn solve_with(&self, candidates: &[EntryCandidate], params: &PlannerParams) -> Solution {
        let problem = Problem {
            init: self.init,
            candidates,
            obstacles: &self.obstacles,
            dims: self.vehicle,
        };
        let out = plan(&problem, params);
        let r = self.vehicle.min_turning_radius();
        let path = out.path.map(|mut p| {
            p.join(&candidates[out.candidate].in_slot_path);
            p
        });
        let unoptimized = out.unoptimized.map(|mut p| {
            p.join(&candidates[out.candidate].in_slot_path);
            p
        });
        Solution {
            unoptimized,
            cost: path.as_ref().map_or(f64::INFINITY, |p| p.cost(r)),
            out_of_slot_cost: out.cost,
            candidate: out.candidate,
            path,
            improvements: out
                .improvements
                .iter()
                .map(|m| Improvement {
                    cost: m.cost + candidates[m.candidate].in_slot_path.cost(r),
                    ..*m
                })
                .collect(),
            counters: out.counters,
            optimize_time: out.optimize_time,
        }
    }
}

/// Result of planning a scenario.
#[derive(Debug, Clone)]
pub struct Solution {
    /// Full path from the initial to the goal configuration.
    pub path: Option<Path>,
    /// Full path before optimisation, when the planner optimised it.
    pub unoptimized: Option<Path>,
    pub cost: f64,
    pub out_of_slot_cost: f64,
    pub candidate: usize,
    pub counters: Counters,
    /// Improvements of the full path cost during planning.
    pub improvements: Vec<Improvement>,
    pub optimize_time: Duration,
}

impl Solution {
    pub fn found(&self) -> bool {
        self.path.is_some()
    }

    /// Iteration at which the first path was found.
    pub fn first_found(&self) -> Option<usize> {
        self.improvements.first().map(|m| m.iteration)
    }

    /// Full path cost known after `iteration` iterations.
    pub fn cost_at(&self, iteration: usize) -> f64 {
        self.improvements
            .iter()
            .take_while(|m| m.iteration <= iteration)
            .last()
            .map_or(f64::INFINITY, |m| m.cost)
    }
}

/// Path file contents.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PathRecord {
    pub configs: Vec<Configuration>,
    pub cost: f64,
    pub direction_changes: usize,
}

impl PathRecord {
    pub fn new(path: &Path, d: &CarDimensions) -> Self {
        Self {
            configs: path.configs.clone(),
            cost: path.cost(d.min_turning_radius()),
            direction_changes: path.direction_changes(),
        }
    }
}

/// Slot of generated scenarios: perpendicular, reversed into, with the goal
/// configuration at [`SIMPLE_GOAL`].
pub fn simple_slot(d: &CarDimensions) -> ParkingSlot {
    let (gx, gy, _) = SIMPLE_GOAL;
    let width = 2.5;
    ParkingSlot::new(Vec2::new(gx + d.df, gy - width / 2.0), PI / 2.0, width, 5.0, SlotKind::Perpendicular)
        .with_approach(Approach::Backward)
}

/// Four wall rectangles just outside `area`.
pub fn walls(area: &Bounds, t: f64) -> Vec<ConvexPolygon> {
    let Bounds { xmin, xmax, ymin, ymax } = *area;
    [
        (Vec2::new(xmin - t, ymin - t), Vec2::new(xmin, ymax + t)),
        (Vec2::new(xmax, ymin - t), Vec2::new(xmax + t, ymax + t)),
        (Vec2::new(xmin, ymin - t), Vec2::new(xmax, ymin)),
        (Vec2::new(xmin, ymax), Vec2::new(xmax, ymax + t)),
    ]
    .into_iter()
    .map(|(a, b)| ConvexPolygon::axis_aligned(a, b))
    .collect()
}

/// Random scenario with `k` car-sized obstacles between the start at the
/// origin and the slot.
pub fn generate_simple(k: usize, seed: u64) -> Result<Scenario, ScenarioError> {
    let d = CarDimensions::zoe();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(GENERATOR_STREAM);
    let init = Configuration::new(0.0, 0.0, 0.0);
    let slot = simple_slot(&d);
    let wall = walls(&AREA, WALL_THICKNESS);
    let rect = slot.rectangle();
    let start = frame(&init, &d);
    let (len, wid) = OBSTACLE_SIZE;
    let r = OBSTACLE_REGION;
    let mut obstacles: Vec<ConvexPolygon> = Vec::with_capacity(k + 4);
    for i in 0..k {
        let mut placed = false;
        for _ in 0..MAX_ATTEMPTS {
            let c = Vec2::new(rng.gen_range(r.xmin..r.xmax), rng.gen_range(r.ymin..r.ymax));
            let h = PI - rng.gen_range(0.0..2.0 * PI);
            let o = ConvexPolygon::rectangle(c, h, len, wid);
            let clash = obstacles.iter().chain(&wall).any(|q| collides(q, &o)) || collides(&rect, &o) || collides(&start, &o);
            if !clash {
                obstacles.push(o);
                placed = true;
                break;
            }
        }
        if !placed {
            return Err(ScenarioError::Generation(i));
        }
    }
    obstacles.extend(wall);
    Ok(Scenario {
        name: format!("simple-k{k}-s{seed}"),
        bounds: Bounds {
            xmin: AREA.xmin - WALL_THICKNESS,
            xmax: AREA.xmax + WALL_THICKNESS,
            ymin: AREA.ymin - WALL_THICKNESS,
            ymax: AREA.ymax + WALL_THICKNESS,
        },
        init,
        slot,
        obstacles,
        vehicle: d,
    })
}

const FIXTURES: [&str; 8] = [
    include_str!("../fixtures/scenario-1.json"),
    include_str!("../fixtures/scenario-2.json"),
    include_str!("../fixtures/scenario-3.json"),
    include_str!("../fixtures/scenario-4.json"),
    include_str!("../fixtures/scenario-5.json"),
    include_str!("../fixtures/scenario-6.json"),
    include_str!("../fixtures/scenario-7.json"),
    include_str!("../fixtures/scenario-8.json"),
];

/// The eight bundled real-world style scenarios.
pub fn realworld_fixtures() -> Vec<Scenario> {
    FIXTURES
        .iter()
        .map(|t| Scenario::from_json(t).expect("bundled fixture is valid"))
        .collect()
}

/// Source text of bundled fixture `n` (1-based).
pub fn fixture_json(n: usize) -> Option<&'static str> {
    FIXTURES.get(n.checked_sub(1)?).copied()
}

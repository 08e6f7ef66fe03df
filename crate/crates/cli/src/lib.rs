//! Scenario loading, check orchestration and report emission for `coarse`.

pub mod checks;
pub mod report;
pub mod scenario;

use checks::{evaluate, observe, Check, Outcome};
use coarse_core::{Exec, Tolerances};
use report::{Report, Timing};
use scenario::{RunConfig, Scenario, ToleranceOverrides, World};
use std::path::Path;
use std::time::Instant;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum CliError {
    #[error("{file}: {message}")]
    Parse { file: String, message: String },
    #[error("unsupported schema version {0}")]
    Schema(u32),
    #[error("unresolved {kind} `{name}`")]
    UnresolvedName { kind: &'static str, name: String },
    #[error("tolerance {key} = {value} is out of range (0, 0.1]")]
    ToleranceOutOfRange { key: String, value: f64 },
    #[error("invalid scenario: {0}")]
    Invalid(String),
    #[error("{0}")]
    Io(String),
}

/// Scenarios shipped with the binary, addressable by name.
pub const BUNDLED: [(&str, &str); 6] = [
    ("reflection", include_str!("../scenarios/reflection.toml")),
    ("bz2_circle", include_str!("../scenarios/bz2_circle.toml")),
    ("so2_plane", include_str!("../scenarios/so2_plane.toml")),
    (
        "omega_collapse",
        include_str!("../scenarios/omega_collapse.toml"),
    ),
    (
        "adjunction_random",
        include_str!("../scenarios/adjunction_random.toml"),
    ),
    (
        "trivial_action",
        include_str!("../scenarios/trivial_action.toml"),
    ),
];

pub fn bundled(name: &str) -> Option<&'static str> {
    BUNDLED.iter().find(|(n, _)| *n == name).map(|(_, s)| *s)
}

/// Command-line overrides; each wins over the scenario's own setting.
#[derive(Debug, Clone, Default)]
pub struct Overrides {
    pub seed: Option<u64>,
    pub samples: Option<usize>,
    pub tol: ToleranceOverrides,
    pub fail_fast: bool,
    pub timing: bool,
}

/// A file path, or the name of a bundled scenario when no such file exists.
pub fn load(source: &str) -> Result<Scenario, CliError> {
    let path = Path::new(source);
    if path.exists() {
        let text =
            std::fs::read_to_string(path).map_err(|e| CliError::Io(format!("{source}: {e}")))?;
        return scenario::parse(&text, source);
    }
    match bundled(source) {
        Some(text) => scenario::parse(text, &format!("{source}.toml")),
        None => Err(CliError::Io(format!(
            "{source}: no such file or bundled scenario"
        ))),
    }
}

pub fn config(s: &Scenario, o: &Overrides) -> Result<RunConfig, CliError> {
    let samples = o.samples.or(s.samples).unwrap_or(64);
    if samples == 0 {
        return Err(CliError::Invalid("sample count must be positive".into()));
    }
    Ok(RunConfig {
        seed: o.seed.or(s.seed).unwrap_or(0),
        samples,
        tol: s.tolerances.merged(o.tol).apply(Tolerances::default())?,
    })
}

fn finish(mut r: Report, start: Instant, o: &Overrides) -> Report {
    if o.timing {
        r.timing = Some(Timing {
            wall_clock_ms: start.elapsed().as_secs_f64() * 1e3,
        });
    }
    r
}

/// Evaluate assertions in declaration order; concurrently unless failing fast.
fn evaluate_all<'a>(
    w: &World,
    assertions: impl Iterator<Item = (usize, &'a checks::Assertion)>,
    fail_fast: bool,
) -> Result<(Vec<Outcome>, bool), CliError> {
    let items: Vec<(usize, &checks::Assertion)> = assertions.collect();
    if fail_fast {
        let mut out = Vec::new();
        for (pos, (i, a)) in items.iter().enumerate() {
            let o = evaluate(*i, w, a)?;
            let stop = !o.matched;
            out.push(o);
            if stop {
                return Ok((out, pos + 1 < items.len()));
            }
        }
        return Ok((out, false));
    }
    let results = Exec::default().map(&items, |(i, a)| evaluate(*i, w, a));
    Ok((results.into_iter().collect::<Result<Vec<_>, _>>()?, false))
}

pub fn run(source: &str, o: &Overrides) -> Result<Report, CliError> {
    let start = Instant::now();
    let s = load(source)?;
    let cfg = config(&s, o)?;
    let w = World::build(&s, cfg)?;
    let (outcomes, stopped) = evaluate_all(&w, s.assertions.iter().enumerate(), o.fail_fast)?;
    Ok(finish(
        Report::new("run", &s.name, cfg, outcomes, stopped),
        start,
        o,
    ))
}

/// The three partitions of `list`, followed by the scenario's own partition assertions on it.
pub fn classify(source: &str, list: &str, o: &Overrides) -> Result<Report, CliError> {
    let start = Instant::now();
    let s = load(source)?;
    let cfg = config(&s, o)?;
    let w = World::build(&s, cfg)?;
    if !w.lists.contains_key(list) {
        return Err(CliError::UnresolvedName {
            kind: "list",
            name: list.to_string(),
        });
    }
    let l = list.to_string();
    let mut outcomes = Vec::new();
    for (i, c) in [
        Check::IsomorphismClasses { list: l.clone() },
        Check::DiscretizationClasses { list: l.clone() },
        Check::CoarseClasses { list: l.clone() },
    ]
    .iter()
    .enumerate()
    {
        outcomes.push(observe(i, &w, c)?);
    }
    let on_list = |c: &Check| {
        matches!(c,
            Check::IsomorphismClasses { list } | Check::DiscretizationClasses { list }
            | Check::CoarseClasses { list } | Check::PartitionChain { list } if list == &l)
    };
    let picked = s
        .assertions
        .iter()
        .filter(|a| on_list(&a.check))
        .enumerate()
        .map(|(k, a)| (k + 3, a));
    let (more, stopped) = evaluate_all(&w, picked, o.fail_fast)?;
    outcomes.extend(more);
    Ok(finish(
        Report::new(
            "classify",
            &format!("{} / {list}", s.name),
            cfg,
            outcomes,
            stopped,
        ),
        start,
        o,
    ))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SheafCommand {
    Concreteness,
    Kappa,
    Sheafify,
    AdjunctionCheck,
}

/// Per-presheaf observations, or the scenario's adjunction assertions.
pub fn sheaf(cmd: SheafCommand, source: &str, o: &Overrides) -> Result<Report, CliError> {
    let start = Instant::now();
    let s = load(source)?;
    let cfg = config(&s, o)?;
    let w = World::build(&s, cfg)?;
    let (name, outcomes, stopped) = match cmd {
        SheafCommand::AdjunctionCheck => {
            let picked = s
                .assertions
                .iter()
                .filter(|a| {
                    matches!(
                        a.check,
                        Check::Adjunction { .. } | Check::AdjunctionTrials { .. }
                    )
                })
                .enumerate();
            let (out, stopped) = evaluate_all(&w, picked, o.fail_fast)?;
            ("sheaf adjunction-check", out, stopped)
        }
        _ => {
            let mut out = Vec::new();
            for p in &w.presheaf_order {
                let c = match cmd {
                    SheafCommand::Concreteness => Check::Concrete {
                        presheaf: p.clone(),
                        object: None,
                    },
                    SheafCommand::Kappa => Check::KappaPreserves {
                        presheaf: p.clone(),
                    },
                    _ => Check::SheafCondition {
                        presheaf: p.clone(),
                    },
                };
                out.push(observe(out.len(), &w, &c)?);
                if cmd == SheafCommand::Sheafify {
                    let site = &w.presheaves[p].site;
                    for (k, obj) in site.objects().iter().enumerate() {
                        if site.cover(k).is_some() {
                            let c = Check::Sheafify {
                                presheaf: p.clone(),
                                object: obj.name.clone(),
                            };
                            out.push(observe(out.len(), &w, &c)?);
                        }
                    }
                }
            }
            let label = match cmd {
                SheafCommand::Concreteness => "sheaf concreteness",
                SheafCommand::Kappa => "sheaf kappa",
                _ => "sheaf sheafify",
            };
            (label, out, false)
        }
    };
    Ok(finish(
        Report::new(name, &s.name, cfg, outcomes, stopped),
        start,
        o,
    ))
}

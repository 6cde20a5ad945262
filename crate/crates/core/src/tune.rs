//! Hyperparameter search: random sampling and exhaustive grids over
//! named parameter spaces, plus the built-in decoder and rescoring
//! sweeps shipped with the toolkit.

use std::collections::BTreeMap;
use std::io::{BufRead, Write};
use std::time::Instant;

use rand::seq::SliceRandom;
use rand::Rng;
use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum TuneError {
    #[error("line {line}: {msg}")]
    Parse { line: usize, msg: String },
    #[error("parameter {0:?}: {1}")]
    BadSpec(String, String),
    #[error("empty search space")]
    Empty,
    #[error("sampling without replacement needs a fully discrete space")]
    NotDiscrete,
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

/// One tunable parameter.
#[derive(Debug, Clone, PartialEq)]
pub enum ParamSpec {
    Fixed(f64),
    /// Finite set of values; grids enumerate them, random draws pick
    /// uniformly.
    Choice(Vec<f64>),
    /// Closed interval; random draws are uniform, grids need a step.
    Range { lo: f64, hi: f64, step: Option<f64> },
}

impl ParamSpec {
    fn validate(&self, name: &str) -> Result<(), TuneError> {
        match self {
            ParamSpec::Fixed(v) if !v.is_finite() => {
                Err(TuneError::BadSpec(name.into(), "non-finite value".into()))
            }
            ParamSpec::Choice(vs) if vs.is_empty() => {
                Err(TuneError::BadSpec(name.into(), "empty choice list".into()))
            }
            ParamSpec::Choice(vs) if vs.iter().any(|v| !v.is_finite()) => {
                Err(TuneError::BadSpec(name.into(), "non-finite choice".into()))
            }
            ParamSpec::Range { lo, hi, .. } if !(lo.is_finite() && hi.is_finite() && lo <= hi) => {
                Err(TuneError::BadSpec(name.into(), "bad range bounds".into()))
            }
            ParamSpec::Range { step: Some(s), .. } if !(s.is_finite() && *s > 0.0) => {
                Err(TuneError::BadSpec(name.into(), "bad range step".into()))
            }
            _ => Ok(()),
        }
    }

    fn is_discrete(&self) -> bool {
        match self {
            ParamSpec::Fixed(_) | ParamSpec::Choice(_) => true,
            ParamSpec::Range { lo, hi, step } => step.is_some() || lo == hi,
        }
    }

    /// Values a grid enumerates. Ranges include both endpoints; the last
    /// point is clamped to `hi` so accumulated float error cannot drop it.
    fn grid_values(&self) -> Vec<f64> {
        match self {
            ParamSpec::Fixed(v) => vec![*v],
            ParamSpec::Choice(vs) => vs.clone(),
            ParamSpec::Range { lo, hi, step } => {
                if lo == hi {
                    return vec![*lo];
                }
                let step = match step {
                    Some(s) => *s,
                    None => return vec![*lo, *hi],
                };
                let n = ((hi - lo) / step + 0.5).floor() as usize;
                let mut out: Vec<f64> = (0..=n).map(|i| lo + i as f64 * step).collect();
                if let Some(last) = out.last_mut() {
                    *last = *hi;
                }
                out.dedup_by(|a, b| (*a - *b).abs() < 1e-12);
                out
            }
        }
    }

    fn sample(&self, rng: &mut ChaCha8Rng) -> f64 {
        match self {
            ParamSpec::Fixed(v) => *v,
            ParamSpec::Choice(vs) => vs[rng.gen_range(0..vs.len())],
            ParamSpec::Range { lo, hi, .. } => {
                if lo == hi {
                    *lo
                } else {
                    rng.gen_range(*lo..*hi)
                }
            }
        }
    }
}

/// Named parameters in a fixed (sorted) order so enumeration and output
/// are deterministic.
#[derive(Debug, Clone, Default)]
pub struct SearchSpace {
    pub params: BTreeMap<String, ParamSpec>,
}

pub type ParamPoint = BTreeMap<String, f64>;

#[derive(Debug, Clone)]
pub struct TrialResult {
    pub trial: usize,
    pub point: ParamPoint,
    /// Objective value (lower is better), or the failure message if the
    /// evaluation callback failed. Failures sort after every success.
    pub outcome: Result<f64, String>,
    pub wall_secs: f64,
}

impl TrialResult {
    pub fn objective(&self) -> Option<f64> {
        self.outcome.as_ref().ok().copied()
    }
}

impl SearchSpace {
    pub fn new() -> Self {
        SearchSpace::default()
    }

    pub fn with(mut self, name: &str, spec: ParamSpec) -> Self {
        self.params.insert(name.to_string(), spec);
        self
    }

    pub fn validate(&self) -> Result<(), TuneError> {
        if self.params.is_empty() {
            return Err(TuneError::Empty);
        }
        for (name, spec) in &self.params {
            spec.validate(name)?;
        }
        Ok(())
    }

    pub fn is_discrete(&self) -> bool {
        self.params.values().all(ParamSpec::is_discrete)
    }

    /// Total number of grid points (product of per-parameter counts).
    pub fn grid_size(&self) -> usize {
        self.params
            .values()
            .map(|s| s.grid_values().len())
            .product()
    }

    /// Enumerate the full grid in row-major order over the sorted
    /// parameter names (last name varies fastest).
    pub fn grid_points(&self) -> Vec<ParamPoint> {
        let names: Vec<&String> = self.params.keys().collect();
        let values: Vec<Vec<f64>> = self.params.values().map(|s| s.grid_values()).collect();
        let mut points = vec![ParamPoint::new()];
        for (name, vals) in names.iter().zip(&values) {
            let mut next = Vec::with_capacity(points.len() * vals.len());
            for p in &points {
                for v in vals {
                    let mut q = p.clone();
                    q.insert((*name).clone(), *v);
                    next.push(q);
                }
            }
            points = next;
        }
        points
    }

    /// Draw one point. Each trial uses its own generator seeded from
    /// (seed, trial), so trial k is reproducible regardless of scheduling
    /// or how many trials ran before it.
    pub fn sample_point(&self, seed: u64, trial: u64) -> ParamPoint {
        let mut rng = trial_rng(seed, trial);
        self.params
            .iter()
            .map(|(name, spec)| (name.clone(), spec.sample(&mut rng)))
            .collect()
    }
}

fn trial_rng(seed: u64, trial: u64) -> ChaCha8Rng {
    let mut state = [0u8; 32];
    state[..8].copy_from_slice(&seed.to_le_bytes());
    state[8..16].copy_from_slice(&trial.to_le_bytes());
    ChaCha8Rng::from_seed(state)
}

fn run_trials<F>(points: Vec<ParamPoint>, mut objective: F) -> Vec<TrialResult>
where
    F: FnMut(&ParamPoint) -> Result<f64, String>,
{
    let mut results: Vec<TrialResult> = points
        .into_iter()
        .enumerate()
        .map(|(trial, point)| {
            let start = Instant::now();
            let outcome = objective(&point);
            TrialResult {
                trial,
                point,
                outcome,
                wall_secs: start.elapsed().as_secs_f64(),
            }
        })
        .collect();
    // Best first; failed trials last; ties broken by evaluation order.
    results.sort_by(|a, b| match (a.objective(), b.objective()) {
        (Some(x), Some(y)) => x
            .partial_cmp(&y)
            .expect("objective values are comparable")
            .then(a.trial.cmp(&b.trial)),
        (Some(_), None) => std::cmp::Ordering::Less,
        (None, Some(_)) => std::cmp::Ordering::Greater,
        (None, None) => a.trial.cmp(&b.trial),
    });
    results
}

/// Run `trials` independent uniform draws against an objective (lower is
/// better). Objective failures are recorded on the trial, not raised.
/// Results come back best-first.
pub fn random_search<F>(
    space: &SearchSpace,
    trials: usize,
    seed: u64,
    objective: F,
) -> Result<Vec<TrialResult>, TuneError>
where
    F: FnMut(&ParamPoint) -> Result<f64, String>,
{
    space.validate()?;
    let points = (0..trials)
        .map(|t| space.sample_point(seed, t as u64))
        .collect();
    Ok(run_trials(points, objective))
}

/// Random search without replacement over a fully discrete space: each
/// full pass visits every grid point once in a seed-shuffled order, so
/// `trials >= grid_size` is guaranteed to hit the global optimum.
pub fn random_search_without_replacement<F>(
    space: &SearchSpace,
    trials: usize,
    seed: u64,
    objective: F,
) -> Result<Vec<TrialResult>, TuneError>
where
    F: FnMut(&ParamPoint) -> Result<f64, String>,
{
    space.validate()?;
    if !space.is_discrete() {
        return Err(TuneError::NotDiscrete);
    }
    let grid = space.grid_points();
    let mut points = Vec::with_capacity(trials);
    let mut pass = 0u64;
    while points.len() < trials {
        let mut order: Vec<usize> = (0..grid.len()).collect();
        order.shuffle(&mut trial_rng(seed, pass));
        for i in order {
            if points.len() == trials {
                break;
            }
            points.push(grid[i].clone());
        }
        pass += 1;
    }
    Ok(run_trials(points, objective))
}

/// Evaluate every grid point. Results come back best-first.
pub fn grid_search<F>(space: &SearchSpace, objective: F) -> Result<Vec<TrialResult>, TuneError>
where
    F: FnMut(&ParamPoint) -> Result<f64, String>,
{
    space.validate()?;
    Ok(run_trials(space.grid_points(), objective))
}

/// Built-in search space names accepted by [`builtin_space`].
///
/// The decoder spaces come in CTC/sequence-to-sequence pairs, for n-gram
/// and GCNN fusion LMs, each with a `-librivox` variant for acoustic
/// models trained on the larger unlabeled corpus (those tolerate less
/// LM weight).
pub const BUILTIN_SPACES: &[&str] = &[
    "ctc-ngram",
    "ctc-ngram-librivox",
    "s2s-ngram",
    "s2s-ngram-librivox",
    "ctc-gcnn",
    "ctc-gcnn-librivox",
    "s2s-gcnn",
    "s2s-gcnn-librivox",
    "rescore-ctc-grid",
    "rescore-s2s-random",
];

/// Number of random trials conventionally used with `rescore-s2s-random`.
pub const RESCORE_RANDOM_TRIALS: usize = 1000;

/// Observed optimal LM-weight ranges per (space, dev split), for
/// reference when narrowing a sweep. Not enforced anywhere: they were
/// measured with full-scale acoustic models.
pub const OPTIMAL_LM_WEIGHT_RANGES: &[(&str, &str, (f64, f64))] = &[
    ("ctc-ngram", "clean", (0.8, 1.4)),
    ("ctc-ngram", "other", (1.1, 1.9)),
    ("s2s-ngram", "clean", (0.6, 1.1)),
    ("s2s-ngram", "other", (0.6, 1.2)),
    ("ctc-ngram-librivox", "clean", (0.2, 0.4)),
    ("ctc-ngram-librivox", "other", (0.5, 0.7)),
    ("s2s-ngram-librivox", "clean", (0.0, 0.2)),
    ("s2s-ngram-librivox", "other", (0.1, 0.5)),
    ("ctc-gcnn", "clean", (0.4, 0.8)),
    ("ctc-gcnn", "other", (0.5, 1.1)),
    ("s2s-gcnn", "clean", (0.2, 0.5)),
    ("s2s-gcnn", "other", (0.3, 0.7)),
    ("ctc-gcnn-librivox", "clean", (0.2, 0.5)),
    ("ctc-gcnn-librivox", "other", (0.3, 0.6)),
    ("s2s-gcnn-librivox", "clean", (0.0, 0.4)),
    ("s2s-gcnn-librivox", "other", (0.2, 0.4)),
];

fn range(lo: f64, hi: f64) -> ParamSpec {
    ParamSpec::Range { lo, hi, step: None }
}

fn stepped(lo: f64, hi: f64, step: f64) -> ParamSpec {
    ParamSpec::Range {
        lo,
        hi,
        step: Some(step),
    }
}

/// Look up one of the built-in sweeps by name.
pub fn builtin_space(name: &str) -> Option<SearchSpace> {
    let ctc = |beam: f64, threshold: f64, lm_hi: f64| {
        SearchSpace::new()
            .with("beam", ParamSpec::Fixed(beam))
            .with("token_beam", ParamSpec::Fixed(100.0))
            .with("beam_threshold", ParamSpec::Fixed(threshold))
            .with("lm_weight", range(0.0, lm_hi))
            .with("word_insertion", range(-3.0, 3.0))
    };
    let s2s = |beam: Vec<f64>, token_beam: Vec<f64>, threshold: Vec<f64>, lm_hi: f64| {
        SearchSpace::new()
            .with("beam", ParamSpec::Choice(beam))
            .with("token_beam", ParamSpec::Choice(token_beam))
            .with("beam_threshold", ParamSpec::Choice(threshold))
            .with("lm_weight", range(0.0, lm_hi))
            .with("eos_penalty", range(-10.0, 0.0))
    };
    match name {
        "ctc-ngram" => Some(ctc(500.0, 100.0, 3.0)),
        "ctc-ngram-librivox" => Some(ctc(500.0, 100.0, 1.5)),
        "s2s-ngram" => Some(s2s(
            vec![50.0, 100.0],
            vec![10.0, 50.0],
            vec![10.0, 50.0],
            2.0,
        )),
        "s2s-ngram-librivox" => Some(s2s(
            vec![20.0, 50.0, 100.0],
            vec![3.0, 5.0, 10.0],
            vec![5.0, 10.0, 50.0],
            1.0,
        )),
        "ctc-gcnn" => Some(ctc(250.0, 20.0, 3.0)),
        "ctc-gcnn-librivox" => Some(ctc(250.0, 20.0, 1.5)),
        "s2s-gcnn" => Some(s2s(vec![50.0], vec![10.0, 18.0], vec![10.0, 15.0], 2.0)),
        "s2s-gcnn-librivox" => Some(s2s(
            vec![20.0, 50.0, 100.0],
            vec![3.0, 5.0, 10.0],
            vec![5.0, 10.0, 50.0],
            0.8,
        )),
        "rescore-ctc-grid" => Some(
            SearchSpace::new()
                .with("alpha1", stepped(0.0, 1.0, 0.1))
                .with("alpha2", stepped(-0.3, 0.3, 0.1))
                .with("beta", stepped(0.0, 1.0, 0.1)),
        ),
        "rescore-s2s-random" => Some(
            SearchSpace::new()
                .with("alpha1", range(0.0, 2.5))
                .with("alpha2", range(-1.0, 1.0))
                .with("beta", range(-3.0, 3.0)),
        ),
        _ => None,
    }
}

/// Parse a search space file: one parameter per line,
/// `name fixed V`, `name choice V1,V2,...`, or `name range LO HI [STEP]`.
/// `#` starts a comment; blank lines are skipped.
pub fn load_space<R: BufRead>(source: R) -> Result<SearchSpace, TuneError> {
    let mut space = SearchSpace::new();
    for (no, line) in source.lines().enumerate() {
        let line = line?;
        let no = no + 1;
        let line = line.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        let parts: Vec<&str> = line.split_whitespace().collect();
        if parts.len() < 3 {
            return Err(TuneError::Parse {
                line: no,
                msg: "expected: name kind values...".into(),
            });
        }
        let num = |s: &str| -> Result<f64, TuneError> {
            s.parse().map_err(|_| TuneError::Parse {
                line: no,
                msg: format!("bad number {s:?}"),
            })
        };
        let spec = match (parts[1], parts.len()) {
            ("fixed", 3) => ParamSpec::Fixed(num(parts[2])?),
            ("choice", 3) => ParamSpec::Choice(
                parts[2]
                    .split(',')
                    .map(num)
                    .collect::<Result<Vec<f64>, _>>()?,
            ),
            ("range", 4) => range(num(parts[2])?, num(parts[3])?),
            ("range", 5) => stepped(num(parts[2])?, num(parts[3])?, num(parts[4])?),
            (kind, _) => {
                return Err(TuneError::Parse {
                    line: no,
                    msg: format!("bad parameter spec kind/arity: {kind:?}"),
                })
            }
        };
        spec.validate(parts[0])?;
        space.params.insert(parts[0].to_string(), spec);
    }
    space.validate()?;
    Ok(space)
}

/// Write results as TSV: trial, objective (or ERR:message), then one
/// column per parameter (sorted names), with a header row. Wall time
/// stays on [`TrialResult`] only: emitting it would make otherwise
/// identical runs produce different bytes.
pub fn dump_results<W: Write>(sink: &mut W, results: &[TrialResult]) -> std::io::Result<()> {
    let names: Vec<&String> = match results.first() {
        Some(r) => r.point.keys().collect(),
        None => return Ok(()),
    };
    write!(sink, "trial\tobjective")?;
    for n in &names {
        write!(sink, "\t{n}")?;
    }
    writeln!(sink)?;
    for r in results {
        match &r.outcome {
            Ok(v) => write!(sink, "{}\t{}", r.trial, v)?,
            Err(msg) => write!(sink, "{}\tERR:{}", r.trial, msg.replace(['\t', '\n'], " "))?,
        }
        for n in &names {
            write!(sink, "\t{}", r.point[*n])?;
        }
        writeln!(sink)?;
    }
    Ok(())
}

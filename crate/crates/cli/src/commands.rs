//! The analyze, simulate and sweep commands.

use std::path::{Path, PathBuf};

use delaybound::{
    analyze_topology, classify, disagreement_norms, simulate_full, spectral_decompose, switching_bound_with,
    CrossingKind, CtcrOptions, DelayBound, History, SimConfig, StabilityMap, Thresholds, Verdict,
    DEFAULT_EIGEN_TOL,
};
use nalgebra::DVector;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde_json::{json, Value};

use crate::config::{ProblemConfig, DEFAULT_MARGINAL_BAND, DEFAULT_MAX_STEP, DEFAULT_SEED, DEFAULT_T_END};
use crate::error::CliError;
use crate::output::{num, write_csv, write_json};

const DEFAULT_RECORD_STRIDE: usize = 5;

/// Command-line overrides shared by all commands.
#[derive(Debug, Default, Clone)]
pub struct Overrides {
    pub tau_max: Option<f64>,
    pub unit_circle_tol: Option<f64>,
    pub seed: Option<u64>,
}

pub struct Context {
    pub config: ProblemConfig,
    pub overrides: Overrides,
    pub out: PathBuf,
}

impl Context {
    fn options(&self) -> CtcrOptions {
        let mut opts = CtcrOptions::default();
        if let Some(tol) = self.overrides.unit_circle_tol.or(self.config.analysis.unit_circle_tol) {
            opts.unit_circle_tol = tol;
        }
        opts
    }

    fn eigen_tol(&self) -> f64 {
        self.config.analysis.eigen_tol.unwrap_or(DEFAULT_EIGEN_TOL)
    }

    fn tau_max(&self) -> Option<f64> {
        self.overrides.tau_max.or(self.config.analysis.tau_max)
    }

    fn seed(&self) -> u64 {
        self.overrides.seed.or(self.config.simulation.seed).unwrap_or(DEFAULT_SEED)
    }

    fn map(&self, tau_max: Option<f64>) -> Result<StabilityMap, CliError> {
        let c = &self.config;
        let opts = self.options();
        let map = if c.topologies.len() == 1 {
            analyze_topology(&c.dynamics, &c.topologies[0], tau_max, self.eigen_tol(), &opts)?
        } else {
            switching_bound_with(&c.dynamics, &c.topologies, tau_max, self.eigen_tol(), &opts)?
        };
        Ok(map)
    }

    fn path(&self, name: &str) -> PathBuf {
        self.out.join(name)
    }
}

fn bound_value(b: DelayBound) -> Value {
    num(b.as_f64())
}

fn kind_str(kind: CrossingKind) -> &'static str {
    match kind {
        CrossingKind::Kernel => "kernel",
        CrossingKind::Offspring => "offspring",
    }
}

pub fn summary_json(map: &StabilityMap) -> Value {
    json!({
        "delay_bound": bound_value(map.delay_bound),
        "binding_lambda": map.binding_lambda.map_or(Value::Null, num),
        "stable_pockets": map.stable_pockets.iter()
            .map(|p| json!({"start": num(p.start), "end": bound_value(p.end)}))
            .collect::<Vec<_>>(),
        "nu_at_zero": map.nu_at_zero,
        "tau_max": num(map.tau_max),
        "analyzed_eigenvalues": map.analyzed.iter()
            .map(|a| json!({"lambda": num(a.lambda), "multiplicity": a.multiplicity}))
            .collect::<Vec<_>>(),
        "largest_eigenvalue_binds": map.largest_eigenvalue_binds(),
    })
}

pub fn analyze(ctx: &Context) -> Result<StabilityMap, CliError> {
    let map = ctx.map(ctx.tau_max())?;
    let crossings: Vec<Value> = map
        .crossings
        .iter()
        .map(|c| {
            json!({
                "lambda": num(c.lambda),
                "tau": num(c.tau),
                "omega": num(c.omega),
                "rt": c.root_tendency,
                "multiplicity": c.multiplicity,
                "kind": kind_str(c.kind),
            })
        })
        .collect();
    write_json(&ctx.path("crossings.json"), &Value::Array(crossings))?;
    write_csv(
        &ctx.path("nu.csv"),
        &["tau_start".into(), "tau_end".into(), "nu".into()],
        map.nu_steps.iter().map(|s| vec![s.start, s.end, s.nu as f64]),
    )?;
    write_json(&ctx.path("summary.json"), &summary_json(&map))?;
    Ok(map)
}

/// Seeded states in [-1, 1), shifted so every state component averages to
/// zero across agents.
pub fn default_initial_states(n: usize, p: usize, seed: u64) -> DVector<f64> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut x = DVector::from_fn(n * p, |_, _| rng.random_range(-1.0..1.0));
    for k in 0..p {
        let mean = (0..n).map(|a| x[a * p + k]).sum::<f64>() / n as f64;
        for a in 0..n {
            x[a * p + k] -= mean;
        }
    }
    x
}

pub struct SimOutcome {
    pub tau: f64,
    pub verdict: Verdict,
    pub envelope_ratio: f64,
    pub diverged: bool,
    times: Vec<f64>,
    states: Vec<DVector<f64>>,
    norms: Vec<f64>,
    step: f64,
    t_end: f64,
}

fn check_tau(tau: f64) -> Result<(), CliError> {
    if !tau.is_finite() || tau < 0.0 {
        return Err(CliError::Config(format!("delay must be finite and non-negative, got {tau}")));
    }
    Ok(())
}

fn run_simulation(ctx: &Context, tau: f64) -> Result<SimOutcome, CliError> {
    check_tau(tau)?;
    let c = &ctx.config;
    if c.topologies.len() > 1 {
        log::warn!("simulating the first of {} topologies", c.topologies.len());
    }
    let topology = &c.topologies[0];
    let (n, p) = (topology.n(), c.dynamics.p());
    let x0 = match c.initial_states()? {
        Some(x) => x,
        None => default_initial_states(n, p, ctx.seed()),
    };
    let t_end = c.simulation.t_end.unwrap_or(DEFAULT_T_END.max(40.0 * tau));
    let sim = SimConfig::new(tau, t_end, History::Constant(x0))
        .with_max_step(c.simulation.max_step.unwrap_or(DEFAULT_MAX_STEP))
        .with_record_stride(c.simulation.record_stride.unwrap_or(DEFAULT_RECORD_STRIDE));
    let traj = simulate_full(&c.dynamics, topology, &sim)?;
    let decomp = spectral_decompose(topology, ctx.eigen_tol())?;
    let norms = disagreement_norms(&traj, &decomp, p)?;
    let (verdict, envelope_ratio) = if traj.diverged {
        (Verdict::Unstable, f64::INFINITY)
    } else {
        let cls = classify(&traj.times, &norms, tau, &Thresholds::default())?;
        (cls.verdict, cls.envelope_ratio)
    };
    Ok(SimOutcome {
        tau,
        verdict,
        envelope_ratio,
        diverged: traj.diverged,
        times: traj.times,
        states: traj.states,
        norms,
        step: sim.step,
        t_end,
    })
}

pub fn simulate(ctx: &Context, tau: f64) -> Result<SimOutcome, CliError> {
    let outcome = run_simulation(ctx, tau)?;
    let c = &ctx.config;
    let (n, p) = (c.topologies[0].n(), c.dynamics.p());
    let mut header = vec!["t".to_string()];
    for a in 0..n {
        for k in 0..p {
            header.push(format!("x{a}_{k}"));
        }
    }
    write_csv(
        &ctx.path("trajectory.csv"),
        &header,
        outcome.times.iter().zip(&outcome.states).map(|(t, x)| {
            let mut row = vec![*t];
            row.extend(x.iter().copied());
            row
        }),
    )?;
    write_csv(
        &ctx.path("disagreement.csv"),
        &["t".into(), "disagreement".into()],
        outcome.times.iter().zip(&outcome.norms).map(|(t, v)| vec![*t, *v]),
    )?;
    let seed = if c.simulation.initial_states.is_some() { Value::Null } else { json!(ctx.seed()) };
    write_json(
        &ctx.path("verdict.json"),
        &json!({
            "tau": num(tau),
            "verdict": outcome.verdict.as_str(),
            "envelope_ratio": num(outcome.envelope_ratio),
            "diverged": outcome.diverged,
            "t_end": num(outcome.t_end),
            "step": num(outcome.step),
            "seed": seed,
        }),
    )?;
    Ok(outcome)
}

/// Prediction from the stability map: delays within `band` of a point where
/// NU leaves or returns to zero are predicted marginal.
pub fn predict(map: &StabilityMap, tau: f64, band: f64) -> Verdict {
    let near_switch = map
        .nu_steps
        .windows(2)
        .filter(|w| (w[0].nu == 0) != (w[1].nu == 0))
        .any(|w| (w[1].start - tau).abs() <= band);
    if near_switch {
        Verdict::Marginal
    } else if map.nu_at(tau) == 0 {
        Verdict::Stable
    } else {
        Verdict::Unstable
    }
}

pub struct SweepRow {
    pub tau: f64,
    pub predicted_nu: usize,
    pub predicted: Verdict,
    pub verdict: Verdict,
    pub envelope_ratio: f64,
}

impl SweepRow {
    pub fn consistent(&self) -> bool {
        self.predicted == self.verdict
    }
}

pub fn sweep(ctx: &Context, taus: &[f64]) -> Result<Vec<SweepRow>, CliError> {
    if taus.is_empty() {
        return Err(CliError::Config("the delay list is empty".into()));
    }
    for &t in taus {
        check_tau(t)?;
    }
    let largest = taus.iter().copied().fold(0.0, f64::max);
    let tau_max = ctx.tau_max().map(|t| t.max(1.1 * largest));
    let mut map = ctx.map(tau_max)?;
    if map.tau_max < largest {
        map = ctx.map(Some(1.1 * largest))?;
    }
    let band = ctx.config.simulation.marginal_band.unwrap_or(DEFAULT_MARGINAL_BAND);
    let outcomes: Vec<Result<SimOutcome, CliError>> = std::thread::scope(|s| {
        let handles: Vec<_> = taus.iter().map(|&t| s.spawn(move || run_simulation(ctx, t))).collect();
        handles.into_iter().map(|h| h.join().expect("simulation thread panicked")).collect()
    });
    let mut rows = Vec::with_capacity(taus.len());
    for outcome in outcomes {
        let o = outcome?;
        rows.push(SweepRow {
            tau: o.tau,
            predicted_nu: map.nu_at(o.tau),
            predicted: predict(&map, o.tau, band),
            verdict: o.verdict,
            envelope_ratio: o.envelope_ratio,
        });
    }
    let records: Vec<Value> = rows
        .iter()
        .map(|r| {
            json!({
                "tau": num(r.tau),
                "predicted_nu": r.predicted_nu,
                "predicted": r.predicted.as_str(),
                "verdict": r.verdict.as_str(),
                "envelope_ratio": num(r.envelope_ratio),
                "consistent": r.consistent(),
            })
        })
        .collect();
    write_json(
        &ctx.path("sweep.json"),
        &json!({
            "delay_bound": bound_value(map.delay_bound),
            "marginal_band": num(band),
            "consistent": rows.iter().filter(|r| r.consistent()).count(),
            "total": rows.len(),
            "records": records,
        }),
    )?;
    Ok(rows)
}

pub fn ensure_out_dir(dir: &Path) -> Result<(), CliError> {
    std::fs::create_dir_all(dir)?;
    Ok(())
}

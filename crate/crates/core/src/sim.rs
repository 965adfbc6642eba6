//! Fixed-step simulation of linear delay systems `ẋ = A₀ x + A₁ x(t − τ)`.
//!
//! Classic RK4 with the delayed argument read from a cubic Hermite
//! interpolant of the stored grid (states and derivatives), or from the
//! history function for `t − τ ≤ 0`. The step must resolve the delay with at
//! least 20 points. Used to check stability maps empirically.

use std::fmt;
use std::sync::Arc;

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};
use crate::graph::{transform_state, AgentDynamics, SpectralDecomposition, Subsystem, Topology};

/// Norm above which a run is declared divergent.
const DIVERGENCE_NORM: f64 = 1e150;
const MIN_STEPS_PER_DELAY: f64 = 20.0;
const DEFAULT_MAX_STEP: f64 = 0.01;

/// Initial function on `[−τ, 0]`.
#[derive(Clone)]
pub enum History {
    Constant(DVector<f64>),
    Function {
        dim: usize,
        f: Arc<dyn Fn(f64) -> DVector<f64> + Send + Sync>,
    },
}

impl History {
    pub fn dim(&self) -> usize {
        match self {
            History::Constant(v) => v.len(),
            History::Function { dim, .. } => *dim,
        }
    }

    pub fn eval(&self, t: f64) -> DVector<f64> {
        match self {
            History::Constant(v) => v.clone(),
            History::Function { f, .. } => f(t),
        }
    }

    /// Same history expressed in another basis, `x ↦ m x`.
    pub fn mapped(&self, m: DMatrix<f64>) -> History {
        match self {
            History::Constant(v) => History::Constant(&m * v),
            History::Function { f, .. } => {
                let f = Arc::clone(f);
                History::Function {
                    dim: m.nrows(),
                    f: Arc::new(move |t| &m * f(t)),
                }
            }
        }
    }
}

impl fmt::Debug for History {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            History::Constant(v) => f.debug_tuple("Constant").field(&v.as_slice()).finish(),
            History::Function { dim, .. } => f.debug_struct("Function").field("dim", dim).finish(),
        }
    }
}

#[derive(Debug, Clone)]
pub struct SimConfig {
    pub tau: f64,
    pub t_end: f64,
    pub step: f64,
    pub history: History,
    pub record_stride: usize,
}

impl SimConfig {
    /// Config with the largest step not above `0.01 s` that divides the
    /// delay into at least 20 equal parts.
    pub fn new(tau: f64, t_end: f64, history: History) -> Self {
        SimConfig {
            tau,
            t_end,
            step: grid_step(tau, DEFAULT_MAX_STEP),
            history,
            record_stride: 1,
        }
    }

    pub fn with_max_step(mut self, max_step: f64) -> Self {
        self.step = grid_step(self.tau, max_step);
        self
    }

    pub fn with_record_stride(mut self, stride: usize) -> Self {
        self.record_stride = stride;
        self
    }

    pub fn validate(&self) -> Result<()> {
        let invalid = |msg: String| Err(Error::InvalidSimConfig(msg));
        if !(self.tau >= 0.0) || !self.tau.is_finite() {
            return invalid(format!("delay must be nonnegative, got {}", self.tau));
        }
        if !(self.step > 0.0) || !self.step.is_finite() {
            return invalid(format!("step must be positive, got {}", self.step));
        }
        if self.tau > 0.0 && self.step > self.tau / MIN_STEPS_PER_DELAY * (1.0 + 1e-12) {
            return invalid(format!(
                "step {} does not resolve delay {} (need step <= tau/20)",
                self.step, self.tau
            ));
        }
        if !(self.t_end > 0.0) || !self.t_end.is_finite() {
            return invalid(format!("t_end must be positive, got {}", self.t_end));
        }
        if self.record_stride == 0 {
            return invalid("record_stride must be at least 1".into());
        }
        Ok(())
    }
}

/// Step `τ/m` for the smallest integer `m ≥ 20` with `τ/m ≤ max_step`, or
/// `max_step` itself for an undelayed system.
pub fn grid_step(tau: f64, max_step: f64) -> f64 {
    if tau > 0.0 {
        let parts = (tau / max_step).ceil().max(MIN_STEPS_PER_DELAY);
        tau / parts
    } else {
        max_step
    }
}

/// Recorded samples of a simulation run.
#[derive(Debug, Clone, PartialEq)]
pub struct Trajectory {
    pub times: Vec<f64>,
    pub states: Vec<DVector<f64>>,
    pub tau: f64,
    pub system_id: String,
    /// Set when the state overflowed; the trajectory ends at the last finite sample.
    pub diverged: bool,
}

impl Trajectory {
    pub fn final_state(&self) -> Option<&DVector<f64>> {
        self.states.last()
    }
}

/// Integrates `ẋ = a0 x + a1 x(t − τ)`.
pub fn simulate_linear(
    a0: &DMatrix<f64>,
    a1: &DMatrix<f64>,
    config: &SimConfig,
    system_id: impl Into<String>,
) -> Result<Trajectory> {
    config.validate()?;
    let dim = a0.nrows();
    if config.history.dim() != dim {
        return Err(Error::DimensionMismatch {
            what: "history dimension",
            expected: dim,
            found: config.history.dim(),
        });
    }

    let h = config.step;
    let tau = config.tau;
    let mut delay_steps = tau / h;
    if (delay_steps - delay_steps.round()).abs() < 1e-9 {
        delay_steps = delay_steps.round();
    }
    let total_steps = (config.t_end / h - 1e-9).ceil() as usize;

    let x0 = config.history.eval(0.0);
    let mut xs: Vec<DVector<f64>> = Vec::with_capacity(total_steps + 1);
    let mut fs: Vec<DVector<f64>> = Vec::with_capacity(total_steps + 1);

    // delayed value at grid position `pos` = (t − τ)/h, known up to xs.len() − 1
    let delayed = |pos: f64, xs: &[DVector<f64>], fs: &[DVector<f64>]| -> DVector<f64> {
        if pos <= 0.0 {
            return config.history.eval(pos * h);
        }
        let last = xs.len() - 1;
        let mut i = pos.floor() as usize;
        let mut theta = pos - i as f64;
        if i >= last {
            i = last;
            theta = 0.0;
        }
        if theta < 1e-12 {
            return xs[i].clone();
        }
        hermite(&xs[i], &xs[i + 1], &fs[i], &fs[i + 1], theta, h)
    };

    let rhs = |x: &DVector<f64>, xd: &DVector<f64>| -> DVector<f64> { a0 * x + a1 * xd };
    let undelayed = a0 + a1;

    let f0 = if tau > 0.0 {
        rhs(&x0, &config.history.eval(-tau))
    } else {
        rhs(&x0, &x0)
    };
    xs.push(x0);
    fs.push(f0);

    let mut times = vec![0.0];
    let mut states = vec![xs[0].clone()];
    let mut diverged = false;

    for k in 0..total_steps {
        let x = &xs[k];
        let kf = k as f64;
        let (next, f_next) = if tau > 0.0 {
            let dm = delayed(kf + 0.5 - delay_steps, &xs, &fs);
            let d1 = delayed(kf + 1.0 - delay_steps, &xs, &fs);
            let k1 = &fs[k];
            let k2 = rhs(&(x + k1 * (0.5 * h)), &dm);
            let k3 = rhs(&(x + &k2 * (0.5 * h)), &dm);
            let k4 = rhs(&(x + &k3 * h), &d1);
            let next = x + (k1 + k2 * 2.0 + k3 * 2.0 + k4) * (h / 6.0);
            let f_next = rhs(&next, &d1);
            (next, f_next)
        } else {
            let k1 = &fs[k];
            let k2 = &undelayed * (x + k1 * (0.5 * h));
            let k3 = &undelayed * (x + &k2 * (0.5 * h));
            let k4 = &undelayed * (x + &k3 * h);
            let next = x + (k1 + k2 * 2.0 + k3 * 2.0 + k4) * (h / 6.0);
            let f_next = &undelayed * &next;
            (next, f_next)
        };

        if !next.iter().all(|v| v.is_finite()) || next.norm() > DIVERGENCE_NORM {
            diverged = true;
            break;
        }
        xs.push(next);
        fs.push(f_next);

        if (k + 1) % config.record_stride == 0 {
            times.push((k + 1) as f64 * h);
            states.push(xs[k + 1].clone());
        }
    }

    Ok(Trajectory {
        times,
        states,
        tau,
        system_id: system_id.into(),
        diverged,
    })
}

fn hermite(
    x0: &DVector<f64>,
    x1: &DVector<f64>,
    f0: &DVector<f64>,
    f1: &DVector<f64>,
    theta: f64,
    h: f64,
) -> DVector<f64> {
    let t2 = theta * theta;
    let t3 = t2 * theta;
    let h00 = 2.0 * t3 - 3.0 * t2 + 1.0;
    let h10 = t3 - 2.0 * t2 + theta;
    let h01 = -2.0 * t3 + 3.0 * t2;
    let h11 = t3 - t2;
    x0 * h00 + f0 * (h10 * h) + x1 * h01 + f1 * (h11 * h)
}

/// Simulates the full network `ẋ = (I ⊗ A) x − (L ⊗ BK) x(t − τ)`.
pub fn simulate_full(
    dynamics: &AgentDynamics,
    topology: &Topology,
    config: &SimConfig,
) -> Result<Trajectory> {
    let n = topology.n();
    let a0 = DMatrix::<f64>::identity(n, n).kronecker(dynamics.a());
    let a1 = -topology.laplacian().kronecker(&dynamics.gain_product());
    simulate_linear(&a0, &a1, config, format!("network(n={n})"))
}

/// Simulates one decoupled subsystem `ẋ = A x + C x(t − τ)`.
pub fn simulate_subsystem(subsystem: &Subsystem, config: &SimConfig) -> Result<Trajectory> {
    simulate_linear(
        subsystem.a_matrix(),
        subsystem.c_matrix(),
        config,
        format!("subsystem(lambda={})", subsystem.lambda()),
    )
}

/// Norm of the disagreement blocks `ξ₂ … ξₙ` at each recorded time.
pub fn disagreement_norms(
    trajectory: &Trajectory,
    decomp: &SpectralDecomposition,
    p: usize,
) -> Result<Vec<f64>> {
    trajectory
        .states
        .iter()
        .map(|x| {
            let xi = transform_state(x, decomp, p)?;
            Ok(xi.rows(p, xi.len() - p).norm())
        })
        .collect()
}

/// Euclidean norm of each recorded state.
pub fn state_norms(trajectory: &Trajectory) -> Vec<f64> {
    trajectory.states.iter().map(|x| x.norm()).collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Verdict {
    Stable,
    Marginal,
    Unstable,
}

impl Verdict {
    pub fn as_str(&self) -> &'static str {
        match self {
            Verdict::Stable => "stable",
            Verdict::Marginal => "marginal",
            Verdict::Unstable => "unstable",
        }
    }
}

impl fmt::Display for Verdict {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

/// Envelope-ratio thresholds. The band between them reads as marginal; it
/// is a heuristic, not a stability proof.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Thresholds {
    pub decay_ratio: f64,
    pub growth_ratio: f64,
}

impl Default for Thresholds {
    fn default() -> Self {
        Thresholds {
            decay_ratio: 0.5,
            growth_ratio: 2.0,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Classification {
    pub verdict: Verdict,
    /// Peak of the last quarter of the run over the peak of the third quarter.
    pub envelope_ratio: f64,
}

/// Classifies a norm history by its envelope trend over the last half of
/// the run: the peak of the final quarter against the peak of the quarter
/// before it.
pub fn classify(
    times: &[f64],
    norms: &[f64],
    tau: f64,
    thresholds: &Thresholds,
) -> Result<Classification> {
    if times.len() != norms.len() {
        return Err(Error::DimensionMismatch {
            what: "norm samples",
            expected: times.len(),
            found: norms.len(),
        });
    }
    let (Some(&t0), Some(&t1)) = (times.first(), times.last()) else {
        return Err(Error::TooShort {
            duration: 0.0,
            required: 20.0 * tau,
        });
    };
    let duration = t1 - t0;
    if duration < 20.0 * tau || times.len() < 4 {
        return Err(Error::TooShort {
            duration,
            required: 20.0 * tau,
        });
    }
    let half = t0 + 0.5 * duration;
    let three_quarters = t0 + 0.75 * duration;
    let peak = |lo: f64, hi: f64| {
        times
            .iter()
            .zip(norms)
            .filter(|(&t, _)| t >= lo && t <= hi)
            .map(|(_, &v)| v)
            .fold(0.0, f64::max)
    };
    let earlier = peak(half, three_quarters);
    let later = peak(three_quarters, t1);
    let envelope_ratio = if earlier > 0.0 {
        later / earlier
    } else if later > 0.0 {
        f64::INFINITY
    } else {
        0.0
    };
    let verdict = if envelope_ratio < thresholds.decay_ratio {
        Verdict::Stable
    } else if envelope_ratio > thresholds.growth_ratio {
        Verdict::Unstable
    } else {
        Verdict::Marginal
    };
    Ok(Classification {
        verdict,
        envelope_ratio,
    })
}

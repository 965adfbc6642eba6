//! D-subdivision of the delay axis: the number of unstable characteristic
//! roots `NU(τ)` of the whole network, its stable pockets, and the exact
//! consensus delay bound.
//!
//! `NU(0)` is counted from the delay-free matrices `A + C`. Walking along
//! `τ`, every crossing of a subsystem with multiplicity `m` moves a conjugate
//! pair per copy, so `NU` changes by `2·m·RT` there.

use crate::ctcr::{kernel_points_with, offspring, CrossingPoint, CtcrOptions, KernelPoint};
use crate::error::{Error, Result};
use crate::graph::{
    decouple, is_connected, spectral_decompose, AgentDynamics, Subsystem, Topology,
    DEFAULT_EIGEN_TOL,
};
use crate::linalg::real_matrix_eigenvalues;

/// Crossings closer than this (seconds) are treated as one step.
pub const COINCIDENT_TAU: f64 = 1e-9;
const MARGINAL_RE: f64 = 1e-9;
const DEFAULT_TAU_MAX_FACTOR: f64 = 4.0;
const FALLBACK_TAU_MAX: f64 = 1.0;

/// A delay bound that may be infinite.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum DelayBound {
    Finite(f64),
    Infinite,
}

impl DelayBound {
    pub fn as_f64(&self) -> f64 {
        match self {
            DelayBound::Finite(v) => *v,
            DelayBound::Infinite => f64::INFINITY,
        }
    }

    pub fn is_finite(&self) -> bool {
        matches!(self, DelayBound::Finite(_))
    }
}

/// Constant `NU` on `[start, end)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct NuStep {
    pub start: f64,
    pub end: f64,
    pub nu: usize,
}

/// An interval of the delay axis with no unstable roots.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Pocket {
    pub start: f64,
    /// Right endpoint, excluded; infinite when no crossing ever ends the pocket.
    pub end: DelayBound,
}

/// An eigenvalue that was analyzed, with the multiplicity used for counting.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AnalyzedEigenvalue {
    pub lambda: f64,
    pub multiplicity: usize,
}

/// Complete stability map of a network over `[0, tau_max]`.
#[derive(Debug, Clone, PartialEq)]
pub struct StabilityMap {
    pub tau_max: f64,
    pub analyzed: Vec<AnalyzedEigenvalue>,
    /// Kernel points of every subsystem, including any beyond `tau_max`.
    pub kernels: Vec<KernelPoint>,
    /// Kernel and offspring crossings up to `tau_max`, sorted by delay.
    pub crossings: Vec<CrossingPoint>,
    pub nu_at_zero: usize,
    pub nu_steps: Vec<NuStep>,
    pub stable_pockets: Vec<Pocket>,
    pub delay_bound: DelayBound,
    pub binding_lambda: Option<f64>,
}

impl StabilityMap {
    /// `NU(τ)`, right-continuous at crossings.
    pub fn nu_at(&self, tau: f64) -> usize {
        self.nu_steps
            .iter()
            .rev()
            .find(|s| s.start <= tau)
            .map(|s| s.nu)
            .unwrap_or(self.nu_at_zero)
    }

    /// Whether the largest analyzed eigenvalue is the one that sets the bound.
    /// `None` when no finite bound is bound by a crossing.
    pub fn largest_eigenvalue_binds(&self) -> Option<bool> {
        let binding = self.binding_lambda?;
        let largest = self.analyzed.iter().map(|a| a.lambda).fold(f64::MIN, f64::max);
        Some((binding - largest).abs() <= 1e-8 * largest.abs().max(1.0))
    }
}

/// Unstable roots of the network at zero delay, counted with multiplicity.
pub fn nu_at_zero(subsystems: &[Subsystem]) -> Result<usize> {
    let mut count = 0;
    for sub in subsystems {
        let delay_free = sub.a_matrix() + sub.c_matrix();
        for s in real_matrix_eigenvalues(&delay_free)? {
            if s.re.abs() < MARGINAL_RE {
                return Err(Error::MarginalAtZero {
                    lambda: sub.lambda(),
                    real_part: s.re,
                });
            }
            if s.re > 0.0 {
                count += sub.multiplicity();
            }
        }
    }
    Ok(count)
}

/// Builds the map with default tolerances. A non-positive or non-finite
/// `tau_max` selects four times the largest kernel delay.
pub fn build_map(subsystems: &[Subsystem], tau_max: Option<f64>) -> Result<StabilityMap> {
    build_map_with(subsystems, tau_max, &CtcrOptions::default())
}

pub fn build_map_with(
    subsystems: &[Subsystem],
    tau_max: Option<f64>,
    options: &CtcrOptions,
) -> Result<StabilityMap> {
    if let Some(t) = tau_max {
        if !(t > 0.0) || !t.is_finite() {
            return Err(Error::InvalidArgument(format!(
                "tau_max must be positive and finite, got {t}"
            )));
        }
    }
    let nu0 = nu_at_zero(subsystems)?;

    let mut kernels: Vec<KernelPoint> = Vec::new();
    for sub in subsystems {
        kernels.extend(kernel_points_with(sub, options)?);
    }
    kernels.sort_by(|a, b| a.tau.total_cmp(&b.tau).then(a.lambda.total_cmp(&b.lambda)));

    let tau_max = tau_max.unwrap_or_else(|| {
        kernels
            .iter()
            .map(|k| k.tau)
            .fold(None, |m: Option<f64>, t| Some(m.map_or(t, |m| m.max(t))))
            .map_or(FALLBACK_TAU_MAX, |t| DEFAULT_TAU_MAX_FACTOR * t)
    });

    let mut crossings = offspring(&kernels, tau_max);
    crossings.sort_by(|a, b| a.tau.total_cmp(&b.tau).then(a.lambda.total_cmp(&b.lambda)));

    // group coincident crossings into single net steps
    let mut groups: Vec<(f64, i64, Option<f64>)> = Vec::new();
    for c in &crossings {
        let delta = 2 * c.multiplicity as i64 * c.root_tendency as i64;
        let destabilizing = (c.root_tendency > 0).then_some(c.lambda);
        match groups.last_mut() {
            Some((tau, net, lam)) if (c.tau - *tau).abs() <= COINCIDENT_TAU => {
                *net += delta;
                if lam.is_none() {
                    *lam = destabilizing;
                }
            }
            _ => groups.push((c.tau, delta, destabilizing)),
        }
    }

    let mut nu_steps = Vec::with_capacity(groups.len() + 1);
    let mut nu = nu0 as i64;
    let mut start = 0.0;
    for &(tau, net, _) in &groups {
        nu_steps.push(NuStep {
            start,
            end: tau,
            nu: nu as usize,
        });
        nu += net;
        if nu < 0 {
            return Err(Error::NegativeNuInternal { tau });
        }
        start = tau;
    }
    nu_steps.push(NuStep {
        start,
        end: tau_max,
        nu: nu as usize,
    });

    let (delay_bound, binding_lambda) = if nu0 > 0 {
        (DelayBound::Finite(0.0), None)
    } else if let Some(&(tau, _, lam)) = groups.iter().find(|g| g.1 != 0) {
        (DelayBound::Finite(tau), lam)
    } else if let Some(k) = kernels.iter().find(|k| k.tau > tau_max && k.root_tendency > 0) {
        (DelayBound::Finite(k.tau), Some(k.lambda))
    } else {
        (DelayBound::Infinite, None)
    };

    let mut stable_pockets: Vec<Pocket> = Vec::new();
    for step in nu_steps.iter().filter(|s| s.nu == 0) {
        match stable_pockets.last_mut() {
            Some(p) if p.end == DelayBound::Finite(step.start) => p.end = DelayBound::Finite(step.end),
            _ => stable_pockets.push(Pocket {
                start: step.start,
                end: DelayBound::Finite(step.end),
            }),
        }
    }
    // the pocket that starts at zero ends exactly at the bound
    if let Some(first) = stable_pockets.first_mut() {
        if first.start == 0.0 && nu0 == 0 {
            first.end = delay_bound;
        }
    }

    let mut analyzed: Vec<AnalyzedEigenvalue> = subsystems
        .iter()
        .map(|s| AnalyzedEigenvalue {
            lambda: s.lambda(),
            multiplicity: s.multiplicity(),
        })
        .collect();
    analyzed.sort_by(|a, b| a.lambda.total_cmp(&b.lambda));

    Ok(StabilityMap {
        tau_max,
        analyzed,
        kernels,
        crossings,
        nu_at_zero: nu0,
        nu_steps,
        stable_pockets,
        delay_bound,
        binding_lambda,
    })
}

/// The exact delay bound and the eigenvalue whose subsystem sets it.
pub fn delay_bound(map: &StabilityMap) -> (DelayBound, Option<f64>) {
    (map.delay_bound, map.binding_lambda)
}

/// Full analysis of one fixed topology.
pub fn analyze_topology(
    dynamics: &AgentDynamics,
    topology: &Topology,
    tau_max: Option<f64>,
    eigen_tol: f64,
    options: &CtcrOptions,
) -> Result<StabilityMap> {
    let decomp = spectral_decompose(topology, eigen_tol)?;
    let decoupled = decouple(dynamics, &decomp)?;
    build_map_with(&decoupled.subsystems, tau_max, options)
}

/// Delay bound valid for every topology of a switching set.
///
/// The distinct nonzero Laplacian eigenvalues of all topologies are pooled
/// (merged within `1e-8` relative); an eigenvalue shared by several
/// topologies is counted with its largest multiplicity. This says nothing
/// about stability under arbitrary switching signals.
pub fn switching_bound(
    dynamics: &AgentDynamics,
    topologies: &[Topology],
    tau_max: Option<f64>,
) -> Result<StabilityMap> {
    switching_bound_with(dynamics, topologies, tau_max, DEFAULT_EIGEN_TOL, &CtcrOptions::default())
}

pub fn switching_bound_with(
    dynamics: &AgentDynamics,
    topologies: &[Topology],
    tau_max: Option<f64>,
    eigen_tol: f64,
    options: &CtcrOptions,
) -> Result<StabilityMap> {
    let Some(first) = topologies.first() else {
        return Err(Error::InvalidArgument("no topology given".into()));
    };
    let n = first.n();
    let mut pooled: Vec<AnalyzedEigenvalue> = Vec::new();
    for (index, topology) in topologies.iter().enumerate() {
        if topology.n() != n {
            return Err(Error::MixedSizes {
                index,
                expected: n,
                found: topology.n(),
            });
        }
        let decomp = spectral_decompose(topology, eigen_tol)?;
        if !is_connected(&decomp, eigen_tol) {
            return Err(Error::Disconnected {
                algebraic_connectivity: decomp.eigenvalues()[1],
            });
        }
        for d in decomp.distinct().iter().skip(1) {
            let existing = pooled
                .iter_mut()
                .find(|e| (e.lambda - d.value).abs() <= 1e-8 * d.value.abs().max(1.0));
            match existing {
                Some(e) => e.multiplicity = e.multiplicity.max(d.multiplicity),
                None => pooled.push(AnalyzedEigenvalue {
                    lambda: d.value,
                    multiplicity: d.multiplicity,
                }),
            }
        }
    }
    pooled.sort_by(|a, b| a.lambda.total_cmp(&b.lambda));
    let subsystems: Vec<Subsystem> = pooled
        .iter()
        .map(|e| Subsystem::new(e.lambda, dynamics, e.multiplicity))
        .collect();
    build_map_with(&subsystems, tau_max, options)
}

//! Particle gradient flows that decrease the squared MMD to a target.
//!
//! Particles follow the noisy Euler–Maruyama scheme
//!
//! ```text
//! X_{n+1}^i = X_n^i + eta * v(X_n^i + beta_n U_n^i, p_n)
//! ```
//!
//! where `p_n` is the empirical distribution of the particles before noise is
//! added, `U_n^i` is standard Gaussian, and the drift
//!
//! ```text
//! v(x) = grad_x ( sum_j q_j k(y_j, x) - sum_i p_i k(x_i, x) )
//! ```
//!
//! is the negative gradient of the MMD witness function, i.e. the descent
//! direction of `MMD^2(p, q) / 2` with respect to particle positions.
//!
//! The noise for particle `i` at iteration `n` comes from its own ChaCha8
//! substream derived from `(seed, n, i)`, so results do not depend on how the
//! per-particle work is scheduled across threads.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use rayon::prelude::*;

use crate::error::{check_dim, invalid, Error, Result};
use crate::evaluation::wasserstein2_exact;
use crate::kernels::{Kernel, KernelSpec, RbfKernel};
use crate::metrics::{mmd2, EmpiricalDistribution};
use crate::slicing::SliceSet;

/// How the noise level decays over iterations.
#[derive(Debug, Clone, Copy, PartialEq, Eq, serde::Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum NoiseSchedule {
    Constant,
    /// `beta_n = beta_0 / (n + 1)`.
    InverseK,
}

pub fn noise_schedule(beta0: f64, schedule: NoiseSchedule, n: usize) -> f64 {
    match schedule {
        NoiseSchedule::Constant => beta0,
        NoiseSchedule::InverseK => beta0 / (n as f64 + 1.0),
    }
}

/// The kernel driving a flow.
#[derive(Debug, Clone, PartialEq)]
pub enum FlowKernel {
    Sliced(KernelSpec),
    /// Baseline Gaussian RBF `exp(-||x - y||^2 / (2 sigma))`.
    Rbf {
        sigma: f64,
    },
}

/// Which slices a sliced-kernel flow uses at each iteration.
#[derive(Debug, Clone, Copy, PartialEq, Eq, serde::Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum SlicePolicy {
    /// One slice set, drawn from the kernel spec's seed, for every iteration.
    Fixed,
    /// A fresh slice set of the same size at every iteration.
    Resample,
}

#[derive(Debug, Clone, PartialEq)]
pub struct FlowConfig {
    pub eta: f64,
    pub beta0: f64,
    pub schedule: NoiseSchedule,
    pub iterations: usize,
    pub kernel: FlowKernel,
    pub slice_policy: SlicePolicy,
    /// Seed of the noise substreams.
    pub seed: u64,
}

/// Default step size for the 2D synthetic experiments.
pub const DEFAULT_ETA: f64 = 0.05;

impl FlowConfig {
    pub fn new(kernel: FlowKernel, iterations: usize, seed: u64) -> Self {
        Self {
            eta: DEFAULT_ETA,
            beta0: 0.0,
            schedule: NoiseSchedule::Constant,
            iterations,
            kernel,
            slice_policy: SlicePolicy::Resample,
            seed,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.eta > 0.0 && self.eta.is_finite()) {
            return Err(invalid(format!("step size must be positive, got {}", self.eta)));
        }
        if !(self.beta0 >= 0.0 && self.beta0.is_finite()) {
            return Err(invalid(format!("beta0 must be non-negative, got {}", self.beta0)));
        }
        if self.iterations == 0 {
            return Err(invalid("iteration budget must be positive"));
        }
        match &self.kernel {
            FlowKernel::Sliced(spec) => spec.validate(),
            FlowKernel::Rbf { sigma } => RbfKernel::new(*sigma).map(|_| ()),
        }
    }

    /// The slice set used at iteration `n`, or `None` for the RBF kernel.
    pub fn slices_at(&self, n: usize, dim: usize) -> Result<Option<SliceSet>> {
        let FlowKernel::Sliced(spec) = &self.kernel else {
            return Ok(None);
        };
        let seed = match self.slice_policy {
            SlicePolicy::Fixed => spec.seed,
            SlicePolicy::Resample => mix(spec.seed, n as u64),
        };
        SliceSet::sample(spec.family, dim, spec.slice_count, seed).map(Some)
    }
}

/// splitmix64 finalizer over `a` combined with `b`.
fn mix(a: u64, b: u64) -> u64 {
    let mut z = a ^ b
        .wrapping_mul(0x9E37_79B9_7F4A_7C15)
        .wrapping_add(0x6A09_E667_F3BC_C909);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

fn noise_stream(seed: u64, iteration: usize, particle: usize) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(mix(seed, iteration as u64));
    rng.set_stream(particle as u64);
    rng
}

/// Current particle cloud `X_n` and iteration counter `n`. The noise state is
/// a pure function of the config seed and `n`, so no RNG is carried here.
#[derive(Debug, Clone, PartialEq)]
pub struct FlowState {
    pub particles: EmpiricalDistribution,
    pub iteration: usize,
}

impl FlowState {
    pub fn new(particles: EmpiricalDistribution) -> Self {
        Self {
            particles,
            iteration: 0,
        }
    }
}

/// `v(x) = sum_j q_j grad k(y_j, x) - sum_i p_i grad k(x_i, x)`.
pub fn drift<K: Kernel>(
    x: &[f64],
    source: &EmpiricalDistribution,
    target: &EmpiricalDistribution,
    kernel: &K,
) -> Result<Vec<f64>> {
    check_dim(source.dim(), x.len())?;
    check_dim(target.dim(), x.len())?;
    // accumulated separately so that identical clouds cancel exactly
    let mut attract = vec![0.0; x.len()];
    let mut repel = vec![0.0; x.len()];
    kernel.weighted_grad_sum(x, target, &mut attract)?;
    kernel.weighted_grad_sum(x, source, &mut repel)?;
    let v: Vec<f64> = attract.iter().zip(&repel).map(|(a, r)| a - r).collect();
    if v.iter().any(|c| !c.is_finite()) {
        return Err(Error::NonFinite(format!("drift at {x:?}")));
    }
    Ok(v)
}

/// Runs `f` with the kernel `config` prescribes at iteration `n`. Sliced
/// kernels are resolved against `sets` (for the data-driven `T`).
fn with_kernel<R>(
    config: &FlowConfig,
    n: usize,
    dim: usize,
    sets: &[&EmpiricalDistribution],
    f: impl FnOnce(&dyn KernelRef) -> Result<R>,
) -> Result<R> {
    match &config.kernel {
        FlowKernel::Rbf { sigma } => f(&RbfKernel::new(*sigma)?),
        FlowKernel::Sliced(spec) => {
            let slices = config.slices_at(n, dim)?.expect("sliced kernel has slices");
            let kernel = spec.bind(&slices, sets)?;
            f(&kernel)
        }
    }
}

/// Object-safe view of [`Kernel`] so flows can switch kernels at run time.
trait KernelRef: Sync {
    fn drift(&self, x: &[f64], source: &EmpiricalDistribution, target: &EmpiricalDistribution) -> Result<Vec<f64>>;
    fn mmd2(&self, x: &EmpiricalDistribution, y: &EmpiricalDistribution) -> Result<f64>;
}

impl<K: Kernel> KernelRef for K {
    fn drift(&self, x: &[f64], source: &EmpiricalDistribution, target: &EmpiricalDistribution) -> Result<Vec<f64>> {
        drift(x, source, target, self)
    }

    fn mmd2(&self, x: &EmpiricalDistribution, y: &EmpiricalDistribution) -> Result<f64> {
        mmd2(x, y, self)
    }
}

/// One noisy Euler–Maruyama step of the particle system.
pub fn flow_step(state: &FlowState, target: &EmpiricalDistribution, config: &FlowConfig) -> Result<FlowState> {
    config.validate()?;
    let source = &state.particles;
    let dim = source.dim();
    check_dim(dim, target.dim())?;
    let n = state.iteration;
    let beta = noise_schedule(config.beta0, config.schedule, n);

    let probes: Vec<f64> = if beta > 0.0 {
        (0..source.len())
            .into_par_iter()
            .flat_map_iter(|i| {
                let mut rng = noise_stream(config.seed, n, i);
                source
                    .point(i)
                    .iter()
                    .map(|&c| {
                        let u: f64 = StandardNormal.sample(&mut rng);
                        c + beta * u
                    })
                    .collect::<Vec<_>>()
            })
            .collect()
    } else {
        source.as_flat().to_vec()
    };
    let probes = source.with_data(probes)?;

    let next = with_kernel(config, n, dim, &[source, target, &probes], |kernel| {
        (0..source.len())
            .into_par_iter()
            .map(|i| {
                let v = kernel.drift(probes.point(i), source, target)?;
                Ok(source
                    .point(i)
                    .iter()
                    .zip(&v)
                    .map(|(x, vi)| x + config.eta * vi)
                    .collect::<Vec<f64>>())
            })
            .collect::<Result<Vec<Vec<f64>>>>()
    });
    let next = match next {
        Ok(rows) => rows,
        Err(Error::NonFinite(_)) => {
            return Err(Error::Diverged {
                iteration: n,
                eta: config.eta,
            })
        }
        Err(e) => return Err(e),
    };
    if next.iter().flatten().any(|c| !c.is_finite()) {
        return Err(Error::Diverged {
            iteration: n,
            eta: config.eta,
        });
    }
    Ok(FlowState {
        particles: source.with_data(next.concat())?,
        iteration: n + 1,
    })
}

/// Logging cadence for [`run_flow`].
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct RunOptions {
    /// Record a row every `log_every` iterations (and for the final state).
    pub log_every: usize,
    /// Also compute the exact `W_2` on every `eval_every`-th iteration.
    pub eval_every: usize,
}

impl Default for RunOptions {
    fn default() -> Self {
        Self {
            log_every: 1,
            eval_every: 10,
        }
    }
}

/// State of the cloud `X_n` at a logged iteration.
#[derive(Debug, Clone, Copy, PartialEq, serde::Serialize)]
pub struct LogRow {
    pub iter: usize,
    pub mmd2: f64,
    /// Exact 2-Wasserstein distance to the target, when evaluated (equal sizes only).
    pub w2: Option<f64>,
    /// Noise level applied in the step leaving `X_n`.
    pub beta: f64,
}

#[derive(Debug, Clone)]
pub struct FlowRun {
    pub state: FlowState,
    pub log: Vec<LogRow>,
}

/// A run that stopped early; carries everything recorded before the failure.
#[derive(Debug)]
pub struct FlowAbort {
    pub error: Error,
    pub state: FlowState,
    pub log: Vec<LogRow>,
}

impl std::fmt::Display for FlowAbort {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "{} ({} log rows kept)", self.error, self.log.len())
    }
}

impl std::error::Error for FlowAbort {
    fn source(&self) -> Option<&(dyn std::error::Error + 'static)> {
        Some(&self.error)
    }
}

fn log_row(state: &FlowState, target: &EmpiricalDistribution, config: &FlowConfig, with_w2: bool) -> Result<LogRow> {
    let n = state.iteration;
    let p = &state.particles;
    let mmd = with_kernel(config, n, p.dim(), &[p, target], |k| k.mmd2(p, target))?;
    let w2 = if with_w2 && p.len() == target.len() {
        Some(wasserstein2_exact(p, target)?)
    } else {
        None
    };
    Ok(LogRow {
        iter: n,
        mmd2: mmd,
        w2,
        beta: noise_schedule(config.beta0, config.schedule, n),
    })
}

/// Iterates [`flow_step`] for the configured budget, logging `MMD^2` (with
/// the kernel of the logged iteration) and the exact `W_2` at the requested
/// cadence. Every row is also passed to `observer` as soon as it is recorded.
pub fn run_flow(
    init: &EmpiricalDistribution,
    target: &EmpiricalDistribution,
    config: &FlowConfig,
    options: RunOptions,
    mut observer: impl FnMut(&LogRow),
) -> std::result::Result<FlowRun, FlowAbort> {
    let mut state = FlowState::new(init.clone());
    let mut log = Vec::new();
    let abort = |error, state: FlowState, log| FlowAbort { error, state, log };
    if let Err(e) = config.validate().and_then(|_| check_dim(init.dim(), target.dim())) {
        return Err(abort(e, state, log));
    }
    if options.log_every == 0 || options.eval_every == 0 {
        return Err(abort(invalid("logging intervals must be positive"), state, log));
    }
    loop {
        let n = state.iteration;
        let last = n == config.iterations;
        if n.is_multiple_of(options.log_every) || last {
            let with_w2 = n.is_multiple_of(options.eval_every) || last;
            match log_row(&state, target, config, with_w2) {
                Ok(row) => {
                    observer(&row);
                    log.push(row);
                }
                Err(Error::NonFinite(_)) => {
                    let error = Error::Diverged {
                        iteration: n,
                        eta: config.eta,
                    };
                    return Err(abort(error, state, log));
                }
                Err(e) => return Err(abort(e, state, log)),
            }
        }
        if last {
            return Ok(FlowRun { state, log });
        }
        match flow_step(&state, target, config) {
            Ok(next) => state = next,
            Err(e) => return Err(abort(e, state, log)),
        }
    }
}

/// Constants of the global convergence bound.
#[derive(Debug, Clone, Copy, PartialEq, serde::Serialize)]
pub struct TheoremConstants {
    /// `L = (G_f^2 + G_f) G_phi^2 ||A||^2`.
    pub l_const: f64,
    /// `lambda = sqrt(2 d ||A||^2 G_phi^2 G_f^2 (1 + G_f^2))`.
    pub lambda_const: f64,
    pub g_f: f64,
    pub g_phi: f64,
    pub op_norm: f64,
    pub d: usize,
}

impl TheoremConstants {
    /// Largest step size for which the bound still contracts, `1 / (3 L)`.
    pub fn max_contracting_eta(&self) -> f64 {
        1.0 / (3.0 * self.l_const)
    }
}

pub fn theorem_constants(g_f: f64, g_phi: f64, op_norm: f64, d: usize) -> Result<TheoremConstants> {
    for (name, v) in [("G_f", g_f), ("G_phi", g_phi), ("operator norm", op_norm)] {
        if !(v > 0.0 && v.is_finite()) {
            return Err(invalid(format!("{name} must be positive, got {v}")));
        }
    }
    if d == 0 {
        return Err(invalid("dimension must be positive"));
    }
    let a2 = op_norm * op_norm;
    let phi2 = g_phi * g_phi;
    let f2 = g_f * g_f;
    Ok(TheoremConstants {
        l_const: (f2 + g_f) * phi2 * a2,
        lambda_const: (2.0 * d as f64 * a2 * phi2 * f2 * (1.0 + f2)).sqrt(),
        g_f,
        g_phi,
        op_norm,
        d,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, serde::Serialize)]
pub struct ConvergenceBound {
    pub value: f64,
    /// False when `eta >= 1 / (3 L)`: the exponent is no longer negative.
    pub contracting: bool,
}

/// `zeta_0 exp(-2 lambda^2 eta (1 - 3 eta L) sum_i beta_i^2)`.
pub fn convergence_bound(zeta0: f64, constants: &TheoremConstants, eta: f64, betas: &[f64]) -> ConvergenceBound {
    let sum_sq: f64 = betas.iter().map(|b| b * b).sum();
    let rate = 2.0 * constants.lambda_const.powi(2) * eta * (1.0 - 3.0 * eta * constants.l_const);
    ConvergenceBound {
        value: zeta0 * (-rate * sum_sq).exp(),
        contracting: eta < constants.max_contracting_eta(),
    }
}

/// `G_phi` for the Gaussian profile `phi = N(0, sigma / 2)`: the largest of
/// `sup |phi|`, `sup |phi'|` (which is also phi's Lipschitz constant) and
/// `sup |phi''|` (the Lipschitz constant of `phi'`).
pub fn gaussian_profile_constant(sigma: f64) -> Result<f64> {
    if !(sigma > 0.0 && sigma.is_finite()) {
        return Err(invalid(format!("sigma must be positive, got {sigma}")));
    }
    let var = sigma / 2.0;
    let sd = var.sqrt();
    let norm = 1.0 / (sd * (2.0 * std::f64::consts::PI).sqrt());
    let value = norm;
    let slope = norm * (-0.5f64).exp() / sd;
    let curvature = norm / var;
    Ok(value.max(slope).max(curvature))
}

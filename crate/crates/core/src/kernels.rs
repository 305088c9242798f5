//! Kernels induced by sliced L2 distances.
//!
//! For a smoothing profile `phi_sigma` and a linear operator `A`, each slice
//! contributes the dot-product kernel
//!
//! ```text
//! k_theta(x, y) = < A phi(. - f_theta(x)), A phi(. - f_theta(y)) >
//! ```
//!
//! and the full kernel is its average over a [`SliceSet`]. Closed forms are
//! used where they exist:
//!
//! | operator | smoothing | `k_theta` with `a = f(x)`, `b = f(y)` |
//! |----------|-----------|----------------------------------------|
//! | identity | Gaussian | `exp(-(a-b)^2 / (2 sigma)) / sqrt(2 pi sigma)` |
//! | cumulative | Dirac | `T - max(a, b)` |
//! | cumulative | smoothstep, order 0 | `T - max + (max - min - 2 sigma)^3 / (24 sigma^2)` inside `2 sigma` |
//!
//! Other supported pairs (identity or cumulative with a higher-order
//! smoothstep, identity with an order-0 smoothstep) are evaluated by
//! trapezoid quadrature on a fixed grid of `[-T, T]` ("quadrature mode").
//! Because the grid and weights do not depend on the points, quadrature-mode
//! Gram matrices are still exactly positive semi-definite up to rounding.
//!
//! `sigma` is always the variance of the Gaussian that results from the
//! inner product of two smoothed slices, so the identity-Gaussian slice kernel
//! peaks at `1 / sqrt(2 pi sigma)`. Under the Fourier transform the same
//! kernel is obtained (the transform is unitary), so no separate operator is
//! provided for it.

use rayon::prelude::*;

use crate::error::{check_dim, invalid, Error, Result};
use crate::metrics::EmpiricalDistribution;
use crate::slicing::{DefiningFunction, SliceFamily, SliceSet};

/// Default number of trapezoid nodes on `[-T, T]` in quadrature mode.
pub const DEFAULT_QUADRATURE_POINTS: usize = 2048;

/// The profile `phi_sigma` each slice value is smoothed with.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum SmoothingProfile {
    /// `phi = N(0, sigma / 2)`; two smoothed slices overlap as `N(a - b, sigma)(0)`.
    Gaussian {
        sigma: f64,
    },
    Dirac,
    /// Density whose CDF is the order-`order` smoothstep ramp on `[-sigma, sigma]`.
    Smoothstep {
        order: u32,
        sigma: f64,
    },
}

impl SmoothingProfile {
    pub fn validate(&self) -> Result<()> {
        match *self {
            SmoothingProfile::Dirac => Ok(()),
            SmoothingProfile::Gaussian { sigma } | SmoothingProfile::Smoothstep { sigma, .. } => {
                if sigma > 0.0 && sigma.is_finite() {
                    Ok(())
                } else {
                    Err(invalid(format!("sigma must be positive, got {sigma}")))
                }
            }
        }
    }

    /// Bandwidth parameter; zero for the Dirac profile.
    pub fn sigma(&self) -> f64 {
        match *self {
            SmoothingProfile::Gaussian { sigma } | SmoothingProfile::Smoothstep { sigma, .. } => sigma,
            SmoothingProfile::Dirac => 0.0,
        }
    }

    /// Half-width beyond which the profile is negligible (Gaussian) or zero.
    pub fn support_half_width(&self) -> f64 {
        match *self {
            SmoothingProfile::Gaussian { sigma } => 6.0 * sigma.sqrt(),
            SmoothingProfile::Smoothstep { sigma, .. } => sigma,
            SmoothingProfile::Dirac => 0.0,
        }
    }

    /// `phi_sigma(t)`. Not defined for the Dirac profile.
    pub fn density(&self, t: f64) -> f64 {
        match *self {
            SmoothingProfile::Gaussian { sigma } => (-t * t / sigma).exp() / (std::f64::consts::PI * sigma).sqrt(),
            SmoothingProfile::Smoothstep { order, sigma } => smoothstep_derivative(order, sigma, t, 1),
            SmoothingProfile::Dirac => f64::NAN,
        }
    }

    /// `phi_sigma'(t)`.
    pub fn density_derivative(&self, t: f64) -> f64 {
        match *self {
            SmoothingProfile::Gaussian { sigma } => -2.0 * t / sigma * self.density(t),
            SmoothingProfile::Smoothstep { order, sigma } => smoothstep_derivative(order, sigma, t, 2),
            SmoothingProfile::Dirac => f64::NAN,
        }
    }

    /// `A phi_sigma(t)` for the cumulative integral operator (the profile's CDF).
    pub fn cdf(&self, t: f64) -> f64 {
        match *self {
            SmoothingProfile::Smoothstep { order, sigma } => smoothstep(order, sigma, t),
            SmoothingProfile::Dirac => {
                if t >= 0.0 {
                    1.0
                } else {
                    0.0
                }
            }
            SmoothingProfile::Gaussian { .. } => f64::NAN,
        }
    }
}

fn smoothstep_coefficients(order: u32) -> impl Iterator<Item = (f64, i32)> {
    let n = order as u64;
    (0..=n).map(move |k| {
        let sign = if k % 2 == 0 { 1.0 } else { -1.0 };
        let c = sign * binomial_f64(n + k, k) * binomial_f64(2 * n + 1, n - k);
        (c, (n + k + 1) as i32)
    })
}

fn binomial_f64(n: u64, k: u64) -> f64 {
    (0..k).fold(1.0, |acc, i| acc * (n - i) as f64 / (i + 1) as f64)
}

/// The order-`order` smoothstep ramp on `[-sigma, sigma]`:
/// 0 below `-sigma`, 1 above `sigma`, and
/// `sum_k (-1)^k C(n+k, k) C(2n+1, n-k) u^(n+k+1)` with `u = (x + sigma) / (2 sigma)` between.
pub fn smoothstep(order: u32, sigma: f64, x: f64) -> f64 {
    if x <= -sigma {
        0.0
    } else if x >= sigma {
        1.0
    } else {
        let u = (x + sigma) / (2.0 * sigma);
        smoothstep_coefficients(order).map(|(c, p)| c * u.powi(p)).sum()
    }
}

/// `deriv`-th derivative (1 or 2) of [`smoothstep`]; zero outside `(-sigma, sigma)`.
fn smoothstep_derivative(order: u32, sigma: f64, x: f64, deriv: i32) -> f64 {
    if x <= -sigma || x >= sigma {
        return 0.0;
    }
    let u = (x + sigma) / (2.0 * sigma);
    let scale = (2.0 * sigma).powi(-deriv);
    smoothstep_coefficients(order)
        .map(|(c, p)| {
            let falling: f64 = (0..deriv).map(|j| (p - j) as f64).product();
            if p - deriv < 0 {
                0.0
            } else {
                c * falling * u.powi(p - deriv)
            }
        })
        .sum::<f64>()
        * scale
}

/// The linear operator applied to smoothed slice densities.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Operator {
    Identity,
    /// `A p(t) = int_{-inf}^t p`, restricted to `[-T, T]`. `None` picks `T`
    /// from the data when the kernel is bound (see [`KernelSpec::bind`]).
    CumulativeIntegral {
        half_width: Option<f64>,
    },
}

impl Operator {
    pub fn cumulative() -> Self {
        Operator::CumulativeIntegral { half_width: None }
    }
}

/// How `k_theta` is evaluated for a given (operator, smoothing) pair.
#[derive(Debug, Clone, Copy, PartialEq, Eq, serde::Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum EvalMode {
    ClosedForm,
    Quadrature,
}

/// Everything that determines the sliced kernel `k`.
#[derive(Debug, Clone, PartialEq)]
pub struct KernelSpec {
    pub smoothing: SmoothingProfile,
    pub operator: Operator,
    pub family: SliceFamily,
    pub slice_count: usize,
    pub seed: u64,
    /// Draw a fresh [`SliceSet`] on every use instead of reusing one.
    pub resample_per_call: bool,
    pub quadrature_points: usize,
}

impl KernelSpec {
    pub fn new(
        smoothing: SmoothingProfile,
        operator: Operator,
        family: SliceFamily,
        slice_count: usize,
        seed: u64,
    ) -> Self {
        Self {
            smoothing,
            operator,
            family,
            slice_count,
            seed,
            resample_per_call: false,
            quadrature_points: DEFAULT_QUADRATURE_POINTS,
        }
    }

    pub fn validate(&self) -> Result<()> {
        self.smoothing.validate()?;
        self.family.validate()?;
        if self.slice_count == 0 {
            return Err(invalid("slice count must be positive"));
        }
        if self.quadrature_points < 2 {
            return Err(invalid("quadrature needs at least 2 points"));
        }
        if let Operator::CumulativeIntegral { half_width: Some(t) } = self.operator {
            if !(t > 0.0 && t.is_finite()) {
                return Err(invalid(format!("T must be positive, got {t}")));
            }
        }
        self.mode().map(|_| ())
    }

    pub fn mode(&self) -> Result<EvalMode> {
        use SmoothingProfile::*;
        match (self.operator, self.smoothing) {
            (Operator::Identity, Gaussian { .. }) => Ok(EvalMode::ClosedForm),
            (Operator::Identity, Dirac) => Err(Error::Unsupported(
                "identity operator with Dirac smoothing has no finite kernel".into(),
            )),
            (Operator::Identity, Smoothstep { .. }) => Ok(EvalMode::Quadrature),
            (Operator::CumulativeIntegral { .. }, Gaussian { .. }) => Err(Error::Unsupported(
                "cumulative operator needs a bounded-range profile (Dirac or smoothstep), not Gaussian".into(),
            )),
            (Operator::CumulativeIntegral { .. }, Dirac) => Ok(EvalMode::ClosedForm),
            (Operator::CumulativeIntegral { .. }, Smoothstep { order: 0, .. }) => Ok(EvalMode::ClosedForm),
            (Operator::CumulativeIntegral { .. }, Smoothstep { .. }) => Ok(EvalMode::Quadrature),
        }
    }

    /// Whether `k` needs a finite domain `[-T, T]`.
    pub fn needs_half_width(&self) -> Result<bool> {
        Ok(matches!(self.operator, Operator::CumulativeIntegral { .. }) || self.mode()? == EvalMode::Quadrature)
    }

    /// Slice values must satisfy `|f| <= T - margin`.
    fn range_margin(&self) -> f64 {
        match self.operator {
            Operator::CumulativeIntegral { .. } => self.smoothing.sigma(),
            Operator::Identity => self.smoothing.support_half_width(),
        }
    }

    /// Draws this spec's slices for inputs in `R^dim`.
    pub fn sample_slices(&self, dim: usize) -> Result<SliceSet> {
        SliceSet::sample(self.family, dim, self.slice_count, self.seed)
    }

    /// Data-driven `T`: the largest `|f_theta(x)|` over all point sets and
    /// slices, plus the range margin (`sigma` for the cumulative operator)
    /// plus one.
    pub fn default_half_width(&self, slices: &SliceSet, sets: &[&EmpiricalDistribution]) -> Result<f64> {
        let mut max_abs = 0.0f64;
        for set in sets {
            for x in set.points() {
                for f in slices {
                    max_abs = max_abs.max(f.eval(x)?.abs());
                }
            }
        }
        Ok(max_abs + self.range_margin() + 1.0)
    }

    /// Resolves `T` (configured or data-driven) and fixes the evaluation mode.
    pub fn resolve(&self, slices: &SliceSet, sets: &[&EmpiricalDistribution]) -> Result<ResolvedKernel> {
        self.validate()?;
        let half_width = if self.needs_half_width()? {
            match self.operator {
                Operator::CumulativeIntegral { half_width: Some(t) } => Some(t),
                _ => Some(self.default_half_width(slices, sets)?),
            }
        } else {
            None
        };
        self.resolve_with_half_width(half_width)
    }

    /// Resolves with an explicit `T` (ignored when the configuration needs none).
    pub fn resolve_with_half_width(&self, half_width: Option<f64>) -> Result<ResolvedKernel> {
        self.validate()?;
        let needs = self.needs_half_width()?;
        let half_width = if needs {
            let t = half_width.ok_or_else(|| invalid("this kernel needs a domain half-width T"))?;
            if !(t > 0.0 && t.is_finite()) {
                return Err(invalid(format!("T must be positive, got {t}")));
            }
            Some(t)
        } else {
            None
        };
        Ok(ResolvedKernel {
            smoothing: self.smoothing,
            operator: self.operator,
            mode: self.mode()?,
            half_width,
            range_margin: self.range_margin(),
            quadrature_points: self.quadrature_points,
        })
    }

    /// Resolves and pairs the kernel with a slice set.
    pub fn bind<'a>(&self, slices: &'a SliceSet, sets: &[&EmpiricalDistribution]) -> Result<SlicedKernel<'a>> {
        Ok(SlicedKernel {
            params: self.resolve(slices, sets)?,
            slices,
        })
    }
}

/// Kernel parameters with `T` fixed; evaluates `k_theta` on slice values.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ResolvedKernel {
    pub smoothing: SmoothingProfile,
    pub operator: Operator,
    pub mode: EvalMode,
    pub half_width: Option<f64>,
    range_margin: f64,
    quadrature_points: usize,
}

impl ResolvedKernel {
    /// Largest admissible `|f_theta(x)|`, if the kernel has a finite domain.
    pub fn value_limit(&self) -> Option<f64> {
        self.half_width.map(|t| t - self.range_margin)
    }

    fn check_range(&self, v: f64) -> Result<()> {
        if !v.is_finite() {
            return Err(Error::NonFinite(format!("slice value {v}")));
        }
        match self.value_limit() {
            Some(limit) if v.abs() > limit => Err(Error::RangeViolation { value: v, limit }),
            _ => Ok(()),
        }
    }

    /// `k_theta` as a function of the two slice values `a = f(x)`, `b = f(y)`.
    pub fn slice_kernel(&self, a: f64, b: f64) -> Result<f64> {
        self.check_range(a)?;
        self.check_range(b)?;
        Ok(match (self.mode, self.smoothing) {
            (EvalMode::ClosedForm, SmoothingProfile::Gaussian { sigma }) => gaussian_overlap(a - b, sigma),
            (EvalMode::ClosedForm, SmoothingProfile::Dirac) => self.t() - a.max(b),
            (EvalMode::ClosedForm, SmoothingProfile::Smoothstep { sigma, .. }) => {
                let (lo, hi) = if a <= b { (a, b) } else { (b, a) };
                let gap = hi - lo;
                if gap >= 2.0 * sigma {
                    self.t() - hi
                } else {
                    self.t() - hi + (gap - 2.0 * sigma).powi(3) / (24.0 * sigma * sigma)
                }
            }
            (EvalMode::Quadrature, _) => self.quadrature(a, b, false),
        })
    }

    /// `d k_theta(a, b) / d a`.
    pub fn slice_kernel_derivative(&self, a: f64, b: f64) -> Result<f64> {
        self.check_range(a)?;
        self.check_range(b)?;
        Ok(match (self.mode, self.smoothing) {
            (EvalMode::ClosedForm, SmoothingProfile::Gaussian { sigma }) => {
                let delta = a - b;
                -delta / sigma * gaussian_overlap(delta, sigma)
            }
            (EvalMode::ClosedForm, SmoothingProfile::Dirac) => {
                if a > b {
                    -1.0
                } else if a < b {
                    0.0
                } else {
                    -0.5
                }
            }
            (EvalMode::ClosedForm, SmoothingProfile::Smoothstep { sigma, .. }) => {
                let gap = (a - b).abs();
                if gap >= 2.0 * sigma {
                    if a > b {
                        -1.0
                    } else {
                        0.0
                    }
                } else {
                    let cubic = (gap - 2.0 * sigma).powi(2) / (8.0 * sigma * sigma);
                    if a >= b {
                        cubic - 1.0
                    } else {
                        -cubic
                    }
                }
            }
            (EvalMode::Quadrature, SmoothingProfile::Smoothstep { order: 0, .. })
                if self.operator == Operator::Identity =>
            {
                return Err(Error::Unsupported(
                    "the order-0 smoothstep density is a box; its identity-operator kernel has no gradient".into(),
                ))
            }
            (EvalMode::Quadrature, _) => self.quadrature(a, b, true),
        })
    }

    fn t(&self) -> f64 {
        self.half_width.expect("resolved half-width")
    }

    /// Trapezoid rule for `int g(t - a) g(t - b) dt` on the fixed grid of
    /// `[-T, T]`, where `g` is `phi` (identity) or its CDF (cumulative).
    /// With `derivative`, the first factor becomes `-g'(t - a)`.
    ///
    /// Nodes where a factor is exactly zero are skipped; this does not change
    /// the sum.
    fn quadrature(&self, a: f64, b: f64, derivative: bool) -> f64 {
        let t_max = self.t();
        let n = self.quadrature_points;
        let h = 2.0 * t_max / (n - 1) as f64;
        let s = self.smoothing.support_half_width();
        let (lo, hi) = match self.operator {
            Operator::Identity => (a.max(b) - s, a.min(b) + s),
            Operator::CumulativeIntegral { .. } => (a.max(b) - s, t_max),
        };
        if lo > hi {
            return 0.0;
        }
        let first = (((lo + t_max) / h).floor().max(0.0)) as usize;
        let last = (((hi + t_max) / h).ceil() as usize).min(n - 1);
        let profile = self.smoothing;
        let (g, dg): (ProfileFn, ProfileFn) = match self.operator {
            Operator::Identity => (SmoothingProfile::density, SmoothingProfile::density_derivative),
            Operator::CumulativeIntegral { .. } => (SmoothingProfile::cdf, SmoothingProfile::density),
        };
        let mut acc = 0.0;
        for j in first..=last {
            let t = -t_max + j as f64 * h;
            let w = if j == 0 || j == n - 1 { 0.5 * h } else { h };
            let left = if derivative {
                -dg(&profile, t - a)
            } else {
                g(&profile, t - a)
            };
            acc += w * left * g(&profile, t - b);
        }
        acc
    }
}

type ProfileFn = fn(&SmoothingProfile, f64) -> f64;

/// `N(delta, sigma)(0) = exp(-delta^2 / (2 sigma)) / sqrt(2 pi sigma)`.
pub fn gaussian_overlap(delta: f64, sigma: f64) -> f64 {
    (-delta * delta / (2.0 * sigma)).exp() / (2.0 * std::f64::consts::PI * sigma).sqrt()
}

/// `k_theta(x, y)` for a single defining function.
pub fn k_theta(x: &[f64], y: &[f64], f: &DefiningFunction, kernel: &ResolvedKernel) -> Result<f64> {
    kernel.slice_kernel(f.eval(x)?, f.eval(y)?)
}

/// Monte Carlo kernel `(1 / L) sum_l k_theta_l(x, y)`.
pub fn kernel(x: &[f64], y: &[f64], params: &ResolvedKernel, slices: &SliceSet) -> Result<f64> {
    if slices.is_empty() {
        return Err(invalid("slice set must be nonempty"));
    }
    let mut acc = 0.0;
    for f in slices {
        acc += k_theta(x, y, f, params)?;
    }
    Ok(acc / slices.len() as f64)
}

/// `grad_x k(x, y) = (1 / L) sum_l d_1 k_theta_l * grad f_l(x)`.
pub fn kernel_gradient(x: &[f64], y: &[f64], params: &ResolvedKernel, slices: &SliceSet) -> Result<Vec<f64>> {
    let mut out = vec![0.0; x.len()];
    kernel_gradient_into(x, y, params, slices, &mut out)?;
    Ok(out)
}

fn kernel_gradient_into(
    x: &[f64],
    y: &[f64],
    params: &ResolvedKernel,
    slices: &SliceSet,
    out: &mut [f64],
) -> Result<()> {
    if slices.is_empty() {
        return Err(invalid("slice set must be nonempty"));
    }
    check_dim(x.len(), out.len())?;
    out.iter_mut().for_each(|o| *o = 0.0);
    let mut grad_f = vec![0.0; x.len()];
    for f in slices {
        let dk = params.slice_kernel_derivative(f.eval(x)?, f.eval(y)?)?;
        if dk == 0.0 {
            continue;
        }
        f.grad_into(x, &mut grad_f)?;
        for (o, g) in out.iter_mut().zip(&grad_f) {
            *o += dk * g;
        }
    }
    let inv = 1.0 / slices.len() as f64;
    out.iter_mut().for_each(|o| *o *= inv);
    Ok(())
}

/// Closed-form approximation of the linear-slice Gaussian kernel:
/// `(1 / sqrt(2 pi sigma)) (1 + ||x - y||^2 / (sigma (d - 3/2)))^(-1/2)`.
///
/// The approximation matches the large-distance asymptotics of the exact
/// hypergeometric form and is loose in low dimension; for `d = 2` it is
/// within 3% only while `||x - y||^2` is below about `0.045 sigma`.
pub fn kernel_cw(x: &[f64], y: &[f64], sigma: f64, d: usize) -> Result<f64> {
    if d < 2 {
        return Err(invalid(format!("closed-form kernel needs d >= 2, got {d}")));
    }
    if !(sigma > 0.0 && sigma.is_finite()) {
        return Err(invalid(format!("sigma must be positive, got {sigma}")));
    }
    check_dim(x.len(), y.len())?;
    let dist2: f64 = x.iter().zip(y).map(|(a, b)| (a - b).powi(2)).sum();
    Ok((1.0 + dist2 / (sigma * (d as f64 - 1.5))).powf(-0.5) / (2.0 * std::f64::consts::PI * sigma).sqrt())
}

/// A positive semi-definite kernel on `R^d` with a gradient in its first argument.
pub trait Kernel: Sync {
    fn eval(&self, x: &[f64], y: &[f64]) -> Result<f64>;

    /// Writes `grad_x k(x, y)` into `out`.
    fn grad_x_into(&self, x: &[f64], y: &[f64], out: &mut [f64]) -> Result<()>;

    fn grad_x(&self, x: &[f64], y: &[f64]) -> Result<Vec<f64>> {
        let mut out = vec![0.0; x.len()];
        self.grad_x_into(x, y, &mut out)?;
        Ok(out)
    }

    /// Writes `sum_j w_j grad_x k(x, y_j)` over the atoms of `dist` into `out`.
    fn weighted_grad_sum(&self, x: &[f64], dist: &EmpiricalDistribution, out: &mut [f64]) -> Result<()> {
        check_dim(x.len(), out.len())?;
        out.iter_mut().for_each(|o| *o = 0.0);
        let mut g = vec![0.0; x.len()];
        for (y, &w) in dist.points().zip(dist.weights()) {
            self.grad_x_into(x, y, &mut g)?;
            out.iter_mut().zip(&g).for_each(|(o, gi)| *o += w * gi);
        }
        Ok(())
    }
}

/// A resolved kernel spec paired with the slices it averages over.
#[derive(Debug, Clone, Copy)]
pub struct SlicedKernel<'a> {
    pub params: ResolvedKernel,
    pub slices: &'a SliceSet,
}

impl<'a> SlicedKernel<'a> {
    pub fn new(params: ResolvedKernel, slices: &'a SliceSet) -> Self {
        Self { params, slices }
    }
}

impl Kernel for SlicedKernel<'_> {
    fn eval(&self, x: &[f64], y: &[f64]) -> Result<f64> {
        kernel(x, y, &self.params, self.slices)
    }

    fn grad_x_into(&self, x: &[f64], y: &[f64], out: &mut [f64]) -> Result<()> {
        kernel_gradient_into(x, y, &self.params, self.slices, out)
    }

    // grad f_l(x) is shared by every atom, so sum the slice derivatives first
    fn weighted_grad_sum(&self, x: &[f64], dist: &EmpiricalDistribution, out: &mut [f64]) -> Result<()> {
        check_dim(x.len(), out.len())?;
        check_dim(x.len(), dist.dim())?;
        out.iter_mut().for_each(|o| *o = 0.0);
        let mut grad_f = vec![0.0; x.len()];
        for f in self.slices {
            let a = f.eval(x)?;
            let mut s = 0.0;
            for (y, &w) in dist.points().zip(dist.weights()) {
                s += w * self.params.slice_kernel_derivative(a, f.eval(y)?)?;
            }
            if s == 0.0 {
                continue;
            }
            f.grad_into(x, &mut grad_f)?;
            out.iter_mut().zip(&grad_f).for_each(|(o, g)| *o += s * g);
        }
        let inv = 1.0 / self.slices.len() as f64;
        out.iter_mut().for_each(|o| *o *= inv);
        Ok(())
    }
}

/// Gaussian RBF kernel `exp(-||x - y||^2 / (2 sigma))`, the non-sliced baseline.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RbfKernel {
    pub sigma: f64,
}

impl RbfKernel {
    pub fn new(sigma: f64) -> Result<Self> {
        if sigma > 0.0 && sigma.is_finite() {
            Ok(Self { sigma })
        } else {
            Err(invalid(format!("sigma must be positive, got {sigma}")))
        }
    }
}

impl Kernel for RbfKernel {
    fn eval(&self, x: &[f64], y: &[f64]) -> Result<f64> {
        check_dim(x.len(), y.len())?;
        let d2: f64 = x.iter().zip(y).map(|(a, b)| (a - b).powi(2)).sum();
        Ok((-d2 / (2.0 * self.sigma)).exp())
    }

    fn grad_x_into(&self, x: &[f64], y: &[f64], out: &mut [f64]) -> Result<()> {
        let k = self.eval(x, y)?;
        check_dim(x.len(), out.len())?;
        for ((o, a), b) in out.iter_mut().zip(x).zip(y) {
            *o = -(a - b) / self.sigma * k;
        }
        Ok(())
    }
}

/// Gram matrix `G[i][j] = k(x_i, x_j)`. Only the upper triangle is
/// evaluated; rows are computed in parallel and each entry independently.
pub fn gram<K: Kernel>(points: &EmpiricalDistribution, kernel: &K) -> Result<Vec<Vec<f64>>> {
    let n = points.len();
    let upper: Vec<Vec<f64>> = (0..n)
        .into_par_iter()
        .map(|i| (i..n).map(|j| kernel.eval(points.point(i), points.point(j))).collect())
        .collect::<Result<_>>()?;
    let mut g = vec![vec![0.0; n]; n];
    for (i, row) in upper.into_iter().enumerate() {
        for (offset, v) in row.into_iter().enumerate() {
            g[i][i + offset] = v;
            g[i + offset][i] = v;
        }
    }
    Ok(g)
}

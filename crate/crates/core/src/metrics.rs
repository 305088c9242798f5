//! Sliced probability metrics and the MMD² estimator.
//!
//! The generalized sliced probability metric between `p` and `q` is
//!
//! ```text
//! zeta(p, q) = ( (1 / L) sum_l xi(p_{f_l}, q_{f_l})^r )^(1 / r)
//! ```
//!
//! where `p_f` is the pushforward of `p` through the defining function `f`
//! and `xi` is a metric between one-dimensional distributions. The average
//! over slices is the Monte Carlo estimate of an expectation over uniformly
//! drawn `theta`. With `xi` a smoothed L2 distance, `zeta^2` equals
//! [`mmd2`] under the matching sliced kernel.

use crate::error::{check_dim, invalid, Error, Result};
use crate::kernels::{Kernel, Operator, SmoothingProfile, DEFAULT_QUADRATURE_POINTS};
use crate::slicing::{l2_norm, DefiningFunction, SliceFamily, SliceSet};

/// Tolerance on the total weight of an [`EmpiricalDistribution`].
pub const WEIGHT_SUM_TOL: f64 = 1e-12;

/// A weighted sample set in `R^d`, stored row-major.
#[derive(Debug, Clone, PartialEq)]
pub struct EmpiricalDistribution {
    data: Vec<f64>,
    dim: usize,
    weights: Vec<f64>,
}

impl EmpiricalDistribution {
    /// Uniform weights `1 / N` over the rows of `data`.
    pub fn uniform(data: Vec<f64>, dim: usize) -> Result<Self> {
        let n = Self::row_count(&data, dim)?;
        Self::weighted(data, dim, vec![1.0 / n as f64; n])
    }

    pub fn weighted(data: Vec<f64>, dim: usize, weights: Vec<f64>) -> Result<Self> {
        let n = Self::row_count(&data, dim)?;
        check_dim(n, weights.len())?;
        if data.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFinite("sample coordinate".into()));
        }
        if weights.iter().any(|w| !(w.is_finite() && *w >= 0.0)) {
            return Err(invalid("weights must be finite and non-negative"));
        }
        let total: f64 = weights.iter().sum();
        if (total - 1.0).abs() > WEIGHT_SUM_TOL {
            return Err(invalid(format!("weights sum to {total}, not 1")));
        }
        Ok(Self { data, dim, weights })
    }

    pub fn from_rows(rows: &[Vec<f64>]) -> Result<Self> {
        let dim = rows
            .first()
            .map(Vec::len)
            .ok_or_else(|| invalid("need at least one sample"))?;
        let mut data = Vec::with_capacity(rows.len() * dim);
        for row in rows {
            check_dim(dim, row.len())?;
            data.extend_from_slice(row);
        }
        Self::uniform(data, dim)
    }

    fn row_count(data: &[f64], dim: usize) -> Result<usize> {
        if dim == 0 {
            return Err(invalid("dimension must be positive"));
        }
        if data.is_empty() || !data.len().is_multiple_of(dim) {
            return Err(invalid(format!(
                "{} values do not form rows of length {dim}",
                data.len()
            )));
        }
        Ok(data.len() / dim)
    }

    pub fn len(&self) -> usize {
        self.weights.len()
    }

    pub fn is_empty(&self) -> bool {
        self.weights.is_empty()
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn point(&self, i: usize) -> &[f64] {
        &self.data[i * self.dim..(i + 1) * self.dim]
    }

    pub fn points(&self) -> std::slice::ChunksExact<'_, f64> {
        self.data.chunks_exact(self.dim)
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    /// Row-major coordinates.
    pub fn as_flat(&self) -> &[f64] {
        &self.data
    }

    /// Same weights, new coordinates.
    pub fn with_data(&self, data: Vec<f64>) -> Result<Self> {
        check_dim(self.data.len(), data.len())?;
        Self::weighted(data, self.dim, self.weights.clone())
    }
}

/// A weighted one-dimensional sample set.
#[derive(Debug, Clone, PartialEq)]
pub struct Slice1d {
    pub values: Vec<f64>,
    pub weights: Vec<f64>,
}

impl Slice1d {
    pub fn uniform(values: Vec<f64>) -> Self {
        let w = 1.0 / values.len() as f64;
        let weights = vec![w; values.len()];
        Self { values, weights }
    }

    fn check(&self) -> Result<()> {
        if self.values.is_empty() {
            return Err(invalid("empty one-dimensional sample"));
        }
        check_dim(self.values.len(), self.weights.len())?;
        if self.values.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFinite("slice value".into()));
        }
        Ok(())
    }

    /// Values sorted ascending with their weights.
    fn sorted(&self) -> Vec<(f64, f64)> {
        let mut pairs: Vec<(f64, f64)> = self.values.iter().copied().zip(self.weights.iter().copied()).collect();
        pairs.sort_by(|a, b| a.0.total_cmp(&b.0));
        pairs
    }
}

/// Pushes `dist` through `f`: values `f(x_i)` with the same weights, in order.
pub fn slice_empirical(dist: &EmpiricalDistribution, f: &DefiningFunction) -> Result<Slice1d> {
    check_dim(f.input_dim(), dist.dim())?;
    let values = dist.points().map(|x| f.eval(x)).collect::<Result<Vec<_>>>()?;
    Ok(Slice1d {
        values,
        weights: dist.weights().to_vec(),
    })
}

/// `W_p` between two 1D distributions via the quantile coupling
/// `( int_0^1 |F_u^-1(s) - F_v^-1(s)|^p ds )^(1/p)`. For equal-size uniform
/// inputs this is the sorted matching `( (1/N) sum |u_(i) - v_(i)|^p )^(1/p)`.
pub fn wasserstein_1d(u: &Slice1d, v: &Slice1d, p: f64) -> Result<f64> {
    u.check()?;
    v.check()?;
    if !(p >= 1.0 && p.is_finite()) {
        return Err(invalid(format!("Wasserstein order must be >= 1, got {p}")));
    }
    let a = cumulative(u.sorted());
    let b = cumulative(v.sorted());
    let (mut i, mut j) = (0, 0);
    let mut level = 0.0;
    let mut acc = 0.0;
    while i < a.len() && j < b.len() {
        let next = a[i].1.min(b[j].1);
        acc += (next - level) * (a[i].0 - b[j].0).abs().powf(p);
        level = next;
        if a[i].1 <= next {
            i += 1;
        }
        if b[j].1 <= next {
            j += 1;
        }
    }
    Ok(acc.powf(1.0 / p))
}

/// Sorted atoms paired with the CDF level after each; the last level is pinned
/// to exactly 1 so both quantile functions end together.
fn cumulative(sorted: Vec<(f64, f64)>) -> Vec<(f64, f64)> {
    let total: f64 = sorted.iter().map(|(_, w)| w).sum();
    let mut level = 0.0;
    let last = sorted.len() - 1;
    sorted
        .into_iter()
        .enumerate()
        .map(|(k, (x, w))| {
            level += w / total;
            (x, if k == last { 1.0 } else { level })
        })
        .collect()
}

/// `( int |F_u(t) - F_v(t)|^order dt )^(1/order)` computed exactly from the
/// piecewise-constant empirical CDFs.
pub fn cramer_1d(u: &Slice1d, v: &Slice1d, order: f64) -> Result<f64> {
    u.check()?;
    v.check()?;
    if !(order >= 1.0 && order.is_finite()) {
        return Err(invalid(format!("Cramer order must be >= 1, got {order}")));
    }
    // Signed jumps: +w for u, -w for v; between breakpoints F_u - F_v is constant.
    let mut jumps: Vec<(f64, f64)> = u.values.iter().copied().zip(u.weights.iter().copied()).collect();
    jumps.extend(v.values.iter().copied().zip(v.weights.iter().map(|w| -w)));
    jumps.sort_by(|a, b| a.0.total_cmp(&b.0));
    let mut diff = 0.0;
    let mut acc = 0.0;
    for pair in jumps.windows(2) {
        diff += pair[0].1;
        let width = pair[1].0 - pair[0].0;
        if width > 0.0 {
            acc += diff.abs().powf(order) * width;
        }
    }
    Ok(acc.powf(1.0 / order))
}

/// The 2-Cramér distance `( int (F_u - F_v)^2 dt )^(1/2)`.
pub fn cramer2_1d(u: &Slice1d, v: &Slice1d) -> Result<f64> {
    cramer_1d(u, v, 2.0)
}

/// `|| A (phi * u) - A (phi * v) ||_2` on a uniform trapezoid grid spanning
/// the combined value range padded by the profile's support half-width.
pub fn smoothed_l2_1d(
    u: &Slice1d,
    v: &Slice1d,
    smoothing: SmoothingProfile,
    operator: Operator,
    grid_points: usize,
) -> Result<f64> {
    u.check()?;
    v.check()?;
    smoothing.validate()?;
    if grid_points < 2 {
        return Err(invalid("quadrature needs at least 2 points"));
    }
    let cumulative = matches!(operator, Operator::CumulativeIntegral { .. });
    match (cumulative, smoothing) {
        (true, SmoothingProfile::Dirac) => return cramer2_1d(u, v),
        (false, SmoothingProfile::Dirac) => {
            return Err(Error::Unsupported(
                "smoothed L2 with identity operator needs a nonzero bandwidth".into(),
            ))
        }
        (true, SmoothingProfile::Gaussian { .. }) => {
            return Err(Error::Unsupported(
                "cumulative operator needs a bounded-range profile (Dirac or smoothstep), not Gaussian".into(),
            ))
        }
        _ => {}
    }
    let g = |t: f64| {
        if cumulative {
            smoothing.cdf(t)
        } else {
            smoothing.density(t)
        }
    };

    let (mut lo, mut hi) = (f64::INFINITY, f64::NEG_INFINITY);
    for &x in u.values.iter().chain(&v.values) {
        lo = lo.min(x);
        hi = hi.max(x);
    }
    let pad = smoothing.support_half_width();
    lo -= pad;
    hi += pad;
    let h = (hi - lo) / (grid_points - 1) as f64;
    let mut acc = 0.0;
    for j in 0..grid_points {
        let t = lo + j as f64 * h;
        let pu: f64 = u.values.iter().zip(&u.weights).map(|(&x, &w)| w * g(t - x)).sum();
        let pv: f64 = v.values.iter().zip(&v.weights).map(|(&x, &w)| w * g(t - x)).sum();
        let w = if j == 0 || j + 1 == grid_points { 0.5 * h } else { h };
        acc += w * (pu - pv).powi(2);
    }
    Ok(acc.sqrt())
}

/// The one-dimensional base metric `xi`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum BaseMetric {
    Wasserstein {
        order: f64,
    },
    /// 2-Cramér distance between empirical CDFs.
    Cramer,
    SmoothedL2 {
        smoothing: SmoothingProfile,
        operator: Operator,
        grid_points: usize,
    },
}

impl BaseMetric {
    pub fn smoothed_l2(smoothing: SmoothingProfile, operator: Operator) -> Self {
        BaseMetric::SmoothedL2 {
            smoothing,
            operator,
            grid_points: DEFAULT_QUADRATURE_POINTS,
        }
    }

    pub fn distance(&self, u: &Slice1d, v: &Slice1d) -> Result<f64> {
        match *self {
            BaseMetric::Wasserstein { order } => wasserstein_1d(u, v, order),
            BaseMetric::Cramer => cramer2_1d(u, v),
            BaseMetric::SmoothedL2 {
                smoothing,
                operator,
                grid_points,
            } => smoothed_l2_1d(u, v, smoothing, operator, grid_points),
        }
    }
}

fn check_order(r: f64) -> Result<()> {
    if r >= 1.0 && r.is_finite() {
        Ok(())
    } else {
        Err(invalid(format!("GSPM order r must be >= 1, got {r}")))
    }
}

fn slice_power(
    p: &EmpiricalDistribution,
    q: &EmpiricalDistribution,
    xi: &BaseMetric,
    r: f64,
    f: &DefiningFunction,
) -> Result<f64> {
    Ok(xi.distance(&slice_empirical(p, f)?, &slice_empirical(q, f)?)?.powf(r))
}

/// `( (1/L) sum_l xi(p_{f_l}, q_{f_l})^r )^(1/r)`.
pub fn gspm(
    p: &EmpiricalDistribution,
    q: &EmpiricalDistribution,
    xi: &BaseMetric,
    r: f64,
    slices: &SliceSet,
) -> Result<f64> {
    check_order(r)?;
    check_dim(p.dim(), q.dim())?;
    if slices.is_empty() {
        return Err(invalid("slice set must be nonempty"));
    }
    let mut acc = 0.0;
    for f in slices {
        acc += slice_power(p, q, xi, r, f)?;
    }
    Ok((acc / slices.len() as f64).powf(1.0 / r))
}

/// Result of [`max_gspm`].
#[derive(Debug, Clone)]
pub struct MaxGspm {
    pub value: f64,
    /// The slice attaining `value`.
    pub argmax: DefiningFunction,
}

/// `max_l xi(p_{f_l}, q_{f_l})` over the candidates, then improved by
/// `refine_steps` iterations of projected finite-difference ascent on the
/// sphere starting from the best candidate. The ascent only accepts
/// improvements, so the result never drops below the candidate maximum.
/// It is a lower bound on the supremum over all slices.
///
/// For circular slices only the direction of the center is refined.
pub fn max_gspm(
    p: &EmpiricalDistribution,
    q: &EmpiricalDistribution,
    xi: &BaseMetric,
    r: f64,
    candidates: &SliceSet,
    refine_steps: usize,
) -> Result<MaxGspm> {
    check_order(r)?;
    check_dim(p.dim(), q.dim())?;
    if candidates.is_empty() {
        return Err(invalid("candidate slice set must be nonempty"));
    }
    let mut best_value = f64::NEG_INFINITY;
    let mut best = &candidates.slices()[0];
    for f in candidates {
        let v = slice_power(p, q, xi, r, f)?;
        if v > best_value {
            best_value = v;
            best = f;
        }
    }
    let mut best = best.clone();

    let fd_step = 1e-6;
    let objective = |theta: &[f64], template: &DefiningFunction| -> Result<f64> {
        let norm = l2_norm(theta);
        let f = template.with_coefficients(theta.iter().map(|t| t / norm).collect())?;
        slice_power(p, q, xi, r, &f)
    };
    for k in 0..refine_steps {
        let theta = best.theta().to_vec();
        let mut grad = vec![0.0; theta.len()];
        for i in 0..theta.len() {
            let mut plus = theta.clone();
            let mut minus = theta.clone();
            plus[i] += fd_step;
            minus[i] -= fd_step;
            grad[i] = (objective(&plus, &best)? - objective(&minus, &best)?) / (2.0 * fd_step);
        }
        // project onto the tangent space of the sphere
        let radial: f64 = grad.iter().zip(&theta).map(|(g, t)| g * t).sum();
        grad.iter_mut().zip(&theta).for_each(|(g, t)| *g -= radial * t);
        let gnorm = l2_norm(&grad);
        if gnorm == 0.0 || !gnorm.is_finite() {
            break;
        }
        let step = 1e-2 / (1.0 + k as f64).sqrt();
        let mut next: Vec<f64> = theta.iter().zip(&grad).map(|(t, g)| t + step * g / gnorm).collect();
        let norm = l2_norm(&next);
        next.iter_mut().for_each(|t| *t /= norm);
        let candidate = best.with_coefficients(next)?;
        let v = slice_power(p, q, xi, r, &candidate)?;
        if v > best_value {
            best_value = v;
            best = candidate;
        }
    }
    Ok(MaxGspm {
        value: best_value.powf(1.0 / r),
        argmax: best,
    })
}

/// Biased V-statistic estimate of the squared MMD:
/// `sum w_i w_j k(x_i, x_j) + sum v_i v_j k(y_i, y_j) - 2 sum w_i v_j k(x_i, y_j)`.
pub fn mmd2<K: Kernel>(x: &EmpiricalDistribution, y: &EmpiricalDistribution, kernel: &K) -> Result<f64> {
    check_dim(x.dim(), y.dim())?;
    let kxx = weighted_kernel_sum(x, x, kernel)?;
    let kyy = weighted_kernel_sum(y, y, kernel)?;
    let kxy = weighted_kernel_sum(x, y, kernel)?;
    Ok(kxx + kyy - 2.0 * kxy)
}

/// `sum_i sum_j a_i b_j k(x_i, y_j)`, summed in row-major order.
pub fn weighted_kernel_sum<K: Kernel>(a: &EmpiricalDistribution, b: &EmpiricalDistribution, kernel: &K) -> Result<f64> {
    use rayon::prelude::*;
    let rows: Vec<f64> = (0..a.len())
        .into_par_iter()
        .map(|i| {
            let xi = a.point(i);
            let mut row = 0.0;
            for (j, &wj) in b.weights().iter().enumerate() {
                row += wj * kernel.eval(xi, b.point(j))?;
            }
            Ok(a.weights()[i] * row)
        })
        .collect::<Result<_>>()?;
    Ok(rows.iter().sum())
}

/// Whether a family admits the sliced-Wasserstein reading (linear slices).
pub fn is_sliced_wasserstein(family: SliceFamily, xi: &BaseMetric) -> bool {
    matches!((family, xi), (SliceFamily::Linear, BaseMetric::Wasserstein { .. }))
}

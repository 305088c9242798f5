//! Defining functions of the generalized Radon transform.
//!
//! A defining function `f_theta: R^d -> R` maps a point to a scalar whose
//! level sets are the hypersurfaces that a slice integrates over. Three
//! families are provided:
//!
//! * linear, `f(x) = <x, theta>`, with `theta` on `S^(d-1)`;
//! * homogeneous polynomials of odd degree `m`,
//!   `f(x) = sum_{|alpha| = m} theta_alpha x^alpha`, with `theta` on the
//!   coefficient sphere `S^(C(d+m-1, m) - 1)`;
//! * circular, `f(x) = ||x - s theta||`, with `theta` on `S^(d-1)`.
//!
//! Coefficients of the polynomial family are indexed by the multi-indices of
//! [`enumerate_multi_indices`], in graded lexicographic order, so a `theta`
//! vector means the same polynomial in every run.

use std::sync::Arc;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

use crate::error::{check_dim, invalid, Error, Result};

/// Unit-norm tolerance accepted by [`Direction::new`].
pub const UNIT_NORM_TOL: f64 = 1e-12;

/// A point on the unit sphere of the coefficient space.
#[derive(Debug, Clone, PartialEq)]
pub struct Direction(Vec<f64>);

impl Direction {
    /// Wraps a vector that is already unit norm.
    pub fn new(theta: Vec<f64>) -> Result<Self> {
        if theta.is_empty() {
            return Err(invalid("direction must have at least one coordinate"));
        }
        let norm = l2_norm(&theta);
        if !norm.is_finite() || (norm - 1.0).abs() > UNIT_NORM_TOL {
            return Err(invalid(format!("direction norm {norm} is not 1")));
        }
        Ok(Self(theta))
    }

    /// Rescales a nonzero finite vector onto the sphere.
    pub fn normalized(mut theta: Vec<f64>) -> Result<Self> {
        let norm = l2_norm(&theta);
        if theta.is_empty() || !norm.is_finite() || norm == 0.0 {
            return Err(invalid("cannot normalize a zero or non-finite vector"));
        }
        theta.iter_mut().for_each(|t| *t /= norm);
        Ok(Self(theta))
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn into_inner(self) -> Vec<f64> {
        self.0
    }
}

/// Exponent vector `alpha` of a monomial `x^alpha = prod_i x_i^alpha_i`.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct MultiIndex(Vec<u32>);

impl MultiIndex {
    pub fn new(alpha: Vec<u32>) -> Self {
        Self(alpha)
    }

    pub fn exponents(&self) -> &[u32] {
        &self.0
    }

    pub fn degree(&self) -> u32 {
        self.0.iter().sum()
    }
}

/// Which family of hypersurfaces a slice integrates over.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum SliceFamily {
    Linear,
    /// Homogeneous polynomial of odd degree.
    Polynomial {
        degree: u32,
    },
    /// Distance to the center `scale * theta`.
    Circular {
        scale: f64,
    },
}

impl SliceFamily {
    pub fn validate(&self) -> Result<()> {
        match *self {
            SliceFamily::Linear => Ok(()),
            SliceFamily::Polynomial { degree } => {
                if degree == 0 || degree % 2 == 0 {
                    Err(invalid(format!(
                        "polynomial degree must be an odd positive integer, got {degree}"
                    )))
                } else {
                    Ok(())
                }
            }
            SliceFamily::Circular { scale } => {
                if scale > 0.0 && scale.is_finite() {
                    Ok(())
                } else {
                    Err(invalid(format!("circular scale must be positive, got {scale}")))
                }
            }
        }
    }

    /// Dimension of the coefficient space `theta` lives in, for inputs in `R^dim`.
    pub fn coefficient_dim(&self, dim: usize) -> Result<usize> {
        if dim == 0 {
            return Err(invalid("input dimension must be positive"));
        }
        self.validate()?;
        Ok(match *self {
            SliceFamily::Linear | SliceFamily::Circular { .. } => dim,
            SliceFamily::Polynomial { degree } => binomial(dim + degree as usize - 1, degree as usize),
        })
    }

    /// True when `f_{lambda theta} = lambda f_theta` for `lambda > 0`.
    pub fn is_homogeneous(&self) -> bool {
        !matches!(self, SliceFamily::Circular { .. })
    }
}

/// `C(n, k)` in exact integer arithmetic.
pub fn binomial(n: usize, k: usize) -> usize {
    if k > n {
        return 0;
    }
    let k = k.min(n - k);
    (0..k).fold(1usize, |acc, i| acc * (n - i) / (i + 1))
}

/// All multi-indices in `d` variables of total degree `m`, graded
/// lexicographic (descending in the first exponent, then the second, ...).
///
/// For `m = 1` the order is the standard basis `e_1, ..., e_d`, so a degree-one
/// polynomial slice is the linear slice with the same `theta`.
pub fn enumerate_multi_indices(d: usize, m: u32) -> Result<Vec<MultiIndex>> {
    if d == 0 || m == 0 {
        return Err(invalid(format!("need d >= 1 and m >= 1, got d={d}, m={m}")));
    }
    let mut out = Vec::with_capacity(binomial(d + m as usize - 1, m as usize));
    let mut current = vec![0u32; d];
    fill_indices(0, m, &mut current, &mut out);
    Ok(out)
}

fn fill_indices(pos: usize, remaining: u32, current: &mut [u32], out: &mut Vec<MultiIndex>) {
    if pos + 1 == current.len() {
        current[pos] = remaining;
        out.push(MultiIndex(current.to_vec()));
        return;
    }
    for first in (0..=remaining).rev() {
        current[pos] = first;
        fill_indices(pos + 1, remaining - first, current, out);
    }
    current[pos] = 0;
}

/// `count` independent uniform draws from `S^(d_coeff - 1)`, obtained by
/// normalizing standard Gaussian vectors drawn from a ChaCha8 stream seeded
/// with `seed`.
pub fn sample_directions(d_coeff: usize, count: usize, seed: u64) -> Result<Vec<Direction>> {
    if d_coeff == 0 || count == 0 {
        return Err(invalid(format!(
            "need d_coeff >= 1 and count >= 1, got d_coeff={d_coeff}, count={count}"
        )));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut out = Vec::with_capacity(count);
    while out.len() < count {
        let v: Vec<f64> = (0..d_coeff).map(|_| StandardNormal.sample(&mut rng)).collect();
        // A zero draw has probability zero but would break normalization.
        if let Ok(dir) = Direction::normalized(v) {
            out.push(dir);
        }
    }
    Ok(out)
}

/// A parameterized slicer `f_theta` with analytic gradient.
#[derive(Debug, Clone)]
pub struct DefiningFunction {
    family: SliceFamily,
    theta: Vec<f64>,
    dim: usize,
    basis: Option<Arc<[MultiIndex]>>,
}

impl DefiningFunction {
    /// Builds `f_theta` on `R^dim` for a unit-norm `theta`.
    pub fn new(family: SliceFamily, direction: Direction, dim: usize) -> Result<Self> {
        Self::from_coefficients(family, direction.into_inner(), dim)
    }

    /// Builds `f_theta` from raw coefficients without requiring unit norm.
    /// Used for scaled parameters (homogeneity) and for ascent over `theta`.
    pub fn from_coefficients(family: SliceFamily, theta: Vec<f64>, dim: usize) -> Result<Self> {
        let n_theta = family.coefficient_dim(dim)?;
        check_dim(n_theta, theta.len())?;
        if theta.iter().any(|t| !t.is_finite()) {
            return Err(Error::NonFinite("slice coefficients".into()));
        }
        let basis = match family {
            SliceFamily::Polynomial { degree } => {
                Some(Arc::from(enumerate_multi_indices(dim, degree)?.into_boxed_slice()))
            }
            _ => None,
        };
        Ok(Self {
            family,
            theta,
            dim,
            basis,
        })
    }

    /// Same family and input dimension, new coefficients. Reuses the monomial basis.
    pub fn with_coefficients(&self, theta: Vec<f64>) -> Result<Self> {
        check_dim(self.theta.len(), theta.len())?;
        if theta.iter().any(|t| !t.is_finite()) {
            return Err(Error::NonFinite("slice coefficients".into()));
        }
        Ok(Self {
            family: self.family,
            theta,
            dim: self.dim,
            basis: self.basis.clone(),
        })
    }

    pub fn family(&self) -> SliceFamily {
        self.family
    }

    pub fn theta(&self) -> &[f64] {
        &self.theta
    }

    pub fn input_dim(&self) -> usize {
        self.dim
    }

    /// Multi-index basis of a polynomial slice, `None` otherwise.
    pub fn basis(&self) -> Option<&[MultiIndex]> {
        self.basis.as_deref()
    }

    pub fn eval(&self, x: &[f64]) -> Result<f64> {
        check_dim(self.dim, x.len())?;
        Ok(match self.family {
            SliceFamily::Linear => dot(x, &self.theta),
            SliceFamily::Polynomial { degree } => {
                let powers = power_table(x, degree);
                let basis = self.basis.as_deref().expect("polynomial basis");
                basis
                    .iter()
                    .zip(&self.theta)
                    .map(|(alpha, &c)| c * monomial(&powers, degree, alpha.exponents(), None))
                    .sum()
            }
            SliceFamily::Circular { scale } => x
                .iter()
                .zip(&self.theta)
                .map(|(&xi, &ti)| (xi - scale * ti).powi(2))
                .sum::<f64>()
                .sqrt(),
        })
    }

    /// Writes `grad_x f_theta(x)` into `out`.
    pub fn grad_into(&self, x: &[f64], out: &mut [f64]) -> Result<()> {
        check_dim(self.dim, x.len())?;
        check_dim(self.dim, out.len())?;
        match self.family {
            SliceFamily::Linear => out.copy_from_slice(&self.theta),
            SliceFamily::Polynomial { degree } => {
                let powers = power_table(x, degree);
                let basis = self.basis.as_deref().expect("polynomial basis");
                out.iter_mut().for_each(|g| *g = 0.0);
                for (alpha, &c) in basis.iter().zip(&self.theta) {
                    let exps = alpha.exponents();
                    for (k, g) in out.iter_mut().enumerate() {
                        if exps[k] > 0 {
                            *g += c * exps[k] as f64 * monomial(&powers, degree, exps, Some(k));
                        }
                    }
                }
            }
            SliceFamily::Circular { scale } => {
                for ((g, &xi), &ti) in out.iter_mut().zip(x).zip(&self.theta) {
                    *g = xi - scale * ti;
                }
                let r = l2_norm(out);
                if r == 0.0 {
                    return Err(Error::Singularity);
                }
                out.iter_mut().for_each(|g| *g /= r);
            }
        }
        Ok(())
    }

    pub fn grad(&self, x: &[f64]) -> Result<Vec<f64>> {
        let mut out = vec![0.0; self.dim];
        self.grad_into(x, &mut out)?;
        Ok(out)
    }
}

/// `powers[i * (m + 1) + k] = x_i^k`.
fn power_table(x: &[f64], degree: u32) -> Vec<f64> {
    let stride = degree as usize + 1;
    let mut powers = vec![1.0; x.len() * stride];
    for (i, &xi) in x.iter().enumerate() {
        for k in 1..stride {
            powers[i * stride + k] = powers[i * stride + k - 1] * xi;
        }
    }
    powers
}

/// `x^alpha`, or with `lower = Some(k)` the monomial with `alpha_k` reduced by one.
fn monomial(powers: &[f64], degree: u32, alpha: &[u32], lower: Option<usize>) -> f64 {
    let stride = degree as usize + 1;
    alpha
        .iter()
        .enumerate()
        .map(|(i, &a)| {
            let e = if lower == Some(i) { a - 1 } else { a };
            powers[i * stride + e as usize]
        })
        .product()
}

/// An ordered batch of slices shared across metric and kernel evaluations.
#[derive(Debug, Clone)]
pub struct SliceSet {
    slices: Vec<DefiningFunction>,
    seed: u64,
}

impl SliceSet {
    /// Draws `count` slices of `family` on `R^dim`. The same arguments always
    /// produce bitwise-identical coefficients.
    pub fn sample(family: SliceFamily, dim: usize, count: usize, seed: u64) -> Result<Self> {
        let n_theta = family.coefficient_dim(dim)?;
        let slices = sample_directions(n_theta, count, seed)?
            .into_iter()
            .map(|dir| DefiningFunction::new(family, dir, dim))
            .collect::<Result<Vec<_>>>()?;
        Ok(Self { slices, seed })
    }

    pub fn from_slices(slices: Vec<DefiningFunction>, seed: u64) -> Result<Self> {
        let Some(first) = slices.first() else {
            return Err(invalid("slice set must be nonempty"));
        };
        let dim = first.input_dim();
        if let Some(bad) = slices.iter().find(|f| f.input_dim() != dim) {
            return Err(Error::DimensionMismatch {
                expected: dim,
                got: bad.input_dim(),
            });
        }
        Ok(Self { slices, seed })
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    pub fn len(&self) -> usize {
        self.slices.len()
    }

    pub fn is_empty(&self) -> bool {
        self.slices.is_empty()
    }

    pub fn input_dim(&self) -> usize {
        self.slices[0].input_dim()
    }

    pub fn slices(&self) -> &[DefiningFunction] {
        &self.slices
    }

    pub fn iter(&self) -> std::slice::Iter<'_, DefiningFunction> {
        self.slices.iter()
    }
}

impl<'a> IntoIterator for &'a SliceSet {
    type Item = &'a DefiningFunction;
    type IntoIter = std::slice::Iter<'a, DefiningFunction>;

    fn into_iter(self) -> Self::IntoIter {
        self.slices.iter()
    }
}

/// Empirical regularity constants of a slice family on a box.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RegularityBound {
    /// Largest `||grad f_theta(x)||` seen on the grid.
    pub gradient_max: f64,
    /// Largest `||grad f(x) - grad f(y)|| / ||x - y||` over grid pairs.
    pub lipschitz_max: f64,
}

impl RegularityBound {
    /// `G_f = max(gradient_max, lipschitz_max)`.
    pub fn g_f(&self) -> f64 {
        self.gradient_max.max(self.lipschitz_max)
    }
}

const MAX_REGULARITY_GRID_POINTS: usize = 20_000;

/// Grid estimate of the constant `G_f` bounding both `||grad f_theta||` and
/// the Lipschitz constant of `grad f_theta` over the box `[lower, upper]`,
/// maximized over the slices in `slices`.
///
/// The grid has `grid` points per axis and all pairs are compared, so the
/// result is a lower estimate of the true supremum; it converges from below
/// as the grid is refined. Grid points at a circular slice's center are
/// skipped.
pub fn estimate_regularity_bounds(
    slices: &SliceSet,
    lower: &[f64],
    upper: &[f64],
    grid: usize,
) -> Result<RegularityBound> {
    let dim = slices.input_dim();
    check_dim(dim, lower.len())?;
    check_dim(dim, upper.len())?;
    if grid < 2 {
        return Err(invalid("regularity grid needs at least 2 points per axis"));
    }
    if lower
        .iter()
        .zip(upper)
        .any(|(&lo, &hi)| !(lo.is_finite() && hi.is_finite() && lo < hi))
    {
        return Err(invalid("degenerate or unbounded box"));
    }
    let total = grid
        .checked_pow(dim as u32)
        .filter(|&t| t <= MAX_REGULARITY_GRID_POINTS)
        .ok_or_else(|| invalid(format!("grid {grid}^{dim} exceeds {MAX_REGULARITY_GRID_POINTS} points")))?;

    let points: Vec<Vec<f64>> = (0..total)
        .map(|mut flat| {
            (0..dim)
                .map(|axis| {
                    let k = flat % grid;
                    flat /= grid;
                    lower[axis] + (upper[axis] - lower[axis]) * k as f64 / (grid - 1) as f64
                })
                .collect()
        })
        .collect();

    let mut bound = RegularityBound {
        gradient_max: 0.0,
        lipschitz_max: 0.0,
    };
    for f in slices {
        let mut evaluated: Vec<(&[f64], Vec<f64>)> = Vec::with_capacity(total);
        for p in &points {
            match f.grad(p) {
                Ok(g) => evaluated.push((p, g)),
                Err(Error::Singularity) => continue,
                Err(e) => return Err(e),
            }
        }
        for (i, (x, gx)) in evaluated.iter().enumerate() {
            bound.gradient_max = bound.gradient_max.max(l2_norm(gx));
            for (y, gy) in &evaluated[i + 1..] {
                let num = distance(gx, gy);
                let den = distance(x, y);
                bound.lipschitz_max = bound.lipschitz_max.max(num / den);
            }
        }
    }
    Ok(bound)
}

pub(crate) fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

pub(crate) fn l2_norm(a: &[f64]) -> f64 {
    a.iter().map(|x| x * x).sum::<f64>().sqrt()
}

pub(crate) fn distance(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y).powi(2)).sum::<f64>().sqrt()
}

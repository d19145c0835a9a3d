use nalgebra::{Cholesky, DMatrix, DVector, Dyn};

use crate::error::{Error, Result};

/// Smallest admissible squared pivot of a covariance factorization.
pub const PIVOT_FLOOR: f64 = 1e-12;

/// Symmetrizes `cov` in place and returns its Cholesky factor, rejecting
/// matrices that are not numerically positive definite.
pub(crate) fn factorize(cov: &DMatrix<f64>) -> Result<Cholesky<f64, Dyn>> {
    if !cov.is_square() {
        return Err(Error::Shape(format!(
            "covariance is {}x{}, expected square",
            cov.nrows(),
            cov.ncols()
        )));
    }
    let sym = symmetrize(cov);
    let chol = Cholesky::new(sym)
        .ok_or_else(|| Error::InvalidModel("covariance is not positive definite".into()))?;
    let l = chol.l_dirty();
    for i in 0..l.nrows() {
        let pivot = l[(i, i)] * l[(i, i)];
        if !(pivot >= PIVOT_FLOOR) {
            return Err(Error::InvalidModel(format!(
                "covariance pivot {pivot:e} below {PIVOT_FLOOR:e}"
            )));
        }
    }
    Ok(chol)
}

pub(crate) fn symmetrize(m: &DMatrix<f64>) -> DMatrix<f64> {
    (m + m.transpose()) * 0.5
}

const SMALL: usize = 8;

/// Cholesky factor of the symmetric part of a small matrix, kept on the
/// stack. Used on the hot paths; larger matrices go through [`factorize`].
struct SmallChol {
    n: usize,
    l: [f64; SMALL * SMALL],
}

impl SmallChol {
    /// `m` is column-major `n × n`. `None` when a squared pivot falls below
    /// [`PIVOT_FLOOR`].
    fn new(m: &[f64], n: usize) -> Option<Self> {
        debug_assert!(n <= SMALL && m.len() == n * n);
        let mut l = [0.0; SMALL * SMALL];
        for j in 0..n {
            let mut d = m[j * n + j];
            for k in 0..j {
                d -= l[j * SMALL + k] * l[j * SMALL + k];
            }
            if !(d >= PIVOT_FLOOR) {
                return None;
            }
            let root = d.sqrt();
            l[j * SMALL + j] = root;
            for i in j + 1..n {
                let mut s = 0.5 * (m[j * n + i] + m[i * n + j]);
                for k in 0..j {
                    s -= l[i * SMALL + k] * l[j * SMALL + k];
                }
                l[i * SMALL + j] = s / root;
            }
        }
        Some(Self { n, l })
    }

    fn log_det(&self) -> f64 {
        (0..self.n).map(|i| 2.0 * self.l[i * SMALL + i].ln()).sum()
    }

    fn forward(&self, b: &mut [f64]) {
        for i in 0..self.n {
            let mut s = b[i];
            for k in 0..i {
                s -= self.l[i * SMALL + k] * b[k];
            }
            b[i] = s / self.l[i * SMALL + i];
        }
    }

    fn mahalanobis_sq(&self, diff: &[f64]) -> f64 {
        let mut y = [0.0; SMALL];
        y[..self.n].copy_from_slice(diff);
        self.forward(&mut y[..self.n]);
        y[..self.n].iter().map(|v| v * v).sum()
    }

    /// Overwrites `b` with `M⁻¹ b`.
    fn solve(&self, b: &mut [f64]) {
        self.forward(b);
        for i in (0..self.n).rev() {
            let mut s = b[i];
            for k in i + 1..self.n {
                s -= self.l[k * SMALL + i] * b[k];
            }
            b[i] = s / self.l[i * SMALL + i];
        }
    }
}

fn not_spd() -> Error {
    Error::InvalidModel(format!("covariance is not positive definite above pivot {PIVOT_FLOOR:e}"))
}

/// Validates `cov` as SPD without keeping the factor.
fn check_spd(cov: &DMatrix<f64>) -> Result<()> {
    let n = cov.nrows();
    if cov.is_square() && n <= SMALL {
        return SmallChol::new(cov.as_slice(), n).map(|_| ()).ok_or_else(not_spd);
    }
    factorize(cov).map(|_| ())
}

/// Squared Mahalanobis distance `dᵀ Σ⁻¹ d` through a Cholesky factor.
pub(crate) fn mahalanobis_sq(chol: &Cholesky<f64, Dyn>, diff: &DVector<f64>) -> f64 {
    let y = chol
        .l_dirty()
        .solve_lower_triangular(diff)
        .expect("cholesky factor has a non-zero diagonal");
    y.norm_squared()
}

fn check_dims(x: &DVector<f64>, mean: &DVector<f64>, cov: &DMatrix<f64>) -> Result<()> {
    if x.len() != mean.len() || cov.nrows() != mean.len() || cov.ncols() != mean.len() {
        return Err(Error::Shape(format!(
            "point {} / mean {} / covariance {}x{}",
            x.len(),
            mean.len(),
            cov.nrows(),
            cov.ncols()
        )));
    }
    Ok(())
}

/// Unnormalized Gaussian possibility `exp(-½ (x-μ)ᵀ Σ⁻¹ (x-μ))`.
///
/// Peaks at exactly 1 on the mean.
pub fn eval_gaussian(x: &DVector<f64>, mean: &DVector<f64>, cov: &DMatrix<f64>) -> Result<f64> {
    check_dims(x, mean, cov)?;
    let chol = factorize(cov)?;
    Ok((-0.5 * mahalanobis_sq(&chol, &(x - mean))).exp())
}

/// One weighted Gaussian possibility `w · N̄(x; μ, Σ)`.
#[derive(Clone, Debug, PartialEq)]
pub struct GaussianComponent {
    weight: f64,
    mean: DVector<f64>,
    cov: DMatrix<f64>,
}

impl GaussianComponent {
    /// Builds a component, symmetrizing `cov` and checking it is SPD and
    /// that `weight ∈ (0, 1]`.
    pub fn new(weight: f64, mean: DVector<f64>, cov: DMatrix<f64>) -> Result<Self> {
        if !(weight > 0.0 && weight <= 1.0 + 1e-12) {
            return Err(Error::InvalidWeight(weight));
        }
        if cov.nrows() != mean.len() {
            return Err(Error::Shape(format!(
                "mean has length {} but covariance is {}x{}",
                mean.len(),
                cov.nrows(),
                cov.ncols()
            )));
        }
        check_spd(&cov)?;
        let mut cov = cov;
        let n = cov.nrows();
        for j in 0..n {
            for i in j + 1..n {
                let m = 0.5 * (cov[(i, j)] + cov[(j, i)]);
                cov[(i, j)] = m;
                cov[(j, i)] = m;
            }
        }
        Ok(Self {
            weight: weight.min(1.0),
            mean,
            cov,
        })
    }

    pub fn weight(&self) -> f64 {
        self.weight
    }

    pub fn mean(&self) -> &DVector<f64> {
        &self.mean
    }

    pub fn cov(&self) -> &DMatrix<f64> {
        &self.cov
    }

    pub fn dim(&self) -> usize {
        self.mean.len()
    }

    /// Same component with a different weight.
    pub fn with_weight(&self, weight: f64) -> Result<Self> {
        if !(weight > 0.0 && weight <= 1.0 + 1e-12) {
            return Err(Error::InvalidWeight(weight));
        }
        Ok(Self {
            weight: weight.min(1.0),
            ..self.clone()
        })
    }

    /// `w · N̄(x; μ, Σ)`.
    pub fn eval(&self, x: &DVector<f64>) -> Result<f64> {
        Ok(self.weight * eval_gaussian(x, &self.mean, &self.cov)?)
    }

    /// `[w N̄(x; μ, Σ)]^ω = w^ω N̄(x; μ, Σ/ω)`.
    pub fn power(&self, omega: f64) -> Result<Self> {
        if !(omega > 0.0) || !omega.is_finite() {
            return Err(Error::InvalidWeight(omega));
        }
        Self::new(self.weight.powf(omega), self.mean.clone(), &self.cov / omega)
    }
}

/// Product of two weighted Gaussian possibilities, itself a weighted
/// Gaussian possibility.
///
/// `w₁₂ = w₁ w₂ N̄(μ₁; μ₂, Σ₁+Σ₂)`, `Σ₁₂ = (Σ₁⁻¹+Σ₂⁻¹)⁻¹`,
/// `μ₁₂ = Σ₁₂(Σ₁⁻¹μ₁ + Σ₂⁻¹μ₂)`. Evaluated in gain form,
/// `K = Σ₁(Σ₁+Σ₂)⁻¹`, which avoids inverting either factor.
pub fn gaussian_product(a: &GaussianComponent, b: &GaussianComponent) -> Result<GaussianComponent> {
    let (ln_w, mean, cov) = product_parts(a, b)?;
    let weight = ln_w.exp();
    if !(weight > 0.0) {
        return Err(Error::InvalidWeight(weight));
    }
    GaussianComponent::new(weight, mean, cov)
}

/// Log-weight of the product of two components, without forming it.
pub(crate) fn product_log_weight(a: &GaussianComponent, b: &GaussianComponent) -> Result<f64> {
    let n = a.dim();
    if n > SMALL || b.dim() != n {
        return Ok(product_parts(a, b)?.0);
    }
    let mut sum = [0.0; SMALL * SMALL];
    for (s, (x, y)) in sum.iter_mut().zip(a.cov.as_slice().iter().zip(b.cov.as_slice())) {
        *s = x + y;
    }
    let chol = SmallChol::new(&sum[..n * n], n).ok_or_else(not_spd)?;
    let mut diff = [0.0; SMALL];
    for i in 0..n {
        diff[i] = b.mean[i] - a.mean[i];
    }
    Ok(a.weight.ln() + b.weight.ln() - 0.5 * chol.mahalanobis_sq(&diff[..n]))
}

/// Gershgorin bound on the largest eigenvalue of a symmetric matrix.
pub(crate) fn spectral_bound(m: &DMatrix<f64>) -> f64 {
    m.row_iter().map(|r| r.iter().map(|v| v.abs()).sum::<f64>()).fold(0.0, f64::max)
}

/// Log-weight, mean and covariance of the product of two components.
pub(crate) fn product_parts(
    a: &GaussianComponent,
    b: &GaussianComponent,
) -> Result<(f64, DVector<f64>, DMatrix<f64>)> {
    if a.dim() != b.dim() {
        return Err(Error::Shape(format!(
            "product of {}-d and {}-d components",
            a.dim(),
            b.dim()
        )));
    }
    let n = a.dim();
    if n > SMALL {
        let sum = &a.cov + &b.cov;
        let chol = factorize(&sum)?;
        let diff = &b.mean - &a.mean;
        let ln_w = a.weight.ln() + b.weight.ln() - 0.5 * mahalanobis_sq(&chol, &diff);
        // K = Σ₁ (Σ₁+Σ₂)⁻¹, computed as (solve(Σ₁+Σ₂, Σ₁))ᵀ since both are symmetric.
        let gain = chol.solve(&a.cov).transpose();
        let mean = &a.mean + &gain * diff;
        let cov = symmetrize(&(&a.cov - &gain * &a.cov));
        return Ok((ln_w, mean, cov));
    }
    let (ca, cb) = (a.cov.as_slice(), b.cov.as_slice());
    let mut sum = [0.0; SMALL * SMALL];
    for (s, (x, y)) in sum.iter_mut().zip(ca.iter().zip(cb)) {
        *s = x + y;
    }
    let chol = SmallChol::new(&sum[..n * n], n).ok_or_else(not_spd)?;
    let mut diff = [0.0; SMALL];
    for i in 0..n {
        diff[i] = b.mean[i] - a.mean[i];
    }
    let ln_w = a.weight.ln() + b.weight.ln() - 0.5 * chol.mahalanobis_sq(&diff[..n]);
    // μ₁ + Σ₁ (Σ₁+Σ₂)⁻¹ Δ and Σ₁ − Σ₁ (Σ₁+Σ₂)⁻¹ Σ₁, column by column.
    chol.solve(&mut diff[..n]);
    let mean = DVector::from_fn(n, |i, _| a.mean[i] + (0..n).map(|k| ca[k * n + i] * diff[k]).sum::<f64>());
    let mut x = [0.0; SMALL * SMALL];
    x[..n * n].copy_from_slice(ca);
    for j in 0..n {
        chol.solve(&mut x[j * n..(j + 1) * n]);
    }
    let mut cov = DMatrix::from_fn(n, n, |i, j| ca[j * n + i] - (0..n).map(|k| ca[k * n + i] * x[j * n + k]).sum::<f64>());
    for j in 0..n {
        for i in j + 1..n {
            let m = 0.5 * (cov[(i, j)] + cov[(j, i)]);
            cov[(i, j)] = m;
            cov[(j, i)] = m;
        }
    }
    Ok((ln_w, mean, cov))
}

/// Possibilistic Hellinger distance between the Gaussian shapes of two
/// components (weights are ignored).
///
/// `d² = 1 − det(Σ₁)^¼ det(Σ₂)^¼ / det(Σ̄)^½ · exp(−⅛ Δᵀ Σ̄⁻¹ Δ)` with
/// `Σ̄ = (Σ₁+Σ₂)/2`.
pub fn hellinger_distance(a: &GaussianComponent, b: &GaussianComponent) -> Result<f64> {
    if a.dim() != b.dim() {
        return Err(Error::Shape(format!(
            "distance between {}-d and {}-d components",
            a.dim(),
            b.dim()
        )));
    }
    hellinger_with_log_dets(a, b, log_det(&a.cov)?, log_det(&b.cov)?)
}

pub(crate) fn log_det(cov: &DMatrix<f64>) -> Result<f64> {
    let n = cov.nrows();
    if cov.is_square() && n <= SMALL {
        return SmallChol::new(cov.as_slice(), n).map(|c| c.log_det()).ok_or_else(not_spd);
    }
    Ok(factorize(cov)?.l_dirty().diagonal().iter().map(|d| 2.0 * d.ln()).sum())
}

/// [`hellinger_distance`] with the covariance log-determinants supplied.
pub(crate) fn hellinger_with_log_dets(a: &GaussianComponent, b: &GaussianComponent, ld_a: f64, ld_b: f64) -> Result<f64> {
    let n = a.dim();
    let log_coeff = if n <= SMALL {
        let mut avg = [0.0; SMALL * SMALL];
        for (s, (x, y)) in avg.iter_mut().zip(a.cov.as_slice().iter().zip(b.cov.as_slice())) {
            *s = 0.5 * (x + y);
        }
        let chol = SmallChol::new(&avg[..n * n], n).ok_or_else(not_spd)?;
        let mut diff = [0.0; SMALL];
        for i in 0..n {
            diff[i] = a.mean[i] - b.mean[i];
        }
        0.25 * ld_a + 0.25 * ld_b - 0.5 * chol.log_det() - 0.125 * chol.mahalanobis_sq(&diff[..n])
    } else {
        let avg = (&a.cov + &b.cov) * 0.5;
        let chol_avg = factorize(&avg)?;
        let ld_avg: f64 = chol_avg.l_dirty().diagonal().iter().map(|d| 2.0 * d.ln()).sum();
        let diff = &a.mean - &b.mean;
        0.25 * ld_a + 0.25 * ld_b - 0.5 * ld_avg - 0.125 * mahalanobis_sq(&chol_avg, &diff)
    };
    let d2 = 1.0 - log_coeff.exp();
    Ok(d2.max(0.0).sqrt())
}

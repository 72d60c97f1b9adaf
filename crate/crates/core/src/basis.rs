//! Bernstein polynomial basis sampled on a uniform time grid.
//!
//! A trajectory component is `P c` where `P[t][j] = B_{j,d}(t / T)`. The
//! coefficients live on normalized time, while the derivative matrices carry
//! physical units (`1/s` and `1/s^2`) through the chain rule.

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};

pub const MIN_SAMPLES: usize = 3;
pub const MIN_DEGREE: usize = 4;

/// Which derivative of the curve to sample.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Order {
    Position,
    Velocity,
    Acceleration,
}

impl TryFrom<u8> for Order {
    type Error = Error;

    fn try_from(order: u8) -> Result<Self> {
        match order {
            0 => Ok(Order::Position),
            1 => Ok(Order::Velocity),
            2 => Ok(Order::Acceleration),
            _ => Err(Error::InvalidDimension(format!(
                "curve order must be 0, 1 or 2 (got {order})"
            ))),
        }
    }
}

/// Sampled basis matrices for one polynomial parameterization.
///
/// Immutable after construction.
#[derive(Debug, Clone)]
pub struct BasisSet {
    degree: usize,
    total_time: f64,
    t_samples: Vec<f64>,
    p: DMatrix<f64>,
    pdot: DMatrix<f64>,
    pddot: DMatrix<f64>,
}

impl BasisSet {
    pub fn n(&self) -> usize {
        self.t_samples.len()
    }

    pub fn degree(&self) -> usize {
        self.degree
    }

    /// Number of coefficients per curve (`degree + 1`).
    pub fn n_coeffs(&self) -> usize {
        self.degree + 1
    }

    pub fn total_time(&self) -> f64 {
        self.total_time
    }

    pub fn t_samples(&self) -> &[f64] {
        &self.t_samples
    }

    /// Uniform sample spacing.
    pub fn dt(&self) -> f64 {
        self.total_time / (self.n() - 1) as f64
    }

    pub fn p(&self) -> &DMatrix<f64> {
        &self.p
    }

    pub fn pdot(&self) -> &DMatrix<f64> {
        &self.pdot
    }

    pub fn pddot(&self) -> &DMatrix<f64> {
        &self.pddot
    }

    pub fn matrix(&self, order: Order) -> &DMatrix<f64> {
        match order {
            Order::Position => &self.p,
            Order::Velocity => &self.pdot,
            Order::Acceleration => &self.pddot,
        }
    }

    /// Evaluates `P c`, `Pdot c` or `Pddot c`.
    pub fn eval_curve(&self, coeffs: &DVector<f64>, order: Order) -> Result<DVector<f64>> {
        Error::check_len("curve coefficients", self.n_coeffs(), coeffs.len())?;
        Ok(self.matrix(order) * coeffs)
    }
}

/// Builds the Bernstein basis of `degree` sampled at `n` uniform times over
/// `[0, total_time]`.
pub fn build_basis(n: usize, degree: usize, total_time: f64) -> Result<BasisSet> {
    if n < MIN_SAMPLES {
        return Err(Error::InvalidDimension(format!(
            "need at least {MIN_SAMPLES} samples (got {n})"
        )));
    }
    if degree < MIN_DEGREE {
        return Err(Error::InvalidDimension(format!(
            "basis degree must be at least {MIN_DEGREE} (got {degree})"
        )));
    }
    if !(total_time.is_finite() && total_time > 0.0) {
        return Err(Error::InvalidDimension(format!(
            "total time must be positive and finite (got {total_time})"
        )));
    }

    let t_samples: Vec<f64> = (0..n)
        .map(|i| {
            if i == n - 1 {
                total_time
            } else {
                total_time * i as f64 / (n - 1) as f64
            }
        })
        .collect();

    let d = degree;
    let cols = d + 1;
    let mut p = DMatrix::zeros(n, cols);
    let mut pdot = DMatrix::zeros(n, cols);
    let mut pddot = DMatrix::zeros(n, cols);

    let s1 = d as f64 / total_time;
    let s2 = (d * (d - 1)) as f64 / (total_time * total_time);

    for (row, &t) in t_samples.iter().enumerate() {
        let tau = t / total_time;
        let b0 = bernstein_row(d, tau);
        let b1 = bernstein_row(d - 1, tau);
        let b2 = bernstein_row(d - 2, tau);
        for j in 0..cols {
            p[(row, j)] = b0[j];

            // B'_{j,d} = d (B_{j-1,d-1} - B_{j,d-1})
            let lo1 = if j >= 1 { b1[j - 1] } else { 0.0 };
            let hi1 = if j < d { b1[j] } else { 0.0 };
            pdot[(row, j)] = s1 * (lo1 - hi1);

            // B''_{j,d} = d (d-1) (B_{j-2,d-2} - 2 B_{j-1,d-2} + B_{j,d-2})
            let a = if j >= 2 { b2[j - 2] } else { 0.0 };
            let b = if j >= 1 && j - 1 <= d - 2 { b2[j - 1] } else { 0.0 };
            let c = if j <= d - 2 { b2[j] } else { 0.0 };
            pddot[(row, j)] = s2 * (a - 2.0 * b + c);
        }
    }

    Ok(BasisSet {
        degree,
        total_time,
        t_samples,
        p,
        pdot,
        pddot,
    })
}

/// All Bernstein polynomials of `degree` at `tau`, via the triangular
/// recurrence (stable, no binomials).
fn bernstein_row(degree: usize, tau: f64) -> Vec<f64> {
    let mut row = vec![0.0; degree + 1];
    row[0] = 1.0;
    let u = 1.0 - tau;
    for k in 1..=degree {
        let mut prev = 0.0;
        for r in &mut row[..=k] {
            let cur = *r;
            *r = u * cur + tau * prev;
            prev = cur;
        }
    }
    row
}

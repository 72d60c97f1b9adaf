//! Constant matrices of the per-axis and heading QPs and their cached KKT
//! factorizations.
//!
//! x, y and z share the basis, the penalties and the boundary-row structure,
//! so one factorization serves all three axes.

use nalgebra::{DMatrix, DVector};

use crate::basis::BasisSet;
use crate::error::Result;
use crate::model::Weights;
use crate::qp::EqualityQp;

#[derive(Debug, Clone)]
pub struct KktCache {
    pub position: EqualityQp,
    pub heading: EqualityQp,
    /// Hessian of the position QP: smoothness + goal + kinematic + collision.
    pub q_position: DMatrix<f64>,
    /// Boundary rows `[P_0; Pdot_0; Pddot_0]`.
    pub a_eq_position: DMatrix<f64>,
    /// Hessian of the unconstrained (slack-penalized) heading QP.
    pub q_heading: DMatrix<f64>,
    /// Hessian of the heading QP without the slack penalty, for the
    /// inequality-constrained variant.
    pub q_heading_constrained: DMatrix<f64>,
    /// Heading boundary rows `[P_0; Pdot_0]`.
    pub a_eq_heading: DMatrix<f64>,
    /// Heading-rate rows `[Pdot; -Pdot]`.
    pub a_in: DMatrix<f64>,
    pub p_t: DMatrix<f64>,
    pub pdot_t: DMatrix<f64>,
    pub weights: Weights,
    pub n_obstacles: usize,
}

impl KktCache {
    pub fn new(basis: &BasisSet, weights: &Weights, n_obstacles: usize) -> Result<Self> {
        let p = basis.p();
        let pd = basis.pdot();
        let pdd = basis.pddot();
        let n = basis.n();
        let p_t = p.transpose();
        let pdot_t = pd.transpose();
        let ptp = &p_t * p;
        let pdtpd = &pdot_t * pd;
        let pddtpdd = pdd.transpose() * pdd;
        let smooth = weights.w_smooth * &pddtpdd;
        let last = p.row(n - 1);
        let goal = weights.w_goal * (last.transpose() * last);

        let q_position = &smooth
            + goal
            + weights.rho_nh * &pdtpd
            + (weights.rho_c * n_obstacles as f64) * &ptp;
        let a_eq_position = boundary_rows(basis, 3);
        let position = EqualityQp::new(&q_position, &a_eq_position, "position")?;

        // Heading smoothness stays unit-weighted: `w_smooth` trades position
        // curvature against goal and penalty terms measured in meters.
        let q_heading_constrained = &pddtpdd + weights.rho_nh * &ptp;
        let q_heading = &q_heading_constrained + (2.0 * weights.rho_in) * &pdtpd;
        let a_eq_heading = boundary_rows(basis, 2);
        let heading = EqualityQp::new(&q_heading, &a_eq_heading, "heading")?;

        let k = basis.n_coeffs();
        let mut a_in = DMatrix::zeros(2 * n, k);
        a_in.view_mut((0, 0), (n, k)).copy_from(pd);
        a_in.view_mut((n, 0), (n, k)).copy_from(&(-pd));

        Ok(KktCache {
            position,
            heading,
            q_position,
            a_eq_position,
            q_heading,
            q_heading_constrained,
            a_eq_heading,
            a_in,
            p_t,
            pdot_t,
            weights: *weights,
            n_obstacles,
        })
    }

    /// Least-squares fit `min ||P c - target||` under the position boundary
    /// rows. Right-hand side is `P' target`.
    pub fn line_fit(basis: &BasisSet) -> Result<EqualityQp> {
        let ptp = basis.p().transpose() * basis.p();
        EqualityQp::new(&ptp, &boundary_rows(basis, 3), "initial fit")
    }

    /// `A_in' w` without forming the transpose: `Pdot' (w_upper - w_lower)`.
    pub fn a_in_t_times(&self, w: &DVector<f64>) -> DVector<f64> {
        let n = w.len() / 2;
        let diff = w.rows(0, n) - w.rows(n, n);
        &self.pdot_t * diff
    }
}

/// First `count` of `[P_0; Pdot_0; Pddot_0]`.
pub fn boundary_rows(basis: &BasisSet, count: usize) -> DMatrix<f64> {
    let k = basis.n_coeffs();
    let mut a = DMatrix::zeros(count, k);
    a.row_mut(0).copy_from(&basis.p().row(0));
    if count > 1 {
        a.row_mut(1).copy_from(&basis.pdot().row(0));
    }
    if count > 2 {
        a.row_mut(2).copy_from(&basis.pddot().row(0));
    }
    a
}

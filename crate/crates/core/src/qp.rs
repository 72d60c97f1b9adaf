//! Small dense quadratic programs.
//!
//! [`EqualityQp`] factorizes the KKT matrix of
//! `min 1/2 x'Hx + g'x  s.t.  A x = b` once so that many right-hand sides can
//! be solved cheaply. [`solve_inequality_qp`] additionally handles `G x <= h`
//! through an interior-point solver.

use clarabel::algebra::CscMatrix;
use clarabel::solver::{DefaultSettings, DefaultSolver, IPSolver, NonnegativeConeT, SolverStatus, ZeroConeT};
use nalgebra::{DMatrix, DVector, LU};

use crate::error::{Error, Result};

/// Pivot ratio below which the KKT matrix is treated as singular.
const SINGULAR_PIVOT_RATIO: f64 = 1e-13;

/// Factorized KKT matrix `[H A'; A 0]`.
#[derive(Debug, Clone)]
pub struct EqualityQp {
    n_vars: usize,
    n_eq: usize,
    lu: LU<f64, nalgebra::Dyn, nalgebra::Dyn>,
}

impl EqualityQp {
    pub fn new(hessian: &DMatrix<f64>, a_eq: &DMatrix<f64>, step: &'static str) -> Result<Self> {
        let k = hessian.nrows();
        let p = a_eq.nrows();
        Error::check_len("KKT hessian columns", k, hessian.ncols())?;
        Error::check_len("KKT equality columns", k, a_eq.ncols())?;
        let kkt = kkt_matrix(hessian, a_eq);
        let lu = kkt.lu();
        let diag = lu.u().diagonal().abs();
        let (lo, hi) = (diag.min(), diag.max());
        if !(hi > 0.0 && lo / hi > SINGULAR_PIVOT_RATIO) {
            return Err(Error::SingularKkt(step));
        }
        Ok(EqualityQp {
            n_vars: k,
            n_eq: p,
            lu,
        })
    }

    pub fn n_vars(&self) -> usize {
        self.n_vars
    }

    /// Solves `[H A'; A 0] [x; mu] = [rhs; b]` and returns `x`.
    ///
    /// `rhs` is the negated linear cost, `-g`.
    pub fn solve(&self, rhs: &DVector<f64>, b_eq: &DVector<f64>) -> DVector<f64> {
        debug_assert_eq!(rhs.len(), self.n_vars);
        debug_assert_eq!(b_eq.len(), self.n_eq);
        let mut full = DVector::zeros(self.n_vars + self.n_eq);
        full.rows_mut(0, self.n_vars).copy_from(rhs);
        full.rows_mut(self.n_vars, self.n_eq).copy_from(b_eq);
        // Pivots were checked at construction, so the solve cannot fail.
        let sol = self.lu.solve(&full).expect("factorization checked non-singular");
        sol.rows(0, self.n_vars).into_owned()
    }
}

pub fn kkt_matrix(hessian: &DMatrix<f64>, a_eq: &DMatrix<f64>) -> DMatrix<f64> {
    let k = hessian.nrows();
    let p = a_eq.nrows();
    let mut kkt = DMatrix::zeros(k + p, k + p);
    kkt.view_mut((0, 0), (k, k)).copy_from(hessian);
    kkt.view_mut((0, k), (k, p)).copy_from(&a_eq.transpose());
    kkt.view_mut((k, 0), (p, k)).copy_from(a_eq);
    kkt
}

/// Solves `min 1/2 x'Hx + g'x  s.t.  A x = b,  G x <= h` with an
/// interior-point method. `H` must be symmetric positive semidefinite.
pub fn solve_inequality_qp(
    hessian: &DMatrix<f64>,
    g: &DVector<f64>,
    a_eq: &DMatrix<f64>,
    b_eq: &DVector<f64>,
    g_in: &DMatrix<f64>,
    h_in: &DVector<f64>,
) -> Result<DVector<f64>> {
    let k = hessian.nrows();
    Error::check_len("inequality QP linear cost", k, g.len())?;
    Error::check_len("inequality QP equality columns", k, a_eq.ncols())?;
    Error::check_len("inequality QP inequality columns", k, g_in.ncols())?;
    let (p, m) = (a_eq.nrows(), g_in.nrows());

    let p_upper = csc(&DMatrix::from_fn(k, k, |i, j| if i <= j { hessian[(i, j)] } else { 0.0 }));
    let mut stacked = DMatrix::zeros(p + m, k);
    stacked.view_mut((0, 0), (p, k)).copy_from(a_eq);
    stacked.view_mut((p, 0), (m, k)).copy_from(g_in);
    let rhs: Vec<f64> = b_eq.iter().chain(h_in.iter()).copied().collect();
    let cones = [ZeroConeT(p), NonnegativeConeT(m)];
    let settings = DefaultSettings {
        verbose: false,
        tol_gap_abs: 1e-10,
        tol_gap_rel: 1e-10,
        tol_feas: 1e-10,
        ..DefaultSettings::default()
    };

    let mut solver = DefaultSolver::new(&p_upper, g.as_slice(), &csc(&stacked), &rhs, &cones, settings)
        .map_err(|e| Error::Infeasible(format!("inequality QP setup: {e:?}")))?;
    solver.solve();
    match solver.solution.status {
        SolverStatus::Solved | SolverStatus::AlmostSolved => Ok(DVector::from_vec(solver.solution.x.clone())),
        SolverStatus::PrimalInfeasible | SolverStatus::AlmostPrimalInfeasible => {
            Err(Error::Infeasible("inequality constraints are incompatible".into()))
        }
        other => Err(Error::Infeasible(format!("inequality QP stopped with status {other:?}"))),
    }
}

fn csc(m: &DMatrix<f64>) -> CscMatrix<f64> {
    let (mut colptr, mut rowval, mut nzval) = (vec![0], Vec::new(), Vec::new());
    for j in 0..m.ncols() {
        for i in 0..m.nrows() {
            if m[(i, j)] != 0.0 {
                rowval.push(i);
                nzval.push(m[(i, j)]);
            }
        }
        colptr.push(rowval.len());
    }
    CscMatrix::new(m.nrows(), m.ncols(), colptr, rowval, nzval)
}

//! Dense linear-algebra kernels shared by every other module: zero-order
//! hold discretization, rank tests, the discrete-time Riccati and
//! Lyapunov equations, and a dense two-phase simplex LP solver.
//!
//! Everything here operates on `nalgebra` dynamic matrices and is sized
//! for desk-scale control problems (a dozen states, not thousands).

use nalgebra::{DMatrix, DVector};

use crate::error::Error;
use crate::plant::{ContinuousLti, DiscreteLti};

mod simplex;

pub use simplex::{lp_solve, LpProblem, LpResult, LpStatus};

/// Relative tolerance on the Riccati fixed-point residual.
pub const DARE_TOL: f64 = 1e-9;
/// Iteration cap for the Riccati fixed-point recursion.
pub const DARE_MAX_ITERS: usize = 100_000;

/// Discretize a continuous-time model under a zero-order hold.
///
/// The state matrix is `exp(Ac*dt)`; the input matrix comes from the
/// augmented-block trick: exponentiate `[[Ac, Bc], [0, 0]] * dt` and read
/// the top-right block, which equals the convolution integral of the
/// matrix exponential against `Bc`. Output matrices pass through
/// unchanged.
pub fn zoh_discretize(cont: &ContinuousLti, dt: f64) -> Result<DiscreteLti, Error> {
    if !(dt > 0.0) || !dt.is_finite() {
        return Err(Error::Config(format!(
            "sampling period must be positive and finite, got {dt}"
        )));
    }
    let n = cont.ac.nrows();
    let p = cont.bc.ncols();
    let mut aug = DMatrix::<f64>::zeros(n + p, n + p);
    aug.view_mut((0, 0), (n, n)).copy_from(&(&cont.ac * dt));
    aug.view_mut((0, n), (n, p)).copy_from(&(&cont.bc * dt));
    let e = aug.exp();
    let a = e.view((0, 0), (n, n)).into_owned();
    let b = e.view((0, n), (n, p)).into_owned();
    DiscreteLti::new(a, b, cont.cc.clone(), cont.dc.clone(), dt)
}

/// Numerical rank by column-pivoted QR with the tolerance
/// `max(rows, cols) * eps * (largest column norm)`.
pub fn numeric_rank(m: &DMatrix<f64>) -> usize {
    if m.nrows() == 0 || m.ncols() == 0 {
        return 0;
    }
    let max_col_norm = (0..m.ncols())
        .map(|j| m.column(j).norm())
        .fold(0.0_f64, f64::max);
    if max_col_norm == 0.0 {
        return 0;
    }
    let tol = m.nrows().max(m.ncols()) as f64 * f64::EPSILON * max_col_norm;
    let qr = m.clone().col_piv_qr();
    let r = qr.r();
    (0..r.nrows().min(r.ncols()))
        .take_while(|&i| r[(i, i)].abs() > tol)
        .count()
}

/// Rank test on the controllability matrix `[B, AB, ..., A^(n-1) B]`.
pub fn is_controllable(a: &DMatrix<f64>, b: &DMatrix<f64>) -> bool {
    let n = a.nrows();
    let p = b.ncols();
    let mut ctrb = DMatrix::<f64>::zeros(n, n * p);
    let mut block = b.clone();
    for k in 0..n {
        ctrb.view_mut((0, k * p), (n, p)).copy_from(&block);
        block = a * &block;
    }
    numeric_rank(&ctrb) == n
}

/// Rank test on the observability matrix `[C; CA; ...; CA^(n-1)]`.
pub fn is_observable(c: &DMatrix<f64>, a: &DMatrix<f64>) -> bool {
    let n = a.nrows();
    let m = c.nrows();
    let mut obsv = DMatrix::<f64>::zeros(n * m, n);
    let mut block = c.clone();
    for k in 0..n {
        obsv.view_mut((k * m, 0), (m, n)).copy_from(&block);
        block = &block * a;
    }
    numeric_rank(&obsv) == n
}

/// Spectral radius via the complex eigenvalues of the real Schur form.
pub fn spectral_radius(m: &DMatrix<f64>) -> f64 {
    m.complex_eigenvalues()
        .iter()
        .map(|z| z.norm())
        .fold(0.0_f64, f64::max)
}

fn check_symmetric(m: &DMatrix<f64>, name: &str) -> Result<(), Error> {
    let asym = (m - m.transpose()).norm();
    if asym > 1e-9 * (1.0 + m.norm()) {
        return Err(Error::Config(format!("{name} must be symmetric")));
    }
    Ok(())
}

/// Fixed-point solve of the discrete-time Riccati equation
/// `Q = A'QA - (A'QB)(Qu + B'QB)^-1 (B'QA) + Qx`, iterated from
/// `Q = Qx` until the residual drops below `DARE_TOL * (1 + ||Q||_F)`.
pub fn solve_dare(
    a: &DMatrix<f64>,
    b: &DMatrix<f64>,
    qx: &DMatrix<f64>,
    qu: &DMatrix<f64>,
) -> Result<DMatrix<f64>, Error> {
    let n = a.nrows();
    if a.ncols() != n || b.nrows() != n || qx.nrows() != n || qx.ncols() != n {
        return Err(Error::Config("Riccati solve: dimension mismatch".into()));
    }
    let p = b.ncols();
    if qu.nrows() != p || qu.ncols() != p {
        return Err(Error::Config(
            "Riccati solve: input weight dimension mismatch".into(),
        ));
    }
    check_symmetric(qx, "Qx")?;
    check_symmetric(qu, "Qu")?;
    if nalgebra::Cholesky::new(qu.clone()).is_none() {
        return Err(Error::Config(
            "Qu must be positive definite for the Riccati recursion".into(),
        ));
    }

    let step = |q: &DMatrix<f64>| -> Result<DMatrix<f64>, Error> {
        let btq = b.transpose() * q;
        let inner = qu + &btq * b;
        let chol = nalgebra::Cholesky::new(inner).ok_or_else(|| {
            Error::Numerical("Riccati inner matrix Qu + B'QB lost definiteness".into())
        })?;
        let btqa = &btq * a;
        let gain_term = a.transpose() * q * b * chol.solve(&btqa);
        let next = a.transpose() * q * a - gain_term + qx;
        // Symmetrize to stop roundoff drift from compounding.
        Ok((&next + next.transpose()) * 0.5)
    };

    let mut q = qx.clone();
    let mut residual = f64::INFINITY;
    for _ in 0..DARE_MAX_ITERS {
        let next = step(&q)?;
        residual = (&next - &q).norm();
        if residual <= DARE_TOL * (1.0 + q.norm()) {
            return Ok(q);
        }
        q = next;
    }
    Err(Error::Numerical(format!(
        "Riccati recursion did not converge in {DARE_MAX_ITERS} iterations (residual {residual:.3e})"
    )))
}

/// Terminal feedback gain `K = -(Qu + B'QnB)^-1 (B'QnA)`.
///
/// The closed loop `A + BK` is verified Schur; failure indicates a bad
/// Riccati solution upstream.
pub fn terminal_gain(
    a: &DMatrix<f64>,
    b: &DMatrix<f64>,
    qu: &DMatrix<f64>,
    qn: &DMatrix<f64>,
) -> Result<DMatrix<f64>, Error> {
    let inner = qu + b.transpose() * qn * b;
    let chol = nalgebra::Cholesky::new(inner)
        .ok_or_else(|| Error::Numerical("Qu + B'QnB is not positive definite".into()))?;
    let k = -chol.solve(&(b.transpose() * qn * a));
    let rho = spectral_radius(&(a + b * &k));
    if rho >= 1.0 - 1e-9 {
        return Err(Error::Numerical(format!(
            "closed loop A + BK has spectral radius {rho:.12}, expected < 1 (Riccati solve suspect)"
        )));
    }
    Ok(k)
}

/// Solve `Acl' P Acl - P = -I` for symmetric positive definite `P` by
/// vectorizing into an n^2 x n^2 linear system (Kronecker form).
pub fn solve_discrete_lyapunov(acl: &DMatrix<f64>) -> Result<DMatrix<f64>, Error> {
    let n = acl.nrows();
    if acl.ncols() != n {
        return Err(Error::Config("Lyapunov solve: matrix must be square".into()));
    }
    // vec(A' P A) = (A' (x) A') vec(P) with column-major vec.
    let at = acl.transpose();
    let mut system = at.kronecker(&at);
    for i in 0..n * n {
        system[(i, i)] -= 1.0;
    }
    let rhs = DVector::<f64>::from_fn(n * n, |i, _| {
        // -vec(I)
        if i % (n + 1) == 0 {
            -1.0
        } else {
            0.0
        }
    });
    let lu = system.lu();
    let vec_p = lu.solve(&rhs).ok_or_else(|| {
        Error::Numerical("Lyapunov system singular (closed loop is not Schur)".into())
    })?;
    let p = DMatrix::<f64>::from_column_slice(n, n, vec_p.as_slice());
    let p = (&p + p.transpose()) * 0.5;
    if nalgebra::Cholesky::new(p.clone()).is_none() {
        return Err(Error::Numerical(
            "Lyapunov solution is not positive definite (closed loop is not Schur)".into(),
        ));
    }
    Ok(p)
}

/// Minimum-norm least-squares solution of `M x = rhs` via SVD, together
/// with the achieved infinity-norm residual.
pub fn min_norm_least_squares(
    m: &DMatrix<f64>,
    rhs: &DVector<f64>,
) -> Result<(DVector<f64>, f64), Error> {
    let svd = m.clone().svd(true, true);
    let sigma_max = svd.singular_values.iter().cloned().fold(0.0_f64, f64::max);
    let eps = 1e-12 * (1.0 + sigma_max);
    let sol = svd
        .solve(rhs, eps)
        .map_err(|e| Error::Numerical(format!("SVD solve failed: {e}")))?;
    let residual = (m * &sol - rhs).amax();
    Ok((sol, residual))
}

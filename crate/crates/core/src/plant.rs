//! Plant modeling: LTI state-space representations, elementwise box
//! constraints on states and inputs, and resolution of the control
//! target into a steady-state configuration.

use nalgebra::{DMatrix, DVector};

use crate::error::Error;
use crate::numerics;

/// Residual tolerance on the steady-state equations.
pub const STEADY_STATE_TOL: f64 = 1e-8;

/// Continuous-time model `x' = Ac x + Bc u`, `y = Cc x + Dc u`.
#[derive(Debug, Clone)]
pub struct ContinuousLti {
    pub ac: DMatrix<f64>,
    pub bc: DMatrix<f64>,
    pub cc: DMatrix<f64>,
    pub dc: DMatrix<f64>,
}

impl ContinuousLti {
    pub fn new(
        ac: DMatrix<f64>,
        bc: DMatrix<f64>,
        cc: DMatrix<f64>,
        dc: DMatrix<f64>,
    ) -> Result<Self, Error> {
        check_system_dims(&ac, &bc, &cc, &dc)?;
        Ok(Self { ac, bc, cc, dc })
    }
}

/// Discrete-time model `x(k+1) = A x(k) + B u(k)`, `y = C x + D u`, with
/// the sampling period it was obtained at.
#[derive(Debug, Clone)]
pub struct DiscreteLti {
    pub a: DMatrix<f64>,
    pub b: DMatrix<f64>,
    pub c: DMatrix<f64>,
    pub d: DMatrix<f64>,
    pub dt: f64,
}

impl DiscreteLti {
    pub fn new(
        a: DMatrix<f64>,
        b: DMatrix<f64>,
        c: DMatrix<f64>,
        d: DMatrix<f64>,
        dt: f64,
    ) -> Result<Self, Error> {
        check_system_dims(&a, &b, &c, &d)?;
        if !(dt > 0.0) || !dt.is_finite() {
            return Err(Error::Config(format!(
                "sampling period must be positive and finite, got {dt}"
            )));
        }
        Ok(Self { a, b, c, d, dt })
    }

    pub fn num_states(&self) -> usize {
        self.a.nrows()
    }

    pub fn num_inputs(&self) -> usize {
        self.b.ncols()
    }

    pub fn num_outputs(&self) -> usize {
        self.c.nrows()
    }

    pub fn output(&self, x: &DVector<f64>, u: &DVector<f64>) -> DVector<f64> {
        &self.c * x + &self.d * u
    }

    pub fn step(&self, x: &DVector<f64>, u: &DVector<f64>) -> DVector<f64> {
        &self.a * x + &self.b * u
    }
}

fn check_system_dims(
    a: &DMatrix<f64>,
    b: &DMatrix<f64>,
    c: &DMatrix<f64>,
    d: &DMatrix<f64>,
) -> Result<(), Error> {
    let n = a.nrows();
    if a.ncols() != n {
        return Err(Error::Config(format!(
            "state matrix must be square, got {}x{}",
            a.nrows(),
            a.ncols()
        )));
    }
    if n == 0 {
        return Err(Error::Config("system must have at least one state".into()));
    }
    if b.nrows() != n {
        return Err(Error::Config(format!(
            "input matrix has {} rows, expected {n}",
            b.nrows()
        )));
    }
    if b.ncols() == 0 {
        return Err(Error::Config("system must have at least one input".into()));
    }
    if c.ncols() != n {
        return Err(Error::Config(format!(
            "output matrix has {} columns, expected {n}",
            c.ncols()
        )));
    }
    if d.nrows() != c.nrows() || d.ncols() != b.ncols() {
        return Err(Error::Config(format!(
            "feedthrough matrix is {}x{}, expected {}x{}",
            d.nrows(),
            d.ncols(),
            c.nrows(),
            b.ncols()
        )));
    }
    let all_finite = a.iter().chain(b.iter()).chain(c.iter()).chain(d.iter());
    for v in all_finite {
        if !v.is_finite() {
            return Err(Error::Config("system matrices must be finite".into()));
        }
    }
    Ok(())
}

/// Elementwise lower/upper bounds; either side may be infinite.
#[derive(Debug, Clone)]
pub struct BoxSet {
    pub lower: DVector<f64>,
    pub upper: DVector<f64>,
}

impl BoxSet {
    pub fn new(lower: DVector<f64>, upper: DVector<f64>) -> Result<Self, Error> {
        if lower.len() != upper.len() {
            return Err(Error::Config(format!(
                "bound vectors have mismatched lengths {} and {}",
                lower.len(),
                upper.len()
            )));
        }
        for i in 0..lower.len() {
            if lower[i].is_nan() || upper[i].is_nan() {
                return Err(Error::Config("bounds must not be NaN".into()));
            }
            if !(lower[i] < upper[i]) {
                return Err(Error::Config(format!(
                    "lower bound {} must be strictly below upper bound {} at index {}",
                    lower[i],
                    upper[i],
                    i + 1
                )));
            }
        }
        Ok(Self { lower, upper })
    }

    /// Fully unbounded set of the given dimension.
    pub fn unbounded(len: usize) -> Self {
        Self {
            lower: DVector::from_element(len, f64::NEG_INFINITY),
            upper: DVector::from_element(len, f64::INFINITY),
        }
    }

    pub fn len(&self) -> usize {
        self.lower.len()
    }

    pub fn is_empty(&self) -> bool {
        self.lower.len() == 0
    }

    /// True when `lower + margin <= v <= upper - margin` componentwise;
    /// infinite bounds always pass.
    pub fn contains(&self, v: &DVector<f64>, margin: f64) -> bool {
        debug_assert_eq!(v.len(), self.len());
        (0..self.len()).all(|i| {
            let lo = if self.lower[i].is_finite() {
                v[i] >= self.lower[i] + margin
            } else {
                true
            };
            let hi = if self.upper[i].is_finite() {
                v[i] <= self.upper[i] - margin
            } else {
                true
            };
            lo && hi
        })
    }

    /// Interior margin for side `i`: a fixed fraction of the box width,
    /// or of unit length when the opposite side is infinite.
    pub fn interior_margin(&self, i: usize) -> f64 {
        const FRACTION: f64 = 1e-6;
        let width = if self.lower[i].is_finite() && self.upper[i].is_finite() {
            self.upper[i] - self.lower[i]
        } else {
            1.0
        };
        FRACTION * width
    }

    /// Strict interiority with the per-component margin above.
    pub fn strictly_interior(&self, v: &DVector<f64>) -> bool {
        debug_assert_eq!(v.len(), self.len());
        (0..self.len()).all(|i| {
            let m = self.interior_margin(i);
            let lo = !self.lower[i].is_finite() || v[i] >= self.lower[i] + m;
            let hi = !self.upper[i].is_finite() || v[i] <= self.upper[i] - m;
            lo && hi
        })
    }
}

/// Resolved steady-state configuration the controller tracks.
#[derive(Debug, Clone)]
pub struct SteadyTarget {
    pub xbar: DVector<f64>,
    pub ubar: DVector<f64>,
    pub r: DVector<f64>,
}

/// Solve the steady-state equations for a desired output reference:
/// `[A-I, B; C, D] [x; u] = [0; r]`. When the solution set has positive
/// dimension the minimum-norm solution is returned.
pub fn resolve_target_from_reference(
    model: &DiscreteLti,
    x_set: &BoxSet,
    u_set: &BoxSet,
    r: &DVector<f64>,
) -> Result<SteadyTarget, Error> {
    let n = model.num_states();
    let p = model.num_inputs();
    let m = model.num_outputs();
    if r.len() != m {
        return Err(Error::Config(format!(
            "reference has {} entries, expected {m}",
            r.len()
        )));
    }
    if r.iter().any(|v| !v.is_finite()) {
        return Err(Error::Config("reference must be finite".into()));
    }

    let mut stacked = DMatrix::<f64>::zeros(n + m, n + p);
    stacked
        .view_mut((0, 0), (n, n))
        .copy_from(&(&model.a - DMatrix::identity(n, n)));
    stacked.view_mut((0, n), (n, p)).copy_from(&model.b);
    stacked.view_mut((n, 0), (m, n)).copy_from(&model.c);
    stacked.view_mut((n, n), (m, p)).copy_from(&model.d);
    let mut rhs = DVector::<f64>::zeros(n + m);
    rhs.rows_mut(n, m).copy_from(r);

    let (sol, residual) = numerics::min_norm_least_squares(&stacked, &rhs)?;
    if residual > STEADY_STATE_TOL {
        return Err(Error::NotSteadyStateAdmissible);
    }
    let xbar = sol.rows(0, n).into_owned();
    let ubar = sol.rows(n, p).into_owned();
    check_target_interior(x_set, u_set, &xbar, &ubar)?;
    Ok(SteadyTarget {
        xbar,
        ubar,
        r: r.clone(),
    })
}

/// Solve `(A-I) xbar + B ubar = 0` for the steady input matching a
/// desired equilibrium, recovering the implied reference `C xbar + D ubar`.
pub fn resolve_target_from_equilibrium(
    model: &DiscreteLti,
    x_set: &BoxSet,
    u_set: &BoxSet,
    xbar: &DVector<f64>,
) -> Result<SteadyTarget, Error> {
    let n = model.num_states();
    if xbar.len() != n {
        return Err(Error::Config(format!(
            "equilibrium point has {} entries, expected {n}",
            xbar.len()
        )));
    }
    if xbar.iter().any(|v| !v.is_finite()) {
        return Err(Error::Config("equilibrium point must be finite".into()));
    }
    let rhs = -(&model.a - DMatrix::identity(n, n)) * xbar;
    let (ubar, residual) = numerics::min_norm_least_squares(&model.b, &rhs)?;
    if residual > STEADY_STATE_TOL {
        return Err(Error::NotEquilibrium);
    }
    check_target_interior(x_set, u_set, xbar, &ubar)?;
    let r = model.output(xbar, &ubar);
    Ok(SteadyTarget {
        xbar: xbar.clone(),
        ubar,
        r,
    })
}

fn check_target_interior(
    x_set: &BoxSet,
    u_set: &BoxSet,
    xbar: &DVector<f64>,
    ubar: &DVector<f64>,
) -> Result<(), Error> {
    if !x_set.strictly_interior(xbar) || !u_set.strictly_interior(ubar) {
        return Err(Error::TargetOnBoundary);
    }
    Ok(())
}

fn format_bound(v: f64) -> String {
    if v == f64::INFINITY {
        "Inf".to_string()
    } else if v == f64::NEG_INFINITY {
        "-Inf".to_string()
    } else {
        format!("{v}")
    }
}

/// Human-readable constraint enumeration: state upper bounds, state lower
/// bounds, input upper bounds, input lower bounds, with infinite limits
/// printed as `Inf` / `-Inf`.
pub fn list_constraints(x_set: &BoxSet, u_set: &BoxSet) -> String {
    let mut out = String::new();
    out.push_str("State Constraints:\n");
    let n = x_set.len();
    for i in 0..n {
        out.push_str(&format!(
            "State Constraint {}: x{} <= {}\n",
            i + 1,
            i + 1,
            format_bound(x_set.upper[i])
        ));
    }
    for i in 0..n {
        out.push_str(&format!(
            "State Constraint {}: x{} >= {}\n",
            n + i + 1,
            i + 1,
            format_bound(x_set.lower[i])
        ));
    }
    out.push_str("Input Constraints:\n");
    let p = u_set.len();
    for i in 0..p {
        out.push_str(&format!(
            "Input Constraint {}: u{} <= {}\n",
            i + 1,
            i + 1,
            format_bound(u_set.upper[i])
        ));
    }
    for i in 0..p {
        out.push_str(&format!(
            "Input Constraint {}: u{} >= {}\n",
            p + i + 1,
            i + 1,
            format_bound(u_set.lower[i])
        ));
    }
    out
}

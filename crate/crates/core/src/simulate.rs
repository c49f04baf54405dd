//! Well-posedness rank tests and closed-loop simulation.
//!
//! A plant and a descriptor controller sharing `(u, x)` step by solving
//!
//! ```text
//! [E  -B ] [x(t+1)]   [A ]
//! [Ec -Bc] [ u(t) ] = [Ac] x(t)
//! ```
//!
//! afresh at every tick, so rank loss or inconsistency is reported at the step
//! where it happens.

use crate::error::{Error, Result, WellPosedCondition};
use crate::numkit::{
    hstack, max_abs_vec, pseudo_inverse, rank_of, vstack, Matrix, Tolerance, Vector,
};
use crate::refinement::RefinedController;
use crate::systems::{Controller, DescriptorSystem, Trajectory};

/// Longest horizon the simulators accept.
pub const MAX_HORIZON: usize = 10_000;

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct WellPosednessReport {
    /// Rank of `[E B; Ec Bc]`.
    pub rank_lhs: usize,
    /// Rank of `[E B A; Ec Bc Ac]`.
    pub rank_aug: usize,
    /// Number of unknowns per step, `n + p`.
    pub unknowns: usize,
    pub existence_ok: bool,
    pub uniqueness_ok: bool,
    pub verdict: bool,
}

impl WellPosednessReport {
    pub fn failing_condition(&self) -> Option<WellPosedCondition> {
        if !self.existence_ok {
            Some(WellPosedCondition::Existence)
        } else if !self.uniqueness_ok {
            Some(WellPosedCondition::Uniqueness)
        } else {
            None
        }
    }
}

/// Rank test for a generic stacked step equation `lhs * v = rhs * w`: a
/// solution exists for every `w` iff `rank lhs == rank [lhs rhs]`, and it is
/// unique iff `lhs` has full column rank.
pub fn stacked_wellposedness(lhs: &Matrix, rhs: &Matrix, tol: &Tolerance) -> WellPosednessReport {
    let rank_lhs = rank_of(lhs, tol);
    let rank_aug = rank_of(&hstack(lhs, rhs), tol);
    let unknowns = lhs.ncols();
    let existence_ok = rank_lhs == rank_aug;
    let uniqueness_ok = rank_lhs == unknowns;
    WellPosednessReport {
        rank_lhs,
        rank_aug,
        unknowns,
        existence_ok,
        uniqueness_ok,
        verdict: existence_ok && uniqueness_ok,
    }
}

/// `[E -B; Ec -Bc]` and `[A; Ac]`.
pub fn interconnection(sys: &DescriptorSystem, ctrl: &Controller) -> Result<(Matrix, Matrix)> {
    let ctrl = ctrl.conform(sys.n(), sys.p())?;
    let lhs = vstack(&sys.step_matrix(), &hstack(ctrl.ec(), &(-ctrl.bc())));
    let rhs = vstack(sys.a(), ctrl.ac());
    Ok((lhs, rhs))
}

/// Existence and uniqueness of continuations for the interconnection of
/// `sys` and `ctrl`.
pub fn check_wellposed(
    sys: &DescriptorSystem,
    ctrl: &Controller,
    tol: &Tolerance,
) -> Result<WellPosednessReport> {
    let (lhs, rhs) = interconnection(sys, ctrl)?;
    Ok(stacked_wellposedness(&lhs, &rhs, tol))
}

/// Solution of one implicit step.
#[derive(Debug, Clone, PartialEq)]
pub struct ImplicitStep {
    pub x_next: Vector,
    /// Everything after the first `n` unknowns (the plant input, and any
    /// auxiliary unknowns of a composed system).
    pub u: Vector,
}

/// Solves `lhs * [x_next; u] = rhs` for its unique solution.
///
/// The residual bound scales with the right-hand side:
/// `residual_atol * max(1, |rhs|_inf)`.
pub fn step_implicit(
    lhs: &Matrix,
    rhs: &Vector,
    n: usize,
    tol: &Tolerance,
) -> Result<ImplicitStep> {
    if lhs.nrows() != rhs.len() || n > lhs.ncols() {
        return Err(Error::DimensionMismatch(format!(
            "step matrix {:?} against right-hand side of length {} and n = {n}",
            lhs.shape(),
            rhs.len()
        )));
    }
    let (pinv, rank) = pseudo_inverse(lhs, tol);
    if rank < lhs.ncols() {
        return Err(Error::NonUnique {
            step: None,
            rank,
            unknowns: lhs.ncols(),
        });
    }
    let v = pinv * rhs;
    let residual = max_abs_vec(&(lhs * &v - rhs));
    if residual > tol.residual_atol * max_abs_vec(rhs).max(1.0) {
        return Err(Error::NoSolution {
            step: None,
            residual,
        });
    }
    Ok(ImplicitStep {
        x_next: v.rows(0, n).into_owned(),
        u: v.rows(n, v.len() - n).into_owned(),
    })
}

fn check_horizon(horizon: usize) -> Result<()> {
    if horizon > MAX_HORIZON {
        return Err(Error::HorizonTooLong(horizon));
    }
    Ok(())
}

/// Runs the interconnection of a plant and a well-posed controller from `x0`,
/// without checking `x0` against the initial set.
pub fn run_closed_loop(
    sys: &DescriptorSystem,
    ctrl: &Controller,
    x0: &Vector,
    horizon: usize,
    tol: &Tolerance,
) -> Result<Trajectory> {
    check_horizon(horizon)?;
    if x0.len() != sys.n() {
        return Err(Error::DimensionMismatch(format!(
            "x0 has length {} but n = {}",
            x0.len(),
            sys.n()
        )));
    }
    let report = check_wellposed(sys, ctrl, tol)?;
    if let Some(condition) = report.failing_condition() {
        return Err(Error::NotWellPosed { condition });
    }
    let (lhs, rhs) = interconnection(sys, ctrl)?;
    let mut x = Vec::with_capacity(horizon + 1);
    let mut u = Vec::with_capacity(horizon);
    x.push(x0.clone());
    for t in 0..horizon {
        let b = &rhs * &x[t];
        let step = step_implicit(&lhs, &b, sys.n(), tol).map_err(|e| e.with_step(t))?;
        x.push(step.x_next);
        u.push(step.u);
    }
    let y = x.iter().map(|xi| sys.c() * xi).collect();
    Trajectory::new(u, x, y)
}

/// Closed-loop trajectory of `sys` under `ctrl` from `x0 ∈ X_0`.
pub fn simulate_closed_loop(
    sys: &DescriptorSystem,
    ctrl: &Controller,
    x0: &Vector,
    horizon: usize,
    tol: &Tolerance,
) -> Result<Trajectory> {
    if !sys.init().contains(x0, tol) {
        return Err(Error::InitialStateOutsideSet);
    }
    run_closed_loop(sys, ctrl, x0, horizon, tol)
}

/// Runs `sys` under a refined controller from `x0`, without checking `x0`
/// against the initial set. Returns the plant trajectory and the path of the
/// controller's internal abstract state.
pub fn run_refined(
    sys: &DescriptorSystem,
    rc: &RefinedController,
    x0: &Vector,
    horizon: usize,
) -> Result<(Trajectory, Vec<Vector>)> {
    check_horizon(horizon)?;
    if rc.n() != sys.n() || rc.p() != sys.p() || x0.len() != sys.n() {
        return Err(Error::DimensionMismatch(format!(
            "refined controller for (n, p) = ({}, {}) against plant ({}, {}), x0 length {}",
            rc.n(),
            rc.p(),
            sys.n(),
            sys.p(),
            x0.len()
        )));
    }
    let mut x = Vec::with_capacity(horizon + 1);
    let mut z = Vec::with_capacity(horizon + 1);
    let mut u = Vec::with_capacity(horizon);
    x.push(x0.clone());
    z.push(rc.initial_internal_state(x0));
    for t in 0..horizon {
        let step = rc.step(&x[t], &z[t]);
        x.push(step.x_next);
        z.push(step.z_next);
        u.push(step.u);
    }
    let y = x.iter().map(|xi| sys.c() * xi).collect();
    Ok((Trajectory::new(u, x, y)?, z))
}

/// Closed-loop trajectory of `sys` under a refined controller from `x0 ∈ X_0`.
pub fn simulate_refined(
    sys: &DescriptorSystem,
    rc: &RefinedController,
    x0: &Vector,
    horizon: usize,
    tol: &Tolerance,
) -> Result<(Trajectory, Vec<Vector>)> {
    if !sys.init().contains(x0, tol) {
        return Err(Error::InitialStateOutsideSet);
    }
    run_refined(sys, rc, x0, horizon)
}

#[derive(Debug, Clone, PartialEq)]
pub struct ComparisonReport {
    pub horizon: usize,
    pub max_output_dev: f64,
    pub max_relation_dev: f64,
    pub bound: f64,
    pub pass: bool,
}

impl ComparisonReport {
    /// Adds the deviation `max_t |H x(t) - z(t)|` between a refined run's
    /// plant states and its internal abstract states.
    pub fn with_relation(mut self, h: &Matrix, x: &[Vector], z: &[Vector]) -> Result<Self> {
        if x.len() != z.len() {
            return Err(Error::DimensionMismatch(
                "state paths differ in length".into(),
            ));
        }
        self.max_relation_dev = x
            .iter()
            .zip(z)
            .map(|(xi, zi)| max_abs_vec(&(h * xi - zi)))
            .fold(0.0, f64::max);
        self.pass = self.max_output_dev <= self.bound && self.max_relation_dev <= self.bound;
        Ok(self)
    }
}

/// Largest output deviation between two trajectories of equal horizon.
pub fn compare_outputs(t1: &Trajectory, t2: &Trajectory, bound: f64) -> Result<ComparisonReport> {
    if t1.horizon() != t2.horizon() {
        return Err(Error::DimensionMismatch(format!(
            "horizons differ: {} vs {}",
            t1.horizon(),
            t2.horizon()
        )));
    }
    let mut dev = 0.0_f64;
    for (a, b) in t1.y.iter().zip(&t2.y) {
        if a.len() != b.len() {
            return Err(Error::DimensionMismatch(format!(
                "output dimensions differ: {} vs {}",
                a.len(),
                b.len()
            )));
        }
        dev = dev.max(max_abs_vec(&(a - b)));
    }
    Ok(ComparisonReport {
        horizon: t1.horizon(),
        max_output_dev: dev,
        max_relation_dev: 0.0,
        bound,
        pass: dev <= bound,
    })
}

//! Refining an abstract controller into a concrete one.
//!
//! The pipeline has three stages, all linear:
//!
//! 1. the abstract closed loop `x_a+ = K x_a`, `u_a = L x_a` is rewritten as a
//!    driving schedule `s_a = P x_a` for the abstract DV system;
//! 2. the interface `s = G (drift x + B_da s_a)` carries abstract DV steps to
//!    concrete DV steps that stay on the relation `x_a = H x`;
//! 3. the lifting constraint `B_d^T x+ = B_d^T A_d x + B_d^T B_d s` together
//!    with `u = C_u x + D_u s` turns the concrete DV step back into a control
//!    law on the descriptor plant.
//!
//! The resulting controller carries an internal copy `z` of the abstract
//! closed-loop state, started at `z(0) = H x(0)`.

use crate::dvtransform::{to_dv, DrivingVariableSystem};
use crate::error::{Error, Result, Stage};
use crate::numkit::{max_abs, min_norm_solve, vstack, Matrix, Tolerance, Vector};
use crate::relations::{check_simulation, synthesize_interface, InterfaceMap, LinearStateMap};
use crate::simulate::{
    check_wellposed, compare_outputs, interconnection, run_closed_loop, run_refined,
    stacked_wellposedness, WellPosednessReport,
};
use crate::systems::{Controller, DescriptorSystem};

/// Unique continuation of a well-posed plant/controller pair:
/// `x+ = K x`, `u = L x`.
#[derive(Debug, Clone, PartialEq)]
pub struct ClosedLoopLinear {
    pub k: Matrix,
    pub l: Matrix,
}

/// Solves the stacked interconnection for its closed-loop maps.
pub fn closed_loop_reduce(
    abs: &DescriptorSystem,
    ctrl: &Controller,
    tol: &Tolerance,
) -> Result<ClosedLoopLinear> {
    let report = check_wellposed(abs, ctrl, tol)?;
    if let Some(condition) = report.failing_condition() {
        return Err(Error::NotWellPosed { condition });
    }
    let (lhs, rhs) = interconnection(abs, ctrl)?;
    let (sol, feasible) = min_norm_solve(&lhs, &rhs, tol);
    if !feasible {
        let residual = max_abs(&(&lhs * &sol - &rhs));
        return Err(Error::NoSolution {
            step: None,
            residual,
        });
    }
    let n = abs.n();
    Ok(ClosedLoopLinear {
        k: sol.rows(0, n).into_owned(),
        l: sol.rows(n, abs.p()).into_owned(),
    })
}

/// `P = N_a^T ([K; L] - [A_da; C_ua])`, so that driving the abstract DV system
/// with `s_a = P x_a` reproduces the closed loop.
pub fn abstract_s_schedule(
    abs_dv: &DrivingVariableSystem,
    cl: &ClosedLoopLinear,
    tol: &Tolerance,
) -> Result<Matrix> {
    let na = abs_dv.n();
    if cl.k.shape() != (na, na) || cl.l.shape() != (abs_dv.p(), na) {
        return Err(Error::DimensionMismatch(format!(
            "closed loop K {:?}, L {:?} for a DV system with n = {na}, p = {}",
            cl.k.shape(),
            cl.l.shape(),
            abs_dv.p()
        )));
    }
    let offset = vstack(&cl.k, &cl.l) - abs_dv.particular();
    let kernel = abs_dv.kernel();
    let p = kernel.transpose() * &offset;
    let residual = max_abs(&(&kernel * &p - offset));
    if residual > tol.residual_atol {
        return Err(Error::PreconditionFailed(format!(
            "closed loop is not generated by the DV system (residual {residual:e})"
        )));
    }
    Ok(p)
}

/// Everything computed in one tick of a refined closed loop.
#[derive(Debug, Clone, PartialEq)]
pub struct RefinedStep {
    pub s_a: Vector,
    pub s: Vector,
    pub u: Vector,
    pub x_next: Vector,
    pub z_next: Vector,
}

/// The refined controller's law written over `(x, z)`:
///
/// ```text
/// lift_left x(t+1) = x_gain x(t) + z_gain z(t)
/// u(t)             = u_x x(t) + u_z z(t)
/// z(t+1)           = Kz z(t)
/// ```
#[derive(Debug, Clone, PartialEq)]
pub struct DescriptorForm {
    pub lift_left: Matrix,
    pub x_gain: Matrix,
    pub z_gain: Matrix,
    pub u_x: Matrix,
    pub u_z: Matrix,
}

/// Executable refined controller for the concrete plant.
#[derive(Debug, Clone, PartialEq)]
pub struct RefinedController {
    kz: Matrix,
    p: Matrix,
    interface: InterfaceMap,
    bd: Matrix,
    ad: Matrix,
    cu: Matrix,
    du: Matrix,
    h: LinearStateMap,
}

impl RefinedController {
    #[allow(clippy::too_many_arguments)]
    pub fn new(
        kz: Matrix,
        p: Matrix,
        interface: InterfaceMap,
        bd: Matrix,
        ad: Matrix,
        cu: Matrix,
        du: Matrix,
        h: LinearStateMap,
    ) -> Result<Self> {
        let na = kz.nrows();
        let n = ad.nrows();
        let ps = bd.ncols();
        let ps_a = p.nrows();
        let ok = kz.ncols() == na
            && p.ncols() == na
            && interface.g().nrows() == ps
            && interface.drift().shape() == (na, n)
            && interface.bda().shape() == (na, ps_a)
            && ad.ncols() == n
            && bd.nrows() == n
            && cu.ncols() == n
            && du.shape() == (cu.nrows(), ps)
            && h.h().shape() == (na, n);
        if !ok {
            return Err(Error::DimensionMismatch(format!(
                "refined controller parts: Kz {:?}, P {:?}, G {:?}, drift {:?}, Bda {:?}, \
                 Bd {:?}, Ad {:?}, Cu {:?}, Du {:?}, H {:?}",
                kz.shape(),
                p.shape(),
                interface.g().shape(),
                interface.drift().shape(),
                interface.bda().shape(),
                bd.shape(),
                ad.shape(),
                cu.shape(),
                du.shape(),
                h.h().shape()
            )));
        }
        Ok(RefinedController {
            kz,
            p,
            interface,
            bd,
            ad,
            cu,
            du,
            h,
        })
    }

    pub fn kz(&self) -> &Matrix {
        &self.kz
    }
    pub fn schedule(&self) -> &Matrix {
        &self.p
    }
    pub fn interface(&self) -> &InterfaceMap {
        &self.interface
    }
    pub fn bd(&self) -> &Matrix {
        &self.bd
    }
    pub fn ad(&self) -> &Matrix {
        &self.ad
    }
    pub fn cu(&self) -> &Matrix {
        &self.cu
    }
    pub fn du(&self) -> &Matrix {
        &self.du
    }
    pub fn relation(&self) -> &LinearStateMap {
        &self.h
    }

    /// Plant state dimension.
    pub fn n(&self) -> usize {
        self.ad.nrows()
    }
    /// Plant input dimension.
    pub fn p(&self) -> usize {
        self.cu.nrows()
    }
    /// Internal state dimension.
    pub fn z_dim(&self) -> usize {
        self.kz.nrows()
    }

    /// `B_d^T`, the left factor of the lifting constraint.
    pub fn lift_left(&self) -> Matrix {
        self.bd.transpose()
    }

    /// `(B_d^T A_d, B_d^T B_d)`.
    pub fn lift_dyn(&self) -> (Matrix, Matrix) {
        let bt = self.bd.transpose();
        (&bt * &self.ad, &bt * &self.bd)
    }

    pub fn initial_internal_state(&self, x0: &Vector) -> Vector {
        self.h.h() * x0
    }

    pub fn step(&self, x: &Vector, z: &Vector) -> RefinedStep {
        let s_a = &self.p * z;
        let s = self.interface.driving_input(x, &s_a);
        let x_next = &self.ad * x + &self.bd * &s;
        let u = &self.cu * x + &self.du * &s;
        let z_next = &self.kz * z;
        RefinedStep {
            s_a,
            s,
            u,
            x_next,
            z_next,
        }
    }

    /// Gain of `s` on `z`: `G B_da P`.
    fn z_to_s(&self) -> Matrix {
        self.interface.input_gain() * &self.p
    }

    pub fn descriptor_form(&self) -> DescriptorForm {
        let (btad, btbd) = self.lift_dyn();
        let sx = self.interface.state_gain();
        let sz = self.z_to_s();
        DescriptorForm {
            lift_left: self.lift_left(),
            x_gain: btad + &btbd * &sx,
            z_gain: &btbd * &sz,
            u_x: &self.cu + &self.du * &sx,
            u_z: &self.du * &sz,
        }
    }

    /// Step equations of the plant interconnected with this controller.
    ///
    /// Unknowns are `(x+, u, s, z+)`, knowns `(x, z)`; rows are the plant, the
    /// lifting constraint, the input law, the interface and the internal copy.
    pub fn composed_step_system(&self, sys: &DescriptorSystem) -> Result<(Matrix, Matrix)> {
        let (n, p) = (self.n(), self.p());
        if sys.n() != n || sys.p() != p {
            return Err(Error::DimensionMismatch(format!(
                "controller for (n, p) = ({n}, {p}) against plant ({}, {})",
                sys.n(),
                sys.p()
            )));
        }
        let ps = self.bd.ncols();
        let na = self.z_dim();
        let unknowns = n + p + ps + na;
        let knowns = n + na;
        let rows = n + ps + p + ps + na;
        let mut lhs = Matrix::zeros(rows, unknowns);
        let mut rhs = Matrix::zeros(rows, knowns);
        let (btad, btbd) = self.lift_dyn();

        let mut r = 0;
        lhs.view_mut((r, 0), (n, n)).copy_from(sys.e());
        lhs.view_mut((r, n), (n, p)).copy_from(&(-sys.b()));
        rhs.view_mut((r, 0), (n, n)).copy_from(sys.a());
        r += n;
        lhs.view_mut((r, 0), (ps, n)).copy_from(&self.lift_left());
        lhs.view_mut((r, n + p), (ps, ps)).copy_from(&(-btbd));
        rhs.view_mut((r, 0), (ps, n)).copy_from(&btad);
        r += ps;
        lhs.view_mut((r, n), (p, p))
            .copy_from(&Matrix::identity(p, p));
        lhs.view_mut((r, n + p), (p, ps)).copy_from(&(-&self.du));
        rhs.view_mut((r, 0), (p, n)).copy_from(&self.cu);
        r += p;
        lhs.view_mut((r, n + p), (ps, ps))
            .copy_from(&Matrix::identity(ps, ps));
        rhs.view_mut((r, 0), (ps, n))
            .copy_from(&self.interface.state_gain());
        rhs.view_mut((r, n), (ps, na)).copy_from(&self.z_to_s());
        r += ps;
        lhs.view_mut((r, n + p + ps), (na, na))
            .copy_from(&Matrix::identity(na, na));
        rhs.view_mut((r, n), (na, na)).copy_from(&self.kz);
        Ok((lhs, rhs))
    }
}

/// Evidence produced when a refined controller is accepted.
#[derive(Debug, Clone, PartialEq)]
pub struct RefinementCertificate {
    /// Rank test of the composed step equations over all `(x, z)`.
    pub composed: WellPosednessReport,
    /// Horizon of the output comparison, `n + n_a`.
    pub horizon: usize,
    /// Worst output deviation from the abstract closed loop, over runs
    /// started at the unit vectors of the concrete state space.
    pub max_output_dev: f64,
    pub max_relation_dev: f64,
}

/// Certifies a refined controller against the abstract closed loop.
///
/// Well-posedness comes from a rank test on the composed step equations. The
/// output check runs both closed loops from every unit vector `e_i`; by
/// linearity this covers every `x0`, and since the joint state `(x, z)` has
/// dimension `n + n_a`, agreement over that many steps implies agreement for
/// all time.
pub fn certify(
    conc: &DescriptorSystem,
    abs: &DescriptorSystem,
    ctrl_a: &Controller,
    rc: &RefinedController,
    tol: &Tolerance,
) -> Result<RefinementCertificate> {
    let (lhs, rhs) = rc.composed_step_system(conc)?;
    let composed = stacked_wellposedness(&lhs, &rhs, tol);
    if let Some(condition) = composed.failing_condition() {
        return Err(Error::NotWellPosed { condition });
    }
    let n = conc.n();
    let horizon = n + rc.z_dim();
    let bound = 10.0 * tol.residual_atol;
    let mut max_output_dev = 0.0_f64;
    let mut max_relation_dev = 0.0_f64;
    for i in 0..n {
        let mut x0 = Vector::zeros(n);
        x0[i] = 1.0;
        let (refined, z) = run_refined(conc, rc, &x0, horizon)?;
        let za0 = rc.initial_internal_state(&x0);
        let reference = run_closed_loop(abs, ctrl_a, &za0, horizon, tol)?;
        let report = compare_outputs(&refined, &reference, bound)?.with_relation(
            rc.relation().h(),
            &refined.x,
            &z,
        )?;
        max_output_dev = max_output_dev.max(report.max_output_dev);
        max_relation_dev = max_relation_dev.max(report.max_relation_dev);
    }
    if max_output_dev > bound || max_relation_dev > bound {
        return Err(Error::Infeasible {
            residual: max_output_dev.max(max_relation_dev),
        });
    }
    Ok(RefinementCertificate {
        composed,
        horizon,
        max_output_dev,
        max_relation_dev,
    })
}

/// Full refinement of `ctrl_a` (well-posed for `abs`) into a controller for
/// `conc`, given a simulation relation `x_a = H x` from `abs` to `conc` that
/// covers the concrete initial set.
///
/// Errors are wrapped in [`Error::Refinement`] naming the failing stage.
pub fn refine_end_to_end(
    conc: &DescriptorSystem,
    abs: &DescriptorSystem,
    rel: &LinearStateMap,
    ctrl_a: &Controller,
    tol: &Tolerance,
) -> Result<RefinedController> {
    refine_with_certificate(conc, abs, rel, ctrl_a, tol).map(|(rc, _)| rc)
}

/// Like [`refine_end_to_end`], also returning the certificate.
pub fn refine_with_certificate(
    conc: &DescriptorSystem,
    abs: &DescriptorSystem,
    rel: &LinearStateMap,
    ctrl_a: &Controller,
    tol: &Tolerance,
) -> Result<(RefinedController, RefinementCertificate)> {
    let report = check_simulation(abs, conc, rel, tol).map_err(|e| e.at_stage(Stage::Interface))?;
    if !report.verdict {
        let mut failed = Vec::new();
        if !report.output_match {
            failed.push("output map C_a H != C");
        }
        if !report.step_match {
            failed.push("successors cannot be matched");
        }
        if !report.initial_cover {
            failed.push("initial set not covered");
        }
        return Err(Error::RelationRejected(failed.join("; ")).at_stage(Stage::Interface));
    }
    let abs_dv = to_dv(abs, tol).map_err(|e| e.at_stage(Stage::AbstractSchedule))?;
    let conc_dv = to_dv(conc, tol).map_err(|e| e.at_stage(Stage::Lift))?;

    let cl =
        closed_loop_reduce(abs, ctrl_a, tol).map_err(|e| e.at_stage(Stage::AbstractSchedule))?;
    let p =
        abstract_s_schedule(&abs_dv, &cl, tol).map_err(|e| e.at_stage(Stage::AbstractSchedule))?;

    let interface = synthesize_interface(&abs_dv, &conc_dv, rel, tol)
        .map_err(|e| e.at_stage(Stage::Interface))?;

    let rc = RefinedController::new(
        cl.k,
        p,
        interface,
        conc_dv.bd().clone(),
        conc_dv.ad().clone(),
        conc_dv.cu().clone(),
        conc_dv.du().clone(),
        rel.clone(),
    )
    .map_err(|e| e.at_stage(Stage::Lift))?;
    let cert = certify(conc, abs, ctrl_a, &rc, tol).map_err(|e| e.at_stage(Stage::Lift))?;
    Ok((rc, cert))
}

/// `[E; B_d^T]`, which must have full column rank for the lifted plant to
/// reduce to the concrete DV dynamics.
pub fn lift_stack(conc: &DescriptorSystem, conc_dv: &DrivingVariableSystem) -> Matrix {
    vstack(conc.e(), &conc_dv.bd().transpose())
}

/// `[M; N^T]` for a system and its DV form; square and invertible by
/// construction.
pub fn completed_step_matrix(conc: &DescriptorSystem, conc_dv: &DrivingVariableSystem) -> Matrix {
    vstack(&conc.step_matrix(), &conc_dv.kernel().transpose())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::error::WellPosedCondition;
    use crate::numkit::{hstack, rank_of};
    use crate::reference;
    use crate::simulate::{simulate_closed_loop, simulate_refined, step_implicit};
    use crate::systems::{membership_residual, InitialSet};

    fn tol() -> Tolerance {
        Tolerance::default()
    }

    #[test]
    fn reference_closed_loop() {
        let cl = closed_loop_reduce(
            &reference::abstract_plant(),
            &reference::abstract_controller(),
            &tol(),
        )
        .unwrap();
        let (k, l) = reference::abstract_closed_loop();
        assert!(max_abs(&(cl.k - k)) < 1e-12);
        assert!(max_abs(&(cl.l - l)) < 1e-12);
    }

    #[test]
    fn state_feedback_closed_loop() {
        let a = Matrix::from_row_slice(2, 2, &[1.0, 1.0, 0.0, 1.0]);
        let b = Matrix::from_row_slice(2, 1, &[0.0, 1.0]);
        let f = Matrix::from_row_slice(1, 2, &[-0.4, -1.2]);
        let sys = DescriptorSystem::new(
            Matrix::identity(2, 2),
            a.clone(),
            b.clone(),
            Matrix::from_row_slice(1, 2, &[1.0, 0.0]),
            InitialSet::full(2),
        )
        .unwrap();
        // u = F x written as 0 x+ = -F x + u
        let ctrl = Controller::new(Matrix::zeros(1, 2), -&f, Matrix::identity(1, 1)).unwrap();
        let cl = closed_loop_reduce(&sys, &ctrl, &tol()).unwrap();
        assert!(max_abs(&(cl.k - (a + b * &f))) < 1e-12);
        assert!(max_abs(&(cl.l - f)) < 1e-12);
    }

    #[test]
    fn duplicated_plant_rows_are_not_wellposed() {
        let sys = reference::concrete_plant();
        let ctrl = Controller::new(sys.e().clone(), sys.a().clone(), sys.b().clone()).unwrap();
        assert!(matches!(
            closed_loop_reduce(&sys, &ctrl, &tol()),
            Err(Error::NotWellPosed {
                condition: WellPosedCondition::Uniqueness
            })
        ));
    }

    #[test]
    fn reference_schedule() {
        let abs = reference::abstract_plant();
        let dv = to_dv(&abs, &tol()).unwrap();
        let cl = closed_loop_reduce(&abs, &reference::abstract_controller(), &tol()).unwrap();
        let p = abstract_s_schedule(&dv, &cl, &tol()).unwrap();
        let sign = -dv.bd()[(1, 0)];
        let want = Matrix::from_row_slice(1, 2, &[0.5, 0.5]);
        assert!(max_abs(&(p.clone() * sign - want)) < 1e-12);
        // stepping the DV with s_a = P x_a reproduces K
        assert!(max_abs(&(dv.ad() + dv.bd() * &p - &cl.k)) < 1e-12);
    }

    #[test]
    fn schedule_is_empty_for_deterministic_abstraction() {
        let sys = DescriptorSystem::new(
            Matrix::identity(2, 2),
            Matrix::from_row_slice(2, 2, &[0.5, 0.0, 0.0, 0.2]),
            Matrix::zeros(2, 0),
            Matrix::identity(2, 2),
            InitialSet::full(2),
        )
        .unwrap();
        let dv = to_dv(&sys, &tol()).unwrap();
        let cl = closed_loop_reduce(&sys, &Controller::empty(2, 0), &tol()).unwrap();
        let p = abstract_s_schedule(&dv, &cl, &tol()).unwrap();
        assert_eq!(p.shape(), (0, 2));
    }

    #[test]
    fn reference_refinement_matches_hand_controller() {
        let rc = refine_end_to_end(
            &reference::concrete_plant(),
            &reference::abstract_plant(),
            &reference::relation(),
            &reference::abstract_controller(),
            &tol(),
        )
        .unwrap();
        let form = rc.descriptor_form();
        // hand-derived law: [0 -1 0] x+ = [0 -1 1] x + [0.5 0.5] x_a, u = [0 0 -1] x
        let ours = hstack(&hstack(&form.lift_left, &form.x_gain), &form.z_gain);
        let hand = Matrix::from_row_slice(1, 8, &[0.0, -1.0, 0.0, 0.0, -1.0, 1.0, 0.5, 0.5]);
        let same = max_abs(&(&ours - &hand)) < 1e-12 || max_abs(&(&ours + &hand)) < 1e-12;
        assert!(
            same,
            "descriptor form {ours} differs from {hand} beyond sign"
        );
        assert!(max_abs(&(form.u_x - Matrix::from_row_slice(1, 3, &[0.0, 0.0, -1.0]))) < 1e-12);
        assert!(max_abs(&form.u_z) < 1e-12);
    }

    #[test]
    fn composed_step_matches_substituted_closed_loop() {
        let conc = reference::concrete_plant();
        let rc = refine_end_to_end(
            &conc,
            &reference::abstract_plant(),
            &reference::relation(),
            &reference::abstract_controller(),
            &tol(),
        )
        .unwrap();
        let (lhs, rhs) = rc.composed_step_system(&conc).unwrap();
        let x = Vector::from_vec(vec![1.0, 1.0, 1.0]);
        let z = rc.initial_internal_state(&x);
        let known = crate::numkit::vstack_vec(&x, &z);
        let step = step_implicit(&lhs, &(rhs * known), 3, &tol()).unwrap();
        let want = reference::concrete_closed_loop() * &x;
        assert!((step.x_next - want).amax() < 1e-12);
    }

    #[test]
    fn refined_run_matches_abstract_run() {
        let conc = reference::concrete_plant();
        let abs = reference::abstract_plant();
        let ctrl = reference::abstract_controller();
        let rc = refine_end_to_end(&conc, &abs, &reference::relation(), &ctrl, &tol()).unwrap();
        let x0 = Vector::from_vec(vec![1.0, 1.0, 1.0]);
        let (traj, z) = simulate_refined(&conc, &rc, &x0, 30, &tol()).unwrap();
        assert_eq!(z[0], Vector::from_vec(vec![1.0, 0.0]));
        let abs_traj = simulate_closed_loop(&abs, &ctrl, &z[0], 30, &tol()).unwrap();
        let report = compare_outputs(&traj, &abs_traj, 1e-8).unwrap();
        assert!(report.pass, "{report:?}");
        assert!(membership_residual(&conc, &traj).unwrap() <= 1e-9);

        let (zero, _) = simulate_refined(&conc, &rc, &Vector::zeros(3), 10, &tol()).unwrap();
        assert!(zero
            .x
            .iter()
            .chain(&zero.u)
            .chain(&zero.y)
            .all(|v| v.amax() == 0.0));
    }

    #[test]
    fn identity_refinement_reproduces_closed_loop() {
        let abs = reference::abstract_plant();
        let ctrl = reference::abstract_controller();
        let rc =
            refine_end_to_end(&abs, &abs, &LinearStateMap::identity(2), &ctrl, &tol()).unwrap();
        let x0 = Vector::from_vec(vec![0.3, -0.8]);
        let (traj, _) = simulate_refined(&abs, &rc, &x0, 25, &tol()).unwrap();
        let orig = simulate_closed_loop(&abs, &ctrl, &x0, 25, &tol()).unwrap();
        assert!(compare_outputs(&traj, &orig, 1e-10).unwrap().pass);
    }

    #[test]
    fn perturbed_relation_rejected_at_interface_stage() {
        let mut h = reference::relation().h().clone();
        h[(1, 1)] = 0.9;
        let err = refine_end_to_end(
            &reference::concrete_plant(),
            &reference::abstract_plant(),
            &LinearStateMap::new(h),
            &reference::abstract_controller(),
            &tol(),
        )
        .unwrap_err();
        match err {
            Error::Refinement { stage, source } => {
                assert_eq!(stage, Stage::Interface);
                assert!(matches!(*source, Error::RelationRejected(_)));
            }
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn non_wellposed_abstract_controller_rejected() {
        let err = refine_end_to_end(
            &reference::concrete_plant(),
            &reference::abstract_plant(),
            &reference::relation(),
            &Controller::empty(2, 1),
            &tol(),
        )
        .unwrap_err();
        assert!(matches!(
            err,
            Error::Refinement {
                stage: Stage::AbstractSchedule,
                ..
            }
        ));
        assert!(matches!(err.root(), Error::NotWellPosed { .. }));
    }

    #[test]
    fn lift_stack_has_full_column_rank() {
        let conc = reference::concrete_plant();
        let dv = to_dv(&conc, &tol()).unwrap();
        assert_eq!(rank_of(&lift_stack(&conc, &dv), &tol()), 3);
        let sq = completed_step_matrix(&conc, &dv);
        assert_eq!(sq.shape(), (4, 4));
        assert_eq!(rank_of(&sq, &tol()), 4);
    }

    #[test]
    fn certificate_reports_composed_ranks() {
        let (_, cert) = refine_with_certificate(
            &reference::concrete_plant(),
            &reference::abstract_plant(),
            &reference::relation(),
            &reference::abstract_controller(),
            &tol(),
        )
        .unwrap();
        assert!(cert.composed.verdict);
        assert_eq!(cert.composed.unknowns, 3 + 1 + 1 + 2);
        assert_eq!(cert.horizon, 5);
        assert!(cert.max_output_dev <= 1e-8);
    }

    #[test]
    fn box_start_outside_set_is_rejected() {
        let conc = reference::concrete_plant();
        let rc = refine_end_to_end(
            &conc,
            &reference::abstract_plant(),
            &reference::relation(),
            &reference::abstract_controller(),
            &tol(),
        )
        .unwrap();
        let x0 = Vector::from_vec(vec![2.0, 0.0, 0.0]);
        assert!(matches!(
            simulate_refined(&conc, &rc, &x0, 3, &tol()),
            Err(Error::InitialStateOutsideSet)
        ));
    }
}

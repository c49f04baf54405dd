//! Simulation relations given as graphs of linear maps, `x_a = H x`.
//!
//! For such a graph relation from an abstract system to a concrete one, the
//! simulation conditions reduce to linear-algebra identities on the DV forms:
//!
//! * outputs agree on the relation: `C_a H = C`;
//! * every abstract successor `A_da H x + B_da s_a` is matched by some concrete
//!   successor `A_d x + B_d s` with `H (A_d x + B_d s) = A_da H x + B_da s_a`,
//!   i.e. the columns of `A_da H - H A_d` and of `B_da` lie in `im (H B_d)`.

use crate::dvtransform::{to_dv, DrivingVariableSystem};
use crate::error::{Error, Result};
use crate::numkit::{
    image_contained, max_abs, max_abs_vec, min_norm_solve, pseudo_inverse, range_onb, rank_of,
    Matrix, Tolerance, Vector,
};
use crate::systems::{DescriptorSystem, InitialSet};

/// The map `H` of the relation `{(x_a, x) : x_a = H x}`.
#[derive(Debug, Clone, PartialEq)]
pub struct LinearStateMap {
    h: Matrix,
}

impl LinearStateMap {
    pub fn new(h: Matrix) -> Self {
        LinearStateMap { h }
    }

    pub fn identity(n: usize) -> Self {
        LinearStateMap {
            h: Matrix::identity(n, n),
        }
    }

    pub fn h(&self) -> &Matrix {
        &self.h
    }

    pub fn abstract_dim(&self) -> usize {
        self.h.nrows()
    }

    pub fn concrete_dim(&self) -> usize {
        self.h.ncols()
    }

    /// Relation obtained by chaining `self` (from 1 to 2) with `next` (2 to 3).
    pub fn compose(&self, next: &LinearStateMap) -> LinearStateMap {
        LinearStateMap::new(&self.h * &next.h)
    }

    fn check(&self, abstract_n: usize, concrete_n: usize) -> Result<()> {
        if self.h.shape() != (abstract_n, concrete_n) {
            return Err(Error::DimensionMismatch(format!(
                "H is {:?}, expected ({abstract_n}, {concrete_n})",
                self.h.shape()
            )));
        }
        Ok(())
    }
}

/// A concrete state and abstract driving input whose abstract successor cannot
/// be matched from `x`, with the unavoidable residual.
#[derive(Debug, Clone, PartialEq)]
pub struct StepWitness {
    pub x: Vector,
    pub s_a: Vector,
    pub residual: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SimulationReport {
    pub output_match: bool,
    pub step_match: bool,
    /// `A_da H - H A_d`.
    pub drift: Matrix,
    pub initial_cover: bool,
    pub verdict: bool,
    /// Present when `step_match` is false.
    pub witness: Option<StepWitness>,
}

/// Checks that `rel` is a simulation relation from `abs` to `conc` and that it
/// covers the concrete initial set.
pub fn check_simulation(
    abs: &DescriptorSystem,
    conc: &DescriptorSystem,
    rel: &LinearStateMap,
    tol: &Tolerance,
) -> Result<SimulationReport> {
    if abs.k() != conc.k() {
        return Err(Error::DimensionMismatch(format!(
            "output dimensions differ: abstract {} vs concrete {}",
            abs.k(),
            conc.k()
        )));
    }
    rel.check(abs.n(), conc.n())?;
    let abs_dv = to_dv(abs, tol)?;
    let conc_dv = to_dv(conc, tol)?;

    let output_match = max_abs(&(abs.c() * rel.h() - conc.c())) <= tol.residual_atol;
    let drift = drift(&abs_dv, &conc_dv, rel);
    let hb = rel.h() * conc_dv.bd();
    let step_match = image_contained(&drift, &hb, tol) && image_contained(abs_dv.bd(), &hb, tol);
    let witness = if step_match {
        None
    } else {
        step_witness(&abs_dv, &conc_dv, rel, tol)
    };
    let initial_cover = check_initial_cover(abs.init(), conc.init(), rel, tol)?;
    Ok(SimulationReport {
        output_match,
        step_match,
        drift,
        initial_cover,
        verdict: output_match && step_match && initial_cover,
        witness,
    })
}

fn drift(
    abs_dv: &DrivingVariableSystem,
    conc_dv: &DrivingVariableSystem,
    rel: &LinearStateMap,
) -> Matrix {
    abs_dv.ad() * rel.h() - rel.h() * conc_dv.ad()
}

/// Finds the coordinate direction of `x` or `s_a` that leaves `im (H B_d)`
/// the most, if any leaves it by more than `residual_atol`.
pub fn step_witness(
    abs_dv: &DrivingVariableSystem,
    conc_dv: &DrivingVariableSystem,
    rel: &LinearStateMap,
    tol: &Tolerance,
) -> Option<StepWitness> {
    let hb = rel.h() * conc_dv.bd();
    let q = range_onb(&hb, tol);
    let project_out = |v: Vector| -> f64 {
        let r = &v - &q * (q.transpose() * &v);
        max_abs_vec(&r)
    };
    let d = drift(abs_dv, conc_dv, rel);
    let mut best: Option<StepWitness> = None;
    let n = rel.concrete_dim();
    let ps_a = abs_dv.ps();
    for j in 0..n {
        let residual = project_out(d.column(j).into_owned());
        if best.as_ref().is_none_or(|b| residual > b.residual) {
            let mut x = Vector::zeros(n);
            x[j] = 1.0;
            best = Some(StepWitness {
                x,
                s_a: Vector::zeros(ps_a),
                residual,
            });
        }
    }
    for j in 0..ps_a {
        let residual = project_out(abs_dv.bd().column(j).into_owned());
        if best.as_ref().is_none_or(|b| residual > b.residual) {
            let mut s_a = Vector::zeros(ps_a);
            s_a[j] = 1.0;
            best = Some(StepWitness {
                x: Vector::zeros(n),
                s_a,
                residual,
            });
        }
    }
    best.filter(|w| w.residual > tol.residual_atol)
}

fn as_column(v: &Vector) -> Matrix {
    Matrix::from_column_slice(v.len(), 1, v.as_slice())
}

/// `H X_0 ⊆ X_a0`: every concrete initial state has a related abstract one.
///
/// Decided exactly per pair of set kinds. A box maps to a zonotope whose
/// coordinate ranges are `H c ± |H| r` (center `c`, radius `r`), so box-in-box
/// containment is an interval test. Box into subspace is not supported.
pub fn check_initial_cover(
    abs_init: &InitialSet,
    conc_init: &InitialSet,
    rel: &LinearStateMap,
    tol: &Tolerance,
) -> Result<bool> {
    rel.check(abs_init.dim(), conc_init.dim())?;
    let h = rel.h();
    let atol = tol.residual_atol;
    if let InitialSet::FullSpace { .. } = abs_init {
        return Ok(true);
    }
    if let InitialSet::Points { points, .. } = conc_init {
        return Ok(points.iter().all(|p| abs_init.contains(&(h * p), tol)));
    }
    // Remaining concrete sets are infinite: full space, subspaces and boxes.
    // Write each as an offset plus the span of generators.
    let (offset, gens) = match conc_init {
        InitialSet::FullSpace { dim } => (Vector::zeros(*dim), Matrix::identity(*dim, *dim)),
        InitialSet::SubspaceSpan { basis } => (Vector::zeros(basis.nrows()), basis.clone()),
        InitialSet::Box { lower, upper } => ((lower + upper) / 2.0, Matrix::zeros(0, 0)),
        InitialSet::Points { .. } => unreachable!(),
    };
    match (abs_init, conc_init) {
        (
            InitialSet::Box {
                lower: la,
                upper: ua,
            },
            InitialSet::Box { lower, upper },
        ) => {
            let radius = (upper - lower) / 2.0;
            let center = h * &offset;
            let spread = h.abs() * radius;
            Ok((0..h.nrows()).all(|i| {
                center[i] - spread[i] >= la[i] - atol && center[i] + spread[i] <= ua[i] + atol
            }))
        }
        (InitialSet::SubspaceSpan { .. }, InitialSet::Box { .. }) => {
            Err(Error::UnsupportedCombination(
                "box concrete initial set against a subspace abstract initial set".into(),
            ))
        }
        (InitialSet::Points { .. }, InitialSet::Box { lower, upper }) => {
            // the image is a single point only if H kills every box direction
            let radius = (upper - lower) / 2.0;
            let flat = max_abs_vec(&(h.abs() * radius)) <= atol;
            Ok(flat && abs_init.contains(&(h * &offset), tol))
        }
        (InitialSet::SubspaceSpan { basis: ba }, _) => Ok(image_contained(&(h * &gens), ba, tol)),
        (InitialSet::Box { .. } | InitialSet::Points { .. }, _) => {
            // a nonzero linear image is unbounded; only {0} can fit
            let image = h * &gens;
            Ok(max_abs(&image) <= atol && abs_init.contains(&Vector::zeros(h.nrows()), tol))
        }
        (InitialSet::FullSpace { .. }, _) => unreachable!(),
    }
}

/// `X_a0 ⊆ H X_0`: every abstract initial state has a related concrete one.
///
/// Exact when `X_0` is the full space, a subspace, or a finite point set;
/// boxes are not supported.
pub fn check_init_simulated(
    abs_init: &InitialSet,
    conc_init: &InitialSet,
    rel: &LinearStateMap,
    tol: &Tolerance,
) -> Result<bool> {
    rel.check(abs_init.dim(), conc_init.dim())?;
    let h = rel.h();
    let atol = tol.residual_atol;
    let image = match conc_init {
        InitialSet::Box { .. } => {
            return Err(Error::UnsupportedCombination(
                "box concrete initial set has no exact preimage test".into(),
            ))
        }
        InitialSet::Points { points, .. } => {
            let images: Vec<Vector> = points.iter().map(|p| h * p).collect();
            let hit = |q: &Vector| images.iter().any(|i| max_abs_vec(&(i - q)) <= atol);
            return Ok(match abs_init {
                InitialSet::Points { points: qs, .. } => qs.iter().all(hit),
                InitialSet::FullSpace { .. } => false,
                InitialSet::SubspaceSpan { basis } => {
                    max_abs(basis) <= atol && hit(&Vector::zeros(h.nrows()))
                }
                InitialSet::Box { lower, upper } => {
                    max_abs_vec(&(upper - lower)) <= atol && hit(lower)
                }
            });
        }
        InitialSet::FullSpace { .. } => h.clone(),
        InitialSet::SubspaceSpan { basis } => h * basis,
    };
    Ok(match abs_init {
        InitialSet::FullSpace { dim } => rank_of(&image, tol) == *dim,
        InitialSet::SubspaceSpan { basis } => image_contained(basis, &image, tol),
        InitialSet::Points { points, .. } => points
            .iter()
            .all(|p| min_norm_solve(&image, &as_column(p), tol).1),
        InitialSet::Box { lower, upper } => {
            // affine hull of the box: its center plus the non-degenerate axes
            let center = (lower + upper) / 2.0;
            let axes: Vec<usize> = (0..lower.len())
                .filter(|&i| upper[i] - lower[i] > atol)
                .collect();
            let dirs = Matrix::from_fn(lower.len(), axes.len(), |r, c| {
                if r == axes[c] {
                    1.0
                } else {
                    0.0
                }
            });
            min_norm_solve(&image, &as_column(&center), tol).1
                && image_contained(&dirs, &image, tol)
        }
    })
}

/// Static interface between two DV systems related by `H`.
///
/// The concrete driving input is `s = G (drift x + B_da s_a)`, which keeps
/// `H x+ = A_da H x + B_da s_a` whenever `x_a = H x`.
#[derive(Debug, Clone, PartialEq)]
pub struct InterfaceMap {
    g: Matrix,
    drift: Matrix,
    bda: Matrix,
}

impl InterfaceMap {
    pub fn new(g: Matrix, drift: Matrix, bda: Matrix) -> Result<Self> {
        if g.ncols() != drift.nrows() || drift.nrows() != bda.nrows() {
            return Err(Error::DimensionMismatch(format!(
                "G {:?}, drift {:?}, Bda {:?}",
                g.shape(),
                drift.shape(),
                bda.shape()
            )));
        }
        Ok(InterfaceMap { g, drift, bda })
    }

    pub fn g(&self) -> &Matrix {
        &self.g
    }
    pub fn drift(&self) -> &Matrix {
        &self.drift
    }
    pub fn bda(&self) -> &Matrix {
        &self.bda
    }

    /// Concrete driving input for concrete state `x` and abstract input `s_a`.
    pub fn driving_input(&self, x: &Vector, s_a: &Vector) -> Vector {
        &self.g * (&self.drift * x + &self.bda * s_a)
    }

    /// Coefficient of `x` in `s`.
    pub fn state_gain(&self) -> Matrix {
        &self.g * &self.drift
    }

    /// Coefficient of `s_a` in `s`.
    pub fn input_gain(&self) -> Matrix {
        &self.g * &self.bda
    }
}

/// Builds the minimum-norm interface and certifies it on a basis of inputs.
pub fn synthesize_interface(
    abs_dv: &DrivingVariableSystem,
    conc_dv: &DrivingVariableSystem,
    rel: &LinearStateMap,
    tol: &Tolerance,
) -> Result<InterfaceMap> {
    rel.check(abs_dv.n(), conc_dv.n())?;
    let hb = rel.h() * conc_dv.bd();
    let d = drift(abs_dv, conc_dv, rel);
    let (g, _) = pseudo_inverse(&hb, tol);
    let residual =
        max_abs(&(&hb * &g * &d - &d)).max(max_abs(&(&hb * &g * abs_dv.bd() - abs_dv.bd())));
    if residual > tol.residual_atol {
        return Err(Error::Infeasible { residual });
    }
    InterfaceMap::new(g, d, abs_dv.bd().clone())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::reference;

    fn tol() -> Tolerance {
        Tolerance::default()
    }

    fn perturbed_relation() -> LinearStateMap {
        let mut h = reference::relation().h().clone();
        h[(1, 1)] = 0.9;
        LinearStateMap::new(h)
    }

    #[test]
    fn reference_relation_is_accepted() {
        let r = check_simulation(
            &reference::abstract_plant(),
            &reference::concrete_plant(),
            &reference::relation(),
            &tol(),
        )
        .unwrap();
        assert!(r.output_match && r.step_match && r.initial_cover && r.verdict);
        assert!(r.witness.is_none());
        let want = Matrix::from_row_slice(2, 3, &[0.0, 0.0, 0.0, 0.0, 1.0, -1.0]);
        assert!(max_abs(&(r.drift - want)) < 1e-12);
    }

    #[test]
    fn identity_relation_on_itself() {
        let sys = reference::concrete_plant();
        let r = check_simulation(&sys, &sys, &LinearStateMap::identity(3), &tol()).unwrap();
        assert!(r.verdict);
    }

    #[test]
    fn perturbed_relation_is_rejected_with_witness() {
        let r = check_simulation(
            &reference::abstract_plant(),
            &reference::concrete_plant(),
            &perturbed_relation(),
            &tol(),
        )
        .unwrap();
        assert!(!r.step_match);
        assert!(!r.output_match);
        assert!(!r.verdict);
        let w = r.witness.expect("witness");
        // the x2 direction drifts by 0.1 out of im(H Bd)
        assert_eq!(w.x, Vector::from_vec(vec![0.0, 1.0, 0.0]));
        assert!((w.residual - 0.1).abs() < 1e-12);
    }

    #[test]
    fn output_dimension_mismatch() {
        let abs = reference::abstract_plant();
        let conc = DescriptorSystem::new(
            Matrix::identity(3, 3),
            Matrix::identity(3, 3),
            Matrix::zeros(3, 1),
            Matrix::identity(3, 3),
            InitialSet::full(3),
        )
        .unwrap();
        assert!(matches!(
            check_simulation(&abs, &conc, &reference::relation(), &tol()),
            Err(Error::DimensionMismatch(_))
        ));
    }

    #[test]
    fn cover_examples() {
        let h = reference::relation();
        let cube = InitialSet::cube(3, 1.0);
        assert!(check_initial_cover(&InitialSet::full(2), &cube, &h, &tol()).unwrap());
        let origin3 = InitialSet::points(3, vec![Vector::zeros(3)]).unwrap();
        let small = InitialSet::cube(2, 0.5);
        assert!(check_initial_cover(&small, &origin3, &h, &tol()).unwrap());
        assert!(!check_initial_cover(&small, &cube, &h, &tol()).unwrap());
        // row 2 of H ranges over [-2, 2] on the cube
        assert!(check_initial_cover(&InitialSet::cube(2, 2.0), &cube, &h, &tol()).unwrap());
        let line = InitialSet::subspace(Matrix::from_row_slice(2, 1, &[1.0, 0.0])).unwrap();
        assert!(matches!(
            check_initial_cover(&line, &cube, &h, &tol()),
            Err(Error::UnsupportedCombination(_))
        ));
    }

    #[test]
    fn cover_subspace_pairs() {
        let h = reference::relation();
        let e1 = InitialSet::subspace(Matrix::from_row_slice(3, 1, &[1.0, 0.0, 0.0])).unwrap();
        let zero_line = InitialSet::subspace(Matrix::from_row_slice(2, 1, &[1.0, 0.0])).unwrap();
        // H e1 = 0, so the image is {0}
        assert!(check_initial_cover(&zero_line, &e1, &h, &tol()).unwrap());
        assert!(!check_initial_cover(&zero_line, &InitialSet::full(3), &h, &tol()).unwrap());
        assert!(check_initial_cover(&InitialSet::cube(2, 1.0), &e1, &h, &tol()).unwrap());
    }

    #[test]
    fn init_simulated_examples() {
        let h = reference::relation();
        assert!(
            check_init_simulated(&InitialSet::full(2), &InitialSet::full(3), &h, &tol()).unwrap()
        );
        let o2 = InitialSet::points(2, vec![Vector::zeros(2)]).unwrap();
        let o3 = InitialSet::points(3, vec![Vector::zeros(3)]).unwrap();
        assert!(check_init_simulated(&o2, &o3, &h, &tol()).unwrap());
        let e1 = InitialSet::subspace(Matrix::from_row_slice(3, 1, &[1.0, 0.0, 0.0])).unwrap();
        assert!(!check_init_simulated(&InitialSet::full(2), &e1, &h, &tol()).unwrap());
        assert!(matches!(
            check_init_simulated(&InitialSet::full(2), &InitialSet::cube(3, 1.0), &h, &tol()),
            Err(Error::UnsupportedCombination(_))
        ));
        let abs_box = InitialSet::cube(2, 1.0);
        assert!(check_init_simulated(&abs_box, &InitialSet::full(3), &h, &tol()).unwrap());
    }

    #[test]
    fn reference_interface() {
        let abs_dv = to_dv(&reference::abstract_plant(), &tol()).unwrap();
        let conc_dv = to_dv(&reference::concrete_plant(), &tol()).unwrap();
        let iface =
            synthesize_interface(&abs_dv, &conc_dv, &reference::relation(), &tol()).unwrap();
        // convert to the hand orientation, where Bd = -e2 and Bda = -e2
        let sigma = -conc_dv.bd()[(1, 0)];
        let sigma_a = -abs_dv.bd()[(1, 0)];
        let state = iface.state_gain() * sigma;
        let input = iface.input_gain()[(0, 0)] * sigma * sigma_a;
        let want = reference::hand_interface_row();
        assert!((state.row(0).transpose() - want).amax() < 1e-12);
        assert!((input - 1.0).abs() < 1e-12);
    }

    #[test]
    fn identity_interface_passes_input_through() {
        let dv = to_dv(&reference::concrete_plant(), &tol()).unwrap();
        let iface = synthesize_interface(&dv, &dv, &LinearStateMap::identity(3), &tol()).unwrap();
        assert!(max_abs(&iface.state_gain()) < 1e-12);
        assert!((iface.input_gain() - Matrix::identity(1, 1)).amax() < 1e-12);
    }

    #[test]
    fn perturbed_interface_is_infeasible() {
        let abs_dv = to_dv(&reference::abstract_plant(), &tol()).unwrap();
        let conc_dv = to_dv(&reference::concrete_plant(), &tol()).unwrap();
        assert!(matches!(
            synthesize_interface(&abs_dv, &conc_dv, &perturbed_relation(), &tol()),
            Err(Error::Infeasible { .. })
        ));
    }
}

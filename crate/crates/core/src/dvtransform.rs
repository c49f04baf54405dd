//! Driving-variable (DV) form of a descriptor system.
//!
//! With `M = [E -B]` of full row rank, every transition `(x, u, x+)` of the
//! descriptor system is `[x+; u] = M+ A x + N s` for a unique `s`, where `M+`
//! is a right inverse of `M` and `N` an orthonormal basis of `ker M`. Splitting
//! the rows of `M+ A` and `N` gives the DV system
//!
//! ```text
//! x(t+1) = Ad x(t) + Bd s(t)
//! u(t)   = Cu x(t) + Du s(t)
//! y(t)   = C x(t)
//! ```
//!
//! which is deterministic once `s` is chosen, and has exactly the same
//! behaviour as the original system.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::numkit::{
    all_finite, kernel_onb, max_abs, max_abs_vec, min_norm_solve, rank_of, right_inverse, vstack,
    vstack_vec, Matrix, Tolerance, Vector,
};
use crate::systems::{membership_residual, validate, DescriptorSystem, InitialSet, Trajectory};

#[derive(Debug, Clone, PartialEq)]
pub struct DrivingVariableSystem {
    ad: Matrix,
    bd: Matrix,
    cu: Matrix,
    du: Matrix,
    c: Matrix,
    init: InitialSet,
}

impl DrivingVariableSystem {
    pub fn new(
        ad: Matrix,
        bd: Matrix,
        cu: Matrix,
        du: Matrix,
        c: Matrix,
        init: InitialSet,
    ) -> Result<Self> {
        let n = ad.nrows();
        let ps = bd.ncols();
        let p = cu.nrows();
        let ok = ad.ncols() == n
            && bd.nrows() == n
            && cu.ncols() == n
            && du.shape() == (p, ps)
            && c.ncols() == n
            && init.dim() == n;
        if !ok {
            return Err(Error::DimensionMismatch(format!(
                "Ad {:?}, Bd {:?}, Cu {:?}, Du {:?}, C {:?}, init dim {}",
                ad.shape(),
                bd.shape(),
                cu.shape(),
                du.shape(),
                c.shape(),
                init.dim()
            )));
        }
        if ![&ad, &bd, &cu, &du, &c].iter().all(|m| all_finite(m)) {
            return Err(Error::InvalidInput("DV matrices must be finite".into()));
        }
        Ok(DrivingVariableSystem {
            ad,
            bd,
            cu,
            du,
            c,
            init,
        })
    }

    pub fn ad(&self) -> &Matrix {
        &self.ad
    }
    pub fn bd(&self) -> &Matrix {
        &self.bd
    }
    pub fn cu(&self) -> &Matrix {
        &self.cu
    }
    pub fn du(&self) -> &Matrix {
        &self.du
    }
    pub fn c(&self) -> &Matrix {
        &self.c
    }
    pub fn init(&self) -> &InitialSet {
        &self.init
    }

    pub fn n(&self) -> usize {
        self.ad.nrows()
    }
    pub fn p(&self) -> usize {
        self.cu.nrows()
    }
    /// Dimension of the driving input `s`.
    pub fn ps(&self) -> usize {
        self.bd.ncols()
    }
    pub fn k(&self) -> usize {
        self.c.nrows()
    }

    /// `[Ad; Cu]`, i.e. `M+ A`.
    pub fn particular(&self) -> Matrix {
        vstack(&self.ad, &self.cu)
    }

    /// `[Bd; Du]`, i.e. `N`.
    pub fn kernel(&self) -> Matrix {
        vstack(&self.bd, &self.du)
    }

    /// One step: returns `(x+, u)`.
    pub fn step(&self, x: &Vector, s: &Vector) -> (Vector, Vector) {
        (&self.ad * x + &self.bd * s, &self.cu * x + &self.du * s)
    }

    /// Runs the DV system from `x0` under the driving sequence `s`.
    pub fn trajectory(&self, x0: &Vector, s: &[Vector]) -> Trajectory {
        let mut x = vec![x0.clone()];
        let mut u = Vec::with_capacity(s.len());
        for st in s {
            let (xn, ut) = self.step(x.last().unwrap(), st);
            x.push(xn);
            u.push(ut);
        }
        let y = x.iter().map(|xi| &self.c * xi).collect();
        Trajectory { u, x, y }
    }
}

/// Builds the DV system of `sys` with the pseudoinverse as right inverse.
pub fn to_dv(sys: &DescriptorSystem, tol: &Tolerance) -> Result<DrivingVariableSystem> {
    let m = sys.step_matrix();
    let rank = rank_of(&m, tol);
    if rank < sys.n() {
        return Err(Error::Assumption1Violated { n: sys.n(), rank });
    }
    let m_plus = right_inverse(&m, tol)?;
    let particular = m_plus * sys.a();
    let kernel = kernel_onb(&m, tol);
    let (n, p) = (sys.n(), sys.p());
    DrivingVariableSystem::new(
        particular.rows(0, n).into_owned(),
        kernel.rows(0, n).into_owned(),
        particular.rows(n, p).into_owned(),
        kernel.rows(n, p).into_owned(),
        sys.c().clone(),
        sys.init().clone(),
    )
}

fn check_dims(sys: &DescriptorSystem, dv: &DrivingVariableSystem) -> Result<()> {
    if dv.n() != sys.n() || dv.p() != sys.p() || dv.k() != sys.k() {
        return Err(Error::DimensionMismatch(format!(
            "DV has (n, p, k) = ({}, {}, {}) but the system has ({}, {}, {})",
            dv.n(),
            dv.p(),
            dv.k(),
            sys.n(),
            sys.p(),
            sys.k()
        )));
    }
    Ok(())
}

/// Whether `dv` parametrises exactly the transitions of `sys`: `M [Ad; Cu] = A`,
/// `M [Bd; Du] = 0`, `[Bd; Du]` orthonormal and as wide as `ker M`.
///
/// Any orthonormal kernel basis is accepted, whatever its sign or ordering.
pub fn check_dv_consistency(
    sys: &DescriptorSystem,
    dv: &DrivingVariableSystem,
    tol: &Tolerance,
) -> Result<bool> {
    check_dims(sys, dv)?;
    let m = sys.step_matrix();
    let atol = tol.residual_atol;
    let kernel = dv.kernel();
    let particular_ok = max_abs(&(&m * dv.particular() - sys.a())) <= atol;
    let annihilated = max_abs(&(&m * &kernel)) <= atol;
    let gram = kernel.transpose() * &kernel;
    let orthonormal = max_abs(&(gram - Matrix::identity(dv.ps(), dv.ps()))) <= atol;
    let full = dv.ps() == m.ncols() - rank_of(&m, tol);
    let same_output = max_abs(&(dv.c() - sys.c())) <= atol;
    Ok(particular_ok && annihilated && orthonormal && full && same_output)
}

/// Recovers the driving input of a descriptor transition:
/// `s = N^T ([x+; u] - [Ad; Cu] x)` with `N = [Bd; Du]`.
///
/// The sign of `s` follows `dv`'s kernel orientation.
pub fn recover_driving_input(
    sys: &DescriptorSystem,
    dv: &DrivingVariableSystem,
    x: &Vector,
    u: &Vector,
    x_next: &Vector,
    tol: &Tolerance,
) -> Result<Vector> {
    check_dims(sys, dv)?;
    if x.len() != sys.n() || x_next.len() != sys.n() || u.len() != sys.p() {
        return Err(Error::DimensionMismatch("transition vectors".into()));
    }
    let residual = max_abs_vec(&(sys.e() * x_next - sys.a() * x - sys.b() * u));
    if residual > tol.residual_atol {
        return Err(Error::NotATransition { residual });
    }
    let w = vstack_vec(x_next, u);
    let kernel = dv.kernel();
    let offset = w - dv.particular() * x;
    let s = kernel.transpose() * &offset;
    let mismatch = max_abs_vec(&(&kernel * &s - offset));
    if mismatch > tol.residual_atol {
        return Err(Error::PreconditionFailed(format!(
            "DV does not reproduce the transition (residual {mismatch:e})"
        )));
    }
    Ok(s)
}

/// Randomised finite-horizon check that `sys` and `dv` have the same
/// transitions.
///
/// Forward: DV trajectories under uniform `s` in `[-1, 1]` must lie in the
/// behaviour of `sys`. Backward: descriptor transitions sampled independently
/// (minimum-norm particular solution plus a random kernel element) must be
/// reproduced by `dv` with the recovered `s`. The algebraic identities of
/// [`check_dv_consistency`] are required up front.
pub fn verify_ds_dv_equivalence(
    sys: &DescriptorSystem,
    dv: &DrivingVariableSystem,
    horizon: usize,
    samples: usize,
    seed: u64,
    tol: &Tolerance,
) -> Result<bool> {
    if !validate(sys, tol).assumption1_ok {
        return Err(Error::PreconditionFailed(
            "[E -B] lacks full row rank".into(),
        ));
    }
    if !check_dv_consistency(sys, dv, tol)? {
        return Err(Error::PreconditionFailed(
            "DV system is not consistent with the descriptor system".into(),
        ));
    }
    if horizon == 0 {
        return Ok(true);
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let m = sys.step_matrix();
    let ker = kernel_onb(&m, tol);
    let uniform = |len: usize, rng: &mut ChaCha8Rng| {
        Vector::from_fn(len, |_, _| rng.random_range(-1.0..=1.0))
    };

    for i in 0..samples {
        let x0 = sys.init().sample(&mut rng, i);

        let s: Vec<Vector> = (0..horizon).map(|_| uniform(dv.ps(), &mut rng)).collect();
        let traj = dv.trajectory(&x0, &s);
        if membership_residual(sys, &traj)? > tol.residual_atol {
            return Ok(false);
        }

        let mut x = x0;
        for _ in 0..horizon {
            let rhs = sys.a() * &x;
            let rhs = Matrix::from_column_slice(rhs.len(), 1, rhs.as_slice());
            let (w, feasible) = min_norm_solve(&m, &rhs, tol);
            if !feasible {
                return Ok(false);
            }
            let w = w.column(0) + &ker * uniform(ker.ncols(), &mut rng);
            let x_next = w.rows(0, sys.n()).into_owned();
            let u = w.rows(sys.n(), sys.p()).into_owned();
            let s = match recover_driving_input(sys, dv, &x, &u, &x_next, tol) {
                Ok(s) => s,
                Err(Error::NotATransition { .. }) | Err(Error::PreconditionFailed(_)) => {
                    return Ok(false)
                }
                Err(e) => return Err(e),
            };
            let (xd, ud) = dv.step(&x, &s);
            if max_abs_vec(&(xd - &x_next)) > tol.residual_atol
                || max_abs_vec(&(ud - &u)) > tol.residual_atol
            {
                return Ok(false);
            }
            x = x_next;
        }
    }
    Ok(true)
}

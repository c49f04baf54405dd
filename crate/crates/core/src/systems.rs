//! Descriptor systems, controllers, initial sets and trajectories.

use rand::Rng;
use rand_distr::StandardNormal;

use crate::error::{Error, Result};
use crate::numkit::{self, all_finite, hstack, max_abs_vec, rank_of, Matrix, Tolerance, Vector};

/// Set of admissible initial states.
#[derive(Debug, Clone, PartialEq)]
pub enum InitialSet {
    FullSpace {
        dim: usize,
    },
    /// Span of the columns of `basis` (`dim` rows).
    SubspaceSpan {
        basis: Matrix,
    },
    /// Axis-aligned box `lower <= x <= upper`.
    Box {
        lower: Vector,
        upper: Vector,
    },
    Points {
        dim: usize,
        points: Vec<Vector>,
    },
}

impl InitialSet {
    pub fn full(dim: usize) -> Self {
        InitialSet::FullSpace { dim }
    }

    pub fn subspace(basis: Matrix) -> Result<Self> {
        let set = InitialSet::SubspaceSpan { basis };
        set.check()?;
        Ok(set)
    }

    pub fn cube(dim: usize, half_width: f64) -> Self {
        InitialSet::Box {
            lower: Vector::from_element(dim, -half_width),
            upper: Vector::from_element(dim, half_width),
        }
    }

    pub fn boxed(lower: Vector, upper: Vector) -> Result<Self> {
        let set = InitialSet::Box { lower, upper };
        set.check()?;
        Ok(set)
    }

    pub fn points(dim: usize, points: Vec<Vector>) -> Result<Self> {
        let set = InitialSet::Points { dim, points };
        set.check()?;
        Ok(set)
    }

    pub fn dim(&self) -> usize {
        match self {
            InitialSet::FullSpace { dim } | InitialSet::Points { dim, .. } => *dim,
            InitialSet::SubspaceSpan { basis } => basis.nrows(),
            InitialSet::Box { lower, .. } => lower.len(),
        }
    }

    pub fn kind(&self) -> &'static str {
        match self {
            InitialSet::FullSpace { .. } => "full",
            InitialSet::SubspaceSpan { .. } => "subspace",
            InitialSet::Box { .. } => "box",
            InitialSet::Points { .. } => "points",
        }
    }

    fn check(&self) -> Result<()> {
        match self {
            InitialSet::FullSpace { .. } => Ok(()),
            InitialSet::SubspaceSpan { basis } => {
                if all_finite(basis) {
                    Ok(())
                } else {
                    Err(Error::InvalidInput(
                        "subspace basis has non-finite entries".into(),
                    ))
                }
            }
            InitialSet::Box { lower, upper } => {
                if lower.len() != upper.len() {
                    return Err(Error::DimensionMismatch(format!(
                        "box bounds have lengths {} and {}",
                        lower.len(),
                        upper.len()
                    )));
                }
                if lower.iter().chain(upper.iter()).any(|v| !v.is_finite()) {
                    return Err(Error::InvalidInput("box bounds must be finite".into()));
                }
                if lower.iter().zip(upper.iter()).any(|(l, u)| l > u) {
                    return Err(Error::InvalidInput("box has lower > upper".into()));
                }
                Ok(())
            }
            InitialSet::Points { dim, points } => {
                if let Some(p) = points.iter().find(|p| p.len() != *dim) {
                    return Err(Error::DimensionMismatch(format!(
                        "point of length {} in a set of dimension {dim}",
                        p.len()
                    )));
                }
                if points.iter().any(|p| p.iter().any(|v| !v.is_finite())) {
                    return Err(Error::InvalidInput("points must be finite".into()));
                }
                Ok(())
            }
        }
    }

    /// Membership up to `residual_atol`.
    pub fn contains(&self, x: &Vector, tol: &Tolerance) -> bool {
        if x.len() != self.dim() {
            return false;
        }
        let atol = tol.residual_atol;
        match self {
            InitialSet::FullSpace { .. } => true,
            InitialSet::SubspaceSpan { basis } => {
                let b = Matrix::from_column_slice(x.len(), 1, x.as_slice());
                numkit::min_norm_solve(basis, &b, tol).1
            }
            InitialSet::Box { lower, upper } => x
                .iter()
                .zip(lower.iter().zip(upper.iter()))
                .all(|(v, (l, u))| *v >= l - atol && *v <= u + atol),
            InitialSet::Points { points, .. } => {
                points.iter().any(|p| max_abs_vec(&(p - x)) <= atol)
            }
        }
    }

    /// Draws a state from the set: uniform on boxes, standard normal on the
    /// full space, standard normal coefficients on subspaces, and the points
    /// in turn (`index` modulo their count).
    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R, index: usize) -> Vector {
        match self {
            InitialSet::FullSpace { dim } => {
                Vector::from_fn(*dim, |_, _| rng.sample::<f64, _>(StandardNormal))
            }
            InitialSet::SubspaceSpan { basis } => {
                let c = Vector::from_fn(basis.ncols(), |_, _| rng.sample::<f64, _>(StandardNormal));
                basis * c
            }
            InitialSet::Box { lower, upper } => Vector::from_fn(lower.len(), |i, _| {
                if lower[i] == upper[i] {
                    lower[i]
                } else {
                    rng.random_range(lower[i]..=upper[i])
                }
            }),
            InitialSet::Points { dim, points } => {
                if points.is_empty() {
                    Vector::zeros(*dim)
                } else {
                    points[index % points.len()].clone()
                }
            }
        }
    }
}

/// `E x(t+1) = A x(t) + B u(t)`, `y(t) = C x(t)`, started in `init`.
#[derive(Debug, Clone, PartialEq)]
pub struct DescriptorSystem {
    e: Matrix,
    a: Matrix,
    b: Matrix,
    c: Matrix,
    init: InitialSet,
}

impl DescriptorSystem {
    pub fn new(e: Matrix, a: Matrix, b: Matrix, c: Matrix, init: InitialSet) -> Result<Self> {
        let n = e.nrows();
        let dims_ok = e.ncols() == n
            && a.shape() == (n, n)
            && b.nrows() == n
            && c.ncols() == n
            && init.dim() == n;
        if !dims_ok {
            return Err(Error::DimensionMismatch(format!(
                "E {:?}, A {:?}, B {:?}, C {:?}, init dim {}",
                e.shape(),
                a.shape(),
                b.shape(),
                c.shape(),
                init.dim()
            )));
        }
        if n == 0 {
            return Err(Error::InvalidInput(
                "state dimension must be positive".into(),
            ));
        }
        if ![&e, &a, &b, &c].iter().all(|m| all_finite(m)) {
            return Err(Error::InvalidInput("system matrices must be finite".into()));
        }
        init.check()?;
        Ok(DescriptorSystem { e, a, b, c, init })
    }

    pub fn e(&self) -> &Matrix {
        &self.e
    }
    pub fn a(&self) -> &Matrix {
        &self.a
    }
    pub fn b(&self) -> &Matrix {
        &self.b
    }
    pub fn c(&self) -> &Matrix {
        &self.c
    }
    pub fn init(&self) -> &InitialSet {
        &self.init
    }

    /// State dimension.
    pub fn n(&self) -> usize {
        self.e.nrows()
    }
    /// Input dimension.
    pub fn p(&self) -> usize {
        self.b.ncols()
    }
    /// Output dimension.
    pub fn k(&self) -> usize {
        self.c.nrows()
    }

    /// `M = [E -B]`.
    pub fn step_matrix(&self) -> Matrix {
        hstack(&self.e, &(-&self.b))
    }

    pub fn with_init(mut self, init: InitialSet) -> Result<Self> {
        if init.dim() != self.n() {
            return Err(Error::DimensionMismatch(format!(
                "initial set of dimension {} for a system with n = {}",
                init.dim(),
                self.n()
            )));
        }
        init.check()?;
        self.init = init;
        Ok(self)
    }
}

/// Descriptor-form control law `Ec x(t+1) = Ac x(t) + Bc u(t)` over the
/// plant's `(u, x)`.
#[derive(Debug, Clone, PartialEq)]
pub struct Controller {
    ec: Matrix,
    ac: Matrix,
    bc: Matrix,
}

impl Controller {
    pub fn new(ec: Matrix, ac: Matrix, bc: Matrix) -> Result<Self> {
        let rows = ec.nrows();
        if ac.nrows() != rows || bc.nrows() != rows {
            return Err(Error::DimensionMismatch(format!(
                "controller rows differ: Ec {:?}, Ac {:?}, Bc {:?}",
                ec.shape(),
                ac.shape(),
                bc.shape()
            )));
        }
        if rows > 0 && ec.ncols() != ac.ncols() {
            return Err(Error::DimensionMismatch(format!(
                "Ec has {} columns but Ac has {}",
                ec.ncols(),
                ac.ncols()
            )));
        }
        if ![&ec, &ac, &bc].iter().all(|m| all_finite(m)) {
            return Err(Error::InvalidInput(
                "controller matrices must be finite".into(),
            ));
        }
        Ok(Controller { ec, ac, bc })
    }

    /// A controller that imposes no constraints.
    pub fn empty(n: usize, p: usize) -> Self {
        Controller {
            ec: Matrix::zeros(0, n),
            ac: Matrix::zeros(0, n),
            bc: Matrix::zeros(0, p),
        }
    }

    pub fn ec(&self) -> &Matrix {
        &self.ec
    }
    pub fn ac(&self) -> &Matrix {
        &self.ac
    }
    pub fn bc(&self) -> &Matrix {
        &self.bc
    }
    pub fn rows(&self) -> usize {
        self.ec.nrows()
    }

    /// Checks column counts against a plant with `n` states and `p` inputs.
    /// Zero-row matrices (as read from `[]` in files) are resized to fit.
    pub fn conform(&self, n: usize, p: usize) -> Result<Controller> {
        if self.rows() == 0 {
            return Ok(Controller::empty(n, p));
        }
        if self.ec.ncols() != n || self.ac.ncols() != n || self.bc.ncols() != p {
            return Err(Error::DimensionMismatch(format!(
                "controller Ec {:?}, Ac {:?}, Bc {:?} against plant n = {n}, p = {p}",
                self.ec.shape(),
                self.ac.shape(),
                self.bc.shape()
            )));
        }
        Ok(self.clone())
    }
}

/// Finite-horizon sample of a behaviour: `T` inputs, `T + 1` states and outputs.
#[derive(Debug, Clone, PartialEq)]
pub struct Trajectory {
    pub u: Vec<Vector>,
    pub x: Vec<Vector>,
    pub y: Vec<Vector>,
}

impl Trajectory {
    pub fn new(u: Vec<Vector>, x: Vec<Vector>, y: Vec<Vector>) -> Result<Self> {
        if x.len() != u.len() + 1 || y.len() != x.len() {
            return Err(Error::DimensionMismatch(format!(
                "trajectory with {} inputs, {} states, {} outputs",
                u.len(),
                x.len(),
                y.len()
            )));
        }
        Ok(Trajectory { u, x, y })
    }

    pub fn horizon(&self) -> usize {
        self.u.len()
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ValidationReport {
    pub rank_b_ok: bool,
    pub rank_c_ok: bool,
    pub assumption1_ok: bool,
    pub messages: Vec<String>,
}

impl ValidationReport {
    pub fn all_ok(&self) -> bool {
        self.rank_b_ok && self.rank_c_ok && self.assumption1_ok
    }
}

/// Rank checks: `B` full column rank, `C` full row rank, `[E -B]` full row rank.
pub fn validate(sys: &DescriptorSystem, tol: &Tolerance) -> ValidationReport {
    let mut messages = Vec::new();
    let rank_b = rank_of(sys.b(), tol);
    let rank_c = rank_of(sys.c(), tol);
    let rank_m = rank_of(&sys.step_matrix(), tol);
    let rank_b_ok = rank_b == sys.p();
    let rank_c_ok = rank_c == sys.k();
    let assumption1_ok = rank_m == sys.n();
    if !rank_b_ok {
        messages.push(format!("rank(B) = {rank_b} but p = {}", sys.p()));
    }
    if !rank_c_ok {
        messages.push(format!("rank(C) = {rank_c} but k = {}", sys.k()));
    }
    if !assumption1_ok {
        messages.push(format!(
            "[E -B] has rank {rank_m} but needs full row rank n = {}",
            sys.n()
        ));
    }
    ValidationReport {
        rank_b_ok,
        rank_c_ok,
        assumption1_ok,
        messages,
    }
}

/// Largest violation of the system equations along `traj`; zero means the
/// trajectory is exactly in the behaviour.
pub fn membership_residual(sys: &DescriptorSystem, traj: &Trajectory) -> Result<f64> {
    let (n, p, k) = (sys.n(), sys.p(), sys.k());
    if traj.x.len() != traj.u.len() + 1 || traj.y.len() != traj.x.len() {
        return Err(Error::DimensionMismatch(
            "trajectory lengths are inconsistent".into(),
        ));
    }
    if traj.x.iter().any(|v| v.len() != n)
        || traj.u.iter().any(|v| v.len() != p)
        || traj.y.iter().any(|v| v.len() != k)
    {
        return Err(Error::DimensionMismatch(format!(
            "trajectory vectors do not match n = {n}, p = {p}, k = {k}"
        )));
    }
    let mut worst = 0.0_f64;
    for t in 0..traj.horizon() {
        let r = sys.e() * &traj.x[t + 1] - sys.a() * &traj.x[t] - sys.b() * &traj.u[t];
        worst = worst.max(max_abs_vec(&r));
    }
    for (x, y) in traj.x.iter().zip(&traj.y) {
        worst = worst.max(max_abs_vec(&(y - sys.c() * x)));
    }
    Ok(worst)
}

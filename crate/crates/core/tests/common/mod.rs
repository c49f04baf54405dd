//! Random model generators shared by the integration tests.
#![allow(dead_code)]

use dsrefine::{
    closed_loop_reduce, validate, Controller, DescriptorSystem, InitialSet, LinearStateMap, Matrix,
    Tolerance,
};
use rand::Rng;
use rand_distr::StandardNormal;

pub fn normal<R: Rng>(rng: &mut R, rows: usize, cols: usize) -> Matrix {
    Matrix::from_fn(rows, cols, |_, _| rng.sample(StandardNormal))
}

/// Random matrix of the given rank (generically), as a product of factors.
pub fn with_rank<R: Rng>(rng: &mut R, rows: usize, cols: usize, rank: usize) -> Matrix {
    normal(rng, rows, rank) * normal(rng, rank, cols)
}

pub fn spectral_radius(k: &Matrix) -> f64 {
    if k.is_empty() {
        return 0.0;
    }
    k.clone()
        .complex_eigenvalues()
        .iter()
        .map(|l| l.norm())
        .fold(0.0, f64::max)
}

/// Random plant satisfying `[E -B]` full row rank. With `singular`, the last
/// row of `E` is zeroed, giving an algebraic constraint.
pub fn random_plant<R: Rng>(
    rng: &mut R,
    n: usize,
    p: usize,
    k: usize,
    singular: bool,
) -> DescriptorSystem {
    let tol = Tolerance::default();
    loop {
        let mut e = normal(rng, n, n);
        if singular {
            e.row_mut(n - 1).fill(0.0);
        }
        let a = normal(rng, n, n) * 0.5;
        let b = normal(rng, n, p);
        let c = normal(rng, k, n);
        let sys = DescriptorSystem::new(e, a, b, c, InitialSet::full(n)).unwrap();
        if validate(&sys, &tol).assumption1_ok {
            return sys;
        }
    }
}

/// Random plant and controller whose interconnection is well-posed with a
/// stable closed loop (spectral radius below `max_radius`).
pub fn random_stable_pair<R: Rng>(rng: &mut R, max_radius: f64) -> (DescriptorSystem, Controller) {
    let tol = Tolerance::default();
    loop {
        let n = rng.random_range(1..=4);
        let p = rng.random_range(1..=2);
        let singular = n > 1 && rng.random_bool(0.5);
        let sys = random_plant(rng, n, p, 1, singular);
        let ctrl = Controller::new(
            normal(rng, p, n) * rng.random_range(0.0..1.0),
            normal(rng, p, n),
            normal(rng, p, p),
        )
        .unwrap();
        if let Ok(cl) = closed_loop_reduce(&sys, &ctrl, &tol) {
            let scale = cl.k.amax().max(cl.l.amax());
            if spectral_radius(&cl.k) < max_radius && scale < 1e3 {
                return (sys, ctrl);
            }
        }
    }
}

/// `sys` with `extra` decoupled, unobserved states appended; returns the new
/// plant and the projection back onto the original states.
pub fn extend<R: Rng>(
    rng: &mut R,
    sys: &DescriptorSystem,
    extra: usize,
) -> (DescriptorSystem, LinearStateMap) {
    let (n, p, k) = (sys.n(), sys.p(), sys.k());
    let m = n + extra;
    let mut e = Matrix::zeros(m, m);
    let mut a = Matrix::zeros(m, m);
    let mut b = Matrix::zeros(m, p);
    let mut c = Matrix::zeros(k, m);
    e.view_mut((0, 0), (n, n)).copy_from(sys.e());
    e.view_mut((n, n), (extra, extra)).fill_with_identity();
    a.view_mut((0, 0), (n, n)).copy_from(sys.a());
    a.view_mut((n, n), (extra, extra))
        .copy_from(&normal(rng, extra, extra));
    b.view_mut((0, 0), (n, p)).copy_from(sys.b());
    c.view_mut((0, 0), (k, n)).copy_from(sys.c());
    let big = DescriptorSystem::new(e, a, b, c, InitialSet::full(m)).unwrap();
    let mut h = Matrix::zeros(n, m);
    h.view_mut((0, 0), (n, n)).fill_with_identity();
    (big, LinearStateMap::new(h))
}

/// `sys` in new coordinates `x = T x'`, with its equations mixed by an
/// invertible `S`; returns the new plant and `T` as the relation.
pub fn change_coordinates<R: Rng>(
    rng: &mut R,
    sys: &DescriptorSystem,
) -> (DescriptorSystem, LinearStateMap) {
    let n = sys.n();
    let t = normal(rng, n, n) + Matrix::identity(n, n) * 3.0;
    let s = normal(rng, n, n) + Matrix::identity(n, n) * 3.0;
    let out = DescriptorSystem::new(
        &s * sys.e() * &t,
        &s * sys.a() * &t,
        &s * sys.b(),
        sys.c() * &t,
        InitialSet::full(n),
    )
    .unwrap();
    (out, LinearStateMap::new(t))
}

//! Built-in worked case: a three-state singular plant, a two-state abstraction
//! related to it by `x_a = H x`, and a stabilising abstract controller.
//!
//! Used by the `verify-example4` CLI command, the benches and the tests.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::dvtransform::{
    check_dv_consistency, to_dv, verify_ds_dv_equivalence, DrivingVariableSystem,
};
use crate::error::Result;
use crate::numkit::{Matrix, Tolerance, Vector};
use crate::refinement::{closed_loop_reduce, refine_end_to_end};
use crate::relations::{check_simulation, synthesize_interface, LinearStateMap};
use crate::simulate::{check_wellposed, compare_outputs, simulate_closed_loop, simulate_refined};
use crate::systems::{validate, Controller, DescriptorSystem, InitialSet};

fn m(rows: usize, cols: usize, data: &[f64]) -> Matrix {
    Matrix::from_row_slice(rows, cols, data)
}

/// Concrete plant, initialised on the cube `[-1, 1]^3`.
///
/// The last row of `E` is zero, so `u(t) = -x3(t)` is an algebraic
/// constraint and `x2(t+1)` is free.
pub fn concrete_plant() -> DescriptorSystem {
    DescriptorSystem::new(
        m(3, 3, &[1.0, 0.0, 0.0, 0.0, 0.0, 1.0, 0.0, 0.0, 0.0]),
        m(3, 3, &[-1.0, 0.0, 0.0, 0.0, 1.0, 0.0, 0.0, 0.0, 1.0]),
        m(3, 1, &[1.0, 1.0, 1.0]),
        m(1, 3, &[0.0, 0.2, 0.5]),
        InitialSet::cube(3, 1.0),
    )
    .expect("reference plant is consistent")
}

/// Two-state abstraction, initialised on the whole plane.
pub fn abstract_plant() -> DescriptorSystem {
    DescriptorSystem::new(
        m(2, 2, &[0.0, 0.0, 1.0, 0.0]),
        Matrix::identity(2, 2),
        m(2, 1, &[1.0, 0.0]),
        m(1, 2, &[0.7, 0.2]),
        InitialSet::full(2),
    )
    .expect("reference abstraction is consistent")
}

/// `[1 1] x_a(t+1) = [0.5 0.5] x_a(t) + u_a(t)`.
pub fn abstract_controller() -> Controller {
    Controller::new(m(1, 2, &[1.0, 1.0]), m(1, 2, &[0.5, 0.5]), m(1, 1, &[1.0]))
        .expect("reference controller is consistent")
}

pub fn relation() -> LinearStateMap {
    LinearStateMap::new(m(2, 3, &[0.0, 0.0, 1.0, 0.0, 1.0, -1.0]))
}

/// Hand-derived driving-variable form of [`concrete_plant`],
/// with kernel direction `-e2` (`to_dv` picks `+e2`).
pub fn hand_concrete_dv() -> DrivingVariableSystem {
    DrivingVariableSystem::new(
        m(3, 3, &[-1.0, 0.0, -1.0, 0.0, 0.0, 0.0, 0.0, 1.0, -1.0]),
        m(3, 1, &[0.0, -1.0, 0.0]),
        m(1, 3, &[0.0, 0.0, -1.0]),
        m(1, 1, &[0.0]),
        m(1, 3, &[0.0, 0.2, 0.5]),
        InitialSet::cube(3, 1.0),
    )
    .expect("hand DV is consistent")
}

/// Hand-derived driving-variable form of [`abstract_plant`], kernel direction `-e2`.
pub fn hand_abstract_dv() -> DrivingVariableSystem {
    DrivingVariableSystem::new(
        m(2, 2, &[0.0, 1.0, 0.0, 0.0]),
        m(2, 1, &[0.0, -1.0]),
        m(1, 2, &[-1.0, 0.0]),
        m(1, 1, &[0.0]),
        m(1, 2, &[0.7, 0.2]),
        InitialSet::full(2),
    )
    .expect("hand abstract DV is consistent")
}

/// Closed-loop state map of the abstract plant under [`abstract_controller`].
pub fn abstract_closed_loop() -> (Matrix, Matrix) {
    (m(2, 2, &[0.0, 1.0, -0.5, -0.5]), m(1, 2, &[-1.0, 0.0]))
}

/// Concrete closed loop after substituting `x_a = H x`. The first row follows
/// from `x1(t+1) = -x1(t) + u(t)` with `u = -x3`.
pub fn concrete_closed_loop() -> Matrix {
    m(3, 3, &[-1.0, 0.0, -1.0, 0.0, 0.5, -1.0, 0.0, 1.0, -1.0])
}

/// Interface `s = s_a - [0 1 -1] x` in the hand-derived kernel orientation:
/// returns the row multiplying `x`.
pub fn hand_interface_row() -> Vector {
    Vector::from_vec(vec![0.0, -1.0, 1.0])
}

fn row_text(m: &Matrix) -> String {
    let cells: Vec<String> = m.iter().map(|v| format!("{v:.6}")).collect();
    format!("[{}]", cells.join(" "))
}

/// Outcome of one built-in check.
#[derive(Debug, Clone, PartialEq)]
pub struct Check {
    pub name: &'static str,
    pub pass: bool,
    pub detail: String,
}

fn check(name: &'static str, outcome: Result<(bool, String)>) -> Check {
    match outcome {
        Ok((pass, detail)) => Check { name, pass, detail },
        Err(e) => Check {
            name,
            pass: false,
            detail: e.to_string(),
        },
    }
}

/// Runs the whole pipeline on the built-in case. `seed` drives the sampled
/// starting points; `bound` is the output comparison tolerance.
pub fn run_checks(tol: &Tolerance, seed: u64, steps: usize, bound: f64) -> Vec<Check> {
    let conc = concrete_plant();
    let abs = abstract_plant();
    let ctrl = abstract_controller();
    let rel = relation();
    let mut out = Vec::new();

    out.push(check(
        "validate",
        Ok({
            let (a, b) = (validate(&conc, tol), validate(&abs, tol));
            (
                a.all_ok() && b.all_ok(),
                format!("concrete {:?}, abstract {:?}", a.messages, b.messages),
            )
        }),
    ));

    out.push(check(
        "dv_consistency",
        (|| {
            let dv = to_dv(&conc, tol)?;
            let ours = check_dv_consistency(&conc, &dv, tol)?;
            let hand = check_dv_consistency(&conc, &hand_concrete_dv(), tol)?;
            let eq = verify_ds_dv_equivalence(&conc, &dv, 20, 100, seed, tol)?;
            Ok((
                ours && hand && eq,
                format!("computed {ours}, hand-derived {hand}, equivalence {eq}"),
            ))
        })(),
    ));

    out.push(check(
        "relation",
        (|| {
            let good = check_simulation(&abs, &conc, &rel, tol)?;
            let mut h = rel.h().clone();
            h[(1, 1)] -= 0.1;
            let bad = check_simulation(&abs, &conc, &LinearStateMap::new(h), tol)?;
            let witness = bad.witness.as_ref().map_or(0.0, |w| w.residual);
            Ok((
                good.verdict && !bad.verdict,
                format!(
                    "reference {}, perturbed {} (witness residual {witness:.3})",
                    good.verdict, bad.verdict
                ),
            ))
        })(),
    ));

    out.push(check(
        "wellposedness",
        (|| {
            let r = check_wellposed(&abs, &ctrl, tol)?;
            let empty = check_wellposed(&conc, &Controller::empty(3, 1), tol)?;
            Ok((
                r.verdict && r.rank_lhs == 3 && r.rank_aug == 3 && !empty.uniqueness_ok,
                format!(
                    "ranks {}/{}/{}, empty controller unique: {}",
                    r.rank_lhs, r.rank_aug, r.unknowns, empty.uniqueness_ok
                ),
            ))
        })(),
    ));

    out.push(check(
        "closed_loop_spectrum",
        (|| {
            let cl = closed_loop_reduce(&abs, &ctrl, tol)?;
            let k = &cl.k;
            let c1 = -(k[(0, 0)] + k[(1, 1)]);
            let c0 = k[(0, 0)] * k[(1, 1)] - k[(0, 1)] * k[(1, 0)];
            let radius = k
                .clone()
                .complex_eigenvalues()
                .iter()
                .map(|l| l.norm())
                .fold(0.0, f64::max);
            let pass = (c1 - 0.5).abs() <= 1e-12 && (c0 - 0.5).abs() <= 1e-12 && radius < 1.0;
            Ok((
                pass,
                format!("l^2 + {c1:.6} l + {c0:.6}, spectral radius {radius:.5}"),
            ))
        })(),
    ));

    out.push(check(
        "interface",
        (|| {
            let iface = synthesize_interface(&hand_abstract_dv(), &hand_concrete_dv(), &rel, tol)?;
            let gx = iface.state_gain();
            let gs = iface.input_gain();
            let dev = (gx.transpose() - hand_interface_row())
                .amax()
                .max((gs[(0, 0)] - 1.0).abs());
            Ok((
                dev <= 1e-12,
                format!("s = {} s_a + {} x", row_text(&gs), row_text(&gx)),
            ))
        })(),
    ));

    out.push(check("refinement", (|| {
        let rc = refine_end_to_end(&conc, &abs, &rel, &ctrl, tol)?;
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let (mut out_dev, mut rel_dev) = (0.0_f64, 0.0_f64);
        for i in 0..100 {
            let x0 = conc.init().sample(&mut rng, i);
            let (traj, z) = simulate_refined(&conc, &rc, &x0, steps, tol)?;
            let reference = simulate_closed_loop(&abs, &ctrl, &(rel.h() * &x0), steps, tol)?;
            let r = compare_outputs(&traj, &reference, bound)?.with_relation(rel.h(), &traj.x, &z)?;
            out_dev = out_dev.max(r.max_output_dev);
            rel_dev = rel_dev.max(r.max_relation_dev);
        }
        Ok((
            out_dev <= bound && rel_dev <= bound,
            format!("100 runs x {steps} steps: output deviation {out_dev:.2e}, |Hx - z| {rel_dev:.2e}"),
        ))
    })()));

    out
}

use super::{ScalarField, Var};

/// Base step of the finite-difference provider for first derivatives.
pub const FD_DEFAULT_STEP: f64 = 1e-4;

/// Step multiplier for a mixed partial of total order 1, 2, 3.
///
/// Nested stencils amplify rounding by `h^-k`, so higher orders take
/// larger steps.
const ORDER_SCALE: [f64; 3] = [10.0, 100.0, 300.0];

const OFFSETS: [f64; 6] = [-3.0, -2.0, -1.0, 1.0, 2.0, 3.0];
const WEIGHTS: [f64; 6] = [-1.0, 9.0, -45.0, 45.0, -9.0, 1.0];

/// `∂^k f / ∂v₁ … ∂v_k` at `(x, y)` by nested 6th-order central stencils.
///
/// Steps are `base_step · ORDER_SCALE[k-1]` times `max(1, |xᵢ|)` in position
/// and `‖y‖` in direction, since `F²` is homogeneous in `y`.
pub fn fd_partial<F: ScalarField>(f: &F, x: &[f64], y: &[f64], vars: &[Var], base_step: f64) -> f64 {
    assert!(
        !vars.is_empty() && vars.len() <= ORDER_SCALE.len(),
        "finite-difference order {} unsupported",
        vars.len()
    );
    let h = base_step * ORDER_SCALE[vars.len() - 1];
    let mut xs = x.to_vec();
    let mut ys = y.to_vec();
    let y_scale = y.iter().map(|v| v * v).sum::<f64>().sqrt();
    nested(f, &mut xs, &mut ys, vars, h, y_scale)
}

fn nested<F: ScalarField>(f: &F, x: &mut [f64], y: &mut [f64], vars: &[Var], h: f64, y_scale: f64) -> f64 {
    let Some((&first, rest)) = vars.split_first() else {
        return f.eval::<f64>(x, y);
    };
    let (centre, step) = match first {
        Var::X(i) => (x[i], h * x[i].abs().max(1.0)),
        Var::Y(i) => (y[i], h * y_scale),
    };
    let mut acc = 0.0;
    for (off, w) in OFFSETS.iter().zip(WEIGHTS) {
        set(x, y, first, centre + off * step);
        acc += w * nested(f, x, y, rest, h, y_scale);
    }
    set(x, y, first, centre);
    acc / (60.0 * step)
}

fn set(x: &mut [f64], y: &mut [f64], var: Var, value: f64) {
    match var {
        Var::X(i) => x[i] = value,
        Var::Y(i) => y[i] = value,
    }
}

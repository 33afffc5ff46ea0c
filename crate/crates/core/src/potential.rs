//! Discrete weak Poincaré lemma: integrate a (numerically) curl-free pair
//! of component fields to a potential over the canonical sweep tree, with
//! trapezoidal edge quadrature. The curl residual is evaluated and
//! reported but never gates the integration.

use crate::error::Result;
use crate::grid::{same_grid, Dir, GridField, LinearValue};
use crate::sweep::{check_base, sweep_edges};

/// Potential with its anchoring data and the curl residual of the input.
#[derive(Debug, Clone)]
pub struct PotentialResult<T> {
    pub theta: GridField<T>,
    pub base_node: (usize, usize),
    pub base_value: T,
    /// Interior-margin-0 L2 norm of `d1 f2 - d2 f1`.
    pub curl_residual_l2: f64,
}

/// `d1 f2 - d2 f1` by central differences; identically zero exactly when
/// the pair is a discrete gradient of a quadratic.
pub fn curl_residual<T: LinearValue>(f1: &GridField<T>, f2: &GridField<T>) -> Result<GridField<T>> {
    same_grid(f1.spec(), f2.spec())?;
    let d1f2 = f2.partial(Dir::X)?;
    let d2f1 = f1.partial(Dir::Y)?;
    d1f2.zip_map(&d2f1, |a, b| a.sub(b))
}

/// Path integration of `(f1, f2)` from `base_node`, trapezoid rule per
/// edge: exact for componentwise-affine integrands, second order in
/// general when the curl residual is second order.
pub fn integrate_potential<T: LinearValue>(
    f1: &GridField<T>,
    f2: &GridField<T>,
    base_node: (usize, usize),
    base_value: T,
) -> Result<PotentialResult<T>> {
    same_grid(f1.spec(), f2.spec())?;
    let spec = *f1.spec();
    check_base(&spec, base_node)?;

    let curl = curl_residual(f1, f2)?;

    let mut theta = GridField::constant(spec, base_value);
    for edge in sweep_edges(&spec, base_node) {
        let f = match edge.dir {
            Dir::X => f1,
            Dir::Y => f2,
        };
        let increment = f
            .at(edge.from.0, edge.from.1)
            .add(&f.at(edge.to.0, edge.to.1))
            .scale(0.5 * edge.step);
        let next = theta.at(edge.from.0, edge.from.1).add(&increment);
        theta.set(edge.to.0, edge.to.1, next);
    }

    Ok(PotentialResult {
        theta,
        base_node,
        base_value,
        curl_residual_l2: curl.norm_l2(),
    })
}

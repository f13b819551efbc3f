use super::{BrownianPath, FieldPair};
use crate::geometry::MovingSet;
use crate::skorohod::SkorohodSolution;
use crate::{Error, Point, Result};

/// Projected Euler scheme
/// `X_{n+1} = P_{C(t_{n+1})}(X_n + h f(t_n, X_n) + sigma(t_n, X_n) dB_n)`.
///
/// The returned solution carries the stochastic-integral driver
/// `l_n = u0 + sum (h f + sigma dB)` and `K = l - X`.
pub fn euler_project<S: MovingSet + ?Sized>(
    set: &S,
    fields: &FieldPair,
    u0: &Point,
    path: &BrownianPath,
) -> Result<SkorohodSolution> {
    if u0.len() != set.dim() {
        return Err(Error::Config("initial point and set dimensions differ".into()));
    }
    let tol = set.boundary_tolerance();
    if set.distance(0.0, u0) > tol {
        return Err(Error::Config("initial point is not in C(0)".into()));
    }
    let grid = path.grid();
    let mut sol = SkorohodSolution::start(grid.node(0), u0.clone(), u0.clone());
    for (n, &db) in path.increments().iter().enumerate() {
        let t = grid.node(n);
        let t_next = grid.node(n + 1);
        let x = &sol.x[n];
        let mut increment = fields.drift(t, x) * grid.step_len(n);
        increment.axpy(db, &fields.diffusion(t, x), 1.0);
        let predicted = x + &increment;
        let l_next = &sol.driver[n] + increment;
        let x_next = set.project(t_next, &predicted).map_err(|e| e.at_node(n + 1))?;
        sol.push(t_next, x_next, l_next, &predicted, tol);
    }
    Ok(sol)
}

//! Nehari projection, the fibering maximum, and the ground-state level.
//!
//! For `u != 0` the fiber map `theta -> J(theta u)` has a unique interior
//! maximum at `theta = phi(u) > 0`; `phi(u) u` lies on the Nehari manifold
//! `G = 0`. The ground-state level is the infimum of `J` over the manifold,
//! estimated by multistart solves.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::energy::e_norm_sq;
use crate::error::{Error, Result};
use crate::grid::{norm_l2, Field};
use crate::model::ModelProblem;
use crate::scalar::{real, Real};
use crate::solver::{solve_from, GroundStateSummary, SolverConfig};

/// Result of projecting a ray onto the Nehari manifold.
#[derive(Clone, Debug)]
pub struct ProjectionResult<T: Real = f64> {
    /// The fiber maximizer `phi(u)`.
    pub t_star: T,
    /// `phi(u) u`.
    pub projected: Field<T>,
    /// `J(phi(u) u)`, the fiber maximum.
    pub fiber_value: T,
    /// Bracketing plus bisection steps used by the root finder.
    pub iterations: usize,
}

/// Scalar data of the fiber through `u`: `J(t u) = t^2 q / 2 - t^{p+1} s/(p+1)`
/// and `h(t) = d/dt J(t u) * 1/1 = t q - t^p s`, valid for `t > 0` by the
/// homogeneity of the power family (the positive-part truncation commutes
/// with positive scaling).
#[derive(Clone, Copy, Debug)]
pub(crate) struct Fiber<T: Real> {
    pub quadratic: T,
    pub power: T,
    pub exponent: T,
}

impl<T: Real> Fiber<T> {
    pub fn of(model: &ModelProblem<T>, u: &Field<T>) -> Self {
        Fiber {
            quadratic: e_norm_sq(model, u),
            power: model.power_integral(u),
            exponent: model.nonlinearity().exponent(),
        }
    }

    #[inline]
    pub fn h(&self, t: T) -> T {
        t * self.quadratic - t.powf(self.exponent) * self.power
    }

    #[inline]
    pub fn h_prime(&self, t: T) -> T {
        self.quadratic - self.exponent * t.powf(self.exponent - T::one()) * self.power
    }

    #[inline]
    pub fn j(&self, t: T) -> T {
        let p1 = self.exponent + T::one();
        t * t * self.quadratic * real::<T>(0.5) - t.powf(p1) * self.power / p1
    }

    /// Root of `h` on `(0, inf)`: bracket by doubling/halving from `t = 1`,
    /// bisect to relative width `1e-12`, then one Newton polish.
    pub fn solve(&self) -> Result<(T, usize)> {
        if !(self.quadratic > T::zero()) {
            return Err(Error::ZeroField);
        }
        if !(self.power > T::zero()) {
            return Err(Error::ProjectionFailed(
                "fiber never crosses the manifold: int f(u)u vanishes along the ray".into(),
            ));
        }
        let mut iterations = 0usize;
        let lo_limit = real::<T>(1e-12);
        let hi_limit = real::<T>(1e12);
        // h(t) = t q - t^p s with p > 1: positive for small t, negative for
        // large t; bracket the sign change
        let mut lo = T::one();
        let mut hi = T::one();
        if self.h(T::one()) > T::zero() {
            while self.h(hi) > T::zero() {
                hi = hi * real(2.0);
                iterations += 1;
                if hi > hi_limit {
                    return Err(Error::ProjectionFailed(
                        "no sign change up to t = 1e12 (assumptions violated?)".into(),
                    ));
                }
            }
        } else {
            while self.h(lo) <= T::zero() {
                lo = lo * real(0.5);
                iterations += 1;
                if lo < lo_limit {
                    return Err(Error::ProjectionFailed(
                        "no sign change down to t = 1e-12 (assumptions violated?)".into(),
                    ));
                }
            }
        }
        while (hi - lo) > real::<T>(1e-12) * hi {
            let mid = (lo + hi) * real(0.5);
            if self.h(mid) > T::zero() {
                lo = mid;
            } else {
                hi = mid;
            }
            iterations += 1;
            if iterations > 500 {
                break;
            }
        }
        let mut t = (lo + hi) * real(0.5);
        let dh = self.h_prime(t);
        if dh != T::zero() {
            let polished = t - self.h(t) / dh;
            if polished > T::zero() && polished.is_finite() {
                t = polished;
            }
        }
        Ok((t, iterations))
    }
}

/// Project `u != 0` onto the Nehari manifold along its ray.
pub fn project<T: Real>(model: &ModelProblem<T>, u: &Field<T>) -> Result<ProjectionResult<T>> {
    let fiber = Fiber::of(model, u);
    let (t_star, iterations) = fiber.solve()?;
    Ok(ProjectionResult {
        t_star,
        projected: u.scaled(t_star),
        fiber_value: fiber.j(t_star),
        iterations,
    })
}

/// `max_{theta >= 0} J(theta u) = J(phi(u) u)`.
pub fn fibering_max<T: Real>(model: &ModelProblem<T>, u: &Field<T>) -> Result<T> {
    project(model, u).map(|r| r.fiber_value)
}

/// Seeded Gaussian bump: center uniform in the middle half of the box, width
/// in `[1, L/10]` (clamped for tiny boxes), unit `L^2` mass.
pub fn seeded_bump<T: Real>(model: &ModelProblem<T>, seed: u64) -> Field<T> {
    use rand::Rng;
    use rand::SeedableRng;
    let grid = model.grid();
    let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
    let l = grid.extent().to_f64().expect("extent");
    let quarter = l / 4.0;
    let mut center = [0.0f64; 2];
    for c in center.iter_mut().take(grid.dim()) {
        *c = rng.random_range(-quarter..quarter);
    }
    let w_hi = l / 10.0;
    let w_lo = 1.0f64.min(w_hi);
    let width = if w_lo < w_hi { rng.random_range(w_lo..w_hi) } else { w_hi };
    let cx = real::<T>(center[0]);
    let cy = real::<T>(center[1]);
    let inv_two_w_sq = real::<T>(1.0 / (2.0 * width * width));
    let bump = Field::from_fn(grid, |[x, y]| {
        let dx = x - cx;
        let dy = y - cy;
        (-(dx * dx + dy * dy) * inv_two_w_sq).exp()
    });
    let mass = norm_l2(&bump);
    bump.scaled(T::one() / mass)
}

/// Multistart estimate of the ground-state level.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct LevelEstimate<T: Real = f64> {
    /// Minimum converged level over the starts.
    pub level: T,
    /// Index of the start attaining the minimum (lowest index on ties).
    pub argmin: usize,
    /// Number of starts that failed to converge.
    pub failures: usize,
    /// Per-start summaries, in start order.
    pub starts: Vec<GroundStateSummary<T>>,
}

/// Minimum of `J` over `starts` solver runs from seeded initial bumps.
/// Per-start seeds are `seed + k` for start index `k`; runs execute
/// concurrently and reduce by deterministic min with lowest-index tie-break.
pub fn level_estimate<T: Real>(
    model: &ModelProblem<T>,
    starts: usize,
    seed: u64,
    config: &SolverConfig<T>,
) -> Result<LevelEstimate<T>> {
    if starts == 0 {
        return Err(Error::InvalidInput("starts must be >= 1".into()));
    }
    let summaries: Vec<GroundStateSummary<T>> = (0..starts)
        .into_par_iter()
        .map(|k| {
            let bump = seeded_bump(model, seed.wrapping_add(k as u64));
            match solve_from(model, config, bump) {
                Ok(gs) => gs.summary(),
                Err(_) => GroundStateSummary::failed(),
            }
        })
        .collect();
    let failures = summaries.iter().filter(|s| !s.converged).count();
    let mut level = T::infinity();
    let mut argmin = 0usize;
    for (k, s) in summaries.iter().enumerate() {
        if s.converged && s.level < level {
            level = s.level;
            argmin = k;
        }
    }
    if !level.is_finite() {
        return Err(Error::ProjectionFailed("no start converged".into()));
    }
    Ok(LevelEstimate { level, argmin, failures, starts: summaries })
}

//! The variational core: the functional
//!
//! ```text
//!   J(u) = 1/2 ||(-Delta)^{s/2} u||_2^2 + 1/2 int V u^2 - int F(x, u),
//! ```
//!
//! its `L^2` gradient `g = (-Delta)^s u + V u - f(x, u)` (so that
//! `DJ(u)v = int g v` holds exactly in the discrete system), and the Nehari
//! residual `G(u) = ||u||_E^2 - int f(x,u) u = DJ(u)u`, whose zero set is the
//! Nehari manifold.

use serde::{Deserialize, Serialize};

use crate::fraclap::{apply_fraclap, hs_seminorm_sq, SymbolPower};
use crate::grid::Field;
use crate::model::ModelProblem;
use crate::scalar::{kahan_sum, real, Real};

/// The three parts of `J` and their signed sum.
#[derive(Clone, Copy, Debug, Serialize, Deserialize)]
pub struct EnergyBreakdown<T: Real = f64> {
    /// `1/2 int |xi|^{2s} |u_hat|^2`
    pub kinetic: T,
    /// `1/2 int V u^2`
    pub potential: T,
    /// `int F(x, u)`
    pub nonlinear: T,
    /// `kinetic + potential - nonlinear`
    pub total: T,
}

/// Evaluate `J` with its breakdown.
pub fn energy<T: Real>(model: &ModelProblem<T>, u: &Field<T>) -> EnergyBreakdown<T> {
    let half = real::<T>(0.5);
    let kinetic = half * hs_seminorm_sq(u, model.order());
    let potential = half * potential_quadratic(model, u);
    let nonlinear = model.power_integral(u) / model.nonlinearity().mu();
    EnergyBreakdown { kinetic, potential, nonlinear, total: kinetic + potential - nonlinear }
}

/// `int V u^2` using the cached potential samples.
pub fn potential_quadratic<T: Real>(model: &ModelProblem<T>, u: &Field<T>) -> T {
    let sum: T = kahan_sum(
        u.values()
            .iter()
            .zip(model.potential_samples())
            .map(|(&v, &w)| w * v * v),
    );
    sum * model.grid().cell_volume()
}

/// Squared `E^s` norm `||u||_E^2 = ||(-Delta)^{s/2} u||_2^2 + int V u^2`.
pub fn e_norm_sq<T: Real>(model: &ModelProblem<T>, u: &Field<T>) -> T {
    hs_seminorm_sq(u, model.order()) + potential_quadratic(model, u)
}

/// `L^2` gradient `g = (-Delta)^s u + V u - f(x, u)`; `||g||_2` is the
/// stationarity measure.
pub fn gradient<T: Real>(model: &ModelProblem<T>, u: &Field<T>) -> Field<T> {
    let mut g = apply_fraclap(u, model.order(), SymbolPower::Full);
    let f = model.eval_f(u);
    for ((gv, &uv), (&vv, &fv)) in g
        .values_mut()
        .iter_mut()
        .zip(u.values())
        .zip(model.potential_samples().iter().zip(f.values()))
    {
        *gv = *gv + vv * uv - fv;
    }
    g
}

/// Nehari residual `G(u) = ||u||_E^2 - int f(x,u) u`; zero (within tolerance)
/// is membership in the Nehari manifold, and `G(u) = DJ(u)u`.
pub fn nehari_residual<T: Real>(model: &ModelProblem<T>, u: &Field<T>) -> T {
    e_norm_sq(model, u) - model.power_integral(u)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fraclap::FracOrder;
    use crate::grid::{integrate_product, norm_l2, Grid};
    use crate::model::{Nonlinearity, Potential};
    use approx::assert_relative_eq;
    use rand::Rng;
    use rand::SeedableRng;
    use std::f64::consts::PI;

    /// N=1, s=1/2, V=1, p=2 on L=160, M=8192: the exact solution is
    /// u*(x) = 2/(1+x^2).
    fn benchmark() -> (ModelProblem<f64>, Field<f64>) {
        let grid = Grid::new(1, 160.0, 8192).unwrap();
        let model = ModelProblem::new(
            grid,
            FracOrder::new(0.5).unwrap(),
            Potential::Constant { value: 1.0 },
            Nonlinearity::pure_power(2.0).unwrap(),
            false,
        );
        let u = Field::from_fn(&grid, |[x, _]| 2.0 / (1.0 + x * x));
        (model, u)
    }

    fn band_limited(grid: &Grid<f64>, seed: u64, modes: usize) -> Field<f64> {
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
        let l = grid.extent();
        let coeffs: Vec<(f64, f64, f64)> = (1..=modes)
            .map(|k| {
                (
                    k as f64,
                    rng.random_range(-1.0..1.0),
                    rng.random_range(-1.0..1.0),
                )
            })
            .collect();
        Field::from_fn(grid, |[x, _]| {
            coeffs
                .iter()
                .map(|&(k, a, b)| {
                    let arg = 2.0 * PI * k * x / l;
                    a * arg.cos() + b * arg.sin()
                })
                .sum()
        })
    }

    #[test]
    fn zero_field_has_zero_energy() {
        let (model, _) = benchmark();
        let e = energy(&model, &Field::zeros(model.grid()));
        assert_eq!(e.kinetic, 0.0);
        assert_eq!(e.potential, 0.0);
        assert_eq!(e.nonlinear, 0.0);
        assert_eq!(e.total, 0.0);
        assert_eq!(gradient(&model, &Field::zeros(model.grid())).max_abs(), 0.0);
    }

    /// Closed-form integrals of the exact solution:
    /// K = pi, ||u||_2^2 = 2 pi, int u^3 = 3 pi, so the parts are
    /// (pi/2, pi, pi) and J(u*) = pi/2.
    #[test]
    fn benchmark_energy_breakdown() {
        let (model, u) = benchmark();
        let e = energy(&model, &u);
        assert_relative_eq!(e.kinetic, PI / 2.0, max_relative = 1e-3);
        assert_relative_eq!(e.potential, PI, max_relative = 1e-3);
        assert_relative_eq!(e.nonlinear, PI, max_relative = 1e-3);
        assert_relative_eq!(e.total, PI / 2.0, max_relative = 1e-3);
        assert_eq!(e.total, e.kinetic + e.potential - e.nonlinear);
    }

    /// u_w(x) = w u*(w x) solves the equation with V = w and has level
    /// pi w^2 / 2.
    #[test]
    fn benchmark_scaling_family() {
        let omega = 2.0;
        let grid = Grid::new(1, 160.0, 8192).unwrap();
        let model = ModelProblem::new(
            grid,
            FracOrder::new(0.5).unwrap(),
            Potential::Constant { value: omega },
            Nonlinearity::pure_power(2.0).unwrap(),
            false,
        );
        let u = Field::from_fn(&grid, |[x, _]: [f64; 2]| {
            omega * 2.0 / (1.0 + (omega * x).powi(2))
        });
        let e = energy(&model, &u);
        assert_relative_eq!(e.total, PI * omega * omega / 2.0, max_relative = 1e-3);
    }

    /// u* solves the equation exactly in the continuum; the discrete residual
    /// is pure box truncation, measured 1.6e-3 at L = 160 and decaying with
    /// the box (5.7e-4 at L = 320).
    #[test]
    fn benchmark_gradient_is_small() {
        let (model, u) = benchmark();
        let g = gradient(&model, &u);
        assert!(norm_l2(&g) / norm_l2(&u) <= 1.8e-3);

        let grid = Grid::new(1, 320.0, 8192).unwrap();
        let model = model.on_grid(grid);
        let u = Field::from_fn(&grid, |[x, _]| 2.0 / (1.0 + x * x));
        assert!(norm_l2(&gradient(&model, &u)) / norm_l2(&u) <= 1e-3);
    }

    #[test]
    fn gradient_matches_directional_finite_differences() {
        let grid = Grid::new(1, 40.0, 512).unwrap();
        let model = ModelProblem::new(
            grid,
            FracOrder::new(0.5).unwrap(),
            Potential::Constant { value: 1.0 },
            Nonlinearity::pure_power(2.0).unwrap(),
            false,
        );
        let u = band_limited(&grid, 7, 6).scaled(0.5);
        let g = gradient(&model, &u);
        let delta = 1e-4;
        for seed in 0..20 {
            let v = band_limited(&grid, 100 + seed, 6);
            let mut up = u.clone();
            up.add_scaled(&v, delta);
            let mut um = u.clone();
            um.add_scaled(&v, -delta);
            let fd = (energy(&model, &up).total - energy(&model, &um).total) / (2.0 * delta);
            let dj = integrate_product(&g, &v);
            assert_relative_eq!(fd, dj, max_relative = 1e-6);
        }
    }

    /// `G(u) = int u g(u)` exactly in the discrete system.
    #[test]
    fn residual_is_gradient_pairing() {
        let grid = Grid::new(1, 30.0, 256).unwrap();
        let model = ModelProblem::new(
            grid,
            FracOrder::new(0.4).unwrap(),
            Potential::Well { base: 2.0, depth: 0.5, width: 2.0 },
            Nonlinearity::pure_power(2.5).unwrap(),
            false,
        );
        let u = band_limited(&grid, 3, 5);
        let lhs = integrate_product(&u, &gradient(&model, &u));
        let rhs = nehari_residual(&model, &u);
        assert_relative_eq!(lhs, rhs, max_relative = 1e-10);
    }

    /// `J(u) - (1/2) DJ(u)u = (1/2 - 1/mu) int f(x,u) u` for the power family.
    #[test]
    fn mountain_pass_identity() {
        let (model, u) = benchmark();
        let e = energy(&model, &u);
        let mu = model.nonlinearity().mu();
        let lhs = e.total - 0.5 * nehari_residual(&model, &u);
        let rhs = (0.5 - 1.0 / mu) * model.power_integral(&u);
        assert_relative_eq!(lhs, rhs, max_relative = 1e-10);
    }

    #[test]
    fn benchmark_nehari_residual_is_zero() {
        let (model, u) = benchmark();
        let g = nehari_residual(&model, &u);
        assert!(g.abs() <= 1e-3 * e_norm_sq(&model, &u));
    }

    #[test]
    fn residual_signs_off_the_manifold() {
        let (model, _) = benchmark();
        let bump = Field::from_fn(model.grid(), |[x, _]| (-x * x / 4.0).exp());
        // tiny amplitude: quadratic term dominates, G > 0
        assert!(nehari_residual(&model, &bump.scaled(1e-6)) > 0.0);
        // large amplitude: superquadratic term dominates, G < 0
        assert!(nehari_residual(&model, &bump.scaled(50.0)) < 0.0);
    }

    #[test]
    fn potential_part_nonnegative_under_v1() {
        let (model, u) = benchmark();
        let e = energy(&model, &u);
        assert!(e.kinetic >= 0.0);
        assert!(e.potential >= 0.0);
    }

    #[test]
    fn deterministic_fields_reproduce() {
        let grid = Grid::new(1, 40.0, 128).unwrap();
        let a = band_limited(&grid, 42, 4);
        let b = band_limited(&grid, 42, 4);
        assert_eq!(a.values(), b.values());
    }
}

use std::time::Instant;

use fracground::energy::energy;
use fracground::fraclap::FracOrder;
use fracground::grid::{Field, Grid};
use fracground::model::{ModelProblem, Nonlinearity, Potential};
use fracground::solver::{solve_ground_state, SolverConfig};
use fracground::verify::{decay_slope, default_decay_window};

fn main() {
    let grid = Grid::new(1, 160.0, 8192).unwrap();
    let model = ModelProblem::new(
        grid,
        FracOrder::new(0.5).unwrap(),
        Potential::Constant { value: 1.0 },
        Nonlinearity::pure_power(2.0).unwrap(),
        false,
    );
    let t = Instant::now();
    let gs = solve_ground_state(&model, &SolverConfig::default()).unwrap();
    println!(
        "solve: {:?}  iters {}  converged {}  level {:.9}  grad {:.2e}",
        t.elapsed(),
        gs.iters,
        gs.converged,
        gs.level,
        gs.grad_norm
    );
    let e = energy(&model, &gs.u);
    println!("parts: K2={:.6} P2={:.6} F={:.6}", e.kinetic, e.potential, e.nonlinear);
    let w = default_decay_window(&grid);
    println!("window = {:?}", w);
    let centered = fracground::solver::center_peak(&gs.u);
    println!("slope(computed gs, centered) = {:?}", decay_slope(&centered, w));
    let exact = Field::from_fn(&grid, |[x, _]| 2.0 / (1.0 + x * x));
    println!("slope(sampled u*)  = {:?}", decay_slope(&exact, w));
    let synth = Field::from_fn(&grid, |[x, _]: [f64; 2]| (1.0 + x.abs()).powi(-3));
    println!("slope(synthetic -3) = {:?}", decay_slope(&synth, w));
    print_tail(&centered, &grid);
}

#[allow(dead_code)]
fn print_tail(gs: &fracground::grid::Field<f64>, grid: &fracground::grid::Grid<f64>) {
    for &x_target in &[10.0, 15.0, 20.0, 25.0, 30.0, 36.0, 45.0, 60.0, 75.0] {
        let j = ((x_target + 80.0) / grid.spacing()).round() as usize;
        let x = grid.coord(j);
        let exact = 2.0 / (1.0 + x * x);
        println!("x = {x:6.2}: computed {:.6e}  exact u* {:.6e}  ratio {:.3}", gs.values()[j], exact, gs.values()[j] / exact);
    }
}

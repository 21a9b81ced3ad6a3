use fracground::evolve::{energy_of_wave, split_step, WaveState};
use fracground::fraclap::FracOrder;
use fracground::grid::Grid;
use fracground::model::{ModelProblem, Nonlinearity, Potential};
use fracground::solver::{solve_ground_state, SolverConfig};

fn main() {
    let grid = Grid::new(1, 160.0, 8192).unwrap();
    let model = ModelProblem::new(
        grid,
        FracOrder::new(0.5).unwrap(),
        Potential::Constant { value: 1.0 },
        Nonlinearity::pure_power(2.0).unwrap(),
        false,
    );
    let gs = solve_ground_state(&model, &SolverConfig::default()).unwrap();
    println!("gs converged {} level {:.9}", gs.converged, gs.level);
    let psi0 = WaveState::from_field(&gs.u);
    let e0 = energy_of_wave(&model, &psi0);

    // modulus drift over t in [0, 10] at dt = 1e-3 (chunks of 100)
    let mut state = psi0.clone();
    let sup = gs.u.max_abs();
    let mut worst: f64 = 0.0;
    let mut worst_mass: f64 = 0.0;
    let m0: f64 = state.mass();
    let mut last_m = m0;
    for _ in 0..100 {
        let (next, diag) = split_step(&model, &state, 1e-3, 100).unwrap();
        for m in &diag.masses {
            let step: f64 = (m - last_m).abs();
            worst_mass = worst_mass.max(step / m0);
            last_m = *m;
        }
        let modulus = next.modulus();
        let dev = modulus
            .values()
            .iter()
            .zip(gs.u.values())
            .map(|(&a, &b): (&f64, &f64)| (a - b).abs())
            .fold(0.0_f64, f64::max);
        worst = worst.max(dev / sup);
        state = next;
    }
    println!("modulus drift over [0,10]: {worst:.3e}   worst mass step: {worst_mass:.3e}");

    // energy drift ratio dt vs dt/2 over T = 2
    let drift = |dt: f64, steps: usize| -> f64 {
        let (_, diag) = split_step(&model, &psi0, dt, steps).unwrap();
        diag.energies.iter().map(|e| (e - e0).abs()).fold(0.0_f64, f64::max)
    };
    let d1 = drift(1e-3, 2000);
    let d2 = drift(5e-4, 4000);
    println!("standing-state drift: d(1e-3) = {d1:.3e}  d(5e-4) = {d2:.3e}  ratio = {:.3}", d1 / d2);
    println!("rel drift at dt=1e-3: {:.3e}", d1 / e0.abs());

    // same on an off-equilibrium state
    let psi_off = WaveState::from_field(&gs.u.scaled(0.9));
    let e0_off = energy_of_wave(&model, &psi_off);
    let drift_off = |dt: f64, steps: usize| -> f64 {
        let (_, diag) = split_step(&model, &psi_off, dt, steps).unwrap();
        diag.energies.iter().map(|e| (e - e0_off).abs()).fold(0.0_f64, f64::max)
    };
    let d1o = drift_off(1e-3, 2000);
    let d2o = drift_off(5e-4, 4000);
    println!("off-equilibrium drift: d(1e-3) = {d1o:.3e}  d(5e-4) = {d2o:.3e}  ratio = {:.3}", d1o / d2o);
}

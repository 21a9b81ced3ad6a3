//! Split-step Fourier integration of the time-dependent equation
//!
//! ```text
//!   i d(psi)/dt = (-Delta)^s psi + V(x) psi - a(x) |psi|^{p-1} psi,
//! ```
//!
//! used to verify the standing-wave ansatz against computed ground states
//! (the stationary equation absorbs the wave frequency into `V`, so a ground
//! state evolves with zero phase).
//!
//! Strang splitting: a half-step of the pointwise flow (exact phase rotation
//! by `(V - a |psi|^{p-1}) dt/2`, modulus preserving), a full spectral step
//! `e^{-i |xi|^{2s} dt}` (exact), then the second pointwise half-step. Both
//! substeps preserve the discrete mass exactly, and each is invertible, so
//! the scheme is time-reversible and second order.

use num_complex::Complex;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::fraclap::hs_seminorm_sq_spectral;
use crate::grid::{
    inverse_transform_complex, transform_complex, Field, Grid, SpectralField,
};
use crate::model::ModelProblem;
use crate::scalar::{kahan_sum, real, Real};

/// Complex wave on a grid at a point in time.
#[derive(Clone, Debug)]
pub struct WaveState<T: Real = f64> {
    grid: Grid<T>,
    psi: Vec<Complex<T>>,
    time: T,
}

impl<T: Real> WaveState<T> {
    /// Start from a real field at `t = 0`.
    pub fn from_field(u: &Field<T>) -> Self {
        WaveState {
            grid: *u.grid(),
            psi: u.values().iter().map(|&v| Complex::new(v, T::zero())).collect(),
            time: T::zero(),
        }
    }

    pub fn from_parts(grid: Grid<T>, psi: Vec<Complex<T>>, time: T) -> Result<Self> {
        if psi.len() != grid.len() {
            return Err(Error::InvalidInput(format!(
                "expected {} samples, got {}",
                grid.len(),
                psi.len()
            )));
        }
        Ok(WaveState { grid, psi, time })
    }

    pub fn grid(&self) -> &Grid<T> {
        &self.grid
    }

    pub fn psi(&self) -> &[Complex<T>] {
        &self.psi
    }

    pub fn time(&self) -> T {
        self.time
    }

    /// `int |psi|^2`.
    pub fn mass(&self) -> T {
        kahan_sum(self.psi.iter().map(|c| c.norm_sqr())) * self.grid.cell_volume()
    }

    /// Pointwise modulus as a real field.
    pub fn modulus(&self) -> Field<T> {
        let values = self.psi.iter().map(|c| c.norm()).collect();
        Field::from_values(&self.grid, values).expect("modulus is finite")
    }

    pub fn max_abs(&self) -> T {
        self.psi.iter().fold(T::zero(), |m, c| m.max(c.norm()))
    }
}

/// Per-step diagnostics tracked along a trajectory.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct EvolveDiagnostics<T: Real = f64> {
    pub times: Vec<T>,
    pub masses: Vec<T>,
    pub energies: Vec<T>,
}

/// Conserved Hamiltonian of the flow:
/// `1/2 int |xi|^{2s} |psi_hat|^2 + 1/2 int V |psi|^2 - int F(|psi|)`.
/// Depends on the modulus only, so it is invariant under global phases.
pub fn energy_of_wave<T: Real>(model: &ModelProblem<T>, psi: &WaveState<T>) -> T {
    assert_eq!(*psi.grid(), *model.grid(), "wave grid does not match model grid");
    let half = real::<T>(0.5);
    let coeffs = transform_complex(&psi.grid, &psi.psi);
    let w = SpectralField::from_coeffs(&psi.grid, coeffs).expect("layout");
    let kinetic = half * hs_seminorm_sq_spectral(&w, model.order());
    let hn = psi.grid.cell_volume();
    let potential = half
        * hn
        * kahan_sum(
            psi.psi
                .iter()
                .zip(model.potential_samples())
                .map(|(c, &v)| v * c.norm_sqr()),
        );
    let nonlinear = hn * kahan_sum(psi.psi.iter().map(|c| c.norm())
        .zip(model.weight_samples())
        .map(|(m, &a)| {
            let p1 = model.nonlinearity().exponent() + T::one();
            a * m.powf(p1) / p1
        }));
    kinetic + potential - nonlinear
}

/// Advance `steps` Strang steps of size `dt` (negative `dt` runs backwards).
/// Aborts if `max |psi|` grows a thousandfold (blow-up guard). Diagnostics
/// carry `(t, mass, energy)` after every step.
pub fn split_step<T: Real>(
    model: &ModelProblem<T>,
    state: &WaveState<T>,
    dt: T,
    steps: usize,
) -> Result<(WaveState<T>, EvolveDiagnostics<T>)> {
    split_step_with_guard(model, state, dt, steps, real(1e3))
}

/// Guard factor exposed for tests: mass conservation caps the reachable
/// concentration on desk-scale grids well below the production 1e3.
pub(crate) fn split_step_with_guard<T: Real>(
    model: &ModelProblem<T>,
    state: &WaveState<T>,
    dt: T,
    steps: usize,
    guard_factor: T,
) -> Result<(WaveState<T>, EvolveDiagnostics<T>)> {
    assert_eq!(*state.grid(), *model.grid(), "wave grid does not match model grid");
    if dt == T::zero() || !dt.is_finite() {
        return Err(Error::InvalidInput("dt must be nonzero and finite".into()));
    }
    let grid = state.grid;
    let p_minus_1 = model.nonlinearity().exponent() - T::one();
    let half_dt = dt * real::<T>(0.5);
    let guard = state.max_abs() * guard_factor;

    // spectral multiplier e^{-i |xi|^{2s} dt}
    let two_s = real::<T>(2.0) * model.order().get();
    let spectral_phase: Vec<Complex<T>> = (0..grid.len())
        .map(|flat| {
            let w = grid.freq_norm(flat).powf(two_s) * dt;
            Complex::new(w.cos(), -w.sin())
        })
        .collect();

    let pointwise_half = |psi: &mut [Complex<T>]| {
        for (c, (&v, &a)) in psi
            .iter_mut()
            .zip(model.potential_samples().iter().zip(model.weight_samples()))
        {
            let amp = c.norm();
            let phase = (v - a * amp.powf(p_minus_1)) * half_dt;
            *c = *c * Complex::new(phase.cos(), -phase.sin());
        }
    };

    let mut psi = state.psi.clone();
    let mut time = state.time;
    let mut diagnostics = EvolveDiagnostics {
        times: Vec::with_capacity(steps),
        masses: Vec::with_capacity(steps),
        energies: Vec::with_capacity(steps),
    };

    for _ in 0..steps {
        pointwise_half(&mut psi);
        let mut coeffs = transform_complex(&grid, &psi);
        for (c, m) in coeffs.iter_mut().zip(&spectral_phase) {
            *c = *c * *m;
        }
        psi = inverse_transform_complex(&grid, &coeffs);
        pointwise_half(&mut psi);
        time = time + dt;

        let current = WaveState { grid, psi: psi.clone(), time };
        if current.max_abs() > guard {
            return Err(Error::BlowUp(format!(
                "max |psi| exceeded {guard_factor} times its initial value at t = {time}"
            )));
        }
        diagnostics.times.push(time);
        diagnostics.masses.push(current.mass());
        diagnostics.energies.push(energy_of_wave(model, &current));
        psi = current.psi;
    }

    Ok((WaveState { grid, psi, time }, diagnostics))
}

/// Write trajectory snapshot rows `x,re(psi),im(psi)`.
pub fn write_snapshot_csv<T: Real>(
    psi: &WaveState<T>,
    out: &mut impl std::io::Write,
) -> Result<()> {
    let g = psi.grid;
    writeln!(out, "# grid: dim={} L={} M={} t={}", g.dim(), g.extent(), g.points(), psi.time)?;
    for (flat, c) in psi.psi.iter().enumerate() {
        let [x, y] = g.site(flat);
        if g.dim() == 2 {
            writeln!(out, "{:.16e},{:.16e},{:.16e},{:.16e}", x, y, c.re, c.im)?;
        } else {
            writeln!(out, "{:.16e},{:.16e},{:.16e}", x, c.re, c.im)?;
        }
    }
    Ok(())
}

/// Write diagnostics rows `t,mass,energy`.
pub fn write_diagnostics_csv<T: Real>(
    diag: &EvolveDiagnostics<T>,
    out: &mut impl std::io::Write,
) -> Result<()> {
    writeln!(out, "t,mass,energy")?;
    for ((t, m), e) in diag.times.iter().zip(&diag.masses).zip(&diag.energies) {
        writeln!(out, "{:.16e},{:.16e},{:.16e}", t, m, e)?;
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fraclap::FracOrder;
    use crate::model::{Nonlinearity, Potential};
    use approx::assert_relative_eq;
    use std::f64::consts::PI;

    fn model_with(l: f64, m: usize, v: f64, weight: f64) -> ModelProblem<f64> {
        ModelProblem::new(
            Grid::new(1, l, m).unwrap(),
            FracOrder::new(0.5).unwrap(),
            Potential::Constant { value: v },
            Nonlinearity::new(2.0, Potential::Constant { value: weight }).unwrap(),
            false,
        )
    }

    #[test]
    fn linear_flow_diagonalizes_on_single_mode() {
        // V = 0 violates (V1) but the integrator itself has no such
        // precondition; with zero nonlinear weight the flow is exactly
        // psi(t) = e^{-i |xi_k|^{2s} t} psi0
        let model = model_with(2.0 * PI, 64, 0.0, 0.0);
        let grid = *model.grid();
        let k = 3.0;
        let psi0 = WaveState::from_field(&Field::from_fn(&grid, |[x, _]| (k * x).cos()));
        let dt = 1e-2;
        let steps = 100;
        let (out, _) = split_step(&model, &psi0, dt, steps).unwrap();
        let t = dt * steps as f64;
        let omega = k; // |xi|^{2s} = |k| at s = 1/2
        for (flat, c) in out.psi().iter().enumerate() {
            let [x, _] = grid.site(flat);
            let expect = Complex::new((k * x).cos(), 0.0)
                * Complex::new((omega * t).cos(), -(omega * t).sin());
            assert!((c - expect).norm() < 1e-10);
        }
    }

    /// The sampled continuum solution is stationary only up to its
    /// truncation defect (the gradient residual ~1.6e-3 at L = 160), so its
    /// modulus drifts at that level; the sharp 1e-5 check lives in the
    /// acceptance suite where the initial state is a computed ground state
    /// (a genuine discrete stationary point).
    #[test]
    fn standing_wave_holds_shape() {
        let model = model_with(160.0, 2048, 1.0, 1.0);
        let grid = *model.grid();
        let exact = Field::from_fn(&grid, |[x, _]| 2.0 / (1.0 + x * x));
        let psi0 = WaveState::from_field(&exact);
        let sup = exact.max_abs();
        let mut state = psi0;
        let dt = 1e-3;
        let mut worst: f64 = 0.0;
        for _ in 0..10 {
            let (next, _) = split_step(&model, &state, dt, 100).unwrap();
            let modulus = next.modulus();
            let dev = modulus
                .values()
                .iter()
                .zip(exact.values())
                .map(|(&a, &b)| (a - b).abs())
                .fold(0.0_f64, f64::max);
            worst = worst.max(dev / sup);
            state = next;
        }
        assert!(worst <= 3e-4, "modulus drift {worst}");
    }

    #[test]
    fn mass_is_conserved_to_roundoff() {
        let model = model_with(80.0, 1024, 1.0, 1.0);
        let grid = *model.grid();
        let psi0 = WaveState::from_field(&Field::from_fn(&grid, |[x, _]| {
            (-x * x / 10.0).exp() * (1.0 + 0.1 * x.sin())
        }));
        let m0 = psi0.mass();
        let (_, diag) = split_step(&model, &psi0, 1e-3, 200).unwrap();
        for m in &diag.masses {
            assert!((m - m0).abs() <= 1e-12 * m0, "mass drift {}", (m - m0).abs() / m0);
        }
    }

    #[test]
    fn phase_invariance_of_energy() {
        let model = model_with(80.0, 512, 1.0, 1.0);
        let grid = *model.grid();
        let u = Field::from_fn(&grid, |[x, _]: [f64; 2]| (-x * x / 8.0).exp());
        let psi = WaveState::from_field(&u);
        let alpha: f64 = 0.73;
        let rotated = WaveState::from_parts(
            grid,
            psi.psi().iter().map(|c| c * Complex::new(alpha.cos(), alpha.sin())).collect(),
            0.0,
        )
        .unwrap();
        let e1 = energy_of_wave(&model, &psi);
        let e2 = energy_of_wave(&model, &rotated);
        assert_relative_eq!(e1, e2, max_relative = 1e-14);
        // real ground-state-like field: energy matches the static functional
        let breakdown = crate::energy::energy(&model, &u);
        assert_relative_eq!(e1, breakdown.total, max_relative = 1e-12);
    }

    #[test]
    fn time_reversal_returns_initial_state() {
        let model = model_with(80.0, 512, 1.0, 1.0);
        let grid = *model.grid();
        let psi0 = WaveState::from_field(&Field::from_fn(&grid, |[x, _]| {
            2.0 / (1.0 + x * x) + 0.05 * (0.3 * x).sin()
        }));
        let dt = 1e-2;
        let (fwd, _) = split_step(&model, &psi0, dt, 50).unwrap();
        let (back, _) = split_step(&model, &fwd, -dt, 50).unwrap();
        let scale = psi0.max_abs();
        for (a, b) in back.psi().iter().zip(psi0.psi()) {
            assert!((a - b).norm() <= 1e-10 * scale);
        }
    }

    #[test]
    fn strang_energy_drift_is_second_order() {
        let model = model_with(80.0, 1024, 1.0, 1.0);
        let grid = *model.grid();
        // off-equilibrium data so the splitting error is visible
        let psi0 = WaveState::from_field(
            &Field::from_fn(&grid, |[x, _]: [f64; 2]| 1.8 / (1.0 + x * x)),
        );
        let e0 = energy_of_wave(&model, &psi0);
        let drift = |dt: f64, steps: usize| -> f64 {
            let (_, diag) = split_step(&model, &psi0, dt, steps).unwrap();
            diag.energies
                .iter()
                .map(|e| (e - e0).abs())
                .fold(0.0_f64, f64::max)
        };
        let d1 = drift(2e-3, 500);
        let d2 = drift(1e-3, 1000);
        let ratio = d1 / d2;
        assert!(
            (3.5..=4.5).contains(&ratio),
            "drift ratio {ratio} (drifts {d1:.3e}, {d2:.3e})"
        );
    }

    #[test]
    fn blow_up_guard_triggers_on_supercritical_collapse() {
        // p = 4 > 1 + 4s/N = 3: mass-supercritical focusing concentrates
        // until the guard fires (tested at a desk-scale guard factor; the
        // production factor 1e3 exceeds what mass conservation allows on a
        // grid this size)
        let model = ModelProblem::new(
            Grid::new(1, 20.0, 512).unwrap(),
            FracOrder::new(0.5).unwrap(),
            Potential::Constant { value: 1.0 },
            Nonlinearity::pure_power(4.0).unwrap(),
            false,
        );
        let grid = *model.grid();
        let psi0 = WaveState::from_field(&Field::from_fn(&grid, |[x, _]: [f64; 2]| {
            3.0 * (-x * x).exp()
        }));
        let result = split_step_with_guard(&model, &psi0, 1e-3, 4000, 2.0);
        assert!(matches!(result, Err(Error::BlowUp(_))));
    }

    #[test]
    fn snapshot_and_diagnostics_csv_format() {
        let model = model_with(20.0, 64, 1.0, 1.0);
        let grid = *model.grid();
        let psi = WaveState::from_field(&Field::from_fn(&grid, |[x, _]: [f64; 2]| {
            (-x * x).exp()
        }));
        let mut buf = Vec::new();
        write_snapshot_csv(&psi, &mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        assert!(text.starts_with("# grid: dim=1 L=20 M=64 t=0\n"));
        assert_eq!(text.lines().count(), 65);
        assert_eq!(text.lines().nth(1).unwrap().split(',').count(), 3);

        let (_, diag) = split_step(&model, &psi, 1e-2, 3).unwrap();
        let mut buf = Vec::new();
        write_diagnostics_csv(&diag, &mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        assert!(text.starts_with("t,mass,energy\n"));
        assert_eq!(text.lines().count(), 4);
    }
}

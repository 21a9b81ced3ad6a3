//! Numerical verification of the variational identities and inequalities on
//! computed or supplied fields: the Pohozaev identity, tail decay rate,
//! Gagliardo-Nirenberg and commutator constants, cutoff convergence, and
//! fibering/level consistency. Results are collected into a serializable
//! [`VerificationReport`].

use std::collections::BTreeMap;

use num_complex::Complex;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{Error, Result};
use crate::fraclap::{apply_fraclap, hs_seminorm_sq, FracOrder, SymbolPower};
use crate::grid::{
    integrate_product, inverse_transform, norm_l2, Field, Grid, SpectralField,
};
use crate::model::{ModelProblem, Potential};
use crate::nehari::project;
use crate::scalar::{real, Real};
use crate::solver::GroundState;

// ---------------------------------------------------------------------------
// Report plumbing
// ---------------------------------------------------------------------------

/// One named check: quantities, residual against tolerance, verdict.
/// `pass` is `None` when the check is informational (not applicable).
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct CheckRecord {
    pub name: String,
    pub inputs_digest: String,
    pub quantities: BTreeMap<String, f64>,
    pub residual: f64,
    pub tolerance: f64,
    pub pass: Option<bool>,
}

impl CheckRecord {
    pub fn new(name: &str, digest: String, residual: f64, tolerance: f64) -> Self {
        CheckRecord {
            name: name.to_string(),
            inputs_digest: digest,
            quantities: BTreeMap::new(),
            residual,
            tolerance,
            pass: Some(residual <= tolerance),
        }
    }

    pub fn with_quantity(mut self, key: &str, value: f64) -> Self {
        self.quantities.insert(key.to_string(), value);
        self
    }

    pub fn informational(mut self) -> Self {
        self.pass = None;
        self
    }

    pub fn passed(&self) -> bool {
        self.pass.unwrap_or(true)
    }
}

/// The report serialization schema: named checks plus model and version
/// metadata.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct VerificationReport {
    pub checks: Vec<CheckRecord>,
    pub model: BTreeMap<String, serde_json::Value>,
    pub versions: BTreeMap<String, String>,
}

impl VerificationReport {
    pub fn new(model: BTreeMap<String, serde_json::Value>) -> Self {
        let mut versions = BTreeMap::new();
        versions.insert("fracground".to_string(), env!("CARGO_PKG_VERSION").to_string());
        VerificationReport { checks: Vec::new(), model, versions }
    }

    pub fn all_pass(&self) -> bool {
        self.checks.iter().all(|c| c.passed())
    }
}

/// Digest of check inputs: field samples and scalar parameters, hashed in a
/// fixed byte order.
pub fn inputs_digest<T: Real>(fields: &[&Field<T>], params: &[f64]) -> String {
    let mut hasher = Sha256::new();
    for f in fields {
        for v in f.values() {
            hasher.update(v.to_f64().unwrap_or(f64::NAN).to_le_bytes());
        }
    }
    for p in params {
        hasher.update(p.to_le_bytes());
    }
    let out = hasher.finalize();
    hex::encode(&out[..8])
}

// ---------------------------------------------------------------------------
// Pohozaev identity
// ---------------------------------------------------------------------------

/// Parts and residual of the Pohozaev identity in split form:
/// `((N-2s)/2) K + (N/2) P = N int F(u)` for decaying solutions of the
/// autonomous equation, where `K` is the spectral seminorm and `P = int V u^2`.
#[derive(Clone, Copy, Debug, Serialize, Deserialize)]
pub struct PohozaevParts<T: Real = f64> {
    /// `((N-2s)/2) K`
    pub kinetic_part: T,
    /// `(N/2) P`
    pub potential_part: T,
    /// `N int F(u)`
    pub nonlinear_part: T,
    /// `kinetic_part + potential_part - nonlinear_part`
    pub residual: T,
}

/// Evaluate the split-form Pohozaev residual. Rejects non-constant `V`
/// (the identity is stated for the autonomous equation).
///
/// The compressed one-norm form `(N/2 - s) ||u||^2 = N int F` cannot hold
/// with the full `E^s` norm when `N = 2s` (the left side would vanish while
/// the right stays positive); the split form is the reading the exact
/// benchmark satisfies identically.
pub fn pohozaev_residual<T: Real>(
    model: &ModelProblem<T>,
    u: &Field<T>,
) -> Result<PohozaevParts<T>> {
    if !matches!(model.potential(), Potential::Constant { .. }) {
        return Err(Error::InvalidInput(
            "Pohozaev identity requires a constant potential".into(),
        ));
    }
    let n = real::<T>(model.grid().dim() as f64);
    let s = model.order().get();
    let two = real::<T>(2.0);
    let kinetic = hs_seminorm_sq(u, model.order());
    let potential = crate::energy::potential_quadratic(model, u);
    let big_f = model.power_integral(u) / model.nonlinearity().mu();
    let kinetic_part = (n - two * s) / two * kinetic;
    let potential_part = n / two * potential;
    let nonlinear_part = n * big_f;
    Ok(PohozaevParts {
        kinetic_part,
        potential_part,
        nonlinear_part,
        residual: kinetic_part + potential_part - nonlinear_part,
    })
}

// ---------------------------------------------------------------------------
// Tail decay
// ---------------------------------------------------------------------------

/// Default fitting window `[0.25, 0.45] * (L/2)`: beyond the core, short of
/// the periodic wrap.
pub fn default_decay_window<T: Real>(grid: &Grid<T>) -> (T, T) {
    let half = grid.extent() * real::<T>(0.5);
    (real::<T>(0.25) * half, real::<T>(0.45) * half)
}

/// Least-squares slope of `log u` against `log |x|` over the radial window.
/// 1D averages the two tail slopes; 2D fits the radial bin averages.
/// Rejects windows that touch the outer 5% wrap region and fields that are
/// not strictly positive on the window.
pub fn decay_slope<T: Real>(u: &Field<T>, window: (T, T)) -> Result<T> {
    let grid = *u.grid();
    let (r_lo, r_hi) = window;
    let half = grid.extent() * real::<T>(0.5);
    if !(T::zero() < r_lo && r_lo < r_hi) {
        return Err(Error::InvalidInput("decay window must satisfy 0 < r_lo < r_hi".into()));
    }
    if r_hi > real::<T>(0.95) * half {
        return Err(Error::InvalidInput(
            "decay window touches the periodic wrap region (outer 5%)".into(),
        ));
    }
    let fit = |pts: &[(T, T)]| -> Result<T> {
        if pts.len() < 3 {
            return Err(Error::InvalidInput("too few samples in decay window".into()));
        }
        let n = real::<T>(pts.len() as f64);
        let sx: T = pts.iter().map(|p| p.0).sum();
        let sy: T = pts.iter().map(|p| p.1).sum();
        let sxx: T = pts.iter().map(|p| p.0 * p.0).sum();
        let sxy: T = pts.iter().map(|p| p.0 * p.1).sum();
        Ok((n * sxy - sx * sy) / (n * sxx - sx * sx))
    };
    match grid.dim() {
        1 => {
            let mut left = Vec::new();
            let mut right = Vec::new();
            for (i, &v) in u.values().iter().enumerate() {
                let [x, _] = grid.site(i);
                let r = x.abs();
                if r >= r_lo && r <= r_hi {
                    if !(v > T::zero()) {
                        return Err(Error::InvalidInput(
                            "field is not strictly positive on the decay window".into(),
                        ));
                    }
                    let pt = (r.ln(), v.ln());
                    if x < T::zero() {
                        left.push(pt);
                    } else {
                        right.push(pt);
                    }
                }
            }
            Ok((fit(&left)? + fit(&right)?) * real::<T>(0.5))
        }
        _ => {
            // radial average over bins of one grid spacing
            let h = grid.spacing();
            let bins = ((r_hi - r_lo) / h).to_f64().unwrap_or(0.0).floor() as usize;
            if bins < 3 {
                return Err(Error::InvalidInput("decay window too narrow for radial bins".into()));
            }
            let mut sums = vec![(T::zero(), 0usize); bins];
            for (i, &v) in u.values().iter().enumerate() {
                let r = grid.radius(i);
                if r >= r_lo && r < r_hi {
                    if !(v > T::zero()) {
                        return Err(Error::InvalidInput(
                            "field is not strictly positive on the decay window".into(),
                        ));
                    }
                    let b = ((r - r_lo) / h).to_f64().unwrap_or(0.0).floor() as usize;
                    if b < bins {
                        sums[b].0 = sums[b].0 + v;
                        sums[b].1 += 1;
                    }
                }
            }
            let pts: Vec<(T, T)> = sums
                .iter()
                .enumerate()
                .filter(|(_, (_, n))| *n > 0)
                .map(|(b, (sum, n))| {
                    let r = r_lo + (real::<T>(b as f64) + real::<T>(0.5)) * h;
                    (r.ln(), (*sum / real::<T>(*n as f64)).ln())
                })
                .collect();
            fit(&pts)
        }
    }
}

// ---------------------------------------------------------------------------
// Inequality suites
// ---------------------------------------------------------------------------

/// Random band-limited field: independent unit-normal coefficients on the
/// modes `0 < |k|_inf <= kmax`, Hermitian-symmetrized, zero mean.
pub fn random_band_limited<T: Real>(grid: &Grid<T>, kmax: usize, seed: u64) -> Field<T> {
    use rand::Rng;
    use rand::SeedableRng;
    let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
    let m = grid.points();
    let mut coeffs = vec![Complex::new(T::zero(), T::zero()); grid.len()];
    let mut normal = || -> f64 {
        // Box-Muller
        let u1: f64 = rng.random_range(f64::EPSILON..1.0);
        let u2: f64 = rng.random_range(0.0..1.0);
        (-2.0 * u1.ln()).sqrt() * (2.0 * std::f64::consts::PI * u2).cos()
    };
    let in_band = |idx: usize| -> Option<i64> {
        let k = if idx < m / 2 { idx as i64 } else { idx as i64 - m as i64 };
        (k.unsigned_abs() as usize <= kmax).then_some(k)
    };
    let conj_index = |j: usize| (m - j) % m;
    match grid.dim() {
        1 => {
            for idx in 0..m {
                if let Some(k) = in_band(idx) {
                    if k > 0 {
                        let c = Complex::new(real::<T>(normal()), real::<T>(normal()));
                        coeffs[idx] = c;
                        coeffs[conj_index(idx)] = c.conj();
                    }
                }
            }
        }
        _ => {
            for ix in 0..m {
                for iy in 0..m {
                    let (kx, ky) = match (in_band(ix), in_band(iy)) {
                        (Some(a), Some(b)) => (a, b),
                        _ => continue,
                    };
                    // fill one representative per conjugate pair
                    if kx > 0 || (kx == 0 && ky > 0) {
                        let c = Complex::new(real::<T>(normal()), real::<T>(normal()));
                        coeffs[ix * m + iy] = c;
                        coeffs[conj_index(ix) * m + conj_index(iy)] = c.conj();
                    }
                    let _ = (kx, ky);
                }
            }
        }
    }
    // scale: unit-ish L2 norm for reproducible magnitudes
    let w = SpectralField::from_coeffs(grid, coeffs).expect("coefficient layout");
    let u = inverse_transform(&w);
    let n = norm_l2(&u);
    if n > T::zero() {
        u.scaled(T::one() / n)
    } else {
        u
    }
}

/// Seeded set of band-limited fields, seeds `seed, seed+1, ...`.
pub fn seeded_field_set<T: Real>(
    grid: &Grid<T>,
    count: usize,
    kmax: usize,
    seed: u64,
) -> Vec<Field<T>> {
    (0..count)
        .map(|i| random_band_limited(grid, kmax, seed.wrapping_add(i as u64)))
        .collect()
}

/// Gagliardo-Nirenberg empirical constant: max over the set of
/// `||u||_{q+1}^{q+1} / (||u||_{W^{s,2}}^e ||u||_2^{q+1-e})` with
/// `e = (q-1) N / (2s)`.
pub fn gn_check<T: Real>(fields: &[Field<T>], s: FracOrder<T>, q: T) -> Result<T> {
    if !(q > T::one()) {
        return Err(Error::InvalidInput("q must exceed 1".into()));
    }
    let mut max_ratio = T::zero();
    for u in fields {
        let n = real::<T>(u.grid().dim() as f64);
        let e = (q - T::one()) * n / (real::<T>(2.0) * s.get());
        if e > q + T::one() {
            return Err(Error::InvalidInput(
                "interpolation exponent exceeds q+1; check N, s, q".into(),
            ));
        }
        let mass = integrate_product(u, u);
        let sobolev = (mass + hs_seminorm_sq(u, s)).sqrt();
        let p1 = q + T::one();
        let lhs = crate::grid::integrate(&u.map(|v| v.abs().powf(p1)));
        let rhs = sobolev.powf(e) * mass.sqrt().powf(p1 - e);
        if rhs > T::zero() {
            max_ratio = max_ratio.max(lhs / rhs);
        }
    }
    Ok(max_ratio)
}

/// Quintic smoothstep cutoff profile: `1` on `t <= 1`, `0` on `t >= 2`.
pub fn cutoff_profile<T: Real>(t: T) -> T {
    if t <= T::one() {
        T::one()
    } else if t >= real(2.0) {
        T::zero()
    } else {
        let sigma = t - T::one();
        let s2 = sigma * sigma;
        let s3 = s2 * sigma;
        T::one()
            - (real::<T>(10.0) * s3 - real::<T>(15.0) * s3 * sigma
                + real::<T>(6.0) * s3 * s2)
    }
}

/// `chi_R u` with `chi_R(x) = chi(|x|/R)`.
pub fn apply_cutoff<T: Real>(u: &Field<T>, radius: T) -> Field<T> {
    let grid = *u.grid();
    let mut out = u.clone();
    for (i, v) in out.values_mut().iter_mut().enumerate() {
        *v = *v * cutoff_profile(grid.radius(i) / radius);
    }
    out
}

/// Seminorm distances `d(R) = ||(-Delta)^{s/2}(chi_R u - u)||_2` per radius:
/// nonincreasing in `R` and exactly zero once `chi_R = 1` on the whole box.
pub fn cutoff_convergence<T: Real>(u: &Field<T>, s: FracOrder<T>, radii: &[T]) -> Vec<T> {
    radii
        .iter()
        .map(|&r| {
            let mut diff = apply_cutoff(u, r);
            diff.add_scaled(u, -T::one());
            hs_seminorm_sq(&diff, s).sqrt()
        })
        .collect()
}

/// Seminorms of the truncations themselves, `||(-Delta)^{s/2}(chi_R u)||_2`:
/// vanishing as `R -> 0` in the regime `s < N/2`.
pub fn cutoff_seminorms<T: Real>(u: &Field<T>, s: FracOrder<T>, radii: &[T]) -> Vec<T> {
    radii
        .iter()
        .map(|&r| hs_seminorm_sq(&apply_cutoff(u, r), s).sqrt())
        .collect()
}

/// Empirical commutator norm: max over the set of
/// `||phi Lambda u - Lambda(phi u)||_2 / ||u||_{W^{s,2}}` with
/// `Lambda = (-Delta)^{s/2}`.
pub fn commutator_check<T: Real>(phi: &Field<T>, fields: &[Field<T>], s: FracOrder<T>) -> T {
    let mut worst = T::zero();
    for u in fields {
        let lambda_u = apply_fraclap(u, s, SymbolPower::Half);
        let mut pu = u.clone();
        for (a, &b) in pu.values_mut().iter_mut().zip(phi.values()) {
            *a = *a * b;
        }
        let lambda_pu = apply_fraclap(&pu, s, SymbolPower::Half);
        let mut comm = lambda_u;
        for (a, &b) in comm.values_mut().iter_mut().zip(phi.values()) {
            *a = *a * b;
        }
        comm.add_scaled(&lambda_pu, -T::one());
        let sobolev = (integrate_product(u, u) + hs_seminorm_sq(u, s)).sqrt();
        if sobolev > T::zero() {
            worst = worst.max(norm_l2(&comm) / sobolev);
        }
    }
    worst
}

// ---------------------------------------------------------------------------
// Level consistency
// ---------------------------------------------------------------------------

/// Fibering/level consistency of a converged ground state: `phi(u) = 1` and
/// the fiber maximum equals the level.
#[derive(Clone, Copy, Debug, Serialize, Deserialize)]
pub struct LevelConsistency<T: Real = f64> {
    pub phi_u: T,
    pub fiber_max: T,
    pub level: T,
    pub rel_err: T,
}

pub fn level_consistency<T: Real>(
    model: &ModelProblem<T>,
    gs: &GroundState<T>,
) -> Result<LevelConsistency<T>> {
    let r = project(model, &gs.u)?;
    let rel_err = (r.fiber_value - gs.level).abs() / gs.level.abs().max(T::min_positive_value());
    Ok(LevelConsistency { phi_u: r.t_star, fiber_max: r.fiber_value, level: gs.level, rel_err })
}

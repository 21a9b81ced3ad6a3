//! Run configuration: TOML with dotted keys, parse-then-validate, unknown
//! keys rejected. Every run writes the fully resolved configuration next to
//! its outputs so experiments can be replayed byte-for-byte.

use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::fraclap::FracOrder;
use crate::grid::Grid;
use crate::model::{ModelProblem, Nonlinearity, Potential};
use crate::solver::SolverConfig;

/// Full experiment configuration.
#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub model: ModelSection,
    #[serde(default)]
    pub solver: SolverSection,
    /// Top-level seed; per-start seeds derive as `seed + start_index`.
    #[serde(default)]
    pub seed: u64,
    /// Output directory (CLI `--out` takes precedence, `FRACGROUND_OUT` is
    /// the fallback).
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub out_dir: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub sweep: Option<SweepSection>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub sweep_eps: Option<SweepEpsSection>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub evolve: Option<EvolveSection>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub verify: Option<VerifySection>,
}

/// Model block: grid, order, potential, nonlinearity.
#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ModelSection {
    pub dim: usize,
    #[serde(rename = "L")]
    pub extent: f64,
    #[serde(rename = "M")]
    pub points: usize,
    pub s: f64,
    pub potential: PotentialSpec,
    pub p: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub weight: Option<PotentialSpec>,
    #[serde(default)]
    pub positive_mode: bool,
    /// When present and != 1, the potential is evaluated as `V(epsilon x)`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub epsilon: Option<f64>,
}

/// Potential specification: kind plus kind-specific params, in order.
///
/// - `constant`: `[value]`
/// - `well`: `[base, depth, width]`     (V = base - depth/(1+(r/width)^2))
/// - `bump`: `[base, height, width]`    (V = base + height exp(-r^2/2w^2))
/// - `coercive`: `[base, curvature]`    (V = base + curvature r^2)
#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PotentialSpec {
    pub kind: String,
    #[serde(default)]
    pub params: Vec<f64>,
}

impl PotentialSpec {
    pub fn build(&self) -> Result<Potential<f64>> {
        let need = |n: usize| -> Result<()> {
            if self.params.len() != n {
                return Err(Error::Config(format!(
                    "potential kind '{}' takes {n} params, got {}",
                    self.kind,
                    self.params.len()
                )));
            }
            Ok(())
        };
        match self.kind.as_str() {
            "constant" => {
                need(1)?;
                Ok(Potential::Constant { value: self.params[0] })
            }
            "well" => {
                need(3)?;
                Ok(Potential::Well {
                    base: self.params[0],
                    depth: self.params[1],
                    width: self.params[2],
                })
            }
            "bump" => {
                need(3)?;
                Ok(Potential::Bump {
                    base: self.params[0],
                    height: self.params[1],
                    width: self.params[2],
                })
            }
            "coercive" => {
                need(2)?;
                Ok(Potential::Coercive { base: self.params[0], curvature: self.params[1] })
            }
            other => Err(Error::Config(format!(
                "unknown potential kind '{other}' (expected constant, well, bump, coercive)"
            ))),
        }
    }
}

/// Solver block, mirroring [`SolverConfig`] defaults.
#[derive(Clone, Copy, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SolverSection {
    pub tol_grad: f64,
    pub tol_nehari: f64,
    pub max_iters: usize,
    pub step0: f64,
    pub backtrack: f64,
}

impl Default for SolverSection {
    fn default() -> Self {
        let c: SolverConfig<f64> = SolverConfig::default();
        SolverSection {
            tol_grad: c.tol_grad,
            tol_nehari: c.tol_nehari,
            max_iters: c.max_iters,
            step0: c.step0,
            backtrack: c.backtrack,
        }
    }
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SweepSection {
    pub shifts: Vec<f64>,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SweepEpsSection {
    pub epsilons: Vec<f64>,
}

#[derive(Clone, Copy, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct EvolveSection {
    pub dt: f64,
    pub steps: usize,
    /// Snapshot cadence in steps (0 = final state only).
    pub snapshot_every: usize,
}

impl Default for EvolveSection {
    fn default() -> Self {
        EvolveSection { dt: 1e-3, steps: 1000, snapshot_every: 0 }
    }
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct VerifySection {
    /// Which checks to run; defaults to all applicable.
    pub checks: Vec<String>,
    /// Sample-set size for the inequality suites.
    pub n_fields: usize,
    /// Band limit of the random sample fields.
    pub kmax: usize,
    /// Exponent `q` of the Gagliardo-Nirenberg check.
    pub q: f64,
    /// Radii for the cutoff-convergence check (defaults scale with the box).
    pub radii: Vec<f64>,
}

impl Default for VerifySection {
    fn default() -> Self {
        VerifySection {
            checks: vec![
                "pohozaev".into(),
                "decay".into(),
                "level".into(),
                "gn".into(),
                "cutoff".into(),
                "commutator".into(),
            ],
            n_fields: 1000,
            kmax: 16,
            q: 2.0,
            radii: Vec::new(),
        }
    }
}

impl RunConfig {
    /// Parse from TOML text, rejecting unknown keys with the offending span.
    pub fn parse(text: &str) -> Result<Self> {
        let config: RunConfig = toml::from_str(text).map_err(|e| Error::Config(e.to_string()))?;
        config.validate()?;
        Ok(config)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| Error::Config(format!("cannot read {}: {e}", path.display())))?;
        Self::parse(&text)
    }

    /// Structural validation beyond what the type system enforces.
    pub fn validate(&self) -> Result<()> {
        Grid::new(self.model.dim, self.model.extent, self.model.points)?;
        FracOrder::new(self.model.s).map_err(|e| Error::Config(e.to_string()))?;
        if !(self.model.p > 1.0) {
            return Err(Error::Config(format!("p must exceed 1, got {}", self.model.p)));
        }
        self.model.potential.build()?;
        if let Some(w) = &self.model.weight {
            w.build()?;
        }
        if let Some(eps) = self.model.epsilon {
            if !(eps > 0.0) {
                return Err(Error::Config(format!("epsilon must be positive, got {eps}")));
            }
        }
        self.solver_config().validate()?;
        if let Some(e) = &self.evolve {
            if !(e.dt > 0.0) || e.steps == 0 {
                return Err(Error::Config("evolve block needs dt > 0 and steps >= 1".into()));
            }
        }
        Ok(())
    }

    /// Build the model problem of the `model` block.
    pub fn build_model(&self) -> Result<ModelProblem<f64>> {
        let grid = Grid::new(self.model.dim, self.model.extent, self.model.points)?;
        let s = FracOrder::new(self.model.s)?;
        let mut potential = self.model.potential.build()?;
        if let Some(eps) = self.model.epsilon {
            if eps != 1.0 {
                potential = potential.rescaled(eps);
            }
        }
        let weight = match &self.model.weight {
            Some(spec) => spec.build()?,
            None => Potential::Constant { value: 1.0 },
        };
        let nonlinearity = Nonlinearity::new(self.model.p, weight)?;
        Ok(ModelProblem::new(grid, s, potential, nonlinearity, self.model.positive_mode))
    }

    pub fn solver_config(&self) -> SolverConfig<f64> {
        SolverConfig {
            tol_grad: self.solver.tol_grad,
            tol_nehari: self.solver.tol_nehari,
            max_iters: self.solver.max_iters,
            step0: self.solver.step0,
            backtrack: self.solver.backtrack,
            seed: self.seed,
        }
    }

    /// Serialize the fully resolved configuration (all defaults filled in).
    pub fn to_resolved_toml(&self) -> String {
        toml::to_string_pretty(self).expect("config serializes")
    }

    /// The built-in exact-solution benchmark configuration.
    pub fn benchmark_default() -> Self {
        RunConfig {
            model: ModelSection {
                dim: 1,
                extent: 160.0,
                points: 8192,
                s: 0.5,
                potential: PotentialSpec { kind: "constant".into(), params: vec![1.0] },
                p: 2.0,
                weight: None,
                positive_mode: false,
                epsilon: None,
            },
            solver: SolverSection::default(),
            seed: 0,
            out_dir: None,
            sweep: None,
            sweep_eps: None,
            evolve: None,
            verify: None,
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    const MINIMAL: &str = r#"
model.dim = 1
model.L = 40.0
model.M = 256
model.s = 0.5
model.potential.kind = "constant"
model.potential.params = [1.0]
model.p = 2.0
"#;

    #[test]
    fn parses_minimal_dotted_keys() {
        let config = RunConfig::parse(MINIMAL).unwrap();
        assert_eq!(config.model.points, 256);
        assert_eq!(config.solver.max_iters, 50_000);
        assert_eq!(config.seed, 0);
        let model = config.build_model().unwrap();
        assert_eq!(model.grid().points(), 256);
    }

    #[test]
    fn rejects_unknown_keys() {
        let bad = format!("{MINIMAL}\nmodel.unknown_key = 3\n");
        let err = RunConfig::parse(&bad).unwrap_err();
        assert!(err.to_string().contains("unknown_key"), "{err}");
    }

    #[test]
    fn rejects_bad_values_with_key_context() {
        let bad = MINIMAL.replace("model.M = 256", "model.M = 255");
        assert!(RunConfig::parse(&bad).is_err());
        let bad = MINIMAL.replace("model.s = 0.5", "model.s = 1.5");
        assert!(RunConfig::parse(&bad).is_err());
        let bad = MINIMAL.replace(
            "model.potential.kind = \"constant\"",
            "model.potential.kind = \"mystery\"",
        );
        assert!(RunConfig::parse(&bad).is_err());
        let bad = format!("{MINIMAL}\nsolver.backtrack = 1.5\n");
        assert!(RunConfig::parse(&bad).is_err());
    }

    #[test]
    fn epsilon_wraps_potential() {
        let text = format!("{MINIMAL}\nmodel.epsilon = 0.5\n");
        let config = RunConfig::parse(&text).unwrap();
        let model = config.build_model().unwrap();
        assert!(matches!(model.potential(), Potential::Rescaled { .. }));
        // epsilon = 1 is the identity
        let text = format!("{MINIMAL}\nmodel.epsilon = 1.0\n");
        let model = RunConfig::parse(&text).unwrap().build_model().unwrap();
        assert!(matches!(model.potential(), Potential::Constant { .. }));
    }

    #[test]
    fn resolved_round_trip_preserves_everything() {
        let mut config = RunConfig::parse(MINIMAL).unwrap();
        config.seed = 42;
        config.sweep = Some(SweepSection { shifts: vec![0.0, 0.5] });
        config.verify = Some(VerifySection::default());
        let resolved = config.to_resolved_toml();
        let back = RunConfig::parse(&resolved).unwrap();
        assert_eq!(back.seed, 42);
        assert_eq!(back.sweep.as_ref().unwrap().shifts, vec![0.0, 0.5]);
        assert_eq!(back.solver.tol_grad, config.solver.tol_grad);
        assert_eq!(back.to_resolved_toml(), resolved);
    }

    #[test]
    fn benchmark_default_is_valid() {
        let config = RunConfig::benchmark_default();
        config.validate().unwrap();
        assert_eq!(config.model.points, 8192);
    }
}

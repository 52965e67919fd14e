//! Run configuration: one JSON document naming a testbed, a sampler and the
//! tree settings. Presets carry the standard ladder for each testbed.

use std::path::Path;

use anyhow::{bail, Context};
use landtree::landscape::TreeConfig;
use landtree::metric::SpaceKind;
use landtree::samplers::{geometric_ladder, ChainSpec, SegmentModel, UNIFORM_DIRICHLET};
use landtree::testbeds::{build_t_data, reference_theta, simulate_sequence, Layered, SevenMode, TRUE_CHANGE_POINTS};
use landtree::{ClusterParams, EnergyFn, GradientFn};
use serde::{Deserialize, Serialize};

use crate::Invalid;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub testbed: Testbed,
    pub sampler: SamplerConfig,
    #[serde(default)]
    pub tree: TreeConfig,
    /// Temperatures at which `tree` annotates branch masses.
    #[serde(default)]
    pub mass_at: Vec<f64>,
    /// Master seed. Overrides every chain seed and the subsampling seed.
    pub seed: u64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case", deny_unknown_fields)]
pub enum Testbed {
    /// Posterior of a multivariate t location with the templated data.
    TPosterior {
        a: f64,
        a1: f64,
        a2: f64,
        a3: f64,
    },
    Layered,
    SevenMode,
    /// Change-point posterior of a nucleotide sequence, read from `file`
    /// or simulated.
    Dna {
        #[serde(default)]
        file: Option<String>,
        #[serde(default = "default_len")]
        len: u32,
        #[serde(default = "default_change_points")]
        change_points: Vec<u32>,
        #[serde(default = "reference_theta")]
        theta: Vec<[f64; 4]>,
        #[serde(default)]
        sequence_seed: u64,
        max_points: u32,
        #[serde(default = "default_dirichlet")]
        dirichlet: [f64; 4],
    },
}

fn default_len() -> u32 {
    1000
}

fn default_change_points() -> Vec<u32> {
    TRUE_CHANGE_POINTS.to_vec()
}

fn default_dirichlet() -> [f64; 4] {
    UNIFORM_DIRICHLET
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case", deny_unknown_fields)]
pub enum SamplerConfig {
    /// Parallel tempering over the listed rungs.
    Tempering { chains: Vec<ChainSpec>, swap_interval: usize },
    /// Independent tempered/truncated chains.
    Chains { chains: Vec<ChainSpec> },
    /// Exact change-point draws at each temperature.
    Dp { temperatures: Vec<f64>, draws: usize },
    /// Every segmentation once (small sequences only).
    Exhaustive,
}

impl RunConfig {
    pub fn load(path: &Path) -> anyhow::Result<Self> {
        let text = std::fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
        let cfg: RunConfig = serde_json::from_str(&text)
            .map_err(|e| Invalid(format!("{}:{}:{}: {e}", path.display(), e.line(), e.column())))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn preset(name: &str) -> anyhow::Result<Self> {
        let cfg = match name {
            "t-sym" => t_preset([4.0, 4.0, 4.0], (166.0, 220.0)),
            "t-asym" => t_preset([2.0, 3.0, 4.0], (160.0, 220.0)),
            "layered4d" => RunConfig {
                testbed: Testbed::Layered,
                sampler: SamplerConfig::Chains {
                    chains: (0..20u32)
                        .map(|k| ChainSpec {
                            chain_id: k,
                            temperature: 0.5,
                            truncation: Some(f64::from(k)),
                            steps: 55_000,
                            burn_in: 0.1,
                            sigma: 0.3,
                            seed: 4,
                            init: vec![0.0; 4],
                        })
                        .collect(),
                },
                tree: TreeConfig {
                    cluster: ClusterParams { interpolation: true, ..ClusterParams::default() },
                    ..TreeConfig::default()
                },
                mass_at: vec![0.5],
                seed: 4,
            },
            "seven2d" => RunConfig {
                testbed: Testbed::SevenMode,
                sampler: SamplerConfig::Tempering {
                    chains: geometric_ladder(1.0, 20.0, 10)
                        .into_iter()
                        .enumerate()
                        .map(|(k, t)| ChainSpec {
                            chain_id: k as u32,
                            temperature: t,
                            truncation: None,
                            steps: 22_500,
                            burn_in: 0.1,
                            sigma: 0.8 * t.sqrt(),
                            seed: 5,
                            init: vec![0.0, 0.0],
                        })
                        .collect(),
                    swap_interval: 10,
                },
                tree: TreeConfig::default(),
                mass_at: vec![1.0],
                seed: 5,
            },
            "dnaseg" => RunConfig {
                testbed: Testbed::Dna {
                    file: None,
                    len: 1000,
                    change_points: TRUE_CHANGE_POINTS.to_vec(),
                    theta: reference_theta(),
                    sequence_seed: 1,
                    max_points: 9,
                    dirichlet: UNIFORM_DIRICHLET,
                },
                sampler: SamplerConfig::Dp { temperatures: geometric_ladder(0.5, 2.0, 10), draws: 50_000 },
                tree: TreeConfig { levels: 100, ..TreeConfig::default() },
                mass_at: vec![1.0],
                seed: 1,
            },
            other => return Err(Invalid(format!("unknown preset `{other}`")).into()),
        };
        Ok(cfg)
    }

    pub fn validate(&self) -> anyhow::Result<()> {
        let chains = match &self.sampler {
            SamplerConfig::Tempering { chains, swap_interval } => {
                if *swap_interval == 0 {
                    return Err(Invalid("swap_interval must be positive".into()).into());
                }
                chains.as_slice()
            }
            SamplerConfig::Chains { chains } => chains.as_slice(),
            SamplerConfig::Dp { temperatures, draws } => {
                if temperatures.is_empty() || temperatures.iter().any(|t| !(*t > 0.0)) || *draws == 0 {
                    return Err(Invalid("dp sampler needs positive temperatures and draws".into()).into());
                }
                &[]
            }
            SamplerConfig::Exhaustive => &[],
        };
        let continuous = !matches!(self.testbed, Testbed::Dna { .. });
        let chain_sampler = matches!(self.sampler, SamplerConfig::Tempering { .. } | SamplerConfig::Chains { .. });
        if continuous != chain_sampler {
            return Err(Invalid("chain samplers need a continuous testbed; dp and exhaustive need dna".into()).into());
        }
        if chain_sampler && chains.is_empty() {
            return Err(Invalid("sampler lists no chains".into()).into());
        }
        for c in chains {
            c.validate().map_err(|e| Invalid(format!("chain {}: {e}", c.chain_id)))?;
        }
        if !(self.tree.subsample > 0.0 && self.tree.subsample <= 1.0) {
            return Err(Invalid("tree.subsample must lie in (0, 1]".into()).into());
        }
        if self.tree.levels == 0 {
            return Err(Invalid("tree.levels must be positive".into()).into());
        }
        self.tree.cluster.validate().map_err(|e| Invalid(e.to_string()))?;
        if self.mass_at.iter().any(|t| !(*t > 0.0)) {
            return Err(Invalid("mass_at temperatures must be positive".into()).into());
        }
        Ok(())
    }

    /// Applies the master seed to every seeded component.
    pub fn reseed(&mut self, seed: u64) {
        self.seed = seed;
        self.tree.seed = seed;
        match &mut self.sampler {
            SamplerConfig::Tempering { chains, .. } | SamplerConfig::Chains { chains } => {
                for c in chains {
                    c.seed = seed;
                }
            }
            _ => {}
        }
    }
}

fn t_preset(a: [f64; 3], truncation: (f64, f64)) -> RunConfig {
    let data = build_t_data(40.0, a[0], a[1], a[2]).expect("preset constants are valid");
    RunConfig {
        testbed: Testbed::TPosterior { a: 40.0, a1: a[0], a2: a[1], a3: a[2] },
        sampler: SamplerConfig::Tempering { chains: data.ladder(220_000, truncation, 7), swap_interval: 10 },
        tree: TreeConfig { levels: 50, subsample: 0.2, seed: 7, ..TreeConfig::default() },
        mass_at: vec![1.0],
        seed: 7,
    }
}

/// A testbed made concrete.
pub enum Built {
    Continuous { energy: Box<dyn GradientFn>, space: SpaceKind },
    Discrete { model: SegmentModel, space: SpaceKind },
}

impl Testbed {
    pub fn build(&self) -> anyhow::Result<Built> {
        Ok(match self {
            Testbed::TPosterior { a, a1, a2, a3 } => {
                let data = build_t_data(*a, *a1, *a2, *a3).map_err(|e| Invalid(e.to_string()))?;
                let space = data.space();
                Built::Continuous { energy: Box::new(data), space }
            }
            Testbed::Layered => Built::Continuous { energy: Box::new(Numeric(Layered)), space: Layered::space() },
            Testbed::SevenMode => Built::Continuous { energy: Box::new(Numeric(SevenMode)), space: SevenMode::space() },
            Testbed::Dna { file, len, change_points, theta, sequence_seed, max_points, dirichlet } => {
                let seq = match file {
                    Some(path) => {
                        let text = std::fs::read_to_string(path).with_context(|| format!("reading {path}"))?;
                        landtree::samplers::parse_sequence(&text).map_err(|e| Invalid(format!("{path}: {e}")))?
                    }
                    None => simulate_sequence(*len, change_points, theta, *sequence_seed)
                        .map_err(|e| Invalid(e.to_string()))?,
                };
                let n = seq.len() as u32;
                let model = SegmentModel::new(seq, *max_points, *dirichlet).map_err(|e| Invalid(e.to_string()))?;
                let space = SpaceKind::segmentation(n, *max_points).map_err(|e| Invalid(e.to_string()))?;
                Built::Discrete { model, space }
            }
        })
    }
}

/// Central-difference gradient for energies without an analytic one.
struct Numeric<E>(E);

impl<E: EnergyFn> EnergyFn for Numeric<E> {
    fn energy(&self, x: &[f64]) -> f64 {
        self.0.energy(x)
    }
}

impl<E: EnergyFn> GradientFn for Numeric<E> {
    fn energy_grad(&self, x: &[f64], grad: &mut [f64]) -> f64 {
        let mut y = x.to_vec();
        for k in 0..x.len() {
            let h = 1e-6 * x[k].abs().max(1.0);
            y[k] = x[k] + h;
            let up = self.0.energy(&y);
            y[k] = x[k] - h;
            let down = self.0.energy(&y);
            y[k] = x[k];
            grad[k] = (up - down) / (2.0 * h);
        }
        self.0.energy(x)
    }
}

pub fn require_file(path: &Path) -> anyhow::Result<()> {
    if !path.exists() {
        bail!(Invalid(format!("{} does not exist", path.display())));
    }
    Ok(())
}

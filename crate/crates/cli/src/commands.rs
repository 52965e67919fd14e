use std::fs::File;
use std::io::{BufReader, BufWriter, Write};
use std::path::Path;
use std::time::Instant;

use anyhow::Context;
use landtree::landscape::reconstruct;
use landtree::metric::SpaceKind;
use landtree::model::{build_energy_grid, read_samples, write_samples};
use landtree::samplers::{dp_ladder_samples, metropolis_chain, parallel_tempering, DpLadder, SegmentModel};
use landtree::testbeds::{
    enumerate_segmentations, exhaustive_tree_oracle, gradient_descent, grid_tree_oracle, neighbor_descent,
    pairwise_barrier_approx, seven_mode_energy, verify_local_minimum, DescentOptions,
};
use landtree::{EnergyFn, Exec, LandscapeTree, Sample, State};
use serde::Serialize;

use crate::config::{require_file, Built, RunConfig, SamplerConfig, Testbed};
use crate::{BelowThreshold, Invalid, RunArgs};

/// Enumeration visits every state once: the infinite-temperature ensemble.
/// JSON has no infinity, so the largest finite value stands in.
const ENUMERATION_TEMPERATURE: f64 = f64::MAX;

fn load_config(run: &RunArgs) -> anyhow::Result<RunConfig> {
    let mut cfg = match (&run.config, &run.preset) {
        (Some(path), None) => {
            require_file(path)?;
            RunConfig::load(path)?
        }
        (None, Some(name)) => RunConfig::preset(name)?,
        _ => return Err(Invalid("give exactly one of --config or --preset".into()).into()),
    };
    if let Some(seed) = run.seed {
        cfg.reseed(seed);
    }
    Ok(cfg)
}

fn load_samples(path: &Path) -> anyhow::Result<Vec<Sample>> {
    require_file(path)?;
    let file = File::open(path).with_context(|| format!("opening {}", path.display()))?;
    let samples = read_samples(BufReader::new(file)).map_err(|e| Invalid(format!("{}: {e}", path.display())))?;
    if samples.is_empty() {
        return Err(Invalid(format!("{} holds no samples", path.display())).into());
    }
    Ok(samples)
}

fn load_tree(path: &Path) -> anyhow::Result<LandscapeTree> {
    require_file(path)?;
    let text = std::fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
    LandscapeTree::from_json(&text).map_err(|e| Invalid(format!("{}: {e}", path.display())).into())
}

fn write_text(path: &Path, text: &str) -> anyhow::Result<()> {
    std::fs::write(path, text).with_context(|| format!("writing {}", path.display()))
}

fn check_space(samples: &[Sample], space: &SpaceKind) -> anyhow::Result<()> {
    for (i, s) in samples.iter().enumerate() {
        let ok = match (&s.state, space) {
            (State::Continuous(x), SpaceKind::Continuous { .. }) => x.len() == space.dim(),
            (State::Discrete(z), SpaceKind::Segmentation { len, max_points }) => {
                z.len == *len && z.max_points == *max_points
            }
            _ => false,
        };
        if !ok {
            return Err(Invalid(format!("sample {i} does not belong to the configured testbed")).into());
        }
    }
    Ok(())
}

pub fn sample(run: &RunArgs, out: &Path) -> anyhow::Result<()> {
    let cfg = load_config(run)?;
    let exec = Exec::default();
    let started = Instant::now();
    let (samples, acceptance) = match (cfg.testbed.build()?, &cfg.sampler) {
        (Built::Continuous { energy, space }, SamplerConfig::Tempering { chains, swap_interval }) => {
            let r = parallel_tempering(energy.as_ref(), &space, chains, *swap_interval, cfg.seed, exec)?;
            (r.samples, Some(r.acceptance))
        }
        (Built::Continuous { energy, space }, SamplerConfig::Chains { chains }) => {
            let runs = exec.map(chains, |spec| metropolis_chain(energy.as_ref(), &space, spec));
            let mut samples = Vec::new();
            let mut acc = Vec::new();
            for r in runs {
                let r = r?;
                acc.push(r.acceptance());
                samples.extend(r.samples);
            }
            (samples, Some(acc))
        }
        (Built::Discrete { model, .. }, SamplerConfig::Dp { temperatures, draws }) => {
            let ladder = DpLadder { temperatures: temperatures.clone(), draws: *draws, seed: cfg.seed };
            (dp_ladder_samples(&model, &ladder, exec)?, None)
        }
        (Built::Discrete { model, .. }, SamplerConfig::Exhaustive) => (enumerate(&model)?, None),
        _ => return Err(Invalid("sampler does not fit the testbed".into()).into()),
    };
    let file = File::create(out).with_context(|| format!("creating {}", out.display()))?;
    let mut w = BufWriter::new(file);
    write_samples(&mut w, &samples)?;
    w.flush()?;

    let mut ids: Vec<u32> = samples.iter().map(|s| s.chain_id).collect();
    ids.sort_unstable();
    ids.dedup();
    println!("{} samples from {} chains in {:.1}s", samples.len(), ids.len(), started.elapsed().as_secs_f64());
    for (k, id) in ids.iter().enumerate() {
        let (mut lo, mut hi, mut n) = (f64::INFINITY, f64::NEG_INFINITY, 0usize);
        for s in samples.iter().filter(|s| s.chain_id == *id) {
            lo = lo.min(s.energy);
            hi = hi.max(s.energy);
            n += 1;
        }
        match &acceptance {
            Some(acc) => println!("chain {id}: {n} samples, energy [{lo:.3}, {hi:.3}], acceptance {:.3}", acc[k]),
            None => println!("chain {id}: {n} samples, energy [{lo:.3}, {hi:.3}]"),
        }
    }
    Ok(())
}

fn enumerate(model: &SegmentModel) -> anyhow::Result<Vec<Sample>> {
    let states = enumerate_segmentations(model.len(), model.max_points).map_err(|e| Invalid(e.to_string()))?;
    states
        .into_iter()
        .map(|z| {
            Ok(Sample {
                chain_id: 0,
                temperature: ENUMERATION_TEMPERATURE,
                truncation: None,
                energy: model.energy(&z)?,
                state: State::Discrete(z),
            })
        })
        .collect()
}

#[allow(clippy::too_many_arguments)]
pub fn tree(
    run: &RunArgs,
    samples_path: &Path,
    out: &Path,
    dot: Option<&Path>,
    mass_at: Option<Vec<f64>>,
    subsample: Option<f64>,
    levels: Option<usize>,
) -> anyhow::Result<()> {
    let mut cfg = load_config(run)?;
    if let Some(f) = subsample {
        cfg.tree.subsample = f;
    }
    if let Some(l) = levels {
        cfg.tree.levels = l;
    }
    if let Some(t) = mass_at {
        cfg.mass_at = t;
    }
    cfg.validate()?;
    let samples = load_samples(samples_path)?;
    let built = cfg.testbed.build()?;
    let started = Instant::now();
    let rec = match &built {
        Built::Continuous { energy, space } => {
            check_space(&samples, space)?;
            let e: &dyn EnergyFn = energy.as_ref();
            reconstruct(&samples, space, &cfg.tree, Some(e), Exec::default())?
        }
        Built::Discrete { space, .. } => {
            check_space(&samples, space)?;
            reconstruct(&samples, space, &cfg.tree, None, Exec::default())?
        }
    };
    let mut tree = rec.tree;
    if !cfg.mass_at.is_empty() {
        tree.annotate_masses(&cfg.mass_at)?;
    }
    write_text(out, &tree.to_json()?)?;
    if let Some(path) = dot {
        write_text(path, &tree.to_dot())?;
    }
    println!(
        "{} leaves, {} barriers, {} roots from {} samples in {:.1}s",
        tree.leaf_count(),
        tree.barriers().count(),
        tree.roots.len(),
        samples.len(),
        started.elapsed().as_secs_f64()
    );
    Ok(())
}

#[derive(Serialize)]
struct LeafVerdict {
    node: usize,
    energy: f64,
    verified: bool,
    /// Energy after re-minimization.
    minimum: f64,
    /// Re-minimized state.
    state: State,
}

#[derive(Serialize)]
struct VerifyReport {
    leaves: Vec<LeafVerdict>,
    fraction: f64,
    threshold: f64,
    /// Maximum energy on the straight line between re-minimized leaves
    /// (continuous testbeds).
    #[serde(skip_serializing_if = "Option::is_none")]
    line_barriers: Option<Vec<Vec<f64>>>,
}

pub fn verify(
    run: &RunArgs,
    tree_path: &Path,
    threshold: f64,
    tolerance: f64,
    out: Option<&Path>,
) -> anyhow::Result<()> {
    if !(0.0..=1.0).contains(&threshold) || !(tolerance >= 0.0) {
        return Err(Invalid("threshold must lie in [0, 1] and tolerance must be non-negative".into()).into());
    }
    let cfg = load_config(run)?;
    let tree = load_tree(tree_path)?;
    let built = cfg.testbed.build()?;
    let mut leaves = Vec::new();
    let mut line_barriers = None;
    match &built {
        Built::Continuous { energy, space } => {
            let mut minima = Vec::new();
            for leaf in tree.leaves() {
                let x = leaf
                    .rep_state
                    .as_ref()
                    .and_then(State::coords)
                    .filter(|x| x.len() == space.dim())
                    .ok_or_else(|| Invalid(format!("leaf {} has no state of this testbed", leaf.id)))?;
                let h = energy.energy(x);
                let d = gradient_descent(energy.as_ref(), x, DescentOptions::default());
                leaves.push(LeafVerdict {
                    node: leaf.id,
                    energy: h,
                    verified: h - d.energy < tolerance,
                    minimum: d.energy,
                    state: State::Continuous(d.x.clone()),
                });
                minima.push(d.x);
            }
            line_barriers = Some(pairwise_barrier_approx(&minima, energy.as_ref(), 1000));
        }
        Built::Discrete { model, .. } => {
            for leaf in tree.leaves() {
                let z = leaf
                    .rep_state
                    .as_ref()
                    .and_then(State::segmentation)
                    .ok_or_else(|| Invalid(format!("leaf {} has no segmentation", leaf.id)))?;
                let h = model.energy(z).map_err(|e| Invalid(format!("leaf {}: {e}", leaf.id)))?;
                let end = neighbor_descent(z, model)?;
                leaves.push(LeafVerdict {
                    node: leaf.id,
                    energy: h,
                    verified: verify_local_minimum(z, model)?,
                    minimum: model.energy(&end)?,
                    state: State::Discrete(end),
                });
            }
        }
    }
    let passed = leaves.iter().filter(|l| l.verified).count();
    let fraction = if leaves.is_empty() { 0.0 } else { passed as f64 / leaves.len() as f64 };
    for l in &leaves {
        println!(
            "leaf {}: energy {:.4}, descends to {:.4}: {}",
            l.node,
            l.energy,
            l.minimum,
            if l.verified { "verified" } else { "NOT a local minimum" }
        );
    }
    println!("{passed}/{} leaves verified ({fraction:.3}, threshold {threshold})", leaves.len());
    let report = VerifyReport { leaves, fraction, threshold, line_barriers };
    if let Some(path) = out {
        write_text(path, &serde_json::to_string_pretty(&report)?)?;
    }
    if fraction < threshold {
        return Err(BelowThreshold(format!("verified fraction {fraction:.3} below {threshold}")).into());
    }
    Ok(())
}

pub fn oracle(
    run: &RunArgs,
    samples_path: Option<&Path>,
    levels: Option<usize>,
    resolution: usize,
    out: &Path,
) -> anyhow::Result<()> {
    let cfg = load_config(run)?;
    let levels = levels.unwrap_or(cfg.tree.levels);
    if levels == 0 {
        return Err(Invalid("levels must be positive".into()).into());
    }
    let sample_energies = match samples_path {
        Some(p) => Some(load_samples(p)?.into_iter().map(|s| s.energy).collect::<Vec<f64>>()),
        None => None,
    };
    let started = Instant::now();
    let tree = match (&cfg.testbed, cfg.testbed.build()?) {
        (Testbed::Dna { .. }, Built::Discrete { model, .. }) => {
            let energies = match sample_energies {
                Some(e) => e,
                None => enumerate(&model)?.into_iter().map(|s| s.energy).collect(),
            };
            let grid = build_energy_grid(&energies, levels, cfg.tree.strategy)?;
            exhaustive_tree_oracle(&model, &grid).map_err(|e| Invalid(e.to_string()))?
        }
        (Testbed::SevenMode, _) => {
            let (lo, hi) = ([-8.0, -8.0], [8.0, 8.0]);
            let energies = match sample_energies {
                Some(e) => e,
                None => raster_energies(lo, hi, resolution),
            };
            let grid = build_energy_grid(&energies, levels, cfg.tree.strategy)?;
            grid_tree_oracle(&seven_mode_energy, lo, hi, resolution, &grid, 7)?
        }
        _ => return Err(Invalid("oracles exist for dna and seven-mode only".into()).into()),
    };
    write_text(out, &tree.to_json()?)?;
    println!(
        "oracle: {} leaves, {} barriers in {:.1}s",
        tree.leaf_count(),
        tree.barriers().count(),
        started.elapsed().as_secs_f64()
    );
    Ok(())
}

fn raster_energies(lo: [f64; 2], hi: [f64; 2], r: usize) -> Vec<f64> {
    let mut out = Vec::with_capacity(r * r);
    for i in 0..r {
        for j in 0..r {
            let x = lo[0] + (hi[0] - lo[0]) * (i as f64 + 0.5) / r as f64;
            let y = lo[1] + (hi[1] - lo[1]) * (j as f64 + 0.5) / r as f64;
            out.push(seven_mode_energy(&[x, y]));
        }
    }
    out
}

pub fn mass(tree_path: &Path, temperatures: &[f64], out: Option<&Path>) -> anyhow::Result<()> {
    if temperatures.iter().any(|t| !(*t > 0.0)) {
        return Err(Invalid("temperatures must be positive".into()).into());
    }
    let mut tree = load_tree(tree_path)?;
    tree.annotate_masses(temperatures).map_err(|e| Invalid(format!("{}: {e}", tree_path.display())))?;
    for n in &tree.nodes {
        let values: Vec<String> = n.masses.iter().map(|m| format!("T={}: {:.6}", m.temperature, m.value)).collect();
        println!("node {} ({:?}, energy {:.4}): {}", n.id, n.kind, n.energy, values.join(", "));
    }
    if let Some(path) = out {
        write_text(path, &tree.to_json()?)?;
    }
    Ok(())
}

pub fn export_dot(tree_path: &Path, out: &Path) -> anyhow::Result<()> {
    let tree = load_tree(tree_path)?;
    write_text(out, &tree.to_dot())
}

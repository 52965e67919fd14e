//! End-to-end acceptance checks. Each test prints one `criterion N: PASS`
//! or `criterion N: FAIL` line with the measured quantities, then asserts.
//!
//! Run with `cargo test -p landtree --test acceptance -- --nocapture` to
//! see the report lines.

use std::collections::HashMap;
use std::sync::OnceLock;
use std::time::Instant;

use landtree::landscape::compare::compare_trees;
use landtree::landscape::{
    branch_mass, bup_build, estimate_dos, local_dos, reconstruct, reconstruct_on, segment_mass, BupOptions, DosOptions,
    LandscapeTree, NodeKind, Reconstruction, TreeConfig,
};
use landtree::metric::{euclidean, SpaceKind};
use landtree::model::{build_energy_grid, seeded_rng, GridStrategy, Sample, State};
use landtree::ringcluster::{censored_exponential_theta, discrete_component_upper_bound, ClusterParams};
use landtree::samplers::{
    dp_forward, dp_ladder_samples, dp_sample, geometric_ladder, metropolis_chain, parallel_tempering, restrict_energy,
    ChainSpec, DpLadder, SegmentModel, UNIFORM_DIRICHLET,
};
use landtree::testbeds::{
    enumerate_posterior, enumerate_segmentations, exhaustive_tree_oracle, gradient_descent, grid_tree_oracle,
    neighbor_descent, pairwise_barrier_approx, quadrature_dos_1d, reference_theta, simulate_sequence,
    verify_local_minimum, DescentOptions, Layered, SevenMode, TDataset, TRUE_CHANGE_POINTS,
};
use landtree::Exec;
use rand::Rng;
use rand_distr::{Distribution, Exp, Geometric};

/// Collects named checks and prints the verdict line.
struct Report {
    id: u32,
    checks: Vec<(String, bool)>,
}

impl Report {
    fn new(id: u32) -> Self {
        Report { id, checks: Vec::new() }
    }

    fn check(&mut self, what: impl Into<String>, ok: bool) {
        self.checks.push((what.into(), ok));
    }

    fn finish(self) {
        let failed: Vec<&str> = self.checks.iter().filter(|c| !c.1).map(|c| c.0.as_str()).collect();
        let verdict = if failed.is_empty() { "PASS" } else { "FAIL" };
        let detail: Vec<String> =
            self.checks.iter().map(|(w, ok)| format!("{}{}", if *ok { "" } else { "!" }, w)).collect();
        println!("criterion {}: {verdict} [{}]", self.id, detail.join("; "));
        assert!(failed.is_empty(), "criterion {} failed: {failed:?}", self.id);
    }
}

fn within(x: f64, target: f64, tol: f64) -> bool {
    (x - target).abs() <= tol
}

fn fmt(xs: &[f64]) -> String {
    let v: Vec<String> = xs.iter().map(|x| format!("{x:.3}")).collect();
    format!("[{}]", v.join(", "))
}

/// Barriers of `tree` split into root and non-root, each sorted.
fn barrier_energies(tree: &LandscapeTree) -> (Vec<f64>, Vec<f64>) {
    let (mut roots, mut inner) = (Vec::new(), Vec::new());
    for n in tree.barriers() {
        if n.parent.is_none() {
            roots.push(n.energy)
        } else {
            inner.push(n.energy)
        }
    }
    roots.sort_by(f64::total_cmp);
    inner.sort_by(f64::total_cmp);
    (roots, inner)
}

// t-posterior runs shared by criteria 1-3

const T_STEPS: usize = 220_000;

fn t_tree(data: &TDataset, truncation: (f64, f64), seed: u64) -> (Reconstruction, Vec<Sample>) {
    let run =
        parallel_tempering(data, &data.space(), &data.ladder(T_STEPS, truncation, seed), 10, seed, Exec::Parallel)
            .expect("sampler runs");
    let cfg = TreeConfig { levels: 50, subsample: 0.2, seed, ..TreeConfig::default() };
    let rec = reconstruct(&run.samples, &data.space(), &cfg, None, Exec::Parallel).expect("tree builds");
    (rec, run.samples)
}

struct SymRun {
    tree: LandscapeTree,
    seconds: f64,
}

fn symmetric_run() -> &'static SymRun {
    static RUN: OnceLock<SymRun> = OnceLock::new();
    RUN.get_or_init(|| {
        let start = Instant::now();
        let (rec, _) = t_tree(&TDataset::symmetric(), (166.0, 220.0), 7);
        let mut tree = rec.tree;
        tree.annotate_masses(&[1.0]).expect("masses");
        SymRun { tree, seconds: start.elapsed().as_secs_f64() }
    })
}

#[test]
fn criterion_01_symmetric_t_tree() {
    let data = TDataset::symmetric();
    let run = symmetric_run();
    let tree = &run.tree;
    let mut r = Report::new(1);
    let leaves: Vec<f64> = tree.leaves().map(|n| n.energy).collect();
    let (roots, inner) = barrier_energies(tree);
    r.check(format!("6 leaves (got {})", leaves.len()), leaves.len() == 6);
    r.check(format!("3 intermediate barriers (got {})", inner.len()), inner.len() == 3);
    r.check(
        format!("1 root barrier (got {}, {} trees)", roots.len(), tree.roots.len()),
        roots.len() == 1 && tree.roots.len() == 1,
    );
    r.check(format!("leaves {} within 0.2 of 169.18", fmt(&leaves)), leaves.iter().all(|&e| within(e, 169.18, 0.2)));
    r.check(format!("barriers {} within 0.6 of 170.9", fmt(&inner)), inner.iter().all(|&e| within(e, 170.9, 0.6)));
    r.check(format!("root {} within 2.5 of 198.5", fmt(&roots)), roots.iter().all(|&e| within(e, 198.5, 2.5)));
    // each intermediate barrier pairs two leaves
    let shape = tree
        .barriers()
        .filter(|n| n.parent.is_some())
        .all(|n| n.children.len() == 2 && n.children.iter().all(|&c| tree.nodes[c].kind == NodeKind::Leaf));
    r.check("three pairs under the root", shape);
    // independent check of the reference values by local search
    let minima: Vec<Vec<f64>> =
        data.y.iter().map(|y| gradient_descent(&data, y, DescentOptions::default()).x).collect();
    let m_energy: Vec<f64> = minima.iter().map(|m| t_posterior_energy(m, &data)).collect();
    r.check(
        format!("descent minima {} near 169.18", fmt(&m_energy)),
        m_energy.iter().all(|&e| within(e, 169.18, 0.01)),
    );
    let b = pairwise_barrier_approx(&minima, &data, 100);
    // a straight path only bounds the cross barrier from above
    r.check(
        format!("line barriers pair {:.2} / cross {:.2} >= root", b[0][1], b[0][2]),
        within(b[0][1], 170.9, 0.1) && roots.iter().all(|&e| b[0][2] >= e),
    );
    r.check(format!("runtime {:.0}s <= 300s", run.seconds), run.seconds <= 300.0);
    r.finish();
}

fn t_posterior_energy(x: &[f64], data: &TDataset) -> f64 {
    landtree::testbeds::t_posterior_energy(x, data)
}

#[test]
fn criterion_02_symmetric_t_masses() {
    let tree = &symmetric_run().tree;
    let mut r = Report::new(2);
    let leaf_mass: Vec<f64> = tree.leaves().map(|n| branch_mass(tree, n.id, 1.0).unwrap()).collect();
    r.check(
        format!("leaf masses {} in 0.015 +- 0.01", fmt(&leaf_mass)),
        leaf_mass.iter().all(|&m| within(m, 0.015, 0.01)),
    );
    let long: f64 =
        tree.barriers().filter(|n| n.parent.is_some()).map(|n| segment_mass(tree, n.id, 1.0).unwrap()).sum();
    r.check(format!("long branches jointly {long:.3} in 0.91 +- 0.06"), within(long, 0.91, 0.06));
    let root = tree.roots[0];
    r.check("root mass 1", within(branch_mass(tree, root, 1.0).unwrap(), 1.0, 1e-9));
    r.finish();
}

#[test]
fn criterion_03_asymmetric_t_tree() {
    let data = TDataset::asymmetric();
    let (rec, _) = t_tree(&data, (160.0, 220.0), 7);
    let tree = &rec.tree;
    let mut r = Report::new(3);
    let leaves: Vec<f64> = tree.leaves().map(|n| n.energy).collect();
    let (roots, inner) = barrier_energies(tree);
    r.check(format!("coarse tree has 3 leaves (got {} at {})", leaves.len(), fmt(&leaves)), leaves.len() == 3);
    let global = leaves.iter().copied().fold(f64::INFINITY, f64::min);
    r.check(format!("global minimum {global:.3} within 0.2 of 162.33"), within(global, 162.33, 0.2));
    r.check(
        format!("root {} within 3 of [198.5, 200.5]", fmt(&roots)),
        roots.len() == 1 && roots[0] >= 195.5 && roots[0] <= 203.5,
    );
    r.check(
        format!("three branches below the root (inner barriers {})", fmt(&inner)),
        tree.nodes[tree.roots[0]].children.len() == 3,
    );

    // local re-sampling of each shallow branch inside a ball below H*
    let h_star = 185.0;
    let shallow: Vec<&landtree::Node> = tree.nodes[tree.roots[0]]
        .children
        .iter()
        .map(|&c| &tree.nodes[c])
        .filter(|n| n.energy > global + 1.0 || n.kind == NodeKind::Barrier)
        .collect();
    let mut refined_leaves = Vec::new();
    let mut refined_barriers = Vec::new();
    for branch in shallow {
        let center = lowest_leaf_state(tree, branch.id);
        let ring = restrict_energy(&data, center.clone(), 15.0, h_star).unwrap();
        let floor = tree.leaves_under(branch.id).iter().map(|&l| tree.nodes[l].energy).fold(f64::INFINITY, f64::min);
        let temps = geometric_ladder(0.2, 4.0, 10);
        let truncs = geometric_ladder(floor - 3.0, h_star, 10);
        let ladder: Vec<ChainSpec> = (0..10)
            .map(|k| ChainSpec {
                chain_id: k as u32,
                temperature: temps[k],
                truncation: Some(truncs[k]),
                steps: 55_000,
                burn_in: 0.1,
                sigma: 0.5 * temps[k].sqrt() * (1.0 + 0.25 * k as f64),
                seed: 11,
                init: center.clone(),
            })
            .collect();
        let run = parallel_tempering(&ring, &data.space(), &ladder, 10, 11, Exec::Parallel).unwrap();
        let cfg = TreeConfig { levels: 50, subsample: 1.0, ..TreeConfig::default() };
        let local = reconstruct(&run.samples, &data.space(), &cfg, None, Exec::Parallel).unwrap().tree;
        refined_leaves.extend(local.leaves().map(|n| n.energy));
        refined_barriers.extend(local.barriers().map(|n| n.energy));
    }
    refined_leaves.sort_by(f64::total_cmp);
    refined_barriers.sort_by(f64::total_cmp);
    let near = |target: f64| refined_leaves.iter().filter(|&&e| within(e, target, 0.3)).count();
    r.check(
        format!("refined leaves {}: two near 166.57, two near 169.60", fmt(&refined_leaves)),
        refined_leaves.len() == 4 && near(166.57) == 2 && near(169.60) == 2,
    );
    r.check(
        format!("refined barriers {} within 0.6 of 167.0 and 171.3", fmt(&refined_barriers)),
        refined_barriers.len() == 2
            && within(refined_barriers[0], 167.0, 0.6)
            && within(refined_barriers[1], 171.3, 0.6),
    );
    r.finish();
}

fn lowest_leaf_state(tree: &LandscapeTree, id: usize) -> Vec<f64> {
    let leaf = tree
        .leaves_under(id)
        .into_iter()
        .min_by(|&a, &b| tree.nodes[a].energy.total_cmp(&tree.nodes[b].energy))
        .expect("branch has a leaf");
    tree.nodes[leaf].rep_state.as_ref().and_then(|s| s.coords()).expect("continuous leaf").to_vec()
}

/// Minimum of the layered energy whose basin holds `x`.
fn nearest_layered_minimum(x: &[f64]) -> Vec<i8> {
    let s = Layered::saddle_position();
    x.iter().map(|&v| if v.abs() <= s { 0 } else { v.signum() as i8 }).collect()
}

#[test]
fn criterion_04_layered_minima() {
    let start = Instant::now();
    let mut samples = Vec::new();
    for k in 0..20u32 {
        let spec = ChainSpec {
            chain_id: k,
            temperature: 0.5,
            truncation: Some(f64::from(k)),
            steps: 55_000,
            burn_in: 0.1,
            sigma: 0.3,
            seed: 4,
            init: vec![0.0; 4],
        };
        samples.extend(metropolis_chain(&Layered, &Layered::space(), &spec).unwrap().samples);
    }
    let mut r = Report::new(4);
    for interpolation in [false, true] {
        let cluster = ClusterParams { interpolation, ..ClusterParams::default() };
        let cfg = TreeConfig { levels: 50, subsample: 1.0, seed: 4, cluster, ..TreeConfig::default() };
        let rec = reconstruct(&samples, &Layered::space(), &cfg, Some(&Layered), Exec::Parallel).unwrap();
        let tree = &rec.tree;
        let mut leaves_in = [0usize; 6];
        let mut found: Vec<std::collections::BTreeSet<Vec<i8>>> = vec![Default::default(); 6];
        for leaf in tree.leaves() {
            let x = leaf.rep_state.as_ref().and_then(|s| s.coords()).unwrap();
            let j = Layered::layer_of(x);
            leaves_in[j] += 1;
            found[j].insert(nearest_layered_minimum(x));
        }
        let counts: Vec<usize> = (1..=5).map(|j| found[j].len()).collect();
        let tag = if interpolation { "with rescue" } else { "without rescue" };
        if interpolation {
            r.check(format!("{tag}: layer 3 minima {} >= 20 of 24", counts[2]), counts[2] >= 20);
            r.check(
                format!("{tag}: layers 4-5 absent (found {} and {})", counts[3], counts[4]),
                counts[3] + counts[4] == 0,
            );
            for j in 2..=3 {
                let target = Layered::layer_barrier(j);
                let width = rec.grid.width(rec.grid.ring_of(target).unwrap());
                let parents: Vec<f64> = tree
                    .leaves()
                    .filter(|l| Layered::layer_of(l.rep_state.as_ref().and_then(|s| s.coords()).unwrap()) == j)
                    .filter_map(|l| l.parent.map(|p| tree.nodes[p].energy))
                    .collect();
                let mean = parents.iter().sum::<f64>() / parents.len().max(1) as f64;
                r.check(
                    format!("{tag}: layer {j} barrier {mean:.3} vs {target:.3} (ring width {width:.3})"),
                    !parents.is_empty() && (mean - target).abs() <= width,
                );
            }
        } else {
            r.check(
                format!(
                    "{tag}: layers 1-2 hold {} and {} leaves on {:?} minima",
                    leaves_in[1],
                    leaves_in[2],
                    &counts[..2]
                ),
                leaves_in[1] == 1 && leaves_in[2] == 8 && counts[..2] == [1, 8],
            );
        }
    }
    let secs = start.elapsed().as_secs_f64();
    r.check(format!("runtime {secs:.0}s <= 900s"), secs <= 900.0);
    r.finish();
}

#[test]
fn criterion_05_seven_mode_grid_oracle() {
    let temps = geometric_ladder(1.0, 20.0, 10);
    let ladder: Vec<ChainSpec> = temps
        .iter()
        .enumerate()
        .map(|(k, &t)| ChainSpec {
            chain_id: k as u32,
            temperature: t,
            truncation: None,
            steps: 22_500,
            burn_in: 0.1,
            sigma: 0.8 * t.sqrt(),
            seed: 5,
            init: vec![0.0, 0.0],
        })
        .collect();
    let run = parallel_tempering(&SevenMode, &SevenMode::space(), &ladder, 10, 5, Exec::Parallel).unwrap();
    let cfg = TreeConfig { levels: 50, subsample: 1.0, seed: 5, ..TreeConfig::default() };
    let rec = reconstruct(&run.samples, &SevenMode::space(), &cfg, None, Exec::Parallel).unwrap();
    let oracle = grid_tree_oracle(&SevenMode, [-8.0, -8.0], [8.0, 8.0], 800, &rec.grid, 7).unwrap();
    let diff = compare_trees(&rec.tree, &oracle);
    let width = oracle.barriers().map(|n| rec.grid.width(n.ring_span[0])).fold(f64::INFINITY, f64::min);
    let mut r = Report::new(5);
    r.check(format!("{} samples >= 200000", run.samples.len()), run.samples.len() >= 200_000);
    r.check(
        format!(
            "topology ({} vs {} leaves, {} unmatched)",
            rec.tree.leaf_count(),
            oracle.leaf_count(),
            diff.unmatched_leaves
        ),
        diff.same_topology && diff.unmatched_leaves == 0,
    );
    r.check(
        format!("barrier gap {:.4} <= ring width {width:.4}", diff.barrier_energy_gap),
        diff.barrier_energy_gap <= width,
    );
    r.finish();
}

#[test]
fn criterion_06_exhaustive_discrete_oracle() {
    let start = Instant::now();
    let mut r = Report::new(6);
    let params = ClusterParams { n_min: 0, alpha: 1e-9, k_max: 100_000, ..ClusterParams::default() };
    for (len, max_points, cps) in [(12u32, 2u32, vec![5u32, 9]), (10, 3, vec![4, 8])] {
        let theta = [[0.7, 0.1, 0.1, 0.1], [0.1, 0.1, 0.1, 0.7], [0.1, 0.7, 0.1, 0.1]];
        let seq = simulate_sequence(len, &cps, &theta[..cps.len() + 1], 5).unwrap();
        let model = SegmentModel::new(seq, max_points, UNIFORM_DIRICHLET).unwrap();
        let states = enumerate_segmentations(len, max_points).unwrap();
        let samples: Vec<Sample> = states
            .iter()
            .map(|z| Sample {
                chain_id: 0,
                temperature: 1.0,
                truncation: None,
                energy: model.energy(z).unwrap(),
                state: State::Discrete(z.clone()),
            })
            .collect();
        let energies: Vec<f64> = samples.iter().map(|s| s.energy).collect();
        let grid = build_energy_grid(&energies, 12, GridStrategy::EqualCount).unwrap();
        let space = SpaceKind::segmentation(len, max_points).unwrap();
        let built = bup_build(&samples, &grid, &space, &BupOptions::new(&params)).unwrap().tree;
        let oracle = exhaustive_tree_oracle(&model, &grid).unwrap();
        let diff = compare_trees(&built, &oracle);
        let reps = |t: &LandscapeTree| {
            let mut v: Vec<Vec<u32>> =
                t.leaves().map(|n| n.rep_state.as_ref().unwrap().segmentation().unwrap().cps.clone()).collect();
            v.sort();
            v
        };
        r.check(
            format!(
                "L={len} N={max_points}: {} states, {} vs {} leaves, same topology, exact energies",
                states.len(),
                built.leaf_count(),
                oracle.leaf_count()
            ),
            diff.same_topology
                && diff.leaf_energy_gap == 0.0
                && diff.barrier_energy_gap == 0.0
                && reps(&built) == reps(&oracle),
        );
    }
    let secs = start.elapsed().as_secs_f64();
    r.check(format!("runtime {secs:.3}s <= 1s"), secs <= 1.0);
    r.finish();
}

#[test]
fn criterion_07_dp_sampler_exactness() {
    let mut r = Report::new(7);
    let seq = simulate_sequence(8, &[5], &[[0.7, 0.1, 0.1, 0.1], [0.1, 0.1, 0.1, 0.7]], 3).unwrap();
    let model = SegmentModel::new(seq, 2, UNIFORM_DIRICHLET).unwrap();
    let exact = enumerate_posterior(&model, 1.0).unwrap();
    let tables = dp_forward(&model, 1.0, Exec::Parallel).unwrap();
    let n = 200_000;
    let mut counts: HashMap<Vec<u32>, usize> = HashMap::new();
    for z in dp_sample(&tables, n, 21, 0) {
        *counts.entry(z.cps).or_default() += 1;
    }
    let tv = 0.5
        * exact
            .iter()
            .map(|(z, p)| (counts.get(&z.cps).copied().unwrap_or(0) as f64 / n as f64 - p).abs())
            .sum::<f64>();
    r.check(format!("L=8 N=2: TV {tv:.5} < 0.01 over {} states", exact.len()), tv < 0.01);

    let seq = simulate_sequence(20, &[7, 14], &reference_theta()[..3], 4).unwrap();
    let model = SegmentModel::new(seq, 3, UNIFORM_DIRICHLET).unwrap();
    let mut worst: f64 = 0.0;
    for t in [0.5, 1.0, 2.0] {
        let mut by_count = [0.0; 4];
        for (z, p) in enumerate_posterior(&model, t).unwrap() {
            by_count[z.cps.len()] += p;
        }
        let dp = dp_forward(&model, t, Exec::Parallel).unwrap().count_marginal();
        for (a, b) in dp.iter().zip(by_count) {
            worst = worst.max((a - b).abs() / b);
        }
    }
    r.check(format!("L=20 N=3: count marginals relative error {worst:.2e} <= 1e-10"), worst <= 1e-10);
    r.finish();
}

#[test]
fn criterion_08_simulated_dna() {
    let start = Instant::now();
    let seq = simulate_sequence(1000, &TRUE_CHANGE_POINTS, &reference_theta(), 1).unwrap();
    let model = SegmentModel::new(seq, 9, UNIFORM_DIRICHLET).unwrap();
    let ladder = DpLadder { temperatures: geometric_ladder(0.5, 2.0, 10), draws: 50_000, seed: 1 };
    let samples = dp_ladder_samples(&model, &ladder, Exec::Parallel).unwrap();
    let cfg = TreeConfig { levels: 100, subsample: 1.0, seed: 1, ..TreeConfig::default() };
    let space = SpaceKind::segmentation(1000, 9).unwrap();
    let tree = reconstruct(&samples, &space, &cfg, None, Exec::Parallel).unwrap().tree;
    let secs = start.elapsed().as_secs_f64();

    let mut verified = Vec::new();
    let mut unverified = Vec::new();
    let mut mode: Option<(f64, Vec<u32>)> = None;
    for leaf in tree.leaves() {
        let z = leaf.rep_state.as_ref().and_then(|s| s.segmentation()).unwrap();
        if verify_local_minimum(z, &model).unwrap() {
            verified.push(z.cps.clone());
        } else {
            unverified.push(z.clone());
        }
        if mode.as_ref().is_none_or(|m| leaf.energy < m.0) {
            mode = Some((leaf.energy, z.cps.clone()));
        }
    }
    // unverified leaves whose descent ends at a minimum no other leaf holds
    let adjacent = unverified.iter().filter(|z| !verified.contains(&neighbor_descent(z, &model).unwrap().cps)).count();
    let verified = verified.len();
    let leaves = tree.leaf_count();
    let (mode_energy, mode_cps) = mode.unwrap();
    let mut r = Report::new(8);
    r.check(
        format!("{verified}/{leaves} leaves verified >= 95% ({adjacent} more descend to distinct minima)"),
        verified as f64 >= 0.95 * leaves as f64,
    );
    let near = mode_cps.iter().all(|&z| TRUE_CHANGE_POINTS.iter().any(|&t| z.abs_diff(t) <= 15));
    r.check(format!("global mode {mode_cps:?} at {mode_energy:.2} within 15 of {TRUE_CHANGE_POINTS:?}"), near);
    r.check(format!("runtime {secs:.0}s <= 600s"), secs <= 600.0);
    r.finish();
}

/// Kolmogorov-Smirnov statistic and asymptotic p-value of `xs` against the
/// continuous CDF `cdf`.
fn ks_test(xs: &mut [f64], cdf: impl Fn(f64) -> f64) -> (f64, f64) {
    xs.sort_by(f64::total_cmp);
    let n = xs.len() as f64;
    let mut d: f64 = 0.0;
    for (i, &x) in xs.iter().enumerate() {
        let f = cdf(x);
        d = d.max(f - i as f64 / n).max((i + 1) as f64 / n - f);
    }
    let lambda = (n.sqrt() + 0.12 + 0.11 / n.sqrt()) * d;
    let mut p = 0.0;
    for k in 1..=100 {
        let k = k as f64;
        p += 2.0 * (-1f64).powf(k - 1.0) * (-2.0 * k * k * lambda * lambda).exp();
    }
    (d, p.clamp(0.0, 1.0))
}

#[test]
fn criterion_09_distribution_laws() {
    let mut r = Report::new(9);

    // (a) n * pi * r^2 of per-point nearest-neighbor distances is Exp(1)
    let n = 5000;
    let mut rng = seeded_rng(9, 0);
    let pts: Vec<[f64; 2]> = (0..n).map(|_| [rng.random::<f64>(), rng.random::<f64>()]).collect();
    let mut y: Vec<f64> = (0..n)
        .map(|i| {
            let r = (0..n).filter(|&j| j != i).map(|j| euclidean(&pts[i], &pts[j])).fold(f64::INFINITY, f64::min);
            n as f64 * std::f64::consts::PI * r * r
        })
        .collect();
    let (d, p) = ks_test(&mut y, |v| 1.0 - (-v).exp());
    r.check(format!("(a) KS D={d:.4}, p={p:.3} > 0.01"), p > 0.01);

    // (b) censored MLE ladder on exponential data with planted outliers
    let theta = 2.0;
    let exp = Exp::new(1.0 / theta).unwrap();
    let mut data: Vec<f64> = (0..20_000).map(|_| exp.sample(&mut rng)).collect();
    let planted = [400.0, 900.0, 1600.0, 3000.0, 5000.0];
    data.extend(planted);
    data.sort_by(f64::total_cmp);
    let total = data.len() as f64;
    let big = planted.len();
    let mut worst: f64 = 0.0;
    for k in 0..big + 4 {
        let predicted = if k < big {
            // the k largest outliers censored, the rest pulled into the mean,
            // the censored ones counted at the largest remaining value
            let rest = &planted[..big - k];
            theta + (rest.iter().sum::<f64>() + k as f64 * rest[rest.len() - 1]) / total
        } else {
            theta
        };
        let got = censored_exponential_theta(&data, k).unwrap();
        worst = worst.max((got - predicted).abs() / predicted);
    }
    r.check(format!("(b) ladder within {:.1}% of the limit (<= 10%)", 100.0 * worst), worst <= 0.10);

    // (c) geometric upper bound finds the planted number of components
    let geo = Geometric::new(0.5).unwrap();
    let params = ClusterParams::default();
    let mut found = Vec::new();
    for planted in 0..6usize {
        let mut d: Vec<u32> = (0..5000).map(|_| 1 + geo.sample(&mut rng) as u32).collect();
        for j in 0..planted {
            d.push(40 + 15 * j as u32);
        }
        found.push(discrete_component_upper_bound(&d, &params).unwrap());
    }
    let expected: Vec<usize> = (1..=6).collect();
    r.check(format!("(c) K_H {found:?} for 0..5 planted gaps"), found == expected);
    r.finish();
}

#[test]
fn criterion_10_dos_and_mass() {
    let mut r = Report::new(10);
    let well = |x: &[f64]| (x[0] * x[0] - 1.0).powi(2);
    let space = SpaceKind::cube(1, -2.0, 2.0).unwrap();
    let mut samples = Vec::new();
    for (k, &t) in geometric_ladder(0.1, 10.0, 6).iter().enumerate() {
        let spec = ChainSpec {
            chain_id: k as u32,
            temperature: t,
            truncation: None,
            steps: 40_000,
            burn_in: 0.1,
            sigma: 0.5 * t.sqrt(),
            seed: 10,
            init: vec![if k % 2 == 0 { -1.0 } else { 1.0 }],
        };
        let run = metropolis_chain(&well, &space, &spec).unwrap();
        // the energy is even, so mirrored draws are draws from the same chain
        for s in run.samples {
            let mut m = s.clone();
            m.state = State::Continuous(vec![-s.state.coords().unwrap()[0]]);
            samples.push(s);
            samples.push(m);
        }
    }
    let energies: Vec<f64> = samples.iter().map(|s| s.energy).collect();
    let grid = build_energy_grid(&energies, 20, GridStrategy::EqualCount).unwrap();
    let dos = estimate_dos(&samples, &grid, &DosOptions::default()).unwrap();
    let quad = quadrature_dos_1d(&well, -2.0, 2.0, &grid, 4_000_000).unwrap();
    let worst = dos.values.iter().zip(&quad.values).map(|(a, b)| (a - b).abs() / b).fold(0.0, f64::max);
    r.check(format!("DOS within {:.1}% of quadrature per ring (<= 10%)", 100.0 * worst), worst <= 0.10);

    let cfg = TreeConfig { levels: 20, subsample: 1.0, ..TreeConfig::default() };
    let tree = reconstruct_on(&samples, &space, &grid, &cfg, None, Exec::Parallel).unwrap().tree;
    r.check(format!("two leaves (got {})", tree.leaf_count()), tree.leaf_count() == 2 && tree.roots.len() == 1);
    let temps = [0.1, 0.5, 1.0, 2.0, 10.0];
    let root = tree.roots[0];
    let total_ok = temps.iter().all(|&t| within(branch_mass(&tree, root, t).unwrap(), 1.0, 1e-6));
    r.check("whole-tree mass 1 at every T", total_ok);
    let leaves: Vec<usize> = tree.leaves().map(|n| n.id).collect();
    let mut split = Vec::new();
    for &t in &temps {
        let (a, b) = (branch_mass(&tree, leaves[0], t).unwrap(), branch_mass(&tree, leaves[1], t).unwrap());
        split.push(a / (a + b));
    }
    r.check(
        format!("symmetric branches share {} of the mass below the barrier", fmt(&split)),
        split.iter().all(|&s| within(s, 0.5, 1e-6)),
    );
    let mut annotated = tree.clone();
    local_dos(&mut annotated, &dos).unwrap();
    r.check("annotation is idempotent", annotated == tree);
    r.finish();
}

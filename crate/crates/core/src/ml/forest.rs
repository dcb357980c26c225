//! Random forest of Gini trees over quantile-binned features.
//!
//! Every node draws its candidate features from a generator seeded by the
//! node's path, so a depth-capped tree is exactly the unlimited tree cut at
//! that depth. The grid search exploits this: one forest per (min leaf,
//! feature fraction) pair is grown to full depth with the largest tree count,
//! and smaller configurations are read off as prefixes and truncations.

use super::features::FeatureMatrix;
use super::{ClassifierReport, MlError};
use crate::exec::par_map;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use std::fmt::Write as _;
use std::path::Path;

const LEAF: u32 = u32::MAX;
const FORMAT_HEADER: &str = "exact-tsa-forest v1";

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum FeatureFraction {
    Sqrt,
    Third,
}

impl FeatureFraction {
    pub fn count(self, p: usize) -> usize {
        let k = match self {
            FeatureFraction::Sqrt => (p as f64).sqrt().round() as usize,
            FeatureFraction::Third => p / 3,
        };
        k.clamp(1, p.max(1))
    }

    fn tag(self) -> &'static str {
        match self {
            FeatureFraction::Sqrt => "sqrt",
            FeatureFraction::Third => "third",
        }
    }

    fn from_tag(s: &str) -> Option<Self> {
        match s {
            "sqrt" => Some(FeatureFraction::Sqrt),
            "third" => Some(FeatureFraction::Third),
            _ => None,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct ForestParams {
    pub n_trees: usize,
    /// `None` grows until leaves are pure or too small.
    pub max_depth: Option<usize>,
    pub min_leaf: usize,
    pub feature_fraction: FeatureFraction,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ForestGrid {
    pub trees: Vec<usize>,
    pub depths: Vec<Option<usize>>,
    pub min_leaf: Vec<usize>,
    pub fractions: Vec<FeatureFraction>,
    /// Reweight classes to equal total weight in the Gini criterion.
    pub class_balanced: bool,
    pub max_bins: usize,
}

impl Default for ForestGrid {
    fn default() -> Self {
        ForestGrid {
            trees: vec![100, 300],
            depths: vec![Some(8), Some(16), None],
            min_leaf: vec![1, 5],
            fractions: vec![FeatureFraction::Sqrt, FeatureFraction::Third],
            class_balanced: true,
            max_bins: 64,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Node {
    /// Split feature, or `u32::MAX` at a leaf.
    pub feature: u32,
    /// Rows with `x <= threshold` go left.
    pub threshold: f64,
    pub left: u32,
    pub right: u32,
    /// Class weights `[negative, positive]` of the training rows reaching
    /// the node.
    pub weight: [f64; 2],
}

impl Node {
    fn is_leaf(&self) -> bool {
        self.feature == LEAF
    }

    fn vote(&self) -> bool {
        self.weight[1] > self.weight[0]
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Tree {
    pub nodes: Vec<Node>,
}

impl Tree {
    fn predict(&self, value: impl Fn(usize) -> f64, max_depth: Option<usize>) -> bool {
        let cap = max_depth.unwrap_or(usize::MAX);
        let mut i = 0usize;
        let mut depth = 0;
        loop {
            let n = &self.nodes[i];
            if n.is_leaf() || depth >= cap {
                return n.vote();
            }
            i = if value(n.feature as usize) <= n.threshold {
                n.left as usize
            } else {
                n.right as usize
            };
            depth += 1;
        }
    }

    fn truncate(&self, max_depth: Option<usize>) -> Tree {
        let Some(cap) = max_depth else {
            return self.clone();
        };
        let mut nodes = Vec::new();
        let mut stack = vec![(0usize, 0usize, None::<(usize, bool)>)];
        while let Some((src, depth, parent)) = stack.pop() {
            let idx = nodes.len();
            let mut node = self.nodes[src].clone();
            if let Some((p, is_left)) = parent {
                let pn: &mut Node = &mut nodes[p];
                if is_left {
                    pn.left = idx as u32;
                } else {
                    pn.right = idx as u32;
                }
            }
            let (l, r) = (node.left as usize, node.right as usize);
            let split = !node.is_leaf() && depth < cap;
            if !split {
                node.feature = LEAF;
                node.threshold = 0.0;
                node.left = 0;
                node.right = 0;
            }
            nodes.push(node);
            if split {
                stack.push((r, depth + 1, Some((idx, false))));
                stack.push((l, depth + 1, Some((idx, true))));
            }
        }
        Tree { nodes }
    }

    fn depth(&self) -> usize {
        let mut best = 0;
        let mut stack = vec![(0usize, 0usize)];
        while let Some((i, d)) = stack.pop() {
            best = best.max(d);
            let n = &self.nodes[i];
            if !n.is_leaf() {
                stack.push((n.left as usize, d + 1));
                stack.push((n.right as usize, d + 1));
            }
        }
        best
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ForestModel {
    pub feature_names: Vec<String>,
    pub params: ForestParams,
    pub seed: u64,
    pub trees: Vec<Tree>,
}

impl ForestModel {
    fn column_map(&self, x: &FeatureMatrix) -> Result<Vec<usize>, MlError> {
        self.feature_names
            .iter()
            .map(|n| {
                x.names
                    .iter()
                    .position(|m| m == n)
                    .ok_or_else(|| MlError::MissingFeature(n.clone()))
            })
            .collect()
    }

    /// Majority vote of the trees; ties go to the negative class.
    pub fn predict(&self, x: &FeatureMatrix) -> Result<Vec<bool>, MlError> {
        let cols = self.column_map(x)?;
        Ok((0..x.n_rows)
            .map(|row| {
                let pos = self
                    .trees
                    .iter()
                    .filter(|t| t.predict(|f| x.get(row, cols[f]), None))
                    .count();
                2 * pos > self.trees.len()
            })
            .collect())
    }

    pub fn to_text(&self) -> String {
        let mut s = String::new();
        let _ = writeln!(s, "{FORMAT_HEADER}");
        let _ = writeln!(s, "features {} {}", self.feature_names.len(), self.feature_names.join(" "));
        let depth = self.params.max_depth.map_or("none".to_string(), |d| d.to_string());
        let _ = writeln!(
            s,
            "params {} {} {} {} {}",
            self.params.n_trees,
            depth,
            self.params.min_leaf,
            self.params.feature_fraction.tag(),
            self.seed
        );
        for t in &self.trees {
            let _ = writeln!(s, "tree {}", t.nodes.len());
            for n in &t.nodes {
                if n.is_leaf() {
                    let _ = writeln!(s, "L {} {}", n.weight[0], n.weight[1]);
                } else {
                    let _ = writeln!(
                        s,
                        "S {} {} {} {} {} {}",
                        n.feature, n.threshold, n.left, n.right, n.weight[0], n.weight[1]
                    );
                }
            }
        }
        s
    }

    pub fn from_text(text: &str) -> Result<Self, MlError> {
        let mut lines = text.lines().enumerate().map(|(i, l)| (i + 1, l));
        let bad = |line: usize, msg: &str| MlError::ModelFormat {
            line,
            message: msg.to_string(),
        };
        let (n, header) = lines.next().ok_or_else(|| bad(1, "empty file"))?;
        if header.trim() != FORMAT_HEADER {
            return Err(bad(n, "unknown header"));
        }
        let (n, feat) = lines.next().ok_or_else(|| bad(2, "missing features line"))?;
        let mut it = feat.split_whitespace();
        if it.next() != Some("features") {
            return Err(bad(n, "expected `features`"));
        }
        let count: usize = it.next().and_then(|v| v.parse().ok()).ok_or_else(|| bad(n, "feature count"))?;
        let feature_names: Vec<String> = it.map(str::to_string).collect();
        if feature_names.len() != count {
            return Err(bad(n, "feature count does not match names"));
        }
        let (n, par) = lines.next().ok_or_else(|| bad(3, "missing params line"))?;
        let f: Vec<&str> = par.split_whitespace().collect();
        if f.len() != 6 || f[0] != "params" {
            return Err(bad(n, "malformed params"));
        }
        let num = |s: &str| s.parse::<usize>().map_err(|_| bad(n, "malformed number"));
        let params = ForestParams {
            n_trees: num(f[1])?,
            max_depth: if f[2] == "none" { None } else { Some(num(f[2])?) },
            min_leaf: num(f[3])?,
            feature_fraction: FeatureFraction::from_tag(f[4]).ok_or_else(|| bad(n, "feature fraction"))?,
        };
        let seed: u64 = f[5].parse().map_err(|_| bad(n, "seed"))?;
        let mut trees = Vec::new();
        while let Some((n, l)) = lines.next() {
            if l.trim().is_empty() {
                continue;
            }
            let size: usize = l
                .strip_prefix("tree ")
                .and_then(|v| v.trim().parse().ok())
                .ok_or_else(|| bad(n, "expected `tree <nodes>`"))?;
            let mut nodes = Vec::with_capacity(size);
            for _ in 0..size {
                let (n, l) = lines.next().ok_or_else(|| bad(n, "truncated tree"))?;
                let f: Vec<&str> = l.split_whitespace().collect();
                let fl = |s: &str| s.parse::<f64>().map_err(|_| bad(n, "malformed number"));
                let u = |s: &str| s.parse::<u32>().map_err(|_| bad(n, "malformed index"));
                let node = match f.as_slice() {
                    ["L", a, b] => Node {
                        feature: LEAF,
                        threshold: 0.0,
                        left: 0,
                        right: 0,
                        weight: [fl(a)?, fl(b)?],
                    },
                    ["S", feat, th, l, r, a, b] => {
                        let node = Node {
                            feature: u(feat)?,
                            threshold: fl(th)?,
                            left: u(l)?,
                            right: u(r)?,
                            weight: [fl(a)?, fl(b)?],
                        };
                        if node.feature as usize >= feature_names.len()
                            || node.left as usize >= size
                            || node.right as usize >= size
                        {
                            return Err(bad(n, "index out of range"));
                        }
                        node
                    }
                    _ => return Err(bad(n, "malformed node")),
                };
                nodes.push(node);
            }
            if nodes.is_empty() {
                return Err(bad(n, "empty tree"));
            }
            trees.push(Tree { nodes });
        }
        if trees.len() != params.n_trees {
            return Err(bad(0, "tree count does not match params"));
        }
        Ok(ForestModel {
            feature_names,
            params,
            seed,
            trees,
        })
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<(), MlError> {
        std::fs::write(path, self.to_text())?;
        Ok(())
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self, MlError> {
        Self::from_text(&std::fs::read_to_string(path)?)
    }

    pub fn max_tree_depth(&self) -> usize {
        self.trees.iter().map(Tree::depth).max().unwrap_or(0)
    }
}

struct Binned {
    edges: Vec<Vec<f64>>,
    bins: Vec<Vec<u8>>,
}

fn bin_edges(column: &[f64], max_bins: usize) -> Vec<f64> {
    let mut v = column.to_vec();
    v.sort_by(f64::total_cmp);
    v.dedup();
    if v.len() <= max_bins {
        return v.windows(2).map(|w| 0.5 * (w[0] + w[1])).collect();
    }
    let mut sorted = column.to_vec();
    sorted.sort_by(f64::total_cmp);
    let n = sorted.len();
    let mut edges: Vec<f64> = (1..max_bins).map(|k| sorted[k * n / max_bins]).collect();
    edges.dedup();
    // the largest value never needs an edge above it
    if edges.last() == sorted.last() {
        edges.pop();
    }
    edges
}

fn bin_matrix(x: &FeatureMatrix, max_bins: usize) -> Binned {
    let max_bins = max_bins.clamp(2, 256);
    let edges: Vec<Vec<f64>> = x.columns.iter().map(|c| bin_edges(c, max_bins)).collect();
    let bins = x
        .columns
        .iter()
        .zip(&edges)
        .map(|(c, e)| c.iter().map(|&v| e.partition_point(|&t| t < v) as u8).collect())
        .collect();
    Binned { edges, bins }
}

fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9e37_79b9_7f4a_7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

fn tree_seed(master: u64, t: usize) -> u64 {
    splitmix64(master ^ splitmix64(t as u64 + 1))
}

struct GrowCtx<'a> {
    data: &'a Binned,
    y: &'a [bool],
    class_w: [f64; 2],
    min_leaf: usize,
    mtry: usize,
}

/// Grows one unlimited-depth tree on the bootstrap sample `mult` (row
/// multiplicities).
fn grow_tree(ctx: &GrowCtx, mult: &[u32], seed: u64) -> Tree {
    let p = ctx.data.bins.len();
    let mut rows: Vec<u32> = (0..mult.len() as u32).filter(|&i| mult[i as usize] > 0).collect();
    let mut nodes: Vec<Node> = Vec::new();
    let row_w = |r: usize| -> [f64; 2] {
        let m = mult[r] as f64;
        if ctx.y[r] {
            [0.0, m * ctx.class_w[1]]
        } else {
            [m * ctx.class_w[0], 0.0]
        }
    };
    let node_weight = |rows: &[u32]| -> ([f64; 2], usize) {
        let mut w = [0.0; 2];
        let mut n = 0usize;
        for &r in rows {
            let rw = row_w(r as usize);
            w[0] += rw[0];
            w[1] += rw[1];
            n += mult[r as usize] as usize;
        }
        (w, n)
    };

    let n_bins = 257;
    let mut h0 = vec![0.0f64; n_bins];
    let mut h1 = vec![0.0f64; n_bins];
    let mut hc = vec![0usize; n_bins];

    // (node index, row range, depth, seed)
    let (w, _) = node_weight(&rows);
    nodes.push(Node {
        feature: LEAF,
        threshold: 0.0,
        left: 0,
        right: 0,
        weight: w,
    });
    let mut stack = vec![(0usize, 0usize, rows.len(), 0usize, seed)];
    while let Some((ni, lo, hi, depth, nseed)) = stack.pop() {
        let w = nodes[ni].weight;
        let count: usize = rows[lo..hi].iter().map(|&r| mult[r as usize] as usize).sum();
        if w[0] == 0.0 || w[1] == 0.0 || count < 2 * ctx.min_leaf || depth >= 64 {
            continue;
        }
        let total = w[0] + w[1];
        let parent_score = (w[0] * w[0] + w[1] * w[1]) / total;
        let mut rng = ChaCha8Rng::seed_from_u64(nseed);
        let feats = rand::seq::index::sample(&mut rng, p, ctx.mtry);
        let mut best: Option<(f64, usize, usize)> = None;
        for f in feats.iter() {
            let edges = &ctx.data.edges[f];
            if edges.is_empty() {
                continue;
            }
            let nb = edges.len() + 1;
            h0[..nb].iter_mut().for_each(|v| *v = 0.0);
            h1[..nb].iter_mut().for_each(|v| *v = 0.0);
            hc[..nb].iter_mut().for_each(|v| *v = 0);
            let col = &ctx.data.bins[f];
            for &r in &rows[lo..hi] {
                let r = r as usize;
                let b = col[r] as usize;
                let rw = row_w(r);
                h0[b] += rw[0];
                h1[b] += rw[1];
                hc[b] += mult[r] as usize;
            }
            let (mut l0, mut l1, mut lc) = (0.0, 0.0, 0usize);
            for b in 0..nb - 1 {
                l0 += h0[b];
                l1 += h1[b];
                lc += hc[b];
                if lc < ctx.min_leaf {
                    continue;
                }
                if count - lc < ctx.min_leaf {
                    break;
                }
                let (r0, r1) = (w[0] - l0, w[1] - l1);
                let (lw, rw) = (l0 + l1, r0 + r1);
                if lw <= 0.0 || rw <= 0.0 {
                    continue;
                }
                let score = (l0 * l0 + l1 * l1) / lw + (r0 * r0 + r1 * r1) / rw;
                if score > parent_score * (1.0 + 1e-12) && best.is_none_or(|(s, _, _)| score > s) {
                    best = Some((score, f, b));
                }
            }
        }
        let Some((_, f, b)) = best else {
            continue;
        };
        let col = &ctx.data.bins[f];
        // stable partition of rows[lo..hi] by bin <= b
        let slice = &mut rows[lo..hi];
        let (left, right): (Vec<u32>, Vec<u32>) = slice.iter().partition(|&&r| col[r as usize] as usize <= b);
        let mid = lo + left.len();
        slice[..left.len()].copy_from_slice(&left);
        slice[left.len()..].copy_from_slice(&right);
        let (wl, _) = node_weight(&rows[lo..mid]);
        let (wr, _) = node_weight(&rows[mid..hi]);
        let li = nodes.len();
        for weight in [wl, wr] {
            nodes.push(Node {
                feature: LEAF,
                threshold: 0.0,
                left: 0,
                right: 0,
                weight,
            });
        }
        let node = &mut nodes[ni];
        node.feature = f as u32;
        node.threshold = ctx.data.edges[f][b];
        node.left = li as u32;
        node.right = li as u32 + 1;
        stack.push((li + 1, mid, hi, depth + 1, splitmix64(nseed ^ 0x5555)));
        stack.push((li, lo, mid, depth + 1, splitmix64(nseed ^ 0xaaaa)));
    }
    Tree { nodes }
}

fn bootstrap(n: usize, seed: u64) -> Vec<u32> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut mult = vec![0u32; n];
    for _ in 0..n {
        mult[rng.random_range(0..n)] += 1;
    }
    mult
}

fn class_weights(y: &[bool], balanced: bool) -> Result<[f64; 2], MlError> {
    let pos = y.iter().filter(|&&v| v).count();
    let neg = y.len() - pos;
    if pos == 0 || neg == 0 {
        return Err(MlError::SingleClass);
    }
    Ok(if balanced {
        let n = y.len() as f64;
        [n / (2.0 * neg as f64), n / (2.0 * pos as f64)]
    } else {
        [1.0, 1.0]
    })
}

/// Grows `n_trees` unlimited-depth trees.
fn grow_forest(
    x: &FeatureMatrix,
    y: &[bool],
    n_trees: usize,
    min_leaf: usize,
    fraction: FeatureFraction,
    grid: &ForestGrid,
    seed: u64,
    threads: usize,
) -> Result<Vec<Tree>, MlError> {
    let class_w = class_weights(y, grid.class_balanced)?;
    let data = bin_matrix(x, grid.max_bins);
    let ctx = GrowCtx {
        data: &data,
        y,
        class_w,
        min_leaf: min_leaf.max(1),
        mtry: fraction.count(x.n_cols()),
    };
    let idx: Vec<usize> = (0..n_trees).collect();
    Ok(par_map(threads, &idx, |_, &t| {
        let s = tree_seed(seed, t);
        grow_tree(&ctx, &bootstrap(y.len(), s), splitmix64(s))
    }))
}

/// Trains a forest with fixed hyperparameters on all rows.
pub fn fit_forest(
    x: &FeatureMatrix,
    y: &[bool],
    params: &ForestParams,
    grid: &ForestGrid,
    seed: u64,
    threads: usize,
) -> Result<ForestModel, MlError> {
    if x.n_rows != y.len() {
        return Err(MlError::Length {
            rows: x.n_rows,
            labels: y.len(),
        });
    }
    let trees = grow_forest(
        x,
        y,
        params.n_trees,
        params.min_leaf,
        params.feature_fraction,
        grid,
        seed,
        threads,
    )?;
    Ok(ForestModel {
        feature_names: x.names.clone(),
        params: *params,
        seed,
        trees: trees.iter().map(|t| t.truncate(params.max_depth)).collect(),
    })
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GridPoint {
    pub params: ForestParams,
    pub validation: ClassifierReport,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TrainOutcome {
    pub model: ForestModel,
    pub validation: ClassifierReport,
    pub grid: Vec<GridPoint>,
}

/// Chronological 80/20 split, grid search on validation balanced accuracy
/// (first best in grid order wins), returning the selected model trained on
/// the first 80%.
pub fn train_forest(
    x: &FeatureMatrix,
    y: &[bool],
    grid: &ForestGrid,
    seed: u64,
    threads: usize,
) -> Result<TrainOutcome, MlError> {
    if x.n_rows != y.len() {
        return Err(MlError::Length {
            rows: x.n_rows,
            labels: y.len(),
        });
    }
    let n_train = x.n_rows * 4 / 5;
    let train = x.rows(0..n_train);
    let valid = x.rows(n_train..x.n_rows);
    let (y_train, y_valid) = y.split_at(n_train);
    class_weights(y_train, grid.class_balanced)?;
    let max_trees = grid.trees.iter().copied().max().unwrap_or(1).max(1);

    let mut points = Vec::new();
    let mut best: Option<(f64, ForestParams, usize)> = None;
    let mut forests = Vec::new();
    for &min_leaf in &grid.min_leaf {
        for &fraction in &grid.fractions {
            let trees = grow_forest(&train, y_train, max_trees, min_leaf, fraction, grid, seed, threads)?;
            forests.push(trees);
            let trees = forests.last().expect("just pushed");
            for &depth in &grid.depths {
                // votes[t][row]
                let votes: Vec<Vec<bool>> = par_map(threads, trees, |_, t| {
                    (0..valid.n_rows).map(|row| t.predict(|f| valid.get(row, f), depth)).collect()
                });
                for &n_trees in &grid.trees {
                    let pred: Vec<bool> = (0..valid.n_rows)
                        .map(|row| 2 * votes[..n_trees].iter().filter(|v| v[row]).count() > n_trees)
                        .collect();
                    let report = ClassifierReport::from_predictions(&pred, y_valid);
                    let params = ForestParams {
                        n_trees,
                        max_depth: depth,
                        min_leaf,
                        feature_fraction: fraction,
                    };
                    let ba = report.balanced_accuracy;
                    if best.is_none_or(|(b, _, _)| ba > b) {
                        best = Some((ba, params, forests.len() - 1));
                    }
                    points.push(GridPoint {
                        params,
                        validation: report,
                    });
                }
            }
        }
    }
    let (_, params, fi) = best.ok_or(MlError::EmptyGrid)?;
    let model = ForestModel {
        feature_names: x.names.clone(),
        params,
        seed,
        trees: forests[fi][..params.n_trees]
            .iter()
            .map(|t| t.truncate(params.max_depth))
            .collect(),
    };
    let validation = ClassifierReport::from_predictions(&model.predict(&valid)?, y_valid);
    Ok(TrainOutcome {
        model,
        validation,
        grid: points,
    })
}

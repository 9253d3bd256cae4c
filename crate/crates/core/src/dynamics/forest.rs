//! Regression random forest, used only for its impurity-decrease importance.

use rand::seq::index;
use rand::Rng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::enet::DesignMatrix;
use crate::rng;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ForestConfig {
    pub trees: usize,
    /// Features tried per split; `None` means `⌈k/3⌉`.
    pub mtry: Option<usize>,
    /// Nodes with fewer rows than this are not split.
    pub min_node_size: usize,
}

impl Default for ForestConfig {
    fn default() -> Self {
        Self {
            trees: 500,
            mtry: None,
            min_node_size: 5,
        }
    }
}

/// Total decrease in squared error attributed to each column, summed over
/// trees. Each tree draws a bootstrap sample and its own stream from `seed`.
pub fn forest_importance(x: &DesignMatrix, y: &[f64], cfg: &ForestConfig, seed: u64) -> Vec<f64> {
    let k = x.ncols();
    let n = x.nrows();
    let mut importance = vec![0.0; k];
    if k == 0 || n < 2 {
        return importance;
    }
    let mtry = cfg.mtry.unwrap_or_else(|| k.div_ceil(3)).clamp(1, k);
    let cols: Vec<Vec<f64>> = x.data().column_iter().map(|c| c.iter().copied().collect()).collect();
    for t in 0..cfg.trees {
        let mut rng = rng::rng_for(seed, t as u64);
        let rows: Vec<usize> = (0..n).map(|_| rng.random_range(0..n)).collect();
        let mut grower = Grower {
            cols: &cols,
            y,
            mtry,
            min_node: cfg.min_node_size.max(2),
            rng,
            importance: &mut importance,
        };
        grower.grow(rows);
    }
    importance
}

struct Grower<'a> {
    cols: &'a [Vec<f64>],
    y: &'a [f64],
    mtry: usize,
    min_node: usize,
    rng: ChaCha8Rng,
    importance: &'a mut [f64],
}

struct Split {
    feature: usize,
    threshold: f64,
    gain: f64,
}

impl Grower<'_> {
    fn grow(&mut self, root: Vec<usize>) {
        let mut stack = vec![root];
        while let Some(rows) = stack.pop() {
            if rows.len() < self.min_node {
                continue;
            }
            let Some(split) = self.best_split(&rows) else {
                continue;
            };
            self.importance[split.feature] += split.gain;
            let col = &self.cols[split.feature];
            let (left, right): (Vec<usize>, Vec<usize>) = rows.iter().partition(|&&i| col[i] <= split.threshold);
            stack.push(right);
            stack.push(left);
        }
    }

    fn best_split(&mut self, rows: &[usize]) -> Option<Split> {
        let n = rows.len() as f64;
        let total: f64 = rows.iter().map(|&i| self.y[i]).sum();
        let total_sq: f64 = rows.iter().map(|&i| self.y[i] * self.y[i]).sum();
        let sse = total_sq - total * total / n;
        if !(sse > 1e-12 * total_sq.max(1e-300)) {
            return None;
        }
        let features = index::sample(&mut self.rng, self.cols.len(), self.mtry);
        let mut best: Option<Split> = None;
        let mut order: Vec<usize> = rows.to_vec();
        for f in features.iter() {
            let col = &self.cols[f];
            order.sort_by(|&a, &b| col[a].total_cmp(&col[b]));
            let (mut sum_l, mut sq_l) = (0.0, 0.0);
            for p in 0..order.len() - 1 {
                let yi = self.y[order[p]];
                sum_l += yi;
                sq_l += yi * yi;
                let (lo, hi) = (col[order[p]], col[order[p + 1]]);
                if lo == hi {
                    continue;
                }
                let nl = (p + 1) as f64;
                let nr = n - nl;
                let sum_r = total - sum_l;
                let sq_r = total_sq - sq_l;
                let child = (sq_l - sum_l * sum_l / nl) + (sq_r - sum_r * sum_r / nr);
                let gain = sse - child;
                if gain > 0.0 && best.as_ref().is_none_or(|b| gain > b.gain) {
                    best = Some(Split {
                        feature: f,
                        threshold: 0.5 * (lo + hi),
                        gain,
                    });
                }
            }
        }
        best
    }
}

/// Rank of each column among the `selected` ones by forest importance:
/// `(m − position + 1)/m` with the most important at position 1, so it scores 1.
/// Unselected columns score 0; ties keep column order.
pub fn rf_relative_rank(
    x: &DesignMatrix,
    y: &[f64],
    selected: &[&str],
    cfg: &ForestConfig,
    seed: u64,
) -> Vec<(String, f64)> {
    let names = x.names();
    let mut out: Vec<(String, f64)> = names.iter().map(|n| (n.clone(), 0.0)).collect();
    let picked: Vec<usize> = (0..names.len())
        .filter(|&j| selected.contains(&names[j].as_str()))
        .collect();
    if picked.is_empty() {
        return out;
    }
    let importance = forest_importance(x, y, cfg, seed);
    let mut order = picked.clone();
    order.sort_by(|&a, &b| importance[b].total_cmp(&importance[a]).then(a.cmp(&b)));
    let m = order.len() as f64;
    for (pos, &j) in order.iter().enumerate() {
        out[j].1 = (m - pos as f64) / m;
    }
    out
}

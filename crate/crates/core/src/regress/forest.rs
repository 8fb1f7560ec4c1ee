//! Random forest of multi-output CART regression trees. Trees are grown on
//! bootstrap resamples with a variance-sum split criterion over all target
//! columns; a leaf stores the mean target vector and the forest prediction is
//! the average over trees.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::Result;
use crate::math::derive_seed;
use crate::regress::TrainingSet;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ForestParams {
    pub n_trees: usize,
    pub max_depth: usize,
    pub min_leaf: usize,
    pub seed: u64,
}

impl Default for ForestParams {
    fn default() -> Self {
        Self { n_trees: 100, max_depth: 5, min_leaf: 1, seed: 0 }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
enum Node {
    Split { feature: usize, threshold: f64, left: usize, right: usize },
    Leaf { value: Vec<f64> },
}

#[derive(Debug, Clone, Serialize, Deserialize)]
struct Tree {
    nodes: Vec<Node>,
}

impl Tree {
    fn predict<'a>(&'a self, x: &[f64]) -> &'a [f64] {
        let mut idx = 0;
        loop {
            match &self.nodes[idx] {
                Node::Leaf { value } => return value,
                Node::Split { feature, threshold, left, right } => {
                    idx = if x[*feature] <= *threshold { *left } else { *right };
                }
            }
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ForestModel {
    trees: Vec<Tree>,
    n_features: usize,
    n_targets: usize,
}

impl ForestModel {
    pub fn n_features(&self) -> usize {
        self.n_features
    }

    pub fn n_targets(&self) -> usize {
        self.n_targets
    }

    pub fn n_trees(&self) -> usize {
        self.trees.len()
    }

    pub fn predict(&self, x: &[f64]) -> Vec<f64> {
        let mut out = vec![0.0; self.n_targets];
        for tree in &self.trees {
            for (o, v) in out.iter_mut().zip(tree.predict(x)) {
                *o += v;
            }
        }
        let inv = 1.0 / self.trees.len() as f64;
        for o in out.iter_mut() {
            *o *= inv;
        }
        out
    }
}

struct TreeBuilder<'a> {
    ts: &'a TrainingSet,
    params: &'a ForestParams,
    nodes: Vec<Node>,
}

impl<'a> TreeBuilder<'a> {
    fn leaf_value(&self, indices: &[usize]) -> Vec<f64> {
        let m = self.ts.n_targets();
        let mut mean = vec![0.0; m];
        for &i in indices {
            for (s, v) in mean.iter_mut().zip(self.ts.y_row(i)) {
                *s += v;
            }
        }
        let inv = 1.0 / indices.len() as f64;
        for s in mean.iter_mut() {
            *s *= inv;
        }
        mean
    }

    /// Best (feature, threshold) by the variance-sum criterion, or None when
    /// no admissible split improves on the parent node.
    fn best_split(&self, indices: &mut [usize]) -> Option<(usize, f64, usize)> {
        let m = self.ts.n_targets();
        let n = indices.len();
        let min_leaf = self.params.min_leaf.max(1);
        if n < 2 * min_leaf {
            return None;
        }
        let mut total = vec![0.0; m];
        for &i in indices.iter() {
            for (s, v) in total.iter_mut().zip(self.ts.y_row(i)) {
                *s += v;
            }
        }

        let mut best: Option<(usize, f64, usize, f64)> = None;
        let mut left = vec![0.0; m];
        for f in 0..self.ts.n_features() {
            indices.sort_unstable_by(|&a, &b| {
                self.ts.x_row(a)[f].total_cmp(&self.ts.x_row(b)[f])
            });
            left.iter_mut().for_each(|v| *v = 0.0);
            for pos in 0..n - 1 {
                let i = indices[pos];
                for (s, v) in left.iter_mut().zip(self.ts.y_row(i)) {
                    *s += v;
                }
                let n_l = pos + 1;
                let n_r = n - n_l;
                if n_l < min_leaf || n_r < min_leaf {
                    continue;
                }
                let xv = self.ts.x_row(i)[f];
                let xn = self.ts.x_row(indices[pos + 1])[f];
                if xn <= xv {
                    continue; // ties cannot be separated
                }
                // maximizing sum_t (S_L^2/n_L + S_R^2/n_R) minimizes the SSE sum
                let mut score = 0.0;
                for t in 0..m {
                    let sl = left[t];
                    let sr = total[t] - sl;
                    score += sl * sl / n_l as f64 + sr * sr / n_r as f64;
                }
                if best.map_or(true, |(.., s)| score > s) {
                    best = Some((f, 0.5 * (xv + xn), n_l, score));
                }
            }
        }
        best.map(|(f, thr, n_l, _)| (f, thr, n_l))
    }

    fn grow(&mut self, indices: &mut [usize], depth: usize) -> usize {
        let make_leaf = depth >= self.params.max_depth
            || indices.len() < 2
            || indices.len() < 2 * self.params.min_leaf.max(1);
        if !make_leaf {
            if let Some((feature, threshold, n_l)) = self.best_split(indices) {
                // best_split leaves `indices` sorted by the chosen feature only
                // when it was the last one scanned; re-partition explicitly
                indices.sort_unstable_by(|&a, &b| {
                    self.ts.x_row(a)[feature].total_cmp(&self.ts.x_row(b)[feature])
                });
                let slot = self.nodes.len();
                self.nodes.push(Node::Leaf { value: Vec::new() }); // placeholder
                let (li, ri) = indices.split_at_mut(n_l);
                let left = self.grow(li, depth + 1);
                let right = self.grow(ri, depth + 1);
                self.nodes[slot] = Node::Split { feature, threshold, left, right };
                return slot;
            }
        }
        let slot = self.nodes.len();
        self.nodes.push(Node::Leaf { value: self.leaf_value(indices) });
        slot
    }
}

const TREE_STREAM: u64 = 0x74726565; // "tree"

/// Grows `params.n_trees` trees on bootstrap resamples of `ts`. Deterministic
/// in `params.seed`.
pub fn fit_random_forest(ts: &TrainingSet, params: &ForestParams) -> Result<ForestModel> {
    let n = ts.n_rows();
    let n_trees = params.n_trees.max(1);
    let mut trees = Vec::with_capacity(n_trees);
    for t in 0..n_trees {
        let mut rng = ChaCha8Rng::seed_from_u64(derive_seed(params.seed, TREE_STREAM, t as u64));
        let mut indices: Vec<usize> = (0..n).map(|_| rng.gen_range(0..n)).collect();
        let mut builder = TreeBuilder { ts, params, nodes: Vec::new() };
        builder.grow(&mut indices, 0);
        trees.push(Tree { nodes: builder.nodes });
    }
    Ok(ForestModel { trees, n_features: ts.n_features(), n_targets: ts.n_targets() })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::regress::TrainingSet;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;
    use rand_distr::{Distribution, StandardNormal};

    #[test]
    fn single_row_yields_constant_predictor() {
        let ts = TrainingSet::new(vec![0.4], 1, vec![1.7, -2.0], 2).unwrap();
        let model = fit_random_forest(&ts, &ForestParams { n_trees: 20, ..Default::default() })
            .unwrap();
        for probe in [-10.0, 0.4, 3.0] {
            let got = model.predict(&[probe]);
            assert!((got[0] - 1.7).abs() < 1e-12 && (got[1] + 2.0).abs() < 1e-12);
        }
    }

    #[test]
    fn zero_depth_predicts_the_training_mean() {
        // constant targets make every bootstrap mean the exact training mean
        let n = 50;
        let x: Vec<f64> = (0..n).map(|i| i as f64).collect();
        let ts = TrainingSet::new(x.clone(), 1, vec![3.25; n], 1).unwrap();
        let model = fit_random_forest(
            &ts,
            &ForestParams { n_trees: 10, max_depth: 0, ..Default::default() },
        )
        .unwrap();
        assert_eq!(model.predict(&[17.0]), vec![3.25]);

        // with varying targets each tree predicts its bootstrap mean, which
        // averages out near the training mean across trees
        let y: Vec<f64> = (0..n).map(|i| (i as f64 * 0.703).sin()).collect();
        let mean: f64 = y.iter().sum::<f64>() / n as f64;
        let ts = TrainingSet::new(x, 1, y, 1).unwrap();
        let model = fit_random_forest(
            &ts,
            &ForestParams { n_trees: 400, max_depth: 0, seed: 5, ..Default::default() },
        )
        .unwrap();
        let got = model.predict(&[17.0])[0];
        assert!((got - mean).abs() < 0.08, "forest mean {got} vs training mean {mean}");
    }

    #[test]
    fn recovers_sine_within_noise_floor() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let sigma = 0.1;
        let n = 2000;
        let mut x = Vec::with_capacity(n);
        let mut y = Vec::with_capacity(n);
        for i in 0..n {
            let v = i as f64 / n as f64 * 2.0 - 1.0;
            let noise: f64 = StandardNormal.sample(&mut rng);
            x.push(v);
            y.push((4.0 * v).sin() + sigma * noise);
        }
        let ts = TrainingSet::new(x, 1, y, 1).unwrap();
        let model = fit_random_forest(
            &ts,
            &ForestParams { n_trees: 100, max_depth: 8, min_leaf: 5, seed: 3 },
        )
        .unwrap();
        let mut acc = 0.0;
        let mut cnt = 0;
        let mut t = -0.95;
        while t < 0.95 {
            let got = model.predict(&[t])[0];
            let want = (4.0 * t).sin();
            acc += (got - want) * (got - want);
            cnt += 1;
            t += 0.01;
        }
        let rmse = (acc / cnt as f64).sqrt();
        assert!(rmse < 1.5 * sigma, "held-out RMSE {rmse} above noise floor");
    }

    #[test]
    fn fit_is_deterministic_in_seed() {
        let x: Vec<f64> = (0..100).map(|i| (i as f64 * 0.11).fract()).collect();
        let y: Vec<f64> = x.iter().map(|v| v * v).collect();
        let ts = TrainingSet::new(x, 1, y, 1).unwrap();
        let p = ForestParams { n_trees: 25, seed: 42, ..Default::default() };
        let a = fit_random_forest(&ts, &p).unwrap();
        let b = fit_random_forest(&ts, &p).unwrap();
        for probe in [0.1, 0.5, 0.9] {
            assert_eq!(a.predict(&[probe]), b.predict(&[probe]));
        }
        let c = fit_random_forest(&ts, &ForestParams { seed: 43, ..p }).unwrap();
        assert!((0..20).any(|i| {
            let probe = i as f64 / 20.0;
            a.predict(&[probe]) != c.predict(&[probe])
        }));
    }

    #[test]
    fn predictions_stay_within_target_range() {
        let mut rng = ChaCha8Rng::seed_from_u64(29);
        let n = 500;
        let x: Vec<f64> = (0..n).map(|_| StandardNormal.sample(&mut rng)).collect();
        let y: Vec<f64> = x
            .iter()
            .flat_map(|v| {
                let e: f64 = StandardNormal.sample(&mut rng);
                [v * 2.0 + e, -v + 0.2 * e]
            })
            .collect();
        let ts = TrainingSet::new(x, 1, y.clone(), 2).unwrap();
        let model = fit_random_forest(&ts, &ForestParams::default()).unwrap();
        for t in 0..2 {
            let col: Vec<f64> = y.iter().skip(t).step_by(2).copied().collect();
            let (lo, hi) = col
                .iter()
                .fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), &v| (a.min(v), b.max(v)));
            for i in -30..30 {
                let pred = model.predict(&[i as f64 * 0.1])[t];
                assert!(pred >= lo && pred <= hi, "prediction {pred} outside [{lo}, {hi}]");
            }
        }
    }

    #[test]
    fn multi_feature_split_uses_the_informative_column() {
        // feature 0 is noise, feature 1 carries the signal
        let mut rng = ChaCha8Rng::seed_from_u64(31);
        let n = 800;
        let mut x = Vec::with_capacity(2 * n);
        let mut y = Vec::with_capacity(n);
        for _ in 0..n {
            let noise: f64 = StandardNormal.sample(&mut rng);
            let sig: f64 = StandardNormal.sample(&mut rng);
            x.push(noise);
            x.push(sig);
            y.push(if sig > 0.0 { 1.0 } else { -1.0 });
        }
        let ts = TrainingSet::new(x, 2, y, 1).unwrap();
        let model = fit_random_forest(
            &ts,
            &ForestParams { n_trees: 30, max_depth: 3, min_leaf: 5, seed: 77 },
        )
        .unwrap();
        assert!(model.predict(&[0.0, 1.5])[0] > 0.8);
        assert!(model.predict(&[0.0, -1.5])[0] < -0.8);
    }
}

//! Random forests of CART trees over multi-output targets.
//!
//! Node impurity is the summed per-output variance. For regression on
//! direction vectors this is variance reduction; for one-hot class targets
//! it equals the Gini impurity `1 − Σ p_c²`, so one splitter serves both
//! heads and leaves hold class frequencies.

use rand::seq::index::sample;
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Node {
    Split {
        feature: usize,
        threshold: f64,
        left: usize,
        right: usize,
    },
    Leaf {
        value: Vec<f64>,
    },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Tree {
    pub nodes: Vec<Node>,
}

impl Tree {
    pub fn predict(&self, x: &[f64]) -> &[f64] {
        let mut i = 0;
        loop {
            match &self.nodes[i] {
                Node::Split {
                    feature,
                    threshold,
                    left,
                    right,
                } => {
                    i = if x[*feature] <= *threshold {
                        *left
                    } else {
                        *right
                    }
                }
                Node::Leaf { value } => return value,
            }
        }
    }

    pub fn depth(&self) -> usize {
        fn walk(nodes: &[Node], i: usize) -> usize {
            match &nodes[i] {
                Node::Leaf { .. } => 0,
                Node::Split { left, right, .. } => 1 + walk(nodes, *left).max(walk(nodes, *right)),
            }
        }
        walk(&self.nodes, 0)
    }
}

#[derive(Debug, Clone, Copy)]
pub struct TreeOptions {
    pub max_depth: Option<usize>,
    pub min_samples_leaf: usize,
    pub max_features: usize,
}

struct Builder<'a, R> {
    x: &'a [&'a [f64]],
    y: &'a [&'a [f64]],
    outputs: usize,
    opt: TreeOptions,
    rng: &'a mut R,
    nodes: Vec<Node>,
}

struct BestSplit {
    feature: usize,
    threshold: f64,
    /// Number of samples going left after sorting by the feature.
    n_left: usize,
    score: f64,
}

impl<R: Rng> Builder<'_, R> {
    fn mean(&self, idx: &[usize]) -> Vec<f64> {
        let mut m = vec![0.0; self.outputs];
        for &i in idx {
            for (a, b) in m.iter_mut().zip(self.y[i]) {
                *a += b;
            }
        }
        m.iter_mut().for_each(|v| *v /= idx.len() as f64);
        m
    }

    fn impurity(&self, idx: &[usize]) -> f64 {
        let m = self.mean(idx);
        idx.iter()
            .map(|&i| {
                self.y[i]
                    .iter()
                    .zip(&m)
                    .map(|(a, b)| (a - b) * (a - b))
                    .sum::<f64>()
            })
            .sum::<f64>()
            / idx.len() as f64
    }

    /// Best split over a random feature subset, maximizing
    /// `|S_L|²/n_L + |S_R|²/n_R`, which minimizes the weighted child impurity.
    fn best_split(&mut self, idx: &mut [usize]) -> Option<BestSplit> {
        let p = self.x[0].len();
        let k = self.opt.max_features.min(p);
        let features = sample(self.rng, p, k).into_vec();
        let n = idx.len();
        let min_leaf = self.opt.min_samples_leaf;
        let mut total = vec![0.0; self.outputs];
        for &i in idx.iter() {
            for (a, b) in total.iter_mut().zip(self.y[i]) {
                *a += b;
            }
        }
        let parent = total.iter().map(|v| v * v).sum::<f64>() / n as f64;
        let mut best: Option<BestSplit> = None;
        let mut left = vec![0.0; self.outputs];
        for f in features {
            idx.sort_by(|&a, &b| self.x[a][f].total_cmp(&self.x[b][f]));
            left.fill(0.0);
            for pos in 0..n - 1 {
                for (a, b) in left.iter_mut().zip(self.y[idx[pos]]) {
                    *a += b;
                }
                let nl = pos + 1;
                let (lo, hi) = (self.x[idx[pos]][f], self.x[idx[pos + 1]][f]);
                if lo == hi || nl < min_leaf || n - nl < min_leaf {
                    continue;
                }
                let sl: f64 = left.iter().map(|v| v * v).sum();
                let sr: f64 = left
                    .iter()
                    .zip(&total)
                    .map(|(l, t)| (t - l) * (t - l))
                    .sum();
                let score = sl / nl as f64 + sr / (n - nl) as f64;
                if score > parent + 1e-12 && best.as_ref().is_none_or(|b| score > b.score) {
                    let mid = lo + (hi - lo) / 2.0;
                    best = Some(BestSplit {
                        feature: f,
                        threshold: if mid < hi { mid } else { lo },
                        n_left: nl,
                        score,
                    });
                }
            }
        }
        best
    }

    fn grow(&mut self, idx: &mut [usize], depth: usize) -> usize {
        let id = self.nodes.len();
        self.nodes.push(Node::Leaf {
            value: self.mean(idx),
        });
        let stop = idx.len() < 2 * self.opt.min_samples_leaf
            || self.opt.max_depth.is_some_and(|d| depth >= d)
            || self.impurity(idx) <= 1e-15;
        if stop {
            return id;
        }
        let Some(split) = self.best_split(idx) else {
            return id;
        };
        let f = split.feature;
        idx.sort_by(|&a, &b| self.x[a][f].total_cmp(&self.x[b][f]));
        let (l, r) = idx.split_at_mut(split.n_left);
        let left = self.grow(l, depth + 1);
        let right = self.grow(r, depth + 1);
        self.nodes[id] = Node::Split {
            feature: f,
            threshold: split.threshold,
            left,
            right,
        };
        id
    }
}

/// Grows one tree on the samples listed in `idx` (repeats allowed).
pub fn grow_tree<R: Rng>(
    x: &[&[f64]],
    y: &[&[f64]],
    idx: &mut [usize],
    opt: TreeOptions,
    rng: &mut R,
) -> Tree {
    let mut b = Builder {
        x,
        y,
        outputs: y[0].len(),
        opt,
        rng,
        nodes: Vec::new(),
    };
    b.grow(idx, 0);
    Tree { nodes: b.nodes }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Forest {
    pub trees: Vec<Tree>,
    pub outputs: usize,
}

impl Forest {
    pub fn fit<R: Rng>(
        x: &[&[f64]],
        y: &[&[f64]],
        n_trees: usize,
        bootstrap: bool,
        opt: TreeOptions,
        rng: &mut R,
    ) -> Result<Forest> {
        if x.is_empty() {
            return Err(Error::EmptySplit("training"));
        }
        if x.len() != y.len() {
            return Err(Error::LengthMismatch(x.len(), y.len()));
        }
        let n = x.len();
        let trees = (0..n_trees)
            .map(|_| {
                let mut idx: Vec<usize> = if bootstrap {
                    (0..n).map(|_| rng.random_range(0..n)).collect()
                } else {
                    (0..n).collect()
                };
                grow_tree(x, y, &mut idx, opt, rng)
            })
            .collect();
        Ok(Forest {
            trees,
            outputs: y[0].len(),
        })
    }

    /// Mean of the trees' leaf values.
    pub fn predict(&self, x: &[f64]) -> Vec<f64> {
        let mut out = vec![0.0; self.outputs];
        for t in &self.trees {
            for (o, v) in out.iter_mut().zip(t.predict(x)) {
                *o += v;
            }
        }
        out.iter_mut().for_each(|v| *v /= self.trees.len() as f64);
        out
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn opts(depth: Option<usize>, features: usize) -> TreeOptions {
        TreeOptions {
            max_depth: depth,
            min_samples_leaf: 1,
            max_features: features,
        }
    }

    #[test]
    fn stump_on_two_points() {
        let xs = [[0.0, 5.0], [1.0, 5.0]];
        let ys = [[1.0, 0.0], [0.0, 1.0]];
        let x: Vec<&[f64]> = xs.iter().map(|r| r.as_slice()).collect();
        let y: Vec<&[f64]> = ys.iter().map(|r| r.as_slice()).collect();
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        let f = Forest::fit(&x, &y, 1, false, opts(Some(1), 2), &mut rng).unwrap();
        assert_eq!(f.trees[0].depth(), 1);
        assert_eq!(f.predict(&[0.0, 5.0]), vec![1.0, 0.0]);
        assert_eq!(f.predict(&[1.0, 5.0]), vec![0.0, 1.0]);
    }

    #[test]
    fn variance_on_one_hot_is_gini() {
        let ys = [
            [1.0, 0.0, 0.0],
            [1.0, 0.0, 0.0],
            [0.0, 1.0, 0.0],
            [0.0, 0.0, 1.0],
        ];
        let y: Vec<&[f64]> = ys.iter().map(|r| r.as_slice()).collect();
        let x: Vec<&[f64]> = vec![&[0.0][..]; 4];
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        let b = Builder {
            x: &x,
            y: &y,
            outputs: 3,
            opt: opts(None, 1),
            rng: &mut rng,
            nodes: vec![],
        };
        let gini = 1.0 - (0.5f64.powi(2) + 0.25f64.powi(2) * 2.0);
        assert!((b.impurity(&[0, 1, 2, 3]) - gini).abs() < 1e-15);
    }

    #[test]
    fn deep_tree_memorizes() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let xs: Vec<Vec<f64>> = (0..60)
            .map(|_| (0..4).map(|_| rng.random_range(0.0..1.0)).collect())
            .collect();
        let ys: Vec<Vec<f64>> = xs.iter().map(|x| vec![x[0] * x[1], x[2] - x[3]]).collect();
        let x: Vec<&[f64]> = xs.iter().map(Vec::as_slice).collect();
        let y: Vec<&[f64]> = ys.iter().map(Vec::as_slice).collect();
        let f = Forest::fit(&x, &y, 1, false, opts(None, 4), &mut rng).unwrap();
        for (xi, yi) in x.iter().zip(&y) {
            assert_eq!(f.predict(xi), yi.to_vec());
        }
    }

    #[test]
    fn bagged_forest_generalizes_threshold() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let xs: Vec<Vec<f64>> = (0..200)
            .map(|_| (0..3).map(|_| rng.random_range(0.0..1.0)).collect())
            .collect();
        let ys: Vec<Vec<f64>> = xs
            .iter()
            .map(|x| {
                if x[1] > 0.5 {
                    vec![1.0, 0.0]
                } else {
                    vec![0.0, 1.0]
                }
            })
            .collect();
        let x: Vec<&[f64]> = xs.iter().map(Vec::as_slice).collect();
        let y: Vec<&[f64]> = ys.iter().map(Vec::as_slice).collect();
        let f = Forest::fit(&x, &y, 25, true, opts(None, 2), &mut rng).unwrap();
        assert!(f.predict(&[0.5, 0.9, 0.5])[0] > 0.8);
        assert!(f.predict(&[0.5, 0.1, 0.5])[1] > 0.8);
    }
}

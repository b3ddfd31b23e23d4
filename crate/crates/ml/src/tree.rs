//! CART decision trees: greedy binary splits chosen by Gini impurity for
//! classification and by squared-error reduction for regression.

use rand::seq::index::sample;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::data::{Matrix, Task};
use crate::error::{MlError, Result};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TreeParams {
    pub max_depth: usize,
    /// Features examined per split; `None` examines all of them.
    pub max_features: Option<usize>,
    pub min_samples_split: usize,
    pub seed: u64,
}

impl TreeParams {
    pub fn new(max_depth: usize, seed: u64) -> Self {
        Self {
            max_depth,
            max_features: None,
            min_samples_split: 2,
            seed,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum Node {
    Leaf {
        value: f64,
    },
    Split {
        feature: usize,
        threshold: f64,
        left: usize,
        right: usize,
    },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DecisionTree {
    task: Task,
    n_features: usize,
    nodes: Vec<Node>,
}

impl DecisionTree {
    /// Fits on all rows of `x`.
    pub fn fit(x: &Matrix, y: &[f64], task: Task, params: &TreeParams) -> Result<Self> {
        let indices: Vec<usize> = (0..x.rows()).collect();
        Self::fit_indices(x, y, &indices, task, params)
    }

    /// Fits on the rows listed in `indices`; repeats act as sample weights.
    pub fn fit_indices(
        x: &Matrix,
        y: &[f64],
        indices: &[usize],
        task: Task,
        params: &TreeParams,
    ) -> Result<Self> {
        if x.rows() != y.len() {
            return Err(MlError::LengthMismatch(x.rows(), y.len()));
        }
        if indices.is_empty() {
            return Err(MlError::EmptyInput);
        }
        if let Some(0) = params.max_features {
            return Err(MlError::InvalidParameter(
                "max_features must be positive".into(),
            ));
        }
        let mut builder = Builder {
            x,
            y,
            task,
            params,
            rng: ChaCha8Rng::seed_from_u64(params.seed),
            nodes: Vec::new(),
            scratch: Vec::with_capacity(indices.len()),
        };
        let mut idx = indices.to_vec();
        builder.grow(&mut idx, 0);
        Ok(Self {
            task,
            n_features: x.cols(),
            nodes: builder.nodes,
        })
    }

    pub fn task(&self) -> Task {
        self.task
    }

    pub fn n_features(&self) -> usize {
        self.n_features
    }

    pub fn nodes(&self) -> &[Node] {
        &self.nodes
    }

    /// Index of the leaf `row` falls into.
    pub fn leaf_of(&self, row: &[f64]) -> usize {
        let mut at = 0;
        loop {
            match &self.nodes[at] {
                Node::Leaf { .. } => return at,
                Node::Split {
                    feature,
                    threshold,
                    left,
                    right,
                } => {
                    at = if row[*feature] <= *threshold {
                        *left
                    } else {
                        *right
                    }
                }
            }
        }
    }

    pub fn predict_row(&self, row: &[f64]) -> f64 {
        match self.nodes[self.leaf_of(row)] {
            Node::Leaf { value } => value,
            Node::Split { .. } => unreachable!("leaf_of returns leaves"),
        }
    }

    pub(crate) fn set_leaf_value(&mut self, node: usize, value: f64) {
        if let Node::Leaf { value: v } = &mut self.nodes[node] {
            *v = value;
        }
    }

    /// Edges on the longest root-to-leaf path.
    pub fn depth(&self) -> usize {
        fn walk(nodes: &[Node], at: usize) -> usize {
            match &nodes[at] {
                Node::Leaf { .. } => 0,
                Node::Split { left, right, .. } => 1 + walk(nodes, *left).max(walk(nodes, *right)),
            }
        }
        walk(&self.nodes, 0)
    }

    pub(crate) fn validate(&self) -> std::result::Result<(), String> {
        if self.nodes.is_empty() {
            return Err("tree has no nodes".into());
        }
        for (i, node) in self.nodes.iter().enumerate() {
            match node {
                Node::Leaf { value } if !value.is_finite() => {
                    return Err(format!("node {i}: non-finite leaf"))
                }
                Node::Split {
                    feature,
                    threshold,
                    left,
                    right,
                } => {
                    // children are always stored after their parent, which rules out cycles
                    if *feature >= self.n_features
                        || !threshold.is_finite()
                        || *left <= i
                        || *right <= i
                        || *left >= self.nodes.len()
                        || *right >= self.nodes.len()
                    {
                        return Err(format!("node {i}: malformed split"));
                    }
                }
                _ => {}
            }
        }
        Ok(())
    }
}

struct Builder<'a> {
    x: &'a Matrix,
    y: &'a [f64],
    task: Task,
    params: &'a TreeParams,
    rng: ChaCha8Rng,
    nodes: Vec<Node>,
    scratch: Vec<(f64, f64)>,
}

struct BestSplit {
    feature: usize,
    threshold: f64,
    cost: f64,
}

impl Builder<'_> {
    fn leaf_value(&self, idx: &[usize]) -> f64 {
        match self.task {
            Task::Classification => {
                let pos = idx.iter().filter(|&&i| self.y[i] > 0.5).count();
                // ties go to the negative class
                if 2 * pos > idx.len() {
                    1.0
                } else {
                    0.0
                }
            }
            Task::Regression => idx.iter().map(|&i| self.y[i]).sum::<f64>() / idx.len() as f64,
        }
    }

    fn is_pure(&self, idx: &[usize]) -> bool {
        let first = self.y[idx[0]];
        idx.iter().all(|&i| self.y[i] == first)
    }

    fn grow(&mut self, idx: &mut [usize], depth: usize) -> usize {
        let id = self.nodes.len();
        self.nodes.push(Node::Leaf {
            value: self.leaf_value(idx),
        });
        if depth >= self.params.max_depth
            || idx.len() < self.params.min_samples_split.max(2)
            || self.is_pure(idx)
        {
            return id;
        }
        let Some(best) = self.best_split(idx) else {
            return id;
        };
        let mut cut = 0;
        for k in 0..idx.len() {
            if self.x.get(idx[k], best.feature) <= best.threshold {
                idx.swap(k, cut);
                cut += 1;
            }
        }
        if cut == 0 || cut == idx.len() {
            return id;
        }
        let (l, r) = idx.split_at_mut(cut);
        let left = self.grow(l, depth + 1);
        let right = self.grow(r, depth + 1);
        self.nodes[id] = Node::Split {
            feature: best.feature,
            threshold: best.threshold,
            left,
            right,
        };
        id
    }

    fn candidate_features(&mut self) -> Vec<usize> {
        let n = self.x.cols();
        match self.params.max_features {
            Some(k) if k < n => {
                let mut f = sample(&mut self.rng, n, k).into_vec();
                f.sort_unstable();
                f
            }
            _ => (0..n).collect(),
        }
    }

    fn node_cost(&self, idx: &[usize]) -> f64 {
        let n = idx.len() as f64;
        match self.task {
            Task::Classification => {
                let pos = idx.iter().filter(|&&i| self.y[i] > 0.5).count() as f64;
                gini_cost(pos, n)
            }
            Task::Regression => {
                let (s, sq) = idx.iter().fold((0.0, 0.0), |(s, sq), &i| {
                    (s + self.y[i], sq + self.y[i] * self.y[i])
                });
                (sq - s * s / n).max(0.0)
            }
        }
    }

    fn best_split(&mut self, idx: &[usize]) -> Option<BestSplit> {
        let parent = self.node_cost(idx);
        let mut best: Option<BestSplit> = None;
        let n = idx.len() as f64;
        for feature in self.candidate_features() {
            self.scratch.clear();
            self.scratch
                .extend(idx.iter().map(|&i| (self.x.get(i, feature), self.y[i])));
            self.scratch.sort_by(|a, b| a.0.total_cmp(&b.0));

            let (total_s, total_sq) = self
                .scratch
                .iter()
                .fold((0.0, 0.0), |(s, sq), &(_, y)| (s + y, sq + y * y));
            let (mut ls, mut lsq) = (0.0, 0.0);
            for k in 0..self.scratch.len() - 1 {
                let (v, y) = self.scratch[k];
                ls += y;
                lsq += y * y;
                let next = self.scratch[k + 1].0;
                if next <= v {
                    continue;
                }
                let nl = (k + 1) as f64;
                let nr = n - nl;
                let cost = match self.task {
                    Task::Classification => gini_cost(ls, nl) + gini_cost(total_s - ls, nr),
                    Task::Regression => {
                        (lsq - ls * ls / nl).max(0.0)
                            + ((total_sq - lsq) - (total_s - ls) * (total_s - ls) / nr).max(0.0)
                    }
                };
                if best.as_ref().is_none_or(|b| cost < b.cost) {
                    let mut threshold = v + (next - v) / 2.0;
                    // midpoint can round up to `next` for adjacent floats
                    if threshold >= next {
                        threshold = v;
                    }
                    best = Some(BestSplit {
                        feature,
                        threshold,
                        cost,
                    });
                }
            }
        }
        best.filter(|b| b.cost < parent - 1e-12 * parent.abs().max(1.0))
    }
}

/// Node size times Gini impurity, for `pos` positives among `n`.
fn gini_cost(pos: f64, n: f64) -> f64 {
    if n == 0.0 {
        return 0.0;
    }
    let p = pos / n;
    n * 2.0 * p * (1.0 - p)
}

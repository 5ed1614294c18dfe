//! CART regression trees grown level by level over presorted feature orders.
//!
//! Every feature is sorted once per builder. Each node owns a contiguous
//! segment of every feature's order, so split search is a single sweep with
//! running sums, and children inherit sorted segments by stable partition.
//! Sample weights
//! are multiplicities (bootstrap or resampling counts), so `min_leaf` counts
//! drawn samples.

use rand::seq::index;
use serde::{Deserialize, Serialize};

use crate::rng::StreamRng;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum Node {
    Split {
        feature: usize,
        threshold: f64,
        left: usize,
        right: usize,
        /// Weighted SSE reduction achieved by this split.
        gain: f64,
        n_samples: f64,
    },
    Leaf {
        value: f64,
        n_samples: f64,
    },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RegressionTree {
    pub nodes: Vec<Node>,
}

impl RegressionTree {
    /// Predict one row; `x(f)` returns feature `f` of the row.
    pub fn predict_with(&self, x: impl Fn(usize) -> f64) -> f64 {
        let mut k = 0;
        loop {
            match &self.nodes[k] {
                Node::Leaf { value, .. } => return *value,
                Node::Split {
                    feature,
                    threshold,
                    left,
                    right,
                    ..
                } => {
                    k = if x(*feature) <= *threshold { *left } else { *right };
                }
            }
        }
    }

    pub fn predict_cols(&self, cols: &[Vec<f64>], row: usize) -> f64 {
        self.predict_with(|f| cols[f][row])
    }

    pub fn n_leaves(&self) -> usize {
        self.nodes.iter().filter(|n| matches!(n, Node::Leaf { .. })).count()
    }

    pub fn n_splits(&self) -> usize {
        self.nodes.len() - self.n_leaves()
    }

    /// Accumulate split gains per feature into `acc`.
    pub fn add_importance(&self, acc: &mut [f64]) {
        for n in &self.nodes {
            if let Node::Split { feature, gain, .. } = n {
                acc[*feature] += gain;
            }
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TreeParams {
    pub max_depth: usize,
    pub min_leaf: usize,
    /// Features drawn per node; `None` means all.
    pub mtry: Option<usize>,
}

impl Default for TreeParams {
    fn default() -> Self {
        TreeParams {
            max_depth: 6,
            min_leaf: 5,
            mtry: None,
        }
    }
}

pub struct TreeBuilder<'a> {
    cols: &'a [Vec<f64>],
    sorted: Vec<Vec<u32>>,
}

struct Pending {
    node: usize,
    depth: usize,
    start: usize,
    end: usize,
    w: f64,
    s: f64,
    y_min: f64,
    y_max: f64,
    scale: f64,
}

impl Pending {
    fn new(node: usize, depth: usize) -> Self {
        Pending {
            node,
            depth,
            start: 0,
            end: 0,
            w: 0.0,
            s: 0.0,
            y_min: f64::INFINITY,
            y_max: f64::NEG_INFINITY,
            scale: 0.0,
        }
    }

    fn add(&mut self, w: f64, y: f64) {
        self.w += w;
        self.s += w * y;
        self.scale += w * y * y;
        self.y_min = self.y_min.min(y);
        self.y_max = self.y_max.max(y);
    }

    fn leaf(&self) -> Node {
        Node::Leaf {
            value: if self.w > 0.0 { self.s / self.w } else { 0.0 },
            n_samples: self.w,
        }
    }
}

#[derive(Clone, Copy)]
struct Best {
    gain: f64,
    feature: usize,
    threshold: f64,
}

impl<'a> TreeBuilder<'a> {
    pub fn new(cols: &'a [Vec<f64>]) -> Self {
        let sorted = cols
            .iter()
            .map(|c| {
                let mut idx: Vec<u32> = (0..c.len() as u32).collect();
                idx.sort_by(|&a, &b| c[a as usize].total_cmp(&c[b as usize]).then(a.cmp(&b)));
                idx
            })
            .collect();
        TreeBuilder { cols, sorted }
    }

    pub fn n_rows(&self) -> usize {
        self.cols.first().map_or(0, Vec::len)
    }

    /// Fit to `y` with per-row multiplicities `weights` (zero excludes a row).
    /// `rng` is required when `params.mtry` subsamples features.
    pub fn fit(
        &self,
        y: &[f64],
        weights: &[f64],
        params: &TreeParams,
        mut rng: Option<&mut StreamRng>,
    ) -> RegressionTree {
        let q = self.cols.len();
        let min_leaf = params.min_leaf.max(1) as f64;
        let mtry = params.mtry.map(|m| m.clamp(1, q.max(1))).filter(|&m| m < q);

        // Each feature's order restricted to live rows; every pending node owns
        // the same segment [start, end) in all of them.
        let mut order: Vec<Vec<u32>> = self
            .sorted
            .iter()
            .map(|o| o.iter().copied().filter(|&i| weights[i as usize] > 0.0).collect())
            .collect();
        let mut root = Pending::new(0, 0);
        if let Some(o) = order.first() {
            for &ri in o {
                root.add(weights[ri as usize], y[ri as usize]);
            }
            root.end = o.len();
        }
        let mut nodes = vec![root.leaf()];
        let mut level = vec![root];
        let mut go_left = vec![false; self.n_rows()];

        while !level.is_empty() {
            let mut splits: Vec<Option<Best>> = Vec::with_capacity(level.len());
            for pd in &level {
                if pd.depth >= params.max_depth || pd.w < 2.0 * min_leaf || pd.y_max <= pd.y_min {
                    splits.push(None);
                    continue;
                }
                let feats: Vec<usize> = match (mtry, rng.as_deref_mut()) {
                    (Some(m), Some(r)) => {
                        let mut f = index::sample(r, q, m).into_vec();
                        f.sort_unstable();
                        f
                    }
                    _ => (0..q).collect(),
                };
                let mean = pd.s / pd.w;
                let mut best: Option<Best> = None;
                for f in feats {
                    let col = &self.cols[f];
                    let (mut wl, mut sy, mut last) = (0.0, 0.0, f64::NAN);
                    for &ri in &order[f][pd.start..pd.end] {
                        let i = ri as usize;
                        let v = col[i];
                        if wl > 0.0 && v > last {
                            let wr = pd.w - wl;
                            if wl >= min_leaf && wr >= min_leaf {
                                let sl = sy - wl * mean;
                                let gain = sl * sl / wl + sl * sl / wr;
                                if best.is_none_or(|b| gain > b.gain) {
                                    let mut threshold = 0.5 * (last + v);
                                    if threshold >= v {
                                        threshold = last;
                                    }
                                    best = Some(Best {
                                        gain,
                                        feature: f,
                                        threshold,
                                    });
                                }
                            }
                        }
                        wl += weights[i];
                        sy += weights[i] * y[i];
                        last = v;
                    }
                }
                splits.push(best.filter(|b| b.gain > 1e-12 * pd.scale));
            }
            if splits.iter().all(Option::is_none) {
                break;
            }

            let mut next = Vec::new();
            let mut offset = 0;
            for (pd, b) in level.iter().zip(&splits) {
                let Some(b) = b else { continue };
                let col = &self.cols[b.feature];
                let l = nodes.len();
                let mut lp = Pending::new(l, pd.depth + 1);
                let mut rp = Pending::new(l + 1, pd.depth + 1);
                let mut n_left = 0;
                for &ri in &order[0][pd.start..pd.end] {
                    let i = ri as usize;
                    let left = col[i] <= b.threshold;
                    go_left[i] = left;
                    if left {
                        n_left += 1;
                        lp.add(weights[i], y[i]);
                    } else {
                        rp.add(weights[i], y[i]);
                    }
                }
                lp.start = offset;
                lp.end = offset + n_left;
                rp.start = lp.end;
                rp.end = offset + (pd.end - pd.start);
                offset = rp.end;
                nodes[pd.node] = Node::Split {
                    feature: b.feature,
                    threshold: b.threshold,
                    left: l,
                    right: l + 1,
                    gain: b.gain,
                    n_samples: pd.w,
                };
                nodes.push(lp.leaf());
                nodes.push(rp.leaf());
                next.push(lp);
                next.push(rp);
            }
            if next.iter().all(|p| p.depth >= params.max_depth) {
                break;
            }
            for o in &mut order {
                let mut fresh = Vec::with_capacity(offset);
                for (pd, b) in level.iter().zip(&splits) {
                    if b.is_some() {
                        let seg = &o[pd.start..pd.end];
                        fresh.extend(seg.iter().filter(|&&i| go_left[i as usize]));
                        fresh.extend(seg.iter().filter(|&&i| !go_left[i as usize]));
                    }
                }
                *o = fresh;
            }
            level = next;
        }
        RegressionTree { nodes }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn fit_plain(cols: &[Vec<f64>], y: &[f64], params: TreeParams) -> RegressionTree {
        TreeBuilder::new(cols).fit(y, &vec![1.0; y.len()], &params, None)
    }

    #[test]
    fn constant_target_gives_single_leaf_at_mean() {
        let cols = vec![vec![1.0, 2.0, 3.0, 4.0, 5.0, 6.0]];
        let y = vec![7.0; 6];
        let t = fit_plain(&cols, &y, TreeParams { min_leaf: 1, ..Default::default() });
        assert_eq!(t.nodes.len(), 1);
        assert_eq!(t.predict_cols(&cols, 0), 7.0);
    }

    #[test]
    fn step_function_is_split_at_midpoint() {
        let x: Vec<f64> = (0..20).map(f64::from).collect();
        let y: Vec<f64> = x.iter().map(|v| if *v < 10.0 { 1.0 } else { 5.0 }).collect();
        let cols = vec![x];
        let t = fit_plain(&cols, &y, TreeParams { min_leaf: 1, ..Default::default() });
        match &t.nodes[0] {
            Node::Split { feature, threshold, .. } => {
                assert_eq!(*feature, 0);
                assert_eq!(*threshold, 9.5);
            }
            _ => panic!("expected split"),
        }
        assert_eq!(t.n_leaves(), 2);
        for i in 0..20 {
            assert_eq!(t.predict_cols(&cols, i), y[i]);
        }
    }

    #[test]
    fn min_leaf_is_respected() {
        let x: Vec<f64> = (0..10).map(f64::from).collect();
        let mut y = vec![0.0; 10];
        y[0] = 100.0;
        let cols = vec![x];
        let t = fit_plain(&cols, &y, TreeParams { min_leaf: 3, max_depth: 10, mtry: None });
        for n in &t.nodes {
            if let Node::Leaf { n_samples, .. } = n {
                assert!(*n_samples >= 3.0);
            }
        }
    }

    #[test]
    fn zero_weight_rows_are_ignored() {
        let cols = vec![vec![0.0, 1.0, 2.0, 3.0]];
        let y = vec![0.0, 0.0, 10.0, 1000.0];
        let t = TreeBuilder::new(&cols).fit(&y, &[1.0, 1.0, 1.0, 0.0], &TreeParams { min_leaf: 1, max_depth: 3, mtry: None }, None);
        assert_eq!(t.predict_cols(&cols, 3), 10.0);
    }

    #[test]
    fn ties_prefer_lower_feature_index() {
        let x = vec![0.0, 1.0, 2.0, 3.0];
        let cols = vec![x.clone(), x];
        let y = vec![0.0, 0.0, 1.0, 1.0];
        let t = fit_plain(&cols, &y, TreeParams { min_leaf: 1, max_depth: 1, mtry: None });
        assert!(matches!(t.nodes[0], Node::Split { feature: 0, .. }));
    }
}

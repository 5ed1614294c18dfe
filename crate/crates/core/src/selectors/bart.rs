//! Bayesian additive regression trees by backfitting MCMC, used for its
//! posterior split-variable inclusion proportions.

use std::collections::BTreeMap;

use rand::Rng;
use rand_distr::{ChiSquared, Distribution as _, StandardNormal};
use serde::{Deserialize, Serialize};
use serde_json::json;
use statrs::distribution::{ChiSquared as ChiSq, ContinuousCDF};

use super::{rank_by_score, sparse_report, Selector, SelectorConfig, SelectorReport};
use crate::dataset::FeatureMatrix;
use crate::error::Result;
use crate::{linalg, rng};

const ALPHA: f64 = 0.95;
const BETA: f64 = 2.0;
const K: f64 = 2.0;
const NU: f64 = 3.0;
const Q: f64 = 0.9;
const MAX_CUTS: usize = 100;
const MIN_LEAF_OBS: usize = 5;
const P_GROW: f64 = 0.25;
const P_PRUNE: f64 = 0.25;
const NONE: usize = usize::MAX;

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct BartDiagnostics {
    pub acceptance_rate: f64,
    pub mean_sigma: f64,
    pub draws_with_splits: usize,
    pub warnings: Vec<String>,
}

#[derive(Clone)]
struct BNode {
    parent: usize,
    left: usize,
    right: usize,
    var: usize,
    cut: usize,
    mu: f64,
    depth: usize,
    alive: bool,
}

impl BNode {
    fn leaf(parent: usize, depth: usize) -> Self {
        BNode {
            parent,
            left: NONE,
            right: NONE,
            var: 0,
            cut: 0,
            mu: 0.0,
            depth,
            alive: true,
        }
    }

    fn is_leaf(&self) -> bool {
        self.left == NONE
    }
}

struct Tree {
    nodes: Vec<BNode>,
    free: Vec<usize>,
}

impl Tree {
    fn new() -> Self {
        Tree {
            nodes: vec![BNode::leaf(NONE, 0)],
            free: Vec::new(),
        }
    }

    fn alloc(&mut self, node: BNode) -> usize {
        if let Some(k) = self.free.pop() {
            self.nodes[k] = node;
            k
        } else {
            self.nodes.push(node);
            self.nodes.len() - 1
        }
    }

    fn leaves(&self) -> Vec<usize> {
        (0..self.nodes.len())
            .filter(|&k| self.nodes[k].alive && self.nodes[k].is_leaf())
            .collect()
    }

    fn is_nog(&self, k: usize) -> bool {
        let n = &self.nodes[k];
        n.alive && !n.is_leaf() && self.nodes[n.left].is_leaf() && self.nodes[n.right].is_leaf()
    }

    fn nogs(&self) -> Vec<usize> {
        (0..self.nodes.len()).filter(|&k| self.is_nog(k)).collect()
    }

    /// Inclusive range of admissible cut indices for `var` at node `k`.
    fn cut_range(&self, k: usize, var: usize, ncut: usize) -> Option<(usize, usize)> {
        let (mut lo, mut hi) = (0i64, ncut as i64 - 1);
        let mut child = k;
        let mut p = self.nodes[k].parent;
        while p != NONE {
            let pn = &self.nodes[p];
            if pn.var == var {
                if pn.left == child {
                    hi = hi.min(pn.cut as i64 - 1);
                } else {
                    lo = lo.max(pn.cut as i64 + 1);
                }
            }
            child = p;
            p = pn.parent;
        }
        (lo <= hi).then_some((lo as usize, hi as usize))
    }
}

fn p_split(depth: usize) -> f64 {
    ALPHA * (1.0 + depth as f64).powf(-BETA)
}

struct Sampler<'a> {
    xr: &'a [Vec<u16>],
    ncuts: &'a [usize],
    tau: f64,
}

impl Sampler<'_> {
    fn lml(&self, n: usize, s: f64, sigma2: f64) -> f64 {
        let nt = n as f64 * self.tau;
        -0.5 * (1.0 + nt / sigma2).ln() + self.tau * s * s / (2.0 * sigma2 * (sigma2 + nt))
    }

    fn split_stats(&self, leaf_of: &[usize], r: &[f64], owners: [usize; 2], var: usize, cut: usize) -> (usize, f64, usize, f64) {
        let (mut nl, mut sl, mut nr, mut sr) = (0, 0.0, 0, 0.0);
        let xv = &self.xr[var];
        for i in 0..r.len() {
            if leaf_of[i] == owners[0] || leaf_of[i] == owners[1] {
                if (xv[i] as usize) <= cut {
                    nl += 1;
                    sl += r[i];
                } else {
                    nr += 1;
                    sr += r[i];
                }
            }
        }
        (nl, sl, nr, sr)
    }

    fn draw_rule(&self, tree: &Tree, k: usize, rng: &mut rng::StreamRng) -> Option<(usize, usize)> {
        let avail: Vec<(usize, (usize, usize))> = (0..self.xr.len())
            .filter_map(|v| tree.cut_range(k, v, self.ncuts[v]).map(|r| (v, r)))
            .collect();
        if avail.is_empty() {
            return None;
        }
        let (v, (lo, hi)) = avail[rng.random_range(0..avail.len())];
        Some((v, rng.random_range(lo..=hi)))
    }

    /// One Metropolis-Hastings tree move; returns whether it was accepted.
    fn step(&self, tree: &mut Tree, leaf_of: &mut [usize], r: &[f64], sigma2: f64, rng: &mut rng::StreamRng) -> bool {
        let leaves = tree.leaves();
        let single = leaves.len() == 1;
        let u: f64 = rng.random();
        if single || u < P_GROW {
            let p_grow = if single { 1.0 } else { P_GROW };
            let leaf = leaves[rng.random_range(0..leaves.len())];
            let Some((var, cut)) = self.draw_rule(tree, leaf, rng) else {
                return false;
            };
            let (nl, sl, nr, sr) = self.split_stats(leaf_of, r, [leaf, leaf], var, cut);
            if nl < MIN_LEAF_OBS || nr < MIN_LEAF_OBS {
                return false;
            }
            let d = tree.nodes[leaf].depth;
            let parent = tree.nodes[leaf].parent;
            let parent_was_nog = parent != NONE && tree.is_nog(parent);
            let nog_new = tree.nogs().len() + 1 - usize::from(parent_was_nog);
            let log_r = (P_PRUNE / nog_new as f64).ln() - (p_grow / leaves.len() as f64).ln()
                + p_split(d).ln()
                + 2.0 * (1.0 - p_split(d + 1)).ln()
                - (1.0 - p_split(d)).ln()
                + self.lml(nl, sl, sigma2)
                + self.lml(nr, sr, sigma2)
                - self.lml(nl + nr, sl + sr, sigma2);
            if rng.random::<f64>().ln() < log_r {
                let l = tree.alloc(BNode::leaf(leaf, d + 1));
                let rr = tree.alloc(BNode::leaf(leaf, d + 1));
                let node = &mut tree.nodes[leaf];
                node.left = l;
                node.right = rr;
                node.var = var;
                node.cut = cut;
                let xv = &self.xr[var];
                for i in 0..leaf_of.len() {
                    if leaf_of[i] == leaf {
                        leaf_of[i] = if (xv[i] as usize) <= cut { l } else { rr };
                    }
                }
                return true;
            }
            return false;
        }
        let nogs = tree.nogs();
        let k = nogs[rng.random_range(0..nogs.len())];
        let (l, rr, var, cut, d) = {
            let nd = &tree.nodes[k];
            (nd.left, nd.right, nd.var, nd.cut, nd.depth)
        };
        if u < P_GROW + P_PRUNE {
            let (nl, sl, nr, sr) = self.split_stats(leaf_of, r, [l, rr], var, cut);
            let leaves_new = leaves.len() - 1;
            let p_grow_new = if leaves_new == 1 { 1.0 } else { P_GROW };
            let log_r = (p_grow_new / leaves_new as f64).ln() - (P_PRUNE / nogs.len() as f64).ln()
                - p_split(d).ln()
                - 2.0 * (1.0 - p_split(d + 1)).ln()
                + (1.0 - p_split(d)).ln()
                - self.lml(nl, sl, sigma2)
                - self.lml(nr, sr, sigma2)
                + self.lml(nl + nr, sl + sr, sigma2);
            if rng.random::<f64>().ln() < log_r {
                for i in 0..leaf_of.len() {
                    if leaf_of[i] == l || leaf_of[i] == rr {
                        leaf_of[i] = k;
                    }
                }
                tree.nodes[l].alive = false;
                tree.nodes[rr].alive = false;
                tree.free.push(rr);
                tree.free.push(l);
                tree.nodes[k].left = NONE;
                tree.nodes[k].right = NONE;
                return true;
            }
            return false;
        }
        // change the rule of a node whose children are both leaves
        let Some((nv, nc)) = self.draw_rule(tree, k, rng) else {
            return false;
        };
        let (nl, sl, nr, sr) = self.split_stats(leaf_of, r, [l, rr], var, cut);
        let (ml, tl, mr, tr) = self.split_stats(leaf_of, r, [l, rr], nv, nc);
        if ml < MIN_LEAF_OBS || mr < MIN_LEAF_OBS {
            return false;
        }
        let log_r = self.lml(ml, tl, sigma2) + self.lml(mr, tr, sigma2)
            - self.lml(nl, sl, sigma2)
            - self.lml(nr, sr, sigma2);
        if rng.random::<f64>().ln() < log_r {
            tree.nodes[k].var = nv;
            tree.nodes[k].cut = nc;
            let xv = &self.xr[nv];
            for i in 0..leaf_of.len() {
                if leaf_of[i] == l || leaf_of[i] == rr {
                    leaf_of[i] = if (xv[i] as usize) <= nc { l } else { rr };
                }
            }
            return true;
        }
        false
    }
}

fn cutpoints(x: &[f64]) -> Vec<f64> {
    let mut u = x.to_vec();
    u.sort_by(f64::total_cmp);
    u.dedup();
    let mids: Vec<f64> = u.windows(2).map(|w| 0.5 * (w[0] + w[1])).collect();
    if mids.len() <= MAX_CUTS {
        return mids;
    }
    let last = mids.len() - 1;
    let mut out: Vec<f64> = (0..MAX_CUTS)
        .map(|k| mids[(k * last + (MAX_CUTS - 1) / 2) / (MAX_CUTS - 1)])
        .collect();
    out.dedup();
    out
}

pub fn bart_select(x: &FeatureMatrix, y: &[f64], config: &SelectorConfig) -> Result<SelectorReport> {
    let n = y.len();
    let p = x.n_cols();
    let ymin = y.iter().copied().fold(f64::INFINITY, f64::min);
    let ymax = y.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let mut meta = BTreeMap::new();
    meta.insert("trees".into(), json!(config.bart_trees));
    meta.insert("burn_in".into(), json!(config.bart_burn_in));
    meta.insert("draws".into(), json!(config.bart_draws));
    if !(ymax > ymin) {
        meta.insert("diagnostics".into(), json!(BartDiagnostics::default()));
        return Ok(sparse_report(
            Selector::Bart,
            rank_by_score(x.names(), &vec![0.0; p], config.top_k),
            meta,
        ));
    }
    let ys: Vec<f64> = y.iter().map(|v| (v - ymin) / (ymax - ymin) - 0.5).collect();

    let cuts: Vec<Vec<f64>> = x.cols().iter().map(|c| cutpoints(c)).collect();
    let ncuts: Vec<usize> = cuts.iter().map(Vec::len).collect();
    let xr: Vec<Vec<u16>> = x
        .cols()
        .iter()
        .zip(&cuts)
        .map(|(c, cp)| c.iter().map(|v| cp.partition_point(|t| t < v) as u16).collect())
        .collect();

    let m = config.bart_trees;
    let tau = (0.5 / (K * (m as f64).sqrt())).powi(2);
    let sigma_hat = {
        let ols = if n > p + 1 {
            let (_, yc) = linalg::center(&ys);
            let z = linalg::standardize(x.cols()).cols;
            linalg::lstsq_qr(&z, &yc).map(|b| {
                let rss: f64 = (0..n)
                    .map(|i| (yc[i] - (0..p).map(|j| b[j] * z[j][i]).sum::<f64>()).powi(2))
                    .sum();
                (rss / (n - p - 1) as f64).sqrt()
            })
        } else {
            None
        };
        ols.filter(|s| *s > 0.0).unwrap_or_else(|| linalg::var_sample(&ys).sqrt())
    };
    let chi = ChiSq::new(NU).expect("valid dof");
    let lambda = sigma_hat * sigma_hat * chi.inverse_cdf(1.0 - Q) / NU;

    let sampler = Sampler {
        xr: &xr,
        ncuts: &ncuts,
        tau,
    };
    let mut r = rng::stream(rng::derive_str(config.seed, "bart"));
    let mut trees: Vec<Tree> = (0..m).map(|_| Tree::new()).collect();
    let mut leaf_of: Vec<Vec<usize>> = vec![vec![0; n]; m];
    let mut fit = vec![0.0; n];
    let mut sigma2 = sigma_hat * sigma_hat;
    let chi_post = ChiSquared::new(NU + n as f64).expect("valid dof");

    let total_iter = config.bart_burn_in + config.bart_draws;
    let mut acc_sum = vec![0.0; p];
    let mut n_draws = 0usize;
    let (mut accepted, mut proposed) = (0usize, 0usize);
    let (mut win_acc, mut win_prop) = (0usize, 0usize);
    let mut warnings: Vec<String> = Vec::new();
    let mut sigma_sum = 0.0;
    let mut resid = vec![0.0; n];
    let mut sums = Vec::new();
    for it in 0..total_iter {
        for t in 0..m {
            let tree = &mut trees[t];
            let lo = &mut leaf_of[t];
            for i in 0..n {
                resid[i] = ys[i] - (fit[i] - tree.nodes[lo[i]].mu);
            }
            let ok = sampler.step(tree, lo, &resid, sigma2, &mut r);
            accepted += usize::from(ok);
            proposed += 1;
            win_acc += usize::from(ok);
            win_prop += 1;
            sums.clear();
            sums.resize(tree.nodes.len(), (0usize, 0.0f64));
            for i in 0..n {
                let s = &mut sums[lo[i]];
                s.0 += 1;
                s.1 += resid[i];
            }
            for k in 0..tree.nodes.len() {
                if tree.nodes[k].alive && tree.nodes[k].is_leaf() {
                    let (cnt, s) = sums[k];
                    let v = 1.0 / (cnt as f64 / sigma2 + 1.0 / tau);
                    let z: f64 = StandardNormal.sample(&mut r);
                    tree.nodes[k].mu = v * s / sigma2 + v.sqrt() * z;
                }
            }
            for i in 0..n {
                fit[i] = ys[i] - resid[i] + tree.nodes[lo[i]].mu;
            }
        }
        let ssr: f64 = (0..n).map(|i| (ys[i] - fit[i]).powi(2)).sum();
        sigma2 = (NU * lambda + ssr) / chi_post.sample(&mut r);

        if (it + 1) % 100 == 0 {
            let rate = win_acc as f64 / win_prop as f64;
            if !(0.01..=0.99).contains(&rate) {
                warnings.push(format!(
                    "acceptance rate {rate:.4} outside [0.01, 0.99] over iterations {}..{}",
                    it + 1 - 100,
                    it + 1
                ));
            }
            win_acc = 0;
            win_prop = 0;
        }
        if it >= config.bart_burn_in {
            sigma_sum += sigma2.sqrt();
            let mut counts = vec![0.0; p];
            let mut total = 0.0;
            for tree in &trees {
                for nd in &tree.nodes {
                    if nd.alive && !nd.is_leaf() {
                        counts[nd.var] += 1.0;
                        total += 1.0;
                    }
                }
            }
            if total > 0.0 {
                for j in 0..p {
                    acc_sum[j] += counts[j] / total;
                }
                n_draws += 1;
            }
        }
    }
    let scores: Vec<f64> = if n_draws > 0 {
        acc_sum.iter().map(|s| s / n_draws as f64).collect()
    } else {
        vec![0.0; p]
    };
    let diag = BartDiagnostics {
        acceptance_rate: accepted as f64 / proposed.max(1) as f64,
        mean_sigma: sigma_sum / config.bart_draws as f64 * (ymax - ymin),
        draws_with_splits: n_draws,
        warnings,
    };
    meta.insert("inclusion_proportions".into(), json!(scores));
    meta.insert("diagnostics".into(), json!(diag));
    Ok(sparse_report(Selector::Bart, rank_by_score(x.names(), &scores, config.top_k), meta))
}

//! Online vector balancing with noisy inputs, the multicolour tree built on
//! top of it, and the online envy-minimising allocator.
//!
//! A balancer sees a noisy vector, commits to a sign in `{p, p - 1}`, and
//! only then learns the true vector, which it adds to its running sum
//! `w`. The protocol is a two-phase state machine: `step` must be followed
//! by `reveal` before the next `step`.

use std::io::Write;

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{FairDivError, Result};
use crate::valuation::{envy_report, Allocation, ValuationMatrix};

/// Slack on the norm and noise checks, absorbing rounding in callers.
pub const NORM_TOL: f64 = 1e-12;

/// Schedule constants for one balancer.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BalancerParams {
    pub n: usize,
    /// Horizon (number of vectors the schedule is tuned for).
    pub m: usize,
    pub p: f64,
    pub eps: f64,
    pub delta: f64,
    pub c: f64,
}

impl BalancerParams {
    pub fn validate(&self) -> Result<()> {
        let bad = |msg: &str| Err(FairDivError::InvalidParameter(msg.into()));
        if self.n == 0 || self.m == 0 {
            return bad("n and m must be positive");
        }
        if !(0.5..=2.0 / 3.0 + 1e-15).contains(&self.p) {
            return bad("p must lie in [1/2, 2/3]");
        }
        if !(self.eps >= 0.0 && self.eps.is_finite()) {
            return bad("eps must be finite and non-negative");
        }
        if !(self.delta > 0.0 && self.delta <= 0.5) {
            return bad("delta must lie in (0, 1/2]");
        }
        if !(self.c > 0.0 && self.c < 0.125) {
            return bad("C must lie in (0, 1/8)");
        }
        Ok(())
    }

    /// `c_t = (9n / 4C) ln(5nm / delta) + eps n t`.
    pub fn c_t(&self, t: usize) -> f64 {
        let n = self.n as f64;
        9.0 * n / (4.0 * self.c) * (5.0 * n * self.m as f64 / self.delta).ln()
            + self.eps * n * t as f64
    }
}

/// One line of a balancer step log.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct StepRecord {
    pub t: usize,
    pub node_id: usize,
    pub sign: f64,
    pub dot_product: f64,
    pub c_t: f64,
    pub fail_flag: bool,
    /// `||w_t||_inf` before the update.
    pub w_inf_norm: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
struct Pending {
    sign: f64,
    noisy: Vec<f64>,
}

/// Running state of one balancer.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BalancerState {
    params: BalancerParams,
    node_id: usize,
    w: Vec<f64>,
    // Kahan compensation terms for `w`.
    comp: Vec<f64>,
    t: usize,
    pending: Option<Pending>,
    log: Vec<StepRecord>,
}

fn inf_norm(v: &[f64]) -> f64 {
    v.iter().fold(0.0, |a, x| a.max(x.abs()))
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

fn check_vector(v: &[f64], n: usize, bound: f64, what: &str) -> Result<()> {
    if v.len() != n {
        return Err(FairDivError::Dimension(format!(
            "{what} has length {}, expected {n}",
            v.len()
        )));
    }
    if v.iter().any(|x| !x.is_finite()) {
        return Err(FairDivError::Protocol(format!(
            "{what} has a non-finite entry"
        )));
    }
    let norm = inf_norm(v);
    if norm > bound + NORM_TOL {
        return Err(FairDivError::Protocol(format!(
            "{what} has sup-norm {norm}, above {bound}"
        )));
    }
    Ok(())
}

impl BalancerState {
    pub fn new(params: BalancerParams) -> Result<Self> {
        Self::with_node_id(params, 0)
    }

    pub fn with_node_id(params: BalancerParams, node_id: usize) -> Result<Self> {
        params.validate()?;
        Ok(Self {
            params,
            node_id,
            w: vec![0.0; params.n],
            comp: vec![0.0; params.n],
            t: 1,
            pending: None,
            log: Vec::new(),
        })
    }

    pub fn params(&self) -> &BalancerParams {
        &self.params
    }

    pub fn p(&self) -> f64 {
        self.params.p
    }

    pub fn w(&self) -> &[f64] {
        &self.w
    }

    pub fn t(&self) -> usize {
        self.t
    }

    pub fn c_t(&self) -> f64 {
        self.params.c_t(self.t)
    }

    pub fn has_pending(&self) -> bool {
        self.pending.is_some()
    }

    pub fn log(&self) -> &[StepRecord] {
        &self.log
    }

    /// `r((1 - p) - <w_t, noisy> / (4 c_t))`, the probability of sign `p`.
    pub fn prob_positive(&self, noisy: &[f64]) -> f64 {
        ((1.0 - self.params.p) - dot(&self.w, noisy) / (4.0 * self.c_t())).clamp(0.0, 1.0)
    }

    /// Whether the current state is in the failure region for `noisy`.
    pub fn fail_event(&self, noisy: &[f64]) -> bool {
        let c = self.c_t();
        let d = dot(&self.w, noisy);
        let p = self.params.p;
        d > 4.0 * (1.0 - p) * c
            || d < -4.0 * p * c
            || inf_norm(&self.w) > c / (self.params.n as f64).sqrt()
    }

    fn check_noisy(&self, noisy: &[f64]) -> Result<()> {
        if self.pending.is_some() {
            return Err(FairDivError::Protocol(
                "step called again before the previous vector was revealed".into(),
            ));
        }
        check_vector(noisy, self.params.n, 1.0 + self.params.eps, "noisy vector")
    }

    /// Samples the sign for `noisy` with one uniform draw and holds it until
    /// the true vector is revealed.
    pub fn step<R: Rng + ?Sized>(&mut self, noisy: &[f64], rng: &mut R) -> Result<f64> {
        self.check_noisy(noisy)?;
        Ok(self.step_unchecked(noisy, rng))
    }

    fn step_unchecked<R: Rng + ?Sized>(&mut self, noisy: &[f64], rng: &mut R) -> f64 {
        let prob = self.prob_positive(noisy);
        let u: f64 = rng.random();
        let p = self.params.p;
        let sign = if u < prob { p } else { p - 1.0 };
        self.log.push(StepRecord {
            t: self.t,
            node_id: self.node_id,
            sign,
            dot_product: dot(&self.w, noisy),
            c_t: self.c_t(),
            fail_flag: self.fail_event(noisy),
            w_inf_norm: inf_norm(&self.w),
        });
        self.pending = Some(Pending {
            sign,
            noisy: noisy.to_vec(),
        });
        sign
    }

    fn check_true(&self, true_vec: &[f64]) -> Result<()> {
        let pending = self
            .pending
            .as_ref()
            .ok_or_else(|| FairDivError::Protocol("reveal called with no pending sign".into()))?;
        check_vector(true_vec, self.params.n, 1.0, "true vector")?;
        let observed = true_vec
            .iter()
            .zip(&pending.noisy)
            .fold(0.0f64, |a, (x, y)| a.max((x - y).abs()));
        if observed > self.params.eps + NORM_TOL {
            return Err(FairDivError::NoiseBound {
                observed,
                eps: self.params.eps,
            });
        }
        Ok(())
    }

    /// Adds `sign * true_vec` to `w` and advances `t`. On error the state,
    /// including the pending sign, is left untouched.
    pub fn reveal(&mut self, true_vec: &[f64]) -> Result<()> {
        self.check_true(true_vec)?;
        self.reveal_unchecked(true_vec);
        Ok(())
    }

    fn reveal_unchecked(&mut self, true_vec: &[f64]) {
        let sign = self.pending.take().map(|p| p.sign).unwrap_or(0.0);
        for ((w, c), v) in self.w.iter_mut().zip(self.comp.iter_mut()).zip(true_vec) {
            let y = sign * v - *c;
            let s = *w + y;
            *c = (s - *w) - y;
            *w = s;
        }
        self.t += 1;
    }
}

/// `(9 sqrt(n) / 4C) ln(5nm / delta) + eps t sqrt(n)`.
pub fn vector_balance_bound(n: usize, m: usize, eps: f64, delta: f64, c: f64, t: usize) -> f64 {
    let sn = (n as f64).sqrt();
    9.0 * sn / (4.0 * c) * (5.0 * (n * m) as f64 / delta).ln() + eps * t as f64 * sn
}

/// `(27 sqrt(n) / 2C) ln(5nmk / delta) + 6 eps m sqrt(n)`.
pub fn multicolor_bound(n: usize, m: usize, k: usize, eps: f64, delta: f64, c: f64) -> f64 {
    let sn = (n as f64).sqrt();
    27.0 * sn / (2.0 * c) * (5.0 * (n * m * k) as f64 / delta).ln() + 6.0 * eps * m as f64 * sn
}

/// `(27 sqrt(n) / C) ln(5nm / delta) + 6 m sqrt(n) eps`.
pub fn online_envy_bound(n: usize, m: usize, eps: f64, delta: f64, c: f64) -> f64 {
    let sn = (n as f64).sqrt();
    27.0 * sn / c * (5.0 * (n * m) as f64 / delta).ln() + 6.0 * m as f64 * sn * eps
}

/// Writes step records as CSV with a header row.
pub fn write_step_log<W: Write>(records: &[StepRecord], out: W) -> Result<()> {
    let mut wtr = csv::Writer::from_writer(out);
    let io = |e: csv::Error| FairDivError::Parse(e.to_string());
    wtr.write_record([
        "t",
        "node_id",
        "sign",
        "dot_product",
        "c_t",
        "fail_flag",
        "w_inf_norm",
    ])
    .map_err(io)?;
    for r in records {
        wtr.write_record([
            r.t.to_string(),
            r.node_id.to_string(),
            r.sign.to_string(),
            r.dot_product.to_string(),
            r.c_t.to_string(),
            u8::from(r.fail_flag).to_string(),
            r.w_inf_norm.to_string(),
        ])
        .map_err(io)?;
    }
    wtr.flush().map_err(|e| FairDivError::Parse(e.to_string()))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
enum NodeKind {
    Internal {
        state: BalancerState,
        left: usize,
        right: usize,
        n_left: usize,
        n_right: usize,
    },
    Leaf {
        color: usize,
    },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
struct Node {
    kind: NodeKind,
    // Leaves under this node are the colours `lo..hi`.
    lo: usize,
    hi: usize,
}

/// Complete full binary tree of balancers whose leaves are colours
/// `0..k`, numbered left to right.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ColorTree {
    k: usize,
    n: usize,
    nodes: Vec<Node>,
    path: Option<Vec<usize>>,
    color_sums: Vec<Vec<f64>>,
    color_counts: Vec<usize>,
    history: Vec<(usize, Vec<f64>)>,
    log: Vec<StepRecord>,
}

impl ColorTree {
    /// Builds the tree; every internal node gets failure budget `delta / k`.
    pub fn build(k: usize, n: usize, m: usize, eps: f64, delta: f64, c: f64) -> Result<Self> {
        if k < 2 {
            return Err(FairDivError::InvalidParameter(
                "k must be at least 2".into(),
            ));
        }
        let mut tree = Self {
            k,
            n,
            nodes: Vec::with_capacity(2 * k - 1),
            path: None,
            color_sums: vec![vec![0.0; n]; k],
            color_counts: vec![0; k],
            history: Vec::new(),
            log: Vec::new(),
        };
        let base = BalancerParams {
            n,
            m,
            p: 0.5,
            eps,
            delta: delta / k as f64,
            c,
        };
        let mut next_color = 0;
        tree.grow(k, base, &mut next_color)?;
        Ok(tree)
    }

    fn grow(
        &mut self,
        leaves: usize,
        base: BalancerParams,
        next_color: &mut usize,
    ) -> Result<usize> {
        let id = self.nodes.len();
        let lo = *next_color;
        if leaves == 1 {
            self.nodes.push(Node {
                kind: NodeKind::Leaf { color: lo },
                lo,
                hi: lo + 1,
            });
            *next_color += 1;
            return Ok(id);
        }
        let n_left = leaves.div_ceil(2);
        let n_right = leaves / 2;
        let params = BalancerParams {
            p: n_left as f64 / leaves as f64,
            ..base
        };
        let state = BalancerState::with_node_id(params, id)?;
        self.nodes.push(Node {
            kind: NodeKind::Leaf { color: usize::MAX },
            lo,
            hi: lo + leaves,
        });
        let left = self.grow(n_left, base, next_color)?;
        let right = self.grow(n_right, base, next_color)?;
        self.nodes[id].kind = NodeKind::Internal {
            state,
            left,
            right,
            n_left,
            n_right,
        };
        Ok(id)
    }

    pub fn k(&self) -> usize {
        self.k
    }

    pub fn internal_count(&self) -> usize {
        self.nodes
            .iter()
            .filter(|n| matches!(n.kind, NodeKind::Internal { .. }))
            .count()
    }

    pub fn leaf_count(&self) -> usize {
        self.nodes.len() - self.internal_count()
    }

    /// Internal nodes as `(node_id, state)` in pre-order.
    pub fn internal_states(&self) -> impl Iterator<Item = (usize, &BalancerState)> {
        self.nodes
            .iter()
            .enumerate()
            .filter_map(|(id, n)| match &n.kind {
                NodeKind::Internal { state, .. } => Some((id, state)),
                NodeKind::Leaf { .. } => None,
            })
    }

    /// Fraction of all colours lying under node `id`.
    pub fn leaf_fraction(&self, id: usize) -> f64 {
        let node = &self.nodes[id];
        (node.hi - node.lo) as f64 / self.k as f64
    }

    /// Depth of every leaf, in colour order.
    pub fn leaf_depths(&self) -> Vec<usize> {
        let mut depths = vec![0; self.k];
        let mut stack = vec![(0usize, 0usize)];
        while let Some((id, d)) = stack.pop() {
            match &self.nodes[id].kind {
                NodeKind::Leaf { color } => depths[*color] = d,
                NodeKind::Internal { left, right, .. } => {
                    stack.push((*left, d + 1));
                    stack.push((*right, d + 1));
                }
            }
        }
        depths
    }

    pub fn has_pending(&self) -> bool {
        self.path.is_some()
    }

    /// Walks from the root to a leaf, sampling a sign at every internal
    /// node on the way (sign `p` goes right, `p - 1` goes left).
    pub fn assign_color<R: Rng + ?Sized>(&mut self, noisy: &[f64], rng: &mut R) -> Result<usize> {
        if self.path.is_some() {
            return Err(FairDivError::Protocol(
                "assign_color called again before the previous vector was revealed".into(),
            ));
        }
        let mut id = 0;
        let mut path = Vec::new();
        loop {
            match &mut self.nodes[id].kind {
                NodeKind::Leaf { color } => {
                    let color = *color;
                    self.path = Some(path);
                    return Ok(color);
                }
                NodeKind::Internal {
                    state, left, right, ..
                } => {
                    if path.is_empty() {
                        state.check_noisy(noisy)?;
                    }
                    let sign = state.step_unchecked(noisy, rng);
                    self.log
                        .push(*state.log.last().expect("step records a line"));
                    path.push(id);
                    id = if sign > 0.0 { *right } else { *left };
                }
            }
        }
    }

    /// Reveals the true vector to every node on the pending path. Either all
    /// nodes accept it or none is modified.
    pub fn reveal(&mut self, true_vec: &[f64]) -> Result<()> {
        let path = self
            .path
            .as_ref()
            .ok_or_else(|| FairDivError::Protocol("reveal called with no pending path".into()))?;
        for &id in path {
            if let NodeKind::Internal { state, .. } = &self.nodes[id].kind {
                state.check_true(true_vec)?;
            }
        }
        let path = self.path.take().unwrap_or_default();
        let mut color = 0;
        for &id in &path {
            if let NodeKind::Internal {
                state, left, right, ..
            } = &mut self.nodes[id].kind
            {
                let went_right = state.pending.as_ref().is_some_and(|p| p.sign > 0.0);
                state.reveal_unchecked(true_vec);
                let child = if went_right { *right } else { *left };
                if let NodeKind::Leaf { color: c } = self.nodes[child].kind {
                    color = c;
                }
            }
        }
        for (s, v) in self.color_sums[color].iter_mut().zip(true_vec) {
            *s += v;
        }
        self.color_counts[color] += 1;
        self.history.push((color, true_vec.to_vec()));
        Ok(())
    }

    /// Per-colour sums of the revealed true vectors.
    pub fn color_sums(&self) -> &[Vec<f64>] {
        &self.color_sums
    }

    pub fn color_counts(&self) -> &[usize] {
        &self.color_counts
    }

    /// Step records of all nodes in arrival order.
    pub fn step_log(&self) -> &[StepRecord] {
        &self.log
    }

    /// `max_{a, b} ||S_a - S_b||_inf` over the colour sums.
    pub fn discrepancy(&self) -> f64 {
        let mut worst: f64 = 0.0;
        for a in 0..self.k {
            for b in a + 1..self.k {
                for (x, y) in self.color_sums[a].iter().zip(&self.color_sums[b]) {
                    worst = worst.max((x - y).abs());
                }
            }
        }
        worst
    }

    /// Largest deviation, over internal nodes, between the node's `w` and
    /// `p_u * sum_right v - (1 - p_u) * sum_left v` recomputed from the
    /// reveal history.
    pub fn tree_identity_residual(&self) -> f64 {
        let mut worst: f64 = 0.0;
        for node in &self.nodes {
            let NodeKind::Internal { state, n_left, .. } = &node.kind else {
                continue;
            };
            let p = state.p();
            let split = node.lo + n_left;
            let mut expect = vec![0.0; self.n];
            for (color, v) in &self.history {
                if !(node.lo..node.hi).contains(color) {
                    continue;
                }
                let coef = if *color >= split { p } else { p - 1.0 };
                for (e, x) in expect.iter_mut().zip(v) {
                    *e += coef * x;
                }
            }
            for (e, w) in expect.iter().zip(state.w()) {
                worst = worst.max((e - w).abs());
            }
        }
        worst
    }

    /// Number of steps, over all nodes, taken in the failure region.
    pub fn fail_events(&self) -> usize {
        self.log.iter().filter(|r| r.fail_flag).count()
    }
}

/// Tuning for the online allocator; `n` and `m` come from the stream.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct OnlineParams {
    pub eps: f64,
    pub delta: f64,
    pub c: f64,
}

/// Outcome of an online allocation run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OnlineEnvyOutcome {
    pub allocation: Allocation,
    /// Max envy under the revealed true values.
    pub max_envy: f64,
    /// Max envy in the scaled units the tree works in, read off the colour
    /// sums: `S_j[i] - S_i[i]`.
    pub scaled_max_envy: f64,
    /// Multicoloured discrepancy of the scaled true vectors.
    pub discrepancy: f64,
    pub fail_events: usize,
    pub step_log: Vec<StepRecord>,
}

/// Allocates a stream of items online. Item `j` arrives as the noisy
/// column `noisy_stream[j]` (one entry per agent); once it is placed,
/// `reveal(j)` must return the true column. Vectors are scaled by
/// `1 / sqrt(n)` and fed to a colour tree with one colour per agent.
pub fn online_envy_allocate<R, F>(
    n: usize,
    noisy_stream: &[Vec<f64>],
    mut reveal: F,
    params: OnlineParams,
    rng: &mut R,
) -> Result<OnlineEnvyOutcome>
where
    R: Rng + ?Sized,
    F: FnMut(usize) -> Vec<f64>,
{
    let m = noisy_stream.len();
    if n == 0 {
        return Err(FairDivError::Dimension("need at least one agent".into()));
    }
    let mut truth = vec![0.0; n * m];
    let mut owners = vec![0; m];
    let mut tree = if n >= 2 && m > 0 {
        Some(ColorTree::build(
            n,
            n,
            m,
            params.eps,
            params.delta,
            params.c,
        )?)
    } else {
        None
    };
    let scale = 1.0 / (n as f64).sqrt();
    for (j, noisy) in noisy_stream.iter().enumerate() {
        check_vector(noisy, n, 1.0 + params.eps, "noisy vector")?;
        let scaled: Vec<f64> = noisy.iter().map(|x| x * scale).collect();
        if let Some(tree) = tree.as_mut() {
            owners[j] = tree.assign_color(&scaled, rng)?;
        }
        let true_vec = reveal(j);
        check_vector(&true_vec, n, 1.0, "true vector")?;
        let observed = true_vec
            .iter()
            .zip(noisy)
            .fold(0.0f64, |a, (x, y)| a.max((x - y).abs()));
        if observed > params.eps + NORM_TOL {
            return Err(FairDivError::NoiseBound {
                observed,
                eps: params.eps,
            });
        }
        if let Some(tree) = tree.as_mut() {
            let scaled_true: Vec<f64> = true_vec.iter().map(|x| x * scale).collect();
            tree.reveal(&scaled_true)?;
        }
        for (i, v) in true_vec.into_iter().enumerate() {
            truth[i * m + j] = v;
        }
    }
    let allocation = Allocation::from_owners(&owners, n)?;
    let truth = ValuationMatrix::new(n, m, truth)?;
    let max_envy = envy_report(&truth, &allocation)?.max_envy;
    let (scaled_max_envy, discrepancy, fail_events, step_log) = match &tree {
        Some(tree) => {
            let s = tree.color_sums();
            let mut worst = f64::NEG_INFINITY;
            for i in 0..n {
                for k in 0..n {
                    if i != k {
                        worst = worst.max(s[k][i] - s[i][i]);
                    }
                }
            }
            (
                worst,
                tree.discrepancy(),
                tree.fail_events(),
                tree.step_log().to_vec(),
            )
        }
        None => (0.0, 0.0, 0, Vec::new()),
    };
    Ok(OnlineEnvyOutcome {
        allocation,
        max_envy,
        scaled_max_envy,
        discrepancy,
        fail_events,
        step_log,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn params(n: usize, p: f64) -> BalancerParams {
        BalancerParams {
            n,
            m: 100,
            p,
            eps: 0.0,
            delta: 0.1,
            c: 0.1,
        }
    }

    #[test]
    fn rejects_bad_params() {
        for (p, delta, c) in [
            (0.4, 0.1, 0.1),
            (0.7, 0.1, 0.1),
            (0.5, 0.0, 0.1),
            (0.5, 0.6, 0.1),
            (0.5, 0.1, 0.125),
        ] {
            let bp = BalancerParams {
                p,
                delta,
                c,
                ..params(2, 0.5)
            };
            assert!(BalancerState::new(bp).is_err());
        }
    }

    #[test]
    fn c_t_is_positive_and_increasing() {
        let bp = BalancerParams {
            eps: 0.01,
            ..params(3, 0.5)
        };
        let expect = 9.0 * 3.0 / 0.4 * (5.0 * 300.0 / 0.1f64).ln() + 0.03;
        assert!((bp.c_t(1) - expect).abs() < 1e-9);
        assert!(bp.c_t(2) > bp.c_t(1) && bp.c_t(1) > 0.0);
    }

    #[test]
    fn first_step_is_fair_coin() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let draws = 10_000;
        let mut pos = 0;
        for _ in 0..draws {
            let mut s = BalancerState::new(params(2, 0.5)).unwrap();
            assert_eq!(s.prob_positive(&[0.3, -0.9]), 0.5);
            if s.step(&[0.3, -0.9], &mut rng).unwrap() > 0.0 {
                pos += 1;
            }
        }
        let f = pos as f64 / draws as f64;
        assert!((f - 0.5).abs() <= 0.02, "{f}");
    }

    #[test]
    fn clamped_ramp_is_deterministic() {
        let mut s = BalancerState::new(params(1, 0.5)).unwrap();
        let c = s.c_t();
        s.w = vec![2.0 * c];
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        assert_eq!(s.prob_positive(&[1.0]), 0.0);
        assert_eq!(s.step(&[1.0], &mut rng).unwrap(), -0.5);
    }

    #[test]
    fn conditional_mean_matches_ramp() {
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        let base = {
            let mut s = BalancerState::new(params(2, 0.5)).unwrap();
            let c = s.c_t();
            s.w = vec![0.5 * c, 0.2 * c];
            s
        };
        let v = [0.6, -0.3];
        let expect = -dot(base.w(), &v) / (4.0 * base.c_t());
        let draws = 10_000;
        let signs: Vec<f64> = (0..draws)
            .map(|_| base.clone().step(&v, &mut rng).unwrap())
            .collect();
        let mean = signs.iter().sum::<f64>() / draws as f64;
        let var = signs.iter().map(|s| (s - mean).powi(2)).sum::<f64>() / (draws - 1) as f64;
        let se = (var / draws as f64).sqrt();
        assert!((mean - expect).abs() <= 3.0 * se, "{mean} vs {expect}");
    }

    #[test]
    fn reveal_updates() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let mut s = BalancerState::new(params(2, 0.5)).unwrap();
        let sign = s.step(&[1.0, 0.0], &mut rng).unwrap();
        s.reveal(&[1.0, 0.0]).unwrap();
        assert_eq!(s.w(), &[sign, 0.0]);
        assert_eq!(s.t(), 2);

        let mut s = BalancerState::new(params(2, 0.5)).unwrap();
        s.pending = Some(Pending {
            sign: -0.5,
            noisy: vec![1.0, 1.0],
        });
        s.reveal(&[1.0, 1.0]).unwrap();
        assert_eq!(s.w(), &[-0.5, -0.5]);

        let before = s.w().to_vec();
        s.step(&[0.0, 0.0], &mut rng).unwrap();
        s.reveal(&[0.0, 0.0]).unwrap();
        assert_eq!(s.w(), before.as_slice());
    }

    #[test]
    fn protocol_errors() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let mut s = BalancerState::new(BalancerParams {
            eps: 0.1,
            ..params(2, 0.5)
        })
        .unwrap();
        assert!(matches!(
            s.reveal(&[0.0, 0.0]),
            Err(FairDivError::Protocol(_))
        ));
        assert!(s.step(&[1.2, 0.0], &mut rng).is_err());
        s.step(&[1.05, 0.0], &mut rng).unwrap();
        assert!(matches!(
            s.step(&[0.0, 0.0], &mut rng),
            Err(FairDivError::Protocol(_))
        ));
        assert!(matches!(
            s.reveal(&[0.5, 0.0]),
            Err(FairDivError::NoiseBound { .. })
        ));
        assert!(s.has_pending());
        s.reveal(&[1.0, 0.0]).unwrap();
    }

    #[test]
    fn fail_event_clauses() {
        let mut s = BalancerState::new(params(2, 0.5)).unwrap();
        assert!(!s.fail_event(&[1.0, -1.0]));
        let c = s.c_t();
        s.w = vec![c / 2f64.sqrt() + 1.0, 0.0];
        assert!(s.fail_event(&[0.0, 0.0]));
        s.w = vec![2.0 * c + 1.0, 0.0];
        assert!(s.fail_event(&[1.0, 0.0]));
    }

    #[test]
    fn tree_shapes() {
        let t = ColorTree::build(2, 1, 10, 0.0, 0.1, 0.1).unwrap();
        assert_eq!(t.internal_count(), 1);
        assert_eq!(t.internal_states().next().unwrap().1.p(), 0.5);

        let t = ColorTree::build(3, 1, 10, 0.0, 0.1, 0.1).unwrap();
        let ps: Vec<f64> = t.internal_states().map(|(_, s)| s.p()).collect();
        assert_eq!(ps, vec![2.0 / 3.0, 0.5]);

        let t = ColorTree::build(8, 1, 10, 0.0, 0.1, 0.1).unwrap();
        assert_eq!(t.internal_count(), 7);
        assert!(t.internal_states().all(|(_, s)| s.p() == 0.5));
        assert!(t
            .internal_states()
            .all(|(_, s)| (s.params().delta - 0.1 / 8.0).abs() < 1e-18));

        for k in 2..20 {
            let t = ColorTree::build(k, 1, 10, 0.0, 0.1, 0.1).unwrap();
            assert_eq!(t.leaf_count(), k);
            assert_eq!(t.internal_count(), k - 1);
            assert!(t
                .internal_states()
                .all(|(_, s)| (0.5..=2.0 / 3.0).contains(&s.p())));
            let lo = (k as f64).log2().floor() as usize;
            let hi = (k as f64).log2().ceil() as usize;
            assert!(t.leaf_depths().iter().all(|d| *d == lo || *d == hi));
            assert_eq!(t.leaf_fraction(0), 1.0);
        }
        assert!(ColorTree::build(1, 1, 10, 0.0, 0.1, 0.1).is_err());
    }

    #[test]
    fn zero_state_color_frequencies() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        for (k, draws) in [(2usize, 10_000usize), (4, 40_000)] {
            let mut counts = vec![0usize; k];
            let fresh = ColorTree::build(k, 2, 10, 0.0, 0.1, 0.1).unwrap();
            for _ in 0..draws {
                let mut t = fresh.clone();
                counts[t.assign_color(&[0.5, 0.5], &mut rng).unwrap()] += 1;
            }
            for c in counts {
                let f = c as f64 / draws as f64;
                assert!((f - 1.0 / k as f64).abs() <= 0.02, "k={k} f={f}");
            }
        }
    }

    #[test]
    fn tree_reveal_and_identity() {
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let mut t = ColorTree::build(5, 3, 300, 0.05, 0.1, 0.1).unwrap();
        assert!(t.reveal(&[0.0; 3]).is_err());
        for _ in 0..300 {
            let v: Vec<f64> = (0..3).map(|_| rng.random_range(-1.0..=1.0)).collect();
            let noisy: Vec<f64> = v
                .iter()
                .map(|x| x + rng.random_range(-0.05..=0.05))
                .collect();
            t.assign_color(&noisy, &mut rng).unwrap();
            assert!(t.assign_color(&noisy, &mut rng).is_err());
            let before = t.clone();
            let far: Vec<f64> = noisy.iter().map(|x| x - 0.5).collect();
            assert!(t.reveal(&far).is_err());
            assert_eq!(t, before);
            t.reveal(&v).unwrap();
        }
        assert_eq!(t.color_counts().iter().sum::<usize>(), 300);
        assert!(t.tree_identity_residual() <= 1e-9);
    }

    #[test]
    fn k2_reveal_touches_only_root_and_zero_is_noop() {
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let mut t = ColorTree::build(2, 2, 10, 0.0, 0.1, 0.1).unwrap();
        t.assign_color(&[1.0, 0.0], &mut rng).unwrap();
        t.reveal(&[1.0, 0.0]).unwrap();
        assert_eq!(t.internal_states().next().unwrap().1.t(), 2);
        let w = t.internal_states().next().unwrap().1.w().to_vec();
        t.assign_color(&[0.0, 0.0], &mut rng).unwrap();
        t.reveal(&[0.0, 0.0]).unwrap();
        assert_eq!(t.internal_states().next().unwrap().1.w(), w.as_slice());
    }

    #[test]
    fn step_log_csv() {
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let mut s = BalancerState::with_node_id(params(1, 0.5), 3).unwrap();
        s.step(&[1.0], &mut rng).unwrap();
        let mut out = Vec::new();
        write_step_log(s.log(), &mut out).unwrap();
        let text = String::from_utf8(out).unwrap();
        let mut lines = text.lines();
        assert_eq!(
            lines.next(),
            Some("t,node_id,sign,dot_product,c_t,fail_flag,w_inf_norm")
        );
        assert!(lines.next().unwrap().starts_with("1,3,"));
    }

    #[test]
    fn online_allocator_examples() {
        let mut rng = ChaCha8Rng::seed_from_u64(8);
        let p = OnlineParams {
            eps: 0.0,
            delta: 0.1,
            c: 0.1,
        };
        let out = online_envy_allocate(3, &[], |_| vec![0.0; 3], p, &mut rng).unwrap();
        assert_eq!(out.max_envy, 0.0);
        assert_eq!(out.allocation.m(), 0);

        let m = 60;
        let stream = vec![vec![1.0, 1.0]; m];
        let out = online_envy_allocate(2, &stream, |_| vec![1.0, 1.0], p, &mut rng).unwrap();
        let sizes = out.allocation.sizes();
        let diff = (sizes[0] as f64 - sizes[1] as f64).abs();
        assert_eq!(out.max_envy, diff);
        let root = vector_balance_bound(2, m, 0.0, 0.1 / 2.0, 0.1, m);
        assert!(out.max_envy <= 2.0f64.sqrt() * 2.0 * root);
        assert!(out.scaled_max_envy <= out.discrepancy);
    }

    #[test]
    fn online_allocator_uniform_bound() {
        let bound = online_envy_bound(2, 200, 0.0, 0.1, 0.1);
        let p = OnlineParams {
            eps: 0.0,
            delta: 0.1,
            c: 0.1,
        };
        let mut ok = 0;
        for seed in 0..100 {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let stream: Vec<Vec<f64>> = (0..200)
                .map(|_| (0..2).map(|_| rng.random_range(-1.0..=1.0)).collect())
                .collect();
            let out = online_envy_allocate(2, &stream, |j| stream[j].clone(), p, &mut rng).unwrap();
            assert!(out.scaled_max_envy <= out.discrepancy);
            if out.max_envy <= bound {
                ok += 1;
            }
        }
        assert!(ok >= 90);
    }

    #[test]
    fn online_allocator_rejects_noise_violations() {
        let mut rng = ChaCha8Rng::seed_from_u64(8);
        let p = OnlineParams {
            eps: 0.1,
            delta: 0.1,
            c: 0.1,
        };
        let stream = vec![vec![0.5, 0.5]];
        let r = online_envy_allocate(2, &stream, |_| vec![0.8, 0.5], p, &mut rng);
        assert!(matches!(r, Err(FairDivError::NoiseBound { .. })));
        let r = online_envy_allocate(2, &stream, |_| vec![1.5, 0.5], p, &mut rng);
        assert!(r.is_err());
    }
}

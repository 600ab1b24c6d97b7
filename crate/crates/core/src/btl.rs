//! Bradley-Terry-Luce pairwise comparisons: simulation, maximum-likelihood
//! estimation, and the estimate-then-Round-Robin pipeline.
//!
//! Each agent compares pairs of items drawn from an Erdős-Rényi graph; item
//! `j` beats item `k` with probability `sigmoid(theta_j - theta_k)`. The
//! estimator minimises the scaled negative log-likelihood over
//! `{theta : sum theta = 0, |theta_j| <= B}` by projected gradient descent
//! with an Armijo backtracking line search.

use std::io::{Read, Write};

use rand::Rng;
use rand_distr::{Binomial, Distribution};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::allocators::{round_robin, PickOrder};
use crate::error::{FairDivError, Result};
use crate::rng;
use crate::valuation::{envy_report, Allocation, ValuationMatrix};

/// Box bound on estimated scores.
pub const CLAMP_B: f64 = 30.0;
/// Stop once the projected gradient's sup-norm is at most this.
pub const GRAD_TOL: f64 = 1e-8;
pub const MAX_ITERS: usize = 100_000;
pub const ARMIJO_C: f64 = 1e-4;
/// Fresh graphs tried after a disconnected draw.
pub const MAX_GRAPH_RETRIES: usize = 3;

/// `1 / (1 + exp(-t))`, evaluated without overflow.
pub fn sigmoid(t: f64) -> f64 {
    if t >= 0.0 {
        1.0 / (1.0 + (-t).exp())
    } else {
        let e = t.exp();
        e / (1.0 + e)
    }
}

/// `ln sigmoid(t)`.
pub fn log_sigmoid(t: f64) -> f64 {
    if t >= 0.0 {
        -(-t).exp().ln_1p()
    } else {
        t - t.exp().ln_1p()
    }
}

/// `ln sigmoid(a) - ln sigmoid(b)`, accurate even when `a` and `b` are
/// close, where subtracting the two logs would lose every digit.
fn log_sigmoid_diff(a: f64, b: f64) -> f64 {
    (sigmoid(-a) * (a - b).exp_m1()).ln_1p()
}

/// Undirected comparison graph on `m` items; edges are `(j, k)` with `j < k`
/// in lexicographic order.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ObservationGraph {
    m: usize,
    p: f64,
    edges: Vec<(usize, usize)>,
}

impl ObservationGraph {
    pub fn new(m: usize, p: f64, mut edges: Vec<(usize, usize)>) -> Result<Self> {
        for e in edges.iter_mut() {
            if e.0 == e.1 || e.0 >= m || e.1 >= m {
                return Err(FairDivError::InvalidParameter(format!("bad edge {e:?}")));
            }
            if e.0 > e.1 {
                *e = (e.1, e.0);
            }
        }
        edges.sort_unstable();
        if edges.windows(2).any(|w| w[0] == w[1]) {
            return Err(FairDivError::InvalidParameter("duplicate edge".into()));
        }
        Ok(Self { m, p, edges })
    }

    pub fn complete(m: usize) -> Self {
        let edges = (0..m)
            .flat_map(|j| (j + 1..m).map(move |k| (j, k)))
            .collect();
        Self { m, p: 1.0, edges }
    }

    pub fn m(&self) -> usize {
        self.m
    }

    pub fn p(&self) -> f64 {
        self.p
    }

    pub fn edges(&self) -> &[(usize, usize)] {
        &self.edges
    }

    /// Connected components, each sorted, ordered by smallest member.
    pub fn components(&self) -> Vec<Vec<usize>> {
        let mut adj = vec![Vec::new(); self.m];
        for &(j, k) in &self.edges {
            adj[j].push(k);
            adj[k].push(j);
        }
        let mut seen = vec![false; self.m];
        let mut out = Vec::new();
        for start in 0..self.m {
            if seen[start] {
                continue;
            }
            seen[start] = true;
            let mut comp = vec![start];
            let mut stack = vec![start];
            while let Some(u) = stack.pop() {
                for &v in &adj[u] {
                    if !seen[v] {
                        seen[v] = true;
                        comp.push(v);
                        stack.push(v);
                    }
                }
            }
            comp.sort_unstable();
            out.push(comp);
        }
        out
    }

    pub fn is_connected(&self) -> bool {
        self.components().len() <= 1
    }
}

/// Includes each of the `m (m - 1) / 2` pairs independently with
/// probability `p`, using one uniform draw per pair.
pub fn sample_er_graph<R: Rng + ?Sized>(m: usize, p: f64, rng: &mut R) -> Result<ObservationGraph> {
    if !(0.0..=1.0).contains(&p) {
        return Err(FairDivError::InvalidParameter(format!(
            "edge probability {p}"
        )));
    }
    let mut edges = Vec::new();
    for j in 0..m {
        for k in j + 1..m {
            if rng.random::<f64>() < p {
                edges.push((j, k));
            }
        }
    }
    Ok(ObservationGraph { m, p, edges })
}

/// How many comparisons back each edge frequency.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Repetitions {
    Finite(u64),
    /// Frequencies are the exact win probabilities.
    ExactLimit,
}

/// Per-edge win frequencies `y_jk` of item `j` over item `k` (`j < k`).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ComparisonData {
    pub graph: ObservationGraph,
    pub reps: Repetitions,
    /// Aligned with `graph.edges()`.
    pub y: Vec<f64>,
}

impl ComparisonData {
    pub fn new(graph: ObservationGraph, reps: Repetitions, y: Vec<f64>) -> Result<Self> {
        if y.len() != graph.edges.len() {
            return Err(FairDivError::Dimension("one frequency per edge".into()));
        }
        if let Repetitions::Finite(0) = reps {
            return Err(FairDivError::InvalidParameter(
                "K must be at least 1".into(),
            ));
        }
        for &v in &y {
            if !(0.0..=1.0).contains(&v) {
                return Err(FairDivError::InvalidParameter(format!("frequency {v}")));
            }
            if let Repetitions::Finite(k) = reps {
                let wins = v * k as f64;
                if (wins - wins.round()).abs() > 1e-9 {
                    return Err(FairDivError::InvalidParameter(format!(
                        "frequency {v} is not a multiple of 1/{k}"
                    )));
                }
            }
        }
        Ok(Self { graph, reps, y })
    }
}

/// Draws `K` comparisons per edge. The win count per edge is one
/// binomial draw, which has the same law as `K` Bernoulli draws.
pub fn simulate_comparisons<R: Rng + ?Sized>(
    theta: &PreferenceVector,
    graph: &ObservationGraph,
    reps: Repetitions,
    rng: &mut R,
) -> Result<ComparisonData> {
    if theta.theta.len() != graph.m {
        return Err(FairDivError::Dimension(
            "theta length differs from m".into(),
        ));
    }
    let t = &theta.theta;
    let y = graph
        .edges
        .iter()
        .map(|&(j, k)| {
            let prob = sigmoid(t[j] - t[k]);
            match reps {
                Repetitions::Finite(0) => Err(FairDivError::InvalidParameter(
                    "K must be at least 1".into(),
                )),
                Repetitions::Finite(kk) => {
                    let b = Binomial::new(kk, prob)
                        .map_err(|e| FairDivError::InvalidParameter(e.to_string()))?;
                    Ok(b.sample(rng) as f64 / kk as f64)
                }
                Repetitions::ExactLimit => Ok(prob),
            }
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(ComparisonData {
        graph: graph.clone(),
        reps,
        y,
    })
}

/// A zero-sum score vector.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PreferenceVector {
    pub theta: Vec<f64>,
}

impl PreferenceVector {
    /// Accepts `theta` if it sums to zero within `1e-9`.
    pub fn new(theta: Vec<f64>) -> Result<Self> {
        let s: f64 = theta.iter().sum();
        if s.abs() > 1e-9 {
            return Err(FairDivError::InvalidParameter(format!("scores sum to {s}")));
        }
        Ok(Self { theta })
    }

    pub fn sup_distance(&self, other: &PreferenceVector) -> f64 {
        self.theta
            .iter()
            .zip(&other.theta)
            .fold(0.0, |a, (x, y)| a.max((x - y).abs()))
    }
}

/// Subtracts each agent's mean value. Values are first taken relative to
/// the agent's first item, so a constant shift of a row cancels exactly.
pub fn center_values(values: &ValuationMatrix) -> Vec<PreferenceVector> {
    (0..values.n())
        .map(|i| {
            let row = values.row(i);
            let Some(&first) = row.first() else {
                return PreferenceVector { theta: Vec::new() };
            };
            let d: Vec<f64> = row.iter().map(|v| v - first).collect();
            let mean = d.iter().sum::<f64>() / d.len() as f64;
            PreferenceVector {
                theta: d.iter().map(|x| x - mean).collect(),
            }
        })
        .collect()
}

/// Estimator output.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MleFit {
    pub theta: PreferenceVector,
    pub iterations: usize,
    pub objective: f64,
    /// Sup-norm of the projected gradient at return.
    pub grad_norm: f64,
    /// Objective after every accepted step, starting from the initial point.
    pub trace: Vec<f64>,
}

struct Objective<'a> {
    data: &'a ComparisonData,
    scale: f64,
}

impl Objective<'_> {
    fn value(&self, th: &[f64]) -> f64 {
        let s: f64 = self
            .data
            .graph
            .edges
            .iter()
            .zip(&self.data.y)
            .map(|(&(j, k), &y)| {
                let d = th[j] - th[k];
                y * log_sigmoid(d) + (1.0 - y) * log_sigmoid(-d)
            })
            .sum();
        -s / self.scale
    }

    fn gradient(&self, th: &[f64], g: &mut [f64]) {
        g.iter_mut().for_each(|x| *x = 0.0);
        for (&(j, k), &y) in self.data.graph.edges.iter().zip(&self.data.y) {
            let r = -(y - sigmoid(th[j] - th[k])) / self.scale;
            g[j] += r;
            g[k] -= r;
        }
    }

    /// `f(new) - f(old)`, summed from per-edge differences.
    fn delta(&self, old: &[f64], new: &[f64]) -> f64 {
        let s: f64 = self
            .data
            .graph
            .edges
            .iter()
            .zip(&self.data.y)
            .map(|(&(j, k), &y)| {
                let (a, b) = (new[j] - new[k], old[j] - old[k]);
                y * log_sigmoid_diff(a, b) + (1.0 - y) * log_sigmoid_diff(-a, -b)
            })
            .sum();
        -s / self.scale
    }
}

/// Euclidean projection onto `{sum x = 0, |x_j| <= B}`, which is
/// `clamp(x - tau)` for the `tau` that makes the result sum to zero.
fn project(x: &mut [f64]) {
    let mean = x.iter().sum::<f64>() / x.len() as f64;
    if x.iter().all(|v| (v - mean).abs() <= CLAMP_B) {
        x.iter_mut().for_each(|v| *v -= mean);
        return;
    }
    let total = |tau: f64, x: &[f64]| {
        x.iter()
            .map(|v| (v - tau).clamp(-CLAMP_B, CLAMP_B))
            .sum::<f64>()
    };
    let lo_x = x.iter().cloned().fold(f64::INFINITY, f64::min);
    let hi_x = x.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let (mut lo, mut hi) = (lo_x - CLAMP_B, hi_x + CLAMP_B);
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if total(mid, x) > 0.0 {
            lo = mid;
        } else {
            hi = mid;
        }
        if hi - lo <= f64::EPSILON * hi.abs().max(1.0) {
            break;
        }
    }
    let tau = 0.5 * (lo + hi);
    x.iter_mut()
        .for_each(|v| *v = (*v - tau).clamp(-CLAMP_B, CLAMP_B));
}

fn projected_gradient_norm(x: &[f64], g: &[f64]) -> f64 {
    let mut y: Vec<f64> = x.iter().zip(g).map(|(a, b)| a - b).collect();
    project(&mut y);
    x.iter().zip(&y).fold(0.0, |a, (p, q)| a.max((p - q).abs()))
}

/// Fits scores from zero by projected gradient descent. The first trial
/// step of each line search is the Barzilai-Borwein step, halved until the
/// Armijo condition holds.
pub fn mle_fit(data: &ComparisonData, mp_scale: f64) -> Result<MleFit> {
    let m = data.graph.m;
    if !(mp_scale > 0.0 && mp_scale.is_finite()) {
        return Err(FairDivError::InvalidParameter(format!(
            "objective scale {mp_scale}"
        )));
    }
    let comps = data.graph.components();
    if comps.len() > 1 {
        return Err(FairDivError::Disconnected { components: comps });
    }
    let obj = Objective {
        data,
        scale: mp_scale,
    };
    let mut x = vec![0.0; m];
    let mut g = vec![0.0; m];
    obj.gradient(&x, &mut g);
    let mut f = obj.value(&x);
    let mut trace = vec![f];
    let mut step = 1.0;
    let mut prev: Option<(Vec<f64>, Vec<f64>)> = None;
    for iter in 0..MAX_ITERS {
        let pg = projected_gradient_norm(&x, &g);
        if pg <= GRAD_TOL || m < 2 {
            return Ok(MleFit {
                theta: PreferenceVector { theta: x },
                iterations: iter,
                objective: f,
                grad_norm: pg,
                trace,
            });
        }
        if let Some((px, pgr)) = &prev {
            let (mut ss, mut sy) = (0.0, 0.0);
            for l in 0..m {
                let s = x[l] - px[l];
                ss += s * s;
                sy += s * (g[l] - pgr[l]);
            }
            if sy > 0.0 {
                step = (ss / sy).clamp(1e-10, 1e10);
            }
        }
        let mut t = step;
        let mut accepted = None;
        while t > 1e-30 {
            let mut cand: Vec<f64> = x.iter().zip(&g).map(|(a, b)| a - t * b).collect();
            project(&mut cand);
            let decrease: f64 = g
                .iter()
                .zip(cand.iter().zip(&x))
                .map(|(gi, (c, xi))| gi * (c - xi))
                .sum();
            let df = obj.delta(&x, &cand);
            if df <= ARMIJO_C * decrease && df <= 0.0 {
                accepted = Some((cand, df));
                break;
            }
            t *= 0.5;
        }
        let Some((cand, df)) = accepted else {
            return Err(FairDivError::Numerical(format!(
                "line search stalled with projected gradient {pg}"
            )));
        };
        let mut gn = vec![0.0; m];
        obj.gradient(&cand, &mut gn);
        prev = Some((
            std::mem::replace(&mut x, cand),
            std::mem::replace(&mut g, gn),
        ));
        f += df;
        trace.push(f);
    }
    Err(FairDivError::Numerical(format!(
        "no convergence within {MAX_ITERS} iterations"
    )))
}

/// Maximum-likelihood scores for `data`.
pub fn mle_estimate(data: &ComparisonData, mp_scale: f64) -> Result<PreferenceVector> {
    mle_fit(data, mp_scale).map(|f| f.theta)
}

/// Per-run numbers reported alongside a BTL allocation.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BtlDiagnostics {
    /// Sup-norm distance between each agent's estimate and centred truth.
    pub agent_errors: Vec<f64>,
    pub max_error: f64,
    pub true_max_envy: f64,
    /// Each agent's mean true value (the offset removed by centring).
    pub agent_means: Vec<f64>,
    /// Extra graph draws needed because of disconnection.
    pub retries: usize,
    /// `p` is below `4 ln m / m`.
    pub sparse_warning: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BtlOutcome {
    pub allocation: Allocation,
    pub estimates: ValuationMatrix,
    pub comparisons: Vec<ComparisonData>,
    pub diagnostics: BtlDiagnostics,
}

/// Smallest `p` the pipeline considers well connected: `4 ln m / m`.
pub fn sparse_threshold(m: usize) -> f64 {
    4.0 * (m as f64).ln() / m as f64
}

fn estimate_agent(
    theta: &PreferenceVector,
    p: f64,
    reps: Repetitions,
    rng: &mut rng::Stream,
) -> Result<(PreferenceVector, ComparisonData, usize)> {
    let m = theta.theta.len();
    let mut last = Vec::new();
    for attempt in 0..=MAX_GRAPH_RETRIES {
        let graph = sample_er_graph(m, p, rng)?;
        let comps = graph.components();
        if comps.len() > 1 {
            last = comps;
            continue;
        }
        let data = simulate_comparisons(theta, &graph, reps, rng)?;
        let est = mle_estimate(&data, m as f64 * p)?;
        return Ok((est, data, attempt));
    }
    Err(FairDivError::Disconnected { components: last })
}

/// Centres each agent's true values, simulates that agent's comparisons,
/// fits scores, and runs Round-Robin (identity order) on the stacked
/// estimates. Agents run in parallel on child streams drawn from `rng` in
/// agent order.
pub fn btl_fair_divide<R: Rng + ?Sized>(
    truth: &ValuationMatrix,
    p: f64,
    reps: Repetitions,
    rng: &mut R,
) -> Result<BtlOutcome> {
    let (n, m) = (truth.n(), truth.m());
    if m < 2 {
        return Err(FairDivError::InvalidParameter(
            "need at least two items to compare".into(),
        ));
    }
    if n >= m {
        return Err(FairDivError::InvalidParameter(format!(
            "need fewer agents than items (n = {n}, m = {m})"
        )));
    }
    if !(p > 0.0 && p <= 1.0) {
        return Err(FairDivError::InvalidParameter(format!(
            "edge probability {p}"
        )));
    }
    truth.clone().with_range(0.0, 1.0)?;
    let centered = center_values(truth);
    let mut streams: Vec<rng::Stream> = (0..n).map(|_| rng::child(rng)).collect();
    let fits = centered
        .par_iter()
        .zip(streams.par_iter_mut())
        .map(|(theta, s)| estimate_agent(theta, p, reps, s))
        .collect::<Result<Vec<_>>>()?;
    let mut est = Vec::with_capacity(n * m);
    let mut agent_errors = Vec::with_capacity(n);
    let mut comparisons = Vec::with_capacity(n);
    let mut retries = 0;
    for ((fit, data, tries), theta) in fits.into_iter().zip(&centered) {
        agent_errors.push(fit.sup_distance(theta));
        est.extend_from_slice(&fit.theta);
        comparisons.push(data);
        retries += tries;
    }
    let estimates = ValuationMatrix::new(n, m, est)?;
    let allocation = round_robin(&estimates, &PickOrder::identity(n))?;
    let true_max_envy = envy_report(truth, &allocation)?.max_envy;
    let agent_means = (0..n)
        .map(|i| truth.row(i).iter().sum::<f64>() / m as f64)
        .collect();
    Ok(BtlOutcome {
        allocation,
        estimates,
        comparisons,
        diagnostics: BtlDiagnostics {
            max_error: agent_errors.iter().cloned().fold(0.0, f64::max),
            agent_errors,
            true_max_envy,
            agent_means,
            retries,
            sparse_warning: p < sparse_threshold(m),
        },
    })
}

/// Writes comparison data as `agent,item_j,item_k,wins_j,K`. Exact-limit
/// data is written with the win probability in `wins_j` and `K = inf`.
pub fn write_comparisons<W: Write>(data: &[ComparisonData], out: W) -> Result<()> {
    let mut wtr = csv::Writer::from_writer(out);
    let err = |e: csv::Error| FairDivError::Parse(e.to_string());
    wtr.write_record(["agent", "item_j", "item_k", "wins_j", "K"])
        .map_err(err)?;
    for (agent, d) in data.iter().enumerate() {
        for (&(j, k), &y) in d.graph.edges.iter().zip(&d.y) {
            let (wins, kk) = match d.reps {
                Repetitions::Finite(kk) => {
                    (((y * kk as f64).round() as u64).to_string(), kk.to_string())
                }
                Repetitions::ExactLimit => (y.to_string(), "inf".to_string()),
            };
            wtr.write_record([agent.to_string(), j.to_string(), k.to_string(), wins, kk])
                .map_err(err)?;
        }
    }
    wtr.flush().map_err(|e| FairDivError::Parse(e.to_string()))
}

/// Reads data written by [`write_comparisons`] for `n` agents over `m`
/// items; `p` is recorded on the rebuilt graphs.
pub fn read_comparisons<R: Read>(
    input: R,
    n: usize,
    m: usize,
    p: f64,
) -> Result<Vec<ComparisonData>> {
    let mut rdr = csv::Reader::from_reader(input);
    let perr = |line: usize, msg: String| FairDivError::Parse(format!("line {line}: {msg}"));
    let mut rows: Vec<(Vec<(usize, usize)>, Vec<f64>, Option<Repetitions>)> =
        vec![(Vec::new(), Vec::new(), None); n];
    for (idx, rec) in rdr.records().enumerate() {
        let line = idx + 2;
        let rec = rec.map_err(|e| perr(line, e.to_string()))?;
        if rec.len() != 5 {
            return Err(perr(
                line,
                format!("expected 5 fields, found {}", rec.len()),
            ));
        }
        let int = |s: &str| {
            s.trim()
                .parse::<usize>()
                .map_err(|e| perr(line, format!("{s:?}: {e}")))
        };
        let agent = int(&rec[0])?;
        let (j, k) = (int(&rec[1])?, int(&rec[2])?);
        if agent >= n {
            return Err(perr(line, format!("agent {agent} out of range")));
        }
        let (reps, y) = if rec[4].trim() == "inf" {
            let y: f64 = rec[3]
                .trim()
                .parse()
                .map_err(|e| perr(line, format!("{e}")))?;
            (Repetitions::ExactLimit, y)
        } else {
            let kk = rec[4]
                .trim()
                .parse::<u64>()
                .map_err(|e| perr(line, format!("{e}")))?;
            let wins = rec[3]
                .trim()
                .parse::<u64>()
                .map_err(|e| perr(line, format!("{e}")))?;
            if kk == 0 || wins > kk {
                return Err(perr(line, format!("{wins} wins out of {kk}")));
            }
            (Repetitions::Finite(kk), wins as f64 / kk as f64)
        };
        let slot = &mut rows[agent];
        match slot.2 {
            Some(r) if r != reps => {
                return Err(perr(line, "mixed repetition counts for one agent".into()))
            }
            _ => slot.2 = Some(reps),
        }
        let (a, b, y) = if j < k { (j, k, y) } else { (k, j, 1.0 - y) };
        slot.0.push((a, b));
        slot.1.push(y);
    }
    rows.into_iter()
        .map(|(edges, ys, reps)| {
            let mut pairs: Vec<((usize, usize), f64)> = edges.into_iter().zip(ys).collect();
            pairs.sort_by(|a, b| a.0.cmp(&b.0));
            let (edges, ys): (Vec<_>, Vec<_>) = pairs.into_iter().unzip();
            let graph = ObservationGraph::new(m, p, edges)?;
            ComparisonData::new(graph, reps.unwrap_or(Repetitions::ExactLimit), ys)
        })
        .collect()
}

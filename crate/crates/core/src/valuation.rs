//! Valuation matrices, allocations and envy metrics.
//!
//! Agents and items are 0-indexed throughout. Valuations are additive: the
//! value of a bundle is the sum of its item values.

use std::io::{Read, Write};

use serde::{Deserialize, Serialize};

use crate::error::{FairDivError, Result};
use crate::ENVY_TOL;

/// An `n x m` matrix of additive item values, stored row-major (one row per
/// agent).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ValuationMatrix {
    n: usize,
    m: usize,
    values: Vec<f64>,
    range: Option<(f64, f64)>,
}

impl ValuationMatrix {
    /// Builds a matrix from row-major values. `m = 0` is allowed so that the
    /// allocators can be run on empty item sets; `n` must be positive.
    pub fn new(n: usize, m: usize, values: Vec<f64>) -> Result<Self> {
        if n == 0 {
            return Err(FairDivError::Dimension(
                "agent count must be positive".into(),
            ));
        }
        if values.len() != n * m {
            return Err(FairDivError::Dimension(format!(
                "expected {} values for a {n}x{m} matrix, got {}",
                n * m,
                values.len()
            )));
        }
        if let Some(pos) = values.iter().position(|v| !v.is_finite()) {
            return Err(FairDivError::NonFinite {
                agent: pos / m,
                item: pos % m,
            });
        }
        Ok(Self {
            n,
            m,
            values,
            range: None,
        })
    }

    pub fn from_rows(rows: &[Vec<f64>]) -> Result<Self> {
        let n = rows.len();
        let m = rows.first().map_or(0, Vec::len);
        if rows.iter().any(|r| r.len() != m) {
            return Err(FairDivError::Dimension("rows have unequal lengths".into()));
        }
        Self::new(n, m, rows.concat())
    }

    /// Matrix with every entry equal to `value`.
    pub fn constant(n: usize, m: usize, value: f64) -> Result<Self> {
        Self::new(n, m, vec![value; n * m])
    }

    /// Declares the range `[lo, hi]` and checks every entry against it.
    pub fn with_range(mut self, lo: f64, hi: f64) -> Result<Self> {
        if !(lo <= hi) {
            return Err(FairDivError::InvalidParameter(format!(
                "range [{lo}, {hi}] is empty"
            )));
        }
        for (pos, &v) in self.values.iter().enumerate() {
            if v < lo || v > hi {
                return Err(FairDivError::OutOfRange {
                    agent: pos / self.m,
                    item: pos % self.m,
                    value: v,
                    lo,
                    hi,
                });
            }
        }
        self.range = Some((lo, hi));
        Ok(self)
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn m(&self) -> usize {
        self.m
    }

    pub fn range(&self) -> Option<(f64, f64)> {
        self.range
    }

    /// Bound `b` on the magnitude of the entries: the declared upper end when
    /// a range with non-negative lower end is declared, otherwise the largest
    /// absolute entry.
    pub fn bound_b(&self) -> f64 {
        match self.range {
            Some((lo, hi)) if lo >= 0.0 => hi,
            Some((lo, hi)) => lo.abs().max(hi.abs()),
            None => self.values.iter().fold(0.0, |acc, v| acc.max(v.abs())),
        }
    }

    pub fn get(&self, agent: usize, item: usize) -> f64 {
        self.values[agent * self.m + item]
    }

    pub fn row(&self, agent: usize) -> &[f64] {
        &self.values[agent * self.m..(agent + 1) * self.m]
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    /// Column `item` as an `n`-vector.
    pub fn column(&self, item: usize) -> Vec<f64> {
        (0..self.n).map(|i| self.get(i, item)).collect()
    }

    /// Value of `bundle` for `agent`.
    pub fn bundle_value(&self, agent: usize, bundle: &[usize]) -> f64 {
        let row = self.row(agent);
        bundle.iter().map(|&g| row[g]).sum()
    }

    /// Returns a copy with `c` added to every value of `agent`.
    pub fn shifted_agent(&self, agent: usize, c: f64) -> Result<Self> {
        let mut values = self.values.clone();
        for v in &mut values[agent * self.m..(agent + 1) * self.m] {
            *v += c;
        }
        Self::new(self.n, self.m, values)
    }

    /// Writes the matrix as CSV with header `agent,item_0,...`.
    pub fn write_csv<W: Write>(&self, out: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        let mut header = vec!["agent".to_string()];
        header.extend((0..self.m).map(|j| format!("item_{j}")));
        w.write_record(&header).map_err(csv_err)?;
        for i in 0..self.n {
            let mut rec = vec![i.to_string()];
            rec.extend(self.row(i).iter().map(|v| v.to_string()));
            w.write_record(&rec).map_err(csv_err)?;
        }
        w.flush().map_err(|e| FairDivError::Parse(e.to_string()))?;
        Ok(())
    }

    /// Reads a matrix written by [`ValuationMatrix::write_csv`]. Rows must
    /// appear in agent order.
    pub fn read_csv<R: Read>(input: R) -> Result<Self> {
        let mut r = csv::Reader::from_reader(input);
        let headers = r.headers().map_err(csv_err)?.clone();
        if headers.get(0) != Some("agent") {
            return Err(FairDivError::Parse("first column must be `agent`".into()));
        }
        for (j, h) in headers.iter().skip(1).enumerate() {
            if h != format!("item_{j}") {
                return Err(FairDivError::Parse(format!("unexpected header `{h}`")));
            }
        }
        let m = headers.len() - 1;
        let mut values = Vec::new();
        let mut n = 0;
        for (line, rec) in r.records().enumerate() {
            let rec = rec.map_err(csv_err)?;
            let agent: usize = rec[0]
                .trim()
                .parse()
                .map_err(|_| FairDivError::Parse(format!("row {}: bad agent index", line + 2)))?;
            if agent != n {
                return Err(FairDivError::Parse(format!(
                    "row {}: expected agent {n}, found {agent}",
                    line + 2
                )));
            }
            for field in rec.iter().skip(1) {
                values.push(field.trim().parse::<f64>().map_err(|_| {
                    FairDivError::Parse(format!("row {}: bad value `{field}`", line + 2))
                })?);
            }
            n += 1;
        }
        Self::new(n, m, values)
    }
}

fn csv_err(e: csv::Error) -> FairDivError {
    FairDivError::Parse(e.to_string())
}

/// True values, noisy estimates and the declared noise bound.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NoisyInstance {
    pub truth: ValuationMatrix,
    pub estimates: ValuationMatrix,
    /// Noise magnitude bound.
    pub eps: f64,
    /// Per-agent shifts: `|truth - estimate - shift_i| <= eps`.
    pub shifts: Vec<f64>,
}

impl NoisyInstance {
    /// Builds an instance and machine-checks the declared `(eps, shifts)`
    /// bound.
    pub fn new(
        truth: ValuationMatrix,
        estimates: ValuationMatrix,
        eps: f64,
        shifts: Vec<f64>,
    ) -> Result<Self> {
        if truth.n() != estimates.n() || truth.m() != estimates.m() {
            return Err(FairDivError::Dimension(format!(
                "truth is {}x{}, estimates are {}x{}",
                truth.n(),
                truth.m(),
                estimates.n(),
                estimates.m()
            )));
        }
        if shifts.len() != truth.n() {
            return Err(FairDivError::Dimension(format!(
                "{} shifts for {} agents",
                shifts.len(),
                truth.n()
            )));
        }
        if !(eps >= 0.0) || shifts.iter().any(|d| !(*d >= 0.0)) {
            return Err(FairDivError::InvalidParameter(
                "eps and shifts must be non-negative".into(),
            ));
        }
        let inst = Self {
            truth,
            estimates,
            eps,
            shifts,
        };
        let observed = inst.max_deviation();
        if observed > eps + 1e-12 {
            return Err(FairDivError::NoiseBound { observed, eps });
        }
        Ok(inst)
    }

    /// Instance with `shifts = 0`.
    pub fn unshifted(truth: ValuationMatrix, estimates: ValuationMatrix, eps: f64) -> Result<Self> {
        let n = truth.n();
        Self::new(truth, estimates, eps, vec![0.0; n])
    }

    /// `max_{i,j} |v*_{ij} - v^_{ij} - shift_i|`.
    pub fn max_deviation(&self) -> f64 {
        let mut worst: f64 = 0.0;
        for i in 0..self.truth.n() {
            let d = self.shifts[i];
            for (t, e) in self.truth.row(i).iter().zip(self.estimates.row(i)) {
                worst = worst.max((t - e - d).abs());
            }
        }
        worst
    }

    pub fn n(&self) -> usize {
        self.truth.n()
    }

    pub fn m(&self) -> usize {
        self.truth.m()
    }
}

/// A complete partition of the items `0..m` into `n` bundles.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Allocation {
    bundles: Vec<Vec<usize>>,
    m: usize,
}

impl Allocation {
    /// Validates that `bundles` partition `0..m`. Bundles are stored sorted.
    pub fn new(mut bundles: Vec<Vec<usize>>, m: usize) -> Result<Self> {
        if bundles.is_empty() {
            return Err(FairDivError::InvalidAllocation("no agents".into()));
        }
        let mut seen = vec![false; m];
        for (i, b) in bundles.iter_mut().enumerate() {
            b.sort_unstable();
            for &g in b.iter() {
                if g >= m {
                    return Err(FairDivError::InvalidAllocation(format!(
                        "agent {i} holds item {g} but m = {m}"
                    )));
                }
                if seen[g] {
                    return Err(FairDivError::InvalidAllocation(format!(
                        "item {g} is allocated twice"
                    )));
                }
                seen[g] = true;
            }
        }
        if let Some(g) = seen.iter().position(|s| !s) {
            return Err(FairDivError::InvalidAllocation(format!(
                "item {g} is unallocated"
            )));
        }
        Ok(Self { bundles, m })
    }

    /// Builds the allocation giving item `j` to `owner[j]`.
    pub fn from_owners(owner: &[usize], n: usize) -> Result<Self> {
        let mut bundles = vec![Vec::new(); n];
        for (j, &i) in owner.iter().enumerate() {
            if i >= n {
                return Err(FairDivError::InvalidAllocation(format!(
                    "item {j} assigned to agent {i} but n = {n}"
                )));
            }
            bundles[i].push(j);
        }
        Self::new(bundles, owner.len())
    }

    pub fn n(&self) -> usize {
        self.bundles.len()
    }

    pub fn m(&self) -> usize {
        self.m
    }

    pub fn bundle(&self, agent: usize) -> &[usize] {
        &self.bundles[agent]
    }

    pub fn bundles(&self) -> &[Vec<usize>] {
        &self.bundles
    }

    pub fn sizes(&self) -> Vec<usize> {
        self.bundles.iter().map(Vec::len).collect()
    }

    /// `owner[j]` is the agent holding item `j`.
    pub fn owners(&self) -> Vec<usize> {
        let mut owner = vec![0; self.m];
        for (i, b) in self.bundles.iter().enumerate() {
            for &g in b {
                owner[g] = i;
            }
        }
        owner
    }
}

/// Pairwise envy of an allocation under a valuation matrix.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EnvyReport {
    n: usize,
    /// Row-major `n x n`; entry `(i, j)` is `v_i(A_j) - v_i(A_i)`.
    pub pairwise_envy: Vec<f64>,
    pub max_envy: f64,
    pub is_envy_free: bool,
    pub is_ef1: bool,
}

impl EnvyReport {
    pub fn envy(&self, i: usize, j: usize) -> f64 {
        self.pairwise_envy[i * self.n + j]
    }
}

/// Computes pairwise envy, the maximum envy, and the EF / EF1 flags.
///
/// `max_envy` of a single-agent instance is 0.
pub fn envy_report(values: &ValuationMatrix, alloc: &Allocation) -> Result<EnvyReport> {
    check_shape(values, alloc)?;
    let n = values.n();
    let mut pairwise = vec![0.0; n * n];
    let mut max_envy = f64::NEG_INFINITY;
    let mut is_ef1 = true;
    for i in 0..n {
        let own = values.bundle_value(i, alloc.bundle(i));
        for j in 0..n {
            if i == j {
                continue;
            }
            let other_bundle = alloc.bundle(j);
            let other = values.bundle_value(i, other_bundle);
            let e = other - own;
            pairwise[i * n + j] = e;
            max_envy = max_envy.max(e);
            if !other_bundle.is_empty() {
                let best_removal = other_bundle
                    .iter()
                    .map(|&g| values.get(i, g))
                    .fold(f64::NEG_INFINITY, f64::max);
                if own < other - best_removal - ENVY_TOL {
                    is_ef1 = false;
                }
            }
        }
    }
    if n == 1 {
        max_envy = 0.0;
    }
    Ok(EnvyReport {
        n,
        pairwise_envy: pairwise,
        max_envy,
        is_envy_free: max_envy <= ENVY_TOL,
        is_ef1,
    })
}

/// True iff every bundle has `floor(m/n)` or `ceil(m/n)` items.
pub fn is_balanced(alloc: &Allocation, m: usize, n: usize) -> Result<bool> {
    if alloc.n() != n || alloc.m() != m {
        return Err(FairDivError::Dimension(format!(
            "allocation is over {} agents and {} items, expected {n} and {m}",
            alloc.n(),
            alloc.m()
        )));
    }
    let lo = m / n;
    let hi = m.div_ceil(n);
    Ok(alloc.sizes().iter().all(|&s| s == lo || s == hi))
}

fn check_shape(values: &ValuationMatrix, alloc: &Allocation) -> Result<()> {
    if values.n() != alloc.n() || values.m() != alloc.m() {
        return Err(FairDivError::Dimension(format!(
            "values are {}x{}, allocation covers {} agents and {} items",
            values.n(),
            values.m(),
            alloc.n(),
            alloc.m()
        )));
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn alloc(bundles: &[&[usize]], m: usize) -> Allocation {
        Allocation::new(bundles.iter().map(|b| b.to_vec()).collect(), m).unwrap()
    }

    #[test]
    fn separable_values_are_envy_free() {
        let v = ValuationMatrix::from_rows(&[vec![1.0, 0.0], vec![0.0, 1.0]]).unwrap();
        let r = envy_report(&v, &alloc(&[&[0], &[1]], 2)).unwrap();
        assert_eq!(r.max_envy, -1.0);
        assert!(r.is_envy_free);
        assert!(r.is_ef1);
    }

    #[test]
    fn zero_values_have_zero_envy() {
        let v = ValuationMatrix::constant(2, 3, 0.0).unwrap();
        let r = envy_report(&v, &alloc(&[&[0, 2], &[1]], 3)).unwrap();
        assert_eq!(r.max_envy, 0.0);
        assert!(r.is_envy_free);
    }

    #[test]
    fn everything_to_one_agent() {
        let v = ValuationMatrix::from_rows(&[vec![3.0, 1.0], vec![2.0, 2.0]]).unwrap();
        let r = envy_report(&v, &alloc(&[&[0, 1], &[]], 2)).unwrap();
        assert_eq!(r.envy(1, 0), 4.0);
        assert_eq!(r.envy(0, 1), -4.0);
        assert!(!r.is_envy_free);
        // removing either item still leaves value 2 > 0
        assert!(!r.is_ef1);
        for i in 0..2 {
            assert_eq!(r.envy(i, i), 0.0);
        }
    }

    #[test]
    fn ef1_accepts_one_item_envy() {
        let v = ValuationMatrix::from_rows(&[vec![5.0, 1.0, 1.0], vec![5.0, 1.0, 1.0]]).unwrap();
        let r = envy_report(&v, &alloc(&[&[0], &[1, 2]], 3)).unwrap();
        assert!(!r.is_envy_free);
        assert!(r.is_ef1);
    }

    #[test]
    fn balanced_examples() {
        assert!(is_balanced(&alloc(&[&[0, 1], &[2, 3]], 4), 4, 2).unwrap());
        assert!(is_balanced(&alloc(&[&[0, 1, 4], &[2, 3]], 5), 5, 2).unwrap());
        assert!(!is_balanced(&alloc(&[&[0, 1, 2], &[3]], 4), 4, 2).unwrap());
    }

    #[test]
    fn partition_is_validated() {
        assert!(matches!(
            Allocation::new(vec![vec![0, 1], vec![1]], 2),
            Err(FairDivError::InvalidAllocation(_))
        ));
        assert!(matches!(
            Allocation::new(vec![vec![0], vec![]], 2),
            Err(FairDivError::InvalidAllocation(_))
        ));
        assert!(matches!(
            Allocation::new(vec![vec![0, 5], vec![1]], 2),
            Err(FairDivError::InvalidAllocation(_))
        ));
        let v = ValuationMatrix::constant(3, 2, 1.0).unwrap();
        assert!(matches!(
            envy_report(&v, &alloc(&[&[0], &[1]], 2)),
            Err(FairDivError::Dimension(_))
        ));
    }

    #[test]
    fn range_is_checked() {
        let v = ValuationMatrix::from_rows(&[vec![0.5, 1.5]]).unwrap();
        assert!(matches!(
            v.clone().with_range(0.0, 1.0),
            Err(FairDivError::OutOfRange { item: 1, .. })
        ));
        assert_eq!(v.with_range(0.0, 2.0).unwrap().bound_b(), 2.0);
        assert!(ValuationMatrix::new(1, 1, vec![f64::NAN]).is_err());
        assert!(ValuationMatrix::new(0, 1, vec![]).is_err());
    }

    #[test]
    fn noisy_instance_checks_declared_bound() {
        let t = ValuationMatrix::from_rows(&[vec![1.0, 0.5]]).unwrap();
        let e = ValuationMatrix::from_rows(&[vec![0.6, 0.1]]).unwrap();
        let inst = NoisyInstance::new(t.clone(), e.clone(), 0.01, vec![0.4]).unwrap();
        assert!(inst.max_deviation() < 1e-12);
        assert!(matches!(
            NoisyInstance::unshifted(t, e, 0.1),
            Err(FairDivError::NoiseBound { .. })
        ));
    }

    #[test]
    fn csv_round_trip() {
        let v = ValuationMatrix::from_rows(&[vec![0.1, 1.0 / 3.0], vec![-2.5, 1e-300]]).unwrap();
        let mut buf = Vec::new();
        v.write_csv(&mut buf).unwrap();
        let text = String::from_utf8(buf.clone()).unwrap();
        assert!(text.starts_with("agent,item_0,item_1\n"));
        assert_eq!(ValuationMatrix::read_csv(buf.as_slice()).unwrap(), v);
    }
}

//! Round-Robin, observed-welfare maximisation, and the adversarial truth
//! construction that makes any deterministic allocator pay `2 eps m / n`.

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{FairDivError, Result};
use crate::valuation::{Allocation, ValuationMatrix};

/// Cyclic picking order for Round-Robin.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct PickOrder(Vec<usize>);

impl PickOrder {
    pub fn new(order: Vec<usize>) -> Result<Self> {
        let mut seen = vec![false; order.len()];
        for &a in &order {
            if a >= order.len() || std::mem::replace(&mut seen[a], true) {
                return Err(FairDivError::InvalidParameter(format!(
                    "{order:?} is not a permutation of 0..{}",
                    order.len()
                )));
            }
        }
        Ok(Self(order))
    }

    pub fn identity(n: usize) -> Self {
        Self((0..n).collect())
    }

    pub fn as_slice(&self) -> &[usize] {
        &self.0
    }
}

/// Round-Robin on `estimates`: agents pick in `order`, cyclically, each
/// taking a remaining item of maximum estimated value. Ties go to the lowest
/// item index.
pub fn round_robin(estimates: &ValuationMatrix, order: &PickOrder) -> Result<Allocation> {
    let n = estimates.n();
    let m = estimates.m();
    if order.as_slice().len() != n {
        return Err(FairDivError::Dimension(format!(
            "pick order has {} agents, matrix has {n}",
            order.as_slice().len()
        )));
    }
    let mut taken = vec![false; m];
    let mut bundles = vec![Vec::with_capacity(m.div_ceil(n)); n];
    for (pick, &agent) in order.as_slice().iter().cycle().take(m).enumerate() {
        let row = estimates.row(agent);
        let mut best: Option<usize> = None;
        for (j, &v) in row.iter().enumerate() {
            if taken[j] {
                continue;
            }
            if best.is_none_or(|b| v > row[b]) {
                best = Some(j);
            }
        }
        let j = best.unwrap_or_else(|| unreachable!("pick {pick} found no remaining item"));
        taken[j] = true;
        bundles[agent].push(j);
    }
    Allocation::new(bundles, m)
}

/// `2 eps ceil(m/n) + b`: the worst true envy Round-Robin can incur when
/// every estimate is within `eps` of the truth (up to per-agent shifts) and
/// true values lie in `[0, b]`.
pub fn rr_envy_bound(n: usize, m: usize, eps: f64, b: f64) -> f64 {
    assert!(n >= 1, "rr_envy_bound needs at least one agent");
    2.0 * eps * m.div_ceil(n) as f64 + b
}

/// Gives every item to an agent with the highest estimate for it. Tied
/// agents are resolved by one uniform draw per tied item, in item order.
pub fn welfare_max<R: Rng + ?Sized>(
    estimates: &ValuationMatrix,
    rng: &mut R,
) -> Result<Allocation> {
    let n = estimates.n();
    let mut owner = Vec::with_capacity(estimates.m());
    let mut tied = Vec::with_capacity(n);
    for j in 0..estimates.m() {
        tied.clear();
        let mut best = f64::NEG_INFINITY;
        for i in 0..n {
            let v = estimates.get(i, j);
            if v > best {
                best = v;
                tied.clear();
                tied.push(i);
            } else if v == best {
                tied.push(i);
            }
        }
        let pick = if tied.len() == 1 {
            tied[0]
        } else {
            tied[rng.random_range(0..tied.len())]
        };
        owner.push(pick);
    }
    Allocation::from_owners(&owner, n)
}

/// The agents `(p, q)` holding the largest and second-largest bundles,
/// lowest index first among equal sizes.
pub fn largest_pair(alloc: &Allocation) -> Result<(usize, usize)> {
    if alloc.n() < 2 {
        return Err(FairDivError::InvalidParameter(
            "need at least two agents".into(),
        ));
    }
    let sizes = alloc.sizes();
    let argmax_excluding = |skip: Option<usize>| {
        (0..sizes.len())
            .filter(|&i| Some(i) != skip)
            .fold(None, |best: Option<usize>, i| match best {
                Some(b) if sizes[b] >= sizes[i] => Some(b),
                _ => Some(i),
            })
            .expect("at least one candidate")
    };
    let p = argmax_excluding(None);
    let q = argmax_excluding(Some(p));
    Ok((p, q))
}

/// Truth matrix within `eps` of the all-½ estimates that makes agent `q`
/// (second-largest bundle in `alloc`) envy agent `p` (largest bundle) by at
/// least `2 eps m / n`.
///
/// Row `q` is `½ + eps` on `A_p`, `½ - eps` on `A_q` and `½` elsewhere; all
/// other rows are `½`.
pub fn adversarial_instance(
    n: usize,
    m: usize,
    eps: f64,
    alloc: &Allocation,
) -> Result<ValuationMatrix> {
    if !(eps > 0.0 && eps <= 0.5) {
        return Err(FairDivError::InvalidParameter(format!(
            "eps = {eps} must lie in (0, 1/2]"
        )));
    }
    if alloc.n() != n || alloc.m() != m {
        return Err(FairDivError::Dimension(format!(
            "allocation covers {} agents and {} items, expected {n} and {m}",
            alloc.n(),
            alloc.m()
        )));
    }
    let (p, q) = largest_pair(alloc)?;
    let mut values = vec![0.5; n * m];
    for &j in alloc.bundle(p) {
        values[q * m + j] = 0.5 + eps;
    }
    for &j in alloc.bundle(q) {
        values[q * m + j] = 0.5 - eps;
    }
    ValuationMatrix::new(n, m, values)?.with_range(0.0, 1.0)
}

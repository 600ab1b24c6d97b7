//! Exact finite checks of two probabilistic facts used by welfare
//! maximisation under noise: the Chebyshev association inequality for
//! monotone functions, and the conditional-mean gap between winning and
//! losing a noisy maximum.

use serde::{Deserialize, Serialize};

use crate::error::{FairDivError, Result};

/// Largest joint outcome count `conditional_mean_gap` will enumerate.
pub const STATE_SPACE_CAP: u128 = 10_000_000;

/// Compensated summation.
#[derive(Debug, Default, Clone, Copy)]
struct Kahan {
    sum: f64,
    comp: f64,
}

impl Kahan {
    fn add(&mut self, x: f64) {
        let y = x - self.comp;
        let t = self.sum + y;
        self.comp = (t - self.sum) - y;
        self.sum = t;
    }
}

/// A random variable with finite support.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DiscreteRv {
    support: Vec<f64>,
    weights: Vec<f64>,
}

impl DiscreteRv {
    /// Support must be strictly increasing, weights positive and summing to
    /// one within `1e-12`.
    pub fn new(support: Vec<f64>, weights: Vec<f64>) -> Result<Self> {
        if support.is_empty() || support.len() != weights.len() {
            return Err(FairDivError::Dimension(
                "support and weights must be non-empty and of equal length".into(),
            ));
        }
        if support.iter().any(|v| !v.is_finite()) || support.windows(2).any(|w| !(w[0] < w[1])) {
            return Err(FairDivError::InvalidParameter(
                "support must be strictly increasing".into(),
            ));
        }
        if weights.iter().any(|w| !(*w > 0.0)) {
            return Err(FairDivError::InvalidParameter(
                "weights must be positive".into(),
            ));
        }
        let mut total = Kahan::default();
        weights.iter().for_each(|w| total.add(*w));
        if (total.sum - 1.0).abs() > 1e-12 {
            return Err(FairDivError::InvalidParameter(format!(
                "weights sum to {}",
                total.sum
            )));
        }
        Ok(Self { support, weights })
    }

    /// Equal weight on every support point.
    pub fn uniform(support: Vec<f64>) -> Result<Self> {
        let w = 1.0 / support.len().max(1) as f64;
        let k = support.len();
        Self::new(support, vec![w; k])
    }

    pub fn point(v: f64) -> Self {
        Self {
            support: vec![v],
            weights: vec![1.0],
        }
    }

    pub fn support(&self) -> &[f64] {
        &self.support
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    pub fn mean(&self) -> f64 {
        let mut s = Kahan::default();
        for (v, w) in self.support.iter().zip(&self.weights) {
            s.add(v * w);
        }
        s.sum
    }

    /// Variance of the identity.
    pub fn variance(&self) -> f64 {
        variance(self, &self.support).unwrap_or(0.0)
    }
}

fn check_table(x: &DiscreteRv, f: &[f64], name: &str) -> Result<()> {
    if f.len() != x.support.len() {
        return Err(FairDivError::Dimension(format!(
            "{name} has {} entries for a support of {}",
            f.len(),
            x.support.len()
        )));
    }
    if f.iter().any(|v| !v.is_finite()) {
        return Err(FairDivError::InvalidParameter(format!(
            "{name} has a non-finite entry"
        )));
    }
    Ok(())
}

fn check_monotone(x: &DiscreteRv, f: &[f64], name: &str) -> Result<()> {
    check_table(x, f, name)?;
    if let Some(pos) = f.windows(2).position(|w| w[1] < w[0]) {
        return Err(FairDivError::InvalidParameter(format!(
            "{name} decreases between support points {pos} and {}",
            pos + 1
        )));
    }
    Ok(())
}

/// `sum_{a < b} w_a w_b (f_b - f_a)(g_b - g_a)`, which equals
/// `E[fg] - E[f]E[g]` and is a sum of non-negative terms when `f` and `g`
/// are both nondecreasing.
fn pair_sum(x: &DiscreteRv, f: &[f64], g: &[f64]) -> f64 {
    let mut s = Kahan::default();
    let w = &x.weights;
    for a in 0..w.len() {
        for b in a + 1..w.len() {
            s.add(w[a] * w[b] * (f[b] - f[a]) * (g[b] - g[a]));
        }
    }
    s.sum
}

/// `E[f(X) g(X)] - E[f(X)] E[g(X)]` for nondecreasing tables `f`, `g`.
pub fn association_gap(x: &DiscreteRv, f: &[f64], g: &[f64]) -> Result<f64> {
    check_monotone(x, f, "f")?;
    check_monotone(x, g, "g")?;
    Ok(pair_sum(x, f, g))
}

/// `Var f(X)`.
pub fn variance(x: &DiscreteRv, f: &[f64]) -> Result<f64> {
    check_table(x, f, "f")?;
    Ok(pair_sum(x, f, f))
}

/// Whether both `f(X)` and `g(X)` have positive variance, the exact
/// condition for a strictly positive association gap.
pub fn strict_condition(x: &DiscreteRv, f: &[f64], g: &[f64]) -> Result<bool> {
    check_monotone(x, f, "f")?;
    check_monotone(x, g, "g")?;
    Ok(pair_sum(x, f, f) > 0.0 && pair_sum(x, g, g) > 0.0)
}

/// Conditional means of `X_1` given that agent 1 wins
/// (`X_1 + Y_1 > max_{i >= 2} X_i + Y_i`) and given that it does not, with
/// `X_i ~ D` and `Y_i ~ Dp` all independent. Ties count as losses. Every
/// joint outcome of the `n` pairs is enumerated.
pub fn conditional_mean_gap(d: &DiscreteRv, dp: &DiscreteRv, n: usize) -> Result<(f64, f64)> {
    if n < 2 {
        return Err(FairDivError::InvalidParameter(
            "need at least two agents".into(),
        ));
    }
    let pairs: Vec<(f64, f64, f64)> = d
        .support
        .iter()
        .zip(&d.weights)
        .flat_map(|(x, wx)| {
            dp.support
                .iter()
                .zip(&dp.weights)
                .map(move |(y, wy)| (*x, x + y, wx * wy))
        })
        .collect();
    let per = pairs.len() as u128;
    let outcomes = per.checked_pow(n as u32).unwrap_or(u128::MAX);
    if outcomes > STATE_SPACE_CAP {
        return Err(FairDivError::StateSpace {
            outcomes,
            cap: STATE_SPACE_CAP,
        });
    }
    let (mut p_win, mut x_win, mut p_lose, mut x_lose) = (
        Kahan::default(),
        Kahan::default(),
        Kahan::default(),
        Kahan::default(),
    );
    let mut idx = vec![0usize; n];
    loop {
        let (x1, s1, mut w) = pairs[idx[0]];
        let mut win = true;
        for &k in &idx[1..] {
            let (_, s, wk) = pairs[k];
            w *= wk;
            if s >= s1 {
                win = false;
            }
        }
        if win {
            p_win.add(w);
            x_win.add(w * x1);
        } else {
            p_lose.add(w);
            x_lose.add(w * x1);
        }
        let mut pos = 0;
        loop {
            if pos == n {
                if p_win.sum <= 0.0 {
                    return Err(FairDivError::ZeroProbability("agent 1 never wins".into()));
                }
                if p_lose.sum <= 0.0 {
                    return Err(FairDivError::ZeroProbability("agent 1 never loses".into()));
                }
                return Ok((x_win.sum / p_win.sum, x_lose.sum / p_lose.sum));
            }
            idx[pos] += 1;
            if idx[pos] < pairs.len() {
                break;
            }
            idx[pos] = 0;
            pos += 1;
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::oracle;

    #[test]
    fn rv_validation() {
        assert!(DiscreteRv::new(vec![1.0, 0.0], vec![0.5, 0.5]).is_err());
        assert!(DiscreteRv::new(vec![0.0, 0.0], vec![0.5, 0.5]).is_err());
        assert!(DiscreteRv::new(vec![0.0, 1.0], vec![0.5, 0.6]).is_err());
        assert!(DiscreteRv::new(vec![0.0, 1.0], vec![1.0, 0.0]).is_err());
        assert!(DiscreteRv::new(vec![0.0, 1.0], vec![0.25, 0.75]).is_ok());
    }

    #[test]
    fn association_examples() {
        let x = DiscreteRv::uniform(vec![0.0, 1.0]).unwrap();
        assert_eq!(association_gap(&x, &[0.0, 1.0], &[0.0, 1.0]).unwrap(), 0.25);
        assert_eq!(association_gap(&x, &[2.0, 2.0], &[0.0, 1.0]).unwrap(), 0.0);
        let p = DiscreteRv::point(3.0);
        assert_eq!(association_gap(&p, &[1.0], &[5.0]).unwrap(), 0.0);
        assert!(association_gap(&x, &[1.0, 0.0], &[0.0, 1.0]).is_err());
    }

    #[test]
    fn strict_condition_examples() {
        let x = DiscreteRv::uniform(vec![0.0, 1.0]).unwrap();
        assert!(strict_condition(&x, &[0.0, 1.0], &[0.0, 1.0]).unwrap());
        assert!(!strict_condition(&x, &[0.0, 1.0], &[4.0, 4.0]).unwrap());
        let y = DiscreteRv::uniform(vec![0.0, 1.0, 2.0]).unwrap();
        assert!(!strict_condition(&y, &[1.0, 1.0, 1.0], &[0.0, 1.0, 2.0]).unwrap());
    }

    #[test]
    fn gap_matches_naive_formula() {
        let x = DiscreteRv::new(vec![-1.0, 0.5, 2.0, 3.0], vec![0.1, 0.2, 0.3, 0.4]).unwrap();
        let f = [0.0, 0.2, 0.2, 1.5];
        let g = [-3.0, -1.0, 4.0, 4.5];
        let gap = association_gap(&x, &f, &g).unwrap();
        assert!((gap - oracle::naive_association_gap(x.weights(), &f, &g)).abs() < 1e-12);
    }

    #[test]
    fn conditional_mean_examples() {
        let point = DiscreteRv::point(0.4);
        let noise = DiscreteRv::uniform(vec![0.0, 0.1]).unwrap();
        let (w, l) = conditional_mean_gap(&point, &noise, 2).unwrap();
        assert!((w - l).abs() < 1e-12);

        let d = DiscreteRv::uniform(vec![0.0, 1.0]).unwrap();
        let (w, l) = conditional_mean_gap(&d, &noise, 2).unwrap();
        assert!(w - l > 1e-12);
        let (ow, ol) = oracle::conditional_means_via_cdf(
            d.support(),
            d.weights(),
            noise.support(),
            noise.weights(),
            2,
        )
        .unwrap();
        assert!((w - ow).abs() < 1e-12 && (l - ol).abs() < 1e-12);

        let (w, l) = conditional_mean_gap(&d, &DiscreteRv::point(0.0), 2).unwrap();
        assert!(w - l > 1e-12);
    }

    #[test]
    fn conditional_mean_errors() {
        let p = DiscreteRv::point(0.0);
        assert!(matches!(
            conditional_mean_gap(&p, &p, 2),
            Err(FairDivError::ZeroProbability(_))
        ));
        let d = DiscreteRv::uniform((0..10).map(f64::from).collect()).unwrap();
        assert!(matches!(
            conditional_mean_gap(&d, &d, 4),
            Err(FairDivError::StateSpace { .. })
        ));
        assert!(conditional_mean_gap(&d, &p, 1).is_err());
    }
}

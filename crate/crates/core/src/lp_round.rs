//! Min-max-envy linear program over fractional allocations, followed by
//! independent randomized rounding of each item.
//!
//! Variables are `x[i][j]` (the share of item `j` given to agent `i`, stored
//! at index `i * m + j`) and the free objective variable `alpha` (index
//! `n * m`). For every ordered pair `i != k` there is one envy row
//! `alpha - sum_j v_ij x_kj + sum_j v_ij x_ij >= 0`, followed by one
//! `sum_i x_ij = 1` row per item.

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{FairDivError, Result};
use crate::lp::{LinearProgram, Sense, VarBound};
use crate::valuation::{envy_report, Allocation, NoisyInstance, ValuationMatrix};

/// Column-sum and envy-row tolerance for fractional allocations.
pub const FRACTIONAL_TOL: f64 = 1e-8;

/// The min-max-envy program together with the shape it was built for.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MinMaxEnvyLp {
    pub n: usize,
    pub m: usize,
    pub lp: LinearProgram,
}

impl MinMaxEnvyLp {
    pub fn alpha_index(&self) -> usize {
        self.n * self.m
    }

    /// Number of envy rows, `n (n - 1)`.
    pub fn envy_rows(&self) -> usize {
        self.n * (self.n - 1)
    }
}

/// `x` with its achieved objective.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FractionalAllocation {
    pub n: usize,
    pub m: usize,
    /// Row-major `n x m`.
    pub x: Vec<f64>,
    pub alpha: f64,
    /// Dual multipliers of the envy rows, `n x n` with a zero diagonal.
    /// At an optimum they are non-negative and sum to one.
    pub envy_weights: Vec<f64>,
}

impl FractionalAllocation {
    pub fn get(&self, agent: usize, item: usize) -> f64 {
        self.x[agent * self.m + item]
    }

    /// `sum_j v_ij x_kj`: expected value agent `i` assigns to the rounded
    /// bundle of agent `k`.
    pub fn expected_value(&self, values: &ValuationMatrix, i: usize, k: usize) -> f64 {
        (0..self.m).map(|j| values.get(i, j) * self.get(k, j)).sum()
    }

    /// Largest fractional envy `sum_j v_ij (x_kj - x_ij)` under `values`.
    pub fn max_fractional_envy(&self, values: &ValuationMatrix) -> f64 {
        let mut worst = f64::NEG_INFINITY;
        for i in 0..self.n {
            let own = self.expected_value(values, i, i);
            for k in 0..self.n {
                if k != i {
                    worst = worst.max(self.expected_value(values, i, k) - own);
                }
            }
        }
        worst
    }

    /// Checks non-negativity, unit column sums and that `alpha` dominates
    /// every fractional envy under `values`.
    pub fn validate(&self, values: &ValuationMatrix) -> Result<()> {
        if self.x.len() != self.n * self.m {
            return Err(FairDivError::Dimension("x has the wrong length".into()));
        }
        if let Some(v) = self.x.iter().find(|v| **v < 0.0 || !v.is_finite()) {
            return Err(FairDivError::Numerical(format!("negative share {v}")));
        }
        self.check_columns()?;
        let worst = self.max_fractional_envy(values);
        if worst > self.alpha + FRACTIONAL_TOL {
            return Err(FairDivError::Numerical(format!(
                "fractional envy {worst} exceeds alpha {}",
                self.alpha
            )));
        }
        Ok(())
    }

    fn check_columns(&self) -> Result<()> {
        for j in 0..self.m {
            let s: f64 = (0..self.n).map(|i| self.get(i, j)).sum();
            if (s - 1.0).abs() > FRACTIONAL_TOL {
                return Err(FairDivError::Numerical(format!(
                    "column {j} sums to {s}, not 1"
                )));
            }
        }
        Ok(())
    }
}

/// Builds the min-max-envy program for `estimates` (`n >= 2`).
pub fn build_minmax_envy_lp(estimates: &ValuationMatrix) -> Result<MinMaxEnvyLp> {
    let n = estimates.n();
    let m = estimates.m();
    if n < 2 {
        return Err(FairDivError::InvalidParameter(
            "the envy program needs at least two agents".into(),
        ));
    }
    let nv = n * m + 1;
    let alpha = n * m;
    let mut objective = vec![0.0; nv];
    objective[alpha] = 1.0;
    let mut bounds = vec![VarBound::NonNegative; nv];
    bounds[alpha] = VarBound::Free;
    let mut lp = LinearProgram::new(objective, bounds)?;
    for i in 0..n {
        for k in 0..n {
            if i == k {
                continue;
            }
            let mut row = vec![0.0; nv];
            row[alpha] = 1.0;
            for j in 0..m {
                let v = estimates.get(i, j);
                row[k * m + j] -= v;
                row[i * m + j] += v;
            }
            lp.add_constraint(row, Sense::Ge, 0.0)?;
        }
    }
    for j in 0..m {
        let mut row = vec![0.0; nv];
        for i in 0..n {
            row[i * m + j] = 1.0;
        }
        lp.add_constraint(row, Sense::Eq, 1.0)?;
    }
    Ok(MinMaxEnvyLp { n, m, lp })
}

/// Solves the min-max-envy program.
pub fn solve_lp(program: &MinMaxEnvyLp) -> Result<FractionalAllocation> {
    let sol = program.lp.solve()?;
    let (n, m) = (program.n, program.m);
    let x: Vec<f64> = sol.x[..n * m].iter().map(|v| v.max(0.0)).collect();
    let mut envy_weights = vec![0.0; n * n];
    let mut row = 0;
    for i in 0..n {
        for k in 0..n {
            if i != k {
                envy_weights[i * n + k] = sol.duals[row];
                row += 1;
            }
        }
    }
    let frac = FractionalAllocation {
        n,
        m,
        x,
        alpha: sol.x[program.alpha_index()],
        envy_weights,
    };
    frac.check_columns()?;
    Ok(frac)
}

/// Rounds `frac` by giving item `j` to agent `i` with probability
/// `x[i][j]`, independently across items (one uniform draw per item).
pub fn randomized_round<R: Rng + ?Sized>(
    frac: &FractionalAllocation,
    rng: &mut R,
) -> Result<Allocation> {
    frac.check_columns()?;
    let mut owner = Vec::with_capacity(frac.m);
    for j in 0..frac.m {
        let u: f64 = rng.random();
        let mut acc = 0.0;
        let mut chosen = None;
        let mut last_positive = 0;
        for i in 0..frac.n {
            let p = frac.get(i, j);
            if p > 0.0 {
                last_positive = i;
            }
            acc += p;
            if chosen.is_none() && u < acc {
                chosen = Some(i);
            }
        }
        owner.push(chosen.unwrap_or(last_positive));
    }
    Allocation::from_owners(&owner, frac.n)
}

/// Result of the LP-then-round pipeline.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LpOutcome {
    pub allocation: Allocation,
    /// LP optimum on the estimates (`None` for a single agent).
    pub alpha: Option<f64>,
    pub observed_max_envy: f64,
    pub true_max_envy: f64,
    pub envy_free: bool,
}

/// Builds and solves the program on `instance.estimates`, rounds the
/// optimum, and scores the result under both matrices.
pub fn lp_pipeline<R: Rng + ?Sized>(instance: &NoisyInstance, rng: &mut R) -> Result<LpOutcome> {
    let (allocation, alpha) = if instance.n() == 1 {
        (
            Allocation::new(vec![(0..instance.m()).collect()], instance.m())?,
            None,
        )
    } else {
        let program = build_minmax_envy_lp(&instance.estimates)?;
        let frac = solve_lp(&program)?;
        (randomized_round(&frac, rng)?, Some(frac.alpha))
    };
    let observed = envy_report(&instance.estimates, &allocation)?;
    let truth = envy_report(&instance.truth, &allocation)?;
    Ok(LpOutcome {
        allocation,
        alpha,
        observed_max_envy: observed.max_envy,
        true_max_envy: truth.max_envy,
        envy_free: truth.is_envy_free,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::oracle;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn solve(rows: &[Vec<f64>]) -> FractionalAllocation {
        let v = ValuationMatrix::from_rows(rows).unwrap();
        let f = solve_lp(&build_minmax_envy_lp(&v).unwrap()).unwrap();
        f.validate(&v).unwrap();
        f
    }

    #[test]
    fn program_shape() {
        let p = build_minmax_envy_lp(&ValuationMatrix::constant(2, 2, 1.0).unwrap()).unwrap();
        assert_eq!(p.lp.num_vars(), 5);
        assert_eq!(p.lp.count_sense(Sense::Ge), 2);
        assert_eq!(p.lp.count_sense(Sense::Eq), 2);
        let p = build_minmax_envy_lp(&ValuationMatrix::constant(3, 4, 1.0).unwrap()).unwrap();
        assert_eq!(p.lp.num_vars(), 13);
        assert_eq!(p.lp.count_sense(Sense::Ge), 6);
        assert_eq!(p.lp.count_sense(Sense::Eq), 4);
        assert!(build_minmax_envy_lp(&ValuationMatrix::constant(1, 4, 1.0).unwrap()).is_err());
    }

    #[test]
    fn single_shared_item_splits_evenly() {
        // alpha(x) = max(1 - 2x, 2x - 1) on a grid over x in [0, 1]
        let grid_min = (0..=1000)
            .map(|s| {
                let x = s as f64 / 1000.0;
                (1.0 - 2.0 * x).max(2.0 * x - 1.0)
            })
            .fold(f64::INFINITY, f64::min);
        let f = solve(&[vec![1.0], vec![1.0]]);
        assert!((f.alpha - grid_min).abs() < 1e-8);
        assert!((f.get(0, 0) - 0.5).abs() < 1e-8);
    }

    #[test]
    fn separable_values_are_integral() {
        let f = solve(&[vec![1.0, 0.0], vec![0.0, 1.0]]);
        assert!((f.alpha + 1.0).abs() < 1e-8);
        assert!((f.get(0, 0) - 1.0).abs() < 1e-8 && (f.get(1, 1) - 1.0).abs() < 1e-8);
    }

    #[test]
    fn identical_values_reach_zero() {
        let f = solve(&[vec![1.0, 1.0], vec![1.0, 1.0]]);
        assert!(f.alpha.abs() < 1e-8);
    }

    #[test]
    fn lp_certified_by_lagrangian_bound_and_below_integral() {
        let mut rng = ChaCha8Rng::seed_from_u64(17);
        for trial in 0..30 {
            let n = 2 + trial % 2;
            let m = 1 + trial % 6;
            let v = ValuationMatrix::new(n, m, (0..n * m).map(|_| rng.random()).collect()).unwrap();
            let f = solve_lp(&build_minmax_envy_lp(&v).unwrap()).unwrap();
            f.validate(&v).unwrap();
            let lower = oracle::minmax_envy_lagrangian_bound(&v, &f.envy_weights);
            assert!(
                (f.alpha - lower).abs() < 1e-7,
                "alpha {} bound {lower}",
                f.alpha
            );
            assert!(f.alpha <= oracle::min_max_envy_integral(&v) + 1e-9);
        }
    }

    #[test]
    fn rounding_integral_is_deterministic() {
        let f = FractionalAllocation {
            n: 2,
            m: 3,
            x: vec![1.0, 0.0, 1.0, 0.0, 1.0, 0.0],
            alpha: 0.0,
            envy_weights: vec![0.0; 4],
        };
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        let first = randomized_round(&f, &mut rng).unwrap();
        for _ in 0..50 {
            assert_eq!(randomized_round(&f, &mut rng).unwrap(), first);
        }
        let column = FractionalAllocation {
            n: 3,
            m: 1,
            x: vec![1.0, 0.0, 0.0],
            alpha: 0.0,
            envy_weights: vec![0.0; 9],
        };
        for _ in 0..50 {
            assert_eq!(randomized_round(&column, &mut rng).unwrap().bundle(0), &[0]);
        }
    }

    #[test]
    fn rounding_half_half_frequency() {
        let f = FractionalAllocation {
            n: 2,
            m: 1,
            x: vec![0.5, 0.5],
            alpha: 0.0,
            envy_weights: vec![0.0; 4],
        };
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let draws = 10_000;
        let zero = (0..draws)
            .filter(|_| randomized_round(&f, &mut rng).unwrap().bundle(0).len() == 1)
            .count();
        let freq = zero as f64 / draws as f64;
        assert!((freq - 0.5).abs() <= 0.02, "{freq}");
    }

    #[test]
    fn rounding_rejects_bad_columns() {
        let f = FractionalAllocation {
            n: 2,
            m: 1,
            x: vec![0.5, 0.4],
            alpha: 0.0,
            envy_weights: vec![0.0; 4],
        };
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        assert!(matches!(
            randomized_round(&f, &mut rng),
            Err(FairDivError::Numerical(_))
        ));
    }

    #[test]
    fn pipeline_examples() {
        let v = ValuationMatrix::from_rows(&[vec![1.0, 0.0], vec![0.0, 1.0]]).unwrap();
        let inst = NoisyInstance::unshifted(v.clone(), v, 0.0).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let out = lp_pipeline(&inst, &mut rng).unwrap();
        assert!(out.envy_free);
        assert_eq!(out.allocation.bundles(), &[vec![0], vec![1]]);

        let v = ValuationMatrix::from_rows(&[vec![0.7], vec![0.7]]).unwrap();
        let inst = NoisyInstance::unshifted(v.clone(), v, 0.0).unwrap();
        let out = lp_pipeline(&inst, &mut rng).unwrap();
        assert!((out.true_max_envy - 0.7).abs() < 1e-12);

        let v = ValuationMatrix::from_rows(&[vec![0.7, 0.1]]).unwrap();
        let inst = NoisyInstance::unshifted(v.clone(), v, 0.0).unwrap();
        let out = lp_pipeline(&inst, &mut rng).unwrap();
        assert_eq!(out.allocation.bundle(0), &[0, 1]);
        assert_eq!(out.alpha, None);
    }
}

//! Noise models that turn true valuations into estimates, the scalar
//! distributions they draw from, and the monotone-hazard-rate pipeline.
//!
//! Estimates follow the convention `|v* - v^ - shift_i| <= eps`, so a
//! per-agent shift lowers that agent's estimates.

use std::fmt;
use std::str::FromStr;

use rand::Rng;
use rand_distr::weighted::WeightedIndex;
use rand_distr::{Distribution as _, Exp, Normal, Uniform};
use serde::{Deserialize, Serialize};

use crate::allocators::{round_robin, PickOrder};
use crate::error::{FairDivError, Result};
use crate::valuation::{envy_report, Allocation, NoisyInstance, ValuationMatrix};

/// A scalar distribution.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum Distribution {
    Uniform {
        lo: f64,
        hi: f64,
    },
    Exponential {
        mean: f64,
    },
    /// `|N(0, scale^2)|`.
    HalfNormal {
        scale: f64,
    },
    PointMass(f64),
    DiscreteTable {
        support: Vec<f64>,
        weights: Vec<f64>,
    },
}

impl Distribution {
    pub fn validate(&self) -> Result<()> {
        let bad = |msg: String| Err(FairDivError::InvalidParameter(msg));
        match self {
            Self::Uniform { lo, hi } if !(lo.is_finite() && hi.is_finite() && hi > lo) => {
                bad(format!("uniform needs lo < hi, got [{lo}, {hi}]"))
            }
            Self::Exponential { mean } if !(*mean > 0.0 && mean.is_finite()) => {
                bad(format!("exponential mean must be positive, got {mean}"))
            }
            Self::HalfNormal { scale } if !(*scale > 0.0 && scale.is_finite()) => {
                bad(format!("half-normal scale must be positive, got {scale}"))
            }
            Self::PointMass(v) if !v.is_finite() => bad(format!("point mass at {v}")),
            Self::DiscreteTable { support, weights } => {
                if support.is_empty() || support.len() != weights.len() {
                    return bad("table needs matching, non-empty support and weights".into());
                }
                if support.iter().any(|v| !v.is_finite()) || weights.iter().any(|w| !(*w >= 0.0)) {
                    return bad("table entries must be finite with non-negative weights".into());
                }
                let total: f64 = weights.iter().sum();
                if (total - 1.0).abs() > 1e-9 {
                    return bad(format!("table weights sum to {total}"));
                }
                Ok(())
            }
            _ => Ok(()),
        }
    }

    pub fn mean(&self) -> f64 {
        match self {
            Self::Uniform { lo, hi } => 0.5 * (lo + hi),
            Self::Exponential { mean } => *mean,
            Self::HalfNormal { scale } => scale * (2.0 / std::f64::consts::PI).sqrt(),
            Self::PointMass(v) => *v,
            Self::DiscreteTable { support, weights } => {
                support.iter().zip(weights).map(|(v, w)| v * w).sum()
            }
        }
    }

    /// Membership in the declared non-negative MHR families: exponential,
    /// half-normal, uniform on a non-negative interval, and a non-negative
    /// point mass. Tables are never treated as MHR.
    pub fn is_mhr(&self) -> bool {
        match self {
            Self::Exponential { .. } | Self::HalfNormal { .. } => true,
            Self::Uniform { lo, .. } => *lo >= 0.0,
            Self::PointMass(v) => *v >= 0.0,
            Self::DiscreteTable { .. } => false,
        }
    }

    /// One draw.
    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> Result<f64> {
        self.validate()?;
        let err = |e: &dyn fmt::Display| FairDivError::InvalidParameter(e.to_string());
        Ok(match self {
            Self::Uniform { lo, hi } => Uniform::new(*lo, *hi).map_err(|e| err(&e))?.sample(rng),
            Self::Exponential { mean } => Exp::new(1.0 / mean).map_err(|e| err(&e))?.sample(rng),
            Self::HalfNormal { scale } => Normal::new(0.0, *scale)
                .map_err(|e| err(&e))?
                .sample(rng)
                .abs(),
            Self::PointMass(v) => *v,
            Self::DiscreteTable { support, weights } => {
                support[WeightedIndex::new(weights)
                    .map_err(|e| err(&e))?
                    .sample(rng)]
            }
        })
    }
}

impl fmt::Display for Distribution {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Self::Uniform { lo, hi } => write!(f, "uniform:{lo},{hi}"),
            Self::Exponential { mean } => write!(f, "exp:{mean}"),
            Self::HalfNormal { scale } => write!(f, "halfnormal:{scale}"),
            Self::PointMass(v) => write!(f, "point:{v}"),
            Self::DiscreteTable { support, weights } => {
                write!(f, "table:")?;
                for (idx, (v, w)) in support.iter().zip(weights).enumerate() {
                    if idx > 0 {
                        write!(f, ",")?;
                    }
                    write!(f, "{v}/{w}")?;
                }
                Ok(())
            }
        }
    }
}

impl FromStr for Distribution {
    type Err = FairDivError;

    /// Parses `exp:MEAN`, `uniform:LO,HI`, `halfnormal:SCALE`, `point:V`
    /// or `table:V/W,V/W,...`.
    fn from_str(s: &str) -> Result<Self> {
        let perr = |msg: String| FairDivError::Parse(format!("distribution {s:?}: {msg}"));
        let (family, rest) = s
            .trim()
            .split_once(':')
            .ok_or_else(|| perr("expected family:params".into()))?;
        let num = |t: &str| {
            t.trim()
                .parse::<f64>()
                .map_err(|e| perr(format!("{t:?}: {e}")))
        };
        let params: Vec<&str> = rest.split(',').collect();
        let want = |k: usize| {
            if params.len() == k {
                Ok(())
            } else {
                Err(perr(format!(
                    "expected {k} parameter(s), found {}",
                    params.len()
                )))
            }
        };
        let dist = match family.trim() {
            "exp" => {
                want(1)?;
                Self::Exponential {
                    mean: num(params[0])?,
                }
            }
            "uniform" => {
                want(2)?;
                Self::Uniform {
                    lo: num(params[0])?,
                    hi: num(params[1])?,
                }
            }
            "halfnormal" => {
                want(1)?;
                Self::HalfNormal {
                    scale: num(params[0])?,
                }
            }
            "point" => {
                want(1)?;
                Self::PointMass(num(params[0])?)
            }
            "table" => {
                let mut support = Vec::new();
                let mut weights = Vec::new();
                for entry in &params {
                    let (v, w) = entry
                        .split_once('/')
                        .ok_or_else(|| perr(format!("{entry:?} is not V/W")))?;
                    support.push(num(v)?);
                    weights.push(num(w)?);
                }
                Self::DiscreteTable { support, weights }
            }
            other => return Err(perr(format!("unknown family {other:?}"))),
        };
        dist.validate()?;
        Ok(dist)
    }
}

/// How a bounded adversary places its noise.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum AdversarialScheme {
    /// Raises every item below the agent's median value by `eps` and lowers
    /// the rest by `eps`, pulling Round-Robin towards poor items.
    WorstAgainstRr,
    /// Independent uniform noise in `[-eps, eps]`.
    UniformInBox,
    /// Uniform noise plus a per-agent shift.
    PerAgentShift(Vec<f64>),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum NoiseModel {
    BoundedAdversarial {
        eps: f64,
        scheme: AdversarialScheme,
    },
    AdditiveIid(Distribution),
    /// `eta = sigma * z` with a fair random sign `sigma` and `z` from a
    /// non-negative MHR distribution.
    SignFlippedMhr(Distribution),
}

fn median(row: &[f64]) -> f64 {
    let mut v = row.to_vec();
    v.sort_by(f64::total_cmp);
    let mid = v.len() / 2;
    if v.len() % 2 == 1 {
        v[mid]
    } else {
        0.5 * (v[mid - 1] + v[mid])
    }
}

/// Produces estimates from `truth`. Random noise is drawn cell by cell in
/// row-major order. The returned instance's bound is the declared `eps`
/// for bounded models and the realised largest `|eta|` otherwise.
pub fn apply_noise<R: Rng + ?Sized>(
    truth: &ValuationMatrix,
    model: &NoiseModel,
    rng: &mut R,
) -> Result<NoisyInstance> {
    let (n, m) = (truth.n(), truth.m());
    let mut est = Vec::with_capacity(n * m);
    let mut shifts = vec![0.0; n];
    let mut realised: f64 = 0.0;
    match model {
        NoiseModel::BoundedAdversarial { eps, scheme } => {
            let eps = *eps;
            if !(eps >= 0.0 && eps.is_finite()) {
                return Err(FairDivError::InvalidParameter(format!("eps = {eps}")));
            }
            if let AdversarialScheme::PerAgentShift(d) = scheme {
                if d.len() != n {
                    return Err(FairDivError::Dimension(format!(
                        "{} shifts for {n} agents",
                        d.len()
                    )));
                }
                shifts.clone_from(d);
            }
            let box_draw = |rng: &mut R| {
                if eps > 0.0 {
                    rng.random_range(-eps..=eps)
                } else {
                    0.0
                }
            };
            for i in 0..n {
                let row = truth.row(i);
                let med = if m > 0 { median(row) } else { 0.0 };
                for &v in row {
                    est.push(match scheme {
                        AdversarialScheme::WorstAgainstRr => {
                            if v < med {
                                v + eps
                            } else {
                                v - eps
                            }
                        }
                        AdversarialScheme::UniformInBox => v + box_draw(rng),
                        AdversarialScheme::PerAgentShift(_) => v - shifts[i] + box_draw(rng),
                    });
                }
            }
            let estimates = ValuationMatrix::new(n, m, est)?;
            return NoisyInstance::new(truth.clone(), estimates, eps, shifts);
        }
        NoiseModel::AdditiveIid(dist) => {
            dist.validate()?;
            for &v in truth.values() {
                let eta = dist.sample(rng)?;
                realised = realised.max(eta.abs());
                est.push(v + eta);
            }
        }
        NoiseModel::SignFlippedMhr(dist) => {
            dist.validate()?;
            if !dist.is_mhr() {
                return Err(FairDivError::InvalidParameter(format!(
                    "{dist} is not a declared MHR family"
                )));
            }
            for &v in truth.values() {
                let sigma = if rng.random::<bool>() { 1.0 } else { -1.0 };
                let eta = sigma * dist.sample(rng)?;
                realised = realised.max(eta.abs());
                est.push(v + eta);
            }
        }
    }
    let estimates = ValuationMatrix::new(n, m, est)?;
    // Recompute the bound from the stored matrices so rounding in `v + eta`
    // cannot trip the instance check.
    let inst = NoisyInstance::unshifted(truth.clone(), estimates.clone(), f64::INFINITY)?;
    let eps = inst.max_deviation().max(realised);
    NoisyInstance::unshifted(truth.clone(), estimates, eps)
}

/// `H_k = 1 + 1/2 + ... + 1/k`.
pub fn harmonic(k: usize) -> f64 {
    (1..=k).map(|i| 1.0 / i as f64).sum()
}

/// Largest mean the MHR guarantee allows: `n / (m ln(nm))`.
pub fn mhr_mean_threshold(n: usize, m: usize) -> f64 {
    n as f64 / (m as f64 * ((n * m) as f64).ln())
}

/// Report of one MHR pipeline run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MhrReport {
    pub allocation: Allocation,
    pub true_max_envy: f64,
    /// Max envy measured on the noisy estimates.
    pub observed_max_envy: f64,
    /// Largest realised `|eta|`.
    pub eps_max: f64,
    /// `2 ln(nm) E[D]`.
    pub beta_log: f64,
    /// `2 H_{nm} E[D]`.
    pub beta_harmonic: f64,
    /// `2 beta_harmonic ceil(m / n) + 1`.
    pub bound_value: f64,
    /// The distribution mean exceeds `n / (m ln(nm))`.
    pub mean_warning: bool,
    /// `H_{nm} > ln(nm)`, so the log-based threshold is the smaller one.
    pub log_below_harmonic: bool,
}

impl MhrReport {
    /// `eps_max < beta_harmonic`: the high-probability event holds.
    pub fn noise_event(&self) -> bool {
        self.eps_max < self.beta_harmonic
    }
}

/// Adds sign-flipped MHR noise to `truth` (entries in `[0, 1]`), runs
/// Round-Robin on the estimates, and reports envy against the thresholds.
pub fn mhr_pipeline<R: Rng + ?Sized>(
    truth: &ValuationMatrix,
    dist: &Distribution,
    rng: &mut R,
) -> Result<MhrReport> {
    let (n, m) = (truth.n(), truth.m());
    if n * m < 4 {
        return Err(FairDivError::InvalidParameter("need n * m >= 4".into()));
    }
    truth.clone().with_range(0.0, 1.0)?;
    let inst = apply_noise(truth, &NoiseModel::SignFlippedMhr(dist.clone()), rng)?;
    let allocation = round_robin(&inst.estimates, &PickOrder::identity(n))?;
    let true_max_envy = envy_report(truth, &allocation)?.max_envy;
    let observed_max_envy = envy_report(&inst.estimates, &allocation)?.max_envy;
    let nm = (n * m) as f64;
    let mean = dist.mean();
    let h = harmonic(n * m);
    let beta_harmonic = 2.0 * h * mean;
    Ok(MhrReport {
        allocation,
        true_max_envy,
        observed_max_envy,
        eps_max: inst.eps,
        beta_log: 2.0 * nm.ln() * mean,
        beta_harmonic,
        bound_value: 2.0 * beta_harmonic * m.div_ceil(n) as f64 + 1.0,
        mean_warning: mean > mhr_mean_threshold(n, m),
        log_below_harmonic: h > nm.ln(),
    })
}

/// Maximum of `count` draws against the threshold `2 H_count E[D]`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct OrderStatistic {
    pub max: f64,
    pub threshold: f64,
}

impl OrderStatistic {
    pub fn holds(&self) -> bool {
        self.max < self.threshold
    }
}

pub fn order_statistic_trial<R: Rng + ?Sized>(
    dist: &Distribution,
    count: usize,
    rng: &mut R,
) -> Result<OrderStatistic> {
    let mut max = f64::NEG_INFINITY;
    for _ in 0..count {
        max = max.max(dist.sample(rng)?);
    }
    Ok(OrderStatistic {
        max,
        threshold: 2.0 * harmonic(count) * dist.mean(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn rng(seed: u64) -> ChaCha8Rng {
        ChaCha8Rng::seed_from_u64(seed)
    }

    #[test]
    fn point_mass_is_constant() {
        let mut r = rng(1);
        let d = Distribution::PointMass(3.0);
        assert!((0..100).all(|_| d.sample(&mut r).unwrap() == 3.0));
    }

    #[test]
    fn exponential_mean() {
        let mut r = rng(2);
        let mu = 0.7;
        let d = Distribution::Exponential { mean: mu };
        let draws = 100_000;
        let mean = (0..draws).map(|_| d.sample(&mut r).unwrap()).sum::<f64>() / draws as f64;
        assert!((mean - mu).abs() <= 3.0 * mu / (draws as f64).sqrt());
    }

    #[test]
    fn uniform_ks_distance() {
        let mut r = rng(3);
        let d = Distribution::Uniform { lo: 0.0, hi: 1.0 };
        let draws = 100_000;
        let mut xs: Vec<f64> = (0..draws).map(|_| d.sample(&mut r).unwrap()).collect();
        xs.sort_by(f64::total_cmp);
        let ks = xs
            .iter()
            .enumerate()
            .map(|(k, x)| {
                ((k + 1) as f64 / draws as f64 - x)
                    .abs()
                    .max((x - k as f64 / draws as f64).abs())
            })
            .fold(0.0, f64::max);
        assert!(ks <= 0.01, "{ks}");
    }

    #[test]
    fn half_normal_and_table_means() {
        let mut r = rng(4);
        let d = Distribution::HalfNormal { scale: 2.0 };
        let draws = 100_000;
        let xs: Vec<f64> = (0..draws).map(|_| d.sample(&mut r).unwrap()).collect();
        assert!(xs.iter().all(|x| *x >= 0.0));
        let mean = xs.iter().sum::<f64>() / draws as f64;
        assert!((mean - d.mean()).abs() < 0.02);
        let t: Distribution = "table:1/0.25,3/0.75".parse().unwrap();
        assert_eq!(t.mean(), 2.5);
        let mean = (0..draws).map(|_| t.sample(&mut r).unwrap()).sum::<f64>() / draws as f64;
        assert!((mean - 2.5).abs() < 0.02);
    }

    #[test]
    fn parse_and_display_round_trip() {
        for s in [
            "exp:0.01",
            "uniform:0,1",
            "halfnormal:0.5",
            "point:0.1",
            "table:0/0.5,1/0.5",
        ] {
            let d: Distribution = s.parse().unwrap();
            assert_eq!(d.to_string().parse::<Distribution>().unwrap(), d);
        }
        assert_eq!(
            "exp:0.01".parse::<Distribution>().unwrap(),
            Distribution::Exponential { mean: 0.01 }
        );
        for bad in [
            "exp",
            "exp:-1",
            "uniform:1,0",
            "gauss:1",
            "uniform:0",
            "table:1/0.3",
        ] {
            assert!(bad.parse::<Distribution>().is_err(), "{bad}");
        }
    }

    #[test]
    fn mhr_families() {
        assert!(Distribution::Exponential { mean: 1.0 }.is_mhr());
        assert!(Distribution::HalfNormal { scale: 1.0 }.is_mhr());
        assert!(Distribution::Uniform { lo: 0.0, hi: 2.0 }.is_mhr());
        assert!(!Distribution::Uniform { lo: -1.0, hi: 2.0 }.is_mhr());
        assert!(!"table:0/0.5,1/0.5"
            .parse::<Distribution>()
            .unwrap()
            .is_mhr());
        let truth = ValuationMatrix::constant(2, 3, 0.5).unwrap();
        let model = NoiseModel::SignFlippedMhr("table:0/0.5,1/0.5".parse().unwrap());
        assert!(apply_noise(&truth, &model, &mut rng(1)).is_err());
    }

    #[test]
    fn zero_bounded_noise_is_identity() {
        let truth =
            ValuationMatrix::from_rows(&[vec![0.1, 0.9, 0.4], vec![0.3, 0.3, 0.8]]).unwrap();
        for scheme in [
            AdversarialScheme::WorstAgainstRr,
            AdversarialScheme::UniformInBox,
        ] {
            let inst = apply_noise(
                &truth,
                &NoiseModel::BoundedAdversarial { eps: 0.0, scheme },
                &mut rng(5),
            )
            .unwrap();
            assert_eq!(inst.estimates.values(), truth.values());
        }
    }

    #[test]
    fn worst_against_rr_moves_by_eps() {
        let truth = ValuationMatrix::from_rows(&[vec![0.1, 0.9, 0.4, 0.6]]).unwrap();
        let model = NoiseModel::BoundedAdversarial {
            eps: 0.1,
            scheme: AdversarialScheme::WorstAgainstRr,
        };
        let inst = apply_noise(&truth, &model, &mut rng(5)).unwrap();
        let expect = [0.2, 0.8, 0.5, 0.5];
        for (e, x) in inst.estimates.values().iter().zip(expect) {
            assert!((e - x).abs() < 1e-12);
        }
    }

    #[test]
    fn per_agent_shift_holds() {
        let mut r = rng(6);
        let vals: Vec<f64> = (0..2 * 30).map(|_| r.random()).collect();
        let truth = ValuationMatrix::new(2, 30, vals).unwrap();
        let model = NoiseModel::BoundedAdversarial {
            eps: 0.05,
            scheme: AdversarialScheme::PerAgentShift(vec![0.3, 0.0]),
        };
        let inst = apply_noise(&truth, &model, &mut r).unwrap();
        assert_eq!(inst.shifts, vec![0.3, 0.0]);
        assert!(inst.max_deviation() <= 0.05);
    }

    #[test]
    fn sign_flipped_point_mass() {
        let mut r = rng(7);
        let truth = ValuationMatrix::constant(100, 100, 0.5).unwrap();
        let inst = apply_noise(
            &truth,
            &NoiseModel::SignFlippedMhr(Distribution::PointMass(0.1)),
            &mut r,
        )
        .unwrap();
        let mut pos = 0;
        for (t, e) in truth.values().iter().zip(inst.estimates.values()) {
            assert!(((e - t).abs() - 0.1).abs() < 1e-12);
            if e > t {
                pos += 1;
            }
        }
        let f = pos as f64 / 10_000.0;
        assert!((f - 0.5).abs() <= 0.02);
    }

    #[test]
    fn sign_flipped_noise_is_unbiased() {
        let mut r = rng(8);
        let truth = ValuationMatrix::constant(50, 200, 0.5).unwrap();
        let model = NoiseModel::SignFlippedMhr(Distribution::Exponential { mean: 0.2 });
        let inst = apply_noise(&truth, &model, &mut r).unwrap();
        let eta: Vec<f64> = truth
            .values()
            .iter()
            .zip(inst.estimates.values())
            .map(|(t, e)| e - t)
            .collect();
        let k = eta.len() as f64;
        let mean = eta.iter().sum::<f64>() / k;
        let var = eta.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (k - 1.0);
        assert!(mean.abs() <= 3.0 * (var / k).sqrt());
    }

    #[test]
    fn harmonic_values() {
        assert_eq!(harmonic(1), 1.0);
        assert!((harmonic(4) - 25.0 / 12.0).abs() < 1e-15);
        assert!(harmonic(4) > (4f64).ln());
    }

    #[test]
    fn mhr_pipeline_examples() {
        let mut r = rng(9);
        let (n, m) = (4, 40);
        let vals: Vec<f64> = (0..n * m).map(|_| r.random()).collect();
        let truth = ValuationMatrix::new(n, m, vals).unwrap();
        let rep = mhr_pipeline(&truth, &Distribution::PointMass(0.0), &mut r).unwrap();
        assert_eq!(rep.eps_max, 0.0);
        assert!(rep.true_max_envy <= 1.0);
        let dist = Distribution::Exponential {
            mean: mhr_mean_threshold(n, m),
        };
        for _ in 0..50 {
            let rep = mhr_pipeline(&truth, &dist, &mut r).unwrap();
            assert!(!rep.mean_warning);
            assert!(rep.bound_value <= 10.0);
            if rep.noise_event() {
                assert!(rep.true_max_envy <= 10.0);
                assert!(rep.true_max_envy <= rep.bound_value);
            }
        }
        let loud = Distribution::Exponential { mean: 1.0 };
        assert!(mhr_pipeline(&truth, &loud, &mut r).unwrap().mean_warning);
        let tiny = ValuationMatrix::constant(1, 3, 0.5).unwrap();
        assert!(mhr_pipeline(&tiny, &loud, &mut r).is_err());
    }

    #[test]
    fn order_statistic_frequency() {
        let mut r = rng(10);
        let count = 160;
        let dist = Distribution::Exponential { mean: 0.5 };
        let batches = 500;
        let ok = (0..batches)
            .filter(|_| order_statistic_trial(&dist, count, &mut r).unwrap().holds())
            .count();
        let q = (count as f64).powf(-0.6);
        let floor = 1.0 - q - 3.0 * (q * (1.0 - q) / batches as f64).sqrt();
        assert!(ok as f64 / batches as f64 >= floor);
    }
}

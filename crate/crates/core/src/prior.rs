// SPDX-License-Identifier: MIT OR Apache-2.0

//! Prior distribution of the change point.
//!
//! The change point takes values in `{1, 2, ...}`; mass at zero is not
//! supported. Geometric priors keep their tail in closed form, tabulated
//! priors have finite support and are normalized on construction.

use std::io::Read;

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::numerics::KahanSum;

/// Tail mass below which a geometric prior is treated as exhausted for
/// bookkeeping (sampling cap, direct-sum checks). The detector itself never
/// truncates a geometric tail.
pub const GEOMETRIC_TAIL_CUTOFF: f64 = 1e-12;

/// Raw tabulated weights whose sum deviates from 1 by more than this are
/// normalized with a warning.
pub const NORMALIZATION_WARN_TOL: f64 = 1e-6;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum PriorKind {
    Geometric { rho: f64 },
    Tabulated { weights: Vec<f64> },
}

/// Discrete prior `π_k = P(λ = k)`, `k ≥ 1`.
#[derive(Debug, Clone, PartialEq)]
pub struct Prior {
    kind: PriorKind,
    support_cap: usize,
    // Tabulated only: tails[n - 1] = Π_n for n = 1..=len+1.
    tails: Vec<f64>,
}

impl Prior {
    pub fn geometric(rho: f64) -> Result<Self> {
        if !(rho > 0.0 && rho < 1.0) {
            return Err(Error::invalid("rho", format!("must lie in (0, 1), got {rho}")));
        }
        let cap = (GEOMETRIC_TAIL_CUTOFF.ln() / (1.0 - rho).ln()).ceil().max(1.0) as usize;
        Ok(Self {
            kind: PriorKind::Geometric { rho },
            support_cap: cap,
            tails: Vec::new(),
        })
    }

    /// Tabulated prior from raw weights, `weights[i]` being the weight of `π_{i+1}`.
    pub fn tabulated(weights: &[f64]) -> Result<Self> {
        if weights.is_empty() {
            return Err(Error::invalid("weights", "at least one weight is required"));
        }
        if let Some(bad) = weights.iter().position(|w| !(w.is_finite() && *w >= 0.0)) {
            return Err(Error::invalid(
                "weights",
                format!("weight for k = {} is not a nonnegative finite number", bad + 1),
            ));
        }
        let raw: f64 = weights.iter().copied().collect::<KahanSum>().value();
        if raw <= 0.0 {
            return Err(Error::invalid("weights", "total mass must be positive"));
        }
        if (raw - 1.0).abs() > NORMALIZATION_WARN_TOL {
            log::warn!("tabulated prior weights sum to {raw}; normalizing");
        }
        let mut normalized: Vec<f64> = weights.iter().map(|w| w / raw).collect();
        // Trailing zeros carry no mass; keep the support tight.
        while normalized.len() > 1 && *normalized.last().unwrap() == 0.0 {
            normalized.pop();
        }
        let len = normalized.len();
        let mut tails = vec![0.0; len + 1];
        let mut acc = KahanSum::default();
        for k in (0..len).rev() {
            acc.add(normalized[k]);
            tails[k] = acc.value();
        }
        Ok(Self {
            kind: PriorKind::Tabulated {
                weights: normalized,
            },
            support_cap: len,
            tails,
        })
    }

    /// Tabulated prior whose first weight is the mass at `λ = 0`. Positive mass
    /// at zero is rejected.
    pub fn tabulated_from_zero(weights: &[f64]) -> Result<Self> {
        match weights.split_first() {
            Some((&0.0, rest)) => Self::tabulated(rest),
            Some((&w0, _)) => Err(Error::invalid(
                "weights",
                format!("mass at k = 0 must be zero, got {w0}"),
            )),
            None => Err(Error::invalid("weights", "at least one weight is required")),
        }
    }

    /// Loads a tabulated prior from CSV. One column: row `i` (1-based) is the raw
    /// weight of `π_i`. Two columns: `k, weight` rows in any order. A
    /// non-numeric first row is treated as a header.
    pub fn from_csv<R: Read>(reader: R) -> Result<Self> {
        let mut rdr = csv::ReaderBuilder::new()
            .has_headers(false)
            .flexible(true)
            .trim(csv::Trim::All)
            .comment(Some(b'#'))
            .from_reader(reader);
        let mut single = Vec::new();
        let mut indexed: Vec<(usize, f64)> = Vec::new();
        for (row, record) in rdr.records().enumerate() {
            let record = record?;
            let fields: Vec<&str> = record.iter().filter(|f| !f.is_empty()).collect();
            if fields.is_empty() {
                continue;
            }
            let parse = |s: &str| s.parse::<f64>();
            match fields.as_slice() {
                [w] => match parse(w) {
                    Ok(w) => single.push(w),
                    Err(_) if row == 0 => continue,
                    Err(_) => return Err(Error::Config(format!("prior csv row {}: bad weight `{w}`", row + 1))),
                },
                [k, w] => match (k.parse::<usize>(), parse(w)) {
                    (Ok(k), Ok(w)) => indexed.push((k, w)),
                    _ if row == 0 => continue,
                    _ => return Err(Error::Config(format!("prior csv row {}: expected `k,weight`", row + 1))),
                },
                _ => return Err(Error::Config(format!("prior csv row {}: expected one or two columns", row + 1))),
            }
        }
        if !single.is_empty() && !indexed.is_empty() {
            return Err(Error::Config("prior csv mixes one- and two-column rows".into()));
        }
        if indexed.is_empty() {
            return Self::tabulated(&single);
        }
        let max_k = indexed.iter().map(|(k, _)| *k).max().unwrap_or(0);
        let mut dense = vec![0.0; max_k + 1];
        for (k, w) in indexed {
            dense[k] += w;
        }
        Self::tabulated_from_zero(&dense)
    }

    pub fn kind(&self) -> &PriorKind {
        &self.kind
    }

    /// For tabulated priors the last index with positive mass; for geometric
    /// priors the first `N` with `Π_{N+1} < 1e-12`.
    pub fn support_cap(&self) -> usize {
        self.support_cap
    }

    pub fn has_finite_support(&self) -> bool {
        matches!(self.kind, PriorKind::Tabulated { .. })
    }

    /// `π_k`.
    pub fn pi(&self, k: usize) -> Result<f64> {
        if k == 0 {
            return Err(Error::OutOfRange {
                index: 0,
                reason: "the change point is supported on k >= 1".into(),
            });
        }
        Ok(self.pi_unchecked(k))
    }

    pub(crate) fn pi_unchecked(&self, k: usize) -> f64 {
        match &self.kind {
            PriorKind::Geometric { rho } => rho * (1.0 - rho).powi((k - 1) as i32),
            PriorKind::Tabulated { weights } => weights.get(k - 1).copied().unwrap_or(0.0),
        }
    }

    /// `log π_k`, `-inf` outside the support. Computed analytically for
    /// geometric priors so that it stays finite where `π_k` underflows.
    pub fn log_pi(&self, k: usize) -> f64 {
        if k == 0 {
            return f64::NEG_INFINITY;
        }
        match &self.kind {
            PriorKind::Geometric { rho } => rho.ln() + (k - 1) as f64 * (-rho).ln_1p(),
            PriorKind::Tabulated { weights } => weights.get(k - 1).map_or(f64::NEG_INFINITY, |w| w.ln()),
        }
    }

    /// `Π_n = P(λ ≥ n)`; `Π_0 = Π_1 = 1`.
    pub fn tail(&self, n: usize) -> f64 {
        if n <= 1 {
            return 1.0;
        }
        match &self.kind {
            PriorKind::Geometric { rho } => (1.0 - rho).powi((n - 1) as i32),
            PriorKind::Tabulated { .. } => self.tails.get(n - 1).copied().unwrap_or(0.0),
        }
    }

    /// `log Π_n`.
    pub fn log_tail(&self, n: usize) -> f64 {
        if n <= 1 {
            return 0.0;
        }
        match &self.kind {
            PriorKind::Geometric { rho } => (n - 1) as f64 * (-rho).ln_1p(),
            PriorKind::Tabulated { .. } => self.tail(n).ln(),
        }
    }

    /// `C_π = Σ_k π_k |log π_k|`.
    pub fn entropy_constant(&self) -> f64 {
        match &self.kind {
            PriorKind::Geometric { rho } => ((1.0 - rho) / rho).ln() - (1.0 - rho).ln() / rho,
            PriorKind::Tabulated { weights } => weights
                .iter()
                .filter(|&&w| w > 0.0)
                .map(|&w| -w * w.ln())
                .collect::<KahanSum>()
                .value(),
        }
    }

    /// Draws `λ ~ π`.
    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> usize {
        match &self.kind {
            PriorKind::Geometric { rho } => {
                // 1 - U lies in (0, 1].
                let u: f64 = 1.0 - rng.random::<f64>();
                1 + (u.ln() / (-rho).ln_1p()).floor() as usize
            }
            PriorKind::Tabulated { weights } => {
                let u: f64 = rng.random();
                let mut acc = 0.0;
                for (i, w) in weights.iter().enumerate() {
                    acc += w;
                    if u < acc {
                        return i + 1;
                    }
                }
                // Rounding left u above the accumulated mass.
                weights.iter().rposition(|&w| w > 0.0).unwrap_or(0) + 1
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn direct_entropy(prior: &Prior) -> f64 {
        let mut acc = KahanSum::default();
        let mut k = 1;
        loop {
            let p = prior.pi(k).unwrap();
            if p > 0.0 {
                acc.add(-p * p.ln());
            }
            if prior.tail(k + 1) < 1e-15 || k > 100_000 {
                break;
            }
            k += 1;
        }
        acc.value()
    }

    #[test]
    fn geometric_mass_and_tail() {
        let p = Prior::geometric(0.5).unwrap();
        assert_eq!(p.pi(1).unwrap(), 0.5);
        assert_eq!(p.pi(3).unwrap(), 0.125);
        assert_eq!(p.tail(1), 1.0);
        assert_eq!(p.tail(4), 0.125);
        assert!((p.log_pi(3) - 0.125f64.ln()).abs() < 1e-15);
        assert!((p.log_tail(4) - 0.125f64.ln()).abs() < 1e-15);
    }

    #[test]
    fn tabulated_mass_and_tail() {
        let p = Prior::tabulated(&[0.2, 0.3, 0.5]).unwrap();
        assert_eq!(p.pi(2).unwrap(), 0.3);
        assert_eq!(p.tail(3), 0.5);
        assert_eq!(p.tail(4), 0.0);
        assert_eq!(p.pi(7).unwrap(), 0.0);
        assert_eq!(p.log_tail(4), f64::NEG_INFINITY);
        assert_eq!(p.support_cap(), 3);
    }

    #[test]
    fn zero_index_rejected() {
        let p = Prior::geometric(0.3).unwrap();
        assert!(matches!(p.pi(0), Err(Error::OutOfRange { index: 0, .. })));
        assert!(Prior::tabulated_from_zero(&[0.1, 0.9]).is_err());
        let ok = Prior::tabulated_from_zero(&[0.0, 0.4, 0.6]).unwrap();
        assert_eq!(ok.pi(1).unwrap(), 0.4);
    }

    #[test]
    fn invalid_parameters_rejected() {
        assert!(Prior::geometric(0.0).is_err());
        assert!(Prior::geometric(1.0).is_err());
        assert!(Prior::geometric(f64::NAN).is_err());
        assert!(Prior::tabulated(&[]).is_err());
        assert!(Prior::tabulated(&[0.5, -0.1]).is_err());
        assert!(Prior::tabulated(&[0.0, 0.0]).is_err());
    }

    #[test]
    fn tabulated_is_normalized() {
        let p = Prior::tabulated(&[2.0, 3.0, 5.0]).unwrap();
        let total: f64 = (1..=3).map(|k| p.pi(k).unwrap()).sum();
        assert!((total - 1.0).abs() < 1e-12);
        assert!((p.pi(3).unwrap() - 0.5).abs() < 1e-15);
        assert!((p.tail(1) - 1.0).abs() < 1e-15);
    }

    #[test]
    fn entropy_constant_closed_form_vs_direct_sum() {
        let half = Prior::geometric(0.5).unwrap();
        assert!((half.entropy_constant() - 1.3862943611198906).abs() < 1e-12);
        let tenth = Prior::geometric(0.1).unwrap();
        let expected = 9f64.ln() - 0.9f64.ln() / 0.1;
        assert!((tenth.entropy_constant() - expected).abs() < 1e-12);
        assert!((tenth.entropy_constant() - 3.250830).abs() < 1e-6);
        for rho in [0.5, 0.1, 0.02, 0.9] {
            let p = Prior::geometric(rho).unwrap();
            assert!((p.entropy_constant() - direct_entropy(&p)).abs() < 1e-9, "rho = {rho}");
        }
        assert_eq!(Prior::tabulated(&[1.0]).unwrap().entropy_constant(), 0.0);
    }

    #[test]
    fn csv_loading() {
        let p = Prior::from_csv("weight\n2\n3\n5\n".as_bytes()).unwrap();
        assert!((p.pi(2).unwrap() - 0.3).abs() < 1e-15);
        let q = Prior::from_csv("k,w\n2,1\n1,1\n".as_bytes()).unwrap();
        assert_eq!(q.pi(1).unwrap(), 0.5);
        let bad = Prior::from_csv("0,0.2\n1,0.8\n".as_bytes());
        assert!(bad.is_err());
    }

    #[test]
    fn sampling_matches_mass() {
        let p = Prior::geometric(0.3).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        let n = 200_000;
        let mut counts = [0usize; 4];
        for _ in 0..n {
            let k = p.sample(&mut rng);
            assert!(k >= 1);
            if k <= 3 {
                counts[k] += 1;
            }
        }
        for (k, &count) in counts.iter().enumerate().skip(1) {
            let freq = count as f64 / n as f64;
            let pk = p.pi(k).unwrap();
            let se = (pk * (1.0 - pk) / n as f64).sqrt();
            assert!((freq - pk).abs() < 4.0 * se, "k = {k}: {freq} vs {pk}");
        }
        let t = Prior::tabulated(&[0.0, 1.0]).unwrap();
        assert!((0..100).all(|_| t.sample(&mut rng) == 2));
    }

    mod props {
        use super::*;
        use proptest::prelude::*;

        proptest! {
            #[test]
            fn tail_differences_equal_mass(rho in 0.01f64..0.99, n in 1usize..200) {
                let p = Prior::geometric(rho).unwrap();
                let diff = p.tail(n) - p.tail(n + 1);
                prop_assert!((diff - p.pi(n).unwrap()).abs() < 1e-15);
                prop_assert!(p.tail(n + 1) <= p.tail(n));
            }

            #[test]
            fn tabulated_tail_consistency(weights in proptest::collection::vec(0.0f64..10.0, 1..40)) {
                prop_assume!(weights.iter().sum::<f64>() > 1e-6);
                let p = Prior::tabulated(&weights).unwrap();
                let total: f64 = (1..=p.support_cap()).map(|k| p.pi(k).unwrap()).sum();
                prop_assert!((total - 1.0).abs() < 1e-12);
                for n in 1..=p.support_cap() {
                    prop_assert!((p.tail(n) - p.tail(n + 1) - p.pi(n).unwrap()).abs() < 1e-15);
                    prop_assert!(p.tail(n + 1) <= p.tail(n));
                }
            }
        }
    }
}

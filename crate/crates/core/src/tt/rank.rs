use std::fmt;

use crate::error::{Error, Result};

/// TT-ranks `{R_0, ..., R_K}` with `R_0 = R_K = 1`.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct RankProfile(Vec<usize>);

impl RankProfile {
    pub fn new(ranks: Vec<usize>) -> Result<Self> {
        if ranks.len() < 2 {
            return Err(Error::InvalidRanks(format!(
                "a rank profile needs at least 2 entries, got {ranks:?}"
            )));
        }
        if ranks[0] != 1 || ranks[ranks.len() - 1] != 1 {
            return Err(Error::InvalidRanks(format!("boundary ranks must be 1, got {ranks:?}")));
        }
        if ranks.contains(&0) {
            return Err(Error::InvalidRanks(format!("ranks must be positive, got {ranks:?}")));
        }
        Ok(Self(ranks))
    }

    /// Profile of order `order` with every interior rank equal to `r`.
    pub fn uniform(order: usize, r: usize) -> Result<Self> {
        let mut ranks = vec![r; order + 1];
        ranks[0] = 1;
        ranks[order] = 1;
        Self::new(ranks)
    }

    pub fn ranks(&self) -> &[usize] {
        &self.0
    }

    /// Number of cores `K`.
    pub fn order(&self) -> usize {
        self.0.len() - 1
    }

    pub fn max_rank(&self) -> usize {
        self.0.iter().copied().max().unwrap_or(1)
    }

    /// Elementwise `self ≤ other`.
    pub fn le(&self, other: &RankProfile) -> bool {
        self.0.len() == other.0.len() && self.0.iter().zip(&other.0).all(|(a, b)| a <= b)
    }
}

impl fmt::Display for RankProfile {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let parts: Vec<String> = self.0.iter().map(|r| r.to_string()).collect();
        write!(f, "{}", parts.join(","))
    }
}

/// Upper bound on TT-ranks for decomposition and rounding.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum RankCap {
    /// Same cap on every interior rank.
    Max(usize),
    /// Per-position caps; length must be `K + 1`.
    Profile(RankProfile),
}

impl RankCap {
    /// Cap on rank `k` (between cores `k` and `k + 1`, 0-based) for an order-`order` train.
    pub(crate) fn cap_at(&self, k: usize, order: usize) -> Result<usize> {
        match self {
            RankCap::Max(0) => Err(Error::InvalidRanks("max rank must be at least 1".into())),
            RankCap::Max(r) => Ok(*r),
            RankCap::Profile(p) if p.order() != order => Err(Error::InvalidRanks(format!(
                "rank profile {p} has {} entries, expected {}",
                p.ranks().len(),
                order + 1
            ))),
            RankCap::Profile(p) => Ok(p.ranks()[k]),
        }
    }

    pub(crate) fn validate(&self, order: usize) -> Result<()> {
        self.cap_at(0, order).map(|_| ())
    }
}

impl From<RankProfile> for RankCap {
    fn from(p: RankProfile) -> Self {
        RankCap::Profile(p)
    }
}

/// Factorization of a flat dimension into `K` mode sizes, e.g. `2048 = 8·4·8·8`.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct ModeFactorization(Vec<usize>);

impl ModeFactorization {
    pub fn new(factors: Vec<usize>) -> Result<Self> {
        if factors.is_empty() || factors.contains(&0) {
            return Err(Error::InvalidShape(format!(
                "factorization must be non-empty with positive factors, got {factors:?}"
            )));
        }
        factors
            .iter()
            .try_fold(1usize, |acc, &f| acc.checked_mul(f))
            .ok_or_else(|| Error::InvalidShape(format!("factorization {factors:?} overflows")))?;
        Ok(Self(factors))
    }

    /// Checks that the factors multiply to `dim`.
    pub fn for_dim(factors: Vec<usize>, dim: usize) -> Result<Self> {
        let f = Self::new(factors)?;
        if f.product() != dim {
            return Err(Error::ShapeMismatch(format!(
                "factors {:?} multiply to {}, not {dim}",
                f.0,
                f.product()
            )));
        }
        Ok(f)
    }

    pub fn factors(&self) -> &[usize] {
        &self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn product(&self) -> usize {
        self.0.iter().product()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn profile_validation() {
        assert!(RankProfile::new(vec![1, 2, 2, 1]).is_ok());
        assert!(RankProfile::new(vec![2, 2, 1]).is_err());
        assert!(RankProfile::new(vec![1, 0, 1]).is_err());
        assert!(RankProfile::new(vec![1]).is_err());
        assert_eq!(RankProfile::uniform(4, 12).unwrap().ranks(), &[1, 12, 12, 12, 1]);
        assert_eq!(RankProfile::new(vec![1, 3, 4, 3, 1]).unwrap().to_string(), "1,3,4,3,1");
    }

    #[test]
    fn cap_lookup() {
        let p = RankProfile::new(vec![1, 3, 4, 3, 1]).unwrap();
        assert_eq!(RankCap::Profile(p.clone()).cap_at(2, 4).unwrap(), 4);
        assert!(RankCap::Profile(p).cap_at(2, 3).is_err());
        assert!(RankCap::Max(0).validate(3).is_err());
    }

    #[test]
    fn factorization_product() {
        let f = ModeFactorization::for_dim(vec![8, 4, 8, 8], 2048).unwrap();
        assert_eq!(f.len(), 4);
        assert!(ModeFactorization::for_dim(vec![8, 4, 8], 2048).is_err());
        assert!(ModeFactorization::new(vec![]).is_err());
    }
}

use serde::{Deserialize, Serialize};

use crate::error::{input_err, Result};

/// How online query policies are derived from the logging policy.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum QueryRule {
    /// Query only where the logged data under-covers the instance.
    Debias,
    /// `Q_k = 1` everywhere.
    QueryAll,
}

/// Logged sample size, epoch schedule and the rule that derives the
/// per-epoch query policies `Q_1..Q_K`.
///
/// Every derived policy is a function of the logging propensity alone, so
/// policies are evaluated on a propensity value rather than an instance id.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PolicyStack {
    m: usize,
    taus: Vec<usize>,
    rule: QueryRule,
}

impl PolicyStack {
    pub fn new(m: usize, taus: Vec<usize>, rule: QueryRule) -> Result<Self> {
        if taus.contains(&0) {
            return input_err("epoch sizes must be positive");
        }
        if taus.windows(2).any(|w| w[0] > w[1]) {
            return input_err(format!("epoch schedule must be nondecreasing, got {taus:?}"));
        }
        if m == 0 && taus.is_empty() {
            return input_err("no data: m = 0 and empty schedule");
        }
        Ok(Self { m, taus, rule })
    }

    pub fn m(&self) -> usize {
        self.m
    }

    pub fn rule(&self) -> QueryRule {
        self.rule
    }

    pub fn schedule(&self) -> &[usize] {
        &self.taus
    }

    /// Number of online epochs `K`.
    pub fn epochs(&self) -> usize {
        self.taus.len()
    }

    /// `tau_k` for `k >= 1`; `tau_0 = m`.
    pub fn tau(&self, k: usize) -> usize {
        if k == 0 {
            self.m
        } else {
            self.taus[k - 1]
        }
    }

    /// `n_k = tau_1 + ... + tau_k`.
    pub fn n(&self, k: usize) -> usize {
        self.taus[..k].iter().sum()
    }

    /// `m + n_k`.
    pub fn count(&self, k: usize) -> usize {
        self.m + self.n(k)
    }

    /// Online size ratio `alpha = m / n`.
    pub fn alpha(&self) -> f64 {
        self.m as f64 / self.n(self.epochs()) as f64
    }

    fn check_epoch(&self, k: usize) -> Result<()> {
        if k > self.epochs() {
            return input_err(format!("epoch {k} beyond schedule of {} epochs", self.epochs()));
        }
        Ok(())
    }

    /// `Q_1(q), ..., Q_k(q)` derived recursively.
    pub fn policies_upto(&self, q0: f64, k: usize) -> Result<Vec<bool>> {
        self.check_epoch(k)?;
        let m = self.m as f64;
        let mut out = Vec::with_capacity(k);
        let mut covered = m * q0;
        for j in 1..=k {
            let q = match self.rule {
                QueryRule::QueryAll => true,
                QueryRule::Debias => covered < 0.5 * m * q0 + self.n(j) as f64,
            };
            if q {
                covered += self.taus[j - 1] as f64;
            }
            out.push(q);
        }
        Ok(out)
    }

    /// `Q_k(q)` for `k >= 1`.
    pub fn query(&self, q0: f64, k: usize) -> Result<bool> {
        if k == 0 {
            return input_err("Q_0 is the logging policy, not a derived query policy");
        }
        Ok(*self.policies_upto(q0, k)?.last().expect("k >= 1"))
    }

    /// `m Q0(x) + sum_{i<=k} tau_i Q_i(x)`.
    pub fn mixture_mass(&self, q0: f64, k: usize) -> Result<f64> {
        let mut total = self.m as f64 * q0;
        for (j, q) in self.policies_upto(q0, k)?.into_iter().enumerate() {
            if q {
                total += self.taus[j] as f64;
            }
        }
        Ok(total)
    }

    /// Largest MIS weight at epoch `k` when every online policy queries
    /// the minimum-propensity instance: `(m + n_k) / (m q0 + n_k)`.
    pub fn weight_cap(&self, q0_min: f64, k: usize) -> f64 {
        self.count(k) as f64 / (self.m as f64 * q0_min + self.n(k) as f64)
    }
}

/// `w_k(x) = (m + n_k) / (m Q0(x) + sum_{i<=k} tau_i Q_i(x))`.
pub fn mis_weight(q0: f64, k: usize, stack: &PolicyStack) -> Result<f64> {
    let denom = stack.mixture_mass(q0, k)?;
    if denom <= 0.0 {
        return input_err("mixture policy has zero mass at this instance");
    }
    Ok(stack.count(k) as f64 / denom)
}

/// Recursive debias policy `Q_{k}(x)`, `k >= 1`, evaluated through all the
/// previously derived policies.
pub fn debias_policy(q0: f64, k: usize, stack: &PolicyStack) -> Result<bool> {
    if stack.rule != QueryRule::Debias {
        return input_err("stack does not use the debias rule");
    }
    stack.query(q0, k)
}

/// Closed form of the debias policy: `Q_k(x) = 1{2 n_k - m Q0(x) > 0}`.
pub fn debias_closed_form(q0: f64, k: usize, stack: &PolicyStack) -> Result<bool> {
    if k == 0 || k > stack.epochs() {
        return input_err(format!("epoch {k} outside 1..={}", stack.epochs()));
    }
    Ok(2.0 * stack.n(k) as f64 - stack.m as f64 * q0 > 0.0)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn schedule_validation() {
        assert!(PolicyStack::new(10, vec![2, 1], QueryRule::Debias).is_err());
        assert!(PolicyStack::new(10, vec![0, 1], QueryRule::Debias).is_err());
        let s = PolicyStack::new(10, vec![1, 2, 4], QueryRule::Debias).unwrap();
        assert_eq!((s.n(0), s.n(2), s.count(3)), (0, 3, 17));
        assert_eq!(s.tau(0), 10);
    }

    #[test]
    fn mis_weight_examples() {
        let s = PolicyStack::new(4, vec![2], QueryRule::Debias).unwrap();
        assert_eq!(mis_weight(0.25, 0, &s).unwrap(), 4.0);
        assert_eq!(mis_weight(0.5, 1, &s).unwrap(), 1.5);
        let all = PolicyStack::new(4, vec![2, 2], QueryRule::QueryAll).unwrap();
        assert_eq!(mis_weight(0.5, 2, &all).unwrap(), 8.0 / (2.0 + 4.0));
    }

    #[test]
    fn debias_examples() {
        let s = PolicyStack::new(10, vec![2], QueryRule::Debias).unwrap();
        assert!(debias_policy(0.3, 1, &s).unwrap());
        assert!(debias_closed_form(0.3, 1, &s).unwrap());
        let s = PolicyStack::new(10, vec![1], QueryRule::Debias).unwrap();
        assert!(!debias_policy(0.3, 1, &s).unwrap());
        assert!(!debias_closed_form(0.3, 1, &s).unwrap());
        // vanishing propensity is always queried
        let s = PolicyStack::new(1_000_000, vec![1, 1, 2], QueryRule::Debias).unwrap();
        for k in 1..=3 {
            assert!(debias_policy(1e-9, k, &s).unwrap());
        }
        assert!(debias_policy(0.3, 0, &s).is_err());
    }
}

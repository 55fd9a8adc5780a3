//! Fisher's exact test on a 2×2 contingency table, computed via
//! log-factorial accumulation of hypergeometric point probabilities.

use serde::{Deserialize, Serialize};

/// Alternative hypothesis direction.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Sidedness {
    /// Trigger group emits the target more often (directional tail).
    Greater,
    /// Any association: sum of tables no more probable than the observed one.
    TwoSided,
}

impl Sidedness {
    pub fn name(self) -> &'static str {
        match self {
            Sidedness::Greater => "greater",
            Sidedness::TwoSided => "two_sided",
        }
    }
}

/// ln(k!) for k = 0..=n via cumulative ln sums.
fn ln_factorials(n: u64) -> Vec<f64> {
    let mut table = Vec::with_capacity(n as usize + 1);
    table.push(0.0);
    let mut acc = 0.0;
    for k in 1..=n {
        acc += (k as f64).ln();
        table.push(acc);
    }
    table
}

/// p-value of the observed table
///
/// ```text
///        success  failure
/// row1      a        b
/// row2      c        d
/// ```
///
/// under the hypergeometric null with fixed margins. Degenerate margins
/// (an all-zero row or column) admit a single table and yield p = 1.
pub fn fisher_exact(a: u64, b: u64, c: u64, d: u64, sidedness: Sidedness) -> f64 {
    let row1 = a + b;
    let row2 = c + d;
    let col1 = a + c;
    let n = row1 + row2;
    if n == 0 || row1 == 0 || row2 == 0 || col1 == 0 || col1 == n {
        return 1.0;
    }
    let lf = ln_factorials(n);
    let ln_denominator = lf[n as usize] - lf[col1 as usize] - lf[(n - col1) as usize];
    let ln_point = |k: u64| -> f64 {
        // ln C(row1, k) + ln C(row2, col1-k) − ln C(n, col1)
        let k2 = col1 - k;
        lf[row1 as usize] - lf[k as usize] - lf[(row1 - k) as usize] + lf[row2 as usize]
            - lf[k2 as usize]
            - lf[(row2 - k2) as usize]
            - ln_denominator
    };
    let k_min = col1.saturating_sub(row2);
    let k_max = row1.min(col1);

    let p = match sidedness {
        Sidedness::Greater => (a..=k_max).map(|k| ln_point(k).exp()).sum::<f64>(),
        Sidedness::TwoSided => {
            // Point probabilities are ratios of integers with a common
            // denominator, so distinct values differ by far more than the
            // ln-space tolerance below; equal values compare equal within it.
            let observed = ln_point(a);
            (k_min..=k_max)
                .map(ln_point)
                .filter(|lp| *lp <= observed + 1e-10)
                .map(f64::exp)
                .sum::<f64>()
        }
    };
    p.min(1.0)
}

#[cfg(test)]
pub(crate) mod oracle {
    //! Exact-rational enumeration oracle, independent of the log-space path.
    //! All quantities fit in u128 for tables with total ≤ 30.

    use super::Sidedness;

    fn binomial(n: u64, k: u64) -> u128 {
        if k > n {
            return 0;
        }
        let k = k.min(n - k);
        let mut result: u128 = 1;
        for i in 0..k {
            result = result * (n - i) as u128 / (i + 1) as u128;
        }
        result
    }

    /// Exact p-value as numerator/denominator accumulated with integer
    /// arithmetic, converted to f64 only at the end.
    pub fn fisher_exact_rational(a: u64, b: u64, c: u64, d: u64, sidedness: Sidedness) -> f64 {
        let row1 = a + b;
        let row2 = c + d;
        let col1 = a + c;
        let n = row1 + row2;
        if n == 0 || row1 == 0 || row2 == 0 || col1 == 0 || col1 == n {
            return 1.0;
        }
        let denominator = binomial(n, col1);
        let k_min = col1.saturating_sub(row2);
        let k_max = row1.min(col1);
        let weight = |k: u64| binomial(row1, k) * binomial(row2, col1 - k);
        let numerator: u128 = match sidedness {
            Sidedness::Greater => (a..=k_max).map(weight).sum(),
            Sidedness::TwoSided => {
                let observed = weight(a);
                (k_min..=k_max).map(weight).filter(|w| *w <= observed).sum()
            }
        };
        numerator as f64 / denominator as f64
    }

    /// Exact hypergeometric point probability P(X = a) under the margins.
    pub fn point_probability(a: u64, b: u64, c: u64, d: u64) -> f64 {
        let row1 = a + b;
        let row2 = c + d;
        let col1 = a + c;
        let n = row1 + row2;
        if n == 0 {
            return 1.0;
        }
        let numerator = binomial(row1, a) * binomial(row2, col1 - a);
        numerator as f64 / binomial(n, col1) as f64
    }
}

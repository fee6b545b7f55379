//! Exact counting of partitions avoiding runs of consecutive part values.
//!
//! `p_k(n)` counts partitions of `n` in which no `k` distinct
//! consecutive values all appear as parts (multiplicities don't matter,
//! so `(2,1,1)` is excluded for `k = 2` because both 1 and 2 appear).
//! The table is built by a descending-value dynamic program whose state
//! is the presence pattern of the `k-1` values above the current one,
//! with an unbounded-knapsack pass per value, for `O(N^2 2^(k-1))`
//! big-integer additions in total.
//!
//! These counts tie into the other modules. The generating function
//! identity `sum p_k(n) x^n = P(A_k) / prod (1 - x^i)` connects them to
//! the run-survival probability with failure rates `x^n`, and the
//! log-counts grow like `pi sqrt((2/3)(1 - 2/(k(k+1))) n)`, the
//! Hardy-Ramanujan exponent damped by the same `1/(k(k+1))` factor the
//! integral and gap modules produce. The classical MacMahon identity
//! (partitions with no 1s and no two consecutive values are as many as
//! partitions into parts divisible by 2 or 3) supplies an exactly
//! checkable special case, along with its probabilistic factorization
//! into the sparse product `prod (1-x^(6j+1))(1-x^(6j+5))`.

use alloc::vec;
use alloc::vec::Vec;

use num_bigint::BigUint;
use num_traits::{One, Zero};

use crate::error::CoreError;
use crate::gap::{survival_log, survival_log_forced_start};
use crate::math;

/// What a table of counts enumerates.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum TableKind {
    /// Partitions with no `k` consecutive part values all present.
    RunRestricted { k: u32 },
    /// All partitions.
    Unrestricted,
    /// Partitions with no part 1 and no two consecutive part values.
    NoOnesNoConsecutive,
    /// Partitions into parts divisible by 2 or by 3.
    PartsDivisibleByTwoOrThree,
}

/// Exact counts indexed by the partitioned number, `counts[0] = 1`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PartitionTable {
    pub kind: TableKind,
    pub counts: Vec<BigUint>,
}

impl PartitionTable {
    /// Largest `n` the table covers.
    pub fn n_max(&self) -> usize {
        self.counts.len() - 1
    }
}

/// Widest supported presence mask; beyond this the state table would be
/// unreasonably large.
const MAX_RUN_LENGTH: u32 = 12;

/// Exact counts `p_k(0..=n_max)` of partitions with no `k` consecutive
/// part values all present.
pub fn count_pk(k: u32, n_max: usize) -> Result<PartitionTable, CoreError> {
    if !(2..=MAX_RUN_LENGTH).contains(&k) {
        return Err(CoreError::BadParameter {
            what: "run restriction k must be between 2 and 12",
        });
    }
    Ok(PartitionTable {
        kind: TableKind::RunRestricted { k },
        counts: run_restricted_counts(k, n_max, false),
    })
}

/// Exact unrestricted counts `p(0..=n_max)` by the Euler knapsack.
pub fn count_unrestricted(n_max: usize) -> PartitionTable {
    let mut counts = vec![BigUint::zero(); n_max + 1];
    counts[0] = BigUint::one();
    for v in 1..=n_max {
        for b in v..=n_max {
            let add = counts[b - v].clone();
            counts[b] += add;
        }
    }
    PartitionTable {
        kind: TableKind::Unrestricted,
        counts,
    }
}

/// Both sides of the MacMahon identity up to `n_max`: partitions with no
/// 1s and no two consecutive part values, and partitions into parts
/// divisible by 2 or 3. The tables agree entrywise.
pub fn count_macmahon(n_max: usize) -> (PartitionTable, PartitionTable) {
    let lhs = PartitionTable {
        kind: TableKind::NoOnesNoConsecutive,
        counts: run_restricted_counts(2, n_max, true),
    };
    let mut counts = vec![BigUint::zero(); n_max + 1];
    counts[0] = BigUint::one();
    for v in 2..=n_max {
        if v % 2 != 0 && v % 3 != 0 {
            continue;
        }
        for b in v..=n_max {
            let add = counts[b - v].clone();
            counts[b] += add;
        }
    }
    let rhs = PartitionTable {
        kind: TableKind::PartsDivisibleByTwoOrThree,
        counts,
    };
    (lhs, rhs)
}

/// Core dynamic program shared by [`count_pk`] and the MacMahon side.
///
/// Values are processed from `n_max` down to 1. A state is the presence
/// pattern of the `k-1` values directly above the one being decided
/// (bit 0 is the nearest), paired with the sum already spent. Taking the
/// current value with any positive multiplicity is forbidden exactly
/// when all `k-1` bits are set, which is what rules out `k` consecutive
/// present values. Multiplicities are summed by one cumulative
/// unbounded-knapsack sweep per state.
fn run_restricted_counts(k: u32, n_max: usize, forbid_ones: bool) -> Vec<BigUint> {
    let masks = 1usize << (k - 1);
    let full = masks - 1;
    let mut table = vec![vec![BigUint::zero(); n_max + 1]; masks];
    table[0][0] = BigUint::one();
    let mut next = vec![vec![BigUint::zero(); n_max + 1]; masks];
    let mut cum = vec![BigUint::zero(); n_max + 1];

    for v in (1..=n_max).rev() {
        for row in next.iter_mut() {
            for c in row.iter_mut() {
                c.set_zero();
            }
        }
        for (mask, row) in table.iter().enumerate() {
            let shifted = (mask << 1) & full;
            // Skip this value entirely.
            for (b, c) in row.iter().enumerate() {
                next[shifted][b] += c;
            }
            // Include it with some multiplicity, unless that completes a
            // run of k consecutive present values (or it is a forbidden 1).
            if mask == full || (forbid_ones && v == 1) {
                continue;
            }
            for c in cum.iter_mut() {
                c.set_zero();
            }
            for b in v..=n_max {
                cum[b] = &cum[b - v] + &row[b - v];
            }
            let dest = &mut next[shifted | 1];
            for b in v..=n_max {
                dest[b] += &cum[b];
            }
        }
        core::mem::swap(&mut table, &mut next);
    }

    let mut counts = vec![BigUint::zero(); n_max + 1];
    for row in &table {
        for (b, c) in row.iter().enumerate() {
            counts[b] += c;
        }
    }
    counts
}

/// Natural log of an exact count, safe far beyond `f64` range.
pub fn ln_count(v: &BigUint) -> f64 {
    let bits = v.bits();
    if bits == 0 {
        return f64::NEG_INFINITY;
    }
    if bits <= 53 {
        let mut x = 0.0f64;
        for (i, d) in v.to_u64_digits().iter().enumerate() {
            x += (*d as f64) * math::pow(2.0, 64.0 * i as f64);
        }
        return math::ln(x);
    }
    let top = v >> (bits - 53);
    let digits = top.to_u64_digits();
    math::ln(digits[0] as f64) + (bits - 53) as f64 * core::f64::consts::LN_2
}

/// Checks the two-sided relation between the `k = 2` restricted counts
/// and the MacMahon counts `r(n)` for all `2 <= n <= n_max`:
/// `max(r(n-1), r(n)) <= p_2(n) <= sum_{l <= n} r(l)`, together with the
/// stride-two monotonicity `r(n) <= r(n+2)`.
pub fn sandwich_r_check(n_max: usize) -> Result<bool, CoreError> {
    if n_max < 2 {
        return Err(CoreError::BadParameter {
            what: "the sandwich check needs n_max >= 2",
        });
    }
    let p2 = count_pk(2, n_max)?;
    let (r, _) = count_macmahon(n_max);
    let mut prefix = r.counts[0].clone() + &r.counts[1];
    for n in 2..=n_max {
        prefix += &r.counts[n];
        let low = (&r.counts[n - 1]).max(&r.counts[n]);
        if !(low <= &p2.counts[n] && p2.counts[n] <= prefix) {
            return Ok(false);
        }
    }
    for n in 0..=n_max - 2 {
        if r.counts[n] > r.counts[n + 2] {
            return Ok(false);
        }
    }
    Ok(true)
}

/// A residual together with the bound it is certified against.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ResidualCheck {
    /// Absolute difference between the two independent computations.
    pub residual: f64,
    /// Sum of the certified truncation and tolerance contributions; the
    /// residual is expected to stay below it.
    pub certified_bound: f64,
}

/// Hardy-Ramanujan style bound `p(n) < exp(pi sqrt(2n/3))`, used to
/// certify generating-function truncation tails.
fn tail_after(n_max: usize, x: f64) -> f64 {
    let c = math::PI * math::sqrt(2.0 / 3.0);
    let ln_x = math::ln(x);
    let mut tail = 0.0f64;
    let mut n = n_max + 1;
    // Terms exp(c sqrt(n) + n log x) decrease once sqrt(n) > c/(2 log(1/x));
    // sum explicitly for a while, then close with a geometric bound.
    loop {
        let t = math::exp(c * math::sqrt(n as f64) + n as f64 * ln_x);
        tail += t;
        n += 1;
        if n > n_max + 10_000 {
            let ratio = math::exp(c / (2.0 * math::sqrt(n as f64)) + ln_x);
            tail += t * ratio / (1.0 - ratio);
            break;
        }
    }
    tail
}

/// Compares the truncated generating function `sum_{n<=n_max} p_k(n) x^n`
/// against `P(A_k) prod_{i}(1 - x^i)^{-1}`, the same quantity computed
/// through the run-survival dynamic program with failure probabilities
/// `x^n`. Both truncations carry certified tails.
pub fn gk_consistency(k: u32, x: f64, n_max: usize) -> Result<ResidualCheck, CoreError> {
    if !(x > 0.0 && x <= 0.6) {
        return Err(CoreError::OutOfDomain {
            what: "generating-function comparison needs x in (0, 0.6]",
            value: x,
        });
    }
    let table = count_pk(k, n_max)?;
    let ln_x = math::ln(x);
    let mut lhs = 0.0f64;
    for (n, c) in table.counts.iter().enumerate() {
        lhs += math::exp(ln_count(c) + n as f64 * ln_x);
    }
    let series_tail = tail_after(n_max, x);

    let rel = 1e-12;
    let survival = survival_log(k, 1.0 - x, rel)?;
    let mut log_product = 0.0f64;
    let mut m = 1usize;
    let mut xe = x;
    while xe > 1e-300 && m <= 4 * n_max + 64 {
        log_product += math::ln_1p(-xe);
        xe *= x;
        m += 1;
    }
    let product_tail = xe / ((1.0 - x) * (1.0 - x));
    let rhs = math::exp(survival.log_prob - log_product);

    let residual = math::abs(lhs - rhs);
    let certified_bound = series_tail
        + rhs * (survival.conditional_tail + rel + product_tail)
        + 1e-12 * (1.0 + lhs);
    Ok(ResidualCheck {
        residual,
        certified_bound,
    })
}

/// Compares the probability that the `x^n`-failure process never fails
/// at step 1 and never fails twice in a row, computed by the survival
/// dynamic program, against the sparse product
/// `prod_{j>=0} (1 - x^(6j+1)) (1 - x^(6j+5))` truncated at exponent
/// `n_max`.
pub fn factorization_check(x: f64, n_max: usize) -> Result<ResidualCheck, CoreError> {
    if !(x > 0.0 && x <= 0.6) {
        return Err(CoreError::OutOfDomain {
            what: "factorization comparison needs x in (0, 0.6]",
            value: x,
        });
    }
    if n_max < 1 {
        return Err(CoreError::BadParameter {
            what: "factorization truncation needs n_max >= 1",
        });
    }
    let rel = 1e-13;
    let survival = survival_log_forced_start(2, 1.0 - x, rel)?;
    let dp = math::exp(survival.log_prob);

    let mut log_product = 0.0f64;
    let mut e = 1usize;
    while e <= n_max {
        log_product += math::ln_1p(-math::pow(x, e as f64));
        if e + 4 <= n_max {
            log_product += math::ln_1p(-math::pow(x, (e + 4) as f64));
        }
        e += 6;
    }
    let product = math::exp(log_product);
    let product_tail = math::pow(x, (n_max + 1) as f64) / ((1.0 - x) * (1.0 - x));

    let residual = math::abs(dp - product);
    let certified_bound =
        dp * (survival.conditional_tail + rel) + product * product_tail + 1e-14;
    Ok(ResidualCheck {
        residual,
        certified_bound,
    })
}

/// Ratios `log p_k(n) / (pi sqrt((2/3)(1 - 2/(k(k+1))) n))` for each
/// requested `n`; they approach 1 as `n` grows.
pub fn asymptotic_ratio_pk(k: u32, n_list: &[usize]) -> Result<Vec<f64>, CoreError> {
    let &n_max = n_list.iter().max().ok_or(CoreError::BadParameter {
        what: "asymptotic ratio needs at least one n",
    })?;
    if n_list.contains(&0) {
        return Err(CoreError::BadParameter {
            what: "asymptotic ratio needs n >= 1",
        });
    }
    let table = count_pk(k, n_max)?;
    Ok(n_list
        .iter()
        .map(|&n| ln_count(&table.counts[n]) / growth_exponent(k, n as f64))
        .collect())
}

/// The growth exponent `pi sqrt((2/3)(1 - 2/(k(k+1))) n)`; as `k` grows
/// it recovers the unrestricted `pi sqrt(2n/3)`.
pub fn growth_exponent(k: u32, n: f64) -> f64 {
    let kf = k as f64;
    math::PI * math::sqrt(2.0 / 3.0 * (1.0 - 2.0 / (kf * (kf + 1.0))) * n)
}

/// Largest `n` accepted by [`enumerate_partitions`].
pub const MAX_ENUMERATION_N: u32 = 30;

/// All partitions of `n` as non-increasing part lists, for use as an
/// exhaustive reference on small inputs.
pub fn enumerate_partitions(n: u32) -> Result<Vec<Vec<u32>>, CoreError> {
    if n > MAX_ENUMERATION_N {
        return Err(CoreError::BadParameter {
            what: "exhaustive partition generation is limited to n <= 30",
        });
    }
    fn rec(remaining: u32, max_part: u32, cur: &mut Vec<u32>, out: &mut Vec<Vec<u32>>) {
        if remaining == 0 {
            out.push(cur.clone());
            return;
        }
        let hi = remaining.min(max_part);
        for p in (1..=hi).rev() {
            cur.push(p);
            rec(remaining - p, p, cur, out);
            cur.pop();
        }
    }
    let mut out = Vec::new();
    let mut cur = Vec::new();
    rec(n, n, &mut cur, &mut out);
    Ok(out)
}

/// Whether some `k` consecutive values all appear among `parts`.
pub fn has_consecutive_values(parts: &[u32], k: u32) -> bool {
    if k == 0 {
        return true;
    }
    let max = match parts.iter().max() {
        Some(&m) => m as usize,
        None => return false,
    };
    let mut present = vec![false; max + 1];
    for &p in parts {
        present[p as usize] = true;
    }
    let mut run = 0u32;
    for &p in present.iter().skip(1) {
        if p {
            run += 1;
            if run >= k {
                return true;
            }
        } else {
            run = 0;
        }
    }
    false
}

#[cfg(test)]
mod tests {
    use super::*;
    use num_traits::ToPrimitive;

    fn as_u64(v: &BigUint) -> u64 {
        v.to_u64().expect("count fits in u64")
    }

    #[test]
    fn small_run_restricted_values() {
        let t = count_pk(2, 6).unwrap();
        // Partitions of 4: (4), (3,1), (2,2), (1,1,1,1) qualify; (2,1,1) has
        // both 1 and 2 present.
        assert_eq!(as_u64(&t.counts[4]), 4);
        assert_eq!(as_u64(&t.counts[0]), 1);
        assert_eq!(as_u64(&t.counts[1]), 1);
    }

    #[test]
    fn run_restricted_matches_exhaustive_generation() {
        for k in 2..=4u32 {
            let table = count_pk(k, 30).unwrap();
            for n in 0..=30u32 {
                let all = enumerate_partitions(n).unwrap();
                let want = all
                    .iter()
                    .filter(|p| !has_consecutive_values(p, k))
                    .count() as u64;
                assert_eq!(
                    as_u64(&table.counts[n as usize]),
                    want,
                    "k={k} n={n}"
                );
            }
        }
    }

    #[test]
    fn unrestricted_matches_known_values() {
        let t = count_unrestricted(100);
        assert_eq!(as_u64(&t.counts[0]), 1);
        assert_eq!(as_u64(&t.counts[4]), 5);
        assert_eq!(as_u64(&t.counts[10]), 42);
        // Classical value of p(100).
        assert_eq!(as_u64(&t.counts[100]), 190_569_292);
        let all = enumerate_partitions(25).unwrap();
        assert_eq!(as_u64(&t.counts[25]), all.len() as u64);
    }

    #[test]
    fn macmahon_sides_agree_entrywise() {
        let (lhs, rhs) = count_macmahon(300);
        assert_eq!(lhs.counts, rhs.counts);
        assert_eq!(as_u64(&lhs.counts[0]), 1);
        assert_eq!(as_u64(&lhs.counts[1]), 0);
        // n = 6: (6), (4,2), (3,3), (2,2,2).
        assert_eq!(as_u64(&lhs.counts[6]), 4);
    }

    #[test]
    fn macmahon_lhs_matches_direct_enumeration() {
        for n in 0..=25u32 {
            let all = enumerate_partitions(n).unwrap();
            let want = all
                .iter()
                .filter(|p| !p.contains(&1) && !has_consecutive_values(p, 2))
                .count() as u64;
            let (lhs, _) = count_macmahon(n as usize);
            assert_eq!(as_u64(&lhs.counts[n as usize]), want, "n={n}");
        }
    }

    #[test]
    fn counts_are_monotone_and_dominated() {
        let n_max = 120;
        let p2 = count_pk(2, n_max).unwrap();
        let p3 = count_pk(3, n_max).unwrap();
        let p4 = count_pk(4, n_max).unwrap();
        let p = count_unrestricted(n_max);
        for n in 0..n_max {
            assert!(p2.counts[n] <= p2.counts[n + 1], "p2 monotone at {n}");
            assert!(p3.counts[n] <= p3.counts[n + 1], "p3 monotone at {n}");
            assert!(p4.counts[n] <= p4.counts[n + 1], "p4 monotone at {n}");
        }
        for n in 0..=n_max {
            assert!(p2.counts[n] <= p3.counts[n], "p2 <= p3 at {n}");
            assert!(p3.counts[n] <= p4.counts[n], "p3 <= p4 at {n}");
            assert!(p4.counts[n] <= p.counts[n], "p4 <= p at {n}");
        }
    }

    #[test]
    fn sandwich_relation_holds() {
        assert!(sandwich_r_check(50).unwrap());
        assert!(sandwich_r_check(2).unwrap());
        assert!(sandwich_r_check(1).is_err());
    }

    /// The constructive step behind monotonicity: map a restricted
    /// partition of n to one of n+1 by appending a 1 when that stays
    /// legal; otherwise 2 must be present and 1 absent, and the fallback
    /// move applies. Images must stay legal and be pairwise distinct.
    #[test]
    fn monotonicity_injections_are_injective() {
        fn values(p: &[u32]) -> Vec<u32> {
            let mut v: Vec<u32> = p.to_vec();
            v.sort_unstable();
            v.dedup();
            v
        }
        for k in 2..=4u32 {
            for n in 1..=25u32 {
                let admissible: Vec<Vec<u32>> = enumerate_partitions(n)
                    .unwrap()
                    .into_iter()
                    .filter(|p| !has_consecutive_values(p, k))
                    .collect();
                let mut images: Vec<Vec<u32>> = Vec::new();
                for p in &admissible {
                    if k == 2 && n == 2 && p.as_slice() == [2] {
                        // The one partition the k = 2 map cannot handle:
                        // removing its only 2 leaves no largest part.
                        continue;
                    }
                    let vals = values(p);
                    let mut with_one = p.clone();
                    with_one.push(1);
                    let image = if !has_consecutive_values(&with_one, k) {
                        with_one
                    } else if k >= 3 {
                        // 2 is present; trade one 2 for a 3.
                        let mut q = p.clone();
                        let pos = q.iter().position(|&v| v == 2).unwrap();
                        q[pos] = 3;
                        q
                    } else {
                        // k = 2: remove a 2 and add 3 to the largest part.
                        assert!(vals.contains(&2) && !vals.contains(&1));
                        let mut q = p.clone();
                        let pos = q.iter().position(|&v| v == 2).unwrap();
                        q.remove(pos);
                        let largest = q
                            .iter()
                            .enumerate()
                            .max_by_key(|(_, &v)| v)
                            .map(|(i, _)| i)
                            .unwrap();
                        q[largest] += 3;
                        q
                    };
                    let mut sorted = image.clone();
                    sorted.sort_unstable_by(|a, b| b.cmp(a));
                    assert_eq!(sorted.iter().sum::<u32>(), n + 1, "k={k} n={n}");
                    assert!(
                        !has_consecutive_values(&sorted, k),
                        "k={k} n={n}: image of {p:?} is {sorted:?}"
                    );
                    images.push(sorted);
                }
                let before = images.len();
                images.sort();
                images.dedup();
                assert_eq!(images.len(), before, "k={k} n={n}: collision");
            }
        }
    }

    #[test]
    fn generating_function_matches_survival_product() {
        let c = gk_consistency(2, 0.3, 200).unwrap();
        assert!(c.residual <= 1e-9, "k=2 x=0.3: {}", c.residual);
        assert!(c.residual <= c.certified_bound);
        let c = gk_consistency(3, 0.5, 400).unwrap();
        assert!(c.residual <= 1e-6, "k=3 x=0.5: {}", c.residual);
        assert!(c.residual <= c.certified_bound);
    }

    #[test]
    fn generating_function_tends_to_one_at_small_x() {
        let c = gk_consistency(2, 1e-3, 40).unwrap();
        assert!(c.residual <= 1e-10);
        // Both sides are 1 + x + O(x^2) here; spot-check the magnitude.
        let table = count_pk(2, 3).unwrap();
        assert_eq!(table.counts[1], BigUint::one());
    }

    #[test]
    fn sparse_product_factorization_holds() {
        let c = factorization_check(0.3, 400).unwrap();
        assert!(c.residual <= 1e-9, "x=0.3: {}", c.residual);
        assert!(c.residual <= c.certified_bound);
        let c = factorization_check(0.5, 600).unwrap();
        assert!(c.residual <= 1e-7, "x=0.5: {}", c.residual);
        assert!(c.residual <= c.certified_bound);
    }

    #[test]
    fn growth_ratios_approach_one() {
        let ratios = asymptotic_ratio_pk(2, &[500, 2000]).unwrap();
        assert!(
            (ratios[1] - 1.0).abs() < 0.1,
            "ratio at 2000: {}",
            ratios[1]
        );
        assert!(
            (ratios[1] - 1.0).abs() < (ratios[0] - 1.0).abs(),
            "{} vs {}",
            ratios[1],
            ratios[0]
        );
    }

    #[test]
    fn growth_exponent_limit_is_unrestricted() {
        let huge = growth_exponent(1_000_000, 400.0);
        let unrestricted = math::PI * math::sqrt(2.0 / 3.0 * 400.0);
        assert!((huge / unrestricted - 1.0).abs() < 1e-5);
    }

    #[test]
    fn ln_count_is_accurate_for_large_values() {
        let t = count_unrestricted(100);
        let exact = as_u64(&t.counts[100]) as f64;
        assert!((ln_count(&t.counts[100]) - exact.ln()).abs() < 1e-12);
        // A value far beyond u64: 2^300.
        let big = BigUint::one() << 300;
        assert!((ln_count(&big) - 300.0 * core::f64::consts::LN_2).abs() < 1e-10);
        assert_eq!(ln_count(&BigUint::zero()), f64::NEG_INFINITY);
    }

    #[test]
    fn rejects_bad_parameters() {
        assert!(count_pk(1, 10).is_err());
        assert!(count_pk(13, 10).is_err());
        assert!(gk_consistency(2, 0.7, 100).is_err());
        assert!(factorization_check(0.0, 100).is_err());
        assert!(enumerate_partitions(31).is_err());
        assert!(asymptotic_ratio_pk(2, &[]).is_err());
    }
}

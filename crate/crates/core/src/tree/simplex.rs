//! Dense exact-rational simplex for small linear programs.
//!
//! Solves `maximize c·x subject to A x ≤ b, x ≥ 0` with every entry a
//! [`BigRational`], so feasibility and optimality are decided exactly —
//! there is no tolerance anywhere in this module. The right-hand side
//! must be nonnegative, which makes the all-slack basis feasible and
//! removes the need for a phase-one start. Pivoting follows Bland's
//! rule (lowest eligible index enters, lowest-index basic variable
//! leaves among tied minimum ratios), which excludes cycling, so the
//! solver terminates on every input.
//!
//! Alongside the primal solution the solver reports the dual vector —
//! one multiplier per constraint, read off the reduced costs of the
//! slack columns at the optimum. The oracle layer turns those
//! multipliers into trading strategies, so their exactness matters as
//! much as the optimal value's.

use num_rational::BigRational;
use num_traits::{Signed, Zero};

/// Exact optimum of a small linear program, with its dual vector.
pub(crate) struct SimplexSolution {
    /// Optimal objective value `c·x`.
    pub value: BigRational,
    /// Primal optimizer, one entry per structural variable.
    pub x: Vec<BigRational>,
    /// Dual multipliers, one per constraint row, all nonnegative at the
    /// optimum.
    pub duals: Vec<BigRational>,
}

/// Maximizes `c·x` over `{x ≥ 0 : rows·x ≤ rhs}` exactly.
///
/// Every `rhs` entry must be nonnegative (the origin is then feasible).
/// Returns `None` when the program is unbounded above; otherwise the
/// optimum is attained at a vertex and returned exactly.
pub(crate) fn simplex_max(
    objective: &[BigRational],
    rows: &[Vec<BigRational>],
    rhs: &[BigRational],
) -> Option<SimplexSolution> {
    let n = objective.len();
    let m = rows.len();
    debug_assert!(rows.iter().all(|r| r.len() == n));
    debug_assert!(rhs.iter().all(|b| !b.is_negative()));

    // Tableau columns: n structural variables then m slacks; the
    // right-hand side is kept in its own vector. The basis starts as
    // the slack identity, which is feasible because rhs ≥ 0.
    let mut tab: Vec<Vec<BigRational>> = rows
        .iter()
        .enumerate()
        .map(|(i, row)| {
            let mut full = Vec::with_capacity(n + m);
            full.extend(row.iter().cloned());
            for j in 0..m {
                full.push(if j == i {
                    BigRational::from_integer(1.into())
                } else {
                    BigRational::zero()
                });
            }
            full
        })
        .collect();
    let mut b: Vec<BigRational> = rhs.to_vec();
    let mut reduced: Vec<BigRational> = objective
        .iter()
        .cloned()
        .chain((0..m).map(|_| BigRational::zero()))
        .collect();
    let mut value = BigRational::zero();
    let mut basis: Vec<usize> = (n..n + m).collect();

    loop {
        // Bland entering rule: the lowest-index column that can still
        // improve the objective.
        let Some(enter) = (0..n + m).find(|&j| reduced[j].is_positive()) else {
            break;
        };
        // Ratio test; ties broken on the smallest basic-variable index
        // (the other half of Bland's rule).
        let mut leave: Option<usize> = None;
        let mut best: Option<BigRational> = None;
        for i in 0..m {
            if !tab[i][enter].is_positive() {
                continue;
            }
            let ratio = &b[i] / &tab[i][enter];
            let better = match (&best, leave) {
                (None, _) => true,
                (Some(cur), Some(l)) => ratio < *cur || (ratio == *cur && basis[i] < basis[l]),
                (Some(_), None) => unreachable!("ratio recorded without a leaving row"),
            };
            if better {
                best = Some(ratio);
                leave = Some(i);
            }
        }
        // No row limits the entering column: the program is unbounded.
        let leave = leave?;

        let pivot = tab[leave][enter].clone();
        for entry in tab[leave].iter_mut() {
            if !entry.is_zero() {
                *entry = &*entry / &pivot;
            }
        }
        b[leave] = &b[leave] / &pivot;
        for i in 0..m {
            if i == leave || tab[i][enter].is_zero() {
                continue;
            }
            let factor = tab[i][enter].clone();
            for j in 0..n + m {
                if !tab[leave][j].is_zero() {
                    let delta = &tab[leave][j] * &factor;
                    tab[i][j] = &tab[i][j] - delta;
                }
            }
            if !b[leave].is_zero() {
                let delta = &b[leave] * &factor;
                b[i] = &b[i] - delta;
            }
        }
        if !reduced[enter].is_zero() {
            let factor = reduced[enter].clone();
            for j in 0..n + m {
                if !tab[leave][j].is_zero() {
                    let delta = &tab[leave][j] * &factor;
                    reduced[j] = &reduced[j] - delta;
                }
            }
            if !b[leave].is_zero() {
                let gain = &b[leave] * &factor;
                value = &value + gain;
            }
        }
        basis[leave] = enter;
    }

    let mut x = vec![BigRational::zero(); n];
    for i in 0..m {
        if basis[i] < n {
            x[basis[i]] = b[i].clone();
        }
    }
    // At the optimum the reduced cost of slack i equals minus the dual
    // multiplier of constraint i.
    let duals = (0..m).map(|i| -reduced[n + i].clone()).collect();
    Some(SimplexSolution { value, x, duals })
}

#[cfg(test)]
mod tests {
    use super::*;
    use num_bigint::BigInt;

    fn rat(n: i64, d: i64) -> BigRational {
        BigRational::new(BigInt::from(n), BigInt::from(d))
    }

    fn row(entries: &[(i64, i64)]) -> Vec<BigRational> {
        entries.iter().map(|&(n, d)| rat(n, d)).collect()
    }

    /// Primal feasibility, dual feasibility, and equal objectives —
    /// together an exact certificate that `sol` really is the optimum.
    fn assert_optimal(
        objective: &[BigRational],
        rows: &[Vec<BigRational>],
        rhs: &[BigRational],
        sol: &SimplexSolution,
    ) {
        for x in &sol.x {
            assert!(!x.is_negative());
        }
        for (row, b) in rows.iter().zip(rhs) {
            let lhs: BigRational = row.iter().zip(&sol.x).map(|(a, x)| a * x).sum();
            assert!(lhs <= *b);
        }
        let primal: BigRational = objective.iter().zip(&sol.x).map(|(c, x)| c * x).sum();
        assert_eq!(primal, sol.value);
        for y in &sol.duals {
            assert!(!y.is_negative());
        }
        for (j, c) in objective.iter().enumerate() {
            let col: BigRational = rows.iter().zip(&sol.duals).map(|(r, y)| &r[j] * y).sum();
            assert!(col >= *c, "dual constraint {j} violated");
        }
        let dual: BigRational = rhs.iter().zip(&sol.duals).map(|(b, y)| b * y).sum();
        assert_eq!(dual, sol.value, "strong duality must hold exactly");
    }

    #[test]
    fn maximizes_a_plain_two_variable_program() {
        let c = row(&[(1, 1), (1, 1)]);
        let rows = vec![row(&[(1, 1), (0, 1)]), row(&[(0, 1), (1, 1)])];
        let rhs = row(&[(2, 1), (3, 1)]);
        let sol = simplex_max(&c, &rows, &rhs).unwrap();
        assert_eq!(sol.value, rat(5, 1));
        assert_eq!(sol.x, row(&[(2, 1), (3, 1)]));
        assert_eq!(sol.duals, row(&[(1, 1), (1, 1)]));
        assert_optimal(&c, &rows, &rhs, &sol);
    }

    #[test]
    fn reads_the_duals_off_the_optimum() {
        // max 2a + b over a + b ≤ 4, a ≤ 2: optimum (2, 2) with value 6
        // and both constraints binding at prices (1, 1).
        let c = row(&[(2, 1), (1, 1)]);
        let rows = vec![row(&[(1, 1), (1, 1)]), row(&[(1, 1), (0, 1)])];
        let rhs = row(&[(4, 1), (2, 1)]);
        let sol = simplex_max(&c, &rows, &rhs).unwrap();
        assert_eq!(sol.value, rat(6, 1));
        assert_eq!(sol.x, row(&[(2, 1), (2, 1)]));
        assert_eq!(sol.duals, row(&[(1, 1), (1, 1)]));
        assert_optimal(&c, &rows, &rhs, &sol);
    }

    #[test]
    fn detects_unbounded_directions() {
        // max a with only −a ≤ 1 keeping it in check: unbounded above.
        let c = row(&[(1, 1)]);
        let rows = vec![row(&[(-1, 1)])];
        let rhs = row(&[(1, 1)]);
        assert!(simplex_max(&c, &rows, &rhs).is_none());
    }

    #[test]
    fn degenerate_pivots_terminate_on_the_classic_cycling_program() {
        // The textbook cycling example: two zero right-hand sides make
        // every early pivot degenerate, and naive lowest-reduced-cost
        // pivoting loops forever. Bland's rule must terminate at the
        // optimum instead. Optimal point (1/25, 0, 1, 0): the second
        // constraint binds (1/2·1/25 − 1/50 = 0), the value is
        // 3/4·1/25 + 1/50 = 1/20, and the dual (0, 3/2, 1/20) matches
        // it exactly, certifying optimality.
        let c = row(&[(3, 4), (-150, 1), (1, 50), (-6, 1)]);
        let rows = vec![
            row(&[(1, 4), (-60, 1), (-1, 25), (9, 1)]),
            row(&[(1, 2), (-90, 1), (-1, 50), (3, 1)]),
            row(&[(0, 1), (0, 1), (1, 1), (0, 1)]),
        ];
        let rhs = row(&[(0, 1), (0, 1), (1, 1)]);
        let sol = simplex_max(&c, &rows, &rhs).unwrap();
        assert_eq!(sol.value, rat(1, 20));
        assert_optimal(&c, &rows, &rhs, &sol);
    }

    #[test]
    fn random_programs_satisfy_exact_strong_duality() {
        use rand::Rng;
        let mut checked = 0usize;
        for seed in 0..40u64 {
            let mut rng = crate::simkernel::rng_for(seed);
            let n = rng.random_range(1..=4usize);
            let m = rng.random_range(1..=4usize);
            let c: Vec<BigRational> = (0..n)
                .map(|_| rat(rng.random_range(-5..=5), rng.random_range(1..=3)))
                .collect();
            let rows: Vec<Vec<BigRational>> = (0..m)
                .map(|_| {
                    (0..n)
                        .map(|_| rat(rng.random_range(-4..=6), rng.random_range(1..=3)))
                        .collect()
                })
                .collect();
            let rhs: Vec<BigRational> = (0..m)
                .map(|_| rat(rng.random_range(0..=7), rng.random_range(1..=2)))
                .collect();
            if let Some(sol) = simplex_max(&c, &rows, &rhs) {
                assert_optimal(&c, &rows, &rhs, &sol);
                checked += 1;
            }
        }
        assert!(checked >= 10, "too few bounded programs: {checked}");
    }
}

//! Brute-force reference implementations shared by the integration tests.
//! Everything here enumerates truth tables directly from the class
//! definitions and never calls the library's oracles.
#![allow(dead_code)]

use dpagn::{ClassKind, Dataset, Rational};
use std::collections::BTreeSet;

/// Every distinct truth table of the class on `[0, n)`.
pub fn tables(kind: ClassKind, n: usize) -> Vec<Vec<bool>> {
    let mut out: BTreeSet<Vec<bool>> = BTreeSet::new();
    match kind {
        ClassKind::Points => {
            for z in 0..n {
                out.insert((0..n).map(|x| x == z).collect());
            }
        }
        ClassKind::Thresholds => {
            for t in 0..=n {
                out.insert((0..n).map(|x| x >= t).collect());
            }
        }
        ClassKind::Intervals => unions(n, 1, &mut out),
        ClassKind::UnionOfIntervals(k) => unions(n, k, &mut out),
    }
    out.into_iter().collect()
}

fn unions(n: usize, k: usize, out: &mut BTreeSet<Vec<bool>>) {
    fn rec(n: usize, from: usize, left: usize, cur: &mut Vec<bool>, out: &mut BTreeSet<Vec<bool>>) {
        out.insert(cur.clone());
        if left == 0 {
            return;
        }
        for a in from..n {
            for b in a + 1..=n {
                let saved = cur.clone();
                cur[a..b].fill(true);
                rec(n, b, left - 1, cur, out);
                *cur = saved;
            }
        }
    }
    rec(n, 0, k, &mut vec![false; n], out);
}

pub fn vc(kind: ClassKind) -> usize {
    match kind {
        ClassKind::Points | ClassKind::Thresholds => 1,
        ClassKind::Intervals => 2,
        ClassKind::UnionOfIntervals(k) => 2 * k,
    }
}

/// Distinct labelings of `points` realized by the class.
pub fn labelings(kind: ClassKind, n: usize, points: &[usize]) -> BTreeSet<Vec<bool>> {
    tables(kind, n).iter().map(|t| points.iter().map(|&x| t[x]).collect()).collect()
}

/// `min_c Σ w·[c(x) ≠ target]`.
pub fn brute_weighted_erm(kind: ClassKind, n: usize, items: &[(usize, bool, Rational)]) -> Rational {
    min_weighted_cost(&tables(kind, n), items)
}

/// As [`brute_weighted_erm`] over precomputed tables.
pub fn min_weighted_cost(tables: &[Vec<bool>], items: &[(usize, bool, Rational)]) -> Rational {
    tables.iter().map(|t| items.iter().filter(|(x, y, _)| t[*x] != *y).map(|(_, _, w)| *w).sum::<Rational>()).min().unwrap()
}

/// `min_f dis_T(h, f) + err_W(f)` with `h` given as a truth table.
pub fn brute_q(kind: ClassKind, n: usize, h: &[bool], tx: &[usize], w: &Dataset) -> Rational {
    min_q(&tables(kind, n), h, tx, w)
}

/// As [`brute_q`] over precomputed tables.
pub fn min_q(tables: &[Vec<bool>], h: &[bool], tx: &[usize], w: &Dataset) -> Rational {
    tables
        .iter()
        .map(|f| {
            let dis = tx.iter().filter(|&&x| h[x] != f[x]).count() as i128;
            let err = w.iter().filter(|e| f[e.x.0] != e.y).count() as i128;
            Rational::new(dis, tx.len() as i128) + Rational::new(err, w.len() as i128)
        })
        .min()
        .unwrap()
}

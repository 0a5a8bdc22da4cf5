//! Exact linear algebra over the rationals.

use std::collections::BTreeMap;

use num_rational::BigRational;
use num_traits::{One, Zero};

pub type RationalMatrix = Vec<Vec<BigRational>>;

/// `size × size` matrix with `diag` on the diagonal and ones elsewhere.
pub fn ones_plus_diagonal(size: usize, diag: i64) -> RationalMatrix {
    (0..size)
        .map(|i| {
            (0..size)
                .map(|j| BigRational::from_integer((if i == j { diag } else { 1 }).into()))
                .collect()
        })
        .collect()
}

/// Matrix of the first-order system: 3 on the diagonal, 1 elsewhere.
pub fn first_order_matrix(size: usize) -> RationalMatrix {
    ones_plus_diagonal(size, 3)
}

/// Matrix of the second-order system: 2 on the diagonal, 1 elsewhere.
pub fn second_order_matrix(size: usize) -> RationalMatrix {
    ones_plus_diagonal(size, 2)
}

/// Row-reduces `[a | b]`; returns the determinant of `a` and the reduced `b`
/// (`a⁻¹ b`) when `a` is regular.
fn gauss_jordan(mut a: RationalMatrix, mut b: RationalMatrix) -> (BigRational, Option<RationalMatrix>) {
    let n = a.len();
    let mut det = BigRational::one();
    for col in 0..n {
        let Some(p) = (col..n).find(|&r| !a[r][col].is_zero()) else {
            return (BigRational::zero(), None);
        };
        if p != col {
            a.swap(p, col);
            b.swap(p, col);
            det = -det;
        }
        let piv = a[col][col].clone();
        det *= &piv;
        for v in a[col].iter_mut() {
            *v /= &piv;
        }
        for v in b[col].iter_mut() {
            *v /= &piv;
        }
        for r in 0..n {
            if r == col || a[r][col].is_zero() {
                continue;
            }
            let f = a[r][col].clone();
            for c in 0..n {
                let d = &f * &a[col][c];
                a[r][c] -= d;
            }
            for c in 0..b[col].len() {
                let d = &f * &b[col][c];
                b[r][c] -= d;
            }
        }
    }
    (det, Some(b))
}

pub fn determinant(a: &RationalMatrix) -> BigRational {
    let n = a.len();
    gauss_jordan(a.clone(), vec![Vec::new(); n]).0
}

pub fn inverse(a: &RationalMatrix) -> Option<RationalMatrix> {
    let n = a.len();
    let id = (0..n)
        .map(|i| {
            (0..n)
                .map(|j| if i == j { BigRational::one() } else { BigRational::zero() })
                .collect()
        })
        .collect();
    gauss_jordan(a.clone(), id).1
}

/// Cofactor expansion along the first row; an independent determinant oracle
/// for small matrices.
pub fn determinant_by_expansion(a: &RationalMatrix) -> BigRational {
    let n = a.len();
    match n {
        0 => BigRational::one(),
        1 => a[0][0].clone(),
        _ => (0..n)
            .map(|c| {
                let minor: RationalMatrix = a[1..]
                    .iter()
                    .map(|row| {
                        row.iter()
                            .enumerate()
                            .filter(|(k, _)| *k != c)
                            .map(|(_, v)| v.clone())
                            .collect()
                    })
                    .collect();
                let term = &a[0][c] * determinant_by_expansion(&minor);
                if c % 2 == 0 {
                    term
                } else {
                    -term
                }
            })
            .fold(BigRational::zero(), |s, t| s + t),
    }
}

pub type SparseVector<K> = BTreeMap<K, BigRational>;

/// Row-echelon basis of sparse vectors. Each row is keyed by its leading
/// (smallest) key and scaled so that entry is one; leading keys are distinct.
#[derive(Debug, Clone)]
pub struct SparseEchelon<K: Ord + Clone> {
    rows: BTreeMap<K, SparseVector<K>>,
}

impl<K: Ord + Clone> Default for SparseEchelon<K> {
    fn default() -> Self {
        Self {
            rows: BTreeMap::new(),
        }
    }
}

impl<K: Ord + Clone> SparseEchelon<K> {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn rank(&self) -> usize {
        self.rows.len()
    }

    pub fn pivots(&self) -> impl Iterator<Item = &K> {
        self.rows.keys()
    }

    /// Remainder of `v` after eliminating every pivot key; zero iff `v` lies
    /// in the span.
    pub fn reduce(&self, v: &SparseVector<K>) -> SparseVector<K> {
        let mut v = v.clone();
        v.retain(|_, c| !c.is_zero());
        let mut cursor: Option<K> = None;
        loop {
            let next = match &cursor {
                None => v.keys().next().cloned(),
                Some(c) => v
                    .range((std::ops::Bound::Excluded(c.clone()), std::ops::Bound::Unbounded))
                    .next()
                    .map(|(k, _)| k.clone()),
            };
            let Some(key) = next else { break };
            if let Some(row) = self.rows.get(&key) {
                let f = v[&key].clone();
                for (k, c) in row {
                    let e = v.entry(k.clone()).or_insert_with(BigRational::zero);
                    *e -= &f * c;
                    if e.is_zero() {
                        v.remove(k);
                    }
                }
            } else {
                cursor = Some(key);
            }
        }
        v
    }

    pub fn contains(&self, v: &SparseVector<K>) -> bool {
        self.reduce(v).is_empty()
    }

    /// Adds `v` if it is independent of the current rows.
    pub fn insert(&mut self, v: &SparseVector<K>) -> bool {
        let r = self.reduce(v);
        let Some((lead, c)) = r.iter().next().map(|(k, c)| (k.clone(), c.clone())) else {
            return false;
        };
        let row = r.into_iter().map(|(k, v)| (k, v / &c)).collect();
        self.rows.insert(lead, row);
        true
    }
}

#[cfg(test)]
mod tests {
    use super::super::poly::integer;
    use super::*;

    #[test]
    fn determinants_agree_with_expansion() {
        for size in 1..6 {
            for m in [first_order_matrix(size), second_order_matrix(size)] {
                assert_eq!(determinant(&m), determinant_by_expansion(&m));
            }
        }
    }

    #[test]
    fn inverse_times_matrix_is_identity() {
        let m = first_order_matrix(4);
        let inv = inverse(&m).unwrap();
        for i in 0..4 {
            for j in 0..4 {
                let s: BigRational = (0..4).map(|k| &m[i][k] * &inv[k][j]).sum();
                assert_eq!(s, if i == j { integer(1) } else { integer(0) });
            }
        }
        assert!(inverse(&vec![vec![integer(1), integer(2)], vec![integer(2), integer(4)]]).is_none());
    }

    #[test]
    fn echelon_detects_dependence() {
        let v = |a: &[(u8, i64)]| -> SparseVector<u8> {
            a.iter().map(|(k, c)| (*k, integer(*c))).collect()
        };
        let mut e = SparseEchelon::new();
        assert!(e.insert(&v(&[(0, 1), (2, 1)])));
        assert!(e.insert(&v(&[(0, 1), (1, 1)])));
        assert!(!e.insert(&v(&[(1, 2), (2, -2)])));
        assert!(e.insert(&v(&[(2, 5)])));
        assert_eq!(e.rank(), 3);
        assert!(!e.insert(&v(&[])));
    }
}

//! Polynomials on the unit sphere with exact rational coefficients.

use std::collections::BTreeMap;
use std::fmt;
use std::ops::{Add, Mul, Neg, Sub};

use num_bigint::BigInt;
use num_rational::BigRational;
use num_traits::{One, Signed, ToPrimitive, Zero};

pub type Exponents = Vec<u16>;

pub fn rational(num: i64, den: i64) -> BigRational {
    BigRational::new(BigInt::from(num), BigInt::from(den))
}

pub fn integer(v: i64) -> BigRational {
    BigRational::from_integer(BigInt::from(v))
}

/// Element of `Q[y^1..y^n] / (|y|² − 1)`.
///
/// Stored in canonical form: no monomial contains `(y^n)²`. Equality of ring
/// elements is equality of the coefficient maps.
#[derive(Clone, PartialEq, Eq, Hash)]
pub struct SpherePolynomial {
    n: usize,
    terms: BTreeMap<Exponents, BigRational>,
}

impl SpherePolynomial {
    pub fn zero(n: usize) -> Self {
        assert!(n >= 1, "polynomial ring needs at least one variable");
        Self {
            n,
            terms: BTreeMap::new(),
        }
    }

    pub fn constant(n: usize, c: BigRational) -> Self {
        Self::monomial(n, vec![0; n], c)
    }

    pub fn one(n: usize) -> Self {
        Self::constant(n, BigRational::one())
    }

    /// The coordinate function `y^i` (0-based).
    pub fn var(n: usize, i: usize) -> Self {
        let mut e = vec![0; n];
        e[i] = 1;
        Self::monomial(n, e, BigRational::one())
    }

    pub fn monomial(n: usize, exps: Exponents, coeff: BigRational) -> Self {
        let mut terms = BTreeMap::new();
        terms.insert(exps, coeff);
        Self::from_ambient(n, terms)
    }

    /// Reduces an arbitrary polynomial to canonical form.
    pub fn from_ambient(n: usize, terms: BTreeMap<Exponents, BigRational>) -> Self {
        assert!(terms.keys().all(|e| e.len() == n), "exponent length mismatch");
        let last = n - 1;
        let mut done: BTreeMap<Exponents, BigRational> = BTreeMap::new();
        // keyed by (e_n, exponents) so the highest power is expanded first
        let mut pending: BTreeMap<(u16, Exponents), BigRational> = BTreeMap::new();
        for (e, c) in terms {
            if c.is_zero() {
                continue;
            }
            if e[last] >= 2 && n >= 2 {
                accumulate(&mut pending, (e[last], e), c);
            } else {
                accumulate(&mut done, e, c);
            }
        }
        if n == 1 {
            // y² = 1 on the 0-sphere
            let mut reduced = BTreeMap::new();
            for (e, c) in done {
                accumulate(&mut reduced, vec![e[0] % 2], c);
            }
            return Self::from_reduced(n, reduced);
        }
        while let Some(((_, e), c)) = pending.pop_last() {
            let mut base = e;
            base[last] -= 2;
            let mut targets = vec![(base.clone(), c.clone())];
            for i in 0..last {
                let mut t = base.clone();
                t[i] += 2;
                targets.push((t, -c.clone()));
            }
            for (t, v) in targets {
                if t[last] >= 2 {
                    accumulate(&mut pending, (t[last], t), v);
                } else {
                    accumulate(&mut done, t, v);
                }
            }
        }
        Self::from_reduced(n, done)
    }

    fn from_reduced(n: usize, mut terms: BTreeMap<Exponents, BigRational>) -> Self {
        terms.retain(|_, c| !c.is_zero());
        Self { n, terms }
    }

    pub fn nvars(&self) -> usize {
        self.n
    }

    pub fn is_zero(&self) -> bool {
        self.terms.is_empty()
    }

    pub fn terms(&self) -> &BTreeMap<Exponents, BigRational> {
        &self.terms
    }

    pub fn coefficient(&self, exps: &[u16]) -> BigRational {
        self.terms.get(exps).cloned().unwrap_or_else(BigRational::zero)
    }

    /// Total degree of the canonical representative; `None` for zero.
    pub fn degree(&self) -> Option<usize> {
        self.terms.keys().map(|e| total_degree(e)).max()
    }

    /// Reducing a canonical element again is the identity.
    pub fn is_canonical(&self) -> bool {
        self.n < 2 || self.terms.keys().all(|e| e[self.n - 1] < 2)
    }

    pub fn scale(&self, c: &BigRational) -> Self {
        if c.is_zero() {
            return Self::zero(self.n);
        }
        Self {
            n: self.n,
            terms: self.terms.iter().map(|(e, v)| (e.clone(), v * c)).collect(),
        }
    }

    /// Partial derivative of the canonical representative as an ambient
    /// polynomial.
    pub fn derivative(&self, i: usize) -> Self {
        let mut out = BTreeMap::new();
        for (e, c) in &self.terms {
            if e[i] == 0 {
                continue;
            }
            let mut d = e.clone();
            d[i] -= 1;
            accumulate(&mut out, d, c * integer(e[i] as i64));
        }
        // lowering an exponent keeps the form canonical
        Self::from_reduced(self.n, out)
    }

    pub fn eval(&self, y: &[f64]) -> f64 {
        self.terms
            .iter()
            .map(|(e, c)| {
                let m: f64 = e
                    .iter()
                    .zip(y)
                    .map(|(&k, v)| v.powi(k as i32))
                    .product();
                c.to_f64().unwrap_or(f64::NAN) * m
            })
            .sum()
    }

    fn check_same_ring(&self, other: &Self) {
        assert_eq!(self.n, other.n, "polynomials over different rings");
    }
}

pub(crate) fn total_degree(e: &[u16]) -> usize {
    e.iter().map(|&k| k as usize).sum()
}

fn accumulate<K: Ord>(map: &mut BTreeMap<K, BigRational>, key: K, c: BigRational) {
    use std::collections::btree_map::Entry;
    match map.entry(key) {
        Entry::Vacant(v) => {
            if !c.is_zero() {
                v.insert(c);
            }
        }
        Entry::Occupied(mut o) => {
            *o.get_mut() += c;
            if o.get().is_zero() {
                o.remove();
            }
        }
    }
}

impl Add for &SpherePolynomial {
    type Output = SpherePolynomial;
    fn add(self, rhs: &SpherePolynomial) -> SpherePolynomial {
        self.check_same_ring(rhs);
        let mut terms = self.terms.clone();
        for (e, c) in &rhs.terms {
            accumulate(&mut terms, e.clone(), c.clone());
        }
        SpherePolynomial { n: self.n, terms }
    }
}

impl Sub for &SpherePolynomial {
    type Output = SpherePolynomial;
    fn sub(self, rhs: &SpherePolynomial) -> SpherePolynomial {
        self + &(-rhs)
    }
}

impl Neg for &SpherePolynomial {
    type Output = SpherePolynomial;
    fn neg(self) -> SpherePolynomial {
        SpherePolynomial {
            n: self.n,
            terms: self.terms.iter().map(|(e, c)| (e.clone(), -c)).collect(),
        }
    }
}

impl Mul for &SpherePolynomial {
    type Output = SpherePolynomial;
    fn mul(self, rhs: &SpherePolynomial) -> SpherePolynomial {
        self.check_same_ring(rhs);
        let mut terms = BTreeMap::new();
        for (a, ca) in &self.terms {
            for (b, cb) in &rhs.terms {
                let e: Exponents = a.iter().zip(b).map(|(x, y)| x + y).collect();
                accumulate(&mut terms, e, ca * cb);
            }
        }
        SpherePolynomial::from_ambient(self.n, terms)
    }
}

macro_rules! owned_ops {
    ($($tr:ident $m:ident),*) => {$(
        impl $tr for SpherePolynomial {
            type Output = SpherePolynomial;
            fn $m(self, rhs: SpherePolynomial) -> SpherePolynomial {
                (&self).$m(&rhs)
            }
        }
    )*};
}
owned_ops!(Add add, Sub sub, Mul mul);

impl Neg for SpherePolynomial {
    type Output = SpherePolynomial;
    fn neg(self) -> SpherePolynomial {
        -&self
    }
}

impl fmt::Display for SpherePolynomial {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.is_zero() {
            return write!(f, "0");
        }
        for (idx, (e, c)) in self.terms.iter().rev().enumerate() {
            let neg = c.is_negative();
            let mag = c.abs();
            if idx == 0 {
                if neg {
                    write!(f, "-")?;
                }
            } else {
                write!(f, " {} ", if neg { '-' } else { '+' })?;
            }
            let vars: Vec<String> = e
                .iter()
                .enumerate()
                .filter(|(_, &k)| k > 0)
                .map(|(i, &k)| {
                    if k == 1 {
                        format!("y{}", i + 1)
                    } else {
                        format!("y{}^{}", i + 1, k)
                    }
                })
                .collect();
            if vars.is_empty() {
                write!(f, "{mag}")?;
            } else if mag.is_one() {
                write!(f, "{}", vars.join("*"))?;
            } else {
                write!(f, "{mag}*{}", vars.join("*"))?;
            }
        }
        Ok(())
    }
}

impl fmt::Debug for SpherePolynomial {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "SpherePolynomial({self})")
    }
}

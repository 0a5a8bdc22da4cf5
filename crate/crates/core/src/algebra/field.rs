//! Polynomial vector fields tangent to the unit sphere.

use std::cmp::Reverse;
use std::collections::BTreeMap;
use std::fmt;

use num_rational::BigRational;
use num_traits::Zero;

use super::poly::{Exponents, SpherePolynomial};
use crate::error::{Error, Result};

/// Coordinate of a field in the sparse component basis: higher degree sorts
/// first, then component index, then exponents.
pub type FieldKey = (Reverse<usize>, usize, Exponents);

/// `Σ V^s ∂/∂y^s` restricted to `S^{n-1}`, with canonical components.
#[derive(Clone, PartialEq, Eq, Hash)]
pub struct SphereVectorField {
    comps: Vec<SpherePolynomial>,
}

impl SphereVectorField {
    /// Builds a field, rejecting components that are not tangent.
    pub fn new(comps: Vec<SpherePolynomial>) -> Result<Self> {
        let f = Self::from_components(comps);
        if !f.is_tangent() {
            return Err(Error::InvalidArgument(format!(
                "field {f} is not tangent to the sphere"
            )));
        }
        Ok(f)
    }

    pub(crate) fn from_components(comps: Vec<SpherePolynomial>) -> Self {
        assert!(!comps.is_empty(), "field needs components");
        let n = comps.len();
        assert!(comps.iter().all(|c| c.nvars() == n), "component ring mismatch");
        Self { comps }
    }

    pub fn zero(n: usize) -> Self {
        Self {
            comps: vec![SpherePolynomial::zero(n); n],
        }
    }

    pub fn dim(&self) -> usize {
        self.comps.len()
    }

    pub fn components(&self) -> &[SpherePolynomial] {
        &self.comps
    }

    pub fn is_zero(&self) -> bool {
        self.comps.iter().all(SpherePolynomial::is_zero)
    }

    /// `Σ y^s V^s = 0` in the sphere ring.
    pub fn is_tangent(&self) -> bool {
        let n = self.dim();
        let mut acc = SpherePolynomial::zero(n);
        for (s, c) in self.comps.iter().enumerate() {
            acc = &acc + &(&SpherePolynomial::var(n, s) * c);
        }
        acc.is_zero()
    }

    /// Largest component degree minus one, so rotations have degree 0.
    pub fn degree(&self) -> Option<usize> {
        self.comps
            .iter()
            .filter_map(SpherePolynomial::degree)
            .max()
            .map(|d| d.saturating_sub(1))
    }

    pub fn add(&self, other: &Self) -> Self {
        Self::from_components(self.comps.iter().zip(&other.comps).map(|(a, b)| a + b).collect())
    }

    pub fn sub(&self, other: &Self) -> Self {
        Self::from_components(self.comps.iter().zip(&other.comps).map(|(a, b)| a - b).collect())
    }

    pub fn neg(&self) -> Self {
        Self::from_components(self.comps.iter().map(|a| -a).collect())
    }

    pub fn scale(&self, c: &BigRational) -> Self {
        Self::from_components(self.comps.iter().map(|a| a.scale(c)).collect())
    }

    /// Pointwise product with a function on the sphere.
    pub fn mul_poly(&self, f: &SpherePolynomial) -> Self {
        Self::from_components(self.comps.iter().map(|a| a * f).collect())
    }

    /// Applies the field to a function: `Σ V^s ∂f/∂y^s`.
    pub fn apply(&self, f: &SpherePolynomial) -> SpherePolynomial {
        let n = self.dim();
        let mut acc = SpherePolynomial::zero(n);
        for (s, v) in self.comps.iter().enumerate() {
            if !v.is_zero() {
                acc = &acc + &(v * &f.derivative(s));
            }
        }
        acc
    }

    pub fn eval(&self, y: &[f64]) -> Vec<f64> {
        self.comps.iter().map(|c| c.eval(y)).collect()
    }

    /// Sparse coordinates in the component basis.
    pub fn coordinates(&self) -> BTreeMap<FieldKey, BigRational> {
        let mut out = BTreeMap::new();
        for (s, c) in self.comps.iter().enumerate() {
            for (e, v) in c.terms() {
                if !v.is_zero() {
                    out.insert((Reverse(super::poly::total_degree(e)), s, e.clone()), v.clone());
                }
            }
        }
        out
    }

    pub fn from_coordinates(n: usize, coords: &BTreeMap<FieldKey, BigRational>) -> Self {
        let mut comps: Vec<BTreeMap<Exponents, BigRational>> = vec![BTreeMap::new(); n];
        for ((_, s, e), v) in coords {
            comps[*s].insert(e.clone(), v.clone());
        }
        Self::from_components(
            comps
                .into_iter()
                .map(|t| SpherePolynomial::from_ambient(n, t))
                .collect(),
        )
    }
}

/// `[V, W]^i = Σ_s (V^s ∂W^i/∂y^s − W^s ∂V^i/∂y^s)`.
///
/// Computed on the canonical representatives in the ambient ring and then
/// reduced; for tangent fields the restriction does not depend on the
/// representative. A non-tangent result is reported as an internal error.
pub fn lie_bracket(v: &SphereVectorField, w: &SphereVectorField) -> Result<SphereVectorField> {
    if v.dim() != w.dim() {
        return Err(Error::InvalidArgument("fields over different spheres".into()));
    }
    let comps = (0..v.dim())
        .map(|i| &v.apply(&w.comps[i]) - &w.apply(&v.comps[i]))
        .collect();
    let out = SphereVectorField::from_components(comps);
    if !out.is_tangent() {
        return Err(Error::Internal(format!("bracket {out} is not tangent")));
    }
    Ok(out)
}

impl fmt::Display for SphereVectorField {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "(")?;
        for (i, c) in self.comps.iter().enumerate() {
            if i > 0 {
                write!(f, ", ")?;
            }
            write!(f, "{c}")?;
        }
        write!(f, ")")
    }
}

impl fmt::Debug for SphereVectorField {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "SphereVectorField{self}")
    }
}

#[cfg(test)]
mod tests {
    use super::super::poly::integer;
    use super::*;

    fn y(n: usize, i: usize) -> SpherePolynomial {
        SpherePolynomial::var(n, i)
    }

    fn rot(n: usize, i: usize, j: usize) -> SphereVectorField {
        let mut c = vec![SpherePolynomial::zero(n); n];
        c[j] = y(n, i);
        c[i] = -y(n, j);
        SphereVectorField::new(c).unwrap()
    }

    #[test]
    fn radial_field_is_not_tangent() {
        let n = 3;
        assert!(SphereVectorField::new((0..n).map(|i| y(n, i)).collect()).is_err());
    }

    #[test]
    fn rotations_close_under_bracket() {
        let n = 3;
        let b = lie_bracket(&rot(n, 0, 1), &rot(n, 1, 2)).unwrap();
        assert_eq!(b, rot(n, 0, 2));
        assert!(lie_bracket(&rot(n, 0, 1), &rot(n, 0, 1)).unwrap().is_zero());
    }

    #[test]
    fn coordinates_round_trip() {
        let n = 3;
        let f = rot(n, 0, 2).mul_poly(&(&y(n, 1) * &y(n, 2))).scale(&integer(5));
        let back = SphereVectorField::from_coordinates(n, &f.coordinates());
        assert_eq!(back, f);
        assert_eq!(f.degree(), Some(2));
        assert!(f.is_tangent());
    }
}

//! Closed-form Finsler norms and their exact derivatives.

use std::f64::consts::FRAC_PI_2;
use std::fmt;

use nalgebra::{DMatrix, SymmetricEigen};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::jet::{Jet, JetSpace, Scalar};

/// Points closer than this to the unit sphere are rejected by the Funk metric.
pub const FUNK_BOUNDARY_GUARD: f64 = 1e-9;

/// Largest supported derivative orders of [`directional_derivatives`].
pub const MAX_ORDER_X: usize = 2;
pub const MAX_ORDER_Y: usize = 3;

/// Manifold coordinates `x^i`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Point(pub Vec<f64>);

/// Fiber coordinates `y^i` of a tangent vector.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TangentVector(pub Vec<f64>);

macro_rules! coords_newtype {
    ($ty:ident) => {
        impl $ty {
            pub fn new(coords: Vec<f64>) -> Self {
                Self(coords)
            }

            pub fn zeros(n: usize) -> Self {
                Self(vec![0.0; n])
            }

            /// `i`-th unit vector in dimension `n`.
            pub fn basis(n: usize, i: usize) -> Self {
                let mut v = vec![0.0; n];
                v[i] = 1.0;
                Self(v)
            }

            pub fn dim(&self) -> usize {
                self.0.len()
            }

            pub fn coords(&self) -> &[f64] {
                &self.0
            }

            /// Euclidean length of the coordinate vector.
            pub fn euclidean_norm(&self) -> f64 {
                self.0.iter().map(|v| v * v).sum::<f64>().sqrt()
            }

            pub fn scaled(&self, t: f64) -> Self {
                Self(self.0.iter().map(|v| v * t).collect())
            }
        }

        impl From<Vec<f64>> for $ty {
            fn from(v: Vec<f64>) -> Self {
                Self(v)
            }
        }
    };
}

coords_newtype!(Point);
coords_newtype!(TangentVector);

/// The closed-form norms this crate knows how to differentiate.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum MetricKind {
    Euclidean,
    /// Standard Funk metric on the open unit ball; `sign` is `+1` or `-1`.
    Funk { sign: i8 },
    /// Bryant–Shen metric with parameter `|alpha| < π/2`.
    BryantShen { alpha: f64 },
    /// `factor · base`.
    Scaled { base: Box<MetricKind>, factor: f64 },
}

impl MetricKind {
    fn validate(&self) -> Result<()> {
        match self {
            MetricKind::Euclidean => Ok(()),
            MetricKind::Funk { sign } if *sign == 1 || *sign == -1 => Ok(()),
            MetricKind::Funk { sign } => Err(Error::InvalidArgument(format!(
                "Funk sign must be +1 or -1, got {sign}"
            ))),
            MetricKind::BryantShen { alpha } if alpha.is_finite() && alpha.abs() < FRAC_PI_2 => {
                Ok(())
            }
            MetricKind::BryantShen { alpha } => Err(Error::InvalidArgument(format!(
                "Bryant–Shen parameter must satisfy |alpha| < π/2, got {alpha}"
            ))),
            MetricKind::Scaled { base, factor } => {
                if !(factor.is_finite() && *factor > 0.0) {
                    return Err(Error::InvalidArgument(format!(
                        "scale factor must be positive, got {factor}"
                    )));
                }
                base.validate()
            }
        }
    }

    fn flag_curvature(&self) -> f64 {
        match self {
            MetricKind::Euclidean => 0.0,
            MetricKind::Funk { .. } => -0.25,
            MetricKind::BryantShen { .. } => 1.0,
            MetricKind::Scaled { base, factor } => base.flag_curvature() / (factor * factor),
        }
    }

    fn origin_constants(&self) -> (f64, f64) {
        match self {
            MetricKind::Euclidean => (1.0, 0.0),
            MetricKind::Funk { sign } => (1.0, 0.5 * *sign as f64),
            MetricKind::BryantShen { alpha } => (alpha.cos(), alpha.sin()),
            MetricKind::Scaled { base, factor } => {
                let (c1, c2) = base.origin_constants();
                (factor * c1, c2)
            }
        }
    }

    fn check_point(&self, x: &[f64]) -> Result<()> {
        match self {
            MetricKind::Funk { .. } => {
                let r = x.iter().map(|v| v * v).sum::<f64>().sqrt();
                if r >= 1.0 - FUNK_BOUNDARY_GUARD {
                    return Err(Error::Domain(format!(
                        "Funk metric requires |x| < 1 - {FUNK_BOUNDARY_GUARD:e}, got |x| = {r}"
                    )));
                }
                Ok(())
            }
            MetricKind::Scaled { base, .. } => base.check_point(x),
            MetricKind::Euclidean | MetricKind::BryantShen { .. } => Ok(()),
        }
    }

    fn norm<S: Scalar>(&self, x: &[S], y: &[S]) -> Result<S> {
        let dot = |a: &[S], b: &[S]| -> S {
            let mut acc = a[0].clone() * b[0].clone();
            for (p, q) in a.iter().zip(b).skip(1) {
                acc = acc + p.clone() * q.clone();
            }
            acc
        };
        match self {
            MetricKind::Euclidean => Ok(dot(y, y).sqrt()),
            MetricKind::Funk { sign } => {
                let (xx, yy, xy) = (dot(x, x), dot(y, y), dot(x, y));
                let radicand = yy.clone() - (xx.clone() * yy - xy.clone() * xy.clone());
                let denom = -(xx - 1.0);
                Ok((radicand.sqrt() + xy * (*sign as f64)) / denom)
            }
            MetricKind::BryantShen { alpha } => {
                let (c2a, s2a) = ((2.0 * alpha).cos(), (2.0 * alpha).sin());
                let (xx, yy, xy) = (dot(x, x), dot(y, y), dot(x, y));
                let b = yy.clone() * c2a + xx.clone() * yy.clone() - xy.clone() * xy.clone();
                let twist = yy * s2a;
                let a = b.clone() * b.clone() + twist.clone() * twist;
                let c = xy * s2a;
                let d = xx.clone() * xx.clone() + xx * (2.0 * c2a) + 1.0;
                let root_a = a.sqrt();
                let inner = root_a + b;
                // √A ≥ |B| by construction; anything else is a rounding artifact
                // far beyond what the principal branch tolerates.
                if inner.value() < -1e-12 * (1.0 + inner.value().abs()) {
                    return Err(Error::Internal(format!(
                        "Bryant–Shen radicand √A + B is negative ({})",
                        inner.value()
                    )));
                }
                let ratio = c / d.clone();
                let outer = inner / (d * 2.0) + ratio.clone() * ratio.clone();
                Ok(outer.sqrt() + ratio)
            }
            MetricKind::Scaled { base, factor } => Ok(base.norm(x, y)? * *factor),
        }
    }
}

impl fmt::Display for MetricKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            MetricKind::Euclidean => write!(f, "euclidean"),
            MetricKind::Funk { sign } => write!(f, "funk({})", if *sign > 0 { "+" } else { "-" }),
            MetricKind::BryantShen { alpha } => write!(f, "bryant-shen(alpha={alpha})"),
            MetricKind::Scaled { base, factor } => write!(f, "{factor}*{base}"),
        }
    }
}

/// A closed-form Finsler metric in a fixed dimension.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FinslerMetricSpec {
    kind: MetricKind,
    dim: usize,
}

impl FinslerMetricSpec {
    pub fn new(kind: MetricKind, dim: usize) -> Result<Self> {
        if dim < 2 {
            return Err(Error::InvalidArgument(format!(
                "dimension must be at least 2, got {dim}"
            )));
        }
        kind.validate()?;
        Ok(Self { kind, dim })
    }

    pub fn euclidean(dim: usize) -> Result<Self> {
        Self::new(MetricKind::Euclidean, dim)
    }

    /// The `+` Funk metric.
    pub fn funk(dim: usize) -> Result<Self> {
        Self::funk_with_sign(dim, 1)
    }

    pub fn funk_with_sign(dim: usize, sign: i8) -> Result<Self> {
        Self::new(MetricKind::Funk { sign }, dim)
    }

    pub fn bryant_shen(dim: usize, alpha: f64) -> Result<Self> {
        Self::new(MetricKind::BryantShen { alpha }, dim)
    }

    pub fn scaled(&self, factor: f64) -> Result<Self> {
        Self::new(
            MetricKind::Scaled {
                base: Box::new(self.kind.clone()),
                factor,
            },
            self.dim,
        )
    }

    pub fn kind(&self) -> &MetricKind {
        &self.kind
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    /// The flag curvature these metrics are known to have everywhere.
    pub fn flag_curvature(&self) -> f64 {
        self.kind.flag_curvature()
    }

    /// `(c1, c2)` with `F(0, y) = c1 |y|` and `P(0, y) = c2 |y|`.
    pub fn origin_constants(&self) -> (f64, f64) {
        self.kind.origin_constants()
    }

    /// The constant multiple of `self` whose norm at the origin is exactly
    /// the Euclidean norm. Parallel transport and the spray are unchanged by
    /// the rescaling; the flag curvature picks up a factor `1 / c1²`.
    pub fn normalized_at_origin(&self) -> Result<Self> {
        let (c1, _) = self.origin_constants();
        if (c1 - 1.0).abs() < 1e-15 {
            return Ok(self.clone());
        }
        self.scaled(1.0 / c1)
    }

    pub fn check_point(&self, x: &Point) -> Result<()> {
        self.check_dims(x.coords(), None)?;
        self.kind.check_point(x.coords())
    }

    fn check_dims(&self, x: &[f64], y: Option<&[f64]>) -> Result<()> {
        if x.len() != self.dim || y.is_some_and(|y| y.len() != self.dim) {
            return Err(Error::InvalidArgument(format!(
                "expected {}-dimensional coordinates",
                self.dim
            )));
        }
        if x.iter().chain(y.unwrap_or(&[])).any(|v| !v.is_finite()) {
            return Err(Error::InvalidArgument("non-finite coordinate".into()));
        }
        Ok(())
    }

    /// Validates `(x, y)` for operations that need `y` in the slit tangent bundle.
    pub(crate) fn check_slit(&self, x: &[f64], y: &[f64]) -> Result<()> {
        self.check_dims(x, Some(y))?;
        self.kind.check_point(x)?;
        if y.iter().all(|&v| v == 0.0) {
            return Err(Error::Degenerate("tangent vector y is zero".into()));
        }
        Ok(())
    }

    /// Norm evaluated over any scalar type. Domain checks use base values.
    pub fn norm_generic<S: Scalar>(&self, x: &[S], y: &[S]) -> Result<S> {
        let xv: Vec<f64> = x.iter().map(Scalar::value).collect();
        let yv: Vec<f64> = y.iter().map(Scalar::value).collect();
        self.check_slit(&xv, &yv)?;
        self.kind.norm(x, y)
    }

    /// Jet of `F` (or `F²`) around `(x, y)` truncated at `(cap_x, cap_y)`.
    pub(crate) fn norm_jet(
        &self,
        x: &[f64],
        y: &[f64],
        cap_x: usize,
        cap_y: usize,
        quantity: NormQuantity,
    ) -> Result<Jet> {
        let space = JetSpace::get(self.dim, cap_x, cap_y);
        let (xs, ys) = space.seed(x, y);
        let f = self.norm_generic(&xs, &ys)?;
        Ok(match quantity {
            NormQuantity::Norm => f,
            NormQuantity::NormSquared => &f * &f,
        })
    }
}

/// `F(x, y)`.
pub fn eval_norm(metric: &FinslerMetricSpec, x: &Point, y: &TangentVector) -> Result<f64> {
    metric.norm_generic(x.coords(), y.coords())
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum NormQuantity {
    Norm,
    NormSquared,
}

/// All partial derivatives of `F` (or `F²`) at a point up to the requested
/// orders in `x` and `y`.
#[derive(Debug, Clone)]
pub struct DerivativeTensor {
    jet: Jet,
    order_x: usize,
    order_y: usize,
}

impl DerivativeTensor {
    /// `∂^{|a|+|b|} / ∂x^{a_1} … ∂y^{b_1} …` where `x_indices` and `y_indices`
    /// list the differentiation variables (repetition allowed).
    pub fn partial(&self, x_indices: &[usize], y_indices: &[usize]) -> Result<f64> {
        if x_indices.len() > self.order_x || y_indices.len() > self.order_y {
            return Err(Error::Capability {
                order_x: x_indices.len(),
                order_y: y_indices.len(),
                max_x: self.order_x,
                max_y: self.order_y,
            });
        }
        let n = self.jet.space().dim();
        let mut ex = vec![0u8; n];
        let mut ey = vec![0u8; n];
        for &i in x_indices {
            *ex.get_mut(i).ok_or_else(|| bad_index(i, n))? += 1;
        }
        for &i in y_indices {
            *ey.get_mut(i).ok_or_else(|| bad_index(i, n))? += 1;
        }
        Ok(self.jet.partial(&ex, &ey))
    }

    pub fn value(&self) -> f64 {
        self.jet.value()
    }

    /// Gradient in `x`.
    pub fn grad_x(&self) -> Result<Vec<f64>> {
        (0..self.jet.space().dim()).map(|i| self.partial(&[i], &[])).collect()
    }

    /// Gradient in `y`.
    pub fn grad_y(&self) -> Result<Vec<f64>> {
        (0..self.jet.space().dim()).map(|i| self.partial(&[], &[i])).collect()
    }
}

fn bad_index(i: usize, n: usize) -> Error {
    Error::InvalidArgument(format!("coordinate index {i} out of range for dimension {n}"))
}

pub fn directional_derivatives(
    metric: &FinslerMetricSpec,
    x: &Point,
    y: &TangentVector,
    order_x: usize,
    order_y: usize,
    quantity: NormQuantity,
) -> Result<DerivativeTensor> {
    if order_x > MAX_ORDER_X || order_y > MAX_ORDER_Y {
        return Err(Error::Capability {
            order_x,
            order_y,
            max_x: MAX_ORDER_X,
            max_y: MAX_ORDER_Y,
        });
    }
    let jet = metric.norm_jet(x.coords(), y.coords(), order_x, order_y, quantity)?;
    Ok(DerivativeTensor {
        jet,
        order_x,
        order_y,
    })
}

/// `g_ij(x, y) = ½ ∂²F²/∂y^i∂y^j`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct FundamentalTensor {
    pub g: Vec<Vec<f64>>,
}

impl FundamentalTensor {
    pub(crate) fn from_norm_squared(f2: &Jet) -> Self {
        let n = f2.space().dim();
        let mut g = vec![vec![0.0; n]; n];
        for i in 0..n {
            for j in i..n {
                let mut e = vec![0u8; n];
                e[i] += 1;
                e[j] += 1;
                let v = 0.5 * f2.partial(&vec![0u8; n], &e);
                g[i][j] = v;
                g[j][i] = v;
            }
        }
        Self { g }
    }

    pub fn dim(&self) -> usize {
        self.g.len()
    }

    /// `g(u, v)`.
    pub fn apply(&self, u: &[f64], v: &[f64]) -> f64 {
        self.g
            .iter()
            .zip(u)
            .map(|(row, ui)| ui * row.iter().zip(v).map(|(gij, vj)| gij * vj).sum::<f64>())
            .sum()
    }

    /// `g_jm y^m`.
    pub fn lower(&self, y: &[f64]) -> Vec<f64> {
        self.g
            .iter()
            .map(|row| row.iter().zip(y).map(|(a, b)| a * b).sum())
            .collect()
    }

    pub fn eigenvalues(&self) -> Vec<f64> {
        let n = self.dim();
        let m = DMatrix::from_fn(n, n, |i, j| self.g[i][j]);
        let mut ev: Vec<f64> = SymmetricEigen::new(m).eigenvalues.iter().copied().collect();
        ev.sort_by(f64::total_cmp);
        ev
    }

    pub fn is_positive_definite(&self) -> bool {
        self.eigenvalues().first().is_some_and(|&l| l > 0.0)
    }

    /// Ratio of extreme eigenvalues; infinite when not positive definite.
    pub fn condition_number(&self) -> f64 {
        let ev = self.eigenvalues();
        match (ev.first(), ev.last()) {
            (Some(&lo), Some(&hi)) if lo > 0.0 => hi / lo,
            _ => f64::INFINITY,
        }
    }
}

pub fn fundamental_tensor(
    metric: &FinslerMetricSpec,
    x: &Point,
    y: &TangentVector,
) -> Result<FundamentalTensor> {
    let f2 = metric.norm_jet(x.coords(), y.coords(), 0, 2, NormQuantity::NormSquared)?;
    Ok(FundamentalTensor::from_norm_squared(&f2))
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::{FRAC_PI_4, FRAC_PI_6};

    fn p(v: &[f64]) -> Point {
        Point::new(v.to_vec())
    }
    fn t(v: &[f64]) -> TangentVector {
        TangentVector::new(v.to_vec())
    }

    #[test]
    fn euclidean_norm_is_pythagorean() {
        let m = FinslerMetricSpec::euclidean(2).unwrap();
        assert_eq!(eval_norm(&m, &p(&[0.3, -7.0]), &t(&[3.0, 4.0])).unwrap(), 5.0);
    }

    #[test]
    fn funk_and_bryant_shen_at_origin() {
        let y = t(&[0.3, -1.2, 0.4]);
        let origin = Point::zeros(3);
        for sign in [1, -1] {
            let m = FinslerMetricSpec::funk_with_sign(3, sign).unwrap();
            let f = eval_norm(&m, &origin, &y).unwrap();
            assert!((f - y.euclidean_norm()).abs() < 1e-15);
        }
        for alpha in [FRAC_PI_6, FRAC_PI_4, -0.3] {
            let m = FinslerMetricSpec::bryant_shen(3, alpha).unwrap();
            let f = eval_norm(&m, &origin, &y).unwrap();
            assert!((f - y.euclidean_norm() * alpha.cos()).abs() < 1e-14);
        }
    }

    #[test]
    fn domain_and_degeneracy_errors() {
        let m = FinslerMetricSpec::funk(2).unwrap();
        assert!(matches!(
            eval_norm(&m, &p(&[1.0, 0.0]), &t(&[1.0, 0.0])),
            Err(Error::Domain(_))
        ));
        assert!(matches!(
            eval_norm(&m, &p(&[0.0, 1.0 - 1e-10]), &t(&[1.0, 0.0])),
            Err(Error::Domain(_))
        ));
        assert!(matches!(
            eval_norm(&m, &p(&[0.1, 0.0]), &t(&[0.0, 0.0])),
            Err(Error::Degenerate(_))
        ));
        assert!(FinslerMetricSpec::bryant_shen(2, 2.0).is_err());
        assert!(FinslerMetricSpec::funk_with_sign(2, 0).is_err());
        assert!(FinslerMetricSpec::euclidean(1).is_err());
        assert!(FinslerMetricSpec::funk(2).unwrap().scaled(-1.0).is_err());
    }

    #[test]
    fn scaled_norm_is_exact_multiple() {
        let base = FinslerMetricSpec::bryant_shen(3, 0.4).unwrap();
        let scaled = base.scaled(2.5).unwrap();
        let (x, y) = (p(&[0.1, 0.2, -0.3]), t(&[1.0, 0.5, 0.25]));
        assert_eq!(
            eval_norm(&scaled, &x, &y).unwrap(),
            eval_norm(&base, &x, &y).unwrap() * 2.5
        );
        assert!((scaled.flag_curvature() - 1.0 / 6.25).abs() < 1e-15);
    }

    #[test]
    fn euclidean_derivatives() {
        let m = FinslerMetricSpec::euclidean(3).unwrap();
        let y = t(&[1.0, 2.0, -2.0]);
        let d = directional_derivatives(&m, &p(&[0.2, 0.1, 0.0]), &y, 1, 1, NormQuantity::Norm)
            .unwrap();
        for (i, g) in d.grad_x().unwrap().iter().enumerate() {
            assert_eq!(*g, 0.0, "dF/dx^{i}");
        }
        for (gy, yi) in d.grad_y().unwrap().iter().zip(y.coords()) {
            assert!((gy - yi / 3.0).abs() < 1e-15);
        }
    }

    #[test]
    fn unsupported_order_is_a_capability_error() {
        let m = FinslerMetricSpec::euclidean(2).unwrap();
        let (x, y) = (p(&[0.0, 0.0]), t(&[1.0, 0.0]));
        let err = directional_derivatives(&m, &x, &y, 3, 0, NormQuantity::Norm).unwrap_err();
        assert!(matches!(err, Error::Capability { .. }));
        let d = directional_derivatives(&m, &x, &y, 1, 1, NormQuantity::Norm).unwrap();
        assert!(matches!(d.partial(&[0, 1], &[]), Err(Error::Capability { .. })));
    }

    #[test]
    fn euclidean_fundamental_tensor_is_identity() {
        let m = FinslerMetricSpec::euclidean(3).unwrap();
        let g = fundamental_tensor(&m, &p(&[0.5, 0.0, 1.0]), &t(&[0.1, -3.0, 2.0])).unwrap();
        for i in 0..3 {
            for j in 0..3 {
                let e = if i == j { 1.0 } else { 0.0 };
                assert!((g.g[i][j] - e).abs() < 1e-14);
            }
        }
    }

    #[test]
    fn metric_kind_round_trips_through_json() {
        let m = FinslerMetricSpec::bryant_shen(3, 0.5).unwrap().scaled(2.0).unwrap();
        let s = serde_json::to_string(&m).unwrap();
        let back: FinslerMetricSpec = serde_json::from_str(&s).unwrap();
        assert_eq!(back, m);
    }
}

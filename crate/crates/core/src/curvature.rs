//! Riemann curvature of the nonlinear connection, the constant flag curvature
//! law, curvature vector fields and their covariant derivatives.

use rayon::prelude::*;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::jet::{Jet, Scalar};
use crate::metric::{FinslerMetricSpec, FundamentalTensor, Point, TangentVector};
use crate::spray::{berwald_derivative_jets, spray_jets, FieldFirstOrder, VerticalField};

/// `R^i_jk(x, y)`, indexed `r[i][j][k]`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CurvatureValue {
    pub r: Vec<Vec<Vec<f64>>>,
    /// Pointwise least-squares fit of `λ` in `R = λ T`.
    pub lambda_estimate: Option<f64>,
}

impl CurvatureValue {
    pub fn max_abs(&self) -> f64 {
        max_abs3(&self.r)
    }

    /// Largest `|R^i_jk + R^i_kj|`.
    pub fn antisymmetry_defect(&self) -> f64 {
        let n = self.r.len();
        let mut worst = 0.0f64;
        for i in 0..n {
            for j in 0..n {
                for k in 0..n {
                    worst = worst.max((self.r[i][j][k] + self.r[i][k][j]).abs());
                }
            }
        }
        worst
    }
}

pub(crate) fn max_abs3(t: &[Vec<Vec<f64>>]) -> f64 {
    t.iter().flatten().flatten().fold(0.0f64, |m, v| m.max(v.abs()))
}

type Tensor3<T> = Vec<Vec<Vec<T>>>;

/// Spray jets valid to `(rx + 1, ry + 2)` and curvature jets valid to `(rx, ry)`.
pub(crate) fn curvature_jets(
    metric: &FinslerMetricSpec,
    x: &[f64],
    y: &[f64],
    rx: usize,
    ry: usize,
) -> Result<(Vec<Jet>, Tensor3<Jet>, FundamentalTensor)> {
    let (spray, tensor) = spray_jets(metric, x, y, rx + 1, ry + 2)?;
    let n = spray.len();
    let gj: Vec<Vec<Jet>> = spray
        .iter()
        .map(|gi| (0..n).map(|j| gi.d_dy(j)).collect())
        .collect();
    let gjk: Tensor3<Jet> = gj
        .iter()
        .map(|row| row.iter().map(|g| (0..n).map(|k| g.d_dy(k)).collect()).collect())
        .collect();
    // dgj[i][j][k] = ∂G^i_j/∂x^k
    let dgj: Tensor3<Jet> = gj
        .iter()
        .map(|row| row.iter().map(|g| (0..n).map(|k| g.d_dx(k)).collect()).collect())
        .collect();

    let mut r: Tensor3<Option<Jet>> = vec![vec![vec![None; n]; n]; n];
    for i in 0..n {
        for j in 0..n {
            r[i][j][j] = Some(Jet::constant(spray[0].space(), 0.0));
            for k in j + 1..n {
                let mut v = &dgj[i][j][k] - &dgj[i][k][j];
                for m in 0..n {
                    v = &v + &(&gj[m][j] * &gjk[i][k][m]);
                    v = &v - &(&gj[m][k] * &gjk[i][j][m]);
                }
                r[i][k][j] = Some(-v.clone());
                r[i][j][k] = Some(v);
            }
        }
    }
    let r = r
        .into_iter()
        .map(|a| {
            a.into_iter()
                .map(|b| b.into_iter().map(|v| v.expect("filled")).collect())
                .collect()
        })
        .collect();
    Ok((spray, r, tensor))
}

fn values3(t: &Tensor3<Jet>) -> Tensor3<f64> {
    t.iter()
        .map(|a| a.iter().map(|b| b.iter().map(Scalar::value).collect()).collect())
        .collect()
}

/// `T^i_jk = δ^i_k y_j − δ^i_j y_k` with `y_j = g_jm y^m`.
pub fn constant_curvature_tensor(g: &FundamentalTensor, y: &[f64]) -> Tensor3<f64> {
    let n = y.len();
    let yl = g.lower(y);
    (0..n)
        .map(|i| {
            (0..n)
                .map(|j| {
                    (0..n)
                        .map(|k| {
                            let mut v = 0.0;
                            if i == k {
                                v += yl[j];
                            }
                            if i == j {
                                v -= yl[k];
                            }
                            v
                        })
                        .collect()
                })
                .collect()
        })
        .collect()
}

fn dot3(a: &Tensor3<f64>, b: &Tensor3<f64>) -> f64 {
    a.iter()
        .flatten()
        .flatten()
        .zip(b.iter().flatten().flatten())
        .map(|(u, v)| u * v)
        .sum()
}

fn curvature_and_model(
    metric: &FinslerMetricSpec,
    x: &[f64],
    y: &[f64],
) -> Result<(Tensor3<f64>, Tensor3<f64>)> {
    let (_, r, tensor) = curvature_jets(metric, x, y, 0, 0)?;
    Ok((values3(&r), constant_curvature_tensor(&tensor, y)))
}

pub fn riemann_curvature(
    metric: &FinslerMetricSpec,
    x: &Point,
    y: &TangentVector,
) -> Result<CurvatureValue> {
    let (r, t) = curvature_and_model(metric, x.coords(), y.coords())?;
    let tt = dot3(&t, &t);
    let lambda_estimate = (tt > 0.0).then(|| dot3(&r, &t) / tt);
    Ok(CurvatureValue { r, lambda_estimate })
}

/// `max |R^i_jk − λ T^i_jk|` at `(x, y)`.
pub fn flag_curvature_residual(
    metric: &FinslerMetricSpec,
    x: &Point,
    y: &TangentVector,
    lambda: f64,
) -> Result<f64> {
    let (r, t) = curvature_and_model(metric, x.coords(), y.coords())?;
    Ok(residual(&r, &t, lambda))
}

fn residual(r: &Tensor3<f64>, t: &Tensor3<f64>, lambda: f64) -> f64 {
    r.iter()
        .flatten()
        .flatten()
        .zip(t.iter().flatten().flatten())
        .fold(0.0f64, |m, (a, b)| m.max((a - lambda * b).abs()))
}

/// Result of fitting one `λ` to a set of samples.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct FlagCurvatureFit {
    pub lambda: f64,
    /// Largest `max|R − λT| / max|R|` over the samples (absolute when `R = 0`).
    pub max_relative_residual: f64,
    pub samples: usize,
}

/// Least-squares `λ = Σ R·T / Σ T·T` over all samples, with the worst residual.
pub fn fit_flag_curvature(
    metric: &FinslerMetricSpec,
    samples: &[(Point, TangentVector)],
) -> Result<FlagCurvatureFit> {
    if samples.is_empty() {
        return Err(Error::InvalidArgument("no samples to fit".into()));
    }
    let tensors: Vec<(Tensor3<f64>, Tensor3<f64>)> = samples
        .par_iter()
        .map(|(x, y)| curvature_and_model(metric, x.coords(), y.coords()))
        .collect::<Result<_>>()?;
    let (num, den) = tensors
        .iter()
        .fold((0.0, 0.0), |(a, b), (r, t)| (a + dot3(r, t), b + dot3(t, t)));
    let lambda = if den > 0.0 { num / den } else { 0.0 };
    let max_relative_residual = tensors.iter().fold(0.0f64, |m, (r, t)| {
        let scale = max_abs3(r);
        let res = residual(r, t, lambda);
        m.max(if scale > 0.0 { res / scale } else { res })
    });
    Ok(FlagCurvatureFit {
        lambda,
        max_relative_residual,
        samples: samples.len(),
    })
}

/// The curvature vector field `ξ_ij(y) = R^s_ij(x, y) ∂/∂y^s` at a fixed point.
#[derive(Debug, Clone)]
pub struct CurvatureField {
    metric: FinslerMetricSpec,
    x: Point,
    i: usize,
    j: usize,
}

pub fn curvature_vector_field(
    metric: &FinslerMetricSpec,
    x: &Point,
    i: usize,
    j: usize,
) -> Result<CurvatureField> {
    let n = metric.dim();
    if i >= n || j >= n {
        return Err(Error::InvalidArgument(format!(
            "index pair ({i}, {j}) out of range for dimension {n}"
        )));
    }
    metric.check_point(x)?;
    Ok(CurvatureField {
        metric: metric.clone(),
        x: x.clone(),
        i,
        j,
    })
}

impl CurvatureField {
    /// `i == j`, so the field vanishes identically.
    pub fn is_trivial(&self) -> bool {
        self.i == self.j
    }

    pub fn indices(&self) -> (usize, usize) {
        (self.i, self.j)
    }

    pub fn eval(&self, y: &TangentVector) -> Result<Vec<f64>> {
        if self.is_trivial() {
            return Ok(vec![0.0; self.metric.dim()]);
        }
        let (_, r, _) = curvature_jets(&self.metric, self.x.coords(), y.coords(), 0, 0)?;
        Ok((0..self.metric.dim()).map(|s| r[s][self.i][self.j].value()).collect())
    }
}

impl VerticalField for CurvatureField {
    fn first_order(&self, x: &Point, y: &TangentVector) -> Result<FieldFirstOrder> {
        let (_, r, _) = curvature_jets(&self.metric, x.coords(), y.coords(), 1, 1)?;
        let comps: Vec<Jet> = (0..self.metric.dim())
            .map(|s| r[s][self.i][self.j].clone())
            .collect();
        Ok(FieldFirstOrder::from_jets(&comps))
    }
}

/// Berwald derivatives of all curvature fields at `(x, y)`, indexed
/// `[k][i][j][s]` for `(∇_k ξ_ij)^s`.
pub fn curvature_field_derivatives(
    metric: &FinslerMetricSpec,
    x: &Point,
    y: &TangentVector,
) -> Result<Vec<Tensor3<f64>>> {
    let n = metric.dim();
    let (spray, r, _) = curvature_jets(metric, x.coords(), y.coords(), 1, 1)?;
    let mut out = vec![vec![vec![vec![0.0; n]; n]; n]; n];
    for i in 0..n {
        for j in i + 1..n {
            let field: Vec<Jet> = (0..n).map(|s| r[s][i][j].clone()).collect();
            for (k, slot) in out.iter_mut().enumerate() {
                let d = berwald_derivative_jets(&field, &spray, k);
                for s in 0..n {
                    slot[i][j][s] = d[s].value();
                    slot[j][i][s] = -d[s].value();
                }
            }
        }
    }
    Ok(out)
}

/// `max |∇_k ξ_ij − (G^s_ki ξ_sj + G^s_kj ξ_is)|` over all `i, j` and
/// components; vanishes when the curvature tensor is horizontally parallel.
pub fn nabla_r_residual(
    metric: &FinslerMetricSpec,
    x: &Point,
    y: &TangentVector,
    k: usize,
) -> Result<f64> {
    let n = metric.dim();
    if k >= n {
        return Err(Error::InvalidArgument(format!(
            "direction {k} out of range for dimension {n}"
        )));
    }
    let (spray, r, _) = curvature_jets(metric, x.coords(), y.coords(), 1, 1)?;
    // gkk[s][i] = G^s_ki
    let gk: Vec<Vec<f64>> = (0..n)
        .map(|s| {
            let gsk = spray[s].d_dy(k);
            (0..n).map(|i| gsk.dy_at(i)).collect()
        })
        .collect();
    let xi = |s: usize, i: usize, j: usize| r[s][i][j].value();
    let mut worst = 0.0f64;
    for i in 0..n {
        for j in i + 1..n {
            let field: Vec<Jet> = (0..n).map(|s| r[s][i][j].clone()).collect();
            let d = berwald_derivative_jets(&field, &spray, k);
            for (comp, dv) in d.iter().enumerate() {
                let rhs: f64 = (0..n)
                    .map(|s| gk[s][i] * xi(comp, s, j) + gk[s][j] * xi(comp, i, s))
                    .sum();
                worst = worst.max((dv.value() - rhs).abs());
            }
        }
    }
    Ok(worst)
}

/// `∇_m ∇_k ξ_ij` at `(x, y)`, with both derivatives taken in jet arithmetic.
pub fn second_covariant_derivative(
    metric: &FinslerMetricSpec,
    x: &Point,
    y: &TangentVector,
    m: usize,
    k: usize,
    i: usize,
    j: usize,
) -> Result<Vec<f64>> {
    let n = metric.dim();
    if [m, k, i, j].iter().any(|&v| v >= n) {
        return Err(Error::InvalidArgument(format!(
            "index out of range for dimension {n}"
        )));
    }
    let (spray, r, _) = curvature_jets(metric, x.coords(), y.coords(), 2, 2)?;
    let field: Vec<Jet> = (0..n).map(|s| r[s][i][j].clone()).collect();
    let first = berwald_derivative_jets(&field, &spray, k);
    let second = berwald_derivative_jets(&first, &spray, m);
    Ok(second.iter().map(Scalar::value).collect())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::spray::symmetric_point;

    fn p(v: &[f64]) -> Point {
        Point::new(v.to_vec())
    }
    fn t(v: &[f64]) -> TangentVector {
        TangentVector::new(v.to_vec())
    }

    #[test]
    fn euclidean_is_flat() {
        let m = FinslerMetricSpec::euclidean(3).unwrap();
        let cv = riemann_curvature(&m, &p(&[0.1, 0.0, 0.2]), &t(&[1.0, 2.0, 3.0])).unwrap();
        assert_eq!(cv.max_abs(), 0.0);
        assert_eq!(cv.lambda_estimate, Some(0.0));
        let res = flag_curvature_residual(&m, &p(&[0.0; 3]), &t(&[1.0, 0.0, 0.0]), 0.0).unwrap();
        assert_eq!(res, 0.0);
    }

    #[test]
    fn funk_origin_matches_rotation_form() {
        let m = FinslerMetricSpec::funk(3).unwrap();
        let y = [0.3, -0.8, 0.5];
        let cv = riemann_curvature(&m, &Point::zeros(3), &t(&y)).unwrap();
        let expected = symmetric_point::curvature(-0.25, &y);
        for l in 0..3 {
            for i in 0..3 {
                for j in 0..3 {
                    assert!((cv.r[l][i][j] - expected[l][i][j]).abs() < 1e-12);
                }
            }
        }
        assert!(cv.antisymmetry_defect() < 1e-14);
        assert!((cv.lambda_estimate.unwrap() + 0.25).abs() < 1e-12);
    }

    #[test]
    fn funk_component_at_unit_vector() {
        // R^2_12 at y = e1 equals λ = -1/4 (0-based: r[1][0][1])
        let m = FinslerMetricSpec::funk(3).unwrap();
        let cv = riemann_curvature(&m, &Point::zeros(3), &TangentVector::basis(3, 0)).unwrap();
        assert!((cv.r[1][0][1] + 0.25).abs() < 1e-13);
        let field = curvature_vector_field(&m, &Point::zeros(3), 0, 1).unwrap();
        let v = field.eval(&TangentVector::basis(3, 0)).unwrap();
        assert!((v[1] + 0.25).abs() < 1e-13);
        assert!(v[0].abs() < 1e-13 && v[2].abs() < 1e-13);
    }

    #[test]
    fn wrong_lambda_is_detected() {
        let m = FinslerMetricSpec::funk(3).unwrap();
        let (x, y) = (p(&[0.2, 0.1, -0.3]), t(&[0.5, 1.0, 0.2]));
        let scale = riemann_curvature(&m, &x, &y).unwrap().max_abs();
        let good = flag_curvature_residual(&m, &x, &y, -0.25).unwrap();
        let bad = flag_curvature_residual(&m, &x, &y, 0.25).unwrap();
        assert!(good <= 1e-9 * scale);
        assert!(bad >= 1e-2 * scale);
    }

    #[test]
    fn diagonal_field_is_trivial() {
        let m = FinslerMetricSpec::funk(2).unwrap();
        let f = curvature_vector_field(&m, &Point::zeros(2), 1, 1).unwrap();
        assert!(f.is_trivial());
        assert_eq!(f.eval(&t(&[1.0, 1.0])).unwrap(), vec![0.0, 0.0]);
    }

    #[test]
    fn curvature_is_parallel_for_funk() {
        let m = FinslerMetricSpec::funk(3).unwrap();
        for k in 0..3 {
            let r = nabla_r_residual(&m, &p(&[0.1, -0.2, 0.15]), &t(&[0.3, 0.4, -1.0]), k)
                .unwrap();
            assert!(r < 1e-9, "k={k}: {r}");
        }
    }
}

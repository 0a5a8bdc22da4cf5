//! Geodesic spray, nonlinear connection, projective factor and the horizontal
//! Berwald covariant derivative.

use serde::Serialize;

use crate::error::{Error, Result};
use crate::jet::{Jet, JetSpace, Scalar};
use crate::metric::{FinslerMetricSpec, FundamentalTensor, NormQuantity, Point, TangentVector};

/// Fundamental tensors with a larger condition number are treated as singular.
pub const MAX_CONDITION: f64 = 1e8;

/// Spray coefficients and their fiber derivatives at one `(x, y)`.
///
/// Index order follows the upper index first: `gj[i][j] = G^i_j`,
/// `gjk[i][j][k] = G^i_jk`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SprayData {
    pub g: Vec<f64>,
    pub gj: Vec<Vec<f64>>,
    pub gjk: Vec<Vec<Vec<f64>>>,
}

impl SprayData {
    fn from_jets(spray: &[Jet]) -> Self {
        let n = spray.len();
        let zero = vec![0u8; n];
        let mut g = vec![0.0; n];
        let mut gj = vec![vec![0.0; n]; n];
        let mut gjk = vec![vec![vec![0.0; n]; n]; n];
        for i in 0..n {
            g[i] = spray[i].value();
            for j in 0..n {
                gj[i][j] = spray[i].dy_at(j);
                for k in j..n {
                    let mut e = zero.clone();
                    e[j] += 1;
                    e[k] += 1;
                    let v = spray[i].partial(&zero, &e);
                    gjk[i][j][k] = v;
                    gjk[i][k][j] = v;
                }
            }
        }
        Self { g, gj, gjk }
    }

    /// Largest violation of `G^i_j y^j = 2 G^i` and `G^i_jk y^k = G^i_j`,
    /// relative to the size of the respective coefficients.
    pub fn homogeneity_residual(&self, y: &[f64]) -> f64 {
        let n = self.g.len();
        let scale_g = self.g.iter().fold(0.0f64, |m, v| m.max(v.abs())).max(1e-300);
        let scale_gj = self
            .gj
            .iter()
            .flatten()
            .fold(0.0f64, |m, v| m.max(v.abs()))
            .max(1e-300);
        let mut worst = 0.0f64;
        for i in 0..n {
            let lhs: f64 = (0..n).map(|j| self.gj[i][j] * y[j]).sum();
            worst = worst.max((lhs - 2.0 * self.g[i]).abs() / (2.0 * scale_g));
            for j in 0..n {
                let lhs: f64 = (0..n).map(|k| self.gjk[i][j][k] * y[k]).sum();
                worst = worst.max((lhs - self.gj[i][j]).abs() / scale_gj);
            }
        }
        worst
    }
}

/// Solves `a z = b` over jets by Gaussian elimination, pivoting on base values.
fn solve_jets(mut a: Vec<Vec<Jet>>, mut b: Vec<Jet>) -> Vec<Jet> {
    let n = b.len();
    for col in 0..n {
        let pivot = (col..n)
            .max_by(|&r, &s| a[r][col].value().abs().total_cmp(&a[s][col].value().abs()))
            .expect("non-empty column");
        a.swap(col, pivot);
        b.swap(col, pivot);
        let inv = a[col][col].recip();
        for row in col + 1..n {
            let factor = &a[row][col] * &inv;
            for k in col + 1..n {
                a[row][k] = &a[row][k] - &(&factor * &a[col][k]);
            }
            b[row] = &b[row] - &(&factor * &b[col]);
        }
    }
    let mut z: Vec<Option<Jet>> = vec![None; n];
    for row in (0..n).rev() {
        let mut acc = b[row].clone();
        for k in row + 1..n {
            acc = &acc - &(&a[row][k] * z[k].as_ref().expect("solved"));
        }
        z[row] = Some(&acc / &a[row][row]);
    }
    z.into_iter().map(|v| v.expect("solved")).collect()
}

/// Spray coefficients `G^i` as jets valid up to `(gx, gy)` around `(x, y)`,
/// together with the fundamental tensor at the base point.
///
/// `G^i = ¼ g^{il} (2 ∂g_jl/∂x^k − ∂g_jk/∂x^l) y^j y^k` is evaluated entirely
/// in jet arithmetic, so every derivative of `G` inside the valid box is exact
/// up to rounding.
pub(crate) fn spray_jets(
    metric: &FinslerMetricSpec,
    x: &[f64],
    y: &[f64],
    gx: usize,
    gy: usize,
) -> Result<(Vec<Jet>, FundamentalTensor)> {
    metric.check_slit(x, y)?;
    let n = metric.dim();
    let space = JetSpace::get(n, gx + 1, gy + 2);
    let (xs, ys) = space.seed(x, y);
    let f = metric.norm_generic(&xs, &ys)?;
    let f2 = &f * &f;

    let tensor = FundamentalTensor::from_norm_squared(&f2);
    let condition = tensor.condition_number();
    if !(condition <= MAX_CONDITION) {
        return Err(Error::SingularTensor { condition });
    }

    let grad: Vec<Jet> = (0..n).map(|i| f2.d_dy(i)).collect();
    let mut g: Vec<Vec<Option<Jet>>> = vec![vec![None; n]; n];
    for i in 0..n {
        for j in i..n {
            let gij = grad[i].d_dy(j) * 0.5;
            g[j][i] = Some(gij.clone());
            g[i][j] = Some(gij);
        }
    }
    let g: Vec<Vec<Jet>> = g
        .into_iter()
        .map(|row| row.into_iter().map(|v| v.expect("filled")).collect())
        .collect();
    // dg[k][j][l] = ∂g_jl / ∂x^k
    let dg: Vec<Vec<Vec<Jet>>> = (0..n)
        .map(|k| {
            (0..n)
                .map(|j| (0..n).map(|l| g[j][l].d_dx(k)).collect())
                .collect()
        })
        .collect();
    let contract = |v: &[Jet]| -> Jet {
        let mut acc = &v[0] * &ys[0];
        for (a, yk) in v.iter().zip(&ys).skip(1) {
            acc = &acc + &(a * yk);
        }
        acc
    };

    let mut rhs = Vec::with_capacity(n);
    for l in 0..n {
        // Σ_jk ∂g_jl/∂x^k y^j y^k
        let first_inner: Vec<Jet> = (0..n)
            .map(|j| contract(&(0..n).map(|k| dg[k][j][l].clone()).collect::<Vec<_>>()))
            .collect();
        let first = contract(&first_inner);
        // Σ_jk ∂g_jk/∂x^l y^j y^k
        let second_inner: Vec<Jet> = (0..n).map(|j| contract(&dg[l][j])).collect();
        let second = contract(&second_inner);
        rhs.push((first * 2.0 - second) * 0.25);
    }
    Ok((solve_jets(g, rhs), tensor))
}

/// Spray coefficients, nonlinear connection and Berwald coefficients at `(x, y)`.
pub fn spray(metric: &FinslerMetricSpec, x: &Point, y: &TangentVector) -> Result<SprayData> {
    let (jets, _) = spray_jets(metric, x.coords(), y.coords(), 0, 2)?;
    Ok(SprayData::from_jets(&jets))
}

/// `G^i(x, y)` only; the cheapest evaluation, used by the geodesic integrator.
pub(crate) fn spray_coefficients(metric: &FinslerMetricSpec, x: &[f64], y: &[f64]) -> Result<Vec<f64>> {
    let (jets, _) = spray_jets(metric, x, y, 0, 0)?;
    Ok(jets.iter().map(Scalar::value).collect())
}

/// `G^i_j(x, y)` only; the right-hand side of parallel transport.
pub(crate) fn connection_coefficients(
    metric: &FinslerMetricSpec,
    x: &[f64],
    y: &[f64],
) -> Result<Vec<Vec<f64>>> {
    let (jets, _) = spray_jets(metric, x, y, 0, 1)?;
    let n = jets.len();
    Ok((0..n)
        .map(|i| (0..n).map(|j| jets[i].dy_at(j)).collect())
        .collect())
}

/// `∂G^i_k/∂x^m` at `(x, y)`, indexed `[i][k][m]`.
pub fn connection_x_derivatives(
    metric: &FinslerMetricSpec,
    x: &Point,
    y: &TangentVector,
) -> Result<Vec<Vec<Vec<f64>>>> {
    let (jets, _) = spray_jets(metric, x.coords(), y.coords(), 1, 1)?;
    let n = jets.len();
    Ok((0..n)
        .map(|i| {
            let gk: Vec<Jet> = (0..n).map(|k| jets[i].d_dy(k)).collect();
            gk.iter()
                .map(|j| (0..n).map(|m| j.dx_at(m)).collect())
                .collect()
        })
        .collect())
}

/// Projective factor `P = (1 / 2F) ∂F/∂x^i y^i` and its x-gradient.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ProjectiveFactorValue {
    pub p: f64,
    pub dpdx: Vec<f64>,
}

fn projective_factor_jet(metric: &FinslerMetricSpec, x: &[f64], y: &[f64], cap_y: usize) -> Result<Jet> {
    let n = metric.dim();
    let space = JetSpace::get(n, 2, cap_y);
    let (xs, ys) = space.seed(x, y);
    let f = metric.norm_generic(&xs, &ys)?;
    let mut dfy = &f.d_dx(0) * &ys[0];
    for i in 1..n {
        dfy = &dfy + &(&f.d_dx(i) * &ys[i]);
    }
    Ok(&dfy / &(f * 2.0))
}

pub fn projective_factor(
    metric: &FinslerMetricSpec,
    x: &Point,
    y: &TangentVector,
) -> Result<ProjectiveFactorValue> {
    let pj = projective_factor_jet(metric, x.coords(), y.coords(), 0)?;
    Ok(ProjectiveFactorValue {
        p: pj.value(),
        dpdx: (0..metric.dim()).map(|m| pj.dx_at(m)).collect(),
    })
}

/// `max_m |∂P/∂x^m − ½ ∂(P² − λF²)/∂y^m|`, which vanishes for projective
/// metrics of constant flag curvature `λ`.
pub fn projective_factor_identity_residual(
    metric: &FinslerMetricSpec,
    x: &Point,
    y: &TangentVector,
    lambda: f64,
) -> Result<f64> {
    let pj = projective_factor_jet(metric, x.coords(), y.coords(), 1)?;
    let f = metric.norm_jet(x.coords(), y.coords(), 2, 1, NormQuantity::Norm)?;
    let mut worst = 0.0f64;
    for m in 0..metric.dim() {
        let rhs = pj.value() * pj.dy_at(m) - lambda * f.value() * f.dy_at(m);
        worst = worst.max((pj.dx_at(m) - rhs).abs());
    }
    Ok(worst)
}

/// Value and first derivatives of a vertical vector field at one `(x, y)`.
#[derive(Debug, Clone, PartialEq)]
pub struct FieldFirstOrder {
    pub value: Vec<f64>,
    /// `dx[i][k] = ∂ξ^i/∂x^k`
    pub dx: Vec<Vec<f64>>,
    /// `dy[i][k] = ∂ξ^i/∂y^k`
    pub dy: Vec<Vec<f64>>,
}

impl FieldFirstOrder {
    pub(crate) fn from_jets(components: &[Jet]) -> Self {
        let n = components.len();
        Self {
            value: components.iter().map(Scalar::value).collect(),
            dx: components
                .iter()
                .map(|c| (0..n).map(|k| c.dx_at(k)).collect())
                .collect(),
            dy: components
                .iter()
                .map(|c| (0..n).map(|k| c.dy_at(k)).collect())
                .collect(),
        }
    }
}

/// A vertical vector field `ξ(x, y) = ξ^i(x, y) ∂/∂y^i` that can report its
/// first derivatives.
pub trait VerticalField: Sync {
    fn first_order(&self, x: &Point, y: &TangentVector) -> Result<FieldFirstOrder>;
}

/// Fields given by a formula that can be evaluated over any [`Scalar`].
pub trait SmoothField: Sync {
    fn eval<S: Scalar>(&self, x: &[S], y: &[S]) -> Vec<S>;
}

/// Adapter differentiating a [`SmoothField`] exactly with first-order jets.
pub struct Smooth<T>(pub T);

impl<T: SmoothField> VerticalField for Smooth<T> {
    fn first_order(&self, x: &Point, y: &TangentVector) -> Result<FieldFirstOrder> {
        let space = JetSpace::get(x.dim(), 1, 1);
        let (xs, ys) = space.seed(x.coords(), y.coords());
        Ok(FieldFirstOrder::from_jets(&self.0.eval(&xs, &ys)))
    }
}

/// The canonical section `ξ(x, y) = y`.
pub struct CanonicalSection;

impl SmoothField for CanonicalSection {
    fn eval<S: Scalar>(&self, _x: &[S], y: &[S]) -> Vec<S> {
        y.to_vec()
    }
}

/// A field that is constant in both `x` and `y`.
pub struct ConstantField(pub Vec<f64>);

impl SmoothField for ConstantField {
    fn eval<S: Scalar>(&self, _x: &[S], y: &[S]) -> Vec<S> {
        self.0.iter().map(|&c| y[0].constant_like(c)).collect()
    }
}

/// `∇_k ξ = ∂ξ^i/∂x^k − G^p_k ∂ξ^i/∂y^p + G^i_kp ξ^p` at `(x, y)`.
pub fn berwald_covariant_derivative(
    metric: &FinslerMetricSpec,
    x: &Point,
    y: &TangentVector,
    field: &dyn VerticalField,
    direction: usize,
) -> Result<Vec<f64>> {
    let n = metric.dim();
    if direction >= n {
        return Err(Error::InvalidArgument(format!(
            "direction {direction} out of range for dimension {n}"
        )));
    }
    let sd = spray(metric, x, y)?;
    let xi = field.first_order(x, y)?;
    let k = direction;
    Ok((0..n)
        .map(|i| {
            let mut v = xi.dx[i][k];
            for p in 0..n {
                v -= sd.gj[p][k] * xi.dy[i][p];
                v += sd.gjk[i][k][p] * xi.value[p];
            }
            v
        })
        .collect())
}

/// Jet form of the Berwald derivative, used to chain derivatives of fields
/// known only through jets. `spray` must be valid one y-order beyond what the
/// result needs.
pub(crate) fn berwald_derivative_jets(field: &[Jet], spray: &[Jet], direction: usize) -> Vec<Jet> {
    let n = field.len();
    let k = direction;
    let gk: Vec<Jet> = (0..n).map(|p| spray[p].d_dy(k)).collect();
    (0..n)
        .map(|i| {
            let gi_k = spray[i].d_dy(k);
            let mut v = field[i].d_dx(k);
            for p in 0..n {
                v = &v - &(&gk[p] * &field[i].d_dy(p));
                v = &v + &(&gi_k.d_dy(p) * &field[p]);
            }
            v
        })
        .collect()
}

/// `δ_k F = ∂F/∂x^k − G^p_k ∂F/∂y^p`, the horizontal derivative of the norm.
pub fn norm_horizontal_derivative(
    metric: &FinslerMetricSpec,
    x: &Point,
    y: &TangentVector,
) -> Result<Vec<f64>> {
    let sd = spray(metric, x, y)?;
    let f = metric.norm_jet(x.coords(), y.coords(), 1, 1, NormQuantity::Norm)?;
    let n = metric.dim();
    Ok((0..n)
        .map(|k| f.dx_at(k) - (0..n).map(|p| sd.gj[p][k] * f.dy_at(p)).sum::<f64>())
        .collect())
}

/// Closed forms at a point where `F = |y|` and `P = c|y|`, for checking the
/// general machinery against.
pub mod symmetric_point {
    use super::SprayData;

    fn norm(y: &[f64]) -> f64 {
        y.iter().map(|v| v * v).sum::<f64>().sqrt()
    }

    fn delta(i: usize, j: usize) -> f64 {
        if i == j {
            1.0
        } else {
            0.0
        }
    }

    /// `G^i = c|y|y^i`, `G^i_j = c(y^i y^j/|y| + |y|δ^i_j)` and
    /// `G^i_jk = c(y^i δ_jk + y^j δ^i_k + y^k δ^i_j)/|y| − c y^i y^j y^k/|y|³`.
    pub fn spray(c: f64, y: &[f64]) -> SprayData {
        let n = y.len();
        let r = norm(y);
        let g = y.iter().map(|yi| c * r * yi).collect();
        let gj = (0..n)
            .map(|i| {
                (0..n)
                    .map(|j| c * (y[i] * y[j] / r + r * delta(i, j)))
                    .collect()
            })
            .collect();
        let gjk = (0..n)
            .map(|i| {
                (0..n)
                    .map(|j| {
                        (0..n)
                            .map(|k| {
                                c * ((y[i] * delta(j, k) + y[j] * delta(i, k) + y[k] * delta(i, j))
                                    / r
                                    - y[i] * y[j] * y[k] / (r * r * r))
                            })
                            .collect()
                    })
                    .collect()
            })
            .collect();
        SprayData { g, gj, gjk }
    }

    /// `∂G^i_k/∂x^m = (c² − λ)(y^i δ^m_k + y^m δ^i_k)`, indexed `[i][k][m]`.
    pub fn connection_x_derivatives(c: f64, lambda: f64, y: &[f64]) -> Vec<Vec<Vec<f64>>> {
        let n = y.len();
        (0..n)
            .map(|i| {
                (0..n)
                    .map(|k| {
                        (0..n)
                            .map(|m| (c * c - lambda) * (y[i] * delta(m, k) + y[m] * delta(i, k)))
                            .collect()
                    })
                    .collect()
            })
            .collect()
    }

    /// `∂P/∂x^m = (c² − λ) y^m`.
    pub fn projective_factor_gradient(c: f64, lambda: f64, y: &[f64]) -> Vec<f64> {
        y.iter().map(|ym| (c * c - lambda) * ym).collect()
    }

    /// `R^l_ij = λ(δ^l_j y^i − δ^l_i y^j)`, indexed `[l][i][j]`.
    pub fn curvature(lambda: f64, y: &[f64]) -> Vec<Vec<Vec<f64>>> {
        let n = y.len();
        (0..n)
            .map(|l| {
                (0..n)
                    .map(|i| {
                        (0..n)
                            .map(|j| lambda * (delta(l, j) * y[i] - delta(l, i) * y[j]))
                            .collect()
                    })
                    .collect()
            })
            .collect()
    }
}

//! Geodesics, nonlinear parallel transport along curves, holonomy of loops and
//! curvature recovered from shrinking loops.

use std::io::Write;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::curvature::curvature_vector_field;
use crate::error::{Error, Result};
use crate::metric::{eval_norm, FinslerMetricSpec, Point, TangentVector};
use crate::ode::{integrate, OdeOptions};
use crate::spray::{connection_coefficients, spray_coefficients};

/// Loops must close to within this distance.
pub const LOOP_CLOSURE_TOL: f64 = 1e-12;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum CurveKind {
    Polyline {
        vertices: Vec<Point>,
    },
    /// Counterclockwise in the `(i, j)` plane starting at `corner`: first
    /// along `e_i`, then `e_j`, then back.
    CoordinateRectangle {
        corner: Point,
        i: usize,
        j: usize,
        side_i: f64,
        side_j: f64,
    },
    /// Cubic Hermite interpolation of samples at equally spaced parameters
    /// in `[0, 1]`; derivatives are with respect to that parameter.
    Parametric {
        points: Vec<Point>,
        derivatives: Vec<TangentVector>,
    },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CurveSpec {
    pub kind: CurveKind,
    #[serde(default)]
    pub reversed: bool,
}

impl CurveSpec {
    pub fn polyline(vertices: Vec<Point>) -> Self {
        Self {
            kind: CurveKind::Polyline { vertices },
            reversed: false,
        }
    }

    pub fn rectangle(corner: Point, i: usize, j: usize, side_i: f64, side_j: f64) -> Self {
        Self {
            kind: CurveKind::CoordinateRectangle {
                corner,
                i,
                j,
                side_i,
                side_j,
            },
            reversed: false,
        }
    }

    pub fn parametric(points: Vec<Point>, derivatives: Vec<TangentVector>) -> Self {
        Self {
            kind: CurveKind::Parametric {
                points,
                derivatives,
            },
            reversed: false,
        }
    }

    pub fn reversed(mut self) -> Self {
        self.reversed = !self.reversed;
        self
    }

    fn dim(&self) -> usize {
        match &self.kind {
            CurveKind::Polyline { vertices } => vertices.first().map_or(0, Point::dim),
            CurveKind::CoordinateRectangle { corner, .. } => corner.dim(),
            CurveKind::Parametric { points, .. } => points.first().map_or(0, Point::dim),
        }
    }

    fn segments(&self) -> Result<Vec<Segment>> {
        let n = self.dim();
        let check_dims = |pts: &[&Point]| -> Result<()> {
            if n < 2 || pts.iter().any(|p| p.dim() != n) {
                return Err(Error::InvalidArgument(
                    "curve points must share a dimension >= 2".into(),
                ));
            }
            Ok(())
        };
        let mut segs = match &self.kind {
            CurveKind::Polyline { vertices } => {
                if vertices.len() < 2 {
                    return Err(Error::InvalidArgument("polyline needs two vertices".into()));
                }
                check_dims(&vertices.iter().collect::<Vec<_>>())?;
                polyline_segments(vertices)?
            }
            CurveKind::CoordinateRectangle {
                corner,
                i,
                j,
                side_i,
                side_j,
            } => {
                if *i >= n || *j >= n || i == j {
                    return Err(Error::InvalidArgument(format!(
                        "rectangle plane ({i}, {j}) invalid in dimension {n}"
                    )));
                }
                if !(*side_i > 0.0 && *side_j > 0.0) {
                    return Err(Error::InvalidArgument("rectangle sides must be positive".into()));
                }
                let mut v = vec![corner.clone()];
                for (axis, len) in [(*i, *side_i), (*j, *side_j), (*i, -side_i), (*j, -side_j)] {
                    let mut next = v.last().expect("non-empty").clone();
                    next.0[axis] += len;
                    v.push(next);
                }
                // close exactly
                *v.last_mut().expect("non-empty") = corner.clone();
                polyline_segments(&v)?
            }
            CurveKind::Parametric {
                points,
                derivatives,
            } => {
                if points.len() < 2 || points.len() != derivatives.len() {
                    return Err(Error::InvalidArgument(
                        "parametric curve needs >= 2 samples with one derivative each".into(),
                    ));
                }
                check_dims(&points.iter().collect::<Vec<_>>())?;
                let dt = 1.0 / (points.len() - 1) as f64;
                (0..points.len() - 1)
                    .map(|k| Segment::Hermite {
                        p0: points[k].0.clone(),
                        p1: points[k + 1].0.clone(),
                        m0: derivatives[k].0.iter().map(|v| v * dt).collect(),
                        m1: derivatives[k + 1].0.iter().map(|v| v * dt).collect(),
                    })
                    .collect()
            }
        };
        if self.reversed {
            segs = segs.into_iter().rev().map(Segment::reversed).collect();
        }
        Ok(segs)
    }

    pub fn start(&self) -> Result<Point> {
        let segs = self.segments()?;
        Ok(Point::new(segs[0].eval(0.0).0))
    }

    pub fn end(&self) -> Result<Point> {
        let segs = self.segments()?;
        Ok(Point::new(segs[segs.len() - 1].eval(1.0).0))
    }
}

fn polyline_segments(v: &[Point]) -> Result<Vec<Segment>> {
    v.windows(2)
        .map(|w| {
            let d: Vec<f64> = w[1].0.iter().zip(&w[0].0).map(|(a, b)| a - b).collect();
            if d.iter().all(|c| *c == 0.0) {
                return Err(Error::InvalidArgument(
                    "consecutive curve vertices must be distinct".into(),
                ));
            }
            Ok(Segment::Line {
                a: w[0].0.clone(),
                d,
            })
        })
        .collect()
}

#[derive(Debug, Clone)]
enum Segment {
    Line {
        a: Vec<f64>,
        d: Vec<f64>,
    },
    Hermite {
        p0: Vec<f64>,
        p1: Vec<f64>,
        m0: Vec<f64>,
        m1: Vec<f64>,
    },
}

impl Segment {
    /// Position and velocity at local parameter `t ∈ [0, 1]`.
    fn eval(&self, t: f64) -> (Vec<f64>, Vec<f64>) {
        match self {
            Segment::Line { a, d } => (
                a.iter().zip(d).map(|(a, d)| a + t * d).collect(),
                d.clone(),
            ),
            Segment::Hermite { p0, p1, m0, m1 } => {
                let (t2, t3) = (t * t, t * t * t);
                let h00 = 2.0 * t3 - 3.0 * t2 + 1.0;
                let h10 = t3 - 2.0 * t2 + t;
                let h01 = -2.0 * t3 + 3.0 * t2;
                let h11 = t3 - t2;
                let d00 = 6.0 * t2 - 6.0 * t;
                let d10 = 3.0 * t2 - 4.0 * t + 1.0;
                let d01 = -6.0 * t2 + 6.0 * t;
                let d11 = 3.0 * t2 - 2.0 * t;
                let n = p0.len();
                let pos = (0..n)
                    .map(|i| h00 * p0[i] + h10 * m0[i] + h01 * p1[i] + h11 * m1[i])
                    .collect();
                let vel = (0..n)
                    .map(|i| d00 * p0[i] + d10 * m0[i] + d01 * p1[i] + d11 * m1[i])
                    .collect();
                (pos, vel)
            }
        }
    }

    fn reversed(self) -> Segment {
        match self {
            Segment::Line { a, d } => Segment::Line {
                a: a.iter().zip(&d).map(|(a, d)| a + d).collect(),
                d: d.iter().map(|v| -v).collect(),
            },
            Segment::Hermite { p0, p1, m0, m1 } => Segment::Hermite {
                p0: p1,
                p1: p0,
                m0: m1.iter().map(|v| -v).collect(),
                m1: m0.iter().map(|v| -v).collect(),
            },
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TransportResult {
    pub endpoint_vector: TangentVector,
    /// `|F(c(1), X(1)) − F(c(0), X(0))| / F(c(0), X(0))`
    pub norm_drift: f64,
    pub step_count: usize,
    pub estimated_error: f64,
}

fn map_transport_error(e: Error, t: f64) -> Error {
    match e {
        Error::Degenerate(_) => Error::TransportDegeneracy { t },
        other => other,
    }
}

/// Solves `dX^i/dt + G^i_j(c(t), X(t)) ċ^j = 0` segment by segment.
pub fn parallel_transport(
    metric: &FinslerMetricSpec,
    curve: &CurveSpec,
    x0: &TangentVector,
    tol: f64,
) -> Result<TransportResult> {
    if !(tol > 0.0) {
        return Err(Error::InvalidArgument("tolerance must be positive".into()));
    }
    let segs = curve.segments()?;
    let n = metric.dim();
    if x0.dim() != n || curve.dim() != n {
        return Err(Error::InvalidArgument(format!(
            "curve and vector must have dimension {n}"
        )));
    }
    let start = Point::new(segs[0].eval(0.0).0);
    let f0 = eval_norm(metric, &start, x0)?;
    let floor = 1e-12 * x0.euclidean_norm();

    let mut x = x0.0.clone();
    let mut steps = 0;
    let mut estimated_error = 0.0;
    let opts = OdeOptions::with_tol(tol);
    for (idx, seg) in segs.iter().enumerate() {
        let rhs = |t: f64, v: &[f64]| -> Result<Vec<f64>> {
            let t_global = idx as f64 + t;
            if v.iter().map(|a| a * a).sum::<f64>().sqrt() <= floor {
                return Err(Error::TransportDegeneracy { t: t_global });
            }
            let (c, cdot) = seg.eval(t);
            let gj = connection_coefficients(metric, &c, v)
                .map_err(|e| map_transport_error(e, t_global))?;
            Ok((0..n)
                .map(|i| -(0..n).map(|j| gj[i][j] * cdot[j]).sum::<f64>())
                .collect())
        };
        let sol = integrate(rhs, 0.0, &x, 1.0, &opts).map_err(|f| f.error)?;
        steps += sol.accepted;
        estimated_error += sol.error_estimate;
        x = sol.last().to_vec();
    }
    let end = Point::new(segs[segs.len() - 1].eval(1.0).0);
    let endpoint_vector = TangentVector::new(x);
    let f1 = eval_norm(metric, &end, &endpoint_vector)?;
    Ok(TransportResult {
        endpoint_vector,
        norm_drift: (f1 - f0).abs() / f0,
        step_count: steps,
        estimated_error,
    })
}

/// Sampled solution of `ẍ + 2G(x, ẋ) = 0`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct GeodesicTrajectory {
    pub t: Vec<f64>,
    pub x: Vec<Point>,
    pub velocity: Vec<TangentVector>,
    /// The trajectory reached the boundary of the metric's domain (or the
    /// region where the fundamental tensor is well conditioned) before `t_end`.
    pub exited_domain: bool,
    pub step_count: usize,
}

impl GeodesicTrajectory {
    /// Largest relative change of `F(x(t), ẋ(t))` along the samples.
    pub fn norm_drift(&self, metric: &FinslerMetricSpec) -> Result<f64> {
        let f0 = eval_norm(metric, &self.x[0], &self.velocity[0])?;
        let mut worst = 0.0f64;
        for (x, v) in self.x.iter().zip(&self.velocity) {
            worst = worst.max((eval_norm(metric, x, v)? - f0).abs() / f0);
        }
        Ok(worst)
    }

    /// Largest Euclidean distance of the samples from the line through
    /// `x(0)` along `ẋ(0)`.
    pub fn line_deviation(&self) -> f64 {
        let a = &self.x[0].0;
        let d = &self.velocity[0].0;
        let dd: f64 = d.iter().map(|v| v * v).sum();
        self.x
            .iter()
            .map(|p| {
                let w: Vec<f64> = p.0.iter().zip(a).map(|(p, a)| p - a).collect();
                let s = w.iter().zip(d).map(|(w, d)| w * d).sum::<f64>() / dd;
                w.iter()
                    .zip(d)
                    .map(|(w, d)| (w - s * d).powi(2))
                    .sum::<f64>()
                    .sqrt()
            })
            .fold(0.0, f64::max)
    }

    pub fn write_csv<W: Write>(&self, out: W) -> Result<()> {
        let n = self.x.first().map_or(0, Point::dim);
        let mut w = csv::Writer::from_writer(out);
        let mut header = vec!["t".to_string()];
        header.extend((0..n).map(|i| format!("x{i}")));
        header.extend((0..n).map(|i| format!("v{i}")));
        w.write_record(&header).map_err(csv_err)?;
        for k in 0..self.t.len() {
            let mut row = vec![self.t[k].to_string()];
            row.extend(self.x[k].0.iter().map(f64::to_string));
            row.extend(self.velocity[k].0.iter().map(f64::to_string));
            w.write_record(&row).map_err(csv_err)?;
        }
        w.flush().map_err(|e| Error::Internal(e.to_string()))
    }
}

fn csv_err(e: csv::Error) -> Error {
    Error::Internal(format!("csv output failed: {e}"))
}

pub fn integrate_geodesic(
    metric: &FinslerMetricSpec,
    x0: &Point,
    y0: &TangentVector,
    t_end: f64,
    tol: f64,
) -> Result<GeodesicTrajectory> {
    if !(tol > 0.0) {
        return Err(Error::InvalidArgument("tolerance must be positive".into()));
    }
    let n = metric.dim();
    metric.check_slit(x0.coords(), y0.coords())?;
    let mut state = x0.0.clone();
    state.extend_from_slice(&y0.0);
    let rhs = |_t: f64, s: &[f64]| -> Result<Vec<f64>> {
        let g = spray_coefficients(metric, &s[..n], &s[n..])?;
        let mut out = s[n..].to_vec();
        out.extend(g.iter().map(|v| -2.0 * v));
        Ok(out)
    };
    let (sol, exited_domain) = match integrate(rhs, 0.0, &state, t_end, &OdeOptions::with_tol(tol)) {
        Ok(sol) => (sol, false),
        Err(fail) => match fail.error {
            Error::Domain(_) | Error::SingularTensor { .. } => (fail.partial, true),
            other => return Err(other),
        },
    };
    Ok(GeodesicTrajectory {
        step_count: sol.accepted,
        x: sol.y.iter().map(|s| Point::new(s[..n].to_vec())).collect(),
        velocity: sol.y.iter().map(|s| TangentVector::new(s[n..].to_vec())).collect(),
        t: sol.t,
        exited_domain,
    })
}

/// A grid vector whose transport failed.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct FlaggedFailure {
    pub index: usize,
    pub error: String,
}

/// Images of indicatrix points under the holonomy of one loop.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct IndicatrixMapSample {
    pub domain_points: Vec<TangentVector>,
    /// `None` where transport failed; see `failures`.
    pub image_points: Vec<Option<TangentVector>>,
    pub norm_drifts: Vec<f64>,
    pub failures: Vec<FlaggedFailure>,
}

impl IndicatrixMapSample {
    pub fn max_norm_drift(&self) -> f64 {
        self.norm_drifts.iter().copied().fold(0.0, f64::max)
    }

    /// Largest `|T(u) − u|` over successful transports.
    pub fn max_displacement(&self) -> f64 {
        self.domain_points
            .iter()
            .zip(&self.image_points)
            .filter_map(|(u, v)| v.as_ref().map(|v| (u, v)))
            .map(|(u, v)| {
                u.0.iter()
                    .zip(&v.0)
                    .map(|(a, b)| (a - b).abs())
                    .fold(0.0, f64::max)
            })
            .fold(0.0, f64::max)
    }

    /// Columns: grid index, domain coordinates, image coordinates, drift.
    pub fn write_csv<W: Write>(&self, out: W) -> Result<()> {
        let n = self.domain_points.first().map_or(0, TangentVector::dim);
        let mut w = csv::Writer::from_writer(out);
        let mut header = vec!["index".to_string()];
        header.extend((0..n).map(|i| format!("u{i}")));
        header.extend((0..n).map(|i| format!("image{i}")));
        header.push("norm_drift".into());
        w.write_record(&header).map_err(csv_err)?;
        for (k, u) in self.domain_points.iter().enumerate() {
            let mut row = vec![k.to_string()];
            row.extend(u.0.iter().map(f64::to_string));
            match &self.image_points[k] {
                Some(v) => row.extend(v.0.iter().map(f64::to_string)),
                None => row.extend((0..n).map(|_| String::new())),
            }
            row.push(self.norm_drifts[k].to_string());
            w.write_record(&row).map_err(csv_err)?;
        }
        w.flush().map_err(|e| Error::Internal(e.to_string()))
    }
}

pub fn holonomy_loop_map(
    metric: &FinslerMetricSpec,
    x0: &Point,
    loop_curve: &CurveSpec,
    grid: &[TangentVector],
    tol: f64,
) -> Result<IndicatrixMapSample> {
    let (start, end) = (loop_curve.start()?, loop_curve.end()?);
    let gap = |a: &Point, b: &Point| {
        a.0.iter()
            .zip(&b.0)
            .map(|(u, v)| (u - v).abs())
            .fold(0.0, f64::max)
    };
    if gap(&start, &end) > LOOP_CLOSURE_TOL {
        return Err(Error::InvalidArgument("loop is not closed".into()));
    }
    if gap(&start, x0) > LOOP_CLOSURE_TOL {
        return Err(Error::InvalidArgument("loop does not start at the base point".into()));
    }
    let results: Vec<Result<TransportResult>> = grid
        .par_iter()
        .map(|u| parallel_transport(metric, loop_curve, u, tol))
        .collect();
    let mut sample = IndicatrixMapSample {
        domain_points: grid.to_vec(),
        image_points: Vec::with_capacity(grid.len()),
        norm_drifts: Vec::with_capacity(grid.len()),
        failures: Vec::new(),
    };
    for (index, r) in results.into_iter().enumerate() {
        match r {
            Ok(tr) => {
                sample.norm_drifts.push(tr.norm_drift);
                sample.image_points.push(Some(tr.endpoint_vector));
            }
            Err(e) => {
                sample.norm_drifts.push(f64::NAN);
                sample.image_points.push(None);
                sample.failures.push(FlaggedFailure {
                    index,
                    error: e.to_string(),
                });
            }
        }
    }
    Ok(sample)
}

/// Loop data for one side length and one coordinate plane.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct LoopEstimate {
    pub i: usize,
    pub j: usize,
    pub side: f64,
    /// `Σ D·ξ / Σ ξ·ξ` with `D = (T − id) / s²`; the fitted generator is
    /// `fitted_scale · ξ_ij`.
    pub fitted_scale: f64,
    /// `|fitted_scale − σ|`, the relative error of the fitted generator.
    pub generator_error: f64,
    /// `‖D − σ ξ_ij‖ / ‖ξ_ij‖` over the grid.
    pub relative_error: f64,
    pub max_norm_drift: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct LoopCurvatureReport {
    /// Global sign with `D(s) → σ ξ_ij`.
    pub sigma: i8,
    pub estimates: Vec<LoopEstimate>,
    /// Least-squares slope of `log ‖D − σξ‖` against `log s`, per plane.
    pub slopes: Vec<((usize, usize), f64)>,
}

impl LoopCurvatureReport {
    pub fn max_generator_error_at(&self, side: f64) -> f64 {
        self.estimates
            .iter()
            .filter(|e| e.side == side)
            .map(|e| e.generator_error)
            .fold(0.0, f64::max)
    }

    pub fn min_slope(&self) -> f64 {
        self.slopes.iter().map(|(_, s)| *s).fold(f64::INFINITY, f64::min)
    }
}

fn log_log_slope(pts: &[(f64, f64)]) -> f64 {
    let m = pts.len() as f64;
    let (sx, sy) = pts
        .iter()
        .fold((0.0, 0.0), |(a, b), (s, r)| (a + s.ln(), b + r.ln()));
    let (mx, my) = (sx / m, sy / m);
    let (num, den) = pts.iter().fold((0.0, 0.0), |(a, b), (s, r)| {
        let dx = s.ln() - mx;
        (a + dx * (r.ln() - my), b + dx * dx)
    });
    num / den
}

/// Where the `s × s` loop sits relative to the base point.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum LoopPlacement {
    /// Coordinate rectangle with its corner at the base point.
    #[default]
    Corner,
    /// Lasso: out to a corner, around a square centred at the base point,
    /// and back. The out-and-back legs cancel to leading order, which
    /// removes the `O(s)` offset of the corner placement.
    Centered,
}

fn square_loop(x0: &Point, i: usize, j: usize, s: f64, placement: LoopPlacement) -> CurveSpec {
    match placement {
        LoopPlacement::Corner => CurveSpec::rectangle(x0.clone(), i, j, s, s),
        LoopPlacement::Centered => {
            let at = |a: f64, b: f64| {
                let mut p = x0.clone();
                p.0[i] += a;
                p.0[j] += b;
                p
            };
            let h = s / 2.0;
            CurveSpec::polyline(vec![
                x0.clone(),
                at(-h, -h),
                at(h, -h),
                at(h, h),
                at(-h, h),
                at(-h, -h),
                x0.clone(),
            ])
        }
    }
}

/// Transports the grid around `s × s` rectangles cornered at `x0` in each
/// plane and compares `(T − id) / s²` with the curvature field `ξ_ij` at `x0`.
pub fn curvature_from_loops(
    metric: &FinslerMetricSpec,
    x0: &Point,
    planes: &[(usize, usize)],
    sides: &[f64],
    grid: &[TangentVector],
    tol: f64,
) -> Result<LoopCurvatureReport> {
    curvature_from_loops_with(metric, x0, planes, sides, grid, tol, LoopPlacement::Corner)
}

pub fn curvature_from_loops_with(
    metric: &FinslerMetricSpec,
    x0: &Point,
    planes: &[(usize, usize)],
    sides: &[f64],
    grid: &[TangentVector],
    tol: f64,
    placement: LoopPlacement,
) -> Result<LoopCurvatureReport> {
    if planes.is_empty() || sides.is_empty() || grid.is_empty() {
        return Err(Error::InvalidArgument(
            "need at least one plane, side and grid vector".into(),
        ));
    }
    if sides.windows(2).any(|w| w[1] >= w[0]) || sides.iter().any(|s| *s <= 0.0) {
        return Err(Error::InvalidArgument(
            "side lengths must be positive and strictly decreasing".into(),
        ));
    }
    let mut raw = Vec::new();
    for &(i, j) in planes {
        let field = curvature_vector_field(metric, x0, i, j)?;
        let xi: Vec<Vec<f64>> = grid.iter().map(|u| field.eval(u)).collect::<Result<_>>()?;
        let xi_sq: f64 = xi.iter().flatten().map(|v| v * v).sum();
        for &s in sides {
            let lp = square_loop(x0, i, j, s, placement);
            let map = holonomy_loop_map(metric, x0, &lp, grid, tol)?;
            if let Some(f) = map.failures.first() {
                return Err(Error::Internal(format!(
                    "transport of grid vector {} failed: {}",
                    f.index, f.error
                )));
            }
            let d: Vec<Vec<f64>> = map
                .domain_points
                .iter()
                .zip(&map.image_points)
                .map(|(u, v)| {
                    let v = v.as_ref().expect("no failures");
                    u.0.iter().zip(&v.0).map(|(a, b)| (b - a) / (s * s)).collect()
                })
                .collect();
            raw.push((i, j, s, d, xi.clone(), xi_sq, map.max_norm_drift()));
        }
    }

    let flat = |a: &Vec<Vec<f64>>, b: &Vec<Vec<f64>>| -> f64 {
        a.iter().flatten().zip(b.iter().flatten()).map(|(u, v)| u * v).sum()
    };
    let scales: Vec<f64> = raw
        .iter()
        .map(|(_, _, _, d, xi, xi_sq, _)| if *xi_sq > 0.0 { flat(d, xi) / xi_sq } else { 0.0 })
        .collect();
    let positive = scales.iter().filter(|v| **v > 0.0).count();
    let negative = scales.iter().filter(|v| **v < 0.0).count();
    if positive > 0 && negative > 0 {
        return Err(Error::ConventionMismatch(format!(
            "{positive} positive and {negative} negative loop scales"
        )));
    }
    let sigma: i8 = if negative > 0 { -1 } else { 1 };

    let estimates: Vec<LoopEstimate> = raw
        .iter()
        .zip(&scales)
        .map(|((i, j, s, d, xi, xi_sq, drift), scale)| {
            let diff: f64 = d
                .iter()
                .flatten()
                .zip(xi.iter().flatten())
                .map(|(a, b)| (a - sigma as f64 * b).powi(2))
                .sum::<f64>()
                .sqrt();
            let relative_error = if *xi_sq > 0.0 { diff / xi_sq.sqrt() } else { diff };
            LoopEstimate {
                i: *i,
                j: *j,
                side: *s,
                fitted_scale: *scale,
                generator_error: (scale - sigma as f64).abs(),
                relative_error,
                max_norm_drift: *drift,
            }
        })
        .collect();
    let slopes = planes
        .iter()
        .map(|&(i, j)| {
            let pts: Vec<(f64, f64)> = estimates
                .iter()
                .filter(|e| e.i == i && e.j == j && e.relative_error > 0.0)
                .map(|e| (e.side, e.relative_error))
                .collect();
            let slope = if pts.len() >= 2 { log_log_slope(&pts) } else { f64::NAN };
            ((i, j), slope)
        })
        .collect();
    Ok(LoopCurvatureReport {
        sigma,
        estimates,
        slopes,
    })
}

//! Adaptive Dormand–Prince 5(4) integrator with dense output.

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct OdeOptions {
    pub rtol: f64,
    pub atol: f64,
    /// Initial step; estimated automatically when `None`.
    pub h0: Option<f64>,
    pub max_steps: usize,
    /// Smallest step relative to the integration span.
    pub min_step_fraction: f64,
}

impl OdeOptions {
    pub fn with_tol(tol: f64) -> Self {
        Self {
            rtol: tol,
            atol: tol,
            ..Self::default()
        }
    }
}

impl Default for OdeOptions {
    fn default() -> Self {
        Self {
            rtol: 1e-9,
            atol: 1e-9,
            h0: None,
            max_steps: 200_000,
            min_step_fraction: 1e-13,
        }
    }
}

/// Quartic interpolant on one accepted step.
#[derive(Debug, Clone)]
pub struct DenseSegment {
    pub t0: f64,
    pub h: f64,
    rcont: [Vec<f64>; 5],
}

impl DenseSegment {
    pub fn eval(&self, t: f64) -> Vec<f64> {
        let theta = (t - self.t0) / self.h;
        let theta1 = 1.0 - theta;
        let [r1, r2, r3, r4, r5] = &self.rcont;
        (0..r1.len())
            .map(|i| r1[i] + theta * (r2[i] + theta1 * (r3[i] + theta * (r4[i] + theta1 * r5[i]))))
            .collect()
    }
}

#[derive(Debug, Clone, Default)]
pub struct Solution {
    pub t: Vec<f64>,
    pub y: Vec<Vec<f64>>,
    pub accepted: usize,
    pub rejected: usize,
    /// Sum over accepted steps of the max-norm local error estimate.
    pub error_estimate: f64,
    pub dense: Vec<DenseSegment>,
}

impl Solution {
    pub fn last(&self) -> &[f64] {
        self.y.last().expect("solution holds the initial state")
    }

    /// Interpolated state at `t` inside the integrated span.
    pub fn sample(&self, t: f64) -> Option<Vec<f64>> {
        let (lo, hi) = (self.t[0], *self.t.last()?);
        if t < lo.min(hi) || t > lo.max(hi) {
            return None;
        }
        let idx = self
            .dense
            .partition_point(|seg| (seg.t0 + seg.h - t) * seg.h.signum() < 0.0);
        self.dense.get(idx.min(self.dense.len().saturating_sub(1))).map(|s| s.eval(t))
    }
}

/// Integration stopped early; `partial` holds every accepted step.
#[derive(Debug, Clone)]
pub struct IntegrationFailure {
    pub error: Error,
    pub partial: Solution,
}

const C2: f64 = 1.0 / 5.0;
const C3: f64 = 3.0 / 10.0;
const C4: f64 = 4.0 / 5.0;
const C5: f64 = 8.0 / 9.0;
const A21: f64 = 1.0 / 5.0;
const A31: f64 = 3.0 / 40.0;
const A32: f64 = 9.0 / 40.0;
const A41: f64 = 44.0 / 45.0;
const A42: f64 = -56.0 / 15.0;
const A43: f64 = 32.0 / 9.0;
const A51: f64 = 19372.0 / 6561.0;
const A52: f64 = -25360.0 / 2187.0;
const A53: f64 = 64448.0 / 6561.0;
const A54: f64 = -212.0 / 729.0;
const A61: f64 = 9017.0 / 3168.0;
const A62: f64 = -355.0 / 33.0;
const A63: f64 = 46732.0 / 5247.0;
const A64: f64 = 49.0 / 176.0;
const A65: f64 = -5103.0 / 18656.0;
const A71: f64 = 35.0 / 384.0;
const A73: f64 = 500.0 / 1113.0;
const A74: f64 = 125.0 / 192.0;
const A75: f64 = -2187.0 / 6784.0;
const A76: f64 = 11.0 / 84.0;
const E1: f64 = 71.0 / 57600.0;
const E3: f64 = -71.0 / 16695.0;
const E4: f64 = 71.0 / 1920.0;
const E5: f64 = -17253.0 / 339200.0;
const E6: f64 = 22.0 / 525.0;
const E7: f64 = -1.0 / 40.0;
const D1: f64 = -12715105075.0 / 11282082432.0;
const D3: f64 = 87487479700.0 / 32700410799.0;
const D4: f64 = -10690763975.0 / 1880347072.0;
const D5: f64 = 701980252875.0 / 199316789632.0;
const D6: f64 = -1453857185.0 / 822651844.0;
const D7: f64 = 69997945.0 / 29380423.0;

fn combo(y: &[f64], h: f64, terms: &[(f64, &[f64])]) -> Vec<f64> {
    let mut out = y.to_vec();
    for (a, k) in terms {
        for (o, v) in out.iter_mut().zip(k.iter()) {
            *o += h * a * v;
        }
    }
    out
}

fn weighted_norm(err: &[f64], y0: &[f64], y1: &[f64], opts: &OdeOptions) -> f64 {
    let sum: f64 = err
        .iter()
        .zip(y0.iter().zip(y1))
        .map(|(e, (a, b))| {
            let sc = opts.atol + opts.rtol * a.abs().max(b.abs());
            (e / sc).powi(2)
        })
        .sum();
    (sum / err.len() as f64).sqrt()
}

fn initial_step<F>(f: &mut F, t0: f64, y0: &[f64], k1: &[f64], span: f64, opts: &OdeOptions) -> Result<f64>
where
    F: FnMut(f64, &[f64]) -> Result<Vec<f64>>,
{
    let n = y0.len() as f64;
    let norm = |v: &[f64], y: &[f64]| -> f64 {
        (v.iter()
            .zip(y)
            .map(|(a, b)| (a / (opts.atol + opts.rtol * b.abs())).powi(2))
            .sum::<f64>()
            / n)
            .sqrt()
    };
    let d0 = norm(y0, y0);
    let d1 = norm(k1, y0);
    let mut h = if d0 < 1e-10 || d1 < 1e-10 { 1e-6 } else { 0.01 * d0 / d1 };
    h = h.min(span.abs());
    let y1 = combo(y0, h * span.signum(), &[(1.0, k1)]);
    let k2 = f(t0 + h * span.signum(), &y1)?;
    let diff: Vec<f64> = k2.iter().zip(k1).map(|(a, b)| a - b).collect();
    let d2 = norm(&diff, y0) / h;
    let h1 = if d1.max(d2) <= 1e-15 {
        (h * 1e-3).max(1e-6)
    } else {
        (0.01 / d1.max(d2)).powf(0.2)
    };
    Ok((100.0 * h).min(h1).min(span.abs()))
}

/// Integrates `y' = f(t, y)` from `t0` to `t_end`.
///
/// A failing right-hand side during a trial step shrinks the step; the error
/// is reported once the step falls below the minimum.
pub fn integrate<F>(
    mut f: F,
    t0: f64,
    y0: &[f64],
    t_end: f64,
    opts: &OdeOptions,
) -> std::result::Result<Solution, IntegrationFailure>
where
    F: FnMut(f64, &[f64]) -> Result<Vec<f64>>,
{
    let mut sol = Solution {
        t: vec![t0],
        y: vec![y0.to_vec()],
        ..Solution::default()
    };
    let span = t_end - t0;
    if span == 0.0 {
        return Ok(sol);
    }
    let dir = span.signum();
    let h_min = opts.min_step_fraction * span.abs();

    let mut k1 = match f(t0, y0) {
        Ok(k) => k,
        Err(error) => return Err(IntegrationFailure { error, partial: sol }),
    };
    let mut h = match opts.h0 {
        Some(h) => h.abs().min(span.abs()),
        None => match initial_step(&mut f, t0, y0, &k1, span, opts) {
            Ok(h) => h,
            Err(error) => return Err(IntegrationFailure { error, partial: sol }),
        },
    };
    let mut t = t0;
    let mut y = y0.to_vec();
    let mut last_rhs_error: Option<Error> = None;

    while (t_end - t) * dir > 0.0 {
        if sol.accepted + sol.rejected >= opts.max_steps {
            let error = Error::StepUnderflow { t, h };
            return Err(IntegrationFailure { error, partial: sol });
        }
        if h < h_min {
            let error = last_rhs_error.take().unwrap_or(Error::StepUnderflow { t, h });
            return Err(IntegrationFailure { error, partial: sol });
        }
        let last = (t + dir * h - t_end) * dir >= 0.0;
        let hs = if last { t_end - t } else { dir * h };

        let stages = (|| -> Result<_> {
            let k2 = f(t + C2 * hs, &combo(&y, hs, &[(A21, &k1)]))?;
            let k3 = f(t + C3 * hs, &combo(&y, hs, &[(A31, &k1), (A32, &k2)]))?;
            let k4 = f(
                t + C4 * hs,
                &combo(&y, hs, &[(A41, &k1), (A42, &k2), (A43, &k3)]),
            )?;
            let k5 = f(
                t + C5 * hs,
                &combo(&y, hs, &[(A51, &k1), (A52, &k2), (A53, &k3), (A54, &k4)]),
            )?;
            let k6 = f(
                t + hs,
                &combo(
                    &y,
                    hs,
                    &[(A61, &k1), (A62, &k2), (A63, &k3), (A64, &k4), (A65, &k5)],
                ),
            )?;
            let y1 = combo(
                &y,
                hs,
                &[(A71, &k1), (A73, &k3), (A74, &k4), (A75, &k5), (A76, &k6)],
            );
            let k7 = f(t + hs, &y1)?;
            Ok((k2, k3, k4, k5, k6, k7, y1))
        })();

        let (_k2, k3, k4, k5, k6, k7, y1) = match stages {
            Ok(v) => v,
            Err(e) => {
                last_rhs_error = Some(e);
                sol.rejected += 1;
                h *= 0.25;
                continue;
            }
        };

        let err: Vec<f64> = (0..y.len())
            .map(|i| {
                hs * (E1 * k1[i] + E3 * k3[i] + E4 * k4[i] + E5 * k5[i] + E6 * k6[i] + E7 * k7[i])
            })
            .collect();
        let en = weighted_norm(&err, &y, &y1, opts);
        let factor = if en == 0.0 {
            10.0
        } else {
            (0.9 * en.powf(-0.2)).clamp(0.2, 10.0)
        };

        if en <= 1.0 {
            let ydiff: Vec<f64> = y1.iter().zip(&y).map(|(a, b)| a - b).collect();
            let bspl: Vec<f64> = (0..y.len()).map(|i| hs * k1[i] - ydiff[i]).collect();
            let r4: Vec<f64> = (0..y.len()).map(|i| ydiff[i] - hs * k7[i] - bspl[i]).collect();
            let r5: Vec<f64> = (0..y.len())
                .map(|i| {
                    hs * (D1 * k1[i] + D3 * k3[i] + D4 * k4[i] + D5 * k5[i] + D6 * k6[i] + D7 * k7[i])
                })
                .collect();
            sol.dense.push(DenseSegment {
                t0: t,
                h: hs,
                rcont: [y.clone(), ydiff, bspl, r4, r5],
            });
            sol.error_estimate += err.iter().fold(0.0f64, |m, v| m.max(v.abs()));
            t = if last { t_end } else { t + hs };
            y = y1;
            k1 = k7;
            sol.accepted += 1;
            sol.t.push(t);
            sol.y.push(y.clone());
            last_rhs_error = None;
            h *= factor;
        } else {
            sol.rejected += 1;
            h *= factor.min(1.0);
        }
    }
    Ok(sol)
}

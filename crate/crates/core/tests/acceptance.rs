//! Acceptance gate: one line per criterion, nonzero exit if any fails.

use std::f64::consts::PI;
use std::time::{Duration, Instant};

use finsler_core::algebra::formulas::{cov_deriv_curvature, formula_suite};
use finsler_core::algebra::linalg::{
    determinant, determinant_by_expansion, first_order_matrix, second_order_matrix,
};
use finsler_core::algebra::poly::{integer, rational};
use finsler_core::algebra::{density_certificate, ModelParams};
use finsler_core::curvature::{curvature_field_derivatives, fit_flag_curvature, nabla_r_residual};
use finsler_core::sampling::{euclidean_sphere_grid, indicatrix_grid, random_point_pairs};
use finsler_core::spray::{connection_x_derivatives, symmetric_point};
use finsler_core::transport::{
    curvature_from_loops, curvature_from_loops_with, holonomy_loop_map, integrate_geodesic,
    parallel_transport, CurveSpec, LoopPlacement,
};
use finsler_core::{spray, FinslerMetricSpec, Point, Result, TangentVector};

struct Outcome {
    pass: bool,
    detail: String,
}

fn outcome(pass: bool, detail: String) -> Outcome {
    Outcome { pass, detail }
}

fn rel_diff(a: &[f64], b: &[f64]) -> f64 {
    let scale = b.iter().fold(0.0f64, |m, v| m.max(v.abs())).max(1e-300);
    a.iter()
        .zip(b)
        .fold(0.0f64, |m, (x, y)| m.max((x - y).abs())) / scale
}

fn funk_curvature() -> Result<Outcome> {
    let start = Instant::now();
    let mut worst_dl = 0.0f64;
    let mut worst_res = 0.0f64;
    let mut total = 0;
    for n in 2..=4 {
        let m = FinslerMetricSpec::funk(n)?;
        let samples = random_point_pairs(n, 200, 0.6, 100 + n as u64);
        let fit = fit_flag_curvature(&m, &samples)?;
        worst_dl = worst_dl.max((fit.lambda + 0.25).abs());
        worst_res = worst_res.max(fit.max_relative_residual);
        total += fit.samples;
    }
    let t = start.elapsed();
    Ok(outcome(
        worst_dl <= 1e-6 && worst_res <= 1e-6 && t <= Duration::from_secs(30),
        format!("{total} samples, max |dλ| = {worst_dl:.2e}, max residual = {worst_res:.2e}, {t:.2?}"),
    ))
}

fn bryant_shen_curvature() -> Result<Outcome> {
    let start = Instant::now();
    let mut worst = 0.0f64;
    for alpha in [PI / 6.0, PI / 4.0] {
        for n in 2..=3 {
            let m = FinslerMetricSpec::bryant_shen(n, alpha)?;
            let samples = random_point_pairs(n, 100, 0.6, 200 + n as u64);
            let fit = fit_flag_curvature(&m, &samples)?;
            worst = worst.max((fit.lambda - 1.0).abs());
        }
    }
    let t = start.elapsed();
    Ok(outcome(
        worst <= 1e-5 && t <= Duration::from_secs(60),
        format!("max |dλ| = {worst:.2e}, {t:.2?}"),
    ))
}

fn curvature_parallel() -> Result<Outcome> {
    let mut worst = 0.0f64;
    let metrics = [FinslerMetricSpec::funk(3)?, FinslerMetricSpec::bryant_shen(3, PI / 6.0)?];
    for m in &metrics {
        let mut points = vec![(Point::zeros(3), TangentVector::new(vec![0.3, -0.7, 0.5]))];
        points.extend(random_point_pairs(3, 20, 0.6, 300));
        for (x, y) in &points {
            for k in 0..3 {
                worst = worst.max(nabla_r_residual(m, x, y, k)?);
            }
        }
    }
    Ok(outcome(
        worst <= 1e-6,
        format!("max residual over 2 metrics x 21 points x 3 directions = {worst:.2e}"),
    ))
}

fn symmetric_closed_forms() -> Result<Outcome> {
    let ys = euclidean_sphere_grid(3, 12, 0)?;
    let mut worst_g = 0.0f64;
    let mut worst_dx = 0.0f64;
    for sign in [1i8, -1] {
        let m = FinslerMetricSpec::funk_with_sign(3, sign)?;
        let c = 0.5 * sign as f64;
        for (idx, u) in ys.iter().enumerate() {
            let y: Vec<f64> = u.iter().map(|v| v * (0.5 + idx as f64 * 0.25)).collect();
            let tv = TangentVector::new(y.clone());
            let sd = spray(&m, &Point::zeros(3), &tv)?;
            let closed = symmetric_point::spray(c, &y);
            worst_g = worst_g.max(rel_diff(&sd.g, &closed.g));
            let flat = |t: &Vec<Vec<f64>>| t.iter().flatten().copied().collect::<Vec<_>>();
            worst_g = worst_g.max(rel_diff(&flat(&sd.gj), &flat(&closed.gj)));
            let flat3 = |t: &Vec<Vec<Vec<f64>>>| t.iter().flatten().flatten().copied().collect::<Vec<_>>();
            worst_g = worst_g.max(rel_diff(&flat3(&sd.gjk), &flat3(&closed.gjk)));
            let dx = connection_x_derivatives(&m, &Point::zeros(3), &tv)?;
            let closed_dx = symmetric_point::connection_x_derivatives(c, -0.25, &y);
            worst_dx = worst_dx.max(rel_diff(&flat3(&dx), &flat3(&closed_dx)));
        }
    }
    Ok(outcome(
        worst_g <= 1e-8 && worst_dx <= 1e-6,
        format!("spray coefficients rel err {worst_g:.2e}, x-derivatives rel err {worst_dx:.2e} (c = ±1/2, c² - λ = 1/2)"),
    ))
}

fn loop_suite(n: usize) -> Vec<(Point, CurveSpec)> {
    let p = |v: &[f64]| Point::new(v.to_vec());
    let base = p(&[0.2, -0.1, 0.15][..n.min(3)]);
    let mut suite = vec![
        (Point::zeros(n), CurveSpec::rectangle(Point::zeros(n), 0, 1, 0.1, 0.1)),
        (Point::zeros(n), CurveSpec::rectangle(Point::zeros(n), 1, 2, 0.2, 0.05)),
        (base.clone(), CurveSpec::rectangle(base.clone(), 0, 2, 0.1, 0.15)),
    ];
    let tri = vec![base.clone(), p(&[0.35, -0.1, 0.15]), p(&[0.25, 0.1, 0.0]), base.clone()];
    suite.push((base.clone(), CurveSpec::polyline(tri)));
    // closed Hermite loop: a circle of radius 0.1 through the origin
    let k = 8;
    let (pts, ders): (Vec<Point>, Vec<TangentVector>) = (0..=k)
        .map(|s| {
            let a = 2.0 * PI * s as f64 / k as f64;
            (
                p(&[0.1 * (a.cos() - 1.0), 0.1 * a.sin(), 0.0]),
                TangentVector::new(vec![-0.2 * PI * a.sin(), 0.2 * PI * a.cos(), 0.0]),
            )
        })
        .unzip();
    suite.push((Point::zeros(n), CurveSpec::parametric(pts, ders)));
    suite
}

fn transport_invariants() -> Result<Outcome> {
    let tol = 1e-9;
    let m = FinslerMetricSpec::funk(3)?;
    let mut drift = 0.0f64;
    let mut inverse = 0.0f64;
    for (x0, lp) in loop_suite(3) {
        let grid = indicatrix_grid(&m, &x0, 12, 0)?;
        let map = holonomy_loop_map(&m, &x0, &lp, &grid, tol)?;
        assert!(map.failures.is_empty());
        drift = drift.max(map.max_norm_drift());
        for u in &grid {
            let there = parallel_transport(&m, &lp, u, tol)?;
            let back = parallel_transport(&m, &lp.clone().reversed(), &there.endpoint_vector, tol)?;
            inverse = inverse.max(rel_diff(&back.endpoint_vector.0, &u.0));
        }
    }
    let mut straight = 0.0f64;
    for (x, y) in random_point_pairs(3, 10, 0.5, 500) {
        let traj = integrate_geodesic(&m, &x, &y.scaled(0.5 / y.euclidean_norm()), 1.0, tol)?;
        straight = straight.max(traj.line_deviation());
    }
    let traj = integrate_geodesic(&m, &Point::zeros(3), &TangentVector::new(vec![0.5, 0.0, 0.0]), 2.0, tol)?;
    straight = straight.max(traj.line_deviation());
    Ok(outcome(
        drift <= 1e-8 && inverse <= 1e-7 && straight <= 1e-8,
        format!("norm drift {drift:.2e}, inverse residual {inverse:.2e}, geodesic line deviation {straight:.2e}"),
    ))
}

fn loop_curvature() -> Result<Outcome> {
    let m = FinslerMetricSpec::funk(3)?;
    let x0 = Point::zeros(3);
    let grid = indicatrix_grid(&m, &x0, 20, 0)?;
    let sides = [0.2, 0.1, 0.05, 0.02];
    let planes = [(0, 1), (1, 2), (0, 2), (1, 0)];
    let corner = curvature_from_loops(&m, &x0, &planes, &sides, &grid, 1e-10)?;
    let generator = corner.max_generator_error_at(0.02);
    let slope = corner.min_slope();
    let corner_pointwise = corner
        .estimates
        .iter()
        .filter(|e| e.side == 0.02)
        .map(|e| e.relative_error)
        .fold(0.0, f64::max);
    let centered = curvature_from_loops_with(&m, &x0, &planes, &sides, &grid, 1e-10, LoopPlacement::Centered)?;
    let centered_pointwise = centered
        .estimates
        .iter()
        .filter(|e| e.side == 0.02)
        .map(|e| e.relative_error)
        .fold(0.0, f64::max);
    let pass = corner.sigma == centered.sigma
        && generator <= 1e-2
        && slope >= 0.9
        && centered_pointwise <= 1e-2
        && centered.min_slope() >= 0.9;
    Ok(outcome(
        pass,
        format!(
            "σ = {:+}, fitted generator rel err at s=0.02: {generator:.2e}, min log-log slope {slope:.2}; \
             pointwise rel err at s=0.02: centred {centered_pointwise:.2e}, corner {corner_pointwise:.2e}",
            corner.sigma
        ),
    ))
}

fn exact_suite() -> Result<Outcome> {
    let mut checks = 0;
    let mut failures = Vec::new();
    for n in 2..=4 {
        for (c, l) in [(rational(1, 2), rational(-1, 4)), (integer(1), integer(1)), (integer(2), integer(-3))] {
            let s = formula_suite(&ModelParams::new(n, c, l)?, 3)?;
            checks += s.checks;
            failures.extend(s.failures);
        }
    }
    for n in 2..=6 {
        let size = n - 1;
        let d1 = determinant(&first_order_matrix(size));
        let d2 = determinant(&second_order_matrix(size));
        checks += 2;
        if d1 != integer((1i64 << (n - 2)) * (n as i64 + 1)) || d1 != determinant_by_expansion(&first_order_matrix(size)) {
            failures.push(format!("first-order determinant n={n}: {d1}"));
        }
        if d2 != integer(n as i64) || d2 != determinant_by_expansion(&second_order_matrix(size)) {
            failures.push(format!("second-order determinant n={n}: {d2}"));
        }
    }
    Ok(outcome(
        failures.is_empty(),
        format!("{checks} exact checks, {} failures {:?}", failures.len(), failures.iter().take(3).collect::<Vec<_>>()),
    ))
}

fn density() -> Result<Outcome> {
    let mut lines = Vec::new();
    let mut pass = true;
    for (n, p_max) in [(2usize, 6usize), (3, 4)] {
        for (c, l) in [(rational(1, 2), rational(-1, 4)), (integer(1), integer(1)), (integer(2), integer(-3))] {
            let start = Instant::now();
            let cert = density_certificate(&ModelParams::new(n, c, l)?, p_max)?;
            let t = start.elapsed();
            pass &= cert.passed && t <= Duration::from_secs(300);
            let ranks: Vec<String> = cert.rows.iter().map(|r| format!("{}/{}", r.generated_rank, r.target_rank)).collect();
            lines.push(format!("n={n} (c,λ)=({},{}) ranks {} in {t:.2?}", cert.c, cert.lambda, ranks.join(" ")));
        }
    }
    Ok(outcome(pass, lines.join("; ")))
}

fn cross_oracle() -> Result<Outcome> {
    let m = FinslerMetricSpec::funk(3)?;
    let params = ModelParams::new(3, rational(1, 2), rational(-1, 4))?;
    let mut worst = 0.0f64;
    for u in euclidean_sphere_grid(3, 50, 0)? {
        let numeric = curvature_field_derivatives(&m, &Point::zeros(3), &TangentVector::new(u.clone()))?;
        for k in 0..3 {
            for i in 0..3 {
                for j in 0..3 {
                    if i == j {
                        continue;
                    }
                    let symbolic = cov_deriv_curvature(&params, k, i, j)?.eval(&u);
                    for s in 0..3 {
                        worst = worst.max((symbolic[s] - numeric[k][i][j][s]).abs());
                    }
                }
            }
        }
    }
    Ok(outcome(worst <= 1e-6, format!("max |symbolic - numeric| over 50 points = {worst:.2e}")))
}

fn main() {
    let criteria: [(&str, fn() -> Result<Outcome>); 9] = [
        ("Funk flag curvature λ = -1/4", funk_curvature),
        ("Bryant-Shen flag curvature λ = 1", bryant_shen_curvature),
        ("horizontally parallel curvature", curvature_parallel),
        ("closed forms at the symmetric point", symmetric_closed_forms),
        ("transport invariants", transport_invariants),
        ("loop-shrinking curvature", loop_curvature),
        ("exact symbolic suite", exact_suite),
        ("finite-degree density certificate", density),
        ("symbolic vs numeric covariant derivative", cross_oracle),
    ];
    let mut failed = 0;
    for (idx, (name, run)) in criteria.iter().enumerate() {
        let o = run().unwrap_or_else(|e| outcome(false, format!("error: {e}")));
        if !o.pass {
            failed += 1;
        }
        println!(
            "criterion {}: {} [{name}] {}",
            idx + 1,
            if o.pass { "PASS" } else { "FAIL" },
            o.detail
        );
    }
    println!("acceptance: {} of 9 criteria passed", 9 - failed);
    if failed > 0 {
        std::process::exit(1);
    }
}

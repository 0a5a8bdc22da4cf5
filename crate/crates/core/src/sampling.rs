//! Deterministic sample sets: indicatrix grids and random `(x, y)` pairs.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

use crate::error::{Error, Result};
use crate::metric::{eval_norm, FinslerMetricSpec, Point, TangentVector};

fn gaussian_vector(rng: &mut ChaCha8Rng, n: usize) -> Vec<f64> {
    loop {
        let v: Vec<f64> = (0..n).map(|_| rng.sample(StandardNormal)).collect();
        if v.iter().map(|a| a * a).sum::<f64>() > 1e-12 {
            return v;
        }
    }
}

fn normalize(v: Vec<f64>) -> Vec<f64> {
    let r = v.iter().map(|a| a * a).sum::<f64>().sqrt();
    v.into_iter().map(|a| a / r).collect()
}

/// Unit vectors of the Euclidean sphere `S^{n-1}`: equally spaced angles for
/// `n = 2`, a Fibonacci lattice for `n = 3`, seeded Gaussian directions above.
pub fn euclidean_sphere_grid(n: usize, count: usize, seed: u64) -> Result<Vec<Vec<f64>>> {
    if n < 2 || count == 0 {
        return Err(Error::InvalidArgument(format!(
            "sphere grid needs n >= 2 and count > 0 (got n = {n}, count = {count})"
        )));
    }
    Ok(match n {
        2 => (0..count)
            .map(|k| {
                let a = std::f64::consts::TAU * k as f64 / count as f64;
                vec![a.cos(), a.sin()]
            })
            .collect(),
        3 => {
            let golden = std::f64::consts::PI * (3.0 - 5f64.sqrt());
            (0..count)
                .map(|k| {
                    let z = 1.0 - (2.0 * k as f64 + 1.0) / count as f64;
                    let r = (1.0 - z * z).sqrt();
                    let phi = golden * k as f64;
                    vec![r * phi.cos(), r * phi.sin(), z]
                })
                .collect()
        }
        _ => {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            (0..count).map(|_| normalize(gaussian_vector(&mut rng, n))).collect()
        }
    })
}

/// Sphere grid rescaled radially onto the indicatrix `F(x, ·) = 1`.
pub fn indicatrix_grid(
    metric: &FinslerMetricSpec,
    x: &Point,
    count: usize,
    seed: u64,
) -> Result<Vec<TangentVector>> {
    euclidean_sphere_grid(metric.dim(), count, seed)?
        .into_iter()
        .map(|u| {
            let u = TangentVector::new(u);
            let f = eval_norm(metric, x, &u)?;
            Ok(u.scaled(1.0 / f))
        })
        .collect()
}

/// Random `(x, y)` with `x` uniform in the ball of the given radius and `y`
/// a Gaussian direction.
pub fn random_point_pairs(
    n: usize,
    count: usize,
    radius: f64,
    seed: u64,
) -> Vec<(Point, TangentVector)> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..count)
        .map(|_| {
            let dir = normalize(gaussian_vector(&mut rng, n));
            let r = radius * rng.gen::<f64>().powf(1.0 / n as f64);
            let x = dir.into_iter().map(|a| a * r).collect();
            let y = gaussian_vector(&mut rng, n);
            (Point::new(x), TangentVector::new(y))
        })
        .collect()
}

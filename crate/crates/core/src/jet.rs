//! Truncated multivariate Taylor arithmetic ("jets").
//!
//! A [`Jet`] carries the Taylor coefficients of a function of the `2n`
//! variables `(x, y)` around a base point, truncated separately in the
//! x-degree and the y-degree. Arithmetic on jets is exact up to floating
//! rounding, so evaluating a closed-form norm on seeded jets yields all of its
//! mixed partial derivatives without symbolic expansion or differencing.
//!
//! Each jet records the bidegree `(vx, vy)` up to which its coefficients are
//! trustworthy. Differentiating in `x` lowers `vx` by one and in `y` lowers
//! `vy`; products take the componentwise minimum. Reading a coefficient
//! outside the valid box panics, which turns order-bookkeeping mistakes in the
//! geometric pipeline into loud failures instead of silently wrong numbers.

use std::collections::HashMap;
use std::ops::{Add, Div, Mul, Neg, Sub};
use std::sync::{Arc, Mutex, OnceLock};

/// Scalars the closed-form metrics can be evaluated over.
pub trait Scalar:
    Clone
    + Add<Output = Self>
    + Sub<Output = Self>
    + Mul<Output = Self>
    + Div<Output = Self>
    + Neg<Output = Self>
    + Add<f64, Output = Self>
    + Sub<f64, Output = Self>
    + Mul<f64, Output = Self>
{
    /// Value at the base point.
    fn value(&self) -> f64;
    fn sqrt(self) -> Self;
    /// A constant living in the same arithmetic context as `self`.
    fn constant_like(&self, v: f64) -> Self;
}

impl Scalar for f64 {
    fn value(&self) -> f64 {
        *self
    }
    fn sqrt(self) -> Self {
        f64::sqrt(self)
    }
    fn constant_like(&self, v: f64) -> Self {
        v
    }
}

/// Monomials of bounded total degree in one variable group.
#[derive(Debug)]
struct MonomialSet {
    exps: Vec<Vec<u8>>,
    index: HashMap<Vec<u8>, usize>,
    /// `(a, b, a * b)` for every pair whose product stays within the cap.
    products: Vec<(u32, u32, u32)>,
    /// `raise[v][m]` is the index of `m + e_v`, when inside the cap.
    raise: Vec<Vec<Option<u32>>>,
}

impl MonomialSet {
    fn new(nvars: usize, cap: usize) -> Self {
        let mut exps: Vec<Vec<u8>> = vec![vec![0; nvars]];
        let mut frontier = exps.clone();
        for _ in 0..cap {
            let mut next = Vec::new();
            for m in &frontier {
                // Raise only at or after the last nonzero slot so each monomial
                // is generated once.
                let start = m.iter().rposition(|&e| e > 0).unwrap_or(0);
                for v in start..nvars {
                    let mut r = m.clone();
                    r[v] += 1;
                    next.push(r);
                }
            }
            exps.extend(next.iter().cloned());
            frontier = next;
        }
        let degree: Vec<usize> = exps
            .iter()
            .map(|m| m.iter().map(|&e| e as usize).sum())
            .collect();
        let index: HashMap<Vec<u8>, usize> =
            exps.iter().enumerate().map(|(i, m)| (m.clone(), i)).collect();

        let mut products = Vec::new();
        for (a, ma) in exps.iter().enumerate() {
            for (b, mb) in exps.iter().enumerate() {
                if degree[a] + degree[b] > cap {
                    continue;
                }
                let sum: Vec<u8> = ma.iter().zip(mb).map(|(p, q)| p + q).collect();
                products.push((a as u32, b as u32, index[&sum] as u32));
            }
        }
        let raise = (0..nvars)
            .map(|v| {
                exps.iter()
                    .map(|m| {
                        let mut r = m.clone();
                        r[v] += 1;
                        index.get(&r).map(|&i| i as u32)
                    })
                    .collect()
            })
            .collect();

        Self {
            exps,
            index,
            products,
            raise,
        }
    }

    fn len(&self) -> usize {
        self.exps.len()
    }
}

/// Coefficient layout shared by all jets of one `(n, cap_x, cap_y)` shape.
#[derive(Debug)]
pub struct JetSpace {
    n: usize,
    cap_x: usize,
    cap_y: usize,
    x: MonomialSet,
    y: MonomialSet,
}

type SpaceKey = (usize, usize, usize);

fn registry() -> &'static Mutex<HashMap<SpaceKey, Arc<JetSpace>>> {
    static REGISTRY: OnceLock<Mutex<HashMap<SpaceKey, Arc<JetSpace>>>> = OnceLock::new();
    REGISTRY.get_or_init(|| Mutex::new(HashMap::new()))
}

impl JetSpace {
    /// Shared space for `n` position and `n` fiber variables truncated at
    /// x-degree `cap_x` and y-degree `cap_y`.
    pub fn get(n: usize, cap_x: usize, cap_y: usize) -> Arc<JetSpace> {
        let mut reg = registry().lock().expect("jet space registry poisoned");
        reg.entry((n, cap_x, cap_y))
            .or_insert_with(|| {
                Arc::new(JetSpace {
                    n,
                    cap_x,
                    cap_y,
                    x: MonomialSet::new(n, cap_x),
                    y: MonomialSet::new(n, cap_y),
                })
            })
            .clone()
    }

    pub fn dim(&self) -> usize {
        self.n
    }

    pub fn caps(&self) -> (usize, usize) {
        (self.cap_x, self.cap_y)
    }

    fn len(&self) -> usize {
        self.x.len() * self.y.len()
    }

    /// Seeded coordinate jets `x^i = x0^i + dx^i`, `y^i = y0^i + dy^i`.
    pub fn seed(self: &Arc<Self>, x0: &[f64], y0: &[f64]) -> (Vec<Jet>, Vec<Jet>) {
        assert_eq!(x0.len(), self.n);
        assert_eq!(y0.len(), self.n);
        let xs = (0..self.n)
            .map(|i| self.coordinate(Group::X, i, x0[i]))
            .collect();
        let ys = (0..self.n)
            .map(|i| self.coordinate(Group::Y, i, y0[i]))
            .collect();
        (xs, ys)
    }

    fn coordinate(self: &Arc<Self>, group: Group, var: usize, base: f64) -> Jet {
        let mut jet = Jet::constant(self, base);
        let ny = self.y.len();
        match group {
            Group::X => {
                if let Some(ix) = self.x.raise[var][0] {
                    jet.coeffs[ix as usize * ny] = 1.0;
                }
            }
            Group::Y => {
                if let Some(iy) = self.y.raise[var][0] {
                    jet.coeffs[iy as usize] = 1.0;
                }
            }
        }
        jet
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Group {
    X,
    Y,
}

#[derive(Debug, Clone)]
pub struct Jet {
    space: Arc<JetSpace>,
    coeffs: Vec<f64>,
    valid: (usize, usize),
}

impl Jet {
    pub fn constant(space: &Arc<JetSpace>, v: f64) -> Jet {
        let mut coeffs = vec![0.0; space.len()];
        coeffs[0] = v;
        Jet {
            space: space.clone(),
            coeffs,
            valid: (space.cap_x, space.cap_y),
        }
    }

    pub fn space(&self) -> &Arc<JetSpace> {
        &self.space
    }

    /// Bidegree box in which the coefficients are exact.
    pub fn valid(&self) -> (usize, usize) {
        self.valid
    }

    fn ny(&self) -> usize {
        self.space.y.len()
    }

    /// Partial derivative `∂^{|a|+|b|} f / ∂x^a ∂y^b` at the base point.
    ///
    /// Panics if the requested order is outside the valid box.
    pub fn partial(&self, x_orders: &[u8], y_orders: &[u8]) -> f64 {
        let dx: usize = x_orders.iter().map(|&e| e as usize).sum();
        let dy: usize = y_orders.iter().map(|&e| e as usize).sum();
        assert!(
            dx <= self.valid.0 && dy <= self.valid.1,
            "jet read at order ({dx}, {dy}) outside valid box {:?}",
            self.valid
        );
        let ix = self.space.x.index[x_orders];
        let iy = self.space.y.index[y_orders];
        let factorials: f64 = x_orders
            .iter()
            .chain(y_orders)
            .map(|&e| (1..=e as u64).product::<u64>() as f64)
            .product();
        self.coeffs[ix * self.ny() + iy] * factorials
    }

    /// First derivative in `x^k` at the base point.
    pub fn dx_at(&self, k: usize) -> f64 {
        let mut e = vec![0u8; self.space.n];
        e[k] = 1;
        self.partial(&e, &vec![0u8; self.space.n])
    }

    /// First derivative in `y^k` at the base point.
    pub fn dy_at(&self, k: usize) -> f64 {
        let mut e = vec![0u8; self.space.n];
        e[k] = 1;
        self.partial(&vec![0u8; self.space.n], &e)
    }

    /// The jet of `∂f/∂x^k`.
    pub fn d_dx(&self, k: usize) -> Jet {
        assert!(self.valid.0 > 0, "x-derivative of a jet with no x-order left");
        let ny = self.ny();
        let set = &self.space.x;
        let mut out = vec![0.0; self.coeffs.len()];
        for (m, raised) in set.raise[k].iter().enumerate() {
            if let Some(src) = raised {
                let factor = (set.exps[m][k] + 1) as f64;
                let (src, dst) = (*src as usize * ny, m * ny);
                for iy in 0..ny {
                    out[dst + iy] = factor * self.coeffs[src + iy];
                }
            }
        }
        Jet {
            space: self.space.clone(),
            coeffs: out,
            valid: (self.valid.0 - 1, self.valid.1),
        }
    }

    /// The jet of `∂f/∂y^k`.
    pub fn d_dy(&self, k: usize) -> Jet {
        assert!(self.valid.1 > 0, "y-derivative of a jet with no y-order left");
        let ny = self.ny();
        let set = &self.space.y;
        let mut out = vec![0.0; self.coeffs.len()];
        for (m, raised) in set.raise[k].iter().enumerate() {
            if let Some(src) = raised {
                let factor = (set.exps[m][k] + 1) as f64;
                for ix in 0..self.space.x.len() {
                    out[ix * ny + m] = factor * self.coeffs[ix * ny + *src as usize];
                }
            }
        }
        Jet {
            space: self.space.clone(),
            coeffs: out,
            valid: (self.valid.0, self.valid.1 - 1),
        }
    }

    fn mul_ref(&self, rhs: &Jet) -> Jet {
        debug_assert!(Arc::ptr_eq(&self.space, &rhs.space));
        let ny = self.ny();
        let nx = self.space.x.len();
        let row_live = |c: &[f64]| -> Vec<bool> {
            (0..nx)
                .map(|ix| c[ix * ny..(ix + 1) * ny].iter().any(|&v| v != 0.0))
                .collect()
        };
        let (la, lb) = (row_live(&self.coeffs), row_live(&rhs.coeffs));
        let mut out = vec![0.0; self.coeffs.len()];
        for &(xa, xb, xc) in &self.space.x.products {
            let (xa, xb, xc) = (xa as usize, xb as usize, xc as usize);
            if !la[xa] || !lb[xb] {
                continue;
            }
            let ra = &self.coeffs[xa * ny..(xa + 1) * ny];
            let rb = &rhs.coeffs[xb * ny..(xb + 1) * ny];
            let rc = &mut out[xc * ny..(xc + 1) * ny];
            for &(ya, yb, yc) in &self.space.y.products {
                rc[yc as usize] += ra[ya as usize] * rb[yb as usize];
            }
        }
        Jet {
            space: self.space.clone(),
            coeffs: out,
            valid: min_valid(self.valid, rhs.valid),
        }
    }

    /// `g(f)` for a univariate `g` given by its Taylor coefficients
    /// `g^(k)(f0) / k!`, `k = 0..=cap_x + cap_y`.
    fn compose(&self, taylor: &[f64]) -> Jet {
        let mut h = self.clone();
        h.coeffs[0] = 0.0;
        let mut acc = Jet::constant(&self.space, *taylor.last().unwrap());
        acc.valid = self.valid;
        for &t in taylor.iter().rev().skip(1) {
            acc = acc.mul_ref(&h);
            acc.coeffs[0] += t;
        }
        acc
    }

    fn order(&self) -> usize {
        self.space.cap_x + self.space.cap_y
    }

    pub fn recip(&self) -> Jet {
        let a = self.coeffs[0];
        let taylor: Vec<f64> = (0..=self.order())
            .map(|k| {
                let sign = if k % 2 == 0 { 1.0 } else { -1.0 };
                sign / a.powi(k as i32 + 1)
            })
            .collect();
        self.compose(&taylor)
    }

    fn sqrt_jet(&self) -> Jet {
        let a = self.coeffs[0];
        // binom(1/2, k) a^(1/2 - k)
        let mut taylor = Vec::with_capacity(self.order() + 1);
        let mut binom = 1.0;
        let root = a.sqrt();
        let mut pow = root;
        for k in 0..=self.order() {
            taylor.push(binom * pow);
            binom *= (0.5 - k as f64) / (k as f64 + 1.0);
            pow /= a;
        }
        self.compose(&taylor)
    }

    fn zip(&self, rhs: &Jet, f: impl Fn(f64, f64) -> f64) -> Jet {
        debug_assert!(Arc::ptr_eq(&self.space, &rhs.space));
        Jet {
            space: self.space.clone(),
            coeffs: self
                .coeffs
                .iter()
                .zip(&rhs.coeffs)
                .map(|(&a, &b)| f(a, b))
                .collect(),
            valid: min_valid(self.valid, rhs.valid),
        }
    }
}

fn min_valid(a: (usize, usize), b: (usize, usize)) -> (usize, usize) {
    (a.0.min(b.0), a.1.min(b.1))
}

impl Add<&Jet> for &Jet {
    type Output = Jet;
    fn add(self, rhs: &Jet) -> Jet {
        self.zip(rhs, |a, b| a + b)
    }
}

impl Sub<&Jet> for &Jet {
    type Output = Jet;
    fn sub(self, rhs: &Jet) -> Jet {
        self.zip(rhs, |a, b| a - b)
    }
}

impl Mul<&Jet> for &Jet {
    type Output = Jet;
    fn mul(self, rhs: &Jet) -> Jet {
        self.mul_ref(rhs)
    }
}

impl Div<&Jet> for &Jet {
    type Output = Jet;
    fn div(self, rhs: &Jet) -> Jet {
        self.mul_ref(&rhs.recip())
    }
}

macro_rules! owned_binop {
    ($tr:ident, $method:ident) => {
        impl $tr<Jet> for Jet {
            type Output = Jet;
            fn $method(self, rhs: Jet) -> Jet {
                (&self).$method(&rhs)
            }
        }
    };
}
owned_binop!(Add, add);
owned_binop!(Sub, sub);
owned_binop!(Mul, mul);
owned_binop!(Div, div);

impl Neg for Jet {
    type Output = Jet;
    fn neg(mut self) -> Jet {
        self.coeffs.iter_mut().for_each(|c| *c = -*c);
        self
    }
}

impl Add<f64> for Jet {
    type Output = Jet;
    fn add(mut self, rhs: f64) -> Jet {
        self.coeffs[0] += rhs;
        self
    }
}

impl Sub<f64> for Jet {
    type Output = Jet;
    fn sub(mut self, rhs: f64) -> Jet {
        self.coeffs[0] -= rhs;
        self
    }
}

impl Mul<f64> for Jet {
    type Output = Jet;
    fn mul(mut self, rhs: f64) -> Jet {
        self.coeffs.iter_mut().for_each(|c| *c *= rhs);
        self
    }
}

impl Scalar for Jet {
    fn value(&self) -> f64 {
        self.coeffs[0]
    }
    fn sqrt(self) -> Self {
        self.sqrt_jet()
    }
    fn constant_like(&self, v: f64) -> Self {
        let mut c = Jet::constant(&self.space, v);
        c.valid = (self.space.cap_x, self.space.cap_y);
        c
    }
}

//! Curvature fields at a point where `F = |y|` and `P = c|y|`, their
//! covariant derivatives, the linear systems that recover `y^i ξ_ij` and
//! `y^k y^i ξ_ij`, and the bracket identities, all over the sphere ring.

use num_rational::BigRational;
use num_traits::{One, Zero};
use serde::Serialize;

use super::field::{lie_bracket, SphereVectorField};
use super::linalg::{determinant, first_order_matrix, inverse, second_order_matrix};
use super::poly::{integer, Exponents, SpherePolynomial};
use crate::error::{Error, Result};

/// Dimension and the constants `c` (projective factor slope) and `λ`
/// (flag curvature) at the base point.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ModelParams {
    pub n: usize,
    pub c: BigRational,
    pub lambda: BigRational,
}

impl ModelParams {
    pub fn new(n: usize, c: BigRational, lambda: BigRational) -> Result<Self> {
        if n < 2 {
            return Err(Error::InvalidArgument(format!("dimension must be >= 2, got {n}")));
        }
        Ok(Self { n, c, lambda })
    }

    /// `c = 0` or `λ = 0`, where the generating argument does not apply.
    pub fn is_degenerate(&self) -> bool {
        self.c.is_zero() || self.lambda.is_zero()
    }

    fn check(&self, idx: &[usize]) -> Result<()> {
        if let Some(bad) = idx.iter().find(|&&i| i >= self.n) {
            return Err(Error::InvalidArgument(format!(
                "index {bad} out of range for dimension {}",
                self.n
            )));
        }
        Ok(())
    }

    fn y(&self, i: usize) -> SpherePolynomial {
        SpherePolynomial::var(self.n, i)
    }

    fn c2(&self) -> BigRational {
        &self.c * &self.c
    }
}

fn delta(a: usize, b: usize) -> BigRational {
    if a == b {
        BigRational::one()
    } else {
        BigRational::zero()
    }
}

/// `ξ_ij = λ(y^i ∂_j − y^j ∂_i)`.
pub fn rotation_field(p: &ModelParams, i: usize, j: usize) -> Result<SphereVectorField> {
    p.check(&[i, j])?;
    let mut comps = vec![SpherePolynomial::zero(p.n); p.n];
    if i != j {
        comps[j] = p.y(i).scale(&p.lambda);
        comps[i] = p.y(j).scale(&-&p.lambda);
    }
    Ok(SphereVectorField::from_components(comps))
}

/// `y^m = Π (y^s)^{m_s}` on the sphere.
pub fn monomial(p: &ModelParams, m: &[u16]) -> Result<SpherePolynomial> {
    if m.len() != p.n {
        return Err(Error::InvalidArgument(format!(
            "multi-index of length {} for dimension {}",
            m.len(),
            p.n
        )));
    }
    Ok(SpherePolynomial::monomial(p.n, m.to_vec(), BigRational::one()))
}

/// `y^m ξ_ij`.
pub fn monomial_field(p: &ModelParams, m: &[u16], i: usize, j: usize) -> Result<SphereVectorField> {
    Ok(rotation_field(p, i, j)?.mul_poly(&monomial(p, m)?))
}

/// `Σ_s y^s ξ_sj`.
pub fn contracted_field(p: &ModelParams, j: usize) -> Result<SphereVectorField> {
    let mut acc = SphereVectorField::zero(p.n);
    for s in 0..p.n {
        acc = acc.add(&rotation_field(p, s, j)?.mul_poly(&p.y(s)));
    }
    Ok(acc)
}

fn need_distinct(i: usize, j: usize) -> Result<()> {
    if i == j {
        return Err(Error::InvalidArgument(format!(
            "curvature field indices must differ (got {i}, {j})"
        )));
    }
    Ok(())
}

/// `∇_k ξ_ij = c(2 y^k ξ_ij + δ^k_i Σ_s y^s ξ_sj − δ^k_j Σ_s y^s ξ_si)` on the sphere.
pub fn cov_deriv_curvature(p: &ModelParams, k: usize, i: usize, j: usize) -> Result<SphereVectorField> {
    p.check(&[k, i, j])?;
    need_distinct(i, j)?;
    let mut f = rotation_field(p, i, j)?.mul_poly(&p.y(k)).scale(&integer(2));
    if k == i {
        f = f.add(&contracted_field(p, j)?);
    }
    if k == j {
        f = f.sub(&contracted_field(p, i)?);
    }
    Ok(f.scale(&p.c))
}

/// Full expression for `∇_m ∇_k ξ_ij` on the sphere:
/// `(λ + c²)(δ^m_j ξ_ki − δ^m_i ξ_kj) + c²(δ^k_j ξ_mi − δ^k_i ξ_mj) + 2(c² − λ)δ^m_k ξ_ij
///  + 4c²(y^m y^k ξ_ij + δ^i_k y^m Σ y^s ξ_sj − δ^j_k y^m Σ y^s ξ_si
///        − δ^j_m y^k Σ y^s ξ_si + δ^i_m y^k Σ y^s ξ_sj)`.
pub fn second_cov_deriv_curvature(
    p: &ModelParams,
    m: usize,
    k: usize,
    i: usize,
    j: usize,
) -> Result<SphereVectorField> {
    p.check(&[m, k, i, j])?;
    need_distinct(i, j)?;
    let c2 = p.c2();
    let xi = |a: usize, b: usize| rotation_field(p, a, b);
    let mut f = xi(k, i)?
        .scale(&delta(m, j))
        .sub(&xi(k, j)?.scale(&delta(m, i)))
        .scale(&(&p.lambda + &c2));
    f = f.add(
        &xi(m, i)?
            .scale(&delta(k, j))
            .sub(&xi(m, j)?.scale(&delta(k, i)))
            .scale(&c2),
    );
    f = f.add(&xi(i, j)?.scale(&(delta(m, k) * integer(2) * (&c2 - &p.lambda))));
    let sj = contracted_field(p, j)?;
    let si = contracted_field(p, i)?;
    let mut quad = xi(i, j)?.mul_poly(&(&p.y(m) * &p.y(k)));
    quad = quad.add(&sj.mul_poly(&p.y(m)).scale(&delta(i, k)));
    quad = quad.sub(&si.mul_poly(&p.y(m)).scale(&delta(j, k)));
    quad = quad.sub(&si.mul_poly(&p.y(k)).scale(&delta(j, m)));
    quad = quad.add(&sj.mul_poly(&p.y(k)).scale(&delta(i, m)));
    Ok(f.add(&quad.scale(&(c2 * integer(4)))))
}

fn distinct(idx: &[usize]) -> bool {
    idx.iter()
        .enumerate()
        .all(|(a, x)| idx[a + 1..].iter().all(|y| y != x))
}

/// `∇_m ∇_k ξ_ij = 4c² y^m y^k ξ_ij` for pairwise distinct `m, k, i, j`.
pub fn second_cov_mkij(p: &ModelParams, m: usize, k: usize, i: usize, j: usize) -> Result<SphereVectorField> {
    p.check(&[m, k, i, j])?;
    if !distinct(&[m, k, i, j]) {
        return Err(Error::InvalidArgument("indices must be pairwise distinct".into()));
    }
    Ok(rotation_field(p, i, j)?
        .mul_poly(&(&p.y(m) * &p.y(k)))
        .scale(&(p.c2() * integer(4))))
}

/// `∇_k ∇_k ξ_ij = 2(c² − λ)ξ_ij + 4c²(y^k)² ξ_ij` for `k ∉ {i, j}`.
pub fn second_cov_kkij(p: &ModelParams, k: usize, i: usize, j: usize) -> Result<SphereVectorField> {
    p.check(&[k, i, j])?;
    if !distinct(&[k, i, j]) {
        return Err(Error::InvalidArgument("indices must be pairwise distinct".into()));
    }
    let xi = rotation_field(p, i, j)?;
    Ok(xi
        .scale(&((p.c2() - &p.lambda) * integer(2)))
        .add(&xi.mul_poly(&(&p.y(k) * &p.y(k))).scale(&(p.c2() * integer(4)))))
}

/// `∇_i ∇_i ξ_ij = −3λ ξ_ij + 4c²(y^i)² ξ_ij + 8c² Σ_s y^i y^s ξ_sj`.
pub fn second_cov_iiij(p: &ModelParams, i: usize, j: usize) -> Result<SphereVectorField> {
    p.check(&[i, j])?;
    need_distinct(i, j)?;
    let xi = rotation_field(p, i, j)?;
    let c2 = p.c2();
    Ok(xi
        .scale(&(&p.lambda * integer(-3)))
        .add(&xi.mul_poly(&(&p.y(i) * &p.y(i))).scale(&(&c2 * integer(4))))
        .add(&contracted_field(p, j)?.mul_poly(&p.y(i)).scale(&(c2 * integer(8)))))
}

/// `∇_i ∇_k ξ_ij = −(λ + c²)ξ_kj + 4c² y^i y^k ξ_ij + 4c² Σ_s y^k y^s ξ_sj`
/// for `k ∉ {i, j}`.
pub fn second_cov_ikij(p: &ModelParams, k: usize, i: usize, j: usize) -> Result<SphereVectorField> {
    p.check(&[k, i, j])?;
    if !distinct(&[k, i, j]) {
        return Err(Error::InvalidArgument("indices must be pairwise distinct".into()));
    }
    let c2 = p.c2();
    Ok(rotation_field(p, k, j)?
        .scale(&-(&p.lambda + &c2))
        .add(
            &rotation_field(p, i, j)?
                .mul_poly(&(&p.y(i) * &p.y(k)))
                .scale(&(&c2 * integer(4))),
        )
        .add(&contracted_field(p, j)?.mul_poly(&p.y(k)).scale(&(c2 * integer(4)))))
}

fn nonzero_c(p: &ModelParams) -> Result<()> {
    if p.c.is_zero() {
        return Err(Error::InvalidArgument("the system needs c != 0".into()));
    }
    Ok(())
}

fn combine(coeffs: &[BigRational], fields: &[SphereVectorField], n: usize) -> SphereVectorField {
    coeffs
        .iter()
        .zip(fields)
        .fold(SphereVectorField::zero(n), |acc, (a, f)| acc.add(&f.scale(a)))
}

/// Recovers `y^i ξ_ij` for every `i ≠ j` from the covariant derivatives
/// `∇_i ξ_ij = c Σ_{i'} (2I + J)_{ii'} y^{i'} ξ_{i'j}`, and checks the result
/// against the direct products. Returned as `(i, field)` pairs.
pub fn solve_first_order_system(p: &ModelParams, j: usize) -> Result<Vec<(usize, SphereVectorField)>> {
    p.check(&[j])?;
    nonzero_c(p)?;
    let idx: Vec<usize> = (0..p.n).filter(|&i| i != j).collect();
    let mat = first_order_matrix(idx.len());
    let det = determinant(&mat);
    let expected = integer(1i64 << (p.n - 2)) * integer(p.n as i64 + 1);
    if det != expected {
        return Err(Error::Internal(format!("system determinant {det}, expected {expected}")));
    }
    let inv = inverse(&mat).ok_or_else(|| Error::Internal("singular first-order system".into()))?;
    let rhs: Vec<SphereVectorField> = idx
        .iter()
        .map(|&i| cov_deriv_curvature(p, i, i, j))
        .collect::<Result<_>>()?;
    let inv_c = BigRational::one() / &p.c;
    let mut out = Vec::with_capacity(idx.len());
    for (row, &i) in idx.iter().enumerate() {
        let u = combine(&inv[row], &rhs, p.n).scale(&inv_c);
        let direct = rotation_field(p, i, j)?.mul_poly(&p.y(i));
        if u != direct {
            return Err(Error::Internal(format!(
                "recovered y^{i} ξ_{i}{j} = {u} differs from {direct}"
            )));
        }
        out.push((i, u));
    }
    Ok(out)
}

/// Recovers `y^k y^i ξ_ij` for every `i ≠ j` (`k ≠ j`) from second covariant
/// derivatives via the `(I + J)` system scaled by `4c²`.
///
/// Rows with `i ≠ k` use `∇_i ∇_k ξ_ij + (c² + λ) ξ_kj`. The row `i = k`
/// is not of that shape; it is assembled from `E = ∇_k ∇_k ξ_kj + 3λ ξ_kj`
/// as `(n E − Σ_{i ≠ j,k} b_i) / (n + 1)`.
pub fn solve_second_order_system(
    p: &ModelParams,
    k: usize,
    j: usize,
) -> Result<Vec<(usize, SphereVectorField)>> {
    p.check(&[k, j])?;
    nonzero_c(p)?;
    if k == j {
        return Err(Error::InvalidArgument("the second-order system needs k != j".into()));
    }
    let idx: Vec<usize> = (0..p.n).filter(|&i| i != j).collect();
    let mat = second_order_matrix(idx.len());
    let det = determinant(&mat);
    if det != integer(p.n as i64) {
        return Err(Error::Internal(format!("system determinant {det}, expected {}", p.n)));
    }
    let inv = inverse(&mat).ok_or_else(|| Error::Internal("singular second-order system".into()))?;
    let shift = &p.c2() + &p.lambda;
    let xi_kj = rotation_field(p, k, j)?;
    let mut rhs: Vec<Option<SphereVectorField>> = vec![None; idx.len()];
    for (row, &i) in idx.iter().enumerate() {
        if i != k {
            let b = second_cov_deriv_curvature(p, i, k, i, j)?.add(&xi_kj.scale(&shift));
            rhs[row] = Some(b);
        }
    }
    let row_k = idx.iter().position(|&i| i == k).expect("k != j is in the index set");
    let e = second_cov_deriv_curvature(p, k, k, k, j)?.add(&xi_kj.scale(&(&p.lambda * integer(3))));
    let others = rhs
        .iter()
        .flatten()
        .fold(SphereVectorField::zero(p.n), |acc, b| acc.add(b));
    let n1 = integer(p.n as i64 + 1);
    rhs[row_k] = Some(
        e.scale(&(integer(p.n as i64) / &n1))
            .sub(&others.scale(&(BigRational::one() / &n1))),
    );
    let rhs: Vec<SphereVectorField> = rhs.into_iter().map(|b| b.expect("filled")).collect();

    let scale = BigRational::one() / (p.c2() * integer(4));
    let yk = p.y(k);
    let mut out = Vec::with_capacity(idx.len());
    for (row, &i) in idx.iter().enumerate() {
        let u = combine(&inv[row], &rhs, p.n).scale(&scale);
        let direct = rotation_field(p, i, j)?.mul_poly(&(&yk * &p.y(i)));
        if u != direct {
            return Err(Error::Internal(format!(
                "recovered y^{k} y^{i} ξ_{i}{j} = {u} differs from {direct}"
            )));
        }
        out.push((i, u));
    }
    Ok(out)
}

/// Both sides of an exact identity between fields.
#[derive(Debug, Clone, PartialEq)]
pub struct IdentityCheck {
    pub holds: bool,
    pub lhs: SphereVectorField,
    pub rhs: SphereVectorField,
}

impl IdentityCheck {
    fn new(lhs: SphereVectorField, rhs: SphereVectorField) -> Self {
        Self {
            holds: lhs == rhs,
            lhs,
            rhs,
        }
    }

    /// Witness of a failure: `lhs − rhs`.
    pub fn difference(&self) -> SphereVectorField {
        self.lhs.sub(&self.rhs)
    }
}

/// `Σ_s y^s ξ_ks = λ(y^k C − |y|² ∂_k)` with `C = Σ y^s ∂_s` and `|y| = 1`.
pub fn liouville_identity_check(p: &ModelParams, k: usize) -> Result<IdentityCheck> {
    p.check(&[k])?;
    let mut lhs = SphereVectorField::zero(p.n);
    for s in 0..p.n {
        lhs = lhs.add(&rotation_field(p, k, s)?.mul_poly(&p.y(s)));
    }
    let comps = (0..p.n)
        .map(|s| {
            let mut v = &p.y(k) * &p.y(s);
            if s == k {
                v = &v - &SpherePolynomial::one(p.n);
            }
            v.scale(&p.lambda)
        })
        .collect();
    Ok(IdentityCheck::new(lhs, SphereVectorField::new(comps)?))
}

fn shifted(m: &[u16], k: usize, up: bool) -> Option<Exponents> {
    let mut e = m.to_vec();
    if up {
        e[k] += 1;
    } else {
        e[k] = e[k].checked_sub(1)?;
    }
    Some(e)
}

/// `[y^m ξ_ij, Σ_s y^s ξ_ks]` against its closed form, with `p = ℓ(m)`:
///
/// * `k ∉ {i, j}`: `λ(m_k y^{m−1_k} ξ_ij − p y^{m+1_k} ξ_ij)`
/// * `k = i`: `λ(m_i y^{m−1_i} ξ_ij + (1 − p) y^{m+1_i} ξ_ij + Σ_{s≠i} y^{m+1_s} ξ_sj)`
pub fn bracket_recursion_check(
    p: &ModelParams,
    m: &[u16],
    i: usize,
    j: usize,
    k: usize,
) -> Result<IdentityCheck> {
    p.check(&[i, j, k])?;
    need_distinct(i, j)?;
    if k == j {
        return Err(Error::InvalidArgument(
            "closed forms cover k ∉ {i, j} and k = i".into(),
        ));
    }
    let len: u16 = m.iter().sum();
    let lhs = lie_bracket(&monomial_field(p, m, i, j)?, &contracted_field_k(p, k)?)?;
    let term = |e: Option<Exponents>, a: usize, b: usize, coeff: BigRational| -> Result<SphereVectorField> {
        match e {
            Some(e) if !coeff.is_zero() => Ok(monomial_field(p, &e, a, b)?.scale(&coeff)),
            _ => Ok(SphereVectorField::zero(p.n)),
        }
    };
    let mk = integer(m[k] as i64);
    let mut rhs = term(shifted(m, k, false), i, j, mk)?;
    if k == i {
        rhs = rhs.add(&term(shifted(m, i, true), i, j, integer(1 - len as i64))?);
        for s in (0..p.n).filter(|&s| s != i) {
            rhs = rhs.add(&term(shifted(m, s, true), s, j, BigRational::one())?);
        }
    } else {
        rhs = rhs.sub(&term(shifted(m, k, true), i, j, integer(len as i64))?);
    }
    Ok(IdentityCheck::new(lhs, rhs.scale(&p.lambda)))
}

/// `Σ_s y^s ξ_ks`.
fn contracted_field_k(p: &ModelParams, k: usize) -> Result<SphereVectorField> {
    Ok(contracted_field(p, k)?.neg())
}

/// Outcome of the exact formula suite for one parameter set.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct FormulaSuiteSummary {
    pub checks: usize,
    pub failures: Vec<String>,
}

/// Every identity at once: structure constants, the cyclic relation, the
/// Liouville identity, first/second covariant derivative specializations,
/// both linear systems and bracket recursions for `ℓ(m) ≤ max_len`.
pub fn formula_suite(p: &ModelParams, max_len: u16) -> Result<FormulaSuiteSummary> {
    let n = p.n;
    let mut checks = 0;
    let mut failures = Vec::new();
    let mut record = |ok: bool, what: String| {
        checks += 1;
        if !ok {
            failures.push(what);
        }
    };
    let xi = |a: usize, b: usize| rotation_field(p, a, b);

    for i in 0..n {
        for j in 0..n {
            for k in 0..n {
                if distinct(&[i, j, k]) {
                    let b = lie_bracket(&xi(i, j)?, &xi(j, k)?)?;
                    record(b == xi(i, k)?.scale(&p.lambda), format!("[ξ{i}{j}, ξ{j}{k}] = λ ξ{i}{k}"));
                    let cyc = xi(j, k)?
                        .mul_poly(&p.y(i))
                        .add(&xi(k, i)?.mul_poly(&p.y(j)))
                        .add(&xi(i, j)?.mul_poly(&p.y(k)));
                    record(cyc.is_zero(), format!("cyclic relation ({i},{j},{k})"));
                    let d = cov_deriv_curvature(p, k, i, j)?;
                    let closed = xi(i, j)?.mul_poly(&p.y(k)).scale(&(&p.c * integer(2)));
                    record(d == closed, format!("∇{k} ξ{i}{j} = 2c y^{k} ξ{i}{j}"));
                }
                for l in 0..n {
                    if distinct(&[i, j, k, l]) {
                        let b = lie_bracket(&xi(i, j)?, &xi(k, l)?)?;
                        record(b.is_zero(), format!("[ξ{i}{j}, ξ{k}{l}] = 0"));
                        let g = second_cov_deriv_curvature(p, l, k, i, j)?;
                        record(g == second_cov_mkij(p, l, k, i, j)?, format!("second cov mkij ({l}{k}{i}{j})"));
                    }
                }
            }
        }
    }
    for k in 0..n {
        record(liouville_identity_check(p, k)?.holds, format!("Liouville identity k={k}"));
    }
    for i in 0..n {
        for j in 0..n {
            if i == j {
                continue;
            }
            let g = second_cov_deriv_curvature(p, i, i, i, j)?;
            record(g == second_cov_iiij(p, i, j)?, format!("second cov iiij ({i}{j})"));
            for k in (0..n).filter(|&k| k != i && k != j) {
                let g = second_cov_deriv_curvature(p, k, k, i, j)?;
                record(g == second_cov_kkij(p, k, i, j)?, format!("second cov kkij ({k}{i}{j})"));
                let g = second_cov_deriv_curvature(p, i, k, i, j)?;
                record(g == second_cov_ikij(p, k, i, j)?, format!("second cov ikij ({k}{i}{j})"));
            }
        }
    }
    if !p.c.is_zero() {
        for j in 0..n {
            record(solve_first_order_system(p, j).is_ok(), format!("first-order system j={j}"));
            for k in (0..n).filter(|&k| k != j) {
                record(
                    solve_second_order_system(p, k, j).is_ok(),
                    format!("second-order system k={k} j={j}"),
                );
            }
        }
    }
    for len in 1..=max_len {
        for m in multi_indices(n, len) {
            for i in 0..n {
                for j in (0..n).filter(|&j| j != i) {
                    for k in (0..n).filter(|&k| k != j) {
                        let chk = bracket_recursion_check(p, &m, i, j, k)?;
                        record(chk.holds, format!("bracket recursion m={m:?} i={i} j={j} k={k}"));
                    }
                }
            }
        }
    }
    Ok(FormulaSuiteSummary { checks, failures })
}

/// All multi-indices of length `n` with entries summing to `len`, in
/// lexicographic order.
pub fn multi_indices(n: usize, len: u16) -> Vec<Exponents> {
    fn rec(n: usize, left: u16, prefix: &mut Exponents, out: &mut Vec<Exponents>) {
        if prefix.len() + 1 == n {
            prefix.push(left);
            out.push(prefix.clone());
            prefix.pop();
            return;
        }
        for v in (0..=left).rev() {
            prefix.push(v);
            rec(n, left - v, prefix, out);
            prefix.pop();
        }
    }
    let mut out = Vec::new();
    rec(n, len, &mut Vec::new(), &mut out);
    out
}

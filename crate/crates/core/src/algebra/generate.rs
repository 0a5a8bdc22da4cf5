//! Degree-truncated generation of the holonomy algebra and the comparison
//! with the module of all polynomial multiples of rotations.

use std::cmp::Reverse;
use std::io::Write;

use num_rational::BigRational;
use num_traits::One;
use rayon::prelude::*;
use serde::Serialize;

use super::field::{lie_bracket, FieldKey, SphereVectorField};
use super::formulas::{
    cov_deriv_curvature, monomial_field, multi_indices, rotation_field, second_cov_deriv_curvature,
    ModelParams,
};
use super::linalg::SparseEchelon;
use crate::error::{Error, Result};

/// How a stored field was obtained.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum GenerationRecord {
    Seed { label: String },
    Bracket { depth: usize, left: usize, right: usize },
}

/// Linearly independent fields of the truncated algebra, with an echelon
/// form of their span.
#[derive(Debug, Clone)]
pub struct GradedBasis {
    n: usize,
    degree_cap: usize,
    fields: Vec<SphereVectorField>,
    records: Vec<GenerationRecord>,
    echelon: SparseEchelon<FieldKey>,
    /// Bracket rounds performed.
    pub depth_reached: usize,
    /// The depth cap stopped generation before a fixpoint.
    pub truncated: bool,
}

impl GradedBasis {
    fn new(n: usize, degree_cap: usize) -> Self {
        Self {
            n,
            degree_cap,
            fields: Vec::new(),
            records: Vec::new(),
            echelon: SparseEchelon::new(),
            depth_reached: 0,
            truncated: false,
        }
    }

    fn try_insert(&mut self, f: SphereVectorField, record: GenerationRecord) -> bool {
        match f.degree() {
            Some(d) if d <= self.degree_cap => {}
            _ => return false,
        }
        if self.echelon.insert(&f.coordinates()) {
            self.fields.push(f);
            self.records.push(record);
            true
        } else {
            false
        }
    }

    pub fn dim(&self) -> usize {
        self.n
    }

    pub fn fields(&self) -> &[SphereVectorField] {
        &self.fields
    }

    pub fn records(&self) -> &[GenerationRecord] {
        &self.records
    }

    pub fn rank(&self) -> usize {
        self.echelon.rank()
    }

    /// Dimension of the span intersected with fields of degree `≤ p`.
    ///
    /// Echelon rows are led by their highest-degree coordinate, so a
    /// combination has the degree of its highest row and this is a count of
    /// rows by leading degree.
    pub fn rank_by_degree(&self, p: usize) -> usize {
        self.echelon
            .pivots()
            .filter(|(Reverse(d), _, _)| *d <= p + 1)
            .count()
    }

    pub fn contains(&self, f: &SphereVectorField) -> bool {
        self.echelon.contains(&f.coordinates())
    }
}

/// Seeds: the curvature fields and their first and second covariant
/// derivatives, in a fixed order.
fn seeds(p: &ModelParams) -> Result<Vec<(String, SphereVectorField)>> {
    let n = p.n;
    let mut out = Vec::new();
    for i in 0..n {
        for j in i + 1..n {
            out.push((format!("xi_{}{}", i + 1, j + 1), rotation_field(p, i, j)?));
        }
    }
    for k in 0..n {
        for i in 0..n {
            for j in i + 1..n {
                out.push((
                    format!("nabla_{} xi_{}{}", k + 1, i + 1, j + 1),
                    cov_deriv_curvature(p, k, i, j)?,
                ));
            }
        }
    }
    for m in 0..n {
        for k in 0..n {
            for i in 0..n {
                for j in i + 1..n {
                    out.push((
                        format!("nabla_{} nabla_{} xi_{}{}", m + 1, k + 1, i + 1, j + 1),
                        second_cov_deriv_curvature(p, m, k, i, j)?,
                    ));
                }
            }
        }
    }
    Ok(out)
}

/// Brackets breadth-first until no new direction of degree `≤ degree_cap`
/// appears or `bracket_depth_cap` rounds have run.
///
/// Each round brackets the previous round's new fields with everything
/// stored so far, skipping pairs whose degrees already add up past the cap.
/// Brackets are computed in parallel and inserted in pair order.
pub fn generate_ihol_basis(
    p: &ModelParams,
    degree_cap: usize,
    bracket_depth_cap: usize,
) -> Result<GradedBasis> {
    let mut basis = GradedBasis::new(p.n, degree_cap);
    for (label, f) in seeds(p)? {
        basis.try_insert(f, GenerationRecord::Seed { label });
    }
    let mut frontier_start = 0;
    let mut depth = 0;
    while frontier_start < basis.fields.len() {
        if depth == bracket_depth_cap {
            basis.truncated = true;
            break;
        }
        depth += 1;
        let end = basis.fields.len();
        let degrees: Vec<usize> = basis
            .fields
            .iter()
            .map(|f| f.degree().unwrap_or(0))
            .collect();
        let pairs: Vec<(usize, usize)> = (frontier_start..end)
            .flat_map(|a| (0..a).map(move |b| (a, b)))
            .filter(|&(a, b)| degrees[a] + degrees[b] <= degree_cap)
            .collect();
        let fields = &basis.fields;
        let brackets: Vec<SphereVectorField> = pairs
            .par_iter()
            .map(|&(a, b)| lie_bracket(&fields[a], &fields[b]))
            .collect::<Result<_>>()?;
        for ((a, b), f) in pairs.into_iter().zip(brackets) {
            basis.try_insert(
                f,
                GenerationRecord::Bracket {
                    depth,
                    left: a,
                    right: b,
                },
            );
        }
        frontier_start = end;
    }
    basis.depth_reached = depth;
    Ok(basis)
}

fn module_echelon(n: usize, p: usize, exact_len: Option<usize>) -> Result<SparseEchelon<FieldKey>> {
    let params = ModelParams::new(n, BigRational::one(), BigRational::one())?;
    let mut ech = SparseEchelon::new();
    let lens: Vec<usize> = match exact_len {
        Some(l) => vec![l],
        None => (0..=p).collect(),
    };
    for len in lens {
        for m in multi_indices(n, len as u16) {
            for i in 0..n {
                for j in i + 1..n {
                    ech.insert(&monomial_field(&params, &m, i, j)?.coordinates());
                }
            }
        }
    }
    Ok(ech)
}

/// Rank of `{y^m ξ_ij : ℓ(m) ≤ p}` in the sphere's vector fields.
pub fn monomial_module_dimension(n: usize, p: usize) -> Result<usize> {
    Ok(module_echelon(n, p, None)?.rank())
}

/// Rank of `{y^m ξ_ij : ℓ(m) = len}` alone.
pub fn monomial_layer_rank(n: usize, len: usize) -> Result<usize> {
    Ok(module_echelon(n, len, Some(len))?.rank())
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct CertificateRow {
    pub p: usize,
    pub generated_rank: usize,
    pub target_rank: usize,
    pub pass: bool,
}

/// Finite-degree comparison between the generated algebra and the module of
/// polynomial multiples of rotations.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct DensityCertificate {
    pub n: usize,
    pub c: String,
    pub lambda: String,
    pub p_max: usize,
    /// `c = 0` or `λ = 0`: the certificate cannot pass and this is expected.
    pub degenerate: bool,
    pub truncated: bool,
    pub rows: Vec<CertificateRow>,
    /// A target field of the first failing degree that the generated span
    /// misses.
    pub witness: Option<String>,
    pub passed: bool,
}

impl DensityCertificate {
    pub fn to_json(&self) -> Result<String> {
        serde_json::to_string_pretty(self).map_err(|e| Error::Internal(e.to_string()))
    }

    pub fn write_csv<W: Write>(&self, out: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        let err = |e: csv::Error| Error::Internal(format!("csv output failed: {e}"));
        w.write_record(["p", "generated_rank", "target_rank", "status"])
            .map_err(err)?;
        for r in &self.rows {
            w.write_record([
                r.p.to_string(),
                r.generated_rank.to_string(),
                r.target_rank.to_string(),
                if r.pass { "pass" } else { "fail" }.to_string(),
            ])
            .map_err(err)?;
        }
        w.flush().map_err(|e| Error::Internal(e.to_string()))
    }
}

pub fn density_certificate(p: &ModelParams, p_max: usize) -> Result<DensityCertificate> {
    density_certificate_with_depth(p, p_max, 2 * p_max + 2)
}

pub fn density_certificate_with_depth(
    params: &ModelParams,
    p_max: usize,
    bracket_depth_cap: usize,
) -> Result<DensityCertificate> {
    let n = params.n;
    let basis = generate_ihol_basis(params, p_max, bracket_depth_cap)?;
    let unit = ModelParams::new(n, BigRational::one(), BigRational::one())?;
    let mut rows = Vec::new();
    let mut witness = None;
    for p in 0..=p_max {
        let generated_rank = basis.rank_by_degree(p);
        let target_rank = monomial_module_dimension(n, p)?;
        let pass = generated_rank == target_rank;
        if !pass && witness.is_none() {
            'search: for len in 0..=p {
                for m in multi_indices(n, len as u16) {
                    for i in 0..n {
                        for j in i + 1..n {
                            let f = monomial_field(&unit, &m, i, j)?;
                            if !basis.contains(&f) {
                                witness = Some(format!("y^{m:?} * (y{} d/dy{} - y{} d/dy{}) = {f}", i + 1, j + 1, j + 1, i + 1));
                                break 'search;
                            }
                        }
                    }
                }
            }
        }
        rows.push(CertificateRow {
            p,
            generated_rank,
            target_rank,
            pass,
        });
    }
    let passed = rows.iter().all(|r| r.pass);
    Ok(DensityCertificate {
        n,
        c: params.c.to_string(),
        lambda: params.lambda.to_string(),
        p_max,
        degenerate: params.is_degenerate(),
        truncated: basis.truncated,
        rows,
        witness,
        passed,
    })
}

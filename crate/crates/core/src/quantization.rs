//! Holomorphic sections of `O(k)`, L² Gram matrices, Bergman densities,
//! Toeplitz and Kostant–Souriau operators, and the finite-k identities
//! relating them.
//!
//! A section is a monomial `Π Z^α` in the homogeneous coordinates of each
//! projective factor. Its pointwise norm `|s|²_h = Π x^α e^{-kψ}` is formed
//! from the moment coordinates `x` and the global part `ψ` of the potential,
//! so it never suffers the overflow or cancellation of the affine chart.
//! Operator matrices use `A_ab = ⟨A s_a, s_b⟩`.

use std::ops::Range;

use nalgebra::DMatrix;
use num_complex::Complex64;
use serde::Serialize;

use crate::asymptotics::{fit_expansion, ExpansionFit};
use crate::curvature::{laplacian_of_jet, scalar_and_laplacian_field};
use crate::error::{Error, Result};
use crate::functions::{Field, SmoothFunction};
use crate::jet::{Jet, JetVars};
use crate::model::{metric_from_jet, FactorKind, KahlerModel, Layout, ScalarField};
use crate::quadrature::compensated_sum;

type C64 = Complex64;

/// Gram matrices with a scaled condition number above this are rejected.
pub const MAX_GRAM_CONDITION: f64 = 1e12;

/// One projective factor's share of a section: homogeneous degree `k·d`.
#[derive(Debug, Clone, PartialEq)]
pub struct SectionBlock {
    pub coords: Range<usize>,
    /// Class `d` of the factor.
    pub class: u32,
    pub degree: u32,
}

impl SectionBlock {
    fn width(&self) -> usize {
        self.coords.len() + 1
    }
}

/// Monomial basis of `H⁰(M, Lᵏ)`, optionally mixed by an invertible matrix
/// (`s'_a = Σ_b M_ab s_b`).
#[derive(Debug, Clone)]
pub struct SectionBasis {
    pub k: u32,
    pub blocks: Vec<SectionBlock>,
    /// Homogeneous exponents, block by block (`dim_b + 1` entries each).
    pub exponents: Vec<Vec<u32>>,
    pub mixing: Option<DMatrix<C64>>,
}

fn compositions(total: u32, parts: usize) -> Vec<Vec<u32>> {
    if parts == 1 {
        return vec![vec![total]];
    }
    let mut out = Vec::new();
    for first in (0..=total).rev() {
        for mut rest in compositions(total - first, parts - 1) {
            rest.insert(0, first);
            out.push(rest);
        }
    }
    out
}

pub fn binomial(n: u64, k: u64) -> u64 {
    let k = k.min(n - k);
    (0..k).fold(1u64, |acc, i| acc * (n - i) / (i + 1))
}

/// Monomial sections of `Lᵏ` for the polarization given by the class degrees.
pub fn section_basis(model: &KahlerModel, k: u32) -> Result<SectionBasis> {
    if k == 0 {
        return Err(Error::InvalidArgument("section level k must be ≥ 1".into()));
    }
    let mut blocks = Vec::new();
    for f in &model.factors {
        let d = match (f.kind, f.degree()) {
            (FactorKind::Projective, Some(d)) => d,
            _ => {
                return Err(Error::Unsupported(format!(
                    "{} carries no integral polarization",
                    model.label
                )))
            }
        };
        blocks.push(SectionBlock {
            coords: f.offset..f.offset + f.dim,
            class: d,
            degree: k * d,
        });
    }
    let mut exponents: Vec<Vec<u32>> = vec![vec![]];
    for b in &blocks {
        let local = compositions(b.degree, b.width());
        exponents = exponents
            .into_iter()
            .flat_map(|e| {
                local.iter().map(move |l| {
                    let mut e = e.clone();
                    e.extend(l);
                    e
                })
            })
            .collect();
    }
    Ok(SectionBasis {
        k,
        blocks,
        exponents,
        mixing: None,
    })
}

impl SectionBasis {
    pub fn dimension(&self) -> usize {
        self.exponents.len()
    }

    /// `Π_b binomial(dim_b + k d_b, dim_b)`.
    pub fn expected_dimension(&self) -> u64 {
        self.blocks
            .iter()
            .map(|b| binomial(b.degree as u64 + b.coords.len() as u64, b.coords.len() as u64))
            .product()
    }

    pub fn with_mixing(mut self, mixing: DMatrix<C64>) -> Result<SectionBasis> {
        let d = self.dimension();
        if mixing.nrows() != d || mixing.ncols() != d {
            return Err(Error::InvalidArgument(format!(
                "mixing matrix must be {d}×{d}"
            )));
        }
        if mixing.clone().try_inverse().is_none() {
            return Err(Error::InvalidArgument("mixing matrix is singular".into()));
        }
        self.mixing = Some(mixing);
        Ok(self)
    }

    fn is_monomial(&self) -> bool {
        self.mixing.is_none()
    }

    fn block_offsets(&self) -> Vec<usize> {
        let mut off = 0;
        self.blocks
            .iter()
            .map(|b| {
                let o = off;
                off += b.width();
                o
            })
            .collect()
    }

    /// Affine exponent of section `a` in chart coordinate `i`.
    fn affine_exponent(&self, a: usize, i: usize) -> u32 {
        let offs = self.block_offsets();
        for (b, o) in self.blocks.iter().zip(offs) {
            if b.coords.contains(&i) {
                return self.exponents[a][o + 1 + i - b.coords.start];
            }
        }
        0
    }
}

/// Per-node data from which every section norm follows.
struct NodeFrame {
    /// `ln x_k` per block, homogeneous index.
    log_x: Vec<Vec<f64>>,
    psi: f64,
    angles: Vec<f64>,
}

fn node_frame(model: &KahlerModel, basis: &SectionBasis, point: &[C64]) -> NodeFrame {
    let vars = model.chart.adapted_vars(point, 0);
    let mut psi = model.chart.potential.jet(&vars).value().re;
    let log_x = basis
        .blocks
        .iter()
        .map(|b| {
            psi -= b.class as f64 * vars.log_norm(&b.coords).value().re;
            (0..b.width())
                .map(|h| vars.moment(&b.coords, h).value().re.ln())
                .collect()
        })
        .collect();
    NodeFrame {
        log_x,
        psi,
        angles: point.iter().map(|z| z.arg()).collect(),
    }
}

impl NodeFrame {
    /// `ln |s_a|²_h`.
    fn log_norm_sq(&self, basis: &SectionBasis, a: usize) -> f64 {
        let e = &basis.exponents[a];
        let mut acc = -(basis.k as f64) * self.psi;
        let mut idx = 0;
        for lx in &self.log_x {
            for &l in lx {
                if e[idx] > 0 {
                    acc += e[idx] as f64 * l;
                }
                idx += 1;
            }
        }
        acc
    }

    /// `s_a h^{1/2}` in the standard frame.
    fn value(&self, basis: &SectionBasis, a: usize) -> C64 {
        let phase: f64 = (0..self.angles.len())
            .map(|i| basis.affine_exponent(a, i) as f64 * self.angles[i])
            .sum();
        C64::from_polar((0.5 * self.log_norm_sq(basis, a)).exp(), phase)
    }
}

/// Hermitian L² Gram matrix with its orthonormalizer.
#[derive(Debug, Clone)]
pub struct GramMatrix {
    pub k: u32,
    pub matrix: DMatrix<C64>,
    /// True when assembled on the radial grid (monomials are orthogonal).
    pub diagonal: bool,
    /// `C` with `C G C* = I`.
    pub orthonormalizer: DMatrix<C64>,
    pub log_det: f64,
    /// Condition number after diagonal scaling.
    pub condition: f64,
}

impl GramMatrix {
    fn from_matrix(k: u32, matrix: DMatrix<C64>, diagonal: bool) -> Result<GramMatrix> {
        let d = matrix.nrows();
        let diag: Vec<f64> = (0..d).map(|a| matrix[(a, a)].re).collect();
        if diag.iter().any(|v| !(*v > 0.0)) {
            return Err(Error::SingularGram);
        }
        let scale = DMatrix::from_diagonal(&nalgebra::DVector::from_iterator(
            d,
            diag.iter().map(|v| C64::new(1.0 / v.sqrt(), 0.0)),
        ));
        let log_diag: f64 = diag.iter().map(|v| v.ln()).sum();
        if diagonal {
            return Ok(GramMatrix {
                k,
                matrix,
                diagonal,
                orthonormalizer: scale,
                log_det: log_diag,
                condition: 1.0,
            });
        }
        let scaled = &scale * &matrix * &scale;
        let herm = (&scaled + scaled.adjoint()) * C64::new(0.5, 0.0);
        let eig = herm.symmetric_eigen();
        let min = eig.eigenvalues.min();
        let max = eig.eigenvalues.max();
        if !(min > 0.0) {
            return Err(Error::SingularGram);
        }
        let condition = max / min;
        if condition > MAX_GRAM_CONDITION {
            return Err(Error::IllConditioned(condition));
        }
        let inv_sqrt = DMatrix::from_diagonal(&eig.eigenvalues.map(|l| C64::new(1.0 / l.sqrt(), 0.0)));
        let u = &eig.eigenvectors;
        let orthonormalizer = u * inv_sqrt * u.adjoint() * &scale;
        let log_det = log_diag + eig.eigenvalues.iter().map(|l| l.ln()).sum::<f64>();
        Ok(GramMatrix {
            k,
            matrix,
            diagonal,
            orthonormalizer,
            log_det,
            condition,
        })
    }

    pub fn dimension(&self) -> usize {
        self.matrix.nrows()
    }

    /// Largest deviation from Hermitian symmetry.
    pub fn hermitian_defect(&self) -> f64 {
        (&self.matrix - self.matrix.adjoint()).iter().map(|v| v.norm()).fold(0.0, f64::max)
    }

    /// `C A C*`: a basis-matrix in the orthonormalized basis.
    pub fn orthonormalize(&self, raw: &DMatrix<C64>) -> DMatrix<C64> {
        &self.orthonormalizer * raw * self.orthonormalizer.adjoint()
    }
}

fn radial_log_norms(model: &KahlerModel, basis: &SectionBasis) -> Vec<Vec<f64>> {
    model.map_radial(|_, p| {
        let frame = node_frame(model, basis, p);
        (0..basis.dimension())
            .map(|a| frame.log_norm_sq(basis, a))
            .collect()
    })
}

/// Section values `s_a h^{1/2}` at every full node (rows) in the monomial basis.
fn full_values(model: &KahlerModel, basis: &SectionBasis) -> DMatrix<C64> {
    let d = basis.dimension();
    let rows = model.map_full(|_, p| {
        let frame = node_frame(model, basis, p);
        (0..d).map(|a| frame.value(basis, a)).collect::<Vec<_>>()
    });
    DMatrix::from_fn(rows.len(), d, |r, a| rows[r][a])
}

fn apply_mixing(basis: &SectionBasis, raw: DMatrix<C64>) -> DMatrix<C64> {
    match &basis.mixing {
        Some(m) => m * raw * m.adjoint(),
        None => raw,
    }
}

/// `G_ab = ∫ s_a s̄_b h^k ωⁿ/n!`. Monomial bases use the radial grid (the
/// matrix is diagonal by torus symmetry); mixed bases the full grid.
pub fn gram(model: &KahlerModel, basis: &SectionBasis) -> Result<GramMatrix> {
    if basis.is_monomial() {
        let logs = radial_log_norms(model, basis);
        let w = model.weights(Layout::Radial);
        let d = basis.dimension();
        let diag: Vec<C64> = (0..d)
            .map(|a| {
                C64::new(
                    compensated_sum(logs.iter().zip(&w).map(|(l, w)| w * l[a].exp())),
                    0.0,
                )
            })
            .collect();
        let m = DMatrix::from_diagonal(&nalgebra::DVector::from_vec(diag));
        GramMatrix::from_matrix(basis.k, m, true)
    } else {
        gram_full(model, basis)
    }
}

/// Gram matrix from the full radial × angular grid, off-diagonals included.
pub fn gram_full(model: &KahlerModel, basis: &SectionBasis) -> Result<GramMatrix> {
    let raw = assemble_full(model, basis, |_| Ok(NodeFactor::scalar(C64::new(1.0, 0.0))))?;
    GramMatrix::from_matrix(basis.k, apply_mixing(basis, raw), false)
}

/// Pointwise multiplier `D_a = base + Σ slope_e · exponent_e(a)` of an
/// operator integrand `D_a s_a s̄_b h^k`.
struct NodeFactor {
    base: C64,
    slopes: Vec<(usize, C64)>,
}

impl NodeFactor {
    fn scalar(v: C64) -> NodeFactor {
        NodeFactor {
            base: v,
            slopes: vec![],
        }
    }

    fn at(&self, basis: &SectionBasis, a: usize) -> C64 {
        let e = &basis.exponents[a];
        self.slopes
            .iter()
            .fold(self.base, |acc, &(i, s)| acc + s * e[i] as f64)
    }
}

fn assemble_radial(
    model: &KahlerModel,
    basis: &SectionBasis,
    factor: impl Fn(&[C64]) -> Result<NodeFactor> + Sync + Send,
) -> Result<DMatrix<C64>> {
    let d = basis.dimension();
    let per_node: Result<Vec<Vec<C64>>> = model
        .map_radial(|_, p| {
            let f = factor(p)?;
            let frame = node_frame(model, basis, p);
            Ok((0..d)
                .map(|a| f.at(basis, a) * frame.log_norm_sq(basis, a).exp())
                .collect())
        })
        .into_iter()
        .collect();
    let per_node = per_node?;
    let w = model.weights(Layout::Radial);
    let diag: Vec<C64> = (0..d)
        .map(|a| {
            let re = compensated_sum(per_node.iter().zip(&w).map(|(v, w)| w * v[a].re));
            let im = compensated_sum(per_node.iter().zip(&w).map(|(v, w)| w * v[a].im));
            C64::new(re, im)
        })
        .collect();
    Ok(DMatrix::from_diagonal(&nalgebra::DVector::from_vec(diag)))
}

fn assemble_full(
    model: &KahlerModel,
    basis: &SectionBasis,
    factor: impl Fn(&[C64]) -> Result<NodeFactor> + Sync + Send,
) -> Result<DMatrix<C64>> {
    let d = basis.dimension();
    let values = full_values(model, basis);
    let factors: Result<Vec<NodeFactor>> = model.map_full(|_, p| factor(p)).into_iter().collect();
    let factors = factors?;
    let w = model.weights(Layout::Full);
    let weighted = DMatrix::from_fn(values.nrows(), d, |r, a| {
        values[(r, a)] * factors[r].at(basis, a) * w[r]
    });
    Ok(weighted.transpose() * values.map(|v| v.conj()))
}

fn assemble(
    model: &KahlerModel,
    basis: &SectionBasis,
    radial: bool,
    factor: impl Fn(&[C64]) -> Result<NodeFactor> + Sync + Send,
) -> Result<DMatrix<C64>> {
    let raw = if radial && basis.is_monomial() {
        assemble_radial(model, basis, factor)?
    } else {
        assemble_full(model, basis, factor)?
    };
    Ok(apply_mixing(basis, raw))
}

/// `ρ_k = Σ_ab (G⁻¹)_ba s_a s̄_b h^k`, radial for monomial bases.
pub fn bergman_density(
    model: &KahlerModel,
    basis: &SectionBasis,
    gram: &GramMatrix,
) -> Result<ScalarField> {
    check_gram(basis, gram)?;
    if gram.diagonal && basis.is_monomial() {
        let log_g: Vec<f64> = (0..basis.dimension())
            .map(|a| gram.matrix[(a, a)].re.ln())
            .collect();
        let values = model.map_radial(|_, p| {
            let frame = node_frame(model, basis, p);
            let terms = (0..basis.dimension()).map(|a| (frame.log_norm_sq(basis, a) - log_g[a]).exp());
            C64::new(compensated_sum(terms), 0.0)
        });
        return Ok(ScalarField::radial(values));
    }
    let values = full_values(model, basis);
    let c = match &basis.mixing {
        Some(m) => &gram.orthonormalizer * m,
        None => gram.orthonormalizer.clone(),
    };
    let rho = (0..values.nrows())
        .map(|r| {
            let v = values.row(r).transpose();
            C64::new((&c * v).norm_squared(), 0.0)
        })
        .collect();
    Ok(ScalarField {
        values: rho,
        layout: Layout::Full,
    })
}

fn check_gram(basis: &SectionBasis, gram: &GramMatrix) -> Result<()> {
    if gram.dimension() != basis.dimension() || gram.k != basis.k {
        return Err(Error::InvalidArgument(
            "Gram matrix does not belong to this section basis".into(),
        ));
    }
    Ok(())
}

/// Basis, Gram matrix and Bergman density at level `k`.
#[derive(Debug, Clone)]
pub struct Bergman {
    pub basis: SectionBasis,
    pub gram: GramMatrix,
    pub density: ScalarField,
}

pub fn bergman(model: &KahlerModel, k: u32) -> Result<Bergman> {
    let basis = section_basis(model, k)?;
    let gram = gram(model, &basis)?;
    let density = bergman_density(model, &basis, &gram)?;
    Ok(Bergman {
        basis,
        gram,
        density,
    })
}

/// `(ρ_k, Δρ_k)` at the radial nodes, differentiating the density exactly
/// through jets in each node's adapted chart.
pub fn bergman_density_with_laplacian(
    model: &KahlerModel,
    basis: &SectionBasis,
    gram: &GramMatrix,
) -> Result<(Vec<f64>, Vec<f64>)> {
    check_gram(basis, gram)?;
    if !(gram.diagonal && basis.is_monomial()) {
        return Err(Error::Unsupported(
            "density jets need the diagonal monomial Gram matrix".into(),
        ));
    }
    let d = basis.dimension();
    let inv_g: Vec<f64> = (0..d).map(|a| 1.0 / gram.matrix[(a, a)].re).collect();
    let k = basis.k as f64;
    let out = model.map_radial(|_, p| {
        let vars = model.chart.adapted_vars(p, 2);
        let phi = model.chart.potential.jet(&vars);
        let weight = phi.scale_real(-k).exp();
        // |Z_h|^{2p} for every block, homogeneous index, power
        let powers: Vec<Vec<Vec<Jet>>> = basis
            .blocks
            .iter()
            .map(|b| {
                let (hom, hom_bar) = vars.homogeneous(&b.coords);
                hom.iter()
                    .zip(&hom_bar)
                    .map(|(z, zb)| {
                        let q = z * zb;
                        let mut pw = vec![vars.constant(1.0)];
                        for i in 1..=b.degree as usize {
                            let next = &pw[i - 1] * &q;
                            pw.push(next);
                        }
                        pw
                    })
                    .collect()
            })
            .collect();
        let mut acc = vars.constant(0.0);
        for a in 0..d {
            let e = &basis.exponents[a];
            let mut term: Option<Jet> = None;
            let mut idx = 0;
            for pb in &powers {
                for ph in pb {
                    let f = &ph[e[idx] as usize];
                    term = Some(match term {
                        None => f.clone(),
                        Some(t) => &t * f,
                    });
                    idx += 1;
                }
            }
            acc = &acc + &term.expect("at least one block").scale_real(inv_g[a]);
        }
        let rho = &acc * &weight;
        let g_inv = metric_from_jet(&phi).try_inverse().expect("metric invertible");
        (rho.value().re, laplacian_of_jet(&rho, &g_inv).re)
    });
    Ok(out.into_iter().unzip())
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum OperatorKind {
    Toeplitz,
    KostantSouriau,
    Product,
}

/// An operator on `H⁰` as `⟨A s_a, s_b⟩` (`raw`) and in the orthonormalized
/// basis (`matrix`).
#[derive(Debug, Clone)]
pub struct OperatorMatrix {
    pub kind: OperatorKind,
    pub raw: DMatrix<C64>,
    pub matrix: DMatrix<C64>,
}

impl OperatorMatrix {
    fn new(kind: OperatorKind, raw: DMatrix<C64>, gram: &GramMatrix) -> OperatorMatrix {
        let matrix = gram.orthonormalize(&raw);
        OperatorMatrix { kind, raw, matrix }
    }

    /// `max |A_ij + conj(A_ji)|`.
    pub fn skew_hermitian_defect(&self) -> f64 {
        (&self.matrix + self.matrix.adjoint()).iter().map(|v| v.norm()).fold(0.0, f64::max)
    }

    pub fn hermitian_defect(&self) -> f64 {
        (&self.matrix - self.matrix.adjoint()).iter().map(|v| v.norm()).fold(0.0, f64::max)
    }

    pub fn trace(&self) -> C64 {
        self.matrix.trace()
    }

    pub fn norm(&self) -> f64 {
        operator_norm(&self.matrix)
    }

    /// Composition `self ∘ other` in the orthonormal basis.
    pub fn compose(&self, other: &OperatorMatrix) -> OperatorMatrix {
        // with A_ij = ⟨A e_i, e_j⟩ the matrix of A∘B is B·A
        let matrix = &other.matrix * &self.matrix;
        OperatorMatrix {
            kind: OperatorKind::Product,
            raw: DMatrix::zeros(0, 0),
            matrix,
        }
    }
}

/// Largest singular value.
pub fn operator_norm(m: &DMatrix<C64>) -> f64 {
    if m.is_empty() {
        return 0.0;
    }
    m.clone().singular_values().max()
}

/// Compression of multiplication by `symbol` (complex values allowed).
pub fn toeplitz(
    model: &KahlerModel,
    basis: &SectionBasis,
    gram: &GramMatrix,
    symbol: &dyn SmoothFunction,
) -> Result<OperatorMatrix> {
    check_gram(basis, gram)?;
    let raw = assemble(model, basis, symbol.torus_invariant(), |p| {
        Ok(NodeFactor::scalar(symbol.value_at(p)))
    })?;
    Ok(OperatorMatrix::new(OperatorKind::Toeplitz, raw, gram))
}

/// Toeplitz operator of a sampled symbol; the layout of the field selects
/// the grid.
pub fn toeplitz_field(
    model: &KahlerModel,
    basis: &SectionBasis,
    gram: &GramMatrix,
    symbol: &ScalarField,
) -> Result<OperatorMatrix> {
    check_gram(basis, gram)?;
    let radial = symbol.layout == Layout::Radial && basis.is_monomial();
    let field = if radial {
        symbol.clone()
    } else {
        model.to_full(symbol)?
    };
    let expected = if radial {
        model.quadrature.radial_len()
    } else {
        model.quadrature.full_len()
    };
    if field.values.len() != expected {
        return Err(Error::NodeMismatch {
            expected,
            found: field.values.len(),
        });
    }
    let raw = if radial {
        let d = basis.dimension();
        let logs = radial_log_norms(model, basis);
        let w = model.weights(Layout::Radial);
        let diag: Vec<C64> = (0..d)
            .map(|a| {
                let vals = || logs.iter().zip(&w).zip(&field.values).map(move |((l, w), s)| (w * l[a].exp(), s));
                C64::new(
                    compensated_sum(vals().map(|(x, s)| x * s.re)),
                    compensated_sum(vals().map(|(x, s)| x * s.im)),
                )
            })
            .collect();
        apply_mixing(basis, DMatrix::from_diagonal(&nalgebra::DVector::from_vec(diag)))
    } else {
        let values = full_values(model, basis);
        let w = model.weights(Layout::Full);
        let d = basis.dimension();
        let weighted = DMatrix::from_fn(values.nrows(), d, |r, a| values[(r, a)] * field.values[r] * w[r]);
        apply_mixing(basis, weighted.transpose() * values.map(|v| v.conj()))
    };
    Ok(OperatorMatrix::new(OperatorKind::Toeplitz, raw, gram))
}

/// First-order data of a Hamiltonian at a node, in the adapted chart.
struct HamiltonianData {
    vars: JetVars,
    phi: Jet,
    f: Jet,
    /// `Y^j = g^{jk̄} ∂_k̄ f`, so that `X_f^{1,0} = -i Y`.
    y: Vec<C64>,
}

fn hamiltonian_data(model: &KahlerModel, f: &dyn SmoothFunction, p: &[C64]) -> HamiltonianData {
    let n = model.complex_dimension;
    let vars = model.chart.adapted_vars(p, 2);
    let phi = model.chart.potential.jet(&vars);
    let g_inv = metric_from_jet(&phi).try_inverse().expect("metric invertible");
    let fj = f.jet(&vars);
    let y = (0..n)
        .map(|j| (0..n).map(|k| g_inv[(k, j)] * fj.d(n + k)).sum())
        .collect();
    HamiltonianData {
        vars,
        phi,
        f: fj,
        y,
    }
}

fn ks_factor(
    basis: &SectionBasis,
    h: &HamiltonianData,
    extra_weight: Option<&Jet>,
) -> NodeFactor {
    let k = basis.k as f64;
    let i = C64::i();
    let mut base = h.f.value() * k;
    let mut slopes = Vec::new();
    let offs = basis.block_offsets();
    for (b, off) in basis.blocks.iter().zip(offs) {
        let pivot = h.vars.pivot(&b.coords);
        let (hom, _) = h.vars.homogeneous(&b.coords);
        for (local, j) in b.coords.clone().enumerate() {
            let hidx = if local < pivot { local } else { local + 1 };
            let mut dphi = h.phi.d(j);
            if let Some(w) = extra_weight {
                dphi += w.d(j);
            }
            // ∂_j log s_a = α_hidx / w_j
            slopes.push((off + hidx, i * h.y[j] / hom[hidx].value()));
            base -= h.y[j] * dphi * k;
        }
    }
    NodeFactor {
        base: i * base,
        slopes,
    }
}

/// Matrix of `P_f = ∇_{-X_f} + ikf` compressed to `H⁰`.
pub fn kostant_souriau(
    model: &KahlerModel,
    basis: &SectionBasis,
    gram: &GramMatrix,
    f: &dyn SmoothFunction,
) -> Result<OperatorMatrix> {
    kostant_souriau_weighted(model, basis, gram, f, None)
}

/// Kostant–Souriau operator for the connection of `h^k e^{-k g}`, paired
/// in the `h^k` inner product.
pub fn kostant_souriau_weighted(
    model: &KahlerModel,
    basis: &SectionBasis,
    gram: &GramMatrix,
    f: &dyn SmoothFunction,
    weight: Option<&dyn SmoothFunction>,
) -> Result<OperatorMatrix> {
    check_gram(basis, gram)?;
    let radial = f.torus_invariant() && weight.is_none_or(|w| w.torus_invariant());
    let raw = assemble(model, basis, radial, |p| {
        let h = hamiltonian_data(model, f, p);
        let w = weight.map(|w| w.jet(&h.vars));
        Ok(ks_factor(basis, &h, w.as_ref()))
    })?;
    Ok(OperatorMatrix::new(OperatorKind::KostantSouriau, raw, gram))
}

fn layout_of(f: &dyn SmoothFunction, basis: &SectionBasis) -> Layout {
    if f.torus_invariant() && basis.is_monomial() {
        Layout::Radial
    } else {
        Layout::Full
    }
}

fn sample_on(
    model: &KahlerModel,
    layout: Layout,
    eval: impl Fn(&[C64]) -> C64 + Sync + Send,
) -> ScalarField {
    match layout {
        Layout::Radial => ScalarField::radial(model.map_radial(|_, p| eval(p))),
        Layout::Full => ScalarField {
            values: model.map_full(|_, p| eval(p)),
            layout: Layout::Full,
        },
    }
}

/// `‖P_f − T_{i(kf − Δf)}‖` in the orthonormal basis.
pub fn tuynman_residual(
    model: &KahlerModel,
    basis: &SectionBasis,
    gram: &GramMatrix,
    f: &dyn SmoothFunction,
) -> Result<f64> {
    let ks = kostant_souriau(model, basis, gram, f)?;
    let k = basis.k as f64;
    let symbol = sample_on(model, layout_of(f, basis), |p| {
        let vars = model.chart.adapted_vars(p, 2);
        let g_inv = metric_from_jet(&model.chart.potential.jet(&vars))
            .try_inverse()
            .expect("metric invertible");
        let fj = f.jet(&vars);
        C64::i() * (fj.value() * k - laplacian_of_jet(&fj, &g_inv))
    });
    let t = toeplitz_field(model, basis, gram, &symbol)?;
    Ok(operator_norm(&(&ks.matrix - &t.matrix)))
}

/// `‖(P'_f − P_f) − T_{k ι_{X_f} ∂g}‖`, where `P'_f` uses the connection of
/// `h^k e^{-kg}`.
pub fn moment_shift_check(
    model: &KahlerModel,
    basis: &SectionBasis,
    gram: &GramMatrix,
    f: &dyn SmoothFunction,
    g: &dyn SmoothFunction,
) -> Result<f64> {
    let p = kostant_souriau(model, basis, gram, f)?;
    let p_shift = kostant_souriau_weighted(model, basis, gram, f, Some(g))?;
    let k = basis.k as f64;
    let layout = if g.torus_invariant() {
        layout_of(f, basis)
    } else {
        Layout::Full
    };
    let symbol = sample_on(model, layout, |pt| {
        let h = hamiltonian_data(model, f, pt);
        let gj = g.jet(&h.vars);
        let contraction: C64 = (0..model.complex_dimension).map(|j| h.y[j] * gj.d(j)).sum();
        -C64::i() * contraction * k
    });
    let t = toeplitz_field(model, basis, gram, &symbol)?;
    Ok(operator_norm(&(&(&p_shift.matrix - &p.matrix) - &t.matrix)))
}

/// Fit of `Im Tr P_f` in powers of k against its predicted coefficients.
#[derive(Debug, Clone, Serialize)]
pub struct TraceExpansionReport {
    pub ks: Vec<u32>,
    pub traces: Vec<f64>,
    /// Largest `|Re Tr P_f|` (zero for a skew-Hermitian operator).
    pub max_real_part: f64,
    pub fit: ExpansionFit,
    pub leading: f64,
    pub leading_expected: f64,
    pub leading_error: f64,
    pub subleading: f64,
    pub subleading_expected: f64,
    pub subleading_error: f64,
}

fn relative_error(value: f64, expected: f64) -> f64 {
    if expected == 0.0 {
        value.abs()
    } else {
        ((value - expected) / expected).abs()
    }
}

/// `Tr P_f^{(k)} = Σ_j k^{n+1-j} ∫ i f (a_j − Δa_{j-1})`; compares the two
/// leading coefficients with `∫ f` and `∫ f S/2`. `extra_powers` adds tail
/// terms (below `k^{n-1}`) to the fit.
pub fn trace_expansion_check(
    model: &KahlerModel,
    f: &dyn SmoothFunction,
    ks: &[u32],
    extra_powers: &[i32],
) -> Result<TraceExpansionReport> {
    let n = model.complex_dimension as i32;
    let mut distinct = ks.to_vec();
    distinct.sort_unstable();
    distinct.dedup();
    if distinct.len() < 3 {
        return Err(Error::InvalidArgument(
            "trace expansion needs at least three distinct k".into(),
        ));
    }
    let mut traces = Vec::with_capacity(ks.len());
    let mut max_real: f64 = 0.0;
    for &k in ks {
        let basis = section_basis(model, k)?;
        let g = gram(model, &basis)?;
        let tr = kostant_souriau(model, &basis, &g, f)?.trace();
        max_real = max_real.max(tr.re.abs());
        traces.push(tr.im);
    }
    let mut powers = vec![n + 1, n, n - 1];
    powers.extend(extra_powers);
    let samples: Vec<(f64, f64)> = ks.iter().map(|&k| k as f64).zip(traces.iter().copied()).collect();
    let fit = fit_expansion(&samples, &powers)?;
    let fvals = model.sample(f);
    let leading_expected = model.integrate(&fvals)?.re;
    let (s, _) = scalar_and_laplacian_field(model);
    let fs = model.to_full(&ScalarField::from_real(s.iter().map(|v| v / 2.0).collect()))?;
    let weighted = if fvals.layout == Layout::Radial {
        fvals.zip(&ScalarField::from_real(s.iter().map(|v| v / 2.0).collect()), |a, b| a * b)?
    } else {
        fvals.zip(&fs, |a, b| a * b)?
    };
    let subleading_expected = model.integrate(&weighted)?.re;
    let leading = fit.coefficient(n + 1).expect("fitted");
    let subleading = fit.coefficient(n).expect("fitted");
    Ok(TraceExpansionReport {
        ks: ks.to_vec(),
        traces,
        max_real_part: max_real,
        leading,
        leading_error: relative_error(leading, leading_expected),
        leading_expected,
        subleading,
        subleading_error: relative_error(subleading, subleading_expected),
        subleading_expected,
        fit,
    })
}

/// Sign of `d/dt log det Gram = SIGN · ∫ φ̇ (kρ_k − Δρ_k) ωⁿ/n!`.
pub const DONALDSON_SIGN: f64 = -1.0;

#[derive(Debug, Clone, Serialize)]
pub struct VariationReport {
    pub k: u32,
    pub h: f64,
    /// Central difference of `log det Gram`.
    pub finite_difference: f64,
    pub predicted: f64,
    pub residual: f64,
}

/// Central-difference check of the first variation of `log det Gram` along
/// `φ_t = t·δφ`.
pub fn donaldson_variation_residual(
    model: &KahlerModel,
    k: u32,
    delta: Field,
    h: f64,
) -> Result<VariationReport> {
    if !(h > 0.0) {
        return Err(Error::InvalidArgument("step must be positive".into()));
    }
    let basis = section_basis(model, k)?;
    let plus = model.perturb(delta.clone(), h)?;
    let minus = model.perturb(delta.clone(), -h)?;
    let ld_plus = gram(&plus, &basis)?.log_det;
    let ld_minus = gram(&minus, &basis)?.log_det;
    let finite_difference = (ld_plus - ld_minus) / (2.0 * h);
    let g = gram(model, &basis)?;
    let (rho, lap) = bergman_density_with_laplacian(model, &basis, &g)?;
    let d = model.sample(delta.as_ref());
    let integrand: Vec<f64> = d
        .values
        .iter()
        .zip(rho.iter().zip(&lap))
        .map(|(dv, (r, l))| dv.re * (k as f64 * r - l))
        .collect();
    let predicted = DONALDSON_SIGN * model.integrate_real(&integrand)?;
    Ok(VariationReport {
        k,
        h,
        finite_difference,
        predicted,
        residual: (finite_difference - predicted).abs(),
    })
}

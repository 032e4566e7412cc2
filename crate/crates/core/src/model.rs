//! Explicit Kähler manifolds: one affine chart with a torus-invariant
//! potential, plus a quadrature rule for top-degree integrals.
//!
//! Conventions are collected in [`crate::conventions`]: the metric is
//! `g_{ij̄} = ∂_i∂_j̄ Φ` and the volume form is `ωⁿ/n! = det g ∏ dx dy / π`,
//! so `∫_{ℂP¹} ω = 1` for the Fubini–Study potential `log(1+|z|²)`.

use std::fmt;
use std::ops::Range;
use std::sync::Arc;

use nalgebra::DMatrix;
use num_complex::Complex64;
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::functions::{Field, FubiniStudyPotential, SmoothFunction, Sum};
use crate::jet::{Jet, JetVars};
use crate::quadrature::{compensated_sum, gauss_legendre_unit, simplex_to_radial};

type C64 = Complex64;

pub const DEFAULT_LEVEL: usize = 64;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum FactorKind {
    /// Affine chart of ℂP^dim, integrated through the moment simplex.
    Projective,
    /// Unit polydisc test chart (not compact, not quantizable).
    Polydisc,
}

/// One block of coordinates of a (product) model.
#[derive(Debug, Clone, PartialEq)]
pub struct Factor {
    pub kind: FactorKind,
    pub dim: usize,
    /// First coordinate index of this factor in the chart.
    pub offset: usize,
    /// Cohomology class as a multiple of the hyperplane class.
    pub class: f64,
}

impl Factor {
    /// Integral degree of the polarizing bundle, when there is one.
    pub fn degree(&self) -> Option<u32> {
        let r = self.class.round();
        (self.kind == FactorKind::Projective && r >= 1.0 && (self.class - r).abs() < 1e-12)
            .then_some(r as u32)
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Topology {
    ProjectiveSpace(usize),
    ProjectiveLineSquared,
    Other,
}

/// A node of the radial (torus-reduced) grid.
#[derive(Debug, Clone, PartialEq)]
pub struct RadialNode {
    /// `t_i = |z_i|²`.
    pub t: Vec<f64>,
    /// Quadrature weight including the substitution Jacobian; the angular
    /// average is already normalized out.
    pub weight: f64,
}

/// Tensor-product rule: Gauss–Legendre in collapsed simplex coordinates per
/// factor, times an `angular`-point trapezoid in each angle.
#[derive(Debug, Clone, PartialEq)]
pub struct QuadratureRule {
    pub level: usize,
    pub angular: usize,
    pub dim: usize,
    pub radial: Vec<RadialNode>,
}

impl QuadratureRule {
    pub fn build(factors: &[Factor], level: usize, angular: usize) -> QuadratureRule {
        let (gx, gw) = gauss_legendre_unit(level);
        let dim: usize = factors.iter().map(|f| f.dim).sum();
        let mut radial = vec![RadialNode {
            t: Vec::with_capacity(dim),
            weight: 1.0,
        }];
        for factor in factors {
            let mut local = Vec::new();
            let count = level.pow(factor.dim as u32);
            for flat in 0..count {
                let mut rem = flat;
                let mut sigma = vec![0.0; factor.dim];
                let mut w = 1.0;
                for s in sigma.iter_mut() {
                    let i = rem % level;
                    rem /= level;
                    *s = gx[i];
                    w *= gw[i];
                }
                let (t, jac) = match factor.kind {
                    FactorKind::Projective => simplex_to_radial(&sigma),
                    FactorKind::Polydisc => (sigma.clone(), 1.0),
                };
                local.push((t, w * jac));
            }
            radial = radial
                .into_iter()
                .flat_map(|node| {
                    local.iter().map(move |(t, w)| {
                        let mut tt = node.t.clone();
                        tt.extend_from_slice(t);
                        RadialNode {
                            t: tt,
                            weight: node.weight * w,
                        }
                    })
                })
                .collect();
        }
        QuadratureRule {
            level,
            angular,
            dim,
            radial,
        }
    }

    pub fn radial_len(&self) -> usize {
        self.radial.len()
    }

    pub fn angular_len(&self) -> usize {
        self.angular.pow(self.dim as u32)
    }

    pub fn full_len(&self) -> usize {
        self.radial_len() * self.angular_len()
    }

    /// Chart point of radial node `r` at angle 0.
    pub fn radial_point(&self, r: usize) -> Vec<C64> {
        self.radial[r].t.iter().map(|t| C64::new(t.sqrt(), 0.0)).collect()
    }

    /// Chart point of full node `idx = r * angular_len + a`.
    pub fn full_point(&self, idx: usize) -> Vec<C64> {
        let na = self.angular_len();
        let (r, mut a) = (idx / na, idx % na);
        let node = &self.radial[r];
        node.t
            .iter()
            .map(|t| {
                let k = a % self.angular;
                a /= self.angular;
                let theta = 2.0 * std::f64::consts::PI * k as f64 / self.angular as f64;
                C64::from_polar(t.sqrt(), theta)
            })
            .collect()
    }

    /// Angles of full node `idx`.
    pub fn full_angles(&self, idx: usize) -> Vec<f64> {
        let mut a = idx % self.angular_len();
        (0..self.dim)
            .map(|_| {
                let k = a % self.angular;
                a /= self.angular;
                2.0 * std::f64::consts::PI * k as f64 / self.angular as f64
            })
            .collect()
    }
}

/// Where a [`ScalarField`]'s samples live.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Layout {
    /// One value per radial node (torus-invariant fields).
    Radial,
    /// One value per (radial node, angle) pair.
    Full,
}

/// A function sampled on a model's quadrature nodes.
#[derive(Debug, Clone, PartialEq)]
pub struct ScalarField {
    pub values: Vec<C64>,
    pub layout: Layout,
}

impl ScalarField {
    pub fn radial(values: Vec<C64>) -> ScalarField {
        ScalarField {
            values,
            layout: Layout::Radial,
        }
    }

    pub fn from_real(values: Vec<f64>) -> ScalarField {
        ScalarField::radial(values.into_iter().map(|v| C64::new(v, 0.0)).collect())
    }

    pub fn real_parts(&self) -> Vec<f64> {
        self.values.iter().map(|v| v.re).collect()
    }

    pub fn max_imag(&self) -> f64 {
        self.values.iter().map(|v| v.im.abs()).fold(0.0, f64::max)
    }

    pub fn max_abs(&self) -> f64 {
        self.values.iter().map(|v| v.norm()).fold(0.0, f64::max)
    }

    pub fn map(&self, f: impl Fn(C64) -> C64) -> ScalarField {
        ScalarField {
            values: self.values.iter().map(|&v| f(v)).collect(),
            layout: self.layout,
        }
    }

    pub fn zip(&self, other: &ScalarField, f: impl Fn(C64, C64) -> C64) -> Result<ScalarField> {
        if self.layout != other.layout || self.values.len() != other.values.len() {
            return Err(Error::NodeMismatch {
                expected: self.values.len(),
                found: other.values.len(),
            });
        }
        Ok(ScalarField {
            values: self
                .values
                .iter()
                .zip(&other.values)
                .map(|(&a, &b)| f(a, b))
                .collect(),
            layout: self.layout,
        })
    }
}

/// The single affine chart of a model.
#[derive(Clone)]
pub struct Chart {
    pub dim: usize,
    pub potential: Field,
    /// Coordinate ranges of the projective factors.
    pub blocks: Vec<Range<usize>>,
}

impl Chart {
    /// All mixed derivatives of the total potential up to `order` at `point`,
    /// in the standard affine coordinates.
    pub fn potential_jet(&self, point: &[C64], order: usize) -> Jet {
        self.potential.jet(&JetVars::at(point, order))
    }

    /// Jet variables in the projective chart adapted to `point`. Tensors
    /// computed from them are expressed in that chart's coordinates; scalar
    /// invariants agree with the standard chart.
    /// Rejects potentials that are not a Fubini–Study part written through
    /// `log_norm` plus a global function: evaluated in a node-adapted chart,
    /// such a potential differs from its standard-chart value by exactly the
    /// change of `Σ d·log_norm`.
    fn check_consistency(&self, factors: &[Factor]) -> Result<()> {
        if self.blocks.is_empty() {
            return Ok(());
        }
        let point: Vec<C64> = (0..self.dim)
            .map(|i| C64::from_polar(3.0 + i as f64, 0.7 * i as f64 + 0.3))
            .collect();
        let global = |vars: &JetVars| {
            let mut psi = self.potential.jet(vars).value().re;
            for f in factors.iter().filter(|f| f.kind == FactorKind::Projective) {
                psi -= f.class * vars.log_norm(&(f.offset..f.offset + f.dim)).value().re;
            }
            psi
        };
        let standard = global(&JetVars::at(&point, 0));
        let adapted = global(&self.adapted_vars(&point, 0));
        if (standard - adapted).abs() > 1e-8 * (1.0 + standard.abs()) {
            return Err(Error::Unsupported(
                "potential must be a Fubini–Study potential plus a globally smooth function".into(),
            ));
        }
        Ok(())
    }

    pub fn adapted_vars(&self, point: &[C64], order: usize) -> JetVars {
        JetVars::adapted(point, order, &self.blocks)
    }

    /// Potential jet in the adapted chart (differs from the standard one by a
    /// pluriharmonic term).
    pub fn adapted_potential_jet(&self, point: &[C64], order: usize) -> Jet {
        self.potential.jet(&self.adapted_vars(point, order))
    }
}

impl fmt::Debug for Chart {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("Chart")
            .field("dim", &self.dim)
            .field("potential", &self.potential)
            .finish()
    }
}

/// `(M, ω_φ)` with the complex structure fixed.
#[derive(Debug, Clone)]
pub struct KahlerModel {
    pub complex_dimension: usize,
    pub chart: Chart,
    pub factors: Vec<Factor>,
    pub quadrature: Arc<QuadratureRule>,
    /// Target of `∫ ωⁿ/n!`.
    pub volume_normalization: f64,
    /// `det g` at each radial node.
    density: Vec<f64>,
    /// Human-readable provenance, used in reports.
    pub label: String,
}

/// Hermitian metric matrix `G[i][j] = ∂_i∂_j̄ Φ` from a potential jet.
pub fn metric_from_jet(jet: &Jet) -> DMatrix<C64> {
    let n = jet.space().nvars() / 2;
    DMatrix::from_fn(n, n, |i, j| jet.d_dbar(i, j))
}

/// Smallest eigenvalue of a Hermitian matrix.
pub fn hermitian_min_eigenvalue(m: &DMatrix<C64>) -> f64 {
    let eig = m.clone().symmetric_eigen();
    eig.eigenvalues.iter().cloned().fold(f64::INFINITY, f64::min)
}

impl KahlerModel {
    fn assemble(
        label: String,
        factors: Vec<Factor>,
        potential: Field,
        quadrature: Arc<QuadratureRule>,
        volume_normalization: f64,
    ) -> Result<KahlerModel> {
        if !potential.torus_invariant() {
            return Err(Error::Unsupported(
                "model potentials must be torus-invariant".into(),
            ));
        }
        let n = quadrature.dim;
        let blocks = factors
            .iter()
            .filter(|f| f.kind == FactorKind::Projective)
            .map(|f| f.offset..f.offset + f.dim)
            .collect();
        let chart = Chart {
            dim: n,
            potential,
            blocks,
        };
        chart.check_consistency(&factors)?;
        let dets: Vec<std::result::Result<f64, f64>> = (0..quadrature.radial_len())
            .into_par_iter()
            .map(|r| {
                let g = metric_from_jet(&chart.potential_jet(&quadrature.radial_point(r), 2));
                match g.clone().cholesky() {
                    Some(_) => Ok(g.determinant().re),
                    None => Err(hermitian_min_eigenvalue(&g)),
                }
            })
            .collect();
        let mut density = Vec::with_capacity(dets.len());
        for (r, d) in dets.into_iter().enumerate() {
            match d {
                Ok(v) if v > 0.0 => density.push(v),
                Ok(v) => {
                    return Err(Error::NonPositiveMetric {
                        node: r,
                        t: quadrature.radial[r].t.clone(),
                        min_eig: v,
                    })
                }
                Err(min_eig) => {
                    return Err(Error::NonPositiveMetric {
                        node: r,
                        t: quadrature.radial[r].t.clone(),
                        min_eig,
                    })
                }
            }
        }
        Ok(KahlerModel {
            complex_dimension: n,
            chart,
            factors,
            quadrature,
            volume_normalization,
            density,
            label,
        })
    }

    /// Fubini–Study `scale · log(1 + |z|²)` on ℂPⁿ at the default level.
    pub fn fubini_study(n: usize, scale: f64) -> Result<KahlerModel> {
        KahlerModel::fubini_study_with_level(n, scale, DEFAULT_LEVEL)
    }

    pub fn fubini_study_with_level(n: usize, scale: f64, level: usize) -> Result<KahlerModel> {
        if !(1..=3).contains(&n) {
            return Err(Error::DimensionOutOfRange(n));
        }
        if !(scale > 0.0) {
            return Err(Error::InvalidArgument(format!("scale must be positive, got {scale}")));
        }
        let factors = vec![Factor {
            kind: FactorKind::Projective,
            dim: n,
            offset: 0,
            class: scale,
        }];
        let quad = Arc::new(QuadratureRule::build(&factors, level, level));
        let vol = scale.powi(n as i32) / factorial(n);
        KahlerModel::assemble(
            format!("fs{n}(scale={scale})"),
            factors,
            Arc::new(FubiniStudyPotential {
                coords: 0..n,
                scale,
            }),
            quad,
            vol,
        )
    }

    /// S¹-invariant metric on ℂP¹ with potential `u(|z|²)`.
    ///
    /// The profile must behave like `log t + O(1/t)` at infinity so that the
    /// class matches Fubini–Study; this is verified through the total volume.
    pub fn u1_sphere(profile: Field) -> Result<KahlerModel> {
        KahlerModel::u1_sphere_with_level(profile, DEFAULT_LEVEL)
    }

    pub fn u1_sphere_with_level(profile: Field, level: usize) -> Result<KahlerModel> {
        let factors = vec![Factor {
            kind: FactorKind::Projective,
            dim: 1,
            offset: 0,
            class: 1.0,
        }];
        let quad = Arc::new(QuadratureRule::build(&factors, level, level));
        let model = KahlerModel::assemble(
            format!("u1profile({profile:?})"),
            factors,
            profile,
            quad,
            1.0,
        )?;
        model.check_volume()?;
        Ok(model)
    }

    /// Flat `Σ|z_i|²` on the unit polydisc; a curvature test chart.
    pub fn flat_polydisc(n: usize, level: usize) -> Result<KahlerModel> {
        if !(1..=3).contains(&n) {
            return Err(Error::DimensionOutOfRange(n));
        }
        let factors: Vec<Factor> = (0..n)
            .map(|i| Factor {
                kind: FactorKind::Polydisc,
                dim: 1,
                offset: i,
                class: 0.0,
            })
            .collect();
        let quad = Arc::new(QuadratureRule::build(&factors, level, level));
        let terms: Vec<(f64, Field)> = (0..n)
            .map(|i| {
                (
                    1.0,
                    Arc::new(crate::functions::RadialFn {
                        coord: i,
                        label: "t".into(),
                        f: Arc::new(|t: &Jet| t.clone()),
                    }) as Field,
                )
            })
            .collect();
        KahlerModel::assemble(format!("flat{n}"), factors, Arc::new(Sum(terms)), quad, 1.0)
    }

    /// Product `A × B` with block-diagonal metric and tensor-product quadrature.
    pub fn product(a: &KahlerModel, b: &KahlerModel) -> Result<KahlerModel> {
        let n = a.complex_dimension + b.complex_dimension;
        if n > 3 {
            return Err(Error::DimensionOutOfRange(n));
        }
        let mut factors = a.factors.clone();
        factors.extend(b.factors.iter().map(|f| Factor {
            offset: f.offset + a.complex_dimension,
            ..f.clone()
        }));
        let level = a.quadrature.level.max(b.quadrature.level);
        let angular = a.quadrature.angular.max(b.quadrature.angular);
        let quad = Arc::new(QuadratureRule::build(&factors, level, angular));
        let potential: Field = Arc::new(Sum(vec![
            (1.0, a.chart.potential.clone()),
            (
                1.0,
                Arc::new(Shifted {
                    inner: b.chart.potential.clone(),
                    offset: a.complex_dimension,
                    len: b.complex_dimension,
                }),
            ),
        ]));
        KahlerModel::assemble(
            format!("{}x{}", a.label, b.label),
            factors,
            potential,
            quad,
            a.volume_normalization * b.volume_normalization,
        )
    }

    /// `ω + i∂∂̄(epsilon · bump)`, same class and quadrature.
    pub fn perturb(&self, bump: Field, epsilon: f64) -> Result<KahlerModel> {
        if epsilon == 0.0 {
            return Ok(self.clone());
        }
        if !bump.torus_invariant() {
            return Err(Error::Unsupported(
                "perturbations must be torus-invariant".into(),
            ));
        }
        let potential: Field = Arc::new(Sum(vec![
            (1.0, self.chart.potential.clone()),
            (epsilon, bump),
        ]));
        KahlerModel::assemble(
            format!("{}+{epsilon}*bump", self.label),
            self.factors.clone(),
            potential,
            self.quadrature.clone(),
            self.volume_normalization,
        )
    }

    /// Same geometry on a different quadrature.
    pub fn with_quadrature(&self, level: usize, angular: usize) -> Result<KahlerModel> {
        let quad = Arc::new(QuadratureRule::build(&self.factors, level, angular));
        KahlerModel::assemble(
            self.label.clone(),
            self.factors.clone(),
            self.chart.potential.clone(),
            quad,
            self.volume_normalization,
        )
    }

    pub fn topology(&self) -> Topology {
        if self.factors.iter().any(|f| f.kind != FactorKind::Projective) {
            return Topology::Other;
        }
        match self.factors.as_slice() {
            [f] => Topology::ProjectiveSpace(f.dim),
            [a, b] if a.dim == 1 && b.dim == 1 => Topology::ProjectiveLineSquared,
            _ => Topology::Other,
        }
    }

    /// Integral class degree per factor, if every factor has one.
    pub fn class_degrees(&self) -> Option<Vec<u32>> {
        self.factors.iter().map(|f| f.degree()).collect()
    }

    pub fn density(&self) -> &[f64] {
        &self.density
    }

    /// Evaluates `f` at every radial node in parallel; output order is node order.
    pub fn map_radial<T: Send>(&self, f: impl Fn(usize, &[C64]) -> T + Sync + Send) -> Vec<T> {
        let q = &self.quadrature;
        (0..q.radial_len())
            .into_par_iter()
            .map(|r| f(r, &q.radial_point(r)))
            .collect()
    }

    /// Evaluates `f` at every full node in parallel.
    pub fn map_full<T: Send>(&self, f: impl Fn(usize, &[C64]) -> T + Sync + Send) -> Vec<T> {
        let q = &self.quadrature;
        (0..q.full_len())
            .into_par_iter()
            .map(|i| f(i, &q.full_point(i)))
            .collect()
    }

    /// Samples a function; torus-invariant functions use the radial layout.
    pub fn sample(&self, f: &dyn SmoothFunction) -> ScalarField {
        if f.torus_invariant() {
            ScalarField::radial(self.map_radial(|_, p| f.value_at(p)))
        } else {
            self.sample_full(f)
        }
    }

    pub fn sample_full(&self, f: &dyn SmoothFunction) -> ScalarField {
        ScalarField {
            values: self.map_full(|_, p| f.value_at(p)),
            layout: Layout::Full,
        }
    }

    /// Expands a radial field onto the full grid.
    pub fn to_full(&self, field: &ScalarField) -> Result<ScalarField> {
        match field.layout {
            Layout::Full => Ok(field.clone()),
            Layout::Radial => {
                self.check_len(field)?;
                let na = self.quadrature.angular_len();
                Ok(ScalarField {
                    values: field
                        .values
                        .iter()
                        .flat_map(|&v| std::iter::repeat_n(v, na))
                        .collect(),
                    layout: Layout::Full,
                })
            }
        }
    }

    fn check_len(&self, field: &ScalarField) -> Result<()> {
        let expected = match field.layout {
            Layout::Radial => self.quadrature.radial_len(),
            Layout::Full => self.quadrature.full_len(),
        };
        if field.values.len() != expected {
            return Err(Error::NodeMismatch {
                expected,
                found: field.values.len(),
            });
        }
        Ok(())
    }

    /// Quadrature weights of `ωⁿ/n!` on a layout.
    pub fn weights(&self, layout: Layout) -> Vec<f64> {
        let q = &self.quadrature;
        match layout {
            Layout::Radial => q
                .radial
                .iter()
                .zip(&self.density)
                .map(|(n, d)| n.weight * d)
                .collect(),
            Layout::Full => {
                let na = q.angular_len();
                let inv = 1.0 / na as f64;
                q.radial
                    .iter()
                    .zip(&self.density)
                    .flat_map(|(n, d)| std::iter::repeat_n(n.weight * d * inv, na))
                    .collect()
            }
        }
    }

    /// `∫_M f ωⁿ/n!` with compensated summation in node order.
    pub fn integrate(&self, field: &ScalarField) -> Result<C64> {
        self.check_len(field)?;
        let weights = self.weights(field.layout);
        let re = compensated_sum(field.values.iter().zip(&weights).map(|(v, w)| v.re * w));
        let im = compensated_sum(field.values.iter().zip(&weights).map(|(v, w)| v.im * w));
        Ok(C64::new(re, im))
    }

    pub fn integrate_real(&self, values: &[f64]) -> Result<f64> {
        Ok(self.integrate(&ScalarField::from_real(values.to_vec()))?.re)
    }

    /// `∫ ωⁿ/n!` by quadrature.
    pub fn volume(&self) -> f64 {
        compensated_sum(
            self.quadrature
                .radial
                .iter()
                .zip(&self.density)
                .map(|(n, d)| n.weight * d),
        )
    }

    fn check_volume(&self) -> Result<()> {
        let v = self.volume();
        if ((v - self.volume_normalization) / self.volume_normalization).abs() > 1e-10 {
            return Err(Error::Unsupported(format!(
                "potential changes the Kähler class: volume {v} vs {}",
                self.volume_normalization
            )));
        }
        Ok(())
    }
}

/// Re-indexes a function of `len` coordinates to start at `offset`.
#[derive(Debug, Clone)]
pub struct Shifted {
    pub inner: Field,
    pub offset: usize,
    pub len: usize,
}

impl SmoothFunction for Shifted {
    fn jet(&self, vars: &JetVars) -> Jet {
        let r = self.offset..self.offset + self.len;
        self.inner.jet(&vars.view(r))
    }
    fn torus_invariant(&self) -> bool {
        self.inner.torus_invariant()
    }
}

pub fn factorial(n: usize) -> f64 {
    (1..=n).map(|k| k as f64).product()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::functions::{self, Height, MomentPolynomial, SphereX};

    #[test]
    fn fubini_study_metric_at_origin_is_scaled_identity() {
        let m = KahlerModel::fubini_study_with_level(1, 2.5, 16).unwrap();
        let g = metric_from_jet(&m.chart.potential_jet(&[C64::new(0.0, 0.0)], 2));
        assert!((g[(0, 0)].re - 2.5).abs() < 1e-15);
    }

    #[test]
    fn fubini_study_volumes() {
        for n in 1..=3 {
            let m = KahlerModel::fubini_study_with_level(n, 1.0, 20).unwrap();
            assert!((m.volume() / m.volume_normalization - 1.0).abs() < 1e-12, "n={n}");
        }
        assert!(matches!(
            KahlerModel::fubini_study(4, 1.0),
            Err(Error::DimensionOutOfRange(4))
        ));
    }

    #[test]
    fn u1_profile_rejects_negative_metric() {
        // u = log(1+t) - 3 t/(1+t)^2 has u' + t u'' < 0 near t = 0
        let bad = functions::sphere_profile(&[-3.0]);
        match KahlerModel::u1_sphere_with_level(bad, 16) {
            Err(Error::NonPositiveMetric { .. }) => {}
            other => panic!("expected positivity failure, got {other:?}"),
        }
        let ok = KahlerModel::u1_sphere_with_level(functions::sphere_profile(&[0.1]), 16).unwrap();
        assert!((ok.volume() - 1.0).abs() < 1e-13);
    }

    #[test]
    fn product_determinant_is_product_of_factors() {
        let a = KahlerModel::fubini_study_with_level(1, 1.0, 8).unwrap();
        let b = KahlerModel::fubini_study_with_level(1, 2.0, 8).unwrap();
        let p = KahlerModel::product(&a, &b).unwrap();
        assert_eq!(p.complex_dimension, 2);
        assert_eq!(p.topology(), Topology::ProjectiveLineSquared);
        for r in 0..p.quadrature.radial_len() {
            let (i, j) = (r / 8, r % 8);
            let expect = a.density()[i] * b.density()[j];
            assert!((p.density()[r] / expect - 1.0).abs() < 1e-13);
        }
        assert!((p.volume() - 2.0).abs() < 1e-12);
    }

    #[test]
    fn perturbation_keeps_volume_and_zero_epsilon_is_identity() {
        let m = KahlerModel::fubini_study_with_level(2, 1.0, 24).unwrap();
        let bump: Field = Arc::new(MomentPolynomial {
            coords: 0..2,
            terms: vec![(1.0, vec![1, 0]), (0.5, vec![1, 1]), (-1.0, vec![0, 2])],
        });
        let same = m.perturb(bump.clone(), 0.0).unwrap();
        assert_eq!(same.density(), m.density());
        let p = m.perturb(bump, 0.05).unwrap();
        assert!(((p.volume() - m.volume()) / m.volume()).abs() < 1e-10);
        assert!(m.perturb(Arc::new(SphereX { coord: 0 }), 0.1).is_err());
    }

    #[test]
    fn integrate_checks_layout_and_odd_modes_vanish() {
        let m = KahlerModel::fubini_study_with_level(1, 1.0, 16).unwrap();
        let one = m.sample(&functions::Constant(1.0));
        assert!((m.integrate(&one).unwrap().re - 1.0).abs() < 1e-14);
        let odd = m.sample(&SphereX { coord: 0 });
        assert_eq!(odd.layout, Layout::Full);
        assert!(m.integrate(&odd).unwrap().norm() < 1e-15);
        let h = m.sample(&Height { coord: 0 });
        assert!(m.integrate(&h).unwrap().norm() < 1e-15);
        let bad = ScalarField::from_real(vec![1.0; 3]);
        assert!(matches!(m.integrate(&bad), Err(Error::NodeMismatch { .. })));
    }
}

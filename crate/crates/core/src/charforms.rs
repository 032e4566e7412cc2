//! Todd polynomial in the Chern-character basis and pointwise evaluation of
//! the densities `t̃_j`, `ℓ̃_j` and `Z̃_j`.
//!
//! Matrix-valued (1,1)-forms are stored as Hermitian matrices in a unitary
//! frame, so `ω` corresponds to the identity and wedge ratios reduce to
//! permutation sums of traces.

use std::collections::BTreeMap;
use std::fmt;

use nalgebra::DMatrix;
use num_complex::Complex64;
use num_rational::Rational64;
use serde::Serialize;

use crate::curvature::{
    curvature_from_jet, delta_scalar_from_jet, hessian_pairing, CurvatureData,
    HermitianEndomorphismField,
};
use crate::error::{Error, Result};
use crate::functions::SmoothFunction;
use crate::model::{factorial, KahlerModel, Layout, ScalarField, Topology};

type C64 = Complex64;

/// Highest Todd degree with an implemented expansion.
pub const MAX_TODD_DEGREE: usize = 3;

/// Polynomial in `ch_1, ch_2, …` with exact rational coefficients. A monomial
/// is the sorted list of its Chern-character degrees.
#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct CharPoly {
    terms: BTreeMap<Vec<u32>, Rational64>,
}

impl CharPoly {
    pub fn zero() -> CharPoly {
        CharPoly::default()
    }

    pub fn one() -> CharPoly {
        CharPoly::monomial(vec![], Rational64::from_integer(1))
    }

    /// The generator `ch_k`.
    pub fn ch(k: u32) -> CharPoly {
        CharPoly::monomial(vec![k], Rational64::from_integer(1))
    }

    pub fn monomial(mut degrees: Vec<u32>, coefficient: Rational64) -> CharPoly {
        degrees.sort_unstable();
        let mut p = CharPoly::zero();
        if coefficient != Rational64::from_integer(0) {
            p.terms.insert(degrees, coefficient);
        }
        p
    }

    pub fn terms(&self) -> impl Iterator<Item = (&[u32], Rational64)> {
        self.terms.iter().map(|(m, c)| (m.as_slice(), *c))
    }

    pub fn coefficient(&self, degrees: &[u32]) -> Rational64 {
        let mut key = degrees.to_vec();
        key.sort_unstable();
        self.terms.get(&key).copied().unwrap_or_default()
    }

    pub fn is_zero(&self) -> bool {
        self.terms.is_empty()
    }

    pub fn add(&self, other: &CharPoly) -> CharPoly {
        let mut out = self.clone();
        for (m, c) in &other.terms {
            let e = out.terms.entry(m.clone()).or_default();
            *e += c;
            if *e == Rational64::from_integer(0) {
                out.terms.remove(m);
            }
        }
        out
    }

    pub fn scale(&self, s: Rational64) -> CharPoly {
        let mut out = CharPoly::zero();
        for (m, c) in &self.terms {
            out = out.add(&CharPoly::monomial(m.clone(), c * s));
        }
        out
    }

    /// Product, dropping monomials of weighted degree above `max_degree`.
    pub fn mul_truncated(&self, other: &CharPoly, max_degree: u32) -> CharPoly {
        let mut out = CharPoly::zero();
        for (a, ca) in &self.terms {
            for (b, cb) in &other.terms {
                let deg: u32 = a.iter().chain(b).sum();
                if deg <= max_degree {
                    let m: Vec<u32> = a.iter().chain(b).copied().collect();
                    out = out.add(&CharPoly::monomial(m, ca * cb));
                }
            }
        }
        out
    }

    pub fn homogeneous_part(&self, degree: u32) -> CharPoly {
        CharPoly {
            terms: self
                .terms
                .iter()
                .filter(|(m, _)| m.iter().sum::<u32>() == degree)
                .map(|(m, c)| (m.clone(), *c))
                .collect(),
        }
    }

    /// Exact evaluation with `ch[k-1]` substituted for `ch_k`.
    pub fn evaluate_exact(&self, ch: &[Rational64]) -> Rational64 {
        self.terms
            .iter()
            .map(|(m, c)| m.iter().fold(*c, |acc, &k| acc * ch[k as usize - 1]))
            .sum()
    }
}

impl fmt::Display for CharPoly {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.terms.is_empty() {
            return write!(f, "0");
        }
        for (i, (m, c)) in self.terms.iter().enumerate() {
            if i > 0 {
                write!(f, " + ")?;
            }
            write!(f, "({c})")?;
            for k in m {
                write!(f, "·ch{k}")?;
            }
        }
        Ok(())
    }
}

fn rat(n: i64, d: i64) -> Rational64 {
    Rational64::new(n, d)
}

/// Taylor coefficients of `log(x / (1 - e^{-x}))` up to `x^max`.
fn log_todd_series(max: usize) -> Vec<Rational64> {
    // (1 - e^{-x})/x = Σ (-1)^m x^m/(m+1)!
    let mut fact = vec![1i64; max + 2];
    for i in 1..fact.len() {
        fact[i] = fact[i - 1] * i as i64;
    }
    let denom: Vec<Rational64> = (0..=max)
        .map(|m| rat(if m % 2 == 0 { 1 } else { -1 }, fact[m + 1]))
        .collect();
    // invert: q = 1/denom
    let mut q = vec![Rational64::from_integer(0); max + 1];
    q[0] = Rational64::from_integer(1);
    for m in 1..=max {
        let s: Rational64 = (1..=m).map(|i| denom[i] * q[m - i]).sum();
        q[m] = -s;
    }
    // log(1 + u), u = q - 1
    let u: Vec<Rational64> = q
        .iter()
        .enumerate()
        .map(|(i, c)| if i == 0 { Rational64::from_integer(0) } else { *c })
        .collect();
    let mut out = vec![Rational64::from_integer(0); max + 1];
    let mut power = u.clone();
    for r in 1..=max {
        let sign = if r % 2 == 1 { 1 } else { -1 };
        for i in 0..=max {
            out[i] += power[i] * rat(sign, r as i64);
        }
        let mut next = vec![Rational64::from_integer(0); max + 1];
        for i in 0..=max {
            for k in 0..=max - i {
                next[i + k] += power[i] * u[k];
            }
        }
        power = next;
    }
    out
}

/// `Td_j` as a polynomial in Chern characters,
/// from `Td = exp(Σ_m β_m m! ch_m)` with `Σ β_m x^m = log(x/(1-e^{-x}))`.
pub fn todd_in_chern_characters(j: usize) -> Result<CharPoly> {
    if j > MAX_TODD_DEGREE {
        return Err(Error::OrderOutOfRange(j));
    }
    let beta = log_todd_series(MAX_TODD_DEGREE);
    let mut log_td = CharPoly::zero();
    let mut mfact = 1i64;
    for (m, b) in beta.iter().enumerate().skip(1) {
        mfact *= m as i64;
        log_td = log_td.add(&CharPoly::ch(m as u32).scale(b * mfact));
    }
    let max = MAX_TODD_DEGREE as u32;
    let mut td = CharPoly::one();
    let mut power = CharPoly::one();
    for r in 1..=MAX_TODD_DEGREE {
        power = power.mul_truncated(&log_td, max).scale(rat(1, r as i64));
        td = td.add(&power);
    }
    Ok(td.homogeneous_part(j as u32))
}

/// `α_1∧…∧α_p∧ω^{n-p}/ωⁿ` for (1,1)-forms given as unitary-frame matrices:
/// `((n-p)!/n!) Σ_σ sgn(σ) Π_cycles tr(Π α)`.
pub fn form_ratio(forms: &[&DMatrix<C64>], n: usize) -> C64 {
    let p = forms.len();
    assert!(p <= n, "form degree exceeds dimension");
    if p == 0 {
        return C64::new(1.0, 0.0);
    }
    let mut total = C64::new(0.0, 0.0);
    for perm in permutations(p) {
        let mut seen = vec![false; p];
        let mut sign = 1.0;
        let mut term = C64::new(1.0, 0.0);
        for start in 0..p {
            if seen[start] {
                continue;
            }
            let mut prod = forms[start].clone();
            seen[start] = true;
            let mut len = 1;
            let mut i = perm[start];
            while i != start {
                prod = &prod * forms[i];
                seen[i] = true;
                len += 1;
                i = perm[i];
            }
            if len % 2 == 0 {
                sign = -sign;
            }
            term *= prod.trace();
        }
        total += term * sign;
    }
    total * (factorial(n - p) / factorial(n))
}

fn permutations(p: usize) -> Vec<Vec<usize>> {
    if p == 0 {
        return vec![vec![]];
    }
    let mut out = Vec::new();
    for perm in permutations(p - 1) {
        for pos in 0..=perm.len() {
            let mut next = perm.clone();
            next.insert(pos, p - 1);
            out.push(next);
        }
    }
    out
}

/// Curvature endomorphism `Θ^a_b` as unitary-frame (1,1)-forms,
/// `(Θ^a_b)_{cd} = R̂_{ab̄cd̄}`.
pub fn curvature_forms(c: &CurvatureData) -> Vec<Vec<DMatrix<C64>>> {
    let n = c.dim();
    let r = c.riemann_unitary();
    (0..n)
        .map(|a| {
            (0..n)
                .map(|b| DMatrix::from_fn(n, n, |i, j| r[((a * n + b) * n + i) * n + j]))
                .collect()
        })
        .collect()
}

/// Expands `Π_i ch_{k_i}` (and optionally an open `(Θ^{e})^a_b` chain) into
/// weighted lists of scalar forms.
fn expand_chains(
    theta: &[Vec<DMatrix<C64>>],
    closed: &[u32],
    open: Option<(u32, usize, usize)>,
) -> Vec<(f64, Vec<(usize, usize)>)> {
    let n = theta.len();
    let mut acc: Vec<(f64, Vec<(usize, usize)>)> = vec![(1.0, vec![])];
    for &k in closed {
        let mut next = Vec::new();
        let w = 1.0 / factorial(k as usize);
        for (c, list) in &acc {
            for cyc in index_tuples(n, k as usize) {
                let mut l = list.clone();
                for s in 0..k as usize {
                    l.push((cyc[s], cyc[(s + 1) % k as usize]));
                }
                next.push((c * w, l));
            }
        }
        acc = next;
    }
    if let Some((e, a, b)) = open {
        let mut next = Vec::new();
        let w = 1.0 / factorial(e as usize);
        for (c, list) in &acc {
            if e == 0 {
                if a == b {
                    next.push((c * w, list.clone()));
                }
                continue;
            }
            for mid in index_tuples(n, e as usize - 1) {
                let mut path = vec![a];
                path.extend(mid);
                path.push(b);
                let mut l = list.clone();
                for s in 0..e as usize {
                    l.push((path[s], path[s + 1]));
                }
                next.push((c * w, l));
            }
        }
        acc = next;
    }
    acc
}

fn index_tuples(n: usize, len: usize) -> Vec<Vec<usize>> {
    let mut out = vec![vec![]];
    for _ in 0..len {
        out = out
            .into_iter()
            .flat_map(|t| {
                (0..n).map(move |i| {
                    let mut t = t.clone();
                    t.push(i);
                    t
                })
            })
            .collect();
    }
    out
}

fn chains_ratio(theta: &[Vec<DMatrix<C64>>], chains: &[(f64, Vec<(usize, usize)>)]) -> C64 {
    let n = theta.len();
    chains
        .iter()
        .map(|(w, list)| {
            let forms: Vec<&DMatrix<C64>> = list.iter().map(|&(a, b)| &theta[a][b]).collect();
            form_ratio(&forms, n) * *w
        })
        .sum()
}

/// `t̃_j = Td_j ∧ ω^{n-j} / ωⁿ` at a point.
pub fn t_tilde_at(c: &CurvatureData, j: usize) -> Result<f64> {
    let n = c.dim();
    if j > n {
        return Err(Error::DegenerateDimension {
            what: "t_tilde degree",
            required: j,
            found: n,
        });
    }
    let td = todd_in_chern_characters(j)?;
    let theta = curvature_forms(c);
    let mut total = 0.0;
    for (mono, coef) in td.terms() {
        total += rational_to_f64(coef) * chains_ratio(&theta, &expand_chains(&theta, mono, None)).re;
    }
    Ok(total)
}

/// Contribution of one Chern-character monomial to `t̃`.
pub fn monomial_ratio_at(c: &CurvatureData, monomial: &[u32]) -> f64 {
    let theta = curvature_forms(c);
    chains_ratio(&theta, &expand_chains(&theta, monomial, None)).re
}

pub fn rational_to_f64(r: Rational64) -> f64 {
    *r.numer() as f64 / *r.denom() as f64
}

/// Unitary-frame endomorphism `Σ_m ℓ̃^k_m` of one monomial of degree `j`:
/// `ℓ̃^k_m = (1/(n+1-j)) [Π_{i≠m} ch_{k_i} · Θ^{k_m-1}/(k_m-1)!] ∧ ω^{n+1-j}/ωⁿ`.
pub fn ell_endomorphism_unitary(c: &CurvatureData, monomial: &[u32]) -> DMatrix<C64> {
    let n = c.dim();
    let j: u32 = monomial.iter().sum();
    let theta = curvature_forms(c);
    let pref = 1.0 / (n as f64 + 1.0 - j as f64);
    let mut out = DMatrix::zeros(n, n);
    for m in 0..monomial.len() {
        let others: Vec<u32> = monomial
            .iter()
            .enumerate()
            .filter(|(i, _)| *i != m)
            .map(|(_, &k)| k)
            .collect();
        for a in 0..n {
            for b in 0..n {
                let chains = expand_chains(&theta, &others, Some((monomial[m] - 1, a, b)));
                out[(a, b)] += chains_ratio(&theta, &chains) * pref;
            }
        }
    }
    out
}

fn check_ell_degree(model: &KahlerModel, j: usize) -> Result<()> {
    if j > 2 {
        return Err(Error::OrderOutOfRange(j));
    }
    if j > model.complex_dimension {
        return Err(Error::DegenerateDimension {
            what: "ell_tilde degree",
            required: j,
            found: model.complex_dimension,
        });
    }
    Ok(())
}

fn layout_for(f: &dyn SmoothFunction) -> Layout {
    if f.torus_invariant() {
        Layout::Radial
    } else {
        Layout::Full
    }
}

/// `∫ f ℓ̃_j ωⁿ`, computed weakly as `-Σ_k a^k_j Σ_m ∫⟨i∂∂̄f, ℓ̃^k_m⟩ ωⁿ`.
pub fn ell_tilde_weak(model: &KahlerModel, j: usize, f: &dyn SmoothFunction) -> Result<f64> {
    check_ell_degree(model, j)?;
    let td = todd_in_chern_characters(j)?;
    let terms: Vec<(Vec<u32>, f64)> = td
        .terms()
        .map(|(m, c)| (m.to_vec(), rational_to_f64(c)))
        .collect();
    let endo = HermitianEndomorphismField::from_unitary(model, layout_for(f), |c| {
        let n = c.dim();
        let mut acc = DMatrix::zeros(n, n);
        for (m, coef) in &terms {
            acc += ell_endomorphism_unitary(c, m) * C64::new(*coef, 0.0);
        }
        acc
    })?;
    weak_pairing(model, f, &endo)
}

/// Same pairing restricted to a single Chern-character monomial, without its
/// Todd coefficient.
pub fn ell_tilde_weak_monomial(
    model: &KahlerModel,
    monomial: &[u32],
    f: &dyn SmoothFunction,
) -> Result<f64> {
    check_ell_degree(model, monomial.iter().sum::<u32>() as usize)?;
    let endo = HermitianEndomorphismField::from_unitary(model, layout_for(f), |c| {
        ell_endomorphism_unitary(c, monomial)
    })?;
    weak_pairing(model, f, &endo)
}

fn weak_pairing(
    model: &KahlerModel,
    f: &dyn SmoothFunction,
    endo: &HermitianEndomorphismField,
) -> Result<f64> {
    let n = model.complex_dimension;
    Ok(-hessian_pairing(model, f, endo)?.re * factorial(n))
}

/// Curvature scalars needed by the closed-form densities.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct CurvatureScalars {
    pub dim: usize,
    pub scalar: f64,
    pub norm_r_sq: f64,
    pub norm_ric_sq: f64,
    pub delta_scalar: f64,
}

impl CurvatureScalars {
    pub fn from_data(c: &CurvatureData, delta_scalar: f64) -> CurvatureScalars {
        CurvatureScalars {
            dim: c.dim(),
            scalar: c.scalar,
            norm_r_sq: c.norm_r_sq,
            norm_ric_sq: c.norm_ric_sq,
            delta_scalar,
        }
    }

    fn pair_norm(&self, what: &'static str) -> Result<f64> {
        if self.dim < 2 {
            return Err(Error::DegenerateDimension {
                what,
                required: 2,
                found: self.dim,
            });
        }
        Ok((self.dim * (self.dim - 1)) as f64)
    }
}

/// Curvature data and `ΔS` at every radial node.
pub fn node_curvature(model: &KahlerModel) -> Result<Vec<(CurvatureData, f64)>> {
    model
        .map_radial(|_, p| {
            let phi = model.chart.adapted_potential_jet(p, 6);
            let c = curvature_from_jet(&phi)?;
            let ds = delta_scalar_from_jet(&phi);
            Ok((c, ds))
        })
        .into_iter()
        .collect()
}

/// `Z̃_0 = 1`, `nZ̃_1 = S/2`,
/// `n(n-1)Z̃_2 = -ΔS/6 + (|R|² - 4|ric|² + 3S²)/24`.
pub fn z_density(s: &CurvatureScalars, j: usize) -> Result<f64> {
    match j {
        0 => Ok(1.0),
        1 => Ok(s.scalar / (2.0 * s.dim as f64)),
        2 => {
            let nn = s.pair_norm("z_density at j = 2")?;
            Ok((-s.delta_scalar / 6.0
                + (s.norm_r_sq - 4.0 * s.norm_ric_sq + 3.0 * s.scalar * s.scalar) / 24.0)
                / nn)
        }
        _ => Err(Error::OrderOutOfRange(j)),
    }
}

/// Pointwise `ℓ̃_j` in closed form: zero for `j < 2`, `-ΔS/(6n(n-1))` at `j = 2`.
pub fn ell_tilde_closed_form(s: &CurvatureScalars, j: usize) -> Result<f64> {
    match j {
        0 | 1 => Ok(0.0),
        2 => Ok(-s.delta_scalar / (6.0 * s.pair_norm("ell_tilde at j = 2")?)),
        _ => Err(Error::OrderOutOfRange(j)),
    }
}

/// Density of `ch_2` including its adjoint term:
/// `(-ΔS - |R|²/2 + |ric|²/2)/(n(n-1))`.
pub fn ch2_density(s: &CurvatureScalars) -> Result<f64> {
    let nn = s.pair_norm("ch2 density")?;
    Ok((-s.delta_scalar - 0.5 * s.norm_r_sq + 0.5 * s.norm_ric_sq) / nn)
}

/// Density of `c_1²` including its adjoint term:
/// `(-2ΔS + S² - |ric|²)/(n(n-1))`.
pub fn c1_squared_density(s: &CurvatureScalars) -> Result<f64> {
    let nn = s.pair_norm("c1^2 density")?;
    Ok((-2.0 * s.delta_scalar + s.scalar * s.scalar - s.norm_ric_sq) / nn)
}

/// `-ch_2/12 + c_1²/8` from the two densities above.
pub fn td2_recombined(s: &CurvatureScalars) -> Result<f64> {
    Ok(-ch2_density(s)? / 12.0 + c1_squared_density(s)? / 8.0)
}

/// `∫ Td_j(M) [ω]^{n-j}` from the Chern numbers of the underlying manifold.
pub fn topological_value(model: &KahlerModel, j: usize) -> Result<f64> {
    let n = model.complex_dimension;
    if j > n {
        return Err(Error::DegenerateDimension {
            what: "Todd degree",
            required: j,
            found: n,
        });
    }
    if j > 2 {
        return Err(Error::OrderOutOfRange(j));
    }
    let degrees = model
        .class_degrees()
        .ok_or_else(|| Error::Unsupported(format!("no Chern-number table for {}", model.label)))?;
    match model.topology() {
        Topology::ProjectiveSpace(m) => {
            // Td(ℂP^m) = (H/(1-e^{-H}))^{m+1}; [ω] = dH
            let q = [rat(1, 1), rat(1, 2), rat(1, 12)];
            let mut series = vec![rat(1, 1), rat(0, 1), rat(0, 1)];
            for _ in 0..=m {
                let mut next = vec![rat(0, 1); 3];
                for a in 0..3 {
                    for b in 0..3 - a {
                        next[a + b] += series[a] * q[b];
                    }
                }
                series = next;
            }
            let d = degrees[0] as f64;
            Ok(rational_to_f64(series[j]) * d.powi((m - j) as i32))
        }
        Topology::ProjectiveLineSquared => {
            let (d1, d2) = (degrees[0] as f64, degrees[1] as f64);
            Ok(match j {
                0 => 2.0 * d1 * d2,
                1 => d1 + d2,
                _ => 1.0,
            })
        }
        _ => Err(Error::Unsupported(format!(
            "no Chern-number table for {}",
            model.label
        ))),
    }
}

/// Densities on the radial nodes and the integral comparison for one degree.
#[derive(Debug, Clone, Serialize)]
pub struct DensityReport {
    pub j: usize,
    pub t_tilde: Vec<f64>,
    pub ell_tilde: Vec<f64>,
    pub z_tilde: Vec<f64>,
    /// `∫ Z̃_j ωⁿ` by quadrature.
    pub integral: f64,
    pub topological_value: f64,
    pub tolerance: f64,
    pub passed: bool,
}

pub const INTEGRAL_TOLERANCE: f64 = 1e-8;

/// `∫ f ωⁿ` for a sampled field.
pub fn integrate_omega_n(model: &KahlerModel, field: &ScalarField) -> Result<f64> {
    Ok(model.integrate(field)?.re * factorial(model.complex_dimension))
}

pub fn z_integral_check(model: &KahlerModel, j: usize) -> Result<DensityReport> {
    if j > 2 {
        return Err(Error::OrderOutOfRange(j));
    }
    let topo = topological_value(model, j)?;
    let nodes = node_curvature(model)?;
    let mut t = Vec::with_capacity(nodes.len());
    let mut ell = Vec::with_capacity(nodes.len());
    let mut z = Vec::with_capacity(nodes.len());
    for (c, ds) in &nodes {
        let s = CurvatureScalars::from_data(c, *ds);
        t.push(t_tilde_at(c, j)?);
        ell.push(ell_tilde_closed_form(&s, j)?);
        z.push(z_density(&s, j)?);
    }
    let integral = integrate_omega_n(model, &ScalarField::from_real(z.clone()))?;
    let tolerance = INTEGRAL_TOLERANCE * topo.abs().max(1.0);
    Ok(DensityReport {
        j,
        t_tilde: t,
        ell_tilde: ell,
        z_tilde: z,
        integral,
        topological_value: topo,
        tolerance,
        passed: (integral - topo).abs() <= tolerance,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::curvature::{curvature_at, ricci_endomorphism};
    use crate::functions::{Constant, MomentPolynomial};
    use std::sync::Arc;

    #[test]
    fn todd_low_degrees() {
        assert_eq!(todd_in_chern_characters(0).unwrap(), CharPoly::one());
        assert_eq!(
            todd_in_chern_characters(1).unwrap(),
            CharPoly::ch(1).scale(rat(1, 2))
        );
        let td2 = todd_in_chern_characters(2).unwrap();
        assert_eq!(td2.coefficient(&[2]), rat(-1, 12));
        assert_eq!(td2.coefficient(&[1, 1]), rat(1, 8));
        let td3 = todd_in_chern_characters(3).unwrap();
        assert_eq!(td3.coefficient(&[1, 1, 1]), rat(1, 48));
        assert_eq!(td3.coefficient(&[1, 2]), rat(-1, 24));
        assert_eq!(td3.coefficient(&[3]), rat(0, 1));
        assert!(todd_in_chern_characters(4).is_err());
    }

    #[test]
    fn form_ratio_of_omega_powers() {
        let id = DMatrix::<C64>::identity(3, 3);
        for p in 0..=3 {
            let forms = vec![&id; p];
            assert!((form_ratio(&forms, 3) - C64::new(1.0, 0.0)).norm() < 1e-14);
        }
    }

    #[test]
    fn t_tilde_closed_forms_on_perturbed_cp2() {
        let m = KahlerModel::fubini_study_with_level(2, 1.0, 4)
            .unwrap()
            .perturb(
                Arc::new(MomentPolynomial {
                    coords: 0..2,
                    terms: vec![(1.0, vec![2, 1]), (0.5, vec![0, 2])],
                }),
                0.2,
            )
            .unwrap();
        let c = curvature_at(&m, &[C64::new(0.5, 0.2), C64::new(-0.3, 0.9)]).unwrap();
        let n = 2.0;
        assert_eq!(t_tilde_at(&c, 0).unwrap(), 1.0);
        assert!((t_tilde_at(&c, 1).unwrap() - c.scalar / (2.0 * n)).abs() < 1e-12);
        let ch2 = monomial_ratio_at(&c, &[2]);
        assert!((ch2 - (c.norm_ric_sq - c.norm_r_sq) / (2.0 * n * (n - 1.0))).abs() < 1e-12);
        let c11 = monomial_ratio_at(&c, &[1, 1]);
        assert!((c11 - (c.scalar.powi(2) - c.norm_ric_sq) / (n * (n - 1.0))).abs() < 1e-11);
        assert!(t_tilde_at(&c, 3).is_err());
    }

    #[test]
    fn ch2_endomorphism_is_normalized_ricci() {
        let m = KahlerModel::fubini_study_with_level(2, 1.0, 3)
            .unwrap()
            .perturb(
                Arc::new(MomentPolynomial {
                    coords: 0..2,
                    terms: vec![(1.0, vec![1, 1])],
                }),
                0.3,
            )
            .unwrap();
        let e = HermitianEndomorphismField::from_unitary(&m, Layout::Radial, |c| {
            ell_endomorphism_unitary(c, &[2])
        })
        .unwrap();
        let ric = ricci_endomorphism(&m, Layout::Radial).unwrap().scaled(0.5);
        for (a, b) in e.values.iter().zip(&ric.values) {
            assert!((a - b).norm() < 1e-12);
        }
    }

    #[test]
    fn z_density_on_fubini_study_cp2() {
        let m = KahlerModel::fubini_study_with_level(2, 1.0, 4).unwrap();
        for (c, ds) in node_curvature(&m).unwrap() {
            let s = CurvatureScalars::from_data(&c, ds);
            assert!((z_density(&s, 2).unwrap() - 1.0).abs() < 1e-10);
            assert!((td2_recombined(&s).unwrap() - z_density(&s, 2).unwrap()).abs() < 1e-12);
        }
        let cp1 = KahlerModel::fubini_study_with_level(1, 1.0, 4).unwrap();
        let (c, ds) = &node_curvature(&cp1).unwrap()[0];
        let s = CurvatureScalars::from_data(c, *ds);
        assert!(matches!(
            z_density(&s, 2),
            Err(Error::DegenerateDimension { .. })
        ));
    }

    #[test]
    fn weak_adjoint_vanishes_on_constants_and_degree_one() {
        let m = KahlerModel::fubini_study_with_level(2, 1.0, 12).unwrap();
        assert_eq!(ell_tilde_weak(&m, 2, &Constant(1.0)).unwrap(), 0.0);
        let f = MomentPolynomial {
            coords: 0..2,
            terms: vec![(1.0, vec![1, 0]), (2.0, vec![1, 2])],
        };
        assert!(ell_tilde_weak(&m, 1, &f).unwrap().abs() < 1e-12);
        assert!(ell_tilde_weak(&m, 3, &Constant(1.0)).is_err());
    }

    #[test]
    fn topology_table() {
        let cp2 = KahlerModel::fubini_study_with_level(2, 1.0, 4).unwrap();
        assert_eq!(topological_value(&cp2, 2).unwrap(), 1.0);
        assert_eq!(topological_value(&cp2, 1).unwrap(), 1.5);
        assert_eq!(topological_value(&cp2, 0).unwrap(), 1.0);
        let cp1 = KahlerModel::fubini_study_with_level(1, 1.0, 4).unwrap();
        assert_eq!(topological_value(&cp1, 1).unwrap(), 1.0);
        let sq = KahlerModel::product(&cp1, &cp1).unwrap();
        assert_eq!(topological_value(&sq, 0).unwrap(), 2.0);
        assert_eq!(topological_value(&sq, 1).unwrap(), 2.0);
        let flat = KahlerModel::flat_polydisc(1, 4).unwrap();
        assert!(matches!(topological_value(&flat, 0), Err(Error::Unsupported(_))));
    }
}

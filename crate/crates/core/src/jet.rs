//! Truncated multivariate Taylor series ("jets") in Wirtinger variables.
//!
//! A point of a chart is expanded as `z = z0 + dz`, `z̄ = conj(z0) + dz̄`, with
//! `dz` and `dz̄` treated as independent variables. Any real-analytic function
//! built from the arithmetic below then carries every mixed derivative
//! `∂^α ∂̄^β` up to the jet order. Variable `i < n` is `dz_i`, variable `n + i`
//! is `dz̄_i`.

use std::collections::HashMap;
use std::ops::{Add, Mul, Neg, Range, Sub};
use std::sync::{Arc, Mutex, OnceLock};

use num_complex::Complex64;

type C64 = Complex64;

/// Monomial layout and multiplication tables for a given (variable count, order).
#[derive(Debug)]
pub struct JetSpace {
    nvars: usize,
    order: usize,
    monomials: Vec<Vec<u8>>,
    index: HashMap<Vec<u8>, usize>,
    mul_table: Vec<(u32, u32, u32)>,
    /// `raise[var][i]`: index of monomial `i · x_var`, for `i` below top degree.
    raise: Vec<Vec<u32>>,
    factorials: Vec<f64>,
}

type SpaceCache = HashMap<(usize, usize), Arc<JetSpace>>;

impl JetSpace {
    /// Cached space for `nvars` variables truncated at total degree `order`.
    pub fn get(nvars: usize, order: usize) -> Arc<JetSpace> {
        static CACHE: OnceLock<Mutex<SpaceCache>> = OnceLock::new();
        let cache = CACHE.get_or_init(|| Mutex::new(HashMap::new()));
        let mut guard = cache.lock().expect("jet space cache poisoned");
        guard
            .entry((nvars, order))
            .or_insert_with(|| Arc::new(JetSpace::build(nvars, order)))
            .clone()
    }

    fn build(nvars: usize, order: usize) -> JetSpace {
        // graded order: all monomials of degree 0, then 1, ...
        let mut monomials = Vec::new();
        for deg in 0..=order {
            let mut current = vec![0u8; nvars];
            push_degree(&mut monomials, &mut current, 0, deg);
        }
        let index: HashMap<Vec<u8>, usize> = monomials
            .iter()
            .enumerate()
            .map(|(i, m)| (m.clone(), i))
            .collect();
        let degree = |m: &Vec<u8>| m.iter().map(|&e| e as usize).sum::<usize>();
        let mut mul_table = Vec::new();
        for (i, a) in monomials.iter().enumerate() {
            let da = degree(a);
            for (j, b) in monomials.iter().enumerate() {
                if da + degree(b) > order {
                    continue;
                }
                let sum: Vec<u8> = a.iter().zip(b).map(|(x, y)| x + y).collect();
                mul_table.push((i as u32, j as u32, index[&sum] as u32));
            }
        }
        let lower = monomials.iter().filter(|m| degree(m) < order).count();
        let raise = (0..nvars)
            .map(|var| {
                monomials[..lower]
                    .iter()
                    .map(|m| {
                        let mut up = m.clone();
                        up[var] += 1;
                        index[&up] as u32
                    })
                    .collect()
            })
            .collect();
        let mut factorials = vec![1.0; order + 2];
        for m in 1..factorials.len() {
            factorials[m] = factorials[m - 1] * m as f64;
        }
        JetSpace {
            nvars,
            order,
            monomials,
            index,
            mul_table,
            raise,
            factorials,
        }
    }

    pub fn nvars(&self) -> usize {
        self.nvars
    }

    pub fn order(&self) -> usize {
        self.order
    }

    pub fn len(&self) -> usize {
        self.monomials.len()
    }

    pub fn is_empty(&self) -> bool {
        self.monomials.is_empty()
    }

    pub fn monomial(&self, i: usize) -> &[u8] {
        &self.monomials[i]
    }

    pub fn index_of(&self, exponents: &[u8]) -> Option<usize> {
        self.index.get(exponents).copied()
    }
}

fn push_degree(out: &mut Vec<Vec<u8>>, current: &mut Vec<u8>, var: usize, remaining: usize) {
    if var + 1 == current.len() {
        current[var] = remaining as u8;
        out.push(current.clone());
        current[var] = 0;
        return;
    }
    for e in (0..=remaining).rev() {
        current[var] = e as u8;
        push_degree(out, current, var + 1, remaining - e);
    }
    current[var] = 0;
}

/// A truncated Taylor expansion with complex coefficients.
#[derive(Debug, Clone)]
pub struct Jet {
    space: Arc<JetSpace>,
    coeffs: Vec<C64>,
}

impl Jet {
    pub fn constant(space: &Arc<JetSpace>, value: C64) -> Jet {
        let mut coeffs = vec![C64::new(0.0, 0.0); space.len()];
        coeffs[0] = value;
        Jet {
            space: space.clone(),
            coeffs,
        }
    }

    pub fn real(space: &Arc<JetSpace>, value: f64) -> Jet {
        Jet::constant(space, C64::new(value, 0.0))
    }

    /// The affine jet `value + d(var)`.
    pub fn variable(space: &Arc<JetSpace>, var: usize, value: C64) -> Jet {
        let mut jet = Jet::constant(space, value);
        if space.order >= 1 {
            let mut e = vec![0u8; space.nvars];
            e[var] = 1;
            let i = space.index[&e];
            jet.coeffs[i] = C64::new(1.0, 0.0);
        }
        jet
    }

    pub fn space(&self) -> &Arc<JetSpace> {
        &self.space
    }

    pub fn order(&self) -> usize {
        self.space.order
    }

    pub fn value(&self) -> C64 {
        self.coeffs[0]
    }

    pub fn coeffs(&self) -> &[C64] {
        &self.coeffs
    }

    /// Taylor coefficient of the monomial `exponents` (zero if beyond the order).
    pub fn coeff(&self, exponents: &[u8]) -> C64 {
        self.space
            .index_of(exponents)
            .map(|i| self.coeffs[i])
            .unwrap_or_default()
    }

    /// The derivative `∂^exponents` at the expansion point.
    pub fn derivative_value(&self, exponents: &[u8]) -> C64 {
        let scale: f64 = exponents
            .iter()
            .map(|&e| self.space.factorials[e as usize])
            .product();
        self.coeff(exponents) * scale
    }

    /// Second mixed derivative `∂_i ∂̄_j` at the expansion point.
    pub fn d_dbar(&self, i: usize, j: usize) -> C64 {
        let n = self.space.nvars / 2;
        let mut e = vec![0u8; self.space.nvars];
        e[i] += 1;
        e[n + j] += 1;
        self.derivative_value(&e)
    }

    /// First derivative along variable `var` at the expansion point.
    pub fn d(&self, var: usize) -> C64 {
        let mut e = vec![0u8; self.space.nvars];
        e[var] = 1;
        self.derivative_value(&e)
    }

    /// The jet of the partial derivative along `var`, one order lower.
    pub fn differentiate(&self, var: usize) -> Jet {
        assert!(self.space.order >= 1, "cannot differentiate an order-0 jet");
        let lower = JetSpace::get(self.space.nvars, self.space.order - 1);
        let mut coeffs = vec![C64::new(0.0, 0.0); lower.len()];
        let raise = &self.space.raise[var];
        for (i, m) in lower.monomials.iter().enumerate() {
            coeffs[i] = self.coeffs[raise[i] as usize] * (m[var] as f64 + 1.0);
        }
        Jet {
            space: lower,
            coeffs,
        }
    }

    pub fn truncate(&self, order: usize) -> Jet {
        if order >= self.space.order {
            return self.clone();
        }
        let lower = JetSpace::get(self.space.nvars, order);
        let coeffs = self.coeffs[..lower.len()].to_vec();
        Jet {
            space: lower,
            coeffs,
        }
    }

    fn aligned(&self, other: &Jet) -> (Jet, Jet) {
        assert_eq!(self.space.nvars, other.space.nvars, "jet variable count mismatch");
        let order = self.space.order.min(other.space.order);
        (self.truncate(order), other.truncate(order))
    }

    pub fn scale(&self, s: C64) -> Jet {
        Jet {
            space: self.space.clone(),
            coeffs: self.coeffs.iter().map(|c| c * s).collect(),
        }
    }

    pub fn scale_real(&self, s: f64) -> Jet {
        Jet {
            space: self.space.clone(),
            coeffs: self.coeffs.iter().map(|c| c * s).collect(),
        }
    }

    pub fn add_const(&self, s: C64) -> Jet {
        let mut out = self.clone();
        out.coeffs[0] += s;
        out
    }

    /// Composes with a univariate function given its Taylor coefficients
    /// `f^(m)(value)/m!` at the current value.
    pub fn compose(&self, taylor: &[C64]) -> Jet {
        let mut h = self.clone();
        h.coeffs[0] = C64::new(0.0, 0.0);
        let order = self.space.order.min(taylor.len().saturating_sub(1));
        let mut acc = Jet::constant(&self.space, taylor[order]);
        for m in (0..order).rev() {
            acc = &(&acc * &h) + &Jet::constant(&self.space, taylor[m]);
        }
        acc
    }

    pub fn ln(&self) -> Jet {
        let x = self.value();
        let n = self.space.order;
        let mut t = vec![x.ln()];
        let mut p = C64::new(1.0, 0.0);
        for m in 1..=n {
            p /= x;
            let sign = if m % 2 == 1 { 1.0 } else { -1.0 };
            t.push(p * (sign / m as f64));
        }
        self.compose(&t)
    }

    pub fn exp(&self) -> Jet {
        let e = self.value().exp();
        let t: Vec<C64> = (0..=self.space.order)
            .map(|m| e / self.space.factorials[m])
            .collect();
        self.compose(&t)
    }

    pub fn recip(&self) -> Jet {
        self.powf(-1.0)
    }

    /// Real power `self^p` on the principal branch.
    pub fn powf(&self, p: f64) -> Jet {
        let x = self.value();
        let mut t = Vec::with_capacity(self.space.order + 1);
        let mut binom = 1.0;
        let base = x.powf(p);
        for m in 0..=self.space.order {
            if m > 0 {
                binom *= (p - (m as f64 - 1.0)) / m as f64;
            }
            t.push(base * binom / x.powi(m as i32));
        }
        self.compose(&t)
    }

    pub fn powi(&self, p: u32) -> Jet {
        let mut acc = Jet::real(&self.space, 1.0);
        let mut base = self.clone();
        let mut e = p;
        while e > 0 {
            if e & 1 == 1 {
                acc = &acc * &base;
            }
            e >>= 1;
            if e > 0 {
                base = &base * &base;
            }
        }
        acc
    }
}

impl Add for &Jet {
    type Output = Jet;
    fn add(self, rhs: &Jet) -> Jet {
        let (a, b) = self.aligned(rhs);
        Jet {
            coeffs: a.coeffs.iter().zip(&b.coeffs).map(|(x, y)| x + y).collect(),
            space: a.space,
        }
    }
}

impl Sub for &Jet {
    type Output = Jet;
    fn sub(self, rhs: &Jet) -> Jet {
        let (a, b) = self.aligned(rhs);
        Jet {
            coeffs: a.coeffs.iter().zip(&b.coeffs).map(|(x, y)| x - y).collect(),
            space: a.space,
        }
    }
}

impl Neg for &Jet {
    type Output = Jet;
    fn neg(self) -> Jet {
        self.scale_real(-1.0)
    }
}

impl Mul for &Jet {
    type Output = Jet;
    fn mul(self, rhs: &Jet) -> Jet {
        let (a, b) = self.aligned(rhs);
        let mut coeffs = vec![C64::new(0.0, 0.0); a.space.len()];
        for &(i, j, k) in &a.space.mul_table {
            let x = a.coeffs[i as usize];
            if x.re == 0.0 && x.im == 0.0 {
                continue;
            }
            coeffs[k as usize] += x * b.coeffs[j as usize];
        }
        Jet {
            space: a.space,
            coeffs,
        }
    }
}

/// Homogeneous coordinates of one projective block, normalized so the pivot
/// coordinate is 1.
#[derive(Debug, Clone)]
struct Patch {
    coords: Range<usize>,
    pivot: usize,
    hom: Vec<Jet>,
    hom_bar: Vec<Jet>,
    norm_inv: Jet,
    log_norm: Jet,
}

impl Patch {
    fn new(coords: Range<usize>, pivot: usize, hom: Vec<Jet>, hom_bar: Vec<Jet>) -> Patch {
        let mut norm = &hom[0] * &hom_bar[0];
        for (a, b) in hom.iter().zip(&hom_bar).skip(1) {
            norm = &norm + &(a * b);
        }
        Patch {
            coords,
            pivot,
            norm_inv: norm.recip(),
            log_norm: norm.ln(),
            hom,
            hom_bar,
        }
    }
}

/// Coordinate jets at a chart point.
///
/// `z`, `z̄` and `t_i = |z_i|²` are the standard affine coordinates. When
/// built with [`JetVars::adapted`], the jet variables are the affine
/// coordinates of the chart of each projective block in which the point is
/// closest to the origin; homogeneous quantities ([`JetVars::moment`],
/// [`JetVars::bilinear`], [`JetVars::log_norm`]) are then free of the
/// cancellation the standard chart suffers far from the origin.
#[derive(Debug, Clone)]
pub struct JetVars {
    pub z: Vec<Jet>,
    pub zbar: Vec<Jet>,
    pub t: Vec<Jet>,
    patches: Vec<Patch>,
}

impl JetVars {
    /// Jets in the standard affine chart.
    pub fn at(point: &[C64], order: usize) -> JetVars {
        let n = point.len();
        let space = JetSpace::get(2 * n, order);
        let z: Vec<Jet> = (0..n).map(|i| Jet::variable(&space, i, point[i])).collect();
        let zbar: Vec<Jet> = (0..n)
            .map(|i| Jet::variable(&space, n + i, point[i].conj()))
            .collect();
        let t = z.iter().zip(&zbar).map(|(a, b)| a * b).collect();
        JetVars {
            z,
            zbar,
            t,
            patches: vec![],
        }
    }

    /// Jets in the chart adapted to `point` for each projective block.
    /// `point` is given in standard affine coordinates.
    pub fn adapted(point: &[C64], order: usize, blocks: &[Range<usize>]) -> JetVars {
        let n = point.len();
        let space = JetSpace::get(2 * n, order);
        let one = Jet::real(&space, 1.0);
        let mut z: Vec<Option<Jet>> = vec![None; n];
        let mut zbar: Vec<Option<Jet>> = vec![None; n];
        let mut patches = Vec::with_capacity(blocks.len());
        for block in blocks {
            let m = block.len();
            let homog: Vec<C64> = std::iter::once(C64::new(1.0, 0.0))
                .chain(block.clone().map(|i| point[i]))
                .collect();
            let mut pivot = 0;
            for (k, v) in homog.iter().enumerate() {
                if v.norm() > homog[pivot].norm() {
                    pivot = k;
                }
            }
            let mut hom = Vec::with_capacity(m + 1);
            let mut hom_bar = Vec::with_capacity(m + 1);
            let mut var = block.start;
            for (k, v) in homog.iter().enumerate() {
                if k == pivot {
                    hom.push(one.clone());
                    hom_bar.push(one.clone());
                } else {
                    let w = v / homog[pivot];
                    hom.push(Jet::variable(&space, var, w));
                    hom_bar.push(Jet::variable(&space, n + var, w.conj()));
                    var += 1;
                }
            }
            let (inv, inv_bar) = if pivot == 0 {
                (one.clone(), one.clone())
            } else {
                (hom[0].recip(), hom_bar[0].recip())
            };
            for (k, i) in block.clone().enumerate() {
                z[i] = Some(&hom[k + 1] * &inv);
                zbar[i] = Some(&hom_bar[k + 1] * &inv_bar);
            }
            patches.push(Patch::new(block.clone(), pivot, hom, hom_bar));
        }
        let z: Vec<Jet> = z
            .into_iter()
            .enumerate()
            .map(|(i, v)| v.unwrap_or_else(|| Jet::variable(&space, i, point[i])))
            .collect();
        let zbar: Vec<Jet> = zbar
            .into_iter()
            .enumerate()
            .map(|(i, v)| v.unwrap_or_else(|| Jet::variable(&space, n + i, point[i].conj())))
            .collect();
        let t = z.iter().zip(&zbar).map(|(a, b)| a * b).collect();
        JetVars {
            z,
            zbar,
            t,
            patches,
        }
    }

    /// The coordinates `range` re-indexed from zero, sharing the jet space.
    pub fn view(&self, range: Range<usize>) -> JetVars {
        JetVars {
            z: self.z[range.clone()].to_vec(),
            zbar: self.zbar[range.clone()].to_vec(),
            t: self.t[range.clone()].to_vec(),
            patches: self
                .patches
                .iter()
                .filter(|p| p.coords.start >= range.start && p.coords.end <= range.end)
                .map(|p| Patch {
                    coords: p.coords.start - range.start..p.coords.end - range.start,
                    ..p.clone()
                })
                .collect(),
        }
    }

    fn patch(&self, coords: &Range<usize>) -> std::borrow::Cow<'_, Patch> {
        match self.patches.iter().find(|p| &p.coords == coords) {
            Some(p) => std::borrow::Cow::Borrowed(p),
            None => {
                let one = self.constant(1.0);
                let hom = std::iter::once(one.clone())
                    .chain(coords.clone().map(|i| self.z[i].clone()))
                    .collect();
                let hom_bar = std::iter::once(one)
                    .chain(coords.clone().map(|i| self.zbar[i].clone()))
                    .collect();
                std::borrow::Cow::Owned(Patch::new(coords.clone(), 0, hom, hom_bar))
            }
        }
    }

    /// Homogeneous coordinate jets `(Z, Z̄)` of the block on `coords`,
    /// normalized so the pivot coordinate is 1.
    pub fn homogeneous(&self, coords: &Range<usize>) -> (Vec<Jet>, Vec<Jet>) {
        let p = self.patch(coords);
        (p.hom.clone(), p.hom_bar.clone())
    }

    /// Homogeneous index fixed to 1 in the chart of the block on `coords`.
    /// Local variable `coords.start + i` is the homogeneous coordinate
    /// `i` (below the pivot) or `i + 1` (from the pivot on).
    pub fn pivot(&self, coords: &Range<usize>) -> usize {
        self.patches
            .iter()
            .find(|p| &p.coords == coords)
            .map(|p| p.pivot)
            .unwrap_or(0)
    }

    /// The same jets composed with the rotation `z_i ↦ e^{iθ_i} z_i`.
    pub fn rotated(&self, angles: &[f64]) -> JetVars {
        let phase = |i: usize| C64::from_polar(1.0, angles[i]);
        JetVars {
            z: self.z.iter().enumerate().map(|(i, j)| j.scale(phase(i))).collect(),
            zbar: self
                .zbar
                .iter()
                .enumerate()
                .map(|(i, j)| j.scale(phase(i).conj()))
                .collect(),
            t: self.t.clone(),
            patches: self
                .patches
                .iter()
                .map(|p| {
                    // an overall phase of Z drops out of every homogeneous quantity
                    let rot = |k: usize| {
                        if k == 0 {
                            C64::new(1.0, 0.0)
                        } else {
                            phase(p.coords.start + k - 1)
                        }
                    };
                    Patch {
                        hom: p.hom.iter().enumerate().map(|(k, j)| j.scale(rot(k))).collect(),
                        hom_bar: p
                            .hom_bar
                            .iter()
                            .enumerate()
                            .map(|(k, j)| j.scale(rot(k).conj()))
                            .collect(),
                        ..p.clone()
                    }
                })
                .collect(),
        }
    }

    /// `|Z_k|² / Σ|Z|²` for homogeneous index `k` (0 is the affine origin's
    /// coordinate) of the projective block on `coords`.
    pub fn moment(&self, coords: &Range<usize>, k: usize) -> Jet {
        self.bilinear(coords, k, k)
    }

    /// `Z_k Z̄_l / Σ|Z|²` on the projective block `coords`.
    pub fn bilinear(&self, coords: &Range<usize>, k: usize, l: usize) -> Jet {
        let p = self.patch(coords);
        &(&p.hom[k] * &p.hom_bar[l]) * &p.norm_inv
    }

    /// `log(Σ|Z|²)` with the current chart's normalization; equals
    /// `log(1 + Σ_{i ∈ coords} t_i)` up to a pluriharmonic term.
    pub fn log_norm(&self, coords: &Range<usize>) -> Jet {
        self.patch(coords).log_norm.clone()
    }

    pub fn dim(&self) -> usize {
        self.z.len()
    }

    pub fn space(&self) -> &Arc<JetSpace> {
        self.z[0].space()
    }

    pub fn constant(&self, value: f64) -> Jet {
        Jet::real(self.space(), value)
    }
}

//! Real-analytic functions on a chart, evaluated as jets.
//!
//! Potentials, perturbation bumps and operator symbols all implement
//! [`SmoothFunction`]; every derivative the laboratory needs comes from the
//! jet they return.

use std::fmt;
use std::ops::Range;
use std::sync::Arc;

use num_complex::Complex64;

use crate::jet::{Jet, JetVars};

/// A function on the affine chart, expanded to the order carried by `vars`.
pub trait SmoothFunction: Send + Sync + fmt::Debug {
    fn jet(&self, vars: &JetVars) -> Jet;

    /// True when the function only depends on `|z_i|²`.
    fn torus_invariant(&self) -> bool {
        false
    }

    fn value_at(&self, point: &[Complex64]) -> Complex64 {
        self.jet(&JetVars::at(point, 0)).value()
    }
}

pub type Field = Arc<dyn SmoothFunction>;

#[derive(Debug, Clone, Copy)]
pub struct Constant(pub f64);

impl SmoothFunction for Constant {
    fn jet(&self, vars: &JetVars) -> Jet {
        vars.constant(self.0)
    }
    fn torus_invariant(&self) -> bool {
        true
    }
}

/// `scale · log(1 + Σ_{i ∈ coords} |z_i|²)`.
#[derive(Debug, Clone)]
pub struct FubiniStudyPotential {
    pub coords: Range<usize>,
    pub scale: f64,
}

impl SmoothFunction for FubiniStudyPotential {
    fn jet(&self, vars: &JetVars) -> Jet {
        vars.log_norm(&self.coords).scale_real(self.scale)
    }
    fn torus_invariant(&self) -> bool {
        true
    }
}

/// `t/(1+t)^m` in the radial variable of coordinate `coord`.
///
/// Smooth on ℂP¹ for `m ≥ 2` and decays like `1/t`, so adding it to the
/// potential keeps the Kähler class.
#[derive(Debug, Clone, Copy)]
pub struct RadialBump {
    pub coord: usize,
    pub m: u32,
}

impl SmoothFunction for RadialBump {
    fn jet(&self, vars: &JetVars) -> Jet {
        // x (1 - x)^{m-1} with x = t/(1+t)
        let block = self.coord..self.coord + 1;
        let x = vars.moment(&block, 1);
        match self.m {
            0 => &x * &vars.moment(&block, 0).recip(),
            1 => x,
            m => &x * &vars.moment(&block, 0).powi(m - 1),
        }
    }
    fn torus_invariant(&self) -> bool {
        true
    }
}

/// Polynomial in the moment coordinates `x_i = |z_i|²/(1 + Σ|z|²)` of a
/// projective factor; each such polynomial is smooth on all of ℂP^m.
#[derive(Debug, Clone)]
pub struct MomentPolynomial {
    pub coords: Range<usize>,
    /// `(coefficient, exponents)` with one exponent per coordinate in `coords`.
    pub terms: Vec<(f64, Vec<u32>)>,
}

impl SmoothFunction for MomentPolynomial {
    fn jet(&self, vars: &JetVars) -> Jet {
        let x: Vec<Jet> = (1..=self.coords.len())
            .map(|k| vars.moment(&self.coords, k))
            .collect();
        let mut acc = vars.constant(0.0);
        for (c, e) in &self.terms {
            let mut term = vars.constant(*c);
            for (xi, &p) in x.iter().zip(e) {
                if p > 0 {
                    term = &term * &xi.powi(p);
                }
            }
            acc = &acc + &term;
        }
        acc
    }
    fn torus_invariant(&self) -> bool {
        true
    }
}

/// Height function `(1 - |z|²)/(1 + |z|²)` of the round sphere in coordinate `coord`.
#[derive(Debug, Clone, Copy)]
pub struct Height {
    pub coord: usize,
}

impl SmoothFunction for Height {
    fn jet(&self, vars: &JetVars) -> Jet {
        let block = self.coord..self.coord + 1;
        &vars.moment(&block, 0) - &vars.moment(&block, 1)
    }
    fn torus_invariant(&self) -> bool {
        true
    }
}

/// `2 Re(z)/(1 + |z|²)`, the first horizontal coordinate of the sphere.
#[derive(Debug, Clone, Copy)]
pub struct SphereX {
    pub coord: usize,
}

impl SmoothFunction for SphereX {
    fn jet(&self, vars: &JetVars) -> Jet {
        let block = self.coord..self.coord + 1;
        &vars.bilinear(&block, 1, 0) + &vars.bilinear(&block, 0, 1)
    }
}

/// `exp(inner)`.
#[derive(Debug, Clone)]
pub struct Exp(pub Field);

impl SmoothFunction for Exp {
    fn jet(&self, vars: &JetVars) -> Jet {
        self.0.jet(vars).exp()
    }
    fn torus_invariant(&self) -> bool {
        self.0.torus_invariant()
    }
}

/// Linear combination `Σ c_i f_i`.
#[derive(Debug, Clone, Default)]
pub struct Sum(pub Vec<(f64, Field)>);

impl SmoothFunction for Sum {
    fn jet(&self, vars: &JetVars) -> Jet {
        let mut acc = vars.constant(0.0);
        for (c, f) in &self.0 {
            if *c != 0.0 {
                acc = &acc + &f.jet(vars).scale_real(*c);
            }
        }
        acc
    }
    fn torus_invariant(&self) -> bool {
        self.0.iter().all(|(_, f)| f.torus_invariant())
    }
}

/// Pointwise product of two functions.
#[derive(Debug, Clone)]
pub struct Product(pub Field, pub Field);

impl SmoothFunction for Product {
    fn jet(&self, vars: &JetVars) -> Jet {
        &self.0.jet(vars) * &self.1.jet(vars)
    }
    fn torus_invariant(&self) -> bool {
        self.0.torus_invariant() && self.1.torus_invariant()
    }
}

/// A function of a single radial variable `t = |z_coord|²`, given by a jet
/// closure. Used for user-supplied ℂP¹ profiles.
#[derive(Clone)]
pub struct RadialFn {
    pub coord: usize,
    pub label: String,
    pub f: Arc<dyn Fn(&Jet) -> Jet + Send + Sync>,
}

impl fmt::Debug for RadialFn {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "RadialFn({}, coord {})", self.label, self.coord)
    }
}

impl SmoothFunction for RadialFn {
    fn jet(&self, vars: &JetVars) -> Jet {
        (self.f)(&vars.t[self.coord])
    }
    fn torus_invariant(&self) -> bool {
        true
    }
}

/// `f ∘ R` for the torus rotation `R: z_i ↦ e^{iθ_i} z_i`.
#[derive(Debug, Clone)]
pub struct Rotated {
    pub inner: Field,
    pub angles: Vec<f64>,
}

impl SmoothFunction for Rotated {
    fn jet(&self, vars: &JetVars) -> Jet {
        self.inner.jet(&vars.rotated(&self.angles))
    }
    fn torus_invariant(&self) -> bool {
        self.inner.torus_invariant()
    }
}

pub fn constant(c: f64) -> Field {
    Arc::new(Constant(c))
}

/// ℂP¹ profile `log(1+t) + Σ c_i t/(1+t)^{i+2}`; the coefficient list is the
/// flow's perturbation basis.
pub fn sphere_profile(coefficients: &[f64]) -> Field {
    let mut terms: Vec<(f64, Field)> = vec![(
        1.0,
        Arc::new(FubiniStudyPotential {
            coords: 0..1,
            scale: 1.0,
        }),
    )];
    for (i, &c) in coefficients.iter().enumerate() {
        terms.push((c, Arc::new(RadialBump { coord: 0, m: i as u32 + 2 })));
    }
    Arc::new(Sum(terms))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn moment_polynomial_is_bounded_and_invariant() {
        let p = MomentPolynomial {
            coords: 0..2,
            terms: vec![(1.0, vec![1, 0]), (-2.0, vec![1, 1])],
        };
        assert!(p.torus_invariant());
        let v = p.value_at(&[Complex64::new(1.0, 0.0), Complex64::new(0.0, 2.0)]);
        // x1 = 1/6, x2 = 4/6
        let expect = 1.0 / 6.0 - 2.0 * (1.0 / 6.0) * (4.0 / 6.0);
        assert!((v.re - expect).abs() < 1e-15 && v.im.abs() < 1e-15);
    }

    #[test]
    fn sphere_x_is_real_and_not_invariant() {
        let f = SphereX { coord: 0 };
        assert!(!f.torus_invariant());
        let v = f.value_at(&[Complex64::new(0.5, 0.5)]);
        assert!((v.re - 1.0 / 1.5).abs() < 1e-15);
        assert_eq!(v.im, 0.0);
    }
}

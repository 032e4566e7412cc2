//! Pointwise Kähler curvature from potential jets.

use nalgebra::DMatrix;
use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::functions::SmoothFunction;
use crate::jet::{Jet, JetVars};
use crate::model::{metric_from_jet, KahlerModel, Layout, ScalarField};

type C64 = Complex64;

/// Metric, curvature tensors and scalar invariants at one point.
#[derive(Debug, Clone)]
pub struct CurvatureData {
    pub g: DMatrix<C64>,
    pub g_inv: DMatrix<C64>,
    /// `R_{ij̄kl̄}` stored at `((i*n + j)*n + k)*n + l`.
    pub riemann: Vec<C64>,
    pub ricci: DMatrix<C64>,
    pub scalar: f64,
    pub norm_r_sq: f64,
    pub norm_ric_sq: f64,
    /// Unitary frame: columns `e_a = Σ_i frame[(i, a)] ∂_i`.
    pub frame: DMatrix<C64>,
}

impl CurvatureData {
    pub fn dim(&self) -> usize {
        self.g.nrows()
    }

    pub fn r(&self, i: usize, j: usize, k: usize, l: usize) -> C64 {
        let n = self.dim();
        self.riemann[((i * n + j) * n + k) * n + l]
    }

    /// Riemann tensor in the unitary frame, same index layout.
    pub fn riemann_unitary(&self) -> Vec<C64> {
        to_unitary4(&self.riemann, &self.frame)
    }

    /// Ricci form in the unitary frame.
    pub fn ricci_unitary(&self) -> DMatrix<C64> {
        lower_form_to_unitary(&self.ricci, &self.frame)
    }
}

fn exps(n: usize, holo: &[usize], anti: &[usize]) -> Vec<u8> {
    let mut e = vec![0u8; 2 * n];
    for &i in holo {
        e[i] += 1;
    }
    for &j in anti {
        e[n + j] += 1;
    }
    e
}

fn unitary_frame(g: &DMatrix<C64>) -> Option<DMatrix<C64>> {
    let l = g.clone().cholesky()?.unpack();
    let linv = l.try_inverse()?;
    Some(linv.transpose())
}

/// `B̂ = Aᵀ B Ā` for a (1,1) tensor with both indices down.
pub fn lower_form_to_unitary(b: &DMatrix<C64>, frame: &DMatrix<C64>) -> DMatrix<C64> {
    frame.transpose() * b * frame.map(|c| c.conj())
}

/// Inverse of [`lower_form_to_unitary`].
pub fn lower_form_from_unitary(b_hat: &DMatrix<C64>, frame: &DMatrix<C64>) -> DMatrix<C64> {
    let a_inv = frame.clone().try_inverse().expect("frame is invertible");
    a_inv.transpose() * b_hat * a_inv.map(|c| c.conj())
}

fn to_unitary4(r: &[C64], a: &DMatrix<C64>) -> Vec<C64> {
    let n = a.nrows();
    let idx = |i: usize, j: usize, k: usize, l: usize| ((i * n + j) * n + k) * n + l;
    let mut cur = r.to_vec();
    // transform one slot at a time; barred slots use conj(A)
    for slot in 0..4 {
        let mut next = vec![C64::new(0.0, 0.0); cur.len()];
        for i in 0..n {
            for j in 0..n {
                for k in 0..n {
                    for l in 0..n {
                        let mut acc = C64::new(0.0, 0.0);
                        for m in 0..n {
                            let (src, coef) = match slot {
                                0 => (idx(m, j, k, l), a[(m, i)]),
                                1 => (idx(i, m, k, l), a[(m, j)].conj()),
                                2 => (idx(i, j, m, l), a[(m, k)]),
                                _ => (idx(i, j, k, m), a[(m, l)].conj()),
                            };
                            acc += coef * cur[src];
                        }
                        next[idx(i, j, k, l)] = acc;
                    }
                }
            }
        }
        cur = next;
    }
    cur
}

/// Curvature from a potential jet of order ≥ 4 at its expansion point.
pub fn curvature_from_jet(phi: &Jet) -> Result<CurvatureData> {
    let n = phi.space().nvars() / 2;
    if phi.order() < 4 {
        return Err(Error::InvalidArgument("curvature needs a jet of order 4".into()));
    }
    let g = metric_from_jet(phi);
    let frame = unitary_frame(&g).ok_or_else(|| Error::NonPositiveMetric {
        node: 0,
        t: vec![],
        min_eig: crate::model::hermitian_min_eigenvalue(&g),
    })?;
    let h = g.clone().try_inverse().ok_or(Error::SingularGram)?;
    let mut riemann = vec![C64::new(0.0, 0.0); n.pow(4)];
    for i in 0..n {
        for j in 0..n {
            for k in 0..n {
                for l in 0..n {
                    let mut v = -phi.derivative_value(&exps(n, &[i, k], &[j, l]));
                    for p in 0..n {
                        for q in 0..n {
                            // g^{q̄p} ∂_k g_{iq̄} ∂_l̄ g_{pj̄}
                            v += h[(q, p)]
                                * phi.derivative_value(&exps(n, &[i, k], &[q]))
                                * phi.derivative_value(&exps(n, &[p], &[j, l]));
                        }
                    }
                    riemann[((i * n + j) * n + k) * n + l] = v;
                }
            }
        }
    }
    let ricci = DMatrix::from_fn(n, n, |i, j| {
        let mut acc = C64::new(0.0, 0.0);
        for k in 0..n {
            for l in 0..n {
                acc += h[(l, k)] * riemann[((i * n + j) * n + k) * n + l];
            }
        }
        acc
    });
    let r_hat = to_unitary4(&riemann, &frame);
    let ric_hat = lower_form_to_unitary(&ricci, &frame);
    let norm_r_sq = r_hat.iter().map(|v| v.norm_sqr()).sum();
    let norm_ric_sq = ric_hat.iter().map(|v| v.norm_sqr()).sum();
    let scalar = (0..n).map(|a| ric_hat[(a, a)].re).sum();
    Ok(CurvatureData {
        g,
        g_inv: h,
        riemann,
        ricci,
        scalar,
        norm_r_sq,
        norm_ric_sq,
        frame,
    })
}

pub fn curvature_at(model: &KahlerModel, point: &[C64]) -> Result<CurvatureData> {
    curvature_from_jet(&model.chart.adapted_potential_jet(point, 4))
}

/// Curvature at every radial node (angle 0).
pub fn curvature_field(model: &KahlerModel) -> Result<Vec<CurvatureData>> {
    model.map_radial(|_, p| curvature_at(model, p)).into_iter().collect()
}

/// Ricci form by the independent route `-∂∂̄ log det g`.
pub fn ricci_from_log_det(model: &KahlerModel, point: &[C64]) -> DMatrix<C64> {
    let phi = model.chart.adapted_potential_jet(point, 4);
    let n = model.complex_dimension;
    let ld = log_det_metric_jet(&phi);
    DMatrix::from_fn(n, n, |i, j| -ld.d_dbar(i, j))
}

fn metric_jets(phi: &Jet) -> Vec<Vec<Jet>> {
    let n = phi.space().nvars() / 2;
    (0..n)
        .map(|i| {
            let di = phi.differentiate(i);
            (0..n).map(|j| di.differentiate(n + j)).collect()
        })
        .collect()
}

fn det_jet(m: &[Vec<Jet>]) -> Jet {
    match m.len() {
        1 => m[0][0].clone(),
        2 => &(&m[0][0] * &m[1][1]) - &(&m[0][1] * &m[1][0]),
        n => {
            let mut acc = &m[0][0] * &det_jet(&minor(m, 0, 0));
            for c in 1..n {
                let term = &m[0][c] * &det_jet(&minor(m, 0, c));
                acc = if c % 2 == 0 { &acc + &term } else { &acc - &term };
            }
            acc
        }
    }
}

fn minor(m: &[Vec<Jet>], row: usize, col: usize) -> Vec<Vec<Jet>> {
    m.iter()
        .enumerate()
        .filter(|(r, _)| *r != row)
        .map(|(_, r)| {
            r.iter()
                .enumerate()
                .filter(|(c, _)| *c != col)
                .map(|(_, v)| v.clone())
                .collect()
        })
        .collect()
}

fn log_det_metric_jet(phi: &Jet) -> Jet {
    det_jet(&metric_jets(phi)).ln()
}

/// Inverse-metric jets `H = G⁻¹`, `H[a][b]`.
fn inverse_metric_jets(g: &[Vec<Jet>]) -> Vec<Vec<Jet>> {
    let n = g.len();
    let det_inv = det_jet(g).recip();
    if n == 1 {
        return vec![vec![det_inv]];
    }
    (0..n)
        .map(|a| {
            (0..n)
                .map(|b| {
                    // H[a][b] = cofactor(b, a) / det
                    let c = det_jet(&minor(g, b, a));
                    let c = if (a + b) % 2 == 0 { c } else { c.scale_real(-1.0) };
                    &c * &det_inv
                })
                .collect()
        })
        .collect()
}

/// Scalar curvature as a jet, `order(phi) - 4` deep.
pub fn scalar_curvature_jet(phi: &Jet) -> Jet {
    let n = phi.space().nvars() / 2;
    let g = metric_jets(phi);
    let ld = det_jet(&g).ln();
    let h = inverse_metric_jets(&g);
    let mut s: Option<Jet> = None;
    for i in 0..n {
        let di = ld.differentiate(i);
        for j in 0..n {
            let ric = di.differentiate(n + j).scale_real(-1.0);
            let term = &h[j][i] * &ric;
            s = Some(match s {
                None => term,
                Some(acc) => &acc + &term,
            });
        }
    }
    s.expect("dimension ≥ 1")
}

pub(crate) fn laplacian_of_jet(f: &Jet, g_inv: &DMatrix<C64>) -> C64 {
    let n = g_inv.nrows();
    let mut acc = C64::new(0.0, 0.0);
    for i in 0..n {
        for j in 0..n {
            acc += g_inv[(j, i)] * f.d_dbar(i, j);
        }
    }
    acc
}

/// `ΔS` at a point; needs the potential to sixth order.
pub fn delta_scalar(model: &KahlerModel, point: &[C64]) -> f64 {
    let phi = model.chart.adapted_potential_jet(point, 6);
    delta_scalar_from_jet(&phi)
}

pub fn delta_scalar_from_jet(phi: &Jet) -> f64 {
    let s = scalar_curvature_jet(phi);
    let g_inv = metric_from_jet(phi).try_inverse().expect("metric invertible");
    laplacian_of_jet(&s, &g_inv).re
}

/// Scalar curvature and its Laplacian at every radial node.
pub fn scalar_and_laplacian_field(model: &KahlerModel) -> (Vec<f64>, Vec<f64>) {
    model
        .map_radial(|_, p| {
            let phi = model.chart.adapted_potential_jet(p, 6);
            let s = scalar_curvature_jet(&phi);
            let g_inv = metric_from_jet(&phi).try_inverse().expect("metric invertible");
            (s.value().re, laplacian_of_jet(&s, &g_inv).re)
        })
        .into_iter()
        .unzip()
}

/// `Δf = g^{ij̄} ∂_i∂_j̄ f` sampled on the layout matching `f`.
pub fn laplacian(model: &KahlerModel, f: &dyn SmoothFunction) -> ScalarField {
    let eval = |p: &[C64]| {
        let vars = model.chart.adapted_vars(p, 2);
        let g_inv = metric_from_jet(&model.chart.potential.jet(&vars))
            .try_inverse()
            .expect("metric invertible");
        laplacian_of_jet(&f.jet(&vars), &g_inv)
    };
    if f.torus_invariant() {
        ScalarField::radial(model.map_radial(|_, p| eval(p)))
    } else {
        ScalarField {
            values: model.map_full(|_, p| eval(p)),
            layout: Layout::Full,
        }
    }
}

/// Per-node endomorphisms of `T^{1,0}M`, coordinate components `E[(p, j)] = ℓ_p^j`.
#[derive(Debug, Clone)]
pub struct HermitianEndomorphismField {
    pub values: Vec<DMatrix<C64>>,
    pub layout: Layout,
}

impl HermitianEndomorphismField {
    /// `E·s` pointwise.
    pub fn scaled(&self, s: f64) -> HermitianEndomorphismField {
        HermitianEndomorphismField {
            values: self.values.iter().map(|m| m * C64::new(s, 0.0)).collect(),
            layout: self.layout,
        }
    }

    pub fn identity(model: &KahlerModel, layout: Layout) -> HermitianEndomorphismField {
        let n = model.complex_dimension;
        let len = match layout {
            Layout::Radial => model.quadrature.radial_len(),
            Layout::Full => model.quadrature.full_len(),
        };
        HermitianEndomorphismField {
            values: vec![DMatrix::identity(n, n); len],
            layout,
        }
    }

    /// Builds the coordinate endomorphism from a unitary-frame matrix at each node.
    pub fn from_unitary(
        model: &KahlerModel,
        layout: Layout,
        build: impl Fn(&CurvatureData) -> DMatrix<C64> + Sync + Send,
    ) -> Result<HermitianEndomorphismField> {
        let f = |p: &[C64]| -> Result<DMatrix<C64>> {
            let c = curvature_at(model, p)?;
            let lowered = lower_form_from_unitary(&build(&c), &c.frame);
            Ok(lowered * &c.g_inv)
        };
        let values: Result<Vec<_>> = match layout {
            Layout::Radial => model.map_radial(|_, p| f(p)).into_iter().collect(),
            Layout::Full => model.map_full(|_, p| f(p)).into_iter().collect(),
        };
        Ok(HermitianEndomorphismField {
            values: values?,
            layout,
        })
    }
}

/// The Ricci endomorphism `ric_p{}^q = Ric_{pr̄} g^{qr̄}`.
pub fn ricci_endomorphism(model: &KahlerModel, layout: Layout) -> Result<HermitianEndomorphismField> {
    let f = |p: &[C64]| -> Result<DMatrix<C64>> {
        let c = curvature_at(model, p)?;
        Ok(&c.ricci * &c.g_inv)
    };
    let values: Result<Vec<_>> = match layout {
        Layout::Radial => model.map_radial(|_, p| f(p)).into_iter().collect(),
        Layout::Full => model.map_full(|_, p| f(p)).into_iter().collect(),
    };
    Ok(HermitianEndomorphismField {
        values: values?,
        layout,
    })
}

/// `∫ ∂_j∂_k̄ f · ℓ_p{}^j g^{k̄p} ωⁿ/n!`.
pub fn hessian_pairing(
    model: &KahlerModel,
    f: &dyn SmoothFunction,
    endo: &HermitianEndomorphismField,
) -> Result<C64> {
    let n = model.complex_dimension;
    let expected = match endo.layout {
        Layout::Radial => model.quadrature.radial_len(),
        Layout::Full => model.quadrature.full_len(),
    };
    if endo.values.len() != expected || endo.values.iter().any(|m| m.nrows() != n) {
        return Err(Error::InvalidArgument(
            "endomorphism field does not match the model".into(),
        ));
    }
    if endo.layout == Layout::Radial && !f.torus_invariant() {
        return Err(Error::InvalidArgument(
            "radial endomorphism fields pair only with torus-invariant functions".into(),
        ));
    }
    let eval = |idx: usize, p: &[C64]| {
        let vars = model.chart.adapted_vars(p, 2);
        let g_inv = metric_from_jet(&model.chart.potential.jet(&vars))
            .try_inverse()
            .expect("metric invertible");
        let fj = f.jet(&vars);
        let e = &endo.values[idx];
        let mut acc = C64::new(0.0, 0.0);
        for j in 0..n {
            for k in 0..n {
                let fjk = fj.d_dbar(j, k);
                for q in 0..n {
                    acc += fjk * e[(q, j)] * g_inv[(k, q)];
                }
            }
        }
        acc
    };
    let values = match endo.layout {
        Layout::Radial => model.map_radial(eval),
        Layout::Full => model.map_full(eval),
    };
    model.integrate(&ScalarField {
        values,
        layout: endo.layout,
    })
}

/// Hamiltonian vector field of `f` for `ω_pre = i g_{jk̄} dz^j∧dz̄^k`.
#[derive(Debug, Clone)]
pub struct HamiltonianVector {
    /// `(1,0)` components `X^j`; the real vector is `X^j ∂_j + c.c.`.
    pub holomorphic: Vec<C64>,
    /// Real components `(x_1, y_1, …, x_n, y_n)`.
    pub real: Vec<f64>,
}

pub fn hamiltonian_field(
    model: &KahlerModel,
    f: &dyn SmoothFunction,
    point: &[C64],
) -> HamiltonianVector {
    let g_inv = metric_from_jet(&model.chart.potential_jet(point, 2))
        .try_inverse()
        .expect("metric invertible");
    let fj = f.jet(&JetVars::at(point, 1));
    hamiltonian_from_parts(&g_inv, &fj)
}

pub(crate) fn hamiltonian_from_parts(g_inv: &DMatrix<C64>, fj: &Jet) -> HamiltonianVector {
    let n = g_inv.nrows();
    let holomorphic: Vec<C64> = (0..n)
        .map(|j| {
            let mut acc = C64::new(0.0, 0.0);
            for k in 0..n {
                acc += g_inv[(k, j)] * fj.d(n + k);
            }
            -C64::i() * acc
        })
        .collect();
    let real = holomorphic.iter().flat_map(|x| [x.re, x.im]).collect();
    HamiltonianVector { holomorphic, real }
}

/// `max_Y |df(Y) - ω_pre(X_f, Y)|` over the real coordinate basis, with
/// `ω_pre` assembled as a real 2-form independently of the solve.
pub fn hamiltonian_residual(model: &KahlerModel, f: &dyn SmoothFunction, point: &[C64]) -> f64 {
    let n = model.complex_dimension;
    let g = metric_from_jet(&model.chart.potential_jet(point, 2));
    let x = hamiltonian_field(model, f, point);
    let fj = f.jet(&JetVars::at(point, 1));
    let as_complex = |v: &[f64]| -> Vec<C64> { (0..n).map(|j| C64::new(v[2 * j], v[2 * j + 1])).collect() };
    let omega = |u: &[f64], v: &[f64]| -> f64 {
        // i g_{jk̄} (U^j V̄^k - V^j Ū^k)
        let (uc, vc) = (as_complex(u), as_complex(v));
        let mut acc = C64::new(0.0, 0.0);
        for j in 0..n {
            for k in 0..n {
                acc += g[(j, k)] * (uc[j] * vc[k].conj() - vc[j] * uc[k].conj());
            }
        }
        (C64::i() * acc).re
    };
    let mut worst: f64 = 0.0;
    for b in 0..2 * n {
        let mut y = vec![0.0; 2 * n];
        y[b] = 1.0;
        let yc = as_complex(&y);
        let df: C64 = (0..n).map(|j| fj.d(j) * yc[j] + fj.d(n + j) * yc[j].conj()).sum();
        worst = worst.max((df - omega(&x.real, &y)).norm());
    }
    worst
}

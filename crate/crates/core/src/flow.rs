//! Gradient flow of the Kähler potential toward constant `Z̃_j`, in a finite
//! torus-invariant perturbation basis.
//!
//! The velocity is the `L²(ω_φ)` projection of `Z̃_j − Z̄` onto the basis
//! (constants included, then dropped). With the curvature sign conventions
//! used throughout, the `+` sign is the energy-decreasing one: for `j = 1`
//! this is the Calabi flow.

use std::sync::Arc;

use nalgebra::{DMatrix, DVector};
use serde::Serialize;

use crate::charforms::{node_curvature, z_density, CurvatureScalars};
use crate::curvature::curvature_at;
use crate::error::{Error, Result};
use crate::functions::{Field, MomentPolynomial, Product, RadialBump, SmoothFunction, Sum};
use crate::jet::JetVars;
use crate::model::{FactorKind, KahlerModel};

/// Consecutive accepted steps without energy decrease before giving up.
pub const STAGNATION_LIMIT: usize = 10;

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct FlowParams {
    pub dt0: f64,
    pub t_max: f64,
    pub tol: f64,
    pub basis_size: usize,
    pub dt_min: f64,
    pub max_steps: usize,
}

impl Default for FlowParams {
    fn default() -> Self {
        FlowParams {
            dt0: 1e-3,
            t_max: 10.0,
            tol: 1e-4,
            basis_size: 4,
            dt_min: 1e-8,
            max_steps: 100_000,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct FlowState {
    pub time: f64,
    pub coefficients: Vec<f64>,
    /// Additive constant fixing `∫φ ω_φⁿ = 0`.
    pub gauge: f64,
    pub energy: f64,
    pub max_deviation: f64,
    pub z_bar: f64,
    pub volume: f64,
    /// Step that produced this state (0 for the initial state).
    pub dt: f64,
}

/// Perturbation directions of a flow, with readable labels.
#[derive(Debug, Clone)]
pub struct FlowBasis {
    pub elements: Vec<Field>,
    pub labels: Vec<String>,
}

impl FlowBasis {
    pub fn len(&self) -> usize {
        self.elements.len()
    }

    pub fn is_empty(&self) -> bool {
        self.elements.is_empty()
    }

    pub fn combination(&self, coefficients: &[f64]) -> Field {
        Arc::new(Sum(self
            .elements
            .iter()
            .zip(coefficients)
            .map(|(f, &c)| (c, f.clone()))
            .collect()))
    }
}

fn factor_basis(f: &crate::model::Factor, size: usize) -> Vec<(Field, String)> {
    if f.dim == 1 {
        (2..size as u32 + 2)
            .map(|m| {
                (
                    Arc::new(RadialBump { coord: f.offset, m }) as Field,
                    format!("t{}/(1+t)^{m}", f.offset),
                )
            })
            .collect()
    } else {
        // moment monomials of total degree 1..=size
        let mut out = Vec::new();
        for total in 1..=size as u32 {
            for e in compositions(total, f.dim) {
                out.push((
                    Arc::new(MomentPolynomial {
                        coords: f.offset..f.offset + f.dim,
                        terms: vec![(1.0, e.clone())],
                    }) as Field,
                    format!("x{}^{e:?}", f.offset),
                ));
            }
        }
        out
    }
}

fn compositions(total: u32, parts: usize) -> Vec<Vec<u32>> {
    if parts == 1 {
        return vec![vec![total]];
    }
    (0..=total)
        .rev()
        .flat_map(|first| {
            compositions(total - first, parts - 1).into_iter().map(move |mut r| {
                r.insert(0, first);
                r
            })
        })
        .collect()
}

/// Per-factor bases and their tensor products, without the constant.
pub fn flow_basis(model: &KahlerModel, size: usize) -> Result<FlowBasis> {
    if size == 0 {
        return Err(Error::InvalidArgument("flow basis size must be ≥ 1".into()));
    }
    if model.factors.iter().any(|f| f.kind != FactorKind::Projective) {
        return Err(Error::Unsupported("flows run on compact models only".into()));
    }
    let mut acc: Vec<(Option<Field>, String)> = vec![(None, String::new())];
    for f in &model.factors {
        let local = factor_basis(f, size);
        let mut next = Vec::new();
        for (a, la) in &acc {
            next.push((a.clone(), la.clone()));
            for (b, lb) in &local {
                let el = match a {
                    None => b.clone(),
                    Some(a) => Arc::new(Product(a.clone(), b.clone())) as Field,
                };
                let label = if la.is_empty() { lb.clone() } else { format!("{la}*{lb}") };
                next.push((Some(el), label));
            }
        }
        acc = next;
    }
    let (elements, labels) = acc
        .into_iter()
        .filter_map(|(f, l)| f.map(|f| (f, l)))
        .unzip();
    Ok(FlowBasis { elements, labels })
}

/// `Z̃_j` at every radial node.
pub fn z_tilde_field(model: &KahlerModel, j: usize) -> Result<Vec<f64>> {
    let n = model.complex_dimension;
    match j {
        0 => Ok(vec![1.0; model.quadrature.radial_len()]),
        1 => model
            .map_radial(|_, p| Ok(curvature_at(model, p)?.scalar / (2.0 * n as f64)))
            .into_iter()
            .collect(),
        2 => node_curvature(model)?
            .iter()
            .map(|(c, ds)| z_density(&CurvatureScalars::from_data(c, *ds), 2))
            .collect(),
        _ => Err(Error::OrderOutOfRange(j)),
    }
}

/// `Z̄`, `E = ∫(Z̃_j − Z̄)² ωⁿ/n!` and `‖Z̃_j − Z̄‖∞` of a model.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct EnergyData {
    pub z_bar: f64,
    pub energy: f64,
    pub max_deviation: f64,
    pub volume: f64,
}

pub fn energy(model: &KahlerModel, j: usize) -> Result<EnergyData> {
    energy_from_field(model, &z_tilde_field(model, j)?)
}

fn energy_from_field(model: &KahlerModel, z: &[f64]) -> Result<EnergyData> {
    let volume = model.volume();
    let z_bar = model.integrate_real(z)? / volume;
    let dev: Vec<f64> = z.iter().map(|v| v - z_bar).collect();
    let sq: Vec<f64> = dev.iter().map(|d| d * d).collect();
    Ok(EnergyData {
        z_bar,
        energy: model.integrate_real(&sq)?,
        max_deviation: dev.iter().fold(0.0, |m, d| m.max(d.abs())),
        volume,
    })
}

fn check_j(model: &KahlerModel, j: usize) -> Result<()> {
    match j {
        1 => Ok(()),
        2 if model.complex_dimension >= 2 => Ok(()),
        2 => Err(Error::DegenerateDimension {
            what: "flow at j = 2",
            required: 2,
            found: model.complex_dimension,
        }),
        _ => Err(Error::OrderOutOfRange(j)),
    }
}

struct Evaluation {
    model: KahlerModel,
    energy: EnergyData,
    velocity: Vec<f64>,
    gauge: f64,
}

fn sample_real(model: &KahlerModel, f: &dyn SmoothFunction) -> Vec<f64> {
    model.sample(f).real_parts()
}

fn evaluate(model0: &KahlerModel, basis: &FlowBasis, j: usize, c: &[f64]) -> Result<Evaluation> {
    let model = model0.perturb(basis.combination(c), 1.0)?;
    let z = z_tilde_field(&model, j)?;
    let energy = energy_from_field(&model, &z)?;
    let dev: Vec<f64> = z.iter().map(|v| v - energy.z_bar).collect();
    // L² projection onto span{1, b_1, …}
    let mut columns: Vec<Vec<f64>> = vec![vec![1.0; dev.len()]];
    columns.extend(basis.elements.iter().map(|b| sample_real(&model, b.as_ref())));
    let m = columns.len();
    let mut gram = DMatrix::zeros(m, m);
    let mut rhs = DVector::zeros(m);
    for a in 0..m {
        for b in a..m {
            let prod: Vec<f64> = columns[a].iter().zip(&columns[b]).map(|(x, y)| x * y).collect();
            let v = model.integrate_real(&prod)?;
            gram[(a, b)] = v;
            gram[(b, a)] = v;
        }
        let prod: Vec<f64> = columns[a].iter().zip(&dev).map(|(x, y)| x * y).collect();
        rhs[a] = model.integrate_real(&prod)?;
    }
    let sol = gram
        .cholesky()
        .ok_or_else(|| Error::FlowAborted("flow basis is degenerate on this model".into()))?
        .solve(&rhs);
    let phi = sample_real(&model, basis.combination(c).as_ref());
    let gauge = -model.integrate_real(&phi)? / energy.volume;
    Ok(Evaluation {
        model,
        energy,
        velocity: sol.iter().skip(1).copied().collect(),
        gauge,
    })
}

fn state(e: &Evaluation, time: f64, c: &[f64], dt: f64) -> FlowState {
    FlowState {
        time,
        coefficients: c.to_vec(),
        gauge: e.gauge,
        energy: e.energy.energy,
        max_deviation: e.energy.max_deviation,
        z_bar: e.energy.z_bar,
        volume: e.energy.volume,
        dt,
    }
}

#[derive(Debug, Clone)]
pub struct FlowRun {
    pub j: usize,
    pub params: FlowParams,
    pub basis: FlowBasis,
    pub trajectory: Vec<FlowState>,
    pub converged: bool,
    pub rejected_steps: usize,
    pub final_model: KahlerModel,
}

impl FlowRun {
    pub fn last(&self) -> &FlowState {
        self.trajectory.last().expect("trajectory starts with the initial state")
    }

    /// Largest drift of `Z̄` and of the volume from their initial values.
    pub fn invariant_drift(&self) -> (f64, f64) {
        let first = &self.trajectory[0];
        self.trajectory.iter().fold((0.0, 0.0), |(z, v), s| {
            (
                f64::max(z, (s.z_bar - first.z_bar).abs()),
                f64::max(v, (s.volume - first.volume).abs()),
            )
        })
    }

    /// True when every accepted step kept or lowered the energy.
    pub fn energy_monotone(&self) -> bool {
        self.trajectory.windows(2).all(|w| w[1].energy <= w[0].energy)
    }
}

fn axpy(c: &[f64], dt: f64, v: &[f64]) -> Vec<f64> {
    c.iter().zip(v).map(|(c, v)| c + dt * v).collect()
}

/// Heun (RK2) flow with energy-controlled step size.
pub fn run_flow(model0: &KahlerModel, j: usize, params: FlowParams) -> Result<FlowRun> {
    check_j(model0, j)?;
    if !(params.dt0 > 0.0 && params.t_max > 0.0 && params.tol > 0.0 && params.dt_min > 0.0) {
        return Err(Error::InvalidArgument("flow parameters must be positive".into()));
    }
    let basis = flow_basis(model0, params.basis_size)?;
    let mut c = vec![0.0; basis.len()];
    let mut current = evaluate(model0, &basis, j, &c)?;
    let mut time = 0.0;
    let mut dt = params.dt0;
    let mut trajectory = vec![state(&current, time, &c, 0.0)];
    let mut rejected = 0;
    let mut stagnant = 0;
    let mut steps = 0;
    let mut just_rejected = false;
    while current.energy.max_deviation >= params.tol && time < params.t_max {
        if steps >= params.max_steps {
            break;
        }
        let h = dt.min(params.t_max - time);
        let attempt = (|| {
            let mid = evaluate(model0, &basis, j, &axpy(&c, h, &current.velocity))?;
            let avg: Vec<f64> = current
                .velocity
                .iter()
                .zip(&mid.velocity)
                .map(|(a, b)| 0.5 * (a + b))
                .collect();
            let next_c = axpy(&c, h, &avg);
            let next = evaluate(model0, &basis, j, &next_c)?;
            Ok::<_, Error>((next_c, next))
        })();
        match attempt {
            Ok((next_c, next)) if next.energy.energy <= current.energy.energy => {
                if current.energy.energy - next.energy.energy <= 1e-12 * current.energy.energy {
                    stagnant += 1;
                    if stagnant >= STAGNATION_LIMIT {
                        return Err(Error::FlowAborted(format!(
                            "energy stalled at {:e} (max deviation {:e}) at t = {time}",
                            next.energy.energy, next.energy.max_deviation
                        )));
                    }
                } else {
                    stagnant = 0;
                }
                time += h;
                c = next_c;
                current = next;
                trajectory.push(state(&current, time, &c, h));
                steps += 1;
                // after a rejection the step is near the stability limit
                dt = if just_rejected { h } else { h * 2.0 };
                just_rejected = false;
            }
            Ok(_) | Err(Error::NonPositiveMetric { .. }) => {
                rejected += 1;
                just_rejected = true;
                dt = h / 2.0;
                if dt < params.dt_min {
                    return Err(Error::FlowAborted(format!(
                        "step size fell below {:e} at t = {time} (energy {:e})",
                        params.dt_min, current.energy.energy
                    )));
                }
            }
            Err(e) => return Err(e),
        }
    }
    Ok(FlowRun {
        j,
        params,
        basis,
        converged: current.energy.max_deviation < params.tol,
        trajectory,
        rejected_steps: rejected,
        final_model: current.model,
    })
}

/// Finite-difference derivative of `E` along `direction` against the chain
/// rule with a finite-difference density derivative.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct EnergyGradientReport {
    pub h: f64,
    pub finite_difference: f64,
    pub predicted: f64,
    pub relative_error: f64,
}

/// `dE = 2∫(Z̃ − Z̄) dZ̃ ωⁿ/n! + ∫(Z̃ − Z̄)² Δψ ωⁿ/n!`; the second term is the
/// variation of the volume form.
pub fn energy_gradient_check(
    model: &KahlerModel,
    j: usize,
    direction: Field,
    h: f64,
) -> Result<EnergyGradientReport> {
    check_j(model, j)?;
    if !(h > 0.0) {
        return Err(Error::InvalidArgument("step must be positive".into()));
    }
    let plus = model.perturb(direction.clone(), h)?;
    let minus = model.perturb(direction.clone(), -h)?;
    let z = z_tilde_field(model, j)?;
    let zp = z_tilde_field(&plus, j)?;
    let zm = z_tilde_field(&minus, j)?;
    let finite_difference =
        (energy_from_field(&plus, &zp)?.energy - energy_from_field(&minus, &zm)?.energy) / (2.0 * h);
    let base = energy_from_field(model, &z)?;
    let lap = crate::curvature::laplacian(model, direction.as_ref()).real_parts();
    let integrand: Vec<f64> = (0..z.len())
        .map(|i| {
            let d = z[i] - base.z_bar;
            let dz = (zp[i] - zm[i]) / (2.0 * h);
            2.0 * d * dz + d * d * lap[i]
        })
        .collect();
    let predicted = model.integrate_real(&integrand)?;
    let scale = finite_difference.abs().max(predicted.abs());
    let relative_error = if scale == 0.0 {
        0.0
    } else {
        (finite_difference - predicted).abs() / scale
    };
    Ok(EnergyGradientReport {
        h,
        finite_difference,
        predicted,
        relative_error,
    })
}

/// `sup |u′(t) − λ/(1 + λt)|` over the nodes of an `S¹`-invariant ℂP¹ model,
/// minimized over the dilation `λ` (the round metrics in the class).
pub fn round_profile_deviation(model: &KahlerModel) -> Result<f64> {
    if model.complex_dimension != 1 || model.factors[0].kind != FactorKind::Projective {
        return Err(Error::Unsupported("round profile comparison needs ℂP¹".into()));
    }
    let samples: Vec<(f64, f64)> = model.map_radial(|_, p| {
        let phi = model.chart.potential.jet(&JetVars::at(p, 1));
        // ∂_z u(|z|²) = u′ z̄
        (p[0].norm_sqr(), (phi.d(0) / p[0].conj()).re)
    });
    let dev = |log_l: f64| {
        let l = log_l.exp();
        samples
            .iter()
            .map(|(t, u)| (u - l / (1.0 + l * t)).abs())
            .fold(0.0, f64::max)
    };
    // golden-section search on log λ
    let (mut a, mut b) = (-3.0f64, 3.0f64);
    let r = (5f64.sqrt() - 1.0) / 2.0;
    for _ in 0..200 {
        let c = b - r * (b - a);
        let d = a + r * (b - a);
        if dev(c) < dev(d) {
            b = d;
        } else {
            a = c;
        }
    }
    Ok(dev(0.5 * (a + b)))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::functions::constant;

    fn perturbed_sphere(eps: f64) -> KahlerModel {
        KahlerModel::fubini_study_with_level(1, 1.0, 24)
            .unwrap()
            .perturb(Arc::new(RadialBump { coord: 0, m: 2 }), eps)
            .unwrap()
    }

    #[test]
    fn basis_sizes() {
        let cp1 = KahlerModel::fubini_study_with_level(1, 1.0, 4).unwrap();
        assert_eq!(flow_basis(&cp1, 3).unwrap().len(), 3);
        let sq = KahlerModel::product(&cp1, &cp1).unwrap();
        assert_eq!(flow_basis(&sq, 2).unwrap().len(), 8);
    }

    #[test]
    fn fubini_study_is_a_fixed_point() {
        let m = KahlerModel::fubini_study_with_level(1, 1.0, 16).unwrap();
        let run = run_flow(&m, 1, FlowParams::default()).unwrap();
        assert_eq!(run.trajectory.len(), 1);
        assert!(run.converged && run.last().energy < 1e-12);
        assert!(round_profile_deviation(&m).unwrap() < 1e-14);
    }

    #[test]
    fn gradient_check_and_constant_direction() {
        let m = perturbed_sphere(0.1);
        let dir: Field = Arc::new(RadialBump { coord: 0, m: 3 });
        let r = energy_gradient_check(&m, 1, dir.clone(), 1e-4).unwrap();
        assert!(r.relative_error < 1e-4, "{r:?}");
        let c = energy_gradient_check(&m, 1, constant(1.0), 1e-4).unwrap();
        assert!(c.finite_difference.abs() < 1e-12 && c.predicted.abs() < 1e-12);
        assert!(run_flow(&m, 3, FlowParams::default()).is_err());
        assert!(run_flow(&m, 2, FlowParams::default()).is_err());
    }
}

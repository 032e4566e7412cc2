//! Large-k expansion fits and the Bergman / Z-critical identity chain.

use nalgebra::{DMatrix, DVector};
use serde::Serialize;

use crate::charforms::{node_curvature, z_density, CurvatureScalars};
use crate::error::{Error, Result};
use crate::model::KahlerModel;
use crate::quantization::{bergman_density_with_laplacian, gram, section_basis};

/// Fits with a scaled condition number above this are refused.
pub const MAX_FIT_CONDITION: f64 = 1e12;

/// Least-squares fit of `value(k) ≈ Σ_p c_p k^p`.
#[derive(Debug, Clone, Serialize)]
pub struct ExpansionFit {
    pub powers: Vec<i32>,
    pub coefficients: Vec<f64>,
    pub std_errors: Vec<f64>,
    pub residual_norm: f64,
    pub condition_number: f64,
    pub k_min: f64,
    pub k_max: f64,
}

impl ExpansionFit {
    pub fn coefficient(&self, power: i32) -> Option<f64> {
        self.powers
            .iter()
            .position(|&p| p == power)
            .map(|i| self.coefficients[i])
    }

    pub fn std_error(&self, power: i32) -> Option<f64> {
        self.powers
            .iter()
            .position(|&p| p == power)
            .map(|i| self.std_errors[i])
    }

    /// The fitted expansion at `k`; refuses to extrapolate.
    pub fn evaluate(&self, k: f64) -> Result<f64> {
        if k < self.k_min || k > self.k_max {
            return Err(Error::Fit(format!(
                "k = {k} outside the fitted range [{}, {}]",
                self.k_min, self.k_max
            )));
        }
        Ok(self
            .powers
            .iter()
            .zip(&self.coefficients)
            .map(|(&p, c)| c * k.powi(p))
            .sum())
    }
}

/// Column-scaled least squares in the power basis.
pub fn fit_expansion(values: &[(f64, f64)], powers: &[i32]) -> Result<ExpansionFit> {
    if powers.is_empty() {
        return Err(Error::Fit("no powers to fit".into()));
    }
    if values.len() < powers.len() + 1 {
        return Err(Error::Fit(format!(
            "{} samples cannot fit {} powers with a residual",
            values.len(),
            powers.len()
        )));
    }
    let (m, p) = (values.len(), powers.len());
    let mut a = DMatrix::from_fn(m, p, |i, j| values[i].0.powi(powers[j]));
    let b = DVector::from_iterator(m, values.iter().map(|v| v.1));
    let scales: Vec<f64> = (0..p).map(|j| a.column(j).norm()).collect();
    if scales.iter().any(|s| !(*s > 0.0)) {
        return Err(Error::Fit("degenerate power column".into()));
    }
    for (j, s) in scales.iter().enumerate() {
        a.column_mut(j).scale_mut(1.0 / s);
    }
    let svd = a.clone().svd(true, true);
    let smax = svd.singular_values.max();
    let smin = svd.singular_values.min();
    let cond = smax / smin;
    if !(smin > 0.0) || cond > MAX_FIT_CONDITION {
        return Err(Error::Fit(format!("rank-deficient fit (condition {cond:e})")));
    }
    let x = svd
        .solve(&b, 0.0)
        .map_err(|e| Error::Fit(e.to_string()))?;
    let resid = &a * &x - &b;
    let rss = resid.norm_squared();
    let dof = (m - p) as f64;
    let sigma2 = rss / dof;
    let v = svd.v_t.expect("requested V").transpose();
    let std_errors: Vec<f64> = (0..p)
        .map(|j| {
            let var: f64 = (0..p)
                .map(|i| (v[(j, i)] / svd.singular_values[i]).powi(2))
                .sum();
            (var * sigma2).sqrt() / scales[j]
        })
        .collect();
    let coefficients = (0..p).map(|j| x[j] / scales[j]).collect();
    let ks = values.iter().map(|v| v.0);
    Ok(ExpansionFit {
        powers: powers.to_vec(),
        coefficients,
        std_errors,
        residual_norm: rss.sqrt(),
        condition_number: cond,
        k_min: ks.clone().fold(f64::INFINITY, f64::min),
        k_max: ks.fold(f64::NEG_INFINITY, f64::max),
    })
}

/// Default k-range of the Bergman fits.
pub const DEFAULT_KS: [u32; 5] = [8, 12, 16, 24, 32];

/// Pointwise fits of `ρ_k = Σ_j a_j k^{n-j}` (and of `Δρ_k`, which gives
/// `Δa_j`) at the radial nodes. No `log k` terms are fitted.
#[derive(Debug, Clone, Serialize)]
pub struct TyzCoefficients {
    pub ks: Vec<u32>,
    pub powers: Vec<i32>,
    /// `a_j` per node, indexed `[j][node]`.
    pub coefficients: Vec<Vec<f64>>,
    pub std_errors: Vec<Vec<f64>>,
    /// `Δa_j` per node.
    pub laplacians: Vec<Vec<f64>>,
    pub max_condition: f64,
}

impl TyzCoefficients {
    pub fn a(&self, j: usize) -> &[f64] {
        &self.coefficients[j]
    }
}

fn distinct_count(ks: &[u32]) -> usize {
    let mut v = ks.to_vec();
    v.sort_unstable();
    v.dedup();
    v.len()
}

/// Fits `terms` coefficients `a_0 … a_{terms-1}` from Bergman densities at
/// the levels `ks`.
pub fn tyz_coefficients(model: &KahlerModel, ks: &[u32], terms: usize) -> Result<TyzCoefficients> {
    if terms == 0 || distinct_count(ks) < terms + 1 {
        return Err(Error::Fit(format!(
            "{terms} coefficients need at least {} distinct k",
            terms + 1
        )));
    }
    let n = model.complex_dimension as i32;
    let powers: Vec<i32> = (0..terms as i32).map(|j| n - j).collect();
    let mut rho = Vec::with_capacity(ks.len());
    let mut lap = Vec::with_capacity(ks.len());
    for &k in ks {
        let basis = section_basis(model, k)?;
        let g = gram(model, &basis)?;
        let (r, l) = bergman_density_with_laplacian(model, &basis, &g)?;
        rho.push(r);
        lap.push(l);
    }
    let nodes = rho[0].len();
    let mut coefficients = vec![vec![0.0; nodes]; terms];
    let mut std_errors = vec![vec![0.0; nodes]; terms];
    let mut laplacians = vec![vec![0.0; nodes]; terms];
    let mut max_condition: f64 = 0.0;
    for node in 0..nodes {
        let samples = |data: &[Vec<f64>]| -> Vec<(f64, f64)> {
            ks.iter().zip(data).map(|(&k, d)| (k as f64, d[node])).collect()
        };
        let fit = fit_expansion(&samples(&rho), &powers)?;
        let lfit = fit_expansion(&samples(&lap), &powers)?;
        max_condition = max_condition.max(fit.condition_number);
        for j in 0..terms {
            coefficients[j][node] = fit.coefficients[j];
            std_errors[j][node] = fit.std_errors[j];
            laplacians[j][node] = lfit.coefficients[j];
        }
    }
    Ok(TyzCoefficients {
        ks: ks.to_vec(),
        powers,
        coefficients,
        std_errors,
        laplacians,
        max_condition,
    })
}

/// Fitted `a_2 − Δa_1` against the curvature closed form `n(n−1)Z̃_2`.
#[derive(Debug, Clone, Serialize)]
pub struct IdentityChainReport {
    pub ks: Vec<u32>,
    pub fitted: Vec<f64>,
    pub closed_form: Vec<f64>,
    pub max_relative_deviation: f64,
    pub max_abs_deviation: f64,
}

/// Number of coefficients fitted for the identity chain; the extra term
/// absorbs the `k^{n-3}` tail.
pub const IDENTITY_CHAIN_TERMS: usize = 4;

pub fn identity_chain_check(model: &KahlerModel, ks: &[u32]) -> Result<IdentityChainReport> {
    let tyz = tyz_coefficients(model, ks, IDENTITY_CHAIN_TERMS)?;
    identity_chain_from(model, &tyz)
}

/// The identity chain from an existing fit with at least three coefficients.
pub fn identity_chain_from(model: &KahlerModel, tyz: &TyzCoefficients) -> Result<IdentityChainReport> {
    let n = model.complex_dimension;
    if n < 2 {
        return Err(Error::DegenerateDimension {
            what: "identity chain at j = 2",
            required: 2,
            found: n,
        });
    }
    if tyz.coefficients.len() < 3 {
        return Err(Error::Fit("identity chain needs a₂".into()));
    }
    let fitted: Vec<f64> = tyz.coefficients[2]
        .iter()
        .zip(&tyz.laplacians[1])
        .map(|(a2, da1)| a2 - da1)
        .collect();
    let nn = (n * (n - 1)) as f64;
    let closed_form = node_curvature(model)?
        .iter()
        .map(|(c, ds)| Ok(nn * z_density(&CurvatureScalars::from_data(c, *ds), 2)?))
        .collect::<Result<Vec<f64>>>()?;
    let mut max_rel: f64 = 0.0;
    let mut max_abs: f64 = 0.0;
    for (f, c) in fitted.iter().zip(&closed_form) {
        let d = (f - c).abs();
        max_abs = max_abs.max(d);
        max_rel = max_rel.max(d / c.abs());
    }
    Ok(IdentityChainReport {
        ks: tyz.ks.clone(),
        fitted,
        closed_form,
        max_relative_deviation: max_rel,
        max_abs_deviation: max_abs,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn recovers_exact_polynomial() {
        let vals: Vec<(f64, f64)> = [8.0, 12.0, 16.0, 24.0, 32.0]
            .iter()
            .map(|&k: &f64| (k, k.powi(2) + 3.0 * k))
            .collect();
        let fit = fit_expansion(&vals, &[2, 1]).unwrap();
        assert!((fit.coefficients[0] - 1.0).abs() < 1e-10);
        assert!((fit.coefficients[1] - 3.0).abs() < 1e-10);
        assert!(fit.residual_norm < 1e-9);
    }

    #[test]
    fn residual_bounds_dropped_tail() {
        let vals: Vec<(f64, f64)> = [8.0, 12.0, 16.0, 24.0, 32.0]
            .iter()
            .map(|&k: &f64| (k, k.powi(2) + 3.0 * k + 5.0))
            .collect();
        let fit = fit_expansion(&vals, &[2, 1]).unwrap();
        assert!(fit.residual_norm > 0.0);
        assert!(fit.residual_norm <= 5.0 * (vals.len() as f64).sqrt());
    }

    #[test]
    fn contract_errors() {
        assert!(fit_expansion(&[(1.0, 1.0), (2.0, 2.0)], &[]).is_err());
        assert!(fit_expansion(&[(1.0, 1.0), (2.0, 2.0)], &[1, 0]).is_err());
        let fit = fit_expansion(&[(1.0, 1.0), (2.0, 2.0), (3.0, 3.0)], &[1]).unwrap();
        assert!(fit.evaluate(4.0).is_err());
        assert!((fit.evaluate(2.5).unwrap() - 2.5).abs() < 1e-12);
    }

    #[test]
    fn round_sphere_coefficients() {
        let m = KahlerModel::fubini_study_with_level(1, 1.0, 20).unwrap();
        let tyz = tyz_coefficients(&m, &DEFAULT_KS, 3).unwrap();
        for node in 0..tyz.a(0).len() {
            assert!((tyz.a(0)[node] - 1.0).abs() < 1e-9);
            assert!((tyz.a(1)[node] - 1.0).abs() < 1e-9);
            assert!(tyz.a(2)[node].abs() < 1e-7);
            assert!(tyz.laplacians[1][node].abs() < 1e-8);
        }
    }
}

//! Verb dispatch: builds the model of a config, runs the computation and
//! collects checks and data tables.

use std::path::Path;

use nalgebra::DMatrix;
use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde_json::{Map, Value};

use crate::asymptotics::{identity_chain_from, tyz_coefficients, IDENTITY_CHAIN_TERMS};
use crate::charforms::{node_curvature, td2_recombined, z_density, z_integral_check, CurvatureScalars};
use crate::config::{resolve_function, ExperimentConfig, ModelKind, Verb};
use crate::error::{Error, Result};
use crate::flow::{round_profile_deviation, run_flow};
use crate::model::{factorial, KahlerModel};
use crate::quantization::{bergman_density, gram, kostant_souriau, section_basis, tuynman_residual};
use crate::report::{number, Check, Comparison, Report, Table};

/// A report plus named data files.
#[derive(Debug, Clone)]
pub struct RunOutput {
    pub report: Report,
    pub artifacts: Vec<(String, String)>,
}

impl RunOutput {
    /// Writes `report.json` and the artifacts into `dir`.
    pub fn write(&self, dir: &Path) -> Result<()> {
        let io = |e: std::io::Error| Error::Io(format!("{}: {e}", dir.display()));
        std::fs::create_dir_all(dir).map_err(io)?;
        std::fs::write(dir.join("report.json"), self.report.to_json_string()).map_err(io)?;
        for (name, content) in &self.artifacts {
            std::fs::write(dir.join(name), content).map_err(io)?;
        }
        Ok(())
    }
}

fn node_columns(model: &KahlerModel) -> Vec<String> {
    (0..model.complex_dimension).map(|i| format!("t{i}")).collect()
}

fn node_table(model: &KahlerModel, extra: &[String]) -> Table {
    let mut cols = node_columns(model);
    cols.extend(extra.iter().cloned());
    Table {
        columns: cols,
        rows: Vec::new(),
    }
}

fn node_row(model: &KahlerModel, r: usize, values: &[f64]) -> Vec<f64> {
    let mut row = model.quadrature.radial[r].t.clone();
    row.extend_from_slice(values);
    row
}

/// True for the unperturbed Fubini–Study model of the config.
fn is_fubini_study(config: &ExperimentConfig) -> bool {
    config.model.kind.unwrap_or_default() == ModelKind::FubiniStudy && config.model.perturbation.is_none()
}

/// Runs the verb of a config whose defaults have been filled in.
pub fn run(config: &ExperimentConfig) -> Result<RunOutput> {
    let verb = config
        .verb
        .ok_or_else(|| Error::Config("no verb given".into()))?;
    let model = config.build_model()?;
    let mut report = Report::new(config.hash(), verb.name(), &model.label);
    report.push(Check::new(
        "volume",
        model.volume(),
        model.volume_normalization,
        Comparison::Relative,
        1e-10,
    ));
    let artifacts = match verb {
        Verb::Curvature => curvature(config, &model, &mut report)?,
        Verb::Zcritical => zcritical(config, &model, &mut report)?,
        Verb::Bergman => bergman(config, &model, &mut report)?,
        Verb::Tuynman => tuynman(config, &model, &mut report)?,
        Verb::Variation => variation(config, &model, &mut report)?,
        Verb::TyzFit => tyz_fit(config, &model, &mut report)?,
        Verb::Flow => flow(config, &model, &mut report)?,
    };
    Ok(RunOutput { report, artifacts })
}

fn curvature(config: &ExperimentConfig, model: &KahlerModel, report: &mut Report) -> Result<Vec<(String, String)>> {
    let nodes = node_curvature(model)?;
    let mut table = node_table(
        model,
        &["scalar", "norm_r_sq", "norm_ric_sq", "delta_scalar"].map(String::from),
    );
    for (r, (c, ds)) in nodes.iter().enumerate() {
        table.push(node_row(model, r, &[c.scalar, c.norm_r_sq, c.norm_ric_sq, *ds]));
    }
    let scalars: Vec<f64> = nodes.iter().map(|(c, _)| c.scalar).collect();
    report.value("scalar_min", scalars.iter().cloned().fold(f64::INFINITY, f64::min));
    report.value("scalar_max", scalars.iter().cloned().fold(f64::NEG_INFINITY, f64::max));
    report.value("total_scalar", model.integrate_real(&scalars)?);
    if is_fubini_study(config) {
        let n = model.complex_dimension;
        let c0 = 1.0 / config.model.scale.unwrap_or(1.0);
        let mut defect: f64 = 0.0;
        for (c, _) in &nodes {
            for i in 0..n {
                for j in 0..n {
                    for k in 0..n {
                        for l in 0..n {
                            let expect = (c.g[(i, j)] * c.g[(k, l)] + c.g[(i, l)] * c.g[(k, j)]) * c0;
                            defect = defect.max((c.r(i, j, k, l) - expect).norm());
                        }
                    }
                }
            }
        }
        report.push(Check::below("symmetric_space", defect, config.tolerance.unwrap_or(1e-10)));
        let s0 = (n * (n + 1)) as f64 * c0;
        let dev = scalars.iter().map(|s| (s - s0).abs()).fold(0.0, f64::max);
        report.push(Check::below("scalar_constant", dev, 1e-10 * s0));
    }
    Ok(vec![("curvature.csv".into(), table.to_csv())])
}

fn zcritical(config: &ExperimentConfig, model: &KahlerModel, report: &mut Report) -> Result<Vec<(String, String)>> {
    let j = config.j.unwrap_or(2);
    let d = z_integral_check(model, j)?;
    report.push(Check::new(
        format!("z_integral[j={j}]"),
        d.integral,
        d.topological_value,
        Comparison::Absolute,
        config.tolerance.unwrap_or(1e-6),
    ));
    if model.complex_dimension == 2 {
        let mut dev: f64 = 0.0;
        for (c, ds) in node_curvature(model)? {
            let s = CurvatureScalars::from_data(&c, ds);
            dev = dev.max((td2_recombined(&s)? - z_density(&s, 2)?).abs());
        }
        report.push(Check::below("td2_recombination", dev, 1e-12));
    }
    let mut table = node_table(model, &["t_tilde", "ell_tilde", "z_tilde"].map(String::from));
    for r in 0..d.z_tilde.len() {
        table.push(node_row(model, r, &[d.t_tilde[r], d.ell_tilde[r], d.z_tilde[r]]));
    }
    Ok(vec![(format!("zcritical_j{j}.csv"), table.to_csv())])
}

fn random_mixing(d: usize, seed: u64) -> DMatrix<Complex64> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    // diagonally dominant, hence invertible and well conditioned
    DMatrix::from_fn(d, d, |i, j| {
        let z = Complex64::new(rng.gen_range(-0.5..0.5), rng.gen_range(-0.5..0.5)) / d as f64;
        if i == j {
            z + 1.0
        } else {
            z
        }
    })
}

fn bergman(config: &ExperimentConfig, model: &KahlerModel, report: &mut Report) -> Result<Vec<(String, String)>> {
    let ks = config.ks.clone().unwrap_or_default();
    let n = model.complex_dimension;
    let mut columns: Vec<String> = Vec::new();
    let mut densities: Vec<Vec<f64>> = Vec::new();
    for &k in &ks {
        let basis = section_basis(model, k)?;
        let g = gram(model, &basis)?;
        let rho = bergman_density(model, &basis, &g)?;
        let dim = basis.dimension() as f64;
        report.push(Check::new(
            format!("dimension[k={k}]"),
            dim,
            basis.expected_dimension() as f64,
            Comparison::Absolute,
            0.0,
        ));
        report.push(Check::new(
            format!("density_integral[k={k}]"),
            model.integrate(&rho)?.re,
            dim,
            Comparison::Relative,
            1e-10,
        ));
        if is_fubini_study(config) {
            let d = basis.blocks[0].class as f64;
            let oracle = |e: &[u32]| {
                d.powi(n as i32) * e.iter().map(|&a| factorial(a as usize)).product::<f64>()
                    / factorial(k as usize * d as usize + n)
            };
            let dev = (0..basis.dimension())
                .map(|a| {
                    let o = oracle(&basis.exponents[a]);
                    ((g.matrix[(a, a)].re - o) / o).abs()
                })
                .fold(0.0, f64::max);
            report.push(Check::below(format!("gram_beta[k={k}]"), dev, 1e-10));
            if n == 1 {
                let target = dim / model.volume_normalization;
                let dev = rho.values.iter().map(|v| (v.re - target).abs()).fold(0.0, f64::max);
                report.push(Check::below(format!("density_constant[k={k}]"), dev, config.tolerance.unwrap_or(1e-10)));
            }
        }
        columns.push(format!("rho_k{k}"));
        densities.push(rho.real_parts());
    }
    if let Some(&k) = ks.iter().min() {
        let basis = section_basis(model, k)?;
        let g = gram(model, &basis)?;
        let rho = model.to_full(&bergman_density(model, &basis, &g)?)?;
        let mixed = basis.clone().with_mixing(random_mixing(basis.dimension(), config.seed.unwrap_or(0)))?;
        let gm = gram(model, &mixed)?;
        let rho_m = bergman_density(model, &mixed, &gm)?;
        let dev = rho
            .values
            .iter()
            .zip(&rho_m.values)
            .map(|(a, b)| (a - b).norm() / a.norm())
            .fold(0.0, f64::max);
        report.push(Check::below(format!("basis_change[k={k}]"), dev, 1e-9));
    }
    let mut table = node_table(model, &columns);
    for r in 0..model.quadrature.radial_len() {
        let vals: Vec<f64> = densities.iter().map(|d| d[r]).collect();
        table.push(node_row(model, r, &vals));
    }
    Ok(vec![("bergman.csv".into(), table.to_csv())])
}

fn tuynman(config: &ExperimentConfig, model: &KahlerModel, report: &mut Report) -> Result<Vec<(String, String)>> {
    let specs = config.functions.clone().unwrap_or_default();
    let fs = specs
        .iter()
        .map(|s| resolve_function(model, s))
        .collect::<Result<Vec<_>>>()?;
    let mut table = Table::new(&["k", "function", "residual", "skew_hermitian_defect"]);
    for &k in config.ks.as_deref().unwrap_or_default() {
        let basis = section_basis(model, k)?;
        let g = gram(model, &basis)?;
        for (i, f) in fs.iter().enumerate() {
            let residual = tuynman_residual(model, &basis, &g, f.as_ref())?;
            let skew = kostant_souriau(model, &basis, &g, f.as_ref())?.skew_hermitian_defect();
            report.push(Check::below(
                format!("tuynman[k={k},f={i}]"),
                residual,
                config.tolerance.unwrap_or(1e-8),
            ));
            report.push(Check::below(format!("skew_hermitian[k={k},f={i}]"), skew, 1e-12));
            table.push(vec![k as f64, i as f64, residual, skew]);
        }
    }
    Ok(vec![("tuynman.csv".into(), table.to_csv())])
}

fn variation(config: &ExperimentConfig, model: &KahlerModel, report: &mut Report) -> Result<Vec<(String, String)>> {
    let bump = resolve_function(model, config.bump.as_ref().expect("defaults filled"))?;
    let h = config.step.unwrap_or(1e-4);
    let mut table = Table::new(&["k", "h", "finite_difference", "predicted", "residual"]);
    for &k in config.ks.as_deref().unwrap_or_default() {
        for step in [h, 2.0 * h] {
            let r = crate::quantization::donaldson_variation_residual(model, k, bump.clone(), step)?;
            table.push(vec![k as f64, step, r.finite_difference, r.predicted, r.residual]);
            if step == h {
                report.push(Check::below(
                    format!("donaldson_variation[k={k}]"),
                    r.residual,
                    config.tolerance.unwrap_or(1e-5),
                ));
            }
        }
    }
    Ok(vec![("variation.csv".into(), table.to_csv())])
}

fn tyz_fit(config: &ExperimentConfig, model: &KahlerModel, report: &mut Report) -> Result<Vec<(String, String)>> {
    let ks = config.ks.clone().unwrap_or_default();
    let tyz = tyz_coefficients(model, &ks, IDENTITY_CHAIN_TERMS)?;
    let (s, _) = crate::curvature::scalar_and_laplacian_field(model);
    let e0 = tyz.a(0).iter().map(|a| (a - 1.0).abs()).fold(0.0, f64::max);
    let e1 = tyz.a(1).iter().zip(&s).map(|(a, s)| (a - s / 2.0).abs()).fold(0.0, f64::max);
    report.push(Check::below("tyz_a0", e0, 1e-3));
    report.push(Check::below("tyz_a1", e1, 1e-2));
    report.value("max_fit_condition", tyz.max_condition);
    let mut cols: Vec<String> = (0..IDENTITY_CHAIN_TERMS).map(|j| format!("a{j}")).collect();
    cols.push("half_scalar".into());
    let chain = if model.complex_dimension >= 2 {
        let c = identity_chain_from(model, &tyz)?;
        report.push(Check::below(
            "identity_chain",
            c.max_relative_deviation,
            config.tolerance.unwrap_or(0.05),
        ));
        cols.push("a2_minus_laplacian_a1".into());
        cols.push("closed_form".into());
        Some(c)
    } else {
        None
    };
    let mut table = node_table(model, &cols);
    for r in 0..s.len() {
        let mut vals: Vec<f64> = (0..IDENTITY_CHAIN_TERMS).map(|j| tyz.a(j)[r]).collect();
        vals.push(s[r] / 2.0);
        if let Some(c) = &chain {
            vals.push(c.fitted[r]);
            vals.push(c.closed_form[r]);
        }
        table.push(node_row(model, r, &vals));
    }
    Ok(vec![("tyz.csv".into(), table.to_csv())])
}

fn flow(config: &ExperimentConfig, model: &KahlerModel, report: &mut Report) -> Result<Vec<(String, String)>> {
    let j = config.j.unwrap_or(1);
    let params = config.flow_params();
    let run = run_flow(model, j, params)?;
    let last = run.last();
    report.push(Check::below("flow_converged", last.max_deviation, params.tol));
    report.push(Check::boolean("flow_monotone", run.energy_monotone()));
    let (z_drift, vol_drift) = run.invariant_drift();
    report.push(Check::below("flow_invariants", z_drift.max(vol_drift), 1e-8));
    if model.complex_dimension == 1 {
        report.push(Check::below(
            "flow_round_profile",
            round_profile_deviation(&run.final_model)?,
            config.tolerance.unwrap_or(1e-3),
        ));
    }
    report.value("final_time", last.time);
    report.value("final_energy", last.energy);
    report.value("accepted_steps", (run.trajectory.len() - 1) as f64);
    report.value("rejected_steps", run.rejected_steps as f64);
    let mut table = Table::new(&["time", "energy", "max_deviation", "dt"]);
    for s in &run.trajectory {
        table.push(vec![s.time, s.energy, s.max_deviation, s.dt]);
    }
    let mut potential = Map::new();
    potential.insert("gauge".into(), number(last.gauge));
    let mut coeffs = Map::new();
    for (label, c) in run.basis.labels.iter().zip(&last.coefficients) {
        coeffs.insert(label.clone(), number(*c));
    }
    potential.insert("coefficients".into(), Value::Object(coeffs));
    let mut json = serde_json::to_string_pretty(&Value::Object(potential)).expect("serializes");
    json.push('\n');
    Ok(vec![
        ("trajectory.csv".into(), table.to_csv()),
        ("final_potential.json".into(), json),
    ])
}

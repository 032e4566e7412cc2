//! Experiment configuration: a flat TOML document with one `[model]` table.

use std::path::{Path, PathBuf};
use std::sync::Arc;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{Error, Result};
use crate::flow::{flow_basis, FlowParams};
use crate::functions::{sphere_profile, Field, Height, MomentPolynomial, Product, RadialBump, SphereX};
use crate::model::{FactorKind, KahlerModel};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Verb {
    Curvature,
    Zcritical,
    Bergman,
    Tuynman,
    Variation,
    TyzFit,
    Flow,
}

impl Verb {
    pub fn name(self) -> &'static str {
        match self {
            Verb::Curvature => "curvature",
            Verb::Zcritical => "zcritical",
            Verb::Bergman => "bergman",
            Verb::Tuynman => "tuynman",
            Verb::Variation => "variation",
            Verb::TyzFit => "tyz-fit",
            Verb::Flow => "flow",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "kebab-case")]
pub enum ModelKind {
    #[default]
    FubiniStudy,
    /// `S¹`-invariant ℂP¹ with profile `log(1+t) + Σ c_i t/(1+t)^{i+2}`.
    U1Sphere,
    /// ℂP¹ × ℂP¹ with Fubini–Study factors of classes `scale`, `scale2`.
    Cp1Squared,
    FlatPolydisc,
}

/// A function given by name or by coefficients in the model's flow basis.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum FunctionSpec {
    Preset(String),
    Coefficients(Vec<f64>),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, Default)]
#[serde(deny_unknown_fields)]
pub struct ModelSpec {
    pub kind: Option<ModelKind>,
    pub n: Option<usize>,
    pub scale: Option<f64>,
    pub scale2: Option<f64>,
    pub level: Option<usize>,
    pub angular: Option<usize>,
    pub profile: Option<Vec<f64>>,
    pub perturbation: Option<FunctionSpec>,
    pub epsilon: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, Default)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub verb: Option<Verb>,
    #[serde(default)]
    pub model: ModelSpec,
    pub ks: Option<Vec<u32>>,
    pub j: Option<usize>,
    /// Test symbols / Hamiltonians.
    pub functions: Option<Vec<FunctionSpec>>,
    /// Variation direction `δφ`.
    pub bump: Option<FunctionSpec>,
    /// Finite-difference step.
    pub step: Option<f64>,
    /// Overrides the primary check tolerance of the verb.
    pub tolerance: Option<f64>,
    /// Not part of the config hash: moving outputs does not change results.
    #[serde(skip_serializing)]
    pub out: Option<PathBuf>,
    pub seed: Option<u64>,
    pub dt0: Option<f64>,
    pub t_max: Option<f64>,
    pub flow_tol: Option<f64>,
    pub basis_size: Option<usize>,
}

impl ExperimentConfig {
    pub fn parse(text: &str) -> Result<ExperimentConfig> {
        toml::from_str(text).map_err(|e| Error::Config(e.to_string()))
    }

    pub fn load(path: &Path) -> Result<ExperimentConfig> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| Error::Io(format!("{}: {e}", path.display())))?;
        ExperimentConfig::parse(&text).map_err(|e| match e {
            Error::Config(m) => Error::Config(format!("{}: {m}", path.display())),
            other => other,
        })
    }

    /// Config with the verb's defaults filled in.
    pub fn for_verb(verb: Verb) -> ExperimentConfig {
        let mut c = ExperimentConfig {
            verb: Some(verb),
            ..Default::default()
        };
        c.fill_defaults();
        c
    }

    /// Fills unset fields with the defaults of the configured verb.
    pub fn fill_defaults(&mut self) {
        let verb = self.verb.unwrap_or(Verb::Curvature);
        let m = &mut self.model;
        if m.kind.is_none() {
            if verb == Verb::Flow && m.perturbation.is_none() {
                m.kind = Some(ModelKind::U1Sphere);
                m.profile.get_or_insert_with(|| vec![0.1]);
            } else {
                m.kind = Some(ModelKind::FubiniStudy);
            }
        }
        let kind = m.kind.expect("set above");
        let default_n = match verb {
            Verb::Curvature | Verb::Zcritical => 2,
            _ => 1,
        };
        if kind == ModelKind::FubiniStudy || kind == ModelKind::FlatPolydisc {
            m.n.get_or_insert(default_n);
        }
        m.scale.get_or_insert(1.0);
        m.level.get_or_insert(match verb {
            Verb::Curvature => 16,
            Verb::Zcritical => 32,
            Verb::Flow => 64,
            Verb::TyzFit if m.n == Some(2) => 20,
            _ => 24,
        });
        if kind == ModelKind::Cp1Squared {
            m.scale2.get_or_insert(m.scale.unwrap_or(1.0));
        }
        self.ks.get_or_insert_with(|| match verb {
            Verb::Bergman => vec![4, 8, 16, 32],
            Verb::Tuynman => vec![8],
            Verb::Variation => vec![8],
            _ => crate::asymptotics::DEFAULT_KS.to_vec(),
        });
        self.j.get_or_insert(match verb {
            Verb::Flow => 1,
            _ => 2,
        });
        self.functions.get_or_insert_with(|| {
            ["height", "sphere-x", "bump"]
                .iter()
                .map(|s| FunctionSpec::Preset(s.to_string()))
                .collect()
        });
        self.bump.get_or_insert(FunctionSpec::Preset("bump".into()));
        self.step.get_or_insert(1e-4);
        self.seed.get_or_insert(0);
        let d = FlowParams::default();
        self.dt0.get_or_insert(d.dt0);
        self.t_max.get_or_insert(d.t_max);
        self.flow_tol.get_or_insert(d.tol);
        self.basis_size.get_or_insert(d.basis_size);
    }

    /// SHA-256 of the canonical JSON form of the config.
    pub fn hash(&self) -> String {
        let canonical = serde_json::to_string(self).expect("config serializes");
        let digest = Sha256::digest(canonical.as_bytes());
        digest.iter().map(|b| format!("{b:02x}")).collect()
    }

    pub fn flow_params(&self) -> FlowParams {
        FlowParams {
            dt0: self.dt0.unwrap_or(1e-3),
            t_max: self.t_max.unwrap_or(10.0),
            tol: self.flow_tol.unwrap_or(1e-4),
            basis_size: self.basis_size.unwrap_or(4),
            ..FlowParams::default()
        }
    }

    pub fn build_model(&self) -> Result<KahlerModel> {
        let m = &self.model;
        let level = m.level.unwrap_or(crate::model::DEFAULT_LEVEL);
        let scale = m.scale.unwrap_or(1.0);
        let base = match m.kind.unwrap_or_default() {
            ModelKind::FubiniStudy => KahlerModel::fubini_study_with_level(m.n.unwrap_or(1), scale, level)?,
            ModelKind::U1Sphere => {
                let coeffs = m.profile.clone().unwrap_or_default();
                KahlerModel::u1_sphere_with_level(sphere_profile(&coeffs), level)?
            }
            ModelKind::Cp1Squared => {
                let a = KahlerModel::fubini_study_with_level(1, scale, level)?;
                let b = KahlerModel::fubini_study_with_level(1, m.scale2.unwrap_or(scale), level)?;
                KahlerModel::product(&a, &b)?
            }
            ModelKind::FlatPolydisc => KahlerModel::flat_polydisc(m.n.unwrap_or(1), level)?,
        };
        let base = match m.angular {
            Some(a) => base.with_quadrature(level, a)?,
            None => base,
        };
        match (&m.perturbation, m.epsilon) {
            (Some(p), Some(eps)) => base.perturb(resolve_function(&base, p)?, eps),
            (Some(_), None) => Err(Error::Config("model.perturbation needs model.epsilon".into())),
            (None, Some(_)) => Err(Error::Config("model.epsilon needs model.perturbation".into())),
            (None, None) => Ok(base),
        }
    }
}

/// The standard torus-invariant bump of a model.
pub fn default_bump(model: &KahlerModel) -> Result<Field> {
    let mut parts: Vec<Field> = Vec::new();
    for f in &model.factors {
        if f.kind != FactorKind::Projective {
            return Err(Error::Config("the bump preset needs projective factors".into()));
        }
        parts.push(if f.dim == 1 {
            Arc::new(RadialBump { coord: f.offset, m: 2 })
        } else {
            let mut e1 = vec![0; f.dim];
            e1[0] = 1;
            e1[1] = 1;
            let mut e2 = vec![0; f.dim];
            e2[0] = 2;
            Arc::new(MomentPolynomial {
                coords: f.offset..f.offset + f.dim,
                terms: vec![(1.0, e1), (0.5, e2)],
            })
        });
    }
    Ok(parts
        .into_iter()
        .reduce(|a, b| Arc::new(Product(a, b)) as Field)
        .expect("at least one factor"))
}

pub fn resolve_function(model: &KahlerModel, spec: &FunctionSpec) -> Result<Field> {
    match spec {
        FunctionSpec::Preset(name) => match name.as_str() {
            "bump" => default_bump(model),
            "height" | "sphere-x" if model.complex_dimension != 1 => Err(Error::Config(format!(
                "preset '{name}' is only smooth on ℂP¹"
            ))),
            "height" => Ok(Arc::new(Height { coord: 0 })),
            "sphere-x" => Ok(Arc::new(SphereX { coord: 0 })),
            "constant" => Ok(crate::functions::constant(1.0)),
            other => Err(Error::Config(format!(
                "unknown function preset '{other}' (expected bump, height, sphere-x, constant)"
            ))),
        },
        FunctionSpec::Coefficients(c) => {
            if c.is_empty() {
                return Err(Error::Config("empty coefficient list".into()));
            }
            let basis = flow_basis(model, c.len()).map_err(|e| Error::Config(e.to_string()))?;
            let mut padded = c.clone();
            padded.resize(basis.len(), 0.0);
            Ok(basis.combination(&padded))
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn unknown_keys_are_rejected() {
        let e = ExperimentConfig::parse("verb = \"tuynman\"\nfoo = 1\n").unwrap_err();
        assert!(matches!(e, Error::Config(m) if m.contains("foo")));
        let e = ExperimentConfig::parse("[model]\nkind = \"fubini-study\"\nlevle = 3\n").unwrap_err();
        assert!(matches!(e, Error::Config(m) if m.contains("levle")));
    }

    #[test]
    fn hash_tracks_content() {
        let a = ExperimentConfig::for_verb(Verb::Tuynman);
        let mut b = a.clone();
        assert_eq!(a.hash(), b.hash());
        b.model.level = Some(30);
        assert_ne!(a.hash(), b.hash());
    }

    #[test]
    fn builds_models() {
        let c = ExperimentConfig::parse(
            "verb = \"bergman\"\n[model]\nkind = \"u1-sphere\"\nprofile = [0.1]\nlevel = 8\n",
        )
        .unwrap();
        assert_eq!(c.build_model().unwrap().complex_dimension, 1);
        let c = ExperimentConfig::parse(
            "[model]\nkind = \"cp1-squared\"\nlevel = 4\nperturbation = [0.1, 0.0]\nepsilon = 0.5\n",
        )
        .unwrap();
        assert_eq!(c.build_model().unwrap().complex_dimension, 2);
        let c = ExperimentConfig::parse("[model]\nn = 2\nlevel = 4\nperturbation = \"height\"\nepsilon = 0.1\n").unwrap();
        assert!(matches!(c.build_model(), Err(Error::Config(_))));
    }
}

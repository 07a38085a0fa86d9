//! Query templates: loading and validation, per-dialect rendering, and
//! dataset-driven parameter generation.
//!
//! A template file is either a YAML list of entries
//!
//! ```yaml
//! - name: countActiveCrossingsInPeriod
//!   use: true
//!   type: temporal
//!   postgis: |
//!     SELECT COUNT(DISTINCT c.crossing_id) FROM crossing_points c
//!     WHERE c.timestamp BETWEEN :period_medium;
//!   repetition: 50
//!   parameters:
//!     - period_medium
//! ```
//!
//! or a mapping with `templates` holding that list, plus optional `params`
//! (parameter name to kind) and `dialects` (dialect id to literal encoding)
//! sections. Every entry key other than the reserved ones is a dialect id.

pub mod catalog;
pub mod params;
pub mod render;

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use serde_yaml::Value as Yaml;

use crate::datagen::Scenario;
pub use catalog::{BoundArgs, CanonicalCall, Catalog, CatalogEntry, Output, Primitive};
pub use params::{generate_param_sets, ParamDecl, ParamKind, ParamSet, ParamValue};
pub use render::{scan_placeholders, DialectEncoding, PeriodStyle};

/// Dialect id routed to the reference store's canonical executor.
pub const CANONICAL_DIALECT: &str = "canonical";
pub const DEFAULT_REPETITION: u32 = 50;

const RESERVED_KEYS: [&str; 6] = ["name", "use", "type", "repetition", "parameters", "params"];

#[derive(Debug, thiserror::Error)]
pub enum TemplateError {
    #[error("cannot read {path}: {source}")]
    Io { path: PathBuf, source: std::io::Error },
    #[error("template file is not valid YAML: {0}")]
    Yaml(String),
    #[error("template file: {0}")]
    Format(String),
    #[error("template `{template}`: {message}")]
    Invalid { template: String, message: String },
    #[error("duplicate template name `{0}`")]
    Duplicate(String),
    #[error("template `{template}`, dialect `{dialect}`: placeholder `:{param}` is not a declared parameter")]
    UnknownPlaceholder { template: String, dialect: String, param: String },
    #[error("template `{template}`: parameter `{param}` is not used by any dialect text")]
    UnusedParameter { template: String, param: String },
    #[error("unknown template `{0}`")]
    UnknownTemplate(String),
    #[error("template `{template}` has no text for dialect `{dialect}`")]
    MissingDialect { template: String, dialect: String },
    #[error("template `{template}`: no value for parameter `{param}`")]
    MissingValue { template: String, param: String },
    #[error("template `{template}`: {message}")]
    Generation { template: String, message: String },
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Category {
    Temporal,
    Spatial,
    Spatiotemporal,
}

impl FromStr for Category {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "temporal" => Ok(Category::Temporal),
            "spatial" => Ok(Category::Spatial),
            "spatiotemporal" => Ok(Category::Spatiotemporal),
            _ => Err(format!("unknown query type `{s}`")),
        }
    }
}

impl fmt::Display for Category {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Category::Temporal => "temporal",
            Category::Spatial => "spatial",
            Category::Spatiotemporal => "spatiotemporal",
        })
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct QueryTemplate {
    pub name: String,
    pub enabled: bool,
    pub category: Category,
    pub dialect_texts: BTreeMap<String, String>,
    /// Number of parameter sets drawn for this template.
    pub repetition: u32,
    pub parameters: Vec<ParamDecl>,
    /// Parsed `canonical` dialect text, when present.
    pub canonical: Option<CanonicalCall>,
}

impl QueryTemplate {
    pub fn param_kind(&self, name: &str) -> Option<ParamKind> {
        self.parameters.iter().find(|p| p.name == name).map(|p| p.kind)
    }

    pub fn canonical_id(&self) -> Option<&str> {
        self.canonical.as_ref().map(|c| c.id.as_str())
    }
}

/// One (template, parameter set) pair of a workload.
#[derive(Clone, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct QueryInstance {
    pub template: String,
    pub param_set: u32,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub canonical_id: Option<String>,
}

impl QueryInstance {
    pub fn key(&self) -> String {
        format!("{}#{}", self.template, self.param_set)
    }
}

#[derive(Clone, Debug, Default)]
pub struct TemplateRegistry {
    templates: Vec<QueryTemplate>,
    encodings: BTreeMap<String, DialectEncoding>,
    catalog: Catalog,
}

fn yaml_str<'a>(v: &'a Yaml, template: &str, key: &str) -> Result<&'a str, TemplateError> {
    v.as_str().ok_or_else(|| TemplateError::Invalid {
        template: template.to_string(),
        message: format!("`{key}` must be a string"),
    })
}

fn kind_map(v: &Yaml, owner: &str) -> Result<BTreeMap<String, ParamKind>, TemplateError> {
    let invalid = |message: String| TemplateError::Invalid { template: owner.to_string(), message };
    let map = v.as_mapping().ok_or_else(|| invalid("`params` must map parameter names to kinds".into()))?;
    let mut out = BTreeMap::new();
    for (k, v) in map {
        let name = k.as_str().ok_or_else(|| invalid("parameter names must be strings".into()))?;
        let kind = v.as_str().ok_or_else(|| invalid(format!("kind of `{name}` must be a string")))?;
        out.insert(name.to_string(), kind.parse::<ParamKind>().map_err(|e| invalid(format!("`{name}`: {e}")))?);
    }
    Ok(out)
}

fn is_param_name(s: &str) -> bool {
    s.starts_with(|c: char| c.is_ascii_lowercase() || c == '_')
        && s.chars().all(|c| c.is_ascii_lowercase() || c.is_ascii_digit() || c == '_')
}

impl TemplateRegistry {
    pub fn load(path: &Path) -> Result<Self, TemplateError> {
        let text = std::fs::read_to_string(path).map_err(|source| TemplateError::Io { path: path.to_path_buf(), source })?;
        Self::parse(&text)
    }

    pub fn parse(text: &str) -> Result<Self, TemplateError> {
        Self::parse_with_catalog(text, Catalog::builtin())
    }

    /// The built-in template set for a scenario.
    pub fn builtin(scenario: Scenario) -> Self {
        let text = match scenario {
            Scenario::Aviation => include_str!("../../data/templates/aviation.yaml"),
            Scenario::Cycling => include_str!("../../data/templates/cycling.yaml"),
            Scenario::Ais => include_str!("../../data/templates/ais.yaml"),
        };
        Self::parse(text).expect("built-in templates are valid")
    }

    pub fn parse_with_catalog(text: &str, catalog: Catalog) -> Result<Self, TemplateError> {
        let doc: Yaml = serde_yaml::from_str(text).map_err(|e| TemplateError::Yaml(e.to_string()))?;
        let mut registry = TemplateRegistry { catalog, ..Default::default() };
        let mut global_kinds = BTreeMap::new();
        let entries = match doc {
            Yaml::Null => return Ok(registry),
            Yaml::Sequence(seq) => seq,
            Yaml::Mapping(map) => {
                let mut entries = Vec::new();
                for (k, v) in map {
                    match k.as_str() {
                        Some("templates") => match v {
                            Yaml::Sequence(seq) => entries = seq,
                            Yaml::Null => {}
                            _ => return Err(TemplateError::Format("`templates` must be a list".into())),
                        },
                        Some("params") => global_kinds = kind_map(&v, "params")?,
                        Some("dialects") => {
                            registry.encodings = serde_yaml::from_value(v)
                                .map_err(|e| TemplateError::Format(format!("`dialects`: {e}")))?
                        }
                        other => {
                            return Err(TemplateError::Format(format!("unknown top-level key `{}`", other.unwrap_or("?"))))
                        }
                    }
                }
                entries
            }
            _ => return Err(TemplateError::Format("expected a list of templates".into())),
        };
        for (idx, entry) in entries.iter().enumerate() {
            let template = registry.parse_entry(idx, entry, &global_kinds)?;
            if registry.templates.iter().any(|t| t.name == template.name) {
                return Err(TemplateError::Duplicate(template.name));
            }
            registry.templates.push(template);
        }
        Ok(registry)
    }

    fn parse_entry(
        &self,
        idx: usize,
        entry: &Yaml,
        global_kinds: &BTreeMap<String, ParamKind>,
    ) -> Result<QueryTemplate, TemplateError> {
        let map = entry
            .as_mapping()
            .ok_or_else(|| TemplateError::Format(format!("entry {} is not a mapping", idx + 1)))?;
        let name = map
            .get("name")
            .and_then(Yaml::as_str)
            .ok_or_else(|| TemplateError::Format(format!("entry {} has no `name`", idx + 1)))?
            .to_string();
        let invalid = |message: String| TemplateError::Invalid { template: name.clone(), message };

        let enabled = match map.get("use") {
            None => true,
            Some(v) => v.as_bool().ok_or_else(|| invalid("`use` must be true or false".into()))?,
        };
        let category: Category = yaml_str(
            map.get("type").ok_or_else(|| invalid("missing `type`".into()))?,
            &name,
            "type",
        )?
        .parse()
        .map_err(invalid)?;
        let repetition = match map.get("repetition") {
            None => DEFAULT_REPETITION,
            Some(v) => v
                .as_u64()
                .filter(|&r| r >= 1 && r <= u32::MAX as u64)
                .ok_or_else(|| invalid("`repetition` must be a positive integer".into()))? as u32,
        };
        let local_kinds = match map.get("params") {
            Some(v) => kind_map(v, &name)?,
            None => BTreeMap::new(),
        };
        let mut parameters = Vec::new();
        match map.get("parameters") {
            None | Some(Yaml::Null) => {}
            Some(Yaml::Sequence(seq)) => {
                for p in seq {
                    let pname = yaml_str(p, &name, "parameters")?;
                    if !is_param_name(pname) {
                        return Err(invalid(format!("invalid parameter name `{pname}`")));
                    }
                    if parameters.iter().any(|d: &ParamDecl| d.name == pname) {
                        return Err(invalid(format!("parameter `{pname}` declared twice")));
                    }
                    let kind = match local_kinds.get(pname).or_else(|| global_kinds.get(pname)) {
                        Some(k) => *k,
                        None => pname
                            .parse()
                            .map_err(|_| invalid(format!("parameter `{pname}` has no kind; bind it under `params`")))?,
                    };
                    parameters.push(ParamDecl { name: pname.to_string(), kind });
                }
            }
            Some(_) => return Err(invalid("`parameters` must be a list of names".into())),
        }

        let mut dialect_texts = BTreeMap::new();
        for (k, v) in map {
            let key = k.as_str().ok_or_else(|| invalid("keys must be strings".into()))?;
            if RESERVED_KEYS.contains(&key) {
                continue;
            }
            dialect_texts.insert(key.to_string(), yaml_str(v, &name, key)?.to_string());
        }

        let mut used = BTreeSet::new();
        for (dialect, text) in &dialect_texts {
            for ph in scan_placeholders(text) {
                if !parameters.iter().any(|p| p.name == ph.name) {
                    return Err(TemplateError::UnknownPlaceholder {
                        template: name.clone(),
                        dialect: dialect.clone(),
                        param: ph.name,
                    });
                }
                used.insert(ph.name);
            }
        }
        if let Some(unused) = parameters.iter().find(|p| !used.contains(&p.name)) {
            return Err(TemplateError::UnusedParameter { template: name.clone(), param: unused.name.clone() });
        }

        let mut template =
            QueryTemplate { name: name.clone(), enabled, category, dialect_texts, repetition, parameters, canonical: None };
        if let Some(text) = template.dialect_texts.get(CANONICAL_DIALECT) {
            let call: CanonicalCall = text.parse().map_err(invalid)?;
            let entry = self
                .catalog
                .get(&call.id)
                .ok_or_else(|| invalid(format!("unknown canonical query `{}`", call.id)))?;
            call.resolve(entry, |p| template.param_kind(p)).map_err(invalid)?;
            template.canonical = Some(call);
        }
        Ok(template)
    }

    pub fn templates(&self) -> &[QueryTemplate] {
        &self.templates
    }

    pub fn enabled(&self) -> impl Iterator<Item = &QueryTemplate> {
        self.templates.iter().filter(|t| t.enabled)
    }

    pub fn get(&self, name: &str) -> Option<&QueryTemplate> {
        self.templates.iter().find(|t| t.name == name)
    }

    pub fn is_empty(&self) -> bool {
        self.templates.is_empty()
    }

    pub fn len(&self) -> usize {
        self.templates.len()
    }

    pub fn catalog(&self) -> &Catalog {
        &self.catalog
    }

    pub fn encoding(&self, dialect: &str) -> DialectEncoding {
        self.encodings.get(dialect).copied().unwrap_or_default()
    }

    /// Text of `template` for `dialect` with every placeholder replaced.
    pub fn render(&self, template: &str, dialect: &str, ps: &ParamSet) -> Result<String, TemplateError> {
        let t = self.get(template).ok_or_else(|| TemplateError::UnknownTemplate(template.to_string()))?;
        let text = t.dialect_texts.get(dialect).ok_or_else(|| TemplateError::MissingDialect {
            template: template.to_string(),
            dialect: dialect.to_string(),
        })?;
        render::substitute(template, text, ps, &self.encoding(dialect))
    }

    /// Catalog entry and bound arguments for a canonical execution.
    pub fn bind_canonical(&self, template: &str, ps: &ParamSet) -> Result<(&CatalogEntry, BoundArgs), TemplateError> {
        let t = self.get(template).ok_or_else(|| TemplateError::UnknownTemplate(template.to_string()))?;
        let call = t.canonical.as_ref().ok_or_else(|| TemplateError::MissingDialect {
            template: template.to_string(),
            dialect: CANONICAL_DIALECT.to_string(),
        })?;
        let entry = self.catalog.get(&call.id).expect("validated at load");
        let args = call
            .bind(entry, ps)
            .map_err(|message| TemplateError::Invalid { template: template.to_string(), message })?;
        Ok((entry, args))
    }
}

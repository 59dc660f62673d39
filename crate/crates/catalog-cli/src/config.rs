use std::collections::BTreeMap;
use std::path::Path;

use centralizer::Region;
use geometry_flow::{DomainChart, Vector, VectorField};
use ini::Ini;

use crate::catalog::{catalog_get, CatalogEntry, Tags};
use crate::CliError;

/// Field selection from a config file.
#[derive(Debug, Clone, PartialEq)]
pub enum FieldSpec {
    Builtin(String),
    Polynomial { name: String, domain: DomainChart, terms: Vec<Vec<(f64, Vec<u32>)>> },
}

/// Parsed config: `[field]`, `[domain]` and `[params]` sections of `key = value` lines.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct Config {
    pub field: Option<FieldSpec>,
    pub params: BTreeMap<String, String>,
}

pub fn parse_list(s: &str) -> Result<Vec<f64>, CliError> {
    s.split(',')
        .map(|t| t.trim().parse::<f64>().map_err(|_| CliError::Config(format!("not a number: {t:?}"))))
        .collect()
}

fn domain_from(section: &ini::Properties) -> Result<DomainChart, CliError> {
    let get = |k: &str| section.get(k).ok_or_else(|| CliError::Config(format!("[domain] needs {k}")));
    let num = |k: &str| -> Result<f64, CliError> {
        get(k)?.trim().parse().map_err(|_| CliError::Config(format!("[domain] {k} is not a number")))
    };
    let radius = num("radius")?;
    let d = match get("kind")?.trim() {
        "torus" => DomainChart::torus(parse_list(get("periods")?)?, radius),
        "box" => DomainChart::boxed(parse_list(get("lower")?)?, parse_list(get("upper")?)?, radius),
        "annulus" => DomainChart::annulus(num("inner")?, num("outer")?, radius),
        k => return Err(CliError::Config(format!("unknown domain kind {k:?}"))),
    };
    d.map_err(|e| CliError::Config(e.to_string()))
}

/// `coef:e1,…,ed` terms separated by whitespace.
fn parse_component(s: &str, d: usize) -> Result<Vec<(f64, Vec<u32>)>, CliError> {
    s.split_whitespace()
        .map(|term| {
            let (c, e) =
                term.split_once(':').ok_or_else(|| CliError::Config(format!("term {term:?} needs coef:exponents")))?;
            let coef = c.parse::<f64>().map_err(|_| CliError::Config(format!("bad coefficient in {term:?}")))?;
            let exps = e
                .split(',')
                .map(|k| k.trim().parse::<u32>().map_err(|_| CliError::Config(format!("bad exponent in {term:?}"))))
                .collect::<Result<Vec<_>, _>>()?;
            if exps.len() != d {
                return Err(CliError::Config(format!("term {term:?} needs {d} exponents")));
            }
            Ok((coef, exps))
        })
        .collect()
}

impl Config {
    pub fn parse(text: &str) -> Result<Self, CliError> {
        let ini = Ini::load_from_str(text).map_err(|e| CliError::Config(e.to_string()))?;
        let mut cfg = Config::default();
        if let Some(params) = ini.section(Some("params")) {
            cfg.params = params.iter().map(|(k, v)| (k.to_string(), v.trim().to_string())).collect();
        }
        if let Some(field) = ini.section(Some("field")) {
            if let Some(b) = field.get("builtin") {
                cfg.field = Some(FieldSpec::Builtin(b.trim().to_string()));
            } else {
                let domain = domain_from(
                    ini.section(Some("domain"))
                        .ok_or_else(|| CliError::Config("polynomial field needs [domain]".into()))?,
                )?;
                let d = domain.dim();
                let terms = (1..=d)
                    .map(|i| {
                        let key = format!("x{i}");
                        parse_component(field.get(&key).unwrap_or(""), d)
                    })
                    .collect::<Result<_, _>>()?;
                let name = field.get("name").unwrap_or("polynomial").trim().to_string();
                cfg.field = Some(FieldSpec::Polynomial { name, domain, terms });
            }
        }
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self, CliError> {
        Self::parse(&std::fs::read_to_string(path)?)
    }

    /// Resolves the field: an explicit catalog name wins over the config.
    pub fn entry(&self, catalog: Option<&str>) -> Result<CatalogEntry, CliError> {
        if let Some(name) = catalog {
            return catalog_get(name);
        }
        match &self.field {
            Some(FieldSpec::Builtin(name)) => catalog_get(name),
            Some(FieldSpec::Polynomial { name, domain, terms }) => {
                let x = VectorField::polynomial(name.clone(), domain.clone(), terms.clone())?;
                Ok(custom_entry(x))
            }
            None => Err(CliError::Usage("select a field with --catalog or a config [field] section".into())),
        }
    }
}

/// Entry for a user field: no companion, no tags, grids from the domain.
pub fn custom_entry(x: VectorField) -> CatalogEntry {
    let grid = x.domain().sample_grid(10);
    let base_point = grid
        .iter()
        .find(|p| !x.is_singular_at(p) && x.domain().contains(p))
        .cloned()
        .unwrap_or_else(|| Vector::zeros(x.dim()));
    CatalogEntry {
        name: x.name().to_string(),
        params: Vec::new(),
        certify_samples: x.domain().sample_grid(4),
        x,
        y: None,
        invariant: None,
        base: None,
        provenance: "user config".into(),
        tags: Tags { separating: None, commuting: false, collinear: false, singular_fibers: false },
        base_point,
        grid,
        singular_set: Vec::new(),
        region: Region::Domain,
    }
}

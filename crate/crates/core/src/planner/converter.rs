use std::collections::BTreeSet;
use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Catalog entry for a VSC converter module.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ConverterModule {
    pub id: String,
    pub rating_mva: f64,
    /// Usable only in back-to-back installations.
    #[serde(default)]
    pub b2b_only: bool,
    /// Percent per km.
    pub loss_k: f64,
    /// Percent.
    pub loss_d: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub max_line_km: Option<f64>,
}

impl ConverterModule {
    fn eligible(&self, is_b2b: bool, length_km: f64) -> bool {
        (!self.b2b_only || is_b2b) && self.max_line_km.map_or(true, |max| length_km <= max)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ConverterChoice {
    pub module: ConverterModule,
    pub module_count: u32,
}

impl ConverterChoice {
    pub fn installed_mva(&self) -> f64 {
        self.module.rating_mva * f64::from(self.module_count)
    }
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct CatalogFile {
    modules: Vec<ConverterModule>,
}

fn validate_catalog(modules: &[ConverterModule]) -> Result<()> {
    if modules.is_empty() {
        return Err(Error::validation("converter catalog is empty"));
    }
    let mut ids = BTreeSet::new();
    for m in modules {
        if !ids.insert(m.id.as_str()) {
            return Err(Error::validation(format!("duplicate converter id {}", m.id)));
        }
        if !(m.rating_mva > 0.0 && m.rating_mva.is_finite()) {
            return Err(Error::validation(format!("converter {}: rating_mva must be positive", m.id)));
        }
        if !(m.loss_d > 0.0 && m.loss_k >= 0.0) {
            return Err(Error::validation(format!("converter {}: require loss_d > 0 and loss_k >= 0", m.id)));
        }
    }
    Ok(())
}

pub fn parse_catalog(text: &str, origin: &Path) -> Result<Vec<ConverterModule>> {
    let file: CatalogFile =
        serde_json::from_str(text).map_err(|source| Error::Parse { path: origin.to_path_buf(), source })?;
    validate_catalog(&file.modules)?;
    Ok(file.modules)
}

pub fn load_catalog(path: impl AsRef<Path>) -> Result<Vec<ConverterModule>> {
    let path = path.as_ref();
    let text = fs::read_to_string(path).map_err(|source| Error::Io { path: path.to_path_buf(), source })?;
    parse_catalog(&text, path)
}

/// The bundled placeholder catalog: nine modules, the first three
/// back-to-back only.
pub fn default_catalog() -> Vec<ConverterModule> {
    parse_catalog(include_str!("../../data/catalog.json"), Path::new("data/catalog.json"))
        .expect("bundled catalog is valid")
}

/// Picks the smallest eligible module covering `target_mva`, or parallel
/// copies of the largest eligible module when none is big enough. Ties go
/// to the earlier catalog entry.
pub fn select_converter(
    target_mva: f64,
    is_b2b: bool,
    length_km: f64,
    catalog: &[ConverterModule],
) -> Result<ConverterChoice> {
    let eligible: Vec<&ConverterModule> = catalog.iter().filter(|m| m.eligible(is_b2b, length_km)).collect();
    let sufficient = eligible
        .iter()
        .filter(|m| m.rating_mva >= target_mva)
        .fold(None::<&&ConverterModule>, |best, m| match best {
            Some(b) if b.rating_mva <= m.rating_mva => Some(b),
            _ => Some(m),
        });
    if let Some(module) = sufficient {
        return Ok(ConverterChoice { module: (*module).clone(), module_count: 1 });
    }
    let largest = eligible.iter().fold(None::<&&ConverterModule>, |best, m| match best {
        Some(b) if b.rating_mva >= m.rating_mva => Some(b),
        _ => Some(m),
    });
    match largest {
        Some(module) => {
            let count = (target_mva / module.rating_mva).ceil().max(1.0) as u32;
            Ok(ConverterChoice { module: (*module).clone(), module_count: count })
        }
        None => Err(Error::Planning(format!(
            "no eligible converter module for {} at {length_km} km",
            if is_b2b { "a back-to-back installation" } else { "a line" }
        ))),
    }
}

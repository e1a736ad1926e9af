//! Scenario files: TOML mirroring the source, collection and compensator
//! blocks, plus the presets shipped with the binary.

use std::path::{Path, PathBuf};
use std::sync::Arc;

use serde::{Deserialize, Serialize};
use spdc_core::source::{Collection, SourceSetup};
use spdc_core::temporal::{Filter, FilterShape, Filters, PumpKind, PumpSpec};
use spdc_core::{CrystalPlate, Material, MaterialDb, Orientation, PlateRole};

use crate::CliError;

/// Largest allowed gap (nm) between a stated idler wavelength and the one
/// fixed by energy conservation.
pub const IDLER_TOLERANCE_NM: f64 = 2.0;

pub const PRESETS: &[(&str, &str)] = &[
    ("ultrafast-bbo", include_str!("../presets/ultrafast-bbo.toml")),
    ("diode-bibo-degenerate", include_str!("../presets/diode-bibo-degenerate.toml")),
    ("diode-bibo-nondegenerate", include_str!("../presets/diode-bibo-nondegenerate.toml")),
];

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScenarioConfig {
    /// Materials database; relative paths are taken from the config file.
    #[serde(default)]
    pub materials: Option<PathBuf>,
    pub source: SourceBlock,
    pub collection: CollectionBlock,
    #[serde(default)]
    pub compensators: Vec<PlateBlock>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SourceBlock {
    pub lambda_s_nm: f64,
    #[serde(default)]
    pub lambda_i_nm: Option<f64>,
    #[serde(default)]
    pub emission_azimuth_deg: f64,
    pub pump: PumpBlock,
    pub crystals: Vec<CrystalBlock>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PumpBlock {
    pub center_nm: f64,
    pub fwhm_nm: f64,
    pub kind: PumpKind,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CrystalBlock {
    pub material: String,
    pub theta_deg: f64,
    pub phi_deg: f64,
    pub thickness_mm: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CollectionBlock {
    pub iris_distance_mm: f64,
    pub iris_diameters_mm: Vec<f64>,
    /// Omit for unfiltered detection.
    #[serde(default)]
    pub filter_fwhm_nm: Option<f64>,
    #[serde(default = "default_shape")]
    pub filter_shape: FilterShape,
}

fn default_shape() -> FilterShape {
    FilterShape::Gaussian
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PlateBlock {
    pub role: PlateRole,
    pub material: String,
    pub theta_deg: f64,
    pub phi_deg: f64,
    pub thickness_mm: Thickness,
    #[serde(default = "default_orientation")]
    pub orientation: Orientation,
}

fn default_orientation() -> Orientation {
    Orientation::AsCut
}

/// A fixed thickness or the literal string `"design"`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Thickness {
    Fixed(f64),
    Design,
}

impl Serialize for Thickness {
    fn serialize<S: serde::Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        match self {
            Thickness::Fixed(v) => s.serialize_f64(*v),
            Thickness::Design => s.serialize_str("design"),
        }
    }
}

impl<'de> Deserialize<'de> for Thickness {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        #[derive(Deserialize)]
        #[serde(untagged)]
        enum Raw {
            Num(f64),
            Int(i64),
            Text(String),
        }
        match Raw::deserialize(d)? {
            Raw::Num(v) => Ok(Thickness::Fixed(v)),
            Raw::Int(v) => Ok(Thickness::Fixed(v as f64)),
            Raw::Text(t) if t == "design" => Ok(Thickness::Design),
            Raw::Text(t) => Err(serde::de::Error::custom(format!(
                "thickness must be a number or \"design\", got \"{t}\""
            ))),
        }
    }
}

impl ScenarioConfig {
    pub fn parse(text: &str) -> Result<ScenarioConfig, CliError> {
        toml::from_str(text).map_err(|e| CliError::Config(e.to_string()))
    }

    pub fn load(path: &Path) -> Result<ScenarioConfig, CliError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| CliError::Config(format!("{}: {e}", path.display())))?;
        let mut cfg = ScenarioConfig::parse(&text)?;
        if let (Some(m), Some(dir)) = (&cfg.materials, path.parent()) {
            if m.is_relative() {
                cfg.materials = Some(dir.join(m));
            }
        }
        Ok(cfg)
    }

    pub fn preset(name: &str) -> Result<ScenarioConfig, CliError> {
        let text = PRESETS
            .iter()
            .find(|(n, _)| n.eq_ignore_ascii_case(name))
            .map(|(_, t)| *t)
            .ok_or_else(|| {
                let names: Vec<&str> = PRESETS.iter().map(|(n, _)| *n).collect();
                CliError::Usage(format!("unknown preset '{name}'; available: {}", names.join(", ")))
            })?;
        ScenarioConfig::parse(text)
    }

    pub fn has_placeholders(&self) -> bool {
        self.compensators.iter().any(|c| c.thickness_mm == Thickness::Design)
    }

    /// Builds the source with every fixed plate installed. Placeholders are
    /// returned separately as unit-thickness templates.
    pub fn build(&self, db: &MaterialDb) -> Result<Scenario, CliError> {
        let s = &self.source;
        let [c1, c2] = s.crystals.as_slice() else {
            return Err(CliError::Config(format!(
                "source.crystals must list exactly two crystals, found {}",
                s.crystals.len()
            )));
        };
        if c1 != c2 {
            return Err(CliError::Config(
                "the two downconversion crystals must share material, cut and thickness".into(),
            ));
        }
        let material = |name: &str| -> Result<Arc<Material>, CliError> { Ok(Arc::new(db.get::<f64>(name).map_err(CliError::Input)?)) };
        let pump = PumpSpec::from_fwhm_nm(s.pump.center_nm, s.pump.fwhm_nm, s.pump.kind).map_err(CliError::Input)?;
        let crystal1 = CrystalPlate::new(
            material(&c1.material)?,
            c1.theta_deg.to_radians(),
            c1.phi_deg.to_radians(),
            c1.thickness_mm,
            PlateRole::DcCrystal1,
            Orientation::AsCut,
        )
        .map_err(CliError::Input)?;
        let col = &self.collection;
        if col.iris_diameters_mm.iter().any(|d| !(*d > 0.0)) {
            return Err(CliError::Config("iris diameters must be positive".into()));
        }
        let filters = match col.filter_fwhm_nm {
            Some(fwhm) if fwhm > 0.0 => Filters::both(Filter { fwhm_nm: fwhm, shape: col.filter_shape }),
            Some(fwhm) => return Err(CliError::Config(format!("filter FWHM {fwhm} nm must be positive"))),
            None => Filters::none(),
        };
        let collection = Collection {
            iris_distance_mm: col.iris_distance_mm,
            iris_diameters_mm: col.iris_diameters_mm.clone(),
            filters,
        };
        let mut fixed = Vec::new();
        let mut placeholders = Vec::new();
        for p in &self.compensators {
            if matches!(p.role, PlateRole::DcCrystal1 | PlateRole::DcCrystal2) {
                return Err(CliError::Config("compensators may not use a downconversion crystal role".into()));
            }
            let thickness = match p.thickness_mm {
                Thickness::Fixed(t) => t,
                Thickness::Design => 1.0,
            };
            let plate = CrystalPlate::new(
                material(&p.material)?,
                p.theta_deg.to_radians(),
                p.phi_deg.to_radians(),
                thickness,
                p.role,
                p.orientation,
            )
            .map_err(CliError::Input)?;
            match p.thickness_mm {
                Thickness::Fixed(_) => fixed.push(plate),
                Thickness::Design => placeholders.push(plate),
            }
        }
        let setup = SourceSetup::new(
            crystal1,
            s.lambda_s_nm,
            s.emission_azimuth_deg.to_radians(),
            pump,
            collection,
            fixed,
        )
        .map_err(CliError::Input)?;
        if let Some(li) = s.lambda_i_nm {
            let expected = setup.triplet.lambda_i;
            if (li - expected).abs() > IDLER_TOLERANCE_NM {
                return Err(CliError::Config(format!(
                    "lambda_i_nm = {li} violates energy conservation; {} nm pumping {} nm signal gives {expected:.3} nm",
                    s.pump.center_nm, s.lambda_s_nm
                )));
            }
        }
        for p in &placeholders {
            if setup.plate(p.role).is_some() {
                return Err(CliError::Config(format!("{:?} is listed twice", p.role)));
            }
        }
        Ok(Scenario { setup, placeholders })
    }
}

/// A built scenario: fixed plates installed, placeholders pending design.
#[derive(Debug, Clone)]
pub struct Scenario {
    pub setup: SourceSetup,
    pub placeholders: Vec<CrystalPlate>,
}

/// Materials database from an explicit path, the config, or the builtin set.
pub fn materials(flag: Option<&Path>, cfg: Option<&ScenarioConfig>) -> Result<MaterialDb, CliError> {
    let path = flag.map(Path::to_path_buf).or_else(|| cfg.and_then(|c| c.materials.clone()));
    match path {
        Some(p) => Ok(MaterialDb::load(&p).map_err(|e| CliError::Config(e.to_string()))?),
        None => Ok(MaterialDb::builtin()),
    }
}

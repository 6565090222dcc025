//! JSON problem configuration. Every physical quantity carries its unit:
//! `{"value": 2.4, "unit": "nm"}`. Unknown units are rejected while parsing,
//! so errors point at the offending line.

use std::fmt;
use std::marker::PhantomData;
use std::path::{Path, PathBuf};

use serde::de::{self, Deserializer};
use serde::Deserialize;

use crate::admissibility::JOULES_PER_EV;
use crate::error::{Error, Result};
use crate::field::{make_annular_characteristic, read_field_csv, Distribution, Field};
use crate::mesh::Mesh;
use crate::nlep::SolverOptions;

pub trait Dimension {
    const NAME: &'static str;
    /// Accepted unit spellings and the factor converting to internal units.
    const UNITS: &'static [(&'static str, f64)];
}

macro_rules! dimension {
    ($name:ident, $label:expr, [$(($unit:expr, $factor:expr)),* $(,)?]) => {
        #[derive(Debug, Clone, Copy, PartialEq)]
        pub struct $name;
        impl Dimension for $name {
            const NAME: &'static str = $label;
            const UNITS: &'static [(&'static str, f64)] = &[$(($unit, $factor)),*];
        }
    };
}

dimension!(Length, "length", [("nm", 1.0), ("m", 1e9)]);
dimension!(Area, "area", [("nm^2", 1.0), ("m^2", 1e18)]);
dimension!(Energy, "energy", [("eV", 1.0), ("J", 1.0 / JOULES_PER_EV)]);
// q and λ² share a scale; a bare "eV" q height is read on that scale.
dimension!(EnergySquared, "squared energy", [("eV^2", 1.0), ("eV", 1.0)]);
dimension!(
    Gamma,
    "hbar^2/2m",
    [
        ("eV^2 nm^2", 1.0),
        ("eV nm^2", 1.0),
        ("J m^2", 1e18 / JOULES_PER_EV),
        ("(J.s)^2/kg", 1e18 / JOULES_PER_EV),
    ]
);

/// A number with a validated unit, stored in internal units.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Quantity<D> {
    pub raw: f64,
    pub unit: &'static str,
    pub value: f64,
    _dim: PhantomData<D>,
}

impl<D: Dimension> Quantity<D> {
    pub fn internal(value: f64) -> Self {
        Self { raw: value, unit: D::UNITS[0].0, value, _dim: PhantomData }
    }
}

impl<D: Dimension> fmt::Display for Quantity<D> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{} {}", self.raw, self.unit)
    }
}

impl<'de, D: Dimension> Deserialize<'de> for Quantity<D> {
    fn deserialize<De: Deserializer<'de>>(deserializer: De) -> std::result::Result<Self, De::Error> {
        struct Visitor<D>(PhantomData<D>);

        impl<'de, D: Dimension> de::Visitor<'de> for Visitor<D> {
            type Value = Quantity<D>;

            fn expecting(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
                write!(f, "a {} quantity {{\"value\": <number>, \"unit\": \"{}\"}}", D::NAME, D::UNITS[0].0)
            }

            fn visit_map<A: de::MapAccess<'de>>(self, mut map: A) -> std::result::Result<Self::Value, A::Error> {
                let (mut value, mut unit): (Option<f64>, Option<String>) = (None, None);
                while let Some(key) = map.next_key::<String>()? {
                    match key.as_str() {
                        "value" => value = Some(map.next_value()?),
                        "unit" => unit = Some(map.next_value()?),
                        other => return Err(de::Error::unknown_field(other, &["value", "unit"])),
                    }
                }
                let value = value.ok_or_else(|| de::Error::missing_field("value"))?;
                let unit = unit.ok_or_else(|| de::Error::missing_field("unit"))?;
                let Some(&(name, factor)) = D::UNITS.iter().find(|(u, _)| *u == unit.trim()) else {
                    let known: Vec<_> = D::UNITS.iter().map(|u| u.0).collect();
                    return Err(de::Error::custom(format!(
                        "unit {unit:?} is not a {} unit (expected one of {known:?})",
                        D::NAME
                    )));
                };
                if !value.is_finite() {
                    return Err(de::Error::custom("quantity must be finite"));
                }
                Ok(Quantity { raw: value, unit: name, value: value * factor, _dim: PhantomData })
            }
        }

        deserializer.deserialize_map(Visitor(PhantomData))
    }
}

#[derive(Debug, Clone, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum MeshConfig {
    DiskRadial { radius: Quantity<Length>, n: usize },
    DiskPolar { radius: Quantity<Length>, n_r: usize, n_t: usize },
    Rectangle { a: Quantity<Length>, b: Quantity<Length>, nx: usize, ny: usize },
}

impl MeshConfig {
    /// Builds the mesh; `resolution` replaces the radial count (disk) or both
    /// counts scaled proportionally (rectangle).
    pub fn build(&self, resolution: Option<usize>) -> Result<Mesh> {
        match *self {
            MeshConfig::DiskRadial { radius, n } => Mesh::disk_radial(radius.value, resolution.unwrap_or(n)),
            MeshConfig::DiskPolar { radius, n_r, n_t } => {
                Mesh::disk_polar(radius.value, resolution.unwrap_or(n_r), n_t)
            }
            MeshConfig::Rectangle { a, b, nx, ny } => {
                let (nx, ny) = match resolution {
                    Some(r) => (r, ((r * ny) as f64 / nx as f64).round().max(1.0) as usize),
                    None => (nx, ny),
                };
                Mesh::rectangle(a.value, b.value, nx, ny)
            }
        }
    }
}

#[derive(Debug, Clone, Deserialize)]
#[serde(rename_all = "snake_case", deny_unknown_fields, bound(deserialize = "D: Dimension"))]
pub enum FieldConfig<D> {
    Zero,
    Constant { value: Quantity<D> },
    /// Height on `inner < r ≤ outer`.
    Annulus { height: Quantity<D>, inner: Quantity<Length>, outer: Quantity<Length> },
    Csv { path: PathBuf },
}

impl<D: Dimension> FieldConfig<D> {
    pub fn build(&self, mesh: &Mesh, base: &Path) -> Result<Field> {
        match self {
            FieldConfig::Zero => Ok(Field::zeros(mesh.len())),
            FieldConfig::Constant { value } => Ok(Field::constant(mesh.len(), value.value)),
            FieldConfig::Annulus { height, inner, outer } => {
                make_annular_characteristic(mesh, height.value, inner.value, outer.value)
            }
            FieldConfig::Csv { path } => read_field_csv(mesh, &base.join(path)),
        }
    }
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields, bound(deserialize = "D: Dimension"))]
pub struct LevelConfig<D> {
    pub value: Quantity<D>,
    pub measure: Quantity<Area>,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Tolerances {
    #[serde(default = "default_eig_tol")]
    pub eig_tol: f64,
    #[serde(default = "default_root_tol")]
    pub root_tol: f64,
    #[serde(default = "default_opt_tol")]
    pub opt_tol: f64,
}

fn default_eig_tol() -> f64 {
    SolverOptions::default().eig_tol
}
fn default_root_tol() -> f64 {
    SolverOptions::default().root_tol
}
fn default_opt_tol() -> f64 {
    1e-10
}

impl Default for Tolerances {
    fn default() -> Self {
        Self { eig_tol: default_eig_tol(), root_tol: default_root_tol(), opt_tol: default_opt_tol() }
    }
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Config {
    pub mesh: MeshConfig,
    pub gamma: Quantity<Gamma>,
    #[serde(default)]
    pub p: Option<FieldConfig<Energy>>,
    #[serde(default)]
    pub q: Option<FieldConfig<EnergySquared>>,
    /// Nonzero levels of the p₀ class; the rest of the domain is zero.
    #[serde(default)]
    pub p_dist: Option<Vec<LevelConfig<Energy>>>,
    #[serde(default)]
    pub q_dist: Option<Vec<LevelConfig<EnergySquared>>>,
    #[serde(default)]
    pub tolerances: Tolerances,
    #[serde(default)]
    pub max_iters: Option<usize>,
    #[serde(default)]
    pub start: Option<String>,
    #[serde(default)]
    pub seed: Option<u64>,
    /// Directory relative paths are resolved against.
    #[serde(skip)]
    pub base_dir: PathBuf,
}

impl Config {
    pub fn from_str(text: &str, base_dir: &Path) -> Result<Self> {
        let mut cfg: Config = serde_json::from_str(text).map_err(|e| Error::Config(e.to_string()))?;
        cfg.base_dir = base_dir.to_path_buf();
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| Error::Config(format!("{}: {e}", path.display())))?;
        let base = path.parent().unwrap_or(Path::new("."));
        Self::from_str(&text, base).map_err(|e| match e {
            Error::Config(msg) => Error::Config(format!("{}: {msg}", path.display())),
            other => other,
        })
    }

    pub fn solver_options(&self) -> SolverOptions {
        SolverOptions {
            gamma: self.gamma.value,
            eig_tol: self.tolerances.eig_tol,
            root_tol: self.tolerances.root_tol,
            ..SolverOptions::default()
        }
    }

    pub fn p_field(&self, mesh: &Mesh) -> Result<Field> {
        match &self.p {
            Some(f) => f.build(mesh, &self.base_dir),
            None => Err(Error::Config("missing \"p\" field".into())),
        }
    }

    pub fn q_field(&self, mesh: &Mesh) -> Result<Field> {
        match &self.q {
            Some(f) => f.build(mesh, &self.base_dir),
            None => Err(Error::Config("missing \"q\" field".into())),
        }
    }

    /// Class of p₀ from `p_dist`, or from the distribution of `p` if only the
    /// field is given.
    pub fn p_distribution(&self, mesh: &Mesh) -> Result<Distribution> {
        match (&self.p_dist, &self.p) {
            (Some(levels), _) => levels_to_distribution(levels, mesh),
            (None, Some(_)) => crate::field::distribution_of(mesh, &self.p_field(mesh)?),
            (None, None) => Err(Error::Config("need \"p_dist\" or \"p\"".into())),
        }
    }

    pub fn q_distribution(&self, mesh: &Mesh) -> Result<Distribution> {
        match (&self.q_dist, &self.q) {
            (Some(levels), _) => levels_to_distribution(levels, mesh),
            (None, Some(_)) => crate::field::distribution_of(mesh, &self.q_field(mesh)?),
            (None, None) => Err(Error::Config("need \"q_dist\" or \"q\"".into())),
        }
    }
}

fn levels_to_distribution<D: Dimension>(levels: &[LevelConfig<D>], mesh: &Mesh) -> Result<Distribution> {
    let area: f64 = mesh.measures().iter().sum();
    let pairs: Vec<(f64, f64)> = levels.iter().map(|l| (l.value.value, l.measure.value)).collect();
    if pairs.iter().any(|(v, _)| *v < 0.0) {
        return Err(Error::Config("distribution levels must be nonnegative".into()));
    }
    Distribution::with_zero_remainder(&pairs, area).map_err(|e| Error::Config(e.to_string()))
}

//! Unit registry with dimensional analysis over the seven SI base
//! dimensions.

use std::collections::BTreeMap;
use std::fmt;

use serde::{Deserialize, Serialize};
use thiserror::Error;

pub const BASE_DIMENSIONS: [&str; 7] = [
    "mass",
    "length",
    "time",
    "temperature",
    "amount",
    "current",
    "luminosity",
];

#[derive(Debug, Clone, PartialEq, Error)]
pub enum UnitError {
    #[error("unknown unit `{0}`")]
    UnknownUnit(String),
    #[error("invalid unit definition `{symbol}`: {reason}")]
    InvalidDefinition { symbol: String, reason: String },
    #[error("malformed unit extension file: {0}")]
    Syntax(String),
}

/// Exponents of mass, length, time, temperature, amount, current and
/// luminosity.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default, PartialOrd, Ord)]
pub struct Dimension(pub [i8; 7]);

impl Dimension {
    pub const NONE: Dimension = Dimension([0; 7]);

    pub const fn new(m: i8, l: i8, t: i8, temp: i8, n: i8, i: i8, j: i8) -> Self {
        Dimension([m, l, t, temp, n, i, j])
    }
}

impl fmt::Display for Dimension {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let parts: Vec<String> = BASE_DIMENSIONS
            .iter()
            .zip(self.0)
            .filter(|(_, e)| *e != 0)
            .map(|(name, e)| {
                if e == 1 {
                    name.to_string()
                } else {
                    format!("{name}^{e}")
                }
            })
            .collect();
        if parts.is_empty() {
            f.write_str("dimensionless")
        } else {
            f.write_str(&parts.join("·"))
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct UnitDef {
    pub dimension: Dimension,
    pub scale_to_base: f64,
    pub affine_offset: f64,
}

impl UnitDef {
    pub const fn linear(dimension: Dimension, scale_to_base: f64) -> Self {
        UnitDef {
            dimension,
            scale_to_base,
            affine_offset: 0.0,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum Conversion {
    /// Multiply a value in the source unit by this factor.
    Factor(f64),
    Incompatible(Incompatibility),
}

#[derive(Debug, Clone, PartialEq)]
pub enum Incompatibility {
    Dimension {
        from: Dimension,
        to: Dimension,
    },
    /// At least one side has an offset, which a scalar factor cannot carry.
    Affine,
}

impl fmt::Display for Incompatibility {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Incompatibility::Dimension { from, to } => {
                write!(f, "dimensions differ ({from} vs {to})")
            }
            Incompatibility::Affine => f.write_str("affine units need an offset, not a factor"),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct UnitRegistry {
    units: BTreeMap<String, UnitDef>,
}

const MASS_FLOW: Dimension = Dimension::new(1, 0, -1, 0, 0, 0, 0);
const POWER: Dimension = Dimension::new(1, 2, -3, 0, 0, 0, 0);
const ENERGY: Dimension = Dimension::new(1, 2, -2, 0, 0, 0, 0);
const PRESSURE: Dimension = Dimension::new(1, -1, -2, 0, 0, 0, 0);
const MOLAR_FLOW: Dimension = Dimension::new(0, 0, -1, 0, 1, 0, 0);
const VOLUME_FLOW: Dimension = Dimension::new(0, 3, -1, 0, 0, 0, 0);
const VOLTAGE: Dimension = Dimension::new(1, 2, -3, 0, 0, -1, 0);

const HOUR: f64 = 3600.0;

impl Default for UnitRegistry {
    fn default() -> Self {
        Self::builtin()
    }
}

impl UnitRegistry {
    pub fn empty() -> Self {
        UnitRegistry {
            units: BTreeMap::new(),
        }
    }

    /// Registry with the units commonly found on Power-to-X process ports.
    pub fn builtin() -> Self {
        let time = Dimension::new(0, 0, 1, 0, 0, 0, 0);
        let mass = Dimension::new(1, 0, 0, 0, 0, 0, 0);
        let length = Dimension::new(0, 1, 0, 0, 0, 0, 0);
        let temperature = Dimension::new(0, 0, 0, 1, 0, 0, 0);
        let amount = Dimension::new(0, 0, 0, 0, 1, 0, 0);
        let current = Dimension::new(0, 0, 0, 0, 0, 1, 0);
        let volume = Dimension::new(0, 3, 0, 0, 0, 0, 0);

        let linear: &[(&str, Dimension, f64)] = &[
            ("1", Dimension::NONE, 1.0),
            ("%", Dimension::NONE, 0.01),
            ("s", time, 1.0),
            ("min", time, 60.0),
            ("h", time, HOUR),
            ("kg", mass, 1.0),
            ("g", mass, 1e-3),
            ("t", mass, 1e3),
            ("m", length, 1.0),
            ("m3", volume, 1.0),
            ("L", volume, 1e-3),
            ("W", POWER, 1.0),
            ("kW", POWER, 1e3),
            ("MW", POWER, 1e6),
            ("J", ENERGY, 1.0),
            ("kJ", ENERGY, 1e3),
            ("MJ", ENERGY, 1e6),
            ("kWh", ENERGY, 3.6e6),
            ("kg/s", MASS_FLOW, 1.0),
            ("kg/h", MASS_FLOW, 1.0 / HOUR),
            ("g/s", MASS_FLOW, 1e-3),
            ("g/h", MASS_FLOW, 1e-3 / HOUR),
            ("t/h", MASS_FLOW, 1e3 / HOUR),
            ("mol", amount, 1.0),
            ("mol/s", MOLAR_FLOW, 1.0),
            ("mol/h", MOLAR_FLOW, 1.0 / HOUR),
            ("kmol/h", MOLAR_FLOW, 1e3 / HOUR),
            ("m3/s", VOLUME_FLOW, 1.0),
            ("m3/h", VOLUME_FLOW, 1.0 / HOUR),
            ("L/min", VOLUME_FLOW, 1e-3 / 60.0),
            ("K", temperature, 1.0),
            ("Pa", PRESSURE, 1.0),
            ("kPa", PRESSURE, 1e3),
            ("MPa", PRESSURE, 1e6),
            ("mbar", PRESSURE, 1e2),
            ("bar", PRESSURE, 1e5),
            ("A", current, 1.0),
            ("V", VOLTAGE, 1.0),
            ("kV", VOLTAGE, 1e3),
        ];
        let mut units: BTreeMap<String, UnitDef> = linear
            .iter()
            .map(|(symbol, dim, scale)| (symbol.to_string(), UnitDef::linear(*dim, *scale)))
            .collect();
        units.insert(
            "°C".into(),
            UnitDef {
                dimension: temperature,
                scale_to_base: 1.0,
                affine_offset: 273.15,
            },
        );
        UnitRegistry { units }
    }

    pub fn get(&self, symbol: &str) -> Option<&UnitDef> {
        self.units.get(symbol)
    }

    pub fn symbols(&self) -> impl Iterator<Item = &str> {
        self.units.keys().map(String::as_str)
    }

    pub fn len(&self) -> usize {
        self.units.len()
    }

    pub fn is_empty(&self) -> bool {
        self.units.is_empty()
    }

    /// Adds or replaces a unit.
    pub fn insert(&mut self, symbol: &str, def: UnitDef) -> Result<(), UnitError> {
        let invalid = |reason: &str| UnitError::InvalidDefinition {
            symbol: symbol.to_string(),
            reason: reason.to_string(),
        };
        if symbol.trim().is_empty() {
            return Err(invalid("empty symbol"));
        }
        if !(def.scale_to_base > 0.0 && def.scale_to_base.is_finite()) {
            return Err(invalid("scaleToBase must be a finite number > 0"));
        }
        if !def.affine_offset.is_finite() {
            return Err(invalid("affineOffset must be finite"));
        }
        self.units.insert(symbol.to_string(), def);
        Ok(())
    }

    /// Merges a JSON extension file over the current entries:
    ///
    /// ```json
    /// [{"symbol": "Nm3/h", "dimension": {"length": 3, "time": -1},
    ///   "scaleToBase": 0.000277778, "affineOffset": 0}]
    /// ```
    pub fn merge_extensions(&mut self, json: &str) -> Result<(), UnitError> {
        #[derive(Deserialize, Serialize)]
        #[serde(rename_all = "camelCase", deny_unknown_fields)]
        struct Entry {
            symbol: String,
            #[serde(default)]
            dimension: BTreeMap<String, i8>,
            scale_to_base: f64,
            #[serde(default)]
            affine_offset: f64,
        }
        let entries: Vec<Entry> =
            serde_json::from_str(json).map_err(|e| UnitError::Syntax(e.to_string()))?;
        for entry in entries {
            let mut exponents = [0i8; 7];
            for (name, exponent) in &entry.dimension {
                let index = BASE_DIMENSIONS
                    .iter()
                    .position(|d| d == name)
                    .ok_or_else(|| UnitError::InvalidDefinition {
                        symbol: entry.symbol.clone(),
                        reason: format!("unknown base dimension `{name}`"),
                    })?;
                exponents[index] = *exponent;
            }
            self.insert(
                &entry.symbol,
                UnitDef {
                    dimension: Dimension(exponents),
                    scale_to_base: entry.scale_to_base,
                    affine_offset: entry.affine_offset,
                },
            )?;
        }
        Ok(())
    }

    /// Factor converting values in `from` to values in `to`. Identical
    /// symbols convert with factor 1; otherwise both units must share a
    /// dimension and be purely multiplicative.
    pub fn conversion(&self, from: &str, to: &str) -> Result<Conversion, UnitError> {
        let source = self
            .get(from)
            .ok_or_else(|| UnitError::UnknownUnit(from.to_string()))?;
        let target = self
            .get(to)
            .ok_or_else(|| UnitError::UnknownUnit(to.to_string()))?;
        if from == to {
            return Ok(Conversion::Factor(1.0));
        }
        if source.dimension != target.dimension {
            return Ok(Conversion::Incompatible(Incompatibility::Dimension {
                from: source.dimension,
                to: target.dimension,
            }));
        }
        if source.affine_offset != 0.0 || target.affine_offset != 0.0 {
            return Ok(Conversion::Incompatible(Incompatibility::Affine));
        }
        Ok(Conversion::Factor(
            source.scale_to_base / target.scale_to_base,
        ))
    }
}

pub fn unit_conversion(
    registry: &UnitRegistry,
    from: &str,
    to: &str,
) -> Result<Conversion, UnitError> {
    registry.conversion(from, to)
}

use std::collections::HashSet;
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

macro_rules! token_enum {
    ($(#[$meta:meta])* $name:ident { $($variant:ident => $token:literal),+ $(,)? }) => {
        $(#[$meta])*
        #[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
        pub enum $name {
            $(#[serde(rename = $token)] $variant),+
        }

        impl $name {
            pub const ALL: &'static [$name] = &[$($name::$variant),+];

            pub fn as_str(self) -> &'static str {
                match self { $($name::$variant => $token),+ }
            }
        }

        impl FromStr for $name {
            type Err = String;

            fn from_str(s: &str) -> Result<Self, Self::Err> {
                match s {
                    $($token => Ok($name::$variant),)+
                    other => Err(format!(
                        concat!("unknown ", stringify!($name), " `{}`"), other
                    )),
                }
            }
        }

        impl fmt::Display for $name {
            fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
                f.write_str(self.as_str())
            }
        }
    };
}

token_enum!(
    /// Position of a model in the process-engineering level pyramid,
    /// from the molecular base up to the production system.
    LevelOfDetail {
        Molecular => "molecular",
        Phase => "phase",
        ProcessUnit => "processUnit",
        Plant => "plant",
        ProductionSystem => "productionSystem",
    }
);

token_enum!(
    DecisionLevel {
        Control => "Control",
        Scheduling => "Scheduling",
        Planning => "Planning",
    }
);

token_enum!(
    Direction {
        Input => "input",
        Output => "output",
    }
);

token_enum!(
    Datatype {
        Real => "real",
        Integer => "integer",
        Boolean => "boolean",
        String => "string",
    }
);

impl Datatype {
    /// Boolean and string ports carry no meaningful numeric range.
    pub fn is_numeric(self) -> bool {
        matches!(self, Datatype::Real | Datatype::Integer)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PortRange {
    pub min: f64,
    pub max: f64,
}

impl PortRange {
    /// Marker interval used by boolean and string ports.
    pub const MARKER: PortRange = PortRange { min: 0.0, max: 0.0 };

    pub fn new(min: f64, max: f64) -> Self {
        PortRange { min, max }
    }

    pub fn contains(&self, value: f64) -> bool {
        self.min <= value && value <= self.max
    }

    pub fn clamp(&self, value: f64) -> f64 {
        value.clamp(self.min, self.max)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct Port {
    pub name: String,
    pub direction: Direction,
    pub quantity: String,
    pub unit: String,
    pub range: PortRange,
    pub datatype: Datatype,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct SolverSpec {
    pub method: String,
    pub step_size: f64,
    pub tolerance: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Parameter {
    pub name: String,
    pub value: f64,
    pub unit: String,
}

/// Affine surrogate `outputs = a · inputs + b` in declared port units.
/// `a` has one row per output and one column per input.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SurrogateSpec {
    pub inputs: Vec<String>,
    pub outputs: Vec<String>,
    pub a: Vec<Vec<f64>>,
    pub b: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct SimulationModelDescriptor {
    pub model_id: String,
    pub owner_asset_id: String,
    pub storage_location: String,
    pub simulation_environment: String,
    pub solver: SolverSpec,
    pub parameters: Vec<Parameter>,
    pub ports: Vec<Port>,
    pub level_of_detail: LevelOfDetail,
    pub discipline: String,
    pub decision_level: DecisionLevel,
    pub computing_time: f64,
    pub accuracy: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub surrogate: Option<SurrogateSpec>,
}

impl SimulationModelDescriptor {
    pub fn port(&self, name: &str) -> Option<&Port> {
        self.ports.iter().find(|p| p.name == name)
    }

    pub fn ports_in(&self, direction: Direction) -> impl Iterator<Item = &Port> {
        self.ports.iter().filter(move |p| p.direction == direction)
    }

    /// Checks every descriptor invariant, returning a message for the first
    /// violation.
    pub fn check(&self) -> Result<(), String> {
        if self.model_id.is_empty()
            || self.model_id.contains(['#', '/'])
            || self.model_id.contains(char::is_whitespace)
        {
            return Err(format!(
                "model id `{}` must be non-empty without `#`, `/` or whitespace",
                self.model_id
            ));
        }
        if self.storage_location.is_empty() {
            return Err("storage location must be non-empty".into());
        }
        if !(self.solver.step_size > 0.0 && self.solver.step_size.is_finite()) {
            return Err(format!(
                "solver step size {} must be > 0",
                self.solver.step_size
            ));
        }
        if !(self.solver.tolerance > 0.0 && self.solver.tolerance.is_finite()) {
            return Err(format!(
                "solver tolerance {} must be > 0",
                self.solver.tolerance
            ));
        }
        if !(self.computing_time >= 0.0 && self.computing_time.is_finite()) {
            return Err(format!(
                "computing time {} must be >= 0",
                self.computing_time
            ));
        }
        if !(0.0..=1.0).contains(&self.accuracy) {
            return Err(format!("accuracy {} must lie in [0, 1]", self.accuracy));
        }
        if let Some(p) = self.parameters.iter().find(|p| !p.value.is_finite()) {
            return Err(format!("parameter `{}` is not finite", p.name));
        }
        if self.ports.is_empty() {
            return Err("model declares no ports".into());
        }
        let mut names = HashSet::new();
        for port in &self.ports {
            if port.name.is_empty() || port.name.contains(char::is_whitespace) {
                return Err(format!("invalid port name `{}`", port.name));
            }
            if !names.insert(port.name.as_str()) {
                return Err(format!("duplicate port name `{}`", port.name));
            }
            if port.unit.is_empty() {
                return Err(format!("port `{}`: empty unit", port.name));
            }
            if port.quantity.is_empty() {
                return Err(format!("port `{}`: empty quantity", port.name));
            }
            let PortRange { min, max } = port.range;
            if !(min.is_finite() && max.is_finite()) {
                return Err(format!("port `{}`: range bounds must be finite", port.name));
            }
            if min > max {
                return Err(format!("port `{}`: Min {min} exceeds Max {max}", port.name));
            }
        }
        if let Some(surrogate) = &self.surrogate {
            self.check_surrogate(surrogate)?;
        }
        Ok(())
    }

    fn check_surrogate(&self, s: &SurrogateSpec) -> Result<(), String> {
        let mut seen = HashSet::new();
        for (names, direction) in [
            (&s.inputs, Direction::Input),
            (&s.outputs, Direction::Output),
        ] {
            for name in names {
                if !seen.insert(name.as_str()) {
                    return Err(format!("surrogate references port `{name}` twice"));
                }
                match self.port(name) {
                    Some(port) if port.direction == direction => {}
                    Some(_) => {
                        return Err(format!(
                            "surrogate {} `{name}` is not an {direction} port",
                            if direction == Direction::Input {
                                "input"
                            } else {
                                "output"
                            }
                        ))
                    }
                    None => return Err(format!("surrogate references unknown port `{name}`")),
                }
            }
        }
        if s.a.len() != s.outputs.len() || s.a.iter().any(|row| row.len() != s.inputs.len()) {
            return Err(format!(
                "surrogate matrix must be {} x {}",
                s.outputs.len(),
                s.inputs.len()
            ));
        }
        if s.b.len() != s.outputs.len() {
            return Err(format!(
                "surrogate offset must have {} entries",
                s.outputs.len()
            ));
        }
        if s.a.iter().flatten().chain(&s.b).any(|v| !v.is_finite()) {
            return Err("surrogate coefficients must be finite".into());
        }
        Ok(())
    }
}

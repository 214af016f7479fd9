//! The reference Power-to-X platform: a direct-air-capture unit, a PEM
//! electrolyser and a methanation reactor under one platform shell.
//! Used to generate the files under `fixtures/` and by the tests.

use std::collections::BTreeMap;

use crate::aas::{
    bom_submodel, simulation_submodel, AdministrationShell, AssetKind, Datatype, DecisionLevel,
    Direction, LevelOfDetail, Parameter, Port, PortRange, SimulationModelDescriptor, SolverSpec,
    SurrogateSpec,
};
use crate::adaption::{Profile, Scenario, TruthOverride};
use crate::ingest::ProductionSequence;

pub const SYSTEM_ID: &str = "PtX-Platform";
pub const ROOT: &str = "Platform";
pub const DAC: &str = "DAC";
pub const ELECTROLYSIS: &str = "Electrolysis";
pub const METHANATION: &str = "Methanation";

pub const DAC_MODEL: &str = "DacModel";
pub const ELECTROLYSIS_MODEL: &str = "ElectrolysisModel";
pub const METHANATION_MODEL: &str = "MethanationModel";
pub const METHANATION_FAST: &str = "MethanationFast";

fn port(name: &str, direction: Direction, quantity: &str, unit: &str, max: f64) -> Port {
    Port {
        name: name.into(),
        direction,
        quantity: quantity.into(),
        unit: unit.into(),
        range: PortRange::new(0.0, max),
        datatype: Datatype::Real,
    }
}

#[allow(clippy::too_many_arguments)]
fn model(
    model_id: &str,
    owner: &str,
    discipline: &str,
    ports: Vec<Port>,
    surrogate: SurrogateSpec,
    computing_time: f64,
    accuracy: f64,
    parameters: Vec<Parameter>,
) -> SimulationModelDescriptor {
    SimulationModelDescriptor {
        model_id: model_id.into(),
        owner_asset_id: owner.into(),
        storage_location: format!("file:///models/{model_id}.fmu"),
        simulation_environment: "FMI-2.0-CS".into(),
        solver: SolverSpec {
            method: "cvode".into(),
            step_size: 1.0,
            tolerance: 1e-6,
        },
        parameters,
        ports,
        level_of_detail: LevelOfDetail::ProcessUnit,
        discipline: discipline.into(),
        decision_level: DecisionLevel::Control,
        computing_time,
        accuracy,
        surrogate: Some(surrogate),
    }
}

fn names(list: &[&str]) -> Vec<String> {
    list.iter().map(|s| s.to_string()).collect()
}

pub fn dac_model() -> SimulationModelDescriptor {
    model(
        DAC_MODEL,
        DAC,
        "adsorption",
        vec![port(
            "CO2",
            Direction::Output,
            "co2_mass_flow",
            "kg/h",
            20.0,
        )],
        SurrogateSpec {
            inputs: vec![],
            outputs: names(&["CO2"]),
            a: vec![vec![]],
            b: vec![11.0],
        },
        1.0,
        0.85,
        vec![Parameter {
            name: "sorbentMass".into(),
            value: 120.0,
            unit: "kg".into(),
        }],
    )
}

pub fn electrolysis_model() -> SimulationModelDescriptor {
    model(
        ELECTROLYSIS_MODEL,
        ELECTROLYSIS,
        "electrochemistry",
        vec![
            port("power", Direction::Input, "electric_power", "kW", 4.0),
            port("H2", Direction::Output, "h2_mass_flow", "kg/h", 10.0),
            port("O2", Direction::Output, "o2_mass_flow", "kg/h", 80.0),
        ],
        SurrogateSpec {
            inputs: names(&["power"]),
            outputs: names(&["H2", "O2"]),
            a: vec![vec![2.0], vec![16.0]],
            b: vec![0.0, 0.0],
        },
        2.0,
        0.8,
        vec![Parameter {
            name: "cellCount".into(),
            value: 20.0,
            unit: "1".into(),
        }],
    )
}

fn methanation_ports() -> Vec<Port> {
    vec![
        port("CO2", Direction::Input, "co2_mass_flow", "kg/h", 50.0),
        port("H2", Direction::Input, "h2_mass_flow", "kg/h", 10.0),
        port("power", Direction::Input, "electric_power", "kW", 10.0),
        port("CH4", Direction::Output, "ch4_mass_flow", "kg/h", 30.0),
    ]
}

fn methanation_surrogate() -> SurrogateSpec {
    SurrogateSpec {
        inputs: names(&["CO2", "H2", "power"]),
        outputs: names(&["CH4"]),
        a: vec![vec![0.2, 1.0, 0.0]],
        b: vec![0.0],
    }
}

pub fn methanation_model() -> SimulationModelDescriptor {
    model(
        METHANATION_MODEL,
        METHANATION,
        "reaction-engineering",
        methanation_ports(),
        methanation_surrogate(),
        10.0,
        0.9,
        vec![Parameter {
            name: "reactorTemperature".into(),
            value: 573.15,
            unit: "K".into(),
        }],
    )
}

/// Coarser alternative for the methanation reactor.
pub fn methanation_fast_model() -> SimulationModelDescriptor {
    model(
        METHANATION_FAST,
        METHANATION,
        "reaction-engineering",
        methanation_ports(),
        methanation_surrogate(),
        2.0,
        0.7,
        vec![],
    )
}

fn shell(id: &str, models: &[SimulationModelDescriptor]) -> AdministrationShell {
    let mut s = AdministrationShell::new(id, id, AssetKind::Instance);
    if !models.is_empty() {
        s = s.with_submodel(simulation_submodel("SimulationModels", models));
    }
    s
}

fn platform_with(methanation: &[SimulationModelDescriptor]) -> Vec<AdministrationShell> {
    vec![
        AdministrationShell::new(ROOT, ROOT, AssetKind::Instance).with_submodel(bom_submodel(
            "BillOfMaterial",
            &names(&[DAC, ELECTROLYSIS, METHANATION]),
        )),
        shell(DAC, &[dac_model()]),
        shell(ELECTROLYSIS, &[electrolysis_model()]),
        shell(METHANATION, methanation),
    ]
}

/// The four-shell platform with one model per process asset.
pub fn platform_shells() -> Vec<AdministrationShell> {
    platform_with(&[methanation_model()])
}

/// The platform with a second, faster methanation model.
pub fn platform_shells_with_alternative() -> Vec<AdministrationShell> {
    platform_with(&[methanation_model(), methanation_fast_model()])
}

pub fn sequence() -> ProductionSequence {
    ProductionSequence {
        system_id: SYSTEM_ID.into(),
        steps: names(&[DAC, ELECTROLYSIS, METHANATION]),
    }
}

fn scenario(truth: Vec<TruthOverride>) -> Scenario {
    let mut exogenous = BTreeMap::new();
    exogenous.insert(
        format!("{ELECTROLYSIS}#power"),
        Profile {
            base: 2.0,
            amplitude: 1.5,
            period: 40.0,
        },
    );
    exogenous.insert(
        format!("{METHANATION}#power"),
        Profile {
            base: 5.0,
            amplitude: 2.0,
            period: 30.0,
        },
    );
    Scenario {
        window_seconds: 60.0,
        sample_interval: 1.0,
        windows: 3,
        exogenous,
        truth,
    }
}

/// Electrolyser hydrogen gain steps from 2.0 to 2.5 after the first window.
pub fn drift_scenario() -> Scenario {
    scenario(vec![TruthOverride {
        model_id: ELECTROLYSIS_MODEL.into(),
        from_window: 1,
        gain_scale: None,
        a: Some(vec![vec![2.5], vec![16.0]]),
        b: Some(vec![0.0, 0.0]),
    }])
}

/// Electrolyser gains rise by 2 %, well inside the default tolerance.
pub fn small_drift_scenario() -> Scenario {
    scenario(vec![TruthOverride {
        model_id: ELECTROLYSIS_MODEL.into(),
        from_window: 1,
        gain_scale: Some(1.02),
        a: None,
        b: None,
    }])
}

/// Methanation output doubles after the first window.
pub fn jump_scenario() -> Scenario {
    scenario(vec![TruthOverride {
        model_id: METHANATION_MODEL.into(),
        from_window: 1,
        gain_scale: Some(2.0),
        a: None,
        b: None,
    }])
}

/// Example unit extension file.
pub const UNIT_EXTENSIONS: &str = r#"[
  {"symbol": "GW", "dimension": {"mass": 1, "length": 2, "time": -3}, "scaleToBase": 1e9, "affineOffset": 0},
  {"symbol": "t/d", "dimension": {"mass": 1, "time": -1}, "scaleToBase": 0.011574074074074073, "affineOffset": 0}
]
"#;

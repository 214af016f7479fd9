use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use super::units::{Conversion, Incompatibility, UnitError, UnitRegistry};
use super::MatchError;
use crate::aas::{Datatype, Direction, Port};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub enum RangeMode {
    /// The converted output range must lie inside the input range.
    #[default]
    Subset,
    /// The converted output range must intersect the input range.
    Overlap,
}

impl RangeMode {
    pub fn as_str(self) -> &'static str {
        match self {
            RangeMode::Subset => "subset",
            RangeMode::Overlap => "overlap",
        }
    }
}

impl fmt::Display for RangeMode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for RangeMode {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "subset" => Ok(RangeMode::Subset),
            "overlap" => Ok(RangeMode::Overlap),
            other => Err(format!(
                "unknown range mode `{other}` (expected subset or overlap)"
            )),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub enum Verdict {
    Match,
    UnitMismatch,
    DimensionMismatch,
    RangeViolation,
    DatatypeMismatch,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct MatchResult {
    pub verdict: Verdict,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub conversion_factor: Option<f64>,
    pub detail: String,
}

impl MatchResult {
    fn reject(verdict: Verdict, detail: impl Into<String>) -> Self {
        MatchResult {
            verdict,
            conversion_factor: None,
            detail: detail.into(),
        }
    }

    pub fn is_match(&self) -> bool {
        self.verdict == Verdict::Match
    }
}

fn datatype_accepts(from: Datatype, to: Datatype) -> bool {
    from == to || (from == Datatype::Integer && to == Datatype::Real)
}

/// Checks quantity, datatype, unit and range, in that order; the first
/// failing check decides the verdict.
pub fn ports_compatible(
    registry: &UnitRegistry,
    out: &Port,
    input: &Port,
    mode: RangeMode,
) -> Result<MatchResult, MatchError> {
    if out.direction != Direction::Output || input.direction != Direction::Input {
        return Err(MatchError::Direction(format!(
            "expected an output and an input port, got `{}` ({}) and `{}` ({})",
            out.name, out.direction, input.name, input.direction
        )));
    }
    if out.quantity != input.quantity {
        return Ok(MatchResult::reject(
            Verdict::DimensionMismatch,
            format!(
                "quantity tokens differ (`{}` vs `{}`)",
                out.quantity, input.quantity
            ),
        ));
    }
    if !datatype_accepts(out.datatype, input.datatype) {
        return Ok(MatchResult::reject(
            Verdict::DatatypeMismatch,
            format!("{} cannot feed {}", out.datatype, input.datatype),
        ));
    }
    let factor = match registry.conversion(&out.unit, &input.unit) {
        Ok(Conversion::Factor(f)) => f,
        Ok(Conversion::Incompatible(reason @ Incompatibility::Dimension { .. })) => {
            return Ok(MatchResult::reject(
                Verdict::DimensionMismatch,
                format!("`{}` -> `{}`: {reason}", out.unit, input.unit),
            ))
        }
        Ok(Conversion::Incompatible(reason)) => {
            return Ok(MatchResult::reject(
                Verdict::UnitMismatch,
                format!("`{}` -> `{}`: {reason}", out.unit, input.unit),
            ))
        }
        Err(UnitError::UnknownUnit(symbol)) => {
            return Ok(MatchResult::reject(
                Verdict::UnitMismatch,
                format!("unknown unit `{symbol}`"),
            ))
        }
        Err(e) => return Err(MatchError::Unit(e)),
    };
    if out.datatype.is_numeric() && input.datatype.is_numeric() {
        let (lo, hi) = (out.range.min * factor, out.range.max * factor);
        let (min, max) = (input.range.min, input.range.max);
        let ok = match mode {
            RangeMode::Subset => min <= lo && hi <= max,
            RangeMode::Overlap => lo <= max && min <= hi,
        };
        if !ok {
            return Ok(MatchResult::reject(
                Verdict::RangeViolation,
                format!("converted range [{lo}, {hi}] fails {mode} check against [{min}, {max}]"),
            ));
        }
    }
    Ok(MatchResult {
        verdict: Verdict::Match,
        conversion_factor: Some(factor),
        detail: format!("factor {factor}"),
    })
}

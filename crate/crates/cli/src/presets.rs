//! Named experiment presets, embedded from `presets/` at the repository
//! root so they run from any working directory.

use crate::config::{parse_config, ExperimentConfig};
use crate::error::{CliError, CliResult};

#[derive(Clone, Copy, Debug)]
pub struct Preset {
    pub name: &'static str,
    pub summary: &'static str,
    pub text: &'static str,
}

pub const PRESETS: &[Preset] = &[
    Preset {
        name: "fig1-abm",
        summary: "1000 learning agents in the miscoordination game, priors drawn from the unit box, horizon 20",
        text: include_str!("../../../presets/fig1-abm.json"),
    },
    Preset {
        name: "fig1-meanfield",
        summary: "transport approximation of fig1-abm with 10000 particles",
        text: include_str!("../../../presets/fig1-meanfield.json"),
    },
    Preset {
        name: "fig1-box",
        summary: "reduced box model of the same run: one square advected by its mean best response",
        text: include_str!("../../../presets/fig1-box.json"),
    },
    Preset {
        name: "theorem-2x2",
        summary: "long mean-field run on a skewed 2x2 game converging to the mixed equilibrium (1/3, 2/3)",
        text: include_str!("../../../presets/theorem-2x2.json"),
    },
    Preset {
        name: "memory-dominant",
        summary: "memory rate 1 with a dominant action: the population contracts onto the fixed point (1, 0)",
        text: include_str!("../../../presets/memory-dominant.json"),
    },
    Preset {
        name: "meanbr-eigen",
        summary: "mean best-response relaxation at unit overlap length, decaying to (1/2, 1/2) at rate 2",
        text: include_str!("../../../presets/meanbr-eigen.json"),
    },
];

pub fn find(name: &str) -> CliResult<&'static Preset> {
    PRESETS.iter().find(|p| p.name == name).ok_or_else(|| {
        let names: Vec<&str> = PRESETS.iter().map(|p| p.name).collect();
        CliError::Validation(format!(
            "unknown preset `{name}`; available: {}",
            names.join(", ")
        ))
    })
}

pub fn load(name: &str) -> CliResult<ExperimentConfig> {
    let preset = find(name)?;
    parse_config(preset.text).map_err(|e| e.with_context(&format!("in preset {name}")))
}

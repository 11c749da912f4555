//! Named study configurations.
//!
//! `table1`..`table6` are the full published setups; `table3` and `table6`
//! use a 128×128 mesh and are long-running. `table3_scaled` and
//! `table6_scaled` repeat the time sweeps on a 64×64 mesh.

use std::path::PathBuf;

use opwg_core::linsolve::PreconditionerKind;

use crate::config::{ExperimentConfig, MeshSpec, Sweep, TauRule};

#[derive(Debug, Clone, PartialEq)]
pub struct Preset {
    pub name: &'static str,
    pub description: &'static str,
    pub long_running: bool,
    pub config: ExperimentConfig,
}

pub const PRESET_NAMES: [&str; 8] =
    ["table1", "table2", "table3", "table3_scaled", "table4", "table5", "table6", "table6_scaled"];

fn base(label: &str, k: usize, theta: f64, sweep: Sweep) -> ExperimentConfig {
    ExperimentConfig {
        label: label.to_string(),
        k,
        theta,
        beta0: None,
        sweep,
        final_time: 1.0,
        tolerance: 1e-10,
        max_iterations: None,
        preconditioner: PreconditionerKind::Cholesky,
        output: PathBuf::from(label),
        monitors: false,
    }
}

fn space(meshes: &[usize], power: i32) -> Sweep {
    Sweep::Space {
        meshes: meshes.iter().map(|&n| MeshSpec::Uniform(n)).collect(),
        tau: TauRule { coefficient: 1.0, power },
    }
}

fn time(n: usize, steps: &[usize]) -> Sweep {
    Sweep::Time { mesh: MeshSpec::Uniform(n), taus: steps.iter().map(|&m| 1.0 / m as f64).collect() }
}

pub fn preset(name: &str) -> Option<Preset> {
    let (description, long_running, config) = match name {
        "table1" => ("backward Euler, k=0, tau=h^2, h=1/8..1/64", false, base(name, 0, 1.0, space(&[8, 16, 32, 64], 2))),
        "table2" => ("backward Euler, k=1, tau=h^3, h=1/4..1/32", false, base(name, 1, 1.0, space(&[4, 8, 16, 32], 3))),
        "table3" => (
            "backward Euler, k=1, h=1/128, tau=1/32..1/512",
            true,
            base(name, 1, 1.0, time(128, &[32, 64, 128, 256, 512])),
        ),
        "table3_scaled" => (
            "backward Euler, k=1, h=1/64, tau=1/8..1/128",
            false,
            base(name, 1, 1.0, time(64, &[8, 16, 32, 64, 128])),
        ),
        "table4" => ("Crank-Nicolson, k=0, tau=h^2, h=1/8..1/64", false, base(name, 0, 0.5, space(&[8, 16, 32, 64], 2))),
        "table5" => ("Crank-Nicolson, k=1, tau=h^3, h=1/4..1/32", false, base(name, 1, 0.5, space(&[4, 8, 16, 32], 3))),
        "table6" => (
            "Crank-Nicolson, k=1, h=1/128, tau=1/4..1/64",
            true,
            base(name, 1, 0.5, time(128, &[4, 8, 16, 32, 64])),
        ),
        "table6_scaled" => (
            "Crank-Nicolson, k=1, h=1/64, tau=1/4..1/32",
            false,
            base(name, 1, 0.5, time(64, &[4, 8, 16, 32])),
        ),
        _ => return None,
    };
    let name = PRESET_NAMES.iter().copied().find(|&n| n == name)?;
    Some(Preset { name, description, long_running, config })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn every_preset_is_valid_and_round_trips() {
        for name in PRESET_NAMES {
            let p = preset(name).unwrap();
            p.config.validate().unwrap();
            assert_eq!(ExperimentConfig::parse(&p.config.render()).unwrap(), p.config, "{name}");
        }
        assert!(preset("table7").is_none());
    }

    #[test]
    fn long_running_flags() {
        let long: Vec<&str> = PRESET_NAMES.iter().copied().filter(|n| preset(n).unwrap().long_running).collect();
        assert_eq!(long, vec!["table3", "table6"]);
    }
}

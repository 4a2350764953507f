//! The acceptance suite: one or more preset runs per criterion.

use std::path::Path;

use fracdual_core::velocity::VelocityKind;

use crate::config::{ExperimentConfig, ExperimentId};
use crate::record::RunRecord;

pub struct Criterion {
    pub number: usize,
    pub title: &'static str,
    pub runs: Vec<ExperimentConfig>,
}

fn preset(id: ExperimentId, root: &Path, name: &str) -> ExperimentConfig {
    let mut cfg = ExperimentConfig::preset(id);
    cfg.output_dir = root.join(name);
    cfg
}

fn propagation(root: &Path, alpha: f64, kind: VelocityKind) -> ExperimentConfig {
    let mut cfg = preset(
        ExperimentId::AtomPropagation,
        root,
        &format!("atom_propagation_a{alpha}_{}", kind.name()),
    );
    cfg.solver.alpha = alpha;
    cfg.atom = fracdual_core::atoms::AtomParams::for_alpha(cfg.grid.dimension(), alpha);
    cfg.velocity.kind = kind;
    if kind == VelocityKind::CompressiveSink {
        cfg.velocity.sink_strength = 1.0;
    }
    cfg
}

/// All criteria with output directories below `root`.
pub fn criteria(root: &Path) -> Vec<Criterion> {
    let one = |number, title, id: ExperimentId| Criterion {
        number,
        title,
        runs: vec![preset(id, root, id.name())],
    };
    vec![
        one(1, "duality identity", ExperimentId::Duality),
        one(2, "conservation and positivity", ExperimentId::Conservation),
        Criterion {
            number: 3,
            title: "L2 energy inequality and threshold sweep",
            runs: vec![
                preset(ExperimentId::EnergyL2, root, "energy_l2"),
                preset(ExperimentId::ThresholdSweep, root, "threshold_sweep"),
            ],
        },
        one(4, "pointwise kernel inequality", ExperimentId::Cordoba),
        one(5, "Riccati envelope", ExperimentId::Riccati),
        Criterion {
            number: 6,
            title: "atom propagation",
            runs: [1.0, 1.5]
                .into_iter()
                .flat_map(|a| {
                    [VelocityKind::DivergenceFree, VelocityKind::CompressiveSink]
                        .map(|k| propagation(root, a, k))
                })
                .collect(),
        },
        one(7, "regularization rate", ExperimentId::RegularizationRate),
        one(8, "Hölder propagation", ExperimentId::HolderPropagation),
        one(9, "supercritical mode", ExperimentId::Supercritical),
        one(
            10,
            "interpolation bounds",
            ExperimentId::InterpolationBounds,
        ),
    ]
}

/// One line per criterion: number, title, status and failing checks.
pub fn summary_line(c: &Criterion, records: &[RunRecord]) -> String {
    let failures: Vec<String> = records
        .iter()
        .flat_map(|r| {
            r.verdicts
                .iter()
                .filter(|v| v.status == crate::record::Status::Fail)
                .map(move |v| format!("{}:{} ({})", r.output_dir().display(), v.name, v.detail))
        })
        .collect();
    let status = if failures.is_empty() { "PASS" } else { "FAIL" };
    let mut line = format!("criterion {:>2} [{status}] {}", c.number, c.title);
    if !failures.is_empty() {
        line.push_str(": ");
        line.push_str(&failures.join("; "));
    }
    line
}

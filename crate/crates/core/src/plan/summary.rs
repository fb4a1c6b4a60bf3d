//! Per-phase counts consumed by the cost model.

use std::path::Path;

use serde::{Deserialize, Serialize};

use super::program::{compile, Op, Program, TensorBlock};
use super::SimulationPlan;
use crate::error::{Error, Result};

/// Unaggregated cost of one two-qubit gate, in real FLOPs per amplitude.
pub const FLOPS_PER_AMP_PER_GATE: f64 = 30.0;

/// Which measured per-kernel time applies to a phase.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum RateClass {
    /// Small pre-loop tensors, timed like 30-qubit simulations.
    Q30,
    /// Disk-slice tensors, timed like 45-qubit simulations.
    Q45,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PhaseKind {
    Tensor,
    Contraction,
    DiskWrite,
    DiskRead,
}

/// One row of the cost table. Counts are per disk slice.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PhaseSummary {
    pub name: String,
    pub kind: PhaseKind,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub class: Option<RateClass>,
    #[serde(default)]
    pub transfers: u32,
    #[serde(default)]
    pub all2alls: f64,
    #[serde(default)]
    pub kernels: u32,
    #[serde(default)]
    pub gates: u32,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub rank: Option<u32>,
    #[serde(default)]
    pub contraction_flops: f64,
    /// Total FLOPs of the phase's gates without aggregation, over all slices.
    #[serde(default)]
    pub unaggregated_flops: f64,
}

impl PhaseSummary {
    fn row(name: impl Into<String>, kind: PhaseKind) -> Self {
        Self {
            name: name.into(),
            kind,
            class: None,
            transfers: 0,
            all2alls: 0.0,
            kernels: 0,
            gates: 0,
            rank: None,
            contraction_flops: 0.0,
            unaggregated_flops: 0.0,
        }
    }

    pub fn disk_write() -> Self {
        Self {
            transfers: 1,
            all2alls: 1.0,
            ..Self::row("Disk write", PhaseKind::DiskWrite)
        }
    }

    pub fn disk_read() -> Self {
        Self {
            transfers: 1,
            all2alls: 1.0,
            ..Self::row("Disk read", PhaseKind::DiskRead)
        }
    }

    pub fn contraction(flops: f64) -> Self {
        Self {
            contraction_flops: flops,
            ..Self::row("Contraction", PhaseKind::Contraction)
        }
    }
}

/// Summary of a whole plan.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PlanSummary {
    pub n_qubits: usize,
    /// Number of disk slices every per-slice count is multiplied by.
    pub disk_slices: u64,
    #[serde(default)]
    pub phases: Vec<PhaseSummary>,
}

impl PlanSummary {
    pub fn transfers(&self) -> u32 {
        self.phases.iter().map(|p| p.transfers).sum()
    }

    pub fn all2alls(&self) -> f64 {
        self.phases.iter().map(|p| p.all2alls).sum()
    }

    pub fn kernels(&self) -> u32 {
        self.phases.iter().map(|p| p.kernels).sum()
    }

    pub fn kernels_in(&self, class: RateClass) -> u32 {
        self.phases
            .iter()
            .filter(|p| p.class == Some(class))
            .map(|p| p.kernels)
            .sum()
    }

    pub fn gates(&self) -> u32 {
        self.phases.iter().map(|p| p.gates).sum()
    }

    pub fn contraction_flops(&self) -> f64 {
        self.phases.iter().map(|p| p.contraction_flops).sum()
    }

    pub fn from_toml_str(s: &str) -> Result<Self> {
        Ok(toml::from_str(s)?)
    }

    pub fn to_toml_string(&self) -> Result<String> {
        Ok(toml::to_string(self)?)
    }

    pub fn load(path: &Path) -> Result<Self> {
        Self::from_toml_str(&std::fs::read_to_string(path)?)
    }
}

fn block_counts(block: &TensorBlock) -> (u32, u32, f64) {
    let mut kernels = 0;
    let mut gates = 0;
    let mut all2alls = 0.0;
    for op in &block.ops {
        match op {
            Op::Kernel { gates: g, .. } => {
                kernels += 1;
                gates += g.len() as u32;
            }
            Op::E2q { .. } => gates += 1,
            Op::Ei { .. } => {}
            Op::All2All { weight_exp, .. } => all2alls += 2f64.powi(*weight_exp),
        }
    }
    (kernels, gates, all2alls)
}

pub fn summarize_program(program: &Program) -> PlanSummary {
    let n = program.n_qubits;
    let e = program.entanglement_bits();
    let mut phases = Vec::new();
    for t in &program.pre {
        let (kernels, gates, all2alls) = block_counts(&t.block);
        let width = t.block.local.len() + t.block.global.len() + t.labels.len();
        phases.push(PhaseSummary {
            class: Some(RateClass::Q30),
            kernels,
            gates,
            all2alls,
            rank: Some((t.block.local.len() + t.labels.len()) as u32),
            unaggregated_flops: FLOPS_PER_AMP_PER_GATE * f64::from(gates) * 2f64.powi(width as i32),
            ..PhaseSummary::row(t.block.name.clone(), PhaseKind::Tensor)
        });
    }
    if !program.pre.is_empty() && !program.phases.is_empty() {
        phases.push(PhaseSummary::contraction(contraction_flops(n, e)));
    }
    for phase in &program.phases {
        if phase.read.is_some() {
            phases.push(PhaseSummary::disk_read());
        }
        for t in &phase.tensors {
            let (kernels, gates, all2alls) = block_counts(t);
            phases.push(PhaseSummary {
                class: Some(RateClass::Q45),
                kernels,
                gates,
                all2alls,
                rank: Some(t.local.len() as u32),
                unaggregated_flops: FLOPS_PER_AMP_PER_GATE * f64::from(gates) * 2f64.powi(n as i32),
                ..PhaseSummary::row(t.name.clone(), PhaseKind::Tensor)
            });
        }
        if phase.write.is_some() {
            phases.push(PhaseSummary::disk_write());
        }
    }
    PlanSummary {
        n_qubits: n,
        disk_slices: 1u64 << program.disk_bits(),
        phases,
    }
}

/// `8 * 2^n * 2^e` real operations for eliminating `e` entanglement indices
/// over an `n`-qubit result.
pub fn contraction_flops(n: usize, e: usize) -> f64 {
    8.0 * 2f64.powi((n + e) as i32)
}

/// Per-phase counts of a structurally valid plan.
pub fn summarize_plan(plan: &SimulationPlan) -> Result<PlanSummary> {
    let program = compile(plan, None).map_err(|v| Error::PlanStep {
        step: v[0].step,
        message: v[0].to_string(),
    })?;
    Ok(summarize_program(&program))
}

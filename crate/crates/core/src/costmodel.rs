//! Runtime estimates from per-phase counts and machine rates.

use std::fmt::Write as _;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
pub use crate::plan::contraction_flops;
use crate::plan::{PhaseKind, PlanSummary, RateClass};

pub const SECONDS_PER_DAY: f64 = 86_400.0;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MachineProfile {
    pub name: String,
    pub sockets: u64,
    /// Seconds per aggregate gate on a 45-qubit slice.
    pub t_gate_45q: f64,
    /// Seconds per aggregate gate on a tensor of 30 qubits or less.
    pub t_gate_30q: f64,
    /// Aggregate FLOP/s for entanglement-index contractions.
    pub contraction_rate: f64,
    /// Bytes per second per socket during an all-to-all.
    pub injection_rate: f64,
    /// File-system bytes per second.
    pub disk_rate: f64,
    pub disk_bytes_per_amp: f64,
    pub mem_bytes_per_amp: f64,
    /// HPL, TFLOP/s.
    pub hpl: f64,
}

impl MachineProfile {
    pub fn summit() -> Self {
        Self {
            name: "summit".into(),
            sockets: 8192,
            t_gate_45q: 0.22482,
            t_gate_30q: 0.025097,
            contraction_rate: 116.7304e15,
            injection_rate: 3.5 * 2f64.powi(30),
            disk_rate: 2.0 * 2f64.powi(40),
            disk_bytes_per_amp: 8.0,
            mem_bytes_per_amp: 16.0,
            hpl: 148_600.0,
        }
    }

    pub fn validate(&self) -> Result<()> {
        let fields = [
            ("sockets", self.sockets as f64),
            ("t_gate_45q", self.t_gate_45q),
            ("t_gate_30q", self.t_gate_30q),
            ("contraction_rate", self.contraction_rate),
            ("injection_rate", self.injection_rate),
            ("disk_rate", self.disk_rate),
            ("disk_bytes_per_amp", self.disk_bytes_per_amp),
            ("mem_bytes_per_amp", self.mem_bytes_per_amp),
            ("hpl", self.hpl),
        ];
        match fields.iter().find(|(_, v)| !(v.is_finite() && *v > 0.0)) {
            Some((name, v)) => Err(Error::Config(format!("profile field {name} must be positive, got {v}"))),
            None => Ok(()),
        }
    }

    pub fn from_toml_str(s: &str) -> Result<Self> {
        let p: Self = toml::from_str(s)?;
        p.validate()?;
        Ok(p)
    }

    pub fn to_toml_string(&self) -> Result<String> {
        Ok(toml::to_string(self)?)
    }

    pub fn load(path: &Path) -> Result<Self> {
        Self::from_toml_str(&std::fs::read_to_string(path)?)
    }

    pub fn gate_time(&self, class: RateClass) -> f64 {
        match class {
            RateClass::Q30 => self.t_gate_30q,
            RateClass::Q45 => self.t_gate_45q,
        }
    }
}

/// Moves a per-gate time between machines by their HPL ratio.
pub fn scale_gate_time(t_source: f64, hpl_source: f64, hpl_target: f64) -> Result<f64> {
    if [t_source, hpl_source, hpl_target].iter().any(|v| !(v.is_finite() && *v > 0.0)) {
        return Err(Error::Cost("gate-time scaling needs positive inputs".into()));
    }
    Ok(t_source * hpl_source / hpl_target)
}

/// Seconds for `count` full exchanges of an `n`-qubit double-precision state.
pub fn all2all_time(n: usize, count: f64, profile: &MachineProfile) -> f64 {
    let per_socket = profile.mem_bytes_per_amp * 2f64.powi(n as i32) / profile.sockets as f64;
    count * per_socket / profile.injection_rate
}

/// Seconds for `transfers` complete passes over the on-disk state.
pub fn disk_time(n: usize, transfers: f64, profile: &MachineProfile) -> f64 {
    transfers * profile.disk_bytes_per_amp * 2f64.powi(n as i32) / profile.disk_rate
}

/// Bytes needed to hold all `2^n` amplitudes on disk.
pub fn disk_footprint(n: usize, profile: &MachineProfile) -> u128 {
    (profile.disk_bytes_per_amp as u128) << n
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct CostRow {
    pub label: String,
    pub transfers: Option<f64>,
    pub all2alls: Option<f64>,
    pub kernels: Option<u32>,
    pub rank: Option<f64>,
    pub gates: Option<u32>,
    pub contraction_flops: Option<f64>,
    pub seconds: f64,
    pub percent: f64,
    /// PFLOP/s.
    pub achieved: Option<f64>,
}

impl CostRow {
    fn blank(label: &str) -> Self {
        Self {
            label: label.into(),
            transfers: None,
            all2alls: None,
            kernels: None,
            rank: None,
            gates: None,
            contraction_flops: None,
            seconds: 0.0,
            percent: 0.0,
            achieved: None,
        }
    }

    pub fn days(&self) -> f64 {
        self.seconds / SECONDS_PER_DAY
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct CostReport {
    pub n_qubits: usize,
    pub disk_slices: u64,
    pub phases: Vec<CostRow>,
    pub compute: CostRow,
    pub all2all: CostRow,
    pub disk: CostRow,
    pub total: CostRow,
}

fn pflops(flops: f64, seconds: f64) -> Option<f64> {
    (seconds > 0.0 && flops > 0.0).then(|| flops / seconds / 1e15)
}

/// Builds the runtime table for a plan summary.
pub fn estimate(summary: &PlanSummary, profile: &MachineProfile) -> Result<CostReport> {
    profile.validate()?;
    let n = summary.n_qubits;
    let slices = summary.disk_slices as f64;
    let mut phases = Vec::with_capacity(summary.phases.len());
    let mut gate_flops = 0.0;
    for p in &summary.phases {
        let mut row = CostRow {
            rank: p.rank.map(f64::from),
            ..CostRow::blank(&p.name)
        };
        match p.kind {
            PhaseKind::Tensor => {
                let class = match (p.class, p.kernels) {
                    (Some(c), _) => c,
                    (None, 0) => RateClass::Q45,
                    (None, _) => {
                        return Err(Error::Cost(format!("phase {} has kernels but no rate class", p.name)))
                    }
                };
                row.seconds = f64::from(p.kernels) * profile.gate_time(class) * slices;
                row.kernels = Some(p.kernels);
                row.gates = Some(p.gates);
                row.achieved = pflops(p.unaggregated_flops, row.seconds);
                gate_flops += p.unaggregated_flops;
            }
            PhaseKind::Contraction => {
                row.seconds = p.contraction_flops / profile.contraction_rate;
                row.contraction_flops = Some(p.contraction_flops);
                row.achieved = pflops(p.contraction_flops, row.seconds);
            }
            PhaseKind::DiskRead | PhaseKind::DiskWrite => {
                row.transfers = Some(f64::from(p.transfers));
            }
        }
        if p.all2alls > 0.0 {
            row.all2alls = Some(p.all2alls);
        }
        phases.push(row);
    }

    let contraction = summary.contraction_flops();
    let mut compute = CostRow::blank("Compute");
    compute.seconds = phases.iter().map(|r| r.seconds).sum();
    compute.kernels = Some(summary.kernels());
    compute.contraction_flops = (contraction > 0.0).then_some(contraction);
    compute.achieved = pflops(gate_flops + contraction, compute.seconds);

    let mut all2all = CostRow::blank("All-to-alls");
    all2all.all2alls = Some(summary.all2alls());
    all2all.seconds = all2all_time(n, summary.all2alls(), profile);

    let mut disk = CostRow::blank("Disk I/O");
    disk.transfers = Some(f64::from(summary.transfers()));
    disk.seconds = disk_time(n, f64::from(summary.transfers()), profile);

    let mut total = CostRow {
        transfers: disk.transfers,
        all2alls: all2all.all2alls,
        kernels: compute.kernels,
        rank: footprint_rank(summary),
        gates: Some(summary.gates()),
        seconds: compute.seconds + all2all.seconds + disk.seconds,
        achieved: compute.achieved,
        ..CostRow::blank("Total")
    };
    let t = total.seconds;
    for r in phases.iter_mut().chain([&mut compute, &mut all2all, &mut disk, &mut total]) {
        r.percent = if t > 0.0 { 100.0 * r.seconds / t } else { 0.0 };
    }
    Ok(CostReport {
        n_qubits: n,
        disk_slices: summary.disk_slices,
        phases,
        compute,
        all2all,
        disk,
        total,
    })
}

/// Per-socket footprint while the pre-loop tensors, the contraction output and
/// the widest disk-slice tensor coexist, as a log2 amplitude count. Needs the
/// contraction row to carry a rank.
pub fn footprint_rank(summary: &PlanSummary) -> Option<f64> {
    let mut sum = 0.0;
    let mut widest: Option<u32> = None;
    let mut contraction = None;
    for p in &summary.phases {
        match (p.kind, p.class, p.rank) {
            (PhaseKind::Contraction, _, r) => contraction = r,
            (PhaseKind::Tensor, Some(RateClass::Q30), Some(r)) => sum += 2f64.powi(r as i32),
            (PhaseKind::Tensor, _, Some(r)) => widest = widest.max(Some(r)),
            _ => {}
        }
    }
    let c = contraction?;
    sum += 2f64.powi(c as i32) + widest.map_or(0.0, |w| 2f64.powi(w as i32));
    Some(sum.log2())
}

fn cell<T>(v: Option<T>, f: impl Fn(T) -> String) -> String {
    v.map(f).unwrap_or_default()
}

fn sci(x: f64) -> String {
    format!("{x:.3e}")
}

impl CostReport {
    fn rows(&self) -> impl Iterator<Item = &CostRow> {
        self.phases
            .iter()
            .chain([&self.compute, &self.all2all, &self.disk, &self.total])
    }

    fn cells(r: &CostRow) -> [String; 10] {
        [
            r.label.clone(),
            cell(r.transfers, |v| format!("{v}")),
            cell(r.all2alls, |v| format!("{v:.6}")),
            cell(r.kernels, |v| v.to_string()),
            cell(r.rank, |v| if v.fract() == 0.0 { format!("{v}") } else { format!("{v:.5}") }),
            cell(r.gates, |v| v.to_string()),
            cell(r.contraction_flops, sci),
            if r.seconds > 0.0 || r.label == "Total" { format!("{:.6}", r.days()) } else { String::new() },
            if r.seconds > 0.0 || r.label == "Total" { format!("{:.2}%", r.percent) } else { String::new() },
            cell(r.achieved, |v| format!("{v:.4}")),
        ]
    }

    const HEADER: [&'static str; 10] = [
        "tensor",
        "disk_transfers",
        "all2alls",
        "kernels",
        "rank",
        "gates",
        "contraction_flops",
        "days",
        "percent",
        "achieved_pflops",
    ];

    /// Aligned text table, one line per row.
    pub fn to_text(&self) -> String {
        let mut table: Vec<[String; 10]> = vec![Self::HEADER.map(str::to_owned)];
        table.extend(self.rows().map(Self::cells));
        let widths: Vec<usize> = (0..10)
            .map(|c| table.iter().map(|r| r[c].len()).max().unwrap_or(0))
            .collect();
        let mut out = String::new();
        for (i, r) in table.iter().enumerate() {
            if i == 1 + self.phases.len() {
                let _ = writeln!(out, "{}", "-".repeat(widths.iter().sum::<usize>() + 2 * 9));
            }
            let line: Vec<String> = r
                .iter()
                .zip(&widths)
                .enumerate()
                .map(|(c, (s, w))| if c == 0 { format!("{s:<w$}") } else { format!("{s:>w$}") })
                .collect();
            let _ = writeln!(out, "{}", line.join("  ").trim_end());
        }
        out
    }

    pub fn to_csv(&self) -> Result<String> {
        let mut w = csv::Writer::from_writer(Vec::new());
        w.write_record(Self::HEADER)?;
        for r in self.rows() {
            w.write_record(Self::cells(r))?;
        }
        let bytes = w.into_inner().map_err(|e| Error::Io(e.into_error()))?;
        Ok(String::from_utf8(bytes).expect("csv output is utf-8"))
    }
}

/// One depth of a sweep: per-disk-slice counts.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SweepRow {
    pub cycles: u32,
    pub transfers: u32,
    pub all2alls: f64,
    pub kernels: u32,
    /// Kernels timed at the 30-qubit rate; the rest use the 45-qubit rate.
    pub kernels_30q: u32,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SweepSpec {
    pub n_qubits: usize,
    pub disk_slices: u64,
    pub entanglement_bits: usize,
    pub rows: Vec<SweepRow>,
}

impl SweepSpec {
    pub fn from_toml_str(s: &str) -> Result<Self> {
        Ok(toml::from_str(s)?)
    }

    pub fn load(path: &Path) -> Result<Self> {
        Self::from_toml_str(&std::fs::read_to_string(path)?)
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct SweepPoint {
    pub n_qubits: usize,
    pub cycles: u32,
    pub transfers: u32,
    pub all2alls: f64,
    pub kernels: u32,
    pub days: f64,
}

pub fn sweep_seconds(spec: &SweepSpec, row: &SweepRow, profile: &MachineProfile) -> Result<f64> {
    if row.kernels_30q > row.kernels {
        return Err(Error::Cost(format!(
            "{} cycles: {} 30-qubit kernels out of {}",
            row.cycles, row.kernels_30q, row.kernels
        )));
    }
    let slices = spec.disk_slices as f64;
    let gates = (f64::from(row.kernels_30q) * profile.t_gate_30q
        + f64::from(row.kernels - row.kernels_30q) * profile.t_gate_45q)
        * slices;
    let contraction = contraction_flops(spec.n_qubits, spec.entanglement_bits) / profile.contraction_rate;
    Ok(gates
        + contraction
        + all2all_time(spec.n_qubits, row.all2alls, profile)
        + disk_time(spec.n_qubits, f64::from(row.transfers), profile))
}

/// One runtime estimate per depth.
pub fn depth_sweep(spec: &SweepSpec, profile: &MachineProfile) -> Result<Vec<SweepPoint>> {
    profile.validate()?;
    spec.rows
        .iter()
        .map(|r| {
            Ok(SweepPoint {
                n_qubits: spec.n_qubits,
                cycles: r.cycles,
                transfers: r.transfers,
                all2alls: r.all2alls,
                kernels: r.kernels,
                days: sweep_seconds(spec, r, profile)? / SECONDS_PER_DAY,
            })
        })
        .collect()
}

pub fn sweep_csv(points: &[SweepPoint]) -> Result<String> {
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(["n_qubits", "cycles", "disk_transfers", "all2alls", "kernels", "days"])?;
    for p in points {
        w.write_record([
            p.n_qubits.to_string(),
            p.cycles.to_string(),
            p.transfers.to_string(),
            format!("{:.6}", p.all2alls),
            p.kernels.to_string(),
            format!("{:.6}", p.days),
        ])?;
    }
    let bytes = w.into_inner().map_err(|e| Error::Io(e.into_error()))?;
    Ok(String::from_utf8(bytes).expect("csv output is utf-8"))
}

pub fn sweep_text(points: &[SweepPoint]) -> String {
    let mut out = String::from("qubits  cycles  transfers   all2alls  kernels       days\n");
    for p in points {
        let _ = writeln!(
            out,
            "{:>6}  {:>6}  {:>9}  {:>9.3}  {:>7}  {:>9.2}",
            p.n_qubits, p.cycles, p.transfers, p.all2alls, p.kernels, p.days
        );
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn equal_machines_keep_the_time() {
        assert_eq!(scale_gate_time(3.0, 7.0, 7.0).unwrap(), 3.0);
        assert_eq!(scale_gate_time(1.0, 100.0, 200.0).unwrap(), 0.5);
        assert!(scale_gate_time(0.0, 1.0, 1.0).is_err());
    }

    #[test]
    fn zero_counts_cost_nothing() {
        let p = MachineProfile::summit();
        assert_eq!(all2all_time(53, 0.0, &p), 0.0);
        assert_eq!(disk_time(53, 0.0, &p), 0.0);
        assert_eq!(contraction_flops(3, 0), 64.0);
        assert_eq!(disk_footprint(10, &p), 8192);
    }

    #[test]
    fn empty_summary_is_a_zero_report() {
        let s = PlanSummary {
            n_qubits: 10,
            disk_slices: 1,
            phases: vec![],
        };
        let r = estimate(&s, &MachineProfile::summit()).unwrap();
        assert_eq!(r.total.seconds, 0.0);
        assert!(r.phases.is_empty());
    }

    #[test]
    fn profile_round_trips_through_toml() {
        let p = MachineProfile::summit();
        assert_eq!(MachineProfile::from_toml_str(&p.to_toml_string().unwrap()).unwrap(), p);
        let bad = p.to_toml_string().unwrap().replace("sockets = 8192", "sockets = 0");
        assert!(matches!(MachineProfile::from_toml_str(&bad), Err(Error::Config(_))));
    }
}

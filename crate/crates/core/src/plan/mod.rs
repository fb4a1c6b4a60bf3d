//! Simulation plans in the eight-mode listing format.
//!
//! Each non-comment line is `Mode Gate Args...`, whitespace separated, with
//! `-` (or a Unicode dash) standing for an empty gate column:
//!
//! ```text
//! define  -       53
//! define  -       0 1 2 3 23 24 25 26 27 28 29 30 49 50 51 52
//! new     tensor  14 13 <14 local qubits> <13 global qubits>
//! entgl   tensor  -1 -2 ...
//! new     cache   3 4 5 11
//! gate    2Q      4 11
//! entgl   EI      12 -1 -2
//! entgl   E2Q     12 31 -1 -2
//! all2all -       -10 <new global qubits>
//! slice   -       0 1 2 3 49 50 51 52
//! read    -       0 1 2 3 49 50 51 52
//! write   -       0 1 2 3 49 50 51 52
//! ```
//!
//! Entanglement labels are negative: pair `p` uses `-(2p+1)` for `a'` and
//! `-(2p+2)` for `a`. The first argument of `all2all` is the base-2 log of
//! its weight (0 for a full exchange, negative for an amortized one).

mod program;
pub mod reference;
pub mod schedule;
mod summary;

use std::fmt;
use std::path::Path;
use std::str::FromStr;

use crate::error::{Error, Result};

pub use program::{
    compile, validate_plan, DiskPhase, GateRef, Op, PreTensor, Program, TensorBlock, Violation,
    ViolationKind, K_MAX,
};
pub use summary::{
    contraction_flops, summarize_plan, summarize_program, PhaseKind, PhaseSummary, PlanSummary,
    RateClass, FLOPS_PER_AMP_PER_GATE,
};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum Mode {
    Define,
    New,
    Gate,
    Entgl,
    Slice,
    All2All,
    Write,
    Read,
}

impl Mode {
    pub const ALL: [Mode; 8] = [
        Mode::Define,
        Mode::New,
        Mode::Gate,
        Mode::Entgl,
        Mode::Slice,
        Mode::All2All,
        Mode::Write,
        Mode::Read,
    ];

    pub fn keyword(self) -> &'static str {
        match self {
            Mode::Define => "define",
            Mode::New => "new",
            Mode::Gate => "gate",
            Mode::Entgl => "entgl",
            Mode::Slice => "slice",
            Mode::All2All => "all2all",
            Mode::Write => "write",
            Mode::Read => "read",
        }
    }
}

impl FromStr for Mode {
    type Err = String;
    fn from_str(s: &str) -> std::result::Result<Self, String> {
        Mode::ALL
            .into_iter()
            .find(|m| m.keyword() == s)
            .ok_or_else(|| format!("unknown mode `{s}`"))
    }
}

impl fmt::Display for Mode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.keyword())
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct PlanStep {
    pub mode: Mode,
    pub gate: Option<String>,
    pub args: Vec<i64>,
}

impl PlanStep {
    pub fn new(mode: Mode, gate: Option<&str>, args: Vec<i64>) -> Self {
        Self {
            mode,
            gate: gate.map(str::to_owned),
            args,
        }
    }

    pub fn tag(&self) -> &str {
        self.gate.as_deref().unwrap_or("-")
    }

    fn check(&self) -> std::result::Result<(), String> {
        let nonneg = |xs: &[i64]| xs.iter().all(|&x| x >= 0);
        let neg = |xs: &[i64]| xs.iter().all(|&x| x < 0);
        let a = &self.args;
        match (self.mode, self.gate.as_deref()) {
            (Mode::Define, None) if !a.is_empty() && nonneg(a) => Ok(()),
            (Mode::Define, None) => Err("define needs non-negative arguments".into()),
            (Mode::New, Some("tensor")) => {
                if a.len() < 2 || !nonneg(a) {
                    return Err("new tensor needs L G and qubit indices".into());
                }
                let (l, g) = (a[0] as usize, a[1] as usize);
                if a.len() != 2 + l + g {
                    return Err(format!("new tensor lists {} qubits, expected {}", a.len() - 2, l + g));
                }
                Ok(())
            }
            (Mode::New, Some("cache")) => {
                if a.is_empty() || !nonneg(a) || a.len() != 1 + a[0] as usize {
                    return Err("new cache needs k followed by k qubits".into());
                }
                Ok(())
            }
            (Mode::Gate, Some(_)) if a.len() == 2 && nonneg(a) => Ok(()),
            (Mode::Gate, _) => Err("gate needs a tag and exactly two qubits".into()),
            (Mode::Entgl, Some("tensor")) if neg(a) => Ok(()),
            (Mode::Entgl, Some("EI")) if a.len() == 3 && a[0] >= 0 && neg(&a[1..]) => Ok(()),
            (Mode::Entgl, Some("E2Q")) if a.len() == 4 && nonneg(&a[..2]) && neg(&a[2..]) => {
                Ok(())
            }
            (Mode::Entgl, _) => Err("malformed entgl line".into()),
            (Mode::All2All, None) if !a.is_empty() && a[0] <= 0 && nonneg(&a[1..]) => Ok(()),
            (Mode::All2All, None) => Err("all2all needs a weight exponent <= 0 and qubits".into()),
            (Mode::Slice | Mode::Write | Mode::Read, None) if !a.is_empty() && nonneg(a) => Ok(()),
            (Mode::Slice | Mode::Write | Mode::Read, None) => {
                Err(format!("{} needs a non-empty qubit list", self.mode))
            }
            (mode, Some(tag)) => Err(format!("unexpected gate column `{tag}` for {mode}")),
            (mode, None) => Err(format!("{mode} needs a gate column")),
        }
    }
}

impl fmt::Display for PlanStep {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{} {}", self.mode, self.tag())?;
        for a in &self.args {
            write!(f, " {a}")?;
        }
        Ok(())
    }
}

/// Qubit count and disk-index qubits from the two define lines.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct PlanHeader {
    pub n_qubits: usize,
    pub index_qubits: Vec<usize>,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct SimulationPlan {
    header: PlanHeader,
    steps: Vec<PlanStep>,
}

impl SimulationPlan {
    /// Builds a plan from its header and body steps (everything after the two
    /// define lines).
    pub fn new(header: PlanHeader, body: Vec<PlanStep>) -> Result<Self> {
        let mut steps = vec![
            PlanStep::new(Mode::Define, None, vec![header.n_qubits as i64]),
            PlanStep::new(
                Mode::Define,
                None,
                header.index_qubits.iter().map(|&q| q as i64).collect(),
            ),
        ];
        steps.extend(body);
        for (i, s) in steps.iter().enumerate() {
            s.check().map_err(|message| Error::PlanParse { line: i + 1, message })?;
        }
        Ok(Self { header, steps })
    }

    pub fn header(&self) -> &PlanHeader {
        &self.header
    }

    pub fn n_qubits(&self) -> usize {
        self.header.n_qubits
    }

    /// All steps, including the two define lines. Step numbers used in error
    /// reports are 1-based indices into this list.
    pub fn steps(&self) -> &[PlanStep] {
        &self.steps
    }

    pub fn body(&self) -> &[PlanStep] {
        &self.steps[2..]
    }

    pub fn load(path: &Path) -> Result<Self> {
        parse_plan(&std::fs::read_to_string(path)?)
    }
}

/// Parses the listing grammar. Comments start with `#`; blank lines are
/// skipped. Line numbers in errors refer to the source text.
pub fn parse_plan(text: &str) -> Result<SimulationPlan> {
    let mut steps = Vec::new();
    for (i, raw) in text.lines().enumerate() {
        let line = raw.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        let err = |message: String| Error::PlanParse { line: i + 1, message };
        let mut fields = line.split_whitespace();
        let mode: Mode = fields.next().unwrap_or_default().parse().map_err(err)?;
        let gate = fields
            .next()
            .ok_or_else(|| err("missing gate column".into()))?;
        let gate = match gate {
            "-" | "\u{2014}" | "\u{2013}" => None,
            g => Some(g.to_owned()),
        };
        let args = fields
            .map(|f| {
                f.parse::<i64>()
                    .map_err(|_| err(format!("non-integer argument `{f}`")))
            })
            .collect::<Result<Vec<_>>>()?;
        let step = PlanStep { mode, gate, args };
        step.check().map_err(err)?;
        steps.push((i + 1, step));
    }
    let header_err = |line| Error::PlanParse {
        line,
        message: "plan must start with two define lines".into(),
    };
    match steps.as_slice() {
        [(_, a), (_, b), ..] if a.mode == Mode::Define && b.mode == Mode::Define => {
            if a.args.len() != 1 {
                return Err(Error::PlanParse {
                    line: steps[0].0,
                    message: "first define line takes only the qubit count".into(),
                });
            }
            let n = a.args[0] as usize;
            let index_qubits: Vec<usize> = b.args.iter().map(|&q| q as usize).collect();
            if let Some(&q) = index_qubits.iter().find(|&&q| q >= n) {
                return Err(Error::PlanParse {
                    line: steps[1].0,
                    message: format!("index qubit {q} outside {n} qubits"),
                });
            }
            if let Some((line, _)) = steps[2..].iter().find(|(_, s)| s.mode == Mode::Define) {
                return Err(Error::PlanParse {
                    line: *line,
                    message: "define only allowed in the header".into(),
                });
            }
            Ok(SimulationPlan {
                header: PlanHeader { n_qubits: n, index_qubits },
                steps: steps.into_iter().map(|(_, s)| s).collect(),
            })
        }
        [] => Err(header_err(1)),
        [(line, _), ..] => Err(header_err(*line)),
    }
}

/// Canonical text: one step per line, single spaces, `-` for an empty gate
/// column, trailing newline.
pub fn emit_plan(plan: &SimulationPlan) -> String {
    let mut out = String::new();
    for s in &plan.steps {
        out.push_str(&s.to_string());
        out.push('\n');
    }
    out
}

impl fmt::Display for SimulationPlan {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&emit_plan(self))
    }
}

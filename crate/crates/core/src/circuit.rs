//! Sycamore-class random circuits: qubit layouts with ABCD coupling patterns,
//! fSim-style two-qubit gates, random `{√X, √Y, √W}` single-qubit layers and
//! merging of single-qubit gates into their two-qubit neighbours.

use std::collections::BTreeMap;
use std::fmt;
use std::path::Path;
use std::str::FromStr;

use num_complex::Complex64 as C64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::{Matrix, I, ONE, ZERO};

/// Tolerance used when checking emitted gate matrices for unitarity.
pub const UNITARY_TOL: f64 = 1e-12;

/// Coupling pattern label of a two-qubit layer.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum Pattern {
    A,
    B,
    C,
    D,
}

impl Pattern {
    pub const ALL: [Pattern; 4] = [Pattern::A, Pattern::B, Pattern::C, Pattern::D];

    /// Pattern used by two-qubit layer `cycle` (1-based) in the ABCDCDAB sequence.
    pub fn for_cycle(cycle: usize) -> Pattern {
        use Pattern::*;
        const SEQUENCE: [Pattern; 8] = [A, B, C, D, C, D, A, B];
        SEQUENCE[(cycle - 1) % 8]
    }
}

impl fmt::Display for Pattern {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{self:?}")
    }
}

impl FromStr for Pattern {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "A" => Ok(Pattern::A),
            "B" => Ok(Pattern::B),
            "C" => Ok(Pattern::C),
            "D" => Ok(Pattern::D),
            other => Err(Error::Layout(format!("unknown pattern label `{other}`"))),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct Coupling {
    pub a: usize,
    pub b: usize,
    pub pattern: Pattern,
}

/// Physical qubit arrangement with labelled couplings.
#[derive(Clone, Debug, PartialEq)]
pub struct QubitLayout {
    n_qubits: usize,
    couplings: Vec<Coupling>,
    coords: Option<Vec<(i64, i64)>>,
}

#[derive(Serialize, Deserialize)]
struct LayoutFile {
    n_qubits: usize,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    coords: Option<Vec<[i64; 2]>>,
    patterns: BTreeMap<String, Vec<[usize; 2]>>,
}

impl QubitLayout {
    pub fn new(
        n_qubits: usize,
        couplings: Vec<Coupling>,
        coords: Option<Vec<(i64, i64)>>,
    ) -> Result<Self> {
        if n_qubits == 0 {
            return Err(Error::Layout("layout has no qubits".into()));
        }
        if let Some(c) = &coords {
            if c.len() != n_qubits {
                return Err(Error::Layout(format!(
                    "{} coordinates for {n_qubits} qubits",
                    c.len()
                )));
            }
        }
        let mut used: BTreeMap<(Pattern, usize), usize> = BTreeMap::new();
        for (i, c) in couplings.iter().enumerate() {
            if c.a >= n_qubits || c.b >= n_qubits {
                return Err(Error::Layout(format!(
                    "coupling ({}, {}) outside [0, {n_qubits})",
                    c.a, c.b
                )));
            }
            if c.a == c.b {
                return Err(Error::Layout(format!("self-coupling on qubit {}", c.a)));
            }
            for q in [c.a, c.b] {
                if let Some(prev) = used.insert((c.pattern, q), i) {
                    let p = couplings[prev];
                    return Err(Error::Layout(format!(
                        "qubit {q} appears in ({}, {}) and ({}, {}) of pattern {}",
                        p.a, p.b, c.a, c.b, c.pattern
                    )));
                }
            }
        }
        Ok(Self {
            n_qubits,
            couplings,
            coords,
        })
    }

    /// Staggered lattice in the Sycamore style: `rows` rows of `cols` qubits,
    /// qubit `r * cols + c`, each qubit coupled to its two diagonal
    /// neighbours in the next row. The four patterns split the two diagonal
    /// directions into alternating matchings, with the parity shifted along
    /// each diagonal chain.
    pub fn sycamore_like(rows: usize, cols: usize) -> Result<Self> {
        let id = |r: usize, c: usize| r * cols + c;
        let mut couplings = Vec::new();
        for r in 0..rows.saturating_sub(1) {
            for c in 0..cols {
                let x = (2 * c + r % 2) as i64;
                let r_i = r as i64;
                // down-right neighbour
                let dr = if r % 2 == 0 { Some(c) } else { (c + 1 < cols).then_some(c + 1) };
                if let Some(c2) = dr {
                    let chain = (x - r_i).div_euclid(2);
                    let pattern = if (r_i + chain).rem_euclid(2) == 0 {
                        Pattern::A
                    } else {
                        Pattern::B
                    };
                    couplings.push(Coupling {
                        a: id(r, c),
                        b: id(r + 1, c2),
                        pattern,
                    });
                }
                // down-left neighbour
                let dl = if r % 2 == 0 { c.checked_sub(1) } else { Some(c) };
                if let Some(c2) = dl {
                    let chain = (x + r_i).div_euclid(2);
                    let pattern = if (r_i + chain).rem_euclid(2) == 0 {
                        Pattern::C
                    } else {
                        Pattern::D
                    };
                    couplings.push(Coupling {
                        a: id(r, c),
                        b: id(r + 1, c2),
                        pattern,
                    });
                }
            }
        }
        couplings.sort_by_key(|c| (c.a, c.b));
        let coords = (0..rows * cols)
            .map(|q| ((q / cols) as i64, (q % cols) as i64))
            .collect();
        Self::new(rows * cols, couplings, Some(coords))
    }

    /// Keeps qubits `0..n` and the couplings among them.
    pub fn truncated(&self, n: usize) -> Result<Self> {
        let couplings = self
            .couplings
            .iter()
            .copied()
            .filter(|c| c.a < n && c.b < n)
            .collect();
        let coords = self.coords.as_ref().map(|c| c[..n.min(c.len())].to_vec());
        Self::new(n, couplings, coords)
    }

    pub fn n_qubits(&self) -> usize {
        self.n_qubits
    }

    pub fn couplings(&self) -> &[Coupling] {
        &self.couplings
    }

    pub fn coords(&self) -> Option<&[(i64, i64)]> {
        self.coords.as_deref()
    }

    pub fn pattern(&self, p: Pattern) -> impl Iterator<Item = &Coupling> {
        self.couplings.iter().filter(move |c| c.pattern == p)
    }

    pub fn are_coupled(&self, a: usize, b: usize) -> bool {
        self.couplings
            .iter()
            .any(|c| (c.a == a && c.b == b) || (c.a == b && c.b == a))
    }

    pub fn from_toml_str(text: &str) -> Result<Self> {
        let file: LayoutFile = toml::from_str(text)?;
        let mut couplings = Vec::new();
        for (label, pairs) in &file.patterns {
            let pattern: Pattern = label.parse()?;
            couplings.extend(pairs.iter().map(|&[a, b]| Coupling { a, b, pattern }));
        }
        let coords = file
            .coords
            .map(|c| c.into_iter().map(|[r, c]| (r, c)).collect());
        Self::new(file.n_qubits, couplings, coords)
    }

    pub fn to_toml_string(&self) -> Result<String> {
        let mut patterns = BTreeMap::new();
        for p in Pattern::ALL {
            let pairs: Vec<[usize; 2]> = self.pattern(p).map(|c| [c.a, c.b]).collect();
            patterns.insert(p.to_string(), pairs);
        }
        let file = LayoutFile {
            n_qubits: self.n_qubits,
            coords: self
                .coords
                .as_ref()
                .map(|c| c.iter().map(|&(r, c)| [r, c]).collect()),
            patterns,
        };
        Ok(toml::to_string(&file)?)
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        Self::from_toml_str(&std::fs::read_to_string(path)?)
    }
}

/// Parameters of the fSim-type two-qubit unitary (angles in radians).
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct GateParams {
    pub theta: f64,
    pub phi: f64,
    pub delta_plus: f64,
    pub delta_minus: f64,
    pub delta_minus_off: f64,
}

impl GateParams {
    /// Nominal Sycamore angles, no detuning.
    pub fn nominal() -> Self {
        Self {
            theta: std::f64::consts::FRAC_PI_2,
            phi: std::f64::consts::FRAC_PI_6,
            delta_plus: 0.0,
            delta_minus: 0.0,
            delta_minus_off: 0.0,
        }
    }

    pub fn is_finite(&self) -> bool {
        [
            self.theta,
            self.phi,
            self.delta_plus,
            self.delta_minus,
            self.delta_minus_off,
        ]
        .iter()
        .all(|x| x.is_finite())
    }
}

fn cis(x: f64) -> C64 {
    C64::from_polar(1.0, x)
}

/// The detuned fSim unitary in the basis |00>, |01>, |10>, |11>, first operand
/// most significant.
pub fn fsim_unitary(p: &GateParams) -> Matrix {
    let (s, c) = p.theta.sin_cos();
    let mut m = Matrix::zeros(4);
    m[(0, 0)] = ONE;
    m[(1, 1)] = cis(p.delta_plus + p.delta_minus) * c;
    m[(1, 2)] = -I * cis(p.delta_plus - p.delta_minus_off) * s;
    m[(2, 1)] = -I * cis(p.delta_plus + p.delta_minus_off) * s;
    m[(2, 2)] = cis(p.delta_plus - p.delta_minus) * c;
    m[(3, 3)] = cis(2.0 * p.delta_plus - p.phi);
    m
}

/// Single-qubit gate family of the random layers.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum SqrtKind {
    X,
    Y,
    W,
}

impl SqrtKind {
    pub const ALL: [SqrtKind; 3] = [SqrtKind::X, SqrtKind::Y, SqrtKind::W];

    pub fn name(self) -> &'static str {
        match self {
            SqrtKind::X => "sqrt_x",
            SqrtKind::Y => "sqrt_y",
            SqrtKind::W => "sqrt_w",
        }
    }
}

impl FromStr for SqrtKind {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_uppercase().trim_start_matches("SQRT_") {
            "X" => Ok(SqrtKind::X),
            "Y" => Ok(SqrtKind::Y),
            "W" => Ok(SqrtKind::W),
            _ => Err(Error::InvalidGateKind(s.to_string())),
        }
    }
}

/// Pauli-type involutions used to build the square-root gates.
pub mod std_gates {
    use super::*;

    pub fn pauli_x() -> Matrix {
        Matrix::from_rows(2, vec![ZERO, ONE, ONE, ZERO])
    }

    pub fn pauli_y() -> Matrix {
        Matrix::from_rows(2, vec![ZERO, -I, I, ZERO])
    }

    pub fn pauli_z() -> Matrix {
        Matrix::from_rows(2, vec![ONE, ZERO, ZERO, -ONE])
    }

    /// `W = (X + Y) / √2`.
    pub fn pauli_w() -> Matrix {
        let s = std::f64::consts::FRAC_1_SQRT_2;
        let e = C64::new(s, 0.0);
        Matrix::from_rows(2, vec![ZERO, e * (ONE - I), e * (ONE + I), ZERO])
    }

    pub fn hadamard() -> Matrix {
        let s = C64::new(std::f64::consts::FRAC_1_SQRT_2, 0.0);
        Matrix::from_rows(2, vec![s, s, s, -s])
    }

    pub fn cnot() -> Matrix {
        let mut m = Matrix::zeros(4);
        m[(0, 0)] = ONE;
        m[(1, 1)] = ONE;
        m[(2, 3)] = ONE;
        m[(3, 2)] = ONE;
        m
    }

    pub fn cz() -> Matrix {
        let mut m = Matrix::identity(4);
        m[(3, 3)] = -ONE;
        m
    }

    pub fn swap() -> Matrix {
        let mut m = Matrix::zeros(4);
        m[(0, 0)] = ONE;
        m[(1, 2)] = ONE;
        m[(2, 1)] = ONE;
        m[(3, 3)] = ONE;
        m
    }
}

/// Principal square root of the involution X, Y or W:
/// `((1 + i) I + (1 - i) P) / 2`.
pub fn sqrt_gate(kind: SqrtKind) -> Matrix {
    let p = match kind {
        SqrtKind::X => std_gates::pauli_x(),
        SqrtKind::Y => std_gates::pauli_y(),
        SqrtKind::W => std_gates::pauli_w(),
    };
    let a = C64::new(0.5, 0.5);
    let b = C64::new(0.5, -0.5);
    let mut m = p.scale(b);
    for i in 0..2 {
        m[(i, i)] += a;
    }
    m
}

/// A gate instance: operands, dense unitary and the layer it sits in.
#[derive(Clone, Debug, PartialEq)]
pub struct Gate {
    pub name: String,
    pub operands: Vec<usize>,
    pub unitary: Matrix,
    pub layer: usize,
}

impl Gate {
    pub fn new(name: impl Into<String>, operands: Vec<usize>, unitary: Matrix) -> Result<Self> {
        let g = Self {
            name: name.into(),
            operands,
            unitary,
            layer: 0,
        };
        g.check()?;
        Ok(g)
    }

    pub fn with_layer(mut self, layer: usize) -> Self {
        self.layer = layer;
        self
    }

    pub fn arity(&self) -> usize {
        self.operands.len()
    }

    pub fn acts_on(&self, q: usize) -> bool {
        self.operands.contains(&q)
    }

    fn check(&self) -> Result<()> {
        let k = self.operands.len();
        if !(1..=2).contains(&k) {
            return Err(Error::Circuit(format!("gate `{}` has {k} operands", self.name)));
        }
        if k == 2 && self.operands[0] == self.operands[1] {
            return Err(Error::Circuit(format!(
                "gate `{}` repeats operand {}",
                self.name, self.operands[0]
            )));
        }
        if self.unitary.dim() != 1 << k {
            return Err(Error::Circuit(format!(
                "gate `{}` matrix is {}x{} for {k} operands",
                self.name,
                self.unitary.dim(),
                self.unitary.dim()
            )));
        }
        if !self.unitary.is_unitary(UNITARY_TOL) {
            return Err(Error::Circuit(format!("gate `{}` is not unitary", self.name)));
        }
        Ok(())
    }
}

/// Ordered layers of gates on `n_qubits` qubits.
#[derive(Clone, Debug, PartialEq)]
pub struct Circuit {
    pub n_qubits: usize,
    pub layers: Vec<Vec<Gate>>,
    /// Display coordinates inherited from the layout, if any.
    pub coords: Option<Vec<(i64, i64)>>,
}

impl Circuit {
    pub fn new(n_qubits: usize) -> Self {
        Self {
            n_qubits,
            layers: Vec::new(),
            coords: None,
        }
    }

    /// Appends a layer, checking operand ranges and disjointness.
    pub fn push_layer(&mut self, gates: Vec<Gate>) -> Result<()> {
        let layer = self.layers.len();
        let mut seen = vec![false; self.n_qubits];
        let mut out = Vec::with_capacity(gates.len());
        for g in gates {
            for &q in &g.operands {
                if q >= self.n_qubits {
                    return Err(Error::Circuit(format!(
                        "operand {q} outside [0, {})",
                        self.n_qubits
                    )));
                }
                if std::mem::replace(&mut seen[q], true) {
                    return Err(Error::Circuit(format!(
                        "qubit {q} used twice in layer {layer}"
                    )));
                }
            }
            out.push(g.with_layer(layer));
        }
        self.layers.push(out);
        Ok(())
    }

    pub fn gates(&self) -> impl Iterator<Item = &Gate> {
        self.layers.iter().flatten()
    }

    pub fn gate_count(&self) -> usize {
        self.layers.iter().map(Vec::len).sum()
    }

    pub fn is_two_qubit_only(&self) -> bool {
        self.gates().all(|g| g.arity() == 2)
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(&CircuitFile::from(self))?)
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let file: CircuitFile = serde_json::from_str(text)?;
        file.try_into()
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        std::fs::write(path, self.to_json()? + "\n")?;
        Ok(())
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        Self::from_json(&std::fs::read_to_string(path)?)
    }
}

#[derive(Serialize, Deserialize)]
struct GateRecord {
    name: String,
    operands: Vec<usize>,
    /// Row-major `[re, im]` pairs.
    matrix: Vec<[f64; 2]>,
}

#[derive(Serialize, Deserialize)]
struct CircuitFile {
    n_qubits: usize,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    coords: Option<Vec<[i64; 2]>>,
    layers: Vec<Vec<GateRecord>>,
}

impl From<&Circuit> for CircuitFile {
    fn from(c: &Circuit) -> Self {
        Self {
            n_qubits: c.n_qubits,
            coords: c
                .coords
                .as_ref()
                .map(|v| v.iter().map(|&(r, c)| [r, c]).collect()),
            layers: c
                .layers
                .iter()
                .map(|layer| {
                    layer
                        .iter()
                        .map(|g| GateRecord {
                            name: g.name.clone(),
                            operands: g.operands.clone(),
                            matrix: g.unitary.as_slice().iter().map(|z| [z.re, z.im]).collect(),
                        })
                        .collect()
                })
                .collect(),
        }
    }
}

impl TryFrom<CircuitFile> for Circuit {
    type Error = Error;
    fn try_from(f: CircuitFile) -> Result<Self> {
        let mut c = Circuit::new(f.n_qubits);
        c.coords = f.coords.map(|v| v.into_iter().map(|[r, c]| (r, c)).collect());
        for layer in f.layers {
            let gates = layer
                .into_iter()
                .map(|r| {
                    let dim = 1usize << r.operands.len();
                    if r.matrix.len() != dim * dim {
                        return Err(Error::Circuit(format!(
                            "gate `{}` has {} matrix entries",
                            r.name,
                            r.matrix.len()
                        )));
                    }
                    let data = r.matrix.iter().map(|&[re, im]| C64::new(re, im)).collect();
                    Gate::new(r.name, r.operands, Matrix::from_rows(dim, data))
                })
                .collect::<Result<Vec<_>>>()?;
            c.push_layer(gates)?;
        }
        Ok(c)
    }
}

/// Distribution of the per-gate two-qubit parameters.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct FsimSampling {
    pub theta: f64,
    pub phi: f64,
    /// Detunings are drawn uniformly from `[-detuning_range, detuning_range]`.
    pub detuning_range: f64,
}

impl Default for FsimSampling {
    fn default() -> Self {
        let nominal = GateParams::nominal();
        Self {
            theta: nominal.theta,
            phi: nominal.phi,
            detuning_range: 0.1,
        }
    }
}

/// Random ABCDCDAB circuit with default parameter sampling.
pub fn generate_sycamore(layout: &QubitLayout, cycles: usize, seed: u64) -> Result<Circuit> {
    generate_sycamore_with(layout, cycles, seed, &FsimSampling::default())
}

pub fn generate_sycamore_with(
    layout: &QubitLayout,
    cycles: usize,
    seed: u64,
    sampling: &FsimSampling,
) -> Result<Circuit> {
    if layout.n_qubits() == 0 || layout.couplings().is_empty() {
        return Err(Error::Layout("empty layout".into()));
    }
    if cycles == 0 {
        return Err(Error::Circuit("cycles must be at least 1".into()));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let n = layout.n_qubits();
    let mut circuit = Circuit::new(n);
    circuit.coords = layout.coords().map(<[_]>::to_vec);

    let single_layer = |rng: &mut ChaCha8Rng| -> Result<Vec<Gate>> {
        (0..n)
            .map(|q| {
                let kind = SqrtKind::ALL[rng.random_range(0..3)];
                Gate::new(kind.name(), vec![q], sqrt_gate(kind))
            })
            .collect()
    };

    let r = sampling.detuning_range;
    for cycle in 1..=cycles {
        let layer = single_layer(&mut rng)?;
        circuit.push_layer(layer)?;
        let pattern = Pattern::for_cycle(cycle);
        let mut gates = Vec::new();
        for c in layout.pattern(pattern) {
            let mut draw = || if r > 0.0 { rng.random_range(-r..=r) } else { 0.0 };
            let params = GateParams {
                theta: sampling.theta,
                phi: sampling.phi,
                delta_plus: draw(),
                delta_minus: draw(),
                delta_minus_off: draw(),
            };
            gates.push(Gate::new("fsim", vec![c.a, c.b], fsim_unitary(&params))?);
        }
        circuit.push_layer(gates)?;
    }
    let layer = single_layer(&mut rng)?;
    circuit.push_layer(layer)?;
    Ok(circuit)
}

/// Absorbs every single-qubit gate into the next two-qubit gate on its qubit
/// (or the previous one for trailing gates). Each two-qubit layer is split in
/// two display layers when coordinates are known: same-column couplings first,
/// then the rest.
pub fn merge_single_qubit_gates(circuit: &Circuit) -> Result<Circuit> {
    let n = circuit.n_qubits;
    let mut pending: Vec<Option<Matrix>> = vec![None; n];
    // (layer index in the output, gate) for every two-qubit gate, in order.
    let mut merged: Vec<Vec<Gate>> = Vec::new();
    let mut last_on: Vec<Option<(usize, usize)>> = vec![None; n];

    for layer in &circuit.layers {
        let mut out = Vec::new();
        for g in layer {
            match g.arity() {
                1 => {
                    let q = g.operands[0];
                    pending[q] = Some(match pending[q].take() {
                        Some(p) => g.unitary.matmul(&p),
                        None => g.unitary.clone(),
                    });
                }
                2 => {
                    let (q0, q1) = (g.operands[0], g.operands[1]);
                    let p0 = pending[q0].take().unwrap_or_else(|| Matrix::identity(2));
                    let p1 = pending[q1].take().unwrap_or_else(|| Matrix::identity(2));
                    let mut g = g.clone();
                    g.unitary = g.unitary.matmul(&p0.kron(&p1));
                    out.push(g);
                }
                k => return Err(Error::Circuit(format!("cannot merge a {k}-qubit gate"))),
            }
        }
        if !out.is_empty() {
            let li = merged.len();
            for (gi, g) in out.iter().enumerate() {
                for &q in &g.operands {
                    last_on[q] = Some((li, gi));
                }
            }
            merged.push(out);
        }
    }

    for q in 0..n {
        if let Some(p) = pending[q].take() {
            let (li, gi) = last_on[q].ok_or(Error::UnmergeableGate { qubit: q })?;
            let g = &mut merged[li][gi];
            let left = if g.operands[0] == q {
                p.kron(&Matrix::identity(2))
            } else {
                Matrix::identity(2).kron(&p)
            };
            g.unitary = left.matmul(&g.unitary);
        }
    }

    let mut result = Circuit::new(n);
    result.coords = circuit.coords.clone();
    for layer in merged {
        match &circuit.coords {
            Some(coords) => {
                let (same_col, other): (Vec<Gate>, Vec<Gate>) = layer
                    .into_iter()
                    .partition(|g| coords[g.operands[0]].1 == coords[g.operands[1]].1);
                for part in [same_col, other] {
                    if !part.is_empty() {
                        result.push_layer(part)?;
                    }
                }
            }
            None => result.push_layer(layer)?,
        }
    }
    Ok(result)
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::{FRAC_PI_2, FRAC_PI_6};

    #[test]
    fn fsim_zero_params_is_identity() {
        let p = GateParams {
            theta: 0.0,
            phi: 0.0,
            delta_plus: 0.0,
            delta_minus: 0.0,
            delta_minus_off: 0.0,
        };
        assert!(fsim_unitary(&p).max_abs_diff(&Matrix::identity(4)) < 1e-15);
    }

    #[test]
    fn fsim_nominal_entries() {
        let u = fsim_unitary(&GateParams::nominal());
        assert!((u[(1, 2)] - (-I)).norm() < 1e-15);
        assert!((u[(2, 1)] - (-I)).norm() < 1e-15);
        assert!(u[(1, 1)].norm() < 1e-15);
        assert!(u[(2, 2)].norm() < 1e-15);
        assert!((u[(3, 3)] - cis(-FRAC_PI_6)).norm() < 1e-15);
        assert_eq!(u[(0, 0)], ONE);
        let _ = FRAC_PI_2;
    }

    #[test]
    fn fsim_random_params_unitary() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        for _ in 0..100 {
            let mut d = || rng.random_range(-3.2..3.2);
            let p = GateParams {
                theta: d(),
                phi: d(),
                delta_plus: d(),
                delta_minus: d(),
                delta_minus_off: d(),
            };
            assert!(fsim_unitary(&p).unitarity_error() <= 1e-12);
        }
    }

    #[test]
    fn sqrt_gates_square_to_paulis() {
        let cases = [
            (SqrtKind::X, std_gates::pauli_x()),
            (SqrtKind::Y, std_gates::pauli_y()),
            (SqrtKind::W, std_gates::pauli_w()),
        ];
        for (kind, pauli) in cases {
            let s = sqrt_gate(kind);
            assert!(s.matmul(&s).max_abs_diff(&pauli) < 1e-12, "{kind:?}");
            assert!(s.is_unitary(1e-12));
        }
    }

    #[test]
    fn sqrt_w_is_phase_of_sycamore_convention() {
        // (1/√2)[[1, -√i], [√-i, 1]] times e^{iπ/4}.
        let h = std::f64::consts::FRAC_1_SQRT_2;
        let sq_i = cis(std::f64::consts::FRAC_PI_4);
        let conv = Matrix::from_rows(
            2,
            vec![ONE * h, -sq_i * h, sq_i.conj() * h, ONE * h],
        );
        assert!(conv.scale(sq_i).max_abs_diff(&sqrt_gate(SqrtKind::W)) < 1e-15);
    }

    #[test]
    fn invalid_kind_is_rejected() {
        assert!("Z".parse::<SqrtKind>().is_err());
        assert_eq!("sqrt_w".parse::<SqrtKind>().unwrap(), SqrtKind::W);
    }

    #[test]
    fn layout_rejects_non_matching_pattern() {
        let c = vec![
            Coupling { a: 0, b: 1, pattern: Pattern::A },
            Coupling { a: 1, b: 2, pattern: Pattern::A },
        ];
        assert!(QubitLayout::new(3, c, None).is_err());
        let c = vec![Coupling { a: 1, b: 1, pattern: Pattern::B }];
        assert!(QubitLayout::new(3, c, None).is_err());
        let c = vec![Coupling { a: 0, b: 5, pattern: Pattern::B }];
        assert!(QubitLayout::new(3, c, None).is_err());
    }

    #[test]
    fn sycamore_like_patterns_mix_orientations() {
        let layout = QubitLayout::sycamore_like(9, 6).unwrap();
        let coords = layout.coords().unwrap();
        for p in Pattern::ALL {
            let vertical = layout
                .pattern(p)
                .filter(|c| coords[c.a].1 == coords[c.b].1)
                .count();
            let total = layout.pattern(p).count();
            assert!(vertical > 0 && vertical < total, "{p}: {vertical}/{total}");
        }
    }

    #[test]
    fn layout_toml_round_trip() {
        let layout = QubitLayout::sycamore_like(3, 4).unwrap();
        let text = layout.to_toml_string().unwrap();
        let back = QubitLayout::from_toml_str(&text).unwrap();
        assert_eq!(back.n_qubits(), 12);
        let mut a: Vec<_> = layout.couplings().iter().map(|c| (c.a, c.b, c.pattern)).collect();
        let mut b: Vec<_> = back.couplings().iter().map(|c| (c.a, c.b, c.pattern)).collect();
        a.sort();
        b.sort();
        assert_eq!(a, b);
    }

    #[test]
    fn generation_structure() {
        let layout = QubitLayout::sycamore_like(4, 4).unwrap();
        let c = generate_sycamore(&layout, 20, 3).unwrap();
        assert_eq!(c.layers.len(), 41);
        assert_eq!(c, generate_sycamore(&layout, 20, 3).unwrap());
        assert_ne!(c, generate_sycamore(&layout, 20, 4).unwrap());
        assert!(generate_sycamore(&layout, 0, 3).is_err());
        let expected = "ABCDCDAB";
        for k in 1..=8 {
            let layer = &c.layers[2 * k - 1];
            let pattern: Pattern = expected[k - 1..k].parse().unwrap();
            let mut got: Vec<_> = layer.iter().map(|g| (g.operands[0], g.operands[1])).collect();
            let mut want: Vec<_> = layout.pattern(pattern).map(|c| (c.a, c.b)).collect();
            got.sort();
            want.sort();
            assert_eq!(got, want, "cycle {k}");
        }
    }

    #[test]
    fn merge_two_qubit_example() {
        let mut c = Circuit::new(2);
        c.push_layer(vec![Gate::new("sqrt_x", vec![1], sqrt_gate(SqrtKind::X)).unwrap()])
            .unwrap();
        let f = fsim_unitary(&GateParams::nominal());
        c.push_layer(vec![Gate::new("fsim", vec![0, 1], f.clone()).unwrap()])
            .unwrap();
        let m = merge_single_qubit_gates(&c).unwrap();
        assert_eq!(m.gate_count(), 1);
        let expected = f.matmul(&Matrix::identity(2).kron(&sqrt_gate(SqrtKind::X)));
        assert!(m.layers[0][0].unitary.max_abs_diff(&expected) < 1e-15);
    }

    #[test]
    fn merge_without_single_qubit_gates_is_identity() {
        let mut c = Circuit::new(3);
        let f = fsim_unitary(&GateParams::nominal());
        c.push_layer(vec![Gate::new("fsim", vec![0, 1], f.clone()).unwrap()]).unwrap();
        c.push_layer(vec![Gate::new("fsim", vec![1, 2], f).unwrap()]).unwrap();
        assert_eq!(merge_single_qubit_gates(&c).unwrap(), c);
    }

    #[test]
    fn merge_rejects_isolated_single_qubit_gate() {
        let mut c = Circuit::new(3);
        c.push_layer(vec![Gate::new("sqrt_y", vec![2], sqrt_gate(SqrtKind::Y)).unwrap()])
            .unwrap();
        let f = fsim_unitary(&GateParams::nominal());
        c.push_layer(vec![Gate::new("fsim", vec![0, 1], f).unwrap()]).unwrap();
        assert!(matches!(
            merge_single_qubit_gates(&c),
            Err(Error::UnmergeableGate { qubit: 2 })
        ));
    }

    #[test]
    fn circuit_json_round_trip() {
        let layout = QubitLayout::sycamore_like(2, 3).unwrap();
        let c = generate_sycamore(&layout, 3, 11).unwrap();
        let back = Circuit::from_json(&c.to_json().unwrap()).unwrap();
        assert_eq!(back, c);
    }
}

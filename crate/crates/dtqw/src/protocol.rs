//! Coin and shift elements, the protocol registry, and Floquet-unitary assembly.

use std::collections::BTreeMap;
use std::f64::consts::FRAC_PI_2;
use std::fmt;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::{pauli_exp, tau_sigma, ComplexMatrix, PauliVector, C64};

/// Rotation-angle label of a coin.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Symbol {
    Alpha,
    Beta,
    Gamma,
    Zeta,
}

impl Symbol {
    pub const ALL: [Symbol; 4] = [Symbol::Alpha, Symbol::Beta, Symbol::Gamma, Symbol::Zeta];

    pub fn name(self) -> &'static str {
        match self {
            Symbol::Alpha => "alpha",
            Symbol::Beta => "beta",
            Symbol::Gamma => "gamma",
            Symbol::Zeta => "zeta",
        }
    }

    pub fn parse(s: &str) -> Result<Symbol> {
        match s.trim() {
            "alpha" | "α" => Ok(Symbol::Alpha),
            "beta" | "β" => Ok(Symbol::Beta),
            "gamma" | "γ" => Ok(Symbol::Gamma),
            "zeta" | "ζ" => Ok(Symbol::Zeta),
            other => Err(Error::InvalidInput(format!("unknown angle symbol `{other}`"))),
        }
    }
}

impl fmt::Display for Symbol {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

/// Coin rotation axis.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum CoinAxis {
    /// (0, 1, 0)
    Y,
    /// (0, 1/√2, 1/√2)
    Nu,
}

impl CoinAxis {
    pub fn vector(self) -> PauliVector {
        match self {
            CoinAxis::Y => PauliVector::Y,
            CoinAxis::Nu => PauliVector::NU,
        }
    }
}

/// Momentum-space form of a conditional shift with phase p = c·k.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ShiftForm {
    /// exp(i p σ_z): both spin components move.
    UpDown,
    /// exp(i p/2 (σ_z + 1)): only spin-down moves.
    Down,
    /// exp(i p/2 (σ_z − 1)): only spin-up moves.
    Up,
}

/// One factor of a protocol.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum Element {
    Coin { axis: CoinAxis, angle: Symbol },
    Shift { form: ShiftForm, coeffs: [i32; 3] },
}

impl Element {
    /// Matrix of the element at momentum k; `scale` multiplies coin angles.
    fn matrix(&self, k: &[f64], angles: &BTreeMap<Symbol, f64>, scale: f64) -> Result<ComplexMatrix> {
        match *self {
            Element::Coin { axis, angle } => {
                let theta = angles
                    .get(&angle)
                    .ok_or_else(|| Error::InvalidInput(format!("angle `{angle}` not set")))?;
                pauli_exp(axis.vector(), scale * theta)
            }
            Element::Shift { form, coeffs } => {
                let mut p = 0.0;
                for (c, ki) in coeffs.iter().zip(k.iter().chain(std::iter::repeat(&0.0))) {
                    if *c != 0 {
                        p += f64::from(*c) * ki;
                    }
                }
                let e = |x: f64| C64::from_polar(1.0, x);
                let one = C64::new(1.0, 0.0);
                let d = match form {
                    ShiftForm::UpDown => [e(p), e(-p)],
                    ShiftForm::Down => [e(p), one],
                    ShiftForm::Up => [one, e(-p)],
                };
                ComplexMatrix::diag(&d)
            }
        }
    }
}

/// Flavor doubling of a two-band protocol into four bands.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Doubling {
    None,
    /// block-diag(U, Uᵗ)
    TransposeBlock,
    /// block-diag(U, U*)
    ConjugateBlock,
    /// block-diag(U, 1)·exp(−i τ_y σ_y φ/2)·block-diag(1, Uᵗ)
    TrsSandwich { phi: f64 },
}

/// How coin angles enter the coin matrices.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CoinScaling {
    /// Rotation angle T·θ.
    StepDependent,
    /// Rotation angle θ regardless of T.
    StepIndependent,
}

/// Default flavor-mixing angle of the sandwich construction.
pub const DEFAULT_PHI: f64 = FRAC_PI_2;

/// A fully specified walk protocol. Elements are stored in application order
/// (the first element acts first).
#[derive(Clone, Debug, PartialEq)]
pub struct ProtocolSpec {
    pub id: String,
    pub dimension: usize,
    pub elements: Vec<Element>,
    pub steps: u32,
    pub angles: BTreeMap<Symbol, f64>,
    pub doubled: Doubling,
    /// Coin-angle scaling used by `build_unitary`.
    pub scaling: CoinScaling,
}

fn coin(axis: CoinAxis, angle: Symbol) -> Element {
    Element::Coin { axis, angle }
}

fn shift(form: ShiftForm, coeffs: [i32; 3]) -> Element {
    Element::Shift { form, coeffs }
}

const X: [i32; 3] = [1, 0, 0];
const Y: [i32; 3] = [0, 1, 0];
const Z: [i32; 3] = [0, 0, 1];
const XY: [i32; 3] = [1, 1, 0];
const XYZ: [i32; 3] = [1, 1, 1];

/// Registered protocol identifiers, in catalog order.
pub const REGISTRY: [&str; 22] = [
    "1d-simple", "1d-split", "1d-phs", "1d-diii", "1d-chs", "1d-cii", "2d-simple", "2d-split", "2d-phs",
    "2d-diii", "2d-nosym", "2d-aii", "2d-c", "3d-simple", "3d-split", "3d-phs", "3d-diii", "3d-chs", "3d-cii",
    "3d-nosym", "3d-aii", "3d-c",
];

/// Two-band protocol underlying a doubled one, and the doubling used.
fn doubling_of(id: &str) -> Option<(&'static str, Doubling)> {
    let sandwich = Doubling::TrsSandwich { phi: DEFAULT_PHI };
    Some(match id {
        "1d-diii" => ("1d-phs", Doubling::TransposeBlock),
        "1d-cii" => ("1d-chs", Doubling::TransposeBlock),
        "2d-diii" => ("2d-phs", Doubling::TransposeBlock),
        "2d-aii" => ("2d-nosym", sandwich),
        "2d-c" => ("2d-nosym", Doubling::ConjugateBlock),
        "3d-diii" => ("3d-phs", Doubling::TransposeBlock),
        "3d-cii" => ("3d-chs", Doubling::TransposeBlock),
        "3d-aii" => ("3d-nosym", sandwich),
        "3d-c" => ("3d-nosym", Doubling::ConjugateBlock),
        _ => return None,
    })
}

fn base_elements(id: &str) -> Option<(usize, Vec<Element>)> {
    use CoinAxis::{Nu, Y as Cy};
    use ShiftForm::{Down, Up, UpDown};
    use Symbol::{Alpha as A, Beta as B, Gamma as G, Zeta as Zt};
    let els = match id {
        "1d-simple" => (1, vec![coin(Cy, B), shift(Down, X), shift(Up, X)]),
        "1d-split" => (1, vec![coin(Cy, B), shift(Down, X), coin(Cy, A), shift(Up, X)]),
        "1d-phs" => (1, vec![shift(UpDown, X), coin(Cy, B), shift(Down, X), coin(Cy, A), shift(Up, X)]),
        "1d-chs" => (1, vec![coin(Nu, B), shift(Down, X), coin(Nu, A), shift(Up, X)]),
        "2d-simple" => (2, vec![coin(Cy, B), shift(UpDown, XY)]),
        "2d-split" => (2, vec![coin(Cy, B), shift(UpDown, X), coin(Cy, A), shift(UpDown, Y)]),
        "2d-phs" => (
            2,
            vec![coin(Cy, B), shift(UpDown, XY), coin(Cy, A), shift(UpDown, Y), coin(Cy, B), shift(UpDown, X)],
        ),
        "2d-nosym" => (
            2,
            vec![coin(Cy, B), shift(UpDown, XY), coin(Nu, A), shift(UpDown, X), coin(Cy, G), shift(UpDown, Y)],
        ),
        "3d-simple" => (3, vec![coin(Cy, B), shift(UpDown, X), shift(UpDown, Y), shift(UpDown, Z)]),
        "3d-split" => (
            3,
            vec![coin(Cy, B), shift(UpDown, X), coin(Cy, A), shift(UpDown, Y), coin(Cy, G), shift(UpDown, Z)],
        ),
        "3d-phs" => (
            3,
            vec![
                coin(Cy, B),
                shift(UpDown, XYZ),
                coin(Cy, A),
                shift(UpDown, X),
                coin(Cy, G),
                shift(UpDown, Y),
                coin(Cy, Zt),
                shift(UpDown, Z),
            ],
        ),
        "3d-chs" => (
            3,
            vec![coin(Nu, B), shift(UpDown, X), coin(Nu, A), shift(UpDown, Y), coin(Nu, G), shift(UpDown, Z)],
        ),
        "3d-nosym" => (
            3,
            vec![
                coin(Cy, B),
                shift(UpDown, XYZ),
                coin(Nu, A),
                shift(UpDown, X),
                coin(Cy, G),
                shift(UpDown, Y),
                coin(Cy, Zt),
                shift(UpDown, Z),
            ],
        ),
        _ => return None,
    };
    Some(els)
}

/// Template for a registered protocol: T = 1, all used angles zero.
pub fn registry_lookup(id: &str) -> Result<ProtocolSpec> {
    let (base_id, doubled) = doubling_of(id).unwrap_or((id, Doubling::None));
    let (dimension, elements) = base_elements(base_id).ok_or_else(|| Error::UnknownProtocol {
        id: id.to_string(),
        valid: REGISTRY.join(", "),
    })?;
    let angles = used_symbols(&elements).into_iter().map(|s| (s, 0.0)).collect();
    Ok(ProtocolSpec { id: id.to_string(), dimension, elements, steps: 1, angles, doubled, scaling: CoinScaling::StepDependent })
}

fn used_symbols(elements: &[Element]) -> Vec<Symbol> {
    let mut out: Vec<Symbol> = elements
        .iter()
        .filter_map(|e| match e {
            Element::Coin { angle, .. } => Some(*angle),
            Element::Shift { .. } => None,
        })
        .collect();
    out.sort();
    out.dedup();
    out
}

impl ProtocolSpec {
    /// Protocol from an explicit element list (application order).
    pub fn custom(id: &str, dimension: usize, elements: Vec<Element>) -> Result<Self> {
        if !(1..=3).contains(&dimension) {
            return Err(Error::InvalidInput(format!("dimension {dimension} not in 1..=3")));
        }
        let angles = used_symbols(&elements).into_iter().map(|s| (s, 0.0)).collect();
        Ok(Self { id: id.to_string(), dimension, elements, steps: 1, angles, doubled: Doubling::None, scaling: CoinScaling::StepDependent })
    }

    pub fn with_steps(mut self, steps: u32) -> Self {
        self.steps = steps;
        self
    }

    /// Sets one angle; symbols the protocol does not use are rejected.
    pub fn with_angle(mut self, symbol: Symbol, value: f64) -> Result<Self> {
        match self.angles.get_mut(&symbol) {
            Some(v) => *v = value,
            None => {
                return Err(Error::InvalidInput(format!("protocol `{}` has no angle `{symbol}`", self.id)));
            }
        }
        Ok(self)
    }

    /// Sets several angles at once.
    pub fn with_angles(mut self, values: &[(Symbol, f64)]) -> Result<Self> {
        for &(s, v) in values {
            self = self.with_angle(s, v)?;
        }
        Ok(self)
    }

    pub fn with_phi(mut self, phi: f64) -> Result<Self> {
        match &mut self.doubled {
            Doubling::TrsSandwich { phi: p } => *p = phi,
            _ => return Err(Error::InvalidInput(format!("protocol `{}` has no flavor-mixing angle", self.id))),
        }
        Ok(self)
    }

    /// Angle symbols used by the coins.
    pub fn symbols(&self) -> Vec<Symbol> {
        used_symbols(&self.elements)
    }

    pub fn angle(&self, s: Symbol) -> Option<f64> {
        self.angles.get(&s).copied()
    }

    /// Number of bands (2, or 4 for doubled protocols).
    pub fn bands(&self) -> usize {
        if self.doubled == Doubling::None {
            2
        } else {
            4
        }
    }

    pub fn is_two_band(&self) -> bool {
        self.doubled == Doubling::None
    }

    /// The two-band protocol a doubled one is built from (itself if not doubled).
    pub fn base(&self) -> ProtocolSpec {
        let id = doubling_of(&self.id).map(|(b, _)| b.to_string()).unwrap_or_else(|| self.id.clone());
        ProtocolSpec { id, doubled: Doubling::None, ..self.clone() }
    }

    pub fn validate(&self) -> Result<()> {
        if self.steps < 1 {
            return Err(Error::InvalidInput("step number must be at least 1".into()));
        }
        let used = self.symbols();
        let set: Vec<Symbol> = self.angles.keys().copied().collect();
        if used != set {
            return Err(Error::InvalidInput(format!(
                "angles {:?} do not match the protocol's symbols {:?}",
                set, used
            )));
        }
        if let Some((s, v)) = self.angles.iter().find(|(_, v)| !v.is_finite()) {
            return Err(Error::InvalidInput(format!("angle `{s}` = {v} is not finite")));
        }
        if let Doubling::TrsSandwich { phi } = self.doubled {
            if !phi.is_finite() {
                return Err(Error::InvalidInput("flavor-mixing angle is not finite".into()));
            }
        }
        Ok(())
    }

    /// Copy evaluated through the step-independent coin path.
    pub fn with_scaling(mut self, scaling: CoinScaling) -> Self {
        self.scaling = scaling;
        self
    }

    /// Copy with T = 1 and angles unchanged.
    pub fn step_independent_reduction(&self) -> ProtocolSpec {
        ProtocolSpec { steps: 1, ..self.clone() }
    }

    fn check_k(&self, k: &[f64]) -> Result<()> {
        if k.len() != self.dimension {
            return Err(Error::InvalidInput(format!(
                "momentum has {} components, protocol `{}` is {}-dimensional",
                k.len(),
                self.id,
                self.dimension
            )));
        }
        if k.iter().any(|v| !v.is_finite()) {
            return Err(Error::InvalidInput(format!("momentum {k:?} is not finite")));
        }
        Ok(())
    }

    fn two_band(&self, k: &[f64], scaling: CoinScaling) -> Result<ComplexMatrix> {
        let scale = match scaling {
            CoinScaling::StepDependent => f64::from(self.steps),
            CoinScaling::StepIndependent => 1.0,
        };
        let mut u = ComplexMatrix::identity(2);
        for e in &self.elements {
            u = e.matrix(k, &self.angles, scale)? * u;
        }
        Ok(u)
    }

    /// Floquet unitary U(k).
    pub fn build_unitary(&self, k: &[f64]) -> Result<ComplexMatrix> {
        self.build_unitary_with(k, self.scaling)
    }

    /// U(k) with an explicit coin-angle scaling; `StepIndependent` is the
    /// dedicated path of the walk with step-independent coins.
    pub fn build_unitary_with(&self, k: &[f64], scaling: CoinScaling) -> Result<ComplexMatrix> {
        self.validate()?;
        self.check_k(k)?;
        let u = self.two_band(k, scaling)?;
        if self.doubled == Doubling::None {
            return Ok(u);
        }
        // Flavor-B blocks act with the transposed/conjugated position-space
        // operator, whose momentum symbol lives at −k.
        let mk: Vec<f64> = k.iter().map(|v| -v).collect();
        let um = self.two_band(&mk, scaling)?;
        let id = ComplexMatrix::identity(2);
        match self.doubled {
            Doubling::None => unreachable!(),
            Doubling::TransposeBlock => ComplexMatrix::block_diag(&u, &um.transpose()),
            Doubling::ConjugateBlock => ComplexMatrix::block_diag(&u, &um.conj()),
            Doubling::TrsSandwich { phi } => {
                let (s, c) = (phi / 2.0).sin_cos();
                let mix = ComplexMatrix::identity(4).scale(C64::from(c)) - tau_sigma(2, 2).scale(C64::new(0.0, s));
                Ok(ComplexMatrix::block_diag(&u, &id)? * mix * ComplexMatrix::block_diag(&id, &um.transpose())?)
            }
        }
    }

    pub fn to_doc(&self) -> ProtocolDoc {
        ProtocolDoc {
            id: self.id.clone(),
            steps: self.steps,
            angles: self.angles.iter().map(|(s, v)| (s.name().to_string(), *v)).collect(),
            doubled: match self.doubled {
                Doubling::None => None,
                Doubling::TransposeBlock => Some("transpose_block".into()),
                Doubling::ConjugateBlock => Some("conjugate_block".into()),
                Doubling::TrsSandwich { .. } => Some("trs_sandwich".into()),
            },
            phi: match self.doubled {
                Doubling::TrsSandwich { phi } => Some(phi),
                _ => None,
            },
        }
    }

    pub fn from_doc(doc: &ProtocolDoc) -> Result<Self> {
        let mut spec = registry_lookup(&doc.id)?.with_steps(doc.steps);
        let declared = spec.to_doc().doubled;
        if doc.doubled.is_some() && doc.doubled != declared {
            return Err(Error::Config(format!(
                "protocol `{}` is {:?}, document says {:?}",
                doc.id, declared, doc.doubled
            )));
        }
        for (name, v) in &doc.angles {
            spec = spec.with_angle(Symbol::parse(name)?, *v)?;
        }
        if let Some(phi) = doc.phi {
            spec = spec.with_phi(phi)?;
        }
        if doc.angles.len() != spec.symbols().len() {
            return Err(Error::Config(format!(
                "protocol `{}` needs angles {:?}",
                doc.id,
                spec.symbols().iter().map(|s| s.name()).collect::<Vec<_>>()
            )));
        }
        spec.validate()?;
        Ok(spec)
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(&self.to_doc()).expect("protocol document serializes")
    }

    pub fn from_toml(text: &str) -> Result<Self> {
        let doc: ProtocolDoc = toml::from_str(text).map_err(|e| Error::Config(e.to_string()))?;
        Self::from_doc(&doc)
    }
}

/// Serializable protocol description.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ProtocolDoc {
    pub id: String,
    #[serde(rename = "T")]
    pub steps: u32,
    pub angles: BTreeMap<String, f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub doubled: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub phi: Option<f64>,
}

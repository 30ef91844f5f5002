//! Architecture descriptors, parameter layout and the forward pass.
//!
//! Five architectures share one parameter-vector representation. A network
//! is a stack of hidden layers followed by a scalar output combination;
//! each hidden layer and the output are either *affine* (weight matrix) or
//! *additive* (per-source basis expansion with one coefficient per
//! (node, source, basis index)). The architecture table:
//!
//! | kind   | hidden layers                                  | output   |
//! |--------|------------------------------------------------|----------|
//! | DNN    | affine + sigma                                 | affine   |
//! | DANN   | additive + g                                   | additive |
//! | HDANN1 | additive + sigma, then affine + sigma          | affine   |
//! | HDANN2 | affine + sigma, last hidden uses g             | additive |
//! | HDANN3 | additive + sigma, affine + sigma, last uses g  | additive |
//!
//! With a single hidden layer HDANN3 collapses to the same layout and
//! forward map as DANN (the plain additive network), so its lone layer
//! applies g rather than sigma.

mod forward;
mod params;

pub use forward::{ForwardTrace, LayerTrace};
pub(crate) use forward::clamp_unit_deriv;
pub use params::{load_params, save_params, ModelIoError, ParamStore, LAYOUT_VERSION};

use crate::activation::ActivationKind;
use crate::basis::BasisFamily;
use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum NetworkKind {
    #[serde(rename = "DNN")]
    Dnn,
    #[serde(rename = "DANN")]
    Dann,
    #[serde(rename = "HDANN1")]
    Hdann1,
    #[serde(rename = "HDANN2")]
    Hdann2,
    #[serde(rename = "HDANN3")]
    Hdann3,
}

impl NetworkKind {
    pub const ALL: [NetworkKind; 5] =
        [Self::Dnn, Self::Dann, Self::Hdann1, Self::Hdann2, Self::Hdann3];

    /// Kinds other than the DNN baseline.
    pub const PROPOSED: [NetworkKind; 4] = [Self::Dann, Self::Hdann1, Self::Hdann2, Self::Hdann3];

    pub fn name(self) -> &'static str {
        match self {
            Self::Dnn => "DNN",
            Self::Dann => "DANN",
            Self::Hdann1 => "HDANN1",
            Self::Hdann2 => "HDANN2",
            Self::Hdann3 => "HDANN3",
        }
    }

    /// True when the architecture contains a basis expansion anywhere.
    pub fn uses_basis(self) -> bool {
        self != Self::Dnn
    }
}

impl std::fmt::Display for NetworkKind {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.name())
    }
}

impl std::str::FromStr for NetworkKind {
    type Err = NetworkError;

    fn from_str(s: &str) -> Result<Self, NetworkError> {
        match s.to_ascii_uppercase().as_str() {
            "DNN" => Ok(Self::Dnn),
            "DANN" => Ok(Self::Dann),
            "HDANN1" => Ok(Self::Hdann1),
            "HDANN2" => Ok(Self::Hdann2),
            "HDANN3" => Ok(Self::Hdann3),
            _ => Err(NetworkError::UnknownKind(s.to_string())),
        }
    }
}

/// Architecture descriptor. `q` and `basis` are ignored for the DNN.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct NetworkSpec {
    pub kind: NetworkKind,
    pub d: usize,
    #[serde(rename = "L")]
    pub layers: usize,
    #[serde(rename = "p")]
    pub width: usize,
    #[serde(rename = "q", default)]
    pub basis_count: usize,
    #[serde(default = "default_sigma")]
    pub sigma: ActivationKind,
    #[serde(default = "default_g")]
    pub g: ActivationKind,
    #[serde(default = "default_basis")]
    pub basis: BasisFamily,
}

fn default_sigma() -> ActivationKind {
    ActivationKind::Logistic
}

fn default_g() -> ActivationKind {
    ActivationKind::Logistic
}

fn default_basis() -> BasisFamily {
    BasisFamily::Polynomial
}

#[derive(Debug, Error)]
pub enum NetworkError {
    #[error("unknown network kind {0:?}; expected DNN, DANN, HDANN1, HDANN2 or HDANN3")]
    UnknownKind(String),
    #[error("invalid network spec: {0}")]
    InvalidSpec(String),
    #[error("input has dimension {got} but the spec requires d = {expected}")]
    DimensionMismatch { expected: usize, got: usize },
    #[error("parameter store has length {got} but the spec requires {expected}")]
    ParamLengthMismatch { expected: usize, got: usize },
}

impl NetworkSpec {
    pub fn validate(&self) -> Result<(), NetworkError> {
        if self.d == 0 {
            return Err(NetworkError::InvalidSpec("d must be >= 1".into()));
        }
        if self.layers == 0 {
            return Err(NetworkError::InvalidSpec("L must be >= 1".into()));
        }
        if self.width == 0 {
            return Err(NetworkError::InvalidSpec("p must be >= 1".into()));
        }
        if self.kind.uses_basis() && self.basis_count == 0 {
            return Err(NetworkError::InvalidSpec(format!(
                "q must be >= 1 for {}",
                self.kind
            )));
        }
        if !self.g.unit_range() {
            return Err(NetworkError::InvalidSpec(format!(
                "g must map into [0, 1]; {} does not",
                self.g
            )));
        }
        Ok(())
    }
}

/// Closed-form parameter count for a spec.
pub fn param_count(spec: &NetworkSpec) -> usize {
    let (d, l, p, q) = (spec.d, spec.layers, spec.width, spec.basis_count);
    match spec.kind {
        NetworkKind::Dnn => (d + 1) * p + (p + 1) * p * (l - 1) + p + 1,
        NetworkKind::Dann => (d * q + 1) * p + (p * q + 1) * p * (l - 1) + p * q + 1,
        NetworkKind::Hdann1 => (d * q + 1) * p + (p + 1) * p * (l - 1) + p + 1,
        NetworkKind::Hdann2 => (d + 1) * p + (p + 1) * p * (l - 1) + p * q + 1,
        NetworkKind::Hdann3 => (d * q + 1) * p + (p + 1) * p * (l - 1) + p * q + 1,
    }
}

/// How a layer combines its inputs.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum LayerOp {
    Affine,
    Additive,
}

/// One hidden layer's slice of the flat parameter vector.
#[derive(Debug, Clone, Copy)]
pub(crate) struct LayerSeg {
    pub op: LayerOp,
    pub act: ActivationKind,
    pub in_width: usize,
    pub out_width: usize,
    /// Basis count; 0 for affine layers.
    pub q: usize,
    pub coeff_off: usize,
    pub bias_off: usize,
}

impl LayerSeg {
    pub fn coeff_len(&self) -> usize {
        match self.op {
            LayerOp::Affine => self.out_width * self.in_width,
            LayerOp::Additive => self.out_width * self.in_width * self.q,
        }
    }

    /// Incoming scalar features per node, i.e. the Xavier fan-in.
    pub fn fan_in(&self) -> usize {
        match self.op {
            LayerOp::Affine => self.in_width,
            LayerOp::Additive => self.in_width * self.q,
        }
    }
}

/// The output combination's slice of the flat parameter vector.
#[derive(Debug, Clone, Copy)]
pub(crate) struct OutputSeg {
    pub op: LayerOp,
    pub in_width: usize,
    pub q: usize,
    pub coeff_off: usize,
    pub bias_off: usize,
}

impl OutputSeg {
    pub fn coeff_len(&self) -> usize {
        match self.op {
            LayerOp::Affine => self.in_width,
            LayerOp::Additive => self.in_width * self.q,
        }
    }

    pub fn fan_in(&self) -> usize {
        self.coeff_len()
    }
}

/// A named parameter slot; the layout maps each slot to a unique offset.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Slot {
    /// Affine hidden-layer weight (layer, destination node, source node).
    HiddenWeight { layer: usize, node: usize, source: usize },
    /// Additive hidden-layer coefficient; `basis` is the 1-based index r.
    HiddenCoeff { layer: usize, node: usize, source: usize, basis: usize },
    HiddenBias { layer: usize, node: usize },
    OutputWeight { node: usize },
    OutputCoeff { node: usize, basis: usize },
    OutputBias,
}

/// Offset map for one spec's flat parameter vector.
#[derive(Debug, Clone)]
pub struct ParamLayout {
    pub(crate) layers: Vec<LayerSeg>,
    pub(crate) output: OutputSeg,
    total: usize,
}

impl ParamLayout {
    pub(crate) fn new(spec: &NetworkSpec) -> ParamLayout {
        let (d, l, p, q) = (spec.d, spec.layers, spec.width, spec.basis_count);
        let (sigma, g) = (spec.sigma, spec.g);

        // (op, act) per hidden layer, per the architecture table above.
        let mut kinds: Vec<(LayerOp, ActivationKind)> = Vec::with_capacity(l);
        match spec.kind {
            NetworkKind::Dnn => {
                kinds.resize(l, (LayerOp::Affine, sigma));
            }
            NetworkKind::Dann => {
                kinds.resize(l, (LayerOp::Additive, g));
            }
            NetworkKind::Hdann1 => {
                kinds.push((LayerOp::Additive, sigma));
                kinds.resize(l, (LayerOp::Affine, sigma));
            }
            NetworkKind::Hdann2 => {
                kinds.resize(l - 1, (LayerOp::Affine, sigma));
                kinds.push((LayerOp::Affine, g));
            }
            NetworkKind::Hdann3 => {
                if l == 1 {
                    kinds.push((LayerOp::Additive, g));
                } else {
                    kinds.push((LayerOp::Additive, sigma));
                    kinds.resize(l - 1, (LayerOp::Affine, sigma));
                    kinds.push((LayerOp::Affine, g));
                }
            }
        }

        let mut offset = 0;
        let mut layers = Vec::with_capacity(l);
        for (i, &(op, act)) in kinds.iter().enumerate() {
            let in_width = if i == 0 { d } else { p };
            let seg = LayerSeg {
                op,
                act,
                in_width,
                out_width: p,
                q: if op == LayerOp::Additive { q } else { 0 },
                coeff_off: offset,
                bias_off: offset, // fixed below
            };
            let seg = LayerSeg { bias_off: offset + seg.coeff_len(), ..seg };
            offset = seg.bias_off + p;
            layers.push(seg);
        }

        let out_op = match spec.kind {
            NetworkKind::Dnn | NetworkKind::Hdann1 => LayerOp::Affine,
            _ => LayerOp::Additive,
        };
        let output = OutputSeg {
            op: out_op,
            in_width: p,
            q: if out_op == LayerOp::Additive { q } else { 0 },
            coeff_off: offset,
            bias_off: offset
                + match out_op {
                    LayerOp::Affine => p,
                    LayerOp::Additive => p * q,
                },
        };
        let total = output.bias_off + 1;

        ParamLayout { layers, output, total }
    }

    pub fn total(&self) -> usize {
        self.total
    }

    /// Offset of a named slot, or None if the slot does not exist for this
    /// layout (wrong op kind, out-of-range index).
    pub fn offset(&self, slot: &Slot) -> Option<usize> {
        match *slot {
            Slot::HiddenWeight { layer, node, source } => {
                let seg = self.layers.get(layer)?;
                if seg.op != LayerOp::Affine || node >= seg.out_width || source >= seg.in_width {
                    return None;
                }
                Some(seg.coeff_off + node * seg.in_width + source)
            }
            Slot::HiddenCoeff { layer, node, source, basis } => {
                let seg = self.layers.get(layer)?;
                if seg.op != LayerOp::Additive
                    || node >= seg.out_width
                    || source >= seg.in_width
                    || basis == 0
                    || basis > seg.q
                {
                    return None;
                }
                Some(seg.coeff_off + node * seg.in_width * seg.q + source * seg.q + basis - 1)
            }
            Slot::HiddenBias { layer, node } => {
                let seg = self.layers.get(layer)?;
                if node >= seg.out_width {
                    return None;
                }
                Some(seg.bias_off + node)
            }
            Slot::OutputWeight { node } => {
                if self.output.op != LayerOp::Affine || node >= self.output.in_width {
                    return None;
                }
                Some(self.output.coeff_off + node)
            }
            Slot::OutputCoeff { node, basis } => {
                let out = &self.output;
                if out.op != LayerOp::Additive || node >= out.in_width || basis == 0 || basis > out.q
                {
                    return None;
                }
                Some(out.coeff_off + node * out.q + basis - 1)
            }
            Slot::OutputBias => Some(self.output.bias_off),
        }
    }

    /// Every slot of the layout, in offset order.
    pub fn slots(&self) -> Vec<Slot> {
        let mut all = Vec::with_capacity(self.total);
        for (l, seg) in self.layers.iter().enumerate() {
            for node in 0..seg.out_width {
                for source in 0..seg.in_width {
                    match seg.op {
                        LayerOp::Affine => {
                            all.push(Slot::HiddenWeight { layer: l, node, source });
                        }
                        LayerOp::Additive => {
                            for basis in 1..=seg.q {
                                all.push(Slot::HiddenCoeff { layer: l, node, source, basis });
                            }
                        }
                    }
                }
            }
            for node in 0..seg.out_width {
                all.push(Slot::HiddenBias { layer: l, node });
            }
        }
        match self.output.op {
            LayerOp::Affine => {
                for node in 0..self.output.in_width {
                    all.push(Slot::OutputWeight { node });
                }
            }
            LayerOp::Additive => {
                for node in 0..self.output.in_width {
                    for basis in 1..=self.output.q {
                        all.push(Slot::OutputCoeff { node, basis });
                    }
                }
            }
        }
        all.push(Slot::OutputBias);
        all
    }
}

/// A validated spec together with its compiled parameter layout.
#[derive(Debug, Clone)]
pub struct Network {
    spec: NetworkSpec,
    layout: ParamLayout,
}

impl Network {
    pub fn new(spec: NetworkSpec) -> Result<Network, NetworkError> {
        spec.validate()?;
        let layout = ParamLayout::new(&spec);
        debug_assert_eq!(layout.total(), param_count(&spec));
        Ok(Network { spec, layout })
    }

    pub fn spec(&self) -> &NetworkSpec {
        &self.spec
    }

    pub fn layout(&self) -> &ParamLayout {
        &self.layout
    }

    pub fn param_count(&self) -> usize {
        self.layout.total()
    }

    pub(crate) fn check_params(&self, params: &ParamStore) -> Result<(), NetworkError> {
        if params.values.len() != self.layout.total() {
            return Err(NetworkError::ParamLengthMismatch {
                expected: self.layout.total(),
                got: params.values.len(),
            });
        }
        Ok(())
    }
}

//! Flat parameter storage, Xavier initialization and model files.

use super::{Network, NetworkError, NetworkSpec};
use crate::rng::{rng_for, stream};
use rand::Rng;
use serde::{Deserialize, Serialize};
use std::io::{Read, Write};
use std::path::{Path, PathBuf};
use thiserror::Error;

pub const LAYOUT_VERSION: u32 = 1;

/// Contiguous parameter vector; offsets are defined by [`super::ParamLayout`].
#[derive(Debug, Clone, PartialEq)]
pub struct ParamStore {
    pub values: Vec<f64>,
}

impl ParamStore {
    pub fn zeros(len: usize) -> ParamStore {
        ParamStore { values: vec![0.0; len] }
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }
}

impl Network {
    /// Xavier-uniform initialization: every weight/coefficient of a layer is
    /// drawn from Uniform(-a, a) with a = sqrt(6 / (fan_in + fan_out));
    /// fan_in counts the scalar features entering each node's linear
    /// combination (basis-expanded features included), fan_out is the layer
    /// width (1 for the output). All biases start at zero.
    pub fn init_xavier(&self, seed: u64) -> ParamStore {
        let mut store = ParamStore::zeros(self.param_count());
        let mut rng = rng_for(seed, &[stream::INIT]);
        let mut fill = |values: &mut [f64], fan_in: usize, fan_out: usize| {
            let a = (6.0 / (fan_in + fan_out) as f64).sqrt();
            for v in values {
                let u: f64 = rng.gen();
                *v = a * (2.0 * u - 1.0);
            }
        };
        for seg in &self.layout.layers {
            fill(
                &mut store.values[seg.coeff_off..seg.coeff_off + seg.coeff_len()],
                seg.fan_in(),
                seg.out_width,
            );
        }
        let out = &self.layout.output;
        fill(
            &mut store.values[out.coeff_off..out.coeff_off + out.coeff_len()],
            out.fan_in(),
            1,
        );
        store
    }
}

#[derive(Debug, Error)]
pub enum ModelIoError {
    #[error("model io: {0}")]
    Io(#[from] std::io::Error),
    #[error("model header: {0}")]
    Header(#[from] serde_json::Error),
    #[error("model file {path}: {reason}")]
    Malformed { path: PathBuf, reason: String },
}

#[derive(Serialize, Deserialize)]
struct ModelHeader {
    spec: NetworkSpec,
    layout_version: u32,
    format: String,
    len: usize,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    values: Option<Vec<f64>>,
}

fn header_path(base: &Path) -> PathBuf {
    base.with_extension("json")
}

fn sidecar_path(base: &Path) -> PathBuf {
    base.with_extension("bin")
}

/// Writes a model as `<base>.json` (header) plus, unless `portable`,
/// `<base>.bin` holding the little-endian f64 parameter array. In portable
/// mode the values are embedded in the header as a JSON array.
pub fn save_params(
    base: &Path,
    spec: &NetworkSpec,
    params: &ParamStore,
    portable: bool,
) -> Result<(), ModelIoError> {
    let header = ModelHeader {
        spec: *spec,
        layout_version: LAYOUT_VERSION,
        format: if portable { "json".into() } else { "f64le".into() },
        len: params.len(),
        values: portable.then(|| params.values.clone()),
    };
    let mut file = std::fs::File::create(header_path(base))?;
    serde_json::to_writer_pretty(&mut file, &header)?;
    file.write_all(b"\n")?;
    if !portable {
        let mut bytes = Vec::with_capacity(params.len() * 8);
        for v in &params.values {
            bytes.extend_from_slice(&v.to_le_bytes());
        }
        std::fs::File::create(sidecar_path(base))?.write_all(&bytes)?;
    }
    Ok(())
}

/// Reads a model written by [`save_params`], verifying length and layout
/// version against the stored spec.
pub fn load_params(base: &Path) -> Result<(NetworkSpec, ParamStore), ModelIoError> {
    let hp = header_path(base);
    let header: ModelHeader = serde_json::from_reader(std::fs::File::open(&hp)?)?;
    let malformed = |reason: String| ModelIoError::Malformed { path: hp.clone(), reason };
    if header.layout_version != LAYOUT_VERSION {
        return Err(malformed(format!(
            "layout version {} unsupported (expected {LAYOUT_VERSION})",
            header.layout_version
        )));
    }
    let expected = super::param_count(&header.spec);
    if header.len != expected {
        return Err(malformed(format!(
            "header len {} does not match spec parameter count {expected}",
            header.len
        )));
    }
    let values = match header.format.as_str() {
        "json" => header
            .values
            .ok_or_else(|| malformed("portable model missing values array".into()))?,
        "f64le" => {
            let mut bytes = Vec::new();
            std::fs::File::open(sidecar_path(base))?.read_to_end(&mut bytes)?;
            if bytes.len() != header.len * 8 {
                return Err(malformed(format!(
                    "sidecar has {} bytes, expected {}",
                    bytes.len(),
                    header.len * 8
                )));
            }
            bytes
                .chunks_exact(8)
                .map(|c| f64::from_le_bytes(c.try_into().unwrap()))
                .collect()
        }
        other => return Err(malformed(format!("unknown format {other:?}"))),
    };
    if values.len() != header.len {
        return Err(malformed("value count does not match header len".into()));
    }
    let store = ParamStore { values };
    let net = Network::new(header.spec)
        .map_err(|e: NetworkError| malformed(e.to_string()))?;
    net.check_params(&store).map_err(|e| malformed(e.to_string()))?;
    Ok((header.spec, store))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::activation::ActivationKind;
    use crate::basis::BasisFamily;
    use crate::network::{NetworkKind, Slot};

    fn small_spec() -> NetworkSpec {
        NetworkSpec {
            kind: NetworkKind::Hdann3,
            d: 3,
            layers: 2,
            width: 4,
            basis_count: 3,
            sigma: ActivationKind::Tanh,
            g: ActivationKind::Logistic,
            basis: BasisFamily::Cosine,
        }
    }

    #[test]
    fn init_deterministic_and_biases_zero() {
        let net = Network::new(small_spec()).unwrap();
        let a = net.init_xavier(17);
        let b = net.init_xavier(17);
        assert_eq!(a, b);
        assert_ne!(a, net.init_xavier(18));
        let layout = net.layout();
        for slot in layout.slots() {
            if matches!(slot, Slot::HiddenBias { .. } | Slot::OutputBias) {
                assert_eq!(a.values[layout.offset(&slot).unwrap()], 0.0);
            }
        }
    }

    #[test]
    fn init_bounds_match_fan_formula() {
        // DNN(d=2, L=1, p=4): hidden weights in (-1, 1) since
        // a = sqrt(6 / (2 + 4)) = 1.
        let spec = NetworkSpec {
            kind: NetworkKind::Dnn,
            d: 2,
            layers: 1,
            width: 4,
            basis_count: 0,
            sigma: ActivationKind::Tanh,
            g: ActivationKind::Logistic,
            basis: BasisFamily::Polynomial,
        };
        let net = Network::new(spec).unwrap();
        let store = net.init_xavier(5);
        let layout = net.layout();
        let mut saw_nonzero = false;
        for node in 0..4 {
            for source in 0..2 {
                let off = layout
                    .offset(&Slot::HiddenWeight { layer: 0, node, source })
                    .unwrap();
                let w = store.values[off];
                assert!(w.abs() < 1.0, "weight {w} outside (-1, 1)");
                saw_nonzero |= w != 0.0;
            }
        }
        assert!(saw_nonzero);
    }

    #[test]
    fn model_file_round_trip_binary_and_portable() {
        let dir = tempfile::tempdir().unwrap();
        let spec = small_spec();
        let net = Network::new(spec).unwrap();
        let store = net.init_xavier(99);
        for portable in [false, true] {
            let base = dir.path().join(if portable { "m_portable" } else { "m_binary" });
            save_params(&base, &spec, &store, portable).unwrap();
            let (spec2, store2) = load_params(&base).unwrap();
            assert_eq!(spec2, spec);
            assert_eq!(store2, store);
            assert_eq!(sidecar_path(&base).exists(), !portable);
        }
    }

    #[test]
    fn load_rejects_truncated_sidecar() {
        let dir = tempfile::tempdir().unwrap();
        let spec = small_spec();
        let net = Network::new(spec).unwrap();
        let base = dir.path().join("model");
        save_params(&base, &spec, &net.init_xavier(1), false).unwrap();
        let bin = base.with_extension("bin");
        let bytes = std::fs::read(&bin).unwrap();
        std::fs::write(&bin, &bytes[..bytes.len() - 8]).unwrap();
        assert!(matches!(load_params(&base), Err(ModelIoError::Malformed { .. })));
    }
}

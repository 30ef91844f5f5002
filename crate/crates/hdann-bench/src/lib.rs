//! Shared fixtures for the kernel benchmarks.

use hdann_core::network::{Network, NetworkSpec, ParamStore};
use hdann_core::rng::rng_for;
use hdann_core::{ActivationKind, BasisFamily, NetworkKind};
use rand::Rng;

pub struct BenchCase {
    pub name: &'static str,
    pub net: Network,
    pub params: ParamStore,
    pub x: Vec<f64>,
    pub y: Vec<f64>,
    pub n: usize,
}

fn fill_uniform(seed: u64, len: usize) -> Vec<f64> {
    let mut rng = rng_for(seed, &[0xbe]);
    (0..len).map(|_| rng.gen::<f64>()).collect()
}

/// One mid-sized network per architecture family, with a random batch.
pub fn cases(batch: usize) -> Vec<BenchCase> {
    let shapes = [
        ("dnn_L3_p64", NetworkKind::Dnn, 3, 64, 0),
        ("dann_L3_p64_q5", NetworkKind::Dann, 3, 64, 5),
        ("hdann1_L3_p64_q5", NetworkKind::Hdann1, 3, 64, 5),
        ("hdann3_L3_p64_q5", NetworkKind::Hdann3, 3, 64, 5),
    ];
    shapes
        .into_iter()
        .map(|(name, kind, l, p, q)| {
            let spec = NetworkSpec {
                kind,
                d: 6,
                layers: l,
                width: p,
                basis_count: q,
                sigma: ActivationKind::Relu,
                g: ActivationKind::Logistic,
                basis: BasisFamily::Polynomial,
            };
            let net = Network::new(spec).unwrap();
            let params = net.init_xavier(1);
            let x = fill_uniform(2, batch * 6);
            let y = fill_uniform(3, batch);
            BenchCase { name, net, params, x, y, n: batch }
        })
        .collect()
}

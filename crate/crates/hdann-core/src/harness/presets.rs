//! Shipped hyperparameter grids.
//!
//! The `desk` preset shrinks the full grids to sizes a laptop covers in
//! minutes while keeping both basis families in play. The `paper` preset is
//! the full grid definition (135 DNN cells, 750 cells per proposed
//! network); running it is a matter of hours to days on one machine.

use super::GridSpec;
use crate::activation::ActivationKind;
use crate::basis::BasisFamily;
use crate::network::NetworkKind;
use crate::training::TrainConfig;

pub fn desk_grids() -> Vec<GridSpec> {
    let mut grids = vec![GridSpec {
        kind: NetworkKind::Dnn,
        l_values: vec![1, 3],
        p_values: vec![4, 16],
        q_values: vec![],
        sigma_values: vec![ActivationKind::Relu],
        basis_values: vec![],
    }];
    for kind in NetworkKind::PROPOSED {
        grids.push(GridSpec {
            kind,
            l_values: vec![1, 3],
            p_values: vec![4, 16],
            q_values: vec![3, 5],
            sigma_values: vec![ActivationKind::Relu],
            basis_values: vec![BasisFamily::Polynomial, BasisFamily::Cosine],
        });
    }
    grids
}

pub fn paper_grids() -> Vec<GridSpec> {
    let sigmas =
        vec![ActivationKind::Logistic, ActivationKind::Relu, ActivationKind::Tanh];
    let mut grids = vec![GridSpec {
        kind: NetworkKind::Dnn,
        l_values: (1..=9).map(|t| 2 * t).collect(),
        p_values: vec![8, 32, 128, 512, 2048],
        q_values: vec![],
        sigma_values: sigmas.clone(),
        basis_values: vec![],
    }];
    for kind in NetworkKind::PROPOSED {
        grids.push(GridSpec {
            kind,
            l_values: vec![1, 3, 5, 7, 9],
            p_values: vec![4, 16, 64, 256, 1024],
            q_values: vec![3, 5, 7, 9, 11],
            sigma_values: sigmas.clone(),
            basis_values: vec![BasisFamily::Polynomial, BasisFamily::Cosine],
        });
    }
    grids
}

/// Desk-scale training config: protocol constants unchanged, epoch cap
/// low enough that stragglers cannot dominate a grid run (the plateau rule
/// stops typical desk-scale runs well before it).
pub fn desk_train_config(seed: u64) -> TrainConfig {
    TrainConfig { seed, max_epochs: 2000, ..TrainConfig::default() }
}

/// Full-protocol training config (no epoch cap beyond the default).
pub fn paper_train_config(seed: u64) -> TrainConfig {
    TrainConfig { seed, ..TrainConfig::default() }
}

//! Basis-function families on [0, 1] and their derivatives.
//!
//! Three families are supported: powers `x^r`, half-period cosines
//! `cos(r pi x)`, and the Haar system in level-major order. Index `r`
//! starts at 1; the constant term of an expansion is carried by a separate
//! bias, not by the family.

use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum BasisFamily {
    #[serde(rename = "poly")]
    Polynomial,
    #[serde(rename = "cos")]
    Cosine,
    #[serde(rename = "haar")]
    Haar,
}

impl BasisFamily {
    pub const ALL: [BasisFamily; 3] = [Self::Polynomial, Self::Cosine, Self::Haar];

    pub fn name(self) -> &'static str {
        match self {
            Self::Polynomial => "poly",
            Self::Cosine => "cos",
            Self::Haar => "haar",
        }
    }
}

impl std::fmt::Display for BasisFamily {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.name())
    }
}

impl std::str::FromStr for BasisFamily {
    type Err = BasisError;

    fn from_str(s: &str) -> Result<Self, BasisError> {
        match s.to_ascii_lowercase().as_str() {
            "poly" | "polynomial" => Ok(Self::Polynomial),
            "cos" | "cosine" => Ok(Self::Cosine),
            "haar" => Ok(Self::Haar),
            _ => Err(BasisError::UnknownFamily(s.to_string())),
        }
    }
}

#[derive(Debug, Error)]
pub enum BasisError {
    #[error("unknown basis family {0:?}; expected poly, cos or haar")]
    UnknownFamily(String),
    #[error("grid size {grid_size} is too small for q = {q}; need at least {min}")]
    GridTooSmall { q: usize, grid_size: usize, min: usize },
    #[error("least-squares design matrix is rank-deficient")]
    RankDeficient,
}

/// Haar level/position for index r >= 2: r = 2^j + k + 1, 0 <= k < 2^j.
fn haar_level_position(r: usize) -> (u32, usize) {
    debug_assert!(r >= 2);
    let i = r - 1;
    let j = usize::BITS - 1 - i.leading_zeros();
    (j, i - (1 << j))
}

/// Evaluates `B_r(x)` for the given family.
///
/// `r = 0` is a contract violation. Haar values at dyadic breakpoints follow
/// the right-continuous convention, except x = 1 which takes the left piece.
pub fn eval_basis(family: BasisFamily, r: usize, x: f64) -> f64 {
    assert!(r >= 1, "basis index r must be >= 1 (index 0 is the bias term)");
    match family {
        BasisFamily::Polynomial => {
            let mut p = x;
            for _ in 1..r {
                p *= x;
            }
            p
        }
        BasisFamily::Cosine => (r as f64 * std::f64::consts::PI * x).cos(),
        BasisFamily::Haar => {
            if r == 1 {
                return 1.0;
            }
            let (j, k) = haar_level_position(r);
            let pow = (1u64 << j) as f64;
            let scale = pow.sqrt();
            if x == 1.0 {
                return if k == (1usize << j) - 1 { -scale } else { 0.0 };
            }
            let t = pow * x - k as f64;
            if (0.0..0.5).contains(&t) {
                scale
            } else if (0.5..1.0).contains(&t) {
                -scale
            } else {
                0.0
            }
        }
    }
}

/// Evaluates `dB_r/dx`. Haar derivatives are identically zero
/// (piecewise-constant convention).
pub fn eval_basis_deriv(family: BasisFamily, r: usize, x: f64) -> f64 {
    assert!(r >= 1, "basis index r must be >= 1 (index 0 is the bias term)");
    match family {
        BasisFamily::Polynomial => {
            if r == 1 {
                return 1.0;
            }
            let mut p = x;
            for _ in 2..r {
                p *= x;
            }
            r as f64 * p
        }
        BasisFamily::Cosine => {
            let rpi = r as f64 * std::f64::consts::PI;
            -rpi * (rpi * x).sin()
        }
        BasisFamily::Haar => 0.0,
    }
}

/// Fills `out[r-1] = B_r(x)` for r = 1..=out.len().
///
/// Polynomial values are built by a running product, which matches
/// `eval_basis` bit for bit (both left-fold the multiplications).
pub fn eval_basis_vector(family: BasisFamily, x: f64, out: &mut [f64]) {
    match family {
        BasisFamily::Polynomial => {
            let mut p = 1.0;
            for slot in out.iter_mut() {
                p *= x;
                *slot = p;
            }
        }
        _ => {
            for (i, slot) in out.iter_mut().enumerate() {
                *slot = eval_basis(family, i + 1, x);
            }
        }
    }
}

/// Evaluates `sum_r coeffs[r-1] * B_r(x) + bias`.
pub fn eval_expansion(family: BasisFamily, coeffs: &[f64], bias: f64, x: f64) -> f64 {
    assert!(!coeffs.is_empty(), "expansion needs at least one coefficient");
    let mut acc = bias;
    match family {
        BasisFamily::Polynomial => {
            let mut p = 1.0;
            for &c in coeffs {
                p *= x;
                acc += c * p;
            }
        }
        _ => {
            for (i, &c) in coeffs.iter().enumerate() {
                acc += c * eval_basis(family, i + 1, x);
            }
        }
    }
    acc
}

/// Result of a least-squares basis fit on a uniform grid.
#[derive(Debug, Clone)]
pub struct BasisFit {
    pub coeffs: Vec<f64>,
    pub bias: f64,
    /// Maximum absolute residual over the fitting grid.
    pub sup_error: f64,
}

/// Least-squares fit of `target` over a uniform grid on [0, 1] in the span
/// of `{1, B_1, ..., B_q}` for the given family.
///
/// This is the constructive side of the uniform-approximation property: as
/// q grows the sup-norm residual for a continuous target does not increase.
pub fn ls_basis_fit<F: Fn(f64) -> f64>(
    family: BasisFamily,
    target: F,
    q: usize,
    grid_size: usize,
) -> Result<BasisFit, BasisError> {
    let min = 10 * q;
    if grid_size < min || grid_size < 2 {
        return Err(BasisError::GridTooSmall { q, grid_size, min: min.max(2) });
    }
    let xs: Vec<f64> = (0..grid_size)
        .map(|i| i as f64 / (grid_size - 1) as f64)
        .collect();

    let design = nalgebra::DMatrix::from_fn(grid_size, q + 1, |i, c| {
        if c == 0 {
            1.0
        } else {
            eval_basis(family, c, xs[i])
        }
    });
    let rhs = nalgebra::DVector::from_iterator(grid_size, xs.iter().map(|&x| target(x)));

    let svd = design.clone().svd(true, true);
    let max_sv = svd.singular_values.max();
    if !(max_sv > 0.0) || svd.singular_values.min() < max_sv * 1e-13 {
        return Err(BasisError::RankDeficient);
    }
    let solution = svd
        .solve(&rhs, max_sv * 1e-13)
        .map_err(|_| BasisError::RankDeficient)?;

    let residual = &design * &solution - &rhs;
    let sup_error = residual.iter().fold(0.0f64, |m, r| m.max(r.abs()));

    Ok(BasisFit {
        bias: solution[0],
        coeffs: solution.iter().skip(1).copied().collect(),
        sup_error,
    })
}

/// Cosine-family fit; the constructive stand-in for the Fejer sum.
pub fn fejer_cosine_fit<F: Fn(f64) -> f64>(
    target: F,
    q: usize,
    grid_size: usize,
) -> Result<BasisFit, BasisError> {
    ls_basis_fit(BasisFamily::Cosine, target, q, grid_size)
}

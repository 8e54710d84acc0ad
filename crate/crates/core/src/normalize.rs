//! Power, l2 and intra normalization of encoded vectors.

use std::fmt;
use std::str::FromStr;

use crate::error::{Error, Result};
use crate::fisher::{FisherVec, NormState};

/// Exponent used for power normalization unless overridden.
pub const DEFAULT_ALPHA: f64 = 0.5;

/// Normalization pipeline selectable from the command line.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum NormScheme {
    None,
    L2,
    Power,
    PowerL2,
    Intra,
}

impl NormScheme {
    pub const ALL: [NormScheme; 5] = [
        NormScheme::None,
        NormScheme::L2,
        NormScheme::Power,
        NormScheme::PowerL2,
        NormScheme::Intra,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            NormScheme::None => "none",
            NormScheme::L2 => "l2",
            NormScheme::Power => "power",
            NormScheme::PowerL2 => "power-l2",
            NormScheme::Intra => "intra",
        }
    }

    /// State of a raw vector after this scheme.
    pub fn output_state(self) -> NormState {
        match self {
            NormScheme::None => NormState::Raw,
            NormScheme::L2 => NormState::L2,
            NormScheme::Power => NormState::Power,
            NormScheme::PowerL2 => NormState::PowerL2,
            NormScheme::Intra => NormState::Intra,
        }
    }
}

impl fmt::Display for NormScheme {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for NormScheme {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        NormScheme::ALL
            .into_iter()
            .find(|n| n.as_str() == s)
            .ok_or_else(|| {
                Error::param("norm", format!("unknown scheme {s:?} (none|l2|power|power-l2|intra)"))
            })
    }
}

/// A normalized vector plus the number of all-zero vectors or blocks that
/// could not be scaled and were left as zeros.
#[derive(Clone, Debug, PartialEq)]
pub struct Normalized {
    pub vector: FisherVec,
    pub zero_blocks: usize,
}

/// Scales `values` to unit Euclidean norm. Returns `false` and leaves the
/// slice untouched if it is all zeros.
pub fn l2_normalize_slice(values: &mut [f64]) -> bool {
    let norm = values.iter().map(|v| v * v).sum::<f64>().sqrt();
    if norm == 0.0 {
        return false;
    }
    for v in values.iter_mut() {
        *v /= norm;
    }
    true
}

fn check_alpha(alpha: f64) -> Result<()> {
    if alpha > 0.0 && alpha <= 1.0 {
        Ok(())
    } else {
        Err(Error::param("alpha", format!("{alpha} not in (0, 1]")))
    }
}

/// Entrywise `sign(z) |z|^alpha`.
pub fn power_normalize(v: FisherVec, alpha: f64) -> Result<FisherVec> {
    check_alpha(alpha)?;
    if v.norm_state() != NormState::Raw {
        return Err(Error::InvalidNormState(v.norm_state().as_str()));
    }
    let values = v
        .values()
        .iter()
        .map(|&z| if alpha == 1.0 { z } else { z.signum() * z.abs().powf(alpha) })
        .map(|z| if z == 0.0 { 0.0 } else { z })
        .collect();
    Ok(v.with_values(values, NormState::Power))
}

/// Global l2 normalization of a raw or power-normalized vector.
pub fn l2_normalize(v: FisherVec) -> Result<Normalized> {
    let next = match v.norm_state() {
        NormState::Raw => NormState::L2,
        NormState::Power => NormState::PowerL2,
        other => return Err(Error::InvalidNormState(other.as_str())),
    };
    let mut values = v.values().to_vec();
    let zero_blocks = usize::from(!l2_normalize_slice(&mut values));
    Ok(Normalized {
        vector: v.with_values(values, next),
        zero_blocks,
    })
}

/// l2 normalization inside each component block, without the final global pass.
pub fn intra_normalize_blocks(v: FisherVec) -> Result<Normalized> {
    if v.norm_state() != NormState::Raw {
        return Err(Error::InvalidNormState(v.norm_state().as_str()));
    }
    let mut values = v.values().to_vec();
    let zero_blocks = values
        .chunks_exact_mut(v.dims())
        .filter_map(|block| (!l2_normalize_slice(block)).then_some(()))
        .count();
    Ok(Normalized {
        vector: v.with_values(values, NormState::Intra),
        zero_blocks,
    })
}

/// Per-block l2 normalization followed by a global l2 pass.
pub fn intra_normalize(v: FisherVec) -> Result<Normalized> {
    let Normalized { vector, zero_blocks } = intra_normalize_blocks(v)?;
    let mut values = vector.values().to_vec();
    l2_normalize_slice(&mut values);
    Ok(Normalized {
        vector: vector.with_values(values, NormState::Intra),
        zero_blocks,
    })
}

/// Applies `scheme` to a raw vector; power always precedes l2.
pub fn apply_norm(v: FisherVec, scheme: NormScheme, alpha: f64) -> Result<Normalized> {
    check_alpha(alpha)?;
    match scheme {
        NormScheme::None => Ok(Normalized {
            vector: v,
            zero_blocks: 0,
        }),
        NormScheme::L2 => l2_normalize(v),
        NormScheme::Power => Ok(Normalized {
            vector: power_normalize(v, alpha)?,
            zero_blocks: 0,
        }),
        NormScheme::PowerL2 => l2_normalize(power_normalize(v, alpha)?),
        NormScheme::Intra => intra_normalize(v),
    }
}

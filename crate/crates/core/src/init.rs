//! Weight initializers: Xavier (Glorot uniform), all-zero, and plain uniform.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::rng::Rng;
use crate::tensor::{Scalar, Tensor};

pub const DEFAULT_UNIFORM_RANGE: (f64, f64) = (-0.05, 0.05);

#[derive(Debug, Default, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum InitializerKind {
    #[default]
    Xavier,
    Zero,
    UniformRandom { lo: f64, hi: f64 },
}

impl InitializerKind {
    pub fn uniform(lo: f64, hi: f64) -> Result<Self> {
        if !lo.is_finite() || !hi.is_finite() || lo >= hi {
            return Err(Error::Config(format!("uniform initializer needs lo < hi, got [{lo}, {hi}]")));
        }
        Ok(InitializerKind::UniformRandom { lo, hi })
    }

    pub fn validate(&self) -> Result<()> {
        match *self {
            InitializerKind::UniformRandom { lo, hi } => Self::uniform(lo, hi).map(|_| ()),
            _ => Ok(()),
        }
    }

    pub fn name(&self) -> &'static str {
        match self {
            InitializerKind::Xavier => "xavier",
            InitializerKind::Zero => "zero",
            InitializerKind::UniformRandom { .. } => "uniform",
        }
    }
}

/// Incoming and outgoing connection counts of one unit.
///
/// For a `kh x kw` convolution `n_in = in_ch * kh * kw` and
/// `n_out = out_ch * kh * kw`; for a dense layer they are the layer widths.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct FanInfo {
    pub n_in: usize,
    pub n_out: usize,
}

impl FanInfo {
    pub fn new(n_in: usize, n_out: usize) -> Result<Self> {
        if n_in == 0 || n_out == 0 {
            return Err(Error::Contract(format!("fan counts must be positive, got ({n_in}, {n_out})")));
        }
        Ok(Self { n_in, n_out })
    }

    pub fn conv(kh: usize, kw: usize, in_ch: usize, out_ch: usize) -> Result<Self> {
        Self::new(in_ch * kh * kw, out_ch * kh * kw)
    }

    pub fn dense(n_in: usize, n_out: usize) -> Result<Self> {
        Self::new(n_in, n_out)
    }
}

/// Half-width of the Xavier sampling interval, `sqrt(6) / sqrt(n_in + n_out)`.
pub fn xavier_limit(fan: FanInfo) -> f64 {
    6f64.sqrt() / ((fan.n_in + fan.n_out) as f64).sqrt()
}

/// Target weight variance, `2 / (n_in + n_out)`.
pub fn xavier_variance(fan: FanInfo) -> f64 {
    2.0 / (fan.n_in + fan.n_out) as f64
}

/// Samples a parameter tensor. `fan` is required for Xavier and ignored otherwise.
pub fn init_tensor<T: Scalar>(
    kind: InitializerKind,
    shape: &[usize],
    fan: Option<FanInfo>,
    rng: &mut Rng,
) -> Result<Tensor<T>> {
    match kind {
        InitializerKind::Zero => Tensor::zeros(shape),
        InitializerKind::Xavier => {
            let fan = fan.ok_or_else(|| Error::Contract("Xavier initialization requires fan info".into()))?;
            let limit = xavier_limit(fan);
            Tensor::from_fn(shape, |_| T::from_f64_lossy(rng.uniform(-limit, limit)))
        }
        InitializerKind::UniformRandom { lo, hi } => {
            kind.validate()?;
            Tensor::from_fn(shape, |_| T::from_f64_lossy(rng.uniform(lo, hi)))
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn limit_examples() {
        let fan = FanInfo::new(100, 50).unwrap();
        assert!((xavier_limit(fan) - 0.2).abs() < 1e-15);
        assert_eq!(xavier_limit(FanInfo::new(3, 3).unwrap()), 1.0);
        let conv1 = FanInfo::conv(3, 3, 3, 16).unwrap();
        assert_eq!((conv1.n_in, conv1.n_out), (27, 144));
        let wide = FanInfo::new(144, 768).unwrap();
        assert!((xavier_limit(wide) - 0.081111).abs() < 1e-5);
    }

    #[test]
    fn variance_examples() {
        let fan = FanInfo::new(100, 50).unwrap();
        assert!((xavier_variance(fan) - 2.0 / 150.0).abs() < 1e-15);
        assert_eq!(xavier_variance(FanInfo::new(1, 1).unwrap()), 1.0);
        // variance of U(-l, l) is l^2 / 3
        let l = xavier_limit(fan);
        assert!((l * l / 3.0 - xavier_variance(fan)).abs() < 1e-15);
    }

    #[test]
    fn zero_fan_rejected() {
        assert!(FanInfo::new(0, 3).is_err());
    }

    #[test]
    fn zero_init_is_seed_invariant() {
        let a: Tensor = init_tensor(InitializerKind::Zero, &[3, 3], None, &mut Rng::new(1)).unwrap();
        let b: Tensor = init_tensor(InitializerKind::Zero, &[3, 3], None, &mut Rng::new(2)).unwrap();
        assert_eq!(a.data(), &[0.0; 9]);
        assert_eq!(a, b);
    }

    #[test]
    fn xavier_requires_fan() {
        let r: Result<Tensor> = init_tensor(InitializerKind::Xavier, &[2, 2], None, &mut Rng::new(1));
        assert!(matches!(r, Err(Error::Contract(_))));
    }

    #[test]
    fn uniform_range_validated() {
        assert!(InitializerKind::uniform(0.1, 0.1).is_err());
        assert!(InitializerKind::uniform(0.2, -0.1).is_err());
        let kind = InitializerKind::uniform(-0.05, 0.05).unwrap();
        let t: Tensor = init_tensor(kind, &[1000], None, &mut Rng::new(9)).unwrap();
        assert!(t.data().iter().all(|&v| (-0.05..=0.05).contains(&v)));
    }

    #[test]
    fn same_seed_same_tensor() {
        let fan = FanInfo::new(27, 144).ok();
        let a: Tensor = init_tensor(InitializerKind::Xavier, &[3, 3, 3, 16], fan, &mut Rng::new(5)).unwrap();
        let b: Tensor = init_tensor(InitializerKind::Xavier, &[3, 3, 3, 16], fan, &mut Rng::new(5)).unwrap();
        assert_eq!(a.data(), b.data());
    }
}

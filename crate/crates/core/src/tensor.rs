//! Dense row-major tensors with the named video axes N, C, T, H, W.

use alloc::vec;
use alloc::vec::Vec;
use core::fmt;

/// Named axes of a video feature map, in storage order.
///
/// A rank-5 tensor is interpreted as N x C x T x H x W (batch, channel,
/// time, height, width). Tensors of other ranks (kernels, weight matrices,
/// logits) carry no axis names and cannot resolve an `Axis`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum Axis {
    N,
    C,
    T,
    H,
    W,
}

impl Axis {
    pub const ALL: [Axis; 5] = [Axis::N, Axis::C, Axis::T, Axis::H, Axis::W];

    /// Position of this axis in a rank-5 video tensor.
    pub fn index(self) -> usize {
        match self {
            Axis::N => 0,
            Axis::C => 1,
            Axis::T => 2,
            Axis::H => 3,
            Axis::W => 4,
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            Axis::N => "N",
            Axis::C => "C",
            Axis::T => "T",
            Axis::H => "H",
            Axis::W => "W",
        }
    }

    /// Resolve this axis against a tensor, erroring if the tensor lacks it.
    pub fn resolve(self, t: &Tensor) -> Result<usize, TensorError> {
        if t.rank() != 5 {
            return Err(TensorError::AxisMissing {
                axis: self,
                rank: t.rank(),
            });
        }
        Ok(self.index())
    }
}

impl fmt::Display for Axis {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

#[derive(Clone, Debug, PartialEq)]
pub enum TensorError {
    /// The tensor's rank does not carry the requested named axis.
    AxisMissing { axis: Axis, rank: usize },
    /// Two operands disagree on shape where they must match.
    ShapeMismatch { left: Vec<usize>, right: Vec<usize> },
    /// Flat data length does not equal the product of the extents.
    DataLength { expected: usize, got: usize },
    /// A shape contains a zero extent.
    ZeroExtent { shape: Vec<usize> },
    /// An axis that must have extent 1 (a squeezed axis) does not.
    ExtentNotOne { axis: Axis, extent: usize },
    /// A repeat/expansion count must be at least 1.
    BadExtent { extent: usize },
    /// A convolution kernel has the wrong shape for the operation.
    BadKernel {
        expected: &'static str,
        got: Vec<usize>,
    },
    /// Kernel input-channel extent does not match the designated channel axis.
    ChannelMismatch { kernel_in: usize, input: usize },
    /// The channel axis collides with a sliding axis, or an axis set is invalid.
    BadAxes { reason: &'static str },
    /// Temporal shift fraction outside (0, 0.5].
    BadFraction { fraction: f64 },
    /// A scalar hyperparameter is out of its valid range.
    BadScalar { what: &'static str, value: f64 },
    /// Byte-level decode failure for the tensor fixture format.
    Decode { reason: &'static str },
}

impl fmt::Display for TensorError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            TensorError::AxisMissing { axis, rank } => {
                write!(f, "axis {axis} cannot be resolved on a rank-{rank} tensor")
            }
            TensorError::ShapeMismatch { left, right } => {
                write!(f, "shape mismatch: {left:?} vs {right:?}")
            }
            TensorError::DataLength { expected, got } => {
                write!(
                    f,
                    "data length {got} does not match shape product {expected}"
                )
            }
            TensorError::ZeroExtent { shape } => {
                write!(f, "shape {shape:?} contains a zero extent")
            }
            TensorError::ExtentNotOne { axis, extent } => {
                write!(f, "axis {axis} must have extent 1, found {extent}")
            }
            TensorError::BadExtent { extent } => {
                write!(f, "expansion extent must be >= 1, got {extent}")
            }
            TensorError::BadKernel { expected, got } => {
                write!(f, "bad kernel shape {got:?}, expected {expected}")
            }
            TensorError::ChannelMismatch { kernel_in, input } => {
                write!(
                    f,
                    "kernel expects {kernel_in} input channels, tensor has {input}"
                )
            }
            TensorError::BadAxes { reason } => write!(f, "bad axis selection: {reason}"),
            TensorError::BadFraction { fraction } => {
                write!(f, "shift fraction {fraction} outside (0, 0.5]")
            }
            TensorError::BadScalar { what, value } => write!(f, "{what} out of range: {value}"),
            TensorError::Decode { reason } => write!(f, "tensor decode failed: {reason}"),
        }
    }
}

impl core::error::Error for TensorError {}

/// Dense multi-axis array of `f64` values in row-major order.
#[derive(Clone, Debug, PartialEq)]
pub struct Tensor {
    shape: Vec<usize>,
    data: Vec<f64>,
}

impl Tensor {
    /// Build a tensor from a shape and matching flat data.
    pub fn from_vec(shape: Vec<usize>, data: Vec<f64>) -> Result<Tensor, TensorError> {
        if shape.contains(&0) {
            return Err(TensorError::ZeroExtent { shape });
        }
        let expected: usize = shape.iter().product();
        if data.len() != expected {
            return Err(TensorError::DataLength {
                expected,
                got: data.len(),
            });
        }
        Ok(Tensor { shape, data })
    }

    /// All-zero tensor. Panics on a zero extent (a contract violation, not an
    /// input condition).
    pub fn zeros(shape: &[usize]) -> Tensor {
        assert!(
            shape.iter().all(|&e| e >= 1),
            "tensor extents must be >= 1, got {shape:?}"
        );
        let n = shape.iter().product();
        Tensor {
            shape: shape.to_vec(),
            data: vec![0.0; n],
        }
    }

    pub fn filled(shape: &[usize], value: f64) -> Tensor {
        let mut t = Tensor::zeros(shape);
        t.data.iter_mut().for_each(|v| *v = value);
        t
    }

    /// Rank-1 single-element tensor, used for scalar losses.
    pub fn scalar(value: f64) -> Tensor {
        Tensor {
            shape: vec![1],
            data: vec![value],
        }
    }

    pub fn shape(&self) -> &[usize] {
        &self.shape
    }

    pub fn rank(&self) -> usize {
        self.shape.len()
    }

    pub fn numel(&self) -> usize {
        self.data.len()
    }

    pub fn data(&self) -> &[f64] {
        &self.data
    }

    pub fn data_mut(&mut self) -> &mut [f64] {
        &mut self.data
    }

    /// Consume into the flat data buffer.
    pub fn into_data(self) -> Vec<f64> {
        self.data
    }

    /// Reinterpret the flat data under a new shape with the same element count.
    pub fn reshaped(&self, shape: &[usize]) -> Result<Tensor, TensorError> {
        Tensor::from_vec(shape.to_vec(), self.data.clone())
    }

    /// Row-major strides (stride of the last axis is 1).
    pub fn strides(&self) -> Vec<usize> {
        let mut strides = vec![1usize; self.rank()];
        for i in (0..self.rank().saturating_sub(1)).rev() {
            strides[i] = strides[i + 1] * self.shape[i + 1];
        }
        strides
    }

    /// Flat offset of a multi-index.
    pub fn flat_index(&self, coords: &[usize]) -> usize {
        debug_assert_eq!(coords.len(), self.rank());
        let mut flat = 0usize;
        for (i, &c) in coords.iter().enumerate() {
            debug_assert!(c < self.shape[i], "index {c} out of bounds on axis {i}");
            flat = flat * self.shape[i] + c;
        }
        flat
    }

    pub fn at(&self, coords: &[usize]) -> f64 {
        self.data[self.flat_index(coords)]
    }

    pub fn set(&mut self, coords: &[usize], value: f64) {
        let i = self.flat_index(coords);
        self.data[i] = value;
    }

    /// Extent along a named video axis.
    pub fn extent(&self, axis: Axis) -> Result<usize, TensorError> {
        Ok(self.shape[axis.resolve(self)?])
    }

    pub fn is_scalar(&self) -> bool {
        self.numel() == 1
    }

    /// Encode in the fixture format: axis count, then each extent, both as
    /// little-endian u64, followed by the flat data as little-endian f64.
    pub fn to_bytes(&self) -> Vec<u8> {
        let mut out = Vec::with_capacity(8 * (1 + self.rank() + self.numel()));
        out.extend_from_slice(&(self.rank() as u64).to_le_bytes());
        for &e in &self.shape {
            out.extend_from_slice(&(e as u64).to_le_bytes());
        }
        for &v in &self.data {
            out.extend_from_slice(&v.to_le_bytes());
        }
        out
    }

    /// Decode the fixture format produced by [`Tensor::to_bytes`].
    pub fn from_bytes(bytes: &[u8]) -> Result<Tensor, TensorError> {
        let take = |n: usize, at: &mut usize| -> Result<u64, TensorError> {
            if *at + n > bytes.len() {
                return Err(TensorError::Decode {
                    reason: "truncated input",
                });
            }
            let mut buf = [0u8; 8];
            buf.copy_from_slice(&bytes[*at..*at + n]);
            *at += n;
            Ok(u64::from_le_bytes(buf))
        };
        let mut at = 0usize;
        let rank = take(8, &mut at)? as usize;
        let mut shape = Vec::with_capacity(rank);
        for _ in 0..rank {
            let e = take(8, &mut at)? as usize;
            if e == 0 {
                return Err(TensorError::Decode {
                    reason: "zero extent",
                });
            }
            shape.push(e);
        }
        let numel: usize = shape.iter().product();
        if bytes.len() != at + 8 * numel {
            return Err(TensorError::Decode {
                reason: "payload length does not match extents",
            });
        }
        let mut data = Vec::with_capacity(numel);
        for _ in 0..numel {
            data.push(f64::from_bits(take(8, &mut at)?));
        }
        Ok(Tensor { shape, data })
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn row_major_flat_index_is_bijective() {
        let t = Tensor::zeros(&[2, 3, 4]);
        let mut seen = std::vec::Vec::new();
        for i in 0..2 {
            for j in 0..3 {
                for k in 0..4 {
                    seen.push(t.flat_index(&[i, j, k]));
                }
            }
        }
        let expect: std::vec::Vec<usize> = (0..24).collect();
        assert_eq!(seen, expect);
    }

    #[test]
    fn strides_match_flat_index() {
        let t = Tensor::zeros(&[2, 4, 4, 6, 6]);
        let s = t.strides();
        assert_eq!(s, vec![576, 144, 36, 6, 1]);
        assert_eq!(t.flat_index(&[1, 2, 3, 4, 5]), 576 + 288 + 108 + 24 + 5);
    }

    #[test]
    fn axis_resolution_requires_rank_five() {
        let video = Tensor::zeros(&[1, 2, 3, 4, 5]);
        assert_eq!(video.extent(Axis::T).unwrap(), 3);
        let mat = Tensor::zeros(&[3, 4]);
        assert_eq!(
            mat.extent(Axis::T),
            Err(TensorError::AxisMissing {
                axis: Axis::T,
                rank: 2
            })
        );
    }

    #[test]
    fn from_vec_validates() {
        assert!(Tensor::from_vec(vec![2, 2], vec![1.0; 4]).is_ok());
        assert_eq!(
            Tensor::from_vec(vec![2, 2], vec![1.0; 3]),
            Err(TensorError::DataLength {
                expected: 4,
                got: 3
            })
        );
        assert!(matches!(
            Tensor::from_vec(vec![2, 0], vec![]),
            Err(TensorError::ZeroExtent { .. })
        ));
    }

    #[test]
    fn byte_roundtrip_is_exact() {
        let t =
            Tensor::from_vec(vec![2, 3], vec![0.5, -1.25, 3e-300, f64::MIN, 0.0, 9.75]).unwrap();
        let bytes = t.to_bytes();
        assert_eq!(bytes.len(), 8 * (1 + 2 + 6));
        let back = Tensor::from_bytes(&bytes).unwrap();
        assert_eq!(back, t);
    }

    #[test]
    fn decode_rejects_corrupt_input() {
        let t = Tensor::zeros(&[2, 2]);
        let bytes = t.to_bytes();
        assert!(matches!(
            Tensor::from_bytes(&bytes[..bytes.len() - 1]),
            Err(TensorError::Decode { .. })
        ));
        assert!(matches!(
            Tensor::from_bytes(&bytes[..8]),
            Err(TensorError::Decode { .. })
        ));
    }
}

//! Axial-context video attention modules with hand-rolled reverse-mode
//! autodiff and static complexity accounting.
//!
//! The crate is split along the data flow of a video recognition model:
//!
//! * [`tensor`] — dense row-major `f64` tensors with named N/C/T/H/W axes;
//! * [`kernels`] — pooling, concat/expand, convolutions, batch norm, and
//!   their hand-derived backward passes;
//! * [`reference`] — independent naive-loop oracles for every kernel and
//!   every composite module, used only for verification;
//! * [`autodiff`] — a tape recorder, parameter store, SGD, and a
//!   finite-difference gradient oracle;
//! * [`attention`] — the axial attention family (C and ST units, CinST and
//!   StinC, sequential/parallel combinations);
//! * [`baselines`] — SE3D, GE3D-G, S3D-G, and CBAM3D comparison modules;
//! * [`complexity`] — static parameter/FLOP analysis of TSN/TSM ResNet-50
//!   descriptors with attention attached;
//! * [`toy`] — a deterministic moving-square benchmark showing which
//!   modules can exploit temporal structure;
//! * [`checks`] — named gradient- and oracle-check drivers shared by the
//!   CLI and the test suite.
//!
//! The crate is `no_std` (with `alloc`); everything file- or OS-facing
//! lives in the companion CLI crate.

#![no_std]
extern crate alloc;

#[cfg(test)]
extern crate std;

pub mod attention;
pub mod autodiff;
pub mod baselines;
pub mod checks;
pub mod complexity;
pub mod kernels;
pub mod reference;
pub mod tensor;
pub mod toy;

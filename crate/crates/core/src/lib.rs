//! Simulation toolkit for through-wall RF sensing with a transmissive
//! reconfigurable intelligent surface (RIS).
//!
//! The crate models the full sensing chain:
//!
//! * [`propagation`] — free-space and partition-based link budgets, including
//!   material attenuation for walls between transmitter and receiver.
//! * [`ris`] — a 1-bit transmissive RIS as a uniform planar array: cascaded
//!   Tx→RIS→Rx received power, ideal and quantized phase profiles, a globally
//!   optimal binary phase optimizer, and codebook beam scanning.
//! * [`csi`] — deterministic synthetic CSI amplitude traces per activity,
//!   with a noise floor coupled to the link budget.
//! * [`features`] — statistical and spectral features of a CSI trace, plus
//!   z-score standardization.
//! * [`svm`] — a from-scratch SVM (SMO solver, RBF kernel, one-vs-one
//!   multiclass), stratified k-fold cross-validation, and evaluation metrics.
//!
//! Everything is a pure function of its inputs. Batch operations run on a
//! rayon pool when the `parallel` feature (default) is enabled and fall back
//! to sequential iteration otherwise; results are identical either way.

// Validation deliberately writes `!(x > 0.0)` so NaN fails the check.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod batch;
pub mod csi;
pub mod features;
pub mod propagation;
pub mod ris;
pub mod rng;
pub mod svm;
pub mod vecmath;

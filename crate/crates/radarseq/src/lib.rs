//! Churn prediction from sequences of daily radar-chart images.
//!
//! A courier's day is a 14-dimensional behavioral feature vector. Each day is
//! min-max normalized and rasterized into a 32×32 grayscale radar chart; a
//! sliding window of 50 consecutive charts forms one classification example.
//! A compact CNN encodes each chart, a two-layer bidirectional LSTM encodes
//! the sequence, and a sigmoid head emits the churn probability. Churn is
//! defined as 45 consecutive days without platform activity.
//!
//! The crate is self-contained: it ships a seeded synthetic cohort generator
//! (`synth`), a deterministic polygon rasterizer (`render`), a reverse-mode
//! autodiff core (`autodiff`), the model and its ablation baselines (`model`),
//! a training loop with AUC-based early stopping (`trainer`), and
//! interpretability tools (`explain`). The `radarseq` binary orchestrates the
//! full pipeline; see the README for a walkthrough.

pub mod autodiff;
pub mod domain;
pub mod explain;
pub mod io;
pub mod model;
pub mod render;
pub mod synth;
pub mod trainer;
pub mod window;

mod error;

pub use error::{Error, Result};

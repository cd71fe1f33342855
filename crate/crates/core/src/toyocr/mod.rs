//! A desk-scale text recognizer: synthetic glyph words, a 4-conv encoder with
//! optional TextAdaIN after every convolution, CTC training and evaluation.

pub mod checkpoint;
pub mod ctc;
pub mod eval;
pub mod glyphs;
pub mod model;
pub mod train;

pub use eval::{evaluate, gap_table, gap_table_csv, word_accuracy, GapRow};
pub use glyphs::SyntheticSample;
pub use model::{Layers, Model};
pub use train::{metrics_csv, train, train_with, MetricRow, TrainConfig, TrainOutcome};

//! Word accuracy on seeded test sets and the baseline-vs-TextAdaIN gap table.

use std::fmt::Write as _;

use super::glyphs::SyntheticSample;
use super::model::Model;
use super::train::heldout_set;
use crate::corruptions::{self, Category, CorruptionKind, CorruptionSpec, Image};
use crate::tensor::Rng;
use crate::Result;

const EVAL_CHUNK: usize = 64;
// Corruption draws live on streams well clear of the training streams.
const STREAM_CORRUPT_BASE: u64 = 1 << 32;

/// Case-insensitive exact-match rate of `model` on `samples`.
pub fn word_accuracy(model: &Model, samples: &[SyntheticSample]) -> Result<f64> {
    let images: Vec<&Image> = samples.iter().map(|s| &s.image).collect();
    accuracy_on(model, &images, samples)
}

fn accuracy_on(model: &Model, images: &[&Image], samples: &[SyntheticSample]) -> Result<f64> {
    if samples.is_empty() {
        return Ok(0.0);
    }
    let preds = model.predict(images, EVAL_CHUNK)?;
    let hits = preds
        .iter()
        .zip(samples)
        .filter(|(p, s)| p.eq_ignore_ascii_case(&s.label))
        .count();
    Ok(hits as f64 / samples.len() as f64)
}

/// Accuracy on `n` test samples from `seed`, each corrupted by `spec` with a
/// per-image RNG stream (so results do not depend on evaluation order).
pub fn evaluate(model: &Model, spec: &CorruptionSpec, seed: u64, n: usize) -> Result<f64> {
    let samples = heldout_set(seed, n);
    evaluate_on(model, spec, seed, &samples)
}

pub fn evaluate_on(model: &Model, spec: &CorruptionSpec, seed: u64, samples: &[SyntheticSample]) -> Result<f64> {
    let corrupted = samples
        .iter()
        .enumerate()
        .map(|(i, s)| {
            let mut rng = Rng::with_stream(seed, STREAM_CORRUPT_BASE + i as u64);
            corruptions::apply(&s.image, spec, &mut rng)
        })
        .collect::<Result<Vec<_>>>()?;
    let refs: Vec<&Image> = corrupted.iter().collect();
    accuracy_on(model, &refs, samples)
}

#[derive(Clone, Debug, PartialEq)]
pub struct GapRow {
    pub kind: CorruptionKind,
    pub category: Category,
    pub baseline: f64,
    pub textadain: f64,
    /// `textadain - baseline`.
    pub gap: f64,
    /// `gap / clean gap`; NaN when the clean gap is zero.
    pub normalized_gap: f64,
}

/// One row per kind present in both inputs, in the order of `baseline`. The
/// clean (`None`) row anchors the normalization.
pub fn gap_table(baseline: &[(CorruptionKind, f64)], textadain: &[(CorruptionKind, f64)]) -> Vec<GapRow> {
    let lookup = |k: CorruptionKind| textadain.iter().find(|(t, _)| *t == k).map(|&(_, a)| a);
    let clean_gap = baseline
        .iter()
        .find(|(k, _)| *k == CorruptionKind::None)
        .and_then(|&(k, b)| lookup(k).map(|t| t - b));
    baseline
        .iter()
        .filter_map(|&(kind, b)| {
            let t = lookup(kind)?;
            let gap = t - b;
            let normalized_gap = match clean_gap {
                Some(c) if c != 0.0 => gap / c,
                _ => f64::NAN,
            };
            Some(GapRow {
                kind,
                category: kind.category(),
                baseline: b,
                textadain: t,
                gap,
                normalized_gap,
            })
        })
        .collect()
}

pub fn gap_table_csv(rows: &[GapRow]) -> String {
    let mut s = String::from("corruption,category,baseline,textadain,gap,normalized_gap\n");
    for r in rows {
        let _ = writeln!(
            s,
            "{},{},{:.4},{:.4},{:+.4},{:.4}",
            r.kind,
            r.category.name(),
            r.baseline,
            r.textadain,
            r.gap,
            r.normalized_gap
        );
    }
    s
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::tensor::Rng;

    #[test]
    fn gap_rows_and_normalization() {
        let base = [(CorruptionKind::None, 0.80), (CorruptionKind::Cutout, 0.50)];
        let ours = [(CorruptionKind::Cutout, 0.62), (CorruptionKind::None, 0.84)];
        let rows = gap_table(&base, &ours);
        assert_eq!(rows.len(), 2);
        assert!((rows[0].normalized_gap - 1.0).abs() < 1e-12);
        assert!((rows[1].gap - 0.12).abs() < 1e-12);
        assert!((rows[1].normalized_gap - 3.0).abs() < 1e-9);
        assert_eq!(rows[1].category, Category::LocalMasking);
        let csv = gap_table_csv(&rows);
        assert!(csv.starts_with("corruption,category"));
        assert!(csv.contains("cutout,local_masking,0.5000,0.6200,+0.1200,3.0000"));
    }

    #[test]
    fn zero_clean_gap_is_nan() {
        let base = [(CorruptionKind::None, 0.8), (CorruptionKind::Cutout, 0.5)];
        let rows = gap_table(&base, &base);
        assert!(rows[1].normalized_gap.is_nan());
    }

    #[test]
    fn evaluation_is_deterministic() {
        let model = Model::init(&mut Rng::new(2));
        let spec = CorruptionSpec::default_for(CorruptionKind::AdditiveGaussianNoise);
        let a = evaluate(&model, &spec, 5, 16).unwrap();
        assert_eq!(a, evaluate(&model, &spec, 5, 16).unwrap());
        assert!((0.0..=1.0).contains(&a));
    }
}

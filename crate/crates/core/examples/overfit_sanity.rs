//! Trains each neural architecture at full size on 20 synthetic examples for
//! 200 epochs and reports the training-set correlation. Every model should
//! memorize the set.

use std::time::Instant;

use emoreg::eval::pearson_r;
use emoreg::models::{ModelInput, ModelKind, ModelSpec};
use emoreg::synth::{linear_corpus, SynthConfig};
use emoreg::text::tokenize;
use emoreg::training::{fit, TrainConfig};

fn main() -> emoreg::Result<()> {
    let corpus = linear_corpus(&SynthConfig {
        n_docs: 20,
        vocab: 40,
        dim: 16,
        ..SynthConfig::default()
    })?;
    let inputs: Vec<ModelInput> = corpus
        .dataset
        .texts()
        .map(|t| ModelInput::encode(&tokenize(t), &corpus.table, 32))
        .collect();
    let gold = corpus.dataset.target(0);
    let mean = gold.iter().sum::<f64>() / gold.len() as f64;
    let sd = (gold.iter().map(|y| (y - mean).powi(2)).sum::<f64>() / gold.len() as f64).sqrt();
    let targets: Vec<Vec<f64>> = gold.iter().map(|y| vec![(y - mean) / sd]).collect();

    for kind in ModelKind::NEURAL {
        let start = Instant::now();
        let spec = ModelSpec::new(kind, corpus.table.dim(), 1);
        let (model, trace) = fit(&spec, &corpus.table, &inputs, &targets, &TrainConfig { seed: 1, ..TrainConfig::default() })?;
        let pred: Vec<f64> = model.predict(&inputs)?.into_iter().map(|p| p[0]).collect();
        let r = pearson_r(&pred, &gold)?.r;
        println!(
            "{kind:>9}  train r = {r:.4}  final loss = {:.4}  ({:.1}s)",
            trace.last().copied().unwrap_or(f64::NAN),
            start.elapsed().as_secs_f64()
        );
    }
    Ok(())
}

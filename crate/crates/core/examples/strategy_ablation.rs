//! Frozen, tuned and learned embeddings for the FFN on a corpus whose
//! targets depend on the given vectors: frozen should win clearly.

use emoreg::eval::{plan_repeated_cv, run_repeated_cv, Regressor};
use emoreg::models::ModelKind;
use emoreg::pipeline::{ModelRegressor, PipelineConfig};
use emoreg::synth::{linear_corpus, SynthConfig};
use emoreg::training::Strategy;

fn main() -> emoreg::Result<()> {
    let corpus = linear_corpus(&SynthConfig { n_docs: 100, vocab: 200, ..SynthConfig::default() })?;
    let regs: Vec<ModelRegressor> = Strategy::ALL
        .into_iter()
        .map(|s| {
            let mut config = PipelineConfig::default();
            config.train.strategy = s;
            Ok(ModelRegressor::new(ModelKind::Ffn, Some(&corpus.table), config)?.with_label(format!("ffn/{s}")))
        })
        .collect::<emoreg::Result<_>>()?;
    let models: Vec<&dyn Regressor> = regs.iter().map(|r| r as &dyn Regressor).collect();
    let plan = plan_repeated_cv(corpus.dataset.len(), 5, 1, 1)?;
    for report in run_repeated_cv(&plan, &models, &corpus.dataset)? {
        println!("{:<14} mean r {:.3}", report.model, report.grand_mean());
    }
    Ok(())
}

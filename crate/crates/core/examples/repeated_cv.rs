//! Repeated k-fold cross-validation of several models on one shared plan,
//! with per-repetition means and the split hash.

use emoreg::eval::{plan_repeated_cv, run_repeated_cv, Regressor};
use emoreg::models::{Hyperparams, ModelKind};
use emoreg::pipeline::{ModelRegressor, PipelineConfig};
use emoreg::synth::{linear_corpus, SynthConfig};

fn main() -> emoreg::Result<()> {
    let corpus = linear_corpus(&SynthConfig { n_docs: 120, ..SynthConfig::default() })?;
    let mut config = PipelineConfig::default();
    config.train.epochs = 30;
    config.hyper = Hyperparams::uniform_width(16);
    let regs: Vec<ModelRegressor> = [ModelKind::RidgeNgram, ModelKind::RidgeBv, ModelKind::Ffn, ModelKind::Cnn]
        .into_iter()
        .map(|k| ModelRegressor::new(k, Some(&corpus.table), config.clone()))
        .collect::<emoreg::Result<_>>()?;
    let models: Vec<&dyn Regressor> = regs.iter().map(|r| r as &dyn Regressor).collect();

    let plan = plan_repeated_cv(corpus.dataset.len(), 5, 3, 42)?;
    println!("split hash {}", plan.split_hash());
    for report in run_repeated_cv(&plan, &models, &corpus.dataset)? {
        let reps: Vec<String> = report.repetition_means().iter().map(|(_, r)| format!("{r:.3}")).collect();
        println!("{:<12} mean r {:.3}  per repetition [{}]", report.model, report.grand_mean(), reps.join(", "));
    }
    Ok(())
}

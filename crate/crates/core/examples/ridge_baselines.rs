//! Fits both ridge baselines on one synthetic split: n-gram counts and the
//! averaged word vectors, each with per-target lambda chosen by inner CV.

use emoreg::eval::{pearson_r, plan_repeated_cv, Regressor};
use emoreg::models::ModelKind;
use emoreg::pipeline::{ModelRegressor, PipelineConfig};
use emoreg::synth::{linear_corpus, SynthConfig};

fn main() -> emoreg::Result<()> {
    let corpus = linear_corpus(&SynthConfig { n_docs: 300, n_targets: 2, ..SynthConfig::default() })?;
    let plan = plan_repeated_cv(corpus.dataset.len(), 5, 1, 0)?;
    let (train, test) = plan.split(0, 0);
    for kind in [ModelKind::RidgeNgram, ModelKind::RidgeBv] {
        let reg = ModelRegressor::new(kind, Some(&corpus.table), PipelineConfig::default())?;
        let pred = reg.fit_predict(&corpus.dataset, &train, &test, 0)?;
        let rs: Vec<String> = (0..corpus.dataset.n_targets())
            .map(|k| {
                let p: Vec<f64> = pred.iter().map(|row| row[k]).collect();
                let g: Vec<f64> = test.iter().map(|&i| corpus.dataset.records[i].scores[k]).collect();
                pearson_r(&p, &g).map(|c| format!("{:.3}", c.r))
            })
            .collect::<emoreg::Result<_>>()?;
        println!("{kind:<12} held-out r per target: {}", rs.join(", "));
    }
    Ok(())
}

//! Performance against training-set size for a ridge baseline and the FFN,
//! trained on random subsets and tested on the remainder.

use emoreg::eval::{training_size_sweep, Regressor};
use emoreg::models::ModelKind;
use emoreg::pipeline::{ModelRegressor, PipelineConfig};
use emoreg::synth::{linear_corpus, SynthConfig};

fn main() -> emoreg::Result<()> {
    let corpus = linear_corpus(&SynthConfig { n_docs: 400, ..SynthConfig::default() })?;
    let mut config = PipelineConfig::default();
    config.train.epochs = 50;
    let ridge = ModelRegressor::new(ModelKind::RidgeNgram, None, config.clone())?;
    let ffn = ModelRegressor::new(ModelKind::Ffn, Some(&corpus.table), config)?;
    let models: [&dyn Regressor; 2] = [&ridge, &ffn];
    let grid = [10, 25, 50, 100, 200, 300];
    println!("model,n,mean_r,degenerate_cells");
    for p in training_size_sweep(&corpus.dataset, &grid, 3, 5, &models)? {
        println!("{},{},{:.3},{}", p.model, p.n_train, p.mean_r, p.degenerate_cells);
    }
    Ok(())
}

//! Compares reverse-mode gradients of a small GRU regressor's training loss
//! with central finite differences, parameter tensor by tensor.

use emoreg::models::{build_model, Hyperparams, ModelInput, ModelKind, ModelSpec};
use emoreg::seed;
use emoreg::synth::{linear_corpus, SynthConfig};
use emoreg::tape::{Mode, Tape};
use emoreg::tensor::Tensor;
use emoreg::text::tokenize;
use rand::Rng;

const H: f64 = 1e-6;

fn main() -> emoreg::Result<()> {
    let corpus = linear_corpus(&SynthConfig { n_docs: 6, vocab: 12, dim: 4, ..SynthConfig::default() })?;
    let inputs: Vec<ModelInput> = corpus.dataset.texts().map(|t| ModelInput::encode(&tokenize(t), &corpus.table, 6)).collect();
    let batch: Vec<&ModelInput> = inputs.iter().collect();
    let target = Tensor::new(vec![6, 1], corpus.dataset.target(0))?;
    let spec = ModelSpec::new(ModelKind::Gru, 4, 1).with_hyper(Hyperparams::uniform_width(3));
    let mut model = build_model(&spec, &corpus.table, 3)?;
    // small nonzero biases keep every unit off the ReLU kink
    let mut rng = seed::rng(4);
    for t in model.params_mut().tensors_mut().iter_mut().filter(|t| t.shape().len() == 1) {
        t.data_mut().iter_mut().for_each(|b| *b = rng.random_range(-0.2..0.2));
    }

    let loss = |m: &emoreg::models::NeuralModel| -> emoreg::Result<f64> {
        let mut tape = Tape::new();
        let fwd = m.forward(&mut tape, &batch, Mode::Train, &mut seed::rng(9))?;
        let l = tape.mse(fwd.output, &target)?;
        Ok(tape.value(l).data()[0])
    };

    let analytic: Vec<Vec<f64>> = {
        let mut tape = Tape::new();
        let fwd = model.forward(&mut tape, &batch, Mode::Train, &mut seed::rng(9))?;
        let l = tape.mse(fwd.output, &target)?;
        let grads = tape.backward(l)?;
        fwd.params.iter().zip(model.params().tensors()).map(|(v, t)| grads.get(*v).map_or(vec![0.0; t.numel()], <[f64]>::to_vec)).collect()
    };

    let names = model.params().names().to_vec();
    for (i, name) in names.iter().enumerate() {
        let mut worst: f64 = 0.0;
        for j in 0..model.params().tensors()[i].numel() {
            let orig = model.params().tensors()[i].data()[j];
            model.params_mut().tensors_mut()[i].data_mut()[j] = orig + H;
            let up = loss(&model)?;
            model.params_mut().tensors_mut()[i].data_mut()[j] = orig - H;
            let down = loss(&model)?;
            model.params_mut().tensors_mut()[i].data_mut()[j] = orig;
            let numeric = (up - down) / (2.0 * H);
            worst = worst.max((numeric - analytic[i][j]).abs() / (numeric.abs() + analytic[i][j].abs()).max(1e-6));
        }
        let norm = analytic[i].iter().map(|g| g * g).sum::<f64>().sqrt();
        println!("{name:<24} |grad| {norm:.3e}  max relative error {worst:.2e}");
    }
    Ok(())
}

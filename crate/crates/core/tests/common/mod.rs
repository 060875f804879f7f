//! Shared oracles and fixtures for the integration suites.
#![allow(dead_code)]

use emoreg::embeddings::EmbeddingTable;
use emoreg::models::{ModelInput, NeuralModel};
use emoreg::seed;
use emoreg::tape::{Mode, Tape, Var};
use emoreg::tensor::Tensor;
use rand::Rng;

pub const FD_STEP: f64 = 1e-6;

/// `‖a − n‖ / max(‖a‖ + ‖n‖, 1e-6)`; the floor keeps all-but-zero
/// gradients from turning finite-difference rounding into huge ratios.
pub fn rel_err(analytic: &[f64], numeric: &[f64]) -> f64 {
    assert_eq!(analytic.len(), numeric.len());
    let norm = |v: &mut dyn Iterator<Item = f64>| v.map(|x| x * x).sum::<f64>().sqrt();
    let diff = norm(&mut analytic.iter().zip(numeric).map(|(a, b)| a - b));
    let scale = norm(&mut analytic.iter().copied()) + norm(&mut numeric.iter().copied());
    diff / scale.max(1e-6)
}

pub fn random_tensor<R: Rng>(rng: &mut R, shape: &[usize], scale: f64) -> Tensor {
    let n = shape.iter().product();
    Tensor::new(shape.to_vec(), (0..n).map(|_| rng.random_range(-scale..scale)).collect()).unwrap()
}

/// Scalarizes `out` as `Σ out ⊙ W` with a fixed random `W`, so every output
/// element contributes a distinct weight.
pub fn project(tape: &mut Tape<'_>, out: Var, seed: u64) -> Var {
    let shape = tape.value(out).shape().to_vec();
    let w = random_tensor(&mut seed::rng(seed), &shape, 1.0);
    let w = tape.constant(w);
    let prod = tape.mul(out, w).unwrap();
    tape.sum(prod)
}

/// Largest relative error between backprop and central differences of
/// `f` over every element of every input.
pub fn check_fn(inputs: &[Tensor], f: impl Fn(&mut Tape<'_>, &[Var]) -> Var) -> f64 {
    let mut tape = Tape::new();
    let vars: Vec<Var> = inputs.iter().map(|t| tape.variable(t.clone())).collect();
    let loss = f(&mut tape, &vars);
    let grads = tape.backward(loss).unwrap();

    let eval = |inputs: &[Tensor]| {
        let mut tape = Tape::new();
        let vars: Vec<Var> = inputs.iter().map(|t| tape.constant(t.clone())).collect();
        let loss = f(&mut tape, &vars);
        tape.value(loss).data()[0]
    };
    let mut worst: f64 = 0.0;
    for (i, v) in vars.iter().enumerate() {
        let analytic = grads.get(*v).map(<[f64]>::to_vec).unwrap_or_else(|| vec![0.0; inputs[i].numel()]);
        let mut numeric = vec![0.0; inputs[i].numel()];
        let mut work = inputs.to_vec();
        for j in 0..numeric.len() {
            let orig = work[i].data()[j];
            work[i].data_mut()[j] = orig + FD_STEP;
            let up = eval(&work);
            work[i].data_mut()[j] = orig - FD_STEP;
            let down = eval(&work);
            work[i].data_mut()[j] = orig;
            numeric[j] = (up - down) / (2.0 * FD_STEP);
        }
        worst = worst.max(rel_err(&analytic, &numeric));
    }
    worst
}

/// Training-mode MSE of a model on a batch; dropout masks are fixed by
/// `mask_seed` so the loss is a deterministic function of the parameters.
pub fn model_loss(model: &NeuralModel, batch: &[&ModelInput], target: &Tensor, mask_seed: u64) -> f64 {
    let mut tape = Tape::new();
    let fwd = model.forward(&mut tape, batch, Mode::Train, &mut seed::rng(mask_seed)).unwrap();
    let loss = tape.mse(fwd.output, target).unwrap();
    tape.value(loss).data()[0]
}

/// Relative error of the full parameter gradient (embedding included when
/// trainable) of the training loss.
pub fn check_model(model: &mut NeuralModel, batch: &[ModelInput], target: &Tensor, mask_seed: u64) -> f64 {
    let refs: Vec<&ModelInput> = batch.iter().collect();
    let (mut analytic, sizes) = {
        let mut tape = Tape::new();
        let fwd = model.forward(&mut tape, &refs, Mode::Train, &mut seed::rng(mask_seed)).unwrap();
        let loss = tape.mse(fwd.output, target).unwrap();
        let grads = tape.backward(loss).unwrap();
        let mut out = Vec::new();
        let mut sizes = Vec::new();
        for (v, t) in fwd.params.iter().zip(model.params().tensors()) {
            out.extend(grads.get(*v).map(<[f64]>::to_vec).unwrap_or_else(|| vec![0.0; t.numel()]));
            sizes.push(t.numel());
        }
        if model.embedding_trainable() {
            out.extend(grads.get(fwd.embedding).unwrap().to_vec());
        }
        (out, sizes)
    };
    let mut numeric = Vec::with_capacity(analytic.len());
    for (i, &n) in sizes.iter().enumerate() {
        for j in 0..n {
            let orig = model.params().tensors()[i].data()[j];
            model.params_mut().tensors_mut()[i].data_mut()[j] = orig + FD_STEP;
            let up = model_loss(model, &refs, target, mask_seed);
            model.params_mut().tensors_mut()[i].data_mut()[j] = orig - FD_STEP;
            let down = model_loss(model, &refs, target, mask_seed);
            model.params_mut().tensors_mut()[i].data_mut()[j] = orig;
            numeric.push((up - down) / (2.0 * FD_STEP));
        }
    }
    if model.embedding_trainable() {
        // the padding row is pinned to zero and never receives a gradient
        let dim = model.embedding().dims2().unwrap().1;
        analytic.drain(numeric.len()..numeric.len() + dim);
        for j in dim..model.embedding().numel() {
            let orig = model.embedding().data()[j];
            model.embedding_mut().data_mut()[j] = orig + FD_STEP;
            let up = model_loss(model, &refs, target, mask_seed);
            model.embedding_mut().data_mut()[j] = orig - FD_STEP;
            let down = model_loss(model, &refs, target, mask_seed);
            model.embedding_mut().data_mut()[j] = orig;
            numeric.push((up - down) / (2.0 * FD_STEP));
        }
    }
    analytic.truncate(numeric.len());
    rel_err(&analytic, &numeric)
}

/// Small table over `w0 … w{n-1}` with entries in (-1, 1).
pub fn small_table(n: usize, dim: usize, seed: u64) -> EmbeddingTable {
    let mut rng = seed::rng(seed);
    EmbeddingTable::from_entries(
        (0..n).map(|i| (format!("w{i}"), (0..dim).map(|_| rng.random_range(-1.0..1.0)).collect())),
        dim,
    )
    .unwrap()
}

/// Independent normal-equation solver: builds `[1 X]`, forms the augmented
/// system with an unpenalized intercept and solves by Gaussian elimination
/// with partial pivoting. Returns `(weights, intercept)`.
pub fn ridge_oracle(x: &[Vec<f64>], y: &[f64], lambda: f64) -> (Vec<f64>, f64) {
    let p = x[0].len();
    let m = p + 1;
    let mut a = vec![vec![0.0; m + 1]; m];
    for (row, &yi) in x.iter().zip(y) {
        let z: Vec<f64> = std::iter::once(1.0).chain(row.iter().copied()).collect();
        for i in 0..m {
            for j in 0..m {
                a[i][j] += z[i] * z[j];
            }
            a[i][m] += z[i] * yi;
        }
    }
    for (i, row) in a.iter_mut().enumerate().skip(1) {
        row[i] += lambda;
    }
    for col in 0..m {
        let piv = (col..m).max_by(|&r, &s| a[r][col].abs().total_cmp(&a[s][col].abs())).unwrap();
        a.swap(col, piv);
        let d = a[col][col];
        for r in 0..m {
            if r != col {
                let factor = a[r][col] / d;
                for c in col..=m {
                    a[r][c] -= factor * a[col][c];
                }
            }
        }
    }
    let sol: Vec<f64> = (0..m).map(|i| a[i][m] / a[i][i]).collect();
    (sol[1..].to_vec(), sol[0])
}

/// Direct-formula Pearson correlation (textbook single-pass sums).
pub fn pearson_oracle(x: &[f64], y: &[f64]) -> f64 {
    let n = x.len() as f64;
    let (sx, sy) = (x.iter().sum::<f64>(), y.iter().sum::<f64>());
    let sxy: f64 = x.iter().zip(y).map(|(a, b)| a * b).sum();
    let sxx: f64 = x.iter().map(|a| a * a).sum();
    let syy: f64 = y.iter().map(|b| b * b).sum();
    (n * sxy - sx * sy) / ((n * sxx - sx * sx).sqrt() * (n * syy - sy * sy).sqrt())
}

/// Student-t CDF by composite Simpson integration of the density from 0,
/// in log-gamma form, with 20 000 panels.
pub fn student_t_cdf_oracle(t: f64, df: f64) -> f64 {
    fn ln_gamma(x: f64) -> f64 {
        // Lanczos (g = 7, n = 9)
        const C: [f64; 9] = [
            0.999_999_999_999_809_9,
            676.520_368_121_885_1,
            -1_259.139_216_722_402_8,
            771.323_428_777_653_1,
            -176.615_029_162_140_6,
            12.507_343_278_686_905,
            -0.138_571_095_265_720_12,
            9.984_369_578_019_572e-6,
            1.505_632_735_149_311_6e-7,
        ];
        if x < 0.5 {
            std::f64::consts::PI.ln() - (std::f64::consts::PI * x).sin().ln() - ln_gamma(1.0 - x)
        } else {
            let x = x - 1.0;
            let mut a = C[0];
            let t = x + 7.5;
            for (i, c) in C.iter().enumerate().skip(1) {
                a += c / (x + i as f64);
            }
            0.5 * (2.0 * std::f64::consts::PI).ln() + (x + 0.5) * t.ln() - t + a.ln()
        }
    }
    let log_norm = ln_gamma((df + 1.0) / 2.0) - ln_gamma(df / 2.0) - 0.5 * (df * std::f64::consts::PI).ln();
    let density = |x: f64| (log_norm - (df + 1.0) / 2.0 * (1.0 + x * x / df).ln()).exp();
    let panels = 20_000;
    let h = t.abs() / panels as f64;
    let mut s = density(0.0) + density(t.abs());
    for i in 1..panels {
        let x = i as f64 * h;
        s += if i % 2 == 1 { 4.0 } else { 2.0 } * density(x);
    }
    let half = s * h / 3.0;
    if t >= 0.0 {
        0.5 + half
    } else {
        0.5 - half
    }
}

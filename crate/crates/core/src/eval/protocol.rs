//! Seeded repeated cross-validation, fixed-split evaluation and
//! training-size sweeps. Every function here runs its cells through rayon;
//! callers bound parallelism by installing a sized thread pool.

use std::collections::HashSet;

use rand::seq::SliceRandom;
use rayon::prelude::*;
use sha2::{Digest, Sha256};

use crate::data::Dataset;
use crate::error::{Error, Result};
use crate::seed;

use super::metrics::pearson_r;
use super::report::{Cell, EvalReport};

const TAG_CV: u64 = 0x4356;
const TAG_SWEEP: u64 = 0x5357;
const TAG_FIT: u64 = 0x4654;

/// Something that can be trained on some rows of a dataset and score others.
pub trait Regressor: Sync {
    fn name(&self) -> String;

    /// Predictions for `test`, one row of `dataset.n_targets()` scores each.
    /// `seed` is the cell's own seed; deterministic models may ignore it.
    fn fit_predict(&self, dataset: &Dataset, train: &[usize], test: &[usize], seed: u64) -> Result<Vec<Vec<f64>>>;
}

/// Fold labels for `reps` shuffled `k`-fold partitions of `0..n`.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct CvPlan {
    pub n: usize,
    pub k: usize,
    pub reps: usize,
    pub seed: u64,
    /// `assignments[rep][i]` is the fold of example `i`.
    pub assignments: Vec<Vec<usize>>,
}

/// Each repetition shuffles `0..n` with its own seeded stream and deals the
/// shuffled indices round-robin into `k` folds.
pub fn plan_repeated_cv(n: usize, k: usize, reps: usize, seed: u64) -> Result<CvPlan> {
    if k < 2 {
        return Err(Error::invalid(format!("need at least 2 folds, got {k}")));
    }
    if reps == 0 {
        return Err(Error::invalid("need at least one repetition"));
    }
    if n < k {
        return Err(Error::invalid(format!("{n} examples cannot fill {k} folds")));
    }
    let assignments = (0..reps)
        .map(|rep| {
            let mut order: Vec<usize> = (0..n).collect();
            order.shuffle(&mut seed::rng_for(seed, &[TAG_CV, rep as u64]));
            let mut fold = vec![0; n];
            for (pos, &i) in order.iter().enumerate() {
                fold[i] = pos % k;
            }
            fold
        })
        .collect();
    Ok(CvPlan {
        n,
        k,
        reps,
        seed,
        assignments,
    })
}

impl CvPlan {
    /// `(train, test)` indices of one cell, both ascending.
    pub fn split(&self, rep: usize, fold: usize) -> (Vec<usize>, Vec<usize>) {
        (0..self.n).partition(|&i| self.assignments[rep][i] != fold)
    }

    pub fn fold_sizes(&self, rep: usize) -> Vec<usize> {
        let mut sizes = vec![0; self.k];
        for &f in &self.assignments[rep] {
            sizes[f] += 1;
        }
        sizes
    }

    /// Hex SHA-256 over every fold label; equal hashes mean equal splits.
    pub fn split_hash(&self) -> String {
        let mut h = Sha256::new();
        h.update((self.n as u64).to_le_bytes());
        h.update((self.k as u64).to_le_bytes());
        for rep in &self.assignments {
            for &f in rep {
                h.update((f as u32).to_le_bytes());
            }
        }
        h.finalize().iter().map(|b| format!("{b:02x}")).collect()
    }

    fn cell_seed(&self, rep: usize, fold: usize) -> u64 {
        seed::derive(self.seed, &[TAG_FIT, rep as u64, fold as u64])
    }
}

fn score(
    dataset: &Dataset,
    test: &[usize],
    pred: &[Vec<f64>],
    repetition: usize,
    fold: usize,
) -> Result<Vec<Cell>> {
    let k = dataset.n_targets();
    if pred.len() != test.len() || pred.iter().any(|p| p.len() != k) {
        return Err(Error::invalid(format!(
            "regressor returned {} predictions for {} test rows",
            pred.len(),
            test.len()
        )));
    }
    (0..k)
        .map(|v| {
            let p: Vec<f64> = pred.iter().map(|row| row[v]).collect();
            let g: Vec<f64> = test.iter().map(|&i| dataset.records[i].scores[v]).collect();
            let c = pearson_r(&p, &g)?;
            Ok(Cell {
                repetition,
                fold,
                variable: v,
                r: c.r,
                degenerate: c.degenerate,
            })
        })
        .collect()
}

/// Trains and scores every (model, repetition, fold) cell under one shared
/// plan. Reports come back in `models` order.
pub fn run_repeated_cv(plan: &CvPlan, models: &[&dyn Regressor], dataset: &Dataset) -> Result<Vec<EvalReport>> {
    if plan.n != dataset.len() {
        return Err(Error::invalid(format!(
            "plan covers {} examples but the dataset has {}",
            plan.n,
            dataset.len()
        )));
    }
    let jobs: Vec<(usize, usize, usize)> = (0..models.len())
        .flat_map(|m| (0..plan.reps).flat_map(move |r| (0..plan.k).map(move |f| (m, r, f))))
        .collect();
    let results: Vec<Vec<Cell>> = jobs
        .par_iter()
        .map(|&(m, rep, fold)| {
            let (train, test) = plan.split(rep, fold);
            let pred = models[m].fit_predict(dataset, &train, &test, plan.cell_seed(rep, fold))?;
            log::debug!("{} rep {rep} fold {fold} done", models[m].name());
            score(dataset, &test, &pred, rep, fold)
        })
        .collect::<Result<_>>()?;
    let per_model = plan.reps * plan.k;
    Ok(models
        .iter()
        .zip(results.chunks(per_model))
        .map(|(m, chunk)| EvalReport::new(m.name(), dataset.schema.names(), chunk.concat()))
        .collect())
}

/// Trains on `train` once per seed and scores on `test`; each seed becomes
/// one repetition of the report.
pub fn run_fixed_split(model: &dyn Regressor, train: &Dataset, test: &Dataset, seeds: &[u64]) -> Result<EvalReport> {
    if seeds.is_empty() {
        return Err(Error::invalid("need at least one seed"));
    }
    if train.schema != test.schema {
        return Err(Error::invalid("train and test use different schemas"));
    }
    let train_texts: HashSet<&str> = train.texts().collect();
    if let Some(dup) = test.texts().find(|t| train_texts.contains(t)) {
        return Err(Error::invalid(format!("train and test overlap on text `{dup}`")));
    }
    let mut records = train.records.clone();
    records.extend(test.records.iter().cloned());
    let merged = Dataset::new(train.schema.clone(), records);
    let train_idx: Vec<usize> = (0..train.len()).collect();
    let test_idx: Vec<usize> = (train.len()..merged.len()).collect();
    let cells: Vec<Vec<Cell>> = seeds
        .par_iter()
        .enumerate()
        .map(|(i, &s)| {
            let pred = model.fit_predict(&merged, &train_idx, &test_idx, s)?;
            score(&merged, &test_idx, &pred, i, 0)
        })
        .collect::<Result<_>>()?;
    Ok(EvalReport::new(model.name(), merged.schema.names(), cells.concat()))
}

/// The default sweep grid: 1, 10, 20, …, 100, 200, …, 900.
pub fn default_sweep_grid() -> Vec<usize> {
    let mut g = vec![1];
    g.extend((1..=10).map(|i| i * 10));
    g.extend((2..=9).map(|i| i * 100));
    g
}

/// Training indices of one (N, repetition) sweep cell, ascending.
pub fn sweep_sample(n_total: usize, n_train: usize, rep: usize, seed: u64) -> Vec<usize> {
    let mut order: Vec<usize> = (0..n_total).collect();
    order.shuffle(&mut seed::rng_for(seed, &[TAG_SWEEP, n_train as u64, rep as u64]));
    let mut s = order[..n_train].to_vec();
    s.sort_unstable();
    s
}

#[derive(Clone, Debug, PartialEq)]
pub struct SweepPoint {
    pub model: String,
    pub n_train: usize,
    /// Mean over repetitions of the grand mean r.
    pub mean_r: f64,
    pub reps: usize,
    pub degenerate_cells: usize,
}

/// For every grid size, draws `reps` training samples (shared by all
/// models), trains on each and tests on the complement.
pub fn training_size_sweep(
    dataset: &Dataset,
    grid: &[usize],
    reps: usize,
    seed: u64,
    models: &[&dyn Regressor],
) -> Result<Vec<SweepPoint>> {
    if reps == 0 || grid.is_empty() {
        return Err(Error::invalid("sweep needs at least one size and one repetition"));
    }
    if let Some(&bad) = grid.iter().find(|&&n| n == 0 || n >= dataset.len()) {
        return Err(Error::invalid(format!(
            "training size {bad} must lie in 1..{} for a dataset of {} examples",
            dataset.len(),
            dataset.len()
        )));
    }
    let jobs: Vec<(usize, usize, usize)> = (0..models.len())
        .flat_map(|m| grid.iter().flat_map(move |&n| (0..reps).map(move |r| (m, n, r))))
        .collect();
    let results: Vec<EvalReport> = jobs
        .par_iter()
        .map(|&(m, n, rep)| {
            let train = sweep_sample(dataset.len(), n, rep, seed);
            let keep: HashSet<usize> = train.iter().copied().collect();
            let test: Vec<usize> = (0..dataset.len()).filter(|i| !keep.contains(i)).collect();
            let cell_seed = seed::derive(seed, &[TAG_FIT, n as u64, rep as u64]);
            let pred = models[m].fit_predict(dataset, &train, &test, cell_seed)?;
            let cells = score(dataset, &test, &pred, rep, 0)?;
            Ok(EvalReport::new(models[m].name(), dataset.schema.names(), cells))
        })
        .collect::<Result<_>>()?;
    Ok(jobs
        .chunks(reps)
        .zip(results.chunks(reps))
        .map(|(job, reports)| SweepPoint {
            model: models[job[0].0].name(),
            n_train: job[0].1,
            mean_r: reports.iter().map(EvalReport::grand_mean).sum::<f64>() / reps as f64,
            reps,
            degenerate_cells: reports.iter().map(|r| r.degenerate_counts().iter().sum::<usize>()).sum(),
        })
        .collect())
}

/// Predicts the gold scores exactly.
#[derive(Clone, Copy, Debug, Default)]
pub struct OracleRegressor;

impl Regressor for OracleRegressor {
    fn name(&self) -> String {
        "oracle".into()
    }

    fn fit_predict(&self, dataset: &Dataset, _: &[usize], test: &[usize], _: u64) -> Result<Vec<Vec<f64>>> {
        Ok(test.iter().map(|&i| dataset.records[i].scores.clone()).collect())
    }
}

/// Predicts the training mean of every variable.
#[derive(Clone, Copy, Debug, Default)]
pub struct MeanRegressor;

impl Regressor for MeanRegressor {
    fn name(&self) -> String {
        "mean".into()
    }

    fn fit_predict(&self, dataset: &Dataset, train: &[usize], test: &[usize], _: u64) -> Result<Vec<Vec<f64>>> {
        let k = dataset.n_targets();
        let mut mean = vec![0.0; k];
        for &i in train {
            for (m, s) in mean.iter_mut().zip(&dataset.records[i].scores) {
                *m += s / train.len() as f64;
            }
        }
        Ok(vec![mean; test.len()])
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::data::{AnnotationSchema, Record};

    fn dataset(n: usize) -> Dataset {
        let records = (0..n)
            .map(|i| Record {
                text: format!("text {i}"),
                scores: vec![1.0 + (i % 7) as f64, 9.0 - (i % 5) as f64, 1.0 + ((i * 3) % 8) as f64],
                line: i + 2,
            })
            .collect();
        Dataset::new(AnnotationSchema::vad(), records)
    }

    #[test]
    fn plan_shapes() {
        let p = plan_repeated_cv(192, 10, 10, 3).unwrap();
        for rep in 0..10 {
            let mut sizes = p.fold_sizes(rep);
            sizes.sort_unstable();
            assert_eq!(sizes, [19, 19, 19, 19, 19, 19, 19, 19, 20, 20]);
        }
        let p = plan_repeated_cv(10, 10, 2, 0).unwrap();
        assert!(p.fold_sizes(1).iter().all(|&s| s == 1));
        assert_eq!(plan_repeated_cv(50, 10, 3, 9).unwrap(), plan_repeated_cv(50, 10, 3, 9).unwrap());
        assert_ne!(plan_repeated_cv(50, 10, 3, 9).unwrap().split_hash(), plan_repeated_cv(50, 10, 3, 8).unwrap().split_hash());
        assert!(plan_repeated_cv(9, 10, 1, 0).is_err());
    }

    #[test]
    fn oracle_scores_one_and_mean_scores_zero() {
        let d = dataset(40);
        let plan = plan_repeated_cv(40, 4, 2, 1).unwrap();
        let reports = run_repeated_cv(&plan, &[&OracleRegressor, &MeanRegressor], &d).unwrap();
        assert!((reports[0].grand_mean() - 1.0).abs() < 1e-12);
        assert_eq!(reports[1].grand_mean(), 0.0);
        assert_eq!(reports[1].degenerate_counts(), vec![8, 8, 8]);
        assert_eq!(reports[0].cells().len(), 2 * 4 * 3);
    }

    #[test]
    fn fixed_split_rejects_overlap() {
        let d = dataset(30);
        let train = d.subset(&(0..20).collect::<Vec<_>>());
        let test = d.subset(&(15..30).collect::<Vec<_>>());
        assert!(run_fixed_split(&OracleRegressor, &train, &test, &[1]).is_err());
        let test = d.subset(&(20..30).collect::<Vec<_>>());
        let r = run_fixed_split(&OracleRegressor, &train, &test, &[1, 2, 3]).unwrap();
        assert_eq!(r.repetitions(), vec![0, 1, 2]);
    }

    #[test]
    fn sweep_grid_and_errors() {
        let g = default_sweep_grid();
        assert_eq!(g.len(), 19);
        assert_eq!((g[0], g[1], g[10], g[18]), (1, 10, 100, 900));
        let d = dataset(30);
        let pts = training_size_sweep(&d, &[1, 10, 20], 2, 0, &[&OracleRegressor]).unwrap();
        assert!(pts.iter().all(|p| (p.mean_r - 1.0).abs() < 1e-12 && p.reps == 2));
        assert!(training_size_sweep(&d, &[30], 1, 0, &[&OracleRegressor]).is_err());
        // a single test row cannot be scored
        assert!(training_size_sweep(&d, &[29], 1, 0, &[&OracleRegressor]).is_err());
    }
}

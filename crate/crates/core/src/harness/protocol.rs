//! Random-split evaluation with small label budgets.

use std::fmt::Write as _;
use std::path::Path;

use rand::seq::SliceRandom;

use super::corr::{median, plcc, srcc};
use super::manifest::csv_error;
use super::regress::{fit_regressor, RegressorConfig};
use crate::error::{Error, Result};
use crate::rng;

pub const DEFAULT_BUDGETS: [usize; 3] = [50, 100, 200];
pub const DEFAULT_SPLITS: usize = 10;
pub const TRAIN_FRACTION: f64 = 0.8;

#[derive(Debug, Clone, PartialEq)]
pub struct ProtocolConfig {
    pub budgets: Vec<usize>,
    pub n_splits: usize,
    pub seed: u64,
    pub regressor: RegressorConfig,
}

impl Default for ProtocolConfig {
    fn default() -> Self {
        Self {
            budgets: DEFAULT_BUDGETS.to_vec(),
            n_splits: DEFAULT_SPLITS,
            seed: 0,
            regressor: RegressorConfig::default(),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SplitResult {
    pub split: usize,
    pub srcc: f64,
    pub plcc: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct BudgetReport {
    pub budget: usize,
    pub splits: Vec<SplitResult>,
    pub median_srcc: f64,
    pub median_plcc: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct EvalReport {
    pub seed: u64,
    pub n_splits: usize,
    pub budgets: Vec<BudgetReport>,
}

fn check_inputs(x: &[Vec<f64>], y: &[f64], cfg: &ProtocolConfig) -> Result<()> {
    if x.len() != y.len() {
        return Err(Error::Dimension(format!("{} feature rows vs {} scores", x.len(), y.len())));
    }
    if cfg.n_splits == 0 || cfg.budgets.is_empty() {
        return Err(Error::InvalidArgument("need at least one split and one budget".into()));
    }
    if cfg.budgets.iter().any(|&b| b < 2) {
        return Err(Error::InvalidArgument("label budgets must be at least 2".into()));
    }
    Ok(())
}

fn budget_subset(pool: &[usize], budget: usize, seed: u64, split: usize) -> Vec<usize> {
    let mut p = pool.to_vec();
    p.shuffle(&mut rng::stream(seed, split as u64, &format!("budget-{budget}")));
    p.truncate(budget);
    p
}

fn evaluate(
    x: &[Vec<f64>],
    y: &[f64],
    train: &[usize],
    tx: &[Vec<f64>],
    ty: &[f64],
    test: &[usize],
    reg: &RegressorConfig,
) -> Result<(f64, f64)> {
    let fx: Vec<Vec<f64>> = train.iter().map(|&i| x[i].clone()).collect();
    let fy: Vec<f64> = train.iter().map(|&i| y[i]).collect();
    let model = fit_regressor(&fx, &fy, reg)?;
    let pred = test.iter().map(|&i| model.predict(&tx[i])).collect::<Result<Vec<_>>>()?;
    let truth: Vec<f64> = test.iter().map(|&i| ty[i]).collect();
    Ok((srcc(&pred, &truth)?, plcc(&pred, &truth)?))
}

fn assemble(cfg: &ProtocolConfig, per_budget: Vec<(usize, Vec<SplitResult>)>) -> Result<EvalReport> {
    let budgets = per_budget
        .into_iter()
        .map(|(budget, splits)| {
            let s: Vec<f64> = splits.iter().map(|r| r.srcc).collect();
            let p: Vec<f64> = splits.iter().map(|r| r.plcc).collect();
            Ok(BudgetReport {
                budget,
                median_srcc: median(&s)?,
                median_plcc: median(&p)?,
                splits,
            })
        })
        .collect::<Result<_>>()?;
    Ok(EvalReport {
        seed: cfg.seed,
        n_splits: cfg.n_splits,
        budgets,
    })
}

/// 80/20 splits of one dataset; each budget is drawn from the 80% side.
pub fn run_protocol(x: &[Vec<f64>], y: &[f64], cfg: &ProtocolConfig) -> Result<EvalReport> {
    check_inputs(x, y, cfg)?;
    let n = x.len();
    let n_train = (TRAIN_FRACTION * n as f64).floor() as usize;
    if let Some(&b) = cfg.budgets.iter().find(|&&b| b > n_train) {
        return Err(Error::InsufficientData(format!(
            "budget {b} exceeds the {n_train}-image training pool of a {n}-image dataset"
        )));
    }
    if n - n_train < 2 {
        return Err(Error::InsufficientData(format!("{n} images leave fewer than 2 for testing")));
    }
    let mut per_budget: Vec<(usize, Vec<SplitResult>)> = cfg.budgets.iter().map(|&b| (b, Vec::new())).collect();
    for split in 0..cfg.n_splits {
        let mut perm: Vec<usize> = (0..n).collect();
        perm.shuffle(&mut rng::stream(cfg.seed, split as u64, "split"));
        let (pool, test) = perm.split_at(n_train);
        for (budget, results) in &mut per_budget {
            let train = budget_subset(pool, *budget, cfg.seed, split);
            let (s, p) = evaluate(x, y, &train, x, y, test, &cfg.regressor)?;
            results.push(SplitResult { split, srcc: s, plcc: p });
        }
    }
    assemble(cfg, per_budget)
}

/// Budgets drawn from dataset A, tested on all of dataset B.
pub fn run_cross_protocol(
    train_x: &[Vec<f64>],
    train_y: &[f64],
    test_x: &[Vec<f64>],
    test_y: &[f64],
    cfg: &ProtocolConfig,
) -> Result<EvalReport> {
    check_inputs(train_x, train_y, cfg)?;
    if test_x.len() != test_y.len() || test_x.len() < 2 {
        return Err(Error::InsufficientData("test set needs at least two scored images".into()));
    }
    if let Some(&b) = cfg.budgets.iter().find(|&&b| b > train_x.len()) {
        return Err(Error::InsufficientData(format!(
            "budget {b} exceeds the {}-image training set",
            train_x.len()
        )));
    }
    let pool: Vec<usize> = (0..train_x.len()).collect();
    let test: Vec<usize> = (0..test_x.len()).collect();
    let mut per_budget = Vec::new();
    for &budget in &cfg.budgets {
        let mut results = Vec::new();
        for split in 0..cfg.n_splits {
            let train = budget_subset(&pool, budget, cfg.seed, split);
            let (s, p) = evaluate(train_x, train_y, &train, test_x, test_y, &test, &cfg.regressor)?;
            results.push(SplitResult { split, srcc: s, plcc: p });
        }
        per_budget.push((budget, results));
    }
    assemble(cfg, per_budget)
}

impl EvalReport {
    pub fn budget(&self, budget: usize) -> Option<&BudgetReport> {
        self.budgets.iter().find(|b| b.budget == budget)
    }

    pub fn to_text(&self) -> String {
        let mut s = String::new();
        writeln!(s, "seed {}, {} splits", self.seed, self.n_splits).unwrap();
        writeln!(s, "{:>8}  {:>12}  {:>12}", "budget", "median SRCC", "median PLCC").unwrap();
        for b in &self.budgets {
            writeln!(s, "{:>8}  {:>12.4}  {:>12.4}", b.budget, b.median_srcc, b.median_plcc).unwrap();
        }
        s
    }

    /// One row per (budget, split) plus a `median` row per budget.
    pub fn save_csv(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        let mut w = csv::Writer::from_path(path).map_err(|e| csv_error(path, e))?;
        w.write_record(["budget", "split", "srcc", "plcc"]).map_err(|e| csv_error(path, e))?;
        for b in &self.budgets {
            for r in &b.splits {
                w.write_record([b.budget.to_string(), r.split.to_string(), r.srcc.to_string(), r.plcc.to_string()])
                    .map_err(|e| csv_error(path, e))?;
            }
            w.write_record([
                b.budget.to_string(),
                "median".to_string(),
                b.median_srcc.to_string(),
                b.median_plcc.to_string(),
            ])
            .map_err(|e| csv_error(path, e))?;
        }
        w.flush().map_err(|e| Error::io(path, e))
    }
}

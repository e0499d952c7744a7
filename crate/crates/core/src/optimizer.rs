//! Adam with reduce-on-plateau learning-rate scheduling and early stopping.
//!
//! The loss monitored by the schedule is the full objective, evaluated once
//! per iteration. The returned parameters are the best seen, not the last.

use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

const BETA1: f64 = 0.9;
const BETA2: f64 = 0.999;
const ADAM_EPS: f64 = 1e-8;

/// A named group of parameters. Frozen blocks are never modified.
#[derive(Debug, Clone, PartialEq)]
pub struct ParamBlock {
    pub name: String,
    pub values: Vec<f64>,
    pub frozen: bool,
}

impl ParamBlock {
    pub fn new(name: impl Into<String>, values: Vec<f64>) -> Self {
        Self { name: name.into(), values, frozen: false }
    }

    pub fn frozen(name: impl Into<String>, values: Vec<f64>) -> Self {
        Self { name: name.into(), values, frozen: true }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct OptimSchedule {
    pub max_iters: usize,
    pub lr_init: f64,
    pub lr_min: f64,
    pub plateau_patience: usize,
    pub plateau_factor: f64,
    pub early_stop_patience: usize,
    pub early_stop_min_delta: f64,
}

impl Default for OptimSchedule {
    fn default() -> Self {
        Self {
            max_iters: 1000,
            lr_init: 1e-2,
            lr_min: 1e-4,
            plateau_patience: 50,
            plateau_factor: 0.5,
            early_stop_patience: 150,
            early_stop_min_delta: 1e-6,
        }
    }
}

impl OptimSchedule {
    pub fn with_budget(max_iters: usize, lr_init: f64) -> Self {
        Self { max_iters, lr_init, ..Self::default() }
    }

    pub fn validate(&self) -> Result<()> {
        let ok = self.max_iters >= 1
            && self.lr_min > 0.0
            && self.lr_min <= self.lr_init
            && self.plateau_patience >= 1
            && self.early_stop_patience >= 1
            && self.plateau_factor > 0.0
            && self.plateau_factor < 1.0
            && self.early_stop_min_delta >= 0.0;
        if ok {
            Ok(())
        } else {
            Err(Error::InvalidConfig(format!("invalid optimizer schedule {self:?}")))
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum StopReason {
    MaxIters,
    LearningRateFloor,
    EarlyStop,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct History {
    /// Loss at each evaluated iterate.
    pub losses: Vec<f64>,
    /// Learning rate in effect at each iteration.
    pub lrs: Vec<f64>,
    pub best_loss: f64,
    pub best_iter: usize,
    pub stop: StopReason,
}

impl History {
    pub fn iterations(&self) -> usize {
        self.losses.len()
    }

    pub fn to_csv(&self) -> String {
        let mut out = String::from("iter,loss,lr\n");
        for (i, (l, lr)) in self.losses.iter().zip(&self.lrs).enumerate() {
            let _ = writeln!(out, "{i},{l},{lr}");
        }
        out
    }
}

/// Plateau and early-stopping bookkeeping, separated from Adam so the
/// schedule can be driven by a scripted loss sequence.
#[derive(Debug, Clone)]
pub struct Scheduler {
    schedule: OptimSchedule,
    lr: f64,
    best: f64,
    plateau_count: usize,
    stall_count: usize,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Step {
    Continue,
    Stop(StopReason),
}

impl Scheduler {
    pub fn new(schedule: OptimSchedule) -> Self {
        Self { lr: schedule.lr_init, best: f64::INFINITY, plateau_count: 0, stall_count: 0, schedule }
    }

    pub fn lr(&self) -> f64 {
        self.lr
    }

    /// Feeds one loss value and updates the learning rate.
    pub fn observe(&mut self, loss: f64) -> Step {
        if loss < self.best - self.schedule.early_stop_min_delta {
            self.best = loss;
            self.plateau_count = 0;
            self.stall_count = 0;
            return Step::Continue;
        }
        self.best = self.best.min(loss);
        self.plateau_count += 1;
        self.stall_count += 1;
        if self.stall_count >= self.schedule.early_stop_patience {
            return Step::Stop(StopReason::EarlyStop);
        }
        if self.plateau_count >= self.schedule.plateau_patience {
            self.plateau_count = 0;
            if self.lr <= self.schedule.lr_min {
                return Step::Stop(StopReason::LearningRateFloor);
            }
            self.lr = (self.lr * self.schedule.plateau_factor).max(self.schedule.lr_min);
        }
        Step::Continue
    }
}

/// Optional settings of [`minimize`].
#[derive(Debug, Clone, Default)]
pub struct MinimizeOptions {
    /// Stream the loss history to this CSV file.
    pub csv: Option<PathBuf>,
    /// Name reported in errors.
    pub label: &'static str,
}

/// Objective evaluated on the current blocks: returns the loss and one
/// gradient per block (gradients of frozen blocks are ignored and may be
/// empty).
pub trait Objective {
    fn evaluate(&mut self, blocks: &[ParamBlock]) -> (f64, Vec<Vec<f64>>);
}

impl<F> Objective for F
where
    F: FnMut(&[ParamBlock]) -> (f64, Vec<Vec<f64>>),
{
    fn evaluate(&mut self, blocks: &[ParamBlock]) -> (f64, Vec<Vec<f64>>) {
        self(blocks)
    }
}

/// Minimizes `objective` starting from `blocks`; returns the best iterate
/// and the loss history.
pub fn minimize<O: Objective>(
    mut objective: O,
    mut blocks: Vec<ParamBlock>,
    schedule: &OptimSchedule,
    options: &MinimizeOptions,
) -> Result<(Vec<ParamBlock>, History)> {
    schedule.validate()?;
    let mut m: Vec<Vec<f64>> = blocks.iter().map(|b| vec![0.0; b.values.len()]).collect();
    let mut v = m.clone();
    let mut sched = Scheduler::new(*schedule);
    let mut best_blocks = blocks.clone();
    let mut history = History {
        losses: Vec::new(),
        lrs: Vec::new(),
        best_loss: f64::INFINITY,
        best_iter: 0,
        stop: StopReason::MaxIters,
    };

    for iter in 0..schedule.max_iters {
        let (loss, grads) = objective.evaluate(&blocks);
        if !loss.is_finite() {
            return Err(non_finite(iter, &blocks, &grads, options.label));
        }
        history.losses.push(loss);
        history.lrs.push(sched.lr());
        if loss < history.best_loss {
            history.best_loss = loss;
            history.best_iter = iter;
            best_blocks.clone_from(&blocks);
        }
        if let Step::Stop(reason) = sched.observe(loss) {
            history.stop = reason;
            break;
        }
        if iter + 1 == schedule.max_iters {
            break;
        }

        let t = (iter + 1) as i32;
        let c1 = 1.0 - BETA1.powi(t);
        let c2 = 1.0 - BETA2.powi(t);
        let lr = sched.lr();
        for (bi, block) in blocks.iter_mut().enumerate() {
            if block.frozen {
                continue;
            }
            let g = &grads[bi];
            if g.len() != block.values.len() {
                return Err(Error::DimensionMismatch(format!(
                    "gradient of block '{}' has {} entries, expected {}",
                    block.name,
                    g.len(),
                    block.values.len()
                )));
            }
            if g.iter().any(|x| !x.is_finite()) {
                return Err(Error::NonFiniteLoss { iteration: iter, block: block.name.clone() });
            }
            for i in 0..g.len() {
                m[bi][i] = BETA1 * m[bi][i] + (1.0 - BETA1) * g[i];
                v[bi][i] = BETA2 * v[bi][i] + (1.0 - BETA2) * g[i] * g[i];
                let mhat = m[bi][i] / c1;
                let vhat = v[bi][i] / c2;
                block.values[i] -= lr * mhat / (vhat.sqrt() + ADAM_EPS);
            }
        }
    }

    if let Some(path) = &options.csv {
        write_csv(path, &history)?;
    }
    Ok((best_blocks, history))
}

fn non_finite(iteration: usize, blocks: &[ParamBlock], grads: &[Vec<f64>], label: &str) -> Error {
    let offending = blocks
        .iter()
        .zip(grads.iter().map(Some).chain(std::iter::repeat(None)))
        .find(|(b, g)| {
            b.values.iter().any(|x| !x.is_finite()) || g.is_some_and(|g| g.iter().any(|x| !x.is_finite()))
        })
        .map(|(b, _)| b.name.clone());
    let block = offending.unwrap_or_else(|| if label.is_empty() { "objective".into() } else { label.into() });
    Error::NonFiniteLoss { iteration, block }
}

fn write_csv(path: &Path, history: &History) -> Result<()> {
    std::fs::write(path, history.to_csv()).map_err(|e| Error::io(path, e))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn quadratic(c: Vec<f64>) -> impl FnMut(&[ParamBlock]) -> (f64, Vec<Vec<f64>>) {
        move |blocks: &[ParamBlock]| {
            let x = &blocks[0].values;
            let loss = x.iter().zip(&c).map(|(a, b)| (a - b) * (a - b)).sum();
            let g = x.iter().zip(&c).map(|(a, b)| 2.0 * (a - b)).collect();
            (loss, vec![g])
        }
    }

    #[test]
    fn quadratic_reaches_its_minimum() {
        let schedule = OptimSchedule { max_iters: 500, lr_init: 0.1, ..Default::default() };
        let (out, hist) = minimize(
            quadratic(vec![1.0, 2.0, 3.0]),
            vec![ParamBlock::new("x", vec![0.0; 3])],
            &schedule,
            &MinimizeOptions::default(),
        )
        .unwrap();
        for (x, c) in out[0].values.iter().zip([1.0, 2.0, 3.0]) {
            assert!((x - c).abs() < 1e-4, "{x} vs {c}");
        }
        let min = hist.losses.iter().copied().fold(f64::INFINITY, f64::min);
        assert_eq!(hist.best_loss, min);
    }

    #[test]
    fn constant_objective_stops_early() {
        let schedule = OptimSchedule { max_iters: 10_000, lr_init: 1e-3, ..Default::default() };
        let (_, hist) = minimize(
            |b: &[ParamBlock]| (1.0, vec![vec![0.0; b[0].values.len()]]),
            vec![ParamBlock::new("x", vec![0.5])],
            &schedule,
            &MinimizeOptions::default(),
        )
        .unwrap();
        assert_eq!(hist.stop, StopReason::EarlyStop);
        assert_eq!(hist.iterations(), schedule.early_stop_patience + 1);
    }

    #[test]
    fn frozen_block_is_untouched() {
        let frozen = vec![0.1, -7.25, 3.0e-17];
        let (out, _) = minimize(
            |b: &[ParamBlock]| {
                let loss = b[0].values[0].powi(2) + b[1].values.iter().map(|x| x * x).sum::<f64>();
                (loss, vec![vec![2.0 * b[0].values[0]], b[1].values.iter().map(|x| 2.0 * x).collect()])
            },
            vec![ParamBlock::new("free", vec![1.0]), ParamBlock::frozen("fixed", frozen.clone())],
            &OptimSchedule::with_budget(200, 0.05),
            &MinimizeOptions::default(),
        )
        .unwrap();
        let before: Vec<u64> = frozen.iter().map(|x| x.to_bits()).collect();
        let after: Vec<u64> = out[1].values.iter().map(|x| x.to_bits()).collect();
        assert_eq!(before, after);
        assert!(out[0].values[0].abs() < 0.5);
    }

    #[test]
    fn plateau_rule_on_scripted_losses() {
        let schedule = OptimSchedule {
            lr_init: 1.0,
            lr_min: 0.2,
            plateau_patience: 3,
            plateau_factor: 0.5,
            early_stop_patience: 100,
            early_stop_min_delta: 0.1,
            ..Default::default()
        };
        let mut s = Scheduler::new(schedule);
        // Improvements smaller than min_delta count as stalls.
        let script = [10.0, 9.0, 8.95, 8.95, 8.95, 5.0, 5.0, 4.95, 4.99, 5.0, 5.0, 5.0, 5.0, 5.0, 5.0];
        let mut lrs = Vec::new();
        let mut stop = None;
        for &l in &script {
            match s.observe(l) {
                Step::Continue => lrs.push(s.lr()),
                Step::Stop(r) => {
                    stop = Some(r);
                    break;
                }
            }
        }
        // Third stall at index 4 halves the rate; after the improvement at
        // index 5 the stalls at 6, 7, 8 halve it again; index 11 clamps to
        // the floor; index 14 would need to go below it.
        assert_eq!(lrs[..4], [1.0; 4]);
        assert_eq!(lrs[4..8], [0.5; 4]);
        assert_eq!(lrs[8..11], [0.25; 3]);
        assert_eq!(lrs[11..], [0.2; 3]);
        assert_eq!(stop, Some(StopReason::LearningRateFloor));
    }

    #[test]
    fn reruns_are_identical() {
        let run = || {
            minimize(
                quadratic(vec![0.3, -1.0]),
                vec![ParamBlock::new("x", vec![2.0, 2.0])],
                &OptimSchedule::with_budget(300, 0.05),
                &MinimizeOptions::default(),
            )
            .unwrap()
        };
        let (a, ha) = run();
        let (b, hb) = run();
        assert_eq!(a, b);
        assert_eq!(ha, hb);
    }

    #[test]
    fn non_finite_loss_names_the_block() {
        let err = minimize(
            |b: &[ParamBlock]| (b[0].values[0].ln(), vec![vec![1.0 / b[0].values[0]]]),
            vec![ParamBlock::new("focal", vec![-1.0])],
            &OptimSchedule::with_budget(10, 0.1),
            &MinimizeOptions::default(),
        )
        .unwrap_err();
        match err {
            Error::NonFiniteLoss { iteration: 0, block } => assert_eq!(block, "objective"),
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn csv_history() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("loss.csv");
        let options = MinimizeOptions { csv: Some(path.clone()), label: "" };
        let (_, hist) = minimize(
            quadratic(vec![1.0]),
            vec![ParamBlock::new("x", vec![0.0])],
            &OptimSchedule::with_budget(5, 0.1),
            &options,
        )
        .unwrap();
        let text = std::fs::read_to_string(path).unwrap();
        let lines: Vec<&str> = text.lines().collect();
        assert_eq!(lines[0], "iter,loss,lr");
        assert_eq!(lines.len(), hist.iterations() + 1);
        assert_eq!(lines[1], "0,1,0.1");
    }
}

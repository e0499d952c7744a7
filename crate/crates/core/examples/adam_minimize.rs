//! The Adam minimizer on the Rosenbrock function, with one frozen block.

use dynrecon::optimizer::{minimize, MinimizeOptions, OptimSchedule, ParamBlock};

fn main() -> dynrecon::Result<()> {
    let rosenbrock = |blocks: &[ParamBlock]| {
        let (x, y) = (blocks[0].values[0], blocks[0].values[1]);
        let loss = (1.0 - x).powi(2) + 100.0 * (y - x * x).powi(2);
        let g = vec![-2.0 * (1.0 - x) - 400.0 * x * (y - x * x), 200.0 * (y - x * x)];
        (loss, vec![g, Vec::new()])
    };
    let blocks = vec![ParamBlock::new("xy", vec![-1.2, 1.0]), ParamBlock::frozen("unused", vec![7.0])];
    let schedule = OptimSchedule::with_budget(20_000, 0.02);
    let (best, history) = minimize(rosenbrock, blocks, &schedule, &MinimizeOptions { label: "rosenbrock", ..Default::default() })?;
    println!(
        "minimum near {:.4?} after {} iterations, loss {:.3e}, stop {:?}, frozen block {:?}",
        best[0].values,
        history.iterations(),
        history.best_loss,
        history.stop,
        best[1].values
    );
    Ok(())
}

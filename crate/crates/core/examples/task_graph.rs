//! The task-graph executor on its own, then the decompression graph with the
//! two middle tasks slowed down so their overlap shows in the trace.

use std::time::Duration;

use fzpipe::data::{generate, SyntheticKind, SyntheticSpec};
use fzpipe::pipeline::{decompress_graph, DecompressGraphOptions, TaskGraph};
use fzpipe::{compress, Dims, ErrorBoundSpec, Preset, Registry};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    // Edges come from declared reads and writes, in submission order.
    let mut g = TaskGraph::new();
    g.add_input("xs", (1..=1_000u64).collect::<Vec<_>>())?;
    g.add_buffer("sum")?;
    g.add_buffer("max")?;
    g.add_buffer("report")?;
    g.add_task("sum", &["xs"], &["sum"], |ctx| {
        let xs = ctx.read::<Vec<u64>>("xs")?;
        ctx.write("sum", xs.iter().sum::<u64>())?;
        Ok(())
    })?;
    g.add_task("max", &["xs"], &["max"], |ctx| {
        let xs = ctx.read::<Vec<u64>>("xs")?;
        ctx.write("max", xs.iter().copied().max().unwrap_or(0))?;
        Ok(())
    })?;
    g.add_task("report", &["sum", "max"], &["report"], |ctx| {
        let (s, m) = (ctx.read::<u64>("sum")?, ctx.read::<u64>("max")?);
        ctx.write("report", format!("sum={s} max={m}"))?;
        Ok(())
    })?;
    println!("edges: {:?}", g.named_edges());
    let run = g.execute(2)?;
    println!("{}", run.get::<String>("report")?);

    let field = generate(&SyntheticSpec::new(
        SyntheticKind::FilteredNoise,
        Dims::d3(64, 64, 64)?,
        3,
    ))?;
    let archive = compress(&field, ErrorBoundSpec::relative(1e-5)?, Preset::Default)?;
    let reg = Registry::new();
    let opts = DecompressGraphOptions {
        side_task_delay: Duration::from_millis(50),
    };
    let (out, trace) = decompress_graph(&reg, &archive, 2, opts)?;
    assert_eq!(out, reg.decompress(&archive)?);
    println!("{:<20} {:>6} {:>6} {:>6}", "task", "worker", "start", "end");
    for e in &trace.entries {
        println!(
            "{:<20} {:>6} {:>6} {:>6}",
            e.task, e.worker, e.start_tick, e.end_tick
        );
    }
    println!("overlapping task pairs: {:?}", trace.overlapping_pairs());
    Ok(())
}

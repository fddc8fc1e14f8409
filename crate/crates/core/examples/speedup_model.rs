//! When does compressing before a transfer pay off? Sweeps the overall
//! speedup model over compression ratio and compressor throughput.
//!
//! ```text
//! cargo run --example speedup_model -- [bandwidth_gbps]
//! ```

use fzpipe::metrics::{overall_speedup, SpeedupInputs};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let bw: f64 = std::env::args().nth(1).map_or(Ok(100.0), |s| s.parse())?;
    let crs = [1.5, 2.0, 4.0, 10.0, 30.0, 100.0];
    let throughputs = [25.0, 50.0, 100.0, 200.0, 400.0, 1000.0];
    println!("speedup over a {bw} GB/s medium (rows: compressor GB/s, columns: CR)");
    print!("{:>8}", "");
    for cr in crs {
        print!("{cr:>8}");
    }
    println!();
    for t in throughputs {
        print!("{t:>8}");
        for cr in crs {
            let s = overall_speedup(SpeedupInputs {
                bw_gbps: bw,
                t_compr_gbps: t,
                cr,
            })?;
            print!("{s:>8.3}");
        }
        println!();
    }
    // Break-even throughput for a given CR: speedup 1 needs t = bw * cr / (cr - 1).
    for cr in crs {
        println!(
            "cr {cr:>5}: break-even at {:.1} GB/s, ceiling {:.1}x as t grows",
            bw * cr / (cr - 1.0),
            cr
        );
    }
    Ok(())
}

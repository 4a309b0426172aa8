//! Generates a 300 s trace per network profile and compares its statistics
//! with the profile's targets.
//!
//! cargo run --example traces [out_dir]

use statecast::netsim::{generate_trace, Profile};

fn main() -> statecast::Result<()> {
    let out = std::env::args().nth(1).map_or_else(|| std::env::temp_dir().join("statecast-traces"), Into::into);
    std::fs::create_dir_all(&out)?;
    println!("{:<5} {:>18} {:>16} {:>14} {:>8}", "", "throughput Mbps", "loss %", "rtt ms", "fec");
    for profile in Profile::ALL {
        let t = generate_trace(profile, 300.0, 1)?;
        let s = profile.stats();
        println!(
            "{:<5} {:>7.1} / {:>7.1} {:>6.2} / {:>6.2} {:>5.1} / {:>5.1} {:>7.0}%",
            profile.name(),
            t.mean_throughput(),
            s.throughput_mbps,
            t.mean_loss_rate() * 100.0,
            s.loss_rate * 100.0,
            t.mean_rtt(),
            s.rtt_ms,
            profile.oracle_fec_overhead() * 100.0
        );
        t.save(out.join(format!("{}.csv", profile.name())))?;
    }
    println!("measured / target; CSVs in {}", out.display());
    Ok(())
}

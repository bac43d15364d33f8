//! Full search on the small macro preset.
//!
//! ```text
//! cargo run --release -p zsnas --example desk_search
//! ```

use zsnas::proxies::ProxyConfig;
use zsnas::search::{run_search, SearchConfig};
use zsnas::MacroConfig;

fn main() -> zsnas::Result<()> {
    let cfg = SearchConfig {
        macro_config: MacroConfig::desk(),
        proxy: ProxyConfig {
            batch_size: 8,
            ..Default::default()
        },
        ..Default::default()
    };
    let r = run_search(&cfg, None)?;
    for p in &r.prunes {
        println!("sweep {} removes {:>12} from edge {:?}", p.sweep, p.op.name(), p.edge_nodes);
    }
    println!("{}", r.arch);
    println!(
        "{} evaluations, {} sweeps, {:.1}s",
        r.evaluations, r.sweeps, r.wall_time_s
    );
    Ok(())
}

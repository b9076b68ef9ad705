use std::io::{BufWriter, Write};

use anyhow::Context as _;
use pointstream::colorxfer::transfer_colors;
use pointstream::ply::{read_ply, write_ply};

use crate::args::RecolorArgs;
use crate::context::{require_file, CliError, CliResult, Context};

pub fn run(ctx: &Context, args: &RecolorArgs) -> CliResult {
    let mut params = ctx.cfg.transfer;
    params.l = args.l.unwrap_or(params.l);
    params.k = args.k.unwrap_or(params.k);
    params.alpha = args.alpha.unwrap_or(params.alpha);
    params.min_pairs = args.min_pairs.unwrap_or(params.min_pairs);
    params.validate().map_err(CliError::usage)?;

    require_file(&args.static_cloud, "static cloud")?;
    require_file(&args.dynamic, "dynamic cloud")?;
    let stat = read_ply(&args.static_cloud).with_context(|| format!("reading {}", args.static_cloud.display()))?;
    let dynamic = read_ply(&args.dynamic).with_context(|| format!("reading {}", args.dynamic.display()))?;

    let t = transfer_colors(&stat, &dynamic, &params)?;
    write_ply(&t.cloud, &args.out).with_context(|| format!("writing {}", args.out.display()))?;
    if let Some(path) = &args.dump_lab {
        let file = std::fs::File::create(path).with_context(|| format!("creating {}", path.display()))?;
        let mut w = BufWriter::new(file);
        // Shortest round-trip formatting keeps every bit.
        for c in &t.lab {
            writeln!(w, "{} {} {}", c.l, c.a, c.b)?;
        }
        w.flush()?;
    }
    writeln!(std::io::stdout().lock(), "{}", serde_json::to_string_pretty(&t.report)?)?;
    Ok(())
}

use plam::simulation::{run_monte_carlo, DgpConfig};
use plam::Error;

use crate::args::SimulateArgs;
use crate::output::{resolve_models, with_suffix, write_json};

fn default_models(config: &DgpConfig) -> Vec<String> {
    let list: &[&str] = if config.linear() {
        &["am:alpha=0.05", "am:alpha=0.01", "alasso:lambda=1se", "alasso:lambda=min"]
    } else {
        &[
            "gama:alpha=0.05,dim=8",
            "gama:alpha=0.01,dim=8",
            "gamla:lambda=1se,dim=8",
            "gamla:lambda=min,dim=8",
        ]
    };
    list.iter().map(|s| s.to_string()).collect()
}

pub fn run(args: SimulateArgs) -> Result<(), Error> {
    let mut config: DgpConfig = match &args.config {
        Some(path) => serde_json::from_str(&std::fs::read_to_string(path)?)
            .map_err(|e| Error::Config(format!("{}: {e}", path.display())))?,
        None => DgpConfig::default(),
    };
    if let Some(s) = args.setup {
        config.setup = s;
    }
    if let Some(seed) = args.seed {
        config.seed = seed;
    }
    config.validate()?;
    if args.reps == 0 {
        return Err(Error::Config("--reps must be positive".into()));
    }
    let specs = if args.models.is_empty() {
        default_models(&config)
    } else {
        args.models.clone()
    };
    let models = resolve_models(&specs, args.tuning.as_deref())?;
    eprintln!("setup {} | {} replications | {} models", config.setup, args.reps, models.len());
    let report = run_monte_carlo(&config, &models, args.reps)?;
    report.write_table(&mut std::io::stdout().lock())?;
    for row in report.rows.iter().filter(|r| r.failures > 0) {
        if let Some(first) = row.failure_messages.first() {
            eprintln!("{}: {} failed replications, first: {first}", row.model, row.failures);
        }
    }
    if let Some(prefix) = &args.out {
        let csv = with_suffix(prefix, ".csv");
        let json = with_suffix(prefix, ".json");
        report.write_csv(&csv)?;
        write_json(&json, &report)?;
        println!("wrote {} and {}", csv.display(), json.display());
    }
    Ok(())
}

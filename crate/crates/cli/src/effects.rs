use plam::models::FittedModel;
use plam::persist::ModelFile;
use plam::Error;

use crate::args::EffectsArgs;
use crate::output::{with_suffix, write_csv, RunConfig};

pub fn run(args: EffectsArgs) -> Result<(), Error> {
    if args.grid < 2 {
        return Err(Error::Config("--grid needs at least two points".into()));
    }
    if let Some(q) = args.quantiles.iter().find(|q| !(0.0..=1.0).contains(*q)) {
        return Err(Error::Config(format!("quantile {q} outside [0, 1]")));
    }
    let file = ModelFile::load(&args.model)?;
    let am = file
        .model
        .additive()
        .ok_or_else(|| Error::Config(format!("`{}` models have no smooth terms", file.variant)))?;
    let smooth = am
        .smooth(&args.variable)
        .ok_or_else(|| Error::Config(format!("`{}` is not a smooth term of this model", args.variable)))?;
    let (lo, hi) = smooth.basis.range();
    let step = (hi - lo) / (args.grid - 1) as f64;
    let grid: Vec<f64> = (0..args.grid).map(|i| lo + step * i as f64).collect();

    let mut rows = vec![("base".to_string(), grid.iter().map(|&x| smooth.derivative(x)).collect::<Vec<_>>())];
    if let FittedModel::PartialLinear(m) = &file.model {
        let curve = m
            .marginal_effects(&args.variable, &grid, &args.quantiles)
            .map_err(Error::from)?;
        rows.extend(curve.contexts.into_iter().map(|c| (c.label, c.values)));
    }

    let mut config = RunConfig::new("export-effects", file.seed);
    config.models = vec![file.config.clone()];
    config.target = file.target.clone();
    let fmt = |v: f64| format!("{v:?}");

    let smooth_path = with_suffix(&args.out, "_smooth.csv");
    let values = smooth.eval(&grid);
    write_csv(
        &smooth_path,
        &config,
        &["x", "value"],
        grid.iter().zip(values).map(|(&x, v)| vec![fmt(x), fmt(v)]),
    )?;

    let marginal_path = with_suffix(&args.out, "_marginal.csv");
    write_csv(
        &marginal_path,
        &config,
        &["x", "label", "value"],
        rows.iter()
            .flat_map(|(label, vals)| grid.iter().zip(vals).map(move |(&x, &v)| vec![fmt(x), label.clone(), fmt(v)])),
    )?;
    println!("wrote {} and {}", smooth_path.display(), marginal_path.display());
    Ok(())
}

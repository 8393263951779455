use plam::models::fit_model;
use plam::persist::ModelFile;
use plam::selection::Tuning;
use plam::Error;

use crate::args::FitArgs;
use crate::output::{load_data, resolve_models};

pub fn run(args: FitArgs) -> Result<(), Error> {
    let spec = resolve_models(std::slice::from_ref(&args.model), args.tuning.as_deref())?.remove(0);
    let (data, _) = load_data(&args.data.data, &args.data.target, args.data.kinds.as_deref())?;
    let model = fit_model(&spec, &data, args.seed)?;
    let file = ModelFile::new(&spec, args.seed, &data, model);
    file.save(&args.out)?;

    println!("model    {spec}");
    println!("seed     {}", args.seed);
    println!("rows     {}", data.n_rows());
    if let Some(pairs) = file.model.selected_pairs() {
        println!("number of interactions  {}", pairs.len());
        for (a, b) in &pairs {
            println!("  {a}:{b}");
        }
    }
    if let Some(sel) = &file.selection {
        match &sel.tuning {
            Tuning::Lambda {
                rule,
                value,
                lambda_min,
                lambda_1se,
            } => println!("tuning   lambda={rule} value={value:.6} (min {lambda_min:.6}, 1se {lambda_1se:.6})"),
            Tuning::Alpha { alpha } => println!("tuning   alpha={alpha}"),
        }
        if sel.no_valid_reduction {
            println!("         no valid reduction; kept the unrestricted model");
        }
    }
    if !file.smooths.is_empty() {
        println!("{:<16} {:>8} {:>12}", "smooth", "edf", "psi");
        for s in &file.smooths {
            println!("{:<16} {:>8.3} {:>12.4e}", s.variable, s.edf, s.psi);
        }
    }
    for w in &file.warnings {
        eprintln!("warning: {w}");
    }
    println!("wrote {}", args.out.display());
    Ok(())
}

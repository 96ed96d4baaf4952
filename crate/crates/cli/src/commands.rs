use std::fs;
use std::path::{Path, PathBuf};

use fracsvt::bench::{
    add_noise, gen_mask, low_rank_approx, relative_error, run_table, ExperimentTable,
};
use fracsvt::{completion_map, solve, Execution, SamplingMask, SolverResult, ThresholdParams};

use crate::args::{BenchArgs, CompleteArgs, InpaintArgs, ProxArgs, SolverArgs};
use crate::io::{format_sig, read_matrix, read_vector, write_matrix};
use crate::CliError;

type Outcome = Result<(), CliError>;

fn config_line(fields: &[(&str, String)]) {
    let parts: Vec<String> = fields.iter().map(|(k, v)| format!("{k}={v}")).collect();
    println!("config: {}", parts.join(" "));
}

fn solver_fields(s: &SolverArgs, seed: u64) -> Vec<(&'static str, String)> {
    vec![
        ("solver", s.solver.to_string()),
        ("rank", s.rank.to_string()),
        ("mu", s.mu.to_string()),
        ("tau", s.tau.to_string()),
        ("a", s.a.to_string()),
        ("lam", s.lam.to_string()),
        ("xi", s.xi.to_string()),
        ("max_iter", s.max_iter.to_string()),
        ("tol", s.tol.to_string()),
        ("seed", seed.to_string()),
    ]
}

fn trace_path(out: &Path, trace: &Option<PathBuf>) -> PathBuf {
    trace.clone().unwrap_or_else(|| {
        let mut name = out.as_os_str().to_owned();
        name.push(".trace.csv");
        PathBuf::from(name)
    })
}

fn report_solve(res: &SolverResult, out: &Path, trace: &Path) -> Outcome {
    write_matrix(out, &res.x_opt)?;
    let file = fs::File::create(trace).map_err(fracsvt::Error::from)?;
    res.write_trace_csv(std::io::BufWriter::new(file))
        .map_err(fracsvt::Error::from)?;
    println!(
        "iterations={} converged={} time_s={:.3}",
        res.iterations, res.converged, res.wall_time
    );
    if res.arccos_clamps > 0 {
        println!("arccos_clamps={}", res.arccos_clamps);
    }
    println!("wrote {} and {}", out.display(), trace.display());
    Ok(())
}

pub fn prox(args: &ProxArgs) -> Outcome {
    config_line(&[
        ("a", args.a.to_string()),
        ("lam", args.lam.to_string()),
        ("gamma", args.gamma.map_or("none".into(), |g| g.to_string())),
        ("regime", args.regime.to_string()),
    ]);
    let params = ThresholdParams::new(args.a, args.lam, args.regime)?;
    println!("threshold {}", format_sig(params.threshold, 12));
    if let Some(gamma) = args.gamma {
        println!("value {}", format_sig(params.prox(gamma)?, 12));
    }
    Ok(())
}

pub fn complete(args: &CompleteArgs) -> Outcome {
    let mut fields = vec![("mask", args.mask.display().to_string())];
    match (&args.obs, &args.image) {
        (Some(p), _) => fields.push(("obs", p.display().to_string())),
        (_, Some(p)) => fields.push(("image", p.display().to_string())),
        _ => {}
    }
    fields.extend(solver_fields(&args.solver, args.seed));
    config_line(&fields);

    let mask = SamplingMask::load(&args.mask)?;
    let b = match (&args.obs, &args.image) {
        (Some(path), _) => read_vector(path)?,
        (_, Some(path)) => mask.gather(&read_matrix(path)?)?,
        _ => unreachable!("clap requires one of --obs and --image"),
    };
    if b.len() != mask.len() {
        return Err(CliError::Usage(format!(
            "{} observations for {} mask entries",
            b.len(),
            mask.len()
        )));
    }
    let truth = args.truth.as_deref().map(read_matrix).transpose()?;
    let map = completion_map(mask);
    let res = solve(&map, &b, &args.solver.config(), None)?;
    report_solve(&res, &args.out, &trace_path(&args.out, &args.trace))?;
    if let Some(truth) = truth {
        println!("RE={}", format_sig(relative_error(&res.x_opt, &truth)?, 6));
    }
    Ok(())
}

pub fn inpaint(args: &InpaintArgs) -> Outcome {
    let mut fields = vec![
        ("image", args.image.display().to_string()),
        ("sr", args.sr.to_string()),
        ("noise", args.noise.to_string()),
        ("low_rank", args.low_rank.to_string()),
    ];
    fields.extend(solver_fields(&args.solver, args.seed));
    config_line(&fields);

    let image = read_matrix(&args.image)?;
    let truth = if args.low_rank {
        low_rank_approx(&image, args.solver.rank)?
    } else {
        image
    };
    let (m, n) = truth.shape();
    let mask = gen_mask(m, n, args.sr, args.seed)?;
    let b = add_noise(&truth, &mask, args.noise, args.seed)?;
    let map = completion_map(mask);
    let res = solve(&map, &b, &args.solver.config(), None)?;
    report_solve(&res, &args.out, &trace_path(&args.out, &args.trace))?;
    println!("RE={}", format_sig(relative_error(&res.x_opt, &truth)?, 6));
    Ok(())
}

pub fn bench(args: &BenchArgs) -> Outcome {
    let text = fs::read_to_string(&args.spec).map_err(fracsvt::Error::from)?;
    let mut table: ExperimentTable = toml::from_str(&text)
        .map_err(|e| CliError::Usage(format!("{}: {e}", args.spec.display())))?;
    if table.experiment.is_empty() {
        return Err(CliError::Usage(format!(
            "{}: no [[experiment]] entries",
            args.spec.display()
        )));
    }
    let base = args.spec.parent().unwrap_or(Path::new("."));
    for spec in &mut table.experiment {
        if let Some(seed) = args.seed {
            spec.seed = seed;
        }
        if let Some(reps) = args.reps {
            spec.repetitions = reps;
        }
        if let Some(img) = &spec.image {
            if img.is_relative() {
                spec.image = Some(base.join(img));
            }
        }
        spec.validate()
            .map_err(|e| CliError::Usage(format!("{}: {e}", args.spec.display())))?;
    }
    let exec = if args.sequential {
        Execution::Sequential
    } else {
        Execution::default()
    };
    config_line(&[
        ("spec", args.spec.display().to_string()),
        ("experiments", table.experiment.len().to_string()),
        ("seed", args.seed.map_or("per-spec".into(), |s| s.to_string())),
        ("reps", args.reps.map_or("per-spec".into(), |r| r.to_string())),
        ("timing", (!args.no_timing).to_string()),
        ("parallel", exec.is_parallel().to_string()),
        (
            "out",
            args.out.as_ref().map_or("stdout".into(), |p| p.display().to_string()),
        ),
    ]);
    let report = run_table(&table.experiment, exec)?;
    match &args.out {
        Some(path) => {
            let file = fs::File::create(path).map_err(fracsvt::Error::from)?;
            report.write_csv(std::io::BufWriter::new(file), !args.no_timing)?;
            println!("wrote {}", path.display());
        }
        None => report.write_csv(std::io::stdout().lock(), !args.no_timing)?,
    }
    Ok(())
}

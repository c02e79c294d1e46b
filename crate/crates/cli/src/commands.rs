use std::fs::File;
use std::io::{BufReader, BufWriter, Write};
use std::path::Path;

use anyhow::{bail, Context, Result};
use mtclm::data::{default_names, read_csv, read_predictors_csv, write_csv, ScalingRecord};
use mtclm::experiment::{run_bench, run_trace, write_bench_csv, BenchConfig, TraceConfig};
use mtclm::model::{fit_method, FitSettings, Method, ModelArtifact};
use mtclm::predict::{class_from_proba, screen_from_proba};
use mtclm::simgen::{generate, write_ground_truth, CoefMagnitude, Scenario, ScenarioSpec};
use mtclm::tuning::{default_grid, kfold_cv, write_cv_table, CvSpec, GridKind};
use mtclm::{AdmmSettings, MtclmError, PenaltyConfig};

use crate::args::{
    BenchArgs, Cli, Command, CvArgs, CvOptions, DataArgs, FitArgs, PredictArgs, SimulateArgs,
    SolverArgs, TraceArgs,
};

/// Reported when a model was written but the solver did not converge.
#[derive(Debug, thiserror::Error)]
#[error(
    "solver did not converge after {iterations} iterations; model written with converged = false"
)]
pub struct NotConverged {
    iterations: usize,
}

/// Usage and validation problems exit with 2, everything else with 1.
pub fn exit_code(err: &anyhow::Error) -> u8 {
    for cause in err.chain() {
        if let Some(e) = cause.downcast_ref::<MtclmError>() {
            return match e {
                MtclmError::Io(_) => 1,
                MtclmError::NonFiniteStart => 1,
                _ => 2,
            };
        }
    }
    1
}

pub fn is_broken_pipe(err: &anyhow::Error) -> bool {
    err.chain().any(|cause| {
        let io = cause
            .downcast_ref::<std::io::Error>()
            .or_else(|| match cause.downcast_ref::<MtclmError>() {
                Some(MtclmError::Io(e)) => Some(e),
                _ => None,
            });
        matches!(io, Some(e) if e.kind() == std::io::ErrorKind::BrokenPipe)
            || matches!(cause.downcast_ref::<csv::Error>(), Some(e) if matches!(e.kind(), csv::ErrorKind::Io(io) if io.kind() == std::io::ErrorKind::BrokenPipe))
    })
}

pub fn run(cli: Cli) -> Result<()> {
    match cli.command {
        Command::Fit(a) => fit(a),
        Command::Predict(a) => predict(a),
        Command::Cv(a) => cv(a),
        Command::Simulate(a) => simulate(a),
        Command::Bench(a) => bench(a),
        Command::Trace(a) => trace(a),
    }
}

fn settings(s: &SolverArgs) -> Result<FitSettings> {
    let admm = AdmmSettings {
        mu_f: s.mu_f,
        mu_1: s.mu_1,
        max_iter: s.max_iter,
        eps_abs: s.eps_abs,
        eps_rel: s.eps_rel,
    };
    admm.validate()?;
    Ok(FitSettings {
        admm,
        ..Default::default()
    })
}

fn create(path: &Path) -> Result<BufWriter<File>> {
    let f = File::create(path)
        .map_err(MtclmError::from)
        .with_context(|| format!("cannot create {}", path.display()))?;
    Ok(BufWriter::new(f))
}

fn open(path: &Path) -> Result<BufReader<File>> {
    let f = File::open(path)
        .map_err(MtclmError::from)
        .with_context(|| format!("cannot open {}", path.display()))?;
    Ok(BufReader::new(f))
}

struct Loaded {
    names: Vec<String>,
    data: mtclm::OrdinalDataset,
    scaling: ScalingRecord,
}

fn load(a: &DataArgs) -> Result<Loaded> {
    let csv = read_csv(open(&a.data)?, &a.label, a.k_max)
        .with_context(|| format!("reading {}", a.data.display()))?;
    let (data, scaling) = if a.no_standardize {
        let p = csv.data.p();
        (csv.data, ScalingRecord::identity(p))
    } else {
        csv.data.standardize()
    };
    Ok(Loaded {
        names: csv.predictor_names,
        data,
        scaling,
    })
}

fn cv_spec(method: Method, o: &CvOptions) -> CvSpec {
    CvSpec {
        folds: o.folds,
        grid: default_grid(GridKind::for_method(method)),
        seed: o.seed,
        stratified: !o.unstratified,
    }
}

fn fit(a: FitArgs) -> Result<()> {
    let penalty = PenaltyConfig {
        lambda11: a.penalty.lambda11,
        lambda12: a.penalty.lambda12,
        lambda_f: a.penalty.lambda_f,
        lambda_g: a.penalty.lambda_g,
    };
    // configuration errors surface before any data is read or fitted
    let settings = settings(&a.solver)?;
    if !a.cv {
        a.method.check_penalty(&penalty)?;
    }
    let loaded = load(&a.data)?;
    let (model, penalty) = if a.cv {
        let cv = kfold_cv(
            &loaded.data,
            a.method,
            &cv_spec(a.method, &a.cv_options),
            &settings,
        )?;
        (cv.refit, cv.selected)
    } else {
        (
            fit_method(a.method, &loaded.data, &penalty, &settings, None)?,
            penalty,
        )
    };
    let artifact = ModelArtifact::new(
        &model,
        loaded.names,
        &a.data.label,
        loaded.data.k_max(),
        penalty,
        settings,
        !a.data.no_standardize,
        loaded.scaling,
    );
    let mut w = create(&a.out)?;
    w.write_all(artifact.to_json()?.as_bytes())?;
    w.flush()?;
    if !artifact.diagnostics.converged {
        return Err(NotConverged {
            iterations: artifact.diagnostics.iterations,
        }
        .into());
    }
    Ok(())
}

fn predict(a: PredictArgs) -> Result<()> {
    let json = std::fs::read_to_string(&a.model)
        .map_err(MtclmError::from)
        .with_context(|| format!("cannot read {}", a.model.display()))?;
    let model = ModelArtifact::from_json(&json)?;
    let (x, names) = read_predictors_csv(open(&a.data)?, Some(&model.label))
        .with_context(|| format!("reading {}", a.data.display()))?;
    if names != model.predictor_names {
        return Err(MtclmError::DimensionMismatch(format!(
            "predictor columns {names:?} do not match the model's {:?}",
            model.predictor_names
        ))
        .into());
    }
    let probs = model.predict_proba(x.view())?;
    let screen = screen_from_proba(&probs, a.threshold)?;
    let classes = class_from_proba(&probs);
    let scores = probs.disease_scores();

    let sink: Box<dyn Write> = match &a.out {
        Some(path) => Box::new(create(path)?),
        None => Box::new(std::io::stdout().lock()),
    };
    let mut wtr = csv::Writer::from_writer(sink);
    let mut header: Vec<String> = (0..probs.levels()).map(|k| format!("p{k}")).collect();
    header.extend(["disease_score", "screen", "class"].map(String::from));
    wtr.write_record(&header)?;
    for i in 0..probs.n() {
        let mut rec: Vec<String> = probs.row(i).iter().map(|v| v.to_string()).collect();
        rec.push(scores[i].to_string());
        rec.push(screen[i].to_string());
        rec.push(classes[i].to_string());
        wtr.write_record(&rec)?;
    }
    wtr.flush()?;
    Ok(())
}

fn cv(a: CvArgs) -> Result<()> {
    let settings = settings(&a.solver)?;
    let loaded = load(&a.data)?;
    let result = kfold_cv(
        &loaded.data,
        a.method,
        &cv_spec(a.method, &a.cv_options),
        &settings,
    )?;
    write_cv_table(create(&a.table)?, &result)?;
    let summary = serde_json::json!({
        "method": a.method,
        "selected": result.selected,
        "mean_cv_error": result.mean_errors[result.selected_index],
        "folds": a.cv_options.folds,
        "seed": a.cv_options.seed,
        "stratified": !a.cv_options.unstratified,
        "folds_missing_levels": result.folds_missing_levels,
    });
    let mut w = create(&a.out)?;
    serde_json::to_writer_pretty(&mut w, &summary)?;
    w.flush()?;
    Ok(())
}

fn simulate(a: SimulateArgs) -> Result<()> {
    let spec = ScenarioSpec {
        scenario: a.scenario,
        n: a.n,
        p: a.p,
        rho: a.rho,
        seed: a.seed,
        coef_magnitude: a
            .fixed_magnitude
            .map_or(CoefMagnitude::Uniform, CoefMagnitude::Fixed),
    };
    let (data, truth) = generate(&spec)?;
    write_csv(create(&a.out)?, &data, &default_names(a.p))?;
    let mut w = create(&a.truth)?;
    write_ground_truth(&mut w, &truth)?;
    w.flush()?;
    Ok(())
}

fn parse_list<T: std::str::FromStr<Err = MtclmError>>(s: &str) -> Result<Vec<T>> {
    Ok(s.split(',')
        .map(|t| t.trim())
        .filter(|t| !t.is_empty())
        .map(str::parse)
        .collect::<std::result::Result<_, _>>()?)
}

fn bench(a: BenchArgs) -> Result<()> {
    let scenarios = if a.scenarios == "all" {
        Scenario::ALL.to_vec()
    } else {
        parse_list(&a.scenarios)?
    };
    let cfg = BenchConfig {
        scenarios,
        methods: parse_list(&a.methods)?,
        replicates: a.replicates,
        n: a.n,
        p: a.p,
        rho: a.rho,
        seed: a.seed,
        folds: a.folds,
        settings: settings(&a.solver)?,
        ..Default::default()
    };
    cfg.validate()?;
    let out = run_bench(&cfg)?;
    write_bench_csv(create(&a.out)?, &out.rows)?;
    if !out.failures.is_empty() {
        for f in &out.failures {
            eprintln!(
                "warning: {} / {} / replicate {} failed: {}",
                f.scenario, f.method, f.replicate, f.error
            );
        }
        if let Some(path) = &a.failures {
            let mut wtr = csv::Writer::from_writer(create(path)?);
            for f in &out.failures {
                wtr.serialize(f)?;
            }
            wtr.flush()?;
        }
    }
    Ok(())
}

fn trace(a: TraceArgs) -> Result<()> {
    if !a.method.is_mtclm() {
        bail!(MtclmError::InvalidConfig(format!(
            "trace needs a multi-task method, got {}",
            a.method
        )));
    }
    let cfg = TraceConfig {
        method: a.method,
        n: a.n,
        p: a.p,
        seed: a.seed,
        settings: settings(&a.solver)?,
    };
    let fit = run_trace(&cfg)?;
    mtclm::admm::write_trace_csv(create(&a.out)?, &fit)?;
    Ok(())
}

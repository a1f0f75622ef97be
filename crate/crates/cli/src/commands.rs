use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};
use std::time::Instant;

use bdp_core::em::{em_fit, EMConfig};
use bdp_core::estep::conditional_expectations;
use bdp_core::models::{EmModel, MicrosatModel, ModelOptions, ModelSpec};
use bdp_core::oracle::{
    generate_microsat_dataset, generate_protocol_dataset, rejection_estep, timedomain_estep,
    CovariateScheme, ProtocolConfig,
};
use bdp_core::process::{observed_loglik, transition_probability_detailed, Observation};
use serde::Serialize;

use crate::args::{
    EstepArgs, EstepMethod, FitArgs, LoglikArgs, ModelArgs, ObservationArgs, ProbArgs, SimulateArgs,
};
use crate::config::RunConfig;
use crate::error::CliError;
use crate::io::{parse_params, read_observations, write_observations};
use crate::output::*;

const DEFAULT_SEED: u64 = 1;
const DEFAULT_PATHS: usize = 100_000;
const DEFAULT_QUAD_TOL: f64 = 1e-8;

/// A model resolved from flags and config, with its canonical spec string.
pub struct ResolvedModel {
    pub spec: ModelSpec,
    pub model: Box<dyn EmModel>,
}

pub fn resolve_model(args: &ModelArgs, cfg: &RunConfig) -> Result<ResolvedModel, CliError> {
    let name = args
        .model
        .as_deref()
        .or(cfg.model.as_deref())
        .ok_or_else(|| CliError::Usage("--model is required".into()))?;
    let mut spec: ModelSpec = name
        .parse()
        .map_err(|e: bdp_core::BdpError| CliError::Usage(e.to_string()))?;
    let merge =
        |flag: Option<usize>, file: Option<usize>, spec: Option<usize>| flag.or(spec).or(file);
    spec.options = ModelOptions {
        population: merge(args.population, cfg.population, spec.options.population),
        covariates: merge(args.covariates, cfg.covariates, spec.options.covariates),
        x_min: merge(args.x_min, cfg.x_min, spec.options.x_min),
    };
    let model = spec.build().map_err(|e| CliError::Usage(e.to_string()))?;
    Ok(ResolvedModel { spec, model })
}

fn resolve_params(
    flag: Option<&str>,
    file: Option<&Vec<f64>>,
    what: &str,
    model: &dyn EmModel,
) -> Result<Vec<f64>, CliError> {
    let params = match (flag, file) {
        (Some(s), _) => parse_params(s)?,
        (None, Some(v)) => v.clone(),
        (None, None) => return Err(CliError::Usage(format!("--{what} is required"))),
    };
    if params.len() != model.param_dim() {
        return Err(CliError::Usage(format!(
            "model `{}` takes {} parameters ({}), got {}",
            model.name(),
            model.param_dim(),
            model.param_names().join(", "),
            params.len()
        )));
    }
    if !model.is_feasible(&params) {
        return Err(CliError::Usage(format!(
            "infeasible {what} {params:?} for model `{}`",
            model.name()
        )));
    }
    Ok(params)
}

fn observation(args: &ObservationArgs, model: &dyn EmModel) -> Result<Observation, CliError> {
    let z = match &args.z {
        Some(s) => parse_params(s)?,
        None => Vec::new(),
    };
    let obs = Observation::with_covariates(args.a, args.b, args.t, z);
    obs.validate(model)
        .map_err(|e| CliError::Usage(e.to_string()))?;
    Ok(obs)
}

fn load_data(path: Option<&PathBuf>, model: &dyn EmModel) -> Result<Vec<Observation>, CliError> {
    let path = path.ok_or_else(|| CliError::Usage("--data is required".into()))?;
    let data = read_observations(path)?;
    if data.is_empty() {
        return Err(CliError::Data(format!(
            "{}: no observations",
            path.display()
        )));
    }
    for (i, obs) in data.iter().enumerate() {
        obs.validate(model)
            .map_err(|e| CliError::Data(format!("{}: row {}: {e}", path.display(), i + 1)))?;
    }
    Ok(data)
}

/// Writes pretty JSON with a trailing newline to `out`, or to stdout.
pub fn emit<T: Serialize>(value: &T, out: Option<&Path>) -> Result<(), CliError> {
    let text = serde_json::to_string_pretty(value)
        .map_err(|e| CliError::Usage(format!("serializing output: {e}")))?;
    match out {
        Some(path) => std::fs::write(path, format!("{text}\n")).map_err(|e| CliError::io(path, e)),
        None => {
            let stdout = std::io::stdout();
            let mut lock = stdout.lock();
            writeln!(lock, "{text}").map_err(|e| CliError::io("<stdout>", e))
        }
    }
}

pub fn simulate(args: &SimulateArgs, cfg: &RunConfig) -> Result<SimulateOutput, CliError> {
    let resolved = resolve_model(&args.model, cfg)?;
    let model = resolved.model.as_ref();
    let params = resolve_params(args.params.as_deref(), cfg.params.as_ref(), "params", model)?;
    let sim = cfg.simulate.clone().unwrap_or_default();
    let n = args
        .n
        .or(sim.n)
        .ok_or_else(|| CliError::Usage("--n is required".into()))?;
    let seed = args.seed.or(cfg.seed).unwrap_or(DEFAULT_SEED);
    let out = args
        .out
        .clone()
        .or_else(|| cfg.out.clone())
        .ok_or_else(|| CliError::Usage("--out is required".into()))?;

    let data = if resolved.spec.name == "microsat" {
        let pair_time = args.pair_time.or(sim.pair_time).unwrap_or(0.5);
        if !(pair_time > 0.0) || !pair_time.is_finite() {
            return Err(CliError::Usage("--pair-time must be positive".into()));
        }
        let micro = MicrosatModel::new(match resolved.spec.options.x_min {
            Some(x) => bdp_core::models::MicrosatConfig::uniform(x),
            None => Default::default(),
        })?;
        generate_microsat_dataset(&micro, &params, n, pair_time, seed)?
    } else {
        let defaults = ProtocolConfig::default();
        let start_min = args
            .start_min
            .or(sim.start_min)
            .unwrap_or(*defaults.starts.start());
        let start_max = args
            .start_max
            .or(sim.start_max)
            .unwrap_or(*defaults.starts.end());
        let t_min = args.t_min.or(sim.t_min).unwrap_or(defaults.times.0);
        let t_max = args.t_max.or(sim.t_max).unwrap_or(defaults.times.1);
        if start_min > start_max {
            return Err(CliError::Usage("--start-min exceeds --start-max".into()));
        }
        let covariates = match model.covariate_dim() {
            0 => CovariateScheme::None,
            2 => CovariateScheme::TwoGroup {
                variance: args.covariate_variance.or(sim.covariate_variance).unwrap_or(0.1),
            },
            d => {
                return Err(CliError::Usage(format!(
                    "simulation supports the two-group covariate design only (model has {d} covariates)"
                )))
            }
        };
        let protocol = ProtocolConfig {
            starts: start_min..=start_max,
            times: (t_min, t_max),
            covariates,
        };
        generate_protocol_dataset(model, &params, n, &protocol, seed).map_err(|e| match e {
            bdp_core::BdpError::InvalidArgument(m) => CliError::Usage(m),
            bdp_core::BdpError::OutOfSupport { .. } => CliError::Usage(e.to_string()),
            other => CliError::Core(other),
        })?
    };

    let file = File::create(&out).map_err(|e| CliError::io(&out, e))?;
    write_observations(BufWriter::new(file), &data).map_err(|e| CliError::io(&out, e))?;

    let mean = |f: &dyn Fn(&Observation) -> f64| {
        if data.is_empty() {
            0.0
        } else {
            data.iter().map(f).sum::<f64>() / data.len() as f64
        }
    };
    let dim = data.first().map_or(0, |o| o.z.len());
    Ok(SimulateOutput {
        schema_version: SCHEMA_VERSION,
        command: "simulate",
        model: resolved.spec.to_string(),
        params,
        seed,
        n,
        out: out.display().to_string(),
        mean_x0: mean(&|o| o.a as f64),
        mean_xt: mean(&|o| o.b as f64),
        mean_t: mean(&|o| o.t),
        covariate_means: (0..dim).map(|j| mean(&|o| o.z[j])).collect(),
    })
}

pub fn fit_config(args: &FitArgs, cfg: &RunConfig) -> Result<EMConfig, CliError> {
    let mut em = cfg.em();
    if let Some(se) = args.se.or(cfg.se) {
        em = em.with_se(se);
    }
    if let Some(tol) = args.tol {
        em.param_tol = tol;
    }
    if let Some(max_iter) = args.max_iter {
        em.max_iter = max_iter;
    }
    if let Some(acc) = args.accelerate {
        em.accelerate = acc;
    }
    em.seed = args.seed.or(cfg.seed).unwrap_or(em.seed);
    em.validate().map_err(|e| CliError::Usage(e.to_string()))?;
    Ok(em)
}

pub fn fit(args: &FitArgs, cfg: &RunConfig) -> Result<FitOutput, CliError> {
    let resolved = resolve_model(&args.model, cfg)?;
    let model = resolved.model.as_ref();
    let em = fit_config(args, cfg)?;
    let init = resolve_params(args.init.as_deref(), cfg.init.as_ref(), "init", model)?;
    let data = load_data(args.data.as_ref().or(cfg.data.as_ref()), model)?;
    let result = em_fit(model, &data, &init, &em)?;
    Ok(FitOutput {
        schema_version: SCHEMA_VERSION,
        command: "fit",
        model: resolved.spec.to_string(),
        seed: em.seed,
        n_observations: data.len(),
        init,
        config: em,
        result,
    })
}

pub fn prob(args: &ProbArgs, cfg: &RunConfig) -> Result<ProbOutput, CliError> {
    let resolved = resolve_model(&args.model, cfg)?;
    let model = resolved.model.as_ref();
    let params = resolve_params(args.params.as_deref(), cfg.params.as_ref(), "params", model)?;
    let obs = observation(&args.obs, model)?;
    let tp = transition_probability_detailed(
        model,
        &params,
        &obs.z,
        obs.a,
        obs.b,
        obs.t,
        &cfg.numeric(),
    )?;
    Ok(ProbOutput {
        schema_version: SCHEMA_VERSION,
        command: "prob",
        model: resolved.spec.to_string(),
        params,
        a: obs.a,
        b: obs.b,
        t: obs.t,
        z: obs.z,
        probability: tp.value,
        error_estimate: tp.error_estimate,
        accuracy_warning: tp.accuracy_warning,
        clamped: tp.clamped,
    })
}

pub fn estep(args: &EstepArgs, cfg: &RunConfig) -> Result<EstepOutput, CliError> {
    let resolved = resolve_model(&args.model, cfg)?;
    let model = resolved.model.as_ref();
    let params = resolve_params(args.params.as_deref(), cfg.params.as_ref(), "params", model)?;
    let obs = observation(&args.obs, model)?;
    let file = cfg.estep.clone().unwrap_or_default();
    let method = match (args.method, file.method.as_deref()) {
        (Some(m), _) => m,
        (None, None | Some("laplace")) => EstepMethod::Laplace,
        (None, Some("quadrature")) => EstepMethod::Quadrature,
        (None, Some("rejection")) => EstepMethod::Rejection,
        (None, Some(other)) => {
            return Err(CliError::Usage(format!("unknown E-step method `{other}`")))
        }
    };
    let started = Instant::now();
    let (set, monte_carlo, seed) = match method {
        EstepMethod::Laplace => (
            conditional_expectations(model, &params, &obs, &cfg.numeric())?,
            None,
            None,
        ),
        EstepMethod::Quadrature => {
            let tol = args.quad_tol.or(file.quad_tol).unwrap_or(DEFAULT_QUAD_TOL);
            (timedomain_estep(model, &params, &obs, tol)?, None, None)
        }
        EstepMethod::Rejection => {
            let paths = args.paths.or(file.paths).unwrap_or(DEFAULT_PATHS);
            let seed = args.seed.or(cfg.seed).unwrap_or(DEFAULT_SEED);
            let est = rejection_estep(model, &params, &obs, paths, seed)?;
            let mc = MonteCarlo {
                se_up: est.se_up,
                se_down: est.se_down,
                se_particle_time: est.se_particle_time,
                accepted: est.accepted,
                attempts: est.attempts,
            };
            (est.set, Some(mc), Some(seed))
        }
    };
    let elapsed = started.elapsed().as_secs_f64();
    Ok(EstepOutput {
        schema_version: SCHEMA_VERSION,
        command: "estep",
        model: resolved.spec.to_string(),
        method: match method {
            EstepMethod::Laplace => "laplace",
            EstepMethod::Quadrature => "quadrature",
            EstepMethod::Rejection => "rejection",
        },
        params,
        a: obs.a,
        b: obs.b,
        t: obs.t,
        z: obs.z,
        seed,
        probability: set.denom,
        k_min: set.window.k_min,
        k_max: set.window.k_max,
        up_minus_down: set.total_up - set.total_down,
        total_up: set.total_up,
        total_down: set.total_down,
        particle_time: set.particle_time,
        total_time: set.total_time,
        eu: set.eu,
        ed: set.ed,
        et: set.et,
        monte_carlo,
        wall_time_seconds: args.timing.then_some(elapsed),
    })
}

pub fn loglik(args: &LoglikArgs, cfg: &RunConfig) -> Result<LoglikOutput, CliError> {
    let resolved = resolve_model(&args.model, cfg)?;
    let model = resolved.model.as_ref();
    let params = resolve_params(args.params.as_deref(), cfg.params.as_ref(), "params", model)?;
    let data = load_data(args.data.as_ref().or(cfg.data.as_ref()), model)?;
    let loglik = observed_loglik(model, &params, &data, &cfg.numeric())?;
    Ok(LoglikOutput {
        schema_version: SCHEMA_VERSION,
        command: "loglik",
        model: resolved.spec.to_string(),
        params,
        n_observations: data.len(),
        loglik,
    })
}

use std::path::Path;

use neqresponse_core::fluctuations::{dv_rate_function, prop3_check};
use neqresponse_core::markov::{check_detailed_balance, stationary_distribution, Distribution, Generator};
use neqresponse_core::models::{
    build_ising_generator, parse_model, redi_experiment, redi_site_resolved, write_model, IsingSpec, Model, Psi,
    SpinGraph,
};
use neqresponse_core::pathspace::mc_response;
use neqresponse_core::perturbation::{AmplitudeSchedule, PerturbationSpec};
use neqresponse_core::response::{
    chi_fd, chi_formula, integrated_response, response_fd_oracle, response_grid, response_kernel_fd,
};

use crate::error::CliError;
use crate::output::{num, Sink};
use crate::{Command, IsingArgs};

pub fn dispatch(command: &Command, sink: &mut Sink) -> Result<(), CliError> {
    match command {
        Command::Stationary(args) => {
            let model = load(&args.model)?;
            let rho = stationary_distribution(&model.generator)?;
            sink.row(&["state", "rho"])?;
            for (x, p) in rho.probabilities().iter().enumerate() {
                sink.row(&[model.generator.space().label(x).to_string(), num(*p)])?;
            }
        }
        Command::CheckDb(args) => {
            let model = load(&args.model.model)?;
            let rho = stationary_distribution(&model.generator)?;
            let report = check_detailed_balance(&model.generator, &rho, args.tol)?;
            let label = |i| model.generator.space().label(i).to_string();
            sink.row(&["is_reversible", "max_violation", "worst_from", "worst_to"])?;
            sink.row(&[
                report.is_reversible.to_string(),
                num(report.max_violation),
                label(report.worst_edge.0),
                label(report.worst_edge.1),
            ])?;
        }
        Command::ResponseExact(args) => {
            let model = load(&args.model.model)?;
            let v = model.observable(&args.split.v)?;
            let q = model.observable(&args.q)?;
            let g = &model.generator;
            let mu = initial_law(g, &args.initial)?;
            let s_points = match &args.s_points {
                Some(points) => points.clone(),
                None => {
                    let n = args.n_points;
                    (1..=n).map(|i| args.t * i as f64 / (n + 1) as f64).collect()
                }
            };
            let (a, b) = (args.split.a, args.split.b);
            let grid = response_grid(g, &mu, v, q, a, b, args.t, &s_points, args.initial.clone())?;
            let mut head = vec!["s", "R_exact"];
            if args.fd {
                head.push("R_fd");
            }
            if args.terms {
                head.extend(["b_ds", "a_dt", "b_VLQ", "b_LVQ"]);
            }
            sink.row(&head)?;
            for (i, &s) in grid.s_points.iter().enumerate() {
                let mut cells = vec![num(s), num(grid.values[i])];
                if args.fd {
                    cells.push(num(response_kernel_fd(g, &mu, v, q, a, b, s, args.t, args.h_scale)?));
                }
                if args.terms {
                    let t = &grid.terms[i];
                    cells.extend([num(t.b_ds), num(t.a_dt), num(t.b_vlq), num(t.b_lvq)]);
                }
                sink.row(&cells)?;
            }
        }
        Command::ResponseFd(args) => {
            let model = load(&args.model.model)?;
            let v = model.observable(&args.split.v)?;
            let q = model.observable(&args.q)?;
            let g = &model.generator;
            let mu = initial_law(g, &args.initial)?;
            let (a, b) = (args.split.a, args.split.b);
            let schedule = AmplitudeSchedule::constant(args.h);
            let exact = integrated_response(g, &mu, v, q, a, b, &schedule, args.t)?;
            let fd = response_fd_oracle(g, &mu, v, q, a, b, &schedule, args.t, args.h_scale)?;
            sink.row(&["integrated_exact", "fd_value", "fd_coarse", "fd_extrapolated"])?;
            sink.row(&[num(exact), num(fd.value), num(fd.coarse_value), num(fd.extrapolated)])?;
        }
        Command::ResponseMc(args) => {
            let model = load(&args.model.model)?;
            let v = model.observable(&args.split.v)?;
            let q = model.observable(&args.q)?;
            let g = &model.generator;
            let mu = initial_law(g, &args.initial)?;
            let (a, b) = (args.split.a, args.split.b);
            let schedule = AmplitudeSchedule::constant(args.h);
            let spec = PerturbationSpec::new(v.clone(), a, b, schedule.clone())?;
            let mc = mc_response(g, &mu, &spec, q, args.t, args.samples, args.seed)?;
            let exact = integrated_response(g, &mu, v, q, a, b, &schedule, args.t)?;
            sink.row(&["estimate", "std_error", "exact", "n_samples", "seed"])?;
            sink.row(&[
                num(mc.estimate),
                num(mc.std_error),
                num(exact),
                mc.n_samples.to_string(),
                args.seed.to_string(),
            ])?;
        }
        Command::Chi(args) => {
            let model = load(&args.model.model)?;
            let v = model.observable(&args.split.v)?;
            let m = model.observable(&args.m)?;
            let g = &model.generator;
            let rho = stationary_distribution(g)?;
            let (a, b) = (args.split.a, args.split.b);
            let exact = chi_formula(g, &rho, v, m, a, b)?;
            let fd = chi_fd(g, v, m, a, b, args.h_scale)?;
            sink.row(&["chi_MV", "chi_VM", "chi_MV_fd", "chi_VM_fd"])?;
            sink.row(&[num(exact.chi_mv), num(exact.chi_vm), num(fd.chi_mv), num(fd.chi_vm)])?;
        }
        Command::Dv(args) => {
            let model = load(&args.model.model)?;
            let g = &model.generator;
            let mu = initial_law(g, &args.mu)?;
            let result = dv_rate_function(g, &mu, args.tol)?;
            sink.comment(&format!("rate={}", num(result.rate)))?;
            sink.comment(&format!("grad_norm={}", num(result.grad_norm)))?;
            sink.row(&["state", "mu", "u"])?;
            for x in 0..g.n() {
                sink.row(&[g.space().label(x).to_string(), num(mu[x]), num(result.minimizer[x])])?;
            }
        }
        Command::Prop3(args) => {
            let model = load(&args.model.model)?;
            let v = model.observable(&args.split.v)?;
            let table = prop3_check(&model.generator, v, args.split.a, args.split.b, &args.h_list, args.tol)?;
            sink.row(&["h", "I", "rhs", "error"])?;
            for row in &table.rows {
                sink.row(&[num(row.h), num(row.rate), num(row.rhs), num(row.error)])?;
            }
            match table.fitted_slope {
                Some(slope) => sink.comment(&format!("fitted_slope={slope:.4}"))?,
                None => sink.comment("fitted_slope=none")?,
            }
        }
        Command::Redi(args) => {
            let model = build_ising_generator(&ising_spec(&args.ising)?)?;
            let result = match args.site {
                Some(site) => redi_site_resolved(&model, site, args.a, args.b, args.h, args.t)?,
                None => redi_experiment(&model, args.a, args.b, args.h, args.t)?,
            };
            sink.row(&["variant", "lhs", "rhs_a", "rhs_b", "rhs", "relative_gap"])?;
            sink.row(&[
                result.variant.clone(),
                num(result.lhs),
                num(result.rhs_a),
                num(result.rhs_b),
                num(result.rhs()),
                num(result.relative_gap()),
            ])?;
        }
        Command::MakeIsing(args) => {
            let model = build_ising_generator(&ising_spec(args)?)?;
            let mut buffer = Vec::new();
            write_model(&model.generator, &model.observables, &mut buffer)?;
            sink.raw(&String::from_utf8_lossy(&buffer))?;
        }
    }
    Ok(())
}

fn load(path: &Path) -> Result<Model, CliError> {
    let text = std::fs::read_to_string(path).map_err(|e| CliError::io(&path.display().to_string(), e))?;
    Ok(parse_model(&text)?)
}

fn ising_spec(args: &IsingArgs) -> Result<IsingSpec, CliError> {
    let graph = SpinGraph::parse(&args.graph)?;
    let psi = match args.psi.as_str() {
        "one" => Psi::One,
        "heatbath" => Psi::HeatBath,
        other => return Err(CliError::usage(format!("unknown psi '{other}', expected one or heatbath"))),
    };
    Ok(IsingSpec::new(graph, args.beta, args.coupling, args.field, args.lambda).with_psi(psi))
}

/// `stationary`, `uniform`, `state:LABEL` or comma-separated probabilities.
fn initial_law(generator: &Generator, text: &str) -> Result<Distribution, CliError> {
    let n = generator.n();
    match text {
        "stationary" => Ok(stationary_distribution(generator)?),
        "uniform" => Ok(Distribution::uniform(n)),
        _ => {
            if let Some(label) = text.strip_prefix("state:") {
                let x = generator
                    .space()
                    .index_of(label)
                    .ok_or_else(|| CliError::usage(format!("unknown state '{label}'")))?;
                return Ok(Distribution::point_mass(n, x));
            }
            let p = text
                .split(',')
                .map(|c| c.trim().parse::<f64>())
                .collect::<Result<Vec<_>, _>>()
                .map_err(|_| CliError::usage(format!("cannot read '{text}' as a law")))?;
            if p.len() != n {
                return Err(CliError::usage(format!("law has {} entries for {n} states", p.len())));
            }
            Ok(Distribution::new(p)?)
        }
    }
}

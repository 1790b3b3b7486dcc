use std::fmt::Write;
use std::path::Path;
use std::time::Instant;

use serde::Serialize;
use serde_json::{json, Map, Value};

use clustertail::dims::DimSet;
use clustertail::exec;
use clustertail::geometry::solve_ja;
use clustertail::measures::{estimate_c_total, DeltaPolicy, JumpType, TotalEstimate};
use clustertail::model::validate;
use clustertail::simulate::{grow_cluster, Forest, StreamSource, DEFAULT_NODE_CAP};
use clustertail::stream::{Seed, LANE_TREE};
use clustertail::verify::{
    check_concentration, check_identities, check_type_frequencies, counterexample_experiment, sweep_csv,
    sweep_probability, sweep_svg, SweepResult,
};
use clustertail::{Error, Model, Result};

use crate::artifact::{Input, RunManifest, Sink};
use crate::{Cli, Command, DeltaArg, Suite, VerifyArgs};

struct Run<'a> {
    cli: &'a Cli,
    name: &'static str,
    start: Instant,
    sink: Sink,
    config: Option<Input>,
    set_file: Option<Input>,
}

impl<'a> Run<'a> {
    fn new(cli: &'a Cli, name: &'static str) -> Self {
        Run {
            cli,
            name,
            start: Instant::now(),
            sink: Sink::new(cli.global.out.clone(), cli.global.plot.clone()),
            config: None,
            set_file: None,
        }
    }

    fn read_config(&mut self, path: &Path) -> Result<Input> {
        let input = Input::read(path)?;
        self.config = Some(input.clone());
        Ok(input)
    }

    fn read_set(&mut self, path: &Path) -> Result<Input> {
        let input = Input::read(path)?;
        self.set_file = Some(input.clone());
        Ok(input)
    }

    fn seed(&self) -> Seed {
        Seed(self.cli.global.seed)
    }

    fn samples(&self, default: u64) -> u64 {
        self.cli.global.samples.unwrap_or(default)
    }

    fn finish(self, code: u8) -> Result<u8> {
        let manifest = RunManifest {
            command: self.name,
            args: std::env::args().skip(1).collect(),
            config: self.config.as_ref(),
            set_file: self.set_file.as_ref(),
            seed: self.cli.global.seed,
            threads: rayon::current_num_threads(),
            version: env!("CARGO_PKG_VERSION"),
            duration_seconds: 0.0,
            artifacts: Vec::new(),
        };
        let elapsed = self.start.elapsed();
        self.sink.finish(manifest, elapsed)?;
        Ok(code)
    }
}

/// Converts a 1-based root from the command line.
fn root_index(root: usize, model: &Model) -> Result<usize> {
    if root == 0 || root > model.dim() {
        return Err(Error::InvalidArgument(format!("root must lie in 1..={}, got {root}", model.dim())));
    }
    Ok(root - 1)
}

fn delta_policy(arg: Option<DeltaArg>) -> DeltaPolicy {
    match arg {
        None | Some(DeltaArg::Auto) => DeltaPolicy::Auto,
        Some(DeltaArg::Value(v)) => DeltaPolicy::Fixed(v),
    }
}

pub fn run(cli: &Cli) -> Result<u8> {
    match &cli.command {
        Command::Validate { config } => {
            let mut run = Run::new(cli, "validate");
            let cfg = run.read_config(config)?.config()?;
            let report = validate(&cfg);
            run.sink.emit_json(&report)?;
            if let Some(msg) = &report.message {
                eprintln!("{msg}");
            }
            let code = if report.passed { 0 } else { 2 };
            run.finish(code)
        }
        Command::Mean { config } => {
            let mut run = Run::new(cli, "mean");
            let model = run.read_config(config)?.model()?;
            let d = model.dim();
            let mm = model.mean_matrix();
            let rows: Vec<Vec<f64>> = (0..d).map(|i| (0..d).map(|j| mm[(i, j)]).collect()).collect();
            run.sink.emit_json(&json!({
                "d": d,
                "spectral_radius": model.spectral_radius(),
                "mean_matrix": rows,
                "expected_clusters": (0..d).map(|j| model.expected_cluster(j)).collect::<Vec<_>>(),
                "alpha_star": model.alpha_star(),
                "l_star": model.l_star(),
            }))?;
            run.finish(0)
        }
        Command::Rate { config, set, n } => {
            let mut run = Run::new(cli, "rate");
            let model = run.read_config(config)?.model()?;
            let jset = DimSet::parse_one_based(set, model.dim())?;
            let alpha = model.alpha_of(jset);
            let mut body = String::from("n,lambda,alpha\n");
            for &x in n {
                let _ = writeln!(body, "{x},{},{alpha}", model.rate_lambda(jset, x)?);
            }
            run.sink.emit(&body)?;
            run.finish(0)
        }
        Command::Ja { config, set_file } => {
            let mut run = Run::new(cli, "ja");
            let model = run.read_config(config)?.model()?;
            let set = run.read_set(set_file)?.set()?;
            check_dim(&set, &model)?;
            let sol = solve_ja(&set, &model)?;
            eprintln!(
                "J(A) = {}  alpha = {}  bounded_away = {}",
                sol.jset, sol.alpha, sol.bounded_away.bounded_away
            );
            run.sink.emit_json(&sol)?;
            run.finish(0)
        }
        Command::Simulate { config, root, prune } => {
            let mut run = Run::new(cli, "simulate");
            let model = run.read_config(config)?.model()?;
            let root = root_index(*root, &model)?;
            let samples = run.samples(10);
            let body = simulate_csv(&model, root, *prune, samples, run.seed().derive_str("simulate"));
            run.sink.emit(&body)?;
            run.finish(0)
        }
        Command::Prob {
            config,
            set_file,
            root,
            n,
            measure_samples,
            json,
        } => {
            let mut run = Run::new(cli, "prob");
            let model = run.read_config(config)?.model()?;
            let set = run.read_set(set_file)?.set()?;
            check_dim(&set, &model)?;
            let root = root_index(*root, &model)?;
            let samples = run.samples(1_000_000);
            let mut res = sweep_probability(&model, root, &set, n, samples, run.seed())?;
            if let Some(ms) = measure_samples {
                let est = estimate_c_total(root, res.jset, &set, &model, delta_policy(cli.global.delta), *ms, run.seed())?;
                res.measure = Some(est);
            }
            if *json {
                run.sink.emit_json(&res)?;
            } else {
                run.sink.emit(&sweep_csv(&res))?;
            }
            run.sink.emit_plot(&sweep_svg(&res))?;
            report_sweep(&res);
            let code = match res.require_hits() {
                Ok(_) => 0,
                Err(e) => {
                    eprintln!("warning: {e}");
                    5
                }
            };
            run.finish(code)
        }
        Command::Measure { config, set_file, root } => {
            let mut run = Run::new(cli, "measure");
            let model = run.read_config(config)?.model()?;
            let set = run.read_set(set_file)?.set()?;
            check_dim(&set, &model)?;
            let root = root_index(*root, &model)?;
            let ja = solve_ja(&set, &model)?;
            let samples = run.samples(1_000_000);
            let est = estimate_c_total(root, ja.jset, &set, &model, delta_policy(cli.global.delta), samples, run.seed())?;
            if est.delta_warning {
                eprintln!(
                    "warning: delta {} exceeds the geometric threshold {:?}; mass may be missed",
                    est.delta, est.epsilon_bar
                );
            }
            eprintln!("C = {} +- {} over {} types", est.value, est.std_error, est.per_type.len());
            run.sink.emit_json(&MeasureOutput::from(&est))?;
            run.finish(0)
        }
        Command::Verify(args) => verify(cli, args),
    }
}

fn check_dim(set: &clustertail::RareEventSet, model: &Model) -> Result<()> {
    if set.dim() != model.dim() {
        return Err(Error::InvalidSet(format!(
            "set has dimension {}, model has {}",
            set.dim(),
            model.dim()
        )));
    }
    Ok(())
}

#[derive(Serialize)]
struct TypeRow<'a> {
    rows: &'a JumpType,
    estimate: f64,
    se: f64,
}

#[derive(Serialize)]
struct MeasureOutput<'a> {
    jset: DimSet,
    root: usize,
    per_type: Vec<TypeRow<'a>>,
    total_i: f64,
    total_se: f64,
    delta_used: f64,
    epsilon_bar: Option<f64>,
    delta_warning: bool,
    samples: u64,
}

impl<'a> From<&'a TotalEstimate> for MeasureOutput<'a> {
    fn from(est: &'a TotalEstimate) -> Self {
        MeasureOutput {
            jset: est.jset,
            root: est.root,
            per_type: est
                .per_type
                .iter()
                .map(|t| TypeRow {
                    rows: &t.rows,
                    estimate: t.estimate,
                    se: t.se,
                })
                .collect(),
            total_i: est.value,
            total_se: est.std_error,
            delta_used: est.delta,
            epsilon_bar: est.epsilon_bar,
            delta_warning: est.delta_warning,
            samples: est.samples,
        }
    }
}

fn simulate_csv(model: &Model, root: usize, prune: Option<f64>, samples: u64, seed: Seed) -> String {
    let d = model.dim();
    let mut body = String::from("root,sample_index,censored");
    for l in 0..d {
        let _ = write!(body, ",S_{}", l + 1);
    }
    body.push('\n');
    let blocks = exec::map_blocks(samples, |range| {
        let mut forest = Forest::new(d);
        let mut out = String::new();
        for idx in range {
            let mut src = StreamSource::new(seed.key(idx, LANE_TREE));
            grow_cluster(model, root, prune, &mut src, DEFAULT_NODE_CAP, &mut forest);
            let _ = write!(out, "{root},{idx},{}", forest.censored as u8);
            for s in &forest.totals {
                let _ = write!(out, ",{s}");
            }
            out.push('\n');
        }
        out
    });
    blocks.into_iter().for_each(|b| body.push_str(&b));
    body
}

fn report_sweep(res: &SweepResult) {
    match res.fit {
        Some(fit) => eprintln!(
            "slope {:.4} +- {:.4} (reference {:.4})",
            fit.slope, fit.slope_se, -res.alpha
        ),
        None => eprintln!("slope: fewer than 3 values of n with hits"),
    }
    if let Some(rc) = res.ratio_check() {
        eprintln!(
            "p/lambda at n = {}: {:.4}, C estimate {:.4}, within factor 3: {}",
            rc.n, rc.ratio, rc.c_hat, rc.within_factor_3
        );
    }
}

fn verify(cli: &Cli, args: &VerifyArgs) -> Result<u8> {
    let mut run = Run::new(cli, "verify");
    let model = run.read_config(&args.config)?.model()?;
    let root = root_index(args.root, &model)?;
    let set = match &args.set_file {
        Some(p) => {
            let s = run.read_set(p)?.set()?;
            check_dim(&s, &model)?;
            Some(s)
        }
        None => None,
    };
    let seed = run.seed();
    let all = args.suite == Suite::All;
    let wants = |s: Suite| all || args.suite == s;
    let mut out = Map::new();
    let mut code = 0;

    if wants(Suite::Identities) {
        let m = args.m.clone().unwrap_or_else(|| vec![5.0, 20.0, 100.0]);
        let rep = check_identities(&model, &m, run.samples(100_000), seed);
        eprintln!(
            "identities: {} checks, {} failed",
            rep.checks.len(),
            rep.failures().count()
        );
        out.insert("identities".into(), serde_json::to_value(&rep)?);
    }
    if wants(Suite::Concentration) {
        let deltas = args.deltas.clone().unwrap_or_else(|| vec![0.05]);
        let n = args.n.clone().filter(|_| !all).unwrap_or_else(|| vec![100, 1000]);
        let rep = check_concentration(&model, root, &deltas, &n, args.repetitions, seed)?;
        out.insert("concentration".into(), serde_json::to_value(&rep)?);
    }
    if wants(Suite::Types) {
        match &set {
            Some(set) => {
                let n = args.n.as_ref().and_then(|v| v.first().copied()).filter(|_| !all).unwrap_or(16);
                let delta = match cli.global.delta {
                    Some(DeltaArg::Value(v)) => v,
                    _ => 0.1,
                };
                let rep = check_type_frequencies(&model, root, set, n, delta, run.samples(1_000_000), seed)?;
                eprintln!("types: {} hits, mass on {} = {:.4}", rep.hits, rep.jset, rep.mass_on_jset);
                out.insert("types".into(), serde_json::to_value(&rep)?);
            }
            None if all => {
                out.insert("types".into(), json!({ "skipped": "no --set-file" }));
            }
            None => return Err(Error::InvalidArgument("the types suite needs --set-file".into())),
        }
    }
    if wants(Suite::Slopes) {
        match &set {
            Some(set) => {
                let n = args.n.clone().filter(|_| !all).unwrap_or_else(|| vec![8, 16, 32, 64]);
                let samples = run.samples(1_000_000);
                let mut res = sweep_probability(&model, root, set, &n, samples, seed)?;
                res.measure = Some(estimate_c_total(
                    root,
                    res.jset,
                    set,
                    &model,
                    delta_policy(cli.global.delta),
                    samples,
                    seed,
                )?);
                report_sweep(&res);
                if res.insufficient_hits {
                    code = 5;
                }
                run.sink.emit_plot(&sweep_svg(&res))?;
                out.insert("slopes".into(), sweep_value(&res)?);
            }
            None if all => {
                out.insert("slopes".into(), json!({ "skipped": "no --set-file" }));
            }
            None => return Err(Error::InvalidArgument("the slopes suite needs --set-file".into())),
        }
    }
    if wants(Suite::Counterexample) {
        let n = args.n.clone().filter(|_| !all).unwrap_or_else(|| vec![2, 4, 8]);
        match counterexample_experiment(&model, args.r, &n, run.samples(1_000_000), seed) {
            Ok(res) => {
                report_sweep(&res);
                if res.insufficient_hits && !all {
                    code = 5;
                }
                out.insert("counterexample".into(), sweep_value(&res)?);
            }
            Err(Error::Precondition(msg)) if all => {
                out.insert("counterexample".into(), json!({ "skipped": msg }));
            }
            Err(e) => return Err(e),
        }
    }
    run.sink.emit_json(&Value::Object(out))?;
    run.finish(code)
}

fn sweep_value(res: &SweepResult) -> Result<Value> {
    let mut v = serde_json::to_value(res)?;
    if let Value::Object(map) = &mut v {
        map.insert("ratio_check".into(), serde_json::to_value(res.ratio_check())?);
        map.insert("slope_above_target".into(), serde_json::to_value(res.slope_above_target())?);
    }
    Ok(v)
}

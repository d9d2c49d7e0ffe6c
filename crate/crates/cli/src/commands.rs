use std::fs::File;
use std::io::{BufReader, BufWriter, Write};
use std::path::Path;
use std::sync::Arc;

use cascadeflow_core::calibration::{
    artifact, export_histogram, mcnemar, paired_outcomes, scores_by_correctness, sweep_thresholds,
    threshold_for_target, CostDefaults, McNemarResult, OperatingTarget, TradeoffCurve,
};
use cascadeflow_core::dataset::{load_classification_dataset, CalibrationRecord};
use cascadeflow_gateway::http::{push_curve, serve, shutdown_signal};
use cascadeflow_gateway::{
    generate_pseudo_labels, BackendDescriptor, Gateway, GatewayOptions, ServeConfig, Side,
};

use crate::args::{
    CompareArgs, CostArgs, McNemarArgs, PseudoLabelArgs, ServeArgs, SweepArgs, TargetArgs,
};
use crate::error::{io_error, CliError};
use crate::report::{self, build_report, ReportOptions, SimulationReport};

type Result<T> = std::result::Result<T, CliError>;

fn costs(args: &CostArgs) -> Result<CostDefaults> {
    if !(args.student_cost.is_finite() && args.student_cost >= 0.0)
        || !(args.teacher_cost.is_finite() && args.teacher_cost >= 0.0)
    {
        return Err(CliError::Usage(
            "costs must be finite and non-negative".into(),
        ));
    }
    Ok(CostDefaults {
        student: args.student_cost,
        teacher: args.teacher_cost,
    })
}

fn target(args: &TargetArgs) -> Option<OperatingTarget> {
    args.min_accuracy
        .map(OperatingTarget::MinAccuracy)
        .or(args.max_cost.map(OperatingTarget::MaxCost))
}

fn load(path: &Path) -> Result<Vec<CalibrationRecord>> {
    Ok(load_classification_dataset(path)?)
}

fn create(path: &Path) -> Result<BufWriter<File>> {
    File::create(path)
        .map(BufWriter::new)
        .map_err(|e| io_error(path, e))
}

fn runtime() -> Result<tokio::runtime::Runtime> {
    tokio::runtime::Runtime::new()
        .map_err(|e| CliError::Backend(format!("cannot start runtime: {e}")))
}

pub fn sweep(args: &SweepArgs) -> Result<TradeoffCurve> {
    let records = load(&args.data)?;
    let family = args.family();
    family.validate()?;
    let curve = sweep_thresholds(&records, &family, &args.grid, costs(&args.costs)?)?;

    if let Some(path) = &args.out {
        let mut out = create(path)?;
        artifact::write_curve(&curve, &mut out)?;
    }
    if let Some(path) = &args.histogram {
        let (fit, unfit) = scores_by_correctness(&records, &family)?;
        let scores: Vec<f64> = fit.into_iter().chain(unfit).collect();
        let histogram = export_histogram(&scores, args.bins)?;
        artifact::write_histogram(&histogram, create(path)?)?;
    }

    print!("{}", report::curve_table(&curve, args.rows));
    if let Some(target) = target(&args.target) {
        match threshold_for_target(&curve, target)? {
            Some(point) => print!("selected:\n{}", report::point_row(&point)),
            None => println!("no threshold meets {target:?}"),
        }
    }
    if let Some(url) = &args.push {
        runtime()?.block_on(push_curve(url, &curve))?;
        println!("pushed {} points to {url}", curve.points.len());
    }
    Ok(curve)
}

pub fn compare(args: &CompareArgs) -> Result<SimulationReport> {
    let records = load(&args.data)?;
    let families = args.families();
    for f in &families {
        f.validate()?;
    }
    if args.runs == 0 {
        return Err(CliError::Usage("--runs must be at least 1".into()));
    }
    let report = build_report(
        &records,
        &ReportOptions {
            families: &families,
            fractions: &args.fractions,
            runs: args.runs,
            seed: args.seed,
            bins: args.bins,
            costs: costs(&args.costs)?,
            target: target(&args.target),
        },
    )?;
    if let Some(path) = &args.out {
        let mut out = create(path)?;
        serde_json::to_writer_pretty(&mut out, &report)
            .map_err(|e| CliError::Data(e.to_string()))?;
        writeln!(out)
            .and_then(|_| out.flush())
            .map_err(|e| io_error(path, e))?;
    }
    print!("{}", report::report_table(&report));
    Ok(report)
}

pub fn mcnemar_cmd(args: &McNemarArgs) -> Result<McNemarResult> {
    if !(args.alpha > 0.0 && args.alpha < 1.0) {
        return Err(CliError::Usage("--alpha must lie in (0, 1)".into()));
    }
    let (a, b) = (args.a.policy(), args.b.policy());
    a.validate()?;
    b.validate()?;
    let records = load(&args.data)?;
    if records.is_empty() {
        return Err(CliError::Data(format!(
            "{}: dataset is empty",
            args.data.display()
        )));
    }
    let (nb, nc) = paired_outcomes(&records, &a, &b, args.seed)?;
    let result = mcnemar(nb as i64, nc as i64)?;
    if let Some(path) = &args.out {
        let mut out = create(path)?;
        serde_json::to_writer(&mut out, &result).map_err(|e| CliError::Data(e.to_string()))?;
        writeln!(out)
            .and_then(|_| out.flush())
            .map_err(|e| io_error(path, e))?;
    }
    print!("{}", report::mcnemar_text(&result, args.alpha));
    Ok(result)
}

pub fn serve_cmd(args: &ServeArgs) -> Result<()> {
    let _ = tracing_subscriber::fmt()
        .with_writer(std::io::stderr)
        .try_init();
    let config = ServeConfig::load(&args.config)?;
    let gateway = Gateway::new(
        config.gateway_config(),
        GatewayOptions {
            histogram_edges: config.stats.histogram_edges.clone(),
            event_buffer: config.event_buffer,
            seed: config.seed,
        },
    )?;
    if let Some(path) = &config.curve {
        let file = File::open(path).map_err(|e| io_error(path, e))?;
        gateway.set_curve(artifact::read_curve(BufReader::new(file))?)?;
    }
    let gateway = Arc::new(gateway);
    runtime()?.block_on(async move {
        let listener = tokio::net::TcpListener::bind(config.listen)
            .await
            .map_err(|e| CliError::Backend(format!("cannot listen on {}: {e}", config.listen)))?;
        let addr = listener
            .local_addr()
            .map_err(|e| CliError::Backend(e.to_string()))?;
        println!("listening on http://{addr}");
        tracing::info!(%addr, "gateway started");
        serve(listener, gateway, shutdown_signal())
            .await
            .map_err(|e| CliError::Backend(e.to_string()))
    })
}

pub fn pseudo_label(args: &PseudoLabelArgs) -> Result<usize> {
    let teacher = match (&args.teacher.teacher_url, &args.teacher.teacher_replay) {
        (Some(url), None) => BackendDescriptor::Remote {
            url: url.clone(),
            timeout_ms: args.timeout_ms,
            cost: None,
            max_in_flight: 1,
        },
        (None, Some(path)) => BackendDescriptor::replay(path, Side::Teacher),
        _ => {
            return Err(CliError::Usage(
                "give exactly one of --teacher-url, --teacher-replay".into(),
            ))
        }
    };
    let input = File::open(&args.input).map_err(|e| io_error(&args.input, e))?;
    let out = create(&args.out)?;
    let written =
        runtime()?.block_on(generate_pseudo_labels(BufReader::new(input), &teacher, out))?;
    println!(
        "wrote {written} pseudo-labelled records to {}",
        args.out.display()
    );
    Ok(written)
}

use std::fs;
use std::path::{Path, PathBuf};

use anyhow::{anyhow, bail, Context, Result};
use serde::Serialize;
use serde_json::Value;
use teamtime_core::reporting::{cdf_overlay, density_histogram, qq_points};
use teamtime_core::selection::Omitted;
use teamtime_core::sim::{run_config, SimConfig};
use teamtime_core::{
    compare_models, fit_mle, schedule_session, CostSpec, Dataset, DispatchPlan, DurationModel, Execution, Family,
    FitResult,
};
use teamtime_telemetry::{
    apply_exclusions, ingest_session, write_durations_csv, ExclusionPolicy, IngestError, ServiceConfig, SessionPayload,
    Store,
};

use crate::{
    Command, CompareArgs, ExportArgs, FitArgs, PlotArgs, PlotKindArg, ScheduleArgs, ServeArgs, SimulateArgs,
};

pub const FIT_SCHEMA_VERSION: u32 = 1;

pub fn run(command: Command) -> Result<()> {
    match command {
        Command::Fit(a) => fit(a),
        Command::Compare(a) => compare(a),
        Command::Plot(a) => plot(a),
        Command::Simulate(a) => simulate(a),
        Command::Schedule(a) => schedule(a),
        Command::Serve(a) => serve(a),
        Command::Export(a) => export(a),
    }
}

fn create_parent(path: &Path) -> Result<()> {
    match path.parent() {
        Some(p) if !p.as_os_str().is_empty() => {
            fs::create_dir_all(p).with_context(|| format!("creating {}", p.display()))
        }
        _ => Ok(()),
    }
}

fn write_file(path: &Path, contents: impl AsRef<[u8]>) -> Result<()> {
    create_parent(path)?;
    fs::write(path, contents).with_context(|| format!("writing {}", path.display()))
}

fn write_json(path: &Path, value: &impl Serialize) -> Result<()> {
    let mut text = serde_json::to_string_pretty(value)?;
    text.push('\n');
    write_file(path, text)
}

fn created(path: &Path) -> Result<fs::File> {
    create_parent(path)?;
    fs::File::create(path).with_context(|| format!("creating {}", path.display()))
}

fn load_column(input: &Path, column: Option<&str>) -> Result<Dataset> {
    if let Some(c) = column {
        return Ok(Dataset::from_csv(input, c)?);
    }
    let columns = Dataset::csv_columns(input)?;
    columns
        .iter()
        .find_map(|c| Dataset::from_csv(input, c).ok().filter(|d| !d.is_empty()))
        .ok_or_else(|| anyhow!("{} has no numeric column (columns: {})", input.display(), columns.join(", ")))
}

#[derive(Serialize)]
struct FitDocument {
    schema_version: u32,
    dataset: String,
    n: usize,
    fits: Vec<FitResult>,
    omitted: Vec<Omitted>,
}

fn fit(a: FitArgs) -> Result<()> {
    let data = Dataset::from_csv(&a.input, &a.column)?;
    let families: Vec<Family> = if a.family == "all" {
        Family::ALL.to_vec()
    } else {
        vec![a.family.parse()?]
    };
    let mut doc = FitDocument {
        schema_version: FIT_SCHEMA_VERSION,
        dataset: data.label.clone(),
        n: data.n(),
        fits: Vec::new(),
        omitted: Vec::new(),
    };
    for family in families.iter().copied() {
        match fit_mle(family, &data) {
            Ok(fit) => doc.fits.push(fit),
            Err(e) if families.len() > 1 => doc.omitted.push(Omitted {
                family,
                reason: e.to_string(),
            }),
            Err(e) => return Err(e.into()),
        }
    }
    if doc.fits.is_empty() {
        bail!("no family could be fitted to {}", data.label);
    }
    for f in &doc.fits {
        eprintln!("{}  lnL={} converged={}", f.model.to_record(), f.log_likelihood, f.converged);
    }
    write_json(&a.out, &doc)
}

/// `<stem>.json` and `<stem>.csv`, ignoring any extension given on `out`.
fn compare_paths(out: &Path) -> (PathBuf, PathBuf) {
    let stem = match out.extension().and_then(|e| e.to_str()) {
        Some("json" | "csv") => out.with_extension(""),
        _ => out.to_path_buf(),
    };
    let with = |ext: &str| {
        let mut s = stem.clone().into_os_string();
        s.push(".");
        s.push(ext);
        PathBuf::from(s)
    };
    (with("json"), with("csv"))
}

fn compare(a: CompareArgs) -> Result<()> {
    let data = Dataset::from_csv(&a.input, &a.column)?;
    let table = compare_models(&data, &Family::ALL)?;
    let (json, csv) = compare_paths(&a.out);
    write_json(&json, &table.to_report())?;
    table.write_csv(created(&csv)?)?;
    for r in &table.rankings {
        eprintln!("{:?}: selected {}", r.criterion, r.selected());
    }
    Ok(())
}

/// Model from a record string, JSON text, or a file holding a model, a
/// FitResult, or a fit document with exactly one fit.
pub fn load_model(spec: &str) -> Result<DurationModel> {
    let direct = DurationModel::parse(spec);
    if let Ok(m) = direct {
        return Ok(m);
    }
    let path = Path::new(spec);
    if !path.is_file() {
        return Err(direct.unwrap_err()).context(format!("`{spec}` is neither a model nor a readable file"));
    }
    let text = fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
    if let Ok(m) = DurationModel::parse(&text) {
        return Ok(m);
    }
    let v: Value = serde_json::from_str(&text).with_context(|| format!("{}: not a model", path.display()))?;
    let model = if let Some(m) = v.get("model") {
        m.clone()
    } else if let Some(fits) = v.get("fits").and_then(Value::as_array) {
        match fits.as_slice() {
            [one] => one["model"].clone(),
            _ => bail!("{} holds {} fits; expected exactly one", path.display(), fits.len()),
        }
    } else {
        bail!("{}: no model found", path.display());
    };
    serde_json::from_value(model).with_context(|| format!("{}: invalid model", path.display()))
}

fn plot(a: PlotArgs) -> Result<()> {
    let model = load_model(&a.model)?;
    let data = load_column(&a.input, a.column.as_deref())?;
    let series = match a.kind {
        PlotKindArg::Qq => qq_points(&model, &data)?,
        PlotKindArg::Cdf => cdf_overlay(&model, &data)?,
        PlotKindArg::Density => density_histogram(&model, &data)?,
    };
    create_parent(&a.out)?;
    for p in series.write_files(&a.out)? {
        eprintln!("wrote {}", p.display());
    }
    Ok(())
}

fn simulate(a: SimulateArgs) -> Result<()> {
    let mut cfg = if a.config == "default" {
        SimConfig::illustrative()
    } else {
        let text = fs::read_to_string(&a.config).with_context(|| format!("reading {}", a.config))?;
        SimConfig::from_json(&text).with_context(|| a.config.clone())?
    };
    if let Some(seed) = a.seed {
        cfg.seed = seed;
    }
    if let Some(n) = a.sessions {
        cfg.n_sessions = n;
    }
    if let Some(plan) = &a.plan {
        let text = fs::read_to_string(plan).with_context(|| format!("reading {}", plan.display()))?;
        let plan: DispatchPlan = serde_json::from_str(&text).with_context(|| plan.display().to_string())?;
        cfg.apply_dispatch_plan(&plan)?;
    }
    cfg.validate()?;
    eprintln!("resolved simulation config: {}", serde_json::to_string(&cfg)?);

    let batch = run_config(&cfg, Execution::default())?;
    fs::create_dir_all(&a.out).with_context(|| format!("creating {}", a.out.display()))?;
    write_json(&a.out.join("config.json"), &cfg)?;
    batch.write_traces_jsonl(std::io::BufWriter::new(created(&a.out.join("traces.jsonl"))?))?;
    batch.write_durations_csv(created(&a.out.join("durations.csv"))?)?;

    let store = Store::open(&a.out)?;
    let (mut stored, mut duplicate) = (0, 0);
    for (i, p) in SessionPayload::from_batch(&batch, concat!("teamtime-sim/", env!("CARGO_PKG_VERSION")))
        .into_iter()
        .enumerate()
    {
        // synthetic receive times keep the store a deterministic function of the seed
        let ack = ingest_session(&store, &serde_json::to_value(&p)?, i as u64).map_err(|e| match e {
            IngestError::Invalid(v) => anyhow!("simulated session failed validation: {v}"),
            IngestError::Store(e) => anyhow!(e),
        })?;
        if ack.stored {
            stored += 1;
        } else {
            duplicate += 1;
        }
    }
    eprintln!(
        "{} sessions -> {} (stored {stored}, already present {duplicate})",
        batch.sessions.len(),
        a.out.display()
    );
    Ok(())
}

fn schedule(a: ScheduleArgs) -> Result<()> {
    let models = a.models.iter().map(|m| load_model(m)).collect::<Result<Vec<_>>>()?;
    let costs = CostSpec::new(a.cost_human, a.cost_robot)?;
    let plan = schedule_session(&models, &costs, &a.travel)?;
    for o in &plan.orders {
        eprintln!(
            "order {}: arrive {:.3} s, depart {:.3} s{}",
            o.order,
            o.target_s,
            o.departure_s,
            if o.departure_floored { " (floored)" } else { "" }
        );
    }
    write_json(&a.out, &plan)
}

fn serve(a: ServeArgs) -> Result<()> {
    let mut config = ServiceConfig::from_env()?;
    if let Some(p) = a.port {
        config.port = p;
    }
    if let Some(d) = a.data_dir {
        config.data_dir = d;
    }
    eprintln!("resolved service config: {}", serde_json::to_string(&config)?);
    let rt = tokio::runtime::Runtime::new()?;
    rt.block_on(async {
        let shutdown = async {
            let _ = tokio::signal::ctrl_c().await;
        };
        teamtime_telemetry::serve(&config, shutdown).await
    })?;
    Ok(())
}

fn export(a: ExportArgs) -> Result<()> {
    if !a.data_dir.is_dir() {
        bail!("data directory {} does not exist", a.data_dir.display());
    }
    let policy: ExclusionPolicy = a.policy.parse()?;
    let store = Store::open(&a.data_dir)?;
    let out = created(&a.out)?;
    let retained = store.with_records(|records| -> Result<usize> {
        let kept = apply_exclusions(records, &policy);
        let n = kept.len();
        write_durations_csv(kept, std::io::BufWriter::new(out))?;
        Ok(n)
    })?;
    eprintln!("exported {retained} of {} sessions (policy {policy})", store.len());
    Ok(())
}

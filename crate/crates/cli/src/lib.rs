//! Command-line front end: argument definitions, dispatch and reports.

pub mod model_file;
pub mod output;

use std::path::PathBuf;
use std::time::Instant;

use anyhow::{anyhow, bail, Context};
use clap::{Args, Parser, Subcommand, ValueEnum};
use mlz_core::catalog::{self, Params};
use mlz_core::*;
use rayon::prelude::*;
use serde_json::{json, Value};

pub use model_file::{canonical_json, fingerprint, parse_model_file, parse_model_str, ModelSpec};
pub use output::{fmt_num, matrix_csv, RunReport, Verdict};

#[derive(Debug, Parser)]
#[command(name = "mlz", version, about = "Multistate Landau-Zener models: integrability checks, ansatz and numerics")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
    /// Write tables, models and report.json into this directory.
    #[arg(long, global = true)]
    pub out: Option<PathBuf>,
    #[arg(long, global = true, value_enum, default_value_t = Format::Json)]
    pub format: Format,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Format {
    Csv,
    Json,
}

#[derive(Debug, Clone, Args)]
pub struct ModelArgs {
    /// Model-spec JSON file.
    #[arg(short = 'm', long = "model", conflicts_with = "name")]
    pub model: Option<PathBuf>,
    /// Catalog entry.
    #[arg(long)]
    pub name: Option<String>,
    /// Catalog parameters as k=v, comma separated or repeated.
    #[arg(long, num_args = 1.., requires = "name")]
    pub params: Vec<String>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum FrameArg {
    Bare,
    Rotating,
}

#[derive(Debug, Clone, Args)]
pub struct IntegrationArgs {
    /// Half-window T; integration runs over [-T, T].
    #[arg(long = "T", default_value_t = 2000.0)]
    pub t_half: f64,
    #[arg(long, default_value_t = 5e-4)]
    pub dt: f64,
    #[arg(long, value_enum, default_value_t = FrameArg::Rotating)]
    pub frame: FrameArg,
}

impl IntegrationArgs {
    pub fn config(&self) -> IntegrationConfig {
        let frame = match self.frame {
            FrameArg::Bare => Frame::Bare,
            FrameArg::Rotating => Frame::Rotating,
        };
        IntegrationConfig { t_half: self.t_half, dt: self.dt, frame }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Reference {
    Analytic,
    Ansatz,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum SweepMode {
    Numeric,
    Analytic,
    Ansatz,
    Compare,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum StatisticsArg {
    Fermion,
    Boson,
}

#[derive(Debug, Subcommand)]
pub enum CatalogAction {
    /// List entries with their parameter schemas.
    List,
    /// Show one entry's schema.
    Show { name: String },
    /// Build a model and, when available, its closed-form P.
    Build {
        name: String,
        #[arg(long, num_args = 1..)]
        params: Vec<String>,
    },
}

#[derive(Debug, Subcommand)]
pub enum Command {
    Catalog {
        #[command(subcommand)]
        action: CatalogAction,
    },
    /// Integrability checks; both run when neither flag is given.
    Check {
        #[command(flatten)]
        model: ModelArgs,
        #[arg(long)]
        ic1: bool,
        #[arg(long)]
        ic2: bool,
        /// Coupling scales for the exact-crossing check.
        #[arg(long, value_delimiter = ',', default_values_t = [1.0, 0.5])]
        scales: Vec<f64>,
    },
    /// Numerical transition probabilities.
    Simulate {
        #[command(flatten)]
        model: ModelArgs,
        #[command(flatten)]
        integration: IntegrationArgs,
    },
    /// Semiclassical matrix-product probabilities and path listings.
    Ansatz {
        #[command(flatten)]
        model: ModelArgs,
        /// 1-based initial and final level.
        #[arg(long, num_args = 2, value_names = ["FROM", "TO"])]
        paths: Option<Vec<usize>>,
    },
    /// Numeric P against the closed form or the ansatz.
    Compare {
        #[command(flatten)]
        model: ModelArgs,
        #[command(flatten)]
        integration: IntegrationArgs,
        #[arg(long, default_value_t = 2e-3)]
        tol: f64,
        /// Defaults to the closed form when the catalog has one.
        #[arg(long, value_enum)]
        against: Option<Reference>,
    },
    /// Adiabatic energies on a uniform time grid.
    Spectrum {
        #[command(flatten)]
        model: ModelArgs,
        #[arg(long, default_value_t = -10.0, allow_hyphen_values = true)]
        t_min: f64,
        #[arg(long, default_value_t = 10.0, allow_hyphen_values = true)]
        t_max: f64,
        #[arg(long, default_value_t = 201)]
        points: usize,
    },
    /// Builds a fixed-particle-number sector of a second-quantized model.
    Sector {
        #[arg(long, value_enum)]
        statistics: StatisticsArg,
        /// Number of sites, band plus driven site; checked against --energies.
        #[arg(long = "N")]
        n_sites: Option<usize>,
        #[arg(long = "NF")]
        n_particles: usize,
        /// Driven-site slope (fermions).
        #[arg(long, default_value_t = 1.0, allow_hyphen_values = true)]
        beta: f64,
        /// Interaction factor (fermions).
        #[arg(long, default_value_t = 0.0, allow_hyphen_values = true)]
        x: f64,
        #[arg(long, value_delimiter = ',', required = true, allow_hyphen_values = true)]
        energies: Vec<f64>,
        #[arg(long, value_delimiter = ',', required = true, allow_hyphen_values = true)]
        couplings: Vec<f64>,
    },
    /// One parameter of a catalog entry over a grid, constraints re-solved per point.
    Sweep {
        #[arg(long)]
        name: String,
        #[arg(long, num_args = 1..)]
        params: Vec<String>,
        /// param:lo:hi:n
        #[arg(long = "sweep", allow_hyphen_values = true)]
        sweep: String,
        #[arg(long, value_enum, default_value_t = SweepMode::Numeric)]
        mode: SweepMode,
        #[command(flatten)]
        integration: IntegrationArgs,
        #[arg(long, default_value_t = 2e-3)]
        tol: f64,
    },
}

/// Parsed `param:lo:hi:n`.
#[derive(Debug, Clone, PartialEq)]
pub struct SweepSpec {
    pub param: String,
    pub lo: f64,
    pub hi: f64,
    pub n: usize,
}

impl SweepSpec {
    pub fn parse(s: &str) -> anyhow::Result<Self> {
        let parts: Vec<&str> = s.split(':').collect();
        let [param, lo, hi, n] = parts[..] else {
            bail!("sweep must look like param:lo:hi:n, got '{s}'");
        };
        let spec = Self {
            param: param.to_string(),
            lo: lo.parse().with_context(|| format!("sweep lower bound '{lo}'"))?,
            hi: hi.parse().with_context(|| format!("sweep upper bound '{hi}'"))?,
            n: n.parse().with_context(|| format!("sweep point count '{n}'"))?,
        };
        if spec.param.is_empty() || spec.n == 0 {
            bail!("sweep needs a parameter name and at least one point");
        }
        Ok(spec)
    }

    pub fn points(&self) -> Vec<f64> {
        if self.n == 1 {
            return vec![self.lo];
        }
        (0..self.n).map(|k| self.lo + (self.hi - self.lo) * k as f64 / (self.n - 1) as f64).collect()
    }
}

/// A model plus, for catalog models, where it came from.
struct Source {
    model: DiabaticModel,
    catalog: Option<(String, Params)>,
}

fn load(args: &ModelArgs) -> anyhow::Result<Source> {
    match (&args.model, &args.name) {
        (Some(path), None) => Ok(Source { model: parse_model_file(path)?, catalog: None }),
        (None, Some(name)) => {
            let params = Params::parse(&args.params)?;
            let model = catalog::make_model(name, &params).with_context(|| format!("building '{name}'"))?;
            Ok(Source { model, catalog: Some((name.clone(), params)) })
        }
        _ => bail!("give either --model FILE or --name ENTRY"),
    }
}

fn model_json(model: &DiabaticModel) -> Value {
    serde_json::to_value(ModelSpec::from_model(model)).expect("model spec serializes")
}

fn attach_model(report: &mut RunReport, src: &Source) {
    report.model_fingerprint = Some(fingerprint(&src.model));
    if let Some((name, params)) = &src.catalog {
        report.outputs.insert("catalog".into(), json!({ "name": name, "params": params.to_string() }));
    }
}

fn verdict(report: &mut RunReport, key: &str, pass: bool, value: f64, threshold: f64, rule: &str) {
    report.verdicts.insert(key.to_string(), Verdict { pass, value, threshold, rule: rule.to_string() });
}

/// (0-based initial level, probabilities over final levels) pairs.
type Columns = Vec<(usize, Vec<f64>)>;

fn reference_columns(src: &Source, against: Option<Reference>) -> anyhow::Result<(Reference, Columns)> {
    let against = match (against, &src.catalog) {
        (Some(r), _) => r,
        (None, Some((name, params))) if catalog::analytic_columns(name, params).is_ok() => Reference::Analytic,
        (None, _) => Reference::Ansatz,
    };
    let cols = match against {
        Reference::Analytic => {
            let (name, params) = src.catalog.as_ref().ok_or_else(|| anyhow!("closed forms exist only for catalog models"))?;
            catalog::analytic_columns(name, params)?
        }
        Reference::Ansatz => {
            let p = ansatz_probabilities(&src.model)?;
            (0..p.dim()).map(|c| (c, p.column(c))).collect()
        }
    };
    Ok((against, cols))
}

fn max_column_dev(num: &[Vec<f64>], reference: &[(usize, Vec<f64>)]) -> f64 {
    num.iter()
        .zip(reference)
        .flat_map(|(a, (_, b))| a.iter().zip(b).map(|(x, y)| (x - y).abs()))
        .fold(0.0, f64::max)
}

struct Comparison {
    against: Reference,
    /// Numeric columns in the order of `reference`.
    numeric: Vec<Vec<f64>>,
    reference: Columns,
    max_dev: f64,
}

fn compare(src: &Source, cfg: &IntegrationConfig, against: Option<Reference>) -> anyhow::Result<Comparison> {
    let (against, reference) = reference_columns(src, against)?;
    let which: Vec<usize> = reference.iter().map(|c| c.0).collect();
    let numeric = transition_columns(&src.model, cfg, &which)?;
    let max_dev = max_column_dev(&numeric, &reference);
    Ok(Comparison { against, numeric, reference, max_dev })
}

fn run_catalog(action: &CatalogAction, report: &mut RunReport) -> anyhow::Result<()> {
    match action {
        CatalogAction::List => {
            report.outputs.insert("entries".into(), serde_json::to_value(catalog::list())?);
        }
        CatalogAction::Show { name } => {
            report.outputs.insert("entry".into(), serde_json::to_value(catalog::entry(name)?)?);
        }
        CatalogAction::Build { name, params } => {
            let given = Params::parse(params)?;
            let resolved = catalog::entry(name)?.resolve(&given)?;
            let src = Source { model: catalog::make_model(name, &given)?, catalog: Some((name.clone(), given.clone())) };
            attach_model(report, &src);
            report.outputs.insert("resolved_params".into(), json!(resolved.to_string()));
            if let Ok(sol) = catalog::four_state_solution(name, &given) {
                report.outputs.insert("constraint_solution".into(), serde_json::to_value(sol)?);
            }
            report.models.insert("model".into(), model_json(&src.model));
            match catalog::analytic_columns(name, &given) {
                Ok(cols) if cols.len() == src.model.n_levels() => {
                    report.tables.insert("analytic".into(), matrix_csv(&catalog::analytic_probabilities(name, &given)?));
                }
                Ok(cols) => {
                    report.tables.insert("analytic".into(), output::columns_csv(&cols));
                }
                Err(Error::NoAnalyticForm(why)) => {
                    report.outputs.insert("analytic".into(), json!({ "available": false, "reason": why }));
                }
                Err(e) => return Err(e.into()),
            }
        }
    }
    Ok(())
}

fn ic1_json(model: &DiabaticModel, r: &Ic1Report) -> Value {
    let graph = build_level_graph(model);
    let cycles: Vec<Value> = r
        .cycles
        .iter()
        .zip(&r.areas)
        .map(|(c, a)| {
            let edges: Vec<Value> = c.edges.iter().map(|e| json!({ "level": e.level + 1, "from": e.from, "to": e.to })).collect();
            json!({ "edges": edges, "area": a })
        })
        .collect();
    let action = r.action.as_ref().map(|s| {
        let m: serde_json::Map<String, Value> = s.iter().enumerate().map(|(k, v)| (k.to_string(), json!(v))).collect();
        Value::Object(m)
    });
    let vertices: Vec<Value> = graph
        .vertices
        .iter()
        .map(|v| json!({ "time": v.time, "energy": v.energy, "levels": v.levels.iter().map(|l| l + 1).collect::<Vec<_>>() }))
        .collect();
    json!({
        "holds": r.holds,
        "tolerance": r.tolerance,
        "vertices": vertices,
        "cycles": cycles,
        "action": action,
        "action_consistent": r.action_consistent,
    })
}

fn ic2_json(r: &Ic2Report) -> Value {
    let verdicts: Vec<Value> = r
        .verdicts
        .iter()
        .map(|v| {
            json!({
                "levels": [v.pair.0 + 1, v.pair.1 + 1],
                "time": v.event.time,
                "required_exact": v.required_exact,
                "classified_exact": v.classified_exact,
                "gap": v.min_gap,
                "gap_time": v.min_gap_time,
                "per_scale": v.per_scale,
            })
        })
        .collect();
    json!({
        "holds": r.holds,
        "vacuous": r.required == 0,
        "scales": r.scales,
        "required": r.required,
        "exact": r.exact,
        "verdicts": verdicts,
    })
}

/// Flattened probabilities and, when compared, the deviation.
type SweepRow = (Vec<f64>, Option<f64>);

fn run_sweep(
    name: &str,
    params: &[String],
    spec: &str,
    mode: SweepMode,
    cfg: &IntegrationConfig,
    tol: f64,
    report: &mut RunReport,
) -> anyhow::Result<()> {
    let spec = SweepSpec::parse(spec)?;
    let base = Params::parse(params)?;
    catalog::entry(name)?.resolve(&base.clone().with(&spec.param, spec.lo))?;
    let points = spec.points();
    // each point yields one row: the flattened P (or selected columns) and the deviation
    let rows: Vec<anyhow::Result<SweepRow>> = points
        .par_iter()
        .map(|&v| {
            let p = base.clone().with(&spec.param, v);
            let model = catalog::make_model(name, &p).with_context(|| format!("{} = {v}", spec.param))?;
            let src = Source { model, catalog: Some((name.to_string(), p.clone())) };
            let flat = |m: &ProbabilityMatrix| m.to_rows().concat();
            Ok(match mode {
                SweepMode::Numeric => (flat(&transition_matrix_numeric(&src.model, cfg)?), None),
                SweepMode::Analytic => (flat(&catalog::analytic_probabilities(name, &p)?), None),
                SweepMode::Ansatz => (flat(&ansatz_probabilities(&src.model)?), None),
                SweepMode::Compare => {
                    let c = compare(&src, cfg, None)?;
                    if c.reference.len() == src.model.n_levels() {
                        (flat(&columns_to_matrix(&c.numeric)), Some(c.max_dev))
                    } else {
                        (c.numeric.concat(), Some(c.max_dev))
                    }
                }
            })
        })
        .collect();
    let rows: Vec<SweepRow> = rows.into_iter().collect::<anyhow::Result<_>>()?;
    let width = rows[0].0.len();
    if rows.iter().any(|r| r.0.len() != width) {
        bail!("model size changes along the sweep");
    }
    let n = (width as f64).sqrt().round() as usize;
    let mut header = vec![spec.param.clone()];
    if n * n == width {
        for f in 1..=n {
            for i in 1..=n {
                header.push(format!("P{f}_{i}"));
            }
        }
    } else {
        header.extend((0..width).map(|k| format!("c{k}")));
    }
    let compared = mode == SweepMode::Compare;
    if compared {
        header.push("max_dev".into());
    }
    let table: Vec<Vec<f64>> = points
        .iter()
        .zip(&rows)
        .map(|(&v, (vals, dev))| std::iter::once(v).chain(vals.iter().copied()).chain(dev.iter().copied()).collect())
        .collect();
    report.tables.insert("sweep".into(), output::table_csv(&header, &table));
    report.outputs.insert("points".into(), json!(points.len()));
    if compared {
        let worst = rows.iter().filter_map(|r| r.1).fold(0.0, f64::max);
        report.outputs.insert("max_deviation".into(), json!(worst));
        verdict(report, "agreement", worst <= tol, worst, tol, "max |numeric - reference| <= tol over the sweep");
    }
    Ok(())
}

/// Full set of columns to a matrix indexed [final][initial].
fn columns_to_matrix(cols: &[Vec<f64>]) -> ProbabilityMatrix {
    let rows: Vec<Vec<f64>> = (0..cols.len()).map(|f| cols.iter().map(|c| c[f]).collect()).collect();
    ProbabilityMatrix::from_rows(&rows)
}

/// Size of the rayon pool: `MLZ_THREADS` when set to a positive integer.
pub fn thread_count() -> Option<usize> {
    std::env::var("MLZ_THREADS").ok().and_then(|s| s.trim().parse().ok()).filter(|&n| n > 0)
}

/// Runs one command and returns its report; verdicts decide the exit code.
pub fn dispatch(cli: &Cli, argv: Vec<String>) -> anyhow::Result<RunReport> {
    let start = Instant::now();
    let mut report = RunReport::new(argv);
    let mut pool = rayon::ThreadPoolBuilder::new();
    if let Some(n) = thread_count() {
        pool = pool.num_threads(n);
    }
    let pool = pool.build()?;
    pool.install(|| run(&cli.command, &mut report))?;
    report.wall_time_s = start.elapsed().as_secs_f64();
    Ok(report)
}

fn run(command: &Command, report: &mut RunReport) -> anyhow::Result<()> {
    match command {
        Command::Catalog { action } => run_catalog(action, report)?,
        Command::Check { model, ic1, ic2, scales } => {
            let src = load(model)?;
            attach_model(report, &src);
            let both = !ic1 && !ic2;
            if *ic1 || both {
                let r = check_ic1(&src.model);
                let worst = r.worst.map_or(0.0, |w| w.1.abs());
                verdict(report, "ic1", r.holds, worst, r.tolerance, "every independent cycle has zero area");
                report.outputs.insert("ic1".into(), ic1_json(&src.model, &r));
            }
            if *ic2 || both {
                let r = check_ic2(&src.model, scales)?;
                let misses = (r.required - r.exact.min(r.required)) as f64;
                verdict(report, "ic2", r.holds, misses, 0.0, "every required crossing is exact at all scales");
                report.outputs.insert("ic2".into(), ic2_json(&r));
            }
        }
        Command::Simulate { model, integration } => {
            let src = load(model)?;
            let cfg = integration.config();
            attach_model(report, &src);
            report.config = Some(cfg);
            let s = scattering_matrix_numeric(&src.model, &cfg)?;
            report.outputs.insert("unitarity_defect".into(), json!(s.unitarity_defect()));
            report.tables.insert("P".into(), matrix_csv(&s.probabilities()));
        }
        Command::Ansatz { model, paths } => {
            let src = load(model)?;
            attach_model(report, &src);
            report.outputs.insert("interference".into(), json!(has_interference(&src.model)));
            report.tables.insert("P".into(), matrix_csv(&ansatz_probabilities(&src.model)?));
            if let Some(ends) = paths {
                let n = src.model.n_levels();
                let idx = |k: usize| if (1..=n).contains(&k) { Ok(k - 1) } else { Err(Error::LevelOutOfRange { index: k, n }) };
                let list = enumerate_paths(&src.model, idx(ends[0])?, idx(ends[1])?)?;
                let (re, im) = list.iter().fold((0.0, 0.0), |acc, p| (acc.0 + p.amplitude_re, acc.1 + p.amplitude_im));
                let shown: Vec<Value> = list
                    .iter()
                    .map(|p| {
                        json!({
                            "levels": p.levels.iter().map(|l| l + 1).collect::<Vec<_>>(),
                            "turn_times": p.turn_times,
                            "amplitude": [p.amplitude_re, p.amplitude_im],
                            "probability": p.probability,
                        })
                    })
                    .collect();
                report.outputs.insert(
                    "paths".into(),
                    json!({ "from": ends[0], "to": ends[1], "paths": shown, "total_probability": re * re + im * im }),
                );
            }
        }
        Command::Compare { model, integration, tol, against } => {
            let src = load(model)?;
            let cfg = integration.config();
            attach_model(report, &src);
            report.config = Some(cfg);
            let c = compare(&src, &cfg, *against)?;
            let num: Columns = c.reference.iter().map(|r| r.0).zip(c.numeric).collect();
            report.outputs.insert("reference".into(), json!(format!("{:?}", c.against).to_lowercase()));
            report.outputs.insert("max_deviation".into(), json!(c.max_dev));
            report.tables.insert("numeric".into(), output::columns_csv(&num));
            report.tables.insert("reference".into(), output::columns_csv(&c.reference));
            verdict(report, "agreement", c.max_dev <= *tol, c.max_dev, *tol, "max |numeric - reference| <= tol");
        }
        Command::Spectrum { model, t_min, t_max, points } => {
            let src = load(model)?;
            attach_model(report, &src);
            let track = adiabatic_spectrum(&src.model, *t_min, *t_max, *points)?;
            let header: Vec<String> = std::iter::once("t".to_string()).chain((1..=src.model.n_levels()).map(|k| format!("E{k}"))).collect();
            let rows: Vec<Vec<f64>> =
                track.times.iter().zip(&track.energies).map(|(&t, e)| std::iter::once(t).chain(e.iter().copied()).collect()).collect();
            report.tables.insert("spectrum".into(), output::table_csv(&header, &rows));
        }
        Command::Sector { statistics, n_sites, n_particles, beta, x, energies, couplings } => {
            if let Some(n) = n_sites {
                if *n != energies.len() + 1 {
                    bail!("--N {n} needs {} band energies, got {}", n - 1, energies.len());
                }
            }
            let spec = match statistics {
                StatisticsArg::Fermion => SecondQuantizedSpec::fermion(*beta, energies.clone(), couplings.clone(), *x),
                StatisticsArg::Boson => SecondQuantizedSpec::boson(energies.clone(), couplings.clone()),
            };
            let sector = enumerate_basis(&spec, *n_particles)?;
            let model = build_sector_model(&spec, *n_particles)?;
            let basis: Vec<Vec<u32>> = (0..sector.dim()).map(|k| sector.occupation(k)).collect();
            report.model_fingerprint = Some(fingerprint(&model));
            report.outputs.insert("basis".into(), json!(basis));
            report.models.insert("model".into(), model_json(&model));
        }
        Command::Sweep { name, params, sweep, mode, integration, tol } => {
            let cfg = integration.config();
            if matches!(mode, SweepMode::Numeric | SweepMode::Compare) {
                report.config = Some(cfg);
            }
            run_sweep(name, params, sweep, *mode, &cfg, *tol, report)?;
        }
    }
    Ok(())
}

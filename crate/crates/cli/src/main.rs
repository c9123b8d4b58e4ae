//! `vline`: phantoms, forward transforms, cone integrals and inversions from the command line.
//!
//! Every subcommand takes its parameters as flags, optionally backed by a JSON
//! file given with `--config`; flags win over the file. Exit codes: 0 success,
//! 1 invalid usage or parameters, 2 unreadable or malformed files, 3 a
//! tolerance check failed.

use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use serde::{de::DeserializeOwned, Deserialize, Serialize};
use serde_json::{Map, Value};
use vline::field::{export_pgm, load_field, store_field};
use vline::geometry::ConeFrame;
use vline::{
    accumulate, compare_fields, forward_broken_ray, forward_polyhedral, forward_weighted, invert, invert_alt_known,
    make_phantom, range_membership, ConeIntegralField, DiffMode, DiffScheme, Frame, FrameSpec, Grid, PhantomSpec,
    RangeTolerances, ScalarField, Sinogram,
};

const INTERIOR_MARGIN: f64 = 0.05;

#[derive(Parser)]
#[command(name = "vline", version, about = "Broken-ray transform toolkit")]
struct Cli {
    /// JSON file with default values for the subcommand's flags.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Sample an analytic phantom on a unit lattice.
    Phantom(PhantomArgs),
    /// Broken-ray, weighted or polyhedral transform of a field.
    Forward(ForwardArgs),
    /// Cone integral of a sinogram.
    Accumulate(AccumulateArgs),
    /// Recover a field from a cone integral (shrinking, mixed) or a sinogram (alt).
    Invert(InvertArgs),
    /// Phantom, forward, accumulate, invert and compare in one go.
    Roundtrip(RoundtripArgs),
    /// Range diagnostics of a sinogram.
    RangeCheck(RangeCheckArgs),
    /// Error metrics between two fields.
    Compare(CompareArgs),
    /// 8-bit grayscale preview.
    ExportPgm(ExportArgs),
}

#[derive(Args, Serialize, Deserialize, Default)]
#[serde(default)]
struct PhantomArgs {
    /// poly_example1, exp_example2, constant, gaussian, disk or separable_poly.
    #[arg(long)]
    kind: Option<String>,
    /// Full phantom JSON, e.g. '{"kind":"disk","amplitude":1,"center":[0.5,0.5],"radius":0.2}'.
    #[arg(long)]
    spec: Option<String>,
    /// Lattice points per axis, e.g. 256x256 or 64x64x64.
    #[arg(long)]
    grid: Option<String>,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args, Serialize, Deserialize, Default)]
#[serde(default)]
struct ForwardArgs {
    #[arg(long)]
    input: Option<PathBuf>,
    /// `perp` or frame JSON.
    #[arg(long)]
    frame: Option<String>,
    /// Quadrature step; defaults to half the finest spacing.
    #[arg(long)]
    step: Option<f64>,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args, Serialize, Deserialize, Default)]
#[serde(default)]
struct AccumulateArgs {
    #[arg(long)]
    input: Option<PathBuf>,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args, Serialize, Deserialize, Default)]
#[serde(default)]
struct InvertArgs {
    #[arg(long)]
    input: Option<PathBuf>,
    /// shrinking, mixed (default) or alt.
    #[arg(long)]
    method: Option<String>,
    /// Stencil scale: a length or a multiple of the spacing such as `2dx` (default).
    #[arg(long)]
    t: Option<String>,
    #[arg(long)]
    richardson: bool,
    /// Upper limit of the alt method's integral; defaults to the lattice top.
    #[arg(long)]
    y_max: Option<f64>,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args, Serialize, Deserialize, Default)]
#[serde(default)]
struct RoundtripArgs {
    #[arg(long)]
    phantom: Option<String>,
    #[arg(long)]
    grid: Option<String>,
    #[arg(long)]
    frame: Option<String>,
    #[arg(long)]
    step: Option<f64>,
    #[arg(long)]
    method: Option<String>,
    #[arg(long)]
    t: Option<String>,
    #[arg(long)]
    richardson: bool,
    /// Largest accepted interior relative L2 error (default 0.02).
    #[arg(long)]
    tolerance: Option<f64>,
    /// Directory receiving phantom, sinogram, cone integral and reconstruction.
    #[arg(long)]
    save: Option<PathBuf>,
}

#[derive(Args, Serialize, Deserialize, Default)]
#[serde(default)]
struct RangeCheckArgs {
    #[arg(long)]
    input: Option<PathBuf>,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    samples: Option<usize>,
    /// Largest accepted relative L2 reprojection mismatch (default 0.02).
    #[arg(long)]
    reprojection_tol: Option<f64>,
    /// Accepted negative pre-measure, relative to max|F|.
    #[arg(long)]
    nu0_tol: Option<f64>,
}

#[derive(Args, Serialize, Deserialize, Default)]
#[serde(default)]
struct CompareArgs {
    a: Option<PathBuf>,
    b: Option<PathBuf>,
    /// Compare only inside the lattice shrunk by this fraction per side.
    #[arg(long)]
    margin: Option<f64>,
}

#[derive(Args, Serialize, Deserialize, Default)]
#[serde(default)]
struct ExportArgs {
    #[arg(long)]
    input: Option<PathBuf>,
    #[arg(long)]
    out: Option<PathBuf>,
}

enum Failure {
    Usage(String),
    Library(vline::Error),
    Tolerance(String),
}

impl Failure {
    fn code(&self) -> u8 {
        match self {
            Failure::Usage(_) => 1,
            Failure::Library(e) if e.is_io() => 2,
            Failure::Library(_) => 1,
            Failure::Tolerance(_) => 3,
        }
    }

    fn message(&self) -> String {
        match self {
            Failure::Usage(m) | Failure::Tolerance(m) => m.clone(),
            Failure::Library(e) => e.to_string(),
        }
    }
}

impl From<vline::Error> for Failure {
    fn from(e: vline::Error) -> Self {
        Failure::Library(e)
    }
}

type Outcome<T> = std::result::Result<T, Failure>;

/// Attributes a library error to the flag that caused it, keeping its exit class.
fn at_flag<T>(flag: &str, r: vline::Result<T>) -> Outcome<T> {
    r.map_err(|e| match e {
        e if e.is_io() => Failure::Library(e),
        e => Failure::Usage(format!("{flag}: {e}")),
    })
}

fn required<T: Clone>(value: &Option<T>, flag: &str) -> Outcome<T> {
    value.clone().ok_or_else(|| Failure::Usage(format!("{flag} is required")))
}

fn distinct(input: &Path, out: &Path) -> Outcome<()> {
    if input == out {
        return Err(Failure::Usage(format!("--out must differ from the input {}", input.display())));
    }
    Ok(())
}

/// Flags set on the command line replace the matching config keys.
fn merge<T: Serialize + DeserializeOwned>(args: T, config: Option<&Map<String, Value>>) -> Outcome<T> {
    let Some(config) = config else { return Ok(args) };
    let mut merged = config.clone();
    for key in ["frame", "spec"] {
        if let Some(v) = merged.get_mut(key) {
            if !v.is_string() {
                *v = Value::String(v.to_string());
            }
        }
    }
    let Value::Object(flags) = serde_json::to_value(&args).expect("flag structs serialize") else {
        unreachable!("flag structs serialize to objects")
    };
    for (k, v) in flags {
        if !(v.is_null() || v == Value::Bool(false)) {
            merged.insert(k, v);
        }
    }
    serde_json::from_value(Value::Object(merged)).map_err(|e| Failure::Usage(format!("--config: {e}")))
}

fn load_config(path: Option<&Path>, section: &str) -> Outcome<Option<Map<String, Value>>> {
    let Some(path) = path else { return Ok(None) };
    let text = std::fs::read_to_string(path).map_err(|e| Failure::Library(e.into()))?;
    let value: Value = serde_json::from_str(&text)
        .map_err(|e| Failure::Library(vline::Error::Format(format!("{}: {e}", path.display()))))?;
    let Value::Object(mut root) = value else {
        return Err(Failure::Library(vline::Error::Format(format!("{} is not a JSON object", path.display()))));
    };
    match root.remove(section) {
        Some(Value::Object(inner)) => Ok(Some(inner)),
        _ => Ok(Some(root)),
    }
}

fn parse_grid(text: &str) -> Outcome<Grid> {
    let counts: std::result::Result<Vec<usize>, _> = text.split(['x', 'X']).map(str::parse).collect();
    let counts = counts.map_err(|_| Failure::Usage(format!("--grid: expected NxM or NxMxK, got `{text}`")))?;
    at_flag("--grid", Grid::unit(&counts))
}

fn parse_frame(text: &str) -> Outcome<Frame> {
    at_flag("--frame", FrameSpec::parse(text).and_then(|s| s.build()))
}

fn parse_scheme(t: Option<&str>, richardson: bool, mode: DiffMode, grid: &Grid) -> Outcome<DiffScheme> {
    let mut scheme = DiffScheme::default_for(grid, mode);
    scheme.richardson = richardson;
    if let Some(text) = t {
        let bad = || Failure::Usage(format!("--t: expected a length or a multiple like `2dx`, got `{text}`"));
        scheme.t = match text.strip_suffix("dx") {
            Some(k) => k.parse::<f64>().map_err(|_| bad())? * grid.max_spacing(),
            None => text.parse::<f64>().map_err(|_| bad())?,
        };
    }
    at_flag("--t", scheme.validate(grid))?;
    Ok(scheme)
}

enum Method {
    Cone(DiffMode),
    Alt,
}

fn parse_method(text: Option<&str>) -> Outcome<Method> {
    match text.unwrap_or("mixed") {
        "mixed" => Ok(Method::Cone(DiffMode::MixedPartial)),
        "shrinking" => Ok(Method::Cone(DiffMode::ShrinkingAverage)),
        "alt" => Ok(Method::Alt),
        other => Err(Failure::Usage(format!("--method: expected shrinking, mixed or alt, got `{other}`"))),
    }
}

fn forward(f: &ScalarField, frame: &Frame, step: f64) -> vline::Result<Sinogram> {
    match frame {
        Frame::Broken(fr) => forward_broken_ray(f, fr, step),
        Frame::Weighted(fr) => forward_weighted(f, fr, step),
        Frame::Polyhedral(fr) => forward_polyhedral(f, fr, step),
    }
}

fn check_dims(frame: &Frame, grid: &Grid) -> Outcome<()> {
    if frame.dim() != grid.dim() {
        return Err(Failure::Usage(format!(
            "--frame: DimensionMismatch: a {}-D frame cannot act on a {}-D field",
            frame.dim(),
            grid.dim()
        )));
    }
    Ok(())
}

fn print_json(value: &impl Serialize) {
    println!("{}", serde_json::to_string_pretty(value).expect("reports serialize"));
}

fn run_phantom(a: PhantomArgs) -> Outcome<()> {
    let grid = parse_grid(&required(&a.grid, "--grid")?)?;
    let spec = match (&a.spec, &a.kind) {
        (Some(json), _) => at_flag("--spec", serde_json::from_str::<PhantomSpec>(json).map_err(|e| {
            vline::Error::InvalidParameter(e.to_string())
        }))?,
        (None, Some(kind)) => at_flag("--kind", PhantomSpec::by_name(kind, grid.dim()))?,
        (None, None) => return Err(Failure::Usage("--kind or --spec is required".into())),
    };
    let out = required(&a.out, "--out")?;
    let f = at_flag("--kind", make_phantom(&spec, &grid))?;
    store_field(&f, &out)?;
    Ok(())
}

fn run_forward(a: ForwardArgs) -> Outcome<()> {
    let input = required(&a.input, "--input")?;
    let out = required(&a.out, "--out")?;
    distinct(&input, &out)?;
    let frame = parse_frame(a.frame.as_deref().unwrap_or("perp"))?;
    let f = load_field(&input)?;
    check_dims(&frame, f.grid())?;
    let step = a.step.unwrap_or_else(|| f.grid().default_step());
    let g = at_flag("--step", forward(&f, &frame, step))?;
    g.store(&out)?;
    Ok(())
}

fn run_accumulate(a: AccumulateArgs) -> Outcome<()> {
    let input = required(&a.input, "--input")?;
    let out = required(&a.out, "--out")?;
    distinct(&input, &out)?;
    let g = Sinogram::load(&input)?;
    accumulate(&g)?.store(&out)?;
    Ok(())
}

fn run_invert(a: InvertArgs) -> Outcome<()> {
    let input = required(&a.input, "--input")?;
    let out = required(&a.out, "--out")?;
    distinct(&input, &out)?;
    let f = match parse_method(a.method.as_deref())? {
        Method::Alt => {
            let g = Sinogram::load(&input)?;
            at_flag("--method", invert_alt_known(&g, a.y_max))?
        }
        Method::Cone(mode) => {
            let big_f = ConeIntegralField::load(&input)?;
            let scheme = parse_scheme(a.t.as_deref(), a.richardson, mode, big_f.field.grid())?;
            invert(&big_f, &scheme)?
        }
    };
    store_field(&f, &out)?;
    Ok(())
}

#[derive(Serialize)]
struct RoundtripReport {
    phantom: String,
    grid: Vec<usize>,
    method: String,
    t: Option<f64>,
    richardson: bool,
    l2_rel: f64,
    linf: f64,
    mean_err: f64,
    points: usize,
    tolerance: f64,
    passed: bool,
}

fn run_roundtrip(a: RoundtripArgs) -> Outcome<()> {
    let grid = parse_grid(&required(&a.grid, "--grid")?)?;
    let kind = required(&a.phantom, "--phantom")?;
    let spec = at_flag("--phantom", PhantomSpec::by_name(&kind, grid.dim()))?;
    at_flag("--phantom", spec.validate(grid.dim()))?;
    let frame = parse_frame(a.frame.as_deref().unwrap_or("perp"))?;
    check_dims(&frame, &grid)?;
    let method = parse_method(a.method.as_deref())?;
    let scheme = match method {
        Method::Cone(mode) => Some(parse_scheme(a.t.as_deref(), a.richardson, mode, &grid)?),
        Method::Alt => None,
    };
    let tolerance = a.tolerance.unwrap_or(0.02);
    let step = a.step.unwrap_or_else(|| grid.default_step());

    let f = make_phantom(&spec, &grid)?;
    let g = at_flag("--step", forward(&f, &frame, step))?;
    let big_f = accumulate(&g)?;
    let rec = match &scheme {
        Some(s) => invert(&big_f, s)?,
        None => at_flag("--method", invert_alt_known(&g, None))?,
    };
    if let Some(dir) = &a.save {
        std::fs::create_dir_all(dir).map_err(|e| Failure::Library(e.into()))?;
        store_field(&f, &dir.join("phantom.f64"))?;
        g.store(&dir.join("sinogram.f64"))?;
        big_f.store(&dir.join("cone.f64"))?;
        store_field(&rec, &dir.join("reconstruction.f64"))?;
    }
    let interior = grid.bbox().inset(INTERIOR_MARGIN);
    let m = compare_fields(&rec, &f, Some(&interior))?;
    let report = RoundtripReport {
        phantom: kind,
        grid: grid.counts().to_vec(),
        method: a.method.unwrap_or_else(|| "mixed".into()),
        t: scheme.map(|s| s.t),
        richardson: a.richardson,
        l2_rel: m.l2_rel,
        linf: m.linf,
        mean_err: m.mean_err,
        points: m.points,
        tolerance,
        passed: m.l2_rel <= tolerance,
    };
    print_json(&report);
    if !report.passed {
        return Err(Failure::Tolerance(format!("l2_rel {:.4e} exceeds tolerance {tolerance}", report.l2_rel)));
    }
    Ok(())
}

fn run_range_check(a: RangeCheckArgs) -> Outcome<()> {
    let input = required(&a.input, "--input")?;
    let mut tol = RangeTolerances::default();
    if let Some(seed) = a.seed {
        tol.seed = seed;
    }
    if let Some(samples) = a.samples {
        if samples == 0 {
            return Err(Failure::Usage("--samples must be at least 1".into()));
        }
        tol.monotonicity_samples = samples;
    }
    if let Some(r) = a.reprojection_tol {
        tol.reprojection = r;
    }
    if let Some(n) = a.nu0_tol {
        tol.nu0 = n;
    }
    let g = Sinogram::load(&input)?;
    let report = range_membership(&g, &tol)?;
    print_json(&report);
    if !report.is_in_range {
        return Err(Failure::Tolerance("sinogram failed the range diagnostics".into()));
    }
    Ok(())
}

fn run_compare(a: CompareArgs) -> Outcome<()> {
    let pa = required(&a.a, "A")?;
    let pb = required(&a.b, "B")?;
    let fa = load_field(&pa)?;
    let fb = load_field(&pb)?;
    let region = a.margin.map(|m| fa.grid().bbox().inset(m));
    let metrics = compare_fields(&fa, &fb, region.as_ref())?;
    print_json(&metrics);
    Ok(())
}

fn run_export(a: ExportArgs) -> Outcome<()> {
    let input = required(&a.input, "--input")?;
    let out = required(&a.out, "--out")?;
    distinct(&input, &out)?;
    let f = load_field(&input)?;
    export_pgm(&f, &out)?;
    Ok(())
}

fn run(cli: Cli) -> Outcome<()> {
    let config = cli.config.as_deref();
    match cli.command {
        Command::Phantom(a) => run_phantom(merge(a, load_config(config, "phantom")?.as_ref())?),
        Command::Forward(a) => run_forward(merge(a, load_config(config, "forward")?.as_ref())?),
        Command::Accumulate(a) => run_accumulate(merge(a, load_config(config, "accumulate")?.as_ref())?),
        Command::Invert(a) => run_invert(merge(a, load_config(config, "invert")?.as_ref())?),
        Command::Roundtrip(a) => run_roundtrip(merge(a, load_config(config, "roundtrip")?.as_ref())?),
        Command::RangeCheck(a) => run_range_check(merge(a, load_config(config, "range-check")?.as_ref())?),
        Command::Compare(a) => run_compare(merge(a, load_config(config, "compare")?.as_ref())?),
        Command::ExportPgm(a) => run_export(merge(a, load_config(config, "export-pgm")?.as_ref())?),
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(failure) => {
            eprintln!("error: {}", failure.message());
            ExitCode::from(failure.code())
        }
    }
}

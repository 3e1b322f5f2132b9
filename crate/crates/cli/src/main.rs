//! `linkcert` command-line tool.
//!
//! Exit status: 0 on success or a passing verification, 1 when the topology
//! differs from the reference, 2 on any operational error.

mod bench;
mod report;

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand, ValueEnum};
use linkcert::braid::{close_braid, parse_braid_json, reclose_braid, ClosureTemplate};
use linkcert::certify::{diff_matrices, parse_matrix, serialize_matrix, CertifyOptions};
use linkcert::generators::{generate, Scenario};
use linkcert::io::{parse_model, save_model, ModelFormat};
use linkcert::kernels::{BarnesHutParams, CrossingParams, DirectVariant, KernelChoice, KernelMethod, Order};
use linkcert::model::CurveModel;
use linkcert::pls::PairSet;
use linkcert::{compute_linking_matrix, verify};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

#[derive(Parser, Debug)]
#[command(name = "linkcert", version, about = "Linking-number certificates for closed curve models")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Compute the certificate of a model.
    Compute {
        model: PathBuf,
        /// Where to write the certificate; stdout if omitted.
        #[arg(short, long)]
        output: Option<PathBuf>,
        /// For braid inputs, where to store the connection template.
        #[arg(long)]
        closure_out: Option<PathBuf>,
        #[command(flatten)]
        common: CommonArgs,
    },
    /// Check a model against a reference certificate.
    Verify {
        model: PathBuf,
        certificate: PathBuf,
        /// Stop at the first pair that disagrees.
        #[arg(long)]
        early_exit: bool,
        /// For braid inputs, reuse the connections recorded at compute time.
        #[arg(long)]
        closure: Option<PathBuf>,
        #[command(flatten)]
        common: CommonArgs,
    },
    /// Compare two certificates.
    Diff {
        reference: PathBuf,
        computed: PathBuf,
        #[arg(long, value_enum, default_value_t = Format::Text)]
        format: Format,
    },
    /// Write a synthetic model and its expected certificate.
    Gen {
        /// Scenario such as `torus:t=2,p=3,n=400` or `grid:l=10`.
        scenario: Scenario,
        #[arg(short, long)]
        output: PathBuf,
        #[arg(long)]
        certificate: Option<PathBuf>,
    },
    /// Time the pipeline stages on synthetic scenarios; CSV on stdout.
    Bench(bench::BenchArgs),
}

#[derive(Copy, Clone, Debug, PartialEq, Eq, ValueEnum)]
pub enum Format {
    Text,
    Json,
}

#[derive(Copy, Clone, Debug, PartialEq, Eq, ValueEnum)]
pub enum KernelArg {
    Cc,
    Ds,
    Bh,
}

impl From<KernelArg> for KernelMethod {
    fn from(k: KernelArg) -> Self {
        match k {
            KernelArg::Cc => KernelMethod::CountCrossings,
            KernelArg::Ds => KernelMethod::DirectSum,
            KernelArg::Bh => KernelMethod::BarnesHut,
        }
    }
}

#[derive(Copy, Clone, Debug, PartialEq, Eq, ValueEnum)]
pub enum VariantArg {
    Atan,
    Anglesum,
}

#[derive(Copy, Clone, Debug, PartialEq, Eq, ValueEnum)]
pub enum OrderArg {
    Dipole,
    Quad,
}

impl From<OrderArg> for Order {
    fn from(o: OrderArg) -> Self {
        match o {
            OrderArg::Dipole => Order::Dipole,
            OrderArg::Quad => Order::Quadrupole,
        }
    }
}

#[derive(Args, Debug, Clone)]
pub struct KernelArgs {
    #[arg(long, value_enum, default_value_t = KernelArg::Ds)]
    pub kernel: KernelArg,
    #[arg(long, value_enum, default_value_t = VariantArg::Anglesum)]
    pub ds_variant: VariantArg,
    #[arg(long, default_value_t = 2.0)]
    pub beta_init: f64,
    #[arg(long, default_value_t = 10.0)]
    pub beta_max: f64,
    #[arg(long, default_value_t = 0.2)]
    pub e_target: f64,
    #[arg(long, value_enum, default_value_t = OrderArg::Quad)]
    pub order: OrderArg,
    /// Seed for the random projection frames of crossing counting.
    #[arg(long, default_value_t = CrossingParams::default().seed)]
    pub seed: u64,
    /// Worker threads; defaults to the hardware parallelism.
    #[arg(long, env = "LINKCERT_THREADS")]
    pub threads: Option<usize>,
}

impl KernelArgs {
    pub fn choice(&self) -> KernelChoice {
        KernelChoice {
            method: self.kernel.into(),
            ds_variant: match self.ds_variant {
                VariantArg::Atan => DirectVariant::PerPairAtan,
                VariantArg::Anglesum => DirectVariant::AngleSum,
            },
            bh: BarnesHutParams {
                beta_init: self.beta_init,
                beta_max: self.beta_max,
                e_target: self.e_target,
                order: self.order.into(),
                ..Default::default()
            },
            cc: CrossingParams { seed: self.seed, ..Default::default() },
        }
    }

    pub fn options(&self) -> CertifyOptions {
        CertifyOptions { kernel: self.choice(), threads: self.threads, ..Default::default() }
    }
}

#[derive(Args, Debug)]
struct CommonArgs {
    #[command(flatten)]
    kernel: KernelArgs,
    #[arg(long, value_enum, default_value_t = Format::Text)]
    format: Format,
    /// Model format; inferred from the extension by default.
    #[arg(long)]
    input_format: Option<ModelFormat>,
}

/// A loaded model, closed first if the file describes a braid.
struct Input {
    model: CurveModel,
    excluded: PairSet,
    template: Option<ClosureTemplate>,
}

fn load_input(path: &Path, format: Option<ModelFormat>, closure: Option<&Path>) -> Result<Input> {
    let text = std::fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
    let format = format.unwrap_or_else(|| ModelFormat::from_path(path));
    let is_braid = format == ModelFormat::JsonCurves
        && serde_json::from_str::<serde_json::Value>(&text).is_ok_and(|v| v.get("braid").is_some());
    if !is_braid {
        if closure.is_some() {
            bail!("--closure given but {} is not a braid", path.display());
        }
        let model = parse_model(&text, format).with_context(|| format!("parsing {}", path.display()))?;
        return Ok(Input { model, excluded: PairSet::new(), template: None });
    }
    let braid = parse_braid_json(&text).with_context(|| format!("parsing braid {}", path.display()))?;
    let closed = match closure {
        None => close_braid(&braid)?,
        Some(t) => {
            let bytes = std::fs::read(t).with_context(|| format!("reading {}", t.display()))?;
            let template: ClosureTemplate = serde_json::from_slice(&bytes).context("parsing closure template")?;
            reclose_braid(&braid, &template)?
        }
    };
    Ok(Input { model: closed.model, excluded: closed.excluded, template: Some(closed.template) })
}

fn write_or_print(path: Option<&Path>, bytes: &[u8]) -> Result<()> {
    match path {
        Some(p) => std::fs::write(p, bytes).with_context(|| format!("writing {}", p.display())),
        None => {
            use std::io::Write;
            std::io::stdout().write_all(bytes)?;
            Ok(())
        }
    }
}

fn run(cli: Cli) -> Result<u8> {
    match cli.command {
        Command::Compute { model, output, closure_out, common } => {
            let input = load_input(&model, common.input_format, None)?;
            let opts = common.kernel.options();
            let m = compute_linking_matrix(&input.model, &opts, &input.excluded)?;
            if let (Some(p), Some(t)) = (&closure_out, &input.template) {
                std::fs::write(p, serde_json::to_vec_pretty(t)?).with_context(|| format!("writing {}", p.display()))?;
            }
            let bytes = serialize_matrix(&m);
            match output {
                Some(ref p) => {
                    write_or_print(Some(p), &bytes)?;
                    report::print_compute(&m, common.format);
                }
                None => write_or_print(None, &bytes)?,
            }
            Ok(0)
        }
        Command::Verify { model, certificate, early_exit, closure, common } => {
            let input = load_input(&model, common.input_format, closure.as_deref())?;
            let bytes = std::fs::read(&certificate).with_context(|| format!("reading {}", certificate.display()))?;
            let reference = parse_matrix(&bytes).with_context(|| format!("parsing {}", certificate.display()))?;
            let opts = common.kernel.options();
            let r = verify(&input.model, &reference, &opts, early_exit, &input.excluded)?;
            report::print_verification(&r, common.format);
            Ok(if r.is_pass() { 0 } else { 1 })
        }
        Command::Diff { reference, computed, format } => {
            let load = |p: &Path| -> Result<_> {
                let b = std::fs::read(p).with_context(|| format!("reading {}", p.display()))?;
                parse_matrix(&b).with_context(|| format!("parsing {}", p.display()))
            };
            let r = diff_matrices(&load(&reference)?, &load(&computed)?);
            report::print_verification(&r, format);
            Ok(if r.is_pass() { 0 } else { 1 })
        }
        Command::Gen { scenario, output, certificate } => {
            let (model, expected) = generate(&scenario)?;
            save_model(&model, &output).with_context(|| format!("writing {}", output.display()))?;
            if let Some(p) = certificate {
                write_or_print(Some(&p), &serialize_matrix(&expected))?;
            }
            Ok(0)
        }
        Command::Bench(args) => {
            bench::run(&args)?;
            Ok(0)
        }
    }
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(code) => ExitCode::from(code),
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(2)
        }
    }
}

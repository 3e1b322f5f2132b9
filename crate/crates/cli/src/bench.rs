//! Per-stage timings and kernel errors on synthetic scenarios.

use crate::{KernelArg, KernelArgs};
use anyhow::Result;
use clap::Args;
use linkcert::discretize::{discretize, DiscretizationParams};
use linkcert::generators::{generate, Scenario};
use linkcert::kernels::barnes_hut::barnes_hut_pass;
use linkcert::kernels::crossings::pair_seed;
use linkcert::kernels::{compute_link_prepared, KernelChoice, KernelMethod, LinkOutcome, PreparedLoop};
use linkcert::pls::{potential_link_search, PairSet};
use std::time::Instant;

#[derive(Args, Debug)]
pub struct BenchArgs {
    /// Scenarios such as `ribbon:lambda=10,n=20000`.
    #[arg(required = true)]
    scenarios: Vec<Scenario>,
    /// Kernels to time.
    #[arg(long, value_enum, value_delimiter = ',', default_values_t = [KernelArg::Ds, KernelArg::Cc, KernelArg::Bh])]
    kernels: Vec<KernelArg>,
    /// Fixed-β Barnes–Hut runs instead of the kernel list, one row per β.
    #[arg(long, value_delimiter = ',')]
    beta_sweep: Vec<f64>,
    #[command(flatten)]
    kernel: KernelArgs,
}

const HEADER: &str = "scenario,kernel,n,order,beta,pls_s,discretize_s,kernel_s,raw,expected,abs_error";

pub fn run(args: &BenchArgs) -> Result<()> {
    println!("{HEADER}");
    let pool = match args.kernel.threads {
        Some(n) => Some(rayon::ThreadPoolBuilder::new().num_threads(n.max(1)).build()?),
        None => None,
    };
    for sc in &args.scenarios {
        match &pool {
            Some(p) => p.install(|| scenario_rows(sc, args))?,
            None => scenario_rows(sc, args)?,
        }
    }
    Ok(())
}

fn scenario_rows(sc: &Scenario, args: &BenchArgs) -> Result<()> {
    let (model, expected) = generate(sc)?;
    let t = Instant::now();
    let pairs = potential_link_search(&model, &PairSet::new());
    let pls_s = t.elapsed().as_secs_f64();
    let t = Instant::now();
    let disc = discretize(&model, &pairs, &DiscretizationParams::default())?;
    let disc_s = t.elapsed().as_secs_f64();
    let loops: Vec<PreparedLoop> = disc.loops.into_iter().map(PreparedLoop::new).collect();
    let base = args.kernel.choice();
    let n = sc.segments_per_loop();
    let row = |kernel: &str, order: &str, beta: String, kernel_s: f64, raws: &[(usize, usize, f64)]| {
        let err = raws.iter().map(|&(i, j, r)| (r - expected.get(i, j) as f64).abs()).fold(0.0, f64::max);
        let (raw, exp) = raws.first().map_or((0.0, 0), |&(i, j, r)| (r, expected.get(i, j)));
        println!("\"{sc}\",{kernel},{n},{order},{beta},{pls_s:.6},{disc_s:.6},{kernel_s:.6},{raw},{exp},{err:e}");
    };
    let order_name = match base.bh.order {
        linkcert::kernels::Order::Dipole => "dipole",
        linkcert::kernels::Order::Quadrupole => "quad",
    };

    if !args.beta_sweep.is_empty() {
        for &beta in &args.beta_sweep {
            let t = Instant::now();
            let raws: Vec<(usize, usize, f64)> = pairs
                .iter()
                .map(|(i, j)| {
                    let v = barnes_hut_pass(
                        loops[i].moment_tree(),
                        loops[j].moment_tree(),
                        beta,
                        base.bh.order,
                        base.bh.k_const,
                    );
                    (i, j, v.value)
                })
                .collect();
            row("bh", order_name, beta.to_string(), t.elapsed().as_secs_f64(), &raws);
        }
        return Ok(());
    }

    for &k in &args.kernels {
        let method: KernelMethod = k.into();
        let choice = KernelChoice { method, ..base };
        let t = Instant::now();
        let mut raws = Vec::with_capacity(pairs.len());
        for (i, j) in pairs.iter() {
            let mut c = choice;
            c.cc.seed = pair_seed(base.cc.seed, i, j);
            let out: LinkOutcome = compute_link_prepared(&loops[i], &loops[j], &c)?;
            raws.push((i, j, out.raw.unwrap_or(out.value as f64)));
        }
        let (order, beta) = match method {
            KernelMethod::BarnesHut => (order_name, base.bh.beta_init.to_string()),
            _ => ("", String::new()),
        };
        row(method.tag(), order, beta, t.elapsed().as_secs_f64(), &raws);
    }
    Ok(())
}

use std::fmt::Write as _;

use bgt_core::combin::binom_u128;
use bgt_core::fmf::{self, BinomialMode, FMFParams};
use bgt_core::landscape::{self, all_strata};
use bgt_core::mcmc::{self, ChainConfig, Init, Rule};
use bgt_core::model::{comp_prune, sample_instance, sample_instance_k, GTInstance, PrunedInstance};
use bgt_core::report::fmt12;
use bgt_core::{gfunc, regions, setcover, Error};
use serde::Serialize;

use crate::args::*;

/// A file produced by a subcommand.
pub struct Output {
    pub name: String,
    pub bytes: Vec<u8>,
}

/// Failures that are not errors of the core library.
#[derive(Debug)]
pub enum Failure {
    Core(Error),
    Usage(String),
    /// The computation ran but its certificate failed.
    Check(String),
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        Failure::Core(e)
    }
}

impl From<serde_json::Error> for Failure {
    fn from(e: serde_json::Error) -> Self {
        Failure::Core(e.into())
    }
}

type Res<T> = std::result::Result<T, Failure>;

fn out(name: &str, bytes: Vec<u8>) -> Output {
    Output {
        name: name.to_string(),
        bytes,
    }
}

fn json<T: Serialize>(name: &str, v: &T) -> Res<Output> {
    let mut s = serde_json::to_string_pretty(v)?;
    s.push('\n');
    Ok(out(name, s.into_bytes()))
}

fn csv(name: &str, f: impl FnOnce(&mut Vec<u8>) -> bgt_core::Result<()>) -> Res<Output> {
    let mut buf = Vec::new();
    f(&mut buf)?;
    Ok(out(name, buf))
}

pub fn run(cli: &Cli) -> Res<Vec<Output>> {
    let g = &cli.global;
    match &cli.command {
        Command::Gen(a) => gen(g, a),
        Command::Mcmc(a) => mcmc_cmd(g, a),
        Command::Landscape(a) => landscape_cmd(g, a),
        Command::Fmf(a) => fmf_cmd(g, a),
        Command::Region(a) => region_cmd(g, a),
        Command::CriticalC(a) => critical_cmd(g, a),
        Command::Cover(a) => cover_cmd(g, a),
        Command::Gfun(a) => gfun_cmd(g, a),
    }
}

fn instance(a: &InstanceArgs, seed: u64) -> Res<GTInstance> {
    Ok(match (a.k, a.alpha) {
        (Some(k), _) => sample_instance_k(a.n, k, a.c, seed)?,
        (None, Some(alpha)) => sample_instance(a.n, alpha, a.c, seed)?,
        (None, None) => return Err(Failure::Usage("one of --k or --alpha is required".into())),
    })
}

fn check_cap(g: &Global, pr: &PrunedInstance) -> Res<()> {
    if let Some(cap) = g.caps {
        let required = binom_u128(pr.p as u64, pr.k as u64);
        if required > cap as u128 {
            return Err(Error::CapExceeded {
                what: "k-subsets of the candidates",
                required,
                cap: cap as u128,
            }
            .into());
        }
    }
    Ok(())
}

fn gen(g: &Global, a: &GenArgs) -> Res<Vec<Output>> {
    let inst = instance(&a.instance, g.seed)?;
    let pr = comp_prune(&inst);
    let mut outs = vec![out("instance.json", (inst.to_json()? + "\n").into_bytes())];
    if g.out.is_some() {
        outs.push(json("pruned.json", &pr)?);
        if a.binary {
            outs.push(out("instance.bin", inst.to_binary()));
        }
    } else if a.binary {
        return Err(Failure::Usage("--binary needs --out".into()));
    }
    Ok(outs)
}

#[derive(Serialize)]
struct EnsembleRow {
    seed: u64,
    hit_step: Option<u64>,
    zero_energy_step: Option<u64>,
    success: bool,
    final_energy: f64,
    final_overlap: usize,
}

#[derive(Serialize)]
struct EnsembleOut {
    beta: f64,
    max_steps: u64,
    rule: Rule,
    p: usize,
    k: usize,
    #[serde(rename = "M")]
    m: usize,
    success_rate: f64,
    runs: Vec<EnsembleRow>,
}

fn mcmc_cmd(g: &Global, a: &McmcArgs) -> Res<Vec<Output>> {
    let pr = comp_prune(&instance(&a.instance, g.seed)?);
    let beta = match (a.beta, a.beta_scale) {
        (Some(b), _) => b,
        (None, Some(s)) => s * pr.k as f64 * (pr.p as f64 / pr.k as f64).ln(),
        (None, None) => return Err(Failure::Usage("one of --beta or --beta-scale is required".into())),
    };
    let mut cfg = ChainConfig::new(beta, a.steps, g.seed);
    cfg.rule = match a.rule {
        RuleArg::Glauber => Rule::Glauber,
        RuleArg::Metropolis => Rule::Metropolis,
    };
    cfg.init = match a.init {
        InitArg::Uniform => Init::UniformRandomKSubset,
        InitArg::Disjoint => Init::DisjointFromPlanted,
    };
    cfg.stop_overlap = a.stop_overlap;
    cfg.stop_at_zero_energy = a.stop_zero;
    cfg.record_every = a.record_every;
    if a.chains <= 1 {
        let tr = mcmc::run_chain(&pr, &cfg)?;
        return Ok(vec![match g.format {
            Format::Csv => csv("trace.csv", |w| tr.write_csv(w))?,
            Format::Json => json("trace.json", &tr)?,
        }]);
    }
    let seeds: Vec<u64> = (0..a.chains).map(|i| g.seed.wrapping_add(i)).collect();
    let ens = mcmc::run_ensemble(&pr, &cfg, &seeds)?;
    // wall times stay out of the outputs so that replays are byte-identical
    let view = EnsembleOut {
        beta: ens.beta,
        max_steps: ens.max_steps,
        rule: ens.rule,
        p: pr.p,
        k: pr.k,
        m: pr.m,
        success_rate: ens.success_rate,
        runs: ens
            .runs
            .iter()
            .map(|r| EnsembleRow {
                seed: r.seed,
                hit_step: r.hit_step,
                zero_energy_step: r.zero_energy_step,
                success: r.success,
                final_energy: r.final_energy,
                final_overlap: r.final_overlap,
            })
            .collect(),
    };
    Ok(vec![match g.format {
        Format::Json => json("ensemble.json", &view)?,
        Format::Csv => {
            let mut s = String::from("seed,hit_step,zero_energy_step,success,final_energy,final_overlap\n");
            let opt = |v: Option<u64>| v.map(|x| x.to_string()).unwrap_or_default();
            for r in &view.runs {
                let _ = writeln!(
                    s,
                    "{},{},{},{},{},{}",
                    r.seed,
                    opt(r.hit_step),
                    opt(r.zero_energy_step),
                    r.success,
                    fmt12(r.final_energy),
                    r.final_overlap
                );
            }
            out("ensemble.csv", s.into_bytes())
        }
    }])
}

#[derive(Serialize)]
struct BottleneckRow {
    beta: f64,
    eps1: f64,
    ratio: f64,
}

fn landscape_cmd(g: &Global, a: &LandscapeArgs) -> Res<Vec<Output>> {
    let pr = comp_prune(&instance(&a.instance, g.seed)?);
    check_cap(g, &pr)?;
    let cap = g.caps.map_or(landscape::STRATUM_CAP, |c| c as u128);
    let curve = landscape::phi_curve_with_cap(&pr, cap)?;
    let mut outs = vec![match g.format {
        Format::Csv => csv("phi.csv", |w| curve.write_csv(w))?,
        Format::Json => json("phi.json", &curve)?,
    }];
    if a.z_table {
        let strata = all_strata(&pr, cap)?;
        let mut s = String::from("l,t,count\n");
        for st in &strata {
            for t in 0..=pr.m {
                let _ = writeln!(s, "{},{},{}", st.l, t, st.count_at_most(t));
            }
        }
        outs.push(out("z_table.csv", s.into_bytes()));
    }
    if a.bogp {
        let report = match landscape::search_bogp(&curve) {
            Some((z1, z2, r, d)) => serde_json::to_value(landscape::detect_bogp(&curve, z1, z2, r, d)?)?,
            None => serde_json::json!({ "holds": false }),
        };
        outs.push(json("bogp.json", &report)?);
    }
    if !a.bottleneck_beta.is_empty() {
        let rows: Vec<BottleneckRow> = a
            .bottleneck_beta
            .iter()
            .map(|&beta| {
                Ok(BottleneckRow {
                    beta,
                    eps1: a.eps1,
                    ratio: mcmc::bottleneck_ratio(&pr, beta, a.eps1)?,
                })
            })
            .collect::<bgt_core::Result<_>>()?;
        outs.push(match g.format {
            Format::Json => json("bottleneck.json", &rows)?,
            Format::Csv => {
                let mut s = String::from("beta,eps1,ratio\n");
                for r in &rows {
                    let _ = writeln!(s, "{},{},{}", fmt12(r.beta), fmt12(r.eps1), fmt12(r.ratio));
                }
                out("bottleneck.csv", s.into_bytes())
            }
        });
    }
    Ok(outs)
}

#[derive(Serialize)]
struct FmfOut<'a> {
    params: &'a FMFParams,
    y_zero: f64,
    nonmonotonicity: Option<(f64, f64)>,
    trend: fmf::Trend,
    curve: &'a fmf::FMFCurve,
}

fn fmf_cmd(g: &Global, a: &FmfArgs) -> Res<Vec<Output>> {
    let a_val = match a.a {
        Some(v) => v,
        None => regions::a_inf(a.alpha, a.c)? + 0.01,
    };
    let mut params = FMFParams::surrogate(a.n, a.alpha, a.c, a_val)?;
    params.c_r = a.c_r;
    params.c_s = a.c_s;
    params.c_i = a.c_i;
    params.validate()?;
    let grid = a.grid.map_or_else(|| fmf::default_grid(params.k), |g| g.points());
    let k = params.k as f64;
    let on_lattice = grid.iter().all(|x| ((x * k) - (x * k).round()).abs() < 1e-9);
    params = params.with_mode(match a.mode {
        ModeArg::Floored => BinomialMode::Floored,
        ModeArg::Continuous => BinomialMode::Continuous,
        ModeArg::Auto if on_lattice => BinomialMode::Floored,
        ModeArg::Auto => BinomialMode::Continuous,
    });
    let curve = fmf::solve_curve(&params, &grid, a.compare_unconditional)?;
    Ok(vec![match g.format {
        Format::Csv => csv("fmf.csv", |w| curve.write_csv(w))?,
        Format::Json => json(
            "fmf.json",
            &FmfOut {
                params: &params,
                y_zero: fmf::y_zero(&params)?,
                nonmonotonicity: fmf::nonmonotonicity(&curve),
                trend: fmf::trend(&curve.y),
                curve: &curve,
            },
        )?,
    }])
}

fn region_cmd(g: &Global, a: &RegionArgs) -> Res<Vec<Output>> {
    let report = regions::region_scan(a.alpha_range, a.c_range, a.n_alpha, a.n_c)?;
    Ok(vec![match g.format {
        Format::Csv => csv("region.csv", |w| report.write_csv(w))?,
        Format::Json => json("region.json", &report)?,
    }])
}

fn critical_cmd(g: &Global, a: &CriticalArgs) -> Res<Vec<Output>> {
    let r = regions::critical_c(a.alpha)?;
    Ok(vec![match g.format {
        Format::Csv => out(
            "critical_c.csv",
            format!("alpha,C,a,residual\n{},{},{},{}\n", fmt12(r.alpha), fmt12(r.c), fmt12(r.a), fmt12(r.residual))
                .into_bytes(),
        ),
        Format::Json => json("critical_c.json", &r)?,
    }])
}

fn cover_cmd(g: &Global, a: &CoverArgs) -> Res<Vec<Output>> {
    let (p, m, k) = match (a.universe, a.sets, a.k, a.n, a.alpha, a.c) {
        (Some(p), Some(m), Some(k), ..) => (p, m, k),
        (_, _, _, Some(n), Some(alpha), Some(c)) => setcover::cover_dims(n, alpha, c)?,
        _ => return Err(Failure::Usage("give --P, --M and --k, or --n, --alpha and --C".into())),
    };
    let required = binom_u128(p as u64, k as u64);
    let cap = g.caps.map_or(setcover::COVER_ENUMERATION_CAP, |c| c as u128);
    if required > cap {
        return Err(Error::CapExceeded {
            what: "cover k-subsets",
            required,
            cap,
        }
        .into());
    }
    let inst = setcover::sample_cover(p, m, k, g.seed)?;
    let report = setcover::cover_report(&inst, a.c, a.random_trials)?;
    let mut outs = vec![match g.format {
        Format::Json => json("cover.json", &report)?,
        Format::Csv => {
            let opt = |v: Option<f64>| v.map(fmt12).unwrap_or_default();
            let witness = report
                .witness
                .as_ref()
                .map(|w| w.iter().map(|e| e.to_string()).collect::<Vec<_>>().join(" "))
                .unwrap_or_default();
            out(
                "cover.csv",
                format!(
                    "P,M,k,q,seed,phi_exact,phi_greedy,phi_random_mean,phi_limit,witness\n{},{},{},{},{},{},{},{},{},{}\n",
                    report.universe_size,
                    report.num_sets,
                    report.k,
                    fmt12(report.q),
                    report.seed,
                    opt(report.phi_exact),
                    fmt12(report.phi_greedy),
                    fmt12(report.phi_random_mean),
                    opt(report.phi_limit),
                    witness
                )
                .into_bytes(),
            )
        }
    }];
    if let Some(y) = a.flat_y {
        outs.push(json("flat.json", &setcover::count_flat(&inst, y, a.c_dl)?)?);
    }
    Ok(outs)
}

fn gfun_cmd(g: &Global, a: &GfunArgs) -> Res<Vec<Output>> {
    let r = gfunc::verify_g_properties(a.y, a.points)?;
    let summary = out("gfun_summary.json", (r.summary_json()? + "\n").into_bytes());
    let outs = match g.format {
        Format::Csv => vec![csv("gfun.csv", |w| r.write_csv(w))?, summary],
        Format::Json => vec![summary],
    };
    if !r.passed {
        let f = &r.failures[0];
        return Err(Failure::Check(format!(
            "G-breve certification failed for y = {}: {} at x = {} ({} failures)",
            a.y,
            f.check,
            f.x,
            r.failures.len()
        )));
    }
    Ok(outs)
}

//! Command-line surface for the broadcast-channel toolkit: channel info,
//! `T_alpha` evaluation, envelopes, rate formulas, conjecture checks, the
//! builtin counterexample, local-max certification and randomized search.
//!
//! Exit codes: 0 success / inequality holds, 1 confirmed violation or
//! refuted certificate, 2 invalid input.

mod emit;

use std::path::PathBuf;
use std::process::ExitCode;
use std::str::FromStr;

use clap::{Args, Parser, Subcommand};
use serde::Serialize;

use martonlab::bssc;
use martonlab::envelope::{self, EnvelopeOpts};
use martonlab::extremal::{self, Verdict};
use martonlab::factorize::{
    self, CheckOptions, ConjectureKind, SearchConfig, VerdictKind, WeightedObjective,
};
use martonlab::maxcorr;
use martonlab::probcore::{
    self, BroadcastChannel, Builtin, ChannelJson, JointTable, SimplexVector,
};
use martonlab::tmax::{self, CouplingWithMap, MapF, TmaxOptions};

#[derive(Parser)]
#[command(
    name = "martonlab",
    about = "Numerical machinery for Marton's inner bound",
    version
)]
struct Cli {
    #[command(subcommand)]
    cmd: Cmd,
}

#[derive(Args, Clone)]
struct CommonArgs {
    /// Builtin channel: bssc_half | blackwell | appendix_b
    #[arg(long)]
    builtin: Option<String>,
    /// Channel JSON file (x_size, y_given_x, z_given_x, optional px)
    #[arg(long)]
    channel: Option<PathBuf>,
    /// Input law, comma separated; fractions accepted (e.g. 1/3,1/3,1/3)
    #[arg(long)]
    px: Option<String>,
    #[arg(long)]
    alpha: Option<f64>,
    #[arg(long)]
    lambda: Option<f64>,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long)]
    restarts: Option<usize>,
    /// Grid density used by envelopes / rate formulas / per-point scans
    #[arg(long)]
    grid: Option<usize>,
    /// Write output here instead of stdout
    #[arg(long)]
    out: Option<PathBuf>,
    /// json | csv
    #[arg(long, default_value = "json")]
    format: String,
}

#[derive(Subcommand)]
enum Cmd {
    /// Channel shapes, mutual informations and more-capable flags
    Info(CommonArgs),
    /// Evaluate T_alpha(X) at a fixed input law
    Tmax(CommonArgs),
    /// Envelope of the weighted one-letter functional with grid trace
    Envelope(CommonArgs),
    /// Maximum sum rate of the inner bound (binary input)
    Sumrate(CommonArgs),
    /// Support function max(alpha R1 + R2) of the inner bound
    WeightedRate(CommonArgs),
    /// Check the one-letter weighted inequality at a fixed input law
    CheckEq1(CommonArgs),
    /// Factorization check at unit weight
    Conj1 {
        #[command(flatten)]
        common: CommonArgs,
        #[arg(long)]
        builtin2: Option<String>,
        #[arg(long)]
        channel2: Option<PathBuf>,
    },
    /// Weighted factorization check
    Conj2 {
        #[command(flatten)]
        common: CommonArgs,
        #[arg(long)]
        builtin2: Option<String>,
        #[arg(long)]
        channel2: Option<PathBuf>,
    },
    /// Envelope-domination check over the binary input simplex
    Conj3(CommonArgs),
    /// Skew-symmetric channel analyses
    Bssc {
        #[command(flatten)]
        common: CommonArgs,
        /// Emit the (x, g(x)) criterion scan as CSV
        #[arg(long)]
        g_scan: bool,
        /// Scan weights against the stationarity/curvature conditions
        #[arg(long)]
        and_scan: bool,
        /// Weighted-region values over a weight grid
        #[arg(long)]
        weighted_region: bool,
        /// Step for --g-scan
        #[arg(long, default_value_t = 0.001)]
        step: f64,
    },
    /// Squared maximal correlation of a joint table
    Maxcorr {
        #[command(flatten)]
        common: CommonArgs,
        /// Joint table JSON file: {"entries": [[...], ...]}
        #[arg(long)]
        joint: PathBuf,
    },
    /// Reproduce the builtin counterexample to the weighted inequality
    Counterexample(CommonArgs),
    /// First/second-order local-max certificate for a coupling
    Certify {
        #[command(flatten)]
        common: CommonArgs,
        /// Coupling JSON file: {"p_uv": [[...]], "f": [[...]]}
        #[arg(long)]
        coupling: PathBuf,
    },
    /// Randomized conjecture falsification search
    Search {
        #[command(flatten)]
        common: CommonArgs,
        #[arg(long, default_value_t = 20)]
        trials: usize,
        /// 1 = factorization, 2 = weighted factorization, 3 = envelope domination
        #[arg(long, default_value_t = 1)]
        conjecture: u8,
        /// Comma-separated mixing weights
        #[arg(long, default_value = "0,0.25,0.5,0.75,1")]
        lambda_grid: String,
        /// Comma-separated weights alpha (paired with every lambda)
        #[arg(long, default_value = "1")]
        alpha_grid: String,
        #[arg(long, default_value_t = 1e-6)]
        tolerance: f64,
        #[arg(long, default_value_t = 3)]
        max_output: usize,
    },
}

/// Serializable header describing the run; embedded in every output.
#[derive(Clone, Serialize)]
struct RunConfig {
    subcommand: String,
    #[serde(skip_serializing_if = "Option::is_none")]
    builtin: Option<String>,
    #[serde(skip_serializing_if = "Option::is_none")]
    channel: Option<String>,
    #[serde(skip_serializing_if = "Option::is_none")]
    px: Option<Vec<f64>>,
    #[serde(skip_serializing_if = "Option::is_none")]
    alpha: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    lambda: Option<f64>,
    seed: u64,
    #[serde(skip_serializing_if = "Option::is_none")]
    restarts: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    grid: Option<usize>,
    out_format: String,
}

impl RunConfig {
    fn new(sub: &str, c: &CommonArgs, px: Option<&SimplexVector>) -> Self {
        RunConfig {
            subcommand: sub.to_string(),
            builtin: c.builtin.clone(),
            channel: c.channel.as_ref().map(|p| p.display().to_string()),
            px: px.map(|p| p.probs().to_vec()),
            alpha: c.alpha,
            lambda: c.lambda,
            seed: c.seed,
            restarts: c.restarts,
            grid: c.grid,
            out_format: c.format.clone(),
        }
    }
}

fn main() -> ExitCode {
    if let Ok(threads) = std::env::var("MARTONLAB_THREADS") {
        if let Ok(n) = threads.parse::<usize>() {
            let _ = rayon::ThreadPoolBuilder::new()
                .num_threads(n.max(1))
                .build_global();
        }
    }
    let cli = Cli::parse();
    match run(cli) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(2)
        }
    }
}

fn parse_px(text: &str) -> Result<SimplexVector, String> {
    let mut vals = Vec::new();
    for tok in text.split(',') {
        let tok = tok.trim();
        let v = if let Some((num, den)) = tok.split_once('/') {
            let n: f64 = num
                .trim()
                .parse()
                .map_err(|_| format!("bad fraction {tok}"))?;
            let d: f64 = den
                .trim()
                .parse()
                .map_err(|_| format!("bad fraction {tok}"))?;
            if d == 0.0 {
                return Err(format!("zero denominator in {tok}"));
            }
            n / d
        } else {
            tok.parse().map_err(|_| format!("bad probability {tok}"))?
        };
        vals.push(v);
    }
    let sum: f64 = vals.iter().sum();
    if !(0.99..=1.01).contains(&sum) {
        return Err(format!("--px mass {sum} too far from 1"));
    }
    vals.iter_mut().for_each(|v| *v /= sum);
    SimplexVector::new(vals).map_err(|e| e.to_string())
}

fn load_channel(
    builtin: &Option<String>,
    path: &Option<PathBuf>,
) -> Result<(BroadcastChannel, Option<SimplexVector>), String> {
    match (builtin, path) {
        (Some(name), None) => {
            let b = Builtin::from_str(name).map_err(|e| e.to_string())?;
            Ok(probcore::builtin_channel(b))
        }
        (None, Some(p)) => {
            let text = std::fs::read_to_string(p)
                .map_err(|e| format!("cannot read {}: {e}", p.display()))?;
            ChannelJson::parse(&text).map_err(|e| format!("{}: {e}", p.display()))
        }
        _ => Err("provide exactly one of --builtin or --channel".into()),
    }
}

fn resolve_input(c: &CommonArgs) -> Result<(BroadcastChannel, SimplexVector), String> {
    let (ch, default_px) = load_channel(&c.builtin, &c.channel)?;
    let px = match &c.px {
        Some(text) => {
            let p = parse_px(text)?;
            if p.dim() != ch.x_size() {
                return Err(format!(
                    "--px has {} entries but the channel input alphabet is {}",
                    p.dim(),
                    ch.x_size()
                ));
            }
            p
        }
        None => default_px.unwrap_or_else(|| SimplexVector::uniform(ch.x_size())),
    };
    Ok((ch, px))
}

fn write_out(out: &Option<PathBuf>, text: &str) -> Result<(), String> {
    match out {
        Some(path) => {
            std::fs::write(path, text).map_err(|e| format!("cannot write {}: {e}", path.display()))
        }
        None => {
            if text.ends_with('\n') {
                print!("{text}");
            } else {
                println!("{text}");
            }
            Ok(())
        }
    }
}

fn tmax_opts(c: &CommonArgs) -> TmaxOptions {
    TmaxOptions {
        restarts: c.restarts.unwrap_or(32),
        seed: c.seed,
        ..TmaxOptions::default()
    }
}

fn check_opts(c: &CommonArgs) -> CheckOptions {
    CheckOptions {
        seed: c.seed,
        restarts: c.restarts.unwrap_or(8),
        envelope_grid: c.grid.unwrap_or(2001),
        ..CheckOptions::default()
    }
}

fn run(cli: Cli) -> Result<ExitCode, String> {
    match cli.cmd {
        Cmd::Info(c) => cmd_info(c),
        Cmd::Tmax(c) => cmd_tmax(c),
        Cmd::Envelope(c) => cmd_envelope(c),
        Cmd::Sumrate(c) => cmd_rate(c, false),
        Cmd::WeightedRate(c) => cmd_rate(c, true),
        Cmd::CheckEq1(c) => cmd_check_eq1(c),
        Cmd::Conj1 {
            common,
            builtin2,
            channel2,
        } => cmd_conj12(common, builtin2, channel2, false),
        Cmd::Conj2 {
            common,
            builtin2,
            channel2,
        } => cmd_conj12(common, builtin2, channel2, true),
        Cmd::Conj3(c) => cmd_conj3(c),
        Cmd::Bssc {
            common,
            g_scan,
            and_scan,
            weighted_region,
            step,
        } => cmd_bssc(common, g_scan, and_scan, weighted_region, step),
        Cmd::Maxcorr { common, joint } => cmd_maxcorr(common, joint),
        Cmd::Counterexample(c) => cmd_counterexample(c),
        Cmd::Certify { common, coupling } => cmd_certify(common, coupling),
        Cmd::Search {
            common,
            trials,
            conjecture,
            lambda_grid,
            alpha_grid,
            tolerance,
            max_output,
        } => cmd_search(
            common,
            trials,
            conjecture,
            lambda_grid,
            alpha_grid,
            tolerance,
            max_output,
        ),
    }
}

fn cmd_info(c: CommonArgs) -> Result<ExitCode, String> {
    let (ch, px) = resolve_input(&c)?;
    let config = RunConfig::new("info", &c, Some(&px));
    #[derive(Serialize)]
    struct Info {
        x_size: usize,
        y_size: usize,
        z_size: usize,
        i_xy: f64,
        i_xz: f64,
        y_more_capable: Option<bool>,
        z_more_capable: Option<bool>,
    }
    let (ym, zm) = if ch.x_size() <= 3 {
        (
            Some(factorize::more_capable_test(&ch, 0.01).map_err(|e| e.to_string())?),
            Some(factorize::more_capable_test(&ch.swapped(), 0.01).map_err(|e| e.to_string())?),
        )
    } else {
        (None, None)
    };
    let info = Info {
        x_size: ch.x_size(),
        y_size: ch.y_chan().cols(),
        z_size: ch.z_chan().cols(),
        i_xy: ch.mi_y(&px).map_err(|e| e.to_string())?,
        i_xz: ch.mi_z(&px).map_err(|e| e.to_string())?,
        y_more_capable: ym,
        z_more_capable: zm,
    };
    write_out(&c.out, &emit::json_with_config(&config, &info))?;
    Ok(ExitCode::SUCCESS)
}

fn cmd_tmax(c: CommonArgs) -> Result<ExitCode, String> {
    let (ch, px) = resolve_input(&c)?;
    let alpha = c.alpha.unwrap_or(1.0);
    let config = RunConfig::new("tmax", &c, Some(&px));
    let res = tmax::tmax_eval(&ch, &px, alpha, &tmax_opts(&c)).map_err(|e| e.to_string())?;
    let text = match c.format.as_str() {
        "csv" => {
            let mut rows: Vec<Vec<String>> = vec![vec![
                "value".into(),
                emit::fmt9(res.value),
                format!("{}", res.is_lower_bound),
            ]];
            for (id, v) in &res.per_map_values {
                rows.push(vec![id.clone(), emit::fmt9(*v), String::new()]);
            }
            emit::csv_with_config(&config, "map_id,value,is_lower_bound", &rows)
        }
        _ => emit::json_with_config(&config, &res),
    };
    write_out(&c.out, &text)?;
    Ok(ExitCode::SUCCESS)
}

fn cmd_envelope(c: CommonArgs) -> Result<ExitCode, String> {
    let (ch, px) = resolve_input(&c)?;
    if ch.x_size() != 2 {
        return Err("envelope traces cover binary input channels".into());
    }
    let alpha = c.alpha.unwrap_or(1.0);
    let lambda = c.lambda.unwrap_or(0.0);
    if alpha < 1.0 || !(0.0..=1.0).contains(&lambda) {
        return Err("need alpha >= 1 and lambda in [0,1]".into());
    }
    let lb = 1.0 - lambda;
    let grid = c.grid.unwrap_or(2001);
    let config = RunConfig::new("envelope", &c, Some(&px));
    let g = |q: &SimplexVector| -> f64 {
        let hy = probcore::entropy(&probcore::push_forward(q, ch.y_chan()).unwrap());
        let hz = probcore::entropy(&probcore::push_forward(q, ch.z_chan()).unwrap());
        let t = (alpha * ch.mi_y(q).unwrap()).max(ch.mi_z(q).unwrap());
        -(alpha - lb) * hy - lb * hz + t
    };
    let env = envelope::concave_envelope_eval(
        &g,
        &px,
        &EnvelopeOpts {
            grid_points: grid,
            ..EnvelopeOpts::default()
        },
    )
    .map_err(|e| e.to_string())?;
    let text = match c.format.as_str() {
        "csv" => {
            let trace = envelope::binary_grid_trace(&g, grid);
            let mut rows: Vec<Vec<String>> = trace
                .iter()
                .map(|(p, gv, ev)| vec![emit::fmt9(*p), emit::fmt9(*gv), emit::fmt9(*ev)])
                .collect();
            for (w, atom) in &env.atoms {
                rows.push(vec![
                    format!("# atom p0={}", emit::fmt9(atom.probs()[0])),
                    format!("weight={}", emit::fmt9(*w)),
                    String::new(),
                ]);
            }
            emit::csv_with_config(&config, "p,g,envelope", &rows)
        }
        _ => emit::json_with_config(&config, &env),
    };
    write_out(&c.out, &text)?;
    Ok(ExitCode::SUCCESS)
}

fn cmd_rate(c: CommonArgs, weighted: bool) -> Result<ExitCode, String> {
    let (ch, _) = resolve_input(&c)?;
    let alpha = if weighted {
        c.alpha.unwrap_or(1.0)
    } else {
        1.0
    };
    let grid = c.grid.unwrap_or(100);
    let name = if weighted { "weighted-rate" } else { "sumrate" };
    let config = RunConfig::new(name, &c, None);
    let res = envelope::weighted_rate_support_grid(&ch, alpha, grid).map_err(|e| e.to_string())?;
    let text = match c.format.as_str() {
        "csv" => emit::csv_with_config(
            &config,
            "alpha,value,swapped_value",
            &[vec![
                emit::fmt9(alpha),
                emit::fmt9(res.value),
                emit::fmt9(res.swapped_value),
            ]],
        ),
        _ => emit::json_with_config(&config, &res),
    };
    write_out(&c.out, &text)?;
    Ok(ExitCode::SUCCESS)
}

fn cmd_check_eq1(c: CommonArgs) -> Result<ExitCode, String> {
    let (ch, px) = resolve_input(&c)?;
    let alpha = c.alpha.unwrap_or(1.0);
    let config = RunConfig::new("check-eq1", &c, Some(&px));
    let res = tmax::tmax_eval(&ch, &px, alpha, &tmax_opts(&c)).map_err(|e| e.to_string())?;
    let rhs = (alpha * ch.mi_y(&px).map_err(|e| e.to_string())?)
        .max(ch.mi_z(&px).map_err(|e| e.to_string())?);
    #[derive(Serialize)]
    struct Eq1 {
        lhs: f64,
        rhs: f64,
        margin: f64,
        lhs_is_lower_bound: bool,
        violated: bool,
        tolerance: f64,
    }
    let violated = res.value > rhs + 1e-6;
    let report = Eq1 {
        lhs: res.value,
        rhs,
        margin: rhs - res.value,
        lhs_is_lower_bound: res.is_lower_bound,
        violated,
        tolerance: 1e-6,
    };
    write_out(&c.out, &emit::json_with_config(&config, &report))?;
    Ok(if violated {
        ExitCode::from(1)
    } else {
        ExitCode::SUCCESS
    })
}

fn cmd_conj12(
    c: CommonArgs,
    builtin2: Option<String>,
    channel2: Option<PathBuf>,
    weighted: bool,
) -> Result<ExitCode, String> {
    let (ch1, _) = load_channel(&c.builtin, &c.channel)?;
    let (ch2, _) = if builtin2.is_some() || channel2.is_some() {
        load_channel(&builtin2, &channel2)?
    } else {
        (ch1.clone(), None)
    };
    let alpha = if weighted {
        c.alpha.unwrap_or(1.0)
    } else {
        1.0
    };
    let lambda = c.lambda.unwrap_or(0.5);
    let p = match &c.px {
        Some(text) => {
            let v = parse_px(text)?;
            if v.dim() != 4 {
                return Err("--px for two-letter checks needs 4 entries (row-major x1,x2)".into());
            }
            JointTable::new(vec![2, 2], v.probs().to_vec()).map_err(|e| e.to_string())?
        }
        None => JointTable::new(vec![2, 2], vec![0.25; 4]).unwrap(),
    };
    let name = if weighted { "conj2" } else { "conj1" };
    let config = RunConfig::new(name, &c, None);
    let opts = check_opts(&c);
    let w = WeightedObjective::new(alpha, lambda).map_err(|e| e.to_string())?;
    let verdict = factorize::conj2_check(&ch1, &ch2, &p, w, &opts).map_err(|e| e.to_string())?;
    write_out(&c.out, &emit::json_with_config(&config, &verdict))?;
    Ok(match verdict.verdict {
        VerdictKind::ViolationCandidate => ExitCode::from(1),
        _ => ExitCode::SUCCESS,
    })
}

fn cmd_conj3(c: CommonArgs) -> Result<ExitCode, String> {
    let (ch, _) = load_channel(&c.builtin, &c.channel)?;
    let alpha = c.alpha.unwrap_or(1.0);
    let lambda = c.lambda.unwrap_or(0.5);
    let config = RunConfig::new("conj3", &c, None);
    let mut opts = check_opts(&c);
    if let Some(g) = c.grid {
        opts.conj3_grid = g;
    }
    let report = factorize::conj3_check(&ch, lambda, alpha, &opts).map_err(|e| e.to_string())?;
    let text = match c.format.as_str() {
        "csv" => {
            let rows: Vec<Vec<String>> = report
                .rows
                .iter()
                .map(|r| {
                    vec![
                        emit::fmt9(r.p0),
                        emit::fmt9(r.lhs),
                        emit::fmt9(r.rhs),
                        emit::fmt9(r.slack),
                    ]
                })
                .collect();
            emit::csv_with_config(&config, "p0,lhs,rhs,slack", &rows)
        }
        _ => emit::json_with_config(&config, &report),
    };
    write_out(&c.out, &text)?;
    Ok(match report.verdict.verdict {
        VerdictKind::ViolationCandidate => ExitCode::from(1),
        _ => ExitCode::SUCCESS,
    })
}

fn cmd_bssc(
    c: CommonArgs,
    g_scan: bool,
    and_scan: bool,
    weighted_region: bool,
    step: f64,
) -> Result<ExitCode, String> {
    let config = RunConfig::new("bssc", &c, None);
    let modes = [g_scan, and_scan, weighted_region]
        .iter()
        .filter(|&&b| b)
        .count();
    if modes != 1 {
        return Err("choose exactly one of --g-scan, --and-scan, --weighted-region".into());
    }
    if g_scan {
        if !(step > 0.0 && step <= 0.5) {
            return Err(format!("--step {step} out of range"));
        }
        let mut rows = Vec::new();
        let mut x = 0.0;
        while x <= 0.5 + 1e-12 {
            let gx = bssc::g(x).map_err(|e| e.to_string())?;
            rows.push(vec![emit::fmt9(x), emit::fmt9(gx)]);
            x += step;
        }
        let text = emit::csv_with_config(&config, "x,g", &rows);
        write_out(&c.out, &text)?;
        return Ok(ExitCode::SUCCESS);
    }
    if and_scan {
        let n = c.grid.unwrap_or(50);
        let alphas: Vec<f64> = (1..=n).map(|k| 1.0 + 7.0 * k as f64 / n as f64).collect();
        let xs: Vec<f64> = (1..500).map(|k| k as f64 * 0.001).collect();
        let report = bssc::and_case_scan(&alphas, &xs);
        let text = match c.format.as_str() {
            "csv" => {
                let rows: Vec<Vec<String>> = report
                    .rows
                    .iter()
                    .map(|r| {
                        vec![
                            emit::fmt9(r.alpha),
                            emit::fmt9(r.x_root),
                            emit::fmt9(r.bound),
                            format!("{}", r.admissible),
                        ]
                    })
                    .collect();
                emit::csv_with_config(&config, "alpha,x_root,bound,admissible", &rows)
            }
            _ => emit::json_with_config(&config, &report),
        };
        write_out(&c.out, &text)?;
        return Ok(ExitCode::SUCCESS);
    }
    // weighted region over a weight grid up to --alpha
    let alpha_max = c.alpha.unwrap_or(4.0);
    if alpha_max < 1.0 {
        return Err("--alpha must be >= 1".into());
    }
    let steps = c.grid.unwrap_or(8);
    let mut rows = Vec::new();
    for k in 0..=steps {
        let alpha = 1.0 + (alpha_max - 1.0) * k as f64 / steps.max(1) as f64;
        let res = bssc::bssc_weighted_region(alpha).map_err(|e| e.to_string())?;
        rows.push(vec![
            emit::fmt9(alpha),
            emit::fmt9(res.value),
            emit::fmt9(res.swapped_value),
        ]);
    }
    let text = emit::csv_with_config(&config, "alpha,value,swapped_value", &rows);
    write_out(&c.out, &text)?;
    Ok(ExitCode::SUCCESS)
}

#[derive(serde::Deserialize)]
struct JointFile {
    entries: Vec<Vec<f64>>,
}

fn cmd_maxcorr(c: CommonArgs, joint: PathBuf) -> Result<ExitCode, String> {
    let text = std::fs::read_to_string(&joint)
        .map_err(|e| format!("cannot read {}: {e}", joint.display()))?;
    let parsed: JointFile =
        serde_json::from_str(&text).map_err(|e| format!("{}: {e}", joint.display()))?;
    let table = JointTable::from_matrix(&parsed.entries).map_err(|e| e.to_string())?;
    let config = RunConfig::new("maxcorr", &c, None);
    let res = maxcorr::maximal_correlation_sq(&table).map_err(|e| e.to_string())?;
    write_out(&c.out, &emit::json_with_config(&config, &res))?;
    Ok(ExitCode::SUCCESS)
}

fn cmd_counterexample(c: CommonArgs) -> Result<ExitCode, String> {
    let (ch, px) = probcore::builtin_channel(Builtin::AppendixB);
    let px = px.expect("builtin carries a default input law");
    let alpha = 3.429517;
    let p_uv = JointTable::from_matrix(&[vec![0.05930, 0.00005], vec![0.14065, 0.80000]]).unwrap();
    let f = MapF::from_rows(&[vec![1, 1], vec![1, 0]], 2).unwrap();
    let coupling = CouplingWithMap::new(p_uv, f).unwrap();
    let lhs = tmax::objective_j(&coupling, &ch, &px, alpha).map_err(|e| e.to_string())?;
    let rhs = (alpha * ch.mi_y(&px).map_err(|e| e.to_string())?)
        .max(ch.mi_z(&px).map_err(|e| e.to_string())?);
    let violated = lhs > rhs + 1e-6;
    #[derive(Serialize)]
    struct Counterexample {
        alpha: f64,
        lhs: f64,
        rhs: f64,
        violated: bool,
    }
    let report = Counterexample {
        alpha,
        lhs,
        rhs,
        violated,
    };
    if c.format == "json" && c.out.is_some() {
        let config = RunConfig::new("counterexample", &c, Some(&px));
        write_out(&c.out, &emit::json_with_config(&config, &report))?;
    } else {
        let verdict = if violated {
            "weighted one-letter inequality violated: \
             alpha*I(U;Y) + I(V;Z) - I(U;V) > max{alpha*I(X;Y), I(X;Z)}"
        } else {
            "violation not reproduced"
        };
        let text = format!(
            "alpha = {}\nlhs = {}\nrhs = {}\nverdict: {}",
            emit::fmt9(alpha),
            emit::fmt9(lhs),
            emit::fmt9(rhs),
            verdict
        );
        write_out(&c.out, &text)?;
    }
    // exit 0 when the expected violation is reproduced
    Ok(if violated {
        ExitCode::SUCCESS
    } else {
        ExitCode::from(1)
    })
}

#[derive(serde::Deserialize)]
struct CouplingFile {
    p_uv: Vec<Vec<f64>>,
    f: Vec<Vec<usize>>,
}

fn cmd_certify(c: CommonArgs, coupling: PathBuf) -> Result<ExitCode, String> {
    let (ch, _) = load_channel(&c.builtin, &c.channel)?;
    let text = std::fs::read_to_string(&coupling)
        .map_err(|e| format!("cannot read {}: {e}", coupling.display()))?;
    let parsed: CouplingFile =
        serde_json::from_str(&text).map_err(|e| format!("{}: {e}", coupling.display()))?;
    let p_uv = JointTable::from_matrix(&parsed.p_uv).map_err(|e| e.to_string())?;
    let map = MapF::from_rows(&parsed.f, ch.x_size()).map_err(|e| e.to_string())?;
    let cw = CouplingWithMap::new(p_uv, map).map_err(|e| e.to_string())?;
    let px = match &c.px {
        Some(text) => parse_px(text)?,
        None => SimplexVector::new(cw.induced_x()).map_err(|e| e.to_string())?,
    };
    let config = RunConfig::new("certify", &c, Some(&px));
    let report = extremal::certify_local_max(&cw, &ch, &px).map_err(|e| e.to_string())?;
    let refuted = report.verdict == Verdict::Refuted;
    write_out(&c.out, &emit::json_with_config(&config, &report))?;
    Ok(if refuted {
        ExitCode::from(1)
    } else {
        ExitCode::SUCCESS
    })
}

fn parse_grid(text: &str, what: &str) -> Result<Vec<f64>, String> {
    text.split(',')
        .map(|t| {
            t.trim()
                .parse::<f64>()
                .map_err(|_| format!("bad {what} entry {t}"))
        })
        .collect()
}

#[allow(clippy::too_many_arguments)]
fn cmd_search(
    c: CommonArgs,
    trials: usize,
    conjecture: u8,
    lambda_grid: String,
    alpha_grid: String,
    tolerance: f64,
    max_output: usize,
) -> Result<ExitCode, String> {
    let lambdas = parse_grid(&lambda_grid, "lambda")?;
    let alphas = parse_grid(&alpha_grid, "alpha")?;
    let mut weight_grid = Vec::new();
    for &a in &alphas {
        for &l in &lambdas {
            weight_grid.push(WeightedObjective::new(a, l).map_err(|e| e.to_string())?);
        }
    }
    let kind = match conjecture {
        1 => ConjectureKind::Factorization,
        2 => ConjectureKind::WeightedFactorization,
        3 => ConjectureKind::EnvelopeDomination,
        other => return Err(format!("unknown conjecture {other}; use 1, 2 or 3")),
    };
    let config = SearchConfig {
        seed: c.seed,
        trials,
        conjecture: kind,
        weight_grid,
        tolerance,
        max_output,
    };
    let report = factorize::random_search(&config).map_err(|e| e.to_string())?;
    let text = match c.format.as_str() {
        "csv" => {
            let rows: Vec<Vec<String>> = report
                .verdicts
                .iter()
                .map(|v| {
                    vec![
                        v.instance.seed.to_string(),
                        emit::fmt9(v.instance.alpha),
                        emit::fmt9(v.instance.lambda),
                        emit::fmt9(v.lhs),
                        emit::fmt9(v.rhs),
                        emit::fmt9(v.slack),
                        format!("{:?}", v.verdict),
                    ]
                })
                .collect();
            emit::csv_with_config(
                &config,
                "trial_seed,alpha,lambda,lhs,rhs,slack,verdict",
                &rows,
            )
        }
        _ => {
            // JSON lines: the config, one verdict per line, then a summary
            #[derive(Serialize)]
            struct Summary<'a> {
                min_slack: f64,
                confirmed_violations: usize,
                verdicts: usize,
                config: &'a SearchConfig,
            }
            let mut lines = vec![emit::json_line(&serde_json::json!({ "config": &config }))];
            for v in &report.verdicts {
                lines.push(emit::json_line(v));
            }
            lines.push(emit::json_line(&Summary {
                min_slack: report.min_slack,
                confirmed_violations: report.confirmed_violations,
                verdicts: report.verdicts.len(),
                config: &config,
            }));
            lines.join("\n")
        }
    };
    write_out(&c.out, &text)?;
    Ok(if report.confirmed_violations > 0 {
        ExitCode::from(1)
    } else {
        ExitCode::SUCCESS
    })
}

use clap::{Args, Subcommand, ValueEnum};
use cqdual::codes::{
    self, channel_from_source, channel_error, cover_type_class, covered_sequences, default_decoder, duality_inequality_experiment,
    one_shot_experiment, operator_inequality_checks, random_constant_composition_code, random_source_code,
    random_type_class_subset, round_trip, source_from_channel, type_decomposition_check, ChannelCode, InequalityRecord,
    SourceModel,
};
use cqdual::cqtypes::{enumerate_sequences, enumerate_type_class, Alphabet, TypeDistribution};
use cqdual::divergence::{CqEnsemble, Variant};
use cqdual::duality::{
    aux_duality_check, classical_variational_check, exponent_duality_check, ky_fan_check, mirror_symmetry_check,
    r_duality_probe, DualKind, DualityConfig, DualityReport, MirrorKind,
};
use cqdual::exponents::{channel_quantities, exponent_curve, ExponentConfig, ExponentKind};
use serde::Serialize;
use serde_json::json;

use crate::input::{parse_distribution, parse_floats, parse_range, parse_sequences, parse_type};
use crate::output::{to_value, Cell, Output, Table};
use crate::{CliError, Global};

#[derive(Debug, Args, Serialize)]
pub struct ExponentArgs {
    /// r_source, r_channel, sp_source, sp_channel, sc_source, sc_channel,
    /// r_source_iid, sp_source_iid or sc_source_iid.
    #[arg(long)]
    pub kind: String,
    /// Type `Q` (source kinds), composition `P` (channel kinds) or prior
    /// (i.i.d. kinds); defaults to the ensemble prior.
    #[arg(long)]
    pub dist: Option<String>,
    /// Comma-separated rates.
    #[arg(long, conflicts_with = "rate_range")]
    pub rates: Option<String>,
    /// `start:stop:count`.
    #[arg(long)]
    pub rate_range: Option<String>,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum DualityCheck {
    /// `E₀(s) = min_Q {D(Q‖P) + E₀(s,Q)}`.
    Aux,
    /// `min_R D(R‖P) + s D(R‖Q) = s D_{1/(1+s)}(P‖Q)`.
    Classical,
    /// Source exponent at `R` against channel exponent at `H(Q) − R`.
    Mirror,
    /// `E(R) = min_Q {D(Q‖P) + E(R,Q)}`.
    Exponent,
    /// Minimax interchange of the sandwiched G-function.
    KyFan,
    /// Random-coding gap measurement, no pass/fail.
    RProbe,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum VariantArg {
    Petz,
    Sandwiched,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum ExponentFamily {
    Sp,
    Sc,
    RDown,
}

#[derive(Debug, Args, Serialize)]
pub struct DualityArgs {
    #[arg(long, value_enum)]
    pub check: DualityCheck,
    #[arg(long, value_enum)]
    pub variant: Option<VariantArg>,
    /// Comma-separated `s` values.
    #[arg(long, allow_hyphen_values = true)]
    pub s: Option<String>,
    /// Comma-separated rates.
    #[arg(long)]
    pub rates: Option<String>,
    #[arg(long, value_enum)]
    pub family: Option<ExponentFamily>,
    /// Second distribution (classical check) or type (mirror check).
    #[arg(long)]
    pub q: Option<String>,
}

#[derive(Debug, Args, Serialize)]
pub struct QuantitiesArgs {
    /// Input distribution; defaults to the prior.
    #[arg(long)]
    pub dist: Option<String>,
}

#[derive(Debug, Subcommand, Serialize)]
#[serde(rename_all = "kebab-case", tag = "sub")]
pub enum CodesCommand {
    /// Cover `T_Q^n` by permutations of a subset.
    Cover(CoverArgs),
    /// Source code from a constant-composition channel code.
    BuildSource(BuildSourceArgs),
    /// Channel code from a source code by the pigeonhole selection.
    BuildChannel(BuildChannelArgs),
    /// Random codes with the threshold square-root decoder.
    RandomCode(RandomCodeArgs),
    /// Channel code, to source code, back to channel code.
    RoundTrip(BuildSourceArgs),
    /// Inequality experiments.
    Inequalities(InequalitiesArgs),
}

impl CodesCommand {
    pub fn name(&self) -> &'static str {
        match self {
            CodesCommand::Cover(_) => "codes cover",
            CodesCommand::BuildSource(_) => "codes build-source",
            CodesCommand::BuildChannel(_) => "codes build-channel",
            CodesCommand::RandomCode(_) => "codes random-code",
            CodesCommand::RoundTrip(_) => "codes round-trip",
            CodesCommand::Inequalities(_) => "codes inequalities",
        }
    }
}

#[derive(Debug, Args, Serialize)]
pub struct CoverArgs {
    /// Type counts, e.g. `2,2`.
    #[arg(long)]
    pub q: String,
    /// Size of a random subset of `T_Q^n`.
    #[arg(long, conflicts_with = "u")]
    pub u_size: Option<usize>,
    /// Explicit subset, e.g. `0011,0101`.
    #[arg(long)]
    pub u: Option<String>,
}

#[derive(Debug, Args, Serialize)]
pub struct BuildSourceArgs {
    #[arg(long)]
    pub q: String,
    /// Number of distinct random codewords from `T_Q^n`.
    #[arg(long, conflicts_with = "codebook")]
    pub messages: Option<usize>,
    /// Explicit codebook, decoded with the threshold square-root decoder.
    #[arg(long)]
    pub codebook: Option<String>,
}

#[derive(Debug, Args, Serialize)]
pub struct BuildChannelArgs {
    #[arg(long)]
    pub q: String,
    /// Number of blocks of the random source encoder.
    #[arg(long)]
    pub blocks: usize,
    /// Pigeonhole parameter; defaults to `n + 1`.
    #[arg(long)]
    pub m: Option<usize>,
}

#[derive(Debug, Args, Serialize)]
pub struct RandomCodeArgs {
    #[arg(long)]
    pub n: usize,
    #[arg(long)]
    pub messages: usize,
    #[arg(long, default_value_t = 1)]
    pub trials: usize,
    /// Restrict codewords to the type class `T_Q^n`; all of `X^n` otherwise.
    #[arg(long)]
    pub q: Option<String>,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum InequalityFamily {
    /// Building blocks of the operational duality on constructed codes.
    Duality,
    /// Hayashi–Nagaoka and Audenaert on random operators.
    Operator,
    /// Type decomposition of `ρ_XB^{⊗n}` as explicit matrices.
    TypeDecomposition,
}

#[derive(Debug, Args, Serialize)]
pub struct InequalitiesArgs {
    #[arg(long, value_enum, default_value_t = InequalityFamily::Duality)]
    pub which: InequalityFamily,
    #[arg(long)]
    pub q: Option<String>,
    #[arg(long)]
    pub rate: Option<f64>,
    #[arg(long, default_value_t = 1)]
    pub trials: usize,
    #[arg(long)]
    pub n: Option<usize>,
}

fn need(ens: Option<&CqEnsemble>) -> Result<&CqEnsemble, CliError> {
    ens.ok_or_else(|| CliError::Input("this command needs --spec".into()))
}

fn need_arg<'a, T>(v: &'a Option<T>, flag: &str) -> Result<&'a T, CliError> {
    v.as_ref().ok_or_else(|| CliError::Input(format!("missing --{flag}")))
}

pub fn dispatch(cmd: &crate::Command, g: &Global, ens: Option<&CqEnsemble>) -> Result<Output, CliError> {
    match cmd {
        crate::Command::Exponent(a) => cmd_exponent(a, g, need(ens)?),
        crate::Command::Duality(a) => cmd_duality(a, g, need(ens)?),
        crate::Command::Quantities(a) => cmd_quantities(a, g, need(ens)?),
        crate::Command::Codes { sub } => match sub {
            CodesCommand::Cover(a) => cmd_cover(a, g),
            CodesCommand::BuildSource(a) => cmd_build_source(a, g, need(ens)?),
            CodesCommand::BuildChannel(a) => cmd_build_channel(a, g, need(ens)?),
            CodesCommand::RandomCode(a) => cmd_random_code(a, g, need(ens)?),
            CodesCommand::RoundTrip(a) => cmd_round_trip(a, g, need(ens)?),
            CodesCommand::Inequalities(a) => cmd_inequalities(a, g, need(ens)?),
        },
    }
}

fn cmd_exponent(a: &ExponentArgs, g: &Global, ens: &CqEnsemble) -> Result<Output, CliError> {
    let kind: ExponentKind = a.kind.parse().map_err(CliError::Input)?;
    let dist = match &a.dist {
        Some(s) => parse_distribution(s, ens.alphabet_size())?,
        None => ens.prior().to_vec(),
    };
    let rates = match (&a.rates, &a.rate_range) {
        (Some(r), _) => parse_floats(r)?,
        (None, Some(r)) => parse_range(r)?,
        (None, None) => return Err(CliError::Input("give --rates or --rate-range".into())),
    };
    let cfg = ExponentConfig { tau_tol: g.tol.unwrap_or(ExponentConfig::default().tau_tol), ..ExponentConfig::default() };
    let curve = exponent_curve(kind, &rates, &dist, ens, &cfg);
    let mut t = Table::new(&["kind", "rate", "value", "optimizer_s", "inf_flag", "converged", "tolerance"]);
    for i in 0..rates.len() {
        t.push(vec![
            Cell::S(kind.name().into()),
            Cell::F(curve.rate_grid[i]),
            Cell::F(curve.values[i]),
            Cell::F(curve.optimizer_s[i]),
            Cell::B(curve.infinite[i]),
            Cell::B(curve.converged[i]),
            Cell::F(cfg.tau_tol),
        ]);
    }
    Ok(Output { table: t, report: Some(json!({ "distribution": dist, "curve": to_value(&curve) })), pass: true })
}

#[derive(Serialize)]
struct DualityRecord {
    check: &'static str,
    parameter_name: &'static str,
    parameter: f64,
    variant: Option<VariantArg>,
    family: Option<ExponentFamily>,
    report: DualityReport,
}

fn cmd_duality(a: &DualityArgs, g: &Global, ens: &CqEnsemble) -> Result<Output, CliError> {
    let cfg = DualityConfig { max_depth: g.grid_depth, tolerance: g.tol.unwrap_or(DualityConfig::default().tolerance), ..Default::default() };
    let s_list = || a.s.as_deref().map(parse_floats).transpose()?.ok_or_else(|| CliError::Input("missing --s".into()));
    let rate_list = || a.rates.as_deref().map(parse_floats).transpose()?.ok_or_else(|| CliError::Input("missing --rates".into()));
    let domain = |e: cqdual::duality::DualityError| CliError::Input(e.to_string());
    let k = ens.alphabet_size();
    let mut records = Vec::new();
    let mut push = |check, parameter_name, parameter, variant, family, report| {
        records.push(DualityRecord { check, parameter_name, parameter, variant, family, report })
    };
    match a.check {
        DualityCheck::Aux => {
            let v = *need_arg(&a.variant, "variant")?;
            let variant = match v {
                VariantArg::Petz => Variant::Petz,
                VariantArg::Sandwiched => Variant::Sandwiched,
            };
            for s in s_list()? {
                push("aux", "s", s, Some(v), None, aux_duality_check(variant, s, ens, &cfg).map_err(domain)?);
            }
        }
        DualityCheck::Classical => {
            let q = match &a.q {
                Some(q) => parse_distribution(q, k)?,
                None => vec![1.0 / k as f64; k],
            };
            for s in s_list()? {
                let r = classical_variational_check(ens.prior(), &q, s, &cfg);
                let mut rep = r.report;
                rep.pass = rep.pass.map(|p| p && r.closed_form_pass);
                push("classical", "s", s, None, None, rep);
            }
        }
        DualityCheck::Mirror => {
            let fam = *need_arg(&a.family, "family")?;
            let kind = match fam {
                ExponentFamily::Sp => MirrorKind::Sp,
                ExponentFamily::Sc => MirrorKind::Sc,
                ExponentFamily::RDown => MirrorKind::RDown,
            };
            let q = match &a.q {
                Some(q) => parse_distribution(q, k)?,
                None => ens.prior().to_vec(),
            };
            let ecfg = ExponentConfig::default();
            for r in rate_list()? {
                push("mirror", "rate", r, None, Some(fam), mirror_symmetry_check(kind, r, &q, ens, &ecfg));
            }
        }
        DualityCheck::Exponent => {
            let fam = *need_arg(&a.family, "family")?;
            let kind = match fam {
                ExponentFamily::Sp => DualKind::Sp,
                ExponentFamily::Sc => DualKind::Sc,
                ExponentFamily::RDown => return Err(CliError::Input("use --check r-probe for the random-coding exponent".into())),
            };
            for r in rate_list()? {
                push("exponent", "rate", r, None, Some(fam), exponent_duality_check(kind, r, ens, &cfg));
            }
        }
        DualityCheck::KyFan => {
            for s in s_list()? {
                push("ky-fan", "s", s, None, None, ky_fan_check(s, ens, &cfg).map_err(domain)?);
            }
        }
        DualityCheck::RProbe => {
            for r in rate_list()? {
                push("r-probe", "rate", r, None, None, r_duality_probe(r, ens, &cfg));
            }
        }
    }
    let mut t = Table::new(&[
        "check", "parameter_name", "parameter", "lhs", "rhs", "grid_gap_bound", "tolerance", "depth", "pass", "one_sided", "converged",
    ]);
    for r in &records {
        t.push(vec![
            Cell::S(r.check.into()),
            Cell::S(r.parameter_name.into()),
            Cell::F(r.parameter),
            Cell::F(r.report.lhs),
            Cell::F(r.report.rhs),
            Cell::F(r.report.grid_gap_bound),
            Cell::F(r.report.tolerance),
            Cell::I(r.report.depth as u64),
            Cell::S(r.report.pass.map_or("probe".into(), |p| p.to_string())),
            Cell::B(r.report.one_sided),
            Cell::B(r.report.converged),
        ]);
    }
    let pass = records.iter().all(|r| r.report.pass != Some(false));
    Ok(Output { table: t, report: Some(to_value(&records)), pass })
}

fn cmd_quantities(a: &QuantitiesArgs, g: &Global, ens: &CqEnsemble) -> Result<Output, CliError> {
    let q = match &a.dist {
        Some(s) => parse_distribution(s, ens.alphabet_size())?,
        None => ens.prior().to_vec(),
    };
    let tol = g.tol.unwrap_or(1e-10);
    let c = channel_quantities(&q, ens, tol);
    let h = cqdual::cqtypes::shannon_entropy(&q);
    let mut t = Table::new(&["quantity", "value", "tolerance", "converged"]);
    for (name, v) in [
        ("entropy", h),
        ("mutual_information", c.mutual_information),
        ("i0", c.i0),
        ("conditional_entropy", c.conditional_entropy),
        ("h0_hat", c.h0_hat),
        ("h0_up", c.h0_up),
    ] {
        t.push(vec![Cell::S(name.into()), Cell::F(v), Cell::F(tol), Cell::B(c.converged)]);
    }
    Ok(Output { table: t, report: Some(json!({ "distribution": q, "quantities": to_value(&c) })), pass: true })
}

fn inequality_table(rows: &[(u64, &InequalityRecord)]) -> (Table, bool) {
    let mut t = Table::new(&["trial", "name", "lhs", "rhs", "tolerance", "pass"]);
    for (trial, r) in rows {
        t.push(vec![Cell::I(*trial), Cell::S(r.name.clone()), Cell::F(r.lhs), Cell::F(r.rhs), Cell::F(r.tolerance), Cell::B(r.pass)]);
    }
    (t, rows.iter().all(|(_, r)| r.pass))
}

fn cmd_cover(a: &CoverArgs, g: &Global) -> Result<Output, CliError> {
    let counts = crate::input::parse_counts(&a.q)?;
    let q = parse_type(&a.q, counts.len())?;
    let u = match (&a.u, a.u_size) {
        (Some(s), _) => parse_sequences(s, counts.len())?,
        (None, Some(k)) => random_type_class_subset(&q, k, codes::trial_seed(g.seed, u64::MAX))?,
        (None, None) => return Err(CliError::Input("give --u or --u-size".into())),
    };
    let cover = cover_type_class(&u, g.seed)?;
    let t_size = enumerate_type_class(&q)?.len();
    let covered = covered_sequences(&cover.perms(), &u).len();
    let mut ineq = vec![InequalityRecord::le("uncovered sequences", (t_size - covered) as f64, 0.0, 0.0)];
    if !cover.fallback {
        ineq.push(InequalityRecord::le("permutations <= 2 L_Q", cover.permutations.len() as f64, 2.0 * cover.l_q as f64, 0.0));
    }
    let rows: Vec<(u64, &InequalityRecord)> = ineq.iter().map(|r| (0, r)).collect();
    let (t, pass) = inequality_table(&rows);
    let u_str: Vec<String> = u.iter().map(seq_string).collect();
    Ok(Output { table: t, report: Some(json!({ "subset": u_str, "type_class_size": t_size, "cover": to_value(&cover) })), pass })
}

fn seq_string(x: &cqdual::cqtypes::Sequence) -> String {
    x.letters().map(|l| char::from_digit(l as u32, 36).unwrap_or('?')).collect()
}

fn channel_code_from_args(a: &BuildSourceArgs, g: &Global, ens: &CqEnsemble) -> Result<ChannelCode, CliError> {
    let q: TypeDistribution = parse_type(&a.q, ens.alphabet_size())?;
    match (&a.codebook, a.messages) {
        (Some(s), _) => {
            let book = parse_sequences(s, ens.alphabet_size())?;
            let dec = default_decoder(&book, ens)?;
            Ok(ChannelCode::new(book, dec, Some(q))?)
        }
        (None, Some(m)) => Ok(random_constant_composition_code(&q, m, ens, codes::trial_seed(g.seed, 0))?),
        (None, None) => Err(CliError::Input("give --messages or --codebook".into())),
    }
}

fn cmd_build_source(a: &BuildSourceArgs, g: &Global, ens: &CqEnsemble) -> Result<Output, CliError> {
    let code = channel_code_from_args(a, g, ens)?;
    let (_, rep) = source_from_channel(&code, ens, g.seed)?;
    let rows: Vec<(u64, &InequalityRecord)> = rep.inequalities.iter().map(|r| (0, r)).collect();
    let (t, pass) = inequality_table(&rows);
    let book: Vec<String> = code.codebook().iter().map(seq_string).collect();
    Ok(Output { table: t, report: Some(json!({ "codebook": book, "source_from_channel": to_value(&rep) })), pass })
}

fn cmd_build_channel(a: &BuildChannelArgs, g: &Global, ens: &CqEnsemble) -> Result<Output, CliError> {
    let q = parse_type(&a.q, ens.alphabet_size())?;
    let model = SourceModel::ConstantType(q.clone());
    let src = random_source_code(&model, a.blocks, ens, codes::trial_seed(g.seed, 0))?;
    let m = a.m.unwrap_or(q.n() + 1);
    let (chan, rep) = channel_from_source(&src, ens, m)?;
    let rows: Vec<(u64, &InequalityRecord)> = rep.inequalities.iter().map(|r| (0, r)).collect();
    let (t, pass) = inequality_table(&rows);
    let book: Vec<String> = chan.codebook().iter().map(seq_string).collect();
    let errs = channel_error(&chan, ens)?;
    Ok(Output {
        table: t,
        report: Some(json!({ "encoder": src.encoder(), "codebook": book, "channel_errors": to_value(&errs), "channel_from_source": to_value(&rep) })),
        pass,
    })
}

fn cmd_random_code(a: &RandomCodeArgs, g: &Global, ens: &CqEnsemble) -> Result<Output, CliError> {
    let b = match &a.q {
        Some(s) => {
            let q = parse_type(s, ens.alphabet_size())?;
            if q.n() != a.n {
                return Err(CliError::Input("type denominator differs from --n".into()));
            }
            enumerate_type_class(&q)?
        }
        None => enumerate_sequences(a.n, Alphabet::new(ens.alphabet_size())?)?,
    };
    if a.trials == 0 {
        return Err(CliError::Input("--trials must be positive".into()));
    }
    let e = one_shot_experiment(ens, &b, a.messages, a.trials, g.seed)?;
    let ineq = [
        InequalityRecord::le("mean_error <= displayed one-shot bound", e.mean_error, e.bound.display_bound, codes::EXACT_SLACK),
        InequalityRecord::le("min_error <= displayed one-shot bound", e.min_error, e.bound.display_bound, codes::EXACT_SLACK),
        InequalityRecord::le("mean_error <= random-coding proof bound", e.mean_error, e.bound.proof_bound, codes::EXACT_SLACK),
    ];
    let rows: Vec<(u64, &InequalityRecord)> = ineq.iter().map(|r| (0, r)).collect();
    let (t, pass) = inequality_table(&rows);
    Ok(Output { table: t, report: Some(to_value(&e)), pass })
}

fn cmd_round_trip(a: &BuildSourceArgs, g: &Global, ens: &CqEnsemble) -> Result<Output, CliError> {
    let code = channel_code_from_args(a, g, ens)?;
    let (_, rep) = round_trip(&code, ens, g.seed)?;
    let all: Vec<&InequalityRecord> =
        rep.source.inequalities.iter().chain(&rep.channel.inequalities).chain(&rep.inequalities).collect();
    let rows: Vec<(u64, &InequalityRecord)> = all.into_iter().map(|r| (0, r)).collect();
    let (t, pass) = inequality_table(&rows);
    Ok(Output { table: t, report: Some(to_value(&rep)), pass })
}

fn cmd_inequalities(a: &InequalitiesArgs, g: &Global, ens: &CqEnsemble) -> Result<Output, CliError> {
    match a.which {
        InequalityFamily::Duality => {
            let q = parse_type(need_arg(&a.q, "q")?, ens.alphabet_size())?;
            let rate = *need_arg(&a.rate, "rate")?;
            let r = duality_inequality_experiment(ens, &q, rate, a.trials, g.seed)?;
            let rows: Vec<(u64, &InequalityRecord)> =
                r.trials.iter().enumerate().flat_map(|(i, t)| t.inequalities.iter().map(move |x| (i as u64, x))).collect();
            let (t, pass) = inequality_table(&rows);
            Ok(Output { table: t, report: Some(to_value(&r)), pass })
        }
        InequalityFamily::Operator => {
            let r = operator_inequality_checks(g.seed, a.trials);
            let ineq = [
                InequalityRecord::le("-min eigenvalue of Hayashi-Nagaoka gap", -r.hayashi_nagaoka_min_slack, 0.0, codes::HN_SLACK),
                InequalityRecord::le("-min Audenaert slack", -r.audenaert_min_slack, 0.0, codes::AUDENAERT_SLACK),
            ];
            let rows: Vec<(u64, &InequalityRecord)> = ineq.iter().map(|x| (0, x)).collect();
            let (t, pass) = inequality_table(&rows);
            Ok(Output { table: t, report: Some(to_value(&r)), pass })
        }
        InequalityFamily::TypeDecomposition => {
            let n = *need_arg(&a.n, "n")?;
            let r = type_decomposition_check(ens, n)?;
            let ineq = [InequalityRecord::le(
                "max-norm difference",
                r.max_norm_difference,
                0.0,
                codes::TYPE_DECOMPOSITION_TOL,
            )];
            let rows: Vec<(u64, &InequalityRecord)> = ineq.iter().map(|x| (0, x)).collect();
            let (t, pass) = inequality_table(&rows);
            Ok(Output { table: t, report: Some(to_value(&r)), pass })
        }
    }
}

//! Analyses over embedding matrices and run directories.

use std::path::Path;

use tiebias_core::embedspace::{
    alignment_cosine, drift_series, knn_overlap, norm_frequency, norm_frequency_points, param_fraction,
    spectral_distance, AlignmentKind, DriftSeries, EmbeddingSide, DEFAULT_BINS, DEFAULT_EMBED_DIM,
    DEFAULT_K,
};
use tiebias_core::tensorio::{intersect_vocabularies, read_frequencies, read_matrix, read_run, Report, Table};
use tiebias_core::EmbeddingMatrix;

use crate::config::FileConfig;
use crate::error::{usage, CliResult};
use crate::output::{dump_path, emit, num, opt_num, write_csv};
use crate::{AlignArgs, DriftArgs, GraphArgs, NormfreqArgs, ParamsArgs};

/// Two matrices with corresponding rows, plus how they were paired.
struct Pair {
    a: EmbeddingMatrix,
    b: EmbeddingMatrix,
    by_token: bool,
}

/// Pairs rows by token string when both files carry tokens (identical
/// lists keep their order; otherwise the shared tokens are used), and by
/// row index otherwise.
fn load_pair(pa: &Path, pb: &Path) -> CliResult<(Pair, usize, usize)> {
    let a = read_matrix(pa)?;
    let b = read_matrix(pb)?;
    let (ra, rb) = (a.rows(), b.rows());
    let pair = match (a.tokens(), b.tokens()) {
        (Some(ta), Some(tb)) if ta == tb => Pair { a, b, by_token: true },
        (Some(_), Some(_)) => {
            let (a, b) = intersect_vocabularies(&a, &b)?;
            Pair { a, b, by_token: true }
        }
        _ if ra == rb => Pair { a, b, by_token: false },
        _ => {
            return Err(usage(format!(
                "{} has {ra} rows and {} has {rb}; without token lists on both, rows must match",
                pa.display(),
                pb.display()
            )))
        }
    };
    Ok((pair, ra, rb))
}

fn describe_pair(r: &mut Report, pa: &Path, pb: &Path, pair: &Pair, ra: usize, rb: usize) {
    r.set("a", pa.display());
    r.set("b", pb.display());
    r.set("pairing", if pair.by_token { "token" } else { "row" });
    r.set("rows_a", ra);
    r.set("rows_b", rb);
    r.set("rows_compared", pair.a.rows());
}

fn token_label(m: &EmbeddingMatrix, i: usize) -> String {
    m.tokens().map(|t| t[i].clone()).unwrap_or_else(|| i.to_string())
}

pub fn align(args: AlignArgs) -> CliResult<()> {
    let kinds = args
        .kinds
        .iter()
        .map(|k| AlignmentKind::parse(k).ok_or_else(|| usage(format!("unknown alignment kind {k:?}"))))
        .collect::<CliResult<Vec<_>>>()?;
    let (pair, ra, rb) = load_pair(&args.src, &args.dst)?;
    let mut r = Report::new("align");
    describe_pair(&mut r, &args.src, &args.dst, &pair, ra, rb);
    let mut summary = Table::new("summary", &["kind", "mean_cos", "skipped_rows", "rank_deficient"]);
    let mut columns = vec!["row".to_string(), "token".to_string()];
    let mut per_token = Vec::new();
    for kind in &kinds {
        let rep = alignment_cosine(&pair.a, &pair.b, *kind)?;
        r.set(&format!("mean_cos_{}", kind.as_str()), num(rep.mean_cos));
        summary.push_row(vec![
            kind.as_str().into(),
            num(rep.mean_cos),
            rep.skipped_rows.to_string(),
            rep.rank_deficient.to_string(),
        ]);
        if rep.rank_deficient {
            eprintln!("warning: {} fit is rank deficient", kind.as_str());
        }
        columns.push(format!("cos_{}", kind.as_str()));
        per_token.push(rep.per_token_cos);
    }
    r.add_table(summary);
    emit(&r, args.out.as_deref())?;

    if let Some(path) = dump_path(args.dump.as_deref(), args.out.as_deref()) {
        let cols: Vec<&str> = columns.iter().map(String::as_str).collect();
        let mut t = Table::new("per_token", &cols);
        for i in 0..pair.a.rows() {
            let mut row = vec![i.to_string(), token_label(&pair.a, i)];
            row.extend(per_token.iter().map(|c| opt_num(c[i])));
            t.push_row(row);
        }
        write_csv(&t, &path)?;
    }
    Ok(())
}

fn graph_params(args: &GraphArgs) -> CliResult<(usize, usize)> {
    let cfg = FileConfig::load(args.config.as_deref())?;
    Ok((
        args.k.or(cfg.analysis.k).unwrap_or(DEFAULT_K),
        args.embed_dim.or(cfg.analysis.embed_dim).unwrap_or(DEFAULT_EMBED_DIM),
    ))
}

pub fn knn(args: GraphArgs) -> CliResult<()> {
    let (k, _) = graph_params(&args)?;
    let (pair, ra, rb) = load_pair(&args.a, &args.b)?;
    let ov = knn_overlap(&pair.a, &pair.b, k)?;
    let mut r = Report::new("knn");
    describe_pair(&mut r, &args.a, &args.b, &pair, ra, rb);
    r.set("k", k);
    r.set("knn_overlap", num(ov.overlap));
    r.set("skipped_rows", ov.skipped);
    emit(&r, args.out.as_deref())?;
    if let Some(path) = dump_path(args.dump.as_deref(), args.out.as_deref()) {
        let mut t = Table::new("per_token", &["row", "token", "overlap"]);
        for (i, v) in ov.per_token.iter().enumerate() {
            t.push_row(vec![i.to_string(), token_label(&pair.a, i), opt_num(*v)]);
        }
        write_csv(&t, &path)?;
    }
    Ok(())
}

pub fn spectral(args: GraphArgs) -> CliResult<()> {
    let (k, dim) = graph_params(&args)?;
    let (pair, ra, rb) = load_pair(&args.a, &args.b)?;
    let sd = spectral_distance(&pair.a, &pair.b, k, dim)?;
    let mut r = Report::new("spectral");
    describe_pair(&mut r, &args.a, &args.b, &pair, ra, rb);
    r.set("k", k);
    r.set("embed_dim", dim);
    r.set("used_dim", sd.used_dim);
    r.set("spectral_distance", num(sd.distance));
    if sd.reduced() {
        eprintln!(
            "warning: only {} positive eigenvalues; embedding dimension reduced from {dim}",
            sd.used_dim
        );
    }
    emit(&r, args.out.as_deref())
}

pub fn drift(args: DriftArgs) -> CliResult<()> {
    let records = read_run(&args.run)?;
    let input = drift_series(&records, EmbeddingSide::Input)?;
    let output = drift_series(&records, EmbeddingSide::Output)?;
    let tied = records[0].is_tied();
    let mut r = Report::new("drift");
    r.set("run", args.run.display());
    r.set("tied", tied);
    r.set("checkpoints", records.len());
    let last = |s: &DriftSeries| num(*s.sim_to_init.last().expect("at least two checkpoints"));
    r.set("final_sim_to_init_input", last(&input));
    r.set("final_sim_to_init_output", last(&output));
    let mut t = Table::new(
        "drift",
        &[
            "step",
            "input_sim_to_init",
            "input_sim_consecutive",
            "output_sim_to_init",
            "output_sim_consecutive",
        ],
    );
    for i in 0..input.steps.len() {
        t.push_row(vec![
            input.steps[i].to_string(),
            num(input.sim_to_init[i]),
            num(input.sim_consecutive[i]),
            num(output.sim_to_init[i]),
            num(output.sim_consecutive[i]),
        ]);
    }
    r.add_table(t);
    emit(&r, args.out.as_deref())
}

pub fn normfreq(args: NormfreqArgs) -> CliResult<()> {
    let cfg = FileConfig::load(args.config.as_deref())?;
    let bins = args.bins.or(cfg.analysis.bins).unwrap_or(DEFAULT_BINS);
    let m = read_matrix(&args.matrix)?;
    let freq = read_frequencies(&args.freq, m.rows())?;
    let result = norm_frequency(&m, &freq, bins)?;
    let mut r = Report::new("normfreq");
    r.set("matrix", args.matrix.display());
    r.set("freq", args.freq.display());
    r.set("bins", bins);
    let mut t = Table::new("bins", &["log10_lo", "log10_hi", "log10_center", "count", "mean_norm"]);
    for b in &result {
        t.push_row(vec![
            num(b.log10_lo),
            num(b.log10_hi),
            num(b.center()),
            b.count.to_string(),
            opt_num(b.mean_norm),
        ]);
    }
    r.add_table(t);
    emit(&r, args.out.as_deref())?;
    if let Some(path) = dump_path(args.dump.as_deref(), args.out.as_deref()) {
        let mut t = Table::new("per_token", &["row", "token", "count", "log10_count", "norm"]);
        for (i, lf, n) in norm_frequency_points(&m, &freq) {
            t.push_row(vec![
                i.to_string(),
                token_label(&m, i),
                freq.count(i).to_string(),
                num(lf),
                num(n),
            ]);
        }
        write_csv(&t, &path)?;
    }
    Ok(())
}

/// Parses counts such as `70426624`, `70.4M`, `2.8B` or `512K`.
pub fn parse_count(s: &str) -> CliResult<u64> {
    let s = s.trim();
    let (digits, scale) = match s.chars().last() {
        Some('K' | 'k') => (&s[..s.len() - 1], 1e3),
        Some('M' | 'm') => (&s[..s.len() - 1], 1e6),
        Some('B' | 'b' | 'G' | 'g') => (&s[..s.len() - 1], 1e9),
        _ => (s, 1.0),
    };
    if scale == 1.0 {
        if let Ok(n) = digits.parse::<u64>() {
            return Ok(n);
        }
    }
    let v: f64 = digits.parse().map_err(|_| usage(format!("bad parameter count {s:?}")))?;
    let n = (v * scale).round();
    if !(n >= 0.0 && n.is_finite() && n < u64::MAX as f64) {
        return Err(usage(format!("bad parameter count {s:?}")));
    }
    Ok(n as u64)
}

pub fn params(args: ParamsArgs) -> CliResult<()> {
    let vd = args.vocab * args.hidden;
    let as_configured = if args.tied { vd } else { 2 * vd };
    let other = match (&args.other_params, &args.total) {
        (Some(o), _) => parse_count(o)?,
        (None, Some(t)) => {
            let total = parse_count(t)?;
            total.checked_sub(as_configured).ok_or_else(|| {
                usage(format!("total {total} is smaller than the {as_configured} embedding parameters"))
            })?
        }
        (None, None) => unreachable!("clap requires one of the two"),
    };
    let tied = param_fraction(args.vocab, args.hidden, other, true);
    let untied = param_fraction(args.vocab, args.hidden, other, false);
    let chosen = if args.tied { tied } else { untied };
    let mut r = Report::new("params");
    r.set("vocab", args.vocab);
    r.set("hidden", args.hidden);
    r.set("tied", args.tied);
    r.set("other_params", other);
    r.set("embed_params", chosen.embed_params);
    r.set("total", chosen.total);
    r.set("fraction", num(chosen.fraction));
    r.set("percent", format!("{:.2}", 100.0 * chosen.fraction));
    r.set("tied_total", tied.total);
    r.set("untied_total", untied.total);
    r.set("tying_saves", untied.total - tied.total);
    emit(&r, args.out.as_deref())
}

use std::fs;
use std::path::Path;

use tiebias_core::tensorio::{write_frequencies, Report, Table, TraceLog};
use tiebias_core::toylm::{mean_rolling_share, pathway_share, rolling_average, train};

use crate::config::{absolute, complete_training, load_corpus, model_and_train, FileConfig};
use crate::error::{usage, CliResult};
use crate::manifest::Manifest;
use crate::output::{emit, num};
use crate::TrainArgs;

pub const ROLLING_WINDOW: usize = 20;
pub const EARLY_STEPS: usize = 200;
pub const FREQ_FILE: &str = "frequencies.csv";
pub const TRACE_REPORT: &str = "trace.report";

fn apply_flags(a: &TrainArgs, cfg: &mut FileConfig) -> CliResult<()> {
    if let Some(p) = &a.corpus {
        cfg.corpus.path = Some(absolute(p)?);
    }
    if let Some(p) = &a.out {
        cfg.train.out = Some(absolute(p)?);
    }
    let c = &mut cfg.corpus;
    c.tokenizer = a.tokenizer.or(c.tokenizer);
    c.max_vocab = a.max_vocab.or(c.max_vocab);
    let m = &mut cfg.model;
    if a.tied {
        m.tied = Some(true);
    }
    if a.untied {
        m.tied = Some(false);
    }
    m.hidden = a.hidden.or(m.hidden);
    m.layers = a.layers.or(m.layers);
    m.heads = a.heads.or(m.heads);
    m.context = a.context.or(m.context);
    m.mlp_ratio = a.mlp_ratio.or(m.mlp_ratio);
    m.seed = a.seed.or(m.seed);
    let t = &mut cfg.train;
    t.steps = a.steps.or(t.steps);
    t.batch = a.batch.or(t.batch);
    t.lr = a.lr.or(t.lr);
    t.warmup_steps = a.warmup_steps.or(t.warmup_steps);
    t.input_grad_scale = a.input_grad_scale.or(t.input_grad_scale);
    t.checkpoint_every = a.checkpoint_every.or(t.checkpoint_every);
    t.data_seed = a.data_seed.or(t.data_seed);
    if a.no_trace {
        t.trace = Some(false);
    }
    Ok(())
}

/// Removes checkpoints left by an earlier run in the same directory so a
/// rerun leaves exactly its own outputs.
fn clear_previous_run(dir: &Path) -> CliResult<()> {
    let Ok(entries) = fs::read_dir(dir) else {
        return Ok(());
    };
    for e in entries.flatten() {
        let name = e.file_name();
        if name.to_string_lossy().starts_with("step_") && e.path().is_dir() {
            fs::remove_dir_all(e.path())
                .map_err(|err| usage(format!("cannot clear {}: {err}", e.path().display())))?;
        }
    }
    Ok(())
}

pub fn trace_report(trace: &TraceLog, tied: bool, input_scale: f64) -> CliResult<Report> {
    let mut r = Report::new("trace");
    r.set("tied", tied);
    r.set("input_grad_scale", num(input_scale));
    r.set("rolling_window", ROLLING_WINDOW);
    r.set("steps", trace.len());
    let mut norms = Table::new(
        "trace",
        &["step", "grad_in", "grad_out", "loss", "grad_in_rolling", "grad_out_rolling"],
    );
    if !trace.rows.is_empty() {
        let gi: Vec<f64> = trace.rows.iter().map(|r| r.grad_in).collect();
        let go: Vec<f64> = trace.rows.iter().map(|r| r.grad_out).collect();
        let gir = rolling_average(&gi, ROLLING_WINDOW)?;
        let gor = rolling_average(&go, ROLLING_WINDOW)?;
        for (i, row) in trace.rows.iter().enumerate() {
            norms.push_row(vec![
                row.step.to_string(),
                num(row.grad_in),
                num(row.grad_out),
                num(row.loss),
                num(gir[i]),
                num(gor[i]),
            ]);
        }
        r.set("final_loss", num(trace.rows.last().expect("non-empty").loss));
    }
    let share = pathway_share(trace);
    let mut shares = Table::new("share", &["step", "output_share", "output_share_rolling"]);
    if !share.shares.is_empty() {
        let rolled = rolling_average(&share.values(), ROLLING_WINDOW)?;
        for (&(step, s), roll) in share.shares.iter().zip(rolled) {
            shares.push_row(vec![step.to_string(), num(s), num(roll)]);
        }
        r.set(
            "mean_output_share_rolling_first_200",
            num(mean_rolling_share(trace, ROLLING_WINDOW, EARLY_STEPS)?),
        );
    }
    r.set("zero_norm_steps", share.skipped_steps.len());
    r.add_table(norms);
    r.add_table(shares);
    Ok(r)
}

pub fn run(a: TrainArgs) -> CliResult<()> {
    let mut cfg = FileConfig::load(a.config.as_deref())?;
    apply_flags(&a, &mut cfg)?;
    complete_training(&mut cfg);
    let out = cfg
        .train
        .out
        .clone()
        .ok_or_else(|| usage("no run directory given (use --out or [train] out)"))?;
    let (corpus, bytes) = load_corpus(&cfg.corpus)?;
    let (model, tc) = model_and_train(&cfg, corpus.vocab())?;

    fs::create_dir_all(&out).map_err(|e| usage(format!("cannot create {}: {e}", out.display())))?;
    clear_previous_run(&out)?;
    let manifest = Manifest::new(&cfg, &bytes, corpus.len(), corpus.vocab());
    manifest.write(&out)?;
    write_frequencies(&corpus.frequencies(), out.join(FREQ_FILE))?;

    let outcome = train(&model, &tc, &corpus, Some(&out))?;
    if tc.trace {
        let report = trace_report(&outcome.trace, model.tied, tc.input_grad_scale)?;
        emit(&report, Some(&out.join(TRACE_REPORT)))?;
    }
    println!(
        "trained {} steps ({}, vocab {}, {} parameters) into {}",
        tc.steps,
        if model.tied { "tied" } else { "untied" },
        model.vocab,
        outcome.params.len(),
        out.display()
    );
    if let Some(last) = outcome.trace.rows.last() {
        println!("final loss {:.4}", last.loss);
    }
    println!("manifest hash {}", manifest.hash);
    Ok(())
}

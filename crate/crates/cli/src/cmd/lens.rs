use std::path::{Path, PathBuf};

use tiebias_core::lens::{lens_profile, train_tuned_lens, write_translators, LensProfile, LensTrainConfig};
use tiebias_core::tensorio::{list_checkpoints, read_checkpoint, Report, Table};
use tiebias_core::toylm::ModelParams;

use crate::config::{absolute, lens_config, load_corpus, model_and_train, FileConfig};
use crate::error::{usage, CliResult};
use crate::manifest::Manifest;
use crate::output::{emit, num};
use crate::LensArgs;

pub const LENS_REPORT: &str = "lens.report";

struct Profiled {
    run: PathBuf,
    step: usize,
    tied: bool,
    profile: LensProfile,
}

fn profile_run(run: &Path, step: Option<usize>, corpus: Option<&Path>, cfg: &LensTrainConfig, out: &Path) -> CliResult<Profiled> {
    let manifest = Manifest::read(run)?;
    let mut run_cfg = manifest.config.clone();
    if let Some(p) = corpus {
        run_cfg.corpus.path = Some(p.to_path_buf());
    }
    let (corpus, _) = load_corpus(&run_cfg.corpus)?;
    if corpus.vocab() != manifest.vocab {
        return Err(usage(format!(
            "corpus tokenizes to {} types but {} was trained with {}",
            corpus.vocab(),
            run.display(),
            manifest.vocab
        )));
    }
    let (model, _) = model_and_train(&run_cfg, manifest.vocab)?;
    let checkpoints = list_checkpoints(run)?;
    let (step, dir) = match step {
        Some(s) => checkpoints
            .into_iter()
            .find(|(k, _)| *k == s)
            .ok_or_else(|| usage(format!("{} has no checkpoint at step {s}", run.display())))?,
        None => checkpoints
            .into_iter()
            .last()
            .ok_or_else(|| usage(format!("{} has no checkpoints", run.display())))?,
    };
    let params = ModelParams::from_checkpoint(&model, &read_checkpoint(dir)?)?;
    let translators = train_tuned_lens(&params, &corpus, cfg)?;
    write_translators(&translators, out)?;
    for l in &translators.diverged {
        eprintln!("warning: translator for layer {l} of {} diverged; kept its last finite state", run.display());
    }
    Ok(Profiled {
        run: run.to_path_buf(),
        step,
        tied: model.tied,
        profile: lens_profile(&params, &translators, &corpus)?,
    })
}

pub fn run(args: LensArgs) -> CliResult<()> {
    let mut cfg = FileConfig::load(args.config.as_deref())?;
    let s = &mut cfg.lens;
    s.steps = args.steps.or(s.steps);
    s.lr = args.lr.or(s.lr);
    s.batch = args.batch.or(s.batch);
    s.seed = args.seed.or(s.seed);
    let lc = lens_config(&cfg.lens);
    let corpus = args.corpus.as_deref().map(absolute).transpose()?;

    let a = profile_run(&args.run, args.step, corpus.as_deref(), &lc, &args.out.join("translators_a"))?;
    let b = match &args.compare {
        Some(run) => Some(profile_run(run, args.step, corpus.as_deref(), &lc, &args.out.join("translators_b"))?),
        None => None,
    };

    if let Some(b) = &b {
        if b.profile.kl_bits.len() != a.profile.kl_bits.len() {
            return Err(usage("the two runs have different depths; a per-layer overlay needs equal layer counts"));
        }
    }

    let mut r = Report::new("lens");
    r.set("steps", lc.steps);
    r.set("lr", num(lc.lr));
    r.set("batch", lc.batch);
    r.set("seed", lc.seed);
    for (tag, p) in std::iter::once(("a", &a)).chain(b.as_ref().map(|p| ("b", p))) {
        r.set(&format!("run_{tag}"), p.run.display());
        r.set(&format!("step_{tag}"), p.step);
        r.set(&format!("tied_{tag}"), p.tied);
        r.set(&format!("positions_{tag}"), p.profile.positions);
        let diverged: Vec<String> = p.profile.diverged.iter().map(|l| l.to_string()).collect();
        r.set(&format!("diverged_layers_{tag}"), diverged.join(" "));
    }
    let mut columns = vec!["layer", "kl_bits_a"];
    if b.is_some() {
        columns.extend(["kl_bits_b", "delta_a_minus_b"]);
    }
    let mut t = Table::new("profile", &columns);
    for (layer, &ka) in a.profile.kl_bits.iter().enumerate() {
        let mut row = vec![layer.to_string(), num(ka)];
        if let Some(b) = &b {
            let kb = b.profile.kl_bits[layer];
            row.extend([num(kb), num(ka - kb)]);
        }
        t.push_row(row);
    }
    r.add_table(t);
    emit(&r, Some(&args.out.join(LENS_REPORT)))?;
    print!("{}", r.to_text());
    Ok(())
}

use std::fs;

use tiebias_core::tensorio::{read_report, Report, Table};

use crate::error::{usage, CliResult};
use crate::svg::{render, Panel, Series};
use crate::PlotArgs;

fn table<'a>(r: &'a Report, name: &str) -> CliResult<&'a Table> {
    r.table(name)
        .ok_or_else(|| usage(format!("{} report has no [table {name}]", r.kind)))
}

fn series(t: &Table, x: &str, y: &str, name: &str, markers: bool) -> CliResult<Series> {
    let xs = t
        .column_str(x)
        .ok_or_else(|| usage(format!("table {} has no column {x}", t.name)))?;
    let ys = t
        .column_str(y)
        .ok_or_else(|| usage(format!("table {} has no column {y}", t.name)))?;
    Ok(Series {
        name: name.into(),
        points: xs
            .into_iter()
            .zip(ys)
            .filter(|(_, y)| !y.is_empty())
            .map(|(a, b)| (a.to_owned(), b.to_owned()))
            .collect(),
        markers,
    })
}

fn panel(title: &str, x_label: &str, y_label: &str, log_y: bool, series: Vec<Series>) -> Panel {
    Panel {
        title: title.into(),
        x_label: x_label.into(),
        y_label: y_label.into(),
        log_y,
        series,
    }
}

fn panels(r: &Report) -> CliResult<Vec<Panel>> {
    match r.kind.as_str() {
        "trace" => {
            let t = table(r, "trace")?;
            let s = table(r, "share")?;
            Ok(vec![
                panel(
                    "Embedding gradient norm by pathway (rolling mean)",
                    "step",
                    "L2 norm",
                    true,
                    vec![
                        series(t, "step", "grad_in_rolling", "input pathway", false)?,
                        series(t, "step", "grad_out_rolling", "output pathway", false)?,
                    ],
                ),
                panel(
                    "Output-pathway share of the embedding gradient (rolling mean)",
                    "step",
                    "share",
                    false,
                    vec![series(s, "step", "output_share_rolling", "output share", false)?],
                ),
            ])
        }
        "drift" => {
            let t = table(r, "drift")?;
            Ok(vec![
                panel(
                    "Mean cosine to the initial embeddings",
                    "step",
                    "cosine",
                    false,
                    vec![
                        series(t, "step", "input_sim_to_init", "input", false)?,
                        series(t, "step", "output_sim_to_init", "output", false)?,
                    ],
                ),
                panel(
                    "Mean cosine to the previous checkpoint",
                    "step",
                    "cosine",
                    false,
                    vec![
                        series(t, "step", "input_sim_consecutive", "input", false)?,
                        series(t, "step", "output_sim_consecutive", "output", false)?,
                    ],
                ),
            ])
        }
        "normfreq" => {
            let t = table(r, "bins")?;
            Ok(vec![panel(
                "Embedding norm against token frequency",
                "log10 count (bin centre)",
                "mean norm",
                false,
                vec![series(t, "log10_center", "mean_norm", "bin mean", true)?],
            )])
        }
        "lens" => {
            let t = table(r, "profile")?;
            let mut s = vec![series(t, "layer", "kl_bits_a", "run a", false)?];
            if t.column_index("kl_bits_b").is_some() {
                s.push(series(t, "layer", "kl_bits_b", "run b", false)?);
            }
            Ok(vec![panel("Residual KL of the tuned lens", "layer", "KL (bits)", false, s)])
        }
        other => Err(usage(format!("no chart is defined for {other:?} reports"))),
    }
}

pub fn run(args: PlotArgs) -> CliResult<()> {
    let r = read_report(&args.report)?;
    let svg = render(&panels(&r)?)
        .ok_or_else(|| usage(format!("{} has no plottable values", args.report.display())))?;
    fs::write(&args.out, svg).map_err(|e| usage(format!("cannot write {}: {e}", args.out.display())))
}

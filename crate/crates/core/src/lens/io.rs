//! Translator sets on disk: `A_<l>.embx` (`d × d`) and `b_<l>.embx`
//! (`1 × d`) per layer, plus `lens.txt` with the training metadata.

use std::fs;
use std::path::Path;

use crate::error::{Error, Result};
use crate::lens::tuned::{LensTranslatorSet, Translator};
use crate::matrix::EmbeddingMatrix;
use crate::tensorio::{read_matrix, write_matrix};

pub fn write_translators(set: &LensTranslatorSet, dir: impl AsRef<Path>) -> Result<()> {
    let dir = dir.as_ref();
    fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    for (l, t) in set.translators.iter().enumerate() {
        let d = t.dim();
        write_matrix(&EmbeddingMatrix::new(d, d, t.a.clone())?, dir.join(format!("A_{l}.embx")))?;
        write_matrix(&EmbeddingMatrix::new(1, d, t.b.clone())?, dir.join(format!("b_{l}.embx")))?;
    }
    let diverged: Vec<String> = set.diverged.iter().map(|l| l.to_string()).collect();
    let meta = format!(
        "layers={}\nsteps={}\nlr={:?}\ndiverged={}\n",
        set.translators.len(),
        set.steps,
        set.lr,
        diverged.join(",")
    );
    let p = dir.join("lens.txt");
    fs::write(&p, meta).map_err(|e| Error::io(&p, e))
}

pub fn read_translators(dir: impl AsRef<Path>) -> Result<LensTranslatorSet> {
    let dir = dir.as_ref();
    let p = dir.join("lens.txt");
    let meta = fs::read_to_string(&p).map_err(|e| Error::io(&p, e))?;
    let mut layers = None;
    let mut steps = 0;
    let mut lr = 0.0;
    let mut diverged = Vec::new();
    for (i, line) in meta.lines().enumerate() {
        let err = |msg: String| Error::Parse { line: i + 1, msg };
        let Some((k, v)) = line.split_once('=') else { continue };
        match k {
            "layers" => layers = Some(v.parse::<usize>().map_err(|_| err(format!("bad layers {v:?}")))?),
            "steps" => steps = v.parse().map_err(|_| err(format!("bad steps {v:?}")))?,
            "lr" => lr = v.parse().map_err(|_| err(format!("bad lr {v:?}")))?,
            "diverged" => {
                diverged = v
                    .split(',')
                    .filter(|s| !s.is_empty())
                    .map(|s| s.parse().map_err(|_| err(format!("bad layer {s:?}"))))
                    .collect::<Result<_>>()?
            }
            other => return Err(err(format!("unknown key {other:?}"))),
        }
    }
    let layers = layers.ok_or_else(|| Error::BadHeader("lens.txt lacks layers".into()))?;
    let mut translators = Vec::with_capacity(layers);
    for l in 0..layers {
        let a = read_matrix(dir.join(format!("A_{l}.embx")))?;
        let b = read_matrix(dir.join(format!("b_{l}.embx")))?;
        if a.rows() != a.cols() || b.cols() != a.cols() || b.rows() != 1 {
            return Err(Error::Shape(format!("translator {l} has inconsistent shapes")));
        }
        translators.push(Translator {
            a: a.into_data(),
            b: b.into_data(),
        });
    }
    Ok(LensTranslatorSet {
        final_train_kl: vec![f64::NAN; layers],
        translators,
        steps,
        lr,
        diverged,
    })
}

//! Row-wise kernels with their hand-derived backward passes.

pub const LN_EPS: f64 = 1e-5;

/// Layernorm over each `d`-wide row. Returns `(out, mean, rstd)`.
pub fn layernorm_forward(x: &[f64], g: &[f64], b: &[f64], d: usize) -> (Vec<f64>, Vec<f64>, Vec<f64>) {
    let n = x.len() / d;
    let mut out = vec![0.0; x.len()];
    let mut means = vec![0.0; n];
    let mut rstds = vec![0.0; n];
    for i in 0..n {
        let row = &x[i * d..(i + 1) * d];
        let mean = row.iter().sum::<f64>() / d as f64;
        let var = row.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / d as f64;
        let rstd = 1.0 / (var + LN_EPS).sqrt();
        for (j, o) in out[i * d..(i + 1) * d].iter_mut().enumerate() {
            *o = (row[j] - mean) * rstd * g[j] + b[j];
        }
        means[i] = mean;
        rstds[i] = rstd;
    }
    (out, means, rstds)
}

/// Accumulates into `dx`, `dg`, `db`.
#[allow(clippy::too_many_arguments)]
pub fn layernorm_backward(
    dout: &[f64],
    x: &[f64],
    mean: &[f64],
    rstd: &[f64],
    g: &[f64],
    d: usize,
    dx: &mut [f64],
    dg: &mut [f64],
    db: &mut [f64],
) {
    let n = x.len() / d;
    for i in 0..n {
        let dorow = &dout[i * d..(i + 1) * d];
        let xrow = &x[i * d..(i + 1) * d];
        let (m, r) = (mean[i], rstd[i]);
        let mut dnorm_mean = 0.0;
        let mut dnorm_norm_mean = 0.0;
        for j in 0..d {
            let norm = (xrow[j] - m) * r;
            let dnorm = g[j] * dorow[j];
            dnorm_mean += dnorm;
            dnorm_norm_mean += dnorm * norm;
        }
        dnorm_mean /= d as f64;
        dnorm_norm_mean /= d as f64;
        let dxrow = &mut dx[i * d..(i + 1) * d];
        for j in 0..d {
            let norm = (xrow[j] - m) * r;
            let dnorm = g[j] * dorow[j];
            db[j] += dorow[j];
            dg[j] += norm * dorow[j];
            dxrow[j] += r * (dnorm - dnorm_mean - norm * dnorm_norm_mean);
        }
    }
}

const GELU_SCALE: f64 = 0.797_884_560_802_865_4; // sqrt(2/pi)

/// Tanh-approximated GELU.
pub fn gelu(x: f64) -> f64 {
    let u = GELU_SCALE * (x + 0.044715 * x * x * x);
    0.5 * x * (1.0 + u.tanh())
}

pub fn gelu_grad(x: f64) -> f64 {
    let u = GELU_SCALE * (x + 0.044715 * x * x * x);
    let t = u.tanh();
    let du = GELU_SCALE * (1.0 + 3.0 * 0.044715 * x * x);
    0.5 * (1.0 + t) + 0.5 * x * (1.0 - t * t) * du
}

/// In-place softmax of one row.
pub fn softmax_in_place(row: &mut [f64]) {
    let max = row.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let mut sum = 0.0;
    for v in row.iter_mut() {
        *v = (*v - max).exp();
        sum += *v;
    }
    for v in row.iter_mut() {
        *v /= sum;
    }
}

/// `out[j] += Σ_i x[i, j]`.
pub fn add_column_sums(x: &[f64], cols: usize, out: &mut [f64]) {
    for row in x.chunks_exact(cols) {
        for (o, v) in out.iter_mut().zip(row) {
            *o += v;
        }
    }
}

/// Adds `bias` to every `bias.len()`-wide row of `x`.
pub fn add_bias(x: &mut [f64], bias: &[f64]) {
    for row in x.chunks_exact_mut(bias.len()) {
        for (v, b) in row.iter_mut().zip(bias) {
            *v += b;
        }
    }
}

use crate::error::{Error, Result};
use crate::geograph::NormAdj;
use crate::model::{GruParams, ModelConfig, ModelParams};
use crate::numcore::{sigmoid, spmm, Matrix};

/// One training or evaluation example.
#[derive(Debug, Clone, PartialEq)]
pub struct Sample {
    /// `window` matrices of shape `N x F`, oldest first.
    pub window: Vec<Matrix>,
    /// Standardized targets, `N x K` (column `k` is horizon `k`).
    pub target: Matrix,
}

/// `relu(Â · h · w + b)`.
pub fn gcn_layer(h: &Matrix, adj: &NormAdj, w: &Matrix, b: &Matrix) -> Result<Matrix> {
    let (_, pre) = gcn_pre(h, adj, w, b)?;
    Ok(pre.map(relu))
}

fn gcn_pre(h: &Matrix, adj: &NormAdj, w: &Matrix, b: &Matrix) -> Result<(Matrix, Matrix)> {
    let mixed = spmm(adj.csr(), h)?;
    let mut pre = mixed.matmul(w)?;
    pre.add_row_broadcast(b.as_slice())?;
    Ok((mixed, pre))
}

#[inline]
fn relu(v: f64) -> f64 {
    if v > 0.0 {
        v
    } else {
        0.0
    }
}

/// Intermediate values of one GRU step, kept for the backward pass.
struct GruStep {
    x: Matrix,
    h_prev: Matrix,
    z: Matrix,
    r: Matrix,
    rh: Matrix,
    c: Matrix,
}

fn affine2(x: &Matrix, w: &Matrix, h: &Matrix, u: &Matrix, b: &Matrix) -> Result<Matrix> {
    let mut a = x.matmul(w)?;
    a.add_assign(&h.matmul(u)?)?;
    a.add_row_broadcast(b.as_slice())?;
    Ok(a)
}

fn gru_step(x: &Matrix, h: &Matrix, p: &GruParams) -> Result<(Matrix, GruStep)> {
    let z = affine2(x, &p.w_z, h, &p.u_z, &p.b_z)?.map(sigmoid);
    let r = affine2(x, &p.w_r, h, &p.u_r, &p.b_r)?.map(sigmoid);
    let rh = r.zip_map(h, |a, b| a * b)?;
    let c = affine2(x, &p.w_h, &rh, &p.u_h, &p.b_h)?.map(f64::tanh);
    let mut next = h.clone();
    for ((o, &zv), &cv) in next.as_mut_slice().iter_mut().zip(z.as_slice()).zip(c.as_slice()) {
        *o = (1.0 - zv) * *o + zv * cv;
    }
    Ok((
        next,
        GruStep {
            x: x.clone(),
            h_prev: h.clone(),
            z,
            r,
            rh,
            c,
        },
    ))
}

/// One GRU update for a batch of rows (`N x HD` input and state).
pub fn gru_cell(x: &Matrix, h: &Matrix, params: &GruParams) -> Result<Matrix> {
    Ok(gru_step(x, h, params)?.0)
}

struct GcnStep {
    /// `Â · H_{l-1}` per layer.
    mixed: Vec<Matrix>,
    /// Pre-activation per layer.
    pre: Vec<Matrix>,
}

/// Everything the backward pass needs from one forward pass.
pub struct ForwardCache {
    gcn: Vec<GcnStep>,
    gru: Vec<GruStep>,
    h_final: Matrix,
}

fn check_inputs(window: &[Matrix], adj: &NormAdj, params: &ModelParams, cfg: &ModelConfig) -> Result<()> {
    if window.len() != cfg.window {
        return Err(Error::shape(
            "forward",
            format!("window of {} steps, config says {}", window.len(), cfg.window),
        ));
    }
    if !params.matches(cfg) {
        return Err(Error::shape("forward", "parameters do not match the config"));
    }
    for (t, x) in window.iter().enumerate() {
        if x.rows() != adj.n() || x.cols() != cfg.n_features {
            return Err(Error::shape(
                "forward",
                format!(
                    "step {t} is {:?}, expected {}x{}",
                    x.shape(),
                    adj.n(),
                    cfg.n_features
                ),
            ));
        }
    }
    Ok(())
}

/// Forward pass keeping intermediates. Returns `N x K` standardized predictions.
pub fn forward_cached(
    window: &[Matrix],
    adj: &NormAdj,
    params: &ModelParams,
    cfg: &ModelConfig,
) -> Result<(Matrix, ForwardCache)> {
    check_inputs(window, adj, params, cfg)?;
    let n = adj.n();
    let mut h = Matrix::zeros(n, cfg.hidden);
    let mut gcn = Vec::with_capacity(window.len());
    let mut gru = Vec::with_capacity(window.len());
    for (t, x) in window.iter().enumerate() {
        let mut mixed = Vec::with_capacity(cfg.gcn_layers);
        let mut pre = Vec::with_capacity(cfg.gcn_layers);
        let mut cur = x.clone();
        for (l, (w, b)) in params.gcn_w.iter().zip(&params.gcn_b).enumerate() {
            let (m, p) = gcn_pre(&cur, adj, w, b)?;
            cur = p.map(relu);
            if !cur.is_finite() {
                return Err(Error::NonFinite(format!("gcn layer {l} at timestep {t}")));
            }
            mixed.push(m);
            pre.push(p);
        }
        gcn.push(GcnStep { mixed, pre });
        let (next, step) = gru_step(&cur, &h, &params.gru)?;
        if !next.is_finite() {
            return Err(Error::NonFinite(format!("gru state at timestep {t}")));
        }
        gru.push(step);
        h = next;
    }
    let mut pred = h.matmul(&params.head_w)?;
    pred.add_row_broadcast(params.head_b.as_slice())?;
    if !pred.is_finite() {
        return Err(Error::NonFinite("horizon heads".into()));
    }
    Ok((
        pred,
        ForwardCache {
            gcn,
            gru,
            h_final: h,
        },
    ))
}

/// Predictions for one window, `N x K` in standardized units.
pub fn forward(
    window: &[Matrix],
    adj: &NormAdj,
    params: &ModelParams,
    cfg: &ModelConfig,
) -> Result<Matrix> {
    check_inputs(window, adj, params, cfg)?;
    let mut h = Matrix::zeros(adj.n(), cfg.hidden);
    for (t, x) in window.iter().enumerate() {
        let mut cur = x.clone();
        for (l, (w, b)) in params.gcn_w.iter().zip(&params.gcn_b).enumerate() {
            cur = gcn_layer(&cur, adj, w, b)?;
            if !cur.is_finite() {
                return Err(Error::NonFinite(format!("gcn layer {l} at timestep {t}")));
            }
        }
        h = gru_cell(&cur, &h, &params.gru)?;
        if !h.is_finite() {
            return Err(Error::NonFinite(format!("gru state at timestep {t}")));
        }
    }
    let mut pred = h.matmul(&params.head_w)?;
    pred.add_row_broadcast(params.head_b.as_slice())?;
    Ok(pred)
}

/// Runs [`forward`] over many windows, using up to `threads` workers. Output order follows input order.
pub fn forward_batch(
    windows: &[Vec<Matrix>],
    adj: &NormAdj,
    params: &ModelParams,
    cfg: &ModelConfig,
    threads: usize,
) -> Result<Vec<Matrix>> {
    let threads = threads.max(1).min(windows.len().max(1));
    if threads == 1 {
        return windows.iter().map(|w| forward(w, adj, params, cfg)).collect();
    }
    let chunk = windows.len().div_ceil(threads);
    let parts: Vec<Result<Vec<Matrix>>> = std::thread::scope(|s| {
        let handles: Vec<_> = windows
            .chunks(chunk)
            .map(|part| {
                s.spawn(move || {
                    part.iter()
                        .map(|w| forward(w, adj, params, cfg))
                        .collect::<Result<Vec<_>>>()
                })
            })
            .collect();
        handles
            .into_iter()
            .map(|h| h.join().expect("forward worker panicked"))
            .collect()
    });
    let mut out = Vec::with_capacity(windows.len());
    for p in parts {
        out.extend(p?);
    }
    Ok(out)
}

/// Mean squared error over `(batch x horizons x nodes)` and its gradient for every parameter.
pub fn loss_and_gradients(
    batch: &[Sample],
    adj: &NormAdj,
    params: &ModelParams,
    cfg: &ModelConfig,
) -> Result<(f64, ModelParams)> {
    if batch.is_empty() {
        return Err(Error::shape("loss_and_gradients", "empty batch"));
    }
    let mut grads = ModelParams::zeros(cfg);
    let count = (batch.len() * adj.n() * cfg.n_horizons()) as f64;
    let mut total = 0.0;
    for s in batch {
        let (pred, cache) = forward_cached(&s.window, adj, params, cfg)?;
        if s.target.shape() != pred.shape() {
            return Err(Error::shape(
                "loss_and_gradients",
                format!("target {:?} vs prediction {:?}", s.target.shape(), pred.shape()),
            ));
        }
        let diff = pred.zip_map(&s.target, |p, t| p - t)?;
        total += diff.sum_sq();
        let dpred = diff.map(|d| 2.0 * d / count);
        backward(&cache, &dpred, adj, params, &mut grads)?;
    }
    let loss = total / count;
    if !loss.is_finite() {
        return Err(Error::NonFinite("loss".into()));
    }
    Ok((loss, grads))
}

fn backward(
    cache: &ForwardCache,
    dpred: &Matrix,
    adj: &NormAdj,
    params: &ModelParams,
    grads: &mut ModelParams,
) -> Result<()> {
    grads.head_w.add_matmul_tn(&cache.h_final, dpred)?;
    add_col_sums(&mut grads.head_b, dpred);
    let mut dh = dpred.matmul(&params.head_w.transpose())?;

    let p = &params.gru;
    let (w_zt, u_zt) = (p.w_z.transpose(), p.u_z.transpose());
    let (w_rt, u_rt) = (p.w_r.transpose(), p.u_r.transpose());
    let (w_ht, u_ht) = (p.w_h.transpose(), p.u_h.transpose());
    let gcn_wt: Vec<Matrix> = params.gcn_w.iter().map(Matrix::transpose).collect();

    for (step, gstep) in cache.gru.iter().zip(&cache.gcn).rev() {
        let n = dh.len();
        let (zs, cs, hs) = (step.z.as_slice(), step.c.as_slice(), step.h_prev.as_slice());
        let dhs = dh.as_slice();
        let mut d_az = vec![0.0; n];
        let mut d_ac = vec![0.0; n];
        let mut dh_prev = vec![0.0; n];
        for i in 0..n {
            let (z, c, h, g) = (zs[i], cs[i], hs[i], dhs[i]);
            d_az[i] = g * (c - h) * z * (1.0 - z);
            d_ac[i] = g * z * (1.0 - c * c);
            dh_prev[i] = g * (1.0 - z);
        }
        let rows = dh.rows();
        let cols = dh.cols();
        let d_az = Matrix::from_vec(rows, cols, d_az)?;
        let d_ac = Matrix::from_vec(rows, cols, d_ac)?;

        grads.gru.w_h.add_matmul_tn(&step.x, &d_ac)?;
        grads.gru.u_h.add_matmul_tn(&step.rh, &d_ac)?;
        add_col_sums(&mut grads.gru.b_h, &d_ac);
        let d_rh = d_ac.matmul(&u_ht)?;
        let rs = step.r.as_slice();
        let mut d_ar = vec![0.0; n];
        for i in 0..n {
            let g = d_rh.as_slice()[i];
            d_ar[i] = g * hs[i] * rs[i] * (1.0 - rs[i]);
            dh_prev[i] += g * rs[i];
        }
        let d_ar = Matrix::from_vec(rows, cols, d_ar)?;

        grads.gru.w_z.add_matmul_tn(&step.x, &d_az)?;
        grads.gru.u_z.add_matmul_tn(&step.h_prev, &d_az)?;
        add_col_sums(&mut grads.gru.b_z, &d_az);
        grads.gru.w_r.add_matmul_tn(&step.x, &d_ar)?;
        grads.gru.u_r.add_matmul_tn(&step.h_prev, &d_ar)?;
        add_col_sums(&mut grads.gru.b_r, &d_ar);

        let mut dh_prev = Matrix::from_vec(rows, cols, dh_prev)?;
        dh_prev.add_assign(&d_az.matmul(&u_zt)?)?;
        dh_prev.add_assign(&d_ar.matmul(&u_rt)?)?;

        let mut dx = d_ac.matmul(&w_ht)?;
        dx.add_assign(&d_az.matmul(&w_zt)?)?;
        dx.add_assign(&d_ar.matmul(&w_rt)?)?;

        // back through the graph convolutions of this timestep
        let mut d_out = dx;
        for l in (0..params.gcn_w.len()).rev() {
            let pre = &gstep.pre[l];
            for (g, &pv) in d_out.as_mut_slice().iter_mut().zip(pre.as_slice()) {
                if pv <= 0.0 {
                    *g = 0.0;
                }
            }
            grads.gcn_w[l].add_matmul_tn(&gstep.mixed[l], &d_out)?;
            add_col_sums(&mut grads.gcn_b[l], &d_out);
            if l > 0 {
                // Â is symmetric, so Âᵀ · g = Â · g
                d_out = spmm(adj.csr(), &d_out.matmul(&gcn_wt[l])?)?;
            }
        }
        dh = dh_prev;
    }
    Ok(())
}

fn add_col_sums(bias: &mut Matrix, g: &Matrix) {
    for (b, s) in bias.as_mut_slice().iter_mut().zip(g.col_sums()) {
        *b += s;
    }
}

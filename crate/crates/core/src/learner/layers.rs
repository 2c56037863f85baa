//! Forward and backward kernels on channel-major (CHW) activations.

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub(super) struct ConvPlan {
    pub in_c: usize,
    pub in_h: usize,
    pub in_w: usize,
    pub out_c: usize,
    pub out_h: usize,
    pub out_w: usize,
    pub k: usize,
    pub stride: usize,
    pub pad: usize,
    pub w_off: usize,
    pub b_off: usize,
}

impl ConvPlan {
    pub fn patch_len(&self) -> usize {
        self.in_c * self.k * self.k
    }

    pub fn positions(&self) -> usize {
        self.out_h * self.out_w
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub(super) struct PoolPlan {
    pub c: usize,
    pub in_h: usize,
    pub in_w: usize,
    pub out_h: usize,
    pub out_w: usize,
    pub size: usize,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub(super) struct FcPlan {
    pub n_in: usize,
    pub n_out: usize,
    pub w_off: usize,
    pub b_off: usize,
}

#[inline]
fn axpy(y: &mut [f64], a: f64, x: &[f64]) {
    for (y, x) in y.iter_mut().zip(x) {
        *y += a * x;
    }
}

#[inline]
fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

pub(super) fn im2col(p: &ConvPlan, input: &[f64], col: &mut Vec<f64>) {
    let (kk, np) = (p.patch_len(), p.positions());
    col.clear();
    col.resize(kk * np, 0.0);
    for c in 0..p.in_c {
        for ky in 0..p.k {
            for kx in 0..p.k {
                let row = &mut col[((c * p.k + ky) * p.k + kx) * np..][..np];
                for oy in 0..p.out_h {
                    let iy = (oy * p.stride + ky) as isize - p.pad as isize;
                    if iy < 0 || iy >= p.in_h as isize {
                        continue;
                    }
                    let line = &input[(c * p.in_h + iy as usize) * p.in_w..][..p.in_w];
                    for ox in 0..p.out_w {
                        let ix = (ox * p.stride + kx) as isize - p.pad as isize;
                        if ix >= 0 && ix < p.in_w as isize {
                            row[oy * p.out_w + ox] = line[ix as usize];
                        }
                    }
                }
            }
        }
    }
}

fn col2im_add(p: &ConvPlan, dcol: &[f64], dinput: &mut [f64]) {
    let np = p.positions();
    for c in 0..p.in_c {
        for ky in 0..p.k {
            for kx in 0..p.k {
                let row = &dcol[((c * p.k + ky) * p.k + kx) * np..][..np];
                for oy in 0..p.out_h {
                    let iy = (oy * p.stride + ky) as isize - p.pad as isize;
                    if iy < 0 || iy >= p.in_h as isize {
                        continue;
                    }
                    let base = (c * p.in_h + iy as usize) * p.in_w;
                    for ox in 0..p.out_w {
                        let ix = (ox * p.stride + kx) as isize - p.pad as isize;
                        if ix >= 0 && ix < p.in_w as isize {
                            dinput[base + ix as usize] += row[oy * p.out_w + ox];
                        }
                    }
                }
            }
        }
    }
}

/// Convolution followed by ReLU. `col` receives the im2col matrix for reuse
/// in the backward pass.
pub(super) fn conv_forward(p: &ConvPlan, params: &[f64], input: &[f64], col: &mut Vec<f64>) -> Vec<f64> {
    im2col(p, input, col);
    let (kk, np) = (p.patch_len(), p.positions());
    let weights = &params[p.w_off..p.w_off + p.out_c * kk];
    let mut out = vec![0.0; p.out_c * np];
    for oc in 0..p.out_c {
        let row = &mut out[oc * np..(oc + 1) * np];
        row.fill(params[p.b_off + oc]);
        for (j, &w) in weights[oc * kk..(oc + 1) * kk].iter().enumerate() {
            axpy(row, w, &col[j * np..(j + 1) * np]);
        }
        for v in row.iter_mut() {
            *v = v.max(0.0);
        }
    }
    out
}

/// Backward through ReLU and convolution. `output` is the post-ReLU output
/// of the forward pass; returns the gradient with respect to the input when
/// `need_input` is set.
pub(super) fn conv_backward(
    p: &ConvPlan,
    params: &[f64],
    col: &[f64],
    output: &[f64],
    dout: &[f64],
    grad: &mut [f64],
    need_input: bool,
) -> Option<Vec<f64>> {
    let (kk, np) = (p.patch_len(), p.positions());
    let mut dcol = if need_input { vec![0.0; kk * np] } else { Vec::new() };
    let mut g = vec![0.0; np];
    for oc in 0..p.out_c {
        let o = &output[oc * np..(oc + 1) * np];
        let d = &dout[oc * np..(oc + 1) * np];
        for i in 0..np {
            g[i] = if o[i] > 0.0 { d[i] } else { 0.0 };
        }
        grad[p.b_off + oc] += g.iter().sum::<f64>();
        let w_row = p.w_off + oc * kk;
        for j in 0..kk {
            grad[w_row + j] += dot(&g, &col[j * np..(j + 1) * np]);
        }
        if need_input {
            for j in 0..kk {
                let w = params[w_row + j];
                if w != 0.0 {
                    axpy(&mut dcol[j * np..(j + 1) * np], w, &g);
                }
            }
        }
    }
    need_input.then(|| {
        let mut dinput = vec![0.0; p.in_c * p.in_h * p.in_w];
        col2im_add(p, &dcol, &mut dinput);
        dinput
    })
}

/// Max pooling with a square window equal to its stride; `argmax` records the
/// winning input index per output (first maximum on ties).
pub(super) fn pool_forward(p: &PoolPlan, input: &[f64], argmax: &mut Vec<usize>) -> Vec<f64> {
    let mut out = Vec::with_capacity(p.c * p.out_h * p.out_w);
    argmax.clear();
    for c in 0..p.c {
        for oy in 0..p.out_h {
            for ox in 0..p.out_w {
                let mut best = usize::MAX;
                for dy in 0..p.size {
                    for dx in 0..p.size {
                        let i = (c * p.in_h + oy * p.size + dy) * p.in_w + ox * p.size + dx;
                        if best == usize::MAX || input[i] > input[best] {
                            best = i;
                        }
                    }
                }
                argmax.push(best);
                out.push(input[best]);
            }
        }
    }
    out
}

pub(super) fn pool_backward(p: &PoolPlan, argmax: &[usize], dout: &[f64]) -> Vec<f64> {
    let mut dinput = vec![0.0; p.c * p.in_h * p.in_w];
    for (&i, &d) in argmax.iter().zip(dout) {
        dinput[i] += d;
    }
    dinput
}

pub(super) fn fc_forward(p: &FcPlan, params: &[f64], x: &[f64]) -> Vec<f64> {
    (0..p.n_out)
        .map(|o| params[p.b_off + o] + dot(&params[p.w_off + o * p.n_in..][..p.n_in], x))
        .collect()
}

/// Fully connected backward for a whole batch: every weight row is visited
/// once per batch. Returns the input gradients per sample.
pub(super) fn fc_backward_batch(
    p: &FcPlan,
    params: &[f64],
    xs: &[&[f64]],
    dzs: &[Vec<f64>],
    grad: &mut [f64],
) -> Vec<Vec<f64>> {
    let mut dxs = vec![vec![0.0; p.n_in]; xs.len()];
    for o in 0..p.n_out {
        let w_row = &params[p.w_off + o * p.n_in..][..p.n_in];
        for (b, x) in xs.iter().enumerate() {
            let dz = dzs[b][o];
            if dz == 0.0 {
                continue;
            }
            grad[p.b_off + o] += dz;
            axpy(&mut grad[p.w_off + o * p.n_in..][..p.n_in], dz, x);
            axpy(&mut dxs[b], dz, w_row);
        }
    }
    dxs
}

//! The five weighted layer kinds plus activations and dropout, with exact
//! hand-derived backward passes.

use super::scalar::Scalar;
use super::tensor::{axpy, dot, Tensor};
use super::TensorError;
use crate::rng::RngStream;
use serde::{Deserialize, Serialize};

/// Forward-pass mode: dropout is active only in `Train`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Mode {
    Train,
    Eval,
}

/// Layer kind and hyperparameters.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum LayerSpec {
    /// Stride-1 cross-correlation over time with zero same-padding,
    /// `[channels, time] -> [filters, time]`. Even kernel widths pad one
    /// extra sample on the right.
    Conv1d { filters: usize, kernel: usize },
    /// Affine map on a rank-1 input.
    Dense { units: usize },
    /// Dense applied independently at each time step,
    /// `[channels, time] -> [time, units]`.
    TimeDense { units: usize },
    /// Standard LSTM with logistic gates and tanh cell candidate, zero
    /// initial state; emits the full sequence or the final hidden state.
    Lstm { cells: usize, return_sequences: bool },
    Relu,
    /// Exp-normalization with max subtraction, rank-1 input.
    Softmax,
    /// Inverted dropout: train mode zeroes each element with probability
    /// `ratio` and scales survivors by 1/(1-ratio); eval mode is identity.
    Dropout { ratio: f64 },
}

impl LayerSpec {
    pub fn is_weighted(&self) -> bool {
        matches!(
            self,
            LayerSpec::Conv1d { .. }
                | LayerSpec::Dense { .. }
                | LayerSpec::TimeDense { .. }
                | LayerSpec::Lstm { .. }
        )
    }

    pub fn validate(&self) -> Result<(), TensorError> {
        let bad = |msg: String| Err(TensorError::InvalidSpec(msg));
        match *self {
            LayerSpec::Conv1d { filters, kernel } if filters == 0 || kernel == 0 => {
                bad(format!("conv1d filters={filters}, kernel={kernel}"))
            }
            LayerSpec::Dense { units } | LayerSpec::TimeDense { units } if units == 0 => {
                bad("zero units".into())
            }
            LayerSpec::Lstm { cells: 0, .. } => bad("zero LSTM cells".into()),
            LayerSpec::Dropout { ratio } if !(0.0..1.0).contains(&ratio) => {
                bad(format!("dropout ratio {ratio} outside [0, 1)"))
            }
            _ => Ok(()),
        }
    }

    /// Output shape for a given input shape, or a shape error.
    pub fn output_shape(&self, input: &[usize]) -> Result<Vec<usize>, TensorError> {
        let mismatch = |context| {
            Err(TensorError::ShapeMismatch {
                context,
                expected: vec![],
                got: input.to_vec(),
            })
        };
        match *self {
            LayerSpec::Conv1d { filters, .. } => match input {
                [_, time] => Ok(vec![filters, *time]),
                _ => mismatch("conv1d expects [channels, time]"),
            },
            LayerSpec::Dense { units } => match input {
                [_] => Ok(vec![units]),
                _ => mismatch("dense expects a rank-1 input"),
            },
            LayerSpec::TimeDense { units } => match input {
                [_, time] => Ok(vec![*time, units]),
                _ => mismatch("time-dense expects [channels, time]"),
            },
            LayerSpec::Lstm {
                cells,
                return_sequences,
            } => match input {
                [time, _] => Ok(if return_sequences {
                    vec![*time, cells]
                } else {
                    vec![cells]
                }),
                _ => mismatch("lstm expects [time, features]"),
            },
            LayerSpec::Relu | LayerSpec::Dropout { .. } => Ok(input.to_vec()),
            LayerSpec::Softmax => match input {
                [_] => Ok(input.to_vec()),
                _ => mismatch("softmax expects a rank-1 input"),
            },
        }
    }
}

/// Named weight tensors of one layer.
#[derive(Debug, Clone, PartialEq)]
pub struct ParamSet<T> {
    entries: Vec<(String, Tensor<T>)>,
}

impl<T: Scalar> ParamSet<T> {
    pub fn empty() -> Self {
        ParamSet {
            entries: Vec::new(),
        }
    }

    pub fn insert(&mut self, name: &str, tensor: Tensor<T>) {
        debug_assert!(self.get(name).is_none(), "duplicate param {name}");
        self.entries.push((name.to_string(), tensor));
    }

    pub fn get(&self, name: &str) -> Option<&Tensor<T>> {
        self.entries
            .iter()
            .find(|(n, _)| n == name)
            .map(|(_, t)| t)
    }

    pub fn get_mut(&mut self, name: &str) -> Option<&mut Tensor<T>> {
        self.entries
            .iter_mut()
            .find(|(n, _)| n == name)
            .map(|(_, t)| t)
    }

    pub fn require(&self, name: &str) -> Result<&Tensor<T>, TensorError> {
        self.get(name)
            .ok_or_else(|| TensorError::MissingParam(name.to_string()))
    }

    pub fn iter(&self) -> impl Iterator<Item = (&str, &Tensor<T>)> {
        self.entries.iter().map(|(n, t)| (n.as_str(), t))
    }

    pub fn iter_mut(&mut self) -> impl Iterator<Item = (&str, &mut Tensor<T>)> {
        self.entries.iter_mut().map(|(n, t)| (n.as_str(), t))
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn param_count(&self) -> usize {
        self.entries.iter().map(|(_, t)| t.len()).sum()
    }

    /// Same names and shapes, all zeros.
    pub fn zeros_like(&self) -> Self {
        ParamSet {
            entries: self
                .entries
                .iter()
                .map(|(n, t)| (n.clone(), Tensor::zeros(t.shape())))
                .collect(),
        }
    }

    /// self += other, entrywise; shapes must agree.
    pub fn add_assign(&mut self, other: &ParamSet<T>) {
        debug_assert_eq!(self.entries.len(), other.entries.len());
        for ((_, a), (_, b)) in self.entries.iter_mut().zip(&other.entries) {
            axpy(a.data_mut(), T::ONE, b.data());
        }
    }

    pub fn scale(&mut self, factor: T) {
        for (_, t) in self.entries.iter_mut() {
            for v in t.data_mut() {
                *v *= factor;
            }
        }
    }
}

/// Opaque forward cache consumed by the matching backward call.
#[derive(Debug, Clone)]
pub struct LayerCache<T> {
    kind: CacheKind<T>,
}

#[derive(Debug, Clone)]
enum CacheKind<T> {
    Conv1d {
        input: Tensor<T>,
    },
    Dense {
        input: Tensor<T>,
    },
    TimeDense {
        input: Tensor<T>,
    },
    Lstm {
        input: Tensor<T>,
        gate_i: Tensor<T>,
        gate_f: Tensor<T>,
        gate_g: Tensor<T>,
        gate_o: Tensor<T>,
        cell: Tensor<T>,
        tanh_cell: Tensor<T>,
        hidden: Tensor<T>,
    },
    Relu {
        input: Tensor<T>,
    },
    Softmax {
        output: Tensor<T>,
    },
    Dropout {
        mask: Option<Tensor<T>>,
    },
}

fn same_padding(kernel: usize) -> (usize, usize) {
    let left = (kernel - 1) / 2;
    (left, kernel - 1 - left)
}

/// Output index range `[t0, t1)` for which `t + off` stays inside `0..time`.
#[inline]
fn conv_range(time: usize, off: isize) -> Option<(usize, usize)> {
    let t0 = (-off).max(0);
    let t1 = (time as isize).min(time as isize - off);
    if t0 < t1 {
        Some((t0 as usize, t1 as usize))
    } else {
        None
    }
}

/// Run one layer forward. Dropout draws its mask from `rng` in train mode;
/// other layers never touch it.
pub fn layer_forward<T: Scalar>(
    spec: &LayerSpec,
    params: &ParamSet<T>,
    input: &Tensor<T>,
    mode: Mode,
    rng: &mut RngStream,
) -> Result<(Tensor<T>, LayerCache<T>), TensorError> {
    spec.validate()?;
    let out_shape = spec.output_shape(input.shape())?;
    match spec {
        LayerSpec::Conv1d { filters, kernel } => {
            let (channels, time) = (input.shape()[0], input.shape()[1]);
            let w = params.require("kernel")?;
            let b = params.require("bias")?;
            expect_shape(w, &[*filters, channels, *kernel], "conv1d kernel")?;
            expect_shape(b, &[*filters], "conv1d bias")?;
            let (pad_l, _) = same_padding(*kernel);
            let mut out = Tensor::zeros(&out_shape);
            for f in 0..*filters {
                let bias = b.data()[f];
                let out_row = out.row_mut(f);
                for v in out_row.iter_mut() {
                    *v = bias;
                }
                for c in 0..channels {
                    let x_row = input.row(c);
                    for k in 0..*kernel {
                        let wv = w.data()[(f * channels + c) * kernel + k];
                        let off = k as isize - pad_l as isize;
                        let Some((t0, t1)) = conv_range(time, off) else {
                            continue;
                        };
                        let xs = &x_row
                            [(t0 as isize + off) as usize..(t1 as isize + off) as usize];
                        axpy(&mut out.row_mut(f)[t0..t1], wv, xs);
                    }
                }
            }
            Ok((
                out,
                LayerCache {
                    kind: CacheKind::Conv1d {
                        input: input.clone(),
                    },
                },
            ))
        }
        LayerSpec::Dense { units } => {
            let features = input.shape()[0];
            let w = params.require("weight")?;
            let b = params.require("bias")?;
            expect_shape(w, &[*units, features], "dense weight")?;
            expect_shape(b, &[*units], "dense bias")?;
            let mut out = Tensor::zeros(&out_shape);
            for u in 0..*units {
                out.data_mut()[u] = b.data()[u] + dot(w.row(u), input.data());
            }
            Ok((
                out,
                LayerCache {
                    kind: CacheKind::Dense {
                        input: input.clone(),
                    },
                },
            ))
        }
        LayerSpec::TimeDense { units } => {
            let (channels, time) = (input.shape()[0], input.shape()[1]);
            let w = params.require("weight")?;
            let b = params.require("bias")?;
            expect_shape(w, &[*units, channels], "time-dense weight")?;
            expect_shape(b, &[*units], "time-dense bias")?;
            let mut out = Tensor::zeros(&out_shape);
            let mut xt = vec![T::ZERO; channels];
            for t in 0..time {
                for (c, v) in xt.iter_mut().enumerate() {
                    *v = input.data()[c * time + t];
                }
                let row = out.row_mut(t);
                for u in 0..*units {
                    row[u] = b.data()[u] + dot(w.row(u), &xt);
                }
            }
            Ok((
                out,
                LayerCache {
                    kind: CacheKind::TimeDense {
                        input: input.clone(),
                    },
                },
            ))
        }
        LayerSpec::Lstm {
            cells,
            return_sequences,
        } => {
            let (time, features) = (input.shape()[0], input.shape()[1]);
            let h = *cells;
            let wx = params.require("w_input")?;
            let wh = params.require("w_recur")?;
            let b = params.require("bias")?;
            expect_shape(wx, &[4 * h, features], "lstm w_input")?;
            expect_shape(wh, &[4 * h, h], "lstm w_recur")?;
            expect_shape(b, &[4 * h], "lstm bias")?;

            let mut gate_i = Tensor::zeros(&[time, h]);
            let mut gate_f = Tensor::zeros(&[time, h]);
            let mut gate_g = Tensor::zeros(&[time, h]);
            let mut gate_o = Tensor::zeros(&[time, h]);
            let mut cell = Tensor::zeros(&[time, h]);
            let mut tanh_cell = Tensor::zeros(&[time, h]);
            let mut hidden = Tensor::zeros(&[time, h]);

            let mut pre = vec![T::ZERO; 4 * h];
            let zeros = vec![T::ZERO; h];
            for t in 0..time {
                let xt = input.row(t);
                // Split borrows: previous hidden row is read-only.
                let h_prev: &[T] = if t == 0 {
                    &zeros
                } else {
                    let cols = h;
                    &hidden.data()[(t - 1) * cols..t * cols]
                };
                let h_prev = h_prev.to_vec();
                for r in 0..4 * h {
                    pre[r] = b.data()[r] + dot(wx.row(r), xt) + dot(wh.row(r), &h_prev);
                }
                let c_prev: Vec<T> = if t == 0 {
                    zeros.clone()
                } else {
                    cell.row(t - 1).to_vec()
                };
                for u in 0..h {
                    let iv = pre[u].sigmoid();
                    let fv = pre[h + u].sigmoid();
                    let gv = pre[2 * h + u].tanh();
                    let ov = pre[3 * h + u].sigmoid();
                    let cv = fv * c_prev[u] + iv * gv;
                    let tc = cv.tanh();
                    gate_i.row_mut(t)[u] = iv;
                    gate_f.row_mut(t)[u] = fv;
                    gate_g.row_mut(t)[u] = gv;
                    gate_o.row_mut(t)[u] = ov;
                    cell.row_mut(t)[u] = cv;
                    tanh_cell.row_mut(t)[u] = tc;
                    hidden.row_mut(t)[u] = ov * tc;
                }
            }

            let out = if *return_sequences {
                hidden.clone()
            } else {
                Tensor::from_vec(&[h], hidden.row(time - 1).to_vec())?
            };
            Ok((
                out,
                LayerCache {
                    kind: CacheKind::Lstm {
                        input: input.clone(),
                        gate_i,
                        gate_f,
                        gate_g,
                        gate_o,
                        cell,
                        tanh_cell,
                        hidden,
                    },
                },
            ))
        }
        LayerSpec::Relu => {
            let out = input.map(|v| v.max_of(T::ZERO));
            Ok((
                out,
                LayerCache {
                    kind: CacheKind::Relu {
                        input: input.clone(),
                    },
                },
            ))
        }
        LayerSpec::Softmax => {
            let out = softmax(input);
            Ok((
                out.clone(),
                LayerCache {
                    kind: CacheKind::Softmax { output: out },
                },
            ))
        }
        LayerSpec::Dropout { ratio } => {
            if mode == Mode::Eval || *ratio == 0.0 {
                return Ok((
                    input.clone(),
                    LayerCache {
                        kind: CacheKind::Dropout { mask: None },
                    },
                ));
            }
            let keep_scale = T::from_f64(1.0 / (1.0 - ratio));
            let mut mask = Tensor::zeros(input.shape());
            for m in mask.data_mut() {
                *m = if rng.next_f64() < *ratio {
                    T::ZERO
                } else {
                    keep_scale
                };
            }
            let mut out = input.clone();
            for (o, m) in out.data_mut().iter_mut().zip(mask.data()) {
                *o *= *m;
            }
            Ok((
                out,
                LayerCache {
                    kind: CacheKind::Dropout { mask: Some(mask) },
                },
            ))
        }
    }
}

/// Numerically stable rank-1 softmax.
pub fn softmax<T: Scalar>(logits: &Tensor<T>) -> Tensor<T> {
    let max = logits
        .data()
        .iter()
        .fold(T::from_f64(f64::NEG_INFINITY), |m, &v| m.max_of(v));
    let mut out = logits.map(|v| (v - max).exp());
    let sum = out.data().iter().fold(T::ZERO, |s, &v| s + v);
    for v in out.data_mut() {
        *v = *v / sum;
    }
    out
}

/// Run one layer backward given its forward cache. Returns the gradient
/// with respect to the input and the parameter gradients (empty for
/// parameter-free layers).
pub fn layer_backward<T: Scalar>(
    spec: &LayerSpec,
    params: &ParamSet<T>,
    cache: &LayerCache<T>,
    grad_out: &Tensor<T>,
) -> Result<(Tensor<T>, ParamSet<T>), TensorError> {
    match (spec, &cache.kind) {
        (LayerSpec::Conv1d { filters, kernel }, CacheKind::Conv1d { input }) => {
            let (channels, time) = (input.shape()[0], input.shape()[1]);
            let w = params.require("kernel")?;
            expect_shape(grad_out, &[*filters, time], "conv1d grad_out")?;
            let (pad_l, _) = same_padding(*kernel);
            let mut grad_in = Tensor::zeros(input.shape());
            let mut gw = Tensor::zeros(&[*filters, channels, *kernel]);
            let mut gb = Tensor::zeros(&[*filters]);
            for f in 0..*filters {
                let go_row = grad_out.row(f);
                gb.data_mut()[f] = go_row.iter().fold(T::ZERO, |s, &v| s + v);
                for c in 0..channels {
                    let x_row = input.row(c);
                    for k in 0..*kernel {
                        let off = k as isize - pad_l as isize;
                        let Some((t0, t1)) = conv_range(time, off) else {
                            continue;
                        };
                        let shifted = (t0 as isize + off) as usize..(t1 as isize + off) as usize;
                        // d/dw[f,c,k] = sum_t go[f,t] x[c,t+off]
                        gw.data_mut()[(f * channels + c) * kernel + k] =
                            dot(&go_row[t0..t1], &x_row[shifted.clone()]);
                        // d/dx[c,t+off] += w go[f,t]
                        let wv = w.data()[(f * channels + c) * kernel + k];
                        axpy(
                            &mut grad_in.row_mut(c)[shifted],
                            wv,
                            &go_row[t0..t1],
                        );
                    }
                }
            }
            let mut gp = ParamSet::empty();
            gp.insert("kernel", gw);
            gp.insert("bias", gb);
            Ok((grad_in, gp))
        }
        (LayerSpec::Dense { units }, CacheKind::Dense { input }) => {
            let features = input.shape()[0];
            let w = params.require("weight")?;
            expect_shape(grad_out, &[*units], "dense grad_out")?;
            let mut grad_in = Tensor::zeros(input.shape());
            let mut gw = Tensor::zeros(&[*units, features]);
            let mut gb = Tensor::zeros(&[*units]);
            for u in 0..*units {
                let g = grad_out.data()[u];
                gb.data_mut()[u] = g;
                axpy(gw.row_mut(u), g, input.data());
                axpy(grad_in.data_mut(), g, w.row(u));
            }
            let mut gp = ParamSet::empty();
            gp.insert("weight", gw);
            gp.insert("bias", gb);
            Ok((grad_in, gp))
        }
        (LayerSpec::TimeDense { units }, CacheKind::TimeDense { input }) => {
            let (channels, time) = (input.shape()[0], input.shape()[1]);
            let w = params.require("weight")?;
            expect_shape(grad_out, &[time, *units], "time-dense grad_out")?;
            let mut grad_in = Tensor::zeros(input.shape());
            let mut gw = Tensor::zeros(&[*units, channels]);
            let mut gb = Tensor::zeros(&[*units]);
            let mut xt = vec![T::ZERO; channels];
            let mut gxt = vec![T::ZERO; channels];
            for t in 0..time {
                for (c, v) in xt.iter_mut().enumerate() {
                    *v = input.data()[c * time + t];
                }
                gxt.iter_mut().for_each(|v| *v = T::ZERO);
                let go_row = grad_out.row(t);
                for u in 0..*units {
                    let g = go_row[u];
                    gb.data_mut()[u] += g;
                    axpy(gw.row_mut(u), g, &xt);
                    axpy(&mut gxt, g, w.row(u));
                }
                for (c, v) in gxt.iter().enumerate() {
                    grad_in.data_mut()[c * time + t] = *v;
                }
            }
            let mut gp = ParamSet::empty();
            gp.insert("weight", gw);
            gp.insert("bias", gb);
            Ok((grad_in, gp))
        }
        (
            LayerSpec::Lstm {
                cells,
                return_sequences,
            },
            CacheKind::Lstm {
                input,
                gate_i,
                gate_f,
                gate_g,
                gate_o,
                cell,
                tanh_cell,
                hidden,
            },
        ) => {
            let (time, features) = (input.shape()[0], input.shape()[1]);
            let h = *cells;
            if *return_sequences {
                expect_shape(grad_out, &[time, h], "lstm grad_out")?;
            } else {
                expect_shape(grad_out, &[h], "lstm grad_out")?;
            }
            let wx = params.require("w_input")?;
            let wh = params.require("w_recur")?;

            let mut grad_in = Tensor::zeros(input.shape());
            let mut gwx = Tensor::zeros(&[4 * h, features]);
            let mut gwh = Tensor::zeros(&[4 * h, h]);
            let mut gb = Tensor::zeros(&[4 * h]);

            let zeros = vec![T::ZERO; h];
            let mut dh_rec = vec![T::ZERO; h];
            let mut dc_next = vec![T::ZERO; h];
            let mut dpre = vec![T::ZERO; 4 * h];
            for t in (0..time).rev() {
                let c_prev: &[T] = if t == 0 { &zeros } else { cell.row(t - 1) };
                let h_prev: &[T] = if t == 0 { &zeros } else { hidden.row(t - 1) };
                for u in 0..h {
                    let mut dh = dh_rec[u];
                    if *return_sequences {
                        dh += grad_out.row(t)[u];
                    } else if t == time - 1 {
                        dh += grad_out.data()[u];
                    }
                    let iv = gate_i.row(t)[u];
                    let fv = gate_f.row(t)[u];
                    let gv = gate_g.row(t)[u];
                    let ov = gate_o.row(t)[u];
                    let tc = tanh_cell.row(t)[u];

                    let dov = dh * tc;
                    let dc = dh * ov * (T::ONE - tc * tc) + dc_next[u];
                    let div = dc * gv;
                    let dfv = dc * c_prev[u];
                    let dgv = dc * iv;

                    dpre[u] = div * iv * (T::ONE - iv);
                    dpre[h + u] = dfv * fv * (T::ONE - fv);
                    dpre[2 * h + u] = dgv * (T::ONE - gv * gv);
                    dpre[3 * h + u] = dov * ov * (T::ONE - ov);

                    dc_next[u] = dc * fv;
                }
                let xt = input.row(t);
                dh_rec.iter_mut().for_each(|v| *v = T::ZERO);
                for r in 0..4 * h {
                    let g = dpre[r];
                    gb.data_mut()[r] += g;
                    axpy(gwx.row_mut(r), g, xt);
                    axpy(gwh.row_mut(r), g, h_prev);
                    axpy(grad_in.row_mut(t), g, wx.row(r));
                    axpy(&mut dh_rec, g, wh.row(r));
                }
            }
            let mut gp = ParamSet::empty();
            gp.insert("w_input", gwx);
            gp.insert("w_recur", gwh);
            gp.insert("bias", gb);
            Ok((grad_in, gp))
        }
        (LayerSpec::Relu, CacheKind::Relu { input }) => {
            expect_shape(grad_out, input.shape(), "relu grad_out")?;
            let mut grad_in = grad_out.clone();
            for (g, x) in grad_in.data_mut().iter_mut().zip(input.data()) {
                if !(*x > T::ZERO) {
                    *g = T::ZERO;
                }
            }
            Ok((grad_in, ParamSet::empty()))
        }
        (LayerSpec::Softmax, CacheKind::Softmax { output }) => {
            expect_shape(grad_out, output.shape(), "softmax grad_out")?;
            let s = dot(output.data(), grad_out.data());
            let mut grad_in = Tensor::zeros(output.shape());
            for ((gi, p), go) in grad_in
                .data_mut()
                .iter_mut()
                .zip(output.data())
                .zip(grad_out.data())
            {
                *gi = *p * (*go - s);
            }
            Ok((grad_in, ParamSet::empty()))
        }
        (LayerSpec::Dropout { .. }, CacheKind::Dropout { mask }) => {
            let mut grad_in = grad_out.clone();
            if let Some(mask) = mask {
                expect_shape(grad_out, mask.shape(), "dropout grad_out")?;
                for (g, m) in grad_in.data_mut().iter_mut().zip(mask.data()) {
                    *g *= *m;
                }
            }
            Ok((grad_in, ParamSet::empty()))
        }
        _ => Err(TensorError::CacheMismatch),
    }
}

fn expect_shape<T: Scalar>(
    tensor: &Tensor<T>,
    shape: &[usize],
    context: &'static str,
) -> Result<(), TensorError> {
    if tensor.shape() != shape {
        return Err(TensorError::ShapeMismatch {
            context,
            expected: shape.to_vec(),
            got: tensor.shape().to_vec(),
        });
    }
    Ok(())
}

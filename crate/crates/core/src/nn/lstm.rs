use rand::Rng;

use super::{gemm, NnError, Param, Parameterized, Scalar, Tensor3};

/// One direction of one LSTM layer. Gate rows are ordered
/// input, forget, cell candidate, output.
#[derive(Debug, Clone, PartialEq)]
pub struct LstmDirection<T> {
    /// `(4H, input)`
    pub w_ih: Param<T>,
    /// `(4H, H)`
    pub w_hh: Param<T>,
    /// `(4H)`
    pub bias: Param<T>,
    pub input: usize,
    pub hidden: usize,
}

/// Activations one direction keeps for backpropagation through time. All
/// buffers are time-major `(L, B, ·)`.
#[derive(Debug, Clone)]
pub struct DirCache<T> {
    x: Vec<T>,
    gates: Vec<T>,
    cells: Vec<T>,
    hs: Vec<T>,
    len: usize,
    batch: usize,
    reverse: bool,
}

#[inline]
fn sigmoid<T: Scalar>(x: T) -> T {
    T::one() / (T::one() + (-x).exp())
}

impl<T: Scalar> LstmDirection<T> {
    pub fn zeros(input: usize, hidden: usize) -> Self {
        Self {
            w_ih: Param::zeros(&[4 * hidden, input]),
            w_hh: Param::zeros(&[4 * hidden, hidden]),
            bias: Param::zeros(&[4 * hidden]),
            input,
            hidden,
        }
    }

    /// Uniform `±1/sqrt(fan_in)` per matrix; bias `±1/sqrt(hidden)`.
    pub fn uniform(input: usize, hidden: usize, rng: &mut impl Rng) -> Self {
        Self {
            w_ih: Param::uniform(&[4 * hidden, input], 1.0 / (input as f64).sqrt(), rng),
            w_hh: Param::uniform(&[4 * hidden, hidden], 1.0 / (hidden as f64).sqrt(), rng),
            bias: Param::uniform(&[4 * hidden], 1.0 / (hidden as f64).sqrt(), rng),
            input,
            hidden,
        }
    }

    fn step_index(len: usize, s: usize, reverse: bool) -> usize {
        if reverse {
            len - 1 - s
        } else {
            s
        }
    }

    /// Runs the recurrence over time-major `x` of shape `(len, batch, input)`
    /// from zero initial states; returns hidden states `(len, batch, H)`.
    pub fn forward(
        &self,
        x: &[T],
        len: usize,
        batch: usize,
        reverse: bool,
    ) -> (Vec<T>, DirCache<T>) {
        let h = self.hidden;
        let g4 = 4 * h;
        let rows = len * batch;
        let mut gates = vec![T::zero(); rows * g4];
        gemm(
            false,
            true,
            rows,
            g4,
            self.input,
            T::one(),
            x,
            &self.w_ih.value,
            T::zero(),
            &mut gates,
        );
        let mut cells = vec![T::zero(); rows * h];
        let mut hs = vec![T::zero(); rows * h];
        for s in 0..len {
            let t = Self::step_index(len, s, reverse);
            let cur = t * batch;
            if s > 0 {
                let p = Self::step_index(len, s - 1, reverse) * batch;
                let (h_prev, g_t) = (
                    &hs[p * h..(p + batch) * h],
                    &mut gates[cur * g4..(cur + batch) * g4],
                );
                gemm(
                    false,
                    true,
                    batch,
                    g4,
                    h,
                    T::one(),
                    h_prev,
                    &self.w_hh.value,
                    T::one(),
                    g_t,
                );
            }
            for b in 0..batch {
                let row = cur + b;
                let g = &mut gates[row * g4..(row + 1) * g4];
                for (v, &bias) in g.iter_mut().zip(&self.bias.value) {
                    *v += bias;
                }
                for j in 0..h {
                    g[j] = sigmoid(g[j]);
                    g[h + j] = sigmoid(g[h + j]);
                    g[2 * h + j] = g[2 * h + j].tanh();
                    g[3 * h + j] = sigmoid(g[3 * h + j]);
                }
                let c_prev = if s > 0 {
                    let p = Self::step_index(len, s - 1, reverse) * batch + b;
                    Some(p)
                } else {
                    None
                };
                for j in 0..h {
                    let cp = c_prev.map_or(T::zero(), |p| cells[p * h + j]);
                    let c = g[h + j] * cp + g[j] * g[2 * h + j];
                    cells[row * h + j] = c;
                    hs[row * h + j] = g[3 * h + j] * c.tanh();
                }
            }
        }
        let out = hs.clone();
        (
            out,
            DirCache {
                x: x.to_vec(),
                gates,
                cells,
                hs,
                len,
                batch,
                reverse,
            },
        )
    }

    /// Backpropagation through time. Accumulates parameter gradients and
    /// returns the input gradient `(len, batch, input)`.
    pub fn backward(&mut self, cache: &DirCache<T>, dh_all: &[T]) -> Vec<T> {
        let h = self.hidden;
        let g4 = 4 * h;
        let (len, batch) = (cache.len, cache.batch);
        let rows = len * batch;
        let mut dgates = vec![T::zero(); rows * g4];
        let mut h_prev_all = vec![T::zero(); rows * h];
        let mut dh_next = vec![T::zero(); batch * h];
        let mut dc_next = vec![T::zero(); batch * h];
        for s in (0..len).rev() {
            let t = Self::step_index(len, s, cache.reverse);
            let prev = (s > 0).then(|| Self::step_index(len, s - 1, cache.reverse));
            for b in 0..batch {
                let row = t * batch + b;
                let g = &cache.gates[row * g4..(row + 1) * g4];
                let dg = &mut dgates[row * g4..(row + 1) * g4];
                for j in 0..h {
                    let (i, f, gg, o) = (g[j], g[h + j], g[2 * h + j], g[3 * h + j]);
                    let c = cache.cells[row * h + j];
                    let tc = c.tanh();
                    let dh = dh_all[row * h + j] + dh_next[b * h + j];
                    let d_o = dh * tc;
                    let dc = dh * o * (T::one() - tc * tc) + dc_next[b * h + j];
                    let c_prev = prev.map_or(T::zero(), |p| cache.cells[(p * batch + b) * h + j]);
                    dg[j] = dc * gg * i * (T::one() - i);
                    dg[h + j] = dc * c_prev * f * (T::one() - f);
                    dg[2 * h + j] = dc * i * (T::one() - gg * gg);
                    dg[3 * h + j] = d_o * o * (T::one() - o);
                    dc_next[b * h + j] = dc * f;
                }
                if let Some(p) = prev {
                    let src = &cache.hs[(p * batch + b) * h..(p * batch + b + 1) * h];
                    h_prev_all[row * h..(row + 1) * h].copy_from_slice(src);
                }
            }
            if s > 0 {
                let dg_t = &dgates[t * batch * g4..(t + 1) * batch * g4];
                gemm(
                    false,
                    false,
                    batch,
                    h,
                    g4,
                    T::one(),
                    dg_t,
                    &self.w_hh.value,
                    T::zero(),
                    &mut dh_next,
                );
            }
        }
        gemm(
            true,
            false,
            g4,
            self.input,
            rows,
            T::one(),
            &dgates,
            &cache.x,
            T::one(),
            &mut self.w_ih.grad,
        );
        gemm(
            true,
            false,
            g4,
            h,
            rows,
            T::one(),
            &dgates,
            &h_prev_all,
            T::one(),
            &mut self.w_hh.grad,
        );
        for row in dgates.chunks(g4) {
            for (gb, &d) in self.bias.grad.iter_mut().zip(row) {
                *gb += d;
            }
        }
        let mut dx = vec![T::zero(); rows * self.input];
        gemm(
            false,
            false,
            rows,
            self.input,
            g4,
            T::one(),
            &dgates,
            &self.w_ih.value,
            T::zero(),
            &mut dx,
        );
        dx
    }

    pub fn cast<U: Scalar>(&self) -> LstmDirection<U> {
        LstmDirection {
            w_ih: self.w_ih.cast(),
            w_hh: self.w_hh.cast(),
            bias: self.bias.cast(),
            input: self.input,
            hidden: self.hidden,
        }
    }
}

impl<T: Scalar> Parameterized<T> for LstmDirection<T> {
    fn visit_params(&mut self, f: &mut dyn FnMut(&str, &mut Param<T>)) {
        f("w_ih", &mut self.w_ih);
        f("w_hh", &mut self.w_hh);
        f("bias", &mut self.bias);
    }
}

/// Stacked bidirectional LSTM; each layer's output is the forward and
/// backward hidden states concatenated (`2H` features).
#[derive(Debug, Clone, PartialEq)]
pub struct BiLstm<T> {
    /// `[forward, backward]` per layer.
    pub layers: Vec<[LstmDirection<T>; 2]>,
}

#[derive(Debug, Clone)]
pub struct LstmCache<T> {
    layers: Vec<[DirCache<T>; 2]>,
    batch: usize,
    len: usize,
}

impl<T: Scalar> BiLstm<T> {
    pub fn uniform(input: usize, hidden: usize, num_layers: usize, rng: &mut impl Rng) -> Self {
        let layers = (0..num_layers)
            .map(|l| {
                let inp = if l == 0 { input } else { 2 * hidden };
                [
                    LstmDirection::uniform(inp, hidden, rng),
                    LstmDirection::uniform(inp, hidden, rng),
                ]
            })
            .collect();
        Self { layers }
    }

    pub fn zeros(input: usize, hidden: usize, num_layers: usize) -> Self {
        let layers = (0..num_layers)
            .map(|l| {
                let inp = if l == 0 { input } else { 2 * hidden };
                [
                    LstmDirection::zeros(inp, hidden),
                    LstmDirection::zeros(inp, hidden),
                ]
            })
            .collect();
        Self { layers }
    }

    pub fn input_size(&self) -> usize {
        self.layers.first().map_or(0, |l| l[0].input)
    }

    pub fn hidden(&self) -> usize {
        self.layers.first().map_or(0, |l| l[0].hidden)
    }

    /// `(B, input, L)` → `(B, 2H, L)`.
    pub fn forward(&self, x: &Tensor3<T>) -> Result<(Tensor3<T>, LstmCache<T>), NnError> {
        let (batch, channels, len) = x.dims();
        if channels != self.input_size() {
            return Err(NnError::Shape(format!(
                "bilstm expects {} features, got {channels}",
                self.input_size()
            )));
        }
        let h = self.hidden();
        let mut cur = x.to_time_major();
        let mut caches = Vec::with_capacity(self.layers.len());
        for [fwd, bwd] in &self.layers {
            let (hf, cf) = fwd.forward(&cur, len, batch, false);
            let (hb, cb) = bwd.forward(&cur, len, batch, true);
            let mut out = vec![T::zero(); len * batch * 2 * h];
            for row in 0..len * batch {
                out[row * 2 * h..row * 2 * h + h].copy_from_slice(&hf[row * h..(row + 1) * h]);
                out[row * 2 * h + h..(row + 1) * 2 * h]
                    .copy_from_slice(&hb[row * h..(row + 1) * h]);
            }
            caches.push([cf, cb]);
            cur = out;
        }
        Ok((
            Tensor3::from_time_major(&cur, batch, 2 * h, len),
            LstmCache {
                layers: caches,
                batch,
                len,
            },
        ))
    }

    pub fn backward(
        &mut self,
        cache: &LstmCache<T>,
        dy: &Tensor3<T>,
    ) -> Result<Tensor3<T>, NnError> {
        let h = self.hidden();
        let (batch, len) = (cache.batch, cache.len);
        if dy.dims() != (batch, 2 * h, len) {
            return Err(NnError::Shape(format!(
                "bilstm output grad has dims {:?}",
                dy.dims()
            )));
        }
        let mut d = dy.to_time_major();
        for ([fwd, bwd], [cf, cb]) in self.layers.iter_mut().zip(&cache.layers).rev() {
            let rows = len * batch;
            let mut dhf = vec![T::zero(); rows * h];
            let mut dhb = vec![T::zero(); rows * h];
            for row in 0..rows {
                dhf[row * h..(row + 1) * h].copy_from_slice(&d[row * 2 * h..row * 2 * h + h]);
                dhb[row * h..(row + 1) * h].copy_from_slice(&d[row * 2 * h + h..(row + 1) * 2 * h]);
            }
            let mut dx = fwd.backward(cf, &dhf);
            for (a, b) in dx.iter_mut().zip(bwd.backward(cb, &dhb)) {
                *a += b;
            }
            d = dx;
        }
        Ok(Tensor3::from_time_major(&d, batch, self.input_size(), len))
    }

    /// Runs a single sequence of feature vectors.
    pub fn forward_sequence(&self, seq: &[Vec<T>]) -> Result<Vec<Vec<T>>, NnError> {
        if seq.is_empty() {
            return Ok(Vec::new());
        }
        let c = self.input_size();
        let mut x = Tensor3::zeros(1, c, seq.len());
        for (t, v) in seq.iter().enumerate() {
            if v.len() != c {
                return Err(NnError::Shape(format!(
                    "step {t} has {} features, expected {c}",
                    v.len()
                )));
            }
            for (ci, &val) in v.iter().enumerate() {
                *x.at_mut(0, ci, t) = val;
            }
        }
        let (y, _) = self.forward(&x)?;
        Ok((0..seq.len())
            .map(|t| (0..y.channels()).map(|ci| y.at(0, ci, t)).collect())
            .collect())
    }

    pub fn cast<U: Scalar>(&self) -> BiLstm<U> {
        BiLstm {
            layers: self
                .layers
                .iter()
                .map(|[f, b]| [f.cast(), b.cast()])
                .collect(),
        }
    }
}

impl<T: Scalar> Parameterized<T> for BiLstm<T> {
    fn visit_params(&mut self, f: &mut dyn FnMut(&str, &mut Param<T>)) {
        for (l, dirs) in self.layers.iter_mut().enumerate() {
            for (d, dir) in dirs.iter_mut().enumerate() {
                let tag = if d == 0 { "fwd" } else { "bwd" };
                dir.visit_params(&mut |name, p| f(&format!("l{l}.{tag}.{name}"), p));
            }
        }
    }
}

//! Dynamic pointer network: pointwise static/dynamic encoders and a GRU +
//! attention decoder that emits a permutation of the input cities.
//!
//! Two implementations of the same forward pass live here. [`Actor::rollout`]
//! records onto an autodiff [`Tape`] and is used for training;
//! [`Encoded`] plus [`Actor::decode_step`] is a tape-free path with the
//! static projections hoisted out of the decode loop, used for inference.

use rand::Rng as _;
use serde::{Deserialize, Serialize};

use crate::autodiff::{ParamId, ParamSet, Tape, Tensor, Var};
use crate::error::{Error, Result};
use crate::instance::{euclid, DistanceMatrix};
use crate::rng::Rng;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct ActorConfig {
    /// Embedding / GRU width.
    pub hidden: usize,
    /// When false the dynamic distance feature is held at zero (ablation).
    pub dynamic: bool,
}

impl Default for ActorConfig {
    fn default() -> Self {
        ActorConfig {
            hidden: 128,
            dynamic: true,
        }
    }
}

/// Parameter initialisation range.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Init {
    /// Uniform on [-1, 1].
    #[default]
    Unit,
    /// Uniform on [-1/√fan_in, 1/√fan_in].
    FanIn,
}

impl Init {
    pub(crate) fn bound(self, fan_in: usize) -> f64 {
        match self {
            Init::Unit => 1.0,
            Init::FanIn => 1.0 / (fan_in as f64).sqrt(),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum DecodeMode {
    Greedy,
    Sample,
}

#[derive(Clone, Copy, Debug)]
struct GruIds {
    w_ir: ParamId,
    w_iz: ParamId,
    w_in: ParamId,
    w_hr: ParamId,
    w_hz: ParamId,
    w_hn: ParamId,
    b_ir: ParamId,
    b_iz: ParamId,
    b_in: ParamId,
    b_hr: ParamId,
    b_hz: ParamId,
    b_hn: ParamId,
}

#[derive(Clone, Copy, Debug)]
struct ActorIds {
    static_w: ParamId,
    static_b: ParamId,
    dynamic_w: ParamId,
    dynamic_b: ParamId,
    gru: GruIds,
    attn_w: ParamId,
    attn_v: ParamId,
    ptr_w: ParamId,
    ptr_v: ParamId,
}

/// Name, shape (rows, cols) and fan-in of every actor tensor for width `d`.
///
/// Row-vector convention: a layer maps `x (1×in)` to `x · W (1×out)`, so the
/// attention matrix `W_a` acting on `[s̄; d̄_t; h_t]` is stored as `3d × d`.
pub fn actor_layout(d: usize) -> Vec<(&'static str, usize, usize, usize)> {
    vec![
        ("static.w", 2, d, 2),
        ("static.b", 1, d, 2),
        ("dynamic.w", 1, d, 1),
        ("dynamic.b", 1, d, 1),
        ("gru.w_ir", d, d, d),
        ("gru.w_iz", d, d, d),
        ("gru.w_in", d, d, d),
        ("gru.w_hr", d, d, d),
        ("gru.w_hz", d, d, d),
        ("gru.w_hn", d, d, d),
        ("gru.b_ir", 1, d, d),
        ("gru.b_iz", 1, d, d),
        ("gru.b_in", 1, d, d),
        ("gru.b_hr", 1, d, d),
        ("gru.b_hz", 1, d, d),
        ("gru.b_hn", 1, d, d),
        ("attn.w", 3 * d, d, 3 * d),
        ("attn.v", d, 1, d),
        ("ptr.w", 2 * d, d, 2 * d),
        ("ptr.v", d, 1, d),
    ]
}

/// Checks that `params` holds exactly the tensors of `layout`, with matching
/// shapes, in order.
pub(crate) fn check_layout(
    params: &ParamSet,
    layout: &[(&'static str, usize, usize, usize)],
    what: &str,
) -> Result<()> {
    if params.len() != layout.len() {
        return Err(Error::Checkpoint(format!(
            "{what} has {} tensors, expected {}",
            params.len(),
            layout.len()
        )));
    }
    for (&(name, r, c, _), (_, p)) in layout.iter().zip(params.iter()) {
        if p.name != name {
            return Err(Error::Checkpoint(format!(
                "{what}: expected tensor `{name}`, found `{}`",
                p.name
            )));
        }
        if p.value.shape() != [r, c] {
            return Err(Error::Checkpoint(format!(
                "{what}: tensor `{name}` has shape {:?}, expected [{r}, {c}]",
                p.value.shape()
            )));
        }
    }
    Ok(())
}

/// The actor network θ.
#[derive(Clone, Debug)]
pub struct Actor {
    pub config: ActorConfig,
    pub params: ParamSet,
    ids: ActorIds,
}

/// Normalised distance feature: `(max − e_i) / (max − min)`, all zeros when
/// every distance is equal. The nearest city maps to 1, the farthest to 0.
pub fn dynamic_feature(dist_row: &[f64]) -> Vec<f64> {
    let max = dist_row.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let min = dist_row.iter().copied().fold(f64::INFINITY, f64::min);
    let span = max - min;
    if span.is_nan() || span <= 0.0 {
        return vec![0.0; dist_row.len()];
    }
    dist_row.iter().map(|e| (max - e) / span).collect()
}

/// Mutable decoding state for the tape-free path.
#[derive(Clone, Debug, PartialEq)]
pub struct DecoderState {
    pub hidden: Vec<f64>,
    pub visited: Vec<bool>,
    pub last: Option<usize>,
    pub log_prob: f64,
    pub steps: usize,
}

impl DecoderState {
    pub fn new(n: usize, hidden: usize) -> Self {
        DecoderState {
            hidden: vec![0.0; hidden],
            visited: vec![false; n],
            last: None,
            log_prob: 0.0,
            steps: 0,
        }
    }

    /// Marks `city` as chosen with probability `p`.
    pub fn advance(&mut self, city: usize, p: f64) {
        debug_assert!(!self.visited[city]);
        self.visited[city] = true;
        self.last = Some(city);
        self.log_prob += p.ln();
        self.steps += 1;
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct DecodedTour {
    pub order: Vec<usize>,
    pub step_log_probs: Vec<f64>,
    pub log_prob: f64,
}

/// Per-instance encoder outputs for the tape-free path.
#[derive(Clone, Debug)]
pub struct Encoded {
    n: usize,
    /// s̄, n × d.
    pub static_emb: Vec<f64>,
    /// s̄ · W_a[static block], n × d.
    static_attn: Vec<f64>,
    /// s̄ · W_c[static block], n × d.
    static_ptr: Vec<f64>,
    dist: DistanceMatrix,
}

impl Encoded {
    pub fn len(&self) -> usize {
        self.n
    }

    pub fn is_empty(&self) -> bool {
        self.n == 0
    }

    pub fn distances(&self) -> &DistanceMatrix {
        &self.dist
    }
}

#[inline]
fn sigmoid(x: f64) -> f64 {
    1.0 / (1.0 + (-x).exp())
}

/// `out[j] = bias[j] + Σ_i x[i] · w[i, j]` for `w` stored row-major with
/// `out.len()` columns.
fn vec_mat(x: &[f64], w: &[f64], bias: Option<&[f64]>, out: &mut [f64]) {
    let n = out.len();
    match bias {
        Some(b) => out.copy_from_slice(b),
        None => out.iter_mut().for_each(|v| *v = 0.0),
    }
    for (i, &xi) in x.iter().enumerate() {
        if xi == 0.0 {
            continue;
        }
        for (o, wv) in out.iter_mut().zip(&w[i * n..(i + 1) * n]) {
            *o += xi * wv;
        }
    }
}

/// Rows `r0..r0 + d` of a row-major matrix with `d` columns.
fn block(w: &[f64], r0: usize, d: usize) -> &[f64] {
    &w[r0 * d..(r0 + d) * d]
}

impl Actor {
    pub fn new(config: ActorConfig, init: Init, rng: &mut Rng) -> Self {
        let mut params = ParamSet::new();
        for (name, r, c, fan_in) in actor_layout(config.hidden) {
            params.add_uniform(name, r, c, init.bound(fan_in), rng);
        }
        Self::from_params(config, params).expect("layout is consistent")
    }

    pub fn from_params(config: ActorConfig, params: ParamSet) -> Result<Self> {
        check_layout(&params, &actor_layout(config.hidden), "actor")?;
        let id = |n: &str| params.id(n).expect("checked layout");
        let ids = ActorIds {
            static_w: id("static.w"),
            static_b: id("static.b"),
            dynamic_w: id("dynamic.w"),
            dynamic_b: id("dynamic.b"),
            gru: GruIds {
                w_ir: id("gru.w_ir"),
                w_iz: id("gru.w_iz"),
                w_in: id("gru.w_in"),
                w_hr: id("gru.w_hr"),
                w_hz: id("gru.w_hz"),
                w_hn: id("gru.w_hn"),
                b_ir: id("gru.b_ir"),
                b_iz: id("gru.b_iz"),
                b_in: id("gru.b_in"),
                b_hr: id("gru.b_hr"),
                b_hz: id("gru.b_hz"),
                b_hn: id("gru.b_hn"),
            },
            attn_w: id("attn.w"),
            attn_v: id("attn.v"),
            ptr_w: id("ptr.w"),
            ptr_v: id("ptr.v"),
        };
        Ok(Actor { config, params, ids })
    }

    pub fn hidden(&self) -> usize {
        self.config.hidden
    }

    fn p(&self, id: ParamId) -> &[f64] {
        self.params.get(id).data()
    }

    /// Static embedding s̄ (n × d): the shared pointwise map applied to each
    /// coordinate pair.
    pub fn static_embed(&self, coords: &[[f64; 2]]) -> Tensor {
        let d = self.hidden();
        let mut out = vec![0.0; coords.len() * d];
        let (w, b) = (self.p(self.ids.static_w), self.p(self.ids.static_b));
        for (row, c) in out.chunks_mut(d).zip(coords) {
            vec_mat(c, w, Some(b), row);
        }
        Tensor::new(coords.len(), d, out).expect("non-empty coords")
    }

    /// Dynamic embedding d̄ (n × d) of a normalised feature row.
    pub fn dynamic_embed(&self, feature: &[f64]) -> Tensor {
        let d = self.hidden();
        let mut out = vec![0.0; feature.len() * d];
        let (w, b) = (self.p(self.ids.dynamic_w), self.p(self.ids.dynamic_b));
        for (row, &f) in out.chunks_mut(d).zip(feature) {
            vec_mat(&[f], w, Some(b), row);
        }
        Tensor::new(feature.len(), d, out).expect("non-empty feature")
    }

    /// Runs the encoder and the static halves of the attention/pointer
    /// projections once per instance.
    pub fn encode(&self, coords: &[[f64; 2]]) -> Result<Encoded> {
        if coords.is_empty() {
            return Err(Error::InvalidArgument("cannot encode zero cities".into()));
        }
        let d = self.hidden();
        let n = coords.len();
        let static_emb = self.static_embed(coords).into_data();
        let wa = self.p(self.ids.attn_w);
        let wc = self.p(self.ids.ptr_w);
        let mut static_attn = vec![0.0; n * d];
        let mut static_ptr = vec![0.0; n * d];
        for i in 0..n {
            let s = &static_emb[i * d..(i + 1) * d];
            vec_mat(s, block(wa, 0, d), None, &mut static_attn[i * d..(i + 1) * d]);
            vec_mat(s, block(wc, 0, d), None, &mut static_ptr[i * d..(i + 1) * d]);
        }
        Ok(Encoded {
            n,
            static_emb,
            static_attn,
            static_ptr,
            dist: DistanceMatrix::from_coords(coords),
        })
    }

    fn gru_cell(&self, x: &[f64], h: &[f64]) -> Vec<f64> {
        let d = self.hidden();
        let g = &self.ids.gru;
        let lin = |wi: ParamId, bi: ParamId, wh: ParamId, bh: ParamId| {
            let mut a = vec![0.0; d];
            let mut b = vec![0.0; d];
            vec_mat(x, self.p(wi), Some(self.p(bi)), &mut a);
            vec_mat(h, self.p(wh), Some(self.p(bh)), &mut b);
            (a, b)
        };
        let (xr, hr) = lin(g.w_ir, g.b_ir, g.w_hr, g.b_hr);
        let (xz, hz) = lin(g.w_iz, g.b_iz, g.w_hz, g.b_hz);
        let (xn, hn) = lin(g.w_in, g.b_in, g.w_hn, g.b_hn);
        (0..d)
            .map(|j| {
                let r = sigmoid(xr[j] + hr[j]);
                let z = sigmoid(xz[j] + hz[j]);
                let nn = (xn[j] + r * hn[j]).tanh();
                nn + z * (h[j] - nn)
            })
            .collect()
    }

    /// Feature row for the current step: distances from the last chosen city,
    /// or zeros before any choice (and always zeros with the ablation flag).
    pub fn step_feature(&self, enc: &Encoded, last: Option<usize>) -> Vec<f64> {
        match last {
            Some(c) if self.config.dynamic => dynamic_feature(enc.dist.row(c)),
            _ => vec![0.0; enc.n],
        }
    }

    /// One decoder step on the tape-free path. Updates `state.hidden` and
    /// returns the selection distribution (zero on visited cities).
    pub fn decode_step(&self, state: &mut DecoderState, enc: &Encoded, feature: &[f64]) -> Result<Vec<f64>> {
        let (n, d) = (enc.n, self.hidden());
        if state.visited.iter().all(|&v| v) {
            return Err(Error::InvalidArgument("decode_step: every city is masked".into()));
        }
        if feature.len() != n || state.visited.len() != n {
            return Err(Error::Shape {
                op: "decode_step",
                lhs: vec![n],
                rhs: vec![feature.len(), state.visited.len()],
            });
        }
        let input: &[f64] = match state.last {
            Some(c) => &enc.static_emb[c * d..(c + 1) * d],
            None => self.p(self.ids.static_b),
        };
        state.hidden = self.gru_cell(input, &state.hidden);

        let wa = self.p(self.ids.attn_w);
        let mut h_proj = vec![0.0; d];
        vec_mat(&state.hidden, block(wa, 2 * d, d), None, &mut h_proj);
        let dw = self.dynamic_embed(feature);
        let va = self.p(self.ids.attn_v);
        let mut dyn_proj = vec![0.0; d];
        let mut u = vec![0.0; n];
        for i in 0..n {
            vec_mat(dw.row_slice(i), block(wa, d, d), None, &mut dyn_proj);
            let sa = &enc.static_attn[i * d..(i + 1) * d];
            u[i] = (0..d).map(|j| va[j] * (sa[j] + dyn_proj[j] + h_proj[j]).tanh()).sum();
        }
        let attn = softmax(&u, None);
        let mut context = vec![0.0; d];
        for i in 0..n {
            let s = &enc.static_emb[i * d..(i + 1) * d];
            for (c, sv) in context.iter_mut().zip(s) {
                *c += attn[i] * sv;
            }
        }
        let wc = self.p(self.ids.ptr_w);
        let mut c_proj = vec![0.0; d];
        vec_mat(&context, block(wc, d, d), None, &mut c_proj);
        let vc = self.p(self.ids.ptr_v);
        let logits: Vec<f64> = (0..n)
            .map(|i| {
                let sp = &enc.static_ptr[i * d..(i + 1) * d];
                (0..d).map(|j| vc[j] * (sp[j] + c_proj[j]).tanh()).sum()
            })
            .collect();
        Ok(softmax(&logits, Some(&state.visited)))
    }

    /// Decodes a full permutation of `coords`.
    pub fn decode_tour(&self, coords: &[[f64; 2]], mode: DecodeMode, rng: &mut Rng) -> Result<DecodedTour> {
        let enc = self.encode(coords)?;
        self.decode_encoded(&enc, mode, rng)
    }

    pub fn decode_encoded(&self, enc: &Encoded, mode: DecodeMode, rng: &mut Rng) -> Result<DecodedTour> {
        let n = enc.n;
        let mut state = DecoderState::new(n, self.hidden());
        let mut order = Vec::with_capacity(n);
        let mut step_log_probs = Vec::with_capacity(n);
        for _ in 0..n {
            let feature = self.step_feature(enc, state.last);
            let probs = self.decode_step(&mut state, enc, &feature)?;
            let city = match mode {
                DecodeMode::Greedy => argmax(&probs),
                DecodeMode::Sample => sample(&probs, rng),
            };
            step_log_probs.push(probs[city].ln());
            state.advance(city, probs[city]);
            order.push(city);
        }
        Ok(DecodedTour {
            order,
            step_log_probs,
            log_prob: state.log_prob,
        })
    }

    /// Greedy decode of the depot-first city subset `coords`, rotated so the
    /// closed tour starts at position 0. Returns the visiting order of
    /// positions `1..n`.
    pub fn route_from_depot(&self, coords: &[[f64; 2]]) -> Result<Vec<usize>> {
        if coords.len() <= 1 {
            return Ok(Vec::new());
        }
        let mut rng = crate::rng::seeded(0);
        let decoded = self.decode_tour(coords, DecodeMode::Greedy, &mut rng)?;
        Ok(rotate_to_start(&decoded.order, 0))
    }

    /// Tape-recorded rollout. With `forced` the tour is teacher-forced;
    /// otherwise cities are chosen according to `mode`. Dropout on the GRU
    /// output is applied when `dropout > 0`.
    pub fn rollout(
        &self,
        tape: &mut Tape,
        coords: &[[f64; 2]],
        mode: DecodeMode,
        forced: Option<&[usize]>,
        dropout: f64,
        rng: &mut Rng,
    ) -> Result<TapeRollout> {
        let n = coords.len();
        let d = self.hidden();
        if n == 0 {
            return Err(Error::InvalidArgument("cannot decode zero cities".into()));
        }
        if let Some(f) = forced {
            if f.len() != n {
                return Err(Error::InvalidArgument(format!(
                    "forced tour has {} cities, instance has {n}",
                    f.len()
                )));
            }
        }
        let ids = self.ids;
        let g = ids.gru;
        let par = |tape: &mut Tape, id| tape.param(&self.params, id);

        let x = tape.constant(Tensor::new(n, 2, coords.iter().flatten().copied().collect())?);
        let (sw, sb) = (par(tape, ids.static_w), par(tape, ids.static_b));
        let s_bar = tape.pointwise(x, sw, sb)?;
        let zero = tape.constant(Tensor::zeros(1, 2));
        let s_zero = tape.pointwise(zero, sw, sb)?;
        let (dw, db) = (par(tape, ids.dynamic_w), par(tape, ids.dynamic_b));
        let gw = [g.w_ir, g.w_iz, g.w_in, g.w_hr, g.w_hz, g.w_hn].map(|id| par(tape, id));
        let gb = [g.b_ir, g.b_iz, g.b_in, g.b_hr, g.b_hz, g.b_hn].map(|id| par(tape, id));
        let wa = par(tape, ids.attn_w);
        let wa_s = tape.slice_rows(wa, 0, d)?;
        let wa_d = tape.slice_rows(wa, d, 2 * d)?;
        let wa_h = tape.slice_rows(wa, 2 * d, 3 * d)?;
        let va = par(tape, ids.attn_v);
        let wc = par(tape, ids.ptr_w);
        let wc_s = tape.slice_rows(wc, 0, d)?;
        let wc_c = tape.slice_rows(wc, d, 2 * d)?;
        let vc = par(tape, ids.ptr_v);

        let static_attn = tape.matmul(s_bar, wa_s)?;
        let static_ptr = tape.matmul(s_bar, wc_s)?;
        let dist = DistanceMatrix::from_coords(coords);

        let mut h = tape.constant(Tensor::zeros(1, d));
        let mut visited = vec![false; n];
        let mut last: Option<usize> = None;
        let mut tour = Vec::with_capacity(n);
        let mut step_log_probs = Vec::with_capacity(n);
        let mut chosen_logps = Vec::with_capacity(n);

        for t in 0..n {
            let input = match last {
                Some(c) => tape.gather_rows(s_bar, &[c])?,
                None => s_zero,
            };
            // GRU cell
            let r_x = tape.linear(input, gw[0], Some(gb[0]))?;
            let r_h = tape.linear(h, gw[3], Some(gb[3]))?;
            let r_pre = tape.add(r_x, r_h)?;
            let r = tape.sigmoid(r_pre);
            let z_x = tape.linear(input, gw[1], Some(gb[1]))?;
            let z_h = tape.linear(h, gw[4], Some(gb[4]))?;
            let z_pre = tape.add(z_x, z_h)?;
            let z = tape.sigmoid(z_pre);
            let n_x = tape.linear(input, gw[2], Some(gb[2]))?;
            let n_h = tape.linear(h, gw[5], Some(gb[5]))?;
            let rn = tape.mul(r, n_h)?;
            let n_pre = tape.add(n_x, rn)?;
            let cand = tape.tanh(n_pre);
            let diff = tape.sub(h, cand)?;
            let zd = tape.mul(z, diff)?;
            let h_new = tape.add(cand, zd)?;
            h = tape.dropout(h_new, dropout, rng)?;

            // attention over all cities
            let feature = match last {
                Some(c) if self.config.dynamic => dynamic_feature(dist.row(c)),
                _ => vec![0.0; n],
            };
            let f = tape.constant(Tensor::column(feature));
            let d_bar = tape.pointwise(f, dw, db)?;
            let dyn_attn = tape.matmul(d_bar, wa_d)?;
            let h_attn = tape.matmul(h, wa_h)?;
            let pre = tape.add(static_attn, dyn_attn)?;
            let pre = tape.add_row(pre, h_attn)?;
            let act = tape.tanh(pre);
            let u = tape.matmul(act, va)?;
            let a = tape.softmax(u, 0)?;
            let a_t = tape.transpose(a);
            let context = tape.matmul(a_t, s_bar)?;

            // pointer distribution
            let c_ptr = tape.matmul(context, wc_c)?;
            let pre = tape.add_row(static_ptr, c_ptr)?;
            let act = tape.tanh(pre);
            let logits = tape.matmul(act, vc)?;
            let masked = tape.masked_fill(logits, &visited)?;
            let logp = tape.log_softmax(masked, 0)?;

            let lp = tape.value(logp).data();
            let city = match forced {
                Some(f) => {
                    let c = f[t];
                    if c >= n || visited[c] {
                        return Err(Error::InvalidArgument(format!(
                            "forced tour revisits or overruns at step {t} (city {c})"
                        )));
                    }
                    c
                }
                None => {
                    let probs: Vec<f64> = lp.iter().map(|v| v.exp()).collect();
                    match mode {
                        DecodeMode::Greedy => argmax(&probs),
                        DecodeMode::Sample => sample(&probs, rng),
                    }
                }
            };
            step_log_probs.push(lp[city]);
            chosen_logps.push(tape.gather_rows(logp, &[city])?);
            visited[city] = true;
            last = Some(city);
            tour.push(city);
        }
        let all = tape.concat(&chosen_logps, 0)?;
        let log_prob = tape.sum(all);
        Ok(TapeRollout {
            tour,
            step_log_probs,
            log_prob,
        })
    }
}

/// Result of [`Actor::rollout`]: the tour plus the tape node holding
/// `log p_θ(π | r)`.
pub struct TapeRollout {
    pub tour: Vec<usize>,
    pub step_log_probs: Vec<f64>,
    pub log_prob: Var,
}

/// Softmax over `x`, with entries flagged in `mask` forced to probability 0.
fn softmax(x: &[f64], mask: Option<&[bool]>) -> Vec<f64> {
    let masked = |i: usize| mask.is_some_and(|m| m[i]);
    let max = x
        .iter()
        .enumerate()
        .filter(|&(i, _)| !masked(i))
        .map(|(_, &v)| v)
        .fold(f64::NEG_INFINITY, f64::max);
    let mut out: Vec<f64> = x
        .iter()
        .enumerate()
        .map(|(i, &v)| if masked(i) { 0.0 } else { (v - max).exp() })
        .collect();
    let z: f64 = out.iter().sum();
    out.iter_mut().for_each(|v| *v /= z);
    out
}

/// Index of the largest entry; ties go to the lowest index.
pub fn argmax(p: &[f64]) -> usize {
    let mut best = 0;
    for (i, &v) in p.iter().enumerate() {
        if v > p[best] {
            best = i;
        }
    }
    best
}

/// Inverse-CDF draw from `p`, never returning a zero-probability index.
pub fn sample(p: &[f64], rng: &mut Rng) -> usize {
    let u: f64 = rng.random();
    let mut acc = 0.0;
    let mut last_pos = 0;
    for (i, &v) in p.iter().enumerate() {
        if v <= 0.0 {
            continue;
        }
        last_pos = i;
        acc += v;
        if u < acc {
            return i;
        }
    }
    last_pos
}

/// Rotates a cyclic order so that it begins at `start`, then drops `start`.
pub fn rotate_to_start(order: &[usize], start: usize) -> Vec<usize> {
    let pos = order.iter().position(|&c| c == start).expect("start is in the cycle");
    order[pos + 1..].iter().chain(&order[..pos]).copied().collect()
}

/// Closed tour length of a permutation of `coords`.
pub fn cycle_length(coords: &[[f64; 2]], order: &[usize]) -> f64 {
    if order.len() < 2 {
        return 0.0;
    }
    let mut total = 0.0;
    for w in order.windows(2) {
        total += euclid(coords[w[0]], coords[w[1]]);
    }
    total + euclid(coords[*order.last().unwrap()], coords[order[0]])
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::instance::random_coords;
    use crate::rng::seeded;

    fn actor(d: usize, seed: u64) -> Actor {
        Actor::new(ActorConfig { hidden: d, dynamic: true }, Init::FanIn, &mut seeded(seed))
    }

    #[test]
    fn dynamic_feature_examples() {
        assert_eq!(dynamic_feature(&[0.0, 1.0, 2.0]), vec![1.0, 0.5, 0.0]);
        assert_eq!(dynamic_feature(&[0.7, 0.7, 0.7]), vec![0.0; 3]);
        let row = [0.3, 0.9, 0.1, 0.5];
        let f = dynamic_feature(&row);
        assert_eq!(f[2], 1.0);
        assert_eq!(f[1], 0.0);
        assert!(f.iter().all(|v| (0.0..=1.0).contains(v)));
    }

    #[test]
    fn static_embed_identity_block() {
        let d = 4;
        let mut a = actor(d, 1);
        let w = a.params.id("static.w").unwrap();
        let b = a.params.id("static.b").unwrap();
        let mut wv = vec![0.0; 2 * d];
        wv[0] = 1.0;
        wv[d + 1] = 1.0;
        *a.params.get_mut(w) = Tensor::new(2, d, wv).unwrap();
        *a.params.get_mut(b) = Tensor::zeros(1, d);
        let coords = [[0.2, 0.7], [0.9, 0.1]];
        let e = a.static_embed(&coords);
        assert_eq!(e.row_slice(0), &[0.2, 0.7, 0.0, 0.0]);
        assert_eq!(e.row_slice(1), &[0.9, 0.1, 0.0, 0.0]);
    }

    #[test]
    fn static_embed_is_pointwise() {
        let a = actor(6, 2);
        let coords = random_coords(&mut seeded(3), 5);
        let e = a.static_embed(&coords);
        let perm = [3, 0, 4, 1, 2];
        let permuted: Vec<_> = perm.iter().map(|&i| coords[i]).collect();
        let ep = a.static_embed(&permuted);
        let w = a.params.get(a.params.id("static.w").unwrap());
        let b = a.params.get(a.params.id("static.b").unwrap());
        for (r, &i) in perm.iter().enumerate() {
            assert_eq!(ep.row_slice(r), e.row_slice(i));
            for j in 0..6 {
                let expected = coords[i][0] * w.at(0, j) + coords[i][1] * w.at(1, j) + b.at(0, j);
                assert!((e.at(i, j) - expected).abs() < 1e-14);
            }
        }
    }

    #[test]
    fn single_city_forced() {
        let a = actor(4, 4);
        let t = a.decode_tour(&[[0.5, 0.5]], DecodeMode::Sample, &mut seeded(1)).unwrap();
        assert_eq!(t.order, vec![0]);
        assert_eq!(t.log_prob, 0.0);
    }

    #[test]
    fn last_city_is_point_mass_and_masking_is_exact() {
        let a = actor(8, 5);
        let coords = random_coords(&mut seeded(6), 6);
        let enc = a.encode(&coords).unwrap();
        let mut state = DecoderState::new(6, 8);
        for step in 0..6 {
            let f = a.step_feature(&enc, state.last);
            let p = a.decode_step(&mut state, &enc, &f).unwrap();
            assert!((p.iter().sum::<f64>() - 1.0).abs() < 1e-12);
            assert!(p.iter().all(|&v| v >= 0.0));
            for (i, &v) in state.visited.iter().enumerate() {
                if v {
                    assert_eq!(p[i], 0.0);
                }
            }
            if step == 5 {
                assert!(p.iter().filter(|&&v| v == 1.0).count() == 1);
            }
            let c = argmax(&p);
            state.advance(c, p[c]);
        }
        let f = vec![0.0; 6];
        assert!(a.decode_step(&mut state, &enc, &f).is_err());
    }

    #[test]
    fn greedy_is_deterministic_and_a_permutation() {
        let a = actor(8, 7);
        for n in [1, 2, 5, 33] {
            let coords = random_coords(&mut seeded(n as u64), n);
            let t1 = a.decode_tour(&coords, DecodeMode::Greedy, &mut seeded(1)).unwrap();
            let t2 = a.decode_tour(&coords, DecodeMode::Greedy, &mut seeded(2)).unwrap();
            assert_eq!(t1, t2);
            let mut s = t1.order.clone();
            s.sort_unstable();
            assert_eq!(s, (0..n).collect::<Vec<_>>());
        }
    }

    #[test]
    fn tape_and_fast_paths_agree() {
        let a = actor(8, 8);
        let coords = random_coords(&mut seeded(9), 7);
        let fast = a.decode_tour(&coords, DecodeMode::Greedy, &mut seeded(0)).unwrap();
        let mut tape = Tape::new();
        let roll = a
            .rollout(&mut tape, &coords, DecodeMode::Greedy, None, 0.0, &mut seeded(0))
            .unwrap();
        assert_eq!(roll.tour, fast.order);
        for (x, y) in roll.step_log_probs.iter().zip(&fast.step_log_probs) {
            assert!((x - y).abs() < 1e-10, "{x} vs {y}");
        }
        assert!((tape.value(roll.log_prob).item() - fast.log_prob).abs() < 1e-10);
    }

    #[test]
    fn rotation_puts_start_first() {
        assert_eq!(rotate_to_start(&[3, 1, 0, 2], 0), vec![2, 3, 1]);
        assert_eq!(rotate_to_start(&[0, 1, 2], 0), vec![1, 2]);
    }

    #[test]
    fn layout_mismatch_names_tensor() {
        let a = actor(8, 1);
        let err = Actor::from_params(ActorConfig { hidden: 4, dynamic: true }, a.params.clone()).unwrap_err();
        assert!(err.to_string().contains("static.w"), "{err}");
    }
}

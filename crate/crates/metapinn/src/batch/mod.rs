//! Vectorized loss/gradient/Hessian-vector evaluation.
//!
//! The tape engine in [`crate::ad`] defines the semantics; this module
//! computes the same quantities at desk scale by batching collocation points
//! through dense layer products. Jet coefficient blocks (value, d1, d2, dd1,
//! dd2) propagate through linear layers independently, so one pass carries
//! them as parallel column blocks; the sine activation couples them
//! elementwise.
//!
//! Exactness is preserved by running the whole pipeline over a scalar type
//! `R` that is either `f64` (plain gradient) or [`Dual`] (gradient plus its
//! directional derivative, i.e. an exact Hessian-vector product). Equivalence
//! with the tape — and with finite differences — is enforced by tests; the
//! two routes must agree to 1e-10 relative error.

use ndarray::linalg::general_mat_mul;
use ndarray::{Array1, Array2};

use crate::ad::Jet2;
use crate::num::{Dual, Real, Tan};
use crate::siren::NetConfig;
use crate::tasks::{CollocationBatch, Family, LossEvents, TaskSpec};

/// Tangent slots for residual-operator partials: up to
/// output_dim × coefficient_blocks = 2 × 5.
const NT: usize = 10;

/// Scalar that can be read from / written to value+tangent array pairs.
pub trait BatchScalar: Real {
    const DUAL: bool;
    fn read(i: usize, v: &[f64], t: Option<&[f64]>) -> Self;
    fn write(self, i: usize, v: &mut [f64], t: Option<&mut [f64]>);
    fn tangent_val(self) -> f64;
}

impl BatchScalar for f64 {
    const DUAL: bool = false;
    fn read(i: usize, v: &[f64], _t: Option<&[f64]>) -> Self {
        v[i]
    }
    fn write(self, i: usize, v: &mut [f64], _t: Option<&mut [f64]>) {
        v[i] = self;
    }
    fn tangent_val(self) -> f64 {
        0.0
    }
}

impl BatchScalar for Dual {
    const DUAL: bool = true;
    fn read(i: usize, v: &[f64], t: Option<&[f64]>) -> Self {
        Dual {
            re: v[i],
            dx: t.expect("dual read without tangent")[i],
        }
    }
    fn write(self, i: usize, v: &mut [f64], t: Option<&mut [f64]>) {
        v[i] = self.re;
        t.expect("dual write without tangent")[i] = self.dx;
    }
    fn tangent_val(self) -> f64 {
        self.dx
    }
}

/// Matrix with an optional tangent part (absent = identically zero).
#[derive(Clone, Debug)]
struct BMat {
    v: Array2<f64>,
    t: Option<Array2<f64>>,
}

impl BMat {
    fn zeros(rows: usize, cols: usize, dual: bool) -> BMat {
        BMat {
            v: Array2::zeros((rows, cols)),
            t: dual.then(|| Array2::zeros((rows, cols))),
        }
    }

    fn nrows(&self) -> usize {
        self.v.nrows()
    }
    fn ncols(&self) -> usize {
        self.v.ncols()
    }

    fn parts(&self) -> (&[f64], Option<&[f64]>) {
        (
            self.v.as_slice().expect("BMat not contiguous"),
            self.t
                .as_ref()
                .map(|t| t.as_slice().expect("BMat not contiguous")),
        )
    }

    fn parts_mut(&mut self) -> (&mut [f64], Option<&mut [f64]>) {
        (
            self.v.as_slice_mut().expect("BMat not contiguous"),
            self.t
                .as_mut()
                .map(|t| t.as_slice_mut().expect("BMat not contiguous")),
        )
    }

    fn get<R: BatchScalar>(&self, r: usize, c: usize) -> R {
        let i = r * self.ncols() + c;
        let (v, t) = self.parts();
        R::read(i, v, t)
    }

    fn set<R: BatchScalar>(&mut self, r: usize, c: usize, x: R) {
        let i = r * self.ncols() + c;
        let (v, t) = self.parts_mut();
        x.write(i, v, t);
    }

    /// Apply `f` elementwise in place.
    fn map_inplace<R: BatchScalar>(&mut self, f: impl Fn(R) -> R) {
        let total = self.nrows() * self.ncols();
        let (v, mut t) = self.parts_mut();
        for i in 0..total {
            let x = R::read(i, v, t.as_deref());
            f(x).write(i, v, t.as_deref_mut());
        }
    }
}

/// out = a · b (tangent by the product rule).
fn mm(a: &BMat, b: &BMat) -> BMat {
    let mut out = BMat::zeros(a.nrows(), b.ncols(), a.t.is_some() || b.t.is_some());
    general_mat_mul(1.0, &a.v, &b.v, 0.0, &mut out.v);
    if let Some(ot) = &mut out.t {
        if let Some(at) = &a.t {
            general_mat_mul(1.0, at, &b.v, 1.0, ot);
        }
        if let Some(bt) = &b.t {
            general_mat_mul(1.0, &a.v, bt, 1.0, ot);
        }
    }
    out
}

/// out = aᵀ · b.
fn mm_tn(a: &BMat, b: &BMat) -> BMat {
    let mut out = BMat::zeros(a.ncols(), b.ncols(), a.t.is_some() || b.t.is_some());
    general_mat_mul(1.0, &a.v.t(), &b.v, 0.0, &mut out.v);
    if let Some(ot) = &mut out.t {
        if let Some(at) = &a.t {
            general_mat_mul(1.0, &at.t(), &b.v, 1.0, ot);
        }
        if let Some(bt) = &b.t {
            general_mat_mul(1.0, &a.v.t(), bt, 1.0, ot);
        }
    }
    out
}

/// into += a · bᵀ (weight-gradient accumulation).
fn mm_nt_acc(a: &BMat, b: &BMat, into: &mut BMat) {
    general_mat_mul(1.0, &a.v, &b.v.t(), 1.0, &mut into.v);
    if let Some(it) = &mut into.t {
        if let Some(at) = &a.t {
            general_mat_mul(1.0, at, &b.v.t(), 1.0, it);
        }
        if let Some(bt) = &b.t {
            general_mat_mul(1.0, &a.v, &bt.t(), 1.0, it);
        }
    }
}

#[derive(Clone, Debug)]
struct BVec {
    v: Array1<f64>,
    t: Option<Array1<f64>>,
}

impl BVec {
    fn zeros(n: usize, dual: bool) -> BVec {
        BVec {
            v: Array1::zeros(n),
            t: dual.then(|| Array1::zeros(n)),
        }
    }
}

struct NetParams {
    w: Vec<BMat>,
    b: Vec<BVec>,
}

fn unpack(cfg: &NetConfig, theta: &[f64], tangent: Option<&[f64]>) -> NetParams {
    assert_eq!(theta.len(), cfg.param_count(), "theta length mismatch");
    if let Some(t) = tangent {
        assert_eq!(t.len(), theta.len(), "tangent length mismatch");
    }
    let mut w = Vec::new();
    let mut b = Vec::new();
    let mut off = 0usize;
    for (fan_in, fan_out) in cfg.layer_dims() {
        let wn = fan_in * fan_out;
        let wv = Array2::from_shape_vec((fan_out, fan_in), theta[off..off + wn].to_vec()).unwrap();
        let wt = tangent.map(|t| {
            Array2::from_shape_vec((fan_out, fan_in), t[off..off + wn].to_vec()).unwrap()
        });
        let bv = Array1::from_vec(theta[off + wn..off + wn + fan_out].to_vec());
        let bt = tangent.map(|t| Array1::from_vec(t[off + wn..off + wn + fan_out].to_vec()));
        w.push(BMat { v: wv, t: wt });
        b.push(BVec { v: bv, t: bt });
        off += wn + fan_out;
    }
    NetParams { w, b }
}

fn pack_grads(gw: &[BMat], gb: &[BVec]) -> (Vec<f64>, Option<Vec<f64>>) {
    let dual = gw.first().map(|m| m.t.is_some()).unwrap_or(false);
    let mut g = Vec::new();
    let mut gt = if dual { Some(Vec::new()) } else { None };
    for (wm, bv) in gw.iter().zip(gb) {
        g.extend(wm.v.iter().copied());
        g.extend(bv.v.iter().copied());
        if let Some(gt) = &mut gt {
            gt.extend(wm.t.as_ref().unwrap().iter().copied());
            gt.extend(bv.t.as_ref().unwrap().iter().copied());
        }
    }
    (g, gt)
}

/// Jet coefficient blocks per family: value + 2 first derivatives
/// (+ 2 pure seconds when the residual needs them).
fn coeff_blocks(family: Family) -> usize {
    match family {
        Family::Poisson | Family::Burgers => 5,
        Family::Elasticity => 3,
    }
}

/// Layer caches needed by the reverse pass.
struct LayerCache {
    /// State entering the layer (one BMat per coefficient block).
    s_in: Vec<BMat>,
    /// Scaled pre-activations m = ω0(Wx + b) for sine layers.
    m: Option<Vec<BMat>>,
    /// sin/cos of the value block for sine layers.
    sc: Option<(BMat, BMat)>,
}

/// Stack input points into coefficient blocks: block 0 carries coordinates,
/// blocks 1..=2 the seeded first-derivative directions, blocks 3..=4 zeros.
fn input_state(points: &[[f64; 2]], c: usize) -> Vec<BMat> {
    let n = points.len();
    let mut blocks = Vec::with_capacity(c);
    let mut v = Array2::zeros((2, n));
    for (i, p) in points.iter().enumerate() {
        v[[0, i]] = p[0];
        v[[1, i]] = p[1];
    }
    blocks.push(BMat { v, t: None });
    for j in 1..c {
        let mut v = Array2::zeros((2, n));
        if j <= 2 {
            for i in 0..n {
                v[[j - 1, i]] = 1.0;
            }
        }
        blocks.push(BMat { v, t: None });
    }
    blocks
}

/// Sine activation on jet blocks:
/// v' = sin(m_v); d'_j = cos(m_v)·m_dj; dd'_j = cos(m_v)·m_ddj − sin(m_v)·m_dj².
fn sine_forward<R: BatchScalar>(
    omega: f64,
    z: Vec<BMat>,
    d: usize,
) -> (Vec<BMat>, Vec<BMat>, (BMat, BMat)) {
    let (rows, cols) = (z[0].nrows(), z[0].ncols());
    let dual = R::DUAL;
    let total = rows * cols;
    let om = R::from_f64(omega);
    let mut m = z;
    for blk in m.iter_mut() {
        if blk.t.is_none() && dual {
            blk.t = Some(Array2::zeros((rows, cols)));
        }
        blk.map_inplace::<R>(|x| om * x);
    }
    let mut s = BMat::zeros(rows, cols, dual);
    let mut c = BMat::zeros(rows, cols, dual);
    {
        let (mv, mt) = m[0].parts();
        let (sv, mut st) = s.parts_mut();
        let (cv, mut ct) = c.parts_mut();
        for i in 0..total {
            let x = R::read(i, mv, mt);
            x.sin().write(i, sv, st.as_deref_mut());
            x.cos().write(i, cv, ct.as_deref_mut());
        }
    }
    let mut out: Vec<BMat> = (0..m.len())
        .map(|_| BMat::zeros(rows, cols, dual))
        .collect();
    out[0].v.assign(&s.v);
    if let (Some(ot), Some(st)) = (&mut out[0].t, &s.t) {
        ot.assign(st);
    }
    for j in 1..=d {
        {
            let (sv, st) = s.parts();
            let (cv, ct) = c.parts();
            let (mdv, mdt) = m[j].parts();
            let _ = (sv, st);
            let (ov, mut ot) = out[j].parts_mut();
            for i in 0..total {
                let cc: R = R::read(i, cv, ct);
                let md: R = R::read(i, mdv, mdt);
                (cc * md).write(i, ov, ot.as_deref_mut());
            }
        }
        if m.len() > d + j {
            let (sv, st) = s.parts();
            let (cv, ct) = c.parts();
            let (mdv, mdt) = m[j].parts();
            let (mddv, mddt) = m[d + j].parts();
            let (ov, mut ot) = out[d + j].parts_mut();
            for i in 0..total {
                let cc: R = R::read(i, cv, ct);
                let ss: R = R::read(i, sv, st);
                let md: R = R::read(i, mdv, mdt);
                let mdd: R = R::read(i, mddv, mddt);
                (cc * mdd - ss * md * md).write(i, ov, ot.as_deref_mut());
            }
        }
    }
    (out, m, (s, c))
}

/// Adjoint of the sine activation: output adjoints to pre-activation
/// adjoints, including the ω0 factor.
fn sine_backward<R: BatchScalar>(
    omega: f64,
    adj_out: Vec<BMat>,
    m: &[BMat],
    sc: &(BMat, BMat),
    d: usize,
) -> Vec<BMat> {
    let (rows, cols) = (adj_out[0].nrows(), adj_out[0].ncols());
    let total = rows * cols;
    let dual = R::DUAL;
    let om = R::from_f64(omega);
    let mut adj_m: Vec<BMat> = (0..adj_out.len())
        .map(|_| BMat::zeros(rows, cols, dual))
        .collect();
    let (s, c) = sc;
    // o_v = sin(m_v): a_mv += cos ⊙ g_v
    {
        let (cv, ct) = c.parts();
        let (gv, gt) = adj_out[0].parts();
        let (av, mut at) = adj_m[0].parts_mut();
        for i in 0..total {
            let cc: R = R::read(i, cv, ct);
            let g: R = R::read(i, gv, gt);
            (cc * g).write(i, av, at.as_deref_mut());
        }
    }
    for j in 1..=d {
        // from o_dj = cos ⊙ m_dj
        {
            let (cv, ct) = c.parts();
            let (gv, gt) = adj_out[j].parts();
            {
                let (av, mut at) = adj_m[j].parts_mut();
                for i in 0..total {
                    let cc: R = R::read(i, cv, ct);
                    let g: R = R::read(i, gv, gt);
                    (cc * g).write(i, av, at.as_deref_mut());
                }
            }
            let (sv, st) = s.parts();
            let (mdv, mdt) = m[j].parts();
            let (av, mut at) = adj_m[0].parts_mut();
            for i in 0..total {
                let ss: R = R::read(i, sv, st);
                let md: R = R::read(i, mdv, mdt);
                let g: R = R::read(i, gv, gt);
                let prev = R::read(i, av, at.as_deref());
                (prev - ss * md * g).write(i, av, at.as_deref_mut());
            }
        }
        // from o_ddj = cos ⊙ m_ddj − sin ⊙ m_dj²
        if adj_out.len() > d + j {
            let (sv, st) = s.parts();
            let (cv, ct) = c.parts();
            let (mdv, mdt) = m[j].parts();
            let (mddv, mddt) = m[d + j].parts();
            let (gv, gt) = adj_out[d + j].parts();
            {
                let (av, mut at) = adj_m[d + j].parts_mut();
                for i in 0..total {
                    let cc: R = R::read(i, cv, ct);
                    let g: R = R::read(i, gv, gt);
                    (cc * g).write(i, av, at.as_deref_mut());
                }
            }
            {
                let (av, mut at) = adj_m[j].parts_mut();
                for i in 0..total {
                    let ss: R = R::read(i, sv, st);
                    let md: R = R::read(i, mdv, mdt);
                    let g: R = R::read(i, gv, gt);
                    let prev = R::read(i, av, at.as_deref());
                    (prev - R::from_f64(2.0) * ss * md * g).write(i, av, at.as_deref_mut());
                }
            }
            {
                let (av, mut at) = adj_m[0].parts_mut();
                for i in 0..total {
                    let ss: R = R::read(i, sv, st);
                    let cc: R = R::read(i, cv, ct);
                    let md: R = R::read(i, mdv, mdt);
                    let mdd: R = R::read(i, mddv, mddt);
                    let g: R = R::read(i, gv, gt);
                    let prev = R::read(i, av, at.as_deref());
                    (prev - (ss * mdd + cc * md * md) * g).write(i, av, at.as_deref_mut());
                }
            }
        }
    }
    for blk in adj_m.iter_mut() {
        blk.map_inplace::<R>(|x| om * x);
    }
    adj_m
}

/// Forward pass over a point batch. Returns the head output blocks and the
/// per-layer caches for the reverse pass.
fn net_forward<R: BatchScalar>(
    cfg: &NetConfig,
    params: &NetParams,
    points: &[[f64; 2]],
    c: usize,
) -> (Vec<BMat>, Vec<LayerCache>) {
    let d = 2.min(c.saturating_sub(1));
    let n_layers = cfg.layer_dims().len();
    let mut state = input_state(points, c);
    let mut caches = Vec::with_capacity(n_layers);
    for l in 0..n_layers {
        let w = &params.w[l];
        let b = &params.b[l];
        let mut z: Vec<BMat> = state.iter().map(|blk| mm(w, blk)).collect();
        {
            // bias on the value block only
            let bz = &mut z[0];
            if bz.t.is_none() && R::DUAL {
                bz.t = Some(Array2::zeros((bz.v.nrows(), bz.v.ncols())));
            }
            for r in 0..bz.v.nrows() {
                let bvr = b.v[r];
                for i in 0..bz.v.ncols() {
                    bz.v[[r, i]] += bvr;
                }
            }
            if let (Some(t), Some(bt)) = (&mut bz.t, &b.t) {
                for r in 0..t.nrows() {
                    let btr = bt[r];
                    for i in 0..t.ncols() {
                        t[[r, i]] += btr;
                    }
                }
            }
        }
        if l + 1 < n_layers {
            let s_in = std::mem::take(&mut state);
            let (out, m, sc) = sine_forward::<R>(cfg.omega0, z, d);
            state = out;
            caches.push(LayerCache {
                s_in,
                m: Some(m),
                sc: Some(sc),
            });
        } else {
            let s_in = std::mem::replace(&mut state, z);
            caches.push(LayerCache {
                s_in,
                m: None,
                sc: None,
            });
        }
    }
    (state, caches)
}

/// Reverse pass: accumulate parameter gradients from the head-output
/// adjoints.
fn net_backward<R: BatchScalar>(
    cfg: &NetConfig,
    params: &NetParams,
    caches: &[LayerCache],
    head_adj: Vec<BMat>,
    gw: &mut [BMat],
    gb: &mut [BVec],
    c: usize,
) {
    let d = 2.min(c.saturating_sub(1));
    let mut adj = head_adj;
    for l in (0..caches.len()).rev() {
        let cache = &caches[l];
        let adj_z = match (&cache.m, &cache.sc) {
            (Some(m), Some(sc)) => sine_backward::<R>(cfg.omega0, adj, m, sc, d),
            _ => adj,
        };
        for (az, si) in adj_z.iter().zip(&cache.s_in) {
            mm_nt_acc(az, si, &mut gw[l]);
        }
        {
            let az0 = &adj_z[0];
            for r in 0..az0.nrows() {
                let mut acc = 0.0;
                for i in 0..az0.ncols() {
                    acc += az0.v[[r, i]];
                }
                gb[l].v[r] += acc;
            }
            if let (Some(gbt), Some(t)) = (&mut gb[l].t, &az0.t) {
                for r in 0..t.nrows() {
                    let mut acc = 0.0;
                    for i in 0..t.ncols() {
                        acc += t[[r, i]];
                    }
                    gbt[r] += acc;
                }
            }
        }
        adj = if l > 0 {
            adj_z.iter().map(|az| mm_tn(&params.w[l], az)).collect()
        } else {
            Vec::new()
        };
    }
}

fn tan_slot(r: usize, j: usize, c: usize) -> usize {
    r * c + j
}

/// Interior residual terms: loss contribution plus head-output adjoints.
fn residual_interior<R: BatchScalar>(
    task: &TaskSpec,
    points: &[[f64; 2]],
    head: &[BMat],
    adj: &mut [BMat],
    events: &mut LossEvents,
    want_grad: bool,
) -> R {
    let c = head.len();
    let d = 2.min(c - 1);
    let o = head[0].nrows();
    let n = points.len();
    let inv_n = R::from_f64(1.0 / n as f64);
    let mut acc = R::zero();
    for (i, &x) in points.iter().enumerate() {
        let mut jets: Vec<Jet2<Tan<R, NT>, 2>> = Vec::with_capacity(o);
        for r in 0..o {
            let mut jet = Jet2::constant(Tan::seeded(head[0].get::<R>(r, i), tan_slot(r, 0, c)));
            for k in 0..d {
                jet.d[k] = Tan::seeded(head[1 + k].get::<R>(r, i), tan_slot(r, 1 + k, c));
                if c == 5 {
                    jet.dd[k] = Tan::seeded(head[3 + k].get::<R>(r, i), tan_slot(r, 3 + k, c));
                }
            }
            jets.push(jet);
        }
        let term = task.interior_term(&jets, x, events);
        acc = acc + term.v;
        if want_grad {
            for r in 0..o {
                for j in 0..c {
                    let gj = term.t[tan_slot(r, j, c)] * inv_n;
                    adj[j].set::<R>(r, i, gj);
                }
            }
        }
    }
    acc * inv_n
}

/// Boundary / initial-condition squared-mismatch terms (value-only blocks).
fn residual_pointwise<R: BatchScalar, G>(
    points_n: usize,
    head: &[BMat],
    adj: &mut [BMat],
    want_grad: bool,
    mut comps_at: G,
) -> R
where
    G: FnMut(usize, &[Tan<R, NT>]) -> arrayvec::ArrayVec<Tan<R, NT>, 2>,
{
    let o = head[0].nrows();
    let inv_n = R::from_f64(1.0 / points_n as f64);
    let mut acc = R::zero();
    let mut vals: Vec<Tan<R, NT>> = Vec::with_capacity(o);
    for i in 0..points_n {
        vals.clear();
        for r in 0..o {
            vals.push(Tan::seeded(head[0].get::<R>(r, i), r));
        }
        let comps = comps_at(i, &vals);
        let mut term = Tan::<R, NT>::constant(R::zero());
        for cmp in comps {
            term = term + cmp * cmp;
        }
        acc = acc + term.v;
        if want_grad {
            for r in 0..o {
                adj[0].set::<R>(r, i, term.t[r] * inv_n);
            }
        }
    }
    acc * inv_n
}

/// Loss with parameter gradient; with a tangent direction, also their exact
/// directional derivatives (`loss_t = ∇L·v`, `grad_t = H·v`).
pub struct LossGrad {
    pub loss: f64,
    pub grad: Vec<f64>,
    pub loss_t: Option<f64>,
    pub grad_t: Option<Vec<f64>>,
    pub events: LossEvents,
}

pub fn loss_grad(
    task: &TaskSpec,
    batch: &CollocationBatch,
    cfg: &NetConfig,
    theta: &[f64],
    tangent: Option<&[f64]>,
) -> LossGrad {
    match tangent {
        None => run::<f64>(task, batch, cfg, theta, None, true),
        Some(_) => run::<Dual>(task, batch, cfg, theta, tangent, true),
    }
}

/// Loss value only (no reverse pass).
pub fn loss_value(
    task: &TaskSpec,
    batch: &CollocationBatch,
    cfg: &NetConfig,
    theta: &[f64],
) -> (f64, LossEvents) {
    let out = run::<f64>(task, batch, cfg, theta, None, false);
    (out.loss, out.events)
}

fn run<R: BatchScalar>(
    task: &TaskSpec,
    batch: &CollocationBatch,
    cfg: &NetConfig,
    theta: &[f64],
    tangent: Option<&[f64]>,
    want_grad: bool,
) -> LossGrad {
    assert!(!batch.interior.is_empty(), "loss: empty interior bucket");
    assert!(!batch.boundary.is_empty(), "loss: empty boundary bucket");
    if task.family().time_dependent() {
        assert!(!batch.initial.is_empty(), "loss: empty initial bucket");
    }
    let params = unpack(cfg, theta, tangent);
    let dual = R::DUAL;
    let dims = cfg.layer_dims();
    let mut gw: Vec<BMat> = dims
        .iter()
        .map(|&(fi, fo)| BMat::zeros(fo, fi, dual))
        .collect();
    let mut gb: Vec<BVec> = dims.iter().map(|&(_, fo)| BVec::zeros(fo, dual)).collect();
    let mut events = LossEvents::default();
    let mut loss = R::zero();

    {
        let c = coeff_blocks(task.family());
        let (head, caches) = net_forward::<R>(cfg, &params, &batch.interior, c);
        let mut adj: Vec<BMat> = head
            .iter()
            .map(|h| BMat::zeros(h.nrows(), h.ncols(), dual))
            .collect();
        loss = loss
            + residual_interior::<R>(
                task,
                &batch.interior,
                &head,
                &mut adj,
                &mut events,
                want_grad,
            );
        if want_grad {
            net_backward::<R>(cfg, &params, &caches, adj, &mut gw, &mut gb, c);
        }
    }

    {
        let pts: Vec<[f64; 2]> = batch.boundary.iter().map(|bp| bp.x).collect();
        let (head, caches) = net_forward::<R>(cfg, &params, &pts, 1);
        let mut adj: Vec<BMat> = head
            .iter()
            .map(|h| BMat::zeros(h.nrows(), h.ncols(), dual))
            .collect();
        loss = loss
            + residual_pointwise::<R, _>(pts.len(), &head, &mut adj, want_grad, |i, vals| {
                task.boundary_residual(vals, &batch.boundary[i])
            });
        if want_grad {
            net_backward::<R>(cfg, &params, &caches, adj, &mut gw, &mut gb, 1);
        }
    }

    if !batch.initial.is_empty() {
        let (head, caches) = net_forward::<R>(cfg, &params, &batch.initial, 1);
        let mut adj: Vec<BMat> = head
            .iter()
            .map(|h| BMat::zeros(h.nrows(), h.ncols(), dual))
            .collect();
        loss = loss
            + residual_pointwise::<R, _>(
                batch.initial.len(),
                &head,
                &mut adj,
                want_grad,
                |i, vals| task.initial_residual(vals, batch.initial[i]),
            );
        if want_grad {
            net_backward::<R>(cfg, &params, &caches, adj, &mut gw, &mut gb, 1);
        }
    }

    let (grad, grad_t) = if want_grad {
        pack_grads(&gw, &gb)
    } else {
        (Vec::new(), None)
    };
    LossGrad {
        loss: loss.val(),
        grad,
        loss_t: dual.then(|| loss.tangent_val()),
        grad_t,
        events,
    }
}

/// Network values at a batch of points: one column per point.
pub fn forward_points(cfg: &NetConfig, theta: &[f64], points: &[[f64; 2]]) -> Array2<f64> {
    let params = unpack(cfg, theta, None);
    let (head, _) = net_forward::<f64>(cfg, &params, points, 1);
    head.into_iter().next().unwrap().v
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::ad;
    use crate::siren::init_siren;
    use crate::tasks::{
        build_loss, sample_burgers_task, sample_elastic_task, sample_poisson_task, SamplerConfig,
    };
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn rel(a: f64, b: f64) -> f64 {
        (a - b).abs() / b.abs().max(1e-10)
    }

    fn families() -> Vec<TaskSpec> {
        let sampler = SamplerConfig::default();
        vec![
            sample_poisson_task(&sampler, 41),
            sample_burgers_task(&sampler, 42),
            sample_elastic_task(&sampler, 43).unwrap(),
        ]
    }

    #[test]
    fn batched_loss_and_grad_match_tape() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        for task in families() {
            let (di, doo) = task.family().net_dims();
            let cfg = NetConfig::new(di, doo, 3, 10);
            let theta = init_siren(&cfg, 13);
            let batch = CollocationBatch::sample(&task, &mut rng, 40, 0.8).unwrap();

            let fast = loss_grad(&task, &batch, &cfg, &theta.0, None);

            ad::reset();
            let p = ad::inputs(&theta.0);
            let loss = build_loss(&task, &batch, &cfg, &p);
            let g = ad::grad(loss, &p).unwrap();

            assert!(
                rel(fast.loss, ad::value(loss)) <= 1e-10,
                "{:?} loss {} vs {}",
                task.family(),
                fast.loss,
                ad::value(loss)
            );
            for i in 0..g.len() {
                assert!(
                    rel(fast.grad[i], g[i]) <= 1e-10 || (fast.grad[i] - g[i]).abs() <= 1e-13,
                    "{:?} grad[{i}] {} vs {}",
                    task.family(),
                    fast.grad[i],
                    g[i]
                );
            }
        }
    }

    #[test]
    fn hvp_matches_tape_second_order() {
        let mut rng = ChaCha8Rng::seed_from_u64(12);
        for task in families() {
            let (di, doo) = task.family().net_dims();
            let cfg = NetConfig::new(di, doo, 2, 5);
            let theta = init_siren(&cfg, 14);
            let batch = CollocationBatch::sample(&task, &mut rng, 24, 0.75).unwrap();

            let mut dir = vec![0.0; theta.len()];
            let mut state = 0x243f6a8885a308d3u64;
            for d in dir.iter_mut() {
                state = state.wrapping_mul(6364136223846793005).wrapping_add(1);
                *d = ((state >> 11) as f64 / (1u64 << 53) as f64) - 0.5;
            }

            let fast = loss_grad(&task, &batch, &cfg, &theta.0, Some(&dir));

            // tape route: gradient as nodes, then gradient of g·v
            ad::reset();
            let p = ad::inputs(&theta.0);
            let loss = build_loss(&task, &batch, &cfg, &p);
            let gn = ad::grad_nodes(loss, &p);
            let vn: Vec<ad::Var> = dir.iter().map(|&v| ad::constant(v)).collect();
            let gv = ad::dot(&gn, &vn);
            let hv = ad::grad(gv, &p).unwrap();

            let fast_t = fast.grad_t.as_ref().unwrap();
            for i in 0..hv.len() {
                assert!(
                    rel(fast_t[i], hv[i]) <= 1e-9 || (fast_t[i] - hv[i]).abs() <= 1e-12,
                    "{:?} hvp[{i}] {} vs {}",
                    task.family(),
                    fast_t[i],
                    hv[i]
                );
            }
            assert!(
                rel(fast.loss_t.unwrap(), ad::value(gv)) <= 1e-10,
                "loss_t {} vs {}",
                fast.loss_t.unwrap(),
                ad::value(gv)
            );
        }
    }

    #[test]
    fn hvp_matches_finite_difference_of_gradient() {
        let mut rng = ChaCha8Rng::seed_from_u64(15);
        let sampler = SamplerConfig::default();
        let task = sample_poisson_task(&sampler, 44);
        let cfg = NetConfig::new(2, 1, 2, 6);
        let theta = init_siren(&cfg, 16);
        let batch = CollocationBatch::sample(&task, &mut rng, 32, 0.8).unwrap();

        let dir: Vec<f64> = (0..theta.len())
            .map(|i| ((i * 2654435761) % 1000) as f64 / 1000.0 - 0.5)
            .collect();
        let fast = loss_grad(&task, &batch, &cfg, &theta.0, Some(&dir));
        let h = 1e-6;
        let shift = |sign: f64| -> Vec<f64> {
            theta
                .0
                .iter()
                .zip(&dir)
                .map(|(&t, &d)| t + sign * h * d)
                .collect()
        };
        let gp = loss_grad(&task, &batch, &cfg, &shift(1.0), None).grad;
        let gm = loss_grad(&task, &batch, &cfg, &shift(-1.0), None).grad;
        let ht = fast.grad_t.unwrap();
        for i in 0..ht.len() {
            let fd = (gp[i] - gm[i]) / (2.0 * h);
            assert!(
                rel(ht[i], fd) <= 1e-5 || (ht[i] - fd).abs() <= 1e-8,
                "hvp[{i}] {} vs fd {}",
                ht[i],
                fd
            );
        }
    }

    #[test]
    fn forward_points_matches_scalar_forward() {
        let cfg = NetConfig::new(2, 2, 2, 7);
        let theta = init_siren(&cfg, 21);
        let pts = vec![[0.1, 0.9], [-0.4, 0.3], [0.8, -0.6]];
        let m = forward_points(&cfg, &theta.0, &pts);
        for (i, p) in pts.iter().enumerate() {
            let v = crate::siren::forward_values(&cfg, &theta.0, p);
            assert!((m[[0, i]] - v[0]).abs() <= 1e-12);
            assert!((m[[1, i]] - v[1]).abs() <= 1e-12);
        }
    }
}

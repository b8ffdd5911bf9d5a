//! Append-only reverse-mode tape.
//!
//! Nodes are scalars identified by their arena index; parents always precede
//! children, so one forward pass is the recording itself and one reverse
//! sweep computes adjoints. Local partials are stored at recording time for
//! the float-mode sweep; the node-emitting sweep re-expresses them as nodes
//! so adjoints remain differentiable.

use std::cell::RefCell;

use thiserror::Error;

use crate::num::Real;

/// Handle to a node on the thread-local tape.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct Var(pub(crate) u32);

#[derive(Debug, Error)]
pub enum AdError {
    /// A non-finite value or adjoint was produced; carries the first
    /// offending node id so the failure can be traced to an operation.
    #[error("numerical failure: non-finite value at node {node}")]
    NumericalFailure { node: u32 },
}

#[derive(Clone, Copy, Debug)]
enum Op {
    Input,
    Const,
    Add(u32, u32),
    Sub(u32, u32),
    Mul(u32, u32),
    Div(u32, u32),
    Neg(u32),
    Sin(u32),
    Cos(u32),
    Exp(u32),
    Ln(u32),
    Sqrt(u32),
    Tanh(u32),
    Powi(u32, i32),
    /// n-ary sum over `args[start..start+len]`.
    Sum { start: u32, len: u32 },
    /// dot product of `args[start..start+len]` with `args[start+len..start+2len]`.
    Dot { start: u32, len: u32 },
    /// Identity value, zero partial: blocks gradient flow.
    StopGrad(u32),
}

#[derive(Clone, Copy, Debug)]
struct Node {
    op: Op,
    value: f64,
    /// Local partials with respect to the (up to 2) parents, evaluated at the
    /// parent values. n-ary ops derive partials from their argument values.
    pa: f64,
    pb: f64,
    /// Whether this node depends on any `Input` (adjoint worth propagating).
    live: bool,
}

#[derive(Default)]
struct Tape {
    nodes: Vec<Node>,
    args: Vec<u32>,
    first_nan: Option<u32>,
}

thread_local! {
    static TAPE: RefCell<Tape> = RefCell::new(Tape::default());
}

impl Tape {
    fn push(&mut self, op: Op, value: f64, pa: f64, pb: f64, live: bool) -> Var {
        let id = u32::try_from(self.nodes.len()).expect("tape overflow");
        if !value.is_finite() && self.first_nan.is_none() {
            self.first_nan = Some(id);
        }
        self.nodes.push(Node {
            op,
            value,
            pa,
            pb,
            live,
        });
        Var(id)
    }

    fn live(&self, i: u32) -> bool {
        self.nodes[i as usize].live
    }

    fn val(&self, i: u32) -> f64 {
        self.nodes[i as usize].value
    }
}

/// Clear the thread-local arena. Call between adaptation runs.
pub fn reset() {
    TAPE.with(|t| {
        let mut t = t.borrow_mut();
        t.nodes.clear();
        t.args.clear();
        t.first_nan = None;
    });
}

/// Number of nodes currently recorded on this thread's tape.
pub fn node_count() -> usize {
    TAPE.with(|t| t.borrow().nodes.len())
}

/// Record a differentiable leaf.
pub fn input(v: f64) -> Var {
    TAPE.with(|t| t.borrow_mut().push(Op::Input, v, 0.0, 0.0, true))
}

/// Record a batch of differentiable leaves.
pub fn inputs(vs: &[f64]) -> Vec<Var> {
    vs.iter().map(|&v| input(v)).collect()
}

/// Record a constant leaf (no gradient tracked through it).
pub fn constant(v: f64) -> Var {
    TAPE.with(|t| t.borrow_mut().push(Op::Const, v, 0.0, 0.0, false))
}

/// Value of a recorded node.
pub fn value(v: Var) -> f64 {
    TAPE.with(|t| t.borrow().val(v.0))
}

/// Identity in value, blocks the reverse sweep. Used by the first-order
/// approximation of the unrolled meta-gradient.
pub fn stop_grad(a: Var) -> Var {
    TAPE.with(|t| {
        let mut t = t.borrow_mut();
        let v = t.val(a.0);
        t.push(Op::StopGrad(a.0), v, 0.0, 0.0, false)
    })
}

fn binary(op: fn(u32, u32) -> Op, a: Var, b: Var, f: fn(f64, f64) -> (f64, f64, f64)) -> Var {
    TAPE.with(|t| {
        let mut t = t.borrow_mut();
        let (va, vb) = (t.val(a.0), t.val(b.0));
        let (v, pa, pb) = f(va, vb);
        let live = t.live(a.0) || t.live(b.0);
        t.push(op(a.0, b.0), v, pa, pb, live)
    })
}

fn unary(op: fn(u32) -> Op, a: Var, f: fn(f64) -> (f64, f64)) -> Var {
    TAPE.with(|t| {
        let mut t = t.borrow_mut();
        let va = t.val(a.0);
        let (v, pa) = f(va);
        let live = t.live(a.0);
        t.push(op(a.0), v, pa, 0.0, live)
    })
}

/// n-ary sum node.
pub fn sum(xs: &[Var]) -> Var {
    TAPE.with(|t| {
        let mut t = t.borrow_mut();
        let start = u32::try_from(t.args.len()).expect("args overflow");
        let len = u32::try_from(xs.len()).expect("args overflow");
        let mut v = 0.0;
        let mut live = false;
        for x in xs {
            t.args.push(x.0);
            v += t.val(x.0);
            live |= t.live(x.0);
        }
        t.push(Op::Sum { start, len }, v, 0.0, 0.0, live)
    })
}

/// n-ary dot-product node: `sum_i xs[i] * ys[i]`, accumulated left to right.
pub fn dot(xs: &[Var], ys: &[Var]) -> Var {
    assert_eq!(xs.len(), ys.len(), "dot: length mismatch");
    TAPE.with(|t| {
        let mut t = t.borrow_mut();
        let start = u32::try_from(t.args.len()).expect("args overflow");
        let len = u32::try_from(xs.len()).expect("args overflow");
        let mut live = false;
        for x in xs {
            t.args.push(x.0);
            live |= t.live(x.0);
        }
        for y in ys {
            t.args.push(y.0);
            live |= t.live(y.0);
        }
        let mut v = 0.0;
        for i in 0..xs.len() {
            v += t.val(xs[i].0) * t.val(ys[i].0);
        }
        t.push(Op::Dot { start, len }, v, 0.0, 0.0, live)
    })
}

impl std::ops::Add for Var {
    type Output = Var;
    fn add(self, rhs: Var) -> Var {
        binary(Op::Add, self, rhs, |a, b| (a + b, 1.0, 1.0))
    }
}
impl std::ops::Sub for Var {
    type Output = Var;
    fn sub(self, rhs: Var) -> Var {
        binary(Op::Sub, self, rhs, |a, b| (a - b, 1.0, -1.0))
    }
}
impl std::ops::Mul for Var {
    type Output = Var;
    fn mul(self, rhs: Var) -> Var {
        binary(Op::Mul, self, rhs, |a, b| (a * b, b, a))
    }
}
impl std::ops::Div for Var {
    type Output = Var;
    fn div(self, rhs: Var) -> Var {
        binary(Op::Div, self, rhs, |a, b| {
            let q = a / b;
            (q, 1.0 / b, -q / b)
        })
    }
}
impl std::ops::Neg for Var {
    type Output = Var;
    fn neg(self) -> Var {
        unary(Op::Neg, self, |a| (-a, -1.0))
    }
}

impl Real for Var {
    fn from_f64(x: f64) -> Self {
        constant(x)
    }
    fn val(self) -> f64 {
        value(self)
    }
    fn sin(self) -> Self {
        unary(Op::Sin, self, |a| (a.sin(), a.cos()))
    }
    fn cos(self) -> Self {
        unary(Op::Cos, self, |a| (a.cos(), -a.sin()))
    }
    fn exp(self) -> Self {
        unary(Op::Exp, self, |a| {
            let e = a.exp();
            (e, e)
        })
    }
    fn ln(self) -> Self {
        unary(Op::Ln, self, |a| (a.ln(), 1.0 / a))
    }
    fn sqrt(self) -> Self {
        unary(Op::Sqrt, self, |a| {
            let s = a.sqrt();
            (s, 0.5 / s)
        })
    }
    fn tanh(self) -> Self {
        unary(Op::Tanh, self, |a| {
            let t = a.tanh();
            (t, 1.0 - t * t)
        })
    }
    fn powi(self, n: i32) -> Self {
        TAPE.with(|t| {
            let mut t = t.borrow_mut();
            let a = t.val(self.0);
            let live = t.live(self.0);
            t.push(
                Op::Powi(self.0, n),
                a.powi(n),
                f64::from(n) * a.powi(n - 1),
                0.0,
                live,
            )
        })
    }
    fn sum_slice(xs: &[Self]) -> Self {
        sum(xs)
    }
}

/// Gradient of a recorded scalar with respect to `wrt`, by one float-mode
/// reverse sweep. All other adjoints are discarded.
pub fn grad(root: Var, wrt: &[Var]) -> Result<Vec<f64>, AdError> {
    TAPE.with(|t| {
        let t = t.borrow();
        let n = t.nodes.len();
        assert!((root.0 as usize) < n, "grad: root not on tape");
        if let Some(node) = t.first_nan {
            if node <= root.0 {
                return Err(AdError::NumericalFailure { node });
            }
        }
        let mut adj = vec![0.0f64; root.0 as usize + 1];
        adj[root.0 as usize] = 1.0;
        for i in (0..=root.0 as usize).rev() {
            let a = adj[i];
            if a == 0.0 {
                continue;
            }
            if !a.is_finite() {
                return Err(AdError::NumericalFailure { node: i as u32 });
            }
            let node = &t.nodes[i];
            if !node.live {
                continue;
            }
            match node.op {
                Op::Input | Op::Const | Op::StopGrad(_) => {}
                Op::Add(x, y)
                | Op::Sub(x, y)
                | Op::Mul(x, y)
                | Op::Div(x, y) => {
                    if t.live(x) {
                        adj[x as usize] += a * node.pa;
                    }
                    if t.live(y) {
                        adj[y as usize] += a * node.pb;
                    }
                }
                Op::Neg(x)
                | Op::Sin(x)
                | Op::Cos(x)
                | Op::Exp(x)
                | Op::Ln(x)
                | Op::Sqrt(x)
                | Op::Tanh(x)
                | Op::Powi(x, _) => {
                    if t.live(x) {
                        adj[x as usize] += a * node.pa;
                    }
                }
                Op::Sum { start, len } => {
                    for k in start..start + len {
                        let x = t.args[k as usize];
                        if t.live(x) {
                            adj[x as usize] += a;
                        }
                    }
                }
                Op::Dot { start, len } => {
                    for k in 0..len {
                        let x = t.args[(start + k) as usize];
                        let y = t.args[(start + len + k) as usize];
                        if t.live(x) {
                            adj[x as usize] += a * t.val(y);
                        }
                        if t.live(y) {
                            adj[y as usize] += a * t.val(x);
                        }
                    }
                }
            }
        }
        Ok(wrt
            .iter()
            .map(|w| {
                assert!((w.0 as usize) < n, "grad: wrt not on tape");
                adj.get(w.0 as usize).copied().unwrap_or(0.0)
            })
            .collect())
    })
}

/// Reverse sweep that emits adjoints as new tape nodes, keeping them
/// differentiable. Returns one node per `wrt` entry (a zero constant when the
/// root does not depend on it).
///
/// Recorded gradient-descent updates built from these nodes stay on the same
/// arena, which is what makes exact unrolled meta-gradients possible.
pub fn grad_nodes(root: Var, wrt: &[Var]) -> Vec<Var> {
    // Collect op/parent info first; new nodes are appended while we emit.
    let upto = root.0 as usize;
    let mut adj: Vec<Option<Var>> = vec![None; upto + 1];
    adj[upto] = Some(constant(1.0));

    let acc = |adj: &mut Vec<Option<Var>>, idx: u32, term: Var| {
        let slot = &mut adj[idx as usize];
        *slot = Some(match *slot {
            None => term,
            Some(prev) => prev + term,
        });
    };

    for i in (0..=upto).rev() {
        let Some(a) = adj[i] else { continue };
        let (op, live) = TAPE.with(|t| {
            let t = t.borrow();
            (t.nodes[i].op, t.nodes[i].live)
        });
        if !live {
            continue;
        }
        let this = Var(i as u32);
        match op {
            Op::Input | Op::Const | Op::StopGrad(_) => {}
            Op::Add(x, y) => {
                if is_live(x) {
                    acc(&mut adj, x, a);
                }
                if is_live(y) {
                    acc(&mut adj, y, a);
                }
            }
            Op::Sub(x, y) => {
                if is_live(x) {
                    acc(&mut adj, x, a);
                }
                if is_live(y) {
                    acc(&mut adj, y, -a);
                }
            }
            Op::Mul(x, y) => {
                if is_live(x) {
                    acc(&mut adj, x, a * Var(y));
                }
                if is_live(y) {
                    acc(&mut adj, y, a * Var(x));
                }
            }
            Op::Div(x, y) => {
                // c = x / y: dc/dx = 1/y, dc/dy = -c/y
                if is_live(x) {
                    acc(&mut adj, x, a / Var(y));
                }
                if is_live(y) {
                    acc(&mut adj, y, -(a * this / Var(y)));
                }
            }
            Op::Neg(x) => {
                if is_live(x) {
                    acc(&mut adj, x, -a);
                }
            }
            Op::Sin(x) => {
                if is_live(x) {
                    acc(&mut adj, x, a * Var(x).cos());
                }
            }
            Op::Cos(x) => {
                if is_live(x) {
                    acc(&mut adj, x, -(a * Var(x).sin()));
                }
            }
            Op::Exp(x) => {
                if is_live(x) {
                    acc(&mut adj, x, a * this);
                }
            }
            Op::Ln(x) => {
                if is_live(x) {
                    acc(&mut adj, x, a / Var(x));
                }
            }
            Op::Sqrt(x) => {
                // d sqrt / dx = 1 / (2 sqrt(x)) = 0.5 / this
                if is_live(x) {
                    acc(&mut adj, x, a * (constant(0.5) / this));
                }
            }
            Op::Tanh(x) => {
                if is_live(x) {
                    let one = constant(1.0);
                    acc(&mut adj, x, a * (one - this * this));
                }
            }
            Op::Powi(x, n) => {
                if is_live(x) {
                    let c = constant(f64::from(n));
                    acc(&mut adj, x, a * c * Var(x).powi(n - 1));
                }
            }
            Op::Sum { start, len } => {
                let argv: Vec<u32> = TAPE.with(|t| {
                    let t = t.borrow();
                    t.args[start as usize..(start + len) as usize].to_vec()
                });
                for x in argv {
                    if is_live(x) {
                        acc(&mut adj, x, a);
                    }
                }
            }
            Op::Dot { start, len } => {
                let (xs, ys): (Vec<u32>, Vec<u32>) = TAPE.with(|t| {
                    let t = t.borrow();
                    (
                        t.args[start as usize..(start + len) as usize].to_vec(),
                        t.args[(start + len) as usize..(start + 2 * len) as usize].to_vec(),
                    )
                });
                for k in 0..xs.len() {
                    if is_live(xs[k]) {
                        acc(&mut adj, xs[k], a * Var(ys[k]));
                    }
                    if is_live(ys[k]) {
                        acc(&mut adj, ys[k], a * Var(xs[k]));
                    }
                }
            }
        }
    }

    wrt.iter()
        .map(|w| {
            adj.get(w.0 as usize)
                .copied()
                .flatten()
                .unwrap_or_else(|| constant(0.0))
        })
        .collect()
}

fn is_live(i: u32) -> bool {
    TAPE.with(|t| t.borrow().live(i))
}

/// Exact gradients of a recorded meta-loss with respect to the initialization
/// nodes and every per-step step-size node. The K inner updates must already
/// be recorded on this thread's tape (built via [`grad_nodes`]); with K = 0
/// the θ⁰ gradient reduces to the direct gradient and the α gradient is empty.
pub fn unrolled_grad(
    meta_loss_root: Var,
    theta0: &[Var],
    alpha: &[Vec<Var>],
) -> Result<(Vec<f64>, Vec<Vec<f64>>), AdError> {
    let mut wrt: Vec<Var> = theta0.to_vec();
    for row in alpha {
        wrt.extend_from_slice(row);
    }
    let flat = grad(meta_loss_root, &wrt)?;
    let (g_theta, rest) = flat.split_at(theta0.len());
    let mut g_alpha = Vec::with_capacity(alpha.len());
    let mut off = 0;
    for row in alpha {
        g_alpha.push(rest[off..off + row.len()].to_vec());
        off += row.len();
    }
    Ok((g_theta.to_vec(), g_alpha))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::num::Real;

    fn rel_err(a: f64, b: f64) -> f64 {
        (a - b).abs() / b.abs().max(1e-12)
    }

    #[test]
    fn square_at_three() {
        reset();
        let x = input(3.0);
        let loss = x * x;
        let g = grad(loss, &[x]).unwrap();
        assert_eq!(g[0], 6.0);
    }

    #[test]
    fn sin_at_zero() {
        reset();
        let x = input(0.0);
        let loss = x.sin();
        let g = grad(loss, &[x]).unwrap();
        assert_eq!(g[0], 1.0);
    }

    #[test]
    fn nan_reported_with_node_id() {
        reset();
        let x = input(-1.0);
        let bad = x.ln(); // NaN
        let loss = bad * bad;
        match grad(loss, &[x]) {
            Err(AdError::NumericalFailure { node }) => assert_eq!(node, bad.0),
            other => panic!("expected failure, got {other:?}"),
        }
    }

    #[test]
    fn every_primitive_matches_central_differences() {
        // 100 random points per op, relative error <= 1e-6.
        let mut state = 0x9e3779b97f4a7c15u64;
        let mut next = move || {
            state ^= state << 13;
            state ^= state >> 7;
            state ^= state << 17;
            (state >> 11) as f64 / (1u64 << 53) as f64
        };
        type Case = (&'static str, fn(Var, Var) -> Var, fn(f64, f64) -> f64, bool);
        let cases: Vec<Case> = vec![
            ("add", |a, b| a + b, |a, b| a + b, false),
            ("sub", |a, b| a - b, |a, b| a - b, false),
            ("mul", |a, b| a * b, |a, b| a * b, false),
            ("div", |a, b| a / b, |a, b| a / b, false),
            ("neg", |a, _| -a, |a, _| -a, false),
            ("sin", |a, _| a.sin(), |a, _| a.sin(), false),
            ("cos", |a, _| a.cos(), |a, _| a.cos(), false),
            ("exp", |a, _| a.exp(), |a, _| a.exp(), false),
            ("ln", |a, _| a.ln(), |a, _| a.ln(), true),
            ("sqrt", |a, _| a.sqrt(), |a, _| a.sqrt(), true),
            ("tanh", |a, _| a.tanh(), |a, _| a.tanh(), false),
            ("powi3", |a, _| a.powi(3), |a, _| a.powi(3), false),
            (
                "mixed",
                |a, b| (a * b).sin() + a.exp() / (b * b + Var::from_f64(1.5)),
                |a, b| (a * b).sin() + a.exp() / (b * b + 1.5),
                false,
            ),
        ];
        for (name, tf, ff, positive) in cases {
            for _ in 0..100 {
                let mut a = next() * 2.0 - 1.0;
                let b = next() * 2.0 - 1.0 + 2.0; // keep b away from 0 for div
                if positive {
                    a = a.abs() + 0.1;
                }
                reset();
                let va = input(a);
                let vb = input(b);
                let y = tf(va, vb);
                let g = grad(y, &[va, vb]).unwrap();
                let h = 1e-6 * a.abs().max(1.0);
                let fda = (ff(a + h, b) - ff(a - h, b)) / (2.0 * h);
                let hb = 1e-6 * b.abs().max(1.0);
                let fdb = (ff(a, b + hb) - ff(a, b - hb)) / (2.0 * hb);
                assert!(
                    rel_err(g[0], fda) <= 1e-6 || (g[0] - fda).abs() <= 1e-9,
                    "{name} d/da at ({a},{b}): {} vs {}",
                    g[0],
                    fda
                );
                assert!(
                    rel_err(g[1], fdb) <= 1e-6 || (g[1] - fdb).abs() <= 1e-9,
                    "{name} d/db at ({a},{b}): {} vs {}",
                    g[1],
                    fdb
                );
            }
        }
    }

    #[test]
    fn sum_and_dot_nodes() {
        reset();
        let xs = inputs(&[1.0, 2.0, 3.0]);
        let s = sum(&xs);
        assert_eq!(value(s), 6.0);
        let g = grad(s, &xs).unwrap();
        assert_eq!(g, vec![1.0, 1.0, 1.0]);

        reset();
        let xs = inputs(&[1.0, 2.0]);
        let ys = inputs(&[3.0, 4.0]);
        let d = dot(&xs, &ys);
        assert_eq!(value(d), 11.0);
        let g = grad(d, &[xs[0], xs[1], ys[0], ys[1]]).unwrap();
        assert_eq!(g, vec![3.0, 4.0, 1.0, 2.0]);
    }

    #[test]
    fn grad_nodes_gives_differentiable_gradient() {
        // y = x^3; g = dy/dx = 3x^2 as a node; dg/dx = 6x.
        reset();
        let x = input(2.0);
        let y = x * x * x;
        let g = grad_nodes(y, &[x]);
        assert!((value(g[0]) - 12.0).abs() < 1e-12);
        let gg = grad(g[0], &[x]).unwrap();
        assert!((gg[0] - 12.0).abs() < 1e-12);
    }

    #[test]
    fn stop_grad_blocks_flow() {
        reset();
        let x = input(3.0);
        let y = stop_grad(x * x) * x; // value 27, grad treats x^2 as constant 9
        assert_eq!(value(y), 27.0);
        let g = grad(y, &[x]).unwrap();
        assert_eq!(g[0], 9.0);
    }

    #[test]
    fn unrolled_toy_matches_hand_chain_rule() {
        // L(θ) = θ², θ⁰ = 1, α = 0.1, one step of recorded SGD,
        // meta-loss L(θ¹): θ¹ = 0.8, dM/dθ⁰ = 2·0.8·(1−2α) = 1.28,
        // dM/dα = 2·0.8·(−∇L(θ⁰)) = −3.2.
        reset();
        let theta0 = input(1.0);
        let alpha = input(0.1);
        let l0 = theta0 * theta0;
        let g0 = grad_nodes(l0, &[theta0]);
        let theta1 = theta0 - alpha * g0[0];
        assert!((value(theta1) - 0.8).abs() < 1e-15);
        let meta = theta1 * theta1;
        let (gt, ga) = unrolled_grad(meta, &[theta0], &[vec![alpha]]).unwrap();
        assert!((gt[0] - 1.28).abs() < 1e-12, "{}", gt[0]);
        assert!((ga[0][0] - (-3.2)).abs() < 1e-12, "{}", ga[0][0]);
    }

    #[test]
    fn unrolled_k0_is_direct_gradient() {
        reset();
        let theta0 = input(2.0);
        let meta = theta0 * theta0 * theta0;
        let (gt, ga) = unrolled_grad(meta, &[theta0], &[]).unwrap();
        assert_eq!(gt[0], 12.0);
        assert!(ga.is_empty());
    }

    #[test]
    fn evaluation_is_deterministic() {
        let run = || {
            reset();
            let x = input(0.37);
            let y = input(1.91);
            let z = (x * y).sin().exp() + (x / y).tanh();
            let v = value(z);
            let g = grad(z, &[x, y]).unwrap();
            (v.to_bits(), g[0].to_bits(), g[1].to_bits())
        };
        assert_eq!(run(), run());
    }
}

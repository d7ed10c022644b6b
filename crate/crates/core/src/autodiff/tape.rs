use std::cell::RefCell;
use std::ops::{Add, Div, Mul, Neg, Sub};

use super::AdError;

/// Denominators at or below this magnitude abort evaluation.
pub const DIV_GUARD: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum OpKind {
    Const(f64),
    Param(usize),
    Add,
    Sub,
    Mul,
    Div,
    Neg,
    Exp,
    Tanh,
    Softplus,
    /// `softplus(β·x)/β`, a smooth stand-in for `max(0, x)`.
    Max0Smooth(f64),
    /// `Σ wᵢ·xᵢ + b` over `n` terms.
    Affine(u32),
}

#[derive(Debug, Clone, Copy)]
struct Node {
    op: OpKind,
    /// First operand, or start offset into the argument arena for `Affine`.
    a: u32,
    b: u32,
}

impl Node {
    fn operand_values(&self, values: &[f64]) -> (f64, f64) {
        match self.op {
            OpKind::Const(_) | OpKind::Param(_) | OpKind::Affine(_) => (0.0, 0.0),
            _ => (values[self.a as usize], values[self.b as usize]),
        }
    }
}

#[derive(Debug, Default)]
struct TapeData {
    nodes: Vec<Node>,
    args: Vec<u32>,
    /// slot index → node id
    params: Vec<Option<u32>>,
    values: Vec<f64>,
    output: Option<u32>,
    evaluated: bool,
    backward_visits: usize,
}

/// Append-only scalar expression graph.
///
/// Nodes only reference earlier nodes, so evaluation in insertion order is a
/// valid topological order. The graph is built once and may be re-evaluated
/// for any parameter vector with [`Tape::forward`].
#[derive(Debug, Default)]
pub struct Tape {
    inner: RefCell<TapeData>,
}

/// Handle to a node on a [`Tape`].
#[derive(Debug, Clone, Copy)]
pub struct Var<'t> {
    tape: &'t Tape,
    id: u32,
}

impl<'t> Var<'t> {
    pub fn id(&self) -> u32 {
        self.id
    }

    pub fn tape(&self) -> &'t Tape {
        self.tape
    }

    /// Cached value from the last forward pass.
    pub fn value(&self) -> f64 {
        self.tape.inner.borrow().values[self.id as usize]
    }

    fn unary(self, op: OpKind) -> Var<'t> {
        self.tape.push(op, self.id, 0)
    }

    pub fn exp(self) -> Var<'t> {
        self.unary(OpKind::Exp)
    }

    pub fn tanh(self) -> Var<'t> {
        self.unary(OpKind::Tanh)
    }

    pub fn softplus(self) -> Var<'t> {
        self.unary(OpKind::Softplus)
    }

    pub fn max0_smooth(self, beta: f64) -> Var<'t> {
        assert!(beta > 0.0, "sharpness must be positive");
        self.unary(OpKind::Max0Smooth(beta))
    }
}

impl Tape {
    pub fn new() -> Self {
        Self::default()
    }

    fn push(&self, op: OpKind, a: u32, b: u32) -> Var<'_> {
        let mut d = self.inner.borrow_mut();
        let id = d.nodes.len() as u32;
        debug_assert!(a <= id && b <= id);
        d.nodes.push(Node { op, a, b });
        d.values.push(0.0);
        d.evaluated = false;
        Var { tape: self, id }
    }

    pub fn constant(&self, value: f64) -> Var<'_> {
        self.push(OpKind::Const(value), 0, 0)
    }

    /// The node bound to parameter `slot`; repeated calls return the same node.
    pub fn param(&self, slot: usize) -> Var<'_> {
        {
            let d = self.inner.borrow();
            if let Some(Some(id)) = d.params.get(slot) {
                return Var { tape: self, id: *id };
            }
        }
        let v = self.push(OpKind::Param(slot), 0, 0);
        let mut d = self.inner.borrow_mut();
        if d.params.len() <= slot {
            d.params.resize(slot + 1, None);
        }
        d.params[slot] = Some(v.id);
        v
    }

    /// `n` consecutive parameter slots starting at `first`.
    pub fn params(&self, first: usize, n: usize) -> Vec<Var<'_>> {
        (first..first + n).map(|s| self.param(s)).collect()
    }

    pub fn affine<'t>(&'t self, weights: &[Var<'t>], inputs: &[Var<'t>], bias: Var<'t>) -> Var<'t> {
        assert_eq!(weights.len(), inputs.len(), "affine arity mismatch");
        let start = {
            let mut d = self.inner.borrow_mut();
            let start = d.args.len() as u32;
            d.args.extend(weights.iter().map(|w| w.id));
            d.args.extend(inputs.iter().map(|x| x.id));
            d.args.push(bias.id);
            start
        };
        self.push(OpKind::Affine(weights.len() as u32), start, 0)
    }

    pub fn len(&self) -> usize {
        self.inner.borrow().nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// Number of parameter slots referenced so far.
    pub fn param_count(&self) -> usize {
        self.inner.borrow().params.len()
    }

    /// Output node for forward/backward; defaults to the last node.
    pub fn set_output(&self, v: Var<'_>) {
        self.inner.borrow_mut().output = Some(v.id);
    }

    /// Nodes visited by the most recent reverse pass.
    pub fn backward_visits(&self) -> usize {
        self.inner.borrow().backward_visits
    }

    /// Evaluates every node in order and returns the output value.
    pub fn forward(&self, param_values: &[f64]) -> Result<f64, AdError> {
        let mut guard = self.inner.borrow_mut();
        let d = &mut *guard;
        if d.nodes.is_empty() {
            return Err(AdError::EmptyTape);
        }
        if let Some(slot) = d.params.iter().position(|p| p.is_none()) {
            return Err(AdError::UnboundParameter(slot));
        }
        if param_values.len() < d.params.len() {
            return Err(AdError::UnboundParameter(param_values.len()));
        }
        d.evaluated = false;
        for i in 0..d.nodes.len() {
            let n = d.nodes[i];
            let (va, vb) = n.operand_values(&d.values);
            let v = match n.op {
                OpKind::Const(c) => c,
                OpKind::Param(s) => param_values[s],
                OpKind::Add => va + vb,
                OpKind::Sub => va - vb,
                OpKind::Mul => va * vb,
                OpKind::Div => {
                    if vb.abs() <= DIV_GUARD {
                        return Err(AdError::DivisionGuard { node: i });
                    }
                    va / vb
                }
                OpKind::Neg => -va,
                OpKind::Exp => va.exp(),
                OpKind::Tanh => va.tanh(),
                OpKind::Softplus => softplus(va),
                OpKind::Max0Smooth(beta) => softplus(beta * va) / beta,
                OpKind::Affine(k) => {
                    let k = k as usize;
                    let s = n.a as usize;
                    let mut acc = d.values[d.args[s + 2 * k] as usize];
                    for j in 0..k {
                        acc += d.values[d.args[s + j] as usize] * d.values[d.args[s + k + j] as usize];
                    }
                    acc
                }
            };
            if !v.is_finite() {
                return Err(AdError::NonFinite { node: i });
            }
            d.values[i] = v;
        }
        d.evaluated = true;
        let out = d.output.unwrap_or(d.nodes.len() as u32 - 1);
        Ok(d.values[out as usize])
    }

    /// Reverse accumulation from the output; returns ∂output/∂param per slot.
    pub fn backward(&self) -> Result<Vec<f64>, AdError> {
        let mut guard = self.inner.borrow_mut();
        let d = &mut *guard;
        if !d.evaluated {
            return Err(AdError::ForwardNotRun);
        }
        let n_nodes = d.nodes.len();
        let out = d.output.unwrap_or(n_nodes as u32 - 1) as usize;
        let mut adj = vec![0.0; n_nodes];
        adj[out] = 1.0;
        let mut visits = 0;
        for i in (0..=out).rev() {
            visits += 1;
            let g = adj[i];
            if g == 0.0 {
                continue;
            }
            let n = d.nodes[i];
            let (a, b) = (n.a as usize, n.b as usize);
            let (va, vb) = n.operand_values(&d.values);
            match n.op {
                OpKind::Const(_) | OpKind::Param(_) => {}
                OpKind::Add => {
                    adj[a] += g;
                    adj[b] += g;
                }
                OpKind::Sub => {
                    adj[a] += g;
                    adj[b] -= g;
                }
                OpKind::Mul => {
                    adj[a] += g * vb;
                    adj[b] += g * va;
                }
                OpKind::Div => {
                    adj[a] += g / vb;
                    adj[b] -= g * va / (vb * vb);
                }
                OpKind::Neg => adj[a] -= g,
                OpKind::Exp => adj[a] += g * d.values[i],
                OpKind::Tanh => {
                    let t = d.values[i];
                    adj[a] += g * (1.0 - t * t);
                }
                OpKind::Softplus => adj[a] += g * sigmoid(va),
                OpKind::Max0Smooth(beta) => adj[a] += g * sigmoid(beta * va),
                OpKind::Affine(k) => {
                    let k = k as usize;
                    let s = n.a as usize;
                    for j in 0..k {
                        let w = d.args[s + j] as usize;
                        let x = d.args[s + k + j] as usize;
                        let (vw, vx) = (d.values[w], d.values[x]);
                        adj[w] += g * vx;
                        adj[x] += g * vw;
                    }
                    adj[d.args[s + 2 * k] as usize] += g;
                }
            }
        }
        // nodes after the output cannot influence it
        visits += n_nodes - 1 - out;
        d.backward_visits = visits;
        Ok(d.params.iter().map(|p| p.map_or(0.0, |id| adj[id as usize])).collect())
    }

    /// Central-difference check of [`Tape::backward`]: the largest
    /// `|g_ad − g_fd| / (|g_fd| + 1e-8)` over all parameters. The tape is
    /// left evaluated at `param_values`.
    pub fn grad_check(&self, param_values: &[f64], h: f64) -> Result<f64, AdError> {
        if !(h > 0.0 && h <= 1e-2) {
            return Err(AdError::BadStep(h));
        }
        self.forward(param_values)?;
        let ad = self.backward()?;
        let mut x = param_values.to_vec();
        let mut worst: f64 = 0.0;
        for (j, g) in ad.iter().enumerate() {
            let x0 = x[j];
            x[j] = x0 + h;
            let fp = self.forward(&x)?;
            x[j] = x0 - h;
            let fm = self.forward(&x)?;
            x[j] = x0;
            let fd = (fp - fm) / (2.0 * h);
            worst = worst.max((g - fd).abs() / (fd.abs() + 1e-8));
        }
        self.forward(param_values)?;
        Ok(worst)
    }
}

pub(crate) fn softplus(x: f64) -> f64 {
    x.max(0.0) + (-x.abs()).exp().ln_1p()
}

pub(crate) fn sigmoid(x: f64) -> f64 {
    if x >= 0.0 {
        1.0 / (1.0 + (-x).exp())
    } else {
        let e = x.exp();
        e / (1.0 + e)
    }
}

macro_rules! binop {
    ($tr:ident, $f:ident, $op:expr) => {
        impl<'t> $tr for Var<'t> {
            type Output = Var<'t>;
            fn $f(self, rhs: Var<'t>) -> Var<'t> {
                debug_assert!(std::ptr::eq(self.tape, rhs.tape), "operands on different tapes");
                self.tape.push($op, self.id, rhs.id)
            }
        }
        impl<'t> $tr<f64> for Var<'t> {
            type Output = Var<'t>;
            fn $f(self, rhs: f64) -> Var<'t> {
                let c = self.tape.constant(rhs);
                self.tape.push($op, self.id, c.id)
            }
        }
        impl<'t> $tr<Var<'t>> for f64 {
            type Output = Var<'t>;
            fn $f(self, rhs: Var<'t>) -> Var<'t> {
                let c = rhs.tape.constant(self);
                rhs.tape.push($op, c.id, rhs.id)
            }
        }
    };
}

binop!(Add, add, OpKind::Add);
binop!(Sub, sub, OpKind::Sub);
binop!(Mul, mul, OpKind::Mul);
binop!(Div, div, OpKind::Div);

impl<'t> Neg for Var<'t> {
    type Output = Var<'t>;
    fn neg(self) -> Var<'t> {
        self.unary(OpKind::Neg)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn square_value_and_gradient() {
        let t = Tape::new();
        let x = t.param(0);
        let _ = x * x;
        assert_eq!(t.forward(&[3.0]).unwrap(), 9.0);
        assert_eq!(t.backward().unwrap(), vec![6.0]);
    }

    #[test]
    fn bilinear_gradient() {
        let t = Tape::new();
        let _ = t.param(0) * t.param(1);
        assert_eq!(t.forward(&[2.0, 5.0]).unwrap(), 10.0);
        assert_eq!(t.backward().unwrap(), vec![5.0, 2.0]);
    }

    #[test]
    fn softplus_at_zero_is_ln2() {
        let t = Tape::new();
        t.param(0).softplus();
        let v = t.forward(&[0.0]).unwrap();
        assert!((v - std::f64::consts::LN_2).abs() < 1e-15);
        assert!((t.backward().unwrap()[0] - 0.5).abs() < 1e-15);
    }

    #[test]
    fn tanh_at_origin() {
        let t = Tape::new();
        t.param(0).tanh();
        assert_eq!(t.forward(&[0.0]).unwrap(), 0.0);
        assert_eq!(t.backward().unwrap(), vec![1.0]);
    }

    #[test]
    fn errors() {
        let t = Tape::new();
        let x = t.param(0);
        let _ = x / (x - 1.0);
        assert!(matches!(t.forward(&[]), Err(AdError::UnboundParameter(0))));
        assert!(matches!(t.backward(), Err(AdError::ForwardNotRun)));
        assert!(matches!(t.forward(&[1.0]), Err(AdError::DivisionGuard { .. })));
        assert!(matches!(t.backward(), Err(AdError::ForwardNotRun)));

        let t = Tape::new();
        let _ = t.param(1) * 2.0;
        assert!(matches!(t.forward(&[1.0, 1.0]), Err(AdError::UnboundParameter(0))));
    }

    #[test]
    fn constant_function_has_zero_gradient() {
        let t = Tape::new();
        let x = t.param(0);
        let y = x * 0.0 + 4.0;
        t.set_output(y);
        assert_eq!(t.forward(&[1.7]).unwrap(), 4.0);
        assert_eq!(t.backward().unwrap(), vec![0.0]);
        assert_eq!(t.grad_check(&[1.7], 1e-5).unwrap(), 0.0);
    }

    #[test]
    fn quadratic_form_grad_check_is_tight() {
        // f = xᵀ A x with A = [[2, 1], [1, 3]]
        let t = Tape::new();
        let x = t.param(0);
        let y = t.param(1);
        let _ = 2.0 * x * x + 2.0 * x * y + 3.0 * y * y;
        let err = t.grad_check(&[0.7, -1.3], 1e-4).unwrap();
        assert!(err < 1e-9, "err = {err}");
    }

    #[test]
    fn affine_matches_expanded_form() {
        let t = Tape::new();
        let w = t.params(0, 2);
        let x = t.params(2, 2);
        let b = t.param(4);
        t.affine(&w, &x, b);
        let p = [0.5, -2.0, 3.0, 4.0, 0.25];
        assert_eq!(t.forward(&p).unwrap(), 0.5 * 3.0 - 2.0 * 4.0 + 0.25);
        assert_eq!(t.backward().unwrap(), vec![3.0, 4.0, 0.5, -2.0, 1.0]);
    }

    #[test]
    fn reverse_pass_visits_each_node_once() {
        let t = Tape::new();
        let x = t.param(0);
        let mut acc = x;
        for _ in 0..10 {
            acc = (acc * x).tanh() + 1.0;
        }
        t.forward(&[0.3]).unwrap();
        t.backward().unwrap();
        assert_eq!(t.backward_visits(), t.len());
    }

    #[test]
    fn max0_smooth_approaches_relu() {
        let t = Tape::new();
        t.param(0).max0_smooth(50.0);
        assert!((t.forward(&[1.0]).unwrap() - 1.0).abs() < 1e-12);
        assert!(t.forward(&[-1.0]).unwrap() < 1e-12);
    }
}

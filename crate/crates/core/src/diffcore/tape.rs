use crate::error::{Error, Result};
use crate::real::Real;

use super::params::{ParamId, ParamStore};

/// Handle to a node recorded on a [`Tape`].
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct Var(usize);

impl Var {
    pub fn index(self) -> usize {
        self.0
    }
}

#[derive(Debug, Clone)]
enum Op<T> {
    Constant,
    Param(ParamId),
    Add(Var, Var),
    Sub(Var, Var),
    Mul(Var, Var),
    Div(Var, Var),
    Scale(Var, T),
    Offset(Var),
    MatVec(Var, Var),
    Tanh(Var),
    Sigmoid(Var),
    Exp(Var),
    Log(Var),
    Softplus(Var),
    Square(Var),
    Sqrt(Var),
    Recip(Var),
    Concat(Vec<Var>),
    Slice(Var, usize),
    Sum(Var),
}

#[derive(Debug, Clone)]
struct Node<T> {
    value: Vec<T>,
    rows: usize,
    cols: usize,
    op: Op<T>,
}

/// Record of a computation over dense vectors (and parameter matrices),
/// replayed backwards to obtain gradients.
///
/// Nodes are appended after their operands, so index order is a topological
/// order and the backward sweep is a single reverse pass.
#[derive(Debug, Clone, Default)]
pub struct Tape<T> {
    nodes: Vec<Node<T>>,
    bound: Vec<Option<Var>>,
}

/// Adjoints produced by [`Tape::backward`], indexed by node.
#[derive(Debug, Clone)]
pub struct Gradients<T> {
    grads: Vec<Option<Vec<T>>>,
}

impl<T: Real> Gradients<T> {
    /// Gradient of the loss with respect to `v`; `None` when `v` does not
    /// influence the loss.
    pub fn wrt(&self, v: Var) -> Option<&[T]> {
        self.grads.get(v.0).and_then(|g| g.as_deref())
    }
}

fn mismatch(op: &'static str, a: usize, b: usize) -> Error {
    Error::ShapeMismatch {
        op,
        detail: format!("lengths {a} and {b}"),
    }
}

impl<T: Real> Tape<T> {
    pub fn new() -> Self {
        Self {
            nodes: Vec::new(),
            bound: Vec::new(),
        }
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    fn push(&mut self, value: Vec<T>, op: Op<T>) -> Var {
        let rows = value.len();
        self.push_shaped(value, rows, 1, op)
    }

    fn push_shaped(&mut self, value: Vec<T>, rows: usize, cols: usize, op: Op<T>) -> Var {
        self.nodes.push(Node {
            value,
            rows,
            cols,
            op,
        });
        Var(self.nodes.len() - 1)
    }

    pub fn value(&self, v: Var) -> &[T] {
        &self.nodes[v.0].value
    }

    /// Value of a length-1 node.
    pub fn scalar(&self, v: Var) -> T {
        self.nodes[v.0].value[0]
    }

    pub fn shape(&self, v: Var) -> (usize, usize) {
        let n = &self.nodes[v.0];
        (n.rows, n.cols)
    }

    pub fn constant(&mut self, value: Vec<T>) -> Var {
        self.push(value, Op::Constant)
    }

    pub fn constant_scalar(&mut self, value: T) -> Var {
        self.push(vec![value], Op::Constant)
    }

    /// Leaf for a stored parameter. Binding the same parameter twice on one
    /// tape returns the same node, so every use shares one adjoint.
    pub fn param(&mut self, store: &ParamStore<T>, id: ParamId) -> Var {
        let idx = id.index();
        if let Some(Some(v)) = self.bound.get(idx) {
            return *v;
        }
        let p = store.get(id);
        let (rows, cols) = p.shape();
        let var = self.push_shaped(p.value().to_vec(), rows, cols, Op::Param(id));
        if self.bound.len() <= idx {
            self.bound.resize(idx + 1, None);
        }
        self.bound[idx] = Some(var);
        var
    }

    fn binary(
        &mut self,
        name: &'static str,
        a: Var,
        b: Var,
        f: impl Fn(T, T) -> T,
        op: Op<T>,
    ) -> Result<Var> {
        let (va, vb) = (&self.nodes[a.0].value, &self.nodes[b.0].value);
        if va.len() != vb.len() {
            return Err(mismatch(name, va.len(), vb.len()));
        }
        let value = va.iter().zip(vb).map(|(x, y)| f(*x, *y)).collect();
        Ok(self.push(value, op))
    }

    fn unary(&mut self, a: Var, f: impl Fn(T) -> T, op: Op<T>) -> Var {
        let value = self.nodes[a.0].value.iter().map(|x| f(*x)).collect();
        self.push(value, op)
    }

    pub fn add(&mut self, a: Var, b: Var) -> Result<Var> {
        self.binary("add", a, b, |x, y| x + y, Op::Add(a, b))
    }

    pub fn sub(&mut self, a: Var, b: Var) -> Result<Var> {
        self.binary("sub", a, b, |x, y| x - y, Op::Sub(a, b))
    }

    /// Elementwise product.
    pub fn mul(&mut self, a: Var, b: Var) -> Result<Var> {
        self.binary("mul", a, b, |x, y| x * y, Op::Mul(a, b))
    }

    pub fn div(&mut self, a: Var, b: Var) -> Result<Var> {
        self.binary("div", a, b, |x, y| x / y, Op::Div(a, b))
    }

    pub fn scale(&mut self, a: Var, s: T) -> Var {
        self.unary(a, |x| x * s, Op::Scale(a, s))
    }

    /// Adds a constant to every component.
    pub fn offset(&mut self, a: Var, c: T) -> Var {
        self.unary(a, |x| x + c, Op::Offset(a))
    }

    pub fn neg(&mut self, a: Var) -> Var {
        self.scale(a, -T::one())
    }

    /// Matrix-vector product `w x`, with `w` a `rows x cols` node.
    pub fn matvec(&mut self, w: Var, x: Var) -> Result<Var> {
        let (wn, xn) = (&self.nodes[w.0], &self.nodes[x.0]);
        if wn.cols != xn.value.len() || xn.cols != 1 {
            return Err(Error::ShapeMismatch {
                op: "matvec",
                detail: format!(
                    "{}x{} matrix times length-{} vector",
                    wn.rows,
                    wn.cols,
                    xn.value.len()
                ),
            });
        }
        let cols = wn.cols;
        let value = wn
            .value
            .chunks_exact(cols)
            .map(|row| {
                row.iter()
                    .zip(&xn.value)
                    .fold(T::zero(), |acc, (a, b)| acc + *a * *b)
            })
            .collect();
        Ok(self.push(value, Op::MatVec(w, x)))
    }

    pub fn tanh(&mut self, a: Var) -> Var {
        self.unary(a, |x| x.tanh(), Op::Tanh(a))
    }

    pub fn sigmoid(&mut self, a: Var) -> Var {
        self.unary(a, sigmoid, Op::Sigmoid(a))
    }

    /// `exp`, with the argument clamped so the result stays finite.
    pub fn exp(&mut self, a: Var) -> Var {
        self.unary(a, |x| x.min(T::max_exp_arg()).exp(), Op::Exp(a))
    }

    pub fn log(&mut self, a: Var) -> Var {
        self.unary(a, |x| x.ln(), Op::Log(a))
    }

    /// Overflow-free `ln(1 + e^x)`.
    pub fn softplus(&mut self, a: Var) -> Var {
        self.unary(a, softplus, Op::Softplus(a))
    }

    pub fn square(&mut self, a: Var) -> Var {
        self.unary(a, |x| x * x, Op::Square(a))
    }

    pub fn sqrt(&mut self, a: Var) -> Var {
        self.unary(a, |x| x.sqrt(), Op::Sqrt(a))
    }

    pub fn recip(&mut self, a: Var) -> Var {
        self.unary(a, |x| x.recip(), Op::Recip(a))
    }

    pub fn concat(&mut self, parts: &[Var]) -> Var {
        let value = parts
            .iter()
            .flat_map(|p| self.nodes[p.0].value.iter().copied())
            .collect();
        self.push(value, Op::Concat(parts.to_vec()))
    }

    pub fn slice(&mut self, a: Var, start: usize, len: usize) -> Result<Var> {
        let va = &self.nodes[a.0].value;
        if start + len > va.len() {
            return Err(Error::ShapeMismatch {
                op: "slice",
                detail: format!("range {start}..{} of length {}", start + len, va.len()),
            });
        }
        let value = va[start..start + len].to_vec();
        Ok(self.push(value, Op::Slice(a, start)))
    }

    /// Sum of all components, as a length-1 node.
    pub fn sum(&mut self, a: Var) -> Var {
        let s = self.nodes[a.0].value.iter().copied().sum();
        self.push(vec![s], Op::Sum(a))
    }

    pub fn dot(&mut self, a: Var, b: Var) -> Result<Var> {
        let p = self.mul(a, b)?;
        Ok(self.sum(p))
    }

    /// Reverse sweep from a length-1 `loss` node.
    pub fn backward(&self, loss: Var) -> Result<Gradients<T>> {
        if self.nodes[loss.0].value.len() != 1 {
            return Err(mismatch("backward", self.nodes[loss.0].value.len(), 1));
        }
        let mut grads: Vec<Option<Vec<T>>> = vec![None; loss.0 + 1];
        grads[loss.0] = Some(vec![T::one()]);

        for i in (0..=loss.0).rev() {
            let Some(g) = grads[i].take() else { continue };
            let node = &self.nodes[i];
            let val = &node.value;
            match &node.op {
                Op::Constant | Op::Param(_) => {}
                Op::Add(a, b) => {
                    accumulate(&mut grads, self, *a, |_, gi| gi, &g);
                    accumulate(&mut grads, self, *b, |_, gi| gi, &g);
                }
                Op::Sub(a, b) => {
                    accumulate(&mut grads, self, *a, |_, gi| gi, &g);
                    accumulate(&mut grads, self, *b, |_, gi| -gi, &g);
                }
                Op::Mul(a, b) => {
                    let (va, vb) = (&self.nodes[a.0].value, &self.nodes[b.0].value);
                    accumulate(&mut grads, self, *a, |k, gi| gi * vb[k], &g);
                    accumulate(&mut grads, self, *b, |k, gi| gi * va[k], &g);
                }
                Op::Div(a, b) => {
                    let vb = &self.nodes[b.0].value;
                    accumulate(&mut grads, self, *a, |k, gi| gi / vb[k], &g);
                    accumulate(&mut grads, self, *b, |k, gi| -gi * val[k] / vb[k], &g);
                }
                Op::Scale(a, s) => accumulate(&mut grads, self, *a, |_, gi| gi * *s, &g),
                Op::Offset(a) => accumulate(&mut grads, self, *a, |_, gi| gi, &g),
                Op::MatVec(w, x) => {
                    let (wn, xn) = (&self.nodes[w.0], &self.nodes[x.0]);
                    let cols = wn.cols;
                    {
                        let gw = slot(&mut grads, *w, wn.value.len());
                        for (r, gr) in g.iter().enumerate() {
                            let row = &mut gw[r * cols..(r + 1) * cols];
                            for (dst, xv) in row.iter_mut().zip(&xn.value) {
                                *dst = *dst + *gr * *xv;
                            }
                        }
                    }
                    let gx = slot(&mut grads, *x, cols);
                    for (r, gr) in g.iter().enumerate() {
                        let row = &wn.value[r * cols..(r + 1) * cols];
                        for (dst, wv) in gx.iter_mut().zip(row) {
                            *dst = *dst + *gr * *wv;
                        }
                    }
                }
                Op::Tanh(a) => accumulate(
                    &mut grads,
                    self,
                    *a,
                    |k, gi| gi * (T::one() - val[k] * val[k]),
                    &g,
                ),
                Op::Sigmoid(a) => accumulate(
                    &mut grads,
                    self,
                    *a,
                    |k, gi| gi * val[k] * (T::one() - val[k]),
                    &g,
                ),
                Op::Exp(a) => {
                    let va = &self.nodes[a.0].value;
                    accumulate(
                        &mut grads,
                        self,
                        *a,
                        |k, gi| {
                            if va[k] > T::max_exp_arg() {
                                T::zero()
                            } else {
                                gi * val[k]
                            }
                        },
                        &g,
                    )
                }
                Op::Log(a) => {
                    let va = &self.nodes[a.0].value;
                    accumulate(&mut grads, self, *a, |k, gi| gi / va[k], &g)
                }
                Op::Softplus(a) => {
                    let va = &self.nodes[a.0].value;
                    accumulate(&mut grads, self, *a, |k, gi| gi * sigmoid(va[k]), &g)
                }
                Op::Square(a) => {
                    let va = &self.nodes[a.0].value;
                    accumulate(
                        &mut grads,
                        self,
                        *a,
                        |k, gi| gi * (va[k] + va[k]),
                        &g,
                    )
                }
                Op::Sqrt(a) => accumulate(
                    &mut grads,
                    self,
                    *a,
                    |k, gi| gi / (val[k] + val[k]),
                    &g,
                ),
                Op::Recip(a) => accumulate(
                    &mut grads,
                    self,
                    *a,
                    |k, gi| -gi * val[k] * val[k],
                    &g,
                ),
                Op::Concat(parts) => {
                    let mut start = 0;
                    for p in parts {
                        let n = self.nodes[p.0].value.len();
                        let gp = slot(&mut grads, *p, n);
                        for (dst, src) in gp.iter_mut().zip(&g[start..start + n]) {
                            *dst = *dst + *src;
                        }
                        start += n;
                    }
                }
                Op::Slice(a, start) => {
                    let n = self.nodes[a.0].value.len();
                    let ga = slot(&mut grads, *a, n);
                    for (dst, src) in ga[*start..*start + g.len()].iter_mut().zip(&g) {
                        *dst = *dst + *src;
                    }
                }
                Op::Sum(a) => accumulate(&mut grads, self, *a, |_, gi| gi, &g),
            }
            grads[i] = Some(g);
        }
        Ok(Gradients { grads })
    }

    /// Parameter adjoints found in `grads`, paired with their ids.
    pub fn param_grads<'a>(
        &'a self,
        grads: &'a Gradients<T>,
    ) -> impl Iterator<Item = (ParamId, &'a [T])> + 'a {
        self.bound
            .iter()
            .flatten()
            .filter_map(move |v| match self.nodes[v.0].op {
                Op::Param(id) => grads.wrt(*v).map(|g| (id, g)),
                _ => None,
            })
    }
}

fn slot<T: Real>(grads: &mut [Option<Vec<T>>], v: Var, len: usize) -> &mut Vec<T> {
    grads[v.0].get_or_insert_with(|| vec![T::zero(); len])
}

fn accumulate<T: Real>(
    grads: &mut [Option<Vec<T>>],
    tape: &Tape<T>,
    target: Var,
    local: impl Fn(usize, T) -> T,
    upstream: &[T],
) {
    let n = tape.nodes[target.0].value.len();
    let dst = slot(grads, target, n);
    if upstream.len() == n {
        for (k, (d, u)) in dst.iter_mut().zip(upstream).enumerate() {
            *d = *d + local(k, *u);
        }
    } else {
        // reductions: a single upstream value fans out to every component
        for (k, d) in dst.iter_mut().enumerate() {
            *d = *d + local(k, upstream[0]);
        }
    }
}

pub(crate) fn sigmoid<T: Real>(x: T) -> T {
    if x >= T::zero() {
        T::one() / (T::one() + (-x).exp())
    } else {
        let e = x.exp();
        e / (T::one() + e)
    }
}

pub(crate) fn softplus<T: Real>(x: T) -> T {
    x.max(T::zero()) + (-x.abs()).exp().ln_1p()
}

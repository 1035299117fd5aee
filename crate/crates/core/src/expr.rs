//! Objective functions as expression DAGs, evaluated over any scalar kind.
//!
//! An [`Expr`] is a flat arena of nodes in topological order. Evaluation walks
//! the arena once, calling into an [`Arithmetic`] backend for every
//! elementary operation, so rounding, interval enclosure and exact rational
//! evaluation all share one definition. Gradients come from [`Dual`], which
//! lifts a backend to sparse forward-mode dual numbers.

use crate::fpenv::FpError;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub struct NodeId(u32);

#[derive(Clone, Debug, PartialEq)]
pub enum Node {
    Var(usize),
    /// The real number denoted by this binary64 value.
    Const(f64),
    Add(NodeId, NodeId),
    Sub(NodeId, NodeId),
    Mul(NodeId, NodeId),
    Div(NodeId, NodeId),
    Neg(NodeId),
    Sqrt(NodeId),
    Pow(NodeId, u32),
    /// Left-to-right sum.
    Sum(Vec<NodeId>),
}

#[derive(Clone, Debug)]
pub struct Expr {
    nodes: Vec<Node>,
    root: NodeId,
    n: usize,
}

/// Incremental construction of an [`Expr`].
#[derive(Default)]
pub struct Builder {
    nodes: Vec<Node>,
    vars: Vec<Option<NodeId>>,
    consts: Vec<(u64, NodeId)>,
}

impl Builder {
    fn push(&mut self, node: Node) -> NodeId {
        self.nodes.push(node);
        NodeId(self.nodes.len() as u32 - 1)
    }

    pub fn var(&mut self, i: usize) -> NodeId {
        if i >= self.vars.len() {
            self.vars.resize(i + 1, None);
        }
        if let Some(id) = self.vars[i] {
            return id;
        }
        let id = self.push(Node::Var(i));
        self.vars[i] = Some(id);
        id
    }

    pub fn constant(&mut self, c: f64) -> NodeId {
        assert!(c.is_finite(), "constants must be finite");
        let bits = c.to_bits();
        if let Some(&(_, id)) = self.consts.iter().find(|(b, _)| *b == bits) {
            return id;
        }
        let id = self.push(Node::Const(c));
        self.consts.push((bits, id));
        id
    }

    pub fn add(&mut self, a: NodeId, b: NodeId) -> NodeId {
        self.push(Node::Add(a, b))
    }

    pub fn sub(&mut self, a: NodeId, b: NodeId) -> NodeId {
        self.push(Node::Sub(a, b))
    }

    pub fn mul(&mut self, a: NodeId, b: NodeId) -> NodeId {
        self.push(Node::Mul(a, b))
    }

    pub fn div(&mut self, a: NodeId, b: NodeId) -> NodeId {
        self.push(Node::Div(a, b))
    }

    pub fn neg(&mut self, a: NodeId) -> NodeId {
        self.push(Node::Neg(a))
    }

    pub fn sqrt(&mut self, a: NodeId) -> NodeId {
        self.push(Node::Sqrt(a))
    }

    pub fn pow(&mut self, a: NodeId, k: u32) -> NodeId {
        self.push(Node::Pow(a, k))
    }

    pub fn sqr(&mut self, a: NodeId) -> NodeId {
        self.pow(a, 2)
    }

    /// `c * a`
    pub fn scale(&mut self, c: f64, a: NodeId) -> NodeId {
        let c = self.constant(c);
        self.mul(c, a)
    }

    /// `a - c`
    pub fn shift(&mut self, a: NodeId, c: f64) -> NodeId {
        let c = self.constant(c);
        self.sub(a, c)
    }

    pub fn sum(&mut self, terms: Vec<NodeId>) -> NodeId {
        assert!(!terms.is_empty(), "empty sum");
        if terms.len() == 1 {
            return terms[0];
        }
        self.push(Node::Sum(terms))
    }

    pub fn finish(self, root: NodeId, n: usize) -> Expr {
        assert!(self.vars.len() <= n, "variable index out of range");
        Expr {
            nodes: self.nodes,
            root,
            n,
        }
    }
}

impl Expr {
    /// Build with a closure returning the root node.
    pub fn build(n: usize, f: impl FnOnce(&mut Builder) -> NodeId) -> Expr {
        let mut b = Builder::default();
        let root = f(&mut b);
        b.finish(root, n)
    }

    pub fn dim(&self) -> usize {
        self.n
    }

    pub fn nodes(&self) -> &[Node] {
        &self.nodes
    }

    pub fn eval<A: Arithmetic>(&self, a: &A) -> Result<A::Value, FpError> {
        let mut vals: Vec<A::Value> = Vec::with_capacity(self.nodes.len());
        for node in &self.nodes {
            let v = match node {
                Node::Var(i) => a.input(*i)?,
                Node::Const(c) => a.constant(*c)?,
                Node::Add(x, y) => a.add(&vals[x.0 as usize], &vals[y.0 as usize])?,
                Node::Sub(x, y) => a.sub(&vals[x.0 as usize], &vals[y.0 as usize])?,
                Node::Mul(x, y) => a.mul(&vals[x.0 as usize], &vals[y.0 as usize])?,
                Node::Div(x, y) => a.div(&vals[x.0 as usize], &vals[y.0 as usize])?,
                Node::Neg(x) => a.neg(&vals[x.0 as usize])?,
                Node::Sqrt(x) => a.sqrt(&vals[x.0 as usize])?,
                Node::Pow(x, k) => a.powi(&vals[x.0 as usize], *k)?,
                Node::Sum(ts) => {
                    let refs: Vec<&A::Value> = ts.iter().map(|t| &vals[t.0 as usize]).collect();
                    a.sum(&refs)?
                }
            };
            vals.push(v);
        }
        Ok(vals.swap_remove(self.root.0 as usize))
    }

    /// Value and gradient through forward-mode dual numbers.
    pub fn eval_with_gradient<A: Arithmetic>(
        &self,
        a: &A,
    ) -> Result<(A::Value, Vec<A::Value>), FpError> {
        let dual = Dual {
            inner: a,
            n: self.n,
        };
        let r = self.eval(&dual)?;
        let zero = a.constant(0.0)?;
        let mut g = vec![zero; self.n];
        for (i, d) in r.d {
            g[i as usize] = d;
        }
        Ok((r.v, g))
    }
}

/// Scalar semantics for expression evaluation.
pub trait Arithmetic {
    type Value: Clone;

    fn input(&self, i: usize) -> Result<Self::Value, FpError>;
    fn constant(&self, c: f64) -> Result<Self::Value, FpError>;
    fn add(&self, a: &Self::Value, b: &Self::Value) -> Result<Self::Value, FpError>;
    fn sub(&self, a: &Self::Value, b: &Self::Value) -> Result<Self::Value, FpError>;
    fn mul(&self, a: &Self::Value, b: &Self::Value) -> Result<Self::Value, FpError>;
    fn div(&self, a: &Self::Value, b: &Self::Value) -> Result<Self::Value, FpError>;
    fn neg(&self, a: &Self::Value) -> Result<Self::Value, FpError>;
    fn sqrt(&self, a: &Self::Value) -> Result<Self::Value, FpError>;

    /// `a^k` as `k - 1` successive multiplications by `a`.
    fn powi(&self, a: &Self::Value, k: u32) -> Result<Self::Value, FpError> {
        if k == 0 {
            return self.constant(1.0);
        }
        let mut acc = a.clone();
        for _ in 1..k {
            acc = self.mul(&acc, a)?;
        }
        Ok(acc)
    }

    fn sum(&self, terms: &[&Self::Value]) -> Result<Self::Value, FpError> {
        let mut acc = terms[0].clone();
        for t in &terms[1..] {
            acc = self.add(&acc, t)?;
        }
        Ok(acc)
    }
}

/// Value with a sparse derivative vector, entries sorted by variable index.
#[derive(Clone, Debug)]
pub struct DualValue<V> {
    pub v: V,
    pub d: Vec<(u32, V)>,
}

/// Forward-mode differentiation over a backend.
pub struct Dual<'a, A> {
    inner: &'a A,
    n: usize,
}

impl<'a, A: Arithmetic> Dual<'a, A> {
    pub fn new(inner: &'a A, n: usize) -> Self {
        Self { inner, n }
    }

    fn scale(&self, d: &[(u32, A::Value)], c: &A::Value) -> Result<Vec<(u32, A::Value)>, FpError> {
        d.iter()
            .map(|(i, x)| Ok((*i, self.inner.mul(x, c)?)))
            .collect()
    }

    /// Combine two sparse vectors; `both` handles shared indices and `right`
    /// maps entries present only on the right.
    fn merge(
        &self,
        a: &[(u32, A::Value)],
        b: &[(u32, A::Value)],
        both: impl Fn(&A::Value, &A::Value) -> Result<A::Value, FpError>,
        right: impl Fn(&A::Value) -> Result<A::Value, FpError>,
    ) -> Result<Vec<(u32, A::Value)>, FpError> {
        let mut out = Vec::with_capacity(a.len().max(b.len()));
        let (mut i, mut j) = (0, 0);
        while i < a.len() || j < b.len() {
            if j >= b.len() || (i < a.len() && a[i].0 < b[j].0) {
                out.push(a[i].clone());
                i += 1;
            } else if i >= a.len() || b[j].0 < a[i].0 {
                out.push((b[j].0, right(&b[j].1)?));
                j += 1;
            } else {
                out.push((a[i].0, both(&a[i].1, &b[j].1)?));
                i += 1;
                j += 1;
            }
        }
        Ok(out)
    }
}

impl<A: Arithmetic> Arithmetic for Dual<'_, A> {
    type Value = DualValue<A::Value>;

    fn input(&self, i: usize) -> Result<Self::Value, FpError> {
        Ok(DualValue {
            v: self.inner.input(i)?,
            d: vec![(i as u32, self.inner.constant(1.0)?)],
        })
    }

    fn constant(&self, c: f64) -> Result<Self::Value, FpError> {
        Ok(DualValue {
            v: self.inner.constant(c)?,
            d: Vec::new(),
        })
    }

    fn add(&self, a: &Self::Value, b: &Self::Value) -> Result<Self::Value, FpError> {
        let inner = self.inner;
        Ok(DualValue {
            v: inner.add(&a.v, &b.v)?,
            d: self.merge(&a.d, &b.d, |x, y| inner.add(x, y), |y| Ok(y.clone()))?,
        })
    }

    fn sub(&self, a: &Self::Value, b: &Self::Value) -> Result<Self::Value, FpError> {
        let inner = self.inner;
        Ok(DualValue {
            v: inner.sub(&a.v, &b.v)?,
            d: self.merge(&a.d, &b.d, |x, y| inner.sub(x, y), |y| inner.neg(y))?,
        })
    }

    fn mul(&self, a: &Self::Value, b: &Self::Value) -> Result<Self::Value, FpError> {
        let inner = self.inner;
        // (a b)' = a' b + a b'
        let left = self.scale(&a.d, &b.v)?;
        let d = self.merge(
            &left,
            &b.d,
            |x, y| inner.add(x, &inner.mul(&a.v, y)?),
            |y| inner.mul(&a.v, y),
        )?;
        Ok(DualValue {
            v: inner.mul(&a.v, &b.v)?,
            d,
        })
    }

    fn div(&self, a: &Self::Value, b: &Self::Value) -> Result<Self::Value, FpError> {
        let inner = self.inner;
        let q = inner.div(&a.v, &b.v)?;
        // (a/b)' = (a' - q b') / b
        let num = self.merge(
            &a.d,
            &b.d,
            |x, y| inner.sub(x, &inner.mul(&q, y)?),
            |y| inner.neg(&inner.mul(&q, y)?),
        )?;
        let d = num
            .iter()
            .map(|(i, x)| Ok((*i, inner.div(x, &b.v)?)))
            .collect::<Result<_, FpError>>()?;
        Ok(DualValue { v: q, d })
    }

    fn neg(&self, a: &Self::Value) -> Result<Self::Value, FpError> {
        Ok(DualValue {
            v: self.inner.neg(&a.v)?,
            d: a.d
                .iter()
                .map(|(i, x)| Ok((*i, self.inner.neg(x)?)))
                .collect::<Result<_, FpError>>()?,
        })
    }

    fn sqrt(&self, a: &Self::Value) -> Result<Self::Value, FpError> {
        let inner = self.inner;
        let r = inner.sqrt(&a.v)?;
        // (sqrt a)' = a' / (r + r)
        let two_r = inner.add(&r, &r)?;
        let d =
            a.d.iter()
                .map(|(i, x)| Ok((*i, inner.div(x, &two_r)?)))
                .collect::<Result<_, FpError>>()?;
        Ok(DualValue { v: r, d })
    }

    fn powi(&self, a: &Self::Value, k: u32) -> Result<Self::Value, FpError> {
        let inner = self.inner;
        if k == 0 {
            return self.constant(1.0);
        }
        let v = inner.powi(&a.v, k)?;
        if k == 1 {
            return Ok(DualValue { v, d: a.d.clone() });
        }
        // (a^k)' = (k a^(k-1)) a'
        let c = inner.mul(&inner.constant(k as f64)?, &inner.powi(&a.v, k - 1)?)?;
        Ok(DualValue {
            v,
            d: self.scale(&a.d, &c)?,
        })
    }

    fn sum(&self, terms: &[&Self::Value]) -> Result<Self::Value, FpError> {
        let inner = self.inner;
        let vals: Vec<&A::Value> = terms.iter().map(|t| &t.v).collect();
        let v = inner.sum(&vals)?;
        // Absent entries are exact zeros, so skipping them leaves every
        // accumulation unchanged.
        let mut acc: Vec<Option<A::Value>> = vec![None; self.n];
        let mut touched = Vec::new();
        for t in terms {
            for (i, x) in &t.d {
                let slot = &mut acc[*i as usize];
                *slot = Some(match slot.take() {
                    Some(s) => inner.add(&s, x)?,
                    None => {
                        touched.push(*i);
                        x.clone()
                    }
                });
            }
        }
        touched.sort_unstable();
        let d = touched
            .into_iter()
            .map(|i| (i, acc[i as usize].take().expect("touched entry")))
            .collect();
        Ok(DualValue { v, d })
    }
}

/// Plain binary64 evaluation without rounding control; for diagnostics.
pub struct F64Arith<'a> {
    pub x: &'a [f64],
}

impl Arithmetic for F64Arith<'_> {
    type Value = f64;
    fn input(&self, i: usize) -> Result<f64, FpError> {
        Ok(self.x[i])
    }
    fn constant(&self, c: f64) -> Result<f64, FpError> {
        Ok(c)
    }
    fn add(&self, a: &f64, b: &f64) -> Result<f64, FpError> {
        Ok(a + b)
    }
    fn sub(&self, a: &f64, b: &f64) -> Result<f64, FpError> {
        Ok(a - b)
    }
    fn mul(&self, a: &f64, b: &f64) -> Result<f64, FpError> {
        Ok(a * b)
    }
    fn div(&self, a: &f64, b: &f64) -> Result<f64, FpError> {
        if *b == 0.0 {
            return Err(FpError::DivisionByZero);
        }
        Ok(a / b)
    }
    fn neg(&self, a: &f64) -> Result<f64, FpError> {
        Ok(-a)
    }
    fn sqrt(&self, a: &f64) -> Result<f64, FpError> {
        if *a < 0.0 {
            return Err(FpError::NegativeSqrt);
        }
        Ok(a.sqrt())
    }
}

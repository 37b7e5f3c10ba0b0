use alloc::vec::Vec;

use super::matrix::{row_kron, DenseMatrix};
use crate::error::{invalid, Result};

/// Handle to a recorded tape node.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct NodeId(usize);

/// Reverse-mode gradient tape over row-batched matrix values (one sample
/// per row). The primitive set is exactly what the two-stage losses need:
/// affine maps, elementwise ReLU, row-wise Kronecker products, products
/// with constant matrices, and a squared-error reduction to a scalar.
///
/// Single-threaded by construction: one tape per training step, never
/// shared. Nodes are appended in evaluation order, so inputs always
/// precede their consumers.
#[derive(Debug, Default)]
pub struct GradTape {
    nodes: Vec<Node>,
}

#[derive(Debug)]
struct Node {
    value: DenseMatrix,
    op: Op,
}

#[derive(Debug)]
enum Op {
    Constant,
    Param,
    /// x·Wᵀ + 1·b with parameter nodes W (out×in) and b (1×out).
    Affine { x: NodeId, w: NodeId, b: NodeId },
    Relu { x: NodeId },
    RowKron { a: NodeId, b: NodeId },
    /// x·Mᵀ for a constant M.
    MulConstT { x: NodeId, m: DenseMatrix },
    /// C·x for a constant C.
    LeftMulConst { x: NodeId, c: DenseMatrix },
    /// (1/rows)·Σ (x − T)², a 1×1 node.
    SqErrMean { x: NodeId, target: DenseMatrix },
}

impl GradTape {
    pub fn new() -> Self {
        GradTape::default()
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    pub fn value(&self, id: NodeId) -> &DenseMatrix {
        &self.nodes[id.0].value
    }

    pub fn constant(&mut self, value: DenseMatrix) -> NodeId {
        self.push(value, Op::Constant)
    }

    pub fn param(&mut self, value: DenseMatrix) -> NodeId {
        self.push(value, Op::Param)
    }

    pub fn affine(&mut self, x: NodeId, w: NodeId, b: NodeId) -> Result<NodeId> {
        let (xm, wm, bm) = (self.value(x), self.value(w), self.value(b));
        if wm.cols() != xm.cols() {
            return Err(invalid("affine: weight input dim mismatch"));
        }
        if bm.rows() != 1 || bm.cols() != wm.rows() {
            return Err(invalid("affine: bias must be 1×out"));
        }
        let mut value = xm.matmul_t(wm)?;
        let out = value.cols();
        for i in 0..value.rows() {
            let row = &mut value.data_mut()[i * out..(i + 1) * out];
            for (r, &bj) in row.iter_mut().zip(bm.data()) {
                *r += bj;
            }
        }
        Ok(self.push(value, Op::Affine { x, w, b }))
    }

    pub fn relu(&mut self, x: NodeId) -> NodeId {
        let mut value = self.value(x).clone();
        for v in value.data_mut() {
            if *v < 0.0 {
                *v = 0.0;
            }
        }
        self.push(value, Op::Relu { x })
    }

    pub fn row_kron(&mut self, a: NodeId, b: NodeId) -> Result<NodeId> {
        let value = row_kron(self.value(a), self.value(b))?;
        Ok(self.push(value, Op::RowKron { a, b }))
    }

    /// value = x·Mᵀ with M constant.
    pub fn mul_const_t(&mut self, x: NodeId, m: &DenseMatrix) -> Result<NodeId> {
        let value = self.value(x).matmul_t(m)?;
        Ok(self.push(value, Op::MulConstT { x, m: m.clone() }))
    }

    /// value = C·x with C constant.
    pub fn left_mul_const(&mut self, c: &DenseMatrix, x: NodeId) -> Result<NodeId> {
        let value = c.matmul(self.value(x))?;
        Ok(self.push(value, Op::LeftMulConst { x, c: c.clone() }))
    }

    /// Scalar node (1/rows)·Σ(x − target)².
    pub fn sq_err_mean(&mut self, x: NodeId, target: &DenseMatrix) -> Result<NodeId> {
        let xm = self.value(x);
        if xm.rows() != target.rows() || xm.cols() != target.cols() {
            return Err(invalid("sq_err_mean: target shape mismatch"));
        }
        let mut acc = 0.0;
        for (a, b) in xm.data().iter().zip(target.data()) {
            let d = a - b;
            acc += d * d;
        }
        let value = DenseMatrix::from_vec_unchecked(1, 1, alloc::vec![acc / xm.rows() as f64]);
        Ok(self.push(value, Op::SqErrMean { x, target: target.clone() }))
    }

    fn push(&mut self, value: DenseMatrix, op: Op) -> NodeId {
        self.nodes.push(Node { value, op });
        NodeId(self.nodes.len() - 1)
    }

    /// Reverse pass from a scalar output node.
    pub fn backward(&self, output: NodeId) -> Result<Gradients> {
        let out = self.value(output);
        if out.rows() != 1 || out.cols() != 1 {
            return Err(invalid("backward output must be a 1×1 scalar node"));
        }
        let mut adj: Vec<Option<DenseMatrix>> = alloc::vec![None; self.nodes.len()];
        adj[output.0] = Some(DenseMatrix::from_vec_unchecked(1, 1, alloc::vec![1.0]));
        for id in (0..=output.0).rev() {
            let Some(d) = adj[id].take() else { continue };
            match &self.nodes[id].op {
                Op::Constant | Op::Param => {}
                Op::Affine { x, w, b } => {
                    let dx = d.matmul(self.value(*w))?;
                    let dw = d.t_matmul(self.value(*x))?;
                    let mut db = DenseMatrix::zeros(1, d.cols());
                    for i in 0..d.rows() {
                        for (acc, &v) in db.data_mut().iter_mut().zip(d.row(i)) {
                            *acc += v;
                        }
                    }
                    accumulate(&mut adj[x.0], dx)?;
                    accumulate(&mut adj[w.0], dw)?;
                    accumulate(&mut adj[b.0], db)?;
                }
                Op::Relu { x } => {
                    let mut dx = d.clone();
                    for (g, &v) in dx.data_mut().iter_mut().zip(self.value(*x).data()) {
                        if v <= 0.0 {
                            *g = 0.0;
                        }
                    }
                    accumulate(&mut adj[x.0], dx)?;
                }
                Op::RowKron { a, b } => {
                    let (am, bm) = (self.value(*a), self.value(*b));
                    let (da, db) = (am.cols(), bm.cols());
                    let mut ga = DenseMatrix::zeros(am.rows(), da);
                    let mut gb = DenseMatrix::zeros(bm.rows(), db);
                    for i in 0..am.rows() {
                        let drow = d.row(i);
                        let (ar, br) = (am.row(i), bm.row(i));
                        let garow = ga.row_mut(i);
                        for p in 0..da {
                            let seg = &drow[p * db..(p + 1) * db];
                            let mut acc = 0.0;
                            for (&dv, &bv) in seg.iter().zip(br) {
                                acc += dv * bv;
                            }
                            garow[p] = acc;
                        }
                        let gbrow = gb.row_mut(i);
                        for (p, &av) in ar.iter().enumerate() {
                            let seg = &drow[p * db..(p + 1) * db];
                            for (g, &dv) in gbrow.iter_mut().zip(seg) {
                                *g += av * dv;
                            }
                        }
                    }
                    accumulate(&mut adj[a.0], ga)?;
                    accumulate(&mut adj[b.0], gb)?;
                }
                Op::MulConstT { x, m } => {
                    accumulate(&mut adj[x.0], d.matmul(m)?)?;
                }
                Op::LeftMulConst { x, c } => {
                    accumulate(&mut adj[x.0], c.t_matmul(&d)?)?;
                }
                Op::SqErrMean { x, target } => {
                    let xm = self.value(*x);
                    let scale = 2.0 / xm.rows() as f64 * d.get(0, 0);
                    let mut dx = xm.sub(target)?;
                    dx.scale(scale);
                    accumulate(&mut adj[x.0], dx)?;
                }
            }
            adj[id] = Some(d);
        }
        let shapes = self.nodes.iter().map(|n| (n.value.rows(), n.value.cols())).collect();
        Ok(Gradients { adj, shapes })
    }
}

fn accumulate(slot: &mut Option<DenseMatrix>, delta: DenseMatrix) -> Result<()> {
    match slot {
        Some(acc) => acc.add_assign(&delta),
        None => {
            *slot = Some(delta);
            Ok(())
        }
    }
}

/// Adjoints produced by a backward pass, queryable per node.
#[derive(Debug)]
pub struct Gradients {
    adj: Vec<Option<DenseMatrix>>,
    shapes: Vec<(usize, usize)>,
}

impl Gradients {
    /// Gradient of the output wrt the node's value; exactly zero (of the
    /// node's shape) when the output does not depend on it.
    pub fn grad(&self, id: NodeId) -> DenseMatrix {
        match &self.adj[id.0] {
            Some(g) => g.clone(),
            None => {
                let (r, c) = self.shapes[id.0];
                DenseMatrix::zeros(r, c)
            }
        }
    }
}

/// Gradients of a recorded scalar wrt every parameter on the tape.
pub fn grad_backward(tape: &GradTape, output: NodeId) -> Result<Gradients> {
    tape.backward(output)
}

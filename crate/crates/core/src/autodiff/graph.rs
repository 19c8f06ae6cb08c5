//! Define-by-run computation graph over dense matrices.
//!
//! Every forward op appends a node holding its value and the information
//! needed to compute its vector-Jacobian product. Nodes are appended after
//! their inputs, so a reverse sweep over node indices is a valid
//! topological order and visits each node exactly once.

use alloc::vec;
use alloc::vec::Vec;

use rand::{Rng, RngCore};

use crate::error::{Error, Result};
use crate::matrix::Matrix;

/// Lower/upper clamp applied to predictions before taking logarithms in BCE.
pub const BCE_EPS: f64 = 1e-7;

/// Handle to a node of a [`Graph`].
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct Var(usize);

impl Var {
    pub fn index(self) -> usize {
        self.0
    }
}

/// Weighted row combination: output row `i` is `Σ w · input[j]` over the
/// `(j, w)` pairs in `terms[i]`.
pub type RowCombination = Vec<Vec<(usize, f64)>>;

#[derive(Debug, Clone)]
enum Op {
    Leaf,
    MatMul(Var, Var),
    AddBias(Var, Var),
    LeakyRelu(Var, f64),
    Dropout(Var, Matrix),
    Sigmoid(Var),
    ConcatCols(Var, Var),
    SelectRows(Var, Vec<usize>),
    MeanBce(Var, Vec<f64>),
    MeanRowL1(Var, Var),
    L2NormRows(Var),
    WeightedRowSum(Var, RowCombination),
    Add(Var, Var),
    Scale(Var, f64),
    Sum(Var),
    Mean(Var),
}

#[derive(Debug, Clone)]
struct Node {
    value: Matrix,
    op: Op,
    requires_grad: bool,
    grad: Option<Matrix>,
}

/// A computation graph. Built fresh for every forward pass.
#[derive(Debug, Default, Clone)]
pub struct Graph {
    nodes: Vec<Node>,
}

impl Graph {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    pub fn value(&self, v: Var) -> &Matrix {
        &self.nodes[v.0].value
    }

    pub fn shape(&self, v: Var) -> (usize, usize) {
        self.nodes[v.0].value.shape()
    }

    pub fn requires_grad(&self, v: Var) -> bool {
        self.nodes[v.0].requires_grad
    }

    /// Accumulated gradient of a leaf, if any backward pass reached it.
    pub fn grad(&self, v: Var) -> Option<&Matrix> {
        self.nodes[v.0].grad.as_ref()
    }

    pub fn zero_grad(&mut self) {
        for n in &mut self.nodes {
            n.grad = None;
        }
    }

    pub fn leaf(&mut self, value: Matrix, requires_grad: bool) -> Var {
        self.push(value, Op::Leaf, requires_grad)
    }

    pub fn constant(&mut self, value: Matrix) -> Var {
        self.leaf(value, false)
    }

    fn push(&mut self, value: Matrix, op: Op, requires_grad: bool) -> Var {
        self.nodes.push(Node {
            value,
            op,
            requires_grad,
            grad: None,
        });
        Var(self.nodes.len() - 1)
    }

    fn rg(&self, vars: &[Var]) -> bool {
        vars.iter().any(|v| self.nodes[v.0].requires_grad)
    }

    fn shape_err(&self, op: &'static str, a: Var, b: Var) -> Error {
        Error::Shape {
            op,
            lhs: self.shape(a),
            rhs: self.shape(b),
        }
    }

    pub fn matmul(&mut self, a: Var, b: Var) -> Result<Var> {
        let value = self.value(a).matmul(self.value(b))?;
        let rg = self.rg(&[a, b]);
        Ok(self.push(value, Op::MatMul(a, b), rg))
    }

    /// Adds a `1 x cols` row vector to every row of `a`.
    pub fn add_bias(&mut self, a: Var, bias: Var) -> Result<Var> {
        let (rows, cols) = self.shape(a);
        if self.shape(bias) != (1, cols) {
            return Err(self.shape_err("add_bias", a, bias));
        }
        let mut value = self.value(a).clone();
        let b = self.value(bias).as_slice().to_vec();
        for i in 0..rows {
            for (x, bj) in value.row_mut(i).iter_mut().zip(&b) {
                *x += bj;
            }
        }
        let rg = self.rg(&[a, bias]);
        Ok(self.push(value, Op::AddBias(a, bias), rg))
    }

    pub fn leaky_relu(&mut self, a: Var, slope: f64) -> Var {
        let value = self.value(a).map(|x| if x > 0.0 { x } else { slope * x });
        let rg = self.rg(&[a]);
        self.push(value, Op::LeakyRelu(a, slope), rg)
    }

    /// Inverted dropout: in training mode each entry is zeroed with
    /// probability `p` and survivors are scaled by `1/(1-p)`. In eval mode
    /// (`rng == None`) the input is returned unchanged.
    pub fn dropout(&mut self, a: Var, p: f64, rng: Option<&mut dyn RngCore>) -> Result<Var> {
        if !(0.0..1.0).contains(&p) {
            return Err(Error::Domain {
                op: "dropout",
                value: p,
            });
        }
        let Some(rng) = rng else { return Ok(a) };
        if p == 0.0 {
            return Ok(a);
        }
        let keep = 1.0 - p;
        let (rows, cols) = self.shape(a);
        let mut mask = Matrix::zeros(rows, cols);
        for m in mask.as_mut_slice() {
            if rng.random::<f64>() < keep {
                *m = 1.0 / keep;
            }
        }
        let mut value = self.value(a).clone();
        for (x, m) in value.as_mut_slice().iter_mut().zip(mask.as_slice()) {
            *x *= m;
        }
        let rg = self.rg(&[a]);
        Ok(self.push(value, Op::Dropout(a, mask), rg))
    }

    pub fn sigmoid(&mut self, a: Var) -> Var {
        let value = self.value(a).map(sigmoid);
        let rg = self.rg(&[a]);
        self.push(value, Op::Sigmoid(a), rg)
    }

    pub fn concat_cols(&mut self, a: Var, b: Var) -> Result<Var> {
        let (ra, ca) = self.shape(a);
        let (rb, cb) = self.shape(b);
        if ra != rb {
            return Err(self.shape_err("concat_cols", a, b));
        }
        let mut value = Matrix::zeros(ra, ca + cb);
        for i in 0..ra {
            let row = value.row_mut(i);
            row[..ca].copy_from_slice(self.nodes[a.0].value.row(i));
            row[ca..].copy_from_slice(self.nodes[b.0].value.row(i));
        }
        let rg = self.rg(&[a, b]);
        Ok(self.push(value, Op::ConcatCols(a, b), rg))
    }

    pub fn select_rows(&mut self, a: Var, idx: &[usize]) -> Result<Var> {
        let (rows, _) = self.shape(a);
        if let Some(&bad) = idx.iter().find(|&&i| i >= rows) {
            return Err(Error::Shape {
                op: "select_rows",
                lhs: self.shape(a),
                rhs: (bad, 0),
            });
        }
        let value = self.value(a).select_rows(idx);
        let rg = self.rg(&[a]);
        Ok(self.push(value, Op::SelectRows(a, idx.to_vec()), rg))
    }

    /// Mean binary cross-entropy of an `n x 1` prediction column against
    /// `{0, 1}` targets. Predictions are clamped to `[BCE_EPS, 1 - BCE_EPS]`
    /// before the logarithm; the gradient is taken at the clamped value.
    pub fn mean_bce(&mut self, pred: Var, target: &[f64]) -> Result<Var> {
        let (rows, cols) = self.shape(pred);
        if cols != 1 || rows != target.len() || rows == 0 {
            return Err(Error::Shape {
                op: "mean_bce",
                lhs: (rows, cols),
                rhs: (target.len(), 1),
            });
        }
        if let Some(&t) = target.iter().find(|&&t| t != 0.0 && t != 1.0) {
            return Err(Error::Domain {
                op: "mean_bce target",
                value: t,
            });
        }
        let p = self.value(pred).as_slice();
        if let Some(&bad) = p.iter().find(|&&v| !(0.0..=1.0).contains(&v)) {
            return Err(Error::Domain {
                op: "mean_bce",
                value: bad,
            });
        }
        let mut total = 0.0;
        for (&pi, &ti) in p.iter().zip(target) {
            let pc = clamp_prob(pi);
            total -= ti * libm::log(pc) + (1.0 - ti) * libm::log(1.0 - pc);
        }
        let value = Matrix::scalar(total / rows as f64);
        let rg = self.rg(&[pred]);
        Ok(self.push(value, Op::MeanBce(pred, target.to_vec()), rg))
    }

    /// Mean over rows of the per-row L1 distance `Σ_c |a - b|`.
    pub fn mean_row_l1(&mut self, a: Var, b: Var) -> Result<Var> {
        if self.shape(a) != self.shape(b) || self.shape(a).0 == 0 {
            return Err(self.shape_err("mean_row_l1", a, b));
        }
        let rows = self.shape(a).0 as f64;
        let total: f64 = self
            .value(a)
            .as_slice()
            .iter()
            .zip(self.value(b).as_slice())
            .map(|(x, y)| libm::fabs(x - y))
            .sum();
        let rg = self.rg(&[a, b]);
        Ok(self.push(Matrix::scalar(total / rows), Op::MeanRowL1(a, b), rg))
    }

    /// Euclidean norm of every row, as an `n x 1` column.
    pub fn l2_norm_rows(&mut self, a: Var) -> Var {
        let m = self.value(a);
        let norms: Vec<f64> = (0..m.rows())
            .map(|i| libm::sqrt(m.row(i).iter().map(|x| x * x).sum()))
            .collect();
        let rg = self.rg(&[a]);
        self.push(Matrix::column(&norms), Op::L2NormRows(a), rg)
    }

    /// Output row `i` is the weighted sum of the input rows listed in
    /// `terms[i]`. Row indices are fixed data: no gradient flows through
    /// the selection, only through the selected values.
    pub fn weighted_row_sum(&mut self, a: Var, terms: RowCombination) -> Result<Var> {
        let (rows, cols) = self.shape(a);
        let mut value = Matrix::zeros(terms.len(), cols);
        for (i, t) in terms.iter().enumerate() {
            for &(j, w) in t {
                if j >= rows {
                    return Err(Error::Shape {
                        op: "weighted_row_sum",
                        lhs: (rows, cols),
                        rhs: (j, 0),
                    });
                }
                let src = self.nodes[a.0].value.row(j);
                for (o, s) in value.row_mut(i).iter_mut().zip(src) {
                    *o += w * s;
                }
            }
        }
        let rg = self.rg(&[a]);
        Ok(self.push(value, Op::WeightedRowSum(a, terms), rg))
    }

    pub fn add(&mut self, a: Var, b: Var) -> Result<Var> {
        if self.shape(a) != self.shape(b) {
            return Err(self.shape_err("add", a, b));
        }
        let mut value = self.value(a).clone();
        value.add_assign(self.value(b));
        let rg = self.rg(&[a, b]);
        Ok(self.push(value, Op::Add(a, b), rg))
    }

    pub fn scale(&mut self, a: Var, c: f64) -> Var {
        let value = self.value(a).map(|x| c * x);
        let rg = self.rg(&[a]);
        self.push(value, Op::Scale(a, c), rg)
    }

    pub fn sum(&mut self, a: Var) -> Var {
        let value = Matrix::scalar(self.value(a).sum());
        let rg = self.rg(&[a]);
        self.push(value, Op::Sum(a), rg)
    }

    pub fn mean(&mut self, a: Var) -> Result<Var> {
        let n = self.value(a).len();
        if n == 0 {
            return Err(Error::Shape {
                op: "mean",
                lhs: self.shape(a),
                rhs: (1, 1),
            });
        }
        let value = Matrix::scalar(self.value(a).sum() / n as f64);
        let rg = self.rg(&[a]);
        Ok(self.push(value, Op::Mean(a), rg))
    }

    /// Reverse sweep from a scalar `loss`. Gradients of leaves that require
    /// them are added to whatever a previous sweep left there.
    pub fn backward(&mut self, loss: Var) -> Result<()> {
        let shape = self.shape(loss);
        if shape != (1, 1) {
            return Err(Error::NonScalarLoss(shape));
        }
        if !self.requires_grad(loss) {
            return Ok(());
        }
        let mut adj: Vec<Option<Matrix>> = vec![None; loss.0 + 1];
        adj[loss.0] = Some(Matrix::scalar(1.0));
        let mut contrib: Vec<(Var, Matrix)> = Vec::with_capacity(2);
        let mut leaf_grads: Vec<(usize, Matrix)> = Vec::new();
        for i in (0..=loss.0).rev() {
            let Some(g) = adj[i].take() else { continue };
            let node = &self.nodes[i];
            if !node.requires_grad {
                continue;
            }
            if matches!(node.op, Op::Leaf) {
                leaf_grads.push((i, g));
                continue;
            }
            contrib.clear();
            self.vjp(node, g, &mut contrib);
            for (v, m) in contrib.drain(..) {
                if !self.nodes[v.0].requires_grad {
                    continue;
                }
                match &mut adj[v.0] {
                    Some(acc) => acc.add_assign(&m),
                    slot @ None => *slot = Some(m),
                }
            }
        }
        for (i, g) in leaf_grads {
            match &mut self.nodes[i].grad {
                Some(acc) => acc.add_assign(&g),
                slot @ None => *slot = Some(g),
            }
        }
        Ok(())
    }

    /// Pushes the input adjoints of `node` given its output adjoint `g`.
    fn vjp(&self, node: &Node, g: Matrix, out: &mut Vec<(Var, Matrix)>) {
        match &node.op {
            Op::Leaf => {}
            Op::MatMul(a, b) => {
                let av = self.value(*a);
                let bv = self.value(*b);
                out.push((*a, g.matmul_t(bv)));
                out.push((*b, av.t_matmul(&g)));
            }
            Op::AddBias(a, b) => {
                let mut gb = Matrix::zeros(1, g.cols());
                for i in 0..g.rows() {
                    for (acc, x) in gb.as_mut_slice().iter_mut().zip(g.row(i)) {
                        *acc += x;
                    }
                }
                out.push((*b, gb));
                out.push((*a, g));
            }
            Op::LeakyRelu(a, slope) => {
                let mut ga = g;
                for (x, inp) in ga.as_mut_slice().iter_mut().zip(self.value(*a).as_slice()) {
                    if *inp <= 0.0 {
                        *x *= slope;
                    }
                }
                out.push((*a, ga));
            }
            Op::Dropout(a, mask) => {
                let mut ga = g;
                for (x, m) in ga.as_mut_slice().iter_mut().zip(mask.as_slice()) {
                    *x *= m;
                }
                out.push((*a, ga));
            }
            Op::Sigmoid(a) => {
                let mut ga = g;
                for (x, s) in ga.as_mut_slice().iter_mut().zip(node.value.as_slice()) {
                    *x *= s * (1.0 - s);
                }
                out.push((*a, ga));
            }
            Op::ConcatCols(a, b) => {
                let ca = self.shape(*a).1;
                let cb = self.shape(*b).1;
                let mut ga = Matrix::zeros(g.rows(), ca);
                let mut gb = Matrix::zeros(g.rows(), cb);
                for i in 0..g.rows() {
                    ga.row_mut(i).copy_from_slice(&g.row(i)[..ca]);
                    gb.row_mut(i).copy_from_slice(&g.row(i)[ca..]);
                }
                out.push((*a, ga));
                out.push((*b, gb));
            }
            Op::SelectRows(a, idx) => {
                let (rows, cols) = self.shape(*a);
                let mut ga = Matrix::zeros(rows, cols);
                for (k, &i) in idx.iter().enumerate() {
                    for (acc, x) in ga.row_mut(i).iter_mut().zip(g.row(k)) {
                        *acc += x;
                    }
                }
                out.push((*a, ga));
            }
            Op::MeanBce(pred, target) => {
                let scale = g.item() / target.len() as f64;
                let p = self.value(*pred).as_slice();
                let gp: Vec<f64> = p
                    .iter()
                    .zip(target)
                    .map(|(&pi, &ti)| {
                        let pc = clamp_prob(pi);
                        scale * (pc - ti) / (pc * (1.0 - pc))
                    })
                    .collect();
                out.push((*pred, Matrix::column(&gp)));
            }
            Op::MeanRowL1(a, b) => {
                let scale = g.item() / self.shape(*a).0 as f64;
                let diff_sign = |x: f64| {
                    if x > 0.0 {
                        scale
                    } else if x < 0.0 {
                        -scale
                    } else {
                        0.0
                    }
                };
                let av = self.value(*a);
                let bv = self.value(*b);
                let signs: Vec<f64> = av
                    .as_slice()
                    .iter()
                    .zip(bv.as_slice())
                    .map(|(x, y)| diff_sign(x - y))
                    .collect();
                let (r, c) = av.shape();
                let ga = Matrix::from_vec(r, c, signs).expect("shape preserved");
                out.push((*b, ga.map(|x| -x)));
                out.push((*a, ga));
            }
            Op::L2NormRows(a) => {
                let av = self.value(*a);
                let mut ga = Matrix::zeros(av.rows(), av.cols());
                for i in 0..av.rows() {
                    let norm = node.value[(i, 0)];
                    if norm > 0.0 {
                        let s = g[(i, 0)] / norm;
                        for (o, x) in ga.row_mut(i).iter_mut().zip(av.row(i)) {
                            *o = s * x;
                        }
                    }
                }
                out.push((*a, ga));
            }
            Op::WeightedRowSum(a, terms) => {
                let (rows, cols) = self.shape(*a);
                let mut ga = Matrix::zeros(rows, cols);
                for (i, t) in terms.iter().enumerate() {
                    for &(j, w) in t {
                        for (o, x) in ga.row_mut(j).iter_mut().zip(g.row(i)) {
                            *o += w * x;
                        }
                    }
                }
                out.push((*a, ga));
            }
            Op::Add(a, b) => {
                out.push((*b, g.clone()));
                out.push((*a, g));
            }
            Op::Scale(a, c) => {
                let mut ga = g;
                ga.scale_assign(*c);
                out.push((*a, ga));
            }
            Op::Sum(a) => {
                let (r, c) = self.shape(*a);
                out.push((*a, Matrix::filled(r, c, g.item())));
            }
            Op::Mean(a) => {
                let (r, c) = self.shape(*a);
                out.push((*a, Matrix::filled(r, c, g.item() / (r * c) as f64)));
            }
        }
    }
}

#[inline]
pub fn sigmoid(x: f64) -> f64 {
    if x >= 0.0 {
        1.0 / (1.0 + libm::exp(-x))
    } else {
        let e = libm::exp(x);
        e / (1.0 + e)
    }
}

#[inline]
fn clamp_prob(p: f64) -> f64 {
    p.clamp(BCE_EPS, 1.0 - BCE_EPS)
}

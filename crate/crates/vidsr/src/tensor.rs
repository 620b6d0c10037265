//! Dense tensors and the reverse-mode differentiation graph.
//!
//! Tensors carry up to five axes; the convention throughout the crate is
//! `[depth, channels, height, width]` for feature maps, `[2, H, W]` for flow
//! fields, and `[n]` for biases. Operations build a DAG of nodes; calling
//! [`Tensor::backward`] on a scalar walks the graph once in reverse
//! topological order and accumulates gradients into every `requires_grad`
//! leaf. Gradient accumulation is additive: a second backward pass through
//! the same leaves doubles their gradients.

use std::cell::RefCell;
use std::collections::{HashMap, HashSet};
use std::rc::Rc;

use crate::error::{Error, Result};
use crate::scalar::Scalar;

/// Plain shape-plus-storage array with no differentiation state.
///
/// This is the currency of the data pipeline, the evaluator and the
/// steady-state inference path; graph tensors wrap one of these.
#[derive(Debug, Clone, PartialEq)]
pub struct TensorData<T> {
    shape: Vec<usize>,
    data: Vec<T>,
}

impl<T: Scalar> TensorData<T> {
    pub fn new(shape: &[usize], data: Vec<T>) -> Result<Self> {
        let numel: usize = shape.iter().product();
        if numel != data.len() {
            return Err(Error::shape(format!(
                "shape {:?} implies {} elements but {} were provided",
                shape,
                numel,
                data.len()
            )));
        }
        if shape.len() > 5 {
            return Err(Error::shape(format!(
                "at most 5 axes are supported, got {:?}",
                shape
            )));
        }
        Ok(TensorData {
            shape: shape.to_vec(),
            data,
        })
    }

    pub fn zeros(shape: &[usize]) -> Self {
        let numel: usize = shape.iter().product();
        TensorData {
            shape: shape.to_vec(),
            data: vec![T::zero(); numel],
        }
    }

    pub fn filled(shape: &[usize], value: T) -> Self {
        let numel: usize = shape.iter().product();
        TensorData {
            shape: shape.to_vec(),
            data: vec![value; numel],
        }
    }

    pub fn scalar(value: T) -> Self {
        TensorData {
            shape: vec![1],
            data: vec![value],
        }
    }

    pub fn from_fn(shape: &[usize], mut f: impl FnMut(usize) -> T) -> Self {
        let numel: usize = shape.iter().product();
        TensorData {
            shape: shape.to_vec(),
            data: (0..numel).map(&mut f).collect(),
        }
    }

    pub fn shape(&self) -> &[usize] {
        &self.shape
    }

    pub fn numel(&self) -> usize {
        self.data.len()
    }

    pub fn data(&self) -> &[T] {
        &self.data
    }

    pub fn data_mut(&mut self) -> &mut [T] {
        &mut self.data
    }

    pub fn into_data(self) -> Vec<T> {
        self.data
    }

    /// Reinterprets the storage under a new shape with the same element count.
    pub fn reshaped(mut self, shape: &[usize]) -> Result<Self> {
        let numel: usize = shape.iter().product();
        if numel != self.data.len() {
            return Err(Error::shape(format!(
                "cannot reshape {} elements to {:?}",
                self.data.len(),
                shape
            )));
        }
        self.shape = shape.to_vec();
        Ok(self)
    }

    pub fn map(&self, f: impl Fn(T) -> T) -> Self {
        TensorData {
            shape: self.shape.clone(),
            data: self.data.iter().map(|&v| f(v)).collect(),
        }
    }

    /// Converts every element, e.g. between `f32` and `f64`.
    pub fn convert<U: Scalar>(&self) -> TensorData<U> {
        TensorData {
            shape: self.shape.clone(),
            data: self.data.iter().map(|v| U::cast(v.as_f64())).collect(),
        }
    }

    pub fn max_abs_diff(&self, other: &Self) -> f64 {
        debug_assert_eq!(self.shape, other.shape);
        self.data
            .iter()
            .zip(&other.data)
            .map(|(a, b)| (a.as_f64() - b.as_f64()).abs())
            .fold(0.0, f64::max)
    }
}

type GradFn<T> = Box<dyn Fn(&[Tensor<T>], &[T]) -> Vec<Option<Vec<T>>>>;

struct Node<T: Scalar> {
    value: TensorData<T>,
    requires_grad: bool,
    is_leaf: bool,
    grad: Option<Vec<T>>,
    parents: Vec<Tensor<T>>,
    grad_fn: Option<GradFn<T>>,
}

/// Shared handle to a node of the differentiation graph.
///
/// Cloning is cheap and aliases the same node. Leaves are created with
/// [`Tensor::leaf`] or [`Tensor::constant`]; interior nodes are produced by
/// the operations in this crate.
pub struct Tensor<T: Scalar> {
    inner: Rc<RefCell<Node<T>>>,
}

impl<T: Scalar> Clone for Tensor<T> {
    fn clone(&self) -> Self {
        Tensor {
            inner: Rc::clone(&self.inner),
        }
    }
}

impl<T: Scalar> std::fmt::Debug for Tensor<T> {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        let n = self.inner.borrow();
        write!(
            f,
            "Tensor(shape={:?}, requires_grad={}, leaf={})",
            n.value.shape(),
            n.requires_grad,
            n.is_leaf
        )
    }
}

impl<T: Scalar> Tensor<T> {
    pub fn leaf(value: TensorData<T>, requires_grad: bool) -> Self {
        Tensor {
            inner: Rc::new(RefCell::new(Node {
                value,
                requires_grad,
                is_leaf: true,
                grad: None,
                parents: Vec::new(),
                grad_fn: None,
            })),
        }
    }

    pub fn constant(value: TensorData<T>) -> Self {
        Self::leaf(value, false)
    }

    pub(crate) fn from_op(
        value: TensorData<T>,
        parents: Vec<Tensor<T>>,
        grad_fn: GradFn<T>,
    ) -> Self {
        let requires_grad = parents.iter().any(|p| p.requires_grad());
        Tensor {
            inner: Rc::new(RefCell::new(Node {
                value,
                requires_grad,
                is_leaf: false,
                grad: None,
                parents: if requires_grad { parents } else { Vec::new() },
                grad_fn: if requires_grad { Some(grad_fn) } else { None },
            })),
        }
    }

    fn id(&self) -> usize {
        Rc::as_ptr(&self.inner) as usize
    }

    pub fn shape(&self) -> Vec<usize> {
        self.inner.borrow().value.shape().to_vec()
    }

    pub fn numel(&self) -> usize {
        self.inner.borrow().value.numel()
    }

    pub fn requires_grad(&self) -> bool {
        self.inner.borrow().requires_grad
    }

    /// Copy of the node's value.
    pub fn value(&self) -> TensorData<T> {
        self.inner.borrow().value.clone()
    }

    /// Runs `f` over the node's value without copying it.
    pub fn with_value<R>(&self, f: impl FnOnce(&TensorData<T>) -> R) -> R {
        f(&self.inner.borrow().value)
    }

    /// The single element of a scalar tensor.
    pub fn item(&self) -> T {
        let n = self.inner.borrow();
        assert_eq!(n.value.numel(), 1, "item() on a non-scalar tensor");
        n.value.data()[0]
    }

    /// Accumulated gradient of a leaf, if any backward pass has reached it.
    pub fn grad(&self) -> Option<TensorData<T>> {
        let n = self.inner.borrow();
        n.grad
            .as_ref()
            .map(|g| TensorData::new(n.value.shape(), g.clone()).expect("grad shape"))
    }

    pub fn zero_grad(&self) {
        self.inner.borrow_mut().grad = None;
    }

    /// Squared L2 norm of the accumulated gradient (zero when absent).
    pub fn grad_norm_sq(&self) -> f64 {
        self.inner
            .borrow()
            .grad
            .as_ref()
            .map_or(0.0, |g| g.iter().map(|v| v.as_f64() * v.as_f64()).sum())
    }

    /// Scales the accumulated gradient in place (used for norm clipping).
    pub fn scale_grad(&self, factor: T) {
        if let Some(g) = self.inner.borrow_mut().grad.as_mut() {
            for v in g.iter_mut() {
                *v *= factor;
            }
        }
    }

    /// Replaces the value of a leaf in place (used by the optimizer).
    pub fn set_value(&self, value: TensorData<T>) {
        let mut n = self.inner.borrow_mut();
        assert_eq!(
            n.value.shape(),
            value.shape(),
            "set_value must preserve the shape"
        );
        n.value = value;
    }

    /// Applies `f` to the mutable value of a leaf.
    pub fn update_value(&self, f: impl FnOnce(&mut TensorData<T>)) {
        f(&mut self.inner.borrow_mut().value)
    }

    fn parents(&self) -> Vec<Tensor<T>> {
        self.inner.borrow().parents.clone()
    }

    /// Reverse-mode differentiation from a scalar node.
    ///
    /// Gradients of intermediate nodes live in scratch buffers for the
    /// duration of the pass; only `requires_grad` leaves keep (and
    /// accumulate) their gradient.
    pub fn backward(&self) -> Result<()> {
        if self.numel() != 1 {
            return Err(Error::invalid(format!(
                "backward requires a scalar node, got shape {:?}",
                self.shape()
            )));
        }
        if !self.requires_grad() {
            return Ok(());
        }

        // Post-order DFS over the requires_grad subgraph; the reverse of
        // `order` visits every node after all of its consumers.
        let mut order: Vec<Tensor<T>> = Vec::new();
        let mut entered: HashSet<usize> = HashSet::new();
        let mut stack: Vec<(Tensor<T>, usize)> = vec![(self.clone(), 0)];
        while let Some((node, idx)) = stack.pop() {
            if idx == 0 {
                if entered.contains(&node.id()) {
                    continue;
                }
                entered.insert(node.id());
            }
            let parents = node.parents();
            if idx < parents.len() {
                stack.push((node.clone(), idx + 1));
                let p = parents[idx].clone();
                if p.requires_grad() && !entered.contains(&p.id()) {
                    stack.push((p, 0));
                }
                continue;
            }
            order.push(node);
        }

        let mut grads: HashMap<usize, Vec<T>> = HashMap::new();
        grads.insert(self.id(), vec![T::one()]);

        for node in order.iter().rev() {
            let Some(out_grad) = grads.remove(&node.id()) else {
                continue;
            };
            let n = node.inner.borrow();
            if n.is_leaf {
                drop(n);
                let mut n = node.inner.borrow_mut();
                match &mut n.grad {
                    Some(g) => {
                        for (gi, oi) in g.iter_mut().zip(&out_grad) {
                            *gi += *oi;
                        }
                    }
                    None => n.grad = Some(out_grad),
                }
                continue;
            }
            let parents = n.parents.clone();
            let contributions = match &n.grad_fn {
                Some(f) => f(&parents, &out_grad),
                None => continue,
            };
            drop(n);
            debug_assert_eq!(contributions.len(), parents.len());
            for (p, c) in parents.iter().zip(contributions) {
                let Some(c) = c else { continue };
                if !p.requires_grad() {
                    continue;
                }
                let slot = grads
                    .entry(p.id())
                    .or_insert_with(|| vec![T::zero(); p.numel()]);
                debug_assert_eq!(slot.len(), c.len());
                for (si, ci) in slot.iter_mut().zip(&c) {
                    *si += *ci;
                }
            }
        }
        Ok(())
    }
}

// ---------------------------------------------------------------------------
// Elementwise and structural operations
// ---------------------------------------------------------------------------

/// Elementwise sum of two same-shape tensors.
pub fn add<T: Scalar>(a: &Tensor<T>, b: &Tensor<T>) -> Result<Tensor<T>> {
    let (av, bv) = (a.value(), b.value());
    if av.shape() != bv.shape() {
        return Err(Error::shape(format!(
            "add: {:?} vs {:?}",
            av.shape(),
            bv.shape()
        )));
    }
    let data: Vec<T> = av.data().iter().zip(bv.data()).map(|(&x, &y)| x + y).collect();
    let value = TensorData::new(av.shape(), data)?;
    Ok(Tensor::from_op(
        value,
        vec![a.clone(), b.clone()],
        Box::new(|parents, out_grad| {
            let mk = |need: bool| -> Option<Vec<T>> { need.then(|| out_grad.to_vec()) };
            vec![
                mk(parents[0].requires_grad()),
                mk(parents[1].requires_grad()),
            ]
        }),
    ))
}

/// Multiplies every element by a fixed constant.
pub fn scale<T: Scalar>(a: &Tensor<T>, factor: T) -> Tensor<T> {
    let av = a.value();
    let value = av.map(|v| v * factor);
    Tensor::from_op(
        value,
        vec![a.clone()],
        Box::new(move |parents, out_grad| {
            if parents[0].requires_grad() {
                vec![Some(out_grad.iter().map(|&g| g * factor).collect())]
            } else {
                vec![None]
            }
        }),
    )
}

/// Elementwise mean of a non-empty list of same-shape tensors.
pub fn mean_of<T: Scalar>(xs: &[Tensor<T>]) -> Result<Tensor<T>> {
    if xs.is_empty() {
        return Err(Error::invalid("mean_of: empty tensor list"));
    }
    let shape = xs[0].shape();
    for (i, x) in xs.iter().enumerate() {
        if x.shape() != shape {
            return Err(Error::shape(format!(
                "mean_of: operand {} has shape {:?}, expected {:?}",
                i,
                x.shape(),
                shape
            )));
        }
    }
    let n = xs.len();
    let inv = T::cast(1.0 / n as f64);
    let mut data = vec![T::zero(); xs[0].numel()];
    for x in xs {
        x.with_value(|v| {
            for (d, s) in data.iter_mut().zip(v.data()) {
                *d += *s;
            }
        });
    }
    for d in data.iter_mut() {
        *d *= inv;
    }
    let value = TensorData::new(&shape, data)?;
    Ok(Tensor::from_op(
        value,
        xs.to_vec(),
        Box::new(move |parents, out_grad| {
            parents
                .iter()
                .map(|p| {
                    p.requires_grad()
                        .then(|| out_grad.iter().map(|&g| g * inv).collect())
                })
                .collect()
        }),
    ))
}

/// Same data, new shape. The element count must match.
pub fn reshape<T: Scalar>(a: &Tensor<T>, shape: &[usize]) -> Result<Tensor<T>> {
    let value = a.value().reshaped(shape)?;
    Ok(Tensor::from_op(
        value,
        vec![a.clone()],
        Box::new(|parents, out_grad| {
            if parents[0].requires_grad() {
                vec![Some(out_grad.to_vec())]
            } else {
                vec![None]
            }
        }),
    ))
}

fn concat_axis<T: Scalar>(xs: &[Tensor<T>], axis: usize) -> Result<Tensor<T>> {
    if xs.is_empty() {
        return Err(Error::invalid("concat: empty tensor list"));
    }
    let first = xs[0].shape();
    if first.len() != 4 {
        return Err(Error::shape(format!(
            "concat expects [D,C,H,W] tensors, got {:?}",
            first
        )));
    }
    let mut total = 0usize;
    for (i, x) in xs.iter().enumerate() {
        let s = x.shape();
        for ax in 0..4 {
            if ax != axis && s[ax] != first[ax] {
                let name = ["depth", "channel", "height", "width"][ax];
                return Err(Error::shape(format!(
                    "concat: operand {} disagrees on the {} axis ({} vs {})",
                    i, name, s[ax], first[ax]
                )));
            }
        }
        total += s[axis];
    }
    let mut out_shape = first.clone();
    out_shape[axis] = total;

    // Row-major copy: for axes 0 and 1 the slices are contiguous blocks per
    // outer index.
    let outer: usize = first[..axis].iter().product();
    let mut out = vec![T::zero(); out_shape.iter().product()];
    let out_stride: usize = out_shape[axis..].iter().product();
    let mut offsets = Vec::with_capacity(xs.len());
    {
        let mut off = 0usize;
        for x in xs {
            let s = x.shape();
            let block: usize = s[axis..].iter().product();
            offsets.push((off, block));
            x.with_value(|v| {
                for o in 0..outer {
                    let src = &v.data()[o * block..(o + 1) * block];
                    let dst_start = o * out_stride + off;
                    out[dst_start..dst_start + block].copy_from_slice(src);
                }
            });
            off += block;
        }
    }
    let value = TensorData::new(&out_shape, out)?;
    Ok(Tensor::from_op(
        value,
        xs.to_vec(),
        Box::new(move |parents, out_grad| {
            parents
                .iter()
                .zip(&offsets)
                .map(|(p, &(off, block))| {
                    p.requires_grad().then(|| {
                        let mut g = vec![T::zero(); p.numel()];
                        for o in 0..outer {
                            let src_start = o * out_stride + off;
                            g[o * block..(o + 1) * block]
                                .copy_from_slice(&out_grad[src_start..src_start + block]);
                        }
                        g
                    })
                })
                .collect()
        }),
    ))
}

/// Concatenation along the channel axis of `[D,C,H,W]` tensors.
/// The first input occupies channels `[0, C0)`, and so on in argument order.
pub fn concat_channels<T: Scalar>(xs: &[Tensor<T>]) -> Result<Tensor<T>> {
    concat_axis(xs, 1)
}

/// Concatenation along the temporal axis of `[D,C,H,W]` tensors.
pub fn concat_depth<T: Scalar>(xs: &[Tensor<T>]) -> Result<Tensor<T>> {
    concat_axis(xs, 0)
}

/// Selects `len` consecutive temporal slices starting at `start`.
pub fn slice_depth<T: Scalar>(x: &Tensor<T>, start: usize, len: usize) -> Result<Tensor<T>> {
    let s = x.shape();
    if s.len() != 4 {
        return Err(Error::shape(format!(
            "slice_depth expects [D,C,H,W], got {:?}",
            s
        )));
    }
    if start + len > s[0] {
        return Err(Error::shape(format!(
            "slice_depth: range {}..{} exceeds depth {}",
            start,
            start + len,
            s[0]
        )));
    }
    let block: usize = s[1..].iter().product();
    let data = x.with_value(|v| v.data()[start * block..(start + len) * block].to_vec());
    let out_shape = [&[len], &s[1..]].concat();
    let value = TensorData::new(&out_shape, data)?;
    let total = s[0];
    Ok(Tensor::from_op(
        value,
        vec![x.clone()],
        Box::new(move |parents, out_grad| {
            if parents[0].requires_grad() {
                let mut g = vec![T::zero(); total * block];
                g[start * block..(start + len) * block].copy_from_slice(out_grad);
                vec![Some(g)]
            } else {
                vec![None]
            }
        }),
    ))
}

/// Nonlinearity applied after each convolution.
#[derive(Debug, Clone, Copy, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Activation {
    Relu,
    Tanh,
    Linear,
}

/// Elementwise activation; `Linear` is the identity.
pub fn activation<T: Scalar>(x: &Tensor<T>, kind: Activation) -> Tensor<T> {
    match kind {
        Activation::Linear => {
            let value = x.value();
            Tensor::from_op(
                value,
                vec![x.clone()],
                Box::new(|parents, out_grad| {
                    if parents[0].requires_grad() {
                        vec![Some(out_grad.to_vec())]
                    } else {
                        vec![None]
                    }
                }),
            )
        }
        Activation::Relu => {
            let value = x.value().map(|v| if v > T::zero() { v } else { T::zero() });
            Tensor::from_op(
                value,
                vec![x.clone()],
                Box::new(|parents, out_grad| {
                    if parents[0].requires_grad() {
                        let g = parents[0].with_value(|v| {
                            v.data()
                                .iter()
                                .zip(out_grad)
                                .map(|(&x, &g)| if x > T::zero() { g } else { T::zero() })
                                .collect()
                        });
                        vec![Some(g)]
                    } else {
                        vec![None]
                    }
                }),
            )
        }
        Activation::Tanh => {
            let value = x.value().map(|v| v.tanh());
            // d tanh / dx = 1 - tanh^2, computed from the saved output.
            let saved: Vec<T> = value.data().to_vec();
            Tensor::from_op(
                value,
                vec![x.clone()],
                Box::new(move |parents, out_grad| {
                    if parents[0].requires_grad() {
                        let g = saved
                            .iter()
                            .zip(out_grad)
                            .map(|(&y, &g)| g * (T::one() - y * y))
                            .collect();
                        vec![Some(g)]
                    } else {
                        vec![None]
                    }
                }),
            )
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn t64(shape: &[usize], data: &[f64], rg: bool) -> Tensor<f64> {
        Tensor::leaf(TensorData::new(shape, data.to_vec()).unwrap(), rg)
    }

    #[test]
    fn square_gradient_at_three_is_six() {
        // d(x^2)/dx at x=3 -> 6, built as x * x via scale-free ops.
        let x = t64(&[1], &[3.0], true);
        let sq = mul_for_test(&x, &x);
        sq.backward().unwrap();
        assert_eq!(x.grad().unwrap().data()[0], 6.0);
    }

    // Minimal elementwise product used only by graph tests.
    fn mul_for_test(a: &Tensor<f64>, b: &Tensor<f64>) -> Tensor<f64> {
        let (av, bv) = (a.value(), b.value());
        let data: Vec<f64> = av.data().iter().zip(bv.data()).map(|(x, y)| x * y).collect();
        Tensor::from_op(
            TensorData::new(av.shape(), data).unwrap(),
            vec![a.clone(), b.clone()],
            Box::new(|parents, out_grad| {
                let a = parents[0].value();
                let b = parents[1].value();
                vec![
                    Some(out_grad.iter().zip(b.data()).map(|(g, y)| g * y).collect()),
                    Some(out_grad.iter().zip(a.data()).map(|(g, x)| g * x).collect()),
                ]
            }),
        )
    }

    #[test]
    fn backward_accumulates_over_two_calls() {
        let x = t64(&[2], &[1.0, -2.0], true);
        let s = scale(&x, 3.0);
        let m = mean_for_test(&s);
        m.backward().unwrap();
        let g1 = x.grad().unwrap().data().to_vec();
        m.backward().unwrap();
        let g2 = x.grad().unwrap().data().to_vec();
        for (a, b) in g1.iter().zip(&g2) {
            assert_eq!(2.0 * a, *b);
        }
    }

    fn mean_for_test(a: &Tensor<f64>) -> Tensor<f64> {
        let av = a.value();
        let n = av.numel() as f64;
        let m = av.data().iter().sum::<f64>() / n;
        Tensor::from_op(
            TensorData::scalar(m),
            vec![a.clone()],
            Box::new(move |parents, out_grad| {
                vec![Some(vec![out_grad[0] / n; parents[0].numel()])]
            }),
        )
    }

    #[test]
    fn backward_rejects_non_scalar() {
        let x = t64(&[2], &[1.0, 2.0], true);
        let y = scale(&x, 2.0);
        assert!(y.backward().is_err());
    }

    #[test]
    fn shared_node_sums_contributions() {
        // loss = mean(x*x + x*x): diamond through a shared square node.
        let x = t64(&[1], &[5.0], true);
        let sq = mul_for_test(&x, &x);
        let two = add(&sq, &sq).unwrap();
        two.backward().unwrap();
        assert_eq!(x.grad().unwrap().data()[0], 20.0);
    }

    #[test]
    fn backward_is_deterministic() {
        let run = || {
            let x = t64(&[3], &[0.5, -1.5, 2.5], true);
            let y = t64(&[3], &[1.0, 0.5, -0.5], true);
            let s = add(&x, &y).unwrap();
            let sq = mul_for_test(&s, &s);
            let m = mean_for_test(&sq);
            m.backward().unwrap();
            (
                x.grad().unwrap().data().to_vec(),
                y.grad().unwrap().data().to_vec(),
            )
        };
        let (a1, b1) = run();
        let (a2, b2) = run();
        assert_eq!(a1, a2);
        assert_eq!(b1, b2);
    }

    #[test]
    fn relu_and_tanh_values() {
        let x = t64(&[3], &[-1.0, 0.0, 2.0], false);
        let r = activation(&x, Activation::Relu);
        assert_eq!(r.value().data(), &[0.0, 0.0, 2.0]);
        let z = t64(&[1], &[0.0], true);
        let t = activation(&z, Activation::Tanh);
        assert_eq!(t.item(), 0.0);
        t.backward().unwrap();
        // 1 - tanh^2(0) = 1
        assert_eq!(z.grad().unwrap().data()[0], 1.0);
    }

    #[test]
    fn concat_channels_orders_and_splits() {
        let a = t64(&[1, 1, 2, 2], &[1.0, 2.0, 3.0, 4.0], true);
        let b = t64(&[1, 1, 2, 2], &[5.0, 6.0, 7.0, 8.0], true);
        let c = concat_channels(&[a.clone(), b.clone()]).unwrap();
        assert_eq!(c.shape(), vec![1, 2, 2, 2]);
        assert_eq!(
            c.value().data(),
            &[1.0, 2.0, 3.0, 4.0, 5.0, 6.0, 7.0, 8.0]
        );
        let m = mean_for_test(&scale(&c, 8.0));
        m.backward().unwrap();
        assert_eq!(a.grad().unwrap().data(), &[1.0; 4]);
        assert_eq!(b.grad().unwrap().data(), &[1.0; 4]);
    }

    #[test]
    fn concat_rejects_spatial_mismatch() {
        let a = t64(&[1, 1, 2, 2], &[0.0; 4], false);
        let b = t64(&[1, 1, 2, 3], &[0.0; 6], false);
        let err = concat_channels(&[a, b]).unwrap_err().to_string();
        assert!(err.contains("width"), "diagnostic names the axis: {err}");
    }

    #[test]
    fn slice_depth_roundtrip() {
        let x = t64(&[3, 1, 1, 2], &[1.0, 2.0, 3.0, 4.0, 5.0, 6.0], true);
        let mid = slice_depth(&x, 1, 1).unwrap();
        assert_eq!(mid.value().data(), &[3.0, 4.0]);
        let m = mean_for_test(&mid);
        m.backward().unwrap();
        assert_eq!(
            x.grad().unwrap().data(),
            &[0.0, 0.0, 0.5, 0.5, 0.0, 0.0]
        );
    }
}

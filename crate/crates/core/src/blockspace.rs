//! Block-structured vectors over the primal product space `⊕ H_i` and the
//! dual product space `⊕ G_k`, together with the block-sparse coupling map
//! `L = (L_ki)` and its adjoint.

use std::collections::BTreeMap;

use crate::error::{Error, Result};
use crate::linalg::Matrix;
use crate::scalar::{self, Scalar};

/// Dimensions of the primal blocks `H_i` and dual blocks `G_k`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SpaceSignature {
    primal_dims: Vec<usize>,
    dual_dims: Vec<usize>,
}

impl SpaceSignature {
    pub fn new(primal_dims: Vec<usize>, dual_dims: Vec<usize>) -> Result<Self> {
        if primal_dims.is_empty() || dual_dims.is_empty() {
            return Err(Error::config(
                "signature needs at least one primal and one dual block",
            ));
        }
        if let Some(i) = primal_dims.iter().position(|&d| d == 0) {
            return Err(Error::config(format!("primal block {i} has dimension 0")));
        }
        if let Some(k) = dual_dims.iter().position(|&d| d == 0) {
            return Err(Error::config(format!("dual block {k} has dimension 0")));
        }
        Ok(SpaceSignature {
            primal_dims,
            dual_dims,
        })
    }

    pub fn primal_dims(&self) -> &[usize] {
        &self.primal_dims
    }

    pub fn dual_dims(&self) -> &[usize] {
        &self.dual_dims
    }

    /// Number of primal blocks `m`.
    pub fn m(&self) -> usize {
        self.primal_dims.len()
    }

    /// Number of dual blocks `p`.
    pub fn p(&self) -> usize {
        self.dual_dims.len()
    }

    pub fn dims(&self, side: Side) -> &[usize] {
        match side {
            Side::Primal => &self.primal_dims,
            Side::Dual => &self.dual_dims,
        }
    }

    /// Total dimension of the stacked primal-dual space.
    pub fn total_dim(&self) -> usize {
        self.primal_dims.iter().sum::<usize>() + self.dual_dims.iter().sum::<usize>()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Side {
    Primal,
    Dual,
}

/// An indexed family of dense real vectors, one per block.
#[derive(Debug, Clone, PartialEq)]
pub struct BlockVector<T> {
    blocks: Vec<Vec<T>>,
}

impl<T: Scalar> BlockVector<T> {
    pub fn zeros(dims: &[usize]) -> Self {
        BlockVector {
            blocks: dims.iter().map(|&d| vec![T::zero(); d]).collect(),
        }
    }

    pub fn from_blocks(blocks: Vec<Vec<T>>) -> Self {
        BlockVector { blocks }
    }

    /// Builds a block vector and checks it against `dims`.
    pub fn with_dims(blocks: Vec<Vec<T>>, dims: &[usize]) -> Result<Self> {
        let v = BlockVector { blocks };
        v.check_dims(dims)?;
        Ok(v)
    }

    pub fn check_dims(&self, dims: &[usize]) -> Result<()> {
        if self.blocks.len() != dims.len() {
            return Err(Error::dim(format!(
                "expected {} blocks, found {}",
                dims.len(),
                self.blocks.len()
            )));
        }
        for (j, (b, &d)) in self.blocks.iter().zip(dims).enumerate() {
            if b.len() != d {
                return Err(Error::dim(format!(
                    "block {j} has length {}, expected {d}",
                    b.len()
                )));
            }
        }
        Ok(())
    }

    pub fn num_blocks(&self) -> usize {
        self.blocks.len()
    }

    pub fn dims(&self) -> Vec<usize> {
        self.blocks.iter().map(Vec::len).collect()
    }

    pub fn block(&self, j: usize) -> &[T] {
        &self.blocks[j]
    }

    pub fn block_mut(&mut self, j: usize) -> &mut Vec<T> {
        &mut self.blocks[j]
    }

    pub fn blocks(&self) -> &[Vec<T>] {
        &self.blocks
    }

    pub fn into_blocks(self) -> Vec<Vec<T>> {
        self.blocks
    }

    pub fn same_shape(&self, other: &Self) -> bool {
        self.blocks.len() == other.blocks.len()
            && self
                .blocks
                .iter()
                .zip(&other.blocks)
                .all(|(a, b)| a.len() == b.len())
    }

    /// Product-space inner product: sum of per-block Euclidean products.
    pub fn inner(&self, other: &Self) -> Result<T> {
        if !self.same_shape(other) {
            return Err(Error::dim(format!(
                "inner product between block shapes {:?} and {:?}",
                self.dims(),
                other.dims()
            )));
        }
        Ok(self.inner_unchecked(other))
    }

    pub(crate) fn inner_unchecked(&self, other: &Self) -> T {
        self.blocks
            .iter()
            .zip(&other.blocks)
            .fold(T::zero(), |acc, (a, b)| acc + scalar::dot(a, b))
    }

    pub fn norm_sq(&self) -> T {
        self.inner_unchecked(self)
    }

    pub fn norm(&self) -> T {
        self.norm_sq().sqrt()
    }

    pub fn map2(&self, other: &Self, f: impl Fn(T, T) -> T) -> Self {
        BlockVector {
            blocks: self
                .blocks
                .iter()
                .zip(&other.blocks)
                .map(|(a, b)| a.iter().zip(b).map(|(&x, &y)| f(x, y)).collect())
                .collect(),
        }
    }

    pub fn add(&self, other: &Self) -> Self {
        self.map2(other, |x, y| x + y)
    }

    pub fn sub(&self, other: &Self) -> Self {
        self.map2(other, |x, y| x - y)
    }

    pub fn scale(&self, s: T) -> Self {
        BlockVector {
            blocks: self
                .blocks
                .iter()
                .map(|b| b.iter().map(|&x| s * x).collect())
                .collect(),
        }
    }

    /// `self - s * other`
    pub fn sub_scaled(&self, s: T, other: &Self) -> Self {
        self.map2(other, |x, y| x - s * y)
    }

    pub fn flatten(&self) -> Vec<T> {
        self.blocks.iter().flatten().copied().collect()
    }

    pub fn unflatten(flat: &[T], dims: &[usize]) -> Result<Self> {
        let total: usize = dims.iter().sum();
        if flat.len() != total {
            return Err(Error::dim(format!(
                "flat vector of length {} against block dims {dims:?}",
                flat.len()
            )));
        }
        let mut off = 0;
        let blocks = dims
            .iter()
            .map(|&d| {
                let b = flat[off..off + d].to_vec();
                off += d;
                b
            })
            .collect();
        Ok(BlockVector { blocks })
    }

    pub fn is_finite(&self) -> bool {
        self.blocks.iter().flatten().all(|v| v.is_finite())
    }
}

/// A primal-dual pair `(x, v*)`.
#[derive(Debug, Clone, PartialEq)]
pub struct PrimalDualPoint<T> {
    pub primal: BlockVector<T>,
    pub dual: BlockVector<T>,
}

impl<T: Scalar> PrimalDualPoint<T> {
    pub fn new(primal: BlockVector<T>, dual: BlockVector<T>) -> Self {
        PrimalDualPoint { primal, dual }
    }

    pub fn zeros(sig: &SpaceSignature) -> Self {
        PrimalDualPoint {
            primal: BlockVector::zeros(sig.primal_dims()),
            dual: BlockVector::zeros(sig.dual_dims()),
        }
    }

    pub fn check_signature(&self, sig: &SpaceSignature) -> Result<()> {
        self.primal
            .check_dims(sig.primal_dims())
            .map_err(|e| Error::dim(format!("primal part: {e}")))?;
        self.dual
            .check_dims(sig.dual_dims())
            .map_err(|e| Error::dim(format!("dual part: {e}")))
    }

    pub fn inner(&self, other: &Self) -> T {
        self.primal.inner_unchecked(&other.primal) + self.dual.inner_unchecked(&other.dual)
    }

    pub fn norm_sq(&self) -> T {
        self.inner(self)
    }

    pub fn norm(&self) -> T {
        self.norm_sq().sqrt()
    }

    pub fn add(&self, other: &Self) -> Self {
        PrimalDualPoint {
            primal: self.primal.add(&other.primal),
            dual: self.dual.add(&other.dual),
        }
    }

    pub fn sub(&self, other: &Self) -> Self {
        PrimalDualPoint {
            primal: self.primal.sub(&other.primal),
            dual: self.dual.sub(&other.dual),
        }
    }

    pub fn scale(&self, s: T) -> Self {
        PrimalDualPoint {
            primal: self.primal.scale(s),
            dual: self.dual.scale(s),
        }
    }

    pub fn distance(&self, other: &Self) -> T {
        self.sub(other).norm()
    }

    /// Stacked coordinates `(x_1, …, x_m, v*_1, …, v*_p)`.
    pub fn flatten(&self) -> Vec<T> {
        let mut f = self.primal.flatten();
        f.extend(self.dual.flatten());
        f
    }

    pub fn unflatten(flat: &[T], sig: &SpaceSignature) -> Result<Self> {
        let np: usize = sig.primal_dims().iter().sum();
        if flat.len() != sig.total_dim() {
            return Err(Error::dim(format!(
                "flat point of length {} against total dimension {}",
                flat.len(),
                sig.total_dim()
            )));
        }
        Ok(PrimalDualPoint {
            primal: BlockVector::unflatten(&flat[..np], sig.primal_dims())?,
            dual: BlockVector::unflatten(&flat[np..], sig.dual_dims())?,
        })
    }

    pub fn is_finite(&self) -> bool {
        self.primal.is_finite() && self.dual.is_finite()
    }
}

/// Minimal inner-product-space surface, enough for the Haugazeau update.
pub trait InnerProductSpace<T: Scalar>: Clone {
    fn inner(&self, other: &Self) -> T;
    fn add(&self, other: &Self) -> Self;
    fn sub(&self, other: &Self) -> Self;
    fn scale(&self, s: T) -> Self;

    fn norm_sq(&self) -> T {
        self.inner(self)
    }
}

impl<T: Scalar> InnerProductSpace<T> for Vec<T> {
    fn inner(&self, other: &Self) -> T {
        scalar::dot(self, other)
    }
    fn add(&self, other: &Self) -> Self {
        scalar::add(self, other)
    }
    fn sub(&self, other: &Self) -> Self {
        scalar::sub(self, other)
    }
    fn scale(&self, s: T) -> Self {
        scalar::scale(s, self)
    }
}

impl<T: Scalar> InnerProductSpace<T> for PrimalDualPoint<T> {
    fn inner(&self, other: &Self) -> T {
        PrimalDualPoint::inner(self, other)
    }
    fn add(&self, other: &Self) -> Self {
        PrimalDualPoint::add(self, other)
    }
    fn sub(&self, other: &Self) -> Self {
        PrimalDualPoint::sub(self, other)
    }
    fn scale(&self, s: T) -> Self {
        PrimalDualPoint::scale(self, s)
    }
}

/// Block-sparse linear coupling `L: ⊕H_i → ⊕G_k`, `(Lx)_k = Σ_i L_ki x_i`.
/// Absent `(k, i)` entries are the zero map.
#[derive(Debug, Clone, PartialEq)]
pub struct CouplingMap<T> {
    signature: SpaceSignature,
    entries: BTreeMap<(usize, usize), Matrix<T>>,
}

impl<T: Scalar> CouplingMap<T> {
    pub fn new(signature: SpaceSignature) -> Self {
        CouplingMap {
            signature,
            entries: BTreeMap::new(),
        }
    }

    pub fn signature(&self) -> &SpaceSignature {
        &self.signature
    }

    /// Stores `L_ki`; the matrix must be `g_k × n_i`.
    pub fn insert(&mut self, k: usize, i: usize, matrix: Matrix<T>) -> Result<()> {
        let (m, p) = (self.signature.m(), self.signature.p());
        if k >= p || i >= m {
            return Err(Error::dim(format!(
                "coupling entry (k={k}, i={i}) outside {p}x{m} block grid"
            )));
        }
        let expected = (self.signature.dual_dims()[k], self.signature.primal_dims()[i]);
        if matrix.shape() != expected {
            return Err(Error::dim(format!(
                "coupling entry (k={k}, i={i}) has shape {:?}, expected {:?}",
                matrix.shape(),
                expected
            )));
        }
        self.entries.insert((k, i), matrix);
        Ok(())
    }

    pub fn get(&self, k: usize, i: usize) -> Option<&Matrix<T>> {
        self.entries.get(&(k, i))
    }

    pub fn entries(&self) -> impl Iterator<Item = (usize, usize, &Matrix<T>)> {
        self.entries.iter().map(|(&(k, i), m)| (k, i, m))
    }

    /// Frobenius norm of the assembled operator, an upper bound on `‖L‖`.
    pub fn frobenius_norm(&self) -> T {
        self.entries
            .values()
            .map(|m| {
                let f = m.frobenius_norm();
                f * f
            })
            .sum::<T>()
            .sqrt()
    }

    pub fn apply_forward(&self, x: &BlockVector<T>) -> Result<BlockVector<T>> {
        x.check_dims(self.signature.primal_dims())
            .map_err(|e| Error::dim(format!("apply_forward input: {e}")))?;
        Ok(self.forward_unchecked(x))
    }

    pub fn apply_adjoint(&self, y: &BlockVector<T>) -> Result<BlockVector<T>> {
        y.check_dims(self.signature.dual_dims())
            .map_err(|e| Error::dim(format!("apply_adjoint input: {e}")))?;
        Ok(self.adjoint_unchecked(y))
    }

    pub(crate) fn forward_unchecked(&self, x: &BlockVector<T>) -> BlockVector<T> {
        BlockVector::from_blocks(
            (0..self.signature.p())
                .map(|k| self.forward_block(k, x))
                .collect(),
        )
    }

    pub(crate) fn adjoint_unchecked(&self, y: &BlockVector<T>) -> BlockVector<T> {
        BlockVector::from_blocks(
            (0..self.signature.m())
                .map(|i| self.adjoint_block(i, y))
                .collect(),
        )
    }

    /// `Σ_i L_ki x_i`, accumulated in increasing `i`.
    pub fn forward_block(&self, k: usize, x: &BlockVector<T>) -> Vec<T> {
        let mut out = vec![T::zero(); self.signature.dual_dims()[k]];
        for i in 0..self.signature.m() {
            if let Some(l) = self.entries.get(&(k, i)) {
                for (o, v) in out.iter_mut().zip(l.mul_vec(x.block(i))) {
                    *o += v;
                }
            }
        }
        out
    }

    /// `Σ_k L_kiᵀ y_k`, accumulated in increasing `k`.
    pub fn adjoint_block(&self, i: usize, y: &BlockVector<T>) -> Vec<T> {
        let mut out = vec![T::zero(); self.signature.primal_dims()[i]];
        for k in 0..self.signature.p() {
            if let Some(l) = self.entries.get(&(k, i)) {
                for (o, v) in out.iter_mut().zip(l.tr_mul_vec(y.block(k))) {
                    *o += v;
                }
            }
        }
        out
    }
}

//! Shared parameter matrices for lock-free parallel SGD.
//!
//! Workers read and write rows without mutual exclusion; lost updates
//! between racing read-modify-write cycles are tolerated by the training
//! contract. Cells are relaxed atomics, so the sharing is free of data
//! races in the language-model sense while compiling to plain loads and
//! stores on mainstream targets.

use std::sync::atomic::{AtomicU32, Ordering};

/// An `f32` stored as relaxed atomic bits.
#[derive(Default)]
#[repr(transparent)]
pub struct AtomicF32(AtomicU32);

impl AtomicF32 {
    pub fn new(value: f32) -> Self {
        AtomicF32(AtomicU32::new(value.to_bits()))
    }

    #[inline]
    pub fn get(&self) -> f32 {
        f32::from_bits(self.0.load(Ordering::Relaxed))
    }

    #[inline]
    pub fn set(&self, value: f32) {
        self.0.store(value.to_bits(), Ordering::Relaxed);
    }
}

/// A dense row-major matrix of shared `f32` cells.
pub struct SharedMatrix {
    rows: usize,
    dim: usize,
    cells: Box<[AtomicF32]>,
}

impl SharedMatrix {
    pub fn zeros(rows: usize, dim: usize) -> Self {
        let cells = (0..rows * dim).map(|_| AtomicF32::new(0.0)).collect();
        SharedMatrix { rows, dim, cells }
    }

    /// Wraps an existing row-major buffer; `values.len()` must equal
    /// `rows * dim`.
    pub fn from_vec(values: Vec<f32>, rows: usize, dim: usize) -> Self {
        assert_eq!(values.len(), rows * dim, "matrix shape mismatch");
        let cells = values.into_iter().map(AtomicF32::new).collect();
        SharedMatrix { rows, dim, cells }
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    #[inline]
    pub fn row(&self, r: usize) -> &[AtomicF32] {
        &self.cells[r * self.dim..(r + 1) * self.dim]
    }

    /// Snapshot of one row.
    pub fn row_to_vec(&self, r: usize) -> Vec<f32> {
        self.row(r).iter().map(|c| c.get()).collect()
    }

    /// Snapshot of the full matrix in row-major order.
    pub fn to_vec(&self) -> Vec<f32> {
        self.cells.iter().map(|c| c.get()).collect()
    }
}

/// Dot product of two rows, accumulated in f64.
#[inline]
pub fn dot_rows(a: &[AtomicF32], b: &[AtomicF32]) -> f64 {
    debug_assert_eq!(a.len(), b.len());
    let mut sum = 0.0f64;
    for (x, y) in a.iter().zip(b) {
        sum += x.get() as f64 * y.get() as f64;
    }
    sum
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn round_trips_values() {
        let m = SharedMatrix::from_vec(vec![1.0, 2.0, 3.0, 4.0], 2, 2);
        assert_eq!(m.row_to_vec(1), vec![3.0, 4.0]);
        m.row(0)[1].set(-2.5);
        assert_eq!(m.to_vec(), vec![1.0, -2.5, 3.0, 4.0]);
    }

    #[test]
    fn dot_is_f64_accumulated() {
        let a = SharedMatrix::from_vec(vec![1.0, 2.0, 3.0], 1, 3);
        let b = SharedMatrix::from_vec(vec![4.0, 5.0, 6.0], 1, 3);
        assert_eq!(dot_rows(a.row(0), b.row(0)), 32.0);
    }
}

//! The learned spectral estimator: a four-layer rectifier MLP that maps a
//! realified beam vector to a length-L magnitude spectrum.

mod file;
mod infer;
mod mlp;
mod record;
mod train;

pub use file::{
    load_checkpoint, load_model, load_model_expecting, optimizer_path, save_checkpoint, save_model,
    ModelHeader,
};
pub use infer::{infer_spectrum, InferenceMode, NetworkEstimator};
pub use mlp::{Dense, ForwardCache, Gradients, MlpModel, PRODUCTION_HIDDEN};
pub use record::{
    encode_record, make_record, normalization_factor, read_records, realify, write_records, Dataset, RecordHeader,
    SampleRecord,
};
pub use train::{
    backward, batch_loss, loss, train, train_from, Adam, EpochLog, LossKind, TrainConfig, TrainState,
};

use num_traits::Float;

/// Floating-point types the network can be instantiated with.
///
/// `f32` is the production type (model files store `f32`); `f64` backs the
/// finite-difference and hand-evaluation checks.
pub trait Real: Float + Default + std::fmt::Debug + Send + Sync + std::iter::Sum + 'static {
    fn from_f64(v: f64) -> Self;

    /// # Safety
    /// Pointers and strides must describe valid `m x k`, `k x n` and `m x n`
    /// matrices, with `c` not aliasing `a` or `b`.
    #[allow(clippy::too_many_arguments)]
    unsafe fn gemm_raw(
        m: usize,
        k: usize,
        n: usize,
        a: *const Self,
        rsa: isize,
        csa: isize,
        b: *const Self,
        rsb: isize,
        csb: isize,
        beta: Self,
        c: *mut Self,
        rsc: isize,
        csc: isize,
    );
}

impl Real for f32 {
    fn from_f64(v: f64) -> Self {
        v as f32
    }

    unsafe fn gemm_raw(
        m: usize,
        k: usize,
        n: usize,
        a: *const f32,
        rsa: isize,
        csa: isize,
        b: *const f32,
        rsb: isize,
        csb: isize,
        beta: f32,
        c: *mut f32,
        rsc: isize,
        csc: isize,
    ) {
        matrixmultiply::sgemm(m, k, n, 1.0, a, rsa, csa, b, rsb, csb, beta, c, rsc, csc)
    }
}

impl Real for f64 {
    fn from_f64(v: f64) -> Self {
        v
    }

    unsafe fn gemm_raw(
        m: usize,
        k: usize,
        n: usize,
        a: *const f64,
        rsa: isize,
        csa: isize,
        b: *const f64,
        rsb: isize,
        csb: isize,
        beta: f64,
        c: *mut f64,
        rsc: isize,
        csc: isize,
    ) {
        matrixmultiply::dgemm(m, k, n, 1.0, a, rsa, csa, b, rsb, csb, beta, c, rsc, csc)
    }
}

/// `C = beta C + op(A) op(B)` on row-major buffers.
///
/// `op(A)` is `m x k`: stored `m x k` or, with `a_t`, stored `k x m`.
/// `op(B)` is `k x n`: stored `k x n` or, with `b_t`, stored `n x k`.
#[allow(clippy::too_many_arguments)]
pub(crate) fn gemm<T: Real>(
    m: usize,
    k: usize,
    n: usize,
    a: &[T],
    a_t: bool,
    b: &[T],
    b_t: bool,
    beta: T,
    c: &mut [T],
) {
    assert!(a.len() >= m * k && b.len() >= k * n && c.len() >= m * n);
    let (rsa, csa) = if a_t { (1, m as isize) } else { (k as isize, 1) };
    let (rsb, csb) = if b_t { (1, k as isize) } else { (n as isize, 1) };
    // SAFETY: lengths checked above; the strides describe exactly those buffers
    // and `c` is a distinct mutable borrow.
    unsafe {
        T::gemm_raw(
            m,
            k,
            n,
            a.as_ptr(),
            rsa,
            csa,
            b.as_ptr(),
            rsb,
            csb,
            beta,
            c.as_mut_ptr(),
            n as isize,
            1,
        )
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn gemm_transpose_flags() {
        // A = [[1,2,3],[4,5,6]] (2x3), B = [[1,0],[0,1],[1,1]] (3x2)
        let a = [1.0, 2.0, 3.0, 4.0, 5.0, 6.0];
        let at = [1.0, 4.0, 2.0, 5.0, 3.0, 6.0];
        let b = [1.0, 0.0, 0.0, 1.0, 1.0, 1.0];
        let bt = [1.0, 0.0, 1.0, 0.0, 1.0, 1.0];
        let want = [4.0, 5.0, 10.0, 11.0];
        for (aa, ta) in [(&a, false), (&at, true)] {
            for (bb, tb) in [(&b, false), (&bt, true)] {
                let mut c = [0.0f64; 4];
                gemm(2, 3, 2, aa, ta, bb, tb, 0.0, &mut c);
                assert_eq!(c, want);
            }
        }
        let mut c = [1.0f64; 4];
        gemm(2, 3, 2, &a, false, &b, false, 1.0, &mut c);
        assert_eq!(c, [5.0, 6.0, 11.0, 12.0]);
    }
}

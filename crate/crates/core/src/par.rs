//! Row-parallel helpers. Each output chunk is computed by the same sequential
//! code whether or not the `parallel` feature is enabled, so results are
//! bit-identical across thread counts.

#[cfg(feature = "parallel")]
use rayon::prelude::*;

pub(crate) fn for_each_row(out: &mut [f32], row_len: usize, f: impl Fn(usize, &mut [f32]) + Sync + Send) {
    #[cfg(feature = "parallel")]
    out.par_chunks_mut(row_len)
        .enumerate()
        .for_each(|(i, row)| f(i, row));
    #[cfg(not(feature = "parallel"))]
    out.chunks_mut(row_len)
        .enumerate()
        .for_each(|(i, row)| f(i, row));
}

//! Index helpers and line operators on tensor-product nodal arrays.

use crate::scalar::Real;

/// Linear index of node `(i, j, k)` on an `n`-point-per-direction grid.
#[inline(always)]
pub fn node_index(n: usize, i: usize, j: usize, k: usize) -> usize {
    i + n * (j + n * k)
}

/// Inverse of [`node_index`].
#[inline(always)]
pub fn node_coords(n: usize, node: usize) -> [usize; 3] {
    [node % n, (node / n) % n, node / (n * n)]
}

#[inline(always)]
pub fn stride(n: usize, dir: usize) -> usize {
    match dir {
        0 => 1,
        1 => n,
        _ => n * n,
    }
}

/// Applies a 1D operator along direction `dir`:
/// `out[node][c] = sum_m op[a][m] * input[node(a -> m)][c]` where `a` is the
/// node's index in direction `dir`. `op` is row-major `n x n`.
pub fn apply_along<T: Real>(
    op: &[T],
    n: usize,
    dir: usize,
    comps: usize,
    input: &[T],
    out: &mut [T],
) {
    let s = stride(n, dir);
    let n_nodes = n * n * n;
    debug_assert_eq!(input.len(), n_nodes * comps);
    debug_assert_eq!(out.len(), n_nodes * comps);
    if s == 1 {
        // Lines are contiguous runs of `n * comps` values.
        if comps < 3 {
            for (src, dst) in input.chunks_exact(n * comps).zip(out.chunks_exact_mut(n * comps)) {
                for a in 0..n {
                    let row = &op[a * n..(a + 1) * n];
                    for c in 0..comps {
                        let mut acc = T::zero();
                        for (m, &w) in row.iter().enumerate() {
                            acc = acc + w * src[m * comps + c];
                        }
                        dst[a * comps + c] = acc;
                    }
                }
            }
            return;
        }
        for (src, dst) in input.chunks_exact(n * comps).zip(out.chunks_exact_mut(n * comps)) {
            dst.fill(T::zero());
            // m outermost keeps each output's summation order while
            // exposing independent updates.
            for (m, x) in src.chunks_exact(comps).enumerate() {
                for (a, d) in dst.chunks_exact_mut(comps).enumerate() {
                    let w = op[a * n + m];
                    for (o, &v) in d.iter_mut().zip(x) {
                        *o = *o + w * v;
                    }
                }
            }
        }
        return;
    }
    // Otherwise the data is `[outer][line index][s * comps]` and each output
    // block is a combination of contiguous input blocks.
    let block = s * comps;
    for (src, dst) in input.chunks_exact(n * block).zip(out.chunks_exact_mut(n * block)) {
        for a in 0..n {
            let row = &op[a * n..(a + 1) * n];
            let d = &mut dst[a * block..(a + 1) * block];
            d.fill(T::zero());
            for (m, &w) in row.iter().enumerate() {
                for (o, &x) in d.iter_mut().zip(&src[m * block..(m + 1) * block]) {
                    *o = *o + w * x;
                }
            }
        }
    }
}

/// Nodes of face `face` (0: -xi, 1: +xi, 2: -eta, 3: +eta, 4: -zeta, 5: +zeta)
/// addressed by the two in-face indices `(a, b)` in increasing direction order.
#[inline(always)]
pub fn face_node(n: usize, face: usize, a: usize, b: usize) -> usize {
    let edge = if face % 2 == 0 { 0 } else { n - 1 };
    match face / 2 {
        0 => node_index(n, edge, a, b),
        1 => node_index(n, a, edge, b),
        _ => node_index(n, a, b, edge),
    }
}

/// Reference direction normal to a face.
#[inline(always)]
pub fn face_direction(face: usize) -> usize {
    face / 2
}

/// `+1` for faces on the positive side of the reference cube.
#[inline(always)]
pub fn face_sign(face: usize) -> i8 {
    if face % 2 == 0 {
        -1
    } else {
        1
    }
}

//! Safe wrapper over the GEMM kernel plus the im2col/col2im pair used by
//! convolution.

use crate::tensor::Scalar;

/// Storage of a logical matrix operand: row-major as given, or row-major
/// storage of its transpose.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Layout {
    Normal,
    Transposed,
}

/// `c (m×n) = a (m×k) · b (k×n) + (accumulate ? c : 0)`, all row-major.
///
/// With [`Layout::Transposed`] the operand slice holds the row-major
/// transpose (`k×m` for `a`, `n×k` for `b`).
pub fn matmul<T: Scalar>(
    m: usize,
    k: usize,
    n: usize,
    a: &[T],
    a_layout: Layout,
    b: &[T],
    b_layout: Layout,
    c: &mut [T],
    accumulate: bool,
) {
    assert!(a.len() >= m * k, "matmul: lhs too short");
    assert!(b.len() >= k * n, "matmul: rhs too short");
    assert!(c.len() >= m * n, "matmul: output too short");
    if m == 0 || n == 0 {
        return;
    }
    let (rsa, csa) = match a_layout {
        Layout::Normal => (k as isize, 1),
        Layout::Transposed => (1, m as isize),
    };
    let (rsb, csb) = match b_layout {
        Layout::Normal => (n as isize, 1),
        Layout::Transposed => (1, k as isize),
    };
    let beta = if accumulate { T::one() } else { T::zero() };
    // SAFETY: the asserts above bound every strided access by the slice lengths.
    unsafe {
        T::gemm_raw(
            m,
            k,
            n,
            T::one(),
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
        );
    }
}

/// Geometry of a valid (unpadded) 2-D convolution window sweep.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct ConvGeometry {
    pub channels: usize,
    pub height: usize,
    pub width: usize,
    pub kernel_h: usize,
    pub kernel_w: usize,
    pub stride: usize,
}

impl ConvGeometry {
    pub fn out_h(&self) -> usize {
        (self.height - self.kernel_h) / self.stride + 1
    }

    pub fn out_w(&self) -> usize {
        (self.width - self.kernel_w) / self.stride + 1
    }

    /// Rows of the column matrix: `C·Kh·Kw`.
    pub fn patch_len(&self) -> usize {
        self.channels * self.kernel_h * self.kernel_w
    }

    /// Output positions per image: `OH·OW`.
    pub fn positions(&self) -> usize {
        self.out_h() * self.out_w()
    }
}

/// Unrolls one C×H×W image into columns of the `patch_len × row_len` matrix
/// `cols`, starting at column `col_offset`.
pub fn im2col<T: Scalar>(
    g: &ConvGeometry,
    image: &[T],
    cols: &mut [T],
    row_len: usize,
    col_offset: usize,
) {
    let (oh, ow) = (g.out_h(), g.out_w());
    for c in 0..g.channels {
        let plane = &image[c * g.height * g.width..(c + 1) * g.height * g.width];
        for ki in 0..g.kernel_h {
            for kj in 0..g.kernel_w {
                let row = (c * g.kernel_h + ki) * g.kernel_w + kj;
                let dst = &mut cols[row * row_len + col_offset..row * row_len + col_offset + oh * ow];
                for oy in 0..oh {
                    let src_row = &plane[(oy * g.stride + ki) * g.width..];
                    for ox in 0..ow {
                        dst[oy * ow + ox] = src_row[ox * g.stride + kj];
                    }
                }
            }
        }
    }
}

/// Adjoint of [`im2col`]: scatters-and-adds columns back into one image.
pub fn col2im<T: Scalar>(
    g: &ConvGeometry,
    cols: &[T],
    row_len: usize,
    col_offset: usize,
    image: &mut [T],
) {
    let (oh, ow) = (g.out_h(), g.out_w());
    for c in 0..g.channels {
        let plane = &mut image[c * g.height * g.width..(c + 1) * g.height * g.width];
        for ki in 0..g.kernel_h {
            for kj in 0..g.kernel_w {
                let row = (c * g.kernel_h + ki) * g.kernel_w + kj;
                let src = &cols[row * row_len + col_offset..row * row_len + col_offset + oh * ow];
                for oy in 0..oh {
                    let base = (oy * g.stride + ki) * g.width;
                    for ox in 0..ow {
                        plane[base + ox * g.stride + kj] = plane[base + ox * g.stride + kj] + src[oy * ow + ox];
                    }
                }
            }
        }
    }
}

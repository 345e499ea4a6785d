//! Convolutional dictionaries: the synthesis operator `x = DΓ` and its adjoint.
//!
//! A dictionary holds `m` atoms of support `n × n × c`. Synthesis is a strided
//! transposed convolution with zero padding `p`:
//!
//! ```text
//! x(h, w, ch) = Σ_{i, j, k} Γ(i, j, k) · atom_k(h − i·s + p, w − j·s + p, ch)
//! ```
//!
//! so a representation of spatial size `H × W` produces an image of size
//! `((H − 1)·s + n − 2p) × ((W − 1)·s + n − 2p)`. Contributions falling
//! outside the image are cropped. The adjoint is the matching strided
//! cross-correlation, which treats everything outside the image as zero.

use crate::error::{CscError, Result};
use crate::par::for_each_row;
use crate::rng::Rng;
use crate::tensor::Tensor3;

/// Spatial bookkeeping between a representation and the image it synthesizes.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct DictGeometry {
    pub rep_height: usize,
    pub rep_width: usize,
    pub out_height: usize,
    pub out_width: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ConvDictionary {
    atom_count: usize,
    atom_size: usize,
    channels: usize,
    stride: usize,
    padding: usize,
    /// Atoms back to back, each `n × n × c` row-major channel-last.
    atoms: Vec<f32>,
}

/// Minimum norm below which [`ConvDictionary::normalize_atoms`] re-draws an atom.
pub const DEAD_ATOM_NORM: f64 = 1e-8;

impl ConvDictionary {
    pub fn new(
        atom_count: usize,
        atom_size: usize,
        channels: usize,
        stride: usize,
        padding: usize,
        atoms: Vec<f32>,
    ) -> Result<Self> {
        if atom_count == 0 || atom_size == 0 || channels == 0 || stride == 0 {
            return Err(CscError::domain(format!(
                "atom count, size, channels and stride must be positive \
                 (m={atom_count}, n={atom_size}, c={channels}, s={stride})"
            )));
        }
        if 2 * padding >= atom_size {
            return Err(CscError::domain(format!(
                "padding {padding} too large for atom size {atom_size} (need 2p < n)"
            )));
        }
        let expected = atom_count * atom_size * atom_size * channels;
        if atoms.len() != expected {
            return Err(CscError::shape(format!(
                "dictionary needs {expected} atom values, got {}",
                atoms.len()
            )));
        }
        if atoms.iter().any(|v| !v.is_finite()) {
            return Err(CscError::domain("atom values must be finite"));
        }
        Ok(ConvDictionary {
            atom_count,
            atom_size,
            channels,
            stride,
            padding,
            atoms,
        })
    }

    /// The 1×1×1 dictionary with a single atom equal to 1.
    pub fn identity() -> Self {
        Self::new(1, 1, 1, 1, 0, vec![1.0]).expect("valid identity dictionary")
    }

    /// Gaussian atoms scaled to unit norm.
    pub fn random(
        atom_count: usize,
        atom_size: usize,
        channels: usize,
        stride: usize,
        padding: usize,
        rng: &mut Rng,
    ) -> Result<Self> {
        let len = atom_count
            .checked_mul(atom_size * atom_size * channels)
            .ok_or_else(|| CscError::domain("dictionary too large"))?;
        let atoms = (0..len).map(|_| rng.gaussian() as f32).collect();
        let d = Self::new(atom_count, atom_size, channels, stride, padding, atoms)?;
        Ok(d.normalize_atoms(rng))
    }

    pub fn atom_count(&self) -> usize {
        self.atom_count
    }

    pub fn atom_size(&self) -> usize {
        self.atom_size
    }

    pub fn channels(&self) -> usize {
        self.channels
    }

    pub fn stride(&self) -> usize {
        self.stride
    }

    pub fn padding(&self) -> usize {
        self.padding
    }

    pub fn atom_len(&self) -> usize {
        self.atom_size * self.atom_size * self.channels
    }

    pub fn atoms(&self) -> &[f32] {
        &self.atoms
    }

    pub fn atom(&self, k: usize) -> &[f32] {
        let len = self.atom_len();
        &self.atoms[k * len..(k + 1) * len]
    }

    pub fn atom_tensor(&self, k: usize) -> Tensor3 {
        Tensor3::from_vec_unchecked(
            self.atom_size,
            self.atom_size,
            self.channels,
            self.atom(k).to_vec(),
        )
    }

    pub fn atom_norm(&self, k: usize) -> f64 {
        self.atom(k)
            .iter()
            .map(|&v| f64::from(v) * f64::from(v))
            .sum::<f64>()
            .sqrt()
    }

    /// Same geometry, new atom values.
    pub fn with_atoms(&self, atoms: Vec<f32>) -> Result<Self> {
        Self::new(
            self.atom_count,
            self.atom_size,
            self.channels,
            self.stride,
            self.padding,
            atoms,
        )
    }

    /// Every atom multiplied by `factor`.
    pub fn scaled(&self, factor: f32) -> Self {
        ConvDictionary {
            atoms: self.atoms.iter().map(|v| v * factor).collect(),
            ..self.clone()
        }
    }

    /// Output size for a `rep_height × rep_width` representation.
    pub fn geometry(&self, rep_height: usize, rep_width: usize) -> Result<DictGeometry> {
        if rep_height == 0 || rep_width == 0 {
            return Err(CscError::geometry("representation dims must be positive"));
        }
        let out = |r: usize| {
            ((r - 1) * self.stride + self.atom_size)
                .checked_sub(2 * self.padding)
                .filter(|&v| v > 0)
        };
        match (out(rep_height), out(rep_width)) {
            (Some(out_height), Some(out_width)) => Ok(DictGeometry {
                rep_height,
                rep_width,
                out_height,
                out_width,
            }),
            _ => Err(CscError::geometry(format!(
                "representation {rep_height}x{rep_width} yields non-positive output"
            ))),
        }
    }

    /// Inverse of [`geometry`](Self::geometry): the representation size whose
    /// synthesis is exactly `out_height × out_width`.
    pub fn geometry_for_output(&self, out_height: usize, out_width: usize) -> Result<DictGeometry> {
        let rep = |o: usize| -> Option<usize> {
            let t = (o + 2 * self.padding).checked_sub(self.atom_size)?;
            (t % self.stride == 0).then_some(t / self.stride + 1)
        };
        match (rep(out_height), rep(out_width)) {
            (Some(h), Some(w)) => self.geometry(h, w),
            _ => Err(CscError::shape(format!(
                "{out_height}x{out_width} is not a synthesis output size for n={}, s={}, p={}",
                self.atom_size, self.stride, self.padding
            ))),
        }
    }

    /// `x = DΓ`.
    pub fn synthesize(&self, gamma: &Tensor3) -> Result<Tensor3> {
        if gamma.channels() != self.atom_count {
            return Err(CscError::shape(format!(
                "representation has {} channels, dictionary has {} atoms",
                gamma.channels(),
                self.atom_count
            )));
        }
        let geo = self.geometry(gamma.height(), gamma.width())?;
        let (n, c, s, p) = (self.atom_size, self.channels, self.stride, self.padding);
        let (oh, ow) = (geo.out_height as isize, geo.out_width as isize);
        // Scatter each nonzero coefficient's atom, clipped to the image, in a
        // fixed needle/atom order.
        let clip = |origin: isize, limit: isize| -> (usize, usize) {
            let lo = (-origin).clamp(0, n as isize) as usize;
            let hi = (limit - origin).clamp(0, n as isize) as usize;
            (lo, hi.max(lo))
        };
        let mut out = vec![0.0f32; geo.out_height * geo.out_width * c];
        for i in 0..geo.rep_height {
            let top = (i * s) as isize - p as isize;
            let (u_lo, u_hi) = clip(top, oh);
            for j in 0..geo.rep_width {
                let left = (j * s) as isize - p as isize;
                let (v_lo, v_hi) = clip(left, ow);
                let span = (v_hi - v_lo) * c;
                for (k, &g) in gamma.needle(i, j).iter().enumerate() {
                    if g == 0.0 {
                        continue;
                    }
                    let atom = self.atom(k);
                    for u in u_lo..u_hi {
                        let o = ((top + u as isize) as usize * geo.out_width
                            + (left + v_lo as isize) as usize)
                            * c;
                        let a = (u * n + v_lo) * c;
                        for (dst, &w) in out[o..o + span].iter_mut().zip(&atom[a..a + span]) {
                            *dst += g * w;
                        }
                    }
                }
            }
        }
        Ok(Tensor3::from_vec_unchecked(
            geo.out_height,
            geo.out_width,
            c,
            out,
        ))
    }

    /// `Γ = Dᵀx`.
    pub fn adjoint(&self, x: &Tensor3) -> Result<Tensor3> {
        if x.channels() != self.channels {
            return Err(CscError::shape(format!(
                "signal has {} channels, atoms have {}",
                x.channels(),
                self.channels
            )));
        }
        let geo = self.geometry_for_output(x.height(), x.width())?;
        let (n, m, c, s, p) = (
            self.atom_size,
            self.atom_count,
            self.channels,
            self.stride,
            self.padding,
        );
        let (xh, xw) = (x.height() as isize, x.width() as isize);
        let atom_len = self.atom_len();
        let mut out = vec![0.0f32; geo.rep_height * geo.rep_width * m];
        for_each_row(&mut out, geo.rep_width * m, |i, row| {
            let mut patch = vec![0.0f32; atom_len];
            for j in 0..geo.rep_width {
                patch.fill(0.0);
                for u in 0..n {
                    let h = (i * s + u) as isize - p as isize;
                    if h < 0 || h >= xh {
                        continue;
                    }
                    for v in 0..n {
                        let w = (j * s + v) as isize - p as isize;
                        if w < 0 || w >= xw {
                            continue;
                        }
                        let src = x.needle(h as usize, w as usize);
                        patch[(u * n + v) * c..(u * n + v + 1) * c].copy_from_slice(src);
                    }
                }
                let needle = &mut row[j * m..(j + 1) * m];
                for (k, slot) in needle.iter_mut().enumerate() {
                    let atom = &self.atoms[k * atom_len..(k + 1) * atom_len];
                    *slot = dot(&patch, atom);
                }
            }
        });
        Ok(Tensor3::from_vec_unchecked(
            geo.rep_height,
            geo.rep_width,
            m,
            out,
        ))
    }

    /// Gradient of `½‖DΓ − x‖²` with respect to the atoms, given the residual
    /// `DΓ − x`: `G_k(u, v, ch) = Σ_{i,j} Γ(i, j, k)·r(i·s + u − p, j·s + v − p, ch)`.
    /// Laid out like [`atoms`](Self::atoms).
    pub fn atom_gradient(&self, gamma: &Tensor3, residual: &Tensor3) -> Result<Vec<f32>> {
        let geo = self.geometry(gamma.height(), gamma.width())?;
        if gamma.channels() != self.atom_count
            || residual.shape() != (geo.out_height, geo.out_width, self.channels)
        {
            return Err(CscError::shape("representation and residual do not match the dictionary"));
        }
        let (n, c, s, p) = (self.atom_size, self.channels, self.stride, self.padding);
        let atom_len = self.atom_len();
        let (rh, rw) = (residual.height() as isize, residual.width() as isize);
        let mut grad = vec![0.0f64; self.atoms.len()];
        for i in 0..gamma.height() {
            for j in 0..gamma.width() {
                for (k, &g) in gamma.needle(i, j).iter().enumerate() {
                    if g == 0.0 {
                        continue;
                    }
                    let g = f64::from(g);
                    let dst = &mut grad[k * atom_len..(k + 1) * atom_len];
                    for u in 0..n {
                        let h = (i * s + u) as isize - p as isize;
                        if h < 0 || h >= rh {
                            continue;
                        }
                        for v in 0..n {
                            let w = (j * s + v) as isize - p as isize;
                            if w < 0 || w >= rw {
                                continue;
                            }
                            let src = residual.needle(h as usize, w as usize);
                            for (d, &r) in dst[(u * n + v) * c..(u * n + v + 1) * c].iter_mut().zip(src) {
                                *d += g * f64::from(r);
                            }
                        }
                    }
                }
            }
        }
        Ok(grad.into_iter().map(|v| v as f32).collect())
    }

    /// Scale every atom to unit ℓ2 norm. Atoms with norm below
    /// [`DEAD_ATOM_NORM`] are replaced by a random unit atom drawn from `rng`.
    pub fn normalize_atoms(&self, rng: &mut Rng) -> ConvDictionary {
        let len = self.atom_len();
        let mut atoms = self.atoms.clone();
        for chunk in atoms.chunks_exact_mut(len) {
            let mut norm = l2(chunk);
            while norm < DEAD_ATOM_NORM {
                for v in chunk.iter_mut() {
                    *v = rng.gaussian() as f32;
                }
                norm = l2(chunk);
            }
            for v in chunk.iter_mut() {
                *v = (f64::from(*v) / norm) as f32;
            }
        }
        ConvDictionary {
            atoms,
            ..self.clone()
        }
    }

    /// Tile all atoms into one image, `cols` tiles per row, row-major.
    ///
    /// Each atom is affinely mapped to `[0, 255]` on its own; a constant atom
    /// becomes 127.5. Tiles are separated (and framed) by one zero pixel.
    pub fn export_atom_grid(&self, cols: usize) -> Result<Tensor3> {
        if self.channels != 1 && self.channels != 3 {
            return Err(CscError::domain(format!(
                "atom grid needs 1 or 3 channels, dictionary has {}",
                self.channels
            )));
        }
        if cols == 0 {
            return Err(CscError::domain("grid needs at least one column"));
        }
        let (n, c) = (self.atom_size, self.channels);
        let rows = self.atom_count.div_ceil(cols);
        let mut grid = Tensor3::zeros(rows * (n + 1) + 1, cols * (n + 1) + 1, c)?;
        for k in 0..self.atom_count {
            let atom = self.atom(k);
            let (lo, hi) = atom
                .iter()
                .fold((f32::INFINITY, f32::NEG_INFINITY), |(a, b), &v| {
                    (a.min(v), b.max(v))
                });
            let (top, left) = (1 + (k / cols) * (n + 1), 1 + (k % cols) * (n + 1));
            for u in 0..n {
                for v in 0..n {
                    for ch in 0..c {
                        let a = atom[(u * n + v) * c + ch];
                        let val = if hi > lo {
                            ((f64::from(a) - f64::from(lo)) / (f64::from(hi) - f64::from(lo))
                                * 255.0) as f32
                        } else {
                            127.5
                        };
                        grid.set(top + u, left + v, ch, val);
                    }
                }
            }
        }
        Ok(grid)
    }
}

/// Dot product with eight interleaved partial sums, combined in a fixed order.
fn dot(a: &[f32], b: &[f32]) -> f32 {
    let mut acc = [0.0f32; 8];
    let (ca, cb) = (a.chunks_exact(8), b.chunks_exact(8));
    let tail: f32 = ca
        .remainder()
        .iter()
        .zip(cb.remainder())
        .map(|(x, y)| x * y)
        .sum();
    for (x, y) in ca.zip(cb) {
        for l in 0..8 {
            acc[l] += x[l] * y[l];
        }
    }
    acc.iter().sum::<f32>() + tail
}

fn l2(v: &[f32]) -> f64 {
    v.iter()
        .map(|&x| f64::from(x) * f64::from(x))
        .sum::<f64>()
        .sqrt()
}

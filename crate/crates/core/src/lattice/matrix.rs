use super::{LatticeWindow, WindowKind};
use crate::linalg::{CMat, HermitianBand};
use crate::symbol::MatrixSymbol;
use crate::{Error, Result, C64};

/// Linear operator on lattice vectors of a fixed window.
pub trait LinearOperator: Sync {
    fn dim(&self) -> usize;

    fn apply_into(&self, x: &[C64], y: &mut [C64]);

    fn apply(&self, x: &[C64]) -> Vec<C64> {
        let mut y = vec![C64::new(0.0, 0.0); self.dim()];
        self.apply_into(x, &mut y);
        y
    }
}

/// Dense Hermitian block on a contiguous site range.
#[derive(Debug, Clone, PartialEq)]
pub struct Patch {
    pub first_site: usize,
    pub sites: usize,
    /// Row-major `(sites*N) x (sites*N)`.
    pub data: Vec<C64>,
}

/// Hermitian block-banded matrix on a lattice window, plus an optional
/// dense patch.
#[derive(Debug, Clone, PartialEq)]
pub struct BandedBlockMatrix {
    window: LatticeWindow,
    bandwidth: usize,
    /// `upper[((site * (bw + 1) + d) * N + r) * N + c] = B(site, site + d)[r][c]`.
    upper: Vec<C64>,
    patch: Option<Patch>,
}

const ZERO: C64 = C64::new(0.0, 0.0);

impl BandedBlockMatrix {
    pub fn zeros(window: LatticeWindow, bandwidth: usize) -> Self {
        let nb = window.block_size;
        BandedBlockMatrix {
            window,
            bandwidth,
            upper: vec![ZERO; window.sites() * (bandwidth + 1) * nb * nb],
            patch: None,
        }
    }

    pub fn window(&self) -> &LatticeWindow {
        &self.window
    }

    pub fn bandwidth(&self) -> usize {
        self.bandwidth
    }

    pub fn block_size(&self) -> usize {
        self.window.block_size
    }

    pub fn patch(&self) -> Option<&Patch> {
        self.patch.as_ref()
    }

    fn offset(&self, site: usize, d: usize) -> usize {
        let nb = self.window.block_size;
        (site * (self.bandwidth + 1) + d) * nb * nb
    }

    /// Set the band block `B(site, site + d)`; diagonal blocks are symmetrized.
    pub fn set_band_block(&mut self, site: usize, d: usize, b: &CMat) {
        let nb = self.window.block_size;
        assert!(d <= self.bandwidth && site + d < self.window.sites());
        let b = if d == 0 { (b + b.adjoint()) * C64::new(0.5, 0.0) } else { b.clone() };
        let off = self.offset(site, d);
        for r in 0..nb {
            for c in 0..nb {
                self.upper[off + r * nb + c] = b[(r, c)];
            }
        }
    }

    /// Install a dense patch; it is symmetrized and added to any existing one.
    pub fn add_patch(&mut self, mut patch: Patch) {
        let n = patch.sites * self.window.block_size;
        assert_eq!(patch.data.len(), n * n);
        assert!(patch.first_site + patch.sites <= self.window.sites());
        for i in 0..n {
            for j in i..n {
                let a = 0.5 * (patch.data[i * n + j] + patch.data[j * n + i].conj());
                patch.data[i * n + j] = a;
                patch.data[j * n + i] = a.conj();
            }
        }
        self.patch = Some(match self.patch.take() {
            None => patch,
            Some(old) => merge_patches(&old, &patch, self.window.block_size),
        });
    }

    fn band_entry(&self, row: usize, col: usize) -> C64 {
        let nb = self.window.block_size;
        let (si, ri) = (row / nb, row % nb);
        let (sj, rj) = (col / nb, col % nb);
        if si <= sj {
            let d = sj - si;
            if d > self.bandwidth {
                return ZERO;
            }
            self.upper[self.offset(si, d) + ri * nb + rj]
        } else {
            let d = si - sj;
            if d > self.bandwidth {
                return ZERO;
            }
            self.upper[self.offset(sj, d) + rj * nb + ri].conj()
        }
    }

    fn patch_entry(&self, row: usize, col: usize) -> C64 {
        let nb = self.window.block_size;
        match &self.patch {
            Some(p) => {
                let lo = p.first_site * nb;
                let n = p.sites * nb;
                if row >= lo && row < lo + n && col >= lo && col < lo + n {
                    p.data[(row - lo) * n + (col - lo)]
                } else {
                    ZERO
                }
            }
            None => ZERO,
        }
    }

    /// Scalar entry `(row, col)` including the patch.
    pub fn entry(&self, row: usize, col: usize) -> C64 {
        self.band_entry(row, col) + self.patch_entry(row, col)
    }

    /// Block `B(i, j)` at lattice positions `i`, `j`.
    pub fn block(&self, i: i64, j: i64) -> CMat {
        let nb = self.window.block_size;
        match (self.window.site(i), self.window.site(j)) {
            (Some(si), Some(sj)) => CMat::from_fn(nb, nb, |r, c| self.entry(si * nb + r, sj * nb + c)),
            _ => CMat::zeros(nb, nb),
        }
    }

    pub fn checked_apply(&self, x: &[C64]) -> Result<Vec<C64>> {
        if x.len() != self.dim() {
            return Err(Error::DimensionMismatch {
                expected: self.dim(),
                got: x.len(),
            });
        }
        Ok(self.apply(x))
    }

    /// Entrywise sum; windows and block sizes must agree.
    pub fn add(&self, other: &Self) -> Result<Self> {
        self.combine(other, 1.0)
    }

    pub fn sub(&self, other: &Self) -> Result<Self> {
        self.combine(other, -1.0)
    }

    fn combine(&self, other: &Self, sign: f64) -> Result<Self> {
        if self.window != other.window {
            return Err(Error::precondition("matrices live on different windows"));
        }
        let bw = self.bandwidth.max(other.bandwidth);
        let nb = self.window.block_size;
        let mut out = BandedBlockMatrix::zeros(self.window, bw);
        for site in 0..self.window.sites() {
            for d in 0..=bw {
                if site + d >= self.window.sites() {
                    break;
                }
                let off = out.offset(site, d);
                for k in 0..nb * nb {
                    let mut v = ZERO;
                    if d <= self.bandwidth {
                        v += self.upper[self.offset(site, d) + k];
                    }
                    if d <= other.bandwidth {
                        v += other.upper[other.offset(site, d) + k] * sign;
                    }
                    out.upper[off + k] = v;
                }
            }
        }
        out.patch = self.patch.clone();
        if let Some(p) = &other.patch {
            let mut p = p.clone();
            for v in p.data.iter_mut() {
                *v *= sign;
            }
            out.patch = Some(match out.patch.take() {
                None => p,
                Some(old) => merge_patches(&old, &p, nb),
            });
        }
        Ok(out)
    }

    /// Compression to the two-sided window of half-length `half_length`
    /// (lattice positions `-half_length ..= half_length - 1`).
    pub fn restrict(&self, half_length: usize) -> Result<Self> {
        let target = LatticeWindow::two_sided(half_length, self.window.block_size);
        let first = self
            .window
            .site(target.first())
            .filter(|_| self.window.site(target.position(target.sites() - 1)).is_some())
            .ok_or_else(|| Error::precondition("restriction window exceeds the matrix window"))?;
        let nb = self.window.block_size;
        let mut out = BandedBlockMatrix::zeros(target, self.bandwidth);
        for s in 0..target.sites() {
            for d in 0..=self.bandwidth {
                if s + d >= target.sites() {
                    break;
                }
                let src = self.offset(first + s, d);
                let dst = out.offset(s, d);
                out.upper[dst..dst + nb * nb].copy_from_slice(&self.upper[src..src + nb * nb]);
            }
        }
        if let Some(p) = &self.patch {
            let lo = p.first_site.max(first);
            let hi = (p.first_site + p.sites).min(first + target.sites());
            if hi > lo {
                let n_old = p.sites * nb;
                let sites = hi - lo;
                let n = sites * nb;
                let base = (lo - p.first_site) * nb;
                let mut data = vec![ZERO; n * n];
                for r in 0..n {
                    for c in 0..n {
                        data[r * n + c] = p.data[(base + r) * n_old + base + c];
                    }
                }
                out.patch = Some(Patch {
                    first_site: lo - first,
                    sites,
                    data,
                });
            }
        }
        Ok(out)
    }

    /// Scalar Hermitian band form, patch merged in.
    pub fn to_scalar_band(&self) -> HermitianBand {
        let nb = self.window.block_size;
        let n = self.dim();
        let mut w = if self.bandwidth == 0 && nb == 1 { 0 } else { (self.bandwidth + 1) * nb - 1 };
        if let Some(p) = &self.patch {
            let m = p.sites * nb;
            for r in 0..m {
                for c in r..m {
                    let v = p.data[r * m + c];
                    if v.re != 0.0 || v.im != 0.0 {
                        w = w.max(c - r);
                    }
                }
            }
        }
        let w = w.min(n.saturating_sub(1));
        let mut band = HermitianBand::zeros(n, w);
        for row in 0..n {
            let site = row / nb;
            let lo_col = row;
            let hi_col = ((site + self.bandwidth + 1) * nb).min(n);
            for col in lo_col..hi_col {
                let v = self.band_entry(row, col);
                if v.re != 0.0 || v.im != 0.0 {
                    band.add_upper(row, col, v);
                }
            }
        }
        if let Some(p) = &self.patch {
            let m = p.sites * nb;
            let lo = p.first_site * nb;
            for r in 0..m {
                for c in r..m {
                    let v = p.data[r * m + c];
                    if v.re != 0.0 || v.im != 0.0 {
                        band.add_upper(lo + r, lo + c, v);
                    }
                }
            }
        }
        band
    }

    /// Dense copy, for small windows and tests.
    pub fn to_dense(&self) -> CMat {
        let n = self.dim();
        CMat::from_fn(n, n, |r, c| self.entry(r, c))
    }

    /// Largest `|B(i,j) - conj(B(j,i))|` over stored diagonal blocks and the patch.
    pub fn hermiticity_defect(&self) -> f64 {
        let nb = self.window.block_size;
        let mut worst = 0.0f64;
        for site in 0..self.window.sites() {
            let off = self.offset(site, 0);
            for r in 0..nb {
                for c in 0..nb {
                    let a = self.upper[off + r * nb + c];
                    let b = self.upper[off + c * nb + r];
                    worst = worst.max((a - b.conj()).norm());
                }
            }
        }
        if let Some(p) = &self.patch {
            let m = p.sites * nb;
            for r in 0..m {
                for c in 0..m {
                    worst = worst.max((p.data[r * m + c] - p.data[c * m + r].conj()).norm());
                }
            }
        }
        worst
    }

    /// Gershgorin enclosure of the spectrum.
    pub fn gershgorin(&self) -> (f64, f64) {
        let n = self.dim();
        let nb = self.window.block_size;
        let mut center = vec![0.0; n];
        let mut radius = vec![0.0; n];
        for row in 0..n {
            let site = row / nb;
            let lo = site.saturating_sub(self.bandwidth) * nb;
            let hi = ((site + self.bandwidth + 1) * nb).min(n);
            for col in lo..hi {
                let v = self.band_entry(row, col);
                if col == row {
                    center[row] += v.re;
                } else {
                    radius[row] += v.norm();
                }
            }
        }
        if let Some(p) = &self.patch {
            let m = p.sites * nb;
            let base = p.first_site * nb;
            for r in 0..m {
                for c in 0..m {
                    let v = p.data[r * m + c];
                    if r == c {
                        center[base + r] += v.re;
                    } else {
                        radius[base + r] += v.norm();
                    }
                }
            }
        }
        let lo = (0..n).map(|i| center[i] - radius[i]).fold(f64::INFINITY, f64::min);
        let hi = (0..n).map(|i| center[i] + radius[i]).fold(f64::NEG_INFINITY, f64::max);
        (lo, hi)
    }

    /// Row-major copy for repeated products.
    pub fn compile(&self) -> CompiledBand {
        CompiledBand::new(self)
    }

    /// Largest `|position|` of a site covered by the dense patch.
    pub fn patch_radius(&self) -> Option<usize> {
        self.patch.as_ref().filter(|p| p.sites > 0).map(|p| {
            let a = self.window.position(p.first_site).unsigned_abs();
            let b = self.window.position(p.first_site + p.sites - 1).unsigned_abs();
            a.max(b) as usize
        })
    }

    /// Number of sites a vector's support can grow by under one application.
    pub fn reach(&self) -> usize {
        let patch = self.patch.as_ref().map_or(0, |p| p.sites);
        self.bandwidth.max(patch)
    }
}

/// Row-major band copy of a [`BandedBlockMatrix`] for repeated products.
#[derive(Debug, Clone)]
pub struct CompiledBand {
    n: usize,
    w: usize,
    /// `rows[r * (2w + 1) + (c + w - r)] = A[r, c]`.
    rows: Vec<C64>,
    /// Real parts only, when every entry is real.
    real: Option<Vec<f64>>,
    /// First and last nonzero column of each row.
    profile: Vec<(usize, usize)>,
    patch: Option<CompiledPatch>,
}

/// Patches up to this dimension are factored when compiled.
const MAX_FACTORED_PATCH: usize = 1024;

/// Dense patch of a compiled operator, stored as `U diag(w) U^*` when its
/// numerical rank is small.
#[derive(Debug, Clone)]
struct CompiledPatch {
    base: usize,
    m: usize,
    form: PatchForm,
}

#[derive(Debug, Clone)]
enum PatchForm {
    Dense(Vec<C64>),
    /// Row-major `m x rank` eigenvector block and the eigenvalues.
    LowRank { u: Vec<C64>, w: Vec<f64> },
}

impl CompiledPatch {
    fn new(base: usize, m: usize, data: &[C64]) -> Self {
        let dense = || CompiledPatch {
            base,
            m,
            form: PatchForm::Dense(data.to_vec()),
        };
        if !(32..=MAX_FACTORED_PATCH).contains(&m) {
            return dense();
        }
        let f = faer::Mat::<C64>::from_fn(m, m, |i, j| data[i * m + j]);
        let Ok((vals, vecs)) = crate::linalg::faer_eigh(&f) else {
            return dense();
        };
        // eigenvalues below the eigensolver's own accuracy carry no information
        let top = vals.iter().fold(0.0f64, |a, v| a.max(v.abs()));
        let keep: Vec<usize> = (0..m).filter(|&k| vals[k].abs() > m as f64 * f64::EPSILON * top).collect();
        if 2 * keep.len() >= m {
            return dense();
        }
        let r = keep.len();
        let mut u = vec![ZERO; m * r];
        for i in 0..m {
            for (c, &k) in keep.iter().enumerate() {
                u[i * r + c] = vecs[(i, k)];
            }
        }
        CompiledPatch {
            base,
            m,
            form: PatchForm::LowRank {
                u,
                w: keep.iter().map(|&k| vals[k]).collect(),
            },
        }
    }

    /// Adds rows `r0..=r1` (patch-relative) of `P x` to `y`.
    fn add_rows(&self, x: &[C64], y: &mut [C64], r0: usize, r1: usize) {
        let (base, m) = (self.base, self.m);
        let xs = &x[base..base + m];
        match &self.form {
            PatchForm::Dense(data) => {
                for r in r0..=r1 {
                    let row = &data[r * m..(r + 1) * m];
                    let acc: C64 = row.iter().zip(xs).map(|(c, xv)| c * xv).sum();
                    y[base + r] += acc;
                }
            }
            PatchForm::LowRank { u, w } => {
                let k = w.len();
                let mut coef = vec![ZERO; k];
                for (i, xv) in xs.iter().enumerate() {
                    for (c, uv) in coef.iter_mut().zip(&u[i * k..(i + 1) * k]) {
                        *c += uv.conj() * xv;
                    }
                }
                for (c, wv) in coef.iter_mut().zip(w) {
                    *c *= *wv;
                }
                for r in r0..=r1 {
                    let acc: C64 = u[r * k..(r + 1) * k].iter().zip(&coef).map(|(a, b)| a * b).sum();
                    y[base + r] += acc;
                }
            }
        }
    }
}

impl CompiledBand {
    pub fn new(m: &BandedBlockMatrix) -> Self {
        let nb = m.window.block_size;
        let n = m.dim();
        let w = if n == 0 { 0 } else { ((m.bandwidth + 1) * nb - 1).min(n - 1) };
        let width = 2 * w + 1;
        let mut rows = vec![ZERO; n * width];
        for r in 0..n {
            let lo = r.saturating_sub(w);
            let hi = (r + w).min(n - 1);
            for c in lo..=hi {
                rows[r * width + c + w - r] = m.band_entry(r, c);
            }
        }
        let patch = m
            .patch
            .as_ref()
            .filter(|p| p.sites > 0)
            .map(|p| CompiledPatch::new(p.first_site * nb, p.sites * nb, &p.data));
        let real = rows
            .iter()
            .all(|v| v.im == 0.0)
            .then(|| rows.iter().map(|v| v.re).collect());
        let profile = (0..n)
            .map(|r| {
                let lo = r.saturating_sub(w);
                let hi = (r + w).min(n - 1);
                let nz = |c: &usize| rows[r * width + c + w - r] != ZERO;
                match ((lo..=hi).find(nz), (lo..=hi).rev().find(nz)) {
                    (Some(a), Some(b)) => (a, b),
                    _ => (r, r),
                }
            })
            .collect();
        CompiledBand {
            n,
            w,
            rows,
            real,
            profile,
            patch,
        }
    }
}

impl CompiledBand {
    /// Rows that can be nonzero in `A x` when `x` vanishes outside
    /// `lo..=hi`.
    pub fn spread(&self, lo: usize, hi: usize) -> (usize, usize) {
        let mut a = lo.saturating_sub(self.w);
        let mut b = (hi + self.w).min(self.n - 1);
        if let Some(p) = &self.patch {
            if lo < p.base + p.m && hi >= p.base {
                a = a.min(p.base);
                b = b.max(p.base + p.m - 1);
            }
        }
        (a, b)
    }

    /// Rows `lo..=hi` of `A x`; other entries of `y` are left alone.
    pub fn apply_rows_into(&self, x: &[C64], y: &mut [C64], lo: usize, hi: usize) {
        let w = self.w;
        let width = 2 * w + 1;
        for r in lo..=hi {
            let (a, b) = self.profile[r];
            let base = r * width + w - r;
            let xs = &x[a..=b];
            y[r] = match &self.real {
                Some(re) => {
                    let (mut u, mut v) = (0.0, 0.0);
                    for (c, xv) in re[base + a..=base + b].iter().zip(xs) {
                        u += c * xv.re;
                        v += c * xv.im;
                    }
                    C64::new(u, v)
                }
                None => self.rows[base + a..=base + b].iter().zip(xs).map(|(c, xv)| c * xv).sum(),
            };
        }
        if let Some(p) = &self.patch {
            let (pa, pb) = (lo.max(p.base), hi.min(p.base + p.m - 1));
            if pa <= pb {
                p.add_rows(x, y, pa - p.base, pb - p.base);
            }
        }
    }
}

impl LinearOperator for CompiledBand {
    fn dim(&self) -> usize {
        self.n
    }

    fn apply_into(&self, x: &[C64], y: &mut [C64]) {
        let (n, w) = (self.n, self.w);
        let width = 2 * w + 1;
        assert_eq!(x.len(), n, "operand length");
        for r in 0..n {
            let (lo, hi) = self.profile[r];
            let base = r * width + w - r;
            let xs = &x[lo..=hi];
            y[r] = match &self.real {
                Some(re) => {
                    let (mut a, mut b) = (0.0, 0.0);
                    for (v, xv) in re[base + lo..=base + hi].iter().zip(xs) {
                        a += v * xv.re;
                        b += v * xv.im;
                    }
                    C64::new(a, b)
                }
                None => self.rows[base + lo..=base + hi].iter().zip(xs).map(|(v, xv)| v * xv).sum(),
            };
        }
        if let Some(p) = &self.patch {
            p.add_rows(x, y, 0, p.m - 1);
        }
    }
}

impl LinearOperator for BandedBlockMatrix {
    fn dim(&self) -> usize {
        self.window.dim()
    }

    fn apply_into(&self, x: &[C64], y: &mut [C64]) {
        let nb = self.window.block_size;
        let sites = self.window.sites();
        assert_eq!(x.len(), self.dim(), "operand length");
        for v in y.iter_mut() {
            *v = ZERO;
        }
        for s in 0..sites {
            for d in 0..=self.bandwidth.min(sites - 1 - s) {
                let off = self.offset(s, d);
                let blk = &self.upper[off..off + nb * nb];
                let t = s + d;
                for r in 0..nb {
                    let mut acc = ZERO;
                    for c in 0..nb {
                        acc += blk[r * nb + c] * x[t * nb + c];
                    }
                    y[s * nb + r] += acc;
                }
                if d > 0 {
                    for c in 0..nb {
                        let mut acc = ZERO;
                        for r in 0..nb {
                            acc += blk[r * nb + c].conj() * x[s * nb + r];
                        }
                        y[t * nb + c] += acc;
                    }
                }
            }
        }
        if let Some(p) = &self.patch {
            let m = p.sites * nb;
            let base = p.first_site * nb;
            for r in 0..m {
                let row = &p.data[r * m..(r + 1) * m];
                let mut acc = ZERO;
                for (c, v) in row.iter().enumerate() {
                    acc += v * x[base + c];
                }
                y[base + r] += acc;
            }
        }
    }
}

impl BandedBlockMatrix {
    pub fn dim(&self) -> usize {
        self.window.dim()
    }
}

fn merge_patches(a: &Patch, b: &Patch, nb: usize) -> Patch {
    let first = a.first_site.min(b.first_site);
    let last = (a.first_site + a.sites).max(b.first_site + b.sites);
    let sites = last - first;
    let n = sites * nb;
    let mut data = vec![ZERO; n * n];
    for p in [a, b] {
        let m = p.sites * nb;
        let base = (p.first_site - first) * nb;
        for r in 0..m {
            for c in 0..m {
                data[(base + r) * n + base + c] += p.data[r * m + c];
            }
        }
    }
    Patch {
        first_site: first,
        sites,
        data,
    }
}

fn check_window(sym: &MatrixSymbol, window: &LatticeWindow, kind: WindowKind) -> Result<()> {
    if window.kind != kind {
        return Err(Error::precondition(format!("expected a {kind:?} window")));
    }
    if window.block_size != sym.block_size() {
        return Err(Error::DimensionMismatch {
            expected: sym.block_size(),
            got: window.block_size,
        });
    }
    let required = 2 * sym.cutoff() + 2;
    if window.half_length < required {
        return Err(Error::WindowTooSmall {
            half_length: window.half_length,
            required,
        });
    }
    Ok(())
}

fn assemble_banded(sym: &MatrixSymbol, window: LatticeWindow) -> BandedBlockMatrix {
    let m = sym.cutoff();
    let mut out = BandedBlockMatrix::zeros(window, m);
    // B(i, i + d) = coeff(-d)
    let blocks: Vec<CMat> = (0..=m).map(|d| sym.coeff(-(d as i64))).collect();
    for site in 0..window.sites() {
        for (d, b) in blocks.iter().enumerate() {
            if site + d < window.sites() {
                out.set_band_block(site, d, b);
            }
        }
    }
    out
}

/// `B(i, j) = coeff(i - j)` on sites `-L ..= L-1`.
pub fn assemble_laurent(sym: &MatrixSymbol, window: &LatticeWindow) -> Result<BandedBlockMatrix> {
    check_window(sym, window, WindowKind::TwoSided)?;
    Ok(assemble_banded(sym, *window))
}

/// `B(i, j) = coeff(i - j)` on sites `0 ..= L-1`.
pub fn assemble_toeplitz(sym: &MatrixSymbol, window: &LatticeWindow) -> Result<BandedBlockMatrix> {
    check_window(sym, window, WindowKind::OneSided)?;
    Ok(assemble_banded(sym, *window))
}

/// The entries of the Laurent matrix that couple negative and nonnegative sites.
pub fn assemble_hankel_corner(sym: &MatrixSymbol, window: &LatticeWindow) -> Result<BandedBlockMatrix> {
    check_window(sym, window, WindowKind::TwoSided)?;
    let m = sym.cutoff();
    let nb = sym.block_size();
    let mut out = BandedBlockMatrix::zeros(*window, 0);
    if m == 0 {
        return Ok(out);
    }
    let first_site = window.site(-(m as i64)).unwrap();
    let sites = 2 * m;
    let n = sites * nb;
    let mut data = vec![ZERO; n * n];
    for a in 0..sites {
        for b in 0..sites {
            let i = a as i64 - m as i64;
            let j = b as i64 - m as i64;
            if (i >= 0) != (j >= 0) {
                let c = sym.coeff(i - j);
                for r in 0..nb {
                    for col in 0..nb {
                        data[(a * nb + r) * n + b * nb + col] = c[(r, col)];
                    }
                }
            }
        }
    }
    out.add_patch(Patch {
        first_site,
        sites,
        data,
    });
    Ok(out)
}


#[cfg(test)]
mod compiled_tests {
    use super::*;
    use crate::linalg::StartVectors;
    use crate::symbol::catalog;

    #[test]
    fn compiled_matches_blocked() {
        let w = LatticeWindow::two_sided(20, 2);
        let mut h = assemble_laurent(&catalog::off_diagonal(2.0, 1.0), &w).unwrap();
        let mut d = CMat::zeros(6, 6);
        d[(0, 5)] = C64::new(0.3, 0.1);
        d[(5, 0)] = C64::new(0.3, -0.1);
        h.add_patch(Patch { first_site: 18, sites: 3, data: d.transpose().iter().copied().collect() });
        let x = StartVectors::new(4).vector(h.dim());
        let a = h.apply(&x);
        let b = h.compile().apply(&x);
        let err = a.iter().zip(&b).map(|(u, v)| (u - v).norm()).fold(0.0, f64::max);
        assert!(err < 1e-14);
        let real = assemble_laurent(&catalog::scalar_cos(), &LatticeWindow::two_sided(8, 1)).unwrap();
        let x = StartVectors::new(5).vector(16);
        let err = real.apply(&x).iter().zip(&real.compile().apply(&x)).map(|(u, v)| (u - v).norm()).fold(0.0, f64::max);
        assert!(err < 1e-15);
    }
}

use super::matrix::{BandedBlockMatrix, Patch};
use super::LatticeWindow;
use crate::linalg::{hermitian_defect, spectral_norm, CMat};
use crate::{Error, Result, C64};
use std::collections::BTreeMap;

/// Largest dense patch dimension we are willing to assemble.
const MAX_PATCH_DIM: usize = 8192;

/// Site profile `psi_n` of a rank-one perturbation.
#[derive(Debug, Clone, PartialEq)]
pub enum VectorProfile {
    /// Explicit block vectors at listed positions.
    Explicit(Vec<(i64, Vec<C64>)>),
    /// `amplitude * e^{-rate |n|}` along the direction.
    Exponential { amplitude: f64, rate: f64 },
    /// `amplitude * (1 + |n|)^{-exponent}` along the direction.
    Power { amplitude: f64, exponent: f64 },
}

#[derive(Debug, Clone, PartialEq)]
pub enum PerturbationKind {
    /// Explicit blocks `(i, j, V_ij)`; missing transposes are filled by symmetry.
    Entries(Vec<(i64, i64, CMat)>),
    /// Explicit blocks confined to `|i|, |j| <= size`.
    Box { size: usize, entries: Vec<(i64, i64, CMat)> },
    /// `||V_ij|| = c e^{-kappa (|i| + |j|)}`.
    Exponential { c: f64, kappa: f64 },
    /// `||V_ij|| = c (1 + |i| + |j|)^{-1-s}`.
    Power { c: f64, s: f64 },
    /// `||V_ij|| = c (1 + |i|)^{-sigma} (1 + |j|)^{-sigma}`.
    Separable { c: f64, sigma: f64 },
    /// `||V_ij|| = c (1 + |i - j|)^{-p}`: bounded, not compact.
    ToeplitzDecay { c: f64, p: f64 },
    /// `V = c` times the pattern on every site.
    Diagonal { c: f64 },
    /// `V = strength <., psi> psi`.
    RankOne {
        strength: f64,
        profile: VectorProfile,
        direction: Option<Vec<C64>>,
    },
}

/// Extent of the nonzero entries of a perturbation.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Support {
    /// Entries vanish (or drop below `1e-17` relative) for `|i|` or `|j|` above the radius.
    Radius(usize),
    Unbounded,
}

/// A Hermitian perturbation of the lattice operator.
#[derive(Debug, Clone, PartialEq)]
pub struct PerturbationSpec {
    kind: PerturbationKind,
    half_line: bool,
    block_size: usize,
    pattern: CMat,
    direction: Vec<C64>,
    table: BTreeMap<(i64, i64), CMat>,
}

fn positive(name: &str, v: f64) -> Result<()> {
    if v.is_finite() && v > 0.0 {
        Ok(())
    } else {
        Err(Error::InvalidPerturbation(format!("{name} must be positive, got {v}")))
    }
}

impl PerturbationSpec {
    pub fn new(kind: PerturbationKind, half_line: bool, block_size: usize) -> Result<Self> {
        if block_size == 0 {
            return Err(Error::InvalidPerturbation("block size must be positive".into()));
        }
        let mut pattern = CMat::zeros(block_size, block_size);
        pattern[(0, 0)] = C64::new(1.0, 0.0);
        let mut direction = vec![C64::new(0.0, 0.0); block_size];
        direction[0] = C64::new(1.0, 0.0);
        let mut table = BTreeMap::new();
        match &kind {
            PerturbationKind::Entries(list) => table = symmetric_table(list, block_size)?,
            PerturbationKind::Box { size, entries } => {
                let s = *size as i64;
                if let Some((i, j, _)) = entries.iter().find(|(i, j, _)| i.abs() > s || j.abs() > s) {
                    return Err(Error::InvalidPerturbation(format!(
                        "box entry ({i}, {j}) lies outside |i|, |j| <= {size}"
                    )));
                }
                table = symmetric_table(entries, block_size)?;
            }
            PerturbationKind::Exponential { c, kappa } => {
                positive("C", *c)?;
                positive("kappa", *kappa)?;
            }
            PerturbationKind::Power { c, s } => {
                positive("C", *c)?;
                positive("s", *s)?;
            }
            PerturbationKind::Separable { c, sigma } => {
                positive("C", *c)?;
                positive("sigma", *sigma)?;
            }
            PerturbationKind::ToeplitzDecay { c, p } => {
                positive("C", *c)?;
                positive("p", *p)?;
            }
            PerturbationKind::Diagonal { c } => {
                if !c.is_finite() {
                    return Err(Error::InvalidPerturbation("C must be finite".into()));
                }
            }
            PerturbationKind::RankOne {
                strength,
                profile,
                direction: dir,
            } => {
                if !strength.is_finite() {
                    return Err(Error::InvalidPerturbation("strength must be finite".into()));
                }
                match profile {
                    VectorProfile::Explicit(list) => {
                        if list.iter().any(|(_, v)| v.len() != block_size) {
                            return Err(Error::InvalidPerturbation("profile vector has wrong length".into()));
                        }
                    }
                    VectorProfile::Exponential { amplitude, rate } => {
                        positive("rate", *rate)?;
                        if !amplitude.is_finite() {
                            return Err(Error::InvalidPerturbation("amplitude must be finite".into()));
                        }
                    }
                    VectorProfile::Power { amplitude, exponent } => {
                        positive("exponent", *exponent)?;
                        if !amplitude.is_finite() {
                            return Err(Error::InvalidPerturbation("amplitude must be finite".into()));
                        }
                    }
                }
                if let Some(d) = dir {
                    if d.len() != block_size {
                        return Err(Error::InvalidPerturbation("direction has wrong length".into()));
                    }
                    let n = crate::linalg::norm(d);
                    if n == 0.0 || !n.is_finite() {
                        return Err(Error::InvalidPerturbation("direction must be nonzero".into()));
                    }
                    direction = d.iter().map(|x| x / n).collect();
                }
            }
        }
        Ok(PerturbationSpec {
            kind,
            half_line,
            block_size,
            pattern,
            direction,
            table,
        })
    }

    /// Replace the unit-norm Hermitian block pattern of generator families.
    pub fn with_pattern(mut self, pattern: CMat) -> Result<Self> {
        if pattern.nrows() != self.block_size || pattern.ncols() != self.block_size {
            return Err(Error::InvalidPerturbation("pattern has wrong shape".into()));
        }
        if hermitian_defect(&pattern) > 1e-12 * pattern.norm().max(1.0) {
            return Err(Error::InvalidPerturbation("pattern is not Hermitian".into()));
        }
        let n = spectral_norm(&pattern);
        if n == 0.0 {
            return Err(Error::InvalidPerturbation("pattern is zero".into()));
        }
        self.pattern = pattern / C64::new(n, 0.0);
        Ok(self)
    }

    pub fn kind(&self) -> &PerturbationKind {
        &self.kind
    }

    pub fn half_line(&self) -> bool {
        self.half_line
    }

    pub fn block_size(&self) -> usize {
        self.block_size
    }

    /// Scalar profile value of a rank-one perturbation at site `n` (before the half-line mask).
    fn profile_value(&self, n: i64) -> Option<Vec<C64>> {
        if let PerturbationKind::RankOne { profile, .. } = &self.kind {
            let a = match profile {
                VectorProfile::Explicit(list) => {
                    return Some(
                        list.iter()
                            .find(|(m, _)| *m == n)
                            .map(|(_, v)| v.clone())
                            .unwrap_or_else(|| vec![C64::new(0.0, 0.0); self.block_size]),
                    )
                }
                VectorProfile::Exponential { amplitude, rate } => amplitude * (-rate * n.abs() as f64).exp(),
                VectorProfile::Power { amplitude, exponent } => amplitude * (1.0 + n.abs() as f64).powf(-exponent),
            };
            Some(self.direction.iter().map(|d| d * a).collect())
        } else {
            None
        }
    }

    /// `psi_n` of a rank-one perturbation (zero at negative sites on the half-line).
    pub fn psi(&self, n: i64) -> Option<Vec<C64>> {
        let v = self.profile_value(n)?;
        if self.half_line && n < 0 {
            Some(vec![C64::new(0.0, 0.0); self.block_size])
        } else {
            Some(v)
        }
    }

    fn masked(&self, i: i64, j: i64) -> bool {
        self.half_line && (i < 0 || j < 0)
    }

    /// Scalar envelope `m(i, j)` with `V_ij = m(i, j) * pattern` for generator families.
    pub fn envelope(&self, i: i64, j: i64) -> Option<f64> {
        if self.masked(i, j) {
            return Some(0.0);
        }
        let (ai, aj) = (i.unsigned_abs() as f64, j.unsigned_abs() as f64);
        match self.kind {
            PerturbationKind::Exponential { c, kappa } => Some(c * (-kappa * (ai + aj)).exp()),
            PerturbationKind::Power { c, s } => Some(c * (1.0 + ai + aj).powf(-1.0 - s)),
            PerturbationKind::Separable { c, sigma } => Some(c * ((1.0 + ai) * (1.0 + aj)).powf(-sigma)),
            PerturbationKind::ToeplitzDecay { c, p } => Some(c * (1.0 + (i - j).unsigned_abs() as f64).powf(-p)),
            PerturbationKind::Diagonal { c } => Some(if i == j { c } else { 0.0 }),
            _ => None,
        }
    }

    /// Block `V_ij` at lattice positions `i`, `j`.
    pub fn block(&self, i: i64, j: i64) -> CMat {
        let nb = self.block_size;
        if self.masked(i, j) {
            return CMat::zeros(nb, nb);
        }
        if let Some(m) = self.envelope(i, j) {
            return &self.pattern * C64::new(m, 0.0);
        }
        match &self.kind {
            PerturbationKind::Entries(_) | PerturbationKind::Box { .. } => {
                self.table.get(&(i, j)).cloned().unwrap_or_else(|| CMat::zeros(nb, nb))
            }
            PerturbationKind::RankOne { strength, .. } => {
                let pi = self.psi(i).unwrap();
                let pj = self.psi(j).unwrap();
                CMat::from_fn(nb, nb, |r, c| pi[r] * pj[c].conj() * *strength)
            }
            _ => unreachable!("generator handled by envelope"),
        }
    }

    /// `||V_ij||` (spectral norm).
    pub fn magnitude(&self, i: i64, j: i64) -> f64 {
        if let Some(m) = self.envelope(i, j) {
            return m.abs();
        }
        match &self.kind {
            PerturbationKind::RankOne { strength, .. } => {
                let pi = self.psi(i).unwrap();
                let pj = self.psi(j).unwrap();
                strength.abs() * crate::linalg::norm(&pi) * crate::linalg::norm(&pj)
            }
            _ => spectral_norm(&self.block(i, j)),
        }
    }

    /// Explicit blocks after symmetric completion.
    pub fn explicit_entries(&self) -> Vec<(i64, i64, CMat)> {
        self.table
            .iter()
            .filter(|((i, j), _)| !self.masked(*i, *j))
            .map(|((i, j), b)| (*i, *j, b.clone()))
            .collect()
    }

    pub fn support(&self) -> Support {
        const DROP: f64 = 39.2; // ln(1e17)
        match &self.kind {
            PerturbationKind::Entries(_) | PerturbationKind::Box { .. } => Support::Radius(
                self.table
                    .keys()
                    .map(|(i, j)| i.unsigned_abs().max(j.unsigned_abs()) as usize)
                    .max()
                    .unwrap_or(0),
            ),
            PerturbationKind::Exponential { kappa, .. } => Support::Radius((DROP / kappa).ceil() as usize),
            PerturbationKind::RankOne { profile, .. } => match profile {
                VectorProfile::Explicit(list) => {
                    Support::Radius(list.iter().map(|(n, _)| n.unsigned_abs() as usize).max().unwrap_or(0))
                }
                // V_i0 = psi_i psi_0 decays like e^{-rate |i|}
                VectorProfile::Exponential { rate, .. } => Support::Radius((DROP / rate).ceil() as usize + 1),
                VectorProfile::Power { .. } => Support::Unbounded,
            },
            _ => Support::Unbounded,
        }
    }
}

fn symmetric_table(list: &[(i64, i64, CMat)], nb: usize) -> Result<BTreeMap<(i64, i64), CMat>> {
    let mut table: BTreeMap<(i64, i64), CMat> = BTreeMap::new();
    for (i, j, b) in list {
        if b.nrows() != nb || b.ncols() != nb {
            return Err(Error::InvalidPerturbation(format!("entry ({i}, {j}) has wrong shape")));
        }
        if table.insert((*i, *j), b.clone()).is_some() {
            return Err(Error::InvalidPerturbation(format!("entry ({i}, {j}) given twice")));
        }
    }
    let keys: Vec<(i64, i64)> = table.keys().copied().collect();
    for (i, j) in keys {
        let b = table[&(i, j)].clone();
        let tol = 1e-12 * b.norm().max(1.0);
        match table.get(&(j, i)) {
            Some(t) => {
                if (t - b.adjoint()).norm() > tol {
                    return Err(Error::InvalidPerturbation(format!(
                        "entries ({i}, {j}) and ({j}, {i}) are not adjoint"
                    )));
                }
            }
            None => {
                table.insert((j, i), b.adjoint());
            }
        }
    }
    Ok(table)
}

/// Assemble `V` on the window as a dense patch over its support.
pub fn assemble_perturbation(spec: &PerturbationSpec, window: &LatticeWindow) -> Result<BandedBlockMatrix> {
    let nb = spec.block_size;
    if window.block_size != nb {
        return Err(Error::DimensionMismatch {
            expected: window.block_size,
            got: nb,
        });
    }
    if let PerturbationKind::Diagonal { .. } = spec.kind {
        let mut out = BandedBlockMatrix::zeros(*window, 0);
        for site in 0..window.sites() {
            let n = window.position(site);
            out.set_band_block(site, 0, &spec.block(n, n));
        }
        return Ok(out);
    }
    let first = window.first();
    let last = first + window.sites() as i64 - 1;
    let (mut lo, hi) = match spec.support() {
        Support::Radius(r) => ((-(r as i64)).max(first), (r as i64).min(last)),
        Support::Unbounded => (first, last),
    };
    if spec.half_line {
        lo = lo.max(0);
    }
    let mut out = BandedBlockMatrix::zeros(*window, 0);
    if hi < lo {
        return Ok(out);
    }
    let sites = (hi - lo + 1) as usize;
    let n = sites * nb;
    if n > MAX_PATCH_DIM {
        return Err(Error::precondition(format!(
            "perturbation support needs a dense patch of dimension {n} (limit {MAX_PATCH_DIM})"
        )));
    }
    let mut data = vec![C64::new(0.0, 0.0); n * n];
    for a in 0..sites {
        for b in 0..sites {
            let blk = spec.block(lo + a as i64, lo + b as i64);
            for r in 0..nb {
                for c in 0..nb {
                    data[(a * nb + r) * n + b * nb + c] = blk[(r, c)];
                }
            }
        }
    }
    out.add_patch(Patch {
        first_site: window.site(lo).unwrap(),
        sites,
        data,
    });
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn rank_one_unit_vector() {
        let spec = PerturbationSpec::new(
            PerturbationKind::RankOne {
                strength: 1.0,
                profile: VectorProfile::Explicit(vec![(0, vec![C64::new(1.0, 0.0)])]),
                direction: None,
            },
            false,
            1,
        )
        .unwrap();
        let w = LatticeWindow::two_sided(8, 1);
        let v = assemble_perturbation(&spec, &w).unwrap().to_dense();
        for i in 0..16 {
            for j in 0..16 {
                let want = if i == 8 && j == 8 { 1.0 } else { 0.0 };
                assert_eq!(v[(i, j)], C64::new(want, 0.0));
            }
        }
    }

    #[test]
    fn exponential_generator_entry() {
        let spec = PerturbationSpec::new(PerturbationKind::Exponential { c: 1.0, kappa: 1.0 }, false, 1).unwrap();
        assert!((spec.magnitude(3, 2) - (-5.0f64).exp()).abs() < 1e-16);
        let w = LatticeWindow::two_sided(64, 1);
        let v = assemble_perturbation(&spec, &w).unwrap();
        assert!((v.block(3, 2)[(0, 0)].re - (-5.0f64).exp()).abs() < 1e-16);
    }

    #[test]
    fn box_on_half_line_vanishes_left() {
        let one = CMat::from_element(1, 1, C64::new(1.0, 0.0));
        let entries = vec![(-1, 1, one.clone()), (0, 0, one.clone()), (2, -2, one.clone())];
        let spec = PerturbationSpec::new(PerturbationKind::Box { size: 2, entries }, true, 1).unwrap();
        let w = LatticeWindow::two_sided(8, 1);
        let v = assemble_perturbation(&spec, &w).unwrap();
        for i in -8..0 {
            for j in -8..8 {
                assert_eq!(v.block(i, j)[(0, 0)].norm(), 0.0);
            }
        }
        assert_eq!(v.block(0, 0)[(0, 0)], C64::new(1.0, 0.0));
    }

    #[test]
    fn asymmetric_entries_rejected() {
        let a = CMat::from_element(1, 1, C64::new(1.0, 0.0));
        let b = CMat::from_element(1, 1, C64::new(2.0, 0.0));
        let r = PerturbationSpec::new(PerturbationKind::Entries(vec![(0, 1, a), (1, 0, b)]), false, 1);
        assert!(matches!(r, Err(Error::InvalidPerturbation(_))));
    }
}

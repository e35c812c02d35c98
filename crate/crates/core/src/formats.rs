//! Text formats read and written by the command-line front end.
//!
//! Symbols and perturbations are TOML documents; complex numbers are
//! `[re, im]` pairs and blocks are row-major lists of pairs. Vectors are
//! plain records `i re im re im ...`, one lattice site per line.
//!
//! ```toml
//! # symbol
//! block_size = 2
//! [[coeff]]
//! j = 0
//! entries = [[0, 0], [1, 0], [1, 0], [0, 0]]
//! [[coeff]]
//! j = 1
//! entries = [[0, 0], [2, 0], [0, 0], [0, 0]]
//! ```
//!
//! ```toml
//! # perturbation
//! kind = "rank-one"
//! strength = 0.3
//! profile = { kind = "exponential", amplitude = 1.0, rate = 1.0 }
//! ```

use crate::lattice::{LatticeWindow, PerturbationKind, PerturbationSpec, VectorProfile};
use crate::linalg::CMat;
use crate::symbol::{catalog, MatrixSymbol};
use crate::{Error, Result, C64};
use serde::Deserialize;
use std::fmt::Write as _;

type Pair = [f64; 2];

fn block(n: usize, entries: &[Pair], what: &str) -> Result<CMat> {
    if entries.len() != n * n {
        return Err(Error::Parse {
            line: 0,
            message: format!("{what}: expected {} entries, got {}", n * n, entries.len()),
        });
    }
    Ok(CMat::from_row_iterator(n, n, entries.iter().map(|p| C64::new(p[0], p[1]))))
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct CoeffDoc {
    j: i64,
    entries: Vec<Pair>,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields, tag = "name", rename_all = "kebab-case")]
enum PresetDoc {
    ScalarCos,
    OffDiagonal { a: f64, b: f64 },
    FlatPair,
    DiagCosFlat,
    PeriodicJacobi { a: Vec<f64>, b: Vec<f64> },
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct SymbolDoc {
    block_size: Option<usize>,
    cutoff: Option<usize>,
    #[serde(default)]
    coeff: Vec<CoeffDoc>,
    preset: Option<PresetDoc>,
}

/// Parse a symbol document.
pub fn parse_symbol(text: &str) -> Result<MatrixSymbol> {
    let doc: SymbolDoc = toml::from_str(text)?;
    if let Some(p) = doc.preset {
        if !doc.coeff.is_empty() || doc.block_size.is_some() {
            return Err(Error::InvalidSymbol("preset excludes explicit coefficients".into()));
        }
        return Ok(match p {
            PresetDoc::ScalarCos => catalog::scalar_cos(),
            PresetDoc::OffDiagonal { a, b } => {
                if !(a.is_finite() && b.is_finite()) {
                    return Err(Error::InvalidSymbol("hopping amplitudes must be finite".into()));
                }
                catalog::off_diagonal(a, b)
            }
            PresetDoc::FlatPair => catalog::flat_pair(),
            PresetDoc::DiagCosFlat => catalog::diag_cos_flat(),
            PresetDoc::PeriodicJacobi { a, b } => {
                if b.len() < 2 || a.len() != b.len() || a.iter().chain(&b).any(|v| !v.is_finite()) {
                    return Err(Error::InvalidSymbol("periodic Jacobi needs N >= 2 finite a and b".into()));
                }
                catalog::periodic_jacobi(&a, &b)
            }
        });
    }
    let n = doc
        .block_size
        .ok_or_else(|| Error::InvalidSymbol("missing block_size".into()))?;
    if n == 0 || n > 64 {
        return Err(Error::InvalidSymbol(format!("block size {n} outside 1..=64")));
    }
    if doc.coeff.is_empty() {
        return Err(Error::InvalidSymbol("no coefficients".into()));
    }
    let mut entries = Vec::with_capacity(doc.coeff.len());
    for c in &doc.coeff {
        if c.j.unsigned_abs() > 4096 {
            return Err(Error::InvalidSymbol(format!("coefficient index {} too large", c.j)));
        }
        entries.push((c.j, block(n, &c.entries, &format!("coeff({})", c.j))?));
    }
    let sym = MatrixSymbol::from_signed(n, &entries)?;
    if let Some(m) = doc.cutoff {
        if sym.cutoff() > m {
            return Err(Error::InvalidSymbol(format!(
                "coefficient index {} exceeds the declared cutoff {m}",
                sym.cutoff()
            )));
        }
    }
    Ok(sym)
}

/// Write a symbol in the format read by [`parse_symbol`].
pub fn write_symbol(sym: &MatrixSymbol) -> String {
    let n = sym.block_size();
    let mut out = format!("block_size = {n}\ncutoff = {}\n", sym.cutoff());
    for j in 0..=sym.cutoff() {
        let c = sym.coeff(j as i64);
        let _ = writeln!(out, "\n[[coeff]]\nj = {j}\nentries = [{}]", pairs(c.transpose().iter()));
    }
    out
}

fn pairs<'a>(it: impl Iterator<Item = &'a C64>) -> String {
    it.map(|z| format!("[{:?}, {:?}]", z.re, z.im)).collect::<Vec<_>>().join(", ")
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct EntryDoc {
    i: i64,
    j: i64,
    block: Vec<Pair>,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct PsiDoc {
    n: i64,
    v: Vec<Pair>,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields, tag = "kind", rename_all = "kebab-case")]
enum ProfileDoc {
    Exponential { amplitude: f64, rate: f64 },
    Power { amplitude: f64, exponent: f64 },
    Explicit { psi: Vec<PsiDoc> },
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields, tag = "kind", rename_all = "kebab-case")]
enum KindDoc {
    Entries {
        entry: Vec<EntryDoc>,
    },
    Box {
        size: usize,
        entry: Vec<EntryDoc>,
    },
    Exponential {
        c: f64,
        kappa: f64,
    },
    Power {
        c: f64,
        s: f64,
    },
    Separable {
        c: f64,
        sigma: f64,
    },
    ToeplitzDecay {
        c: f64,
        p: f64,
    },
    Diagonal {
        c: f64,
    },
    RankOne {
        strength: f64,
        profile: ProfileDoc,
        direction: Option<Vec<Pair>>,
    },
}

#[derive(Debug, Deserialize)]
struct PerturbationDoc {
    #[serde(default)]
    half_line: bool,
    block_size: Option<usize>,
    pattern: Option<Vec<Pair>>,
    #[serde(flatten)]
    kind: KindDoc,
}

fn entry_list(n: usize, list: &[EntryDoc]) -> Result<Vec<(i64, i64, CMat)>> {
    list.iter()
        .map(|e| Ok((e.i, e.j, block(n, &e.block, &format!("entry ({}, {})", e.i, e.j))?)))
        .collect()
}

fn complex_vec(v: &[Pair]) -> Vec<C64> {
    v.iter().map(|p| C64::new(p[0], p[1])).collect()
}

/// Parse a perturbation document. `block_size` is the symbol's block size;
/// a `block_size` key in the document must agree with it.
pub fn parse_perturbation(text: &str, block_size: usize) -> Result<PerturbationSpec> {
    let doc: PerturbationDoc = toml::from_str(text)?;
    if let Some(b) = doc.block_size {
        if b != block_size {
            return Err(Error::InvalidPerturbation(format!(
                "block size {b} does not match the symbol's {block_size}"
            )));
        }
    }
    let n = block_size;
    let kind = match doc.kind {
        KindDoc::Entries { entry } => PerturbationKind::Entries(entry_list(n, &entry)?),
        KindDoc::Box { size, entry } => PerturbationKind::Box {
            size,
            entries: entry_list(n, &entry)?,
        },
        KindDoc::Exponential { c, kappa } => PerturbationKind::Exponential { c, kappa },
        KindDoc::Power { c, s } => PerturbationKind::Power { c, s },
        KindDoc::Separable { c, sigma } => PerturbationKind::Separable { c, sigma },
        KindDoc::ToeplitzDecay { c, p } => PerturbationKind::ToeplitzDecay { c, p },
        KindDoc::Diagonal { c } => PerturbationKind::Diagonal { c },
        KindDoc::RankOne {
            strength,
            profile,
            direction,
        } => PerturbationKind::RankOne {
            strength,
            profile: match profile {
                ProfileDoc::Exponential { amplitude, rate } => VectorProfile::Exponential { amplitude, rate },
                ProfileDoc::Power { amplitude, exponent } => VectorProfile::Power { amplitude, exponent },
                ProfileDoc::Explicit { psi } => VectorProfile::Explicit(psi.iter().map(|p| (p.n, complex_vec(&p.v))).collect()),
            },
            direction: direction.as_deref().map(complex_vec),
        },
    };
    let spec = PerturbationSpec::new(kind, doc.half_line, n)?;
    match doc.pattern {
        Some(p) => spec.with_pattern(block(n, &p, "pattern")?),
        None => Ok(spec),
    }
}

/// Parse vector records `i re im re im ...` (one site per line, `#` comments).
pub fn parse_vector(text: &str, block_size: usize) -> Result<Vec<(i64, Vec<C64>)>> {
    let mut out: Vec<(i64, Vec<C64>)> = Vec::new();
    for (k, raw) in text.lines().enumerate() {
        let line = raw.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        let err = |message: String| Error::Parse { line: k + 1, message };
        let mut fields = line.split_whitespace();
        let site: i64 = fields
            .next()
            .and_then(|f| f.parse().ok())
            .ok_or_else(|| err("expected an integer site index".into()))?;
        let nums: Vec<f64> = fields
            .map(|f| f.parse::<f64>().map_err(|_| err(format!("bad number {f:?}"))))
            .collect::<Result<_>>()?;
        if nums.len() != 2 * block_size {
            return Err(err(format!("expected {} numbers, got {}", 2 * block_size, nums.len())));
        }
        if nums.iter().any(|v| !v.is_finite()) {
            return Err(err("non-finite value".into()));
        }
        if out.iter().any(|(s, _)| *s == site) {
            return Err(err(format!("site {site} listed twice")));
        }
        out.push((site, nums.chunks(2).map(|p| C64::new(p[0], p[1])).collect()));
    }
    Ok(out)
}

/// Place parsed records on a window; sites outside it are an error.
pub fn vector_on_window(records: &[(i64, Vec<C64>)], window: &LatticeWindow) -> Result<Vec<C64>> {
    let nb = window.block_size;
    let mut x = vec![C64::new(0.0, 0.0); window.dim()];
    for (n, v) in records {
        let s = window
            .site(*n)
            .ok_or_else(|| Error::precondition(format!("site {n} lies outside the window")))?;
        x[s * nb..(s + 1) * nb].copy_from_slice(v);
    }
    Ok(x)
}

/// Vector records for the nonzero sites of a window vector.
pub fn write_vector(x: &[C64], window: &LatticeWindow) -> String {
    let nb = window.block_size;
    let mut out = String::new();
    for (site, blk) in x.chunks(nb).enumerate() {
        if blk.iter().all(|z| z.re == 0.0 && z.im == 0.0) {
            continue;
        }
        let _ = write!(out, "{}", window.position(site));
        for z in blk {
            let _ = write!(out, " {:e} {:e}", z.re, z.im);
        }
        out.push('\n');
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn symbol_round_trip() {
        let sym = catalog::off_diagonal(2.0, 1.0);
        let back = parse_symbol(&write_symbol(&sym)).unwrap();
        assert_eq!(back, sym);
    }

    #[test]
    fn preset_symbol() {
        let s = parse_symbol("[preset]\nname = \"off-diagonal\"\na = 2.0\nb = 1.0\n").unwrap();
        assert_eq!(s, catalog::off_diagonal(2.0, 1.0));
    }

    #[test]
    fn vector_records() {
        let w = LatticeWindow::two_sided(3, 2);
        let mut x = vec![C64::new(0.0, 0.0); w.dim()];
        x[2] = C64::new(1.5, -0.25);
        x[9] = C64::new(0.0, 3.0);
        let text = write_vector(&x, &w);
        let back = vector_on_window(&parse_vector(&text, 2).unwrap(), &w).unwrap();
        assert_eq!(back, x);
    }
}

//! A symbol, an optional perturbation and a window kind: everything needed to
//! assemble finite sections at any size.

use crate::lattice::{
    assemble_laurent, assemble_perturbation, assemble_toeplitz, BandedBlockMatrix, LatticeWindow, PerturbationSpec,
    WindowKind,
};
use crate::symbol::MatrixSymbol;
use crate::Result;

#[derive(Debug, Clone)]
pub struct LatticeModel {
    pub symbol: MatrixSymbol,
    pub perturbation: Option<PerturbationSpec>,
    pub kind: WindowKind,
}

impl LatticeModel {
    pub fn laurent(symbol: MatrixSymbol) -> Self {
        LatticeModel {
            symbol,
            perturbation: None,
            kind: WindowKind::TwoSided,
        }
    }

    pub fn toeplitz(symbol: MatrixSymbol) -> Self {
        LatticeModel {
            symbol,
            perturbation: None,
            kind: WindowKind::OneSided,
        }
    }

    pub fn with_perturbation(mut self, v: PerturbationSpec) -> Self {
        self.perturbation = Some(v);
        self
    }

    pub fn window(&self, half_length: usize) -> LatticeWindow {
        LatticeWindow::new(self.kind, half_length, self.symbol.block_size())
    }

    /// Unperturbed section at half-length `L`.
    pub fn assemble_free(&self, half_length: usize) -> Result<BandedBlockMatrix> {
        let w = self.window(half_length);
        match self.kind {
            WindowKind::TwoSided => assemble_laurent(&self.symbol, &w),
            WindowKind::OneSided => assemble_toeplitz(&self.symbol, &w),
        }
    }

    /// Section of the full operator at half-length `L`.
    pub fn assemble(&self, half_length: usize) -> Result<BandedBlockMatrix> {
        let h0 = self.assemble_free(half_length)?;
        match &self.perturbation {
            None => Ok(h0),
            Some(v) => h0.add(&assemble_perturbation(v, &self.window(half_length))?),
        }
    }
}

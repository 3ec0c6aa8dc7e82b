//! Rolling second-moment matrix and its eigenvalue spectrum.
//!
//! The tracked matrix is `(1/m) Σ X_k X_k'` over the last `m` observations,
//! with no mean removal; centering belongs to the panel.

use std::io::Write;

use nalgebra::{DMatrix, DVector, DVectorView};

use crate::error::{invalid, Error, Result};

/// Circular store of the last `m` observation vectors.
#[derive(Debug, Clone)]
pub struct RollingWindow {
    buffer: DMatrix<f64>,
    head: usize,
    len: usize,
    t: usize,
}

impl RollingWindow {
    pub fn new(n: usize, m: usize) -> Result<Self> {
        if n == 0 || m == 0 {
            return Err(invalid(format!("window needs N ≥ 1 and m ≥ 1, got N = {n}, m = {m}")));
        }
        Ok(Self { buffer: DMatrix::zeros(n, m), head: 0, len: 0, t: 0 })
    }

    pub fn dim(&self) -> usize {
        self.buffer.nrows()
    }

    pub fn capacity(&self) -> usize {
        self.buffer.ncols()
    }

    pub fn len(&self) -> usize {
        self.len
    }

    pub fn is_empty(&self) -> bool {
        self.len == 0
    }

    pub fn is_full(&self) -> bool {
        self.len == self.capacity()
    }

    /// Number of observations pushed so far.
    pub fn time(&self) -> usize {
        self.t
    }

    /// Appends `x`; once full, returns the evicted observation from `m` steps ago.
    pub fn push(&mut self, x: DVectorView<'_, f64>) -> Result<Option<DVector<f64>>> {
        if x.len() != self.dim() {
            return Err(Error::DimensionMismatch { expected: self.dim(), actual: x.len() });
        }
        let slot = self.head;
        let evicted = self.is_full().then(|| self.buffer.column(slot).into_owned());
        self.buffer.set_column(slot, &x);
        self.head = (self.head + 1) % self.capacity();
        self.len = (self.len + 1).min(self.capacity());
        self.t += 1;
        Ok(evicted)
    }

    /// Stored observations, oldest first.
    pub fn iter(&self) -> impl Iterator<Item = DVectorView<'_, f64>> + '_ {
        let cap = self.capacity();
        let start = if self.is_full() { self.head } else { 0 };
        (0..self.len).map(move |i| self.buffer.column((start + i) % cap))
    }

    pub fn clear(&mut self) {
        self.head = 0;
        self.len = 0;
        self.t = 0;
    }
}

/// Symmetric N×N second-moment matrix of a full window.
#[derive(Debug, Clone, PartialEq)]
pub struct CovarianceMatrix {
    pub values: DMatrix<f64>,
    pub m: usize,
    pub t: usize,
}

impl CovarianceMatrix {
    pub fn dim(&self) -> usize {
        self.values.nrows()
    }

    pub fn trace(&self) -> f64 {
        self.values.trace()
    }

    /// In-place add/drop of one observation.
    pub fn update(
        &mut self,
        incoming: DVectorView<'_, f64>,
        outgoing: DVectorView<'_, f64>,
    ) -> Result<()> {
        let n = self.dim();
        for v in [&incoming, &outgoing] {
            if v.len() != n {
                return Err(Error::DimensionMismatch { expected: n, actual: v.len() });
            }
        }
        let w = 1.0 / self.m as f64;
        self.values.ger(w, &incoming, &incoming, 1.0);
        self.values.ger(-w, &outgoing, &outgoing, 1.0);
        self.t += 1;
        Ok(())
    }

    /// The matrix of the window shifted by one step.
    pub fn shifted(
        &self,
        incoming: DVectorView<'_, f64>,
        outgoing: DVectorView<'_, f64>,
    ) -> Result<Self> {
        let mut next = self.clone();
        next.update(incoming, outgoing)?;
        Ok(next)
    }

    /// Averages the matrix with its transpose.
    pub fn symmetrize(&mut self) {
        let t = self.values.transpose();
        self.values += t;
        self.values *= 0.5;
    }
}

/// Batch evaluation of `(1/m) Σ X_k X_k'` over a full window.
pub fn rolling_covariance(window: &RollingWindow) -> Result<CovarianceMatrix> {
    if !window.is_full() {
        return Err(Error::WindowNotFull { have: window.len(), need: window.capacity() });
    }
    let m = window.capacity();
    let n = window.dim();
    let mut values = DMatrix::zeros(n, n);
    for x in window.iter() {
        values.ger(1.0, &x, &x, 1.0);
    }
    values /= m as f64;
    Ok(CovarianceMatrix { values, m, t: window.time() })
}

/// Window plus incrementally maintained second-moment matrix.
///
/// The matrix is rebuilt from the buffer every `rebuild_every` updates so
/// rounding error cannot accumulate over long streams.
#[derive(Debug, Clone)]
pub struct RollingCovariance {
    window: RollingWindow,
    cov: Option<CovarianceMatrix>,
    since_rebuild: usize,
    rebuild_every: usize,
}

impl RollingCovariance {
    pub const DEFAULT_REBUILD_EVERY: usize = 1024;

    pub fn new(n: usize, m: usize) -> Result<Self> {
        Ok(Self {
            window: RollingWindow::new(n, m)?,
            cov: None,
            since_rebuild: 0,
            rebuild_every: Self::DEFAULT_REBUILD_EVERY,
        })
    }

    pub fn with_rebuild_every(mut self, every: usize) -> Self {
        self.rebuild_every = every.max(1);
        self
    }

    pub fn window(&self) -> &RollingWindow {
        &self.window
    }

    /// Current matrix, available once the window has filled.
    pub fn current(&self) -> Option<&CovarianceMatrix> {
        self.cov.as_ref()
    }

    pub fn push(&mut self, x: DVectorView<'_, f64>) -> Result<Option<&CovarianceMatrix>> {
        let evicted = self.window.push(x)?;
        match (&mut self.cov, evicted) {
            (Some(cov), Some(old)) if self.since_rebuild + 1 < self.rebuild_every => {
                cov.update(x, old.as_view())?;
                self.since_rebuild += 1;
            }
            _ if self.window.is_full() => {
                self.cov = Some(rolling_covariance(&self.window)?);
                self.since_rebuild = 0;
            }
            _ => {}
        }
        Ok(self.cov.as_ref())
    }

    pub fn reset(&mut self) {
        self.window.clear();
        self.cov = None;
        self.since_rebuild = 0;
    }
}

/// Eigenvalues of a second-moment matrix, sorted in non-increasing order.
#[derive(Debug, Clone, PartialEq)]
pub struct EigenSpectrum {
    pub eigenvalues: Vec<f64>,
    pub t: usize,
}

impl EigenSpectrum {
    pub fn new(mut eigenvalues: Vec<f64>, t: usize) -> Self {
        eigenvalues.sort_by(|a, b| b.total_cmp(a));
        Self { eigenvalues, t }
    }

    pub fn len(&self) -> usize {
        self.eigenvalues.len()
    }

    pub fn is_empty(&self) -> bool {
        self.eigenvalues.is_empty()
    }

    /// The `k`-th largest eigenvalue, `k` counted from 1.
    pub fn lambda(&self, k: usize) -> f64 {
        self.eigenvalues[k - 1]
    }

    pub fn trace(&self) -> f64 {
        self.eigenvalues.iter().sum()
    }

    pub fn mean(&self) -> f64 {
        self.trace() / self.len() as f64
    }
}

/// Full symmetric eigendecomposition (eigenvalues only).
///
/// Slightly negative eigenvalues down to `-1e-8 · trace / N` are rounding
/// noise of a PSD matrix and are clamped to zero.
pub fn eigen_symmetric(cov: &CovarianceMatrix) -> Result<EigenSpectrum> {
    let n = cov.dim();
    if let Some(pos) = cov.values.iter().position(|v| !v.is_finite()) {
        return Err(Error::NonFinite { series: pos % n + 1, time: cov.t });
    }
    let raw = cov.values.symmetric_eigenvalues();
    let floor = -1e-8 * cov.trace().abs() / n as f64;
    let values = raw
        .iter()
        .map(|&v| if v < 0.0 && v >= floor { 0.0 } else { v })
        .collect();
    Ok(EigenSpectrum::new(values, cov.t))
}

/// Eigenvalue-ratio estimate of the number of factors: the `k ≤ k_max`
/// maximising `λ_k / λ_{k+1}`, ties resolved to the smallest `k`.
pub fn estimate_num_factors(spectrum: &EigenSpectrum, k_max: usize) -> Result<usize> {
    let n = spectrum.len();
    if k_max == 0 || k_max >= n {
        return Err(invalid(format!("k_max = {k_max} must lie in 1..{n}")));
    }
    if let Some(pos) = (1..=k_max + 1).find(|&k| spectrum.lambda(k) <= 0.0) {
        return Err(Error::ZeroEigenvalue(pos));
    }
    let mut best = (1, f64::NEG_INFINITY);
    for k in 1..=k_max {
        let ratio = spectrum.lambda(k) / spectrum.lambda(k + 1);
        if ratio > best.1 {
            best = (k, ratio);
        }
    }
    Ok(best.0)
}

/// Streams spectra as `t,k,eigenvalue` rows.
pub struct SpectrumWriter<W: Write> {
    inner: csv::Writer<W>,
}

impl<W: Write> SpectrumWriter<W> {
    pub fn new(writer: W) -> Result<Self> {
        let mut inner = csv::Writer::from_writer(writer);
        inner.write_record(["t", "k", "eigenvalue"])?;
        Ok(Self { inner })
    }

    pub fn write(&mut self, spectrum: &EigenSpectrum) -> Result<()> {
        for (k, v) in spectrum.eigenvalues.iter().enumerate() {
            self.inner.write_record(&[
                spectrum.t.to_string(),
                (k + 1).to_string(),
                format!("{v:?}"),
            ])?;
        }
        Ok(())
    }

    pub fn flush(&mut self) -> Result<()> {
        self.inner.flush()?;
        Ok(())
    }
}

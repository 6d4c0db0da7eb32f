//! Spectral (HKPV) sampling of a DPP discretised on a square grid.
//!
//! The kernel is discretised at cell centres, `C[i][j] = h^2 K(x_i, x_j)`,
//! which defines a DPP on the cells. Its spectrum is computed either densely
//! or from a pivoted Cholesky factor `C ~ L L*` followed by the small
//! eigenproblem of `L* L`. Sampling selects eigenvectors by independent
//! Bernoulli trials and then places points one at a time, deflating the
//! selected subspace with a Householder reflection after each point.
//!
//! Restricting to a subset `S` of the cells samples the marginal of the grid
//! process on `S` exactly: its kernel is the submatrix `C_SS`.

use nalgebra::{DMatrix, SymmetricEigen};
use num_complex::Complex64;
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::kernels::{Kernel, PlanarPoint};
use crate::rng::{derive_seed, stream};
use crate::testfunctions::TestFunction;

/// Eigenvalues above `1 + CLAMP_TOLERANCE` make the grid too coarse.
pub const CLAMP_TOLERANCE: f64 = 5e-3;
/// Largest admissible `h^2 sup K(z, z)`.
pub const MAX_OCCUPANCY: f64 = 0.2;
/// Smallest grid accepted by the configuration layer.
pub const MIN_GRID: usize = 32;
const CHOLESKY_TOLERANCE: f64 = 1e-12;
const EIGEN_FLOOR: f64 = 1e-13;
const SAMPLER_TAG: u64 = 0x5350_4543;

/// The square `[c - L, c + L]^2`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Window {
    pub center: PlanarPoint,
    pub half_width: f64,
}

impl Window {
    pub fn new(center: PlanarPoint, half_width: f64) -> Result<Window> {
        center.check()?;
        if !(half_width > 0.0 && half_width.is_finite()) {
            return Err(Error::Argument(format!("window half-width {half_width} must be positive")));
        }
        Ok(Window { center, half_width })
    }

    pub fn centered(half_width: f64) -> Result<Window> {
        Window::new(PlanarPoint::default(), half_width)
    }

    pub fn contains(&self, z: PlanarPoint) -> bool {
        (z.re - self.center.re).abs() <= self.half_width && (z.im - self.center.im).abs() <= self.half_width
    }

    pub fn area(&self) -> f64 {
        4.0 * self.half_width * self.half_width
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct GridSpec {
    /// Cells per axis.
    pub n: usize,
}

impl GridSpec {
    pub fn new(n: usize) -> Result<GridSpec> {
        if n == 0 {
            return Err(Error::Argument("grid needs at least one cell per axis".into()));
        }
        Ok(GridSpec { n })
    }

    pub fn cell_side(&self, window: &Window) -> f64 {
        2.0 * window.half_width / self.n as f64
    }

    /// Cell centres, row `ix` major.
    pub fn centers(&self, window: &Window) -> Vec<PlanarPoint> {
        let h = self.cell_side(window);
        let x0 = window.center.re - window.half_width;
        let y0 = window.center.im - window.half_width;
        let mut out = Vec::with_capacity(self.n * self.n);
        for ix in 0..self.n {
            for iy in 0..self.n {
                out.push(PlanarPoint::new(x0 + (ix as f64 + 0.5) * h, y0 + (iy as f64 + 0.5) * h));
            }
        }
        out
    }
}

/// Checks `h^2 sup K(z, z) <= MAX_OCCUPANCY` on the given cells.
pub fn check_occupancy(kernel: &Kernel, cells: &[PlanarPoint], h: f64, n: usize) -> Result<f64> {
    let mut sup: f64 = 0.0;
    for &c in cells {
        sup = sup.max(kernel.diagonal(c)?);
    }
    let occ = h * h * sup;
    if occ > MAX_OCCUPANCY {
        let suggested_n = (n as f64 * (occ / MAX_OCCUPANCY).sqrt()).ceil() as usize;
        return Err(Error::RefineGrid {
            reason: format!("cell occupancy h^2 sup K = {occ:.4} exceeds {MAX_OCCUPANCY}"),
            suggested_n,
        });
    }
    Ok(occ)
}

/// The dense matrix `C[i][j] = h^2 K(x_i, x_j)` over the whole window.
pub fn discretize(kernel: &Kernel, window: &Window, grid: &GridSpec) -> Result<DMatrix<Complex64>> {
    let cells = grid.centers(window);
    let h = grid.cell_side(window);
    check_occupancy(kernel, &cells, h, grid.n)?;
    assemble(kernel, &cells, h)
}

fn assemble(kernel: &Kernel, cells: &[PlanarPoint], h: f64) -> Result<DMatrix<Complex64>> {
    let n = cells.len();
    let h2 = h * h;
    let mut c = DMatrix::<Complex64>::zeros(n, n);
    for j in 0..n {
        c[(j, j)] = Complex64::new(h2 * kernel.diagonal(cells[j])?, 0.0);
        for i in 0..j {
            let v = kernel.eval(cells[i], cells[j])? * h2;
            c[(i, j)] = v;
            c[(j, i)] = v.conj();
        }
    }
    Ok(c)
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct ClampReport {
    pub max_raw: f64,
    pub min_raw: f64,
    /// Largest `|lambda - clamp(lambda)|`.
    pub max_clamp: f64,
    pub clamped_count: usize,
}

/// Eigenpairs with eigenvalues in `[0, 1]`, descending. Eigenvectors are
/// stored column-major with separate real and imaginary parts.
#[derive(Clone, Debug)]
pub struct Spectrum {
    pub eigenvalues: Vec<f64>,
    pub dim: usize,
    re: Vec<f64>,
    im: Vec<f64>,
    pub clamp: ClampReport,
    /// Trace of the discretised kernel.
    pub trace: f64,
    /// Sum of the eigenvalues before clamping.
    pub raw_sum: f64,
}

impl Spectrum {
    fn from_pairs(mut pairs: Vec<(f64, Vec<Complex64>)>, dim: usize, trace: f64) -> Result<Spectrum> {
        pairs.sort_by(|a, b| b.0.total_cmp(&a.0));
        let raw_sum: f64 = pairs.iter().map(|p| p.0).sum();
        let mut clamp = ClampReport {
            max_raw: pairs.first().map_or(0.0, |p| p.0),
            min_raw: pairs.last().map_or(0.0, |p| p.0),
            ..Default::default()
        };
        if clamp.max_raw > 1.0 + CLAMP_TOLERANCE {
            return Err(Error::RefineGrid {
                reason: format!(
                    "largest eigenvalue {:.6} exceeds 1 + {CLAMP_TOLERANCE}",
                    clamp.max_raw
                ),
                suggested_n: 0,
            });
        }
        let mut eigenvalues = Vec::with_capacity(pairs.len());
        let mut re = Vec::with_capacity(pairs.len() * dim);
        let mut im = Vec::with_capacity(pairs.len() * dim);
        for (lam, v) in pairs {
            let c = lam.clamp(0.0, 1.0);
            if c != lam {
                clamp.clamped_count += 1;
                clamp.max_clamp = clamp.max_clamp.max((c - lam).abs());
            }
            eigenvalues.push(c);
            re.extend(v.iter().map(|z| z.re));
            im.extend(v.iter().map(|z| z.im));
        }
        Ok(Spectrum {
            eigenvalues,
            dim,
            re,
            im,
            clamp,
            trace,
            raw_sum,
        })
    }

    pub fn rank(&self) -> usize {
        self.eigenvalues.len()
    }

    pub fn eigenvector(&self, k: usize) -> Vec<Complex64> {
        let s = k * self.dim;
        (0..self.dim)
            .map(|i| Complex64::new(self.re[s + i], self.im[s + i]))
            .collect()
    }

    /// `Σ lambda`, the expected number of points.
    pub fn expected_count(&self) -> f64 {
        self.eigenvalues.iter().sum()
    }

    /// `Σ lambda (1 - lambda)`, the variance of the number of points.
    pub fn count_variance(&self) -> f64 {
        self.eigenvalues.iter().map(|l| l * (1.0 - l)).sum()
    }
}

/// Dense Hermitian eigendecomposition with clamping into `[0, 1]`.
pub fn spectrum(c: &DMatrix<Complex64>) -> Result<Spectrum> {
    let n = c.nrows();
    if n != c.ncols() {
        return Err(Error::Argument("spectrum needs a square matrix".into()));
    }
    for j in 0..n {
        for i in 0..=j {
            if c[(i, j)] != c[(j, i)].conj() {
                return Err(Error::Argument("spectrum needs a Hermitian matrix".into()));
            }
        }
    }
    let trace: f64 = (0..n).map(|i| c[(i, i)].re).sum();
    let eig = SymmetricEigen::new(c.clone());
    let pairs = (0..n)
        .map(|k| {
            (
                eig.eigenvalues[k],
                eig.eigenvectors.column(k).iter().copied().collect(),
            )
        })
        .collect();
    Spectrum::from_pairs(pairs, n, trace)
}

/// Spectrum of `C[i][j] = h^2 K(x_i, x_j)` on the given cells via a pivoted
/// Cholesky factor, never forming `C`. Eigenvalues below `1e-13` are dropped.
pub fn low_rank_spectrum(kernel: &Kernel, cells: &[PlanarPoint], h: f64) -> Result<Spectrum> {
    let n = cells.len();
    let h2 = h * h;
    let mut diag: Vec<f64> = cells
        .iter()
        .map(|&c| kernel.diagonal(c).map(|d| h2 * d))
        .collect::<Result<_>>()?;
    let trace: f64 = diag.iter().sum();
    let max_diag = diag.iter().cloned().fold(0.0, f64::max);
    let mut cols: Vec<Vec<Complex64>> = Vec::new();
    let mut pivots = Vec::new();
    loop {
        let (p, &dp) = match diag.iter().enumerate().max_by(|a, b| a.1.total_cmp(b.1)) {
            Some(x) => x,
            None => break,
        };
        if dp <= CHOLESKY_TOLERANCE * max_diag || dp <= 0.0 || cols.len() == n {
            break;
        }
        let xp = cells[p];
        let mut col: Vec<Complex64> = cells
            .iter()
            .map(|&x| kernel.eval(x, xp).map(|v| v * h2))
            .collect::<Result<_>>()?;
        for l in &cols {
            let lp = l[p].conj();
            for (ci, li) in col.iter_mut().zip(l) {
                *ci -= li * lp;
            }
        }
        let s = dp.sqrt();
        for (i, ci) in col.iter_mut().enumerate() {
            *ci /= s;
            diag[i] -= ci.norm_sqr();
        }
        diag[p] = 0.0;
        pivots.push(p);
        cols.push(col);
    }
    let r = cols.len();
    if r == 0 {
        return Spectrum::from_pairs(Vec::new(), n, trace);
    }
    // M = L* L is r x r and shares the nonzero spectrum of L L*
    let mut m = DMatrix::<Complex64>::zeros(r, r);
    for a in 0..r {
        for b in a..r {
            let v: Complex64 = cols[a].iter().zip(&cols[b]).map(|(x, y)| x.conj() * y).sum();
            m[(a, b)] = v;
            m[(b, a)] = v.conj();
        }
        m[(a, a)].im = 0.0;
    }
    let eig = SymmetricEigen::new(m);
    let mut pairs = Vec::new();
    for k in 0..r {
        let lam = eig.eigenvalues[k];
        if lam < EIGEN_FLOOR {
            continue;
        }
        let w = eig.eigenvectors.column(k);
        let scale = 1.0 / lam.sqrt();
        let mut v = vec![Complex64::new(0.0, 0.0); n];
        for (a, col) in cols.iter().enumerate() {
            let wa = w[a] * scale;
            for (vi, ci) in v.iter_mut().zip(col) {
                *vi += ci * wa;
            }
        }
        pairs.push((lam, v));
    }
    Spectrum::from_pairs(pairs, n, trace)
}

/// `Σ_j (a_j + i b_j)(c_j + i d_j)`.
#[inline]
fn dot_lanes(a: &[f64], b: &[f64], c: &[f64], d: &[f64]) -> (f64, f64) {
    let mut re = [0.0; 4];
    let mut im = [0.0; 4];
    let chunks = a
        .chunks_exact(4)
        .zip(b.chunks_exact(4))
        .zip(c.chunks_exact(4).zip(d.chunks_exact(4)));
    for ((a, b), (c, d)) in chunks {
        for l in 0..4 {
            re[l] += a[l] * c[l] - b[l] * d[l];
            im[l] += a[l] * d[l] + b[l] * c[l];
        }
    }
    let (mut sr, mut si) = ((re[0] + re[1]) + (re[2] + re[3]), (im[0] + im[1]) + (im[2] + im[3]));
    for j in a.len() / 4 * 4..a.len() {
        sr += a[j] * c[j] - b[j] * d[j];
        si += a[j] * d[j] + b[j] * c[j];
    }
    (sr, si)
}

/// `(a + i b) -= (sr + i si) conj(c + i d)`, returning the new squared norm.
#[inline]
fn update_lanes(a: &mut [f64], b: &mut [f64], c: &[f64], d: &[f64], sr: f64, si: f64) -> f64 {
    let mut nrm = [0.0; 4];
    let n = a.len() / 4 * 4;
    let chunks = a[..n]
        .chunks_exact_mut(4)
        .zip(b[..n].chunks_exact_mut(4))
        .zip(c.chunks_exact(4).zip(d.chunks_exact(4)));
    for ((a, b), (c, d)) in chunks {
        for l in 0..4 {
            a[l] -= sr * c[l] + si * d[l];
            b[l] -= si * c[l] - sr * d[l];
            nrm[l] += a[l] * a[l] + b[l] * b[l];
        }
    }
    let mut total = (nrm[0] + nrm[1]) + (nrm[2] + nrm[3]);
    for k in n..a.len() {
        a[k] -= sr * c[k] + si * d[k];
        b[k] -= si * c[k] - sr * d[k];
        total += a[k] * a[k] + b[k] * b[k];
    }
    total
}

/// A sample of the discretised process.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PointConfiguration {
    pub points: Vec<PlanarPoint>,
    /// Indices of the occupied cells, in the order they were drawn.
    pub cells: Vec<usize>,
    pub kernel: String,
    pub rho: f64,
    pub window: Window,
    pub seed: u64,
    pub replica: u64,
}

impl PointConfiguration {
    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }
}

/// `Σ_x f(x)` over the points of a configuration.
pub fn linear_statistic(config: &PointConfiguration, f: &TestFunction) -> f64 {
    config.points.iter().map(|&p| f.value(p)).sum()
}

/// A discretised DPP ready for repeated sampling.
#[derive(Clone, Debug)]
pub struct DppSampler {
    cells: Vec<PlanarPoint>,
    h: f64,
    spectrum: Spectrum,
    kernel_id: String,
    rho: f64,
    window: Window,
    pub jitter: bool,
}

impl DppSampler {
    /// The grid DPP on the whole window.
    pub fn new(kernel: &Kernel, window: &Window, grid: &GridSpec) -> Result<DppSampler> {
        DppSampler::restricted(kernel, window, grid, |_, _, _, _| true)
    }

    /// The marginal of the grid DPP on the cells `[x0, x1] x [y0, y1]` for
    /// which `keep(x0, y0, x1, y1)` holds.
    pub fn restricted(
        kernel: &Kernel,
        window: &Window,
        grid: &GridSpec,
        keep: impl Fn(f64, f64, f64, f64) -> bool,
    ) -> Result<DppSampler> {
        let h = grid.cell_side(window);
        let cells: Vec<PlanarPoint> = grid
            .centers(window)
            .into_iter()
            .filter(|c| keep(c.re - h / 2.0, c.im - h / 2.0, c.re + h / 2.0, c.im + h / 2.0))
            .collect();
        check_occupancy(kernel, &cells, h, grid.n)?;
        let spectrum = low_rank_spectrum(kernel, &cells, h).map_err(|e| match e {
            Error::RefineGrid { reason, .. } => Error::RefineGrid {
                reason,
                suggested_n: grid.n * 2,
            },
            other => other,
        })?;
        Ok(DppSampler {
            cells,
            h,
            spectrum,
            kernel_id: kernel.id(),
            rho: kernel.rho(),
            window: *window,
            jitter: false,
        })
    }

    /// The marginal on the cells meeting the disk `|z| < radius` about the origin.
    pub fn on_disk(kernel: &Kernel, window: &Window, grid: &GridSpec, radius: f64) -> Result<DppSampler> {
        DppSampler::restricted(kernel, window, grid, |x0, y0, x1, y1| {
            let dx = 0f64.max(x0).max(-x1);
            let dy = 0f64.max(y0).max(-y1);
            dx * dx + dy * dy < radius * radius
        })
    }

    pub fn with_jitter(mut self, jitter: bool) -> Self {
        self.jitter = jitter;
        self
    }

    pub fn spectrum(&self) -> &Spectrum {
        &self.spectrum
    }

    pub fn cells(&self) -> &[PlanarPoint] {
        &self.cells
    }

    pub fn cell_side(&self) -> f64 {
        self.h
    }

    pub fn sample(&self, seed: u64, replica: u64) -> Result<PointConfiguration> {
        let mut rng = stream(derive_seed(seed, SAMPLER_TAG), replica);
        let spec = &self.spectrum;
        let n = spec.dim;
        let selected: Vec<usize> = spec
            .eigenvalues
            .iter()
            .enumerate()
            .filter_map(|(k, &lam)| (rng.random::<f64>() < lam).then_some(k))
            .collect();
        // row-major copy of the selected eigenvectors: row i holds V[i, ..stride]
        let stride = selected.len();
        let mut m = stride;
        let mut re = vec![0.0; n * stride];
        let mut im = vec![0.0; n * stride];
        for (j, &k) in selected.iter().enumerate() {
            for i in 0..n {
                re[i * stride + j] = spec.re[k * n + i];
                im[i * stride + j] = spec.im[k * n + i];
            }
        }
        let mut norms: Vec<f64> = (0..n)
            .map(|i| {
                let (r, c) = (&re[i * stride..i * stride + m], &im[i * stride..i * stride + m]);
                r.iter().zip(c).map(|(a, b)| a * a + b * b).sum()
            })
            .collect();
        let mut drawn = Vec::with_capacity(m);
        let mut u_re = vec![0.0; m];
        let mut u_im = vec![0.0; m];
        while m > 0 {
            let total: f64 = norms.iter().map(|v| v.max(0.0)).sum();
            if !(total > 1e-12) {
                return Err(Error::Sampler(format!(
                    "subspace collapsed with {m} directions left"
                )));
            }
            let target = rng.random::<f64>() * total;
            let mut acc = 0.0;
            let mut x = n - 1;
            for (i, v) in norms.iter().enumerate() {
                acc += v.max(0.0);
                if acc > target {
                    x = i;
                    break;
                }
            }
            if norms[x] < 1e-12 {
                // numerically empty row: fall back to the most likely cell
                x = norms
                    .iter()
                    .enumerate()
                    .max_by(|a, b| a.1.total_cmp(b.1))
                    .map(|(i, _)| i)
                    .unwrap_or(0);
                if norms[x] < 1e-12 {
                    return Err(Error::Sampler("no cell with positive probability".into()));
                }
            }
            drawn.push(x);

            // u = conj(V[x, ..m]) - alpha e_last reflects row x onto the last column
            for j in 0..m {
                u_re[j] = re[x * stride + j];
                u_im[j] = -im[x * stride + j];
            }
            let norm_a = (0..m).map(|j| u_re[j] * u_re[j] + u_im[j] * u_im[j]).sum::<f64>().sqrt();
            let last = Complex64::new(u_re[m - 1], u_im[m - 1]);
            let phase = if last.norm() > 0.0 {
                last / last.norm()
            } else {
                Complex64::new(1.0, 0.0)
            };
            let alpha = -phase * norm_a;
            u_re[m - 1] -= alpha.re;
            u_im[m - 1] -= alpha.im;
            let uu: f64 = (0..m).map(|j| u_re[j] * u_re[j] + u_im[j] * u_im[j]).sum();
            let c = if uu > 0.0 { 2.0 / uu } else { 0.0 };
            let (ur, ui) = (&u_re[..m], &u_im[..m]);
            for i in 0..n {
                let row_re = &mut re[i * stride..i * stride + m];
                let row_im = &mut im[i * stride..i * stride + m];
                // s = V[i, ..] u, then V[i, ..] -= c s u*; four lanes so the
                // reductions vectorise
                let (sr, si) = dot_lanes(row_re, row_im, ur, ui);
                let (sr, si) = (c * sr, c * si);
                let nrm = update_lanes(&mut row_re[..m - 1], &mut row_im[..m - 1], &ur[..m - 1], &ui[..m - 1], sr, si);
                norms[i] = nrm;
            }
            m -= 1;
            norms[x] = 0.0;
        }

        let mut points = Vec::with_capacity(drawn.len());
        for &x in &drawn {
            let c = self.cells[x];
            let p = if self.jitter {
                PlanarPoint::new(
                    c.re + (rng.random::<f64>() - 0.5) * self.h,
                    c.im + (rng.random::<f64>() - 0.5) * self.h,
                )
            } else {
                c
            };
            points.push(p);
        }
        Ok(PointConfiguration {
            points,
            cells: drawn,
            kernel: self.kernel_id.clone(),
            rho: self.rho,
            window: self.window,
            seed,
            replica,
        })
    }
}

//! Gauss-Legendre x uniform-longitude grids on the round 2-sphere.
//!
//! Colatitude nodes are the Gauss-Legendre nodes in cos(theta) on [-1, 1],
//! longitudes are uniform. With `n_lat >= L+1` and `n_lon >= 2L+1` the
//! product rule integrates every spherical polynomial of degree <= 2L
//! exactly, which is what makes the harmonic transforms in this crate exact
//! on band-limited data.

use std::f64::consts::PI;
use std::sync::Arc;

use ndarray::Array2;

use crate::error::{GcError, GcResult};
use crate::sphere::legendre::{normalized_assoc_legendre_row, tri_index, tri_len};

/// Gauss-Legendre nodes and weights on [-1, 1], nodes in descending order.
///
/// Newton iteration on P_n with the Chebyshev-like initial guess; weights
/// w = 2 / ((1 - x^2) P_n'(x)^2).
pub fn gauss_legendre(n: usize) -> (Vec<f64>, Vec<f64>) {
    assert!(n >= 1);
    let mut nodes = vec![0.0; n];
    let mut weights = vec![0.0; n];
    for i in 0..n {
        let mut x = (PI * (i as f64 + 0.75) / (n as f64 + 0.5)).cos();
        let mut dp = 0.0;
        for _ in 0..100 {
            // Evaluate P_n and P_{n-1} by the three-term recurrence.
            let mut p0 = 1.0;
            let mut p1 = x;
            for k in 2..=n {
                let kf = k as f64;
                let p2 = ((2.0 * kf - 1.0) * x * p1 - (kf - 1.0) * p0) / kf;
                p0 = p1;
                p1 = p2;
            }
            dp = n as f64 * (x * p1 - p0) / (x * x - 1.0);
            let dx = p1 / dp;
            x -= dx;
            if dx.abs() < 1e-15 {
                break;
            }
        }
        nodes[i] = x;
        weights[i] = 2.0 / ((1.0 - x * x) * dp * dp);
    }
    // The initial guesses are descending in x for ascending i, so nodes come
    // out ordered by ascending colatitude already.
    (nodes, weights)
}

/// Discretization of the sphere: quadrature nodes plus the precomputed
/// Legendre and trigonometric tables the transforms run on.
#[derive(Debug)]
pub struct SphereGrid {
    /// Declared bandlimit of fields carried on this grid.
    pub bandlimit: usize,
    /// Oversampling factor used when sizing the grid.
    pub oversample: f64,
    pub n_lat: usize,
    pub n_lon: usize,
    /// Largest degree whose analysis is exact on this grid.
    pub max_exact_bandlimit: usize,
    /// cos(theta_i), Gauss-Legendre nodes, descending.
    pub cos_theta: Vec<f64>,
    pub sin_theta: Vec<f64>,
    pub theta: Vec<f64>,
    /// Gauss-Legendre weights (sum to 2).
    pub weights: Vec<f64>,
    /// Longitude spacing 2*pi / n_lon.
    pub d_phi: f64,
    /// cos(m * phi_j), laid out m-major: [m][j].
    cos_m_phi: Vec<f64>,
    sin_m_phi: Vec<f64>,
    /// Normalized associated Legendre table, node-major:
    /// entry (i, tri_index(l, m)) for l <= max_exact_bandlimit, 0 <= m <= l.
    legendre: Vec<f64>,
}

impl SphereGrid {
    /// Build a grid for bandlimit `l` with oversampling `q >= 1`.
    pub fn new(l: usize, q: f64) -> GcResult<Arc<Self>> {
        if l < 1 {
            return Err(GcError::InvalidArgument("bandlimit must be >= 1".into()));
        }
        if !(q >= 1.0) || !q.is_finite() {
            return Err(GcError::InvalidArgument(format!(
                "oversample factor must be >= 1, got {q}"
            )));
        }
        let n_lat = (q * (l + 1) as f64).ceil() as usize;
        let n_lon = (q * (2 * l + 1) as f64).ceil() as usize;
        if n_lat < l + 1 || n_lon < 2 * l + 1 || n_lat > 100_000 {
            return Err(GcError::InvalidArgument(format!(
                "grid sizing failed for L={l}, q={q}"
            )));
        }
        let max_exact = (n_lat - 1).min((n_lon - 1) / 2);
        let (cos_theta, weights) = gauss_legendre(n_lat);
        let sin_theta: Vec<f64> = cos_theta.iter().map(|c| (1.0 - c * c).sqrt()).collect();
        let theta: Vec<f64> = cos_theta.iter().map(|c| c.acos()).collect();
        let d_phi = 2.0 * PI / n_lon as f64;

        let mut cos_m_phi = vec![0.0; (max_exact + 1) * n_lon];
        let mut sin_m_phi = vec![0.0; (max_exact + 1) * n_lon];
        for m in 0..=max_exact {
            for j in 0..n_lon {
                let a = m as f64 * d_phi * j as f64;
                cos_m_phi[m * n_lon + j] = a.cos();
                sin_m_phi[m * n_lon + j] = a.sin();
            }
        }

        let row_len = tri_len(max_exact);
        let mut legendre = vec![0.0; n_lat * row_len];
        {
            use rayon::prelude::*;
            legendre
                .par_chunks_mut(row_len)
                .enumerate()
                .for_each(|(i, row)| {
                    normalized_assoc_legendre_row(max_exact, cos_theta[i], sin_theta[i], row);
                });
        }

        Ok(Arc::new(Self {
            bandlimit: l,
            oversample: q,
            n_lat,
            n_lon,
            max_exact_bandlimit: max_exact,
            cos_theta,
            sin_theta,
            theta,
            weights,
            d_phi,
            cos_m_phi,
            sin_m_phi,
            legendre,
        }))
    }

    #[inline]
    pub fn legendre_row(&self, i: usize) -> &[f64] {
        let row_len = tri_len(self.max_exact_bandlimit);
        &self.legendre[i * row_len..(i + 1) * row_len]
    }

    #[inline]
    pub fn legendre_value(&self, i: usize, l: usize, m: usize) -> f64 {
        self.legendre_row(i)[tri_index(l, m)]
    }

    #[inline]
    pub fn cos_m_phi(&self, m: usize) -> &[f64] {
        &self.cos_m_phi[m * self.n_lon..(m + 1) * self.n_lon]
    }

    #[inline]
    pub fn sin_m_phi(&self, m: usize) -> &[f64] {
        &self.sin_m_phi[m * self.n_lon..(m + 1) * self.n_lon]
    }

    /// Unit vector of node (i, j).
    #[inline]
    pub fn node(&self, i: usize, j: usize) -> [f64; 3] {
        let phi = self.d_phi * j as f64;
        [
            self.sin_theta[i] * phi.cos(),
            self.sin_theta[i] * phi.sin(),
            self.cos_theta[i],
        ]
    }

    /// Quadrature weight of node (i, j) for integrals against dv_c.
    #[inline]
    pub fn node_weight(&self, i: usize) -> f64 {
        self.weights[i] * self.d_phi
    }

    /// Total quadrature weight; equals 4*pi up to roundoff.
    pub fn total_weight(&self) -> f64 {
        self.weights.iter().sum::<f64>() * 2.0 * PI
    }
}

/// Real scalar samples on a [`SphereGrid`].
#[derive(Clone, Debug)]
pub struct GridField {
    pub grid: Arc<SphereGrid>,
    pub values: Array2<f64>,
}

impl GridField {
    pub fn from_values(grid: Arc<SphereGrid>, values: Array2<f64>) -> GcResult<Self> {
        if values.dim() != (grid.n_lat, grid.n_lon) {
            return Err(GcError::InvalidArgument(format!(
                "field shape {:?} does not match grid {}x{}",
                values.dim(),
                grid.n_lat,
                grid.n_lon
            )));
        }
        let f = Self { grid, values };
        f.check_finite()?;
        Ok(f)
    }

    pub fn zeros(grid: Arc<SphereGrid>) -> Self {
        let values = Array2::zeros((grid.n_lat, grid.n_lon));
        Self { grid, values }
    }

    pub fn constant(grid: Arc<SphereGrid>, c: f64) -> Self {
        let values = Array2::from_elem((grid.n_lat, grid.n_lon), c);
        Self { grid, values }
    }

    /// Sample a function of the ambient unit vector at every node.
    pub fn from_fn(grid: Arc<SphereGrid>, f: impl Fn(&[f64; 3]) -> f64 + Sync) -> Self {
        use rayon::prelude::*;
        let n_lon = grid.n_lon;
        let mut values = Array2::zeros((grid.n_lat, n_lon));
        let g = grid.clone();
        values
            .as_slice_mut()
            .expect("standard layout")
            .par_chunks_mut(n_lon)
            .enumerate()
            .for_each(|(i, row)| {
                for (j, v) in row.iter_mut().enumerate() {
                    *v = f(&g.node(i, j));
                }
            });
        Self { grid, values }
    }

    pub fn check_finite(&self) -> GcResult<()> {
        if self.values.iter().all(|v| v.is_finite()) {
            Ok(())
        } else {
            Err(GcError::InvalidData("field contains non-finite samples".into()))
        }
    }

    pub fn sup_norm(&self) -> f64 {
        self.values.iter().fold(0.0f64, |a, v| a.max(v.abs()))
    }

    pub fn max_value(&self) -> f64 {
        self.values.iter().fold(f64::NEG_INFINITY, |a, &v| a.max(v))
    }

    pub fn min_value(&self) -> f64 {
        self.values.iter().fold(f64::INFINITY, |a, &v| a.min(v))
    }

    /// Elementwise map into a new field on the same grid.
    pub fn map(&self, f: impl Fn(f64) -> f64 + Sync) -> Self {
        let mut out = self.clone();
        out.values.mapv_inplace(|v| f(v));
        out
    }

    /// Elementwise combine with another field on the same grid.
    pub fn zip_map(&self, other: &GridField, f: impl Fn(f64, f64) -> f64) -> Self {
        debug_assert!(Arc::ptr_eq(&self.grid, &other.grid) || same_geometry(&self.grid, &other.grid));
        let mut out = self.clone();
        ndarray::Zip::from(&mut out.values)
            .and(&other.values)
            .for_each(|a, &b| *a = f(*a, b));
        out
    }

    pub fn add_constant(&mut self, c: f64) {
        self.values.mapv_inplace(|v| v + c);
    }

    /// Maximum pointwise |a - b|.
    pub fn max_abs_diff(&self, other: &GridField) -> f64 {
        ndarray::Zip::from(&self.values)
            .and(&other.values)
            .fold(0.0f64, |acc, &a, &b| acc.max((a - b).abs()))
    }
}

pub fn same_geometry(a: &SphereGrid, b: &SphereGrid) -> bool {
    a.n_lat == b.n_lat && a.n_lon == b.n_lon && a.bandlimit == b.bandlimit
}

/// Quadrature of a field against dv_c over the whole sphere.
pub fn integrate(f: &GridField) -> GcResult<f64> {
    f.check_finite()?;
    Ok(integrate_unchecked(f))
}

pub(crate) fn integrate_unchecked(f: &GridField) -> f64 {
    let g = &f.grid;
    let mut total = 0.0;
    for i in 0..g.n_lat {
        let row = f.values.row(i);
        let mut s = 0.0;
        for &v in row.iter() {
            s += v;
        }
        total += g.weights[i] * s;
    }
    total * g.d_phi
}

/// Quadrature of the product of two fields against dv_c.
pub fn integrate_product(a: &GridField, b: &GridField) -> f64 {
    let g = &a.grid;
    let mut total = 0.0;
    for i in 0..g.n_lat {
        let ra = a.values.row(i);
        let rb = b.values.row(i);
        let mut s = 0.0;
        for (&x, &y) in ra.iter().zip(rb.iter()) {
            s += x * y;
        }
        total += g.weights[i] * s;
    }
    total * g.d_phi
}

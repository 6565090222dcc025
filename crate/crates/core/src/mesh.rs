//! Cell-centered discretizations of the disk and the rectangle.
//!
//! Every mesh stores its negative Dirichlet Laplacian in finite-volume
//! "stiffness" form: a list of face conductances between neighbouring cells
//! plus a boundary conductance per cell. With `M = diag(measures)` and `S` the
//! stiffness matrix, the operator is `L = M⁻¹ S`, which is self-adjoint in the
//! measure-weighted inner product and positive definite.

use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

use crate::error::{check_len, Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MeshKind {
    DiskRadial,
    DiskPolar,
    Rectangle,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "shape", rename_all = "snake_case")]
pub enum Geometry {
    Disk { radius: f64 },
    Rectangle { a: f64, b: f64 },
}

/// Serializable description of a mesh; rebuilding from it is deterministic.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MeshSpec {
    pub kind: MeshKind,
    pub geometry: Geometry,
    pub resolution: Vec<usize>,
}

impl MeshSpec {
    pub fn build(&self) -> Result<Mesh> {
        match (self.kind, self.geometry, self.resolution.as_slice()) {
            (MeshKind::DiskRadial, Geometry::Disk { radius }, &[n]) => Mesh::disk_radial(radius, n),
            (MeshKind::DiskPolar, Geometry::Disk { radius }, &[n_r, n_t]) => {
                Mesh::disk_polar(radius, n_r, n_t)
            }
            (MeshKind::Rectangle, Geometry::Rectangle { a, b }, &[nx, ny]) => {
                Mesh::rectangle(a, b, nx, ny)
            }
            _ => Err(Error::InvalidArgument(format!(
                "inconsistent mesh description {:?}",
                self
            ))),
        }
    }
}

/// Face between two cells with its conductance (face length / center distance).
#[derive(Debug, Clone, Copy, PartialEq)]
pub(crate) struct Face {
    pub a: usize,
    pub b: usize,
    pub conductance: f64,
}

#[derive(Debug, Clone)]
pub struct Mesh {
    spec: MeshSpec,
    /// (r, θ) for disk meshes, (x, y) for rectangles. θ is 0 on disk_radial.
    centers: Vec<[f64; 2]>,
    measures: Vec<f64>,
    faces: Vec<Face>,
    boundary: Vec<f64>,
    // CSR adjacency over `faces`, used by the operator application.
    row_start: Vec<usize>,
    neighbors: Vec<(usize, f64)>,
    stiffness_diag: Vec<f64>,
}

impl Mesh {
    /// Radial grid `r_i = (i - 1/2) R / n` for rotationally symmetric fields on
    /// the disk of radius `radius`; cells are annuli.
    pub fn disk_radial(radius: f64, n: usize) -> Result<Self> {
        if !(radius.is_finite() && radius > 0.0) {
            return Err(Error::InvalidArgument(format!("disk radius must be positive, got {radius}")));
        }
        if n < 8 {
            return Err(Error::InvalidArgument(format!("disk_radial needs n >= 8, got {n}")));
        }
        let h = radius / n as f64;
        let centers = (0..n).map(|i| [(i as f64 + 0.5) * h, 0.0]).collect::<Vec<_>>();
        let measures = centers.iter().map(|c| 2.0 * PI * c[0] * h).collect();
        // Face between annulus i and i+1 sits at r = (i+1) h and has length 2π(i+1)h.
        let faces = (0..n - 1)
            .map(|i| Face { a: i, b: i + 1, conductance: 2.0 * PI * (i + 1) as f64 })
            .collect();
        let mut boundary = vec![0.0; n];
        boundary[n - 1] = 2.0 * PI * radius * 2.0 / h;
        let spec = MeshSpec {
            kind: MeshKind::DiskRadial,
            geometry: Geometry::Disk { radius },
            resolution: vec![n],
        };
        Ok(Self::assemble(spec, centers, measures, faces, boundary))
    }

    /// Tensor grid in (r, θ), index `i_r * n_t + i_θ`, periodic in θ.
    pub fn disk_polar(radius: f64, n_r: usize, n_t: usize) -> Result<Self> {
        if !(radius.is_finite() && radius > 0.0) {
            return Err(Error::InvalidArgument(format!("disk radius must be positive, got {radius}")));
        }
        if n_r < 8 || n_t < 8 {
            return Err(Error::InvalidArgument(format!(
                "disk_polar needs n_r, n_t >= 8, got {n_r} x {n_t}"
            )));
        }
        let h = radius / n_r as f64;
        let dt = 2.0 * PI / n_t as f64;
        let n = n_r * n_t;
        let mut centers = Vec::with_capacity(n);
        let mut measures = Vec::with_capacity(n);
        for i in 0..n_r {
            let r = (i as f64 + 0.5) * h;
            for j in 0..n_t {
                centers.push([r, (j as f64 + 0.5) * dt]);
                measures.push(r * h * dt);
            }
        }
        let mut faces = Vec::with_capacity(2 * n);
        for i in 0..n_r {
            let r = (i as f64 + 0.5) * h;
            for j in 0..n_t {
                let here = i * n_t + j;
                if i + 1 < n_r {
                    faces.push(Face { a: here, b: here + n_t, conductance: (i + 1) as f64 * dt });
                }
                let next = i * n_t + (j + 1) % n_t;
                let (a, b) = if here < next { (here, next) } else { (next, here) };
                faces.push(Face { a, b, conductance: h / (r * dt) });
            }
        }
        let mut boundary = vec![0.0; n];
        for j in 0..n_t {
            boundary[(n_r - 1) * n_t + j] = radius * dt * 2.0 / h;
        }
        let spec = MeshSpec {
            kind: MeshKind::DiskPolar,
            geometry: Geometry::Disk { radius },
            resolution: vec![n_r, n_t],
        };
        Ok(Self::assemble(spec, centers, measures, faces, boundary))
    }

    /// Cell-centered 5-point grid on `[0, a] x [0, b]`, index `iy * nx + ix`.
    pub fn rectangle(a: f64, b: f64, nx: usize, ny: usize) -> Result<Self> {
        if nx < 8 || ny < 8 {
            return Err(Error::InvalidArgument(format!(
                "rectangle needs nx, ny >= 8, got {nx} x {ny}"
            )));
        }
        Self::rectangle_coarse(a, b, nx, ny)
    }

    /// Same grid as [`Mesh::rectangle`] without the minimum resolution; meant for
    /// tiny instances checked against exhaustive enumeration.
    pub fn rectangle_coarse(a: f64, b: f64, nx: usize, ny: usize) -> Result<Self> {
        if !(a.is_finite() && b.is_finite() && a > 0.0 && b > 0.0) {
            return Err(Error::InvalidArgument(format!("rectangle sides must be positive, got {a} x {b}")));
        }
        if nx == 0 || ny == 0 {
            return Err(Error::InvalidArgument("rectangle needs at least one cell per side".into()));
        }
        let dx = a / nx as f64;
        let dy = b / ny as f64;
        let n = nx * ny;
        let mut centers = Vec::with_capacity(n);
        for iy in 0..ny {
            for ix in 0..nx {
                centers.push([(ix as f64 + 0.5) * dx, (iy as f64 + 0.5) * dy]);
            }
        }
        let measures = vec![dx * dy; n];
        let (cx, cy) = (dy / dx, dx / dy);
        let mut faces = Vec::with_capacity(2 * n);
        let mut boundary = vec![0.0; n];
        for iy in 0..ny {
            for ix in 0..nx {
                let here = iy * nx + ix;
                if ix + 1 < nx {
                    faces.push(Face { a: here, b: here + 1, conductance: cx });
                }
                if iy + 1 < ny {
                    faces.push(Face { a: here, b: here + nx, conductance: cy });
                }
                if ix == 0 {
                    boundary[here] += 2.0 * cx;
                }
                if ix + 1 == nx {
                    boundary[here] += 2.0 * cx;
                }
                if iy == 0 {
                    boundary[here] += 2.0 * cy;
                }
                if iy + 1 == ny {
                    boundary[here] += 2.0 * cy;
                }
            }
        }
        let spec = MeshSpec {
            kind: MeshKind::Rectangle,
            geometry: Geometry::Rectangle { a, b },
            resolution: vec![nx, ny],
        };
        Ok(Self::assemble(spec, centers, measures, faces, boundary))
    }

    fn assemble(
        spec: MeshSpec,
        centers: Vec<[f64; 2]>,
        measures: Vec<f64>,
        faces: Vec<Face>,
        boundary: Vec<f64>,
    ) -> Self {
        let n = measures.len();
        let mut degree = vec![0usize; n];
        for f in &faces {
            degree[f.a] += 1;
            degree[f.b] += 1;
        }
        let mut row_start = vec![0usize; n + 1];
        for i in 0..n {
            row_start[i + 1] = row_start[i] + degree[i];
        }
        let mut fill = row_start.clone();
        let mut neighbors = vec![(0usize, 0.0f64); row_start[n]];
        let mut stiffness_diag = boundary.clone();
        for f in &faces {
            neighbors[fill[f.a]] = (f.b, f.conductance);
            fill[f.a] += 1;
            neighbors[fill[f.b]] = (f.a, f.conductance);
            fill[f.b] += 1;
            stiffness_diag[f.a] += f.conductance;
            stiffness_diag[f.b] += f.conductance;
        }
        for i in 0..n {
            neighbors[row_start[i]..row_start[i + 1]].sort_by_key(|&(j, _)| j);
        }
        Self { spec, centers, measures, faces, boundary, row_start, neighbors, stiffness_diag }
    }

    pub fn spec(&self) -> &MeshSpec {
        &self.spec
    }

    pub fn kind(&self) -> MeshKind {
        self.spec.kind
    }

    pub fn geometry(&self) -> Geometry {
        self.spec.geometry
    }

    pub fn is_disk(&self) -> bool {
        matches!(self.spec.geometry, Geometry::Disk { .. })
    }

    pub fn len(&self) -> usize {
        self.measures.len()
    }

    pub fn is_empty(&self) -> bool {
        self.measures.is_empty()
    }

    pub fn centers(&self) -> &[[f64; 2]] {
        &self.centers
    }

    pub fn measures(&self) -> &[f64] {
        &self.measures
    }

    pub fn max_measure(&self) -> f64 {
        self.measures.iter().cloned().fold(0.0, f64::max)
    }

    /// Analytic area of the domain.
    pub fn area(&self) -> f64 {
        match self.spec.geometry {
            Geometry::Disk { radius } => PI * radius * radius,
            Geometry::Rectangle { a, b } => a * b,
        }
    }

    /// Distance of each cell center from the domain center.
    pub fn radial_distance(&self, cell: usize) -> f64 {
        let c = self.centers[cell];
        match self.spec.geometry {
            Geometry::Disk { .. } => c[0],
            Geometry::Rectangle { a, b } => ((c[0] - a / 2.0).powi(2) + (c[1] - b / 2.0).powi(2)).sqrt(),
        }
    }

    /// Largest index distance between coupled cells.
    pub(crate) fn bandwidth(&self) -> usize {
        self.faces.iter().map(|f| f.b - f.a).max().unwrap_or(0)
    }

    pub(crate) fn faces(&self) -> &[Face] {
        &self.faces
    }

    pub(crate) fn stiffness_diag(&self) -> &[f64] {
        &self.stiffness_diag
    }

    /// `out = S u` (stiffness form, i.e. measure times the Laplacian action).
    pub(crate) fn apply_stiffness(&self, u: &[f64], out: &mut [f64]) {
        for i in 0..self.len() {
            let mut acc = self.stiffness_diag[i] * u[i];
            for &(j, c) in &self.neighbors[self.row_start[i]..self.row_start[i + 1]] {
                acc -= c * u[j];
            }
            out[i] = acc;
        }
    }

    /// Action of the negative Dirichlet Laplacian, `out = L u`.
    pub fn apply_laplacian(&self, u: &[f64], out: &mut [f64]) -> Result<()> {
        check_len(self.len(), u.len())?;
        check_len(self.len(), out.len())?;
        self.apply_stiffness(u, out);
        for (o, m) in out.iter_mut().zip(&self.measures) {
            *o /= m;
        }
        Ok(())
    }

    pub fn laplacian(&self, u: &[f64]) -> Result<Vec<f64>> {
        let mut out = vec![0.0; self.len()];
        self.apply_laplacian(u, &mut out)?;
        Ok(out)
    }

    /// `Σ f_i m_i` in cell order.
    pub fn integrate(&self, f: &[f64]) -> Result<f64> {
        check_len(self.len(), f.len())?;
        Ok(f.iter().zip(&self.measures).map(|(v, m)| v * m).sum())
    }

    /// Measure-weighted inner product.
    pub fn inner(&self, u: &[f64], v: &[f64]) -> Result<f64> {
        check_len(self.len(), u.len())?;
        check_len(self.len(), v.len())?;
        Ok(self.inner_unchecked(u, v))
    }

    pub(crate) fn inner_unchecked(&self, u: &[f64], v: &[f64]) -> f64 {
        u.iter().zip(v).zip(&self.measures).map(|((a, b), m)| a * b * m).sum()
    }

    pub fn norm_l2(&self, u: &[f64]) -> Result<f64> {
        Ok(self.inner(u, u)?.sqrt())
    }

    /// Measure-weighted integral of `w u²`, the building block of every
    /// potential energy term.
    pub fn weighted_square(&self, w: &[f64], u: &[f64]) -> Result<f64> {
        check_len(self.len(), w.len())?;
        check_len(self.len(), u.len())?;
        Ok(w.iter().zip(u).zip(&self.measures).map(|((w, u), m)| w * u * u * m).sum())
    }

    /// Discrete `‖∇u‖²`, evaluated as `⟨u, L u⟩` through the face sums so the
    /// result is a sum of nonnegative terms.
    pub fn dirichlet_energy(&self, u: &[f64]) -> Result<f64> {
        check_len(self.len(), u.len())?;
        let interior: f64 = self
            .faces
            .iter()
            .map(|f| f.conductance * (u[f.a] - u[f.b]).powi(2))
            .sum();
        let wall: f64 = self.boundary.iter().zip(u).map(|(d, u)| d * u * u).sum();
        Ok(interior + wall)
    }

    /// Largest row sum of `|L|`, a cheap bound on the operator norm.
    pub(crate) fn laplacian_norm_bound(&self) -> f64 {
        self.stiffness_diag
            .iter()
            .zip(&self.measures)
            .map(|(d, m)| 2.0 * d / m)
            .fold(0.0, f64::max)
    }

    /// Cell ranges of equal radius: the rings of a polar mesh, single cells
    /// otherwise.
    pub fn rings(&self) -> Vec<std::ops::Range<usize>> {
        match self.spec.kind {
            MeshKind::DiskPolar => {
                let nt = self.spec.resolution[1];
                (0..self.len() / nt).map(|i| i * nt..(i + 1) * nt).collect()
            }
            _ => (0..self.len()).map(|i| i..i + 1).collect(),
        }
    }

    /// Replaces each value by the measure-weighted mean over its ring.
    pub fn ring_mean(&self, f: &[f64]) -> Result<Vec<f64>> {
        check_len(self.len(), f.len())?;
        let mut out = vec![0.0; f.len()];
        for ring in self.rings() {
            let m: f64 = self.measures[ring.clone()].iter().sum();
            let mean = ring.clone().map(|i| f[i] * self.measures[i]).sum::<f64>() / m;
            out[ring].fill(mean);
        }
        Ok(out)
    }

    /// Largest spread of `f` within a ring, relative to `max |f|`; zero on
    /// meshes without angular cells.
    pub fn angular_variation(&self, f: &[f64]) -> Result<f64> {
        check_len(self.len(), f.len())?;
        let scale = f.iter().fold(0.0f64, |a, v| a.max(v.abs()));
        if scale == 0.0 {
            return Ok(0.0);
        }
        let spread = self
            .rings()
            .into_iter()
            .map(|r| {
                let (lo, hi) = f[r].iter().fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), &v| (lo.min(v), hi.max(v)));
                hi - lo
            })
            .fold(0.0, f64::max);
        Ok(spread / scale)
    }

    /// Returns a dilated copy (every length multiplied by `factor`).
    pub fn dilated(&self, factor: f64) -> Result<Self> {
        let mut spec = self.spec.clone();
        spec.geometry = match spec.geometry {
            Geometry::Disk { radius } => Geometry::Disk { radius: radius * factor },
            Geometry::Rectangle { a, b } => Geometry::Rectangle { a: a * factor, b: b * factor },
        };
        match spec.kind {
            MeshKind::Rectangle => {
                let Geometry::Rectangle { a, b } = spec.geometry else { unreachable!() };
                Mesh::rectangle_coarse(a, b, spec.resolution[0], spec.resolution[1])
            }
            _ => spec.build(),
        }
    }
}

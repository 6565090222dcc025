//! Extremal members of a rearrangement class.
//!
//! Every operation here is the same kernel: order the cells by a weight
//! (ties broken by ascending cell index), order the class values, and walk
//! both in cumulative measure. A cell takes the value whose measure interval
//! contains the cell's cumulative midpoint, so on meshes with unequal cells
//! the output reproduces the class up to one cell of measure per level.

use serde::Serialize;

use crate::error::{check_len, Error, Result};
use crate::field::{distribution_of, Distribution, Field};
use crate::mesh::Mesh;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Order {
    Ascending,
    Descending,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Rearranged {
    pub field: Field,
    /// Largest `| |{out ≥ α}| − |{class ≥ α}| |` over the class levels.
    pub measure_error: f64,
    /// Cells whose weight equals that of another cell; their placement was
    /// decided by the index tie-break.
    pub tied_cells: usize,
}

impl Rearranged {
    pub fn into_field(self) -> Field {
        self.field
    }
}

fn ordered_cells(weight: &[f64], order: Order) -> Vec<usize> {
    let mut cells: Vec<usize> = (0..weight.len()).collect();
    match order {
        Order::Ascending => cells.sort_by(|&a, &b| weight[a].total_cmp(&weight[b]).then(a.cmp(&b))),
        Order::Descending => cells.sort_by(|&a, &b| weight[b].total_cmp(&weight[a]).then(a.cmp(&b))),
    }
    cells
}

fn tied_cells(weight: &[f64], sorted: &[usize]) -> usize {
    (0..sorted.len())
        .filter(|&k| {
            (k > 0 && weight[sorted[k]] == weight[sorted[k - 1]])
                || (k + 1 < sorted.len() && weight[sorted[k]] == weight[sorted[k + 1]])
        })
        .count()
}

fn assign(mesh: &Mesh, dist: &Distribution, weight: &[f64], cells: Order, values: Order) -> Result<Rearranged> {
    check_len(mesh.len(), weight.len())?;
    let area: f64 = mesh.measures().iter().sum();
    if (dist.total_measure() - area).abs() > 1e-9 * area {
        return Err(Error::InvalidArgument(format!(
            "class measure {} does not match the mesh area {area}",
            dist.total_measure()
        )));
    }
    let order = ordered_cells(weight, cells);
    let levels: Vec<_> = match values {
        Order::Descending => dist.levels().to_vec(),
        Order::Ascending => dist.levels().iter().rev().cloned().collect(),
    };
    // distances are measured in the mesh's own total so rounding in the class
    // total cannot push the last cell past the end
    let scale = area / dist.total_measure();
    let mut out = vec![0.0; mesh.len()];
    let mut level = 0usize;
    let mut level_end = levels[0].measure * scale;
    let mut consumed = 0.0;
    for &cell in &order {
        let m = mesh.measures()[cell];
        let mid = consumed + 0.5 * m;
        while mid >= level_end && level + 1 < levels.len() {
            level += 1;
            level_end += levels[level].measure * scale;
        }
        out[cell] = levels[level].value;
        consumed += m;
    }
    let produced = distribution_of(mesh, &out)?;
    let measure_error = dist
        .levels()
        .iter()
        .map(|l| (produced.measure_at_least(l.value) - dist.measure_at_least(l.value)).abs())
        .fold(0.0, f64::max);
    Ok(Rearranged { field: Field::new(out), measure_error, tied_cells: tied_cells(weight, &order) })
}

fn require_characteristic(dist: &Distribution) -> Result<()> {
    if dist.as_characteristic().is_none() {
        return Err(Error::InvalidArgument(format!(
            "bathtub update needs a characteristic class, got {} levels",
            dist.levels().len()
        )));
    }
    Ok(())
}

fn require_nonnegative(w: &[f64]) -> Result<()> {
    if w.iter().any(|v| !(*v >= 0.0)) {
        return Err(Error::InvalidArgument("weight must be nonnegative".into()));
    }
    Ok(())
}

/// Minimizer of `∫ q w` over a characteristic class: the height sits on the
/// cells with the smallest weight.
pub fn bathtub_min(mesh: &Mesh, dist: &Distribution, w: &[f64]) -> Result<Rearranged> {
    require_characteristic(dist)?;
    require_nonnegative(w)?;
    assign(mesh, dist, w, Order::Ascending, Order::Descending)
}

/// Maximizer of `∫ q w` over a characteristic class.
pub fn bathtub_max(mesh: &Mesh, dist: &Distribution, w: &[f64]) -> Result<Rearranged> {
    require_characteristic(dist)?;
    require_nonnegative(w)?;
    assign(mesh, dist, w, Order::Descending, Order::Descending)
}

/// Member of the class arranged oppositely to `w` (large values where `w` is
/// small); minimizes `∫ f w` over the class.
pub fn opposite_rearrangement(mesh: &Mesh, dist: &Distribution, w: &[f64]) -> Result<Rearranged> {
    assign(mesh, dist, w, Order::Ascending, Order::Descending)
}

/// Member of the class arranged like `w`; maximizes `∫ f w` over the class.
pub fn similar_rearrangement(mesh: &Mesh, dist: &Distribution, w: &[f64]) -> Result<Rearranged> {
    assign(mesh, dist, w, Order::Ascending, Order::Ascending)
}

fn decreasing_radial_weight(mesh: &Mesh) -> Result<Vec<f64>> {
    let crate::mesh::Geometry::Disk { radius } = mesh.geometry() else {
        return Err(Error::InvalidArgument("Schwarz rearrangement needs a disk mesh".into()));
    };
    Ok((0..mesh.len()).map(|i| radius - mesh.radial_distance(i)).collect())
}

/// Radial, nondecreasing in r.
pub fn schwarz_increasing(mesh: &Mesh, dist: &Distribution) -> Result<Rearranged> {
    let w = decreasing_radial_weight(mesh)?;
    opposite_rearrangement(mesh, dist, &w)
}

/// Radial, nonincreasing in r.
pub fn schwarz_decreasing(mesh: &Mesh, dist: &Distribution) -> Result<Rearranged> {
    let w = decreasing_radial_weight(mesh)?;
    similar_rearrangement(mesh, dist, &w)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::field::is_rearrangement_within;

    fn unit_mesh(n: usize) -> Mesh {
        Mesh::rectangle_coarse(n as f64, 1.0, n, 1).unwrap()
    }

    const W: [f64; 4] = [0.1, 0.4, 0.2, 0.3];

    #[test]
    fn bathtub_examples() {
        let mesh = unit_mesh(4);
        let d = Distribution::characteristic(5.0, 2.0, 4.0).unwrap();
        assert_eq!(*bathtub_min(&mesh, &d, &W).unwrap().field, [5.0, 0.0, 5.0, 0.0]);
        assert_eq!(*bathtub_max(&mesh, &d, &W).unwrap().field, [0.0, 5.0, 0.0, 5.0]);
        let flat = bathtub_min(&mesh, &d, &[1.0; 4]).unwrap();
        assert_eq!(*flat.field, [5.0, 5.0, 0.0, 0.0]);
        assert_eq!(flat.tied_cells, 4);
        let multi = Distribution::from_pairs([(3.0, 1.0), (1.0, 2.0), (0.0, 1.0)]).unwrap();
        assert!(bathtub_min(&mesh, &multi, &W).is_err());
        assert!(bathtub_max(&mesh, &d, &[0.1, -0.4, 0.2, 0.3]).is_err());
    }

    #[test]
    fn monotone_rearrangement_examples() {
        let mesh = unit_mesh(4);
        let d = Distribution::from_pairs([(3.0, 1.0), (1.0, 2.0), (0.0, 1.0)]).unwrap();
        assert_eq!(*opposite_rearrangement(&mesh, &d, &W).unwrap().field, [3.0, 0.0, 1.0, 1.0]);
        assert_eq!(*similar_rearrangement(&mesh, &d, &W).unwrap().field, [0.0, 3.0, 1.0, 1.0]);
        assert_eq!(*similar_rearrangement(&mesh, &d, &[2.0; 4]).unwrap().field, [0.0, 1.0, 1.0, 3.0]);
        let f = [0.5, 2.0, 1.5, 0.0];
        let df = distribution_of(&mesh, &f).unwrap();
        let sorted_w = [0.0, 1.0, 2.0, 3.0];
        assert_eq!(*opposite_rearrangement(&mesh, &df, &sorted_w).unwrap().field, [2.0, 1.5, 0.5, 0.0]);
    }

    #[test]
    fn schwarz_annuli_match_disk_example() {
        let mesh = Mesh::disk_radial(2.4, 4096).unwrap();
        let area = mesh.area();
        let q0 = Distribution::characteristic(2.13, 3.842, area).unwrap();
        let q = schwarz_increasing(&mesh, &q0).unwrap();
        let inner = (0..mesh.len()).find(|&i| q.field[i] > 0.0).unwrap();
        let r = mesh.radial_distance(inner);
        let h = 2.4 / 4096.0;
        let expected = (2.4f64.powi(2) - 3.842 / std::f64::consts::PI).sqrt();
        assert!((r - expected).abs() <= h, "inner radius {r}");
        assert!((expected - 2.13).abs() < 1e-3);
        assert!(q.field[inner..].iter().all(|&v| v == 2.13));
        assert!(q.measure_error <= mesh.max_measure());

        let p0 = Distribution::characteristic(0.27, 2.049, area).unwrap();
        let p = schwarz_increasing(&mesh, &p0).unwrap();
        let inner = (0..mesh.len()).find(|&i| p.field[i] > 0.0).unwrap();
        assert!((mesh.radial_distance(inner) - 2.26).abs() < 2e-3);

        let c = Distribution::constant(0.7, area).unwrap();
        assert!(schwarz_increasing(&mesh, &c).unwrap().field.iter().all(|&v| v == 0.7));
    }

    #[test]
    fn schwarz_decreasing_fills_central_disk() {
        let mesh = Mesh::disk_radial(1.0, 100).unwrap();
        let d = Distribution::characteristic(1.0, std::f64::consts::PI * 0.25, mesh.area()).unwrap();
        let out = schwarz_decreasing(&mesh, &d).unwrap().field;
        for i in 0..mesh.len() {
            assert_eq!(out[i] > 0.0, mesh.radial_distance(i) < 0.5);
        }
        let rect = Mesh::rectangle(1.0, 1.0, 8, 8).unwrap();
        assert!(schwarz_decreasing(&rect, &Distribution::constant(1.0, 1.0).unwrap()).is_err());
    }

    #[test]
    fn schwarz_is_idempotent_and_preserves_class() {
        let mesh = Mesh::disk_radial(2.0, 257).unwrap();
        let f: Vec<f64> = (0..mesh.len()).map(|i| ((i * 37) % 11) as f64 * 0.1).collect();
        let d = distribution_of(&mesh, &f).unwrap();
        let once = schwarz_increasing(&mesh, &d).unwrap().field;
        let twice = schwarz_increasing(&mesh, &distribution_of(&mesh, &once).unwrap()).unwrap().field;
        assert_eq!(once, twice);
        assert!(once.windows(2).all(|w| w[0] <= w[1]));
        assert!(is_rearrangement_within(&mesh, &f, &once, 1e-12, mesh.max_measure()).unwrap());
    }

    #[test]
    fn mismatched_class_measure_is_rejected() {
        let mesh = unit_mesh(4);
        let d = Distribution::characteristic(1.0, 1.0, 5.0).unwrap();
        assert!(opposite_rearrangement(&mesh, &d, &W).is_err());
    }
}

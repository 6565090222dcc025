//! Cell fields and their distribution functions.

use std::ops::{Deref, DerefMut};
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{check_len, Error, Result};
use crate::mesh::Mesh;

/// One value per mesh cell.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(transparent)]
pub struct Field(Vec<f64>);

impl Field {
    pub fn new(values: Vec<f64>) -> Self {
        Self(values)
    }

    pub fn constant(len: usize, value: f64) -> Self {
        Self(vec![value; len])
    }

    pub fn zeros(len: usize) -> Self {
        Self::constant(len, 0.0)
    }

    pub fn into_inner(self) -> Vec<f64> {
        self.0
    }

    pub fn max(&self) -> f64 {
        self.0.iter().cloned().fold(f64::NEG_INFINITY, f64::max)
    }

    pub fn min(&self) -> f64 {
        self.0.iter().cloned().fold(f64::INFINITY, f64::min)
    }

    /// Pointwise square, the weight used by every potential update.
    pub fn squared(&self) -> Field {
        Field(self.0.iter().map(|v| v * v).collect())
    }
}

impl Deref for Field {
    type Target = [f64];
    fn deref(&self) -> &[f64] {
        &self.0
    }
}

impl DerefMut for Field {
    fn deref_mut(&mut self) -> &mut [f64] {
        &mut self.0
    }
}

impl From<Vec<f64>> for Field {
    fn from(values: Vec<f64>) -> Self {
        Self(values)
    }
}

impl FromIterator<f64> for Field {
    fn from_iter<I: IntoIterator<Item = f64>>(iter: I) -> Self {
        Self(iter.into_iter().collect())
    }
}

/// A level of a distribution: `measure` is the area on which the value is taken.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Level {
    pub value: f64,
    pub measure: f64,
}

/// The discrete identity of a rearrangement class: values strictly
/// decreasing, measures positive, summing to the domain area.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Distribution {
    levels: Vec<Level>,
    total_measure: f64,
}

impl Distribution {
    /// Builds a distribution from arbitrary `(value, measure)` pairs, merging
    /// equal values.
    pub fn from_pairs(pairs: impl IntoIterator<Item = (f64, f64)>) -> Result<Self> {
        let mut levels: Vec<Level> = Vec::new();
        for (value, measure) in pairs {
            if !value.is_finite() || !measure.is_finite() || measure <= 0.0 {
                return Err(Error::InvalidArgument(format!(
                    "distribution level ({value}, {measure}) needs a finite value and positive measure"
                )));
            }
            levels.push(Level { value, measure });
        }
        if levels.is_empty() {
            return Err(Error::InvalidArgument("distribution needs at least one level".into()));
        }
        levels.sort_by(|a, b| b.value.total_cmp(&a.value));
        let mut merged: Vec<Level> = Vec::with_capacity(levels.len());
        for level in levels {
            match merged.last_mut() {
                Some(last) if last.value == level.value => last.measure += level.measure,
                _ => merged.push(level),
            }
        }
        let total_measure = merged.iter().map(|l| l.measure).sum();
        Ok(Self { levels: merged, total_measure })
    }

    /// Characteristic class: `height` on a set of measure `support`, zero on
    /// the rest of a domain of area `total`.
    pub fn characteristic(height: f64, support: f64, total: f64) -> Result<Self> {
        if !(support >= 0.0 && support <= total * (1.0 + 1e-12)) {
            return Err(Error::InvalidArgument(format!(
                "support measure {support} outside [0, {total}]"
            )));
        }
        if height < 0.0 {
            return Err(Error::InvalidArgument(format!("height {height} must be nonnegative")));
        }
        let support = support.min(total);
        let mut pairs = Vec::with_capacity(2);
        if support > 0.0 {
            pairs.push((height, support));
        }
        if total - support > 0.0 {
            pairs.push((0.0, total - support));
        }
        Self::from_pairs(pairs)
    }

    /// Distribution of a nonnegative field with given level values and the
    /// remainder of the domain at zero.
    pub fn with_zero_remainder(levels: &[(f64, f64)], total: f64) -> Result<Self> {
        let used: f64 = levels.iter().map(|l| l.1).sum();
        if used > total * (1.0 + 1e-12) {
            return Err(Error::InvalidArgument(format!(
                "level measures sum to {used}, exceeding the domain area {total}"
            )));
        }
        let mut pairs = levels.to_vec();
        if total - used > 1e-12 * total {
            pairs.push((0.0, total - used));
        }
        Self::from_pairs(pairs)
    }

    pub fn constant(value: f64, total: f64) -> Result<Self> {
        Self::from_pairs([(value, total)])
    }

    pub fn levels(&self) -> &[Level] {
        &self.levels
    }

    pub fn total_measure(&self) -> f64 {
        self.total_measure
    }

    pub fn max_value(&self) -> f64 {
        self.levels[0].value
    }

    pub fn min_value(&self) -> f64 {
        self.levels[self.levels.len() - 1].value
    }

    /// `(height, support measure)` if the class consists of characteristic
    /// functions (zero or one nonzero level, remainder at zero).
    pub fn as_characteristic(&self) -> Option<(f64, f64)> {
        match self.levels.as_slice() {
            [only] if only.value == 0.0 => Some((0.0, 0.0)),
            [only] => Some((only.value, only.measure)),
            [top, rest] if rest.value == 0.0 => Some((top.value, top.measure)),
            _ => None,
        }
    }

    pub fn is_nonnegative(&self) -> bool {
        self.min_value() >= 0.0
    }

    /// `|{f ≥ alpha}|`.
    pub fn measure_at_least(&self, alpha: f64) -> f64 {
        self.levels.iter().take_while(|l| l.value >= alpha).map(|l| l.measure).sum()
    }

    /// Integral of `|f|^power` over the domain.
    pub fn norm_power(&self, power: f64) -> f64 {
        self.levels.iter().map(|l| l.value.abs().powf(power) * l.measure).sum()
    }
}

/// Exact multiset of (value, summed measure) of `f`.
pub fn distribution_of(mesh: &Mesh, f: &[f64]) -> Result<Distribution> {
    check_len(mesh.len(), f.len())?;
    Distribution::from_pairs(f.iter().cloned().zip(mesh.measures().iter().cloned()))
}

/// `true` iff `f` and `g` are rearrangements of each other up to `tol` in value
/// and `tol` in measure.
pub fn is_rearrangement(mesh: &Mesh, f: &[f64], g: &[f64], tol: f64) -> Result<bool> {
    is_rearrangement_within(mesh, f, g, tol, tol)
}

/// Compares the distribution functions `α ↦ |{f ≥ α}|` and `α ↦ |{g ≥ α}|`:
/// accepted when `D_f(α + value_tol) − measure_tol ≤ D_g(α) ≤ D_f(α − value_tol) + measure_tol`
/// for every `α`, and symmetrically.
pub fn is_rearrangement_within(
    mesh: &Mesh,
    f: &[f64],
    g: &[f64],
    value_tol: f64,
    measure_tol: f64,
) -> Result<bool> {
    let df = distribution_of(mesh, f)?;
    let dg = distribution_of(mesh, g)?;
    Ok(distributions_match(&df, &dg, value_tol, measure_tol))
}

pub fn distributions_match(a: &Distribution, b: &Distribution, value_tol: f64, measure_tol: f64) -> bool {
    one_sided_match(a, b, value_tol, measure_tol) && one_sided_match(b, a, value_tol, measure_tol)
}

fn one_sided_match(a: &Distribution, b: &Distribution, vt: f64, mt: f64) -> bool {
    // Both distribution functions are step functions with jumps at level
    // values; the extremes of their difference sit at a breakpoint or just
    // above one.
    let mut probes = Vec::with_capacity(4 * (a.levels.len() + b.levels.len()));
    for l in a.levels.iter().chain(&b.levels) {
        for p in [l.value, l.value - vt, l.value + vt] {
            probes.push(p);
            probes.push(p.next_up());
        }
    }
    probes.iter().all(|&alpha| {
        let db = b.measure_at_least(alpha);
        a.measure_at_least(alpha + vt) - mt <= db && db <= a.measure_at_least(alpha - vt) + mt
    })
}

/// `height` on cells with `inner < r ≤ outer`, zero elsewhere.
pub fn make_annular_characteristic(mesh: &Mesh, height: f64, inner: f64, outer: f64) -> Result<Field> {
    if !mesh.is_disk() {
        return Err(Error::InvalidArgument("annular fields need a disk mesh".into()));
    }
    if !(inner >= 0.0 && inner < outer) {
        return Err(Error::InvalidArgument(format!("annulus needs 0 <= inner < outer, got ({inner}, {outer})")));
    }
    Ok((0..mesh.len())
        .map(|i| {
            let r = mesh.radial_distance(i);
            if r > inner && r <= outer {
                height
            } else {
                0.0
            }
        })
        .collect())
}

/// Rejects fields with non-finite or negative entries.
pub fn check_potential(name: &str, f: &[f64]) -> Result<()> {
    if let Some((i, v)) = f.iter().enumerate().find(|(_, v)| !(v.is_finite() && **v >= 0.0)) {
        return Err(Error::InvalidArgument(format!("{name}[{i}] = {v} is not a finite nonnegative value")));
    }
    Ok(())
}

/// Measure-weighted L¹ distance.
pub fn l1_distance(mesh: &Mesh, f: &[f64], g: &[f64]) -> Result<f64> {
    check_len(mesh.len(), f.len())?;
    check_len(mesh.len(), g.len())?;
    Ok(f.iter().zip(g).zip(mesh.measures()).map(|((a, b), m)| (a - b).abs() * m).sum())
}

/// Writes `cell_index, coord1, coord2, measure, value` rows.
pub fn write_field_csv(mesh: &Mesh, f: &[f64], path: &Path) -> Result<()> {
    check_len(mesh.len(), f.len())?;
    let mut out = csv::WriterBuilder::new()
        .terminator(csv::Terminator::Any(b'\n'))
        .from_path(path)?;
    out.write_record(["cell_index", "coord1", "coord2", "measure", "value"])?;
    for (i, v) in f.iter().enumerate() {
        let c = mesh.centers()[i];
        out.write_record([
            i.to_string(),
            c[0].to_string(),
            c[1].to_string(),
            mesh.measures()[i].to_string(),
            v.to_string(),
        ])?;
    }
    out.flush()?;
    Ok(())
}

/// Reads the `value` column of a field CSV, checking cell indices and count.
pub fn read_field_csv(mesh: &Mesh, path: &Path) -> Result<Field> {
    let mut rdr = csv::Reader::from_path(path)?;
    let mut values = Vec::with_capacity(mesh.len());
    for (row, record) in rdr.records().enumerate() {
        let record = record?;
        let parse = |col: usize| -> Result<f64> {
            record
                .get(col)
                .ok_or_else(|| Error::Config(format!("{}: row {} has no column {col}", path.display(), row + 2)))?
                .trim()
                .parse::<f64>()
                .map_err(|e| Error::Config(format!("{}: row {}: {e}", path.display(), row + 2)))
        };
        let index = parse(0)?;
        if index != row as f64 {
            return Err(Error::Config(format!(
                "{}: row {} has cell_index {index}, expected {row}",
                path.display(),
                row + 2
            )));
        }
        values.push(parse(4)?);
    }
    check_len(mesh.len(), values.len())?;
    Ok(Field::new(values))
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn unit_mesh(nx: usize, ny: usize) -> Mesh {
        Mesh::rectangle_coarse(nx as f64, ny as f64, nx, ny).unwrap()
    }

    #[test]
    fn distribution_merges_and_sorts() {
        let mesh = unit_mesh(4, 1);
        let d = distribution_of(&mesh, &[2.0, 0.0, 2.0, 1.0]).unwrap();
        let got: Vec<(f64, f64)> = d.levels().iter().map(|l| (l.value, l.measure)).collect();
        assert_eq!(got, vec![(2.0, 2.0), (1.0, 1.0), (0.0, 1.0)]);
        assert_eq!(d.total_measure(), 4.0);
        let c = distribution_of(&mesh, &[3.5; 4]).unwrap();
        assert_eq!(c.levels(), &[Level { value: 3.5, measure: 4.0 }]);
    }

    #[test]
    fn permutation_is_a_rearrangement_and_shift_is_not() {
        let mesh = unit_mesh(3, 2);
        let f = [0.3, 1.0, 0.0, 0.3, 2.0, 0.7];
        let g = [2.0, 0.3, 0.7, 0.0, 0.3, 1.0];
        assert!(is_rearrangement(&mesh, &f, &g, 1e-12).unwrap());
        let shifted: Vec<f64> = f.iter().map(|v| v + 1e-6).collect();
        assert!(!is_rearrangement(&mesh, &f, &shifted, 1e-9).unwrap());
        assert!(is_rearrangement(&mesh, &f, &shifted, 1e-5).unwrap());
    }

    #[test]
    fn measure_tolerance_admits_one_cell_shift() {
        let mesh = Mesh::disk_radial(1.0, 16).unwrap();
        let f = make_annular_characteristic(&mesh, 1.0, 0.5, 1.0).unwrap();
        let g = make_annular_characteristic(&mesh, 1.0, 0.45, 1.0).unwrap();
        assert!(!is_rearrangement(&mesh, &f, &g, 1e-12).unwrap());
        assert!(is_rearrangement_within(&mesh, &f, &g, 1e-12, mesh.max_measure()).unwrap());
    }

    #[test]
    fn characteristic_class_detection() {
        let d = Distribution::characteristic(2.0, 1.0, 4.0).unwrap();
        assert_eq!(d.as_characteristic(), Some((2.0, 1.0)));
        let zero = Distribution::characteristic(2.0, 0.0, 4.0).unwrap();
        assert_eq!(zero.as_characteristic(), Some((0.0, 0.0)));
        let full = Distribution::characteristic(2.0, 4.0, 4.0).unwrap();
        assert_eq!(full.as_characteristic(), Some((2.0, 4.0)));
        let multi = Distribution::from_pairs([(3.0, 1.0), (1.0, 2.0), (0.0, 1.0)]).unwrap();
        assert_eq!(multi.as_characteristic(), None);
        assert!(Distribution::from_pairs([(1.0, -1.0)]).is_err());
        assert!(Distribution::characteristic(1.0, 5.0, 4.0).is_err());
    }

    #[test]
    fn annulus_fields() {
        let mesh = Mesh::disk_radial(2.4, 4096).unwrap();
        let full = make_annular_characteristic(&mesh, 1.5, 0.0, 2.4).unwrap();
        assert!(full.iter().all(|&v| v == 1.5));
        let q = make_annular_characteristic(&mesh, 2.13, 2.13, 2.4).unwrap();
        let area = mesh.integrate(&q).unwrap() / 2.13;
        let exact = std::f64::consts::PI * (2.4f64.powi(2) - 2.13f64.powi(2));
        assert!((area - exact).abs() <= mesh.max_measure());
        let d = distribution_of(&mesh, &q).unwrap();
        assert_eq!(d.levels().len(), 2);
        assert!((d.levels()[0].measure - 3.842).abs() < 1e-3 + mesh.max_measure());
        assert!((d.levels()[1].measure - 14.254).abs() < 1e-3 + mesh.max_measure());
        let rect = Mesh::rectangle(1.0, 1.0, 8, 8).unwrap();
        assert!(make_annular_characteristic(&rect, 1.0, 0.0, 0.5).is_err());
        assert!(make_annular_characteristic(&mesh, 1.0, 1.0, 0.5).is_err());
    }

    #[test]
    fn csv_round_trip_is_bit_identical() {
        let mesh = Mesh::disk_polar(1.3, 8, 8).unwrap();
        let f: Field = (0..mesh.len()).map(|i| (i as f64 * 0.7311).sin() / 3.0).collect();
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("f.csv");
        write_field_csv(&mesh, &f, &path).unwrap();
        let back = read_field_csv(&mesh, &path).unwrap();
        assert!(f.iter().zip(back.iter()).all(|(a, b)| a.to_bits() == b.to_bits()));
        let text = std::fs::read_to_string(&path).unwrap();
        assert!(text.starts_with("cell_index,coord1,coord2,measure,value\n"));
        assert!(!text.contains('\r'));
    }

    proptest! {
        #[test]
        fn distribution_is_permutation_invariant(
            values in proptest::collection::vec(0u8..5, 12),
            seed in any::<u64>(),
        ) {
            use rand::{seq::SliceRandom, SeedableRng};
            let mesh = unit_mesh(4, 3);
            let f: Vec<f64> = values.iter().map(|&v| v as f64 * 0.25).collect();
            let mut g = f.clone();
            g.shuffle(&mut rand_chacha::ChaCha8Rng::seed_from_u64(seed));
            let df = distribution_of(&mesh, &f).unwrap();
            prop_assert_eq!(&df, &distribution_of(&mesh, &g).unwrap());
            prop_assert!((df.total_measure() - mesh.area()).abs() <= 1e-12 * mesh.area());
            // equal distributions give equal L¹ and L² norms
            let l1f = mesh.integrate(&f).unwrap();
            let l1g = mesh.integrate(&g).unwrap();
            prop_assert!((l1f - l1g).abs() <= 1e-10 * l1f.max(1.0));
            let l2f = mesh.weighted_square(&vec![1.0; 12], &f).unwrap();
            let l2g = mesh.weighted_square(&vec![1.0; 12], &g).unwrap();
            prop_assert!((l2f - l2g).abs() <= 1e-10 * l2f.max(1.0));
        }
    }
}

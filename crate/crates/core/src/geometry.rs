//! Discretized environment: cells, their centers and extents.
//!
//! Positions are Cartesian meters. A [`CellMap`] is immutable once built and
//! caches the full pairwise center-distance table, which every likelihood
//! evaluation reads.

use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Index of a cell inside a [`CellMap`].
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(transparent)]
pub struct CellId(pub usize);

impl CellId {
    #[inline]
    pub fn index(self) -> usize {
        self.0
    }
}

impl std::fmt::Display for CellId {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "{}", self.0)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
#[serde(from = "[f64; 3]", into = "[f64; 3]")]
pub struct Position3 {
    pub x: f64,
    pub y: f64,
    pub z: f64,
}

impl Position3 {
    pub const fn new(x: f64, y: f64, z: f64) -> Self {
        Self { x, y, z }
    }

    pub fn is_finite(&self) -> bool {
        self.x.is_finite() && self.y.is_finite() && self.z.is_finite()
    }

    pub fn distance(&self, other: &Position3) -> f64 {
        let dx = self.x - other.x;
        let dy = self.y - other.y;
        let dz = self.z - other.z;
        (dx * dx + dy * dy + dz * dz).sqrt()
    }

    pub fn to_array(self) -> [f64; 3] {
        [self.x, self.y, self.z]
    }
}

impl From<[f64; 3]> for Position3 {
    fn from(a: [f64; 3]) -> Self {
        Self::new(a[0], a[1], a[2])
    }
}

impl From<Position3> for [f64; 3] {
    fn from(p: Position3) -> Self {
        p.to_array()
    }
}

/// One record of the cell map file.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct CellRecord {
    pub id: usize,
    pub center: [f64; 3],
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub extent: Option<[f64; 3]>,
}

#[derive(Debug, Clone)]
pub struct CellMap {
    centers: Vec<Position3>,
    extents: Vec<[f64; 3]>,
    quantization: f64,
    distances: Vec<f64>,
}

impl CellMap {
    /// Builds a map from centers and per-dimension extents, indexed by cell id.
    pub fn new(centers: Vec<Position3>, extents: Vec<[f64; 3]>) -> Result<Self> {
        if centers.is_empty() {
            return Err(Error::InvalidMap("map has no cells".into()));
        }
        if centers.len() != extents.len() {
            return Err(Error::InvalidMap(format!(
                "{} centers but {} extents",
                centers.len(),
                extents.len()
            )));
        }
        for (i, c) in centers.iter().enumerate() {
            if !c.is_finite() {
                return Err(Error::InvalidMap(format!("cell {i} has a non-finite center")));
            }
        }
        for (i, e) in extents.iter().enumerate() {
            if e.iter().any(|v| !v.is_finite() || *v < 0.0) {
                return Err(Error::InvalidMap(format!(
                    "cell {i} has a negative or non-finite extent"
                )));
            }
        }
        let quantization = compute_quantization(&extents)?;
        let n = centers.len();
        let mut distances = vec![0.0; n * n];
        for a in 0..n {
            for b in (a + 1)..n {
                let d = centers[a].distance(&centers[b]);
                distances[a * n + b] = d;
                distances[b * n + a] = d;
            }
        }
        Ok(Self {
            centers,
            extents,
            quantization,
            distances,
        })
    }

    /// Builds a map where every cell has the same cubic extent.
    pub fn with_uniform_extent(centers: Vec<Position3>, extent: f64) -> Result<Self> {
        let extents = vec![[extent; 3]; centers.len()];
        Self::new(centers, extents)
    }

    /// Builds a map from file records. Records lacking `extent` take
    /// `default_extent`; if that is `None` such records are rejected.
    pub fn from_records(records: &[CellRecord], default_extent: Option<f64>) -> Result<Self> {
        let n = records.len();
        let mut slots: Vec<Option<(Position3, [f64; 3])>> = vec![None; n];
        for r in records {
            if r.id >= n {
                return Err(Error::InvalidMap(format!(
                    "cell id {} out of range for {n} records (ids must be 0..{n})",
                    r.id
                )));
            }
            if slots[r.id].is_some() {
                return Err(Error::InvalidMap(format!("duplicate cell id {}", r.id)));
            }
            let extent = match (r.extent, default_extent) {
                (Some(e), _) => e,
                (None, Some(d)) => [d; 3],
                (None, None) => {
                    return Err(Error::InvalidMap(format!(
                        "cell {} has no extent and no default extent was configured",
                        r.id
                    )))
                }
            };
            slots[r.id] = Some((Position3::from(r.center), extent));
        }
        let (centers, extents) = slots.into_iter().map(|s| s.expect("dense ids")).unzip();
        Self::new(centers, extents)
    }

    pub fn from_json_str(json: &str, default_extent: Option<f64>) -> Result<Self> {
        let records: Vec<CellRecord> =
            serde_json::from_str(json).map_err(|e| Error::json("cell map", e))?;
        Self::from_records(&records, default_extent)
    }

    pub fn load(path: impl AsRef<Path>, default_extent: Option<f64>) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let records: Vec<CellRecord> = serde_json::from_str(&text)
            .map_err(|e| Error::json(path.display().to_string(), e))?;
        Self::from_records(&records, default_extent)
    }

    pub fn records(&self) -> Vec<CellRecord> {
        self.centers
            .iter()
            .zip(&self.extents)
            .enumerate()
            .map(|(id, (c, e))| CellRecord {
                id,
                center: c.to_array(),
                extent: Some(*e),
            })
            .collect()
    }

    pub fn to_json_string(&self) -> String {
        serde_json::to_string_pretty(&self.records()).expect("cell records serialize")
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        std::fs::write(path, self.to_json_string() + "\n").map_err(|e| Error::io(path, e))
    }

    #[inline]
    pub fn len(&self) -> usize {
        self.centers.len()
    }

    #[inline]
    pub fn is_empty(&self) -> bool {
        self.centers.is_empty()
    }

    /// Circumscribed-cube edge length: the largest per-dimension extent over all cells.
    #[inline]
    pub fn quantization(&self) -> f64 {
        self.quantization
    }

    pub fn cells(&self) -> impl Iterator<Item = CellId> {
        (0..self.len()).map(CellId)
    }

    pub fn check(&self, id: CellId) -> Result<()> {
        if id.0 < self.len() {
            Ok(())
        } else {
            Err(Error::InvalidCell {
                id: id.0,
                cells: self.len(),
            })
        }
    }

    pub fn center(&self, id: CellId) -> Result<Position3> {
        self.check(id)?;
        Ok(self.centers[id.0])
    }

    pub fn centers(&self) -> &[Position3] {
        &self.centers
    }

    pub fn extents(&self) -> &[[f64; 3]] {
        &self.extents
    }

    /// Euclidean distance between the centers of two cells.
    pub fn cell_distance(&self, a: CellId, b: CellId) -> Result<f64> {
        self.check(a)?;
        self.check(b)?;
        Ok(self.distances[a.0 * self.len() + b.0])
    }

    /// Unchecked distance lookup by raw index for inner loops.
    #[inline]
    pub(crate) fn distance_raw(&self, a: usize, b: usize) -> f64 {
        self.distances[a * self.centers.len() + b]
    }

    /// Cell whose center is closest to `p`; lower id wins ties.
    pub fn nearest_cell(&self, p: &Position3) -> CellId {
        let mut best = 0;
        let mut best_d = f64::INFINITY;
        for (i, c) in self.centers.iter().enumerate() {
            let d = c.distance(p);
            if d < best_d {
                best_d = d;
                best = i;
            }
        }
        CellId(best)
    }
}

/// Largest per-dimension extent over all cells.
pub fn compute_quantization(extents: &[[f64; 3]]) -> Result<f64> {
    if extents.is_empty() {
        return Err(Error::InvalidMap("map has no cells".into()));
    }
    Ok(extents
        .iter()
        .flat_map(|e| e.iter().copied())
        .fold(0.0_f64, f64::max))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn line_map(n: usize, pitch: f64) -> CellMap {
        let centers = (0..n).map(|i| Position3::new(i as f64 * pitch, 0.0, 0.0)).collect();
        CellMap::with_uniform_extent(centers, pitch).unwrap()
    }

    #[test]
    fn distance_identity_and_pythagoras() {
        let map = CellMap::with_uniform_extent(
            vec![Position3::new(0.0, 0.0, 0.0), Position3::new(3.0, 4.0, 0.0)],
            1.0,
        )
        .unwrap();
        assert_eq!(map.cell_distance(CellId(0), CellId(0)).unwrap(), 0.0);
        assert_eq!(map.cell_distance(CellId(0), CellId(1)).unwrap(), 5.0);
        assert_eq!(map.cell_distance(CellId(1), CellId(0)).unwrap(), 5.0);
    }

    #[test]
    fn invalid_cell_is_rejected() {
        let map = line_map(3, 1.0);
        assert!(matches!(
            map.cell_distance(CellId(0), CellId(3)),
            Err(Error::InvalidCell { id: 3, cells: 3 })
        ));
    }

    #[test]
    fn corridor_max_distance_matches_length() {
        // 44 cells at 2.5 m pitch span 107.5 m between the extreme centers.
        let map = line_map(44, 2.5);
        let mut max = 0.0_f64;
        for a in map.cells() {
            for b in map.cells() {
                max = max.max(map.cell_distance(a, b).unwrap());
            }
        }
        assert!((max - 43.0 * 2.5).abs() < 1e-12);
    }

    #[test]
    fn quantization_is_max_extent() {
        let c = vec![Position3::default(); 3];
        let m = CellMap::new(c, vec![[3.0; 3], [4.0; 3], [6.0; 3]]).unwrap();
        assert_eq!(m.quantization(), 6.0);

        let single = CellMap::new(vec![Position3::default()], vec![[1.0, 2.0, 3.0]]).unwrap();
        assert_eq!(single.quantization(), 3.0);

        assert_eq!(line_map(44, 5.0).quantization(), 5.0);
        assert!(compute_quantization(&[]).is_err());
    }

    #[test]
    fn loader_validates_records() {
        let ok = r#"[{"id":1,"center":[5,0,0],"extent":[5,5,5]},{"id":0,"center":[0,0,0]}]"#;
        let map = CellMap::from_json_str(ok, Some(2.0)).unwrap();
        assert_eq!(map.len(), 2);
        assert_eq!(map.center(CellId(1)).unwrap(), Position3::new(5.0, 0.0, 0.0));
        assert_eq!(map.extents()[0], [2.0; 3]);
        assert!(CellMap::from_json_str(ok, None).is_err());

        let dup = r#"[{"id":0,"center":[0,0,0],"extent":[1,1,1]},{"id":0,"center":[1,0,0],"extent":[1,1,1]}]"#;
        assert!(CellMap::from_json_str(dup, None).is_err());

        let bad_extent = r#"[{"id":0,"center":[0,0,0],"extent":[-1,1,1]}]"#;
        assert!(CellMap::from_json_str(bad_extent, None).is_err());

        assert!(CellMap::from_json_str("[]", Some(1.0)).is_err());
    }

    #[test]
    fn json_round_trip_preserves_map() {
        let map = line_map(5, 5.0);
        let again = CellMap::from_json_str(&map.to_json_string(), None).unwrap();
        assert_eq!(again.centers(), map.centers());
        assert_eq!(again.quantization(), map.quantization());
    }

    #[test]
    fn nearest_cell_prefers_lower_id_on_tie() {
        let map = line_map(3, 2.0);
        assert_eq!(map.nearest_cell(&Position3::new(1.0, 0.0, 0.0)), CellId(0));
        assert_eq!(map.nearest_cell(&Position3::new(3.9, 0.0, 0.0)), CellId(2));
    }

    mod props {
        use super::*;
        use proptest::prelude::*;

        fn arb_map() -> impl Strategy<Value = (Vec<[f64; 3]>, Vec<[f64; 3]>)> {
            (1usize..7).prop_flat_map(|n| {
                (
                    prop::collection::vec(prop::array::uniform3(-50.0..50.0f64), n),
                    prop::collection::vec(prop::array::uniform3(0.0..10.0f64), n),
                )
            })
        }

        proptest! {
            #[test]
            fn triangle_inequality((centers, extents) in arb_map()) {
                let map = CellMap::new(centers.into_iter().map(Position3::from).collect(), extents).unwrap();
                for a in map.cells() {
                    for b in map.cells() {
                        for c in map.cells() {
                            let ab = map.cell_distance(a, b).unwrap();
                            let bc = map.cell_distance(b, c).unwrap();
                            let ac = map.cell_distance(a, c).unwrap();
                            prop_assert!(ac <= ab + bc + 1e-9);
                        }
                    }
                }
            }

            #[test]
            fn quantization_ignores_order((centers, mut extents) in arb_map(), seed in any::<u64>()) {
                let d1 = compute_quantization(&extents).unwrap();
                let n = extents.len();
                extents.rotate_left((seed as usize) % n);
                extents.reverse();
                prop_assert_eq!(d1, compute_quantization(&extents).unwrap());
                let _ = centers;
            }
        }
    }
}

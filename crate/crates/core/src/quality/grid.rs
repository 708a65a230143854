use std::collections::HashMap;

use crate::pointcloud::{Point3, PointCloud};

/// Hash grid over a reference cloud answering "is any point within `d`?".
///
/// Cells are a hair larger than `d` so that two points within `d` of each
/// other always land in the same or adjacent cells despite rounding in the
/// cell-index division. The distance test itself is the plain squared
/// Euclidean comparison, so results equal an exhaustive scan exactly.
pub struct UniformGrid {
    cell: f64,
    d2: f64,
    cells: HashMap<[i64; 3], Vec<[f64; 3]>>,
}

impl UniformGrid {
    pub fn build(reference: &PointCloud, d: f64) -> Self {
        let cell = d * (1.0 + 1e-6);
        let mut cells: HashMap<[i64; 3], Vec<[f64; 3]>> = HashMap::new();
        for p in &reference.points {
            cells.entry(key(p, cell)).or_default().push(p.coords());
        }
        Self { cell, d2: d * d, cells }
    }

    pub fn any_within(&self, p: &Point3) -> bool {
        let [kx, ky, kz] = key(p, self.cell);
        for dx in -1..=1 {
            for dy in -1..=1 {
                for dz in -1..=1 {
                    let Some(bucket) = self.cells.get(&[kx.saturating_add(dx), ky.saturating_add(dy), kz.saturating_add(dz)]) else {
                        continue;
                    };
                    let hit = bucket.iter().any(|r| {
                        let (ex, ey, ez) = (p.x - r[0], p.y - r[1], p.z - r[2]);
                        ex * ex + ey * ey + ez * ez <= self.d2
                    });
                    if hit {
                        return true;
                    }
                }
            }
        }
        false
    }
}

fn key(p: &Point3, cell: f64) -> [i64; 3] {
    [(p.x / cell).floor() as i64, (p.y / cell).floor() as i64, (p.z / cell).floor() as i64]
}

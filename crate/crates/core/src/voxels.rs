//! Dead-voxel filtering and per-voxel z-normalization.
//!
//! Statistics are population statistics (divide by T, not T-1). That choice
//! makes the later correlation step a plain dot product of z-scored rows
//! divided by T, which is what the tiled kernel computes.

use ndarray::Array2;

use crate::error::{Error, Result};
use crate::volume::{Volume4D, VolumeMask};

#[derive(Debug, Clone)]
pub struct IngestConfig {
    /// Voxels with population variance at or below this are treated as
    /// signal-free and dropped. Exact-zero tests are brittle on float data.
    pub dead_voxel_epsilon: f64,
    pub mask: Option<VolumeMask>,
}

impl Default for IngestConfig {
    fn default() -> Self {
        IngestConfig {
            dead_voxel_epsilon: 1e-12,
            mask: None,
        }
    }
}

/// Filtered, z-normalized voxel series with their grid coordinates.
///
/// Invariant: every row has mean 0 and population variance 1 (within float
/// tolerance); coordinates are unique, in scan order, inside the source grid.
#[derive(Debug, Clone)]
pub struct VoxelSet {
    coords: Vec<[u32; 3]>,
    series: Array2<f32>,
}

impl VoxelSet {
    pub fn new(coords: Vec<[u32; 3]>, series: Array2<f32>) -> Result<Self> {
        if coords.len() != series.nrows() {
            return Err(Error::LengthMismatch {
                left: coords.len(),
                right: series.nrows(),
            });
        }
        Ok(VoxelSet { coords, series })
    }

    pub fn n(&self) -> usize {
        self.coords.len()
    }

    pub fn t_len(&self) -> usize {
        self.series.ncols()
    }

    pub fn coords(&self) -> &[[u32; 3]] {
        &self.coords
    }

    pub fn series(&self) -> &Array2<f32> {
        &self.series
    }

    pub fn row(&self, i: usize) -> &[f32] {
        self.series.row(i).to_slice().expect("series is row-major")
    }
}

/// Population mean and variance in one pass over f64 accumulators.
pub(crate) fn mean_var(series: &[f32]) -> (f64, f64) {
    let t = series.len() as f64;
    let mut sum = 0.0f64;
    for &v in series {
        sum += v as f64;
    }
    let mean = sum / t;
    let mut ss = 0.0f64;
    for &v in series {
        let d = v as f64 - mean;
        ss += d * d;
    }
    (mean, ss / t)
}

/// Z-score a series against its population standard deviation.
///
/// Returns `None` for zero-variance input: that is the caller's signal to
/// filter the voxel rather than an error path.
pub fn zscore(series: &[f64]) -> Option<Vec<f64>> {
    let t = series.len() as f64;
    let mean = series.iter().sum::<f64>() / t;
    let var = series.iter().map(|&v| (v - mean) * (v - mean)).sum::<f64>() / t;
    if var <= 0.0 {
        return None;
    }
    let inv_sd = 1.0 / var.sqrt();
    Some(series.iter().map(|&v| (v - mean) * inv_sd).collect())
}

/// Filter dead voxels and z-normalize the survivors.
///
/// Retains exactly the voxels with population variance above
/// `cfg.dead_voxel_epsilon` that the mask (if any) includes, with coordinates
/// recorded in (x, y, z) scan order.
pub fn extract_voxels(vol: &Volume4D, cfg: &IngestConfig) -> Result<VoxelSet> {
    if let Some(mask) = &cfg.mask {
        if mask.dims() != vol.dims() {
            return Err(Error::invalid(
                "mask dims",
                format!("mask {:?} vs volume {:?}", mask.dims(), vol.dims()),
            ));
        }
    }

    let [nx, ny, nz] = vol.dims();
    let t = vol.t_len();
    let mut coords: Vec<[u32; 3]> = Vec::new();
    let mut rows: Vec<f32> = Vec::new();

    for x in 0..nx {
        for y in 0..ny {
            for z in 0..nz {
                let flat = vol.voxel_index(x, y, z);
                if let Some(mask) = &cfg.mask {
                    if !mask.includes(flat) {
                        continue;
                    }
                }
                let series = vol.series(x, y, z);
                let (mean, var) = mean_var(series);
                if var <= cfg.dead_voxel_epsilon {
                    continue;
                }
                let inv_sd = 1.0 / var.sqrt();
                coords.push([x, y, z]);
                rows.extend(series.iter().map(|&v| ((v as f64 - mean) * inv_sd) as f32));
            }
        }
    }

    if coords.is_empty() {
        return Err(Error::EmptyVoxelSet);
    }
    let n = coords.len();
    let series = Array2::from_shape_vec((n, t), rows).expect("row count matches coords");
    VoxelSet::new(coords, series)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    #[test]
    fn zscore_two_points() {
        let z = zscore(&[1.0, 3.0]).unwrap();
        assert_abs_diff_eq!(z[0], -1.0, epsilon = 1e-12);
        assert_abs_diff_eq!(z[1], 1.0, epsilon = 1e-12);
    }

    #[test]
    fn zscore_constant_is_filtered() {
        assert!(zscore(&[5.0, 5.0, 5.0]).is_none());
    }

    #[test]
    fn zscore_three_points() {
        // mean 2, population sd sqrt(8/3)
        let z = zscore(&[0.0, 2.0, 4.0]).unwrap();
        let expect = (1.5f64).sqrt();
        assert_abs_diff_eq!(z[0], -expect, epsilon = 1e-12);
        assert_abs_diff_eq!(z[1], 0.0, epsilon = 1e-12);
        assert_abs_diff_eq!(z[2], expect, epsilon = 1e-12);
        assert_abs_diff_eq!(z[2], 1.2247448713915890, epsilon = 1e-12);
    }

    #[test]
    fn zscore_idempotent() {
        let s = vec![3.0, -1.0, 4.0, 1.0, -5.0, 9.0];
        let once = zscore(&s).unwrap();
        let twice = zscore(&once).unwrap();
        for (a, b) in once.iter().zip(&twice) {
            assert_abs_diff_eq!(a, b, epsilon = 1e-6);
        }
    }

    fn volume_half_dead() -> Volume4D {
        // 2x2x1 grid: voxels at x=0 alive (ramps), voxels at x=1 constant zero
        let mut data = vec![0.0f32; 16];
        for v in 0..2 {
            for t in 0..4 {
                data[v * 4 + t] = (t as f32) * (v as f32 + 1.0);
            }
        }
        Volume4D::new([2, 2, 1], 4, data).unwrap()
    }

    #[test]
    fn half_dead_volume_keeps_live_half() {
        let vs = extract_voxels(&volume_half_dead(), &IngestConfig::default()).unwrap();
        assert_eq!(vs.n(), 2);
        assert_eq!(vs.coords(), &[[0, 0, 0], [0, 1, 0]]);
    }

    #[test]
    fn all_constant_volume_is_an_error() {
        let vol = Volume4D::new([2, 1, 1], 3, vec![7.0; 6]).unwrap();
        assert!(matches!(
            extract_voxels(&vol, &IngestConfig::default()),
            Err(Error::EmptyVoxelSet)
        ));
    }

    #[test]
    fn rows_are_normalized() {
        let vs = extract_voxels(&volume_half_dead(), &IngestConfig::default()).unwrap();
        for i in 0..vs.n() {
            let row: Vec<f64> = vs.row(i).iter().map(|&v| v as f64).collect();
            let (mean, var) = {
                let m = row.iter().sum::<f64>() / row.len() as f64;
                let v = row.iter().map(|x| (x - m) * (x - m)).sum::<f64>() / row.len() as f64;
                (m, v)
            };
            assert!(mean.abs() < 1e-6);
            assert!((var - 1.0).abs() < 1e-6);
        }
    }

    #[test]
    fn mask_excludes_voxels() {
        let vol = volume_half_dead();
        let mask = VolumeMask::new([2, 2, 1], vec![true, false, true, true]).unwrap();
        let cfg = IngestConfig {
            mask: Some(mask),
            ..Default::default()
        };
        let vs = extract_voxels(&vol, &cfg).unwrap();
        assert_eq!(vs.coords(), &[[0, 0, 0]]);
    }

    #[test]
    fn mask_dims_must_match() {
        let vol = volume_half_dead();
        let mask = VolumeMask::new([1, 2, 1], vec![true, true]).unwrap();
        let cfg = IngestConfig {
            mask: Some(mask),
            ..Default::default()
        };
        assert!(matches!(
            extract_voxels(&vol, &cfg),
            Err(Error::Invalid { .. })
        ));
    }

    mod properties {
        use super::*;
        use proptest::prelude::*;

        fn volume_strategy() -> impl Strategy<Value = (Volume4D, Vec<bool>)> {
            (2u32..5, 2u32..5, 1u32..4, 3usize..10).prop_flat_map(|(x, y, z, t)| {
                let n = (x * y * z) as usize;
                (
                    proptest::collection::vec(-50.0f32..50.0, n * t),
                    proptest::collection::vec(proptest::bool::ANY, n),
                )
                    .prop_map(move |(data, mask)| {
                        (Volume4D::new([x, y, z], t as u32, data).unwrap(), mask)
                    })
            })
        }

        proptest! {
            #[test]
            fn extracted_rows_are_normalized((vol, _mask) in volume_strategy()) {
                if let Ok(vs) = extract_voxels(&vol, &IngestConfig::default()) {
                    prop_assert!(vs.n() <= vol.voxel_count());
                    for i in 0..vs.n() {
                        let row: Vec<f64> = vs.row(i).iter().map(|&v| v as f64).collect();
                        let m = row.iter().sum::<f64>() / row.len() as f64;
                        let var = row.iter().map(|x| (x - m) * (x - m)).sum::<f64>() / row.len() as f64;
                        prop_assert!(m.abs() < 1e-6);
                        prop_assert!((var - 1.0).abs() < 1e-6);
                    }
                }
            }

            /// Masking then filtering equals filtering then masking: the
            /// masked extraction retains exactly the no-mask rows whose
            /// coords the mask keeps.
            #[test]
            fn mask_and_filter_commute((vol, mask) in volume_strategy()) {
                let unmasked = extract_voxels(&vol, &IngestConfig::default());
                let vmask = VolumeMask::new(vol.dims(), mask.clone()).unwrap();
                let cfg = IngestConfig { mask: Some(vmask), ..Default::default() };
                let masked = extract_voxels(&vol, &cfg);
                let expected: Vec<[u32; 3]> = match &unmasked {
                    Ok(vs) => vs
                        .coords()
                        .iter()
                        .copied()
                        .filter(|&[x, y, z]| mask[vol.voxel_index(x, y, z)])
                        .collect(),
                    Err(_) => Vec::new(),
                };
                match masked {
                    Ok(vs) => {
                        prop_assert_eq!(vs.coords(), expected.as_slice());
                        let unmasked = unmasked.unwrap();
                        // rows are identical for retained voxels
                        for (i, c) in vs.coords().iter().enumerate() {
                            let j = unmasked.coords().iter().position(|u| u == c).unwrap();
                            prop_assert_eq!(vs.row(i), unmasked.row(j));
                        }
                    }
                    Err(_) => prop_assert!(expected.is_empty()),
                }
            }

            #[test]
            fn zscore_idempotent_prop(series in proptest::collection::vec(-100.0f64..100.0, 3..20)) {
                if let Some(z1) = zscore(&series) {
                    let z2 = zscore(&z1).unwrap();
                    for (a, b) in z1.iter().zip(&z2) {
                        prop_assert!((a - b).abs() < 1e-6);
                    }
                }
            }
        }
    }

    #[test]
    fn sixty_thousand_voxel_scale() {
        // 40x50x30 = 60,000 voxels, tiny T; every voxel alive
        let (nx, ny, nz, t) = (40u32, 50u32, 30u32, 4usize);
        let n = (nx * ny * nz) as usize;
        let mut data = vec![0.0f32; n * t];
        for v in 0..n {
            for k in 0..t {
                data[v * t + k] = ((v * 31 + k * 7) % 13) as f32 + if k % 2 == 0 { 0.5 } else { -0.5 };
            }
        }
        let vol = Volume4D::new([nx, ny, nz], t as u32, data).unwrap();
        let vs = extract_voxels(&vol, &IngestConfig::default()).unwrap();
        assert_eq!(vs.n(), 60_000);
    }
}

//! 4D voxel time-series volumes and the VOX1/MSK1 on-disk containers.
//!
//! VOX1 layout (little-endian): magic `VOX1`, u32 X/Y/Z/T, then X*Y*Z*T f32
//! samples ordered x-major, then y, then z, with t fastest within a voxel.
//! MSK1 layout: magic `MSK1`, u32 X/Y/Z, then X*Y*Z u8 flags (0 = exclude).

use std::path::Path;

use crate::error::{Error, Result};
use crate::wire::{Reader, Writer};

pub const VOX1_MAGIC: [u8; 4] = *b"VOX1";
pub const MSK1_MAGIC: [u8; 4] = *b"MSK1";

/// A raw voxel time-series grid: `dims` spatial voxels, each carrying a
/// `t_len`-step signal.
#[derive(Debug, Clone, PartialEq)]
pub struct Volume4D {
    dims: [u32; 3],
    t_len: u32,
    data: Vec<f32>,
}

impl Volume4D {
    pub fn new(dims: [u32; 3], t_len: u32, data: Vec<f32>) -> Result<Self> {
        if dims[0] == 0 || dims[1] == 0 || dims[2] == 0 {
            return Err(Error::ZeroDim { what: "spatial dim" });
        }
        if t_len == 0 {
            return Err(Error::ZeroDim { what: "time dim" });
        }
        let expect = dims[0] as usize * dims[1] as usize * dims[2] as usize * t_len as usize;
        if data.len() != expect {
            return Err(Error::invalid(
                "volume payload",
                format!("expected {expect} samples, got {}", data.len()),
            ));
        }
        Ok(Volume4D { dims, t_len, data })
    }

    pub fn dims(&self) -> [u32; 3] {
        self.dims
    }

    pub fn t_len(&self) -> usize {
        self.t_len as usize
    }

    pub fn voxel_count(&self) -> usize {
        self.dims[0] as usize * self.dims[1] as usize * self.dims[2] as usize
    }

    /// Flat voxel index in scan order (x outermost, z innermost).
    pub fn voxel_index(&self, x: u32, y: u32, z: u32) -> usize {
        ((x as usize * self.dims[1] as usize) + y as usize) * self.dims[2] as usize + z as usize
    }

    /// Time series of one voxel.
    pub fn series(&self, x: u32, y: u32, z: u32) -> &[f32] {
        let v = self.voxel_index(x, y, z);
        let t = self.t_len as usize;
        &self.data[v * t..(v + 1) * t]
    }

    pub fn data(&self) -> &[f32] {
        &self.data
    }

    pub fn to_bytes(&self) -> Vec<u8> {
        let mut w = Writer::with_capacity(20 + self.data.len() * 4);
        w.magic(&VOX1_MAGIC);
        w.u32(self.dims[0]);
        w.u32(self.dims[1]);
        w.u32(self.dims[2]);
        w.u32(self.t_len);
        for &v in &self.data {
            w.f32(v);
        }
        w.into_bytes()
    }

    pub fn from_bytes(bytes: &[u8]) -> Result<Self> {
        let mut r = Reader::new(bytes, "VOX1 volume");
        r.magic(&VOX1_MAGIC)?;
        let dims = [r.u32()?, r.u32()?, r.u32()?];
        let t_len = r.u32()?;
        if dims[0] == 0 || dims[1] == 0 || dims[2] == 0 {
            return Err(Error::ZeroDim { what: "spatial dim" });
        }
        if t_len == 0 {
            return Err(Error::ZeroDim { what: "time dim" });
        }
        let count = dims[0] as usize * dims[1] as usize * dims[2] as usize * t_len as usize;
        let data = r.f32_vec(count)?;
        r.finish()?;
        Volume4D::new(dims, t_len, data)
    }

    pub fn write_file(&self, path: impl AsRef<Path>) -> Result<()> {
        std::fs::write(path.as_ref(), self.to_bytes()).map_err(|e| Error::io(e, path.as_ref()))
    }

    pub fn read_file(path: impl AsRef<Path>) -> Result<Self> {
        let bytes = std::fs::read(path.as_ref()).map_err(|e| Error::io(e, path.as_ref()))?;
        Self::from_bytes(&bytes)
    }
}

/// Spatial include/exclude mask matching a volume's grid.
#[derive(Debug, Clone, PartialEq)]
pub struct VolumeMask {
    dims: [u32; 3],
    include: Vec<bool>,
}

impl VolumeMask {
    pub fn new(dims: [u32; 3], include: Vec<bool>) -> Result<Self> {
        let expect = dims[0] as usize * dims[1] as usize * dims[2] as usize;
        if include.len() != expect {
            return Err(Error::invalid(
                "mask payload",
                format!("expected {expect} flags, got {}", include.len()),
            ));
        }
        Ok(VolumeMask { dims, include })
    }

    pub fn dims(&self) -> [u32; 3] {
        self.dims
    }

    pub fn includes(&self, flat_voxel: usize) -> bool {
        self.include[flat_voxel]
    }

    pub fn to_bytes(&self) -> Vec<u8> {
        let mut w = Writer::with_capacity(16 + self.include.len());
        w.magic(&MSK1_MAGIC);
        w.u32(self.dims[0]);
        w.u32(self.dims[1]);
        w.u32(self.dims[2]);
        for &b in &self.include {
            w.u8(b as u8);
        }
        w.into_bytes()
    }

    pub fn from_bytes(bytes: &[u8]) -> Result<Self> {
        let mut r = Reader::new(bytes, "MSK1 mask");
        r.magic(&MSK1_MAGIC)?;
        let dims = [r.u32()?, r.u32()?, r.u32()?];
        if dims[0] == 0 || dims[1] == 0 || dims[2] == 0 {
            return Err(Error::ZeroDim { what: "spatial dim" });
        }
        let count = dims[0] as usize * dims[1] as usize * dims[2] as usize;
        let flags = r.bytes(count)?.iter().map(|&b| b != 0).collect();
        r.finish()?;
        VolumeMask::new(dims, flags)
    }

    pub fn read_file(path: impl AsRef<Path>) -> Result<Self> {
        let bytes = std::fs::read(path.as_ref()).map_err(|e| Error::io(e, path.as_ref()))?;
        Self::from_bytes(&bytes)
    }

    pub fn write_file(&self, path: impl AsRef<Path>) -> Result<()> {
        std::fs::write(path.as_ref(), self.to_bytes()).map_err(|e| Error::io(e, path.as_ref()))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn small_volume() -> Volume4D {
        // 2x2x1 grid, 3 time steps
        let data: Vec<f32> = (0..12).map(|i| i as f32).collect();
        Volume4D::new([2, 2, 1], 3, data).unwrap()
    }

    #[test]
    fn parse_valid_2x2x1x3() {
        let vol = small_volume();
        let bytes = vol.to_bytes();
        let back = Volume4D::from_bytes(&bytes).unwrap();
        assert_eq!(back.data().len(), 12);
        assert_eq!(back, vol);
    }

    #[test]
    fn series_layout_is_time_fastest() {
        let vol = small_volume();
        // voxel (0,1,0) is flat index 1, so its series is samples 3..6
        assert_eq!(vol.series(0, 1, 0), &[3.0, 4.0, 5.0]);
        assert_eq!(vol.series(1, 1, 0), &[9.0, 10.0, 11.0]);
    }

    #[test]
    fn bad_magic_is_rejected() {
        let mut bytes = small_volume().to_bytes();
        bytes[0..4].copy_from_slice(b"XXXX");
        match Volume4D::from_bytes(&bytes) {
            Err(Error::BadMagic { found, .. }) => assert_eq!(&found, b"XXXX"),
            other => panic!("expected BadMagic, got {other:?}"),
        }
    }

    #[test]
    fn truncated_payload_names_offset() {
        // header says 2x2x2x4 = 32 floats, supply only 31
        let mut w = crate::wire::Writer::new();
        w.magic(&VOX1_MAGIC);
        for d in [2u32, 2, 2, 4] {
            w.u32(d);
        }
        for i in 0..31 {
            w.f32(i as f32);
        }
        let bytes = w.into_bytes();
        match Volume4D::from_bytes(&bytes) {
            Err(Error::Truncated { offset, .. }) => assert_eq!(offset, 20),
            other => panic!("expected Truncated, got {other:?}"),
        }
    }

    #[test]
    fn zero_dims_rejected() {
        let mut w = crate::wire::Writer::new();
        w.magic(&VOX1_MAGIC);
        for d in [2u32, 0, 2, 4] {
            w.u32(d);
        }
        assert!(matches!(
            Volume4D::from_bytes(&w.into_bytes()),
            Err(Error::ZeroDim { .. })
        ));
    }

    #[test]
    fn trailing_bytes_rejected() {
        let mut bytes = small_volume().to_bytes();
        bytes.push(0);
        assert!(matches!(
            Volume4D::from_bytes(&bytes),
            Err(Error::TrailingBytes { .. })
        ));
    }

    #[test]
    fn mask_roundtrip() {
        let mask = VolumeMask::new([2, 2, 1], vec![true, false, true, true]).unwrap();
        let back = VolumeMask::from_bytes(&mask.to_bytes()).unwrap();
        assert_eq!(back, mask);
        assert!(!back.includes(1));
    }
}

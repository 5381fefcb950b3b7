//! Directory-backed saliency cache.
//!
//! File layout, all little-endian:
//!
//! | bytes | content |
//! |---|---|
//! | 8 | magic `PPSAL1\0\0` |
//! | 4 × u32 | grid_w, grid_h, target_w, target_h |
//! | 32 | param hash |
//! | 4 · grid_w · grid_h | f32 values, row-major |
//! | 4 | CRC32 of everything before it |
//!
//! Values are stored as `f32`, so every map handed out by the store has been
//! through that quantization, whether it was just built or read back.

use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::sync::atomic::{AtomicU64, Ordering};

use super::{hex_digest, Result, SaliencyError, SaliencyMap, SaliencySource};
use crate::geometry::{ImageSize, Point2};

pub const CACHE_MAGIC: [u8; 8] = *b"PPSAL1\0\0";

const HEADER_LEN: usize = 8 + 16 + 32;

pub fn encode_cache_file(map: &SaliencyMap) -> Vec<u8> {
    let mut out = Vec::with_capacity(HEADER_LEN + 4 * map.values().len() + 4);
    out.extend_from_slice(&CACHE_MAGIC);
    let (g, t) = (map.grid(), map.target_size());
    for d in [g.w(), g.h(), t.w(), t.h()] {
        out.extend_from_slice(&d.to_le_bytes());
    }
    out.extend_from_slice(map.param_hash());
    for &v in map.values() {
        out.extend_from_slice(&(v as f32).to_le_bytes());
    }
    let crc = crc32fast::hash(&out);
    out.extend_from_slice(&crc.to_le_bytes());
    out
}

fn read_u32(bytes: &[u8], at: usize) -> u32 {
    u32::from_le_bytes(bytes[at..at + 4].try_into().expect("4 bytes"))
}

pub fn decode_cache_file(bytes: &[u8]) -> Result<SaliencyMap> {
    let corrupt = |msg: &str| SaliencyError::CacheCorrupt(msg.to_string());
    if bytes.len() < HEADER_LEN + 4 {
        return Err(corrupt("file shorter than header"));
    }
    if bytes[..8] != CACHE_MAGIC {
        return Err(corrupt("bad magic"));
    }
    let (body, crc) = bytes.split_at(bytes.len() - 4);
    if crc32fast::hash(body) != u32::from_le_bytes(crc.try_into().expect("4 bytes")) {
        return Err(corrupt("checksum mismatch"));
    }
    let dims: Vec<u32> = (0..4).map(|k| read_u32(bytes, 8 + 4 * k)).collect();
    let grid = ImageSize::new(dims[0], dims[1]).map_err(|_| corrupt("bad grid size"))?;
    let target = ImageSize::new(dims[2], dims[3]).map_err(|_| corrupt("bad target size"))?;
    let n = dims[0] as usize * dims[1] as usize;
    if body.len() != HEADER_LEN + 4 * n {
        return Err(corrupt("payload length does not match header"));
    }
    let hash: [u8; 32] = bytes[24..56].try_into().expect("32 bytes");
    let values = body[HEADER_LEN..]
        .chunks_exact(4)
        .map(|c| f64::from(f32::from_le_bytes(c.try_into().expect("4 bytes"))))
        .collect();
    SaliencyMap::new(values, grid, target, hash).map_err(|e| corrupt(&e.to_string()))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CacheOutcome {
    Hit,
    Miss,
}

/// Saliency maps on disk, one file per parameter hash.
///
/// Writers go through a temporary file and an atomic rename, so readers
/// never see a partially written entry.
#[derive(Debug, Clone)]
pub struct CacheStore {
    dir: PathBuf,
}

static TMP_COUNTER: AtomicU64 = AtomicU64::new(0);

impl CacheStore {
    pub fn open(dir: impl AsRef<Path>) -> Result<Self> {
        let dir = dir.as_ref().to_path_buf();
        fs::create_dir_all(&dir)?;
        Ok(Self { dir })
    }

    pub fn dir(&self) -> &Path {
        &self.dir
    }

    pub fn entry_path(&self, hash: &[u8; 32]) -> PathBuf {
        self.dir.join(format!("{}.sal", hex_digest(hash)))
    }

    pub fn load(&self, hash: &[u8; 32]) -> Result<Option<SaliencyMap>> {
        let path = self.entry_path(hash);
        let bytes = match fs::read(&path) {
            Ok(b) => b,
            Err(e) if e.kind() == std::io::ErrorKind::NotFound => return Ok(None),
            Err(e) => return Err(e.into()),
        };
        let map = decode_cache_file(&bytes)?;
        if map.param_hash() != hash {
            return Err(SaliencyError::CacheCorrupt(format!(
                "{} holds a different parameter hash",
                path.display()
            )));
        }
        Ok(Some(map))
    }

    pub fn store(&self, map: &SaliencyMap) -> Result<PathBuf> {
        let path = self.entry_path(map.param_hash());
        let tmp = self.dir.join(format!(
            ".{}.{}.{}.tmp",
            map.param_hash_hex(),
            std::process::id(),
            TMP_COUNTER.fetch_add(1, Ordering::Relaxed)
        ));
        {
            let mut f = fs::File::create(&tmp)?;
            f.write_all(&encode_cache_file(map))?;
            f.sync_all()?;
        }
        fs::rename(&tmp, &path)?;
        Ok(path)
    }

    /// Returns the cached map for `source`, building and persisting it first
    /// if absent.
    pub fn get_or_build(
        &self,
        source: &SaliencySource,
        size: ImageSize,
        grid: ImageSize,
    ) -> Result<(SaliencyMap, CacheOutcome)> {
        let hash = source.param_hash(size, grid);
        if let Some(map) = self.load(&hash)? {
            if map.grid() != grid || map.target_size() != size {
                return Err(SaliencyError::CacheCorrupt("sizes do not match the key".into()));
            }
            return Ok((map, CacheOutcome::Hit));
        }
        let built = source.build(size, grid)?;
        let bytes = encode_cache_file(&built);
        self.store(&built)?;
        Ok((decode_cache_file(&bytes)?, CacheOutcome::Miss))
    }
}

/// Recompute the vanishing point every `n_v` frames.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct RefreshSchedule {
    n_v: u64,
}

impl RefreshSchedule {
    pub fn new(n_v: u64) -> Result<Self> {
        if n_v == 0 {
            return Err(SaliencyError::BadParam("refresh interval n_v must be at least 1".into()));
        }
        Ok(Self { n_v })
    }

    pub fn n_v(&self) -> u64 {
        self.n_v
    }

    pub fn is_refresh_frame(&self, frame_index: u64) -> bool {
        frame_index.is_multiple_of(self.n_v)
    }
}

/// Per-frame saliency for a video, re-keyed on a fresh vanishing point at
/// each refresh frame and served from the cache in between.
pub struct StreamingSaliency<'a> {
    store: &'a CacheStore,
    base: super::WarpParams,
    schedule: RefreshSchedule,
    size: ImageSize,
    grid: ImageSize,
    current: Option<SaliencyMap>,
    rebuilds: u64,
}

impl<'a> StreamingSaliency<'a> {
    pub fn new(
        store: &'a CacheStore,
        base: super::WarpParams,
        schedule: RefreshSchedule,
        size: ImageSize,
        grid: ImageSize,
    ) -> Self {
        Self {
            store,
            base,
            schedule,
            size,
            grid,
            current: None,
            rebuilds: 0,
        }
    }

    /// Map for `frame_index`. `vp` is only called on refresh frames.
    pub fn map_for_frame(
        &mut self,
        frame_index: u64,
        vp: impl FnOnce() -> Point2,
    ) -> Result<&SaliencyMap> {
        if self.current.is_none() || self.schedule.is_refresh_frame(frame_index) {
            let params = self.base.with_vp(vp())?;
            let (map, outcome) =
                self.store
                    .get_or_build(&SaliencySource::Single(params), self.size, self.grid)?;
            if outcome == CacheOutcome::Miss {
                self.rebuilds += 1;
            }
            self.current = Some(map);
        }
        Ok(self.current.as_ref().expect("set above"))
    }

    /// Number of maps built (cache misses) so far.
    pub fn rebuilds(&self) -> u64 {
        self.rebuilds
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::saliency::{ParamId, WarpParams};

    fn setup() -> (tempfile::TempDir, CacheStore, SaliencySource, ImageSize, ImageSize) {
        let dir = tempfile::tempdir().unwrap();
        let store = CacheStore::open(dir.path().join("cache")).unwrap();
        let p = WarpParams::with_defaults(Point2::new(960.0, 600.0)).unwrap();
        (
            dir,
            store,
            SaliencySource::Single(p),
            ImageSize::new(1920, 1200).unwrap(),
            ImageSize::new(96, 60).unwrap(),
        )
    }

    #[test]
    fn miss_then_hit_is_bit_identical() {
        let (_d, store, src, size, grid) = setup();
        let (a, o1) = store.get_or_build(&src, size, grid).unwrap();
        let (b, o2) = store.get_or_build(&src, size, grid).unwrap();
        assert_eq!((o1, o2), (CacheOutcome::Miss, CacheOutcome::Hit));
        let bits = |m: &SaliencyMap| m.values().iter().map(|v| v.to_bits()).collect::<Vec<_>>();
        assert_eq!(bits(&a), bits(&b));
        assert_eq!(encode_cache_file(&a), encode_cache_file(&b));
    }

    #[test]
    fn tiny_parameter_change_misses() {
        let (_d, store, src, size, grid) = setup();
        store.get_or_build(&src, size, grid).unwrap();
        let SaliencySource::Single(p) = src else { unreachable!() };
        let nudged = SaliencySource::Single(p.with(ParamId::Nu, p.nu() + 1e-6).unwrap());
        let (_, outcome) = store.get_or_build(&nudged, size, grid).unwrap();
        assert_eq!(outcome, CacheOutcome::Miss);
    }

    #[test]
    fn truncated_file_is_corrupt() {
        let (_d, store, src, size, grid) = setup();
        let (map, _) = store.get_or_build(&src, size, grid).unwrap();
        let path = store.entry_path(map.param_hash());
        let bytes = fs::read(&path).unwrap();
        fs::write(&path, &bytes[..bytes.len() - 10]).unwrap();
        assert!(matches!(
            store.get_or_build(&src, size, grid),
            Err(SaliencyError::CacheCorrupt(_))
        ));
    }

    #[test]
    fn flipped_bit_is_corrupt() {
        let (_d, store, src, size, grid) = setup();
        let (map, _) = store.get_or_build(&src, size, grid).unwrap();
        let mut bytes = encode_cache_file(&map);
        bytes[100] ^= 0x10;
        assert!(matches!(decode_cache_file(&bytes), Err(SaliencyError::CacheCorrupt(_))));
        let mut bad_magic = encode_cache_file(&map);
        bad_magic[0] = b'X';
        assert!(matches!(decode_cache_file(&bad_magic), Err(SaliencyError::CacheCorrupt(_))));
    }

    #[test]
    fn header_layout() {
        let (_d, _store, src, size, grid) = setup();
        let map = src.build(size, grid).unwrap();
        let bytes = encode_cache_file(&map);
        assert_eq!(&bytes[..8], b"PPSAL1\0\0");
        assert_eq!(read_u32(&bytes, 8), 96);
        assert_eq!(read_u32(&bytes, 12), 60);
        assert_eq!(read_u32(&bytes, 16), 1920);
        assert_eq!(read_u32(&bytes, 20), 1200);
        assert_eq!(&bytes[24..56], map.param_hash());
        assert_eq!(bytes.len(), 56 + 4 * 96 * 60 + 4);
    }

    #[test]
    fn streaming_refreshes_every_n_v_frames() {
        let (_d, store, src, size, grid) = setup();
        let SaliencySource::Single(p) = src else { unreachable!() };
        let mut s = StreamingSaliency::new(&store, p, RefreshSchedule::new(5).unwrap(), size, grid);
        let mut vp_calls = 0;
        for frame in 0..12u64 {
            let x = 900.0 + (frame / 5) as f64 * 10.0;
            s.map_for_frame(frame, || {
                vp_calls += 1;
                Point2::new(x, 600.0)
            })
            .unwrap();
        }
        // frames 0, 5, 10
        assert_eq!(vp_calls, 3);
        assert_eq!(s.rebuilds(), 3);
        assert!(RefreshSchedule::new(0).is_err());
    }
}

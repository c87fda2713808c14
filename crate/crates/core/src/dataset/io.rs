//! Binary dataset files and CSV exports.
//!
//! Layout (little-endian): magic `HHOP`, `u32` version, `u64` seed,
//! `u32` n_train, `u32` n_test, `u32` grid_len, `f64` grid[grid_len], then per
//! sample `f64` t_start, t_end, amplitude, `f64` current[grid_len],
//! `f64` voltage[grid_len]; finally a CRC32 (IEEE) of every preceding byte.

use super::{Dataset, DatasetError, Sample, SquarePulse};
use crate::hh::count_spikes;
use std::fs;
use std::io::Write;
use std::path::Path;

pub const MAGIC: &[u8; 4] = b"HHOP";
pub const FORMAT_VERSION: u32 = 1;

const HEADER_LEN: usize = 4 + 4 + 8 + 4 + 4 + 4;

pub fn encode_dataset(ds: &Dataset) -> Vec<u8> {
    let g = ds.grid.len();
    let n = ds.len();
    let mut buf = Vec::with_capacity(HEADER_LEN + 8 * g + n * 8 * (3 + 2 * g) + 4);
    buf.extend_from_slice(MAGIC);
    buf.extend_from_slice(&ds.format_version.to_le_bytes());
    buf.extend_from_slice(&ds.seed.to_le_bytes());
    buf.extend_from_slice(&(ds.train.len() as u32).to_le_bytes());
    buf.extend_from_slice(&(ds.test.len() as u32).to_le_bytes());
    buf.extend_from_slice(&(g as u32).to_le_bytes());
    let put = |xs: &[f64], buf: &mut Vec<u8>| {
        for x in xs {
            buf.extend_from_slice(&x.to_le_bytes());
        }
    };
    put(&ds.grid, &mut buf);
    for s in ds.iter() {
        put(&[s.pulse.t_start, s.pulse.t_end, s.pulse.amplitude], &mut buf);
        put(&s.current, &mut buf);
        put(&s.voltage, &mut buf);
    }
    let crc = crc32fast::hash(&buf);
    buf.extend_from_slice(&crc.to_le_bytes());
    buf
}

struct Reader<'a> {
    bytes: &'a [u8],
    pos: usize,
}

impl Reader<'_> {
    fn take<const N: usize>(&mut self) -> [u8; N] {
        let out: [u8; N] = self.bytes[self.pos..self.pos + N].try_into().unwrap();
        self.pos += N;
        out
    }
    fn u32(&mut self) -> u32 {
        u32::from_le_bytes(self.take())
    }
    fn u64(&mut self) -> u64 {
        u64::from_le_bytes(self.take())
    }
    fn f64s(&mut self, n: usize) -> Vec<f64> {
        (0..n).map(|_| f64::from_le_bytes(self.take())).collect()
    }
}

pub fn decode_dataset(bytes: &[u8]) -> Result<Dataset, DatasetError> {
    if bytes.len() < 8 {
        return Err(DatasetError::Truncated {
            expected: HEADER_LEN + 4,
            found: bytes.len(),
        });
    }
    if &bytes[..4] != MAGIC {
        return Err(DatasetError::BadMagic);
    }
    let mut r = Reader { bytes, pos: 4 };
    let version = r.u32();
    if version != FORMAT_VERSION {
        return Err(DatasetError::Version {
            found: version,
            expected: FORMAT_VERSION,
        });
    }
    if bytes.len() < HEADER_LEN {
        return Err(DatasetError::Truncated {
            expected: HEADER_LEN + 4,
            found: bytes.len(),
        });
    }
    let seed = r.u64();
    let n_train = r.u32() as usize;
    let n_test = r.u32() as usize;
    let g = r.u32() as usize;
    let expected = HEADER_LEN + 8 * g + (n_train + n_test) * 8 * (3 + 2 * g) + 4;
    if bytes.len() < expected {
        return Err(DatasetError::Truncated {
            expected,
            found: bytes.len(),
        });
    }
    if bytes.len() > expected {
        return Err(DatasetError::Malformed(format!(
            "{} trailing bytes",
            bytes.len() - expected
        )));
    }
    let stored = u32::from_le_bytes(bytes[expected - 4..].try_into().unwrap());
    let computed = crc32fast::hash(&bytes[..expected - 4]);
    if stored != computed {
        return Err(DatasetError::Checksum { stored, computed });
    }

    let grid = r.f64s(g);
    let mut samples = Vec::with_capacity(n_train + n_test);
    for _ in 0..n_train + n_test {
        let p = r.f64s(3);
        samples.push(Sample {
            pulse: SquarePulse {
                t_start: p[0],
                t_end: p[1],
                amplitude: p[2],
            },
            current: r.f64s(g),
            voltage: r.f64s(g),
        });
    }
    let test = samples.split_off(n_train);
    Ok(Dataset {
        train: samples,
        test,
        grid,
        seed,
        format_version: version,
    })
}

pub fn save_dataset(ds: &Dataset, path: impl AsRef<Path>) -> Result<(), DatasetError> {
    fs::write(path, encode_dataset(ds))?;
    Ok(())
}

pub fn load_dataset(path: impl AsRef<Path>) -> Result<Dataset, DatasetError> {
    decode_dataset(&fs::read(path)?)
}

/// One row per sample: `split,t_start,t_end,amplitude,v0,...,v499`.
pub fn export_csv(ds: &Dataset, path: impl AsRef<Path>) -> Result<(), DatasetError> {
    let mut w = std::io::BufWriter::new(fs::File::create(path)?);
    write!(w, "split,t_start,t_end,amplitude")?;
    for i in 0..ds.grid.len() {
        write!(w, ",v{i}")?;
    }
    writeln!(w)?;
    for (split, s) in splits(ds) {
        write!(w, "{split},{},{},{}", s.pulse.t_start, s.pulse.t_end, s.pulse.amplitude)?;
        for v in &s.voltage {
            write!(w, ",{v}")?;
        }
        writeln!(w)?;
    }
    w.flush()?;
    Ok(())
}

/// One row per sample: `index,split,t_start,t_end,amplitude,spike_count`.
pub fn write_summary_csv(ds: &Dataset, path: impl AsRef<Path>) -> Result<(), DatasetError> {
    let mut w = std::io::BufWriter::new(fs::File::create(path)?);
    writeln!(w, "index,split,t_start,t_end,amplitude,spike_count")?;
    for (i, (split, s)) in splits(ds).enumerate() {
        writeln!(
            w,
            "{i},{split},{},{},{},{}",
            s.pulse.t_start,
            s.pulse.t_end,
            s.pulse.amplitude,
            count_spikes(&s.voltage)
        )?;
    }
    w.flush()?;
    Ok(())
}

fn splits(ds: &Dataset) -> impl Iterator<Item = (&'static str, &Sample)> {
    ds.train
        .iter()
        .map(|s| ("train", s))
        .chain(ds.test.iter().map(|s| ("test", s)))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dataset::build_dataset;

    fn tiny() -> Dataset {
        build_dataset(5, 9).unwrap()
    }

    #[test]
    fn round_trip_is_lossless() {
        let ds = tiny();
        let bytes = encode_dataset(&ds);
        assert_eq!(&bytes[..4], b"HHOP");
        assert_eq!(decode_dataset(&bytes).unwrap(), ds);
        assert_eq!(bytes.len(), HEADER_LEN + 8 * 500 + 5 * 8 * 1003 + 4);
    }

    #[test]
    fn corrupt_payload_fails_checksum() {
        let mut bytes = encode_dataset(&tiny());
        let i = bytes.len() / 2;
        bytes[i] ^= 0x01;
        assert!(matches!(decode_dataset(&bytes), Err(DatasetError::Checksum { .. })));
    }

    #[test]
    fn newer_version_is_rejected() {
        let mut bytes = encode_dataset(&tiny());
        bytes[4..8].copy_from_slice(&(FORMAT_VERSION + 1).to_le_bytes());
        assert!(matches!(
            decode_dataset(&bytes),
            Err(DatasetError::Version { found: 2, expected: 1 })
        ));
    }

    #[test]
    fn truncation_and_magic() {
        let bytes = encode_dataset(&tiny());
        assert!(matches!(
            decode_dataset(&bytes[..bytes.len() - 100]),
            Err(DatasetError::Truncated { .. })
        ));
        assert!(matches!(decode_dataset(&bytes[..6]), Err(DatasetError::Truncated { .. })));
        let mut bad = bytes.clone();
        bad[0] = b'X';
        assert!(matches!(decode_dataset(&bad), Err(DatasetError::BadMagic)));
    }
}

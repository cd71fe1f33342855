//! Binary tensor file format.
//!
//! Layout: magic `FT4\0`, `u32` version (1), four `u64` dims, then the raw
//! payload as little-endian IEEE-754 binary32. All integers are little-endian.

use std::fs::File;
use std::io::{BufReader, BufWriter, Read, Write};
use std::path::Path;

use super::{checked_numel, FeatureTensor};
use crate::{Error, Result};

pub const FILE_MAGIC: [u8; 4] = *b"FT4\0";
pub const FILE_VERSION: u32 = 1;

const HEADER_LEN: usize = 4 + 4 + 4 * 8;

pub fn write_to(mut w: impl Write, x: &FeatureTensor) -> Result<()> {
    let mut header = Vec::with_capacity(HEADER_LEN);
    header.extend_from_slice(&FILE_MAGIC);
    header.extend_from_slice(&FILE_VERSION.to_le_bytes());
    for d in x.dims() {
        header.extend_from_slice(&(d as u64).to_le_bytes());
    }
    w.write_all(&header)?;
    let mut payload = Vec::with_capacity(x.numel() * 4);
    for v in x.data() {
        payload.extend_from_slice(&v.to_bits().to_le_bytes());
    }
    w.write_all(&payload)?;
    w.flush()?;
    Ok(())
}

pub fn read_from(mut r: impl Read) -> Result<FeatureTensor> {
    let mut header = [0u8; HEADER_LEN];
    read_exact_or_truncated(&mut r, &mut header)?;
    if header[..4] != FILE_MAGIC {
        return Err(Error::BadMagic);
    }
    let version = u32::from_le_bytes(header[4..8].try_into().unwrap());
    if version != FILE_VERSION {
        return Err(Error::UnsupportedVersion(version));
    }
    let mut dims = [0usize; 4];
    for (i, d) in dims.iter_mut().enumerate() {
        let off = 8 + i * 8;
        let raw = u64::from_le_bytes(header[off..off + 8].try_into().unwrap());
        *d = usize::try_from(raw).map_err(|_| Error::DimOverflow)?;
    }
    let n = checked_numel(dims)?;
    let bytes = n.checked_mul(4).ok_or(Error::DimOverflow)?;
    let mut payload = Vec::new();
    r.take(bytes as u64).read_to_end(&mut payload)?;
    if payload.len() != bytes {
        return Err(Error::Truncated {
            expected: bytes,
            found: payload.len(),
        });
    }
    let data = payload
        .chunks_exact(4)
        .map(|c| f32::from_bits(u32::from_le_bytes(c.try_into().unwrap())))
        .collect();
    FeatureTensor::from_vec(dims, data)
}

fn read_exact_or_truncated(r: &mut impl Read, buf: &mut [u8]) -> Result<()> {
    let mut filled = 0;
    while filled < buf.len() {
        match r.read(&mut buf[filled..]) {
            Ok(0) => {
                return Err(Error::Truncated {
                    expected: buf.len(),
                    found: filled,
                })
            }
            Ok(n) => filled += n,
            Err(e) if e.kind() == std::io::ErrorKind::Interrupted => {}
            Err(e) => return Err(e.into()),
        }
    }
    Ok(())
}

pub fn save(path: impl AsRef<Path>, x: &FeatureTensor) -> Result<()> {
    write_to(BufWriter::new(File::create(path)?), x)
}

pub fn load(path: impl AsRef<Path>) -> Result<FeatureTensor> {
    read_from(BufReader::new(File::open(path)?))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::tensor::Rng;
    use proptest::prelude::*;

    fn encode(x: &FeatureTensor) -> Vec<u8> {
        let mut buf = Vec::new();
        write_to(&mut buf, x).unwrap();
        buf
    }

    #[test]
    fn file_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("x.ft4");
        let x = FeatureTensor::randn([2, 3, 4, 5], &mut Rng::new(1), 1.0, 0.0);
        save(&path, &x).unwrap();
        let y = load(&path).unwrap();
        assert_eq!(x.dims(), y.dims());
        assert!(x.data().iter().zip(y.data()).all(|(a, b)| a.to_bits() == b.to_bits()));
    }

    #[test]
    fn header_layout() {
        let x = FeatureTensor::from_vec([1, 1, 1, 2], vec![1.0, -0.0]).unwrap();
        let buf = encode(&x);
        assert_eq!(&buf[..4], b"FT4\0");
        assert_eq!(&buf[4..8], &1u32.to_le_bytes());
        assert_eq!(&buf[8..16], &1u64.to_le_bytes());
        assert_eq!(&buf[32..40], &2u64.to_le_bytes());
        assert_eq!(&buf[40..44], &1.0f32.to_le_bytes());
        assert_eq!(&buf[44..48], &(-0.0f32).to_bits().to_le_bytes());
        assert_eq!(buf.len(), HEADER_LEN + 8);
    }

    #[test]
    fn zero_extent_is_header_only() {
        let x = FeatureTensor::zeros([0, 1, 1, 1]);
        let buf = encode(&x);
        assert_eq!(buf.len(), HEADER_LEN);
        let y = read_from(&buf[..]).unwrap();
        assert_eq!(y.dims(), [0, 1, 1, 1]);
    }

    #[test]
    fn distinct_error_paths() {
        let x = FeatureTensor::full([1, 1, 2, 2], 1.5);
        let mut buf = encode(&x);

        let mut bad = buf.clone();
        bad[0] = b'X';
        assert!(matches!(read_from(&bad[..]), Err(Error::BadMagic)));

        let mut bad = buf.clone();
        bad[4] = 9;
        assert!(matches!(read_from(&bad[..]), Err(Error::UnsupportedVersion(9))));

        let mut bad = buf.clone();
        for i in 0..4 {
            bad[8 + i * 8..16 + i * 8].copy_from_slice(&u64::MAX.to_le_bytes());
        }
        assert!(matches!(read_from(&bad[..]), Err(Error::DimOverflow)));

        buf.truncate(buf.len() - 3);
        assert!(matches!(read_from(&buf[..]), Err(Error::Truncated { .. })));
        assert!(matches!(read_from(&buf[..10]), Err(Error::Truncated { .. })));
    }

    proptest! {
        #[test]
        fn bitwise_round_trip(bits in proptest::collection::vec(any::<u32>(), 0..64)) {
            // Any finite value survives, negative zero included.
            let data: Vec<f32> = bits.iter().map(|&b| f32::from_bits(b)).filter(|v| v.is_finite()).collect();
            let n = data.len();
            let x = FeatureTensor::from_vec([1, 1, 1, n], data).unwrap();
            let y = read_from(&encode(&x)[..]).unwrap();
            prop_assert_eq!(y.dims(), x.dims());
            for (a, b) in x.data().iter().zip(y.data()) {
                prop_assert_eq!(a.to_bits(), b.to_bits());
            }
        }
    }
}

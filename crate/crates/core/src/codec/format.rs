//! The LSTG stegotext container.
//!
//! Layout: magic `LSTG`, a version byte, the token count as a big-endian
//! u64, then each token id as a big-endian u32.

use thiserror::Error;

pub const MAGIC: &[u8; 4] = b"LSTG";
pub const VERSION: u8 = 1;
const HEADER_LEN: usize = 4 + 1 + 8;

#[derive(Debug, Error, PartialEq, Eq)]
pub enum FormatError {
    #[error("not an LSTG file")]
    BadMagic,
    #[error("unsupported LSTG version {0}")]
    UnsupportedVersion(u8),
    #[error("LSTG file truncated: header declares {declared} tokens, {available} present")]
    Truncated { declared: u64, available: u64 },
    #[error("LSTG file has {0} trailing bytes")]
    TrailingBytes(usize),
}

pub fn write_stegotext(tokens: &[u32]) -> Vec<u8> {
    let mut out = Vec::with_capacity(HEADER_LEN + 4 * tokens.len());
    out.extend_from_slice(MAGIC);
    out.push(VERSION);
    out.extend_from_slice(&(tokens.len() as u64).to_be_bytes());
    for t in tokens {
        out.extend_from_slice(&t.to_be_bytes());
    }
    out
}

pub fn read_stegotext(bytes: &[u8]) -> Result<Vec<u32>, FormatError> {
    if bytes.len() < 5 || &bytes[..4] != MAGIC {
        return Err(FormatError::BadMagic);
    }
    if bytes[4] != VERSION {
        return Err(FormatError::UnsupportedVersion(bytes[4]));
    }
    if bytes.len() < HEADER_LEN {
        return Err(FormatError::Truncated {
            declared: 0,
            available: 0,
        });
    }
    let declared = u64::from_be_bytes(bytes[5..13].try_into().unwrap());
    let body = &bytes[HEADER_LEN..];
    let available = (body.len() / 4) as u64;
    if available < declared {
        return Err(FormatError::Truncated {
            declared,
            available,
        });
    }
    let used = declared as usize * 4;
    if body.len() > used {
        return Err(FormatError::TrailingBytes(body.len() - used));
    }
    Ok(body
        .chunks_exact(4)
        .map(|c| u32::from_be_bytes(c.try_into().unwrap()))
        .collect())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn pinned_layout() {
        let bytes = write_stegotext(&[1, 0x0102_0304]);
        assert_eq!(
            bytes,
            [
                b'L', b'S', b'T', b'G', 1, 0, 0, 0, 0, 0, 0, 0, 2, 0, 0, 0, 1, 1, 2, 3, 4
            ]
        );
        assert_eq!(read_stegotext(&bytes).unwrap(), vec![1, 0x0102_0304]);
        assert_eq!(read_stegotext(&write_stegotext(&[])).unwrap(), Vec::<u32>::new());
    }

    #[test]
    fn rejects_malformed() {
        let good = write_stegotext(&[7, 8, 9]);
        assert_eq!(read_stegotext(b"LSTX\x01"), Err(FormatError::BadMagic));
        assert_eq!(read_stegotext(b""), Err(FormatError::BadMagic));
        let mut v2 = good.clone();
        v2[4] = 2;
        assert_eq!(read_stegotext(&v2), Err(FormatError::UnsupportedVersion(2)));
        assert!(matches!(
            read_stegotext(&good[..good.len() - 1]),
            Err(FormatError::Truncated { declared: 3, available: 2 })
        ));
        assert!(matches!(read_stegotext(&good[..9]), Err(FormatError::Truncated { .. })));
        let mut long = good.clone();
        long.push(0);
        assert_eq!(read_stegotext(&long), Err(FormatError::TrailingBytes(1)));
    }
}

//! Binary codes: thresholding relaxed hash outputs, bit-packed storage,
//! exhaustive Hamming-distance ranking, and the code file format.
//!
//! Bit `k` of a code lives in word `k / 64` at bit position `k % 64`
//! (LSB-first), which matches the byte layout in code files: bit `k` is
//! byte `k / 8`, position `k % 8`. Sign convention: a relaxed output
//! `h_k >= 0.5` maps to bit 1 (the `+1` side), `< 0.5` to bit 0. Padding
//! bits past `q` are always zero.

use std::fs::File;
use std::io::{BufReader, BufWriter, Read, Write};
use std::path::Path;

use crate::error::{Error, Result};
use crate::mat::Mat;

/// Magic bytes at the start of a code file.
pub const CODE_FILE_MAGIC: [u8; 4] = *b"HCOD";
/// Current code file format version.
pub const CODE_FILE_VERSION: u32 = 1;

/// `n` bit-packed codes of `q` bits each.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct BinaryCodeMatrix {
    n: usize,
    q: usize,
    words_per_code: usize,
    words: Vec<u64>,
}

/// Borrowed view of one packed code.
#[derive(Debug, Clone, Copy)]
pub struct Code<'a> {
    pub q: usize,
    pub words: &'a [u64],
}

/// One query's ranking over a database.
#[derive(Debug, Clone)]
pub struct RetrievalResult {
    pub query_index: usize,
    /// Database row indices, sorted by ascending distance, ties by
    /// ascending index.
    pub ids: Vec<usize>,
    /// Hamming distances aligned with `ids`, nondecreasing.
    pub distances: Vec<u32>,
}

impl BinaryCodeMatrix {
    pub fn new(q: usize) -> Self {
        assert!(q >= 1, "code length must be at least 1");
        BinaryCodeMatrix {
            n: 0,
            q,
            words_per_code: q.div_ceil(64),
            words: Vec::new(),
        }
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn q(&self) -> usize {
        self.q
    }

    pub fn code(&self, i: usize) -> Code<'_> {
        let w = self.words_per_code;
        Code {
            q: self.q,
            words: &self.words[i * w..(i + 1) * w],
        }
    }

    /// Append a code given as individual bits (`bits.len() == q`).
    pub fn push_bits(&mut self, bits: &[bool]) {
        assert_eq!(bits.len(), self.q, "bit count must equal q");
        let base = self.words.len();
        self.words.resize(base + self.words_per_code, 0);
        for (k, &bit) in bits.iter().enumerate() {
            if bit {
                self.words[base + k / 64] |= 1u64 << (k % 64);
            }
        }
        self.n += 1;
    }

    pub fn bit(&self, i: usize, k: usize) -> bool {
        let w = self.code(i).words;
        (w[k / 64] >> (k % 64)) & 1 == 1
    }

    /// Threshold relaxed hash outputs row-by-row: bit = 1 iff `h >= 0.5`.
    ///
    /// `0.5` itself maps to 1 (the sign function's zero is resolved to the
    /// positive side).
    pub fn binarize(h: &Mat) -> Self {
        let mut out = BinaryCodeMatrix::new(h.cols());
        let mut bits = vec![false; h.cols()];
        for i in 0..h.rows() {
            for (b, &v) in bits.iter_mut().zip(h.row(i)) {
                *b = v >= 0.5;
            }
            out.push_bits(&bits);
        }
        out
    }

    /// Serialize: 16-byte header (magic, version, n, q), then
    /// `ceil(q/8)` bytes per row, all little-endian.
    pub fn write_to<W: Write>(&self, w: &mut W) -> Result<()> {
        w.write_all(&CODE_FILE_MAGIC)?;
        w.write_all(&CODE_FILE_VERSION.to_le_bytes())?;
        w.write_all(&(self.n as u32).to_le_bytes())?;
        w.write_all(&(self.q as u32).to_le_bytes())?;
        let row_bytes = self.q.div_ceil(8);
        for i in 0..self.n {
            let code = self.code(i);
            for (b, word) in code.words.iter().enumerate() {
                let bytes = word.to_le_bytes();
                let remaining = row_bytes - (b * 8).min(row_bytes);
                w.write_all(&bytes[..remaining.min(8)])?;
            }
        }
        Ok(())
    }

    pub fn read_from<R: Read>(r: &mut R) -> Result<Self> {
        let mut header = [0u8; 16];
        r.read_exact(&mut header)
            .map_err(|_| Error::Length("code file shorter than header".into()))?;
        if header[0..4] != CODE_FILE_MAGIC {
            return Err(Error::Format("bad code file magic".into()));
        }
        let version = u32::from_le_bytes(header[4..8].try_into().unwrap());
        if version != CODE_FILE_VERSION {
            return Err(Error::Format(format!(
                "unsupported code file version {version}"
            )));
        }
        let n = u32::from_le_bytes(header[8..12].try_into().unwrap()) as usize;
        let q = u32::from_le_bytes(header[12..16].try_into().unwrap()) as usize;
        if q == 0 {
            return Err(Error::Format("code length 0 in header".into()));
        }
        let row_bytes = q.div_ceil(8);
        let mut payload = Vec::new();
        r.read_to_end(&mut payload)?;
        if payload.len() != n * row_bytes {
            return Err(Error::Length(format!(
                "code payload: expected {} bytes, found {}",
                n * row_bytes,
                payload.len()
            )));
        }
        let mut out = BinaryCodeMatrix::new(q);
        let mut bits = vec![false; q];
        for row in payload.chunks_exact(row_bytes) {
            for (k, b) in bits.iter_mut().enumerate() {
                *b = (row[k / 8] >> (k % 8)) & 1 == 1;
            }
            out.push_bits(&bits);
        }
        Ok(out)
    }

    pub fn write_file(&self, path: &Path) -> Result<()> {
        let mut w = BufWriter::new(File::create(path)?);
        self.write_to(&mut w)?;
        w.flush()?;
        Ok(())
    }

    pub fn read_file(path: &Path) -> Result<Self> {
        let mut r = BufReader::new(File::open(path)?);
        Self::read_from(&mut r)
    }
}

/// Hamming distance between two packed codes of equal length.
pub fn hamming_distance(a: Code<'_>, b: Code<'_>) -> Result<u32> {
    if a.q != b.q {
        return Err(Error::Contract(format!(
            "hamming distance requires equal code lengths, got {} and {}",
            a.q, b.q
        )));
    }
    Ok(a.words
        .iter()
        .zip(b.words)
        .map(|(x, y)| (x ^ y).count_ones())
        .sum())
}

/// Exhaustively rank a database by Hamming distance from `query`.
///
/// Ties are broken by ascending database row index; `top_k` truncates the
/// full ranking. An empty database yields an empty result.
pub fn rank_database(
    query_index: usize,
    query: Code<'_>,
    db: &BinaryCodeMatrix,
    top_k: Option<usize>,
) -> Result<RetrievalResult> {
    if db.n > 0 && query.q != db.q {
        return Err(Error::Contract(format!(
            "query code length {} does not match database {}",
            query.q, db.q
        )));
    }
    let mut order: Vec<usize> = (0..db.n).collect();
    let mut dist = Vec::with_capacity(db.n);
    for i in 0..db.n {
        dist.push(hamming_distance(query, db.code(i))?);
    }
    order.sort_unstable_by_key(|&i| (dist[i], i));
    if let Some(k) = top_k {
        order.truncate(k);
    }
    let distances = order.iter().map(|&i| dist[i]).collect();
    Ok(RetrievalResult {
        query_index,
        ids: order,
        distances,
    })
}

//! Binary embedding file format.
//!
//! Little-endian layout:
//!
//! ```text
//! magic "JWEE" | version u32 | d u32 | word count u64 | entity count u64 | flags u8
//! vocabulary block: per symbol (words first, then entities, in id order):
//!   kind u8 (0 = word, 1 = entity) | symbol length u32 | UTF-8 bytes | count u64
//! V rows as f32, row-major in id order
//! U rows (same shape), present iff flags bit 0 is set
//! ```

use std::io::{Read, Write};
use std::path::Path;
use std::sync::Arc;

use crate::corpus::Vocabulary;
use crate::error::{Error, Result};

use super::EmbeddingModel;

const MAGIC: &[u8; 4] = b"JWEE";
const VERSION: u32 = 1;
const FLAG_HAS_U: u8 = 0b0000_0001;

impl EmbeddingModel {
    /// Serializes the model. `include_u` persists the output matrix so
    /// training can be resumed; it requires the matrix to be present.
    pub fn save_to<W: Write>(&self, mut w: W, include_u: bool) -> Result<()> {
        if include_u && self.u_data().is_none() {
            return Err(Error::data(
                "cannot persist output vectors: model was loaded without them",
            ));
        }
        let vocab = self.vocab();
        w.write_all(MAGIC)?;
        w.write_all(&VERSION.to_le_bytes())?;
        w.write_all(&(self.dim() as u32).to_le_bytes())?;
        w.write_all(&(vocab.word_count() as u64).to_le_bytes())?;
        w.write_all(&(vocab.entity_count() as u64).to_le_bytes())?;
        w.write_all(&[if include_u { FLAG_HAS_U } else { 0 }])?;

        let mut write_symbol = |kind: u8, symbol: &str, count: u64| -> Result<()> {
            w.write_all(&[kind])?;
            w.write_all(&(symbol.len() as u32).to_le_bytes())?;
            w.write_all(symbol.as_bytes())?;
            w.write_all(&count.to_le_bytes())?;
            Ok(())
        };
        for id in vocab.word_ids() {
            write_symbol(0, vocab.symbol(id), vocab.count(id))?;
        }
        for id in vocab.entity_ids() {
            write_symbol(1, vocab.symbol(id), vocab.count(id))?;
        }

        write_f32s(&mut w, self.v_data())?;
        if include_u {
            write_f32s(&mut w, self.u_data().expect("checked above"))?;
        }
        Ok(())
    }

    pub fn save(&self, path: impl AsRef<Path>, include_u: bool) -> Result<()> {
        let mut file = std::io::BufWriter::new(std::fs::File::create(path)?);
        self.save_to(&mut file, include_u)?;
        file.flush()?;
        Ok(())
    }

    /// Deserializes a model, validating magic, version, and exact lengths.
    pub fn load_from<R: Read>(mut reader: R) -> Result<Self> {
        let mut buf = Vec::new();
        reader.read_to_end(&mut buf)?;
        let mut cursor = Cursor { buf: &buf, pos: 0 };

        let magic = cursor.take(4, "magic")?;
        if magic != MAGIC {
            return Err(Error::format(format!(
                "not an embedding file: bad magic {magic:?}, expected {MAGIC:?}"
            )));
        }
        let version = cursor.u32("version")?;
        if version != VERSION {
            return Err(Error::format(format!(
                "unsupported embedding format version {version}, expected {VERSION}"
            )));
        }
        let dim = cursor.u32("dimension")? as usize;
        if dim == 0 {
            return Err(Error::format("embedding dimension must be >= 1"));
        }
        let word_count = cursor.u64("word count")? as usize;
        let entity_count = cursor.u64("entity count")? as usize;
        let flags = cursor.take(1, "flags")?[0];

        let mut words = Vec::with_capacity(word_count);
        let mut entities = Vec::with_capacity(entity_count);
        for i in 0..word_count + entity_count {
            let expected_kind = if i < word_count { 0 } else { 1 };
            let kind = cursor.take(1, "symbol kind")?[0];
            if kind != expected_kind {
                return Err(Error::format(format!(
                    "vocabulary block out of order: symbol {i} has kind {kind}, expected {expected_kind}"
                )));
            }
            let len = cursor.u32("symbol length")? as usize;
            let bytes = cursor.take(len, "symbol bytes")?;
            let symbol = std::str::from_utf8(bytes)
                .map_err(|_| Error::format(format!("symbol {i} is not valid UTF-8")))?
                .to_string();
            let count = cursor.u64("symbol count")?;
            if kind == 0 {
                words.push((symbol, count));
            } else {
                entities.push((symbol, count));
            }
        }
        let vocab = Arc::new(Vocabulary::from_symbol_lists(words, entities));

        let rows = word_count + entity_count;
        let v = cursor.f32s(rows * dim, "V matrix")?;
        let u = if flags & FLAG_HAS_U != 0 {
            Some(cursor.f32s(rows * dim, "U matrix")?)
        } else {
            None
        };
        if cursor.pos != buf.len() {
            return Err(Error::format(format!(
                "trailing data: {} bytes past the expected end of file",
                buf.len() - cursor.pos
            )));
        }
        EmbeddingModel::from_parts(vocab, dim, v, u)
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        Self::load_from(std::fs::File::open(path)?)
    }
}

fn write_f32s<W: Write>(w: &mut W, values: &[f32]) -> Result<()> {
    let mut buf = Vec::with_capacity(4096);
    for chunk in values.chunks(1024) {
        buf.clear();
        for v in chunk {
            buf.extend_from_slice(&v.to_le_bytes());
        }
        w.write_all(&buf)?;
    }
    Ok(())
}

struct Cursor<'a> {
    buf: &'a [u8],
    pos: usize,
}

impl<'a> Cursor<'a> {
    fn take(&mut self, n: usize, what: &str) -> Result<&'a [u8]> {
        let available = self.buf.len() - self.pos;
        if available < n {
            return Err(Error::format(format!(
                "embedding file truncated reading {what}: expected {n} bytes at offset {}, only {available} available",
                self.pos
            )));
        }
        let out = &self.buf[self.pos..self.pos + n];
        self.pos += n;
        Ok(out)
    }

    fn u32(&mut self, what: &str) -> Result<u32> {
        Ok(u32::from_le_bytes(self.take(4, what)?.try_into().unwrap()))
    }

    fn u64(&mut self, what: &str) -> Result<u64> {
        Ok(u64::from_le_bytes(self.take(8, what)?.try_into().unwrap()))
    }

    fn f32s(&mut self, n: usize, what: &str) -> Result<Vec<f32>> {
        let bytes = self.take(n * 4, what)?;
        Ok(bytes
            .chunks_exact(4)
            .map(|c| f32::from_le_bytes(c.try_into().unwrap()))
            .collect())
    }
}

#[cfg(test)]
mod tests {
    use super::super::TrainingConfig;
    use super::*;
    use crate::corpus::testutil::article;
    use crate::corpus::Corpus;

    fn model() -> EmbeddingModel {
        let corpus = Corpus::from_pages(vec![
            article("Alpha", "x y z x y [[Beta]]"),
            article("Beta", "x z z"),
        ])
        .unwrap();
        let vocab = Arc::new(Vocabulary::build(&corpus, 1).unwrap());
        let config = TrainingConfig {
            dim: 7,
            seed: 5,
            ..TrainingConfig::default()
        };
        EmbeddingModel::init(vocab, &config).unwrap()
    }

    #[test]
    fn round_trip_is_bit_identical() {
        let m = model();
        for include_u in [false, true] {
            let mut buf = Vec::new();
            m.save_to(&mut buf, include_u).unwrap();
            let loaded = EmbeddingModel::load_from(buf.as_slice()).unwrap();
            assert_eq!(loaded.dim(), m.dim());
            assert_eq!(loaded.v_data(), m.v_data());
            assert_eq!(loaded.has_output_vectors(), include_u);
            if include_u {
                assert_eq!(loaded.u_data(), m.u_data());
            }
            let lv = loaded.vocab();
            let mv = m.vocab();
            assert_eq!(lv.word_count(), mv.word_count());
            for id in mv.word_ids().chain(mv.entity_ids()) {
                assert_eq!(lv.symbol(id), mv.symbol(id));
                assert_eq!(lv.count(id), mv.count(id));
            }
        }
    }

    #[test]
    fn wrong_magic_is_rejected() {
        let m = model();
        let mut buf = Vec::new();
        m.save_to(&mut buf, false).unwrap();
        buf[0] = b'X';
        let err = EmbeddingModel::load_from(buf.as_slice()).unwrap_err();
        assert!(err.to_string().contains("bad magic"), "{err}");
    }

    #[test]
    fn truncation_names_expected_and_actual_bytes() {
        let m = model();
        let mut buf = Vec::new();
        m.save_to(&mut buf, false).unwrap();
        // Cut into the middle of the V matrix.
        buf.truncate(buf.len() - 10);
        let err = EmbeddingModel::load_from(buf.as_slice()).unwrap_err();
        let msg = err.to_string();
        assert!(msg.contains("truncated reading V matrix"), "{msg}");
        assert!(msg.contains("expected") && msg.contains("available"), "{msg}");
    }

    #[test]
    fn trailing_bytes_are_rejected() {
        let m = model();
        let mut buf = Vec::new();
        m.save_to(&mut buf, false).unwrap();
        buf.extend_from_slice(&[0, 1, 2]);
        assert!(EmbeddingModel::load_from(buf.as_slice()).is_err());
    }
}

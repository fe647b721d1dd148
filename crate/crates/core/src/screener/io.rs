use std::fs;
use std::io::{BufRead, BufReader, BufWriter, Read, Write};
use std::path::Path;

use byteorder::{LittleEndian, ReadBytesExt, WriteBytesExt};

use super::network::{ModelConfig, Params, SequenceModel, TENSOR_NAMES};
use super::tensor::Tensor;
use super::vocab::Vocabulary;
use super::{LabeledSentence, ScreenerError};

const MAGIC: &[u8; 8] = b"EVDSEQM\0";
pub const FORMAT_VERSION: u32 = 1;

/// Layout (little endian): magic, version, label count, vocab size, embed dim, hidden, dense units,
/// dropout, vocabulary strings (u32 length + UTF-8), then each tensor as rows, cols, row-major f64.
pub fn write_model<W: Write>(model: &SequenceModel, mut out: W) -> Result<(), ScreenerError> {
    model.validate()?;
    out.write_all(MAGIC)?;
    out.write_u32::<LittleEndian>(FORMAT_VERSION)?;
    out.write_u32::<LittleEndian>(super::PicoLabel::COUNT as u32)?;
    out.write_u32::<LittleEndian>(model.vocab.len() as u32)?;
    out.write_u32::<LittleEndian>(model.config.embed_dim as u32)?;
    out.write_u32::<LittleEndian>(model.config.hidden as u32)?;
    out.write_u32::<LittleEndian>(model.config.dense_units as u32)?;
    out.write_f64::<LittleEndian>(model.config.dropout)?;
    for token in model.vocab.tokens() {
        out.write_u32::<LittleEndian>(token.len() as u32)?;
        out.write_all(token.as_bytes())?;
    }
    for t in model.params.tensors() {
        out.write_u32::<LittleEndian>(t.rows as u32)?;
        out.write_u32::<LittleEndian>(t.cols as u32)?;
        for v in &t.data {
            out.write_f64::<LittleEndian>(*v)?;
        }
    }
    out.flush()?;
    Ok(())
}

fn bad(reason: impl Into<String>) -> ScreenerError {
    ScreenerError::UnknownModel(reason.into())
}

const MAX_DIM: u32 = 1 << 24;

pub fn read_model<R: Read>(mut input: R) -> Result<SequenceModel, ScreenerError> {
    let mut magic = [0u8; 8];
    input.read_exact(&mut magic).map_err(|_| bad("truncated header"))?;
    if &magic != MAGIC {
        return Err(bad("not a sequence model file"));
    }
    let mut u32_field = |name: &str| -> Result<u32, ScreenerError> {
        input.read_u32::<LittleEndian>().map_err(|_| bad(format!("truncated at {name}")))
    };
    let version = u32_field("version")?;
    if version != FORMAT_VERSION {
        return Err(bad(format!("unsupported format version {version}")));
    }
    let labels = u32_field("label count")?;
    if labels as usize != super::PicoLabel::COUNT {
        return Err(bad(format!("expected 6 labels, found {labels}")));
    }
    let vocab_size = u32_field("vocab size")?;
    let embed_dim = u32_field("embed dim")?;
    let hidden = u32_field("hidden")?;
    let dense_units = u32_field("dense units")?;
    if [vocab_size, embed_dim, hidden, dense_units].iter().any(|&d| d > MAX_DIM) {
        return Err(bad("implausible dimensions"));
    }
    let dropout = input.read_f64::<LittleEndian>().map_err(|_| bad("truncated at dropout"))?;
    let config = ModelConfig {
        embed_dim: embed_dim as usize,
        hidden: hidden as usize,
        dense_units: dense_units as usize,
        dropout,
    };
    let mut tokens = Vec::with_capacity(vocab_size as usize);
    for _ in 0..vocab_size {
        let len = input.read_u32::<LittleEndian>().map_err(|_| bad("truncated vocabulary"))?;
        if len > MAX_DIM {
            return Err(bad("implausible token length"));
        }
        let mut buf = vec![0u8; len as usize];
        input.read_exact(&mut buf).map_err(|_| bad("truncated vocabulary"))?;
        tokens.push(String::from_utf8(buf).map_err(|_| bad("vocabulary is not UTF-8"))?);
    }
    let vocab = Vocabulary::from_tokens(tokens).ok_or_else(|| bad("malformed vocabulary"))?;
    let mut tensors = Vec::with_capacity(TENSOR_NAMES.len());
    for _ in TENSOR_NAMES {
        let rows = input.read_u32::<LittleEndian>().map_err(|_| bad("truncated tensor"))?;
        let cols = input.read_u32::<LittleEndian>().map_err(|_| bad("truncated tensor"))?;
        let n = (rows as u64) * (cols as u64);
        if n > (MAX_DIM as u64) * 16 {
            return Err(bad("implausible tensor size"));
        }
        let mut data = vec![0.0; n as usize];
        input
            .read_f64_into::<LittleEndian>(&mut data)
            .map_err(|_| bad("truncated tensor data"))?;
        tensors.push(Tensor {
            rows: rows as usize,
            cols: cols as usize,
            data,
        });
    }
    let params = Params::from_tensors(tensors).expect("tensor count");
    let mut trailing = [0u8; 1];
    if input.read(&mut trailing)? != 0 {
        return Err(bad("trailing bytes after last tensor"));
    }
    let model = SequenceModel { config, vocab, params };
    model.validate().map_err(|e| bad(e.to_string()))?;
    Ok(model)
}

pub fn save_model(model: &SequenceModel, path: &Path) -> Result<(), ScreenerError> {
    let tmp = path.with_extension("tmp");
    write_model(model, BufWriter::new(fs::File::create(&tmp)?))?;
    fs::rename(tmp, path)?;
    Ok(())
}

pub fn load_model(path: &Path) -> Result<SequenceModel, ScreenerError> {
    let file = fs::File::open(path).map_err(|e| bad(format!("{}: {e}", path.display())))?;
    read_model(BufReader::new(file))
}

/// Reads `{"sentence", "label"}` lines. Blank lines are skipped.
pub fn read_dataset<R: BufRead>(input: R) -> Result<Vec<LabeledSentence>, ScreenerError> {
    let mut out = Vec::new();
    for (n, line) in input.lines().enumerate() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        let ex: LabeledSentence = serde_json::from_str(&line).map_err(|e| ScreenerError::BadDataset {
            line: n + 1,
            reason: e.to_string(),
        })?;
        out.push(ex);
    }
    Ok(out)
}

pub fn write_dataset<W: Write>(dataset: &[LabeledSentence], mut out: W) -> Result<(), ScreenerError> {
    for ex in dataset {
        serde_json::to_writer(&mut out, ex).map_err(std::io::Error::from)?;
        out.write_all(b"\n")?;
    }
    out.flush()?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::screener::PicoLabel;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn model() -> SequenceModel {
        let vocab = Vocabulary::from_sentences(["heart failure trial", "usual care"].iter().copied());
        let cfg = ModelConfig {
            embed_dim: 4,
            hidden: 3,
            dense_units: 5,
            dropout: 0.1,
        };
        SequenceModel::new(vocab, cfg, &mut ChaCha8Rng::seed_from_u64(9)).unwrap()
    }

    #[test]
    fn round_trip_is_exact() {
        let m = model();
        let mut buf = Vec::new();
        write_model(&m, &mut buf).unwrap();
        let back = read_model(buf.as_slice()).unwrap();
        assert_eq!(back, m);
        assert_eq!(back.predict_sentence("usual care"), m.predict_sentence("usual care"));
    }

    #[test]
    fn corrupt_files_are_rejected() {
        let mut buf = Vec::new();
        write_model(&model(), &mut buf).unwrap();
        assert!(matches!(read_model(&buf[..buf.len() - 3]), Err(ScreenerError::UnknownModel(_))));
        let mut wrong = buf.clone();
        wrong[0] = b'X';
        assert!(matches!(read_model(wrong.as_slice()), Err(ScreenerError::UnknownModel(_))));
        let mut version = buf.clone();
        version[8] = 9;
        assert!(matches!(read_model(version.as_slice()), Err(ScreenerError::UnknownModel(_))));
        let mut extra = buf;
        extra.push(0);
        assert!(read_model(extra.as_slice()).is_err());
    }

    #[test]
    fn missing_file_is_unknown_model() {
        let dir = tempfile::tempdir().unwrap();
        assert!(matches!(load_model(&dir.path().join("none.bin")), Err(ScreenerError::UnknownModel(_))));
        let path = dir.path().join("m.bin");
        save_model(&model(), &path).unwrap();
        assert_eq!(load_model(&path).unwrap(), model());
    }

    #[test]
    fn dataset_round_trip_and_errors() {
        let data = vec![
            LabeledSentence::new("Participants were 40 adults with stroke.", PicoLabel::P),
            LabeledSentence::new("Funding was provided.", PicoLabel::Other),
        ];
        let mut buf = Vec::new();
        write_dataset(&data, &mut buf).unwrap();
        assert!(String::from_utf8_lossy(&buf).contains(r#""label":"OTHER""#));
        assert_eq!(read_dataset(buf.as_slice()).unwrap(), data);
        let bad = b"{\"sentence\":\"x\",\"label\":\"Q\"}\n";
        assert!(matches!(read_dataset(&bad[..]), Err(ScreenerError::BadDataset { line: 1, .. })));
    }
}

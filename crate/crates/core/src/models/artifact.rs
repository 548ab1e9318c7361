//! Binary model files: `LCST`, a `u32` format version, a length-prefixed
//! JSON header, binary parameter sections and a trailing SHA-256 of all
//! preceding bytes.

use std::io::Cursor;
use std::path::Path;

use loadcast_nn::io::{read_tensor, write_tensor};
use loadcast_nn::{NnError, Tensor};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use sha2::{Digest, Sha256};

use super::{build_model, ArtifactHeader, LinearPredictor, ModelError, ModelKind, ModelParams, Result, TrainedModel};

pub const FORMAT_VERSION: u32 = 1;
const MAGIC: &[u8; 4] = b"LCST";
const DIGEST_LEN: usize = 32;

fn corrupt(msg: impl Into<String>) -> ModelError {
    ModelError::CorruptArtifact(msg.into())
}

fn from_nn(e: NnError) -> ModelError {
    corrupt(e.to_string())
}

impl TrainedModel {
    pub fn to_bytes(&self) -> Result<Vec<u8>> {
        let header = ArtifactHeader {
            spec: self.spec.clone(),
            selector: self.selector.clone(),
            window: self.window,
            fractions: self.fractions,
            channel_names: self.channel_names.clone(),
            load_index: self.load_index,
            normalizer: self.normalizer.clone(),
            history: self.history.clone(),
        };
        let json = serde_json::to_vec(&header).map_err(|e| corrupt(e.to_string()))?;
        let mut out = Vec::new();
        out.extend_from_slice(MAGIC);
        out.extend_from_slice(&FORMAT_VERSION.to_le_bytes());
        out.extend_from_slice(&(json.len() as u64).to_le_bytes());
        out.extend_from_slice(&json);
        match &self.params {
            ModelParams::Persistence => {}
            ModelParams::Svr(predictors) => {
                out.extend_from_slice(&(predictors.len() as u32).to_le_bytes());
                for p in predictors {
                    write_tensor(&mut out, &Tensor::from_vec(&[p.weights.len()], p.weights.clone())?)?;
                    write_tensor(&mut out, &Tensor::from_vec(&[1], vec![p.bias])?)?;
                }
            }
            ModelParams::Network(net) => net.write_params(&mut out)?,
        }
        let digest = Sha256::digest(&out);
        out.extend_from_slice(&digest[..]);
        Ok(out)
    }

    pub fn from_bytes(bytes: &[u8]) -> Result<Self> {
        if bytes.len() < 16 + DIGEST_LEN || &bytes[..4] != MAGIC {
            return Err(corrupt("missing LCST header"));
        }
        let version = u32::from_le_bytes(bytes[4..8].try_into().expect("4 bytes"));
        if version != FORMAT_VERSION {
            return Err(ModelError::VersionMismatch {
                found: version,
                supported: FORMAT_VERSION,
            });
        }
        let (body, digest) = bytes.split_at(bytes.len() - DIGEST_LEN);
        if Sha256::digest(body)[..] != *digest {
            return Err(corrupt("checksum mismatch"));
        }
        let json_len = u64::from_le_bytes(body[8..16].try_into().expect("8 bytes")) as usize;
        let json = body
            .get(16..16usize.saturating_add(json_len))
            .ok_or_else(|| corrupt("header length exceeds file"))?;
        let header: ArtifactHeader = serde_json::from_slice(json).map_err(|e| corrupt(format!("header: {e}")))?;
        let mut rest = Cursor::new(&body[16 + json_len..]);
        let params = match header.spec.kind {
            ModelKind::Persistence => ModelParams::Persistence,
            ModelKind::Svr => {
                let count = loadcast_nn::io::read_u32(&mut rest).map_err(from_nn)? as usize;
                let predictors = (0..count)
                    .map(|_| {
                        let weights = read_tensor(&mut rest)?.into_data();
                        let bias = read_tensor(&mut rest)?.into_data();
                        match bias.as_slice() {
                            [b] => Ok(LinearPredictor { weights, bias: *b }),
                            _ => Err(NnError::Corrupt("svr bias must be a single value".into())),
                        }
                    })
                    .collect::<std::result::Result<Vec<_>, _>>()
                    .map_err(from_nn)?;
                ModelParams::Svr(predictors)
            }
            _ => {
                let mut rng = ChaCha8Rng::seed_from_u64(0);
                let mut net = build_model(&header.spec, header.window, header.channel_names.len(), &mut rng)?;
                net.read_params(&mut rest).map_err(from_nn)?;
                ModelParams::Network(net)
            }
        };
        if rest.position() as usize != rest.get_ref().len() {
            return Err(corrupt("trailing bytes after parameters"));
        }
        Ok(TrainedModel {
            spec: header.spec,
            selector: header.selector,
            window: header.window,
            fractions: header.fractions,
            channel_names: header.channel_names,
            load_index: header.load_index,
            normalizer: header.normalizer,
            history: header.history,
            params,
        })
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        std::fs::write(path, self.to_bytes()?).map_err(|source| ModelError::Io {
            path: path.display().to_string(),
            source,
        })
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let bytes = std::fs::read(path).map_err(|source| ModelError::Io {
            path: path.display().to_string(),
            source,
        })?;
        Self::from_bytes(&bytes)
    }
}

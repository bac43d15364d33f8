//! Input batches for the proxies: synthetic Gaussian images or samples from
//! a raw image file.
//!
//! File layout: four little-endian `u32` (N, C, H, W) followed by
//! `N·C·H·W` little-endian `f32`.

use std::fs;
use std::path::Path;
use std::sync::Arc;

use rand::seq::index;
use rand::Rng as _;

use crate::error::{Error, Result};
use crate::rng::{derive_seed, rng_from};
use crate::tensor::Tensor;

#[derive(Debug, Clone, Default)]
pub enum InputSource {
    #[default]
    Gaussian,
    /// `[N, C, H, W]` images.
    Images(Arc<Tensor>),
}

impl InputSource {
    pub fn from_file(path: impl AsRef<Path>) -> Result<Self> {
        Ok(InputSource::Images(Arc::new(load_batch_file(path)?)))
    }

    pub fn name(&self) -> &'static str {
        match self {
            InputSource::Gaussian => "gaussian",
            InputSource::Images(_) => "image_file",
        }
    }

    /// `batch` samples of shape `[C, H, W]` for draw `index` under `seed`.
    /// Image draws pick distinct images.
    pub fn batch(&self, shape: [usize; 3], batch: usize, seed: u64, index: u64) -> Result<Tensor> {
        let seed = derive_seed(seed, "ntk-batch", index);
        match self {
            InputSource::Gaussian => Ok(Tensor::randn(&[batch, shape[0], shape[1], shape[2]], seed)),
            InputSource::Images(images) => {
                check_image_shape(images, shape, false)?;
                if images.batch() < batch {
                    return Err(Error::Config(format!(
                        "image file holds {} images, batch needs {batch}",
                        images.batch()
                    )));
                }
                let picks = index::sample(&mut rng_from(seed), images.batch(), batch).into_vec();
                Ok(images.select(&picks))
            }
        }
    }

    /// `count` samples at `shape`; a longer draw extends a shorter one. Images
    /// are drawn with replacement and block-averaged down to `shape`.
    pub fn samples(&self, shape: [usize; 3], count: usize, seed: u64) -> Result<Tensor> {
        let seed = derive_seed(seed, "lr-inputs", 0);
        match self {
            InputSource::Gaussian => Ok(Tensor::randn(&[count, shape[0], shape[1], shape[2]], seed)),
            InputSource::Images(images) => {
                check_image_shape(images, shape, true)?;
                let mut rng = rng_from(seed);
                let picks: Vec<usize> = (0..count).map(|_| rng.random_range(0..images.batch())).collect();
                Ok(downsample(&images.select(&picks), shape))
            }
        }
    }
}

fn check_image_shape(images: &Tensor, shape: [usize; 3], allow_downsample: bool) -> Result<()> {
    let s = images.shape();
    let fits = if allow_downsample {
        s[1] == shape[0] && s[2].is_multiple_of(shape[1]) && s[3].is_multiple_of(shape[2])
    } else {
        s[1..] == shape[..]
    };
    if !fits {
        return Err(Error::Config(format!(
            "image file samples are {:?}, need {shape:?}",
            &s[1..]
        )));
    }
    Ok(())
}

fn downsample(images: &Tensor, shape: [usize; 3]) -> Tensor {
    let [n, c, h, w] = [images.shape()[0], images.shape()[1], images.shape()[2], images.shape()[3]];
    let (fh, fw) = (h / shape[1], w / shape[2]);
    if fh == 1 && fw == 1 {
        return images.clone();
    }
    let mut out = Tensor::zeros(&[n, c, shape[1], shape[2]]);
    for s in 0..n {
        let src = images.sample(s);
        let dst = out.sample_mut(s);
        for ch in 0..c {
            for oh in 0..shape[1] {
                for ow in 0..shape[2] {
                    let mut acc = 0.0;
                    for ih in oh * fh..(oh + 1) * fh {
                        for iw in ow * fw..(ow + 1) * fw {
                            acc += src[(ch * h + ih) * w + iw];
                        }
                    }
                    dst[(ch * shape[1] + oh) * shape[2] + ow] = acc / (fh * fw) as f64;
                }
            }
        }
    }
    out
}

pub fn load_batch_file(path: impl AsRef<Path>) -> Result<Tensor> {
    let path = path.as_ref();
    let bytes = fs::read(path).map_err(|e| Error::io(path, e))?;
    let bad = |detail: String| Error::BatchFile {
        path: path.to_path_buf(),
        detail,
    };
    if bytes.len() < 16 {
        return Err(bad(format!("{} bytes is shorter than the 16-byte header", bytes.len())));
    }
    let dims: Vec<usize> = bytes[..16]
        .chunks_exact(4)
        .map(|c| u32::from_le_bytes(c.try_into().unwrap()) as usize)
        .collect();
    if dims.contains(&0) {
        return Err(bad(format!("header {dims:?} has a zero dimension")));
    }
    let count: usize = dims.iter().product();
    let body = &bytes[16..];
    if body.len() != count * 4 {
        return Err(bad(format!(
            "header {dims:?} needs {} data bytes, found {}",
            count * 4,
            body.len()
        )));
    }
    let data = body
        .chunks_exact(4)
        .map(|c| f64::from(f32::from_le_bytes(c.try_into().unwrap())))
        .collect();
    Tensor::new(dims, data)
}

/// Writes a `[N, C, H, W]` tensor in the batch-file layout (values narrowed to `f32`).
pub fn write_batch_file(path: impl AsRef<Path>, images: &Tensor) -> Result<()> {
    let path = path.as_ref();
    if images.shape().len() != 4 {
        return Err(Error::Config(format!("expected [N, C, H, W], got {:?}", images.shape())));
    }
    let mut bytes = Vec::with_capacity(16 + images.len() * 4);
    for &d in images.shape() {
        let d = u32::try_from(d).map_err(|_| Error::Config(format!("dimension {d} exceeds u32")))?;
        bytes.extend_from_slice(&d.to_le_bytes());
    }
    for &v in images.data() {
        bytes.extend_from_slice(&(v as f32).to_le_bytes());
    }
    fs::write(path, bytes).map_err(|e| Error::io(path, e))
}

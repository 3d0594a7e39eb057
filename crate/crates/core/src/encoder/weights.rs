use std::collections::BTreeMap;
use std::io::{Read, Write};

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::snapshot::{push_f32s, read_framed, take_f32s, write_framed};
use crate::tensor::{conv2d, Tensor};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum FeatureMode {
    SeededConv,
    Handcrafted,
}

/// Channel widths of the seeded-conv network. Key and value heads are derived
/// from the deepest width: `C/8` and `C/2`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Widths {
    pub stem: usize,
    pub c4: usize,
    pub c8: usize,
    pub c16: usize,
    pub dec16: usize,
    pub dec8: usize,
    pub dec4: usize,
}

impl Default for Widths {
    fn default() -> Self {
        Self {
            stem: 32,
            c4: 64,
            c8: 128,
            c16: 256,
            dec16: 256,
            dec8: 128,
            dec4: 64,
        }
    }
}

impl Widths {
    pub fn key(&self) -> usize {
        (self.c16 / 8).max(1)
    }

    pub fn value(&self) -> usize {
        (self.c16 / 2).max(1)
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct ConvLayer {
    pub weight: Tensor,
    pub bias: Vec<f32>,
}

impl ConvLayer {
    pub fn kernel(&self) -> usize {
        self.weight.shape()[0]
    }

    /// Same-padding convolution at the given stride.
    pub fn forward(&self, f: &Tensor, stride: usize) -> Result<Tensor> {
        conv2d(f, &self.weight, Some(&self.bias), stride, self.kernel() / 2)
    }
}

/// Every learnable tensor of the model, keyed by layer name.
///
/// Identical seeds give bitwise-identical tensors. Biases start at zero.
#[derive(Clone, Debug, PartialEq)]
pub struct EncoderWeights {
    pub seed: u64,
    pub mode: FeatureMode,
    pub widths: Widths,
    /// Logit scale applied to unit-norm handcrafted keys.
    pub key_gain: f32,
    layers: BTreeMap<String, ConvLayer>,
}

pub const DEFAULT_KEY_GAIN: f32 = 10.0;

impl EncoderWeights {
    pub fn seeded(seed: u64, widths: Widths) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut layers = BTreeMap::new();
        let k = widths.key();
        let v = widths.value();
        // (name, kernel, cin, cout); the order fixes the RNG stream
        let specs: [(&str, usize, usize, usize); 17] = [
            ("stem", 3, 3, widths.stem),
            ("stage4", 3, widths.stem, widths.c4),
            ("stage8", 3, widths.c4, widths.c8),
            ("stage16", 3, widths.c8, widths.c16),
            ("query.key", 3, widths.c16, k),
            ("query.value", 3, widths.c16, v),
            ("lae.mask4", 1, 16, widths.c4),
            ("lae.fuse4", 1, 2 * widths.c4, widths.c4),
            ("lae.fuse8", 1, 4 * widths.c4 + widths.c8, widths.c8),
            ("lae.fuse16", 1, 4 * widths.c8 + widths.c16, widths.c16),
            ("ref.key", 3, widths.c16, k),
            ("ref.value", 3, widths.c16, v),
            ("dec.conv16", 3, 2 * v, widths.dec16),
            ("dec.skip8", 1, widths.c8, widths.dec16),
            ("dec.conv8", 3, widths.dec16, widths.dec8),
            ("dec.skip4", 1, widths.c4, widths.dec8),
            ("dec.conv4", 3, widths.dec8, widths.dec4),
        ];
        for (name, kernel, cin, cout) in specs {
            layers.insert(name.to_string(), he_init(&mut rng, kernel, cin, cout));
        }
        layers.insert("dec.head".into(), he_init(&mut rng, 1, widths.dec4, 1));
        Self {
            seed,
            mode: FeatureMode::SeededConv,
            widths,
            key_gain: DEFAULT_KEY_GAIN,
            layers,
        }
    }

    pub fn handcrafted(key_gain: f32) -> Self {
        Self {
            seed: 0,
            mode: FeatureMode::Handcrafted,
            widths: Widths::default(),
            key_gain,
            layers: BTreeMap::new(),
        }
    }

    pub fn layer(&self, name: &str) -> Result<&ConvLayer> {
        self.layers.get(name).ok_or_else(|| {
            Error::Mode(format!(
                "weights have no layer `{name}` ({:?} mode)",
                self.mode
            ))
        })
    }

    pub fn layer_names(&self) -> impl Iterator<Item = &str> {
        self.layers.keys().map(String::as_str)
    }

    pub fn layer_mut(&mut self, name: &str) -> Option<&mut ConvLayer> {
        self.layers.get_mut(name)
    }

    pub fn save<W: Write>(&self, out: W) -> Result<()> {
        let mut tensors = Vec::new();
        let mut payload = Vec::new();
        for (name, layer) in &self.layers {
            tensors.push(TensorEntry {
                name: format!("{name}.weight"),
                shape: layer.weight.shape().to_vec(),
            });
            push_f32s(&mut payload, layer.weight.data());
            tensors.push(TensorEntry {
                name: format!("{name}.bias"),
                shape: vec![layer.bias.len()],
            });
            push_f32s(&mut payload, &layer.bias);
        }
        let header = WeightsHeader {
            format: WEIGHTS_FORMAT.into(),
            seed: self.seed,
            mode: self.mode,
            widths: self.widths,
            key_gain: self.key_gain,
            tensors,
        };
        write_framed(out, &header, &payload)
    }

    pub fn load<R: Read>(input: R) -> Result<Self> {
        const WHAT: &str = "weight snapshot";
        let (header, payload): (WeightsHeader, _) = read_framed(input, WHAT)?;
        if header.format != WEIGHTS_FORMAT {
            return Err(Error::Format {
                what: WHAT,
                reason: format!("unknown format `{}`", header.format),
            });
        }
        let mut rest = payload.as_slice();
        let mut layers = BTreeMap::new();
        let mut entries = header.tensors.into_iter();
        while let Some(w) = entries.next() {
            let b = entries.next().ok_or_else(|| Error::Format {
                what: WHAT,
                reason: format!("`{}` has no bias entry", w.name),
            })?;
            let name = w
                .name
                .strip_suffix(".weight")
                .ok_or_else(|| Error::Format {
                    what: WHAT,
                    reason: format!("expected a `.weight` entry, got `{}`", w.name),
                })?;
            let (wdata, r) = take_f32s(rest, w.shape.iter().product(), WHAT)?;
            let (bias, r) = take_f32s(r, b.shape.iter().product(), WHAT)?;
            rest = r;
            let weight = Tensor::new(w.shape, wdata)?;
            layers.insert(name.to_string(), ConvLayer { weight, bias });
        }
        if !rest.is_empty() {
            return Err(Error::Format {
                what: WHAT,
                reason: format!("{} trailing payload bytes", rest.len()),
            });
        }
        Ok(Self {
            seed: header.seed,
            mode: header.mode,
            widths: header.widths,
            key_gain: header.key_gain,
            layers,
        })
    }
}

const WEIGHTS_FORMAT: &str = "pam-weights/1";

#[derive(Serialize, Deserialize)]
struct TensorEntry {
    name: String,
    shape: Vec<usize>,
}

#[derive(Serialize, Deserialize)]
struct WeightsHeader {
    format: String,
    seed: u64,
    mode: FeatureMode,
    widths: Widths,
    key_gain: f32,
    tensors: Vec<TensorEntry>,
}

fn he_init(rng: &mut ChaCha8Rng, kernel: usize, cin: usize, cout: usize) -> ConvLayer {
    let fan_in = (kernel * kernel * cin) as f32;
    let normal = Normal::new(0.0f32, (2.0 / fan_in).sqrt()).expect("positive std");
    let data = (0..kernel * kernel * cin * cout)
        .map(|_| normal.sample(rng))
        .collect();
    ConvLayer {
        weight: Tensor::new(vec![kernel, kernel, cin, cout], data).expect("shape matches data"),
        bias: vec![0.0; cout],
    }
}

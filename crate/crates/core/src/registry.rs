//! Name-keyed factories for encoders, decoders and trigger policies.
//!
//! Names may carry one argument after `=`, e.g. `periodic=5`.

use std::collections::BTreeMap;
use std::sync::Arc;

use crate::decoder::{LabelPropagationDecoder, MaskDecoder, RefinementDecoder};
use crate::encoder::{EncoderWeights, FrameEncoder, HandcraftedEncoder, SeededConvEncoder, Widths};
use crate::error::{Error, Result};
use crate::pam::{
    EveryFrameTrigger, NeverTrigger, PeriodicTrigger, TriggerPolicy, TriggerThresholds,
    VariationAwareTrigger,
};

/// What an encoder factory gets to build from.
#[derive(Clone, Debug)]
pub struct EncoderParams {
    pub seed: u64,
    pub widths: Widths,
    pub key_gain: f32,
    /// Use these instead of generating weights.
    pub weights: Option<Arc<EncoderWeights>>,
}

#[derive(Clone, Copy, Debug)]
pub struct TriggerParams<'a> {
    pub thresholds: TriggerThresholds,
    pub arg: Option<&'a str>,
}

pub type EncoderFactory =
    Arc<dyn Fn(&EncoderParams) -> Result<Arc<dyn FrameEncoder>> + Send + Sync>;
pub type DecoderFactory = Arc<dyn Fn() -> Box<dyn MaskDecoder> + Send + Sync>;
pub type TriggerFactory =
    Arc<dyn Fn(&TriggerParams<'_>) -> Result<Box<dyn TriggerPolicy>> + Send + Sync>;

struct Table<F> {
    kind: &'static str,
    entries: BTreeMap<String, F>,
    aliases: BTreeMap<String, String>,
}

impl<F: Clone> Table<F> {
    fn new(kind: &'static str) -> Self {
        Self {
            kind,
            entries: BTreeMap::new(),
            aliases: BTreeMap::new(),
        }
    }

    fn insert(&mut self, name: &str, aliases: &[&str], factory: F) {
        self.entries.insert(name.to_string(), factory);
        for a in aliases {
            self.aliases.insert(a.to_string(), name.to_string());
        }
    }

    fn canonical<'a>(&'a self, name: &'a str) -> &'a str {
        self.aliases.get(name).map(String::as_str).unwrap_or(name)
    }

    fn get(&self, name: &str) -> Result<F> {
        self.entries
            .get(self.canonical(name))
            .cloned()
            .ok_or_else(|| Error::UnknownStrategy {
                kind: self.kind,
                name: name.to_string(),
            })
    }

    fn names(&self) -> Vec<&str> {
        self.entries.keys().map(String::as_str).collect()
    }
}

/// Splits `name=arg`.
pub fn split_spec(spec: &str) -> (&str, Option<&str>) {
    match spec.split_once('=') {
        Some((n, a)) => (n.trim(), Some(a.trim())),
        None => (spec.trim(), None),
    }
}

pub struct StrategyRegistry {
    encoders: Table<EncoderFactory>,
    decoders: Table<DecoderFactory>,
    triggers: Table<TriggerFactory>,
}

impl Default for StrategyRegistry {
    fn default() -> Self {
        Self::builtin()
    }
}

fn no_arg(kind: &str, p: &TriggerParams<'_>) -> Result<()> {
    match p.arg {
        None => Ok(()),
        Some(a) => Err(Error::Config(format!(
            "trigger `{kind}` takes no argument, got `{a}`"
        ))),
    }
}

impl StrategyRegistry {
    pub fn empty() -> Self {
        Self {
            encoders: Table::new("encoder"),
            decoders: Table::new("decoder"),
            triggers: Table::new("trigger"),
        }
    }

    pub fn builtin() -> Self {
        let mut r = Self::empty();
        r.register_encoder(
            "seeded",
            &["seeded-conv"],
            Arc::new(|p: &EncoderParams| {
                let w = match &p.weights {
                    Some(w) => w.clone(),
                    None => Arc::new(EncoderWeights::seeded(p.seed, p.widths)),
                };
                Ok(Arc::new(SeededConvEncoder::new(w)?) as Arc<dyn FrameEncoder>)
            }),
        );
        r.register_encoder(
            "handcrafted",
            &[],
            Arc::new(|p: &EncoderParams| {
                let w = match &p.weights {
                    Some(w) => w.clone(),
                    None => Arc::new(EncoderWeights::handcrafted(p.key_gain)),
                };
                Ok(Arc::new(HandcraftedEncoder::new(w)?) as Arc<dyn FrameEncoder>)
            }),
        );
        r.register_decoder(
            "refine",
            &["refinement"],
            Arc::new(|| Box::new(RefinementDecoder)),
        );
        r.register_decoder(
            "propagate",
            &["label-propagation"],
            Arc::new(|| Box::new(LabelPropagationDecoder)),
        );
        r.register_trigger(
            "var",
            &["variation-aware"],
            Arc::new(|p: &TriggerParams<'_>| {
                no_arg("var", p)?;
                Ok(Box::new(VariationAwareTrigger::new(p.thresholds)) as Box<dyn TriggerPolicy>)
            }),
        );
        r.register_trigger(
            "every",
            &["every-frame"],
            Arc::new(|p: &TriggerParams<'_>| {
                no_arg("every", p)?;
                Ok(Box::new(EveryFrameTrigger) as Box<dyn TriggerPolicy>)
            }),
        );
        r.register_trigger(
            "periodic",
            &[],
            Arc::new(|p: &TriggerParams<'_>| {
                let n = p.arg.ok_or_else(|| {
                    Error::Config("periodic trigger needs a period: periodic=N".into())
                })?;
                let n = n
                    .parse()
                    .map_err(|_| Error::Config(format!("bad periodic period `{n}`")))?;
                Ok(Box::new(PeriodicTrigger::new(n)?) as Box<dyn TriggerPolicy>)
            }),
        );
        r.register_trigger(
            "never",
            &[],
            Arc::new(|p: &TriggerParams<'_>| {
                no_arg("never", p)?;
                Ok(Box::new(NeverTrigger) as Box<dyn TriggerPolicy>)
            }),
        );
        r
    }

    pub fn register_encoder(&mut self, name: &str, aliases: &[&str], f: EncoderFactory) {
        self.encoders.insert(name, aliases, f);
    }

    pub fn register_decoder(&mut self, name: &str, aliases: &[&str], f: DecoderFactory) {
        self.decoders.insert(name, aliases, f);
    }

    pub fn register_trigger(&mut self, name: &str, aliases: &[&str], f: TriggerFactory) {
        self.triggers.insert(name, aliases, f);
    }

    pub fn encoder(&self, name: &str, params: &EncoderParams) -> Result<Arc<dyn FrameEncoder>> {
        (self.encoders.get(name)?)(params)
    }

    pub fn decoder(&self, name: &str) -> Result<Box<dyn MaskDecoder>> {
        Ok((self.decoders.get(name)?)())
    }

    /// `spec` is `name` or `name=arg`.
    pub fn trigger(
        &self,
        spec: &str,
        thresholds: TriggerThresholds,
    ) -> Result<Box<dyn TriggerPolicy>> {
        let (name, arg) = split_spec(spec);
        (self.triggers.get(name)?)(&TriggerParams { thresholds, arg })
    }

    /// `spec` with its name resolved through aliases, e.g. `variation-aware`
    /// becomes `var`. Unknown names are an error.
    pub fn canonical_trigger(&self, spec: &str) -> Result<String> {
        let (name, arg) = split_spec(spec);
        self.triggers.get(name)?;
        let name = self.triggers.canonical(name);
        Ok(match arg {
            Some(a) => format!("{name}={a}"),
            None => name.to_string(),
        })
    }

    pub fn encoder_names(&self) -> Vec<&str> {
        self.encoders.names()
    }

    pub fn decoder_names(&self) -> Vec<&str> {
        self.decoders.names()
    }

    pub fn trigger_names(&self) -> Vec<&str> {
        self.triggers.names()
    }
}

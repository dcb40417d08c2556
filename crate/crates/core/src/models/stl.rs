use crate::autodiff::{Tape, Var};
use crate::calendar::CalendarStamps;
use crate::error::{Error, Result};
use crate::nn::{
    positional_encoding, Bound, DateTimeEmbedding, DynamicCoder, ParamStore, ResLBlock,
    SpatialAttention,
};
use crate::rng::Rng;
use crate::tensor::Tensor;

use super::config::{ModelConfig, Route};

#[derive(Clone, Debug)]
pub struct TemporalRoute {
    pub embed: DateTimeEmbedding,
    pub encoder: DynamicCoder,
    pub mid1: ResLBlock,
    pub mid2: ResLBlock,
    pub decoder: DynamicCoder,
}

#[derive(Clone, Debug)]
pub struct SpatialRoute {
    pub pre1: ResLBlock,
    pub pre2: ResLBlock,
    pub attn: SpatialAttention,
    pub post: ResLBlock,
}

/// Sum of up to three routes over `[B, C, T]` inputs.
#[derive(Clone, Debug)]
pub struct StlModel {
    pub core: Option<ResLBlock>,
    pub temporal: Option<TemporalRoute>,
    pub spatial: Option<SpatialRoute>,
    /// Positional encoding laid out `[C, T]`, shared by both routes.
    pub pe: Tensor,
    temporal_active: bool,
}

impl StlModel {
    pub fn new(cfg: &ModelConfig, store: &mut ParamStore, rng: &mut Rng) -> Result<Self> {
        let (t, tau, c, h) = (cfg.obs_len, cfg.pred_len, cfg.channels, cfg.hidden_size);
        let pc = cfg.per_channel_weights.then_some(c);
        let block = |store: &mut ParamStore, rng: &mut Rng, name: &str, i: usize, o: usize| {
            ResLBlock::new(store, name, i, o, cfg.activation, cfg.dropout, pc, rng)
        };
        let core = if cfg.has_route(Route::Core) {
            Some(block(store, rng, "core", t, tau)?)
        } else {
            None
        };
        // Without components an inactive temporal route has nothing to build.
        let temporal = if cfg.has_route(Route::Temporal) && !cfg.datetime_components.is_empty() {
            let embed = DateTimeEmbedding::new(
                store,
                "temporal.datetime",
                &cfg.datetime_components,
                cfg.minute_bins,
                rng,
            )?;
            let enc = block(store, rng, "temporal.encoder", t, h)?;
            let encoder = DynamicCoder::new(store, "temporal.encoder", enc);
            let mid1 = block(store, rng, "temporal.mid1", h, h)?;
            let mid2 = block(store, rng, "temporal.mid2", h, tau)?;
            let dec = block(store, rng, "temporal.decoder", tau, tau)?;
            let decoder = DynamicCoder::new(store, "temporal.decoder", dec);
            Some(TemporalRoute {
                embed,
                encoder,
                mid1,
                mid2,
                decoder,
            })
        } else {
            None
        };
        let spatial = if cfg.has_route(Route::Spatial) {
            Some(SpatialRoute {
                pre1: block(store, rng, "spatial.pre1", t, h)?,
                pre2: block(store, rng, "spatial.pre2", h, tau)?,
                attn: SpatialAttention::new(cfg.attention_axis),
                post: block(store, rng, "spatial.post", tau, tau)?,
            })
        } else {
            None
        };
        Ok(Self {
            core,
            temporal,
            spatial,
            pe: positional_encoding(t, c).transpose()?,
            temporal_active: cfg.temporal_active(),
        })
    }

    pub fn temporal_active(&self) -> bool {
        self.temporal_active && self.temporal.is_some()
    }

    /// `x` is `[B, C, T]`; returns `[B, C, τ]`.
    pub fn forward(
        &self,
        tape: &mut Tape,
        p: &Bound,
        x: Var,
        obs: &CalendarStamps,
        target: &CalendarStamps,
    ) -> Result<Var> {
        let mut outs = Vec::with_capacity(3);
        if let Some(core) = &self.core {
            outs.push(core.forward(tape, p, x)?);
        }
        let needs_pe = self.temporal_active() || self.spatial.is_some();
        let xpe = if needs_pe {
            let pe = tape.constant(self.pe.clone());
            Some(tape.add(x, pe)?)
        } else {
            None
        };
        if let (Some(tr), true) = (&self.temporal, self.temporal_active()) {
            let xpe = xpe.expect("positional input built when temporal is active");
            if obs.components().is_empty() || target.components().is_empty() {
                return Err(Error::Data(
                    "the temporal route is active but no calendar stamps were supplied".into(),
                ));
            }
            let h = tr.encoder.forward(tape, p, xpe, &tr.embed, obs)?;
            let h = tr.mid1.forward(tape, p, h)?;
            let h = tr.mid2.forward(tape, p, h)?;
            outs.push(tr.decoder.forward(tape, p, h, &tr.embed, target)?);
        }
        if let Some(sr) = &self.spatial {
            let xpe = xpe.expect("positional input built when spatial is present");
            let h = sr.pre1.forward(tape, p, xpe)?;
            let h = sr.pre2.forward(tape, p, h)?;
            let h = sr.attn.forward(tape, h)?;
            outs.push(sr.post.forward(tape, p, h)?);
        }
        let mut acc = outs[0];
        for &o in &outs[1..] {
            acc = tape.add(acc, o)?;
        }
        Ok(acc)
    }
}

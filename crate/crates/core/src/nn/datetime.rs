use std::collections::BTreeMap;

use crate::autodiff::{Tape, Var};
use crate::calendar::{CalendarStamps, Component};
use crate::error::{Error, Result};
use crate::rng::Rng;
use crate::tensor::Tensor;

use super::linear::LinearLayer;
use super::params::{Bound, ParamId, ParamStore};

/// Embedding width per calendar component.
pub const EMBED_DIM: usize = 8;
const EMBED_INIT_STD: f64 = 0.02;

/// Per-component lookup tables followed by a linear reducer to one scalar
/// per step. Tables are concatenated in canonical [`Component`] order no
/// matter how the component list was given.
#[derive(Clone, Debug)]
pub struct DateTimeEmbedding {
    tables: BTreeMap<Component, ParamId>,
    pub reducer: LinearLayer,
    minute_bins: usize,
}

impl DateTimeEmbedding {
    pub fn new(
        store: &mut ParamStore,
        name: &str,
        components: &[Component],
        minute_bins: usize,
        rng: &mut Rng,
    ) -> Result<Self> {
        let mut comps = components.to_vec();
        comps.sort();
        comps.dedup();
        if comps.is_empty() {
            return Err(Error::Config("date-time embedding needs at least one component".into()));
        }
        let mut tables = BTreeMap::new();
        for c in &comps {
            let t = Tensor::normal(&[c.cardinality(minute_bins), EMBED_DIM], 0.0, EMBED_INIT_STD, rng)?;
            tables.insert(*c, store.add(format!("{name}.{}", c.name()), t));
        }
        let reducer = LinearLayer::new(
            store,
            &format!("{name}.reducer"),
            EMBED_DIM * comps.len(),
            1,
            None,
            rng,
        )?;
        Ok(Self {
            tables,
            reducer,
            minute_bins,
        })
    }

    pub fn components(&self) -> impl Iterator<Item = Component> + '_ {
        self.tables.keys().copied()
    }

    pub fn table(&self, c: Component) -> Option<ParamId> {
        self.tables.get(&c).copied()
    }

    /// Features for `batch` sequences of `len` steps each; `stamps` holds
    /// `batch * len` rows. Returns `[batch, len]`.
    pub fn forward(
        &self,
        tape: &mut Tape,
        p: &Bound,
        stamps: &CalendarStamps,
        batch: usize,
        len: usize,
    ) -> Result<Var> {
        if stamps.len() != batch * len {
            return Err(Error::Data(format!(
                "expected {} stamp rows ({batch}×{len}), got {}",
                batch * len,
                stamps.len()
            )));
        }
        let mut parts = Vec::with_capacity(self.tables.len());
        for (&c, &table) in &self.tables {
            let idx = stamps
                .column(c)
                .ok_or_else(|| Error::Data(format!("stamps lack the {c} component")))?;
            let card = c.cardinality(self.minute_bins);
            if let Some(bad) = idx.iter().find(|&&i| i >= card) {
                return Err(Error::Data(format!("{c} index {bad} outside 0..{card}")));
            }
            parts.push(tape.gather(p.var(table), &idx)?);
        }
        let emb = tape.concat(&parts)?;
        let out = self.reducer.forward(tape, p, emb)?;
        tape.reshape(out, &[batch, len])
    }
}

/// Rescale to [0, 1] along the last axis (rank 1 or 2). A slice whose max
/// equals its min maps to zeros.
pub fn minmax_normalize(tape: &mut Tape, x: Var) -> Result<Var> {
    match tape.shape(x).len() {
        1 => {
            let lo = tape.min(x, None)?;
            let hi = tape.max(x, None)?;
            let num = tape.sub(x, lo)?;
            let range = tape.sub(hi, lo)?;
            tape.div_or_zero(num, range)
        }
        2 => {
            // Work on [len, batch] so per-row stats broadcast as a trailing row.
            let xt = tape.transpose(x)?;
            let lo = tape.min(x, Some(1))?;
            let hi = tape.max(x, Some(1))?;
            let num = tape.sub(xt, lo)?;
            let range = tape.sub(hi, lo)?;
            let y = tape.div_or_zero(num, range)?;
            tape.transpose(y)
        }
        _ => Err(Error::dim("minmax_normalize", tape.shape(x), &[])),
    }
}

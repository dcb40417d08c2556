use std::collections::{BTreeMap, BTreeSet};
use std::fmt::Write as _;

use crate::error::{Error, Result};

use super::report::ReportRow;

fn inverse(mse: f64) -> String {
    if mse == 0.0 {
        "inf".into()
    } else {
        format!("{:.16e}", 1.0 / mse)
    }
}

/// Accuracy curves: `tau` then one 1/MSE column per variant, in first-seen
/// order. Rows sharing (variant, τ) are averaged first; cells a variant
/// lacks stay empty.
pub fn inverse_mse_curves(rows: &[ReportRow]) -> Result<String> {
    if rows.is_empty() {
        return Err(Error::Usage("no report rows to plot".into()));
    }
    let mut variants: Vec<&str> = Vec::new();
    let mut taus = BTreeSet::new();
    let mut acc: BTreeMap<(&str, usize), (f64, usize)> = BTreeMap::new();
    for r in rows {
        if !variants.contains(&r.variant.as_str()) {
            variants.push(&r.variant);
        }
        taus.insert(r.pred_len);
        if let Some(m) = r.mse {
            let e = acc.entry((&r.variant, r.pred_len)).or_insert((0.0, 0));
            e.0 += m;
            e.1 += 1;
        }
    }
    let mut out = String::from("tau");
    for v in &variants {
        let _ = write!(out, ",{v}");
    }
    out.push('\n');
    for tau in taus {
        let _ = write!(out, "{tau}");
        for v in &variants {
            out.push(',');
            if let Some((s, n)) = acc.get(&(*v, tau)) {
                out.push_str(&inverse(s / *n as f64));
            }
        }
        out.push('\n');
    }
    Ok(out)
}

/// Prediction traces for one channel: `t`, `truth`, then one column per
/// model. Ground truth covers T+τ rows; predictions fill only the last τ.
pub fn prediction_traces(observed: &[f64], target: &[f64], predictions: &[(String, Vec<f64>)]) -> Result<String> {
    let tau = target.len();
    for (name, p) in predictions {
        if p.len() != tau {
            return Err(Error::Usage(format!("trace {name:?} has {} steps, expected {tau}", p.len())));
        }
    }
    let mut out = String::from("t,truth");
    for (name, _) in predictions {
        let _ = write!(out, ",{name}");
    }
    out.push('\n');
    let t = observed.len();
    for (i, v) in observed.iter().chain(target).enumerate() {
        let _ = write!(out, "{i},{v:.16e}");
        for (_, p) in predictions {
            out.push(',');
            if i >= t {
                let _ = write!(out, "{:.16e}", p[i - t]);
            }
        }
        out.push('\n');
    }
    Ok(out)
}

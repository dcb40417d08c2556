use proptest::prelude::*;
use stl_core::autodiff::Tape;
use stl_core::calendar::{CalendarStamps, Component};
use stl_core::nn::{
    positional_encoding, Activation, AttentionAxis, DateTimeEmbedding, DynamicCoder, ParamStore, ResLBlock,
    SpatialAttention,
};
use stl_core::{Rng, Tensor};

fn tensor(shape: &'static [usize]) -> impl Strategy<Value = Tensor> {
    let n: usize = shape.iter().product();
    prop::collection::vec(-2.0f64..2.0, n).prop_map(move |d| Tensor::new(shape, d).unwrap())
}

/// Stamps for `len` steps with the given component order, drawn from `seed`.
fn stamps(components: &[Component], len: usize, seed: u64) -> CalendarStamps {
    let mut rng = Rng::new(seed);
    let mut codes = Vec::new();
    let rows: Vec<Vec<u16>> = (0..len)
        .map(|_| Component::ALL.iter().map(|c| rng.below(c.cardinality(4)) as u16).collect())
        .collect();
    for row in &rows {
        for c in components {
            let j = Component::ALL.iter().position(|a| a == c).unwrap();
            codes.push(row[j]);
        }
    }
    CalendarStamps::new(components.to_vec(), 4, len, codes).unwrap()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn attention_rows_are_distributions(x in tensor(&[4, 6])) {
        let mut tape = Tape::new();
        let v = tape.constant(x);
        let w = SpatialAttention::new(AttentionAxis::Rows).weights(&mut tape, v).unwrap();
        for row in tape.value(w).data().chunks(4) {
            prop_assert!((row.iter().sum::<f64>() - 1.0).abs() <= 1e-12);
        }
    }

    #[test]
    fn attention_is_channel_equivariant(x in tensor(&[4, 6]), seed in any::<u64>()) {
        let mut perm: Vec<usize> = (0..4).collect();
        Rng::new(seed).shuffle(&mut perm);
        let rows: Vec<Vec<f64>> = (0..4).map(|i| x.data()[i * 6..(i + 1) * 6].to_vec()).collect();
        let permuted = Tensor::from_rows(&perm.iter().map(|&i| rows[i].clone()).collect::<Vec<_>>()).unwrap();
        let attn = SpatialAttention::default();
        let mut tape = Tape::new();
        let a = tape.constant(x);
        let b = tape.constant(permuted);
        let ya = attn.forward(&mut tape, a).unwrap();
        let yb = attn.forward(&mut tape, b).unwrap();
        let (ya, yb) = (tape.value(ya), tape.value(yb));
        for (k, &i) in perm.iter().enumerate() {
            for j in 0..6 {
                prop_assert!((yb.at(&[k, j]) - ya.at(&[i, j])).abs() <= 1e-12);
            }
        }
    }

    #[test]
    fn positional_encoding_is_deterministic(len in 1usize..64, c in 1usize..16) {
        let a = positional_encoding(len, c);
        prop_assert!(a.bit_eq(&positional_encoding(len, c)));
        prop_assert_eq!(a.shape(), &[len, c]);
    }

    #[test]
    fn closed_gate_reduces_to_the_inner_block(x in tensor(&[2, 3, 5]), seed in any::<u64>()) {
        let mut rng = Rng::new(seed);
        let mut store = ParamStore::new();
        let embed = DateTimeEmbedding::new(&mut store, "dt", &[Component::Weekday, Component::Hour], 4, &mut rng).unwrap();
        let inner = ResLBlock::new(&mut store, "blk", 5, 4, Activation::Silu, 0.0, None, &mut rng).unwrap();
        let coder = DynamicCoder::new(&mut store, "blk", inner);
        *store.get_mut(coder.gate) = Tensor::scalar(0.0);
        let st = stamps(&[Component::Weekday, Component::Hour], 10, seed ^ 1);
        let mut tape = Tape::new();
        let p = store.bind(&mut tape);
        let v = tape.constant(x);
        let gated = coder.forward(&mut tape, &p, v, &embed, &st).unwrap();
        let plain = coder.inner.forward(&mut tape, &p, v).unwrap();
        prop_assert!(tape.value(gated).bit_eq(tape.value(plain)));
    }

    #[test]
    fn datetime_features_ignore_storage_order(seed in any::<u64>(), perm_seed in any::<u64>()) {
        let mut given = vec![Component::Month, Component::Date, Component::Weekday, Component::Hour, Component::Minute];
        let mut shuffled = given.clone();
        Rng::new(perm_seed).shuffle(&mut shuffled);
        let build = |comps: &[Component]| {
            let mut store = ParamStore::new();
            let e = DateTimeEmbedding::new(&mut store, "dt", comps, 4, &mut Rng::new(seed)).unwrap();
            (store, e)
        };
        let (sa, ea) = build(&given);
        let (sb, eb) = build(&shuffled);
        prop_assert!(sa.bit_eq(&sb));
        given.reverse();
        let st_a = stamps(&given, 12, seed);
        let st_b = stamps(&shuffled, 12, seed);
        let run = |store: &ParamStore, e: &DateTimeEmbedding, st: &CalendarStamps| {
            let mut tape = Tape::new();
            let p = store.bind(&mut tape);
            let y = e.forward(&mut tape, &p, st, 3, 4).unwrap();
            tape.value(y).clone()
        };
        prop_assert!(run(&sa, &ea, &st_a).bit_eq(&run(&sb, &eb, &st_b)));
    }
}

use crate::tensor::Tensor;

/// Fixed sinusoidal encoding of shape `[len × channels]`.
///
/// Column `2i` holds `sin(p / 10000^(2i/C))` and column `2i+1` the matching
/// cosine; with an odd channel count the last column is an unpaired sine.
pub fn positional_encoding(len: usize, channels: usize) -> Tensor {
    assert!(len >= 1 && channels >= 1, "positional encoding needs len, channels >= 1");
    let mut data = Vec::with_capacity(len * channels);
    for p in 0..len {
        for j in 0..channels {
            let i = j / 2;
            let freq = 1.0 / 10000f64.powf((2 * i) as f64 / channels as f64);
            let angle = p as f64 * freq;
            data.push(if j % 2 == 0 { angle.sin() } else { angle.cos() });
        }
    }
    Tensor::new(&[len, channels], data).expect("shape matches data")
}

use crate::calendar::{CalendarStamps, Timestamp};
use crate::error::{Error, Result};
use crate::tensor::Tensor;

use super::split::Segment;

/// One observation/target pair.
#[derive(Clone, Debug)]
pub struct Window {
    /// `[T, C]`.
    pub obs: Tensor,
    /// `[τ, C]`.
    pub target: Tensor,
    pub obs_stamps: CalendarStamps,
    pub target_stamps: CalendarStamps,
}

/// Stacked windows ready for a forward pass.
#[derive(Clone, Debug)]
pub struct Batch {
    /// `[B, T, C]`.
    pub x: Tensor,
    /// `[B, τ, C]`.
    pub y: Tensor,
    /// `B·T` rows.
    pub obs_stamps: CalendarStamps,
    /// `B·τ` rows.
    pub target_stamps: CalendarStamps,
}

impl Batch {
    pub fn size(&self) -> usize {
        self.x.shape()[0]
    }
}

/// Sliding windows over a segment. Windows are materialized on demand.
#[derive(Clone, Debug)]
pub struct WindowedDataset {
    segment: Segment,
    obs_len: usize,
    pred_len: usize,
    stride: usize,
    count: usize,
}

/// Window a segment with observation length `obs_len` and horizon
/// `pred_len`; there are `(len − T − τ) / stride + 1` windows.
pub fn make_windows(segment: &Segment, obs_len: usize, pred_len: usize, stride: usize) -> Result<WindowedDataset> {
    if obs_len == 0 || pred_len == 0 || stride == 0 {
        return Err(Error::Config(format!(
            "window lengths and stride must be >= 1 (T={obs_len}, tau={pred_len}, stride={stride})"
        )));
    }
    let need = obs_len + pred_len;
    if segment.len() < need {
        return Err(Error::Data(format!(
            "segment of {} rows cannot hold one window with T={obs_len}, tau={pred_len}",
            segment.len()
        )));
    }
    Ok(WindowedDataset {
        segment: segment.clone(),
        obs_len,
        pred_len,
        stride,
        count: (segment.len() - need) / stride + 1,
    })
}

impl WindowedDataset {
    pub fn len(&self) -> usize {
        self.count
    }

    pub fn is_empty(&self) -> bool {
        self.count == 0
    }

    pub fn obs_len(&self) -> usize {
        self.obs_len
    }

    pub fn pred_len(&self) -> usize {
        self.pred_len
    }

    pub fn channels(&self) -> usize {
        self.segment.channels()
    }

    pub fn segment(&self) -> &Segment {
        &self.segment
    }

    /// First row of window `i` within the segment.
    pub fn start(&self, i: usize) -> usize {
        assert!(i < self.count, "window {i} out of range 0..{}", self.count);
        i * self.stride
    }

    fn rows(&self, start: usize, len: usize) -> &[f64] {
        let c = self.channels();
        &self.segment.values.data()[start * c..(start + len) * c]
    }

    pub fn window(&self, i: usize) -> Window {
        let s = self.start(i);
        let (t, tau, c) = (self.obs_len, self.pred_len, self.channels());
        Window {
            obs: Tensor::new(&[t, c], self.rows(s, t).to_vec()).expect("window shape"),
            target: Tensor::new(&[tau, c], self.rows(s + t, tau).to_vec()).expect("window shape"),
            obs_stamps: self.segment.stamps.slice(s, t),
            target_stamps: self.segment.stamps.slice(s + t, tau),
        }
    }

    /// Observation and target timestamps of window `i`.
    pub fn times(&self, i: usize) -> (&[Timestamp], &[Timestamp]) {
        let s = self.start(i);
        let ts = &self.segment.timestamps;
        (&ts[s..s + self.obs_len], &ts[s + self.obs_len..s + self.obs_len + self.pred_len])
    }

    /// Stack the windows named by `indices`.
    pub fn batch(&self, indices: &[usize]) -> Batch {
        assert!(!indices.is_empty(), "empty batch");
        let (t, tau, c) = (self.obs_len, self.pred_len, self.channels());
        let b = indices.len();
        let mut x = Vec::with_capacity(b * t * c);
        let mut y = Vec::with_capacity(b * tau * c);
        let stamps = &self.segment.stamps;
        let mut obs = stamps.slice(0, 0);
        let mut tgt = stamps.slice(0, 0);
        for &i in indices {
            let s = self.start(i);
            x.extend_from_slice(self.rows(s, t));
            y.extend_from_slice(self.rows(s + t, tau));
            obs.extend(&stamps.slice(s, t)).expect("same components");
            tgt.extend(&stamps.slice(s + t, tau)).expect("same components");
        }
        Batch {
            x: Tensor::new(&[b, t, c], x).expect("batch shape"),
            y: Tensor::new(&[b, tau, c], y).expect("batch shape"),
            obs_stamps: obs,
            target_stamps: tgt,
        }
    }

    /// Consecutive batches of at most `size` windows in index order.
    pub fn batches(&self, size: usize) -> impl Iterator<Item = Batch> + '_ {
        let idx: Vec<usize> = (0..self.count).collect();
        let size = size.max(1);
        (0..self.count.div_ceil(size)).map(move |k| {
            let end = ((k + 1) * size).min(self.count);
            self.batch(&idx[k * size..end])
        })
    }
}

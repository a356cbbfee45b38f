//! Reference full-resolution background subtraction methods.
//!
//! All thresholds are strict: a pixel is foreground when `|a - b| > th`.

use std::collections::VecDeque;

use num_rational::Ratio;

use crate::error::{Error, Result};
use crate::frame_io::{Frame, Mask};

fn thresholded_diff(frame: &Frame, reference: &Frame, th: u8) -> Result<Mask> {
    if !frame.same_dims(reference) {
        return Err(Error::DimensionMismatch(format!(
            "frame is {}x{}, reference is {}x{}",
            frame.width(),
            frame.height(),
            reference.width(),
            reference.height()
        )));
    }
    let data = frame
        .data()
        .iter()
        .zip(reference.data())
        .map(|(&a, &b)| a.abs_diff(b) > th)
        .collect();
    Mask::new(frame.width(), frame.height(), data)
}

/// Difference against a fixed background image.
pub fn static_diff(frame: &Frame, background: &Frame, th: u8) -> Result<Mask> {
    thresholded_diff(frame, background, th)
}

/// Difference against the previous frame.
pub fn frame_diff(frame: &Frame, previous: &Frame, th: u8) -> Result<Mask> {
    thresholded_diff(frame, previous, th)
}

/// Sliding-window arithmetic mean of the last `window` frames, kept as exact
/// integer sums.
#[derive(Clone, Debug)]
pub struct MeanBackground {
    window: usize,
    buffer: VecDeque<Frame>,
    sums: Vec<u32>,
    dims: Option<(usize, usize)>,
}

impl MeanBackground {
    pub fn new(window: usize) -> Result<Self> {
        if window == 0 {
            return Err(Error::invalid("window", "must be at least 1"));
        }
        Ok(Self {
            window,
            buffer: VecDeque::with_capacity(window + 1),
            sums: Vec::new(),
            dims: None,
        })
    }

    pub fn window(&self) -> usize {
        self.window
    }

    /// Frames currently in the window.
    pub fn len(&self) -> usize {
        self.buffer.len()
    }

    pub fn is_empty(&self) -> bool {
        self.buffer.is_empty()
    }

    /// Pushes a frame, evicting the oldest once the window is full.
    pub fn update(&mut self, frame: &Frame) -> Result<()> {
        match self.dims {
            None => {
                self.dims = Some((frame.width(), frame.height()));
                self.sums = vec![0; frame.data().len()];
            }
            Some((w, h)) if (w, h) != (frame.width(), frame.height()) => {
                return Err(Error::DimensionMismatch(format!(
                    "frame is {}x{}, window holds {w}x{h}",
                    frame.width(),
                    frame.height()
                )));
            }
            Some(_) => {}
        }
        for (s, &v) in self.sums.iter_mut().zip(frame.data()) {
            *s += v as u32;
        }
        self.buffer.push_back(frame.clone());
        if self.buffer.len() > self.window {
            let old = self.buffer.pop_front().expect("window is non-empty");
            for (s, &v) in self.sums.iter_mut().zip(old.data()) {
                *s -= v as u32;
            }
        }
        Ok(())
    }

    /// Exact mean at pixel index `p`, or `None` before the first frame.
    pub fn mean_at(&self, p: usize) -> Option<Ratio<u32>> {
        if self.buffer.is_empty() {
            return None;
        }
        Some(Ratio::new(self.sums[p], self.buffer.len() as u32))
    }

    /// 8-bit rendering of the mean, rounding halves up.
    pub fn background(&self) -> Option<Frame> {
        let (w, h) = self.dims?;
        if self.buffer.is_empty() {
            return None;
        }
        let n = self.buffer.len() as u32;
        let data = self
            .sums
            .iter()
            .map(|&s| ((2 * s + n) / (2 * n)) as u8)
            .collect();
        Frame::new(w, h, data).ok()
    }
}

/// Weighted mean of frames, weights summing to 1, rounded to nearest.
pub fn weighted_mean(frames: &[Frame], weights: &[f64]) -> Result<Frame> {
    let first = frames
        .first()
        .ok_or_else(|| Error::invalid("frames", "at least one frame is required"))?;
    if frames.len() != weights.len() {
        return Err(Error::invalid(
            "weights",
            format!("{} weights for {} frames", weights.len(), frames.len()),
        ));
    }
    if weights.iter().any(|w| !(*w >= 0.0)) {
        return Err(Error::invalid("weights", "must be non-negative"));
    }
    let total: f64 = weights.iter().sum();
    if (total - 1.0).abs() > 1e-9 {
        return Err(Error::invalid(
            "weights",
            format!("sum to {total}, expected 1"),
        ));
    }
    if let Some(f) = frames.iter().find(|f| !f.same_dims(first)) {
        return Err(Error::DimensionMismatch(format!(
            "frame {} is {}x{}, expected {}x{}",
            f.index(),
            f.width(),
            f.height(),
            first.width(),
            first.height()
        )));
    }
    let data = (0..first.data().len())
        .map(|p| {
            let v: f64 = frames
                .iter()
                .zip(weights)
                .map(|(f, w)| f.data()[p] as f64 * w)
                .sum();
            v.round().clamp(0.0, 255.0) as u8
        })
        .collect();
    Frame::new(first.width(), first.height(), data)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn px(v: &[u8]) -> Frame {
        Frame::new(v.len(), 1, v.to_vec()).unwrap()
    }

    #[test]
    fn static_diff_boundary() {
        let bg = px(&[100, 100, 100]);
        assert_eq!(static_diff(&bg, &bg, 0).unwrap().count_true(), 0);
        let f = px(&[150, 200, 49]);
        let m = static_diff(&f, &bg, 50).unwrap();
        // |150-100| = 50 is not > 50; |49-100| = 51 is
        assert_eq!(m.data(), &[false, true, true]);
        assert!(static_diff(&px(&[1, 2]), &bg, 0).is_err());
    }

    #[test]
    fn frame_diff_single_pixel() {
        let a = px(&[10, 10, 10]);
        let b = px(&[10, 16, 10]);
        assert_eq!(frame_diff(&b, &a, 5).unwrap().data(), &[false, true, false]);
        assert_eq!(frame_diff(&b, &a, 6).unwrap().count_true(), 0);
        assert_eq!(frame_diff(&a, &a, 0).unwrap().count_true(), 0);
    }

    #[test]
    fn running_mean() {
        let mut m = MeanBackground::new(2).unwrap();
        assert!(m.background().is_none());
        m.update(&px(&[10])).unwrap();
        m.update(&px(&[20])).unwrap();
        assert_eq!(m.mean_at(0), Some(Ratio::from_integer(15)));

        let mut m3 = MeanBackground::new(3).unwrap();
        for v in [1, 2, 4] {
            m3.update(&px(&[v])).unwrap();
        }
        assert_eq!(m3.mean_at(0), Some(Ratio::new(7, 3)));
        assert_eq!(m3.background().unwrap().data(), &[2]);
        // slide: 2, 4, 9 -> 5
        m3.update(&px(&[9])).unwrap();
        assert_eq!(m3.mean_at(0), Some(Ratio::from_integer(5)));

        assert!(m3.update(&px(&[1, 2])).is_err());
        assert!(MeanBackground::new(0).is_err());
    }

    #[test]
    fn round_half_up() {
        let mut m = MeanBackground::new(2).unwrap();
        m.update(&px(&[1])).unwrap();
        m.update(&px(&[2])).unwrap();
        assert_eq!(m.background().unwrap().data(), &[2]);
    }

    #[test]
    fn weighted() {
        let frames = [px(&[10, 0]), px(&[20, 100])];
        assert_eq!(
            weighted_mean(&frames, &[0.5, 0.5]).unwrap().data(),
            &[15, 50]
        );
        assert_eq!(
            weighted_mean(&frames, &[0.25, 0.75]).unwrap().data(),
            &[18, 75]
        );
        assert!(weighted_mean(&frames, &[0.5, 0.6]).is_err());
        assert!(weighted_mean(&frames, &[1.0]).is_err());
    }
}

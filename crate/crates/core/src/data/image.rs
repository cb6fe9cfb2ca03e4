//! Downsampling of grayscale images to the 8x8 feature grid.
//!
//! Bilinear resampling with the triangle kernel widened by the reduction
//! factor, so every source pixel contributes (the same filter PIL applies
//! for `BILINEAR` downscaling). Plain point-sampled bilinear would drop most
//! of a 28x28 image when reducing to 8x8.

/// Per-output-pixel `(first_source_index, weights)` along one axis.
fn axis_weights(src: usize, dst: usize) -> Vec<(usize, Vec<f64>)> {
    let scale = src as f64 / dst as f64;
    let support = scale.max(1.0);
    (0..dst)
        .map(|o| {
            let center = (o as f64 + 0.5) * scale;
            let lo = ((center - support).floor().max(0.0)) as usize;
            let hi = ((center + support).ceil() as usize).min(src);
            let mut w: Vec<f64> = (lo..hi)
                .map(|x| {
                    let t = (x as f64 + 0.5 - center) / support;
                    (1.0 - t.abs()).max(0.0)
                })
                .collect();
            let total: f64 = w.iter().sum();
            w.iter_mut().for_each(|v| *v /= total);
            (lo, w)
        })
        .collect()
}

/// Resamples a `rows x cols` byte image to `target x target` values in `[0, 1]`.
pub fn compress_image(img: &[u8], rows: usize, cols: usize, target: usize) -> Vec<f64> {
    assert_eq!(img.len(), rows * cols, "image size mismatch");
    let wx = axis_weights(cols, target);
    let wy = axis_weights(rows, target);
    // Horizontal pass: rows x target.
    let mut tmp = vec![0.0; rows * target];
    for r in 0..rows {
        let row = &img[r * cols..(r + 1) * cols];
        for (o, (lo, w)) in wx.iter().enumerate() {
            tmp[r * target + o] = w.iter().enumerate().map(|(k, wk)| wk * row[lo + k] as f64).sum();
        }
    }
    let mut out = vec![0.0; target * target];
    for (o, (lo, w)) in wy.iter().enumerate() {
        for c in 0..target {
            let v: f64 = w.iter().enumerate().map(|(k, wk)| wk * tmp[(lo + k) * target + c]).sum();
            out[o * target + c] = (v / 255.0).clamp(0.0, 1.0);
        }
    }
    out
}

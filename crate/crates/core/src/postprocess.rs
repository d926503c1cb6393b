//! Layer fusion, white noise and Gaussian blur.

use image::RgbImage;
use rand::Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use crate::renderer::RenderBuffer;

/// Source layer of a fused pixel.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[repr(u8)]
pub enum PixelLayer {
    Background = 0,
    Foreground = 1,
    Occluder = 2,
}

#[derive(Debug, Clone, PartialEq)]
pub struct FusedSample {
    pub rgb: RgbImage,
    pub layer: Vec<PixelLayer>,
    /// Instance id within the winning layer (0 where that layer is empty).
    pub instance: Vec<u32>,
    /// Visible pixels per foreground placement in the foreground layer alone.
    pub pre_visible: Vec<u64>,
    /// Visible pixels per foreground placement after occluders are fused.
    pub post_visible: Vec<u64>,
}

impl FusedSample {
    /// Fraction of each foreground object's pixels hidden by occluders.
    pub fn occlusion(&self) -> Vec<f64> {
        self.pre_visible
            .iter()
            .zip(&self.post_visible)
            .map(|(&pre, &post)| if pre == 0 { 0.0 } else { 1.0 - post as f64 / pre as f64 })
            .collect()
    }
}

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum PostprocessError {
    #[error("layer sizes differ: background {bg:?}, foreground {fg:?}, occluders {occ:?}")]
    DimensionMismatch {
        bg: (u32, u32),
        fg: (u32, u32),
        occ: (u32, u32),
    },
    #[error("blur kernel size {0} must be odd and positive")]
    EvenKernel(u32),
}

/// Layer order, not depth, decides: occluder over foreground over background.
pub fn fuse(
    bg: &RenderBuffer,
    fg: &RenderBuffer,
    occ: &RenderBuffer,
    fg_count: usize,
) -> Result<FusedSample, PostprocessError> {
    let dims = |b: &RenderBuffer| (b.width, b.height);
    if dims(bg) != dims(fg) || dims(fg) != dims(occ) {
        return Err(PostprocessError::DimensionMismatch {
            bg: dims(bg),
            fg: dims(fg),
            occ: dims(occ),
        });
    }
    let n = bg.pixel_count();
    let mut rgb = bg.rgb.clone();
    let mut layer = vec![PixelLayer::Background; n];
    let mut instance = bg.instance.clone();
    let pre_visible = fg.visible_counts(fg_count);
    let mut post_visible = pre_visible.clone();
    let width = bg.width as usize;
    for p in 0..n {
        let (x, y) = ((p % width) as u32, (p / width) as u32);
        if occ.instance[p] != 0 {
            rgb.put_pixel(x, y, *occ.rgb.get_pixel(x, y));
            layer[p] = PixelLayer::Occluder;
            instance[p] = occ.instance[p];
            if let Some(c) = (fg.instance[p] as usize)
                .checked_sub(1)
                .and_then(|i| post_visible.get_mut(i))
            {
                *c -= 1;
            }
        } else if fg.instance[p] != 0 {
            rgb.put_pixel(x, y, *fg.rgb.get_pixel(x, y));
            layer[p] = PixelLayer::Foreground;
            instance[p] = fg.instance[p];
        }
    }
    Ok(FusedSample {
        rgb,
        layer,
        instance,
        pre_visible,
        post_visible,
    })
}

/// Adds i.i.d. zero-mean Gaussian noise to every channel with a per-image
/// standard deviation drawn from `sigma_range` (8-bit units). Returns the sigma.
pub fn add_white_noise<R: Rng + ?Sized>(img: &mut RgbImage, rng: &mut R, sigma_range: [f64; 2]) -> f64 {
    let sigma = if sigma_range[1] > sigma_range[0] {
        rng.random_range(sigma_range[0]..=sigma_range[1])
    } else {
        sigma_range[0]
    };
    if sigma > 0.0 {
        let normal = Normal::new(0.0, sigma).expect("sigma is finite and positive");
        for c in img.iter_mut() {
            *c = (*c as f64 + normal.sample(rng)).round().clamp(0.0, 255.0) as u8;
        }
    }
    sigma
}

/// Normalized 1-D Gaussian weights of odd length `size`.
pub fn gaussian_kernel(size: u32, sigma: f64) -> Result<Vec<f64>, PostprocessError> {
    if size.is_multiple_of(2) {
        return Err(PostprocessError::EvenKernel(size));
    }
    let r = (size / 2) as i64;
    let w: Vec<f64> = (-r..=r)
        .map(|i| (-(i * i) as f64 / (2.0 * sigma * sigma)).exp())
        .collect();
    let sum: f64 = w.iter().sum();
    Ok(w.into_iter().map(|x| x / sum).collect())
}

/// Mirror index without repeating the edge sample (`dcb|abcd|cba`).
fn reflect(i: i64, n: i64) -> usize {
    if n == 1 {
        return 0;
    }
    let period = 2 * (n - 1);
    let m = i.rem_euclid(period);
    (if m < n { m } else { period - m }) as usize
}

/// Separable Gaussian convolution with reflected borders.
pub fn gaussian_blur(img: &RgbImage, size: u32, sigma: f64) -> Result<RgbImage, PostprocessError> {
    let kernel = gaussian_kernel(size, sigma)?;
    if size == 1 {
        return Ok(img.clone());
    }
    let (w, h) = (img.width() as usize, img.height() as usize);
    let r = (size / 2) as i64;
    // Source index for every (output position, tap), borders mirrored.
    let taps = |n: usize| -> Vec<usize> {
        (0..n as i64)
            .flat_map(|i| (-r..=r).map(move |k| reflect(i + k, n as i64)))
            .collect()
    };
    let (xs, ys) = (taps(w), taps(h));
    let len = kernel.len();
    let src = img.as_raw();
    let mut tmp = vec![0.0f64; src.len()];
    for y in 0..h {
        let row = &src[y * w * 3..(y + 1) * w * 3];
        for x in 0..w {
            let mut acc = [0.0; 3];
            for (k, &xi) in xs[x * len..(x + 1) * len].iter().enumerate() {
                for c in 0..3 {
                    acc[c] += kernel[k] * row[xi * 3 + c] as f64;
                }
            }
            tmp[(y * w + x) * 3..(y * w + x) * 3 + 3].copy_from_slice(&acc);
        }
    }
    let mut out = vec![0u8; src.len()];
    for y in 0..h {
        let rows = &ys[y * len..(y + 1) * len];
        for x in 0..w {
            let mut acc = [0.0; 3];
            for (k, &yi) in rows.iter().enumerate() {
                let at = (yi * w + x) * 3;
                for c in 0..3 {
                    acc[c] += kernel[k] * tmp[at + c];
                }
            }
            for c in 0..3 {
                out[(y * w + x) * 3 + c] = acc[c].round().clamp(0.0, 255.0) as u8;
            }
        }
    }
    Ok(RgbImage::from_raw(img.width(), img.height(), out).expect("buffer matches dimensions"))
}

/// Blurs with a kernel size drawn from `kernel_sizes` and sigma from
/// `sigma_range`. Returns the blurred image, size and sigma.
pub fn random_blur<R: Rng + ?Sized>(
    img: &RgbImage,
    rng: &mut R,
    kernel_sizes: &[u32],
    sigma_range: [f64; 2],
) -> Result<(RgbImage, u32, f64), PostprocessError> {
    if let Some(&even) = kernel_sizes.iter().find(|&&k| k % 2 == 0) {
        return Err(PostprocessError::EvenKernel(even));
    }
    let size = kernel_sizes[rng.random_range(0..kernel_sizes.len())];
    let sigma = if sigma_range[1] > sigma_range[0] {
        rng.random_range(sigma_range[0]..=sigma_range[1])
    } else {
        sigma_range[0]
    };
    Ok((gaussian_blur(img, size, sigma)?, size, sigma))
}
